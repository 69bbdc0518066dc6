//! Finite graphs of finite groups, words in their fundamental group relative
//! to a spanning tree, normal forms, and a finite quotient that is injective
//! on every vertex group.
//!
//! For an edge `e: u -> v` with maps `alpha: E -> G_u`, `omega: E -> G_v`, the
//! stable letter satisfies `t_e omega(x) t_e^-1 = alpha(x)`; tree edges have
//! `t_e = 1`.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{intertwine_free_actions, CosetSplit, FiniteGroup, FiniteHom, Perm};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub name: String,
    pub group: FiniteGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub name: String,
    pub src: usize,
    pub dst: usize,
    pub group: FiniteGroup,
    pub src_map: FiniteHom,
    pub dst_map: FiniteHom,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    spanning_tree: Vec<String>,
}

/// One directed traversal of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Step {
    edge: usize,
    fwd: bool,
}

impl Step {
    fn rev(self) -> Step {
        Step { edge: self.edge, fwd: !self.fwd }
    }
}

#[derive(Debug, Clone)]
struct EdgeData {
    src_split: CosetSplit,
    dst_split: CosetSplit,
    // preimage in E of image elements, usize::MAX elsewhere
    src_pre: Vec<usize>,
    dst_pre: Vec<usize>,
}

/// A validated graph of groups with a chosen spanning tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct GraphOfGroups {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    in_tree: Vec<bool>,
    root: usize,
    // tree path from the root to each vertex
    root_path: Vec<Vec<Step>>,
    bfs_order: Vec<usize>,
    data: Vec<EdgeData>,
}

impl PartialEq for GraphOfGroups {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges && self.in_tree == other.in_tree
    }
}

impl TryFrom<GraphRepr> for GraphOfGroups {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        let mut tree = Vec::new();
        for n in &r.spanning_tree {
            let i = r
                .edges
                .iter()
                .position(|e| &e.name == n)
                .ok_or_else(|| Error::InvalidGraph(alloc::format!("unknown tree edge {n}")))?;
            tree.push(i);
        }
        GraphOfGroups::new(r.vertices, r.edges, &tree)
    }
}

impl From<GraphOfGroups> for GraphRepr {
    fn from(g: GraphOfGroups) -> Self {
        let spanning_tree =
            g.edges.iter().zip(&g.in_tree).filter(|(_, &t)| t).map(|(e, _)| e.name.clone()).collect();
        GraphRepr { vertices: g.vertices, edges: g.edges, spanning_tree }
    }
}

fn preimage(map: &FiniteHom, target: &FiniteGroup) -> Vec<usize> {
    let mut pre = vec![usize::MAX; target.order()];
    for (x, &y) in map.image.iter().enumerate() {
        pre[y] = x;
    }
    pre
}

impl GraphOfGroups {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>, tree: &[usize]) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidGraph(m));
        let nv = vertices.len();
        if nv == 0 {
            return bad("no vertices".into());
        }
        for (i, v) in vertices.iter().enumerate() {
            if vertices[..i].iter().any(|w| w.name == v.name) {
                return bad(alloc::format!("duplicate vertex {}", v.name));
            }
        }
        let mut data = Vec::new();
        for (i, e) in edges.iter().enumerate() {
            if edges[..i].iter().any(|f| f.name == e.name) {
                return bad(alloc::format!("duplicate edge {}", e.name));
            }
            if e.src >= nv || e.dst >= nv {
                return bad(alloc::format!("edge {} has a bad endpoint", e.name));
            }
            let (gs, gd) = (&vertices[e.src].group, &vertices[e.dst].group);
            for (m, g) in [(&e.src_map, gs), (&e.dst_map, gd)] {
                let shaped = m.image.len() == e.group.order() && m.image.iter().all(|&x| x < g.order());
                if !shaped || !m.is_hom(&e.group, g) || !m.is_injective(&e.group, g) {
                    return bad(alloc::format!("edge {} map is not an injective homomorphism", e.name));
                }
            }
            data.push(EdgeData {
                src_split: CosetSplit::new(gs, &e.src_map.image_subgroup(gs)),
                dst_split: CosetSplit::new(gd, &e.dst_map.image_subgroup(gd)),
                src_pre: preimage(&e.src_map, gs),
                dst_pre: preimage(&e.dst_map, gd),
            });
        }
        let mut in_tree = vec![false; edges.len()];
        for &t in tree {
            if t >= edges.len() || in_tree[t] {
                return bad("bad spanning tree edge list".into());
            }
            in_tree[t] = true;
        }
        if tree.len() + 1 != nv {
            return bad("spanning tree has the wrong number of edges".into());
        }
        let root = (0..nv).min_by(|&a, &b| vertices[a].name.cmp(&vertices[b].name)).unwrap();
        let mut root_path: Vec<Option<Vec<Step>>> = vec![None; nv];
        root_path[root] = Some(Vec::new());
        let mut bfs_order = vec![root];
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for (i, e) in edges.iter().enumerate() {
                if !in_tree[i] {
                    continue;
                }
                let step = if e.src == v {
                    Step { edge: i, fwd: true }
                } else if e.dst == v {
                    Step { edge: i, fwd: false }
                } else {
                    continue;
                };
                let w = if step.fwd { e.dst } else { e.src };
                if root_path[w].is_none() {
                    let mut p = root_path[v].clone().unwrap();
                    p.push(step);
                    root_path[w] = Some(p);
                    bfs_order.push(w);
                    queue.push_back(w);
                }
            }
        }
        if bfs_order.len() != nv {
            return bad("spanning tree does not reach every vertex".into());
        }
        let root_path = root_path.into_iter().map(Option::unwrap).collect();
        Ok(GraphOfGroups { vertices, edges, in_tree, root, root_path, bfs_order, data })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_tree_edge(&self, e: usize) -> bool {
        self.in_tree[e]
    }

    /// The base vertex: the least vertex name.
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn edge_index(&self, name: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.name == name)
    }

    /// Tree edges (as `(edge, forward)` steps) from the root to `v`.
    pub fn root_path(&self, v: usize) -> Vec<(usize, bool)> {
        self.root_path[v].iter().map(|s| (s.edge, s.fwd)).collect()
    }

    /// Vertices in BFS order along the tree from the root.
    pub fn bfs_order(&self) -> &[usize] {
        &self.bfs_order
    }

    /// Left transversal of the image of `E_e` in its source (`at_src`) or
    /// target vertex group.
    pub fn transversal(&self, e: usize, at_src: bool) -> &[usize] {
        let d = &self.data[e];
        if at_src {
            &d.src_split.transversal
        } else {
            &d.dst_split.transversal
        }
    }

    fn from_vertex(&self, s: Step) -> usize {
        let e = &self.edges[s.edge];
        if s.fwd {
            e.src
        } else {
            e.dst
        }
    }

    fn to_vertex(&self, s: Step) -> usize {
        self.from_vertex(s.rev())
    }

    /// Every non-identity vertex element and every non-tree stable letter
    /// with both signs.
    pub fn generators(&self) -> Vec<GogLetter> {
        let mut out = Vec::new();
        for (v, vx) in self.vertices.iter().enumerate() {
            for g in vx.group.elements().filter(|&g| g != vx.group.identity()) {
                out.push(GogLetter::Vertex { v, g });
            }
        }
        for e in (0..self.edges.len()).filter(|&e| !self.in_tree[e]) {
            out.push(GogLetter::Stable { t: e, e: 1 });
            out.push(GogLetter::Stable { t: e, e: -1 });
        }
        out
    }

    pub fn check_word(&self, w: &GogWord) -> Result<()> {
        for l in &w.0 {
            let ok = match *l {
                GogLetter::Vertex { v, g } => v < self.vertices.len() && self.vertices[v].group.is_element(g),
                GogLetter::Stable { t, e } => t < self.edges.len() && (e == 1 || e == -1),
            };
            if !ok {
                return Err(Error::MalformedWord(alloc::format!("{l:?}")));
            }
        }
        Ok(())
    }
}

/// A vertex element `g` of `G_v`, or a stable letter `t^e` with `e = +-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GogLetter {
    Vertex { v: usize, g: usize },
    Stable { t: usize, e: i8 },
}

impl GogLetter {
    pub fn inverse(self, g: &GraphOfGroups) -> GogLetter {
        match self {
            GogLetter::Vertex { v, g: x } => GogLetter::Vertex { v, g: g.vertices[v].group.inv(x) },
            GogLetter::Stable { t, e } => GogLetter::Stable { t, e: -e },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GogWord(pub Vec<GogLetter>);

impl GogWord {
    pub fn empty() -> Self {
        GogWord(Vec::new())
    }

    pub fn letters(&self) -> &[GogLetter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &GogWord) -> GogWord {
        GogWord(self.0.iter().chain(&other.0).copied().collect())
    }

    pub fn inverse(&self, g: &GraphOfGroups) -> GogWord {
        GogWord(self.0.iter().rev().map(|l| l.inverse(g)).collect())
    }
}

/// Reduced path state: stacked `(element before step, step)` pairs, then the
/// current element at the current vertex.
struct PathReducer<'a> {
    g: &'a GraphOfGroups,
    stack: Vec<(usize, Step)>,
    vertex: usize,
    cur: usize,
}

impl<'a> PathReducer<'a> {
    fn new(g: &'a GraphOfGroups) -> Self {
        let r = g.root;
        PathReducer { g, stack: Vec::new(), vertex: r, cur: g.vertices[r].group.identity() }
    }

    // (split at the source of the step, preimage there, map at the target)
    fn sides(&self, s: Step) -> (&'a CosetSplit, &'a [usize], &'a FiniteHom) {
        let (d, e) = (&self.g.data[s.edge], &self.g.edges[s.edge]);
        if s.fwd {
            (&d.src_split, &d.src_pre, &e.dst_map)
        } else {
            (&d.dst_split, &d.dst_pre, &e.src_map)
        }
    }

    fn step(&mut self, s: Step) {
        debug_assert_eq!(self.vertex, self.g.from_vertex(s));
        let (split, pre, to_map) = self.sides(s);
        let target = self.g.to_vertex(s);
        if let Some(&(d_prev, prev)) = self.stack.last() {
            if prev == s.rev() && pre[self.cur] != usize::MAX {
                let x = pre[self.cur];
                self.stack.pop();
                self.cur = self.g.vertices[target].group.mul(d_prev, to_map.apply(x));
                self.vertex = target;
                return;
            }
        }
        let (d, b) = split.split(self.cur);
        self.stack.push((d, s));
        self.cur = to_map.apply(pre[b]);
        self.vertex = target;
    }

    fn travel_to(&mut self, v: usize) {
        if v == self.vertex {
            return;
        }
        let back: Vec<Step> = self.g.root_path[self.vertex].iter().rev().map(|s| s.rev()).collect();
        let fwd = self.g.root_path[v].clone();
        for s in back.into_iter().chain(fwd) {
            self.step(s);
        }
    }

    fn push(&mut self, l: GogLetter) {
        match l {
            GogLetter::Vertex { v, g } => {
                self.travel_to(v);
                self.cur = self.g.vertices[v].group.mul(self.cur, g);
            }
            GogLetter::Stable { t, e } => {
                if self.g.in_tree[t] {
                    return;
                }
                let s = Step { edge: t, fwd: e > 0 };
                self.travel_to(self.g.from_vertex(s));
                self.step(s);
            }
        }
    }

    fn finish(mut self) -> GogWord {
        self.travel_to(self.g.root);
        let mut out = Vec::new();
        for (d, s) in self.stack {
            let v = self.g.from_vertex(s);
            if d != self.g.vertices[v].group.identity() {
                out.push(GogLetter::Vertex { v, g: d });
            }
            if !self.g.in_tree[s.edge] {
                out.push(GogLetter::Stable { t: s.edge, e: if s.fwd { 1 } else { -1 } });
            }
        }
        if self.cur != self.g.vertices[self.g.root].group.identity() {
            out.push(GogLetter::Vertex { v: self.g.root, g: self.cur });
        }
        GogWord(out)
    }
}

/// Canonical form: the reduced path at the root, each syllable a transversal
/// representative with the edge-group part pushed to the right. Two words are
/// equal in the fundamental group iff their forms coincide.
pub fn gog_normal_form(g: &GraphOfGroups, w: &GogWord) -> Result<GogWord> {
    g.check_word(w)?;
    let mut r = PathReducer::new(g);
    for &l in &w.0 {
        r.push(l);
    }
    Ok(r.finish())
}

/// Product in the fundamental group, in normal form.
pub fn gog_mul(g: &GraphOfGroups, a: &GogWord, b: &GogWord) -> Result<GogWord> {
    gog_normal_form(g, &a.concat(b))
}

/// Re-checks that a word has the shape of a normal form: it is a fixed point
/// of normalization.
pub fn is_gog_normal(g: &GraphOfGroups, w: &GogWord) -> bool {
    gog_normal_form(g, w).map_or(false, |n| &n == w)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A finite quotient `phi: G -> A <= Sym(X)` injective on every vertex group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymQuotient {
    pub degree: usize,
    pub group: FiniteGroup,
    /// `vertex_maps[v][g]` is the image of `g` in `G_v`.
    pub vertex_maps: Vec<Vec<usize>>,
    /// Image of each stable letter; identity for tree edges.
    pub stable: Vec<usize>,
}

impl SymQuotient {
    pub fn letter(&self, l: GogLetter) -> usize {
        match l {
            GogLetter::Vertex { v, g } => self.vertex_maps[v][g],
            GogLetter::Stable { t, e } => {
                let x = self.stable[t];
                if e < 0 {
                    self.group.inv(x)
                } else {
                    x
                }
            }
        }
    }

    pub fn word(&self, w: &GogWord) -> usize {
        self.group.product(w.0.iter().map(|&l| self.letter(l)))
    }

    /// Every defining relation holds and every vertex map is injective.
    pub fn check(&self, g: &GraphOfGroups) -> bool {
        let a = &self.group;
        for (v, vx) in g.vertices.iter().enumerate() {
            let hom = FiniteHom { image: self.vertex_maps[v].clone() };
            if hom.image.len() != vx.group.order() || !hom.is_hom(&vx.group, a) || !hom.is_injective(&vx.group, a) {
                return false;
            }
        }
        g.edges.iter().enumerate().all(|(i, e)| {
            e.group.elements().all(|x| {
                let lhs = self.vertex_maps[e.src][e.src_map.apply(x)];
                let w = self.vertex_maps[e.dst][e.dst_map.apply(x)];
                let t = self.stable[i];
                lhs == a.product([t, w, a.inv(t)])
            })
        })
    }
}

// right-regular free action of `g` on `copies` blocks of its elements
fn regular_copies(g: &FiniteGroup, copies: usize) -> Vec<Perm> {
    let n = g.order();
    g.elements()
        .map(|h| {
            let img = (0..copies * n).map(|p| (p / n) * n + g.mul(p % n, h)).collect();
            Perm::from_images(img).unwrap()
        })
        .collect()
}

// Extends the free action of `E` (through `iota: E -> G_Q`) to a free
// action of `G_Q`: E-orbits, taken in order of their least points, are
// grouped into blocks of `[G_Q : E]` and matched with a left transversal.
fn extend_action(x_size: usize, act_e: &[Perm], gq: &FiniteGroup, iota: &FiniteHom, e_group: &FiniteGroup) -> Vec<Perm> {
    let split = CosetSplit::new(gq, &iota.image_subgroup(gq));
    let m = split.index();
    let mut seen = vec![false; x_size];
    let mut bases = Vec::new();
    for x in 0..x_size {
        if !seen[x] {
            bases.push(x);
            for p in act_e {
                seen[p.apply(x)] = true;
            }
        }
    }
    // point_of[(block, element)]
    let n = gq.order();
    let mut point_of = vec![0usize; (bases.len() / m) * n];
    let mut label = vec![(0usize, 0usize); x_size];
    for (j, &b) in bases.iter().enumerate() {
        let (blk, r) = (j / m, split.transversal[j % m]);
        for x in e_group.elements() {
            let g = gq.mul(r, iota.apply(x));
            let pt = act_e[x].apply(b);
            point_of[blk * n + g] = pt;
            label[pt] = (blk, g);
        }
    }
    gq.elements()
        .map(|h| {
            let img = (0..x_size).map(|pt| {
                let (blk, g) = label[pt];
                point_of[blk * n + gq.mul(g, h)]
            });
            Perm::from_images(img.collect()).unwrap()
        })
        .collect()
}

/// Builds `phi` from free actions of every vertex group on a set of size
/// the lcm of the vertex orders, propagated along the tree from the root;
/// non-tree stable letters act by intertwiners of the two induced edge
/// actions. Only the generated subgroup is materialized, up to `order_cap`.
pub fn sym_quotient(g: &GraphOfGroups, order_cap: usize) -> Result<SymQuotient> {
    let lcm = g.vertices.iter().fold(1usize, |l, v| l / gcd(l, v.group.order()) * v.group.order());
    let mut actions: Vec<Option<Vec<Perm>>> = vec![None; g.vertices.len()];
    let r = g.root;
    actions[r] = Some(regular_copies(&g.vertices[r].group, lcm / g.vertices[r].group.order()));
    for &v in &g.bfs_order[1..] {
        let s = *g.root_path[v].last().unwrap();
        let e = &g.edges[s.edge];
        let (parent, to_parent, to_child) = if s.fwd { (e.src, &e.src_map, &e.dst_map) } else { (e.dst, &e.dst_map, &e.src_map) };
        let pa = actions[parent].as_ref().unwrap();
        let act_e: Vec<Perm> = to_parent.image.iter().map(|&y| pa[y].clone()).collect();
        actions[v] = Some(extend_action(lcm, &act_e, &g.vertices[v].group, to_child, &e.group));
    }
    let actions: Vec<Vec<Perm>> = actions.into_iter().map(Option::unwrap).collect();
    let mut stable_perms = Vec::new();
    for (i, e) in g.edges.iter().enumerate() {
        if g.in_tree[i] {
            stable_perms.push(Perm::identity(lcm));
            continue;
        }
        let act1: Vec<Perm> = e.src_map.image.iter().map(|&y| actions[e.src][y].clone()).collect();
        let act2: Vec<Perm> = e.dst_map.image.iter().map(|&y| actions[e.dst][y].clone()).collect();
        stable_perms.push(intertwine_free_actions(&e.group, lcm, &act1, &act2)?);
    }
    let mut gens: Vec<Perm> = Vec::new();
    for (v, vx) in g.vertices.iter().enumerate() {
        gens.extend(vx.group.generators().into_iter().map(|x| actions[v][x].clone()));
    }
    gens.extend(stable_perms.iter().cloned());
    let built = FiniteGroup::from_permutations(lcm, &gens, order_cap)?;
    let group = built.group;
    let index: BTreeMap<&Perm, usize> =
        group.perm_realization().unwrap().iter().enumerate().map(|(i, p)| (p, i)).collect();
    let look = |p: &Perm| index[p];
    let vertex_maps = actions.iter().map(|acts| acts.iter().map(look).collect()).collect();
    let stable = stable_perms.iter().map(look).collect();
    Ok(SymQuotient { degree: lcm, group: group.clone(), vertex_maps, stable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn vx(name: &str, group: FiniteGroup) -> Vertex {
        Vertex { name: name.to_string(), group }
    }

    fn edge(name: &str, src: usize, dst: usize, group: FiniteGroup, a: Vec<usize>, w: Vec<usize>) -> Edge {
        Edge { name: name.to_string(), src, dst, group, src_map: FiniteHom { image: a }, dst_map: FiniteHom { image: w } }
    }

    fn z_loop() -> GraphOfGroups {
        let t = FiniteGroup::trivial();
        GraphOfGroups::new(vec![vx("v", t.clone())], vec![edge("t", 0, 0, t, vec![0], vec![0])], &[]).unwrap()
    }

    fn free_product(a: FiniteGroup, b: FiniteGroup) -> GraphOfGroups {
        let t = FiniteGroup::trivial();
        let (ia, ib) = (a.identity(), b.identity());
        GraphOfGroups::new(vec![vx("a", a), vx("b", b)], vec![edge("e", 0, 1, t, vec![ia], vec![ib])], &[0]).unwrap()
    }

    // C4 *_{C2} C4
    fn c4_amalgam() -> GraphOfGroups {
        let c4 = FiniteGroup::cyclic(4);
        GraphOfGroups::new(
            vec![vx("a", c4.clone()), vx("b", c4)],
            vec![edge("e", 0, 1, FiniteGroup::cyclic(2), vec![0, 2], vec![0, 2])],
            &[0],
        )
        .unwrap()
    }

    // C2 vertex with a loop whose edge group C2 maps by the identity both ways
    // plus a second vertex C3 joined by a trivial tree edge: an HNN over C2
    // free-producted with C3.
    fn mixed() -> GraphOfGroups {
        let c2 = FiniteGroup::cyclic(2);
        let c3 = FiniteGroup::cyclic(3);
        let t = FiniteGroup::trivial();
        GraphOfGroups::new(
            vec![vx("a", c2.clone()), vx("b", c3)],
            vec![edge("s", 0, 1, t, vec![0], vec![0]), edge("t", 0, 0, c2, vec![0, 1], vec![0, 1])],
            &[0],
        )
        .unwrap()
    }

    fn st(t: usize, e: i8) -> GogLetter {
        GogLetter::Stable { t, e }
    }

    fn el(v: usize, g: usize) -> GogLetter {
        GogLetter::Vertex { v, g }
    }

    #[test]
    fn z_normal_form() {
        let g = z_loop();
        let w = GogWord(vec![st(0, 1), st(0, 1), st(0, 1), st(0, -1)]);
        assert_eq!(gog_normal_form(&g, &w).unwrap(), GogWord(vec![st(0, 1), st(0, 1)]));
        assert_eq!(gog_normal_form(&g, &GogWord::empty()).unwrap(), GogWord::empty());
    }

    #[test]
    fn free_product_normal_form() {
        let g = free_product(FiniteGroup::cyclic(2), FiniteGroup::cyclic(3));
        let w = GogWord(vec![el(0, 1), el(1, 1), el(1, 2), el(0, 1)]);
        assert_eq!(gog_normal_form(&g, &w).unwrap(), GogWord::empty());
        let w = GogWord(vec![el(0, 1), el(1, 1), el(0, 1)]);
        assert_eq!(gog_normal_form(&g, &w).unwrap(), w);
        assert!(gog_normal_form(&g, &GogWord(vec![el(1, 7)])).is_err());
        assert!(gog_normal_form(&g, &GogWord(vec![st(3, 1)])).is_err());
    }

    #[test]
    fn amalgam_pushes_edge_part() {
        let g = c4_amalgam();
        // a^2 is the edge element, equal to b^2
        let w = GogWord(vec![el(0, 2)]);
        let v = GogWord(vec![el(1, 2)]);
        assert_eq!(gog_normal_form(&g, &w).unwrap(), gog_normal_form(&g, &v).unwrap());
        // a b a^-1 b^-1 is nontrivial, a^2 b a^2 b^-1 is trivial
        let w = GogWord(vec![el(0, 1), el(1, 1), el(0, 3), el(1, 3)]);
        assert!(!gog_normal_form(&g, &w).unwrap().is_empty());
        let w = GogWord(vec![el(0, 2), el(1, 1), el(0, 2), el(1, 3)]);
        assert!(gog_normal_form(&g, &w).unwrap().is_empty());
    }

    #[test]
    fn hnn_loop_relation() {
        let g = mixed();
        // t a t^-1 = a on the C2 loop
        let w = GogWord(vec![st(1, 1), el(0, 1), st(1, -1), el(0, 1)]);
        assert!(gog_normal_form(&g, &w).unwrap().is_empty());
        let w = GogWord(vec![st(1, 1), el(1, 1), st(1, -1)]);
        assert_eq!(gog_normal_form(&g, &w).unwrap().len(), 3);
        // tree stable letters are trivial
        assert!(gog_normal_form(&g, &GogWord(vec![st(0, 1)])).unwrap().is_empty());
    }

    fn quotient_checks(g: &GraphOfGroups) -> SymQuotient {
        let q = sym_quotient(g, 100_000).unwrap();
        assert!(q.check(g));
        assert!(q.group.check_axioms());
        q
    }

    #[test]
    fn quotient_examples() {
        let q = quotient_checks(&z_loop());
        assert_eq!((q.degree, q.group.order()), (1, 1));
        let d_inf = free_product(FiniteGroup::cyclic(2), FiniteGroup::cyclic(2));
        let q = quotient_checks(&d_inf);
        assert_eq!((q.degree, q.group.order()), (2, 2));
        assert_eq!(q.vertex_maps[0][1], q.vertex_maps[1][1]);
        let q = quotient_checks(&c4_amalgam());
        assert_eq!(q.degree, 4);
        let q = quotient_checks(&free_product(FiniteGroup::cyclic(2), FiniteGroup::cyclic(3)));
        assert_eq!(q.degree, 6);
        let q = quotient_checks(&mixed());
        assert_eq!(q.degree, 6);
        // the generated group on 12 points is far beyond a small cap
        let big = free_product(FiniteGroup::symmetric(3), FiniteGroup::cyclic(4));
        assert!(sym_quotient(&big, 5000).unwrap_err().is_budget());
    }

    #[test]
    fn quotient_is_constant_on_normal_forms() {
        let g = mixed();
        let q = sym_quotient(&g, 100_000).unwrap();
        let gens = g.generators();
        for a in &gens {
            for b in &gens {
                let w = GogWord(vec![*a, *b, a.inverse(&g)]);
                let n = gog_normal_form(&g, &w).unwrap();
                assert_eq!(q.word(&w), q.word(&n));
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let g = mixed();
        let s = serde_json::to_string(&g).unwrap();
        let h: GraphOfGroups = serde_json::from_str(&s).unwrap();
        assert_eq!(g, h);
    }

    fn arb_word(g: &GraphOfGroups, max: usize) -> impl Strategy<Value = GogWord> {
        let gens = g.generators();
        proptest::collection::vec(proptest::sample::select(gens), 0..max).prop_map(GogWord)
    }

    proptest! {
        #[test]
        fn normal_form_is_canonical(
            (u, v, w) in (arb_word(&mixed(), 8), arb_word(&mixed(), 8), arb_word(&mixed(), 8))
        ) {
            let g = mixed();
            let nu = gog_normal_form(&g, &u).unwrap();
            prop_assert!(is_gog_normal(&g, &nu));
            let left = gog_mul(&g, &gog_mul(&g, &u, &v).unwrap(), &w).unwrap();
            let right = gog_mul(&g, &u, &gog_mul(&g, &v, &w).unwrap()).unwrap();
            prop_assert_eq!(&left, &right);
            let inv = gog_mul(&g, &u, &u.inverse(&g)).unwrap();
            prop_assert!(inv.is_empty());
            let q = sym_quotient(&g, 100_000).unwrap();
            prop_assert_eq!(q.word(&u), q.word(&nu));
        }

        #[test]
        fn amalgam_forms_are_canonical((u, v) in (arb_word(&c4_amalgam(), 10), arb_word(&c4_amalgam(), 10))) {
            let g = c4_amalgam();
            let nu = gog_normal_form(&g, &u).unwrap();
            prop_assert!(is_gog_normal(&g, &nu));
            let uv = gog_mul(&g, &u, &v).unwrap();
            let nuv = gog_mul(&g, &nu, &gog_normal_form(&g, &v).unwrap()).unwrap();
            prop_assert_eq!(uv, nuv);
        }
    }
}
