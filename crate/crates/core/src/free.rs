//! Free groups over opaque basis symbols: reduced words, Stallings subgroup
//! graphs, Schreier bases of finite-index kernels.
//!
//! Folding keeps, on every edge, a word in the original subgroup generators
//! (its *tag*). With `p(v)` the label of some fixed path from the base vertex
//! to `v`, every edge `u --x--> v` satisfies `p(u) x p(v)^-1 = eval(tag)`.
//! Reading a loop at the base vertex and multiplying tags therefore expresses
//! the loop label in the generators.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::FiniteGroup;

/// A basis symbol or its inverse. Ordering is shortlex-compatible:
/// `x0 < x0^-1 < x1 < x1^-1 < ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub sym: u32,
    pub inv: bool,
}

impl Letter {
    pub fn new(sym: usize, exp: i8) -> Self {
        Letter { sym: sym as u32, inv: exp < 0 }
    }

    pub fn pos(sym: usize) -> Self {
        Letter { sym: sym as u32, inv: false }
    }

    #[inline]
    pub fn inverse(self) -> Self {
        Letter { sym: self.sym, inv: !self.inv }
    }

    pub fn exp(self) -> i8 {
        if self.inv {
            -1
        } else {
            1
        }
    }
}

/// A freely reduced word.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreeWord(Vec<Letter>);

/// Freely reduces an arbitrary letter sequence.
pub fn free_reduce<I: IntoIterator<Item = Letter>>(letters: I) -> FreeWord {
    let mut out: Vec<Letter> = Vec::new();
    for l in letters {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    FreeWord(out)
}

impl FreeWord {
    pub fn empty() -> Self {
        FreeWord(Vec::new())
    }

    pub fn generator(sym: usize) -> Self {
        FreeWord(vec![Letter::pos(sym)])
    }

    /// From `(symbol, exponent)` pairs; exponents other than +-1 are expanded.
    pub fn from_pairs(pairs: &[(usize, i64)]) -> Self {
        free_reduce(pairs.iter().flat_map(|&(s, e)| {
            let l = Letter::new(s, if e < 0 { -1 } else { 1 });
            core::iter::repeat(l).take(e.unsigned_abs() as usize)
        }))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[0] != w[1].inverse())
    }

    pub fn inverse(&self) -> Self {
        FreeWord(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn mul(&self, other: &FreeWord) -> Self {
        free_reduce(self.0.iter().chain(&other.0).copied())
    }

    pub fn pow(&self, e: i64) -> Self {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        (0..e.unsigned_abs()).fold(FreeWord::empty(), |acc, _| acc.mul(&base))
    }

    pub fn commutator(&self, other: &FreeWord) -> Self {
        self.mul(other).mul(&self.inverse()).mul(&other.inverse())
    }

    /// Exponent sum of every symbol below `rank`.
    pub fn exponent_sums(&self, rank: usize) -> Vec<i64> {
        let mut v = vec![0i64; rank];
        for l in &self.0 {
            v[l.sym as usize] += l.exp() as i64;
        }
        v
    }

    /// Substitutes a word for every basis symbol and reduces.
    pub fn substitute(&self, images: &[FreeWord]) -> FreeWord {
        let mut out = FreeWord::empty();
        for l in &self.0 {
            let img = &images[l.sym as usize];
            out = if l.inv { out.mul(&img.inverse()) } else { out.mul(img) };
        }
        out
    }

    /// Maps the word through an arbitrary group given by letter images.
    pub fn evaluate<T, M, I>(&self, identity: T, image: I, mul: M) -> T
    where
        I: Fn(Letter) -> T,
        M: Fn(&T, &T) -> T,
    {
        self.0.iter().fold(identity, |acc, &l| mul(&acc, &image(l)))
    }

    pub fn max_symbol(&self) -> Option<usize> {
        self.0.iter().map(|l| l.sym as usize).max()
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "x{}", l.sym)?;
            if l.inv {
                write!(f, "^-1")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Edge {
    src: usize,
    dst: usize,
    sym: u32,
    tag: FreeWord,
}

/// A folded core graph of a finitely generated subgroup of a free group.
/// Vertex 0 is the base vertex.
#[derive(Debug, Clone)]
pub struct StallingsGraph {
    num_vertices: usize,
    edges: Vec<Edge>,
    // per vertex, half-edges sorted by letter: (letter, target, tag of traversal)
    adj: Vec<Vec<(Letter, usize, FreeWord)>>,
    num_generators: usize,
}

/// Mutable folding state.
struct Folder {
    edges: Vec<Option<Edge>>,
    incident: Vec<BTreeSet<usize>>,
    alive: Vec<bool>,
}

impl Folder {
    fn half_edges(&self, v: usize) -> Vec<(Letter, usize, usize)> {
        // (letter, edge, other endpoint)
        let mut out = Vec::new();
        for &e in &self.incident[v] {
            let ed = self.edges[e].as_ref().unwrap();
            if ed.src == v {
                out.push((Letter { sym: ed.sym, inv: false }, e, ed.dst));
            }
            if ed.dst == v {
                out.push((Letter { sym: ed.sym, inv: true }, e, ed.src));
            }
        }
        out.sort();
        out
    }

    fn traversal_tag(&self, e: usize, backwards: bool) -> FreeWord {
        let t = &self.edges[e].as_ref().unwrap().tag;
        if backwards {
            t.inverse()
        } else {
            t.clone()
        }
    }

    fn remove_edge(&mut self, e: usize) {
        let ed = self.edges[e].take().unwrap();
        self.incident[ed.src].remove(&e);
        self.incident[ed.dst].remove(&e);
    }

    /// Folds the first pair of equally labelled half-edges at `v`.
    /// Returns the vertices whose neighbourhood changed.
    fn fold_at(&mut self, v: usize) -> Option<Vec<usize>> {
        let hs = self.half_edges(v);
        let pos = hs.windows(2).position(|w| w[0].0 == w[1].0)?;
        let (letter, e1, v1) = hs[pos];
        let (_, e2, v2) = hs[pos + 1];
        if v1 == v2 {
            // parallel edges: both tags evaluate to the same element
            self.remove_edge(e2);
            return Some(vec![v, v1]);
        }
        let (keep, drop, e_keep, e_drop) = if v1 < v2 { (v1, v2, e1, e2) } else { (v2, v1, e2, e1) };
        let tau_keep = self.traversal_tag(e_keep, letter.inv);
        let tau_drop = self.traversal_tag(e_drop, letter.inv);
        // p(drop) = c^-1 p(keep)
        let c = tau_keep.inverse().mul(&tau_drop);
        let c_inv = c.inverse();
        let moved: Vec<usize> = self.incident[drop].iter().copied().collect();
        let mut touched = vec![v, keep];
        for e in moved {
            let ed = self.edges[e].as_mut().unwrap();
            let mut tag = ed.tag.clone();
            if ed.src == drop {
                tag = c.mul(&tag);
                ed.src = keep;
            }
            if ed.dst == drop {
                tag = tag.mul(&c_inv);
                ed.dst = keep;
            }
            ed.tag = tag;
            touched.push(ed.src);
            touched.push(ed.dst);
            self.incident[keep].insert(e);
        }
        self.incident[drop].clear();
        self.alive[drop] = false;
        self.remove_edge(e_drop);
        touched.sort_unstable();
        touched.dedup();
        Some(touched)
    }
}

impl StallingsGraph {
    /// Folds the wedge of loops labelled by `gens` and trims it to its core.
    pub fn fold(gens: &[FreeWord]) -> Self {
        let mut f = Folder { edges: Vec::new(), incident: vec![BTreeSet::new()], alive: vec![true] };
        for (gi, g) in gens.iter().enumerate() {
            let g = free_reduce(g.letters().iter().copied());
            let n = g.len();
            if n == 0 {
                continue;
            }
            let mut prev = 0usize;
            for (k, &l) in g.letters().iter().enumerate() {
                let next = if k + 1 == n {
                    0
                } else {
                    f.incident.push(BTreeSet::new());
                    f.alive.push(true);
                    f.incident.len() - 1
                };
                let tag = if k + 1 == n { FreeWord::generator(gi) } else { FreeWord::empty() };
                let (src, dst, tag) = if l.inv { (next, prev, tag.inverse()) } else { (prev, next, tag) };
                let e = f.edges.len();
                f.edges.push(Some(Edge { src, dst, sym: l.sym, tag }));
                f.incident[src].insert(e);
                f.incident[dst].insert(e);
                prev = next;
            }
        }
        let mut work: BTreeSet<usize> = (0..f.alive.len()).collect();
        while let Some(v) = work.pop_first() {
            if !f.alive[v] {
                continue;
            }
            if let Some(touched) = f.fold_at(v) {
                work.extend(touched.into_iter().filter(|&x| f.alive[x]));
            }
        }
        // core trimming
        let mut queue: VecDeque<usize> = (1..f.alive.len()).collect();
        while let Some(v) = queue.pop_front() {
            if v == 0 || !f.alive[v] {
                continue;
            }
            let hs = f.half_edges(v);
            if hs.len() <= 1 {
                for (_, e, other) in hs {
                    f.remove_edge(e);
                    queue.push_back(other);
                }
                f.alive[v] = false;
            }
        }
        Self::compact(f, gens.len())
    }

    fn compact(f: Folder, num_generators: usize) -> Self {
        let mut new_id = vec![usize::MAX; f.alive.len()];
        let mut n = 0;
        for (v, &a) in f.alive.iter().enumerate() {
            if a {
                new_id[v] = n;
                n += 1;
            }
        }
        let edges: Vec<Edge> = f
            .edges
            .into_iter()
            .flatten()
            .map(|e| Edge { src: new_id[e.src], dst: new_id[e.dst], ..e })
            .collect();
        let mut adj: Vec<Vec<(Letter, usize, FreeWord)>> = vec![Vec::new(); n];
        for e in &edges {
            adj[e.src].push((Letter { sym: e.sym, inv: false }, e.dst, e.tag.clone()));
            adj[e.dst].push((Letter { sym: e.sym, inv: true }, e.src, e.tag.inverse()));
        }
        for a in &mut adj {
            a.sort_by(|x, y| x.0.cmp(&y.0));
        }
        StallingsGraph { num_vertices: n, edges, adj, num_generators }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_generators(&self) -> usize {
        self.num_generators
    }

    /// `(source, symbol, target)` of every edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.edges.iter().map(|e| (e.src, e.sym as usize, e.dst))
    }

    /// No vertex has two half-edges with the same letter.
    pub fn is_folded(&self) -> bool {
        self.adj.iter().all(|a| a.windows(2).all(|w| w[0].0 != w[1].0))
    }

    /// Every non-base vertex has degree at least two.
    pub fn is_core(&self) -> bool {
        self.adj.iter().enumerate().all(|(v, a)| v == 0 || a.len() >= 2)
    }

    fn step(&self, v: usize, l: Letter) -> Option<&(Letter, usize, FreeWord)> {
        let a = &self.adj[v];
        a.binary_search_by(|x| x.0.cmp(&l)).ok().map(|i| &a[i])
    }

    /// If `w` labels a loop at the base vertex, a word in the generators
    /// (symbol `i` = `gens[i]`) whose expansion reduces to `w`.
    pub fn member_and_rewrite(&self, w: &FreeWord) -> Option<FreeWord> {
        let mut v = 0;
        let mut witness: Vec<Letter> = Vec::new();
        for &l in w.letters() {
            let (_, next, tag) = self.step(v, l)?;
            witness.extend_from_slice(tag.letters());
            v = *next;
        }
        (v == 0).then(|| free_reduce(witness))
    }

    pub fn contains(&self, w: &FreeWord) -> bool {
        let mut v = 0;
        for &l in w.letters() {
            match self.step(v, l) {
                Some((_, next, _)) => v = *next,
                None => return false,
            }
        }
        v == 0
    }

    /// Rank of the represented subgroup: `|E| - |V| + 1`.
    pub fn rank(&self) -> usize {
        self.edges.len() + 1 - self.num_vertices
    }

    /// Words of a free basis of the subgroup, read off a BFS spanning tree:
    /// one word per non-tree edge.
    pub fn basis_words(&self) -> Vec<FreeWord> {
        let mut path: Vec<Option<FreeWord>> = vec![None; self.num_vertices];
        let mut tree_edge = vec![false; self.edges.len()];
        path[0] = Some(FreeWord::empty());
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for (i, e) in self.edges.iter().enumerate() {
                let (from, to, l) = if e.src == v {
                    (v, e.dst, Letter { sym: e.sym, inv: false })
                } else if e.dst == v {
                    (v, e.src, Letter { sym: e.sym, inv: true })
                } else {
                    continue;
                };
                if path[to].is_none() {
                    tree_edge[i] = true;
                    let w = path[from].as_ref().unwrap().mul(&FreeWord(vec![l]));
                    path[to] = Some(w);
                    queue.push_back(to);
                }
            }
        }
        self.edges
            .iter()
            .zip(&tree_edge)
            .filter(|(_, &t)| !t)
            .map(|(e, _)| {
                let p = |v: usize| path[v].clone().unwrap();
                p(e.src).mul(&FreeWord::generator(e.sym as usize)).mul(&p(e.dst).inverse())
            })
            .collect()
    }
}

pub fn fold_subgroup_graph(gens: &[FreeWord]) -> StallingsGraph {
    StallingsGraph::fold(gens)
}

pub fn graph_rank(g: &StallingsGraph) -> usize {
    g.rank()
}

/// A generating list is a free basis iff its length equals the rank of the
/// subgroup it generates (free groups of finite rank are Hopfian).
pub fn is_free_basis(gens: &[FreeWord]) -> Result<bool> {
    if gens.iter().any(|g| free_reduce(g.letters().iter().copied()).is_empty()) {
        return Err(Error::TrivialGenerator);
    }
    Ok(StallingsGraph::fold(gens).rank() == gens.len())
}

/// `<u> ∩ <v> = 1`, decided by the commutator: nontrivial elements of a free
/// group have commensurable cyclic subgroups iff they commute.
pub fn cyclic_disjoint(u: &FreeWord, v: &FreeWord) -> Result<bool> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::TrivialGenerator);
    }
    Ok(!u.commutator(v).is_empty())
}

/// Schreier transversal and free basis of the kernel of a map from the free
/// group on `rank` symbols onto a finite group.
#[derive(Debug, Clone)]
pub struct SchreierBasis {
    pub rank: usize,
    /// Shortlex-minimal coset representatives, in discovery order.
    pub transversal: Vec<FreeWord>,
    /// Group element of each coset.
    pub coset_element: Vec<usize>,
    /// Basis words over the original symbols.
    pub basis: Vec<FreeWord>,
    next: Vec<Vec<usize>>,
    prev: Vec<Vec<usize>>,
    basis_index: Vec<Vec<Option<usize>>>,
}

pub fn schreier_kernel_basis(rank: usize, group: &FiniteGroup, images: &[usize]) -> SchreierBasis {
    assert_eq!(images.len(), rank);
    let n = group.order();
    let mut coset_of = vec![usize::MAX; n];
    let mut coset_element = vec![group.identity()];
    let mut transversal = vec![FreeWord::empty()];
    coset_of[group.identity()] = 0;
    let mut i = 0;
    while i < coset_element.len() {
        let e = coset_element[i];
        for s in 0..rank {
            for inv in [false, true] {
                let img = if inv { group.inv(images[s]) } else { images[s] };
                let f = group.mul(e, img);
                if coset_of[f] == usize::MAX {
                    coset_of[f] = coset_element.len();
                    coset_element.push(f);
                    let mut w = transversal[i].letters().to_vec();
                    w.push(Letter { sym: s as u32, inv });
                    transversal.push(FreeWord(w));
                }
            }
        }
        i += 1;
    }
    let index = coset_element.len();
    let mut next = vec![vec![0; rank]; index];
    let mut prev = vec![vec![0; rank]; index];
    for c in 0..index {
        for s in 0..rank {
            let d = coset_of[group.mul(coset_element[c], images[s])];
            next[c][s] = d;
            prev[d][s] = c;
        }
    }
    let mut basis = Vec::new();
    let mut basis_index = vec![vec![None; rank]; index];
    for c in 0..index {
        for s in 0..rank {
            let w = transversal[c].mul(&FreeWord::generator(s)).mul(&transversal[next[c][s]].inverse());
            if !w.is_empty() {
                basis_index[c][s] = Some(basis.len());
                basis.push(w);
            }
        }
    }
    SchreierBasis { rank, transversal, coset_element, basis, next, prev, basis_index }
}

impl SchreierBasis {
    pub fn index(&self) -> usize {
        self.transversal.len()
    }

    /// Coset reached by reading `w` from the trivial coset.
    pub fn coset_of(&self, w: &FreeWord) -> usize {
        w.letters().iter().fold(0, |c, l| {
            if l.inv {
                self.prev[c][l.sym as usize]
            } else {
                self.next[c][l.sym as usize]
            }
        })
    }

    /// Expresses a kernel element over the Schreier basis (Reidemeister-Schreier).
    pub fn rewrite(&self, w: &FreeWord) -> Result<FreeWord> {
        let mut c = 0;
        let mut out = Vec::new();
        for &l in w.letters() {
            let s = l.sym as usize;
            if l.inv {
                let p = self.prev[c][s];
                if let Some(k) = self.basis_index[p][s] {
                    out.push(Letter { sym: k as u32, inv: true });
                }
                c = p;
            } else {
                if let Some(k) = self.basis_index[c][s] {
                    out.push(Letter { sym: k as u32, inv: false });
                }
                c = self.next[c][s];
            }
        }
        if c != 0 {
            return Err(Error::NotInKernel);
        }
        Ok(free_reduce(out))
    }
}
