//! Doubles `C *_B C'` of a finite group, their normal forms, the retraction
//! onto `C`, the swap involution `gamma` with the extension `G x| <gamma>`,
//! and navigation in the Bass-Serre tree.
//!
//! Elements of `C'` are stored by the index of their `xi`-preimage in `C`,
//! so `B` has the same indices on both sides.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free::{free_reduce, FreeWord, Letter};
use crate::perm::{CosetSplit, FiniteGroup, Subgroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    fn twisted(self, twist: bool) -> Side {
        if twist {
            self.other()
        } else {
            self
        }
    }
}

/// An element `g` of `C` (left) or `xi(g)` of `C'` (right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DoubleLetter {
    pub side: Side,
    pub g: usize,
}

#[derive(Serialize, Deserialize)]
struct DoubleRepr {
    group: FiniteGroup,
    subgroup: Subgroup,
    #[serde(default)]
    transversal: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DoubleRepr", into = "DoubleRepr")]
pub struct Double {
    c: FiniteGroup,
    b: Subgroup,
    split: CosetSplit,
}

impl TryFrom<DoubleRepr> for Double {
    type Error = Error;
    fn try_from(r: DoubleRepr) -> Result<Self> {
        let d = Double::new(r.group, r.subgroup)?;
        if !r.transversal.is_empty() && r.transversal != d.split.transversal {
            return Err(Error::InvalidGroup("transversal differs".into()));
        }
        Ok(d)
    }
}

impl From<Double> for DoubleRepr {
    fn from(d: Double) -> Self {
        DoubleRepr { transversal: d.split.transversal.clone(), group: d.c, subgroup: d.b }
    }
}

/// `x_1 ... x_n b`: sides alternate, each `x_k` a non-identity transversal
/// representative, `b` in `B`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AmalgamWord {
    pub syllables: Vec<DoubleLetter>,
    pub tail: usize,
}

/// `(g, gamma^twist)` in the semidirect product.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExtElement {
    pub g: AmalgamWord,
    pub twist: bool,
}

/// The coset `rep C` (left) or `rep C'` (right); `rep` has no tail and its
/// last syllable is not on `side`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreeVertex {
    pub side: Side,
    pub rep: Vec<DoubleLetter>,
}

/// The edge `{zC, zC'}` for the coset `zB`; `z` has no tail.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreeEdge {
    pub z: Vec<DoubleLetter>,
}

impl AmalgamWord {
    /// Syllables followed by the tail as a left letter.
    pub fn letters(&self) -> Vec<DoubleLetter> {
        let mut out = self.syllables.clone();
        out.push(DoubleLetter { side: Side::Left, g: self.tail });
        out
    }

    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }
}

impl Double {
    pub fn new(c: FiniteGroup, b: Subgroup) -> Result<Self> {
        let b = Subgroup::from_elements(&c, b.elements().to_vec())?;
        let split = CosetSplit::new(&c, &b);
        Ok(Double { c, b, split })
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.c
    }

    pub fn subgroup(&self) -> &Subgroup {
        &self.b
    }

    pub fn transversal(&self) -> &[usize] {
        &self.split.transversal
    }

    pub fn identity(&self) -> AmalgamWord {
        AmalgamWord { syllables: Vec::new(), tail: self.c.identity() }
    }

    pub fn is_identity(&self, w: &AmalgamWord) -> bool {
        w.syllables.is_empty() && w.tail == self.c.identity()
    }

    pub fn check_letters(&self, w: &[DoubleLetter]) -> Result<()> {
        match w.iter().find(|l| !self.c.is_element(l.g)) {
            Some(l) => Err(Error::MalformedWord(alloc::format!("{l:?}"))),
            None => Ok(()),
        }
    }

    pub fn push(&self, w: &mut AmalgamWord, l: DoubleLetter) {
        let e = match w.syllables.last() {
            Some(last) if last.side == l.side => {
                let d = last.g;
                w.syllables.pop();
                self.c.product([d, w.tail, l.g])
            }
            _ => self.c.mul(w.tail, l.g),
        };
        let (d, b) = self.split.split(e);
        if d != self.c.identity() {
            w.syllables.push(DoubleLetter { side: l.side, g: d });
        }
        w.tail = b;
    }

    pub fn normal_form(&self, w: &[DoubleLetter]) -> Result<AmalgamWord> {
        self.check_letters(w)?;
        let mut out = self.identity();
        for &l in w {
            self.push(&mut out, l);
        }
        Ok(out)
    }

    pub fn mul(&self, x: &AmalgamWord, y: &AmalgamWord) -> AmalgamWord {
        let mut out = x.clone();
        for l in y.letters() {
            self.push(&mut out, l);
        }
        out
    }

    pub fn invert_letters(&self, w: &[DoubleLetter]) -> Vec<DoubleLetter> {
        w.iter().rev().map(|l| DoubleLetter { side: l.side, g: self.c.inv(l.g) }).collect()
    }

    pub fn inverse(&self, x: &AmalgamWord) -> AmalgamWord {
        self.normal_form(&self.invert_letters(&x.letters())).unwrap()
    }

    /// `rho`: identity on `C`, `xi^-1` on `C'`.
    pub fn retraction(&self, w: &AmalgamWord) -> usize {
        self.retraction_letters(&w.letters())
    }

    pub fn retraction_letters(&self, w: &[DoubleLetter]) -> usize {
        self.c.product(w.iter().map(|l| l.g))
    }

    /// The side swap; fixes `B`.
    pub fn gamma(&self, w: &AmalgamWord) -> AmalgamWord {
        AmalgamWord {
            syllables: w.syllables.iter().map(|l| DoubleLetter { side: l.side.other(), g: l.g }).collect(),
            tail: w.tail,
        }
    }

    fn gamma_pow(&self, w: &AmalgamWord, twist: bool) -> AmalgamWord {
        if twist {
            self.gamma(w)
        } else {
            w.clone()
        }
    }
}

impl Double {
    pub fn ext_identity(&self) -> ExtElement {
        ExtElement { g: self.identity(), twist: false }
    }

    pub fn ext_gamma(&self) -> ExtElement {
        ExtElement { g: self.identity(), twist: true }
    }

    pub fn ext_from(&self, g: AmalgamWord) -> ExtElement {
        ExtElement { g, twist: false }
    }

    /// `(g1, s1)(g2, s2) = (g1 gamma^s1(g2), s1 + s2)`.
    pub fn ext_mul(&self, x: &ExtElement, y: &ExtElement) -> ExtElement {
        ExtElement { g: self.mul(&x.g, &self.gamma_pow(&y.g, x.twist)), twist: x.twist ^ y.twist }
    }

    pub fn ext_inverse(&self, x: &ExtElement) -> ExtElement {
        ExtElement { g: self.gamma_pow(&self.inverse(&x.g), x.twist), twist: x.twist }
    }

    /// The vertex `g C_side`.
    pub fn vertex_of(&self, g: &AmalgamWord, side: Side) -> TreeVertex {
        let mut rep = g.syllables.clone();
        if rep.last().map(|l| l.side) == Some(side) {
            rep.pop();
        }
        TreeVertex { side, rep }
    }

    fn rep_word(&self, rep: &[DoubleLetter]) -> AmalgamWord {
        AmalgamWord { syllables: rep.to_vec(), tail: self.c.identity() }
    }

    pub fn base_vertex(&self, side: Side) -> TreeVertex {
        TreeVertex { side, rep: Vec::new() }
    }

    pub fn act_on_vertex(&self, x: &ExtElement, v: &TreeVertex) -> TreeVertex {
        let r = self.gamma_pow(&self.rep_word(&v.rep), x.twist);
        self.vertex_of(&self.mul(&x.g, &r), v.side.twisted(x.twist))
    }

    pub fn edge_of(&self, g: &AmalgamWord) -> TreeEdge {
        TreeEdge { z: g.syllables.clone() }
    }

    pub fn base_edge(&self) -> TreeEdge {
        TreeEdge { z: Vec::new() }
    }

    pub fn edge_endpoints(&self, e: &TreeEdge) -> (TreeVertex, TreeVertex) {
        let z = self.rep_word(&e.z);
        (self.vertex_of(&z, Side::Left), self.vertex_of(&z, Side::Right))
    }

    pub fn act_on_edge(&self, x: &ExtElement, e: &TreeEdge) -> TreeEdge {
        let z = self.gamma_pow(&self.rep_word(&e.z), x.twist);
        self.edge_of(&self.mul(&x.g, &z))
    }

    /// `i_e = z gamma z^-1`.
    pub fn edge_inversion(&self, e: &TreeEdge) -> ExtElement {
        let z = self.rep_word(&e.z);
        ExtElement { g: self.mul(&z, &self.gamma(&self.inverse(&z))), twist: true }
    }

    /// Vertices of the geodesic from `(1, start)` to `v`.
    fn geodesic_from_base(&self, start: Side, v: &TreeVertex) -> Vec<TreeVertex> {
        let mut out = alloc::vec![self.base_vertex(start)];
        let first = v.rep.first().map_or(v.side, |l| l.side);
        if first != start {
            out.push(self.base_vertex(start.other()));
        }
        for k in 1..=v.rep.len() {
            let side = v.rep[k - 1].side.other();
            out.push(TreeVertex { side, rep: v.rep[..k].to_vec() });
        }
        out.dedup();
        out
    }

    /// The unique tree path from `v` to `w`, both ends included.
    pub fn geodesic(&self, v: &TreeVertex, w: &TreeVertex) -> Vec<TreeVertex> {
        let rv = self.rep_word(&v.rep);
        let rel = self.mul(&self.inverse(&rv), &self.rep_word(&w.rep));
        let target = self.vertex_of(&rel, w.side);
        let back = self.ext_from(rv);
        self.geodesic_from_base(v.side, &target).iter().map(|u| self.act_on_vertex(&back, u)).collect()
    }

    pub fn distance(&self, v: &TreeVertex, w: &TreeVertex) -> usize {
        self.geodesic(v, w).len() - 1
    }

    /// The edge joining two adjacent vertices.
    pub fn edge_between(&self, v: &TreeVertex, w: &TreeVertex) -> Option<TreeEdge> {
        if v.side == w.side {
            return None;
        }
        let z = if v.rep.len() >= w.rep.len() { &v.rep } else { &w.rep };
        let e = TreeEdge { z: z.clone() };
        let (a, b) = self.edge_endpoints(&e);
        let ok = (a == *v && b == *w) || (a == *w && b == *v);
        ok.then_some(e)
    }

    /// Vertices adjacent to `v`, one per transversal element.
    pub fn neighbours(&self, v: &TreeVertex) -> Vec<TreeVertex> {
        let r = self.rep_word(&v.rep);
        self.split
            .transversal
            .iter()
            .map(|&d| {
                let g = self.mul(&r, &self.normal_form(&[DoubleLetter { side: v.side, g: d }]).unwrap());
                self.vertex_of(&g, v.side.other())
            })
            .collect()
    }

    pub fn kernel_rank(&self) -> usize {
        self.split.index() - 1
    }

    /// `d xi(d)^-1` for every non-identity transversal element `d`.
    pub fn kernel_basis(&self) -> Vec<AmalgamWord> {
        self.split.transversal[1..]
            .iter()
            .map(|&d| {
                let l = [DoubleLetter { side: Side::Left, g: d }, DoubleLetter { side: Side::Right, g: self.c.inv(d) }];
                self.normal_form(&l).unwrap()
            })
            .collect()
    }

    fn u_symbol(&self, q: usize) -> Option<usize> {
        let pos = self.split.rep_position(q);
        (pos != 0).then(|| pos - 1)
    }

    /// Writes a word with trivial retraction over the kernel basis: a right
    /// letter `xi(c)` read after prefix image `q` contributes
    /// `u(q) u(qc)^-1`.
    pub fn rewrite_in_kernel_basis(&self, w: &[DoubleLetter]) -> Result<FreeWord> {
        self.check_letters(w)?;
        let mut q = self.c.identity();
        let mut out = Vec::new();
        for l in w {
            let next = self.c.mul(q, l.g);
            if l.side == Side::Right {
                if let Some(s) = self.u_symbol(q) {
                    out.push(Letter::new(s, 1));
                }
                if let Some(s) = self.u_symbol(next) {
                    out.push(Letter::new(s, -1));
                }
            }
            q = next;
        }
        if q != self.c.identity() {
            return Err(Error::NotInKernel);
        }
        Ok(free_reduce(out))
    }

    pub fn expand(&self, w: &FreeWord) -> Vec<DoubleLetter> {
        let basis = self.kernel_basis();
        let mut out = Vec::new();
        for l in w.letters() {
            let b = basis[l.sym as usize].letters();
            if l.inv {
                out.extend(self.invert_letters(&b));
            } else {
                out.extend(b);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::{fold_subgroup_graph, graph_rank, is_free_basis};
    use crate::gog::{gog_normal_form, Edge, GogLetter, GogWord, GraphOfGroups, Vertex};
    use crate::perm::{closure, FiniteHom};
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn l(g: usize) -> DoubleLetter {
        DoubleLetter { side: Side::Left, g }
    }

    fn r(g: usize) -> DoubleLetter {
        DoubleLetter { side: Side::Right, g }
    }

    fn d_inf() -> Double {
        let c2 = FiniteGroup::cyclic(2);
        Double::new(c2.clone(), Subgroup::trivial(&c2)).unwrap()
    }

    // S3 doubled along a subgroup of order 2
    fn s3_double() -> Double {
        let s3 = FiniteGroup::symmetric(3);
        let b = s3.elements().map(|x| closure(&s3, &[x])).find(|s| s.order() == 2).unwrap();
        Double::new(s3, b).unwrap()
    }

    #[test]
    fn normal_form_examples() {
        let d = d_inf();
        assert!(d.is_identity(&d.normal_form(&[l(1), l(1)]).unwrap()));
        assert_eq!(d.normal_form(&[l(1), r(1), l(1), r(1)]).unwrap().len(), 4);
        let d = s3_double();
        for &b in d.subgroup().elements() {
            let w = d.normal_form(&[l(b), r(d.group().inv(b))]).unwrap();
            assert!(d.is_identity(&w));
        }
        assert!(d.normal_form(&[l(17)]).is_err());
    }

    #[test]
    fn retraction_examples() {
        let d = s3_double();
        for c in d.group().elements() {
            assert_eq!(d.retraction(&d.normal_form(&[l(c)]).unwrap()), c);
            assert_eq!(d.retraction(&d.normal_form(&[r(c)]).unwrap()), c);
            let w = d.normal_form(&[l(c), r(d.group().inv(c))]).unwrap();
            assert_eq!(d.retraction(&w), d.group().identity());
        }
    }

    #[test]
    fn ext_examples() {
        let d = s3_double();
        let g = d.ext_gamma();
        assert_eq!(d.ext_mul(&g, &g), d.ext_identity());
        for c in d.group().elements() {
            let x = d.ext_from(d.normal_form(&[l(c)]).unwrap());
            let y = d.ext_mul(&g, &x);
            assert_eq!(y, ExtElement { g: d.normal_form(&[r(c)]).unwrap(), twist: true });
        }
        for &b in d.subgroup().elements() {
            let x = d.ext_from(d.normal_form(&[l(b)]).unwrap());
            assert_eq!(d.ext_mul(&g, &x), d.ext_mul(&x, &g));
        }
    }

    #[test]
    fn tree_examples() {
        let d = d_inf();
        let c = d.base_vertex(Side::Left);
        let cp = d.base_vertex(Side::Right);
        assert_eq!(d.act_on_vertex(&d.ext_gamma(), &c), cp);
        let x = d.ext_from(d.normal_form(&[l(1)]).unwrap());
        assert_eq!(d.act_on_vertex(&x, &c), c);
        let ccp = d.ext_from(d.normal_form(&[l(1), r(1)]).unwrap());
        let far = d.act_on_vertex(&ccp, &c);
        assert_eq!(d.distance(&c, &far), 2);
        let path = d.geodesic(&c, &far);
        assert_eq!(path[1], d.act_on_vertex(&x, &cp));
        assert_eq!(d.geodesic(&c, &c), vec![c.clone()]);
        assert_eq!(d.geodesic(&c, &cp), vec![c.clone(), cp.clone()]);
        assert_eq!(d.edge_inversion(&d.base_edge()), d.ext_gamma());
        let e = d.act_on_edge(&x, &d.base_edge());
        let ie = d.edge_inversion(&e);
        assert_eq!(ie, d.ext_mul(&d.ext_mul(&x, &d.ext_gamma()), &d.ext_inverse(&x)));
        assert_eq!(d.ext_mul(&ie, &ie), d.ext_identity());
        assert_eq!(d.edge_between(&c, &cp), Some(d.base_edge()));
    }

    #[test]
    fn kernel_examples() {
        let d = d_inf();
        assert_eq!(d.kernel_basis(), vec![d.normal_form(&[l(1), r(1)]).unwrap()]);
        let c2 = FiniteGroup::cyclic(2);
        let whole = Double::new(c2.clone(), Subgroup::whole(&c2)).unwrap();
        assert!(whole.kernel_basis().is_empty());
        let c3 = FiniteGroup::cyclic(3);
        let d = Double::new(c3.clone(), Subgroup::trivial(&c3)).unwrap();
        assert_eq!(d.kernel_rank(), 2);
        let words: Vec<FreeWord> =
            d.kernel_basis().iter().map(|b| d.rewrite_in_kernel_basis(&b.letters()).unwrap()).collect();
        assert_eq!(words, vec![FreeWord::generator(0), FreeWord::generator(1)]);
        assert!(is_free_basis(&words).unwrap());
        assert_eq!(graph_rank(&fold_subgroup_graph(&words)), 2);
    }

    fn as_graph(d: &Double) -> GraphOfGroups {
        let c = d.group().clone();
        let els = d.subgroup().elements();
        let table = els.iter().map(|&x| els.iter().map(|&y| els.binary_search(&c.mul(x, y)).unwrap()).collect()).collect();
        let b = FiniteGroup::from_table(table).unwrap();
        let incl = FiniteHom { image: els.to_vec() };
        GraphOfGroups::new(
            vec![Vertex { name: "l".to_string(), group: c.clone() }, Vertex { name: "r".to_string(), group: c }],
            vec![Edge { name: "e".to_string(), src: 0, dst: 1, group: b, src_map: incl.clone(), dst_map: incl }],
            &[0],
        )
        .unwrap()
    }

    fn to_gog(w: &[DoubleLetter]) -> GogWord {
        GogWord(w.iter().map(|x| GogLetter::Vertex { v: (x.side == Side::Right) as usize, g: x.g }).collect())
    }

    fn arb(n: usize, max: usize) -> impl Strategy<Value = Vec<DoubleLetter>> {
        proptest::collection::vec(
            (0..n, any::<bool>()).prop_map(|(g, s)| DoubleLetter { side: if s { Side::Right } else { Side::Left }, g }),
            0..max,
        )
    }

    fn arb_ext(n: usize, max: usize) -> impl Strategy<Value = (Vec<DoubleLetter>, bool)> {
        (arb(n, max), any::<bool>())
    }

    proptest! {
        #[test]
        fn agrees_with_graph_normal_form((u, v) in (arb(6, 10), arb(6, 10))) {
            let d = s3_double();
            let g = as_graph(&d);
            let same = d.normal_form(&u).unwrap() == d.normal_form(&v).unwrap();
            let same_g = gog_normal_form(&g, &to_gog(&u)).unwrap() == gog_normal_form(&g, &to_gog(&v)).unwrap();
            prop_assert_eq!(same, same_g);
        }

        #[test]
        fn group_axioms((u, v, w) in (arb(6, 8), arb(6, 8), arb(6, 8))) {
            let d = s3_double();
            let (u, v, w) = (d.normal_form(&u).unwrap(), d.normal_form(&v).unwrap(), d.normal_form(&w).unwrap());
            prop_assert_eq!(d.mul(&d.mul(&u, &v), &w), d.mul(&u, &d.mul(&v, &w)));
            prop_assert!(d.is_identity(&d.mul(&u, &d.inverse(&u))));
            prop_assert_eq!(d.normal_form(&u.letters()).unwrap(), u.clone());
            prop_assert_eq!(d.retraction(&d.mul(&u, &v)), d.group().mul(d.retraction(&u), d.retraction(&v)));
            prop_assert_eq!(d.gamma(&d.mul(&u, &v)), d.mul(&d.gamma(&u), &d.gamma(&v)));
        }

        #[test]
        fn inversions_are_equivariant(((h, s), z) in (arb_ext(6, 6), arb(6, 6))) {
            let d = s3_double();
            let h = ExtElement { g: d.normal_form(&h).unwrap(), twist: s };
            let e = d.edge_of(&d.normal_form(&z).unwrap());
            let lhs = d.ext_mul(&h, &d.ext_mul(&d.edge_inversion(&e), &d.ext_inverse(&h)));
            prop_assert_eq!(lhs, d.edge_inversion(&d.act_on_edge(&h, &e)));
            // the inversion swaps the endpoints of its edge
            let (a, b) = d.edge_endpoints(&e);
            prop_assert_eq!(d.act_on_vertex(&d.edge_inversion(&e), &a), b.clone());
            // endpoints are adjacent and the edge is recovered
            prop_assert_eq!(d.edge_between(&a, &b), Some(e));
        }

        #[test]
        fn action_and_geodesics(((x, s), (y, t), v) in (arb_ext(6, 6), arb_ext(6, 6), arb(6, 6))) {
            let d = s3_double();
            let x = ExtElement { g: d.normal_form(&x).unwrap(), twist: s };
            let y = ExtElement { g: d.normal_form(&y).unwrap(), twist: t };
            let v = d.vertex_of(&d.normal_form(&v).unwrap(), Side::Left);
            let xy = d.ext_mul(&x, &y);
            prop_assert_eq!(d.act_on_vertex(&xy, &v), d.act_on_vertex(&x, &d.act_on_vertex(&y, &v)));
            let w = d.act_on_vertex(&x, &v);
            let path = d.geodesic(&v, &w);
            prop_assert_eq!(path.first(), Some(&v));
            prop_assert_eq!(path.last(), Some(&w));
            for p in path.windows(2) {
                prop_assert!(d.edge_between(&p[0], &p[1]).is_some());
                prop_assert!(d.neighbours(&p[0]).contains(&p[1]));
            }
            // isometry
            let gp = d.geodesic(&d.act_on_vertex(&y, &v), &d.act_on_vertex(&y, &w));
            prop_assert_eq!(gp.len(), path.len());
            // no backtracking
            for p in path.windows(3) {
                prop_assert!(p[0] != p[2]);
            }
        }

        #[test]
        fn stabilizer_law(x in arb(6, 6), v in arb(6, 6)) {
            let d = s3_double();
            let x = d.normal_form(&x).unwrap();
            let rv = d.normal_form(&v).unwrap();
            for side in [Side::Left, Side::Right] {
                let v = d.vertex_of(&rv, side);
                let fixed = d.act_on_vertex(&d.ext_from(x.clone()), &v) == v;
                let rep = AmalgamWord { syllables: v.rep.clone(), tail: d.group().identity() };
                let conj = d.mul(&d.mul(&d.inverse(&rep), &x), &rep);
                let in_side = conj.syllables.len() <= 1 && conj.syllables.iter().all(|s| s.side == side);
                prop_assert_eq!(fixed, in_side);
            }
        }

        #[test]
        fn kernel_round_trip(u in arb(6, 12)) {
            let d = s3_double();
            let mut w = u.clone();
            w.push(l(d.group().inv(d.retraction_letters(&u))));
            let f = d.rewrite_in_kernel_basis(&w).unwrap();
            prop_assert_eq!(d.normal_form(&d.expand(&f)).unwrap(), d.normal_form(&w).unwrap());
        }
    }
}
