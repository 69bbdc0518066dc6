//! Multiple special HNN-extensions `<A, t_i | t_i b t_i^-1 = b, b in B_i>` of
//! a finite group: Britton normal forms, the retraction onto `A` killing
//! every `t_i`, and its free kernel with basis `{d t_i d^-1 : d in D_i}`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free::{free_reduce, FreeWord, Letter};
use crate::perm::{CosetSplit, FiniteGroup, Subgroup};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableLetter {
    pub name: String,
    pub subgroup: Subgroup,
    /// Left transversal of the subgroup, identity first.
    #[serde(default)]
    pub transversal: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct HnnRepr {
    base: FiniteGroup,
    letters: Vec<StableLetter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HnnRepr", into = "HnnRepr")]
pub struct MultiHnn {
    base: FiniteGroup,
    letters: Vec<StableLetter>,
    splits: Vec<CosetSplit>,
    // first kernel basis symbol of each letter
    offsets: Vec<usize>,
}

impl TryFrom<HnnRepr> for MultiHnn {
    type Error = Error;
    fn try_from(r: HnnRepr) -> Result<Self> {
        let given: Vec<Vec<usize>> = r.letters.iter().map(|l| l.transversal.clone()).collect();
        let letters = r.letters.into_iter().map(|l| (l.name, l.subgroup)).collect();
        let h = MultiHnn::new(r.base, letters)?;
        for (l, g) in h.letters.iter().zip(given) {
            if !g.is_empty() && g != l.transversal {
                return Err(Error::InvalidGroup(alloc::format!("transversal of {} differs", l.name)));
            }
        }
        Ok(h)
    }
}

impl From<MultiHnn> for HnnRepr {
    fn from(h: MultiHnn) -> Self {
        HnnRepr { base: h.base, letters: h.letters }
    }
}

/// A base element or a stable letter `t^e`, `e = +-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HnnLetter {
    Base { a: usize },
    Stable { t: usize, e: i8 },
}

/// One syllable `d t_i^e` of a normal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Syllable {
    pub d: usize,
    pub t: usize,
    pub e: i8,
}

/// `d_1 t_{i_1}^{e_1} ... d_n t_{i_n}^{e_n} tail`: Britton-reduced, every `d_k`
/// in the transversal of its letter's subgroup.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HnnWord {
    pub syllables: Vec<Syllable>,
    pub tail: usize,
}

impl HnnWord {
    pub fn letters(&self, h: &MultiHnn) -> Vec<HnnLetter> {
        let id = h.base.identity();
        let mut out = Vec::new();
        for s in &self.syllables {
            if s.d != id {
                out.push(HnnLetter::Base { a: s.d });
            }
            out.push(HnnLetter::Stable { t: s.t, e: s.e });
        }
        if self.tail != id {
            out.push(HnnLetter::Base { a: self.tail });
        }
        out
    }

    pub fn is_identity(&self, h: &MultiHnn) -> bool {
        self.syllables.is_empty() && self.tail == h.base.identity()
    }

    /// Number of stable letters.
    pub fn stable_length(&self) -> usize {
        self.syllables.len()
    }
}

impl MultiHnn {
    pub fn new(base: FiniteGroup, letters: Vec<(String, Subgroup)>) -> Result<Self> {
        let mut out = Vec::new();
        let mut splits = Vec::new();
        let mut offsets = Vec::new();
        let mut total = 0;
        for (name, sub) in letters {
            let checked = Subgroup::from_elements(&base, sub.elements().to_vec())?;
            if out.iter().any(|l: &StableLetter| l.name == name) {
                return Err(Error::InvalidGroup(alloc::format!("duplicate stable letter {name}")));
            }
            let split = CosetSplit::new(&base, &checked);
            offsets.push(total);
            total += split.index();
            out.push(StableLetter { name, subgroup: checked, transversal: split.transversal.clone() });
            splits.push(split);
        }
        Ok(MultiHnn { base, letters: out, splits, offsets })
    }

    pub fn base(&self) -> &FiniteGroup {
        &self.base
    }

    pub fn letters(&self) -> &[StableLetter] {
        &self.letters
    }

    pub fn num_letters(&self) -> usize {
        self.letters.len()
    }

    pub fn letter_index(&self, name: &str) -> Option<usize> {
        self.letters.iter().position(|l| l.name == name)
    }

    pub fn identity(&self) -> HnnWord {
        HnnWord { syllables: Vec::new(), tail: self.base.identity() }
    }

    pub fn check_letters(&self, w: &[HnnLetter]) -> Result<()> {
        for l in w {
            let ok = match *l {
                HnnLetter::Base { a } => self.base.is_element(a),
                HnnLetter::Stable { t, e } => t < self.letters.len() && (e == 1 || e == -1),
            };
            if !ok {
                return Err(Error::MalformedWord(alloc::format!("{l:?}")));
            }
        }
        Ok(())
    }

    /// Appends one letter to a normal form in place.
    pub fn push(&self, w: &mut HnnWord, l: HnnLetter) {
        match l {
            HnnLetter::Base { a } => w.tail = self.base.mul(w.tail, a),
            HnnLetter::Stable { t, e } => {
                if let Some(&last) = w.syllables.last() {
                    if last.t == t && last.e == -e && self.letters[t].subgroup.contains(w.tail) {
                        w.syllables.pop();
                        w.tail = self.base.mul(last.d, w.tail);
                        return;
                    }
                }
                let (d, b) = self.splits[t].split(w.tail);
                w.syllables.push(Syllable { d, t, e });
                w.tail = b;
            }
        }
    }

    /// Britton normal form of an arbitrary letter sequence.
    pub fn britton_reduce(&self, w: &[HnnLetter]) -> Result<HnnWord> {
        self.check_letters(w)?;
        let mut out = self.identity();
        for &l in w {
            self.push(&mut out, l);
        }
        Ok(out)
    }

    pub fn mul(&self, x: &HnnWord, y: &HnnWord) -> HnnWord {
        let mut out = x.clone();
        for l in y.letters(self) {
            self.push(&mut out, l);
        }
        out
    }

    pub fn inverse(&self, x: &HnnWord) -> HnnWord {
        let mut out = self.identity();
        for l in self.invert_letters(&x.letters(self)) {
            self.push(&mut out, l);
        }
        out
    }

    pub fn invert_letters(&self, w: &[HnnLetter]) -> Vec<HnnLetter> {
        w.iter()
            .rev()
            .map(|&l| match l {
                HnnLetter::Base { a } => HnnLetter::Base { a: self.base.inv(a) },
                HnnLetter::Stable { t, e } => HnnLetter::Stable { t, e: -e },
            })
            .collect()
    }

    /// `rho`: the product of the base letters.
    pub fn retraction(&self, w: &HnnWord) -> usize {
        self.retraction_letters(&w.letters(self))
    }

    pub fn retraction_letters(&self, w: &[HnnLetter]) -> usize {
        self.base.product(w.iter().filter_map(|l| match *l {
            HnnLetter::Base { a } => Some(a),
            HnnLetter::Stable { .. } => None,
        }))
    }

    pub fn kernel_rank(&self) -> usize {
        self.splits.iter().map(CosetSplit::index).sum()
    }

    /// `(letter, transversal element)` behind each kernel basis symbol.
    pub fn kernel_symbol(&self, sym: usize) -> (usize, usize) {
        let i = self.offsets.iter().rposition(|&o| o <= sym).unwrap();
        (i, self.splits[i].transversal[sym - self.offsets[i]])
    }

    /// `d t_i d^-1` for every letter `i` and every `d` in its transversal.
    pub fn kernel_basis(&self) -> Vec<HnnWord> {
        (0..self.kernel_rank())
            .map(|s| {
                let (i, d) = self.kernel_symbol(s);
                self.britton_reduce(&self.basis_letters(i, d)).unwrap()
            })
            .collect()
    }

    fn basis_letters(&self, i: usize, d: usize) -> [HnnLetter; 3] {
        [
            HnnLetter::Base { a: d },
            HnnLetter::Stable { t: i, e: 1 },
            HnnLetter::Base { a: self.base.inv(d) },
        ]
    }

    /// Rewrites a word with trivial retraction over the kernel basis by a
    /// scan that keeps the running base prefix `a`: `a t_i^e = (d t_i d^-1)^e a`
    /// where `a` lies in `d B_i`.
    pub fn rewrite_in_kernel_basis(&self, w: &[HnnLetter]) -> Result<FreeWord> {
        self.check_letters(w)?;
        let mut a = self.base.identity();
        let mut out = Vec::new();
        for &l in w {
            match l {
                HnnLetter::Base { a: x } => a = self.base.mul(a, x),
                HnnLetter::Stable { t, e } => {
                    let sym = self.offsets[t] + self.splits[t].rep_position(a);
                    out.push(Letter::new(sym, e));
                }
            }
        }
        if a != self.base.identity() {
            return Err(Error::NotInKernel);
        }
        Ok(free_reduce(out))
    }

    /// Substitutes the kernel basis into a free word.
    pub fn expand(&self, w: &FreeWord) -> Vec<HnnLetter> {
        let mut out = Vec::new();
        for l in w.letters() {
            let (i, d) = self.kernel_symbol(l.sym as usize);
            let b = self.basis_letters(i, d);
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
    use crate::free::is_free_basis;
    use crate::gog::{gog_normal_form, Edge, GogLetter, GogWord, GraphOfGroups, Vertex};
    use crate::perm::{closure, FiniteHom};
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn base(a: usize) -> HnnLetter {
        HnnLetter::Base { a }
    }

    fn st(t: usize, e: i8) -> HnnLetter {
        HnnLetter::Stable { t, e }
    }

    fn c2_trivial(letters: usize) -> MultiHnn {
        let c2 = FiniteGroup::cyclic(2);
        let l = (0..letters).map(|i| (alloc::format!("t{i}"), Subgroup::trivial(&c2))).collect();
        MultiHnn::new(c2, l).unwrap()
    }

    // S3 with letters over <(12)> and <(123)>
    fn s3_two() -> MultiHnn {
        let s3 = FiniteGroup::symmetric(3);
        let gens = s3.generators();
        let b1 = closure(&s3, &[gens[0]]);
        let b2 = closure(&s3, &[gens[1]]);
        let (b1, b2) = if b1.order() == 2 { (b1, b2) } else { (b2, b1) };
        MultiHnn::new(s3, vec![("s".into(), b1), ("t".into(), b2)]).unwrap()
    }

    #[test]
    fn britton_examples() {
        let c2 = FiniteGroup::cyclic(2);
        let h = MultiHnn::new(c2.clone(), vec![("t".into(), Subgroup::whole(&c2))]).unwrap();
        let w = h.britton_reduce(&[st(0, 1), base(1), st(0, -1)]).unwrap();
        assert_eq!(w.letters(&h), vec![base(1)]);
        let h = c2_trivial(1);
        let w = h.britton_reduce(&[st(0, 1), base(1), st(0, -1)]).unwrap();
        assert_eq!(w.letters(&h).len(), 3);
        let w = h.britton_reduce(&[st(0, 1), base(1), st(0, -1), st(0, 1), base(1), st(0, -1)]).unwrap();
        assert!(w.is_identity(&h));
    }

    #[test]
    fn retraction_examples() {
        let h = s3_two();
        let a = 3;
        assert_eq!(h.retraction(&h.britton_reduce(&[base(a)]).unwrap()), a);
        assert_eq!(h.retraction(&h.britton_reduce(&[st(0, 1)]).unwrap()), h.base().identity());
        let b = h.letters()[0].subgroup.elements()[1];
        let w = h.britton_reduce(&[base(a), st(0, 1), base(b), st(0, -1), base(4)]).unwrap();
        assert_eq!(w.syllables.len(), 0);
        assert_eq!(h.retraction(&w), h.base().product([a, b, 4]));
    }

    #[test]
    fn kernel_basis_sizes() {
        let c2 = FiniteGroup::cyclic(2);
        let h = MultiHnn::new(c2.clone(), vec![("t".into(), Subgroup::whole(&c2))]).unwrap();
        assert_eq!(h.kernel_basis().len(), 1);
        assert_eq!(c2_trivial(1).kernel_basis().len(), 2);
        assert_eq!(c2_trivial(2).kernel_basis().len(), 4);
        assert_eq!(s3_two().kernel_rank(), 3 + 2);
    }

    #[test]
    fn rewrite_examples() {
        let h = c2_trivial(1);
        assert_eq!(h.rewrite_in_kernel_basis(&[st(0, 1)]).unwrap(), FreeWord::generator(0));
        assert_eq!(h.rewrite_in_kernel_basis(&[base(1), st(0, 1), base(1)]).unwrap(), FreeWord::generator(1));
        let w = h.rewrite_in_kernel_basis(&[base(1), st(0, -1), base(1), st(0, 1)]).unwrap();
        assert_eq!(w, FreeWord::from_pairs(&[(1, -1), (0, 1)]));
        assert_eq!(w.exponent_sums(2), vec![1, -1]);
        assert!(matches!(h.rewrite_in_kernel_basis(&[base(1)]), Err(Error::NotInKernel)));
    }

    // the same group as a one-vertex graph of groups with a loop per letter
    fn as_graph(h: &MultiHnn) -> GraphOfGroups {
        let a = h.base().clone();
        let edges = h
            .letters()
            .iter()
            .map(|l| {
                let sub = FiniteGroup::from_table(
                    l.subgroup
                        .elements()
                        .iter()
                        .map(|&x| {
                            let els = l.subgroup.elements();
                            els.iter().map(|&y| els.binary_search(&a.mul(x, y)).unwrap()).collect()
                        })
                        .collect(),
                )
                .unwrap();
                let incl = FiniteHom { image: l.subgroup.elements().to_vec() };
                Edge { name: l.name.clone(), src: 0, dst: 0, group: sub, src_map: incl.clone(), dst_map: incl }
            })
            .collect();
        GraphOfGroups::new(vec![Vertex { name: "a".to_string(), group: a }], edges, &[]).unwrap()
    }

    fn to_gog(w: &[HnnLetter]) -> GogWord {
        GogWord(
            w.iter()
                .map(|&l| match l {
                    HnnLetter::Base { a } => GogLetter::Vertex { v: 0, g: a },
                    HnnLetter::Stable { t, e } => GogLetter::Stable { t, e },
                })
                .collect(),
        )
    }

    fn arb_letters(h: &MultiHnn, max: usize) -> impl Strategy<Value = Vec<HnnLetter>> {
        let n = h.base().order();
        let k = h.num_letters();
        let letter = prop_oneof![
            (0..n).prop_map(|a| HnnLetter::Base { a }),
            (0..k, any::<bool>()).prop_map(|(t, s)| HnnLetter::Stable { t, e: if s { 1 } else { -1 } }),
        ];
        proptest::collection::vec(letter, 0..max)
    }

    proptest! {
        #[test]
        fn agrees_with_graph_normal_form((u, v) in (arb_letters(&s3_two(), 10), arb_letters(&s3_two(), 10))) {
            let h = s3_two();
            let g = as_graph(&h);
            let same = h.britton_reduce(&u).unwrap() == h.britton_reduce(&v).unwrap();
            let same_g = gog_normal_form(&g, &to_gog(&u)).unwrap() == gog_normal_form(&g, &to_gog(&v)).unwrap();
            prop_assert_eq!(same, same_g);
            // u v^-1 trivial iff same
            let mut uv = u.clone();
            uv.extend(h.invert_letters(&v));
            prop_assert_eq!(h.britton_reduce(&uv).unwrap().is_identity(&h), same);
        }

        #[test]
        fn group_axioms((u, v, w) in (arb_letters(&s3_two(), 8), arb_letters(&s3_two(), 8), arb_letters(&s3_two(), 8))) {
            let h = s3_two();
            let (u, v, w) = (h.britton_reduce(&u).unwrap(), h.britton_reduce(&v).unwrap(), h.britton_reduce(&w).unwrap());
            prop_assert_eq!(h.mul(&h.mul(&u, &v), &w), h.mul(&u, &h.mul(&v, &w)));
            prop_assert!(h.mul(&u, &h.inverse(&u)).is_identity(&h));
            prop_assert_eq!(h.britton_reduce(&u.letters(&h)).unwrap(), u.clone());
            prop_assert_eq!(h.retraction(&h.mul(&u, &v)), h.base().mul(h.retraction(&u), h.retraction(&v)));
        }

        #[test]
        fn kernel_round_trip(u in arb_letters(&s3_two(), 12)) {
            let h = s3_two();
            // force trivial retraction
            let mut w = u.clone();
            w.push(HnnLetter::Base { a: h.base().inv(h.retraction_letters(&u)) });
            let f = h.rewrite_in_kernel_basis(&w).unwrap();
            let back = h.britton_reduce(&h.expand(&f)).unwrap();
            prop_assert_eq!(back, h.britton_reduce(&w).unwrap());
        }
    }

    #[test]
    fn kernel_basis_is_free() {
        let h = s3_two();
        let basis = h.kernel_basis();
        let words: Vec<FreeWord> = basis.iter().map(|b| h.rewrite_in_kernel_basis(&b.letters(&h)).unwrap()).collect();
        assert!(words.iter().enumerate().all(|(i, w)| *w == FreeWord::generator(i)));
        assert!(is_free_basis(&words).unwrap());
        let prods: Vec<FreeWord> = basis
            .windows(2)
            .map(|p| h.rewrite_in_kernel_basis(&h.mul(&p[0], &p[1]).letters(&h)).unwrap())
            .collect();
        assert!(is_free_basis(&prods).unwrap());
        let all = crate::free::fold_subgroup_graph(&words);
        assert_eq!(crate::free::graph_rank(&all), h.kernel_rank());
    }
}
