//! Finite group arithmetic.
//!
//! Elements of a [`FiniteGroup`] are dense indices `0..order`. Permutations act
//! on the right: `x^p = p[x]`, and the product `p * q` means "apply `p`, then
//! `q`". With this convention a right action of a group on a set gives a
//! homomorphism into the permutation group.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A permutation of `0..degree`, acting on the right.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Perm(Vec<u32>);

impl Perm {
    pub fn identity(degree: usize) -> Self {
        Perm((0..degree as u32).collect())
    }

    /// Builds a permutation from its image list, checking bijectivity.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if x >= n || seen[x] {
                return Err(Error::InvalidGroup(format!(
                    "image list {images:?} is not a permutation"
                )));
            }
            seen[x] = true;
        }
        Ok(Perm(images.into_iter().map(|x| x as u32).collect()))
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.0[x] as usize
    }

    /// `self` first, then `other`.
    pub fn then(&self, other: &Perm) -> Perm {
        Perm(self.0.iter().map(|&x| other.0[x as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u32; self.0.len()];
        for (x, &y) in self.0.iter().enumerate() {
            inv[y as usize] = x as u32;
        }
        Perm(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(x, &y)| x as u32 == y)
    }

    pub fn images(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&x| x as usize)
    }

    pub fn fixed_points(&self) -> usize {
        self.0.iter().enumerate().filter(|(x, &y)| *x as u32 == y).count()
    }
}

/// A finite group given by its multiplication table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupRepr", into = "GroupRepr")]
pub struct FiniteGroup {
    order: usize,
    table: Vec<u32>,
    identity: usize,
    inverse: Vec<u32>,
    perms: Option<Vec<Perm>>,
}

#[derive(Serialize, Deserialize)]
struct GroupRepr {
    table: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perm_realization: Option<Vec<Perm>>,
}

impl TryFrom<GroupRepr> for FiniteGroup {
    type Error = Error;
    fn try_from(r: GroupRepr) -> Result<Self> {
        let mut g = FiniteGroup::from_table(r.table)?;
        if let Some(perms) = r.perm_realization {
            g.set_perm_realization(perms)?;
        }
        Ok(g)
    }
}

impl From<FiniteGroup> for GroupRepr {
    fn from(g: FiniteGroup) -> Self {
        GroupRepr {
            table: (0..g.order).map(|a| (0..g.order).map(|b| g.mul(a, b)).collect()).collect(),
            perm_realization: g.perms,
        }
    }
}

/// Result of generating a permutation group: the group plus, for every
/// element, the BFS edge `(parent, generator)` that first reached it.
#[derive(Debug, Clone)]
pub struct PermGroupBuild {
    pub group: FiniteGroup,
    /// Element index of each input generator.
    pub generators: Vec<usize>,
    parent: Vec<Option<(usize, usize)>>,
}

impl PermGroupBuild {
    /// A shortest word (generator indices, left to right) for `elem`.
    pub fn word_of(&self, mut elem: usize) -> Vec<usize> {
        let mut w = Vec::new();
        while let Some((p, s)) = self.parent[elem] {
            w.push(s);
            elem = p;
        }
        w.reverse();
        w
    }
}

impl FiniteGroup {
    /// Validates a multiplication table and builds the group.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in &table {
            if row.len() != n {
                return Err(Error::InvalidGroup("table is not square".into()));
            }
            for &x in row {
                if x >= n {
                    return Err(Error::InvalidGroup(format!("entry {x} out of range")));
                }
                flat.push(x as u32);
            }
        }
        Self::from_flat(n, flat)
    }

    fn from_flat(n: usize, flat: Vec<u32>) -> Result<Self> {
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| flat[e * n + x] as usize == x && flat[x * n + e] as usize == x))
            .ok_or_else(|| Error::InvalidGroup("no two-sided identity".into()))?;
        let mut inverse = vec![0u32; n];
        for x in 0..n {
            let y = (0..n)
                .find(|&y| flat[x * n + y] as usize == identity)
                .ok_or_else(|| Error::InvalidGroup(format!("element {x} has no inverse")))?;
            if flat[y * n + x] as usize != identity {
                return Err(Error::InvalidGroup(format!("element {x} has no two-sided inverse")));
            }
            inverse[x] = y as u32;
        }
        let g = FiniteGroup { order: n, table: flat, identity, inverse, perms: None };
        if !g.is_associative() {
            return Err(Error::InvalidGroup("operation is not associative".into()));
        }
        Ok(g)
    }

    /// Light's associativity test over a generating set; exact.
    fn is_associative(&self) -> bool {
        // Rows of a table with identity and inverses are permutations, so the
        // structure is a loop; Light's test on a generating set of the loop
        // decides associativity.
        let gens = self.loop_generators();
        let n = self.order;
        gens.iter().all(|&s| {
            (0..n).all(|x| (0..n).all(|y| self.mul(self.mul(x, s), y) == self.mul(x, self.mul(s, y))))
        })
    }

    // Generating set built by closing under (not necessarily associative)
    // products; valid before associativity is known.
    fn loop_generators(&self) -> Vec<usize> {
        let n = self.order;
        let mut gens = Vec::new();
        let mut inside = vec![false; n];
        inside[self.identity] = true;
        for x in 0..n {
            if inside[x] {
                continue;
            }
            gens.push(x);
            let mut members: Vec<usize> = (0..n).filter(|&i| inside[i]).collect();
            members.push(x);
            inside[x] = true;
            let mut i = 0;
            while i < members.len() {
                let a = members[i];
                let snapshot = members.len();
                for j in 0..snapshot {
                    let b = members[j];
                    for c in [self.mul(a, b), self.mul(b, a)] {
                        if !inside[c] {
                            inside[c] = true;
                            members.push(c);
                        }
                    }
                }
                i += 1;
            }
        }
        gens
    }

    /// Generates the group spanned by `gens` (all of the same degree).
    pub fn from_permutations(degree: usize, gens: &[Perm], cap: usize) -> Result<PermGroupBuild> {
        for p in gens {
            if p.degree() != degree {
                return Err(Error::InvalidGroup("generator degree mismatch".into()));
            }
        }
        let mut elems = vec![Perm::identity(degree)];
        let mut index: BTreeMap<Perm, usize> = BTreeMap::new();
        index.insert(elems[0].clone(), 0);
        let mut parent = vec![None];
        // right multiplication by each generator
        let mut right: Vec<Vec<u32>> = vec![Vec::new(); gens.len()];
        let mut i = 0;
        while i < elems.len() {
            for (s, g) in gens.iter().enumerate() {
                let p = elems[i].then(g);
                let j = match index.get(&p) {
                    Some(&j) => j,
                    None => {
                        let j = elems.len();
                        if j >= cap {
                            return Err(Error::budget("group order", cap));
                        }
                        index.insert(p.clone(), j);
                        elems.push(p);
                        parent.push(Some((i, s)));
                        j
                    }
                };
                right[s].push(j as u32);
            }
            i += 1;
        }
        let n = elems.len();
        let mut table = vec![0u32; n * n];
        for a in 0..n {
            table[a * n] = a as u32;
            for b in 1..n {
                let (pb, s) = parent[b].unwrap();
                let ab_parent = table[a * n + pb] as usize;
                table[a * n + b] = right[s][ab_parent];
            }
        }
        let mut inverse = vec![0u32; n];
        for a in 0..n {
            for b in 0..n {
                if table[a * n + b] == 0 {
                    inverse[a] = b as u32;
                    break;
                }
            }
        }
        let generators = gens.iter().map(|g| index[g]).collect();
        let group = FiniteGroup { order: n, table, identity: 0, inverse, perms: Some(elems) };
        Ok(PermGroupBuild { group, generators, parent })
    }

    pub fn trivial() -> Self {
        Self::cyclic(1)
    }

    /// The cyclic group `Z/n`, element `k` standing for `k mod n`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n > 0);
        let table = (0..n * n).map(|k| (((k / n) + (k % n)) % n) as u32).collect();
        let inverse = (0..n).map(|k| ((n - k) % n) as u32).collect();
        FiniteGroup { order: n, table, identity: 0, inverse, perms: None }
    }

    /// Symmetric group on `degree` points, realized by permutations.
    pub fn symmetric(degree: usize) -> Self {
        let mut gens = Vec::new();
        if degree > 1 {
            let mut t: Vec<usize> = (0..degree).collect();
            t.swap(0, 1);
            gens.push(Perm::from_images(t).unwrap());
            let c: Vec<usize> = (0..degree).map(|x| (x + 1) % degree).collect();
            gens.push(Perm::from_images(c).unwrap());
        }
        Self::from_permutations(degree, &gens, usize::MAX).unwrap().group
    }

    /// `G x H` with `(g, h)` stored at index `g * |H| + h`.
    pub fn direct_product(g: &FiniteGroup, h: &FiniteGroup) -> Self {
        let (m, k) = (g.order, h.order);
        let n = m * k;
        let mut table = vec![0u32; n * n];
        for a in 0..n {
            for b in 0..n {
                let (ga, ha) = (a / k, a % k);
                let (gb, hb) = (b / k, b % k);
                table[a * n + b] = (g.mul(ga, gb) * k + h.mul(ha, hb)) as u32;
            }
        }
        let inverse = (0..n).map(|a| (g.inv(a / k) * k + h.inv(a % k)) as u32).collect();
        FiniteGroup { order: n, table, identity: g.identity * k + h.identity, inverse, perms: None }
    }

    /// `(Z/p)^rank`, element index = base-`p` digits, digit `i` for coordinate `i`.
    pub fn elementary_abelian(p: usize, rank: usize, cap: usize) -> Result<Self> {
        let mut order = 1usize;
        for _ in 0..rank {
            order = order.checked_mul(p).filter(|&o| o <= cap).ok_or(Error::budget("group order", cap))?;
        }
        let mut g = Self::cyclic(1);
        for _ in 0..rank {
            g = Self::direct_product(&Self::cyclic(p), &g);
        }
        debug_assert_eq!(g.order, order);
        Ok(g)
    }

    pub fn set_perm_realization(&mut self, perms: Vec<Perm>) -> Result<()> {
        if perms.len() != self.order {
            return Err(Error::InvalidGroup("perm realization has wrong length".into()));
        }
        let degree = perms.first().map_or(0, Perm::degree);
        if perms.iter().any(|p| p.degree() != degree) {
            return Err(Error::InvalidGroup("perm realization degrees differ".into()));
        }
        for a in 0..self.order {
            for b in 0..self.order {
                if perms[a].then(&perms[b]) != perms[self.mul(a, b)] {
                    return Err(Error::InvalidGroup("perm realization is not a homomorphism".into()));
                }
            }
        }
        if (0..self.order).filter(|&a| perms[a].is_identity()).count() != 1 {
            return Err(Error::InvalidGroup("perm realization is not faithful".into()));
        }
        self.perms = Some(perms);
        Ok(())
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn identity(&self) -> usize {
        self.identity
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b] as usize
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }

    pub fn product<I: IntoIterator<Item = usize>>(&self, it: I) -> usize {
        it.into_iter().fold(self.identity, |acc, x| self.mul(acc, x))
    }

    pub fn pow(&self, a: usize, e: i64) -> usize {
        let base = if e < 0 { self.inv(a) } else { a };
        (0..e.unsigned_abs()).fold(self.identity, |acc, _| self.mul(acc, base))
    }

    pub fn element_order(&self, a: usize) -> usize {
        let mut x = a;
        let mut k = 1;
        while x != self.identity {
            x = self.mul(x, a);
            k += 1;
        }
        k
    }

    pub fn perm_realization(&self) -> Option<&[Perm]> {
        self.perms.as_deref()
    }

    pub fn elements(&self) -> core::ops::Range<usize> {
        0..self.order
    }

    pub fn is_element(&self, a: usize) -> bool {
        a < self.order
    }

    /// A small generating set chosen greedily in index order.
    pub fn generators(&self) -> Vec<usize> {
        let mut gens = Vec::new();
        let mut sub = closure(self, &[]);
        for x in self.elements() {
            if !sub.contains(x) {
                gens.push(x);
                sub = closure(self, &gens);
            }
        }
        gens
    }

    /// Exhaustive check of the group axioms.
    pub fn check_axioms(&self) -> bool {
        let n = self.order;
        (0..n).all(|a| self.mul(a, self.identity) == a && self.mul(self.identity, a) == a)
            && (0..n).all(|a| self.mul(a, self.inv(a)) == self.identity)
            && (0..n).all(|a| {
                (0..n).all(|b| (0..n).all(|c| self.mul(self.mul(a, b), c) == self.mul(a, self.mul(b, c))))
            })
    }
}

/// A subgroup, stored as a sorted list of element indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subgroup {
    elements: Vec<usize>,
}

impl Subgroup {
    /// Wraps a set of elements after checking it is a subgroup of `parent`.
    pub fn from_elements(parent: &FiniteGroup, mut elements: Vec<usize>) -> Result<Self> {
        elements.sort_unstable();
        elements.dedup();
        if elements.iter().any(|&x| x >= parent.order()) {
            return Err(Error::InvalidGroup("subgroup element out of range".into()));
        }
        let sub = Subgroup { elements };
        if !sub.contains(parent.identity())
            || !sub.elements.iter().all(|&a| sub.elements.iter().all(|&b| sub.contains(parent.mul(a, parent.inv(b)))))
        {
            return Err(Error::InvalidGroup("element set is not a subgroup".into()));
        }
        Ok(sub)
    }

    pub fn whole(parent: &FiniteGroup) -> Self {
        Subgroup { elements: parent.elements().collect() }
    }

    pub fn trivial(parent: &FiniteGroup) -> Self {
        Subgroup { elements: vec![parent.identity()] }
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.elements.binary_search(&x).is_ok()
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn index_in(&self, parent: &FiniteGroup) -> usize {
        parent.order() / self.order()
    }
}

/// Smallest subgroup of `parent` containing `gens`.
pub fn closure(parent: &FiniteGroup, gens: &[usize]) -> Subgroup {
    let mut inside = vec![false; parent.order()];
    inside[parent.identity()] = true;
    let mut queue = VecDeque::from([parent.identity()]);
    while let Some(x) = queue.pop_front() {
        for &g in gens {
            let y = parent.mul(x, g);
            if !inside[y] {
                inside[y] = true;
                queue.push_back(y);
            }
        }
    }
    Subgroup { elements: (0..parent.order()).filter(|&x| inside[x]).collect() }
}

/// Left transversal: the identity first, then the smallest index of every
/// remaining left coset `xB`, in increasing order.
pub fn left_transversal(parent: &FiniteGroup, sub: &Subgroup) -> Vec<usize> {
    let mut covered = vec![false; parent.order()];
    let mut reps = Vec::with_capacity(sub.index_in(parent));
    let mut take = |x: usize, covered: &mut Vec<bool>| {
        reps.push(x);
        for &b in sub.elements() {
            covered[parent.mul(x, b)] = true;
        }
    };
    take(parent.identity(), &mut covered);
    for x in parent.elements() {
        if !covered[x] {
            take(x, &mut covered);
        }
    }
    reps
}

/// Decomposition `g = d * b` of every element against a fixed left
/// transversal `D` of a subgroup `B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetSplit {
    pub transversal: Vec<usize>,
    /// position in `transversal` of the coset of each element
    rep_pos: Vec<u32>,
    /// the `B`-part `d^-1 g` of each element
    sub_part: Vec<u32>,
}

impl CosetSplit {
    pub fn new(parent: &FiniteGroup, sub: &Subgroup) -> Self {
        Self::with_transversal(parent, sub, left_transversal(parent, sub))
    }

    pub fn with_transversal(parent: &FiniteGroup, sub: &Subgroup, transversal: Vec<usize>) -> Self {
        let n = parent.order();
        let mut rep_pos = vec![0u32; n];
        let mut sub_part = vec![0u32; n];
        for (i, &d) in transversal.iter().enumerate() {
            for &b in sub.elements() {
                let g = parent.mul(d, b);
                rep_pos[g] = i as u32;
                sub_part[g] = b as u32;
            }
        }
        CosetSplit { transversal, rep_pos, sub_part }
    }

    /// `(d, b)` with `g = d * b`.
    #[inline]
    pub fn split(&self, g: usize) -> (usize, usize) {
        (self.transversal[self.rep_pos[g] as usize], self.sub_part[g] as usize)
    }

    #[inline]
    pub fn rep_position(&self, g: usize) -> usize {
        self.rep_pos[g] as usize
    }

    pub fn index(&self) -> usize {
        self.transversal.len()
    }
}

/// A homomorphism between finite groups given by its image array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteHom {
    pub image: Vec<usize>,
}

impl FiniteHom {
    /// Validates that `image` defines a homomorphism `source -> target`.
    pub fn new(source: &FiniteGroup, target: &FiniteGroup, image: Vec<usize>) -> Result<Self> {
        let h = FiniteHom { image };
        if h.image.len() != source.order() || h.image.iter().any(|&x| x >= target.order()) {
            return Err(Error::InvalidGroup("hom image has wrong shape".into()));
        }
        if !h.is_hom(source, target) {
            return Err(Error::InvalidGroup("map is not a homomorphism".into()));
        }
        Ok(h)
    }

    pub fn identity(g: &FiniteGroup) -> Self {
        FiniteHom { image: g.elements().collect() }
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn is_hom(&self, source: &FiniteGroup, target: &FiniteGroup) -> bool {
        source.elements().all(|a| {
            source
                .elements()
                .all(|b| self.image[source.mul(a, b)] == target.mul(self.image[a], self.image[b]))
        })
    }

    pub fn is_injective(&self, source: &FiniteGroup, target: &FiniteGroup) -> bool {
        source.elements().filter(|&a| self.image[a] == target.identity()).count() == 1
    }

    pub fn is_surjective(&self, target: &FiniteGroup) -> bool {
        let mut hit = vec![false; target.order()];
        for &x in &self.image {
            hit[x] = true;
        }
        hit.into_iter().all(|h| h)
    }

    pub fn kernel(&self, source: &FiniteGroup, target: &FiniteGroup) -> Subgroup {
        Subgroup { elements: source.elements().filter(|&a| self.image[a] == target.identity()).collect() }
    }

    pub fn image_subgroup(&self, target: &FiniteGroup) -> Subgroup {
        let mut e = self.image.clone();
        e.sort_unstable();
        e.dedup();
        let _ = target;
        Subgroup { elements: e }
    }
}

/// Builds `sigma` with `sigma(x . g) = sigma(x) . g`, where `act1[g]` and
/// `act2[g]` are the permutations of `0..x_size` by which the group element
/// `g` acts. Orbits are matched in order of their smallest points.
pub fn intertwine_free_actions(group: &FiniteGroup, x_size: usize, act1: &[Perm], act2: &[Perm]) -> Result<Perm> {
    if act1.len() != group.order() || act2.len() != group.order() {
        return Err(Error::SizeMismatch("action must list one permutation per element".into()));
    }
    if act1.iter().chain(act2).any(|p| p.degree() != x_size) {
        return Err(Error::SizeMismatch("action degree differs from set size".into()));
    }
    for (name, act) in [("first", act1), ("second", act2)] {
        for g in group.elements() {
            if g != group.identity() && act[g].fixed_points() > 0 {
                return Err(Error::NotFree(format!("{name} action: element {g} has a fixed point")));
            }
        }
    }
    let bases = |act: &[Perm]| {
        let mut seen = vec![false; x_size];
        let mut out = Vec::new();
        for x in 0..x_size {
            if !seen[x] {
                out.push(x);
                for p in act {
                    seen[p.apply(x)] = true;
                }
            }
        }
        out
    };
    let (b1, b2) = (bases(act1), bases(act2));
    if b1.len() != b2.len() {
        return Err(Error::SizeMismatch(format!("{} orbits vs {} orbits", b1.len(), b2.len())));
    }
    let mut sigma = vec![usize::MAX; x_size];
    for (&x1, &x2) in b1.iter().zip(&b2) {
        for g in group.elements() {
            sigma[act1[g].apply(x1)] = act2[g].apply(x2);
        }
    }
    Perm::from_images(sigma)
}

/// A group presented through a membership test for a subgroup `K`; used to
/// enumerate the right cosets `K u`.
pub trait CosetSpace {
    type Elem: Clone;
    fn identity(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;
    /// Membership of `g` in `K`.
    fn in_subgroup(&self, g: &Self::Elem) -> bool;
    /// `K u == K v`.
    fn same_coset(&self, u: &Self::Elem, v: &Self::Elem) -> bool {
        self.in_subgroup(&self.mul(u, &self.inv(v)))
    }
}

/// Coset table of a finite-index subgroup: `table[i][j]` is the coset of
/// `reps[i] * gens[j]`.
#[derive(Debug, Clone)]
pub struct CosetTable<E> {
    pub reps: Vec<E>,
    pub table: Vec<Vec<usize>>,
    /// BFS edge `(coset, generator)` that first reached each coset.
    pub parent: Vec<Option<(usize, usize)>>,
}

impl<E> CosetTable<E> {
    pub fn index(&self) -> usize {
        self.reps.len()
    }

    /// Generator word (left to right) of the transversal element of `coset`.
    pub fn word_of(&self, mut coset: usize) -> Vec<usize> {
        let mut w = Vec::new();
        while let Some((p, s)) = self.parent[coset] {
            w.push(s);
            coset = p;
        }
        w.reverse();
        w
    }

    /// Right action of each generator on the coset space.
    pub fn generator_perms(&self) -> Vec<Perm> {
        let k = self.table.first().map_or(0, Vec::len);
        (0..k)
            .map(|j| Perm(self.table.iter().map(|row| row[j] as u32).collect()))
            .collect()
    }
}

/// BFS over right cosets of `K` from the trivial coset. Fails once more than
/// `cap` cosets appear.
pub fn enumerate_cosets<S: CosetSpace>(space: &S, gens: &[S::Elem], cap: usize) -> Result<CosetTable<S::Elem>> {
    let mut reps = vec![space.identity()];
    let mut parent = vec![None];
    let mut table: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < reps.len() {
        let mut row = Vec::with_capacity(gens.len());
        for (j, g) in gens.iter().enumerate() {
            let cand = space.mul(&reps[i], g);
            let found = (0..reps.len()).find(|&k| space.same_coset(&cand, &reps[k]));
            let k = match found {
                Some(k) => k,
                None => {
                    if reps.len() >= cap {
                        return Err(Error::budget("coset count", cap));
                    }
                    reps.push(cand);
                    parent.push(Some((i, j)));
                    reps.len() - 1
                }
            };
            row.push(k);
        }
        table.push(row);
        i += 1;
    }
    Ok(CosetTable { reps, table, parent })
}

/// Image of the acting group in the symmetric group on the coset space, with
/// the element of that image assigned to each generator.
#[derive(Debug, Clone)]
pub struct CosetAction<E> {
    pub cosets: CosetTable<E>,
    pub image: PermGroupBuild,
}

impl<E> CosetAction<E> {
    pub fn group(&self) -> &FiniteGroup {
        &self.image.group
    }

    pub fn generator_images(&self) -> &[usize] {
        &self.image.generators
    }
}

pub fn action_on_cosets<S: CosetSpace>(
    space: &S,
    gens: &[S::Elem],
    coset_cap: usize,
    order_cap: usize,
) -> Result<CosetAction<S::Elem>> {
    let cosets = enumerate_cosets(space, gens, coset_cap)?;
    let perms = cosets.generator_perms();
    let image = FiniteGroup::from_permutations(cosets.index(), &perms, order_cap)?;
    Ok(CosetAction { cosets, image })
}

pub fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

pub fn is_power_of(n: usize, p: usize) -> bool {
    let mut n = n;
    while n > 1 && n % p == 0 {
        n /= p;
    }
    n == 1
}

/// Whether `c` is `p`-by-`A` through the surjection `onto`: its kernel has
/// `p`-power order.
pub fn p_by_a_check(c: &FiniteGroup, a: &FiniteGroup, onto: &FiniteHom, p: usize) -> Result<bool> {
    if !is_prime(p) {
        return Err(Error::Precondition(format!("{p} is not prime")));
    }
    if onto.image.len() != c.order() || !onto.is_surjective(a) {
        return Err(Error::NotSurjective);
    }
    Ok(is_power_of(onto.kernel(c, a).order(), p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(v: &[usize]) -> Perm {
        Perm::from_images(v.to_vec()).unwrap()
    }

    fn s3() -> (FiniteGroup, usize, usize) {
        let b = FiniteGroup::from_permutations(3, &[perm(&[1, 0, 2]), perm(&[1, 2, 0])], 100).unwrap();
        (b.group, b.generators[0], b.generators[1])
    }

    #[test]
    fn closure_in_s3() {
        let (g, t, c) = s3();
        assert_eq!(g.order(), 6);
        assert!(g.check_axioms());
        assert_eq!(closure(&g, &[t]).order(), 2);
        assert_eq!(closure(&g, &[]).order(), 1);
        assert_eq!(closure(&g, &[t, c]).order(), 6);
    }

    #[test]
    fn transversals() {
        let c2 = FiniteGroup::cyclic(2);
        assert_eq!(left_transversal(&c2, &Subgroup::trivial(&c2)), vec![0, 1]);
        let (g, _, c) = s3();
        assert_eq!(left_transversal(&g, &Subgroup::whole(&g)), vec![g.identity()]);
        let sub = closure(&g, &[c]);
        let d = left_transversal(&g, &sub);
        assert_eq!(d.len(), 2);
        // every coset met exactly once
        for x in g.elements() {
            let hits = d.iter().filter(|&&r| sub.contains(g.mul(g.inv(r), x))).count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 1]]).is_err());
        // a loop that is not associative (order 5 Moufang-free loop)
        let t = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(FiniteGroup::from_table(t).is_err());
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]]).is_ok());
    }

    #[test]
    fn intertwiner_identical_and_nonfree() {
        let c2 = FiniteGroup::cyclic(2);
        let act = vec![Perm::identity(4), perm(&[1, 0, 3, 2])];
        let s = intertwine_free_actions(&c2, 4, &act, &act).unwrap();
        assert!(s.is_identity());
        let trivial = vec![Perm::identity(2), Perm::identity(2)];
        let free = vec![Perm::identity(2), perm(&[1, 0])];
        assert!(matches!(intertwine_free_actions(&c2, 2, &free, &trivial), Err(Error::NotFree(_))));
    }

    #[test]
    fn intertwiner_different_pairings() {
        let c2 = FiniteGroup::cyclic(2);
        let a1 = vec![Perm::identity(4), perm(&[1, 0, 3, 2])];
        let a2 = vec![Perm::identity(4), perm(&[2, 3, 0, 1])];
        let s = intertwine_free_actions(&c2, 4, &a1, &a2).unwrap();
        for g in 0..2 {
            for x in 0..4 {
                assert_eq!(s.apply(a1[g].apply(x)), a2[g].apply(s.apply(x)));
            }
        }
    }

    #[test]
    fn p_by_a() {
        let c2 = FiniteGroup::cyclic(2);
        assert!(p_by_a_check(&c2, &c2, &FiniteHom::identity(&c2), 2).unwrap());
        let v4 = FiniteGroup::direct_product(&c2, &c2);
        let proj = FiniteHom::new(&v4, &c2, (0..4).map(|x| x / 2).collect()).unwrap();
        assert!(p_by_a_check(&v4, &c2, &proj, 2).unwrap());
        let (s3, _, _) = s3();
        let sign: Vec<usize> = s3
            .perm_realization()
            .unwrap()
            .iter()
            .map(|p| {
                // parity from cycle count
                let mut seen = [false; 3];
                let mut cycles = 0;
                for x in 0..3 {
                    if !seen[x] {
                        cycles += 1;
                        let mut y = x;
                        while !seen[y] {
                            seen[y] = true;
                            y = p.apply(y);
                        }
                    }
                }
                (3 - cycles) % 2
            })
            .collect();
        let sign = FiniteHom::new(&s3, &c2, sign).unwrap();
        assert!(!p_by_a_check(&s3, &c2, &sign, 2).unwrap());
        let zero = FiniteHom { image: vec![0; 6] };
        assert_eq!(p_by_a_check(&s3, &c2, &zero, 2), Err(Error::NotSurjective));
    }

    struct ModN(i64);
    impl CosetSpace for ModN {
        type Elem = i64;
        fn identity(&self) -> i64 {
            0
        }
        fn mul(&self, a: &i64, b: &i64) -> i64 {
            a + b
        }
        fn inv(&self, a: &i64) -> i64 {
            -a
        }
        fn in_subgroup(&self, g: &i64) -> bool {
            g % self.0 == 0
        }
    }

    #[test]
    fn cosets_of_integers() {
        let act = action_on_cosets(&ModN(1), &[1], 10, 100).unwrap();
        assert_eq!(act.cosets.index(), 1);
        let act = action_on_cosets(&ModN(2), &[1], 10, 100).unwrap();
        assert_eq!(act.group().order(), 2);
        assert!(matches!(action_on_cosets(&ModN(50), &[1], 10, 100), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn elementary_abelian_and_products() {
        let g = FiniteGroup::elementary_abelian(2, 3, 4096).unwrap();
        assert_eq!(g.order(), 8);
        assert!(g.check_axioms());
        assert!(g.elements().all(|x| g.mul(x, x) == g.identity()));
        assert!(FiniteGroup::elementary_abelian(2, 13, 4096).is_err());
        assert_eq!(FiniteGroup::symmetric(4).order(), 24);
    }
}
