//! Virtual retractions in doubles of finite groups: the `H`-invariant subtree,
//! the group `N` generated by inversions in its boundary edges, membership in
//! `NH`, and the retraction of `K = NH n G` onto `H`. Pulled back along an
//! embedding this gives virtual retractions in virtually free groups.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::budget::Budgets;
use crate::double::{AmalgamWord, Double, DoubleLetter, ExtElement, Side, TreeEdge, TreeVertex};
use crate::error::{Error, Result};
use crate::free::{schreier_kernel_basis, FreeWord, SchreierBasis, StallingsGraph};
use crate::gog::GraphOfGroups;
use crate::perm::{enumerate_cosets, CosetSpace};
use crate::pipeline::{embed_chain, identity_embedding, verify_embedding_cert, EmbeddingCert, GenLetter, Presented, Stage, Word};

/// Letters of the product of `gens` read off `w` (symbol `i` = `gens[i]`).
pub fn expand_over(d: &Double, gens: &[AmalgamWord], w: &FreeWord) -> Vec<DoubleLetter> {
    let mut out = Vec::new();
    for l in w.letters() {
        let g = gens[l.sym as usize].letters();
        if l.inv {
            out.extend(d.invert_letters(&g));
        } else {
            out.extend(g);
        }
    }
    out
}

/// Decides membership in `H = <gens>`: `rho(H)` is enumerated in `C`, the
/// kernel `H n ker rho` is taken by Schreier rewriting and folded over the
/// free basis of `ker rho`.
#[derive(Debug, Clone)]
pub struct HMembership {
    double: Double,
    gens: Vec<AmalgamWord>,
    schreier: SchreierBasis,
    coset_by_image: BTreeMap<usize, usize>,
    /// position in `schreier.basis` of each folded generator
    folded: Vec<usize>,
    graph: StallingsGraph,
}

impl HMembership {
    pub fn new(d: &Double, gens: &[AmalgamWord]) -> Self {
        let images: Vec<usize> = gens.iter().map(|h| d.retraction(h)).collect();
        let schreier = schreier_kernel_basis(gens.len(), d.group(), &images);
        let coset_by_image = schreier.coset_element.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut folded = Vec::new();
        let mut words = Vec::new();
        for (i, s) in schreier.basis.iter().enumerate() {
            let w = d.rewrite_in_kernel_basis(&expand_over(d, gens, s)).expect("Schreier generator lies in ker rho");
            if !w.is_empty() {
                folded.push(i);
                words.push(w);
            }
        }
        let graph = StallingsGraph::fold(&words);
        HMembership { double: d.clone(), gens: gens.to_vec(), schreier, coset_by_image, folded, graph }
    }

    pub fn gens(&self) -> &[AmalgamWord] {
        &self.gens
    }

    /// A word over the generators of `H` equal to `g`, if `g` lies in `H`.
    pub fn witness(&self, g: &AmalgamWord) -> Option<FreeWord> {
        let d = &self.double;
        let &c = self.coset_by_image.get(&d.retraction(g))?;
        let t = &self.schreier.transversal[c];
        let mut w = g.letters();
        w.extend(d.invert_letters(&expand_over(d, &self.gens, t)));
        let f = d.rewrite_in_kernel_basis(&w).ok()?;
        let in_graph = self.graph.member_and_rewrite(&f)?;
        let symbols: Vec<FreeWord> = self.folded.iter().map(|&i| self.schreier.basis[i].clone()).collect();
        Some(in_graph.substitute(&symbols).mul(t))
    }

    pub fn contains(&self, g: &AmalgamWord) -> bool {
        self.witness(g).is_some()
    }

    /// The element of the double named by a word over the generators of `H`.
    pub fn evaluate(&self, w: &FreeWord) -> AmalgamWord {
        self.double.normal_form(&expand_over(&self.double, &self.gens, w)).unwrap()
    }
}

pub fn membership_h(d: &Double, h_gens: &[AmalgamWord], g: &AmalgamWord) -> Option<FreeWord> {
    HMembership::new(d, h_gens).witness(g)
}

/// `U = H.Q` for the vertices `Q` on the geodesics from the base vertex `u`
/// to its translates `h_j.u`, kept up to the `H`-action, with one edge per
/// `H`-orbit of boundary edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtreeData {
    pub base: TreeVertex,
    pub core: Vec<TreeVertex>,
    pub core_edges: Vec<TreeEdge>,
    pub boundary: Vec<TreeEdge>,
}

/// A double together with `H` and its invariant subtree.
#[derive(Debug, Clone)]
pub struct SubgroupContext {
    pub double: Double,
    pub h: HMembership,
    pub subtree: SubtreeData,
}

fn rep_word(d: &Double, rep: &[DoubleLetter]) -> AmalgamWord {
    AmalgamWord { syllables: rep.to_vec(), tail: d.group().identity() }
}

/// `x` lies in `H.q` iff `r_x c r_q^-1` is in `H` for some `c` in the
/// vertex group on that side.
fn same_orbit(d: &Double, h: &HMembership, x: &TreeVertex, q: &TreeVertex) -> bool {
    if x.side != q.side {
        return false;
    }
    let back = d.invert_letters(&q.rep);
    d.group().elements().any(|c| {
        let mut w = x.rep.clone();
        w.push(DoubleLetter { side: x.side, g: c });
        w.extend_from_slice(&back);
        h.contains(&d.normal_form(&w).unwrap())
    })
}

/// `Stab_H(q)`: the elements `r_q c r_q^-1` lying in `H`.
fn stabilizer(d: &Double, h: &HMembership, q: &TreeVertex) -> Vec<ExtElement> {
    let r = rep_word(d, &q.rep);
    let r_inv = d.inverse(&r);
    d.group()
        .elements()
        .map(|c| {
            let x = d.normal_form(&[DoubleLetter { side: q.side, g: c }]).unwrap();
            d.mul(&d.mul(&r, &x), &r_inv)
        })
        .filter(|g| h.contains(g))
        .map(|g| d.ext_from(g))
        .collect()
}

pub fn invariant_subtree(d: &Double, h_gens: &[AmalgamWord]) -> SubtreeData {
    SubgroupContext::new(d, h_gens).subtree
}

impl SubgroupContext {
    pub fn new(d: &Double, h_gens: &[AmalgamWord]) -> Self {
        let h = HMembership::new(d, h_gens);
        let u = d.base_vertex(Side::Left);
        let mut paths = vec![vec![u.clone()]];
        for g in h_gens {
            let x = d.act_on_vertex(&d.ext_from(g.clone()), &u);
            paths.push(d.geodesic(&u, &x));
        }
        let mut core: Vec<TreeVertex> = Vec::new();
        let mut core_edges: Vec<TreeEdge> = Vec::new();
        for path in &paths {
            for x in path {
                if !core.iter().any(|q| same_orbit(d, &h, x, q)) {
                    core.push(x.clone());
                }
            }
            for w in path.windows(2) {
                let e = d.edge_between(&w[0], &w[1]).expect("geodesic steps are edges");
                if !core_edges.contains(&e) {
                    core_edges.push(e);
                }
            }
        }
        let in_u = |x: &TreeVertex| core.iter().any(|q| same_orbit(d, &h, x, q));
        let mut boundary = Vec::new();
        for q in &core {
            let stab = stabilizer(d, &h, q);
            let mut outside: Vec<TreeVertex> = Vec::new();
            for x in d.neighbours(q) {
                if in_u(&x) || outside.iter().any(|y| stab.iter().any(|s| d.act_on_vertex(s, y) == x)) {
                    continue;
                }
                boundary.push(d.edge_between(q, &x).expect("neighbours are adjacent"));
                outside.push(x);
            }
        }
        let subtree = SubtreeData { base: u, core, core_edges, boundary };
        SubgroupContext { double: d.clone(), h, subtree }
    }

    /// Rebuilds the context around recorded subtree data.
    pub fn with_subtree(d: &Double, h_gens: &[AmalgamWord], subtree: SubtreeData) -> Self {
        SubgroupContext { double: d.clone(), h: HMembership::new(d, h_gens), subtree }
    }

    pub fn in_u(&self, x: &TreeVertex) -> bool {
        self.subtree.core.iter().any(|q| same_orbit(&self.double, &self.h, x, q))
    }

    /// Strips boundary inversions off the left of `g` until `g.u` lies in `U`.
    pub fn nh_reduce(&self, g: &ExtElement) -> (ExtElement, Vec<TreeEdge>) {
        let d = &self.double;
        let u = &self.subtree.base;
        let mut g = g.clone();
        let mut log = Vec::new();
        loop {
            let x = d.act_on_vertex(&g, u);
            if self.in_u(&x) {
                return (g, log);
            }
            let path = d.geodesic(u, &x);
            let k = (1..path.len()).find(|&k| !self.in_u(&path[k])).expect("endpoint lies outside U");
            let e = d.edge_between(&path[k - 1], &path[k]).expect("geodesic steps are edges");
            g = d.ext_mul(&d.edge_inversion(&e), &g);
            log.push(e);
        }
    }

    /// A witness over the generators of `H` for the `H`-part of `g` when `g`
    /// lies in `NH`.
    pub fn nh_witness(&self, g: &ExtElement) -> Option<(AmalgamWord, FreeWord)> {
        let (r, _) = self.nh_reduce(g);
        if r.twist {
            return None;
        }
        let w = self.h.witness(&r.g)?;
        Some((r.g, w))
    }

    pub fn membership_nh(&self, g: &ExtElement) -> bool {
        self.nh_witness(g).is_some()
    }

    /// `rho_H(k)` with its witness over the generators of `H`.
    pub fn rho_h(&self, k: &AmalgamWord) -> Result<(AmalgamWord, FreeWord)> {
        self.nh_witness(&self.double.ext_from(k.clone())).ok_or(Error::NotInKernel)
    }
}

pub fn nh_reduce(ctx: &SubgroupContext, g: &ExtElement) -> (ExtElement, Vec<TreeEdge>) {
    ctx.nh_reduce(g)
}

pub fn membership_nh(ctx: &SubgroupContext, g: &ExtElement) -> bool {
    ctx.membership_nh(g)
}

struct KSpace<'a>(&'a SubgroupContext);

impl CosetSpace for KSpace<'_> {
    type Elem = AmalgamWord;
    fn identity(&self) -> AmalgamWord {
        self.0.double.identity()
    }
    fn mul(&self, a: &AmalgamWord, b: &AmalgamWord) -> AmalgamWord {
        self.0.double.mul(a, b)
    }
    fn inv(&self, a: &AmalgamWord) -> AmalgamWord {
        self.0.double.inverse(a)
    }
    fn in_subgroup(&self, g: &AmalgamWord) -> bool {
        self.0.membership_nh(&self.0.double.ext_from(g.clone()))
    }
}

struct NhSpace<'a>(&'a SubgroupContext);

impl CosetSpace for NhSpace<'_> {
    type Elem = ExtElement;
    fn identity(&self) -> ExtElement {
        self.0.double.ext_identity()
    }
    fn mul(&self, a: &ExtElement, b: &ExtElement) -> ExtElement {
        self.0.double.ext_mul(a, b)
    }
    fn inv(&self, a: &ExtElement) -> ExtElement {
        self.0.double.ext_inverse(a)
    }
    fn in_subgroup(&self, g: &ExtElement) -> bool {
        self.0.membership_nh(g)
    }
}

/// Non-identity elements of `C`, then of `C'`.
pub fn double_generators(d: &Double) -> Vec<DoubleLetter> {
    let c = d.group();
    [Side::Left, Side::Right]
        .into_iter()
        .flat_map(|side| c.elements().filter(move |&g| g != c.identity()).map(move |g| DoubleLetter { side, g }))
        .collect()
}

/// `reps[coset] * generators[gen] * reps[target]^-1` and its image in `H`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchreierGen {
    pub coset: usize,
    pub gen: usize,
    pub word: AmalgamWord,
    pub image: AmalgamWord,
    /// `image` as a word over the generators of `H`
    pub witness: FreeWord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetractionCert {
    pub double: Double,
    pub h_gens: Vec<AmalgamWord>,
    pub subtree: SubtreeData,
    pub generators: Vec<DoubleLetter>,
    /// right coset representatives of `K` in `G`
    pub reps: Vec<AmalgamWord>,
    pub table: Vec<Vec<usize>>,
    pub schreier: Vec<SchreierGen>,
    pub index: usize,
    /// `|G~ : NH|` by enumeration
    pub ext_index: usize,
    /// vertex orbits of `U` times `|C|`
    pub orbit_bound: usize,
    pub well_defined_by: String,
}

fn schreier_word(d: &Double, reps: &[AmalgamWord], gens: &[DoubleLetter], i: usize, j: usize, k: usize) -> AmalgamWord {
    let mut w = reps[i].letters();
    w.push(gens[j]);
    w.extend(d.invert_letters(&reps[k].letters()));
    d.normal_form(&w).unwrap()
}

pub fn virtual_retraction(d: &Double, h_gens: &[AmalgamWord], budgets: &Budgets) -> Result<RetractionCert> {
    let ctx = SubgroupContext::new(d, h_gens);
    let generators = double_generators(d);
    let gen_words: Vec<AmalgamWord> = generators.iter().map(|&l| d.normal_form(&[l]).unwrap()).collect();
    let cosets = enumerate_cosets(&KSpace(&ctx), &gen_words, budgets.coset_cap)?;
    let mut schreier = Vec::new();
    for (i, row) in cosets.table.iter().enumerate() {
        for (j, &k) in row.iter().enumerate() {
            let word = schreier_word(d, &cosets.reps, &generators, i, j, k);
            if d.is_identity(&word) {
                continue;
            }
            let (image, witness) = ctx.rho_h(&word)?;
            schreier.push(SchreierGen { coset: i, gen: j, word, image, witness });
        }
    }
    let mut ext_gens: Vec<ExtElement> = gen_words.iter().map(|g| d.ext_from(g.clone())).collect();
    ext_gens.push(d.ext_gamma());
    let ext = enumerate_cosets(&NhSpace(&ctx), &ext_gens, budgets.coset_cap)?;
    Ok(RetractionCert {
        double: d.clone(),
        h_gens: h_gens.to_vec(),
        orbit_bound: ctx.subtree.core.len() * d.group().order(),
        subtree: ctx.subtree,
        generators,
        index: cosets.reps.len(),
        reps: cosets.reps,
        table: cosets.table,
        schreier,
        ext_index: ext.index(),
        well_defined_by: "K = (N n G) x| H with N n H = 1".into(),
    })
}

impl RetractionCert {
    fn gen_index(&self, l: DoubleLetter) -> Result<Option<usize>> {
        if !self.double.group().is_element(l.g) {
            return Err(Error::MalformedWord(format!("{l:?}")));
        }
        if l.g == self.double.group().identity() {
            return Ok(None);
        }
        Ok(self.generators.iter().position(|&x| x == l))
    }

    /// Coset reached from `start` by reading `w`.
    pub fn trace(&self, start: usize, w: &[DoubleLetter]) -> Result<usize> {
        let mut c = start;
        for &l in w {
            if let Some(j) = self.gen_index(l)? {
                c = self.table[c][j];
            }
        }
        Ok(c)
    }

    /// `rho_H` of an element of `K` by Reidemeister-Schreier rewriting, with
    /// its witness over the generators of `H`.
    pub fn apply(&self, w: &[DoubleLetter]) -> Result<(AmalgamWord, FreeWord)> {
        let d = &self.double;
        let by_edge: BTreeMap<(usize, usize), &SchreierGen> =
            self.schreier.iter().map(|s| ((s.coset, s.gen), s)).collect();
        let mut c = 0;
        let mut image = d.identity();
        let mut witness = FreeWord::empty();
        for &l in w {
            let Some(j) = self.gen_index(l)? else { continue };
            if let Some(s) = by_edge.get(&(c, j)) {
                image = d.mul(&image, &s.image);
                witness = witness.mul(&s.witness);
            }
            c = self.table[c][j];
        }
        if c != 0 {
            return Err(Error::NotInKernel);
        }
        Ok((image, witness))
    }
}

/// Re-checks a retraction certificate; returns the failed checks.
pub fn verify_certificate(cert: &RetractionCert, budgets: &Budgets) -> Vec<String> {
    let mut bad = Vec::new();
    let d = &cert.double;
    let c = d.group();
    let ok = |w: &[DoubleLetter]| w.iter().all(|l| c.is_element(l.g));
    let st = &cert.subtree;
    let wellformed = cert.h_gens.iter().chain(&cert.reps).all(|h| ok(&h.letters()))
        && cert.schreier.iter().all(|s| ok(&s.word.letters()) && ok(&s.image.letters()))
        && st.core.iter().chain([&st.base]).all(|v| ok(&v.rep))
        && st.core_edges.iter().chain(&st.boundary).all(|e| ok(&e.z));
    if !wellformed {
        bad.push("certificate mentions elements outside the group".into());
        return bad;
    }
    let fresh = SubgroupContext::new(d, &cert.h_gens);
    if fresh.subtree != cert.subtree {
        bad.push("subtree data differs from the recomputed one".into());
    }
    let ctx = SubgroupContext::with_subtree(d, &cert.h_gens, cert.subtree.clone());
    if cert.generators != double_generators(d) {
        bad.push("generator list differs".into());
        return bad;
    }
    let n = cert.reps.len();
    let shape_ok = n > 0
        && cert.table.len() == n
        && cert.table.iter().all(|row| row.len() == cert.generators.len() && row.iter().all(|&k| k < n))
        && d.is_identity(&cert.reps[0]);
    if !shape_ok {
        bad.push("coset table is not closed".into());
        return bad;
    }
    if cert.index != n {
        bad.push(format!("index {} but {n} cosets", cert.index));
    }
    let space = KSpace(&ctx);
    for i in 0..n {
        for k in i + 1..n {
            if space.same_coset(&cert.reps[i], &cert.reps[k]) {
                bad.push(format!("cosets {i} and {k} coincide"));
            }
        }
    }
    let by_edge: BTreeMap<(usize, usize), &SchreierGen> = cert.schreier.iter().map(|s| ((s.coset, s.gen), s)).collect();
    if by_edge.len() != cert.schreier.len() {
        bad.push("repeated Schreier generator".into());
    }
    let mut expected = 0;
    for (i, row) in cert.table.iter().enumerate() {
        for (j, &k) in row.iter().enumerate() {
            let word = schreier_word(d, &cert.reps, &cert.generators, i, j, k);
            if !ctx.membership_nh(&d.ext_from(word.clone())) {
                bad.push(format!("table entry ({i}, {j}) leaves K"));
                continue;
            }
            let Some(s) = by_edge.get(&(i, j)) else {
                if !d.is_identity(&word) {
                    bad.push(format!("Schreier generator ({i}, {j}) missing"));
                }
                continue;
            };
            expected += 1;
            if s.word != word {
                bad.push(format!("Schreier generator ({i}, {j}) has the wrong word"));
            }
            if s.witness.max_symbol().is_some_and(|m| m >= cert.h_gens.len()) || ctx.h.evaluate(&s.witness) != s.image {
                bad.push(format!("image of Schreier generator ({i}, {j}) does not match its witness"));
                continue;
            }
            let rest = d.mul(&word, &d.inverse(&s.image));
            let (r, _) = ctx.nh_reduce(&d.ext_from(rest));
            if r != d.ext_identity() {
                bad.push(format!("Schreier generator ({i}, {j}) is not its image modulo N"));
            }
        }
    }
    if expected != cert.schreier.len() {
        bad.push("Schreier generators recorded for trivial table entries".into());
    }
    for (j, h) in cert.h_gens.iter().enumerate() {
        match cert.apply(&h.letters()) {
            Ok((img, _)) if img == *h => {}
            _ => bad.push(format!("rho_H moves H generator {j}")),
        }
    }
    if cert.orbit_bound != cert.subtree.core.len() * c.order() {
        bad.push("orbit bound is not |Q| |C|".into());
    }
    let mut ext_gens: Vec<ExtElement> =
        cert.generators.iter().map(|&l| d.ext_from(d.normal_form(&[l]).unwrap())).collect();
    ext_gens.push(d.ext_gamma());
    match enumerate_cosets(&NhSpace(&ctx), &ext_gens, budgets.coset_cap) {
        Ok(t) if t.index() == cert.ext_index => {}
        Ok(t) => bad.push(format!("|G~:NH| is {}, certificate says {}", t.index(), cert.ext_index)),
        Err(e) => bad.push(format!("|G~:NH| enumeration: {e}")),
    }
    if cert.ext_index > cert.orbit_bound {
        bad.push(format!("|G~:NH| = {} exceeds the bound {}", cert.ext_index, cert.orbit_bound));
    }
    bad
}

/// A Schreier generator of the pulled-back subgroup and its image in `H`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LrGen {
    pub coset: usize,
    pub gen: usize,
    pub word: Word,
    pub image: Word,
    pub witness: FreeWord,
}

/// A finite-index subgroup of the source retracting onto `<h_gens>`: the
/// preimage under the embedding of the subgroup `K` of the double.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrCert {
    pub embedding: EmbeddingCert,
    pub retraction: RetractionCert,
    pub h_gens: Vec<Word>,
    pub generators: Word,
    /// coset of `K` in the double reached by each coset representative
    pub cosets: Vec<usize>,
    pub reps: Vec<Word>,
    pub table: Vec<Vec<usize>>,
    pub schreier: Vec<LrGen>,
    pub index: usize,
}

fn to_double_letters(w: &[GenLetter]) -> Result<Vec<DoubleLetter>> {
    w.iter()
        .map(|l| match *l {
            GenLetter::Side { side, g } => Ok(DoubleLetter { side, g }),
            other => Err(Error::MalformedWord(format!("{other:?} is not a letter of a double"))),
        })
        .collect()
}

fn psi(cert: &EmbeddingCert, w: &[GenLetter]) -> Result<Vec<DoubleLetter>> {
    to_double_letters(&cert.images.apply(&cert.source, &cert.target, w)?)
}

fn evaluate_over(src: &Presented, gens: &[Word], w: &FreeWord) -> Result<Word> {
    let mut out = Vec::new();
    for l in w.letters() {
        let g = gens.get(l.sym as usize).ok_or_else(|| Error::MalformedWord(format!("symbol {}", l.sym)))?;
        if l.inv {
            out.extend(src.inverse(g));
        } else {
            out.extend_from_slice(g);
        }
    }
    src.reduce(&out)
}

fn lr_schreier_word(src: &Presented, reps: &[Word], gens: &[GenLetter], i: usize, j: usize, k: usize) -> Result<Word> {
    let mut w = reps[i].clone();
    w.push(gens[j]);
    w.extend(src.inverse(&reps[k]));
    src.reduce(&w)
}

pub fn lr_for_vfree(g: &GraphOfGroups, h_gens: &[Word], p: usize, budgets: &Budgets) -> Result<LrCert> {
    lr_certificate(&Presented::GraphOfGroups(g.clone()), h_gens, p, budgets)
}

/// Embeds `source` in a double (a double is its own target), retracts there,
/// and pulls the result back.
pub fn lr_certificate(source: &Presented, h_gens: &[Word], p: usize, budgets: &Budgets) -> Result<LrCert> {
    let embedding = match source {
        Presented::Double(_) => identity_embedding(source, budgets.ball_radius, budgets)?,
        _ => embed_chain(source, Stage::Double, p, budgets.ball_radius, budgets)?,
    };
    let Presented::Double(d) = &embedding.target else {
        return Err(Error::Precondition("embedding does not end in a double".into()));
    };
    let h_images: Vec<AmalgamWord> =
        h_gens.iter().map(|h| d.normal_form(&psi(&embedding, h)?)).collect::<Result<_>>()?;
    let retraction = virtual_retraction(d, &h_images, budgets)?;
    let generators = source.generators();
    let moves: Vec<Vec<DoubleLetter>> = generators.iter().map(|&l| psi(&embedding, &[l])).collect::<Result<_>>()?;
    let mut cosets = vec![0usize];
    let mut reps: Vec<Word> = vec![Vec::new()];
    let mut table = Vec::new();
    let mut i = 0;
    while i < cosets.len() {
        let mut row = Vec::with_capacity(generators.len());
        for (j, m) in moves.iter().enumerate() {
            let target = retraction.trace(cosets[i], m)?;
            let k = match cosets.iter().position(|&c| c == target) {
                Some(k) => k,
                None => {
                    if cosets.len() >= budgets.coset_cap {
                        return Err(Error::budget("coset count", budgets.coset_cap));
                    }
                    cosets.push(target);
                    let mut w = reps[i].clone();
                    w.push(generators[j]);
                    reps.push(source.reduce(&w)?);
                    cosets.len() - 1
                }
            };
            row.push(k);
        }
        table.push(row);
        i += 1;
    }
    let mut schreier = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, &k) in row.iter().enumerate() {
            let word = lr_schreier_word(source, &reps, &generators, i, j, k)?;
            if word.is_empty() {
                continue;
            }
            let (_, witness) = retraction.apply(&psi(&embedding, &word)?)?;
            let image = evaluate_over(source, h_gens, &witness)?;
            schreier.push(LrGen { coset: i, gen: j, word, image, witness });
        }
    }
    Ok(LrCert {
        embedding,
        retraction,
        h_gens: h_gens.to_vec(),
        generators,
        index: cosets.len(),
        cosets,
        reps,
        table,
        schreier,
    })
}

impl LrCert {
    /// The retraction on an element of the finite-index subgroup.
    pub fn apply(&self, w: &[GenLetter]) -> Result<Word> {
        let src = &self.embedding.source;
        let by_edge: BTreeMap<(usize, usize), &LrGen> = self.schreier.iter().map(|s| ((s.coset, s.gen), s)).collect();
        let mut c = 0;
        let mut out = Vec::new();
        for &l in w {
            if src.is_trivial_letter(l) {
                continue;
            }
            let j = self
                .generators
                .iter()
                .position(|&x| x == l)
                .ok_or_else(|| Error::MalformedWord(format!("{l:?}")))?;
            if let Some(s) = by_edge.get(&(c, j)) {
                out.extend_from_slice(&s.image);
            }
            c = self.table[c][j];
        }
        if c != 0 {
            return Err(Error::NotInKernel);
        }
        src.reduce(&out)
    }
}

/// Re-checks an LR certificate, including the embedding and the retraction
/// in the double; returns the failed checks.
pub fn verify_lr(cert: &LrCert, budgets: &Budgets) -> Vec<String> {
    let mut bad: Vec<String> = verify_embedding_cert(&cert.embedding, budgets)
        .into_iter()
        .map(|s| format!("embedding: {s}"))
        .collect();
    bad.extend(verify_certificate(&cert.retraction, budgets).into_iter().map(|s| format!("retraction: {s}")));
    if !bad.is_empty() {
        return bad;
    }
    let src = &cert.embedding.source;
    let rc = &cert.retraction;
    if cert.embedding.target != Presented::Double(rc.double.clone()) {
        bad.push("retraction lives in a different double".into());
        return bad;
    }
    let h_images: Result<Vec<AmalgamWord>> =
        cert.h_gens.iter().map(|h| rc.double.normal_form(&psi(&cert.embedding, h)?)).collect();
    match h_images {
        Ok(h) if h == rc.h_gens => {}
        _ => bad.push("H generators do not map to the generators used in the double".into()),
    }
    if cert.generators != src.generators() {
        bad.push("generator list differs".into());
        return bad;
    }
    let n = cert.reps.len();
    let shape_ok = n > 0
        && cert.cosets.len() == n
        && cert.cosets[0] == 0
        && cert.cosets.iter().all(|&c| c < rc.reps.len())
        && cert.table.len() == n
        && cert.table.iter().all(|row| row.len() == cert.generators.len() && row.iter().all(|&k| k < n));
    if !shape_ok {
        bad.push("coset table is not closed".into());
        return bad;
    }
    if cert.index != n {
        bad.push(format!("index {} but {n} cosets", cert.index));
    }
    let mut seen = cert.cosets.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != n {
        bad.push("two cosets reach the same coset of the double".into());
    }
    for (i, r) in cert.reps.iter().enumerate() {
        match psi(&cert.embedding, r).and_then(|w| rc.trace(0, &w)) {
            Ok(c) if c == cert.cosets[i] => {}
            _ => bad.push(format!("representative {i} does not reach its coset")),
        }
    }
    let by_edge: BTreeMap<(usize, usize), &LrGen> = cert.schreier.iter().map(|s| ((s.coset, s.gen), s)).collect();
    let mut expected = 0;
    for (i, row) in cert.table.iter().enumerate() {
        for (j, &k) in row.iter().enumerate() {
            let moved = psi(&cert.embedding, &[cert.generators[j]]).and_then(|m| rc.trace(cert.cosets[i], &m));
            if moved.ok() != Some(cert.cosets[k]) {
                bad.push(format!("table entry ({i}, {j}) is wrong"));
                continue;
            }
            let Ok(word) = lr_schreier_word(src, &cert.reps, &cert.generators, i, j, k) else {
                bad.push(format!("representatives around ({i}, {j}) are malformed"));
                continue;
            };
            let Some(s) = by_edge.get(&(i, j)) else {
                if !word.is_empty() {
                    bad.push(format!("Schreier generator ({i}, {j}) missing"));
                }
                continue;
            };
            expected += 1;
            if s.word != word {
                bad.push(format!("Schreier generator ({i}, {j}) has the wrong word"));
            }
            if evaluate_over(src, &cert.h_gens, &s.witness).ok().as_ref() != Some(&s.image) {
                bad.push(format!("image of Schreier generator ({i}, {j}) does not match its witness"));
                continue;
            }
            let in_double = psi(&cert.embedding, &word).and_then(|w| rc.apply(&w));
            let image_in_double = psi(&cert.embedding, &s.image).and_then(|w| rc.double.normal_form(&w));
            match (in_double, image_in_double) {
                (Ok((a, _)), Ok(b)) if a == b => {}
                _ => bad.push(format!("image of Schreier generator ({i}, {j}) disagrees with the double")),
            }
        }
    }
    if expected != cert.schreier.len() || by_edge.len() != cert.schreier.len() {
        bad.push("Schreier generators recorded for trivial or repeated table entries".into());
    }
    for (j, h) in cert.h_gens.iter().enumerate() {
        match (cert.apply(h), src.reduce(h)) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => bad.push(format!("retraction moves H generator {j}")),
        }
    }
    bad
}
