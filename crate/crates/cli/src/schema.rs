//! The input document: named groups, one presented group (graph of groups,
//! double or HNN extension), subgroup generators, a word, and budgets.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use vfree_core::double::{Double, Side};
use vfree_core::gog::{Edge, GraphOfGroups, Vertex};
use vfree_core::hnn::MultiHnn;
use vfree_core::perm::{FiniteGroup, FiniteHom, Perm, Subgroup};
use vfree_core::pipeline::{GenLetter, Presented, Word};
use vfree_core::Budgets;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<usize>,
    /// Cayley table; element 0 need not be the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<usize>>>,
    /// Permutations on `0..degree`; elements are numbered in the order the
    /// closure discovers them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<PermDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermDef {
    pub degree: usize,
    pub generators: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDef {
    pub name: String,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDef {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub group: String,
    pub src_map: Vec<usize>,
    pub dst_map: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDef {
    pub vertices: Vec<VertexDef>,
    pub edges: Vec<EdgeDef>,
    #[serde(default)]
    pub spanning_tree: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleDef {
    pub group: String,
    pub subgroup: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LetterDef {
    pub name: String,
    pub subgroup: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HnnDef {
    pub base: String,
    pub letters: Vec<LetterDef>,
}

/// A letter as written in documents: `{"v": vertex, "g": element}`,
/// `{"t": edge or letter, "e": +-1}`, `{"a": element}` or
/// `{"side": "left"|"right", "g": element}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum LetterDoc {
    Vertex { v: String, g: usize },
    Stable { t: String, #[serde(default = "one")] e: i8 },
    Base { a: usize },
    Side { side: Side, g: usize },
}

fn one() -> i8 {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_order_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coset_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_depth_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pingpong_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_radius: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    pub groups: BTreeMap<String, GroupDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_of_groups: Option<GraphDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub double: Option<DoubleDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hnn: Option<HnnDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup: Option<Vec<Vec<LetterDoc>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<Vec<LetterDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<BudgetDef>,
}

impl GroupDef {
    pub fn build(&self, order_cap: usize) -> Result<FiniteGroup> {
        let given = [self.cyclic.is_some(), self.symmetric.is_some(), self.table.is_some(), self.permutations.is_some()];
        if given.iter().filter(|&&x| x).count() != 1 {
            bail!("give exactly one of cyclic, symmetric, table, permutations");
        }
        if let Some(n) = self.cyclic {
            if n == 0 {
                bail!("cyclic group of order 0");
            }
            return Ok(FiniteGroup::cyclic(n));
        }
        if let Some(n) = self.symmetric {
            if n == 0 || n > 6 {
                bail!("symmetric degree must be 1..=6");
            }
            return Ok(FiniteGroup::symmetric(n));
        }
        if let Some(t) = &self.table {
            return Ok(FiniteGroup::from_table(t.clone())?);
        }
        let p = self.permutations.as_ref().unwrap();
        let perms = p.generators.iter().map(|g| Perm::from_images(g.clone())).collect::<Result<Vec<_>, _>>()?;
        if perms.iter().any(|x| x.degree() != p.degree) {
            bail!("permutation of the wrong degree");
        }
        Ok(FiniteGroup::from_permutations(p.degree, &perms, order_cap)?.group)
    }
}

impl BudgetDef {
    pub fn apply(&self, b: &mut Budgets) {
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut b.group_order_cap, self.group_order_cap);
        set(&mut b.coset_cap, self.coset_cap);
        set(&mut b.series_depth_cap, self.series_depth_cap);
        set(&mut b.pingpong_cap, self.pingpong_cap);
        set(&mut b.ball_cap, self.ball_cap);
        set(&mut b.ball_radius, self.ball_radius);
    }
}

/// Names of vertices and of stable letters (edges or HNN letters).
#[derive(Debug, Clone, Default)]
pub struct Names {
    pub vertices: Vec<String>,
    pub stable: Vec<String>,
}

impl Names {
    fn index(list: &[String], name: &str, what: &str) -> Result<usize> {
        list.iter().position(|x| x == name).ok_or_else(|| anyhow!("unknown {what} {name:?}"))
    }

    pub fn letter(&self, l: &LetterDoc) -> Result<GenLetter> {
        Ok(match l {
            LetterDoc::Vertex { v, g } => GenLetter::Vertex { v: Self::index(&self.vertices, v, "vertex")?, g: *g },
            LetterDoc::Stable { t, e } => {
                if e.abs() != 1 {
                    bail!("stable letter exponent must be 1 or -1");
                }
                GenLetter::Stable { t: Self::index(&self.stable, t, "stable letter")?, e: *e }
            }
            LetterDoc::Base { a } => GenLetter::Base { a: *a },
            LetterDoc::Side { side, g } => GenLetter::Side { side: *side, g: *g },
        })
    }

    pub fn word(&self, w: &[LetterDoc]) -> Result<Word> {
        w.iter().map(|l| self.letter(l)).collect()
    }

    pub fn letter_doc(&self, l: GenLetter) -> LetterDoc {
        match l {
            GenLetter::Vertex { v, g } => LetterDoc::Vertex { v: self.vertices[v].clone(), g },
            GenLetter::Stable { t, e } => LetterDoc::Stable { t: self.stable[t].clone(), e },
            GenLetter::Base { a } => LetterDoc::Base { a },
            GenLetter::Side { side, g } => LetterDoc::Side { side, g },
        }
    }

    pub fn word_doc(&self, w: &[GenLetter]) -> Vec<LetterDoc> {
        w.iter().map(|&l| self.letter_doc(l)).collect()
    }
}

/// A validated document.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub group: Presented,
    pub names: Names,
    pub subgroup: Option<Vec<Word>>,
    pub word: Option<Word>,
    pub prime: usize,
    pub budgets: Budgets,
}

impl InputDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(&self) -> Result<Loaded> {
        let mut budgets = Budgets::default();
        if let Some(b) = &self.budgets {
            b.apply(&mut budgets);
        }
        let mut groups = BTreeMap::new();
        for (name, def) in &self.groups {
            groups.insert(name.clone(), def.build(budgets.group_order_cap).with_context(|| format!("group {name:?}"))?);
        }
        let group_named = |n: &str| groups.get(n).cloned().ok_or_else(|| anyhow!("unknown group {n:?}"));
        let given = [self.graph_of_groups.is_some(), self.double.is_some(), self.hnn.is_some()];
        if given.iter().filter(|&&x| x).count() != 1 {
            bail!("give exactly one of graph_of_groups, double, hnn");
        }
        let mut names = Names::default();
        let group = if let Some(g) = &self.graph_of_groups {
            names.vertices = g.vertices.iter().map(|v| v.name.clone()).collect();
            names.stable = g.edges.iter().map(|e| e.name.clone()).collect();
            let vertices = g
                .vertices
                .iter()
                .map(|v| Ok(Vertex { name: v.name.clone(), group: group_named(&v.group)? }))
                .collect::<Result<Vec<_>>>()?;
            let mut edges = Vec::new();
            for e in &g.edges {
                let (src, dst) = (Names::index(&names.vertices, &e.src, "vertex")?, Names::index(&names.vertices, &e.dst, "vertex")?);
                let eg = group_named(&e.group)?;
                let src_map = FiniteHom::new(&eg, &vertices[src].group, e.src_map.clone())
                    .with_context(|| format!("source map of edge {:?}", e.name))?;
                let dst_map = FiniteHom::new(&eg, &vertices[dst].group, e.dst_map.clone())
                    .with_context(|| format!("target map of edge {:?}", e.name))?;
                edges.push(Edge { name: e.name.clone(), src, dst, group: eg, src_map, dst_map });
            }
            let tree =
                g.spanning_tree.iter().map(|t| Names::index(&names.stable, t, "edge")).collect::<Result<Vec<_>>>()?;
            Presented::GraphOfGroups(GraphOfGroups::new(vertices, edges, &tree)?)
        } else if let Some(d) = &self.double {
            let c = group_named(&d.group)?;
            let b = Subgroup::from_elements(&c, d.subgroup.clone())?;
            Presented::Double(Double::new(c, b)?)
        } else {
            let h = self.hnn.as_ref().unwrap();
            let base = group_named(&h.base)?;
            names.stable = h.letters.iter().map(|l| l.name.clone()).collect();
            let letters = h
                .letters
                .iter()
                .map(|l| Ok((l.name.clone(), Subgroup::from_elements(&base, l.subgroup.clone())?)))
                .collect::<Result<Vec<_>>>()?;
            Presented::Hnn(MultiHnn::new(base, letters)?)
        };
        let checked = |w: &[LetterDoc]| -> Result<Word> {
            let w = names.word(w)?;
            group.normal_form(&w)?;
            Ok(w)
        };
        let subgroup = match &self.subgroup {
            Some(ws) => Some(ws.iter().map(|w| checked(w)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        let word = match &self.word {
            Some(w) => Some(checked(w)?),
            None => None,
        };
        let prime = self.prime.unwrap_or(2);
        Ok(Loaded { group, names, subgroup, word, prime, budgets })
    }
}
