//! Front end for `vfree-core`: loads input documents, runs the word problem,
//! the embedding chain and the retraction constructions, and writes or
//! re-checks certificates as JSON with sorted keys.

pub mod schema;

use std::fmt;

use serde::{Deserialize, Serialize};
use vfree_core::pipeline::{embed_chain, identity_embedding, verify_embedding_cert, EmbeddingCert, Presented, Stage};
use vfree_core::retraction::{lr_certificate, verify_certificate, verify_lr, virtual_retraction, LrCert, RetractionCert};
use vfree_core::{Budgets, Error};

pub use schema::{InputDocument, Loaded};

/// Exit status: 0 success, 1 verification or construction failure,
/// 2 malformed input, 3 budget exceeded.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Failure {
    pub fn parse(e: impl fmt::Display) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            _ if e.is_budget() => 3,
            Error::BallTooLarge(_) => 3,
            Error::InvalidGroup(_)
            | Error::InvalidGraph(_)
            | Error::MalformedWord(_)
            | Error::SizeMismatch(_)
            | Error::Precondition(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(inner) => Failure { code: Failure::from(inner.clone()).code, message: format!("{e:#}") },
            None => Failure::parse(format!("{e:#}")),
        }
    }
}

/// A certificate file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "certificate", rename_all = "snake_case")]
pub enum CertFile {
    Embedding(EmbeddingCert),
    Retraction(RetractionCert),
    Lr(LrCert),
}

/// Serializes through `serde_json::Value`, whose maps keep keys sorted.
pub fn to_sorted_json<T: Serialize>(x: &T) -> String {
    let v = serde_json::to_value(x).expect("serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub prime: Option<usize>,
    pub ball_radius: Option<usize>,
    pub coset_cap: Option<usize>,
    pub series_depth_cap: Option<usize>,
}

impl Overrides {
    pub fn budgets(&self, mut b: Budgets) -> Budgets {
        if let Some(r) = self.ball_radius {
            b.ball_radius = r;
        }
        if let Some(c) = self.coset_cap {
            b.coset_cap = c;
        }
        if let Some(d) = self.series_depth_cap {
            b.series_depth_cap = d;
        }
        b
    }
}

pub fn load(text: &str) -> Result<Loaded, Failure> {
    let doc = InputDocument::parse(text).map_err(Failure::parse)?;
    Ok(doc.load()?)
}

/// Normal form of the document's word, as a JSON document.
pub fn wp(input: &Loaded) -> Result<String, Failure> {
    let w = input.word.as_ref().ok_or_else(|| Failure::parse("the document has no word"))?;
    let nf = input.group.reduce(w)?;
    let out = serde_json::json!({
        "kind": input.group.kind(),
        "normal_form": input.names.word_doc(&nf),
        "is_identity": nf.is_empty(),
    });
    Ok(to_sorted_json(&out))
}

pub fn embed(input: &Loaded, stage: Stage, o: &Overrides) -> Result<CertFile, Failure> {
    let budgets = o.budgets(input.budgets);
    let p = o.prime.unwrap_or(input.prime);
    let cert = match &input.group {
        Presented::Double(_) => identity_embedding(&input.group, budgets.ball_radius, &budgets)?,
        g => embed_chain(g, stage, p, budgets.ball_radius, &budgets)?,
    };
    Ok(CertFile::Embedding(cert))
}

pub fn retract(input: &Loaded, o: &Overrides) -> Result<CertFile, Failure> {
    let budgets = o.budgets(input.budgets);
    let p = o.prime.unwrap_or(input.prime);
    let h = input.subgroup.as_ref().ok_or_else(|| Failure::parse("the document has no subgroup"))?;
    match &input.group {
        Presented::Double(d) => {
            let gens = h.iter().map(|w| Ok(d.normal_form(&Presented::double_letters(w)?)?)).collect::<Result<Vec<_>, Error>>()?;
            Ok(CertFile::Retraction(virtual_retraction(d, &gens, &budgets)?))
        }
        g => Ok(CertFile::Lr(lr_certificate(g, h, p, &budgets)?)),
    }
}

/// Diagnoses of a certificate file; empty when it checks out.
pub fn verify(text: &str, o: &Overrides) -> Result<Vec<String>, Failure> {
    let cert: CertFile = serde_json::from_str(text).map_err(Failure::parse)?;
    let budgets = o.budgets(Budgets::default());
    Ok(match &cert {
        CertFile::Embedding(c) => verify_embedding_cert(c, &budgets),
        CertFile::Retraction(c) => verify_certificate(c, &budgets),
        CertFile::Lr(c) => verify_lr(c, &budgets),
    })
}
