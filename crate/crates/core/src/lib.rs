//! Constructive embeddings of finitely generated virtually free groups into
//! doubles of finite groups, and explicit virtual retractions onto finitely
//! generated subgroups of such doubles.
//!
//! The crate is `no_std` and only needs `alloc`. Every construction produces
//! plain data that can be serialized and re-checked independently.
//!
//! Layout:
//!
//! - [`perm`]: finite groups as multiplication tables, subgroups, cosets,
//!   free actions and coset actions.
//! - [`free`]: reduced words, Stallings foldings, Schreier bases.
//! - [`gog`]: finite graphs of finite groups and their normal forms.
//! - [`hnn`]: multiple special HNN-extensions of a finite group.
//! - [`double`]: doubles `C *_B C'`, the swap involution and the Bass-Serre tree.
//! - [`pipeline`]: the chain of embeddings ending in a double.
//! - [`retraction`]: virtual retractions in doubles and the composite for
//!   virtually free inputs.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod budget;
pub mod double;
pub mod error;
pub mod free;
pub mod gog;
pub mod hnn;
pub mod perm;
pub mod pipeline;
pub mod retraction;

pub use budget::Budgets;
pub use error::{Error, Result};
