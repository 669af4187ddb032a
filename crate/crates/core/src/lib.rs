//! Domain-adaptation risk bounds on finite-support transfers.
//!
//! Every distribution handled here is a weighted finite support, so risks,
//! disagreements and divergences are computed exactly. The crate is organised
//! bottom-up:
//!
//! - [`datasets`]: weighted labeled supports, transfer instances, CSV IO.
//! - [`models`]: hypotheses, risks, a reverse-mode MLP gradient engine and
//!   spectral Lipschitz control.
//! - [`divergence`]: HΔH / single-hypothesis / discrepancy sups, exact and
//!   entropic Wasserstein-1, and the adaptability term λ.
//! - [`bounds`]: bound assembly and the expressivity/invariance sweep.
//! - [`transfers`]: seeded generators for the prototypical transfers.
//! - [`alignlab`]: representation alignment trainers and probes.
//! - [`metalearn`]: first-order meta-learned initializations for a fixed shift.

pub mod alignlab;
pub mod bounds;
pub mod datasets;
pub mod divergence;
pub mod error;
pub mod metalearn;
pub mod models;
pub mod rng;
pub mod transfers;

pub use error::{Error, Result};
