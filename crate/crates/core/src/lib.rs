//! Numerics for a mean-field model whose fluctuations are governed by a sixth-order
//! limit law: reference measures, the self-interaction, the Cramer transform of
//! `(Z, Z^2, Z^4)`, a Metropolis-within-Gibbs sampler and post-processing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cramer;
pub mod error;
pub mod finite_diff;
pub mod interaction;
pub mod measures;
pub mod quadrature;
pub mod sampler;

pub use analysis::{FluctuationReport, LimitLaw};
pub use cramer::{CramerPoint, DualPoint, ExpansionReport};
pub use error::{Error, Result};
pub use interaction::{Interaction, TriplePoint};
pub use measures::{LogDensity, Measure, MeasureSpec, MomentSet, SupportClass};
pub use sampler::{ChainPlan, ChainState, SampleRecord, SummaryTriple};
