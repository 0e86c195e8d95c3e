//! Post-processing of sample streams and the triple-sum density.

pub mod density3;
pub mod limit_law;
pub mod report;
pub mod stats;

pub use density3::{
    condition_star_estimate, forward_map, integrate_triple_density, jacobian, triple_density,
    ConditionStar, TripleBox, TripleIntegral, Verdict,
};
pub use limit_law::LimitLaw;
pub use report::{emit, fluctuation_report, histogram, FluctuationReport, HistogramBin, HistogramSpec};
pub use stats::{exponent_fit, ks_statistic, lln_check, rescale, rescale_values, LlnCheck, LlnTolerances};
