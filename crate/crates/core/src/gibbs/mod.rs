//! Finite-ball sampling of the translation-invariant splitting Gibbs
//! measure attached to a fixed point of `R_k`, and statistics that tell two
//! such measures apart.

mod measure;
mod sampler;
mod stats;
mod tree;

pub use measure::{HandleDiagnostics, MeasureHandle, CDF_CELLS, CDF_REFINE_TOL, MAX_CDF_CELLS, STATIONARITY_TOL};
pub use sampler::{sample_ball, sample_ball_stream, sample_map, vertex_uniform, SpinConfiguration};
pub use stats::{
    ks_critical_value, ks_statistic, ks_two_sample, marginal_stats, Correlation, Estimate, MarginalStats, Separation,
    Statistic,
};
pub use tree::{TreeBall, MAX_VERTICES};
