//! Translation-invariant splitting Gibbs measures for nearest-neighbour models
//! with spin space `[0, 1]` on the Cayley tree of order `k`.
//!
//! Such measures are in one-to-one correspondence with positive continuous
//! solutions of
//!
//! ```text
//! f(t) = ( ∫ K(t,u) f(u) du / ∫ K(0,u) f(u) du )^k
//! ```
//!
//! i.e. fixed points of the normalized operator `R_k`, which in turn map to
//! positive eigenfunctions of the Hammerstein operator
//! `(H_k f)(t) = ∫ K(t,u) f(u)^k du`. The crate provides:
//!
//! * [`kernels`]: the closed-form kernels with two positive fixed points for
//!   `k = 2`, `k = 3` and the linear family for `k >= 4`, plus tabulated kernels.
//! * [`quadrature`]: Gauss-Legendre rules on `[0, 1]`, including rules graded
//!   toward the interior kink of the fractional-root kernels.
//! * [`operators`]: `W`, `H_k`, `R_k`, Picard iteration and the
//!   eigenfunction / fixed-point correspondence.
//! * [`construction`]: the polynomial root `ξ(k;n)`, the coupling `γ(k;n)`
//!   and the analytic solutions.
//! * [`gibbs`]: a finite-ball sampler for the measure attached to a fixed
//!   point, and statistics that tell two such measures apart.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod construction;
pub mod error;
pub mod gibbs;
pub mod kernels;
pub mod operators;
pub mod quadrature;

pub use construction::{
    analytic_solution, asymptotic_diagnostics, build_family_kernel, compute_gamma, eval_p, eval_q, solve_xi,
    verify_solution, AnalyticSolution, Construction, ConstructionRecord, DiagnosticRow, SolutionKind,
};
pub use error::{Error, Result};
pub use gibbs::{marginal_stats, sample_ball, MarginalStats, MeasureHandle, SpinConfiguration, TreeBall};
pub use kernels::{odd_root, ConstantsK2, ConstantsK3, Kernel, ModelSpec, TableKernel};
pub use operators::{
    apply_h, apply_r, apply_w, eigen_to_fixed, fixed_to_eigen, iterate_r, EigenPair, FixedPointReport,
    FixedPointStatus, GridFunction, IterationOptions,
};
pub use quadrature::{build_rule, QuadratureRule, RuleKind};

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
