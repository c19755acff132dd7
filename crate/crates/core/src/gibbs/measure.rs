//! Densities of the splitting Gibbs measure attached to a fixed point.
//!
//! With `h = R_k h` the boundary law, the finite-volume weights are
//! `∏_edges K(σ_x, σ_y) ∏_boundary h(σ_x)`. Integrating out a leaf gives
//! `(W h)(σ_parent) ∝ h(σ_parent)^(1/k)`, hence
//!
//! ```text
//! ρ(t)     ∝ h(t)^((k+1)/k)          (root, k+1 subtrees)
//! p(u | t) ∝ K(t,u) h(u)             (parent t to child u)
//! ```
//!
//! Both are tabulated as cumulative integrals on a uniform grid. The
//! transition uses the separated form `K(t,u) = Σ_m c_m(t) b_m(u)`, so one
//! table `D_m(u) = ∫_0^u b_m h` per basis function covers every parent spin.

use std::sync::Arc;

use serde::Serialize;

use crate::construction::AnalyticSolution;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::operators::{apply_r, eigen_to_fixed, GridFunction, NEGATIVE_CLAMP};
use crate::par_map;
use crate::quadrature::{interval_rule, QuadratureRule};

/// Initial number of CDF grid cells.
pub const CDF_CELLS: usize = 4096;
/// Largest grid tried before giving up on refinement.
pub const MAX_CDF_CELLS: usize = 1 << 18;
/// Refinement stops once CDF values at shared grid points move less than this.
pub const CDF_REFINE_TOL: f64 = 1e-9;
/// Sup-norm bound of `∫ρ(t) p(u|t) dt - ρ(u)` over the rule's nodes.
pub const STATIONARITY_TOL: f64 = 1e-8;

const CELL_ORDER: usize = 16;
const CELL_GRADING: usize = 12;
/// Parent spins at which the transition CDF is compared across refinements.
const PROBE_PARENTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone)]
struct CdfTables {
    cells: usize,
    /// Unnormalized root CDF, length `cells + 1`.
    root: Vec<f64>,
    /// `D_m(u_i)` at `basis[i * rank + m]`.
    basis: Vec<f64>,
    rank: usize,
}

impl CdfTables {
    fn build(kernel: &Kernel, h: &GridFunction, k: u32, cells: usize) -> Self {
        let rank = kernel.expansion_rank();
        let exponent = (k as f64 + 1.0) / k as f64;
        let singular = kernel.singular_points();
        let masses: Vec<Vec<f64>> = par_map(cells, |i| {
            let (a, b) = (i as f64 / cells as f64, (i + 1) as f64 / cells as f64);
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            let mut edges = vec![a];
            edges.extend(singular.iter().copied().filter(|&s| s > a && s < b));
            edges.push(b);
            let near = |x: f64| singular.iter().any(|&s| (s - x).abs() < 1e-15);
            for w in edges.windows(2) {
                interval_rule(w[0], w[1], CELL_ORDER, near(w[0]), near(w[1]), CELL_GRADING, &mut nodes, &mut weights);
            }
            let mut out = vec![0.0; rank + 1];
            for (&u, &wt) in nodes.iter().zip(&weights) {
                let hu = h.value_at(u).max(0.0);
                out[0] += wt * hu.powf(exponent);
                for (m, o) in out[1..].iter_mut().enumerate() {
                    *o += wt * kernel.expansion_basis(m, u) * hu;
                }
            }
            out
        });
        let mut root = vec![0.0; cells + 1];
        let mut basis = vec![0.0; (cells + 1) * rank];
        for (i, mass) in masses.iter().enumerate() {
            root[i + 1] = root[i] + mass[0];
            for m in 0..rank {
                basis[(i + 1) * rank + m] = basis[i * rank + m] + mass[m + 1];
            }
        }
        Self { cells, root, basis, rank }
    }

    fn transition_cumulative(&self, coeffs: &[f64], i: usize) -> f64 {
        if self.rank == 2 {
            return coeffs[0] * self.basis[2 * i] + coeffs[1] * self.basis[2 * i + 1];
        }
        let row = &self.basis[i * self.rank..(i + 1) * self.rank];
        coeffs.iter().zip(row).map(|(c, d)| c * d).sum()
    }

    /// Largest change of the normalized CDFs at grid points shared with a
    /// table of twice the resolution.
    fn sup_change(&self, finer: &CdfTables, kernel: &Kernel) -> f64 {
        let mut worst = 0.0f64;
        let (z, zf) = (self.root[self.cells], finer.root[finer.cells]);
        for i in 0..=self.cells {
            worst = worst.max((self.root[i] / z - finer.root[2 * i] / zf).abs());
        }
        let mut c = vec![0.0; kernel.expansion_rank()];
        for t in PROBE_PARENTS {
            kernel.expansion_coefficients(t, &mut c);
            let z = self.transition_cumulative(&c, self.cells);
            let zf = finer.transition_cumulative(&c, finer.cells);
            for i in 0..=self.cells {
                let a = self.transition_cumulative(&c, i) / z;
                let b = finer.transition_cumulative(&c, 2 * i) / zf;
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// Inverse of a piecewise-linear CDF given by cumulative values `cum` on a
/// uniform grid of `cells` cells, at level `target ∈ [0, cum[cells]]`.
fn invert(cells: usize, target: f64, cum: impl Fn(usize) -> f64) -> f64 {
    // largest lo < cells with cum(lo) <= target, without data-dependent branches
    let (mut lo, mut size) = (0usize, cells);
    while size > 1 {
        let half = size / 2;
        let mid = lo + half;
        lo = if cum(mid) <= target { mid } else { lo };
        size -= half;
    }
    let hi = lo + 1;
    let (a, b) = (cum(lo), cum(hi));
    let frac = if b > a { ((target - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
    ((lo as f64 + frac) / cells as f64).clamp(0.0, 1.0)
}

fn interpolate_cum(cells: usize, cum: impl Fn(usize) -> f64, u: f64) -> f64 {
    let x = u.clamp(0.0, 1.0) * cells as f64;
    let i = (x.floor() as usize).min(cells - 1);
    let w = x - i as f64;
    (1.0 - w) * cum(i) + w * cum(i + 1)
}

/// Summary of the checks run when a handle is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HandleDiagnostics {
    /// Sup-norm of `R_k h - h` on the rule's nodes.
    pub fixed_point_residual: f64,
    /// Sup-norm of `∫ρ(t) p(u|t) dt - ρ(u)` on the rule's nodes.
    pub stationarity_residual: f64,
    /// Final CDF grid size.
    pub cdf_cells: usize,
    /// Last CDF sup-change between successive grid sizes.
    pub cdf_refinement_change: f64,
    /// `|∫ρ - 1|` with `∫` the quadrature rule and `ρ` normalized by the tables.
    pub normalization_error: f64,
}

/// An immutable, shareable description of one translation-invariant
/// splitting Gibbs measure: kernel, order, boundary law `h` and sampling
/// tables.
#[derive(Debug, Clone)]
pub struct MeasureHandle {
    kernel: Kernel,
    k: u32,
    rule: Arc<QuadratureRule>,
    h: GridFunction,
    tables: Arc<CdfTables>,
    diagnostics: HandleDiagnostics,
}

impl MeasureHandle {
    /// Builds a handle from a fixed point `h` of `R_k`.
    ///
    /// Fails with [`Error::NotAFixedPoint`] if `|R_k h - h| > tol` on the
    /// nodes, and with [`Error::StationarityFailure`] if the derived root
    /// and transition densities are not stationary to [`STATIONARITY_TOL`].
    pub fn new(kernel: Kernel, rule: Arc<QuadratureRule>, k: u32, h: GridFunction, tol: f64) -> Result<Self> {
        kernel.validate()?;
        if k < 1 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        for (&t, &v) in h.nodes().iter().zip(h.values()) {
            if v < -NEGATIVE_CLAMP {
                return Err(Error::NegativeValue { node: t, value: v });
            }
        }
        let rh = apply_r(&kernel, &rule, k, &h)?;
        let fixed_point_residual = rh.sup_distance(&h)?;
        if !(fixed_point_residual <= tol) {
            return Err(Error::NotAFixedPoint { residual: fixed_point_residual, tol });
        }

        let mut tables = CdfTables::build(&kernel, &h, k, CDF_CELLS);
        let mut change;
        loop {
            let finer = CdfTables::build(&kernel, &h, k, 2 * tables.cells);
            change = tables.sup_change(&finer, &kernel);
            tables = finer;
            if change < CDF_REFINE_TOL {
                break;
            }
            if tables.cells >= MAX_CDF_CELLS {
                return Err(Error::NormalizationFailure(format!(
                    "CDF still moves by {change:e} at {} cells",
                    tables.cells
                )));
            }
        }
        let total = tables.root[tables.cells];
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NormalizationFailure(format!("root normalizer {total}")));
        }
        log::debug!("cdf tables: {} cells, last change {change:e}", tables.cells);

        let mut handle = Self {
            kernel,
            k,
            rule,
            h,
            tables: Arc::new(tables),
            diagnostics: HandleDiagnostics {
                fixed_point_residual,
                stationarity_residual: f64::NAN,
                cdf_cells: 0,
                cdf_refinement_change: change,
                normalization_error: f64::NAN,
            },
        };
        handle.diagnostics.cdf_cells = handle.tables.cells;
        handle.diagnostics.normalization_error = (handle.rule.integrate(|t| handle.root_density(t))? - 1.0).abs();
        let residual = handle.stationarity_residual();
        handle.diagnostics.stationarity_residual = residual;
        if !(residual <= STATIONARITY_TOL) {
            return Err(Error::StationarityFailure { residual, tol: STATIONARITY_TOL });
        }
        Ok(handle)
    }

    /// Handle for an analytic eigenfunction `f` of `H_k` (via `h = (f/f(0))^k`).
    pub fn from_solution(
        kernel: Kernel,
        rule: Arc<QuadratureRule>,
        k: u32,
        sol: &AnalyticSolution,
        tol: f64,
    ) -> Result<Self> {
        let f = sol.to_grid(rule.clone());
        let h = eigen_to_fixed(&f, k)?;
        Self::new(kernel, rule, k, h, tol)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    /// The boundary law `h`.
    pub fn boundary_law(&self) -> &GridFunction {
        &self.h
    }

    pub fn diagnostics(&self) -> &HandleDiagnostics {
        &self.diagnostics
    }

    fn z_root(&self) -> f64 {
        self.tables.root[self.tables.cells]
    }

    fn coefficients(&self, t: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.kernel.expansion_rank()];
        self.kernel.expansion_coefficients(t, &mut c);
        c
    }

    /// `∫ K(t,u) h(u) du`
    fn z_transition(&self, coeffs: &[f64]) -> f64 {
        self.tables.transition_cumulative(coeffs, self.tables.cells)
    }

    /// `ρ(t) = h(t)^((k+1)/k) / ∫ h^((k+1)/k)`
    pub fn root_density(&self, t: f64) -> f64 {
        let exponent = (self.k as f64 + 1.0) / self.k as f64;
        self.h.value_at(t).max(0.0).powf(exponent) / self.z_root()
    }

    pub fn root_cdf(&self, u: f64) -> f64 {
        interpolate_cum(self.tables.cells, |i| self.tables.root[i], u) / self.z_root()
    }

    /// `p(u | t) = K(t,u) h(u) / ∫ K(t,v) h(v) dv`
    pub fn transition_density(&self, t: f64, u: f64) -> f64 {
        let z = self.z_transition(&self.coefficients(t));
        self.kernel.value(t, u) * self.h.value_at(u).max(0.0) / z
    }

    pub fn transition_cdf(&self, t: f64, u: f64) -> f64 {
        let c = self.coefficients(t);
        let z = self.z_transition(&c);
        interpolate_cum(self.tables.cells, |i| self.tables.transition_cumulative(&c, i), u) / z
    }

    /// Root spin for a uniform variate `v ∈ [0,1)`.
    pub fn sample_root(&self, v: f64) -> f64 {
        let target = v * self.z_root();
        invert(self.tables.cells, target, |i| self.tables.root[i])
    }

    /// Child spin given parent spin `t`, for a uniform variate `v ∈ [0,1)`.
    pub fn sample_child(&self, t: f64, v: f64, coeffs: &mut [f64]) -> f64 {
        let z = self.prepare_parent(t, coeffs);
        self.sample_prepared(coeffs, z, v)
    }

    /// Writes `c_m(t)` into `coeffs` and returns `∫ K(t,u) h(u) du`, for
    /// repeated draws with [`Self::sample_prepared`].
    pub fn prepare_parent(&self, t: f64, coeffs: &mut [f64]) -> f64 {
        self.kernel.expansion_coefficients(t, coeffs);
        self.z_transition(coeffs)
    }

    pub fn sample_prepared(&self, coeffs: &[f64], z: f64, v: f64) -> f64 {
        let tables = &self.tables;
        invert(tables.cells, v * z, |i| tables.transition_cumulative(coeffs, i))
    }

    /// `∫ g(t) ρ(t) dt` by the handle's quadrature rule.
    pub fn root_expectation<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        self.rule.integrate(|t| g(t) * self.root_density(t))
    }

    /// Sup over nodes `u` of `|∫ ρ(t) p(u|t) dt - ρ(u)|`.
    pub fn stationarity_residual(&self) -> f64 {
        let nodes = self.rule.nodes();
        let weights = self.rule.weights();
        // ρ(t)/Z(t) on the nodes
        let scaled: Vec<f64> = nodes
            .iter()
            .zip(weights)
            .map(|(&t, &w)| w * self.root_density(t) / self.z_transition(&self.coefficients(t)))
            .collect();
        let residuals = par_map(nodes.len(), |j| {
            let u = nodes[j];
            let pushed: f64 = nodes.iter().zip(&scaled).map(|(&t, &s)| s * self.kernel.value(t, u)).sum::<f64>()
                * self.h.value_at(u).max(0.0);
            (pushed - self.root_density(u)).abs()
        });
        residuals.into_iter().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{analytic_solution, SolutionKind};
    use crate::quadrature::{build_rule, RuleKind};

    fn rule() -> Arc<QuadratureRule> {
        Arc::new(build_rule(RuleKind::default()).unwrap())
    }

    fn k2_handle(kind: SolutionKind) -> MeasureHandle {
        let sol = analytic_solution(kind, None).unwrap();
        MeasureHandle::from_solution(Kernel::K2Explicit, rule(), 2, &sol, 1e-8).unwrap()
    }

    #[test]
    fn constant_law_gives_uniform_root() {
        let h = k2_handle(SolutionKind::K2F1);
        for t in [0.0, 0.3, 0.5, 1.0] {
            assert!((h.root_density(t) - 1.0).abs() < 1e-12);
            assert!((h.root_cdf(t) - t).abs() < 1e-12);
        }
        // K(1/2, ·) = 1
        for u in [0.0, 0.2, 0.9] {
            assert!((h.transition_density(0.5, u) - 1.0).abs() < 1e-12);
        }
        assert!(h.transition_density(0.0, 0.0) > h.transition_density(0.0, 1.0));
    }

    #[test]
    fn densities_are_normalized() {
        let r = rule();
        for kind in [SolutionKind::K2F1, SolutionKind::K2F2] {
            let h = k2_handle(kind);
            assert!((r.integrate(|t| h.root_density(t)).unwrap() - 1.0).abs() < 1e-10);
            assert!((h.root_cdf(1.0) - 1.0).abs() < 1e-15);
            for i in 0..=20 {
                let t = i as f64 / 20.0;
                let mass = r.integrate(|u| h.transition_density(t, u)).unwrap();
                assert!((mass - 1.0).abs() < 1e-10, "t = {t}: {mass}");
                assert!((h.transition_cdf(t, 1.0) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn k2_second_law_root_density_is_cube_of_f2() {
        let h = k2_handle(SolutionKind::K2F2);
        let f2 = analytic_solution(SolutionKind::K2F2, None).unwrap();
        let z = rule().integrate(|t| f2.eval(t).powi(3)).unwrap();
        for t in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((h.root_density(t) - f2.eval(t).powi(3) / z).abs() < 1e-10);
        }
        let mean = h.root_expectation(|t| t).unwrap();
        assert!((mean - 0.5).abs() > 0.05);
    }

    #[test]
    fn stationarity_holds_for_all_constructions() {
        let r = rule();
        for (kernel, k, kinds) in [
            (Kernel::K2Explicit, 2, [SolutionKind::K2F1, SolutionKind::K2F2]),
            (Kernel::K3Explicit, 3, [SolutionKind::K3F1, SolutionKind::K3F2]),
        ] {
            for kind in kinds {
                let sol = analytic_solution(kind, None).unwrap();
                let h = MeasureHandle::from_solution(kernel.clone(), r.clone(), k, &sol, 1e-8).unwrap();
                assert!(h.diagnostics().stationarity_residual <= STATIONARITY_TOL);
                assert!(h.diagnostics().cdf_refinement_change < CDF_REFINE_TOL);
            }
        }
    }

    #[test]
    fn inverse_cdf_round_trip() {
        let h = k2_handle(SolutionKind::K2F2);
        let mut c = vec![0.0; 2];
        for i in 1..100 {
            let v = i as f64 / 100.0;
            assert!((h.root_cdf(h.sample_root(v)) - v).abs() < 1e-12);
            for t in [0.0, 0.4, 1.0] {
                let u = h.sample_child(t, v, &mut c);
                assert!((h.transition_cdf(t, u) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_fixed_points() {
        let r = rule();
        let h = GridFunction::from_fn(r.clone(), |t| 1.0 + t);
        assert!(matches!(
            MeasureHandle::new(Kernel::K2Explicit, r.clone(), 2, h, 1e-8),
            Err(Error::NotAFixedPoint { .. })
        ));
        let neg = GridFunction::from_fn(r.clone(), |t| t - 0.5);
        assert!(matches!(MeasureHandle::new(Kernel::K2Explicit, r, 2, neg, 1e-8), Err(Error::NegativeValue { .. })));
    }
}
