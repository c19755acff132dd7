//! Explicit kernels with two positive fixed points.
//!
//! For `k = 2` and `k = 3` the kernels and the non-constant solutions are
//! closed-form. For general `k` the kernel is `1 + γ (t-1/2)(u-1/2)` where
//! `γ = C_n(k)` is built from a root `ξ(k;n) ∈ (0,1)` of
//!
//! ```text
//! P_n(x) = (1 + x^(n-1)/2)^(k+1) - (1 - x^(n-1)/2)^(k+1),   Q_n(x) = (k+1) x^(n-k),
//! ```
//!
//! and the second solution is `f₁(t) = ξ + ξ^n (t - 1/2)`.
//!
//! Writing `α = ξ^(n-1)`, `P_n = 2 Σ_{r odd} C(k+1,r) (α/2)^r` has no
//! cancellation, and `P_n = Q_n` is equivalent (for `x > 0`) to
//! `x^(k-1) S(α) = k+1` with `S(α) = P_n / α`; the sign scan and bisection
//! work with the logarithm of that reduced form, so nothing underflows for
//! large `n` or overflows for large `k`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{odd_root, ConstantsK2, ConstantsK3, Kernel};
use crate::operators::{apply_h, FixedPointReport, FixedPointStatus, GridFunction};
use crate::par_map;
use crate::quadrature::QuadratureRule;

/// Grid size of the sign-change scan on `(0,1]`.
pub const SCAN_POINTS: usize = 10_000;

/// Default residual tolerance for `|P_n(ξ) - Q_n(ξ)|`.
pub const ROOT_TOL: f64 = 1e-12;

/// Estimated relative error above which the direct coupling formula is
/// abandoned for the expanded series.
const DIRECT_FORM_MAX_ERROR: f64 = 1e-10;

/// Above this size binomials are evaluated in log-space.
const EXACT_BINOMIAL_MAX: usize = 120;

fn check_order(k: usize, n: usize) -> Result<()> {
    if k < 2 || n <= k {
        return Err(Error::InvalidOrder { k, n });
    }
    Ok(())
}

/// Exact `C(m, r)` as an integer, `None` on overflow.
fn binomial_exact(m: usize, r: usize) -> Option<u128> {
    if r > m {
        return Some(0);
    }
    let r = r.min(m - r);
    let mut c: u128 = 1;
    for i in 1..=r as u128 {
        // c·(m-r+i) is divisible by i at every step
        c = c.checked_mul(m as u128 - r as u128 + i)? / i;
    }
    Some(c)
}

fn ln_binomial(m: usize, r: usize) -> f64 {
    let r = r.min(m - r);
    (1..=r).map(|i| ((m - r + i) as f64 / i as f64).ln()).sum()
}

/// `ln( C(m,r) (α/2)^r )`
fn ln_binomial_term(m: usize, r: usize, alpha: f64) -> f64 {
    let ln_c = match binomial_exact(m, r) {
        Some(c) if m <= EXACT_BINOMIAL_MAX => (c as f64).ln(),
        _ => ln_binomial(m, r),
    };
    ln_c + r as f64 * (0.5 * alpha).ln()
}

/// `(1 + α/2)^m - (1 - α/2)^m` as the odd binomial series.
fn odd_difference(m: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    if m <= EXACT_BINOMIAL_MAX {
        let half = 0.5 * alpha;
        (0..m.div_ceil(2))
            .rev()
            .map(|i| 2 * i + 1)
            .map(|r| 2.0 * binomial_exact(m, r).unwrap() as f64 * half.powi(r as i32))
            .sum()
    } else {
        (0..m.div_ceil(2)).rev().map(|i| 2 * i + 1).map(|r| 2.0 * ln_binomial_term(m, r, alpha).exp()).sum()
    }
}

/// `ln( ((1 + α/2)^m - (1 - α/2)^m) / α )` via log-sum-exp.
fn ln_odd_difference_over_alpha(m: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        // limit: 2 C(m,1)/2
        return (m as f64).ln();
    }
    let terms: Vec<f64> =
        (1..=m).step_by(2).map(|r| std::f64::consts::LN_2 + ln_binomial_term(m, r, alpha) - alpha.ln()).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `P_n(x) = (1 + x^(n-1)/2)^(k+1) - (1 - x^(n-1)/2)^(k+1)`.
pub fn eval_p(k: usize, n: usize, x: f64) -> Result<f64> {
    check_order(k, n)?;
    Ok(odd_difference(k + 1, x.powi(n as i32 - 1)))
}

/// `Q_n(x) = (k+1) x^(n-k)`.
pub fn eval_q(k: usize, n: usize, x: f64) -> Result<f64> {
    check_order(k, n)?;
    Ok((k + 1) as f64 * x.powi((n - k) as i32))
}

/// `P_n` by direct expansion of the two powers, for cross-checks.
pub fn eval_p_direct(k: usize, n: usize, x: f64) -> Result<f64> {
    check_order(k, n)?;
    let a = x.powi(n as i32 - 1);
    Ok((1.0 + 0.5 * a).powi(k as i32 + 1) - (1.0 - 0.5 * a).powi(k as i32 + 1))
}

/// Exact check of `P_n(1) > Q_n(1)`, i.e. `3^(k+1) - 1 > (k+1) 2^(k+1)`.
pub fn p_exceeds_q_at_one(k: usize) -> bool {
    let lhs = 3u128.pow(k as u32 + 1) - 1;
    let rhs = (k as u128 + 1) * 2u128.pow(k as u32 + 1);
    lhs > rhs
}

/// `(1 + x/2)^(k+1) - (1 - x/2)^(k+1) - (k+1) x`, which has the single
/// nonnegative zero `x = 0`.
pub fn uniqueness_phi(k: usize, x: f64) -> f64 {
    (1.0 + 0.5 * x).powi(k as i32 + 1) - (1.0 - 0.5 * x).powi(k as i32 + 1) - (k + 1) as f64 * x
}

/// Derivative of [`uniqueness_phi`].
pub fn uniqueness_phi_prime(k: usize, x: f64) -> f64 {
    (k + 1) as f64 * (0.5 * (1.0 + 0.5 * x).powi(k as i32) + 0.5 * (1.0 - 0.5 * x).powi(k as i32) - 1.0)
}

/// Sign-equivalent, log-scaled form of `P_n(x) - Q_n(x)` for `x > 0`.
fn reduced(k: usize, n: usize, x: f64) -> f64 {
    let alpha = x.powi(n as i32 - 1);
    (k - 1) as f64 * x.ln() + ln_odd_difference_over_alpha(k + 1, alpha) - ((k + 1) as f64).ln()
}

/// Root of `P_n - Q_n` on `(0,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiRoot {
    pub k: usize,
    pub n: usize,
    pub xi: f64,
    /// The bisected bracket (the rightmost sign change on the scan grid).
    pub bracket: (f64, f64),
    /// Every sign-change bracket found by the scan.
    pub brackets: Vec<(f64, f64)>,
    /// `|P_n(ξ) - Q_n(ξ)|`
    pub residual: f64,
}

/// Finds `ξ(k;n)`: scans `SCAN_POINTS` uniform points of `(0,1]` for sign
/// changes of `P_n - Q_n` and bisects the rightmost bracket to machine
/// precision.
pub fn solve_xi(k: usize, n: usize, tol: f64) -> Result<XiRoot> {
    check_order(k, n)?;
    let xs: Vec<f64> = (1..=SCAN_POINTS).map(|i| i as f64 / SCAN_POINTS as f64).collect();
    let signs: Vec<f64> = xs.iter().map(|&x| reduced(k, n, x)).collect();

    let mut brackets = Vec::new();
    for i in 0..xs.len() - 1 {
        let (a, b) = (signs[i], signs[i + 1]);
        if a == 0.0 {
            brackets.push((xs[i], xs[i]));
        } else if a.signum() != b.signum() && b != 0.0 {
            brackets.push((xs[i], xs[i + 1]));
        }
    }
    if signs[xs.len() - 1] == 0.0 {
        brackets.push((1.0, 1.0));
    }
    let &bracket = brackets.last().ok_or(Error::NoBracket { k, n })?;

    let (mut lo, mut hi) = bracket;
    let rising = reduced(k, n, hi) > reduced(k, n, lo);
    while hi - lo > 2.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = reduced(k, n, mid);
        if s == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (s > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let residual_at = |x: f64| (eval_p(k, n, x).unwrap() - eval_q(k, n, x).unwrap()).abs();
    let xi = if residual_at(lo) <= residual_at(hi) { lo } else { hi };
    let residual = residual_at(xi);
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::NoBracket { k, n });
    }
    if !(residual <= tol) {
        return Err(Error::RootNotConverged { k, n, residual, tol });
    }
    Ok(XiRoot { k, n, xi, bracket, brackets, residual })
}

/// Which formula produced the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaForm {
    Direct,
    Expanded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaValue {
    pub gamma: f64,
    pub form: GammaForm,
    /// `ξ^(3n-k-2) / ( D_{k+2}/(k+2) - ξ^(n-k) )` when it kept precision.
    pub direct: Option<f64>,
    /// `β^(1-k) / (k/12 + a₃ α² + a₄ α⁴ + …)`
    pub expanded: f64,
}

/// Series coefficient `a_j` multiplying `α^(2j-1)` in
/// `D_{k+2}(α)/(k+2) - D_{k+1}(α)/(k+1)`, for `j >= 2`.
pub fn series_coefficient(k: usize, j: usize) -> f64 {
    let r = 2 * j - 1;
    let scale = 2f64.powi(2 - 2 * j as i32);
    let (m1, m2) = ((k + 2) as u128, (k + 1) as u128);
    match (binomial_exact(k + 2, r), binomial_exact(k + 1, r)) {
        (Some(c1), Some(c2)) if k + 2 <= EXACT_BINOMIAL_MAX => {
            // C(k+2,r)(k+1) - C(k+1,r)(k+2) over (k+1)(k+2), exact numerator
            let num = c1 * m2 - c2 * m1;
            scale * num as f64 / (m1 * m2) as f64
        }
        _ => {
            // C(k+2,r)/(k+2) - C(k+1,r)/(k+1) = C(k+1,r)(r-1) / ((k+1)(k+2-r))
            if r == k + 2 {
                scale / (k + 2) as f64
            } else if r > k + 2 {
                0.0
            } else {
                scale
                    * (ln_binomial(k + 1, r) + ((r - 1) as f64).ln()
                        - ((k + 1) as f64).ln()
                        - ((k + 2 - r) as f64).ln())
                    .exp()
            }
        }
    }
}

/// `k/12 + a₃ α² + a₄ α⁴ + …`
fn expanded_denominator(k: usize, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let last = (k + 3) / 2;
    let mut acc = 0.0;
    for j in (2..=last).rev() {
        acc = acc * a2 + series_coefficient(k, j);
    }
    acc
}

/// The coupling `γ = C_n(k)` at a solved root.
pub fn compute_gamma(root: &XiRoot) -> Result<GammaValue> {
    let (k, n, xi) = (root.k, root.n, root.xi);
    let alpha = xi.powi(n as i32 - 1);

    let denom = expanded_denominator(k, alpha);
    let expanded = xi.powi(1 - k as i32) / denom;

    let half = 0.5 * alpha;
    let big = (1.0 + half).powi(k as i32 + 2) / (k + 2) as f64;
    let d = odd_difference(k + 2, alpha) / (k + 2) as f64;
    let tail = xi.powi((n - k) as i32);
    let direct_denominator =
        (1.0 + half).powi(k as i32 + 2) / (k + 2) as f64 - (1.0 - half).powi(k as i32 + 2) / (k + 2) as f64 - tail;
    let error_estimate =
        (4.0 * f64::EPSILON * (big + tail) + root.residual / (k + 1) as f64) / direct_denominator.abs();
    let direct = (direct_denominator.is_finite() && error_estimate < DIRECT_FORM_MAX_ERROR)
        .then(|| xi.powi(3 * n as i32 - k as i32 - 2) / direct_denominator)
        .filter(|g| g.is_finite());
    debug_assert!(d.is_finite());

    if let Some(g) = direct {
        return Ok(GammaValue { gamma: g, form: GammaForm::Direct, direct, expanded });
    }
    if expanded.is_finite() && denom > 0.0 {
        return Ok(GammaValue { gamma: expanded, form: GammaForm::Expanded, direct: None, expanded });
    }
    Err(Error::DenominatorUnderflow { k, n })
}

/// Everything the general-`k` construction derives from `(k, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionRecord {
    pub k: usize,
    pub n: usize,
    pub xi: f64,
    /// `ξ^(n-1)`
    pub alpha: f64,
    /// `ξ`
    pub beta: f64,
    /// `C_n(k)`
    pub gamma: f64,
    pub gamma_form: GammaForm,
    /// `|γ| < 4`, the kernel stays positive.
    pub admissible: bool,
    pub root_bracket: (f64, f64),
    pub root_residual: f64,
}

impl ConstructionRecord {
    pub fn new(k: usize, n: usize, tol: f64) -> Result<Self> {
        let root = solve_xi(k, n, tol)?;
        let gamma = compute_gamma(&root)?;
        Ok(Self::from_parts(&root, &gamma))
    }

    pub fn from_parts(root: &XiRoot, gamma: &GammaValue) -> Self {
        Self {
            k: root.k,
            n: root.n,
            xi: root.xi,
            alpha: root.xi.powi(root.n as i32 - 1),
            beta: root.xi,
            gamma: gamma.gamma,
            gamma_form: gamma.form,
            admissible: gamma.gamma.abs() < 4.0,
            root_bracket: root.bracket,
            root_residual: root.residual,
        }
    }

    /// Residual of `β = ((k+1) / Σ_{j=0}^{k} (1+α/2)^(k-j) (1-α/2)^j)^(1/(k-1))`.
    pub fn beta_identity_residual(&self) -> f64 {
        let k = self.k;
        let (p, m) = (1.0 + 0.5 * self.alpha, 1.0 - 0.5 * self.alpha);
        let sum: f64 = (0..=k).map(|j| p.powi((k - j) as i32) * m.powi(j as i32)).sum();
        let beta = ((k + 1) as f64 / sum).powf(1.0 / (k - 1) as f64);
        (beta - self.beta).abs()
    }
}

/// One row of a sweep over `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub k: usize,
    pub n: usize,
    pub record: Option<ConstructionRecord>,
    pub beta_identity_residual: Option<f64>,
    pub error: Option<String>,
}

/// Solves every `(k, n)` for `n` in `n_list`, in order. Failures are kept
/// as rows with an error message.
pub fn asymptotic_diagnostics(k: usize, n_list: &[usize], tol: f64) -> Vec<DiagnosticRow> {
    par_map(n_list.len(), |i| {
        let n = n_list[i];
        match ConstructionRecord::new(k, n, tol) {
            Ok(record) => DiagnosticRow {
                k,
                n,
                beta_identity_residual: Some(record.beta_identity_residual()),
                record: Some(record),
                error: None,
            },
            Err(e) => DiagnosticRow { k, n, record: None, beta_identity_residual: None, error: Some(e.to_string()) },
        }
    })
}

/// Trend of `|γ(k;n) - 12/k|` along a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub limit: f64,
    pub last_n: Option<usize>,
    pub last_deviation: Option<f64>,
    /// `|γ - 12/k|` strictly decreasing over the final `window` solved rows.
    pub decreasing_tail: bool,
    pub window: usize,
}

pub fn trend_summary(k: usize, rows: &[DiagnosticRow], window: usize) -> TrendSummary {
    let limit = 12.0 / k as f64;
    let solved: Vec<(usize, f64)> =
        rows.iter().filter_map(|r| r.record.as_ref().map(|rec| (r.n, (rec.gamma - limit).abs()))).collect();
    let tail = &solved[solved.len().saturating_sub(window)..];
    TrendSummary {
        limit,
        last_n: solved.last().map(|s| s.0),
        last_deviation: solved.last().map(|s| s.1),
        decreasing_tail: tail.len() == window.min(solved.len())
            && !tail.is_empty()
            && tail.windows(2).all(|w| w[1].1 < w[0].1),
        window,
    }
}

/// The linear family kernel `1 + γ (t-1/2)(u-1/2)` for an admissible record.
pub fn build_family_kernel(record: &ConstructionRecord) -> Result<Kernel> {
    if !record.admissible {
        return Err(Error::NotAdmissible { gamma: record.gamma });
    }
    Ok(Kernel::LinearFamily { gamma: record.gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    K2F1,
    K2F2,
    K3F1,
    K3F2,
    GeneralF0,
    GeneralF1,
}

/// A closed-form positive solution of `H_k f = f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticSolution {
    pub kind: SolutionKind,
    /// `(ξ, ξ^n)` for [`SolutionKind::GeneralF1`].
    pub line: Option<(f64, f64)>,
}

impl AnalyticSolution {
    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            SolutionKind::K2F1 | SolutionKind::K3F1 | SolutionKind::GeneralF0 => 1.0,
            SolutionKind::K2F2 => 0.75 + ConstantsK2::new().b * odd_root(t - 0.5, 5),
            SolutionKind::K3F2 => {
                let c = ConstantsK3::new();
                c.a + c.b * odd_root(2.0 * (t - 0.5), 7)
            }
            SolutionKind::GeneralF1 => {
                let (xi, slope) = self.line.expect("general f1 carries its line");
                xi + slope * (t - 0.5)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SolutionKind::K2F1 | SolutionKind::K3F1 => "f1",
            SolutionKind::K2F2 | SolutionKind::K3F2 => "f2",
            SolutionKind::GeneralF0 => "f0",
            SolutionKind::GeneralF1 => "f1",
        }
    }

    /// Whether this is the constant solution.
    pub fn is_trivial(&self) -> bool {
        matches!(self.kind, SolutionKind::K2F1 | SolutionKind::K3F1 | SolutionKind::GeneralF0)
    }

    pub fn to_grid(&self, rule: Arc<QuadratureRule>) -> GridFunction {
        let s = *self;
        GridFunction::from_fn(rule, move |t| s.eval(t))
    }
}

pub fn analytic_solution(kind: SolutionKind, record: Option<&ConstructionRecord>) -> Result<AnalyticSolution> {
    let line = match kind {
        SolutionKind::GeneralF1 => {
            let record = record.ok_or(Error::MissingRecord)?;
            if !record.admissible {
                return Err(Error::NotAdmissible { gamma: record.gamma });
            }
            Some((record.xi, record.xi.powi(record.n as i32)))
        }
        _ => None,
    };
    Ok(AnalyticSolution { kind, line })
}

/// Sup-norm residual of `H_k sol - sol` on the rule's nodes. Every solution
/// here has eigenvalue 1.
pub fn verify_solution(
    kernel: &Kernel,
    rule: &Arc<QuadratureRule>,
    k: u32,
    sol: &AnalyticSolution,
    tol: f64,
) -> FixedPointReport {
    let f = sol.to_grid(rule.clone());
    let hf = apply_h(kernel, rule, k, &f).expect("grid built on the same rule");
    let residual = hf.sup_distance(&f).expect("same rule");
    FixedPointReport {
        iterations: 0,
        final_residual_sup: residual,
        tolerance: tol,
        lambda: Some(1.0),
        lambda0: None,
        status: if residual <= tol { FixedPointStatus::Converged } else { FixedPointStatus::ToleranceExceeded },
        distances: Vec::new(),
    }
}

/// One of the explicit models with two positive fixed points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum Construction {
    K2,
    K3,
    General(ConstructionRecord),
}

impl Construction {
    /// The general construction for `(k, n)`; fails unless admissible.
    pub fn general(k: usize, n: usize, tol: f64) -> Result<Self> {
        let record = ConstructionRecord::new(k, n, tol)?;
        if !record.admissible {
            return Err(Error::NotAdmissible { gamma: record.gamma });
        }
        Ok(Construction::General(record))
    }

    pub fn k(&self) -> u32 {
        match self {
            Construction::K2 => 2,
            Construction::K3 => 3,
            Construction::General(r) => r.k as u32,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Construction::K2 => "k2".into(),
            Construction::K3 => "k3".into(),
            Construction::General(r) => format!("k{}n{}", r.k, r.n),
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        match self {
            Construction::K2 => Ok(Kernel::K2Explicit),
            Construction::K3 => Ok(Kernel::K3Explicit),
            Construction::General(r) => build_family_kernel(r),
        }
    }

    /// The constant solution and the non-constant one, in that order.
    pub fn solutions(&self) -> Result<[AnalyticSolution; 2]> {
        Ok(match self {
            Construction::K2 => {
                [analytic_solution(SolutionKind::K2F1, None)?, analytic_solution(SolutionKind::K2F2, None)?]
            }
            Construction::K3 => {
                [analytic_solution(SolutionKind::K3F1, None)?, analytic_solution(SolutionKind::K3F2, None)?]
            }
            Construction::General(r) => [
                analytic_solution(SolutionKind::GeneralF0, Some(r))?,
                analytic_solution(SolutionKind::GeneralF1, Some(r))?,
            ],
        })
    }
}

/// The `count` smallest `n` in `k+1..=n_max` whose record is admissible.
pub fn smallest_admissible(k: usize, count: usize, n_max: usize, tol: f64) -> Result<Vec<ConstructionRecord>> {
    let mut found = Vec::new();
    for n in k + 1..=n_max {
        let record = ConstructionRecord::new(k, n, tol)?;
        if record.admissible {
            found.push(record);
            if found.len() == count {
                break;
            }
        }
    }
    Ok(found)
}
