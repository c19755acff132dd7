//! The linear operator `W`, the Hammerstein operator `H_k`, the normalized
//! operator `R_k` and the correspondence between positive eigenfunctions of
//! `H_k` and fixed points of `R_k`.
//!
//! Functions live on the nodes of a [`QuadratureRule`]. Every operator
//! output also carries its Nyström extension, so values off the grid (in
//! particular at `t = 0`, where `R_k` is normalized) come from the same
//! quadrature sum rather than from extrapolation.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::par_map;
use crate::quadrature::{QuadratureRule, RuleKind};

/// Tolerance below which tiny negative values are clamped before taking
/// fractional powers.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Values below this are treated as zero when normalizing.
pub const ZERO_TOL: f64 = 1e-12;

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function on `[0,1]` sampled at the nodes of a quadrature rule, with an
/// optional exact evaluator for off-grid points.
#[derive(Clone)]
pub struct GridFunction {
    rule: Arc<QuadratureRule>,
    values: Vec<f64>,
    evaluator: Option<Evaluator>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("rule", &self.rule.kind())
            .field("len", &self.values.len())
            .field("has_evaluator", &self.evaluator.is_some())
            .finish()
    }
}

impl GridFunction {
    pub fn from_values(rule: Arc<QuadratureRule>, values: Vec<f64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(Error::InvalidInput(format!("{} values for a rule with {} nodes", values.len(), rule.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIntegrand { node: rule.nodes()[i] });
        }
        Ok(Self { rule, values, evaluator: None })
    }

    /// Samples `f` at the nodes and keeps it as the evaluator.
    pub fn from_fn<F>(rule: Arc<QuadratureRule>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let values = rule.nodes().iter().map(|&t| f(t)).collect();
        Self { rule, values, evaluator: Some(Arc::new(f)) }
    }

    pub fn constant(rule: Arc<QuadratureRule>, c: f64) -> Self {
        Self::from_fn(rule, move |_| c)
    }

    pub fn with_evaluator(mut self, evaluator: Evaluator) -> Self {
        self.evaluator = Some(evaluator);
        self
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn evaluator(&self) -> Option<&Evaluator> {
        self.evaluator.as_ref()
    }

    /// Value at an arbitrary `t ∈ [0,1]`: the evaluator when present,
    /// otherwise interpolation through the nearest nodes.
    pub fn value_at(&self, t: f64) -> f64 {
        match &self.evaluator {
            Some(e) => e(t),
            None => interpolate(self.rule.nodes(), &self.values, t),
        }
    }

    /// Membership in `C⁺₀`: nonnegative and not identically zero.
    pub fn in_positive_cone(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0) && self.values.iter().any(|&v| v > 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_rule(&other.rule)?;
        Ok(sup_distance(&self.values, &other.values))
    }

    /// Pointwise map of node values and evaluator.
    pub fn map<F>(&self, f: F) -> GridFunction
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let values = self.values.iter().map(|&v| f(v)).collect();
        let evaluator = self.evaluator.clone().map(|inner| -> Evaluator {
            let f = f.clone();
            Arc::new(move |t| f(inner(t)))
        });
        GridFunction { rule: self.rule.clone(), values, evaluator }
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.check_rule(&other.rule)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        let evaluator = match (&self.evaluator, &other.evaluator) {
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |t| a * f(t) + b * g(t)) as Evaluator)
            }
            _ => None,
        };
        Ok(GridFunction { rule: self.rule.clone(), values, evaluator })
    }

    fn check_rule(&self, rule: &QuadratureRule) -> Result<()> {
        if self.rule.id() != rule.id() {
            return Err(Error::RuleMismatch);
        }
        Ok(())
    }

    /// Writes `node,value` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["node", "value"])?;
        for (t, v) in self.nodes().iter().zip(&self.values) {
            wtr.write_record([t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> GridFunctionJson {
        GridFunctionJson { rule: self.rule.kind().clone(), nodes: self.nodes().to_vec(), values: self.values.clone() }
    }

    /// Rebuilds a node-only function; the rule is rebuilt from its kind and
    /// must reproduce the stored nodes.
    pub fn from_json(json: GridFunctionJson) -> Result<Self> {
        let rule = Arc::new(crate::quadrature::build_rule(json.rule)?);
        if sup_distance(rule.nodes(), &json.nodes) > 0.0 {
            return Err(Error::RuleMismatch);
        }
        Self::from_values(rule, json.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunctionJson {
    pub rule: RuleKind,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Lagrange interpolation through the (up to) eight nodes nearest to `t`.
fn interpolate(nodes: &[f64], values: &[f64], t: f64) -> f64 {
    let n = nodes.len();
    let m = n.min(8);
    let centre = nodes.partition_point(|&x| x < t);
    let start = centre.saturating_sub(m / 2).min(n - m);
    let (xs, ys) = (&nodes[start..start + m], &values[start..start + m]);
    let mut acc = 0.0;
    for i in 0..m {
        let mut l = 1.0;
        for j in 0..m {
            if i != j {
                l *= (t - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += l * ys[i];
    }
    acc
}

/// `t ↦ Σ_j w_j K(t, u_j) g_j` for fixed node data.
fn nystrom(kernel: &Kernel, rule: &QuadratureRule, source: &[f64]) -> Evaluator {
    let kernel = kernel.clone();
    let nodes: Arc<[f64]> = rule.nodes().into();
    let weighted: Arc<[f64]> = rule.weights().iter().zip(source).map(|(w, g)| w * g).collect();
    Arc::new(move |t| contract(&kernel, &nodes, &weighted, t))
}

#[inline]
fn contract(kernel: &Kernel, nodes: &[f64], weighted: &[f64], t: f64) -> f64 {
    nodes.iter().zip(weighted).map(|(&u, &wg)| kernel.value(t, u) * wg).sum()
}

fn check_bound(rule: &QuadratureRule, f: &GridFunction) -> Result<()> {
    f.check_rule(rule)
}

/// `(Wf)(t) = ∫ K(t,u) f(u) du` at every node.
pub fn apply_w(kernel: &Kernel, rule: &Arc<QuadratureRule>, f: &GridFunction) -> Result<GridFunction> {
    check_bound(rule, f)?;
    Ok(w_of_values(kernel, rule, f.values()))
}

fn w_of_values(kernel: &Kernel, rule: &Arc<QuadratureRule>, source: &[f64]) -> GridFunction {
    let eval = nystrom(kernel, rule, source);
    let nodes = rule.nodes();
    let values = par_map(nodes.len(), |i| eval(nodes[i]));
    GridFunction { rule: rule.clone(), values, evaluator: Some(eval) }
}

/// `(H_k f)(t) = ∫ K(t,u) f(u)^k du`.
pub fn apply_h(kernel: &Kernel, rule: &Arc<QuadratureRule>, k: u32, f: &GridFunction) -> Result<GridFunction> {
    check_bound(rule, f)?;
    if k == 0 {
        return Err(Error::InvalidInput("Hammerstein order must be >= 1".into()));
    }
    let powered: Vec<f64> = f.values().iter().map(|v| v.powi(k as i32)).collect();
    Ok(w_of_values(kernel, rule, &powered))
}

/// `(R_k f)(t) = ((Wf)(t) / (Wf)(0))^k`, with `(Wf)(0)` computed by
/// quadrature of `u ↦ K(0,u) f(u)`.
pub fn apply_r(kernel: &Kernel, rule: &Arc<QuadratureRule>, k: u32, f: &GridFunction) -> Result<GridFunction> {
    let wf = apply_w(kernel, rule, f)?;
    normalize_power(wf, k)
}

fn normalize_power(wf: GridFunction, k: u32) -> Result<GridFunction> {
    let eval = wf.evaluator.clone().expect("W output carries its Nyström extension");
    let norm = eval(0.0);
    if !(norm > ZERO_TOL * wf.sup_norm().max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateNormalizer { value: norm });
    }
    let values = wf.values.iter().map(|v| (v / norm).powi(k as i32)).collect();
    let evaluator: Evaluator = Arc::new(move |t| (eval(t) / norm).powi(k as i32));
    Ok(GridFunction { rule: wf.rule, values, evaluator: Some(evaluator) })
}

/// Fixed point of `R_k` from an eigenfunction: `h = (f / f(0))^k`.
///
/// If `H_k f = λ f` with `λ > 0`, then `R_k h = h`.
pub fn eigen_to_fixed(f: &GridFunction, k: u32) -> Result<GridFunction> {
    let f0 = f.value_at(0.0);
    if !(f0 > ZERO_TOL) {
        return Err(Error::ZeroAtOrigin { value: f0 });
    }
    Ok(f.map(move |v| (v / f0).powi(k as i32)))
}

/// Eigenpair of `H_k` recovered from a fixed point of `R_k`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    /// `g = h^(1/k)`
    pub function: GridFunction,
    /// `λ₀ = (W h)(0)`, so that `H_k g = λ₀ g`.
    pub lambda0: f64,
    /// `λ = λ₀ g(0)^(1-k)`, the eigenvalue of the normalized `g / g(0)`.
    pub lambda: f64,
    /// Sup-norm residual of `R_k h - h`.
    pub fixed_point_residual: f64,
    /// Sup-norm residual of `H_k g - λ₀ g`.
    pub eigen_residual: f64,
}

/// From a fixed point `h` of `R_k`, returns `g = h^(1/k)` and `λ₀ = (Wh)(0)`.
pub fn fixed_to_eigen(
    kernel: &Kernel,
    rule: &Arc<QuadratureRule>,
    h: &GridFunction,
    k: u32,
    tol: f64,
) -> Result<EigenPair> {
    let wh = apply_w(kernel, rule, h)?;
    let lambda0 = wh.value_at(0.0);
    let rh = normalize_power(wh, k)?;
    let residual = sup_distance(rh.values(), h.values());
    if !(residual <= tol) {
        return Err(Error::NotAFixedPoint { residual, tol });
    }

    for (&t, &v) in h.nodes().iter().zip(h.values()) {
        if v < -NEGATIVE_CLAMP {
            return Err(Error::NegativeValue { node: t, value: v });
        }
    }
    let inv_k = 1.0 / k as f64;
    let g = h.map(move |v| v.max(0.0).powf(inv_k));
    let g0 = g.value_at(0.0);
    let lambda = lambda0 * g0.powi(1 - k as i32);

    let hg = apply_h(kernel, rule, k, &g)?;
    let eigen_residual = hg.values().iter().zip(g.values()).fold(0.0f64, |m, (a, b)| m.max((a - lambda0 * b).abs()));

    Ok(EigenPair { function: g, lambda0, lambda, fixed_point_residual: residual, eigen_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointStatus {
    Converged,
    MaxIterations,
    NonPositive,
    /// A one-shot verification whose residual exceeded the tolerance.
    ToleranceExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDistance {
    pub name: String,
    pub sup_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub iterations: usize,
    pub final_residual_sup: f64,
    pub tolerance: f64,
    /// Eigenvalue of the verified Hammerstein equation, when applicable.
    pub lambda: Option<f64>,
    /// `(W f)(0)` at the terminal iterate.
    pub lambda0: Option<f64>,
    pub status: FixedPointStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distances: Vec<NamedDistance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `θ ∈ (0,1]` in `f ← (1-θ) f + θ R_k f`; 1 is plain Picard.
    pub damping: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, damping: 1.0 }
    }
}

/// Kernel matrix `w_j K(t_i, u_j)` plus the normalization row at `t = 0`.
struct KernelMatrix {
    n: usize,
    rows: Vec<f64>,
    origin: Vec<f64>,
}

impl KernelMatrix {
    fn new(kernel: &Kernel, rule: &QuadratureRule) -> Self {
        let (nodes, weights) = (rule.nodes(), rule.weights());
        let n = nodes.len();
        let rows =
            par_map(n, |i| nodes.iter().zip(weights).map(|(&u, &w)| w * kernel.value(nodes[i], u)).collect::<Vec<_>>())
                .concat();
        let origin = nodes.iter().zip(weights).map(|(&u, &w)| w * kernel.value(0.0, u)).collect();
        Self { n, rows, origin }
    }

    /// `R_k f` on the nodes, or `None` when the normalizer degenerates.
    fn apply_r(&self, f: &[f64], k: u32) -> std::result::Result<Vec<f64>, f64> {
        let wf = par_map(self.n, |i| dot(&self.rows[i * self.n..(i + 1) * self.n], f));
        let norm = dot(&self.origin, f);
        let sup = wf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(norm > ZERO_TOL * sup.max(f64::MIN_POSITIVE)) {
            return Err(norm);
        }
        Ok(wf.iter().map(|v| (v / norm).powi(k as i32)).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Picard iteration `f ← R_k f` from `f0` until the sup-norm change drops
/// to `tol` or `max_iter` updates were made.
///
/// `iterations` counts updates; an input that already satisfies the
/// tolerance reports zero. No claim is made about which fixed point is
/// reached; pass `known` solutions to have their distances recorded.
pub fn iterate_r(
    kernel: &Kernel,
    rule: &Arc<QuadratureRule>,
    k: u32,
    f0: &GridFunction,
    options: &IterationOptions,
    known: &[(&str, &GridFunction)],
) -> Result<(FixedPointReport, GridFunction)> {
    check_bound(rule, f0)?;
    if !f0.in_positive_cone() {
        return Err(Error::InvalidInput("initial function must lie in the positive cone".into()));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::InvalidInput(format!("damping {} not in (0,1]", options.damping)));
    }
    let matrix = KernelMatrix::new(kernel, rule);
    let theta = options.damping;

    let mut f = f0.values().to_vec();
    let mut iterations = 0;
    let mut residual;
    let status = loop {
        let rf = matrix.apply_r(&f, k).map_err(|value| Error::DegenerateNormalizer { value })?;
        residual = sup_distance(&rf, &f);
        if residual <= options.tol {
            break FixedPointStatus::Converged;
        }
        if iterations == options.max_iter {
            break FixedPointStatus::MaxIterations;
        }
        let next: Vec<f64> = f.iter().zip(&rf).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        if next.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            break FixedPointStatus::NonPositive;
        }
        f = next;
        iterations += 1;
    };

    let current = GridFunction { rule: rule.clone(), values: f, evaluator: None };
    let wf = apply_w(kernel, rule, &current)?;
    let lambda0 = wf.value_at(0.0);
    let terminal = match status {
        FixedPointStatus::NonPositive => current,
        _ => normalize_power(wf, k)?,
    };
    let distances = known
        .iter()
        .map(|(name, g)| Ok(NamedDistance { name: name.to_string(), sup_distance: terminal.sup_distance(g)? }))
        .collect::<Result<Vec<_>>>()?;

    let report = FixedPointReport {
        iterations,
        final_residual_sup: residual,
        tolerance: options.tol,
        lambda: None,
        lambda0: Some(lambda0),
        status,
        distances,
    };
    Ok((report, terminal))
}
