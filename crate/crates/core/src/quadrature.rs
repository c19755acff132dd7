//! Quadrature rules on `[0,1]`.
//!
//! The fractional-root kernels make integrands behave like `|u - 1/2|^p`
//! with `0 < p < 1` near the centre. Uniform composite rules converge only
//! algebraically there, so [`RuleKind::SingularitySplit`] puts a panel edge
//! on every split point and grades the adjacent panels geometrically.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio between consecutive graded panels next to a split point.
pub const GRADING_RATIO: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    /// Single Gauss-Legendre panel.
    GaussLegendre { order: usize },
    /// `panels` equal Gauss-Legendre panels.
    CompositeGl { order: usize, panels: usize },
    /// Composite rule with panel edges at every split point; the panels
    /// touching a split point are refined geometrically over
    /// `grading_levels` levels.
    SingularitySplit { order: usize, panels: usize, splits: Vec<f64>, grading_levels: usize },
    /// Composite rule in `s ∈ [-1,1]` under `u = 1/2 + s|s|^(q-1)/2`, which
    /// makes `(u - 1/2)^(1/q)` polynomial in `s`. Used as an independent
    /// cross-check of the split rule.
    RootSubstitution { order: usize, panels: usize, q: u32 },
}

impl Default for RuleKind {
    fn default() -> Self {
        RuleKind::SingularitySplit { order: 16, panels: 64, splits: vec![0.5], grading_levels: 12 }
    }
}

/// Nodes and positive weights on `[0,1]`; weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    #[serde(skip)]
    id: u64,
}

impl QuadratureRule {
    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Content hash of nodes and weights; equal rules share an id.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Highest polynomial degree (in `u`) integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        match self.kind {
            RuleKind::GaussLegendre { order }
            | RuleKind::CompositeGl { order, .. }
            | RuleKind::SingularitySplit { order, .. } => 2 * order - 1,
            RuleKind::RootSubstitution { order, q, .. } => {
                // degree d in u is degree q(d+1)-1 in s
                ((2 * order) / q as usize).saturating_sub(1)
            }
        }
    }

    /// `Σ wᵢ g(uᵢ)`, summed in node order.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&u, &w) in self.nodes.iter().zip(&self.weights) {
            let v = g(u);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand { node: u });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// `Σ wᵢ vᵢ` for values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    fn from_parts(kind: RuleKind, nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        nodes.len().hash(&mut h);
        for (x, w) in nodes.iter().zip(&weights) {
            x.to_bits().hash(&mut h);
            w.to_bits().hash(&mut h);
        }
        Self { kind, nodes, weights, id: h.finish() }
    }
}

/// Builds a rule of the requested kind.
pub fn build_rule(kind: RuleKind) -> Result<QuadratureRule> {
    let (nodes, weights) = match &kind {
        RuleKind::GaussLegendre { order } => {
            check_order(*order)?;
            composite(&[0.0, 1.0], *order)
        }
        RuleKind::CompositeGl { order, panels } => {
            check_order(*order)?;
            check_panels(*panels)?;
            let edges: Vec<f64> = (0..=*panels).map(|i| i as f64 / *panels as f64).collect();
            composite(&edges, *order)
        }
        RuleKind::SingularitySplit { order, panels, splits, grading_levels } => {
            check_order(*order)?;
            check_panels(*panels)?;
            if let Some(s) = splits.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
                return Err(Error::InvalidParams(format!("split point {s} not in (0,1)")));
            }
            let edges = split_edges(*panels, splits, *grading_levels);
            composite(&edges, *order)
        }
        RuleKind::RootSubstitution { order, panels, q } => {
            check_order(*order)?;
            check_panels(*panels)?;
            if *q == 0 || q % 2 == 0 {
                return Err(Error::InvalidParams(format!("substitution order q = {q} must be odd")));
            }
            substitution(*order, *panels, *q)
        }
    };
    Ok(QuadratureRule::from_parts(kind, nodes, weights))
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidParams(format!("order must be >= 2, got {order}")));
    }
    Ok(())
}

fn check_panels(panels: usize) -> Result<()> {
    if panels < 1 {
        return Err(Error::InvalidParams("panels must be >= 1".into()));
    }
    Ok(())
}

/// Gauss-Legendre nodes and weights on `[-1,1]`, ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Tricomi initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre of the given order on every `[edges[i], edges[i+1]]`.
fn composite(edges: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(order * (edges.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for e in edges.windows(2) {
        let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Panel edges: uniform panels between split points, the panels next to a
/// split point replaced by geometric grading toward it.
fn split_edges(panels: usize, splits: &[f64], levels: usize) -> Vec<f64> {
    let mut breaks: Vec<f64> = splits.to_vec();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut bounds = vec![0.0];
    bounds.extend(breaks);
    bounds.push(1.0);

    let mut edges = vec![0.0];
    for seg in bounds.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let grade_left = a > 0.0;
        let grade_right = b < 1.0;
        let mut m = ((panels as f64 * (b - a)).round() as usize).max(1);
        if m == 1 && grade_left && grade_right {
            m = 2;
        }
        let h = (b - a) / m as f64;
        let uniform: Vec<f64> = (0..=m).map(|i| if i == m { b } else { a + i as f64 * h }).collect();
        for (p, e) in uniform.windows(2).enumerate() {
            let (lo, hi) = (e[0], e[1]);
            if p == 0 && grade_left {
                for j in (1..=levels).rev() {
                    edges.push(lo + (hi - lo) * GRADING_RATIO.powi(j as i32));
                }
            }
            if p == m - 1 && grade_right {
                for j in 1..=levels {
                    edges.push(hi - (hi - lo) * GRADING_RATIO.powi(j as i32));
                }
            }
            edges.push(hi);
        }
    }
    edges.dedup();
    edges
}

/// Composite rule in `s` pushed forward by `u = 1/2 + s|s|^(q-1)/2`.
fn substitution(order: usize, panels: usize, q: u32) -> (Vec<f64>, Vec<f64>) {
    let half = panels.div_ceil(2).max(1);
    let edges: Vec<f64> = (0..=2 * half).map(|i| -1.0 + i as f64 / half as f64).collect();
    let (s_nodes, s_weights) = composite(&edges, order);
    let qf = q as f64;
    let mut nodes = Vec::with_capacity(s_nodes.len());
    let mut weights = Vec::with_capacity(s_nodes.len());
    for (s, w) in s_nodes.iter().zip(&s_weights) {
        let a = s.abs().powi(q as i32 - 1);
        let (u, wu) = (0.5 + 0.5 * s * a, w * 0.5 * qf * a);
        // nodes closest to the centre can round onto each other
        match nodes.last() {
            Some(&prev) if u <= prev => *weights.last_mut().unwrap() += wu,
            _ => {
                nodes.push(u);
                weights.push(wu);
            }
        }
    }
    (nodes, weights)
}

/// Integral of `g` over `[a, b]` with one Gauss-Legendre panel of the
/// given order, optionally graded geometrically toward one or both ends.
#[cfg(test)]
pub(crate) fn integrate_interval<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    order: usize,
    grade_a: bool,
    grade_b: bool,
    levels: usize,
    g: &F,
) -> f64 {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    interval_rule(a, b, order, grade_a, grade_b, levels, &mut nodes, &mut weights);
    nodes.iter().zip(&weights).map(|(&u, w)| w * g(u)).sum()
}

/// Appends the nodes and weights used by [`integrate_interval`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn interval_rule(
    a: f64,
    b: f64,
    order: usize,
    grade_a: bool,
    grade_b: bool,
    levels: usize,
    nodes: &mut Vec<f64>,
    weights: &mut Vec<f64>,
) {
    let (x, w) = gl_cached(order);
    let mut panel = |lo: f64, hi: f64| {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(mid + half * xi);
            weights.push(wi * half);
        }
    };
    match (grade_a, grade_b) {
        (false, false) => panel(a, b),
        (true, false) => {
            panel(a, a + (b - a) * GRADING_RATIO.powi(levels as i32));
            for j in (1..=levels).rev() {
                let lo = a + (b - a) * GRADING_RATIO.powi(j as i32);
                let hi = a + (b - a) * GRADING_RATIO.powi(j as i32 - 1);
                panel(lo, hi);
            }
        }
        (false, true) => {
            for j in 0..levels {
                let lo = b - (b - a) * GRADING_RATIO.powi(j as i32);
                let hi = b - (b - a) * GRADING_RATIO.powi(j as i32 + 1);
                panel(lo, hi);
            }
            panel(b - (b - a) * GRADING_RATIO.powi(levels as i32), b);
        }
        (true, true) => {
            let m = 0.5 * (a + b);
            interval_rule(a, m, order, true, false, levels, nodes, weights);
            interval_rule(m, b, order, false, true, levels, nodes, weights);
        }
    }
}

fn gl_cached(order: usize) -> (&'static [f64], &'static [f64]) {
    use std::sync::OnceLock;
    static GL8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static GL16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let cell = match order {
        8 => &GL8,
        16 => &GL16,
        _ => panic!("integrate_interval supports orders 8 and 16"),
    };
    let (x, w) = cell.get_or_init(|| gauss_legendre(order));
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{odd_root, Kernel};

    fn default_rule() -> QuadratureRule {
        build_rule(RuleKind::default()).unwrap()
    }

    fn check_invariants(rule: &QuadratureRule) {
        let sum: f64 = rule.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-14, "{:?}: weight sum {sum}", rule.kind());
        assert!(rule.weights().iter().all(|&w| w > 0.0));
        assert!(rule.nodes().iter().all(|&u| u > 0.0 && u < 1.0));
        assert!(rule.nodes().windows(2).all(|p| p[1] > p[0]), "{:?}", rule.kind());
    }

    #[test]
    fn legendre_nodes_match_known_values() {
        let (x, w) = gauss_legendre(3);
        let r = (0.6f64).sqrt();
        assert!((x[0] + r).abs() < 1e-15 && x[1] == 0.0 && (x[2] - r).abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-15 && (w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn all_kinds_satisfy_invariants() {
        let kinds = [
            RuleKind::GaussLegendre { order: 2 },
            RuleKind::GaussLegendre { order: 8 },
            RuleKind::GaussLegendre { order: 33 },
            RuleKind::CompositeGl { order: 16, panels: 7 },
            RuleKind::default(),
            RuleKind::SingularitySplit { order: 8, panels: 3, splits: vec![0.2, 0.5, 0.9], grading_levels: 6 },
            RuleKind::SingularitySplit { order: 8, panels: 1, splits: vec![0.4, 0.6], grading_levels: 4 },
            RuleKind::SingularitySplit { order: 4, panels: 10, splits: vec![0.5], grading_levels: 0 },
            RuleKind::RootSubstitution { order: 16, panels: 8, q: 5 },
            RuleKind::RootSubstitution { order: 16, panels: 8, q: 7 },
        ];
        for kind in kinds {
            check_invariants(&build_rule(kind).unwrap());
        }
    }

    #[test]
    fn polynomial_exactness() {
        for kind in [
            RuleKind::GaussLegendre { order: 8 },
            RuleKind::CompositeGl { order: 5, panels: 3 },
            RuleKind::default(),
            RuleKind::RootSubstitution { order: 16, panels: 4, q: 5 },
        ] {
            let rule = build_rule(kind).unwrap();
            let deg = rule.exactness_degree().min(15);
            for d in 0..=deg {
                let exact = 1.0 / (d as f64 + 1.0);
                let got = rule.integrate(|u| u.powi(d as i32)).unwrap();
                assert!(((got - exact) / exact).abs() < 1e-13, "{:?} degree {d}", rule.kind());
            }
        }
        let gl8 = build_rule(RuleKind::GaussLegendre { order: 8 }).unwrap();
        assert!((gl8.integrate(|u| u * u).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn singular_integrands() {
        let rule = default_rule();
        let odd = rule.integrate(|u| odd_root(u - 0.5, 5)).unwrap();
        assert!(odd.abs() < 1e-12);
        // 2 (1/2)^(7/5) / (7/5) = (5/7)(1/2)^(2/5)
        let even = rule.integrate(|u| (u - 0.5).abs().powf(0.4)).unwrap();
        assert!((even - 0.541_327_345_182_285).abs() < 1e-14, "{even}");
        // 2 (1/2)^(9/7) (7/9)
        let sq = rule.integrate(|u| odd_root(u - 0.5, 7).powi(2)).unwrap();
        assert!((sq - 0.638_038_610_228_162_8).abs() < 1e-14, "{sq}");
        assert!((rule.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-15);
        let k = rule.integrate(|u| Kernel::K2Explicit.value(0.3, u)).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
    }

    #[test]
    fn split_rule_agrees_with_substitution_rule() {
        let split = default_rule();
        let sub5 = build_rule(RuleKind::RootSubstitution { order: 16, panels: 16, q: 5 }).unwrap();
        let sub7 = build_rule(RuleKind::RootSubstitution { order: 16, panels: 16, q: 7 }).unwrap();
        let f2 = |u: f64| 0.75 + 0.588 * odd_root(u - 0.5, 5);
        let g5 = |u: f64| odd_root(u - 0.5, 5) * f2(u).powi(2);
        let a = split.integrate(g5).unwrap();
        let b = sub5.integrate(g5).unwrap();
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        let g7 = |u: f64| (1.0 + 0.5 * odd_root(u - 0.5, 7)).powi(3) * odd_root(2.0 * (u - 0.5), 7);
        let a = split.integrate(g7).unwrap();
        let b = sub7.integrate(g7).unwrap();
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }

    #[test]
    fn composite_error_decreases_with_panels() {
        let exact = 2.0 * 0.5f64.powf(1.2) / 1.2;
        let mut last = f64::INFINITY;
        for panels in [2, 4, 8, 16, 32, 64] {
            let rule = build_rule(RuleKind::CompositeGl { order: 8, panels }).unwrap();
            let err = (rule.integrate(|u| (u - 0.5).abs().powf(0.2)).unwrap() - exact).abs();
            assert!(err < last, "panels {panels}: {err} >= {last}");
            last = err;
        }
    }

    #[test]
    fn invalid_params() {
        for kind in [
            RuleKind::GaussLegendre { order: 1 },
            RuleKind::CompositeGl { order: 4, panels: 0 },
            RuleKind::SingularitySplit { order: 4, panels: 4, splits: vec![1.0], grading_levels: 2 },
            RuleKind::SingularitySplit { order: 4, panels: 4, splits: vec![-0.1], grading_levels: 2 },
            RuleKind::RootSubstitution { order: 4, panels: 4, q: 4 },
        ] {
            assert!(matches!(build_rule(kind), Err(Error::InvalidParams(_))));
        }
    }

    #[test]
    fn non_finite_integrand() {
        let rule = build_rule(RuleKind::GaussLegendre { order: 4 }).unwrap();
        assert!(matches!(rule.integrate(|u| 1.0 / (u - u)), Err(Error::NonFiniteIntegrand { .. })));
    }

    #[test]
    fn graded_interval_helper() {
        let g = |u: f64| (u - 0.5).abs().powf(0.2);
        let left = integrate_interval(0.25, 0.5, 16, false, true, 12, &g);
        let right = integrate_interval(0.5, 0.75, 16, true, false, 12, &g);
        let exact = 0.25f64.powf(1.2) / 1.2;
        assert!((left - exact).abs() < 1e-14 && (right - exact).abs() < 1e-14, "{left} {right} {exact}");
        let both = integrate_interval(0.5, 0.5 + 1e-3, 8, true, true, 12, &|u: f64| u);
        assert!((both - ((0.501f64).powi(2) - 0.25) / 2.0).abs() < 1e-16);
    }
}
