use serde::Serialize;

use super::measure::MeasureHandle;
use super::sampler::sample_map;
use crate::error::{Error, Result};

/// Quadrature means closer to `1/2` than this count as symmetric, and the
/// third central moment is used to tell measures apart instead.
const SYMMETRIC_MEAN_TOL: f64 = 1e-9;

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let variance = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self { mean, variance, std_error: (variance / nf).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `E σ(root)`, symmetric value `1/2`.
    RootMean,
    /// `E (σ(root) - 1/2)^3`, symmetric value `0`.
    RootThirdMoment,
}

/// Distance of a statistic from its value under a spin-flip symmetric
/// measure, in standard errors, and agreement with quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separation {
    pub statistic: Statistic,
    pub symmetric_value: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub quadrature_value: f64,
    /// `|estimate - symmetric_value| / std_error`
    pub sigma_from_symmetric: f64,
    /// `|estimate - quadrature_value| / std_error`
    pub sigma_from_quadrature: f64,
}

/// Monte Carlo summary of the spins on a ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalStats {
    pub k: u32,
    pub radius: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub root: Estimate,
    /// Mean over the `k+1` neighbours of the root.
    pub shell1: Option<Estimate>,
    /// Mean over the vertices at distance `radius`.
    pub boundary: Estimate,
    /// Correlation of the root with its first child.
    pub parent_child_correlation: Option<Correlation>,
    /// `(σ(root) - 1/2)^3`
    pub root_third_moment: Estimate,
    pub quadrature_root_mean: f64,
    pub quadrature_root_third_moment: f64,
    pub separation: Separation,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    root: [f64; 2],
    shell1: [f64; 2],
    boundary: [f64; 2],
    child: [f64; 2],
    cross: f64,
    third: [f64; 2],
}

/// Root, shell and edge statistics from `n_samples` independent balls.
pub fn marginal_stats(handle: &MeasureHandle, radius: usize, n_samples: usize, seed: u64) -> Result<MarginalStats> {
    if n_samples < 1 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let rows = sample_map(handle, radius, n_samples, seed, |ball, spins| {
        let r = spins[0];
        let s1 = (radius >= 1).then(|| ball.shell(1).map(|v| spins[v]).sum::<f64>() / ball.shell(1).len() as f64);
        let b = ball.shell(radius).map(|v| spins[v]).sum::<f64>() / ball.shell(radius).len() as f64;
        let c = (radius >= 1).then(|| spins[1]);
        (r, s1, b, c)
    })?;

    let mut s = Sums::default();
    for &(r, s1, b, c) in &rows {
        s.root[0] += r;
        s.root[1] += r * r;
        let d3 = (r - 0.5).powi(3);
        s.third[0] += d3;
        s.third[1] += d3 * d3;
        s.boundary[0] += b;
        s.boundary[1] += b * b;
        if let (Some(s1), Some(c)) = (s1, c) {
            s.shell1[0] += s1;
            s.shell1[1] += s1 * s1;
            s.child[0] += c;
            s.child[1] += c * c;
            s.cross += r * c;
        }
    }
    let n = n_samples;
    let root = Estimate::from_sums(s.root[0], s.root[1], n);
    let root_third_moment = Estimate::from_sums(s.third[0], s.third[1], n);
    let shell1 = (radius >= 1).then(|| Estimate::from_sums(s.shell1[0], s.shell1[1], n));
    let parent_child_correlation = (radius >= 1 && n > 2).then(|| {
        let child = Estimate::from_sums(s.child[0], s.child[1], n);
        let cov = (s.cross - n as f64 * root.mean * child.mean) / (n as f64 - 1.0);
        let value = cov / (root.variance * child.variance).sqrt();
        Correlation { value, std_error: (1.0 - value * value) / (n as f64 - 3.0).max(1.0).sqrt() }
    });

    let quadrature_root_mean = handle.root_expectation(|t| t)?;
    let quadrature_root_third_moment = handle.root_expectation(|t| (t - 0.5).powi(3))?;
    let separation = if (quadrature_root_mean - 0.5).abs() > SYMMETRIC_MEAN_TOL {
        separation(Statistic::RootMean, 0.5, &root, quadrature_root_mean)
    } else {
        separation(Statistic::RootThirdMoment, 0.0, &root_third_moment, quadrature_root_third_moment)
    };

    Ok(MarginalStats {
        k: handle.k(),
        radius,
        n_samples,
        seed,
        root,
        shell1,
        boundary: Estimate::from_sums(s.boundary[0], s.boundary[1], n),
        parent_child_correlation,
        root_third_moment,
        quadrature_root_mean,
        quadrature_root_third_moment,
        separation,
    })
}

fn separation(statistic: Statistic, symmetric_value: f64, est: &Estimate, quadrature_value: f64) -> Separation {
    Separation {
        statistic,
        symmetric_value,
        estimate: est.mean,
        std_error: est.std_error,
        quadrature_value,
        sigma_from_symmetric: (est.mean - symmetric_value).abs() / est.std_error,
        sigma_from_quadrature: (est.mean - quadrature_value).abs() / est.std_error,
    }
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of the KS statistic at level `alpha` for
/// effective sample size `n` (use `n m / (n + m)` for two samples).
pub fn ks_critical_value(n: f64, alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / n.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_on_exact_quantiles() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_statistic(&xs, |x| x) - 0.5 / n as f64).abs() < 1e-15);
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.5).collect();
        assert!((ks_two_sample(&xs, &shifted) - 0.5).abs() < 2e-3);
        assert!((ks_critical_value(1.0, 0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn estimate_from_sums() {
        let e = Estimate::from_sums(6.0, 14.0, 3);
        assert_eq!(e.mean, 2.0);
        assert!((e.variance - 1.0).abs() < 1e-15);
        assert!((e.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
