use std::sync::Arc;

use gibbs_tree::construction::smallest_admissible;
use gibbs_tree::gibbs::{ks_critical_value, ks_statistic, ks_two_sample, sample_map};
use gibbs_tree::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 100_000;

fn rule() -> Arc<QuadratureRule> {
    Arc::new(build_rule(RuleKind::default()).unwrap())
}

fn handle(c: &Construction, which: usize) -> MeasureHandle {
    let sol = c.solutions().unwrap()[which];
    MeasureHandle::from_solution(c.kernel().unwrap(), rule(), c.k(), &sol, 1e-8).unwrap()
}

/// `∫_0^x ρ` with a rule split at `x` and at the kernel kink, independent of
/// the sampler's tables.
fn cdf_oracle(h: &MeasureHandle, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut splits = vec![x.min(0.5), x.max(0.5)];
    splits.dedup();
    splits.retain(|&s| s < 1.0);
    let r = build_rule(RuleKind::SingularitySplit { order: 16, panels: 8, splits, grading_levels: 12 }).unwrap();
    r.integrate(|u| if u <= x { h.root_density(u) } else { 0.0 }).unwrap()
}

#[test]
fn root_cdf_matches_quadrature_oracle() {
    for c in [Construction::K2, Construction::K3] {
        let h = handle(&c, 1);
        // grid points of the tables
        for i in 0..=64 {
            let x = i as f64 / 64.0;
            let d = (h.root_cdf(x) - cdf_oracle(&h, x)).abs();
            assert!(d < 1e-9, "{} x={x}: {d:e}", c.label());
        }
        // between grid points the CDF is interpolated linearly; the error
        // peaks in the cells next to the kink at 1/2
        for (x, tol) in [(0.1234567, 1e-8), (0.87654321, 1e-8), (0.4999, 1e-6), (0.5003, 1e-6)] {
            let d = (h.root_cdf(x) - cdf_oracle(&h, x)).abs();
            assert!(d < tol, "{} x={x}: {d:e}", c.label());
        }
    }
}

#[test]
fn root_spin_passes_ks() {
    for c in [Construction::K2, Construction::K3] {
        let h = handle(&c, 1);
        let roots = sample_map(&h, 0, N, 2024, |_, s| s[0]).unwrap();
        let d = ks_statistic(&roots, |x| h.root_cdf(x));
        assert!(d < ks_critical_value(N as f64, 0.01), "{}: D = {d}", c.label());
    }
}

#[test]
fn constant_law_child_follows_kernel_row() {
    let h = handle(&Construction::K2, 0);
    let t = 0.1;
    // ∫_0^u K(t,s) ds = u + (14/15) (4(t-1/2))^(1/5) (5/6) (|u-1/2|^(6/5) - 2^(-6/5))
    let cdf = |u: f64| {
        u + 14.0 / 15.0 * odd_root(4.0 * (t - 0.5), 5) * 5.0 / 6.0 * ((u - 0.5).abs().powf(1.2) - 0.5f64.powf(1.2))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut c = vec![0.0; 2];
    let kids: Vec<f64> = (0..N).map(|_| h.sample_child(t, rng.random::<f64>(), &mut c)).collect();
    let d = ks_statistic(&kids, cdf);
    assert!(d < ks_critical_value(N as f64, 0.01), "D = {d}");
    // and it is not uniform
    assert!(ks_statistic(&kids, |u| u) > 5.0 * ks_critical_value(N as f64, 0.01));
}

#[test]
fn ball_sampling_is_deterministic() {
    let h = handle(&Construction::K3, 1);
    let a = sample_ball(&h, 4, 99).unwrap();
    let b = sample_ball(&h, 4, 99).unwrap();
    assert_eq!(a, b);
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_ne!(a.spins, sample_ball(&h, 4, 100).unwrap().spins);
    assert!(a.spins.iter().all(|s| (0.0..=1.0).contains(s)));
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("vertex_id,parent_id,depth,spin\n0,,0,"));
    assert_eq!(text.lines().count(), 1 + a.ball.len());
}

#[test]
fn siblings_are_conditionally_independent() {
    let h = handle(&Construction::K2, 1);
    let rows = sample_map(&h, 1, N, 31, |_, s| (s[0], s[1], s[2])).unwrap();
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let bins = 50;
    let per = N / bins;
    let mut weighted = 0.0;
    for b in 0..bins {
        let chunk = &sorted[b * per..(b + 1) * per];
        let n = chunk.len() as f64;
        let (mx, my) = chunk.iter().fold((0.0, 0.0), |(x, y), r| (x + r.1 / n, y + r.2 / n));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for r in chunk {
            sxy += (r.1 - mx) * (r.2 - my);
            sxx += (r.1 - mx).powi(2);
            syy += (r.2 - my).powi(2);
        }
        weighted += sxy / (sxx * syy).sqrt() / bins as f64;
    }
    // pooled within-bin correlation, standard error about 1/sqrt(N)
    assert!(weighted.abs() < 4.0 / (N as f64).sqrt(), "{weighted}");

    // unconditionally the siblings are correlated through the parent
    let stats = marginal_stats(&h, 1, N, 31).unwrap();
    let corr = stats.parent_child_correlation.unwrap();
    assert!(corr.value > 5.0 * corr.std_error, "{corr:?}");
}

#[test]
fn neighbours_of_the_root_share_one_marginal() {
    let h = handle(&Construction::K3, 1);
    let rows = sample_map(&h, 1, N, 8, |_, s| (s[1], s[2], s[4])).unwrap();
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let crit = ks_critical_value(N as f64 / 2.0, 0.01);
    assert!(ks_two_sample(&a, &b) < crit);
    assert!(ks_two_sample(&a, &c) < crit);
    // stationarity: a neighbour of the root has the root marginal
    assert!(ks_statistic(&a, |x| h.root_cdf(x)) < ks_critical_value(N as f64, 0.01));
}

#[test]
fn marginal_stats_examples() {
    let mu1 = handle(&Construction::K2, 0);
    let s1 = marginal_stats(&mu1, 2, N, 3).unwrap();
    assert!((s1.root.mean - 0.5).abs() < 3.0 * s1.root.std_error);
    assert!((s1.quadrature_root_mean - 0.5).abs() < 1e-12);

    let mu2 = handle(&Construction::K2, 1);
    let s2 = marginal_stats(&mu2, 2, N, 3).unwrap();
    assert!(s2.separation.sigma_from_quadrature < 3.0, "{:?}", s2.separation);
    assert!(s2.separation.sigma_from_symmetric > 5.0);
    assert!((s2.quadrature_root_mean - 0.5).abs() > 0.1);
    // every vertex carries the root marginal
    let shell1 = s2.shell1.unwrap();
    assert!((shell1.mean - s2.quadrature_root_mean).abs() < 3.0 * shell1.std_error);
    assert!((s2.boundary.mean - s2.quadrature_root_mean).abs() < 3.0 * s2.boundary.std_error);

    let rec = smallest_admissible(4, 1, 60, 1e-12).unwrap().remove(0);
    let general = handle(&Construction::General(rec), 1);
    let s3 = marginal_stats(&general, 0, N, 3).unwrap();
    assert!(s3.separation.sigma_from_quadrature < 3.0, "{:?}", s3.separation);
}

#[test]
fn symmetric_measure_falls_back_to_third_moment() {
    let s = marginal_stats(&handle(&Construction::K3, 0), 0, 20_000, 1).unwrap();
    assert_eq!(s.separation.statistic, gibbs_tree::gibbs::Statistic::RootThirdMoment);
    assert!(s.separation.sigma_from_symmetric < 4.0);
}

#[test]
fn measures_separate_for_every_construction() {
    let mut constructions = vec![Construction::K2, Construction::K3];
    for k in [4, 5, 6] {
        for rec in smallest_admissible(k, 2, k + 60, 1e-12).unwrap() {
            constructions.push(Construction::General(rec));
        }
    }
    for c in &constructions {
        let s = marginal_stats(&handle(c, 1), 0, N, 77).unwrap();
        assert!(s.separation.sigma_from_symmetric > 5.0, "{}: {:?}", c.label(), s.separation);
    }
}

#[test]
fn stats_json_is_reproducible() {
    let h = handle(&Construction::K2, 1);
    let a = serde_json::to_string(&marginal_stats(&h, 3, 5000, 12).unwrap()).unwrap();
    let b = serde_json::to_string(&marginal_stats(&h, 3, 5000, 12).unwrap()).unwrap();
    assert_eq!(a, b);
}
