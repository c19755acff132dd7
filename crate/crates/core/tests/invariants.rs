use std::sync::{Arc, OnceLock};

use gibbs_tree::construction::{uniqueness_phi_prime, ROOT_TOL};
use gibbs_tree::*;
use proptest::prelude::*;

fn rule() -> Arc<QuadratureRule> {
    static RULE: OnceLock<Arc<QuadratureRule>> = OnceLock::new();
    RULE.get_or_init(|| Arc::new(build_rule(RuleKind::default()).unwrap())).clone()
}

fn handle_k2() -> &'static MeasureHandle {
    static H: OnceLock<MeasureHandle> = OnceLock::new();
    H.get_or_init(|| {
        let sol = analytic_solution(SolutionKind::K2F2, None).unwrap();
        MeasureHandle::from_solution(Kernel::K2Explicit, rule(), 2, &sol, 1e-8).unwrap()
    })
}

fn construction(i: usize) -> Construction {
    match i {
        0 => Construction::K2,
        1 => Construction::K3,
        _ => Construction::general(i + 2, i + 3, ROOT_TOL).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// For an eigenfunction `c·f` of `H_k`, `eigen_to_fixed` then
    /// `fixed_to_eigen` returns it normalized to 1 at the origin.
    #[test]
    fn eigen_fixed_round_trip(which in 0usize..5, second in any::<bool>(), scale in 0.1f64..10.0) {
        let c = construction(which);
        let kernel = c.kernel().unwrap();
        let sol = c.solutions().unwrap()[second as usize];
        let r = rule();
        let f = sol.to_grid(r.clone()).map(move |v| scale * v);
        let k = c.k();
        let h = eigen_to_fixed(&f, k).unwrap();
        let pair = fixed_to_eigen(&kernel, &r, &h, k, 1e-9).unwrap();
        let f0 = f.value_at(0.0);
        let expected = f.map(move |v| v / f0);
        prop_assert!(pair.function.sup_distance(&expected).unwrap() <= 1e-9);
        // and back: the fixed point is reproduced
        let h2 = eigen_to_fixed(&pair.function, k).unwrap();
        prop_assert!(h2.sup_distance(&h).unwrap() <= 1e-9);
        prop_assert!((pair.lambda0 - f0.powi(1 - k as i32) * scale.powi(k as i32 - 1)).abs() < 1e-8 * pair.lambda0);
    }

    #[test]
    fn phi_prime_positive(k in 2usize..=10, x in 1e-6f64..=10.0) {
        prop_assert!(uniqueness_phi_prime(k, x) > 0.0);
    }

    #[test]
    fn records_are_valid(k in 2usize..=12, dn in 1usize..=40) {
        let n = k + dn;
        let rec = ConstructionRecord::new(k, n, ROOT_TOL).unwrap();
        prop_assert!(rec.xi > 0.0 && rec.xi < 1.0);
        prop_assert!(rec.root_residual <= 1e-12);
        prop_assert!(rec.beta_identity_residual() <= 1e-10);
        prop_assert!((rec.alpha - rec.xi.powi(n as i32 - 1)).abs() <= 1e-15);
        prop_assert_eq!(rec.admissible, rec.gamma.abs() < 4.0);
        let p = eval_p(k, n, rec.xi).unwrap();
        let q = eval_q(k, n, rec.xi).unwrap();
        prop_assert!((p - q).abs() <= 1e-12);
    }

    #[test]
    fn transition_density_is_normalized(t in 0.0f64..=1.0) {
        let h = handle_k2();
        let mass = rule().integrate(|u| h.transition_density(t, u)).unwrap();
        prop_assert!((mass - 1.0).abs() < 1e-10);
        let mut last = 0.0;
        for i in 0..=100 {
            let c = h.transition_cdf(t, i as f64 / 100.0);
            prop_assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn sampled_spins_lie_in_unit_interval(v in 0.0f64..1.0, t in 0.0f64..=1.0) {
        let h = handle_k2();
        let mut c = vec![0.0; 2];
        let u = h.sample_child(t, v, &mut c);
        prop_assert!((0.0..=1.0).contains(&u));
        prop_assert!((0.0..=1.0).contains(&h.sample_root(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Two distinct positive fixed points for every admissible record.
    #[test]
    fn admissible_records_carry_two_solutions(k in 4usize..=8, dn in 1usize..=30) {
        let rec = ConstructionRecord::new(k, k + dn, ROOT_TOL).unwrap();
        prop_assume!(rec.admissible);
        let c = Construction::General(rec.clone());
        let kernel = c.kernel().unwrap();
        let r = rule();
        let [f0, f1] = c.solutions().unwrap();
        for sol in [f0, f1] {
            let report = verify_solution(&kernel, &r, k as u32, &sol, 1e-9);
            prop_assert_eq!(report.status, FixedPointStatus::Converged);
        }
        prop_assert!((f1.eval(0.5) - rec.xi).abs() < 1e-15);
        prop_assert!(f1.eval(0.5) != f0.eval(0.5));
    }
}
