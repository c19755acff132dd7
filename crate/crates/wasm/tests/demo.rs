use gibbs_tree_wasm::demo::{curves, gamma_series, root_histogram};

#[test]
fn curves_are_flat_triples() {
    let v = curves("k2", 0, 0, 11).unwrap();
    assert_eq!(v.len(), 33);
    assert_eq!(&v[15..18], &[0.5, 1.0, 0.75]);
    assert_eq!(v[30], 1.0);

    let g = curves("general", 4, 6, 3).unwrap();
    assert_eq!(g[1], 1.0);
    assert!(g[5] > g[2] && g[2] > 0.0);

    assert!(curves("k2", 0, 0, 1).is_err());
    assert!(curves("k7", 0, 0, 10).is_err());
    assert!(curves("general", 2, 5, 10).unwrap_err().contains("not admissible"));
}

#[test]
fn gamma_series_rows() {
    let v = gamma_series(4, 5, 7).unwrap();
    assert_eq!(v.len(), 9);
    assert_eq!((v[0], v[3], v[6]), (5.0, 6.0, 7.0));
    assert!((v[1] - 3.5254726642448566).abs() < 1e-12);
    assert_eq!(v[2], 1.0);
    assert_eq!(gamma_series(2, 3, 4).unwrap()[2], 0.0);
    assert!(gamma_series(4, 4, 9).is_err());
}

#[test]
fn histogram_matches_density() {
    let bins = 20;
    let n = 50_000;
    let v = root_histogram("k2", 0, 0, 1, n, 9, bins).unwrap();
    assert_eq!(v.len(), 2 * bins);
    let (emp, exact) = v.split_at(bins);
    let mass: f64 = exact.iter().sum::<f64>() / bins as f64;
    assert!((mass - 1.0).abs() < 1e-9);
    for (e, x) in emp.iter().zip(exact) {
        // binomial standard error of a bin density
        let p = x / bins as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt() * bins as f64;
        assert!((e - x).abs() < 5.0 * se + 1e-12, "{e} vs {x}");
    }
    // the constant solution gives a symmetric density
    let sym = root_histogram("k2", 0, 0, 0, 10, 1, bins).unwrap();
    for b in 0..bins {
        assert!((sym[bins + b] - sym[2 * bins - 1 - b]).abs() < 1e-9);
    }
    assert!(root_histogram("k2", 0, 0, 2, 10, 1, bins).is_err());
    assert_eq!(root_histogram("k3", 0, 0, 1, 500, 4, 8).unwrap(), root_histogram("k3", 0, 0, 1, 500, 4, 8).unwrap());
}
