//! Browser bindings: solution curves, the coupling series of the general
//! family, and root-spin histograms under either measure.
//!
//! Every export returns a flat `Vec<f64>`; the layout is given on each
//! function. The plain functions in [`demo`] carry the logic and run natively.

use wasm_bindgen::prelude::*;

pub mod demo {
    use std::sync::Arc;

    use gibbs_tree::gibbs::sample_map;
    use gibbs_tree::{build_rule, Construction, ConstructionRecord, MeasureHandle, RuleKind};

    /// Root-finding tolerance for the general family.
    const ROOT_TOL: f64 = 1e-12;
    /// Fixed-point tolerance a handle must meet.
    const HANDLE_TOL: f64 = 1e-8;
    pub const MAX_SAMPLES: usize = 1_000_000;
    pub const MAX_BINS: usize = 1000;

    /// `"k2"`, `"k3"`, or `"general"` with `(k, n)`.
    pub fn construction(name: &str, k: u32, n: u32) -> Result<Construction, String> {
        match name {
            "k2" => Ok(Construction::K2),
            "k3" => Ok(Construction::K3),
            "general" => Construction::general(k as usize, n as usize, ROOT_TOL).map_err(|e| e.to_string()),
            other => Err(format!("unknown construction {other:?}")),
        }
    }

    /// `points` rows of `(t, first solution, second solution)`, flattened.
    pub fn curves(name: &str, k: u32, n: u32, points: usize) -> Result<Vec<f64>, String> {
        if points < 2 {
            return Err("need at least two points".into());
        }
        let [a, b] = construction(name, k, n)?.solutions().map_err(|e| e.to_string())?;
        Ok((0..points)
            .flat_map(|i| {
                let t = i as f64 / (points - 1) as f64;
                [t, a.eval(t), b.eval(t)]
            })
            .collect())
    }

    /// `(n, γ(k;n), admissible as 0/1)` for `n` in `n_start..=n_end`,
    /// flattened. Rows without a root are skipped.
    pub fn gamma_series(k: u32, n_start: u32, n_end: u32) -> Result<Vec<f64>, String> {
        if k < 2 || n_start <= k || n_end < n_start {
            return Err(format!("need k >= 2 and k < n_start <= n_end, got k = {k}, {n_start}..{n_end}"));
        }
        Ok((n_start..=n_end)
            .filter_map(|n| ConstructionRecord::new(k as usize, n as usize, ROOT_TOL).ok())
            .flat_map(|r| [r.n as f64, r.gamma, if r.admissible { 1.0 } else { 0.0 }])
            .collect())
    }

    /// Root-spin histogram under the measure of solution `which` (0 for the
    /// constant one, 1 for the other): `bins` sampled densities followed by
    /// `bins` exact bin averages of the root density.
    pub fn root_histogram(
        name: &str,
        k: u32,
        n: u32,
        which: usize,
        samples: usize,
        seed: u64,
        bins: usize,
    ) -> Result<Vec<f64>, String> {
        if which > 1 || samples == 0 || samples > MAX_SAMPLES || bins == 0 || bins > MAX_BINS {
            return Err(format!("need which in {{0,1}}, 1..={MAX_SAMPLES} samples and 1..={MAX_BINS} bins"));
        }
        let c = construction(name, k, n)?;
        let sol = c.solutions().map_err(|e| e.to_string())?[which];
        let rule = Arc::new(build_rule(RuleKind::default()).map_err(|e| e.to_string())?);
        let kernel = c.kernel().map_err(|e| e.to_string())?;
        let handle = MeasureHandle::from_solution(kernel, rule, c.k(), &sol, HANDLE_TOL).map_err(|e| e.to_string())?;
        let roots = sample_map(&handle, 0, samples, seed, |_, s| s[0]).map_err(|e| e.to_string())?;

        let width = 1.0 / bins as f64;
        let mut out = vec![0.0; 2 * bins];
        for r in roots {
            let b = ((r * bins as f64) as usize).min(bins - 1);
            out[b] += 1.0 / (samples as f64 * width);
        }
        for b in 0..bins {
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            out[bins + b] = (handle.root_cdf(hi) - handle.root_cdf(lo)) / width;
        }
        Ok(out)
    }
}

/// See [`demo::curves`].
#[wasm_bindgen]
pub fn curves(construction: &str, k: u32, n: u32, points: usize) -> Result<Vec<f64>, JsError> {
    demo::curves(construction, k, n, points).map_err(|e| JsError::new(&e))
}

/// See [`demo::gamma_series`].
#[wasm_bindgen(js_name = gammaSeries)]
pub fn gamma_series(k: u32, n_start: u32, n_end: u32) -> Result<Vec<f64>, JsError> {
    demo::gamma_series(k, n_start, n_end).map_err(|e| JsError::new(&e))
}

/// See [`demo::root_histogram`]. `seed` is taken as a JS number.
#[wasm_bindgen(js_name = rootHistogram)]
pub fn root_histogram(
    construction: &str,
    k: u32,
    n: u32,
    which: usize,
    samples: usize,
    seed: f64,
    bins: usize,
) -> Result<Vec<f64>, JsError> {
    demo::root_histogram(construction, k, n, which, samples, seed as u64, bins).map_err(|e| JsError::new(&e))
}
