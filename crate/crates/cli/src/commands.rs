//! The four subcommands. Each returns the exit code and the bytes to emit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use gibbs_tree::construction::{trend_summary, DiagnosticRow, TrendSummary};
use gibbs_tree::gibbs::{HandleDiagnostics, Statistic};
use gibbs_tree::{
    asymptotic_diagnostics, build_rule, eigen_to_fixed, fixed_to_eigen, marginal_stats, sample_ball, verify_solution,
    AnalyticSolution, Construction, FixedPointStatus, MarginalStats, MeasureHandle, QuadratureRule,
};
use log::info;
use serde::Serialize;

use crate::config::{ConstructionName, Format, RunConfig};
use crate::exit::{CliError, OK, VERIFICATION_FAILURE};

/// Rows at the end of a sweep checked for a decreasing `|γ - 12/k|`.
pub const TREND_WINDOW: usize = 10;
/// Standard errors needed to call two measures distinct.
pub const SEPARATION_SIGMA: f64 = 5.0;
/// Rows of the curve table, on a uniform grid of `[0,1]`.
pub const CURVE_POINTS: usize = 1001;

pub struct Output {
    pub code: i32,
    pub body: Vec<u8>,
}

fn rule(cfg: &RunConfig) -> Result<Arc<QuadratureRule>, CliError> {
    Ok(Arc::new(build_rule(cfg.quadrature.rule_kind())?))
}

fn construction(cfg: &RunConfig) -> Result<Construction, CliError> {
    match (cfg.construction, cfg.k, cfg.n) {
        (Some(ConstructionName::K2), ..) => Ok(Construction::K2),
        (Some(ConstructionName::K3), ..) => Ok(Construction::K3),
        (None, Some(k), Some(n)) => Ok(Construction::general(k, n, cfg.root_tol)?),
        (None, Some(_), None) => Err(CliError::precondition("--k needs a single --n here")),
        (None, None, _) => Err(CliError::precondition("name a model with --construction or --k/--n")),
    }
}

fn csv_header(cfg: &RunConfig) -> String {
    format!("# config: {}\n", cfg.to_json_line())
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

#[derive(Debug, Serialize)]
pub struct SolutionCheck {
    pub solution: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub status: FixedPointStatus,
    /// Eigenvalue of `H_k f = λ f`.
    pub lambda: f64,
    /// `(W h)(0)` for the boundary law `h = (f / f(0))^k`.
    pub lambda0: f64,
    pub boundary_law_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport<'a> {
    pub config: &'a RunConfig,
    pub construction: Construction,
    pub kernel: String,
    pub solutions: Vec<SolutionCheck>,
    pub passed: bool,
}

pub fn verify(cfg: &RunConfig) -> Result<Output, CliError> {
    let c = construction(cfg)?;
    let rule = rule(cfg)?;
    let kernel = c.kernel()?;
    let mut checks = Vec::new();
    for sol in c.solutions()? {
        let report = verify_solution(&kernel, &rule, c.k(), &sol, cfg.tol);
        let h = eigen_to_fixed(&sol.to_grid(rule.clone()), c.k())?;
        let pair = fixed_to_eigen(&kernel, &rule, &h, c.k(), f64::INFINITY)?;
        info!("{} {}: residual {:e}", c.label(), sol.name(), report.final_residual_sup);
        checks.push(SolutionCheck {
            solution: sol.name(),
            residual: report.final_residual_sup,
            tolerance: cfg.tol,
            status: report.status,
            lambda: report.lambda.unwrap_or(1.0),
            lambda0: pair.lambda0,
            boundary_law_residual: pair.fixed_point_residual,
        });
    }
    let passed = checks.iter().all(|c| c.status == FixedPointStatus::Converged);
    let code = if passed { OK } else { VERIFICATION_FAILURE };
    let body = match cfg.format {
        Format::Json => json(&VerifyReport {
            config: cfg,
            construction: c.clone(),
            kernel: kernel.name(),
            solutions: checks,
            passed,
        }),
        Format::Csv => {
            let mut s = csv_header(cfg);
            s.push_str("construction,solution,residual,tolerance,status,lambda,lambda0,boundary_law_residual\n");
            for ch in &checks {
                let status = serde_json::to_value(ch.status).expect("status serializes");
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    c.label(),
                    ch.solution,
                    num(ch.residual),
                    num(ch.tolerance),
                    status.as_str().unwrap_or_default(),
                    num(ch.lambda),
                    num(ch.lambda0),
                    num(ch.boundary_law_residual)
                );
            }
            let _ = writeln!(s, "# passed: {passed}");
            s.into_bytes()
        }
    };
    Ok(Output { code, body })
}

#[derive(Debug, Serialize)]
pub struct SweepReport<'a> {
    pub config: &'a RunConfig,
    pub rows: Vec<DiagnosticRow>,
    pub trend: TrendSummary,
}

fn sweep_k(cfg: &RunConfig) -> Result<usize, CliError> {
    if cfg.construction.is_some() {
        return Err(CliError::precondition("sweeps run over the general family; use --k"));
    }
    cfg.k.ok_or_else(|| CliError::precondition("--k is required"))
}

fn sweep_rows(cfg: &RunConfig, k: usize) -> Vec<DiagnosticRow> {
    let ns = cfg.sweep_ns(k);
    info!("solving k = {k} for {} values of n", ns.len());
    asymptotic_diagnostics(k, &ns, cfg.root_tol)
}

pub fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let k = sweep_k(cfg)?;
    let rows = sweep_rows(cfg, k);
    let trend = trend_summary(k, &rows, TREND_WINDOW);
    let body = match cfg.format {
        Format::Json => json(&SweepReport { config: cfg, rows, trend }),
        Format::Csv => {
            let mut s = csv_header(cfg);
            s.push_str("k,n,xi,alpha,beta,gamma,admissible,residual\n");
            for row in &rows {
                match &row.record {
                    Some(r) => {
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{},{},{}",
                            r.k,
                            r.n,
                            num(r.xi),
                            num(r.alpha),
                            num(r.beta),
                            num(r.gamma),
                            r.admissible,
                            num(r.root_residual)
                        );
                    }
                    None => {
                        let _ = writeln!(s, "{},{},,,,,false,", row.k, row.n);
                    }
                }
            }
            for row in rows.iter().filter(|r| r.error.is_some()) {
                let _ = writeln!(s, "# error n={}: {}", row.n, row.error.as_deref().unwrap_or_default());
            }
            let _ = writeln!(
                s,
                "# trend: limit={} last_n={} last_deviation={} decreasing_over_last_{}={}",
                num(trend.limit),
                trend.last_n.map(|n| n.to_string()).unwrap_or_default(),
                opt_num(trend.last_deviation),
                trend.window,
                trend.decreasing_tail
            );
            s.into_bytes()
        }
    };
    Ok(Output { code: OK, body })
}

#[derive(Debug, Serialize)]
pub struct MeasureReport {
    pub solution: &'static str,
    pub diagnostics: HandleDiagnostics,
    pub stats: MarginalStats,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub statistic: Statistic,
    /// Second measure minus first.
    pub difference: f64,
    pub std_error: f64,
    pub sigma: f64,
    pub threshold_sigma: f64,
    pub distinct: bool,
}

#[derive(Debug, Serialize)]
pub struct SampleReport<'a> {
    pub config: &'a RunConfig,
    pub construction: Construction,
    pub measures: Vec<MeasureReport>,
    pub comparison: Comparison,
}

fn compare(a: &MarginalStats, b: &MarginalStats) -> Comparison {
    let statistic = b.separation.statistic;
    let (ea, eb) = match statistic {
        Statistic::RootMean => (a.root, b.root),
        Statistic::RootThirdMoment => (a.root_third_moment, b.root_third_moment),
    };
    let difference = eb.mean - ea.mean;
    let std_error = (ea.std_error.powi(2) + eb.std_error.powi(2)).sqrt();
    let sigma = difference.abs() / std_error;
    Comparison {
        statistic,
        difference,
        std_error,
        sigma,
        threshold_sigma: SEPARATION_SIGMA,
        distinct: sigma >= SEPARATION_SIGMA,
    }
}

fn write_spins(cfg: &RunConfig, dir: &Path, sol: &AnalyticSolution, handle: &MeasureHandle) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(format!("{}.csv", sol.name()));
    let mut buf = csv_header(cfg).into_bytes();
    sample_ball(handle, cfg.radius, cfg.seed)?.write_csv(&mut buf)?;
    std::fs::write(&path, buf).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn sample(cfg: &RunConfig) -> Result<Output, CliError> {
    let c = construction(cfg)?;
    let rule = rule(cfg)?;
    let kernel = c.kernel()?;
    let mut measures = Vec::new();
    for sol in c.solutions()? {
        let handle = MeasureHandle::from_solution(kernel.clone(), rule.clone(), c.k(), &sol, cfg.tol)?;
        info!("{} {}: {:?}", c.label(), sol.name(), handle.diagnostics());
        let stats = marginal_stats(&handle, cfg.radius, cfg.samples, cfg.seed)?;
        if let Some(dir) = &cfg.spins_out {
            write_spins(cfg, dir, &sol, &handle)?;
        }
        measures.push(MeasureReport { solution: sol.name(), diagnostics: *handle.diagnostics(), stats });
    }
    let comparison = compare(&measures[0].stats, &measures[1].stats);
    let body = match cfg.format {
        Format::Json => json(&SampleReport { config: cfg, construction: c, measures, comparison }),
        Format::Csv => {
            let mut s = csv_header(cfg);
            s.push_str("solution,root_mean,root_mean_se,shell1_mean,boundary_mean,root_third_moment,quadrature_root_mean,sigma_from_symmetric,sigma_from_quadrature\n");
            for m in &measures {
                let st = &m.stats;
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    m.solution,
                    num(st.root.mean),
                    num(st.root.std_error),
                    opt_num(st.shell1.map(|e| e.mean)),
                    num(st.boundary.mean),
                    num(st.root_third_moment.mean),
                    num(st.quadrature_root_mean),
                    num(st.separation.sigma_from_symmetric),
                    num(st.separation.sigma_from_quadrature)
                );
            }
            let _ = writeln!(
                s,
                "# comparison: difference={} std_error={} sigma={} distinct={}",
                num(comparison.difference),
                num(comparison.std_error),
                num(comparison.sigma),
                comparison.distinct
            );
            s.into_bytes()
        }
    };
    Ok(Output { code: OK, body })
}

#[derive(Debug, Serialize)]
pub struct Table<'a> {
    pub config: &'a RunConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn table_output(cfg: &RunConfig, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Vec<u8> {
    match cfg.format {
        Format::Json => json(&Table { config: cfg, columns, rows }),
        Format::Csv => {
            let mut s = csv_header(cfg);
            s.push_str(&columns.join(","));
            s.push('\n');
            for row in &rows {
                let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s.into_bytes()
        }
    }
}

/// Both solution curves on a uniform grid, or the `(n, γ)` series of a
/// sweep when only `--k` is given.
pub fn plotdata(cfg: &RunConfig) -> Result<Output, CliError> {
    if cfg.construction.is_some() || cfg.n.is_some() {
        let c = construction(cfg)?;
        let [a, b] = c.solutions()?;
        let rows = (0..CURVE_POINTS)
            .map(|i| {
                let t = i as f64 / (CURVE_POINTS - 1) as f64;
                vec![t, a.eval(t), b.eval(t)]
            })
            .collect();
        let columns = vec!["t".to_string(), a.name().to_string(), b.name().to_string()];
        return Ok(Output { code: OK, body: table_output(cfg, columns, rows) });
    }
    let k = sweep_k(cfg)?;
    let rows =
        sweep_rows(cfg, k).into_iter().filter_map(|r| r.record.map(|rec| vec![rec.n as f64, rec.gamma])).collect();
    Ok(Output { code: OK, body: table_output(cfg, vec!["n".into(), "gamma".into()], rows) })
}
