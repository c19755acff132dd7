//! Run configuration: defaults, an optional JSON file and command-line
//! flags, merged in that order of increasing priority.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use gibbs_tree::quadrature::RuleKind;
use serde::{Deserialize, Serialize};

use crate::exit::CliError;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_QUAD_ORDER: usize = 16;
pub const DEFAULT_QUAD_PANELS: usize = 64;
pub const DEFAULT_GRADING_LEVELS: usize = 12;
pub const DEFAULT_RADIUS: usize = 3;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0;
/// Sweeps default to `n = k+1 ..= k+SWEEP_SPAN`.
pub const SWEEP_SPAN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ConstructionName {
    K2,
    K3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Inclusive range of `n`, written `a..b` or `a..=b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NRange {
    pub start: usize,
    pub end: usize,
}

impl NRange {
    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).collect()
    }
}

impl FromStr for NRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
        let b = b.strip_prefix('=').unwrap_or(b);
        let start = a.trim().parse().map_err(|e| format!("bad range start {a:?}: {e}"))?;
        let end = b.trim().parse().map_err(|e| format!("bad range end {b:?}: {e}"))?;
        if end < start {
            return Err(format!("empty range {s:?}"));
        }
        Ok(NRange { start, end })
    }
}

impl fmt::Display for NRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl Serialize for NRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A single `n` or a range; `--n 6` and `--n 5..40` both parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NSpec {
    One(usize),
    Range(NRange),
}

impl FromStr for NSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains("..") {
            s.parse().map(NSpec::Range)
        } else {
            s.trim().parse().map(NSpec::One).map_err(|e| format!("bad n {s:?}: {e}"))
        }
    }
}

/// Flags shared by every subcommand. Everything is optional so that unset
/// flags fall through to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Built-in construction
    #[arg(long, value_enum)]
    pub construction: Option<ConstructionName>,
    /// Tree order k of the general family (k >= 2)
    #[arg(long)]
    pub k: Option<usize>,
    /// Degree n, or an inclusive range a..b
    #[arg(long)]
    pub n: Option<NSpec>,
    /// Inclusive range of n for sweeps and gamma series
    #[arg(long = "n-range")]
    pub n_range: Option<NRange>,
    /// Residual tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Gauss-Legendre order per panel
    #[arg(long = "quad-order")]
    pub quad_order: Option<usize>,
    /// Number of panels
    #[arg(long = "quad-panels")]
    pub quad_panels: Option<usize>,
    /// Ball radius for sampling
    #[arg(long)]
    pub radius: Option<usize>,
    /// Number of sampled balls per measure
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout if omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON config file; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the resolved config as JSON to this path
    #[arg(long = "config-out")]
    pub config_out: Option<PathBuf>,
    /// Directory for one sampled configuration per measure (`sample` only)
    #[arg(long = "spins-out")]
    pub spins_out: Option<PathBuf>,
}

/// Contents of a `--config` file. Keys mirror the flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub construction: Option<ConstructionName>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub n_range: Option<NRange>,
    pub tol: Option<f64>,
    pub root_tol: Option<f64>,
    pub quad_order: Option<usize>,
    pub quad_panels: Option<usize>,
    pub quad_splits: Option<Vec<f64>>,
    pub grading_levels: Option<usize>,
    pub radius: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub spins_out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::precondition(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Sweep,
    Sample,
    Plotdata,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadConfig {
    pub order: usize,
    pub panels: usize,
    pub splits: Vec<f64>,
    pub grading_levels: usize,
}

impl QuadConfig {
    pub fn rule_kind(&self) -> RuleKind {
        RuleKind::SingularitySplit {
            order: self.order,
            panels: self.panels,
            splits: self.splits.clone(),
            grading_levels: self.grading_levels,
        }
    }
}

/// Fully resolved configuration, embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub construction: Option<ConstructionName>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub n_range: Option<NRange>,
    pub tol: f64,
    pub root_tol: f64,
    pub quadrature: QuadConfig,
    pub radius: usize,
    pub samples: usize,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub spins_out: Option<PathBuf>,
}

impl RunConfig {
    /// Merges `flags` over `file` over the defaults and checks the result.
    pub fn resolve(command: Command, flags: &Flags, file: FileConfig) -> Result<Self, CliError> {
        let (flag_n, flag_range) = match flags.n {
            Some(NSpec::One(n)) => (Some(n), None),
            Some(NSpec::Range(r)) => (None, Some(r)),
            None => (None, None),
        };
        let flag_range = flags.n_range.or(flag_range);
        let default_format = match command {
            Command::Verify | Command::Sample => Format::Json,
            Command::Sweep | Command::Plotdata => Format::Csv,
        };
        // a flag for one way of naming the model hides the file's other way
        let flags_name_model = flags.construction.is_some() || flags.k.is_some();
        let (construction, k, n) = if flags_name_model {
            (flags.construction, flags.k, flag_n)
        } else {
            (file.construction, file.k, flag_n.or(file.n))
        };
        let n_range = flag_range.or(if flag_n.is_some() { None } else { file.n_range });

        let cfg = RunConfig {
            command,
            construction,
            k,
            n,
            n_range,
            tol: flags.tol.or(file.tol).unwrap_or(DEFAULT_TOL),
            root_tol: file.root_tol.unwrap_or(DEFAULT_ROOT_TOL),
            quadrature: QuadConfig {
                order: flags.quad_order.or(file.quad_order).unwrap_or(DEFAULT_QUAD_ORDER),
                panels: flags.quad_panels.or(file.quad_panels).unwrap_or(DEFAULT_QUAD_PANELS),
                splits: file.quad_splits.unwrap_or_else(|| vec![0.5]),
                grading_levels: file.grading_levels.unwrap_or(DEFAULT_GRADING_LEVELS),
            },
            radius: flags.radius.or(file.radius).unwrap_or(DEFAULT_RADIUS),
            samples: flags.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            format: flags.format.or(file.format).unwrap_or(default_format),
            out: flags.out.clone().or(file.out),
            spins_out: flags.spins_out.clone().or(file.spins_out),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::precondition(msg));
        if self.construction.is_some() && self.k.is_some() {
            return bad("give either --construction or --k, not both".into());
        }
        if let Some(k) = self.k {
            if k < 2 {
                return bad(format!("k must be at least 2, got {k}"));
            }
            if let Some(n) = self.n {
                if n <= k {
                    return bad(format!("n must exceed k = {k}, got {n}"));
                }
            }
            if let Some(r) = self.n_range {
                if r.start <= k {
                    return bad(format!("n-range entries must exceed k = {k}, got {r}"));
                }
            }
        }
        if [self.tol, self.root_tol].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        Ok(())
    }

    /// `n` values of a sweep: the given range, else `k+1 ..= k+30`.
    pub fn sweep_ns(&self, k: usize) -> Vec<usize> {
        self.n_range.unwrap_or(NRange { start: k + 1, end: k + SWEEP_SPAN }).values()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges() {
        assert_eq!("5..40".parse::<NRange>().unwrap(), NRange { start: 5, end: 40 });
        assert_eq!("5..=40".parse::<NRange>().unwrap(), NRange { start: 5, end: 40 });
        assert!("40..5".parse::<NRange>().is_err());
        assert!("5-40".parse::<NRange>().is_err());
        assert_eq!("6".parse::<NSpec>().unwrap(), NSpec::One(6));
        assert!(matches!("5..9".parse::<NSpec>().unwrap(), NSpec::Range(_)));
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file: FileConfig =
            serde_json::from_str(r#"{"k": 4, "n": 6, "seed": 9, "tol": 1e-6, "quad_panels": 32}"#).unwrap();
        let flags = Flags { seed: Some(11), ..Default::default() };
        let cfg = RunConfig::resolve(Command::Verify, &flags, file).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.tol, 1e-6);
        assert_eq!(cfg.quadrature.panels, 32);
        assert_eq!(cfg.quadrature.order, DEFAULT_QUAD_ORDER);
        assert_eq!((cfg.k, cfg.n), (Some(4), Some(6)));
        assert_eq!(cfg.format, Format::Json);
    }

    #[test]
    fn construction_flag_hides_file_k() {
        let file: FileConfig = serde_json::from_str(r#"{"k": 4, "n": 6}"#).unwrap();
        let flags = Flags { construction: Some(ConstructionName::K3), ..Default::default() };
        let cfg = RunConfig::resolve(Command::Verify, &flags, file).unwrap();
        assert_eq!((cfg.construction, cfg.k, cfg.n), (Some(ConstructionName::K3), None, None));
    }

    #[test]
    fn rejects_bad_inputs() {
        let run = |flags: Flags| RunConfig::resolve(Command::Sweep, &flags, FileConfig::default());
        assert_eq!(run(Flags { k: Some(1), ..Default::default() }).unwrap_err().code, 2);
        assert_eq!(run(Flags { k: Some(4), n: Some(NSpec::One(4)), ..Default::default() }).unwrap_err().code, 2);
        assert_eq!(run(Flags { tol: Some(0.0), ..Default::default() }).unwrap_err().code, 2);
        let r = NRange { start: 3, end: 9 };
        assert_eq!(run(Flags { k: Some(4), n_range: Some(r), ..Default::default() }).unwrap_err().code, 2);
        assert!(serde_json::from_str::<FileConfig>(r#"{"kk": 4}"#).is_err());
    }

    #[test]
    fn default_sweep_range() {
        let cfg =
            RunConfig::resolve(Command::Sweep, &Flags { k: Some(4), ..Default::default() }, FileConfig::default())
                .unwrap();
        assert_eq!(cfg.sweep_ns(4), (5..=34).collect::<Vec<_>>());
        assert_eq!(cfg.format, Format::Csv);
    }
}
