//! Interaction kernels `K(t,u)` on `[0,1]^2`.
//!
//! The temperature and coupling never enter: every kernel here is
//! `exp(Jβ ξ_tu)` with `ξ` carrying a factor `1/(βJ)`.

use std::io::Read;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Real `q`-th root for odd `q`: `sign(x) |x|^(1/q)`.
///
/// Odd, continuous and total. Never uses the complex principal branch, so
/// `odd_root(-32.0, 5) == -2.0`.
pub fn odd_root(x: f64, q: u32) -> f64 {
    debug_assert!(q % 2 == 1, "odd_root needs an odd order, got {q}");
    match q {
        1 => x,
        3 => x.cbrt(),
        _ if x == 0.0 => 0.0,
        _ => x.signum() * x.abs().powf(1.0 / q as f64),
    }
}

/// Constants of the `k = 2` construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsK2 {
    /// `(14/15) 4^(1/5)`, the kernel coefficient after splitting the fifth root.
    pub a: f64,
    /// `sqrt(21/5) 2^(1/5) / 4`, the slope of the non-constant fixed point.
    pub b: f64,
    /// `∫ f₂² du = 5b²/(7·4^(1/5)) + 9/16`, which equals `3/4`.
    pub gamma: f64,
}

impl ConstantsK2 {
    pub fn new() -> Self {
        let fifth_root_4 = 4f64.powf(0.2);
        let a = 14.0 / 15.0 * fifth_root_4;
        let b = (21.0f64 / 5.0).sqrt() * 2f64.powf(0.2) / 4.0;
        let gamma = 5.0 * b * b / (7.0 * fifth_root_4) + 9.0 / 16.0;
        Self { a, b, gamma }
    }
}

impl Default for ConstantsK2 {
    fn default() -> Self {
        Self::new()
    }
}

/// Constants of the `k = 3` construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsK3 {
    /// `sqrt(57/17) / 2`
    pub a: f64,
    /// `sqrt(33/119) / 2`
    pub b: f64,
}

impl ConstantsK3 {
    pub fn new() -> Self {
        Self { a: 0.5 * (57.0f64 / 17.0).sqrt(), b: 0.5 * (33.0f64 / 119.0).sqrt() }
    }
}

impl Default for ConstantsK3 {
    fn default() -> Self {
        Self::new()
    }
}

/// Coefficient of the separated fifth-root term of the `k = 2` kernel.
fn k2_scale() -> f64 {
    ConstantsK2::new().a
}

/// Coefficient of the separated seventh-root term of the `k = 3` kernel.
fn k3_scale() -> f64 {
    0.5 * 4f64.powf(1.0 / 7.0)
}

/// A kernel sampled on a rectangular grid, evaluated by bilinear
/// interpolation. The grids cover `[0,1]` and the table is symmetric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableKernel {
    grid: Vec<f64>,
    /// Row-major, `values[i * n + j] = K(grid[i], grid[j])`.
    values: Vec<f64>,
}

impl TableKernel {
    /// Builds a table kernel from a t-grid, a u-grid and row-major values.
    ///
    /// The grids must coincide, be strictly increasing and run from 0 to 1.
    /// Asymmetry is removed by averaging with the transpose; a warning is
    /// logged when it exceeds `1e-10`.
    pub fn new(t_grid: Vec<f64>, u_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = t_grid.len();
        if n < 2 {
            return Err(Error::InvalidKernel("table needs at least two grid points".into()));
        }
        if u_grid.len() != n || t_grid.iter().zip(&u_grid).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::InvalidKernel("t-grid and u-grid must coincide".into()));
        }
        if values.len() != n * n {
            return Err(Error::InvalidKernel(format!("expected {} table values, got {}", n * n, values.len())));
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKernel("grid must be strictly increasing".into()));
        }
        if t_grid[0] != 0.0 || t_grid[n - 1] != 1.0 {
            return Err(Error::InvalidKernel("grid must start at 0 and end at 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("table contains non-finite values".into()));
        }

        let mut asymmetry = 0.0f64;
        let mut sym = values.clone();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                asymmetry = asymmetry.max((a - b).abs());
                sym[i * n + j] = 0.5 * (a + b);
            }
        }
        if asymmetry > 1e-10 {
            log::warn!("kernel table asymmetric by {asymmetry:e}; symmetrized");
        }
        if let Some(min) = sym.iter().copied().reduce(f64::min) {
            if min <= 0.0 {
                return Err(Error::InvalidKernel(format!("kernel must be strictly positive, table minimum is {min}")));
            }
        }
        Ok(Self { grid: t_grid, values: sym })
    }

    /// Reads the CSV layout: a header row whose first cell is a label and
    /// whose remaining cells are the u-grid, then one row per t-grid value
    /// (first column) followed by the kernel values.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(reader);
        let mut records = rdr.records();
        let header = records.next().ok_or_else(|| Error::InvalidKernel("empty kernel table".into()))??;
        let u_grid = header.iter().skip(1).map(parse_cell).collect::<Result<Vec<_>>>()?;

        let mut t_grid = Vec::new();
        let mut values = Vec::new();
        for record in records {
            let record = record?;
            let mut cells = record.iter();
            let t = cells.next().ok_or_else(|| Error::InvalidKernel("empty row".into())).and_then(parse_cell)?;
            let row = cells.map(parse_cell).collect::<Result<Vec<_>>>()?;
            if row.len() != u_grid.len() {
                return Err(Error::InvalidKernel(format!(
                    "row t = {t} has {} values, header has {}",
                    row.len(),
                    u_grid.len()
                )));
            }
            t_grid.push(t);
            values.extend(row);
        }
        Self::new(t_grid, u_grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Index `i` of the grid cell `[grid[i], grid[i+1]]` holding `x` and
    /// the interpolation weight of the right end.
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.grid.len();
        let i = self.grid.partition_point(|&g| g <= x).clamp(1, n - 1) - 1;
        let w = ((x - self.grid[i]) / (self.grid[i + 1] - self.grid[i])).clamp(0.0, 1.0);
        (i, w)
    }

    fn row_value(&self, row: usize, u: f64) -> f64 {
        let n = self.grid.len();
        let (j, w) = self.locate(u);
        let r = &self.values[row * n..(row + 1) * n];
        (1.0 - w) * r[j] + w * r[j + 1]
    }

    fn value(&self, t: f64, u: f64) -> f64 {
        let (i, w) = self.locate(t);
        (1.0 - w) * self.row_value(i, u) + w * self.row_value(i + 1, u)
    }

    fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn parse_cell(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::InvalidKernel(format!("cannot parse '{s}' as a number")))
}

/// Symmetric, strictly positive, bounded kernel on `[0,1]^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "variant")]
pub enum Kernel {
    /// `1 + (14/15) (4(t-1/2)(u-1/2))^(1/5)`
    K2Explicit,
    /// `1 + (1/2) (4(t-1/2)(u-1/2))^(1/7)`
    K3Explicit,
    /// `1 + γ (t-1/2)(u-1/2)`, positive iff `|γ| < 4`.
    LinearFamily {
        gamma: f64,
    },
    UserTable(Arc<TableKernel>),
}

impl Kernel {
    /// The linear family member with coupling `gamma`.
    pub fn linear_family(gamma: f64) -> Result<Self> {
        let kernel = Kernel::LinearFamily { gamma };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn from_table(table: TableKernel) -> Self {
        Kernel::UserTable(Arc::new(table))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::LinearFamily { gamma } if !(gamma.abs() < 4.0) => {
                Err(Error::InvalidKernel(format!("linear family needs |gamma| < 4, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Kernel::K2Explicit => "k2-explicit".into(),
            Kernel::K3Explicit => "k3-explicit".into(),
            Kernel::LinearFamily { gamma } => format!("linear-family(gamma={gamma})"),
            Kernel::UserTable(t) => format!("user-table({}x{})", t.grid.len(), t.grid.len()),
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, t: f64, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain { t, u });
        }
        self.validate()?;
        Ok(self.value(t, u))
    }

    /// Unchecked evaluation for the hot loops; arguments must lie in `[0,1]`.
    #[inline]
    pub fn value(&self, t: f64, u: f64) -> f64 {
        match self {
            Kernel::K2Explicit => 1.0 + 14.0 / 15.0 * odd_root(4.0 * ((t - 0.5) * (u - 0.5)), 5),
            Kernel::K3Explicit => 1.0 + 0.5 * odd_root(4.0 * ((t - 0.5) * (u - 0.5)), 7),
            Kernel::LinearFamily { gamma } => 1.0 + gamma * ((t - 0.5) * (u - 0.5)),
            Kernel::UserTable(table) => table.value(t, u),
        }
    }

    /// Points of `[0,1]` where `u ↦ K(t,u)` fails to be smooth.
    pub fn singular_points(&self) -> Vec<f64> {
        match self {
            Kernel::K2Explicit | Kernel::K3Explicit => vec![0.5],
            Kernel::LinearFamily { .. } => vec![],
            Kernel::UserTable(table) => table.grid[1..table.grid.len() - 1].to_vec(),
        }
    }

    /// Lower bound on the kernel over `[0,1]^2`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Kernel::K2Explicit => 1.0 - 14.0 / 15.0,
            Kernel::K3Explicit => 0.5,
            Kernel::LinearFamily { gamma } => 1.0 - gamma.abs() / 4.0,
            Kernel::UserTable(table) => table.min_value(),
        }
    }

    /// Rank of the separated form `K(t,u) = Σ_m c_m(t) b_m(u)`.
    pub fn expansion_rank(&self) -> usize {
        match self {
            Kernel::UserTable(table) => table.grid.len(),
            _ => 2,
        }
    }

    /// Writes `c_m(t)` into `out` (length [`Self::expansion_rank`]).
    pub fn expansion_coefficients(&self, t: f64, out: &mut [f64]) {
        match self {
            Kernel::K2Explicit => {
                out[0] = 1.0;
                out[1] = k2_scale() * odd_root(t - 0.5, 5);
            }
            Kernel::K3Explicit => {
                out[0] = 1.0;
                out[1] = k3_scale() * odd_root(t - 0.5, 7);
            }
            Kernel::LinearFamily { gamma } => {
                out[0] = 1.0;
                out[1] = gamma * (t - 0.5);
            }
            Kernel::UserTable(table) => {
                out.iter_mut().for_each(|c| *c = 0.0);
                let (i, w) = table.locate(t);
                out[i] += 1.0 - w;
                out[i + 1] += w;
            }
        }
    }

    /// Basis function `b_m(u)` of the separated form.
    pub fn expansion_basis(&self, m: usize, u: f64) -> f64 {
        match (self, m) {
            (Kernel::UserTable(table), _) => table.row_value(m, u),
            (_, 0) => 1.0,
            (Kernel::K2Explicit, _) => odd_root(u - 0.5, 5),
            (Kernel::K3Explicit, _) => odd_root(u - 0.5, 7),
            (Kernel::LinearFamily { .. }, _) => u - 0.5,
        }
    }
}

/// A kernel together with the temperature `β` and coupling `J` of the
/// Hamiltonian `H(σ) = -J Σ_<x,y> ξ(σ(x), σ(y))`, where `K = exp(Jβ ξ)`.
/// `β` and `J` are carried for reporting only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub kernel: Kernel,
    pub k: u32,
    pub beta: f64,
    pub coupling: f64,
}

impl ModelSpec {
    pub fn new(kernel: Kernel, k: u32, beta: f64, coupling: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(coupling != 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidInput(format!("need β > 0 and J ≠ 0, got β = {beta}, J = {coupling}")));
        }
        Ok(Self { kernel, k, beta, coupling })
    }

    /// `ξ(t,u) = ln K(t,u) / (Jβ)`.
    pub fn interaction(&self, t: f64, u: f64) -> Result<f64> {
        Ok(self.kernel.eval(t, u)?.ln() / (self.beta * self.coupling))
    }
}
