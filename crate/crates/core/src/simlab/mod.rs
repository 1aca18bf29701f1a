//! Simulation designs with known truth, the Monte Carlo driver and its
//! bias / coverage / interval-length report.

mod mc;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{ColumnKind, Matrix};
use crate::pilot::logistic;
use crate::posterior::MissingDataset;
use crate::rng::RngStream;

pub use mc::{run_mc, run_replication, MethodOutcome, Profile, ReplicationResult, SimConfig, SimMethod};
pub use report::{format_report, parse_report_csv, MCCell, MCReport, ReportStyle};

/// Raw covariates per row: `x1, x2, x3 ~ N(0, 1)`, `x4 ~ Bernoulli(0.5)`,
/// `x5` uniform on `{1, 2, 3}`.
pub const RAW_COLUMNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Design {
    I,
    II,
    III,
    IV,
}

fn h(x5: f64) -> f64 {
    match x5 as i64 {
        1 => 2.0,
        2 => -1.0,
        3 => -0.5,
        _ => unreachable!("x5 outside {{1, 2, 3}}"),
    }
}

impl Design {
    pub const ALL: [Design; 4] = [Design::I, Design::II, Design::III, Design::IV];

    pub fn name(self) -> &'static str {
        match self {
            Design::I => "I",
            Design::II => "II",
            Design::III => "III",
            Design::IV => "IV",
        }
    }

    /// Index of the propensity score on the logit scale, at a raw row.
    pub fn e(self, x: &[f64]) -> f64 {
        let base = -0.2 * x[0] + 0.4 * x[0] * x[2];
        match self {
            Design::I | Design::II => base,
            Design::III | Design::IV => base + 0.4 * x[1] * x[2],
        }
    }

    pub fn propensity(self, x: &[f64]) -> f64 {
        logistic(self.e(x))
    }

    /// Conditional mean of the outcome at a raw row.
    pub fn m(self, x: &[f64]) -> f64 {
        let (x1, x2, x3, x4, x5) = (x[0], x[1], x[2], x[3], x[4]);
        match self {
            Design::I => 1.0 - 2.0 * x1 - 0.5 * x1 * x1 + x2 + x3 + x4 + h(x5),
            Design::II => 1.0 + x1 * x2 + x1 * x3 + x2 + x4 + h(x5),
            Design::III => 1.0 + x1 * x3 + x2 * x3 + x1 + x4 + h(x5),
            Design::IV => 1.0 + x1 * x3 + x2 * x3 + x2 * x4 + h(x5),
        }
    }

    /// `E[m(X)]` in closed form. `E[h(x5)] = (2 - 1 - 0.5) / 3 = 1/6`.
    pub fn true_mean(self) -> f64 {
        match self {
            Design::I => 1.0 - 0.5 + 0.5 + 1.0 / 6.0,
            Design::II | Design::III => 1.0 + 0.5 + 1.0 / 6.0,
            Design::IV => 1.0 + 1.0 / 6.0,
        }
    }
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Design::I),
            "II" | "2" => Ok(Design::II),
            "III" | "3" => Ok(Design::III),
            "IV" | "4" => Ok(Design::IV),
            _ => Err(invalid("design", format!("unknown design `{s}` (I, II, III, IV)"))),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw `n x 5` covariate matrix.
pub fn gen_covariates(n: usize, rng: &mut RngStream) -> Matrix {
    let mut data = Vec::with_capacity(n * RAW_COLUMNS);
    for _ in 0..n {
        data.push(rng.standard_normal());
        data.push(rng.standard_normal());
        data.push(rng.standard_normal());
        data.push(if rng.bernoulli(0.5) { 1.0 } else { 0.0 });
        data.push((rng.index(3) + 1) as f64);
    }
    Matrix::new(n, RAW_COLUMNS, data).expect("shape")
}

/// Column kinds of [`one_hot`] output.
pub fn model_kinds() -> Vec<ColumnKind> {
    let mut k = vec![ColumnKind::Continuous; 3];
    k.push(ColumnKind::Binary);
    k.extend((0..3).map(|level| ColumnKind::OneHot { group: 0, level }));
    k
}

/// Expands `x5` into three indicator columns.
pub fn one_hot(raw: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(raw.nrows(), 7);
    for i in 0..raw.nrows() {
        let r = raw.row(i);
        let o = out.row_mut(i);
        o[..4].copy_from_slice(&r[..4]);
        o[4 + (r[4] as usize - 1)] = 1.0;
    }
    out
}

/// Simulation-only truth kept beside a dataset; estimators never see it.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    pub raw: Matrix,
    pub y_full: Vec<f64>,
    pub pi: Vec<f64>,
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub data: MissingDataset,
    pub oracle: OracleTable,
}

/// Draws covariates, response indicators at `Ψ(e(x))` and outcomes
/// `N(m(x), 1)` for every row, then hides the outcome where `r = 0`.
pub fn gen_missing_data(n: usize, design: Design, rng: &mut RngStream) -> Result<SimData> {
    let raw = gen_covariates(n, rng);
    let pi: Vec<f64> = raw.rows().map(|r| design.propensity(r)).collect();
    let m: Vec<f64> = raw.rows().map(|r| design.m(r)).collect();
    let r: Vec<f64> = pi.iter().map(|&p| if rng.bernoulli(p) { 1.0 } else { 0.0 }).collect();
    let y_full: Vec<f64> = m.iter().map(|&mi| mi + rng.standard_normal()).collect();
    let y = (0..n).map(|i| (r[i] == 1.0).then_some(y_full[i])).collect();
    let data = MissingDataset::new(one_hot(&raw), model_kinds(), y, r)?;
    Ok(SimData {
        data,
        oracle: OracleTable { raw, y_full, pi, m },
    })
}
