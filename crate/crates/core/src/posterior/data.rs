use crate::error::{Error, Result};
use crate::matrix::{ColumnKind, Matrix};

/// Outcome observed only where `r = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingDataset {
    x: Matrix,
    kinds: Vec<ColumnKind>,
    y: Vec<Option<f64>>,
    r: Vec<f64>,
}

fn check_indicator(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|&b| b != 0.0 && b != 1.0) {
        Some(i) => Err(Error::InvalidInput(format!("{name}[{i}] = {} is not 0 or 1", v[i]))),
        None => Ok(()),
    }
}

fn check_kinds(x: &Matrix, kinds: &[ColumnKind]) -> Result<()> {
    if kinds.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: kinds.len(),
        });
    }
    if !x.is_finite() {
        return Err(Error::InvalidInput("covariates contain non-finite values".into()));
    }
    Ok(())
}

impl MissingDataset {
    pub fn new(x: Matrix, kinds: Vec<ColumnKind>, y: Vec<Option<f64>>, r: Vec<f64>) -> Result<Self> {
        check_kinds(&x, &kinds)?;
        let n = x.nrows();
        for len in [y.len(), r.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        check_indicator("r", &r)?;
        for i in 0..n {
            match (r[i] == 1.0, y[i]) {
                (true, None) => return Err(Error::InvalidInput(format!("row {i}: outcome missing where r = 1"))),
                (false, Some(_)) => return Err(Error::InvalidInput(format!("row {i}: outcome present where r = 0"))),
                (true, Some(v)) if !v.is_finite() => {
                    return Err(Error::InvalidInput(format!("row {i}: outcome is not finite")))
                }
                _ => {}
            }
        }
        if !r.contains(&1.0) {
            return Err(Error::InvalidInput("no observed outcomes".into()));
        }
        Ok(Self { x, kinds, y, r })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.r[i] == 1.0).collect()
    }

    /// Outcome of an observed row. Reading an unobserved row is an error.
    pub fn y_observed(&self, i: usize) -> Result<f64> {
        self.y[i].ok_or_else(|| Error::InvalidInput(format!("row {i}: outcome read where r = 0")))
    }

    /// Outcomes with unobserved rows set to 0; only for products that carry
    /// a factor `r`.
    pub(crate) fn y_masked(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.unwrap_or(0.0)).collect()
    }

    /// Copy with `c` added to every observed outcome.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            y: self.y.iter().map(|v| v.map(|y| y + c)).collect(),
            ..self.clone()
        }
    }
}

/// Outcome, binary treatment and covariates for every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentDataset {
    x: Matrix,
    kinds: Vec<ColumnKind>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl TreatmentDataset {
    pub fn new(x: Matrix, kinds: Vec<ColumnKind>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        check_kinds(&x, &kinds)?;
        let n = x.nrows();
        for len in [y.len(), d.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        check_indicator("d", &d)?;
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("row {i}: outcome is not finite")));
        }
        let treated = d.iter().filter(|&&v| v == 1.0).count();
        if treated == 0 || treated == n {
            return Err(Error::InvalidInput("both treatment arms must be nonempty".into()));
        }
        Ok(Self { x, kinds, y, d })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn treated_share(&self) -> f64 {
        self.d.iter().sum::<f64>() / self.n() as f64
    }

    /// The given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.x.select_rows(rows),
            self.kinds.clone(),
            rows.iter().map(|&i| self.y[i]).collect(),
            rows.iter().map(|&i| self.d[i]).collect(),
        )
    }

    /// `[d, x]` with the treatment in column 0; `d` of `None` keeps the
    /// observed treatment, `Some(v)` sets it to `v` for every row.
    pub fn design(&self, d: Option<f64>) -> Matrix {
        let mut m = Matrix::zeros(self.n(), self.x.ncols() + 1);
        for i in 0..self.n() {
            let row = m.row_mut(i);
            row[0] = d.unwrap_or(self.d[i]);
            row[1..].copy_from_slice(self.x.row(i));
        }
        m
    }

    pub fn design_kinds(&self) -> Vec<ColumnKind> {
        let mut k = vec![ColumnKind::Binary];
        k.extend(self.kinds.iter().copied());
        k
    }
}
