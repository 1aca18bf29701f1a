//! Polynomial feature expansion for parametric pilots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ColumnKind, Matrix};

/// Deterministic expansion of a covariate row into regression features.
///
/// Order: intercept, raw columns, squares of continuous columns, pairwise
/// products of raw columns from different groups. With an intercept the
/// first level of each one-hot group is dropped. A one-hot group counts as a
/// single group, so products of its own levels (always zero) are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub intercept: bool,
    pub include_raw: bool,
    pub include_squares: bool,
    pub include_pairwise: bool,
    pub kinds: Vec<ColumnKind>,
}

impl FeatureMap {
    pub fn linear(kinds: Vec<ColumnKind>) -> Self {
        Self {
            intercept: true,
            include_raw: true,
            include_squares: false,
            include_pairwise: false,
            kinds,
        }
    }

    /// Raw columns, squares and pairwise interactions.
    pub fn quadratic(kinds: Vec<ColumnKind>) -> Self {
        Self {
            include_squares: true,
            include_pairwise: true,
            ..Self::linear(kinds)
        }
    }

    pub fn input_dim(&self) -> usize {
        self.kinds.len()
    }

    fn raw_columns(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| !(self.intercept && matches!(k, ColumnKind::OneHot { level: 0, .. })))
            .map(|(j, _)| j)
            .collect()
    }

    fn group(&self, j: usize) -> (bool, usize) {
        match self.kinds[j] {
            ColumnKind::OneHot { group, .. } => (true, group),
            _ => (false, j),
        }
    }

    fn terms(&self) -> Vec<Term> {
        let mut terms = Vec::new();
        if self.intercept {
            terms.push(Term::One);
        }
        let raw = self.raw_columns();
        if self.include_raw {
            terms.extend(raw.iter().map(|&j| Term::Col(j)));
        }
        if self.include_squares {
            terms.extend(
                raw.iter()
                    .filter(|&&j| self.kinds[j] == ColumnKind::Continuous)
                    .map(|&j| Term::Prod(j, j)),
            );
        }
        if self.include_pairwise {
            for (a, &i) in raw.iter().enumerate() {
                for &j in &raw[a + 1..] {
                    if self.group(i) != self.group(j) {
                        terms.push(Term::Prod(i, j));
                    }
                }
            }
        }
        terms
    }

    /// Number of output features; depends only on the kinds and flags.
    pub fn dim(&self) -> usize {
        self.terms().len()
    }

    /// Human-readable feature names (`1`, `x0`, `x0*x2`, ...).
    pub fn names(&self) -> Vec<String> {
        self.terms()
            .iter()
            .map(|t| match t {
                Term::One => "1".to_string(),
                Term::Col(j) => format!("x{j}"),
                Term::Prod(i, j) => format!("x{i}*x{j}"),
            })
            .collect()
    }

    pub fn expand(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.kinds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kinds.len(),
                got: x.ncols(),
            });
        }
        let terms = self.terms();
        let mut data = Vec::with_capacity(x.nrows() * terms.len());
        for row in x.rows() {
            data.extend(terms.iter().map(|t| t.eval(row)));
        }
        Matrix::new(x.nrows(), terms.len(), data)
    }
}

#[derive(Debug, Clone, Copy)]
enum Term {
    One,
    Col(usize),
    Prod(usize, usize),
}

impl Term {
    fn eval(self, row: &[f64]) -> f64 {
        match self {
            Term::One => 1.0,
            Term::Col(j) => row[j],
            Term::Prod(i, j) => row[i] * row[j],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_kinds() -> Vec<ColumnKind> {
        let mut k = vec![ColumnKind::Continuous; 3];
        k.push(ColumnKind::Binary);
        for level in 0..3 {
            k.push(ColumnKind::OneHot { group: 0, level });
        }
        k
    }

    #[test]
    fn quadratic_dimension() {
        // 1 + 6 raw + 3 squares + (15 pairs - 1 within the one-hot group)
        let map = FeatureMap::quadratic(sim_kinds());
        assert_eq!(map.dim(), 24);
        assert_eq!(FeatureMap::linear(sim_kinds()).dim(), 7);
    }

    #[test]
    fn expansion_values() {
        let map = FeatureMap::quadratic(vec![ColumnKind::Continuous, ColumnKind::Binary]);
        let x = Matrix::from_rows(&[vec![2.0, 1.0]]).unwrap();
        let f = map.expand(&x).unwrap();
        assert_eq!(map.names(), ["1", "x0", "x1", "x0*x0", "x0*x1"]);
        assert_eq!(f.row(0), &[1.0, 2.0, 1.0, 4.0, 2.0]);
    }

    #[test]
    fn no_intercept_keeps_all_levels() {
        let kinds = vec![
            ColumnKind::OneHot { group: 0, level: 0 },
            ColumnKind::OneHot { group: 0, level: 1 },
        ];
        let map = FeatureMap {
            intercept: false,
            ..FeatureMap::quadratic(kinds)
        };
        assert_eq!(map.names(), ["x0", "x1"]);
    }

    #[test]
    fn wrong_width_is_an_error() {
        let map = FeatureMap::linear(vec![ColumnKind::Continuous]);
        assert!(map.expand(&Matrix::zeros(2, 3)).is_err());
    }
}
