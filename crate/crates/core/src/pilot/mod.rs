//! Pilot estimators of the propensity score and the outcome regression, and
//! the Riesz representers built from them.

mod features;
mod logit;
mod stack;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bart::{run_bart_binary, run_bart_regression, BartConfig};
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

pub use features::FeatureMap;
pub use logit::{fit_logit_irls, logistic, IrlsOptions, LogitFit};
pub use stack::{fold_assignment, stack_pilots, stack_weights, StackResult};

pub const DEFAULT_CLIP_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotKind {
    LogitIrls,
    Stacked,
    BartMean,
    Oracle,
    OlsExpansion,
}

#[derive(Debug, Clone)]
pub enum PilotModel {
    Logistic { map: FeatureMap, coef: Vec<f64> },
    Linear { map: FeatureMap, coef: Vec<f64> },
    /// Predictions keyed by row position.
    Table(Vec<f64>),
    Stack { members: Vec<PilotFit>, weights: Vec<f64> },
}

/// A fitted pilot. Propensity pilots carry a clipping level; outcome pilots
/// do not.
#[derive(Debug, Clone)]
pub struct PilotFit {
    pub kind: PilotKind,
    pub model: PilotModel,
    pub clip_eps: Option<f64>,
}

pub fn clip(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

fn check_clip(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(invalid("clip_eps", format!("must lie in (0, 0.5), got {eps}")))
    }
}

impl PilotFit {
    pub fn tabulated(kind: PilotKind, values: Vec<f64>, clip_eps: Option<f64>) -> Result<Self> {
        if let Some(eps) = clip_eps {
            check_clip(eps)?;
        }
        Ok(Self {
            kind,
            model: PilotModel::Table(values),
            clip_eps,
        })
    }

    /// Oracle propensity (or outcome) values, one per row.
    pub fn oracle(values: Vec<f64>, clip_eps: Option<f64>) -> Result<Self> {
        Self::tabulated(PilotKind::Oracle, values, clip_eps)
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.model {
            PilotModel::Logistic { coef, .. } | PilotModel::Linear { coef, .. } => Some(coef),
            _ => None,
        }
    }

    pub fn stack_weights(&self) -> Option<&[f64]> {
        match &self.model {
            PilotModel::Stack { weights, .. } => Some(weights),
            _ => None,
        }
    }

    fn finish(&self, v: f64) -> f64 {
        match self.clip_eps {
            Some(eps) => clip(v, eps),
            None => v,
        }
    }

    /// Prediction at every row of `x`. Tabulated pilots read their table by
    /// row position and need `x` to have exactly as many rows.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let raw = match &self.model {
            PilotModel::Logistic { map, coef } => linear_predictor(map, coef, x)?
                .into_iter()
                .map(logistic)
                .collect(),
            PilotModel::Linear { map, coef } => linear_predictor(map, coef, x)?,
            PilotModel::Table(values) => {
                if values.len() != x.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: values.len(),
                        got: x.nrows(),
                    });
                }
                values.clone()
            }
            PilotModel::Stack { members, weights } => {
                let mut out = vec![0.0; x.nrows()];
                for (m, w) in members.iter().zip(weights) {
                    for (o, v) in out.iter_mut().zip(m.predict(x)?) {
                        *o += w * v;
                    }
                }
                out
            }
        };
        Ok(raw.into_iter().map(|v| self.finish(v)).collect())
    }

    /// Prediction for a single row; `row` keys tabulated pilots.
    pub fn predict_row(&self, row: usize, x: &[f64]) -> Result<f64> {
        let raw = match &self.model {
            PilotModel::Logistic { map, coef } => logistic(row_predictor(map, coef, x)?),
            PilotModel::Linear { map, coef } => row_predictor(map, coef, x)?,
            PilotModel::Table(values) => *values.get(row).ok_or(Error::UnknownRow(row))?,
            PilotModel::Stack { members, weights } => {
                let mut acc = 0.0;
                for (m, w) in members.iter().zip(weights) {
                    acc += w * m.predict_row(row, x)?;
                }
                acc
            }
        };
        Ok(self.finish(raw))
    }
}

fn linear_predictor(map: &FeatureMap, coef: &[f64], x: &Matrix) -> Result<Vec<f64>> {
    let f = map.expand(x)?;
    Ok(f.rows().map(|r| r.iter().zip(coef).map(|(a, b)| a * b).sum()).collect())
}

fn row_predictor(map: &FeatureMap, coef: &[f64], x: &[f64]) -> Result<f64> {
    let m = Matrix::new(1, x.len(), x.to_vec())?;
    Ok(linear_predictor(map, coef, &m)?[0])
}

/// Clipped propensities at every row of `x`. Pilots without their own
/// clipping level use [`DEFAULT_CLIP_EPS`].
pub fn predict_propensity(fit: &PilotFit, x: &Matrix) -> Result<Vec<f64>> {
    let eps = fit.clip_eps.unwrap_or(DEFAULT_CLIP_EPS);
    Ok(fit.predict(x)?.into_iter().map(|p| clip(p, eps)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityLearner {
    /// Logistic regression on expanded features.
    Logit { map: FeatureMap, ridge: f64 },
    /// Posterior-mean probability from probit BART.
    BartProbit(BartConfig),
    /// Known values per row.
    Fixed(Vec<f64>),
}

impl PropensityLearner {
    pub fn kind(&self) -> PilotKind {
        match self {
            Self::Logit { .. } => PilotKind::LogitIrls,
            Self::BartProbit(_) => PilotKind::BartMean,
            Self::Fixed(_) => PilotKind::Oracle,
        }
    }

    /// Unclipped predictions at `predict_rows` after training on
    /// `train_rows`.
    pub(crate) fn fit_predict(
        &self,
        x: &Matrix,
        labels: &[f64],
        train_rows: &[usize],
        predict_rows: &[usize],
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        let xt = x.select_rows(predict_rows);
        match self {
            Self::Logit { map, ridge } => {
                let coef = fit_logit_coef(map, *ridge, &x.select_rows(train_rows), &pick(labels, train_rows))?;
                Ok(linear_predictor(map, &coef, &xt)?.into_iter().map(logistic).collect())
            }
            Self::BartProbit(cfg) => {
                let xs = x.select_rows(train_rows);
                let draws = run_bart_binary(&xs, &pick(labels, train_rows), cfg, rng, Some(&xt))?;
                Ok(draws.test_posterior_mean().expect("test rows requested"))
            }
            Self::Fixed(values) => predict_rows
                .iter()
                .map(|&i| values.get(i).copied().ok_or(Error::UnknownRow(i)))
                .collect(),
        }
    }
}

fn pick(v: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i]).collect()
}

fn fit_logit_coef(map: &FeatureMap, ridge: f64, x: &Matrix, labels: &[f64]) -> Result<Vec<f64>> {
    let opts = IrlsOptions {
        ridge,
        intercept_first: map.intercept,
        ..IrlsOptions::default()
    };
    Ok(fit_logit_irls(&map.expand(x)?, labels, &opts)?.coef)
}

/// Full-data propensity pilot.
pub fn fit_propensity(
    learner: &PropensityLearner,
    x: &Matrix,
    labels: &[f64],
    clip_eps: f64,
    rng: &mut RngStream,
) -> Result<PilotFit> {
    check_clip(clip_eps)?;
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    let model = match learner {
        PropensityLearner::Logit { map, ridge } => PilotModel::Logistic {
            map: map.clone(),
            coef: fit_logit_coef(map, *ridge, x, labels)?,
        },
        _ => {
            let all: Vec<usize> = (0..x.nrows()).collect();
            PilotModel::Table(learner.fit_predict(x, labels, &all, &all, rng)?)
        }
    };
    Ok(PilotFit {
        kind: learner.kind(),
        model,
        clip_eps: Some(clip_eps),
    })
}

/// Out-of-fold propensities: row `i` is predicted by the learner trained on
/// every row outside fold `folds[i]`.
pub fn crossfit_propensity(
    learner: &PropensityLearner,
    x: &Matrix,
    labels: &[f64],
    folds: &[usize],
    clip_eps: f64,
    rng: &mut RngStream,
) -> Result<PilotFit> {
    check_clip(clip_eps)?;
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![0.0; x.nrows()];
    for f in 0..k {
        let (held, train): (Vec<usize>, Vec<usize>) = (0..x.nrows()).partition(|&i| folds[i] == f);
        let pred = learner.fit_predict(x, labels, &train, &held, &mut rng.child(f as u64))?;
        for (&i, p) in held.iter().zip(pred) {
            out[i] = p;
        }
    }
    PilotFit::tabulated(learner.kind(), out, Some(clip_eps))
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeMethod {
    /// Posterior-mean fit of BART regression.
    BartMean(BartConfig),
    /// Least squares on expanded features.
    OlsExpansion { map: FeatureMap, ridge: f64 },
}

/// Least squares, optionally ridge-penalized (intercept unpenalized when
/// `intercept_first`).
pub fn fit_ols(features: &Matrix, y: &[f64], ridge: f64, intercept_first: bool) -> Result<Vec<f64>> {
    let (n, q) = (features.nrows(), features.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let x = DMatrix::from_row_slice(n, q, features.as_slice());
    let yv = DVector::from_column_slice(y);
    if ridge > 0.0 {
        let mut a = x.tr_mul(&x);
        for j in 0..q {
            if !(intercept_first && j == 0) {
                a[(j, j)] += ridge;
            }
        }
        let b = x.tr_mul(&yv);
        let sol = a
            .cholesky()
            .ok_or(Error::RankDeficient { rank: 0, cols: q })?
            .solve(&b);
        return Ok(sol.iter().copied().collect());
    }
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (n.max(q) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < q {
        return Err(Error::RankDeficient { rank, cols: q });
    }
    let sol = svd.solve(&yv, tol).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

/// Outcome pilot trained on `y[train_rows]` and defined at every row of `x`.
/// BART fits are tabulated at all rows of `x`; rows outside `train_rows`
/// are predicted as test points.
pub fn fit_outcome_pilot(
    x: &Matrix,
    y: &[f64],
    train_rows: &[usize],
    method: &OutcomeMethod,
    rng: &mut RngStream,
) -> Result<PilotFit> {
    if train_rows.is_empty() {
        return Err(Error::InvalidInput("outcome pilot needs at least one observed row".into()));
    }
    let ys = pick(y, train_rows);
    let xs = x.select_rows(train_rows);
    match method {
        OutcomeMethod::BartMean(cfg) => {
            let draws = run_bart_regression(&xs, &ys, cfg, rng, Some(x))?;
            PilotFit::tabulated(PilotKind::BartMean, draws.test_posterior_mean().expect("test rows requested"), None)
        }
        OutcomeMethod::OlsExpansion { map, ridge } => Ok(PilotFit {
            kind: PilotKind::OlsExpansion,
            model: PilotModel::Linear {
                map: map.clone(),
                coef: fit_ols(&map.expand(&xs)?, &ys, *ridge, map.intercept)?,
            },
            clip_eps: None,
        }),
    }
}

/// Out-of-fold outcome pilot, tabulated at every row of `x`: rows in fold
/// `f` are predicted from the training rows outside fold `f`.
pub fn crossfit_outcome(
    x: &Matrix,
    y: &[f64],
    train_rows: &[usize],
    folds: &[usize],
    method: &OutcomeMethod,
    rng: &mut RngStream,
) -> Result<PilotFit> {
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![0.0; x.nrows()];
    for f in 0..k {
        let held: Vec<usize> = (0..x.nrows()).filter(|&i| folds[i] == f).collect();
        let train: Vec<usize> = train_rows.iter().copied().filter(|&i| folds[i] != f).collect();
        let fit = fit_outcome_pilot(x, y, &train, method, &mut rng.child(f as u64))?;
        let pred = fit.predict(x)?;
        for &i in &held {
            out[i] = pred[i];
        }
    }
    PilotFit::tabulated(
        match method {
            OutcomeMethod::BartMean(_) => PilotKind::BartMean,
            OutcomeMethod::OlsExpansion { .. } => PilotKind::OlsExpansion,
        },
        out,
        None,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    Mean,
    Ate,
    Att,
}

/// Riesz representer of the mean-response, ATE or ATT functional at one
/// observation. `indicator` is the response or treatment indicator, `pi`
/// the propensity at its covariates and `pi_bar` the treated share (ATT
/// only).
pub fn riesz_representer(estimand: Estimand, indicator: f64, pi: f64, pi_bar: Option<f64>) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(invalid("pi", format!("must lie in (0, 1), got {pi}")));
    }
    Ok(match estimand {
        Estimand::Mean => indicator / pi,
        Estimand::Ate => indicator / pi - (1.0 - indicator) / (1.0 - pi),
        Estimand::Att => {
            let pb = pi_bar.ok_or_else(|| invalid("pi_bar", "required for the ATT"))?;
            if !(pb > 0.0 && pb < 1.0) {
                return Err(invalid("pi_bar", format!("must lie in (0, 1), got {pb}")));
            }
            indicator / pb - (1.0 - indicator) / pb * pi / (1.0 - pi)
        }
    })
}

/// [`riesz_representer`] applied row by row.
pub fn riesz_vector(estimand: Estimand, indicator: &[f64], pi: &[f64]) -> Result<Vec<f64>> {
    if indicator.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: indicator.len(),
            got: pi.len(),
        });
    }
    let pi_bar = (estimand == Estimand::Att).then(|| indicator.iter().sum::<f64>() / indicator.len() as f64);
    indicator
        .iter()
        .zip(pi)
        .map(|(&d, &p)| riesz_representer(estimand, d, p, pi_bar))
        .collect()
}

/// Audit CSV with columns `row_id,pi_hat,m_hat`.
pub fn write_pilot_csv<W: Write>(out: W, pi: &[f64], m: &[f64]) -> Result<()> {
    if pi.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: m.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(["row_id", "pi_hat", "m_hat"]).map_err(err)?;
    for (i, (p, v)) in pi.iter().zip(m).enumerate() {
        w.write_record([i.to_string(), p.to_string(), v.to_string()]).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
