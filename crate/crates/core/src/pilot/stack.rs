//! Convex stacking of propensity learners by cross-validated log-loss.

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

use super::{check_clip, clip, PilotFit, PilotKind, PilotModel, PropensityLearner};

/// Fold label per row: a uniform random permutation dealt round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.index(i + 1));
    }
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

pub(crate) const TIE_TOL: f64 = 1e-12;

fn log_loss(p: &[f64], labels: &[f64]) -> f64 {
    p.iter()
        .zip(labels)
        .map(|(&q, &y)| -(y * q.ln() + (1.0 - y) * (1.0 - q).ln()))
        .sum::<f64>()
        / labels.len() as f64
}

/// Integer compositions of `total` into `parts` parts, lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Simplex weights on the grid with the given number of steps that minimize
/// the log-loss of the combined predictions. Losses within a relative 1e-12
/// of the best so far count as ties and keep the earlier grid point
/// (lexicographic order).
pub fn stack_weights(predictions: &[Vec<f64>], labels: &[f64], steps: usize) -> Vec<f64> {
    let mut best = (f64::INFINITY, Vec::new());
    let mut combined = vec![0.0; labels.len()];
    for c in compositions(steps, predictions.len()) {
        let w: Vec<f64> = c.iter().map(|&k| k as f64 / steps as f64).collect();
        combined.iter_mut().for_each(|v| *v = 0.0);
        for (p, &wk) in predictions.iter().zip(&w) {
            for (o, q) in combined.iter_mut().zip(p) {
                *o += wk * q;
            }
        }
        let loss = log_loss(&combined, labels);
        if !best.0.is_finite() || loss < best.0 - TIE_TOL * best.0.abs() {
            best = (loss, w);
        }
    }
    best.1
}

#[derive(Debug, Clone)]
pub struct StackResult {
    pub fit: PilotFit,
    pub weights: Vec<f64>,
    pub cv_log_loss: Vec<f64>,
}

/// Stacked propensity pilot. Each learner is refit on every fold's training
/// rows to produce out-of-fold predictions (clipped), the simplex weights
/// minimizing their log-loss are found on a grid (step 0.01 for up to three
/// learners, 0.05 beyond), and the final pilot averages the full-data fits.
pub fn stack_pilots(
    learners: &[PropensityLearner],
    x: &Matrix,
    labels: &[f64],
    folds: usize,
    clip_eps: f64,
    rng: &mut RngStream,
) -> Result<StackResult> {
    check_clip(clip_eps)?;
    if learners.len() < 2 {
        return Err(invalid("learners", "need at least two candidates"));
    }
    if folds < 2 {
        return Err(invalid("folds", "need at least two folds"));
    }
    let n = x.nrows();
    let assign = fold_assignment(n, folds, &mut rng.child(0));
    for f in 0..folds {
        let held: Vec<f64> = (0..n).filter(|&i| assign[i] == f).map(|i| labels[i]).collect();
        let ones = held.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == held.len() {
            return Err(Error::InvalidInput(format!(
                "fold {f} ({} rows) does not contain both classes",
                held.len()
            )));
        }
    }
    let mut oof = vec![vec![0.0; n]; learners.len()];
    for f in 0..folds {
        let (held, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assign[i] == f);
        for (l, learner) in learners.iter().enumerate() {
            let mut r = rng.child(1 + (f * learners.len() + l) as u64);
            let pred = learner.fit_predict(x, labels, &train, &held, &mut r)?;
            for (&i, p) in held.iter().zip(pred) {
                oof[l][i] = clip(p, clip_eps);
            }
        }
    }
    let steps = if learners.len() <= 3 { 100 } else { 20 };
    let weights = stack_weights(&oof, labels, steps);
    let cv_log_loss = oof.iter().map(|p| log_loss(p, labels)).collect();
    let mut members = Vec::with_capacity(learners.len());
    for (l, learner) in learners.iter().enumerate() {
        let mut r = rng.child(1_000_000 + l as u64);
        members.push(super::fit_propensity(learner, x, labels, clip_eps, &mut r)?);
    }
    let fit = PilotFit {
        kind: PilotKind::Stacked,
        model: PilotModel::Stack {
            members,
            weights: weights.clone(),
        },
        clip_eps: Some(clip_eps),
    };
    Ok(StackResult {
        fit,
        weights,
        cv_log_loss,
    })
}
