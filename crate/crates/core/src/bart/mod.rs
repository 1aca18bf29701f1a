//! Bayesian additive regression trees: a Gibbs sampler over a sum of trees
//! for continuous outcomes, and a probit data-augmentation variant for
//! binary outcomes.

pub mod conjugate;
pub mod prior;
pub mod sparse;
pub mod state;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{norm_cdf, norm_quantile, RngStream, Side};

pub use conjugate::{calibrate_sigma_lambda, integrated_leaf_loglik, leaf_log_marginal, leaf_posterior};
pub use prior::{log_tree_prior, split_probability};
pub use state::{BartState, Move, MoveStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            grow: 0.4,
            prune: 0.4,
            change: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BartConfig {
    pub num_trees: usize,
    pub num_draws: usize,
    pub burn_in: usize,
    /// Split probability at depth `d` is `base * (1 + d)^(-power)`.
    pub base: f64,
    pub power: f64,
    pub sigma_df: f64,
    pub sigma_quantile: f64,
    /// Leaf prior sd is `range(y) / (2 k sqrt(T))`.
    pub leaf_k: f64,
    pub sparse: bool,
    pub move_probs: MoveProbs,
    pub min_node_size: usize,
    pub thin: usize,
    /// Sd of Gaussian noise added to `y` before fitting; 0 disables it.
    pub jitter: f64,
}

impl Default for BartConfig {
    fn default() -> Self {
        Self {
            num_trees: 200,
            num_draws: 2000,
            burn_in: 500,
            base: 0.95,
            power: 2.0,
            sigma_df: 3.0,
            sigma_quantile: 0.9,
            leaf_k: 2.0,
            sparse: false,
            move_probs: MoveProbs::default(),
            min_node_size: 1,
            thin: 1,
            jitter: 0.0,
        }
    }
}

impl BartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(invalid("num_trees", "must be at least 1"));
        }
        if self.num_draws == 0 {
            return Err(invalid("num_draws", "must be at least 1"));
        }
        if self.thin == 0 {
            return Err(invalid("thin", "must be at least 1"));
        }
        if self.min_node_size == 0 {
            return Err(invalid("min_node_size", "must be at least 1"));
        }
        if !(self.base > 0.0 && self.base < 1.0) {
            return Err(invalid("base", format!("must lie in (0, 1), got {}", self.base)));
        }
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(invalid("power", format!("must be nonnegative, got {}", self.power)));
        }
        if !(self.sigma_df > 0.0 && self.sigma_df.is_finite()) {
            return Err(invalid("sigma_df", "must be positive"));
        }
        if !(self.sigma_quantile > 0.0 && self.sigma_quantile < 1.0) {
            return Err(invalid("sigma_quantile", "must lie in (0, 1)"));
        }
        if !(self.leaf_k > 0.0 && self.leaf_k.is_finite()) {
            return Err(invalid("leaf_k", "must be positive"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(invalid("jitter", "must be nonnegative"));
        }
        let MoveProbs { grow, prune, change } = self.move_probs;
        if [grow, prune, change].iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("move_probs", "must be nonnegative"));
        }
        if ((grow + prune + change) - 1.0).abs() > 1e-9 {
            return Err(invalid("move_probs", format!("must sum to 1, got {}", grow + prune + change)));
        }
        if grow == 0.0 || prune == 0.0 {
            return Err(invalid("move_probs", "grow and prune must both be positive"));
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.num_draws * self.thin
    }
}

/// Retained posterior draws. Fitted values are on the outcome scale for
/// regression and on the probability scale for binary outcomes.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    /// `S x n`, one row per retained draw.
    pub fitted: Matrix,
    pub test_fitted: Option<Matrix>,
    pub sigma: Vec<f64>,
    pub stats: MoveStats,
}

impl PosteriorDraws {
    pub fn num_draws(&self) -> usize {
        self.fitted.nrows()
    }

    /// Column means of the fitted draws.
    pub fn posterior_mean(&self) -> Vec<f64> {
        self.fitted.column_means()
    }

    pub fn test_posterior_mean(&self) -> Option<Vec<f64>> {
        self.test_fitted.as_ref().map(Matrix::column_means)
    }

    /// CSV with a header of observation ids and one row per draw.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.fitted.ncols()).map(|i| format!("obs_{i}")).collect();
        w.write_record(&header).map_err(csv_err)?;
        for row in self.fitted.rows() {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(e.to_string())
}

fn check_inputs(x: &Matrix, n: usize, x_test: Option<&Matrix>) -> Result<()> {
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: n,
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows, got {n}")));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidInput("covariate matrix has no columns".into()));
    }
    if !x.is_finite() {
        return Err(Error::InvalidInput("covariates contain non-finite values".into()));
    }
    if let Some(xt) = x_test {
        if xt.ncols() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: xt.ncols(),
            });
        }
        if !xt.is_finite() {
            return Err(Error::InvalidInput("test covariates contain non-finite values".into()));
        }
    }
    Ok(())
}

struct Collector {
    fitted: Vec<f64>,
    test: Option<Vec<f64>>,
    sigma: Vec<f64>,
}

impl Collector {
    fn new(config: &BartConfig, n: usize, x_test: Option<&Matrix>) -> Self {
        let s = config.num_draws;
        Self {
            fitted: Vec::with_capacity(s * n),
            test: x_test.map(|xt| Vec::with_capacity(s * xt.nrows())),
            sigma: Vec::with_capacity(s),
        }
    }

    fn push(&mut self, state: &BartState, x_test: Option<&Matrix>, link: impl Fn(f64) -> f64) {
        let offset = state.forest().offset;
        let target = state.target();
        for (t, r) in target.iter().zip(state.residual()) {
            self.fitted.push(link(offset + t - r));
        }
        if let (Some(buf), Some(xt)) = (self.test.as_mut(), x_test) {
            for row in xt.rows() {
                buf.push(link(state.forest().predict(row)));
            }
        }
        self.sigma.push(state.sigma());
    }

    fn finish(self, n: usize, x_test: Option<&Matrix>, stats: MoveStats) -> PosteriorDraws {
        let s = self.sigma.len();
        PosteriorDraws {
            fitted: Matrix::new(s, n, self.fitted).expect("draw buffer shape"),
            test_fitted: self
                .test
                .zip(x_test)
                .map(|(buf, xt)| Matrix::new(s, xt.nrows(), buf).expect("test draw buffer shape")),
            sigma: self.sigma,
            stats,
        }
    }
}

/// Posterior draws of the regression function `E[y | x]` at the training
/// rows (and at `x_test` when given).
pub fn run_bart_regression(
    x: &Matrix,
    y: &[f64],
    config: &BartConfig,
    rng: &mut RngStream,
    x_test: Option<&Matrix>,
) -> Result<PosteriorDraws> {
    config.validate()?;
    check_inputs(x, y.len(), x_test)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("outcome contains non-finite values".into()));
    }
    let y: Vec<f64> = if config.jitter > 0.0 {
        y.iter().map(|v| v + rng.normal(0.0, config.jitter)).collect()
    } else {
        y.to_vec()
    };
    let n = y.len();
    let lambda = calibrate_sigma_lambda(&y, x, config.sigma_df, config.sigma_quantile)?;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let leaf_sd = (hi - lo) / (2.0 * config.leaf_k * (config.num_trees as f64).sqrt());
    let sigma0 = conjugate::sigma_hat(&y, x)?;
    let target: Vec<f64> = y.iter().map(|v| v - ybar).collect();

    let mut state = BartState::new(x, target, ybar, config.clone(), sigma0, lambda, leaf_sd);
    let mut out = Collector::new(config, n, x_test);
    for sweep in 0..config.total_sweeps() {
        state.sweep(rng, true);
        if sweep >= config.burn_in && (sweep - config.burn_in + 1) % config.thin == 0 {
            out.push(&state, x_test, |v| v);
        }
    }
    log::debug!("bart regression done: {:?}", state.stats());
    Ok(out.finish(n, x_test, state.stats()))
}

/// Posterior draws of `P(r = 1 | x)` under a probit link, with the latent
/// normal variables redrawn every sweep and the noise scale fixed at 1.
pub fn run_bart_binary(
    x: &Matrix,
    r: &[f64],
    config: &BartConfig,
    rng: &mut RngStream,
    x_test: Option<&Matrix>,
) -> Result<PosteriorDraws> {
    config.validate()?;
    check_inputs(x, r.len(), x_test)?;
    if let Some(v) = r.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!("binary outcome must be 0 or 1, got {v}")));
    }
    let n = r.len();
    let ones = r.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::InvalidInput("binary outcome has a single class".into()));
    }
    let offset = norm_quantile(ones as f64 / n as f64);
    let leaf_sd = 3.0 / (config.leaf_k * (config.num_trees as f64).sqrt());
    let mut state = BartState::new(x, vec![0.0; n], offset, config.clone(), 1.0, 1.0, leaf_sd);
    let mut out = Collector::new(config, n, x_test);
    let mut latent = vec![0.0; n];
    for sweep in 0..config.total_sweeps() {
        let fit = state.fitted();
        for i in 0..n {
            let side = if r[i] == 1.0 { Side::Positive } else { Side::Negative };
            // z ~ N(offset + fit, 1) truncated at 0; stored relative to offset
            latent[i] = rng.truncated_normal(offset + fit[i], 1.0, side) - offset;
        }
        state.set_target(latent.clone());
        state.sweep(rng, false);
        if sweep >= config.burn_in && (sweep - config.burn_in + 1) % config.thin == 0 {
            out.push(&state, x_test, norm_cdf);
        }
    }
    Ok(out.finish(n, x_test, state.stats()))
}

#[cfg(test)]
mod tests;
