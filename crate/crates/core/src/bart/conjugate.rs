//! Closed-form pieces of the sampler: the normal-normal leaf marginal, the
//! conjugate leaf and noise updates, and calibration of the noise prior.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Sufficient statistics of the residuals falling in one leaf.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LeafStats {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl LeafStats {
    pub fn from_residuals(r: &[f64]) -> Self {
        let mut s = Self::default();
        for &v in r {
            s.push(v);
        }
        s
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }
}

/// `log ∫ Π N(r_i; mu, sigma^2) N(mu; 0, leaf_sd^2) dmu` for one leaf.
/// An empty leaf contributes zero.
pub fn leaf_log_marginal(stats: &LeafStats, sigma: f64, leaf_sd: f64) -> f64 {
    if stats.n == 0 {
        return 0.0;
    }
    let n = stats.n as f64;
    let s2 = sigma * sigma;
    let t2 = leaf_sd * leaf_sd;
    let denom = s2 + n * t2;
    -0.5 * n * (LN_2PI + s2.ln()) - 0.5 * (denom / s2).ln()
        - 0.5 / s2 * (stats.sum_sq - t2 * stats.sum * stats.sum / denom)
}

/// Integrated log-likelihood summed over leaves, given each leaf's residuals.
pub fn integrated_leaf_loglik(residuals_by_leaf: &[&[f64]], sigma: f64, leaf_sd: f64) -> f64 {
    residuals_by_leaf
        .iter()
        .map(|r| leaf_log_marginal(&LeafStats::from_residuals(r), sigma, leaf_sd))
        .sum()
}

/// Posterior `(mean, variance)` of a leaf height given its residuals.
pub fn leaf_posterior(n: usize, sum: f64, sigma: f64, leaf_sd: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let var = 1.0 / (n as f64 / s2 + 1.0 / (leaf_sd * leaf_sd));
    (var * sum / s2, var)
}

/// Residual standard deviation of the least-squares fit of `y` on `[1, X]`
/// when `n > p + 1`, otherwise the sample standard deviation of `y`.
pub fn sigma_hat(y: &[f64], x: &Matrix) -> Result<f64> {
    let n = y.len();
    if n < 2 {
        return Err(invalid("y", "need at least two observations"));
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::InvalidInput("outcome has zero variance".into()));
    }
    let p = x.ncols();
    if n <= p + 1 {
        return Ok(sd);
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let svd = design.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let fitted = design * beta;
    let ssr: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    if n <= rank {
        return Ok(sd);
    }
    let s = (ssr / (n - rank) as f64).sqrt();
    Ok(if s > 0.0 { s } else { sd })
}

/// Scale `lambda` of the scaled-inverse-chi-square noise prior with `nu`
/// degrees of freedom such that `P(sigma < sigma_hat) = quantile`.
pub fn lambda_for(sigma_hat: f64, nu: f64, quantile: f64) -> f64 {
    let chi2 = ChiSquared::new(nu).unwrap();
    sigma_hat * sigma_hat * chi2.inverse_cdf(1.0 - quantile) / nu
}

pub fn calibrate_sigma_lambda(y: &[f64], x: &Matrix, nu: f64, quantile: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(invalid("sigma_prior_df", "must be positive"));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(invalid("sigma_prior_quantile", "must lie in (0, 1)"));
    }
    Ok(lambda_for(sigma_hat(y, x)?, nu, quantile))
}
