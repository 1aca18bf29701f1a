//! Dirichlet split-probability prior with a grid update of its
//! concentration `theta`, where `theta / (theta + p) ~ Beta(0.5, 1)`.

use statrs::function::gamma::ln_gamma;

pub const GRID_SIZE: usize = 100;
const GRID_LO: f64 = 1e-3;
const GRID_HI: f64 = 1.0 - 1e-3;

/// Grid point: `u = theta / (theta + p)`, `theta`, and the log prior weight.
#[derive(Debug, Clone, Copy)]
pub struct ThetaPoint {
    pub u: f64,
    pub theta: f64,
    pub log_prior: f64,
}

/// Log-spaced grid over `u`. Each point carries the Beta(0.5, 1) density
/// times its cell width on the log scale (`∝ u^-0.5 * u`).
pub fn theta_grid(p: usize) -> Vec<ThetaPoint> {
    let (a, b) = (GRID_LO.ln(), GRID_HI.ln());
    (0..GRID_SIZE)
        .map(|k| {
            let u = (a + (b - a) * k as f64 / (GRID_SIZE - 1) as f64).exp();
            ThetaPoint {
                u,
                theta: p as f64 * u / (1.0 - u),
                log_prior: 0.5 * u.ln(),
            }
        })
        .collect()
}

/// Log density of `s` under `Dirichlet(theta/p, ..., theta/p)`.
pub fn log_dirichlet_symmetric(s: &[f64], theta: f64) -> f64 {
    let p = s.len() as f64;
    let a = theta / p;
    let sum_log: f64 = s.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).sum();
    ln_gamma(theta) - p * ln_gamma(a) + (a - 1.0) * sum_log
}

/// Normalized posterior over the grid given split probabilities `s`.
pub fn theta_grid_posterior(s: &[f64], grid: &[ThetaPoint]) -> Vec<f64> {
    let logs: Vec<f64> = grid
        .iter()
        .map(|g| g.log_prior + log_dirichlet_symmetric(s, g.theta))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}
