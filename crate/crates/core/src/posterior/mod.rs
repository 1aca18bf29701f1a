//! Posterior correction: Bayesian bootstrap, one-step and debiased
//! (RoBART) posterior draws of the mean response, ATE and ATT, and their
//! credible intervals.

mod data;
mod run;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagnostics::quantile_sorted;
use crate::error::{invalid, Error, Result};
use crate::pilot::Estimand;
use crate::rng::RngStream;

pub use data::{MissingDataset, TreatmentDataset};
pub use run::{
    ate_from_draws, ate_outcome_draws, att_from_draws, att_outcome_draws, mean_outcome_draws, mean_response_from_draws,
    run_ate, run_att, run_mean_response, AteDraws, CorrectionSpec, MeanPilots, TreatmentPilots,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PluginBart,
    Onestep,
    Robart,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PluginBart => "plugin-bart",
            Method::Onestep => "onestep",
            Method::Robart => "robart",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plugin-bart" | "plugin" => Ok(Method::PluginBart),
            "onestep" => Ok(Method::Onestep),
            "robart" => Ok(Method::Robart),
            _ => Err(invalid("method", format!("unknown method `{s}` (plugin-bart, onestep, robart)"))),
        }
    }
}

/// Normalized Exp(1) draws, i.e. one Dirichlet(1, ..., 1) vector.
pub fn bayesian_bootstrap_weights(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.exp1()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `Σ W_i (m_i + γ_i (y_i - m_i))`. Rows with `r_i = 0` contribute `W_i m_i`
/// only and their `y_i` is never read.
pub fn chi_draw(m: &[f64], gamma: &[f64], y: &[f64], r: &[f64], w: &[f64]) -> Result<f64> {
    let n = m.len();
    for len in [gamma.len(), y.len(), r.len(), w.len()] {
        check_len(n, len)?;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let correction = if r[i] == 1.0 { gamma[i] * (y[i] - m[i]) } else { 0.0 };
        acc += w[i] * (m[i] + correction);
    }
    Ok(acc)
}

/// `(1/n) Σ (γ̂_i - 1)(m̂_i - m_i)`, equally weighted.
pub fn debias_term(m: &[f64], m_hat: &[f64], gamma: &[f64]) -> Result<f64> {
    check_len(m.len(), m_hat.len())?;
    check_len(m.len(), gamma.len())?;
    let n = m.len() as f64;
    Ok(m.iter()
        .zip(m_hat)
        .zip(gamma)
        .map(|((ms, mh), g)| (g - 1.0) * (mh - ms))
        .sum::<f64>()
        / n)
}

/// Same form as [`debias_term`] with the true regression and representer;
/// simulation diagnostics only.
pub fn oracle_bias_term(m0: &[f64], m: &[f64], gamma0: &[f64]) -> Result<f64> {
    debias_term(m, m0, gamma0)
}

/// `(1/n) Σ [m̂_i + r_i / π̂_i (y_i - m̂_i)]`.
pub fn aipw_point_estimate(data: &MissingDataset, pi: &[f64], m_hat: &[f64]) -> Result<f64> {
    let n = data.n();
    check_len(n, pi.len())?;
    check_len(n, m_hat.len())?;
    let mut acc = 0.0;
    for i in 0..n {
        acc += m_hat[i];
        if data.r()[i] == 1.0 {
            acc += (data.y_observed(i)? - m_hat[i]) / pi[i];
        }
    }
    Ok(acc / n as f64)
}

/// Retained corrected draws with their components.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSet {
    pub method: Method,
    pub estimand: Estimand,
    /// Corrected draws `chi - b_hat`.
    pub draws: Vec<f64>,
    pub chi: Vec<f64>,
    pub b_hat: Vec<f64>,
}

impl DrawSet {
    pub(crate) fn from_components(method: Method, estimand: Estimand, chi: Vec<f64>, b_hat: Vec<f64>) -> Self {
        let draws = chi.iter().zip(&b_hat).map(|(c, b)| c - b).collect();
        Self {
            method,
            estimand,
            draws,
            chi,
            b_hat,
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Columns `draw_index,chi,b_hat,chi_corrected`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["draw_index", "chi", "b_hat", "chi_corrected"]).map_err(err)?;
        for s in 0..self.len() {
            w.write_record([
                s.to_string(),
                self.chi[s].to_string(),
                self.b_hat[s].to_string(),
                self.draws[s].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, alpha: f64, seed: u64) -> Result<Summary> {
        let ci = credible_interval(&self.draws, alpha)?;
        Ok(Summary {
            method: self.method,
            estimand: self.estimand,
            mean: ci.mean,
            lo: ci.lo,
            hi: ci.hi,
            cil: ci.length,
            draws: self.len(),
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub estimand: Estimand,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub cil: f64,
    #[serde(rename = "S")]
    pub draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub length: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Equal-tailed `1 - alpha` interval from linearly interpolated empirical
/// quantiles (position `p (S - 1)` in the sorted draws).
pub fn credible_interval(draws: &[f64], alpha: f64) -> Result<Interval> {
    if draws.len() < 2 {
        return Err(invalid("draws", format!("need at least 2, got {}", draws.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if draws.iter().any(|v| !v.is_finite()) {
        return Err(invalid("draws", "contain non-finite values"));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, alpha / 2.0);
    let hi = quantile_sorted(&sorted, 1.0 - alpha / 2.0);
    Ok(Interval {
        mean: draws.iter().sum::<f64>() / draws.len() as f64,
        lo,
        hi,
        length: hi - lo,
    })
}

#[cfg(test)]
mod tests;
