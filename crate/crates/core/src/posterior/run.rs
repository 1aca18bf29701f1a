use crate::bart::{run_bart_binary, run_bart_regression, BartConfig};
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::pilot::{clip, riesz_representer, Estimand};
use crate::rng::RngStream;

use super::{bayesian_bootstrap_weights, chi_draw, debias_term, DrawSet, Method, MissingDataset, TreatmentDataset};

/// Sampler settings shared by the three estimands.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSpec {
    pub bart: BartConfig,
    /// Number of corrected draws `S`; at most the chain's retained draws.
    pub num_draws: usize,
    /// Clipping of per-draw propensities in one-step mode.
    pub clip_eps: f64,
}

impl CorrectionSpec {
    pub fn new(bart: BartConfig) -> Self {
        Self {
            num_draws: bart.num_draws,
            bart,
            clip_eps: crate::pilot::DEFAULT_CLIP_EPS,
        }
    }
}

/// Fixed pilots for the mean response: clipped `π̂` and `m̂` at every row.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPilots {
    pub pi: Vec<f64>,
    pub m: Vec<f64>,
}

/// Fixed pilots for treatment effects: clipped `π̂(x)` and `m̂(1, x)`,
/// `m̂(0, x)` at every row.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentPilots {
    pub pi: Vec<f64>,
    pub m1: Vec<f64>,
    pub m0: Vec<f64>,
}

fn check_draws(requested: usize, available: usize) -> Result<()> {
    if requested > available {
        return Err(Error::NotEnoughDraws { requested, available });
    }
    if requested < 1 {
        return Err(invalid("num_draws", "must be at least 1"));
    }
    Ok(())
}

fn check_rows(n: usize, m: &Matrix) -> Result<()> {
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    Ok(())
}

fn require<'a, T>(pilots: Option<&'a T>) -> Result<&'a T> {
    pilots.ok_or_else(|| invalid("pilots", "robart needs fixed pilots"))
}

fn require_pi(pi_draws: Option<&Matrix>) -> Result<&Matrix> {
    pi_draws.ok_or_else(|| invalid("pi_draws", "onestep needs propensity draws"))
}

/// Mean-response draws from precomputed outcome draws `m_draws` (S x n, all
/// rows) and, for `onestep`, propensity draws `pi_draws` (S x n). Draw `s`
/// pairs row `s` of each with a fresh Bayesian bootstrap weight vector.
pub fn mean_response_from_draws(
    data: &MissingDataset,
    method: Method,
    m_draws: &Matrix,
    pi_draws: Option<&Matrix>,
    pilots: Option<&MeanPilots>,
    num_draws: usize,
    clip_eps: f64,
    rng: &mut RngStream,
) -> Result<DrawSet> {
    let n = data.n();
    check_rows(n, m_draws)?;
    check_draws(num_draws, m_draws.nrows())?;
    let r = data.r();
    let y = data.y_masked();
    let gamma_hat = match method {
        Method::Robart => {
            let p = require(pilots)?;
            Some(
                r.iter()
                    .zip(&p.pi)
                    .map(|(&ri, &pi)| riesz_representer(Estimand::Mean, ri, pi, None))
                    .collect::<Result<Vec<f64>>>()?,
            )
        }
        _ => None,
    };
    if method == Method::Onestep {
        let pd = require_pi(pi_draws)?;
        check_rows(n, pd)?;
        check_draws(num_draws, pd.nrows())?;
    }
    let mut chi = Vec::with_capacity(num_draws);
    let mut b_hat = Vec::with_capacity(num_draws);
    let mut gamma = vec![0.0; n];
    for s in 0..num_draws {
        let w = bayesian_bootstrap_weights(n, rng);
        let m = m_draws.row(s);
        match method {
            Method::PluginBart => {
                chi.push(m.iter().zip(&w).map(|(a, b)| a * b).sum());
                b_hat.push(0.0);
            }
            Method::Onestep => {
                let pi = require_pi(pi_draws)?.row(s);
                for i in 0..n {
                    gamma[i] = r[i] / clip(pi[i], clip_eps);
                }
                chi.push(chi_draw(m, &gamma, &y, r, &w)?);
                b_hat.push(0.0);
            }
            Method::Robart => {
                let g = gamma_hat.as_deref().expect("set above");
                chi.push(chi_draw(m, g, &y, r, &w)?);
                b_hat.push(debias_term(m, &require(pilots)?.m, g)?);
            }
        }
    }
    Ok(DrawSet::from_components(method, Estimand::Mean, chi, b_hat))
}

/// Outcome draws (S x n) at every row from BART fit to the observed rows.
pub fn mean_outcome_draws(data: &MissingDataset, bart: &BartConfig, rng: &mut RngStream) -> Result<Matrix> {
    let obs = data.observed_rows();
    let y_obs: Vec<f64> = obs.iter().map(|&i| data.y_observed(i)).collect::<Result<_>>()?;
    let x_obs = data.x().select_rows(&obs);
    Ok(run_bart_regression(&x_obs, &y_obs, bart, rng, Some(data.x()))?
        .test_fitted
        .expect("test rows requested"))
}

/// Draws of `m(1, X_i)`, `m(0, X_i)` and `m(D_i, X_i)`, each S x n.
#[derive(Debug, Clone, PartialEq)]
pub struct AteDraws {
    pub m1: Matrix,
    pub m0: Matrix,
    pub md: Matrix,
}

/// One BART model on `[d, x]` over all units, evaluated at `(1, X_i)`,
/// `(0, X_i)` and `(D_i, X_i)`.
pub fn ate_outcome_draws(data: &TreatmentDataset, bart: &BartConfig, rng: &mut RngStream) -> Result<AteDraws> {
    let n = data.n();
    let test = data.design(Some(1.0)).vstack(&data.design(Some(0.0)))?;
    let draws = run_bart_regression(&data.design(None), data.y(), bart, rng, Some(&test))?;
    let both = draws.test_fitted.expect("test rows requested");
    let s = both.nrows();
    let mut m1 = Vec::with_capacity(s * n);
    let mut m0 = Vec::with_capacity(s * n);
    for row in both.rows() {
        m1.extend_from_slice(&row[..n]);
        m0.extend_from_slice(&row[n..]);
    }
    Ok(AteDraws {
        m1: Matrix::new(s, n, m1)?,
        m0: Matrix::new(s, n, m0)?,
        md: draws.fitted,
    })
}

/// Draws of `m(0, X_i)` (S x n) from BART on the control arm.
pub fn att_outcome_draws(data: &TreatmentDataset, bart: &BartConfig, rng: &mut RngStream) -> Result<Matrix> {
    let controls: Vec<usize> = (0..data.n()).filter(|&i| data.d()[i] == 0.0).collect();
    let y0: Vec<f64> = controls.iter().map(|&i| data.y()[i]).collect();
    Ok(
        run_bart_regression(&data.x().select_rows(&controls), &y0, bart, rng, Some(data.x()))?
            .test_fitted
            .expect("test rows requested"),
    )
}

/// Mean-response posterior: BART fit to the observed rows and evaluated at
/// every row, then plug-in, one-step or debiased draws.
///
/// Streams: `child(0)` drives the outcome chain, `child(1)` the propensity
/// chain (one-step only), `child(2)` the bootstrap weights.
pub fn run_mean_response(
    data: &MissingDataset,
    method: Method,
    pilots: Option<&MeanPilots>,
    setup: &CorrectionSpec,
    rng: &mut RngStream,
) -> Result<DrawSet> {
    check_draws(setup.num_draws, setup.bart.num_draws)?;
    if method == Method::Robart {
        require(pilots)?;
    }
    let m_draws = mean_outcome_draws(data, &setup.bart, &mut rng.child(0))?;
    let pi_draws = match method {
        Method::Onestep => Some(run_bart_binary(data.x(), data.r(), &setup.bart, &mut rng.child(1), None)?.fitted),
        _ => None,
    };
    mean_response_from_draws(
        data,
        method,
        &m_draws,
        pi_draws.as_ref(),
        pilots,
        setup.num_draws,
        setup.clip_eps,
        &mut rng.child(2),
    )
}

/// ATE draws from precomputed draws of `m(1, X_i)`, `m(0, X_i)` and
/// `m(D_i, X_i)` (each S x n).
///
/// Per draw: `Σ W_i [m1 - m0 + γ(D_i, X_i)(Y_i - m(D_i, X_i))]`. The robart
/// correction is `(1/n) Σ [Δ1 - Δ0 - γ̂ Δd]` with `Δ = m^s - m̂`, the
/// difference of the same functional at the draw and at the pilot.
#[allow(clippy::too_many_arguments)]
pub fn ate_from_draws(
    data: &TreatmentDataset,
    method: Method,
    m1_draws: &Matrix,
    m0_draws: &Matrix,
    md_draws: &Matrix,
    pi_draws: Option<&Matrix>,
    pilots: Option<&TreatmentPilots>,
    num_draws: usize,
    clip_eps: f64,
    rng: &mut RngStream,
) -> Result<DrawSet> {
    let n = data.n();
    for m in [m1_draws, m0_draws, md_draws] {
        check_rows(n, m)?;
        check_draws(num_draws, m.nrows())?;
    }
    let (y, d) = (data.y(), data.d());
    let gamma_hat = match method {
        Method::Robart => Some(
            d.iter()
                .zip(&require(pilots)?.pi)
                .map(|(&di, &pi)| riesz_representer(Estimand::Ate, di, pi, None))
                .collect::<Result<Vec<f64>>>()?,
        ),
        _ => None,
    };
    let mut chi = Vec::with_capacity(num_draws);
    let mut b_hat = Vec::with_capacity(num_draws);
    let mut gamma = vec![0.0; n];
    for s in 0..num_draws {
        let w = bayesian_bootstrap_weights(n, rng);
        let (m1, m0, md) = (m1_draws.row(s), m0_draws.row(s), md_draws.row(s));
        let g: &[f64] = match method {
            Method::PluginBart => &[],
            Method::Onestep => {
                let pi = require_pi(pi_draws)?.row(s);
                for i in 0..n {
                    gamma[i] = riesz_representer(Estimand::Ate, d[i], clip(pi[i], clip_eps), None)?;
                }
                &gamma
            }
            Method::Robart => gamma_hat.as_deref().expect("set above"),
        };
        let mut acc = 0.0;
        for i in 0..n {
            let correction = if g.is_empty() { 0.0 } else { g[i] * (y[i] - md[i]) };
            acc += w[i] * (m1[i] - m0[i] + correction);
        }
        chi.push(acc);
        b_hat.push(if method == Method::Robart {
            let p = require(pilots)?;
            (0..n)
                .map(|i| {
                    let d1 = m1[i] - p.m1[i];
                    let d0 = m0[i] - p.m0[i];
                    let dd = if d[i] == 1.0 { d1 } else { d0 };
                    d1 - d0 - g[i] * dd
                })
                .sum::<f64>()
                / n as f64
        } else {
            0.0
        });
    }
    Ok(DrawSet::from_components(method, Estimand::Ate, chi, b_hat))
}

/// ATE posterior from [`ate_outcome_draws`].
pub fn run_ate(
    data: &TreatmentDataset,
    method: Method,
    pilots: Option<&TreatmentPilots>,
    setup: &CorrectionSpec,
    rng: &mut RngStream,
) -> Result<DrawSet> {
    check_draws(setup.num_draws, setup.bart.num_draws)?;
    if method == Method::Robart {
        require(pilots)?;
    }
    let AteDraws { m1, m0, md } = ate_outcome_draws(data, &setup.bart, &mut rng.child(0))?;
    let pi_draws = match method {
        Method::Onestep => Some(run_bart_binary(data.x(), data.d(), &setup.bart, &mut rng.child(1), None)?.fitted),
        _ => None,
    };
    ate_from_draws(
        data,
        method,
        &m1,
        &m0,
        &md,
        pi_draws.as_ref(),
        pilots,
        setup.num_draws,
        setup.clip_eps,
        &mut rng.child(2),
    )
}

/// ATT draws from precomputed draws of `m(0, X_i)` (S x n).
///
/// Per draw: `Σ W_i γ(D_i, X_i)(Y_i - m(0, X_i))`. The robart correction is
/// `(1/n) Σ (1 - γ̂) Δ0` with `Δ0 = m^s(0, ·) - m̂(0, ·)`, the difference of
/// `m(0, x) + γ̂ (y - m(0, x))` at the draw and at the pilot.
#[allow(clippy::too_many_arguments)]
pub fn att_from_draws(
    data: &TreatmentDataset,
    method: Method,
    m0_draws: &Matrix,
    pi_draws: Option<&Matrix>,
    pilots: Option<&TreatmentPilots>,
    num_draws: usize,
    clip_eps: f64,
    rng: &mut RngStream,
) -> Result<DrawSet> {
    let n = data.n();
    check_rows(n, m0_draws)?;
    check_draws(num_draws, m0_draws.nrows())?;
    let (y, d) = (data.y(), data.d());
    let pi_bar = Some(data.treated_share());
    let att_gamma = |pi: &[f64]| -> Result<Vec<f64>> {
        (0..n)
            .map(|i| riesz_representer(Estimand::Att, d[i], pi[i], pi_bar))
            .collect()
    };
    let gamma_hat = match method {
        Method::Robart => Some(att_gamma(&require(pilots)?.pi)?),
        _ => None,
    };
    let mut chi = Vec::with_capacity(num_draws);
    let mut b_hat = Vec::with_capacity(num_draws);
    for s in 0..num_draws {
        let w = bayesian_bootstrap_weights(n, rng);
        let m0 = m0_draws.row(s);
        let per_draw;
        let g: &[f64] = match method {
            Method::PluginBart => {
                // treated-arm contrast only: γ = d / π̄
                per_draw = d.iter().map(|&di| di / pi_bar.unwrap()).collect::<Vec<_>>();
                &per_draw
            }
            Method::Onestep => {
                let pi: Vec<f64> = require_pi(pi_draws)?.row(s).iter().map(|&p| clip(p, clip_eps)).collect();
                per_draw = att_gamma(&pi)?;
                &per_draw
            }
            Method::Robart => gamma_hat.as_deref().expect("set above"),
        };
        chi.push((0..n).map(|i| w[i] * g[i] * (y[i] - m0[i])).sum());
        b_hat.push(if method == Method::Robart {
            let p = require(pilots)?;
            (0..n).map(|i| (1.0 - g[i]) * (m0[i] - p.m0[i])).sum::<f64>() / n as f64
        } else {
            0.0
        });
    }
    Ok(DrawSet::from_components(method, Estimand::Att, chi, b_hat))
}

/// ATT posterior from [`att_outcome_draws`].
pub fn run_att(
    data: &TreatmentDataset,
    method: Method,
    pilots: Option<&TreatmentPilots>,
    setup: &CorrectionSpec,
    rng: &mut RngStream,
) -> Result<DrawSet> {
    check_draws(setup.num_draws, setup.bart.num_draws)?;
    if method == Method::Robart {
        require(pilots)?;
    }
    let m0 = att_outcome_draws(data, &setup.bart, &mut rng.child(0))?;
    let pi_draws = match method {
        Method::Onestep => Some(run_bart_binary(data.x(), data.d(), &setup.bart, &mut rng.child(1), None)?.fitted),
        _ => None,
    };
    att_from_draws(
        data,
        method,
        &m0,
        pi_draws.as_ref(),
        pilots,
        setup.num_draws,
        setup.clip_eps,
        &mut rng.child(2),
    )
}
