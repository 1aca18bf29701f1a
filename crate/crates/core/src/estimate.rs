//! End-to-end estimation on a loaded dataset, driven by a [`RunConfig`].
//!
//! Streams (children of `derive_stream(seed, 0)`): 0 outcome chain,
//! 1 propensity chain (onestep), 2 bootstrap weights, 3 propensity pilot,
//! 4 outcome pilot, 5 propensity folds, 6 trimming pilot, 7 outcome folds.

use crate::bart::run_bart_binary;
use crate::dataio::{trim_by_propensity, OutcomePilotChoice, PilotChoice, RunConfig};
use crate::error::{invalid, Result};
use crate::matrix::{ColumnKind, Matrix};
use crate::pilot::{
    crossfit_outcome, crossfit_propensity, fit_outcome_pilot, fit_propensity, fold_assignment, predict_propensity,
    stack_pilots, Estimand, OutcomeMethod, PilotFit, PropensityLearner,
};
use crate::posterior::{
    ate_from_draws, ate_outcome_draws, att_from_draws, att_outcome_draws, mean_outcome_draws, mean_response_from_draws,
    AteDraws, DrawSet, MeanPilots, Method, MissingDataset, TreatmentDataset, TreatmentPilots,
};
use crate::rng::{derive_stream, RngStream};
use crate::BartConfig;

fn logit_learner(cfg: &RunConfig, kinds: &[ColumnKind]) -> PropensityLearner {
    PropensityLearner::Logit {
        map: cfg.features.map(kinds.to_vec()),
        ridge: cfg.ridge,
    }
}

/// Light chain for pilot fits: the probit learner of the stacked pilot and
/// the out-of-fold outcome pilot.
fn pilot_bart(cfg: &RunConfig) -> BartConfig {
    BartConfig {
        num_trees: cfg.num_trees.min(50),
        num_draws: 200,
        burn_in: 100,
        ..cfg.bart()
    }
}

fn folds(cfg: &RunConfig, n: usize, rng: &RngStream) -> Option<Vec<usize>> {
    (cfg.crossfit >= 2).then(|| fold_assignment(n, cfg.crossfit, &mut rng.child(5)))
}

fn outcome_folds(cfg: &RunConfig, n: usize, rng: &RngStream) -> Option<Vec<usize>> {
    (cfg.outcome_crossfit >= 2).then(|| fold_assignment(n, cfg.outcome_crossfit, &mut rng.child(7)))
}

/// Clipped propensity pilot at every row, cross-fitted when configured.
pub fn propensity_pilot(
    cfg: &RunConfig,
    x: &Matrix,
    kinds: &[ColumnKind],
    labels: &[f64],
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let folds = folds(cfg, x.nrows(), rng);
    let mut prng = rng.child(3);
    let fit: PilotFit = match (cfg.pilot, &folds) {
        (PilotChoice::Logit, None) => fit_propensity(&logit_learner(cfg, kinds), x, labels, cfg.clip_eps, &mut prng)?,
        (PilotChoice::Logit, Some(f)) => {
            crossfit_propensity(&logit_learner(cfg, kinds), x, labels, f, cfg.clip_eps, &mut prng)?
        }
        (PilotChoice::Stacked, None) => {
            let learners = [logit_learner(cfg, kinds), PropensityLearner::BartProbit(pilot_bart(cfg))];
            stack_pilots(&learners, x, labels, 5, cfg.clip_eps, &mut prng)?.fit
        }
        (PilotChoice::Stacked, Some(_)) => {
            return Err(invalid("crossfit", "cross-fitting is available for the logit pilot only"))
        }
    };
    predict_propensity(&fit, x)
}

/// Outcome pilot at every row of `x` after training on `train`. `default`
/// holds the outcome chain's posterior mean, used for the BART pilot when
/// cross-fitting is off.
fn outcome_pilot(
    cfg: &RunConfig,
    x: &Matrix,
    kinds: &[ColumnKind],
    y: &[f64],
    train: &[usize],
    folds: Option<&[usize]>,
    default: impl FnOnce() -> Vec<f64>,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let method = match cfg.outcome_pilot {
        OutcomePilotChoice::BartMean => OutcomeMethod::BartMean(pilot_bart(cfg)),
        OutcomePilotChoice::OlsExpansion => OutcomeMethod::OlsExpansion {
            map: cfg.features.map(kinds.to_vec()),
            ridge: cfg.ridge,
        },
    };
    let mut orng = rng.child(4);
    match (folds, &method) {
        (None, OutcomeMethod::BartMean(_)) => Ok(default()),
        (None, _) => fit_outcome_pilot(x, y, train, &method, &mut orng)?.predict(x),
        (Some(f), _) => crossfit_outcome(x, y, train, f, &method, &mut orng)?.predict(x),
    }
}

fn propensity_draws(cfg: &RunConfig, x: &Matrix, labels: &[f64], rng: &RngStream) -> Result<Option<Matrix>> {
    Ok(match cfg.method {
        Method::Onestep => Some(run_bart_binary(x, labels, &cfg.bart(), &mut rng.child(1), None)?.fitted),
        _ => None,
    })
}

/// Mean-response draws for `cfg.method`.
pub fn estimate_mean(data: &MissingDataset, cfg: &RunConfig) -> Result<DrawSet> {
    cfg.validate()?;
    let rng = derive_stream(cfg.seed, 0);
    let m_draws = mean_outcome_draws(data, &cfg.bart(), &mut rng.child(0))?;
    let pi_draws = propensity_draws(cfg, data.x(), data.r(), &rng)?;
    let pilots = if cfg.method == Method::Robart {
        let pi = propensity_pilot(cfg, data.x(), data.kinds(), data.r(), &rng)?;
        let folds = outcome_folds(cfg, data.n(), &rng);
        let y = data.y_masked();
        let m = outcome_pilot(
            cfg,
            data.x(),
            data.kinds(),
            &y,
            &data.observed_rows(),
            folds.as_deref(),
            || m_draws.column_means(),
            &rng,
        )?;
        Some(MeanPilots { pi, m })
    } else {
        None
    };
    mean_response_from_draws(
        data,
        cfg.method,
        &m_draws,
        pi_draws.as_ref(),
        pilots.as_ref(),
        cfg.draws,
        cfg.clip_eps,
        &mut rng.child(2),
    )
}

/// Treatment-effect draws with the sample sizes before and after trimming.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentRun {
    pub draws: DrawSet,
    pub n: usize,
    pub n_effective: usize,
}

/// ATE or ATT draws for `cfg.method`. With `cfg.trim > 0` the sample is
/// first trimmed on a logistic propensity fitted to all rows; every pilot
/// and chain is then fitted on the trimmed sample.
pub fn estimate_treatment(data: &TreatmentDataset, cfg: &RunConfig, estimand: Estimand) -> Result<TreatmentRun> {
    cfg.validate()?;
    if estimand == Estimand::Mean {
        return Err(invalid("estimand", "use estimate_mean for the mean response"));
    }
    let rng = derive_stream(cfg.seed, 0);
    let n = data.n();
    let trimmed;
    let data = if cfg.trim > 0.0 {
        let fit = fit_propensity(&logit_learner(cfg, data.kinds()), data.x(), data.d(), cfg.clip_eps, &mut rng.child(6))?;
        // unclipped, so the trimming level is not masked by the clip
        let pi = fit.predict(data.x())?;
        trimmed = trim_by_propensity(data, &pi, cfg.trim)?.0;
        log::info!("trimming at {} keeps {} of {n} rows", cfg.trim, trimmed.n());
        &trimmed
    } else {
        data
    };
    let pi_draws = propensity_draws(cfg, data.x(), data.d(), &rng)?;
    let robart = cfg.method == Method::Robart;
    let pi = if robart {
        propensity_pilot(cfg, data.x(), data.kinds(), data.d(), &rng)?
    } else {
        Vec::new()
    };
    let folds = outcome_folds(cfg, data.n(), &rng);
    let draws = match estimand {
        Estimand::Ate => {
            let AteDraws { m1, m0, md } = ate_outcome_draws(data, &cfg.bart(), &mut rng.child(0))?;
            let pilots = if robart {
                // rows 0..n observed design, then every unit at d = 1 and d = 0
                let nn = data.n();
                let big = data.design(None).vstack(&data.design(Some(1.0)))?.vstack(&data.design(Some(0.0)))?;
                let y: Vec<f64> = data.y().iter().copied().cycle().take(3 * nn).collect();
                let train: Vec<usize> = (0..nn).collect();
                let big_folds = folds.as_ref().map(|f| f.iter().copied().cycle().take(3 * nn).collect::<Vec<_>>());
                let fit = outcome_pilot(
                    cfg,
                    &big,
                    &data.design_kinds(),
                    &y,
                    &train,
                    big_folds.as_deref(),
                    || [md.column_means(), m1.column_means(), m0.column_means()].concat(),
                    &rng,
                )?;
                Some(TreatmentPilots {
                    pi: pi.clone(),
                    m1: fit[nn..2 * nn].to_vec(),
                    m0: fit[2 * nn..].to_vec(),
                })
            } else {
                None
            };
            ate_from_draws(
                data,
                cfg.method,
                &m1,
                &m0,
                &md,
                pi_draws.as_ref(),
                pilots.as_ref(),
                cfg.draws,
                cfg.clip_eps,
                &mut rng.child(2),
            )?
        }
        _ => {
            let m0 = att_outcome_draws(data, &cfg.bart(), &mut rng.child(0))?;
            let pilots = if robart {
                let controls: Vec<usize> = (0..data.n()).filter(|&i| data.d()[i] == 0.0).collect();
                let m0_hat = outcome_pilot(
                    cfg,
                    data.x(),
                    data.kinds(),
                    data.y(),
                    &controls,
                    folds.as_deref(),
                    || m0.column_means(),
                    &rng,
                )?;
                Some(TreatmentPilots {
                    pi: pi.clone(),
                    m1: m0_hat.clone(),
                    m0: m0_hat,
                })
            } else {
                None
            };
            att_from_draws(
                data,
                cfg.method,
                &m0,
                pi_draws.as_ref(),
                pilots.as_ref(),
                cfg.draws,
                cfg.clip_eps,
                &mut rng.child(2),
            )?
        }
    };
    Ok(TreatmentRun {
        draws,
        n,
        n_effective: data.n(),
    })
}
