use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bart::{run_bart_binary, run_bart_regression, BartConfig};
use crate::error::{invalid, Error, Result};
use crate::pilot::{
    clip, crossfit_outcome, fit_propensity, fold_assignment, predict_propensity, stack_pilots, FeatureMap, OutcomeMethod,
    PropensityLearner,
};
use crate::posterior::{credible_interval, mean_response_from_draws, DrawSet, Interval, MeanPilots, Method};
use crate::rng::{derive_stream, RngStream};

use super::report::{MCCell, MCReport};
use super::{gen_missing_data, model_kinds, Design, SimData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    Plugin,
    Onestep,
    /// Debiased draws with a quadratic logistic propensity pilot.
    RobartLogit,
    /// Debiased draws with a stacked (logistic + probit BART) pilot.
    RobartStacked,
    /// Debiased draws with the true propensity and regression as pilots.
    RobartOracle,
}

impl SimMethod {
    pub fn name(self) -> &'static str {
        match self {
            SimMethod::Plugin => "plugin",
            SimMethod::Onestep => "onestep",
            SimMethod::RobartLogit => "robart-logit",
            SimMethod::RobartStacked => "robart-stacked",
            SimMethod::RobartOracle => "robart-oracle",
        }
    }

    fn posterior_method(self) -> Method {
        match self {
            SimMethod::Plugin => Method::PluginBart,
            SimMethod::Onestep => Method::Onestep,
            _ => Method::Robart,
        }
    }
}

impl std::str::FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plugin" | "plugin-bart" => Ok(SimMethod::Plugin),
            "onestep" => Ok(SimMethod::Onestep),
            "robart-logit" | "robart" => Ok(SimMethod::RobartLogit),
            "robart-stacked" => Ok(SimMethod::RobartStacked),
            "robart-oracle" => Ok(SimMethod::RobartOracle),
            _ => Err(invalid(
                "methods",
                format!("unknown method `{s}` (plugin, onestep, robart-logit, robart-stacked, robart-oracle)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub bart: BartConfig,
    pub num_draws: usize,
    pub alpha: f64,
    pub clip_eps: f64,
    /// Ridge of the logistic pilot (intercept unpenalized).
    pub logit_ridge: f64,
    pub stack_folds: usize,
    /// Folds for the out-of-fold BART outcome pilot of the debiased methods;
    /// 0 uses the outcome chain's own posterior mean instead.
    pub outcome_folds: usize,
    /// Chain settings of the pilot fits: the probit learner inside the
    /// stacked propensity pilot and the out-of-fold outcome pilot.
    pub pilot_bart: BartConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 200 replications, T = 50, 1000 draws after 250 burn-in.
    Desk,
    /// 1000 replications, T = 200, 2000 draws after 500 burn-in.
    Full,
}

impl Profile {
    pub fn reps(self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Full => 1000,
        }
    }

    pub fn sim_config(self) -> SimConfig {
        let (num_trees, num_draws, burn_in) = match self {
            Profile::Desk => (50, 1000, 250),
            Profile::Full => (200, 2000, 500),
        };
        SimConfig {
            bart: BartConfig {
                num_trees,
                num_draws,
                burn_in,
                ..BartConfig::default()
            },
            num_draws,
            ..SimConfig::default()
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(invalid("profile", format!("unknown profile `{s}` (desk, full)"))),
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        let bart = BartConfig {
            num_trees: 50,
            num_draws: 1000,
            burn_in: 250,
            ..BartConfig::default()
        };
        Self {
            num_draws: bart.num_draws,
            bart,
            alpha: 0.05,
            clip_eps: crate::pilot::DEFAULT_CLIP_EPS,
            logit_ridge: 1e-3,
            stack_folds: 5,
            outcome_folds: 5,
            pilot_bart: BartConfig {
                num_trees: 50,
                num_draws: 200,
                burn_in: 100,
                ..BartConfig::default()
            },
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.bart.validate()?;
        self.pilot_bart.validate()?;
        if self.num_draws == 0 || self.num_draws > self.bart.num_draws {
            return Err(invalid(
                "num_draws",
                format!("must lie in 1..={}, got {}", self.bart.num_draws, self.num_draws),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return Err(invalid("clip_eps", "must lie in (0, 0.5)"));
        }
        if self.outcome_folds == 1 {
            return Err(invalid("outcome_folds", "must be 0 or at least 2"));
        }
        if self.stack_folds < 2 {
            return Err(invalid("stack_folds", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: SimMethod,
    pub interval: Interval,
    pub covers: bool,
    pub draws: DrawSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub index: usize,
    pub outcomes: Vec<MethodOutcome>,
}

fn logit_learner(cfg: &SimConfig) -> PropensityLearner {
    PropensityLearner::Logit {
        map: FeatureMap::quadratic(model_kinds()),
        ridge: cfg.logit_ridge,
    }
}

/// One replication: a fresh dataset, one outcome chain shared by every
/// method, and the same bootstrap weights for every method.
///
/// Streams (children of `rng`): 0 data, 1 outcome chain, 2 propensity
/// chain, 3 bootstrap weights, 4 propensity pilot, 5 outcome pilot.
pub fn run_replication(
    design: Design,
    n: usize,
    methods: &[SimMethod],
    cfg: &SimConfig,
    rng: &RngStream,
) -> Result<ReplicationResult> {
    let SimData { data, oracle } = gen_missing_data(n, design, &mut rng.child(0))?;
    let obs = data.observed_rows();
    if obs.len() < 2 {
        return Err(Error::InvalidInput(format!("only {} observed rows", obs.len())));
    }
    let y_obs: Vec<f64> = obs.iter().map(|&i| data.y_observed(i)).collect::<Result<_>>()?;
    let chain = run_bart_regression(&data.x().select_rows(&obs), &y_obs, &cfg.bart, &mut rng.child(1), Some(data.x()))?;
    let m_draws = chain.test_fitted.as_ref().expect("test rows requested");
    let debiased = methods.iter().any(|m| matches!(m, SimMethod::RobartLogit | SimMethod::RobartStacked));
    let m_hat = if !debiased {
        Vec::new()
    } else if cfg.outcome_folds >= 2 {
        let prng = rng.child(5);
        let folds = fold_assignment(n, cfg.outcome_folds, &mut prng.child(0));
        let mut y = vec![0.0; n];
        for (&i, &v) in obs.iter().zip(&y_obs) {
            y[i] = v;
        }
        let method = OutcomeMethod::BartMean(cfg.pilot_bart.clone());
        crossfit_outcome(data.x(), &y, &obs, &folds, &method, &mut prng.child(1))?.predict(data.x())?
    } else {
        chain.test_posterior_mean().expect("test rows requested")
    };
    let pi_draws = if methods.contains(&SimMethod::Onestep) {
        Some(run_bart_binary(data.x(), data.r(), &cfg.bart, &mut rng.child(2), None)?.fitted)
    } else {
        None
    };
    let chi0 = design.true_mean();
    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let pilots = match method {
            SimMethod::Plugin | SimMethod::Onestep => None,
            SimMethod::RobartLogit => {
                let fit = fit_propensity(&logit_learner(cfg), data.x(), data.r(), cfg.clip_eps, &mut rng.child(4))?;
                Some(MeanPilots {
                    pi: predict_propensity(&fit, data.x())?,
                    m: m_hat.clone(),
                })
            }
            SimMethod::RobartStacked => {
                let learners = [logit_learner(cfg), PropensityLearner::BartProbit(cfg.pilot_bart.clone())];
                let res = stack_pilots(&learners, data.x(), data.r(), cfg.stack_folds, cfg.clip_eps, &mut rng.child(4))?;
                Some(MeanPilots {
                    pi: predict_propensity(&res.fit, data.x())?,
                    m: m_hat.clone(),
                })
            }
            SimMethod::RobartOracle => Some(MeanPilots {
                pi: oracle.pi.iter().map(|&p| clip(p, cfg.clip_eps)).collect(),
                m: oracle.m.clone(),
            }),
        };
        let draws = mean_response_from_draws(
            &data,
            method.posterior_method(),
            m_draws,
            pi_draws.as_ref(),
            pilots.as_ref(),
            cfg.num_draws,
            cfg.clip_eps,
            &mut rng.child(3),
        )?;
        let interval = credible_interval(&draws.draws, cfg.alpha)?;
        outcomes.push(MethodOutcome {
            method,
            covers: interval.contains(chi0),
            interval,
            draws,
        });
    }
    Ok(ReplicationResult {
        index: rng.stream_id() as usize,
        outcomes,
    })
}

/// Monte Carlo study of one design and sample size. Replication `r` runs on
/// `derive_stream(master_seed, r)`; results are reduced in replication
/// order, so the report does not depend on `threads`. Failed replications
/// are excluded and counted; more than 1% failures is an error.
pub fn run_mc(
    design: Design,
    n: usize,
    reps: usize,
    methods: &[SimMethod],
    cfg: &SimConfig,
    master_seed: u64,
    threads: usize,
) -> Result<MCReport> {
    cfg.validate()?;
    if reps == 0 {
        return Err(invalid("reps", "must be at least 1"));
    }
    if methods.is_empty() {
        return Err(invalid("methods", "must name at least one method"));
    }
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let results: Vec<Result<ReplicationResult>> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let rng = derive_stream(master_seed, r as u64);
                run_replication(design, n, methods, cfg, &rng).map(|mut res| {
                    // the draw sets are large; the report needs only summaries
                    for o in &mut res.outcomes {
                        o.draws.chi = Vec::new();
                        o.draws.b_hat = Vec::new();
                        o.draws.draws = Vec::new();
                    }
                    res
                })
            })
            .collect()
    });
    let failed: Vec<String> = results
        .iter()
        .enumerate()
        .filter_map(|(r, res)| res.as_ref().err().map(|e| format!("replication {r}: {e}")))
        .collect();
    if failed.len() * 100 > reps {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: reps,
            first: failed[0].clone(),
        });
    }
    for f in &failed {
        log::warn!("{f}");
    }
    let ok: Vec<ReplicationResult> = results.into_iter().filter_map(|r| r.ok()).collect();
    let chi0 = design.true_mean();
    let cells = methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let means: Vec<f64> = ok.iter().map(|r| r.outcomes[k].interval.mean).collect();
            let covers: Vec<bool> = ok.iter().map(|r| r.outcomes[k].covers).collect();
            let lengths: Vec<f64> = ok.iter().map(|r| r.outcomes[k].interval.length).collect();
            MCCell::from_replications(method.name(), design, n, chi0, &means, &covers, &lengths, failed.len())
        })
        .collect();
    Ok(MCReport {
        cells,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
