//! Mean of an outcome missing at random: plug-in BART, one-step and
//! debiased posteriors on one simulated dataset with selective missingness.

use robart::pilot::{fit_propensity, predict_propensity, FeatureMap, PropensityLearner};
use robart::posterior::{aipw_point_estimate, run_mean_response, CorrectionSpec, MeanPilots, Method};
use robart::simlab::{gen_missing_data, model_kinds, Design};
use robart::{derive_stream, run_bart_regression, BartConfig};

fn main() -> robart::Result<()> {
    let design = Design::IV;
    let sim = gen_missing_data(300, design, &mut derive_stream(5, 0))?;
    let data = &sim.data;
    let bart = BartConfig {
        num_trees: 50,
        num_draws: 1000,
        burn_in: 250,
        ..BartConfig::default()
    };

    // pilots: quadratic logit propensity, BART posterior-mean regression
    let learner = PropensityLearner::Logit {
        map: FeatureMap::quadratic(model_kinds()),
        ridge: 1e-3,
    };
    let pi = predict_propensity(&fit_propensity(&learner, data.x(), data.r(), 0.01, &mut derive_stream(5, 1))?, data.x())?;
    let obs = data.observed_rows();
    let y_obs: Vec<f64> = obs.iter().map(|&i| data.y_observed(i)).collect::<robart::Result<_>>()?;
    let m = run_bart_regression(&data.x().select_rows(&obs), &y_obs, &bart, &mut derive_stream(5, 2), Some(data.x()))?
        .test_posterior_mean()
        .expect("test rows were given");
    println!("truth {:.3}, AIPW point estimate {:.3}", design.true_mean(), aipw_point_estimate(data, &pi, &m)?);

    let pilots = MeanPilots { pi, m };
    let setup = CorrectionSpec::new(bart);
    for method in [Method::PluginBart, Method::Onestep, Method::Robart] {
        let draws = run_mean_response(data, method, Some(&pilots), &setup, &mut derive_stream(5, 3))?;
        let s = draws.summary(0.05, 5)?;
        println!("{:<12} mean {:.3}  95% interval [{:.3}, {:.3}]", method.name(), s.mean, s.lo, s.hi);
    }
    Ok(())
}
