//! Propensity pilots: logistic regression on a feature expansion, a
//! cross-fitted version, and a stacked logistic + probit BART pilot.

use robart::pilot::{
    crossfit_propensity, fit_propensity, fold_assignment, predict_propensity, stack_pilots, FeatureMap,
    PropensityLearner,
};
use robart::simlab::{gen_missing_data, model_kinds, Design};
use robart::{derive_stream, BartConfig};

fn main() -> robart::Result<()> {
    let sim = gen_missing_data(500, Design::III, &mut derive_stream(3, 0))?;
    let (x, r) = (sim.data.x(), sim.data.r());
    let map = FeatureMap::quadratic(model_kinds());
    println!("{} expanded features: {:?}", map.dim(), &map.names()[..6]);
    let logit = PropensityLearner::Logit { map, ridge: 1e-3 };

    let fit = fit_propensity(&logit, x, r, 0.01, &mut derive_stream(3, 1))?;
    let pi = predict_propensity(&fit, x)?;
    let err = |p: &[f64]| p.iter().zip(&sim.oracle.pi).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64;
    println!("logit pilot: mean |pi_hat - pi| = {:.3}", err(&pi));

    let folds = fold_assignment(x.nrows(), 5, &mut derive_stream(3, 2));
    let cf = crossfit_propensity(&logit, x, r, &folds, 0.01, &mut derive_stream(3, 3))?;
    println!("cross-fitted logit: mean |pi_hat - pi| = {:.3}", err(&predict_propensity(&cf, x)?));

    let probit = PropensityLearner::BartProbit(BartConfig {
        num_trees: 30,
        num_draws: 200,
        burn_in: 100,
        ..BartConfig::default()
    });
    let stack = stack_pilots(&[logit, probit], x, r, 5, 0.01, &mut derive_stream(3, 4))?;
    println!(
        "stacked weights (logit, probit BART): {:?}, per-learner cv log-loss {:.4?}",
        stack.weights, stack.cv_log_loss
    );
    println!("stacked pilot: mean |pi_hat - pi| = {:.3}", err(&predict_propensity(&stack.fit, x)?));
    Ok(())
}
