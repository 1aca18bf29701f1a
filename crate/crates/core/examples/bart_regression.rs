//! Fitting BART to a nonlinear signal and predicting at new points.

use robart::{derive_stream, run_bart_regression, BartConfig, Matrix};

fn main() -> robart::Result<()> {
    let mut rng = derive_stream(7, 0);
    let n = 400;
    let f = |x: &[f64]| (3.0 * x[0]).sin() + if x[1] > 0.5 { 1.0 } else { 0.0 };
    let x = Matrix::new(n, 3, (0..3 * n).map(|_| rng.uniform()).collect())?;
    let y: Vec<f64> = x.rows().map(|r| f(r) + 0.3 * rng.standard_normal()).collect();
    let x_test = Matrix::new(100, 3, (0..300).map(|_| rng.uniform()).collect())?;

    let cfg = BartConfig {
        num_trees: 50,
        num_draws: 500,
        burn_in: 250,
        ..BartConfig::default()
    };
    let draws = run_bart_regression(&x, &y, &cfg, &mut derive_stream(7, 1), Some(&x_test))?;
    let pred = draws.test_posterior_mean().expect("test rows were given");
    let rmse = (x_test.rows().zip(&pred).map(|(r, p)| (f(r) - p).powi(2)).sum::<f64>() / 100.0).sqrt();
    let sigma = draws.sigma.iter().sum::<f64>() / draws.sigma.len() as f64;
    println!("test RMSE against the truth: {rmse:.3}");
    println!("posterior mean noise sd: {sigma:.3} (truth 0.3)");
    println!(
        "acceptance rates grow {:.2} prune {:.2} change {:.2}",
        draws.stats.acceptance_rate(robart::bart::Move::Grow),
        draws.stats.acceptance_rate(robart::bart::Move::Prune),
        draws.stats.acceptance_rate(robart::bart::Move::Change)
    );
    Ok(())
}
