//! Probit BART for a binary response: posterior probabilities per row.

use robart::rng::norm_cdf;
use robart::{derive_stream, run_bart_binary, BartConfig, Matrix};

fn main() -> robart::Result<()> {
    let mut rng = derive_stream(11, 0);
    let n = 600;
    let x = Matrix::new(n, 2, (0..2 * n).map(|_| rng.standard_normal()).collect())?;
    let truth: Vec<f64> = x.rows().map(|r| norm_cdf(0.8 * r[0] - 0.5 * r[1])).collect();
    let labels: Vec<f64> = truth.iter().map(|&p| if rng.bernoulli(p) { 1.0 } else { 0.0 }).collect();

    let cfg = BartConfig {
        num_trees: 50,
        num_draws: 400,
        burn_in: 200,
        ..BartConfig::default()
    };
    let draws = run_bart_binary(&x, &labels, &cfg, &mut derive_stream(11, 1), None)?;
    let p = draws.posterior_mean();
    let mae = p.iter().zip(&truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
    println!("mean absolute error of the posterior probability: {mae:.3}");
    for i in 0..5 {
        println!("row {i}: truth {:.3}, posterior mean {:.3}", truth[i], p[i]);
    }
    Ok(())
}
