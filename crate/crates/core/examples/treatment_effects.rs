//! ATE and ATT posteriors through the configured pipeline, with and
//! without trimming on the estimated propensity.

use robart::dataio::RunConfig;
use robart::estimate::estimate_treatment;
use robart::pilot::Estimand;
use robart::posterior::{Method, TreatmentDataset};
use robart::pilot::logistic;
use robart::{derive_stream, ColumnKind, Matrix};

fn main() -> robart::Result<()> {
    let mut rng = derive_stream(8, 0);
    let n = 400;
    let x = Matrix::new(n, 2, (0..2 * n).map(|_| rng.standard_normal()).collect())?;
    let d: Vec<f64> = x
        .rows()
        .map(|r| if rng.bernoulli(logistic(1.5 * r[0])) { 1.0 } else { 0.0 })
        .collect();
    // effect 1 + x1 on the treated arm: ATE 1, ATT above 1 since treated units have larger x1
    let y: Vec<f64> = x
        .rows()
        .zip(&d)
        .map(|(r, &di)| r[0] + 0.5 * r[1] + di * (1.0 + r[0]) + rng.standard_normal())
        .collect();
    let data = TreatmentDataset::new(x, vec![ColumnKind::Continuous; 2], y, d)?;

    for (estimand, trim) in [(Estimand::Ate, 0.0), (Estimand::Ate, 0.05), (Estimand::Att, 0.0)] {
        for method in [Method::PluginBart, Method::Robart] {
            let cfg = RunConfig {
                method,
                trim,
                num_trees: 50,
                draws: 500,
                burn_in: 250,
                ..RunConfig::default()
            };
            let run = estimate_treatment(&data, &cfg, estimand)?;
            let s = run.draws.summary(cfg.alpha, cfg.seed)?;
            println!(
                "{estimand:?} trim {trim:<4} {:<12} n {} -> {}: {:.3} [{:.3}, {:.3}]",
                method.name(),
                run.n,
                run.n_effective,
                s.mean,
                s.lo,
                s.hi
            );
        }
    }
    Ok(())
}
