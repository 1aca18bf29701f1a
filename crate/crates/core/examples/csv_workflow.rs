//! From a CSV file to a posterior summary: schema, categorical expansion,
//! a flat TOML config, and the same run through the command line.

use robart::dataio::{load_csv, Dataset, RunConfig};
use robart::estimate::estimate_mean;
use robart::pilot::Estimand;
use robart::simlab::{gen_missing_data, Design};
use robart::derive_stream;

fn main() -> robart::Result<()> {
    let dir = std::env::temp_dir().join("robart_csv_workflow");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("survey.csv");

    // write a file with a text-coded categorical column
    let sim = gen_missing_data(250, Design::III, &mut derive_stream(4, 0))?;
    let mut text = String::from("income,responded,age,score,region\n");
    for i in 0..250 {
        let x = sim.oracle.raw.row(i);
        let y = if sim.data.r()[i] == 1.0 { format!("{}", sim.oracle.y_full[i]) } else { "NA".into() };
        let region = ["north", "south", "east"][x[4] as usize - 1];
        text.push_str(&format!("{y},{},{},{},{region}\n", sim.data.r()[i], x[0], x[1]));
    }
    std::fs::write(&path, text)?;

    let cfg = RunConfig::from_toml(
        r#"
        seed = 3
        outcome = "income"
        indicator = "responded"
        categorical = ["region"]
        method = "robart"
        num_trees = 50
        draws = 400
        burn_in = 200
        "#,
    )?;
    let Dataset::Missing(data) = load_csv(&path, &cfg.schema(), Estimand::Mean)? else {
        unreachable!("the mean estimand loads a missing-data set")
    };
    println!("n = {}, {} covariate columns after expansion", data.n(), data.x().ncols());
    let s = estimate_mean(&data, &cfg)?.summary(cfg.alpha, cfg.seed)?;
    println!("library: {}", serde_json::to_string(&s).expect("plain struct"));

    // the command line resolves the same settings and writes a manifest
    let cfg_path = dir.join("run.toml");
    std::fs::write(&cfg_path, cfg.to_toml()?)?;
    let out = dir.join("draws.csv");
    let code = robart::cli::cli_main([
        "robart",
        "fit",
        "--config",
        cfg_path.to_str().unwrap(),
        "--input",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    println!("cli exit code {code}; outputs in {}", dir.display());
    Ok(())
}
