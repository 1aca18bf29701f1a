//! Command-line front end: `simulate`, `fit`, `ate`, `att` and `report`.
//!
//! Settings resolve in three layers: defaults (shaped by `--profile`), the
//! flat TOML file given by `--config`, then explicit flags. Every run
//! writes `<out>.manifest.toml`, which holds the resolved settings and can
//! be passed back through `--config` to reproduce the run.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataio::{load_csv, Dataset, Features, OutcomePilotChoice, PilotChoice, RunConfig};
use crate::error::{Error, Result};
use crate::estimate::{estimate_mean, estimate_treatment};
use crate::pilot::Estimand;
use crate::posterior::{Method, Summary};
use crate::simlab::{format_report, parse_report_csv, run_mc, Design, MCReport, Profile, ReportStyle, SimConfig, SimMethod};

#[derive(Parser, Debug)]
#[command(name = "robart", version, about = "Debiased BART posteriors for means and treatment effects")]
struct Cli {
    /// Flat TOML file of settings (a manifest from an earlier run works too).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo study over simulated designs.
    Simulate(SimArgs),
    /// Mean of an outcome missing at random.
    Fit(EstArgs),
    /// Average treatment effect.
    Ate(EstArgs),
    /// Average treatment effect on the treated.
    Att(EstArgs),
    /// Render a simulation CSV as a table.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
struct ChainArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_trees: Option<usize>,
    /// Retained posterior draws S.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    clip_eps: Option<f64>,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Comma-separated designs (I, II, III, IV).
    #[arg(long, value_delimiter = ',')]
    design: Vec<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated methods: plugin, onestep, robart-logit, robart-stacked, robart-oracle.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Report CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Desk,
    Full,
}

#[derive(Args, Debug)]
struct EstArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Draws CSV path; the summary goes to `<out>.summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    outcome: Option<String>,
    /// Response indicator (fit) or treatment column (ate, att).
    #[arg(long)]
    indicator: Option<String>,
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// plugin-bart, onestep or robart.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, value_enum)]
    pilot: Option<PilotArg>,
    #[arg(long, value_enum)]
    outcome_pilot: Option<OutcomePilotArg>,
    #[arg(long, value_enum)]
    features: Option<FeaturesArg>,
    #[arg(long)]
    ridge: Option<f64>,
    /// Cross-fitting folds for the propensity pilot.
    #[arg(long)]
    crossfit: Option<usize>,
    /// Cross-fitting folds for the outcome pilot (0: the chain's own fit).
    #[arg(long)]
    outcome_crossfit: Option<usize>,
    /// Keep units with estimated propensity in [t, 1 - t].
    #[arg(long)]
    trim: Option<f64>,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PilotArg {
    Logit,
    Stacked,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutcomePilotArg {
    BartMean,
    OlsExpansion,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeaturesArg {
    Linear,
    Quadratic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report CSV written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors in the settings themselves map to exit code 2.
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 2 for usage and settings errors, 1 for failures
/// while running.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `robart --help` for usage");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            let mut table: toml::Table = text.parse().map_err(|e| usage(Error::Config(format!("{e}"))))?;
            table.remove("manifest");
            table
        }
        None => toml::Table::new(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(file, a),
        Command::Fit(a) => estimate(file, a, Estimand::Mean),
        Command::Ate(a) => estimate(file, a, Estimand::Ate),
        Command::Att(a) => estimate(file, a, Estimand::Att),
        Command::Report(a) => report(a),
    }
}

/// Defaults shaped by the profile, overlaid with the file's keys. `fallback`
/// applies when neither the flag nor the file names a profile.
fn resolve(
    mut file: toml::Table,
    profile: Option<Profile>,
    fallback: Option<Profile>,
) -> std::result::Result<RunConfig, Failure> {
    let profile = match profile {
        Some(p) => Some(p),
        None => match file.get("profile") {
            Some(toml::Value::String(s)) => Some(s.parse().map_err(usage)?),
            Some(_) => return Err(Failure::Usage("config error: `profile` must be a string".into())),
            None => fallback,
        },
    };
    let mut cfg = RunConfig::default();
    if let Some(p) = profile {
        let sim = p.sim_config();
        cfg.num_trees = sim.bart.num_trees;
        cfg.draws = sim.num_draws;
        cfg.burn_in = sim.bart.burn_in;
        cfg.reps = p.reps();
        cfg.profile = Some(format!("{p:?}").to_lowercase());
        file.remove("profile");
    }
    let mut base = toml::Table::try_from(&cfg).map_err(|e| usage(Error::Config(e.to_string())))?;
    base.extend(file);
    base.try_into::<RunConfig>().map_err(|e| usage(Error::Config(e.to_string())))
}

fn apply_chain(cfg: &mut RunConfig, c: &ChainArgs) {
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.num_trees {
        cfg.num_trees = v;
    }
    if let Some(v) = c.draws {
        cfg.draws = v;
    }
    if let Some(v) = c.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = c.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = c.clip_eps {
        cfg.clip_eps = v;
    }
}

#[derive(Serialize)]
struct ManifestInfo<'a> {
    command: &'a str,
    version: &'a str,
    runtime_secs: f64,
    outputs: Vec<String>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_manifest(cfg: &RunConfig, command: &str, out: &Path, outputs: &[&Path], runtime: f64) -> Result<PathBuf> {
    let info = ManifestInfo {
        command,
        version: env!("CARGO_PKG_VERSION"),
        runtime_secs: runtime,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut text = format!("# rerun: robart {command} --config <this file>\n");
    text.push_str(&cfg.to_toml()?);
    text.push_str("\n[manifest]\n");
    text.push_str(&toml::to_string(&info).map_err(|e| Error::Config(e.to_string()))?);
    let path = sibling(out, ".manifest.toml");
    std::fs::write(&path, text)?;
    Ok(path)
}

fn simulate(file: toml::Table, a: SimArgs) -> std::result::Result<(), Failure> {
    let profile = a.profile.map(|p| match p {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Full => Profile::Full,
    });
    let mut cfg = resolve(file, profile, Some(Profile::Desk))?;
    apply_chain(&mut cfg, &a.chain);
    if !a.design.is_empty() {
        cfg.designs = a.design;
    }
    if !a.n.is_empty() {
        cfg.sizes = a.n;
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods;
    }
    if let Some(v) = a.reps {
        cfg.reps = v;
    }
    if let Some(v) = a.threads {
        cfg.threads = v;
    }
    if let Some(v) = a.out {
        cfg.output = Some(v);
    }
    cfg.validate().map_err(usage)?;
    let designs: Vec<Design> = cfg.designs.iter().map(|d| d.parse()).collect::<Result<_>>().map_err(usage)?;
    let methods: Vec<SimMethod> = cfg.methods.iter().map(|m| m.parse()).collect::<Result<_>>().map_err(usage)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("report.csv"));
    let sim = SimConfig {
        bart: cfg.bart(),
        num_draws: cfg.draws,
        alpha: cfg.alpha,
        clip_eps: cfg.clip_eps,
        logit_ridge: cfg.logit_ridge,
        stack_folds: cfg.stack_folds,
        outcome_folds: cfg.outcome_crossfit,
        ..SimConfig::default()
    };
    sim.validate().map_err(usage)?;
    let start = Instant::now();
    let mut report = MCReport::default();
    for &design in &designs {
        for &n in &cfg.sizes {
            log::info!("design {design}, n = {n}, {} replications", cfg.reps);
            report.merge(run_mc(design, n, cfg.reps, &methods, &sim, cfg.seed, cfg.threads)?);
        }
    }
    std::fs::write(&out, format_report(&report, ReportStyle::Csv)).map_err(Error::from)?;
    print!("{}", format_report(&report, ReportStyle::Markdown));
    let manifest = write_manifest(&cfg, "simulate", &out, &[&out], start.elapsed().as_secs_f64())?;
    log::info!("wrote {} and {}", out.display(), manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    #[serde(flatten)]
    summary: Summary,
    n: usize,
    n_effective: usize,
    trim: f64,
}

fn estimate(file: toml::Table, a: EstArgs, estimand: Estimand) -> std::result::Result<(), Failure> {
    let mut cfg = resolve(file, None, None)?;
    cfg.estimand = estimand;
    apply_chain(&mut cfg, &a.chain);
    if let Some(v) = a.input {
        cfg.input = Some(v);
    }
    if let Some(v) = a.out {
        cfg.output = Some(v);
    }
    if let Some(v) = a.outcome {
        cfg.outcome = v;
    }
    if let Some(v) = a.indicator {
        cfg.indicator = v;
    } else if estimand != Estimand::Mean && cfg.indicator == "r" {
        cfg.indicator = "d".into();
    }
    if !a.covariates.is_empty() {
        cfg.covariates = a.covariates;
    }
    if !a.categorical.is_empty() {
        cfg.categorical = a.categorical;
    }
    if let Some(v) = a.method {
        cfg.method = v.parse::<Method>().map_err(usage)?;
    }
    if let Some(v) = a.pilot {
        cfg.pilot = match v {
            PilotArg::Logit => PilotChoice::Logit,
            PilotArg::Stacked => PilotChoice::Stacked,
        };
    }
    if let Some(v) = a.outcome_pilot {
        cfg.outcome_pilot = match v {
            OutcomePilotArg::BartMean => OutcomePilotChoice::BartMean,
            OutcomePilotArg::OlsExpansion => OutcomePilotChoice::OlsExpansion,
        };
    }
    if let Some(v) = a.features {
        cfg.features = match v {
            FeaturesArg::Linear => Features::Linear,
            FeaturesArg::Quadratic => Features::Quadratic,
        };
    }
    if let Some(v) = a.ridge {
        cfg.ridge = v;
    }
    if let Some(v) = a.crossfit {
        cfg.crossfit = v;
    }
    if let Some(v) = a.outcome_crossfit {
        cfg.outcome_crossfit = v;
    }
    if let Some(v) = a.trim {
        cfg.trim = v;
    }
    cfg.validate().map_err(usage)?;
    if estimand == Estimand::Mean && cfg.trim > 0.0 {
        return Err(Failure::Usage("--trim applies to ate and att only".into()));
    }
    let input = cfg.input.clone().ok_or_else(|| Failure::Usage("missing --input".into()))?;
    let out = cfg.output.clone().ok_or_else(|| Failure::Usage("missing --out".into()))?;
    let start = Instant::now();
    let data = load_csv(&input, &cfg.schema(), estimand)?;
    let n = data.n();
    let (draws, n_effective) = match data {
        Dataset::Missing(d) => (estimate_mean(&d, &cfg)?, n),
        Dataset::Treatment(d) => {
            let run = estimate_treatment(&d, &cfg, estimand)?;
            (run.draws, run.n_effective)
        }
    };
    draws.write_csv(std::fs::File::create(&out).map_err(Error::from)?)?;
    let summary = RunSummary {
        summary: draws.summary(cfg.alpha, cfg.seed)?,
        n,
        n_effective,
        trim: cfg.trim,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let summary_path = sibling(&out, ".summary.json");
    std::fs::write(&summary_path, format!("{json}\n")).map_err(Error::from)?;
    println!("{json}");
    let command = match estimand {
        Estimand::Mean => "fit",
        Estimand::Ate => "ate",
        Estimand::Att => "att",
    };
    write_manifest(&cfg, command, &out, &[&out, &summary_path], start.elapsed().as_secs_f64())?;
    Ok(())
}

fn report(a: ReportArgs) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(&a.input).map_err(Error::from)?;
    let report = parse_report_csv(&text)?;
    let style = match a.format {
        FormatArg::Markdown => ReportStyle::Markdown,
        FormatArg::Csv => ReportStyle::Csv,
    };
    let rendered = format_report(&report, style);
    match a.out {
        Some(p) => std::fs::write(p, rendered).map_err(Error::from)?,
        None => print!("{rendered}"),
    }
    Ok(())
}
