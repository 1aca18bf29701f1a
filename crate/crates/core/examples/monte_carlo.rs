//! A small Monte Carlo study: bias, coverage and interval length of each
//! method on two designs, rendered as a markdown table and as CSV.

use robart::simlab::{format_report, run_mc, Design, MCReport, SimConfig, SimMethod, ReportStyle};

fn main() -> robart::Result<()> {
    let mut cfg = SimConfig::default();
    cfg.bart.num_trees = 20;
    cfg.bart.num_draws = 300;
    cfg.bart.burn_in = 100;
    cfg.num_draws = 300;
    let methods = [SimMethod::Plugin, SimMethod::RobartLogit, SimMethod::RobartOracle];
    let mut report = MCReport::default();
    for design in [Design::II, Design::IV] {
        // 0 threads: one worker per core; the numbers do not depend on it
        report.merge(run_mc(design, 200, 20, &methods, &cfg, 2024, 0)?);
    }
    print!("{}", format_report(&report, ReportStyle::Markdown));
    println!();
    print!("{}", format_report(&report, ReportStyle::Csv));
    println!("runtime {:.1}s", report.runtime_secs);
    Ok(())
}
