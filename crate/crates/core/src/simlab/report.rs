use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::Design;

/// Metrics of one method on one design and sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct MCCell {
    pub method: String,
    pub design: Design,
    pub n: usize,
    /// `|mean of posterior means - truth|`.
    pub bias: f64,
    pub signed_bias: f64,
    /// Share of replications whose interval contains the truth.
    pub cp: f64,
    /// `sqrt(cp (1 - cp) / replications)`.
    pub cp_se: f64,
    /// Average interval length.
    pub cil: f64,
    pub replications: usize,
    pub failures: usize,
}

impl MCCell {
    #[allow(clippy::too_many_arguments)]
    pub fn from_replications(
        method: &str,
        design: Design,
        n: usize,
        truth: f64,
        means: &[f64],
        covers: &[bool],
        lengths: &[f64],
        failures: usize,
    ) -> Self {
        let reps = means.len();
        let avg = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let signed_bias = avg(means) - truth;
        let cp = covers.iter().filter(|&&c| c).count() as f64 / reps.max(1) as f64;
        Self {
            method: method.to_string(),
            design,
            n,
            bias: signed_bias.abs(),
            signed_bias,
            cp,
            cp_se: (cp * (1.0 - cp) / reps.max(1) as f64).sqrt(),
            cil: avg(lengths),
            replications: reps,
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MCReport {
    pub cells: Vec<MCCell>,
    /// Wall-clock seconds; kept out of the CSV so reruns compare equal.
    pub runtime_secs: f64,
}

impl MCReport {
    pub fn cell(&self, method: &str, design: Design, n: usize) -> Option<&MCCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.design == design && c.n == n)
    }

    pub fn merge(&mut self, other: MCReport) {
        self.cells.extend(other.cells);
        self.runtime_secs += other.runtime_secs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStyle {
    Markdown,
    Csv,
}

const CSV_HEADER: &str = "method,design,n,bias,signed_bias,cp,cp_se,cil,replications,failures";

/// Markdown: one row per (n, method), Bias / CP / CIL per design, three
/// decimals. CSV: one row per cell with shortest round-trip floats.
pub fn format_report(report: &MCReport, style: ReportStyle) -> String {
    match style {
        ReportStyle::Csv => {
            let mut out = format!("{CSV_HEADER}\n");
            for c in &report.cells {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    c.method, c.design, c.n, c.bias, c.signed_bias, c.cp, c.cp_se, c.cil, c.replications, c.failures
                );
            }
            out
        }
        ReportStyle::Markdown => {
            let designs: BTreeSet<Design> = report.cells.iter().map(|c| c.design).collect();
            let mut rows: Vec<(usize, &str)> = Vec::new();
            for c in &report.cells {
                if !rows.contains(&(c.n, c.method.as_str())) {
                    rows.push((c.n, c.method.as_str()));
                }
            }
            let mut out = String::from("| n | Method |");
            for d in &designs {
                let _ = write!(out, " {d} Bias | {d} CP | {d} CIL |");
            }
            out.push_str("\n|---|---|");
            out.push_str(&"---|".repeat(3 * designs.len()));
            out.push('\n');
            for (n, method) in rows {
                let _ = write!(out, "| {n} | {method} |");
                for &d in &designs {
                    match report.cell(method, d, n) {
                        Some(c) => {
                            let _ = write!(out, " {:.3} | {:.3} | {:.3} |", c.bias, c.cp, c.cil);
                        }
                        None => out.push_str("  |  |  |"),
                    }
                }
                out.push('\n');
            }
            out
        }
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, row: usize, idx: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).ok_or_else(|| Error::Csv {
        row,
        column: name.into(),
        reason: "missing field".into(),
    })?;
    raw.parse().map_err(|e: T::Err| Error::Csv {
        row,
        column: name.into(),
        reason: format!("cannot parse `{raw}`: {e}"),
    })
}

/// Inverse of the CSV style of [`format_report`].
pub fn parse_report_csv(text: &str) -> Result<MCReport> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::InvalidInput(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::InvalidInput(format!("unexpected report header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut cells = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            column: String::new(),
            reason: e.to_string(),
        })?;
        cells.push(MCCell {
            method: field(&rec, row, 0, "method")?,
            design: field(&rec, row, 1, "design")?,
            n: field(&rec, row, 2, "n")?,
            bias: field(&rec, row, 3, "bias")?,
            signed_bias: field(&rec, row, 4, "signed_bias")?,
            cp: field(&rec, row, 5, "cp")?,
            cp_se: field(&rec, row, 6, "cp_se")?,
            cil: field(&rec, row, 7, "cil")?,
            replications: field(&rec, row, 8, "replications")?,
            failures: field(&rec, row, 9, "failures")?,
        });
    }
    Ok(MCReport {
        cells,
        runtime_secs: 0.0,
    })
}
