//! CSV ingestion, propensity trimming and the flat run configuration.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bart::BartConfig;
use crate::error::{invalid, Error, Result};
use crate::matrix::{ColumnKind, Matrix};
use crate::pilot::{Estimand, FeatureMap, DEFAULT_CLIP_EPS};
use crate::posterior::{Method, MissingDataset, TreatmentDataset};

/// Column roles of an input file. An empty `covariates` list means every
/// column other than the outcome and the indicator. Categorical columns are
/// covariates expanded into one indicator per level, in order of first
/// appearance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    pub outcome: String,
    /// Response indicator `r` (mean) or treatment `d` (ATE, ATT).
    pub indicator: String,
    pub covariates: Vec<String>,
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Missing(MissingDataset),
    Treatment(TreatmentDataset),
}

impl Dataset {
    pub fn n(&self) -> usize {
        match self {
            Dataset::Missing(d) => d.n(),
            Dataset::Treatment(d) => d.n(),
        }
    }
}

/// Expanded covariates with their names and kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub x: Matrix,
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan")
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
        row,
        column: column.to_string(),
        reason: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            row,
            column: column.to_string(),
            reason: "value is not finite".into(),
        });
    }
    Ok(v)
}

/// Reads a dataset for `estimand`. Rows are numbered from 1 after the
/// header in error messages.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, estimand: Estimand) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::InvalidInput(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let col = |name: &str| -> Result<usize> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("column `{name}` not in header")))
    };
    let y_col = col(&schema.outcome)?;
    let r_col = col(&schema.indicator)?;
    let mut cov_names: Vec<String> = if schema.covariates.is_empty() {
        header
            .iter()
            .filter(|h| **h != schema.outcome && **h != schema.indicator)
            .cloned()
            .collect()
    } else {
        schema.covariates.clone()
    };
    for c in &schema.categorical {
        if !cov_names.contains(c) {
            cov_names.push(c.clone());
        }
    }
    let cov_cols: Vec<usize> = cov_names.iter().map(|c| col(c)).collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            row: k + 1,
            column: String::new(),
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    let n = records.len();
    if n == 0 {
        return Err(Error::InvalidInput("file has no data rows".into()));
    }

    let mut ind = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (k, rec) in records.iter().enumerate() {
        let row = k + 1;
        let r = parse_cell(&rec[r_col], row, &schema.indicator)?;
        if r != 0.0 && r != 1.0 {
            return Err(Error::Csv {
                row,
                column: schema.indicator.clone(),
                reason: format!("indicator must be 0 or 1, got {r}"),
            });
        }
        let cell = &rec[y_col];
        let yv = if is_missing(cell) {
            if estimand != Estimand::Mean || r == 1.0 {
                return Err(Error::Csv {
                    row,
                    column: schema.outcome.clone(),
                    reason: "outcome missing".into(),
                });
            }
            None
        } else {
            Some(parse_cell(cell, row, &schema.outcome)?)
        };
        ind.push(r);
        y.push(yv);
    }

    let cov = expand_covariates(&records, &cov_names, &cov_cols, &schema.categorical)?;
    log::info!(
        "loaded {n} rows, {} covariate columns ({} after expansion), {} with {} = 1",
        cov_names.len(),
        cov.names.len(),
        ind.iter().filter(|&&v| v == 1.0).count(),
        schema.indicator
    );
    match estimand {
        Estimand::Mean => {
            let y = y
                .into_iter()
                .zip(&ind)
                .map(|(v, &r)| if r == 1.0 { v } else { None })
                .collect();
            Ok(Dataset::Missing(MissingDataset::new(cov.x, cov.kinds, y, ind)?))
        }
        Estimand::Ate | Estimand::Att => Ok(Dataset::Treatment(TreatmentDataset::new(
            cov.x,
            cov.kinds,
            y.into_iter().map(|v| v.expect("checked above")).collect(),
            ind,
        )?)),
    }
}

fn expand_covariates(
    records: &[csv::StringRecord],
    names: &[String],
    cols: &[usize],
    categorical: &[String],
) -> Result<Covariates> {
    let n = records.len();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut out_names = Vec::new();
    let mut kinds = Vec::new();
    let mut group = 0;
    for (name, &c) in names.iter().zip(cols) {
        if categorical.contains(name) {
            let mut levels: Vec<&str> = Vec::new();
            let mut codes = Vec::with_capacity(n);
            for rec in records {
                let v = rec[c].trim();
                let code = match levels.iter().position(|l| *l == v) {
                    Some(p) => p,
                    None => {
                        levels.push(v);
                        levels.len() - 1
                    }
                };
                codes.push(code);
            }
            for (level, l) in levels.iter().enumerate() {
                columns.push(codes.iter().map(|&k| if k == level { 1.0 } else { 0.0 }).collect());
                out_names.push(format!("{name}={l}"));
                kinds.push(ColumnKind::OneHot { group, level });
            }
            group += 1;
        } else {
            let mut v = Vec::with_capacity(n);
            for (k, rec) in records.iter().enumerate() {
                v.push(parse_cell(&rec[c], k + 1, name)?);
            }
            let binary = v.iter().all(|&a| a == 0.0 || a == 1.0);
            kinds.push(if binary { ColumnKind::Binary } else { ColumnKind::Continuous });
            columns.push(v);
            out_names.push(name.clone());
        }
    }
    let p = columns.len();
    let mut data = Vec::with_capacity(n * p);
    for i in 0..n {
        data.extend(columns.iter().map(|c| c[i]));
    }
    Ok(Covariates {
        x: Matrix::new(n, p, data)?,
        names: out_names,
        kinds,
    })
}

pub fn load_csv(path: &Path, schema: &Schema, estimand: Estimand) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, schema, estimand)
}

/// Indices of the rows with `t <= pi <= 1 - t`.
pub fn trim_rows(pi: &[f64], t: f64) -> Result<Vec<usize>> {
    if !(0.0..0.5).contains(&t) {
        return Err(invalid("trim", format!("must lie in [0, 0.5), got {t}")));
    }
    let keep: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] >= t && pi[i] <= 1.0 - t).collect();
    if keep.is_empty() {
        return Err(Error::InvalidInput(format!("trimming at {t} removes every row")));
    }
    Ok(keep)
}

/// Keeps the rows with `t <= pi <= 1 - t`; returns the subset and its size.
/// The subset must still contain both arms.
pub fn trim_by_propensity(data: &TreatmentDataset, pi: &[f64], t: f64) -> Result<(TreatmentDataset, usize)> {
    if pi.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: pi.len(),
        });
    }
    let keep = trim_rows(pi, t)?;
    let n_bar = keep.len();
    Ok((data.subset(&keep)?, n_bar))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotChoice {
    /// Logistic regression on the expanded features.
    Logit,
    /// Stacked logistic and probit BART.
    Stacked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomePilotChoice {
    /// Posterior mean of the outcome chain.
    BartMean,
    /// Least squares on the expanded features.
    OlsExpansion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Features {
    Linear,
    Quadratic,
}

impl Features {
    pub fn map(self, kinds: Vec<ColumnKind>) -> FeatureMap {
        match self {
            Features::Linear => FeatureMap::linear(kinds),
            Features::Quadratic => FeatureMap::quadratic(kinds),
        }
    }
}

/// Every setting of a run in one flat table. Unset keys keep their
/// defaults; unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub estimand: Estimand,
    pub method: Method,
    pub pilot: PilotChoice,
    pub outcome_pilot: OutcomePilotChoice,
    pub features: Features,
    pub ridge: f64,
    pub clip_eps: f64,
    /// Cross-fitting folds for the propensity pilot; 0 fits it on the full
    /// sample.
    pub crossfit: usize,
    /// Cross-fitting folds for the outcome pilot; 0 takes the outcome
    /// chain's posterior mean (BART) or a full-sample fit (OLS).
    pub outcome_crossfit: usize,
    pub num_trees: usize,
    /// Retained draws `S`.
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub base: f64,
    pub power: f64,
    pub sigma_df: f64,
    pub sigma_quantile: f64,
    pub leaf_k: f64,
    pub sparse: bool,
    pub alpha: f64,
    /// Propensity trimming level `t` (treatment estimands).
    pub trim: f64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub outcome: String,
    pub indicator: String,
    pub covariates: Vec<String>,
    pub categorical: Vec<String>,
    // simulation
    pub profile: Option<String>,
    pub designs: Vec<String>,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub methods: Vec<String>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    pub threads: usize,
    pub stack_folds: usize,
    pub logit_ridge: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            estimand: Estimand::Mean,
            method: Method::Robart,
            pilot: PilotChoice::Logit,
            outcome_pilot: OutcomePilotChoice::BartMean,
            features: Features::Quadratic,
            ridge: 1e-3,
            clip_eps: DEFAULT_CLIP_EPS,
            crossfit: 0,
            outcome_crossfit: 5,
            num_trees: 200,
            draws: 2000,
            burn_in: 500,
            thin: 1,
            base: 0.95,
            power: 2.0,
            sigma_df: 3.0,
            sigma_quantile: 0.9,
            leaf_k: 2.0,
            sparse: false,
            alpha: 0.05,
            trim: 0.0,
            input: None,
            output: None,
            outcome: "y".into(),
            indicator: "r".into(),
            covariates: Vec::new(),
            categorical: Vec::new(),
            profile: None,
            designs: vec!["II".into()],
            sizes: vec![250],
            reps: 200,
            methods: vec!["plugin".into(), "robart-logit".into()],
            threads: 0,
            stack_folds: 5,
            logit_ridge: 1e-3,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bart(&self) -> BartConfig {
        BartConfig {
            num_trees: self.num_trees,
            num_draws: self.draws,
            burn_in: self.burn_in,
            base: self.base,
            power: self.power,
            sigma_df: self.sigma_df,
            sigma_quantile: self.sigma_quantile,
            leaf_k: self.leaf_k,
            sparse: self.sparse,
            thin: self.thin,
            ..BartConfig::default()
        }
    }

    pub fn schema(&self) -> Schema {
        Schema {
            outcome: self.outcome.clone(),
            indicator: self.indicator.clone(),
            covariates: self.covariates.clone(),
            categorical: self.categorical.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bart().validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(invalid("trim", format!("must lie in [0, 0.5), got {}", self.trim)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return Err(invalid("clip_eps", format!("must lie in (0, 0.5), got {}", self.clip_eps)));
        }
        if self.crossfit == 1 {
            return Err(invalid("crossfit", "use 0 (no cross-fitting) or at least 2 folds"));
        }
        if self.outcome_crossfit == 1 {
            return Err(invalid("outcome_crossfit", "use 0 (no cross-fitting) or at least 2 folds"));
        }
        if self.ridge < 0.0 || self.logit_ridge < 0.0 {
            return Err(invalid("ridge", "must be nonnegative"));
        }
        Ok(())
    }
}
