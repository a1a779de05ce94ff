//! Pipeline configuration: a JSON file, overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use dose_core::kde::BandwidthRule;
use dose_core::model::EstimatorSpec;
use dose_core::{DoseError, Method, Reducer};
use serde::{Deserialize, Serialize};

/// A log-likelihood source column; `negate` turns an NLL column into a log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoglikColumn {
    pub column: String,
    #[serde(default)]
    pub negate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlrColumns {
    pub semantic: String,
    pub background: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub ood: Option<PathBuf>,
    pub statistics: Vec<String>,
    pub reducer: Reducer,
    pub estimator: EstimatorSpec,
    pub baselines: Vec<Method>,
    pub loglik: Option<LoglikColumn>,
    pub waic_statistic: Option<String>,
    pub llr: Option<LlrColumns>,
    pub holdout_fraction: f64,
    pub ece_bins: usize,
    pub discard_fraction: f64,
    pub seed: u64,
    pub dataset_name: String,
    pub ood_name: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train: None,
            val: None,
            test: None,
            ood: None,
            statistics: Vec::new(),
            reducer: Reducer::EnsembleMean,
            estimator: EstimatorSpec::Kde {
                bandwidth_rule: BandwidthRule::Scott,
            },
            baselines: Vec::new(),
            loglik: None,
            waic_statistic: None,
            llr: None,
            holdout_fraction: 0.1,
            ece_bins: dose_core::metrics::DEFAULT_ECE_BINS,
            discard_fraction: 0.1,
            seed: 0,
            dataset_name: "in".into(),
            ood_name: "ood".into(),
        }
    }
}

impl PipelineConfig {
    /// Load a config; relative table paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<Self, DoseError> {
        let text = fs::read_to_string(path).map_err(|e| DoseError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.train, &mut cfg.val, &mut cfg.test, &mut cfg.ood]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DoseError> {
        if !(0.0..1.0).contains(&self.discard_fraction) {
            return Err(DoseError::BadParams(format!(
                "discard_fraction {} not in [0, 1)",
                self.discard_fraction
            )));
        }
        if self.ece_bins < 2 {
            return Err(DoseError::BadBinCount(self.ece_bins));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(DoseError::BadParams(format!(
                "holdout_fraction {} not in (0, 1)",
                self.holdout_fraction
            )));
        }
        Ok(())
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, DoseError> {
        field
            .as_deref()
            .ok_or_else(|| DoseError::BadParams(format!("config is missing `{name}`")))
    }
}
