//! Serializable DoSE estimators: column selection plus a fitted KDE or SVM.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DoseError, Result};
use crate::kde::{dose_kde_score, fit_kde, BandwidthRule, FittedKde};
use crate::scores::ScoreVector;
use crate::svm::{dose_svm_score, fit_ocsvm, fit_whitener, FittedOcsvm, GammaRule, WhitenTransform, DEFAULT_NU};
use crate::table::{select_columns, Reducer, StatTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Kde {
        #[serde(default)]
        bandwidth_rule: BandwidthRule,
    },
    Svm {
        #[serde(default = "default_nu")]
        nu: f64,
        #[serde(default)]
        gamma: GammaRule,
    },
}

fn default_nu() -> f64 {
    DEFAULT_NU
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec::Kde {
            bandwidth_rule: BandwidthRule::Scott,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Kde(FittedKde),
    Svm {
        whitener: WhitenTransform,
        svm: FittedOcsvm,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseModel {
    pub statistics: Vec<String>,
    pub reducer: Reducer,
    pub fitted: Fitted,
}

impl DoseModel {
    pub fn fit(train: &StatTable, statistics: &[String], reducer: &Reducer, spec: &EstimatorSpec) -> Result<Self> {
        let selected = select_columns(train, statistics, reducer)?;
        let fitted = match spec {
            EstimatorSpec::Kde { bandwidth_rule } => Fitted::Kde(fit_kde(&selected, bandwidth_rule)?),
            EstimatorSpec::Svm { nu, gamma } => {
                let whitener = fit_whitener(&selected)?;
                let svm = fit_ocsvm(&whitener.apply_table(&selected)?, *nu, *gamma)?;
                Fitted::Svm { whitener, svm }
            }
        };
        Ok(Self {
            statistics: statistics.to_vec(),
            reducer: reducer.clone(),
            fitted,
        })
    }

    pub fn score(&self, table: &StatTable) -> Result<ScoreVector> {
        let selected = select_columns(table, &self.statistics, &self.reducer)?;
        self.score_selected(&selected)
    }

    /// Score a table whose columns already are exactly `self.statistics`.
    pub fn score_selected(&self, selected: &StatTable) -> Result<ScoreVector> {
        match &self.fitted {
            Fitted::Kde(kde) => dose_kde_score(kde, selected),
            Fitted::Svm { whitener, svm } => dose_svm_score(whitener, svm, selected),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DoseModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| DoseError::io(path, e))?)
    }

    fn validate(&self) -> Result<()> {
        let dim = match &self.fitted {
            Fitted::Kde(kde) => {
                crate::kde::FittedKde::from_experts(kde.experts().to_vec())?;
                kde.dim()
            }
            Fitted::Svm { whitener, svm } => {
                if svm.dim() != whitener.dim() || svm.support_vectors.len() != svm.dual_coefs.len() {
                    return Err(DoseError::SchemaMismatch("inconsistent SVM model".into()));
                }
                whitener.dim()
            }
        };
        if dim != self.statistics.len() {
            return Err(DoseError::DimensionMismatch {
                expected: self.statistics.len(),
                got: dim,
            });
        }
        Ok(())
    }
}
