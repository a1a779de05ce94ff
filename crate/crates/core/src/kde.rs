//! Product-of-experts kernel density estimation over statistics.
//!
//! Each statistic gets its own univariate Gaussian KDE and the joint
//! log-density is the sum of the per-statistic log-densities:
//!
//! ```text
//! log q(t) = Σ_d log( 1/(n·h_d) · Σ_i φ((t_d − t_{i,d}) / h_d) )
//! ```
//!
//! Inner sums are reduced with log-sum-exp, so scores far in the tails stay
//! finite (they degrade to the nearest-training-point term).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DoseError, Result};
use crate::scores::{Method, ScoreVector};
use crate::stats::{quantile_sorted, sample_std};
use crate::table::StatTable;

/// `log(1/√(2π))`
pub const LOG_INV_SQRT_2PI: f64 = -0.918_938_533_204_672_7;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    #[default]
    Scott,
    Silverman,
    Fixed(Vec<f64>),
}

/// One univariate expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeExpert {
    pub statistic: String,
    pub bandwidth: f64,
    pub train_values: Vec<f64>,
}

impl KdeExpert {
    pub fn log_density(&self, t: f64) -> f64 {
        let inv_h = 1.0 / self.bandwidth;
        let mut max = f64::NEG_INFINITY;
        for &x in &self.train_values {
            let z = (t - x) * inv_h;
            max = max.max(-0.5 * z * z);
        }
        let mut acc = 0.0;
        for &x in &self.train_values {
            let z = (t - x) * inv_h;
            acc += (-0.5 * z * z - max).exp();
        }
        let n = self.train_values.len() as f64;
        max + acc.ln() + LOG_INV_SQRT_2PI - (n * self.bandwidth).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedKde {
    experts: Vec<KdeExpert>,
}

impl FittedKde {
    pub fn from_experts(experts: Vec<KdeExpert>) -> Result<Self> {
        let n = experts.first().map_or(0, |e| e.train_values.len());
        if n < 2 || experts.iter().any(|e| e.train_values.len() != n) {
            return Err(DoseError::TableTooSmall(
                "every expert needs the same number (≥ 2) of training values".into(),
            ));
        }
        for e in &experts {
            if !(e.bandwidth > 0.0 && e.bandwidth.is_finite()) {
                return Err(DoseError::NonPositiveBandwidth(e.bandwidth));
            }
        }
        Ok(Self { experts })
    }

    pub fn experts(&self) -> &[KdeExpert] {
        &self.experts
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.experts.iter().map(|e| e.bandwidth).collect()
    }

    pub fn statistic_names(&self) -> Vec<String> {
        self.experts.iter().map(|e| e.statistic.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.experts.len()
    }
}

/// Fit one expert per column of `train`.
pub fn fit_kde(train: &StatTable, rule: &BandwidthRule) -> Result<FittedKde> {
    let n = train.n_rows();
    if n < 2 {
        return Err(DoseError::TableTooSmall(format!("KDE needs ≥ 2 rows, got {n}")));
    }
    let names = train.column_names();
    if let BandwidthRule::Fixed(h) = rule {
        if h.len() != names.len() {
            return Err(DoseError::DimensionMismatch {
                expected: names.len(),
                got: h.len(),
            });
        }
    }
    let factor = (n as f64).powf(-0.2);
    let mut experts = Vec::with_capacity(names.len());
    for (d, name) in names.into_iter().enumerate() {
        let values = train.column(d);
        let bandwidth = match rule {
            BandwidthRule::Fixed(h) => {
                if !(h[d] > 0.0 && h[d].is_finite()) {
                    return Err(DoseError::NonPositiveBandwidth(h[d]));
                }
                h[d]
            }
            BandwidthRule::Scott => {
                let sd = sample_std(&values);
                if !(sd > 0.0) {
                    return Err(DoseError::DegenerateStatistic(name));
                }
                sd * factor
            }
            BandwidthRule::Silverman => {
                let sd = sample_std(&values);
                if !(sd > 0.0) {
                    return Err(DoseError::DegenerateStatistic(name));
                }
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                // A zero IQR with nonzero spread (heavy ties) falls back to σ̂.
                let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
                0.9 * spread * factor
            }
        };
        experts.push(KdeExpert {
            statistic: name,
            bandwidth,
            train_values: values,
        });
    }
    FittedKde::from_experts(experts)
}

pub fn kde_log_density(kde: &FittedKde, point: &[f64]) -> Result<f64> {
    if point.len() != kde.dim() {
        return Err(DoseError::DimensionMismatch {
            expected: kde.dim(),
            got: point.len(),
        });
    }
    Ok(kde.experts.iter().zip(point).map(|(e, &t)| e.log_density(t)).sum())
}

/// DoSE_KDE: per-row sum of per-statistic log-densities, higher = more typical.
pub fn dose_kde_score(kde: &FittedKde, table: &StatTable) -> Result<ScoreVector> {
    if table.n_cols() != kde.dim() {
        return Err(DoseError::DimensionMismatch {
            expected: kde.dim(),
            got: table.n_cols(),
        });
    }
    let rows: Vec<&[f64]> = table.rows().collect();
    let scores: Vec<f64> = rows
        .par_iter()
        .map(|r| kde_log_density(kde, r))
        .collect::<Result<_>>()?;
    ScoreVector::new(Method::DoseKde, table.sample_ids().to_vec(), scores)
}
