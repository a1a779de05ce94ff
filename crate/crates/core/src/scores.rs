//! Score vectors and the unsupervised baseline scoring rules.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DoseError, Result};
use crate::stats::{mean, population_variance};
use crate::table::{format_real, manifest_path, StatTable, ENSEMBLE_SEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Likelihood,
    Tt,
    Waic,
    Llr,
    DoseKde,
    DoseSvm,
}

impl Method {
    pub fn orientation(self) -> Orientation {
        match self {
            Method::Tt => Orientation::LowerIsIn,
            _ => Orientation::HigherIsIn,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Likelihood => "likelihood",
            Method::Tt => "tt",
            Method::Waic => "waic",
            Method::Llr => "llr",
            Method::DoseKde => "dose_kde",
            Method::DoseSvm => "dose_svm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsIn,
    LowerIsIn,
}

/// Per-sample scores under one scoring rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    method: Method,
    orientation: Orientation,
    sample_ids: Vec<String>,
    scores: Vec<f64>,
}

impl ScoreVector {
    /// Scores with the method's canonical orientation.
    pub fn new(method: Method, sample_ids: Vec<String>, scores: Vec<f64>) -> Result<Self> {
        Self::with_orientation(method, method.orientation(), sample_ids, scores)
    }

    pub fn with_orientation(
        method: Method,
        orientation: Orientation,
        sample_ids: Vec<String>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        if sample_ids.len() != scores.len() {
            return Err(DoseError::DimensionMismatch {
                expected: sample_ids.len(),
                got: scores.len(),
            });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(DoseError::NonFiniteValue { row: i, col: 0 });
        }
        Ok(Self {
            method,
            orientation,
            sample_ids,
            scores,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores mapped so that higher always means more in-distribution.
    pub fn higher_is_in(&self) -> Vec<f64> {
        match self.orientation {
            Orientation::HigherIsIn => self.scores.clone(),
            Orientation::LowerIsIn => self.scores.iter().map(|s| -s).collect(),
        }
    }

    /// Negate the scores and flip the orientation tag.
    pub fn flipped(&self) -> Self {
        Self {
            method: self.method,
            orientation: match self.orientation {
                Orientation::HigherIsIn => Orientation::LowerIsIn,
                Orientation::LowerIsIn => Orientation::HigherIsIn,
            },
            sample_ids: self.sample_ids.clone(),
            scores: self.scores.iter().map(|s| -s).collect(),
        }
    }

    /// Same ids and tags, new values.
    pub fn map_scores(&self, scores: Vec<f64>) -> Result<Self> {
        Self::with_orientation(self.method, self.orientation, self.sample_ids.clone(), scores)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreManifest {
    method: Method,
    orientation: Orientation,
}

pub fn write_scores(scores: &ScoreVector, path: &Path) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(["sample_id", "score"])?;
    for (id, s) in scores.sample_ids.iter().zip(&scores.scores) {
        wtr.write_record([id.as_str(), format_real(*s).as_str()])?;
    }
    let bytes = wtr.into_inner().map_err(|e| DoseError::io(path, e.into_error()))?;
    fs::write(path, bytes).map_err(|e| DoseError::io(path, e))?;
    let meta = ScoreManifest {
        method: scores.method,
        orientation: scores.orientation,
    };
    let mpath = manifest_path(path);
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&mpath, text).map_err(|e| DoseError::io(&mpath, e))
}

pub fn read_scores(path: &Path) -> Result<ScoreVector> {
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Err(DoseError::MissingManifest(mpath));
    }
    let meta: ScoreManifest = serde_json::from_str(&fs::read_to_string(&mpath).map_err(|e| DoseError::io(&mpath, e))?)?;
    let file = fs::File::open(path).map_err(|e| DoseError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["sample_id", "score"] {
        return Err(DoseError::SchemaMismatch(
            "score header must be `sample_id,score`".into(),
        ));
    }
    let mut ids = Vec::new();
    let mut vals = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| DoseError::SchemaMismatch(format!("row {row}: `{}` is not a real", &rec[1])))?;
        if !v.is_finite() {
            return Err(DoseError::NonFiniteValue { row, col: 0 });
        }
        ids.push(rec[0].to_string());
        vals.push(v);
    }
    ScoreVector::with_orientation(meta.method, meta.orientation, ids, vals)
}

/// Raw log-likelihood as a score.
pub fn likelihood_score(table: &StatTable, loglik_column: &str) -> Result<ScoreVector> {
    let col = table.column_by_name(loglik_column)?;
    ScoreVector::new(Method::Likelihood, table.sample_ids().to_vec(), col)
}

/// Typicality test with batch size 1: `|log q(x) − mean_train log q|`.
///
/// The entropy estimate is the negated training mean of the same column.
pub fn tt_score(table: &StatTable, loglik_column: &str, train: &StatTable) -> Result<ScoreVector> {
    let train_col = train.column_by_name(loglik_column)?;
    if train_col.is_empty() {
        return Err(DoseError::EmptyEvaluationSet);
    }
    let train_mean = mean(&train_col);
    let col = table.column_by_name(loglik_column)?;
    let scores = col.iter().map(|l| (l - train_mean).abs()).collect();
    ScoreVector::new(Method::Tt, table.sample_ids().to_vec(), scores)
}

/// WAIC over the ensemble columns `<stat>@<model>`: mean minus population variance.
pub fn waic_score(table: &StatTable, loglik_statistic: &str) -> Result<ScoreVector> {
    let schema = table.schema();
    let idx = schema
        .statistic_index(loglik_statistic)
        .ok_or_else(|| DoseError::UnknownStatistic(loglik_statistic.to_string()))?;
    if !schema.is_ensembled(idx) || schema.model_ids().len() < 2 {
        return Err(DoseError::NeedsEnsemble(loglik_statistic.to_string()));
    }
    let cols: Vec<usize> = schema
        .model_ids()
        .iter()
        .map(|m| {
            table
                .column_index(&format!("{loglik_statistic}{ENSEMBLE_SEP}{m}"))
                .expect("ensembled statistic has a column per model")
        })
        .collect();
    let mut per_model = vec![0.0; cols.len()];
    let scores = table
        .rows()
        .map(|row| {
            for (slot, &c) in per_model.iter_mut().zip(&cols) {
                *slot = row[c];
            }
            mean(&per_model) - population_variance(&per_model)
        })
        .collect();
    ScoreVector::new(Method::Waic, table.sample_ids().to_vec(), scores)
}

/// Likelihood ratio `log q_semantic − log q_background`.
pub fn llr_score(table: &StatTable, semantic_column: &str, background_column: &str) -> Result<ScoreVector> {
    let sem = table.column_by_name(semantic_column)?;
    let bg = table.column_by_name(background_column)?;
    let scores = sem.iter().zip(&bg).map(|(s, b)| s - b).collect();
    ScoreVector::new(Method::Llr, table.sample_ids().to_vec(), scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Role, StatSchema};
    use approx::assert_abs_diff_eq;

    fn plain(names: &[&str], cols: &[Vec<f64>]) -> StatTable {
        StatTable::from_columns(StatSchema::plain(names).unwrap(), Role::Test, "s", cols).unwrap()
    }

    fn ensemble(rows: &[Vec<f64>]) -> StatTable {
        let k = rows[0].len();
        let schema = StatSchema::new(
            vec!["ll".into()],
            (0..k).map(|i| format!("m{i}")).collect(),
            vec![true],
            None,
        )
        .unwrap();
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        StatTable::new(schema, Role::Test, ids, rows.concat()).unwrap()
    }

    #[test]
    fn likelihood_is_identity() {
        let t = plain(&["ll"], &[vec![-3.0, -1.0]]);
        let s = likelihood_score(&t, "ll").unwrap();
        assert_eq!(s.scores(), &[-3.0, -1.0]);
        assert_eq!(s.orientation(), Orientation::HigherIsIn);
        assert!(matches!(
            likelihood_score(&t, "nope"),
            Err(DoseError::UnknownStatistic(_))
        ));
    }

    #[test]
    fn tt_formula() {
        let train = plain(&["ll"], &[vec![-2.0, -4.0]]);
        let t = plain(&["ll"], &[vec![-5.0, -3.0, -3.5, -2.5]]);
        let s = tt_score(&t, "ll", &train).unwrap();
        assert_eq!(s.scores()[..2], [2.0, 0.0]);
        // symmetric blind spot
        assert_eq!(s.scores()[2], s.scores()[3]);
        assert_eq!(s.orientation(), Orientation::LowerIsIn);
    }

    #[test]
    fn tt_shift_invariant() {
        let train = plain(&["ll"], &[vec![-2.0, -4.5, -3.25]]);
        let t = plain(&["ll"], &[vec![-5.0, -1.0, 0.5]]);
        let c = 17.25;
        let shift = |tab: &StatTable| plain(&["ll"], &[tab.column(0).iter().map(|v| v + c).collect()]);
        let a = tt_score(&t, "ll", &train).unwrap();
        let b = tt_score(&shift(&t), "ll", &shift(&train)).unwrap();
        for (x, y) in a.scores().iter().zip(b.scores()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn waic_formula() {
        let t = ensemble(&[vec![1.0, 2.0, 3.0], vec![4.0, 4.0, 4.0], vec![3.0, 1.0, 2.0]]);
        let s = waic_score(&t, "ll").unwrap();
        assert_abs_diff_eq!(s.scores()[0], 4.0 / 3.0, epsilon = 1e-12);
        assert_eq!(s.scores()[1], 4.0);
        // model-index permutation
        assert_abs_diff_eq!(s.scores()[2], s.scores()[0], epsilon = 1e-12);
    }

    #[test]
    fn waic_needs_ensemble() {
        let t = ensemble(&[vec![1.0]]);
        assert!(matches!(waic_score(&t, "ll"), Err(DoseError::NeedsEnsemble(_))));
        let p = plain(&["ll"], &[vec![1.0]]);
        assert!(matches!(waic_score(&p, "ll"), Err(DoseError::NeedsEnsemble(_))));
    }

    #[test]
    fn llr_difference() {
        let t = plain(&["sem", "bg"], &[vec![-10.0, -1.0], vec![-12.0, -1.0]]);
        assert_eq!(llr_score(&t, "sem", "bg").unwrap().scores(), &[2.0, 0.0]);
        assert_eq!(llr_score(&t, "sem", "sem").unwrap().scores(), &[0.0, 0.0]);
        assert!(matches!(llr_score(&t, "sem", "x"), Err(DoseError::UnknownStatistic(_))));
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = ScoreVector::new(Method::Tt, vec!["a".into(), "b".into()], vec![0.1, 1e-300]).unwrap();
        write_scores(&s, &p).unwrap();
        assert_eq!(read_scores(&p).unwrap(), s);
    }
}
