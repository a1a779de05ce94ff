//! fit / score / eval: the end-to-end DoSE procedure over table files.
//!
//! 1. hold out a validation split of the training table (unless one is given);
//! 2. fit a KDE or one-class SVM on the selected statistics;
//! 3. score tables with the fitted model;
//! 4. evaluate AUROC against an OOD set, ECE between train and validation
//!    scores, and the threshold that discards a fraction of validation data.

use dose_core::metrics::{auroc, choose_threshold, ece_memorization, flagged_fraction, EvalReport};
use dose_core::model::{DoseModel, Fitted};
use dose_core::scores::{likelihood_score, llr_score, tt_score, waic_score};
use dose_core::table::{select_columns, split_holdout};
use dose_core::{read_stat_table, DoseError, Method, Role, ScoreVector, StatSchema, StatTable};
use serde::Serialize;

use crate::config::{LoglikColumn, PipelineConfig};
use crate::output::{csv_text, Artifacts};

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub config: PipelineConfig,
    pub estimator: &'static str,
    pub statistics: Vec<String>,
    pub n_train: usize,
    pub n_val: Option<usize>,
    pub validation_split: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_vectors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

pub struct FitOutput {
    pub model: DoseModel,
    pub report: FitReport,
    pub train: StatTable,
    pub val: Option<StatTable>,
    /// Validation table produced by the holdout split, if one was made.
    pub split_val: Option<StatTable>,
}

impl FitOutput {
    pub fn artifacts(&self) -> Result<Artifacts, DoseError> {
        let mut a = Artifacts::default();
        a.text("model.json", self.model.to_json()?);
        a.json("fit_report.json", &self.report)?;
        if let Some(v) = &self.split_val {
            a.table("val.csv", v.clone());
        }
        Ok(a)
    }
}

/// Statistics to model: the configured list, or every statistic of the table.
fn statistics(cfg: &PipelineConfig, schema: &StatSchema) -> Vec<String> {
    if cfg.statistics.is_empty() {
        schema.statistic_names().to_vec()
    } else {
        cfg.statistics.clone()
    }
}

pub fn fit(cfg: &PipelineConfig) -> Result<FitOutput, DoseError> {
    cfg.validate()?;
    let train_all = read_stat_table(cfg.require(&cfg.train, "train")?, Some(Role::Train))?;
    let stats = statistics(cfg, train_all.schema());
    // fail early on unknown statistics
    select_columns(&train_all, &stats, &cfg.reducer)?;

    let (train, val, split_val) = match &cfg.val {
        Some(p) => (train_all, Some(read_stat_table(p, Some(Role::Val))?), None),
        None => {
            let (t, v) = split_holdout(&train_all, cfg.holdout_fraction, cfg.seed)?;
            (t, Some(v.clone()), Some(v))
        }
    };
    if let Some(v) = &val {
        select_columns(v, &stats, &cfg.reducer)?;
    }
    let model = DoseModel::fit(&train, &stats, &cfg.reducer, &cfg.estimator)?;

    let mut report = FitReport {
        config: cfg.clone(),
        estimator: "kde",
        statistics: stats,
        n_train: train.n_rows(),
        n_val: val.as_ref().map(StatTable::n_rows),
        validation_split: split_val.is_some(),
        bandwidths: None,
        support_vectors: None,
        offset: None,
        gamma: None,
    };
    match &model.fitted {
        Fitted::Kde(kde) => report.bandwidths = Some(kde.bandwidths()),
        Fitted::Svm { svm, .. } => {
            report.estimator = "svm";
            report.support_vectors = Some(svm.support_vectors.len());
            report.offset = Some(svm.offset);
            report.gamma = Some(svm.gamma);
        }
    }
    Ok(FitOutput {
        model,
        report,
        train,
        val,
        split_val,
    })
}

pub fn score(model: &DoseModel, table: &StatTable) -> Result<ScoreVector, DoseError> {
    model.score(table)
}

/// Log-likelihood view of a table column (negated when configured).
fn loglik_table(table: &StatTable, spec: &LoglikColumn) -> Result<(StatTable, String), DoseError> {
    let col = table.column_by_name(&spec.column)?;
    let values = if spec.negate {
        col.iter().map(|v| -v).collect()
    } else {
        col
    };
    let name = "loglik".to_string();
    let t = StatTable::new(
        StatSchema::plain(&[name.as_str()])?,
        table.role(),
        table.sample_ids().to_vec(),
        values,
    )?;
    Ok((t, name))
}

/// Baseline scores of one table.
pub fn baseline_scores(
    cfg: &PipelineConfig,
    method: Method,
    table: &StatTable,
    train: Option<&StatTable>,
) -> Result<ScoreVector, DoseError> {
    let need_loglik = || {
        cfg.loglik
            .as_ref()
            .ok_or_else(|| DoseError::BadParams(format!("baseline `{method}` needs `loglik` in the config")))
    };
    match method {
        Method::Likelihood => {
            let (t, c) = loglik_table(table, need_loglik()?)?;
            likelihood_score(&t, &c)
        }
        Method::Tt => {
            let spec = need_loglik()?;
            let train = train.ok_or_else(|| DoseError::BadParams("tt needs a training table".into()))?;
            let (t, c) = loglik_table(table, spec)?;
            let (tr, _) = loglik_table(train, spec)?;
            tt_score(&t, &c, &tr)
        }
        Method::Waic => {
            let stat = cfg
                .waic_statistic
                .as_deref()
                .ok_or_else(|| DoseError::BadParams("waic needs `waic_statistic`".into()))?;
            waic_score(table, stat)
        }
        Method::Llr => {
            let llr = cfg
                .llr
                .as_ref()
                .ok_or_else(|| DoseError::BadParams("llr needs `llr` columns".into()))?;
            llr_score(table, &llr.semantic, &llr.background)
        }
        Method::DoseKde | Method::DoseSvm => Err(DoseError::BadParams(format!(
            "`{method}` is not a baseline; score it with a fitted model"
        ))),
    }
}

fn evaluate(
    method: Method,
    ins: &ScoreVector,
    outs: &ScoreVector,
    train: Option<&ScoreVector>,
    val: Option<&ScoreVector>,
    cfg: &PipelineConfig,
) -> Result<EvalReport, DoseError> {
    let a = auroc(ins, outs)?;
    let ece = match (train, val) {
        (Some(t), Some(v)) => Some(ece_memorization(t, v, cfg.ece_bins)?),
        _ => None,
    };
    let (threshold, ff_val, ff_in, ff_out) = match val {
        Some(v) => {
            if v.method() != ins.method() || v.orientation() != ins.orientation() {
                return Err(DoseError::OrientationMismatch(
                    "validation scores differ from test scores".into(),
                ));
            }
            let t = choose_threshold(v, cfg.discard_fraction)?;
            (
                t.is_finite().then_some(t),
                Some(flagged_fraction(v, t)),
                Some(flagged_fraction(ins, t)),
                Some(flagged_fraction(outs, t)),
            )
        }
        None => (None, None, None, None),
    };
    Ok(EvalReport {
        method: method.to_string(),
        auroc: a,
        ece,
        threshold,
        flagged_fraction_val: ff_val,
        flagged_fraction_in: ff_in,
        flagged_fraction_out: ff_out,
        n_in: ins.len(),
        n_out: outs.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FullEvalReport {
    pub config: PipelineConfig,
    pub dataset: String,
    pub ood_dataset: String,
    pub reports: Vec<EvalReport>,
}

pub struct EvalInputs<'a> {
    pub in_scores: &'a ScoreVector,
    pub ood_scores: &'a ScoreVector,
    pub train_scores: Option<&'a ScoreVector>,
    pub val_scores: Option<&'a ScoreVector>,
}

pub fn eval(cfg: &PipelineConfig, inputs: &EvalInputs<'_>) -> Result<FullEvalReport, DoseError> {
    cfg.validate()?;
    let mut reports = vec![evaluate(
        inputs.in_scores.method(),
        inputs.in_scores,
        inputs.ood_scores,
        inputs.train_scores,
        inputs.val_scores,
        cfg,
    )?];

    if !cfg.baselines.is_empty() {
        let test = read_stat_table(cfg.require(&cfg.test, "test")?, None)?;
        let ood = read_stat_table(cfg.require(&cfg.ood, "ood")?, None)?;
        let train = cfg.train.as_deref().map(|p| read_stat_table(p, None)).transpose()?;
        let val = cfg.val.as_deref().map(|p| read_stat_table(p, None)).transpose()?;
        for &m in &cfg.baselines {
            let ins = baseline_scores(cfg, m, &test, train.as_ref())?;
            let outs = baseline_scores(cfg, m, &ood, train.as_ref())?;
            let tr = train
                .as_ref()
                .map(|t| baseline_scores(cfg, m, t, train.as_ref()))
                .transpose()?;
            let va = val
                .as_ref()
                .map(|t| baseline_scores(cfg, m, t, train.as_ref()))
                .transpose()?;
            reports.push(evaluate(m, &ins, &outs, tr.as_ref(), va.as_ref(), cfg)?);
        }
    }
    Ok(FullEvalReport {
        config: cfg.clone(),
        dataset: cfg.dataset_name.clone(),
        ood_dataset: cfg.ood_name.clone(),
        reports,
    })
}

impl FullEvalReport {
    pub fn artifacts(&self) -> Result<Artifacts, DoseError> {
        let mut a = Artifacts::default();
        a.json("eval_report.json", self)?;
        let rows = self.reports.iter().map(|r| {
            vec![
                self.dataset.clone(),
                self.ood_dataset.clone(),
                r.method.clone(),
                dose_core::table::format_real(r.auroc),
            ]
        });
        a.text(
            "auroc_table.csv",
            csv_text(&["dataset", "ood_dataset", "method", "auroc"], rows)?,
        );
        Ok(a)
    }
}
