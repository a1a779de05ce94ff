//! Benchmarks on synthetic data with known answers.
//!
//! Plot-ready CSV outputs:
//!
//! | file | columns |
//! |---|---|
//! | `gaussian_hist.csv` | `statistic,bin_left,bin_right,count,density` |
//! | `gaussian_dos.csv` | `u,p_analytic,p_kde` |
//! | `flow_auroc.csv` | `method,auroc` |
//! | `flow_grid.csv` | `latent,jac,likelihood,dose_kde,dose_svm` |
//! | `degrade.csv` | `k,mode,scorer,auroc` |
//! | `bound.csv` | `p_mean,p_var,q_mean,q_var,s,epsilon,lhs,rhs,se,holds` |

use dose_core::kde::{dose_kde_score, fit_kde, kde_log_density, BandwidthRule, FittedKde};
use dose_core::metrics::auroc;
use dose_core::scores::{likelihood_score, tt_score};
use dose_core::stats::{mean, quantile_sorted};
use dose_core::svm::{fit_ocsvm, fit_whitener, FittedOcsvm, GammaRule, WhitenTransform};
use dose_core::synthetic::{
    gaussian_dos_pdf, inject_superfluous_range, sample_flow_toy, sample_gaussian_stats, FlowToy, FlowToySpec,
    GaussianOracle, InjectMode,
};
use dose_core::table::{format_real, select_columns};
use dose_core::typicality::{verify_bound_grid, BoundCheck, Gaussian};
use dose_core::{DoseError, Method, Reducer, Role, ScoreVector, StatSchema, StatTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::{csv_text, Artifacts};

/// Parameters of every benchmark; each one reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchParams {
    pub seed: u64,
    /// Gaussian: points drawn. Flow toy: points per class.
    pub n: Option<usize>,
    pub dim: usize,
    pub bins: usize,
    /// NLL samples the density-of-states KDE is fitted on.
    pub kde_n: usize,
    pub dos_points: usize,
    pub delta: f64,
    pub sigma: f64,
    pub nu: f64,
    pub grid: usize,
    pub modes: Vec<InjectMode>,
    pub ks: Vec<usize>,
    pub n_mc: usize,
    pub s_values: Vec<usize>,
    pub epsilons: Vec<f64>,
}

impl Default for BenchParams {
    fn default() -> Self {
        let flow = FlowToySpec::default();
        Self {
            seed: 0,
            n: None,
            dim: 100,
            bins: 50,
            kde_n: 10_000,
            dos_points: 1000,
            delta: flow.ood_offset,
            sigma: flow.spread,
            nu: 0.5,
            grid: 200,
            modes: vec![InjectMode::Uninformative, InjectMode::Obfuscatory],
            ks: vec![0, 1, 3, 10, 30, 100, 300, 1000],
            n_mc: 100_000,
            s_values: vec![1, 4, 16],
            epsilons: vec![0.1, 0.5, 1.0],
        }
    }
}

fn bad(msg: impl Into<String>) -> DoseError {
    DoseError::BadParams(msg.into())
}

impl BenchParams {
    pub fn gaussian_n(&self) -> usize {
        self.n.unwrap_or(100_000)
    }

    pub fn flow_spec(&self) -> FlowToySpec {
        FlowToySpec {
            ood_offset: self.delta,
            spread: self.sigma,
            n_per_class: self.n.unwrap_or(FlowToySpec::default().n_per_class),
            ..FlowToySpec::default()
        }
    }

    fn check_flow(&self) -> Result<(), DoseError> {
        let spec = self.flow_spec();
        if spec.n_per_class < 3 {
            return Err(bad("flow toy needs n ≥ 3 per class"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !self.delta.is_finite() {
            return Err(bad("sigma must be positive and delta finite"));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(bad(format!("nu {} not in (0, 1]", self.nu)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- gaussian

#[derive(Debug, Clone, Serialize)]
pub struct GaussianReport {
    pub params: BenchParams,
    pub dim: usize,
    pub n: usize,
    pub mean_nll: f64,
    pub exact_mean_nll: f64,
    pub mean_norm: f64,
    pub exact_mean_norm: f64,
    pub annulus_radius: f64,
    /// Fraction of points with `|‖x‖ − √D| ≤ 3`.
    pub annulus_fraction: f64,
    pub kde_n: usize,
    pub kde_bandwidth: f64,
    /// Range of `u` compared: the 1% and 99% quantiles of the KDE sample.
    pub dos_range: [f64; 2],
    pub dos_sup_error: f64,
    pub dos_max_p: f64,
    pub dos_relative_error: f64,
}

pub struct GaussianBench {
    pub table: StatTable,
    pub report: GaussianReport,
    pub histogram_csv: String,
    pub dos_csv: String,
}

fn histogram_rows(name: &str, values: &[f64], bins: usize) -> Vec<Vec<String>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = values.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let left = lo + b as f64 * width;
            vec![
                name.to_string(),
                format_real(left),
                format_real(left + width),
                c.to_string(),
                format_real(c as f64 / (n * width)),
            ]
        })
        .collect()
}

pub fn gaussian(params: &BenchParams) -> Result<GaussianBench, DoseError> {
    let n = params.gaussian_n();
    if params.dim == 0 || n < 2 || params.bins == 0 || params.dos_points < 2 {
        return Err(bad("gaussian bench needs dim ≥ 1, n ≥ 2, bins ≥ 1, dos_points ≥ 2"));
    }
    if params.kde_n < 2 || params.kde_n > n {
        return Err(bad(format!("kde_n {} not in [2, n={n}]", params.kde_n)));
    }
    let oracle = GaussianOracle::new(params.dim)?;
    let table = sample_gaussian_stats(&oracle, n, params.seed)?;
    let nll = table.column_by_name("nll")?;
    let norm = table.column_by_name("norm")?;
    let r = oracle.annulus_radius();
    let inside = norm.iter().filter(|v| (*v - r).abs() <= 3.0).count();

    let mut hist = Vec::new();
    for name in table.schema().statistic_names() {
        hist.extend(histogram_rows(name, &table.column_by_name(name)?, params.bins));
    }

    // density of states: KDE on a prefix of the (i.i.d.) nll samples
    let sample = nll[..params.kde_n].to_vec();
    let kde_table = StatTable::from_columns(
        StatSchema::plain(&["nll"])?,
        Role::Train,
        "u",
        std::slice::from_ref(&sample),
    )?;
    let kde = fit_kde(&kde_table, &BandwidthRule::Scott)?;
    let mut sorted = sample;
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, 0.01);
    let hi = quantile_sorted(&sorted, 0.99);
    let m = params.dos_points;
    let curve = (0..m)
        .into_par_iter()
        .map(|i| {
            let u = lo + (hi - lo) * i as f64 / (m - 1) as f64;
            let exact = gaussian_dos_pdf(&oracle, u)?;
            let est = kde_log_density(&kde, &[u])?.exp();
            Ok((u, exact, est))
        })
        .collect::<Result<Vec<_>, DoseError>>()?;
    // mode of Gamma(D/2, 1) at D/2 − 1 (or the support edge for D ≤ 2)
    let mode = oracle.nll_offset() + (0.5 * params.dim as f64 - 1.0).max(1e-9);
    let max_p = gaussian_dos_pdf(&oracle, mode)?;
    let sup = curve.iter().map(|(_, e, k)| (e - k).abs()).fold(0.0, f64::max);

    let dos_csv = csv_text(
        &["u", "p_analytic", "p_kde"],
        curve
            .iter()
            .map(|(u, e, k)| vec![format_real(*u), format_real(*e), format_real(*k)]),
    )?;
    let report = GaussianReport {
        params: params.clone(),
        dim: params.dim,
        n,
        mean_nll: mean(&nll),
        exact_mean_nll: oracle.mean_nll(),
        mean_norm: mean(&norm),
        exact_mean_norm: oracle.mean_norm(),
        annulus_radius: r,
        annulus_fraction: inside as f64 / n as f64,
        kde_n: params.kde_n,
        kde_bandwidth: kde.bandwidths()[0],
        dos_range: [lo, hi],
        dos_sup_error: sup,
        dos_max_p: max_p,
        dos_relative_error: sup / max_p,
    };
    Ok(GaussianBench {
        table,
        report,
        histogram_csv: csv_text(&["statistic", "bin_left", "bin_right", "count", "density"], hist)?,
        dos_csv,
    })
}

impl GaussianBench {
    pub fn artifacts(&self) -> Result<Artifacts, DoseError> {
        let mut a = Artifacts::default();
        a.table("gaussian_stats.csv", self.table.clone());
        a.text("gaussian_hist.csv", self.histogram_csv.clone());
        a.text("gaussian_dos.csv", self.dos_csv.clone());
        a.json("gaussian_report.json", &self.report)?;
        Ok(a)
    }
}

// ---------------------------------------------------------------- flow toy

const FLOW_DOSE_STATS: [&str; 2] = ["latent", "jac"];

/// DoSE estimators fitted on the flow toy's `(latent, jac)` training columns.
pub struct FlowModels {
    pub kde: FittedKde,
    pub whitener: WhitenTransform,
    pub svm: FittedOcsvm,
}

impl FlowModels {
    pub fn fit(toy: &FlowToy, nu: f64) -> Result<Self, DoseError> {
        let train = dose_columns(&toy.train)?;
        let whitener = fit_whitener(&train)?;
        let svm = fit_ocsvm(&whitener.apply_table(&train)?, nu, GammaRule::Scale)?;
        Ok(Self {
            kde: fit_kde(&train, &BandwidthRule::Scott)?,
            whitener,
            svm,
        })
    }

    pub fn kde_scores(&self, table: &StatTable) -> Result<ScoreVector, DoseError> {
        dose_kde_score(&self.kde, &dose_columns(table)?)
    }

    /// Decision values `Σα k − ρ`.
    pub fn svm_scores(&self, table: &StatTable) -> Result<ScoreVector, DoseError> {
        dose_core::svm::dose_svm_score(&self.whitener, &self.svm, &dose_columns(table)?)
    }

    fn point_scores(&self, latent: f64, jac: f64) -> Result<(f64, f64), DoseError> {
        let p = [latent, jac];
        let k = kde_log_density(&self.kde, &p)?;
        let s = self.svm.decision(&self.whitener.apply(&p)?);
        Ok((k, s))
    }
}

fn dose_columns(table: &StatTable) -> Result<StatTable, DoseError> {
    select_columns(table, &FLOW_DOSE_STATS, &Reducer::EnsembleMean)
}

/// The flow toy's log-likelihood `−nll` as a one-column table.
pub fn flow_loglik(table: &StatTable) -> Result<StatTable, DoseError> {
    let ll: Vec<f64> = table.column_by_name("nll")?.iter().map(|v| -v).collect();
    StatTable::new(
        StatSchema::plain(&["loglik"])?,
        table.role(),
        table.sample_ids().to_vec(),
        ll,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub params: BenchParams,
    pub spec: FlowToySpec,
    pub auroc: Vec<(Method, f64)>,
    pub kde_bandwidths: Vec<f64>,
    pub svm_support_vectors: usize,
    pub svm_offset: f64,
    pub svm_gamma: f64,
}

impl FlowReport {
    pub fn auroc_of(&self, m: Method) -> Option<f64> {
        self.auroc.iter().find(|(k, _)| *k == m).map(|(_, a)| *a)
    }
}

pub struct FlowBench {
    pub toy: FlowToy,
    pub report: FlowReport,
    pub grid_csv: String,
}

pub fn flow_toy(params: &BenchParams) -> Result<FlowBench, DoseError> {
    params.check_flow()?;
    if params.grid < 2 {
        return Err(bad("grid must be ≥ 2"));
    }
    let spec = params.flow_spec();
    let toy = sample_flow_toy(&spec, params.seed)?;
    let models = FlowModels::fit(&toy, params.nu)?;

    let (ll_train, ll_test, ll_ood) = (
        flow_loglik(&toy.train)?,
        flow_loglik(&toy.test)?,
        flow_loglik(&toy.ood)?,
    );
    let pairs = [
        (
            Method::Likelihood,
            likelihood_score(&ll_test, "loglik")?,
            likelihood_score(&ll_ood, "loglik")?,
        ),
        (
            Method::Tt,
            tt_score(&ll_test, "loglik", &ll_train)?,
            tt_score(&ll_ood, "loglik", &ll_train)?,
        ),
        (
            Method::DoseKde,
            models.kde_scores(&toy.test)?,
            models.kde_scores(&toy.ood)?,
        ),
        (
            Method::DoseSvm,
            models.svm_scores(&toy.test)?,
            models.svm_scores(&toy.ood)?,
        ),
    ];
    let aurocs = pairs
        .iter()
        .map(|(m, i, o)| Ok((*m, auroc(i, o)?)))
        .collect::<Result<Vec<_>, DoseError>>()?;

    // decision-region grid over the union of all three tables
    let axis = |name: &str| -> Result<Vec<f64>, DoseError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in [&toy.train, &toy.test, &toy.ood] {
            for v in t.column_by_name(name)? {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let (lo, hi) = (lo - 2.0 * spec.spread, hi + 2.0 * spec.spread);
        let g = params.grid;
        Ok((0..g).map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64).collect())
    };
    let xs = axis("latent")?;
    let ys = axis("jac")?;
    let cells: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let values = cells
        .par_iter()
        .map(|&(x, y)| models.point_scores(x, y))
        .collect::<Result<Vec<_>, DoseError>>()?;
    let grid_csv = csv_text(
        &["latent", "jac", "likelihood", "dose_kde", "dose_svm"],
        cells.iter().zip(&values).map(|(&(x, y), &(k, s))| {
            vec![
                format_real(x),
                format_real(y),
                format_real(x + y),
                format_real(k),
                format_real(s),
            ]
        }),
    )?;

    let report = FlowReport {
        params: params.clone(),
        spec,
        auroc: aurocs,
        kde_bandwidths: models.kde.bandwidths(),
        svm_support_vectors: models.svm.support_vectors.len(),
        svm_offset: models.svm.offset,
        svm_gamma: models.svm.gamma,
    };
    Ok(FlowBench { toy, report, grid_csv })
}

impl FlowBench {
    pub fn artifacts(&self) -> Result<Artifacts, DoseError> {
        let mut a = Artifacts::default();
        a.table("flow_train.csv", self.toy.train.clone());
        a.table("flow_test.csv", self.toy.test.clone());
        a.table("flow_ood.csv", self.toy.ood.clone());
        a.text(
            "flow_auroc.csv",
            csv_text(
                &["method", "auroc"],
                self.report
                    .auroc
                    .iter()
                    .map(|(m, v)| vec![m.to_string(), format_real(*v)]),
            )?,
        );
        a.text("flow_grid.csv", self.grid_csv.clone());
        a.json("flow_report.json", &self.report)?;
        Ok(a)
    }
}

// ---------------------------------------------------------------- degrade

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    Kde,
    Svm,
}

impl Scorer {
    pub fn as_str(self) -> &'static str {
        match self {
            Scorer::Kde => "kde",
            Scorer::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradeRow {
    pub k: usize,
    pub mode: InjectMode,
    pub scorer: Scorer,
    pub auroc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegradeReport {
    pub params: BenchParams,
    pub spec: FlowToySpec,
    /// SVM decision values are multiplied by this before injection.
    pub svm_scale: f64,
    pub rows: Vec<DegradeRow>,
}

impl DegradeReport {
    pub fn auroc_at(&self, k: usize, mode: InjectMode, scorer: Scorer) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.k == k && r.mode == mode && r.scorer == scorer)
            .map(|r| r.auroc)
    }
}

/// AUROC of DoSE scores after adding `k` superfluous statistics.
///
/// SVM decision values are put on the common library scaling (`×νn`) before
/// the superfluous log-densities are added.
pub fn degrade(params: &BenchParams) -> Result<DegradeReport, DoseError> {
    params.check_flow()?;
    if params.ks.is_empty() || params.modes.is_empty() {
        return Err(bad("degrade needs at least one k and one mode"));
    }
    let mut ks = params.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut modes = params.modes.clone();
    modes.dedup();

    let spec = params.flow_spec();
    let toy = sample_flow_toy(&spec, params.seed)?;
    let models = FlowModels::fit(&toy, params.nu)?;
    let scale = models.svm.library_scale();
    let base = [
        (Scorer::Kde, models.kde_scores(&toy.test)?, models.kde_scores(&toy.ood)?),
        (
            Scorer::Svm,
            {
                let s = models.svm_scores(&toy.test)?;
                s.map_scores(s.scores().iter().map(|v| v * scale).collect())?
            },
            {
                let s = models.svm_scores(&toy.ood)?;
                s.map_scores(s.scores().iter().map(|v| v * scale).collect())?
            },
        ),
    ];

    let mut rows = Vec::new();
    for &mode in &modes {
        for (scorer, ins, outs) in &base {
            let (mut cur_in, mut cur_out) = (ins.clone(), outs.clone());
            let mut done = 0;
            for &k in &ks {
                let (i, o) = inject_superfluous_range(&cur_in, &cur_out, done, k - done, mode, params.seed)?;
                cur_in = i;
                cur_out = o;
                done = k;
                rows.push(DegradeRow {
                    k,
                    mode,
                    scorer: *scorer,
                    auroc: auroc(&cur_in, &cur_out)?,
                });
            }
        }
    }
    Ok(DegradeReport {
        params: params.clone(),
        spec,
        svm_scale: scale,
        rows,
    })
}

impl DegradeReport {
    pub fn artifacts(&self) -> Result<Artifacts, DoseError> {
        let mut a = Artifacts::default();
        a.text(
            "degrade.csv",
            csv_text(
                &["k", "mode", "scorer", "auroc"],
                self.rows.iter().map(|r| {
                    vec![
                        r.k.to_string(),
                        mode_name(r.mode).into(),
                        r.scorer.as_str().into(),
                        format_real(r.auroc),
                    ]
                }),
            )?,
        );
        a.json("degrade_report.json", self)?;
        Ok(a)
    }
}

pub fn mode_name(mode: InjectMode) -> &'static str {
    match mode {
        InjectMode::Uninformative => "uninformative",
        InjectMode::Obfuscatory => "obfuscatory",
    }
}

// ---------------------------------------------------------------- bound

pub fn bound_distributions() -> Vec<Gaussian> {
    vec![
        Gaussian::standard(),
        Gaussian { mean: 0.5, var: 1.0 },
        Gaussian { mean: 0.0, var: 2.0 },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub params: BenchParams,
    pub all_hold: bool,
    pub cells: Vec<BoundCheck>,
}

pub fn bound(params: &BenchParams) -> Result<BoundReport, DoseError> {
    if params.n_mc == 0 || params.s_values.is_empty() || params.epsilons.is_empty() {
        return Err(bad("bound needs n_mc ≥ 1 and non-empty s and epsilon lists"));
    }
    if params.s_values.contains(&0) {
        return Err(bad("window length s must be positive"));
    }
    let dists = bound_distributions();
    let mut cells = Vec::new();
    for p in &dists {
        for q in &dists {
            for &s in &params.s_values {
                cells.extend(verify_bound_grid(p, q, s, &params.epsilons, params.n_mc, params.seed)?);
            }
        }
    }
    Ok(BoundReport {
        params: params.clone(),
        all_hold: cells.iter().all(BoundCheck::holds),
        cells,
    })
}

impl BoundReport {
    pub fn artifacts(&self) -> Result<Artifacts, DoseError> {
        let mut a = Artifacts::default();
        a.text(
            "bound.csv",
            csv_text(
                &[
                    "p_mean", "p_var", "q_mean", "q_var", "s", "epsilon", "lhs", "rhs", "se", "holds",
                ],
                self.cells.iter().map(|c| {
                    let b = &c.params;
                    vec![
                        format_real(b.p.mean),
                        format_real(b.p.var),
                        format_real(b.q.mean),
                        format_real(b.q.var),
                        b.s.to_string(),
                        format_real(b.epsilon),
                        format_real(c.lhs),
                        format_real(c.rhs),
                        format_real(c.se),
                        c.holds().to_string(),
                    ]
                }),
            )?,
        );
        a.json("bound_report.json", self)?;
        Ok(a)
    }
}
