//! Synthetic generators with closed-form references.
//!
//! * [`GaussianOracle`]: statistics of an isotropic `D`-dimensional standard
//!   normal, whose negative log-likelihood `u = ‖x‖²/2 + (D/2) log 2π` has the
//!   density of states `u − c ~ Gamma(D/2, 1)`.
//! * [`FlowToySpec`]: a two-statistic flow scenario where the OOD class is
//!   shifted along a line of constant likelihood, so likelihood alone cannot
//!   separate the classes.
//! * [`inject_superfluous`]: adds the DoSE scores of extra standard-normal
//!   statistics to existing score vectors.
//!
//! All draws come from [`CounterRng`] keyed by `(seed, sample, statistic)`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{DoseError, Result};
use crate::kde::LOG_INV_SQRT_2PI;
use crate::rng::{domain, subseed, CounterRng};
use crate::scores::ScoreVector;
use crate::table::{Role, StatSchema, StatTable};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussianOracle {
    pub dim: usize,
}

impl GaussianOracle {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(DoseError::BadParams("dimension must be positive".into()));
        }
        Ok(Self { dim })
    }

    /// `c = (D/2) log 2π`, the NLL at the origin.
    pub fn nll_offset(&self) -> f64 {
        0.5 * self.dim as f64 * LN_2PI
    }

    pub fn mean_nll(&self) -> f64 {
        0.5 * self.dim as f64 + self.nll_offset()
    }

    pub fn annulus_radius(&self) -> f64 {
        (self.dim as f64).sqrt()
    }

    /// Mean of the chi distribution with `D` degrees of freedom.
    pub fn mean_norm(&self) -> f64 {
        let d = self.dim as f64;
        std::f64::consts::SQRT_2 * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
    }

    /// The four statistics of one point.
    pub fn statistics(&self, x: &[f64]) -> [f64; 4] {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        [0.5 * sq + self.nll_offset(), sq.sqrt(), x[0], max]
    }
}

pub const GAUSSIAN_STATS: [&str; 4] = ["nll", "norm", "coord0", "coordmax"];

/// Draw `n` points from `N(0, I_D)` and tabulate their statistics.
pub fn sample_gaussian_stats(oracle: &GaussianOracle, n: usize, seed: u64) -> Result<StatTable> {
    if n == 0 {
        return Err(DoseError::BadParams("n must be positive".into()));
    }
    let key = subseed(seed, domain::GAUSSIAN);
    let d = oracle.dim;
    let rows: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |x, i| {
                for (j, v) in x.iter_mut().enumerate() {
                    *v = StandardNormal.sample(&mut CounterRng::new(key, i as u64, j as u64));
                }
                oracle.statistics(x)
            },
        )
        .collect();
    let values = rows.concat();
    let ids = (0..n).map(|i| format!("g{i}")).collect();
    StatTable::new(StatSchema::plain(&GAUSSIAN_STATS)?, Role::Train, ids, values)
}

/// Density of states `p(u)`: the `Gamma(D/2, 1)` density at `u − c`.
pub fn gaussian_dos_pdf(oracle: &GaussianOracle, u: f64) -> Result<f64> {
    Ok(gaussian_dos_log_pdf(oracle, u)?.exp())
}

pub fn gaussian_dos_log_pdf(oracle: &GaussianOracle, u: f64) -> Result<f64> {
    let v = u - oracle.nll_offset();
    if !(v > 0.0) {
        return Err(DoseError::OutOfSupport(u));
    }
    let a = 0.5 * oracle.dim as f64;
    Ok((a - 1.0) * v.ln() - v - ln_gamma(a))
}

/// Two-statistic flow scenario over `(log q(Z), log|J|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowToySpec {
    pub in_center: [f64; 2],
    pub ood_offset: f64,
    pub spread: f64,
    pub n_per_class: usize,
}

impl Default for FlowToySpec {
    fn default() -> Self {
        Self {
            in_center: [-100.0, 50.0],
            ood_offset: 6.0,
            spread: 1.0,
            n_per_class: 2000,
        }
    }
}

pub const FLOW_STATS: [&str; 3] = ["latent", "jac", "nll"];

/// Generated train/test/OOD tables of the flow scenario.
#[derive(Debug, Clone)]
pub struct FlowToy {
    pub train: StatTable,
    pub test: StatTable,
    pub ood: StatTable,
}

fn flow_table(spec: &FlowToySpec, key: u64, shift: f64, role: Role, prefix: &str) -> Result<StatTable> {
    let n = spec.n_per_class;
    let mut latent = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n);
    let mut nll = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let z0: f64 = StandardNormal.sample(&mut CounterRng::new(key, i, 0));
        let z1: f64 = StandardNormal.sample(&mut CounterRng::new(key, i, 1));
        let l = spec.in_center[0] + shift + spec.spread * z0;
        let j = spec.in_center[1] - shift + spec.spread * z1;
        latent.push(l);
        jac.push(j);
        nll.push(-(l + j));
    }
    StatTable::from_columns(StatSchema::plain(&FLOW_STATS)?, role, prefix, &[latent, jac, nll])
}

pub fn sample_flow_toy(spec: &FlowToySpec, seed: u64) -> Result<FlowToy> {
    if spec.n_per_class < 2 || !(spec.spread > 0.0) || !spec.ood_offset.is_finite() {
        return Err(DoseError::BadParams(format!("invalid flow toy spec {spec:?}")));
    }
    Ok(FlowToy {
        train: flow_table(spec, subseed(seed, domain::FLOW_TRAIN), 0.0, Role::Train, "train")?,
        test: flow_table(spec, subseed(seed, domain::FLOW_TEST), 0.0, Role::Test, "test")?,
        ood: flow_table(spec, subseed(seed, domain::FLOW_OOD), spec.ood_offset, Role::Ood, "ood")?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectMode {
    /// Both classes draw `T ~ N(0, 1)`.
    Uninformative,
    /// OOD samples always receive the maximal log-density `−log √(2π)`.
    Obfuscatory,
}

/// Add `k` superfluous per-statistic log-densities to every score.
///
/// Equivalent to `inject_superfluous_range(.., 0, k, ..)`.
pub fn inject_superfluous(
    scores_in: &ScoreVector,
    scores_out: &ScoreVector,
    k: usize,
    mode: InjectMode,
    seed: u64,
) -> Result<(ScoreVector, ScoreVector)> {
    inject_superfluous_range(scores_in, scores_out, 0, k, mode, seed)
}

/// Add superfluous statistics `first..first + k`.
///
/// Statistic `j` of sample `i` is drawn from the stream `(seed, i, j)` (one
/// stream family per class), and terms are added in increasing `j`. Hence
/// injecting `k₁` then `k₂` starting at `k₁` gives bit-identical results to
/// injecting `k₁ + k₂` at once.
pub fn inject_superfluous_range(
    scores_in: &ScoreVector,
    scores_out: &ScoreVector,
    first: usize,
    k: usize,
    mode: InjectMode,
    seed: u64,
) -> Result<(ScoreVector, ScoreVector)> {
    let draw = |key: u64, base: &[f64]| -> Vec<f64> {
        base.par_iter()
            .enumerate()
            .map(|(i, &s)| {
                let mut acc = s;
                for j in first..first + k {
                    let t: f64 = StandardNormal.sample(&mut CounterRng::new(key, i as u64, j as u64));
                    acc += -0.5 * t * t + LOG_INV_SQRT_2PI;
                }
                acc
            })
            .collect()
    };
    let new_in = draw(subseed(seed, domain::INJECT_IN), scores_in.scores());
    let new_out = match mode {
        InjectMode::Uninformative => draw(subseed(seed, domain::INJECT_OUT), scores_out.scores()),
        InjectMode::Obfuscatory => scores_out
            .scores()
            .iter()
            .map(|&s| (0..k).fold(s, |acc, _| acc + LOG_INV_SQRT_2PI))
            .collect(),
    };
    Ok((scores_in.map_scores(new_in)?, scores_out.map_scores(new_out)?))
}
