//! Generalized typical sets and the bias/variance bound on atypicality.
//!
//! A window `x_1..x_s` drawn from `p` is typical under `q` when
//! `|−(1/s) Σ log q(x_i) − H[p]| ≤ ε`. The probability of falling outside
//! that set satisfies
//!
//! ```text
//! P(atypical) · ε² ≤ KL[p, q]² + Var_p[log q(X)] / s
//! ```
//!
//! which [`verify_bound_mc`] checks by simulation for Gaussian `p` and `q`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DoseError, Result};
use crate::rng::{domain, subseed, CounterRng};
use crate::scores::ScoreVector;
use crate::table::StatSchema;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Univariate Gaussian `N(mean, var)` with closed-form information quantities (nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0 && var.is_finite() && mean.is_finite()) {
            return Err(DoseError::BadParams(format!("invalid Gaussian N({mean}, {var})")));
        }
        Ok(Self { mean, var })
    }

    pub fn standard() -> Self {
        Self { mean: 0.0, var: 1.0 }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (LN_2PI + self.var.ln()) - d * d / (2.0 * self.var)
    }

    pub fn entropy(&self) -> f64 {
        0.5 * (LN_2PI + self.var.ln() + 1.0)
    }

    /// `H[self, q] = −E_self[log q]`
    pub fn cross_entropy(&self, q: &Gaussian) -> f64 {
        let m = self.mean - q.mean;
        0.5 * (LN_2PI + q.var.ln()) + (self.var + m * m) / (2.0 * q.var)
    }

    pub fn kl(&self, q: &Gaussian) -> f64 {
        self.cross_entropy(q) - self.entropy()
    }

    /// `Var_self[log q(X)]`; uses `Var[Y²] = 2σ⁴ + 4μ²σ²` for `Y ~ N(μ, σ²)`.
    pub fn var_log(&self, q: &Gaussian) -> f64 {
        let m = self.mean - q.mean;
        (2.0 * self.var * self.var + 4.0 * m * m * self.var) / (4.0 * q.var * q.var)
    }

    fn sample(&self, rng: &mut CounterRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.var.sqrt() * z
    }
}

/// The analytic right-hand side of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub kl_sq: f64,
    pub var_logq: f64,
    pub s: usize,
    pub epsilon: f64,
}

impl BoundTerms {
    pub fn gaussian(p: &Gaussian, q: &Gaussian, s: usize, epsilon: f64) -> Self {
        let kl = p.kl(q);
        Self {
            kl_sq: kl * kl,
            var_logq: p.var_log(q),
            s,
            epsilon,
        }
    }

    pub fn rhs(&self) -> f64 {
        self.kl_sq + self.var_logq / self.s as f64
    }
}

/// Typical-set membership per window of length `s`.
pub fn typical_membership(logq_values: &[f64], entropy: f64, s: usize, epsilon: f64) -> Result<Vec<bool>> {
    if s == 0 || !logq_values.len().is_multiple_of(s) {
        return Err(DoseError::BadWindowing {
            len: logq_values.len(),
            window: s,
        });
    }
    Ok(logq_values
        .chunks_exact(s)
        .map(|w| (-w.iter().sum::<f64>() / s as f64 - entropy).abs() <= epsilon)
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundParams {
    pub p: Gaussian,
    pub q: Gaussian,
    pub s: usize,
    pub epsilon: f64,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Empirical `P(atypical)·ε²`.
    pub lhs: f64,
    pub rhs: f64,
    /// Monte Carlo standard error of `lhs`.
    pub se: f64,
    pub params: BoundParams,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 3.0 * self.se
    }
}

/// Window gaps `−(1/s) Σ log q(x_i) − H[p]` for `n_mc` windows from `p`.
fn window_gaps(p: &Gaussian, q: &Gaussian, s: usize, n_mc: usize, seed: u64) -> Vec<f64> {
    let h = p.entropy();
    let key = subseed(seed, domain::BOUND);
    (0..n_mc)
        .into_par_iter()
        .map(|w| {
            let mut rng = CounterRng::new(key, w as u64, 0);
            let total: f64 = (0..s).map(|_| q.log_pdf(p.sample(&mut rng))).sum();
            -total / s as f64 - h
        })
        .collect()
}

/// Check the bound for several ε on one shared set of simulated windows.
pub fn verify_bound_grid(
    p: &Gaussian,
    q: &Gaussian,
    s: usize,
    epsilons: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<Vec<BoundCheck>> {
    if s == 0 || n_mc == 0 {
        return Err(DoseError::BadParams("s and n_mc must be positive".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(DoseError::BadParams(format!("epsilon must be positive, got {e}")));
    }
    let gaps = window_gaps(p, q, s, n_mc, seed);
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let atypical = gaps.iter().filter(|g| g.abs() > eps).count();
            let frac = atypical as f64 / n_mc as f64;
            let eps2 = eps * eps;
            BoundCheck {
                lhs: frac * eps2,
                rhs: BoundTerms::gaussian(p, q, s, eps).rhs(),
                se: eps2 * (frac * (1.0 - frac) / n_mc as f64).sqrt(),
                params: BoundParams {
                    p: *p,
                    q: *q,
                    s,
                    epsilon: eps,
                    n_mc,
                    seed,
                },
            }
        })
        .collect())
}

pub fn verify_bound_mc(
    p: &Gaussian,
    q: &Gaussian,
    s: usize,
    epsilon: f64,
    n_mc: usize,
    seed: u64,
) -> Result<BoundCheck> {
    Ok(verify_bound_grid(p, q, s, &[epsilon], n_mc, seed)?.remove(0))
}

/// Source of the entropy value plugged into the empirical bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyPlugin {
    /// `−mean log q` of the fitted density on its own training data.
    Resubstitution(f64),
    Fixed(f64),
    /// `H[p] ∈ [low, high]` for discrete data, `high = h·w·c·log k`.
    DiscreteBounds {
        low: f64,
        high: f64,
    },
}

impl EntropyPlugin {
    pub fn resubstitution(train_scores: &ScoreVector) -> Result<Self> {
        if train_scores.is_empty() {
            return Err(DoseError::EmptyScores);
        }
        let m = train_scores.scores().iter().sum::<f64>() / train_scores.len() as f64;
        Ok(EntropyPlugin::Resubstitution(-m))
    }

    /// Available only when the schema describes a discrete domain.
    pub fn discrete_bounds(schema: &StatSchema) -> Option<Self> {
        schema.domain_meta().map(|m| EntropyPlugin::DiscreteBounds {
            low: 0.0,
            high: m.max_entropy(),
        })
    }

    /// Candidate entropy values: one point, or the interval endpoints.
    pub fn candidates(&self) -> Vec<f64> {
        match *self {
            EntropyPlugin::Resubstitution(h) | EntropyPlugin::Fixed(h) => vec![h],
            EntropyPlugin::DiscreteBounds { low, high } => vec![low, high],
        }
    }
}

/// `(1/m) Σ (log q)² + 2H · (1/m) Σ log q` at a given entropy `H`.
pub fn bound_estimate_at(eval_scores: &[f64], entropy: f64) -> Result<f64> {
    if eval_scores.is_empty() {
        return Err(DoseError::EmptyEvaluationSet);
    }
    let m = eval_scores.len() as f64;
    let sq = eval_scores.iter().map(|l| l * l).sum::<f64>() / m;
    let mean = eval_scores.iter().sum::<f64>() / m;
    Ok(sq + 2.0 * entropy * mean)
}

/// Empirical bound up to its additive constant; lower is tighter.
///
/// For an entropy interval the estimate is linear in `H`, so the worst case
/// over the interval is taken at an endpoint and returned.
pub fn estimate_bound_empirical(eval_scores: &ScoreVector, entropy: &EntropyPlugin) -> Result<f64> {
    entropy
        .candidates()
        .into_iter()
        .map(|h| bound_estimate_at(eval_scores.scores(), h))
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::Method;
    use crate::table::DomainMeta;
    use approx::assert_abs_diff_eq;

    #[test]
    fn membership_cases() {
        let h = 1.7;
        let eps = 0.3;
        assert_eq!(typical_membership(&[-h], h, 1, eps).unwrap(), vec![true]);
        assert_eq!(typical_membership(&[-h - 2.0 * eps], h, 1, eps).unwrap(), vec![false]);
        let w = [-h - 1.0, -h + 1.0, -h - 2.0, -h + 2.0];
        assert_eq!(typical_membership(&w, h, 4, eps).unwrap(), vec![true]);
        assert_eq!(typical_membership(&w, h, 1, eps).unwrap(), vec![false; 4]);
        assert!(matches!(
            typical_membership(&w, h, 3, eps),
            Err(DoseError::BadWindowing { len: 4, window: 3 })
        ));
    }

    #[test]
    fn gaussian_closed_forms() {
        let n = Gaussian::standard();
        assert_abs_diff_eq!(n.var_log(&n), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(BoundTerms::gaussian(&n, &n, 1, 0.1).rhs(), 0.5, epsilon = 1e-15);
        let mu = 0.7;
        let q = Gaussian::new(mu, 1.0).unwrap();
        assert_abs_diff_eq!(n.kl(&q), mu * mu / 2.0, epsilon = 1e-12);
        // p = q ⇒ KL = 0
        let wide = Gaussian::new(0.0, 2.0).unwrap();
        assert_abs_diff_eq!(wide.kl(&wide), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let p = Gaussian::new(0.5, 1.0).unwrap();
        let q = Gaussian::new(0.0, 2.0).unwrap();
        let (lo, hi, m) = (-20.0, 20.0, 40_000);
        let dx = (hi - lo) / m as f64;
        let (mut e1, mut e2) = (0.0, 0.0);
        for k in 0..m {
            let x = lo + (k as f64 + 0.5) * dx;
            let w = p.log_pdf(x).exp() * dx;
            let l = q.log_pdf(x);
            e1 += w * l;
            e2 += w * l * l;
        }
        assert_abs_diff_eq!(-e1, p.cross_entropy(&q), epsilon = 1e-9);
        assert_abs_diff_eq!(e2 - e1 * e1, p.var_log(&q), epsilon = 1e-9);
    }

    #[test]
    fn mc_bound_standard_normal() {
        let n = Gaussian::standard();
        for eps in [0.1, 0.5, 1.0] {
            let c = verify_bound_mc(&n, &n, 1, eps, 20_000, 9).unwrap();
            assert_eq!(c.rhs, 0.5);
            assert!(c.holds(), "{c:?}");
        }
        // long windows concentrate
        let c = verify_bound_mc(&n, &n, 256, 0.25, 5_000, 9).unwrap();
        assert!(c.lhs < 0.01, "{c:?}");
        let a = verify_bound_mc(&n, &n, 4, 0.5, 1000, 5).unwrap();
        let b = verify_bound_mc(&n, &n, 4, 0.5, 1000, 5).unwrap();
        assert_eq!(a.lhs, b.lhs);
    }

    fn scores(v: &[f64]) -> ScoreVector {
        ScoreVector::new(
            Method::DoseKde,
            (0..v.len()).map(|i| i.to_string()).collect(),
            v.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn empirical_estimator() {
        let e = estimate_bound_empirical(&scores(&[-1.0, -3.0]), &EntropyPlugin::Fixed(2.0)).unwrap();
        assert_abs_diff_eq!(e, -3.0, epsilon = 1e-12);
        // constant log-density: c² + 2Hc, minimized at c = −H
        let h = 1.3;
        let at = |c: f64| estimate_bound_empirical(&scores(&[c; 5]), &EntropyPlugin::Fixed(h)).unwrap();
        assert_abs_diff_eq!(at(2.0), 4.0 + 2.0 * h * 2.0, epsilon = 1e-12);
        assert!(at(-h) < at(-h + 0.01) && at(-h) < at(-h - 0.01));
        assert!(matches!(
            estimate_bound_empirical(&scores(&[]), &EntropyPlugin::Fixed(h)),
            Err(DoseError::EmptyEvaluationSet)
        ));
    }

    #[test]
    fn resubstitution_and_discrete_plugins() {
        let p = EntropyPlugin::resubstitution(&scores(&[-1.0, -2.0])).unwrap();
        assert_eq!(p, EntropyPlugin::Resubstitution(1.5));
        let schema = StatSchema::plain(&["a"]).unwrap();
        assert!(EntropyPlugin::discrete_bounds(&schema).is_none());
        let meta = DomainMeta {
            height: 2,
            width: 3,
            channels: 1,
            levels: 256,
        };
        let schema = schema.with_domain_meta(Some(meta)).unwrap();
        match EntropyPlugin::discrete_bounds(&schema).unwrap() {
            EntropyPlugin::DiscreteBounds { low, high } => {
                assert_eq!(low, 0.0);
                assert_abs_diff_eq!(high, 6.0 * 256f64.ln(), epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn estimator_monotone_in_entropy_for_negative_mean() {
        let s = scores(&[-1.0, -4.0, -2.5]);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let v = bound_estimate_at(s.scores(), f64::from(k) * 0.5).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}
