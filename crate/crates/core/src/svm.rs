//! PCA whitening and a one-class ν-SVM solved with SMO.
//!
//! The dual solved here is
//!
//! ```text
//! min_α ½ Σ_ij α_i α_j k(x_i, x_j)   s.t.  0 ≤ α_i ≤ 1/(νn),  Σ_i α_i = 1
//! ```
//!
//! with the RBF kernel `k(x, y) = exp(−γ‖x − y‖²)`. The decision function is
//! `f(x) = Σ_i α_i k(x_i, x) − ρ`; positive values are inside the support.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DoseError, Result};
use crate::scores::{Method, ScoreVector};
use crate::table::StatTable;

/// Relative eigenvalue floor: directions below `EIG_FLOOR · trace` are rank deficient.
pub const EIG_FLOOR: f64 = 1e-12;
pub const DEFAULT_NU: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 1_000_000;

/// Affine map `x ↦ scale ⊙ (basisᵀ (x − mean))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenTransform {
    pub mean: Vec<f64>,
    /// Row-major `D × D`; column `k` is the k-th principal direction.
    pub basis: Vec<f64>,
    pub scale: Vec<f64>,
}

impl WhitenTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Principal direction `k` as a vector.
    pub fn direction(&self, k: usize) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|r| self.basis[r * d + k]).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if x.len() != d {
            return Err(DoseError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..d)
            .map(|k| {
                let proj: f64 = (0..d).map(|r| self.basis[r * d + k] * centered[r]).sum();
                proj * self.scale[k]
            })
            .collect())
    }

    pub fn apply_table(&self, table: &StatTable) -> Result<Vec<Vec<f64>>> {
        table.rows().map(|r| self.apply(r)).collect()
    }
}

/// Learn a whitening map from the rows of `train` (sample covariance, `n − 1`).
pub fn fit_whitener(train: &StatTable) -> Result<WhitenTransform> {
    let n = train.n_rows();
    let d = train.n_cols();
    if n <= d {
        return Err(DoseError::TableTooSmall(format!(
            "whitening {d} statistics needs more than {d} rows, got {n}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in train.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in train.rows() {
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let trace = cov.trace();
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let floor = EIG_FLOOR * trace;
    let deficient: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|(_, &k)| !(eig.eigenvalues[k] > floor))
        .map(|(rank, _)| rank)
        .collect();
    if !deficient.is_empty() || !(trace > 0.0) {
        return Err(DoseError::RankDeficient(deficient));
    }

    let mut basis = vec![0.0; d * d];
    let mut scale = Vec::with_capacity(d);
    for (k, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // sign convention: largest-magnitude entry positive
        let pivot = (0..d)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
            .unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            basis[r * d + k] = sign * col[r];
        }
        scale.push(1.0 / eig.eigenvalues[src].sqrt());
    }
    Ok(WhitenTransform { mean, basis, scale })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / (D · Var[X])` with the variance taken over all entries.
    #[default]
    Scale,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedOcsvm {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub offset: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Training-set size the box constraint `1/(νn)` refers to.
    pub n_train: usize,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl FittedOcsvm {
    /// `Σ α_i k(sv_i, x)`
    pub fn expansion(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, a)| a * (-self.gamma * sq_dist(sv, x)).exp())
            .sum()
    }

    /// `log Σ α_i k(sv_i, x)`, evaluated without underflow.
    pub fn log_expansion(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, a)| a.ln() - self.gamma * sq_dist(sv, x))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.expansion(x) - self.offset
    }

    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.n_train as f64)
    }

    /// Factor `νn` converting decision values to the libsvm scaling
    /// (`α_i ∈ [0, 1]`, `Σα = νn`) used by common one-class SVM libraries.
    pub fn library_scale(&self) -> f64 {
        self.nu * self.n_train as f64
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }
}

/// Dense or on-the-fly kernel rows.
enum KernelRows<'a> {
    Dense {
        n: usize,
        q: Vec<f64>,
    },
    Lazy {
        x: &'a [Vec<f64>],
        gamma: f64,
        a: Vec<f64>,
        b: Vec<f64>,
    },
}

const DENSE_LIMIT: usize = 6000;

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = x.len();
        if n <= DENSE_LIMIT {
            let q: Vec<f64> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| (0..n).map(move |j| (-gamma * sq_dist(&x[i], &x[j])).exp()))
                .collect();
            KernelRows::Dense { n, q }
        } else {
            KernelRows::Lazy {
                x,
                gamma,
                a: vec![0.0; n],
                b: vec![0.0; n],
            }
        }
    }

    /// Rows `i` and `j`.
    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        match self {
            KernelRows::Dense { n, q } => (&q[i * *n..(i + 1) * *n], &q[j * *n..(j + 1) * *n]),
            KernelRows::Lazy { x, gamma, a, b } => {
                for (k, xk) in x.iter().enumerate() {
                    a[k] = (-*gamma * sq_dist(&x[i], xk)).exp();
                    b[k] = (-*gamma * sq_dist(&x[j], xk)).exp();
                }
                (a, b)
            }
        }
    }
}

/// Solver output before support vectors are extracted.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub gradient: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

impl DualSolution {
    /// `½ αᵀ Q α`, computed from the maintained gradient `Qα`.
    pub fn objective(&self) -> f64 {
        0.5 * self.alpha.iter().zip(&self.gradient).map(|(a, g)| a * g).sum::<f64>()
    }
}

pub fn resolve_gamma(x: &[Vec<f64>], rule: GammaRule) -> Result<f64> {
    match rule {
        GammaRule::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
        GammaRule::Fixed(g) => Err(DoseError::BadParams(format!("gamma must be positive, got {g}"))),
        GammaRule::Scale => {
            let d = x.first().map_or(0, Vec::len);
            let count = (x.len() * d) as f64;
            let mean = x.iter().flatten().sum::<f64>() / count;
            let var = x.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            Ok(if var > 0.0 { 1.0 / (d as f64 * var) } else { 1.0 })
        }
    }
}

/// Solve the one-class dual by SMO with maximal-violating-pair selection.
pub fn solve_dual(x: &[Vec<f64>], nu: f64, gamma: f64, tol: f64, max_iter: usize) -> Result<DualSolution> {
    let n = x.len();
    if n < 2 {
        return Err(DoseError::TableTooSmall(format!(
            "one-class SVM needs ≥ 2 points, got {n}"
        )));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(DoseError::BadParams(format!("nu must lie in (0, 1], got {nu}")));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(DoseError::DimensionMismatch { expected: dim, got: 0 });
    }
    let c = 1.0 / (nu * n as f64);

    // Fill the first ⌊νn⌋ coefficients at the bound and put the remainder on the next.
    let mut alpha = vec![0.0; n];
    let full = (((nu * n as f64) + 1e-9).floor() as usize).min(n);
    alpha[..full].iter_mut().for_each(|a| *a = c);
    if full < n {
        alpha[full] = (1.0 - full as f64 * c).max(0.0);
    }

    let mut kernel = KernelRows::new(x, gamma);
    let mut grad = vec![0.0; n];
    for (i, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            let (row, _) = kernel.pair(i, i);
            for (g, q) in grad.iter_mut().zip(row) {
                *g += a * q;
            }
        }
    }

    let mut iterations = 0;
    loop {
        // i: may increase (α_i < C), smallest gradient; j: may decrease (α_j > 0), largest.
        let mut i_up = usize::MAX;
        let mut g_min = f64::INFINITY;
        let mut j_low = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for k in 0..n {
            if alpha[k] < c && grad[k] < g_min {
                g_min = grad[k];
                i_up = k;
            }
            if alpha[k] > 0.0 && grad[k] > g_max {
                g_max = grad[k];
                j_low = k;
            }
        }
        if i_up == usize::MAX || j_low == usize::MAX || g_max - g_min < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(DoseError::SolverNonConvergence(max_iter));
        }
        iterations += 1;

        let (i, j) = (i_up, j_low);
        let (qi, qj) = kernel.pair(i, j);
        // RBF kernel: k(x, x) = 1
        let eta = (2.0 - 2.0 * qi[j]).max(1e-12);
        let room_i = c - alpha[i];
        let room_j = alpha[j];
        let t = ((g_max - g_min) / eta).min(room_i).min(room_j);
        for ((g, a), b) in grad.iter_mut().zip(qi).zip(qj) {
            *g += t * (a - b);
        }
        alpha[i] = if t >= room_i { c } else { alpha[i] + t };
        alpha[j] = if t >= room_j { 0.0 } else { alpha[j] - t };
    }

    let rho = offset_from_gradient(&alpha, &grad, c);
    Ok(DualSolution {
        alpha,
        gradient: grad,
        rho,
        iterations,
    })
}

/// ρ: mean gradient over free coefficients, else the midpoint of the feasible interval.
fn offset_from_gradient(alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_n = 0usize;
    let mut lb = f64::NEG_INFINITY; // max G over α = C
    let mut ub = f64::INFINITY; // min G over α = 0
    for (&a, &g) in alpha.iter().zip(grad) {
        if a >= c {
            lb = lb.max(g);
        } else if a <= 0.0 {
            ub = ub.min(g);
        } else {
            free_sum += g;
            free_n += 1;
        }
    }
    if free_n > 0 {
        free_sum / free_n as f64
    } else if lb.is_finite() && ub.is_finite() {
        0.5 * (lb + ub)
    } else if lb.is_finite() {
        lb
    } else {
        ub
    }
}

/// Largest problem [`solve_dual_exhaustive`] accepts (3ⁿ active sets).
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Reference solver: enumerate every active set (each `α_i` at 0, at the
/// bound, or free), solve the equality-constrained stationarity system of
/// each, and keep the feasible candidate with the smallest objective.
pub fn solve_dual_exhaustive(x: &[Vec<f64>], nu: f64, gamma: f64) -> Result<DualSolution> {
    let n = x.len();
    if !(2..=EXHAUSTIVE_LIMIT).contains(&n) {
        return Err(DoseError::BadParams(format!(
            "exhaustive solver needs 2 ≤ n ≤ {EXHAUSTIVE_LIMIT}, got {n}"
        )));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(DoseError::BadParams(format!("nu must lie in (0, 1], got {nu}")));
    }
    let c = 1.0 / (nu * n as f64);
    let q = DMatrix::from_fn(n, n, |i, j| (-gamma * sq_dist(&x[i], &x[j])).exp());
    let slack = 1e-10 * c.max(1.0);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut state = vec![0u8; n];
    for code in 0..3usize.pow(n as u32) {
        let mut r = code;
        for s in state.iter_mut() {
            *s = (r % 3) as u8;
            r /= 3;
        }
        let upper: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let remaining = 1.0 - upper.len() as f64 * c;
        let mut alpha = vec![0.0; n];
        upper.iter().for_each(|&i| alpha[i] = c);
        if free.is_empty() {
            if remaining.abs() > slack {
                continue;
            }
        } else {
            // [Q_FF −1; 1ᵀ 0] [α_F; ρ] = [−C·Q_FU 1; remaining]
            let f = free.len();
            let mut a = DMatrix::zeros(f + 1, f + 1);
            let mut b = nalgebra::DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, f)] = -1.0;
                a[(f, r)] = 1.0;
                b[r] = -c * upper.iter().map(|&j| q[(i, j)]).sum::<f64>();
            }
            b[f] = remaining;
            let Some(sol) = a.lu().solve(&b) else { continue };
            if free
                .iter()
                .enumerate()
                .any(|(r, _)| sol[r] < -slack || sol[r] > c + slack)
            {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r].clamp(0.0, c);
            }
        }
        let av = nalgebra::DVector::from_column_slice(&alpha);
        let obj = 0.5 * av.dot(&(&q * &av));
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, alpha));
        }
    }
    let (_, alpha) = best.expect("the optimum is the stationary point of its own active set");
    let av = nalgebra::DVector::from_column_slice(&alpha);
    let gradient: Vec<f64> = (&q * &av).iter().copied().collect();
    let rho = offset_from_gradient(&alpha, &gradient, c);
    Ok(DualSolution {
        alpha,
        gradient,
        rho,
        iterations: 3usize.pow(n as u32),
    })
}

pub fn fit_ocsvm(train_whitened: &[Vec<f64>], nu: f64, gamma: GammaRule) -> Result<FittedOcsvm> {
    fit_ocsvm_with(train_whitened, nu, gamma, DEFAULT_TOL, MAX_ITER)
}

pub fn fit_ocsvm_with(
    train_whitened: &[Vec<f64>],
    nu: f64,
    gamma: GammaRule,
    tol: f64,
    max_iter: usize,
) -> Result<FittedOcsvm> {
    if train_whitened.len() < 2 {
        return Err(DoseError::TableTooSmall(format!(
            "one-class SVM needs ≥ 2 points, got {}",
            train_whitened.len()
        )));
    }
    let g = resolve_gamma(train_whitened, gamma)?;
    let sol = solve_dual(train_whitened, nu, g, tol, max_iter)?;
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (x, &a) in train_whitened.iter().zip(&sol.alpha) {
        if a > 0.0 {
            support_vectors.push(x.clone());
            dual_coefs.push(a);
        }
    }
    Ok(FittedOcsvm {
        support_vectors,
        dual_coefs,
        offset: sol.rho,
        gamma: g,
        nu,
        n_train: train_whitened.len(),
    })
}

fn check_dim(whitener: &WhitenTransform, table: &StatTable) -> Result<()> {
    if table.n_cols() != whitener.dim() {
        return Err(DoseError::DimensionMismatch {
            expected: whitener.dim(),
            got: table.n_cols(),
        });
    }
    Ok(())
}

/// DoSE_SVM: the one-class decision function in whitened coordinates.
pub fn dose_svm_score(whitener: &WhitenTransform, model: &FittedOcsvm, table: &StatTable) -> Result<ScoreVector> {
    check_dim(whitener, table)?;
    let rows: Vec<&[f64]> = table.rows().collect();
    let scores = rows
        .par_iter()
        .map(|r| whitener.apply(r).map(|w| model.decision(&w)))
        .collect::<Result<Vec<_>>>()?;
    ScoreVector::new(Method::DoseSvm, table.sample_ids().to_vec(), scores)
}

/// Log of the kernel expansion, a monotone transform of [`dose_svm_score`]
/// that lives on a log-density scale.
pub fn dose_svm_log_score(whitener: &WhitenTransform, model: &FittedOcsvm, table: &StatTable) -> Result<ScoreVector> {
    check_dim(whitener, table)?;
    let rows: Vec<&[f64]> = table.rows().collect();
    let scores = rows
        .par_iter()
        .map(|r| whitener.apply(r).map(|w| model.log_expansion(&w)))
        .collect::<Result<Vec<_>>>()?;
    ScoreVector::new(Method::DoseSvm, table.sample_ids().to_vec(), scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Role, StatSchema};
    use approx::assert_abs_diff_eq;

    fn table(cols: Vec<Vec<f64>>) -> StatTable {
        let names: Vec<String> = (0..cols.len()).map(|i| format!("s{i}")).collect();
        StatTable::from_columns(StatSchema::plain(&names).unwrap(), Role::Train, "r", &cols).unwrap()
    }

    fn covariance(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = x.len();
        let d = x[0].len();
        let m: Vec<f64> = (0..d).map(|k| x.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
        (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| x.iter().map(|r| (r[a] - m[a]) * (r[b] - m[b])).sum::<f64>() / (n - 1) as f64)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn diagonal_covariance_scales() {
        // four points with sample covariance diag(4, 1)
        let s = (3.0f64 / 4.0 * 4.0).sqrt(); // var = 4 with n−1 = 3 over ±s pairs
        let t = table(vec![vec![s, -s, 0.0, 0.0], vec![0.0, 0.0, s / 2.0, -s / 2.0]]);
        let cov = covariance(&t.rows().map(<[f64]>::to_vec).collect::<Vec<_>>());
        let expect_var0: f64 = 2.0 * s * s / 3.0;
        assert_abs_diff_eq!(cov[0][0], expect_var0, epsilon = 1e-12);
        let w = fit_whitener(&t).unwrap();
        assert_abs_diff_eq!(w.scale[0], 1.0 / expect_var0.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.scale[1], 1.0 / (expect_var0 / 4.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.scale[0] / w.scale[1], 0.5, epsilon = 1e-12);
        // first direction is e0 with positive sign
        assert_abs_diff_eq!(w.direction(0)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let n = 300;
        let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
        for i in 0..n {
            let a = (i as f64 * 0.731).sin() * 3.0;
            let b = (i as f64 * 1.917).cos();
            let c = ((i * i) as f64 * 0.013).sin();
            cols[0].push(a + 100.0);
            cols[1].push(0.5 * a + b);
            cols[2].push(c - 2.0 * b);
        }
        let t = table(cols);
        let w = fit_whitener(&t).unwrap();
        let z = w.apply_table(&t).unwrap();
        let cov = covariance(&z);
        for a in 0..3 {
            let m: f64 = z.iter().map(|r| r[a]).sum::<f64>() / n as f64;
            assert!(m.abs() < 1e-9);
            for (b, v) in cov[a].iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-6);
            }
        }
        // basis orthogonal
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = w.direction(a).iter().zip(w.direction(b)).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        // whitening white data again leaves identity covariance
        let again = table((0..3).map(|k| z.iter().map(|r| r[k]).collect()).collect());
        let w2 = fit_whitener(&again).unwrap();
        let cov2 = covariance(&w2.apply_table(&again).unwrap());
        for (a, row) in cov2.iter().enumerate() {
            assert!((row[a] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let a: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        let t = table(vec![a.clone(), a]);
        match fit_whitener(&t) {
            Err(DoseError::RankDeficient(dirs)) => assert_eq!(dirs, vec![1]),
            other => panic!("{other:?}"),
        }
        let short = table(vec![vec![1.0, 2.0]]);
        assert!(fit_whitener(&short).is_ok());
        let too_short = table(vec![vec![1.0], vec![2.0]]);
        assert!(matches!(fit_whitener(&too_short), Err(DoseError::TableTooSmall(_))));
    }

    fn square() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
    }

    #[test]
    fn unit_square_symmetry() {
        let m = fit_ocsvm(&square(), 0.5, GammaRule::Fixed(1.0)).unwrap();
        assert_eq!(m.support_vectors.len(), 4);
        for a in &m.dual_coefs {
            assert_abs_diff_eq!(*a, 0.25, epsilon = 1e-6);
        }
        for sv in &m.support_vectors {
            assert_abs_diff_eq!(m.decision(sv), 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn nu_one_forces_uniform_coefficients() {
        let x: Vec<Vec<f64>> = (0..7).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let m = fit_ocsvm(&x, 1.0, GammaRule::Scale).unwrap();
        assert_eq!(m.dual_coefs.len(), 7);
        for a in &m.dual_coefs {
            assert_abs_diff_eq!(*a, 1.0 / 7.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn far_point_scores_minus_rho() {
        let m = fit_ocsvm(&square(), 0.5, GammaRule::Fixed(1.0)).unwrap();
        assert_abs_diff_eq!(m.decision(&[1e3, -1e3]), -m.offset, epsilon = 1e-15);
        assert!(m.log_expansion(&[1e3, -1e3]).is_finite());
    }

    #[test]
    fn dual_feasibility() {
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i as f64 * 0.7).sin() * 2.0, (i as f64 * 1.3).cos()])
            .collect();
        for nu in [0.05, 0.2, 0.5, 0.9] {
            let m = fit_ocsvm(&x, nu, GammaRule::Scale).unwrap();
            let sum: f64 = m.dual_coefs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            for a in &m.dual_coefs {
                assert!(*a > 0.0 && *a <= m.upper_bound() + 1e-9);
            }
            assert!(m.dual_coefs.len() + 2 >= (nu * 60.0).ceil() as usize);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(
            fit_ocsvm(&[vec![0.0]], 0.5, GammaRule::Scale),
            Err(DoseError::TableTooSmall(_))
        ));
        assert!(matches!(
            fit_ocsvm(&square(), 0.0, GammaRule::Scale),
            Err(DoseError::BadParams(_))
        ));
        assert!(matches!(
            fit_ocsvm_with(&square(), 0.25, GammaRule::Fixed(0.01), 1e-12, 0),
            Err(DoseError::SolverNonConvergence(0))
        ));
    }

    #[test]
    fn lazy_kernel_matches_dense() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.41).cos()])
            .collect();
        let mut dense = KernelRows::new(&x, 0.7);
        let mut lazy = KernelRows::Lazy {
            x: &x,
            gamma: 0.7,
            a: vec![0.0; 40],
            b: vec![0.0; 40],
        };
        let (d1, d2) = dense.pair(3, 17);
        let (d1, d2) = (d1.to_vec(), d2.to_vec());
        let (l1, l2) = lazy.pair(3, 17);
        assert_eq!(d1, l1);
        assert_eq!(d2, l2);
    }
}
