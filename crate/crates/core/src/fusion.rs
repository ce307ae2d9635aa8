//! Kalman fusion of independent estimates, Covariance Addition and Covariance
//! Intersection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::estimate::Estimate;
use crate::linalg::{check_same_dim, is_psd, trace_product, SymMatrix, Tolerance};
use crate::optim::golden_section;

/// Per-estimate weights `ω_i ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OmegaWeights(pub Vec<f64>);

impl OmegaWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(CovError::InvalidInput(format!(
                "weights must lie in [0, 1]: {weights:?}"
            )));
        }
        Ok(Self(weights))
    }

    /// Weights on the unit simplex (sum within 1e-9 of one).
    pub fn simplex(weights: Vec<f64>) -> Result<Self> {
        let w = Self::new(weights)?;
        let sum: f64 = w.0.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CovError::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        Ok(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStatus {
    Converged,
    IterationCapped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub estimate: Estimate,
    pub weights: Option<OmegaWeights>,
    /// `log det C` of the fused covariance.
    pub objective: f64,
    pub status: SearchStatus,
}

/// Kalman (information-form) fusion of independent estimates:
/// `C = (Σ A_i^{-1})^{-1}`, `c = C Σ A_i^{-1} a_i`.
pub fn kalman_fuse(estimates: &[Estimate]) -> Result<FusionResult> {
    let first = estimates
        .first()
        .ok_or_else(|| CovError::InvalidInput("at least one estimate is required".into()))?;
    let n = first.dim();
    let mut info = SymMatrix::zeros(n);
    let mut info_mean = DVector::zeros(n);
    for e in estimates {
        check_same_dim(n, e.dim())?;
        let inv = e.cov().inverse()?;
        info_mean += inv.as_matrix() * e.mean();
        info = info.add(&inv);
    }
    let cov = info.inverse()?;
    let mean = cov.as_matrix() * info_mean;
    let objective = cov.log_det()?;
    Ok(FusionResult {
        estimate: Estimate::new(mean, cov)?,
        weights: None,
        objective,
        status: SearchStatus::Converged,
    })
}

/// Conservative covariance of `a + x` for an unknown correlation between the
/// error of `a` and the (deterministic-looking) offset `x`:
/// `(1/ω) A + (1/(1-ω)) x x^T`.
pub fn covariance_addition(e: &Estimate, x: &DVector<f64>, omega: f64) -> Result<SymMatrix> {
    check_same_dim(e.dim(), x.len())?;
    if !(omega > 0.0 && omega < 1.0) {
        return Err(CovError::InvalidInput(format!(
            "omega must lie in the open interval (0, 1), got {omega}"
        )));
    }
    Ok(e.cov()
        .scale(1.0 / omega)
        .add(&SymMatrix::rank_one(x).scale(1.0 / (1.0 - omega))))
}

/// Translation by `x` assuming the error of `e` is independent of `x`:
/// `(a + x, A + x x^T)`.
pub fn translate_independent(e: &Estimate, x: &DVector<f64>) -> Result<Estimate> {
    check_same_dim(e.dim(), x.len())?;
    Estimate::new(e.mean() + x, e.cov().add(&SymMatrix::rank_one(x)))
}

/// Translation by `x` with an unknown correlation between `x` and the error
/// of `e`, using covariance addition at the trace-minimizing
/// `ω = sqrt(tr A) / (sqrt(tr A) + |x|)`.
pub fn translate_correlated(e: &Estimate, x: &DVector<f64>) -> Result<Estimate> {
    check_same_dim(e.dim(), x.len())?;
    let ra = e.cov().trace().max(0.0).sqrt();
    let rx = x.norm();
    let cov = if rx == 0.0 {
        e.cov().clone()
    } else if ra == 0.0 {
        SymMatrix::rank_one(x)
    } else {
        covariance_addition(e, x, ra / (ra + rx))?
    };
    Estimate::new(e.mean() + x, cov)
}

/// Size measure minimized by the CI weight search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeCriterion {
    #[default]
    Determinant,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CiConfig {
    pub criterion: SizeCriterion,
    /// Weights are searched in `[eps, 1 - eps]` for two estimates.
    pub eps: f64,
    pub max_iter: usize,
    /// Step-length tolerance of the projected-gradient search.
    pub tol: f64,
}

impl Default for CiConfig {
    fn default() -> Self {
        Self {
            criterion: SizeCriterion::Determinant,
            eps: 1e-8,
            max_iter: 2000,
            tol: 1e-12,
        }
    }
}

struct InfoForm {
    inv: Vec<SymMatrix>,
    info_means: Vec<DVector<f64>>,
}

impl InfoForm {
    fn new(estimates: &[Estimate]) -> Result<Self> {
        let n = estimates[0].dim();
        let mut inv = Vec::with_capacity(estimates.len());
        let mut info_means = Vec::with_capacity(estimates.len());
        for e in estimates {
            check_same_dim(n, e.dim())?;
            let w = e.cov().inverse()?;
            info_means.push(w.as_matrix() * e.mean());
            inv.push(w);
        }
        Ok(Self { inv, info_means })
    }

    fn information(&self, omega: &[f64]) -> SymMatrix {
        let n = self.inv[0].dim();
        self.inv
            .iter()
            .zip(omega)
            .fold(SymMatrix::zeros(n), |acc, (w, &o)| acc.add(&w.scale(o)))
    }

    fn objective(&self, omega: &[f64], criterion: SizeCriterion) -> f64 {
        let info = self.information(omega);
        match criterion {
            SizeCriterion::Determinant => match info.log_det() {
                Ok(v) => -v,
                Err(_) => f64::INFINITY,
            },
            SizeCriterion::Trace => match info.inverse() {
                Ok(c) => c.trace(),
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// Objective and its gradient in ω.
    fn objective_grad(&self, omega: &[f64], criterion: SizeCriterion) -> Option<(f64, Vec<f64>)> {
        let info = self.information(omega);
        let c = info.inverse().ok()?;
        match criterion {
            SizeCriterion::Determinant => {
                let f = -info.log_det().ok()?;
                // d log det C / dω_i = -tr(C A_i^{-1})
                let g = self
                    .inv
                    .iter()
                    .map(|w| -trace_product(c.as_matrix(), w.as_matrix()))
                    .collect();
                Some((f, g))
            }
            SizeCriterion::Trace => {
                let c2 = c.as_matrix() * c.as_matrix();
                let g = self
                    .inv
                    .iter()
                    .map(|w| -trace_product(&c2, w.as_matrix()))
                    .collect();
                Some((c.trace(), g))
            }
        }
    }

    fn fuse(&self, omega: &[f64]) -> Result<Estimate> {
        let n = self.inv[0].dim();
        let info = self.information(omega);
        let cov = info.inverse()?;
        let im = self
            .info_means
            .iter()
            .zip(omega)
            .fold(DVector::zeros(n), |acc, (v, &o)| acc + v * o);
        let mean = cov.as_matrix() * im;
        Estimate::new(mean, cov)
    }
}

/// Euclidean projection onto the unit simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Covariance Intersection: Kalman fusion of the ω-inflated estimates
/// `(a_i, A_i / ω_i)` with ω on the unit simplex chosen to minimize the fused
/// covariance size.
pub fn ci_fuse(estimates: &[Estimate], cfg: &CiConfig) -> Result<FusionResult> {
    if estimates.len() < 2 {
        return Err(CovError::InvalidInput(
            "covariance intersection needs at least two estimates".into(),
        ));
    }
    let info = InfoForm::new(estimates)?;
    let m = estimates.len();
    let (omega, status) = if m == 2 {
        let (w, _) = golden_section(
            |w| info.objective(&[w, 1.0 - w], cfg.criterion),
            cfg.eps,
            1.0 - cfg.eps,
            1e-11,
        );
        let w = polish_pair(&info, w, cfg);
        (vec![w, 1.0 - w], SearchStatus::Converged)
    } else {
        simplex_search(&info, m, cfg)
    };
    let estimate = info.fuse(&omega)?;
    let objective = estimate.cov().log_det()?;
    Ok(FusionResult {
        estimate,
        weights: Some(OmegaWeights(omega)),
        objective,
        status,
    })
}

/// Bisection on the directional derivative around the golden-section
/// estimate, which is only accurate to about the square root of machine
/// precision on a flat objective.
fn polish_pair(info: &InfoForm, w: f64, cfg: &CiConfig) -> f64 {
    let slope = |w: f64| {
        info.objective_grad(&[w, 1.0 - w], cfg.criterion)
            .map(|(_, g)| g[0] - g[1])
    };
    let mut lo = (w - 1e-6).max(cfg.eps);
    let mut hi = (w + 1e-6).min(1.0 - cfg.eps);
    match (slope(lo), slope(hi)) {
        (Some(a), Some(b)) if a < 0.0 && b > 0.0 => {}
        _ => return w,
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match slope(mid) {
            Some(g) if g > 0.0 => hi = mid,
            Some(_) => lo = mid,
            None => return w,
        }
    }
    0.5 * (lo + hi)
}

fn simplex_search(info: &InfoForm, m: usize, cfg: &CiConfig) -> (Vec<f64>, SearchStatus) {
    let mut starts = vec![vec![1.0 / m as f64; m]];
    for i in 0..m {
        let mut s = vec![0.1 / (m - 1) as f64; m];
        s[i] = 0.9;
        starts.push(s);
    }
    let mut best: Option<(f64, Vec<f64>, SearchStatus)> = None;
    for s in starts {
        let (w, f, status) = projected_gradient(info, s, cfg);
        let better = match &best {
            None => true,
            Some((bf, bw, _)) => f < *bf || (f == *bf && w < *bw),
        };
        if better {
            best = Some((f, w, status));
        }
    }
    let (_, w, status) = best.expect("at least one start");
    (w, status)
}

fn projected_gradient(info: &InfoForm, mut w: Vec<f64>, cfg: &CiConfig) -> (Vec<f64>, f64, SearchStatus) {
    let Some((mut f, mut g)) = info.objective_grad(&w, cfg.criterion) else {
        return (w, f64::INFINITY, SearchStatus::IterationCapped);
    };
    let mut step = 1.0 / (1.0 + g.iter().map(|v| v.abs()).fold(0.0, f64::max));
    for _ in 0..cfg.max_iter {
        let mut accepted = None;
        let mut s = step;
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(x, d)| x - s * d).collect();
            let trial = project_simplex(&trial);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&w))
                .map(|(d, (t, x))| d * (t - x))
                .sum();
            let ft = info.objective(&trial, cfg.criterion);
            if ft <= f + 0.25 * decrease.min(0.0) {
                accepted = Some((trial, ft, s));
                break;
            }
            s *= 0.5;
        }
        let Some((trial, ft, s)) = accepted else {
            return (w, f, SearchStatus::Converged);
        };
        let moved = trial
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = trial;
        f = ft;
        if moved <= cfg.tol {
            return (w, f, SearchStatus::Converged);
        }
        match info.objective_grad(&w, cfg.criterion) {
            Some((fv, gv)) => {
                f = fv;
                g = gv;
            }
            None => return (w, f, SearchStatus::IterationCapped),
        }
        step = (s * 2.0).min(1e6);
    }
    (w, f, SearchStatus::IterationCapped)
}

/// Outcome of a sampled CI joint-bound check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundCheck {
    Holds,
    Violated,
    /// Could not draw enough admissible cross-covariances.
    Inconclusive,
}

/// Random matrix with singular values in `[0, 1]`.
fn random_contraction<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let svd = g.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let k = svd.singular_values.len();
    let s = DMatrix::from_fn(k, k, |i, j| if i == j { rng.random::<f64>() } else { 0.0 });
    // push a share of draws onto the boundary of the admissible set
    let s = if rng.random::<f64>() < 0.5 {
        DMatrix::identity(k, k)
    } else {
        s
    };
    u * s * vt
}

/// Samples admissible cross-covariances `X_ij` (true joint PSD) and checks that
/// the block-diagonal `diag(A_i / ω_i)` dominates every sampled joint.
/// Estimates whose weight is below `1e-12` drop out of the check, as their
/// inflated block is unbounded.
pub fn ci_joint_bound_check(
    estimates: &[Estimate],
    omega: &OmegaWeights,
    cross_samples: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<BoundCheck> {
    check_same_dim(estimates.len(), omega.0.len())?;
    let sum: f64 = omega.0.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || omega.0.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(CovError::InvalidInput("weights must lie on the unit simplex".into()));
    }
    let kept: Vec<usize> = (0..estimates.len()).filter(|&i| omega.0[i] > 1e-12).collect();
    let roots: Vec<SymMatrix> = kept
        .iter()
        .map(|&i| estimates[i].cov().sqrt_psd())
        .collect::<Result<_>>()?;
    let dims: Vec<usize> = kept.iter().map(|&i| estimates[i].dim()).collect();
    let mut offsets = vec![0];
    for d in &dims {
        offsets.push(offsets.last().unwrap() + d);
    }
    let total = *offsets.last().unwrap();
    let mut bound = DMatrix::zeros(total, total);
    for (k, &i) in kept.iter().enumerate() {
        let b = estimates[i].cov().scale(1.0 / omega.0[i]);
        bound
            .view_mut((offsets[k], offsets[k]), (dims[k], dims[k]))
            .copy_from(b.as_matrix());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 200 * cross_samples.max(1);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < cross_samples {
        if attempts >= cap {
            return Ok(BoundCheck::Inconclusive);
        }
        attempts += 1;
        let mut joint = DMatrix::zeros(total, total);
        for (k, &i) in kept.iter().enumerate() {
            joint
                .view_mut((offsets[k], offsets[k]), (dims[k], dims[k]))
                .copy_from(estimates[i].cov().as_matrix());
        }
        for p in 0..kept.len() {
            for q in (p + 1)..kept.len() {
                let r = random_contraction(&mut rng, dims[p], dims[q]);
                let x = roots[p].as_matrix() * r * roots[q].as_matrix();
                joint
                    .view_mut((offsets[p], offsets[q]), (dims[p], dims[q]))
                    .copy_from(&x);
                joint
                    .view_mut((offsets[q], offsets[p]), (dims[q], dims[p]))
                    .copy_from(&x.transpose());
            }
        }
        let joint = SymMatrix::symmetrize(joint)?;
        // contractions only guarantee a PSD joint for two blocks
        if kept.len() > 2 && !is_psd(&joint, tol)? {
            continue;
        }
        accepted += 1;
        let gap = SymMatrix::symmetrize(bound.clone())?.sub(&joint);
        if !is_psd(&gap, tol)? {
            return Ok(BoundCheck::Violated);
        }
    }
    Ok(BoundCheck::Holds)
}
