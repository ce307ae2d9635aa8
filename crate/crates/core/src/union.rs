//! Covariance Union and the direct (parametric) General Covariance Union solver.
//!
//! CU finds the minimum-determinant `(u, U)` with `U ⪰ A_i + (u - a_i)(u - a_i)^T`
//! for every input. GCU inflates each constraint by its own weight:
//! `U ⪰ A_i / ω_i + (u - a_i)(u - a_i)^T / (1 - ω_i)`, `ω_i ∈ [0, 1]`.
//! Both are solved here by derivative-free search directly on those
//! inequalities; the enclosing-ellipsoid reformulation lives in [`crate::mee`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::estimate::Estimate;
use crate::fusion::{OmegaWeights, SearchStatus};
use crate::linalg::{
    check_same_dim, is_psd, simultaneous_diagonalize, smat, svec, svec_basis, svec_len, trace_product,
    SymMatrix, Tolerance,
};
use crate::optim::{golden_section, nelder_mead, NelderMeadConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct UnionResult {
    /// The unioned `(u, U)`.
    pub estimate: Estimate,
    /// Witnessing ω per constraint (GCU only).
    pub omegas: Option<OmegaWeights>,
    /// `log det U`.
    pub objective: f64,
    /// Constraints whose slack has smallest eigenvalue within `active_slack` of 0.
    pub active: Vec<usize>,
    pub status: SearchStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnionConfig {
    /// Ridge `δ` added as `δ · trace(A)/n · I` to singular inputs; off when `None`.
    pub ridge: Option<f64>,
    /// Center search of the two-input CU.
    pub nelder_mead: NelderMeadConfig,
    /// ω is searched in `[omega_eps, 1 - omega_eps]`.
    pub omega_eps: f64,
    pub tol: Tolerance,
}

impl Default for UnionConfig {
    fn default() -> Self {
        Self {
            ridge: None,
            nelder_mead: NelderMeadConfig::default(),
            omega_eps: 1e-8,
            tol: Tolerance::default(),
        }
    }
}

fn prepare_inputs(estimates: &[Estimate], cfg: &UnionConfig, need_pd: bool) -> Result<Vec<Estimate>> {
    let first = estimates
        .first()
        .ok_or_else(|| CovError::InvalidInput("at least one estimate is required".into()))?;
    let n = first.dim();
    let mut out = Vec::with_capacity(estimates.len());
    for e in estimates {
        check_same_dim(n, e.dim())?;
        let e = match (e.cov().check_pd(), cfg.ridge) {
            (Ok(()), _) => e.clone(),
            (Err(_), Some(delta)) => e.regularized(delta),
            (Err(err), None) if need_pd => return Err(err),
            (Err(_), None) => e.clone(),
        };
        out.push(e);
    }
    Ok(out)
}

/// Minimum-determinant `U` with `U ⪰ M_i` for all inputs.
///
/// Two matrices are unioned exactly by simultaneous diagonalization,
/// `U = T^{-1} max(I, D) T^{-T}`. Three or more are unioned by a log-barrier
/// Newton method on `max log det W` s.t. `W ⪯ M_i^{-1}`, so every input must
/// be positive definite in that case.
pub fn matrix_union(mats: &[SymMatrix], tol: &Tolerance) -> Result<SymMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| CovError::InvalidInput("at least one matrix is required".into()))?;
    let n = first.dim();
    for m in mats {
        check_same_dim(n, m.dim())?;
        if !is_psd(m, tol)? {
            return Err(CovError::InvalidInput("matrix union inputs must be PSD".into()));
        }
    }
    match mats.len() {
        1 => Ok(first.clone()),
        2 => union_pair(&mats[0], &mats[1], tol),
        _ => exact_union(mats),
    }
}

fn union_pair(a: &SymMatrix, b: &SymMatrix, tol: &Tolerance) -> Result<SymMatrix> {
    let (base, other) = match a.check_pd() {
        Ok(()) => (a, b),
        Err(err) => match b.check_pd() {
            Ok(()) => (b, a),
            Err(_) => return Err(err),
        },
    };
    let (t, d) = simultaneous_diagonalize(base, other, tol)?;
    let t_inv = t.try_inverse().ok_or(CovError::Singular { min_eig: 0.0 })?;
    let grown = DMatrix::from_diagonal(&d.map(|v| v.max(1.0)));
    SymMatrix::symmetrize(&t_inv * grown * t_inv.transpose())
}

/// Sequential pairwise unions in decreasing-determinant order: a valid, usually
/// loose, upper bound on [`matrix_union`].
pub fn pairwise_union(mats: &[SymMatrix], tol: &Tolerance) -> Result<SymMatrix> {
    let mut order: Vec<(f64, &SymMatrix)> = mats
        .iter()
        .map(|m| Ok((m.log_det().unwrap_or(f64::NEG_INFINITY), m)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut acc = order
        .first()
        .ok_or_else(|| CovError::InvalidInput("at least one matrix is required".into()))?
        .1
        .clone();
    for (_, m) in order.iter().skip(1) {
        acc = union_pair(&acc, m, tol)?;
    }
    Ok(acc)
}

/// Barrier path following on `-t log det W - Σ log det(N_i - W)`,
/// `N_i = M_i^{-1}`; returns `W^{-1}`, which strictly dominates every `M_i`.
fn exact_union(mats: &[SymMatrix]) -> Result<SymMatrix> {
    let n = mats[0].dim();
    let caps: Vec<SymMatrix> = mats.iter().map(|m| m.inverse()).collect::<Result<_>>()?;
    let basis = svec_basis(n);
    let k = svec_len(n);
    let floor = caps
        .iter()
        .map(|c| c.min_eig())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mut w = SymMatrix::identity(n).scale(0.5 * floor);
    let theta = (mats.len() * n) as f64;
    let mut t = 1.0 / floor.max(1e-300);
    let gap = 1e-10;
    let slacks = |w: &SymMatrix| -> Option<Vec<SymMatrix>> {
        caps.iter().map(|c| c.sub(w).inverse().ok()).collect()
    };
    let barrier = |w: &SymMatrix, t: f64| -> Option<f64> {
        let mut v = -t * w.log_det().ok()?;
        for c in &caps {
            v -= c.sub(w).log_det().ok()?;
        }
        Some(v)
    };
    for _outer in 0..60 {
        for _newton in 0..100 {
            let w_inv = w.inverse()?;
            let s_inv = slacks(&w).ok_or(CovError::Singular { min_eig: 0.0 })?;
            let mut grad = DVector::zeros(k);
            let mut hess = DMatrix::zeros(k, k);
            let wg: Vec<DMatrix<f64>> = basis.iter().map(|e| w_inv.as_matrix() * e.as_matrix()).collect();
            for a in 0..k {
                grad[a] = -t * wg[a].trace();
                for b in 0..=a {
                    hess[(a, b)] = t * trace_product(&wg[a], &wg[b].transpose());
                }
            }
            for s in &s_inv {
                let sg: Vec<DMatrix<f64>> = basis.iter().map(|e| s.as_matrix() * e.as_matrix()).collect();
                for a in 0..k {
                    grad[a] += sg[a].trace();
                    for b in 0..=a {
                        hess[(a, b)] += trace_product(&sg[a], &sg[b].transpose());
                    }
                }
            }
            let hess = SymMatrix::from_lower(&hess)?;
            let chol = hess
                .into_matrix()
                .cholesky()
                .ok_or(CovError::Singular { min_eig: 0.0 })?;
            let step = -chol.solve(&grad);
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let dw = crate::linalg::smat(step.as_slice(), n);
            let f0 = barrier(&w, t).ok_or(CovError::Singular { min_eig: 0.0 })?;
            let mut s = 1.0;
            loop {
                let trial = w.add(&dw.scale(s));
                if let Some(ft) = barrier(&trial, t) {
                    if ft <= f0 - 0.25 * s * decrement {
                        w = trial;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-20 {
                    break;
                }
            }
            if s < 1e-20 {
                break;
            }
        }
        if theta / t <= gap {
            break;
        }
        t *= 20.0;
    }
    w.inverse()
}

/// `A_i / ω + d d^T / (1 - ω)`.
fn inflated(cov: &SymMatrix, d: &DVector<f64>, omega: f64) -> SymMatrix {
    cov.scale(1.0 / omega)
        .add(&SymMatrix::rank_one(d).scale(1.0 / (1.0 - omega)))
}

fn active_constraints(u: &DVector<f64>, cov: &SymMatrix, slacks: impl Iterator<Item = SymMatrix>, tol: &Tolerance) -> Vec<usize> {
    let _ = (u, cov);
    slacks
        .enumerate()
        .filter(|(_, s)| s.min_eig().map(|v| v <= tol.active_slack).unwrap_or(false))
        .map(|(i, _)| i)
        .collect()
}

/// Starting centers: det-weighted mean of the means, each mean, and the
/// midpoint of the farthest pair.
fn start_centers(inputs: &[Estimate]) -> Vec<DVector<f64>> {
    let n = inputs[0].dim();
    let weights: Vec<f64> = inputs
        .iter()
        .map(|e| e.cov().log_det().map(f64::exp).unwrap_or(0.0).max(1e-300))
        .collect();
    let total: f64 = weights.iter().sum();
    let weighted = inputs
        .iter()
        .zip(&weights)
        .fold(DVector::zeros(n), |acc, (e, w)| acc + e.mean() * (w / total));
    let mut starts = vec![weighted];
    starts.extend(inputs.iter().map(|e| e.mean().clone()));
    let mut far = (0, 0, -1.0);
    for i in 0..inputs.len() {
        for j in (i + 1)..inputs.len() {
            let d = (inputs[i].mean() - inputs[j].mean()).norm();
            if d > far.2 {
                far = (i, j, d);
            }
        }
    }
    if far.2 >= 0.0 {
        starts.push((inputs[far.0].mean() + inputs[far.1].mean()) * 0.5);
    }
    starts
}

fn lexicographic_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.iter().zip(b.iter()).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

fn typical_length(inputs: &[Estimate]) -> f64 {
    let n = inputs[0].dim() as f64;
    let spread = inputs
        .iter()
        .map(|e| (e.cov().trace() / n).sqrt())
        .fold(0.0, f64::max);
    spread.max(1e-12)
}

/// Covariance Union of `m >= 1` estimates: Nelder-Mead over `u` with the
/// minimum-determinant [`matrix_union`] of `A_i + (u - a_i)(u - a_i)^T` inside.
/// Exact for two estimates at a given `u`; the search over `u` is local.
pub fn cu_union(estimates: &[Estimate], cfg: &UnionConfig) -> Result<UnionResult> {
    let inputs = prepare_inputs(estimates, cfg, false)?;
    let tol = cfg.tol;
    if inputs.len() == 1 {
        let e = inputs[0].clone();
        let objective = e.cov().log_det().unwrap_or(f64::NEG_INFINITY);
        return Ok(UnionResult { estimate: e, omegas: None, objective, active: vec![0], status: SearchStatus::Converged });
    }
    if inputs.len() > 2 {
        let (estimate, cs, converged) = match enclosing_input(&inputs, Family::Cu)? {
            Some((j, cs)) => (inputs[j].clone(), cs, true),
            None => {
                let enc = solve_enclosure(&inputs, Family::Cu, &tol)?;
                (Estimate::new(enc.u, enc.cov)?, enc.contacts, enc.converged)
            }
        };
        return Ok(UnionResult {
            objective: estimate.cov().log_det()?,
            omegas: None,
            active: active_from_contacts(&cs, &tol),
            estimate,
            status: if converged { SearchStatus::Converged } else { SearchStatus::IterationCapped },
        });
    }
    let n = inputs[0].dim();
    let constraint_mats = |u: &DVector<f64>| -> Vec<SymMatrix> {
        inputs
            .iter()
            .map(|e| e.cov().add(&SymMatrix::rank_one(&(u - e.mean()))))
            .collect()
    };
    let objective = |u: &DVector<f64>| -> f64 {
        matrix_union(&constraint_mats(u), &tol)
            .and_then(|m| m.log_det())
            .unwrap_or(f64::INFINITY)
    };
    let len = typical_length(&inputs);
    let steps = vec![0.25 * len; n];
    let mut best: Option<(f64, DVector<f64>, bool)> = None;
    for start in start_centers(&inputs) {
        let r = nelder_mead(
            |x| objective(&DVector::from_column_slice(x)),
            start.as_slice(),
            &steps,
            &cfg.nelder_mead,
        );
        let u = DVector::from_vec(r.x);
        let better = match &best {
            None => true,
            Some((f, bu, _)) => r.f < *f || (r.f == *f && lexicographic_less(&u, bu)),
        };
        if better {
            best = Some((r.f, u, r.converged));
        }
    }
    let (_, u, converged) = best.expect("at least one start");
    let mats = constraint_mats(&u);
    let cov = matrix_union(&mats, &tol)?;
    let objective = cov.log_det()?;
    let active = active_constraints(&u, &cov, mats.iter().map(|m| cov.sub(m)), &tol);
    Ok(UnionResult {
        estimate: Estimate::new(u, cov)?,
        omegas: None,
        objective,
        active,
        status: if converged { SearchStatus::Converged } else { SearchStatus::IterationCapped },
    })
}

/// Largest eigenvalue of `diag(d) + rho f f^T`, `rho >= 0`.
fn lambda_max_rank_one(d: &[f64], f: &[f64], rho: f64) -> f64 {
    let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm2: f64 = f.iter().map(|v| v * v).sum();
    let weight = norm2 * rho;
    if weight <= 0.0 {
        return dmax;
    }
    // components this small only perturb their eigenvalue at rounding level
    let coupled: Vec<(f64, f64)> = d
        .iter()
        .zip(f)
        .filter(|(_, fj)| fj.abs() > 1e-12 * norm2.sqrt())
        .map(|(dj, fj)| (*dj, rho * fj * fj))
        .collect();
    let top = coupled.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    // secular equation 1 = Σ q_j / (x - d_j) on (top, top + weight]
    let secular = |x: f64| -> (f64, f64) {
        coupled.iter().fold((1.0, 0.0), |(g, dg), (dj, q)| {
            let r = x - dj;
            (g - q / r, dg + q / (r * r))
        })
    };
    let mut lo = top;
    let mut hi = top + weight;
    let mut x = hi;
    for _ in 0..200 {
        let (g, dg) = secular(x);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let newton = x - g / dg;
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    x.max(dmax)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    /// `U ⪰ A + d d^T`.
    Cu,
    /// `U ⪰ A / ω + d d^T / (1 - ω)` for the best ω in `[eps, 1 - eps]`.
    Gcu { eps: f64 },
}

/// Tightness of one constraint at `(u, U)`: the smallest `s` with `s U ⪰ M`
/// for the required matrix `M`, and the witnessing ω.
struct Contact {
    s: f64,
    omega: f64,
}

fn contact(e: &Estimate, u: &DVector<f64>, l_inv: &DMatrix<f64>, family: Family) -> Result<Contact> {
    let d = u - e.mean();
    let (s, omega) = match family {
        Family::Cu => {
            let need = e.cov().add(&SymMatrix::rank_one(&d));
            (need.congruence(&l_inv.transpose()).max_eig()?, 0.0)
        }
        Family::Gcu { eps } => {
            let (vals, vecs) = e.cov().congruence(&l_inv.transpose()).eigen()?;
            let f = vecs.transpose() * (l_inv * &d);
            let eig: Vec<f64> = vals.iter().copied().collect();
            let proj: Vec<f64> = f.iter().copied().collect();
            if proj.iter().all(|v| *v == 0.0) {
                (eig[eig.len() - 1], 1.0)
            } else {
                let (w, s) = golden_section(
                    |w| {
                        let dw: Vec<f64> = eig.iter().map(|v| v / w).collect();
                        lambda_max_rank_one(&dw, &proj, 1.0 / (1.0 - w))
                    },
                    eps,
                    1.0 - eps,
                    1e-12,
                );
                (s, w)
            }
        }
    };
    Ok(Contact { s, omega })
}

fn contacts(inputs: &[Estimate], u: &DVector<f64>, cov: &SymMatrix, family: Family) -> Result<Vec<Contact>> {
    let l_inv = cov
        .cholesky_factor()?
        .try_inverse()
        .ok_or(CovError::Singular { min_eig: 0.0 })?;
    inputs.iter().map(|e| contact(e, u, &l_inv, family)).collect()
}

/// Smooth log-barrier for the enclosure problem in the variables
/// `x = [svec(U), u, ω_1..ω_m]` (no ω for CU):
/// `t log det U - Σ log det G_i - Σ (log ω_i + log(1 - ω_i))` with
/// `G_i = U - A_i/ω_i - d_i d_i^T/(1 - ω_i)` and `d_i = u - a_i`.
struct EnclosureBarrier<'a> {
    inputs: &'a [Estimate],
    family: Family,
    n: usize,
    basis: Vec<SymMatrix>,
}

struct Local {
    k_inv: DMatrix<f64>,
    d: DVector<f64>,
    omega: Option<f64>,
}

impl EnclosureBarrier<'_> {
    fn new(inputs: &[Estimate], family: Family) -> EnclosureBarrier<'_> {
        let n = inputs[0].dim();
        EnclosureBarrier { inputs, family, n, basis: svec_basis(n) }
    }

    fn k(&self) -> usize {
        svec_len(self.n)
    }

    fn len(&self) -> usize {
        let extra = if matches!(self.family, Family::Gcu { .. }) { self.inputs.len() } else { 0 };
        self.k() + self.n + extra
    }

    fn unpack(&self, x: &[f64]) -> (SymMatrix, DVector<f64>) {
        let k = self.k();
        (smat(&x[..k], self.n), DVector::from_column_slice(&x[k..k + self.n]))
    }

    fn pack(&self, cov: &SymMatrix, u: &DVector<f64>, omegas: &[f64]) -> Vec<f64> {
        let mut x = svec(cov);
        x.extend(u.iter());
        if matches!(self.family, Family::Gcu { .. }) {
            x.extend_from_slice(omegas);
        }
        x
    }

    /// Barrier value and per-constraint data, `None` outside the domain.
    fn eval(&self, x: &[f64], t: f64) -> Option<(f64, DMatrix<f64>, Vec<Local>)> {
        let (cov, u) = self.unpack(x);
        let u_inv = cov.as_matrix().clone().cholesky()?;
        let mut value = t * 2.0 * u_inv.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let u_inv = u_inv.inverse();
        let mut locals = Vec::with_capacity(self.inputs.len());
        for (i, e) in self.inputs.iter().enumerate() {
            let d = &u - e.mean();
            let (g, omega) = match self.family {
                Family::Cu => (cov.as_matrix() - e.cov().as_matrix() - &d * d.transpose(), None),
                Family::Gcu { .. } => {
                    let w = x[self.k() + self.n + i];
                    if !(w > 0.0 && w < 1.0) {
                        return None;
                    }
                    value -= w.ln() + (1.0 - w).ln();
                    let g = cov.as_matrix() - e.cov().as_matrix() / w - &d * d.transpose() / (1.0 - w);
                    (g, Some(w))
                }
            };
            let ch = g.cholesky()?;
            value -= 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            locals.push(Local { k_inv: ch.inverse(), d, omega });
        }
        value.is_finite().then_some((value, u_inv, locals))
    }

    fn derivatives(&self, t: f64, u_inv: &DMatrix<f64>, locals: &[Local]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let k = self.k();
        let len = self.len();
        let mut grad = DVector::zeros(len);
        let mut hess = DMatrix::zeros(len, len);
        let basis: Vec<&DMatrix<f64>> = self.basis.iter().map(|b| b.as_matrix()).collect();
        let ub: Vec<DMatrix<f64>> = basis.iter().map(|b| u_inv * *b).collect();
        for a in 0..k {
            grad[a] += t * trace_of_product(&ub[a], &DMatrix::identity(n, n));
            for b in 0..k {
                hess[(a, b)] -= t * trace_of_product(&ub[a], &ub[b]);
            }
        }
        for (i, loc) in locals.iter().enumerate() {
            let cov_i = self.inputs[i].cov().as_matrix();
            let c = loc.omega.map_or(1.0, |w| 1.0 / (1.0 - w));
            let kinv = &loc.k_inv;
            let kd = kinv * &loc.d;
            // first-order variations of G_i, indexed by global variable
            let mut vars: Vec<(usize, DMatrix<f64>)> = Vec::with_capacity(k + n + 1);
            for a in 0..k {
                vars.push((a, basis[a].clone()));
            }
            for a in 0..n {
                let mut e = DVector::zeros(n);
                e[a] = 1.0;
                vars.push((k + a, -(&e * loc.d.transpose() + &loc.d * e.transpose()) * c));
            }
            if let Some(w) = loc.omega {
                let dg = cov_i / (w * w) - &loc.d * loc.d.transpose() * (c * c);
                vars.push((k + n + i, dg));
                grad[k + n + i] += -1.0 / w + 1.0 / (1.0 - w);
                hess[(k + n + i, k + n + i)] += 1.0 / (w * w) + 1.0 / ((1.0 - w) * (1.0 - w));
            }
            let prods: Vec<DMatrix<f64>> = vars.iter().map(|(_, m)| kinv * m).collect();
            for (p, (gp, _)) in vars.iter().enumerate() {
                grad[*gp] -= prods[p].trace();
                for (q, (gq, _)) in vars.iter().enumerate() {
                    hess[(*gp, *gq)] += trace_of_product(&prods[p], &prods[q]);
                }
            }
            for a in 0..n {
                for b in 0..n {
                    hess[(k + a, k + b)] += 2.0 * c * kinv[(a, b)];
                }
            }
            if let Some(w) = loc.omega {
                let j = k + n + i;
                for a in 0..n {
                    let v = 2.0 * c * c * kd[a];
                    hess[(k + a, j)] += v;
                    hess[(j, k + a)] += v;
                }
                let second = cov_i * (2.0 / (w * w * w)) + &loc.d * loc.d.transpose() * (2.0 * c * c * c);
                hess[(j, j)] += trace_of_product(kinv, &second);
            }
        }
        (grad, hess)
    }
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Newton direction for a possibly indefinite Hessian: diagonal scaling and
/// growing Levenberg damping until the Cholesky factorization succeeds.
fn damped_newton(grad: &DVector<f64>, hess: &DMatrix<f64>) -> DVector<f64> {
    let n = grad.len();
    let d = DVector::from_fn(n, |i, _| {
        let v = hess[(i, i)].abs();
        if v > 0.0 {
            1.0 / v.sqrt()
        } else {
            1.0
        }
    });
    let scaled = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * d[i] * d[j]);
    let rhs = grad.component_mul(&d);
    let mut damping = 0.0;
    for _ in 0..30 {
        let m = &scaled + DMatrix::identity(n, n) * damping;
        if let Some(ch) = m.cholesky() {
            return -ch.solve(&rhs).component_mul(&d);
        }
        damping = if damping == 0.0 { 1e-12 } else { damping * 10.0 };
    }
    -grad.clone()
}

struct Enclosure {
    u: DVector<f64>,
    cov: SymMatrix,
    contacts: Vec<Contact>,
    converged: bool,
}

fn solve_enclosure(inputs: &[Estimate], family: Family, tol: &Tolerance) -> Result<Enclosure> {
    let n = inputs[0].dim();
    let barrier = EnclosureBarrier::new(inputs, family);
    let u0 = start_centers(inputs).swap_remove(0);
    let w0 = if matches!(family, Family::Gcu { .. }) { 0.5 } else { 1.0 };
    let mats: Vec<SymMatrix> = inputs
        .iter()
        .map(|e| {
            let d = &u0 - e.mean();
            if w0 < 1.0 {
                e.cov().scale(1.0 / w0).add(&SymMatrix::rank_one(&d).scale(1.0 / (1.0 - w0)))
            } else {
                e.cov().add(&SymMatrix::rank_one(&d))
            }
        })
        .collect();
    let scale = typical_length(inputs).powi(2).max(f64::MIN_POSITIVE);
    let cov0 = pairwise_union(&mats, tol)?.scale(1.5).add(&SymMatrix::identity(n).scale(1e-3 * scale));
    let mut x = barrier.pack(&cov0, &u0, &vec![w0; inputs.len()]);
    let degree = inputs.len() as f64 * (n as f64 + 2.0);

    let gap = 1e-10;
    let mut t = 4.0 * inputs.len() as f64;
    let mut converged = false;
    let (mut f, mut u_inv, mut locals) = barrier
        .eval(&x, t)
        .ok_or_else(|| CovError::Infeasible("starting enclosure is not strictly feasible".into()))?;
    for _outer in 0..60 {
        for _newton in 0..200 {
            let (grad, hess) = barrier.derivatives(t, &u_inv, &locals);
            let mut dx = damped_newton(&grad, &hess);
            let mut decrement = -grad.dot(&dx);
            if !(decrement > 0.0) {
                dx = -grad.clone();
                decrement = grad.norm_squared();
            }
            if decrement / 2.0 <= 1e-12 {
                break;
            }
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-16 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + step * b).collect();
                if let Some((ft, ui, ls)) = barrier.eval(&trial, t) {
                    if ft <= f - 0.25 * step * decrement {
                        x = trial;
                        f = ft;
                        u_inv = ui;
                        locals = ls;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if degree / t <= gap {
            converged = true;
            break;
        }
        t *= 10.0;
        match barrier.eval(&x, t) {
            Some((ft, ui, ls)) => {
                f = ft;
                u_inv = ui;
                locals = ls;
            }
            None => break,
        }
    }
    let (cov, u) = barrier.unpack(&x);
    // the tightest feasible multiple of the barrier solution
    let smax = contacts(inputs, &u, &cov, family)?.iter().map(|c| c.s).fold(0.0, f64::max);
    let cov = cov.scale(smax);
    let contacts = contacts(inputs, &u, &cov, family)?;
    Ok(Enclosure { u, cov, contacts, converged })
}

/// An input whose own ellipsoid already satisfies every constraint.
fn enclosing_input(inputs: &[Estimate], family: Family) -> Result<Option<(usize, Vec<Contact>)>> {
    for (j, e) in inputs.iter().enumerate() {
        if e.cov().check_pd().is_err() {
            continue;
        }
        let cs = contacts(inputs, e.mean(), e.cov(), family)?;
        if cs.iter().all(|c| c.s <= 1.0 + 1e-12) {
            return Ok(Some((j, cs)));
        }
    }
    Ok(None)
}

fn active_from_contacts(cs: &[Contact], tol: &Tolerance) -> Vec<usize> {
    cs.iter()
        .enumerate()
        .filter(|(_, c)| c.s >= 1.0 - tol.active_slack)
        .map(|(i, _)| i)
        .collect()
}

/// Direct General Covariance Union: minimizes `log det U` subject to
/// `U ⪰ A_i / ω_i + (u - a_i)(u - a_i)^T / (1 - ω_i)` for some `ω_i ∈ [0, 1]`.
///
/// For a candidate `(u, U)` each constraint is measured by the smallest scale
/// `s_i` with `s_i U ⪰ A_i/ω + d d^T/(1 - ω)` over ω, found by a 1D search.
/// A log-barrier Newton method on `-log det U^{-1} - Σ log(1 - s_i)/t` then
/// runs in the variables `(U^{-1}, -U^{-1} u)`, with gradients of `s_i` from
/// the extremal eigenvector at the optimal ω.
pub fn gcu_direct(estimates: &[Estimate], cfg: &UnionConfig) -> Result<UnionResult> {
    let inputs = prepare_inputs(estimates, cfg, true)?;
    for e in &inputs {
        e.cov().check_pd()?;
    }
    let family = Family::Gcu { eps: cfg.omega_eps };
    let (estimate, cs, converged) = match enclosing_input(&inputs, family)? {
        Some((j, cs)) => (inputs[j].clone(), cs, true),
        None => {
            let enc = solve_enclosure(&inputs, family, &cfg.tol)?;
            (Estimate::new(enc.u, enc.cov)?, enc.contacts, enc.converged)
        }
    };
    Ok(UnionResult {
        objective: estimate.cov().log_det()?,
        omegas: Some(OmegaWeights(cs.iter().map(|c| c.omega).collect())),
        active: active_from_contacts(&cs, &cfg.tol),
        estimate,
        status: if converged { SearchStatus::Converged } else { SearchStatus::IterationCapped },
    })
}

/// Checks `candidate` against every GCU constraint by maximizing
/// `λ_min(U - A_i/ω - d d^T/(1-ω))` over ω. A zero offset admits the `ω = 1`
/// endpoint (`U ⪰ A_i`); `ω → 0` is never accepted. Returns overall
/// feasibility and the best ω per constraint.
pub fn gcu_feasible(
    candidate: &Estimate,
    estimates: &[Estimate],
    tol: &Tolerance,
) -> Result<(bool, OmegaWeights)> {
    candidate.cov().check_pd()?;
    let u = candidate.mean();
    let cov = candidate.cov();
    let slack = tol.psd_slack(cov);
    let mut ok = true;
    let mut witnesses = Vec::with_capacity(estimates.len());
    for e in estimates {
        check_same_dim(candidate.dim(), e.dim())?;
        let d = u - e.mean();
        let scale = cov.trace().abs().max(1.0).sqrt();
        let (best, w) = if d.norm() <= 1e-14 * scale {
            (cov.sub(e.cov()).min_eig()?, 1.0)
        } else {
            let (w, neg) = golden_section(
                |w| {
                    -cov.sub(&inflated(e.cov(), &d, w))
                        .min_eig()
                        .unwrap_or(f64::NEG_INFINITY)
                },
                1e-12,
                1.0 - 1e-12,
                1e-13,
            );
            (-neg, w)
        };
        ok &= best >= -slack;
        witnesses.push(w);
    }
    Ok((ok, OmegaWeights(witnesses)))
}
