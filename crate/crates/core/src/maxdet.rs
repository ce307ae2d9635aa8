//! Log-barrier interior-point solver for determinant maximization:
//!
//! ```text
//! minimize    c^T x - log det G(x)
//! subject to  F_i(x) ⪯ 0,   G(x) ≻ 0
//! ```
//!
//! with `G` and every `F_i` affine in `x`. Nonnegativity of a scalar variable
//! is a 1 × 1 LMI.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::linalg::{trace_product, SymMatrix};

/// `F(x) = F_0 + Σ_k x_k F_k`, storing only the nonzero `F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    constant: SymMatrix,
    terms: Vec<(usize, SymMatrix)>,
}

impl AffineMap {
    pub fn new(constant: SymMatrix, terms: Vec<(usize, SymMatrix)>) -> Result<Self> {
        let n = constant.dim();
        for (_, f) in &terms {
            crate::linalg::check_same_dim(n, f.dim())?;
        }
        let terms = terms
            .into_iter()
            .filter(|(_, f)| f.as_matrix().iter().any(|v| *v != 0.0))
            .collect();
        Ok(Self { constant, terms })
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn constant(&self) -> &SymMatrix {
        &self.constant
    }

    pub fn terms(&self) -> &[(usize, SymMatrix)] {
        &self.terms
    }

    /// Coefficient of variable `k`, zero if absent.
    pub fn coefficient(&self, k: usize) -> SymMatrix {
        self.terms
            .iter()
            .find(|(j, _)| *j == k)
            .map(|(_, f)| f.clone())
            .unwrap_or_else(|| SymMatrix::zeros(self.dim()))
    }

    pub fn eval(&self, x: &[f64]) -> SymMatrix {
        let mut m = self.constant.as_matrix().clone();
        for (k, f) in &self.terms {
            m += f.as_matrix() * x[*k];
        }
        SymMatrix::symmetrize(m).expect("square by construction")
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|(k, _)| *k).max()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxdetProblem {
    pub num_vars: usize,
    pub linear: DVector<f64>,
    pub logdet: AffineMap,
    pub lmis: Vec<AffineMap>,
}

impl MaxdetProblem {
    pub fn new(linear: DVector<f64>, logdet: AffineMap, lmis: Vec<AffineMap>) -> Result<Self> {
        let num_vars = linear.len();
        let too_big = std::iter::once(&logdet)
            .chain(&lmis)
            .filter_map(AffineMap::max_var)
            .any(|k| k >= num_vars);
        if too_big {
            return Err(CovError::InvalidInput("LMI references a variable out of range".into()));
        }
        Ok(Self { num_vars, linear, logdet, lmis })
    }

    /// `c^T x - log det G(x)`, `+∞` when `G(x)` is not positive definite.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        match self.logdet.eval(x).log_det() {
            Ok(ld) => lin - ld,
            Err(_) => f64::INFINITY,
        }
    }

    /// Whether `G(x) ≻ 0` and every `F_i(x) ≺ 0`.
    pub fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.logdet.eval(x).as_matrix().clone().cholesky().is_some()
            && self
                .lmis
                .iter()
                .all(|f| f.eval(x).scale(-1.0).into_matrix().cholesky().is_some())
    }

    /// Barrier parameter: the sum of the LMI block sizes.
    pub fn barrier_degree(&self) -> f64 {
        self.lmis.iter().map(|f| f.dim() as f64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierConfig {
    pub t0: f64,
    pub mu: f64,
    /// Target duality-gap bound `θ / t`.
    pub gap: f64,
    /// Centering stops when `λ² / 2` falls below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    pub alpha: f64,
    pub beta: f64,
    pub kkt_tol: f64,
    pub record_trace: bool,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            gap: 1e-9,
            newton_tol: 1e-10,
            max_newton: 200,
            max_outer: 100,
            alpha: 0.25,
            beta: 0.5,
            kkt_tol: 1e-8,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

/// Dual matrices `Z_i ⪰ 0`, one per LMI.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub lmi: Vec<SymMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub objective: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Bound on suboptimality, `θ / t`.
    pub gap: f64,
    pub kkt: f64,
    pub duals: Duals,
    pub newton_steps: usize,
    pub trace: Vec<TracePoint>,
}

/// Inverses of `G(x)` and of every `-F_i(x)`; `None` outside the interior.
struct Inverses {
    g: DMatrix<f64>,
    z: Vec<DMatrix<f64>>,
}

fn inverses(p: &MaxdetProblem, x: &[f64]) -> Option<Inverses> {
    let g = p.logdet.eval(x).into_matrix().cholesky()?.inverse();
    let z = p
        .lmis
        .iter()
        .map(|f| f.eval(x).scale(-1.0).into_matrix().cholesky().map(|c| c.inverse()))
        .collect::<Option<Vec<_>>>()?;
    Some(Inverses { g, z })
}

/// `t f_0(x) - Σ log det(-F_i(x))`.
fn barrier_value(p: &MaxdetProblem, x: &[f64], t: f64) -> f64 {
    let mut v = t * p.objective(x);
    if !v.is_finite() {
        return f64::INFINITY;
    }
    for f in &p.lmis {
        match f.eval(x).scale(-1.0).into_matrix().cholesky() {
            Some(c) => v -= 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => return f64::INFINITY,
        }
    }
    v
}

/// Adds `w · tr(P F_k)` to `grad` and `w · tr(P F_k P F_l)` to `hess`.
fn accumulate(map: &AffineMap, p: &DMatrix<f64>, w: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
    let prods: Vec<(usize, DMatrix<f64>)> = map.terms.iter().map(|(k, f)| (*k, p * f.as_matrix())).collect();
    for (a, (ka, pa)) in prods.iter().enumerate() {
        grad[*ka] += w * pa.trace();
        for (kb, pb) in prods.iter().take(a + 1) {
            let v = w * trace_product(pa, &pb.transpose());
            hess[(*ka, *kb)] += v;
            if ka != kb {
                hess[(*kb, *ka)] += v;
            }
        }
    }
}

fn gradient_hessian(p: &MaxdetProblem, inv: &Inverses, t: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = p.num_vars;
    let mut grad = &p.linear * t;
    let mut hess = DMatrix::zeros(n, n);
    // -log det G contributes -tr(G^{-1} G_k) and tr(G^{-1} G_k G^{-1} G_l)
    let mut g_grad = DVector::zeros(n);
    accumulate(&p.logdet, &inv.g, t, &mut g_grad, &mut hess);
    grad -= g_grad;
    for (f, z) in p.lmis.iter().zip(&inv.z) {
        accumulate(f, z, 1.0, &mut grad, &mut hess);
    }
    (grad, hess)
}

/// Newton direction with symmetric diagonal scaling of the Hessian.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let d = DVector::from_fn(n, |i, _| {
        let h = hess[(i, i)];
        if h > 0.0 {
            1.0 / h.sqrt()
        } else {
            1.0
        }
    });
    let scaled = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * d[i] * d[j]);
    let rhs = grad.component_mul(&d);
    let chol = scaled.cholesky()?;
    let y = chol.solve(&rhs);
    let step = -y.component_mul(&d);
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Duals of the central point at barrier parameter `t`: `Z_i = (-F_i(x))^{-1} / t`.
pub fn central_duals(p: &MaxdetProblem, x: &[f64], t: f64) -> Result<Duals> {
    let inv = inverses(p, x).ok_or_else(|| CovError::Infeasible("point is not strictly feasible".into()))?;
    Ok(Duals {
        lmi: inv
            .z
            .into_iter()
            .map(|z| SymMatrix::symmetrize(z / t))
            .collect::<Result<_>>()?,
    })
}

fn stationarity(p: &MaxdetProblem, x: &[f64], duals: &Duals) -> Result<DVector<f64>> {
    let g_inv = p.logdet.eval(x).inverse()?;
    let mut station = p.linear.clone();
    for (k, gk) in &p.logdet.terms {
        station[*k] -= trace_product(g_inv.as_matrix(), gk.as_matrix());
    }
    for (f, z) in p.lmis.iter().zip(&duals.lmi) {
        for (k, fk) in &f.terms {
            station[*k] += trace_product(z.as_matrix(), fk.as_matrix());
        }
    }
    Ok(station)
}

/// Removes the stationarity residual of `duals` by the correction
/// `ΔZ_i = Z_i (Σ_k y_k F_ik) Z_i`, which keeps each `Z_i` positive
/// semidefinite for small `y`.
pub fn refine_duals(p: &MaxdetProblem, x: &[f64], duals: &Duals) -> Result<Duals> {
    let mut out = duals.clone();
    for _ in 0..3 {
        let r = stationarity(p, x, &out)?;
        let n = p.num_vars;
        let mut gram = DMatrix::zeros(n, n);
        let mut unused = DVector::zeros(n);
        for (f, z) in p.lmis.iter().zip(&out.lmi) {
            accumulate(f, z.as_matrix(), 1.0, &mut unused, &mut gram);
        }
        let Some(y) = newton_direction(&r, &gram) else {
            return Ok(out);
        };
        let mut next = out.clone();
        for ((f, z), slot) in p.lmis.iter().zip(&out.lmi).zip(next.lmi.iter_mut()) {
            let mut h = DMatrix::zeros(f.dim(), f.dim());
            for (k, fk) in &f.terms {
                h += fk.as_matrix() * y[*k];
            }
            let dz = z.as_matrix() * h * z.as_matrix();
            *slot = SymMatrix::symmetrize(z.as_matrix() + dz)?;
        }
        if kkt_residual(p, x, &next)? >= kkt_residual(p, x, &out)? {
            break;
        }
        out = next;
    }
    Ok(out)
}

/// KKT residual of `(x, Z)`: the largest of the stationarity norm
/// `‖c - tr(G^{-1} G_k) + Σ_i tr(Z_i F_ik)‖_∞`, the dual infeasibility
/// `max(0, -λ_min(Z_i))` and the complementarity `|Σ_i tr(Z_i F_i(x))|`.
pub fn kkt_residual(p: &MaxdetProblem, x: &[f64], duals: &Duals) -> Result<f64> {
    if duals.lmi.len() != p.lmis.len() {
        return Err(CovError::DimensionMismatch { expected: p.lmis.len(), found: duals.lmi.len() });
    }
    let station = stationarity(p, x, duals)?;
    let mut dual_infeas: f64 = 0.0;
    let mut comp = 0.0;
    for (f, z) in p.lmis.iter().zip(&duals.lmi) {
        dual_infeas = dual_infeas.max(-z.min_eig()?);
        comp += trace_product(z.as_matrix(), f.eval(x).as_matrix());
    }
    Ok(station.amax().max(dual_infeas).max(comp.abs()))
}

/// Path-following barrier method from a strictly feasible `x0`.
pub fn solve(p: &MaxdetProblem, x0: &[f64], cfg: &BarrierConfig) -> Result<SolverReport> {
    if x0.len() != p.num_vars {
        return Err(CovError::DimensionMismatch { expected: p.num_vars, found: x0.len() });
    }
    if !p.strictly_feasible(x0) {
        return Err(CovError::Infeasible("starting point is not strictly feasible".into()));
    }
    let theta = p.barrier_degree().max(1.0);
    let mut x = x0.to_vec();
    let mut t = cfg.t0;
    let mut status = SolverStatus::MaxIterations;
    let mut trace = Vec::new();
    let mut total_newton = 0usize;
    let mut last_good_t = t;
    'outer: for _ in 0..cfg.max_outer {
        let mut steps = 0usize;
        let mut centered = false;
        for _ in 0..cfg.max_newton {
            let Some(inv) = inverses(p, &x) else {
                status = SolverStatus::NumericalFailure;
                break 'outer;
            };
            let (grad, hess) = gradient_hessian(p, &inv, t);
            let Some(dx) = newton_direction(&grad, &hess) else {
                status = SolverStatus::NumericalFailure;
                break 'outer;
            };
            let decrement = -grad.dot(&dx);
            if decrement / 2.0 <= cfg.newton_tol {
                centered = true;
                break;
            }
            let f0 = barrier_value(p, &x, t);
            let mut s = 1.0;
            let mut moved = false;
            let mut stalled = false;
            while s > 1e-16 {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + s * b).collect();
                let ft = barrier_value(p, &trial, t);
                if ft.is_finite() && ft <= f0 - cfg.alpha * s * decrement {
                    x = trial;
                    moved = true;
                    stalled = f0 - ft <= 8.0 * f64::EPSILON * f0.abs();
                    break;
                }
                s *= cfg.beta;
            }
            steps += 1;
            if !moved || stalled {
                // no descent left at working precision
                centered = true;
                break;
            }
        }
        total_newton += steps;
        if cfg.record_trace {
            trace.push(TracePoint { t, objective: p.objective(&x), newton_steps: steps });
        }
        if centered {
            last_good_t = t;
        }
        if theta / t <= cfg.gap {
            status = if centered { SolverStatus::Optimal } else { SolverStatus::MaxIterations };
            break;
        }
        t *= cfg.mu;
    }
    let t_final = if status == SolverStatus::NumericalFailure { last_good_t } else { t };
    let duals = refine_duals(p, &x, &central_duals(p, &x, t_final)?)?;
    let kkt = kkt_residual(p, &x, &duals)?;
    if status == SolverStatus::Optimal && kkt > cfg.kkt_tol {
        status = SolverStatus::NumericalFailure;
    }
    Ok(SolverReport {
        status,
        objective: p.objective(&x),
        gap: theta / t_final,
        kkt,
        duals,
        newton_steps: total_newton,
        trace,
        x,
    })
}
