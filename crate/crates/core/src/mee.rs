//! General Covariance Union as a minimum enclosing ellipsoid problem.
//!
//! An estimate `(a, A)` is the ellipsoid `{x : (x - a)^T A^{-1} (x - a) <= 1}`.
//! The smallest ellipsoid `{x : ‖W^{1/2} x + W^{-1/2} v‖ <= 1}` covering every
//! input solves
//!
//! ```text
//! minimize   -log det W
//! subject to [[W, v, 0], [v^T, -1, v^T], [0, v, -W]] - τ_i [[A_i, b_i, 0], [b_i^T, c_i, 0], [0, 0, 0]] ⪯ 0
//!            τ_i >= 0
//! ```
//!
//! with `{A_i, b_i, c_i}` the quadratic-form triple of input `i`. The union
//! is then `U = W^{-1}`, `u = -U v`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::estimate::{to_triple, EllipsoidTriple, Estimate};
use crate::fusion::OmegaWeights;
use crate::linalg::{check_same_dim, smat, svec, svec_basis, svec_len, SymMatrix, Tolerance};
use crate::maxdet::{self, AffineMap, BarrierConfig, MaxdetProblem, SolverReport, SolverStatus};
use crate::optim::golden_section;
use crate::union::{gcu_direct, gcu_feasible, UnionConfig, UnionResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeeConfig {
    pub barrier: BarrierConfig,
    pub tol: Tolerance,
    /// Ridge applied to singular inputs; off when `None`.
    pub ridge: Option<f64>,
}

impl Default for MeeConfig {
    fn default() -> Self {
        Self { barrier: BarrierConfig::default(), tol: Tolerance::default(), ridge: None }
    }
}

/// The assembled determinant-maximization problem, in coordinates centered
/// at the mean of the input means.
#[derive(Debug, Clone, PartialEq)]
pub struct MeeProblem {
    n: usize,
    shift: DVector<f64>,
    triples: Vec<EllipsoidTriple>,
    problem: MaxdetProblem,
}

fn block(n: usize, f: impl Fn(&mut DMatrix<f64>)) -> SymMatrix {
    let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    f(&mut m);
    SymMatrix::symmetrize(m).expect("square")
}

/// Builds the problem from validated estimates. Inputs must be positive definite.
pub fn assemble(estimates: &[Estimate]) -> Result<MeeProblem> {
    let first = estimates
        .first()
        .ok_or_else(|| CovError::InvalidInput("at least one estimate is required".into()))?;
    let n = first.dim();
    let m = estimates.len();
    for e in estimates {
        check_same_dim(n, e.dim())?;
        e.cov().check_pd()?;
    }
    let shift = estimates.iter().fold(DVector::zeros(n), |acc, e| acc + e.mean()) / m as f64;
    let triples: Vec<EllipsoidTriple> = estimates
        .iter()
        .map(|e| to_triple(&e.translate(&(-&shift))?))
        .collect::<Result<_>>()?;
    let k = svec_len(n);
    let num_vars = k + n + m;
    let basis = svec_basis(n);

    let mut shared: Vec<(usize, SymMatrix)> = Vec::with_capacity(k + n);
    for (idx, e) in basis.iter().enumerate() {
        shared.push((
            idx,
            block(n, |b| {
                for i in 0..n {
                    for j in 0..n {
                        b[(i, j)] = e.get(i, j);
                        b[(n + 1 + i, n + 1 + j)] = -e.get(i, j);
                    }
                }
            }),
        ));
    }
    for j in 0..n {
        shared.push((
            k + j,
            block(n, |b| {
                b[(j, n)] = 1.0;
                b[(n, j)] = 1.0;
                b[(n, n + 1 + j)] = 1.0;
                b[(n + 1 + j, n)] = 1.0;
            }),
        ));
    }
    let constant = block(n, |b| b[(n, n)] = -1.0);

    let mut lmis = Vec::with_capacity(2 * m);
    for (i, tr) in triples.iter().enumerate() {
        let hom = tr.homogeneous();
        let tau_coeff = block(n, |b| {
            for r in 0..=n {
                for c in 0..=n {
                    b[(r, c)] = -hom.get(r, c);
                }
            }
        });
        let mut terms = shared.clone();
        terms.push((k + n + i, tau_coeff));
        lmis.push(AffineMap::new(constant.clone(), terms)?);
    }
    for i in 0..m {
        lmis.push(AffineMap::new(SymMatrix::zeros(1), vec![(k + n + i, SymMatrix::from_diagonal(&[-1.0]))])?);
    }
    let logdet = AffineMap::new(SymMatrix::zeros(n), basis.into_iter().enumerate().collect())?;
    let problem = MaxdetProblem::new(DVector::zeros(num_vars), logdet, lmis)?;
    Ok(MeeProblem { n, shift, triples, problem })
}

impl MeeProblem {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_inputs(&self) -> usize {
        self.triples.len()
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn maxdet(&self) -> &MaxdetProblem {
        &self.problem
    }

    /// Centered quadratic-form triples, read back from the `τ` coefficients.
    pub fn triples(&self) -> Result<Vec<EllipsoidTriple>> {
        let n = self.n;
        let k = svec_len(n);
        (0..self.num_inputs())
            .map(|i| {
                let c = self.problem.lmis[i].coefficient(k + n + i);
                let a = SymMatrix::symmetrize(-c.as_matrix().view((0, 0), (n, n)).into_owned())?;
                let b = -c.as_matrix().view((0, n), (n, 1)).column(0).into_owned();
                EllipsoidTriple::new(a, b, -c.get(n, n))
            })
            .collect()
    }

    /// The input estimates recovered from the assembled problem.
    pub fn disassemble(&self) -> Result<Vec<Estimate>> {
        self.triples()?
            .iter()
            .map(|t| crate::estimate::from_triple(t)?.translate(&self.shift))
            .collect()
    }

    pub fn pack(&self, w: &SymMatrix, v: &DVector<f64>, tau: &[f64]) -> Vec<f64> {
        let mut x = svec(w);
        x.extend(v.iter());
        x.extend_from_slice(tau);
        x
    }

    pub fn unpack(&self, x: &[f64]) -> (SymMatrix, DVector<f64>, Vec<f64>) {
        let n = self.n;
        let k = svec_len(n);
        (smat(&x[..k], n), DVector::from_column_slice(&x[k..k + n]), x[k + n..].to_vec())
    }

    /// `(u, U)` in the original coordinates.
    pub fn recover(&self, x: &[f64]) -> Result<Estimate> {
        let (w, v, _) = self.unpack(x);
        let u_cov = w.inverse()?;
        let center = -(u_cov.as_matrix() * v) + &self.shift;
        Estimate::new(center, u_cov)
    }

    /// `[[W, v, 0], [v^T, -1, v^T], [0, v, -W]] - τ_i P_i` at `x`.
    pub fn lmi_value(&self, i: usize, x: &[f64]) -> SymMatrix {
        self.problem.lmis[i].eval(x)
    }
}

/// Strictly feasible starting point: a ball `W = β^{-2} I`, `v = 0`, wide
/// enough to contain every input, with each `τ_i` chosen by a 1D search to
/// make its LMI as negative as possible.
pub fn find_interior(p: &MeeProblem) -> Result<Vec<f64>> {
    let n = p.n;
    let m = p.num_inputs();
    let triples = p.triples()?;
    let mut beta: f64 = 0.0;
    for t in &triples {
        let e = crate::estimate::from_triple(t)?;
        beta = beta.max(e.mean().norm() + e.cov().max_eig()?.sqrt());
    }
    beta = 2.0 * beta.max(1e-12);
    for _ in 0..60 {
        let w = SymMatrix::identity(n).scale(beta.powi(-2));
        let mut x = p.pack(&w, &DVector::zeros(n), &vec![0.0; m]);
        let k = svec_len(n) + n;
        for i in 0..m {
            let (tau, _) = golden_section(
                |tau| {
                    let mut y = x.clone();
                    y[k + i] = tau;
                    p.lmi_value(i, &y).max_eig().unwrap_or(f64::INFINITY)
                },
                0.0,
                1.0,
                1e-10,
            );
            x[k + i] = tau;
        }
        if p.problem.strictly_feasible(&x) {
            return Ok(x);
        }
        beta *= 2.0;
    }
    Err(CovError::Infeasible("no strictly feasible starting ellipsoid found".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeeResult {
    pub estimate: Estimate,
    /// `log det U`.
    pub objective: f64,
    pub tau: Vec<f64>,
    pub active: Vec<usize>,
    /// Index of an input that already contains all others, when the solver was skipped.
    pub nested: Option<usize>,
    pub report: Option<SolverReport>,
}

fn prepare(estimates: &[Estimate], ridge: Option<f64>) -> Result<Vec<Estimate>> {
    estimates
        .iter()
        .map(|e| match (e.cov().check_pd(), ridge) {
            (Ok(()), _) => Ok(e.clone()),
            (Err(_), Some(delta)) => Ok(e.regularized(delta)),
            (Err(err), None) => Err(err),
        })
        .collect()
}

/// Minimum-volume ellipsoid enclosing every input.
pub fn solve_mee(estimates: &[Estimate], cfg: &MeeConfig) -> Result<MeeResult> {
    cfg.tol.validate()?;
    let inputs = prepare(estimates, cfg.ridge)?;
    let p = assemble(&inputs)?;
    let m = inputs.len();
    for (i, outer) in inputs.iter().enumerate() {
        let mut all = true;
        for (j, inner) in inputs.iter().enumerate() {
            if i != j && !slemma_encloses(outer, inner, &cfg.tol)?.0 {
                all = false;
                break;
            }
        }
        if all {
            let tau = inputs
                .iter()
                .map(|inner| slemma_encloses(outer, inner, &cfg.tol).map(|r| r.1))
                .collect::<Result<Vec<_>>>()?;
            return Ok(MeeResult {
                objective: outer.cov().log_det()?,
                estimate: outer.clone(),
                tau,
                active: vec![i],
                nested: Some(i),
                report: None,
            });
        }
    }
    let x0 = find_interior(&p)?;
    let report = maxdet::solve(&p.problem, &x0, &cfg.barrier)?;
    if report.status == SolverStatus::NumericalFailure {
        return Err(CovError::Infeasible(format!(
            "barrier solver failed (gap {:e}, kkt {:e})",
            report.gap, report.kkt
        )));
    }
    let (_, _, tau) = p.unpack(&report.x);
    if let Some(t) = tau.iter().find(|t| **t > 1.0 + 1e-8) {
        return Err(CovError::CheckFailed(format!("S-procedure multiplier {t} exceeds 1")));
    }
    let estimate = p.recover(&report.x)?;
    let mut active = Vec::new();
    for i in 0..m {
        let slack = p.lmi_value(i, &report.x).scale(-1.0).min_eig()?;
        if slack <= cfg.tol.active_slack {
            active.push(i);
        }
    }
    Ok(MeeResult {
        objective: estimate.cov().log_det()?,
        estimate,
        tau,
        active,
        nested: None,
        report: Some(report),
    })
}

/// Exact containment `inner ⊆ outer` through the S-procedure: some
/// `τ ∈ [0, 1]` with `P_outer - τ P_inner ⪯ 0` for the homogeneous forms.
/// Returns the verdict and the best `τ`.
pub fn slemma_encloses(outer: &Estimate, inner: &Estimate, tol: &Tolerance) -> Result<(bool, f64)> {
    check_same_dim(outer.dim(), inner.dim())?;
    let po = to_triple(outer)?.homogeneous();
    let pi = to_triple(inner)?.homogeneous();
    let (tau, worst) = golden_section(
        |tau| po.sub(&pi.scale(tau)).max_eig().unwrap_or(f64::INFINITY),
        0.0,
        1.0,
        1e-13,
    );
    let slack = tol.psd_slack(&po.sub(&pi.scale(tau)));
    Ok((worst <= slack, tau))
}

/// Both sides of the single-enclosure equivalence for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCheck {
    /// Some `ω ∈ [0, 1]` makes `U ⪰ A/ω + d d^T/(1 - ω)` hold.
    pub lhs: bool,
    /// `E(a, A) ⊆ E(u, U)` by the S-procedure.
    pub rhs: bool,
    pub omega: f64,
    pub tau: f64,
}

impl EquivalenceCheck {
    pub fn agrees(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// Evaluates both sides of the equivalence between the weighted covariance
/// inequality and ellipsoid containment for `(outer, inner)`.
///
/// With `u = a` the inequality reduces to its `ω = 1` limit `U ⪰ A`, which is
/// checked separately; [`CovError::EndpointOmega`] is returned if the
/// interior search reports an endpoint witness for an offset pair.
pub fn check_single_enclosure_equivalence(
    outer: &Estimate,
    inner: &Estimate,
    tol: &Tolerance,
) -> Result<EquivalenceCheck> {
    let (lhs, w) = gcu_feasible(outer, std::slice::from_ref(inner), tol)?;
    let omega = w.0[0];
    let offset = (outer.mean() - inner.mean()).norm();
    if offset > 0.0 && (omega <= 0.0 || omega >= 1.0) && lhs {
        return Err(CovError::EndpointOmega(omega));
    }
    let (rhs, tau) = slemma_encloses(outer, inner, tol)?;
    Ok(EquivalenceCheck { lhs, rhs, omega, tau })
}

const GEOMETRIC_SEED: u64 = 0x5eed_e111_9501_d000;

/// Sampled containment: every sampled boundary point of every input has
/// level at most `1 + level_tol` in `outer`. The verdict is cross-checked
/// against the S-procedure and [`CovError::CheckDisagreement`] is returned
/// when the two contradict each other.
pub fn check_containment_geometric(
    outer: &Estimate,
    inputs: &[Estimate],
    samples: usize,
    level_tol: f64,
    tol: &Tolerance,
) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(GEOMETRIC_SEED);
    let inflated = Estimate::new(outer.mean().clone(), outer.cov().scale(1.0 + level_tol))?;
    let mut all = true;
    for inner in inputs {
        check_same_dim(outer.dim(), inner.dim())?;
        let root = inner.cov().sqrt_psd()?;
        let mut worst: f64 = f64::NEG_INFINITY;
        for _ in 0..samples {
            let z = crate::sampling::unit_sphere_point(&mut rng, inner.dim());
            let x = inner.mean() + root.as_matrix() * z;
            worst = worst.max(outer.level(&x)?);
        }
        let sampled = worst <= 1.0 + level_tol;
        if sampled && !slemma_encloses(&inflated, inner, tol)?.0 {
            return Err(CovError::CheckDisagreement(format!(
                "samples stay inside (max level {worst}) but the S-procedure rejects containment"
            )));
        }
        if !sampled && slemma_encloses(outer, inner, tol)?.0 {
            return Err(CovError::CheckDisagreement(format!(
                "the S-procedure accepts containment but a sample reaches level {worst}"
            )));
        }
        all &= sampled;
    }
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossCheckConfig {
    pub union: UnionConfig,
    pub mee: MeeConfig,
    /// Largest accepted `|log det U_direct - log det U_mee|`.
    pub logdet_tol: f64,
    pub samples: usize,
    pub level_tol: f64,
}

impl Default for CrossCheckConfig {
    fn default() -> Self {
        Self {
            union: UnionConfig::default(),
            mee: MeeConfig::default(),
            logdet_tol: 1e-3,
            samples: 200,
            level_tol: 1e-6,
        }
    }
}

/// Outcome of solving one instance both ways.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub direct: UnionResult,
    pub mee: MeeResult,
    pub logdet_gap: f64,
    /// The direct answer encloses every input (S-procedure).
    pub direct_encloses: bool,
    /// The enclosing ellipsoid satisfies every weighted covariance inequality.
    pub mee_gcu_feasible: bool,
    pub mee_omegas: OmegaWeights,
    /// Sampled boundary points of the inputs lie inside both answers.
    pub containment: bool,
}

impl CrossCheck {
    pub fn passed(&self, logdet_tol: f64) -> bool {
        self.logdet_gap <= logdet_tol && self.direct_encloses && self.mee_gcu_feasible && self.containment
    }
}

/// Solves GCU directly and as an enclosing-ellipsoid problem and compares.
pub fn cross_check(estimates: &[Estimate], cfg: &CrossCheckConfig) -> Result<CrossCheck> {
    let direct = gcu_direct(estimates, &cfg.union)?;
    let mee = solve_mee(estimates, &cfg.mee)?;
    let tol = cfg.mee.tol;
    let mut direct_encloses = true;
    for e in estimates {
        direct_encloses &= slemma_encloses(&direct.estimate, e, &tol)?.0;
    }
    let (mee_gcu_feasible, mee_omegas) = gcu_feasible(&mee.estimate, estimates, &tol)?;
    let containment = check_containment_geometric(&direct.estimate, estimates, cfg.samples, cfg.level_tol, &tol)?
        && check_containment_geometric(&mee.estimate, estimates, cfg.samples, cfg.level_tol, &tol)?;
    Ok(CrossCheck {
        logdet_gap: (direct.objective - mee.objective).abs(),
        direct,
        mee,
        direct_encloses,
        mee_gcu_feasible,
        mee_omegas,
        containment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_instance, InstanceSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn assemble_round_trip() {
        let es = vec![
            Estimate::from_rows(&[1.0, 2.0], &[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap(),
            Estimate::from_rows(&[-3.0, 0.5], &[vec![1.0, -0.2], vec![-0.2, 0.5]]).unwrap(),
        ];
        let p = assemble(&es).unwrap();
        assert_abs_diff_eq!(p.shift(), &DVector::from_vec(vec![-1.0, 1.25]), epsilon = 1e-15);
        let back = p.disassemble().unwrap();
        for (a, b) in es.iter().zip(&back) {
            assert_abs_diff_eq!(a.mean(), b.mean(), epsilon = 1e-12);
            assert_abs_diff_eq!(a.cov().as_matrix(), b.cov().as_matrix(), epsilon = 1e-12);
        }
        assert_eq!(p.maxdet().num_vars, 3 + 2 + 2);
        assert_eq!(p.maxdet().lmis[0].dim(), 5);
    }

    #[test]
    fn interior_point_is_strictly_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=3 {
            let es = random_instance(&mut rng, n, 4, &InstanceSpec::default());
            let p = assemble(&es).unwrap();
            let x0 = find_interior(&p).unwrap();
            assert!(p.maxdet().strictly_feasible(&x0));
        }
    }

    #[test]
    fn concentric_disks() {
        let es = vec![
            Estimate::isotropic(&[0.0, 0.0], 1.0).unwrap(),
            Estimate::isotropic(&[0.0, 0.0], 4.0).unwrap(),
        ];
        // the nested shortcut answers directly
        let r = solve_mee(&es, &MeeConfig::default()).unwrap();
        assert_eq!(r.nested, Some(1));
        assert_eq!(r.estimate, es[1]);

        // the barrier solver reaches the same point
        let p = assemble(&es).unwrap();
        let x0 = find_interior(&p).unwrap();
        let report = maxdet::solve(p.maxdet(), &x0, &BarrierConfig::default()).unwrap();
        assert_eq!(report.status, SolverStatus::Optimal);
        let (w, v, tau) = p.unpack(&report.x);
        assert_abs_diff_eq!(w.as_matrix(), &(DMatrix::identity(2, 2) * 0.25), epsilon = 1e-7);
        assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(tau[1], 1.0, epsilon = 1e-6);

        // analytic duals: Z_2 = diag(4 I, 2, 0), Z_1 = 0
        let x_star = p.pack(&SymMatrix::identity(2).scale(0.25), &DVector::zeros(2), &[0.5, 1.0]);
        let z2 = SymMatrix::from_diagonal(&[4.0, 4.0, 2.0, 0.0, 0.0]);
        let mut lmi = vec![SymMatrix::zeros(5), z2];
        lmi.push(SymMatrix::zeros(1));
        lmi.push(SymMatrix::zeros(1));
        let exact = maxdet::Duals { lmi };
        assert!(maxdet::kkt_residual(p.maxdet(), &x_star, &exact).unwrap() < 1e-12);
        let mut off = exact.clone();
        off.lmi[1] = SymMatrix::from_diagonal(&[4.0, 4.0, 1.0, 0.0, 0.0]);
        assert!(maxdet::kkt_residual(p.maxdet(), &x_star, &off).unwrap() > 0.5);
        assert!(report.kkt <= 1e-8);
    }

    #[test]
    fn single_input_is_its_own_enclosure() {
        let e = Estimate::from_rows(&[1.0, -1.0, 2.0], &[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.1, 0.7]])
            .unwrap();
        let r = solve_mee(&[e.clone()], &MeeConfig::default()).unwrap();
        assert_eq!(r.estimate, e);
    }

    #[test]
    fn two_offset_disks() {
        let es = vec![
            Estimate::isotropic(&[-2.0, 0.0], 1.0).unwrap(),
            Estimate::isotropic(&[2.0, 0.0], 1.0).unwrap(),
        ];
        let r = solve_mee(&es, &MeeConfig::default()).unwrap();
        assert_abs_diff_eq!(r.estimate.mean().norm(), 0.0, epsilon = 1e-6);
        let c = r.estimate.cov();
        assert_abs_diff_eq!(c.get(0, 1), 0.0, epsilon = 1e-6);
        // axis-aligned ellipse x²/p + y²/q <= 1 must cover both disks; minimize p q
        let best = brute_axis_aligned(2.0);
        assert!((c.get(0, 0) * c.get(1, 1) - best).abs() <= 1e-4 * best, "{} vs {best}", c.get(0, 0) * c.get(1, 1));
        assert_eq!(r.active, vec![0, 1]);
    }

    /// min p q over axis-aligned ellipses centered at 0 covering unit disks at (±s, 0).
    fn brute_axis_aligned(s: f64) -> f64 {
        let covers = |p: f64, q: f64| {
            (0..2000).all(|k| {
                let th = std::f64::consts::TAU * k as f64 / 2000.0;
                let (x, y) = (s + th.cos(), th.sin());
                x * x / p + y * y / q <= 1.0 + 1e-12
            })
        };
        let mut best = f64::INFINITY;
        let mut p = (s + 1.0).powi(2);
        while p < 4.0 * (s + 1.0).powi(2) {
            let (mut lo, mut hi) = (0.5, 50.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if covers(p, mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            best = best.min(p * hi);
            p *= 1.002;
        }
        best
    }

    #[test]
    fn slemma_examples() {
        let small = Estimate::isotropic(&[0.0, 0.0], 1.0).unwrap();
        let big = Estimate::isotropic(&[0.0, 0.0], 4.0).unwrap();
        assert!(slemma_encloses(&big, &small, &tol()).unwrap().0);
        assert!(!slemma_encloses(&small, &big, &tol()).unwrap().0);
        let cu = Estimate::from_rows(&[2.0, 2.0], &[vec![5.0, 4.0], vec![4.0, 5.0]]).unwrap();
        let far = Estimate::isotropic(&[4.0, 4.0], 1.0).unwrap();
        assert!(!slemma_encloses(&cu, &far, &tol()).unwrap().0);
        let (ok, tau) = slemma_encloses(&small, &small, &tol()).unwrap();
        assert!(ok);
        assert_abs_diff_eq!(tau, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn equivalence_on_coincident_means_uses_the_limit() {
        let small = Estimate::isotropic(&[1.0, 1.0], 1.0).unwrap();
        let big = Estimate::isotropic(&[1.0, 1.0], 4.0).unwrap();
        let c = check_single_enclosure_equivalence(&big, &small, &tol()).unwrap();
        assert!(c.lhs && c.rhs);
        assert_eq!(c.omega, 1.0);
        let c = check_single_enclosure_equivalence(&small, &big, &tol()).unwrap();
        assert!(!c.lhs && !c.rhs);
    }

    #[test]
    fn predicate_equivalence_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1001);
        let spec = InstanceSpec { mean_radius: 2.0, ..InstanceSpec::default() };
        let mut both = [0usize; 2];
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.random_range(1..=3);
            let inner = crate::sampling::random_estimate(&mut rng, n, &spec);
            let outer = crate::sampling::random_estimate(&mut rng, n, &spec);
            let grow = rng.random_range(0.5..30.0);
            let outer = Estimate::new(outer.mean().clone(), outer.cov().scale(grow)).unwrap();
            // skip pairs within a relative 1e-4 of tangency
            let margin = boundary_margin(&outer, &inner);
            if margin.abs() < 1e-4 {
                continue;
            }
            let c = check_single_enclosure_equivalence(&outer, &inner, &tol()).unwrap();
            assert!(c.agrees(), "{c:?} margin {margin}");
            assert_eq!(c.rhs, margin < 0.0);
            both[c.rhs as usize] += 1;
            checked += 1;
        }
        assert!(both[0] > 50 && both[1] > 50, "{both:?}");
    }

    /// `max level - 1` of the inner boundary in the outer metric, by dense sampling.
    fn boundary_margin(outer: &Estimate, inner: &Estimate) -> f64 {
        let n = inner.dim();
        let root = inner.cov().sqrt_psd().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = f64::NEG_INFINITY;
        let count = [0, 2, 4000, 40000][n];
        for k in 0..count {
            let z = if n == 1 {
                DVector::from_vec(vec![if k == 0 { 1.0 } else { -1.0 }])
            } else {
                crate::sampling::unit_sphere_point(&mut rng, n)
            };
            worst = worst.max(outer.level(&(inner.mean() + root.as_matrix() * z)).unwrap());
        }
        worst - 1.0
    }

    #[test]
    fn geometric_check_flags_overlap() {
        let es = vec![
            Estimate::isotropic(&[0.0, 0.0], 1.0).unwrap(),
            Estimate::isotropic(&[4.0, 4.0], 1.0).unwrap(),
        ];
        let cu = Estimate::from_rows(&[2.0, 2.0], &[vec![5.0, 4.0], vec![4.0, 5.0]]).unwrap();
        assert!(!check_containment_geometric(&cu, &es, 200, 1e-6, &tol()).unwrap());
        let r = solve_mee(&es, &MeeConfig::default()).unwrap();
        assert!(check_containment_geometric(&r.estimate, &es, 200, 1e-6, &tol()).unwrap());
    }

    #[test]
    fn offset_disks_cross_check() {
        let es = vec![
            Estimate::isotropic(&[0.0, 0.0], 1.0).unwrap(),
            Estimate::isotropic(&[4.0, 4.0], 1.0).unwrap(),
        ];
        let cfg = CrossCheckConfig::default();
        let c = cross_check(&es, &cfg).unwrap();
        assert!(c.passed(cfg.logdet_tol), "{c:?}");
        // strictly larger than the CU answer
        assert!(c.mee.objective > (9.0f64).ln() + 1e-3);
    }

    #[test]
    fn shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let es = random_instance(&mut rng, 2, 3, &InstanceSpec::default());
        let shift = DVector::from_vec(vec![100.0, -50.0]);
        let moved: Vec<Estimate> = es.iter().map(|e| e.translate(&shift).unwrap()).collect();
        let a = solve_mee(&es, &MeeConfig::default()).unwrap();
        let b = solve_mee(&moved, &MeeConfig::default()).unwrap();
        assert_abs_diff_eq!(a.objective, b.objective, epsilon = 1e-7);
        assert_abs_diff_eq!(&(a.estimate.mean() + &shift), b.estimate.mean(), epsilon = 1e-6);
    }

    #[test]
    fn scale_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let n = 2;
        let es = random_instance(&mut rng, n, 3, &InstanceSpec::default());
        let s = 3.0;
        let scaled: Vec<Estimate> = es
            .iter()
            .map(|e| e.transform(&(DMatrix::identity(n, n) * s)).unwrap())
            .collect();
        let a = solve_mee(&es, &MeeConfig::default()).unwrap();
        let b = solve_mee(&scaled, &MeeConfig::default()).unwrap();
        assert_abs_diff_eq!(b.objective, a.objective + 2.0 * n as f64 * s.ln(), epsilon = 1e-8);
        assert_abs_diff_eq!(b.estimate.cov().as_matrix(), &(a.estimate.cov().as_matrix() * (s * s)), epsilon = 1e-6);
    }

    #[test]
    fn solver_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let es = random_instance(&mut rng, 3, 4, &InstanceSpec::default());
        let a = solve_mee(&es, &MeeConfig::default()).unwrap();
        let b = solve_mee(&es, &MeeConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn active_set_includes_extreme_inputs() {
        // a small disk in the middle of two far ones is inactive
        let es = vec![
            Estimate::isotropic(&[-5.0, 0.0], 1.0).unwrap(),
            Estimate::isotropic(&[0.0, 0.0], 0.1).unwrap(),
            Estimate::isotropic(&[5.0, 0.0], 1.0).unwrap(),
        ];
        let r = solve_mee(&es, &MeeConfig::default()).unwrap();
        assert_eq!(r.active, vec![0, 2]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn direct_and_enclosing_solutions_agree(seed in any::<u64>(), n in 1usize..=3, m in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let es = random_instance(&mut rng, n, m, &InstanceSpec::default());
            let cfg = CrossCheckConfig::default();
            let c = cross_check(&es, &cfg).unwrap();
            prop_assert!(c.passed(cfg.logdet_tol), "{:?}", c);
        }

        #[test]
        fn iterates_stay_feasible_and_objective_descends(seed in any::<u64>(), m in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let es = random_instance(&mut rng, 2, m, &InstanceSpec::default());
            let p = assemble(&es).unwrap();
            let x0 = find_interior(&p).unwrap();
            let cfg = BarrierConfig { record_trace: true, ..BarrierConfig::default() };
            let r = maxdet::solve(p.maxdet(), &x0, &cfg).unwrap();
            prop_assert!(p.maxdet().strictly_feasible(&r.x));
            for w in r.trace.windows(2) {
                prop_assert!(w[1].objective <= w[0].objective + 1e-9);
            }
        }
    }
}
