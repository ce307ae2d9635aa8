//! Dense symmetric linear algebra and the positive-semidefinite ordering.
//!
//! Every matrix symbol in the crate that is symmetric by definition
//! (covariances, ellipsoid shape matrices, LMI blocks) is carried as a
//! [`SymMatrix`], whose storage is exactly symmetric by construction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CovError, Result};

/// Condition number above which a matrix is refused rather than inverted.
pub const MAX_CONDITION: f64 = 1e12;

/// Tolerances shared by the PSD predicates, activity detection and the solvers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerance {
    /// Relative eigenvalue tolerance for PSD tests, scaled by `max(1, |trace|)`.
    pub psd_eig: f64,
    /// Slack below which a constraint counts as active.
    pub active_slack: f64,
    /// Stationarity residual accepted by the barrier solver.
    pub solver_kkt: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            psd_eig: 1e-9,
            active_slack: 1e-6,
            solver_kkt: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn validate(&self) -> Result<()> {
        let ok = self.psd_eig > 0.0
            && self.psd_eig < 1.0
            && self.active_slack > 0.0
            && self.solver_kkt > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CovError::InvalidInput(format!(
                "tolerances must be positive with psd_eig < 1: {self:?}"
            )))
        }
    }

    /// Absolute eigenvalue slack granted to `m` in a PSD test.
    pub fn psd_slack(&self, m: &SymMatrix) -> f64 {
        self.psd_eig * m.trace().abs().max(1.0)
    }
}

/// Dense real symmetric matrix, `dim >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes a square matrix as `(m + m^T) / 2`.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let t = m.transpose();
        Ok(Self((m + t) * 0.5))
    }

    /// Builds from the lower triangle of `m`; the strict upper triangle is ignored.
    pub fn from_lower(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        let n = m.nrows();
        Ok(Self(DMatrix::from_fn(n, n, |i, j| {
            if i >= j {
                m[(i, j)]
            } else {
                m[(j, i)]
            }
        })))
    }

    /// Accepts a full square matrix whose asymmetry is within `rel_tol` of its
    /// largest entry, then symmetrizes it.
    pub fn from_full(m: DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        check_square(&m)?;
        let scale = m.amax().max(1.0);
        let n = m.nrows();
        for i in 0..n {
            for j in 0..i {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if !(gap <= rel_tol * scale) {
                    return Err(CovError::InvalidInput(format!(
                        "matrix is not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Self::symmetrize(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(CovError::InvalidInput("matrix rows must form a square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_full(m, 1e-12)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// `x x^T`.
    pub fn rank_one(x: &DVector<f64>) -> Self {
        let n = x.len();
        Self(DMatrix::from_fn(n, n, |i, j| x[i] * x[j]))
    }

    /// `m^T S m` for an arbitrary (possibly rectangular) `m`.
    pub fn congruence(&self, m: &DMatrix<f64>) -> Self {
        let p = m.transpose() * &self.0 * m;
        Self::symmetrize(p).expect("congruence of a square matrix is square")
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(&self.0 * s)
    }

    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.0 * x))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<DVector<f64>> {
        ensure_finite(self)?;
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        Ok(DVector::from_vec(ev))
    }

    /// Eigen-decomposition with ascending eigenvalues and sign-normalized
    /// eigenvectors (largest-magnitude component positive).
    pub fn eigen(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        ensure_finite(self)?;
        let eig = SymmetricEigen::new(self.0.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
        let mut vectors = DMatrix::zeros(n, n);
        for (k, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            let lead = col.iamax();
            if col[lead] < 0.0 {
                col.neg_mut();
            }
            vectors.set_column(k, &col);
        }
        Ok((values, vectors))
    }

    pub fn min_eig(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn max_eig(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev[ev.len() - 1])
    }

    /// Fails unless the matrix is positive definite with condition number at
    /// most [`MAX_CONDITION`].
    pub fn check_pd(&self) -> Result<()> {
        let ev = self.eigenvalues()?;
        let lo = ev[0];
        let hi = ev[ev.len() - 1];
        if lo <= 0.0 {
            return Err(CovError::Singular { min_eig: lo });
        }
        let condition = hi / lo;
        if condition > MAX_CONDITION {
            return Err(CovError::Conditioning { condition });
        }
        Ok(())
    }

    /// Lower Cholesky factor of a positive definite matrix.
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        self.check_pd()?;
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or(CovError::Singular { min_eig: 0.0 })?;
        Ok(chol.l())
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        self.check_pd()?;
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or(CovError::Singular { min_eig: 0.0 })?;
        SymMatrix::symmetrize(chol.inverse())
    }

    /// Solves `S x = rhs` for positive definite `S`.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_pd()?;
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or(CovError::Singular { min_eig: 0.0 })?;
        Ok(chol.solve(rhs))
    }

    pub fn log_det(&self) -> Result<f64> {
        let l = self.cholesky_factor()?;
        Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// Principal square root of a PSD matrix (negative eigenvalues clamped).
    pub fn sqrt_psd(&self) -> Result<SymMatrix> {
        let (vals, vecs) = self.eigen()?;
        let d = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0).sqrt()));
        SymMatrix::symmetrize(&vecs * d * vecs.transpose())
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(CovError::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(CovError::InvalidInput("matrix dimension must be at least 1".into()));
    }
    Ok(())
}

fn ensure_finite(m: &SymMatrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(CovError::InvalidInput("matrix has non-finite entries".into()))
    }
}

pub fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CovError::DimensionMismatch { expected, found })
    }
}

/// Smallest eigenvalue of `m`.
pub fn min_eig(m: &SymMatrix) -> Result<f64> {
    m.min_eig()
}

/// `m ⪰ 0` up to `tol.psd_eig · max(1, |trace m|)`.
pub fn is_psd(m: &SymMatrix, tol: &Tolerance) -> Result<bool> {
    Ok(m.min_eig()? >= -tol.psd_slack(m))
}

/// `a ⪰ b` in the Loewner order.
pub fn psd_order(a: &SymMatrix, b: &SymMatrix, tol: &Tolerance) -> Result<bool> {
    check_same_dim(a.dim(), b.dim())?;
    is_psd(&a.sub(b), tol)
}

/// Finds an invertible `T` with `T A T^T = I` and `T B T^T = diag(d)`, `d >= 0`
/// ascending. `A` must be positive definite and `B` positive semidefinite.
pub fn simultaneous_diagonalize(
    a: &SymMatrix,
    b: &SymMatrix,
    tol: &Tolerance,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_same_dim(a.dim(), b.dim())?;
    if !is_psd(b, tol)? {
        return Err(CovError::InvalidInput(
            "second matrix must be positive semidefinite".into(),
        ));
    }
    let l = a.cholesky_factor()?;
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(CovError::Singular { min_eig: 0.0 })?;
    let c = b.congruence(&l_inv.transpose());
    let (d, q) = c.eigen()?;
    let t = q.transpose() * l_inv;
    Ok((t, d.map(|v| v.max(0.0))))
}

/// PSD test of the bordered matrix `[[top_left, off], [off^T, bottom_right]]`.
pub fn schur_expand_psd_check(
    top_left: &SymMatrix,
    off: &DVector<f64>,
    bottom_right: f64,
    tol: &Tolerance,
) -> Result<bool> {
    let n = top_left.dim();
    check_same_dim(n, off.len())?;
    is_psd(&bordered(top_left, off, bottom_right), tol)
}

/// Assembles `[[top_left, off], [off^T, corner]]`.
pub fn bordered(top_left: &SymMatrix, off: &DVector<f64>, corner: f64) -> SymMatrix {
    let n = top_left.dim();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(top_left.as_matrix());
    for i in 0..n {
        m[(i, n)] = off[i];
        m[(n, i)] = off[i];
    }
    m[(n, n)] = corner;
    SymMatrix(m)
}

/// Number of free scalars in an `n × n` symmetric matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index pairs `(i, j)`, `i >= j`, in the order used by [`svec`] and [`smat`].
pub fn svec_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            out.push((i, j));
        }
    }
    out
}

/// Flattens a symmetric matrix with off-diagonal entries scaled by √2, so the
/// Euclidean inner product of two flattenings equals the Frobenius product.
pub fn svec(m: &SymMatrix) -> Vec<f64> {
    svec_pairs(m.dim())
        .into_iter()
        .map(|(i, j)| {
            if i == j {
                m.get(i, i)
            } else {
                m.get(i, j) * std::f64::consts::SQRT_2
            }
        })
        .collect()
}

/// Inverse of [`svec`].
pub fn smat(x: &[f64], n: usize) -> SymMatrix {
    let mut m = DMatrix::zeros(n, n);
    for (k, (i, j)) in svec_pairs(n).into_iter().enumerate() {
        if i == j {
            m[(i, i)] = x[k];
        } else {
            let v = x[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix(m)
}

/// The symmetric basis matrices `E_k` with `smat(x) = Σ x_k E_k`.
pub fn svec_basis(n: usize) -> Vec<SymMatrix> {
    let len = svec_len(n);
    (0..len)
        .map(|k| {
            let mut x = vec![0.0; len];
            x[k] = 1.0;
            smat(&x, n)
        })
        .collect()
}

/// `tr(A B)` for symmetric `A`, `B` without forming the product.
pub fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn sym(rows: &[Vec<f64>]) -> SymMatrix {
        SymMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&SymMatrix::identity(2), &tol()).unwrap());
        assert!(!is_psd(&SymMatrix::from_diagonal(&[1.0, -1.0]), &tol()).unwrap());
        let cu = sym(&[vec![5.0, 4.0], vec![4.0, 5.0]]);
        let slack = cu
            .sub(&SymMatrix::identity(2))
            .sub(&sym(&[vec![4.0, 4.0], vec![4.0, 4.0]]));
        assert_eq!(slack, SymMatrix::zeros(2));
        assert!(is_psd(&slack, &tol()).unwrap());
    }

    #[test]
    fn non_finite_is_rejected() {
        let m = SymMatrix::from_diagonal(&[1.0, f64::NAN]);
        assert!(matches!(is_psd(&m, &tol()), Err(CovError::InvalidInput(_))));
        assert!(min_eig(&m).is_err());
    }

    #[test]
    fn order_examples() {
        let i = SymMatrix::identity(2);
        let two = i.scale(2.0);
        assert!(psd_order(&two, &i, &tol()).unwrap());
        assert!(!psd_order(&i, &two, &tol()).unwrap());
        let u = sym(&[vec![5.0, 4.0], vec![4.0, 5.0]]);
        let b = i.add(&SymMatrix::rank_one(&DVector::from_vec(vec![2.0, 2.0])));
        assert!(psd_order(&u, &b, &tol()).unwrap());
        assert!(matches!(
            psd_order(&i, &SymMatrix::identity(3), &tol()),
            Err(CovError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn min_eig_examples() {
        assert_abs_diff_eq!(min_eig(&SymMatrix::from_diagonal(&[3.0, 7.0])).unwrap(), 3.0);
        let swap = sym(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_abs_diff_eq!(min_eig(&swap).unwrap(), -1.0, epsilon = 1e-14);
    }

    /// Smallest real root of the characteristic cubic, by bracketing bisection.
    fn cubic_min_root(m: &DMatrix<f64>) -> f64 {
        let tr = m.trace();
        let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
            + m[(0, 0)] * m[(2, 2)]
            - m[(0, 2)] * m[(2, 0)]
            + m[(1, 1)] * m[(2, 2)]
            - m[(1, 2)] * m[(2, 1)];
        let det = m.determinant();
        // p(x) = x^3 - tr x^2 + minors x - det
        let p = |x: f64| ((x - tr) * x + minors) * x - det;
        let bound = 1.0 + m.iter().map(|v| v.abs()).sum::<f64>();
        // scan for the first sign change from below
        let steps = 20000;
        let h = 2.0 * bound / steps as f64;
        let mut lo = -bound;
        let mut hi = lo;
        for k in 1..=steps {
            hi = -bound + k as f64 * h;
            if p(lo) <= 0.0 && p(hi) >= 0.0 {
                break;
            }
            lo = hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn min_eig_matches_cubic_roots() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let raw = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-3.0..3.0));
            let s = SymMatrix::symmetrize(raw).unwrap();
            let oracle = cubic_min_root(s.as_matrix());
            assert_abs_diff_eq!(min_eig(&s).unwrap(), oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn simultaneous_diagonalize_examples() {
        let (t, d) = simultaneous_diagonalize(
            &SymMatrix::identity(2),
            &SymMatrix::from_diagonal(&[2.0, 3.0]),
            &tol(),
        )
        .unwrap();
        assert_abs_diff_eq!(t, DMatrix::identity(2, 2), epsilon = 1e-14);
        assert_abs_diff_eq!(d, DVector::from_vec(vec![2.0, 3.0]), epsilon = 1e-14);

        let (t, d) = simultaneous_diagonalize(
            &SymMatrix::identity(2).scale(4.0),
            &SymMatrix::identity(2),
            &tol(),
        )
        .unwrap();
        assert_abs_diff_eq!(t, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(d, DVector::from_vec(vec![0.25, 0.25]), epsilon = 1e-14);
    }

    #[test]
    fn simultaneous_diagonalize_rejects_singular() {
        let a = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let r = simultaneous_diagonalize(&a, &SymMatrix::identity(2), &tol());
        assert!(matches!(r, Err(CovError::Singular { .. })));
        let a = SymMatrix::from_diagonal(&[1.0, 1e-14]);
        let r = simultaneous_diagonalize(&a, &SymMatrix::identity(2), &tol());
        assert!(matches!(r, Err(CovError::Conditioning { .. })));
    }

    #[test]
    fn schur_examples() {
        let i = SymMatrix::identity(1);
        let zero = DVector::from_vec(vec![0.0]);
        assert!(schur_expand_psd_check(&i, &zero, 1.0, &tol()).unwrap());
        let two = DVector::from_vec(vec![2.0]);
        assert!(!schur_expand_psd_check(&i, &two, 1.0, &tol()).unwrap());

        // omega = 1/2, U = 4I, A = I, u = (1, 0)
        let omega = 0.5;
        let u_inv = SymMatrix::identity(2).scale(0.25);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let top = SymMatrix::identity(2).scale(omega).sub(&u_inv);
        let off = u_inv.as_matrix() * &u;
        let corner = 1.0 - omega - u_inv.quad_form(&u);
        let bordered_ok = schur_expand_psd_check(&top, &off, corner, &tol()).unwrap();
        let direct = SymMatrix::identity(2)
            .scale(4.0)
            .sub(&SymMatrix::identity(2).scale(1.0 / omega))
            .sub(&SymMatrix::rank_one(&u).scale(1.0 / (1.0 - omega)));
        assert!(bordered_ok);
        assert_eq!(bordered_ok, is_psd(&direct, &tol()).unwrap());
    }

    #[test]
    fn svec_round_trip_preserves_inner_product() {
        let a = sym(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 5.0], vec![3.0, 5.0, 6.0]]);
        let b = sym(&[vec![0.5, -1.0, 0.0], vec![-1.0, 2.0, 1.5], vec![0.0, 1.5, -3.0]]);
        assert_eq!(smat(&svec(&a), 3), a);
        let dot: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert_abs_diff_eq!(dot, trace_product(a.as_matrix(), b.as_matrix()), epsilon = 1e-12);
    }

    fn random_pd(n: usize, seed: u64, psd_only: bool) -> SymMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let cols = if psd_only { n.saturating_sub(1).max(1) } else { n };
        let g = g.columns(0, cols).into_owned();
        let base = SymMatrix::symmetrize(&g * g.transpose()).unwrap();
        if psd_only {
            base
        } else {
            base.add(&SymMatrix::identity(n).scale(0.1))
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn simultaneous_diagonalize_round_trip(n in 1usize..=6, seed in any::<u64>(), psd in any::<bool>()) {
            let a = random_pd(n, seed, false);
            let b = random_pd(n, seed.wrapping_add(1), psd);
            let (t, d) = simultaneous_diagonalize(&a, &b, &tol()).unwrap();
            let ta = &t * a.as_matrix() * t.transpose();
            let tb = &t * b.as_matrix() * t.transpose();
            prop_assert!((ta - DMatrix::identity(n, n)).norm() <= 1e-9);
            let off = tb.clone() - DMatrix::from_diagonal(&tb.diagonal());
            prop_assert!(off.amax() <= 1e-9);
            prop_assert!(d.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn schur_matches_assembled_eigen_check(n in 1usize..=4, seed in any::<u64>(), corner in -2.0f64..4.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let p = SymMatrix::symmetrize(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..2.0))).unwrap();
            let q = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let full = bordered(&p, &q, corner);
            let direct = full.min_eig().unwrap() >= -tol().psd_slack(&full);
            prop_assert_eq!(schur_expand_psd_check(&p, &q, corner, &tol()).unwrap(), direct);
        }

        #[test]
        fn psd_order_reflexive(n in 1usize..=5, seed in any::<u64>()) {
            let a = random_pd(n, seed, false);
            prop_assert!(psd_order(&a, &a, &tol()).unwrap());
            let t = SymMatrix::from_lower(&a.as_matrix().transpose()).unwrap();
            prop_assert_eq!(is_psd(&a, &tol()).unwrap(), is_psd(&t, &tol()).unwrap());
        }

        #[test]
        fn psd_order_antisymmetric(n in 1usize..=5, seed in any::<u64>(), eps in 0.0f64..1e-10) {
            let a = random_pd(n, seed, false);
            let b = a.add(&SymMatrix::identity(n).scale(eps));
            if psd_order(&a, &b, &tol()).unwrap() && psd_order(&b, &a, &tol()).unwrap() {
                let scale = tol().psd_slack(&a).max(tol().psd_slack(&b));
                prop_assert!(a.sub(&b).frobenius_norm() <= n as f64 * scale);
            }
        }
    }
}
