//! Mean-and-covariance estimates, their `{A, b, c}` ellipsoid triples, joint
//! (stacked) estimates and the Mahalanobis conflict measure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::linalg::{check_same_dim, is_psd, SymMatrix, Tolerance};

/// A mean vector with a consistent (PSD) error covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EstimateJson", into = "EstimateJson")]
pub struct Estimate {
    mean: DVector<f64>,
    cov: SymMatrix,
}

/// Wire form: `{"mean": [..], "cov": [[..], ..]}` with the covariance in full
/// square form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateJson {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl TryFrom<EstimateJson> for Estimate {
    type Error = CovError;

    fn try_from(raw: EstimateJson) -> Result<Self> {
        Estimate::from_rows(&raw.mean, &raw.cov)
    }
}

impl From<Estimate> for EstimateJson {
    fn from(e: Estimate) -> Self {
        let n = e.dim();
        EstimateJson {
            mean: e.mean.iter().copied().collect(),
            cov: (0..n)
                .map(|i| (0..n).map(|j| e.cov.get(i, j)).collect())
                .collect(),
        }
    }
}

impl Estimate {
    pub fn new(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        check_same_dim(cov.dim(), mean.len())?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(CovError::InvalidInput("mean has non-finite entries".into()));
        }
        if !is_psd(&cov, &Tolerance::default())? {
            return Err(CovError::InvalidInput(
                "covariance is not positive semidefinite".into(),
            ));
        }
        Ok(Self { mean, cov })
    }

    pub fn from_rows(mean: &[f64], cov: &[Vec<f64>]) -> Result<Self> {
        let cov = SymMatrix::from_rows(cov)?;
        Self::new(DVector::from_column_slice(mean), cov)
    }

    /// Isotropic estimate `(mean, variance · I)`.
    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(
            DVector::from_column_slice(mean),
            SymMatrix::identity(n).scale(variance),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn translate(&self, shift: &DVector<f64>) -> Result<Estimate> {
        check_same_dim(self.dim(), shift.len())?;
        Ok(Estimate {
            mean: &self.mean + shift,
            cov: self.cov.clone(),
        })
    }

    /// Image under `x ↦ L x`: mean `L a`, covariance `L A L^T`.
    pub fn transform(&self, l: &DMatrix<f64>) -> Result<Estimate> {
        check_same_dim(self.dim(), l.ncols())?;
        check_same_dim(self.dim(), l.nrows())?;
        Ok(Estimate {
            mean: l * &self.mean,
            cov: self.cov.congruence(&l.transpose()),
        })
    }

    /// Ridge-regularized copy: `A + δ · trace(A)/n · I`.
    pub fn regularized(&self, delta: f64) -> Estimate {
        let n = self.dim() as f64;
        let ridge = delta * (self.cov.trace() / n).max(f64::MIN_POSITIVE);
        Estimate {
            mean: self.mean.clone(),
            cov: self.cov.add(&SymMatrix::identity(self.dim()).scale(ridge)),
        }
    }

    /// Squared normalized distance `(x - a)^T A^{-1} (x - a)` of a point.
    pub fn level(&self, x: &DVector<f64>) -> Result<f64> {
        let d = x - &self.mean;
        Ok(d.dot(&self.cov.solve(&d)?))
    }
}

/// Quadratic-form ellipsoid `{x : x^T A x + 2 x^T b + c <= 0}`, stored
/// normalized so that `b^T A^{-1} b - c = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidTriple {
    a: SymMatrix,
    b: DVector<f64>,
    c: f64,
}

impl EllipsoidTriple {
    /// Validates `A ≻ 0` and `b^T A^{-1} b - c > 0`, then divides the triple
    /// by that level to remove the homogeneous scale.
    pub fn new(a: SymMatrix, b: DVector<f64>, c: f64) -> Result<Self> {
        check_same_dim(a.dim(), b.len())?;
        let level = b.dot(&a.solve(&b)?) - c;
        if !(level > 0.0) || !level.is_finite() {
            return Err(CovError::DegenerateTriple { level });
        }
        Ok(Self {
            a: a.scale(1.0 / level),
            b: b / level,
            c: c / level,
        })
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Value of the quadratic form at `x` (≤ 0 inside).
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.a.quad_form(x) + 2.0 * x.dot(&self.b) + self.c
    }

    /// The `(n+1) × (n+1)` matrix `[[A, b], [b^T, c]]`.
    pub fn homogeneous(&self) -> SymMatrix {
        crate::linalg::bordered(&self.a, &self.b, self.c)
    }
}

/// `{A = U^{-1}, b = -U^{-1} u, c = u^T U^{-1} u - 1}`.
pub fn to_triple(e: &Estimate) -> Result<EllipsoidTriple> {
    let w = e.cov.inverse()?;
    let b = -(w.as_matrix() * &e.mean);
    let c = w.quad_form(&e.mean) - 1.0;
    EllipsoidTriple::new(w, b, c)
}

/// Inverse of [`to_triple`]: `U = A^{-1}`, `u = -U b`.
pub fn from_triple(t: &EllipsoidTriple) -> Result<Estimate> {
    let cov = t.a.inverse()?;
    let mean = -(cov.as_matrix() * &t.b);
    Estimate::new(mean, cov)
}

/// `(a - b)^T (A + B)^{-1} (a - b)`.
pub fn mahalanobis(a: &Estimate, b: &Estimate) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    let sum = a.cov.add(&b.cov);
    let d = &a.mean - &b.mean;
    Ok(d.dot(&sum.solve(&d)?).max(0.0))
}

/// A cross-covariance block `X_{ij} = E[ã_i ã_j^T]`, `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossBlock {
    pub i: usize,
    pub j: usize,
    pub block: DMatrix<f64>,
}

/// Stacked estimate of several quantities with optional cross-covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    pub block_means: Vec<DVector<f64>>,
    pub block_covs: Vec<SymMatrix>,
    pub cross: Option<Vec<CrossBlock>>,
}

impl JointEstimate {
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.block_covs.len() + 1);
        let mut acc = 0;
        off.push(0);
        for c in &self.block_covs {
            acc += c.dim();
            off.push(acc);
        }
        off
    }

    pub fn mean(&self) -> DVector<f64> {
        let parts: Vec<f64> = self
            .block_means
            .iter()
            .flat_map(|m| m.iter().copied())
            .collect();
        DVector::from_vec(parts)
    }

    /// Full joint covariance; block diagonal when no cross blocks are given.
    pub fn covariance(&self) -> SymMatrix {
        let off = self.offsets();
        let total = off[off.len() - 1];
        let mut m = DMatrix::zeros(total, total);
        for (k, c) in self.block_covs.iter().enumerate() {
            m.view_mut((off[k], off[k]), (c.dim(), c.dim()))
                .copy_from(c.as_matrix());
        }
        for x in self.cross.iter().flatten() {
            let (ri, rj) = (off[x.i], off[x.j]);
            let (ni, nj) = (x.block.nrows(), x.block.ncols());
            m.view_mut((ri, rj), (ni, nj)).copy_from(&x.block);
            m.view_mut((rj, ri), (nj, ni)).copy_from(&x.block.transpose());
        }
        SymMatrix::from_lower(&m).expect("joint covariance is square")
    }
}

/// Stacks estimates into a joint estimate, validating that any supplied cross
/// blocks keep the joint covariance PSD.
pub fn assemble_joint(
    estimates: &[Estimate],
    cross: Option<Vec<CrossBlock>>,
    tol: &Tolerance,
) -> Result<JointEstimate> {
    if estimates.is_empty() {
        return Err(CovError::InvalidInput("at least one estimate is required".into()));
    }
    if let Some(blocks) = &cross {
        for x in blocks {
            if x.i >= x.j || x.j >= estimates.len() {
                return Err(CovError::InvalidInput(format!(
                    "cross block index ({}, {}) must satisfy i < j < {}",
                    x.i,
                    x.j,
                    estimates.len()
                )));
            }
            check_same_dim(estimates[x.i].dim(), x.block.nrows())?;
            check_same_dim(estimates[x.j].dim(), x.block.ncols())?;
            if x.block.iter().any(|v| !v.is_finite()) {
                return Err(CovError::InvalidInput("cross block has non-finite entries".into()));
            }
        }
    }
    let joint = JointEstimate {
        block_means: estimates.iter().map(|e| e.mean.clone()).collect(),
        block_covs: estimates.iter().map(|e| e.cov.clone()).collect(),
        cross,
    };
    if joint.cross.is_some() {
        let full = joint.covariance();
        if !is_psd(&full, tol)? {
            return Err(CovError::InconsistentJoint {
                min_eig: full.min_eig()?,
            });
        }
    }
    Ok(joint)
}
