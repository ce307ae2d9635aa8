//! Seeded random problem instances used by the verification sweeps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::estimate::Estimate;
use crate::linalg::SymMatrix;

/// Shape of a random instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    /// Means are drawn uniformly from the ball of this radius.
    pub mean_radius: f64,
    /// Largest allowed covariance condition number.
    pub max_condition: f64,
    /// Range of the smallest covariance eigenvalue.
    pub min_variance: (f64, f64),
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            mean_radius: 10.0,
            max_condition: 100.0,
            min_variance: (0.05, 2.0),
        }
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Uniform point on the unit sphere in `R^n`.
pub fn unit_sphere_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let g = standard_normal_vector(rng, n);
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// Uniform point in the ball of radius `r`.
pub fn ball_point<R: Rng + ?Sized>(rng: &mut R, n: usize, r: f64) -> DVector<f64> {
    let dir = unit_sphere_point(rng, n);
    let radius = r * rng.random::<f64>().powf(1.0 / n as f64);
    dir * radius
}

/// Haar-distributed orthogonal matrix via QR of a Gaussian matrix.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// Positive definite matrix with condition number at most `spec.max_condition`.
pub fn random_covariance<R: Rng + ?Sized>(rng: &mut R, n: usize, spec: &InstanceSpec) -> SymMatrix {
    let (lo, hi) = spec.min_variance;
    let base = lo * (hi / lo).powf(rng.random::<f64>());
    let log_cond = spec.max_condition.ln();
    let eig: Vec<f64> = (0..n)
        .map(|_| base * (log_cond * rng.random::<f64>()).exp())
        .collect();
    let q = random_rotation(rng, n);
    SymMatrix::from_diagonal(&eig).congruence(&q.transpose())
}

pub fn random_estimate<R: Rng + ?Sized>(rng: &mut R, n: usize, spec: &InstanceSpec) -> Estimate {
    let mean = ball_point(rng, n, spec.mean_radius);
    let cov = random_covariance(rng, n, spec);
    Estimate::new(mean, cov).expect("random covariance is positive definite")
}

pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    spec: &InstanceSpec,
) -> Vec<Estimate> {
    (0..m).map(|_| random_estimate(rng, n, spec)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn covariances_respect_condition_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = InstanceSpec::default();
        for n in 1..=4 {
            for _ in 0..200 {
                let c = random_covariance(&mut rng, n, &spec);
                let ev = c.eigenvalues().unwrap();
                assert!(ev[0] > 0.0);
                assert!(ev[n - 1] / ev[0] <= spec.max_condition * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_rotation(&mut rng, 4);
        assert!((q.transpose() * &q - DMatrix::identity(4, 4)).amax() < 1e-12);
    }
}
