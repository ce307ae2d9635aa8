//! Seeded randomized checks of the library's central claims.

use std::time::Instant;

use clap::ValueEnum;
use covfuse_core::fusion::{ci_joint_bound_check, BoundCheck};
use covfuse_core::mee::{check_single_enclosure_equivalence, cross_check, CrossCheckConfig};
use covfuse_core::sampling::{random_estimate, random_instance, unit_sphere_point, InstanceSpec};
use covfuse_core::{ci_fuse, CiConfig, Estimate, Tolerance};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Direct GCU against the enclosing-ellipsoid solution.
    Equivalence,
    /// The ω-inflated block-diagonal joint bounds sampled true joints.
    CiBounds,
    /// The weighted covariance inequality holds iff the S-procedure certifies containment.
    SingleEnclosure,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Equivalence => "equivalence",
            Suite::CiBounds => "ci-bounds",
            Suite::SingleEnclosure => "single-enclosure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub index: usize,
    pub dim: usize,
    pub inputs: usize,
    pub passed: bool,
    /// Suite-specific measurement: the log-det gap, the number of sampled
    /// joints, or the boundary margin.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
    /// Near-tangent pairs drawn and discarded (single-enclosure only).
    pub skipped: usize,
    /// Largest log-det gap (equivalence only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_logdet_gap: Option<f64>,
    /// Largest S-procedure multiplier (equivalence only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Case>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Case>>,
    pub wall_time_ms: f64,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub count: usize,
    pub seed: u64,
    pub trace: bool,
    pub tol: Tolerance,
}

/// Spread of means used by the equivalence sweep, kept moderate so that
/// instances mix overlapping and separated inputs.
const MEAN_RADIUS: f64 = 3.0;

/// Pairs whose sampled boundary margin is within this of tangency are skipped.
const TANGENCY_MARGIN: f64 = 1e-4;

/// Cross-covariances sampled per instance by the CI bound check.
pub const CI_CROSS_SAMPLES: usize = 50;

pub fn run(suite: Suite, opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cases = Vec::with_capacity(opts.count);
    let mut skipped = 0;
    let mut max_gap: f64 = 0.0;
    let mut max_tau: f64 = 0.0;
    while cases.len() < opts.count {
        let index = cases.len();
        let case = match suite {
            Suite::Equivalence => {
                let n = rng.random_range(2..=3);
                let m = rng.random_range(2..=5);
                let spec = InstanceSpec { mean_radius: MEAN_RADIUS, ..InstanceSpec::default() };
                let es = random_instance(&mut rng, n, m, &spec);
                let cfg = CrossCheckConfig {
                    union: covfuse_core::UnionConfig { tol: opts.tol, ..Default::default() },
                    mee: covfuse_core::MeeConfig { tol: opts.tol, ..Default::default() },
                    ..CrossCheckConfig::default()
                };
                match cross_check(&es, &cfg) {
                    Ok(c) => {
                        max_gap = max_gap.max(c.logdet_gap);
                        max_tau = c.mee.tau.iter().copied().fold(max_tau, f64::max);
                        let tau_ok = c.mee.tau.iter().all(|t| *t <= 1.0 + 1e-8);
                        Case {
                            index,
                            dim: n,
                            inputs: m,
                            passed: c.passed(cfg.logdet_tol) && tau_ok,
                            value: c.logdet_gap,
                            note: (!c.passed(cfg.logdet_tol)).then(|| {
                                format!(
                                    "direct encloses {}, enclosing ellipsoid GCU-feasible {}, containment {}",
                                    c.direct_encloses, c.mee_gcu_feasible, c.containment
                                )
                            }),
                        }
                    }
                    Err(e) => Case { index, dim: n, inputs: m, passed: false, value: f64::NAN, note: Some(e.to_string()) },
                }
            }
            Suite::CiBounds => {
                let n = rng.random_range(1..=3);
                let es = random_instance(&mut rng, n, 2, &InstanceSpec::default());
                let check_seed: u64 = rng.random();
                let outcome = ci_fuse(&es, &CiConfig::default()).and_then(|r| {
                    let w = r.weights.expect("CI reports weights");
                    ci_joint_bound_check(&es, &w, CI_CROSS_SAMPLES, check_seed, &opts.tol)
                });
                let (passed, note) = match outcome {
                    Ok(BoundCheck::Holds) => (true, None),
                    Ok(other) => (false, Some(format!("{other:?}"))),
                    Err(e) => (false, Some(e.to_string())),
                };
                Case { index, dim: n, inputs: 2, passed, value: CI_CROSS_SAMPLES as f64, note }
            }
            Suite::SingleEnclosure => {
                let n = rng.random_range(1..=3);
                let spec = InstanceSpec { mean_radius: 2.0, ..InstanceSpec::default() };
                let inner = random_estimate(&mut rng, n, &spec);
                let outer = random_estimate(&mut rng, n, &spec);
                let grow = rng.random_range(0.5..30.0);
                let outer = Estimate::new(outer.mean().clone(), outer.cov().scale(grow))?;
                let margin = boundary_margin(&outer, &inner)?;
                if margin.abs() < TANGENCY_MARGIN {
                    skipped += 1;
                    continue;
                }
                let (passed, note) = match check_single_enclosure_equivalence(&outer, &inner, &opts.tol) {
                    Ok(c) => (c.agrees() && c.rhs == (margin < 0.0), (!c.agrees()).then(|| format!("{c:?}"))),
                    Err(e) => (false, Some(e.to_string())),
                };
                Case { index, dim: n, inputs: 2, passed, value: margin, note }
            }
        };
        cases.push(case);
    }
    let failures: Vec<Case> = cases.iter().filter(|c| !c.passed).cloned().collect();
    let equivalence = suite == Suite::Equivalence;
    Ok(VerifyReport {
        suite,
        seed: opts.seed,
        checked: cases.len(),
        passed: cases.len() - failures.len(),
        failed: failures.len(),
        skipped,
        max_logdet_gap: equivalence.then_some(max_gap),
        max_tau: equivalence.then_some(max_tau),
        failures,
        trace: opts.trace.then_some(cases),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// `max level - 1` of the inner boundary in the outer metric: the best of a
/// fixed set of sampled boundary points, refined by projected gradient
/// ascent on the sphere.
pub fn boundary_margin(outer: &Estimate, inner: &Estimate) -> CliResult<f64> {
    let n = inner.dim();
    let root = inner.cov().sqrt_psd()?;
    let root = root.as_matrix();
    let level = |z: &DVector<f64>| outer.level(&(inner.mean() + root * z));
    if n == 1 {
        let up = level(&DVector::from_vec(vec![1.0]))?;
        let down = level(&DVector::from_vec(vec![-1.0]))?;
        return Ok(up.max(down) - 1.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_7267_696e);
    let mut best = unit_sphere_point(&mut rng, n);
    let mut best_level = level(&best)?;
    for _ in 0..400 {
        let z = unit_sphere_point(&mut rng, n);
        let v = level(&z)?;
        if v > best_level {
            best = z;
            best_level = v;
        }
    }
    // gradient of the level in z: 2 R^T U^{-1} (a + R z - u)
    let u_inv = outer.cov().inverse()?;
    let mut step = 0.1;
    for _ in 0..500 {
        let x = inner.mean() + root * &best - outer.mean();
        let g = root.transpose() * (u_inv.as_matrix() * x) * 2.0;
        let tangent = &g - &best * g.dot(&best);
        if tangent.norm() < 1e-14 {
            break;
        }
        let trial = (&best + tangent * step).normalize();
        let v = level(&trial)?;
        if v > best_level {
            best = trial;
            best_level = v;
            step *= 1.5;
        } else {
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
        }
    }
    Ok(best_level - 1.0)
}
