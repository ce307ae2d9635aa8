//! Covariance fusion (Kalman, Covariance Intersection) and ellipsoid union
//! (Covariance Union, General Covariance Union) with a determinant-maximization
//! solver for the minimum enclosing ellipsoid.

pub mod error;
pub mod estimate;
pub mod fusion;
pub mod linalg;
pub mod maxdet;
pub mod mee;
pub mod optim;
pub mod sampling;
pub mod union;

pub use error::{CovError, Result};
pub use estimate::{assemble_joint, CrossBlock, EllipsoidTriple, Estimate, JointEstimate};
pub use fusion::{ci_fuse, covariance_addition, kalman_fuse, translate_correlated, translate_independent, CiConfig, FusionResult, OmegaWeights, SearchStatus, SizeCriterion};
pub use linalg::{SymMatrix, Tolerance};
pub use union::{cu_union, gcu_direct, gcu_feasible, matrix_union, pairwise_union, UnionConfig, UnionResult};
pub use mee::{cross_check, solve_mee, CrossCheck, CrossCheckConfig, MeeConfig, MeeResult};
