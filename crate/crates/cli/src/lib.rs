//! Library behind the `covfuse` command: scenario files, run records, the
//! fuse / union / deconflict pipelines, SVG plots and verification sweeps.

pub mod commands;
pub mod error;
pub mod plot;
pub mod record;
pub mod scenario;
pub mod verify;

pub use commands::{cmd_deconflict, cmd_fuse, cmd_union, FuseMethod, Input, UnionMethod};
pub use error::{exit, CliError, CliResult};
pub use record::{Branch, RunRecord};
pub use scenario::{random_scenario, Scenario, ScenarioConfig};
pub use verify::{Suite, VerifyOptions, VerifyReport};
