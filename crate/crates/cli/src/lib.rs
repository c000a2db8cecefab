//! Configuration, dispatch and report assembly behind the `resoforge` binary.

pub mod config;
pub mod run;

pub use config::{Command, NormalFormKind, Outputs, ParamBlock, ParamMode, PotentialSource, RunConfig, Tolerances};
pub use run::{run, Flag, Report, RunError, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK};
