//! Batch orchestration for the bridge toolkit: configuration parsing,
//! experiment execution and report emission.

pub mod config;
pub mod plot;
pub mod run;

pub use config::{build_bridge_spec, resolve, ExperimentConfig, ResolvedConfig};
pub use plot::{emit_plotdata, PlotKind, RunOutputs};
pub use run::{run_command, Command, Overrides};
