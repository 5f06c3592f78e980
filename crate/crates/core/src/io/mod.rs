//! Configuration, trace and report files, and the command implementations
//! behind the `reseng` binary.

mod commands;
mod config;
mod report;
mod trace;

pub use commands::*;
pub use config::{
    AnalysisConfig, DriveConfig, ExperimentConfig, FitConfig, NoiseConfig, OutputConfig, ProbeConfig, ProtocolSection,
    TargetConfig, TrapConfig,
};
pub use report::{Report, Table};
pub use trace::TraceFile;
