//! Experiment harness for TCIC mitigation: run configuration, the bundled
//! synthetic testbed, experiment protocols and oracle self-checks.

pub mod config;
pub mod error;
pub mod experiment;
pub mod testbed;
pub mod verify;

pub use config::{FakeSeeds, GraphSource, Loaded, Method, RunConfig};
pub use error::{CliError, Result};
