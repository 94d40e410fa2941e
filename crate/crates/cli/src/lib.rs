//! Command-line front end for the rescaled softmax regression solver:
//! reading and synthesizing instances, running exact or sketched Newton,
//! writing JSON traces and running certificate suites.

pub mod args;
pub mod error;
pub mod io;
pub mod run;
pub mod synth;
pub mod trace;

pub use error::CliError;
pub use run::{run, RunConfig, RunOutcome};
