//! Scenario files, the experiment pipeline and parameter sweeps behind the
//! `pme` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN.

pub mod config;
pub mod pipeline;
pub mod sweep;

pub use config::Scenario;
pub use pipeline::{run, RunOutcome, Stage};
pub use sweep::{sweep, SweepRow};
