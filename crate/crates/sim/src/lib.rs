//! Simulation harness: drives in-process BCA and resource servers over
//! HTTP with simulated biometric populations and reproduces the published
//! experiments.

pub mod config;
pub mod harness;
pub mod scenarios;

pub use config::HarnessConfig;
pub use harness::{Harness, SampleKind, SimUser, TxRecord};
pub use scenarios::{run_e2e, run_fig8, run_fpir_check, run_six_users, Segment};
