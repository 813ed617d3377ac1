//! Hardware-aware simulator for an LSTM network whose weights live as
//! differential conductance pairs on a passive RRAM crossbar, trained in situ
//! with sign-only (Manhattan) programming pulses.
//!
//! Modules, bottom-up:
//! - [`device`]: single-cell read and pulse-update model.
//! - [`crossbar`]: analog VMM, programming with an energy ledger, area arithmetic.
//! - [`network`]: LSTM + dense layer mapped onto the array.
//! - [`training`]: BPTT, momentum, pulse selection, digital baseline.
//! - [`data`]: airline-passenger series handling.
//! - [`experiment`]: configured end-to-end runs and report artifacts.

// Validation uses `!(x > 0.0)`-style checks on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod crossbar;
pub mod data;
pub mod device;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod network;
pub mod output;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use exec::Exec;
