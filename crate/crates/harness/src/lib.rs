//! Command-line harness around the `lentropy` core: experiment configs,
//! dataset loading, run artifacts and reports.

pub mod config;
pub mod data;
pub mod error;
pub mod idx;
pub mod plot;
pub mod reference;
pub mod run;
pub mod spectrum;
pub mod suite;

pub use error::{HarnessError, Result};
