//! Local-entropy optimization.
//!
//! Entropy-SGD replaces the training loss `f` by the negative local entropy
//! `−F(x, γ) = −log ∫ exp(−f(x′) − γ/2 ‖x − x′‖²) dx′`, whose gradient
//! `γ (x − ⟨x′⟩)` is estimated by a short Langevin loop. The crate provides
//! the objectives (quadratics, 1D landscapes, MLP classifiers), the samplers
//! and optimizers, reference quadratures and closed forms, and spectrum and
//! smoothness instruments. It is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod analysis;
mod error;
pub mod net;
pub mod objective;
pub mod optimize;
pub mod oracle;
mod param;
pub mod rng;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};
pub use param::{distance, dot, max_abs, norm, ParamVector};
