//! Additively preconditioned trust-region optimization.
//!
//! The crate trains small multilayer perceptrons and minimizes deterministic
//! test functions by splitting the parameter vector across non-overlapping
//! subdomains, solving a first-order-consistent restriction of the objective
//! in each subdomain in parallel, and recombining the local steps into one
//! global trial step that a classical trust-region acceptance test either
//! takes or rejects.
//!
//! Two drivers are provided:
//!
//! * [`apts::AptsDriver`] — the exact strategy: every local solve evaluates
//!   the true (restricted and corrected) objective.
//! * [`iapts::IaptsDriver`] — the inexact strategy for MLPs: one global
//!   forward/backward pass per outer iteration feeds cached activations and
//!   downstream gradients to layer-block subdomains, whose local steps are
//!   unconditional clipped-Adam updates.
//!
//! Everything is deterministic for a fixed seed: parallel recombination uses
//! a fixed reduction order and all randomness flows through seeded ChaCha
//! generators.

pub mod apts;
pub mod cadam;
pub mod data;
pub mod decomp;
pub mod error;
pub mod iapts;
pub mod local;
pub mod matrix;
pub mod net;
pub mod objective;
pub mod trust_region;
pub mod vector;

pub use error::{Error, Result};
pub use vector::{Norm, ParamVector};
