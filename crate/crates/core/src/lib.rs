//! Nonlinear multilevel minimization (NMM) with trust-region globalization.
//!
//! The solver minimizes a fine-level objective by recursing through a
//! hierarchy of cheaper coarse-level objectives. On each descent the coarse
//! objective is corrected so that it agrees with the finer model at the
//! current iterate, to zeroth and first order. Three corrections are
//! provided:
//!
//! * **additive** — the classical tau-correction (an affine offset),
//! * **multiplicative** — a linearized value-ratio factor,
//! * **hybrid** — a convex combination of the two, with weights chosen
//!   either as a fixed value, by matching a previously evaluated fine value
//!   (MFV), or by Bayesian reweighting from a residual history.
//!
//! The crate ships benchmark problem families (nested quadratics, a
//! discretized nonconvex functional, small ResNet classifiers on synthetic
//! 2-D datasets) and an experiment runner that emits per-cycle CSV reports.
//! The `nmm` binary drives it from the command line.

pub mod cli;
pub mod coarse_models;
pub mod error;
pub mod objective;
pub mod problems;
pub mod rmtr;
pub mod transfer;

pub use error::NmmError;
pub use objective::{fd_gradient, Objective, ObjectiveFn, ObjectiveHandle, WorkLedger};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, NmmError>;
