//! Reconstruction and comparison of transportation-event distance
//! distributions from location-censored records.
//!
//! Location records are often released only at the granularity of an
//! administrative region (a *locale*). For a trip between two locales the
//! true distance is unknown, but it is bracketed by the minimum and maximum
//! distance between the locale boundaries. This crate treats those brackets
//! as interval-censored observations and provides:
//!
//! - [`geometry`] — locales, distance metrics, and censored-event intervals;
//! - [`survival`] — the Turnbull nonparametric estimator of the distance
//!   distribution with exponential-Greenwood confidence bands;
//! - [`sampling`] — inverse-transform sampling from a fitted curve with
//!   Gaussian estimation-uncertainty perturbation;
//! - [`stats`] — a seeded Monte Carlo U-test for stochastic dominance,
//!   Fisher p-value combination, KS and MMD distances, and calibration
//!   utilities;
//! - [`simulation`] — a synthetic grid world for validating the pipeline;
//! - [`io`] — the CSV/GeoJSON/JSON file formats shared with the `censdist`
//!   command-line tool.
//!
//! The `examples/` directory contains one runnable program per capability;
//! start with `cargo run --example estimate_curve`.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod sampling;
pub mod simulation;
pub mod stats;
pub mod survival;

mod special;

pub use error::{Error, Result};
