//! Analysis chain for double-directional THz channel measurements.
//!
//! Calibrated frequency sweeps over a grid of Tx/Rx azimuths are turned into
//! gated power delay profiles ([`sounding`]), condensed into per-link channel
//! parameters ([`metrics`]), fitted with distance-dependent and distributional
//! models ([`statfit`]), and summarized into a model table that drives a
//! stochastic channel-parameter generator ([`chanmodel`]). [`synthscene`]
//! renders multipath scenes through a horn-antenna model and computes the
//! same parameters analytically, which makes it an oracle for the pipeline.
//! [`io`] holds the file formats and the campaign orchestrator behind the
//! `thzchan` command-line tool.

pub mod chanmodel;
pub mod error;
pub mod io;
pub mod metrics;
pub mod sounding;
pub mod statfit;
pub mod synthscene;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
