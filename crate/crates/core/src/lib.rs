//! Probe response of a spinning optomechanical ring resonator with a weakly
//! coupled two-level emitter.
//!
//! The pipeline is parameters -> derived rates -> mean-field steady state ->
//! linear sideband response -> transmission, reflection, isolation and group
//! delay. A time-domain integration of the mean-field equations checks the
//! linear response independently.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`, which is what the
//! command-line tool uses.

// `!(x > 0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fluctuations;
pub mod linalg;
pub mod num;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod presets;
pub mod sagnac;
pub mod spectra;
pub mod steady_state;

pub use error::{Error, Result};
pub use num::{Cplx, Real};
pub use params::JMode;
pub use sagnac::SagnacSplit;
pub use spectra::{DeltaPConvention, IsolationNorm};

pub type PhysicalParams = params::PhysicalParams<f64>;
pub type DerivedRates = params::DerivedRates<f64>;
pub type SteadyState = steady_state::SteadyState<f64>;
pub type FixedPointOptions = steady_state::FixedPointOptions<f64>;
pub type Fluctuations = fluctuations::Fluctuations<f64>;
pub type SidebandSystem = fluctuations::SidebandSystem<f64>;
pub type SpectrumPoint = spectra::SpectrumPoint<f64>;
pub type SweepGrid = spectra::SweepGrid<f64>;
pub type SpectrumOptions = spectra::SpectrumOptions<f64>;
pub type OperatingPoint = spectra::OperatingPoint<f64>;
pub type OmitMetrics = spectra::OmitMetrics<f64>;
pub type OracleOptions = oracle::OracleOptions<f64>;
pub type Trajectory = oracle::Trajectory<f64>;
