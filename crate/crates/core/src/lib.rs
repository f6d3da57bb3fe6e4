//! Simulation and analysis toolkit for the purification/distillation of
//! phase-diffused squeezed states.
//!
//! Two copies of a single-mode squeezed state pass through independent
//! phase-diffusion channels and interfere on a balanced beam splitter. A
//! homodyne measurement of a quadrature `q1(theta)` on one output heralds
//! the state in the other output: the state is kept whenever `|q1| < Q`.
//! This crate provides
//!
//! * the covariance algebra of the optical layout ([`covariance`]),
//! * models of the phase-diffusion channel ([`phase_noise`]),
//! * closed-form predictions for the distilled variance, the success
//!   probability and the trigger POVM, evaluated by Gauss-Hermite
//!   quadrature ([`analytics`]),
//! * an independent Monte Carlo simulator of the protocol, including the
//!   multi-trigger channel-probing variant ([`montecarlo`]),
//! * and file I/O plus offline conditioning for recorded two-detector
//!   quadrature time series ([`timeseries`]).
//!
//! All quadrature variances are expressed in shot-noise units: the vacuum
//! state has `V_x = V_p = 1`.

// Validators are written as `!(x > 0.0)` on purpose: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod covariance;
pub mod montecarlo;
pub mod phase_noise;
pub mod quadrature;
mod rng;
pub mod special;
pub mod timeseries;

pub use analytics::{AnalyticResult, AnalyticsError, ProtocolParams, QuadratureSettings};
pub use covariance::{
    ConditionalMoments, CovarianceError, ModeCovariance, SqueezedModeParams, TwoModeCovariance,
};
pub use montecarlo::{
    DistillationEstimate, MonteCarloError, PhaseModel, SimulationConfig, TriggerMode,
};
pub use phase_noise::{PhaseDistribution, PhaseNoiseError, PhaseProcessConfig};
pub use quadrature::{QuadratureError, QuadratureRule};
pub use timeseries::{QuadratureRecord, SeriesMetadata, TimeSeriesError};
