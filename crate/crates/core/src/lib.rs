//! Monte Carlo laboratory for wide random feed-forward networks.
//!
//! The crate samples finite-width fully connected networks under the NTK
//! parametrization, implements centered Gaussian mixtures with a discrete
//! mixing measure (the limit law of an output as the last hidden layer grows),
//! and measures the distance of sampled outputs from a fitted Gaussian with a
//! unit-bandwidth kernel MMD.
//!
//! Modules:
//!
//! - [`rng`]: counter-based seed paths and per-trial random streams.
//! - [`distributions`]: weight/bias laws and activation functions.
//! - [`random_net`]: network sampling, forward traces, last-layer summands.
//! - [`gaussian_mixture`]: density, characteristic function, sampler, moments.
//! - [`mmd`]: closed-form and Monte Carlo squared MMD against `N(0, σ²)`.
//! - [`stats`]: sample sets and the estimators used by the experiments.
//! - [`experiments`]: deterministic sweeps that emit CSV rows.
//!
//! Every random quantity is a pure function of a [`rng::SeedPath`], so results
//! do not depend on how work is scheduled across threads.

pub mod config;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod gaussian_mixture;
pub mod mmd;
pub(crate) mod numeric;
pub mod random_net;
pub mod rng;
pub mod stats;

pub use distributions::{ActivationKind, DistSpec};
pub use error::{Error, Result};
pub use experiments::{Experiment, SweepConfig, SweepRow};
pub use gaussian_mixture::{MixingMeasure, MixtureMoments};
pub use mmd::{MmdOptions, MmdReport, MonteCarloMmd};
pub use random_net::{ForwardTrace, InputPolicy, Network, NetworkConfig};
pub use rng::{RngStream, SeedPath};
pub use stats::{Estimate, SampleSet, VarianceDivisor};
