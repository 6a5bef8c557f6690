//! Desk-scale laboratory for the level statistics of
//! `H = −d²/dt² + a(t) F(X_t)` with a decaying random potential.
//!
//! Eigenvalues of the Dirichlet problem on `[0, L]` are read off the
//! Prüfer phase along one frozen noise path; the limit objects (clock
//! process, Gaussian spacing fluctuations, the critical SDE and the
//! circular β-ensemble) are simulated alongside for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod functional;
pub mod limits;
pub mod model;
pub mod pruefer;
pub mod quadrature;
pub mod seed;
pub mod spectrum;
pub mod stats;

pub use error::{Error, LimitsError, ModelError, PrueferError, SpectrumError, StatsError};
pub use model::{DecayProfile, FourierSeries, PotentialModel, SpectralConstants};
pub use pruefer::{DrivingSignal, NoisePath, PhaseTrajectory};
pub use functional::TestFunction;
pub use spectrum::{EigenWindow, PointProcessSample};
