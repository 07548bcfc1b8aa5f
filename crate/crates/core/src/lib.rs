//! Ruin-minimising investment for an insurer whose surplus follows a perturbed
//! compound Poisson process with a risky asset.

pub mod asymptotics;
pub mod claims;
pub mod error;
pub mod exp_ode;
pub mod mc;
pub mod model;
pub mod numerics;

pub use claims::ClaimDistribution;
pub use error::{Error, Result};
pub use model::{derive_constants, DerivedConstants, Investment, ModelParams, Regime};
pub use numerics::{Grid, SampledFn};
pub mod solver;
pub mod strategy;

pub use solver::{SolveControls, ValueGrid};
pub use strategy::{Extrapolation, StrategyCurve};
