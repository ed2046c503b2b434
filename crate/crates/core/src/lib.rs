//! Square-root short-rate and credit-spread models.
//!
//! * [`cir`]: the univariate CIR diffusion, its noncentral chi-square
//!   transition law, Gamma stationary law and exact sampler.
//! * [`adc`]: a correlated bivariate square-root process whose invariant law
//!   is the product of the two factor Gamma laws.
//! * [`mc`]: Euler simulation, Monte Carlo bond pricing, origin hitting.
//! * [`pricing`]: closed-form CIR bond prices.
//! * [`curve`]: quotes, natural cubic splines, swap bootstrap, spreads.
//! * [`calibrate`]: two-step and simulated-annealing calibration.

pub mod adc;
pub mod calibrate;
pub mod cir;
pub mod curve;
pub mod error;
pub mod fixtures;
pub mod mc;
pub mod presets;
pub mod pricing;
pub mod quadrature;
pub mod special;
pub mod stats;
pub mod verify;

pub use adc::{AdcParams, StateVector};
pub use cir::CirParams;
pub use error::{Error, Result};
