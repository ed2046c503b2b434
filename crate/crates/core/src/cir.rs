//! Univariate square-root (CIR) diffusion
//!
//! ```text
//! dX = kappa (theta - X) dt + sigma sqrt(X) dW,   X_0 = x0
//! ```
//!
//! The transition law is a scaled noncentral chi-square; the stationary law
//! is Gamma with shape `nu = 2 kappa theta / sigma^2` and rate
//! `omega = nu / theta`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{ensure_domain, Error, Result};
use crate::special::{for_each_poisson_weight, gamma_p, ln_bessel_i, ln_gamma};

/// Poisson tail mass left out of the noncentral chi-square CDF sum.
pub const NCX2_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    kappa: f64,
    theta: f64,
    sigma: f64,
    x0: f64,
}

impl CirParams {
    pub fn new(kappa: f64, theta: f64, sigma: f64, x0: f64) -> Result<Self> {
        for (name, value) in [("kappa", kappa), ("theta", theta), ("sigma", sigma), ("x0", x0)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        let p = CirParams {
            kappa,
            theta,
            sigma,
            x0,
        };
        let (nu, omega) = p.derived_shape();
        if !(nu.is_finite() && nu > 0.0 && omega.is_finite() && omega > 0.0) {
            return Err(Error::NonPositiveParameter { name: "nu", value: nu });
        }
        Ok(p)
    }

    /// Builds parameters without validation. Used for limiting cases such as
    /// a deterministic factor (`sigma = 0`), which only the simulator and the
    /// bond-price formula accept.
    pub const fn new_unchecked(kappa: f64, theta: f64, sigma: f64, x0: f64) -> Self {
        CirParams {
            kappa,
            theta,
            sigma,
            x0,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Same dynamics started from a different level.
    pub fn with_x0(&self, x0: f64) -> Result<Self> {
        CirParams::new(self.kappa, self.theta, self.sigma, x0)
    }

    /// `(nu, omega)` of the stationary Gamma law.
    pub fn derived_shape(&self) -> (f64, f64) {
        let nu = 2.0 * self.kappa * self.theta / (self.sigma * self.sigma);
        (nu, nu / self.theta)
    }

    pub fn nu(&self) -> f64 {
        self.derived_shape().0
    }

    pub fn omega(&self) -> f64 {
        self.derived_shape().1
    }

    /// Gamma scale `1/omega = theta/nu`.
    pub fn gamma_scale(&self) -> f64 {
        self.theta / self.nu()
    }

    /// True iff the origin is reachable, i.e. `nu < 1`.
    pub fn feller_hits_origin(&self) -> bool {
        self.nu() < 1.0
    }

    pub fn stationary_moments(&self) -> StationaryMoments {
        let (nu, omega) = self.derived_shape();
        StationaryMoments {
            mean: nu / omega,
            variance: nu / (omega * omega),
        }
    }

    /// Stationary Gamma density `omega^nu x^(nu-1) e^(-omega x) / Gamma(nu)`.
    pub fn stationary_density(&self, x: f64) -> Result<f64> {
        ensure_domain(x >= 0.0, "x", "nonnegative", x)?;
        let (nu, omega) = self.derived_shape();
        gamma_density(nu, omega, x)
    }

    pub fn stationary_cdf(&self, x: f64) -> f64 {
        let (nu, omega) = self.derived_shape();
        gamma_p(nu, omega * x)
    }

    /// `E[X_t | X_0 = x_from]`.
    pub fn conditional_mean(&self, x_from: f64, t: f64) -> f64 {
        let decay = (-self.kappa * t).exp();
        x_from * decay + self.theta * (1.0 - decay)
    }

    /// `Var[X_t | X_0 = x_from]`.
    pub fn conditional_variance(&self, x_from: f64, t: f64) -> f64 {
        let decay = (-self.kappa * t).exp();
        let s2k = self.sigma * self.sigma / self.kappa;
        x_from * s2k * (decay - decay * decay) + 0.5 * self.theta * s2k * (1.0 - decay).powi(2)
    }

    /// Transition density `p_t(x0, x)` from the parameters' own `x0`.
    pub fn transition_density(&self, t: f64, x: f64) -> Result<f64> {
        transition_density_from(self, self.x0, t, x)
    }

    /// `P[X_t <= x | X_0 = x0]`.
    pub fn transition_cdf(&self, t: f64, x: f64) -> Result<f64> {
        transition_cdf_from(self, self.x0, t, x)
    }

    /// One draw of `X_{dt}` given `X_0 = x_from` from the exact transition law.
    pub fn sample_exact<R: Rng + ?Sized>(&self, x_from: f64, dt: f64, rng: &mut R) -> Result<f64> {
        ensure_domain(x_from >= 0.0, "x_from", "nonnegative", x_from)?;
        let tc = TransitionCoeffs::from_state(self, x_from, dt)?;
        Ok(tc.sample(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryMoments {
    pub mean: f64,
    pub variance: f64,
}

impl StationaryMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Constants of the transition law at a fixed horizon: `X_t = Y / (2c)` with
/// `Y ~ noncentral chi-square(2 nu, 2u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionCoeffs {
    pub c: f64,
    pub u: f64,
    pub nu: f64,
}

impl TransitionCoeffs {
    pub fn new(p: &CirParams, t: f64) -> Result<Self> {
        Self::from_state(p, p.x0, t)
    }

    pub fn from_state(p: &CirParams, x_from: f64, t: f64) -> Result<Self> {
        ensure_domain(t > 0.0, "t", "positive", t)?;
        // -expm1 keeps 1 - e^{-kappa t} accurate as kappa t -> 0
        let c = 2.0 * p.kappa / (p.sigma * p.sigma * -(-p.kappa * t).exp_m1());
        let u = c * x_from * (-p.kappa * t).exp();
        Ok(TransitionCoeffs { c, u, nu: p.nu() })
    }

    pub fn ln_density(&self, x: f64) -> Result<f64> {
        ensure_domain(x >= 0.0, "x", "nonnegative", x)?;
        let TransitionCoeffs { c, u, nu } = *self;
        let v = c * x;
        if v == 0.0 {
            return if nu > 1.0 {
                Ok(f64::NEG_INFINITY)
            } else if nu == 1.0 {
                Ok(c.ln() - u)
            } else {
                Err(Error::SingularBoundary { shape: nu })
            };
        }
        if u == 0.0 {
            // limit u -> 0: c * Gamma(nu, 1) density at v
            return Ok(c.ln() - v + (nu - 1.0) * v.ln() - ln_gamma(nu));
        }
        let order = nu - 1.0;
        let z = 2.0 * (u * v).sqrt();
        Ok(c.ln() - (u + v) + 0.5 * order * (v.ln() - u.ln()) + ln_bessel_i(order, z))
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(self.ln_density(x)?.exp())
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        ensure_domain(x >= 0.0, "x", "nonnegative", x)?;
        Ok(noncentral_chi_square_cdf(2.0 * self.c * x, 2.0 * self.nu, 2.0 * self.u))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = if self.u > 0.0 {
            Poisson::new(self.u).expect("finite positive mean").sample(rng)
        } else {
            0.0
        };
        let g = Gamma::new(self.nu + k, 1.0).expect("positive shape").sample(rng);
        g / self.c
    }
}

pub fn transition_density_from(p: &CirParams, x_from: f64, t: f64, x: f64) -> Result<f64> {
    TransitionCoeffs::from_state(p, x_from, t)?.density(x)
}

pub fn transition_cdf_from(p: &CirParams, x_from: f64, t: f64, x: f64) -> Result<f64> {
    TransitionCoeffs::from_state(p, x_from, t)?.cdf(x)
}

/// CDF of the noncentral chi-square law with `dof` degrees of freedom and
/// noncentrality `lambda`, as a Poisson(lambda/2) mixture of central
/// chi-square CDFs.
pub fn noncentral_chi_square_cdf(y: f64, dof: f64, lambda: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return 1.0;
    }
    let half_dof = 0.5 * dof;
    let half_y = 0.5 * y;
    let mut total = 0.0;
    for_each_poisson_weight(0.5 * lambda, NCX2_TAIL, |k, w| {
        total += w * gamma_p(half_dof + k as f64, half_y);
    });
    total.clamp(0.0, 1.0)
}

pub(crate) fn gamma_density(shape: f64, rate: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return if shape > 1.0 {
            Ok(0.0)
        } else if shape == 1.0 {
            Ok(rate)
        } else {
            Err(Error::SingularBoundary { shape })
        };
    }
    Ok((shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp())
}
