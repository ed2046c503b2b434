//! Closed-form zero-coupon prices for CIR factors and the independent
//! two-factor model. Rates are continuously compounded throughout.

use serde::{Deserialize, Serialize};

use crate::cir::CirParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    /// Discounted at `r`.
    RiskFree,
    /// Discounted at `r + s`.
    Risky,
}

/// `d = sqrt(kappa^2 + 2 sigma^2)`, `phi = (d + kappa) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownDybvig {
    pub d: f64,
    pub phi: f64,
}

impl BrownDybvig {
    pub fn new(kappa: f64, sigma: f64) -> Self {
        let d = (kappa * kappa + 2.0 * sigma * sigma).sqrt();
        BrownDybvig {
            d,
            phi: 0.5 * (d + kappa),
        }
    }

    pub fn from_params(p: &CirParams) -> Self {
        Self::new(p.kappa(), p.sigma())
    }
}

/// `(ln f, g)` with `P = f e^{-g r}`.
///
/// With `E = e^{-d tau}` the coefficients are evaluated as
///
/// ```text
/// ln f = -2 kappa theta tau / (d + kappa) - nu ln(1 - sigma^2 (1 - E) / (d (d + kappa)))
/// g    = (1 - E) / (phi (1 - E) + d E)
/// ```
///
/// which is algebraically the usual closed form but free of cancellation
/// and overflow for any `d tau`.
pub fn bond_coefficients(p: &CirParams, tau: f64) -> (f64, f64) {
    if tau == 0.0 {
        return (0.0, 0.0);
    }
    let (kappa, theta, sigma) = (p.kappa(), p.theta(), p.sigma());
    if sigma == 0.0 {
        // deterministic limit
        let b = -(-kappa * tau).exp_m1() / kappa;
        return (-theta * (tau - b), b);
    }
    let BrownDybvig { d, phi } = BrownDybvig::new(kappa, sigma);
    let one_minus_e = -(-d * tau).exp_m1();
    let e = (-d * tau).exp();
    let s2 = sigma * sigma;
    let ln_f = -2.0 * kappa * theta * tau / (d + kappa) - p.nu() * (-s2 * one_minus_e / (d * (d + kappa))).ln_1p();
    let g = one_minus_e / (phi * one_minus_e + d * e);
    (ln_f, g)
}

/// CIR zero-coupon price for maturity `tau` from short rate `r_now`.
pub fn zcb_price_cir(p: &CirParams, r_now: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::Domain {
            what: "tau",
            expected: "nonnegative",
            value: tau,
        });
    }
    let (ln_f, g) = bond_coefficients(p, tau);
    Ok((ln_f - g * r_now).exp())
}

/// Independent two-factor prices: the risky bond is the product of the two
/// factor prices.
pub fn zcb_price_model1(pr: &CirParams, ps: &CirParams, r_now: f64, s_now: f64, tau: f64, leg: Leg) -> Result<f64> {
    let base = zcb_price_cir(pr, r_now, tau)?;
    match leg {
        Leg::RiskFree => Ok(base),
        Leg::Risky => Ok(base * zcb_price_cir(ps, s_now, tau)?),
    }
}

/// Continuously compounded zero rate of a price.
pub fn zero_rate(price: f64, tau: f64) -> Result<f64> {
    if !(price > 0.0 && price <= 1.0) {
        return Err(Error::Domain {
            what: "price",
            expected: "in (0, 1]",
            value: price,
        });
    }
    if !(tau > 0.0) {
        return Err(Error::Domain {
            what: "tau",
            expected: "positive",
            value: tau,
        });
    }
    Ok(-price.ln() / tau)
}

pub fn price_from_rate(rate: f64, tau: f64) -> f64 {
    (-rate * tau).exp()
}

/// Zero rate without the `price <= 1` guard, for model curves that may
/// legitimately price above par when rates are near zero.
pub(crate) fn implied_rate(price: f64, tau: f64) -> f64 {
    -price.ln() / tau
}

/// Model-implied zero curve `tau -> -ln P(tau) / tau` of one factor.
pub fn cir_zero_curve(p: &CirParams, r_now: f64, tenors: &[f64]) -> Result<Vec<f64>> {
    tenors.iter().map(|&t| Ok(implied_rate(zcb_price_cir(p, r_now, t)?, t))).collect()
}
