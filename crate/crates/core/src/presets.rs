//! Reference parameter sets fitted to the October 31, 2006 German (risk-free)
//! and Italian (risky) term structures.

use crate::adc::AdcParams;
use crate::cir::CirParams;

/// Independent two-factor model: risk-free factor `r` and spread factor `s`.
pub fn model1_2006() -> (CirParams, CirParams) {
    (
        CirParams::new(0.0398, 0.0544, 0.0455, 0.0346).expect("valid preset"),
        CirParams::new(4.0049, 0.0029, 0.0258, 0.0004).expect("valid preset"),
    )
}

/// Correlated model fitted jointly to both curves.
pub fn model2_2006() -> AdcParams {
    AdcParams::new(
        CirParams::new(0.0636, 0.0455, 0.0387, 0.0339).expect("valid preset"),
        CirParams::new(3.3345, 0.0026, 0.0423, 0.0019).expect("valid preset"),
        0.3859,
        0.2046,
        0.28,
    )
    .expect("valid preset")
}

/// Tabulated `nu` values: model 1 `r`, `s`, then model 2 `r`, `s`.
pub const TABLE_NU: [f64; 4] = [2.0857, 35.0593, 3.8728, 9.6116];

/// Tabulated `beta_r`, `beta_s` of model 2.
pub const TABLE_BETA: [f64; 2] = [258.0, 114.0];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_admissible() {
        let (r, s) = model1_2006();
        assert!(!r.feller_hits_origin());
        assert!(!s.feller_hits_origin());
        let m = model2_2006();
        assert!(!m.is_degenerate());
        assert!(!m.feller_multivariate());
    }
}
