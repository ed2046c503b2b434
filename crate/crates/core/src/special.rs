//! Special functions: modified Bessel function of the first kind for real
//! order, Poisson weights, and regularized incomplete gamma wrappers.

use statrs::function::gamma;

/// Arguments at or below this value always use the power series.
pub const BESSEL_SERIES_LIMIT: f64 = 30.0;

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma::gamma_ur(a, x)
}

/// Which expansion produced a Bessel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselBranch {
    Series,
    Asymptotic,
}

/// Picks the expansion for `I_order(x)`.
///
/// The large-argument expansion is only used once its terms start
/// decreasing immediately, i.e. when `x` dominates `order^2`.
pub fn bessel_branch(order: f64, x: f64) -> BesselBranch {
    if x <= BESSEL_SERIES_LIMIT || 8.0 * x < 4.0 * order * order {
        BesselBranch::Series
    } else {
        BesselBranch::Asymptotic
    }
}

/// `ln I_order(x)` for `order > -1`, `x >= 0`.
pub fn ln_bessel_i(order: f64, x: f64) -> f64 {
    match bessel_branch(order, x) {
        BesselBranch::Series => ln_bessel_i_series(order, x),
        BesselBranch::Asymptotic => ln_bessel_i_asymptotic(order, x),
    }
}

pub fn bessel_i(order: f64, x: f64) -> f64 {
    ln_bessel_i(order, x).exp()
}

/// Ascending series `sum_k (x/2)^(2k+a) / (k! Gamma(k+a+1))`, summed outward
/// from its largest term so that no intermediate quantity overflows.
pub fn ln_bessel_i_series(order: f64, x: f64) -> f64 {
    debug_assert!(order > -1.0);
    if x == 0.0 {
        return if order == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    let half = 0.5 * x;
    let q = half * half;
    // ratio term(k+1)/term(k) = q / ((k+1)(k+a+1)); peak where it crosses 1
    let disc = (order * order + 4.0 * q).sqrt();
    let peak = (0.5 * (disc - order) - 1.0).max(0.0).floor();
    let ln_peak = (2.0 * peak + order) * half.ln() - ln_gamma(peak + 1.0) - ln_gamma(peak + order + 1.0);

    let mut sum = 1.0;
    // upward
    let mut term = 1.0;
    let mut k = peak;
    loop {
        term *= q / ((k + 1.0) * (k + order + 1.0));
        sum += term;
        k += 1.0;
        if term < sum * 1e-17 {
            break;
        }
    }
    // downward
    let mut term = 1.0;
    let mut k = peak;
    while k > 0.0 {
        term *= k * (k + order) / q;
        sum += term;
        k -= 1.0;
        if term < sum * 1e-17 {
            break;
        }
    }
    ln_peak + sum.ln()
}

/// Hankel expansion `e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(order) / x^k`,
/// truncated at the smallest term.
pub fn ln_bessel_i_asymptotic(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut sum = 1.0;
    let mut term: f64 = 1.0;
    let mut k: f64 = 1.0;
    loop {
        let next = -term * (mu - (2.0 * k - 1.0).powi(2)) / (k * 8.0 * x);
        if next.abs() >= term.abs() || k > 200.0 {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

/// `ln` of the Poisson probability `e^-mean mean^k / k!`.
pub fn ln_poisson_weight(mean: f64, k: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + k * mean.ln() - ln_gamma(k + 1.0)
}

/// Visits the Poisson(mean) weights outward from the mode until the
/// unvisited mass is below `tail`. The callback receives `(k, weight)`.
pub fn for_each_poisson_weight(mean: f64, tail: f64, mut f: impl FnMut(u64, f64)) {
    if mean == 0.0 {
        f(0, 1.0);
        return;
    }
    let mode = mean.floor();
    let mut seen = 0.0;
    let w_mode = ln_poisson_weight(mean, mode).exp();
    f(mode as u64, w_mode);
    seen += w_mode;

    // downward: weights decrease monotonically below the mode
    let mut w = w_mode;
    let mut k = mode;
    while k > 0.0 {
        w *= k / mean;
        k -= 1.0;
        if w == 0.0 {
            break;
        }
        f(k as u64, w);
        seen += w;
        // mass left below k is at most w * k / (mean - k)
        if k < mean && w * k < 0.5 * tail * (mean - k) {
            break;
        }
    }
    let mut w = w_mode;
    let mut k = mode;
    loop {
        k += 1.0;
        w *= mean / k;
        f(k as u64, w);
        seen += w;
        if 1.0 - seen < tail || (w == 0.0) {
            break;
        }
        if k > mean + 60.0 * mean.sqrt() + 100.0 {
            break;
        }
    }
}
