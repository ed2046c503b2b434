//! Numerical integration: composite Simpson on uniform grids, adaptive
//! Gauss–Kronrod on intervals, and Gauss rules for Gamma weights.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Composite Simpson rule over equally spaced samples `ys` with spacing `h`.
pub fn simpson(ys: &[f64], h: f64) -> Result<f64> {
    if ys.len() < 2 {
        return Ok(0.0);
    }
    let intervals = ys.len() - 1;
    if intervals % 2 != 0 {
        return Err(Error::OddIntervals { intervals });
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, y) in ys.iter().enumerate().take(intervals).skip(1) {
        if i % 2 == 1 {
            odd += y;
        } else {
            even += y;
        }
    }
    Ok(h / 3.0 * (ys[0] + ys[intervals] + 4.0 * odd + 2.0 * even))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]` to absolute
/// tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, el) = gk15(f, a, m);
        let (r, er) = gk15(f, m, b);
        if el + er <= tol || depth == 0 || (b - a).abs() < 1e-15 * (a.abs() + b.abs()) {
            return l + r;
        }
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    let (whole, err) = gk15(&f, a, b);
    if err <= 0.1 * tol {
        return whole;
    }
    rec(&f, a, b, tol, 40)
}

/// Integral over `[a, inf)` through the substitution `x = a + t / (1 - t)`.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss rule for the normalized Gamma(shape, rate) weight: `sum w_i g(x_i)`
/// equals `E[g(X)]` exactly for polynomials of degree `< 2n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaGaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GammaGaussRule {
    /// Golub–Welsch on the generalized Laguerre Jacobi matrix.
    pub fn new(shape: f64, rate: f64, n: usize) -> Self {
        let alpha = shape - 1.0;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let k = i as f64;
            jac[(i, i)] = 2.0 * k + alpha + 1.0;
            if i + 1 < n {
                let off = ((k + 1.0) * (k + 1.0 + alpha)).sqrt();
                jac[(i, i + 1)] = off;
                jac[(i + 1, i)] = off;
            }
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|j| (eig.eigenvalues[j] / rate, eig.eigenvectors[(0, j)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        GammaGaussRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// `E[X^k]` for `X ~ Gamma(shape, rate)`.
pub fn gamma_raw_moment(shape: f64, rate: f64, k: u32) -> f64 {
    (ln_gamma(shape + k as f64) - ln_gamma(shape)).exp() / rate.powi(k as i32)
}
