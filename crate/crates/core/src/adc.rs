//! Correlated bivariate square-root process with a product-Gamma invariant law.
//!
//! With `beta_i = eps_i / sigma_i^2` and `alpha_i = gamma / sigma_i^2`:
//!
//! ```text
//! A_r = kappa_r (1 + beta_r s)(theta_r - r) + kappa_s alpha_s r (theta_s - s)
//! A_s = kappa_s (1 + beta_s r)(theta_s - s) + kappa_r alpha_r s (theta_r - r)
//!
//! S = | sigma_r^2 r + eps_r r s      gamma r s              |
//!     | gamma r s                   sigma_s^2 s + eps_s r s |
//! ```
//!
//! The generator is symmetric in `L2(pi_r x pi_s)` where `pi_i` are the
//! factor Gamma laws, so the joint invariant law does not depend on
//! `(eps_r, eps_s, gamma)`. Setting all three to zero gives two independent
//! CIR factors.

use serde::{Deserialize, Serialize};

use crate::cir::{gamma_density, CirParams};
use crate::error::{ensure_domain, Error, Result};
use crate::quadrature::GammaGaussRule;

/// Relative slack allowed on `gamma^2 <= eps_r eps_s`, so that
/// `gamma = rho sqrt(eps_r eps_s)` with `|rho| = 1` stays admissible after
/// rounding.
pub const GAMMA_SLACK: f64 = 1e-12;

/// Unvalidated parameter record, as read from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawAdcParams {
    pub r0: f64,
    pub kappa_r: f64,
    pub theta_r: f64,
    pub sigma_r: f64,
    pub s0: f64,
    pub kappa_s: f64,
    pub theta_s: f64,
    pub sigma_s: f64,
    #[serde(default)]
    pub eps_r: f64,
    #[serde(default)]
    pub eps_s: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcParams {
    r: CirParams,
    s: CirParams,
    eps_r: f64,
    eps_s: f64,
    gamma: f64,
}

impl AdcParams {
    pub fn new(r: CirParams, s: CirParams, eps_r: f64, eps_s: f64, gamma: f64) -> Result<Self> {
        for (name, value) in [("eps_r", eps_r), ("eps_s", eps_s)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::NegativeCorrelation { name, value });
            }
        }
        let bound = (eps_r * eps_s).sqrt();
        if !(gamma.is_finite() && gamma * gamma <= eps_r * eps_s * (1.0 + GAMMA_SLACK)) {
            return Err(Error::GammaOutOfRange { gamma, bound });
        }
        Ok(AdcParams {
            r,
            s,
            eps_r,
            eps_s,
            gamma,
        })
    }

    /// Two independent factors.
    pub fn degenerate(r: CirParams, s: CirParams) -> Self {
        AdcParams {
            r,
            s,
            eps_r: 0.0,
            eps_s: 0.0,
            gamma: 0.0,
        }
    }

    /// Checks every invariant of a raw record. Errors distinguish a
    /// nonpositive CIR parameter, a negative correlation strength and an
    /// inadmissible `gamma`.
    pub fn validate(raw: &RawAdcParams) -> Result<Self> {
        let r = CirParams::new(raw.kappa_r, raw.theta_r, raw.sigma_r, raw.r0)?;
        let s = CirParams::new(raw.kappa_s, raw.theta_s, raw.sigma_s, raw.s0)?;
        AdcParams::new(r, s, raw.eps_r, raw.eps_s, raw.gamma)
    }

    pub fn to_raw(&self) -> RawAdcParams {
        RawAdcParams {
            r0: self.r.x0(),
            kappa_r: self.r.kappa(),
            theta_r: self.r.theta(),
            sigma_r: self.r.sigma(),
            s0: self.s.x0(),
            kappa_s: self.s.kappa(),
            theta_s: self.s.theta(),
            sigma_s: self.s.sigma(),
            eps_r: self.eps_r,
            eps_s: self.eps_s,
            gamma: self.gamma,
        }
    }

    pub fn r(&self) -> &CirParams {
        &self.r
    }

    pub fn s(&self) -> &CirParams {
        &self.s
    }

    pub fn eps_r(&self) -> f64 {
        self.eps_r
    }

    pub fn eps_s(&self) -> f64 {
        self.eps_s
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_degenerate(&self) -> bool {
        self.eps_r == 0.0 && self.eps_s == 0.0 && self.gamma == 0.0
    }

    /// `(beta_r, beta_s)`.
    pub fn betas(&self) -> (f64, f64) {
        (self.eps_r / self.r.sigma().powi(2), self.eps_s / self.s.sigma().powi(2))
    }

    /// `(alpha_r, alpha_s)`.
    pub fn alphas(&self) -> (f64, f64) {
        (self.gamma / self.r.sigma().powi(2), self.gamma / self.s.sigma().powi(2))
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector {
            r: self.r.x0(),
            s: self.s.x0(),
        }
    }

    /// Origin reachable iff `nu_r + nu_s < 1`.
    pub fn feller_multivariate(&self) -> bool {
        self.r.nu() + self.s.nu() < 1.0
    }

    pub fn drift(&self, x: StateVector) -> Result<[f64; 2]> {
        x.check()?;
        Ok(self.drift_at(x.r, x.s))
    }

    /// Drift without the domain check; the simulator feeds truncated states.
    #[inline]
    pub fn drift_at(&self, r: f64, s: f64) -> [f64; 2] {
        let (pr, ps) = (&self.r, &self.s);
        let (beta_r, beta_s) = self.betas();
        let (alpha_r, alpha_s) = self.alphas();
        [
            pr.kappa() * (1.0 + beta_r * s) * (pr.theta() - r) + ps.kappa() * alpha_s * r * (ps.theta() - s),
            ps.kappa() * (1.0 + beta_s * r) * (ps.theta() - s) + pr.kappa() * alpha_r * s * (pr.theta() - r),
        ]
    }

    pub fn diffusion_matrix(&self, x: StateVector) -> Result<Sym2> {
        x.check()?;
        Ok(self.diffusion_at(x.r, x.s))
    }

    #[inline]
    pub fn diffusion_at(&self, r: f64, s: f64) -> Sym2 {
        let rs = r * s;
        Sym2 {
            s11: self.r.sigma().powi(2) * r + self.eps_r * rs,
            s12: self.gamma * rs,
            s22: self.s.sigma().powi(2) * s + self.eps_s * rs,
        }
    }

    /// Diffusion of the independent model with the same CIR factors.
    pub fn independent_diffusion_at(&self, r: f64, s: f64) -> Sym2 {
        Sym2 {
            s11: self.r.sigma().powi(2) * r,
            s12: 0.0,
            s22: self.s.sigma().powi(2) * s,
        }
    }

    pub fn diffusion_factor(&self, x: StateVector) -> Result<CholeskyFactor> {
        x.check()?;
        Ok(self.diffusion_at(x.r, x.s).cholesky())
    }

    pub fn stationary_joint_density(&self, x: StateVector) -> Result<f64> {
        x.check()?;
        let (nu_r, om_r) = self.r.derived_shape();
        let (nu_s, om_s) = self.s.derived_shape();
        Ok(gamma_density(nu_r, om_r, x.r)? * gamma_density(nu_s, om_s, x.s)?)
    }

    /// `A . grad f + 1/2 tr(S Hess f)` at `x`.
    pub fn generator_apply<F: TestFunction + ?Sized>(&self, f: &F, x: StateVector) -> f64 {
        let a = self.drift_at(x.r, x.s);
        let s = self.diffusion_at(x.r, x.s);
        let g = f.gradient(x);
        let h = f.hessian(x);
        a[0] * g[0] + a[1] * g[1] + 0.5 * (s.s11 * h[0][0] + 2.0 * s.s12 * h[0][1] + s.s22 * h[1][1])
    }

    /// `(int f Lg dpi, int g Lf dpi)` under the product Gamma law, using an
    /// `n`-point Gamma-weighted Gauss rule per axis. Exact for polynomial
    /// integrands of per-axis degree below `2n`.
    pub fn reversibility_pair<F, G>(&self, f: &F, g: &G, n: usize) -> (f64, f64)
    where
        F: TestFunction + ?Sized,
        G: TestFunction + ?Sized,
    {
        let w = self.weak_form(f, g, n);
        (w.lhs, w.rhs)
    }

    /// Both sides of the weak-form identity together with the integral of
    /// the absolute integrands, the scale against which an asymmetry is
    /// measured when both sides vanish.
    pub fn weak_form<F, G>(&self, f: &F, g: &G, n: usize) -> WeakForm
    where
        F: TestFunction + ?Sized,
        G: TestFunction + ?Sized,
    {
        let (nu_r, om_r) = self.r.derived_shape();
        let (nu_s, om_s) = self.s.derived_shape();
        let qr = GammaGaussRule::new(nu_r, om_r, n);
        let qs = GammaGaussRule::new(nu_s, om_s, n);
        let mut out = WeakForm::default();
        for (&r, &wr) in qr.nodes.iter().zip(&qr.weights) {
            for (&s, &ws) in qs.nodes.iter().zip(&qs.weights) {
                let x = StateVector { r, s };
                let w = wr * ws;
                let a = w * f.value(x) * self.generator_apply(g, x);
                let b = w * g.value(x) * self.generator_apply(f, x);
                out.lhs += a;
                out.rhs += b;
                out.scale += a.abs().max(b.abs());
            }
        }
        out
    }

    /// Eigenvalues (descending) and unit eigenvectors of `S(x)`; a
    /// diagnostic only, the simulator uses the Cholesky factor.
    pub fn diffusion_eigen(&self, x: StateVector) -> Result<([f64; 2], [[f64; 2]; 2])> {
        let s = self.diffusion_matrix(x)?;
        let half_tr = 0.5 * (s.s11 + s.s22);
        let disc = (0.25 * (s.s11 - s.s22).powi(2) + s.s12 * s.s12).sqrt();
        let e = [half_tr + disc, half_tr - disc];
        let vec_for = |lambda: f64| {
            let v = if s.s12 != 0.0 {
                [lambda - s.s22, s.s12]
            } else if (lambda - s.s11).abs() <= (lambda - s.s22).abs() {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            };
            let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
            [v[0] / n, v[1] / n]
        };
        Ok((e, [vec_for(e[0]), vec_for(e[1])]))
    }
}

/// `int f Lg dpi`, `int g Lf dpi` and the larger of the two absolute
/// integrands integrated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeakForm {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl WeakForm {
    pub fn relative_asymmetry(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / self.scale
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub r: f64,
    pub s: f64,
}

impl StateVector {
    pub fn new(r: f64, s: f64) -> Result<Self> {
        let x = StateVector { r, s };
        x.check()?;
        Ok(x)
    }

    fn check(&self) -> Result<()> {
        ensure_domain(self.r >= 0.0, "state r", "nonnegative", self.r)?;
        ensure_domain(self.s >= 0.0, "state s", "nonnegative", self.s)
    }
}

/// Symmetric 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn max_abs(&self) -> f64 {
        self.s11.abs().max(self.s12.abs()).max(self.s22.abs())
    }

    /// Lower factor `L` with `L L^T = self`. A zero `s11` (state on the
    /// `r = 0` axis) yields `diag(0, sqrt(s22))` with `boundary` set.
    pub fn cholesky(&self) -> CholeskyFactor {
        if self.s11 <= 0.0 {
            return CholeskyFactor {
                l11: 0.0,
                l21: 0.0,
                l22: self.s22.max(0.0).sqrt(),
                boundary: true,
            };
        }
        if self.s12 == 0.0 {
            return CholeskyFactor {
                l11: self.s11.sqrt(),
                l21: 0.0,
                l22: self.s22.max(0.0).sqrt(),
                boundary: false,
            };
        }
        let l11 = self.s11.sqrt();
        CholeskyFactor {
            l11,
            l21: self.s12 / l11,
            l22: (self.det() / self.s11).max(0.0).sqrt(),
            boundary: false,
        }
    }
}

/// Lower-triangular diffusion factor. Its transpose is the upper form
/// `B = (1/sqrt(S11)) [[S11, S12], [0, sqrt(det S)]]` with `B^T B = S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CholeskyFactor {
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
    pub boundary: bool,
}

impl CholeskyFactor {
    pub fn lower(&self) -> [[f64; 2]; 2] {
        [[self.l11, 0.0], [self.l21, self.l22]]
    }

    pub fn upper(&self) -> [[f64; 2]; 2] {
        [[self.l11, self.l21], [0.0, self.l22]]
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> Sym2 {
        Sym2 {
            s11: self.l11 * self.l11,
            s12: self.l11 * self.l21,
            s22: self.l21 * self.l21 + self.l22 * self.l22,
        }
    }
}

/// A twice-differentiable scalar field on the quadrant.
pub trait TestFunction {
    fn value(&self, x: StateVector) -> f64;
    fn gradient(&self, x: StateVector) -> [f64; 2];
    fn hessian(&self, x: StateVector) -> [[f64; 2]; 2];
}

/// Polynomial `sum c r^i s^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    pub terms: Vec<(f64, u32, u32)>,
}

impl Poly2 {
    pub fn monomial(i: u32, j: u32) -> Self {
        Poly2 {
            terms: vec![(1.0, i, j)],
        }
    }

    /// `{1, r, s, rs, r^2, s^2}`.
    pub fn low_degree_family() -> Vec<Poly2> {
        [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)]
            .into_iter()
            .map(|(i, j)| Poly2::monomial(i, j))
            .collect()
    }
}

fn pw(x: f64, k: i64) -> f64 {
    if k < 0 {
        0.0
    } else {
        x.powi(k as i32)
    }
}

impl TestFunction for Poly2 {
    fn value(&self, x: StateVector) -> f64 {
        self.terms.iter().map(|&(c, i, j)| c * pw(x.r, i as i64) * pw(x.s, j as i64)).sum()
    }

    fn gradient(&self, x: StateVector) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(c, i, j) in &self.terms {
            let (i, j) = (i as i64, j as i64);
            g[0] += c * i as f64 * pw(x.r, i - 1) * pw(x.s, j);
            g[1] += c * j as f64 * pw(x.r, i) * pw(x.s, j - 1);
        }
        g
    }

    fn hessian(&self, x: StateVector) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for &(c, i, j) in &self.terms {
            let (i, j) = (i as i64, j as i64);
            h[0][0] += c * (i * (i - 1)) as f64 * pw(x.r, i - 2) * pw(x.s, j);
            h[1][1] += c * (j * (j - 1)) as f64 * pw(x.r, i) * pw(x.s, j - 2);
            let m = c * (i * j) as f64 * pw(x.r, i - 1) * pw(x.s, j - 1);
            h[0][1] += m;
            h[1][0] += m;
        }
        h
    }
}
