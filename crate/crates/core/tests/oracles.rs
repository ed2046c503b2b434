//! Library results against independently computed references.

use std::collections::BTreeMap;

use adc_core::adc::{AdcParams, Poly2, StateVector, TestFunction};
use adc_core::cir::CirParams;
use adc_core::curve::{bootstrap_discounts, NaturalCubicSpline};
use adc_core::pricing::{bond_coefficients, zcb_price_cir, zcb_price_model1, Leg};
use adc_core::presets;
use adc_core::stats::{mean_and_std_error, KsOutcome};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, Continuous, Discrete, Poisson};

fn riskfree() -> CirParams {
    presets::model1_2006().0
}

/// Noncentral chi-square density as a Poisson mixture of central ones.
fn ncx2_density(y: f64, dof: f64, lambda: f64) -> f64 {
    let pois = Poisson::new(lambda / 2.0).unwrap();
    let mut sum = 0.0;
    for k in 0..2000u64 {
        let w = pois.pmf(k);
        sum += w * ChiSquared::new(dof + 2.0 * k as f64).unwrap().pdf(y);
        if k as f64 > lambda && w < 1e-18 {
            break;
        }
    }
    sum
}

fn cir_density_oracle(p: &CirParams, x0: f64, t: f64, x: f64) -> f64 {
    let (k, th, s) = (p.kappa(), p.theta(), p.sigma());
    let c = 2.0 * k / (s * s * (1.0 - (-k * t).exp()));
    let dof = 4.0 * k * th / (s * s);
    let lambda = 2.0 * c * x0 * (-k * t).exp();
    2.0 * c * ncx2_density(2.0 * c * x, dof, lambda)
}

/// Composite Simpson with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn transition_density_matches_poisson_mixture() {
    for p in [riskfree(), presets::model1_2006().1, CirParams::new(0.125, 0.02, 0.1, 0.005).unwrap()] {
        for t in [0.5, 1.0, 5.0] {
            for x in [0.5 * p.theta(), p.theta(), 2.0 * p.theta()] {
                let got = p.transition_density(t, x).unwrap();
                let want = cir_density_oracle(&p, p.x0(), t, x);
                assert!((got - want).abs() <= 1e-9 * want.abs(), "t={t} x={x}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn transition_cdf_integrates_the_density() {
    let p = riskfree();
    for x in [0.02, 0.05, 0.10] {
        let integral = simpson(|y| p.transition_density(5.0, y).unwrap(), 0.0, x, 20_000);
        let cdf = p.transition_cdf(5.0, x).unwrap();
        assert!((integral - cdf).abs() < 1e-7, "x={x}: {integral} vs {cdf}");
    }
}

#[test]
fn chapman_kolmogorov() {
    let p = riskfree();
    let direct = p.transition_density(3.0, 0.05).unwrap();
    let composed = simpson(
        |y| {
            if y <= 0.0 {
                return 0.0;
            }
            let first = p.transition_density(1.0, y).unwrap();
            let second = p.with_x0(y).unwrap().transition_density(2.0, 0.05).unwrap();
            first * second
        },
        0.0,
        0.4,
        8_000,
    );
    assert!((composed - direct).abs() < 1e-6 * direct, "{composed} vs {direct}");
}

#[test]
fn exact_sampler_moments_and_law() {
    let p = riskfree();
    let dt = 5.0;
    let mut draws = Vec::with_capacity(100_000);
    for i in 0..100_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        rng.set_stream(i);
        draws.push(p.sample_exact(p.x0(), dt, &mut rng).unwrap());
    }
    let (mean, se) = mean_and_std_error(&draws);
    let want = p.x0() * (-p.kappa() * dt).exp() + p.theta() * (1.0 - (-p.kappa() * dt).exp());
    assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
    let ks = KsOutcome::new(&draws, |x| p.transition_cdf(dt, x.max(0.0)).unwrap(), 0.01);
    assert!(ks.passes(), "{ks:?}");
}

#[test]
fn stationary_variance_direct_evaluation() {
    let m = riskfree().stationary_moments();
    let want = 0.0544 * 0.0455f64.powi(2) / (2.0 * 0.0398);
    assert!((m.variance - want).abs() < 1e-15);
    assert!((m.variance - 1.4149e-3).abs() < 1e-7);
}

/// Natural cubic spline through `(x, y)` by a dense solve for all
/// polynomial coefficients.
fn dense_spline(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len() - 1;
    let m = 4 * n;
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    let mut row = 0;
    let basis = |d: usize, u: f64| -> [f64; 4] {
        match d {
            0 => [1.0, u, u * u, u * u * u],
            1 => [0.0, 1.0, 2.0 * u, 3.0 * u * u],
            _ => [0.0, 0.0, 2.0, 6.0 * u],
        }
    };
    for i in 0..n {
        for (u, v) in [(x[i], y[i]), (x[i + 1], y[i + 1])] {
            for (k, c) in basis(0, u).iter().enumerate() {
                a[(row, 4 * i + k)] = *c;
            }
            b[row] = v;
            row += 1;
        }
    }
    for i in 0..n - 1 {
        for d in [1, 2] {
            for (k, c) in basis(d, x[i + 1]).iter().enumerate() {
                a[(row, 4 * i + k)] = *c;
                a[(row, 4 * (i + 1) + k)] = -*c;
            }
            row += 1;
        }
    }
    for (i, u) in [(0, x[0]), (n - 1, x[n])] {
        for (k, c) in basis(2, u).iter().enumerate() {
            a[(row, 4 * i + k)] = *c;
        }
        row += 1;
    }
    let coef = a.lu().solve(&b).unwrap();
    let i = (0..n).find(|&i| t <= x[i + 1]).unwrap_or(n - 1);
    basis(0, t).iter().enumerate().map(|(k, c)| c * coef[4 * i + k]).sum()
}

#[test]
fn spline_matches_dense_solve() {
    let x = [0.5, 1.0, 2.5, 4.0, 7.0];
    let cubic = |t: f64| 0.01 + 0.004 * t - 0.0007 * t * t + 0.00003 * t * t * t;
    let y: Vec<f64> = x.iter().map(|&t| cubic(t)).collect();
    let s = NaturalCubicSpline::new(&x, &y).unwrap();
    for i in 0..=130 {
        let t = 0.5 + 6.5 * i as f64 / 130.0;
        let (got, want) = (s.eval(t).unwrap(), dense_spline(&x, &y, t));
        assert!((got - want).abs() < 1e-12, "t={t}: {got} vs {want}");
    }
}

#[test]
fn bootstrap_two_steps_by_hand() {
    let p = bootstrap_discounts(&[0.05, 0.05]).unwrap();
    assert!((p[0] - 1.0 / 1.05).abs() < 1e-15);
    let p2 = (1.0 - 0.05 / 1.05) / 1.05;
    assert!((p[1] - p2).abs() < 1e-15);
    assert!((p[1] - 0.907029).abs() < 1e-6);
    assert!((-p[1].ln() / 2.0 - 0.04879).abs() < 1e-5);
}

/// Bond price from the textbook `A e^{-B r}` form.
fn textbook_price(p: &CirParams, r: f64, tau: f64) -> f64 {
    let (k, th, s) = (p.kappa(), p.theta(), p.sigma());
    let d = (k * k + 2.0 * s * s).sqrt();
    let e = (d * tau).exp_m1();
    let denom = (d + k) * e + 2.0 * d;
    let ln_a = (2.0 * k * th / (s * s)) * ((2.0 * d).ln() + 0.5 * (d + k) * tau - denom.ln());
    let b = 2.0 * e / denom;
    (ln_a - b * r).exp()
}

#[test]
fn bond_price_matches_textbook_form() {
    let p = riskfree();
    let got = zcb_price_cir(&p, 0.0346, 10.0).unwrap();
    let want = textbook_price(&p, 0.0346, 10.0);
    assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    let rate = -got.ln() / 10.0;
    assert!((0.03..=0.06).contains(&rate));
    let (ln_f, g) = bond_coefficients(&p, 10.0);
    assert!((got - (ln_f - g * 0.0346).exp()).abs() < 1e-15);
}

#[test]
fn risky_price_is_the_factor_product() {
    let (r, s) = presets::model1_2006();
    let risky = zcb_price_model1(&r, &s, r.x0(), s.x0(), 5.0, Leg::Risky).unwrap();
    let product = zcb_price_cir(&r, r.x0(), 5.0).unwrap() * zcb_price_cir(&s, s.x0(), 5.0).unwrap();
    assert!((risky - product).abs() <= 2.0 * f64::EPSILON * product);
}

type Poly = BTreeMap<(u32, u32), f64>;

fn add(p: &mut Poly, key: (u32, u32), c: f64) {
    *p.entry(key).or_insert(0.0) += c;
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (&(i, j), &c) in a {
        for (&(k, l), &d) in b {
            add(&mut out, (i + k, j + l), c * d);
        }
    }
    out
}

/// Generator applied to `r^i s^j` as a polynomial, expanded by hand from the
/// drift and diffusion coefficients.
fn generator_poly(p: &AdcParams, i: u32, j: u32) -> Poly {
    let (kr, thr, sr) = (p.r().kappa(), p.r().theta(), p.r().sigma());
    let (ks, ths, ss) = (p.s().kappa(), p.s().theta(), p.s().sigma());
    let (br, bs) = (p.eps_r() / (sr * sr), p.eps_s() / (ss * ss));
    let (ar, as_) = (p.gamma() / (sr * sr), p.gamma() / (ss * ss));
    let mut a1 = Poly::new();
    add(&mut a1, (0, 0), kr * thr);
    add(&mut a1, (1, 0), -kr);
    add(&mut a1, (0, 1), kr * br * thr);
    add(&mut a1, (1, 1), -kr * br + -ks * as_);
    add(&mut a1, (1, 0), ks * as_ * ths);
    let mut a2 = Poly::new();
    add(&mut a2, (0, 0), ks * ths);
    add(&mut a2, (0, 1), -ks);
    add(&mut a2, (1, 0), ks * bs * ths);
    add(&mut a2, (1, 1), -ks * bs + -kr * ar);
    add(&mut a2, (0, 1), kr * ar * thr);
    let mut s11 = Poly::new();
    add(&mut s11, (1, 0), sr * sr);
    add(&mut s11, (1, 1), p.eps_r());
    let mut s22 = Poly::new();
    add(&mut s22, (0, 1), ss * ss);
    add(&mut s22, (1, 1), p.eps_s());
    let mut s12 = Poly::new();
    add(&mut s12, (1, 1), p.gamma());

    let mono = |c: f64, a: i64, b: i64| -> Poly {
        let mut m = Poly::new();
        if a >= 0 && b >= 0 && c != 0.0 {
            m.insert((a as u32, b as u32), c);
        }
        m
    };
    let (i, j) = (i as i64, j as i64);
    let fi = i as f64;
    let fj = j as f64;
    let mut out = Poly::new();
    for part in [
        mul(&a1, &mono(fi, i - 1, j)),
        mul(&a2, &mono(fj, i, j - 1)),
        mul(&s11, &mono(0.5 * fi * (fi - 1.0), i - 2, j)),
        mul(&s22, &mono(0.5 * fj * (fj - 1.0), i, j - 2)),
        mul(&s12, &mono(fi * fj, i - 1, j - 1)),
    ] {
        for (k, c) in part {
            add(&mut out, k, c);
        }
    }
    out
}

fn gamma_moment(nu: f64, omega: f64, k: u32) -> f64 {
    (0..k).map(|m| (nu + m as f64) / omega).product()
}

fn expect_with(p: &AdcParams, poly: &Poly, coef: impl Fn(f64) -> f64) -> f64 {
    let (nr, or) = (p.r().nu(), p.r().omega());
    let (ns, os) = (p.s().nu(), p.s().omega());
    poly.iter().map(|(&(i, j), &c)| coef(c) * gamma_moment(nr, or, i) * gamma_moment(ns, os, j)).sum()
}

fn expect(p: &AdcParams, poly: &Poly) -> f64 {
    expect_with(p, poly, |c| c)
}

/// Size of the integrand terms, so that exact zeros are judged on the scale
/// of what cancelled.
fn magnitude(p: &AdcParams, poly: &Poly) -> f64 {
    expect_with(p, poly, f64::abs)
}

#[test]
fn reversibility_by_exact_moments() {
    let monomials = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sets = vec![presets::model2_2006()];
    for _ in 0..5 {
        sets.push(adc_core::verify::random_admissible(&mut rng).unwrap());
    }
    for p in &sets {
        for &(i, j) in &monomials {
            for &(k, l) in &monomials {
                let f: Poly = [((i, j), 1.0)].into_iter().collect();
                let g: Poly = [((k, l), 1.0)].into_iter().collect();
                let (fl, gl) = (mul(&f, &generator_poly(p, k, l)), mul(&g, &generator_poly(p, i, j)));
                let (lhs, rhs) = (expect(p, &fl), expect(p, &gl));
                let scale = magnitude(p, &fl).max(magnitude(p, &gl));
                assert!((lhs - rhs).abs() <= 1e-10 * scale, "({i},{j}) ({k},{l}): {lhs} vs {rhs}");
                let (ql, qr) = p.reversibility_pair(&Poly2::monomial(i, j), &Poly2::monomial(k, l), 8);
                assert!((ql - lhs).abs() <= 1e-10 * scale, "quadrature {ql} vs moments {lhs}");
                assert!((qr - rhs).abs() <= 1e-10 * scale);
            }
        }
    }
}

#[test]
fn reversibility_by_planar_quadrature() {
    let p = presets::model2_2006();
    let (f, g) = (Poly2::monomial(1, 0), Poly2::monomial(0, 1));
    let dens = |r: f64, s: f64| p.stationary_joint_density(StateVector { r, s }).unwrap();
    let (mr, ms) = (p.r().stationary_moments(), p.s().stationary_moments());
    let r_hi = mr.mean + 14.0 * mr.std_dev();
    let s_hi = ms.mean + 14.0 * ms.std_dev();
    let integrand = |a: &dyn TestFunction, b: &dyn TestFunction| {
        simpson(
            |r| {
                simpson(
                    |s| {
                        let x = StateVector { r, s };
                        a.value(x) * p.generator_apply(b, x) * dens(r, s)
                    },
                    0.0,
                    s_hi,
                    600,
                )
            },
            0.0,
            r_hi,
            600,
        )
    };
    let lhs = integrand(&f, &g);
    let rhs = integrand(&g, &f);
    let scale = lhs.abs().max(rhs.abs());
    assert!((lhs - rhs).abs() <= 1e-5 * scale, "{lhs} vs {rhs}");
    let (ql, _) = p.reversibility_pair(&f, &g, 8);
    assert!((ql - lhs).abs() <= 1e-5 * scale, "{ql} vs {lhs}");
}

#[test]
fn stationary_law_ignores_correlation() {
    let p = presets::model2_2006();
    let q = AdcParams::degenerate(*p.r(), *p.s());
    for &(r, s) in &[(0.01, 0.001), (0.0455, 0.0026), (0.1, 0.01)] {
        let x = StateVector { r, s };
        assert_eq!(p.stationary_joint_density(x).unwrap(), q.stationary_joint_density(x).unwrap());
    }
}
