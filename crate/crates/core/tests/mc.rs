use adc_core::adc::AdcParams;
use adc_core::calibrate::{model2_rates, objective_model1, objective_model2, Target, Weights};
use adc_core::cir::CirParams;
use adc_core::curve::standard_tenors;
use adc_core::fixtures::model1_curves;
use adc_core::mc::{comparison_sum_check, price_zcb_mc, sample_states_at, simulate, Model, Scheme, SimConfig};
use adc_core::pricing::{zcb_price_cir, Leg};
use adc_core::presets;
use adc_core::stats::{mean_and_std_error, sample_variance, KsOutcome};
use adc_core::verify::{decoupling, DecouplingConfig};

fn degenerate() -> AdcParams {
    let (r, s) = presets::model1_2006();
    AdcParams::degenerate(r, s)
}

#[test]
fn zero_volatility_follows_the_ode() {
    let p = CirParams::new_unchecked(0.5, 0.05, 0.0, 0.01);
    let cfg = SimConfig {
        n_paths: 1,
        horizon: 10.0,
        record_stride: 250,
        ..SimConfig::default()
    };
    let batch = simulate(&Model::Cir(p), &cfg).unwrap();
    let x = batch.values_at(10.0, adc_core::mc::Component::R).unwrap()[0];
    let exact = 0.05 + (0.01 - 0.05) * (-0.5f64 * 10.0).exp();
    assert!((x - exact).abs() < 5e-4, "{x} vs {exact}");
}

#[test]
fn euler_terminal_mean_matches_conditional_mean() {
    let p = presets::model1_2006().0;
    let cfg = SimConfig {
        n_paths: 20_000,
        horizon: 5.0,
        seed: 3,
        ..SimConfig::default()
    };
    let xs: Vec<f64> = sample_states_at(&Model::Cir(p), &cfg, &[5.0]).unwrap()[0].iter().map(|x| x.r).collect();
    let (mean, se) = mean_and_std_error(&xs);
    let want = p.conditional_mean(p.x0(), 5.0);
    assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
    assert!(xs.iter().all(|&x| x >= 0.0));
}

#[test]
fn spread_factor_follows_its_transition_law() {
    let s = presets::model1_2006().1;
    let cfg = SimConfig {
        n_paths: 20_000,
        horizon: 5.0,
        seed: 1,
        ..SimConfig::default()
    };
    let xs: Vec<f64> = sample_states_at(&Model::Cir(s), &cfg, &[5.0]).unwrap()[0].iter().map(|x| x.r).collect();
    let ks = KsOutcome::new(&xs, |x| s.transition_cdf(5.0, x.max(0.0)).unwrap(), 0.01);
    assert!(ks.passes(), "{ks:?}");
}

fn pair(kappa: f64, nu: f64, sigma: f64, x0: f64) -> CirParams {
    CirParams::new(kappa, nu * sigma * sigma / (2.0 * kappa), sigma, x0).unwrap()
}

#[test]
fn comparison_sum_with_unit_indices() {
    let f = [pair(0.5, 1.0, 0.1, 0.02), pair(0.5, 1.0, 0.2, 0.03)];
    let cfg = SimConfig {
        n_paths: 50_000,
        seed: 2,
        ..SimConfig::default()
    };
    let exact = comparison_sum_check(&f, 2.0, &cfg, Scheme::Exact).unwrap();
    assert!(exact.ks.passes(), "{:?}", exact.ks);
}

#[test]
fn comparison_sum_below_the_feller_index_puts_mass_near_zero() {
    let f = [pair(0.5, 0.4, 0.1, 0.002), pair(0.5, 0.4, 0.1, 0.002)];
    let cfg = SimConfig {
        n_paths: 50_000,
        seed: 5,
        ..SimConfig::default()
    };
    let rep = comparison_sum_check(&f, 0.25, &cfg, Scheme::Exact).unwrap();
    assert!(rep.ks.passes(), "{:?}", rep.ks);
    let z = 0.02;
    let want = rep.reference.transition_cdf(0.25, z).unwrap();
    let got = rep.mass_below(z);
    let se = (want * (1.0 - want) / 50_000.0).sqrt();
    assert!(got > 0.0 && want > 0.01, "{got} {want}");
    assert!((got - want).abs() < 3.0 * se, "{got} vs {want}");
}

#[test]
fn correlated_model_decouples_at_long_horizons() {
    let cfg = DecouplingConfig {
        horizon: 120.0,
        sim: SimConfig {
            step_h: 0.004,
            n_paths: 20_000,
            seed: 1,
            ..SimConfig::default()
        },
        ..DecouplingConfig::default()
    };
    let rep = decoupling(&cfg).unwrap();
    for c in &rep.checks {
        assert!(c.passed, "{c:?}");
    }
}

#[test]
fn weak_error_shrinks_with_the_step() {
    let model = Model::Adc(degenerate());
    let (r, _) = presets::model1_2006();
    let exact = zcb_price_cir(&r, r.x0(), 10.0).unwrap();
    let mut last = f64::INFINITY;
    for h in [0.016, 0.008, 0.004] {
        let cfg = SimConfig {
            step_h: h,
            n_paths: 20_000,
            horizon: 10.0,
            seed: 9,
            ..SimConfig::default()
        };
        let p = price_zcb_mc(&model, &cfg, 10.0, Leg::RiskFree).unwrap();
        let gap = (p.value - exact).abs();
        assert!(gap <= last + 2.0 * p.std_error, "h={h}: {gap} after {last}");
        last = gap;
    }
}

#[test]
fn std_error_scales_with_path_count() {
    let model = Model::Adc(degenerate());
    let scaled: Vec<f64> = [5_000, 20_000, 80_000]
        .into_iter()
        .map(|n| {
            let cfg = SimConfig {
                step_h: 0.02,
                n_paths: n,
                horizon: 10.0,
                seed: 1,
                ..SimConfig::default()
            };
            price_zcb_mc(&model, &cfg, 10.0, Leg::Risky).unwrap().std_error * (n as f64).sqrt()
        })
        .collect();
    for v in &scaled[1..] {
        assert!((v / scaled[0] - 1.0).abs() < 0.1, "{scaled:?}");
    }
}

#[test]
fn degenerate_objective_agrees_with_closed_form() {
    let (r, s) = presets::model1_2006();
    let tenors = standard_tenors();
    let target = Target::new(&model1_curves(&r, &s, &tenors).unwrap(), Weights::default()).unwrap();
    let closed = objective_model1(&r, &s, &target).unwrap();
    let mc = objective_model2(&degenerate(), &target, &SimConfig { seed: 1, ..SimConfig::default() }).unwrap();
    assert!(closed < 1e-30, "{closed}");
    assert!(mc <= 25e-8 * 60.0, "{mc}");
}

#[test]
fn objective_reuses_its_random_numbers() {
    let (r, s) = presets::model1_2006();
    let target = Target::new(&model1_curves(&r, &s, &standard_tenors()).unwrap(), Weights::default()).unwrap();
    let cfg = SimConfig {
        step_h: 0.02,
        n_paths: 500,
        seed: 42,
        ..SimConfig::default()
    };
    let p = presets::model2_2006();
    let a = objective_model2(&p, &target, &cfg).unwrap();
    let b = objective_model2(&p, &target, &cfg).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let (rf, sp) = model2_rates(&p, &cfg, &target.tenors).unwrap();
    assert_eq!(target.misfit(&rf, &sp).to_bits(), a.to_bits());
}

#[test]
fn objective_noise_halves_with_four_times_the_paths() {
    let (r, s) = presets::model1_2006();
    let target = Target::new(&model1_curves(&r, &s, &standard_tenors()).unwrap(), Weights::default()).unwrap();
    let p = presets::model2_2006();
    let spread = |n: usize| {
        let values: Vec<f64> = (0..20)
            .map(|seed| {
                let cfg = SimConfig {
                    step_h: 0.02,
                    n_paths: n,
                    seed,
                    ..SimConfig::default()
                };
                objective_model2(&p, &target, &cfg).unwrap()
            })
            .collect();
        sample_variance(&values).sqrt()
    };
    let ratio = spread(500) / spread(2000);
    assert!((1.5..=2.7).contains(&ratio), "{ratio}");
}
