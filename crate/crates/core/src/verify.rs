//! Property suites run by `adc verify` and the acceptance tests. Each suite
//! returns its checks with the statistics they measured.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adc::{AdcParams, Poly2};
use crate::cir::CirParams;
use crate::curve::standard_tenors;
use crate::error::{Error, Result};
use crate::mc::{comparison_sum_check, hitting_probability, price_curve_mc, sample_states_at, Model, Scheme, SimConfig};
use crate::pricing::{implied_rate, zcb_price_model1, Leg};
use crate::presets;
use crate::stats::{correlation, KsOutcome, Proportion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Stationarity,
    Decoupling,
    Reversibility,
    Feller,
    Mc,
    Comparison,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Stationarity,
        Suite::Decoupling,
        Suite::Reversibility,
        Suite::Feller,
        Suite::Mc,
        Suite::Comparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Stationarity => "stationarity",
            Suite::Decoupling => "decoupling",
            Suite::Reversibility => "reversibility",
            Suite::Feller => "feller",
            Suite::Mc => "mc",
            Suite::Comparison => "comparison",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub metrics: Vec<(String, f64)>,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            passed,
            metrics: Vec::new(),
        }
    }

    fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.push((key.to_string(), value));
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check: `suite check PASS|FAIL key=value ...`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.checks {
            write!(w, "{} {} {}", self.suite, c.name, if c.passed { "PASS" } else { "FAIL" })?;
            for (k, v) in &c.metrics {
                write!(w, " {k}={v:.6e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn ks_check(name: &str, ks: &KsOutcome) -> Check {
    Check::new(name, ks.passes())
        .metric("ks", ks.statistic)
        .metric("critical", ks.critical)
        .metric("n", ks.n as f64)
}

/// Exact draws of the risk-free factor at a long horizon against its Gamma
/// law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityConfig {
    pub params: CirParams,
    pub horizon: f64,
    pub draws: usize,
    pub seed: u64,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        StationarityConfig {
            params: presets::model1_2006().0,
            horizon: 200.0,
            draws: 100_000,
            seed: 1,
        }
    }
}

pub fn stationarity(cfg: &StationarityConfig) -> Result<SuiteReport> {
    let p = cfg.params;
    let mut draws = Vec::with_capacity(cfg.draws);
    for i in 0..cfg.draws {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        draws.push(p.sample_exact(p.x0(), cfg.horizon, &mut rng)?);
    }
    let ks = KsOutcome::new(&draws, |x| p.stationary_cdf(x), 0.01);
    Ok(SuiteReport {
        suite: Suite::Stationarity,
        checks: vec![ks_check("gamma_law", &ks).metric("horizon", cfg.horizon)],
    })
}

/// Euler paths of the correlated model: each marginal against its Gamma law
/// and the cross-correlation against zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecouplingConfig {
    pub params: AdcParams,
    pub horizon: f64,
    pub sim: SimConfig,
}

impl Default for DecouplingConfig {
    fn default() -> Self {
        DecouplingConfig {
            params: presets::model2_2006(),
            horizon: 30.0,
            sim: SimConfig {
                step_h: 0.001,
                n_paths: 100_000,
                seed: 1,
                ..SimConfig::default()
            },
        }
    }
}

pub fn decoupling(cfg: &DecouplingConfig) -> Result<SuiteReport> {
    let p = cfg.params;
    let sim = cfg.sim.until(cfg.horizon);
    let states = sample_states_at(&Model::Adc(p), &sim, &[cfg.horizon])?;
    let rs: Vec<f64> = states[0].iter().map(|x| x.r).collect();
    let ss: Vec<f64> = states[0].iter().map(|x| x.s).collect();
    let ks_r = KsOutcome::new(&rs, |x| p.r().stationary_cdf(x), 0.01);
    let ks_s = KsOutcome::new(&ss, |x| p.s().stationary_cdf(x), 0.01);
    let rho = correlation(&rs, &ss);
    // standard error of a sample correlation under independence
    let se = 1.0 / (rs.len() as f64 - 1.0).sqrt();
    Ok(SuiteReport {
        suite: Suite::Decoupling,
        checks: vec![
            ks_check("marginal_r", &ks_r),
            ks_check("marginal_s", &ks_s),
            Check::new("correlation", rho.abs() <= 3.0 * se)
                .metric("rho", rho)
                .metric("std_error", se),
        ],
    })
}

/// Weak-form symmetry of the generator over the low-degree polynomial
/// family, at the preset and at random admissible parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversibilityConfig {
    pub random_sets: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub nodes: usize,
}

impl Default for ReversibilityConfig {
    fn default() -> Self {
        ReversibilityConfig {
            random_sets: 10,
            seed: 1,
            tolerance: 1e-5,
            nodes: 8,
        }
    }
}

/// Admissible parameters drawn from a box around typical rate magnitudes.
pub fn random_admissible(rng: &mut impl Rng) -> Result<AdcParams> {
    let factor = |rng: &mut dyn rand::RngCore| {
        let kappa = rng.random_range(0.05..3.0);
        let theta = rng.random_range(0.002..0.08);
        let sigma = rng.random_range(0.01..0.3);
        let x0 = rng.random_range(0.001..0.08);
        CirParams::new(kappa, theta, sigma, x0)
    };
    let r = factor(rng)?;
    let s = factor(rng)?;
    let eps_r = rng.random_range(0.0..1.0);
    let eps_s = rng.random_range(0.0..1.0);
    let rho: f64 = rng.random_range(-1.0..1.0);
    AdcParams::new(r, s, eps_r, eps_s, rho * (eps_r * eps_s).sqrt())
}

/// Largest relative asymmetry `|<f, Lg> - <g, Lf>|` over all pairs of the
/// family, scaled by the integrated size of the integrands.
pub fn weak_form_asymmetry(p: &AdcParams, nodes: usize) -> f64 {
    let family = Poly2::low_degree_family();
    let mut worst: f64 = 0.0;
    for (i, f) in family.iter().enumerate() {
        for g in &family[i + 1..] {
            worst = worst.max(p.weak_form(f, g, nodes).relative_asymmetry());
        }
    }
    worst
}

pub fn reversibility(cfg: &ReversibilityConfig) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sets = vec![presets::model2_2006()];
    for _ in 0..cfg.random_sets {
        sets.push(random_admissible(&mut rng)?);
    }
    let worst = sets.iter().map(|p| weak_form_asymmetry(p, cfg.nodes)).fold(0.0, f64::max);
    Ok(SuiteReport {
        suite: Suite::Reversibility,
        checks: vec![Check::new("weak_form_symmetry", worst <= cfg.tolerance)
            .metric("max_relative_asymmetry", worst)
            .metric("parameter_sets", sets.len() as f64)],
    })
}

/// Boundary hitting under truncated Euler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FellerConfig {
    pub sim: SimConfig,
    /// Run only the univariate check at this `nu`.
    pub nu: Option<f64>,
}

impl Default for FellerConfig {
    fn default() -> Self {
        FellerConfig {
            sim: SimConfig {
                n_paths: 10_000,
                seed: 1,
                ..SimConfig::default()
            },
            nu: None,
        }
    }
}

/// Factor with `kappa = 0.125`, `theta = 0.02`, `x0 = 0.005` and the
/// volatility that gives the requested `nu`.
pub fn factor_with_nu(nu: f64) -> Result<CirParams> {
    let (kappa, theta) = (0.125, 0.02);
    if !(nu > 0.0) {
        return Err(Error::NonPositiveParameter { name: "nu", value: nu });
    }
    CirParams::new(kappa, theta, (2.0 * kappa * theta / nu).sqrt(), 0.005)
}

fn univariate_hits(name: &str, p: CirParams, sim: &SimConfig) -> Result<Check> {
    let hits = hitting_probability(&Model::Cir(p), sim)?.joint;
    let polar = p.nu() >= 1.0;
    let passed = if polar { !hits.positive_beyond(3.0) } else { hits.positive_beyond(3.0) };
    Ok(proportion_metrics(Check::new(name, passed).metric("nu", p.nu()), &hits).metric("horizon", sim.horizon))
}

fn proportion_metrics(c: Check, p: &Proportion) -> Check {
    c.metric("hits", p.hits as f64)
        .metric("frequency", p.estimate())
        .metric("std_error", p.std_error())
}

/// Two independent factors with `kappa = 0.5`, `theta = 0.05` at
/// `x0 = theta` and the given per-factor `nu`.
pub fn pair_with_nu(nu: f64) -> Result<(CirParams, CirParams)> {
    let (kappa, theta) = (0.5, 0.05);
    let f = CirParams::new(kappa, theta, (2.0 * kappa * theta / nu).sqrt(), theta)?;
    Ok((f, f))
}

fn multivariate_hits(name: &str, nu: f64, sim: &SimConfig) -> Result<Check> {
    let (r, s) = pair_with_nu(nu)?;
    let rep = hitting_probability(&Model::Independent { r, s }, sim)?;
    let polar = 2.0 * nu >= 1.0;
    let passed = if polar {
        !rep.joint.positive_beyond(3.0) && rep.axis_r.positive_beyond(3.0) && rep.axis_s.positive_beyond(3.0)
    } else {
        rep.joint.positive_beyond(3.0)
    };
    Ok(proportion_metrics(Check::new(name, passed).metric("nu_sum", 2.0 * nu), &rep.joint)
        .metric("axis_r_hits", rep.axis_r.hits as f64)
        .metric("axis_s_hits", rep.axis_s.hits as f64)
        .metric("horizon", sim.horizon))
}

/// Univariate: the risk-free preset over 30 years is never hit, `nu = 0.5`
/// over 5 years is. Two factors: with `nu = 0.55` each, both axes are hit
/// but the origin is not; with `nu = 0.3` each the origin is hit.
pub fn feller(cfg: &FellerConfig) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    if let Some(nu) = cfg.nu {
        let p = factor_with_nu(nu)?;
        let horizon = if nu >= 1.0 { 30.0 } else { 5.0 };
        checks.push(univariate_hits("univariate", p, &cfg.sim.until(horizon))?);
    } else {
        let polar = presets::model1_2006().0.with_x0(presets::model1_2006().0.theta())?;
        checks.push(univariate_hits("univariate_polar", polar, &cfg.sim.until(30.0))?);
        checks.push(univariate_hits("univariate_hit", factor_with_nu(0.5)?, &cfg.sim.until(5.0))?);
        let short = SimConfig {
            step_h: 0.001,
            ..cfg.sim.until(0.5)
        };
        checks.push(multivariate_hits("origin_polar", 0.55, &short)?);
        checks.push(multivariate_hits("origin_hit", 0.3, &short)?);
    }
    Ok(SuiteReport {
        suite: Suite::Feller,
        checks,
    })
}

/// Monte Carlo bond prices of the degenerate model against the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub sim: SimConfig,
    pub tolerance_bp: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            sim: SimConfig {
                seed: 1,
                ..SimConfig::default()
            },
            tolerance_bp: 5.0,
        }
    }
}

pub fn mc_vs_closed_form(cfg: &McConfig) -> Result<SuiteReport> {
    let (pr, ps) = presets::model1_2006();
    let tenors = standard_tenors();
    let horizon = tenors.iter().copied().fold(0.0, f64::max);
    let prices = price_curve_mc(&Model::Adc(AdcParams::degenerate(pr, ps)), &cfg.sim.until(horizon), &tenors)?;
    let mut checks = Vec::new();
    for leg in [Leg::RiskFree, Leg::Risky] {
        let mut worst: f64 = 0.0;
        let mut worst_se: f64 = 0.0;
        for (q, &t) in prices.leg(leg).iter().zip(&tenors) {
            let exact = implied_rate(zcb_price_model1(&pr, &ps, pr.x0(), ps.x0(), t, leg)?, t);
            let gap = (implied_rate(q.value, t) - exact).abs() * 1e4;
            if gap > worst {
                worst = gap;
                worst_se = q.std_error / (q.value * t) * 1e4;
            }
        }
        let name = match leg {
            Leg::RiskFree => "riskfree_rates",
            Leg::Risky => "risky_rates",
        };
        checks.push(
            Check::new(name, worst <= cfg.tolerance_bp)
                .metric("max_gap_bp", worst)
                .metric("std_error_bp", worst_se),
        );
    }
    Ok(SuiteReport {
        suite: Suite::Mc,
        checks,
    })
}

/// Weighted sum of equal-kappa factors against the univariate law.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonConfig {
    pub factors: Vec<CirParams>,
    pub horizon: f64,
    pub sim: SimConfig,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        let f = |theta: f64, x0: f64| CirParams::new(0.5, theta, (2.0 * 0.5 * theta).sqrt(), x0).expect("valid factor");
        ComparisonConfig {
            factors: vec![f(0.04, 0.03), f(0.02, 0.01)],
            horizon: 2.0,
            sim: SimConfig {
                step_h: 0.001,
                n_paths: 100_000,
                seed: 1,
                ..SimConfig::default()
            },
        }
    }
}

pub fn comparison(cfg: &ComparisonConfig) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for (name, scheme) in [("euler", Scheme::Euler), ("exact", Scheme::Exact)] {
        let rep = comparison_sum_check(&cfg.factors, cfg.horizon, &cfg.sim, scheme)?;
        checks.push(ks_check(name, &rep.ks).metric("nu_sum", 2.0 * rep.reference.kappa() * rep.reference.theta()));
    }
    Ok(SuiteReport {
        suite: Suite::Comparison,
        checks,
    })
}

/// Runs a suite with its default configuration, overriding the seed and,
/// for the hitting suite, the index.
pub fn run(suite: Suite, seed: u64, nu: Option<f64>) -> Result<SuiteReport> {
    match suite {
        Suite::Stationarity => stationarity(&StationarityConfig {
            seed,
            ..Default::default()
        }),
        Suite::Decoupling => {
            let d = DecouplingConfig::default();
            decoupling(&DecouplingConfig {
                sim: SimConfig { seed, ..d.sim },
                ..d
            })
        }
        Suite::Reversibility => reversibility(&ReversibilityConfig {
            seed,
            ..Default::default()
        }),
        Suite::Feller => {
            let d = FellerConfig::default();
            feller(&FellerConfig {
                sim: SimConfig { seed, ..d.sim },
                nu,
            })
        }
        Suite::Mc => {
            let d = McConfig::default();
            mc_vs_closed_form(&McConfig {
                sim: SimConfig { seed, ..d.sim },
                ..d
            })
        }
        Suite::Comparison => {
            let d = ComparisonConfig::default();
            comparison(&ComparisonConfig {
                sim: SimConfig { seed, ..d.sim },
                ..d
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn factor_with_nu_hits_the_index() {
        for nu in [0.3, 0.5, 1.0, 2.5] {
            assert!((factor_with_nu(nu).unwrap().nu() - nu).abs() < 1e-12);
        }
        assert!(factor_with_nu(0.0).is_err());
    }

    #[test]
    fn random_sets_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_admissible(&mut rng).unwrap();
            assert!(p.gamma().powi(2) <= p.eps_r() * p.eps_s());
        }
    }

    #[test]
    fn reversibility_suite_is_fast_and_passes() {
        let rep = reversibility(&ReversibilityConfig::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn report_lines() {
        let rep = SuiteReport {
            suite: Suite::Mc,
            checks: vec![Check::new("x", true).metric("gap", 0.5)],
        };
        let mut out = Vec::new();
        rep.write_text(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "mc x PASS gap=5.000000e-1\n");
    }
}
