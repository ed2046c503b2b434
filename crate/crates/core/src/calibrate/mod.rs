//! Calibration to a risk-free and a risky zero curve.
//!
//! The objective is the sum of squared differences between model and
//! observed risk-free rates plus the same for spreads, over `tau = 1..30`.
//! Model 1 uses closed-form prices and is fitted in two steps (risk-free
//! factor first, then the spread factor). Model 2 uses Monte Carlo prices
//! with common random numbers and is fitted by simulated annealing started
//! from the model-1 fit, followed by a local polish.

pub mod optim;
mod report;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adc::AdcParams;
use crate::cir::CirParams;
use crate::error::{Error, Result};
use crate::fixtures::CurvePair;
use crate::mc::{price_curve_mc, Model, SimConfig};
use crate::pricing::{cir_zero_curve, implied_rate};

use optim::{anneal, levenberg_marquardt, powell, profile_polish, to_units, to_values, AnnealSchedule, Interval, LocalResult, LocalSearch, StageRecord, Tracked};
pub use report::{CalibrationReport, CurvatureEntry, ModelKind};

/// Parameter order of the model-2 search vector.
pub const PARAM_NAMES: [&str; 11] = [
    "r0", "kappa_r", "theta_r", "sigma_r", "s0", "kappa_s", "theta_s", "sigma_s", "eps_r", "eps_s", "rho",
];

/// Curvature below which a parameter is reported as weakly identified.
pub const FLAT_CURVATURE: f64 = 1e-6;

/// Calibration settings, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub seed: u64,
    /// Objective evaluations for the annealer (model 2) or for the Powell
    /// searches of both steps together (model 1). The model-1 profile
    /// polish runs on top of this.
    pub max_evaluations: usize,
    pub polish_evaluations: usize,
    /// Levenberg–Marquardt evaluations after the annealer's polish (model 2).
    pub lsq_evaluations: usize,
    pub tolerance: f64,
    pub multi_starts: usize,
    pub weight_riskfree: f64,
    pub weight_spread: f64,
    pub sa_initial_temperature: Option<f64>,
    pub sa_decay: f64,
    pub sa_steps_per_stage: usize,
    pub sa_reanneal_after: usize,
    pub sa_initial_width: f64,
    pub mc_step: f64,
    pub mc_paths: usize,
    pub mc_seed: u64,
    pub bound_r0: [f64; 2],
    pub bound_kappa_r: [f64; 2],
    pub bound_theta_r: [f64; 2],
    pub bound_sigma_r: [f64; 2],
    pub bound_s0: [f64; 2],
    pub bound_kappa_s: [f64; 2],
    pub bound_theta_s: [f64; 2],
    pub bound_sigma_s: [f64; 2],
    pub bound_eps_r: [f64; 2],
    pub bound_eps_s: [f64; 2],
    pub bound_rho: [f64; 2],
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            seed: 1,
            max_evaluations: 20_000,
            polish_evaluations: 2_000,
            lsq_evaluations: 12_000,
            tolerance: 1e-10,
            multi_starts: 6,
            weight_riskfree: 1.0,
            weight_spread: 1.0,
            sa_initial_temperature: None,
            sa_decay: 0.95,
            sa_steps_per_stage: 50,
            sa_reanneal_after: 5,
            sa_initial_width: 0.25,
            mc_step: crate::mc::DEFAULT_STEP,
            mc_paths: crate::mc::DEFAULT_PATHS,
            mc_seed: 1,
            bound_r0: [1e-4, 0.15],
            bound_kappa_r: [1e-3, 2.0],
            bound_theta_r: [1e-3, 0.2],
            bound_sigma_r: [1e-3, 0.3],
            bound_s0: [1e-6, 0.05],
            bound_kappa_s: [1e-2, 10.0],
            bound_theta_s: [1e-5, 0.05],
            bound_sigma_s: [1e-3, 0.3],
            bound_eps_r: [0.0, 1.0],
            bound_eps_s: [0.0, 1.0],
            bound_rho: [-1.0, 1.0],
        }
    }
}

impl CalibrationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CalibrationConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.sa_decay > 0.0 && self.sa_decay < 1.0) {
            return bad(format!("sa_decay must lie in (0, 1), got {}", self.sa_decay));
        }
        if self.max_evaluations == 0 || self.sa_steps_per_stage == 0 || self.multi_starts == 0 {
            return bad("evaluation budgets, stage length and start count must be positive".into());
        }
        if !(self.tolerance > 0.0) || !(self.weight_riskfree >= 0.0) || !(self.weight_spread >= 0.0) {
            return bad("tolerance must be positive and weights nonnegative".into());
        }
        if !(self.sa_initial_width > 0.0) {
            return bad("sa_initial_width must be positive".into());
        }
        for (i, b) in self.bounds().iter().enumerate() {
            let name = PARAM_NAMES[i];
            if !(b.lo < b.hi) || !b.lo.is_finite() || !b.hi.is_finite() {
                return bad(format!("bound_{name}: lower bound must be below upper bound"));
            }
            let ok = match i {
                0..=7 => b.lo > 0.0,
                8 | 9 => b.lo >= 0.0,
                _ => b.lo >= -1.0 && b.hi <= 1.0,
            };
            if !ok {
                return bad(format!("bound_{name} [{}, {}] is not admissible", b.lo, b.hi));
            }
        }
        self.sim_config(30.0).grid()?;
        Ok(())
    }

    /// Search box in [`PARAM_NAMES`] order.
    pub fn bounds(&self) -> Vec<Interval> {
        let pos = |b: [f64; 2]| Interval::log(b[0], b[1]);
        let lin = |b: [f64; 2]| Interval::linear(b[0], b[1]);
        vec![
            pos(self.bound_r0),
            pos(self.bound_kappa_r),
            pos(self.bound_theta_r),
            pos(self.bound_sigma_r),
            pos(self.bound_s0),
            pos(self.bound_kappa_s),
            pos(self.bound_theta_s),
            pos(self.bound_sigma_s),
            lin(self.bound_eps_r),
            lin(self.bound_eps_s),
            lin(self.bound_rho),
        ]
    }

    pub fn sim_config(&self, horizon: f64) -> SimConfig {
        SimConfig {
            step_h: self.mc_step,
            n_paths: self.mc_paths,
            horizon,
            seed: self.mc_seed,
            ..SimConfig::default()
        }
    }

    pub fn weights(&self) -> Weights {
        Weights {
            riskfree: self.weight_riskfree,
            spread: self.weight_spread,
        }
    }

    fn local_search(&self) -> LocalSearch {
        LocalSearch {
            tolerance: self.tolerance,
            ..LocalSearch::default()
        }
    }

    fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            initial_temperature: self.sa_initial_temperature,
            decay: self.sa_decay,
            steps_per_stage: self.sa_steps_per_stage,
            reanneal_after: self.sa_reanneal_after,
            initial_width: self.sa_initial_width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub riskfree: f64,
    pub spread: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            riskfree: 1.0,
            spread: 1.0,
        }
    }
}

/// Observed risk-free rates and spreads on a common tenor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub tenors: Vec<f64>,
    pub riskfree: Vec<f64>,
    pub spreads: Vec<f64>,
    pub weights: Weights,
}

impl Target {
    pub fn new(curves: &CurvePair, weights: Weights) -> Result<Self> {
        Ok(Target {
            tenors: curves.tenors().to_vec(),
            riskfree: curves.riskfree.zero_rates.clone(),
            spreads: curves.spreads()?,
            weights,
        })
    }

    fn riskfree_term(&self, model: &[f64]) -> f64 {
        self.weights.riskfree * model.iter().zip(&self.riskfree).map(|(m, o)| (m - o).powi(2)).sum::<f64>()
    }

    fn spread_term(&self, model: &[f64]) -> f64 {
        self.weights.spread * model.iter().zip(&self.spreads).map(|(m, o)| (m - o).powi(2)).sum::<f64>()
    }

    /// Weighted sum of squared rate and spread differences.
    pub fn misfit(&self, riskfree: &[f64], spreads: &[f64]) -> f64 {
        self.riskfree_term(riskfree) + self.spread_term(spreads)
    }
}

/// Model-1 risk-free rates and spreads from the factors' current states.
pub fn model1_rates(pr: &CirParams, ps: &CirParams, tenors: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((cir_zero_curve(pr, pr.x0(), tenors)?, cir_zero_curve(ps, ps.x0(), tenors)?))
}

/// Model-2 risk-free rates and spreads from Monte Carlo prices.
pub fn model2_rates(p: &AdcParams, mc: &SimConfig, tenors: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let horizon = tenors.iter().copied().fold(0.0, f64::max);
    let prices = price_curve_mc(&Model::Adc(*p), &SimConfig { horizon, ..*mc }, tenors)?;
    let rf: Vec<f64> = prices.risk_free.iter().zip(tenors).map(|(q, &t)| implied_rate(q.value, t)).collect();
    let sp: Vec<f64> = prices
        .risky
        .iter()
        .zip(tenors)
        .zip(&rf)
        .map(|((q, &t), r)| implied_rate(q.value, t) - r)
        .collect();
    Ok((rf, sp))
}

/// Closed-form objective of the independent two-factor model; the current
/// states are the factors' `x0`.
pub fn objective_model1(pr: &CirParams, ps: &CirParams, target: &Target) -> Result<f64> {
    let (rf, sp) = model1_rates(pr, ps, &target.tenors)?;
    Ok(target.misfit(&rf, &sp))
}

/// Monte Carlo objective of the correlated model. The seed inside `mc` is
/// reused for every evaluation.
pub fn objective_model2(p: &AdcParams, target: &Target, mc: &SimConfig) -> Result<f64> {
    let (rf, sp) = model2_rates(p, mc, &target.tenors)?;
    Ok(target.misfit(&rf, &sp))
}

/// Builds model-2 parameters from a [`PARAM_NAMES`] vector, with
/// `gamma = rho sqrt(eps_r eps_s)`.
pub fn params_from_vector(x: &[f64]) -> Result<AdcParams> {
    let r = CirParams::new(x[1], x[2], x[3], x[0])?;
    let s = CirParams::new(x[5], x[6], x[7], x[4])?;
    let (eps_r, eps_s, rho) = (x[8], x[9], x[10].clamp(-1.0, 1.0));
    AdcParams::new(r, s, eps_r, eps_s, rho * (eps_r * eps_s).sqrt())
}

pub fn params_to_vector(p: &AdcParams) -> Vec<f64> {
    let (r, s) = (p.r(), p.s());
    let bound = (p.eps_r() * p.eps_s()).sqrt();
    let rho = if bound > 0.0 { (p.gamma() / bound).clamp(-1.0, 1.0) } else { 0.0 };
    vec![
        r.x0(),
        r.kappa(),
        r.theta(),
        r.sigma(),
        s.x0(),
        s.kappa(),
        s.theta(),
        s.sigma(),
        p.eps_r(),
        p.eps_s(),
        rho,
    ]
}

fn cir_from(v: &[f64]) -> Result<CirParams> {
    CirParams::new(v[1], v[2], v[3], v[0])
}

struct StepOutcome {
    x: Vec<f64>,
    f: f64,
    evals: usize,
    converged: bool,
    best_path: Vec<f64>,
}

/// Multi-start Powell over one factor `(x0, kappa, theta, sigma)`, then a
/// least-squares polish of the best start. `residuals` maps parameter
/// values to weighted rate differences.
fn fit_factor(
    bounds: &[Interval],
    residuals: &dyn Fn(&[f64]) -> Option<Vec<f64>>,
    cfg: &CalibrationConfig,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> StepOutcome {
    let n = bounds.len();
    let per_start = (budget / (cfg.multi_starts + 1)).max(1);
    let mut starts = vec![vec![0.5; n]];
    for _ in 1..cfg.multi_starts {
        starts.push((0..n).map(|_| rng.random::<f64>()).collect());
    }
    let mut unit_f = |u: &[f64]| residuals(&to_values(bounds, u)).map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum());
    let mut best: Option<LocalResult> = None;
    let mut evals = 0;
    let mut best_path = Vec::new();
    for s in &starts {
        let mut obj = Tracked::new(&mut unit_f, per_start);
        let mut res = powell(&mut obj, s, &cfg.local_search());
        // restart with a fresh basis until a restart no longer helps
        while !obj.exhausted() {
            let again = powell(&mut obj, &res.x, &cfg.local_search());
            let done = !(res.f - again.f > cfg.tolerance * res.f.abs());
            res = again;
            if done {
                break;
            }
        }
        evals += obj.evals;
        let prev = best.as_ref().map_or(f64::INFINITY, |b| b.f);
        best_path.extend(obj.best_path.iter().map(|v| v.min(prev)));

        // volatility is the weakly identified coordinate
        let mut polish_path = Vec::new();
        let floor = res.f.min(prev);
        let mut unit_r = |u: &[f64]| {
            let r = residuals(&to_values(bounds, u));
            let f = r.as_ref().map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum());
            polish_path.push(polish_path.last().copied().unwrap_or(floor).min(f));
            r
        };
        let profiled = profile_polish(&mut unit_r, &res.x, n - 1, 2000, 200);
        evals += polish_path.len();
        best_path.extend(polish_path);
        if profiled.f < res.f {
            res = LocalResult {
                converged: profiled.converged || res.converged,
                ..profiled
            };
        }
        if res.f < prev {
            best = Some(res);
        }
    }
    let best = best.expect("at least one start");
    StepOutcome {
        x: to_values(bounds, &best.x),
        f: best.f,
        evals,
        converged: best.converged,
        best_path,
    }
}

/// Two-step fit of the independent model: the risk-free factor to the
/// risk-free curve, then the spread factor to the spreads with the
/// risk-free factor frozen.
pub fn calibrate_model1(curves: &CurvePair, cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    let target = Target::new(curves, cfg.weights())?;
    let bounds = cfg.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let budget = (cfg.max_evaluations / 2).max(1);

    let w_r = target.weights.riskfree.sqrt();
    let r_r = |v: &[f64]| {
        let rates = cir_from(v).and_then(|p| cir_zero_curve(&p, p.x0(), &target.tenors)).ok()?;
        Some(rates.iter().zip(&target.riskfree).map(|(m, o)| w_r * (m - o)).collect())
    };
    let step1 = fit_factor(&bounds[0..4], &r_r, cfg, budget, &mut rng);
    let pr = cir_from(&step1.x)?;

    let w_s = target.weights.spread.sqrt();
    let r_s = |v: &[f64]| {
        let rates = cir_from(v).and_then(|p| cir_zero_curve(&p, p.x0(), &target.tenors)).ok()?;
        Some(rates.iter().zip(&target.spreads).map(|(m, o)| w_s * (m - o)).collect())
    };
    let step2 = fit_factor(&bounds[4..8], &r_s, cfg, budget, &mut rng);
    let ps = cir_from(&step2.x)?;

    let params = AdcParams::degenerate(pr, ps);
    let objective = objective_model1(&pr, &ps, &target)?;
    // total objective: the spread term sits at its first evaluation until
    // the second step starts
    let spread_start = step2.best_path.first().copied().unwrap_or(0.0);
    let mut best_path: Vec<f64> = step1.best_path.iter().map(|v| v + spread_start).collect();
    best_path.extend(step2.best_path.iter().map(|v| v + step1.f));
    let curvature = curvature_diagnostic(
        &mut |x: &[f64]| match (cir_from(&x[0..4]), cir_from(&x[4..8])) {
            (Ok(a), Ok(b)) => objective_model1(&a, &b, &target).unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        },
        &params_to_vector(&params)[..8],
        &bounds[..8],
    );
    let (rf, sp) = model1_rates(&pr, &ps, &target.tenors)?;
    Ok(CalibrationReport::new(
        ModelKind::Model1,
        params,
        objective,
        &target,
        &rf,
        &sp,
        step1.evals + step2.evals,
        step1.converged && step2.converged,
        Vec::new(),
        best_path,
        curvature,
        cfg.seed,
    ))
}

/// Simulated-annealing fit of the correlated model, started from the
/// model-1 fit with zero correlation strengths.
pub fn calibrate_model2(curves: &CurvePair, cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    let start = calibrate_model1(curves, cfg)?;
    calibrate_model2_from(curves, cfg, &start.params)
}

/// Simulated-annealing fit from an explicit starting point.
pub fn calibrate_model2_from(curves: &CurvePair, cfg: &CalibrationConfig, start: &AdcParams) -> Result<CalibrationReport> {
    cfg.validate()?;
    let target = Target::new(curves, cfg.weights())?;
    let bounds = cfg.bounds();
    let mc = cfg.sim_config(target.tenors.iter().copied().fold(0.0, f64::max));
    let mut f = |x: &[f64]| {
        params_from_vector(x)
            .and_then(|p| objective_model2(&p, &target, &mc))
            .unwrap_or(f64::INFINITY)
    };
    let x0 = to_units(&bounds, &params_to_vector(start));
    let mut unit_f = |u: &[f64]| f(&to_values(&bounds, u));

    let mut sa_obj = Tracked::new(&mut unit_f, cfg.max_evaluations);
    let sa = anneal(&mut sa_obj, &x0, &cfg.schedule(), cfg.seed);
    let mut evals = sa_obj.evals;
    let mut best_path = sa_obj.best_path.clone();
    let stages: Vec<StageRecord> = sa.stages;

    let mut polish_obj = Tracked::new(&mut unit_f, cfg.polish_evaluations.max(1));
    let polish = powell(&mut polish_obj, &sa.x, &cfg.local_search());
    evals += polish_obj.evals;
    let sa_floor = best_path.last().copied().unwrap_or(f64::INFINITY);
    best_path.extend(polish_obj.best_path.iter().map(|v| v.min(sa_floor)));

    let (mut u_best, mut f_best, mut converged) = if polish.f < sa.f {
        (polish.x, polish.f, polish.converged)
    } else {
        (sa.x, sa.f, false)
    };

    // common random numbers keep the Monte Carlo residuals smooth enough
    // for a finite-difference least-squares finish, run from the annealer's
    // result and from its starting point
    if cfg.lsq_evaluations > 0 {
        let (w_r, w_s) = (target.weights.riskfree.sqrt(), target.weights.spread.sqrt());
        let mut origins = vec![u_best.clone()];
        if x0 != u_best {
            origins.push(x0.clone());
        }
        for origin in origins {
            let mut lsq_path = Vec::new();
            let floor = best_path.last().copied().unwrap_or(f_best).min(f_best);
            let mut unit_r = |u: &[f64]| {
                let r: Option<Vec<f64>> = params_from_vector(&to_values(&bounds, u))
                    .and_then(|p| model2_rates(&p, &mc, &target.tenors))
                    .ok()
                    .map(|(rf, sp)| {
                        rf.iter()
                            .zip(&target.riskfree)
                            .map(|(m, o)| w_r * (m - o))
                            .chain(sp.iter().zip(&target.spreads).map(|(m, o)| w_s * (m - o)))
                            .collect()
                    });
                let f = r.as_ref().map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum());
                lsq_path.push(lsq_path.last().copied().unwrap_or(floor).min(f));
                r
            };
            let lsq = levenberg_marquardt(&mut unit_r, &origin, cfg.lsq_evaluations);
            evals += lsq_path.len();
            best_path.extend(lsq_path);
            if lsq.f < f_best {
                (u_best, f_best, converged) = (lsq.x, lsq.f, lsq.converged);
            }
        }
    }
    let x_best = to_values(&bounds, &u_best);
    let params = params_from_vector(&x_best)?;
    let curvature = curvature_diagnostic(&mut f, &x_best, &bounds);
    let (rf, sp) = model2_rates(&params, &mc, &target.tenors)?;
    Ok(CalibrationReport::new(
        ModelKind::Model2,
        params,
        target.misfit(&rf, &sp),
        &target,
        &rf,
        &sp,
        evals,
        converged,
        stages,
        best_path,
        curvature,
        cfg.seed,
    ))
}

/// Finite-difference second derivative of `f` along each coordinate,
/// one-sided at the faces of the box.
pub fn curvature_diagnostic(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], bounds: &[Interval]) -> Vec<CurvatureEntry> {
    let f0 = f(x);
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let b = bounds[i];
        let h = if b.log { 1e-4 * x[i] } else { 1e-4 * (b.hi - b.lo) };
        let at = |f: &mut dyn FnMut(&[f64]) -> f64, d: f64| {
            let mut y = x.to_vec();
            y[i] += d;
            f(&y)
        };
        let value = if x[i] - h >= b.lo && x[i] + h <= b.hi {
            (at(f, h) - 2.0 * f0 + at(f, -h)) / (h * h)
        } else if x[i] - h < b.lo {
            (f0 - 2.0 * at(f, h) + at(f, 2.0 * h)) / (h * h)
        } else {
            (f0 - 2.0 * at(f, -h) + at(f, -2.0 * h)) / (h * h)
        };
        out.push(CurvatureEntry {
            name: PARAM_NAMES[i].to_string(),
            value,
            flagged: !(value.abs() >= FLAT_CURVATURE),
        });
    }
    out
}
