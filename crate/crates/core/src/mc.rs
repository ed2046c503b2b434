//! Euler–Maruyama simulation of the one- and two-factor models, Monte Carlo
//! zero-coupon pricing with Simpson-rule discounting, origin hitting and
//! empirical distributions.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, path index)`, so a
//! path's trajectory does not depend on how many other paths are simulated
//! or on the number of worker threads. Boundary handling is full truncation:
//! drift and diffusion are evaluated at the nonnegative part of the state
//! and the updated state is clamped at zero.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adc::{AdcParams, StateVector};
use crate::cir::CirParams;
use crate::error::{Error, Result};
use crate::pricing::Leg;
use crate::stats::{freedman_diaconis_bins, mean_and_std_error, uniform_edges, Histogram1D, Histogram2D, KsOutcome, Proportion};

pub const DEFAULT_STEP: f64 = 0.004;
pub const DEFAULT_PATHS: usize = 5000;
pub const DEFAULT_DELTA: f64 = 1e-6;
/// Cap on histogram bins per axis.
pub const MAX_BINS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Cir(CirParams),
    /// Two independent factors.
    Independent { r: CirParams, s: CirParams },
    Adc(AdcParams),
}

impl Model {
    pub fn is_univariate(&self) -> bool {
        matches!(self, Model::Cir(_))
    }

    pub fn initial_state(&self) -> StateVector {
        match self {
            Model::Cir(p) => StateVector { r: p.x0(), s: 0.0 },
            Model::Independent { r, s } => StateVector { r: r.x0(), s: s.x0() },
            Model::Adc(p) => p.initial_state(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub step_h: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub boundary_delta: f64,
    /// Keep every `record_stride`-th grid instant in a [`PathBatch`].
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step_h: DEFAULT_STEP,
            n_paths: DEFAULT_PATHS,
            horizon: 30.0,
            seed: 0,
            boundary_delta: DEFAULT_DELTA,
            record_stride: 1,
        }
    }
}

/// Uniform time grid with an even number of steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub steps: usize,
}

impl Grid {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Grid index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.h;
        let k = x.round();
        if k >= 0.0 && (x - k).abs() <= 1e-7 * k.max(1.0) && (k as usize) <= self.steps {
            Some(k as usize)
        } else {
            None
        }
    }
}

impl SimConfig {
    /// This configuration over a different horizon.
    pub fn until(&self, horizon: f64) -> Self {
        SimConfig { horizon, ..*self }
    }

    pub fn with_horizon(horizon: f64) -> Self {
        SimConfig {
            horizon,
            ..SimConfig::default()
        }
    }

    /// Grid with an even step count, shrinking `step_h` minimally when
    /// `horizon / step_h` is not an even integer.
    pub fn grid(&self) -> Result<Grid> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.step_h > 0.0) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {}", self.step_h)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("path count must be positive".into()));
        }
        if !(self.boundary_delta >= 0.0) {
            return Err(Error::InvalidConfig("boundary delta must be nonnegative".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record stride must be positive".into()));
        }
        let raw = self.horizon / self.step_h;
        let mut steps = if (raw - raw.round()).abs() <= 1e-9 * raw.max(1.0) {
            raw.round()
        } else {
            raw.ceil()
        } as usize;
        steps = steps.max(2);
        if steps % 2 == 1 {
            steps += 1;
        }
        Ok(Grid {
            h: self.horizon / steps as f64,
            steps,
        })
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Steps a single path forward.
pub struct PathStepper<'a> {
    model: &'a Model,
    rng: ChaCha8Rng,
    h: f64,
    sqrt_h: f64,
    pub state: StateVector,
}

impl<'a> PathStepper<'a> {
    pub fn new(model: &'a Model, seed: u64, path: usize, h: f64) -> Self {
        PathStepper {
            model,
            rng: path_rng(seed, path),
            h,
            sqrt_h: h.sqrt(),
            state: model.initial_state(),
        }
    }

    #[inline]
    pub fn step(&mut self) -> StateVector {
        let StateVector { r, s } = self.state;
        let (h, sqrt_h) = (self.h, self.sqrt_h);
        self.state = match self.model {
            Model::Cir(p) => {
                let z: f64 = self.rng.sample(StandardNormal);
                let a = p.kappa() * (p.theta() - r);
                let b = (p.sigma().powi(2) * r).sqrt();
                StateVector {
                    r: (r + a * h + sqrt_h * (b * z)).max(0.0),
                    s: 0.0,
                }
            }
            Model::Independent { r: pr, s: ps } => {
                let z1: f64 = self.rng.sample(StandardNormal);
                let z2: f64 = self.rng.sample(StandardNormal);
                let a1 = pr.kappa() * (pr.theta() - r);
                let a2 = ps.kappa() * (ps.theta() - s);
                let b1 = (pr.sigma().powi(2) * r).sqrt();
                let b2 = (ps.sigma().powi(2) * s).sqrt();
                StateVector {
                    r: (r + a1 * h + sqrt_h * (b1 * z1)).max(0.0),
                    s: (s + a2 * h + sqrt_h * (b2 * z2)).max(0.0),
                }
            }
            Model::Adc(p) => {
                let z1: f64 = self.rng.sample(StandardNormal);
                let z2: f64 = self.rng.sample(StandardNormal);
                let a = p.drift_at(r, s);
                let l = p.diffusion_at(r, s).cholesky();
                StateVector {
                    r: (r + a[0] * h + sqrt_h * (l.l11 * z1)).max(0.0),
                    s: (s + a[1] * h + sqrt_h * (l.l21 * z1 + l.l22 * z2)).max(0.0),
                }
            }
        };
        self.state
    }
}

/// Below-threshold test used for hit flags.
#[derive(Debug, Clone, Copy, Default)]
struct HitTracker {
    joint: bool,
    axis_r: bool,
    axis_s: bool,
}

impl HitTracker {
    #[inline]
    fn observe(&mut self, x: StateVector, delta: f64, univariate: bool) {
        let r_low = x.r < delta;
        let s_low = x.s < delta;
        self.axis_r |= r_low;
        self.axis_s |= s_low && !univariate;
        self.joint |= if univariate { r_low } else { r_low && s_low };
    }
}

/// Recorded trajectories of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    /// Recorded instants.
    pub times: Vec<f64>,
    /// Grid step index of every recorded instant.
    pub steps: Vec<usize>,
    /// `states[path * times.len() + i]`.
    pub states: Vec<StateVector>,
    pub hit_flags: Vec<bool>,
    pub n_paths: usize,
    pub seed: u64,
    pub step_h: f64,
    pub univariate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    R,
    S,
    Joint,
}

impl PathBatch {
    pub fn state(&self, path: usize, record: usize) -> StateVector {
        self.states[path * self.times.len() + record]
    }

    pub fn record_index(&self, t: f64) -> Result<usize> {
        let k = Grid {
            h: self.step_h,
            steps: usize::MAX,
        }
        .index_of(t)
        .ok_or(Error::OffGrid { t })?;
        self.steps.binary_search(&k).map_err(|_| Error::OffGrid { t })
    }

    /// Cross-section of one component at time `t`.
    pub fn values_at(&self, t: f64, component: Component) -> Result<Vec<f64>> {
        let i = self.record_index(t)?;
        Ok((0..self.n_paths)
            .map(|p| {
                let x = self.state(p, i);
                match component {
                    Component::S => x.s,
                    _ => x.r,
                }
            })
            .collect())
    }

    /// CSV with header `path,step,t,r,s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "step", "t", "r", "s"])?;
        for p in 0..self.n_paths {
            for (i, (&k, &t)) in self.steps.iter().zip(&self.times).enumerate() {
                let x = self.state(p, i);
                w.write_record(&[p.to_string(), k.to_string(), fmt(t), fmt(x.r), fmt(x.s)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal, in exponent form for very small or large
/// magnitudes.
pub(crate) fn fmt(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Full trajectories, thinned by `cfg.record_stride`.
pub fn simulate(model: &Model, cfg: &SimConfig) -> Result<PathBatch> {
    let grid = cfg.grid()?;
    let steps: Vec<usize> = (0..=grid.steps).step_by(cfg.record_stride).collect();
    let univariate = model.is_univariate();
    let per_path: Vec<(Vec<StateVector>, bool)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut stepper = PathStepper::new(model, cfg.seed, p, grid.h);
            let mut hits = HitTracker::default();
            let mut rec = Vec::with_capacity(steps.len());
            rec.push(stepper.state);
            hits.observe(stepper.state, cfg.boundary_delta, univariate);
            for k in 1..=grid.steps {
                let x = stepper.step();
                hits.observe(x, cfg.boundary_delta, univariate);
                if k % cfg.record_stride == 0 {
                    rec.push(x);
                }
            }
            (rec, hits.joint)
        })
        .collect();
    let mut states = Vec::with_capacity(cfg.n_paths * steps.len());
    let mut hit_flags = Vec::with_capacity(cfg.n_paths);
    for (rec, hit) in per_path {
        states.extend(rec);
        hit_flags.push(hit);
    }
    Ok(PathBatch {
        times: steps.iter().map(|&k| grid.time(k)).collect(),
        steps,
        states,
        hit_flags,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        step_h: grid.h,
        univariate,
    })
}

/// Cross-sections at the requested instants without storing whole paths.
/// Result is indexed `[time][path]`.
pub fn sample_states_at(model: &Model, cfg: &SimConfig, times: &[f64]) -> Result<Vec<Vec<StateVector>>> {
    let grid = cfg.grid()?;
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| grid.index_of(t).ok_or(Error::OffGrid { t }))
        .collect::<Result<_>>()?;
    let last = idx.iter().copied().max().unwrap_or(0);
    let per_path: Vec<Vec<StateVector>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut stepper = PathStepper::new(model, cfg.seed, p, grid.h);
            let mut out = vec![stepper.state; idx.len()];
            for k in 1..=last {
                let x = stepper.step();
                for (slot, &want) in out.iter_mut().zip(&idx) {
                    if want == k {
                        *slot = x;
                    }
                }
            }
            out
        })
        .collect();
    Ok((0..idx.len()).map(|i| per_path.iter().map(|v| v[i]).collect()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McPrice {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl McPrice {
    /// Continuously compounded zero rate implied by the price.
    pub fn zero_rate(&self, tau: f64) -> f64 {
        -self.value.ln() / tau
    }
}

/// Monte Carlo prices of both legs at several maturities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePrices {
    pub tenors: Vec<f64>,
    pub risk_free: Vec<McPrice>,
    pub risky: Vec<McPrice>,
}

impl CurvePrices {
    pub fn leg(&self, leg: Leg) -> &[McPrice] {
        match leg {
            Leg::RiskFree => &self.risk_free,
            Leg::Risky => &self.risky,
        }
    }
}

/// Monte Carlo zero-coupon prices: per path the discount integral is the
/// Simpson rule over the simulation grid.
pub fn price_curve_mc(model: &Model, cfg: &SimConfig, tenors: &[f64]) -> Result<CurvePrices> {
    let grid = cfg.grid()?;
    let mut idx = Vec::with_capacity(tenors.len());
    for &t in tenors {
        if !(t >= 0.0) || t > cfg.horizon * (1.0 + 1e-12) {
            return Err(Error::Domain {
                what: "maturity",
                expected: "within [0, horizon]",
                value: t,
            });
        }
        let k = grid.index_of(t).ok_or(Error::OffGrid { t })?;
        if k % 2 == 1 {
            return Err(Error::OddIntervals { intervals: k });
        }
        idx.push(k);
    }
    let last = idx.iter().copied().max().unwrap_or(0);
    let h3 = grid.h / 3.0;
    // per path: [rf_0, risky_0, rf_1, risky_1, ...]
    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut stepper = PathStepper::new(model, cfg.seed, p, grid.h);
            let mut out = vec![1.0; 2 * idx.len()];
            let mut int_r = 0.0;
            let mut int_rs = 0.0;
            let mut x0 = stepper.state;
            let mut x1 = x0;
            for k in 1..=last {
                let x = stepper.step();
                if k % 2 == 0 {
                    int_r += h3 * (x0.r + 4.0 * x1.r + x.r);
                    int_rs += h3 * ((x0.r + x0.s) + 4.0 * (x1.r + x1.s) + (x.r + x.s));
                    for (j, &want) in idx.iter().enumerate() {
                        if want == k {
                            out[2 * j] = (-int_r).exp();
                            out[2 * j + 1] = (-int_rs).exp();
                        }
                    }
                    x0 = x;
                } else {
                    x1 = x;
                }
            }
            out
        })
        .collect();
    let summarize = |col: usize| {
        let xs: Vec<f64> = per_path.iter().map(|v| v[col]).collect();
        let (value, std_error) = mean_and_std_error(&xs);
        McPrice {
            value,
            std_error,
            n_paths: cfg.n_paths,
        }
    };
    Ok(CurvePrices {
        tenors: tenors.to_vec(),
        risk_free: (0..idx.len()).map(|j| summarize(2 * j)).collect(),
        risky: (0..idx.len()).map(|j| summarize(2 * j + 1)).collect(),
    })
}

pub fn price_zcb_mc(model: &Model, cfg: &SimConfig, maturity: f64, leg: Leg) -> Result<McPrice> {
    if maturity == 0.0 {
        cfg.grid()?;
        return Ok(McPrice {
            value: 1.0,
            std_error: 0.0,
            n_paths: cfg.n_paths,
        });
    }
    let prices = price_curve_mc(model, cfg, &[maturity])?;
    Ok(prices.leg(leg)[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitReport {
    /// Paths that came within `delta` of the origin (both components for
    /// two-factor models).
    pub joint: Proportion,
    pub axis_r: Proportion,
    pub axis_s: Proportion,
    pub delta: f64,
}

pub fn hitting_probability(model: &Model, cfg: &SimConfig) -> Result<HitReport> {
    let grid = cfg.grid()?;
    let univariate = model.is_univariate();
    let flags: Vec<HitTracker> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut stepper = PathStepper::new(model, cfg.seed, p, grid.h);
            let mut hits = HitTracker::default();
            hits.observe(stepper.state, cfg.boundary_delta, univariate);
            for _ in 0..grid.steps {
                let x = stepper.step();
                hits.observe(x, cfg.boundary_delta, univariate);
                if hits.joint && hits.axis_r && (hits.axis_s || univariate) {
                    break;
                }
            }
            hits
        })
        .collect();
    let count = |f: fn(&HitTracker) -> bool| Proportion {
        hits: flags.iter().filter(|h| f(h)).count(),
        trials: cfg.n_paths,
    };
    Ok(HitReport {
        joint: count(|h| h.joint),
        axis_r: count(|h| h.axis_r),
        axis_s: count(|h| h.axis_s),
        delta: cfg.boundary_delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Distribution {
    OneD(Histogram1D),
    TwoD(Histogram2D),
}

impl Distribution {
    pub fn total_mass(&self) -> f64 {
        match self {
            Distribution::OneD(h) => h.masses.iter().sum(),
            Distribution::TwoD(h) => h.masses.iter().sum(),
        }
    }

    /// CSV `bin_lo,bin_hi,mass` or `r_lo,r_hi,s_lo,s_hi,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self {
            Distribution::OneD(h) => {
                w.write_record(["bin_lo", "bin_hi", "mass"])?;
                for (e, m) in h.edges.windows(2).zip(&h.masses) {
                    w.write_record(&[fmt(e[0]), fmt(e[1]), fmt(*m)])?;
                }
            }
            Distribution::TwoD(h) => {
                w.write_record(["r_lo", "r_hi", "s_lo", "s_hi", "mass"])?;
                let (_, ns) = h.shape();
                for (i, re) in h.r_edges.windows(2).enumerate() {
                    for (j, se) in h.s_edges.windows(2).enumerate() {
                        w.write_record(&[fmt(re[0]), fmt(re[1]), fmt(se[0]), fmt(se[1]), fmt(h.masses[i * ns + j])])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Normalized histogram of the batch at time `t`.
pub fn empirical_distribution(batch: &PathBatch, t: f64, component: Component) -> Result<Distribution> {
    match component {
        Component::Joint => {
            let rs = batch.values_at(t, Component::R)?;
            let ss = batch.values_at(t, Component::S)?;
            Ok(Distribution::TwoD(Histogram2D::from_samples(&rs, &ss, MAX_BINS)?))
        }
        c => Ok(Distribution::OneD(Histogram1D::from_samples(&batch.values_at(t, c)?, MAX_BINS)?)),
    }
}

/// Joint masses of two models at one instant on shared edges.
#[derive(Debug, Clone, PartialEq)]
pub struct JointComparison {
    pub t: f64,
    pub first: Histogram2D,
    pub second: Histogram2D,
}

impl JointComparison {
    /// `first - second` per cell, in the row-major order of the edges.
    pub fn difference(&self) -> Vec<f64> {
        self.first.masses.iter().zip(&self.second.masses).map(|(a, b)| a - b).collect()
    }

    /// CSV `r_lo,r_hi,s_lo,s_hi,first,second,difference`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r_lo", "r_hi", "s_lo", "s_hi", "first", "second", "difference"])?;
        let (_, ns) = self.first.shape();
        let diff = self.difference();
        for (i, re) in self.first.r_edges.windows(2).enumerate() {
            for (j, se) in self.first.s_edges.windows(2).enumerate() {
                let k = i * ns + j;
                w.write_record(&[
                    fmt(re[0]),
                    fmt(re[1]),
                    fmt(se[0]),
                    fmt(se[1]),
                    fmt(self.first.masses[k]),
                    fmt(self.second.masses[k]),
                    fmt(diff[k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates both models to `t` with the same configuration and bins the
/// two joint laws on edges covering both samples.
pub fn joint_comparison(first: &Model, second: &Model, cfg: &SimConfig, t: f64) -> Result<JointComparison> {
    if first.is_univariate() || second.is_univariate() {
        return Err(Error::InvalidConfig("joint comparison needs two-factor models".into()));
    }
    let cfg = cfg.until(t);
    let a = sample_states_at(first, &cfg, &[t])?;
    let b = sample_states_at(second, &cfg, &[t])?;
    let pick = |v: &[Vec<StateVector>], f: fn(&StateVector) -> f64| v[0].iter().map(f).collect::<Vec<f64>>();
    let (ra, sa) = (pick(&a, |x| x.r), pick(&a, |x| x.s));
    let (rb, sb) = (pick(&b, |x| x.r), pick(&b, |x| x.s));
    let all_r: Vec<f64> = ra.iter().chain(&rb).copied().collect();
    let all_s: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    let r_edges = uniform_edges(&all_r, freedman_diaconis_bins(&all_r, MAX_BINS));
    let s_edges = uniform_edges(&all_s, freedman_diaconis_bins(&all_s, MAX_BINS));
    Ok(JointComparison {
        t,
        first: Histogram2D::on_grid(&ra, &sa, r_edges.clone(), s_edges.clone()),
        second: Histogram2D::on_grid(&rb, &sb, r_edges, s_edges),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Law the weighted sum should follow: `kappa`, `theta = nu/(2 kappa)`,
    /// `sigma = 1`, started at `z0 = sum x0_i / sigma_i^2`.
    pub reference: CirParams,
    pub ks: KsOutcome,
    pub samples: Vec<f64>,
}

impl ComparisonReport {
    pub fn mass_below(&self, z: f64) -> f64 {
        self.samples.iter().filter(|&&v| v < z).count() as f64 / self.samples.len() as f64
    }
}

/// Simulates independent factors with a common `kappa` and compares the law
/// of `Z_t = sum X_i / sigma_i^2` with the CIR transition law of
/// `(kappa, sum nu_i / (2 kappa), 1)` from `z0`.
pub fn comparison_sum_check(factors: &[CirParams], t: f64, cfg: &SimConfig, scheme: Scheme) -> Result<ComparisonReport> {
    if factors.is_empty() {
        return Err(Error::InvalidConfig("no factors".into()));
    }
    let kappa = factors[0].kappa();
    if factors.iter().any(|f| f.kappa() != kappa) {
        return Err(Error::UnequalKappas);
    }
    let nu: f64 = factors.iter().map(|f| f.nu()).sum();
    let z0: f64 = factors.iter().map(|f| f.x0() / f.sigma().powi(2)).sum();
    let reference = CirParams::new(kappa, nu / (2.0 * kappa), 1.0, z0)?;
    let cfg = SimConfig { horizon: t, ..*cfg };
    let grid = cfg.grid()?;
    let samples: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let mut xs: Vec<f64> = factors.iter().map(|f| f.x0()).collect();
            match scheme {
                Scheme::Exact => {
                    for (x, f) in xs.iter_mut().zip(factors) {
                        *x = f.sample_exact(*x, t, &mut rng).expect("positive horizon");
                    }
                }
                Scheme::Euler => {
                    let (h, sqrt_h) = (grid.h, grid.h.sqrt());
                    for _ in 0..grid.steps {
                        for (x, f) in xs.iter_mut().zip(factors) {
                            let z: f64 = rng.sample(StandardNormal);
                            let a = f.kappa() * (f.theta() - *x);
                            let b = (f.sigma().powi(2) * *x).sqrt();
                            *x = (*x + a * h + sqrt_h * (b * z)).max(0.0);
                        }
                    }
                }
            }
            xs.iter().zip(factors).map(|(x, f)| x / f.sigma().powi(2)).sum()
        })
        .collect();
    let ks = KsOutcome::new(&samples, |z| reference.transition_cdf(t, z.max(0.0)).unwrap_or(0.0), 0.01);
    Ok(ComparisonReport {
        reference,
        ks,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model1() -> (CirParams, CirParams) {
        (
            CirParams::new(0.0398, 0.0544, 0.0455, 0.0346).unwrap(),
            CirParams::new(4.0049, 0.0029, 0.0258, 0.0004).unwrap(),
        )
    }

    #[test]
    fn grid_normalization_shrinks_step_to_even_count() {
        let cfg = SimConfig {
            horizon: 1.0,
            step_h: 0.3,
            ..SimConfig::default()
        };
        let g = cfg.grid().unwrap();
        assert_eq!(g.steps, 4);
        assert!(g.h <= 0.3);
        let g = SimConfig::with_horizon(30.0).grid().unwrap();
        assert_eq!(g.steps, 7500);
        let g = SimConfig {
            horizon: 0.012,
            step_h: 0.004,
            ..SimConfig::default()
        }
        .grid()
        .unwrap();
        assert_eq!(g.steps, 4);
        assert!(SimConfig::with_horizon(0.0).grid().is_err());
        assert!(SimConfig::with_horizon(-1.0).grid().is_err());
    }

    #[test]
    fn degenerate_adc_matches_independent_bitwise() {
        let (r, s) = model1();
        let cfg = SimConfig {
            horizon: 2.0,
            n_paths: 20,
            seed: 11,
            ..SimConfig::default()
        };
        let a = simulate(&Model::Independent { r, s }, &cfg).unwrap();
        let b = simulate(&Model::Adc(AdcParams::degenerate(r, s)), &cfg).unwrap();
        assert_eq!(a.states.len(), b.states.len());
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.r.to_bits(), y.r.to_bits());
            assert_eq!(x.s.to_bits(), y.s.to_bits());
        }
    }

    #[test]
    fn path_streams_do_not_depend_on_path_count() {
        let (r, s) = model1();
        let m = Model::Independent { r, s };
        let small = SimConfig {
            horizon: 1.0,
            n_paths: 3,
            seed: 5,
            ..SimConfig::default()
        };
        let big = SimConfig { n_paths: 50, ..small };
        let a = simulate(&m, &small).unwrap();
        let b = simulate(&m, &big).unwrap();
        let len = a.times.len();
        assert_eq!(&a.states[..], &b.states[..3 * len]);
    }

    #[test]
    fn zero_maturity_prices_at_par() {
        let (r, s) = model1();
        let p = price_zcb_mc(&Model::Independent { r, s }, &SimConfig::with_horizon(1.0), 0.0, Leg::Risky).unwrap();
        assert_eq!(p.value, 1.0);
        assert_eq!(p.std_error, 0.0);
    }

    #[test]
    fn off_grid_and_out_of_range_maturities_are_rejected() {
        let (r, s) = model1();
        let m = Model::Independent { r, s };
        let cfg = SimConfig {
            horizon: 1.0,
            n_paths: 4,
            ..SimConfig::default()
        };
        assert!(price_zcb_mc(&m, &cfg, 2.0, Leg::RiskFree).is_err());
        assert!(matches!(
            price_zcb_mc(&m, &cfg, 0.004, Leg::RiskFree),
            Err(Error::OddIntervals { .. })
        ));
        assert!(matches!(price_zcb_mc(&m, &cfg, 0.0031, Leg::RiskFree), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn deterministic_factor_price_matches_integral() {
        let p = CirParams::new_unchecked(0.1, 0.05, 0.0, 0.03);
        let exact = (-(0.05 * 10.0 + (0.03 - 0.05) * (1.0 - (-1.0f64).exp()) / 0.1)).exp();
        assert!((exact - 0.68826).abs() < 1e-5);
        let error_at = |step_h: f64| {
            let cfg = SimConfig {
                horizon: 10.0,
                n_paths: 3,
                step_h,
                ..SimConfig::default()
            };
            let price = price_zcb_mc(&Model::Cir(p), &cfg, 10.0, Leg::RiskFree).unwrap();
            assert!(price.std_error < 1e-15);
            (price.value - exact).abs()
        };
        // the Euler path error is first order in h
        let coarse = error_at(0.004);
        assert!(coarse < 1e-5, "{coarse}");
        assert!(error_at(2e-4) < 1e-6);
        assert!((coarse / error_at(0.002) - 2.0).abs() < 0.05);
    }

    #[test]
    fn empirical_distribution_rejects_off_grid_times() {
        let (r, s) = model1();
        let cfg = SimConfig {
            horizon: 1.0,
            n_paths: 50,
            record_stride: 10,
            ..SimConfig::default()
        };
        let b = simulate(&Model::Independent { r, s }, &cfg).unwrap();
        assert!(empirical_distribution(&b, 0.004, Component::R).is_err());
        let d = empirical_distribution(&b, 0.04, Component::Joint).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        let d = empirical_distribution(&b, 1.0, Component::S).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn comparison_rejects_unequal_kappas() {
        let a = CirParams::new(0.5, 0.02, 0.1, 0.02).unwrap();
        let b = CirParams::new(0.6, 0.02, 0.1, 0.02).unwrap();
        assert_eq!(
            comparison_sum_check(&[a, b], 1.0, &SimConfig::default(), Scheme::Exact).unwrap_err(),
            Error::UnequalKappas
        );
    }

    #[test]
    fn csv_export_header() {
        let (r, s) = model1();
        let cfg = SimConfig {
            horizon: 0.008,
            n_paths: 2,
            ..SimConfig::default()
        };
        let b = simulate(&Model::Independent { r, s }, &cfg).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("path,step,t,r,s\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 3);
    }

    #[test]
    fn joint_comparison_of_a_model_with_itself_is_zero() {
        let (r, s) = model1();
        let m = Model::Adc(AdcParams::degenerate(r, s));
        let cfg = SimConfig {
            step_h: 0.05,
            n_paths: 300,
            seed: 4,
            ..SimConfig::default()
        };
        let cmp = joint_comparison(&m, &m, &cfg, 1.0).unwrap();
        assert!(cmp.difference().iter().all(|&d| d == 0.0));
        assert!((cmp.first.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(cmp.first.masses.iter().filter(|&&m| m > 0.0).count() > 10);
        assert!(joint_comparison(&Model::Cir(r), &m, &cfg, 1.0).is_err());
    }
}
