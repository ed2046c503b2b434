//! Synthetic market curves. Real quotes for the reference date are not
//! public, so fixtures are produced from model prices, optionally perturbed
//! by seeded uniform noise of a few basis points.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cir::CirParams;
use crate::curve::{build_curve_on, standard_tenors, Quote, QuoteKind, QuoteSet, YieldCurve};
use crate::error::{Error, Result};
use crate::mc::{fmt, price_curve_mc, Model, SimConfig};
use crate::pricing::{cir_zero_curve, implied_rate};

/// Half-width of the default fixture noise, in basis points.
pub const DEFAULT_NOISE_BP: f64 = 2.0;
pub const DEFAULT_NOISE_SEED: u64 = 20061031;

/// Risk-free and risky zero curves observed on one date.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePair {
    pub riskfree: YieldCurve,
    pub risky: YieldCurve,
}

impl CurvePair {
    pub fn from_rates(tenors: &[f64], riskfree: &[f64], risky: &[f64]) -> Result<Self> {
        Ok(CurvePair {
            riskfree: YieldCurve::on_grid(tenors, riskfree)?,
            risky: YieldCurve::on_grid(tenors, risky)?,
        })
    }

    pub fn tenors(&self) -> &[f64] {
        &self.riskfree.tenors
    }

    /// Observed spreads `i_risky - i_riskfree`.
    pub fn spreads(&self) -> Result<Vec<f64>> {
        Ok(crate::curve::spread_curve(&self.risky, &self.riskfree)?.spreads)
    }

    /// CSV `curve,maturity_years,kind,value` with zero-rate quotes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["curve", "maturity_years", "kind", "value"])?;
        for (name, c) in [("riskfree", &self.riskfree), ("risky", &self.risky)] {
            for (t, r) in c.tenors.iter().zip(&c.zero_rates) {
                w.write_record(&[name.to_string(), fmt(*t), "zero_rate".to_string(), fmt(*r)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a bundle and builds both curves on `1..=30`.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            curve: String,
            maturity_years: f64,
            kind: QuoteKind,
            value: f64,
        }
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
        let mut rf = Vec::new();
        let mut rk = Vec::new();
        for row in rd.deserialize::<Row>() {
            let row = row?;
            let q = Quote {
                maturity_years: row.maturity_years,
                kind: row.kind,
                value: row.value,
            };
            match row.curve.as_str() {
                "riskfree" => rf.push(q),
                "risky" => rk.push(q),
                other => return Err(Error::Parse(format!("unknown curve `{other}`"))),
            }
        }
        let tenors = standard_tenors();
        Ok(CurvePair {
            riskfree: build_curve_on(&QuoteSet::new(rf)?, &tenors)?,
            risky: build_curve_on(&QuoteSet::new(rk)?, &tenors)?,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }
}

/// Closed-form curves of the independent two-factor model.
pub fn model1_curves(pr: &CirParams, ps: &CirParams, tenors: &[f64]) -> Result<CurvePair> {
    let rf = cir_zero_curve(pr, pr.x0(), tenors)?;
    let sp = cir_zero_curve(ps, ps.x0(), tenors)?;
    let rk: Vec<f64> = rf.iter().zip(&sp).map(|(a, b)| a + b).collect();
    CurvePair::from_rates(tenors, &rf, &rk)
}

/// Monte Carlo curves of any simulated model.
pub fn mc_curves(model: &Model, cfg: &SimConfig, tenors: &[f64]) -> Result<CurvePair> {
    let horizon = tenors.iter().copied().fold(0.0, f64::max);
    let prices = price_curve_mc(model, &SimConfig { horizon, ..*cfg }, tenors)?;
    let rf: Vec<f64> = prices.risk_free.iter().zip(tenors).map(|(p, &t)| implied_rate(p.value, t)).collect();
    let rk: Vec<f64> = prices.risky.iter().zip(tenors).map(|(p, &t)| implied_rate(p.value, t)).collect();
    CurvePair::from_rates(tenors, &rf, &rk)
}

/// Adds independent uniform noise in `[-half_width_bp, half_width_bp]`
/// basis points to every rate of both curves.
pub fn with_noise(curves: &CurvePair, half_width_bp: f64, seed: u64) -> Result<CurvePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = half_width_bp * 1e-4;
    let mut perturb = |rates: &[f64]| -> Vec<f64> { rates.iter().map(|r| r + rng.random_range(-w..=w)).collect() };
    let rf = perturb(&curves.riskfree.zero_rates);
    let rk = perturb(&curves.risky.zero_rates);
    CurvePair::from_rates(curves.tenors(), &rf, &rk)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub noise_bp: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            noise_bp: DEFAULT_NOISE_BP,
            seed: DEFAULT_NOISE_SEED,
        }
    }
}

/// Reference-parameter curves on `1..=30` with the given noise.
pub fn synthetic_model1(pr: &CirParams, ps: &CirParams, spec: FixtureSpec) -> Result<CurvePair> {
    let clean = model1_curves(pr, ps, &standard_tenors())?;
    if spec.noise_bp == 0.0 {
        return Ok(clean);
    }
    with_noise(&clean, spec.noise_bp, spec.seed)
}
