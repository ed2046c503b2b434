//! Term-structure data: quote ingestion, natural cubic splines, swap
//! bootstrap and spread curves. Rates are continuously compounded decimals.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::fmt;

/// The evaluation grid `1, 2, ..., 30` years.
pub fn standard_tenors() -> Vec<f64> {
    (1..=30).map(f64::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteKind {
    ZeroRate,
    DiscountPrice,
    SwapRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub maturity_years: f64,
    pub kind: QuoteKind,
    pub value: f64,
}

impl Quote {
    fn validate(&self) -> Result<()> {
        if !(self.maturity_years > 0.0 && self.maturity_years.is_finite()) {
            return Err(Error::Domain {
                what: "maturity",
                expected: "positive",
                value: self.maturity_years,
            });
        }
        let ok = match self.kind {
            QuoteKind::DiscountPrice => self.value > 0.0 && self.value <= 1.0,
            _ => self.value > -0.5 && self.value < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "quote value",
                expected: "a rate in (-0.5, 1) or a price in (0, 1]",
                value: self.value,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuoteSet {
    quotes: Vec<Quote>,
}

impl QuoteSet {
    /// Validates values and requires strictly increasing maturities within
    /// each kind, in input order.
    pub fn new(quotes: Vec<Quote>) -> Result<Self> {
        for kind in [QuoteKind::ZeroRate, QuoteKind::DiscountPrice, QuoteKind::SwapRate] {
            let mut prev: Option<f64> = None;
            for q in quotes.iter().filter(|q| q.kind == kind) {
                q.validate()?;
                if let Some(p) = prev {
                    if q.maturity_years == p {
                        return Err(Error::DuplicateMaturity(p));
                    }
                    if q.maturity_years < p {
                        return Err(Error::NonMonotoneMaturities {
                            previous: p,
                            maturity: q.maturity_years,
                        });
                    }
                }
                prev = Some(q.maturity_years);
            }
        }
        Ok(QuoteSet { quotes })
    }

    pub fn zero_rates(tenors: &[f64], rates: &[f64]) -> Result<Self> {
        Self::new(
            tenors
                .iter()
                .zip(rates)
                .map(|(&t, &r)| Quote {
                    maturity_years: t,
                    kind: QuoteKind::ZeroRate,
                    value: r,
                })
                .collect(),
        )
    }

    pub fn quotes(&self) -> &[Quote] {
        &self.quotes
    }

    /// CSV with header `maturity_years,kind,value`; lines starting with `#`
    /// are ignored.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
        let quotes = rd.deserialize().collect::<std::result::Result<Vec<Quote>, _>>()?;
        Self::new(quotes)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["maturity_years", "kind", "value"])?;
        for q in &self.quotes {
            let kind = match q.kind {
                QuoteKind::ZeroRate => "zero_rate",
                QuoteKind::DiscountPrice => "discount_price",
                QuoteKind::SwapRate => "swap_rate",
            };
            w.write_record(&[fmt(q.maturity_years), kind.to_string(), fmt(q.value)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Natural cubic spline through `(x_i, y_i)`; evaluation outside
/// `[x_0, x_n]` is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::GridMismatch);
        }
        if x.len() < 2 {
            return Err(Error::InvalidConfig("a spline needs at least two knots".into()));
        }
        for w in x.windows(2) {
            if w[1] == w[0] {
                return Err(Error::DuplicateMaturity(w[0]));
            }
            if !(w[1] > w[0]) {
                return Err(Error::NonMonotoneMaturities {
                    previous: w[0],
                    maturity: w[1],
                });
            }
        }
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(NaturalCubicSpline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.m
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn segment(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::Extrapolation { tenor: t, lo, hi });
        }
        Ok(self.x.partition_point(|&xi| xi <= t).clamp(1, self.x.len() - 1) - 1)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = self.segment(t)?;
        if t == self.x[i] {
            return Ok(self.y[i]);
        }
        if t == self.x[i + 1] {
            return Ok(self.y[i + 1]);
        }
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        Ok(a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0)
    }

    pub fn second_derivative(&self, t: f64) -> Result<f64> {
        let i = self.segment(t)?;
        let h = self.x[i + 1] - self.x[i];
        let b = (t - self.x[i]) / h;
        Ok((1.0 - b) * self.m[i] + b * self.m[i + 1])
    }
}

/// Zero curve sampled on a tenor grid, with the spline through its source
/// knots.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldCurve {
    pub tenors: Vec<f64>,
    pub zero_rates: Vec<f64>,
    spline: NaturalCubicSpline,
}

impl YieldCurve {
    /// Fits a spline through the knots and samples it at `tenors`.
    pub fn from_knots(knots: &[f64], rates: &[f64], tenors: &[f64]) -> Result<Self> {
        let spline = NaturalCubicSpline::new(knots, rates)?;
        let zero_rates = tenors.iter().map(|&t| spline.eval(t)).collect::<Result<_>>()?;
        Ok(YieldCurve {
            tenors: tenors.to_vec(),
            zero_rates,
            spline,
        })
    }

    /// Curve whose knots are its own grid.
    pub fn on_grid(tenors: &[f64], rates: &[f64]) -> Result<Self> {
        Self::from_knots(tenors, rates, tenors)
    }

    pub fn rate(&self, t: f64) -> Result<f64> {
        self.spline.eval(t)
    }

    pub fn discount(&self, t: f64) -> Result<f64> {
        Ok((-self.rate(t)? * t).exp())
    }

    pub fn spline(&self) -> &NaturalCubicSpline {
        &self.spline
    }

    pub fn same_grid(&self, other: &YieldCurve) -> bool {
        self.tenors == other.tenors
    }

    /// Parallel shift of every grid rate.
    pub fn shifted(&self, by: f64) -> Result<Self> {
        let rates: Vec<f64> = self.zero_rates.iter().map(|r| r + by).collect();
        Self::on_grid(&self.tenors, &rates)
    }

    /// CSV `tenor_years,zero_rate`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series(out, "zero_rate", &self.tenors, &self.zero_rates)
    }
}

fn write_series<W: Write>(out: W, name: &str, tenors: &[f64], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tenor_years", name])?;
    for (t, v) in tenors.iter().zip(values) {
        w.write_record(&[fmt(*t), fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Zero curve on `1..=30` from a quote set. Discount prices are converted to
/// rates; swap quotes are bootstrapped first.
pub fn build_curve(q: &QuoteSet) -> Result<YieldCurve> {
    build_curve_on(q, &standard_tenors())
}

pub fn build_curve_on(q: &QuoteSet, tenors: &[f64]) -> Result<YieldCurve> {
    let mut knots: Vec<(f64, f64)> = Vec::new();
    let swaps: Vec<&Quote> = q.quotes().iter().filter(|x| x.kind == QuoteKind::SwapRate).collect();
    if !swaps.is_empty() {
        for (i, s) in swaps.iter().enumerate() {
            if s.maturity_years != (i + 1) as f64 {
                return Err(Error::InvalidConfig(format!(
                    "swap quotes must cover consecutive annual tenors from 1y; found {}y at position {}",
                    s.maturity_years,
                    i + 1
                )));
            }
        }
        let rates: Vec<f64> = swaps.iter().map(|s| s.value).collect();
        let dfs = bootstrap_discounts(&rates)?;
        knots.extend(dfs.iter().enumerate().map(|(i, p)| {
            let t = (i + 1) as f64;
            (t, -p.ln() / t)
        }));
    }
    for x in q.quotes() {
        match x.kind {
            QuoteKind::ZeroRate => knots.push((x.maturity_years, x.value)),
            QuoteKind::DiscountPrice => knots.push((x.maturity_years, -x.value.ln() / x.maturity_years)),
            QuoteKind::SwapRate => {}
        }
    }
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in knots.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateMaturity(w[0].0));
        }
    }
    if knots.len() < 2 {
        return Err(Error::InvalidConfig("at least two quotes are needed to build a curve".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
    YieldCurve::from_knots(&x, &y, tenors)
}

/// Discount factors from annual par swap rates (30/360 annual fixed leg,
/// single curve): `P_n = (1 - S_n sum_{k<n} P_k) / (1 + S_n)`.
pub fn bootstrap_discounts(swap_rates: &[f64]) -> Result<Vec<f64>> {
    let mut dfs = Vec::with_capacity(swap_rates.len());
    let mut annuity = 0.0;
    for (i, &s) in swap_rates.iter().enumerate() {
        let p = (1.0 - s * annuity) / (1.0 + s);
        if !(p > 0.0) {
            return Err(Error::InconsistentSwaps {
                maturity: (i + 1) as f64,
                discount: p,
            });
        }
        annuity += p;
        dfs.push(p);
    }
    Ok(dfs)
}

/// Zero curve on the annual grid `1..=n` from `n` par swap rates.
pub fn bootstrap_swaps(swap_rates: &[f64]) -> Result<YieldCurve> {
    let dfs = bootstrap_discounts(swap_rates)?;
    let tenors: Vec<f64> = (1..=dfs.len()).map(|i| i as f64).collect();
    let rates: Vec<f64> = dfs.iter().zip(&tenors).map(|(p, t)| -p.ln() / t).collect();
    YieldCurve::on_grid(&tenors, &rates)
}

/// Par rate of an annual swap maturing at `dfs.len()` years.
pub fn par_swap_rate(dfs: &[f64]) -> f64 {
    let annuity: f64 = dfs.iter().sum();
    (1.0 - dfs[dfs.len() - 1]) / annuity
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadCurve {
    pub tenors: Vec<f64>,
    pub spreads: Vec<f64>,
}

impl SpreadCurve {
    /// CSV `tenor_years,spread`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series(out, "spread", &self.tenors, &self.spreads)
    }
}

/// `s(tau) = i_risky(tau) - i_riskfree(tau)` on a shared grid.
pub fn spread_curve(risky: &YieldCurve, riskfree: &YieldCurve) -> Result<SpreadCurve> {
    if !risky.same_grid(riskfree) {
        return Err(Error::GridMismatch);
    }
    Ok(SpreadCurve {
        tenors: risky.tenors.clone(),
        spreads: risky.zero_rates.iter().zip(&riskfree.zero_rates).map(|(a, b)| a - b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knots_are_reproduced() {
        let t = standard_tenors();
        let r: Vec<f64> = t.iter().map(|x| 0.03 + 0.01 * (x / 7.0).sin()).collect();
        let c = YieldCurve::on_grid(&t, &r).unwrap();
        assert_eq!(c.zero_rates, r);
    }

    #[test]
    fn affine_data_is_reproduced() {
        let knots = [0.5, 2.0, 3.5, 10.0, 30.0];
        let y: Vec<f64> = knots.iter().map(|x| 0.01 + 0.002 * x).collect();
        let s = NaturalCubicSpline::new(&knots, &y).unwrap();
        for m in s.second_derivatives() {
            assert!(m.abs() < 1e-15);
        }
        for t in standard_tenors() {
            assert!((s.eval(t).unwrap() - (0.01 + 0.002 * t)).abs() < 1e-15);
        }
    }

    #[test]
    fn natural_boundary() {
        let knots = [1.0, 2.0, 4.0, 7.0, 30.0];
        let y = [0.02, 0.025, 0.03, 0.041, 0.045];
        let s = NaturalCubicSpline::new(&knots, &y).unwrap();
        assert_eq!(s.second_derivative(1.0).unwrap(), 0.0);
        assert_eq!(s.second_derivative(30.0).unwrap(), 0.0);
    }

    #[test]
    fn extrapolation_is_rejected() {
        let s = NaturalCubicSpline::new(&[1.0, 2.0], &[0.01, 0.02]).unwrap();
        assert!(matches!(s.eval(0.5), Err(Error::Extrapolation { .. })));
        assert!(matches!(s.eval(2.5), Err(Error::Extrapolation { .. })));
        assert!(s.eval(1.5).is_ok());
    }

    #[test]
    fn quote_validation() {
        let q = |t, kind, v| Quote {
            maturity_years: t,
            kind,
            value: v,
        };
        assert!(matches!(
            QuoteSet::new(vec![q(1.0, QuoteKind::ZeroRate, 0.01), q(1.0, QuoteKind::ZeroRate, 0.02)]),
            Err(Error::DuplicateMaturity(_))
        ));
        assert!(matches!(
            QuoteSet::new(vec![q(2.0, QuoteKind::ZeroRate, 0.01), q(1.0, QuoteKind::ZeroRate, 0.02)]),
            Err(Error::NonMonotoneMaturities { .. })
        ));
        assert!(QuoteSet::new(vec![q(1.0, QuoteKind::DiscountPrice, 1.2)]).is_err());
        assert!(QuoteSet::new(vec![q(1.0, QuoteKind::ZeroRate, 1.5)]).is_err());
        assert!(QuoteSet::new(vec![q(0.0, QuoteKind::ZeroRate, 0.01)]).is_err());
        // the same maturity under two kinds is rejected at build time
        let qs = QuoteSet::new(vec![
            q(1.0, QuoteKind::ZeroRate, 0.01),
            q(1.0, QuoteKind::DiscountPrice, 0.99),
            q(30.0, QuoteKind::ZeroRate, 0.02),
        ])
        .unwrap();
        assert!(matches!(build_curve(&qs), Err(Error::DuplicateMaturity(_))));
    }

    #[test]
    fn prices_are_converted_to_rates() {
        let quotes = vec![
            Quote {
                maturity_years: 1.0,
                kind: QuoteKind::DiscountPrice,
                value: (-0.03f64).exp(),
            },
            Quote {
                maturity_years: 30.0,
                kind: QuoteKind::DiscountPrice,
                value: (-0.03f64 * 30.0).exp(),
            },
        ];
        let c = build_curve(&QuoteSet::new(quotes).unwrap()).unwrap();
        for r in &c.zero_rates {
            assert!((r - 0.03).abs() < 1e-15);
        }
    }

    #[test]
    fn bootstrap_by_hand() {
        let d = bootstrap_discounts(&[0.05, 0.05]).unwrap();
        assert!((d[0] - 1.0 / 1.05).abs() < 1e-15);
        assert!((d[0] - 0.952381).abs() < 1e-6);
        assert!((d[1] - 0.907029).abs() < 1e-6);
        let c = bootstrap_swaps(&[0.05, 0.05]).unwrap();
        assert!((c.zero_rates[1] - 0.04879).abs() < 1e-5);
        let flat = bootstrap_discounts(&[0.05; 30]).unwrap();
        for (n, p) in flat.iter().enumerate() {
            assert!((p - 1.05f64.powi(-(n as i32 + 1))).abs() < 1e-14);
        }
    }

    #[test]
    fn bootstrap_reprices_par_swaps() {
        let s: Vec<f64> = (1..=30).map(|n| 0.03 + 0.0007 * n as f64 - 0.00001 * (n * n) as f64).collect();
        let d = bootstrap_discounts(&s).unwrap();
        for n in 1..=30 {
            assert!((par_swap_rate(&d[..n]) - s[n - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_swaps_are_rejected() {
        assert!(matches!(
            bootstrap_discounts(&[0.05, 0.05, 0.99]),
            Err(Error::InconsistentSwaps { .. })
        ));
    }

    #[test]
    fn spreads() {
        let t = standard_tenors();
        let r: Vec<f64> = t.iter().map(|x| 0.03 + 0.0005 * x).collect();
        let de = YieldCurve::on_grid(&t, &r).unwrap();
        let s = spread_curve(&de, &de).unwrap();
        assert!(s.spreads.iter().all(|&x| x == 0.0));
        let up = de.shifted(1e-3).unwrap();
        let s = spread_curve(&de, &up).unwrap();
        assert!(s.spreads.iter().all(|x| (x + 1e-3).abs() < 1e-15));
        let short = YieldCurve::on_grid(&t[..10], &r[..10]).unwrap();
        assert_eq!(spread_curve(&short, &de), Err(Error::GridMismatch));
    }

    #[test]
    fn csv_round_trip() {
        let text = "# comment\nmaturity_years,kind,value\n1,zero_rate,0.03\n2,discount_price,0.94\n30,zero_rate,0.04\n";
        let q = QuoteSet::from_csv(text.as_bytes()).unwrap();
        assert_eq!(q.quotes().len(), 3);
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let back = QuoteSet::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back, q);
        assert!(QuoteSet::from_csv("maturity_years,kind,value\n1,bogus,0.1\n".as_bytes()).is_err());
    }
}
