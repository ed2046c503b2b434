//! Sample statistics used by the Monte Carlo engine and the verification
//! suites: compensated sums, Kolmogorov–Smirnov tests, binomial proportions
//! and Freedman–Diaconis histograms.

use serde::Serialize;

use crate::error::{Error, Result};

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sample mean and standard error of the mean (`s / sqrt(n)`).
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value();
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    xs.iter().map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value() / (n - 1.0)
}

/// Pearson correlation of paired samples.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let my = ys.iter().copied().collect::<CompensatedSum>().value() / n;
    let mut sxy = CompensatedSum::default();
    let mut sxx = CompensatedSum::default();
    let mut syy = CompensatedSum::default();
    for (x, y) in xs.iter().zip(ys) {
        sxy.add((x - mx) * (y - my));
        sxx.add((x - mx).powi(2));
        syy.add((y - my).powi(2));
    }
    sxy.value() / (sxx.value() * syy.value()).sqrt()
}

/// One-sample Kolmogorov–Smirnov distance `sup |F_n - F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Critical KS distance for `n` samples at significance `alpha`, using the
/// asymptotic Kolmogorov quantile with Stephens' finite-sample correction.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (0.5 * alpha).ln()).sqrt();
    let rn = (n as f64).sqrt();
    c / (rn + 0.12 + 0.11 / rn)
}

/// Asymptotic p-value `P[K > sqrt(n) d]` of the Kolmogorov distribution.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    let lambda = (rn + 0.12 + 0.11 / rn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub n: usize,
}

impl KsOutcome {
    pub fn new(samples: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Self {
        KsOutcome {
            statistic: ks_statistic(samples, cdf),
            critical: ks_critical_value(samples.len(), alpha),
            n: samples.len(),
        }
    }

    pub fn passes(&self) -> bool {
        self.statistic < self.critical
    }
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Proportion {
    pub hits: usize,
    pub trials: usize,
}

impl Proportion {
    pub fn estimate(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    pub fn std_error(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Estimate exceeds zero by more than `k` standard errors.
    pub fn positive_beyond(&self, k: f64) -> bool {
        self.hits > 0 && self.estimate() > k * self.std_error()
    }
}

/// Freedman–Diaconis bin count, capped at `cap` and at least one.
pub fn freedman_diaconis_bins(values: &[f64], cap: usize) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n < 2 {
        return 1;
    }
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let iqr = q(0.75) - q(0.25);
    let range = sorted[n - 1] - sorted[0];
    if iqr <= 0.0 || range <= 0.0 {
        return 1;
    }
    let width = 2.0 * iqr / (n as f64).cbrt();
    ((range / width).ceil() as usize).clamp(1, cap)
}

/// `bins + 1` equal-width edges spanning the sample range.
pub fn uniform_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1e-12f64.max(lo.abs() * 1e-12);
    }
    let w = (hi - lo) / bins as f64;
    (0..=bins).map(|i| if i == bins { hi } else { lo + w * i as f64 }).collect()
}

fn bin_index(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    let w = (edges[bins] - edges[0]) / bins as f64;
    (((x - edges[0]) / w).floor().max(0.0) as usize).min(bins - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram1D {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram1D {
    pub fn from_samples(values: &[f64], cap: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("histogram of an empty sample".into()));
        }
        let bins = freedman_diaconis_bins(values, cap);
        let edges = uniform_edges(values, bins);
        let mut counts = vec![0usize; bins];
        for &x in values {
            counts[bin_index(&edges, x)] += 1;
        }
        let n = values.len() as f64;
        Ok(Histogram1D {
            edges,
            masses: counts.into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    /// Mass divided by bin width.
    pub fn densities(&self) -> Vec<f64> {
        self.masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m / (e[1] - e[0]))
            .collect()
    }
}

/// Two-dimensional histogram; `masses[i * s_bins + j]` belongs to r-bin `i`
/// and s-bin `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram2D {
    pub r_edges: Vec<f64>,
    pub s_edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram2D {
    pub fn from_samples(rs: &[f64], ss: &[f64], cap: usize) -> Result<Self> {
        if rs.is_empty() || rs.len() != ss.len() {
            return Err(Error::InvalidConfig("joint histogram needs paired, nonempty samples".into()));
        }
        let r_edges = uniform_edges(rs, freedman_diaconis_bins(rs, cap));
        let s_edges = uniform_edges(ss, freedman_diaconis_bins(ss, cap));
        Ok(Self::on_grid(rs, ss, r_edges, s_edges))
    }

    /// Bins paired samples on fixed uniform edges; points outside the edges
    /// are dropped, so masses may sum to less than one.
    pub fn on_grid(rs: &[f64], ss: &[f64], r_edges: Vec<f64>, s_edges: Vec<f64>) -> Self {
        let nr = r_edges.len() - 1;
        let ns = s_edges.len() - 1;
        let mut counts = vec![0usize; nr * ns];
        for (&r, &s) in rs.iter().zip(ss) {
            let inside = |e: &[f64], x: f64| x >= e[0] && x <= e[e.len() - 1];
            if inside(&r_edges, r) && inside(&s_edges, s) {
                counts[bin_index(&r_edges, r) * ns + bin_index(&s_edges, s)] += 1;
            }
        }
        let n = rs.len() as f64;
        Histogram2D {
            r_edges,
            s_edges,
            masses: counts.into_iter().map(|c| c as f64 / n).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.r_edges.len() - 1, self.s_edges.len() - 1)
    }
}
