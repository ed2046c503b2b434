//! Bounded derivative-free minimization in unit-cube coordinates: Brent line
//! searches inside Powell's conjugate-direction method, and a simulated
//! annealer with geometric cooling and re-annealing.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One coordinate of a search box. Log-scaled coordinates need `lo > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
}

impl Interval {
    pub fn linear(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, log: false }
    }

    pub fn log(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, log: true }
    }

    pub fn to_value(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if self.log {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp().clamp(self.lo, self.hi)
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        let u = if self.log {
            (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (x - self.lo) / (self.hi - self.lo)
        };
        u.clamp(0.0, 1.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

pub fn to_values(bounds: &[Interval], u: &[f64]) -> Vec<f64> {
    bounds.iter().zip(u).map(|(b, &u)| b.to_value(u)).collect()
}

pub fn to_units(bounds: &[Interval], x: &[f64]) -> Vec<f64> {
    bounds.iter().zip(x).map(|(b, &x)| b.to_unit(x)).collect()
}

/// Objective wrapper counting evaluations and keeping the best point.
pub struct Tracked<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    pub evals: usize,
    pub budget: usize,
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Best objective after every evaluation.
    pub best_path: Vec<f64>,
}

impl<'a> Tracked<'a> {
    pub fn new(f: &'a mut dyn FnMut(&[f64]) -> f64, budget: usize) -> Self {
        Tracked {
            f,
            evals: 0,
            budget,
            best_x: Vec::new(),
            best_f: f64::INFINITY,
            best_path: Vec::new(),
        }
    }

    pub fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }

    pub fn eval(&mut self, u: &[f64]) -> f64 {
        self.evals += 1;
        let mut v = (self.f)(u);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        if v < self.best_f {
            self.best_f = v;
            self.best_x = u.to_vec();
        }
        self.best_path.push(self.best_f);
        v
    }
}

/// Brent's minimizer on `[a, b]` (golden section with parabolic steps).
/// Returns `(t, f(t))`.
pub fn brent_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64, max_evals: usize) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evals = 1;
    while evals < max_evals {
        let xm = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + abs_tol;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, fx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSearch {
    /// Stop when one Powell iteration improves the objective by less than
    /// `tolerance` relative to its size.
    pub tolerance: f64,
    pub line_rel_tol: f64,
    pub line_abs_tol: f64,
    pub line_max_evals: usize,
}

impl Default for LocalSearch {
    fn default() -> Self {
        LocalSearch {
            tolerance: 1e-10,
            line_rel_tol: 1e-10,
            line_abs_tol: 1e-13,
            line_max_evals: 80,
        }
    }
}

fn line_minimize(obj: &mut Tracked, x: &mut [f64], fx: &mut f64, dir: &[f64], ls: &LocalSearch) -> f64 {
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for (&xi, &di) in x.iter().zip(dir) {
        if di > 0.0 {
            tmin = tmin.max(-xi / di);
            tmax = tmax.min((1.0 - xi) / di);
        } else if di < 0.0 {
            tmin = tmin.max((1.0 - xi) / di);
            tmax = tmax.min(-xi / di);
        }
    }
    if !(tmax > tmin) || !tmin.is_finite() || !tmax.is_finite() {
        return 0.0;
    }
    let base = x.to_vec();
    let remaining = obj.budget.saturating_sub(obj.evals).min(ls.line_max_evals);
    if remaining == 0 {
        return 0.0;
    }
    let mut pt = vec![0.0; x.len()];
    let (t, ft) = brent_min(
        |t| {
            for i in 0..pt.len() {
                pt[i] = (base[i] + t * dir[i]).clamp(0.0, 1.0);
            }
            obj.eval(&pt)
        },
        tmin,
        tmax,
        ls.line_rel_tol,
        ls.line_abs_tol,
        remaining,
    );
    if ft < *fx {
        for i in 0..x.len() {
            x[i] = (base[i] + t * dir[i]).clamp(0.0, 1.0);
        }
        let gain = *fx - ft;
        *fx = ft;
        gain
    } else {
        0.0
    }
}

/// Result of a local search.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

/// Powell's method on the unit cube starting at `x0`.
pub fn powell(obj: &mut Tracked, x0: &[f64], ls: &LocalSearch) -> LocalResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d
        })
        .collect();
    let mut converged = false;
    let mut iter = 0;
    while !obj.exhausted() {
        iter += 1;
        let f_start = fx;
        let x_start = x.clone();
        let mut biggest = 0.0;
        let mut biggest_i = 0;
        for (i, d) in dirs.iter().enumerate() {
            let gain = line_minimize(obj, &mut x, &mut fx, d, ls);
            if gain > biggest {
                biggest = gain;
                biggest_i = i;
            }
            if obj.exhausted() {
                break;
            }
        }
        if 2.0 * (f_start - fx) <= ls.tolerance * (f_start.abs() + fx.abs()) + 1e-300 {
            converged = true;
            break;
        }
        let new_dir: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let norm = new_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && !obj.exhausted() {
            let new_dir: Vec<f64> = new_dir.iter().map(|v| v / norm).collect();
            line_minimize(obj, &mut x, &mut fx, &new_dir, ls);
            dirs.remove(biggest_i);
            dirs.push(new_dir);
        }
        if iter % (2 * n) == 0 {
            // restore a full basis
            for (i, d) in dirs.iter_mut().enumerate() {
                d.iter_mut().for_each(|v| *v = 0.0);
                d[i] = 1.0;
            }
        }
    }
    LocalResult { x, f: fx, converged }
}

/// Levenberg–Marquardt on a residual vector in unit-cube coordinates, with
/// a central-difference Jacobian and an SVD solve of the damped system.
/// `residuals` returns `None` outside the model's domain.
pub fn levenberg_marquardt(
    residuals: &mut dyn FnMut(&[f64]) -> Option<Vec<f64>>,
    x0: &[f64],
    max_evals: usize,
) -> LocalResult {
    const FD_STEP: f64 = 1e-6;
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        residuals(x)
    };
    let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut x = x0.to_vec();
    let Some(mut r) = eval(&x, &mut evals) else {
        return LocalResult {
            x,
            f: f64::INFINITY,
            converged: false,
        };
    };
    let mut f = sq(&r);
    let m = r.len();
    let mut lambda: f64 = 1e-3;
    let mut converged = false;
    let mut stale = 0;
    while evals + 2 * n + 1 <= max_evals && f > 0.0 {
        let mut jac = DMatrix::<f64>::zeros(m, n);
        let mut ok = true;
        for j in 0..n {
            let h = FD_STEP;
            let (lo, hi) = ((x[j] - h).max(0.0), (x[j] + h).min(1.0));
            let mut xp = x.clone();
            xp[j] = hi;
            let mut xm = x.clone();
            xm[j] = lo;
            match (eval(&xp, &mut evals), eval(&xm, &mut evals)) {
                (Some(rp), Some(rm)) => {
                    for i in 0..m {
                        jac[(i, j)] = (rp[i] - rm[i]) / (hi - lo);
                    }
                }
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let scale: Vec<f64> = (0..n).map(|j| jac.column(j).norm().max(1e-300)).collect();
        let mut improved = false;
        while lambda < 1e16 && evals < max_evals {
            let mut a = DMatrix::<f64>::zeros(m + n, n);
            let mut b = DVector::<f64>::zeros(m + n);
            a.view_mut((0, 0), (m, n)).copy_from(&jac);
            for j in 0..n {
                a[(m + j, j)] = lambda.sqrt() * scale[j];
            }
            for i in 0..m {
                b[i] = -r[i];
            }
            let Ok(step) = a.svd(true, true).solve(&b, 1e-300) else {
                break;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, d)| (xi + d).clamp(0.0, 1.0)).collect();
            if let Some(rt) = eval(&trial, &mut evals) {
                let ft = sq(&rt);
                if ft < f {
                    let gain = f - ft;
                    x = trial;
                    r = rt;
                    f = ft;
                    lambda = (lambda / 10.0).max(1e-30);
                    improved = true;
                    stale = if gain > 1e-12 * f { 0 } else { stale + 1 };
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved || stale >= 10 {
            converged = true;
            break;
        }
    }
    if f == 0.0 {
        converged = true;
    }
    LocalResult { x, f, converged }
}

/// Profile search over coordinate `k`: a coarse scan of `u[k]` over
/// `[0, 1]` and then Brent around the best scan point, with the other
/// coordinates refitted by Levenberg–Marquardt at each trial. Suits residual
/// problems whose valley along `k` is flat and curved.
pub fn profile_polish(
    residuals: &mut dyn FnMut(&[f64]) -> Option<Vec<f64>>,
    x0: &[f64],
    k: usize,
    inner_evals: usize,
    outer_evals: usize,
) -> LocalResult {
    const SCAN: usize = 16;
    let full = |rest: &[f64], t: f64| {
        let mut u = rest.to_vec();
        u.insert(k, t);
        u
    };
    let mut refit = |t: f64, warm: &[f64]| {
        let mut inner = |u: &[f64]| residuals(&full(u, t));
        let r = levenberg_marquardt(&mut inner, warm, inner_evals);
        LocalResult {
            x: full(&r.x, t),
            ..r
        }
    };
    let start: Vec<f64> = x0.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v).collect();
    let mut best = refit(x0[k], &start);
    let drop_k = |u: &[f64]| -> Vec<f64> { u.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v).collect() };

    // walk outward from the start so each refit is warm-started by its neighbour
    let centre = (x0[k] * SCAN as f64).round() as isize;
    for dir in [1isize, -1] {
        let mut warm = drop_k(&best.x);
        let mut i = centre + dir;
        while (0..=SCAN as isize).contains(&i) {
            let r = refit(i as f64 / SCAN as f64, &warm);
            warm = drop_k(&r.x);
            if r.f < best.f {
                best = r;
            }
            i += dir;
        }
    }
    let width = 1.0 / SCAN as f64;
    let (lo, hi) = ((best.x[k] - width).max(0.0), (best.x[k] + width).min(1.0));
    brent_min(
        |t| {
            let r = refit(t, &drop_k(&best.x));
            let f = r.f;
            if f < best.f {
                best = r;
            }
            f
        },
        lo,
        hi,
        1e-10,
        1e-12,
        outer_evals,
    );
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    /// Starting temperature; `None` uses the objective at the start point.
    pub initial_temperature: Option<f64>,
    pub decay: f64,
    pub steps_per_stage: usize,
    /// Stages without improvement that trigger re-annealing to `T0 / 10`.
    pub reanneal_after: usize,
    /// Proposal half-width in unit coordinates at `T = T0`.
    pub initial_width: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            initial_temperature: None,
            decay: 0.95,
            steps_per_stage: 50,
            reanneal_after: 5,
            initial_width: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub temperature: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub best: f64,
    pub reannealed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub stages: Vec<StageRecord>,
}

/// Simulated annealing on the unit cube. Proposals perturb every coordinate
/// uniformly within a half-width proportional to `T / T0` and reflect at
/// the faces; uphill moves are accepted with probability `exp(-delta / T)`.
pub fn anneal(obj: &mut Tracked, x0: &[f64], schedule: &AnnealSchedule, seed: u64) -> AnnealResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    let t0 = schedule.initial_temperature.unwrap_or(fx).max(f64::MIN_POSITIVE);
    let mut temp = t0;
    let mut stages = Vec::new();
    let mut stale = 0;
    let mut stage = 0;
    let mut y = vec![0.0; x.len()];
    while !obj.exhausted() {
        let best_before = obj.best_f;
        let width = schedule.initial_width * temp / t0;
        let (mut accepted, mut rejected) = (0, 0);
        for _ in 0..schedule.steps_per_stage {
            if obj.exhausted() {
                break;
            }
            for (yi, &xi) in y.iter_mut().zip(&x) {
                let mut v = xi + width * (2.0 * rng.random::<f64>() - 1.0);
                // reflect into [0, 1]
                v = v.abs();
                if v > 1.0 {
                    v = (2.0 - v).max(0.0);
                }
                *yi = v;
            }
            let fy = obj.eval(&y);
            let delta = fy - fx;
            let u: f64 = rng.random();
            if delta <= 0.0 || u < (-delta / temp).exp() {
                x.copy_from_slice(&y);
                fx = fy;
                accepted += 1;
            } else {
                rejected += 1;
            }
        }
        if obj.best_f < best_before {
            stale = 0;
        } else {
            stale += 1;
        }
        let reannealed = stale >= schedule.reanneal_after;
        stages.push(StageRecord {
            stage,
            temperature: temp,
            accepted,
            rejected,
            best: obj.best_f,
            reannealed,
        });
        stage += 1;
        if reannealed {
            temp = t0 / 10.0;
            stale = 0;
        } else {
            temp *= schedule.decay;
        }
    }
    AnnealResult {
        x: obj.best_x.clone(),
        f: obj.best_f,
        stages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_maps_round_trip() {
        for b in [Interval::linear(-1.0, 1.0), Interval::log(1e-4, 10.0)] {
            for &u in &[0.0, 0.25, 0.5, 1.0] {
                let x = b.to_value(u);
                assert!(b.contains(x));
                assert!((b.to_unit(x) - u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brent_finds_parabola_minimum() {
        let (t, f) = brent_min(|t| (t - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-12, 1e-14, 200);
        assert!((t - 0.3).abs() < 1e-7);
        assert!((f - 1.0).abs() < 1e-14);
        let (t, _) = brent_min(|t| t, 0.0, 1.0, 1e-12, 1e-14, 200);
        assert!(t < 1e-10);
    }

    #[test]
    fn powell_minimizes_rotated_quadratic() {
        let mut f = |u: &[f64]| {
            let a = u[0] - 0.3;
            let b = u[1] - 0.6;
            let c = u[2] - 0.45;
            (a + b).powi(2) + 100.0 * (a - b).powi(2) + 3.0 * c * c + 0.5 * a * c
        };
        let mut obj = Tracked::new(&mut f, 20_000);
        let res = powell(&mut obj, &[0.9, 0.1, 0.1], &LocalSearch::default());
        assert!(res.f < 1e-18, "{}", res.f);
        assert!((res.x[0] - 0.3).abs() < 1e-8 && (res.x[1] - 0.6).abs() < 1e-8);
    }

    #[test]
    fn powell_respects_box() {
        let mut f = |u: &[f64]| (u[0] + 1.0).powi(2) + (u[1] - 2.0).powi(2);
        let mut obj = Tracked::new(&mut f, 5000);
        let res = powell(&mut obj, &[0.5, 0.5], &LocalSearch::default());
        assert!(res.x[0] < 1e-8 && res.x[1] > 1.0 - 1e-8);
    }

    #[test]
    fn levenberg_marquardt_solves_zero_residual_problems() {
        // Rosenbrock as residuals
        let mut r = |u: &[f64]| Some(vec![10.0 * (u[1] - u[0] * u[0]), 1.0 - u[0]]);
        let res = levenberg_marquardt(&mut r, &[0.1, 0.9], 5000);
        assert!(res.f < 1e-24, "{}", res.f);
        assert!((res.x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn profile_polish_follows_a_curved_valley() {
        // residual zero along u1 = u0^2 with a weak pull toward u0 = 0.7
        let mut r = |u: &[f64]| Some(vec![1e3 * (u[1] - u[0] * u[0]), 1e-4 * (u[0] - 0.7)]);
        let res = profile_polish(&mut r, &[0.2, 0.04], 0, 500, 100);
        assert!((res.x[0] - 0.7).abs() < 1e-6, "{:?}", res.x);
    }

    #[test]
    fn anneal_best_is_monotone_and_deterministic() {
        let run = || {
            let mut f = |u: &[f64]| u.iter().map(|x| (x - 0.7).powi(2) + 0.1 * (20.0 * x).sin().powi(2)).sum::<f64>();
            let mut obj = Tracked::new(&mut f, 3000);
            let res = anneal(&mut obj, &[0.1, 0.2, 0.9], &AnnealSchedule::default(), 3);
            (res, obj.best_path.clone())
        };
        let (a, path) = run();
        let (b, _) = run();
        assert_eq!(a, b);
        assert!(path.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.f < path[0]);
    }
}
