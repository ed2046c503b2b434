use std::io::Write;

use serde::Serialize;

use super::optim::StageRecord;
use super::Target;
use crate::adc::AdcParams;
use crate::error::Result;
use crate::mc::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Model1,
    Model2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureEntry {
    pub name: String,
    pub value: f64,
    /// Curvature below the flatness threshold.
    pub flagged: bool,
}

/// Outcome of a calibration run. Residuals are fitted minus observed zero
/// rates in basis points.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub model: ModelKind,
    pub params: AdcParams,
    pub objective: f64,
    pub tenors: Vec<f64>,
    pub residuals_riskfree_bp: Vec<f64>,
    pub residuals_risky_bp: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    pub stages: Vec<StageRecord>,
    /// Best objective after each evaluation.
    pub best_path: Vec<f64>,
    pub curvature: Vec<CurvatureEntry>,
    pub seed: u64,
}

impl CalibrationReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        model: ModelKind,
        params: AdcParams,
        objective: f64,
        target: &Target,
        riskfree: &[f64],
        spreads: &[f64],
        evaluations: usize,
        converged: bool,
        stages: Vec<StageRecord>,
        best_path: Vec<f64>,
        curvature: Vec<CurvatureEntry>,
        seed: u64,
    ) -> Self {
        let residuals_riskfree_bp = riskfree.iter().zip(&target.riskfree).map(|(m, o)| (m - o) * 1e4).collect();
        let residuals_risky_bp = riskfree
            .iter()
            .zip(spreads)
            .zip(target.riskfree.iter().zip(&target.spreads))
            .map(|((r, s), (ro, so))| ((r + s) - (ro + so)) * 1e4)
            .collect();
        CalibrationReport {
            model,
            params,
            objective,
            tenors: target.tenors.clone(),
            residuals_riskfree_bp,
            residuals_risky_bp,
            evaluations,
            converged,
            stages,
            best_path,
            curvature,
            seed,
        }
    }

    pub fn accepted_moves(&self) -> usize {
        self.stages.iter().map(|s| s.accepted).sum()
    }

    pub fn rejected_moves(&self) -> usize {
        self.stages.iter().map(|s| s.rejected).sum()
    }

    fn named_params(&self) -> Vec<(&'static str, f64)> {
        let raw = self.params.to_raw();
        let (beta_r, beta_s) = self.params.betas();
        vec![
            ("r0", raw.r0),
            ("kappa_r", raw.kappa_r),
            ("theta_r", raw.theta_r),
            ("sigma_r", raw.sigma_r),
            ("nu_r", self.params.r().nu()),
            ("s0", raw.s0),
            ("kappa_s", raw.kappa_s),
            ("theta_s", raw.theta_s),
            ("sigma_s", raw.sigma_s),
            ("nu_s", self.params.s().nu()),
            ("eps_r", raw.eps_r),
            ("eps_s", raw.eps_s),
            ("gamma", raw.gamma),
            ("beta_r", beta_r),
            ("beta_s", beta_s),
        ]
    }

    /// Human-readable summary.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let model = match self.model {
            ModelKind::Model1 => "model1",
            ModelKind::Model2 => "model2",
        };
        writeln!(w, "model: {model}")?;
        writeln!(w, "seed: {}", self.seed)?;
        writeln!(w, "objective: {:.6e}", self.objective)?;
        writeln!(w, "evaluations: {}", self.evaluations)?;
        writeln!(w, "converged: {}", self.converged)?;
        writeln!(w)?;
        writeln!(w, "[parameters]")?;
        for (k, v) in self.named_params() {
            writeln!(w, "{k:<8} = {v:.6e}")?;
        }
        writeln!(w)?;
        writeln!(w, "[residuals_bp] fitted - observed")?;
        writeln!(w, "{:>6} {:>10} {:>10}", "tenor", "riskfree", "risky")?;
        for ((t, a), b) in self.tenors.iter().zip(&self.residuals_riskfree_bp).zip(&self.residuals_risky_bp) {
            writeln!(w, "{t:>6} {a:>10.4} {b:>10.4}")?;
        }
        writeln!(w)?;
        writeln!(w, "[curvature] second derivative of the objective")?;
        for c in &self.curvature {
            let flag = if c.flagged { "  flat" } else { "" };
            writeln!(w, "{:<8} = {:.4e}{flag}", c.name, c.value)?;
        }
        if !self.stages.is_empty() {
            writeln!(w)?;
            writeln!(
                w,
                "[annealing] stages = {} accepted = {} rejected = {}",
                self.stages.len(),
                self.accepted_moves(),
                self.rejected_moves()
            )?;
            writeln!(w, "{:>6} {:>12} {:>8} {:>8} {:>12}", "stage", "temperature", "accept", "reject", "best")?;
            for s in &self.stages {
                let mark = if s.reannealed { " reanneal" } else { "" };
                writeln!(
                    w,
                    "{:>6} {:>12.4e} {:>8} {:>8} {:>12.4e}{mark}",
                    s.stage, s.temperature, s.accepted, s.rejected, s.best
                )?;
            }
        }
        Ok(())
    }

    /// CSV `name,value`.
    pub fn write_params_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "value"])?;
        for (k, v) in self.named_params() {
            w.write_record(&[k.to_string(), fmt(v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `tenor_years,riskfree_bp,risky_bp`.
    pub fn write_residuals_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tenor_years", "riskfree_bp", "risky_bp"])?;
        for ((t, a), b) in self.tenors.iter().zip(&self.residuals_riskfree_bp).zip(&self.residuals_risky_bp) {
            w.write_record(&[fmt(*t), fmt(*a), fmt(*b)])?;
        }
        w.flush()?;
        Ok(())
    }
}
