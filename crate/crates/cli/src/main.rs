//! `adc`: simulation, pricing, curve building, calibration and verification
//! for the CIR and correlated square-root rate/spread models.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adc_core::adc::{AdcParams, RawAdcParams};
use adc_core::calibrate::{calibrate_model1, calibrate_model2, calibrate_model2_from, CalibrationConfig, CalibrationReport};
use adc_core::cir::CirParams;
use adc_core::curve::{build_curve_on, spread_curve, QuoteSet};
use adc_core::error::{Error, Result};
use adc_core::fixtures::CurvePair;
use adc_core::mc::{empirical_distribution, joint_comparison, price_curve_mc, simulate, Component, Model, SimConfig};
use adc_core::pricing::{zcb_price_cir, zcb_price_model1, zero_rate, Leg};
use adc_core::verify::{self, Suite};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "adc", version, about = "CIR and correlated square-root rate/spread models")]
struct Cli {
    /// Seed overriding the configuration file.
    #[arg(long, global = true, env = "ADC_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate paths; write the path table and histograms.
    Simulate(SimulateArgs),
    /// Zero-coupon price table, closed form and/or Monte Carlo.
    Price(PriceArgs),
    /// Zero curves from market quotes.
    Curve(CurveArgs),
    /// Fit a model to a risk-free/risky curve pair.
    Calibrate(CalibrateArgs),
    /// Run a property suite and print its checks.
    Verify(VerifyArgs),
    /// Joint density of a two-factor model and its difference to another.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    Cir,
    Model1,
    Adc,
}

#[derive(Args, Debug)]
struct ModelSel {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// TOML parameters: `kappa, theta, sigma, x0` for `cir`, otherwise
    /// `r0, kappa_r, ..., eps_r, eps_s, gamma`.
    #[arg(long)]
    params: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    sel: ModelSel,
    /// Simulation settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recording interval for the path table, in years.
    #[arg(long, default_value_t = 1.0)]
    record_every: f64,
    /// Comma-separated instants for histograms.
    #[arg(long, default_value = "5,30", value_delimiter = ',')]
    times: Vec<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[command(flatten)]
    sel: ModelSel,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inclusive integer range `a..b`.
    #[arg(long, default_value = "1..30")]
    tenors: String,
    /// Add Monte Carlo columns (always on for `adc`).
    #[arg(long)]
    mc: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    /// Risk-free quotes CSV `maturity_years,kind,value`.
    #[arg(long)]
    quotes: PathBuf,
    /// Risky quotes CSV, same layout.
    #[arg(long)]
    risky_quotes: Option<PathBuf>,
    #[arg(long, default_value = "1..30")]
    tenors: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Curve pair CSV `curve,maturity_years,kind,value`.
    #[arg(long)]
    fixture: PathBuf,
    /// Calibration settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting point for the annealer instead of a model-1 fit.
    #[arg(long)]
    start: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    /// Dimension index for the univariate hitting check.
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Two-factor parameters (TOML).
    #[arg(long)]
    params: PathBuf,
    /// Parameters of the reference model; defaults to the same factors
    /// without correlation.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    time: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CirFile {
    kappa: f64,
    theta: f64,
    sigma: f64,
    x0: f64,
}

/// Parsed parameters for the selected model.
#[derive(Debug, Clone, Copy)]
enum Params {
    Cir(CirParams),
    Model1(CirParams, CirParams),
    Adc(AdcParams),
}

impl Params {
    fn model(&self) -> Model {
        match *self {
            Params::Cir(p) => Model::Cir(p),
            Params::Model1(r, s) => Model::Independent { r, s },
            Params::Adc(p) => Model::Adc(p),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_raw(path: &Path) -> Result<RawAdcParams> {
    toml::from_str(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load_params(model: ModelArg, path: &Path) -> Result<Params> {
    match model {
        ModelArg::Cir => {
            let f: CirFile = toml::from_str(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            Ok(Params::Cir(CirParams::new(f.kappa, f.theta, f.sigma, f.x0)?))
        }
        ModelArg::Model1 => {
            let p = AdcParams::validate(&read_raw(path)?)?;
            if !p.is_degenerate() {
                return Err(Error::InvalidConfig("model1 takes uncorrelated parameters (eps_r = eps_s = gamma = 0)".into()));
            }
            Ok(Params::Model1(*p.r(), *p.s()))
        }
        ModelArg::Adc => Ok(Params::Adc(AdcParams::validate(&read_raw(path)?)?)),
    }
}

fn load_sim(path: Option<&Path>, seed: Option<u64>) -> Result<SimConfig> {
    let mut cfg: SimConfig = match path {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_calibration(path: Option<&Path>, seed: Option<u64>) -> Result<CalibrationConfig> {
    let mut cfg = match path {
        Some(p) => CalibrationConfig::from_path(p)?,
        None => CalibrationConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Inclusive integer range `a..b`.
fn parse_tenors(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("tenor range '{spec}' is not of the form a..b"));
    let (a, b) = spec.split_once("..").ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(Error::InvalidConfig(format!("tenor range '{spec}' must satisfy 1 <= a <= b")));
    }
    Ok((a..=b).map(f64::from).collect())
}

/// Resolved configuration of one run, logged to standard error and hashed
/// into every output header.
struct Resolved {
    text: String,
    seed: u64,
}

impl Resolved {
    fn new(command: &str, seed: u64) -> Self {
        Resolved {
            text: format!("command = \"{command}\"\nversion = \"{VERSION}\"\nseed = {seed}\n"),
            seed,
        }
    }

    fn value(mut self, key: &str, v: impl Serialize) -> Result<Self> {
        let mut t = toml::Table::new();
        t.insert(key.into(), toml::Value::try_from(v).map_err(|e| Error::Parse(e.to_string()))?);
        self.text.push_str(&toml::to_string(&t).map_err(|e| Error::Parse(e.to_string()))?);
        Ok(self)
    }

    fn section(mut self, name: &str, v: impl Serialize) -> Result<Self> {
        let body = toml::to_string(&v).map_err(|e| Error::Parse(e.to_string()))?;
        let _ = write!(self.text, "\n[{name}]\n{body}");
        Ok(self)
    }

    fn params(self, p: &Params) -> Result<Self> {
        match p {
            Params::Cir(c) => self.section(
                "params",
                CirFile {
                    kappa: c.kappa(),
                    theta: c.theta(),
                    sigma: c.sigma(),
                    x0: c.x0(),
                },
            ),
            Params::Model1(r, s) => self.section("params", AdcParams::degenerate(*r, *s).to_raw()),
            Params::Adc(a) => self.section("params", a.to_raw()),
        }
    }

    fn header(&self) -> String {
        let hash = Sha256::digest(self.text.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        format!("# adc {VERSION} seed={} config_hash={hex}\n", self.seed)
    }

    fn log(&self) {
        eprintln!("# resolved configuration\n{}", self.text.trim_end());
    }
}

fn render(header: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = header.as_bytes().to_vec();
    body(&mut buf)?;
    Ok(buf)
}

fn write_file(dir: &Path, name: &str, header: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let bytes = render(header, body)?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn tag(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

fn run_simulate(a: &SimulateArgs, seed: Option<u64>) -> Result<()> {
    let params = load_params(a.sel.model, &a.sel.params)?;
    let mut cfg = load_sim(a.config.as_deref(), seed)?;
    let horizon = a.times.iter().copied().fold(cfg.horizon, f64::max);
    cfg.horizon = horizon;
    let h = cfg.grid()?.h;
    let stride = (a.record_every / h).round();
    if !(stride >= 1.0) {
        return Err(Error::InvalidConfig(format!("record interval {} is shorter than the step", a.record_every)));
    }
    cfg.record_stride = stride as usize;
    let resolved = Resolved::new("simulate", cfg.seed)
        .value("model", a.sel.model)?
        .value("times", &a.times)?
        .params(&params)?
        .section("simulation", cfg)?;
    resolved.log();
    let header = resolved.header();
    let model = params.model();
    let batch = simulate(&model, &cfg)?;
    ensure_dir(&a.out_dir)?;
    write_file(&a.out_dir, "paths.csv", &header, |w| batch.write_csv(w))?;
    let mut components = vec![(Component::R, "r")];
    if !model.is_univariate() {
        components.push((Component::S, "s"));
        components.push((Component::Joint, "joint"));
    }
    for &t in &a.times {
        for &(c, name) in &components {
            let d = empirical_distribution(&batch, t, c)?;
            write_file(&a.out_dir, &format!("hist_{name}_t{}.csv", tag(t)), &header, |w| d.write_csv(w))?;
        }
    }
    let hits = batch.hit_flags.iter().filter(|&&h| h).count();
    eprintln!("paths = {} origin_hits = {hits}", batch.n_paths);
    Ok(())
}

fn run_price(a: &PriceArgs, seed: Option<u64>) -> Result<()> {
    let params = load_params(a.sel.model, &a.sel.params)?;
    let tenors = parse_tenors(&a.tenors)?;
    let horizon = tenors.iter().copied().fold(0.0, f64::max);
    let mc = a.mc || matches!(params, Params::Adc(_));
    let sim = load_sim(a.config.as_deref(), seed)?.until(horizon);
    let mut resolved = Resolved::new("price", sim.seed)
        .value("model", a.sel.model)?
        .value("tenors", &tenors)?
        .value("monte_carlo", mc)?
        .params(&params)?;
    if mc {
        resolved = resolved.section("simulation", sim)?;
    }
    resolved.log();

    let mut columns: Vec<(String, Vec<f64>)> = vec![("tenor_years".into(), tenors.clone())];
    let legs: &[(Leg, &str)] = match params {
        Params::Cir(_) => &[(Leg::RiskFree, "riskfree")],
        _ => &[(Leg::RiskFree, "riskfree"), (Leg::Risky, "risky")],
    };
    let closed = match params {
        Params::Cir(p) => Some(tenors.iter().map(|&t| zcb_price_cir(&p, p.x0(), t).map(|v| [v, v])).collect::<Result<Vec<_>>>()?),
        Params::Model1(r, s) => Some(
            tenors
                .iter()
                .map(|&t| {
                    Ok([
                        zcb_price_model1(&r, &s, r.x0(), s.x0(), t, Leg::RiskFree)?,
                        zcb_price_model1(&r, &s, r.x0(), s.x0(), t, Leg::Risky)?,
                    ])
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        Params::Adc(_) => None,
    };
    if let Some(prices) = &closed {
        for (i, &(_, name)) in legs.iter().enumerate() {
            let p: Vec<f64> = prices.iter().map(|v| v[i]).collect();
            let r = p.iter().zip(&tenors).map(|(&p, &t)| zero_rate(p, t)).collect::<Result<Vec<_>>>()?;
            columns.push((format!("{name}_price"), p));
            columns.push((format!("{name}_rate"), r));
        }
    }
    if mc {
        let prices = price_curve_mc(&params.model(), &sim, &tenors)?;
        for &(leg, name) in legs {
            let q = prices.leg(leg);
            let r = q.iter().zip(&tenors).map(|(q, &t)| zero_rate(q.value, t)).collect::<Result<Vec<_>>>()?;
            columns.push((format!("mc_{name}_price"), q.iter().map(|q| q.value).collect()));
            columns.push((format!("mc_{name}_std_error"), q.iter().map(|q| q.std_error).collect()));
            columns.push((format!("mc_{name}_rate"), r));
        }
    }
    let bytes = render(&resolved.header(), |w| write_columns(w, &columns))?;
    match &a.out {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(&bytes).map_err(Error::from),
    }
}

fn write_columns(out: &mut Vec<u8>, columns: &[(String, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns.iter().map(|(n, _)| n.as_str()))?;
    let rows = columns.first().map_or(0, |c| c.1.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|(_, v)| format!("{}", v[i])))?;
    }
    w.flush()?;
    Ok(())
}

fn run_curve(a: &CurveArgs, seed: Option<u64>) -> Result<()> {
    let tenors = parse_tenors(&a.tenors)?;
    let rf_quotes = QuoteSet::from_path(&a.quotes)?;
    let risky_quotes = a.risky_quotes.as_deref().map(QuoteSet::from_path).transpose()?;
    let mut resolved = Resolved::new("curve", seed.unwrap_or(0))
        .value("tenors", &tenors)?
        .value("riskfree_quotes", rf_quotes.quotes())?;
    if let Some(q) = &risky_quotes {
        resolved = resolved.value("risky_quotes", q.quotes())?;
    }
    resolved.log();
    let header = resolved.header();
    let rf = build_curve_on(&rf_quotes, &tenors)?;
    ensure_dir(&a.out_dir)?;
    write_file(&a.out_dir, "riskfree_curve.csv", &header, |w| rf.write_csv(w))?;
    if let Some(q) = &risky_quotes {
        let risky = build_curve_on(q, &tenors)?;
        let spread = spread_curve(&risky, &rf)?;
        write_file(&a.out_dir, "risky_curve.csv", &header, |w| risky.write_csv(w))?;
        write_file(&a.out_dir, "spread_curve.csv", &header, |w| spread.write_csv(w))?;
        let pair = CurvePair::from_rates(&tenors, &rf.zero_rates, &risky.zero_rates)?;
        write_file(&a.out_dir, "fixture.csv", &header, |w| pair.write_csv(w))?;
    }
    Ok(())
}

fn run_calibrate(a: &CalibrateArgs, seed: Option<u64>) -> Result<()> {
    let curves = CurvePair::from_path(&a.fixture)?;
    let cfg = load_calibration(a.config.as_deref(), seed)?;
    let start = a.start.as_deref().map(|p| read_raw(p).and_then(|r| AdcParams::validate(&r))).transpose()?;
    let mut resolved = Resolved::new("calibrate", cfg.seed).value("model", a.model)?;
    if let Some(s) = &start {
        resolved = resolved.section("start", s.to_raw())?;
    }
    let resolved = resolved.section("calibration", &cfg)?.section("curves", curves_table(&curves)?)?;
    resolved.log();
    let report: CalibrationReport = match (a.model, start) {
        (ModelArg::Model1, None) => calibrate_model1(&curves, &cfg)?,
        (ModelArg::Adc, None) => calibrate_model2(&curves, &cfg)?,
        (ModelArg::Adc, Some(s)) => calibrate_model2_from(&curves, &cfg, &s)?,
        (ModelArg::Model1, Some(_)) => return Err(Error::InvalidConfig("--start applies to the adc model only".into())),
        (ModelArg::Cir, _) => return Err(Error::InvalidConfig("calibration takes model1 or adc".into())),
    };
    let header = resolved.header();
    ensure_dir(&a.out_dir)?;
    write_file(&a.out_dir, "report.txt", &header, |w| report.write_text(w))?;
    write_file(&a.out_dir, "params.csv", &header, |w| report.write_params_csv(w))?;
    write_file(&a.out_dir, "residuals.csv", &header, |w| report.write_residuals_csv(w))?;
    write_file(&a.out_dir, "fitted.toml", &header, |w| {
        let body = toml::to_string(&report.params.to_raw()).map_err(|e| Error::Parse(e.to_string()))?;
        w.extend_from_slice(body.as_bytes());
        Ok(())
    })?;
    eprintln!("objective = {:e} evaluations = {} converged = {}", report.objective, report.evaluations, report.converged);
    Ok(())
}

#[derive(Serialize)]
struct CurvesTable {
    tenors: Vec<f64>,
    riskfree: Vec<f64>,
    risky: Vec<f64>,
}

fn curves_table(c: &CurvePair) -> Result<CurvesTable> {
    Ok(CurvesTable {
        tenors: c.tenors().to_vec(),
        riskfree: c.riskfree.zero_rates.clone(),
        risky: c.risky.zero_rates.clone(),
    })
}

fn run_verify(a: &VerifyArgs, seed: Option<u64>) -> Result<bool> {
    let seed = seed.unwrap_or(1);
    let mut resolved = Resolved::new("verify", seed).value("suite", a.suite)?;
    if let Some(nu) = a.nu {
        resolved = resolved.value("nu", nu)?;
    }
    resolved.log();
    let report = verify::run(a.suite, seed, a.nu)?;
    let bytes = render(&resolved.header(), |w| report.write_text(w))?;
    io::stdout().write_all(&bytes)?;
    Ok(report.passed())
}

fn run_report(a: &ReportArgs, seed: Option<u64>) -> Result<()> {
    let p = AdcParams::validate(&read_raw(&a.params)?)?;
    let q = match &a.compare {
        Some(path) => AdcParams::validate(&read_raw(path)?)?,
        None => AdcParams::degenerate(*p.r(), *p.s()),
    };
    let cfg = load_sim(a.config.as_deref(), seed)?.until(a.time);
    let resolved = Resolved::new("report", cfg.seed)
        .value("time", a.time)?
        .section("params", p.to_raw())?
        .section("compare", q.to_raw())?
        .section("simulation", cfg)?;
    resolved.log();
    let header = resolved.header();
    let cmp = joint_comparison(&Model::Adc(p), &Model::Adc(q), &cfg, a.time)?;
    ensure_dir(&a.out_dir)?;
    write_file(&a.out_dir, "joint_density.csv", &header, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["r_lo", "r_hi", "s_lo", "s_hi", "mass"])?;
        let (_, ns) = cmp.first.shape();
        for (i, re) in cmp.first.r_edges.windows(2).enumerate() {
            for (j, se) in cmp.first.s_edges.windows(2).enumerate() {
                c.write_record(&[re[0], re[1], se[0], se[1], cmp.first.masses[i * ns + j]].map(|v| format!("{v}")))?;
            }
        }
        c.flush()?;
        Ok(())
    })?;
    write_file(&a.out_dir, "density_difference.csv", &header, |w| cmp.write_csv(w))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Simulate(a) => run_simulate(a, cli.seed).map(|_| true),
        Command::Price(a) => run_price(a, cli.seed).map(|_| true),
        Command::Curve(a) => run_curve(a, cli.seed).map(|_| true),
        Command::Calibrate(a) => run_calibrate(a, cli.seed).map(|_| true),
        Command::Verify(a) => run_verify(a, cli.seed),
        Command::Report(a) => run_report(a, cli.seed).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={msg}", e.code());
            ExitCode::from(2)
        }
    }
}
