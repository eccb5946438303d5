//! `lightinject` command-line front end.
//!
//! Exit status: 0 success, 1 internal/output failure, 2 configuration
//! error, 3 data error (ingestion or fit failure), 4 no positive key rate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Config, ConfigError};
use lightinject::analysis::{
    self, delta_sweep_table, fit_table, loss_sweep_table, sweep_delta, sweep_loss, Table,
};
use lightinject::channel::{
    ChannelParams, DEFAULT_BACKGROUND_ERROR, REFERENCE_BACKGROUND_RATE,
    REFERENCE_DETECTOR_EFFICIENCY, REFERENCE_EC_EFFICIENCY, REFERENCE_MISALIGNMENT,
};
use lightinject::countermeasures::{DefenseStack, MonitorPosition};
use lightinject::exec::{with_workers, Execution};
use lightinject::modulator::calibrate::calibrated_model;
use lightinject::modulator::{calibrate_dataset, ingest_dataset, Dataset};
use lightinject::optimizer::{OptimizationConfig, Range};
use lightinject::primitives::transmittance_to_db;
use lightinject::{Decibel, Error};

const DEFAULT_TOTAL_LOSS_GRID: &str = "2:40:0.5";
const DEFAULT_SWEEP_LOSS_DELTAS: &str = "0,1,3";
const DEFAULT_DELTA_GRID: &str = "0:6:0.1";
const DEFAULT_FIXED_TOTAL_LOSS_DB: f64 = 12.22;
const DEFAULT_DEFENSE_SAMPLE: &str = "PM-5";
const DEFAULT_INJECTED_UW: &str = "2000";
const DEFAULT_EXTRA_ISOLATION: &str = "0:60:5";

#[derive(Parser)]
#[command(
    name = "lightinject",
    version,
    about = "Light-injection attack and decoy-state BB84 key rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key rates over total loss for a set of ΔLoss values.
    SweepLoss(CommonArgs),
    /// Key rates over ΔLoss at a fixed total loss.
    SweepDelta(CommonArgs),
    /// Fit the photorefractive model to modulator measurements.
    FitModulator(CommonArgs),
    /// Residual attack strength and monitor verdicts for a defense stack.
    EvaluateDefense(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Link loss in dB (value, list or start:stop:step).
    #[arg(long, allow_hyphen_values = true)]
    link_loss_db: Option<String>,
    /// Attack-induced loss change in dB (value, list or start:stop:step).
    #[arg(long, allow_hyphen_values = true)]
    delta_loss_db: Option<String>,
    /// Total loss in dB including detector efficiency (value, list or start:stop:step).
    #[arg(long, allow_hyphen_values = true)]
    total_loss_db: Option<String>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep evaluation.
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Internal(String),
    Config(String),
    Data(String),
    NoPositiveRate(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::NoPositiveRate(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Internal(m)
            | Failure::Config(m)
            | Failure::Data(m)
            | Failure::NoPositiveRate(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("config error: {e}"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Ingest(_)
            | Error::Fit { .. }
            | Error::Record { .. }
            | Error::NotIntensityModulator(_)
            | Error::MissingDarkRelaxation(_) => Failure::Data(format!("data error: {e}")),
            Error::Consistency(_) => Failure::Internal(format!("consistency check failed: {e}")),
            _ => Failure::Config(format!("config error: {e}")),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Internal(format!("output error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let (args, kind) = match command {
        Command::SweepLoss(a) => (a, Kind::SweepLoss),
        Command::SweepDelta(a) => (a, Kind::SweepDelta),
        Command::FitModulator(a) => (a, Kind::FitModulator),
        Command::EvaluateDefense(a) => (a, Kind::EvaluateDefense),
    };
    let cfg = load_config(&args)?;
    let workers = cfg.count("workers")?;
    if workers == Some(0) {
        return Err(Failure::Config(
            "config error: workers: must be >= 1".into(),
        ));
    }
    let out = cfg.text("out").map(PathBuf::from);
    with_workers(workers, || match kind {
        Kind::SweepLoss => run_sweep_loss(&cfg, out.as_ref()),
        Kind::SweepDelta => run_sweep_delta(&cfg, out.as_ref()),
        Kind::FitModulator => run_fit(&cfg, out.as_ref()),
        Kind::EvaluateDefense => run_defense(&cfg, out.as_ref()),
    })
}

#[derive(Clone, Copy)]
enum Kind {
    SweepLoss,
    SweepDelta,
    FitModulator,
    EvaluateDefense,
}

fn load_config(args: &CommonArgs) -> Result<Config, Failure> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(v) = &args.link_loss_db {
        cfg.set("link_loss_db", v);
    }
    if let Some(v) = &args.total_loss_db {
        cfg.set("total_loss_db", v);
    }
    if let Some(v) = &args.delta_loss_db {
        cfg.set("delta_loss_db", v);
    }
    if let Some(p) = &args.out {
        cfg.set("out", p.display());
    }
    if let Some(n) = args.workers {
        cfg.set("workers", n);
    }
    if cfg.contains("link_loss_db") && cfg.contains("total_loss_db") {
        return Err(Failure::Config(
            "config error: give either link_loss_db or total_loss_db, not both".into(),
        ));
    }
    Ok(cfg)
}

fn emit(table: &Table, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            table.write_csv(stdout.lock())?;
        }
    }
    Ok(())
}

fn decibels(key: &str, values: &[f64]) -> Result<Vec<Decibel>, Failure> {
    values
        .iter()
        .map(|&v| {
            if v < 0.0 {
                Err(Failure::Config(format!(
                    "config error: {key}: {v} must be >= 0 dB"
                )))
            } else {
                Ok(Decibel::new(v)?)
            }
        })
        .collect()
}

fn values_or(cfg: &Config, key: &str, default: &str) -> Result<Vec<f64>, Failure> {
    match cfg.values(key)? {
        Some(v) => Ok(v),
        None => Ok(Config::parse(&format!("{key} = {default}"))?
            .values(key)?
            .expect("default present")),
    }
}

fn channel(cfg: &Config) -> Result<ChannelParams, Failure> {
    Ok(ChannelParams::new(
        Decibel::ZERO,
        cfg.number_or("detector_efficiency", REFERENCE_DETECTOR_EFFICIENCY)?,
        cfg.number_or("y0", REFERENCE_BACKGROUND_RATE)?,
        cfg.number_or("e_d", REFERENCE_MISALIGNMENT)?,
        cfg.number_or("f_e", REFERENCE_EC_EFFICIENCY)?,
        cfg.number_or("e0", DEFAULT_BACKGROUND_ERROR)?,
    )?)
}

fn optimizer(cfg: &Config) -> Result<OptimizationConfig, Failure> {
    let d = OptimizationConfig::default();
    let opt = OptimizationConfig {
        mu_range: Range::new(
            cfg.number_or("mu_min", d.mu_range.lo)?,
            cfg.number_or("mu_max", d.mu_range.hi)?,
        )?,
        nu1_range: Range::new(
            cfg.number_or("nu1_min", d.nu1_range.lo)?,
            cfg.number_or("nu1_max", d.nu1_range.hi)?,
        )?,
        coarse_grid: cfg.count("coarse_grid")?.unwrap_or(d.coarse_grid),
        refine_iterations: cfg
            .count("refine_iterations")?
            .unwrap_or(d.refine_iterations),
        ..d
    };
    opt.validate()?;
    Ok(opt)
}

/// Total losses from either `total_loss_db` or `link_loss_db`.
fn total_losses(cfg: &Config, ch: &ChannelParams, default: &str) -> Result<Vec<Decibel>, Failure> {
    if let Some(links) = cfg.values("link_loss_db")? {
        let detector = transmittance_to_db(ch.detector_efficiency())?;
        return Ok(decibels("link_loss_db", &links)?
            .into_iter()
            .map(|l| l + detector)
            .collect());
    }
    decibels("total_loss_db", &values_or(cfg, "total_loss_db", default)?)
}

fn run_sweep_loss(cfg: &Config, out: Option<&PathBuf>) -> Result<(), Failure> {
    let ch = channel(cfg)?;
    let opt = optimizer(cfg)?;
    let totals = total_losses(cfg, &ch, DEFAULT_TOTAL_LOSS_GRID)?;
    let deltas = decibels(
        "delta_loss_db",
        &values_or(cfg, "delta_loss_db", DEFAULT_SWEEP_LOSS_DELTAS)?,
    )?;
    let rows = sweep_loss(&ch, &totals, &deltas, &opt, Execution::default())?;
    emit(&loss_sweep_table(&rows), out)?;

    for d in &deltas {
        let reach = rows
            .iter()
            .filter(|r| r.report.delta_loss == *d && r.report.secure > 0.0)
            .map(|r| r.report.total_loss.value())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        match reach {
            Some(v) => eprintln!("ΔLoss {d}: secure rate positive up to {v:.2} dB total loss"),
            None => eprintln!("ΔLoss {d}: no positive secure rate on the grid"),
        }
    }
    if rows.iter().all(|r| r.report.baseline <= 0.0) {
        return Err(Failure::NoPositiveRate(
            "no positive baseline key rate at any total loss".into(),
        ));
    }
    Ok(())
}

fn run_sweep_delta(cfg: &Config, out: Option<&PathBuf>) -> Result<(), Failure> {
    let base = channel(cfg)?;
    let opt = optimizer(cfg)?;
    let totals = total_losses(cfg, &base, &DEFAULT_FIXED_TOTAL_LOSS_DB.to_string())?;
    let [total] = totals.as_slice() else {
        return Err(Failure::Config(
            "config error: sweep-delta takes a single total or link loss".into(),
        ));
    };
    let ch = base.with_total_loss(*total)?;
    let deltas = decibels(
        "delta_loss_db",
        &values_or(cfg, "delta_loss_db", DEFAULT_DELTA_GRID)?,
    )?;
    let (optimum, rows) = sweep_delta(&ch, &deltas, &opt, Execution::default())?;
    emit(&delta_sweep_table(&rows), out)?;

    let best = optimum.best();
    eprintln!(
        "total loss {:.2} dB: mu_s = {:.4}, nu_1 = {:.4}, baseline rate {:.4e}",
        ch.total_loss().value(),
        best.intensities.mu_s(),
        best.intensities.nu_1(),
        best.rate
    );
    match rows
        .windows(2)
        .find(|w| w[0].report.secure > 0.0 && w[1].report.secure <= 0.0)
    {
        Some(w) => eprintln!(
            "secure rate reaches zero between ΔLoss {} and {}",
            w[0].report.delta_loss, w[1].report.delta_loss
        ),
        None => eprintln!("secure rate does not cross zero on the grid"),
    }
    if !optimum.is_positive() {
        return Err(Failure::NoPositiveRate(format!(
            "no positive key rate at total loss {:.2} dB",
            ch.total_loss().value()
        )));
    }
    Ok(())
}

fn dataset(cfg: &Config) -> Result<Dataset, Failure> {
    match cfg.text("data") {
        None => Ok(Dataset::bundled()),
        Some(path) => {
            let file =
                File::open(path).map_err(|e| Failure::Data(format!("data error: {path}: {e}")))?;
            ingest_dataset(io::BufReader::new(file)).map_err(|e| match e {
                Error::Ingest(issues) => Failure::Data(
                    std::iter::once(format!("data error: {path}: {} issue(s)", issues.len()))
                        .chain(issues.iter().map(|i| format!("  {i}")))
                        .collect::<Vec<_>>()
                        .join("\n"),
                ),
                other => other.into(),
            })
        }
    }
}

fn run_fit(cfg: &Config, out: Option<&PathBuf>) -> Result<(), Failure> {
    let data = dataset(cfg)?;
    if data.series.is_empty() {
        return Err(Failure::Data(
            "data error: dataset contains no series".into(),
        ));
    }
    let cals = calibrate_dataset(&data, Execution::default());
    emit(&fit_table(&cals), out)?;

    let mut failed = 0;
    for c in &cals {
        match &c.fit {
            Ok(fit) => eprintln!(
                "{}: max ΔLoss {:.2} dB, P0 {:.0} uW, tau {:.0} s{}",
                c.sample_id,
                fit.model.delta_loss_max().value(),
                fit.model.p0_uw(),
                fit.model.recovery_tau_s(),
                if c.recovery_measured {
                    ""
                } else {
                    " (default)"
                }
            ),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", c.sample_id)
            }
        }
        for flag in &c.flags {
            eprintln!("  flag: {flag}");
        }
    }
    if failed > 0 {
        return Err(Failure::Data(format!("data error: {failed} fit(s) failed")));
    }
    Ok(())
}

fn run_defense(cfg: &Config, out: Option<&PathBuf>) -> Result<(), Failure> {
    let data = dataset(cfg)?;
    let sample = cfg.text("sample").unwrap_or(DEFAULT_DEFENSE_SAMPLE);
    let model = calibrated_model(&data, sample)?.model;

    let position = match cfg.text("monitor_position").unwrap_or("after") {
        "before" => MonitorPosition::BeforeDefenses,
        "after" => MonitorPosition::AfterDefenses,
        other => {
            return Err(Failure::Config(format!(
                "config error: monitor_position: expected before or after, got {other:?}"
            )))
        }
    };
    let stack = DefenseStack::new(
        Decibel::new(cfg.number_or("isolator_db", 0.0)?)?,
        Decibel::new(cfg.number_or("filter_db", 0.0)?)?,
        cfg.number_or("monitor_threshold_uw", 1.0)?,
        cfg.number_or("monitor_noise_floor_uw", 0.0)?,
    )?;
    let degradation = decibels(
        "isolator_degradation_db",
        &[cfg.number_or("isolator_degradation_db", 0.0)?],
    )?[0];
    let stack = stack.with_isolator_degradation(degradation);
    let injected = values_or(cfg, "injected_uw", DEFAULT_INJECTED_UW)?;
    let extra = decibels(
        "extra_isolation_db",
        &values_or(cfg, "extra_isolation_db", DEFAULT_EXTRA_ISOLATION)?,
    )?;
    let budget = decibels("budget_db", &[cfg.number_or("budget_db", 0.1)?])?[0];

    let report = analysis::evaluate_defense(&injected, &extra, &stack, position, &model, budget)?;
    emit(&report.table, out)?;

    eprintln!(
        "{sample}: max ΔLoss {:.2} dB, P0 {:.0} uW",
        model.delta_loss_max().value(),
        model.p0_uw()
    );
    for (p, min) in &report.minimum_defense {
        match min {
            Some(d) => eprintln!(
                "{p} uW: minimum total defense for residual ΔLoss <= {budget} is {:.3} dB",
                d.value()
            ),
            None => eprintln!(
                "{p} uW: no finite stack suffices for a {budget} budget (the model responds to any non-zero power)"
            ),
        }
    }
    Ok(())
}
