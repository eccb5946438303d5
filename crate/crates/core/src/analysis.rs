//! Sweeps and reports behind the command-line front end.
//!
//! Every table is built in grid order and formatted with a fixed number of
//! significant digits, so identical inputs give byte-identical CSV.

use std::io::Write;

use crate::channel::ChannelParams;
use crate::countermeasures::{
    minimum_defense, monitor_detects, power_at_modulator, residual_attack_strength, DefenseStack,
    MonitorPosition,
};
use crate::decoy::{delta_loss_to_k, evaluate_scenarios, KeyRateReport};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::modulator::{ModulatorKind, PhotorefractiveModel, SampleCalibration};
use crate::optimizer::{optimize_intensities, Optimization, OptimizationConfig};
use crate::primitives::{transmittance_to_db, Decibel, IntensitySet};

pub const SWEEP_LOSS_HEADER: [&str; 8] = [
    "total_loss_db",
    "delta_loss_db",
    "mu_s",
    "nu_1",
    "r_baseline",
    "r_unaware",
    "r_secure",
    "r_secure_floored",
];
pub const SWEEP_DELTA_HEADER: [&str; 6] = [
    "delta_loss_db",
    "k",
    "r_baseline",
    "r_unaware",
    "r_secure",
    "r_secure_floored",
];
pub const FIT_HEADER: [&str; 7] = [
    "sample_id",
    "kind",
    "delta_loss_max_db",
    "p0_uW",
    "recovery_tau_s",
    "rms_residual_db",
    "validation_flags",
];
pub const DEFENSE_HEADER: [&str; 5] = [
    "injected_uW",
    "defense_total_db",
    "power_at_modulator_uW",
    "residual_delta_loss_db",
    "monitor_detected",
];

/// Relative tolerance of the ΔLoss = 0 coincidence check.
const COINCIDENCE_TOL: f64 = 1e-12;
/// Absolute tolerance of the k ↔ ΔLoss round trip, in dB.
const ROUND_TRIP_TOL_DB: f64 = 1e-9;

/// Formats a number with 12 significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

/// Inclusive arithmetic grid `start, start + step, …` up to `stop`.
///
/// Points are computed by index (not accumulated) and rounded to 12
/// decimals, so `0:6:0.1` yields exactly 61 clean values.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(Error::Domain {
            quantity: "grid",
            value: step,
            expected: "finite start, stop and step",
        });
    }
    if stop < start {
        return Err(Error::Domain {
            quantity: "grid stop",
            value: stop,
            expected: "stop >= start",
        });
    }
    if !(step > 0.0) {
        return Err(Error::Domain {
            quantity: "grid step",
            value: step,
            expected: "step > 0",
        });
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// One row of the total-loss sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSweepRow {
    pub intensities: IntensitySet,
    pub report: KeyRateReport,
}

/// One row of the ΔLoss sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSweepRow {
    pub k: f64,
    pub report: KeyRateReport,
}

/// Re-checks the k ↔ ΔLoss round trip and, at ΔLoss = 0, that all three
/// scenarios coincide.
pub fn validate_report(report: &KeyRateReport) -> Result<()> {
    let k = delta_loss_to_k(report.delta_loss)?;
    let back = transmittance_to_db(1.0 / k)?;
    if (back.value() - report.delta_loss.value()).abs() > ROUND_TRIP_TOL_DB {
        return Err(Error::Consistency(format!(
            "k round trip: {} dB -> k = {k} -> {} dB",
            report.delta_loss, back
        )));
    }
    if report.delta_loss.value() == 0.0 {
        let scale = report.baseline.abs().max(f64::MIN_POSITIVE);
        for (name, r) in [
            ("unaware", report.unaware_estimate),
            ("secure", report.secure),
        ] {
            if (r - report.baseline).abs() > COINCIDENCE_TOL * scale {
                return Err(Error::Consistency(format!(
                    "ΔLoss = 0 but {name} rate {r} differs from baseline {}",
                    report.baseline
                )));
            }
        }
    }
    Ok(())
}

/// For every total loss, optimizes the no-attack intensities and evaluates
/// the three scenarios at each ΔLoss. Rows are ordered by total loss, then
/// ΔLoss. Points where no positive rate exists still use the best
/// (non-positive) intensities found.
pub fn sweep_loss(
    channel: &ChannelParams,
    total_losses: &[Decibel],
    delta_losses: &[Decibel],
    cfg: &OptimizationConfig,
    exec: Execution,
) -> Result<Vec<LossSweepRow>> {
    cfg.validate()?;
    let per_total = exec.try_map(total_losses, |&total| -> Result<Vec<LossSweepRow>> {
        let ch = channel.with_total_loss(total)?;
        let intensities = optimize_intensities(&ch, cfg, Execution::Sequential)?
            .best()
            .intensities;
        delta_losses
            .iter()
            .map(|&d| {
                let report = evaluate_scenarios(&intensities, &ch, d)?;
                validate_report(&report)?;
                Ok(LossSweepRow {
                    intensities,
                    report,
                })
            })
            .collect()
    })?;
    Ok(per_total.into_iter().flatten().collect())
}

/// Optimizes the no-attack intensities once and evaluates the three
/// scenarios over the ΔLoss grid.
pub fn sweep_delta(
    channel: &ChannelParams,
    delta_losses: &[Decibel],
    cfg: &OptimizationConfig,
    exec: Execution,
) -> Result<(Optimization, Vec<DeltaSweepRow>)> {
    let opt = optimize_intensities(channel, cfg, exec)?;
    let intensities = opt.best().intensities;
    let rows = exec.try_map(delta_losses, |&d| {
        let report = evaluate_scenarios(&intensities, channel, d)?;
        validate_report(&report)?;
        Ok(DeltaSweepRow {
            k: report.k(),
            report,
        })
    })?;
    Ok((opt, rows))
}

/// Plain table of formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn rates(r: &KeyRateReport) -> [String; 4] {
    [
        format_number(r.baseline),
        format_number(r.unaware_estimate),
        format_number(r.secure),
        format_number(r.secure.max(0.0)),
    ]
}

pub fn loss_sweep_table(rows: &[LossSweepRow]) -> Table {
    Table {
        header: SWEEP_LOSS_HEADER.to_vec(),
        rows: rows
            .iter()
            .map(|row| {
                let mut cells = vec![
                    format_number(row.report.total_loss.value()),
                    format_number(row.report.delta_loss.value()),
                    format_number(row.intensities.mu_s()),
                    format_number(row.intensities.nu_1()),
                ];
                cells.extend(rates(&row.report));
                cells
            })
            .collect(),
    }
}

pub fn delta_sweep_table(rows: &[DeltaSweepRow]) -> Table {
    Table {
        header: SWEEP_DELTA_HEADER.to_vec(),
        rows: rows
            .iter()
            .map(|row| {
                let mut cells = vec![
                    format_number(row.report.delta_loss.value()),
                    format_number(row.k),
                ];
                cells.extend(rates(&row.report));
                cells
            })
            .collect(),
    }
}

pub fn fit_table(calibrations: &[SampleCalibration]) -> Table {
    Table {
        header: FIT_HEADER.to_vec(),
        rows: calibrations
            .iter()
            .map(|c| {
                let flags = if c.flags.is_empty() {
                    "ok".to_string()
                } else {
                    c.flags.join(";")
                };
                let kind = match c.kind {
                    ModulatorKind::Phase => "PM",
                    ModulatorKind::Intensity => "IM",
                };
                match &c.fit {
                    Ok(fit) => vec![
                        c.sample_id.clone(),
                        kind.to_string(),
                        format_number(fit.model.delta_loss_max().value()),
                        format_number(fit.model.p0_uw()),
                        format_number(fit.model.recovery_tau_s()),
                        format_number(fit.rms_residual()),
                        flags,
                    ],
                    Err(_) => vec![
                        c.sample_id.clone(),
                        kind.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        flags,
                    ],
                }
            })
            .collect(),
    }
}

/// Defense evaluation over injected powers × added isolation.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseReport {
    pub table: Table,
    /// Minimum total defense per injected power; `None` when no finite
    /// stack meets the budget.
    pub minimum_defense: Vec<(f64, Option<Decibel>)>,
    pub budget: Decibel,
}

/// Evaluates the stack with each extra isolation value added to its
/// isolator, for every injected power.
pub fn evaluate_defense(
    injected_uw: &[f64],
    extra_isolation: &[Decibel],
    stack: &DefenseStack,
    position: MonitorPosition,
    model: &PhotorefractiveModel,
    budget: Decibel,
) -> Result<DefenseReport> {
    let mut rows = Vec::with_capacity(injected_uw.len() * extra_isolation.len());
    let mut minimum = Vec::with_capacity(injected_uw.len());
    for &p in injected_uw {
        for &extra in extra_isolation {
            let s = DefenseStack::new(
                stack.isolator() + extra,
                stack.filter(),
                stack.monitor_threshold_uw(),
                stack.monitor_noise_floor_uw(),
            )?;
            rows.push(vec![
                format_number(p),
                format_number(s.total_attenuation().value()),
                format_number(power_at_modulator(p, &s)?),
                format_number(residual_attack_strength(p, &s, model)?.value()),
                monitor_detects(p, &s, position)?.to_string(),
            ]);
        }
        minimum.push((p, minimum_defense(p, budget, model)?));
    }
    Ok(DefenseReport {
        table: Table {
            header: DEFENSE_HEADER.to_vec(),
            rows,
        },
        minimum_defense: minimum,
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(v: f64) -> Decibel {
        Decibel::new(v).unwrap()
    }

    fn dbs(v: &[f64]) -> Vec<Decibel> {
        v.iter().map(|&x| db(x)).collect()
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0.00000000000e0");
        assert_eq!(format_number(-0.0), "0.00000000000e0");
        assert_eq!(format_number(12.22), "1.22200000000e1");
        assert_eq!(format_number(-2.5e-4), "-2.50000000000e-4");
    }

    #[test]
    fn grids() {
        let g = grid(0.0, 6.0, 0.1).unwrap();
        assert_eq!(g.len(), 61);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[60], 6.0);
        assert_eq!(grid(2.0, 40.0, 0.5).unwrap().len(), 77);
        assert_eq!(grid(1.0, 1.0, 0.5).unwrap(), vec![1.0]);
        assert!(grid(2.0, 1.0, 0.5).is_err());
        assert!(grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_zero_point_gives_equal_rates() {
        let ch = ChannelParams::reference();
        let (_, rows) = sweep_delta(
            &ch,
            &[Decibel::ZERO],
            &OptimizationConfig::default(),
            Execution::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let r = rows[0].report;
        assert_eq!(rows[0].k, 1.0);
        assert_eq!(r.baseline, r.unaware_estimate);
        assert_eq!(r.baseline, r.secure);
        assert!(r.baseline > 0.0);
    }

    #[test]
    fn loss_sweep_zero_column_duplicates_baseline() {
        let rows = sweep_loss(
            &ChannelParams::reference(),
            &dbs(&[4.0, 12.0, 45.0]),
            &dbs(&[0.0, 3.0]),
            &OptimizationConfig::default(),
            Execution::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 6);
        for pair in rows.chunks(2) {
            let (zero, three) = (pair[0].report, pair[1].report);
            assert_eq!(zero.secure, zero.baseline);
            assert_eq!(zero.baseline, three.baseline);
            assert_eq!(pair[0].intensities, pair[1].intensities);
        }
        assert!(rows[0].report.baseline > 0.0);
        assert!(rows[4].report.baseline <= 0.0);
    }

    #[test]
    fn sweep_is_identical_sequential_and_default() {
        let ch = ChannelParams::reference();
        let cfg = OptimizationConfig::default();
        let deltas = dbs(&[0.0, 1.0, 2.5]);
        let a = sweep_delta(&ch, &deltas, &cfg, Execution::Sequential).unwrap();
        let b = sweep_delta(&ch, &deltas, &cfg, Execution::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            delta_sweep_table(&a.1).to_csv_string(),
            delta_sweep_table(&b.1).to_csv_string()
        );
    }

    #[test]
    fn validation_catches_inconsistent_rows() {
        let good = KeyRateReport {
            baseline: 1e-3,
            unaware_estimate: 1e-3,
            secure: 1e-3,
            delta_loss: Decibel::ZERO,
            total_loss: db(12.0),
        };
        assert!(validate_report(&good).is_ok());
        let bad = KeyRateReport {
            secure: 0.9e-3,
            ..good
        };
        assert!(matches!(validate_report(&bad), Err(Error::Consistency(_))));
        let attacked = KeyRateReport {
            delta_loss: db(3.0),
            ..bad
        };
        assert!(validate_report(&attacked).is_ok());
    }

    #[test]
    fn csv_layout() {
        let ch = ChannelParams::reference();
        let (_, rows) = sweep_delta(
            &ch,
            &dbs(&[0.0, 1.0]),
            &OptimizationConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        let csv = delta_sweep_table(&rows).to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "delta_loss_db,k,r_baseline,r_unaware,r_secure,r_secure_floored"
        );
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.00000000000e0,1.00000000000e0,"));
    }

    #[test]
    fn defense_report_rows() {
        let model = PhotorefractiveModel::new(db(19.53), 300.0, 60.0, None).unwrap();
        let stack = DefenseStack::new(Decibel::ZERO, Decibel::ZERO, 1.0, 0.0).unwrap();
        let extra = dbs(&[0.0, 30.0, 40.0]);
        let report = evaluate_defense(
            &[2000.0],
            &extra,
            &stack,
            MonitorPosition::AfterDefenses,
            &model,
            db(0.1),
        )
        .unwrap();
        let r = &report.table.rows;
        assert_eq!(r.len(), 3);
        assert_eq!(r[1][2], format_number(2000.0 * 1e-3));
        assert_eq!(r[0][4], "true");
        assert_eq!(r[1][4], "true");
        assert_eq!(r[2][4], "false");
        assert!(report.minimum_defense[0].1.unwrap().value() > 0.0);
    }
}
