//! Per-sample calibration of a whole dataset: loss-curve fit, recovery
//! constant, dark relaxation, and replicate validation flags.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::modulator::dataset::{check_replicates, Dataset, IrradiationSeries, Phase};
use crate::modulator::fit::{fit_model, fit_recovery_tau, ModelFit};
use crate::modulator::ModulatorKind;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCalibration {
    pub sample_id: String,
    pub kind: ModulatorKind,
    /// Loss-curve fit with recovery constant and dark rate attached.
    pub fit: Result<ModelFit>,
    /// Whether the recovery constant came from a measured series.
    pub recovery_measured: bool,
    pub flags: Vec<String>,
}

impl SampleCalibration {
    pub fn is_ok(&self) -> bool {
        self.fit.is_ok()
    }
}

fn recovery_series<'a>(data: &'a Dataset, id: &str, base: &str) -> Option<&'a IrradiationSeries> {
    data.series(id, Phase::Recovery)
        .or_else(|| data.series(base, Phase::Recovery))
}

fn calibrate_one(
    data: &Dataset,
    series: &IrradiationSeries,
) -> (Result<ModelFit>, bool, Vec<String>) {
    let mut flags = Vec::new();
    let mut fit = match fit_model(series) {
        Ok(f) => f,
        Err(e) => return (Err(e), false, flags),
    };

    let mut measured = false;
    if let Some(rec) = recovery_series(data, &series.sample_id, series.base_sample()) {
        let initial = series.last().insertion_loss;
        match fit_recovery_tau(rec, initial).and_then(|tau| fit.model.with_recovery_tau(tau)) {
            Ok(m) => {
                fit.model = m;
                measured = true;
            }
            Err(e) => flags.push(format!("recovery_fit_failed({e})")),
        }
    }

    if let Some(record) = data.record(&series.sample_id) {
        match fit
            .model
            .with_dark_relaxation(record.dark_relaxation_per_day())
        {
            Ok(m) => fit.model = m,
            Err(e) => flags.push(format!("dark_relaxation_invalid({e})")),
        }
    }
    (Ok(fit), measured, flags)
}

/// Calibrates every alteration series in the dataset, in file order.
pub fn calibrate_dataset(data: &Dataset, exec: Execution) -> Vec<SampleCalibration> {
    let alteration: Vec<&IrradiationSeries> = data
        .series
        .iter()
        .filter(|s| s.phase == Phase::Alteration)
        .collect();
    let replicate_checks = check_replicates(data);

    let results = exec.map(&alteration, |s| calibrate_one(data, s));
    alteration
        .into_iter()
        .zip(results)
        .map(|(series, (fit, recovery_measured, mut flags))| {
            for check in replicate_checks
                .iter()
                .filter(|c| c.replicate_id == series.sample_id && !c.within_tolerance())
            {
                flags.push(format!(
                    "replicate_divergence(vs {}: {:.3} dB > {} dB)",
                    check.primary_id,
                    check.max_deviation.value(),
                    check.tolerance.value()
                ));
            }
            if let Err(e) = &fit {
                flags.push(format!("fit_failed({e})"));
            }
            SampleCalibration {
                sample_id: series.sample_id.clone(),
                kind: data.kind_of(&series.sample_id),
                fit,
                recovery_measured,
                flags,
            }
        })
        .collect()
}

/// Calibrated model of one named sample.
pub fn calibrated_model(data: &Dataset, sample_id: &str) -> Result<ModelFit> {
    let series = data
        .series(sample_id, Phase::Alteration)
        .ok_or_else(|| Error::Fit {
            sample: sample_id.to_string(),
            reason: "no alteration series in dataset".into(),
        })?;
    calibrate_one(data, series).0
}
