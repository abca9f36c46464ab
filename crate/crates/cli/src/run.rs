//! Experiment dispatch: compose the simulator's operations per the resolved
//! configuration and collect labeled result tables.

use std::collections::BTreeMap;
use thiserror::Error;

use two_ion_sim::cooling::{
    d4_coefficient, fit_heating_rate, heat_delay, run_schedule, CoolingError, FitError,
    HeatingRecord, RecordError, RecordSelection,
};
use two_ion_sim::crystal::{
    ion_separation, lamb_dicke, mode_spectrum, CrystalError, Mode, ModeLabel, TrapConfig,
};
use two_ion_sim::dynamics::{
    carrier_flop_multi, sideband_flop, spectrum, DynamicsError, PulseKind, Sideband,
};
use two_ion_sim::measurement::{discrimination_error, sample_shots, MeasurementError};
use two_ion_sim::phonon::FockDistribution;

use crate::config::{Experiment, ResolvedConfig};
use crate::output::{Cell, Metadata, RunOutput, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("crystal: {0}")]
    Crystal(#[from] CrystalError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("cooling: {0}")]
    Cooling(#[from] CoolingError),
    #[error("fit: {0}")]
    Fit(#[from] FitError),
    #[error("measurement: {0}")]
    Measurement(#[from] MeasurementError),
    #[error("records: {0}")]
    Records(#[from] RecordError),
    #[error("phonon: {0}")]
    Phonon(#[from] two_ion_sim::phonon::PhononError),
    #[error("experiment needs a [trap] section")]
    MissingTrap,
}

const KHZ: f64 = 2.0 * std::f64::consts::PI * 1e3;

struct CrystalContext {
    modes: Vec<Mode>,
    etas: BTreeMap<ModeLabel, f64>,
    separation: f64,
}

fn crystal_context(cfg: &ResolvedConfig, trap: &TrapConfig) -> Result<CrystalContext, RunError> {
    let modes = mode_spectrum(trap)?;
    let etas = modes
        .iter()
        .map(|mode| (mode.label, lamb_dicke(mode, &cfg.species, &cfg.beam)))
        .collect();
    let separation = ion_separation(trap, &cfg.species)?;
    Ok(CrystalContext { modes, etas, separation })
}

fn crystal_notes(context: &CrystalContext) -> Vec<String> {
    let mut notes =
        vec![format!("two-ion separation: {:.4} um", context.separation * 1e6)];
    for mode in &context.modes {
        notes.push(format!(
            "mode {}: frequency {:.4} kHz, lamb_dicke {:.5}",
            mode.label,
            mode.frequency / KHZ,
            context.etas[&mode.label]
        ));
    }
    notes
}

/// Execute the configured experiment. Deterministic for a fixed config and
/// seed.
pub fn run(cfg: &ResolvedConfig) -> Result<RunOutput, RunError> {
    let mut tables = Vec::new();
    let mut notes = Vec::new();

    let context = match (&cfg.trap, &cfg.experiment) {
        (_, Experiment::HeatingAnalysis { .. }) => None,
        (Some(trap), _) => {
            let context = crystal_context(cfg, trap)?;
            notes.extend(crystal_notes(&context));
            Some(context)
        }
        (None, _) => return Err(RunError::MissingTrap),
    };

    match &cfg.experiment {
        Experiment::SpectrumScan { detunings, probe, initial } => {
            let context = context.as_ref().expect("trap present");
            let scan = spectrum(detunings, probe, &context.modes, &context.etas, initial)?;
            let mut table = Table::new("spectrum", &["detuning_khz", "excitation_probability"]);
            for (detuning, probability) in scan {
                table.push_row(vec![Cell::Number(detuning / KHZ), Cell::Number(probability)]);
            }
            tables.push(table);
        }
        Experiment::RabiScan { line, rabi, durations, initial } => {
            let context = context.as_ref().expect("trap present");
            let mut table = Table::new("rabi", &["duration_us", "excitation_probability"]);
            match line {
                PulseKind::Carrier => {
                    // Every coupled mode dephases the carrier.
                    let spectators: Vec<(&FockDistribution, f64)> = context
                        .modes
                        .iter()
                        .filter(|mode| context.etas[&mode.label] != 0.0)
                        .map(|mode| {
                            let dist = initial
                                .get(mode.label)
                                .ok_or(DynamicsError::MissingModeState(mode.label))?;
                            Ok::<_, DynamicsError>((dist, context.etas[&mode.label]))
                        })
                        .collect::<Result<_, _>>()?;
                    for &t in durations {
                        let p = carrier_flop_multi(&spectators, *rabi, t)?;
                        table.push_row(vec![Cell::Number(t * 1e6), Cell::Number(p)]);
                    }
                }
                PulseKind::RedSideband(mode) | PulseKind::BlueSideband(mode) => {
                    let side = match line {
                        PulseKind::RedSideband(_) => Sideband::Red,
                        _ => Sideband::Blue,
                    };
                    let dist =
                        initial.get(*mode).ok_or(DynamicsError::MissingModeState(*mode))?;
                    let eta = context.etas[mode];
                    if eta == 0.0 {
                        notes.push(format!(
                            "mode {mode} does not couple to the beam (lamb_dicke = 0); the scan is flat"
                        ));
                    }
                    for &t in durations {
                        let p = sideband_flop(dist, eta, *rabi, t, side);
                        table.push_row(vec![Cell::Number(t * 1e6), Cell::Number(p)]);
                    }
                }
                PulseKind::Delay => unreachable!("delay is not a scannable line"),
            }
            tables.push(table);
        }
        Experiment::CoolingSchedule { pulses, heating, initial } => {
            let (final_states, log) = run_schedule(initial, pulses, heating)?;

            let mut schedule =
                Table::new("schedule", &["pulse_index", "mode", "n_bar_after"]);
            for entry in &log {
                schedule.push_row(vec![
                    Cell::Integer(entry.pulse_index as i64),
                    Cell::Text(entry.mode.to_string()),
                    Cell::Number(entry.n_bar[&entry.mode]),
                ]);
            }
            tables.push(schedule);

            let mut final_table =
                Table::new("final_states", &["mode", "n_bar", "ground_population"]);
            for (label, dist) in final_states.iter() {
                final_table.push_row(vec![
                    Cell::Text(label.to_string()),
                    Cell::Number(dist.mean_phonon()),
                    Cell::Number(dist.ground_pop()),
                ]);
            }
            tables.push(final_table);
        }
        Experiment::HeatingScan { mode, heating_rate, delays, initial_n_bar } => {
            let initial = FockDistribution::thermal(*initial_n_bar, 0)?;
            let mut table = Table::new("heating", &["delay_ms", "n_bar"]);
            let mut samples = Vec::with_capacity(delays.len());
            for &delay in delays {
                let heated = heat_delay(&initial, *heating_rate, delay)?;
                let n_bar = heated.mean_phonon();
                samples.push((delay, n_bar));
                table.push_row(vec![Cell::Number(delay * 1e3), Cell::Number(n_bar)]);
            }
            tables.push(table);

            if samples.len() >= 2 {
                let fitted = fit_heating_rate(&samples)?;
                let mut fit_table = Table::new("heating_fit", &["rate_per_s"]);
                fit_table.push_row(vec![Cell::Number(fitted)]);
                tables.push(fit_table);
                notes.push(format!("fitted heating rate for {mode}: {fitted:.4} phonons/s"));
            }
        }
        Experiment::HistogramRun { p_d, shots } => {
            let (histogram, records) = sample_shots(*p_d, &cfg.detection, *shots, cfg.seed)?;

            let mut histogram_table = Table::new("histogram", &["photon_count", "shots"]);
            for (count, occurrences) in histogram.count_pairs() {
                histogram_table
                    .push_row(vec![Cell::Integer(count as i64), Cell::Integer(occurrences as i64)]);
            }
            tables.push(histogram_table);

            let mut classified = [0u64; 3];
            for record in &records {
                classified[record.classified_bright as usize] += 1;
            }
            let mut class_table = Table::new("classification", &["bright_ions", "fraction"]);
            for (bright, count) in classified.iter().enumerate() {
                class_table.push_row(vec![
                    Cell::Integer(bright as i64),
                    Cell::Number(*count as f64 / *shots as f64),
                ]);
            }
            tables.push(class_table);

            let report = discrimination_error(&cfg.detection);
            let mut disc = Table::new("discrimination", &["bright_ions", "error_probability"]);
            for (bright, error) in report.per_class.iter().enumerate() {
                disc.push_row(vec![Cell::Integer(bright as i64), Cell::Number(*error)]);
            }
            tables.push(disc);
            notes.push(format!(
                "discrimination error: worst {:.4}, mean {:.4} (thresholds {} / {})",
                report.worst, report.mean, cfg.detection.thresholds.0, cfg.detection.thresholds.1
            ));
            if report.degenerate {
                notes.push(
                    "detection means are degenerate: photon counts carry no state information"
                        .to_string(),
            );
            }
        }
        Experiment::HeatingAnalysis { records, groups } => {
            let mut record_table = Table::new(
                "normalized_rates",
                &["trap", "ion", "mode", "size_mm", "normalized_rate", "d4_value"],
            );
            for record in records {
                record_table.push_row(vec![
                    Cell::Text(record.trap.clone()),
                    Cell::Text(record.ion.clone()),
                    Cell::Text(record.mode.clone()),
                    Cell::Number(record.size_mm),
                    Cell::Number(record.normalized().unwrap_or(f64::NAN)),
                    Cell::Number(record.d4_value().unwrap_or(f64::NAN)),
                ]);
            }
            tables.push(record_table);

            let mut group_table = Table::new(
                "d4_coefficients",
                &["group", "coefficient", "records", "reference", "consistent"],
            );
            for group in groups {
                let selected: Vec<HeatingRecord> = records
                    .iter()
                    .filter(|r| group.ion.as_ref().is_none_or(|ion| &r.ion == ion))
                    .filter(|r| {
                        group
                            .trap_contains
                            .as_ref()
                            .is_none_or(|fragment| r.trap.contains(fragment))
                    })
                    .cloned()
                    .collect();
                let selection =
                    if group.com_only { RecordSelection::ComOnly } else { RecordSelection::All };
                let fit = d4_coefficient(&selected, selection)?;

                let (reference_cell, consistent_cell) = match group.reference {
                    Some(reference) => {
                        let tolerance = group.reference_tolerance.unwrap_or(0.0);
                        let consistent = (fit.coefficient - reference).abs() <= tolerance;
                        if !consistent {
                            notes.push(format!(
                                "group {}: coefficient {:.2} is inconsistent with the reference {} ± {}",
                                group.name, fit.coefficient, reference, tolerance
                            ));
                        }
                        (
                            Cell::Number(reference),
                            Cell::Text(if consistent { "yes".into() } else { "no".into() }),
                        )
                    }
                    None => (Cell::Text(String::new()), Cell::Text(String::new())),
                };
                group_table.push_row(vec![
                    Cell::Text(group.name.clone()),
                    Cell::Number(fit.coefficient),
                    Cell::Integer(fit.records_used as i64),
                    reference_cell,
                    consistent_cell,
                ]);
            }
            tables.push(group_table);
        }
    }

    Ok(RunOutput {
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: cfg.experiment.kind().to_string(),
            seed: cfg.seed,
            config_echo: crate::config::echo_to_toml(&cfg.echo),
        },
        tables,
        notes,
    })
}
