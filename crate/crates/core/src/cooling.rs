//! Doppler-limit estimate, resolved sideband cooling as a per-mode
//! birth-death process, multi-mode cooling schedules, free heating during
//! delays, and heating-rate analysis across traps.
//!
//! Cooling of one mode is modeled phenomenologically by a phonon-removal
//! rate `R` (downward rate `R·n`). Ambient electric-field noise acts as an
//! infinite-temperature bath with rate `ṅ`: upward `ṅ·(n+1)`, downward
//! `ṅ·n`. The resulting master equation
//!
//! ```text
//! dp_n/dt = (R+ṅ)(n+1)·p_{n+1} − [(R+ṅ)n + ṅ(n+1)]·p_n + ṅ·n·p_{n−1}
//! ```
//!
//! keeps the mean on `dn̄/dt = −R·n̄ + ṅ`, so
//! `n̄(t) = n̄_ss + (n̄₀ − n̄_ss)·e^(−Rt)` with `n̄_ss = ṅ/R`, and its steady
//! state is thermal: `p_{n+1}/p_n = n̄_ss/(n̄_ss+1)`. With `R = 0` the mean
//! grows linearly, `n̄(t) = n̄₀ + ṅ·t`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::crystal::ModeLabel;
use crate::phonon::{thermal_truncation, FockDistribution, ModeStateSet};

#[derive(Debug, Error, PartialEq)]
pub enum CoolingError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("truncation tail exceeded {bound:.0e} during evolution (top-bin mass {mass:.3e})")]
    TruncationOverflow { mass: f64, bound: f64 },
    #[error("probability {value:.3e} at index {index} became negative during evolution")]
    NegativeProbability { index: usize, value: f64 },
    #[error("no phonon distribution supplied for mode {0}")]
    MissingModeState(ModeLabel),
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples must have positive occupation values")]
    NonPositiveSample,
    #[error("sample abscissa is degenerate (all times equal)")]
    DegenerateAbscissa,
    #[error("data does not decay; no exponential cooling fit exists")]
    NonDecaying,
}

/// Effective-linewidth parameters of the Doppler cooling transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerParams {
    /// Effective linewidth of the cooling transition, rad/s.
    pub gamma_eff: f64,
    /// Beam-angle / recoil correction factor, ≥ 1 (1 = ideal geometry).
    pub geometry_factor: f64,
}

impl DopplerParams {
    pub fn validate(&self) -> Result<(), CoolingError> {
        if !(self.gamma_eff > 0.0) {
            return Err(CoolingError::InvalidInput("gamma_eff must be positive"));
        }
        if !(self.geometry_factor >= 1.0) {
            return Err(CoolingError::InvalidInput("geometry_factor must be at least 1"));
        }
        Ok(())
    }
}

/// Doppler cooling limit of one mode in phonons:
/// `n̄ = G · Γ_eff / (2·ω_mode)` (the `k_B·T = ħΓ/2` limit, scaled by the
/// geometry factor).
pub fn doppler_limit(params: &DopplerParams, omega_mode: f64) -> f64 {
    params.geometry_factor * params.gamma_eff / (2.0 * omega_mode)
}

/// One sideband cooling pulse on a named mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingPulseParams {
    pub mode: ModeLabel,
    /// Pulse duration, seconds.
    pub duration: f64,
    /// Phonon-removal rate coefficient `R`, 1/s (1/e time is `1/R`).
    pub cool_rate: f64,
    /// Residual occupation floor added on top of the ambient-heating floor,
    /// modeling imperfect cooling; contributes `R·steady_n` of upward rate.
    pub steady_n: f64,
}

impl CoolingPulseParams {
    pub fn validate(&self) -> Result<(), CoolingError> {
        if !(self.duration >= 0.0) {
            return Err(CoolingError::InvalidInput("duration must be nonnegative"));
        }
        if !(self.cool_rate >= 0.0) {
            return Err(CoolingError::InvalidInput("cool_rate must be nonnegative"));
        }
        if !(self.steady_n >= 0.0) {
            return Err(CoolingError::InvalidInput("steady_n must be nonnegative"));
        }
        Ok(())
    }
}

/// Top-bin probability mass that aborts the evolution.
const EVOLUTION_TAIL_BOUND: f64 = 1e-6;
/// Capacity is planned so a thermal state at the largest expected mean keeps
/// its analytic tail below this.
const CAPACITY_TAIL: f64 = 1e-12;
/// Negative values beyond integrator rounding abort the evolution.
const NEGATIVE_SLACK: f64 = 1e-12;

/// Integrate the birth-death master equation for `duration` seconds.
fn evolve(
    dist: &FockDistribution,
    cool_rate: f64,
    heat_rate: f64,
    duration: f64,
) -> Result<FockDistribution, CoolingError> {
    if duration == 0.0 || (cool_rate == 0.0 && heat_rate == 0.0) {
        return Ok(dist.clone());
    }

    // Plan capacity for the largest mean the trajectory can visit; the state
    // stays near-thermal throughout, so the analytic thermal tail applies.
    let initial_mean = dist.mean_phonon();
    let peak_mean = if cool_rate > 0.0 {
        initial_mean.max(heat_rate / cool_rate)
    } else {
        initial_mean + heat_rate * duration
    };
    let n_max = dist.n_max().max(thermal_truncation(peak_mean, CAPACITY_TAIL));
    let mut p = dist.extended_to(n_max).probs().to_vec();
    let size = p.len();

    // Downward rate from n: (R+ṅ)·n. Upward rate from n: ṅ·(n+1).
    let down = cool_rate + heat_rate;
    let up = heat_rate;
    let rate_scale = (down + up) * size as f64;
    let steps = (duration * rate_scale / 0.5).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;

    let derivative = |p: &[f64], dp: &mut [f64]| {
        for n in 0..size {
            let nf = n as f64;
            let mut acc = -(down * nf + up * (nf + 1.0)) * p[n];
            if n + 1 < size {
                acc += down * (nf + 1.0) * p[n + 1];
            }
            if n > 0 {
                acc += up * nf * p[n - 1];
            }
            dp[n] = acc;
        }
    };

    let mut k1 = vec![0.0; size];
    let mut k2 = vec![0.0; size];
    let mut k3 = vec![0.0; size];
    let mut k4 = vec![0.0; size];
    let mut scratch = vec![0.0; size];

    for _ in 0..steps {
        derivative(&p, &mut k1);
        for i in 0..size {
            scratch[i] = p[i] + 0.5 * dt * k1[i];
        }
        derivative(&scratch, &mut k2);
        for i in 0..size {
            scratch[i] = p[i] + 0.5 * dt * k2[i];
        }
        derivative(&scratch, &mut k3);
        for i in 0..size {
            scratch[i] = p[i] + dt * k3[i];
        }
        derivative(&scratch, &mut k4);

        let mut sum = 0.0;
        for i in 0..size {
            let mut value = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if value < 0.0 {
                if value < -NEGATIVE_SLACK {
                    return Err(CoolingError::NegativeProbability { index: i, value });
                }
                value = 0.0;
            }
            p[i] = value;
            sum += value;
        }
        for value in &mut p {
            *value /= sum;
        }
        if p[size - 1] > EVOLUTION_TAIL_BOUND {
            return Err(CoolingError::TruncationOverflow {
                mass: p[size - 1],
                bound: EVOLUTION_TAIL_BOUND,
            });
        }
    }

    Ok(FockDistribution::from_raw_normalized(p))
}

/// Apply one sideband cooling pulse while ambient heating at `heating_rate`
/// (phonons/s) stays active.
pub fn cool_pulse(
    dist: &FockDistribution,
    params: &CoolingPulseParams,
    heating_rate: f64,
) -> Result<FockDistribution, CoolingError> {
    params.validate()?;
    if !(heating_rate >= 0.0) {
        return Err(CoolingError::InvalidInput("heating_rate must be nonnegative"));
    }
    let effective_heat = heating_rate + params.cool_rate * params.steady_n;
    evolve(dist, params.cool_rate, effective_heat, params.duration)
}

/// Free evolution under ambient heating only; the mean grows as `n̄₀ + ṅ·t`.
pub fn heat_delay(
    dist: &FockDistribution,
    heating_rate: f64,
    t_delay: f64,
) -> Result<FockDistribution, CoolingError> {
    if !(heating_rate >= 0.0) {
        return Err(CoolingError::InvalidInput("heating_rate must be nonnegative"));
    }
    if !(t_delay >= 0.0) {
        return Err(CoolingError::InvalidInput("t_delay must be nonnegative"));
    }
    evolve(dist, 0.0, heating_rate, t_delay)
}

/// Mean occupation of every mode after one schedule pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePulseLog {
    pub pulse_index: usize,
    /// Mode the pulse cooled.
    pub mode: ModeLabel,
    pub duration: f64,
    /// n̄ per mode at the end of this pulse.
    pub n_bar: BTreeMap<ModeLabel, f64>,
}

/// Run a multi-mode cooling schedule.
///
/// Pulses are applied in order; while one mode is cooled every other mode
/// heats freely at its own ambient rate for the pulse duration. Modes absent
/// from `heating_rates` do not heat.
pub fn run_schedule(
    states: &ModeStateSet,
    pulses: &[CoolingPulseParams],
    heating_rates: &BTreeMap<ModeLabel, f64>,
) -> Result<(ModeStateSet, Vec<SchedulePulseLog>), CoolingError> {
    for pulse in pulses {
        if states.get(pulse.mode).is_none() {
            return Err(CoolingError::MissingModeState(pulse.mode));
        }
    }
    let rate = |label: ModeLabel| heating_rates.get(&label).copied().unwrap_or(0.0);

    let mut current: BTreeMap<ModeLabel, FockDistribution> =
        states.iter().map(|(label, dist)| (label, dist.clone())).collect();
    let mut log = Vec::with_capacity(pulses.len());

    for (pulse_index, pulse) in pulses.iter().enumerate() {
        let mut next = BTreeMap::new();
        for (label, dist) in &current {
            let evolved = if *label == pulse.mode {
                cool_pulse(dist, pulse, rate(*label))?
            } else {
                heat_delay(dist, rate(*label), pulse.duration)?
            };
            next.insert(*label, evolved);
        }
        current = next;
        log.push(SchedulePulseLog {
            pulse_index,
            mode: pulse.mode,
            duration: pulse.duration,
            n_bar: current.iter().map(|(label, dist)| (*label, dist.mean_phonon())).collect(),
        });
    }

    Ok((current.into_iter().collect(), log))
}

/// Result of fitting `n̄(t) = floor + amplitude·e^(−t/τ)` to cooling data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingTimeFit {
    /// 1/e cooling time, seconds.
    pub tau: f64,
    /// Fitted occupation floor.
    pub floor: f64,
    /// Fitted decaying amplitude (initial n̄ minus floor).
    pub amplitude: f64,
    /// Time at which the fitted trajectory crosses n̄ = 1, if it does.
    pub time_to_one_phonon: Option<f64>,
    pub rms_residual: f64,
}

fn exponential_sse(samples: &[(f64, f64)], tau: f64) -> (f64, f64, f64) {
    // Linear least squares in (floor, amplitude) for fixed tau.
    let n = samples.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in samples {
        let basis = (-t / tau).exp();
        se += basis;
        see += basis * basis;
        sy += y;
        sey += basis * y;
    }
    let det = n * see - se * se;
    if det.abs() < 1e-300 {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let floor = (sy * see - se * sey) / det;
    let amplitude = (n * sey - se * sy) / det;
    let sse: f64 = samples
        .iter()
        .map(|&(t, y)| {
            let model = floor + amplitude * (-t / tau).exp();
            (y - model) * (y - model)
        })
        .sum();
    (sse, floor, amplitude)
}

/// Least-squares fit of an exponential cooling trajectory; returns the 1/e
/// time and the crossing time of one phonon.
pub fn fit_cooling_time(samples: &[(f64, f64)]) -> Result<CoolingTimeFit, FitError> {
    if samples.len() < 3 {
        return Err(FitError::TooFewSamples { needed: 3, got: samples.len() });
    }
    if samples.iter().any(|&(_, y)| !(y > 0.0)) {
        return Err(FitError::NonPositiveSample);
    }
    let t_min = samples.iter().map(|&(t, _)| t).fold(f64::INFINITY, f64::min);
    let t_max = samples.iter().map(|&(t, _)| t).fold(f64::NEG_INFINITY, f64::max);
    let span = t_max - t_min;
    if !(span > 0.0) {
        return Err(FitError::DegenerateAbscissa);
    }

    // Coarse log-spaced scan over tau, then golden-section refinement.
    let (lo, hi) = (span / 1e3, span * 1e2);
    let grid = 256;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=grid {
        let tau = lo * (hi / lo).powf(k as f64 / grid as f64);
        let (sse, _, _) = exponential_sse(samples, tau);
        if sse < best.0 {
            best = (sse, tau);
        }
    }
    let step = (hi / lo).powf(1.0 / grid as f64);
    let (mut a, mut b) = (best.1 / step, best.1 * step);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if exponential_sse(samples, c).0 < exponential_sse(samples, d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let tau = (a + b) / 2.0;
    let (sse, floor, amplitude) = exponential_sse(samples, tau);
    if amplitude <= 0.0 {
        return Err(FitError::NonDecaying);
    }

    let time_to_one_phonon = if floor < 1.0 && floor + amplitude > 1.0 {
        Some(tau * (amplitude / (1.0 - floor)).ln())
    } else {
        None
    };

    Ok(CoolingTimeFit {
        tau,
        floor,
        amplitude,
        time_to_one_phonon,
        rms_residual: (sse / samples.len() as f64).sqrt(),
    })
}

/// Linear least-squares slope of `(t_delay, n̄)` samples, phonons/s.
pub fn fit_heating_rate(samples: &[(f64, f64)]) -> Result<f64, FitError> {
    if samples.len() < 2 {
        return Err(FitError::TooFewSamples { needed: 2, got: samples.len() });
    }
    let n = samples.len() as f64;
    let t_mean = samples.iter().map(|&(t, _)| t).sum::<f64>() / n;
    let y_mean = samples.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for &(t, y) in samples {
        stt += (t - t_mean) * (t - t_mean);
        sty += (t - t_mean) * (y - y_mean);
    }
    if stt == 0.0 {
        return Err(FitError::DegenerateAbscissa);
    }
    Ok(sty / stt)
}

/// Heating-rate normalization to a 1 MHz trap frequency (constant absorbed
/// power): `Ṅ = rate × frequency[MHz]`.
pub fn normalize_heating(rate_per_s: f64, frequency_mhz: f64) -> f64 {
    rate_per_s * frequency_mhz
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("heating record {index} is invalid: {reason}")]
    InvalidRecord { index: usize, reason: &'static str },
    #[error("no usable records after selection (need a normalized rate or rate plus frequency)")]
    NoUsableRecords,
    #[error("failed to read heating records: {0}")]
    Parse(String),
}

/// One measured heating-rate entry for a trap and mode.
///
/// Either `normalized_rate` or both `rate_per_s` and `frequency_mhz` must be
/// present for the record to enter the distance-scaling analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingRecord {
    pub trap: String,
    pub ion: String,
    /// Characteristic ion-electrode distance, mm.
    pub size_mm: f64,
    pub mode: String,
    pub frequency_mhz: Option<f64>,
    pub rate_per_s: Option<f64>,
    pub normalized_rate: Option<f64>,
}

impl HeatingRecord {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.size_mm > 0.0) {
            return Err("size_mm must be positive");
        }
        if let Some(f) = self.frequency_mhz {
            if !(f > 0.0) {
                return Err("frequency_mhz must be positive");
            }
        }
        if let Some(r) = self.rate_per_s {
            if !(r >= 0.0) {
                return Err("rate_per_s must be nonnegative");
            }
        }
        if self.normalized().is_none() {
            return Err("record carries neither a normalized rate nor rate plus frequency");
        }
        Ok(())
    }

    /// Normalized heating rate at 1 MHz, from the stored column or computed
    /// from the raw rate.
    pub fn normalized(&self) -> Option<f64> {
        self.normalized_rate.or_else(|| {
            match (self.rate_per_s, self.frequency_mhz) {
                (Some(rate), Some(freq)) => Some(normalize_heating(rate, freq)),
                _ => None,
            }
        })
    }

    /// Center-of-mass modes are the usual basis for cross-trap comparison.
    pub fn is_com(&self) -> bool {
        self.mode.to_ascii_lowercase().contains("c.o.m")
    }

    /// `Ṅ·d⁴` with `d` in mm.
    pub fn d4_value(&self) -> Option<f64> {
        self.normalized().map(|n| n * self.size_mm.powi(4))
    }
}

/// Read heating records from delimited text with a header row:
/// `trap,ion,size_mm,mode,frequency_mhz,rate_per_s,normalized_rate`.
/// Empty numeric cells mean "not measured".
pub fn parse_heating_records(text: &str) -> Result<Vec<HeatingRecord>, RecordError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (index, row) in reader.deserialize::<HeatingRecord>().enumerate() {
        let record = row.map_err(|e| RecordError::Parse(e.to_string()))?;
        record.validate().map_err(|reason| RecordError::InvalidRecord { index, reason })?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSelection {
    All,
    ComOnly,
}

/// Aggregate coefficient of the distance-scaling law `Ṅ = c·d⁴[mm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct D4Coefficient {
    /// Mean of `Ṅ·d⁴` over the selected records.
    pub coefficient: f64,
    /// Per-record `Ṅ·d⁴` values in input order.
    pub per_record: Vec<f64>,
    pub records_used: usize,
}

/// Mean `Ṅ·d⁴` over the selected records. Records without a usable
/// normalized rate are ignored; an empty selection is an error.
pub fn d4_coefficient(
    records: &[HeatingRecord],
    selection: RecordSelection,
) -> Result<D4Coefficient, RecordError> {
    let per_record: Vec<f64> = records
        .iter()
        .filter(|r| selection == RecordSelection::All || r.is_com())
        .filter_map(|r| r.d4_value())
        .collect();
    if per_record.is_empty() {
        return Err(RecordError::NoUsableRecords);
    }
    let coefficient = per_record.iter().sum::<f64>() / per_record.len() as f64;
    Ok(D4Coefficient { coefficient, records_used: per_record.len(), per_record })
}
