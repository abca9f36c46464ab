//! Declarative experiment configuration: a TOML document with bench units
//! (kHz, MHz, µm, ms) parsed, validated, and resolved into the simulator's
//! internal angular/SI quantities.
//!
//! Every omitted optional field gets its documented default applied
//! explicitly; the fully resolved document is echoed back with the run so a
//! config can be reproduced from any output directory.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

use two_ion_sim::cooling::{
    doppler_limit, CoolingPulseParams, DopplerParams, HeatingRecord,
};
use two_ion_sim::crystal::{mode_spectrum, BeamGeometry, IonSpecies, ModeLabel, TrapConfig};
use two_ion_sim::dynamics::{Pulse, PulseKind};
use two_ion_sim::measurement::{auto_thresholds, DetectionConfig};
use two_ion_sim::phonon::{FockDistribution, ModeStateSet};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("missing required field `{path}`")]
    MissingField { path: String },
    #[error("invalid value at `{path}`: {reason}")]
    InvalidValue { path: String, reason: String },
    #[error("experiment kind is `{kind}` but section `{section}` is present")]
    MismatchedSection { kind: String, section: String },
    #[error("failed to read `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(path: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { path: path.to_string(), reason: reason.into() }
}

fn missing(path: &str) -> ConfigError {
    ConfigError::MissingField { path: path.to_string() }
}

// ---------------------------------------------------------------------------
// Raw document (bench units, everything optional where a default exists)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub species: Option<SpeciesSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam: Option<BeamSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doppler: Option<DopplerSection>,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub axial_khz: Option<f64>,
    /// Sets both radial frequencies; alternative to the x/y pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_x_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_y_mhz: Option<f64>,
    pub electrode_distance_mm: Option<f64>,
    pub rf_drive_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    pub mass_amu: Option<f64>,
    pub qubit_wavelength_nm: Option<f64>,
    pub dipole_linewidth_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub angle_to_axis_deg: Option<f64>,
    pub waist_um: Option<f64>,
    pub center_offset_um: Option<f64>,
    pub peak_rabi_khz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub window_ms: Option<f64>,
    pub background_mean: Option<f64>,
    pub per_ion_bright_mean: Option<f64>,
    /// `[t1, t2]`; omitted means valley-minimum placement.
    pub thresholds: Option<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerSection {
    pub gamma_eff_mhz: Option<f64>,
    pub geometry_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_scan: Option<SpectrumScanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_scan: Option<RabiScanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cooling_schedule: Option<CoolingScheduleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heating_scan: Option<HeatingScanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram_run: Option<HistogramRunSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heating_analysis: Option<HeatingAnalysisSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumScanSection {
    pub detuning_start_khz: Option<f64>,
    pub detuning_stop_khz: Option<f64>,
    pub points: Option<usize>,
    pub probe_duration_us: Option<f64>,
    pub probe_rabi_khz: Option<f64>,
    /// Mean occupation per mode; omitted modes start at the Doppler limit.
    pub initial_n_bar: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiScanSection {
    /// `carrier`, `red_sideband`, or `blue_sideband`.
    pub line: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub rabi_khz: Option<f64>,
    pub duration_start_us: Option<f64>,
    pub duration_stop_us: Option<f64>,
    pub points: Option<usize>,
    pub initial_n_bar: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingScheduleSection {
    pub pulses: Option<Vec<PulseSection>>,
    /// Ambient heating per mode, phonons/s; omitted modes do not heat.
    pub heating_rates_per_s: Option<BTreeMap<String, f64>>,
    pub initial_n_bar: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub mode: Option<String>,
    pub duration_ms: Option<f64>,
    /// 1/e cooling time; alternative to `rate_per_s`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_per_s: Option<f64>,
    pub steady_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatingScanSection {
    pub mode: Option<String>,
    pub heating_rate_per_s: Option<f64>,
    pub delays_ms: Option<Vec<f64>>,
    pub initial_n_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramRunSection {
    /// Shelving probability per ion.
    pub p_d: Option<[f64; 2]>,
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatingAnalysisSection {
    /// Delimited records file, relative to the config file's directory.
    pub records_file: Option<String>,
    pub groups: Option<Vec<GroupSection>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trap_contains: Option<String>,
    pub com_only: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_tolerance: Option<f64>,
}

/// Parse a TOML configuration document. Unknown keys are rejected with the
/// offending location in the message.
pub fn parse_config(text: &str) -> Result<ConfigDocument, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
}

// ---------------------------------------------------------------------------
// Resolved configuration (internal units, defaults applied)
// ---------------------------------------------------------------------------

pub const DEFAULT_ELECTRODE_DISTANCE_MM: f64 = 1.18;
pub const DEFAULT_RF_DRIVE_MHZ: f64 = 16.0;
pub const DEFAULT_BEAM_ANGLE_DEG: f64 = 67.5;
pub const DEFAULT_WAIST_UM: f64 = 3.7;
pub const DEFAULT_PEAK_RABI_KHZ: f64 = 50.0;
pub const DEFAULT_WINDOW_MS: f64 = 11.8;
pub const DEFAULT_BACKGROUND_MEAN: f64 = 19.0;
pub const DEFAULT_PER_ION_BRIGHT_MEAN: f64 = 30.0;
pub const DEFAULT_GAMMA_EFF_MHZ: f64 = 30.0;
pub const DEFAULT_GEOMETRY_FACTOR: f64 = 2.1;

const KHZ: f64 = 2.0 * PI * 1e3;
const MHZ: f64 = 2.0 * PI * 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    SpectrumScan { detunings: Vec<f64>, probe: Pulse, initial: ModeStateSet },
    RabiScan { line: PulseKind, rabi: f64, durations: Vec<f64>, initial: ModeStateSet },
    CoolingSchedule {
        pulses: Vec<CoolingPulseParams>,
        heating: BTreeMap<ModeLabel, f64>,
        initial: ModeStateSet,
    },
    HeatingScan { mode: ModeLabel, heating_rate: f64, delays: Vec<f64>, initial_n_bar: f64 },
    HistogramRun { p_d: [f64; 2], shots: u64 },
    HeatingAnalysis { records: Vec<HeatingRecord>, groups: Vec<AnalysisGroup> },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::SpectrumScan { .. } => "spectrum_scan",
            Experiment::RabiScan { .. } => "rabi_scan",
            Experiment::CoolingSchedule { .. } => "cooling_schedule",
            Experiment::HeatingScan { .. } => "heating_scan",
            Experiment::HistogramRun { .. } => "histogram_run",
            Experiment::HeatingAnalysis { .. } => "heating_analysis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisGroup {
    pub name: String,
    pub ion: Option<String>,
    pub trap_contains: Option<String>,
    pub com_only: bool,
    pub reference: Option<f64>,
    pub reference_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub seed: u64,
    /// Absent only for experiments that do not involve the trap.
    pub trap: Option<TrapConfig>,
    pub species: IonSpecies,
    pub beam: BeamGeometry,
    pub detection: DetectionConfig,
    pub doppler: DopplerParams,
    pub experiment: Experiment,
    /// Fully populated boundary-unit document.
    pub echo: ConfigDocument,
}

const EXPERIMENT_KINDS: [&str; 6] = [
    "spectrum_scan",
    "rabi_scan",
    "cooling_schedule",
    "heating_scan",
    "histogram_run",
    "heating_analysis",
];

fn require<T: Copy>(value: Option<T>, path: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| missing(path))
}

fn positive(value: f64, path: &str) -> Result<f64, ConfigError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(path, format!("must be positive, got {value}")))
    }
}

fn nonnegative(value: f64, path: &str) -> Result<f64, ConfigError> {
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(invalid(path, format!("must be nonnegative, got {value}")))
    }
}

fn parse_mode(name: &str, path: &str) -> Result<ModeLabel, ConfigError> {
    ModeLabel::parse(name).ok_or_else(|| {
        let known: Vec<&str> = ModeLabel::ALL.iter().map(|l| l.as_str()).collect();
        invalid(path, format!("unknown mode `{name}` (expected one of: {})", known.join(", ")))
    })
}

fn mode_map(
    map: &BTreeMap<String, f64>,
    path: &str,
) -> Result<BTreeMap<ModeLabel, f64>, ConfigError> {
    map.iter()
        .map(|(name, value)| {
            let label = parse_mode(name, &format!("{path}.{name}"))?;
            nonnegative(*value, &format!("{path}.{name}"))?;
            Ok((label, *value))
        })
        .collect()
}

fn grid(start: f64, stop: f64, points: usize, path: &str) -> Result<Vec<f64>, ConfigError> {
    if points == 0 {
        return Err(invalid(&format!("{path}.points"), "grid must be nonempty"));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|k| start + step * k as f64).collect())
}

struct TrapResolution {
    trap: TrapConfig,
    echo: TrapSection,
}

fn resolve_trap(section: &TrapSection) -> Result<TrapResolution, ConfigError> {
    let axial_khz = positive(require(section.axial_khz, "trap.axial_khz")?, "trap.axial_khz")?;
    let (radial_x_mhz, radial_y_mhz) = match (section.radial_mhz, section.radial_x_mhz, section.radial_y_mhz)
    {
        (Some(both), None, None) => (both, both),
        (None, Some(x), Some(y)) => (x, y),
        (None, None, None) => return Err(missing("trap.radial_mhz")),
        (None, Some(_), None) => return Err(missing("trap.radial_y_mhz")),
        (None, None, Some(_)) => return Err(missing("trap.radial_x_mhz")),
        _ => {
            return Err(invalid(
                "trap.radial_mhz",
                "give either radial_mhz or the radial_x_mhz/radial_y_mhz pair, not both",
            ))
        }
    };
    positive(radial_x_mhz, "trap.radial_x_mhz")?;
    positive(radial_y_mhz, "trap.radial_y_mhz")?;
    let electrode_distance_mm = positive(
        section.electrode_distance_mm.unwrap_or(DEFAULT_ELECTRODE_DISTANCE_MM),
        "trap.electrode_distance_mm",
    )?;
    let rf_drive_mhz =
        positive(section.rf_drive_mhz.unwrap_or(DEFAULT_RF_DRIVE_MHZ), "trap.rf_drive_mhz")?;

    let trap = TrapConfig {
        omega_axial: axial_khz * KHZ,
        omega_radial_x: radial_x_mhz * MHZ,
        omega_radial_y: radial_y_mhz * MHZ,
        electrode_distance_mm,
        rf_drive: rf_drive_mhz * MHZ,
    };
    trap.validate().map_err(|e| invalid("trap", e.to_string()))?;

    Ok(TrapResolution {
        trap,
        echo: TrapSection {
            axial_khz: Some(axial_khz),
            radial_mhz: None,
            radial_x_mhz: Some(radial_x_mhz),
            radial_y_mhz: Some(radial_y_mhz),
            electrode_distance_mm: Some(electrode_distance_mm),
            rf_drive_mhz: Some(rf_drive_mhz),
        },
    })
}

/// Resolve a parsed document: validate, convert units, apply defaults, and
/// build the echo. `base_dir` anchors relative file references.
pub fn resolve(document: &ConfigDocument, base_dir: &Path) -> Result<ResolvedConfig, ConfigError> {
    let experiment_section =
        document.experiment.as_ref().ok_or_else(|| missing("experiment"))?;
    let kind = experiment_section
        .kind
        .as_deref()
        .ok_or_else(|| missing("experiment.kind"))?;
    if !EXPERIMENT_KINDS.contains(&kind) {
        return Err(invalid(
            "experiment.kind",
            format!("unknown kind `{kind}` (expected one of: {})", EXPERIMENT_KINDS.join(", ")),
        ));
    }
    // Exactly the matching parameter section may be present.
    let sections: [(&str, bool); 6] = [
        ("spectrum_scan", experiment_section.spectrum_scan.is_some()),
        ("rabi_scan", experiment_section.rabi_scan.is_some()),
        ("cooling_schedule", experiment_section.cooling_schedule.is_some()),
        ("heating_scan", experiment_section.heating_scan.is_some()),
        ("histogram_run", experiment_section.histogram_run.is_some()),
        ("heating_analysis", experiment_section.heating_analysis.is_some()),
    ];
    for (section, present) in sections {
        if present && section != kind {
            return Err(ConfigError::MismatchedSection {
                kind: kind.to_string(),
                section: format!("experiment.{section}"),
            });
        }
    }

    // Species.
    let species_section = document.species.clone().unwrap_or_default();
    let defaults = IonSpecies::calcium_40();
    let mass_amu =
        positive(species_section.mass_amu.unwrap_or(defaults.mass_amu), "species.mass_amu")?;
    let wavelength_nm = positive(
        species_section.qubit_wavelength_nm.unwrap_or(defaults.qubit_wavelength * 1e9),
        "species.qubit_wavelength_nm",
    )?;
    let linewidth_mhz = positive(
        species_section
            .dipole_linewidth_mhz
            .unwrap_or(defaults.dipole_linewidth_natural / MHZ),
        "species.dipole_linewidth_mhz",
    )?;
    let species = IonSpecies {
        mass_amu,
        qubit_wavelength: wavelength_nm * 1e-9,
        dipole_linewidth_natural: linewidth_mhz * MHZ,
    };

    // Beam.
    let beam_section = document.beam.clone().unwrap_or_default();
    let angle = beam_section.angle_to_axis_deg.unwrap_or(DEFAULT_BEAM_ANGLE_DEG);
    if !(0.0..=90.0).contains(&angle) {
        return Err(invalid("beam.angle_to_axis_deg", "must lie in [0, 90]"));
    }
    let waist_um = positive(beam_section.waist_um.unwrap_or(DEFAULT_WAIST_UM), "beam.waist_um")?;
    let center_offset_um = beam_section.center_offset_um.unwrap_or(0.0);
    let peak_rabi_khz = nonnegative(
        beam_section.peak_rabi_khz.unwrap_or(DEFAULT_PEAK_RABI_KHZ),
        "beam.peak_rabi_khz",
    )?;
    let beam = BeamGeometry {
        angle_to_axis_deg: angle,
        waist: waist_um * 1e-6,
        center_offset: center_offset_um * 1e-6,
        peak_rabi: peak_rabi_khz * KHZ,
    };

    // Detection.
    let detection_section = document.detection.clone().unwrap_or_default();
    let window_ms =
        positive(detection_section.window_ms.unwrap_or(DEFAULT_WINDOW_MS), "detection.window_ms")?;
    let background =
        nonnegative(detection_section.background_mean.unwrap_or(DEFAULT_BACKGROUND_MEAN), "detection.background_mean")?;
    let per_ion = nonnegative(
        detection_section.per_ion_bright_mean.unwrap_or(DEFAULT_PER_ION_BRIGHT_MEAN),
        "detection.per_ion_bright_mean",
    )?;
    let thresholds = match detection_section.thresholds {
        Some([t1, t2]) => {
            if t1 >= t2 {
                return Err(invalid("detection.thresholds", "must satisfy t1 < t2"));
            }
            (t1, t2)
        }
        None => auto_thresholds(background, per_ion)
            .map_err(|e| invalid("detection", e.to_string()))?,
    };
    let detection = DetectionConfig {
        window: window_ms * 1e-3,
        background_mean: background,
        per_ion_bright_mean: per_ion,
        thresholds,
    };

    // Doppler.
    let doppler_section = document.doppler.clone().unwrap_or_default();
    let gamma_mhz = positive(
        doppler_section.gamma_eff_mhz.unwrap_or(DEFAULT_GAMMA_EFF_MHZ),
        "doppler.gamma_eff_mhz",
    )?;
    let geometry_factor =
        doppler_section.geometry_factor.unwrap_or(DEFAULT_GEOMETRY_FACTOR);
    if geometry_factor < 1.0 {
        return Err(invalid("doppler.geometry_factor", "must be at least 1"));
    }
    let doppler = DopplerParams { gamma_eff: gamma_mhz * MHZ, geometry_factor };

    // Trap: required except for the record-analysis experiment.
    let trap_resolution = match &document.trap {
        Some(section) => Some(resolve_trap(section)?),
        None if kind == "heating_analysis" => None,
        None => return Err(missing("trap")),
    };
    let trap = trap_resolution.as_ref().map(|r| r.trap);

    // Doppler-limit defaults for per-mode initial occupations.
    let doppler_defaults = |trap: &TrapConfig| -> Result<BTreeMap<ModeLabel, f64>, ConfigError> {
        let modes = mode_spectrum(trap).map_err(|e| invalid("trap", e.to_string()))?;
        Ok(modes.iter().map(|m| (m.label, doppler_limit(&doppler, m.frequency))).collect())
    };
    let initial_states = |explicit: &Option<BTreeMap<String, f64>>,
                          path: &str|
     -> Result<(ModeStateSet, BTreeMap<String, f64>), ConfigError> {
        let trap = trap
            .as_ref()
            .ok_or_else(|| missing("trap"))?;
        let mut occupations = doppler_defaults(trap)?;
        if let Some(map) = explicit {
            for (label, value) in mode_map(map, path)? {
                occupations.insert(label, value);
            }
        }
        let mut states = ModeStateSet::new();
        for (&label, &n_bar) in &occupations {
            let dist = FockDistribution::thermal(n_bar, 0)
                .map_err(|e| invalid(path, e.to_string()))?;
            states.insert(label, dist);
        }
        let echo_map =
            occupations.iter().map(|(label, value)| (label.to_string(), *value)).collect();
        Ok((states, echo_map))
    };

    let mut echo_experiment = ExperimentSection { kind: Some(kind.to_string()), ..Default::default() };

    let experiment = match kind {
        "spectrum_scan" => {
            let section = experiment_section
                .spectrum_scan
                .as_ref()
                .ok_or_else(|| missing("experiment.spectrum_scan"))?;
            let path = "experiment.spectrum_scan";
            let start =
                require(section.detuning_start_khz, &format!("{path}.detuning_start_khz"))?;
            let stop = require(section.detuning_stop_khz, &format!("{path}.detuning_stop_khz"))?;
            let points = require(section.points, &format!("{path}.points"))?;
            let duration_us =
                positive(require(section.probe_duration_us, &format!("{path}.probe_duration_us"))?, &format!("{path}.probe_duration_us"))?;
            let rabi_khz =
                positive(require(section.probe_rabi_khz, &format!("{path}.probe_rabi_khz"))?, &format!("{path}.probe_rabi_khz"))?;
            let (initial, echo_map) =
                initial_states(&section.initial_n_bar, &format!("{path}.initial_n_bar"))?;
            echo_experiment.spectrum_scan = Some(SpectrumScanSection {
                detuning_start_khz: Some(start),
                detuning_stop_khz: Some(stop),
                points: Some(points),
                probe_duration_us: Some(duration_us),
                probe_rabi_khz: Some(rabi_khz),
                initial_n_bar: Some(echo_map),
            });
            Experiment::SpectrumScan {
                detunings: grid(start * KHZ, stop * KHZ, points, path)?,
                probe: Pulse {
                    kind: PulseKind::Carrier,
                    duration: duration_us * 1e-6,
                    rabi: rabi_khz * KHZ,
                    detuning: 0.0,
                },
                initial,
            }
        }
        "rabi_scan" => {
            let section = experiment_section
                .rabi_scan
                .as_ref()
                .ok_or_else(|| missing("experiment.rabi_scan"))?;
            let path = "experiment.rabi_scan";
            let line_name = section.line.as_deref().ok_or_else(|| missing(&format!("{path}.line")))?;
            let mode = section
                .mode
                .as_deref()
                .map(|name| parse_mode(name, &format!("{path}.mode")))
                .transpose()?;
            let line = match (line_name, mode) {
                ("carrier", None) => PulseKind::Carrier,
                ("carrier", Some(_)) => {
                    return Err(invalid(&format!("{path}.mode"), "carrier scans take no mode"))
                }
                ("red_sideband", Some(m)) => PulseKind::RedSideband(m),
                ("blue_sideband", Some(m)) => PulseKind::BlueSideband(m),
                ("red_sideband" | "blue_sideband", None) => {
                    return Err(missing(&format!("{path}.mode")))
                }
                _ => {
                    return Err(invalid(
                        &format!("{path}.line"),
                        format!("unknown line `{line_name}` (expected carrier, red_sideband, or blue_sideband)"),
                    ))
                }
            };
            let rabi_khz = positive(require(section.rabi_khz, &format!("{path}.rabi_khz"))?, &format!("{path}.rabi_khz"))?;
            let start = nonnegative(
                require(section.duration_start_us, &format!("{path}.duration_start_us"))?,
                &format!("{path}.duration_start_us"),
            )?;
            let stop = require(section.duration_stop_us, &format!("{path}.duration_stop_us"))?;
            let points = require(section.points, &format!("{path}.points"))?;
            let (initial, echo_map) =
                initial_states(&section.initial_n_bar, &format!("{path}.initial_n_bar"))?;
            echo_experiment.rabi_scan = Some(RabiScanSection {
                line: Some(line_name.to_string()),
                mode: section.mode.clone(),
                rabi_khz: Some(rabi_khz),
                duration_start_us: Some(start),
                duration_stop_us: Some(stop),
                points: Some(points),
                initial_n_bar: Some(echo_map),
            });
            Experiment::RabiScan {
                line,
                rabi: rabi_khz * KHZ,
                durations: grid(start * 1e-6, stop * 1e-6, points, path)?,
                initial,
            }
        }
        "cooling_schedule" => {
            let section = experiment_section
                .cooling_schedule
                .as_ref()
                .ok_or_else(|| missing("experiment.cooling_schedule"))?;
            let path = "experiment.cooling_schedule";
            let pulse_sections =
                section.pulses.as_ref().ok_or_else(|| missing(&format!("{path}.pulses")))?;
            if pulse_sections.is_empty() {
                return Err(invalid(&format!("{path}.pulses"), "schedule needs at least one pulse"));
            }
            let mut pulses = Vec::with_capacity(pulse_sections.len());
            let mut echo_pulses = Vec::with_capacity(pulse_sections.len());
            for (index, pulse) in pulse_sections.iter().enumerate() {
                let pulse_path = format!("{path}.pulses[{index}]");
                let mode_name = pulse
                    .mode
                    .as_deref()
                    .ok_or_else(|| missing(&format!("{pulse_path}.mode")))?;
                let mode = parse_mode(mode_name, &format!("{pulse_path}.mode"))?;
                let duration_ms = nonnegative(
                    require(pulse.duration_ms, &format!("{pulse_path}.duration_ms"))?,
                    &format!("{pulse_path}.duration_ms"),
                )?;
                let cool_rate = match (pulse.tau_ms, pulse.rate_per_s) {
                    (Some(tau), None) => 1.0 / (positive(tau, &format!("{pulse_path}.tau_ms"))? * 1e-3),
                    (None, Some(rate)) => nonnegative(rate, &format!("{pulse_path}.rate_per_s"))?,
                    (None, None) => return Err(missing(&format!("{pulse_path}.tau_ms"))),
                    (Some(_), Some(_)) => {
                        return Err(invalid(
                            &pulse_path,
                            "give either tau_ms or rate_per_s, not both",
                        ))
                    }
                };
                let steady_n =
                    nonnegative(pulse.steady_n.unwrap_or(0.0), &format!("{pulse_path}.steady_n"))?;
                pulses.push(CoolingPulseParams {
                    mode,
                    duration: duration_ms * 1e-3,
                    cool_rate,
                    steady_n,
                });
                echo_pulses.push(PulseSection {
                    mode: Some(mode_name.to_string()),
                    duration_ms: Some(duration_ms),
                    tau_ms: pulse.tau_ms,
                    rate_per_s: pulse.rate_per_s,
                    steady_n: Some(steady_n),
                });
            }
            let heating = match &section.heating_rates_per_s {
                Some(map) => mode_map(map, &format!("{path}.heating_rates_per_s"))?,
                None => BTreeMap::new(),
            };
            let (initial, echo_map) =
                initial_states(&section.initial_n_bar, &format!("{path}.initial_n_bar"))?;
            echo_experiment.cooling_schedule = Some(CoolingScheduleSection {
                pulses: Some(echo_pulses),
                heating_rates_per_s: Some(
                    heating.iter().map(|(label, rate)| (label.to_string(), *rate)).collect(),
                ),
                initial_n_bar: Some(echo_map),
            });
            Experiment::CoolingSchedule { pulses, heating, initial }
        }
        "heating_scan" => {
            let section = experiment_section
                .heating_scan
                .as_ref()
                .ok_or_else(|| missing("experiment.heating_scan"))?;
            let path = "experiment.heating_scan";
            let mode_name =
                section.mode.as_deref().ok_or_else(|| missing(&format!("{path}.mode")))?;
            let mode = parse_mode(mode_name, &format!("{path}.mode"))?;
            let rate = nonnegative(
                require(section.heating_rate_per_s, &format!("{path}.heating_rate_per_s"))?,
                &format!("{path}.heating_rate_per_s"),
            )?;
            let delays_ms = section
                .delays_ms
                .clone()
                .ok_or_else(|| missing(&format!("{path}.delays_ms")))?;
            if delays_ms.is_empty() {
                return Err(invalid(&format!("{path}.delays_ms"), "grid must be nonempty"));
            }
            for (index, delay) in delays_ms.iter().enumerate() {
                nonnegative(*delay, &format!("{path}.delays_ms[{index}]"))?;
            }
            let initial_n_bar =
                nonnegative(section.initial_n_bar.unwrap_or(0.0), &format!("{path}.initial_n_bar"))?;
            echo_experiment.heating_scan = Some(HeatingScanSection {
                mode: Some(mode_name.to_string()),
                heating_rate_per_s: Some(rate),
                delays_ms: Some(delays_ms.clone()),
                initial_n_bar: Some(initial_n_bar),
            });
            Experiment::HeatingScan {
                mode,
                heating_rate: rate,
                delays: delays_ms.iter().map(|ms| ms * 1e-3).collect(),
                initial_n_bar,
            }
        }
        "histogram_run" => {
            let section = experiment_section
                .histogram_run
                .as_ref()
                .ok_or_else(|| missing("experiment.histogram_run"))?;
            let path = "experiment.histogram_run";
            let p_d = section.p_d.ok_or_else(|| missing(&format!("{path}.p_d")))?;
            for (index, p) in p_d.iter().enumerate() {
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid(
                        &format!("{path}.p_d[{index}]"),
                        format!("probability must lie in [0, 1], got {p}"),
                    ));
                }
            }
            let shots = require(section.shots, &format!("{path}.shots"))?;
            if shots == 0 {
                return Err(invalid(&format!("{path}.shots"), "must be positive"));
            }
            // Sampling requires an explicit seed for reproducibility.
            if document.seed.is_none() {
                return Err(missing("seed"));
            }
            echo_experiment.histogram_run =
                Some(HistogramRunSection { p_d: Some(p_d), shots: Some(shots) });
            Experiment::HistogramRun { p_d, shots }
        }
        "heating_analysis" => {
            let section = experiment_section
                .heating_analysis
                .as_ref()
                .ok_or_else(|| missing("experiment.heating_analysis"))?;
            let path = "experiment.heating_analysis";
            let file = section
                .records_file
                .as_deref()
                .ok_or_else(|| missing(&format!("{path}.records_file")))?;
            let full_path = base_dir.join(file);
            let text = std::fs::read_to_string(&full_path).map_err(|source| ConfigError::Io {
                path: full_path.display().to_string(),
                source,
            })?;
            let records = two_ion_sim::cooling::parse_heating_records(&text)
                .map_err(|e| invalid(&format!("{path}.records_file"), e.to_string()))?;
            let group_sections =
                section.groups.as_ref().ok_or_else(|| missing(&format!("{path}.groups")))?;
            if group_sections.is_empty() {
                return Err(invalid(&format!("{path}.groups"), "need at least one group"));
            }
            let mut groups = Vec::with_capacity(group_sections.len());
            let mut echo_groups = Vec::with_capacity(group_sections.len());
            for (index, group) in group_sections.iter().enumerate() {
                let group_path = format!("{path}.groups[{index}]");
                let name = group
                    .name
                    .clone()
                    .ok_or_else(|| missing(&format!("{group_path}.name")))?;
                groups.push(AnalysisGroup {
                    name: name.clone(),
                    ion: group.ion.clone(),
                    trap_contains: group.trap_contains.clone(),
                    com_only: group.com_only.unwrap_or(false),
                    reference: group.reference,
                    reference_tolerance: group.reference_tolerance,
                });
                echo_groups.push(GroupSection {
                    name: Some(name),
                    ion: group.ion.clone(),
                    trap_contains: group.trap_contains.clone(),
                    com_only: Some(group.com_only.unwrap_or(false)),
                    reference: group.reference,
                    reference_tolerance: group.reference_tolerance,
                });
            }
            echo_experiment.heating_analysis = Some(HeatingAnalysisSection {
                records_file: Some(file.to_string()),
                groups: Some(echo_groups),
            });
            Experiment::HeatingAnalysis { records, groups }
        }
        _ => unreachable!("kind validated above"),
    };

    let seed = document.seed.unwrap_or(0);
    let echo = ConfigDocument {
        seed: Some(seed),
        trap: trap_resolution.map(|r| r.echo),
        species: Some(SpeciesSection {
            mass_amu: Some(mass_amu),
            qubit_wavelength_nm: Some(wavelength_nm),
            dipole_linewidth_mhz: Some(linewidth_mhz),
        }),
        beam: Some(BeamSection {
            angle_to_axis_deg: Some(angle),
            waist_um: Some(waist_um),
            center_offset_um: Some(center_offset_um),
            peak_rabi_khz: Some(peak_rabi_khz),
        }),
        detection: Some(DetectionSection {
            window_ms: Some(window_ms),
            background_mean: Some(background),
            per_ion_bright_mean: Some(per_ion),
            thresholds: Some([thresholds.0, thresholds.1]),
        }),
        doppler: Some(DopplerSection {
            gamma_eff_mhz: Some(gamma_mhz),
            geometry_factor: Some(geometry_factor),
        }),
        experiment: Some(echo_experiment),
    };

    Ok(ResolvedConfig { seed, trap, species, beam, detection, doppler, experiment, echo })
}

/// Serialize an echoed document back to TOML.
pub fn echo_to_toml(document: &ConfigDocument) -> String {
    toml::to_string_pretty(document).expect("echo document serializes")
}

/// Parse and resolve a config file from disk.
pub fn load(path: &Path) -> Result<ResolvedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let document = parse_config(&text)?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    resolve(&document, base_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_SPECTRUM: &str = r#"
[trap]
axial_khz = 700.0
radial_mhz = 1.8

[experiment]
kind = "spectrum_scan"

[experiment.spectrum_scan]
detuning_start_khz = -2000.0
detuning_stop_khz = 2000.0
points = 401
probe_duration_us = 25.0
probe_rabi_khz = 20.0
"#;

    fn resolve_str(text: &str) -> Result<ResolvedConfig, ConfigError> {
        resolve(&parse_config(text).unwrap(), Path::new("."))
    }

    #[test]
    fn minimal_spectrum_config_resolves_with_defaults() {
        let resolved = resolve_str(MINIMAL_SPECTRUM).unwrap();
        let trap = resolved.trap.unwrap();
        assert!((trap.omega_axial - 2.0 * PI * 700e3).abs() < 1e-6);
        assert!((trap.omega_radial_x - 2.0 * PI * 1.8e6).abs() < 1e-3);
        assert_eq!(resolved.seed, 0);
        assert!((resolved.doppler.geometry_factor - 2.1).abs() < 1e-12);
        assert_eq!(resolved.detection.thresholds, (32, 63));

        // Defaults echoed explicitly, including per-mode Doppler occupations.
        let echo = &resolved.echo;
        assert_eq!(echo.doppler.as_ref().unwrap().gamma_eff_mhz, Some(30.0));
        let scan = echo.experiment.as_ref().unwrap().spectrum_scan.as_ref().unwrap();
        let initial = scan.initial_n_bar.as_ref().unwrap();
        assert_eq!(initial.len(), 6);
        assert!((initial["axial_com"] - 45.0).abs() < 1e-9);
    }

    #[test]
    fn missing_trap_frequency_reports_path() {
        let text = r#"
[trap]
radial_mhz = 1.8
[experiment]
kind = "spectrum_scan"
[experiment.spectrum_scan]
detuning_start_khz = -10.0
detuning_stop_khz = 10.0
points = 3
probe_duration_us = 25.0
probe_rabi_khz = 20.0
"#;
        let err = resolve_str(text).unwrap_err();
        assert!(matches!(err, ConfigError::MissingField { ref path } if path == "trap.axial_khz"));
    }

    #[test]
    fn soft_radial_confinement_is_rejected_with_reason() {
        let text = MINIMAL_SPECTRUM.replace("radial_mhz = 1.8", "radial_mhz = 0.5");
        let err = resolve_str(&text).unwrap_err();
        match err {
            ConfigError::InvalidValue { path, reason } => {
                assert_eq!(path, "trap");
                assert!(reason.contains("rocking"), "reason: {reason}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL_SPECTRUM.replace("axial_khz", "axial_freq_khz");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("axial_freq_khz"), "{err}");
    }

    #[test]
    fn unknown_mode_names_are_rejected() {
        let text = format!(
            "{MINIMAL_SPECTRUM}\n[experiment.spectrum_scan.initial_n_bar]\nzigzag = 4.0\n"
        );
        let err = resolve_str(&text).unwrap_err();
        assert!(err.to_string().contains("zigzag"), "{err}");
    }

    #[test]
    fn mismatched_experiment_section_is_rejected() {
        let text = format!(
            "{MINIMAL_SPECTRUM}\n[experiment.histogram_run]\np_d = [0.5, 0.5]\nshots = 10\n"
        );
        let err = resolve_str(&text).unwrap_err();
        assert!(matches!(err, ConfigError::MismatchedSection { .. }));
    }

    #[test]
    fn histogram_requires_explicit_seed() {
        let text = r#"
[trap]
axial_khz = 700.0
radial_mhz = 1.8
[experiment]
kind = "histogram_run"
[experiment.histogram_run]
p_d = [0.5, 0.5]
shots = 100
"#;
        let err = resolve_str(text).unwrap_err();
        assert!(matches!(err, ConfigError::MissingField { ref path } if path == "seed"));
        let with_seed = format!("seed = 7\n{text}");
        assert!(resolve_str(&with_seed).is_ok());
    }

    #[test]
    fn echo_round_trips_to_an_equivalent_config() {
        let resolved = resolve_str(MINIMAL_SPECTRUM).unwrap();
        let echo_text = echo_to_toml(&resolved.echo);
        let reparsed = resolve(&parse_config(&echo_text).unwrap(), Path::new(".")).unwrap();
        assert_eq!(reparsed.trap, resolved.trap);
        assert_eq!(reparsed.species, resolved.species);
        assert_eq!(reparsed.beam, resolved.beam);
        assert_eq!(reparsed.detection, resolved.detection);
        assert_eq!(reparsed.doppler, resolved.doppler);
        assert_eq!(reparsed.seed, resolved.seed);
        assert_eq!(reparsed.experiment, resolved.experiment);
    }

    #[test]
    fn cooling_pulse_accepts_tau_or_rate_but_not_both() {
        let base = r#"
[trap]
axial_khz = 700.0
radial_mhz = 1.8
[experiment]
kind = "cooling_schedule"
[experiment.cooling_schedule]
"#;
        let tau = format!(
            "{base}pulses = [{{ mode = \"axial_com\", duration_ms = 6.0, tau_ms = 1.0 }}]\n"
        );
        let resolved = resolve_str(&tau).unwrap();
        match &resolved.experiment {
            Experiment::CoolingSchedule { pulses, .. } => {
                assert!((pulses[0].cool_rate - 1000.0).abs() < 1e-9);
            }
            other => panic!("unexpected experiment {other:?}"),
        }

        let both = format!(
            "{base}pulses = [{{ mode = \"axial_com\", duration_ms = 6.0, tau_ms = 1.0, rate_per_s = 5.0 }}]\n"
        );
        assert!(resolve_str(&both).is_err());

        let neither =
            format!("{base}pulses = [{{ mode = \"axial_com\", duration_ms = 6.0 }}]\n");
        assert!(matches!(
            resolve_str(&neither).unwrap_err(),
            ConfigError::MissingField { ref path } if path.ends_with("tau_ms")
        ));
    }
}
