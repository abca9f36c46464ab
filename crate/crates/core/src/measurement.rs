//! Simulated state readout: per-shot sampling of the two ions' electronic
//! states, Poisson photon-count histograms, two-threshold classification of
//! 0/1/2 bright ions, sideband-asymmetry thermometry, and single-ion
//! addressing checks.
//!
//! Ions left in the ground state scatter on the dipole transition and are
//! bright; shelved ions are dark. A detection window therefore yields a
//! Poisson count with mean `background + per_ion_bright · n_bright`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crystal::BeamGeometry;

#[derive(Debug, Error, PartialEq)]
pub enum MeasurementError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("blue-sideband height must be positive, got {0}")]
    NonPositiveBlue(f64),
    #[error("red-sideband height {rsb} exceeds the blue-sideband height {bsb}; asymmetry is invalid")]
    InvalidAsymmetry { rsb: f64, bsb: f64 },
    #[error("red-sideband height {0} is negative beyond the noise-clip band")]
    NegativeRed(f64),
    #[error("class means are degenerate; photon counts carry no state information")]
    DegenerateMeans,
}

/// Photon-count detection parameters and classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Detection window, seconds (informational; means are per window).
    pub window: f64,
    /// Expected stray-light photons per window.
    pub background_mean: f64,
    /// Expected photons per bright ion per window.
    pub per_ion_bright_mean: f64,
    /// Classification thresholds `(t1, t2)`, `t1 < t2`. Counts at or below
    /// `t1` classify as 0 bright, at or below `t2` as 1 bright, above as 2.
    pub thresholds: (u32, u32),
}

impl DetectionConfig {
    /// Build a config with thresholds placed automatically at the valley
    /// minima of adjacent Poisson pairs.
    pub fn with_auto_thresholds(
        window: f64,
        background_mean: f64,
        per_ion_bright_mean: f64,
    ) -> Result<Self, MeasurementError> {
        let means = class_means(background_mean, per_ion_bright_mean);
        let thresholds = auto_thresholds_for_means(means)?;
        let cfg = Self { window, background_mean, per_ion_bright_mean, thresholds };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MeasurementError> {
        if !(self.window > 0.0) {
            return Err(MeasurementError::InvalidInput("window must be positive"));
        }
        if !(self.background_mean >= 0.0) {
            return Err(MeasurementError::InvalidInput("background_mean must be nonnegative"));
        }
        if !(self.per_ion_bright_mean >= 0.0) {
            return Err(MeasurementError::InvalidInput("per_ion_bright_mean must be nonnegative"));
        }
        if self.thresholds.0 >= self.thresholds.1 {
            return Err(MeasurementError::InvalidInput("thresholds must satisfy t1 < t2"));
        }
        Ok(())
    }

    /// Expected counts for 0, 1, 2 bright ions.
    pub fn class_means(&self) -> [f64; 3] {
        class_means(self.background_mean, self.per_ion_bright_mean)
    }
}

fn class_means(background: f64, per_ion: f64) -> [f64; 3] {
    [background, background + per_ion, background + 2.0 * per_ion]
}

/// Stable Poisson pmf over `0..=k_max` via the multiplicative recurrence.
fn poisson_pmf_table(mean: f64, k_max: u32) -> Vec<f64> {
    let mut table = Vec::with_capacity(k_max as usize + 1);
    let mut p = (-mean).exp();
    for k in 0..=k_max {
        table.push(p);
        p *= mean / (k as f64 + 1.0);
    }
    table
}

fn poisson_cdf(mean: f64, k: u32) -> f64 {
    if mean == 0.0 {
        return 1.0;
    }
    poisson_pmf_table(mean, k).iter().sum()
}

/// Thresholds at the valley minima of the adjacent equal-weight Poisson
/// pairs `(μ₀, μ₁)` and `(μ₁, μ₂)`.
pub fn auto_thresholds(
    background_mean: f64,
    per_ion_bright_mean: f64,
) -> Result<(u32, u32), MeasurementError> {
    auto_thresholds_for_means(class_means(background_mean, per_ion_bright_mean))
}

fn auto_thresholds_for_means(means: [f64; 3]) -> Result<(u32, u32), MeasurementError> {
    if means[1] - means[0] < 1.0 || means[2] - means[1] < 1.0 {
        return Err(MeasurementError::DegenerateMeans);
    }
    let valley = |mu_low: f64, mu_high: f64| {
        let lo = mu_low.floor() as u32;
        let hi = mu_high.ceil() as u32;
        let low_table = poisson_pmf_table(mu_low, hi);
        let high_table = poisson_pmf_table(mu_high, hi);
        (lo..=hi)
            .min_by(|a, b| {
                let fa = low_table[*a as usize] + high_table[*a as usize];
                let fb = low_table[*b as usize] + high_table[*b as usize];
                fa.total_cmp(&fb)
            })
            .unwrap()
    };
    Ok((valley(means[0], means[1]), valley(means[1], means[2])))
}

/// Ground-state population and mean occupation deduced from sideband
/// heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandThermometry {
    /// `p₀ = 1 − rsb/bsb`.
    pub ground_state_population: f64,
    /// `n̄ = p₀⁻¹ − 1`.
    pub mean_phonon: f64,
}

/// Fraction of the blue height below which a negative red height is treated
/// as detection noise and clipped to zero.
const NOISE_CLIP_FRACTION: f64 = 0.01;

/// Sideband-asymmetry thermometry from red and blue sideband heights.
pub fn sideband_asymmetry(rsb: f64, bsb: f64) -> Result<SidebandThermometry, MeasurementError> {
    if !(bsb > 0.0) {
        return Err(MeasurementError::NonPositiveBlue(bsb));
    }
    let rsb = if rsb < 0.0 {
        if rsb.abs() <= NOISE_CLIP_FRACTION * bsb {
            0.0
        } else {
            return Err(MeasurementError::NegativeRed(rsb));
        }
    } else {
        rsb
    };
    if rsb > bsb {
        return Err(MeasurementError::InvalidAsymmetry { rsb, bsb });
    }
    let ground_state_population = 1.0 - rsb / bsb;
    let mean_phonon =
        if ground_state_population > 0.0 { rsb / (bsb - rsb) } else { f64::INFINITY };
    Ok(SidebandThermometry { ground_state_population, mean_phonon })
}

/// Electronic state of one ion at readout time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElectronicState {
    /// Ground state; scatters detection light.
    S,
    /// Shelved metastable state; dark.
    D,
}

/// One simulated detection window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub true_state: [ElectronicState; 2],
    pub photon_count: u32,
    pub classified_bright: u8,
}

/// Photon-count histogram over many shots.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, count: u32) {
        let index = count as usize;
        if self.bins.len() <= index {
            self.bins.resize(index + 1, 0);
        }
        self.bins[index] += 1;
        self.total += 1;
    }

    /// Shots observed at the given photon count.
    pub fn bin(&self, count: u32) -> u64 {
        self.bins.get(count as usize).copied().unwrap_or(0)
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn total_shots(&self) -> u64 {
        self.total
    }

    /// Export view as `(count, shots)` pairs including empty bins.
    pub fn count_pairs(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.bins.iter().enumerate().map(|(count, shots)| (count as u32, *shots))
    }
}

/// Classify a photon count into 0, 1, or 2 bright ions. Counts equal to a
/// threshold classify downward.
pub fn classify(count: u32, cfg: &DetectionConfig) -> u8 {
    if count <= cfg.thresholds.0 {
        0
    } else if count <= cfg.thresholds.1 {
        1
    } else {
        2
    }
}

/// Sample `n_shots` detection windows.
///
/// Per shot each ion is independently shelved with its own `p_d`, the photon
/// count is drawn from a Poisson with mean set by the number of bright ions,
/// and the count is classified. Identical seed and configuration give
/// identical output.
pub fn sample_shots(
    p_d: [f64; 2],
    cfg: &DetectionConfig,
    n_shots: u64,
    seed: u64,
) -> Result<(Histogram, Vec<ShotRecord>), MeasurementError> {
    cfg.validate()?;
    if p_d.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(MeasurementError::InvalidInput("p_d entries must lie in [0, 1]"));
    }
    if n_shots == 0 {
        return Err(MeasurementError::InvalidInput("n_shots must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers: Vec<Option<Poisson<f64>>> = cfg
        .class_means()
        .iter()
        .map(|&mean| if mean > 0.0 { Some(Poisson::new(mean).unwrap()) } else { None })
        .collect();

    let mut histogram = Histogram::new();
    let mut records = Vec::with_capacity(n_shots as usize);
    for _ in 0..n_shots {
        let true_state = p_d.map(|p| {
            if rng.random::<f64>() < p {
                ElectronicState::D
            } else {
                ElectronicState::S
            }
        });
        let bright = true_state.iter().filter(|&&s| s == ElectronicState::S).count();
        let photon_count = match &samplers[bright] {
            Some(poisson) => poisson.sample(&mut rng) as u32,
            None => 0,
        };
        histogram.record(photon_count);
        records.push(ShotRecord {
            true_state,
            photon_count,
            classified_bright: classify(photon_count, cfg),
        });
    }
    Ok((histogram, records))
}

/// Exact misclassification probabilities of the three-window classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationReport {
    /// Probability mass falling outside each true class's window.
    pub per_class: [f64; 3],
    /// Worst class (per-state reading of discrimination efficiency).
    pub worst: f64,
    /// Unweighted mean over the three classes (averaged reading).
    pub mean: f64,
    /// True when the class means coincide and counts carry no information.
    pub degenerate: bool,
}

/// Discrimination errors for the config's class means and thresholds.
pub fn discrimination_error(cfg: &DetectionConfig) -> DiscriminationReport {
    discrimination_error_for_means(cfg.class_means(), cfg.thresholds)
}

/// Discrimination errors for explicit class means, via exact Poisson tail
/// sums.
pub fn discrimination_error_for_means(
    means: [f64; 3],
    thresholds: (u32, u32),
) -> DiscriminationReport {
    let (t1, t2) = thresholds;
    let per_class = [
        1.0 - poisson_cdf(means[0], t1),
        poisson_cdf(means[1], t1) + (1.0 - poisson_cdf(means[1], t2)),
        poisson_cdf(means[2], t2),
    ];
    DiscriminationReport {
        per_class,
        worst: per_class.iter().copied().fold(0.0, f64::max),
        mean: per_class.iter().sum::<f64>() / 3.0,
        degenerate: means[0] == means[1] && means[1] == means[2],
    }
}

/// Statistic minimized when placing thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdObjective {
    WorstCase,
    MeanError,
}

/// Exhaustive search for the threshold pair minimizing the chosen statistic.
pub fn optimize_thresholds(
    means: [f64; 3],
    objective: ThresholdObjective,
) -> Result<(u32, u32), MeasurementError> {
    if means[1] - means[0] < 1.0 || means[2] - means[1] < 1.0 {
        return Err(MeasurementError::DegenerateMeans);
    }
    let mut best = (f64::INFINITY, (0u32, 1u32));
    for t1 in means[0].floor() as u32..means[1].ceil() as u32 {
        for t2 in means[1].floor() as u32..means[2].ceil() as u32 {
            if t2 <= t1 {
                continue;
            }
            let report = discrimination_error_for_means(means, (t1, t2));
            let score = match objective {
                ThresholdObjective::WorstCase => report.worst,
                ThresholdObjective::MeanError => report.mean,
            };
            if score < best.0 {
                best = (score, (t1, t2));
            }
        }
    }
    Ok(best.1)
}

/// Relative field and intensity seen by the neighbor ion when the beam is
/// centered on one ion of the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddressingRatios {
    pub field_ratio: f64,
    pub intensity_ratio: f64,
}

pub fn addressing_check(beam: &BeamGeometry, separation: f64) -> AddressingRatios {
    let relative = separation / beam.waist;
    let field_ratio = (-relative * relative).exp();
    AddressingRatios { field_ratio, intensity_ratio: field_ratio * field_ratio }
}
