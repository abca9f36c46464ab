//! Coherent dynamics on the qubit transition: carrier and sideband Rabi
//! flopping averaged over phonon distributions, detuned line shapes,
//! first-order spectrum synthesis, and two-ion carrier beating.
//!
//! Convention: on resonance a two-level system flops as `P(t) = sin²(Ωt/2)`,
//! so a π pulse lasts `π/Ω` and one full Rabi cycle `2π/Ω`.
//!
//! A thermal spectator mode spreads the carrier Rabi frequency over
//! `Ω(1 − η²n)` and washes the oscillation out after roughly
//! `N* = 1/(2η²n̄)` cycles.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::crystal::{Mode, ModeLabel};
use crate::phonon::{FockDistribution, ModeStateSet};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("no phonon distribution supplied for mode {0}")]
    MissingModeState(ModeLabel),
    #[error("no Lamb-Dicke parameter supplied for mode {0}")]
    MissingEta(ModeLabel),
}

/// Laser pulse addressed at the carrier or a named first-order sideband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PulseKind {
    Carrier,
    RedSideband(ModeLabel),
    BlueSideband(ModeLabel),
    Delay,
}

/// One typed laser pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub kind: PulseKind,
    /// Pulse duration, seconds.
    pub duration: f64,
    /// On-resonance Rabi frequency at the addressed ion, rad/s.
    pub rabi: f64,
    /// Detuning from the addressed line, rad/s.
    pub detuning: f64,
}

impl Pulse {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.duration >= 0.0) {
            return Err(DynamicsError::InvalidInput("pulse duration must be nonnegative"));
        }
        if !(self.rabi >= 0.0) {
            return Err(DynamicsError::InvalidInput("pulse rabi must be nonnegative"));
        }
        Ok(())
    }
}

/// Exponential contrast decay from laser-phase and magnetic-field noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceModel {
    /// 1/e contrast decay time, seconds. `f64::INFINITY` disables decay.
    pub tau_coherence: f64,
}

impl CoherenceModel {
    pub fn infinite() -> Self {
        Self { tau_coherence: f64::INFINITY }
    }

    /// Oscillation contrast remaining after time `t`.
    pub fn contrast(&self, t: f64) -> f64 {
        (-t / self.tau_coherence).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sideband {
    Red,
    Blue,
}

/// Carrier excitation averaged over one spectator mode:
/// `P(t) = Σ p_n sin²((1 − η²n)·Ωt/2)`.
pub fn carrier_flop(dist: &FockDistribution, eta: f64, rabi: f64, t: f64) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let omega_n = (1.0 - eta * eta * n as f64) * rabi;
            p * (omega_n * t / 2.0).sin().powi(2)
        })
        .sum()
}

/// Mean thermal occupation above which the exact product-space sum in
/// [`carrier_flop_multi`] gives way to the factorized first-order expansion.
pub const MULTI_EXACT_MEAN_LIMIT: f64 = 10.0;
/// Per-mode probability tail dropped when enumerating the product space.
const SPECTATOR_TAIL: f64 = 1e-6;

/// Carrier excitation with several spectator modes.
///
/// For cold spectators (all means ≤ [`MULTI_EXACT_MEAN_LIMIT`]) this sums the
/// exact product distribution of up to four modes with per-mode truncation at
/// a 1e-6 tail, using the frequency factor `Π_k (1 − η_k²·n_k)`. For hotter
/// spectators the product factor is expanded to first order,
/// `1 − Σ_k η_k²·n_k`, which factorizes the average into per-mode
/// characteristic functions and stays cheap for any occupation.
pub fn carrier_flop_multi(
    spectators: &[(&FockDistribution, f64)],
    rabi: f64,
    t: f64,
) -> Result<f64, DynamicsError> {
    match spectators {
        [] => Ok((rabi * t / 2.0).sin().powi(2)),
        [(dist, eta)] => Ok(carrier_flop(dist, *eta, rabi, t)),
        _ if spectators.len() > 4 => {
            Err(DynamicsError::InvalidInput("at most four spectator modes are supported"))
        }
        _ => {
            let any_hot = spectators.iter().any(|(d, _)| d.mean_phonon() > MULTI_EXACT_MEAN_LIMIT);
            if any_hot {
                Ok(carrier_flop_factorized(spectators, rabi, t))
            } else {
                Ok(carrier_flop_product(spectators, rabi, t))
            }
        }
    }
}

fn truncated(dist: &FockDistribution) -> &[f64] {
    let probs = dist.probs();
    let mut cumulative = 0.0;
    for (n, p) in probs.iter().enumerate() {
        cumulative += p;
        if 1.0 - cumulative < SPECTATOR_TAIL {
            return &probs[..=n];
        }
    }
    probs
}

fn carrier_flop_product(spectators: &[(&FockDistribution, f64)], rabi: f64, t: f64) -> f64 {
    fn recurse(modes: &[(&[f64], f64)], weight: f64, factor: f64, rabi: f64, t: f64) -> f64 {
        match modes.split_first() {
            None => weight * (factor * rabi * t / 2.0).sin().powi(2),
            Some(((probs, eta), rest)) => probs
                .iter()
                .enumerate()
                .map(|(n, p)| {
                    recurse(rest, weight * p, factor * (1.0 - eta * eta * n as f64), rabi, t)
                })
                .sum(),
        }
    }
    let truncated: Vec<(&[f64], f64)> =
        spectators.iter().map(|(d, eta)| (truncated(d), *eta)).collect();
    let total: f64 = truncated
        .iter()
        .map(|(probs, _)| probs.iter().sum::<f64>())
        .product();
    recurse(&truncated, 1.0, 1.0, rabi, t) / total
}

fn carrier_flop_factorized(spectators: &[(&FockDistribution, f64)], rabi: f64, t: f64) -> f64 {
    // P = 1/2 − 1/2·Re[ e^{iΩt} · Π_k  Σ_n p_n e^{−i η_k² n Ωt} ].
    let (mut re, mut im) = ((rabi * t).cos(), (rabi * t).sin());
    for (dist, eta) in spectators {
        let phase = eta * eta * rabi * t;
        let (mut chi_re, mut chi_im) = (0.0, 0.0);
        for (n, p) in dist.probs().iter().enumerate() {
            let angle = phase * n as f64;
            chi_re += p * angle.cos();
            chi_im -= p * angle.sin();
        }
        let next_re = re * chi_re - im * chi_im;
        im = re * chi_im + im * chi_re;
        re = next_re;
    }
    0.5 - 0.5 * re
}

/// Sideband excitation averaged over the addressed mode's distribution.
/// Blue: `Σ p_n sin²(η√(n+1)·Ωt/2)`; red: `Σ_{n≥1} p_n sin²(η√n·Ωt/2)`
/// (the ground-state term has no phonon to remove and contributes nothing).
pub fn sideband_flop(dist: &FockDistribution, eta: f64, rabi: f64, t: f64, side: Sideband) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let strength = match side {
                Sideband::Blue => (n as f64 + 1.0).sqrt(),
                Sideband::Red => (n as f64).sqrt(),
            };
            p * (eta * strength * rabi * t / 2.0).sin().powi(2)
        })
        .sum()
}

/// Upper bound on usable carrier Rabi cycles against one thermal spectator,
/// `N* = 1/(2η²n̄)`. Returns infinity for a ground-state spectator.
pub fn max_rabi_cycles(eta: f64, n_bar: f64) -> f64 {
    let denominator = 2.0 * eta * eta * n_bar;
    if denominator <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / denominator
    }
}

/// Exact detuned two-level response,
/// `P = Ω²/(Ω²+δ²) · sin²(√(Ω²+δ²)·t/2)`.
pub fn line_response(rabi: f64, detuning: f64, t: f64) -> f64 {
    let effective_sq = rabi * rabi + detuning * detuning;
    if effective_sq == 0.0 {
        return 0.0;
    }
    let effective = effective_sq.sqrt();
    (rabi * rabi / effective_sq) * (effective * t / 2.0).sin().powi(2)
}

/// First-order excitation spectrum over a detuning grid.
///
/// Each point sums the detuned response of the carrier (line center 0) and
/// the red/blue first-order sideband of every coupled mode (line centers
/// ∓ω_mode), phonon-averaged at the probe duration, then clips at 1.
/// Second-order sidebands are not synthesized.
pub fn spectrum(
    detunings: &[f64],
    probe: &Pulse,
    modes: &[Mode],
    etas: &BTreeMap<ModeLabel, f64>,
    states: &ModeStateSet,
) -> Result<Vec<(f64, f64)>, DynamicsError> {
    probe.validate()?;
    struct CoupledMode<'a> {
        frequency: f64,
        eta: f64,
        probs: &'a [f64],
    }
    let mut coupled = Vec::new();
    let mut carrier_rabi = probe.rabi;
    for mode in modes {
        let eta = *etas.get(&mode.label).ok_or(DynamicsError::MissingEta(mode.label))?;
        let dist =
            states.get(mode.label).ok_or(DynamicsError::MissingModeState(mode.label))?;
        // Thermal spectators slow the carrier by the mean frequency factor.
        carrier_rabi *= 1.0 - eta * eta * dist.mean_phonon();
        if eta != 0.0 {
            coupled.push(CoupledMode { frequency: mode.frequency, eta, probs: truncated(dist) });
        }
    }
    carrier_rabi = carrier_rabi.max(0.0);

    let response = |detuning: f64| {
        let mut total = line_response(carrier_rabi, detuning, probe.duration);
        for mode in &coupled {
            for (n, p) in mode.probs.iter().enumerate() {
                let blue = mode.eta * (n as f64 + 1.0).sqrt() * probe.rabi;
                total +=
                    p * line_response(blue, detuning - mode.frequency, probe.duration);
                if n > 0 {
                    let red = mode.eta * (n as f64).sqrt() * probe.rabi;
                    total +=
                        p * line_response(red, detuning + mode.frequency, probe.duration);
                }
            }
        }
        total.min(1.0)
    };

    Ok(detunings.iter().map(|&d| (d, response(d))).collect())
}

/// Joint observables of two independently flopping ions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoIonPoint {
    /// Upper-state (shelved) probability per ion.
    pub p_up: [f64; 2],
    /// Mean upper-state population of the crystal.
    pub mean_upper: f64,
    /// Probability that neither ion is shelved.
    pub p_both_down: f64,
}

/// Carrier excitation of both ions with distinct Rabi frequencies.
///
/// Both ions start in the lower state. Each flops independently with
/// `P↑ᵢ = C(t)·sin²(Ωᵢt/2) + (1 − C(t))/2` where `C(t)` is the coherence
/// contrast; the populations beat against each other at `Ω₁ − Ω₂`.
pub fn two_ion_carrier(
    omega1: f64,
    omega2: f64,
    t: f64,
    coh: &CoherenceModel,
) -> Result<TwoIonPoint, DynamicsError> {
    if !(omega1 >= 0.0 && omega2 >= 0.0) {
        return Err(DynamicsError::InvalidInput("rabi frequencies must be nonnegative"));
    }
    if !(coh.tau_coherence > 0.0) {
        return Err(DynamicsError::InvalidInput("tau_coherence must be positive"));
    }
    let contrast = coh.contrast(t);
    let p_up = [omega1, omega2]
        .map(|omega| contrast * (omega * t / 2.0).sin().powi(2) + (1.0 - contrast) / 2.0);
    Ok(TwoIonPoint {
        p_up,
        mean_upper: (p_up[0] + p_up[1]) / 2.0,
        p_both_down: (1.0 - p_up[0]) * (1.0 - p_up[1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{mode_spectrum, BeamGeometry, IonSpecies, TrapConfig};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn ground_state_carrier_is_undamped() {
        let ground = FockDistribution::ground();
        let rabi = 2.0 * PI * 50e3;
        for step in 0..200 {
            let t = step as f64 * 1e-6;
            let expected = (rabi * t / 2.0).sin().powi(2);
            assert!((carrier_flop(&ground, 0.1, rabi, t) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_eta_carrier_is_exact_for_any_distribution() {
        let dist = FockDistribution::thermal(3.7, 0).unwrap();
        let rabi = 2.0 * PI * 80e3;
        let t = 13e-6;
        let expected = (rabi * t / 2.0).sin().powi(2);
        assert!((carrier_flop(&dist, 0.0, rabi, t) - expected).abs() < 1e-12);
    }

    /// Closed-form check: for a thermal spectator the phonon average has the
    /// geometric-series characteristic function
    /// `P = 1/2 − Re[e^{iΩt} / (1 + n̄(1 − e^{−iη²Ωt}))]/2`.
    fn thermal_carrier_closed_form(n_bar: f64, eta: f64, rabi: f64, t: f64) -> f64 {
        let u = eta * eta * rabi * t;
        let zr = 1.0 + n_bar * (1.0 - u.cos());
        let zi = n_bar * u.sin();
        let norm = zr * zr + zi * zi;
        let (chi_re, chi_im) = (zr / norm, -zi / norm);
        let (c, s) = ((rabi * t).cos(), (rabi * t).sin());
        0.5 - 0.5 * (c * chi_re - s * chi_im)
    }

    #[test]
    fn thermal_carrier_matches_characteristic_function() {
        let n_bar = 2.3;
        let dist = FockDistribution::thermal(n_bar, 0).unwrap();
        let rabi = 2.0 * PI * 100e3;
        for step in 1..60 {
            let t = step as f64 * 2.3e-6;
            let summed = carrier_flop(&dist, 0.066, rabi, t);
            let closed = thermal_carrier_closed_form(n_bar, 0.066, rabi, t);
            assert!(
                (summed - closed).abs() < 1e-7,
                "t={t}: sum {summed} vs closed form {closed}"
            );
        }
    }

    #[test]
    fn hot_spectator_washes_out_within_a_few_cycles() {
        // n̄ = 50 at η = 0.066: washout scale 1/(2η²n̄) ≈ 2.3 cycles.
        let dist = FockDistribution::thermal(50.0, 0).unwrap();
        let rabi = 2.0 * PI * 100e3;
        let period = 2.0 * PI / rabi;
        let contrast_at = |cycle: f64| {
            let mut lo: f64 = 1.0;
            let mut hi: f64 = 0.0;
            for k in 0..400 {
                let t = (cycle - 1.0 + k as f64 / 400.0) * period;
                let p = carrier_flop(&dist, 0.066, rabi, t);
                lo = lo.min(p);
                hi = hi.max(p);
            }
            hi - lo
        };
        assert!(contrast_at(1.0) > 0.5);
        assert!(contrast_at(5.0) < 0.25, "contrast at cycle 5: {}", contrast_at(5.0));
    }

    #[test]
    fn cold_spectator_supports_tens_of_cycles() {
        let dist = FockDistribution::thermal(2.3, 0).unwrap();
        let rabi = 2.0 * PI * 100e3;
        let period = 2.0 * PI / rabi;
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 0.0;
        for k in 0..400 {
            let t = (19.0 + k as f64 / 400.0) * period;
            let p = carrier_flop(&dist, 0.066, rabi, t);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        assert!(hi - lo > 0.5, "contrast in cycle 20: {}", hi - lo);
    }

    #[test]
    fn red_sideband_vanishes_on_ground_state() {
        let ground = FockDistribution::ground();
        for step in 0..100 {
            let t = step as f64 * 1e-6;
            assert_eq!(sideband_flop(&ground, 0.05, 2.0 * PI * 50e3, t, Sideband::Red), 0.0);
        }
    }

    #[test]
    fn blue_sideband_on_ground_state_is_full_contrast() {
        let ground = FockDistribution::ground();
        let (eta, rabi) = (0.05, 2.0 * PI * 50e3);
        for step in 0..100 {
            let t = step as f64 * 2e-6;
            let expected = (eta * rabi * t / 2.0).sin().powi(2);
            let p = sideband_flop(&ground, eta, rabi, t, Sideband::Blue);
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn blue_sideband_long_time_average_is_half() {
        let dist = FockDistribution::thermal(1.0, 0).unwrap();
        let (eta, rabi) = (0.066, 2.0 * PI * 50e3);
        let window = 0.2;
        let samples = 20_000;
        let avg: f64 = (0..samples)
            .map(|k| {
                let t = window * (k as f64 + 0.5) / samples as f64;
                sideband_flop(&dist, eta, rabi, t, Sideband::Blue)
            })
            .sum::<f64>()
            / samples as f64;
        assert!((avg - 0.5).abs() < 0.01, "long-time average {avg}");
    }

    #[test]
    fn blue_sideband_agrees_with_monte_carlo_average() {
        // Oracle: sample n from the thermal distribution and average the
        // single-n oscillation; must agree within 3σ of the sample error.
        let n_bar = 1.7;
        let dist = FockDistribution::thermal(n_bar, 0).unwrap();
        let (eta, rabi, t) = (0.066, 2.0 * PI * 50e3, 37e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let shots = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..shots {
            let mut u: f64 = rng.random();
            let mut n = 0usize;
            for (k, p) in dist.probs().iter().enumerate() {
                if u < *p {
                    n = k;
                    break;
                }
                u -= p;
                n = k;
            }
            let value = (eta * ((n + 1) as f64).sqrt() * rabi * t / 2.0).sin().powi(2);
            sum += value;
            sum_sq += value * value;
        }
        let mc_mean = sum / shots as f64;
        let mc_sigma = ((sum_sq / shots as f64 - mc_mean * mc_mean) / shots as f64).sqrt();
        let exact = sideband_flop(&dist, eta, rabi, t, Sideband::Blue);
        assert!(
            (exact - mc_mean).abs() < 3.0 * mc_sigma,
            "exact {exact}, Monte Carlo {mc_mean} ± {mc_sigma}"
        );
    }

    #[test]
    fn max_cycles_examples() {
        assert!((max_rabi_cycles(0.066, 2.3) - 49.906_176_388_389_83).abs() < 1e-9);
        assert!((max_rabi_cycles(0.043, 45.0) - 6.009_254_251_547_384).abs() < 1e-9);
        assert_eq!(max_rabi_cycles(0.066, 0.0), f64::INFINITY);
    }

    #[test]
    fn line_response_values() {
        let rabi = 2.0 * PI * 40e3;
        // π pulse on resonance inverts fully.
        assert!((line_response(rabi, 0.0, PI / rabi) - 1.0).abs() < 1e-12);
        // δ = Ω at the π-pulse duration: ½·sin²(π/√2).
        let expected = 0.5 * (PI / 2.0_f64.sqrt()).sin().powi(2);
        assert!((expected - 0.316_563_835_510_353_9).abs() < 1e-15);
        assert!((line_response(rabi, rabi, PI / rabi) - expected).abs() < 1e-12);
        // Far off resonance nothing happens.
        assert!(line_response(rabi, 1e4 * rabi, PI / rabi) < 1e-7);
    }

    #[test]
    fn line_response_on_resonance_reduces_to_carrier() {
        let dist = FockDistribution::thermal(0.8, 0).unwrap();
        let rabi = 2.0 * PI * 60e3;
        for step in 0..50 {
            let t = step as f64 * 1.7e-6;
            assert!((line_response(rabi, 0.0, t) - carrier_flop(&dist, 0.0, rabi, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_spectator_exact_reduces_to_single_mode() {
        let dist = FockDistribution::thermal(1.2, 0).unwrap();
        let rabi = 2.0 * PI * 90e3;
        let t = 11e-6;
        let single = carrier_flop(&dist, 0.05, rabi, t);
        let multi = carrier_flop_multi(&[(&dist, 0.05)], rabi, t).unwrap();
        assert!((single - multi).abs() < 1e-12);
    }

    #[test]
    fn multi_spectator_product_matches_direct_double_sum() {
        let a = FockDistribution::thermal(0.5, 0).unwrap();
        let b = FockDistribution::thermal(1.4, 0).unwrap();
        let (eta_a, eta_b) = (0.044, 0.066);
        let rabi = 2.0 * PI * 70e3;
        let t = 23e-6;
        let mut direct = 0.0;
        for (na, pa) in a.probs().iter().enumerate() {
            for (nb, pb) in b.probs().iter().enumerate() {
                let factor =
                    (1.0 - eta_a * eta_a * na as f64) * (1.0 - eta_b * eta_b * nb as f64);
                direct += pa * pb * (factor * rabi * t / 2.0).sin().powi(2);
            }
        }
        let multi = carrier_flop_multi(&[(&a, eta_a), (&b, eta_b)], rabi, t).unwrap();
        assert!((direct - multi).abs() < 1e-6, "direct {direct} vs product {multi}");
    }

    #[test]
    fn hot_multi_spectator_uses_first_order_expansion() {
        // One hot mode switches the route; the factorized result must agree
        // with the single-mode sum when the expansion is exact (one mode).
        let hot = FockDistribution::thermal(45.0, 0).unwrap();
        let cold = FockDistribution::ground();
        let rabi = 2.0 * PI * 100e3;
        let t = 8e-6;
        let multi = carrier_flop_multi(&[(&hot, 0.044), (&cold, 0.066)], rabi, t).unwrap();
        // Ground-state second mode contributes factor 1 exactly, so the
        // answer equals the single hot-mode average.
        let single = carrier_flop(&hot, 0.044, rabi, t);
        assert!((multi - single).abs() < 1e-6, "multi {multi} vs single {single}");
    }

    #[test]
    fn too_many_spectators_are_rejected() {
        let d = FockDistribution::ground();
        let spectators = [(&d, 0.01), (&d, 0.01), (&d, 0.01), (&d, 0.01), (&d, 0.01)];
        assert!(carrier_flop_multi(&spectators, 1.0, 1.0).is_err());
    }

    fn reference_setup() -> (Vec<Mode>, BTreeMap<ModeLabel, f64>) {
        let trap = TrapConfig {
            omega_axial: 2.0 * PI * 700e3,
            omega_radial_x: 2.0 * PI * 1.8e6,
            omega_radial_y: 2.0 * PI * 1.8e6,
            electrode_distance_mm: 1.18,
            rf_drive: 2.0 * PI * 16e6,
        };
        let species = IonSpecies::calcium_40();
        let beam = BeamGeometry {
            angle_to_axis_deg: 67.5,
            waist: 3.7e-6,
            center_offset: 0.0,
            peak_rabi: 2.0 * PI * 20e3,
        };
        let modes = mode_spectrum(&trap).unwrap();
        let etas = modes
            .iter()
            .map(|m| (m.label, crate::crystal::lamb_dicke(m, &species, &beam)))
            .collect();
        (modes, etas)
    }

    fn probe() -> Pulse {
        // π pulse on the bare carrier; weak on every first-order sideband.
        Pulse {
            kind: PulseKind::Carrier,
            duration: 25e-6,
            rabi: 2.0 * PI * 20e3,
            detuning: 0.0,
        }
    }

    fn peak_height(scan: &[(f64, f64)], center: f64) -> f64 {
        scan.iter()
            .filter(|(d, _)| (d - center).abs() < 2.0 * PI * 10e3)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max)
    }

    #[test]
    fn ground_state_spectrum_has_no_red_peaks() {
        let (modes, etas) = reference_setup();
        let states: ModeStateSet =
            modes.iter().map(|m| (m.label, FockDistribution::ground())).collect();
        let grid: Vec<f64> =
            (-2000..=2000).map(|k| k as f64 * 2.0 * PI * 1e3).collect();
        let scan = spectrum(&grid, &probe(), &modes, &etas, &states).unwrap();

        // Reference with all couplings off isolates the carrier's own
        // far-detuned tail; the red windows must add nothing beyond it.
        let no_coupling: BTreeMap<ModeLabel, f64> =
            etas.keys().map(|label| (*label, 0.0)).collect();
        let reference = spectrum(&grid, &probe(), &modes, &no_coupling, &states).unwrap();
        let sideband_excess = |center: f64| {
            scan.iter()
                .zip(reference.iter())
                .filter(|((d, _), _)| (d - center).abs() < 2.0 * PI * 10e3)
                .map(|((_, p), (_, base))| p - base)
                .fold(0.0, f64::max)
        };

        let axial = 2.0 * PI * 700e3;
        let breathing = 2.0 * PI * 1.212_435_565e6;
        assert!(sideband_excess(-axial) < 1e-5, "red axial peak present");
        assert!(sideband_excess(-breathing) < 1e-5, "red breathing peak present");
        assert!(sideband_excess(axial) > 1e-3, "blue axial peak missing");
        assert!(peak_height(&scan, 0.0) > 0.5, "carrier missing");
    }

    #[test]
    fn doppler_temperature_spectrum_has_symmetric_sidebands() {
        let (modes, etas) = reference_setup();
        let states: ModeStateSet = modes
            .iter()
            .map(|m| (m.label, FockDistribution::thermal(45.0, 0).unwrap()))
            .collect();
        let grid: Vec<f64> = (-2000..=2000).map(|k| k as f64 * 2.0 * PI * 1e3).collect();
        let scan = spectrum(&grid, &probe(), &modes, &etas, &states).unwrap();
        let axial = 2.0 * PI * 700e3;
        let red = peak_height(&scan, -axial);
        let blue = peak_height(&scan, axial);
        assert!(
            (red / blue - 45.0 / 46.0).abs() < 0.05,
            "hot sidebands should be near-symmetric: rsb {red} bsb {blue}"
        );
    }

    #[test]
    fn cooled_spectrum_reproduces_sideband_asymmetry_ratios() {
        let (modes, etas) = reference_setup();
        let occupations = [
            (ModeLabel::AxialCom, 0.05),
            (ModeLabel::Breathing, 0.47),
            (ModeLabel::RockingX, 0.65),
            (ModeLabel::RockingY, 0.65),
            (ModeLabel::RadialComX, 2.3),
            (ModeLabel::RadialComY, 2.3),
        ];
        let states = ModeStateSet::thermal(&occupations).unwrap();
        // Thermometry probe: weak enough that the carrier tail at the
        // sideband positions ((Ω/ω_mode)² ≈ 2e-5) stays below the red peaks.
        let weak = Pulse {
            kind: PulseKind::Carrier,
            duration: 0.5e-3,
            rabi: 2.0 * PI * 3e3,
            detuning: 0.0,
        };
        // Sample at the exact line centers, as a sideband fit would.
        let grid: Vec<f64> = modes
            .iter()
            .flat_map(|m| [-m.frequency, m.frequency])
            .collect();
        let scan = spectrum(&grid, &weak, &modes, &etas, &states).unwrap();
        let at = |detuning: f64| {
            scan.iter()
                .find(|(d, _)| (*d - detuning).abs() < 1.0)
                .map(|(_, p)| *p)
                .unwrap()
        };
        for (label, n_bar) in [(ModeLabel::AxialCom, 0.05), (ModeLabel::RadialComX, 2.3)] {
            let mode = modes.iter().find(|m| m.label == label).unwrap();
            let ratio = at(-mode.frequency) / at(mode.frequency);
            let expected = n_bar / (n_bar + 1.0);
            assert!(
                (ratio - expected).abs() / expected < 0.02,
                "{label}: rsb/bsb {ratio} vs n̄/(n̄+1) {expected}"
            );
        }
    }

    #[test]
    fn blue_peak_main_lobe_decays_monotonically() {
        let (modes, etas) = reference_setup();
        let states: ModeStateSet =
            modes.iter().map(|m| (m.label, FockDistribution::ground())).collect();
        let axial = 2.0 * PI * 700e3;
        // π pulse on the blue axial sideband; the carrier background at this
        // detuning is below 5e-5 and cannot mask the line shape.
        let eta_ax = etas[&ModeLabel::AxialCom];
        let duration = 2.5e-3;
        let line_rabi = PI / duration;
        let strong_sideband = Pulse {
            kind: PulseKind::BlueSideband(ModeLabel::AxialCom),
            duration,
            rabi: line_rabi / eta_ax,
            detuning: 0.0,
        };
        let first_null = ((2.0 * PI / duration).powi(2) - line_rabi * line_rabi).sqrt();
        let grid: Vec<f64> = (0..200).map(|k| axial + first_null * k as f64 / 200.0).collect();
        let scan = spectrum(&grid, &strong_sideband, &modes, &etas, &states).unwrap();
        assert!(scan[0].1 > 0.99, "line center should be fully excited");
        for pair in scan.windows(2) {
            assert!(
                pair[1].1 <= pair[0].1 + 1e-4,
                "profile rose within the main lobe at detuning {}",
                pair[1].0
            );
        }
    }

    #[test]
    fn line_main_lobe_is_monotone_under_a_pi_pulse() {
        let rabi = 2.0 * PI * 500.0;
        let t = PI / rabi;
        let first_null = ((2.0 * PI / t).powi(2) - rabi * rabi).sqrt();
        let mut previous = f64::INFINITY;
        for k in 0..=300 {
            let detuning = first_null * k as f64 / 300.0;
            let p = line_response(rabi, detuning, t);
            assert!(p <= previous + 1e-12, "rose at detuning {detuning}");
            previous = p;
        }
    }

    #[test]
    fn spectrum_requires_complete_states() {
        let (modes, etas) = reference_setup();
        let states = ModeStateSet::new();
        let err = spectrum(&[0.0], &probe(), &modes, &etas, &states).unwrap_err();
        assert!(matches!(err, DynamicsError::MissingModeState(_)));
    }

    #[test]
    fn two_ion_degenerate_drive_reaches_full_inversion() {
        let rabi = 2.0 * PI * 100e3;
        let coh = CoherenceModel::infinite();
        let point = two_ion_carrier(rabi, rabi, PI / rabi, &coh).unwrap();
        assert!((point.mean_upper - 1.0).abs() < 1e-12);
        assert!(point.p_both_down < 1e-12);
    }

    #[test]
    fn two_ion_reduces_to_single_ion_when_one_beam_is_off() {
        let rabi = 2.0 * PI * 80e3;
        let coh = CoherenceModel::infinite();
        for step in 0..100 {
            let t = step as f64 * 1e-6;
            let point = two_ion_carrier(rabi, 0.0, t, &coh).unwrap();
            let single = (rabi * t / 2.0).sin().powi(2);
            assert!((point.p_up[0] - single).abs() < 1e-12);
            assert!(point.p_up[1].abs() < 1e-12);

            // Coverage: both-down, exactly-one-up, both-up sum to one.
            let exactly_one = point.p_up[0] * (1.0 - point.p_up[1])
                + point.p_up[1] * (1.0 - point.p_up[0]);
            let both_up = point.p_up[0] * point.p_up[1];
            assert!((point.p_both_down + exactly_one + both_up - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beating_collapse_and_revival() {
        // Ω₁ = 7 cycles and Ω₂ = 7.5 cycles per 75 µs: the populations are in
        // quadrature at 75 µs (collapse to one ion up) and realign near
        // 155 µs with both ions up.
        let omega1 = 2.0 * PI * 7.0 / 75e-6;
        let omega2 = 2.0 * PI * 7.5 / 75e-6;
        let coh = CoherenceModel::infinite();

        let collapse = two_ion_carrier(omega1, omega2, 75e-6, &coh).unwrap();
        assert!((collapse.mean_upper - 0.5).abs() < 1e-9);
        assert!(collapse.p_up[0] < 1e-9 && (collapse.p_up[1] - 1.0).abs() < 1e-9);

        let revival = two_ion_carrier(omega1, omega2, 155e-6, &coh).unwrap();
        assert!(revival.mean_upper > 0.98, "revival mean {}", revival.mean_upper);
    }

    #[test]
    fn twelve_oscillations_survive_at_sixty_percent_contrast() {
        let rabi = 2.0 * PI * 100e3;
        let period = 2.0 * PI / rabi;
        // Contrast decays to 0.6 after exactly 12 periods.
        let tau = -(12.0 * period) / 0.6_f64.ln();
        let coh = CoherenceModel { tau_coherence: tau };
        assert!((coh.contrast(12.0 * period) - 0.6).abs() < 1e-12);

        let mut oscillations = 0;
        for cycle in 0..12 {
            let mut lo: f64 = 1.0;
            let mut hi: f64 = 0.0;
            for k in 0..200 {
                let t = (cycle as f64 + k as f64 / 200.0) * period;
                let p = two_ion_carrier(rabi, rabi, t, &coh).unwrap().mean_upper;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            if hi - lo >= 0.6 {
                oscillations += 1;
            }
        }
        assert_eq!(oscillations, 12);
    }

    proptest! {
        #[test]
        fn probabilities_stay_in_unit_interval(
            n_bar in 0.0..60.0f64,
            eta in 0.0..0.2f64,
            rabi_khz in 1.0..500.0f64,
            t_us in 0.0..500.0f64,
        ) {
            let dist = FockDistribution::thermal(n_bar, 0).unwrap();
            let rabi = 2.0 * PI * rabi_khz * 1e3;
            let t = t_us * 1e-6;
            for p in [
                carrier_flop(&dist, eta, rabi, t),
                sideband_flop(&dist, eta, rabi, t, Sideband::Blue),
                sideband_flop(&dist, eta, rabi, t, Sideband::Red),
                line_response(rabi, 2.0 * PI * 30e3, t),
            ] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
            }
        }

        #[test]
        fn thermal_carrier_closed_form_property(
            n_bar in 0.05..30.0f64,
            eta in 0.01..0.12f64,
            cycles in 0.1..40.0f64,
        ) {
            let dist = FockDistribution::thermal(n_bar, 0).unwrap();
            let rabi = 2.0 * PI * 100e3;
            let t = cycles * 2.0 * PI / rabi;
            let summed = carrier_flop(&dist, eta, rabi, t);
            let closed = thermal_carrier_closed_form(n_bar, eta, rabi, t);
            prop_assert!((summed - closed).abs() < 1e-6);
        }

        #[test]
        fn two_ion_outputs_are_probabilities(
            f1_khz in 0.0..300.0f64,
            f2_khz in 0.0..300.0f64,
            t_us in 0.0..1000.0f64,
            tau_us in 1.0..10_000.0f64,
        ) {
            let coh = CoherenceModel { tau_coherence: tau_us * 1e-6 };
            let point = two_ion_carrier(
                2.0 * PI * f1_khz * 1e3,
                2.0 * PI * f2_khz * 1e3,
                t_us * 1e-6,
                &coh,
            ).unwrap();
            for p in [point.p_up[0], point.p_up[1], point.mean_upper, point.p_both_down] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
