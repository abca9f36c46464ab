//! Static physics of the trap and the two-ion crystal: normal-mode spectrum,
//! equilibrium ion spacing, Lamb-Dicke parameters and beam-geometry coupling.
//!
//! The crystal supports six normal modes. Along the trap axis the ions move
//! in phase at the axial secular frequency (center-of-mass mode) or exactly
//! out of phase at `√3·ω_ax` (breathing mode). In each radial direction they
//! move in phase at the radial secular frequency or swing in opposite
//! directions at the rocking frequency `√(ω_rad² − ω_ax²)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

use crate::constants::{ATOMIC_MASS, ELEMENTARY_CHARGE, HBAR, VACUUM_PERMITTIVITY};

#[derive(Debug, Error, PartialEq)]
pub enum CrystalError {
    #[error("ion species is invalid: {0}")]
    InvalidSpecies(&'static str),
    #[error("trap configuration is invalid: {0}")]
    InvalidTrap(&'static str),
    #[error("beam geometry is invalid: {0}")]
    InvalidBeam(&'static str),
    #[error(
        "radial secular frequency {omega_radial:.6e} rad/s does not exceed the axial \
         frequency {omega_axial:.6e} rad/s; the rocking frequency is not real and the \
         crystal does not form a linear string"
    )]
    NoLinearString { omega_radial: f64, omega_axial: f64 },
}

/// Ion species constants for the qubit and cooling transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// Ion mass in atomic mass units.
    pub mass_amu: f64,
    /// Qubit transition wavelength in meters.
    pub qubit_wavelength: f64,
    /// Natural linewidth of the dipole cooling transition, angular frequency.
    pub dipole_linewidth_natural: f64,
}

impl IonSpecies {
    /// ⁴⁰Ca⁺: 729 nm quadrupole qubit, 2π·20 MHz dipole linewidth.
    pub fn calcium_40() -> Self {
        Self {
            mass_amu: 40.0,
            qubit_wavelength: 729e-9,
            dipole_linewidth_natural: 2.0 * PI * 20e6,
        }
    }

    /// Single-ion mass in kg.
    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * ATOMIC_MASS
    }

    /// Magnitude of the qubit-light wavevector, rad/m.
    pub fn qubit_wavenumber(&self) -> f64 {
        2.0 * PI / self.qubit_wavelength
    }

    pub fn validate(&self) -> Result<(), CrystalError> {
        if !(self.mass_amu > 0.0) {
            return Err(CrystalError::InvalidSpecies("mass_amu must be positive"));
        }
        if !(self.qubit_wavelength > 0.0) {
            return Err(CrystalError::InvalidSpecies("qubit_wavelength must be positive"));
        }
        if !(self.dipole_linewidth_natural > 0.0) {
            return Err(CrystalError::InvalidSpecies("dipole_linewidth_natural must be positive"));
        }
        Ok(())
    }
}

/// Secular frequencies and geometry of the linear trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Axial secular frequency, rad/s.
    pub omega_axial: f64,
    /// Radial secular frequency along x, rad/s.
    pub omega_radial_x: f64,
    /// Radial secular frequency along y, rad/s.
    pub omega_radial_y: f64,
    /// Characteristic ion-electrode distance, mm.
    pub electrode_distance_mm: f64,
    /// RF drive frequency, rad/s (informational).
    pub rf_drive: f64,
}

impl TrapConfig {
    pub fn validate(&self) -> Result<(), CrystalError> {
        for (value, what) in [
            (self.omega_axial, "omega_axial must be positive"),
            (self.omega_radial_x, "omega_radial_x must be positive"),
            (self.omega_radial_y, "omega_radial_y must be positive"),
            (self.electrode_distance_mm, "electrode_distance_mm must be positive"),
            (self.rf_drive, "rf_drive must be positive"),
        ] {
            if !(value > 0.0) {
                return Err(CrystalError::InvalidTrap(what));
            }
        }
        for omega_radial in [self.omega_radial_x, self.omega_radial_y] {
            if omega_radial <= self.omega_axial {
                return Err(CrystalError::NoLinearString {
                    omega_radial,
                    omega_axial: self.omega_axial,
                });
            }
        }
        Ok(())
    }
}

/// Names of the six normal modes of a two-ion crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    AxialCom,
    Breathing,
    RadialComX,
    RadialComY,
    RockingX,
    RockingY,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 6] = [
        ModeLabel::AxialCom,
        ModeLabel::Breathing,
        ModeLabel::RadialComX,
        ModeLabel::RadialComY,
        ModeLabel::RockingX,
        ModeLabel::RockingY,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModeLabel::AxialCom => "axial_com",
            ModeLabel::Breathing => "breathing",
            ModeLabel::RadialComX => "radial_com_x",
            ModeLabel::RadialComY => "radial_com_y",
            ModeLabel::RockingX => "rocking_x",
            ModeLabel::RockingY => "rocking_y",
        }
    }

    pub fn parse(name: &str) -> Option<ModeLabel> {
        ModeLabel::ALL.into_iter().find(|label| label.as_str() == name)
    }
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Principal axis a mode oscillates along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeAxis {
    Axial,
    RadialX,
    RadialY,
}

/// One normal mode: frequency, axis, and the normalized per-ion eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub label: ModeLabel,
    /// Mode frequency, rad/s.
    pub frequency: f64,
    pub axis: ModeAxis,
    /// Eigenvector amplitude on each ion; Euclidean norm 1. Equal signs for
    /// center-of-mass modes, opposite signs for breathing and rocking.
    pub ion_amplitudes: [f64; 2],
}

impl Mode {
    /// |eigenvector entry| of the given ion; scales the Lamb-Dicke parameter
    /// when a single ion of the crystal is addressed.
    pub fn ion_coupling_factor(&self, ion: usize) -> f64 {
        self.ion_amplitudes[ion].abs()
    }
}

/// Addressing-beam geometry and strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// Angle between the beam and the trap axis, degrees. The beam is taken
    /// to lie in the plane spanned by the axis and the radial x direction.
    pub angle_to_axis_deg: f64,
    /// Gaussian 1/e field radius, meters.
    pub waist: f64,
    /// Beam-center offset from the crystal center along the axis, meters.
    pub center_offset: f64,
    /// On-resonance carrier Rabi frequency at the beam center, rad/s.
    pub peak_rabi: f64,
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<(), CrystalError> {
        if !(0.0..=90.0).contains(&self.angle_to_axis_deg) {
            return Err(CrystalError::InvalidBeam("angle_to_axis_deg must lie in [0, 90]"));
        }
        if !(self.waist > 0.0) {
            return Err(CrystalError::InvalidBeam("waist must be positive"));
        }
        if !(self.peak_rabi >= 0.0) {
            return Err(CrystalError::InvalidBeam("peak_rabi must be nonnegative"));
        }
        Ok(())
    }

    /// Projection of the beam direction onto a mode axis. The radial y
    /// direction is out of the beam plane and does not couple.
    pub fn axis_projection(&self, axis: ModeAxis) -> f64 {
        let angle = self.angle_to_axis_deg.to_radians();
        match axis {
            ModeAxis::Axial => angle.cos(),
            ModeAxis::RadialX => angle.sin(),
            ModeAxis::RadialY => 0.0,
        }
    }
}

const COM_AMPLITUDES: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
const RELATIVE_AMPLITUDES: [f64; 2] = [FRAC_1_SQRT_2, -FRAC_1_SQRT_2];

/// All six normal modes of the two-ion crystal.
///
/// Axial center of mass at `ω_ax`, breathing at `√3·ω_ax`, radial center of
/// mass at `ω_rad` per radial axis, rocking at `√(ω_rad² − ω_ax²)`. When the
/// two radial frequencies are degenerate this yields four distinct
/// frequencies. Fails when `ω_rad ≤ ω_ax`.
pub fn mode_spectrum(trap: &TrapConfig) -> Result<Vec<Mode>, CrystalError> {
    trap.validate()?;
    let rocking = |omega_radial: f64| {
        (omega_radial * omega_radial - trap.omega_axial * trap.omega_axial).sqrt()
    };
    Ok(vec![
        Mode {
            label: ModeLabel::AxialCom,
            frequency: trap.omega_axial,
            axis: ModeAxis::Axial,
            ion_amplitudes: COM_AMPLITUDES,
        },
        Mode {
            label: ModeLabel::Breathing,
            frequency: 3.0_f64.sqrt() * trap.omega_axial,
            axis: ModeAxis::Axial,
            ion_amplitudes: RELATIVE_AMPLITUDES,
        },
        Mode {
            label: ModeLabel::RadialComX,
            frequency: trap.omega_radial_x,
            axis: ModeAxis::RadialX,
            ion_amplitudes: COM_AMPLITUDES,
        },
        Mode {
            label: ModeLabel::RadialComY,
            frequency: trap.omega_radial_y,
            axis: ModeAxis::RadialY,
            ion_amplitudes: COM_AMPLITUDES,
        },
        Mode {
            label: ModeLabel::RockingX,
            frequency: rocking(trap.omega_radial_x),
            axis: ModeAxis::RadialX,
            ion_amplitudes: RELATIVE_AMPLITUDES,
        },
        Mode {
            label: ModeLabel::RockingY,
            frequency: rocking(trap.omega_radial_y),
            axis: ModeAxis::RadialY,
            ion_amplitudes: RELATIVE_AMPLITUDES,
        },
    ])
}

/// Equilibrium spacing of two identical ions on the trap axis,
/// `Δz = (e² / (2π ε₀ m ω_ax²))^(1/3)`, in meters.
pub fn ion_separation(trap: &TrapConfig, species: &IonSpecies) -> Result<f64, CrystalError> {
    trap.validate()?;
    species.validate()?;
    let numerator = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE;
    let denominator =
        2.0 * PI * VACUUM_PERMITTIVITY * species.mass_kg() * trap.omega_axial * trap.omega_axial;
    Ok((numerator / denominator).cbrt())
}

/// Lamb-Dicke parameter `η = k·cos(φ)·√(ħ / 2mω)` of one mode, with `φ` the
/// angle between the beam and the mode axis and `m` the single-ion mass.
pub fn lamb_dicke(mode: &Mode, species: &IonSpecies, beam: &BeamGeometry) -> f64 {
    let projection = beam.axis_projection(mode.axis);
    let ground_state_extent = (HBAR / (2.0 * species.mass_kg() * mode.frequency)).sqrt();
    species.qubit_wavenumber() * projection * ground_state_extent
}

/// Per-ion Lamb-Dicke coupling, `η · |ion_amplitudes[i]|`.
pub fn lamb_dicke_per_ion(mode: &Mode, species: &IonSpecies, beam: &BeamGeometry) -> [f64; 2] {
    let eta = lamb_dicke(mode, species, beam);
    [eta * mode.ion_coupling_factor(0), eta * mode.ion_coupling_factor(1)]
}

/// Gaussian field amplitude of the beam at axial position `x`:
/// `Ω(x) = Ω₀ · exp(−(x − x₀)² / w²)`. Intensity falls as the square.
pub fn rabi_at_position(beam: &BeamGeometry, x: f64) -> f64 {
    let offset = (x - beam.center_offset) / beam.waist;
    beam.peak_rabi * (-offset * offset).exp()
}
