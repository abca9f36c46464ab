//! Deterministic desk-scale simulator of a two-ion crystal in a linear Paul
//! trap: normal-mode structure, phonon-number distributions, carrier and
//! sideband Rabi dynamics, resolved sideband cooling, heating-rate analysis,
//! and photon-count state readout.
//!
//! All frequencies are angular (rad/s) and all lengths are SI meters inside
//! this crate; conversions from bench units (kHz, MHz, µm, ms) belong at the
//! configuration boundary. Rabi flopping uses the convention
//! `P(t) = sin²(Ωt/2)`, so a π pulse lasts `t = π/Ω`.
//!
//! Every type is an immutable value and every operation is a pure function;
//! sampling operations take an explicit seed. Results are deterministic for
//! fixed inputs.

pub mod constants;
pub mod cooling;
pub mod crystal;
pub mod dynamics;
pub mod measurement;
pub mod phonon;

pub use crystal::{BeamGeometry, IonSpecies, Mode, ModeAxis, ModeLabel, TrapConfig};
pub use phonon::{FockDistribution, ModeStateSet};
