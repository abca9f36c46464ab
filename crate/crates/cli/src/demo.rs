//! Bundled demonstration configs: one per experiment type, parameterized to
//! the reference two-ion setup (700 kHz axial / 1.8 MHz radial ⁴⁰Ca⁺ trap,
//! 67.5° addressing beam). `sim demo --out <dir>` writes them next to the
//! heating-records dataset they reference.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SPECTRUM: (&str, &str) = (
    "demo_spectrum.toml",
    r#"# Excitation spectrum of the Doppler-cooled crystal: carrier plus all
# first-order red and blue sidebands. Initial occupations default to the
# per-mode Doppler limits.
seed = 1

[trap]
axial_khz = 700.0
radial_mhz = 1.8

[experiment]
kind = "spectrum_scan"

[experiment.spectrum_scan]
detuning_start_khz = -2000.0
detuning_stop_khz = 2000.0
points = 2001
probe_duration_us = 25.0
probe_rabi_khz = 20.0
"#,
);

pub const RABI: (&str, &str) = (
    "demo_rabi.toml",
    r#"# Blue-sideband Rabi flopping on the axial mode after the full cooling
# schedule; near-full-contrast oscillation at the sideband Rabi frequency.
seed = 1

[trap]
axial_khz = 700.0
radial_mhz = 1.8

[experiment]
kind = "rabi_scan"

[experiment.rabi_scan]
line = "blue_sideband"
mode = "axial_com"
rabi_khz = 50.0
duration_start_us = 0.0
duration_stop_us = 1000.0
points = 501

[experiment.rabi_scan.initial_n_bar]
axial_com = 0.05
breathing = 0.47
rocking_x = 0.65
rocking_y = 0.65
radial_com_x = 2.3
radial_com_y = 2.3
"#,
);

pub const COOLING_SCHEDULE: (&str, &str) = (
    "demo_cooling_schedule.toml",
    r#"# Sequential sideband cooling of all four coupled modes, 6 ms per pulse,
# in the order radial, rocking, breathing, axial (the gate mode last so it
# ends coldest). Per-pulse 1/e times are calibrated so the final occupations
# land near {radial 2.3, rocking 0.65, breathing 0.47, axial 0.05} with the
# ambient heating rates below active on idle modes. Initial occupations
# default to the per-mode Doppler limits.
seed = 1

[trap]
axial_khz = 700.0
radial_mhz = 1.8

[experiment]
kind = "cooling_schedule"

[experiment.cooling_schedule]
pulses = [
    { mode = "radial_com_x", duration_ms = 6.0, tau_ms = 2.63 },
    { mode = "rocking_x", duration_ms = 6.0, tau_ms = 1.685 },
    { mode = "breathing", duration_ms = 6.0, tau_ms = 1.43 },
    { mode = "axial_com", duration_ms = 6.0, tau_ms = 0.86 },
]

[experiment.cooling_schedule.heating_rates_per_s]
radial_com_x = 25.0
rocking_x = 8.0
breathing = 10.0
axial_com = 10.0
"#,
);

pub const HEATING_SCAN: (&str, &str) = (
    "demo_heating_scan.toml",
    r#"# Free heating of the rocking mode out of the ground state: prepare, wait
# a variable delay, read the occupation, fit the linear growth rate.
seed = 1

[trap]
axial_khz = 700.0
radial_mhz = 1.8

[experiment]
kind = "heating_scan"

[experiment.heating_scan]
mode = "rocking_x"
heating_rate_per_s = 8.0
delays_ms = [0.0, 25.0, 50.0, 75.0, 100.0, 125.0]
initial_n_bar = 0.0
"#,
);

pub const HISTOGRAM: (&str, &str) = (
    "demo_histogram.toml",
    r#"# Photon-count histogram of 10^4 detection windows with both ions shelved
# with probability one half: three Poisson peaks (background, one bright,
# two bright) with binomial weights 1/4, 1/2, 1/4.
seed = 17

[trap]
axial_khz = 700.0
radial_mhz = 1.8

[experiment]
kind = "histogram_run"

[experiment.histogram_run]
p_d = [0.5, 0.5]
shots = 10000
"#,
);

pub const HEATING_ANALYSIS: (&str, &str) = (
    "demo_heating_analysis.toml",
    r#"# Cross-trap heating-rate comparison: normalize measured rates to 1 MHz
# and average N·d^4 per trap group. Reference coefficients with their quoted
# uncertainties mark groups whose computed value disagrees.
[experiment]
kind = "heating_analysis"

[experiment.heating_analysis]
records_file = "heating_records.csv"

[[experiment.heating_analysis.groups]]
name = "be_com"
ion = "Be9"
com_only = true
reference = 164.0
reference_tolerance = 38.0

[[experiment.heating_analysis.groups]]
name = "be_all"
ion = "Be9"

[[experiment.heating_analysis.groups]]
name = "ca_linear"
ion = "Ca40"
trap_contains = "linear"
reference = 47.0
reference_tolerance = 38.0

[[experiment.heating_analysis.groups]]
name = "ca_spherical"
ion = "Ca40"
trap_contains = "spherical"
reference = 2.4
reference_tolerance = 1.5
"#,
);

pub const HEATING_RECORDS: (&str, &str) = (
    "heating_records.csv",
    "\
trap,ion,size_mm,mode,frequency_mhz,rate_per_s,normalized_rate
linear,Ca40,1.18,breathing,1.2,10,12
linear,Ca40,1.18,rocking,1.7,8,14
linear,Ca40,1.18,radial,1.9,25,47
spherical,Ca40,0.7,c.o.m. axial,4,5.2,21
spherical,Ca40,0.7,c.o.m. radial,1.9,14,27
spherical 2,Be9,0.175,c.o.m. (x),8.6,19000,160000
spherical 2,Be9,0.175,breathing-x,15,180,2700
spherical 2,Be9,0.175,rocking-xy,15,1000,15000
spherical 3b,Be9,0.395,c.o.m.,,,5000
linear 4,Be9,0.28,c.o.m.,,,23000
linear 5,Be9,0.28,c.o.m.,,,35000
linear 6,Be9,0.365,c.o.m.,,,11000
spherical,Hg198,0.45,c.o.m.,3,6,18
",
);

pub const ALL: [(&str, &str); 7] = [
    SPECTRUM,
    RABI,
    COOLING_SCHEDULE,
    HEATING_SCAN,
    HISTOGRAM,
    HEATING_ANALYSIS,
    HEATING_RECORDS,
];

/// Write the demo configs and dataset into `dir`, returning the paths.
pub fn write_demo_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(ALL.len());
    for (name, contents) in ALL {
        let path = dir.join(name);
        let mut file = fs::File::create(&path)?;
        file.write_all(contents.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
