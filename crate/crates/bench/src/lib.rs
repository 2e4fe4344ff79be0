//! Fixed workloads shared by the criterion benches.

use dsprt_core::{Hypothesis, Mode, SprtThresholds, SystemConfig};

/// Two unit-drift sensors, symmetric `Δ`, fusion thresholds `(a, a)`.
pub fn two_sensor_config(mode: Mode, delta: f64, a: f64) -> SystemConfig {
    SystemConfig::homogeneous(
        2,
        1.0,
        mode,
        delta,
        None,
        SprtThresholds::new(a, a).expect("positive thresholds"),
        Hypothesis::H1,
    )
    .expect("valid bench config")
}
