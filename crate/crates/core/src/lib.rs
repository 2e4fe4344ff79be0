//! Decentralized sequential hypothesis testing with level-triggered sampling.
//!
//! `K` sensors each run a local repeated SPRT on their own log-likelihood
//! ratio and transmit one bit whenever the restarted statistic leaves
//! `(-Δ̲ᵢ, Δ̄ᵢ)`. A fusion center adds a fixed weight per received bit and
//! stops as soon as its running sum leaves `(-Ã, B̃)` (the D-SPRT).
//!
//! The crate is split along the same lines as the system itself:
//!
//! * [`models`]: observation models, LLR increments and closed-form SPRT theory.
//! * [`sensor`]: the level-triggered sampler at one sensor.
//! * [`calibration`]: bit log-likelihood values, overshoot sizes, K-L numbers,
//!   and Monte Carlo threshold calibration.
//! * [`fusion`]: the fusion-center statistic and decision rule.
//! * [`kernel`]: whole-trial drivers for the D-SPRT and centralized baselines.
//! * [`experiments`]: run configuration, sweeps, theory checks and CSV output.

pub mod calibration;
pub mod error;
pub mod experiments;
pub mod fusion;
pub mod kernel;
pub mod models;
pub mod rng;
pub mod sensor;
pub mod stats;

pub use calibration::{
    calibrate_fusion_thresholds, estimate_quantization, kl_lower_bounds, lorden_overshoot_bound,
    ErrorEstimator, FusionCalibration, QuantizationTable,
};
pub use error::{Error, Result};
pub use fusion::{BitWeights, FusionConfig, FusionState, Status};
pub use kernel::{
    run_centralized_sprt_trial, run_deterministic_sampling_sprt_trial, run_dsprt_trial,
    wald_identity_check, Decision, Mode, SystemConfig, TrialResult,
};
pub use models::{
    h_function, sprt_kl_lower_bounds, sprt_performance_brownian, wald_thresholds, ErrorLevels,
    Hypothesis, HypothesisModel, ModelKind, SprtPerformance, SprtThresholds,
};
pub use sensor::{overshoot_of, Bit, LocalThresholds, Message, SensorState};
