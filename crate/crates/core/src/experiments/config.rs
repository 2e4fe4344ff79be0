//! Run configuration files (TOML). Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! mu = [1.0, 1.0]          # one drift per sensor; K = len(mu)
//! mode = "continuous"      # or "discrete"
//! step = 0.001             # Euler dt or sampling period h
//! delta = 2.0              # symmetric local thresholds (or delta_lo / delta_hi arrays)
//! truth = 1
//!
//! [calibration]
//! alpha = 0.01
//! beta = 0.01
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::calibration::{calibrate_fusion_thresholds, estimate_quantization, ErrorEstimator, FusionCalibration, QuantizationTable};
use crate::error::{Error, Result};
use crate::experiments::checks::CheckSpec;
use crate::experiments::sweep::SweepSpec;
use crate::fusion::FusionConfig;
use crate::kernel::{Mode, SystemConfig};
use crate::models::{wald_thresholds, ErrorLevels, Hypothesis, HypothesisModel, SprtThresholds};
use crate::rng::derive_seed;
use crate::sensor::LocalThresholds;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Trials for `simulate`.
    pub trials: Option<u64>,
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    pub sweep: Option<SweepSpec>,
    pub check: Option<CheckSpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.system {
            s.validate()?;
        }
        self.calibration.levels()?;
        Ok(())
    }

    pub fn system(&self) -> Result<&SystemSpec> {
        self.system.as_ref().ok_or_else(|| Error::Config("missing [system] section".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Continuous,
    Discrete,
}

/// Mirror of [`SystemConfig`] in file form.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub mu: Vec<f64>,
    pub mode: ModeName,
    pub step: f64,
    pub delta: Option<f64>,
    pub delta_lo: Option<Vec<f64>>,
    pub delta_hi: Option<Vec<f64>>,
    /// Fusion thresholds; calibrated when absent.
    pub a_tilde: Option<f64>,
    pub b_tilde: Option<f64>,
    #[serde(default = "default_truth")]
    pub truth: u8,
    pub max_steps: Option<u64>,
}

fn default_truth() -> u8 {
    1
}

impl SystemSpec {
    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() {
            return Err(Error::Config("system.mu must list one drift per sensor".into()));
        }
        self.mode()?;
        self.models()?;
        self.local_thresholds()?;
        self.truth()?;
        if self.a_tilde.is_some() != self.b_tilde.is_some() {
            return Err(Error::Config("set both system.a_tilde and system.b_tilde, or neither".into()));
        }
        self.fusion_thresholds().transpose()?;
        Ok(())
    }

    pub fn mode(&self) -> Result<Mode> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("system.step must be positive, got {}", self.step)));
        }
        Ok(match self.mode {
            ModeName::Continuous => Mode::Continuous { dt: self.step },
            ModeName::Discrete => Mode::Discrete { h: self.step },
        })
    }

    pub fn truth(&self) -> Result<Hypothesis> {
        Hypothesis::from_index(usize::from(self.truth)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn models(&self) -> Result<Vec<HypothesisModel>> {
        let mode = self.mode()?;
        self.mu
            .iter()
            .map(|&m| HypothesisModel::new(mode.model_kind(), m, mode.step()).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    pub fn local_thresholds(&self) -> Result<Vec<LocalThresholds>> {
        let k = self.k();
        let (lo, hi) = match (self.delta, &self.delta_lo, &self.delta_hi) {
            (Some(d), None, None) => (vec![d; k], vec![d; k]),
            (None, Some(lo), Some(hi)) if lo.len() == k && hi.len() == k => (lo.clone(), hi.clone()),
            (None, Some(_), Some(_)) => {
                return Err(Error::Config(format!("system.delta_lo and system.delta_hi need {k} entries")));
            }
            _ => return Err(Error::Config("give either system.delta or both system.delta_lo and system.delta_hi".into())),
        };
        lo.iter()
            .zip(&hi)
            .map(|(&l, &h)| LocalThresholds::new(l, h).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    pub fn fusion_thresholds(&self) -> Option<Result<SprtThresholds>> {
        match (self.a_tilde, self.b_tilde) {
            (Some(a), Some(b)) => Some(SprtThresholds::new(a, b).map_err(|e| Error::Config(e.to_string()))),
            _ => None,
        }
    }

    /// Same system with another step and symmetric `Δ`.
    pub fn variant(&self, step: f64, delta: Option<f64>) -> Self {
        let mut s = self.clone();
        s.step = step;
        if let Some(d) = delta {
            s.delta = Some(d);
            s.delta_lo = None;
            s.delta_hi = None;
        }
        s
    }

    /// Quantization tables, one per sensor; identical sensors share one estimate.
    pub fn quantization_tables(&self, n_mc: u64, seed: u64) -> Result<Vec<QuantizationTable>> {
        let models = self.models()?;
        let local = self.local_thresholds()?;
        let mut cache: HashMap<[u64; 4], QuantizationTable> = HashMap::new();
        let mut out = Vec::with_capacity(models.len());
        for (m, l) in models.iter().zip(&local) {
            let key = [m.mu().to_bits(), m.h().to_bits(), l.lower().to_bits(), l.upper().to_bits()];
            let t = match cache.get(&key) {
                Some(t) => t.clone(),
                None => {
                    let t = estimate_quantization(m, l, n_mc, derive_seed(seed, &key))?;
                    cache.insert(key, t.clone());
                    t
                }
            };
            out.push(t);
        }
        Ok(out)
    }

    /// Builds the system; discrete mode needs quantization tables for its `Λ` weights.
    pub fn build(&self, tables: Option<&[QuantizationTable]>, thresholds: SprtThresholds) -> Result<SystemConfig> {
        let mode = self.mode()?;
        let local = self.local_thresholds()?;
        let fusion = match (mode, tables) {
            (Mode::Continuous { .. }, _) => FusionConfig::from_deltas(thresholds, &local)?,
            (Mode::Discrete { .. }, Some(t)) => FusionConfig::from_tables(thresholds, t)?,
            (Mode::Discrete { .. }, None) => {
                return Err(Error::Config("discrete mode needs quantization tables for the fusion weights".into()))
            }
        };
        SystemConfig::new(self.models()?, local, fusion, self.truth()?, mode, self.max_steps)
    }
}

/// A ready-to-run system with the calibration products behind it.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    pub config: SystemConfig,
    /// Present in discrete mode.
    pub tables: Option<Vec<QuantizationTable>>,
    /// Present when the fusion thresholds were calibrated rather than given.
    pub fusion: Option<FusionCalibration>,
}

impl SystemSpec {
    /// Estimates the quantization tables (discrete mode) and calibrates the
    /// fusion thresholds unless the file fixes them.
    pub fn prepare(&self, calibration: &CalibrationSpec, seed: u64) -> Result<PreparedSystem> {
        let levels = calibration.levels()?;
        let tables = match self.mode()? {
            Mode::Discrete { .. } => Some(
                self.quantization_tables(calibration.n_mc, derive_seed(seed, &[1]))
                    .map_err(|e| e.in_context("quantization tables"))?,
            ),
            Mode::Continuous { .. } => None,
        };
        let given = self.fusion_thresholds().transpose()?;
        let config = self.build(tables.as_deref(), given.unwrap_or_else(|| wald_thresholds(levels)))?;
        if given.is_some() {
            return Ok(PreparedSystem { config, tables, fusion: None });
        }
        let (cal, _) =
            calibrate_fusion_thresholds(&config, levels, calibration.n_trials, derive_seed(seed, &[2]), calibration.estimator)
                .map_err(|e| e.in_context("fusion thresholds"))?;
        let config = config.with_fusion_thresholds(cal.thresholds)?;
        Ok(PreparedSystem { config, tables, fusion: Some(cal) })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSpec {
    pub alpha: f64,
    pub beta: f64,
    /// Local cycles per hypothesis for the quantization tables.
    pub n_mc: u64,
    /// Recorded trials per hypothesis for the fusion thresholds.
    pub n_trials: u64,
    pub estimator: ErrorEstimator,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec { alpha: 0.01, beta: 0.01, n_mc: 1_000_000, n_trials: 20_000, estimator: ErrorEstimator::LikelihoodRatio }
    }
}

impl CalibrationSpec {
    pub fn levels(&self) -> Result<ErrorLevels> {
        ErrorLevels::new(self.alpha, self.beta).map_err(|e| Error::Config(e.to_string()))
    }
}
