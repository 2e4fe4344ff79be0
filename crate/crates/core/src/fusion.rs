//! The fusion center of the D-SPRT.
//!
//! The statistic `ũ` starts at zero and only moves when a bit arrives: it
//! gains `w_hiᵢ` for a `1` from sensor `i` and loses `w_loᵢ` for a `0`.
//! With continuous paths the weights are the local thresholds `(Δ̲ᵢ, Δ̄ᵢ)`;
//! in discrete time they are the bit log-likelihood values `(Λ̲ᵢ, Λ̄ᵢ)`.
//! The test stops the first time `ũ ≥ B̃` (decide 1) or `ũ ≤ −Ã` (decide 0).

use crate::calibration::QuantizationTable;
use crate::error::{Error, Result};
use crate::models::{Hypothesis, SprtThresholds};
use crate::sensor::{Bit, LocalThresholds, Message};

/// Magnitudes added for a `0` (subtracted) and a `1` (added).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitWeights {
    pub lower: f64,
    pub upper: f64,
}

impl BitWeights {
    #[inline]
    pub fn jump(&self, bit: Bit) -> f64 {
        match bit {
            Bit::One => self.upper,
            Bit::Zero => -self.lower,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    thresholds: SprtThresholds,
    weights: Vec<BitWeights>,
}

impl FusionConfig {
    pub fn new(thresholds: SprtThresholds, weights: Vec<BitWeights>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("weights", "need at least one sensor"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.lower > 0.0 && w.upper > 0.0 && w.lower.is_finite() && w.upper.is_finite())) {
            return Err(Error::param("weights", format!("weights must be positive and finite, got {w:?}")));
        }
        SprtThresholds::new(thresholds.lower, thresholds.upper)?;
        let cfg = FusionConfig { thresholds, weights };
        if cfg.is_degenerate() {
            log::debug!(
                "largest batch jump {} >= min(A~, B~) = {}: one batch can cross the whole continuation region",
                cfg.max_batch_jump(),
                thresholds.lower.min(thresholds.upper)
            );
        }
        Ok(cfg)
    }

    /// Continuous-path weights `(Δ̲ᵢ, Δ̄ᵢ)`.
    pub fn from_deltas(thresholds: SprtThresholds, local: &[LocalThresholds]) -> Result<Self> {
        Self::new(thresholds, local.iter().map(|l| BitWeights { lower: l.lower(), upper: l.upper() }).collect())
    }

    /// Discrete-time weights `(Λ̲ᵢ, Λ̄ᵢ)` from calibration tables.
    pub fn from_tables(thresholds: SprtThresholds, tables: &[QuantizationTable]) -> Result<Self> {
        Self::new(thresholds, tables.iter().map(|t| BitWeights { lower: t.lambda_lo, upper: t.lambda_hi }).collect())
    }

    pub fn with_thresholds(&self, thresholds: SprtThresholds) -> Result<Self> {
        Self::new(thresholds, self.weights.clone())
    }

    pub fn thresholds(&self) -> SprtThresholds {
        self.thresholds
    }

    pub fn weights(&self) -> &[BitWeights] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// `Σᵢ (w_loᵢ + w_hiᵢ)`: `C` with Δ weights, `C′` with Λ weights.
    pub fn max_batch_jump(&self) -> f64 {
        self.weights.iter().map(|w| w.lower + w.upper).sum()
    }

    pub fn is_degenerate(&self) -> bool {
        self.max_batch_jump() >= self.thresholds.lower.min(self.thresholds.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Decided0,
    Decided1,
}

impl Status {
    pub fn decision(self) -> Option<Hypothesis> {
        match self {
            Status::Running => None,
            Status::Decided0 => Some(Hypothesis::H0),
            Status::Decided1 => Some(Hypothesis::H1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionState {
    u_tilde: f64,
    counts: Vec<u64>,
    status: Status,
    decision_step: Option<u64>,
}

impl FusionState {
    pub fn new(k: usize) -> Self {
        FusionState { u_tilde: 0.0, counts: vec![0; k], status: Status::Running, decision_step: None }
    }

    pub fn u_tilde(&self) -> f64 {
        self.u_tilde
    }

    /// `mₜⁱ` for every sensor.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn decision_step(&self) -> Option<u64> {
        self.decision_step
    }

    pub fn apply(&mut self, msg: &Message, cfg: &FusionConfig) -> Result<Status> {
        if self.status != Status::Running {
            return Err(Error::AlreadyDecided { sensor: msg.sensor });
        }
        let w = cfg
            .weights
            .get(msg.sensor)
            .ok_or(Error::UnknownSensor { sensor: msg.sensor, k: cfg.k() })?;
        self.u_tilde += w.jump(msg.bit);
        self.counts[msg.sensor] += 1;
        self.status = match cfg.thresholds.classify(self.u_tilde) {
            Some(Hypothesis::H1) => Status::Decided1,
            Some(Hypothesis::H0) => Status::Decided0,
            None => Status::Running,
        };
        if self.status != Status::Running {
            self.decision_step = Some(msg.emit_step);
        }
        Ok(self.status)
    }

    /// Applies simultaneous messages in ascending sensor order, stopping at
    /// the first threshold crossing.
    pub fn apply_batch(&mut self, msgs: &[Message], cfg: &FusionConfig) -> Result<Status> {
        let Some(first) = msgs.first() else {
            return Ok(self.status);
        };
        if let Some(other) = msgs.iter().find(|m| m.emit_step != first.emit_step) {
            return Err(Error::MixedBatch { first: first.emit_step, other: other.emit_step });
        }
        if self.status != Status::Running {
            return Err(Error::AlreadyDecided { sensor: first.sensor });
        }
        let sorted = msgs.windows(2).all(|w| w[0].sensor <= w[1].sensor);
        let mut owned;
        let ordered: &[Message] = if sorted {
            msgs
        } else {
            owned = msgs.to_vec();
            owned.sort_by_key(|m| m.sensor);
            &owned
        };
        for m in ordered {
            if self.apply(m, cfg)? != Status::Running {
                break;
            }
        }
        Ok(self.status)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: f64, b: f64, w: f64, k: usize) -> FusionConfig {
        FusionConfig::new(SprtThresholds::new(a, b).unwrap(), vec![BitWeights { lower: w, upper: w }; k]).unwrap()
    }

    fn msg(sensor: usize, bit: Bit, step: u64) -> Message {
        Message { sensor, bit, period: 1, emit_step: step }
    }

    #[test]
    fn three_ones_decide() {
        let c = cfg(3.0, 3.0, 1.0, 1);
        let mut s = FusionState::new(1);
        assert_eq!(s.apply(&msg(0, Bit::One, 1), &c).unwrap(), Status::Running);
        assert_eq!(s.apply(&msg(0, Bit::One, 2), &c).unwrap(), Status::Running);
        assert_eq!(s.apply(&msg(0, Bit::One, 3), &c).unwrap(), Status::Decided1);
        assert_eq!(s.decision_step(), Some(3));
        assert!(matches!(s.apply(&msg(0, Bit::One, 4), &c), Err(Error::AlreadyDecided { .. })));
    }

    #[test]
    fn alternating_bits_never_decide() {
        let c = cfg(3.0, 3.0, 1.0, 1);
        let mut s = FusionState::new(1);
        for n in 0..10_000u64 {
            let bit = if n % 2 == 0 { Bit::One } else { Bit::Zero };
            assert_eq!(s.apply(&msg(0, bit, n + 1), &c).unwrap(), Status::Running);
            assert!(s.u_tilde() == 0.0 || s.u_tilde() == 1.0);
        }
        assert_eq!(s.counts(), &[10_000]);
    }

    #[test]
    fn batch_reaches_threshold_exactly() {
        // Lower weight 1 puts ũ at -1; two simultaneous ones then add 2 + 2.
        let c = FusionConfig::new(
            SprtThresholds::new(3.0, 3.0).unwrap(),
            vec![BitWeights { lower: 1.0, upper: 2.0 }, BitWeights { lower: 1.0, upper: 2.0 }],
        )
        .unwrap();
        let mut s = FusionState::new(2);
        s.apply(&msg(0, Bit::Zero, 1), &c).unwrap();
        assert_eq!(s.u_tilde(), -1.0);
        let st = s.apply_batch(&[msg(0, Bit::One, 2), msg(1, Bit::One, 2)], &c).unwrap();
        assert_eq!(st, Status::Decided1);
        assert_eq!(s.u_tilde(), 3.0);
    }

    #[test]
    fn opposite_bits_cancel() {
        let c = cfg(3.0, 3.0, 2.0, 2);
        let mut s = FusionState::new(2);
        let st = s.apply_batch(&[msg(0, Bit::One, 1), msg(1, Bit::Zero, 1)], &c).unwrap();
        assert_eq!(st, Status::Running);
        assert_eq!(s.u_tilde(), 0.0);
        assert_eq!(s.counts(), &[1, 1]);
    }

    #[test]
    fn batch_stops_at_first_crossing_in_sensor_order() {
        let c = cfg(1.0, 1.0, 1.0, 3);
        let mut s = FusionState::new(3);
        // Unsorted input is applied as sensors 0, 1, 2.
        let st = s.apply_batch(&[msg(2, Bit::One, 1), msg(0, Bit::Zero, 1), msg(1, Bit::One, 1)], &c).unwrap();
        assert_eq!(st, Status::Decided0);
        assert_eq!(s.counts(), &[1, 0, 0]);
    }

    #[test]
    fn mixed_batch_rejected() {
        let c = cfg(3.0, 3.0, 1.0, 2);
        let mut s = FusionState::new(2);
        assert!(matches!(
            s.apply_batch(&[msg(0, Bit::One, 1), msg(1, Bit::One, 2)], &c),
            Err(Error::MixedBatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_config() {
        let t = SprtThresholds::new(1.0, 1.0).unwrap();
        assert!(FusionConfig::new(t, vec![]).is_err());
        assert!(FusionConfig::new(t, vec![BitWeights { lower: 0.0, upper: 1.0 }]).is_err());
        assert!(SprtThresholds::new(0.0, 1.0).is_err());
        let c = cfg(3.0, 3.0, 2.0, 2);
        assert_eq!(c.max_batch_jump(), 8.0);
        assert!(c.is_degenerate());
    }
}
