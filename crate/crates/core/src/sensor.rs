//! Level-triggered sampling at one sensor.
//!
//! The sensor accumulates its LLR increments since the last transmission and
//! emits one bit as soon as the accumulator leaves `(-Δ̲, Δ̄)`: `1` on the
//! upper side, `0` on the lower side. The accumulator then restarts from
//! exactly zero; the excess over the crossed threshold (the overshoot) is
//! recorded but never transmitted.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::IncrementSampler;

/// Local thresholds `(Δ̲, Δ̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalThresholds {
    lower: f64,
    upper: f64,
}

impl LocalThresholds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper > 0.0 && lower.is_finite() && upper.is_finite()) {
            return Err(Error::param("delta", format!("local thresholds must be positive, got ({lower}, {upper})")));
        }
        Ok(LocalThresholds { lower, upper })
    }

    pub fn symmetric(delta: f64) -> Result<Self> {
        Self::new(delta, delta)
    }

    /// `Δ̲`
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// `Δ̄`
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `Δ̲ + Δ̄`, this sensor's share of `C`.
    pub fn span(&self) -> f64 {
        self.lower + self.upper
    }

    #[inline]
    fn exit_bit(&self, total: f64) -> Option<Bit> {
        if total >= self.upper {
            Some(Bit::One)
        } else if total <= -self.lower {
            Some(Bit::Zero)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn value(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }
}

/// One transmission `(i, zₙⁱ, δₙⁱ, τₙⁱ)`; times are in steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sensor: usize,
    pub bit: Bit,
    /// Intersampling period `δ`, in steps (≥ 1).
    pub period: u64,
    /// Step index `τ` at which the message is emitted (1-based).
    pub emit_step: u64,
}

/// Overshoot of an exiting accumulator value: negative below, positive above.
pub fn overshoot_of(total: f64, thresholds: &LocalThresholds) -> Result<f64> {
    match thresholds.exit_bit(total) {
        Some(Bit::One) => Ok(total - thresholds.upper),
        Some(Bit::Zero) => Ok(total + thresholds.lower),
        None => Err(Error::NotExited { total, lower: thresholds.lower, upper: thresholds.upper }),
    }
}

/// Local repeated-SPRT state of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorState {
    id: usize,
    accum: f64,
    clock: u64,
    steps_since_emit: u64,
    emit_count: u64,
    overshoot_abs_sum: f64,
    last_overshoot: f64,
}

impl SensorState {
    pub fn new(id: usize) -> Self {
        SensorState {
            id,
            accum: 0.0,
            clock: 0,
            steps_since_emit: 0,
            emit_count: 0,
            overshoot_abs_sum: 0.0,
            last_overshoot: 0.0,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// `uᵢ_t − uᵢ_{τ_{n−1}}`
    pub fn accum(&self) -> f64 {
        self.accum
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn steps_since_emit(&self) -> u64 {
        self.steps_since_emit
    }

    pub fn emit_count(&self) -> u64 {
        self.emit_count
    }

    pub fn overshoot_abs_sum(&self) -> f64 {
        self.overshoot_abs_sum
    }

    /// Signed overshoot of the most recent emission (0 before the first).
    pub fn last_overshoot(&self) -> f64 {
        self.last_overshoot
    }

    /// Feeds one LLR increment; returns the message if the accumulator exits.
    #[inline]
    pub fn step(&mut self, llr_inc: f64, thresholds: &LocalThresholds) -> Result<Option<Message>> {
        if !llr_inc.is_finite() {
            return Err(Error::NonFiniteIncrement(llr_inc));
        }
        self.accum += llr_inc;
        self.clock += 1;
        self.steps_since_emit += 1;
        let Some(bit) = thresholds.exit_bit(self.accum) else {
            return Ok(None);
        };
        let eta = match bit {
            Bit::One => self.accum - thresholds.upper,
            Bit::Zero => self.accum + thresholds.lower,
        };
        let msg = Message { sensor: self.id, bit, period: self.steps_since_emit, emit_step: self.clock };
        self.last_overshoot = eta;
        self.overshoot_abs_sum += eta.abs();
        self.emit_count += 1;
        self.accum = 0.0;
        self.steps_since_emit = 0;
        Ok(Some(msg))
    }
}

/// Outcome of a single local-SPRT cycle started from zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOutcome {
    pub bit: Bit,
    pub period: u64,
    pub overshoot: f64,
}

/// Runs one cycle of the local SPRT until it exits.
pub fn run_local_cycle<R: Rng + ?Sized>(
    sampler: &IncrementSampler,
    rng: &mut R,
    thresholds: &LocalThresholds,
    max_steps: u64,
) -> Result<CycleOutcome> {
    let mut state = SensorState::new(0);
    for _ in 0..max_steps {
        if let Some(msg) = state.step(sampler.sample(rng), thresholds)? {
            return Ok(CycleOutcome { bit: msg.bit, period: msg.period, overshoot: state.last_overshoot });
        }
    }
    Err(Error::CycleHorizon(max_steps))
}
