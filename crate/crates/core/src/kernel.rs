//! Whole-trial drivers.
//!
//! Time is a step counter; continuous time is `steps · step`, where `step`
//! is the Euler `dt` (continuous mode) or the sampling period `h`
//! (discrete mode). Messages reach the fusion center in the step they are
//! emitted. The exact centralized statistic `u_t` is tracked in every trial
//! even though the fusion center never sees it.
//!
//! Besides single trials this module can *record* a trial's statistic path
//! once and *replay* it against any thresholds inside the recording
//! envelope. Only strict running maxima and minima are kept, which is
//! enough to recover the first exit of every interval `(-a, b)` contained
//! in the envelope, so threshold searches never re-simulate.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionState, Status};
use crate::models::{Hypothesis, HypothesisModel, IncrementSampler, ModelKind, SprtThresholds};
use crate::rng::{derive_seed, sensor_stream, trial_seed};
use crate::sensor::{Bit, LocalThresholds, Message, SensorState};
use crate::stats::Summary;

/// Time regime of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Continuous paths on an Euler grid of step `dt`; fusion weights are `Δ`.
    Continuous { dt: f64 },
    /// I.i.d. samples every `h`; fusion weights are `Λ`.
    Discrete { h: f64 },
}

impl Mode {
    pub fn step(&self) -> f64 {
        match *self {
            Mode::Continuous { dt } => dt,
            Mode::Discrete { h } => h,
        }
    }

    pub fn model_kind(&self) -> ModelKind {
        match self {
            Mode::Continuous { .. } => ModelKind::BrownianDrift,
            Mode::Discrete { .. } => ModelKind::GaussianSampled,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Mode::Continuous { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    models: Vec<HypothesisModel>,
    local: Vec<LocalThresholds>,
    fusion: FusionConfig,
    truth: Hypothesis,
    mode: Mode,
    max_steps: u64,
}

impl SystemConfig {
    /// `max_steps = None` picks 200 times the predicted mean delay.
    pub fn new(
        models: Vec<HypothesisModel>,
        local: Vec<LocalThresholds>,
        fusion: FusionConfig,
        truth: Hypothesis,
        mode: Mode,
        max_steps: Option<u64>,
    ) -> Result<Self> {
        let k = models.len();
        if k == 0 {
            return Err(Error::param("sensors", "need K >= 1"));
        }
        if local.len() != k || fusion.k() != k {
            return Err(Error::param(
                "sensors",
                format!("{k} models but {} local thresholds and {} fusion weights", local.len(), fusion.k()),
            ));
        }
        for m in &models {
            if m.kind() != mode.model_kind() {
                return Err(Error::param("mode", format!("{:?} model in {:?} mode", m.kind(), mode)));
            }
            if (m.h() - mode.step()).abs() > 1e-12 * mode.step() {
                return Err(Error::param("mode", format!("model step {} differs from mode step {}", m.h(), mode.step())));
            }
        }
        let mut cfg = SystemConfig { models, local, fusion, truth, mode, max_steps: 1 };
        cfg.max_steps = match max_steps {
            Some(0) => return Err(Error::param("max_steps", "must be positive")),
            Some(n) => n,
            None => cfg.default_max_steps(),
        };
        Ok(cfg)
    }

    /// `K` identical sensors with drift `mu` and symmetric local threshold `delta`.
    pub fn homogeneous(
        k: usize,
        mu: f64,
        mode: Mode,
        delta: f64,
        fusion_weights: Option<Vec<crate::fusion::BitWeights>>,
        thresholds: SprtThresholds,
        truth: Hypothesis,
    ) -> Result<Self> {
        let model = HypothesisModel::new(mode.model_kind(), mu, mode.step())?;
        let local = vec![LocalThresholds::symmetric(delta)?; k];
        let fusion = match fusion_weights {
            Some(w) => FusionConfig::new(thresholds, w)?,
            None => FusionConfig::from_deltas(thresholds, &local)?,
        };
        Self::new(vec![model; k], local, fusion, truth, mode, None)
    }

    fn default_max_steps(&self) -> u64 {
        let rate: f64 = self.models.iter().map(|m| 0.5 * m.mu() * m.mu()).sum();
        let t = self.fusion.thresholds();
        let predicted = (t.lower.max(t.upper) + self.fusion.max_batch_jump() + self.delta_sum()) / rate.max(1e-12);
        ((200.0 * predicted / self.mode.step()).ceil() as u64).max(10_000)
    }

    pub fn k(&self) -> usize {
        self.models.len()
    }

    pub fn models(&self) -> &[HypothesisModel] {
        &self.models
    }

    pub fn local(&self) -> &[LocalThresholds] {
        &self.local
    }

    pub fn fusion(&self) -> &FusionConfig {
        &self.fusion
    }

    pub fn truth(&self) -> Hypothesis {
        self.truth
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn step(&self) -> f64 {
        self.mode.step()
    }

    pub fn max_steps(&self) -> u64 {
        self.max_steps
    }

    /// `C = Σᵢ (Δ̲ᵢ + Δ̄ᵢ)`.
    pub fn delta_sum(&self) -> f64 {
        self.local.iter().map(LocalThresholds::span).sum()
    }

    pub fn with_truth(&self, truth: Hypothesis) -> Self {
        SystemConfig { truth, ..self.clone() }
    }

    pub fn with_fusion(&self, fusion: FusionConfig) -> Result<Self> {
        if fusion.k() != self.k() {
            return Err(Error::param("weights", "fusion config has the wrong number of sensors"));
        }
        Ok(SystemConfig { fusion, ..self.clone() })
    }

    pub fn with_fusion_thresholds(&self, thresholds: SprtThresholds) -> Result<Self> {
        self.with_fusion(self.fusion.with_thresholds(thresholds)?)
    }

    pub fn with_max_steps(&self, max_steps: u64) -> Self {
        SystemConfig { max_steps: max_steps.max(1), ..self.clone() }
    }

    fn samplers(&self) -> Vec<IncrementSampler> {
        self.models.iter().map(|m| m.increments(self.truth)).collect()
    }
}

/// The same sensors observed by canonical deterministic sampling at `period`.
pub fn sampled_config(cfg: &SystemConfig, period: f64) -> Result<SystemConfig> {
    let models = cfg
        .models
        .iter()
        .map(|m| m.with_step(ModelKind::GaussianSampled, period))
        .collect::<Result<Vec<_>>>()?;
    let horizon_time = cfg.max_steps as f64 * cfg.step();
    let max_steps = ((horizon_time / period).ceil() as u64).max(10_000);
    SystemConfig::new(
        models,
        cfg.local.clone(),
        cfg.fusion.clone(),
        cfg.truth,
        Mode::Discrete { h: period },
        Some(max_steps),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept0,
    Accept1,
    Aborted,
}

impl Decision {
    pub fn from_hypothesis(h: Option<Hypothesis>) -> Self {
        match h {
            Some(Hypothesis::H0) => Decision::Accept0,
            Some(Hypothesis::H1) => Decision::Accept1,
            None => Decision::Aborted,
        }
    }

    pub fn hypothesis(self) -> Option<Hypothesis> {
        match self {
            Decision::Accept0 => Some(Hypothesis::H0),
            Decision::Accept1 => Some(Hypothesis::H1),
            Decision::Aborted => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Decision::Accept0 => "0",
            Decision::Accept1 => "1",
            Decision::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub decision: Decision,
    pub stop_step: u64,
    /// `stop_step · step`
    pub stop_time: f64,
    /// `u_T`
    pub u_at_stop: f64,
    /// `ũ_T` (equals `u_T` for centralized tests)
    pub u_tilde_at_stop: f64,
    /// `m_Tⁱ`; for centralized tests, samples used per sensor.
    pub msg_counts: Vec<u64>,
    pub overshoot_abs_sums: Vec<f64>,
    pub seed: u64,
}

impl TrialResult {
    pub fn msg_total(&self) -> u64 {
        self.msg_counts.iter().sum()
    }

    pub fn outcome(&self) -> Outcome {
        Outcome {
            decision: self.decision,
            stop_step: self.stop_step,
            stop_time: self.stop_time,
            u: self.u_at_stop,
            u_tilde: self.u_tilde_at_stop,
            msgs: self.msg_total(),
        }
    }
}

/// The part of a trial needed for performance and error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub decision: Decision,
    pub stop_step: u64,
    pub stop_time: f64,
    pub u: f64,
    pub u_tilde: f64,
    pub msgs: u64,
}

/// State of one D-SPRT step, handed to observers after the fusion update.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub step: u64,
    pub u: f64,
    pub u_tilde: f64,
    /// Largest `|ℓ|` among this step's sensor increments.
    pub max_abs_increment: f64,
    pub messages: &'a [Message],
}

/// Sensors plus their random streams; advances all of them one step at a time.
struct SensorBank<'a> {
    cfg: &'a SystemConfig,
    samplers: Vec<IncrementSampler>,
    rngs: Vec<ChaCha8Rng>,
    sensors: Vec<SensorState>,
    u: f64,
    step: u64,
    batch: Vec<Message>,
    max_abs_increment: f64,
}

impl<'a> SensorBank<'a> {
    fn new(cfg: &'a SystemConfig, seed: u64) -> Self {
        let k = cfg.k();
        SensorBank {
            cfg,
            samplers: cfg.samplers(),
            rngs: (0..k).map(|i| sensor_stream(seed, i)).collect(),
            sensors: (0..k).map(SensorState::new).collect(),
            u: 0.0,
            step: 0,
            batch: Vec::with_capacity(k),
            max_abs_increment: 0.0,
        }
    }

    #[inline]
    fn advance(&mut self) -> Result<()> {
        self.step += 1;
        self.batch.clear();
        self.max_abs_increment = 0.0;
        for i in 0..self.sensors.len() {
            let inc = self.samplers[i].sample(&mut self.rngs[i]);
            self.max_abs_increment = self.max_abs_increment.max(inc.abs());
            self.u += inc;
            if let Some(m) = self.sensors[i].step(inc, &self.cfg.local[i])? {
                self.batch.push(m);
            }
        }
        Ok(())
    }

    /// Runs sensor `i` alone until its in-progress cycle emits.
    fn finish_cycle(&mut self, i: usize, limit: u64) -> Result<Message> {
        for _ in 0..limit {
            let inc = self.samplers[i].sample(&mut self.rngs[i]);
            if let Some(m) = self.sensors[i].step(inc, &self.cfg.local[i])? {
                return Ok(m);
            }
        }
        Err(Error::CycleHorizon(limit))
    }
}

pub fn run_dsprt_trial(cfg: &SystemConfig, seed: u64) -> Result<TrialResult> {
    run_dsprt_trial_observed(cfg, seed, |_| {})
}

/// [`run_dsprt_trial`] with a callback after every step.
pub fn run_dsprt_trial_observed<F>(cfg: &SystemConfig, seed: u64, mut observer: F) -> Result<TrialResult>
where
    F: FnMut(&StepView<'_>),
{
    let mut bank = SensorBank::new(cfg, seed);
    let mut fusion = FusionState::new(cfg.k());
    let mut status = Status::Running;
    while bank.step < cfg.max_steps {
        bank.advance()?;
        if !bank.batch.is_empty() {
            status = fusion.apply_batch(&bank.batch, &cfg.fusion)?;
        }
        observer(&StepView {
            step: bank.step,
            u: bank.u,
            u_tilde: fusion.u_tilde(),
            max_abs_increment: bank.max_abs_increment,
            messages: &bank.batch,
        });
        if status != Status::Running {
            break;
        }
    }
    Ok(TrialResult {
        decision: Decision::from_hypothesis(status.decision()),
        stop_step: bank.step,
        stop_time: bank.step as f64 * cfg.step(),
        u_at_stop: bank.u,
        u_tilde_at_stop: fusion.u_tilde(),
        msg_counts: fusion.counts().to_vec(),
        overshoot_abs_sums: bank.sensors.iter().map(SensorState::overshoot_abs_sum).collect(),
        seed,
    })
}

/// Centralized SPRT on the exact statistic `u_t` with thresholds `(A, B)`.
pub fn run_centralized_sprt_trial(cfg: &SystemConfig, thresholds: SprtThresholds, seed: u64) -> Result<TrialResult> {
    let samplers = cfg.samplers();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.k()).map(|i| sensor_stream(seed, i)).collect();
    let mut u = 0.0;
    let mut decision = None;
    let mut step = 0;
    while step < cfg.max_steps {
        step += 1;
        for (s, r) in samplers.iter().zip(rngs.iter_mut()) {
            u += s.sample(r);
        }
        if !u.is_finite() {
            return Err(Error::NonFiniteIncrement(u));
        }
        decision = thresholds.classify(u);
        if decision.is_some() {
            break;
        }
    }
    Ok(TrialResult {
        decision: Decision::from_hypothesis(decision),
        stop_step: step,
        stop_time: step as f64 * cfg.step(),
        u_at_stop: u,
        u_tilde_at_stop: u,
        msg_counts: vec![step; cfg.k()],
        overshoot_abs_sums: vec![0.0; cfg.k()],
        seed,
    })
}

/// Centralized SPRT after canonical deterministic sampling with `period`.
pub fn run_deterministic_sampling_sprt_trial(
    cfg: &SystemConfig,
    thresholds: SprtThresholds,
    period: f64,
    seed: u64,
) -> Result<TrialResult> {
    run_centralized_sprt_trial(&sampled_config(cfg, period)?, thresholds, seed)
}

/// Runs `n` trials with seeds derived from `root`; output order is trial order.
pub fn run_trials<T, F>(n: u64, root: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(|i| f(trial_seed(root, i))).collect()
}

/// Root seed of the trial family run under `truth`.
pub fn hypothesis_root(root: u64, truth: Hypothesis) -> u64 {
    derive_seed(root, &[0x4859_5054, truth.index() as u64])
}

// ---------------------------------------------------------------------------
// Recorded paths
// ---------------------------------------------------------------------------

/// A strict running maximum or minimum of the tracked statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    pub step: u32,
    /// Messages (or samples) consumed when the event happened.
    pub msgs: u32,
    /// Test statistic: `ũ` for the D-SPRT, `u` for a centralized SPRT.
    pub stat: f64,
    /// Exact `u` at that step.
    pub u: f64,
}

/// Recorded ladder paths of many trials, stored in one arena.
#[derive(Debug, Clone)]
pub struct PathBank {
    truth: Hypothesis,
    step: f64,
    envelope: SprtThresholds,
    events: Vec<PathEvent>,
    offsets: Vec<usize>,
    /// Step at which recording stopped without leaving the envelope, if any.
    truncated: Vec<Option<u32>>,
}

impl PathBank {
    pub fn len(&self) -> usize {
        self.truncated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truncated.is_empty()
    }

    pub fn truth(&self) -> Hypothesis {
        self.truth
    }

    pub fn envelope(&self) -> SprtThresholds {
        self.envelope
    }

    pub fn path(&self, i: usize) -> &[PathEvent] {
        &self.events[self.offsets[i]..self.offsets[i + 1]]
    }

    /// First exit of `(-lower, upper)` along path `i`.
    pub fn replay(&self, i: usize, t: SprtThresholds) -> Outcome {
        for e in self.path(i) {
            if let Some(h) = t.classify(e.stat) {
                return Outcome {
                    decision: Decision::from_hypothesis(Some(h)),
                    stop_step: u64::from(e.step),
                    stop_time: f64::from(e.step) * self.step,
                    u: e.u,
                    u_tilde: e.stat,
                    msgs: u64::from(e.msgs),
                };
            }
        }
        let (step, u, stat, msgs) = match (self.truncated[i], self.path(i).last()) {
            (Some(s), Some(e)) => (s, e.u, e.stat, e.msgs),
            (Some(s), None) => (s, 0.0, 0.0, 0),
            // Thresholds outside the envelope: the path ends at its last event.
            (None, Some(e)) => (e.step, e.u, e.stat, e.msgs),
            (None, None) => (0, 0.0, 0.0, 0),
        };
        Outcome {
            decision: Decision::Aborted,
            stop_step: u64::from(step),
            stop_time: f64::from(step) * self.step,
            u,
            u_tilde: stat,
            msgs: u64::from(msgs),
        }
    }

    pub fn replay_all(&self, t: SprtThresholds) -> Vec<Outcome> {
        (0..self.len()).map(|i| self.replay(i, t)).collect()
    }

    fn from_chunks(truth: Hypothesis, step: f64, envelope: SprtThresholds, chunks: Vec<(Vec<PathEvent>, Vec<usize>, Vec<Option<u32>>)>) -> Self {
        let total: usize = chunks.iter().map(|c| c.0.len()).sum();
        let mut events = Vec::with_capacity(total);
        let mut offsets = vec![0];
        let mut truncated = Vec::new();
        for (ev, lens, tr) in chunks {
            let base = events.len();
            events.extend_from_slice(&ev);
            let mut acc = base;
            for l in lens {
                acc += l;
                offsets.push(acc);
            }
            truncated.extend(tr);
        }
        PathBank { truth, step, envelope, events, offsets, truncated }
    }
}

struct Ladder {
    hi: f64,
    lo: f64,
}

impl Ladder {
    fn new() -> Self {
        Ladder { hi: 0.0, lo: 0.0 }
    }

    #[inline]
    fn offer(&mut self, out: &mut Vec<PathEvent>, e: PathEvent) {
        if e.stat > self.hi {
            self.hi = e.stat;
            out.push(e);
        } else if e.stat < self.lo {
            self.lo = e.stat;
            out.push(e);
        }
    }
}

const RECORD_CHUNK: u64 = 512;

fn record_bank<F>(n: u64, root: u64, truth: Hypothesis, step: f64, envelope: SprtThresholds, record: F) -> Result<PathBank>
where
    F: Fn(u64, &mut Vec<PathEvent>) -> Result<Option<u32>> + Sync + Send,
{
    let n_chunks = n.div_ceil(RECORD_CHUNK);
    let chunks = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut events = Vec::new();
            let mut lens = Vec::new();
            let mut truncated = Vec::new();
            for i in c * RECORD_CHUNK..((c + 1) * RECORD_CHUNK).min(n) {
                let before = events.len();
                truncated.push(record(trial_seed(root, i), &mut events)?);
                lens.push(events.len() - before);
            }
            Ok((events, lens, truncated))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathBank::from_chunks(truth, step, envelope, chunks))
}

/// Records `n` D-SPRT paths of `ũ` until they leave the fusion thresholds of `cfg`.
///
/// Trial `i` uses the same seed as `run_dsprt_trial(cfg, trial_seed(root, i))`,
/// and replaying at `cfg`'s thresholds reproduces that trial exactly.
pub fn record_dsprt_bank(cfg: &SystemConfig, n: u64, root: u64) -> Result<PathBank> {
    let envelope = cfg.fusion.thresholds();
    let weights = cfg.fusion.weights();
    record_bank(n, root, cfg.truth, cfg.step(), envelope, |seed, out| {
        let mut bank = SensorBank::new(cfg, seed);
        let mut ladder = Ladder::new();
        let mut u_tilde = 0.0;
        let mut msgs = 0u32;
        while bank.step < cfg.max_steps {
            bank.advance()?;
            for m in &bank.batch {
                u_tilde += weights[m.sensor].jump(m.bit);
                msgs += 1;
                ladder.offer(out, PathEvent { step: bank.step as u32, msgs, stat: u_tilde, u: bank.u });
                if envelope.classify(u_tilde).is_some() {
                    return Ok(None);
                }
            }
        }
        Ok(Some(bank.step as u32))
    })
}

/// Records `n` centralized-SPRT paths of `u` until they leave `envelope`.
pub fn record_sprt_bank(cfg: &SystemConfig, envelope: SprtThresholds, n: u64, root: u64) -> Result<PathBank> {
    record_bank(n, root, cfg.truth, cfg.step(), envelope, |seed, out| {
        let samplers = cfg.samplers();
        let mut rngs: Vec<ChaCha8Rng> = (0..cfg.k()).map(|i| sensor_stream(seed, i)).collect();
        let mut ladder = Ladder::new();
        let mut u = 0.0;
        let k = cfg.k() as u32;
        for step in 1..=cfg.max_steps {
            for (s, r) in samplers.iter().zip(rngs.iter_mut()) {
                u += s.sample(r);
            }
            ladder.offer(out, PathEvent { step: step as u32, msgs: step as u32 * k, stat: u, u });
            if envelope.classify(u).is_some() {
                return Ok(None);
            }
        }
        Ok(Some(cfg.max_steps as u32))
    })
}

// ---------------------------------------------------------------------------
// Wald's identity for Lebesgue-sampled sequences
// ---------------------------------------------------------------------------

/// Per-cycle quantity `ζₙ` summed in the Wald-identity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// `ζ ≡ 1`
    One,
    /// `λₙ = −w_lo` or `+w_hi`, the fusion increment of the cycle's bit.
    Lambda,
    /// `|ηₙ|`
    AbsOvershoot,
    /// `δₙ` in time units.
    Period,
}

impl Payload {
    pub fn label(self) -> &'static str {
        match self {
            Payload::One => "one",
            Payload::Lambda => "lambda",
            Payload::AbsOvershoot => "abs_overshoot",
            Payload::Period => "period",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldSensorReport {
    pub sensor: usize,
    /// `Ê[Σ_{n ≤ m_T + 1} ζₙ]`
    pub lhs: f64,
    /// `Ê[ζ₁](Ê[m_T] + 1)`
    pub rhs: f64,
    /// `lhs − rhs` and its delta-method standard error.
    pub residual: f64,
    pub se: f64,
    pub mean_zeta: f64,
    pub mean_m: f64,
    /// `|Ê[Σ_{n ≤ m_T} ζₙ] − Ê[ζ₁]Ê[m_T]|`
    pub corollary_slack: f64,
    /// `2M` for payloads bounded by `M`.
    pub corollary_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldReport {
    pub payload: Payload,
    pub n_trials: u64,
    pub aborted: u64,
    pub sensors: Vec<WaldSensorReport>,
}

struct WaldTrial {
    /// Per sensor: (Σ_{n ≤ m+1} ζ, Σ_{n ≤ m} ζ, ζ₁, m).
    per_sensor: Vec<(f64, f64, f64, f64)>,
}

fn payload_value(p: Payload, cfg: &SystemConfig, msg: &Message, overshoot: f64) -> f64 {
    match p {
        Payload::One => 1.0,
        Payload::Lambda => cfg.fusion.weights()[msg.sensor].jump(msg.bit),
        Payload::AbsOvershoot => overshoot.abs(),
        Payload::Period => msg.period as f64 * cfg.step(),
    }
}

fn wald_trial(cfg: &SystemConfig, seed: u64, payload: Payload) -> Result<Option<WaldTrial>> {
    let k = cfg.k();
    let mut bank = SensorBank::new(cfg, seed);
    let mut fusion = FusionState::new(k);
    let mut sums = vec![0.0; k];
    let mut first = vec![None; k];
    let mut status = Status::Running;
    while bank.step < cfg.max_steps && status == Status::Running {
        bank.advance()?;
        for m in &bank.batch {
            let z = payload_value(payload, cfg, m, bank.sensors[m.sensor].last_overshoot());
            sums[m.sensor] += z;
            first[m.sensor].get_or_insert(z);
        }
        if !bank.batch.is_empty() {
            status = fusion.apply_batch(&bank.batch, &cfg.fusion)?;
        }
    }
    if status == Status::Running {
        return Ok(None);
    }
    let limit = cfg.max_steps;
    let mut per_sensor = Vec::with_capacity(k);
    for i in 0..k {
        // m_Tⁱ counts every sampling time up to and including T.
        let m = bank.sensors[i].emit_count() as f64;
        let next = bank.finish_cycle(i, limit)?;
        let z_next = payload_value(payload, cfg, &next, bank.sensors[i].last_overshoot());
        let z1 = first[i].unwrap_or(z_next);
        per_sensor.push((sums[i] + z_next, sums[i], z1, m));
    }
    Ok(Some(WaldTrial { per_sensor }))
}

/// Monte Carlo check of `E[Σ_{n=1}^{m_T+1} ζₙ] = E[ζ₁](E[m_T] + 1)` with `T`
/// the D-SPRT stopping time.
pub fn wald_identity_check(cfg: &SystemConfig, seed: u64, n_trials: u64, payload: Payload) -> Result<WaldReport> {
    let trials = run_trials(n_trials, seed, |s| wald_trial(cfg, s, payload))?;
    let done: Vec<WaldTrial> = trials.into_iter().flatten().collect();
    let aborted = n_trials - done.len() as u64;
    let bound = |i: usize| match payload {
        Payload::One => Some(2.0),
        Payload::Lambda => {
            let w = cfg.fusion.weights()[i];
            Some(2.0 * (w.lower + w.upper))
        }
        Payload::AbsOvershoot | Payload::Period => None,
    };
    let sensors = (0..cfg.k())
        .map(|i| {
            let col = |f: fn(&(f64, f64, f64, f64)) -> f64| Summary::of(done.iter().map(|t| f(&t.per_sensor[i])));
            let lhs = col(|r| r.0);
            let partial = col(|r| r.1);
            let zeta = col(|r| r.2);
            let m = col(|r| r.3);
            let rhs = zeta.mean * (m.mean + 1.0);
            // Linearization of lhs − ζ̄(m̄ + 1) around the sample means.
            let g = Summary::of(done.iter().map(|t| {
                let (s, _, z1, mk) = t.per_sensor[i];
                s - zeta.mean * (mk + 1.0) - (m.mean + 1.0) * (z1 - zeta.mean)
            }));
            WaldSensorReport {
                sensor: i,
                lhs: lhs.mean,
                rhs,
                residual: lhs.mean - rhs,
                se: g.se(),
                mean_zeta: zeta.mean,
                mean_m: m.mean,
                corollary_slack: (partial.mean - zeta.mean * m.mean).abs(),
                corollary_bound: bound(i),
            }
        })
        .collect();
    Ok(WaldReport { payload, n_trials, aborted, sensors })
}

/// Convenience: bit of a message as a hypothesis-style sign.
pub fn bit_sign(bit: Bit) -> f64 {
    match bit {
        Bit::One => 1.0,
        Bit::Zero => -1.0,
    }
}
