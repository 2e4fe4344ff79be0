//! Operating-characteristic sweeps over error levels, steps and local thresholds.
//!
//! Every calibrated scheme records its trial paths once per grid point,
//! calibrates thresholds on them and reports performance from the same
//! paths replayed at the calibrated thresholds.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate_on_banks, dsprt_envelope, estimate_alpha, estimate_beta, record_dsprt_pair, record_sprt_pair, BankPair,
    ErrorEstimate, ErrorEstimator,
};
use crate::error::{Error, Result};
use crate::experiments::config::{CalibrationSpec, SystemSpec};
use crate::experiments::output::{fmt_float, CsvRecord};
use crate::fusion::FusionConfig;
use crate::kernel::{
    hypothesis_root, run_centralized_sprt_trial, run_trials, sampled_config, Decision, Outcome, SystemConfig,
};
use crate::models::{wald_thresholds, ErrorLevels, Hypothesis, SprtThresholds};
use crate::rng::derive_seed;
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// The decentralized test.
    Dsprt,
    /// Centralized SPRT on the continuous-path model with Wald's thresholds.
    SprtCont,
    /// Centralized SPRT on the discrete model's own samples, calibrated.
    SprtDiscrete,
    /// Centralized SPRT after deterministic sampling at `sampled_period`, calibrated.
    SprtSampled,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Dsprt => "dsprt",
            Scheme::SprtCont => "sprt_cont",
            Scheme::SprtDiscrete => "sprt_discrete",
            Scheme::SprtSampled => "sprt_sampled",
        }
    }

    fn id(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    /// `β = beta_ratio · α`.
    pub beta_ratio: f64,
    /// Trials per hypothesis at every grid point.
    pub n_trials: u64,
    pub schemes: Vec<Scheme>,
    /// Step grid (`dt` or `h`); empty means the system's step.
    pub steps: Vec<f64>,
    /// Symmetric `Δ` grid; empty means the system's thresholds.
    pub deltas: Vec<f64>,
    /// Period of `sprt_sampled`; defaults to the D-SPRT's mean intersampling period.
    pub sampled_period: Option<f64>,
    pub estimator: ErrorEstimator,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            alphas: vec![1e-1, 1e-2, 1e-3, 1e-4],
            beta_ratio: 1.0,
            n_trials: 200_000,
            schemes: vec![Scheme::Dsprt, Scheme::SprtCont, Scheme::SprtSampled],
            steps: Vec::new(),
            deltas: Vec::new(),
            sampled_period: None,
            estimator: ErrorEstimator::LikelihoodRatio,
        }
    }
}

impl SweepSpec {
    pub fn levels(&self) -> Result<Vec<ErrorLevels>> {
        self.alphas
            .iter()
            .map(|&a| ErrorLevels::new(a, self.beta_ratio * a).map_err(|e| Error::Config(format!("sweep: {e}"))))
            .collect()
    }

    pub fn validate(&self, system: &SystemSpec) -> Result<()> {
        let levels = self.levels()?;
        if levels.is_empty() || self.schemes.is_empty() {
            return Err(Error::Config("sweep needs at least one alpha and one scheme".into()));
        }
        let min = levels.iter().map(|l| l.alpha().min(l.beta())).fold(1.0, f64::min);
        let needed = (20.0 / min).ceil() as u64;
        if self.n_trials < needed {
            return Err(Error::Config(format!("sweep.n_trials = {} is below 20/min(alpha, beta) = {needed}", self.n_trials)));
        }
        let continuous = system.mode()?.is_continuous();
        for s in &self.schemes {
            match s {
                Scheme::SprtCont if !continuous => {
                    return Err(Error::Config("sprt_cont needs a continuous-mode system".into()));
                }
                Scheme::SprtDiscrete if continuous => {
                    return Err(Error::Config("sprt_discrete needs a discrete-mode system".into()));
                }
                _ => {}
            }
        }
        if let Some(p) = self.sampled_period {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("sweep.sampled_period must be positive, got {p}")));
            }
        }
        for &x in self.steps.iter().chain(&self.deltas) {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("sweep grids need positive values, got {x}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub continuous: bool,
    pub step: f64,
    /// Symmetric local threshold for `dsprt` rows.
    pub delta: Option<f64>,
    /// Sampling period for `sprt_sampled` rows.
    pub period: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub thresholds: SprtThresholds,
    pub delay: Summary,
    pub delay0: Summary,
    pub delay1: Summary,
    /// `−u_T` under `H₀`.
    pub kl0: Summary,
    /// `u_T` under `H₁`.
    pub kl1: Summary,
    pub achieved_alpha: ErrorEstimate,
    pub achieved_beta: ErrorEstimate,
    pub msgs_per_unit_time: f64,
    pub n_trials: u64,
    pub aborted: u64,
    pub seed: u64,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

impl CsvRecord for SweepRow {
    fn header() -> Vec<&'static str> {
        vec![
            "scheme", "mode", "step", "delta", "period", "alpha", "beta", "a_threshold", "b_threshold",
            "mean_delay", "se_delay", "mean_delay0", "se_delay0", "mean_delay1", "se_delay1",
            "mean_kl0", "se_kl0", "mean_kl1", "se_kl1",
            "achieved_alpha", "se_alpha", "alpha_upper", "achieved_beta", "se_beta", "beta_upper",
            "mean_msgs_per_unit_time", "n_trials", "aborted", "seed",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut v = vec![
            self.scheme.label().to_string(),
            if self.continuous { "continuous" } else { "discrete" }.to_string(),
            fmt_float(self.step),
            opt(self.delta),
            opt(self.period),
        ];
        v.extend(
            [
                self.alpha,
                self.beta,
                self.thresholds.lower,
                self.thresholds.upper,
                self.delay.mean,
                self.delay.se(),
                self.delay0.mean,
                self.delay0.se(),
                self.delay1.mean,
                self.delay1.se(),
                self.kl0.mean,
                self.kl0.se(),
                self.kl1.mean,
                self.kl1.se(),
                self.achieved_alpha.value,
                self.achieved_alpha.se,
                self.achieved_alpha.upper,
                self.achieved_beta.value,
                self.achieved_beta.se,
                self.achieved_beta.upper,
                self.msgs_per_unit_time,
            ]
            .map(fmt_float),
        );
        v.push(self.n_trials.to_string());
        v.push(self.aborted.to_string());
        v.push(self.seed.to_string());
        v
    }
}

/// Performance summary of one scheme at one grid point, from outcomes under each hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub thresholds: SprtThresholds,
    pub delay: Summary,
    pub delay0: Summary,
    pub delay1: Summary,
    pub kl0: Summary,
    pub kl1: Summary,
    pub achieved_alpha: ErrorEstimate,
    pub achieved_beta: ErrorEstimate,
    pub msgs_per_unit_time: f64,
    pub aborted: u64,
}

pub fn summarize(thresholds: SprtThresholds, o0: &[Outcome], o1: &[Outcome], estimator: ErrorEstimator) -> PointResult {
    let done = |o: &&Outcome| o.decision != Decision::Aborted;
    let delay0 = Summary::of(o0.iter().filter(done).map(|o| o.stop_time));
    let delay1 = Summary::of(o1.iter().filter(done).map(|o| o.stop_time));
    let delay = Summary::of(o0.iter().chain(o1).filter(done).map(|o| o.stop_time));
    let kl0 = Summary::of(o0.iter().filter(done).map(|o| -o.u));
    let kl1 = Summary::of(o1.iter().filter(done).map(|o| o.u));
    let (alpha_src, beta_src) = match estimator {
        ErrorEstimator::Counting => (o0, o1),
        ErrorEstimator::LikelihoodRatio => (o1, o0),
    };
    let msgs: u64 = o0.iter().chain(o1).map(|o| o.msgs).sum();
    let time: f64 = o0.iter().chain(o1).map(|o| o.stop_time).sum();
    PointResult {
        thresholds,
        delay,
        delay0,
        delay1,
        kl0,
        kl1,
        achieved_alpha: estimate_alpha(alpha_src, estimator),
        achieved_beta: estimate_beta(beta_src, estimator),
        msgs_per_unit_time: msgs as f64 / time,
        aborted: o0.iter().chain(o1).filter(|o| o.decision == Decision::Aborted).count() as u64,
    }
}

fn replay_pair(banks: &BankPair, t: SprtThresholds) -> (Vec<Outcome>, Vec<Outcome>) {
    (banks.h0.replay_all(t), banks.h1.replay_all(t))
}

/// D-SPRT at one grid point: record, calibrate, replay.
pub fn dsprt_point(cfg: &SystemConfig, levels: ErrorLevels, n: u64, estimator: ErrorEstimator, seed: u64) -> Result<PointResult> {
    let banks = record_dsprt_pair(cfg, dsprt_envelope(cfg, levels), n, seed)?;
    let cal = calibrate_on_banks(&banks, levels, estimator, seed)?;
    let (o0, o1) = replay_pair(&banks, cal.thresholds);
    Ok(summarize(cal.thresholds, &o0, &o1, estimator))
}

/// Search envelope for a calibrated discrete-time SPRT: Wald's bound plus one nat.
pub fn sprt_envelope(levels: ErrorLevels) -> SprtThresholds {
    SprtThresholds::envelope(levels, 1.0)
}

/// Calibrated centralized SPRT on a discrete-time config.
pub fn discrete_sprt_point(cfg: &SystemConfig, levels: ErrorLevels, n: u64, estimator: ErrorEstimator, seed: u64) -> Result<PointResult> {
    let banks = record_sprt_pair(cfg, sprt_envelope(levels), n, seed)?;
    let cal = calibrate_on_banks(&banks, levels, estimator, seed)?;
    let (o0, o1) = replay_pair(&banks, cal.thresholds);
    Ok(summarize(cal.thresholds, &o0, &o1, estimator))
}

/// Continuous-path SPRT with Wald's thresholds, simulated directly.
pub fn continuous_sprt_point(cfg: &SystemConfig, levels: ErrorLevels, n: u64, estimator: ErrorEstimator, seed: u64) -> Result<PointResult> {
    let t = wald_thresholds(levels);
    let run = |truth: Hypothesis| -> Result<Vec<Outcome>> {
        let c = cfg.with_truth(truth);
        run_trials(n, hypothesis_root(seed, truth), |s| run_centralized_sprt_trial(&c, t, s).map(|r| r.outcome()))
    };
    Ok(summarize(t, &run(Hypothesis::H0)?, &run(Hypothesis::H1)?, estimator))
}

/// Centralized-test config of a system: fusion weights are irrelevant, so `Δ` is used.
fn centralized_config(system: &SystemSpec) -> Result<SystemConfig> {
    let local = system.local_thresholds()?;
    let fusion = FusionConfig::from_deltas(SprtThresholds::new(1.0, 1.0)?, &local)?;
    SystemConfig::new(system.models()?, local, fusion, system.truth()?, system.mode()?, system.max_steps)
}

fn key(x: f64) -> u64 {
    x.to_bits()
}

pub fn run_sweep(system: &SystemSpec, spec: &SweepSpec, calibration: &CalibrationSpec, seed: u64) -> Result<Vec<SweepRow>> {
    spec.validate(system)?;
    let levels = spec.levels()?;
    let steps = if spec.steps.is_empty() { vec![system.step] } else { spec.steps.clone() };
    let deltas: Vec<Option<f64>> = if spec.deltas.is_empty() { vec![None] } else { spec.deltas.iter().map(|&d| Some(d)).collect() };
    let n = spec.n_trials;
    let est = spec.estimator;
    let mut rows = Vec::new();
    for &step in &steps {
        let base = system.variant(step, None);
        let continuous = base.mode()?.is_continuous();
        let row = |scheme: Scheme, delta: Option<f64>, period: Option<f64>, l: ErrorLevels, seed: u64, p: PointResult| SweepRow {
            scheme,
            continuous,
            step,
            delta,
            period,
            alpha: l.alpha(),
            beta: l.beta(),
            thresholds: p.thresholds,
            delay: p.delay,
            delay0: p.delay0,
            delay1: p.delay1,
            kl0: p.kl0,
            kl1: p.kl1,
            achieved_alpha: p.achieved_alpha,
            achieved_beta: p.achieved_beta,
            msgs_per_unit_time: p.msgs_per_unit_time,
            n_trials: n,
            aborted: p.aborted,
            seed,
        };
        let mut first_period = None;
        for &delta in &deltas {
            let sys = system.variant(step, delta);
            let dlabel = delta.or(sys.delta);
            let needs_tables = (spec.schemes.contains(&Scheme::Dsprt) && !continuous)
                || (spec.schemes.contains(&Scheme::SprtSampled) && spec.sampled_period.is_none());
            let tables = if needs_tables {
                let ctx = format!("quantization step={step} delta={dlabel:?}");
                Some(sys.quantization_tables(calibration.n_mc, derive_seed(seed, &[0, key(step)])).map_err(|e| e.in_context(ctx))?)
            } else {
                None
            };
            if first_period.is_none() {
                first_period = tables.as_ref().map(|t| 0.5 * (t[0].mean_period[0] + t[0].mean_period[1]));
            }
            if !spec.schemes.contains(&Scheme::Dsprt) {
                continue;
            }
            for &l in &levels {
                let s = derive_seed(seed, &[Scheme::Dsprt.id(), key(step), key(dlabel.unwrap_or(0.0)), key(l.alpha())]);
                let cfg = sys.build(tables.as_deref(), dsprt_envelope_placeholder(l))?;
                let ctx = format!("dsprt step={step} delta={dlabel:?} alpha={}", l.alpha());
                log::info!("{ctx}");
                let p = dsprt_point(&cfg, l, n, est, s).map_err(|e| e.in_context(ctx))?;
                rows.push(row(Scheme::Dsprt, dlabel, None, l, s, p));
            }
        }
        let central = centralized_config(&base)?;
        for scheme in [Scheme::SprtCont, Scheme::SprtDiscrete, Scheme::SprtSampled] {
            if !spec.schemes.contains(&scheme) {
                continue;
            }
            let period = match scheme {
                Scheme::SprtSampled => Some(
                    spec.sampled_period
                        .or(first_period)
                        .ok_or_else(|| Error::Config("sprt_sampled needs sweep.sampled_period".into()))?,
                ),
                _ => None,
            };
            let cfg = match period {
                Some(p) => sampled_config(&central, p)?,
                None => central.clone(),
            };
            for &l in &levels {
                let s = derive_seed(seed, &[scheme.id(), key(step), key(period.unwrap_or(0.0)), key(l.alpha())]);
                let ctx = format!("{} step={step} alpha={}", scheme.label(), l.alpha());
                log::info!("{ctx}");
                let p = match scheme {
                    Scheme::SprtCont => continuous_sprt_point(&cfg, l, n, est, s),
                    _ => discrete_sprt_point(&cfg, l, n, est, s),
                }
                .map_err(|e| e.in_context(ctx))?;
                rows.push(row(scheme, None, period, l, s, p));
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.step, a.scheme, a.delta.unwrap_or(0.0), -a.alpha)
            .partial_cmp(&(b.step, b.scheme, b.delta.unwrap_or(0.0), -b.alpha))
            .expect("finite grid values")
    });
    Ok(rows)
}

/// Thresholds used only to build a config before calibration replaces them.
fn dsprt_envelope_placeholder(levels: ErrorLevels) -> SprtThresholds {
    SprtThresholds::envelope(levels, 0.0)
}

/// Suggested symmetric local threshold `√(θ̂ |log α|)`: matches the order of
/// the two error terms, not an optimum.
pub fn threshold_size_advisor(theta_hat: f64, alpha: f64) -> Result<f64> {
    if !(theta_hat > 0.0 && theta_hat.is_finite()) {
        return Err(Error::param("theta_hat", format!("must be positive, got {theta_hat}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")));
    }
    Ok((theta_hat * -alpha.ln()).sqrt())
}
