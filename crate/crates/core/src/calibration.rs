//! Quantization constants and threshold calibration.
//!
//! A [`QuantizationTable`] holds the Monte Carlo estimates of what one local
//! SPRT cycle looks like from the fusion center: the bit probabilities under
//! each hypothesis, the bit log-likelihood values `Λ̲, Λ̄`, the per-message
//! K-L numbers and the average overshoot. Fusion thresholds are calibrated
//! by searching recorded trial paths (see [`crate::kernel::PathBank`]).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{hypothesis_root, record_dsprt_bank, record_sprt_bank, Decision, Outcome, PathBank, SystemConfig};
use crate::models::{ErrorLevels, Hypothesis, HypothesisModel, SprtThresholds};
use crate::rng::derive_seed;
use crate::sensor::{run_local_cycle, Bit, LocalThresholds};
use crate::stats::{binomial_se, wilson_upper, Summary, Z_95_ONE_SIDED};

/// Smallest sample size accepted by [`estimate_quantization`].
pub const MIN_QUANTIZATION_SAMPLES: u64 = 10_000;

/// Threshold resolution of the calibration bisection, in log-likelihood units.
pub const BISECTION_TOL: f64 = 0.01;

/// Monte Carlo description of one sensor's local SPRT cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationTable {
    pub delta_lo: f64,
    pub delta_hi: f64,
    /// `Λ̲ = −log(P₁(z=0)/P₀(z=0))`
    pub lambda_lo: f64,
    /// `Λ̄ = log(P₁(z=1)/P₀(z=1))`
    pub lambda_hi: f64,
    pub p0_bit1: f64,
    pub p1_bit1: f64,
    /// `I₀ = −E₀[λ]`
    pub i0: f64,
    /// `I₁ = E₁[λ]`
    pub i1: f64,
    /// `maxⱼ Eⱼ|η|`
    pub theta_hat: f64,
    /// `Eⱼ|η|`, indexed by hypothesis.
    pub mean_abs_overshoot: [f64; 2],
    /// `Eⱼ[δ]` in time units, indexed by hypothesis.
    pub mean_period: [f64; 2],
    pub se_lambda_lo: f64,
    pub se_lambda_hi: f64,
    pub se_p0_bit1: f64,
    pub se_p1_bit1: f64,
    pub se_i0: f64,
    pub se_i1: f64,
    pub se_theta_hat: f64,
    pub se_abs_overshoot: [f64; 2],
    pub se_mean_period: [f64; 2],
    pub n_mc: u64,
    pub seed: u64,
}

impl QuantizationTable {
    /// K-L numbers `(I₀, I₁)` of the messages when the fusion center uses
    /// `weights` instead of `(Λ̲, Λ̄)`, e.g. `Δ` in continuous mode.
    pub fn information_with(&self, lower: f64, upper: f64) -> (f64, f64) {
        let (p0, p1) = (self.p0_bit1, self.p1_bit1);
        (lower * (1.0 - p0) - upper * p0, upper * p1 - lower * (1.0 - p1))
    }

    /// Same table with `Λ` values replaced, for negative controls.
    pub fn with_lambdas(&self, lambda_lo: f64, lambda_hi: f64) -> Self {
        let mut t = self.clone();
        t.lambda_lo = lambda_lo;
        t.lambda_hi = lambda_hi;
        let (i0, i1) = t.information_with(lambda_lo, lambda_hi);
        t.i0 = i0;
        t.i1 = i1;
        t
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CycleSums {
    n: u64,
    ones: u64,
    abs_eta: f64,
    abs_eta2: f64,
    period: f64,
    period2: f64,
}

impl CycleSums {
    fn merge(mut self, o: CycleSums) -> Self {
        self.n += o.n;
        self.ones += o.ones;
        self.abs_eta += o.abs_eta;
        self.abs_eta2 += o.abs_eta2;
        self.period += o.period;
        self.period2 += o.period2;
        self
    }

    fn mean_se(sum: f64, sum2: f64, n: u64) -> (f64, f64) {
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

const CYCLE_CHUNK: u64 = 4096;

fn simulate_cycles(model: &HypothesisModel, th: &LocalThresholds, truth: Hypothesis, n: u64, seed: u64) -> Result<CycleSums> {
    let sampler = model.increments(truth);
    let drift = model.llr_mean(truth).abs();
    // Generous cap: 10⁴ times the Wald-approximate mean cycle length.
    let max_steps = ((1e4 * (th.span() / drift.max(1e-12))).ceil() as u64).clamp(100_000, u64::MAX / 2);
    let chunks = n.div_ceil(CYCLE_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[truth.index() as u64, c]));
            let mut s = CycleSums::default();
            for _ in c * CYCLE_CHUNK..((c + 1) * CYCLE_CHUNK).min(n) {
                let o = run_local_cycle(&sampler, &mut rng, th, max_steps)?;
                let p = o.period as f64 * model.h();
                s.n += 1;
                s.ones += u64::from(o.bit == Bit::One);
                s.abs_eta += o.overshoot.abs();
                s.abs_eta2 += o.overshoot * o.overshoot;
                s.period += p;
                s.period2 += p * p;
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().fold(CycleSums::default(), CycleSums::merge))
}

/// Runs `n_mc` single local-SPRT cycles under each hypothesis.
pub fn estimate_quantization(model: &HypothesisModel, th: &LocalThresholds, n_mc: u64, seed: u64) -> Result<QuantizationTable> {
    if n_mc < MIN_QUANTIZATION_SAMPLES {
        return Err(Error::TooFewTrials { what: "quantization estimate", needed: MIN_QUANTIZATION_SAMPLES, got: n_mc });
    }
    let s0 = simulate_cycles(model, th, Hypothesis::H0, n_mc, seed)?;
    let s1 = simulate_cycles(model, th, Hypothesis::H1, n_mc, seed)?;
    let nf = n_mc as f64;
    let p0 = s0.ones as f64 / nf;
    let p1 = s1.ones as f64 / nf;
    for (what, p) in [("P0(z=1)", p0), ("P1(z=1)", p1)] {
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::DegenerateProbability { what, value: p, n_mc });
        }
    }
    let (q0, q1) = (1.0 - p0, 1.0 - p1);
    let lambda_hi = (p1 / p0).ln();
    let lambda_lo = -(q1 / q0).ln();
    let i0 = lambda_lo * q0 - lambda_hi * p0;
    let i1 = lambda_hi * p1 - lambda_lo * q1;

    // Delta method with independent binomial estimates of p0 and p1.
    let v0 = p0 * q0 / nf;
    let v1 = p1 * q1 / nf;
    let se_lambda_hi = (v1 / (p1 * p1) + v0 / (p0 * p0)).sqrt();
    let se_lambda_lo = (v1 / (q1 * q1) + v0 / (q0 * q0)).sqrt();
    let span = lambda_lo + lambda_hi;
    let se_i0 = (span * span * v0 + (q0 / q1 - p0 / p1).powi(2) * v1).sqrt();
    let se_i1 = (span * span * v1 + (q1 / q0 - p1 / p0).powi(2) * v0).sqrt();

    let (eta0, se_eta0) = CycleSums::mean_se(s0.abs_eta, s0.abs_eta2, n_mc);
    let (eta1, se_eta1) = CycleSums::mean_se(s1.abs_eta, s1.abs_eta2, n_mc);
    let (per0, se_per0) = CycleSums::mean_se(s0.period, s0.period2, n_mc);
    let (per1, se_per1) = CycleSums::mean_se(s1.period, s1.period2, n_mc);
    let (theta_hat, se_theta_hat) = if eta0 >= eta1 { (eta0, se_eta0) } else { (eta1, se_eta1) };

    Ok(QuantizationTable {
        delta_lo: th.lower(),
        delta_hi: th.upper(),
        lambda_lo,
        lambda_hi,
        p0_bit1: p0,
        p1_bit1: p1,
        i0,
        i1,
        theta_hat,
        mean_abs_overshoot: [eta0, eta1],
        mean_period: [per0, per1],
        se_lambda_lo,
        se_lambda_hi,
        se_p0_bit1: binomial_se(p0, n_mc),
        se_p1_bit1: binomial_se(p1, n_mc),
        se_i0,
        se_i1,
        se_theta_hat,
        se_abs_overshoot: [se_eta0, se_eta1],
        se_mean_period: [se_per0, se_per1],
        n_mc,
        seed,
    })
}

/// Closed-form lower bounds on `(I₀, I₁)` given the local thresholds.
pub fn kl_lower_bounds(th: &LocalThresholds) -> (f64, f64) {
    let (lo, hi) = (th.lower(), th.upper());
    let den = hi.exp() - (-lo).exp();
    let i0 = (lo * hi.exp_m1() + hi * (-lo).exp_m1()) / den;
    let i1 = (lo * (-lo).exp_m1() + hi * hi.exp_m1()) / den;
    (i0, i1)
}

/// Upper bound on `Λ − Δ` for the lower (`Λ̲`) and upper (`Λ̄`) values.
pub fn lambda_excess_bounds(th: &LocalThresholds, theta: f64) -> (f64, f64) {
    (theta / -(-th.upper()).exp_m1(), theta / -(-th.lower()).exp_m1())
}

/// Lorden's bound on `supΔ Eⱼ|η|` for one side: `[((r+2)/(r+1)) Eⱼ|ℓ|^{r+1} / |Eⱼ ℓ|]^{1/r}`.
pub fn lorden_overshoot_bound_one_sided(model: &HypothesisModel, truth: Hypothesis, r: u32) -> Result<f64> {
    if r < 1 {
        return Err(Error::param("r", "Lorden's bound needs r >= 1"));
    }
    let mean = model.llr_mean(truth).abs();
    if mean == 0.0 {
        return Err(Error::param("mu", "zero drift: the overshoot bound is infinite"));
    }
    let rf = f64::from(r);
    let moment = model.llr_abs_moment(truth, r + 1);
    Ok(((rf + 2.0) / (rf + 1.0) * moment / mean).powf(1.0 / rf))
}

/// Sum of the `H₀` and `H₁` one-sided bounds; bounds `θ` for every `Δ`.
pub fn lorden_overshoot_bound(model: &HypothesisModel, r: u32) -> Result<f64> {
    Ok(lorden_overshoot_bound_one_sided(model, Hypothesis::H0, r)? + lorden_overshoot_bound_one_sided(model, Hypothesis::H1, r)?)
}

/// Symmetric `Δ` whose mean intersampling period (averaged over both
/// hypotheses) matches `target`, by bisection on Monte Carlo estimates.
pub fn threshold_for_mean_period(model: &HypothesisModel, target: f64, n_mc: u64, seed: u64) -> Result<f64> {
    if !(target > model.h()) {
        return Err(Error::param("period", format!("target period {target} must exceed the step {}", model.h())));
    }
    let period = |delta: f64| -> Result<f64> {
        let t = estimate_quantization(model, &LocalThresholds::symmetric(delta)?, n_mc, seed)?;
        Ok(0.5 * (t.mean_period[0] + t.mean_period[1]))
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while period(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::param("period", format!("no threshold below 1e3 reaches period {target}")));
        }
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if period(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Fusion thresholds
// ---------------------------------------------------------------------------

/// How error probabilities are estimated from recorded paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorEstimator {
    /// Wrong-decision frequency under the true hypothesis, Wilson upper bound.
    Counting,
    /// Change of measure through the exact statistic: `P₀(d=1) = E₁[e^{−u_T}; d=1]`
    /// and `P₁(d=0) = E₀[e^{u_T}; d=0]`, normal upper bound.
    LikelihoodRatio,
}

/// One error-probability estimate with its one-sided 95% upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub value: f64,
    pub se: f64,
    pub upper: f64,
}

/// `P₀(decide 1)`: `outcomes` must come from `H₀` for counting, `H₁` otherwise.
pub fn estimate_alpha(outcomes: &[Outcome], estimator: ErrorEstimator) -> ErrorEstimate {
    estimate_error(outcomes, estimator, Decision::Accept1)
}

/// `P₁(decide 0)`: `outcomes` must come from `H₁` for counting, `H₀` otherwise.
pub fn estimate_beta(outcomes: &[Outcome], estimator: ErrorEstimator) -> ErrorEstimate {
    estimate_error(outcomes, estimator, Decision::Accept0)
}

fn estimate_error(outcomes: &[Outcome], estimator: ErrorEstimator, wrong: Decision) -> ErrorEstimate {
    let n = outcomes.len() as u64;
    match estimator {
        ErrorEstimator::Counting => {
            let k = outcomes.iter().filter(|o| o.decision == wrong).count() as u64;
            let p = k as f64 / n as f64;
            ErrorEstimate { value: p, se: binomial_se(p, n), upper: wilson_upper(k, n, Z_95_ONE_SIDED) }
        }
        ErrorEstimator::LikelihoodRatio => {
            let sign = if wrong == Decision::Accept1 { -1.0 } else { 1.0 };
            let s = Summary::of(outcomes.iter().map(|o| if o.decision == wrong { (sign * o.u).exp() } else { 0.0 }));
            ErrorEstimate { value: s.mean, se: s.se(), upper: s.mean + Z_95_ONE_SIDED * s.se() }
        }
    }
}

/// Calibrated `(Ã, B̃)` and the errors they achieve on the calibration sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionCalibration {
    pub thresholds: SprtThresholds,
    /// Search region upper corner.
    pub envelope: SprtThresholds,
    pub alpha: ErrorEstimate,
    pub beta: ErrorEstimate,
    pub estimator: ErrorEstimator,
    pub n_mc: u64,
    pub seed: u64,
}

/// Recorded paths under both hypotheses, sharing one envelope.
#[derive(Debug, Clone)]
pub struct BankPair {
    pub h0: PathBank,
    pub h1: PathBank,
}

impl BankPair {
    pub fn bank(&self, truth: Hypothesis) -> &PathBank {
        match truth {
            Hypothesis::H0 => &self.h0,
            Hypothesis::H1 => &self.h1,
        }
    }

    pub fn envelope(&self) -> SprtThresholds {
        self.h0.envelope()
    }

    pub fn len(&self) -> usize {
        self.h0.len().min(self.h1.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn errors(&self, t: SprtThresholds, estimator: ErrorEstimator) -> (ErrorEstimate, ErrorEstimate) {
        let (for_alpha, for_beta) = match estimator {
            ErrorEstimator::Counting => (&self.h0, &self.h1),
            ErrorEstimator::LikelihoodRatio => (&self.h1, &self.h0),
        };
        (estimate_alpha(&for_alpha.replay_all(t), estimator), estimate_beta(&for_beta.replay_all(t), estimator))
    }
}

/// Records D-SPRT paths of `cfg` under both hypotheses up to `envelope`.
pub fn record_dsprt_pair(cfg: &SystemConfig, envelope: SprtThresholds, n: u64, seed: u64) -> Result<BankPair> {
    let c = cfg.with_fusion_thresholds(envelope)?;
    Ok(BankPair {
        h0: record_dsprt_bank(&c.with_truth(Hypothesis::H0), n, hypothesis_root(seed, Hypothesis::H0))?,
        h1: record_dsprt_bank(&c.with_truth(Hypothesis::H1), n, hypothesis_root(seed, Hypothesis::H1))?,
    })
}

/// Records centralized-SPRT paths of `cfg` under both hypotheses up to `envelope`.
pub fn record_sprt_pair(cfg: &SystemConfig, envelope: SprtThresholds, n: u64, seed: u64) -> Result<BankPair> {
    Ok(BankPair {
        h0: record_sprt_bank(&cfg.with_truth(Hypothesis::H0), envelope, n, hypothesis_root(seed, Hypothesis::H0))?,
        h1: record_sprt_bank(&cfg.with_truth(Hypothesis::H1), envelope, n, hypothesis_root(seed, Hypothesis::H1))?,
    })
}

/// Smallest `x` in `(0, hi]` with `ok(x)`, assuming `ok(hi)`.
fn bisect<F: FnMut(f64) -> bool>(hi: f64, mut ok: F) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest thresholds inside the bank envelope whose one-sided upper error
/// bounds meet `levels`: a bisection along the diagonal `s · envelope`, then
/// alternating bisection on `B̃` and `Ã`.
///
/// The diagonal pass matters when the statistic lives on a coarse lattice:
/// lowering `B̃` alone while `Ã` is still at the envelope raises `α`, so the
/// alternating search started from the envelope can stall a lattice step
/// above a jointly feasible pair.
pub fn calibrate_on_banks(banks: &BankPair, levels: ErrorLevels, estimator: ErrorEstimator, seed: u64) -> Result<FusionCalibration> {
    let envelope = banks.envelope();
    let n = banks.len() as u64;
    let needed = (20.0 / levels.alpha().min(levels.beta())).ceil() as u64;
    if n < needed {
        return Err(Error::TooFewTrials { what: "threshold calibration", needed, got: n });
    }
    let (a_env, b_env) = banks.errors(envelope, estimator);
    if a_env.upper > levels.alpha() {
        return Err(Error::Bracket { which: "upper", target: levels.alpha(), upper: a_env.upper, envelope: envelope.upper });
    }
    if b_env.upper > levels.beta() {
        return Err(Error::Bracket { which: "lower", target: levels.beta(), upper: b_env.upper, envelope: envelope.lower });
    }
    let alpha_ok = |t: SprtThresholds| {
        let bank = if estimator == ErrorEstimator::Counting { &banks.h0 } else { &banks.h1 };
        estimate_alpha(&bank.replay_all(t), estimator).upper <= levels.alpha()
    };
    let beta_ok = |t: SprtThresholds| {
        let bank = if estimator == ErrorEstimator::Counting { &banks.h1 } else { &banks.h0 };
        estimate_beta(&bank.replay_all(t), estimator).upper <= levels.beta()
    };
    let scaled = |s: f64| SprtThresholds { lower: s * envelope.lower, upper: s * envelope.upper };
    let scale = bisect(1.0, |s| {
        let t = scaled(s);
        alpha_ok(t) && beta_ok(t)
    });
    let mut t = scaled(scale);
    for _ in 0..6 {
        let prev = t;
        let upper = bisect(t.upper, |b| alpha_ok(SprtThresholds { lower: t.lower, upper: b }));
        t.upper = upper;
        let lower = bisect(t.lower, |a| beta_ok(SprtThresholds { lower: a, upper: t.upper }));
        t.lower = lower;
        if (prev.lower - t.lower).abs() <= BISECTION_TOL && (prev.upper - t.upper).abs() <= BISECTION_TOL {
            break;
        }
    }
    // Lowering Ã after fixing B̃ can only help α for pathwise-monotone
    // estimators; re-certify both sides in case the estimator is not.
    if !alpha_ok(t) {
        t.upper = bisect(envelope.upper, |b| alpha_ok(SprtThresholds { lower: t.lower, upper: b }));
    }
    let (alpha, beta) = banks.errors(t, estimator);
    Ok(FusionCalibration { thresholds: t, envelope, alpha, beta, estimator, n_mc: n, seed })
}

/// Analytic search envelope `(|log β| + C′, |log α| + C′)` of a D-SPRT config,
/// with `C′` the largest batch jump (`C` in continuous mode).
pub fn dsprt_envelope(cfg: &SystemConfig, levels: ErrorLevels) -> SprtThresholds {
    SprtThresholds::envelope(levels, cfg.fusion().max_batch_jump())
}

/// Calibrates `(Ã, B̃)` of the D-SPRT in `cfg` on `n_mc` recorded trials per hypothesis.
pub fn calibrate_fusion_thresholds(
    cfg: &SystemConfig,
    levels: ErrorLevels,
    n_mc: u64,
    seed: u64,
    estimator: ErrorEstimator,
) -> Result<(FusionCalibration, BankPair)> {
    let banks = record_dsprt_pair(cfg, dsprt_envelope(cfg, levels), n_mc, seed)?;
    let cal = calibrate_on_banks(&banks, levels, estimator, seed)?;
    Ok((cal, banks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kl_bound_values() {
        let (i0, i1) = kl_lower_bounds(&LocalThresholds::symmetric(2.0).unwrap());
        let e2 = 2f64.exp();
        assert!(close(i0, 2.0 * (e2 + 1.0 / e2 - 2.0) / (e2 - 1.0 / e2), 1e-12));
        assert!(close(i0, 1.523_188_311_911_530_6, 1e-9));
        assert_eq!(i0, i1);
        let (i0, _) = kl_lower_bounds(&LocalThresholds::symmetric(6.0).unwrap());
        assert!(close(i0, 6.0, 0.03) && i0 < 6.0);
        let (i0, i1) = kl_lower_bounds(&LocalThresholds::new(1.0, 3.0).unwrap());
        assert!(i0 > 0.0 && i1 > 0.0 && i1 > i0);
    }

    #[test]
    fn lorden_r1_closed_form() {
        for h in [0.1, 0.5, 1.0, 2.0] {
            let m = HypothesisModel::gaussian(1.0, h).unwrap();
            let one = lorden_overshoot_bound_one_sided(&m, Hypothesis::H0, 1).unwrap();
            assert!(close(one, 3.0 * (1.0 + 0.25 * h), 1e-10), "h={h}: {one}");
            assert!(close(lorden_overshoot_bound(&m, 1).unwrap(), 2.0 * one, 1e-12));
        }
        let m = HypothesisModel::gaussian(1.0, 1.0).unwrap();
        assert!(lorden_overshoot_bound(&m, 0).is_err());
    }

    #[test]
    fn lorden_r2_shrinks_with_h() {
        let b = |h: f64| lorden_overshoot_bound_one_sided(&HypothesisModel::gaussian(1.0, h).unwrap(), Hypothesis::H0, 2).unwrap();
        assert!(b(0.01) < b(0.1));
        // Θ(h^{1/4}): the ratio over two decades of h approaches 10^{1/2}.
        let ratio = b(1e-4) / b(1e-6);
        assert!(close(ratio, 10f64.sqrt(), 0.05), "{ratio}");
    }

    #[test]
    fn small_n_rejected() {
        let m = HypothesisModel::gaussian(1.0, 1.0).unwrap();
        let th = LocalThresholds::symmetric(1.0).unwrap();
        assert!(matches!(estimate_quantization(&m, &th, 100, 0), Err(Error::TooFewTrials { .. })));
    }

    #[test]
    fn huge_thresholds_give_degenerate_probabilities() {
        let m = HypothesisModel::gaussian(3.0, 1.0).unwrap();
        let th = LocalThresholds::symmetric(40.0).unwrap();
        assert!(matches!(estimate_quantization(&m, &th, 10_000, 1), Err(Error::DegenerateProbability { .. })));
    }

    #[test]
    fn quantization_is_deterministic_and_sane() {
        let m = HypothesisModel::gaussian(1.0, 1.0).unwrap();
        let th = LocalThresholds::symmetric(1.0).unwrap();
        let a = estimate_quantization(&m, &th, 20_000, 5).unwrap();
        assert_eq!(a, estimate_quantization(&m, &th, 20_000, 5).unwrap());
        assert!(a.lambda_lo >= 1.0 - 3.0 * a.se_lambda_lo);
        assert!(a.lambda_hi >= 1.0 - 3.0 * a.se_lambda_hi);
        assert!(a.i0 > 0.0 && a.i1 > 0.0);
        assert!(a.theta_hat > 0.0);
        // Symmetric model and thresholds.
        assert!((a.lambda_lo - a.lambda_hi).abs() <= 3.0 * a.se_lambda_lo.hypot(a.se_lambda_hi));
        let (i0, i1) = a.information_with(a.lambda_lo, a.lambda_hi);
        assert!(close(i0, a.i0, 1e-12) && close(i1, a.i1, 1e-12));
    }

    #[test]
    fn likelihood_ratio_estimator_weights() {
        let o = |decision, u| Outcome { decision, stop_step: 1, stop_time: 1.0, u, u_tilde: u, msgs: 1 };
        let outs = [o(Decision::Accept1, 2.0), o(Decision::Accept1, 3.0), o(Decision::Accept0, -2.0), o(Decision::Aborted, 0.0)];
        let a = estimate_alpha(&outs, ErrorEstimator::LikelihoodRatio);
        assert!(close(a.value, ((-2f64).exp() + (-3f64).exp()) / 4.0, 1e-15));
        let b = estimate_beta(&outs, ErrorEstimator::LikelihoodRatio);
        assert!(close(b.value, (-2f64).exp() / 4.0, 1e-15));
        let c = estimate_alpha(&outs, ErrorEstimator::Counting);
        assert_eq!(c.value, 0.5);
    }

    #[test]
    fn bisection_finds_smallest_passing_point() {
        let x = bisect(10.0, |x| x >= std::f64::consts::PI);
        assert!(x >= std::f64::consts::PI && x - std::f64::consts::PI <= BISECTION_TOL);
    }
}
