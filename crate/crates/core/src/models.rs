//! Observation models and closed-form SPRT theory.
//!
//! Under `H₀` a sensor sees a standard Wiener process, under `H₁` the same
//! process with drift `μ`. [`ModelKind::GaussianSampled`] observes it at
//! period `h`, so samples are `N(0, h)` against `N(μh, h)` and each carries
//! log-likelihood ratio `ℓ = μξ − μ²h/2`. [`ModelKind::BrownianDrift`] is the
//! continuous-path model realized by an Euler grid of step `dt = h`; its
//! per-step LLR increment has the same form.
//!
//! All logarithms are natural.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];

    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Hypothesis::H0),
            1 => Ok(Hypothesis::H1),
            _ => Err(Error::param("truth", format!("hypothesis index must be 0 or 1, got {i}"))),
        }
    }

    /// `+1` under `H₁`, `-1` under `H₀`: the sign of the LLR drift.
    pub fn sign(self) -> f64 {
        match self {
            Hypothesis::H0 => -1.0,
            Hypothesis::H1 => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BrownianDrift,
    GaussianSampled,
}

/// Per-sensor pair of hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisModel {
    kind: ModelKind,
    mu: f64,
    h: f64,
}

impl HypothesisModel {
    pub fn new(kind: ModelKind, mu: f64, h: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::param("mu", format!("drift must be finite, got {mu}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param("h", format!("sampling period must be positive, got {h}")));
        }
        Ok(HypothesisModel { kind, mu, h })
    }

    pub fn brownian(mu: f64, dt: f64) -> Result<Self> {
        Self::new(ModelKind::BrownianDrift, mu, dt)
    }

    pub fn gaussian(mu: f64, h: f64) -> Result<Self> {
        Self::new(ModelKind::GaussianSampled, mu, h)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Sampling period (GaussianSampled) or Euler step (BrownianDrift).
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Same drift observed with a different period or step.
    pub fn with_step(&self, kind: ModelKind, h: f64) -> Result<Self> {
        Self::new(kind, self.mu, h)
    }

    /// LLR of one observation (or path increment) `ξ`.
    pub fn llr(&self, xi: f64) -> f64 {
        self.mu * xi - 0.5 * self.mu * self.mu * self.h
    }

    pub fn sample_observation<R: Rng + ?Sized>(&self, rng: &mut R, truth: Hypothesis) -> f64 {
        let mean = match truth {
            Hypothesis::H0 => 0.0,
            Hypothesis::H1 => self.mu * self.h,
        };
        let z: f64 = rng.sample(StandardNormal);
        mean + self.h.sqrt() * z
    }

    /// One increment of the local LLR process under `truth`.
    pub fn llr_increment<R: Rng + ?Sized>(&self, rng: &mut R, truth: Hypothesis) -> f64 {
        self.llr(self.sample_observation(rng, truth))
    }

    /// `Eⱼ[ℓ] = ±μ²h/2`.
    pub fn llr_mean(&self, truth: Hypothesis) -> f64 {
        truth.sign() * 0.5 * self.mu * self.mu * self.h
    }

    /// `Var[ℓ] = μ²h` under both hypotheses.
    pub fn llr_variance(&self) -> f64 {
        self.mu * self.mu * self.h
    }

    /// Sampler drawing `ℓ` directly as `mean + scale·Z`.
    ///
    /// Produces the same numbers as [`llr_increment`](Self::llr_increment)
    /// up to rounding, without recomputing the affine map every step.
    pub fn increments(&self, truth: Hypothesis) -> IncrementSampler {
        IncrementSampler { mean: self.llr_mean(truth), scale: self.mu * self.h.sqrt() }
    }

    /// `Eⱼ[|ℓ|^p]` in closed form.
    ///
    /// For `X ~ N(m, s²)`, `E|X|^p = s^p 2^{p/2} Γ((p+1)/2)/√π · M(−p/2, 1/2, −m²/2s²)`;
    /// the Kummer function is evaluated after the transformation
    /// `M(a, b, −q) = e^{−q} M(b − a, b, q)`, whose series has positive terms.
    pub fn llr_abs_moment(&self, truth: Hypothesis, p: u32) -> f64 {
        let m = self.llr_mean(truth);
        let s = self.llr_variance().sqrt();
        if p == 0 {
            return 1.0;
        }
        if s == 0.0 {
            return m.abs().powi(p as i32);
        }
        let pf = f64::from(p);
        let q = m * m / (2.0 * s * s);
        let prefactor =
            s.powi(p as i32) * 2f64.powf(pf / 2.0) * gamma_half(p + 1) / std::f64::consts::PI.sqrt();
        prefactor * (-q).exp() * kummer_m_positive(0.5 + pf / 2.0, 0.5, q)
    }
}

/// Draws LLR increments for one sensor under a fixed hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementSampler {
    pub mean: f64,
    pub scale: f64,
}

impl IncrementSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.scale * z
    }
}

/// `Γ(k/2)` for a positive integer `k`.
fn gamma_half(k: u32) -> f64 {
    let mut x = if k.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut arg = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    let target = f64::from(k) / 2.0;
    while arg < target {
        x *= arg;
        arg += 1.0;
    }
    x
}

/// Kummer `M(a, b, q)` for `a, b > 0`, `q ≥ 0`.
fn kummer_m_positive(a: f64, b: f64, q: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..100_000u32 {
        let nf = f64::from(n);
        term *= (a + nf) / (b + nf) * q / (nf + 1.0);
        sum += term;
        if term < sum * 1e-17 && nf > q {
            break;
        }
    }
    sum
}

/// Type-I / Type-II error targets `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorLevels {
    alpha: f64,
    beta: f64,
}

impl ErrorLevels {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("must lie in (0,1), got {v}")));
            }
        }
        if alpha + beta >= 1.0 {
            return Err(Error::param("alpha", format!("alpha + beta must be < 1, got {}", alpha + beta)));
        }
        Ok(ErrorLevels { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Stopping thresholds: stop once the statistic is `≤ -lower` or `≥ upper`.
///
/// Used both for the centralized `(A, B)` and the fusion center's `(Ã, B̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprtThresholds {
    pub lower: f64,
    pub upper: f64,
}

impl SprtThresholds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper > 0.0 && lower.is_finite() && upper.is_finite()) {
            return Err(Error::param("thresholds", format!("need 0 < A, B < inf, got ({lower}, {upper})")));
        }
        Ok(SprtThresholds { lower, upper })
    }

    /// Decision for a statistic value, `None` while inside `(-lower, upper)`.
    #[inline]
    pub fn classify(&self, stat: f64) -> Option<Hypothesis> {
        if stat >= self.upper {
            Some(Hypothesis::H1)
        } else if stat <= -self.lower {
            Some(Hypothesis::H0)
        } else {
            None
        }
    }

    /// Theorem-1 style envelope `(|log β| + c, |log α| + c)`.
    pub fn envelope(levels: ErrorLevels, c: f64) -> Self {
        SprtThresholds { lower: -levels.beta().ln() + c, upper: -levels.alpha().ln() + c }
    }
}

/// `𝓗(x, y) = x log(x/(1−y)) + (1−x) log((1−x)/y)`.
pub fn h_function(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(Error::Domain { x, y });
    }
    Ok(x * (x / (1.0 - y)).ln() + (1.0 - x) * ((1.0 - x) / y).ln())
}

/// Wald's thresholds `A = log((1−α)/β)`, `B = log((1−β)/α)`.
pub fn wald_thresholds(levels: ErrorLevels) -> SprtThresholds {
    let (a, b) = (levels.alpha(), levels.beta());
    SprtThresholds { lower: ((1.0 - a) / b).ln(), upper: ((1.0 - b) / a).ln() }
}

/// Expected delays and K-L divergences of the optimal continuous-path SPRT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtPerformance {
    pub e0_delay: f64,
    pub e1_delay: f64,
    pub kl0: f64,
    pub kl1: f64,
}

pub fn sprt_performance_brownian(mu: &[f64], levels: ErrorLevels) -> Result<SprtPerformance> {
    let norm2: f64 = mu.iter().map(|m| m * m).sum();
    if !(norm2 > 0.0 && norm2.is_finite()) {
        return Err(Error::param("mu", "drift vector must be non-zero and finite"));
    }
    let (kl0, kl1) = sprt_kl_lower_bounds(levels);
    Ok(SprtPerformance { e0_delay: 2.0 / norm2 * kl0, e1_delay: 2.0 / norm2 * kl1, kl0, kl1 })
}

/// `(𝓗(α, β), 𝓗(β, α))`: exact SPRT K-L divergences for continuous paths,
/// lower bounds in discrete time.
pub fn sprt_kl_lower_bounds(levels: ErrorLevels) -> (f64, f64) {
    let (a, b) = (levels.alpha(), levels.beta());
    // ErrorLevels already guarantees the domain.
    (h_function(a, b).unwrap_or(f64::NAN), h_function(b, a).unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn llr_of_observation() {
        let m = HypothesisModel::gaussian(1.0, 1.0).unwrap();
        assert!(close(m.llr(0.7), 0.2, 1e-12));
        assert_eq!(m.llr(0.5), 0.0);
        // ℓ = ξ − h/2 for μ = 1.
        let m = HypothesisModel::gaussian(1.0, 0.1).unwrap();
        assert!(close(m.llr(0.3), 0.3 - 0.05, 1e-12));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(HypothesisModel::gaussian(1.0, 0.0).is_err());
        assert!(HypothesisModel::gaussian(f64::NAN, 1.0).is_err());
        assert!(HypothesisModel::brownian(1.0, -1e-3).is_err());
    }

    #[test]
    fn llr_sample_mean_under_h0() {
        let m = HypothesisModel::gaussian(1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| m.llr_increment(&mut rng, Hypothesis::H0)).collect();
        let s = crate::stats::Summary::of(xs.iter().copied());
        assert!(close(s.mean, -0.05, 4.0 * s.se()), "mean {} se {}", s.mean, s.se());
        assert!(close(s.variance, 0.1, 0.002));
    }

    #[test]
    fn sampler_matches_observation_route() {
        let m = HypothesisModel::gaussian(-0.7, 0.3).unwrap();
        for truth in Hypothesis::BOTH {
            let mut r1 = ChaCha8Rng::seed_from_u64(3);
            let mut r2 = ChaCha8Rng::seed_from_u64(3);
            let s = m.increments(truth);
            for _ in 0..1000 {
                let a = m.llr_increment(&mut r1, truth);
                let b = s.sample(&mut r2);
                assert!(close(a, b, 1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn h_function_values() {
        assert_eq!(h_function(0.5, 0.5).unwrap(), 0.0);
        // Frozen from a 40-digit evaluation.
        assert!(close(h_function(0.01, 0.01).unwrap(), 4.503_217_453_131_898, 1e-12));
        assert!(close(h_function(0.01, 0.001).unwrap(), 6.782_686_196_840_804, 1e-12));
        assert!(close(h_function(0.001, 0.01).unwrap(), 4.592_667_811_025_725, 1e-12));
        assert!(h_function(0.0, 0.5).is_err());
        assert!(h_function(0.5, 1.0).is_err());
    }

    #[test]
    fn wald_threshold_values() {
        let t = wald_thresholds(ErrorLevels::new(0.01, 0.01).unwrap());
        assert!(close(t.lower, 99f64.ln(), 1e-12) && close(t.upper, 4.595_119_850_134_59, 1e-12));
        let t = wald_thresholds(ErrorLevels::new(0.01, 0.001).unwrap());
        assert!(close(t.lower, 6.897_704_943_128_636, 1e-12));
        assert!(close(t.upper, 4.604_169_685_654_508, 1e-12));
        let t = wald_thresholds(ErrorLevels::new(0.2, 0.2).unwrap());
        assert_eq!(t.lower, t.upper);
    }

    #[test]
    fn brownian_performance() {
        let l = ErrorLevels::new(0.01, 0.01).unwrap();
        let p = sprt_performance_brownian(&[1.0, 1.0], l).unwrap();
        assert!(close(p.e0_delay, 4.503_217_453_131_898, 1e-12));
        assert_eq!(p.e0_delay, p.e1_delay);
        let p = sprt_performance_brownian(&[1.0], l).unwrap();
        assert!(close(p.e0_delay, 9.006_434_906_263_796, 1e-12));
        let p = sprt_performance_brownian(&[0.3, 2.0], ErrorLevels::new(0.5 - 1e-9, 0.5 - 1e-9).unwrap()).unwrap();
        assert!(p.kl0.abs() < 1e-8 && p.e1_delay.abs() < 1e-8);
        assert!(sprt_performance_brownian(&[0.0, 0.0], l).is_err());
        assert_eq!(
            sprt_kl_lower_bounds(ErrorLevels::new(0.001, 0.01).unwrap()),
            (h_function(0.001, 0.01).unwrap(), h_function(0.01, 0.001).unwrap())
        );
    }

    #[test]
    fn error_levels_validation() {
        assert!(ErrorLevels::new(0.5, 0.5).is_err());
        assert!(ErrorLevels::new(0.0, 0.1).is_err());
        assert!(ErrorLevels::new(0.1, 1.0).is_err());
        assert!(ErrorLevels::new(0.3, 0.6).is_ok());
    }

    #[test]
    fn abs_moments_low_orders() {
        let m = HypothesisModel::gaussian(1.0, 0.4).unwrap();
        for truth in Hypothesis::BOTH {
            let mean = m.llr_mean(truth);
            let var = m.llr_variance();
            assert!(close(m.llr_abs_moment(truth, 2), mean * mean + var, 1e-12));
            assert!(close(m.llr_abs_moment(truth, 4), mean.powi(4) + 6.0 * mean * mean * var + 3.0 * var * var, 1e-12));
        }
    }

    #[test]
    fn gamma_half_values() {
        assert!(close(gamma_half(1), std::f64::consts::PI.sqrt(), 1e-14));
        assert!(close(gamma_half(2), 1.0, 1e-14));
        assert!(close(gamma_half(3), 0.5 * std::f64::consts::PI.sqrt(), 1e-14));
        assert!(close(gamma_half(8), 6.0, 1e-12));
    }
}
