//! Monte Carlo checks of the analytic bounds over a fixed matrix of systems.
//!
//! Every check compares a measured value against a bound (`measured ≤ bound`).
//! Statistical slack is added to the bound side and documented per check.
//! One negative control (halved `Λ` weights) is expected to fail.

use serde::Deserialize;

use crate::calibration::{
    calibrate_on_banks, dsprt_envelope, estimate_alpha, estimate_beta, kl_lower_bounds, lambda_excess_bounds,
    lorden_overshoot_bound, record_dsprt_pair, record_sprt_pair, ErrorEstimator, QuantizationTable,
};
use crate::error::{Error, Result};
use crate::experiments::config::{ModeName, SystemSpec};
use crate::experiments::output::{fmt_float, CsvRecord};
use crate::experiments::sweep::sprt_envelope;
use crate::kernel::{run_dsprt_trial_observed, run_trials, wald_identity_check, Decision, Outcome, Payload, SystemConfig};
use crate::models::{wald_thresholds, ErrorLevels, SprtThresholds};
use crate::rng::derive_seed;
use crate::sensor::LocalThresholds;
use crate::stats::{combined_se, Summary};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSpec {
    /// Error levels of the discrete-time cases.
    pub alpha: f64,
    pub beta: f64,
    /// Local cycles per hypothesis for discrete-time quantization tables.
    pub n_mc: u64,
    /// Recorded trials per hypothesis for discrete-time cases.
    pub n_trials: u64,
    /// Error levels of the continuous-path case.
    pub continuous_alpha: f64,
    pub continuous_dt: f64,
    pub continuous_n_mc: u64,
    pub continuous_trials: u64,
    /// Trials per payload for the Wald-identity checks.
    pub wald_trials: u64,
    /// Full trials checked step by step for the tracking bound.
    pub tracking_trials: u64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            alpha: 1e-3,
            beta: 1e-3,
            n_mc: 1_000_000,
            n_trials: 20_000,
            continuous_alpha: 1e-2,
            continuous_dt: 1e-3,
            continuous_n_mc: 100_000,
            continuous_trials: 20_000,
            wald_trials: 20_000,
            tracking_trials: 200,
        }
    }
}

/// One system of the check matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckCase {
    pub name: String,
    pub system: SystemSpec,
}

impl CheckCase {
    fn new(mu: &[f64], mode: ModeName, step: f64, delta: f64) -> Self {
        let mus: Vec<String> = mu.iter().map(|m| m.to_string()).collect();
        let kind = match mode {
            ModeName::Continuous => "cont",
            ModeName::Discrete => "disc",
        };
        CheckCase {
            name: format!("{kind}_mu{}_h{step}_d{delta}", mus.join("-")),
            system: SystemSpec {
                mu: mu.to_vec(),
                mode,
                step,
                delta: Some(delta),
                delta_lo: None,
                delta_hi: None,
                a_tilde: None,
                b_tilde: None,
                truth: 1,
                max_steps: None,
            },
        }
    }
}

/// Two drift vectors × `Δ ∈ {1, 2}` × `h ∈ {1, 0.1}` in discrete time.
pub fn default_matrix() -> Vec<CheckCase> {
    let mut v = Vec::new();
    for mu in [[1.0, 1.0], [1.0, 0.5]] {
        for delta in [1.0, 2.0] {
            for h in [1.0, 0.1] {
                v.push(CheckCase::new(&mu, ModeName::Discrete, h, delta));
            }
        }
    }
    v
}

/// The continuous-path case: two unit drifts, `Δ = 2`.
pub fn continuous_case(dt: f64) -> CheckCase {
    CheckCase::new(&[1.0, 1.0], ModeName::Continuous, dt, 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub check: String,
    pub case: String,
    pub measured: f64,
    pub bound: f64,
    pub expect_pass: bool,
}

impl CheckResult {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound
    }

    /// The check behaved as expected (negative controls must fail).
    pub fn ok(&self) -> bool {
        self.holds() == self.expect_pass
    }
}

impl CsvRecord for CheckResult {
    fn header() -> Vec<&'static str> {
        vec!["check", "case", "measured", "bound", "margin", "holds", "expected", "status"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.check.clone(),
            self.case.clone(),
            fmt_float(self.measured),
            fmt_float(self.bound),
            fmt_float(self.bound - self.measured),
            self.holds().to_string(),
            if self.expect_pass { "hold" } else { "violate" }.to_string(),
            if self.ok() { "PASS" } else { "FAIL" }.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_ok(&self) -> bool {
        self.results.iter().all(CheckResult::ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.ok())
    }

    pub fn matching<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a CheckResult> {
        self.results.iter().filter(move |r| r.check.starts_with(prefix))
    }

    fn push(&mut self, check: impl Into<String>, case: &str, measured: f64, bound: f64) {
        self.results.push(CheckResult { check: check.into(), case: case.to_string(), measured, bound, expect_pass: true });
    }
}

const Z3: f64 = 3.0;
const Z4: f64 = 4.0;

/// Lemma-1, Lemma-2 and overshoot-bound checks for one sensor's table.
fn table_checks(report: &mut CheckReport, case: &str, sensor: usize, t: &QuantizationTable, model: &crate::models::HypothesisModel) -> Result<()> {
    let th = LocalThresholds::new(t.delta_lo, t.delta_hi)?;
    let s = format!("_s{sensor}");
    report.push(format!("lemma1_lambda_lo_ge_delta{s}"), case, t.delta_lo, t.lambda_lo + Z3 * t.se_lambda_lo);
    report.push(format!("lemma1_lambda_hi_ge_delta{s}"), case, t.delta_hi, t.lambda_hi + Z3 * t.se_lambda_hi);
    let (ex_lo, ex_hi) = lambda_excess_bounds(&th, t.theta_hat);
    let (c_lo, c_hi) = (ex_lo / t.theta_hat, ex_hi / t.theta_hat);
    report.push(
        format!("lemma1_lambda_lo_excess{s}"),
        case,
        t.lambda_lo - t.delta_lo,
        ex_lo + Z3 * combined_se(t.se_lambda_lo, c_lo * t.se_theta_hat),
    );
    report.push(
        format!("lemma1_lambda_hi_excess{s}"),
        case,
        t.lambda_hi - t.delta_hi,
        ex_hi + Z3 * combined_se(t.se_lambda_hi, c_hi * t.se_theta_hat),
    );
    let (lb0, lb1) = kl_lower_bounds(&th);
    report.push(format!("lemma2_i0{s}"), case, lb0, t.i0 + Z3 * t.se_i0);
    report.push(format!("lemma2_i1{s}"), case, lb1, t.i1 + Z3 * t.se_i1);
    for r in [1, 2] {
        report.push(format!("lorden_r{r}{s}"), case, t.theta_hat - Z3 * t.se_theta_hat, lorden_overshoot_bound(model, r)?);
    }
    Ok(())
}

/// Per-hypothesis quantities entering the Lemma-4 and Theorem-2 bounds.
struct Constants {
    /// `maxᵢ Eⱼ|ηⁱ|` per hypothesis.
    theta: [f64; 2],
    /// `minᵢ Iⱼⁱ` per hypothesis, under the fusion weights actually used.
    min_info: [f64; 2],
    c: f64,
    c_prime: f64,
    k: f64,
}

impl Constants {
    fn new(cfg: &SystemConfig, tables: &[QuantizationTable]) -> Self {
        let mut theta = [0.0f64; 2];
        let mut min_info = [f64::INFINITY; 2];
        for (t, w) in tables.iter().zip(cfg.fusion().weights()) {
            let (i0, i1) = t.information_with(w.lower, w.upper);
            for j in 0..2 {
                theta[j] = theta[j].max(t.mean_abs_overshoot[j]);
            }
            min_info[0] = min_info[0].min(i0);
            min_info[1] = min_info[1].min(i1);
        }
        Constants { theta, min_info, c: cfg.delta_sum(), c_prime: cfg.fusion().max_batch_jump(), k: cfg.k() as f64 }
    }

    fn lemma4(&self, j: usize, mean_u_tilde: f64) -> f64 {
        self.theta[j] * ((mean_u_tilde.abs() + 2.0 * self.c_prime) / self.min_info[j] + self.k) + self.c
    }

    fn theorem2_gap(&self, j: usize, log_level: f64) -> f64 {
        let phi = self.theta[j] / self.min_info[j];
        phi * log_level + (1.0 + 3.0 * phi) * self.c_prime + self.c + self.k * self.theta[j]
    }
}

fn outcome_checks(report: &mut CheckReport, case: &str, cfg: &SystemConfig, t: SprtThresholds, outcomes: [&[Outcome]; 2], k: &Constants) {
    for (j, o) in outcomes.iter().enumerate() {
        let aborted = o.iter().filter(|x| x.decision == Decision::Aborted).count();
        report.push(format!("no_aborted_h{j}"), case, aborted as f64, 0.0);
        let cp = cfg.fusion().max_batch_jump();
        let out = o.iter().filter(|x| x.u_tilde > t.upper + cp || x.u_tilde < -t.lower - cp).count();
        report.push(format!("fusion_overshoot_h{j}"), case, out as f64, 0.0);
        let gap = Summary::of(o.iter().map(|x| (x.u - x.u_tilde).abs()));
        let u_tilde = Summary::of(o.iter().map(|x| x.u_tilde));
        report.push(format!("lemma4_h{j}"), case, gap.mean, k.lemma4(j, u_tilde.mean) + Z4 * gap.se());
    }
}

fn discrete_case(report: &mut CheckReport, case: &CheckCase, spec: &CheckSpec, levels: ErrorLevels, seed: u64) -> Result<Vec<QuantizationTable>> {
    let name = case.name.as_str();
    let sys = &case.system;
    let tables = sys.quantization_tables(spec.n_mc, derive_seed(seed, &[1])).map_err(|e| e.in_context(name))?;
    for (i, (t, m)) in tables.iter().zip(sys.models()?).enumerate() {
        table_checks(report, name, i, t, &m)?;
    }
    let cfg = sys.build(Some(&tables), wald_thresholds(levels))?;
    let consts = Constants::new(&cfg, &tables);

    let banks = record_dsprt_pair(&cfg, dsprt_envelope(&cfg, levels), spec.n_trials, derive_seed(seed, &[2])).map_err(|e| e.in_context(name))?;
    let cal = calibrate_on_banks(&banks, levels, ErrorEstimator::LikelihoodRatio, seed).map_err(|e| e.in_context(name))?;
    let t = cal.thresholds;
    report.push("theorem2_a_tilde", name, t.lower, -levels.beta().ln());
    report.push("theorem2_b_tilde", name, t.upper, -levels.alpha().ln());
    let d0 = banks.h0.replay_all(t);
    let d1 = banks.h1.replay_all(t);
    outcome_checks(report, name, &cfg, t, [&d0, &d1], &consts);

    let sbanks = record_sprt_pair(&cfg, sprt_envelope(levels), spec.n_trials, derive_seed(seed, &[3])).map_err(|e| e.in_context(name))?;
    let scal = calibrate_on_banks(&sbanks, levels, ErrorEstimator::LikelihoodRatio, seed).map_err(|e| e.in_context(name))?;
    let s0 = sbanks.h0.replay_all(scal.thresholds);
    let s1 = sbanks.h1.replay_all(scal.thresholds);
    let log_levels = [-levels.beta().ln(), -levels.alpha().ln()];
    for (j, (d, s)) in [(&d0, &s0), (&d1, &s1)].into_iter().enumerate() {
        let ud = Summary::of(d.iter().map(|x| x.u));
        let us = Summary::of(s.iter().map(|x| x.u));
        report.push(
            format!("theorem2_gap_h{j}"),
            name,
            (ud.mean - us.mean).abs(),
            consts.theorem2_gap(j, log_levels[j]) + Z4 * combined_se(ud.se(), us.se()),
        );
    }
    Ok(tables)
}

fn wald_checks(report: &mut CheckReport, name: &str, cfg: &SystemConfig, spec: &CheckSpec, seed: u64) -> Result<()> {
    for (p, payload) in [Payload::One, Payload::Lambda, Payload::AbsOvershoot].into_iter().enumerate() {
        let r = wald_identity_check(cfg, derive_seed(seed, &[p as u64]), spec.wald_trials, payload)?;
        report.push(format!("wald_identity_{}_aborted", payload.label()), name, r.aborted as f64, 0.0);
        for s in &r.sensors {
            let tol = 1e-9 * (1.0 + s.lhs.abs());
            report.push(format!("wald_identity_{}_s{}", payload.label(), s.sensor), name, s.residual.abs(), Z4 * s.se + tol);
            if let Some(b) = s.corollary_bound {
                report.push(format!("corollary1_{}_s{}", payload.label(), s.sensor), name, s.corollary_slack, b);
            }
        }
    }
    Ok(())
}

/// `|u_t − ũ_t| ≤ C + m_t · max|ℓ|` at every step: each message can add at
/// most one step's increment of discretization error on top of `C`.
pub fn tracking_violations(cfg: &SystemConfig, n_trials: u64, seed: u64) -> Result<(u64, u64)> {
    let c = cfg.delta_sum();
    let per_trial = run_trials(n_trials, seed, |s| {
        let mut violations = 0u64;
        let mut steps = 0u64;
        let mut msgs = 0u64;
        let mut max_inc = 0.0f64;
        run_dsprt_trial_observed(cfg, s, |v| {
            steps += 1;
            msgs += v.messages.len() as u64;
            max_inc = max_inc.max(v.max_abs_increment);
            if (v.u - v.u_tilde).abs() > c + msgs as f64 * max_inc {
                violations += 1;
            }
        })?;
        Ok((violations, steps))
    })?;
    Ok(per_trial.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)))
}

fn continuous_checks(report: &mut CheckReport, spec: &CheckSpec, seed: u64) -> Result<()> {
    let case = continuous_case(spec.continuous_dt);
    let name = case.name.as_str();
    let sys = &case.system;
    let levels = ErrorLevels::new(spec.continuous_alpha, spec.continuous_alpha)?;
    let tables = sys.quantization_tables(spec.continuous_n_mc, derive_seed(seed, &[1])).map_err(|e| e.in_context(name))?;
    for (i, t) in tables.iter().enumerate() {
        report.push(format!("lemma1_lambda_lo_ge_delta_s{i}"), name, t.delta_lo, t.lambda_lo + Z3 * t.se_lambda_lo);
        report.push(format!("lemma1_lambda_hi_ge_delta_s{i}"), name, t.delta_hi, t.lambda_hi + Z3 * t.se_lambda_hi);
    }
    let cfg = sys.build(None, wald_thresholds(levels))?;
    let envelope = dsprt_envelope(&cfg, levels);
    let cfg = cfg.with_fusion_thresholds(envelope)?;
    let consts = Constants::new(&cfg, &tables);
    let banks = record_dsprt_pair(&cfg, envelope, spec.continuous_trials, derive_seed(seed, &[2]))?;

    // Theorem 1: the envelope itself meets the targets (counting, Wilson bound).
    let e0 = banks.h0.replay_all(envelope);
    let e1 = banks.h1.replay_all(envelope);
    report.push("theorem1_alpha_at_envelope", name, estimate_alpha(&e0, ErrorEstimator::Counting).upper, levels.alpha());
    report.push("theorem1_beta_at_envelope", name, estimate_beta(&e1, ErrorEstimator::Counting).upper, levels.beta());
    outcome_checks(report, name, &cfg, envelope, [&e0, &e1], &consts);

    let cal = calibrate_on_banks(&banks, levels, ErrorEstimator::LikelihoodRatio, seed).map_err(|e| e.in_context(name))?;
    report.push("theorem1_a_tilde", name, cal.thresholds.lower, -levels.beta().ln() + cfg.delta_sum());
    report.push("theorem1_b_tilde", name, cal.thresholds.upper, -levels.alpha().ln() + cfg.delta_sum());

    let (violations, _) = tracking_violations(&cfg, spec.tracking_trials, derive_seed(seed, &[3]))?;
    report.push("tracking_bound", name, violations as f64, 0.0);
    Ok(())
}

/// Runs the whole suite. Statistical failures are report entries, not errors.
pub fn run_theory_checks(spec: &CheckSpec, seed: u64) -> Result<CheckReport> {
    let levels = ErrorLevels::new(spec.alpha, spec.beta).map_err(|e| Error::Config(format!("check: {e}")))?;
    let mut report = CheckReport::default();
    let matrix = default_matrix();
    let mut all_tables = Vec::new();
    for (i, case) in matrix.iter().enumerate() {
        log::info!("checks: {}", case.name);
        let tables = discrete_case(&mut report, case, spec, levels, derive_seed(seed, &[10, i as u64]))?;
        all_tables.push(tables);
    }

    // Smaller samples shrink overshoots: compare h = 0.1 against h = 1 on sensor 0.
    for (a, case_a) in matrix.iter().enumerate() {
        for (b, case_b) in matrix.iter().enumerate() {
            let same = case_a.system.mu == case_b.system.mu && case_a.system.delta == case_b.system.delta;
            if same && case_a.system.step < case_b.system.step {
                let (ta, tb) = (&all_tables[a][0], &all_tables[b][0]);
                report.push(
                    "theta_decreases_with_h",
                    &format!("{}_vs_h{}", case_a.name, case_b.system.step),
                    ta.theta_hat + Z3 * combined_se(ta.se_theta_hat, tb.se_theta_hat),
                    tb.theta_hat,
                );
            }
        }
    }

    // Wald identity on the first case at its own calibrated thresholds.
    let base = &matrix[0];
    let cfg = base.system.build(Some(&all_tables[0]), wald_thresholds(levels))?;
    log::info!("checks: wald identity");
    wald_checks(&mut report, &base.name, &cfg, spec, derive_seed(seed, &[20]))?;

    // Negative control: halving Λ must break the Lemma-2 bound where Λ ≈ Δ (small h).
    for (case, tables) in matrix.iter().zip(&all_tables) {
        if case.system.step >= 1.0 {
            continue;
        }
        let t = &tables[0];
        let halved = t.with_lambdas(0.5 * t.lambda_lo, 0.5 * t.lambda_hi);
        let (lb0, _) = kl_lower_bounds(&LocalThresholds::new(t.delta_lo, t.delta_hi)?);
        report.results.push(CheckResult {
            check: "negative_control_lemma2_i0_halved_lambda".into(),
            case: case.name.clone(),
            measured: lb0,
            bound: halved.i0 + Z3 * 0.5 * t.se_i0,
            expect_pass: false,
        });
    }

    log::info!("checks: continuous case");
    continuous_checks(&mut report, spec, derive_seed(seed, &[30]))?;
    Ok(report)
}
