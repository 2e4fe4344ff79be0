//! Acceptance criteria, one PASS/FAIL line each. Exit status 1 if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dsprt_core::calibration::{dsprt_envelope, estimate_alpha, estimate_beta, record_dsprt_pair};
use dsprt_core::experiments::checks::tracking_violations;
use dsprt_core::experiments::{
    run_sweep, run_theory_checks, CalibrationSpec, CheckReport, CheckSpec, ModeName, Scheme, SweepRow, SweepSpec,
    SystemSpec,
};
use dsprt_core::kernel::{hypothesis_root, run_trials};
use dsprt_core::stats::Summary;
use dsprt_core::{
    estimate_quantization, run_centralized_sprt_trial, wald_thresholds, ErrorEstimator, ErrorLevels, Hypothesis,
    HypothesisModel, LocalThresholds, Mode, SystemConfig,
};

type Verdict = Result<(bool, String), String>;

fn system(mu: &[f64], mode: ModeName, step: f64, delta: f64) -> SystemSpec {
    SystemSpec {
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
    }
}

fn comb(ses: &[f64]) -> f64 {
    ses.iter().map(|s| s * s).sum::<f64>().sqrt()
}

fn c1_mean_period() -> Verdict {
    let model = HypothesisModel::brownian(1.0, 1e-3).map_err(|e| e.to_string())?;
    let th = LocalThresholds::symmetric(2.0).map_err(|e| e.to_string())?;
    let t = estimate_quantization(&model, &th, 100_000, 101).map_err(|e| e.to_string())?;
    let target = 3.0464;
    let rel = t.mean_period.map(|p| p / target - 1.0);
    let ok = rel.iter().all(|r| r.abs() <= 0.02);
    Ok((ok, format!("E0[tau]={:.4} E1[tau]={:.4} vs {target} (rel {:+.2}%, {:+.2}%)", t.mean_period[0], t.mean_period[1], 100.0 * rel[0], 100.0 * rel[1])))
}

fn c2_centralized_delay() -> Verdict {
    let levels = ErrorLevels::new(1e-2, 1e-2).map_err(|e| e.to_string())?;
    let t = wald_thresholds(levels);
    let cfg = SystemConfig::homogeneous(2, 1.0, Mode::Continuous { dt: 1e-3 }, 2.0, None, t, Hypothesis::H1)
        .map_err(|e| e.to_string())?;
    let target = 4.50322;
    let mut msg = Vec::new();
    let mut ok = true;
    for truth in Hypothesis::BOTH {
        let c = cfg.with_truth(truth);
        let r = run_trials(10_000, hypothesis_root(202, truth), |s| run_centralized_sprt_trial(&c, t, s)).map_err(|e| e.to_string())?;
        let d = Summary::of(r.iter().map(|x| x.stop_time));
        ok &= (d.mean / target - 1.0).abs() <= 0.03;
        msg.push(format!("E{}[T]={:.4}±{:.4}", truth.index(), d.mean, d.se()));
    }
    Ok((ok, format!("{} vs {target} (3%)", msg.join(" "))))
}

fn c3_envelope_certification() -> Verdict {
    let levels = ErrorLevels::new(1e-2, 1e-2).map_err(|e| e.to_string())?;
    let sys = system(&[1.0, 1.0], ModeName::Continuous, 1e-3, 2.0);
    let cfg = sys.build(None, wald_thresholds(levels)).map_err(|e| e.to_string())?;
    let envelope = dsprt_envelope(&cfg, levels);
    let banks = record_dsprt_pair(&cfg, envelope, 100_000, 303).map_err(|e| e.to_string())?;
    let a = estimate_alpha(&banks.h0.replay_all(envelope), ErrorEstimator::Counting);
    let b = estimate_beta(&banks.h1.replay_all(envelope), ErrorEstimator::Counting);
    let ok = a.upper <= levels.alpha() && b.upper <= levels.beta();
    Ok((
        ok,
        format!(
            "A~=B~={:.4}: alpha_hat={:.2e} (Wilson {:.2e}) beta_hat={:.2e} (Wilson {:.2e}) <= 1e-2",
            envelope.upper, a.value, a.upper, b.value, b.upper
        ),
    ))
}

fn rows_verdict(report: &CheckReport, prefixes: &[&str], case_filter: impl Fn(&str) -> bool) -> Verdict {
    let rows: Vec<_> = report
        .results
        .iter()
        .filter(|r| prefixes.iter().any(|p| r.check.starts_with(p)) && case_filter(&r.case))
        .collect();
    if rows.is_empty() {
        return Err(format!("no check rows for {prefixes:?}"));
    }
    let failed: Vec<String> = rows.iter().filter(|r| !r.ok()).map(|r| format!("{}@{}", r.check, r.case)).collect();
    let min_margin = rows.iter().filter(|r| r.expect_pass).map(|r| r.bound - r.measured).fold(f64::INFINITY, f64::min);
    Ok((failed.is_empty(), format!("{} rows, {} failed {:?}, min margin {:.4}", rows.len(), failed.len(), failed, min_margin)))
}

fn c4_lemma12(report: &CheckReport) -> Verdict {
    rows_verdict(report, &["lemma1_", "lemma2_"], |c| c.starts_with("disc_"))
}

fn c5_wald(report: &CheckReport) -> Verdict {
    rows_verdict(report, &["wald_identity_", "corollary1_"], |_| true)
}

fn c6_tracking() -> Verdict {
    let levels = ErrorLevels::new(1e-2, 1e-2).map_err(|e| e.to_string())?;
    let sys = system(&[1.0, 1.0], ModeName::Continuous, 1e-3, 2.0);
    let cfg = sys.build(None, wald_thresholds(levels)).map_err(|e| e.to_string())?;
    let cfg = cfg.with_fusion_thresholds(dsprt_envelope(&cfg, levels)).map_err(|e| e.to_string())?;
    let (violations, steps) = tracking_violations(&cfg, 1_000, 606).map_err(|e| e.to_string())?;
    Ok((violations == 0, format!("{violations} violations over {steps} steps of 1000 trials")))
}

fn find(rows: &[SweepRow], scheme: Scheme, alpha: f64) -> Result<&SweepRow, String> {
    rows.iter().find(|r| r.scheme == scheme && r.alpha == alpha).ok_or_else(|| format!("missing {} at {alpha}", scheme.label()))
}

fn c7_fig2_ordering() -> Verdict {
    let sys = system(&[1.0, 1.0], ModeName::Continuous, 1e-3, 2.0);
    let spec = SweepSpec {
        alphas: vec![1e-2, 1e-4],
        n_trials: 200_000,
        schemes: vec![Scheme::Dsprt, Scheme::SprtCont, Scheme::SprtSampled],
        sampled_period: Some(3.0464),
        ..SweepSpec::default()
    };
    let rows = run_sweep(&sys, &spec, &CalibrationSpec::default(), 707).map_err(|e| e.to_string())?;
    let d = |s, a| find(&rows, s, a).map(|r| r.delay);
    let (sprt, dsprt, sampled) = (d(Scheme::SprtCont, 1e-4)?, d(Scheme::Dsprt, 1e-4)?, d(Scheme::SprtSampled, 1e-4)?);
    let sep1 = (dsprt.mean - sprt.mean) / comb(&[dsprt.se(), sprt.se()]);
    let sep2 = (sampled.mean - dsprt.mean) / comb(&[sampled.se(), dsprt.se()]);
    let (sprt2, dsprt2) = (d(Scheme::SprtCont, 1e-2)?, d(Scheme::Dsprt, 1e-2)?);
    let gap4 = dsprt.mean - sprt.mean;
    let gap2 = dsprt2.mean - sprt2.mean;
    let growth_se = comb(&[dsprt.se(), sprt.se(), dsprt2.se(), sprt2.se()]);
    let growth = gap4 - gap2;
    let ok = sep1 >= 3.0 && sep2 >= 3.0 && growth <= 3.0 * growth_se;
    let mut msg = format!(
        "a=1e-4 delays sprt={:.4} dsprt={:.4} sampled={:.4} (sep {:.1}σ, {:.1}σ); gap 1e-2={:.4} 1e-4={:.4}, growth {:+.4} vs 3σ={:.4}",
        sprt.mean, dsprt.mean, sampled.mean, sep1, sep2, gap2, gap4, growth, 3.0 * growth_se
    );
    // Diagnostic only: the D-SPRT statistic moves on a lattice, so its achieved
    // errors sit below the target. Rerun the sampled SPRT at those achieved levels.
    let row = find(&rows, Scheme::Dsprt, 1e-4)?;
    let (aa, ab) = (row.achieved_alpha.value, row.achieved_beta.value);
    if aa > 0.0 && ab > 0.0 {
        let matched = SweepSpec {
            alphas: vec![aa],
            beta_ratio: ab / aa,
            n_trials: (25.0 / aa.min(ab)).ceil() as u64,
            schemes: vec![Scheme::SprtSampled],
            sampled_period: Some(3.0464),
            ..SweepSpec::default()
        };
        let m = run_sweep(&sys, &matched, &CalibrationSpec::default(), 708).map_err(|e| e.to_string())?;
        msg.push_str(&format!(
            "; dsprt achieved alpha={aa:.2e} beta={ab:.2e} (A~={:.3}, B~={:.3}), sampled at those levels {:.4}±{:.4}",
            row.thresholds.lower, row.thresholds.upper, m[0].delay.mean, m[0].delay.se()
        ));
    }
    Ok((ok, msg))
}

fn c8_fig3_oversampling() -> Verdict {
    let sys = system(&[1.0, 1.0], ModeName::Discrete, 1.0, 1.0);
    let spec = SweepSpec {
        alphas: vec![1e-3],
        n_trials: 100_000,
        schemes: vec![Scheme::Dsprt, Scheme::SprtDiscrete],
        steps: vec![1.0, 0.1],
        ..SweepSpec::default()
    };
    let rows = run_sweep(&sys, &spec, &CalibrationSpec::default(), 808).map_err(|e| e.to_string())?;
    let kl = |scheme: Scheme, step: f64| -> Result<(f64, f64), String> {
        let r = rows.iter().find(|r| r.scheme == scheme && r.step == step).ok_or_else(|| format!("missing {} h={step}", scheme.label()))?;
        Ok((0.5 * (r.kl0.mean + r.kl1.mean), 0.5 * comb(&[r.kl0.se(), r.kl1.se()])))
    };
    let ((d1, sd1), (d01, sd01)) = (kl(Scheme::Dsprt, 1.0)?, kl(Scheme::Dsprt, 0.1)?);
    let ((s1, _), (s01, _)) = (kl(Scheme::SprtDiscrete, 1.0)?, kl(Scheme::SprtDiscrete, 0.1)?);
    let improvement = d1 - d01;
    let sep = improvement / comb(&[sd1, sd01]);
    let central_change = (s1 - s01).abs();
    let ok = sep >= 3.0 && central_change < improvement;
    Ok((
        ok,
        format!(
            "dsprt KL h=1 {d1:.4} h=0.1 {d01:.4} (improvement {improvement:.4}, {sep:.1}σ); sprt KL h=1 {s1:.4} h=0.1 {s01:.4} (change {central_change:.4})"
        ),
    ))
}

fn c9_lemma4_theorem2(report: &CheckReport) -> Verdict {
    rows_verdict(report, &["lemma4_", "theorem2_", "theorem1_"], |_| true)
}

fn run_cli(args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_dsprt"))
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    match status.code() {
        Some(0) | Some(2) => std::fs::read(out).map_err(|e| e.to_string()),
        other => Err(format!("dsprt {args:?} exited with {other:?}")),
    }
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"seed = 10
trials = 300

[system]
mu = [1.0, 0.7]
mode = "discrete"
step = 0.5
delta = 1.0

[calibration]
alpha = 0.05
beta = 0.05
n_mc = 20000
n_trials = 2000

[sweep]
alphas = [0.1, 0.05]
n_trials = 2000
schemes = ["dsprt", "sprt_discrete", "sprt_sampled"]

[check]
alpha = 0.05
beta = 0.05
n_mc = 10000
n_trials = 2000
continuous_alpha = 0.1
continuous_dt = 0.01
continuous_n_mc = 10000
continuous_trials = 2000
wald_trials = 2000
tracking_trials = 20
"#,
    )
    .map_err(|e| e.to_string())?;
    let cfg = cfg.to_str().ok_or("non-utf8 temp path")?;
    let mut notes = Vec::new();
    let mut ok = true;
    for sub in ["calibrate", "simulate", "sweep", "check"] {
        let a = run_cli(&[sub, "--config", cfg, "--threads", "1"], &dir.path().join(format!("{sub}_a.csv")))?;
        let b = run_cli(&[sub, "--config", cfg], &dir.path().join(format!("{sub}_b.csv")))?;
        let same = a == b && !a.is_empty();
        ok &= same;
        notes.push(format!("{sub}:{}", if same { "identical" } else { "DIFFERENT" }));
    }
    Ok((ok, notes.join(" ")))
}

fn main() {
    let mut failures = 0;
    let mut report_line = |name: &str, took: Duration, v: Verdict| {
        let secs = took.as_secs_f64();
        match v {
            Ok((true, msg)) => println!("PASS {name}: {msg} [{secs:.0}s]"),
            Ok((false, msg)) => {
                failures += 1;
                println!("FAIL {name}: {msg} [{secs:.0}s]");
            }
            Err(e) => {
                failures += 1;
                println!("FAIL {name}: error: {e} [{secs:.0}s]");
            }
        }
    };

    let timed = |f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        (t.elapsed(), v)
    };
    let (d, v) = timed(&c1_mean_period);
    report_line("criterion 1 mean intersampling period", d, v);
    let (d, v) = timed(&c2_centralized_delay);
    report_line("criterion 2 centralized SPRT delay", d, v);
    let (d, v) = timed(&c3_envelope_certification);
    report_line("criterion 3 envelope error certification", d, v);

    let t = Instant::now();
    let spec = CheckSpec { wald_trials: 100_000, ..CheckSpec::default() };
    let report = run_theory_checks(&spec, 404).map_err(|e| e.to_string());
    let check_time = t.elapsed();
    let from_report = |f: fn(&CheckReport) -> Verdict| report.as_ref().map_err(Clone::clone).and_then(f);
    report_line("criterion 4 lemma 1/2 suite", check_time, from_report(c4_lemma12));
    report_line("criterion 5 Wald identity", check_time, from_report(c5_wald));
    let (d, v) = timed(&c6_tracking);
    report_line("criterion 6 tracking bound", d, v);
    let (d, v) = timed(&c7_fig2_ordering);
    report_line("criterion 7 sweep ordering and bounded gap", d, v);
    let (d, v) = timed(&c8_fig3_oversampling);
    report_line("criterion 8 oversampling effect", d, v);
    report_line("criterion 9 lemma 4 and theorem 2 envelopes", check_time, from_report(c9_lemma4_theorem2));
    let (d, v) = timed(&c10_determinism);
    report_line("criterion 10 determinism", d, v);

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
