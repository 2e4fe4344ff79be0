use dsprt_core::experiments::{csv_string, CalibrationRow, CheckResult, CsvRecord, RunConfig, SweepRow};
use dsprt_core::{estimate_quantization, Error, HypothesisModel, LocalThresholds, TrialResult};

#[test]
fn unknown_keys_are_config_errors() {
    let good = "seed = 1\n[system]\nmu = [1.0]\nmode = \"discrete\"\nstep = 1.0\ndelta = 1.0\n";
    assert!(RunConfig::parse(good).is_ok());
    for bad in [
        format!("{good}extra = 2\n"),
        good.replace("delta = 1.0", "delta = 1.0\nthreshold = 3.0"),
        format!("{good}[sweep]\nalpha = [0.1]\n"),
        format!("{good}[check]\nn_mc = 10000\nfoo = 1\n"),
        format!("{good}[unknown_section]\n"),
    ] {
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))), "{bad}");
    }
}

#[test]
fn csv_headers_are_stable() {
    assert_eq!(TrialResult::header().join(","), "seed,decision,stop_time,u_at_stop,u_tilde_at_stop,msg_count_total");
    assert_eq!(
        SweepRow::header().join(","),
        "scheme,mode,step,delta,period,alpha,beta,a_threshold,b_threshold,mean_delay,se_delay,mean_delay0,se_delay0,\
         mean_delay1,se_delay1,mean_kl0,se_kl0,mean_kl1,se_kl1,achieved_alpha,se_alpha,alpha_upper,achieved_beta,se_beta,\
         beta_upper,mean_msgs_per_unit_time,n_trials,aborted,seed"
    );
    assert_eq!(CheckResult::header().join(","), "check,case,measured,bound,margin,holds,expected,status");
    assert_eq!(
        CalibrationRow::header().join(","),
        "sensor,delta_lo,delta_hi,lambda_lo,lambda_hi,p0_bit1,p1_bit1,i0,i1,theta_hat,se_lambda_lo,se_lambda_hi,\
         se_p0_bit1,se_p1_bit1,se_i0,se_i1,se_theta_hat,mean_period0,mean_period1,n_mc,seed"
    );
}

#[test]
fn calibration_rows_use_nine_significant_digits() {
    let t = estimate_quantization(&HypothesisModel::gaussian(1.0, 1.0).unwrap(), &LocalThresholds::symmetric(1.0).unwrap(), 10_000, 1)
        .unwrap();
    let text = csv_string(&[CalibrationRow { sensor: 0, table: t }]).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), CalibrationRow::header().len());
    for f in &row[1..row.len() - 2] {
        let digits = f.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
        assert!(digits.trim_start_matches('0').len() <= 9, "{f}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            if let (Some(sys), Some(sweep)) = (&c.system, &c.sweep) {
                sweep.validate(sys).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            }
            n += 1;
        }
    }
    assert!(n >= 4);
}
