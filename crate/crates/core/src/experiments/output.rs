//! CSV emission: comma separated, header row, floats at 9 significant digits.

use std::io::Write;

use crate::calibration::QuantizationTable;
use crate::error::Result;
use crate::kernel::TrialResult;

/// Formats a float with 9 significant digits, like C's `%.9g`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A type that serializes to one CSV row under a fixed header.
pub trait CsvRecord {
    fn header() -> Vec<&'static str>;
    fn fields(&self) -> Vec<String>;
}

pub fn write_csv<W: Write, T: CsvRecord>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(T::header())?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: CsvRecord>(path: &std::path::Path, rows: &[T]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}

pub fn csv_string<T: CsvRecord>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// One line of the per-sensor calibration report.
#[derive(Debug, Clone)]
pub struct CalibrationRow {
    pub sensor: usize,
    pub table: QuantizationTable,
}

impl CsvRecord for CalibrationRow {
    fn header() -> Vec<&'static str> {
        vec![
            "sensor", "delta_lo", "delta_hi", "lambda_lo", "lambda_hi", "p0_bit1", "p1_bit1", "i0", "i1", "theta_hat",
            "se_lambda_lo", "se_lambda_hi", "se_p0_bit1", "se_p1_bit1", "se_i0", "se_i1", "se_theta_hat",
            "mean_period0", "mean_period1", "n_mc", "seed",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let t = &self.table;
        let mut v = vec![self.sensor.to_string()];
        v.extend(
            [
                t.delta_lo, t.delta_hi, t.lambda_lo, t.lambda_hi, t.p0_bit1, t.p1_bit1, t.i0, t.i1, t.theta_hat,
                t.se_lambda_lo, t.se_lambda_hi, t.se_p0_bit1, t.se_p1_bit1, t.se_i0, t.se_i1, t.se_theta_hat,
                t.mean_period[0], t.mean_period[1],
            ]
            .map(fmt_float),
        );
        v.push(t.n_mc.to_string());
        v.push(t.seed.to_string());
        v
    }
}

impl CsvRecord for TrialResult {
    fn header() -> Vec<&'static str> {
        vec!["seed", "decision", "stop_time", "u_at_stop", "u_tilde_at_stop", "msg_count_total"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.decision.label().to_string(),
            fmt_float(self.stop_time),
            fmt_float(self.u_at_stop),
            fmt_float(self.u_tilde_at_stop),
            self.msg_total().to_string(),
        ]
    }
}
