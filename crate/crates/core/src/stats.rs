//! Small estimation helpers shared by calibration, sweeps and checks.

/// Upper 95% point of the standard normal, used for one-sided bounds.
pub const Z_95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: u64,
    pub mean: f64,
    /// Unbiased sample variance (0 for n < 2).
    pub variance: f64,
}

impl Summary {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Self {
        // Welford; iteration order is fixed by the caller so results are reproducible.
        let mut n = 0u64;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Summary { n, mean: if n == 0 { f64::NAN } else { mean }, variance }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn se(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance / self.n as f64).sqrt()
        }
    }
}

/// `sqrt(a² + b²)` for two independent standard errors.
pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// One-sided Wilson score upper bound for a binomial proportion.
pub fn wilson_upper(successes: u64, n: u64, z: f64) -> f64 {
    if n == 0 || successes >= n {
        return 1.0;
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre + spread) / (1.0 + z2 / n)).min(1.0)
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
