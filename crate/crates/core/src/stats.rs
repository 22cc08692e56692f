//! Small statistics helpers for Monte-Carlo aggregation.

/// Two-sided 95% normal quantile.
pub const Z95_TWO_SIDED: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

/// Neumaier-compensated sum; result depends only on the input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; 0 for fewer than two samples.
    pub variance: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, variance: f64::NAN };
        }
        let mean = compensated_sum(values.iter().copied()) / n as f64;
        let variance = if n > 1 {
            compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Summary { n, mean, variance }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }

    /// Half-width of the normal-approximation 95% confidence interval.
    pub fn ci95(&self) -> f64 {
        Z95_TWO_SIDED * self.std_error()
    }
}

/// One-sided paired z statistic for `mean(a - b) > 0`.
pub fn paired_z(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = Summary::of(&diff);
    if s.variance == 0.0 {
        return if s.mean > 0.0 { f64::INFINITY } else if s.mean < 0.0 { f64::NEG_INFINITY } else { 0.0 };
    }
    s.mean / s.std_error()
}

/// One-sided Welch z statistic for `mean(a) > mean(b)` on independent samples.
pub fn welch_z(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb) = (Summary::of(a), Summary::of(b));
    let se = (sa.variance / sa.n as f64 + sb.variance / sb.n as f64).sqrt();
    (sa.mean - sb.mean) / se
}
