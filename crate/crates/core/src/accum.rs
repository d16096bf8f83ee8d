//! Order-fixed, compensated accumulation helpers.
//!
//! Replicate results are always reduced sequentially in replicate order with
//! Neumaier compensation, so summaries do not depend on how many workers
//! produced the per-replicate values.

/// Neumaier-compensated sum over an index-ordered slice.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Central moments up to order four, computed in two fixed-order passes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Σ(x−mean)² / count
    pub m2: f64,
    /// Σ(x−mean)⁴ / count
    pub m4: f64,
}

pub(crate) fn central_moments(values: &[f64]) -> Moments {
    let count = values.len();
    assert!(count > 0, "moments of an empty slice");
    let mean = compensated_sum(values.iter().copied()) / count as f64;
    let m2 = compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / count as f64;
    let m4 = compensated_sum(values.iter().map(|v| (v - mean).powi(4))) / count as f64;
    Moments { count, mean, m2, m4 }
}

impl Moments {
    /// Unbiased sample variance (divisor count−1); `None` for a single value.
    pub fn sample_variance(&self) -> Option<f64> {
        if self.count < 2 {
            return None;
        }
        Some(self.m2 * self.count as f64 / (self.count as f64 - 1.0))
    }

    /// Standard error of the mean; `None` for a single value.
    pub fn mean_se(&self) -> Option<f64> {
        self.sample_variance().map(|v| (v / self.count as f64).sqrt())
    }

    /// Standard error of the sample variance, from the usual large-sample
    /// formula Var(s²) ≈ (m4 − m2²(R−3)/(R−1)) / R.
    pub fn variance_se(&self) -> Option<f64> {
        if self.count < 2 {
            return None;
        }
        let r = self.count as f64;
        let v = (self.m4 - self.m2 * self.m2 * (r - 3.0) / (r - 1.0)) / r;
        Some(v.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_tail() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs.iter().copied()), 2.0);
    }

    #[test]
    fn moments_match_direct_formulas() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let m = central_moments(&xs);
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.m2, 1.25);
        assert_eq!(m.sample_variance(), Some(5.0 / 3.0));
    }

    #[test]
    fn single_value_has_no_spread_estimates() {
        let m = central_moments(&[3.0]);
        assert_eq!(m.mean, 3.0);
        assert!(m.sample_variance().is_none());
        assert!(m.mean_se().is_none());
        assert!(m.variance_se().is_none());
    }
}
