//! Scalar helpers for log-domain arithmetic on top of `libm`.

pub(crate) use libm::{exp, expm1 as exp_m1, log as ln, log1p as ln_1p, pow, sqrt};

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + ln_1p(exp(lo - hi))
}

/// `ln Σ e^{x_k}` with max shifting; `-inf` for an empty input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + ln(xs.iter().map(|&x| exp(x - m)).sum::<f64>())
}

/// `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 36.0 {
        x + exp(-x)
    } else if x < -36.0 {
        exp(x)
    } else {
        ln_1p(exp(x))
    }
}

/// `ln(1 - e^{-δ})` for `δ = e^l`, accurate when δ underflows.
pub fn ln_one_minus_exp_neg(l: f64) -> f64 {
    if l < -30.0 {
        // 1 - e^{-δ} = δ(1 - δ/2 + O(δ²))
        l - 0.5 * exp(l)
    } else {
        ln(-exp_m1(-exp(l)))
    }
}

/// `ln(e^δ - 1)` for `δ = e^l`, accurate when δ underflows.
pub fn ln_exp_m1_of_exp(l: f64) -> f64 {
    if l < -30.0 {
        l + 0.5 * exp(l)
    } else {
        ln(exp_m1(exp(l)))
    }
}

/// Running `ln Σ e^{x_k}`.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl LogAccumulator {
    pub const fn new() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += exp(x - self.max);
        } else {
            self.scaled = self.scaled * exp(self.max - x) + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + ln(self.scaled)
        }
    }
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// Bisection on a strictly decreasing function with `f(lo) > 0 >= f(hi)`.
///
/// Stops when the bracket can no longer be halved in floating point or
/// its width drops below `width_tol`.
pub fn bisect_decreasing<F, E>(
    mut lo: f64,
    mut hi: f64,
    width_tol: f64,
    max_iter: usize,
    mut f: F,
) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= width_tol {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_handles_extremes() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + ln(2.0))).abs() < 1e-12);
        assert!((log_add_exp(-1000.0, 0.0)).abs() < 1e-300);
    }

    #[test]
    fn accumulator_matches_direct_sum() {
        let xs = [-3.0, 2.0, 0.5, -700.0, 1.5];
        let mut acc = LogAccumulator::new();
        for &x in &xs {
            acc.add(x);
        }
        assert!((acc.value() - log_sum_exp(&xs)).abs() < 1e-14);
        let direct: f64 = xs.iter().map(|&x| exp(x)).sum();
        assert!((acc.value() - ln(direct)).abs() < 1e-14);
    }

    #[test]
    fn gap_helpers_match_direct_forms() {
        for &l in &[-40.0, -31.0, -29.0, -5.0, 0.0, 1.0] {
            let d = exp(l);
            let direct = ln(1.0 - exp(-d));
            if l > -25.0 {
                assert!((ln_one_minus_exp_neg(l) - direct).abs() < 1e-12);
                assert!((ln_exp_m1_of_exp(l) - ln(exp(d) - 1.0)).abs() < 1e-9);
            }
            assert!((ln_one_minus_exp_neg(l) - ln(-exp_m1(-d))).abs() < 1e-12);
        }
        assert!((ln_one_minus_exp_neg(-800.0) + 800.0).abs() < 1e-12);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - ln(2.0)).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn bisection_finds_root_of_decreasing_map() {
        let (lo, hi) = bisect_decreasing::<_, ()>(0.0, 4.0, 0.0, 200, |x| Ok(2.0 - x)).unwrap();
        assert!(lo <= 2.0 && 2.0 <= hi && hi - lo < 1e-15);
    }
}
