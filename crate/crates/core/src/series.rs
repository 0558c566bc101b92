//! The series `F`, its truncations, the `n`-weighted series `G`, the
//! prefixed series, the integral `I(η)` and the product asymptotics.
//!
//! With `Z > ln p` write `δ = Z - ln p` and
//! `w_n = Π_{k≤n} mean_i e^{-z_i θ^k}`. Then
//! `F = Σ_{n≥1} e^{-nδ} w_n` and `G = Σ_{n≥1} n e^{-nδ} w_n`.
//! Everything is summed in log space. The caller passes the gap `δ`
//! through [`Gap`] in log form, so that `δ` far below machine epsilon
//! relative to `ln p` stays resolved.
//!
//! Beyond `K` terms `ln w_{K+m} ∈ [ln w_K - ε_K, ln w_K]` with
//! `ε_K = z̄ θ^{K+1}/(1-θ)` and `z̄` the mean of `z`. The remaining tail is
//! then a geometric or arithmetico-geometric sum inside a certified
//! interval, and its midpoint is used.

use alloc::vec::Vec;

use crate::math::{exp, exp_m1, ln, ln_1p, ln_one_minus_exp_neg, log_add_exp, pow, LogAccumulator};

/// Hard limit on stored products.
pub const TERM_CAP: usize = 10_000_000;

/// Kernels are extended until the tail drift `ε_K` is below this.
const KERNEL_EPS: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("series diverges: Z = {z} is not above ln p = {ln_p}")]
    Divergent { z: f64, ln_p: f64 },
    #[error("series needs more than {0} terms")]
    TermCap(usize),
    #[error("tolerance {tol:e} not reached (bound {bound:e})")]
    Tolerance { tol: f64, bound: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Value of a positive series in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub log_value: f64,
    /// Relative half-width of the certified enclosure.
    pub tail_rel_bound: f64,
    pub terms_used: usize,
}

impl SeriesValue {
    pub fn value(&self) -> f64 {
        exp(self.log_value)
    }
}

/// The gap `δ = Z - ln p > 0`, stored as `ln δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    ln: f64,
}

impl Gap {
    pub fn from_ln(ln_gap: f64) -> Self {
        Self { ln: ln_gap }
    }

    pub fn from_value(delta: f64) -> Result<Self, SeriesError> {
        if delta > 0.0 {
            Ok(Self { ln: ln(delta) })
        } else {
            Err(SeriesError::InvalidInput("gap must be positive"))
        }
    }

    /// Gap of `Z` above `ln p`.
    pub fn from_pressure(z: f64, p: usize) -> Result<Self, SeriesError> {
        let ln_p = ln(p as f64);
        if z > ln_p {
            Ok(Self { ln: ln(z - ln_p) })
        } else {
            Err(SeriesError::Divergent { z, ln_p })
        }
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    pub fn value(self) -> f64 {
        exp(self.ln)
    }

    /// `ln(1 - e^{-δ})`.
    pub fn ln_one_minus_ratio(self) -> f64 {
        ln_one_minus_exp_neg(self.ln)
    }
}

/// `ln Σ_i e^{-z_i θ^j}`.
pub fn s_factor(z: &[f64], theta: f64, j: u32) -> f64 {
    let s = pow(theta, j as f64);
    let m = z.iter().map(|&zi| -zi * s).fold(f64::NEG_INFINITY, f64::max);
    m + ln(z.iter().map(|&zi| exp(-zi * s - m)).sum::<f64>())
}

/// `ln mean_i e^{-z_i s}`, accurate when every `z_i s` is small.
fn log_mean_factor(z: &[f64], s: f64) -> f64 {
    let p = z.len() as f64;
    let zmax = z.iter().copied().fold(0.0, f64::max);
    if zmax * s < 0.5 {
        ln_1p(z.iter().map(|&zi| exp_m1(-zi * s)).sum::<f64>() / p)
    } else {
        let m = z.iter().map(|&zi| -zi * s).fold(f64::NEG_INFINITY, f64::max);
        m + ln(z.iter().map(|&zi| exp(-zi * s - m)).sum::<f64>()) - ln(p)
    }
}

fn check_inputs(z: &[f64], theta: f64) -> Result<(), SeriesError> {
    if z.is_empty() {
        return Err(SeriesError::InvalidInput("empty slope vector"));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(SeriesError::InvalidInput("theta outside (0,1)"));
    }
    if z.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(SeriesError::InvalidInput("slopes must be finite and nonnegative"));
    }
    Ok(())
}

/// Cumulative log-products `L_k = ln w_k` for one slope vector.
#[derive(Debug, Clone)]
pub struct Kernel {
    theta: f64,
    p: usize,
    zbar: f64,
    log_w: Vec<f64>,
}

enum Weighting {
    Plain,
    Linear,
    Prefixed(f64),
}

impl Kernel {
    pub fn new(z: &[f64], theta: f64) -> Result<Self, SeriesError> {
        check_inputs(z, theta)?;
        let p = z.len();
        let zbar = z.iter().sum::<f64>() / p as f64;
        let mut log_w = Vec::new();
        let mut acc = 0.0;
        let mut k = 1usize;
        loop {
            acc += log_mean_factor(z, pow(theta, k as f64));
            log_w.push(acc);
            if zbar * pow(theta, (k + 1) as f64) / (1.0 - theta) <= KERNEL_EPS {
                break;
            }
            k += 1;
            if k > TERM_CAP {
                return Err(SeriesError::TermCap(TERM_CAP));
            }
        }
        Ok(Self { theta, p, zbar, log_w })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    /// `ln w_k` for `1 ≤ k ≤ len`.
    pub fn log_weight(&self, k: usize) -> f64 {
        self.log_w[k - 1]
    }

    /// Midpoint estimate of `ln lim w_k`.
    pub fn log_weight_limit(&self) -> f64 {
        let k = self.len();
        self.log_w[k - 1] - 0.5 * self.drift(k)
    }

    /// `ε_K`: bound on `ln w_K - ln w_∞`.
    fn drift(&self, k: usize) -> f64 {
        self.zbar * pow(self.theta, (k + 1) as f64) / (1.0 - self.theta)
    }

    pub fn f(&self, gap: Gap, tol: f64) -> Result<SeriesValue, SeriesError> {
        self.sum(gap, Weighting::Plain, tol)
    }

    pub fn g(&self, gap: Gap, tol: f64) -> Result<SeriesValue, SeriesError> {
        self.sum(gap, Weighting::Linear, tol)
    }

    /// `Σ_{k≥1} e^{S θ^k} e^{-kδ} w_k` for `S ≤ 0`.
    pub fn f_prefixed(&self, gap: Gap, s: f64, tol: f64) -> Result<SeriesValue, SeriesError> {
        if !(s <= 0.0) {
            return Err(SeriesError::InvalidInput("prefix weight must be nonpositive"));
        }
        self.sum(gap, Weighting::Prefixed(s), tol)
    }

    fn sum(&self, gap: Gap, weighting: Weighting, tol: f64) -> Result<SeriesValue, SeriesError> {
        let delta = gap.value();
        let ln_1mx = gap.ln_one_minus_ratio();
        let mut acc = LogAccumulator::new();
        let mut best = f64::INFINITY;
        for n in 1..=self.len() {
            let nf = n as f64;
            let lw = self.log_w[n - 1];
            let (extra, ln_geom, eps) = match weighting {
                Weighting::Plain => (0.0, -(nf + 1.0) * delta - ln_1mx, self.drift(n)),
                Weighting::Linear => {
                    // Σ_{m>n} m x^m = x^{n+1}(1 + n(1-x))/(1-x)²
                    let g = -(nf + 1.0) * delta + ln_1p(nf * exp(ln_1mx)) - 2.0 * ln_1mx;
                    (ln(nf), g, self.drift(n))
                }
                Weighting::Prefixed(s) => {
                    let e = self.drift(n) - s * pow(self.theta, nf + 1.0);
                    (s * pow(self.theta, nf), -(nf + 1.0) * delta - ln_1mx, e)
                }
            };
            acc.add(lw - nf * delta + extra);
            let ln_hi = lw + ln_geom;
            let ln_mid = ln_hi + ln_1p(exp(-eps)) - core::f64::consts::LN_2;
            let ln_half = ln_hi + ln(-exp_m1(-eps)) - core::f64::consts::LN_2;
            let total = log_add_exp(acc.value(), ln_mid);
            let rel = exp(ln_half - total);
            best = best.min(rel);
            if rel <= tol {
                return Ok(SeriesValue { log_value: total, tail_rel_bound: rel, terms_used: n });
            }
        }
        Err(SeriesError::Tolerance { tol, bound: best })
    }

    /// First `k` terms of `F`, with the bound `e^{-(K+1)δ}/(1-e^{-δ})`
    /// relative to the partial sum.
    pub fn f_truncated(&self, gap: Gap, k: usize) -> Result<SeriesValue, SeriesError> {
        if k == 0 {
            return Err(SeriesError::InvalidInput("K must be at least 1"));
        }
        if k > self.len() {
            return Err(SeriesError::InvalidInput("K exceeds kernel length"));
        }
        let delta = gap.value();
        let mut acc = LogAccumulator::new();
        for n in 1..=k {
            acc.add(self.log_w[n - 1] - n as f64 * delta);
        }
        let partial = acc.value();
        let ln_bound = -((k + 1) as f64) * delta - gap.ln_one_minus_ratio();
        Ok(SeriesValue { log_value: partial, tail_rel_bound: exp(ln_bound - partial), terms_used: k })
    }
}

/// `F(Z, z) = Σ_{n≥1} e^{-nZ} Π_{k≤n} Σ_i e^{-z_i θ^k}`.
pub fn f_series(z_cap: f64, z: &[f64], theta: f64, tol: f64) -> Result<SeriesValue, SeriesError> {
    let gap = Gap::from_pressure(z_cap, z.len())?;
    Kernel::new(z, theta)?.f(gap, tol)
}

/// `F_K(Z, z)`, the first `K` terms of `F`.
pub fn f_truncated(z_cap: f64, z: &[f64], theta: f64, k: usize) -> Result<SeriesValue, SeriesError> {
    check_inputs(z, theta)?;
    if k == 0 {
        return Err(SeriesError::InvalidInput("K must be at least 1"));
    }
    let gap = Gap::from_pressure(z_cap, z.len())?;
    let delta = gap.value();
    let mut acc = LogAccumulator::new();
    let mut lw = 0.0;
    for n in 1..=k {
        lw += log_mean_factor(z, pow(theta, n as f64));
        acc.add(lw - n as f64 * delta);
    }
    let partial = acc.value();
    let ln_bound = -((k + 1) as f64) * delta - gap.ln_one_minus_ratio();
    Ok(SeriesValue { log_value: partial, tail_rel_bound: exp(ln_bound - partial), terms_used: k })
}

/// `G(Z, z) = Σ_{n≥1} n e^{-nZ} Π_{k≤n} Σ_i e^{-z_i θ^k}`.
pub fn g_series(z_cap: f64, z: &[f64], theta: f64, tol: f64) -> Result<SeriesValue, SeriesError> {
    let gap = Gap::from_pressure(z_cap, z.len())?;
    Kernel::new(z, theta)?.g(gap, tol)
}

/// `Σ_{k≥1} e^{S θ^k} e^{-kZ} Π_{j≤k} Σ_i e^{-z_i θ^j}` for `S ≤ 0`.
pub fn f_prefixed(z_cap: f64, z: &[f64], theta: f64, s: f64, tol: f64) -> Result<SeriesValue, SeriesError> {
    let gap = Gap::from_pressure(z_cap, z.len())?;
    Kernel::new(z, theta)?.f_prefixed(gap, s, tol)
}

/// `r = -ln p / ln θ`.
pub fn r_exponent(p: usize, theta: f64) -> f64 {
    -ln(p as f64) / ln(theta)
}

/// Quadrature result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralValue {
    pub value: f64,
    pub abs_error_bound: f64,
}

/// `I(η) = ∫₀¹ f(x) dx/x + ∫₁^∞ (Σ η_i e^{-η_i x})/(1 + Σ e^{-η_i x}) ln x dx`
/// with `f(x) = ln((1 + Σ_i e^{-η_i x})/p)` and `p = len(η) + 1`.
///
/// `f(x)/x` extends continuously to `-Σ η_i / p` at zero.
pub fn i_integral(eta: &[f64], tol: f64) -> Result<IntegralValue, SeriesError> {
    if eta.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
        return Err(SeriesError::InvalidInput("eta must be finite and nonnegative"));
    }
    if !(tol > 0.0) {
        return Err(SeriesError::InvalidInput("tolerance must be positive"));
    }
    if eta.iter().all(|&e| e == 0.0) {
        return Ok(IntegralValue { value: 0.0, abs_error_bound: 0.0 });
    }
    let p = (eta.len() + 1) as f64;
    let sum_eta: f64 = eta.iter().sum();
    let head = |x: f64| {
        if x == 0.0 {
            -sum_eta / p
        } else {
            ln_1p(eta.iter().map(|&e| exp_m1(-e * x)).sum::<f64>() / p) / x
        }
    };
    let tail = |x: f64| {
        let num: f64 = eta.iter().map(|&e| e * exp(-e * x)).sum();
        let den: f64 = 1.0 + eta.iter().map(|&e| exp(-e * x)).sum::<f64>();
        num / den * ln(x)
    };
    let eta_min = eta.iter().copied().filter(|&e| e > 0.0).fold(f64::INFINITY, f64::min);
    let tail_bound = |x: f64| sum_eta * exp(-eta_min * x) * (ln(x) + 1.0 / eta_min) / eta_min;
    let mut upper = 2.0f64.max(1.0 / eta_min);
    while tail_bound(upper) > 0.25 * tol {
        upper *= 1.5;
        if upper > 1e12 {
            return Err(SeriesError::Tolerance { tol, bound: tail_bound(upper) });
        }
    }
    let (v1, e1) = adaptive_simpson(&head, 0.0, 1.0, 0.25 * tol)?;
    let (v2, e2) = adaptive_simpson(&tail, 1.0, upper, 0.25 * tol)?;
    let err = e1 + e2 + tail_bound(upper);
    if err > tol {
        return Err(SeriesError::Tolerance { tol, bound: err });
    }
    Ok(IntegralValue { value: v1 + v2, abs_error_bound: err })
}

const SIMPSON_MAX_DEPTH: u32 = 48;

/// Adaptive Simpson with Richardson correction; returns the value and the
/// summed local error estimates.
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64), SeriesError> {
    // Start from a uniform split so narrow features are not skipped.
    const PIECES: usize = 16;
    let h = (b - a) / PIECES as f64;
    let (mut total, mut err) = (0.0, 0.0);
    for k in 0..PIECES {
        let (x0, x1) = (a + k as f64 * h, if k + 1 == PIECES { b } else { a + (k + 1) as f64 * h });
        let (f0, f1) = (f(x0), f(x1));
        let fm = f(0.5 * (x0 + x1));
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        let (v, e) = simpson_step(f, x0, x1, f0, fm, f1, whole, tol / PIECES as f64, SIMPSON_MAX_DEPTH)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64), SeriesError> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol || (b - a) < 1e-300 {
        return Ok((left + right + diff / 15.0, diff.abs() / 15.0));
    }
    if depth == 0 {
        return Err(SeriesError::Tolerance { tol, bound: diff.abs() / 15.0 });
    }
    let (v1, e1) = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let (v2, e2) = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok((v1 + v2, e1 + e2))
}

/// Both sides of the product asymptotics at finite `(β, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductCheck {
    /// `ln Π_{j≤n} Σ_i e^{-ξ_i θ^j β}`.
    pub lhs: f64,
    /// `n ln p - r ln β - ξ₁ θ(1-θⁿ)β/(1-θ) - I(η)/ln θ`, `η_i = ξ_i - ξ₁`.
    pub rhs: f64,
}

impl ProductCheck {
    pub fn gap(&self) -> f64 {
        self.lhs - self.rhs
    }
}

pub fn product_asymptotic_check(xi: &[f64], theta: f64, beta: f64, n: u32) -> Result<ProductCheck, SeriesError> {
    check_inputs(xi, theta)?;
    if xi.len() < 2 || !(beta > 0.0) || n == 0 {
        return Err(SeriesError::InvalidInput("need p ≥ 2, β > 0 and n ≥ 1"));
    }
    let scaled: Vec<f64> = xi.iter().map(|&x| x * beta).collect();
    let lhs: f64 = (1..=n).map(|j| s_factor(&scaled, theta, j)).sum();
    let eta: Vec<f64> = xi[1..].iter().map(|&x| x - xi[0]).collect();
    let integral = i_integral(&eta, 1e-12)?.value;
    let p = xi.len();
    let rhs = n as f64 * ln(p as f64)
        - r_exponent(p, theta) * ln(beta)
        - xi[0] * theta * (1.0 - pow(theta, n as f64)) * beta / (1.0 - theta)
        - integral / ln(theta);
    Ok(ProductCheck { lhs, rhs })
}
