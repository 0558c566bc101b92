//! Pressure `P(β)` from the scalar renewal equation
//! `Σ_j F_j/(1+F_j) + e^{-P-α_u β} = 1` with `F_j = F(P, β α_j)`, and the
//! prefactor `g(β) = (P - ln p) e^{γβ}`.
//!
//! The unknown is `ln δ` with `δ = P - ln p`. In log form the equation
//! reads `R(ln δ) = 0` with
//! `R = ln(Σ_{j≥2} F_j/(1+F_j) + e^{-P-α_u β}) + ln(1+F_1)`,
//! which is strictly decreasing and keeps full relative precision in `δ`
//! when `δ` is far below `ln p · 2^{-52}`.

use alloc::vec::Vec;

use crate::math::{bisect_decreasing, exp, ln, softplus, sqrt, LogAccumulator};
use crate::model::ModelParams;
use crate::series::{i_integral, r_exponent, Gap, Kernel, SeriesError, SeriesValue};
use crate::tropical::{gamma_closed_form, zone_classify, Zone, ZoneLabel};

/// Default tolerance on the log-form residual.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Relative accuracy requested from every series evaluation.
pub const SERIES_TOL: f64 = 1e-15;

const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PressureError {
    #[error("beta must be finite and nonnegative (got {0})")]
    InvalidBeta(f64),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("no sign change found below ln delta = {0}")]
    Bracket(f64),
    #[error("residual {residual:e} above tolerance in bracket [{lo}, {hi}]")]
    NotConverged { residual: f64, lo: f64, hi: f64 },
}

/// Solved pressure at one `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSolution {
    pub beta: f64,
    /// `P(β)`.
    pub pressure: f64,
    /// `ln(P - ln p)`.
    pub ln_gap: f64,
    /// `Σ_j F_j/(1+F_j) + e^{-P-α_u β} - 1` in linear scale.
    pub residual: f64,
    /// `R(ln δ)` at the returned root.
    pub log_residual: f64,
    pub f_blocks: Vec<SeriesValue>,
    pub gamma: f64,
    /// `ln g = ln δ + γβ`.
    pub ln_g: f64,
    pub g: f64,
    /// Final bisection bracket in `ln δ`.
    pub bracket: (f64, f64),
}

impl PressureSolution {
    pub fn gap(&self) -> Gap {
        Gap::from_ln(self.ln_gap)
    }

    /// `P - ln p`.
    pub fn p_minus_log_p(&self) -> f64 {
        exp(self.ln_gap)
    }

    pub fn terms_used(&self) -> usize {
        self.f_blocks.iter().map(|f| f.terms_used).max().unwrap_or(0)
    }

    /// `ln(β^r g(β))`.
    pub fn ln_beta_r_g(&self, params: &ModelParams) -> f64 {
        self.ln_g + r_exponent(params.p(), params.theta()) * ln(self.beta)
    }
}

/// Per-block kernels at fixed `β`.
pub(crate) struct Blocks {
    pub kernels: Vec<Kernel>,
    pub ln_p: f64,
    pub log_u_weight: f64,
}

impl Blocks {
    pub fn new(params: &ModelParams, beta: f64) -> Result<Self, PressureError> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(PressureError::InvalidBeta(beta));
        }
        let theta = params.theta();
        let kernels = params
            .blocks()
            .iter()
            .map(|row| {
                let z: Vec<f64> = row.iter().map(|a| a * beta).collect();
                Kernel::new(&z, theta)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { kernels, ln_p: ln(params.p() as f64), log_u_weight: -params.alpha_u() * beta })
    }

    pub fn f_values(&self, gap: Gap) -> Result<Vec<SeriesValue>, SeriesError> {
        self.kernels.iter().map(|k| k.f(gap, SERIES_TOL)).collect()
    }

    /// `ln ν_u = -P - α_u β`.
    pub fn log_nu_u(&self, gap: Gap) -> f64 {
        -(self.ln_p + gap.value()) + self.log_u_weight
    }

    fn log_residual(&self, gap: Gap) -> Result<f64, SeriesError> {
        let fs = self.f_values(gap)?;
        let mut acc = LogAccumulator::new();
        for f in &fs[1..] {
            acc.add(f.log_value - softplus(f.log_value));
        }
        acc.add(self.log_nu_u(gap));
        Ok(acc.value() + softplus(fs[0].log_value))
    }
}

/// Log-form residual `R` at pressure `P`; positive below the root.
pub fn log_residual(params: &ModelParams, beta: f64, pressure: f64) -> Result<f64, PressureError> {
    let gap = Gap::from_pressure(pressure, params.p())?;
    Ok(Blocks::new(params, beta)?.log_residual(gap)?)
}

/// `Σ_j F_j/(1+F_j) + e^{-P-α_u β} - 1`.
pub fn residual(params: &ModelParams, beta: f64, pressure: f64) -> Result<f64, PressureError> {
    let gap = Gap::from_pressure(pressure, params.p())?;
    let blocks = Blocks::new(params, beta)?;
    Ok(linear_residual(&blocks, gap)?)
}

fn linear_residual(blocks: &Blocks, gap: Gap) -> Result<f64, SeriesError> {
    let fs = blocks.f_values(gap)?;
    let s: f64 = fs.iter().map(|f| exp(f.log_value - softplus(f.log_value))).sum();
    Ok(s + exp(blocks.log_nu_u(gap)) - 1.0)
}

/// Root of the renewal equation by bisection in `ln δ`.
pub fn solve_pressure(params: &ModelParams, beta: f64, tol: f64) -> Result<PressureSolution, PressureError> {
    let blocks = Blocks::new(params, beta)?;
    let eval = |l: f64| blocks.log_residual(Gap::from_ln(l));

    let n = params.n_blocks() as f64;
    let p = params.p() as f64;
    // At P = ln(Np+1) the residual is ≤ 0, with equality only at β = 0.
    let mut hi = ln(ln(n * p + 1.0) - ln(p));
    let mut step = 1e-9;
    while eval(hi)? > 0.0 {
        hi += step;
        step *= 2.0;
        if step > 1.0 {
            return Err(PressureError::Bracket(hi));
        }
    }
    let mut width = 1.0;
    let mut lo = hi - width;
    while eval(lo)? <= 0.0 {
        width *= 2.0;
        lo = hi - width;
        if width > 1e7 {
            return Err(PressureError::Bracket(lo));
        }
    }
    let (lo, hi) = bisect_decreasing(lo, hi, 0.0, MAX_BISECTIONS, eval)?;
    let (r_lo, r_hi) = (eval(lo)?, eval(hi)?);
    let (root, log_res) = if r_lo.abs() <= r_hi.abs() { (lo, r_lo) } else { (hi, r_hi) };
    if !(log_res.abs() <= tol) {
        return Err(PressureError::NotConverged { residual: log_res, lo, hi });
    }
    let gap = Gap::from_ln(root);
    let f_blocks = blocks.f_values(gap)?;
    let residual = linear_residual(&blocks, gap)?;
    let gamma = gamma_closed_form(params);
    let ln_g = root + gamma * beta;
    Ok(PressureSolution {
        beta,
        pressure: blocks.ln_p + gap.value(),
        ln_gap: root,
        residual,
        log_residual: log_res,
        f_blocks,
        gamma,
        ln_g,
        g: exp(ln_g),
        bracket: (lo, hi),
    })
}

/// Which set of asymptotic constants to use for the `β → ∞` limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LimitFormula {
    /// Constants from the pointwise asymptotics of the renewal series,
    /// `c_j ≈ √p e^{-I_j} β^{-r} e^{-α_{j,1} t β}`.
    #[default]
    Renewal,
    /// The closed forms `e^{-(I₁+I₂)/2}/p`, the quadratic for the
    /// `α`-branch tie and the increasing scalar equations for `θ`-branch
    /// ties, with weights `(1, ρ²)/(1+ρ²)`.
    Nominal,
}

impl LimitFormula {
    pub fn as_str(self) -> &'static str {
        match self {
            LimitFormula::Renewal => "renewal",
            LimitFormula::Nominal => "nominal",
        }
    }
}

/// `I_j = I(η_j)/ln θ` for blocks 1 and 2, with `η_j = α_{j,i} - α_{j,1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockIntegrals {
    pub i1: f64,
    pub i2: f64,
    pub r: f64,
}

impl BlockIntegrals {
    pub fn of(params: &ModelParams) -> Result<Self, SeriesError> {
        let ln_theta = ln(params.theta());
        let one = |j: usize| -> Result<f64, SeriesError> {
            let row = params.block(j);
            let eta: Vec<f64> = row[1..].iter().map(|a| a - row[0]).collect();
            Ok(i_integral(&eta, 1e-12)?.value / ln_theta)
        };
        Ok(Self { i1: one(1)?, i2: one(2)?, r: r_exponent(params.p(), params.theta()) })
    }
}

/// Predicted limit of `β^r g(β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GLimit {
    pub zone: ZoneLabel,
    pub formula: LimitFormula,
    /// `lim β^r g(β)`; `None` when no `β^r`-scale limit is predicted.
    pub beta_r_g: Option<f64>,
    pub integrals: BlockIntegrals,
}

impl GLimit {
    pub fn reciprocal(&self) -> Option<f64> {
        self.beta_r_g.map(|g| 1.0 / g)
    }
}

/// Renewal prediction: `G² - (k K₁/p) G - K₁K₂ = 0` with `K_j = √p e^{-I_j}`
/// and `k` the number of extra tied branches. Returns `(G, x)` with
/// `x = G/√(K₁K₂)`.
fn renewal_root(ints: &BlockIntegrals, p: f64, k: f64) -> (f64, f64) {
    let k1 = sqrt(p) * exp(-ints.i1);
    let k2 = sqrt(p) * exp(-ints.i2);
    let a = sqrt(k1 / k2) / p;
    let x = 0.5 * (k * a + sqrt(k * k * a * a + 4.0));
    (x * sqrt(k1 * k2), x)
}

fn tied_branches(zone: Zone) -> Option<f64> {
    match zone {
        Zone::Z2 => None,
        Zone::Z1 => Some(0.0),
        Zone::Z3Only | Zone::Z4Only => Some(1.0),
        Zone::Z3AndZ4 => Some(2.0),
    }
}

/// Root of an increasing map on `(0, ∞)`.
fn increasing_root<F: Fn(f64) -> f64>(f: F, target: f64) -> f64 {
    let mut hi = 1.0;
    while f(hi) < target {
        hi *= 2.0;
    }
    let mut lo = hi;
    while f(lo) > target && lo > 1e-300 {
        lo *= 0.5;
    }
    let (lo, hi) =
        bisect_decreasing::<_, core::convert::Infallible>(lo, hi, 0.0, 2000, |x| Ok(target - f(x))).unwrap_or((lo, hi));
    0.5 * (lo + hi)
}

/// Nominal `lim 1/(β^r g)` by zone.
fn nominal_reciprocal(ints: &BlockIntegrals, p: f64, zone: Zone) -> Option<f64> {
    let (i1, i2) = (ints.i1, ints.i2);
    match zone {
        Zone::Z2 => None,
        Zone::Z1 => Some(p * exp(0.5 * (i1 + i2))),
        Zone::Z3Only => Some(exp(i2) * (sqrt(4.0 * p * p * exp(i1 - i2) + 1.0) - 1.0) / 2.0),
        Zone::Z4Only => Some(increasing_root(|x| exp(-i1) * x * (exp(-i2) * x).max(1.0), p * p)),
        Zone::Z3AndZ4 => Some(increasing_root(|x| exp(-i1) * x * (1.0 + (exp(-i2) * x).max(1.0)), p * p)),
    }
}

/// Zone-dependent limit of `β^r g(β)`.
pub fn g_limit_prediction(params: &ModelParams, formula: LimitFormula, tie_tol: f64) -> Result<GLimit, SeriesError> {
    let zone = zone_classify(params, tie_tol);
    let ints = BlockIntegrals::of(params)?;
    let p = params.p() as f64;
    let beta_r_g = match formula {
        LimitFormula::Renewal => tied_branches(zone.zone).map(|k| renewal_root(&ints, p, k).0),
        LimitFormula::Nominal => nominal_reciprocal(&ints, p, zone.zone).map(|x| 1.0 / x),
    };
    Ok(GLimit { zone, formula, beta_r_g, integrals: ints })
}

/// Predicted limit of `μ(O₁)/μ(O₂)` and the matching block weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitWeights {
    pub w1: f64,
    pub w2: f64,
    /// `ρ²` of the nominal constants (`p²` in the average-only zone).
    pub rho2: Option<f64>,
    /// Weights under the reading `μ(O₁)/μ(O₂) = ρ²`.
    pub alt: Option<(f64, f64)>,
}

pub(crate) fn limit_weights(
    params: &ModelParams,
    formula: LimitFormula,
    zone: Zone,
    ints: &BlockIntegrals,
) -> LimitWeights {
    let p = params.p() as f64;
    if zone == Zone::Z2 {
        return LimitWeights { w1: 1.0, w2: 0.0, rho2: None, alt: None };
    }
    match formula {
        LimitFormula::Renewal => {
            let k = tied_branches(zone).unwrap_or(0.0);
            let (_, x) = renewal_root(ints, p, k);
            let ratio = x * x;
            LimitWeights { w1: ratio / (1.0 + ratio), w2: 1.0 / (1.0 + ratio), rho2: None, alt: None }
        }
        LimitFormula::Nominal => {
            let rho2 = match zone {
                Zone::Z1 => p * p,
                Zone::Z3Only => {
                    let s = sqrt(4.0 * p * p * exp(ints.i1 - ints.i2) + 1.0) - 1.0;
                    4.0 * exp(ints.i1 - ints.i2) / (s * s)
                }
                _ => {
                    let g = 1.0 / nominal_reciprocal(ints, p, zone).unwrap_or(f64::NAN);
                    exp(ints.i1 + ints.i2) * g * g
                }
            };
            LimitWeights {
                w1: 1.0 / (1.0 + rho2),
                w2: rho2 / (1.0 + rho2),
                rho2: Some(rho2),
                alt: Some((rho2 / (1.0 + rho2), 1.0 / (1.0 + rho2))),
            }
        }
    }
}

/// `ln(P - ln p)` at large `β` from the predicted `β^r g` limit.
pub fn asymptotic_ln_gap(params: &ModelParams, limit: &GLimit, beta: f64) -> Option<f64> {
    limit.beta_r_g.map(|g| ln(g) - limit.integrals.r * ln(beta) - gamma_closed_form(params) * beta)
}

/// `n(β) = ⌈4 ln β / |ln θ|⌉`, used only as a diagnostic depth.
pub fn diagnostic_depth(beta: f64, theta: f64) -> u32 {
    let v = 4.0 * ln(beta) / (-ln(theta));
    if v <= 1.0 {
        1
    } else {
        libm::ceil(v) as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn example() -> ModelParams {
        ModelParams::example()
    }

    #[test]
    fn zero_temperature_anchor() {
        for (n, p) in [(2usize, 2usize), (2, 3), (3, 2), (4, 2)] {
            let alpha: Vec<Vec<f64>> =
                (0..n).map(|j| (0..p).map(|i| 1.0 + j as f64 + 0.5 * i as f64).collect()).collect();
            let m = ModelParams::new(0.5, alpha, 0.3).unwrap();
            let s = solve_pressure(&m, 0.0, DEFAULT_TOL).unwrap();
            let want = ln((n * p + 1) as f64);
            assert!((s.pressure - want).abs() < 1e-12, "{} vs {}", s.pressure, want);
        }
    }

    #[test]
    fn residual_signs() {
        let m = example();
        let top = ln(5.0);
        assert!(residual(&m, 0.0, top).unwrap().abs() < 1e-14);
        assert!(residual(&m, 3.0, top).unwrap() < 0.0);
        assert!(residual(&m, 3.0, ln(2.0) + 1e-12).unwrap() > 0.0);
        assert!(matches!(residual(&m, 3.0, ln(2.0)), Err(PressureError::Series(SeriesError::Divergent { .. }))));
    }

    #[test]
    fn reference_pressures() {
        let m = example();
        let s = solve_pressure(&m, 1.0, DEFAULT_TOL).unwrap();
        assert!((s.pressure - 1.072_963_492_760_229_4).abs() < 1e-12);
        let s10 = solve_pressure(&m, 10.0, DEFAULT_TOL).unwrap();
        assert!((s10.p_minus_log_p() / 3.764e-7 - 1.0).abs() < 1e-3);
        let s30 = solve_pressure(&m, 30.0, DEFAULT_TOL).unwrap();
        assert!((s30.p_minus_log_p() / 1.508e-18 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn solution_invariants() {
        let m = example();
        for beta in [0.5, 5.0, 40.0, 200.0] {
            let s = solve_pressure(&m, beta, DEFAULT_TOL).unwrap();
            assert!(s.pressure > ln(2.0) || s.ln_gap < -36.0);
            assert!(s.pressure <= ln(5.0));
            assert!(s.g > 0.0);
            assert!(s.log_residual.abs() <= DEFAULT_TOL);
            assert!(s.residual.abs() < 1e-13);
            assert!(s.bracket.0 <= s.ln_gap && s.ln_gap <= s.bracket.1);
        }
    }

    #[test]
    fn tighter_tolerance_moves_little() {
        let m = example();
        let a = solve_pressure(&m, 7.0, 1e-12).unwrap();
        let b = solve_pressure(&m, 7.0, 1e-13).unwrap();
        assert!((a.pressure - b.pressure).abs() < 1e-12);
    }

    #[test]
    fn predictions_with_zero_integrals() {
        let ints = BlockIntegrals { i1: 0.0, i2: 0.0, r: 1.0 };
        assert!((1.0 / nominal_reciprocal(&ints, 2.0, Zone::Z1).unwrap() - 0.5).abs() < 1e-15);
        let z3 = nominal_reciprocal(&ints, 2.0, Zone::Z3Only).unwrap();
        assert!((z3 - (sqrt(17.0) - 1.0) / 2.0).abs() < 1e-14);
        let z4 = nominal_reciprocal(&ints, 2.0, Zone::Z4Only).unwrap();
        assert!((z4 - 2.0).abs() < 1e-12);
        let (g, x) = renewal_root(&ints, 2.0, 0.0);
        assert!((x - 1.0).abs() < 1e-15 && (g - sqrt(2.0)).abs() < 1e-14);
    }

    #[test]
    fn example_predictions() {
        let m = example();
        let nominal = g_limit_prediction(&m, LimitFormula::Nominal, 1e-12).unwrap();
        assert!((nominal.beta_r_g.unwrap() - 0.2887).abs() < 1e-4);
        let renewal = g_limit_prediction(&m, LimitFormula::Renewal, 1e-12).unwrap();
        assert!((renewal.beta_r_g.unwrap() - 0.816_496_58).abs() < 1e-7);
        let z2 = g_limit_prediction(&m.with_alpha_u(0.1).unwrap(), LimitFormula::Renewal, 1e-12).unwrap();
        assert_eq!(z2.beta_r_g, None);
    }

    #[test]
    fn nominal_z3_weights_at_zero_integrals() {
        let m = ModelParams::new(0.5, vec![vec![1.0, 2.0], vec![1.5, 3.0]], 0.25).unwrap();
        let ints = BlockIntegrals { i1: 0.0, i2: 0.0, r: 1.0 };
        let w = limit_weights(&m, LimitFormula::Nominal, Zone::Z3Only, &ints);
        let want = 4.0 / (18.0 - 2.0 * sqrt(17.0));
        assert!((w.rho2.unwrap() - want).abs() < 1e-13);
        let z1 = limit_weights(&m, LimitFormula::Nominal, Zone::Z1, &ints);
        assert!((z1.w1 - 0.2).abs() < 1e-15 && (z1.w2 - 0.8).abs() < 1e-15);
        let z2 = limit_weights(&m, LimitFormula::Nominal, Zone::Z2, &ints);
        assert_eq!((z2.w1, z2.w2), (1.0, 0.0));
    }

    #[test]
    fn depth_diagnostic() {
        assert_eq!(diagnostic_depth(25.0, 0.5), 19);
        assert_eq!(diagnostic_depth(0.5, 0.5), 1);
    }
}
