//! Eigenfunction, eigenmeasure and Gibbs weights at a solved pressure.
//!
//! The eigenfunction is normalised by `H(u) = 1`. Then
//! `τ_j = e^P/(1+F_j)`, `H` on `Σ_j` is `τ_j/(e^P - p)` and on the ring of
//! run length `n` in block `j` it is `(1 + F(P, β α_j θⁿ))/(1 + F_j)`.
//! Block masses are `ν(O_j) = F_j/(1+F_j)`, `ν[u] = e^{-P-α_u β}` and,
//! before normalisation, `μ(O_j) ∝ G_j/(1+F_j)²`, `μ[u] ∝ ν[u]`.

use alloc::vec::Vec;

use crate::math::{exp, ln, ln_exp_m1_of_exp, log_add_exp, log_sum_exp, softplus};
use crate::model::{birkhoff_weight, leading_run, word_block, Letter, MixedWord, ModelParams, PointRep, RunLength};
use crate::pressure::{limit_weights, BlockIntegrals, LimitFormula, PressureSolution, SERIES_TOL};
use crate::series::{Kernel, SeriesError};
use crate::tropical::{zone_classify, ZoneLabel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    MixedWord(#[from] MixedWord),
    #[error("log-scale comparison needs beta > 0")]
    ZeroBeta,
    #[error("state is not a ring, block point or u-point")]
    UntrackedState,
}

fn kernel(params: &ModelParams, j: usize, scale: f64) -> Result<Kernel, SeriesError> {
    let z: Vec<f64> = params.block(j).iter().map(|a| a * scale).collect();
    Kernel::new(&z, params.theta())
}

/// Eigenfunction data in log form.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenData {
    pub beta: f64,
    pub pressure: f64,
    pub ln_gap: f64,
    /// `ln F_j`.
    pub log_f: Vec<f64>,
    /// `ln τ_j`.
    pub log_tau: Vec<f64>,
    /// `ln H` on `Σ_j`.
    pub log_h_sigma: Vec<f64>,
    /// `ln H(u) = 0`.
    pub log_h_u: f64,
}

impl EigenData {
    pub fn tau(&self, j: usize) -> f64 {
        exp(self.log_tau[j - 1])
    }

    pub fn h_sigma(&self, j: usize) -> f64 {
        exp(self.log_h_sigma[j - 1])
    }

    /// `ln H` on the ring of run length `n ≥ 1` in block `j`.
    pub fn log_h_ring(&self, params: &ModelParams, j: usize, n: usize) -> Result<f64, SeriesError> {
        let k = kernel(params, j, self.beta * libm::pow(params.theta(), n as f64))?;
        let f = k.f(crate::series::Gap::from_ln(self.ln_gap), SERIES_TOL)?;
        Ok(softplus(f.log_value) - softplus(self.log_f[j - 1]))
    }

    pub fn h_ring(&self, params: &ModelParams, j: usize, n: usize) -> Result<f64, SeriesError> {
        Ok(exp(self.log_h_ring(params, j, n)?))
    }

    /// `ln H(x)` for a tracked state.
    pub fn log_h_at(&self, params: &ModelParams, x: &PointRep) -> Result<f64, MeasureError> {
        match leading_run(x) {
            None if x.starts_with_u() => Ok(self.log_h_u),
            None => Err(MeasureError::UntrackedState),
            Some((j, RunLength::Infinite)) => Ok(self.log_h_sigma[j - 1]),
            Some((j, RunLength::Finite(n))) => Ok(self.log_h_ring(params, j, n)?),
        }
    }
}

pub fn eigen_data(params: &ModelParams, solution: &PressureSolution) -> EigenData {
    let p = params.p() as f64;
    let log_f: Vec<f64> = solution.f_blocks.iter().map(|f| f.log_value).collect();
    let log_tau: Vec<f64> = log_f.iter().map(|&lf| solution.pressure - softplus(lf)).collect();
    // e^P - p = p(e^δ - 1)
    let log_denominator = ln(p) + ln_exp_m1_of_exp(solution.ln_gap);
    let log_h_sigma = log_tau.iter().map(|&lt| lt - log_denominator).collect();
    EigenData {
        beta: solution.beta,
        pressure: solution.pressure,
        ln_gap: solution.ln_gap,
        log_f,
        log_tau,
        log_h_sigma,
        log_h_u: 0.0,
    }
}

/// Eigenmeasure of the blocks and of `[u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NuBlocks {
    pub o: Vec<f64>,
    pub u: f64,
    /// `ln(1 - ν(O_j)) = -ln(1 + F_j)`.
    pub log_complement: Vec<f64>,
}

pub fn nu_blocks(params: &ModelParams, solution: &PressureSolution) -> NuBlocks {
    let o = solution.f_blocks.iter().map(|f| exp(f.log_value - softplus(f.log_value))).collect();
    let log_complement = solution.f_blocks.iter().map(|f| -softplus(f.log_value)).collect();
    let u = exp(-solution.pressure - params.alpha_u() * solution.beta);
    NuBlocks { o, u, log_complement }
}

/// `ln ν[m]` for a single-block word `m`.
pub fn log_nu_cylinder(params: &ModelParams, solution: &PressureSolution, m: &[Letter]) -> Result<f64, MeasureError> {
    let j = word_block(m)?;
    let s = solution.beta * birkhoff_weight(params, m)?;
    let k = kernel(params, j, solution.beta)?;
    let fp = k.f_prefixed(solution.gap(), s, SERIES_TOL)?;
    let lf = solution.f_blocks[j - 1].log_value;
    Ok(-(m.len() as f64) * solution.pressure + log_add_exp(s, fp.log_value) - softplus(lf))
}

/// `ν[m] = e^{-nP} (e^{βS(m)} + F_S)/(1 + F_j)` with `F_S` the prefixed series.
pub fn nu_cylinder(params: &ModelParams, solution: &PressureSolution, m: &[Letter]) -> Result<f64, MeasureError> {
    Ok(exp(log_nu_cylinder(params, solution, m)?))
}

/// Gibbs measure of the blocks and of `[u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuBlocks {
    pub o: Vec<f64>,
    pub u: f64,
    /// `μ(O₁)/μ(O₂)`.
    pub ratio_12: f64,
    /// Unnormalised log masses, blocks first and `[u]` last.
    pub log_unnormalised: Vec<f64>,
}

pub fn mu_blocks(params: &ModelParams, solution: &PressureSolution) -> Result<MuBlocks, MeasureError> {
    let gap = solution.gap();
    let mut logs = Vec::with_capacity(params.n_blocks() + 1);
    for j in 1..=params.n_blocks() {
        let g = kernel(params, j, solution.beta)?.g(gap, SERIES_TOL)?;
        logs.push(g.log_value - 2.0 * softplus(solution.f_blocks[j - 1].log_value));
    }
    logs.push(-solution.pressure - params.alpha_u() * solution.beta);
    let total = log_sum_exp(&logs);
    let mut o: Vec<f64> = logs.iter().map(|&l| exp(l - total)).collect();
    let u = o.pop().expect("u entry present");
    Ok(MuBlocks { o, u, ratio_12: exp(logs[0] - logs[1]), log_unnormalised: logs })
}

/// `μ` of the rings of depth `1..=l_max` in block `j`, on the same
/// normalisation as [`mu_blocks`]. Their sum tends to `μ(O_j)`.
pub fn mu_rings(
    params: &ModelParams,
    solution: &PressureSolution,
    j: usize,
    l_max: usize,
) -> Result<Vec<f64>, MeasureError> {
    let total = log_sum_exp(&mu_blocks(params, solution)?.log_unnormalised);
    let eig = eigen_data(params, solution);
    let k = kernel(params, j, solution.beta)?;
    let delta = solution.gap().value();
    let lf = softplus(eig.log_f[j - 1]);
    (1..=l_max)
        .map(|l| {
            // ν(run exactly l) = e^{-lδ} w_l / (1 + F_j) and H is constant on the ring.
            let log_w = k.log_weight(l.min(k.len()));
            let log_nu = -(l as f64) * delta + log_w - lf;
            Ok(exp(log_nu + eig.log_h_ring(params, j, l)? - total))
        })
        .collect()
}

/// Predicted zero-temperature block weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedLimit {
    pub zone: ZoneLabel,
    pub formula: LimitFormula,
    /// Weight of the measure of maximal entropy on `Σ₁`.
    pub w1: f64,
    /// Weight of the measure of maximal entropy on `Σ₂`.
    pub w2: f64,
    pub rho2: Option<f64>,
    /// Weights with the ratio read the other way round.
    pub alt: Option<(f64, f64)>,
}

pub fn predicted_limit(
    params: &ModelParams,
    formula: LimitFormula,
    tie_tol: f64,
) -> Result<PredictedLimit, SeriesError> {
    let zone = zone_classify(params, tie_tol);
    let ints = BlockIntegrals::of(params)?;
    let w = limit_weights(params, formula, zone.zone, &ints);
    Ok(PredictedLimit { zone, formula, w1: w.w1, w2: w.w2, rho2: w.rho2, alt: w.alt })
}

/// `(1/β) ln H(x)` shifted so that `Σ₁` maps to zero.
pub fn subaction_from_h(
    params: &ModelParams,
    solution: &PressureSolution,
    states: &[PointRep],
) -> Result<Vec<f64>, MeasureError> {
    if !(solution.beta > 0.0) {
        return Err(MeasureError::ZeroBeta);
    }
    let eig = eigen_data(params, solution);
    let shift = eig.log_h_sigma[0];
    states.iter().map(|x| Ok((eig.log_h_at(params, x)? - shift) / solution.beta)).collect()
}

/// Everything reported for one `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub beta: f64,
    pub nu: NuBlocks,
    pub mu: MuBlocks,
    pub predicted: PredictedLimit,
}

pub fn measure_report(
    params: &ModelParams,
    solution: &PressureSolution,
    formula: LimitFormula,
    tie_tol: f64,
) -> Result<MeasureReport, MeasureError> {
    Ok(MeasureReport {
        beta: solution.beta,
        nu: nu_blocks(params, solution),
        mu: mu_blocks(params, solution)?,
        predicted: predicted_limit(params, formula, tie_tol)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::block_words;
    use crate::pressure::{solve_pressure, DEFAULT_TOL};
    use alloc::vec;

    fn solved(beta: f64) -> (ModelParams, PressureSolution) {
        let m = ModelParams::example();
        let s = solve_pressure(&m, beta, DEFAULT_TOL).unwrap();
        (m, s)
    }

    #[test]
    fn zero_potential_is_uniform() {
        let (m, s) = solved(0.0);
        let nu = nu_blocks(&m, &s);
        assert!((nu.o[0] - 0.4).abs() < 1e-14 && (nu.o[1] - 0.4).abs() < 1e-14);
        assert!((nu.u - 0.2).abs() < 1e-14);
        let mu = mu_blocks(&m, &s).unwrap();
        assert!((mu.o[0] - 0.4).abs() < 1e-13 && (mu.u - 0.2).abs() < 1e-13);
        let total = exp(log_sum_exp(&mu.log_unnormalised));
        assert!((total - 1.0).abs() < 1e-13);
        let eig = eigen_data(&m, &s);
        assert!((eig.tau(1) - 3.0).abs() < 1e-12);
        assert!((eig.h_sigma(2) - 1.0).abs() < 1e-12);
        assert!((eig.h_ring(&m, 1, 3).unwrap() - 1.0).abs() < 1e-12);
        for len in 1..=3 {
            for w in block_words(&m, 1, len) {
                let v = nu_cylinder(&m, &s, &w).unwrap();
                assert!((v - libm::pow(5.0, -(len as f64))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reference_weights_at_beta_10() {
        let (m, s) = solved(10.0);
        let nu = nu_blocks(&m, &s);
        assert!((nu.o[0] - 0.923_458_128_8).abs() < 1e-9);
        assert!((nu.o[1] - 0.051_648_346_36).abs() < 1e-10);
        let mu = mu_blocks(&m, &s).unwrap();
        assert!((mu.o[0] - 0.591_856_389_2).abs() < 1e-9);
        assert!((mu.o[1] - 0.408_143_532_3).abs() < 1e-9);
    }

    #[test]
    fn masses_sum_to_one() {
        for beta in [0.3, 4.0, 25.0, 120.0] {
            let (m, s) = solved(beta);
            let nu = nu_blocks(&m, &s);
            let mu = mu_blocks(&m, &s).unwrap();
            assert!((nu.o.iter().sum::<f64>() + nu.u - 1.0).abs() < 1e-10);
            assert!((mu.o.iter().sum::<f64>() + mu.u - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eigen_identities() {
        let (m, s) = solved(6.0);
        let eig = eigen_data(&m, &s);
        // τ_j (1 + F_j) = e^P for every block.
        for j in 1..=2 {
            let v = eig.log_tau[j - 1] + softplus(eig.log_f[j - 1]);
            assert!((v - s.pressure).abs() < 1e-13);
        }
        // τ_j = Σ_{l≠j} ρ_l(1) H(l,1) + e^{-βα_u} H(u)
        let theta = m.theta();
        for j in 1..=2usize {
            let mut rhs = exp(-s.beta * m.alpha_u());
            for l in (1..=2usize).filter(|&l| l != j) {
                let rho: f64 = m.block(l).iter().map(|a| exp(-s.beta * a * theta)).sum();
                rhs += rho * eig.h_ring(&m, l, 1).unwrap();
            }
            assert!((eig.tau(j) - rhs).abs() / rhs < 1e-12, "{} {}", eig.tau(j), rhs);
        }
        // Rings converge to the block value.
        let far = eig.h_ring(&m, 2, 200).unwrap();
        assert!((far - eig.h_sigma(2)).abs() / eig.h_sigma(2) < 1e-12);
    }

    #[test]
    fn selection_of_first_block() {
        let (m, s) = solved(40.0);
        assert!(nu_blocks(&m, &s).o[0] >= 0.999);
        let mut prev = 0.0;
        for beta in [5.0, 10.0, 20.0, 30.0] {
            let (_, s) = solved(beta);
            let v = nu_blocks(&m, &s).o[0];
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn cylinders_flatten_on_first_block() {
        let (m, s) = solved(60.0);
        for len in 1..=3 {
            for w in block_words(&m, 1, len) {
                let v = nu_cylinder(&m, &s, &w).unwrap() * libm::pow(2.0, len as f64);
                assert!((v - 1.0).abs() < 0.02, "{v}");
            }
        }
        let mixed = [Letter::Block { block: 1, letter: 1 }, Letter::U];
        assert!(matches!(nu_cylinder(&m, &s, &mixed), Err(MeasureError::MixedWord(_))));
    }

    #[test]
    fn subaction_normalisation() {
        let (m, s) = solved(50.0);
        let states = vec![PointRep::in_sigma(vec![], 1), PointRep::ring(vec![Letter::U])];
        let v = subaction_from_h(&m, &s, &states).unwrap();
        assert_eq!(v[0], 0.0);
        let (_, s0) = solved(0.0);
        assert_eq!(subaction_from_h(&m, &s0, &states), Err(MeasureError::ZeroBeta));
    }

    #[test]
    fn rings_decompose_block_mass() {
        let (m, s) = solved(1.0);
        let mu = mu_blocks(&m, &s).unwrap();
        for j in 1..=2 {
            let rings = mu_rings(&m, &s, j, 600).unwrap();
            let mut partial = 0.0;
            let mut prev_gap = f64::INFINITY;
            for (l, r) in rings.iter().enumerate() {
                partial += r;
                let gap = mu.o[j - 1] - partial;
                if l % 50 == 49 {
                    assert!(gap <= prev_gap.max(1e-14));
                    prev_gap = gap;
                }
            }
            assert!((partial - mu.o[j - 1]).abs() < 1e-10, "{j}: {partial} {}", mu.o[j - 1]);
        }
    }

    #[test]
    fn predicted_limits() {
        let m = ModelParams::example();
        let nominal = predicted_limit(&m, LimitFormula::Nominal, 1e-12).unwrap();
        assert!((nominal.w1 - 0.2).abs() < 1e-15 && (nominal.w2 - 0.8).abs() < 1e-15);
        let renewal = predicted_limit(&m, LimitFormula::Renewal, 1e-12).unwrap();
        assert!((renewal.w1 - 0.5).abs() < 1e-12);
        let z2 = predicted_limit(&m.with_alpha_u(0.1).unwrap(), LimitFormula::Nominal, 1e-12).unwrap();
        assert_eq!((z2.w1, z2.w2), (1.0, 0.0));
    }
}
