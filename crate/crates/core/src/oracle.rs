//! Finite truncated chain used as an independent check.
//!
//! Capping the run length at `L` makes the potential depend only on the
//! state `(block, min(run, L))` or `U`, so the transfer operator acts
//! exactly on `NL + 1` states. Its Perron root `λ_L` satisfies
//! `|ln λ_L - P(β)| ≤ β α_max θ^L`.
//!
//! The Perron root is located by bisection on `s > λ_L`, which holds iff
//! every pivot of `sI - T` is positive. Elimination runs in double-double
//! arithmetic with `s = p + e` carried through the near-singular pivots, so
//! gaps far below `f64` resolution relative to `p` are still resolved.

use alloc::vec;
use alloc::vec::Vec;

use twofloat::TwoFloat;

use crate::math::{exp, exp_m1, ln, ln_1p, log_sum_exp, pow, sqrt};
use crate::model::{Letter, ModelParams};

type Dd = TwoFloat;

/// Double-double quotient by long division. Only products by `f64` and
/// sums are used, both of which are accurate to double-double precision.
fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    Dd::from(q1) + q2 + q3
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("truncation depth must be at least 1")]
    InvalidDepth,
    #[error("beta must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("chain needs at least one block with at least one letter")]
    EmptyChain,
    #[error("could not bracket the Perron root")]
    Bracket,
    #[error("chain weights underflow; no positive finite eigenvector")]
    Degenerate,
    #[error("eigen residual {residual:e} above tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("power iteration did not converge in {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Chain state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum State {
    /// Leading run of length `run` (capped) in block `block`, both 1-based.
    Run {
        block: usize,
        run: usize,
    },
    U,
}

/// Transfer matrix of the run-length-capped potential.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChain {
    theta: f64,
    alpha: Vec<Vec<f64>>,
    alpha_u: f64,
    beta: f64,
    depth: usize,
    /// `r_j(k) = Σ_i (1 - e^{-β α_{j,i} θ^k})` for `k = 1..=L`.
    deficit: Vec<Vec<f64>>,
    u_weight: f64,
}

pub fn build_chain(params: &ModelParams, beta: f64, depth: usize) -> Result<TruncatedChain, OracleError> {
    TruncatedChain::from_parts(params.theta(), params.blocks().to_vec(), params.alpha_u(), beta, depth)
}

impl TruncatedChain {
    /// Builds a chain without the model's ordering constraints, so that
    /// degenerate shapes such as a single block are available.
    pub fn from_parts(
        theta: f64,
        alpha: Vec<Vec<f64>>,
        alpha_u: f64,
        beta: f64,
        depth: usize,
    ) -> Result<Self, OracleError> {
        if depth == 0 {
            return Err(OracleError::InvalidDepth);
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(OracleError::InvalidBeta(beta));
        }
        let p = alpha.first().map_or(0, Vec::len);
        if p == 0 || alpha.iter().any(|b| b.len() != p) {
            return Err(OracleError::EmptyChain);
        }
        let deficit = alpha
            .iter()
            .map(|block| {
                (1..=depth)
                    .map(|k| {
                        let tk = pow(theta, k as f64);
                        block.iter().map(|a| -exp_m1(-beta * a * tk)).sum()
                    })
                    .collect()
            })
            .collect();
        let u_weight = exp(-beta * alpha_u);
        Ok(Self { theta, alpha, alpha_u, beta, depth, deficit, u_weight })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_blocks(&self) -> usize {
        self.alpha.len()
    }

    pub fn p(&self) -> usize {
        self.alpha[0].len()
    }

    pub fn n_states(&self) -> usize {
        self.n_blocks() * self.depth + 1
    }

    pub fn index(&self, s: State) -> usize {
        match s {
            State::Run { block, run } => (block - 1) * self.depth + (run.min(self.depth) - 1),
            State::U => self.n_blocks() * self.depth,
        }
    }

    pub fn state(&self, index: usize) -> State {
        if index == self.n_blocks() * self.depth {
            State::U
        } else {
            State::Run { block: index / self.depth + 1, run: index % self.depth + 1 }
        }
    }

    /// Weight of prepending letter `i` of block `j` to a point whose new run is `run`.
    pub fn letter_weight(&self, j: usize, i: usize, run: usize) -> f64 {
        exp(-self.beta * self.alpha[j - 1][i - 1] * pow(self.theta, run.min(self.depth) as f64))
    }

    /// `ρ_j(k) = Σ_i e^{-β α_{j,i} θ^k}` for `1 ≤ k ≤ L`.
    pub fn block_weight(&self, j: usize, k: usize) -> f64 {
        self.p() as f64 - self.deficit[j - 1][k - 1]
    }

    fn block_weight_dd(&self, j: usize, k: usize) -> Dd {
        Dd::from(self.p() as f64) - self.deficit[j - 1][k - 1]
    }

    pub fn u_weight(&self) -> f64 {
        self.u_weight
    }

    /// Sparse rows: `(Tφ)(s) = Σ w φ(s')` over `(s', w)` in row `s`.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let n = self.n_blocks();
        let l = self.depth;
        let u = self.index(State::U);
        let mut rows = Vec::with_capacity(self.n_states());
        for j in 1..=n {
            for a in 1..=l {
                let next = (a + 1).min(l);
                let mut row = vec![(self.index(State::Run { block: j, run: next }), self.block_weight(j, next))];
                for m in (1..=n).filter(|&m| m != j) {
                    row.push((self.index(State::Run { block: m, run: 1 }), self.block_weight(m, 1)));
                }
                row.push((u, self.u_weight));
                rows.push(row);
            }
        }
        let mut row: Vec<(usize, f64)> =
            (1..=n).map(|m| (self.index(State::Run { block: m, run: 1 }), self.block_weight(m, 1))).collect();
        row.push((u, self.u_weight));
        rows.push(row);
        rows
    }

    /// Dense matrix, for small chains.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let size = self.n_states();
        self.rows()
            .into_iter()
            .map(|row| {
                let mut dense = vec![0.0; size];
                for (c, w) in row {
                    dense[c] += w;
                }
                dense
            })
            .collect()
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        self.rows().iter().map(|row| row.iter().map(|&(c, w)| w * phi[c]).sum()).collect()
    }

    pub fn apply_transpose(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states()];
        for (r, row) in self.rows().iter().enumerate() {
            for &(c, w) in row {
                out[c] += nu[r] * w;
            }
        }
        out
    }

    fn row_sum_bounds(&self) -> (f64, f64) {
        self.rows()
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum::<f64>())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
    }

    /// Eliminates `(p + e) I - T`: each block chain from the cap down to
    /// run 2, then the dense core of run-1 states and `U`.
    fn factor(&self, e: Dd) -> Factor {
        let n = self.n_blocks();
        let l = self.depth;
        let s = Dd::from(self.p() as f64) + e;
        let mut kappa = Vec::with_capacity(n);
        let mut d_cap = Vec::with_capacity(n);
        let mut positive = true;
        for j in 1..=n {
            let dl = e + self.deficit[j - 1][l - 1];
            positive &= dl > Dd::from(0.0);
            // κ_a: multiple of the shared core row that row (j, a) carries after elimination.
            let mut k = vec![Dd::from(1.0); l];
            for a in (1..l).rev() {
                let d_next = if a + 1 == l { dl } else { s };
                k[a - 1] = Dd::from(1.0) + div(self.block_weight_dd(j, a + 1) * k[a], d_next);
            }
            kappa.push(k);
            d_cap.push(dl);
        }
        let mut core = vec![vec![Dd::from(0.0); n + 1]; n + 1];
        for j in 0..n {
            core[j][j] = if l == 1 { d_cap[j] } else { s };
            for m in (0..n).filter(|&m| m != j) {
                core[j][m] = -(kappa[j][0] * self.block_weight_dd(m + 1, 1));
            }
            core[j][n] = -(kappa[j][0] * self.u_weight);
            core[n][j] = -self.block_weight_dd(j + 1, 1);
        }
        core[n][n] = s - self.u_weight;
        for k in 0..=n {
            let piv = core[k][k];
            if !(piv > Dd::from(0.0)) {
                positive = false;
                break;
            }
            for i in k + 1..=n {
                let f = div(core[i][k], piv);
                for c in k..=n {
                    let v = core[k][c];
                    core[i][c] -= f * v;
                }
            }
        }
        Factor { e, s, kappa, d_cap, core, above: positive }
    }

    fn above(&self, e: Dd) -> bool {
        self.factor(e).above
    }

    /// Perron root and eigenvectors.
    pub fn leading_triple(&self, tol: f64) -> Result<LeadingTriple, OracleError> {
        let p = self.p() as f64;
        let (row_lo, row_hi) = self.row_sum_bounds();
        let mut e_hi = (row_hi - p).max(f64::MIN_POSITIVE) * 2.0;
        while !self.above(Dd::from(e_hi)) {
            e_hi *= 2.0;
            if !e_hi.is_finite() {
                return Err(OracleError::Bracket);
            }
        }
        let zero = Dd::from(0.0);
        let (mut lo, mut hi) = if self.above(zero) {
            // λ ≤ p
            (Dd::from((row_lo - p).min(0.0) * 2.0 - 1.0), zero)
        } else {
            let mut hi = e_hi;
            let mut lo = e_hi;
            loop {
                lo *= exp(-8.0);
                if lo < 1e-300 {
                    return Err(OracleError::Bracket);
                }
                if !self.above(Dd::from(lo)) {
                    break;
                }
                hi = lo;
            }
            (Dd::from(lo), Dd::from(hi))
        };
        // Geometric steps while the bracket spans decades, then arithmetic
        // steps down to double-double adjacency.
        for _ in 0..600 {
            let mid = if lo.hi() > 0.0 && hi.hi() > 4.0 * lo.hi() {
                Dd::from(sqrt(lo.hi() * hi.hi()))
            } else {
                (lo + hi) / 2.0
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if self.above(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let e = hi;
        let factor = self.factor(e);
        let right = self.right_vector(&factor);
        let left = self.left_vector(&factor);
        let e64 = f64::from(e);
        let lambda = p + e64;
        let right_residual = residual(&self.apply(&right), &right, lambda);
        let left_residual = residual(&self.apply_transpose(&left), &left, lambda);
        let finite = lambda > 0.0 && right.iter().chain(&left).all(|x| x.is_finite());
        if !finite {
            return Err(OracleError::Degenerate);
        }
        let worst = right_residual.max(left_residual);
        if !(worst <= tol) {
            return Err(OracleError::Residual { residual: worst, tol });
        }
        Ok(LeadingTriple {
            lambda,
            lambda_minus_p: e64,
            ln_lambda: ln(p) + ln_1p(e64 / p),
            ln_gap: ln_1p(e64 / p),
            right,
            left,
            right_residual,
            left_residual,
        })
    }

    /// Right vector with `h(U) = 1` by back-substitution, then scaled to max 1.
    fn right_vector(&self, f: &Factor) -> Vec<f64> {
        let n = self.n_blocks();
        let l = self.depth;
        let mut core = vec![Dd::from(0.0); n + 1];
        core[n] = Dd::from(1.0);
        for k in (0..n).rev() {
            let mut acc = Dd::from(0.0);
            for c in k + 1..=n {
                acc += f.core[k][c] * core[c];
            }
            core[k] = -div(acc, f.core[k][k]);
        }
        let mut h = vec![Dd::from(0.0); self.n_states()];
        for j in 0..n {
            let d1 = if l == 1 { f.d_cap[j] } else { f.s };
            // κ_1 τ_j = d_1 h(j, 1)
            let tau = div(d1 * core[j], f.kappa[j][0]);
            for a in 1..=l {
                let d = if a == l { f.d_cap[j] } else { f.s };
                h[j * l + a - 1] = div(f.kappa[j][a - 1] * tau, d);
            }
        }
        // Re-derive h(U) from its own row. When U barely feeds the blocks the
        // run-1 values are conditioned by 1/(λ - λ_blocks), while this row is not.
        let inflow = (0..n).fold(Dd::from(0.0), |acc, m| acc + self.block_weight_dd(m + 1, 1) * h[m * l]);
        h[n * l] = div(inflow, f.s - self.u_weight);
        let hv: Vec<f64> = h.into_iter().map(f64::from).collect();
        let max = hv.iter().copied().fold(0.0, f64::max);
        hv.into_iter().map(|x| x / max).collect()
    }

    /// Left vector from the forward recursion along each block, summing to 1.
    fn left_vector(&self, f: &Factor) -> Vec<f64> {
        let n = self.n_blocks();
        let l = self.depth;
        let mut nu = vec![Dd::from(0.0); self.n_states()];
        for j in 0..n {
            let mut q = vec![Dd::from(1.0); l];
            for a in 2..=l {
                let d = if a == l { f.d_cap[j] } else { f.s };
                q[a - 1] = div(q[a - 2] * self.block_weight_dd(j + 1, a), d);
            }
            let pi = q.iter().fold(Dd::from(0.0), |acc, &x| acc + x);
            let rho1 = self.block_weight_dd(j + 1, 1);
            let head = if l == 1 { div(rho1, f.s) } else { div(rho1, f.s + rho1 * pi) };
            for a in 0..l {
                nu[j * l + a] = head * q[a];
            }
        }
        nu[n * l] = div(Dd::from(self.u_weight), f.s);
        let total = nu.iter().fold(Dd::from(0.0), |acc, &x| acc + x);
        nu.into_iter().map(|x| f64::from(div(x, total))).collect()
    }

    /// `βS(m | s)` for the word `m` prepended to a point in state `s`.
    pub fn word_weight(&self, m: &[Letter], s: State) -> f64 {
        let n = m.len();
        let mut total = 0.0;
        for k in 0..n {
            total -= match m[k] {
                Letter::U => self.alpha_u,
                Letter::Block { block, letter } => {
                    let mut run = m[k..].iter().take_while(|c| c.block_of() == Some(block)).count();
                    if k + run == n {
                        if let State::Run { block: b, run: a } = s {
                            if b == block {
                                run += a;
                            }
                        }
                    }
                    self.alpha[block - 1][letter - 1] * pow(self.theta, run.min(self.depth) as f64)
                }
            };
        }
        self.beta * total
    }

    /// State of `m x` for `x` in state `s`.
    pub fn prefixed_state(&self, m: &[Letter], s: State) -> State {
        match m.first() {
            None => s,
            Some(Letter::U) => State::U,
            Some(Letter::Block { block, .. }) => {
                let mut run = m.iter().take_while(|c| c.block_of() == Some(*block)).count();
                if run == m.len() {
                    if let State::Run { block: b, run: a } = s {
                        if b == *block {
                            run += a;
                        }
                    }
                }
                State::Run { block: *block, run: run.min(self.depth) }
            }
        }
    }
}

struct Factor {
    e: Dd,
    s: Dd,
    kappa: Vec<Vec<Dd>>,
    d_cap: Vec<Dd>,
    core: Vec<Vec<Dd>>,
    above: bool,
}

impl core::fmt::Debug for Factor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Factor").field("e", &self.e).field("above", &self.above).finish()
    }
}

fn residual(tv: &[f64], v: &[f64], lambda: f64) -> f64 {
    tv.iter().zip(v).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max)
}

/// Perron data of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadingTriple {
    pub lambda: f64,
    /// `λ - p`, resolved below the spacing of `f64` near `p`.
    pub lambda_minus_p: f64,
    pub ln_lambda: f64,
    /// `ln λ - ln p`.
    pub ln_gap: f64,
    /// Right eigenvector, max entry 1.
    pub right: Vec<f64>,
    /// Left eigenvector, sums to 1.
    pub left: Vec<f64>,
    pub right_residual: f64,
    pub left_residual: f64,
}

pub fn leading_triple(chain: &TruncatedChain, tol: f64) -> Result<LeadingTriple, OracleError> {
    chain.leading_triple(tol)
}

/// Result of plain power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub lambda: f64,
    pub right: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Power iteration from the all-ones vector with max-norm renormalisation.
/// Converges geometrically at rate `|λ₂/λ₁|`, which tends to 1 as `β` grows.
pub fn power_iteration(chain: &TruncatedChain, tol: f64, max_iter: usize) -> Result<PowerIteration, OracleError> {
    let rows = chain.rows();
    let mut v = vec![1.0; chain.n_states()];
    let mut res = f64::INFINITY;
    for it in 1..=max_iter {
        let tv: Vec<f64> = rows.iter().map(|row| row.iter().map(|&(c, w)| w * v[c]).sum()).collect();
        let num: f64 = tv.iter().zip(&v).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|b| b * b).sum();
        let lambda = num / den;
        res = residual(&tv, &v, lambda);
        let max = tv.iter().copied().fold(0.0, f64::max);
        if res < tol {
            return Ok(PowerIteration { lambda, right: v, iterations: it, residual: res });
        }
        v = tv.into_iter().map(|x| x / max).collect();
    }
    Err(OracleError::NotConverged { iterations: max_iter, residual: res })
}

/// `β α_max θ^L`.
pub fn error_bound(params: &ModelParams, beta: f64, depth: usize) -> f64 {
    beta * params.alpha_max() * pow(params.theta(), depth as f64)
}

/// Block masses of the chain's eigenmeasure and Gibbs measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMeasures {
    pub nu_o: Vec<f64>,
    pub nu_u: f64,
    pub mu_o: Vec<f64>,
    pub mu_u: f64,
    ln_lambda: f64,
    left: Vec<f64>,
    /// Right vector scaled so that `Σ h ν = 1`.
    h: Vec<f64>,
}

pub fn chain_measures(chain: &TruncatedChain, triple: &LeadingTriple) -> ChainMeasures {
    let n = chain.n_blocks();
    let l = chain.depth();
    let norm: f64 = triple.right.iter().zip(&triple.left).map(|(h, v)| h * v).sum();
    let h: Vec<f64> = triple.right.iter().map(|x| x / norm).collect();
    let block_sum = |v: &[f64], j: usize| v[j * l..(j + 1) * l].iter().sum::<f64>();
    let mu: Vec<f64> = h.iter().zip(&triple.left).map(|(a, b)| a * b).collect();
    ChainMeasures {
        nu_o: (0..n).map(|j| block_sum(&triple.left, j)).collect(),
        nu_u: triple.left[n * l],
        mu_o: (0..n).map(|j| block_sum(&mu, j)).collect(),
        mu_u: mu[n * l],
        ln_lambda: triple.ln_lambda,
        left: triple.left.clone(),
        h,
    }
}

impl ChainMeasures {
    fn log_terms(&self, chain: &TruncatedChain, m: &[Letter], with_h: bool) -> f64 {
        let terms: Vec<f64> = (0..chain.n_states())
            .filter(|&i| self.left[i] > 0.0)
            .map(|i| {
                let s = chain.state(i);
                let mut t = ln(self.left[i]) + chain.word_weight(m, s);
                if with_h {
                    t += ln(self.h[chain.index(chain.prefixed_state(m, s))]);
                }
                t
            })
            .collect();
        log_sum_exp(&terms) - m.len() as f64 * self.ln_lambda
    }

    /// `ν_L[m]` by weighted path sums.
    pub fn nu_cylinder(&self, chain: &TruncatedChain, m: &[Letter]) -> f64 {
        exp(self.log_terms(chain, m, false))
    }

    /// `μ_L[m] = ∫_{[m]} h dν_L`.
    pub fn mu_cylinder(&self, chain: &TruncatedChain, m: &[Letter]) -> f64 {
        exp(self.log_terms(chain, m, true))
    }
}

/// One oracle run.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub beta: f64,
    pub depth: usize,
    pub lambda: f64,
    pub lambda_minus_p: f64,
    pub ln_lambda: f64,
    pub ln_gap: f64,
    pub bound: f64,
    pub measures: ChainMeasures,
    pub residual: f64,
}

pub const ORACLE_TOL: f64 = 1e-10;

pub fn oracle_report(params: &ModelParams, beta: f64, depth: usize, tol: f64) -> Result<OracleReport, OracleError> {
    let chain = build_chain(params, beta, depth)?;
    let triple = chain.leading_triple(tol)?;
    let measures = chain_measures(&chain, &triple);
    Ok(OracleReport {
        beta,
        depth,
        lambda: triple.lambda,
        lambda_minus_p: triple.lambda_minus_p,
        ln_lambda: triple.ln_lambda,
        ln_gap: triple.ln_gap,
        bound: error_bound(params, beta, depth),
        residual: triple.right_residual.max(triple.left_residual),
        measures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{mu_blocks, nu_blocks, nu_cylinder};
    use crate::model::block_words;
    use crate::pressure::{solve_pressure, DEFAULT_TOL};

    fn example_chain(beta: f64, depth: usize) -> TruncatedChain {
        build_chain(&ModelParams::example(), beta, depth).unwrap()
    }

    #[test]
    fn long_division_keeps_double_double_precision() {
        let third = div(Dd::from(1.0), Dd::from(3.0));
        assert!(f64::from(third * 3.0 - 1.0).abs() < 1e-31);
        let a = Dd::from(3.0) + 0.006_998_378_089_423_3;
        let b = Dd::from(0.075) + 1e-19;
        assert!(f64::from(div(a, b) * b - a).abs() < 1e-30);
    }

    #[test]
    fn zero_beta_chain() {
        let c = example_chain(0.0, 7);
        assert_eq!(c.n_states(), 15);
        for row in c.dense() {
            assert_eq!(row.iter().sum::<f64>(), 5.0);
        }
        let t = c.leading_triple(1e-12).unwrap();
        assert!((t.lambda - 5.0).abs() < 1e-14);
        assert!(t.right.iter().all(|&x| (x - 1.0).abs() < 1e-13));
        let m = chain_measures(&c, &t);
        for j in 0..2 {
            assert!((m.nu_o[j] - 0.4).abs() < 1e-13 && (m.mu_o[j] - 0.4).abs() < 1e-13);
        }
        let word = [Letter::Block { block: 2, letter: 1 }, Letter::U, Letter::Block { block: 1, letter: 2 }];
        assert!((m.nu_cylinder(&c, &word) - 1.0 / 125.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_single_block() {
        let c = TruncatedChain::from_parts(0.5, vec![vec![1.0, 2.0]], 0.3, 2.0, 1).unwrap();
        assert_eq!(c.n_states(), 2);
        let t = c.leading_triple(1e-12).unwrap();
        // 2x2 matrix [[ρ, w], [ρ, w]] has λ = ρ + w.
        let expected = c.block_weight(1, 1) + c.u_weight();
        assert!((t.lambda - expected).abs() < 1e-14);
        assert_eq!(TruncatedChain::from_parts(0.5, vec![vec![1.0]], 0.3, 1.0, 0), Err(OracleError::InvalidDepth));
    }

    #[test]
    fn weights_decrease_along_the_run() {
        let c = example_chain(3.0, 12);
        for j in 1..=2 {
            for k in 1..12 {
                assert!(c.block_weight(j, k) < c.block_weight(j, k + 1));
                assert!(c.letter_weight(j, 1, k) < c.letter_weight(j, 1, k + 1));
            }
        }
        for row in c.dense() {
            assert!(row.iter().all(|&w| (0.0..=1.0 * 2.0).contains(&w)));
        }
    }

    #[test]
    fn agrees_with_power_iteration() {
        for beta in [0.5, 2.0, 5.0] {
            let c = example_chain(beta, 30);
            let t = c.leading_triple(1e-12).unwrap();
            let pi = power_iteration(&c, 1e-13, 200_000).unwrap();
            assert!((t.lambda - pi.lambda).abs() < 1e-11, "{beta}: {} {}", t.lambda, pi.lambda);
            for (a, b) in t.right.iter().zip(&pi.right) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn left_vector_matches_transposed_chain() {
        let c = example_chain(4.0, 9);
        let t = c.leading_triple(1e-12).unwrap();
        let dense = c.dense();
        let size = c.n_states();
        let transposed: Vec<Vec<f64>> = (0..size).map(|i| (0..size).map(|k| dense[k][i]).collect()).collect();
        let mut v = vec![1.0 / size as f64; size];
        for _ in 0..20_000 {
            let w: Vec<f64> = transposed.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
            let s: f64 = w.iter().sum();
            v = w.into_iter().map(|x| x / s).collect();
        }
        for (a, b) in t.left.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_within_bound() {
        let m = ModelParams::example();
        for beta in [0.0, 1.0, 5.0, 10.0, 20.0, 30.0] {
            let sol = solve_pressure(&m, beta, DEFAULT_TOL).unwrap();
            let r = oracle_report(&m, beta, 60, ORACLE_TOL).unwrap();
            assert!((r.ln_lambda - sol.pressure).abs() <= r.bound + 1e-9, "{beta}");
            if beta > 0.0 {
                let rel = (r.ln_gap - sol.gap().value()).abs() / sol.gap().value();
                assert!(rel < 1e-6 || beta >= 20.0, "{beta}: {rel}");
            }
        }
    }

    #[test]
    fn deeper_truncation_changes_little() {
        let m = ModelParams::example();
        let a = oracle_report(&m, 10.0, 40, ORACLE_TOL).unwrap();
        let b = oracle_report(&m, 10.0, 50, ORACLE_TOL).unwrap();
        assert!((a.ln_lambda - b.ln_lambda).abs() < error_bound(&m, 10.0, 40));
        assert!(error_bound(&m, 10.0, 40) > error_bound(&m, 10.0, 50));
        assert!((error_bound(&m, 10.0, 40) - 30.0 * pow(2.0, -40.0)).abs() < 1e-25);
        assert_eq!(error_bound(&m, 0.0, 40), 0.0);
    }

    #[test]
    fn lambda_decreases_in_beta() {
        let mut prev = f64::INFINITY;
        for beta in [0.0, 0.5, 1.0, 3.0, 8.0, 20.0] {
            let t = example_chain(beta, 80).leading_triple(1e-10).unwrap();
            assert!(t.lambda < prev);
            assert!(t.lambda > 2.0);
            prev = t.lambda;
        }
    }

    #[test]
    fn measures_agree_with_series_at_depth() {
        let m = ModelParams::example();
        for (beta, depth) in [(10.0, 60), (20.0, 80), (30.0, 120)] {
            let sol = solve_pressure(&m, beta, DEFAULT_TOL).unwrap();
            let nu = nu_blocks(&m, &sol);
            let mu = mu_blocks(&m, &sol).unwrap();
            let r = oracle_report(&m, beta, depth, ORACLE_TOL).unwrap();
            for j in 0..2 {
                assert!((nu.o[j] - r.measures.nu_o[j]).abs() < 1e-7, "{beta} nu {j}");
                assert!((mu.o[j] - r.measures.mu_o[j]).abs() < 1e-7, "{beta} mu {j}");
            }
            assert!((r.ln_gap - sol.gap().value()).abs() / sol.gap().value() < 1e-6);
        }
    }

    #[test]
    fn cylinders_agree_with_series() {
        let m = ModelParams::example();
        let sol = solve_pressure(&m, 8.0, DEFAULT_TOL).unwrap();
        let c = build_chain(&m, 8.0, 80).unwrap();
        let t = c.leading_triple(ORACLE_TOL).unwrap();
        let cm = chain_measures(&c, &t);
        for j in 1..=2 {
            for len in 1..=3 {
                for w in block_words(&m, j, len) {
                    let a = nu_cylinder(&m, &sol, &w).unwrap();
                    let b = cm.nu_cylinder(&c, &w);
                    assert!((a - b).abs() / a < 1e-8, "{a} {b}");
                }
            }
        }
        let total: f64 = [Letter::Block { block: 1, letter: 1 }, Letter::Block { block: 1, letter: 2 }]
            .iter()
            .chain([Letter::Block { block: 2, letter: 1 }, Letter::Block { block: 2, letter: 2 }, Letter::U].iter())
            .map(|&l| cm.mu_cylinder(&c, &[l]))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((cm.mu_cylinder(&c, &[Letter::U]) - cm.mu_u).abs() < 1e-14);
    }
}
