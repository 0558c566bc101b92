//! Max-plus spectral data: the matrices `M₁`, `M₂`, `M = M₁ ⊗ M₂`, the
//! eigenvalue `-γ`, critical cycles, the calibrated subaction and the zone
//! of a parameter set.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{dist_to_sigma, ModelParams, PointRep};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Default tolerance for ties between branches and for critical arcs.
pub const DEFAULT_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TropicalError {
    #[error("dimension mismatch: {0}x{1} times {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("graph has no cycle of finite weight")]
    NoCycle,
    #[error("entry +inf or NaN at ({0}, {1})")]
    BadEntry(usize, usize),
}

/// Dense matrix over `ℝ ∪ {-∞}`; `-∞` is `f64::NEG_INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPlusMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MaxPlusMatrix {
    /// All entries `-∞`.
    pub fn neg_infinity(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![NEG_INF; rows * cols] }
    }

    /// Zero diagonal, `-∞` elsewhere.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::neg_infinity(n, n);
        for i in 0..n {
            m.set(i, i, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TropicalError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(TropicalError::DimensionMismatch(r, c, i, row.len()));
            }
            for (k, &x) in row.iter().enumerate() {
                if x.is_nan() || x == f64::INFINITY {
                    return Err(TropicalError::BadEntry(i, k));
                }
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    pub fn set(&mut self, i: usize, k: usize, x: f64) {
        self.data[i * self.cols + k] = x;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// `c ⊗ A`: adds `c` to every finite entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x + c).collect() }
    }

    /// Entrywise maximum.
    pub fn oplus(&self, other: &Self) -> Result<Self, TropicalError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TropicalError::DimensionMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a.max(b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    /// `A ⊗ v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| (0..self.cols).map(|k| self.get(i, k) + v[k]).fold(NEG_INF, f64::max)).collect()
    }

    /// `A⁺ = A ⊕ A² ⊕ … ⊕ Aⁿ` for a square `n × n` matrix.
    pub fn plus_closure(&self) -> Result<Self, TropicalError> {
        if self.rows != self.cols {
            return Err(TropicalError::NotSquare(self.rows, self.cols));
        }
        let mut acc = self.clone();
        let mut power = self.clone();
        for _ in 1..self.rows {
            power = mp_mul(&power, self)?;
            acc = acc.oplus(&power)?;
        }
        Ok(acc)
    }

    /// Largest absolute difference between finite entries; `inf` when the
    /// `-∞` patterns differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |acc, (&a, &b)| {
            if a == NEG_INF && b == NEG_INF {
                acc
            } else if a == NEG_INF || b == NEG_INF {
                f64::INFINITY
            } else {
                acc.max((a - b).abs())
            }
        })
    }
}

/// `(A ⊗ B)_ik = max_n (A_in + B_nk)`.
pub fn mp_mul(a: &MaxPlusMatrix, b: &MaxPlusMatrix) -> Result<MaxPlusMatrix, TropicalError> {
    if a.cols != b.rows {
        return Err(TropicalError::DimensionMismatch(a.rows, a.cols, b.rows, b.cols));
    }
    let mut out = MaxPlusMatrix::neg_infinity(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..b.cols {
            let v = (0..a.cols).map(|n| a.get(i, n) + b.get(n, k)).fold(NEG_INF, f64::max);
            out.set(i, k, v);
        }
    }
    Ok(out)
}

/// `N × (N+1)`: row `j` holds `-α_{l,1}θ` in column `l ≠ j`, `-∞` on the
/// diagonal and `-α_u` in the last column.
pub fn build_m1(params: &ModelParams) -> MaxPlusMatrix {
    let n = params.n_blocks();
    let theta = params.theta();
    let mut m = MaxPlusMatrix::neg_infinity(n, n + 1);
    for j in 0..n {
        for l in 0..n {
            if l != j {
                m.set(j, l, -params.leading(l + 1) * theta);
            }
        }
        m.set(j, n, -params.alpha_u());
    }
    m
}

/// `(N+1) × N`: column `j` holds `-α_{j,1}θ²/(1-θ)` on the diagonal and
/// `-α_{j,1}θ/(1-θ)` elsewhere, last row included.
pub fn build_m2(params: &ModelParams) -> MaxPlusMatrix {
    let n = params.n_blocks();
    let (theta, t) = (params.theta(), params.t());
    let mut m = MaxPlusMatrix::neg_infinity(n + 1, n);
    for j in 0..n {
        let a = params.leading(j + 1);
        for i in 0..=n {
            m.set(i, j, if i == j { -a * theta * t } else { -a * t });
        }
    }
    m
}

/// `M = M₁ ⊗ M₂`.
pub fn build_m(params: &ModelParams) -> MaxPlusMatrix {
    mp_mul(&build_m1(params), &build_m2(params)).expect("M1 and M2 have matching shapes")
}

/// Entry formula for `M`: `m_jj = max(-α_{k,1}θ, -α_u) - α_{j,1}θ/(1-θ)`
/// with `k = 2` for `j = 1` and `k = 1` otherwise; `m_ij = -α_{j,1}θ/(1-θ)`.
pub fn build_m_closed_form(params: &ModelParams) -> MaxPlusMatrix {
    let n = params.n_blocks();
    let (theta, t) = (params.theta(), params.t());
    let mut m = MaxPlusMatrix::neg_infinity(n, n);
    for i in 0..n {
        for j in 0..n {
            let off = -params.leading(j + 1) * t;
            let v = if i == j {
                let k = if j == 0 { 2 } else { 1 };
                (-params.leading(k) * theta).max(-params.alpha_u()) + off
            } else {
                off
            };
            m.set(i, j, v);
        }
    }
    m
}

/// Maximum cycle mean (Karp, with a virtual source joined to every node).
pub fn max_cycle_mean(m: &MaxPlusMatrix) -> Result<f64, TropicalError> {
    let n = m.rows;
    if n != m.cols {
        return Err(TropicalError::NotSquare(m.rows, m.cols));
    }
    if n == 0 {
        return Err(TropicalError::NoCycle);
    }
    // d[k][v]: best weight of a k-arc walk ending at v.
    let mut d = vec![vec![NEG_INF; n]; n + 1];
    d[0].fill(0.0);
    for k in 1..=n {
        for v in 0..n {
            d[k][v] = (0..n).map(|u| d[k - 1][u] + m.get(u, v)).fold(NEG_INF, f64::max);
        }
    }
    let mut best = NEG_INF;
    for v in 0..n {
        if d[n][v] == NEG_INF {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| d[k][v] > NEG_INF)
            .map(|k| (d[n][v] - d[k][v]) / (n - k) as f64)
            .fold(f64::INFINITY, f64::min);
        best = best.max(worst);
    }
    if best == NEG_INF {
        Err(TropicalError::NoCycle)
    } else {
        Ok(best)
    }
}

/// `γ = min(min(α_{2,1}θ, α_u) + α_{1,1}t, (α_{1,1} + α_{2,1})t/2)`, `t = θ/(1-θ)`.
pub fn gamma_closed_form(params: &ModelParams) -> f64 {
    let b = Branches::of(params);
    b.average.min(b.alpha).min(b.theta)
}

/// The three candidate values whose minimum is `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branches {
    /// `(α_{1,1} + α_{2,1}) t / 2`, the two-cycle.
    pub average: f64,
    /// `α_u + α_{1,1} t`, the self-loop through `u`.
    pub alpha: f64,
    /// `α_{2,1} θ + α_{1,1} t`, the self-loop through block 2.
    pub theta: f64,
}

impl Branches {
    pub fn of(params: &ModelParams) -> Self {
        let (a1, a2) = (params.leading(1), params.leading(2));
        let t = params.t();
        Self { average: 0.5 * (a1 + a2) * t, alpha: params.alpha_u() + a1 * t, theta: a2 * params.theta() + a1 * t }
    }
}

/// Elementary cycle as a node sequence (0-based); the first node is the
/// smallest and is not repeated at the end.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cycle(pub Vec<usize>);

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            write!(f, "{}→", v + 1)?;
        }
        write!(f, "{}", self.0[0] + 1)
    }
}

/// Every elementary cycle of mean `-γ`.
pub fn critical_cycles(m: &MaxPlusMatrix, gamma: f64, tol: f64) -> Result<Vec<Cycle>, TropicalError> {
    let n = m.rows;
    if n != m.cols {
        return Err(TropicalError::NotSquare(m.rows, m.cols));
    }
    let norm = m.shifted(gamma);
    let plus = norm.plus_closure()?;
    // Kleene star A* = I ⊕ A⁺.
    let star = |j: usize, i: usize| if i == j { plus.get(j, i).max(0.0) } else { plus.get(j, i) };
    let crit = |i: usize, j: usize| {
        let w = norm.get(i, j);
        w > NEG_INF && (w + star(j, i)).abs() <= tol
    };
    let mut cycles = Vec::new();
    let mut path = Vec::new();
    let mut on_path = vec![false; n];
    for s in 0..n {
        path.push(s);
        on_path[s] = true;
        extend_cycles(s, s, &crit, n, &mut path, &mut on_path, &mut cycles);
        on_path[s] = false;
        path.pop();
    }
    cycles.sort();
    Ok(cycles)
}

fn extend_cycles<F: Fn(usize, usize) -> bool>(
    start: usize,
    at: usize,
    crit: &F,
    n: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Cycle>,
) {
    for next in start..n {
        if !crit(at, next) {
            continue;
        }
        if next == start {
            out.push(Cycle(path.clone()));
        } else if !on_path[next] {
            on_path[next] = true;
            path.push(next);
            extend_cycles(start, next, crit, n, path, on_path, out);
            path.pop();
            on_path[next] = false;
        }
    }
}

/// Values of the calibrated subaction on blocks, first rings and `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubactionValues {
    pub gamma: f64,
    /// `V` on `Σ_j`; `v_sigma[0] = 0`.
    pub v_sigma: Vec<f64>,
    /// `V` on the ring of run length 1 in block `j`.
    pub v_ring1: Vec<f64>,
    pub v_u: f64,
}

impl SubactionValues {
    /// Largest deviation from `M ⊗ V_σ = (-γ) ⊗ V_σ`, from `(V_ring1; V_u) = M₂ ⊗ V_σ`
    /// and from `V_σ + γ = M₁ ⊗ (V_ring1; V_u)`.
    pub fn residual(&self, params: &ModelParams) -> f64 {
        let m = build_m(params);
        let lhs = m.apply(&self.v_sigma);
        let mut r: f64 = lhs.iter().zip(&self.v_sigma).map(|(a, b)| (a - (b - self.gamma)).abs()).fold(0.0, f64::max);
        let ring = build_m2(params).apply(&self.v_sigma);
        let mut full = self.v_ring1.clone();
        full.push(self.v_u);
        r = ring.iter().zip(&full).map(|(a, b)| (a - b).abs()).fold(r, f64::max);
        let back = build_m1(params).apply(&full);
        back.iter().zip(&self.v_sigma).map(|(a, b)| (a - (b - self.gamma)).abs()).fold(r, f64::max)
    }
}

/// Eigenvector of `M` from the column of the lowest-index critical node of
/// `((γ) ⊗ M)⁺`, normalised so `V` vanishes on `Σ₁`.
pub fn subaction_eigenvector(params: &ModelParams) -> SubactionValues {
    let m = build_m(params);
    let gamma = -max_cycle_mean(&m).expect("M has finite entries");
    let plus = m.shifted(gamma).plus_closure().expect("M is square");
    let n = m.rows;
    let top = (0..n).map(|i| plus.get(i, i)).fold(NEG_INF, f64::max);
    let c = (0..n).find(|&i| (plus.get(i, i) - top).abs() <= DEFAULT_TIE_TOL).expect("some node is critical");
    let base = plus.get(0, c);
    let v_sigma: Vec<f64> = (0..n).map(|i| plus.get(i, c) - base).collect();
    let mut ring = build_m2(params).apply(&v_sigma);
    let v_u = ring.pop().expect("M2 has N+1 rows");
    SubactionValues { gamma, v_sigma, v_ring1: ring, v_u }
}

/// `h_j(x) = -α_{j,1} θ/(1-θ) d(x, Σ_j)`.
pub fn peierls_barrier(params: &ModelParams, j: usize, x: &PointRep) -> f64 {
    -params.leading(j) * params.t() * dist_to_sigma(params, x, j)
}

/// `V(x) = max_j (V_σ[j] + h_j(x))`.
pub fn calibrated_subaction_at(params: &ModelParams, v: &SubactionValues, x: &PointRep) -> f64 {
    v.v_sigma.iter().enumerate().map(|(j, &vs)| vs + peierls_barrier(params, j + 1, x)).fold(NEG_INF, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    Z1,
    Z2,
    Z3Only,
    Z4Only,
    Z3AndZ4,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Z1 => "Z1",
            Zone::Z2 => "Z2",
            Zone::Z3Only => "Z3only",
            Zone::Z4Only => "Z4only",
            Zone::Z3AndZ4 => "Z3andZ4",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which branches attain `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActiveBranches {
    pub average: bool,
    pub alpha: bool,
    pub theta: bool,
}

impl ActiveBranches {
    /// `average`, `alpha`, `theta` joined by `+`.
    pub fn label(&self) -> String {
        let mut s = String::new();
        for (on, name) in [(self.average, "average"), (self.alpha, "alpha"), (self.theta, "theta")] {
            if on {
                if !s.is_empty() {
                    s.push('+');
                }
                s.push_str(name);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneLabel {
    pub zone: Zone,
    pub gamma: f64,
    pub branches: ActiveBranches,
}

/// Zone from the set of branches within `tie_tol` of `γ`. The block-2
/// branch can only tie the average one when `θ > 1/2`.
pub fn zone_classify(params: &ModelParams, tie_tol: f64) -> ZoneLabel {
    let b = Branches::of(params);
    let gamma = b.average.min(b.alpha).min(b.theta);
    let branches = ActiveBranches {
        average: b.average - gamma <= tie_tol,
        alpha: b.alpha - gamma <= tie_tol,
        theta: b.theta - gamma <= tie_tol && params.theta() > 0.5,
    };
    let zone = match (branches.average, branches.alpha, branches.theta) {
        (false, _, _) => Zone::Z2,
        (true, false, false) => Zone::Z1,
        (true, true, false) => Zone::Z3Only,
        (true, false, true) => Zone::Z4Only,
        (true, true, true) => Zone::Z3AndZ4,
    };
    ZoneLabel { zone, gamma, branches }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Letter;
    use alloc::string::ToString;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn variant(theta: f64, a1: f64, a2: f64, au: f64) -> ModelParams {
        ModelParams::new(theta, vec![vec![a1, 2.0 * a1], vec![a2, 2.0 * a2]], au).unwrap()
    }

    #[test]
    fn m1_m2_for_example() {
        let p = ModelParams::example();
        let m1 = build_m1(&p);
        let want1 = MaxPlusMatrix::from_rows(&[vec![NEG_INF, -0.75, -0.3], vec![-0.5, NEG_INF, -0.3]]).unwrap();
        assert!(m1.max_abs_diff(&want1) < 1e-15);
        let want2 = MaxPlusMatrix::from_rows(&[vec![-0.5, -1.5], vec![-1.0, -0.75], vec![-1.0, -1.5]]).unwrap();
        assert!(build_m2(&p).max_abs_diff(&want2) < 1e-15);
    }

    #[test]
    fn product_matches_entry_formula() {
        let p = ModelParams::example();
        let m = build_m(&p);
        let want = MaxPlusMatrix::from_rows(&[vec![-1.3, -1.5], vec![-1.0, -1.8]]).unwrap();
        assert!(m.max_abs_diff(&want) < 1e-12);
        assert!(m.max_abs_diff(&build_m_closed_form(&p)) < 1e-12);
    }

    #[test]
    fn mp_mul_basics() {
        let a = MaxPlusMatrix::from_rows(&[vec![0.0, NEG_INF]]).unwrap();
        let b = MaxPlusMatrix::from_rows(&[vec![5.0], vec![7.0]]).unwrap();
        assert_eq!(mp_mul(&a, &b).unwrap().get(0, 0), 5.0);
        let m = build_m(&ModelParams::example());
        assert_eq!(mp_mul(&MaxPlusMatrix::identity(2), &m).unwrap(), m);
        assert_eq!(mp_mul(&m, &MaxPlusMatrix::identity(2)).unwrap(), m);
        assert!(matches!(mp_mul(&a, &a), Err(TropicalError::DimensionMismatch(..))));
    }

    #[test]
    fn cycle_means() {
        let one = MaxPlusMatrix::from_rows(&[vec![-2.5]]).unwrap();
        assert!(close(max_cycle_mean(&one).unwrap(), -2.5));
        let m = MaxPlusMatrix::from_rows(&[vec![-1.0, -2.0], vec![-0.5, -3.0]]).unwrap();
        assert!(close(max_cycle_mean(&m).unwrap(), -1.0));
        assert!(close(max_cycle_mean(&build_m(&ModelParams::example())).unwrap(), -1.25));
        let acyclic = MaxPlusMatrix::from_rows(&[vec![NEG_INF, 1.0], vec![NEG_INF, NEG_INF]]).unwrap();
        assert_eq!(max_cycle_mean(&acyclic), Err(TropicalError::NoCycle));
    }

    #[test]
    fn gamma_values() {
        let p = ModelParams::example();
        assert!(close(gamma_closed_form(&p), 1.25));
        assert!(close(gamma_closed_form(&p.with_alpha_u(0.1).unwrap()), 1.1));
        assert!(gamma_closed_form(&p) > p.leading(1) * p.t());
    }

    #[test]
    fn critical_cycles_of_examples() {
        let p = ModelParams::example();
        let m = build_m(&p);
        let cyc = critical_cycles(&m, 1.25, DEFAULT_TIE_TOL).unwrap();
        assert_eq!(cyc, vec![Cycle(vec![0, 1])]);
        assert_eq!(cyc[0].to_string(), "1→2→1");
        let q = p.with_alpha_u(0.1).unwrap();
        let cyc = critical_cycles(&build_m(&q), gamma_closed_form(&q), DEFAULT_TIE_TOL).unwrap();
        assert_eq!(cyc, vec![Cycle(vec![0])]);
    }

    #[test]
    fn eigenvector_and_barrier() {
        let p = ModelParams::example();
        let v = subaction_eigenvector(&p);
        assert_eq!(v.v_sigma[0], 0.0);
        assert!(v.residual(&p) < 1e-12);
        let t = p.t();
        let vu = (0..2).map(|j| v.v_sigma[j] - p.leading(j + 1) * t).fold(NEG_INF, f64::max);
        assert!(close(v.v_u, vu));

        let b11 = Letter::Block { block: 1, letter: 1 };
        let x = PointRep::ring(vec![b11]);
        assert!(close(peierls_barrier(&p, 1, &x), -0.5));
        assert!(close(peierls_barrier(&p, 2, &PointRep::ring(vec![Letter::U])), -1.5));
        assert_eq!(peierls_barrier(&p, 1, &PointRep::in_sigma(vec![], 1)), 0.0);

        let direct = (0.0 - 0.5f64).max(v.v_sigma[1] - 1.5);
        assert!(close(calibrated_subaction_at(&p, &v, &x), direct));
        assert!(close(calibrated_subaction_at(&p, &v, &x), v.v_ring1[0]));
        assert_eq!(calibrated_subaction_at(&p, &v, &PointRep::in_sigma(vec![], 1)), 0.0);
        for j in 1..=2 {
            let s = PointRep::in_sigma(vec![], j);
            assert!(close(calibrated_subaction_at(&p, &v, &s), v.v_sigma[j - 1]));
        }
    }

    #[test]
    fn zones_of_reference_points() {
        let z = zone_classify(&ModelParams::example(), DEFAULT_TIE_TOL);
        assert_eq!(z.zone, Zone::Z1);
        assert!(close(z.gamma, 1.25));
        assert_eq!(z.branches.label(), "average");

        let z3 = zone_classify(&variant(0.5, 1.0, 1.5, 0.25), DEFAULT_TIE_TOL);
        assert_eq!(z3.zone, Zone::Z3Only);
        assert_eq!(z3.branches.label(), "average+alpha");

        let z4 = zone_classify(&variant(0.75, 1.0, 2.0, 2.0), DEFAULT_TIE_TOL);
        assert_eq!(z4.zone, Zone::Z4Only);

        let z34 = zone_classify(&variant(0.75, 1.0, 2.0, 1.5), DEFAULT_TIE_TOL);
        assert_eq!(z34.zone, Zone::Z3AndZ4);

        let z2 = zone_classify(&ModelParams::example().with_alpha_u(0.1).unwrap(), DEFAULT_TIE_TOL);
        assert_eq!(z2.zone, Zone::Z2);
        assert_eq!(z2.branches.label(), "alpha");
    }
}
