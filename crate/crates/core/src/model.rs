//! Alphabet, parameters, metric and potential.
//!
//! The shift runs on `N·p + 1` symbols: `p` letters for each of the `N`
//! blocks plus one extra letter `U`. Block and letter indices are 1-based
//! throughout the public API.

use alloc::vec::Vec;
use core::fmt;

use crate::math::pow;

/// Unvalidated parameter set, as read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub n_blocks: usize,
    pub p: usize,
    pub theta: f64,
    /// `alpha[j - 1][i - 1]` is the slope of letter `i` in block `j`.
    pub alpha: Vec<Vec<f64>>,
    pub alpha_u: f64,
}

/// One violated constraint of a [`ParamSet`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("N must be at least 2 (got {0})")]
    TooFewBlocks(usize),
    #[error("p must be at least 2 (got {0})")]
    TooFewLetters(usize),
    #[error("theta outside (0,1)")]
    ThetaOutOfRange,
    #[error("alpha has {found} blocks, expected {expected}")]
    BlockCount { expected: usize, found: usize },
    #[error("block {block} has {found} letters, expected {expected}")]
    LetterCount { block: usize, expected: usize, found: usize },
    #[error("alpha.{block}.{letter} must be positive and finite")]
    NonPositiveAlpha { block: usize, letter: usize },
    #[error("alpha_u must be positive and finite")]
    NonPositiveAlphaU,
    #[error("first gap not strict in block {0}")]
    FirstGapNotStrict(usize),
    #[error("letters not sorted in block {block} at letter {letter}")]
    LettersNotSorted { block: usize, letter: usize },
    #[error("leading slopes not ordered between blocks {0} and {1}")]
    LeadingOrder(usize, usize),
}

impl ParamSet {
    /// Every violated invariant; empty when the set is valid.
    pub fn validate(&self) -> Vec<ValidationError> {
        let mut errs = Vec::new();
        if self.n_blocks < 2 {
            errs.push(ValidationError::TooFewBlocks(self.n_blocks));
        }
        if self.p < 2 {
            errs.push(ValidationError::TooFewLetters(self.p));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            errs.push(ValidationError::ThetaOutOfRange);
        }
        if !(self.alpha_u > 0.0 && self.alpha_u.is_finite()) {
            errs.push(ValidationError::NonPositiveAlphaU);
        }
        if self.alpha.len() != self.n_blocks {
            errs.push(ValidationError::BlockCount { expected: self.n_blocks, found: self.alpha.len() });
        }
        let mut shape_ok = self.alpha.len() == self.n_blocks;
        for (j, row) in self.alpha.iter().enumerate() {
            if row.len() != self.p {
                shape_ok = false;
                errs.push(ValidationError::LetterCount { block: j + 1, expected: self.p, found: row.len() });
            }
            for (i, &a) in row.iter().enumerate() {
                if !(a > 0.0 && a.is_finite()) {
                    errs.push(ValidationError::NonPositiveAlpha { block: j + 1, letter: i + 1 });
                }
            }
            if row.len() >= 2 && !(row[0] < row[1]) {
                errs.push(ValidationError::FirstGapNotStrict(j + 1));
            }
            for i in 2..row.len() {
                if !(row[i - 1] <= row[i]) {
                    errs.push(ValidationError::LettersNotSorted { block: j + 1, letter: i + 1 });
                }
            }
        }
        if shape_ok && self.p >= 1 {
            for j in 1..self.alpha.len() {
                let (prev, cur) = (self.alpha[j - 1][0], self.alpha[j][0]);
                let ok = if j <= 2 { prev < cur } else { prev <= cur };
                if !ok {
                    errs.push(ValidationError::LeadingOrder(j, j + 1));
                }
            }
        }
        errs
    }
}

/// All violations found while building [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl core::error::Error for ValidationErrors {}

/// A validated parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    set: ParamSet,
}

impl TryFrom<ParamSet> for ModelParams {
    type Error = ValidationErrors;

    fn try_from(set: ParamSet) -> Result<Self, Self::Error> {
        let errs = set.validate();
        if errs.is_empty() {
            Ok(Self { set })
        } else {
            Err(ValidationErrors(errs))
        }
    }
}

impl ModelParams {
    pub fn new(theta: f64, alpha: Vec<Vec<f64>>, alpha_u: f64) -> Result<Self, ValidationErrors> {
        let n_blocks = alpha.len();
        let p = alpha.first().map_or(0, Vec::len);
        Self::try_from(ParamSet { n_blocks, p, theta, alpha, alpha_u })
    }

    /// `N = 2, p = 2, θ = 1/2, α = [[1, 2], [1.5, 3]], α_u = 0.3`.
    pub fn example() -> Self {
        Self::new(0.5, alloc::vec![alloc::vec![1.0, 2.0], alloc::vec![1.5, 3.0]], 0.3)
            .expect("example parameters are valid")
    }

    pub fn n_blocks(&self) -> usize {
        self.set.n_blocks
    }

    pub fn p(&self) -> usize {
        self.set.p
    }

    pub fn theta(&self) -> f64 {
        self.set.theta
    }

    pub fn alpha_u(&self) -> f64 {
        self.set.alpha_u
    }

    /// Slopes of block `j` (1-based).
    pub fn block(&self, j: usize) -> &[f64] {
        &self.set.alpha[j - 1]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.set.alpha
    }

    /// Leading slope `α_{(j-1)p+1}` of block `j`.
    pub fn leading(&self, j: usize) -> f64 {
        self.set.alpha[j - 1][0]
    }

    pub fn alpha_max(&self) -> f64 {
        self.set.alpha.iter().flatten().copied().fold(self.set.alpha_u, f64::max)
    }

    /// `θ/(1-θ)`.
    pub fn t(&self) -> f64 {
        self.set.theta / (1.0 - self.set.theta)
    }

    pub fn param_set(&self) -> &ParamSet {
        &self.set
    }

    /// Copy with `α_u` replaced.
    pub fn with_alpha_u(&self, alpha_u: f64) -> Result<Self, ValidationErrors> {
        let mut set = self.set.clone();
        set.alpha_u = alpha_u;
        Self::try_from(set)
    }
}

/// A symbol of the alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    Block { block: usize, letter: usize },
    U,
}

impl Letter {
    pub fn block_of(self) -> Option<usize> {
        match self {
            Letter::Block { block, .. } => Some(block),
            Letter::U => None,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Block { block, letter } => write!(f, "u{block}.{letter}"),
            Letter::U => f.write_str("u"),
        }
    }
}

/// How a [`PointRep`] continues after its explicit prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Stays in block `j` forever.
    InSigma(usize),
    /// The next letter leaves the block of the last prefix letter.
    Star,
}

/// A point given by a finite prefix and a tail tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointRep {
    pub prefix: Vec<Letter>,
    pub tail: Tail,
}

impl PointRep {
    pub fn ring(prefix: Vec<Letter>) -> Self {
        Self { prefix, tail: Tail::Star }
    }

    pub fn in_sigma(prefix: Vec<Letter>, j: usize) -> Self {
        Self { prefix, tail: Tail::InSigma(j) }
    }

    /// Ring `[w*]` where `w` repeats the first letter of block `j` `n` times.
    pub fn block_ring(j: usize, n: usize) -> Self {
        Self::ring(alloc::vec![Letter::Block { block: j, letter: 1 }; n])
    }

    pub fn starts_with_u(&self) -> bool {
        self.prefix.first() == Some(&Letter::U)
    }

    /// `σ^k` of the point; `None` when the prefix is shorter than `k`.
    pub fn shifted(&self, k: usize) -> Option<Self> {
        (k <= self.prefix.len()).then(|| Self { prefix: self.prefix[k..].to_vec(), tail: self.tail })
    }
}

/// Length of a maximal single-block prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunLength {
    Finite(usize),
    Infinite,
}

impl RunLength {
    /// `θ^a`, zero for an infinite run.
    pub fn distance(self, theta: f64) -> f64 {
        match self {
            RunLength::Finite(a) => pow(theta, a as f64),
            RunLength::Infinite => 0.0,
        }
    }
}

/// Slope attached to a letter.
pub fn letter_alpha(params: &ModelParams, letter: Letter) -> f64 {
    match letter {
        Letter::Block { block, letter } => params.block(block)[letter - 1],
        Letter::U => params.alpha_u(),
    }
}

/// Leading block and run length; `None` when the point starts with `U`.
pub fn leading_run(x: &PointRep) -> Option<(usize, RunLength)> {
    let j = match x.prefix.first() {
        Some(Letter::Block { block, .. }) => *block,
        Some(Letter::U) => return None,
        None => {
            return match x.tail {
                Tail::InSigma(j) => Some((j, RunLength::Infinite)),
                Tail::Star => None,
            }
        }
    };
    let a = x.prefix.iter().take_while(|l| l.block_of() == Some(j)).count();
    if a == x.prefix.len() && x.tail == Tail::InSigma(j) {
        Some((j, RunLength::Infinite))
    } else {
        Some((j, RunLength::Finite(a)))
    }
}

/// `d(x, Σ_j) = θ^a`.
pub fn dist_to_sigma(params: &ModelParams, x: &PointRep, j: usize) -> f64 {
    match leading_run(x) {
        Some((k, run)) if k == j => run.distance(params.theta()),
        _ => 1.0,
    }
}

/// `A(x) = -α_{letter} d(x, Σ_j)` on `[u_ij]`, `-α_u` on `[u]`.
pub fn potential_a(params: &ModelParams, x: &PointRep) -> f64 {
    match x.prefix.first() {
        Some(&Letter::U) => -params.alpha_u(),
        Some(&letter @ Letter::Block { block, .. }) => -letter_alpha(params, letter) * dist_to_sigma(params, x, block),
        None => 0.0,
    }
}

/// A word mixes blocks or contains `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("word is not admissible for a single block")]
pub struct MixedWord;

/// Block of a nonempty single-block word.
pub fn word_block(m: &[Letter]) -> Result<usize, MixedWord> {
    let j = m.first().and_then(|l| l.block_of()).ok_or(MixedWord)?;
    if m.iter().all(|l| l.block_of() == Some(j)) {
        Ok(j)
    } else {
        Err(MixedWord)
    }
}

/// `S(m) = -Σ_l α_{m_l} θ^{n-l}` for a single-block word of length `n`.
pub fn birkhoff_weight(params: &ModelParams, m: &[Letter]) -> Result<f64, MixedWord> {
    word_block(m)?;
    let theta = params.theta();
    let n = m.len();
    Ok(-m.iter().enumerate().map(|(l, &c)| letter_alpha(params, c) * pow(theta, (n - l) as f64)).sum::<f64>())
}

/// Every word of length `len` over block `j`, in lexicographic order.
pub fn block_words(params: &ModelParams, j: usize, len: usize) -> Vec<Vec<Letter>> {
    let p = params.p();
    let mut out = Vec::new();
    let total = p.pow(len as u32);
    for mut code in 0..total {
        let mut w = alloc::vec![Letter::U; len];
        for slot in w.iter_mut().rev() {
            *slot = Letter::Block { block: j, letter: code % p + 1 };
            code /= p;
        }
        out.push(w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn b(block: usize, letter: usize) -> Letter {
        Letter::Block { block, letter }
    }

    #[test]
    fn example_is_valid() {
        assert!(ModelParams::example().param_set().validate().is_empty());
    }

    #[test]
    fn validation_reports_each_violation() {
        let mut set = ModelParams::example().param_set().clone();
        set.alpha[0] = vec![1.0, 1.0];
        let errs = set.validate();
        assert_eq!(errs, vec![ValidationError::FirstGapNotStrict(1)]);
        assert_eq!(errs[0].to_string(), "first gap not strict in block 1");

        set.theta = 1.0;
        let errs = set.validate();
        assert!(errs.contains(&ValidationError::ThetaOutOfRange));
        assert!(errs.iter().any(|e| e.to_string() == "theta outside (0,1)"));
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn leading_order_is_strict_for_first_three_blocks() {
        let base = vec![vec![1.0, 2.0], vec![1.5, 3.0], vec![1.5, 3.0], vec![2.0, 3.0]];
        let errs = ModelParams::new(0.5, base, 0.3).unwrap_err();
        assert_eq!(errs.0, vec![ValidationError::LeadingOrder(2, 3)]);
        let ok = vec![vec![1.0, 2.0], vec![1.5, 3.0], vec![1.7, 3.0], vec![1.7, 3.0]];
        assert!(ModelParams::new(0.5, ok, 0.3).is_ok());
    }

    #[test]
    fn single_block_rejected() {
        let errs = ModelParams::new(0.5, vec![vec![1.0, 2.0]], 0.3).unwrap_err();
        assert!(errs.0.contains(&ValidationError::TooFewBlocks(1)));
    }

    #[test]
    fn letter_slopes() {
        let m = ModelParams::example();
        assert_eq!(letter_alpha(&m, b(2, 1)), 1.5);
        assert_eq!(letter_alpha(&m, Letter::U), 0.3);
        assert_eq!(letter_alpha(&m, b(1, 2)), 2.0);
    }

    #[test]
    fn leading_runs() {
        let x = PointRep::ring(vec![b(1, 1), b(1, 2), b(2, 1)]);
        assert_eq!(leading_run(&x), Some((1, RunLength::Finite(2))));
        let y = PointRep::in_sigma(vec![b(1, 1)], 1);
        assert_eq!(leading_run(&y), Some((1, RunLength::Infinite)));
        let z = PointRep::ring(vec![Letter::U, b(1, 1)]);
        assert_eq!(leading_run(&z), None);
        let w = PointRep::in_sigma(vec![b(1, 1)], 2);
        assert_eq!(leading_run(&w), Some((1, RunLength::Finite(1))));
    }

    #[test]
    fn distances() {
        let m = ModelParams::example();
        let x = PointRep::ring(vec![b(1, 1), b(1, 1)]);
        assert_eq!(dist_to_sigma(&m, &x, 1), 0.25);
        assert_eq!(dist_to_sigma(&m, &x, 2), 1.0);
        let u = PointRep::ring(vec![Letter::U]);
        assert_eq!(dist_to_sigma(&m, &u, 1), 1.0);
        let s = PointRep::in_sigma(vec![b(1, 2)], 1);
        assert_eq!(dist_to_sigma(&m, &s, 1), 0.0);
    }

    #[test]
    fn potential_values() {
        let m = ModelParams::example();
        assert_eq!(potential_a(&m, &PointRep::ring(vec![b(1, 1)])), -0.5);
        assert_eq!(potential_a(&m, &PointRep::ring(vec![Letter::U])), -0.3);
        assert_eq!(potential_a(&m, &PointRep::in_sigma(vec![], 2)), 0.0);
        assert_eq!(potential_a(&m, &PointRep::in_sigma(vec![b(2, 2)], 2)), 0.0);
    }

    #[test]
    fn birkhoff_weights() {
        let m = ModelParams::example();
        assert_eq!(birkhoff_weight(&m, &[b(1, 1)]).unwrap(), -0.5);
        assert_eq!(birkhoff_weight(&m, &[b(1, 1), b(1, 1)]).unwrap(), -0.75);
        assert_eq!(birkhoff_weight(&m, &[b(1, 2), b(1, 1)]).unwrap(), -1.0);
        assert_eq!(birkhoff_weight(&m, &[b(1, 2), b(2, 1)]), Err(MixedWord));
        assert_eq!(birkhoff_weight(&m, &[Letter::U]), Err(MixedWord));
    }

    #[test]
    fn birkhoff_weight_is_sum_of_potential_along_orbit() {
        let m = ModelParams::example();
        for len in 1..=6 {
            for w in block_words(&m, 2, len) {
                let x = PointRep::ring(w.clone());
                let direct: f64 = (0..len).map(|l| potential_a(&m, &x.shifted(l).unwrap())).sum();
                let s = birkhoff_weight(&m, &w).unwrap();
                assert!((s - direct).abs() < 1e-14, "{s} vs {direct}");
            }
        }
    }

    #[test]
    fn extending_the_run_multiplies_distance_by_theta() {
        let m = ModelParams::example();
        for n in 1..10 {
            let d0 = dist_to_sigma(&m, &PointRep::block_ring(1, n), 1);
            let d1 = dist_to_sigma(&m, &PointRep::block_ring(1, n + 1), 1);
            assert!((d1 - d0 * m.theta()).abs() < 1e-15);
        }
    }

    #[test]
    fn word_enumeration_counts() {
        let m = ModelParams::example();
        assert_eq!(block_words(&m, 1, 3).len(), 8);
        assert_eq!(block_words(&m, 1, 0), vec![Vec::<Letter>::new()]);
    }
}
