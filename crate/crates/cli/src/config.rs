//! `key = value` configuration with flag overrides.

use std::collections::BTreeMap;

use freeze_lab_core::model::ValidationError;
use freeze_lab_core::pressure::{LimitFormula, DEFAULT_TOL};
use freeze_lab_core::tropical::DEFAULT_TIE_TOL;
use freeze_lab_core::{ModelParams, ParamSet};

/// Configuration text of the reference parameter set, used when no file is given.
pub const EXAMPLE_CONFIG: &str = "\
N = 2
p = 2
theta = 0.5
alpha.1.1 = 1
alpha.1.2 = 2
alpha.2.1 = 1.5
alpha.2.2 = 3
alpha_u = 0.3
";

const OPTION_KEYS: [&str; 5] = ["beta", "depth", "tie_tol", "tol", "limit_formula"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("{key}: unknown key")]
    UnknownKey { key: String },
    #[error("{key}: given twice in the config file")]
    Duplicate { key: String },
    #[error("{key}: cannot parse `{value}`")]
    Malformed { key: String, value: String },
    #[error("{key}: required key missing")]
    Missing { key: String },
    #[error("{}", join_invalid(.0))]
    Invalid(Vec<(String, String)>),
    #[error("{key}: {reason}")]
    BadOption { key: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
}

fn join_invalid(errs: &[(String, String)]) -> String {
    errs.iter().map(|(k, m)| format!("{k}: {m}")).collect::<Vec<_>>().join("; ")
}

/// Numeric options shared by the subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub beta: Option<f64>,
    pub depth: Option<usize>,
    pub tie_tol: f64,
    pub tol: f64,
    pub limit_formula: LimitFormula,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            beta: None,
            depth: None,
            tie_tol: DEFAULT_TIE_TOL,
            tol: DEFAULT_TOL,
            limit_formula: LimitFormula::Renewal,
        }
    }
}

/// Validated model plus options.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: ModelParams,
    pub options: Options,
}

fn parse_lines(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: n + 1, text: raw.trim().to_string() })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn is_known(key: &str) -> bool {
    matches!(key, "N" | "p" | "theta" | "alpha_u") || OPTION_KEYS.contains(&key) || alpha_index(key).is_some()
}

fn alpha_index(key: &str) -> Option<(usize, usize)> {
    let rest = key.strip_prefix("alpha.")?;
    let (j, i) = rest.split_once('.')?;
    match (j.parse::<usize>(), i.parse::<usize>()) {
        (Ok(j), Ok(i)) if j >= 1 && i >= 1 => Some((j, i)),
        _ => None,
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::Malformed { key: key.to_string(), value: value.to_string() })
}

fn real(key: &str, value: &str) -> Result<f64, ConfigError> {
    let x: f64 = number(key, value)?;
    if x.is_nan() {
        return Err(ConfigError::Malformed { key: key.to_string(), value: value.to_string() });
    }
    Ok(x)
}

/// Key naming the parameter a validation failure is about.
pub fn validation_key(e: &ValidationError) -> String {
    match e {
        ValidationError::TooFewBlocks(_) | ValidationError::BlockCount { .. } => "N".into(),
        ValidationError::TooFewLetters(_) | ValidationError::LetterCount { .. } => "p".into(),
        ValidationError::ThetaOutOfRange => "theta".into(),
        ValidationError::NonPositiveAlphaU => "alpha_u".into(),
        ValidationError::NonPositiveAlpha { block, letter } | ValidationError::LettersNotSorted { block, letter } => {
            format!("alpha.{block}.{letter}")
        }
        ValidationError::FirstGapNotStrict(j) => format!("alpha.{j}.2"),
        ValidationError::LeadingOrder(_, j) => format!("alpha.{j}.1"),
    }
}

/// Parses configuration text, then applies `overrides` in order.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<Settings, ConfigError> {
    let mut values: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in parse_lines(text)? {
        if !is_known(&k) {
            return Err(ConfigError::UnknownKey { key: k });
        }
        if values.insert(k.clone(), v).is_some() {
            return Err(ConfigError::Duplicate { key: k });
        }
    }
    for (k, v) in overrides {
        if !is_known(k) {
            return Err(ConfigError::UnknownKey { key: k.clone() });
        }
        values.insert(k.clone(), v.clone());
    }

    let get = |key: &str| values.get(key).ok_or_else(|| ConfigError::Missing { key: key.to_string() });
    let n_blocks: usize = number("N", get("N")?)?;
    let p: usize = number("p", get("p")?)?;
    let theta = real("theta", get("theta")?)?;
    let alpha_u = real("alpha_u", get("alpha_u")?)?;
    for key in values.keys() {
        if let Some((j, i)) = alpha_index(key) {
            if j > n_blocks || i > p {
                return Err(ConfigError::UnknownKey { key: key.clone() });
            }
        }
    }
    let mut alpha = vec![vec![0.0; p]; n_blocks];
    for (j, row) in alpha.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            let key = format!("alpha.{}.{}", j + 1, i + 1);
            *slot = real(&key, get(&key)?)?;
        }
    }
    let set = ParamSet { n_blocks, p, theta, alpha, alpha_u };
    let model = ModelParams::try_from(set)
        .map_err(|e| ConfigError::Invalid(e.0.iter().map(|v| (validation_key(v), v.to_string())).collect()))?;

    let mut options = Options::default();
    if let Some(v) = values.get("beta") {
        let b = real("beta", v)?;
        if !(b >= 0.0 && b.is_finite()) {
            return Err(bad("beta", "must be finite and nonnegative"));
        }
        options.beta = Some(b);
    }
    if let Some(v) = values.get("depth") {
        let d: usize = number("depth", v)?;
        if d == 0 {
            return Err(bad("depth", "must be at least 1"));
        }
        options.depth = Some(d);
    }
    if let Some(v) = values.get("tie_tol") {
        options.tie_tol = positive("tie_tol", v)?;
    }
    if let Some(v) = values.get("tol") {
        options.tol = positive("tol", v)?;
    }
    if let Some(v) = values.get("limit_formula") {
        options.limit_formula = match v.as_str() {
            "renewal" => LimitFormula::Renewal,
            "nominal" => LimitFormula::Nominal,
            _ => return Err(ConfigError::Malformed { key: "limit_formula".into(), value: v.clone() }),
        };
    }
    Ok(Settings { model, options })
}

fn bad(key: &str, reason: &str) -> ConfigError {
    ConfigError::BadOption { key: key.to_string(), reason: reason.to_string() }
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let x = real(key, value)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(bad(key, "must be positive"));
    }
    Ok(x)
}

/// `lo:hi:steps` as `steps` evenly spaced points, or a single value.
pub fn parse_range(key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![real(key, single.trim())?]),
        [lo, hi, steps] => {
            let lo = real(key, lo.trim())?;
            let hi = real(key, hi.trim())?;
            let steps: usize = number(key, steps.trim())?;
            if steps == 0 || !lo.is_finite() || !hi.is_finite() {
                return Err(bad(key, "range needs finite bounds and at least one step"));
            }
            if steps == 1 {
                return Ok(vec![lo]);
            }
            if !(hi > lo) {
                return Err(bad(key, "range needs hi > lo"));
            }
            let n = (steps - 1) as f64;
            // Weighted form hits both end points exactly.
            Ok((0..steps).map(|k| (lo * (n - k as f64) + hi * k as f64) / n).collect())
        }
        _ => Err(ConfigError::Malformed { key: key.to_string(), value: text.to_string() }),
    }
}

/// `name=lo:hi:steps`.
pub fn parse_axis(text: &str) -> Result<(String, Vec<f64>), ConfigError> {
    let (name, range) =
        text.split_once('=').ok_or_else(|| ConfigError::Malformed { key: "grid".into(), value: text.to_string() })?;
    let name = name.trim().to_string();
    if name != "alpha_u" && name != "alpha_p1" {
        return Err(ConfigError::UnknownKey { key: format!("grid.{name}") });
    }
    let values = parse_range(&name, range)?;
    Ok((name, values))
}

/// `KEY=VALUE` from `--set`.
pub fn parse_assignment(text: &str) -> Result<(String, String), ConfigError> {
    let (k, v) =
        text.split_once('=').ok_or_else(|| ConfigError::Malformed { key: "set".into(), value: text.to_string() })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_text_is_the_reference_set() {
        let s = parse_config(EXAMPLE_CONFIG, &[]).unwrap();
        assert_eq!(s.model, ModelParams::example());
        assert_eq!(s.options, Options::default());
    }

    #[test]
    fn errors_name_the_key() {
        let text = EXAMPLE_CONFIG.replace("alpha.1.1 = 1", "alpha.1.1 = -1");
        let e = parse_config(&text, &[]).unwrap_err();
        assert!(e.to_string().starts_with("alpha.1.1:"), "{e}");
        let e = parse_config(&EXAMPLE_CONFIG.replace("theta = 0.5", "theta = half"), &[]).unwrap_err();
        assert_eq!(e, ConfigError::Malformed { key: "theta".into(), value: "half".into() });
        let e = parse_config(&format!("{EXAMPLE_CONFIG}colour = red\n"), &[]).unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey { key: "colour".into() });
        let e = parse_config(&EXAMPLE_CONFIG.replace("alpha_u = 0.3\n", ""), &[]).unwrap_err();
        assert_eq!(e, ConfigError::Missing { key: "alpha_u".into() });
        let e = parse_config(&format!("{EXAMPLE_CONFIG}alpha.3.1 = 4\n"), &[]).unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey { key: "alpha.3.1".into() });
        let e = parse_config("N 2", &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn overrides_win() {
        let text = format!("{EXAMPLE_CONFIG}beta = 3\n");
        let s = parse_config(&text, &[("beta".into(), "12.5".into()), ("alpha_u".into(), "0.1".into())]).unwrap();
        assert_eq!(s.options.beta, Some(12.5));
        assert_eq!(s.model.alpha_u(), 0.1);
    }

    #[test]
    fn ranges() {
        let r = parse_range("beta", "0:40:81").unwrap();
        assert_eq!(r.len(), 81);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert_eq!((r[0], r[80], r[1]), (0.0, 40.0, 0.5));
        assert_eq!(parse_range("beta", "7").unwrap(), vec![7.0]);
        assert!(parse_range("beta", "4:1:3").is_err());
        assert!(parse_axis("alpha_x=0:1:3").is_err());
    }
}
