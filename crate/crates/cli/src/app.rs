//! Argument parsing and dispatch. Exit codes: 0 success, 1 configuration
//! or usage error, 2 numerical failure or a failed `verify`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::acceptance;
use crate::commands::{run_command, CliError, Command, DEFAULT_DEPTH, DEFAULT_N_MAX};
use crate::config::{parse_assignment, parse_axis, parse_config, parse_range, ConfigError, Settings, EXAMPLE_CONFIG};
use crate::parallel::Workers;

#[derive(Parser, Debug)]
#[command(
    name = "freeze-lab",
    version,
    about = "Zero-temperature numerics for a locally constant potential with flat tails"
)]
pub struct Cli {
    /// `key = value` parameter file; the built-in example is used when absent.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Absolute tolerance for ties between gamma branches.
    #[arg(long, global = true, value_name = "TOL")]
    pub tie_tol: Option<String>,
    /// Target for the pressure residual.
    #[arg(long, global = true, value_name = "TOL")]
    pub tol: Option<String>,
    /// Constants used for zero-temperature predictions.
    #[arg(long, global = true, value_parser = ["renewal", "nominal"])]
    pub limit_formula: Option<String>,
    /// Write output here instead of standard output.
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Tropical constant, zone and critical cycles.
    Gamma,
    /// Zone diagram over alpha_u and the leading slope of block 2.
    Zones {
        #[arg(long, num_args = 2, required = true, value_name = "AXIS=LO:HI:STEPS")]
        grid: Vec<String>,
    },
    /// Pressure at one beta or a `lo:hi:steps` range.
    Pressure {
        #[arg(long)]
        beta: Option<String>,
    },
    /// Pressure over a `lo:hi:steps` range of beta.
    Sweep {
        #[arg(long, value_name = "LO:HI:STEPS")]
        beta: String,
    },
    /// Eigenmeasure and Gibbs measure block masses.
    Measures {
        #[arg(long)]
        beta: Option<String>,
        /// Emit cylinder masses of single-block words up to this length instead.
        #[arg(long, value_name = "DEPTH")]
        cylinders: Option<usize>,
    },
    /// Compare (1/beta) ln H with the calibrated subaction.
    Subaction {
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
    },
    /// Brute-force truncated chain.
    Oracle {
        #[arg(long)]
        beta: Option<String>,
        #[arg(long)]
        depth: Option<String>,
    },
    /// Run the acceptance battery.
    Verify {
        /// Comma-separated subset such as `A1,A5`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

/// Configuration assembled from the file, `--set` and dedicated flags.
pub fn settings(cli: &Cli, extra: &[(String, String)]) -> Result<Settings, ConfigError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?,
        None => EXAMPLE_CONFIG.to_string(),
    };
    let mut overrides = cli.set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>, _>>()?;
    for (key, v) in [("tie_tol", &cli.tie_tol), ("tol", &cli.tol), ("limit_formula", &cli.limit_formula)] {
        if let Some(v) = v {
            overrides.push((key.to_string(), v.clone()));
        }
    }
    overrides.extend_from_slice(extra);
    parse_config(&text, &overrides)
}

/// `--beta` as a single value (validated through the config) or a range.
fn betas(flag: &Option<String>, extra: &mut Vec<(String, String)>) -> Result<Option<Vec<f64>>, ConfigError> {
    match flag {
        Some(s) if s.contains(':') => {
            let r = parse_range("beta", s)?;
            if r.iter().any(|b| !(*b >= 0.0)) {
                return Err(ConfigError::BadOption { key: "beta".into(), reason: "must be nonnegative".into() });
            }
            Ok(Some(r))
        }
        Some(s) => {
            extra.push(("beta".into(), s.clone()));
            Ok(None)
        }
        None => Ok(None),
    }
}

fn resolve(cli: &Cli) -> Result<(Settings, Option<Command>), ConfigError> {
    let mut extra = Vec::new();
    let range = match &cli.command {
        Sub::Pressure { beta }
        | Sub::Measures { beta, .. }
        | Sub::Subaction { beta, .. }
        | Sub::Oracle { beta, .. } => betas(beta, &mut extra)?,
        Sub::Sweep { beta } => betas(&Some(beta.clone()), &mut extra)?,
        _ => None,
    };
    if let Sub::Oracle { depth: Some(d), .. } = &cli.command {
        extra.push(("depth".into(), d.clone()));
    }
    let s = settings(cli, &extra)?;
    let beta_list = || -> Result<Vec<f64>, ConfigError> {
        match (&range, s.options.beta) {
            (Some(r), _) => Ok(r.clone()),
            (None, Some(b)) => Ok(vec![b]),
            (None, None) => Err(ConfigError::Missing { key: "beta".into() }),
        }
    };
    let command = match &cli.command {
        Sub::Gamma => Some(Command::Gamma),
        Sub::Zones { grid } => {
            let (a, b) = (parse_axis(&grid[0])?, parse_axis(&grid[1])?);
            let (u, p1) = match (a.0.as_str(), b.0.as_str()) {
                ("alpha_u", "alpha_p1") => (a.1, b.1),
                ("alpha_p1", "alpha_u") => (b.1, a.1),
                _ => {
                    return Err(ConfigError::BadOption {
                        key: "grid".into(),
                        reason: "needs one alpha_u axis and one alpha_p1 axis".into(),
                    })
                }
            };
            Some(Command::Zones { alpha_u: u, alpha_p1: p1 })
        }
        Sub::Pressure { .. } | Sub::Sweep { .. } => Some(Command::Pressure { betas: beta_list()? }),
        Sub::Measures { cylinders, .. } => Some(Command::Measures { betas: beta_list()?, cylinders: *cylinders }),
        Sub::Subaction { n_max, .. } => {
            let b = beta_list()?;
            if b.iter().any(|x| *x <= 0.0) {
                return Err(ConfigError::BadOption { key: "beta".into(), reason: "subaction needs beta > 0".into() });
            }
            Some(Command::Subaction { betas: b, n_max: *n_max })
        }
        Sub::Oracle { .. } => {
            Some(Command::Oracle { betas: beta_list()?, depth: s.options.depth.unwrap_or(DEFAULT_DEPTH) })
        }
        Sub::Verify { .. } => None,
    };
    Ok((s, command))
}

fn open_output<'a>(cli: &Cli, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, CliError> {
    match &cli.output {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(stdout)),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let (settings, command) = resolve(cli)?;
    let workers = Workers::from_env()?;
    let mut out = open_output(cli, stdout)?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match command {
        Some(cmd) => {
            let table = run_command(&settings.model, &settings.options, &cmd, &workers)?;
            table.write_to(&mut out).map_err(|e| CliError::Io(e.to_string()))?;
            out.flush().map_err(io)?;
            Ok(0)
        }
        None => {
            let only = match &cli.command {
                Sub::Verify { only } => only.clone(),
                _ => Vec::new(),
            };
            if let Some(bad) = only.iter().find(|o| !acceptance::IDS.iter().any(|id| id.eq_ignore_ascii_case(o))) {
                return Err(ConfigError::UnknownKey { key: format!("only.{bad}") }.into());
            }
            let results = acceptance::run(&only, &workers);
            for r in &results {
                writeln!(out, "{r}").map_err(io)?;
            }
            let passed = results.iter().filter(|r| r.pass()).count();
            writeln!(out, "{passed}/{} criteria passed", results.len()).map_err(io)?;
            out.flush().map_err(io)?;
            Ok(if passed == results.len() { 0 } else { 2 })
        }
    }
}

/// Full program: parse `args`, run, report errors on `stderr`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "freeze-lab: {e}");
            e.exit_code()
        }
    }
}
