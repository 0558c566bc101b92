//! Subcommands producing CSV tables.

use freeze_lab_core::measures::{measure_report, nu_cylinder, predicted_limit, subaction_from_h, PredictedLimit};
use freeze_lab_core::model::block_words;
use freeze_lab_core::oracle::oracle_report;
use freeze_lab_core::pressure::solve_pressure;
use freeze_lab_core::tropical::{
    build_m, build_m_closed_form, calibrated_subaction_at, critical_cycles, subaction_eigenvector, zone_classify,
};
use freeze_lab_core::{Letter, ModelParams, PointRep};

use crate::config::{ConfigError, Options};
use crate::output::{real, Table};
use crate::parallel::Workers;

pub const DEFAULT_DEPTH: usize = 60;
pub const DEFAULT_N_MAX: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Gamma,
    Zones {
        alpha_u: Vec<f64>,
        alpha_p1: Vec<f64>,
    },
    /// Shared by `pressure` and `sweep`.
    Pressure {
        betas: Vec<f64>,
    },
    Measures {
        betas: Vec<f64>,
        cylinders: Option<usize>,
    },
    Subaction {
        betas: Vec<f64>,
        n_max: usize,
    },
    Oracle {
        betas: Vec<f64>,
        depth: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 1,
        }
    }
}

fn numerical(beta: f64) -> impl Fn(&dyn std::fmt::Display) -> CliError {
    move |e| CliError::Numerical(format!("beta = {beta}: {e}"))
}

type Row = Result<Vec<String>, CliError>;

fn collect(mut table: Table, rows: Vec<Row>) -> Result<Table, CliError> {
    for r in rows {
        table.push(r?);
    }
    Ok(table)
}

pub fn run_command(
    model: &ModelParams,
    options: &Options,
    command: &Command,
    workers: &Workers,
) -> Result<Table, CliError> {
    match command {
        Command::Gamma => Ok(gamma_table(model, options)),
        Command::Zones { alpha_u, alpha_p1 } => Ok(zones_table(model, options, alpha_u, alpha_p1, workers)),
        Command::Pressure { betas } => pressure_table(model, options, betas, workers),
        Command::Measures { betas, cylinders: None } => measures_table(model, options, betas, workers),
        Command::Measures { betas, cylinders: Some(d) } => cylinder_table(model, options, betas, *d, workers),
        Command::Subaction { betas, n_max } => subaction_table(model, betas, *n_max, workers),
        Command::Oracle { betas, depth } => oracle_table(model, options, betas, *depth, workers),
    }
}

fn cycles_label(model: &ModelParams, gamma: f64, tol: f64) -> String {
    match critical_cycles(&build_m(model), gamma, tol) {
        Ok(cs) => cs
            .iter()
            .map(|c| {
                let mut nodes: Vec<String> = c.0.iter().map(|v| (v + 1).to_string()).collect();
                nodes.push((c.0[0] + 1).to_string());
                nodes.join("-")
            })
            .collect::<Vec<_>>()
            .join(";"),
        Err(e) => format!("error: {e}"),
    }
}

pub fn gamma_table(model: &ModelParams, options: &Options) -> Table {
    let mut t = Table::new([
        "theta",
        "alpha_u",
        "alpha_1",
        "alpha_p1",
        "gamma",
        "zone",
        "branch",
        "critical_cycles",
        "closed_form_diff",
    ]);
    let z = zone_classify(model, options.tie_tol);
    t.push(vec![
        real(model.theta()),
        real(model.alpha_u()),
        real(model.leading(1)),
        real(model.leading(2)),
        real(z.gamma),
        z.zone.as_str().into(),
        z.branches.label(),
        cycles_label(model, z.gamma, options.tie_tol),
        real(build_m(model).max_abs_diff(&build_m_closed_form(model))),
    ]);
    t
}

/// `model` with `α_u` replaced and block 2 translated so that it starts at `alpha_p1`.
pub fn zone_variant(model: &ModelParams, alpha_u: f64, alpha_p1: f64) -> Option<ModelParams> {
    let mut set = model.param_set().clone();
    set.alpha_u = alpha_u;
    let shift = alpha_p1 - set.alpha[1][0];
    for a in &mut set.alpha[1] {
        *a += shift;
    }
    ModelParams::try_from(set).ok()
}

pub fn zones_table(
    model: &ModelParams,
    options: &Options,
    alpha_u: &[f64],
    alpha_p1: &[f64],
    workers: &Workers,
) -> Table {
    let grid: Vec<(f64, f64)> = alpha_u.iter().flat_map(|&u| alpha_p1.iter().map(move |&a| (u, a))).collect();
    let rows = workers.map(&grid, |&(u, a)| {
        let (gamma, zone, branch) = match zone_variant(model, u, a) {
            Some(m) => {
                let z = zone_classify(&m, options.tie_tol);
                (real(z.gamma), z.zone.as_str().to_string(), z.branches.label())
            }
            None => ("nan".into(), "invalid".into(), String::new()),
        };
        vec![real(u), real(a), gamma, zone, branch]
    });
    let mut t = Table::new(["alpha_u", "alpha_p1", "gamma", "zone", "branch"]);
    rows.into_iter().for_each(|r| t.push(r));
    t
}

pub fn pressure_table(
    model: &ModelParams,
    options: &Options,
    betas: &[f64],
    workers: &Workers,
) -> Result<Table, CliError> {
    let zone = zone_classify(model, options.tie_tol);
    let rows = workers.map(betas, |&beta| -> Row {
        let s = solve_pressure(model, beta, options.tol).map_err(|e| numerical(beta)(&e))?;
        Ok(vec![
            real(beta),
            real(s.pressure),
            real(s.p_minus_log_p()),
            real(s.g),
            real(s.gamma),
            zone.zone.as_str().into(),
            real(s.residual),
            s.terms_used().to_string(),
        ])
    });
    collect(Table::new(["beta", "P", "P_minus_logp", "g", "gamma", "zone", "residual", "terms_used"]), rows)
}

fn measure_header(n: usize) -> Vec<String> {
    let mut h = vec!["beta".to_string()];
    h.extend((1..=n).map(|j| format!("nu_O{j}")));
    h.push("nu_u".into());
    h.extend((1..=n).map(|j| format!("mu_O{j}")));
    h.push("mu_u".into());
    h.extend(["ratio_12", "zone", "predicted_w1", "predicted_w2"].map(String::from));
    h
}

fn finite_masses(beta: f64, nu: (&[f64], f64), mu: (&[f64], f64)) -> Result<(), CliError> {
    if nu.0.iter().chain(mu.0).chain([&nu.1, &mu.1]).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("beta = {beta}: non-finite block mass")))
    }
}

fn measure_row(beta: f64, nu: (&[f64], f64), mu: (&[f64], f64), ratio: f64, predicted: &PredictedLimit) -> Vec<String> {
    let mut row = vec![real(beta)];
    row.extend(nu.0.iter().map(|&x| real(x)));
    row.push(real(nu.1));
    row.extend(mu.0.iter().map(|&x| real(x)));
    row.push(real(mu.1));
    row.push(real(ratio));
    row.push(predicted.zone.zone.as_str().into());
    row.push(real(predicted.w1));
    row.push(real(predicted.w2));
    row
}

pub fn measures_table(
    model: &ModelParams,
    options: &Options,
    betas: &[f64],
    workers: &Workers,
) -> Result<Table, CliError> {
    let rows = workers.map(betas, |&beta| -> Row {
        let err = numerical(beta);
        let s = solve_pressure(model, beta, options.tol).map_err(|e| err(&e))?;
        let r = measure_report(model, &s, options.limit_formula, options.tie_tol).map_err(|e| err(&e))?;
        finite_masses(beta, (&r.nu.o, r.nu.u), (&r.mu.o, r.mu.u))?;
        Ok(measure_row(beta, (&r.nu.o, r.nu.u), (&r.mu.o, r.mu.u), r.mu.ratio_12, &r.predicted))
    });
    collect(Table::new(measure_header(model.n_blocks())), rows)
}

fn word_label(m: &[Letter]) -> String {
    m.iter()
        .map(|l| match l {
            Letter::Block { letter, .. } => letter.to_string(),
            Letter::U => "u".into(),
        })
        .collect::<Vec<_>>()
        .join("-")
}

/// `ν[m]` for every single-block word of length `1..=depth`.
pub fn cylinder_table(
    model: &ModelParams,
    options: &Options,
    betas: &[f64],
    depth: usize,
    workers: &Workers,
) -> Result<Table, CliError> {
    let p = model.p() as f64;
    let blocks = workers.map(betas, |&beta| -> Result<Vec<Vec<String>>, CliError> {
        let err = numerical(beta);
        let s = solve_pressure(model, beta, options.tol).map_err(|e| err(&e))?;
        let mut rows = Vec::new();
        for j in 1..=model.n_blocks() {
            for len in 1..=depth {
                for m in block_words(model, j, len) {
                    let nu = nu_cylinder(model, &s, &m).map_err(|e| err(&e))?;
                    rows.push(vec![
                        real(beta),
                        j.to_string(),
                        word_label(&m),
                        len.to_string(),
                        real(nu),
                        real(nu * p.powi(len as i32)),
                    ]);
                }
            }
        }
        Ok(rows)
    });
    let mut t = Table::new(["beta", "block", "word", "length", "nu", "nu_times_p_pow_length"]);
    for b in blocks {
        b?.into_iter().for_each(|r| t.push(r));
    }
    Ok(t)
}

/// Tracked states in output order with their labels.
pub fn tracked_states(model: &ModelParams, n_max: usize) -> Vec<(String, PointRep)> {
    let mut out = Vec::new();
    for j in 1..=model.n_blocks() {
        out.push((format!("sigma_{j}"), PointRep::in_sigma(vec![], j)));
    }
    for j in 1..=model.n_blocks() {
        for n in 1..=n_max {
            out.push((format!("ring_{j}_{n}"), PointRep::block_ring(j, n)));
        }
    }
    out.push(("u".into(), PointRep::ring(vec![Letter::U])));
    out
}

/// `(label, (1/β) ln H, V)` with both sides shifted to vanish on `Σ₁`.
pub fn subaction_rows(
    model: &ModelParams,
    beta: f64,
    n_max: usize,
    tol: f64,
) -> Result<Vec<(String, f64, f64)>, CliError> {
    let err = numerical(beta);
    let states = tracked_states(model, n_max);
    let points: Vec<PointRep> = states.iter().map(|(_, x)| x.clone()).collect();
    let s = solve_pressure(model, beta, tol).map_err(|e| err(&e))?;
    let logs = subaction_from_h(model, &s, &points).map_err(|e| err(&e))?;
    let v = subaction_eigenvector(model);
    let v0 = calibrated_subaction_at(model, &v, &points[0]);
    Ok(states
        .into_iter()
        .zip(logs)
        .zip(&points)
        .map(|(((label, _), lh), x)| (label, lh, calibrated_subaction_at(model, &v, x) - v0))
        .collect())
}

pub fn subaction_table(model: &ModelParams, betas: &[f64], n_max: usize, workers: &Workers) -> Result<Table, CliError> {
    let blocks = workers.map(betas, |&beta| subaction_rows(model, beta, n_max, freeze_lab_core::pressure::DEFAULT_TOL));
    let mut t = Table::new(["beta", "state", "log_h_over_beta", "v", "abs_diff"]);
    for (b, &beta) in blocks.into_iter().zip(betas) {
        for (label, lh, v) in b? {
            t.push(vec![real(beta), label, real(lh), real(v), real((lh - v).abs())]);
        }
    }
    Ok(t)
}

pub fn oracle_table(
    model: &ModelParams,
    options: &Options,
    betas: &[f64],
    depth: usize,
    workers: &Workers,
) -> Result<Table, CliError> {
    let predicted = predicted_limit(model, options.limit_formula, options.tie_tol)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let rows = workers.map(betas, |&beta| -> Row {
        let r =
            oracle_report(model, beta, depth, freeze_lab_core::oracle::ORACLE_TOL).map_err(|e| numerical(beta)(&e))?;
        let m = &r.measures;
        finite_masses(beta, (&m.nu_o, m.nu_u), (&m.mu_o, m.mu_u))?;
        let mut row = measure_row(beta, (&m.nu_o, m.nu_u), (&m.mu_o, m.mu_u), m.mu_o[0] / m.mu_o[1], &predicted);
        row.extend([real(r.lambda), real(r.bound), real(r.lambda_minus_p)]);
        Ok(row)
    });
    let mut header = measure_header(model.n_blocks());
    header.extend(["lambda", "bound", "lambda_minus_p"].map(String::from));
    collect(Table::new(header), rows)
}
