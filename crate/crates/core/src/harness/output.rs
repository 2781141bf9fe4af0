use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::scenario::{validate_scenario, Scenario};
use super::sweep::{quantity, BoundaryNote, Coverage, EpsilonOutcome, EpsilonResult, NamedFit, ReferenceInfo, SweepResult};
use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical scenario JSON.
pub fn config_hash(scenario: &Scenario) -> String {
    format!("{:x}", Sha256::digest(scenario.canonical_json().as_bytes()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn eps_tag(eps: f64) -> String {
    eps.to_string()
}

/// Renders a header and rows as CSV text.
fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

const SWEEP_COLUMNS: [&str; 19] = [
    "epsilon",
    "status",
    "err_w",
    "err_u",
    "err_w_space_time",
    "err_u_space_time",
    "diss_quadratic",
    "energy_ueps",
    "grad_w_l2",
    "diss_exp",
    "exp_identity_residual",
    "max_tv_w_increase",
    "tv_transfer_max_gap",
    "min_value",
    "max_value",
    "c0",
    "slack",
    "dt",
    "n_steps",
];

pub fn sweep_csv(result: &SweepResult) -> String {
    let rows = result.runs.iter().map(|run| match run {
        EpsilonOutcome::Ok(r) => {
            let d = &r.report;
            let mut row = vec![r.epsilon.to_string(), "ok".into(), r.err_w.to_string(), r.err_u.to_string()];
            row.extend(
                [
                    r.err_w_space_time,
                    r.err_u_space_time,
                    quantity(r, "diss_quadratic"),
                    quantity(r, "energy_ueps"),
                    quantity(r, "grad_w_l2"),
                    quantity(r, "diss_exp"),
                    d.exp_identity_residual,
                    Some(d.max_tv_w_increase),
                    r.tv_transfer_max_gap,
                    Some(d.min_value),
                    Some(d.max_value),
                    Some(d.c0),
                    Some(d.slack),
                    Some(r.dt),
                ]
                .map(opt),
            );
            row.push(r.n_steps.to_string());
            row
        }
        EpsilonOutcome::Failed { epsilon, .. } => {
            let mut row = vec![epsilon.to_string(), "failed".into()];
            row.resize(SWEEP_COLUMNS.len(), String::new());
            row
        }
    });
    csv_text(&SWEEP_COLUMNS, rows)
}

pub fn history_csv(r: &EpsilonResult) -> String {
    let rows = r
        .history
        .iter()
        .map(|h| [h.t, h.tv_w, h.tv_u, h.mass, h.l2_u].iter().map(f64::to_string).collect());
    csv_text(&["t", "tv_w", "tv_u", "mass", "l2_u"], rows)
}

pub fn scaling_csv(result: &SweepResult) -> String {
    let checks = result.checks.iter().map(|c| {
        vec![c.epsilon.to_string(), c.quantity.clone(), c.value.to_string(), opt(c.bound), opt(c.slack())]
    });
    let tracked = result.runs.iter().filter_map(EpsilonOutcome::ok).flat_map(|r| {
        ["err_w", "err_u", "grad_w_l2", "exp_identity_residual"]
            .into_iter()
            .filter_map(move |q| quantity(r, q).map(|v| vec![r.epsilon.to_string(), q.into(), v.to_string(), String::new(), String::new()]))
    });
    csv_text(&["epsilon", "quantity_name", "value", "bound", "slack"], checks.chain(tracked))
}

pub fn fits_csv(result: &SweepResult) -> String {
    let rows = result.fits.iter().map(|f| match &f.fit {
        Some(fit) => vec![
            f.quantity.clone(),
            fit.fitted_exponent.to_string(),
            fit.intercept.to_string(),
            fit.fit_residual.to_string(),
            fit.epsilons.len().to_string(),
            String::new(),
        ],
        None => {
            let mut row = vec![f.quantity.clone()];
            row.resize(5, String::new());
            row.push(f.note.clone().unwrap_or_default());
            row
        }
    });
    csv_text(&["quantity_name", "fitted_exponent", "intercept", "fit_residual", "n_points", "note"], rows)
}

#[derive(Serialize)]
struct RunEntry<'a> {
    epsilon: f64,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inflow: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outflow: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation_tail: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config_sha256: String,
    scenario: Value,
    dx: f64,
    coverage: Coverage,
    coverage_note: &'a str,
    reference: &'a ReferenceInfo,
    runs: Vec<RunEntry<'a>>,
    fits: &'a [NamedFit],
    boundary_mass: &'a [BoundaryNote],
    outputs: Vec<String>,
}

pub fn manifest_json(scenario: &Scenario, result: &SweepResult, outputs: &[String]) -> Result<String> {
    let runs = result
        .runs
        .iter()
        .map(|r| match r {
            EpsilonOutcome::Ok(r) => RunEntry {
                epsilon: r.epsilon,
                status: "ok",
                error: None,
                dt: Some(r.dt),
                n_steps: Some(r.n_steps),
                inflow: Some(r.inflow),
                outflow: Some(r.outflow),
                truncation_tail: Some(r.truncation_tail),
            },
            EpsilonOutcome::Failed { epsilon, error } => RunEntry {
                epsilon: *epsilon,
                status: "failed",
                error: Some(error),
                dt: None,
                n_steps: None,
                inflow: None,
                outflow: None,
                truncation_tail: None,
            },
        })
        .collect();
    let manifest = Manifest {
        version: VERSION,
        config_sha256: config_hash(scenario),
        scenario: serde_json::from_str(&scenario.canonical_json())?,
        dx: result.dx,
        coverage: result.coverage,
        coverage_note: result.coverage.note(),
        reference: &result.reference,
        runs,
        fits: &result.fits,
        boundary_mass: &result.boundary,
        outputs: outputs.to_vec(),
    };
    Ok(serde_json::to_string_pretty(&manifest)? + "\n")
}

/// Accepts a scenario file or a manifest written by [`write_outputs`].
pub fn scenario_from_text(text: &str) -> Result<Scenario> {
    if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(text) {
        if let (Some(s), true) = (map.get("scenario"), map.contains_key("config_sha256")) {
            return validate_scenario(&s.to_string());
        }
    }
    validate_scenario(text)
}

#[derive(Serialize)]
struct SnapshotHeader {
    n_cells: usize,
    x_min: f64,
    x_max: f64,
    n_snapshots: usize,
    times: Vec<f64>,
    layout: &'static str,
}

fn write_snapshots(dir: &Path, r: &EpsilonResult, outputs: &mut Vec<String>) -> Result<()> {
    let Some(first) = r.snapshots.first() else {
        return Ok(());
    };
    let g = first.u.grid();
    let header = SnapshotHeader {
        n_cells: g.n_cells(),
        x_min: g.x_min(),
        x_max: g.x_max(),
        n_snapshots: r.snapshots.len(),
        times: r.snapshots.iter().map(|s| s.t).collect(),
        layout: "per snapshot: u[n_cells] then w[n_cells], f64 little-endian",
    };
    let mut bytes = Vec::with_capacity(16 * g.n_cells() * r.snapshots.len());
    for s in &r.snapshots {
        for v in s.u.values().iter().chain(s.w.values()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let stem = format!("snapshots_{}", eps_tag(r.epsilon));
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&header)? + "\n")?;
    fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    outputs.push(format!("{stem}.json"));
    outputs.push(format!("{stem}.bin"));
    Ok(())
}

/// Writes every output file into `dir` and returns their paths.
pub fn write_outputs(dir: &Path, scenario: &Scenario, result: &SweepResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    let mut outputs = Vec::new();
    let put = |name: String, body: String, outputs: &mut Vec<String>| -> Result<()> {
        fs::write(dir.join(&name), body)?;
        outputs.push(name);
        Ok(())
    };
    put("sweep.csv".into(), sweep_csv(result), &mut outputs)?;
    put("scaling.csv".into(), scaling_csv(result), &mut outputs)?;
    put("fits.csv".into(), fits_csv(result), &mut outputs)?;
    for r in result.runs.iter().filter_map(EpsilonOutcome::ok) {
        put(format!("diagnostics_{}.csv", eps_tag(r.epsilon)), history_csv(r), &mut outputs)?;
        write_snapshots(dir, r, &mut outputs)?;
    }
    outputs.push("manifest.json".into());
    fs::write(dir.join("manifest.json"), manifest_json(scenario, result, &outputs)?)?;
    Ok(outputs.into_iter().map(|n| dir.join(n)).collect())
}
