//! File formats: run-record datasets, trajectory and curve CSV, fit reports,
//! and prescription tables.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use sparselaw::lawfit::{FrantarLawFit, ScalingLawFit};
use sparselaw::prescribe::Prescription;
use sparselaw::record::{RunRecord, RunSource};
use sparselaw::schedule::{ModelShape, ParamTrajectory};
use sparselaw::theorysim::CurvePoint;
use sparselaw::trainer::LossPoint;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}: line {line}: expected {expected} fields, got {got}")]
    FieldCount {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path}: line {line}: cannot parse `{value}` for column `{column}`")]
    BadField {
        path: String,
        line: usize,
        column: String,
        value: String,
    },
    #[error("{path}: no data rows")]
    Empty { path: String },
}

pub const DATASET_COLUMNS: [&str; 6] = [
    "label",
    "avg_params",
    "total_tokens",
    "final_loss",
    "sparsity",
    "final_nonzero_params",
];

/// Writes run records in the dataset CSV format.
pub fn write_run_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&DATASET_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn format_record(r: &RunRecord) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.label.replace(',', ";"),
        r.avg_params,
        r.total_tokens,
        r.final_loss,
        r.sparsity,
        r.final_nonzero_params
    )
}

/// Reads a dataset CSV. The model shape is not part of the wire format, so a
/// bookkeeping shape is synthesized from the final nonzero count and
/// sparsity.
pub fn read_run_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| SchemaError::Empty { path: p.clone() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut idx = [0usize; 6];
    for (i, want) in DATASET_COLUMNS.iter().enumerate() {
        idx[i] = cols
            .iter()
            .position(|c| c == want)
            .ok_or_else(|| SchemaError::MissingColumn {
                path: p.clone(),
                column: want.to_string(),
            })?;
    }
    let mut records = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < cols.len() {
            return Err(SchemaError::FieldCount {
                path: p.clone(),
                line: lineno + 1,
                expected: cols.len(),
                got: fields.len(),
            }
            .into());
        }
        let parse_f64 = |col: usize, name: &str| -> Result<f64, SchemaError> {
            fields[col].parse().map_err(|_| SchemaError::BadField {
                path: p.clone(),
                line: lineno + 1,
                column: name.to_string(),
                value: fields[col].to_string(),
            })
        };
        // counts may be written in scientific notation
        let parse_u64 = |col: usize, name: &str| -> Result<u64, SchemaError> {
            let raw = fields[col];
            if let Ok(n) = raw.parse::<u64>() {
                return Ok(n);
            }
            match raw.parse::<f64>() {
                Ok(f) if f >= 0.0 && f <= u64::MAX as f64 => Ok(f as u64),
                _ => Err(SchemaError::BadField {
                    path: p.clone(),
                    line: lineno + 1,
                    column: name.to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let avg_params = parse_f64(idx[1], "avg_params")?;
        let total_tokens = parse_u64(idx[2], "total_tokens")?;
        let final_loss = parse_f64(idx[3], "final_loss")?;
        let sparsity = parse_f64(idx[4], "sparsity")?;
        let final_nonzero_params = parse_u64(idx[5], "final_nonzero_params")?;
        let prunable = if sparsity < 1.0 {
            ((final_nonzero_params as f64 / (1.0 - sparsity)).round() as u64).max(1)
        } else {
            final_nonzero_params.max(1)
        };
        records.push(RunRecord {
            label: fields[idx[0]].to_string(),
            avg_params,
            total_tokens,
            final_loss,
            sparsity,
            final_nonzero_params,
            shape: ModelShape {
                prunable_params: prunable,
                nonprunable_params: 0,
            },
            source: RunSource::Measured,
        });
    }
    if records.is_empty() {
        return Err(SchemaError::Empty { path: p }.into());
    }
    Ok(records)
}

/// Appends one record to a dataset CSV, writing the header first if the file
/// does not exist yet.
pub fn append_run_record(path: &Path, record: &RunRecord) -> Result<()> {
    let fresh = !path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(file, "{}", DATASET_COLUMNS.join(","))?;
    }
    writeln!(file, "{}", format_record(record))?;
    Ok(())
}

/// Trajectory CSV with columns (segment_index, active_params, tokens).
pub fn write_trajectory(path: &Path, traj: &ParamTrajectory) -> Result<()> {
    let mut out = String::from("segment_index,active_params,tokens\n");
    for (i, s) in traj.segments().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i, s.active_params, s.tokens));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Simulated loss curve CSV with columns (cumulative_compute, loss).
pub fn write_sim_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut out = String::from("cumulative_compute,loss\n");
    for pt in curve {
        out.push_str(&format!("{},{}\n", pt.compute, pt.loss));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Training loss curve CSV with columns (step, train_loss).
pub fn write_train_curve(path: &Path, curve: &[LossPoint]) -> Result<()> {
    let mut out = String::from("step,train_loss\n");
    for pt in curve {
        out.push_str(&format!("{},{}\n", pt.step, pt.loss));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Structured text report for a unified-law fit.
pub fn unified_fit_report(fit: &ScalingLawFit, records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str("model: unified average-parameter scaling law\n");
    out.push_str("form: L = A / avg_params^alpha + B / tokens^beta + E\n");
    out.push_str(&format!("A: {}\n", fit.a));
    out.push_str(&format!("B: {}\n", fit.b));
    out.push_str(&format!("E: {}\n", fit.e));
    out.push_str(&format!("alpha: {}\n", fit.alpha));
    out.push_str(&format!("beta: {}\n", fit.beta));
    out.push_str(&format!("huber_objective: {:.6e}\n", fit.objective_value));
    out.push_str(&format!("starts_converged: {}\n", fit.n_starts_converged));
    out.push('\n');
    out.push_str("label,actual_loss,predicted_loss,abs_error\n");
    let mut total = 0.0;
    for r in records {
        let p = sparselaw::lawfit::predict_loss(fit, r.avg_params, r.total_tokens as f64);
        total += (p - r.final_loss).abs();
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.label.replace(',', ";"),
            r.final_loss,
            p,
            (p - r.final_loss).abs()
        ));
    }
    out.push_str(&format!(
        "\nmean_abs_error: {}\n",
        total / records.len() as f64
    ));
    out
}

/// Structured text report for a prior-sparse-law fit.
pub fn frantar_fit_report(fit: &FrantarLawFit, records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str("model: final-sparsity scaling law\n");
    out.push_str(
        "form: L = (a_S (1-S)^b_S + c_S) / final_params^b_N + (a_D / tokens)^b_D + c\n",
    );
    out.push_str(&format!("a_S: {}\n", fit.a_s));
    out.push_str(&format!("b_S: {}\n", fit.b_s));
    out.push_str(&format!("c_S: {}\n", fit.c_s));
    out.push_str(&format!("b_N: {}\n", fit.b_n));
    out.push_str(&format!("a_D: {}\n", fit.a_d));
    out.push_str(&format!("b_D: {}\n", fit.b_d));
    out.push_str(&format!("c: {}\n", fit.c));
    out.push_str(&format!("huber_objective: {:.6e}\n", fit.objective_value));
    out.push_str(&format!("starts_converged: {}\n", fit.n_starts_converged));
    out.push_str(&format!("sparsity_identified: {}\n", fit.sparsity_identified));
    out.push('\n');
    out.push_str("label,actual_loss,predicted_loss,abs_error\n");
    let mut total = 0.0;
    for r in records {
        let p = sparselaw::lawfit::predict_loss_frantar(
            fit,
            r.sparsity,
            r.final_nonzero_params as f64,
            r.total_tokens as f64,
        );
        total += (p - r.final_loss).abs();
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.label.replace(',', ";"),
            r.final_loss,
            p,
            (p - r.final_loss).abs()
        ));
    }
    out.push_str(&format!(
        "\nmean_abs_error: {}\n",
        total / records.len() as f64
    ));
    out
}

pub const PRESCRIPTION_COLUMNS: [&str; 9] = [
    "name",
    "avg_params",
    "final_params",
    "tokens",
    "sparsity",
    "train_flops",
    "inference_flops",
    "lifetime_flops",
    "achieved_loss",
];

pub fn write_prescriptions(path: &Path, rows: &[(String, Prescription)]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&PRESCRIPTION_COLUMNS.join(","));
    out.push('\n');
    for (name, p) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            name.replace(',', ";"),
            p.avg_params,
            p.final_params,
            p.tokens,
            p.sparsity,
            p.train_flops,
            p.inference_flops,
            p.lifetime_flops,
            p.achieved_loss
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn prescription_table(rows: &[(String, Prescription)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<18} {:>12} {:>12} {:>12} {:>9} {:>13} {:>13} {:>13} {:>10}\n",
        "name",
        "avg_params",
        "final_params",
        "tokens",
        "sparsity",
        "train_flops",
        "inf_flops",
        "lifetime",
        "loss"
    ));
    for (name, p) in rows {
        out.push_str(&format!(
            "{:<18} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.2} {:>13.4e} {:>13.4e} {:>13.4e} {:>10.4}\n",
            name,
            p.avg_params,
            p.final_params,
            p.tokens,
            p.sparsity,
            p.train_flops,
            p.inference_flops,
            p.lifetime_flops,
            p.achieved_loss
        ));
    }
    out
}
