//! Report emission: CSV plus a static SVG figure per kind, with a
//! best-configuration summary line.

use std::path::Path;

use anyhow::{bail, Result};
use sparselaw::lawfit::{predict_loss, ScalingLawFit};
use sparselaw::record::RunRecord;
use sparselaw::schedule::ParamTrajectory;

use crate::store::StoreRow;
use crate::svgplot::{Axis, Plot, PALETTE};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no results to report (empty input)")]
    EmptyResults,
    #[error("results rows are missing `{0}` values")]
    MissingValues(&'static str),
}

fn ok_rows(rows: &[StoreRow]) -> Result<Vec<&StoreRow>> {
    let ok: Vec<&StoreRow> = rows.iter().filter(|r| r.succeeded()).collect();
    if ok.is_empty() {
        bail!(ReportError::EmptyResults);
    }
    if ok.iter().any(|r| r.final_loss.is_none()) {
        bail!(ReportError::MissingValues("final_loss"));
    }
    Ok(ok)
}

/// Per-(dense, prune) bars grouped by sparsity, one file pair. Returns the
/// summary line.
pub fn schedule_sweep_report(rows: &[StoreRow], out_dir: &Path) -> Result<String> {
    let mut ok = ok_rows(rows)?;
    ok.sort_by(|a, b| {
        (a.sparsity, a.dense_fraction, a.prune_fraction, a.total_compute)
            .partial_cmp(&(b.sparsity, b.dense_fraction, b.prune_fraction, b.total_compute))
            .unwrap()
    });

    let mut csv = String::from(
        "dense_fraction,prune_fraction,sparsity,total_compute,avg_params,total_tokens,final_loss\n",
    );
    for r in &ok {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.dense_fraction,
            r.prune_fraction,
            r.sparsity,
            r.total_compute,
            r.avg_params.unwrap_or(f64::NAN),
            r.total_tokens.unwrap_or(0),
            r.final_loss.unwrap()
        ));
    }
    std::fs::write(out_dir.join("schedule_sweep.csv"), csv)?;

    // x axis: allocation pairs in a fixed order
    let mut pairs: Vec<(f64, f64)> = ok
        .iter()
        .map(|r| (r.dense_fraction, r.prune_fraction))
        .collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pairs.dedup();
    let mut sparsities: Vec<f64> = ok.iter().map(|r| r.sparsity).collect();
    sparsities.sort_by(f64::total_cmp);
    sparsities.dedup();

    let losses: Vec<f64> = ok.iter().map(|r| r.final_loss.unwrap()).collect();
    let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut plot = Plot::new(
        "final loss by compute allocation (dense, prune)",
        Axis::linear("allocation pair index", -0.5, pairs.len() as f64 - 0.5),
        Axis::linear("final loss", lo - 0.05 * (hi - lo).max(1e-9), hi),
    );
    let group = 0.8 / sparsities.len() as f64;
    for (si, &s) in sparsities.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        plot.legend(si, &format!("sparsity {s}"), color);
        for r in ok.iter().filter(|r| r.sparsity == s) {
            let pi = pairs
                .iter()
                .position(|&p| p == (r.dense_fraction, r.prune_fraction))
                .unwrap();
            let x = pi as f64 - 0.4 + group * (si as f64 + 0.5);
            plot.bar(x, r.final_loss.unwrap(), 560.0 / pairs.len() as f64 * group, color);
        }
    }
    for (pi, &(d, p)) in pairs.iter().enumerate() {
        plot.label(pi as f64 - 0.3, lo - 0.02 * (hi - lo).max(1e-9), &format!("({d},{p})"), "#333");
    }
    plot.save(&out_dir.join("schedule_sweep.svg"))?;

    let best = ok
        .iter()
        .min_by(|a, b| a.final_loss.unwrap().total_cmp(&b.final_loss.unwrap()))
        .unwrap();
    let summary = format!(
        "best configuration: (dense={}, prune={}) sparsity={} compute={:.3e} loss={:.6}; worst-best delta={:.6}",
        best.dense_fraction,
        best.prune_fraction,
        best.sparsity,
        best.total_compute,
        best.final_loss.unwrap(),
        hi - best.final_loss.unwrap()
    );
    Ok(summary)
}

/// Learning-rate x batch-size grid, one file pair. Returns the summary line.
pub fn lr_bs_sweep_report(rows: &[StoreRow], out_dir: &Path) -> Result<String> {
    let ok = ok_rows(rows)?;
    if ok.iter().any(|r| r.learning_rate.is_none() || r.batch_size.is_none()) {
        bail!(ReportError::MissingValues("learning_rate/batch_size"));
    }
    let mut csv = String::from("learning_rate,batch_size,sparsity,final_loss\n");
    for r in &ok {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.learning_rate.unwrap(),
            r.batch_size.unwrap(),
            r.sparsity,
            r.final_loss.unwrap()
        ));
    }
    std::fs::write(out_dir.join("lr_bs_sweep.csv"), csv)?;

    let mut lrs: Vec<f64> = ok.iter().map(|r| r.learning_rate.unwrap()).collect();
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    let mut batches: Vec<u64> = ok.iter().map(|r| r.batch_size.unwrap()).collect();
    batches.sort_unstable();
    batches.dedup();

    let mut plot = Plot::new(
        "final loss over learning rate x batch size",
        Axis::linear("learning-rate index", -0.5, lrs.len() as f64 - 0.5),
        Axis::linear("batch-size index", -0.7, batches.len() as f64 - 0.3),
    );
    let best_loss = ok
        .iter()
        .map(|r| r.final_loss.unwrap())
        .fold(f64::INFINITY, f64::min);
    for r in &ok {
        let xi = lrs.iter().position(|&v| v == r.learning_rate.unwrap()).unwrap();
        let yi = batches.iter().position(|&v| v == r.batch_size.unwrap()).unwrap();
        let is_best = r.final_loss.unwrap() == best_loss;
        let color = if is_best { PALETTE[1] } else { PALETTE[0] };
        plot.label(
            xi as f64 - 0.2,
            yi as f64,
            &format!(
                "lr={} bs={}: {:.4}{}",
                r.learning_rate.unwrap(),
                r.batch_size.unwrap(),
                r.final_loss.unwrap(),
                if is_best { " *" } else { "" }
            ),
            color,
        );
    }
    plot.save(&out_dir.join("lr_bs_sweep.svg"))?;

    let best = ok
        .iter()
        .min_by(|a, b| a.final_loss.unwrap().total_cmp(&b.final_loss.unwrap()))
        .unwrap();
    Ok(format!(
        "best hyperparameters: lr={} batch={} loss={:.6}",
        best.learning_rate.unwrap(),
        best.batch_size.unwrap(),
        best.final_loss.unwrap()
    ))
}

/// Predicted-versus-actual scatter for a fitted law. Returns the summary
/// line.
pub fn fit_report_files(
    fit: &ScalingLawFit,
    records: &[RunRecord],
    out_dir: &Path,
) -> Result<String> {
    if records.is_empty() {
        bail!(ReportError::EmptyResults);
    }
    let mut csv = String::from("label,actual_loss,predicted_loss\n");
    let mut points = Vec::with_capacity(records.len());
    let mut total_err = 0.0;
    for r in records {
        let p = predict_loss(fit, r.avg_params, r.total_tokens as f64);
        total_err += (p - r.final_loss).abs();
        points.push((r.final_loss, p));
        csv.push_str(&format!(
            "{},{},{}\n",
            r.label.replace(',', ";"),
            r.final_loss,
            p
        ));
    }
    std::fs::write(out_dir.join("fit_scatter.csv"), csv)?;

    let lo = points
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut plot = Plot::new(
        "predicted versus actual final loss",
        Axis::linear("actual loss", lo, hi),
        Axis::linear("predicted loss", lo, hi),
    );
    plot.line(&[(lo, lo), (hi, hi)], "#999");
    plot.scatter(&points, PALETTE[0]);
    plot.save(&out_dir.join("fit_scatter.svg"))?;
    Ok(format!(
        "fit: A={:.4} B={:.4} E={:.4} alpha={:.4} beta={:.4} mean_abs_error={:.6}",
        fit.a,
        fit.b,
        fit.e,
        fit.alpha,
        fit.beta,
        total_err / records.len() as f64
    ))
}

/// Lifetime-compute bars for a prescription CSV produced by `prescribe`.
pub fn prescription_report(csv_path: &Path, out_dir: &Path) -> Result<String> {
    let text = std::fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or(ReportError::EmptyResults)?
        .split(',')
        .collect();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| crate::formats::SchemaError::MissingColumn {
                path: csv_path.display().to_string(),
                column: name.to_string(),
            }.into())
    };
    let (ci_name, ci_life, ci_train, ci_inf) = (
        col("name")?,
        col("lifetime_flops")?,
        col("train_flops")?,
        col("inference_flops")?,
    );
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        rows.push((
            f[ci_name].to_string(),
            f[ci_life].parse::<f64>().unwrap_or(f64::NAN),
            f[ci_train].parse::<f64>().unwrap_or(f64::NAN),
            f[ci_inf].parse::<f64>().unwrap_or(f64::NAN),
        ));
    }
    if rows.is_empty() {
        bail!(ReportError::EmptyResults);
    }
    let hi = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut plot = Plot::new(
        "lifetime compute by prescription",
        Axis::linear("prescription", -0.5, rows.len() as f64 - 0.5),
        Axis::linear("FLOPs", 0.0, hi),
    );
    for (i, (name, life, train, _inf)) in rows.iter().enumerate() {
        plot.bar(i as f64, *life, 60.0, PALETTE[0]);
        plot.bar(i as f64, *train, 60.0, PALETTE[1]);
        plot.label(i as f64 - 0.3, life * 1.02, name, "#333");
    }
    plot.legend(0, "lifetime", PALETTE[0]);
    plot.legend(1, "training share", PALETTE[1]);
    plot.save(&out_dir.join("prescription.svg"))?;
    let best = rows
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(format!(
        "cheapest lifetime: {} at {:.4e} FLOPs",
        best.0, best.1
    ))
}

/// Active-parameter step plot of a trajectory.
pub fn trajectory_report(traj: &ParamTrajectory, out_dir: &Path) -> Result<String> {
    crate::formats::write_trajectory(&out_dir.join("trajectory.csv"), traj)?;
    let mut points = Vec::new();
    let mut tokens = 0u64;
    for s in traj.segments() {
        points.push((tokens as f64, s.active_params as f64));
        tokens += s.tokens;
        points.push((tokens as f64, s.active_params as f64));
    }
    let hi = traj.segments().iter().map(|s| s.active_params).max().unwrap() as f64;
    let mut plot = Plot::new(
        "active parameters over training tokens",
        Axis::linear("tokens", 0.0, tokens as f64),
        Axis::linear("active parameters", 0.0, hi),
    );
    plot.line(&points, PALETTE[0]);
    plot.save(&out_dir.join("trajectory.svg"))?;
    Ok(format!(
        "trajectory: {} segments, {} tokens, final {} active parameters",
        traj.len(),
        tokens,
        traj.final_active_params()
    ))
}
