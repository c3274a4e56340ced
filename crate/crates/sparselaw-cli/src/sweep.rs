//! Schedule-grid enumeration and the resumable sweep runner.

use std::collections::HashSet;
use std::path::Path;
use std::sync::mpsc;
use std::sync::Mutex;

use anyhow::{Context, Result};
use sparselaw::lawfit::{predict_loss, ScalingLawFit};
use sparselaw::schedule::{
    average_params, build_schedule, Accounting, ModelShape, SparsityScheduleConfig,
};
use sparselaw::trainer::{run_sparse_pretraining, LrSchedule, TinyLmSpec, TrainConfig};

use crate::kvconfig::KvConfig;
use crate::store::{append_row, content_hash, derive_seed, read_rows, StoreRow, STORE_SCHEMA_VERSION};

/// Sweep axes. Pairs of (dense, prune) fractions are filtered by
/// `dense + prune <= 1` before enumeration.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub dense_fractions: Vec<f64>,
    pub prune_fractions: Vec<f64>,
    pub sparsities: Vec<f64>,
    /// Total-compute budgets (training durations).
    pub durations: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<u64>,
}

/// Non-axis schedule parameters shared by every configuration.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub shape: ModelShape,
    pub steps_per_iteration: u64,
    pub tokens_per_step: u64,
    pub accounting: Accounting,
}

/// One enumerated work item.
#[derive(Debug, Clone)]
pub struct SweepJob {
    pub index: usize,
    pub config: SparsityScheduleConfig,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<u64>,
}

impl SweepJob {
    /// Canonical text serialization; the content hash and per-run seed key.
    pub fn canonical(&self, runner: &str) -> String {
        let mut s = format!(
            "v1|runner={runner}|prunable={}|nonprunable={}|sparsity={}|dense={}|prune={}|steps_per_iteration={}|tokens_per_step={}|total_compute={}|accounting={:?}",
            self.config.shape.prunable_params,
            self.config.shape.nonprunable_params,
            self.config.target_sparsity,
            self.config.dense_fraction,
            self.config.prune_fraction,
            self.config.steps_per_iteration,
            self.config.tokens_per_step,
            self.config.total_compute,
            self.config.accounting,
        );
        if let Some(lr) = self.learning_rate {
            s.push_str(&format!("|lr={lr}"));
        }
        if let Some(bs) = self.batch_size {
            s.push_str(&format!("|batch={bs}"));
        }
        s
    }

    pub fn label(&self) -> String {
        let mut s = format!(
            "d{}_p{}_s{}_c{:.3e}",
            self.config.dense_fraction,
            self.config.prune_fraction,
            self.config.target_sparsity,
            self.config.total_compute
        );
        if let Some(lr) = self.learning_rate {
            s.push_str(&format!("_lr{lr}"));
        }
        if let Some(bs) = self.batch_size {
            s.push_str(&format!("_b{bs}"));
        }
        s
    }
}

/// Cross product of the schedule axes filtered by phase-fraction validity,
/// ordered lexicographically by (dense, prune, sparsity, duration).
pub fn enumerate_schedules(grid: &SweepGrid, base: &SweepBase) -> Vec<SparsityScheduleConfig> {
    let mut out = Vec::new();
    for &dense in &grid.dense_fractions {
        for &prune in &grid.prune_fractions {
            if dense + prune > 1.0 + 1e-12 {
                continue;
            }
            for &sparsity in &grid.sparsities {
                for &compute in &grid.durations {
                    out.push(SparsityScheduleConfig {
                        shape: base.shape,
                        target_sparsity: sparsity,
                        dense_fraction: dense,
                        prune_fraction: prune,
                        steps_per_iteration: base.steps_per_iteration,
                        tokens_per_step: base.tokens_per_step,
                        total_compute: compute,
                        accounting: base.accounting,
                    });
                }
            }
        }
    }
    out
}

/// Expands schedules with the hyperparameter axes (trainer sweeps only).
pub fn enumerate_jobs(grid: &SweepGrid, base: &SweepBase, with_hyper: bool) -> Vec<SweepJob> {
    let schedules = enumerate_schedules(grid, base);
    let mut jobs = Vec::new();
    let mut index = 0;
    for config in schedules {
        if with_hyper {
            for &lr in &grid.learning_rates {
                for &bs in &grid.batch_sizes {
                    let mut cfg = config;
                    cfg.tokens_per_step = bs;
                    jobs.push(SweepJob {
                        index,
                        config: cfg,
                        learning_rate: Some(lr),
                        batch_size: Some(bs),
                    });
                    index += 1;
                }
            }
        } else {
            jobs.push(SweepJob {
                index,
                config,
                learning_rate: None,
                batch_size: None,
            });
            index += 1;
        }
    }
    jobs
}

/// What executes each configuration.
pub enum Runner {
    /// Scores a schedule with the unified law at its average parameter count
    /// and token count: the loss a run with this schedule is predicted to
    /// reach at this budget.
    TheorySim { law: ScalingLawFit },
    /// Real desk-scale training.
    Trainer {
        spec: TinyLmSpec,
        corpus: String,
        learning_rate: f64,
        eval_fraction: f64,
    },
}

impl Runner {
    pub fn name(&self) -> &'static str {
        match self {
            Runner::TheorySim { .. } => "theorysim",
            Runner::Trainer { .. } => "trainer",
        }
    }

    fn execute(&self, job: &SweepJob, seed: u64) -> Result<RowResult> {
        match self {
            Runner::TheorySim { law } => {
                let traj = build_schedule(&job.config)?;
                let avg = average_params(&traj);
                let tokens = traj.total_tokens();
                Ok(RowResult {
                    avg_params: avg,
                    total_tokens: tokens,
                    final_loss: predict_loss(law, avg, tokens as f64),
                    final_nonzero_params: traj.final_active_params(),
                })
            }
            Runner::Trainer {
                spec,
                corpus,
                learning_rate,
                eval_fraction,
            } => {
                let cfg = TrainConfig {
                    spec: *spec,
                    target_sparsity: job.config.target_sparsity,
                    dense_fraction: job.config.dense_fraction,
                    prune_fraction: job.config.prune_fraction,
                    steps_per_iteration: job.config.steps_per_iteration,
                    total_compute: job.config.total_compute,
                    batch_size: job.batch_size.unwrap_or(job.config.tokens_per_step),
                    learning_rate: job.learning_rate.unwrap_or(*learning_rate),
                    lr_schedule: LrSchedule::Constant,
                    seed,
                    eval_fraction: *eval_fraction,
                    label: job.label(),
                };
                let out = run_sparse_pretraining(&cfg, corpus)?;
                Ok(RowResult {
                    avg_params: out.record.avg_params,
                    total_tokens: out.record.total_tokens,
                    final_loss: out.record.final_loss,
                    final_nonzero_params: out.record.final_nonzero_params,
                })
            }
        }
    }
}

struct RowResult {
    avg_params: f64,
    total_tokens: u64,
    final_loss: f64,
    final_nonzero_params: u64,
}

pub struct SweepSummary {
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs every job not already completed in the store. Individual failures
/// are recorded per row and never abort the sweep. Jobs run on `workers`
/// threads; rows funnel through a single writer.
pub fn run_sweep(
    jobs: &[SweepJob],
    runner: &Runner,
    store_path: &Path,
    global_seed: u64,
    workers: usize,
) -> Result<SweepSummary> {
    let done: HashSet<String> = read_rows(store_path)?
        .into_iter()
        .filter(|r| r.succeeded())
        .map(|r| r.config_hash)
        .collect();

    let pending: Vec<&SweepJob> = jobs
        .iter()
        .filter(|j| !done.contains(&content_hash(&j.canonical(runner.name()))))
        .collect();
    let skipped = jobs.len() - pending.len();

    let queue = Mutex::new(pending.into_iter());
    let (tx, rx) = mpsc::channel::<StoreRow>();
    let mut executed = 0;
    let mut failed = 0;

    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers.max(1) {
            let tx = tx.clone();
            let queue = &queue;
            scope.spawn(move || loop {
                let job = match queue.lock().unwrap().next() {
                    Some(j) => j,
                    None => break,
                };
                let canonical = job.canonical(runner.name());
                let seed = derive_seed(global_seed, &canonical);
                let mut row = StoreRow {
                    schema_version: STORE_SCHEMA_VERSION,
                    config_hash: content_hash(&canonical),
                    config_index: job.index,
                    runner: runner.name().to_string(),
                    seed,
                    label: job.label(),
                    dense_fraction: job.config.dense_fraction,
                    prune_fraction: job.config.prune_fraction,
                    sparsity: job.config.target_sparsity,
                    total_compute: job.config.total_compute,
                    learning_rate: job.learning_rate,
                    batch_size: job.batch_size,
                    status: "ok".into(),
                    error: None,
                    avg_params: None,
                    total_tokens: None,
                    final_loss: None,
                    final_nonzero_params: None,
                };
                match runner.execute(job, seed) {
                    Ok(res) => {
                        row.avg_params = Some(res.avg_params);
                        row.total_tokens = Some(res.total_tokens);
                        row.final_loss = Some(res.final_loss);
                        row.final_nonzero_params = Some(res.final_nonzero_params);
                    }
                    Err(e) => {
                        row.status = "failed".into();
                        row.error = Some(format!("{e:#}"));
                    }
                }
                if tx.send(row).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for row in rx {
            if row.status != "ok" {
                failed += 1;
                eprintln!("sweep: config {} failed: {}", row.label, row.error.as_deref().unwrap_or(""));
            }
            executed += 1;
            append_row(store_path, &row)
                .with_context(|| format!("appending to {}", store_path.display()))?;
        }
        Ok(())
    })?;

    Ok(SweepSummary {
        executed,
        skipped,
        failed,
    })
}

/// Reads the grid axes and base schedule from a config file.
pub fn grid_from_config(cfg: &KvConfig) -> Result<(SweepGrid, SweepBase)> {
    let grid = SweepGrid {
        dense_fractions: cfg.f64_list_or("dense_fractions", &[0.0, 0.25, 0.5, 0.75])?,
        prune_fractions: cfg.f64_list_or("prune_fractions", &[0.25, 0.5, 0.75, 1.0])?,
        sparsities: cfg.f64_list_or("sparsities", &[0.2, 0.4, 0.6, 0.8])?,
        durations: cfg.f64_list_or("durations", &[1e10, 2e10])?,
        learning_rates: cfg.f64_list_or("learning_rates", &[0.08])?,
        batch_sizes: cfg.u64_list_or("batch_sizes", &[32])?,
    };
    let base = SweepBase {
        shape: ModelShape {
            prunable_params: cfg.u64_or("prunable_params", 100_000)?,
            nonprunable_params: cfg.u64_or("nonprunable_params", 0)?,
        },
        steps_per_iteration: cfg.u64_or("steps_per_iteration", 100)?,
        tokens_per_step: cfg.u64_or("tokens_per_step", 32)?,
        accounting: match cfg.str_or("accounting", "total") {
            "prunable_only" => Accounting::PrunableOnly,
            _ => Accounting::Total,
        },
    };
    Ok((grid, base))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_grid() -> SweepGrid {
        SweepGrid {
            dense_fractions: vec![0.0, 0.25, 0.5, 0.75],
            prune_fractions: vec![0.25, 0.5, 0.75, 1.0],
            sparsities: vec![0.2, 0.4, 0.6, 0.8],
            durations: vec![1e10, 2e10],
            learning_rates: vec![0.08],
            batch_sizes: vec![32],
        }
    }

    fn base() -> SweepBase {
        SweepBase {
            shape: ModelShape {
                prunable_params: 100_000,
                nonprunable_params: 0,
            },
            steps_per_iteration: 100,
            tokens_per_step: 32,
            accounting: Accounting::PrunableOnly,
        }
    }

    #[test]
    fn grid_yields_ten_valid_pairs_and_eighty_configs() {
        let grid = paper_grid();
        let configs = enumerate_schedules(&grid, &base());
        assert_eq!(configs.len(), 80);
        let pairs: std::collections::BTreeSet<(u64, u64)> = configs
            .iter()
            .map(|c| {
                (
                    (c.dense_fraction * 100.0) as u64,
                    (c.prune_fraction * 100.0) as u64,
                )
            })
            .collect();
        assert_eq!(pairs.len(), 10);
    }

    #[test]
    fn invalid_pair_yields_empty_grid() {
        let grid = SweepGrid {
            dense_fractions: vec![0.75],
            prune_fractions: vec![0.5],
            sparsities: vec![0.8],
            durations: vec![1e10],
            learning_rates: vec![0.08],
            batch_sizes: vec![32],
        };
        assert!(enumerate_schedules(&grid, &base()).is_empty());
    }

    #[test]
    fn rerunning_a_completed_sweep_executes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("results.jsonl");
        let grid = SweepGrid {
            dense_fractions: vec![0.0, 0.25],
            prune_fractions: vec![0.5],
            sparsities: vec![0.8],
            durations: vec![1e10],
            learning_rates: vec![0.08],
            batch_sizes: vec![32],
        };
        let jobs = enumerate_jobs(&grid, &base(), false);
        let runner = Runner::TheorySim {
            law: ScalingLawFit::reference(),
        };
        let s1 = run_sweep(&jobs, &runner, &store, 0, 2).unwrap();
        assert_eq!(s1.executed, 2);
        assert_eq!(s1.skipped, 0);
        let s2 = run_sweep(&jobs, &runner, &store, 0, 2).unwrap();
        assert_eq!(s2.executed, 0);
        assert_eq!(s2.skipped, 2);
        assert_eq!(read_rows(&store).unwrap().len(), 2);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("results.jsonl");
        // a budget too small to fit one pruning iteration fails per-row
        let grid = SweepGrid {
            dense_fractions: vec![0.25],
            prune_fractions: vec![0.5],
            sparsities: vec![0.8],
            durations: vec![1e10, 1e5],
            learning_rates: vec![0.08],
            batch_sizes: vec![32],
        };
        let jobs = enumerate_jobs(&grid, &base(), false);
        let runner = Runner::TheorySim {
            law: ScalingLawFit::reference(),
        };
        let summary = run_sweep(&jobs, &runner, &store, 0, 1).unwrap();
        assert_eq!(summary.executed, 2);
        assert_eq!(summary.failed, 1);
        let rows = read_rows(&store).unwrap();
        assert_eq!(rows.iter().filter(|r| r.succeeded()).count(), 1);
        assert!(rows
            .iter()
            .any(|r| r.status == "failed" && r.error.as_deref().unwrap_or("").contains("infeasible")));
    }

    #[test]
    fn single_config_sweep_matches_direct_run() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("results.jsonl");
        let grid = SweepGrid {
            dense_fractions: vec![0.25],
            prune_fractions: vec![0.5],
            sparsities: vec![0.8],
            durations: vec![2e10],
            learning_rates: vec![0.08],
            batch_sizes: vec![32],
        };
        let jobs = enumerate_jobs(&grid, &base(), false);
        let law = ScalingLawFit::reference();
        let runner = Runner::TheorySim { law: law.clone() };
        run_sweep(&jobs, &runner, &store, 0, 1).unwrap();
        let rows = read_rows(&store).unwrap();
        assert_eq!(rows.len(), 1);
        let traj = build_schedule(&jobs[0].config).unwrap();
        let expect = predict_loss(&law, average_params(&traj), traj.total_tokens() as f64);
        assert_eq!(rows[0].final_loss.unwrap().to_bits(), expect.to_bits());
    }
}
