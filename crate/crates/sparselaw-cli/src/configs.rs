//! Builders from key-value config files to typed configurations.

use anyhow::Result;
use sparselaw::schedule::{Accounting, ModelShape, SparsityScheduleConfig};
use sparselaw::trainer::{LrSchedule, TinyLmSpec, TrainConfig};

use crate::kvconfig::KvConfig;

pub fn schedule_from_config(cfg: &KvConfig) -> Result<SparsityScheduleConfig> {
    let shape = ModelShape {
        prunable_params: cfg.u64("prunable_params")?,
        nonprunable_params: cfg.u64_or("nonprunable_params", 0)?,
    };
    Ok(SparsityScheduleConfig {
        shape,
        target_sparsity: cfg.f64("target_sparsity")?,
        dense_fraction: cfg.f64_or("dense_fraction", 0.25)?,
        prune_fraction: cfg.f64_or("prune_fraction", 0.5)?,
        steps_per_iteration: cfg.u64_or("steps_per_iteration", 100)?,
        tokens_per_step: cfg.u64("tokens_per_step")?,
        total_compute: cfg.f64("total_compute")?,
        accounting: accounting(cfg)?,
    })
}

pub fn accounting(cfg: &KvConfig) -> Result<Accounting> {
    Ok(match cfg.str_or("accounting", "total") {
        "prunable_only" => Accounting::PrunableOnly,
        _ => Accounting::Total,
    })
}

pub fn train_from_config(cfg: &KvConfig, seed: u64) -> Result<TrainConfig> {
    let lr_schedule = match cfg.str_or("lr_schedule", "constant") {
        "warmup_cosine" => LrSchedule::WarmupCosine {
            warmup_steps: cfg.u64_or("warmup_steps", 100)?,
            min_factor: cfg.f64_or("min_lr_factor", 0.1)?,
        },
        _ => LrSchedule::Constant,
    };
    Ok(TrainConfig {
        spec: TinyLmSpec {
            context: cfg.u64_or("context", 4)? as usize,
            embed_dim: cfg.u64_or("embed_dim", 16)? as usize,
            hidden_dim: cfg.u64_or("hidden_dim", 256)? as usize,
        },
        target_sparsity: cfg.f64("target_sparsity")?,
        dense_fraction: cfg.f64_or("dense_fraction", 0.25)?,
        prune_fraction: cfg.f64_or("prune_fraction", 0.5)?,
        steps_per_iteration: cfg.u64_or("steps_per_iteration", 100)?,
        total_compute: cfg.f64("total_compute")?,
        batch_size: cfg.u64_or("batch_size", 32)?,
        learning_rate: cfg.f64_or("learning_rate", 0.08)?,
        lr_schedule,
        seed,
        eval_fraction: cfg.f64_or("eval_fraction", 0.1)?,
        label: cfg.str_or("label", "train").to_string(),
    })
}

/// Parses `A,B,E,alpha,beta` into law constants.
pub fn constants_from_arg(arg: &str) -> Result<sparselaw::lawfit::ScalingLawFit> {
    let parts: Vec<f64> = arg
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow::anyhow!("--constants expects `A,B,E,alpha,beta`"))?;
    if parts.len() != 5 {
        anyhow::bail!("--constants expects exactly five values `A,B,E,alpha,beta`");
    }
    Ok(sparselaw::lawfit::ScalingLawFit {
        a: parts[0],
        b: parts[1],
        e: parts[2],
        alpha: parts[3],
        beta: parts[4],
        objective_value: 0.0,
        n_starts_converged: 0,
    })
}
