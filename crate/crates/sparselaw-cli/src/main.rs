//! `sparselaw`: plan, fit, prescribe, simulate, train, sweep, and report on
//! sparse pre-training schedules.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use sparselaw::lawfit::{self, FitOptions, ScalingLawFit};
use sparselaw::prescribe::{solve_chinchilla, solve_lifetime};
use sparselaw::record::RecordError;
use sparselaw::schedule::{
    average_params, build_schedule, compression_rate, effective_compute, match_dense,
    solve_iterations, ScheduleError,
};
use sparselaw::theorysim::{
    coefficient_series, flatness, simulate_trajectory, BurnIn, SimError, SimOptions, TheoryParams,
};
use sparselaw::trainer::{run_sparse_pretraining, TrainError, BUNDLED_CORPUS};

use sparselaw_cli::configs::{constants_from_arg, schedule_from_config, train_from_config};
use sparselaw_cli::kvconfig::KvConfig;
use sparselaw_cli::{checkpoint, formats, report, store, sweep};

#[derive(Parser)]
#[command(
    name = "sparselaw",
    version,
    about = "Sparse pre-training schedules, scaling-law fits, and compute-optimal prescriptions"
)]
struct Cli {
    /// Global random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output directory for emitted files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Key-value configuration file (see README for the keys per command).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize a sparsity schedule and print its statistics.
    Schedule,
    /// Fit the unified average-parameter scaling law to a run dataset.
    Fit {
        /// Dataset CSV (label,avg_params,total_tokens,final_loss,sparsity,final_nonzero_params).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        starts: u32,
        #[arg(long, default_value_t = 1000)]
        max_iterations: usize,
    },
    /// Fit the final-sparsity law for side-by-side comparison.
    FitFrantar {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        starts: u32,
        #[arg(long, default_value_t = 1000)]
        max_iterations: usize,
    },
    /// Solve compute-optimal prescriptions at a target loss.
    Prescribe {
        #[arg(long)]
        target_loss: f64,
        /// Expected inference traffic in tokens.
        #[arg(long, default_value_t = 0.0)]
        inference_tokens: f64,
        #[arg(long, default_value_t = 0.8)]
        sparsity: f64,
        /// Compression rate (average / final parameters). Defaults to the
        /// rate of the schedule in --config, or 1 for dense.
        #[arg(long)]
        compression: Option<f64>,
        /// Law constants `A,B,E,alpha,beta`; defaults to the published dense
        /// fit.
        #[arg(long)]
        constants: Option<String>,
    },
    /// Simulate a loss trajectory under the power-law compute model.
    Simulate {
        /// Decay exponent of the loss-versus-compute law.
        #[arg(long, default_value_t = 0.203)]
        alpha: f64,
        /// Compute scale A of the law (loss = (A/C)^alpha).
        #[arg(long, default_value_t = 1e12)]
        compute_scale: f64,
        /// Burn-in as a fraction of total compute.
        #[arg(long, default_value_t = 0.026)]
        burn_in: f64,
    },
    /// Run sparse pre-training on the bundled miniature LM.
    Train,
    /// Run a schedule sweep with the theory scorer or the real trainer.
    Sweep {
        #[arg(long, value_enum)]
        runner: RunnerKind,
        /// Results store path; defaults to <out-dir>/results.jsonl.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Also sweep the learning-rate and batch-size axes (trainer only).
        #[arg(long, default_value_t = false)]
        hyper: bool,
    },
    /// Render CSV + SVG reports from results.
    Report {
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// Results store (JSONL) for sweep kinds, prescriptions CSV for the
        /// prescription kind.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Dataset CSV for the fit kind.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RunnerKind {
    Theorysim,
    Trainer,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    ScheduleSweep,
    LrBsSweep,
    Fit,
    Prescription,
    Trajectory,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit_code_for(&e));
        }
    }
}

/// 1 for usage/configuration/io problems, 2 for infeasible or ill-posed
/// domain errors.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ScheduleError>()
            || cause.is::<lawfit::FitError>()
            || cause.is::<sparselaw::prescribe::PrescribeError>()
            || cause.is::<SimError>()
            || cause.is::<TrainError>()
            || cause.is::<RecordError>()
        {
            return 2;
        }
    }
    1
}

fn load_config(path: &Option<PathBuf>) -> Result<KvConfig> {
    let path = path
        .as_ref()
        .context("this command needs --config <file>")?;
    Ok(KvConfig::load(path)?)
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cli: Cli) -> Result<i32> {
    ensure_out_dir(&cli.out_dir)?;
    match cli.command {
        Command::Schedule => cmd_schedule(&cli),
        Command::Fit {
            ref data,
            starts,
            max_iterations,
        } => cmd_fit(&cli, data, starts, max_iterations, false),
        Command::FitFrantar {
            ref data,
            starts,
            max_iterations,
        } => cmd_fit(&cli, data, starts, max_iterations, true),
        Command::Prescribe {
            target_loss,
            inference_tokens,
            sparsity,
            compression,
            ref constants,
        } => cmd_prescribe(
            &cli,
            target_loss,
            inference_tokens,
            sparsity,
            compression,
            constants.as_deref(),
        ),
        Command::Simulate {
            alpha,
            compute_scale,
            burn_in,
        } => cmd_simulate(&cli, alpha, compute_scale, burn_in),
        Command::Train => cmd_train(&cli),
        Command::Sweep {
            runner,
            ref store,
            hyper,
        } => cmd_sweep(&cli, runner, store.clone(), hyper),
        Command::Report {
            kind,
            ref results,
            ref data,
        } => cmd_report(&cli, kind, results.clone(), data.clone()),
    }
}

fn cmd_schedule(cli: &Cli) -> Result<i32> {
    let kv = load_config(&cli.config)?;
    let cfg = schedule_from_config(&kv)?;
    kv.warn_unused();
    let traj = build_schedule(&cfg)?;

    let base = match cfg.accounting {
        sparselaw::schedule::Accounting::Total => cfg.shape.total_params(),
        sparselaw::schedule::Accounting::PrunableOnly => cfg.shape.prunable_params,
    };
    let avg = average_params(&traj);
    println!("segments: {}", traj.len());
    println!("total_tokens: {}", traj.total_tokens());
    println!("effective_compute: {:.6e}", effective_compute(&traj));
    if cfg.target_sparsity > 0.0 {
        let (k, removal) = solve_iterations(&cfg)?;
        println!("prune_iterations: {k}");
        println!("removal_fraction: {removal:.6}");
    }
    let (dense, prune, recovery) = traj.phase_compute();
    println!("phase_compute_dense: {dense:.6e}");
    println!("phase_compute_prune: {prune:.6e}");
    println!("phase_compute_recovery: {recovery:.6e}");
    println!("avg_params: {avg:.2}");
    println!("avg_params_fraction: {:.6}", avg / base as f64);
    println!("final_active_params: {}", traj.final_active_params());
    println!("compression_rate: {:.6}", compression_rate(&traj));
    println!("matched_dense_params: {}", match_dense(&traj).total_params());

    let csv = cli.out_dir.join("trajectory.csv");
    formats::write_trajectory(&csv, &traj)?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_fit(
    cli: &Cli,
    data: &Path,
    starts: u32,
    max_iterations: usize,
    frantar: bool,
) -> Result<i32> {
    let records = formats::read_run_records(data)?;
    let opts = FitOptions {
        starts,
        max_iterations,
        seed: cli.seed,
    };
    let (report_text, path) = if frantar {
        let fit = lawfit::fit_frantar(&records, &opts)?;
        println!(
            "a_S={:.6} b_S={:.6} c_S={:.6} b_N={:.6} a_D={:.6e} b_D={:.6} c={:.6}",
            fit.a_s, fit.b_s, fit.c_s, fit.b_n, fit.a_d, fit.b_d, fit.c
        );
        println!(
            "objective={:.6e} starts_converged={}",
            fit.objective_value, fit.n_starts_converged
        );
        (
            formats::frantar_fit_report(&fit, &records),
            cli.out_dir.join("fit_frantar_report.txt"),
        )
    } else {
        let fit = lawfit::fit(&records, &opts)?;
        println!(
            "A={:.6} B={:.6} E={:.6} alpha={:.6} beta={:.6}",
            fit.a, fit.b, fit.e, fit.alpha, fit.beta
        );
        println!(
            "objective={:.6e} starts_converged={}",
            fit.objective_value, fit.n_starts_converged
        );
        (
            formats::unified_fit_report(&fit, &records),
            cli.out_dir.join("fit_report.txt"),
        )
    };
    std::fs::write(&path, report_text)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_prescribe(
    cli: &Cli,
    target_loss: f64,
    inference_tokens: f64,
    sparsity: f64,
    compression: Option<f64>,
    constants: Option<&str>,
) -> Result<i32> {
    let law = match constants {
        Some(arg) => constants_from_arg(arg)?,
        None => ScalingLawFit::reference(),
    };

    let mut rows = Vec::new();
    rows.push((
        "train-optimal".to_string(),
        solve_chinchilla(&law, target_loss)?,
    ));
    if inference_tokens > 0.0 {
        rows.push((
            "lifetime-dense".to_string(),
            solve_lifetime(&law, target_loss, inference_tokens, 0.0, 1.0)?,
        ));
        if sparsity > 0.0 {
            let compression = match compression {
                Some(r) => r,
                None if cli.config.is_some() => {
                    let kv = load_config(&cli.config)?;
                    let cfg = schedule_from_config(&kv)?;
                    let traj = build_schedule(&cfg)?;
                    let r = compression_rate(&traj);
                    println!("compression_rate from schedule: {r:.4}");
                    r
                }
                None => bail!("sparse prescriptions need --compression or a schedule --config"),
            };
            rows.push((
                format!("lifetime-sparse-{sparsity}"),
                solve_lifetime(&law, target_loss, inference_tokens, sparsity, compression)?,
            ));
        }
    }
    print!("{}", formats::prescription_table(&rows));
    if rows.len() >= 3 {
        let dense = rows[1].1.lifetime_flops;
        let sparse = rows[2].1.lifetime_flops;
        println!(
            "lifetime saving of sparse over dense: {:.2}%",
            100.0 * (1.0 - sparse / dense)
        );
    }
    let csv = cli.out_dir.join("prescriptions.csv");
    formats::write_prescriptions(&csv, &rows)?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_simulate(cli: &Cli, alpha: f64, compute_scale: f64, burn_in: f64) -> Result<i32> {
    let kv = load_config(&cli.config)?;
    let cfg = schedule_from_config(&kv)?;
    kv.warn_unused();
    let traj = build_schedule(&cfg)?;
    let params = TheoryParams {
        compute_scale,
        alpha,
    };
    let opts = SimOptions {
        burn_in: BurnIn::FractionOfTotal(burn_in),
        ..SimOptions::default()
    };
    let sim = simulate_trajectory(&params, &traj, &opts)?;
    let series = coefficient_series(&params, &traj, &opts)?;
    let tail_start = traj.len() / 2;
    println!("curve_points: {}", sim.curve.len());
    println!("final_loss: {:.6}", sim.curve.last().unwrap().loss);
    println!("total_delta_loss: {:.6}", sim.total_delta);
    println!(
        "coefficient_flatness_final_half: {:.4}",
        flatness(&series, tail_start)
    );
    let csv = cli.out_dir.join("sim_curve.csv");
    formats::write_sim_curve(&csv, &sim.curve)?;
    println!("wrote {}", csv.display());
    Ok(0)
}

fn cmd_train(cli: &Cli) -> Result<i32> {
    let kv = load_config(&cli.config)?;
    let cfg = train_from_config(&kv, cli.seed)?;
    let corpus = match kv.str_opt("corpus_file") {
        Some(path) => std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?,
        None => BUNDLED_CORPUS.to_string(),
    };
    kv.warn_unused();

    let out = run_sparse_pretraining(&cfg, &corpus)?;
    println!("label: {}", out.record.label);
    println!("avg_params: {:.2}", out.record.avg_params);
    println!("total_tokens: {}", out.record.total_tokens);
    println!("final_eval_loss: {:.6}", out.record.final_loss);
    println!("sparsity: {}", out.record.sparsity);
    println!("final_nonzero_params: {}", out.record.final_nonzero_params);
    println!("compression_rate: {:.4}", compression_rate(&out.executed));

    let runs = cli.out_dir.join("runs.csv");
    formats::append_run_record(&runs, &out.record)?;
    let curve = cli.out_dir.join("train_curve.csv");
    formats::write_train_curve(&curve, &out.curve)?;
    let ckpt = cli.out_dir.join("checkpoint.bin");
    checkpoint::write_checkpoint(&ckpt, &out.model)?;
    println!("wrote {}", runs.display());
    println!("wrote {}", curve.display());
    println!("wrote {}", ckpt.display());
    Ok(0)
}

fn cmd_sweep(cli: &Cli, runner: RunnerKind, store: Option<PathBuf>, hyper: bool) -> Result<i32> {
    let kv = load_config(&cli.config)?;
    let (grid, base) = sweep::grid_from_config(&kv)?;
    let store_path = store.unwrap_or_else(|| cli.out_dir.join("results.jsonl"));

    let runner = match runner {
        RunnerKind::Theorysim => sweep::Runner::TheorySim {
            law: match kv.str_opt("constants") {
                Some(arg) => constants_from_arg(&arg)?,
                None => ScalingLawFit::reference(),
            },
        },
        RunnerKind::Trainer => sweep::Runner::Trainer {
            spec: sparselaw::trainer::TinyLmSpec {
                context: kv.u64_or("context", 4)? as usize,
                embed_dim: kv.u64_or("embed_dim", 16)? as usize,
                hidden_dim: kv.u64_or("hidden_dim", 64)? as usize,
            },
            corpus: match kv.str_opt("corpus_file") {
                Some(path) => {
                    std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?
                }
                None => BUNDLED_CORPUS.to_string(),
            },
            learning_rate: kv.f64_or("learning_rate", 0.08)?,
            eval_fraction: kv.f64_or("eval_fraction", 0.1)?,
        },
    };
    kv.warn_unused();

    let with_hyper = hyper && matches!(runner, sweep::Runner::Trainer { .. });
    let jobs = sweep::enumerate_jobs(&grid, &base, with_hyper);
    if jobs.is_empty() {
        eprintln!("warning: the grid enumerates to zero valid configurations");
        return Ok(0);
    }
    println!(
        "sweep: {} configurations ({} runner, {} workers)",
        jobs.len(),
        runner.name(),
        cli.workers.max(1)
    );
    let summary = sweep::run_sweep(&jobs, &runner, &store_path, cli.seed, cli.workers)?;
    println!(
        "executed {} (skipped {} already complete), {} failed",
        summary.executed, summary.skipped, summary.failed
    );
    println!("results in {}", store_path.display());
    Ok(if summary.failed > 0 { 3 } else { 0 })
}

fn cmd_report(
    cli: &Cli,
    kind: ReportKind,
    results: Option<PathBuf>,
    data: Option<PathBuf>,
) -> Result<i32> {
    let summary = match kind {
        ReportKind::ScheduleSweep => {
            let path = results.context("--results <store.jsonl> is required for this kind")?;
            let rows = store::read_rows(&path)?;
            report::schedule_sweep_report(&rows, &cli.out_dir)?
        }
        ReportKind::LrBsSweep => {
            let path = results.context("--results <store.jsonl> is required for this kind")?;
            let rows = store::read_rows(&path)?;
            report::lr_bs_sweep_report(&rows, &cli.out_dir)?
        }
        ReportKind::Fit => {
            let path = data.context("--data <runs.csv> is required for this kind")?;
            let records = formats::read_run_records(&path)?;
            let fit = lawfit::fit(
                &records,
                &FitOptions {
                    seed: cli.seed,
                    ..FitOptions::default()
                },
            )?;
            report::fit_report_files(&fit, &records, &cli.out_dir)?
        }
        ReportKind::Prescription => {
            let path = results.context("--results <prescriptions.csv> is required for this kind")?;
            report::prescription_report(&path, &cli.out_dir)?
        }
        ReportKind::Trajectory => {
            let kv = load_config(&cli.config)?;
            let cfg = schedule_from_config(&kv)?;
            let traj = build_schedule(&cfg)?;
            report::trajectory_report(&traj, &cli.out_dir)?
        }
    };
    println!("{summary}");
    println!("reports written to {}", cli.out_dir.display());
    Ok(0)
}
