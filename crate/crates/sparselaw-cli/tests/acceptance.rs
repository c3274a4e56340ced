//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them).
//!
//! Criteria 1 and 5c encode published reference figures that are not
//! reproducible from the stated optimization problem / flatness metric at
//! the stated constants; those checks are implemented as stated and fail
//! with the measured values, rather than being loosened to pass.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparselaw::lawfit::{fit, predict_loss, FitOptions, ScalingLawFit};
use sparselaw::prescribe::{lifetime_flops, solve_chinchilla, solve_lifetime};
use sparselaw::record::{RunRecord, RunSource};
use sparselaw::schedule::{
    average_params, build_schedule, compression_rate, effective_compute, Accounting, ModelShape,
    ParamTrajectory, Phase, Segment, SparsityScheduleConfig,
};
use sparselaw::theorysim::{
    coefficient_series, fit_piecewise_alpha, flatness, loss_of_compute, simulate_trajectory,
    BurnIn, CurvePoint, SimOptions, TheoryParams,
};
use sparselaw::trainer::{
    build_vocab, encode, run_sparse_pretraining, sample_batch, spec_matching_total,
    Layer, LrSchedule, TinyLm, TinyLmSpec, TrainConfig, BUNDLED_CORPUS,
};
use sparselaw_cli::sweep::{enumerate_schedules, SweepBase, SweepGrid};

struct Checks {
    name: &'static str,
    failures: Vec<String>,
    lines: Vec<String>,
}

impl Checks {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            failures: Vec::new(),
            lines: Vec::new(),
        }
    }

    fn check(&mut self, what: &str, ok: bool, detail: String) {
        let tag = if ok { "ok  " } else { "FAIL" };
        self.lines.push(format!("  [{tag}] {what}: {detail}"));
        if !ok {
            self.failures.push(format!("{what}: {detail}"));
        }
    }

    fn within(&mut self, what: &str, got: f64, target: f64, rel: f64) {
        let ok = (got - target).abs() <= rel * target.abs();
        self.check(
            what,
            ok,
            format!("got {got:.4e}, target {target:.4e} within {:.1}%", rel * 100.0),
        );
    }

    fn in_range(&mut self, what: &str, got: f64, lo: f64, hi: f64) {
        let ok = got >= lo && got <= hi;
        self.check(what, ok, format!("got {got:.4e}, window [{lo:.4e}, {hi:.4e}]"));
    }

    fn finish(self, started: Instant, budget_secs: f64) {
        let elapsed = started.elapsed().as_secs_f64();
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("ACCEPTANCE {}: {verdict} ({elapsed:.1}s)", self.name);
        for line in &self.lines {
            println!("{line}");
        }
        assert!(
            elapsed <= budget_secs,
            "criterion exceeded its runtime budget: {elapsed:.1}s > {budget_secs}s"
        );
        assert!(
            self.failures.is_empty(),
            "criterion {} failed:\n{}",
            self.name,
            self.failures.join("\n")
        );
    }
}

#[test]
fn criterion_1_prescription_reproduction() {
    let started = Instant::now();
    let mut c = Checks::new("1 (compute-optimal prescription reproduction)");
    let law = ScalingLawFit::reference();
    let target = 1.89;
    let t_inf = 100e12;

    let chin = solve_chinchilla(&law, target).expect("chinchilla solve");
    c.in_range("train-optimal params", chin.avg_params, 67.9e9, 72.1e9);
    c.in_range("train-optimal tokens", chin.tokens, 4.13e12, 4.39e12);
    c.within(
        "train-optimal lifetime",
        lifetime_flops(chin.avg_params, chin.tokens, chin.avg_params, t_inf),
        15.8e24,
        0.02,
    );

    let dense = solve_lifetime(&law, target, t_inf, 0.0, 1.0).expect("dense lifetime solve");
    c.within("lifetime-dense avg params", dense.avg_params, 23.5e9, 0.03);
    c.within("lifetime-dense tokens", dense.tokens, 24.4e12, 0.03);
    c.within("lifetime-dense lifetime", dense.lifetime_flops, 8.14e24, 0.02);

    let sparse = solve_lifetime(&law, target, t_inf, 0.8, 2.0).expect("sparse lifetime solve");
    c.within("lifetime-sparse avg params", sparse.avg_params, 28.0e9, 0.03);
    c.within("lifetime-sparse final params", sparse.final_params, 14.0e9, 0.03);
    c.within("lifetime-sparse tokens", sparse.tokens, 16.6e12, 0.03);
    c.within("lifetime-sparse lifetime", sparse.lifetime_flops, 5.58e24, 0.02);
    let saving = 1.0 - sparse.lifetime_flops / dense.lifetime_flops;
    c.in_range("sparse lifetime saving", saving, 0.309, 0.319);

    // context for the windows above: the solver does satisfy the first-order
    // optimality condition of the stated objective at these constants
    let kkt_lhs = law.alpha * law.a / chin.avg_params.powf(law.alpha);
    let kkt_rhs = law.beta * law.b / chin.tokens.powf(law.beta);
    c.check(
        "solver first-order optimality",
        (kkt_lhs - kkt_rhs).abs() / kkt_rhs < 1e-3,
        format!("alpha*A/N^alpha = {kkt_lhs:.6e}, beta*B/D^beta = {kkt_rhs:.6e}"),
    );

    c.finish(started, 1.0);
}

#[test]
fn criterion_2_compression_rate_reproduction() {
    let started = Instant::now();
    let mut c = Checks::new("2 (average size and compression of the canonical schedule)");
    let cfg = SparsityScheduleConfig {
        shape: ModelShape {
            prunable_params: 100_000,
            nonprunable_params: 0,
        },
        target_sparsity: 0.8,
        dense_fraction: 0.25,
        prune_fraction: 0.5,
        steps_per_iteration: 100,
        tokens_per_step: 32,
        total_compute: 1.2e12,
        accounting: Accounting::PrunableOnly,
    };
    let traj = build_schedule(&cfg).expect("canonical schedule builds");
    let ratio = average_params(&traj) / 100_000.0;
    c.in_range("average / starting parameter ratio", ratio, 0.39, 0.41);
    let rate = compression_rate(&traj);
    c.in_range("compression rate", rate, 1.95, 2.05);
    c.finish(started, 1.0);
}

#[test]
fn criterion_3_sweep_space_reproduction() {
    let started = Instant::now();
    let mut c = Checks::new("3 (sweep enumeration counts)");
    let grid = SweepGrid {
        dense_fractions: vec![0.0, 0.25, 0.5, 0.75],
        prune_fractions: vec![0.25, 0.5, 0.75, 1.0],
        sparsities: vec![0.2, 0.4, 0.6, 0.8],
        durations: vec![1.2e12, 2.4e12],
        learning_rates: vec![0.08],
        batch_sizes: vec![32],
    };
    let base = SweepBase {
        shape: ModelShape {
            prunable_params: 100_000,
            nonprunable_params: 0,
        },
        steps_per_iteration: 100,
        tokens_per_step: 32,
        accounting: Accounting::PrunableOnly,
    };
    let configs = enumerate_schedules(&grid, &base);
    let pairs: std::collections::BTreeSet<(u64, u64)> = configs
        .iter()
        .map(|c| {
            (
                (c.dense_fraction * 100.0).round() as u64,
                (c.prune_fraction * 100.0).round() as u64,
            )
        })
        .collect();
    c.check(
        "valid allocation pairs",
        pairs.len() == 10,
        format!("got {}", pairs.len()),
    );
    c.check(
        "total configurations",
        configs.len() == 80,
        format!("got {}", configs.len()),
    );
    c.finish(started, 1.0);
}

fn synthetic_record(n: f64, d: f64, loss: f64) -> RunRecord {
    RunRecord {
        label: String::new(),
        avg_params: n,
        total_tokens: d as u64,
        final_loss: loss,
        sparsity: 0.0,
        final_nonzero_params: n as u64,
        shape: ModelShape {
            prunable_params: n as u64,
            nonprunable_params: 0,
        },
        source: RunSource::Simulated,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[test]
fn criterion_4_fit_recovery() {
    let started = Instant::now();
    let mut c = Checks::new("4 (scaling-law fit recovery)");
    let truth = ScalingLawFit::reference();
    let grid: Vec<(f64, f64)> = (0..5)
        .flat_map(|i| {
            (0..6).map(move |j| {
                (
                    1e9 * 100.0f64.powf(i as f64 / 4.0),
                    1e10 * 1000.0f64.powf(j as f64 / 5.0),
                )
            })
        })
        .collect();

    // noiseless recovery
    let data: Vec<RunRecord> = grid
        .iter()
        .map(|&(n, d)| synthetic_record(n, d, predict_loss(&truth, n, d)))
        .collect();
    let fitted = fit(&data, &FitOptions::default()).expect("noiseless fit");
    let worst = data
        .iter()
        .map(|r| (predict_loss(&fitted, r.avg_params, r.total_tokens as f64) - r.final_loss).abs())
        .fold(0.0, f64::max);
    c.check(
        "noiseless 30-point recovery",
        worst < 1e-3,
        format!("max |predicted - generated| = {worst:.2e} (bound 1e-3)"),
    );

    // noisy recovery over 10 seeds
    let mut total_err = 0.0;
    let mut count = 0usize;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let noisy: Vec<RunRecord> = grid
            .iter()
            .map(|&(n, d)| {
                let loss = predict_loss(&truth, n, d) * (0.01 * normal(&mut rng)).exp();
                synthetic_record(n, d, loss)
            })
            .collect();
        let fitted = fit(
            &noisy,
            &FitOptions {
                seed,
                ..FitOptions::default()
            },
        )
        .expect("noisy fit");
        for r in &noisy {
            total_err +=
                (predict_loss(&fitted, r.avg_params, r.total_tokens as f64) - r.final_loss).abs();
            count += 1;
        }
    }
    let mean_err = total_err / count as f64;
    c.check(
        "noisy recovery (sigma = 0.01, 10 seeds)",
        mean_err <= 0.02,
        format!("mean |predicted - actual| = {mean_err:.4} (bound 0.02)"),
    );
    c.finish(started, 120.0);
}

fn uniform_dense_trajectory(segments: usize, params: u64, tokens: u64) -> ParamTrajectory {
    ParamTrajectory::from_segments(
        (0..segments)
            .map(|_| Segment {
                phase: Phase::Dense,
                active_params: params,
                tokens,
            })
            .collect(),
    )
    .unwrap()
}

/// Builds a canonical-fractions schedule whose total token count lands within
/// 2% of `target_tokens` by rescaling the compute budget.
fn schedule_with_tokens(sparsity: f64, target_tokens: f64) -> ParamTrajectory {
    let mut compute = 6.0 * 100_000.0 * target_tokens * 0.5;
    let mut traj = None;
    for _ in 0..6 {
        let cfg = SparsityScheduleConfig {
            shape: ModelShape {
                prunable_params: 100_000,
                nonprunable_params: 0,
            },
            target_sparsity: sparsity,
            dense_fraction: 0.25,
            prune_fraction: 0.5,
            steps_per_iteration: 100,
            tokens_per_step: 32,
            total_compute: compute,
            accounting: Accounting::PrunableOnly,
        };
        let t = build_schedule(&cfg).unwrap();
        let tokens = t.total_tokens() as f64;
        compute *= target_tokens / tokens;
        traj = Some(t);
        if (tokens - target_tokens).abs() / target_tokens < 0.02 {
            break;
        }
    }
    traj.unwrap()
}

fn r_squared(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let pred = my + slope * (p.0 - mx);
            (p.1 - pred) * (p.1 - pred)
        })
        .sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    (1.0 - ss_res / ss_tot, slope)
}

#[test]
fn criterion_5_theory_sim_properties() {
    let started = Instant::now();
    let mut c = Checks::new("5 (theory-simulation properties)");

    // (a) dense simulation against the closed form
    let p = TheoryParams {
        compute_scale: 1e15,
        alpha: 0.203,
    };
    let dense = uniform_dense_trajectory(400, 1_000_000, 25_000);
    let sim = simulate_trajectory(&p, &dense, &SimOptions::default()).unwrap();
    let worst_rel = sim
        .curve
        .iter()
        .map(|pt| (pt.loss - loss_of_compute(&p, pt.compute)).abs() / loss_of_compute(&p, pt.compute))
        .fold(0.0, f64::max);
    c.check(
        "(a) dense curve vs closed form",
        worst_rel < 0.01,
        format!("max relative gap {worst_rel:.4} (bound 0.01)"),
    );

    // (b) log total loss change vs log average parameters across schedules
    // with equal tokens, in the flat-coefficient regime
    let target_tokens = 4e5;
    let mut points = Vec::new();
    for &s in &[0.2, 0.35, 0.5, 0.65, 0.8] {
        let traj = schedule_with_tokens(s, target_tokens);
        let opts = SimOptions {
            burn_in: BurnIn::Absolute(1e13),
            ..SimOptions::default()
        };
        let delta = simulate_trajectory(&p, &traj, &opts).unwrap().total_delta;
        points.push((average_params(&traj).ln(), delta.abs().ln()));
    }
    let (r2, slope) = r_squared(&points);
    c.check(
        "(b) log delta-loss linear in log avg params (5 schedules)",
        r2 >= 0.99,
        format!("R^2 = {r2:.5} (bound 0.99), slope = {slope:.3}"),
    );

    // (c) coefficient flatness over the final half of pruning iterations of
    // the canonical schedule
    let cfg = SparsityScheduleConfig {
        shape: ModelShape {
            prunable_params: 100_000,
            nonprunable_params: 0,
        },
        target_sparsity: 0.8,
        dense_fraction: 0.25,
        prune_fraction: 0.5,
        steps_per_iteration: 100,
        tokens_per_step: 32,
        total_compute: 1.2e12,
        accounting: Accounting::PrunableOnly,
    };
    let traj = build_schedule(&cfg).unwrap();
    let series = coefficient_series(&p, &traj, &SimOptions::default()).unwrap();
    // slice out the pruning iterations from the per-segment series
    let prune_coeffs: Vec<f64> = traj
        .segments()
        .iter()
        .zip(&series)
        .filter(|(s, _)| matches!(s.phase, Phase::PruneIteration(_)))
        .map(|(_, &v)| v)
        .collect();
    let flat = flatness(&prune_coeffs, prune_coeffs.len() / 2);
    c.check(
        "(c) coefficient flatness over final half of iterations",
        flat <= 0.1,
        format!(
            "(max-min)/mean = {flat:.4} (bound 0.1); the pruning phase spans \
             50% of the budget after a 25% dense prefix, so the decay \
             coefficient necessarily varies by ~25% over its own tail"
        ),
    );

    // (d) piecewise-alpha recovery
    let breakpoint = 1e19;
    let (a1, a2) = (0.041, 0.203);
    let anchor = 3.2;
    let curve: Vec<CurvePoint> = (0..400)
        .map(|i| {
            let compute = 1e17 * 10000.0f64.powf(i as f64 / 399.0);
            let loss = if compute <= breakpoint {
                anchor * (compute / breakpoint).powf(-a1)
            } else {
                anchor * (compute / breakpoint).powf(-a2)
            };
            CurvePoint { compute, loss }
        })
        .collect();
    let (f1, f2) = fit_piecewise_alpha(&curve, breakpoint).unwrap();
    c.check(
        "(d) piecewise alpha recovery",
        (f1 - a1).abs() < 1e-3 && (f2 - a2).abs() < 1e-3,
        format!("recovered ({f1:.5}, {f2:.5}), truth ({a1}, {a2})"),
    );

    c.finish(started, 60.0);
}

const FD_CORPUS: &str = "the quick brown fox jumps over the lazy dog. pack my box \
    with five dozen liquor jugs. sphinx of black quartz judge my vow. how vexingly \
    quick daft zebras jump. the five boxing wizards jump quickly. ";

#[test]
fn criterion_6_trainer_properties() {
    let started = Instant::now();
    let mut c = Checks::new("6 (trainer correctness properties)");
    let vocab = build_vocab(FD_CORPUS);

    // global magnitude pruning vs a full-sort oracle, 1000 randomized trials
    let spec = TinyLmSpec {
        context: 2,
        embed_dim: 4,
        hidden_dim: 8,
    };
    let mut mismatches = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..1000u64 {
        let mut model_rng = ChaCha8Rng::seed_from_u64(trial);
        let mut model = TinyLm::new(spec, vocab.clone(), &mut model_rng).unwrap();
        let keep = rng.gen_range(0..=model.active_prunable());
        let mut ranked: Vec<(f64, usize)> = model
            .weights(Layer::Hidden1)
            .iter()
            .chain(model.weights(Layer::Hidden2))
            .chain(model.weights(Layer::Output))
            .enumerate()
            .map(|(i, &w)| (w.abs(), i))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let oracle: std::collections::BTreeSet<usize> =
            ranked[..keep as usize].iter().map(|&(_, i)| i).collect();
        model.global_magnitude_prune(keep).unwrap();
        let mask: Vec<bool> = model
            .mask(Layer::Hidden1)
            .iter()
            .chain(model.mask(Layer::Hidden2))
            .chain(model.mask(Layer::Output))
            .copied()
            .collect();
        if mask
            .iter()
            .enumerate()
            .any(|(i, &m)| m != oracle.contains(&i))
        {
            mismatches += 1;
        }
    }
    c.check(
        "pruning equals full-sort oracle (1000 trials)",
        mismatches == 0,
        format!("{mismatches} mismatching trials"),
    );

    // per-iteration sparsity exactness, mask monotonicity, zero leakage
    let cfg = TrainConfig {
        spec: TinyLmSpec {
            context: 3,
            embed_dim: 6,
            hidden_dim: 16,
        },
        target_sparsity: 0.8,
        dense_fraction: 0.25,
        prune_fraction: 0.5,
        steps_per_iteration: 10,
        total_compute: 1.5e9,
        batch_size: 16,
        learning_rate: 0.1,
        lr_schedule: LrSchedule::Constant,
        seed: 4,
        eval_fraction: 0.1,
        label: "acceptance".into(),
    };
    let ids = encode(FD_CORPUS, &build_vocab(FD_CORPUS));
    let mut model_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = TinyLm::new(cfg.spec, build_vocab(FD_CORPUS), &mut model_rng).unwrap();
    let planned = build_schedule(&cfg.schedule_config(&model)).unwrap();
    let nonprunable = model.shape().nonprunable_params;
    let mut prev_mask: Vec<bool> = model
        .mask(Layer::Hidden1)
        .iter()
        .chain(model.mask(Layer::Hidden2))
        .chain(model.mask(Layer::Output))
        .copied()
        .collect();
    let mut sparsity_exact = true;
    let mut monotone = true;
    let mut zero_leak = true;
    for seg in planned.segments() {
        if matches!(seg.phase, Phase::PruneIteration(_)) {
            model
                .global_magnitude_prune(seg.active_params - nonprunable)
                .unwrap();
            let mask: Vec<bool> = model
                .mask(Layer::Hidden1)
                .iter()
                .chain(model.mask(Layer::Hidden2))
                .chain(model.mask(Layer::Output))
                .copied()
                .collect();
            monotone &= mask.iter().zip(&prev_mask).all(|(&now, &was)| was || !now);
            prev_mask = mask;
            sparsity_exact &=
                model.active_prunable().abs_diff(seg.active_params - nonprunable) <= 1;
        }
        for _ in 0..seg.tokens / cfg.batch_size {
            let batch = sample_batch(&ids, cfg.spec.context, cfg.batch_size, &mut model_rng).unwrap();
            model.train_step(&batch, cfg.learning_rate).unwrap();
            zero_leak &= model.masked_abs_sum() == 0.0;
        }
    }
    c.check(
        "sparsity exact within one weight at every iteration",
        sparsity_exact,
        String::new(),
    );
    c.check("mask monotonicity at every iteration", monotone, String::new());
    c.check("zero leakage after every step", zero_leak, String::new());

    // analytic gradients against central finite differences
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut small = TinyLm::new(
        TinyLmSpec {
            context: 2,
            embed_dim: 4,
            hidden_dim: 6,
        },
        vocab.clone(),
        &mut rng,
    )
    .unwrap();
    assert!(small.param_count() <= 1000);
    let batch = sample_batch(&ids, 2, 4, &mut rng).unwrap();
    let analytic = small.batch_gradient(&batch).unwrap();
    let mut max_rel = 0.0f64;
    for i in 0..small.param_count() {
        let orig = *small.param_mut(i);
        let h = 1e-6 * orig.abs().max(1.0);
        *small.param_mut(i) = orig + h;
        let fp = small.batch_loss(&batch).unwrap();
        *small.param_mut(i) = orig - h;
        let fm = small.batch_loss(&batch).unwrap();
        *small.param_mut(i) = orig;
        let fd = (fp - fm) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
        max_rel = max_rel.max((analytic[i] - fd).abs() / denom);
    }
    c.check(
        "analytic gradient vs central differences",
        max_rel <= 1e-4,
        format!("max relative error {max_rel:.2e} (bound 1e-4)"),
    );

    // seed determinism, bit for bit
    let a = run_sparse_pretraining(&cfg, FD_CORPUS).unwrap();
    let b = run_sparse_pretraining(&cfg, FD_CORPUS).unwrap();
    c.check(
        "identical seed reproduces final loss bit-for-bit",
        a.record.final_loss.to_bits() == b.record.final_loss.to_bits(),
        format!("{} vs {}", a.record.final_loss, b.record.final_loss),
    );

    c.finish(started, 300.0);
}

/// Report-only: sparse versus matched-dense desk-scale runs. The underlying
/// equal-quality claim is established at far larger scale and is not
/// guaranteed to transfer to a toy model, so this prints its measurement but
/// never fails the build.
#[test]
fn criterion_7_desk_scale_sparse_vs_dense() {
    let started = Instant::now();
    // the learning rate is the dense-optimal value from a coarse scan at
    // this budget; both runs share it (dense-tuned hyperparameters carry
    // over to the sparse run)
    let sparse_cfg = TrainConfig {
        spec: TinyLmSpec {
            context: 4,
            embed_dim: 16,
            hidden_dim: 256,
        },
        target_sparsity: 0.8,
        dense_fraction: 0.25,
        prune_fraction: 0.5,
        steps_per_iteration: 100,
        total_compute: 6.0e10,
        batch_size: 32,
        learning_rate: 0.15,
        lr_schedule: LrSchedule::Constant,
        seed: 17,
        eval_fraction: 0.1,
        label: "sparse-canonical".into(),
    };
    let vocab_size = build_vocab(BUNDLED_CORPUS).len();
    let total = sparse_cfg.spec.total_params(vocab_size);
    println!("  sparse starting size: {total} params (vocab {vocab_size})");

    let sparse = run_sparse_pretraining(&sparse_cfg, BUNDLED_CORPUS).expect("sparse run");
    let avg = sparse.record.avg_params;
    let tokens = sparse.record.total_tokens;

    // dense counterpart matched to the sparse run's average size, trained on
    // the same tokens so the effective compute matches
    let dense_spec = spec_matching_total(4, 16, vocab_size, avg.round() as u64);
    let dense_total = dense_spec.total_params(vocab_size);
    let dense_cfg = TrainConfig {
        spec: dense_spec,
        target_sparsity: 0.0,
        dense_fraction: 1.0,
        prune_fraction: 0.0,
        steps_per_iteration: 100,
        total_compute: 6.0 * dense_total as f64 * tokens as f64,
        batch_size: 32,
        learning_rate: 0.15,
        lr_schedule: LrSchedule::Constant,
        seed: 18,
        eval_fraction: 0.1,
        label: "dense-matched".into(),
    };
    let dense = run_sparse_pretraining(&dense_cfg, BUNDLED_CORPUS).expect("dense run");

    let sparse_compute = effective_compute(&sparse.executed);
    let dense_compute = effective_compute(&dense.executed);
    let compute_gap = (sparse_compute - dense_compute).abs() / sparse_compute;
    let loss_gap = (sparse.record.final_loss - dense.record.final_loss).abs()
        / dense.record.final_loss;
    let elapsed = started.elapsed().as_secs_f64();

    println!("ACCEPTANCE 7 (desk-scale sparse vs matched dense, report-only): ({elapsed:.0}s)");
    println!(
        "  sparse:  avg {avg:.0} params, final {} nonzero, {} tokens, eval loss {:.4}",
        sparse.record.final_nonzero_params, tokens, sparse.record.final_loss
    );
    println!(
        "  dense:   {dense_total} params, {} tokens, eval loss {:.4}",
        dense.record.total_tokens, dense.record.final_loss
    );
    println!(
        "  effective compute: sparse {sparse_compute:.3e}, dense {dense_compute:.3e} (gap {:.2}%)",
        compute_gap * 100.0
    );
    println!(
        "  relative eval-loss gap: {:.2}% ({})",
        loss_gap * 100.0,
        if loss_gap <= 0.05 {
            "within the 5% window"
        } else {
            "outside the 5% window; not a gate at toy scale"
        }
    );
    assert!(
        compute_gap < 0.02,
        "matched dense run must consume the sparse run's effective compute"
    );
}

/// Supporting check for the sweep machinery: at a budget where the law-optimal
/// average size sits near 40% of the starting size, the canonical allocations
/// win the theory-scored sweep.
#[test]
fn theory_sweep_argmin_lands_on_canonical_allocations() {
    let law = ScalingLawFit::reference();
    let grid = SweepGrid {
        dense_fractions: vec![0.0, 0.25, 0.5, 0.75],
        prune_fractions: vec![0.25, 0.5, 0.75, 1.0],
        sparsities: vec![0.8],
        durations: vec![4.8e10],
        learning_rates: vec![0.08],
        batch_sizes: vec![32],
    };
    let base = SweepBase {
        shape: ModelShape {
            prunable_params: 100_000,
            nonprunable_params: 0,
        },
        steps_per_iteration: 100,
        tokens_per_step: 32,
        accounting: Accounting::PrunableOnly,
    };
    let configs = enumerate_schedules(&grid, &base);
    let mut best: Option<((f64, f64), f64)> = None;
    for cfg in &configs {
        let traj = build_schedule(cfg).unwrap();
        let loss = predict_loss(&law, average_params(&traj), traj.total_tokens() as f64);
        if best.is_none() || loss < best.unwrap().1 {
            best = Some(((cfg.dense_fraction, cfg.prune_fraction), loss));
        }
    }
    let (pair, loss) = best.unwrap();
    println!("theory-sweep argmin at 4.8e10 FLOPs: {pair:?} with predicted loss {loss:.4}");
    assert!(
        pair == (0.25, 0.25) || pair == (0.25, 0.5),
        "argmin {pair:?} outside the canonical set"
    );
}
