//! Desk-scale sparse pre-training on a miniature character-level LM.
//!
//! [`run_sparse_pretraining`] materializes a schedule with the `schedule`
//! module and executes it for real: dense training, then pruning iterations
//! (global magnitude pruning followed by a fixed number of steps each), then
//! fixed-mask recovery. The executed per-segment (active params, tokens)
//! accounting matches the planned trajectory exactly, and a run is
//! deterministic in its seed.
//!
//! The optimizer is plain momentum-free gradient descent; the learning rate
//! is constant by default with an optional warmup + cosine decay.

mod model;

pub use model::{spec_matching_total, Batch, Layer, TinyLm, TinyLmSpec};

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::record::{RunRecord, RunSource};
use crate::schedule::{
    average_params, build_schedule, Accounting, ParamTrajectory, Phase, ScheduleError, Segment,
    SparsityScheduleConfig,
};

/// Bundled public-domain training text (character-level).
pub const BUNDLED_CORPUS: &str = include_str!("../../data/corpus.txt");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("corpus needs at least {need} characters, got {got}")]
    CorpusTooSmall { need: usize, got: usize },
    #[error("vocabulary needs at least two symbols, got {0}")]
    VocabTooSmall(usize),
    #[error("context, embed_dim, and hidden_dim must be nonzero")]
    DegenerateSpec,
    #[error("batch context {got_context} does not match model context {expected_context}")]
    BatchShapeMismatch {
        expected_context: usize,
        got_context: usize,
    },
    #[error("batch contains a token id outside the vocabulary")]
    TokenOutOfRange,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("prune target {target} exceeds the {active} active prunable weights")]
    PruneTargetExceedsActive { target: u64, active: u64 },
    #[error("held-out split has no full-context positions")]
    EmptyEvalSplit,
    #[error("checkpoint tensors do not match the declared dimensions")]
    CheckpointShape,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Learning-rate schedule across the whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LrSchedule {
    Constant,
    WarmupCosine { warmup_steps: u64, min_factor: f64 },
}

impl LrSchedule {
    fn factor(&self, step: u64, total_steps: u64) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::WarmupCosine {
                warmup_steps,
                min_factor,
            } => {
                if step < warmup_steps {
                    (step + 1) as f64 / warmup_steps as f64
                } else if total_steps <= warmup_steps {
                    1.0
                } else {
                    let progress =
                        (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
                    let cos = 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress));
                    min_factor + (1.0 - min_factor) * cos
                }
            }
        }
    }
}

/// Everything needed to execute one sparse pre-training run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub spec: TinyLmSpec,
    pub target_sparsity: f64,
    pub dense_fraction: f64,
    pub prune_fraction: f64,
    pub steps_per_iteration: u64,
    /// Total compute budget in FLOPs (6 * active params * tokens).
    pub total_compute: f64,
    /// Samples per step; each sample predicts one token, so this is also
    /// tokens per step.
    pub batch_size: u64,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    /// Trailing fraction of the corpus held out for evaluation.
    pub eval_fraction: f64,
    pub label: String,
}

impl TrainConfig {
    pub fn schedule_config(&self, model: &TinyLm) -> SparsityScheduleConfig {
        SparsityScheduleConfig {
            shape: model.shape(),
            target_sparsity: self.target_sparsity,
            dense_fraction: self.dense_fraction,
            prune_fraction: self.prune_fraction,
            steps_per_iteration: self.steps_per_iteration,
            tokens_per_step: self.batch_size,
            total_compute: self.total_compute,
            accounting: Accounting::Total,
        }
    }
}

/// Loss at one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossPoint {
    pub step: u64,
    pub loss: f64,
}

/// Result of a completed run.
pub struct TrainOutcome {
    pub record: RunRecord,
    pub curve: Vec<LossPoint>,
    /// Per-segment accounting actually executed; equals the planned
    /// trajectory.
    pub executed: ParamTrajectory,
    pub model: TinyLm,
}

/// Sorted deduplicated character vocabulary of a corpus.
pub fn build_vocab(corpus: &str) -> Vec<char> {
    let mut v: Vec<char> = corpus.chars().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Splits a token stream into train and held-out parts by assigning every
/// n-th fixed-size block to the held-out side, so the two splits are
/// disjoint but share the corpus's mix of styles.
pub fn split_corpus(ids: &[u32], eval_fraction: f64) -> (Vec<u32>, Vec<u32>) {
    let period = (1.0 / eval_fraction.clamp(0.01, 0.5)).round() as usize;
    let block = (ids.len() / (2 * period)).clamp(8, 256);
    let mut train = Vec::with_capacity(ids.len());
    let mut eval = Vec::with_capacity(ids.len() / period + block);
    for (i, chunk) in ids.chunks(block).enumerate() {
        if i % period == period - 1 {
            eval.extend_from_slice(chunk);
        } else {
            train.extend_from_slice(chunk);
        }
    }
    (train, eval)
}

/// Corpus encoded as vocabulary indices.
pub fn encode(corpus: &str, vocab: &[char]) -> Vec<u32> {
    corpus
        .chars()
        .filter_map(|c| vocab.binary_search(&c).ok().map(|i| i as u32))
        .collect()
}

/// Draws `batch_size` (context, next-token) samples uniformly from `ids`.
pub fn sample_batch(
    ids: &[u32],
    context: usize,
    batch_size: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Batch, TrainError> {
    if ids.len() < context + 1 {
        return Err(TrainError::CorpusTooSmall {
            need: context + 1,
            got: ids.len(),
        });
    }
    let mut inputs = Vec::with_capacity(batch_size as usize * context);
    let mut targets = Vec::with_capacity(batch_size as usize);
    for _ in 0..batch_size {
        let start = rng.gen_range(0..ids.len() - context);
        inputs.extend_from_slice(&ids[start..start + context]);
        targets.push(ids[start + context]);
    }
    Ok(Batch {
        inputs,
        targets,
        context,
    })
}

/// Mean next-token cross-entropy over every full-context position of a
/// held-out split. Deterministic.
pub fn eval_loss(model: &mut TinyLm, ids: &[u32]) -> Result<f64, TrainError> {
    let context = model.context();
    if ids.len() < context + 1 {
        return Err(TrainError::EmptyEvalSplit);
    }
    let mut inputs = Vec::with_capacity((ids.len() - context) * context);
    let mut targets = Vec::with_capacity(ids.len() - context);
    for start in 0..ids.len() - context {
        inputs.extend_from_slice(&ids[start..start + context]);
        targets.push(ids[start + context]);
    }
    model.batch_loss(&Batch {
        inputs,
        targets,
        context,
    })
}

/// Executes the three phases of a sparse pre-training run.
pub fn run_sparse_pretraining(cfg: &TrainConfig, corpus: &str) -> Result<TrainOutcome, TrainError> {
    let vocab = build_vocab(corpus);
    let ids = encode(corpus, &vocab);
    let min_len = (cfg.spec.context + 1) * 8;
    if ids.len() < min_len {
        return Err(TrainError::CorpusTooSmall {
            need: min_len,
            got: ids.len(),
        });
    }
    let (train_ids, eval_ids) = split_corpus(&ids, cfg.eval_fraction);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = TinyLm::new(cfg.spec, vocab, &mut rng)?;
    let planned = build_schedule(&cfg.schedule_config(&model))?;

    let total_steps = planned.total_tokens() / cfg.batch_size;
    let mut curve = Vec::with_capacity(total_steps as usize);
    let mut executed = Vec::with_capacity(planned.len());
    let mut global_step = 0u64;

    for seg in planned.segments() {
        if matches!(seg.phase, Phase::PruneIteration(_)) {
            let target_prunable = seg.active_params - model.shape().nonprunable_params;
            model.global_magnitude_prune(target_prunable)?;
        }
        debug_assert_eq!(model.active_params(), seg.active_params);
        let steps = seg.tokens / cfg.batch_size;
        for _ in 0..steps {
            let batch = sample_batch(&train_ids, cfg.spec.context, cfg.batch_size, &mut rng)?;
            let lr = cfg.learning_rate * cfg.lr_schedule.factor(global_step, total_steps);
            let loss = model.train_step(&batch, lr)?;
            curve.push(LossPoint {
                step: global_step,
                loss,
            });
            global_step += 1;
        }
        executed.push(Segment {
            phase: seg.phase,
            active_params: model.active_params(),
            tokens: steps * cfg.batch_size,
        });
    }

    let executed = ParamTrajectory::from_segments(executed)?;
    debug_assert_eq!(&executed, &planned);

    let final_loss = eval_loss(&mut model, &eval_ids)?;
    let shape = model.shape();
    let record = RunRecord {
        label: cfg.label.clone(),
        avg_params: average_params(&executed),
        total_tokens: executed.total_tokens(),
        final_loss,
        sparsity: cfg.target_sparsity,
        final_nonzero_params: model.active_params(),
        shape,
        source: RunSource::Measured,
    };
    Ok(TrainOutcome {
        record,
        curve,
        executed,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    const TEST_CORPUS: &str = "the quick brown fox jumps over the lazy dog. \
        pack my box with five dozen liquor jugs. how vexingly quick daft zebras jump. \
        the five boxing wizards jump quickly. sphinx of black quartz judge my vow. \
        jived fox nymph grabs quick waltz. glib jocks quiz nymph to vex dwarf. \
        a wizard's job is to vex chumps quickly in fog. the jay, pig, fox, zebra \
        and my wolves quack. quick zephyrs blow, vexing daft jim. ";

    fn tiny_config(sparsity: f64, seed: u64, total_compute: f64) -> TrainConfig {
        TrainConfig {
            spec: TinyLmSpec {
                context: 3,
                embed_dim: 6,
                hidden_dim: 12,
            },
            target_sparsity: sparsity,
            dense_fraction: 0.25,
            prune_fraction: 0.5,
            steps_per_iteration: 5,
            total_compute,
            batch_size: 8,
            learning_rate: 0.1,
            lr_schedule: LrSchedule::Constant,
            seed,
            eval_fraction: 0.1,
            label: "tiny".to_string(),
        }
    }

    fn tiny_model(seed: u64) -> TinyLm {
        let vocab = build_vocab(TEST_CORPUS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TinyLm::new(
            TinyLmSpec {
                context: 2,
                embed_dim: 4,
                hidden_dim: 6,
            },
            vocab,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn prune_hand_ranked_example() {
        // weights [3, -1, 2, -4]: keeping 2 must keep {-4, 3}
        let mut model = tiny_model(1);
        let shape = model.shape();
        let w1_len = model.weights(Layer::Hidden1).len();
        // overwrite the first four w1 entries and prune everything else away
        // by magnitude: give all other prunable weights tiny values
        let total = model.shape().prunable_params;
        for i in 0..model.param_count() {
            *model.param_mut(i) = 0.0;
        }
        let embed_len = model.embedding().len();
        let vals = [3.0, -1.0, 2.0, -4.0];
        for (i, v) in vals.iter().enumerate() {
            *model.param_mut(embed_len + i) = *v;
        }
        model.global_magnitude_prune(2).unwrap();
        let w1 = model.weights(Layer::Hidden1);
        assert_eq!(&w1[..4], &[3.0, 0.0, 0.0, -4.0]);
        assert_eq!(model.active_prunable(), 2);
        assert_eq!(model.masked_abs_sum(), 0.0);
        let _ = (shape, w1_len, total);
    }

    #[test]
    fn prune_keep_all_is_identity() {
        let mut model = tiny_model(2);
        let before: Vec<f64> = model.weights(Layer::Hidden1).to_vec();
        let active = model.active_prunable();
        let removed = model.global_magnitude_prune(active).unwrap();
        assert_eq!(removed, 0);
        assert_eq!(model.weights(Layer::Hidden1), &before[..]);
    }

    #[test]
    fn prune_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let mut model = tiny_model(trial);
            let keep = rng.gen_range(1..model.active_prunable());
            // oracle: rank (abs, index) over the concatenated weights
            let mut all: Vec<(f64, usize)> = model
                .weights(Layer::Hidden1)
                .iter()
                .chain(model.weights(Layer::Hidden2))
                .chain(model.weights(Layer::Output))
                .enumerate()
                .map(|(i, &w)| (w.abs(), i))
                .collect();
            all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let survivors: std::collections::BTreeSet<usize> =
                all[..keep as usize].iter().map(|&(_, i)| i).collect();

            model.global_magnitude_prune(keep).unwrap();
            let mask: Vec<bool> = model
                .mask(Layer::Hidden1)
                .iter()
                .chain(model.mask(Layer::Hidden2))
                .chain(model.mask(Layer::Output))
                .copied()
                .collect();
            for (i, &m) in mask.iter().enumerate() {
                assert_eq!(m, survivors.contains(&i), "trial {trial} index {i}");
            }
        }
    }

    #[test]
    fn prune_target_above_active_errors() {
        let mut model = tiny_model(3);
        let active = model.active_prunable();
        assert!(matches!(
            model.global_magnitude_prune(active + 1),
            Err(TrainError::PruneTargetExceedsActive { .. })
        ));
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let vocab = build_vocab(TEST_CORPUS);
        let ids = encode(TEST_CORPUS, &vocab);
        let mut model = tiny_model(4);
        let before: Vec<f64> = (0..model.param_count())
            .map(|i| *model.param_mut(i))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = sample_batch(&ids, 2, 8, &mut rng).unwrap();
        let loss = model.train_step(&batch, 0.0).unwrap();
        assert!(loss.is_finite());
        for (i, &b) in before.iter().enumerate() {
            assert_eq!(*model.param_mut(i), b);
        }
    }

    #[test]
    fn uniform_logits_give_ln_vocab() {
        let vocab = build_vocab(TEST_CORPUS);
        let v = vocab.len() as f64;
        let ids = encode(TEST_CORPUS, &vocab);
        let mut model = tiny_model(5);
        model.flatten_output();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = sample_batch(&ids, 2, 16, &mut rng).unwrap();
        let loss = model.batch_loss(&batch).unwrap();
        assert!((loss - v.ln()).abs() < 1e-12, "loss={loss} lnV={}", v.ln());
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let vocab = build_vocab(TEST_CORPUS);
        let ids = encode(TEST_CORPUS, &vocab);
        let mut model = tiny_model(6);
        assert!(model.param_count() <= 1000, "keep the check model small");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = sample_batch(&ids, 2, 4, &mut rng).unwrap();
        let analytic = model.batch_gradient(&batch).unwrap();
        let mut max_rel = 0.0f64;
        for i in 0..model.param_count() {
            let orig = *model.param_mut(i);
            let h = 1e-6 * orig.abs().max(1.0);
            *model.param_mut(i) = orig + h;
            let fp = model.batch_loss(&batch).unwrap();
            *model.param_mut(i) = orig - h;
            let fm = model.batch_loss(&batch).unwrap();
            *model.param_mut(i) = orig;
            let fd = (fp - fm) / (2.0 * h);
            let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max((analytic[i] - fd).abs() / denom);
        }
        assert!(max_rel <= 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn dense_run_never_prunes() {
        let cfg = tiny_config(0.0, 11, 2e8);
        let out = run_sparse_pretraining(&cfg, TEST_CORPUS).unwrap();
        assert_eq!(out.executed.prune_iterations(), 0);
        assert_eq!(out.model.active_prunable(), out.model.shape().prunable_params);
        assert_eq!(out.record.sparsity, 0.0);
    }

    #[test]
    fn sparse_run_hits_target_and_matches_plan() {
        let cfg = tiny_config(0.8, 12, 6e8);
        let out = run_sparse_pretraining(&cfg, TEST_CORPUS).unwrap();
        let shape = out.model.shape();
        let want = math::round(shape.prunable_params as f64 * 0.2) as u64;
        assert!(out.model.active_prunable().abs_diff(want) <= 1);
        assert_eq!(out.model.masked_abs_sum(), 0.0);
        // executed accounting equals the plan
        let planned = build_schedule(&cfg.schedule_config(&out.model)).unwrap();
        assert_eq!(out.executed, planned);
        assert_eq!(
            out.record.avg_params,
            average_params(&out.executed),
            "record must carry the executed average"
        );
    }

    #[test]
    fn identical_seeds_reproduce_bit_identical_loss() {
        let cfg = tiny_config(0.6, 13, 4e8);
        let a = run_sparse_pretraining(&cfg, TEST_CORPUS).unwrap();
        let b = run_sparse_pretraining(&cfg, TEST_CORPUS).unwrap();
        assert_eq!(
            a.record.final_loss.to_bits(),
            b.record.final_loss.to_bits()
        );
        assert_eq!(a.curve.len(), b.curve.len());
        for (x, y) in a.curve.iter().zip(&b.curve) {
            assert_eq!(x.loss.to_bits(), y.loss.to_bits());
        }
    }

    #[test]
    fn loss_decreases_over_training() {
        let cfg = tiny_config(0.5, 14, 1e9);
        let out = run_sparse_pretraining(&cfg, TEST_CORPUS).unwrap();
        let n = out.curve.len();
        let head: f64 = out.curve[..n / 5].iter().map(|p| p.loss).sum::<f64>() / (n / 5) as f64;
        let tail: f64 =
            out.curve[n - n / 5..].iter().map(|p| p.loss).sum::<f64>() / (n / 5) as f64;
        assert!(tail < head, "head={head} tail={tail}");
    }

    #[test]
    fn eval_is_deterministic() {
        let vocab = build_vocab(TEST_CORPUS);
        let ids = encode(TEST_CORPUS, &vocab);
        let mut model = tiny_model(8);
        let a = eval_loss(&mut model, &ids).unwrap();
        let b = eval_loss(&mut model, &ids).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn mask_monotonicity_across_successive_prunes() {
        let mut model = tiny_model(9);
        let mut prev_mask: Vec<bool> = model.mask(Layer::Hidden1).to_vec();
        let active = model.active_prunable();
        for frac in [0.8, 0.5, 0.3, 0.1] {
            let keep = (active as f64 * frac) as u64;
            model.global_magnitude_prune(keep).unwrap();
            let mask = model.mask(Layer::Hidden1);
            for (i, (&now, &before)) in mask.iter().zip(&prev_mask).enumerate() {
                assert!(!now || before, "mask bit {i} flipped back on");
            }
            prev_mask = mask.to_vec();
            assert_eq!(model.active_prunable(), keep);
        }
    }

    #[test]
    fn spec_matching_total_tracks_target() {
        let vocab = 60;
        for target in [20_000u64, 50_000, 100_000, 200_000] {
            let spec = spec_matching_total(4, 16, vocab, target);
            let got = spec.total_params(vocab);
            let rel = got.abs_diff(target) as f64 / target as f64;
            assert!(rel < 0.02, "target={target} got={got}");
        }
    }
}
