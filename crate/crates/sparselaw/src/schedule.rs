//! Three-phase sparsity schedules and parameter/compute accounting.
//!
//! A sparse pre-training run is planned as a [`ParamTrajectory`]: an ordered
//! list of segments, each holding a constant active-parameter count for some
//! number of tokens. The three phases are
//!
//! 1. dense training at the full parameter count,
//! 2. iterative pruning: each iteration removes a fixed fraction of the
//!    remaining prunable weights and then trains for a fixed number of steps,
//! 3. sparse recovery: continued training at the target sparsity with the
//!    mask frozen.
//!
//! Compute is accounted as `6 * active_params * tokens`, summed over
//! segments. Phase budgets are fractions of the total compute, quantized to
//! whole steps; sub-step leftovers fall through to the recovery phase.

use alloc::vec::Vec;

use crate::math;

/// Parameter counts of a model split into prunable mass (linear-layer
/// weights) and nonprunable mass (embeddings, biases, normalization).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelShape {
    pub prunable_params: u64,
    pub nonprunable_params: u64,
}

impl ModelShape {
    pub fn new(prunable_params: u64, nonprunable_params: u64) -> Result<Self, ScheduleError> {
        if prunable_params == 0 {
            return Err(ScheduleError::ZeroPrunableParams);
        }
        Ok(Self {
            prunable_params,
            nonprunable_params,
        })
    }

    pub fn total_params(&self) -> u64 {
        self.prunable_params + self.nonprunable_params
    }
}

/// Whether trajectory parameter counts include the nonprunable mass.
///
/// `PrunableOnly` reports sizes relative to the prunable weights alone, which
/// is the view used when quoting average size as a fraction of the dense
/// starting count for models whose nonprunable mass is negligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Accounting {
    #[default]
    Total,
    PrunableOnly,
}

/// Declarative description of a three-phase sparse pre-training run.
///
/// `dense_fraction` and `prune_fraction` are fractions of `total_compute`
/// assigned to the first two phases; the remainder goes to sparse recovery.
/// `target_sparsity` is the fraction of prunable parameters removed by the
/// end of the pruning phase.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparsityScheduleConfig {
    pub shape: ModelShape,
    pub target_sparsity: f64,
    pub dense_fraction: f64,
    pub prune_fraction: f64,
    /// Training steps per pruning iteration.
    pub steps_per_iteration: u64,
    pub tokens_per_step: u64,
    /// Total compute budget in FLOPs.
    pub total_compute: f64,
    pub accounting: Accounting,
}

/// Default steps per pruning iteration.
pub const DEFAULT_STEPS_PER_ITERATION: u64 = 100;

impl SparsityScheduleConfig {
    pub fn new(
        shape: ModelShape,
        target_sparsity: f64,
        dense_fraction: f64,
        prune_fraction: f64,
        tokens_per_step: u64,
        total_compute: f64,
    ) -> Self {
        Self {
            shape,
            target_sparsity,
            dense_fraction,
            prune_fraction,
            steps_per_iteration: DEFAULT_STEPS_PER_ITERATION,
            tokens_per_step,
            total_compute,
            accounting: Accounting::Total,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.shape.prunable_params == 0 {
            return Err(ScheduleError::ZeroPrunableParams);
        }
        if !(0.0..1.0).contains(&self.target_sparsity) {
            return Err(ScheduleError::SparsityOutOfRange(self.target_sparsity));
        }
        if !(0.0..=1.0).contains(&self.dense_fraction)
            || !(0.0..=1.0).contains(&self.prune_fraction)
        {
            return Err(ScheduleError::FractionOutOfRange {
                dense: self.dense_fraction,
                prune: self.prune_fraction,
            });
        }
        if self.dense_fraction + self.prune_fraction > 1.0 + 1e-12 {
            return Err(ScheduleError::FractionSumExceedsOne {
                dense: self.dense_fraction,
                prune: self.prune_fraction,
            });
        }
        if self.steps_per_iteration == 0 {
            return Err(ScheduleError::ZeroStepsPerIteration);
        }
        if self.tokens_per_step == 0 {
            return Err(ScheduleError::ZeroTokensPerStep);
        }
        if !(self.total_compute > 0.0) {
            return Err(ScheduleError::NonPositiveCompute(self.total_compute));
        }
        Ok(())
    }

    /// Fraction of compute left for the recovery phase.
    pub fn recovery_fraction(&self) -> f64 {
        math::fmax(1.0 - self.dense_fraction - self.prune_fraction, 0.0)
    }

    /// Starting parameter count under the configured accounting.
    fn base_params(&self) -> u64 {
        match self.accounting {
            Accounting::Total => self.shape.total_params(),
            Accounting::PrunableOnly => self.shape.prunable_params,
        }
    }

    /// Nonprunable mass included in per-segment counts.
    fn carried_nonprunable(&self) -> u64 {
        match self.accounting {
            Accounting::Total => self.shape.nonprunable_params,
            Accounting::PrunableOnly => 0,
        }
    }

    /// Prunable parameters remaining at target sparsity.
    pub fn final_prunable(&self) -> u64 {
        math::round(self.shape.prunable_params as f64 * (1.0 - self.target_sparsity)) as u64
    }

    /// FLOPs consumed by one training step at `active` parameters.
    fn step_cost(&self, active: u64) -> f64 {
        6.0 * active as f64 * self.tokens_per_step as f64
    }
}

/// Which phase a trajectory segment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Phase {
    Dense,
    /// 1-based pruning iteration index.
    PruneIteration(u32),
    Recovery,
}

/// A stretch of training at a constant active-parameter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    pub phase: Phase,
    pub active_params: u64,
    pub tokens: u64,
}

/// Materialized per-segment sequence of (active parameter count, tokens);
/// the ground truth for average-parameter and compute accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamTrajectory {
    segments: Vec<Segment>,
}

impl ParamTrajectory {
    /// Builds a trajectory from raw segments. Intended for simulation studies
    /// and tests; `build_schedule` is the normal constructor.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self, ScheduleError> {
        if segments.is_empty() {
            return Err(ScheduleError::EmptyTrajectory);
        }
        if segments.iter().any(|s| s.tokens == 0 || s.active_params == 0) {
            return Err(ScheduleError::EmptySegment);
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.segments.iter().map(|s| s.tokens).sum()
    }

    /// Active parameter count of the final segment.
    pub fn final_active_params(&self) -> u64 {
        self.segments.last().map(|s| s.active_params).unwrap_or(0)
    }

    /// Compute consumed per phase, in FLOPs: (dense, prune, recovery).
    pub fn phase_compute(&self) -> (f64, f64, f64) {
        let mut dense = 0.0;
        let mut prune = 0.0;
        let mut recovery = 0.0;
        for s in &self.segments {
            let c = 6.0 * s.active_params as f64 * s.tokens as f64;
            match s.phase {
                Phase::Dense => dense += c,
                Phase::PruneIteration(_) => prune += c,
                Phase::Recovery => recovery += c,
            }
        }
        (dense, prune, recovery)
    }

    /// Number of pruning iterations in the trajectory.
    pub fn prune_iterations(&self) -> u32 {
        self.segments
            .iter()
            .filter(|s| matches!(s.phase, Phase::PruneIteration(_)))
            .count() as u32
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("model shape must have at least one prunable parameter")]
    ZeroPrunableParams,
    #[error("target sparsity {0} outside [0, 1)")]
    SparsityOutOfRange(f64),
    #[error("phase fractions outside [0, 1]: dense={dense}, prune={prune}")]
    FractionOutOfRange { dense: f64, prune: f64 },
    #[error("dense_fraction + prune_fraction = {} exceeds 1", dense + prune)]
    FractionSumExceedsOne { dense: f64, prune: f64 },
    #[error("steps_per_iteration must be at least 1")]
    ZeroStepsPerIteration,
    #[error("tokens_per_step must be at least 1")]
    ZeroTokensPerStep,
    #[error("total_compute must be positive, got {0}")]
    NonPositiveCompute(f64),
    #[error(
        "infeasible budget: pruning phase has {budget:.3e} FLOPs but one iteration of \
         {steps} steps at the first pruned count needs {needed:.3e} FLOPs"
    )]
    InfeasiblePruneBudget { budget: f64, needed: f64, steps: u64 },
    #[error(
        "infeasible budget: total compute {budget:.3e} FLOPs cannot fit a single step \
         costing {needed:.3e} FLOPs"
    )]
    InfeasibleStepBudget { budget: f64, needed: f64 },
    #[error("pruning requires target_sparsity > 0 and prune_fraction > 0")]
    NoPruningConfigured,
    #[error("trajectory has no segments")]
    EmptyTrajectory,
    #[error("trajectory segments must have nonzero tokens and parameters")]
    EmptySegment,
}

/// Per-iteration prunable counts for `iterations` geometric removal steps.
///
/// The removal fraction is chosen so that `iterations` steps land exactly on
/// the target; the last count is snapped to `final_prunable` and counts are
/// forced strictly decreasing. Returns an empty vector if the strictness
/// constraint cannot be met (more iterations than integer room).
fn geometric_counts(cfg: &SparsityScheduleConfig, iterations: u64) -> Vec<u64> {
    let start = cfg.shape.prunable_params;
    let target = cfg.final_prunable();
    let keep = 1.0 - cfg.target_sparsity;
    let mut counts = Vec::with_capacity(iterations as usize);
    let mut prev = start;
    for k in 1..=iterations {
        let raw = if k == iterations {
            target
        } else {
            math::round(start as f64 * math::pow(keep, k as f64 / iterations as f64)) as u64
        };
        if prev <= target {
            return Vec::new();
        }
        let c = raw.clamp(target, prev - 1);
        counts.push(c);
        prev = c;
    }
    counts
}

fn prune_phase_cost(cfg: &SparsityScheduleConfig, iterations: u64) -> Option<f64> {
    let counts = geometric_counts(cfg, iterations);
    if counts.len() != iterations as usize {
        return None;
    }
    let nonprunable = cfg.carried_nonprunable();
    let steps = cfg.steps_per_iteration as f64;
    Some(
        counts
            .iter()
            .map(|&p| cfg.step_cost(nonprunable + p) * steps)
            .sum(),
    )
}

/// Solves the number of pruning iterations that fills the pruning-phase
/// budget: the largest `K` such that `K` geometric iterations of
/// `steps_per_iteration` full steps each fit within
/// `prune_fraction * total_compute`. Also returns the per-iteration removal
/// fraction `1 - (1 - S)^(1/K)`.
pub fn solve_iterations(cfg: &SparsityScheduleConfig) -> Result<(u64, f64), ScheduleError> {
    cfg.validate()?;
    if cfg.target_sparsity == 0.0 || cfg.prune_fraction == 0.0 {
        return Err(ScheduleError::NoPruningConfigured);
    }
    let budget = cfg.prune_fraction * cfg.total_compute;
    let one = match prune_phase_cost(cfg, 1) {
        Some(c) => c,
        None => return Err(ScheduleError::NoPruningConfigured),
    };
    if one > budget {
        return Err(ScheduleError::InfeasiblePruneBudget {
            budget,
            needed: one,
            steps: cfg.steps_per_iteration,
        });
    }

    // Phase cost is nondecreasing in K, so the feasibility predicate is
    // monotone; bracket by doubling, then binary search.
    let fits = |k: u64| match prune_phase_cost(cfg, k) {
        Some(c) => c <= budget,
        None => false,
    };
    let mut lo = 1u64;
    let mut hi = 2u64;
    while fits(hi) {
        lo = hi;
        hi *= 2;
        if hi > 1 << 40 {
            break;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = lo;
    let removal = 1.0 - math::pow(1.0 - cfg.target_sparsity, 1.0 / k as f64);
    Ok((k, removal))
}

/// Materializes a schedule configuration into a trajectory.
///
/// Phase budgets are `(dense_fraction, prune_fraction, rest)` of the total
/// compute, quantized to whole steps. The pruning phase lays down the solved
/// number of geometric iterations at `steps_per_iteration` steps each and
/// then fills its remaining budget with extra steps at the target count
/// (extending the last iteration), so every phase matches its budget to
/// within one step's compute. Sub-step leftovers land in the recovery phase.
pub fn build_schedule(cfg: &SparsityScheduleConfig) -> Result<ParamTrajectory, ScheduleError> {
    cfg.validate()?;
    let base = cfg.base_params();
    let nonprunable = cfg.carried_nonprunable();
    let tau = cfg.tokens_per_step;

    if cfg.target_sparsity == 0.0 {
        let steps = math::floor(cfg.total_compute / cfg.step_cost(base)) as u64;
        if steps == 0 {
            return Err(ScheduleError::InfeasibleStepBudget {
                budget: cfg.total_compute,
                needed: cfg.step_cost(base),
            });
        }
        return ParamTrajectory::from_segments(alloc::vec![Segment {
            phase: Phase::Dense,
            active_params: base,
            tokens: steps * tau,
        }]);
    }

    let (iterations, _removal) = solve_iterations(cfg)?;
    let counts = geometric_counts(cfg, iterations);
    debug_assert_eq!(counts.len(), iterations as usize);

    let mut segments = Vec::new();
    let mut spent = 0.0;

    let dense_budget = cfg.dense_fraction * cfg.total_compute;
    let dense_steps = math::floor(dense_budget / cfg.step_cost(base)) as u64;
    if dense_steps > 0 {
        segments.push(Segment {
            phase: Phase::Dense,
            active_params: base,
            tokens: dense_steps * tau,
        });
        spent += cfg.step_cost(base) * dense_steps as f64;
    }

    let prune_budget = cfg.prune_fraction * cfg.total_compute;
    let mut prune_spent = 0.0;
    for (i, &p) in counts.iter().enumerate() {
        let active = nonprunable + p;
        let remaining = prune_budget - prune_spent;
        let steps = cfg
            .steps_per_iteration
            .min(math::floor(remaining / cfg.step_cost(active)) as u64);
        if steps == 0 {
            break;
        }
        segments.push(Segment {
            phase: Phase::PruneIteration(i as u32 + 1),
            active_params: active,
            tokens: steps * tau,
        });
        prune_spent += cfg.step_cost(active) * steps as f64;
    }
    // Fill the rest of the pruning budget at the final count.
    let final_active = nonprunable + counts[counts.len() - 1];
    let extra = math::floor((prune_budget - prune_spent) / cfg.step_cost(final_active)) as u64;
    if extra > 0 {
        if let Some(last) = segments
            .iter_mut()
            .rev()
            .find(|s| matches!(s.phase, Phase::PruneIteration(_)))
        {
            last.tokens += extra * tau;
            prune_spent += cfg.step_cost(final_active) * extra as f64;
        }
    }
    spent += prune_spent;

    let recovery_budget = cfg.total_compute - spent;
    let recovery_steps = math::floor(recovery_budget / cfg.step_cost(final_active)) as u64;
    if recovery_steps > 0 {
        segments.push(Segment {
            phase: Phase::Recovery,
            active_params: final_active,
            tokens: recovery_steps * tau,
        });
    }

    ParamTrajectory::from_segments(segments)
}

/// Token-weighted mean active parameter count: `sum(N_k * d_k) / sum(d_k)`.
///
/// For a constant trajectory this is exactly the constant count.
pub fn average_params(traj: &ParamTrajectory) -> f64 {
    let segs = traj.segments();
    let first = segs[0].active_params;
    if segs.iter().all(|s| s.active_params == first) {
        return first as f64;
    }
    let mut weighted: u128 = 0;
    let mut tokens: u128 = 0;
    for s in segs {
        weighted += s.active_params as u128 * s.tokens as u128;
        tokens += s.tokens as u128;
    }
    weighted as f64 / tokens as f64
}

/// Effective compute `6 * sum(N_k * d_k)` in FLOPs. Equals
/// `6 * average_params * total_tokens` up to floating-point rounding.
pub fn effective_compute(traj: &ParamTrajectory) -> f64 {
    let mut weighted: u128 = 0;
    for s in traj.segments() {
        weighted += s.active_params as u128 * s.tokens as u128;
    }
    6.0 * weighted as f64
}

/// Dense model shape matched to the trajectory's average parameter count.
/// Training the matched shape on the same total tokens consumes the same
/// effective compute as the sparse run, up to rounding.
pub fn match_dense(traj: &ParamTrajectory) -> ModelShape {
    let avg = math::fmax(math::round(average_params(traj)), 1.0) as u64;
    ModelShape {
        prunable_params: avg,
        nonprunable_params: 0,
    }
}

/// Ratio between average and final active parameter counts.
pub fn compression_rate(traj: &ParamTrajectory) -> f64 {
    average_params(traj) / traj.final_active_params() as f64
}
