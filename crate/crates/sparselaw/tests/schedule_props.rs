//! Property tests for schedule construction and accounting invariants.

use proptest::prelude::*;
use sparselaw::schedule::{
    average_params, build_schedule, effective_compute, solve_iterations, Accounting, ModelShape,
    Phase, SparsityScheduleConfig,
};

fn arb_config() -> impl Strategy<Value = SparsityScheduleConfig> {
    (
        10_000u64..2_000_000,       // prunable
        0u64..100_000,              // nonprunable
        0.05f64..0.95,              // sparsity
        0.0f64..0.9,                // dense fraction share of the non-prune mass
        0.05f64..0.95,              // prune fraction
        1u64..64,                   // tokens per step
        10u64..200,                 // steps per iteration
        200.0f64..20_000.0,         // budget in units of one full-size iteration
    )
        .prop_map(
            |(prunable, nonprunable, sparsity, dense_share, prune, tau, steps, budget_iters)| {
                let dense = dense_share * (1.0 - prune);
                let shape = ModelShape {
                    prunable_params: prunable,
                    nonprunable_params: nonprunable,
                };
                let iter_cost = 6.0 * shape.total_params() as f64 * (steps * tau) as f64;
                SparsityScheduleConfig {
                    shape,
                    target_sparsity: sparsity,
                    dense_fraction: dense,
                    prune_fraction: prune,
                    steps_per_iteration: steps,
                    tokens_per_step: tau,
                    total_compute: budget_iters * iter_cost,
                    accounting: Accounting::Total,
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compute_round_trip_within_one_max_step(cfg in arb_config()) {
        let traj = build_schedule(&cfg).unwrap();
        let consumed = effective_compute(&traj);
        let max_step = 6.0 * cfg.shape.total_params() as f64 * cfg.tokens_per_step as f64;
        prop_assert!(consumed <= cfg.total_compute * (1.0 + 1e-12));
        prop_assert!(consumed >= cfg.total_compute - max_step);
    }

    #[test]
    fn phase_budgets_match_fractions(cfg in arb_config()) {
        let traj = build_schedule(&cfg).unwrap();
        let (dense, prune, recovery) = traj.phase_compute();
        let max_step = 6.0 * cfg.shape.total_params() as f64 * cfg.tokens_per_step as f64;
        prop_assert!((dense - cfg.dense_fraction * cfg.total_compute).abs() <= max_step);
        prop_assert!((prune - cfg.prune_fraction * cfg.total_compute).abs() <= max_step);
        // recovery absorbs the other phases' sub-step leftovers
        let recovery_budget = cfg.recovery_fraction() * cfg.total_compute;
        prop_assert!((recovery - recovery_budget).abs() <= 3.0 * max_step);
    }

    #[test]
    fn geometric_decay_is_exact_before_rounding(cfg in arb_config()) {
        let (k, removal) = solve_iterations(&cfg).unwrap();
        let remaining = (1.0 - removal).powf(k as f64) / (1.0 - cfg.target_sparsity);
        prop_assert!((remaining - 1.0).abs() < 1e-6);
    }

    #[test]
    fn prune_counts_strictly_decrease(cfg in arb_config()) {
        let traj = build_schedule(&cfg).unwrap();
        let counts: Vec<u64> = traj
            .segments()
            .iter()
            .filter(|s| matches!(s.phase, Phase::PruneIteration(_)))
            .map(|s| s.active_params)
            .collect();
        for w in counts.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn effective_compute_identity(cfg in arb_config()) {
        let traj = build_schedule(&cfg).unwrap();
        let lhs = effective_compute(&traj);
        let rhs = 6.0 * average_params(&traj) * traj.total_tokens() as f64;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs);
    }

    #[test]
    fn average_params_strictly_decreasing_in_sparsity(
        base in arb_config(),
        s_lo in 0.1f64..0.5,
        gap in 0.1f64..0.4,
    ) {
        let lo = SparsityScheduleConfig { target_sparsity: s_lo, ..base };
        let hi = SparsityScheduleConfig { target_sparsity: s_lo + gap, ..base };
        let avg_lo = average_params(&build_schedule(&lo).unwrap());
        let avg_hi = average_params(&build_schedule(&hi).unwrap());
        prop_assert!(avg_hi < avg_lo, "avg({}) = {avg_lo}, avg({}) = {avg_hi}",
            lo.target_sparsity, hi.target_sparsity);
    }

    #[test]
    fn dense_reduction_is_exact(mut cfg in arb_config()) {
        cfg.target_sparsity = 0.0;
        let traj = build_schedule(&cfg).unwrap();
        prop_assert_eq!(average_params(&traj), cfg.shape.total_params() as f64);
    }
}
