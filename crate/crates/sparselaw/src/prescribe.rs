//! Compute-optimal training prescriptions.
//!
//! Given a fitted (or published) scaling law and a target loss, solve for the
//! cheapest training configuration:
//!
//! - [`solve_chinchilla`] minimizes training FLOPs `6 * N * D` alone;
//! - [`solve_lifetime`] minimizes training plus inference FLOPs
//!   `6 * avg_params * D + 2 * final_params * inference_tokens`, where sparse
//!   pre-training decouples `final_params = avg_params / compression` from
//!   the average parameter count that governs quality.
//!
//! Both reduce the search to one dimension: for a candidate average parameter
//! count the token count follows from the loss constraint in closed form, and
//! the resulting objective is unimodal in `log N`, so golden-section search
//! finds the optimum.

use crate::lawfit::{predict_loss, ScalingLawFit};
use crate::math;
use crate::optim::golden_section_min;

/// A compute-optimal recommendation at a target loss.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prescription {
    /// Average parameter count during training.
    pub avg_params: f64,
    /// Parameters served at inference (`avg_params / compression`).
    pub final_params: f64,
    /// Training tokens.
    pub tokens: f64,
    pub sparsity: f64,
    pub train_flops: f64,
    pub inference_flops: f64,
    pub lifetime_flops: f64,
    pub achieved_loss: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrescribeError {
    #[error("target loss {target} must exceed the irreducible loss {irreducible}")]
    TargetBelowIrreducible { target: f64, irreducible: f64 },
    #[error("compression rate {0} must be at least 1")]
    CompressionBelowOne(f64),
    #[error("inference tokens must be nonnegative, got {0}")]
    NegativeInference(f64),
    #[error("law parameters must be positive")]
    InvalidLaw,
}

/// Training plus inference FLOPs: `6 * avg_params * tokens + 2 * final_params
/// * inference_tokens`.
pub fn lifetime_flops(avg_params: f64, tokens: f64, final_params: f64, inference_tokens: f64) -> f64 {
    6.0 * avg_params * tokens + 2.0 * final_params * inference_tokens
}

fn check_law(fit: &ScalingLawFit) -> Result<(), PrescribeError> {
    if fit.a > 0.0 && fit.b > 0.0 && fit.e > 0.0 && fit.alpha > 0.0 && fit.beta > 0.0 {
        Ok(())
    } else {
        Err(PrescribeError::InvalidLaw)
    }
}

/// Tokens required to reach `target_loss` at a given average parameter count.
/// Closed form from the loss constraint; infinite when the parameter term
/// alone exceeds the loss budget.
fn tokens_for_loss(fit: &ScalingLawFit, avg_params: f64, target_loss: f64) -> f64 {
    let data_budget = target_loss - fit.e - fit.a / math::pow(avg_params, fit.alpha);
    if data_budget <= 0.0 {
        return f64::INFINITY;
    }
    math::pow(fit.b / data_budget, 1.0 / fit.beta)
}

fn solve_1d(
    fit: &ScalingLawFit,
    target_loss: f64,
    inference_tokens: f64,
    sparsity: f64,
    compression: f64,
) -> Result<Prescription, PrescribeError> {
    check_law(fit)?;
    if target_loss <= fit.e {
        return Err(PrescribeError::TargetBelowIrreducible {
            target: target_loss,
            irreducible: fit.e,
        });
    }
    if compression < 1.0 {
        return Err(PrescribeError::CompressionBelowOne(compression));
    }
    if inference_tokens < 0.0 {
        return Err(PrescribeError::NegativeInference(inference_tokens));
    }

    // Smallest feasible average size: parameter term consumes the whole loss
    // budget and the required token count diverges.
    let ln_n_min = math::ln(fit.a / (target_loss - fit.e)) / fit.alpha;
    let objective = |ln_n: f64| {
        let n = math::exp(ln_n);
        let d = tokens_for_loss(fit, n, target_loss);
        6.0 * n * d + 2.0 * (n / compression) * inference_tokens
    };
    let ln_n = golden_section_min(objective, ln_n_min + 1e-9, ln_n_min + 45.0, 1e-10, 400);

    let avg_params = math::exp(ln_n);
    let tokens = tokens_for_loss(fit, avg_params, target_loss);
    let final_params = avg_params / compression;
    let train_flops = 6.0 * avg_params * tokens;
    let inference_flops = 2.0 * final_params * inference_tokens;
    Ok(Prescription {
        avg_params,
        final_params,
        tokens,
        sparsity,
        train_flops,
        inference_flops,
        lifetime_flops: train_flops + inference_flops,
        achieved_loss: predict_loss(fit, avg_params, tokens),
    })
}

/// Training-compute-optimal prescription: minimizes `6 * N * D` subject to
/// the law predicting `target_loss`.
pub fn solve_chinchilla(
    fit: &ScalingLawFit,
    target_loss: f64,
) -> Result<Prescription, PrescribeError> {
    solve_1d(fit, target_loss, 0.0, 0.0, 1.0)
}

/// Lifetime-compute-optimal prescription with sparsity: minimizes
/// `6 * avg_params * D + 2 * (avg_params / compression) * inference_tokens`
/// subject to the law predicting `target_loss`.
///
/// With `inference_tokens = 0` this reduces to [`solve_chinchilla`]; with
/// `compression = 1` and `sparsity = 0` it is the dense inference-aware
/// problem.
pub fn solve_lifetime(
    fit: &ScalingLawFit,
    target_loss: f64,
    inference_tokens: f64,
    sparsity: f64,
    compression: f64,
) -> Result<Prescription, PrescribeError> {
    solve_1d(fit, target_loss, inference_tokens, sparsity, compression)
}
