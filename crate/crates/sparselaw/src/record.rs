//! Run records: one completed (or simulated) training run.

use alloc::string::String;

use crate::schedule::ModelShape;

/// Provenance of a run record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RunSource {
    Measured,
    Simulated,
}

/// One training run reduced to the quantities the scaling laws consume.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub label: String,
    /// Token-weighted mean active parameter count over the run.
    pub avg_params: f64,
    pub total_tokens: u64,
    /// Final evaluation loss (mean next-token cross-entropy).
    pub final_loss: f64,
    /// Fraction of prunable parameters removed by the end of the run.
    pub sparsity: f64,
    /// Nonzero parameters remaining at the end of the run.
    pub final_nonzero_params: u64,
    pub shape: ModelShape,
    pub source: RunSource,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("avg_params must be positive, got {0}")]
    NonPositiveAvgParams(f64),
    #[error("total_tokens must be positive")]
    ZeroTokens,
    #[error("final_loss must be positive, got {0}")]
    NonPositiveLoss(f64),
    #[error("sparsity {0} outside [0, 1)")]
    SparsityOutOfRange(f64),
}

impl RunRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        if !(self.avg_params > 0.0) {
            return Err(RecordError::NonPositiveAvgParams(self.avg_params));
        }
        if self.total_tokens == 0 {
            return Err(RecordError::ZeroTokens);
        }
        if !(self.final_loss > 0.0) {
            return Err(RecordError::NonPositiveLoss(self.final_loss));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(RecordError::SparsityOutOfRange(self.sparsity));
        }
        Ok(())
    }
}
