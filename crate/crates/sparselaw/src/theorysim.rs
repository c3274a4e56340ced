//! Loss-trajectory simulation under a power-law loss-vs-compute model.
//!
//! The model assumes loss decays as `L(C) = (A / C)^alpha` during training at
//! a fixed parameter count, so a small compute increment `dC` at cumulative
//! compute `C` changes the loss by the first-order estimate
//! `dL = -alpha * A^alpha * C^(-alpha-1) * dC`. Applying this per trajectory
//! segment, with each segment's compute proportional to its active parameter
//! count times its tokens (factor 6 for unit coherence), accumulates the
//! total loss change of a sparse run.
//!
//! The power law is invalid near zero compute, so simulations start from a
//! burn-in compute, by default 2.6% of the trajectory's total. Loss spikes at
//! the pruning steps are excluded by construction: the model only describes
//! between-prune decay.

use alloc::vec::Vec;

use crate::math;
use crate::schedule::ParamTrajectory;

/// Parameters of the loss-vs-compute power law `L(C) = (A / C)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TheoryParams {
    /// Compute scale `A`.
    pub compute_scale: f64,
    /// Decay exponent `alpha`.
    pub alpha: f64,
}

/// Burn-in compute at which simulation starts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BurnIn {
    /// Skip this fraction of the trajectory's own compute; the power law is
    /// taken to hold only past that point.
    FractionOfTotal(f64),
    /// The run consumed this many FLOPs before the trajectory begins; the
    /// whole trajectory is simulated on top of that prefix. Used for
    /// tail-of-run studies.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub burn_in: BurnIn,
    /// Largest Euler increment as a fraction of the current cumulative
    /// compute; smaller is more accurate.
    pub max_step_fraction: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            burn_in: BurnIn::FractionOfTotal(0.026),
            max_step_fraction: 0.002,
        }
    }
}

/// One point of a simulated loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub compute: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Loss at segment boundaries, starting at the burn-in point.
    pub curve: Vec<CurvePoint>,
    /// Total accumulated first-order loss change (negative).
    pub total_delta: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("burn-in compute must be positive (the power law is singular at zero compute)")]
    ZeroBurnIn,
    #[error("trajectory consumes no compute past the burn-in point")]
    NothingToSimulate,
    #[error("piecewise fit needs at least {need} points on the {side} side of the breakpoint, got {got}")]
    InsufficientPoints {
        side: &'static str,
        need: usize,
        got: usize,
    },
}

/// `L(C) = (A / C)^alpha`.
pub fn loss_of_compute(p: &TheoryParams, compute: f64) -> f64 {
    math::pow(p.compute_scale / compute, p.alpha)
}

/// First-order loss change for a compute increment `delta_compute` at
/// cumulative compute `compute_prefix`:
/// `-alpha * A^alpha * C^(-alpha-1) * dC`.
pub fn delta_loss(p: &TheoryParams, compute_prefix: f64, delta_compute: f64) -> f64 {
    -p.alpha
        * math::pow(p.compute_scale, p.alpha)
        * math::pow(compute_prefix, -p.alpha - 1.0)
        * delta_compute
}

fn trajectory_compute(traj: &ParamTrajectory) -> f64 {
    traj.segments()
        .iter()
        .map(|s| 6.0 * s.active_params as f64 * s.tokens as f64)
        .sum()
}

/// Start compute and how much of the trajectory's own compute is skipped.
fn resolve_burn_in(burn_in: BurnIn, total_compute: f64) -> (f64, f64) {
    match burn_in {
        BurnIn::FractionOfTotal(f) => (f * total_compute, f * total_compute),
        BurnIn::Absolute(c) => (c, 0.0),
    }
}

/// Accumulates per-segment first-order loss changes over a trajectory.
///
/// The curve starts at the burn-in compute with the closed-form loss there;
/// each segment's compute `6 * active_params * tokens` is then integrated in
/// adaptive Euler increments. The curve holds one point per segment boundary.
pub fn simulate_trajectory(
    p: &TheoryParams,
    traj: &ParamTrajectory,
    opts: &SimOptions,
) -> Result<SimResult, SimError> {
    let (start, skip) = resolve_burn_in(opts.burn_in, trajectory_compute(traj));
    if !(start > 0.0) {
        return Err(SimError::ZeroBurnIn);
    }

    let mut curve = Vec::with_capacity(traj.len() + 1);
    let mut cumulative = start;
    let mut loss = loss_of_compute(p, start);
    let mut skipped = 0.0;
    let mut started = false;
    let mut total_delta = 0.0;

    for seg in traj.segments() {
        let mut remaining = 6.0 * seg.active_params as f64 * seg.tokens as f64;
        // consume the part of the trajectory inside the burn-in region
        if skipped < skip {
            let eaten = math::fmin(remaining, skip - skipped);
            skipped += eaten;
            remaining -= eaten;
            if remaining <= 0.0 {
                continue;
            }
        }
        if !started {
            curve.push(CurvePoint {
                compute: cumulative,
                loss,
            });
            started = true;
        }
        while remaining > 0.0 {
            let dc = math::fmin(remaining, opts.max_step_fraction * cumulative);
            let dl = delta_loss(p, cumulative, dc);
            loss += dl;
            total_delta += dl;
            cumulative += dc;
            remaining -= dc;
        }
        curve.push(CurvePoint {
            compute: cumulative,
            loss,
        });
    }

    if !started {
        return Err(SimError::NothingToSimulate);
    }
    Ok(SimResult { curve, total_delta })
}

/// The decay coefficient `C_prefix^(-alpha-1)` ahead of each segment,
/// normalized by its first entry. `C_prefix` is the compute consumed before
/// the segment under the burn-in convention of [`SimOptions`].
pub fn coefficient_series(
    p: &TheoryParams,
    traj: &ParamTrajectory,
    opts: &SimOptions,
) -> Result<Vec<f64>, SimError> {
    let total = trajectory_compute(traj);
    let mut out = Vec::with_capacity(traj.len());
    let mut cumulative = 0.0;
    for seg in traj.segments() {
        let prefix = match opts.burn_in {
            BurnIn::FractionOfTotal(f) => math::fmax(cumulative, f * total),
            BurnIn::Absolute(c) => c + cumulative,
        };
        if !(prefix > 0.0) {
            return Err(SimError::ZeroBurnIn);
        }
        out.push(math::pow(prefix, -p.alpha - 1.0));
        cumulative += 6.0 * seg.active_params as f64 * seg.tokens as f64;
    }
    let first = out[0];
    for v in out.iter_mut() {
        *v /= first;
    }
    Ok(out)
}

/// Flatness of a series tail: `(max - min) / mean` over `series[start..]`.
pub fn flatness(series: &[f64], start: usize) -> f64 {
    let tail = &series[start.min(series.len().saturating_sub(1))..];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in tail {
        lo = math::fmin(lo, v);
        hi = math::fmax(hi, v);
        sum += v;
    }
    (hi - lo) / (sum / tail.len() as f64)
}

/// Least-squares slopes of log-loss versus log-compute on each side of a
/// breakpoint, negated so positive values are decay exponents. Points with
/// compute equal to the breakpoint count on both sides.
pub fn fit_piecewise_alpha(
    curve: &[CurvePoint],
    breakpoint: f64,
) -> Result<(f64, f64), SimError> {
    let left: Vec<(f64, f64)> = curve
        .iter()
        .filter(|pt| pt.compute <= breakpoint)
        .map(|pt| (math::ln(pt.compute), math::ln(pt.loss)))
        .collect();
    let right: Vec<(f64, f64)> = curve
        .iter()
        .filter(|pt| pt.compute >= breakpoint)
        .map(|pt| (math::ln(pt.compute), math::ln(pt.loss)))
        .collect();
    if left.len() < 3 {
        return Err(SimError::InsufficientPoints {
            side: "left",
            need: 3,
            got: left.len(),
        });
    }
    if right.len() < 3 {
        return Err(SimError::InsufficientPoints {
            side: "right",
            need: 3,
            got: right.len(),
        });
    }
    Ok((-ls_slope(&left), -ls_slope(&right)))
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(x, y) in points {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    sxy / sxx
}
