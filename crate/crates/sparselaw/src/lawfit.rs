//! Scaling-law fitting.
//!
//! Two loss models over run records:
//!
//! - the unified law `L = A / avg_params^alpha + B / tokens^beta + E`, which
//!   covers dense and sparse runs alike through the average parameter count;
//! - a prior sparse law
//!   `L = (a_S (1-S)^{b_S} + c_S) / N_final^{b_N} + (a_D / D)^{b_D} + c`
//!   keyed on final sparsity and final nonzero parameters, kept for
//!   side-by-side comparison.
//!
//! Both are fitted the same way: parameters with positivity constraints live
//! in log space, residuals are taken between predicted and actual log loss,
//! robustified with a Huber loss (`delta = 1e-3`), and minimized with L-BFGS
//! from a grid of random initializations. The best converged start wins;
//! ties break toward the lowest start index so a fixed seed gives a
//! bit-identical report.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::optim::{lbfgs, LbfgsOptions, Objective};
use crate::record::RunRecord;

/// Huber width on log-loss residuals.
pub const HUBER_DELTA: f64 = 1e-3;

/// Fitted parameters of the unified law plus fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingLawFit {
    /// Coefficient of the parameter term.
    pub a: f64,
    /// Coefficient of the data term.
    pub b: f64,
    /// Irreducible loss.
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Huber objective at the reported optimum.
    pub objective_value: f64,
    pub n_starts_converged: u32,
}

impl ScalingLawFit {
    /// The widely published dense-law constants
    /// (A=406.4, B=410.7, E=1.69, alpha=0.34, beta=0.28).
    ///
    /// Default constants for prescriptions when no fit is supplied.
    pub fn reference() -> Self {
        Self {
            a: 406.4,
            b: 410.7,
            e: 1.69,
            alpha: 0.34,
            beta: 0.28,
            objective_value: 0.0,
            n_starts_converged: 0,
        }
    }

    pub fn log_params(&self) -> LogLawParams {
        LogLawParams {
            log_a: math::ln(self.a),
            log_b: math::ln(self.b),
            log_e: math::ln(self.e),
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Unified-law parameters in the optimizer's log-space coordinates
/// (`A = exp(log_a)` and so on).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLawParams {
    pub log_a: f64,
    pub log_b: f64,
    pub log_e: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Fitted parameters of the prior sparse law.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrantarLawFit {
    pub a_s: f64,
    pub b_s: f64,
    pub c_s: f64,
    pub b_n: f64,
    pub a_d: f64,
    pub b_d: f64,
    pub c: f64,
    pub objective_value: f64,
    pub n_starts_converged: u32,
    /// False when the dataset had a single sparsity level of zero and the
    /// sparsity factor was collapsed to a constant.
    pub sparsity_identified: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub starts: u32,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 100,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {need} records, got {got}")]
    TooFewRecords { got: usize, need: usize },
    #[error("record {index} has non-positive final loss {loss}")]
    NonPositiveLoss { index: usize, loss: f64 },
    #[error("ill-posed: all records share one average parameter count")]
    DegenerateAvgParams,
    #[error("ill-posed: all records share one token count")]
    DegenerateTokens,
    #[error("ill-posed: sparsity parameters need at least two distinct nonzero-capable sparsity levels")]
    DegenerateSparsity,
    #[error("no start converged; carrying best partial fit")]
    NoStartConverged(Box<ScalingLawFit>),
    #[error("no start converged; carrying best partial fit")]
    NoStartConvergedFrantar(Box<FrantarLawFit>),
}

/// Unified-law prediction `A / avg_params^alpha + B / tokens^beta + E`.
pub fn predict_loss(fit: &ScalingLawFit, avg_params: f64, tokens: f64) -> f64 {
    fit.a / math::pow(avg_params, fit.alpha) + fit.b / math::pow(tokens, fit.beta) + fit.e
}

/// Prior-sparse-law prediction.
pub fn predict_loss_frantar(
    fit: &FrantarLawFit,
    sparsity: f64,
    final_params: f64,
    tokens: f64,
) -> f64 {
    (fit.a_s * math::pow(1.0 - sparsity, fit.b_s) + fit.c_s) / math::pow(final_params, fit.b_n)
        + math::pow(fit.a_d / tokens, fit.b_d)
        + fit.c
}

fn huber(r: f64, delta: f64) -> f64 {
    let a = math::abs(r);
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

fn huber_grad(r: f64, delta: f64) -> f64 {
    if math::abs(r) <= delta {
        r
    } else if r > 0.0 {
        delta
    } else {
        -delta
    }
}

fn validate_dataset(dataset: &[RunRecord]) -> Result<(), FitError> {
    if dataset.len() < 5 {
        return Err(FitError::TooFewRecords {
            got: dataset.len(),
            need: 5,
        });
    }
    for (index, r) in dataset.iter().enumerate() {
        if !(r.final_loss > 0.0) {
            return Err(FitError::NonPositiveLoss {
                index,
                loss: r.final_loss,
            });
        }
    }
    let first_n = dataset[0].avg_params;
    if dataset.iter().all(|r| r.avg_params == first_n) {
        return Err(FitError::DegenerateAvgParams);
    }
    let first_d = dataset[0].total_tokens;
    if dataset.iter().all(|r| r.total_tokens == first_d) {
        return Err(FitError::DegenerateTokens);
    }
    Ok(())
}

struct UnifiedProblem {
    ln_n: Vec<f64>,
    ln_d: Vec<f64>,
    ln_l: Vec<f64>,
}

impl Objective for UnifiedProblem {
    fn dim(&self) -> usize {
        5
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (la, lb, le, alpha, beta) = (x[0], x[1], x[2], x[3], x[4]);
        grad.fill(0.0);
        let mut total = 0.0;
        for i in 0..self.ln_n.len() {
            let u = la - alpha * self.ln_n[i];
            let v = lb - beta * self.ln_d[i];
            let w = le;
            let m = math::fmax(u, math::fmax(v, w));
            let eu = math::exp(u - m);
            let ev = math::exp(v - m);
            let ew = math::exp(w - m);
            let s = eu + ev + ew;
            let r = m + math::ln(s) - self.ln_l[i];
            total += huber(r, HUBER_DELTA);
            let dh = huber_grad(r, HUBER_DELTA);
            let (su, sv, sw) = (eu / s, ev / s, ew / s);
            grad[0] += dh * su;
            grad[1] += dh * sv;
            grad[2] += dh * sw;
            grad[3] += dh * su * (-self.ln_n[i]);
            grad[4] += dh * sv * (-self.ln_d[i]);
        }
        total
    }
}

/// Huber objective of the unified law at the given log-space parameters:
/// `sum_i Huber_delta(logsumexp(log_a - alpha ln N_i, log_b - beta ln D_i,
/// log_e) - ln L_i)`.
pub fn huber_objective(params: &LogLawParams, dataset: &[RunRecord]) -> Result<f64, FitError> {
    if dataset.is_empty() {
        return Err(FitError::TooFewRecords { got: 0, need: 1 });
    }
    for (index, r) in dataset.iter().enumerate() {
        if !(r.final_loss > 0.0) {
            return Err(FitError::NonPositiveLoss {
                index,
                loss: r.final_loss,
            });
        }
    }
    let problem = UnifiedProblem {
        ln_n: dataset.iter().map(|r| math::ln(r.avg_params)).collect(),
        ln_d: dataset
            .iter()
            .map(|r| math::ln(r.total_tokens as f64))
            .collect(),
        ln_l: dataset.iter().map(|r| math::ln(r.final_loss)).collect(),
    };
    let x = [
        params.log_a,
        params.log_b,
        params.log_e,
        params.alpha,
        params.beta,
    ];
    let mut grad = [0.0; 5];
    Ok(problem.eval(&x, &mut grad))
}

struct MultiStartBest {
    x: Vec<f64>,
    value: f64,
    n_converged: u32,
}

fn multi_start(
    problem: &dyn Objective,
    opts: &FitOptions,
    draw: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<f64>,
) -> MultiStartBest {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let lopts = LbfgsOptions {
        max_iterations: opts.max_iterations,
        ..LbfgsOptions::default()
    };
    let mut best_x: Option<Vec<f64>> = None;
    let mut best_value = f64::INFINITY;
    let mut n_converged = 0u32;
    for _ in 0..opts.starts {
        let x0 = draw(&mut rng);
        let res = lbfgs(problem, &x0, &lopts);
        if res.converged {
            n_converged += 1;
        }
        // strict improvement keeps the lowest start index on ties
        if res.value.is_finite() && res.value < best_value {
            best_value = res.value;
            best_x = Some(res.x);
        } else if best_x.is_none() {
            best_x = Some(res.x);
            best_value = res.value;
        }
    }
    MultiStartBest {
        x: best_x.unwrap_or_default(),
        value: best_value,
        n_converged,
    }
}

/// Fits the unified law to the dataset with multi-start L-BFGS.
///
/// Deterministic for a fixed `FitOptions::seed`. Returns the parameter set
/// with the lowest Huber objective over all starts.
pub fn fit(dataset: &[RunRecord], opts: &FitOptions) -> Result<ScalingLawFit, FitError> {
    validate_dataset(dataset)?;
    let problem = UnifiedProblem {
        ln_n: dataset.iter().map(|r| math::ln(r.avg_params)).collect(),
        ln_d: dataset
            .iter()
            .map(|r| math::ln(r.total_tokens as f64))
            .collect(),
        ln_l: dataset.iter().map(|r| math::ln(r.final_loss)).collect(),
    };
    let best = multi_start(&problem, opts, &mut |rng| {
        alloc::vec![
            rng.gen_range(0.0..30.0),
            rng.gen_range(0.0..30.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
        ]
    });
    let fit = ScalingLawFit {
        a: math::exp(best.x[0]),
        b: math::exp(best.x[1]),
        e: math::exp(best.x[2]),
        alpha: best.x[3],
        beta: best.x[4],
        objective_value: best.value,
        n_starts_converged: best.n_converged,
    };
    if best.n_converged == 0 {
        return Err(FitError::NoStartConverged(Box::new(fit)));
    }
    Ok(fit)
}

struct FrantarProblem {
    one_minus_s: Vec<f64>,
    ln_nf: Vec<f64>,
    ln_d: Vec<f64>,
    ln_l: Vec<f64>,
    /// Pin `a_s = 0, b_s = 0` and optimize the collapsed 5-parameter form.
    collapsed: bool,
}

impl FrantarProblem {
    fn unpack(&self, x: &[f64]) -> [f64; 7] {
        // [l_as, b_s, l_cs, b_n, l_ad, b_d, l_c]
        if self.collapsed {
            [f64::NEG_INFINITY, 0.0, x[0], x[1], x[2], x[3], x[4]]
        } else {
            [x[0], x[1], x[2], x[3], x[4], x[5], x[6]]
        }
    }
}

impl Objective for FrantarProblem {
    fn dim(&self) -> usize {
        if self.collapsed {
            5
        } else {
            7
        }
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let [l_as, b_s, l_cs, b_n, l_ad, b_d, l_c] = self.unpack(x);
        let a_s = math::exp(l_as);
        let c_s = math::exp(l_cs);
        let c = math::exp(l_c);
        grad.fill(0.0);
        let mut total = 0.0;
        for i in 0..self.ln_nf.len() {
            let sp = math::pow(self.one_minus_s[i], b_s);
            let n_term = math::exp(-b_n * self.ln_nf[i]);
            let t1a = a_s * sp * n_term;
            let t1c = c_s * n_term;
            let t2 = math::exp(b_d * (l_ad - self.ln_d[i]));
            let pred = t1a + t1c + t2 + c;
            let r = math::ln(pred) - self.ln_l[i];
            total += huber(r, HUBER_DELTA);
            let dh = huber_grad(r, HUBER_DELTA) / pred;
            let ln_oms = math::ln(self.one_minus_s[i]);
            let g = [
                dh * t1a,
                dh * t1a * ln_oms,
                dh * t1c,
                dh * (t1a + t1c) * (-self.ln_nf[i]),
                dh * t2 * b_d,
                dh * t2 * (l_ad - self.ln_d[i]),
                dh * c,
            ];
            if self.collapsed {
                grad[0] += g[2];
                grad[1] += g[3];
                grad[2] += g[4];
                grad[3] += g[5];
                grad[4] += g[6];
            } else {
                for (gj, gv) in grad.iter_mut().zip(g) {
                    *gj += gv;
                }
            }
        }
        total
    }
}

/// Fits the prior sparse law. Needs per-record sparsity and final nonzero
/// parameter counts.
///
/// With at least two distinct sparsity levels the full seven-parameter form
/// is fitted. A dataset whose records are all dense (sparsity zero) is fitted
/// in a collapsed form where the sparsity factor is a single constant; any
/// other single-sparsity dataset cannot identify the sparsity parameters and
/// is rejected.
pub fn fit_frantar(dataset: &[RunRecord], opts: &FitOptions) -> Result<FrantarLawFit, FitError> {
    validate_dataset(dataset)?;
    let mut sparsities: Vec<f64> = dataset.iter().map(|r| r.sparsity).collect();
    sparsities.sort_by(f64::total_cmp);
    sparsities.dedup();
    let collapsed = match sparsities.len() {
        1 if sparsities[0] == 0.0 => true,
        1 => return Err(FitError::DegenerateSparsity),
        _ => false,
    };

    let problem = FrantarProblem {
        one_minus_s: dataset.iter().map(|r| 1.0 - r.sparsity).collect(),
        ln_nf: dataset
            .iter()
            .map(|r| math::ln(r.final_nonzero_params as f64))
            .collect(),
        ln_d: dataset
            .iter()
            .map(|r| math::ln(r.total_tokens as f64))
            .collect(),
        ln_l: dataset.iter().map(|r| math::ln(r.final_loss)).collect(),
        collapsed,
    };
    let best = multi_start(&problem, opts, &mut |rng| {
        if collapsed {
            alloc::vec![
                rng.gen_range(0.0..30.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..30.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(-2.0..2.0),
            ]
        } else {
            alloc::vec![
                rng.gen_range(0.0..30.0),
                rng.gen_range(0.0..4.0),
                rng.gen_range(0.0..30.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(0.0..30.0),
                rng.gen_range(0.0..2.0),
                rng.gen_range(-2.0..2.0),
            ]
        }
    });
    let p = problem.unpack(&best.x);
    let fit = FrantarLawFit {
        a_s: math::exp(p[0]),
        b_s: p[1],
        c_s: math::exp(p[2]),
        b_n: p[3],
        a_d: math::exp(p[4]),
        b_d: p[5],
        c: math::exp(p[6]),
        objective_value: best.value,
        n_starts_converged: best.n_converged,
        sparsity_identified: !collapsed,
    };
    if best.n_converged == 0 {
        return Err(FitError::NoStartConvergedFrantar(Box::new(fit)));
    }
    Ok(fit)
}
