//! Small deterministic optimization kit: L-BFGS with a strong-Wolfe line
//! search for the law fits, and 1-D golden-section / bisection for the
//! prescription solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// A differentiable objective. `eval` writes the gradient into `grad` and
/// returns the value.
pub trait Objective {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iterations: usize,
    /// History pairs kept for the inverse-Hessian approximation.
    pub memory: usize,
    /// Convergence on the infinity norm of the gradient.
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            memory: 10,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, &v| math::fmax(m, math::abs(v)))
}

/// Minimizes `obj` from `x0` with the two-loop-recursion L-BFGS update.
pub fn lbfgs(obj: &dyn Objective, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult {
    let n = obj.dim();
    debug_assert_eq!(x0.len(), n);
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = obj.eval(&x, &mut grad);

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    let mut iterations = 0;
    let mut converged = inf_norm(&grad) <= opts.grad_tol;

    while !converged && iterations < opts.max_iterations {
        // two-loop recursion for the search direction
        let mut q = grad.clone();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &q);
            alphas[i] = a;
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= a * yj;
            }
        }
        let gamma = if m > 0 {
            let sy = dot(&s_hist[m - 1], &y_hist[m - 1]);
            let yy = dot(&y_hist[m - 1], &y_hist[m - 1]);
            if yy > 0.0 {
                sy / yy
            } else {
                1.0
            }
        } else {
            1.0
        };
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
        for i in 0..m {
            let b = rho_hist[i] * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alphas[i] - b) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|&v| -v).collect();

        let mut d_dot_g = dot(&dir, &grad);
        if !(d_dot_g < 0.0) || !d_dot_g.is_finite() {
            // fall back to steepest descent if the direction degenerated
            dir = grad.iter().map(|&g| -g).collect();
            d_dot_g = dot(&dir, &grad);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            if !(d_dot_g < 0.0) {
                break;
            }
        }

        let ls = match wolfe_line_search(obj, &x, value, &grad, &dir, d_dot_g) {
            Some(ls) => ls,
            None => break,
        };

        let step_s: Vec<f64> = dir.iter().map(|&d| ls.step * d).collect();
        let step_y: Vec<f64> = ls.grad.iter().zip(&grad).map(|(gn, go)| gn - go).collect();
        let sy = dot(&step_s, &step_y);
        if sy > 1e-16 * math::fmax(1.0, dot(&step_y, &step_y)) {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(step_s);
            y_hist.push(step_y);
        }

        let moved = ls
            .x
            .iter()
            .zip(&x)
            .any(|(a, b)| math::abs(a - b) > 1e-300);
        x = ls.x;
        grad = ls.grad;
        let prev = value;
        value = ls.value;
        iterations += 1;
        converged = inf_norm(&grad) <= opts.grad_tol;
        if !moved || math::abs(prev - value) <= f64::EPSILON * (1.0 + math::abs(prev)) && !converged {
            // no further progress possible at this precision
            break;
        }
    }

    LbfgsResult {
        grad_norm: inf_norm(&grad),
        x,
        value,
        iterations,
        converged,
    }
}

struct LineSearchPoint {
    step: f64,
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

fn eval_at(
    obj: &dyn Objective,
    x0: &[f64],
    dir: &[f64],
    step: f64,
) -> (Vec<f64>, f64, Vec<f64>, f64) {
    let x: Vec<f64> = x0.iter().zip(dir).map(|(xi, di)| xi + step * di).collect();
    let mut grad = vec![0.0; x.len()];
    let value = obj.eval(&x, &mut grad);
    let slope = dot(&grad, dir);
    (x, value, grad, slope)
}

/// Strong Wolfe line search (Nocedal & Wright alg. 3.5/3.6), c1=1e-4, c2=0.9.
fn wolfe_line_search(
    obj: &dyn Objective,
    x0: &[f64],
    f0: f64,
    _g0: &[f64],
    dir: &[f64],
    slope0: f64,
) -> Option<LineSearchPoint> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    const MAX_EXPAND: usize = 20;
    const MAX_ZOOM: usize = 40;

    let mut prev_step = 0.0;
    let mut prev_value = f0;
    let mut prev_slope = slope0;
    let mut step = 1.0;

    let zoom = |mut lo_step: f64,
                mut lo_value: f64,
                mut lo_slope: f64,
                mut hi_step: f64,
                mut hi_value: f64|
     -> Option<LineSearchPoint> {
        for _ in 0..MAX_ZOOM {
            // bisection with a quadratic-interpolation candidate
            let mut trial = 0.5 * (lo_step + hi_step);
            let denom = lo_value - hi_value + lo_slope * (hi_step - lo_step);
            if denom != 0.0 {
                let gap = hi_step - lo_step;
                let quad = lo_step + 0.5 * lo_slope * gap * gap / denom;
                let lo = math::fmin(lo_step, hi_step);
                let hi = math::fmax(lo_step, hi_step);
                let margin = 0.1 * (hi - lo);
                if quad.is_finite() && quad > lo + margin && quad < hi - margin {
                    trial = quad;
                }
            }
            let (x, value, grad, slope) = eval_at(obj, x0, dir, trial);
            if value > f0 + C1 * trial * slope0 || value >= lo_value {
                hi_step = trial;
                hi_value = value;
            } else {
                if math::abs(slope) <= -C2 * slope0 {
                    return Some(LineSearchPoint {
                        step: trial,
                        x,
                        value,
                        grad,
                    });
                }
                if slope * (hi_step - lo_step) >= 0.0 {
                    hi_step = lo_step;
                    hi_value = lo_value;
                }
                lo_step = trial;
                lo_value = value;
                lo_slope = slope;
            }
            if math::abs(hi_step - lo_step) < 1e-18 {
                break;
            }
        }
        // accept the best sufficient-decrease point found
        let (x, value, grad, _) = eval_at(obj, x0, dir, lo_step);
        if lo_step > 0.0 && value < f0 {
            Some(LineSearchPoint {
                step: lo_step,
                x,
                value,
                grad,
            })
        } else {
            None
        }
    };

    for i in 0..MAX_EXPAND {
        let (x, value, grad, slope) = eval_at(obj, x0, dir, step);
        if !value.is_finite() {
            // retreat into the finite region
            step *= 0.5;
            if step < 1e-300 {
                return None;
            }
            continue;
        }
        if value > f0 + C1 * step * slope0 || (i > 0 && value >= prev_value) {
            return zoom(prev_step, prev_value, prev_slope, step, value);
        }
        if math::abs(slope) <= -C2 * slope0 {
            return Some(LineSearchPoint {
                step,
                x,
                value,
                grad,
            });
        }
        if slope >= 0.0 {
            return zoom(step, value, slope, prev_step, prev_value);
        }
        prev_step = step;
        prev_value = value;
        prev_slope = slope;
        step *= 2.0;
    }
    None
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
/// Returns the abscissa of the minimum to absolute tolerance `tol`.
pub fn golden_section_min<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while (b - a) > tol && iter < max_iter {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iter += 1;
    }
    0.5 * (a + b)
}

/// Bisection root finding for a monotone function with `f(lo)` and `f(hi)` of
/// opposite sign. Converges to relative tolerance `rel_tol` on the abscissa.
pub fn bisect_monotone<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    let mut a = lo;
    let mut b = hi;
    let fa = f(a);
    let rising = fa < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * math::fmax(math::abs(a), math::abs(b)) {
            return mid;
        }
        let fm = f(mid);
        if (fm < 0.0) == rising {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
