//! Finite-difference gradient ascent with backtracking, shared by the
//! M-steps of all methods and by the initialization.

use crate::solver::config::SolverConfig;
use crate::warp::{WarpParams, MAX_PARAMS};

pub(crate) struct Step {
    pub params: WarpParams,
    pub value: f64,
    /// Step length (px) to try next time.
    pub next_step: f64,
    pub moved: bool,
}

/// Central-difference gradient over the active parameters.
pub(crate) fn fd_gradient(params: &WarpParams, h: f64, f: &(dyn Fn(&WarpParams) -> f64 + Sync)) -> [f64; MAX_PARAMS] {
    let mut g = [0.0; MAX_PARAMS];
    for i in params.active() {
        let mut plus = *params;
        let mut minus = *params;
        plus.theta_mut()[i] += h;
        minus.theta_mut()[i] -= h;
        g[i] = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    g
}

/// One ascent step `theta + mu * grad`. The gradient is preconditioned by the
/// displacement levers so that `step_px` is the pixel displacement of the
/// trial step; the step is halved up to `config.backtrack` times until the
/// objective increases. The parameters are returned unchanged when no trial
/// improves on `value`.
pub(crate) fn ascend(
    params: &WarpParams,
    value: f64,
    levers: [f64; MAX_PARAMS],
    step_px: f64,
    config: &SolverConfig,
    f: &(dyn Fn(&WarpParams) -> f64 + Sync),
) -> Step {
    let unchanged = |next_step: f64| Step {
        params: *params,
        value,
        next_step,
        moved: false,
    };
    if step_px <= 0.0 {
        return unchanged(step_px);
    }
    let g = fd_gradient(params, config.fd_step, f);
    let mut scaled = [0.0; MAX_PARAMS];
    let mut norm = 0.0;
    for i in params.active() {
        scaled[i] = g[i] / levers[i];
        norm += scaled[i] * scaled[i];
    }
    let norm = norm.sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return unchanged(step_px);
    }
    let mut alpha = step_px;
    for _ in 0..=config.backtrack {
        let mut trial = *params;
        for i in params.active() {
            trial.theta_mut()[i] += alpha * scaled[i] / norm / levers[i];
        }
        let v = f(&trial);
        if v > value && trial.is_finite() {
            return Step {
                params: trial,
                value: v,
                next_step: (2.0 * alpha).min(config.max_step_px),
                moved: true,
            };
        }
        alpha *= 0.5;
    }
    unchanged((alpha * 2.0).max(config.min_step_px))
}

/// Repeated ascent steps until `iters` steps fail in a row or the budget runs
/// out.
pub(crate) fn climb(
    params: &WarpParams,
    levers_of: &dyn Fn(&WarpParams) -> [f64; MAX_PARAMS],
    iters: usize,
    config: &SolverConfig,
    f: &(dyn Fn(&WarpParams) -> f64 + Sync),
) -> (WarpParams, f64) {
    let mut current = *params;
    let mut value = f(&current);
    let mut step = config.step_mu.max(config.min_step_px);
    let mut misses = 0;
    for _ in 0..iters {
        let s = ascend(&current, value, levers_of(&current), step, config, f);
        step = s.next_step;
        if s.moved {
            current = s.params;
            value = s.value;
            misses = 0;
        } else {
            misses += 1;
            if misses >= 2 {
                break;
            }
        }
    }
    (current, value)
}
