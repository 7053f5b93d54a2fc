//! One-stage Bellman operators and greedy selection.
//!
//! For a stage `n` and continuation `v`:
//!
//! * `T_n v(x)      = max_a [ c_n(x,a) + sum_y P_n^a(x,y) v(y) ]`
//! * `T~_n v(x)     = max_a [ c_n(x,a) + (1/g) ln sum_y P_n^a(x,y) e^{g v(y)} ]`
//! * `T_n^u`, `T~_n^u`: the same with the max replaced by the control `u(x)`.
//!
//! All operators act on raw vectors; anchoring is the solver's business.
//! Stage arguments are absolute stage indices (slots are valid stage
//! indices too, since `slot(n) == n` for `n < q + p`).

mod policy;
mod span;

pub use policy::{PolicySchedule, Selector};
pub use span::{anchor_in_place, span, span_diff, sup_diff, SpanVector};

use crate::error::{Error, Result};
use crate::model::{Control, Model};

/// Values within this distance of the maximum count as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Golden-section iterations used to refine the interval-flavor maximizer.
pub const REFINE_ITERS: usize = 20;

/// `(1/gamma) ln sum_y row[y] e^{gamma v[y]}`, shifted by the largest
/// exponent over the support of `row`.
pub fn log_mean_exp(row: &[f64], v: &[f64], gamma: f64) -> f64 {
    // Shift by the value whose exponent is largest, so that point masses
    // return that value exactly.
    let top = row
        .iter()
        .zip(v)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, x)| *x)
        .fold(None, |acc: Option<f64>, x| match acc {
            Some(t) if gamma * t >= gamma * x => Some(t),
            _ => Some(x),
        })
        .unwrap_or(f64::NEG_INFINITY);
    let s: f64 = row
        .iter()
        .zip(v)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, x)| p * (gamma * (x - top)).exp())
        .sum();
    top + s.ln() / gamma
}

pub(crate) fn dot(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(p, x)| p * x).sum()
}

/// Expected (or certainty-equivalent, when `gamma` is given) continuation.
pub(crate) fn continuation(row: &[f64], v: &[f64], gamma: Option<f64>) -> f64 {
    match gamma {
        None => dot(row, v),
        Some(g) => log_mean_exp(row, v, g),
    }
}

/// One-stage value of control `c` in state `x`.
pub fn control_value(model: &Model, n: usize, x: usize, c: Control, v: &[f64], gamma: Option<f64>) -> f64 {
    let slot = model.slot(n);
    model.reward(slot, x, c) + continuation(&model.row(slot, x, c), v, gamma)
}

/// Maximizing control and its value in state `x`.
fn best_control(model: &Model, n: usize, x: usize, v: &[f64], gamma: Option<f64>) -> (Control, f64) {
    let slot = model.slot(n);
    let stage = model.stage(slot);
    let values: Vec<f64> = (0..stage.num_actions())
        .map(|a| stage.reward(a, x) + continuation(stage.row(a, x), v, gamma))
        .collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pick = values.iter().position(|&q| q >= best - TIE_TOL).unwrap_or(0);
    if !model.is_interval() {
        return (Control::Action(pick), best);
    }

    // Interval flavor: refine inside the bracket around the best grid point.
    let g = stage.num_actions();
    let lo = model.grid_param(pick.saturating_sub(1));
    let hi = model.grid_param((pick + 1).min(g - 1));
    let f = |a: f64| control_value(model, slot, x, Control::Param(a), v, gamma);
    let a_ref = golden_section_max(f, lo, hi, REFINE_ITERS);
    let f_ref = f(a_ref);
    if f_ref > best + TIE_TOL {
        (Control::Param(a_ref), f_ref)
    } else {
        (Control::Param(model.grid_param(pick)), best)
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

fn apply_best(model: &Model, n: usize, v: &[f64], gamma: Option<f64>) -> Vec<f64> {
    (0..model.num_states()).map(|x| best_control(model, n, x, v, gamma).1).collect()
}

/// `T_n v`.
pub fn apply_t(model: &Model, n: usize, v: &[f64]) -> Vec<f64> {
    apply_best(model, n, v, None)
}

/// `T~_n v` at risk factor `gamma != 0`.
pub fn apply_t_risk(model: &Model, n: usize, v: &[f64], gamma: f64) -> Vec<f64> {
    apply_best(model, n, v, Some(gamma))
}

fn apply_fixed(model: &Model, n: usize, u: &[Control], v: &[f64], gamma: Option<f64>) -> Result<Vec<f64>> {
    if u.len() != model.num_states() {
        return Err(Error::Policy(format!(
            "selector covers {} states, model has {}",
            u.len(),
            model.num_states()
        )));
    }
    u.iter()
        .enumerate()
        .map(|(x, &c)| {
            if model.is_legal(c) {
                Ok(control_value(model, n, x, c, v, gamma))
            } else {
                Err(Error::Policy(format!("unknown action {c:?} in state '{}'", model.states()[x])))
            }
        })
        .collect()
}

/// `T_n^u v`.
pub fn apply_t_policy(model: &Model, n: usize, u: &[Control], v: &[f64]) -> Result<Vec<f64>> {
    apply_fixed(model, n, u, v, None)
}

/// `T~_n^u v`.
pub fn apply_t_risk_policy(model: &Model, n: usize, u: &[Control], v: &[f64], gamma: f64) -> Result<Vec<f64>> {
    apply_fixed(model, n, u, v, Some(gamma))
}

/// Per-state maximizer of the plain (`gamma = None`) or risk one-stage
/// value. Ties within [`TIE_TOL`] go to the lowest action index.
pub fn greedy_selector(model: &Model, n: usize, v: &[f64], gamma: Option<f64>) -> Selector {
    (0..model.num_states()).map(|x| best_control(model, n, x, v, gamma).0).collect()
}
