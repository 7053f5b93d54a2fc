//! Exact finite-horizon functionals of a Markov policy.
//!
//! Both recursions are deterministic: the expected reward sum is computed by
//! backward induction on expectations, the exponential moment by a forward
//! recursion on the (unnormalized) law of the state weighted by the running
//! exponential reward. Neither touches the contraction machinery, so they
//! serve as independent checks on the solver.

use serde::Serialize;

use crate::coefficients::reward_span;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::operators::{dot, PolicySchedule};

fn check_args(model: &Model, policy: &PolicySchedule, horizon: usize, x: usize) -> Result<()> {
    policy.check(model)?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if x >= model.num_states() {
        return Err(Error::InvalidArgument(format!("start state {x} out of range")));
    }
    Ok(())
}

/// `E[sum_{i=start}^{start+len-1} c_i]` from every state at stage `start`.
pub fn expected_window(model: &Model, policy: &PolicySchedule, start: usize, len: usize) -> Vec<f64> {
    let s = model.num_states();
    let mut value = vec![0.0; s];
    for n in (start..start + len).rev() {
        let slot = model.slot(n);
        let u = policy.selector_at(n);
        value = (0..s)
            .map(|x| model.reward(slot, x, u[x]) + dot(&model.row(slot, x, u[x]), &value))
            .collect();
    }
    value
}

/// `ln E[exp(gamma * sum_{i=start}^{start+len-1} c_i)]` started from `x` at
/// stage `start`.
pub fn log_moment_window(model: &Model, policy: &PolicySchedule, start: usize, len: usize, x: usize, gamma: f64) -> f64 {
    let s = model.num_states();
    let mut law = vec![0.0; s];
    law[x] = 1.0;
    let mut log_scale = 0.0;
    for n in start..start + len {
        let slot = model.slot(n);
        let u = policy.selector_at(n);
        let shift = (0..s)
            .filter(|&y| law[y] > 0.0)
            .map(|y| gamma * model.reward(slot, y, u[y]))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut next = vec![0.0; s];
        for y in (0..s).filter(|&y| law[y] > 0.0) {
            let weight = law[y] * (gamma * model.reward(slot, y, u[y]) - shift).exp();
            for (z, p) in model.row(slot, y, u[y]).iter().enumerate() {
                next[z] += weight * p;
            }
        }
        let total: f64 = next.iter().sum();
        log_scale += shift + total.ln();
        law = next.into_iter().map(|w| w / total).collect();
    }
    log_scale
}

/// `(1/N) E_x[sum_{i<N} c_i]` under `policy`.
pub fn finite_horizon_average(model: &Model, policy: &PolicySchedule, horizon: usize, x: usize) -> Result<f64> {
    check_args(model, policy, horizon, x)?;
    Ok(expected_window(model, policy, 0, horizon)[x] / horizon as f64)
}

/// `(1/(N gamma)) ln E_x[exp(gamma sum_{i<N} c_i)]` under `policy`.
pub fn finite_horizon_risk(model: &Model, policy: &PolicySchedule, horizon: usize, x: usize, gamma: f64) -> Result<f64> {
    check_args(model, policy, horizon, x)?;
    if gamma == 0.0 {
        return Err(Error::InvalidArgument("risk factor must be non-zero".into()));
    }
    Ok(log_moment_window(model, policy, 0, horizon, x, gamma) / (horizon as f64 * gamma))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HoeffdingGap {
    /// `ln E[e^{gamma S}] - gamma E[S]` over the window.
    pub gap: f64,
    /// `(sum_i ||c_i||_sp)^2 gamma^2 / 8`.
    pub bound: f64,
}

impl HoeffdingGap {
    /// `0 <= gap <= bound` up to an absolute rounding slack.
    pub fn holds(&self, slack: f64) -> bool {
        self.gap >= -slack && self.gap <= self.bound + slack
    }
}

/// Hoeffding gap of the reward sum over stages `start..start+len`, with the
/// chain started from `x` at stage `start`.
pub fn hoeffding_gap(
    model: &Model,
    policy: &PolicySchedule,
    start: usize,
    len: usize,
    gamma: f64,
    x: usize,
) -> Result<HoeffdingGap> {
    check_args(model, policy, len, x)?;
    if gamma == 0.0 {
        return Err(Error::InvalidArgument("risk factor must be non-zero".into()));
    }
    let mean = expected_window(model, policy, start, len)[x];
    let log_moment = log_moment_window(model, policy, start, len, x, gamma);
    let spans: f64 = (start..start + len).map(|n| reward_span(model, n)).sum();
    Ok(HoeffdingGap { gap: log_moment - gamma * mean, bound: spans * spans * gamma * gamma / 8.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Control;

    fn only(model: &Model) -> PolicySchedule {
        PolicySchedule::stationary(model, vec![Control::Action(0); model.num_states()])
    }

    #[test]
    fn alternating_horizon_four() {
        let m = fixtures::alternating();
        assert_eq!(finite_horizon_average(&m, &only(&m), 4, 0).unwrap(), 2.0);
        assert_eq!(finite_horizon_average(&m, &only(&m), 1, 0).unwrap(), 1.0);
        assert!((finite_horizon_risk(&m, &only(&m), 4, 0, 0.7).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn iid_long_horizon() {
        let m = fixtures::iid2();
        let u = only(&m);
        let n = 10_000;
        // First stage pays c(x); later ones 0.5 on average.
        let from0 = finite_horizon_average(&m, &u, n, 0).unwrap();
        assert!((from0 - 0.5 * (n - 1) as f64 / n as f64).abs() < 1e-12);
        assert!((from0 - 0.5).abs() <= 1e-4);
        let risk = finite_horizon_risk(&m, &u, n, 0, 1.0).unwrap();
        let per_stage = ((1.0 + 1f64.exp()) / 2.0).ln();
        assert!((risk - per_stage * (n - 1) as f64 / n as f64).abs() < 1e-10);
        assert!((risk - per_stage).abs() <= 2e-4);
    }

    #[test]
    fn small_gamma_approaches_average() {
        let m = fixtures::prefix_periodic();
        let u = PolicySchedule::stationary(&m, vec![Control::Action(1), Control::Action(0)]);
        let n = 50;
        let g = 1e-6;
        let avg = finite_horizon_average(&m, &u, n, 1).unwrap();
        let risk = finite_horizon_risk(&m, &u, n, 1, g).unwrap();
        let c = (0..n).map(|i| reward_span(&m, i)).fold(0.0, f64::max);
        assert!((risk - avg).abs() <= g * (n as f64 * c).powi(2) / 8.0 + 1e-12);
    }

    #[test]
    fn hoeffding_degenerate_and_iid() {
        let m = fixtures::alternating();
        let h = hoeffding_gap(&m, &only(&m), 0, 5, 2.0, 0).unwrap();
        assert_eq!((h.gap, h.bound), (0.0, 0.0));
        let m = fixtures::iid2();
        let h = hoeffding_gap(&m, &only(&m), 0, 10, 0.5, 0).unwrap();
        assert!(h.gap > 0.0 && h.gap < h.bound, "{h:?}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = fixtures::iid2();
        assert!(finite_horizon_average(&m, &only(&m), 0, 0).is_err());
        assert!(finite_horizon_average(&m, &only(&m), 3, 5).is_err());
        assert!(finite_horizon_risk(&m, &only(&m), 3, 0, 0.0).is_err());
    }
}
