//! Per-stage contraction coefficients.
//!
//! * `delta[n]`: Dobrushin coefficient of all kernel rows of stage `n`, taken
//!   over every pair of (state, action) rows;
//! * `ratio_k[n]`: largest likelihood ratio `P(x,B) / P(x',B)` under a common
//!   action, infinite when supports differ;
//! * `reward_span[n]`: `max c_n - min c_n` over all states and actions;
//! * `remainder_r[n]`: `||c_n|| + sum_i delta_n...delta_{n+i} ||c_{n+i+1}||`,
//!   which bounds the span of the bias function at stage `n`;
//! * `risk_delta[n]`: `1 - e^{-s}(1 - delta_n)` with
//!   `s = |gamma| ||c_n|| + ln K_n`, a contraction constant for the
//!   risk-sensitive operator.
//!
//! Every vector is indexed by schedule slot.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Control, Model};
use crate::operators::Selector;

/// Default truncation tolerance for [`remainder_r`].
pub const TAIL_TOL: f64 = 1e-12;

/// Maximum number of series terms summed before falling back to the tail
/// bound.
const MAX_TERMS: usize = 10_000_000;

/// `max over ordered pairs (r, r')` of `sum_y (r[y] - r'[y])^+`.
pub fn dobrushin_of_rows(rows: &[&[f64]]) -> f64 {
    let mut best = 0.0f64;
    for r in rows {
        for r2 in rows {
            let d: f64 = r.iter().zip(r2.iter()).map(|(p, q)| (p - q).max(0.0)).sum();
            best = best.max(d);
        }
    }
    best.min(1.0)
}

/// Dobrushin coefficient of stage `n` over all states and actions.
pub fn dobrushin_delta(model: &Model, n: usize) -> f64 {
    let stage = model.stage_at(n);
    let rows: Vec<&[f64]> = stage.rows().map(|(_, _, r)| r).collect();
    dobrushin_of_rows(&rows)
}

/// Dobrushin coefficient of the rows a fixed selector uses at stage `n`.
pub fn policy_delta(model: &Model, n: usize, u: &Selector) -> f64 {
    let slot = model.slot(n);
    let rows: Vec<Vec<f64>> = u.iter().enumerate().map(|(x, &c)| model.row(slot, x, c).into_owned()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    dobrushin_of_rows(&refs)
}

/// Kernel ratio bound `K_n`. The supremum over sets is attained on
/// singletons (mediant inequality), so only entries are compared.
pub fn ratio_bound(model: &Model, n: usize) -> f64 {
    let stage = model.stage_at(n);
    let s = model.num_states();
    let mut best = 1.0f64;
    for a in 0..stage.num_actions() {
        for x in 0..s {
            for x2 in 0..s {
                let (r, r2) = (stage.row(a, x), stage.row(a, x2));
                for (p, q) in r.iter().zip(r2) {
                    if *q > 0.0 {
                        best = best.max(p / q);
                    } else if *p > 0.0 {
                        return f64::INFINITY;
                    }
                }
            }
        }
    }
    best
}

/// `||c_n||_sp` over all states and actions.
pub fn reward_span(model: &Model, n: usize) -> f64 {
    let stage = model.stage_at(n);
    let (lo, hi) = stage
        .actions()
        .iter()
        .flat_map(|d| d.reward.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    hi - lo
}

/// Shortest window `L <= 4p` of consecutive periodic stages whose worst
/// factor product is below one, with that product.
pub fn contraction_window(model: &Model, factors: &[f64]) -> Option<(usize, f64)> {
    let (q, p) = (model.prefix_len(), model.period_len());
    (1..=4 * p).find_map(|len| {
        let worst = (0..p)
            .map(|s| (0..len).map(|j| factors[q + (s + j) % p]).product::<f64>())
            .fold(0.0f64, f64::max);
        (worst < 1.0).then_some((len, worst))
    })
}

/// `R_n` for arbitrary per-slot contraction factors and reward spans.
///
/// Sums the series until the geometric tail bound drops below `tail_tol` and
/// returns the partial sum plus that bound. When every slot carries the same
/// factor and span the closed form `c / (1 - delta)` is returned.
pub fn remainder_series(model: &Model, factors: &[f64], spans: &[f64], n: usize, tail_tol: f64) -> Result<f64> {
    let constant = factors.iter().all(|&d| d == factors[0]) && spans.iter().all(|&c| c == spans[0]);
    if constant {
        let (d, c) = (factors[0], spans[0]);
        if c == 0.0 {
            return Ok(0.0);
        }
        if d < 1.0 {
            return Ok(c / (1.0 - d));
        }
    }
    let (len, rho) =
        contraction_window(model, factors).ok_or(Error::NoContraction { window: 4 * model.period_len() })?;
    let cmax = spans.iter().copied().fold(0.0, f64::max);
    let tail_factor = cmax * len as f64 / (1.0 - rho);
    let q = model.prefix_len();
    let mut total = spans[model.slot(n)];
    let mut prod = 1.0;
    for i in 0..MAX_TERMS {
        prod *= factors[model.slot(n + i)];
        total += prod * spans[model.slot(n + i + 1)];
        if n + i + 1 >= q {
            let tail = prod * tail_factor;
            if tail < tail_tol {
                return Ok(total + tail);
            }
            if i + 1 == MAX_TERMS {
                return Ok(total + tail);
            }
        }
    }
    unreachable!("prefix is shorter than the term budget")
}

/// `R_n` for the average-reward operator.
pub fn remainder_r(model: &Model, n: usize, tail_tol: f64) -> Result<f64> {
    let slots = model.num_slots();
    let factors: Vec<f64> = (0..slots).map(|s| dobrushin_delta(model, s)).collect();
    let spans: Vec<f64> = (0..slots).map(|s| reward_span(model, s)).collect();
    remainder_series(model, &factors, &spans, n, tail_tol)
}

/// Row of stage `n` reweighted by `e^{g}` and renormalized.
pub fn tilted_kernel(model: &Model, n: usize, x: usize, c: Control, g: &[f64]) -> Vec<f64> {
    tilt(&model.row(model.slot(n), x, c), g)
}

fn tilt(row: &[f64], g: &[f64]) -> Vec<f64> {
    let m = row
        .iter()
        .zip(g)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, gy)| *gy)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = row.iter().zip(g).map(|(p, gy)| if *p > 0.0 { p * (gy - m).exp() } else { 0.0 }).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Dobrushin coefficient of all rows of stage `n` after tilting by `g`.
pub fn tilted_delta(model: &Model, n: usize, g: &[f64]) -> f64 {
    let stage = model.stage_at(n);
    let rows: Vec<Vec<f64>> = stage.rows().map(|(_, _, r)| tilt(r, g)).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    dobrushin_of_rows(&refs)
}

/// Tilted Dobrushin coefficient restricted to the rows of selector `u`.
pub fn policy_tilted_delta(model: &Model, n: usize, u: &Selector, g: &[f64]) -> f64 {
    let slot = model.slot(n);
    let rows: Vec<Vec<f64>> = u.iter().enumerate().map(|(x, &c)| tilt(&model.row(slot, x, c), g)).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    dobrushin_of_rows(&refs)
}

/// Coupling bound on the risk-sensitive contraction constant:
/// `1 - e^{-s}(1 - delta_n)` with `s = |gamma| ||c_n|| + ln K_n`.
pub fn risk_contraction_bound(model: &Model, n: usize, gamma: f64) -> Result<f64> {
    let k = ratio_bound(model, n);
    if !k.is_finite() {
        return Err(Error::InfiniteRatio { stage: model.slot(n) });
    }
    Ok(coupling_bound(dobrushin_delta(model, n), gamma.abs() * reward_span(model, n) + k.ln()))
}

pub(crate) fn coupling_bound(delta: f64, s: f64) -> f64 {
    (1.0 - (-s).exp() * (1.0 - delta)).clamp(0.0, 1.0)
}

/// Coefficient table over all schedule slots.
#[derive(Clone, Debug, Serialize)]
pub struct Coefficients {
    pub delta: Vec<f64>,
    pub ratio_k: Vec<f64>,
    pub reward_span: Vec<f64>,
    /// `None` when the series diverges.
    pub remainder_r: Vec<Option<f64>>,
    pub gamma: Option<f64>,
    /// Present when `gamma` is given; `None` entries mark `K_n = inf`.
    pub risk_delta: Option<Vec<Option<f64>>>,
}

impl Coefficients {
    pub fn compute(model: &Model, gamma: Option<f64>, tail_tol: f64) -> Self {
        let slots = 0..model.num_slots();
        let delta: Vec<f64> = slots.clone().map(|s| dobrushin_delta(model, s)).collect();
        let ratio_k = slots.clone().map(|s| ratio_bound(model, s)).collect();
        let reward_span: Vec<f64> = slots.clone().map(|s| reward_span(model, s)).collect();
        let remainder_r = slots
            .clone()
            .map(|s| remainder_series(model, &delta, &reward_span, s, tail_tol).ok())
            .collect();
        let risk_delta = gamma.map(|g| slots.map(|s| risk_contraction_bound(model, s, g).ok()).collect());
        Self { delta, ratio_k, reward_span, remainder_r, gamma, risk_delta }
    }

    /// `sup_n R_n`, infinite when any remainder diverges.
    pub fn sup_remainder(&self) -> f64 {
        self.remainder_r.iter().map(|r| r.unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,delta,ratio_k,reward_span,remainder_r");
        if self.risk_delta.is_some() {
            out.push_str(",risk_delta");
        }
        out.push('\n');
        for s in 0..self.delta.len() {
            let _ = write!(
                out,
                "{s},{},{},{},{}",
                fmt_num(self.delta[s]),
                fmt_num(self.ratio_k[s]),
                fmt_num(self.reward_span[s]),
                fmt_num(self.remainder_r[s].unwrap_or(f64::INFINITY))
            );
            if let Some(rd) = &self.risk_delta {
                let _ = write!(out, ",{}", rd[s].map_or("NA".to_string(), fmt_num));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{ActionData, Stage};

    fn one_action(rows: Vec<Vec<f64>>, reward: Vec<f64>) -> Model {
        let s = rows.len();
        Model::finite(
            (0..s).map(|i| format!("x{i}")).collect(),
            vec!["a".into()],
            "x0",
            vec![],
            vec![Stage::new(vec![ActionData::new(rows, reward)])],
        )
        .unwrap()
    }

    #[test]
    fn delta_examples() {
        assert_eq!(dobrushin_delta(&fixtures::iid2(), 0), 0.0);
        assert_eq!(dobrushin_delta(&fixtures::two_by_two(), 0), 1.0);
        let m = one_action(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0.0, 0.0]);
        assert!((dobrushin_delta(&m, 0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_bound(&fixtures::iid2(), 0), 1.0);
        let m = one_action(vec![vec![0.5, 0.5], vec![0.25, 0.75]], vec![0.0, 0.0]);
        assert_eq!(ratio_bound(&m, 0), 2.0);
        let m = one_action(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        assert_eq!(ratio_bound(&m, 0), f64::INFINITY);
    }

    fn periodic_deltas(deltas: &[f64]) -> Model {
        // Two states with reward (0, 1) so every ||c_n|| = 1; rows
        // [1, 0] and [1 - d, d] give Dobrushin coefficient d.
        let period = deltas
            .iter()
            .map(|&d| Stage::new(vec![ActionData::new(vec![vec![1.0, 0.0], vec![1.0 - d, d]], vec![0.0, 1.0])]))
            .collect();
        Model::finite(vec!["x0".into(), "x1".into()], vec!["a".into()], "x0", vec![], period).unwrap()
    }

    #[test]
    fn remainder_closed_form() {
        let m = periodic_deltas(&[0.5]);
        assert_eq!(dobrushin_delta(&m, 0), 0.5);
        assert!((remainder_r(&m, 0, TAIL_TOL).unwrap() - 2.0).abs() < 1e-10);
        let m = periodic_deltas(&[0.0, 0.0]);
        assert_eq!(remainder_r(&m, 1, TAIL_TOL).unwrap(), 1.0);
    }

    #[test]
    fn remainder_alternating_factors() {
        let m = periodic_deltas(&[0.5, 1.0]);
        let partial = |n: usize| {
            let mut total = 1.0;
            let mut prod = 1.0;
            for i in 0..500 {
                prod *= [0.5, 1.0][(n + i) % 2];
                total += prod;
            }
            total
        };
        for (n, exact) in [(0usize, 3.0), (1, 4.0)] {
            let r = remainder_r(&m, n, 1e-13).unwrap();
            assert!((r - partial(n)).abs() < 1e-12, "{r}");
            assert!((r - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn remainder_diverges_without_contraction() {
        let m = periodic_deltas(&[1.0, 1.0]);
        assert!(matches!(remainder_r(&m, 0, TAIL_TOL), Err(Error::NoContraction { window: 8 })));
    }

    #[test]
    fn tilted_examples() {
        let m = fixtures::iid2();
        let a = Control::Action(0);
        assert_eq!(tilted_kernel(&m, 0, 0, a, &[0.0, 0.0]), vec![0.5, 0.5]);
        let t = tilted_kernel(&m, 0, 0, a, &[0.0, 3f64.ln()]);
        assert!((t[0] - 0.25).abs() < 1e-15 && (t[1] - 0.75).abs() < 1e-15);
        let d = fixtures::disjoint();
        assert_eq!(tilted_kernel(&d, 0, 1, a, &[500.0, -500.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn tilted_delta_examples() {
        let m = one_action(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0.0, 0.0]);
        assert_eq!(tilted_delta(&m, 0, &[2.5, 2.5]), dobrushin_delta(&m, 0));
        // Tilted rows: [0.9, 0.1e]/(0.9+0.1e) and [0.2, 0.8e]/(0.2+0.8e).
        let e = 1f64.exp();
        let r0 = 0.9 / (0.9 + 0.1 * e);
        let r1 = 0.2 / (0.2 + 0.8 * e);
        assert!((tilted_delta(&m, 0, &[0.0, 1.0]) - (r0 - r1)).abs() < 1e-15);
        let single = one_action(vec![vec![1.0]], vec![0.0]);
        assert_eq!(tilted_delta(&single, 0, &[4.0]), 0.0);
    }

    #[test]
    fn risk_bound_examples() {
        let m = fixtures::tied_actions();
        assert_eq!(risk_contraction_bound(&m, 0, 3.0).unwrap(), 0.0);
        let m = one_action(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0.0, 1.0]);
        // K_n = inf here (entry 0 vs 0.5).
        assert!(matches!(risk_contraction_bound(&m, 0, 1.0), Err(Error::InfiniteRatio { stage: 0 })));
        assert!((coupling_bound(0.5, 1.0) - (1.0 - 0.5 / 1f64.exp())).abs() < 1e-15);
        assert!((coupling_bound(0.5, 1.0) - 0.8161).abs() < 1e-4);
        assert!((coupling_bound(0.3, 1e-14) - 0.3).abs() < 1e-13);
    }

    #[test]
    fn csv_marks_infinities() {
        let c = Coefficients::compute(&fixtures::disjoint(), Some(1.0), TAIL_TOL);
        let csv = c.to_csv();
        assert!(csv.starts_with("stage,delta,ratio_k,reward_span,remainder_r,risk_delta\n"));
        assert!(csv.contains(",inf,"));
        assert!(csv.trim_end().ends_with(",NA"));
    }
}
