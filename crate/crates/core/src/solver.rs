//! Bellman and Poisson solvers by anchored backward span iteration.
//!
//! A single working vector is swept backward through the periodic slots
//! `q+p-1, ..., q, q+p-1, ...`, so the value recorded at slot `s` after `k`
//! applications is `T_s T_{s+1} ... T_{s+k-1} v0`. Each application is
//! anchored (`v(anchor) = 0`). Iteration stops once every periodic snapshot
//! moves by less than `tol` in span over one sweep; the prefix is then
//! filled in by `q` further backward applications and the gains are read
//! off as `lambda_n = (T_n w_{n+1})(anchor)`.

use std::ops::Deref;

use serde::Serialize;

use crate::coefficients::{
    contraction_window, coupling_bound, dobrushin_delta, policy_delta, policy_tilted_delta, ratio_bound,
    remainder_series, reward_span, tilted_delta, TAIL_TOL,
};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::operators::{
    anchor_in_place, apply_t, apply_t_policy, apply_t_risk, apply_t_risk_policy, greedy_selector, span,
    span_diff, PolicySchedule, SpanVector,
};

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Stop when all periodic snapshots move by less than this in span.
    pub tol: f64,
    /// Budget of stage applications.
    pub kmax: usize,
    /// Starting vector; zero when absent.
    pub initial: Option<Vec<f64>>,
    /// Keep every anchored snapshot of the periodic sweep.
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, kmax: 1_000_000, initial: None, record_trace: false }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Anchored snapshot of slot `slot` after `k` stage applications.
#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub slot: usize,
    pub k: usize,
    pub snapshot: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Anchored bias function per slot.
    pub w: Vec<SpanVector>,
    /// Gain per slot.
    pub lambda: Vec<f64>,
    /// Greedy policy for optimal solves, the input policy for Poisson solves.
    pub policy: PolicySchedule,
    /// Mean of the periodic gains.
    pub long_run_gain: f64,
    pub iterations_used: usize,
    /// Largest a priori span error of the final periodic snapshots.
    pub apriori_bound: f64,
    /// `max_x |w_n(x) + lambda_n - T_n w_{n+1}(x)|` per slot.
    pub residuals: Vec<f64>,
    pub final_increment: f64,
    pub trace: Vec<TraceEntry>,
}

impl Solution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_span(&self) -> f64 {
        self.w.iter().map(SpanVector::span).fold(0.0, f64::max)
    }

    /// `(1/N) sum_{i<N} lambda_i` over absolute stages.
    pub fn cesaro_gain(&self, model: &Model, horizon: usize) -> f64 {
        (0..horizon).map(|i| self.lambda[model.slot(i)]).sum::<f64>() / horizon as f64
    }
}

#[derive(Clone, Debug)]
pub struct RiskSolution {
    pub gamma: f64,
    pub solution: Solution,
}

impl Deref for RiskSolution {
    type Target = Solution;
    fn deref(&self) -> &Solution {
        &self.solution
    }
}

#[derive(Clone, Copy)]
enum Kind<'a> {
    Optimal,
    Fixed(&'a PolicySchedule),
}

struct Engine<'a> {
    model: &'a Model,
    kind: Kind<'a>,
    gamma: Option<f64>,
}

impl Engine<'_> {
    fn apply(&self, slot: usize, v: &[f64]) -> Result<Vec<f64>> {
        let m = self.model;
        Ok(match (self.kind, self.gamma) {
            (Kind::Optimal, None) => apply_t(m, slot, v),
            (Kind::Optimal, Some(g)) => apply_t_risk(m, slot, v, g),
            (Kind::Fixed(p), None) => apply_t_policy(m, slot, p.slot(slot), v)?,
            (Kind::Fixed(p), Some(g)) => apply_t_risk_policy(m, slot, p.slot(slot), v, g)?,
        })
    }

    fn delta(&self, slot: usize) -> f64 {
        match self.kind {
            Kind::Optimal => dobrushin_delta(self.model, slot),
            Kind::Fixed(p) => policy_delta(self.model, slot, p.slot(slot)),
        }
    }

    fn tilted(&self, slot: usize, g: &[f64]) -> f64 {
        match self.kind {
            Kind::Optimal => tilted_delta(self.model, slot, g),
            Kind::Fixed(p) => policy_tilted_delta(self.model, slot, p.slot(slot), g),
        }
    }

    /// Per-slot contraction factors used for the a priori bound.
    fn factors(&self) -> Result<Vec<f64>> {
        let m = self.model;
        (0..m.num_slots())
            .map(|s| {
                let d = self.delta(s);
                match self.gamma {
                    None => Ok(d),
                    Some(g) => {
                        let k = ratio_bound(m, s);
                        if !k.is_finite() {
                            return Err(Error::InfiniteRatio { stage: s });
                        }
                        Ok(coupling_bound(d, g.abs() * reward_span(m, s) + k.ln()))
                    }
                }
            })
            .collect()
    }

    fn run(&self, opts: &SolveOptions) -> Result<Solution> {
        let m = self.model;
        if let Kind::Fixed(p) = self.kind {
            p.check(m)?;
        }
        if let Some(g) = self.gamma {
            if g == 0.0 || !g.is_finite() {
                return Err(Error::InvalidArgument(format!("risk factor must be finite and non-zero, got {g}")));
            }
        }
        if opts.tol.is_nan() || opts.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
        }
        let (q, p, s_count) = (m.prefix_len(), m.period_len(), m.num_states());
        let anchor = m.anchor_index();

        let factors = self.factors()?;
        let window = contraction_window(m, &factors);
        let mut needs_measure = false;
        if window.is_none() {
            match self.gamma {
                None => return Err(Error::NoContraction { window: 4 * p }),
                Some(_) => {
                    // The coupling bound can be vacuous only where delta_n = 1
                    // in exact arithmetic, or where e^{-s} underflows.
                    let plain: Vec<f64> = (0..m.num_slots()).map(|s| self.delta(s)).collect();
                    if contraction_window(m, &plain).is_none() {
                        return Err(Error::NoRiskContraction { gamma: self.gamma.unwrap() });
                    }
                    needs_measure = true;
                }
            }
        }
        let spans: Vec<f64> = (0..m.num_slots()).map(|s| reward_span(m, s)).collect();
        let sup_r = if window.is_some() {
            (0..m.num_slots())
                .map(|s| remainder_series(m, &factors, &spans, s, TAIL_TOL))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };

        let mut v = match &opts.initial {
            Some(init) if init.len() != s_count => {
                return Err(Error::InvalidArgument(format!(
                    "initial iterate has length {}, model has {s_count} states",
                    init.len()
                )))
            }
            Some(init) => init.clone(),
            None => vec![0.0; s_count],
        };
        let mut snaps: Vec<Option<Vec<f64>>> = vec![None; p];
        let mut last_k = vec![0usize; p];
        let mut trace = Vec::new();
        let mut count = 0usize;
        let mut increment = f64::INFINITY;
        loop {
            let mut sweep_inc = 0.0f64;
            for slot in (q..q + p).rev() {
                if count >= opts.kmax {
                    return Err(Error::KmaxExceeded { kmax: opts.kmax, achieved: increment });
                }
                let mut out = self.apply(slot, &v)?;
                count += 1;
                anchor_in_place(&mut out, anchor);
                let d = snaps[slot - q].as_ref().map_or(f64::INFINITY, |old| span_diff(&out, old));
                sweep_inc = sweep_inc.max(d);
                if opts.record_trace {
                    trace.push(TraceEntry { slot, k: count, snapshot: out.clone() });
                }
                last_k[slot - q] = count;
                snaps[slot - q] = Some(out.clone());
                v = out;
            }
            increment = sweep_inc;
            if needs_measure {
                let g = self.gamma.unwrap();
                let measured: Vec<f64> = (0..m.num_slots())
                    .map(|s| {
                        if s < q {
                            1.0
                        } else {
                            let next = snaps[m.next_slot(s) - q].as_ref().expect("full sweep done");
                            let tilt: Vec<f64> = next.iter().map(|x| g * x).collect();
                            self.tilted(s, &tilt)
                        }
                    })
                    .collect();
                if contraction_window(m, &measured).is_none() {
                    return Err(Error::NoRiskContraction { gamma: g });
                }
                needs_measure = false;
            }
            if increment < opts.tol {
                break;
            }
        }

        let mut w: Vec<Vec<f64>> = vec![Vec::new(); m.num_slots()];
        for (i, snap) in snaps.into_iter().enumerate() {
            w[q + i] = snap.expect("every periodic slot visited");
        }
        for slot in (0..q).rev() {
            let mut out = self.apply(slot, &w[slot + 1])?;
            anchor_in_place(&mut out, anchor);
            w[slot] = out;
        }

        let mut lambda = Vec::with_capacity(m.num_slots());
        let mut residuals = Vec::with_capacity(m.num_slots());
        for slot in 0..m.num_slots() {
            let t = self.apply(slot, &w[m.next_slot(slot)])?;
            let lam = t[anchor];
            let res = w[slot].iter().zip(&t).map(|(wx, tx)| (wx + lam - tx).abs()).fold(0.0, f64::max);
            lambda.push(lam);
            residuals.push(res);
        }

        let policy = match self.kind {
            Kind::Optimal => PolicySchedule::from_slots(
                m,
                (0..m.num_slots()).map(|s| greedy_selector(m, s, &w[m.next_slot(s)], self.gamma)).collect(),
            ),
            Kind::Fixed(p) => p.clone(),
        };

        let apriori_bound = (0..p)
            .map(|i| product_bound(m, &factors, sup_r, q + i, last_k[i]))
            .fold(0.0, f64::max);

        Ok(Solution {
            long_run_gain: long_run_gain(&lambda, q, p),
            w: w.into_iter().map(|x| SpanVector::anchored(x, anchor)).collect(),
            lambda,
            policy,
            iterations_used: count,
            apriori_bound,
            residuals,
            final_increment: increment,
            trace,
        })
    }
}

fn product_bound(model: &Model, factors: &[f64], sup_r: f64, n: usize, k: usize) -> f64 {
    let mut prod = 1.0;
    for i in 0..k {
        prod *= factors[model.slot(n + i)];
        if prod == 0.0 {
            return 0.0;
        }
    }
    prod * sup_r
}

/// Average-reward Bellman equation.
pub fn solve_average(model: &Model, opts: &SolveOptions) -> Result<Solution> {
    Engine { model, kind: Kind::Optimal, gamma: None }.run(opts)
}

/// Risk-sensitive Bellman equation at risk factor `gamma != 0`.
pub fn solve_risk(model: &Model, gamma: f64, opts: &SolveOptions) -> Result<RiskSolution> {
    let solution = Engine { model, kind: Kind::Optimal, gamma: Some(gamma) }.run(opts)?;
    Ok(RiskSolution { gamma, solution })
}

/// Additive Poisson equation of a fixed Markov policy.
pub fn solve_policy_average(model: &Model, policy: &PolicySchedule, opts: &SolveOptions) -> Result<Solution> {
    Engine { model, kind: Kind::Fixed(policy), gamma: None }.run(opts)
}

/// Multiplicative Poisson equation of a fixed Markov policy.
pub fn solve_policy_risk(
    model: &Model,
    policy: &PolicySchedule,
    gamma: f64,
    opts: &SolveOptions,
) -> Result<RiskSolution> {
    let solution = Engine { model, kind: Kind::Fixed(policy), gamma: Some(gamma) }.run(opts)?;
    Ok(RiskSolution { gamma, solution })
}

/// Contraction factors and `sup_n R_n` behind the a priori error bound.
#[derive(Clone, Debug)]
pub struct AprioriBound {
    pub factors: Vec<f64>,
    pub sup_r: f64,
}

impl AprioriBound {
    /// Uses the ergodicity coefficients, or the risk coupling bounds when
    /// `gamma` is given.
    pub fn new(model: &Model, gamma: Option<f64>) -> Result<Self> {
        let engine = Engine { model, kind: Kind::Optimal, gamma };
        let factors = engine.factors()?;
        let spans: Vec<f64> = (0..model.num_slots()).map(|s| reward_span(model, s)).collect();
        let mut sup_r = 0.0f64;
        for s in 0..model.num_slots() {
            sup_r = sup_r.max(remainder_series(model, &factors, &spans, s, TAIL_TOL)?);
        }
        Ok(Self { factors, sup_r })
    }

    /// Bound on the span error of `T_n ... T_{n+k-1} 0`.
    pub fn at(&self, model: &Model, n: usize, k: usize) -> f64 {
        product_bound(model, &self.factors, self.sup_r, n, k)
    }
}

/// `Delta_n ... Delta_{n+k-1} * sup_i R_i`, with the risk contraction
/// constants when `gamma` is given.
pub fn apriori_error(model: &Model, n: usize, k: usize, gamma: Option<f64>) -> Result<f64> {
    Ok(AprioriBound::new(model, gamma)?.at(model, n, k))
}

/// Cesaro limit of a prefix+periodic gain sequence: the mean of the `p`
/// periodic gains.
pub fn long_run_gain(lambda: &[f64], q: usize, p: usize) -> f64 {
    lambda[q..q + p].iter().sum::<f64>() / p as f64
}

/// Largest span over a set of bias functions.
pub fn max_span_of(w: &[SpanVector]) -> f64 {
    w.iter().map(|v| span(v.values())).fold(0.0, f64::max)
}
