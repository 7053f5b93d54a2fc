//! Property battery run by `nhmdp check` and reused by the acceptance
//! tests. Every check reports the worst excess of a measured quantity over
//! its bound, so `worst_excess <= 0` means the property held everywhere.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::oracle::{finite_horizon_average, finite_horizon_risk, hoeffding_gap};
use crate::coefficients::{dobrushin_delta, ratio_bound, reward_span};
use crate::error::{Error, Result};
use crate::fixtures::{random_policy, random_vector};
use crate::model::Model;
use crate::operators::{apply_t, apply_t_risk, span, span_diff, sup_diff};
use crate::solver::{
    solve_average, solve_policy_average, solve_policy_risk, solve_risk, AprioriBound, SolveOptions, Solution,
};

pub const CONTRACTION_SLACK: f64 = 1e-10;
pub const RESIDUAL_LIMIT: f64 = 1e-9;
pub const UNIQUENESS_LIMIT: f64 = 1e-8;
pub const DOMINANCE_SLACK: f64 = 1e-8;
/// Tolerance of the reference solve the a priori check compares against.
pub const REFERENCE_TOL: f64 = 1e-13;
pub const APRIORI_SLACK: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub property: String,
    pub status: Status,
    /// Largest `measured - bound`; `NaN` for skipped checks.
    pub worst_excess: f64,
    pub detail: String,
}

impl CheckRow {
    fn from_excess(property: impl Into<String>, worst_excess: f64, detail: String) -> Self {
        let status = if worst_excess <= 0.0 { Status::Pass } else { Status::Fail };
        Self { property: property.into(), status, worst_excess, detail }
    }

    fn skip(property: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { property: property.into(), status: Status::Skip, worst_excess: f64::NAN, detail: detail.into() }
    }

    fn fail(property: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { property: property.into(), status: Status::Fail, worst_excess: f64::NAN, detail: detail.into() }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Solver errors caused by an unmet precondition skip a check; anything
/// else fails it.
fn unmet(property: String, e: Error) -> CheckRow {
    let inner = match &e {
        Error::AtGamma { source, .. } => source.as_ref(),
        other => other,
    };
    if matches!(inner, Error::InfiniteRatio { .. } | Error::NoContraction { .. } | Error::NoRiskContraction { .. }) {
        CheckRow::skip(property, e.to_string())
    } else {
        CheckRow::fail(property, e.to_string())
    }
}

fn label(base: &str, gamma: Option<f64>) -> String {
    match gamma {
        None => base.to_string(),
        Some(g) => format!("{base}[gamma={g}]"),
    }
}

fn solve(model: &Model, gamma: Option<f64>, opts: &SolveOptions) -> Result<Solution> {
    match gamma {
        None => solve_average(model, opts),
        Some(g) => solve_risk(model, g, opts).map(|r| r.solution),
    }
}

fn max_reward_span(model: &Model) -> f64 {
    (0..model.num_slots()).map(|s| reward_span(model, s)).fold(0.0, f64::max)
}

fn period_span_sum(model: &Model) -> f64 {
    (model.prefix_len()..model.num_slots()).map(|s| reward_span(model, s)).sum()
}

/// `span(T_n v1 - T_n v2) <= Delta_n span(v1 - v2)` on random pairs.
pub fn check_contraction(model: &Model, pairs: usize, rng: &mut impl Rng) -> CheckRow {
    let s = model.num_states();
    let mut worst = f64::NEG_INFINITY;
    for n in 0..model.num_slots() {
        let delta = dobrushin_delta(model, n);
        for _ in 0..pairs {
            let scale = 10f64.powf(rng.random_range(-1.0..2.0));
            let (v1, v2) = (random_vector(rng, s, scale), random_vector(rng, s, scale));
            let lhs = span_diff(&apply_t(model, n, &v1), &apply_t(model, n, &v2));
            worst = worst.max(lhs - delta * span_diff(&v1, &v2) - CONTRACTION_SLACK);
        }
    }
    CheckRow::from_excess("contraction", worst, format!("{pairs} pairs per stage"))
}

/// `span(T~_n v) <= ||c_n||_sp + ln(K_n)/|gamma|` on random vectors.
pub fn check_risk_span(model: &Model, gammas: &[f64], draws: usize, rng: &mut impl Rng) -> CheckRow {
    let s = model.num_states();
    let mut worst = f64::NEG_INFINITY;
    let mut tested = 0;
    for n in 0..model.num_slots() {
        let k = ratio_bound(model, n);
        if !k.is_finite() {
            continue;
        }
        for &g in gammas {
            for _ in 0..draws {
                let scale = 10f64.powf(rng.random_range(-1.0..1.5));
                let v = random_vector(rng, s, scale);
                let lhs = span(&apply_t_risk(model, n, &v, g));
                worst = worst.max(lhs - reward_span(model, n) - k.ln() / g.abs() - CONTRACTION_SLACK);
                tested += 1;
            }
        }
    }
    if tested == 0 {
        return CheckRow::skip("risk_span_bound", "K_n infinite at every stage");
    }
    CheckRow::from_excess("risk_span_bound", worst, format!("{tested} draws"))
}

/// Bellman residuals of the optimal solve and exact anchoring.
pub fn check_residuals(model: &Model, gamma: Option<f64>, opts: &SolveOptions) -> CheckRow {
    let name = label("bellman_residual", gamma);
    match solve(model, gamma, opts) {
        Err(e) => unmet(name, e),
        Ok(sol) => {
            let anchor = model.anchor_index();
            if let Some(slot) = sol.w.iter().position(|w| w[anchor] != 0.0) {
                return CheckRow::fail(name, format!("w unanchored at slot {slot}"));
            }
            let r = sol.max_residual();
            CheckRow::from_excess(name, r - RESIDUAL_LIMIT, format!("max residual {r:e}"))
        }
    }
}

/// Restarting from random iterates leaves `w` and `lambda` unchanged.
pub fn check_uniqueness(model: &Model, gamma: Option<f64>, restarts: usize, rng: &mut impl Rng) -> CheckRow {
    let name = label("uniqueness", gamma);
    let base = match solve(model, gamma, &SolveOptions::default()) {
        Ok(s) => s,
        Err(e) => return unmet(name, e),
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..restarts {
        let opts = SolveOptions { initial: Some(random_vector(rng, model.num_states(), 10.0)), ..Default::default() };
        let other = match solve(model, gamma, &opts) {
            Ok(s) => s,
            Err(e) => return unmet(name, e),
        };
        for (a, b) in base.w.iter().zip(&other.w) {
            worst = worst.max(sup_diff(a.values(), b.values()) - UNIQUENESS_LIMIT);
        }
        for (a, b) in base.lambda.iter().zip(&other.lambda) {
            worst = worst.max((a - b).abs() - UNIQUENESS_LIMIT);
        }
    }
    CheckRow::from_excess(name, worst, format!("{restarts} restarts"))
}

/// Measured oracle gaps at one horizon.
#[derive(Clone, Copy, Debug)]
pub struct OracleGap {
    /// `max_x |oracle(x) - (1/N) sum_{i<N} lambda_i|`.
    pub cesaro_gap: f64,
    /// `max_x |oracle(x) - long-run gain|`.
    pub gain_gap: f64,
    /// `(2 max_n span(w_n) + max_n ||c_n||_sp) / N`.
    pub bound: f64,
}

/// Exact finite-horizon value of the greedy policy against the solved gains.
pub fn oracle_gap(model: &Model, gamma: Option<f64>, horizon: usize, opts: &SolveOptions) -> Result<OracleGap> {
    let sol = solve(model, gamma, opts)?;
    let cesaro = sol.cesaro_gain(model, horizon);
    let bound = (2.0 * sol.max_span() + max_reward_span(model)) / horizon as f64;
    let (mut cesaro_gap, mut gain_gap) = (0.0f64, 0.0f64);
    for x in 0..model.num_states() {
        let value = match gamma {
            None => finite_horizon_average(model, &sol.policy, horizon, x)?,
            Some(g) => finite_horizon_risk(model, &sol.policy, horizon, x, g)?,
        };
        cesaro_gap = cesaro_gap.max((value - cesaro).abs());
        gain_gap = gain_gap.max((value - sol.long_run_gain).abs());
    }
    Ok(OracleGap { cesaro_gap, gain_gap, bound })
}

pub fn check_oracle(model: &Model, gamma: Option<f64>, horizon: usize, opts: &SolveOptions) -> CheckRow {
    let name = label(&format!("oracle_agreement[N={horizon}]"), gamma);
    match oracle_gap(model, gamma, horizon, opts) {
        Err(e) => unmet(name, e),
        Ok(g) => CheckRow::from_excess(
            name,
            g.cesaro_gap - g.bound,
            format!("gap {:e}; bound {:e}; gap to long-run gain {:e}", g.cesaro_gap, g.bound, g.gain_gap),
        ),
    }
}

/// No random Markov policy beats the optimal gain.
pub fn check_dominance(model: &Model, gamma: Option<f64>, policies: usize, rng: &mut impl Rng) -> CheckRow {
    let name = label("dominance", gamma);
    let opts = SolveOptions::default();
    let best = match solve(model, gamma, &opts) {
        Ok(s) => s.long_run_gain,
        Err(e) => return unmet(name, e),
    };
    let mut worst = f64::NEG_INFINITY;
    let (mut evaluated, mut skipped) = (0, 0);
    for _ in 0..policies {
        let u = random_policy(rng, model);
        let gain = match gamma {
            None => solve_policy_average(model, &u, &opts).map(|s| s.long_run_gain),
            Some(g) => solve_policy_risk(model, &u, g, &opts).map(|s| s.long_run_gain),
        };
        match gain {
            Ok(v) => {
                worst = worst.max(v - best - DOMINANCE_SLACK);
                evaluated += 1;
            }
            Err(e) if e.is_assumption_failure() => skipped += 1,
            Err(e) => return CheckRow::fail(name, e.to_string()),
        }
    }
    if evaluated == 0 {
        return CheckRow::skip(name, "no random policy satisfied the contraction assumptions");
    }
    CheckRow::from_excess(name, worst, format!("{evaluated} policies, {skipped} non-contracting skipped"))
}

/// Hoeffding gap within `[0, bound]` on random windows, risk factors,
/// start states and policies.
pub fn check_hoeffding(model: &Model, draws: usize, rng: &mut impl Rng) -> CheckRow {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..draws {
        let start = rng.random_range(0..2 * model.num_slots());
        let len = rng.random_range(1..=20);
        let gamma = loop {
            let g: f64 = rng.random_range(-5.0..5.0);
            if g != 0.0 {
                break g;
            }
        };
        let x = rng.random_range(0..model.num_states());
        let u = random_policy(rng, model);
        match hoeffding_gap(model, &u, start, len, gamma, x) {
            Ok(h) => {
                // Rounding in ln E[e^{gamma S}] scales with the exponent.
                let slack = 1e-12 * (1.0 + gamma.abs() * len as f64 * max_reward_span(model));
                worst = worst.max((-h.gap - slack).max(h.gap - h.bound - slack));
            }
            Err(e) => return CheckRow::fail("hoeffding", e.to_string()),
        }
    }
    CheckRow::from_excess("hoeffding", worst, format!("{draws} draws"))
}

/// `|lambda^r(gamma) - lambda|` at each `gamma`, in order.
pub fn gamma_gaps(model: &Model, gammas: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, Solution)> {
    let avg = solve_average(model, opts)?;
    let mut gaps = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let r = solve_risk(model, g, opts).map_err(|e| Error::AtGamma { gamma: g, source: Box::new(e) })?;
        gaps.push((r.long_run_gain - avg.long_run_gain).abs());
    }
    Ok((gaps, avg))
}

pub const CONTINUITY_GAMMAS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Gain gaps shrink along `1e-1, 1e-2, 1e-3`, and the last one is at most
/// `1e-2 (sum of periodic reward spans)^2 / 8`.
pub fn check_gamma_continuity(model: &Model, opts: &SolveOptions) -> CheckRow {
    let name = "gamma_continuity";
    match gamma_gaps(model, &CONTINUITY_GAMMAS, opts) {
        Err(e) => unmet(name.into(), e),
        Ok((gaps, _)) => {
            let limit = 1e-2 * period_span_sum(model).powi(2) / 8.0;
            let rise = gaps.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            let worst = rise.max(gaps[2] - limit);
            CheckRow::from_excess(name, worst, format!("gaps {:e} {:e} {:e}; limit {limit:e}", gaps[0], gaps[1], gaps[2]))
        }
    }
}

/// `max_n ||w~_n(gamma) - w_n||_sp <= 1e-2 max_n span(w_n)` at `gamma = 1e-3`.
pub fn check_span_in_gamma(model: &Model, opts: &SolveOptions) -> CheckRow {
    let name = "span_convergence_in_gamma";
    let gamma = 1e-3;
    let avg = match solve_average(model, opts) {
        Ok(s) => s,
        Err(e) => return unmet(name.into(), e),
    };
    let risk = match solve_risk(model, gamma, opts) {
        Ok(s) => s,
        Err(e) => return unmet(name.into(), e),
    };
    let gap = risk.w.iter().zip(&avg.w).map(|(a, b)| span_diff(a.values(), b.values())).fold(0.0, f64::max);
    let limit = 1e-2 * avg.max_span();
    CheckRow::from_excess(name, gap - limit - 1e-9, format!("gap {gap:e}; limit {limit:e}"))
}

/// Every recorded snapshot lies within the a priori bound of the
/// converged bias.
pub fn check_apriori(model: &Model, gamma: Option<f64>) -> CheckRow {
    let name = label("apriori_bound", gamma);
    let bound = match AprioriBound::new(model, gamma) {
        Ok(b) => b,
        Err(e) => return unmet(name, e),
    };
    let reference = match solve(model, gamma, &SolveOptions::with_tol(REFERENCE_TOL)) {
        Ok(s) => s,
        Err(e) => return unmet(name, e),
    };
    let traced = match solve(model, gamma, &SolveOptions { record_trace: true, ..Default::default() }) {
        Ok(s) => s,
        Err(e) => return unmet(name, e),
    };
    let mut worst = f64::NEG_INFINITY;
    for entry in &traced.trace {
        let gap = span_diff(&entry.snapshot, reference.w[entry.slot].values());
        worst = worst.max(gap - bound.at(model, entry.slot, entry.k) - APRIORI_SLACK);
    }
    CheckRow::from_excess(name, worst, format!("{} snapshots", traced.trace.len()))
}

/// The full battery on one model. Random draws come from ChaCha8 seeded
/// with `seed`.
pub fn run_battery(model: &Model, seed: u64, opts: &SolveOptions) -> Vec<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let risk = [-0.5, 0.5];
    let mut rows = vec![
        check_contraction(model, 200, &mut rng),
        check_risk_span(model, &[-5.0, -1.0, -0.1, 0.1, 1.0, 5.0], 50, &mut rng),
    ];
    for g in std::iter::once(None).chain(risk.iter().map(|&g| Some(g))) {
        rows.push(check_residuals(model, g, opts));
        rows.push(check_uniqueness(model, g, 3, &mut rng));
        rows.push(check_oracle(model, g, 1_000, opts));
        rows.push(check_oracle(model, g, 10_000, opts));
        rows.push(check_dominance(model, g, 50, &mut rng));
        rows.push(check_apriori(model, g));
    }
    rows.push(check_hoeffding(model, 100, &mut rng));
    rows.push(check_gamma_continuity(model, opts));
    rows.push(check_span_in_gamma(model, opts));
    rows
}

pub fn battery_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from("property,status,worst_excess,detail\n");
    for r in rows {
        let status = match r.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        };
        let excess = if r.worst_excess.is_nan() { "NA".to_string() } else { format!("{:e}", r.worst_excess) };
        let _ = writeln!(out, "{},{status},{excess},\"{}\"", r.property, r.detail.replace('"', "'"));
    }
    out
}
