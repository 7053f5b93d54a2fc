use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Control, Model};
use crate::operators::{span_diff, PolicySchedule};
use crate::solver::{solve_policy_average, solve_policy_risk, SolveOptions, Solution};

#[derive(Clone, Debug, Serialize)]
pub struct StabilityEntry {
    pub m: usize,
    pub long_run_gain: f64,
    /// `|gain(u^m) - gain(u)|`.
    pub deviation: f64,
    /// `max_n |lambda_n(u^m) - lambda_n(u)|`.
    pub stage_deviation: f64,
    /// `max_n ||w_n(u^m) - w_n(u)||_sp`.
    pub bias_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityTrace {
    pub gamma: Option<f64>,
    pub limit_gain: f64,
    pub entries: Vec<StabilityEntry>,
}

impl StabilityTrace {
    /// Deviation of the entry with the largest `m` is below `tol`.
    pub fn converged(&self, tol: f64) -> bool {
        self.entries.iter().max_by_key(|e| e.m).is_some_and(|e| e.deviation < tol)
    }

    /// Deviations never increase (beyond `slack`) along entries with `m >= m0`.
    pub fn non_increasing_from(&self, m0: usize, slack: f64) -> bool {
        let mut tail: Vec<&StabilityEntry> = self.entries.iter().filter(|e| e.m >= m0).collect();
        tail.sort_by_key(|e| e.m);
        tail.windows(2).all(|w| w[1].deviation <= w[0].deviation + slack)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,long_run_gain,deviation,stage_deviation,bias_deviation\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.m, e.long_run_gain, e.deviation, e.stage_deviation, e.bias_deviation
            );
        }
        out
    }
}

fn solve(model: &Model, policy: &PolicySchedule, gamma: Option<f64>, opts: &SolveOptions) -> Result<Solution> {
    match gamma {
        Some(g) => solve_policy_risk(model, policy, g, opts).map(|r| r.solution),
        None => solve_policy_average(model, policy, opts),
    }
}

/// Evaluates every `(m, u^m)` of the sequence and compares to `limit`.
pub fn stability_trace(
    model: &Model,
    sequence: &[(usize, PolicySchedule)],
    limit: &PolicySchedule,
    gamma: Option<f64>,
    opts: &SolveOptions,
) -> Result<StabilityTrace> {
    let reference = solve(model, limit, gamma, opts)?;
    let mut entries = Vec::with_capacity(sequence.len());
    for (m, policy) in sequence {
        let sol = solve(model, policy, gamma, opts)?;
        let stage_deviation = sol
            .lambda
            .iter()
            .zip(&reference.lambda)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let bias_deviation = sol
            .w
            .iter()
            .zip(&reference.w)
            .map(|(a, b)| span_diff(a.values(), b.values()))
            .fold(0.0, f64::max);
        entries.push(StabilityEntry {
            m: *m,
            long_run_gain: sol.long_run_gain,
            deviation: (sol.long_run_gain - reference.long_run_gain).abs(),
            stage_deviation,
            bias_deviation,
        });
    }
    Ok(StabilityTrace { gamma, limit_gain: reference.long_run_gain, entries })
}

/// Moves every interval parameter of `policy` by `offset` toward the
/// interior of `[0, 1]`: `a + offset` when that stays in range, otherwise
/// `a - offset`, and an error when neither is.
pub fn shift_params(policy: &PolicySchedule, offset: f64) -> Result<PolicySchedule> {
    if !(0.0..=1.0).contains(&offset) {
        return Err(Error::InvalidArgument(format!("offset {offset} outside [0, 1]")));
    }
    let shift = |sel: &Vec<Control>| -> Result<Vec<Control>> {
        sel.iter()
            .map(|c| match *c {
                Control::Param(a) if a + offset <= 1.0 => Ok(Control::Param(a + offset)),
                Control::Param(a) if a - offset >= 0.0 => Ok(Control::Param(a - offset)),
                Control::Param(a) => Err(Error::InvalidArgument(format!("cannot shift {a} by {offset}"))),
                Control::Action(_) => Err(Error::InvalidArgument("parameter shift needs an interval policy".into())),
            })
            .collect()
    };
    Ok(PolicySchedule::new(
        policy.prefix().iter().map(shift).collect::<Result<_>>()?,
        policy.period().iter().map(shift).collect::<Result<_>>()?,
    ))
}
