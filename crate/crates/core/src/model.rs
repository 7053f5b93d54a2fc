//! Finite controlled Markov models with a prefix+periodic stage schedule.
//!
//! A model lists its states and actions, an anchor state used to pin bias
//! functions, a finite prefix of stages `0..q`, and a non-empty block of `p`
//! stages that repeats forever. Stage `n >= q` uses `period[(n - q) % p]`.
//!
//! Internally every stage lives in one vector of *slots*: slots `0..q` are
//! the prefix and slots `q..q+p` the period. Per-stage results elsewhere in
//! the crate (coefficients, bias functions, gains) are indexed by slot.
//!
//! Two action flavors are supported:
//!
//! * finite: an ordered list of action labels, each stage giving one kernel
//!   and one reward vector per action;
//! * interval: actions are parameters `a` in `[0, 1]`, each stage gives a
//!   `lower` and `upper` endpoint, and the kernel and reward at `a` are the
//!   affine mixture `(1 - a) * lower + a * upper`. The model also carries a
//!   grid of `grid_points` evenly spaced parameters which stand in for the
//!   action set wherever a finite enumeration is needed.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum allowed deviation of a kernel row sum from one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Kernel and reward of one action at one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionData {
    /// `kernel[x][y]` is the probability of moving from `x` to `y`.
    pub kernel: Vec<Vec<f64>>,
    /// `reward[x]` is the stage reward collected in state `x`.
    pub reward: Vec<f64>,
}

impl ActionData {
    pub fn new(kernel: Vec<Vec<f64>>, reward: Vec<f64>) -> Self {
        Self { kernel, reward }
    }

    fn mix(lower: &ActionData, upper: &ActionData, a: f64) -> ActionData {
        let kernel = lower
            .kernel
            .iter()
            .zip(&upper.kernel)
            .map(|(r0, r1)| mix_rows(r0, r1, a))
            .collect();
        let reward = mix_rows(&lower.reward, &upper.reward, a);
        ActionData { kernel, reward }
    }
}

fn mix_rows(r0: &[f64], r1: &[f64], a: f64) -> Vec<f64> {
    r0.iter().zip(r1).map(|(p, q)| (1.0 - a) * p + a * q).collect()
}

/// One stage of the schedule: data for every action, indexed by action
/// position.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    actions: Vec<ActionData>,
}

impl Stage {
    pub fn new(actions: Vec<ActionData>) -> Self {
        Self { actions }
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, a: usize) -> &ActionData {
        &self.actions[a]
    }

    pub fn actions(&self) -> &[ActionData] {
        &self.actions
    }

    pub fn row(&self, a: usize, x: usize) -> &[f64] {
        &self.actions[a].kernel[x]
    }

    pub fn reward(&self, a: usize, x: usize) -> f64 {
        self.actions[a].reward[x]
    }

    /// Every kernel row of the stage as `(state, action, row)`, states outer.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        let s = self.actions.first().map_or(0, |d| d.kernel.len());
        (0..s).flat_map(move |x| {
            self.actions
                .iter()
                .enumerate()
                .map(move |(a, d)| (x, a, d.kernel[x].as_slice()))
        })
    }
}

/// The action set of a model.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionSpace {
    Finite(Vec<String>),
    Interval { grid_points: usize },
}

/// A control applied in one state: either a finite action index (also a
/// grid index in the interval flavor) or an interval parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Control {
    Action(usize),
    Param(f64),
}

/// Which part of the schedule a stage belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Segment {
    Prefix,
    Period,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::Prefix => f.write_str("prefix"),
            Segment::Period => f.write_str("period"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Location {
    pub segment: Segment,
    pub stage: usize,
    pub action: Option<String>,
    pub state: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    NoStates,
    NoActions,
    DuplicateLabel(String),
    UnknownAnchor(String),
    EmptyPeriod,
    GridTooCoarse(usize),
    MissingAction(String),
    UnknownAction(String),
    Dimension { what: &'static str, expected: usize, found: usize },
    NegativeProbability { target: String, value: f64 },
    NonFiniteProbability { target: String },
    RowSum { sum: f64 },
    NonFiniteReward,
}

/// One invariant violation, with the coordinates that locate it. Model-wide
/// problems carry no location.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub location: Option<Location>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(loc) = &self.location {
            write!(f, "{} stage {}", loc.segment, loc.stage)?;
            if let Some(a) = &loc.action {
                write!(f, ", action '{a}'")?;
            }
            if let Some(x) = &loc.state {
                write!(f, ", row '{x}'")?;
            }
            f.write_str(": ")?;
        }
        match &self.kind {
            ViolationKind::NoStates => f.write_str("model has no states"),
            ViolationKind::NoActions => f.write_str("model has no actions"),
            ViolationKind::DuplicateLabel(l) => write!(f, "duplicate label '{l}'"),
            ViolationKind::UnknownAnchor(l) => write!(f, "anchor '{l}' is not a state"),
            ViolationKind::EmptyPeriod => f.write_str("period must contain at least one stage"),
            ViolationKind::GridTooCoarse(g) => write!(f, "grid_points must be >= 2, got {g}"),
            ViolationKind::MissingAction(a) => write!(f, "missing action '{a}'"),
            ViolationKind::UnknownAction(a) => write!(f, "unknown action '{a}'"),
            ViolationKind::Dimension { what, expected, found } => {
                write!(f, "{what} has length {found}, expected {expected}")
            }
            ViolationKind::NegativeProbability { target, value } => {
                write!(f, "negative probability {value} towards '{target}'")
            }
            ViolationKind::NonFiniteProbability { target } => {
                write!(f, "non-finite probability towards '{target}'")
            }
            ViolationKind::RowSum { sum } => {
                write!(f, "row sums to {sum}, off from 1 by more than {ROW_SUM_TOL:e}")
            }
            ViolationKind::NonFiniteReward => f.write_str("non-finite reward"),
        }
    }
}

/// Interval-flavor stage: the two endpoint records.
pub type Endpoints = [ActionData; 2];

/// A nonhomogeneous controlled Markov model. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    states: Vec<String>,
    actions: ActionSpace,
    anchor: String,
    anchor_index: Option<usize>,
    prefix_len: usize,
    /// Prefix stages followed by period stages. For the interval flavor these
    /// are the materialized grid actions.
    stages: Vec<Stage>,
    endpoints: Option<Vec<Endpoints>>,
}

impl Model {
    /// Builds and validates a finite-action model.
    pub fn finite(
        states: Vec<String>,
        actions: Vec<String>,
        anchor: impl Into<String>,
        prefix: Vec<Stage>,
        period: Vec<Stage>,
    ) -> Result<Model> {
        Self::finite_unchecked(states, actions, anchor, prefix, period).checked()
    }

    /// Builds without validating. Numerical routines assume a valid model;
    /// call [`Model::validate`] before using the result for anything else.
    pub fn finite_unchecked(
        states: Vec<String>,
        actions: Vec<String>,
        anchor: impl Into<String>,
        prefix: Vec<Stage>,
        period: Vec<Stage>,
    ) -> Model {
        let anchor = anchor.into();
        let anchor_index = states.iter().position(|s| *s == anchor);
        let prefix_len = prefix.len();
        let mut stages = prefix;
        stages.extend(period);
        Model {
            states,
            actions: ActionSpace::Finite(actions),
            anchor,
            anchor_index,
            prefix_len,
            stages,
            endpoints: None,
        }
    }

    /// Builds and validates an interval-action model from endpoint pairs.
    pub fn interval(
        states: Vec<String>,
        grid_points: usize,
        anchor: impl Into<String>,
        prefix: Vec<Endpoints>,
        period: Vec<Endpoints>,
    ) -> Result<Model> {
        Self::interval_unchecked(states, grid_points, anchor, prefix, period).checked()
    }

    pub fn interval_unchecked(
        states: Vec<String>,
        grid_points: usize,
        anchor: impl Into<String>,
        prefix: Vec<Endpoints>,
        period: Vec<Endpoints>,
    ) -> Model {
        let anchor = anchor.into();
        let anchor_index = states.iter().position(|s| *s == anchor);
        let prefix_len = prefix.len();
        let mut endpoints = prefix;
        endpoints.extend(period);
        let stages = endpoints
            .iter()
            .map(|[lo, hi]| {
                let grid = (0..grid_points)
                    .map(|i| ActionData::mix(lo, hi, grid_param(i, grid_points)))
                    .collect();
                Stage::new(grid)
            })
            .collect();
        Model {
            states,
            actions: ActionSpace::Interval { grid_points },
            anchor,
            anchor_index,
            prefix_len,
            stages,
            endpoints: Some(endpoints),
        }
    }

    fn checked(self) -> Result<Model> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Number of finite actions, or grid points for the interval flavor.
    pub fn num_actions(&self) -> usize {
        match &self.actions {
            ActionSpace::Finite(a) => a.len(),
            ActionSpace::Interval { grid_points } => *grid_points,
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.actions, ActionSpace::Interval { .. })
    }

    pub fn anchor(&self) -> &str {
        &self.anchor
    }

    /// Position of the anchor state.
    ///
    /// # Panics
    /// On an unchecked model whose anchor is not a state.
    pub fn anchor_index(&self) -> usize {
        self.anchor_index.expect("anchor is not a state of the model")
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        match &self.actions {
            ActionSpace::Finite(a) => a.iter().position(|s| s == label),
            ActionSpace::Interval { .. } => None,
        }
    }

    /// Human-readable label of a control.
    pub fn control_label(&self, c: Control) -> String {
        match (&self.actions, c) {
            (ActionSpace::Finite(a), Control::Action(i)) => a[i].clone(),
            (ActionSpace::Interval { grid_points }, Control::Action(i)) => {
                format!("{}", grid_param(i, *grid_points))
            }
            (_, Control::Param(a)) => format!("{a}"),
        }
    }

    /// The interval parameter of grid action `i`.
    pub fn grid_param(&self, i: usize) -> f64 {
        grid_param(i, self.num_actions())
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn period_len(&self) -> usize {
        self.stages.len() - self.prefix_len
    }

    /// `q + p`, the number of distinct stages.
    pub fn num_slots(&self) -> usize {
        self.stages.len()
    }

    /// Slot of absolute stage `n`.
    pub fn slot(&self, n: usize) -> usize {
        let q = self.prefix_len;
        if n < q {
            n
        } else {
            q + (n - q) % self.period_len()
        }
    }

    /// Slot of the stage that follows `slot`.
    pub fn next_slot(&self, slot: usize) -> usize {
        if slot + 1 < self.stages.len() {
            slot + 1
        } else {
            self.prefix_len
        }
    }

    /// Stage data used at absolute stage `n`.
    pub fn stage_at(&self, n: usize) -> &Stage {
        &self.stages[self.slot(n)]
    }

    pub fn stage(&self, slot: usize) -> &Stage {
        &self.stages[slot]
    }

    pub fn prefix(&self) -> &[Stage] {
        &self.stages[..self.prefix_len]
    }

    pub fn period(&self) -> &[Stage] {
        &self.stages[self.prefix_len..]
    }

    /// Endpoint records per slot, interval flavor only.
    pub fn endpoints(&self) -> Option<&[Endpoints]> {
        self.endpoints.as_deref()
    }

    pub fn segment_of(&self, slot: usize) -> (Segment, usize) {
        if slot < self.prefix_len {
            (Segment::Prefix, slot)
        } else {
            (Segment::Period, slot - self.prefix_len)
        }
    }

    /// Kernel row used from state `x` under control `c` at slot `slot`.
    pub fn row(&self, slot: usize, x: usize, c: Control) -> Cow<'_, [f64]> {
        match c {
            Control::Action(a) => Cow::Borrowed(self.stages[slot].row(a, x)),
            Control::Param(a) => {
                let [lo, hi] = &self.endpoints.as_ref().expect("parameter control on finite model")[slot];
                Cow::Owned(mix_rows(&lo.kernel[x], &hi.kernel[x], a))
            }
        }
    }

    pub fn reward(&self, slot: usize, x: usize, c: Control) -> f64 {
        match c {
            Control::Action(a) => self.stages[slot].reward(a, x),
            Control::Param(a) => {
                let [lo, hi] = &self.endpoints.as_ref().expect("parameter control on finite model")[slot];
                (1.0 - a) * lo.reward[x] + a * hi.reward[x]
            }
        }
    }

    /// Whether `c` is a legal control for this model.
    pub fn is_legal(&self, c: Control) -> bool {
        match c {
            Control::Action(a) => a < self.num_actions(),
            Control::Param(a) => self.is_interval() && (0.0..=1.0).contains(&a),
        }
    }

    /// Lists every invariant violation; empty iff the model is valid.
    /// Model-wide problems come first, then prefix stages in order, then
    /// period stages in order.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let global = |kind| Violation { location: None, kind };
        if self.states.is_empty() {
            out.push(global(ViolationKind::NoStates));
        }
        push_duplicates(&self.states, &mut out);
        match &self.actions {
            ActionSpace::Finite(a) => {
                if a.is_empty() {
                    out.push(global(ViolationKind::NoActions));
                }
                push_duplicates(a, &mut out);
            }
            ActionSpace::Interval { grid_points } => {
                if *grid_points < 2 {
                    out.push(global(ViolationKind::GridTooCoarse(*grid_points)));
                }
            }
        }
        if self.anchor_index.is_none() {
            out.push(global(ViolationKind::UnknownAnchor(self.anchor.clone())));
        }
        if self.period_len() == 0 {
            out.push(global(ViolationKind::EmptyPeriod));
        }

        let s = self.states.len();
        for slot in 0..self.stages.len() {
            let (segment, stage) = self.segment_of(slot);
            let records: Vec<(String, &ActionData)> = match (&self.actions, &self.endpoints) {
                (ActionSpace::Finite(labels), _) => {
                    let st = &self.stages[slot];
                    if st.num_actions() != labels.len() {
                        out.push(Violation {
                            location: Some(Location { segment, stage, action: None, state: None }),
                            kind: ViolationKind::Dimension {
                                what: "action list",
                                expected: labels.len(),
                                found: st.num_actions(),
                            },
                        });
                    }
                    labels.iter().cloned().zip(st.actions.iter()).collect()
                }
                (ActionSpace::Interval { .. }, Some(ep)) => {
                    let [lo, hi] = &ep[slot];
                    vec![("lower".to_string(), lo), ("upper".to_string(), hi)]
                }
                (ActionSpace::Interval { .. }, None) => Vec::new(),
            };
            for (label, data) in records {
                let loc = |state: Option<String>| Location {
                    segment,
                    stage,
                    action: Some(label.clone()),
                    state,
                };
                self.check_action(data, &loc, s, &mut out);
            }
        }
        out
    }

    fn check_action(
        &self,
        data: &ActionData,
        loc: &dyn Fn(Option<String>) -> Location,
        s: usize,
        out: &mut Vec<Violation>,
    ) {
        if data.kernel.len() != s {
            out.push(Violation {
                location: Some(loc(None)),
                kind: ViolationKind::Dimension { what: "kernel", expected: s, found: data.kernel.len() },
            });
        }
        if data.reward.len() != s {
            out.push(Violation {
                location: Some(loc(None)),
                kind: ViolationKind::Dimension { what: "reward", expected: s, found: data.reward.len() },
            });
        }
        for (x, row) in data.kernel.iter().enumerate() {
            let state = self.states.get(x).cloned().or_else(|| Some(format!("#{x}")));
            let mut here = |kind| out.push(Violation { location: Some(loc(state.clone())), kind });
            if row.len() != s {
                here(ViolationKind::Dimension { what: "kernel row", expected: s, found: row.len() });
                continue;
            }
            let mut ok = true;
            for (y, &p) in row.iter().enumerate() {
                let target = self.states[y].clone();
                if !p.is_finite() {
                    here(ViolationKind::NonFiniteProbability { target });
                    ok = false;
                } else if p < 0.0 {
                    here(ViolationKind::NegativeProbability { target, value: p });
                    ok = false;
                }
            }
            if ok {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    here(ViolationKind::RowSum { sum });
                }
            }
        }
        for (x, r) in data.reward.iter().enumerate() {
            if !r.is_finite() {
                let state = self.states.get(x).cloned();
                out.push(Violation { location: Some(loc(state)), kind: ViolationKind::NonFiniteReward });
            }
        }
    }

    /// Serializes to the JSON model document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    fn to_document(&self) -> ModelDocument {
        let stage_doc = |slot: usize| -> BTreeMap<String, ActionData> {
            match (&self.actions, &self.endpoints) {
                (ActionSpace::Finite(labels), _) => labels
                    .iter()
                    .cloned()
                    .zip(self.stages[slot].actions.iter().cloned())
                    .collect(),
                (ActionSpace::Interval { .. }, Some(ep)) => {
                    let [lo, hi] = ep[slot].clone();
                    [("lower".to_string(), lo), ("upper".to_string(), hi)].into_iter().collect()
                }
                (ActionSpace::Interval { .. }, None) => BTreeMap::new(),
            }
        };
        let (actions, action_interval) = match &self.actions {
            ActionSpace::Finite(a) => (Some(a.clone()), None),
            ActionSpace::Interval { grid_points } => {
                (None, Some(IntervalDocument { grid_points: *grid_points }))
            }
        };
        ModelDocument {
            states: self.states.clone(),
            actions,
            action_interval,
            anchor: self.anchor.clone(),
            prefix: (0..self.prefix_len).map(stage_doc).collect(),
            period: (self.prefix_len..self.stages.len()).map(stage_doc).collect(),
        }
    }
}

pub(crate) fn grid_param(i: usize, grid_points: usize) -> f64 {
    if grid_points < 2 {
        0.0
    } else {
        i as f64 / (grid_points - 1) as f64
    }
}

fn push_duplicates(labels: &[String], out: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            out.push(Violation { location: None, kind: ViolationKind::DuplicateLabel(l.clone()) });
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalDocument {
    grid_points: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action_interval: Option<IntervalDocument>,
    anchor: String,
    #[serde(default)]
    prefix: Vec<BTreeMap<String, ActionData>>,
    period: Vec<BTreeMap<String, ActionData>>,
}

/// Parses and validates a JSON model document.
pub fn load_model(text: &str) -> Result<Model> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut key_errors = Vec::new();
    let model = match (doc.actions, doc.action_interval) {
        (Some(actions), None) => {
            let mut take = |segment, stages: Vec<BTreeMap<String, ActionData>>| -> Vec<Stage> {
                stages
                    .into_iter()
                    .enumerate()
                    .map(|(i, mut st)| {
                        let data = take_keys(&mut st, &actions, segment, i, &mut key_errors);
                        Stage::new(data)
                    })
                    .collect()
            };
            let prefix = take(Segment::Prefix, doc.prefix);
            let period = take(Segment::Period, doc.period);
            Model::finite_unchecked(doc.states, actions, doc.anchor, prefix, period)
        }
        (None, Some(interval)) => {
            let keys = ["lower".to_string(), "upper".to_string()];
            let mut take = |segment, stages: Vec<BTreeMap<String, ActionData>>| -> Vec<Endpoints> {
                stages
                    .into_iter()
                    .enumerate()
                    .map(|(i, mut st)| {
                        let mut data = take_keys(&mut st, &keys, segment, i, &mut key_errors);
                        let hi = data.pop().expect("two endpoints");
                        let lo = data.pop().expect("two endpoints");
                        [lo, hi]
                    })
                    .collect()
            };
            let prefix = take(Segment::Prefix, doc.prefix);
            let period = take(Segment::Period, doc.period);
            Model::interval_unchecked(doc.states, interval.grid_points, doc.anchor, prefix, period)
        }
        (Some(_), Some(_)) => {
            return Err(Error::Parse("give either \"actions\" or \"action_interval\", not both".into()))
        }
        (None, None) => {
            return Err(Error::Parse("missing \"actions\" or \"action_interval\"".into()))
        }
    };
    if !key_errors.is_empty() {
        return Err(Error::Validation(key_errors));
    }
    model.checked()
}

/// Removes the expected action keys from a stage object, in order. Missing
/// keys yield an empty placeholder plus a violation; leftovers are reported
/// as unknown.
fn take_keys(
    st: &mut BTreeMap<String, ActionData>,
    keys: &[String],
    segment: Segment,
    stage: usize,
    errors: &mut Vec<Violation>,
) -> Vec<ActionData> {
    let mut out = Vec::with_capacity(keys.len());
    for k in keys {
        match st.remove(k) {
            Some(d) => out.push(d),
            None => {
                errors.push(Violation {
                    location: Some(Location { segment, stage, action: None, state: None }),
                    kind: ViolationKind::MissingAction(k.clone()),
                });
                out.push(ActionData::new(Vec::new(), Vec::new()));
            }
        }
    }
    for k in st.keys() {
        errors.push(Violation {
            location: Some(Location { segment, stage, action: None, state: None }),
            kind: ViolationKind::UnknownAction(k.clone()),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state(rewards: &[f64]) -> String {
        let stages: Vec<String> = rewards
            .iter()
            .map(|r| format!(r#"{{"go": {{"kernel": [[1.0]], "reward": [{r}]}}}}"#))
            .collect();
        format!(
            r#"{{"states": ["only"], "actions": ["go"], "anchor": "only", "prefix": [], "period": [{}]}}"#,
            stages.join(",")
        )
    }

    fn two_state(rows: [[f64; 2]; 2]) -> String {
        format!(
            r#"{{"states": ["x0", "x1"], "actions": ["a"], "anchor": "x0",
                "period": [{{"a": {{"kernel": [[{}, {}], [{}, {}]], "reward": [0, 1]}}}}]}}"#,
            rows[0][0], rows[0][1], rows[1][0], rows[1][1]
        )
    }

    #[test]
    fn smallest_model_loads() {
        let m = load_model(&one_state(&[1.0, 3.0])).unwrap();
        assert_eq!((m.num_states(), m.num_actions(), m.period_len()), (1, 1, 2));
        assert_eq!(m.prefix_len(), 0);
    }

    #[test]
    fn row_sum_violation_names_stage_action_row() {
        let err = load_model(&two_state([[0.5, 0.499], [0.5, 0.5]])).unwrap_err();
        let Error::Validation(v) = err else { panic!("expected validation error") };
        assert_eq!(v.len(), 1);
        let loc = v[0].location.as_ref().unwrap();
        assert_eq!(loc.segment, Segment::Period);
        assert_eq!(loc.stage, 0);
        assert_eq!(loc.action.as_deref(), Some("a"));
        assert_eq!(loc.state.as_deref(), Some("x0"));
        assert!(matches!(v[0].kind, ViolationKind::RowSum { .. }));
        assert!(v[0].to_string().contains("row 'x0'"));
    }

    #[test]
    fn row_sum_tolerance_is_tight() {
        assert!(load_model(&two_state([[0.5, 0.5 + 5e-13], [0.5, 0.5]])).is_ok());
        assert!(load_model(&two_state([[0.5, 0.5 + 5e-12], [0.5, 0.5]])).is_err());
    }

    #[test]
    fn negative_probability_reported_once() {
        let m = Model::finite_unchecked(
            vec!["x0".into(), "x1".into()],
            vec!["a".into()],
            "x0",
            vec![],
            vec![Stage::new(vec![ActionData::new(
                vec![vec![1.1, -0.1], vec![0.5, 0.5]],
                vec![0.0, 0.0],
            )])],
        );
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0].kind, ViolationKind::NegativeProbability { value, .. } if value == -0.1));
    }

    #[test]
    fn violations_ordered_prefix_first() {
        let bad = |p: f64| Stage::new(vec![ActionData::new(vec![vec![p]], vec![0.0])]);
        let m = Model::finite_unchecked(
            vec!["x".into()],
            vec!["a".into()],
            "x",
            vec![bad(1.0), bad(0.9)],
            vec![bad(1.2)],
        );
        let v = m.validate();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].location.as_ref().unwrap().segment, Segment::Prefix);
        assert_eq!(v[0].location.as_ref().unwrap().stage, 1);
        assert_eq!(v[1].location.as_ref().unwrap().segment, Segment::Period);
    }

    #[test]
    fn unknown_anchor_and_keys() {
        let text = one_state(&[1.0]).replace(r#""anchor": "only""#, r#""anchor": "ghost""#);
        let Err(Error::Validation(v)) = load_model(&text) else { panic!() };
        assert!(matches!(&v[0].kind, ViolationKind::UnknownAnchor(a) if a == "ghost"));

        let text = one_state(&[1.0]).replace(r#""prefix""#, r#""extra": 1, "prefix""#);
        assert!(matches!(load_model(&text), Err(Error::Parse(_))));

        let text = one_state(&[1.0]).replace(r#"{"go""#, r#"{"stay""#);
        let Err(Error::Validation(v)) = load_model(&text) else { panic!() };
        assert!(v.iter().any(|x| matches!(&x.kind, ViolationKind::MissingAction(a) if a == "go")));
        assert!(v.iter().any(|x| matches!(&x.kind, ViolationKind::UnknownAction(a) if a == "stay")));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(load_model("{\"states\": ["), Err(Error::Parse(_))));
        assert!(matches!(load_model("{\"states\": [], \"anchor\": \"x\", \"period\": []}"), Err(Error::Parse(_))));
    }

    #[test]
    fn stage_resolution() {
        let st = |r: f64| Stage::new(vec![ActionData::new(vec![vec![1.0]], vec![r])]);
        let mk = |q: usize, p: usize| {
            Model::finite(
                vec!["x".into()],
                vec!["a".into()],
                "x",
                (0..q).map(|i| st(100.0 + i as f64)).collect(),
                (0..p).map(|i| st(i as f64)).collect(),
            )
            .unwrap()
        };
        assert_eq!(mk(0, 2).stage_at(5).reward(0, 0), 1.0);
        assert_eq!(mk(1, 3).stage_at(0).reward(0, 0), 100.0);
        assert_eq!(mk(2, 2).stage_at(7).reward(0, 0), 1.0);
        let m = mk(1, 3);
        // (4 - 1) mod 3 = 0
        assert_eq!(m.stage_at(4).reward(0, 0), 0.0);
        assert_eq!(m.next_slot(3), 1);
        for n in 1..40 {
            assert_eq!(m.stage_at(n), m.stage_at(n + 3));
        }
    }

    #[test]
    fn interval_grid_materializes_mixtures() {
        let lo = ActionData::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![0.0, 0.0]);
        let hi = ActionData::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![2.0, 4.0]);
        let m = Model::interval(vec!["a".into(), "b".into()], 5, "a", vec![], vec![[lo, hi]]).unwrap();
        assert_eq!(m.num_actions(), 5);
        assert_eq!(m.stage(0).row(1, 0), &[0.75, 0.25]);
        assert_eq!(m.stage(0).reward(2, 1), 2.0);
        assert_eq!(&*m.row(0, 0, Control::Param(0.25)), &[0.75, 0.25]);
        assert_eq!(m.reward(0, 1, Control::Param(0.5)), 2.0);
        assert!(m.is_legal(Control::Param(1.0)));
        assert!(!m.is_legal(Control::Param(1.5)));
        let back = load_model(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
