//! Markov policies: one selector (state -> control) per schedule slot.
//!
//! Policy file format: a JSON object whose keys are slot indices `"0"` ..
//! `"q+p-1"` (prefix slots first, then period slots, matching the model) and
//! whose values map every state label to either an action label (finite
//! flavor) or a number in `[0, 1]` (interval flavor).

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{Control, Model};

/// Per-state controls for one stage.
pub type Selector = Vec<Control>;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySchedule {
    prefix: Vec<Selector>,
    period: Vec<Selector>,
}

impl PolicySchedule {
    pub fn new(prefix: Vec<Selector>, period: Vec<Selector>) -> Self {
        Self { prefix, period }
    }

    /// Builds a schedule from one selector per model slot.
    pub fn from_slots(model: &Model, mut slots: Vec<Selector>) -> Self {
        let period = slots.split_off(model.prefix_len());
        Self { prefix: slots, period }
    }

    /// The same selector at every stage of `model`.
    pub fn stationary(model: &Model, selector: Selector) -> Self {
        Self {
            prefix: vec![selector.clone(); model.prefix_len()],
            period: vec![selector; model.period_len()],
        }
    }

    pub fn prefix(&self) -> &[Selector] {
        &self.prefix
    }

    pub fn period(&self) -> &[Selector] {
        &self.period
    }

    /// Selector at schedule slot `slot` (prefix slots first).
    pub fn slot(&self, slot: usize) -> &Selector {
        if slot < self.prefix.len() {
            &self.prefix[slot]
        } else {
            &self.period[slot - self.prefix.len()]
        }
    }

    /// Selector used at absolute stage `n`.
    pub fn selector_at(&self, n: usize) -> &Selector {
        let q = self.prefix.len();
        if n < q {
            &self.prefix[n]
        } else {
            &self.period[(n - q) % self.period.len()]
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = &Selector> {
        self.prefix.iter().chain(&self.period)
    }

    /// Checks that the schedule has the model's shape and only legal controls.
    pub fn check(&self, model: &Model) -> Result<()> {
        if self.prefix.len() != model.prefix_len() || self.period.len() != model.period_len() {
            return Err(Error::Policy(format!(
                "schedule shape (prefix {}, period {}) does not match model (prefix {}, period {})",
                self.prefix.len(),
                self.period.len(),
                model.prefix_len(),
                model.period_len()
            )));
        }
        for (slot, sel) in self.slots().enumerate() {
            if sel.len() != model.num_states() {
                return Err(Error::Policy(format!(
                    "slot {slot} selects for {} states, model has {}",
                    sel.len(),
                    model.num_states()
                )));
            }
            if let Some((x, c)) = sel.iter().enumerate().find(|(_, c)| !model.is_legal(**c)) {
                return Err(Error::Policy(format!(
                    "slot {slot}, state '{}': illegal control {c:?}",
                    model.states()[x]
                )));
            }
        }
        Ok(())
    }

    /// Parses a policy file against `model`.
    pub fn from_json(model: &Model, text: &str) -> Result<Self> {
        let doc: BTreeMap<String, BTreeMap<String, Value>> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut slots: Vec<Option<Selector>> = vec![None; model.num_slots()];
        for (key, table) in doc {
            let slot: usize = key
                .parse()
                .map_err(|_| Error::Policy(format!("stage key '{key}' is not an index")))?;
            if slot >= slots.len() {
                return Err(Error::Policy(format!(
                    "stage key {slot} out of range (model has {} slots)",
                    slots.len()
                )));
            }
            let mut sel = vec![None; model.num_states()];
            for (label, value) in table {
                let x = model
                    .state_index(&label)
                    .ok_or_else(|| Error::Policy(format!("slot {slot}: unknown state '{label}'")))?;
                sel[x] = Some(parse_control(model, &value).ok_or_else(|| {
                    Error::Policy(format!("slot {slot}, state '{label}': bad control {value}"))
                })?);
            }
            let sel = sel
                .into_iter()
                .enumerate()
                .map(|(x, c)| {
                    c.ok_or_else(|| {
                        Error::Policy(format!("slot {slot}: no control for state '{}'", model.states()[x]))
                    })
                })
                .collect::<Result<Selector>>()?;
            slots[slot] = Some(sel);
        }
        let slots = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::Policy(format!("missing stage key {i}"))))
            .collect::<Result<Vec<_>>>()?;
        let policy = Self::from_slots(model, slots);
        policy.check(model)?;
        Ok(policy)
    }

    /// Serializes to the policy file format.
    pub fn to_json(&self, model: &Model) -> String {
        serde_json::to_string_pretty(&self.to_value(model)).expect("policy serializes")
    }

    pub fn to_value(&self, model: &Model) -> Value {
        let mut doc = serde_json::Map::new();
        for (slot, sel) in self.slots().enumerate() {
            let table: serde_json::Map<String, Value> = sel
                .iter()
                .enumerate()
                .map(|(x, c)| (model.states()[x].clone(), control_value(model, *c)))
                .collect();
            doc.insert(slot.to_string(), Value::Object(table));
        }
        Value::Object(doc)
    }
}

fn parse_control(model: &Model, value: &Value) -> Option<Control> {
    match value {
        Value::String(label) => model.action_index(label).map(Control::Action),
        Value::Number(n) if model.is_interval() => {
            let a = n.as_f64()?;
            (0.0..=1.0).contains(&a).then_some(Control::Param(a))
        }
        _ => None,
    }
}

fn control_value(model: &Model, c: Control) -> Value {
    match c {
        Control::Param(a) => Value::from(a),
        Control::Action(i) if model.is_interval() => Value::from(model.grid_param(i)),
        Control::Action(_) => Value::String(model.control_label(c)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn round_trip_finite() {
        let m = fixtures::two_by_two();
        let p = PolicySchedule::stationary(&m, vec![Control::Action(1), Control::Action(0)]);
        let back = PolicySchedule::from_json(&m, &p.to_json(&m)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn interval_params_parse() {
        let m = fixtures::interval_model(11);
        let text = r#"{"0": {"low": 0.25, "high": 1}}"#;
        let p = PolicySchedule::from_json(&m, text).unwrap();
        assert_eq!(p.slot(0), &vec![Control::Param(0.25), Control::Param(1.0)]);
    }

    #[test]
    fn rejects_bad_policies() {
        let m = fixtures::two_by_two();
        for text in [
            r#"{"0": {"x0": "a"}}"#,
            r#"{"0": {"x0": "a", "x1": "zzz"}}"#,
            r#"{"0": {"x0": "a", "x1": "b"}, "1": {"x0": "a", "x1": "b"}}"#,
            r#"{}"#,
            r#"{"0": {"x0": 0.5, "x1": "b"}}"#,
        ] {
            assert!(PolicySchedule::from_json(&m, text).is_err(), "{text}");
        }
    }

    #[test]
    fn selector_at_is_periodic() {
        let m = fixtures::prefix_periodic();
        let s = m.num_states();
        let slots: Vec<Selector> = (0..m.num_slots())
            .map(|i| vec![Control::Action(i % m.num_actions()); s])
            .collect();
        let p = PolicySchedule::from_slots(&m, slots);
        for n in 0..30 {
            assert_eq!(p.selector_at(n), p.slot(m.slot(n)));
        }
    }
}
