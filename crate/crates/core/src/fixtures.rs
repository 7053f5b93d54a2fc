//! Small reference models and a seeded random model generator, shared by
//! the tests, the runnable examples and `nhmdp check`.

use rand::Rng;

use crate::model::{ActionData, ActionSpace, Control, Model, Stage};
use crate::operators::PolicySchedule;

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn single(kernel: Vec<Vec<f64>>, reward: Vec<f64>) -> Stage {
    Stage::new(vec![ActionData::new(kernel, reward)])
}

/// One state, one action, rewards 1 then 3 repeating.
pub fn alternating() -> Model {
    Model::finite(
        vec!["only".into()],
        vec!["go".into()],
        "only",
        vec![],
        vec![single(vec![vec![1.0]], vec![1.0]), single(vec![vec![1.0]], vec![3.0])],
    )
    .expect("valid fixture")
}

/// Two states, one action, every row `[0.5, 0.5]`, reward `(0, 1)`.
pub fn iid2() -> Model {
    Model::finite(
        labels("x", 2),
        vec!["a".into()],
        "x0",
        vec![],
        vec![single(vec![vec![0.5, 0.5]; 2], vec![0.0, 1.0])],
    )
    .expect("valid fixture")
}

/// Two states, actions `a` (stay) and `b` (swap), rewards
/// `c(x0,a)=0, c(x0,b)=1, c(x1,a)=2, c(x1,b)=0`.
pub fn two_by_two() -> Model {
    let stay = ActionData::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 2.0]);
    let swap = ActionData::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 0.0]);
    Model::finite(labels("x", 2), vec!["a".into(), "b".into()], "x0", vec![], vec![Stage::new(vec![stay, swap])])
        .expect("valid fixture")
}

/// Two identical actions.
pub fn tied_actions() -> Model {
    let d = ActionData::new(vec![vec![0.5, 0.5]; 2], vec![1.0, 1.0]);
    Model::finite(labels("x", 2), vec!["a".into(), "b".into()], "x0", vec![], vec![Stage::new(vec![d.clone(), d])])
        .expect("valid fixture")
}

/// Two states, two actions, prefix of length 1 and a period of 3 stages.
pub fn prefix_periodic() -> Model {
    let st = |p: f64, r: f64| {
        Stage::new(vec![
            ActionData::new(vec![vec![p, 1.0 - p], vec![0.3, 0.7]], vec![r, 0.0]),
            ActionData::new(vec![vec![0.6, 0.4], vec![1.0 - p, p]], vec![0.5, r - 0.25]),
        ])
    };
    Model::finite(
        labels("x", 2),
        vec!["a".into(), "b".into()],
        "x0",
        vec![st(0.2, 5.0)],
        vec![st(0.9, 1.0), st(0.5, 0.0), st(0.3, 2.0)],
    )
    .expect("valid fixture")
}

/// Action `b` has the same kernel as `a` and pays one unit less everywhere.
pub fn suboptimal_pair() -> Model {
    let k = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
    let a = ActionData::new(k.clone(), vec![1.0, 3.0]);
    let b = ActionData::new(k, vec![0.0, 2.0]);
    Model::finite(labels("x", 2), vec!["a".into(), "b".into()], "x0", vec![], vec![Stage::new(vec![a, b])])
        .expect("valid fixture")
}

/// A model with `K_n = inf` (row `[0, 1]` next to `[0.5, 0.5]`) that still
/// contracts for the average-reward operator.
pub fn disjoint() -> Model {
    Model::finite(
        labels("x", 2),
        vec!["a".into()],
        "x0",
        vec![],
        vec![single(vec![vec![0.5, 0.5], vec![0.0, 1.0]], vec![0.0, 1.0])],
    )
    .expect("valid fixture")
}

/// Interval-action model on states `low`, `high`. The upper endpoint pushes
/// towards `high` at a reward cost.
pub fn interval_model(grid_points: usize) -> Model {
    let lower = ActionData::new(vec![vec![0.9, 0.1], vec![0.5, 0.5]], vec![0.0, 1.0]);
    let upper = ActionData::new(vec![vec![0.1, 0.9], vec![0.1, 0.9]], vec![-1.0, 0.0]);
    Model::interval(vec!["low".into(), "high".into()], grid_points, "low", vec![], vec![[lower, upper]])
        .expect("valid fixture")
}

/// Interval-action model whose risk-sensitive optimum at `gamma = 1` uses an
/// interior parameter in `x0`. Both endpoints agree in `x1`, so its control
/// is irrelevant there.
pub fn interior_interval(grid_points: usize) -> Model {
    let lower = ActionData::new(vec![vec![0.9, 0.1], vec![0.5, 0.5]], vec![1.0, 2.0]);
    let upper = ActionData::new(vec![vec![0.1, 0.9], vec![0.5, 0.5]], vec![0.2, 2.0]);
    Model::interval(labels("x", 2), grid_points, "x0", vec![], vec![[lower, upper]]).expect("valid fixture")
}

/// Shape bounds for [`random_model`].
#[derive(Clone, Debug)]
pub struct RandomModelConfig {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_prefix: usize,
    pub max_period: usize,
    /// Every kernel entry is at least this weight before normalization, so
    /// a positive value keeps all ratio bounds finite.
    pub min_weight: f64,
    pub reward_scale: f64,
}

impl Default for RandomModelConfig {
    fn default() -> Self {
        Self { max_states: 6, max_actions: 4, max_prefix: 1, max_period: 3, min_weight: 0.05, reward_scale: 1.0 }
    }
}

pub fn random_model(rng: &mut impl Rng, cfg: &RandomModelConfig) -> Model {
    let s = rng.random_range(2..=cfg.max_states.max(2));
    let a = rng.random_range(1..=cfg.max_actions.max(1));
    let q = rng.random_range(0..=cfg.max_prefix);
    let p = rng.random_range(1..=cfg.max_period.max(1));
    let stage = |rng: &mut _| random_stage(rng, s, a, cfg);
    let prefix = (0..q).map(|_| stage(rng)).collect();
    let period = (0..p).map(|_| stage(rng)).collect();
    let anchor = format!("x{}", rng.random_range(0..s));
    Model::finite(labels("x", s), labels("u", a), anchor, prefix, period).expect("generated model is valid")
}

fn random_stage(rng: &mut impl Rng, s: usize, a: usize, cfg: &RandomModelConfig) -> Stage {
    let actions = (0..a)
        .map(|_| {
            let kernel = (0..s).map(|_| random_row(rng, s, cfg.min_weight)).collect();
            let reward = (0..s).map(|_| cfg.reward_scale * rng.random_range(-1.0..1.0)).collect();
            ActionData::new(kernel, reward)
        })
        .collect();
    Stage::new(actions)
}

/// A uniformly drawn Markov policy: independent controls per slot and state.
pub fn random_policy(rng: &mut impl Rng, model: &Model) -> PolicySchedule {
    let slots = (0..model.num_slots())
        .map(|_| {
            (0..model.num_states())
                .map(|_| match model.action_space() {
                    ActionSpace::Finite(labels) => Control::Action(rng.random_range(0..labels.len())),
                    ActionSpace::Interval { .. } => Control::Param(rng.random::<f64>()),
                })
                .collect()
        })
        .collect();
    PolicySchedule::from_slots(model, slots)
}

/// A vector with uniform entries in `[-scale, scale]`.
pub fn random_vector(rng: &mut impl Rng, s: usize, scale: f64) -> Vec<f64> {
    (0..s).map(|_| rng.random_range(-scale..=scale)).collect()
}

/// A probability row whose sum is 1 to within a couple of ulps.
pub fn random_row(rng: &mut impl Rng, s: usize, min_weight: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..s).map(|_| min_weight + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let mut row: Vec<f64> = w.iter().map(|x| x / total).collect();
    let head: f64 = row[..s - 1].iter().sum();
    row[s - 1] = (1.0 - head).max(0.0);
    row
}
