#![allow(dead_code)]

use nhmdp::fixtures::{self, random_model, RandomModelConfig};
use nhmdp::Model;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random models with `S <= 6`, `A <= 4`, `p <= 3` and a strictly positive
/// kernel floor, so every ratio bound is finite.
pub fn random_models(count: usize, seed: u64) -> Vec<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RandomModelConfig::default();
    (0..count).map(|_| random_model(&mut rng, &cfg)).collect()
}

/// Hand-built models (all contract for the average-reward operator).
pub fn named_models() -> Vec<(&'static str, Model)> {
    vec![
        ("alternating", fixtures::alternating()),
        ("iid2", fixtures::iid2()),
        ("tied_actions", fixtures::tied_actions()),
        ("prefix_periodic", fixtures::prefix_periodic()),
        ("suboptimal_pair", fixtures::suboptimal_pair()),
        ("disjoint", fixtures::disjoint()),
        ("interval", fixtures::interval_model(21)),
        ("interior_interval", fixtures::interior_interval(21)),
    ]
}

/// Named models followed by 20 random ones.
pub fn test_models() -> Vec<(String, Model)> {
    let mut all: Vec<(String, Model)> = named_models().into_iter().map(|(n, m)| (n.to_string(), m)).collect();
    all.extend(random_models(20, 11).into_iter().enumerate().map(|(i, m)| (format!("random{i}"), m)));
    all
}
