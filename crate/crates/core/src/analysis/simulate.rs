//! Monte Carlo cross-check of the finite-horizon functionals.
//!
//! Paths are split into fixed shards of [`SHARD_PATHS`]. Shard `j` draws
//! from ChaCha20 seeded with `seed` on stream `j`, so every shard's sample
//! is independent of how shards are scheduled. Shard statistics are merged
//! by a fixed pairwise tree, which makes the output bit-identical for any
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::operators::PolicySchedule;

pub const SHARD_PATHS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub paths: usize,
    pub horizon: usize,
    /// Sample mean of the path averages `S/N`.
    pub mean_average: f64,
    /// Standard error of `mean_average`.
    pub std_error: f64,
    /// `(1/(N gamma)) ln(mean e^{gamma S})` when a risk factor was given.
    pub risk_value: Option<f64>,
}

#[derive(Clone, Copy)]
struct Stats {
    count: f64,
    mean: f64,
    m2: f64,
    /// `ln sum e^{gamma S}`.
    lse: f64,
}

impl Stats {
    const EMPTY: Stats = Stats { count: 0.0, mean: 0.0, m2: 0.0, lse: f64::NEG_INFINITY };

    fn push(&mut self, avg: f64, tilt: f64) {
        self.count += 1.0;
        let d = avg - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (avg - self.mean);
        self.lse = log_add(self.lse, tilt);
    }

    fn merge(a: Stats, b: Stats) -> Stats {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let count = a.count + b.count;
        let d = b.mean - a.mean;
        Stats {
            count,
            mean: a.mean + d * b.count / count,
            m2: a.m2 + b.m2 + d * d * a.count * b.count / count,
            lse: log_add(a.lse, b.lse),
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

fn tree_reduce(mut items: Vec<Stats>) -> Stats {
    while items.len() > 1 {
        items = items
            .chunks(2)
            .map(|pair| if pair.len() == 2 { Stats::merge(pair[0], pair[1]) } else { pair[0] })
            .collect();
    }
    items.pop().unwrap_or(Stats::EMPTY)
}

/// Per-slot cumulative rows and rewards of a fixed policy.
struct Chain {
    cdf: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
}

impl Chain {
    fn new(model: &Model, policy: &PolicySchedule) -> Self {
        let s = model.num_states();
        let mut cdf = Vec::with_capacity(model.num_slots());
        let mut reward = Vec::with_capacity(model.num_slots());
        for slot in 0..model.num_slots() {
            let u = policy.slot(slot);
            cdf.push(
                (0..s)
                    .map(|x| {
                        let mut acc = 0.0;
                        model.row(slot, x, u[x]).iter().map(|p| { acc += p; acc }).collect()
                    })
                    .collect(),
            );
            reward.push((0..s).map(|x| model.reward(slot, x, u[x])).collect());
        }
        Self { cdf, reward }
    }

    fn step(&self, slot: usize, x: usize, r: f64) -> usize {
        let row = &self.cdf[slot][x];
        // Index of the first cumulative weight above r; rounding mass in the
        // last entry falls back to the last positive state.
        row.iter().position(|&c| r < c).unwrap_or_else(|| {
            let mut last = row.len() - 1;
            while last > 0 && row[last] == row[last - 1] {
                last -= 1;
            }
            last
        })
    }
}

/// Simulates `paths` trajectories of length `horizon` from state `start`.
pub fn simulate(
    model: &Model,
    policy: &PolicySchedule,
    horizon: usize,
    paths: usize,
    seed: u64,
    gamma: Option<f64>,
    start: usize,
) -> Result<SimulationResult> {
    policy.check(model)?;
    if horizon == 0 || paths == 0 {
        return Err(Error::InvalidArgument("horizon and paths must be at least 1".into()));
    }
    if start >= model.num_states() {
        return Err(Error::InvalidArgument(format!("start state {start} out of range")));
    }
    if gamma == Some(0.0) {
        return Err(Error::InvalidArgument("risk factor must be non-zero".into()));
    }
    let chain = Chain::new(model, policy);
    let g = gamma.unwrap_or(0.0);
    let shards = paths.div_ceil(SHARD_PATHS);
    let partial: Vec<Stats> = (0..shards)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut stats = Stats::EMPTY;
            let count = SHARD_PATHS.min(paths - j * SHARD_PATHS);
            for _ in 0..count {
                let mut x = start;
                let mut total = 0.0;
                for n in 0..horizon {
                    let slot = model.slot(n);
                    total += chain.reward[slot][x];
                    x = chain.step(slot, x, rng.random::<f64>());
                }
                stats.push(total / horizon as f64, g * total);
            }
            stats
        })
        .collect();
    let stats = tree_reduce(partial);
    let n = stats.count;
    let variance = if n > 1.0 { (stats.m2 / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(SimulationResult {
        paths,
        horizon,
        mean_average: stats.mean,
        std_error: (variance / n).sqrt(),
        risk_value: gamma.map(|g| (stats.lse - n.ln()) / (horizon as f64 * g)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::oracle::finite_horizon_average;
    use crate::fixtures;
    use crate::model::Control;

    fn only(model: &Model) -> PolicySchedule {
        PolicySchedule::stationary(model, vec![Control::Action(0); model.num_states()])
    }

    #[test]
    fn point_masses_have_zero_variance() {
        let m = fixtures::alternating();
        let r = simulate(&m, &only(&m), 7, 1000, 3, Some(0.5), 0).unwrap();
        assert_eq!(r.std_error, 0.0);
        assert!((r.mean_average - 13.0 / 7.0).abs() < 1e-14);
        assert!((r.risk_value.unwrap() - 13.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn iid_within_three_standard_errors() {
        let m = fixtures::iid2();
        let u = only(&m);
        let r = simulate(&m, &u, 1000, 10_000, 42, None, 0).unwrap();
        let exact = finite_horizon_average(&m, &u, 1000, 0).unwrap();
        assert!(r.std_error > 0.0);
        assert!((r.mean_average - exact).abs() <= 3.0 * r.std_error, "{r:?} vs {exact}");
    }

    #[test]
    fn identical_across_thread_counts() {
        let m = fixtures::iid2();
        let u = only(&m);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&m, &u, 50, 3000, 9, Some(1.0), 1).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(4));
        assert_eq!(a, run(1));
    }

    #[test]
    fn seeds_differ() {
        let m = fixtures::iid2();
        let u = only(&m);
        let a = simulate(&m, &u, 20, 500, 1, None, 0).unwrap();
        let b = simulate(&m, &u, 20, 500, 2, None, 0).unwrap();
        assert_ne!(a.mean_average, b.mean_average);
    }
}
