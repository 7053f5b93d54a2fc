//! The full property battery on a seeded random model.

use nhmdp::analysis::checks::{battery_csv, run_battery};
use nhmdp::fixtures::{random_model, RandomModelConfig};
use nhmdp::solver::SolveOptions;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let model = random_model(&mut rng, &RandomModelConfig::default());
    println!("{} states, {} actions, {} slots", model.num_states(), model.num_actions(), model.num_slots());
    print!("{}", battery_csv(&run_battery(&model, 1, &SolveOptions::default())));
}
