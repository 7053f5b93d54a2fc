//! Average-reward Bellman equation on a model with a transient prefix.

use nhmdp::fixtures;
use nhmdp::solver::{solve_average, SolveOptions};

fn main() -> nhmdp::Result<()> {
    let model = fixtures::prefix_periodic();
    let sol = solve_average(&model, &SolveOptions::default())?;
    for (slot, (w, lambda)) in sol.w.iter().zip(&sol.lambda).enumerate() {
        let controls: Vec<String> = sol.policy.slot(slot).iter().map(|&c| model.control_label(c)).collect();
        println!("slot {slot}: lambda = {lambda:.6}  w = {:?}  policy = {controls:?}", w.values());
    }
    println!(
        "long-run gain {:.9} after {} applications; max residual {:e}; a priori bound {:e}",
        sol.long_run_gain,
        sol.iterations_used,
        sol.max_residual(),
        sol.apriori_bound
    );
    Ok(())
}
