//! Risk-sensitive Bellman equation and its limit as gamma -> 0.

use nhmdp::fixtures;
use nhmdp::solver::{solve_average, solve_risk, SolveOptions};

fn main() -> nhmdp::Result<()> {
    let model = fixtures::iid2();
    let opts = SolveOptions::default();
    let avg = solve_average(&model, &opts)?;
    println!("gamma = 0: gain {:.10}", avg.long_run_gain);
    for gamma in [-2.0, -0.5, 0.01, 0.5, 1.0, 2.0] {
        let r = solve_risk(&model, gamma, &opts)?;
        println!("gamma = {gamma:>5}: gain {:.10}", r.long_run_gain);
    }
    println!("closed form at gamma = 1: {:.10}", ((1.0 + 1f64.exp()) / 2.0).ln());

    match solve_risk(&fixtures::disjoint(), 1.0, &opts) {
        Err(e) => println!("disjoint model: {e}"),
        Ok(_) => println!("disjoint model unexpectedly solved"),
    }
    Ok(())
}
