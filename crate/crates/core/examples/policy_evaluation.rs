//! Fixed-policy gains: Poisson solves against exact finite-horizon values,
//! and the Hoeffding gap of the reward sum.

use nhmdp::analysis::{finite_horizon_average, finite_horizon_risk, hoeffding_gap};
use nhmdp::fixtures;
use nhmdp::solver::{solve_policy_average, solve_policy_risk, SolveOptions};
use nhmdp::{Control, PolicySchedule};

fn main() -> nhmdp::Result<()> {
    let model = fixtures::prefix_periodic();
    let policy = PolicySchedule::stationary(&model, vec![Control::Action(1), Control::Action(0)]);
    let opts = SolveOptions::default();
    let gamma = 0.5;

    let avg = solve_policy_average(&model, &policy, &opts)?;
    let risk = solve_policy_risk(&model, &policy, gamma, &opts)?;
    println!("Poisson gain {:.8}, multiplicative Poisson gain {:.8}", avg.long_run_gain, risk.long_run_gain);
    for n in [10, 100, 1_000, 10_000] {
        println!(
            "N = {n:>6}: average {:.8}  risk {:.8}",
            finite_horizon_average(&model, &policy, n, 0)?,
            finite_horizon_risk(&model, &policy, n, 0, gamma)?
        );
    }

    let h = hoeffding_gap(&model, &policy, 1, 6, gamma, 0)?;
    println!("Hoeffding gap over stages 1..7: {:.6} <= {:.6}", h.gap, h.bound);
    println!("policy file:\n{}", policy.to_json(&model));
    Ok(())
}
