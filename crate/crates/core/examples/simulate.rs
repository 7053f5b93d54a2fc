//! Seeded Monte Carlo estimates next to the exact oracle values.

use nhmdp::analysis::{finite_horizon_average, finite_horizon_risk, simulate};
use nhmdp::fixtures;
use nhmdp::{Control, PolicySchedule};

fn main() -> nhmdp::Result<()> {
    let model = fixtures::iid2();
    let policy = PolicySchedule::stationary(&model, vec![Control::Action(0); 2]);
    let (horizon, paths, seed) = (1_000, 10_000, 7);

    let mc = simulate(&model, &policy, horizon, paths, seed, Some(0.01), 0)?;
    let exact = finite_horizon_average(&model, &policy, horizon, 0)?;
    println!("average: {:.6} +- {:.6} (exact {exact:.6})", mc.mean_average, mc.std_error);
    println!(
        "risk at gamma = 0.01: {:.6} (exact {:.6})",
        mc.risk_value.unwrap(),
        finite_horizon_risk(&model, &policy, horizon, 0, 0.01)?
    );

    let again = simulate(&model, &policy, horizon, paths, seed, Some(0.01), 0)?;
    assert_eq!(mc, again);
    println!("same seed, same result");
    Ok(())
}
