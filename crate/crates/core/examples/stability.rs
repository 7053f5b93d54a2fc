//! Gains of interval-action policies whose parameters converge at rate 1/m.

use nhmdp::analysis::{shift_params, stability_trace};
use nhmdp::fixtures;
use nhmdp::solver::{solve_average, solve_risk, SolveOptions};

fn main() -> nhmdp::Result<()> {
    let model = fixtures::interior_interval(101);
    let opts = SolveOptions::with_tol(1e-13);
    let ms = [4, 8, 16, 64, 256, 1024, 10_000];

    // Around the risk-sensitive optimum the parameter is interior, so the
    // first-order effect of a shift vanishes.
    let limit = solve_risk(&model, 1.0, &opts)?.solution.policy;
    let seq: Vec<_> = ms.iter().map(|&m| Ok((m, shift_params(&limit, 1.0 / m as f64)?))).collect::<nhmdp::Result<_>>()?;
    let trace = stability_trace(&model, &seq, &limit, Some(1.0), &opts)?;
    println!("risk-sensitive, limit gain {:.10}", trace.limit_gain);
    print!("{}", trace.to_csv());

    // The average-reward optimum sits at an endpoint: deviations are O(1/m).
    let limit = solve_average(&model, &opts)?.policy;
    let seq: Vec<_> = ms.iter().map(|&m| Ok((m, shift_params(&limit, 1.0 / m as f64)?))).collect::<nhmdp::Result<_>>()?;
    let trace = stability_trace(&model, &seq, &limit, None, &opts)?;
    println!("average reward, limit gain {:.10}", trace.limit_gain);
    print!("{}", trace.to_csv());
    Ok(())
}
