//! Optimal gain as a function of the risk factor.

use nhmdp::analysis::{gain_curve, parse_gamma_grid};
use nhmdp::fixtures;
use nhmdp::solver::SolveOptions;

fn main() -> nhmdp::Result<()> {
    let grid = parse_gamma_grid("-2:2:0.25")?;
    let curve = gain_curve(&fixtures::prefix_periodic(), &grid, &SolveOptions::default())?;
    print!("{}", curve.to_csv());
    if let Some(p) = curve.smallest_gamma_gap() {
        println!("span gap to the average-reward bias at gamma = {}: {:e}", p.gamma, p.max_span_gap);
    }
    Ok(())
}
