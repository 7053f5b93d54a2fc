//! Per-stage ergodicity, ratio and remainder coefficients.

use nhmdp::coefficients::{Coefficients, TAIL_TOL};
use nhmdp::fixtures;

fn main() {
    let model = fixtures::prefix_periodic();
    let table = Coefficients::compute(&model, Some(0.5), TAIL_TOL);
    print!("{}", table.to_csv());
    println!("sup R_n = {}", table.sup_remainder());

    // K_n is infinite as soon as two rows disagree on their support.
    let k = Coefficients::compute(&fixtures::disjoint(), Some(1.0), TAIL_TOL);
    println!("disjoint model: K_0 = {}, risk factor {:?}", k.ratio_k[0], k.risk_delta.unwrap()[0]);
}
