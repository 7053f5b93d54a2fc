//! Load a model document, inspect its schedule, and see how validation
//! reports a broken one.

use nhmdp::{load_model, Error};

const MODEL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/models/prefix_periodic.json");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = load_model(&std::fs::read_to_string(MODEL)?)?;
    println!(
        "{} states, {} actions, prefix {} + period {}",
        model.num_states(),
        model.num_actions(),
        model.prefix_len(),
        model.period_len()
    );
    for n in [0, 1, 2, 3, 4, 5, 100] {
        println!("stage {n:>3} uses slot {}", model.slot(n));
    }

    // Break one row and reload.
    let broken = std::fs::read_to_string(MODEL)?.replacen("0.2", "0.25", 1);
    match load_model(&broken) {
        Err(Error::Validation(violations)) => {
            for v in violations {
                println!("rejected: {v}");
            }
        }
        other => println!("unexpected: {other:?}"),
    }

    let again = load_model(&model.to_json())?;
    assert_eq!(again.to_json(), model.to_json());
    println!("round trip ok");
    Ok(())
}
