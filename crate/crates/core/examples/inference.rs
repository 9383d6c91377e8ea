//! Estimating external parameters from observations.
use std::path::Path;

use umbra::infer::{infer, load_observations, InferenceSpec};
use umbra::num;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let csv = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/rad/pick-durations.csv");
    let durations = load_observations(&csv)?;
    let rate = infer(&InferenceSpec::MeanRate { observations: durations.clone() })?;
    println!("{} pick durations, rate {rate} per second", durations.len());

    let prior = vec![num::integer(1), num::integer(1)];
    let bayes = InferenceSpec::Bayes { prior, counts: vec![3, 1], target: 0 };
    println!("posterior mean after 3 of 4 successes: {}", infer(&bayes)?);
    Ok(())
}
