//! Robot-assisted dressing: inference, an acyclic dependency, a two-model
//! cycle and a pomdp, as `umbra verify` runs them.
use std::path::Path;

use umbra::cli::{cmd_verify, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/rad/manifest.json");
    let record = cmd_verify(&path, None, &RunOptions::default())?;
    println!("{}", record.to_json());
    Ok(())
}
