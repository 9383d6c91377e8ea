//! Sweeping the number of remote attempts in the robot fleet.
use std::path::Path;

use umbra::cli::{cmd_sweep, parse_axis, QuerySpec, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/robofleet/manifest.json");
    let axis = parse_axis("sup.nAttempts=1:1:4")?;
    for reward in ["failures", "cost"] {
        let query = QuerySpec { model: "sup".into(), property: format!("R{{\"{reward}\"}}=?[F \"done\"]") };
        let table = cmd_sweep(&path, std::slice::from_ref(&axis), Some(query), &RunOptions::default())?;
        println!("{reward}");
        print!("{}", table.to_csv());
    }
    Ok(())
}
