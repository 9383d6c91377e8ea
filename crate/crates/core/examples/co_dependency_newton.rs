//! Smart lighting and motion sensor depend on each other; the cycle is
//! solved by Newton on closed forms from parametric elimination.
use std::path::Path;

use umbra::cli::Manifest;
use umbra::worldmodel::verify;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/smd/manifest.json");
    let u = Manifest::load(&path)?.world_model()?;
    let r = verify(&u, "ms", "P=?[F \"largeObject\" & \"detected\"] / P=?[F \"largeObject\"]")?;
    for scc in &r.sccs {
        println!("{:?} by {:?}: {} iterations, residual {:e}", scc.models, scc.method, scc.iterations, scc.residual);
        for eq in &scc.equations {
            println!("  {eq}");
        }
    }
    for p in &r.resolved {
        println!("{}.{} = {:.9} ({:?})", p.model, p.param, p.value, p.source);
    }
    println!("P(detected | large object) = {:?}", r.result.value);
    Ok(())
}
