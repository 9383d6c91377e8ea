//! A cycle through a ctmc with non-polynomial rates: no closed form, so
//! the fixed point is found by minimising the squared residual.
use std::path::Path;

use umbra::cli::Manifest;
use umbra::worldmodel::{verify_with, Method, VerifyOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dpm_fx/manifest.json");
    let m = Manifest::load(&path)?;
    let u = m.world_model()?;
    let query = m.verify.as_ref().ok_or("manifest has no verify query")?;
    let options = VerifyOptions { method: Method::Powell, ..VerifyOptions::default() };
    let r = verify_with(&u, &query.model, &query.property, &options)?;
    for scc in &r.sccs {
        println!("{:?}: {} evaluations, squared residual {:e}", scc.models, scc.evaluations, scc.residual);
    }
    for p in &r.resolved {
        println!("{}.{} = {:.9}", p.model, p.param, p.value);
    }
    println!("{} = {:?}", query.property, r.result.value);
    Ok(())
}
