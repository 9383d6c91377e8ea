//! Dependency graph, components and levels of the RAD world model.
use std::path::Path;

use umbra::cli::{dependency_dot, Manifest};
use umbra::worldmodel::{build_dependency_graph, compute_sccs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/rad/manifest.json");
    let u = Manifest::load(&path)?.world_model()?;
    let g = build_dependency_graph(&u);
    let part = compute_sccs(&g);
    for (c, scc) in part.sccs.iter().enumerate() {
        let ids: Vec<&str> = scc.iter().map(|&i| g.vertices[i].as_str()).collect();
        println!("component {c}: {ids:?} at level {}", part.level[scc[0]]);
    }
    println!("{}", dependency_dot(&u));
    Ok(())
}
