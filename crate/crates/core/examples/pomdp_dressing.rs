//! The dressing pomdp: a memoryless observation policy minimising failure.
use std::path::Path;

use umbra::engines::check;
use umbra::expr::Binding;
use umbra::num;
use umbra::prism::{build_state_space, parse_model, ModelKind};
use umbra::props::parse_property;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/rad/dressing.pomdp");
    let model = parse_model(&std::fs::read_to_string(path)?)?;
    let mut b = Binding::new();
    for (name, v) in [
        ("pPickGarment", 0.65),
        ("pOkCorrect", 0.9),
        ("pNotOkCorrect", 0.8),
        ("pOk", 0.7),
        ("pSlowOk", 0.95),
        ("pSlowNotOk", 0.7),
        ("pFastOk", 0.85),
        ("pFastNotOk", 0.3),
        ("pAllowRetry", 0.5),
    ] {
        b.set(name, num::from_f64_decimal(v).ok_or("not finite")?);
    }
    let m = build_state_space(&model, &b)?;
    println!("{} states in {} observation classes", m.num_states(), m.observation_count);
    let r = check(&m, &parse_property("Pmin=?[F step=6]", ModelKind::Pomdp)?)?;
    println!("Pmin=?[F step=6] {:?}", r.value);
    if let Some(policy) = r.policy {
        println!("{policy:?}");
    }
    Ok(())
}
