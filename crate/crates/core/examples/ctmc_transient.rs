//! Time-bounded reachability and steady state of a birth-death ctmc.
use umbra::engines::{check, compute_steady_state};
use umbra::expr::Binding;
use umbra::prism::{build_state_space, parse_model, ModelKind};
use umbra::props::parse_property;

const SRC: &str = "ctmc
module queue
  s : [0..2] init 0;
  [arrive] s<2 -> 1 : (s'=s+1);
  [serve] s>0 -> 2 : (s'=s-1);
endmodule
label \"full\" = s=2;
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = build_state_space(&parse_model(SRC)?, &Binding::new())?;
    for t in [0.5, 1.0, 5.0] {
        let text = format!("P=?[F<={t} \"full\"]");
        let r = check(&m, &parse_property(&text, ModelKind::Ctmc)?)?;
        println!("{text:<22} {:?}", r.value);
    }
    let pi = compute_steady_state(&m)?;
    for (s, p) in pi.iter().enumerate() {
        println!("pi({}) = {p:.6}", m.describe_state(s));
    }
    let r = check(&m, &parse_property("S=?[\"full\"]", ModelKind::Ctmc)?)?;
    println!("S=?[\"full\"] {:?}", r.value);
    Ok(())
}
