//! Minimum and maximum reachability on an mdp, with the chosen policy.
use umbra::engines::check;
use umbra::expr::Binding;
use umbra::prism::{build_state_space, parse_model, ModelKind};
use umbra::props::parse_property;

const SRC: &str = "mdp
module robot
  s : [0..3] init 0;
  [safe] s=0 -> 0.9 : (s'=1) + 0.1 : (s'=0);
  [fast] s=0 -> 0.6 : (s'=2) + 0.4 : (s'=3);
  [] s>0 -> true;
endmodule
label \"goal\" = s=2 | s=1;
label \"crash\" = s=3;
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = build_state_space(&parse_model(SRC)?, &Binding::new())?;
    for text in ["Pmax=?[F \"goal\"]", "Pmin=?[F \"goal\"]", "Pmax=?[F<=1 \"goal\"]", "Pmin=?[F \"crash\"]"] {
        let r = check(&m, &parse_property(text, ModelKind::Mdp)?)?;
        println!("{text:<22} {:?}", r.value);
        if let Some(policy) = r.policy {
            println!("  policy {policy:?}");
        }
    }
    Ok(())
}
