//! Unbounded and step-bounded reachability on a four-state chain.
use umbra::engines::check;
use umbra::expr::Binding;
use umbra::prism::{build_state_space, parse_model, ModelKind};
use umbra::props::parse_property;

const SRC: &str = "dtmc
module m
  s : [0..3] init 0;
  [] s=0 -> 0.8 : (s'=1) + 0.1 : (s'=2) + 0.1 : (s'=3);
  [] s=3 -> 0.5 : (s'=0) + 0.5 : (s'=2);
  [] s=1 | s=2 -> true;
endmodule
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = build_state_space(&parse_model(SRC)?, &Binding::new())?;
    for text in ["P=?[F s=1]", "P=?[F<=1 s=1]", "P=?[!(s=2) U s=1]"] {
        let r = check(&m, &parse_property(text, ModelKind::Dtmc)?)?;
        println!("{text:<20} {:?}", r.value);
    }
    Ok(())
}
