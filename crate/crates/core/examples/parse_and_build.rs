//! Parses a small PRISM model, binds its constant and prints the state space.
use umbra::expr::Binding;
use umbra::num;
use umbra::prism::{build_state_space, parse_model};

const SRC: &str = r#"
dtmc
const double p;
module coin
  s : [0..2] init 0;
  [flip] s=0 -> p : (s'=1) + (1-p) : (s'=2);
  [] s>0 -> true;
endmodule
label "heads" = s=1;
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse_model(SRC)?;
    let mut b = Binding::new();
    b.set("p", num::rational(3, 5));
    let m = build_state_space(&model, &b)?;
    println!("{} states, {} transitions", m.num_states(), m.num_transitions());
    for s in 0..m.num_states() {
        println!("  {s}: {}", m.describe_state(s));
    }
    // Leaving p unbound keeps it symbolic.
    let parametric = build_state_space(&model, &Binding::new())?;
    println!("parametric in {:?}", parametric.parameters);
    Ok(())
}
