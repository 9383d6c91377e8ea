//! Closed-form reachability of a parametric chain by state elimination.
use umbra::expr::Binding;
use umbra::num;
use umbra::parametric::{eliminate_states, eval_rf, rf_partials};
use umbra::prism::{build_state_space, parse_model, ModelKind};
use umbra::props::parse_property;

const SRC: &str = "dtmc
const double psucc;
const double pRetry;
module pick
  s : [0..2] init 0;
  [try] s=0 -> psucc : (s'=1) + (1-psucc)*pRetry : (s'=0) + (1-psucc)*(1-pRetry) : (s'=2);
  [] s>0 -> true;
endmodule
label \"success\" = s=1;
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = build_state_space(&parse_model(SRC)?, &Binding::new())?;
    let f = eliminate_states(&m, &parse_property("P=?[F \"success\"]", ModelKind::Dtmc)?)?;
    println!("P(success) = {f}");
    for (var, d) in rf_partials(&f) {
        println!("  d/d{var} = {d}");
    }
    let mut b = Binding::new();
    b.set("psucc", num::rational(1, 2));
    b.set("pRetry", num::rational(1, 2));
    println!("at psucc = pRetry = 1/2: {}", eval_rf(&f, &b)?);
    Ok(())
}
