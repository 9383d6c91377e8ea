#![allow(dead_code)]

use std::path::PathBuf;

use num_rational::BigRational;
use umbra::expr::Binding;
use umbra::num;
use umbra::prism::{build_state_space, parse_model, ExplicitModel, ModelKind};
use umbra::props::{parse_property, Property};

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(path)
}

pub fn build(src: &str, binding: &Binding) -> ExplicitModel {
    build_state_space(&parse_model(src).expect("model parses"), binding).expect("model builds")
}

pub fn build_file(path: &str, binding: &Binding) -> ExplicitModel {
    let text = std::fs::read_to_string(fixture(path)).expect("fixture exists");
    build(&text, binding)
}

pub fn prop(text: &str, kind: ModelKind) -> Property {
    parse_property(text, kind).expect("property parses")
}

pub fn binding(pairs: &[(&str, f64)]) -> Binding {
    let mut b = Binding::new();
    for (name, v) in pairs {
        b.set(*name, num::from_f64_decimal(*v).expect("finite"));
    }
    b
}

pub fn rational(n: i64, d: i64) -> BigRational {
    num::rational(n, d)
}

/// Random parametric dtmc as PRISM text. Each state splits its mass by
/// stick-breaking over factors drawn from the parameters and constants, so
/// every row sums to one for any binding in (0,1). State `n-1` is the goal
/// and state `n-2` a sink.
#[derive(Debug, Clone)]
pub struct RandomChain {
    pub states: usize,
    pub params: Vec<String>,
    /// Per transient state: (successor, factor) where factor is a parameter
    /// index or a constant in hundredths.
    pub rows: Vec<Vec<(usize, Factor)>>,
}

#[derive(Debug, Clone, Copy)]
pub enum Factor {
    Param(usize),
    Const(u32),
}

impl RandomChain {
    pub fn source(&self) -> String {
        let mut s = String::from("dtmc\n");
        for p in &self.params {
            s.push_str(&format!("const double {p};\n"));
        }
        s.push_str(&format!("module chain\n  s : [0..{}] init 0;\n", self.states - 1));
        for (i, row) in self.rows.iter().enumerate() {
            let mut rest = String::from("1");
            let mut branches = Vec::new();
            for (k, (succ, f)) in row.iter().enumerate() {
                let factor = match f {
                    Factor::Param(j) => self.params[*j].clone(),
                    Factor::Const(c) => format!("{c}/100"),
                };
                if k + 1 == row.len() {
                    branches.push(format!("{rest} : (s'={succ})"));
                } else {
                    branches.push(format!("{rest}*{factor} : (s'={succ})"));
                    rest = format!("{rest}*(1-{factor})");
                }
            }
            s.push_str(&format!("  [] s={i} -> {};\n", branches.join(" + ")));
        }
        s.push_str(&format!("  [] s>={} -> true;\nendmodule\n", self.states - 2));
        s.push_str(&format!("label \"goal\" = s={};\n", self.states - 1));
        s
    }
}

/// Random finite model as explicit rows: per state, choices of
/// (successor, integer weight). The last state is the absorbing goal.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub rows: Vec<Vec<Vec<(usize, u32)>>>,
}

impl RandomModel {
    pub fn n(&self) -> usize {
        self.rows.len() + 1
    }

    pub fn source(&self, kind: &str, observable: bool) -> String {
        let n = self.n();
        let mut s = format!("{kind}\n");
        if observable {
            s.push_str("observables s endobservables\n");
        }
        s.push_str(&format!("module m\n  s : [0..{}] init 0;\n", n - 1));
        for (i, choices) in self.rows.iter().enumerate() {
            for (k, choice) in choices.iter().enumerate() {
                let total: u32 = choice.iter().map(|(_, w)| w).sum();
                let branches: Vec<String> = choice.iter().map(|(t, w)| format!("{w}/{total} : (s'={t})")).collect();
                let action = if kind == "dtmc" || kind == "ctmc" { String::new() } else { format!("a{k}") };
                if kind == "ctmc" {
                    let rates: Vec<String> = choice.iter().map(|(t, w)| format!("{w} : (s'={t})")).collect();
                    s.push_str(&format!("  [] s={i} -> {};\n", rates.join(" + ")));
                } else {
                    s.push_str(&format!("  [{action}] s={i} -> {};\n", branches.join(" + ")));
                }
            }
        }
        if kind != "ctmc" {
            s.push_str(&format!("  [] s={} -> true;\n", n - 1));
        }
        s.push_str(&format!("endmodule\nlabel \"goal\" = s={};\n", n - 1));
        s
    }

    /// Bellman iteration from zero, independent of the engines.
    pub fn value_iteration(&self, maximize: bool) -> f64 {
        let n = self.n();
        let mut x = vec![0.0; n];
        x[n - 1] = 1.0;
        for _ in 0..1_000_000 {
            let mut change: f64 = 0.0;
            for (i, choices) in self.rows.iter().enumerate() {
                let vals = choices.iter().map(|c| {
                    let total: u32 = c.iter().map(|(_, w)| w).sum();
                    c.iter().map(|(t, w)| *w as f64 / total as f64 * x[*t]).sum::<f64>()
                });
                let v = if maximize { vals.fold(f64::MIN, f64::max) } else { vals.fold(f64::MAX, f64::min) };
                change = change.max((v - x[i]).abs());
                x[i] = v;
            }
            if change < 1e-15 {
                break;
            }
        }
        x[0]
    }
}

pub mod strategies {
    use super::*;
    use proptest::prelude::*;

    pub fn factor(params: usize) -> impl Strategy<Value = Factor> {
        prop_oneof![(0..params).prop_map(Factor::Param), (5u32..95).prop_map(Factor::Const)]
    }

    /// Chains with 3..=15 states and 1..=3 parameters.
    pub fn chain() -> impl Strategy<Value = RandomChain> {
        (3usize..=15, 1usize..=3).prop_flat_map(|(n, p)| {
            let row = proptest::collection::vec((0..n, factor(p)), 1..=3);
            proptest::collection::vec(row, n - 2).prop_map(move |rows| RandomChain {
                states: n,
                params: (0..p).map(|i| format!("p{i}")).collect(),
                rows,
            })
        })
    }

    /// Binding with values k/100, k in 5..95.
    pub fn values(params: usize) -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::vec(5i64..95, params)
    }

    /// Models with 2..=`max_states` states and up to `max_choices` choices
    /// per state.
    pub fn random_model(max_states: usize, max_choices: usize) -> impl Strategy<Value = RandomModel> {
        (2..=max_states).prop_flat_map(move |n| {
            let choice = proptest::collection::vec((0..n, 1u32..10), 1..=3);
            let state = proptest::collection::vec(choice, 1..=max_choices);
            proptest::collection::vec(state, n - 1).prop_map(|rows| RandomModel { rows })
        })
    }

    /// Digraph on up to `max` vertices as an adjacency list.
    pub fn digraph(max: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
        (1..=max).prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(0..n, 0..=3), n))
    }
}

pub mod world {
    use std::collections::BTreeMap;

    use umbra::cli::manifest::Manifest;
    use umbra::engines::check;
    use umbra::expr::Binding;
    use umbra::infer::infer;
    use umbra::num;
    use umbra::prism::build_state_space;
    use umbra::props::parse_property;
    use umbra::worldmodel::WorldModel;

    pub fn load(manifest: &str) -> WorldModel {
        Manifest::load(&super::fixture(manifest)).expect("manifest loads").world_model().expect("manifest validates")
    }

    /// External values of every model, inferred directly.
    pub fn externals(u: &WorldModel) -> BTreeMap<String, Binding> {
        let mut out: BTreeMap<String, Binding> = BTreeMap::new();
        for e in u.externals() {
            out.entry(e.model.clone()).or_default().set(e.param.clone(), infer(&e.spec).expect("infers"));
        }
        out
    }

    /// Checks `property` on `model` with the given constants bound.
    pub fn pmc(u: &WorldModel, model: &str, property: &str, binding: &Binding) -> f64 {
        let entry = u.model(model).expect("model");
        let m = build_state_space(&entry.source, binding).expect("builds");
        let p = parse_property(property, entry.kind()).expect("parses");
        check(&m, &p).expect("checks").value.as_f64().expect("numeric")
    }

    /// Damped fixed-point iteration x <- (1-a) x + a F(x) over every
    /// dependency of a world model whose dependencies all lie on one cycle,
    /// starting from the domain midpoints.
    pub fn damped_fixed_point(u: &WorldModel, damping: f64) -> BTreeMap<(String, String), f64> {
        let base = externals(u);
        let deps = u.dependencies();
        let mut x: Vec<f64> = (0..deps.len()).map(|k| u.domain(k).midpoint()).collect();
        for _ in 0..100_000 {
            let mut next = Vec::with_capacity(deps.len());
            for d in deps {
                let mut b = base.get(&d.source).cloned().unwrap_or_default();
                for (k, other) in deps.iter().enumerate() {
                    if other.model == d.source {
                        b.set(other.param.clone(), num::from_f64(x[k]).expect("finite"));
                    }
                }
                next.push(pmc(u, &d.source, &d.property, &b));
            }
            let mut change: f64 = 0.0;
            for (xi, fi) in x.iter_mut().zip(&next) {
                let v = (1.0 - damping) * *xi + damping * fi;
                change = change.max((v - *xi).abs());
                *xi = v;
            }
            if change < 1e-13 {
                break;
            }
        }
        deps.iter().zip(x).map(|(d, v)| ((d.model.clone(), d.param.clone()), v)).collect()
    }
}
