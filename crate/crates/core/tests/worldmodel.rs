mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::world::{damped_fixed_point, externals, load, pmc};
use common::{build, prop, strategies};
use proptest::prelude::*;
use umbra::engines::check;
use umbra::expr::Binding;
use umbra::num;
use umbra::prism::{parse_model, ModelKind};
use umbra::worldmodel::{
    build_dependency_graph, compute_sccs, verify, verify_scc, verify_with, Dependency, DependencyGraph, Method,
    ModelEntry, ValueSource, VerifyOptions, WorldModel, WorldResult,
};

fn entry(id: &str, src: &str) -> ModelEntry {
    ModelEntry::new(id, parse_model(src).expect("parses"))
}

fn resolved(r: &WorldResult, model: &str, param: &str) -> f64 {
    r.resolved.iter().find(|p| p.model == model && p.param == param).unwrap_or_else(|| panic!("{model}.{param}")).value
}

/// Mutual reachability through the transitive closure.
fn closure_sccs(adj: &[Vec<usize>]) -> BTreeSet<BTreeSet<usize>> {
    let n = adj.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
        for &j in &adj[i] {
            row[j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n).map(|i| (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect()).collect()
}

fn graph_of(adj: &[Vec<usize>]) -> DependencyGraph {
    DependencyGraph {
        vertices: (0..adj.len()).map(|i| format!("m{i}")).collect(),
        edges: adj.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&j| (i, j))).collect(),
        labels: BTreeMap::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sccs_match_transitive_closure(adj in strategies::digraph(10)) {
        let g = graph_of(&adj);
        let part = compute_sccs(&g);
        let got: BTreeSet<BTreeSet<usize>> = part.sccs.iter().map(|c| c.iter().copied().collect()).collect();
        prop_assert_eq!(&got, &closure_sccs(&adj));
        // Sinks first, and levels are longest paths in the condensation.
        for &(a, b) in &g.edges {
            let (ca, cb) = (part.component[a], part.component[b]);
            if ca != cb {
                prop_assert!(cb < ca);
                prop_assert!(part.level[b] > part.level[a]);
            }
        }
        for v in 0..adj.len() {
            let c = part.component[v];
            let preds = g.edges.iter().filter(|&&(a, b)| part.component[b] == c && part.component[a] != c);
            let want = preds.map(|&(a, _)| part.level[a] + 1).max().unwrap_or(0);
            prop_assert_eq!(part.level[v], want);
        }
    }
}

#[test]
fn rad_graph_partition_and_levels() {
    let u = load("rad/manifest.json");
    let g = build_dependency_graph(&u);
    assert_eq!(g.vertices, ["gp", "um", "umc", "dp"]);
    // Model numbers 1..4 as in the dressing example: {(1,4),(2,3),(2,4),(3,2)}.
    let want: BTreeSet<(usize, usize)> = [(1, 4), (2, 3), (2, 4), (3, 2)].iter().map(|&(a, b)| (a - 1, b - 1)).collect();
    assert_eq!(g.edges, want);
    let part = compute_sccs(&g);
    let sets: BTreeSet<Vec<usize>> = part.sccs.iter().cloned().collect();
    assert_eq!(sets, BTreeSet::from([vec![0], vec![1, 2], vec![3]]));
    assert_eq!(part.level, [0, 0, 0, 1]);
    assert_eq!(g.labels[&(1, 2)], ["pOkCorrect", "pNotOkCorrect"]);
}

#[test]
fn world_without_dependencies_is_a_direct_check() {
    let src = "dtmc\nmodule m\n  s : [0..3] init 0;\n  [] s=0 -> 0.8 : (s'=1) + 0.1 : (s'=2) + 0.1 : (s'=3);\n  [] s=3 -> 0.5 : (s'=0) + 0.5 : (s'=2);\n  [] s=1 | s=2 -> true;\nendmodule\n";
    let u = WorldModel::new(vec![entry("m", src)], vec![], vec![]).unwrap();
    let part = compute_sccs(&build_dependency_graph(&u));
    assert_eq!(part.sccs, [vec![0]]);
    assert_eq!(part.level, [0]);
    let r = verify(&u, "m", "P=?[F s=1]").unwrap();
    let direct = check(&build(src, &Binding::new()), &prop("P=?[F s=1]", ModelKind::Dtmc)).unwrap();
    assert_eq!(r.result, direct);
    assert!(r.resolved.is_empty() && r.sccs.is_empty());
}

const DONE_HALF: &str = "dtmc\nmodule m\n  s : [0..2] init 0;\n  [] s=0 -> 0.5 : (s'=1) + 0.5 : (s'=2);\n  [] s>0 -> true;\nendmodule\nlabel \"done\" = s=1;\n";

#[test]
fn shared_dependencies_are_checked_once() {
    let user = "dtmc\nconst double a;\nconst double b;\nmodule m\n  s : [0..2] init 0;\n  [] s=0 -> a*b : (s'=1) + (1-a*b) : (s'=2);\n  [] s>0 -> true;\nendmodule\n";
    let p = "P=?[F \"done\"]";
    let u = WorldModel::new(
        vec![entry("src", DONE_HALF), entry("user", user)],
        vec![Dependency::new("user", "a", "src", p), Dependency::new("user", "b", "src", p)],
        vec![],
    )
    .unwrap();
    let r = verify(&u, "user", "P=?[F s=1]").unwrap();
    // One check of the shared source, one of the query.
    assert_eq!(r.checks, 2);
    assert!((r.result.value.as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(verify(&u, "user", "P=?[F s=1]").unwrap(), r);
}

#[test]
fn decoupled_two_cycle_takes_one_newton_step() {
    let model = |param: &str| {
        format!("dtmc\nconst double {param};\nmodule m\n  s : [0..4] init 0;\n  [] s=0 -> 0.25 : (s'=1) + 0.75 : (s'=2);\n  [] s=1 -> {param} : (s'=3) + (1-{param}) : (s'=4);\n  [] s>1 -> true;\nendmodule\n")
    };
    let u = WorldModel::new(
        vec![entry("a", &model("x")), entry("b", &model("y"))],
        vec![Dependency::new("a", "x", "b", "P=?[F s=2]"), Dependency::new("b", "y", "a", "P=?[F s=1]")],
        vec![],
    )
    .unwrap();
    let r = verify(&u, "a", "P=?[F s=3]").unwrap();
    assert_eq!(r.sccs.len(), 1);
    assert_eq!(r.sccs[0].method, Method::Newton);
    assert!(r.sccs[0].iterations <= 2);
    assert!((resolved(&r, "a", "x") - 0.75).abs() < 1e-12);
    assert!((resolved(&r, "b", "y") - 0.25).abs() < 1e-12);
    assert!((r.result.value.as_f64().unwrap() - 0.25 * 0.75).abs() < 1e-12);
}

#[test]
fn nondeterministic_source_inside_a_cycle_is_rejected() {
    let mdp = "mdp\nconst double x;\nmodule m\n  s : [0..1] init 0;\n  [a] s=0 -> x : (s'=1) + (1-x) : (s'=0);\n  [] s=1 -> true;\nendmodule\nlabel \"done\" = s=1;\n";
    let dtmc = "dtmc\nconst double y;\nmodule m\n  s : [0..2] init 0;\n  [] s=0 -> y : (s'=1) + (1-y) : (s'=2);\n  [] s>0 -> true;\nendmodule\nlabel \"done\" = s=1;\n";
    let err = WorldModel::new(
        vec![entry("a", mdp), entry("b", dtmc)],
        vec![Dependency::new("a", "x", "b", "P=?[F \"done\"]"), Dependency::new("b", "y", "a", "Pmax=?[F \"done\"]")],
        vec![],
    )
    .unwrap_err();
    assert!(err.to_string().contains("`a`"), "{err}");
}

#[test]
fn unknown_model_and_parameter_are_reported_together() {
    let err = WorldModel::new(
        vec![entry("src", DONE_HALF)],
        vec![Dependency::new("ghost", "a", "src", "P=?[F \"done\"]"), Dependency::new("src", "nope", "src", "P=?[F \"done\"]")],
        vec![],
    )
    .unwrap_err();
    let text = err.to_string();
    assert!(text.contains("ghost") && text.contains("nope"), "{text}");
}

#[test]
fn smd_newton_solution_is_a_fixed_point() {
    let u = load("smd/manifest.json");
    let r = verify(&u, "ms", "P=?[F \"largeObject\" & \"detected\"] / P=?[F \"largeObject\"]").unwrap();
    assert_eq!(r.sccs.len(), 1);
    assert_eq!(r.sccs[0].method, Method::Newton);
    assert!(r.sccs[0].residual < 1e-8);
    let ext = externals(&u);
    let bind = |model: &str, params: &[&str]| {
        let mut b = ext.get(model).cloned().unwrap_or_default();
        for p in params {
            b.set(*p, num::from_f64(resolved(&r, model, p)).unwrap());
        }
        b
    };
    let sl = bind("sl", &["pDetect"]);
    let ms = bind("ms", &["pLow", "pMed"]);
    for d in u.dependencies() {
        let b = if d.source == "sl" { &sl } else { &ms };
        let v = pmc(&u, &d.source, &d.property, b);
        assert!((v - resolved(&r, &d.model, &d.param)).abs() < 1e-6, "{}.{}", d.model, d.param);
    }
    let oracle = damped_fixed_point(&u, 0.5);
    for ((model, param), v) in &oracle {
        assert!((resolved(&r, model, param) - v).abs() < 1e-6, "{model}.{param}: {v}");
    }
}

#[test]
fn smd_newton_and_powell_agree() {
    let u = load("smd/manifest.json");
    let q = "P=?[F \"detected\"]";
    let newton = verify(&u, "ms", q).unwrap();
    let options = VerifyOptions { method: Method::Powell, ..VerifyOptions::default() };
    let powell = verify_with(&u, "ms", q, &options).unwrap();
    assert_eq!(powell.sccs[0].method, Method::Powell);
    for p in &newton.resolved {
        assert!((p.value - resolved(&powell, &p.model, &p.param)).abs() < 1e-4, "{}.{}", p.model, p.param);
    }
}

#[test]
fn dpm_fx_takes_the_powell_path() {
    let u = load("dpm_fx/manifest.json");
    let r = verify(&u, "fx", "R{\"time\"}=?[F \"done\"]").unwrap();
    assert_eq!(r.sccs[0].method, Method::Powell);
    assert!(r.sccs[0].residual < 1e-8);
    let oracle = damped_fixed_point(&u, 0.5);
    for ((model, param), v) in &oracle {
        assert!((resolved(&r, model, param) - v).abs() < 1e-4, "{model}.{param}: {v}");
    }
}

#[test]
fn verify_scc_solves_with_external_bindings() {
    let u = load("smd/manifest.json");
    let part = compute_sccs(&build_dependency_graph(&u));
    let sol = verify_scc(&u, &part.sccs[0], &externals(&u), &VerifyOptions::default()).unwrap();
    assert_eq!(sol.values.len(), 3);
    assert!(sol.values.iter().all(|(_, _, v)| (0.0..=1.0).contains(v)));
}

#[test]
fn robofleet_matches_manual_substitution() {
    let u = load("robofleet/manifest.json");
    let r = verify(&u, "sup", "R{\"failures\"}=?[F \"done\"]").unwrap();
    let p1 = pmc(&u, "r1", "Pmax=?[F \"done\"]", &Binding::new());
    let p2 = pmc(&u, "r2", "Pmax=?[F \"done\"]", &Binding::new());
    assert!((resolved(&r, "sup", "pR1") - p1).abs() < 1e-12);
    assert!((resolved(&r, "sup", "pR2") - p2).abs() < 1e-12);
    let mut b = Binding::new();
    b.set("pR1", num::from_f64(p1).unwrap());
    b.set("pR2", num::from_f64(p2).unwrap());
    b.set("nAttempts", num::integer(3));
    let manual = pmc(&u, "sup", "R{\"failures\"}=?[F \"done\"]", &b);
    assert!((r.result.value.as_f64().unwrap() - manual).abs() < 1e-9);
    assert_eq!(r.policies.len(), 2);
    assert!(r.resolved.iter().any(|p| p.param == "nAttempts" && p.source == ValueSource::External));
}

#[test]
fn overrides_replace_dependencies() {
    let u = load("robofleet/manifest.json").with_overrides(&[("sup.pR1".into(), num::rational(1, 2))]).unwrap();
    let r = verify(&u, "sup", "R{\"failures\"}=?[F \"done\"]").unwrap();
    let p = r.resolved.iter().find(|p| p.param == "pR1").unwrap();
    assert_eq!(p.source, ValueSource::Override);
    assert_eq!(p.value, 0.5);
}
