use proptest::prelude::*;
use umbra::expr::parse_expr;
use umbra::parametric::{rf_partials, to_rational_function, RationalFunction};
use umbra::solve::{newton_system, newton_with_restarts, powell_minimize, Domain, EquationSystem, NewtonOptions, PowellOptions};

fn rf(text: &str) -> RationalFunction {
    to_rational_function(&parse_expr(text).expect("parses")).expect("rational")
}

fn system(params: &[&str], fs: &[&str], dom: Domain) -> EquationSystem {
    EquationSystem::new(params.iter().map(|p| p.to_string()).collect(), fs.iter().map(|f| rf(f)).collect(), vec![dom; params.len()])
        .expect("square system")
}

#[test]
fn scalar_linear_fixed_point() {
    let sys = system(&["x"], &["1/2 + x/4"], Domain::UNIT);
    let r = newton_system(&sys, &[0.5], &NewtonOptions::default()).unwrap();
    assert!((r.x[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!(r.iterations <= 2);
}

#[test]
fn affine_systems_take_at_most_two_iterations() {
    let sys = system(&["x", "y", "z"], &["0.2 + 0.3*y - 0.1*z", "0.1 + 0.5*x", "0.4*x + 0.2*y + 0.05"], Domain::UNIT);
    let r = newton_system(&sys, &[0.5, 0.5, 0.5], &NewtonOptions::default()).unwrap();
    assert!(r.iterations <= 2, "{r:?}");
    assert!(sys.residual(&r.x).iter().all(|g| g.abs() < 1e-10));
}

#[test]
fn nonlinear_root_at_origin() {
    let dom = Domain::new(-1.0, 1.0).unwrap();
    let sys = system(&["x", "y"], &["y*y", "x/2"], dom);
    let r = newton_system(&sys, &[0.1, 0.1], &NewtonOptions::default()).unwrap();
    assert!(r.x.iter().all(|v| v.abs() < 1e-8), "{r:?}");
}

#[test]
fn restarts_are_deterministic() {
    let sys = system(&["x", "y"], &["x*y + 1/4", "(x + y)/3 + 1/10"], Domain::UNIT);
    let a = newton_with_restarts(&sys, &[0.5, 0.5], &NewtonOptions::default()).unwrap();
    let b = newton_with_restarts(&sys, &[0.5, 0.5], &NewtonOptions::default()).unwrap();
    assert_eq!(a, b);
    assert!(sys.residual(&a.x).iter().all(|g| g.abs() < 1e-10));
}

#[test]
fn powell_finds_the_bowl_minimum() {
    let f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2));
    let dom = vec![Domain::new(-10.0, 10.0).unwrap(); 2];
    let r = powell_minimize(f, &[0.0, 0.0], &dom, &PowellOptions::default()).unwrap();
    assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-6, "{r:?}");
    let g = |x: &[f64]| Ok((x[0] - 0.3).powi(2));
    let r = powell_minimize(g, &[0.0], &[Domain::UNIT], &PowellOptions::default()).unwrap();
    assert!((r.x[0] - 0.3).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn powell_never_ends_above_the_start(cx in -3.0f64..3.0, cy in -3.0f64..3.0, a in 0.1f64..10.0, x0 in -5.0f64..5.0, y0 in -5.0f64..5.0) {
        let f = move |x: &[f64]| Ok(a * (x[0] - cx).powi(2) + (x[1] - cy).powi(2) + 0.5 * (x[0] - cx) * (x[1] - cy));
        let dom = vec![Domain::new(-5.0, 5.0).unwrap(); 2];
        let r = powell_minimize(f, &[x0, y0], &dom, &PowellOptions::default()).unwrap();
        prop_assert!(r.value <= f(&[x0, y0]).unwrap());
        prop_assert!(r.value < 1e-10, "{:?}", r);
    }
}

/// Polynomial text over x and y from (coefficient, x exponent, y exponent).
fn poly_text(terms: &[(i32, u32, u32)]) -> String {
    let mut parts = vec!["1".to_string()];
    for &(c, ex, ey) in terms {
        let mut t = c.to_string();
        for _ in 0..ex {
            t.push_str("*x");
        }
        for _ in 0..ey {
            t.push_str("*y");
        }
        parts.push(t);
    }
    parts.join(" + ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    /// Denominators have non-negative coefficients plus 1, so there is no
    /// pole on the unit square.
    #[test]
    fn partials_match_finite_differences(
        num in proptest::collection::vec((-9i32..10, 0u32..4, 0u32..4), 1..5),
        den in proptest::collection::vec((0i32..10, 0u32..4, 0u32..4), 0..4),
        px in 0.05f64..0.95,
        py in 0.05f64..0.95,
    ) {
        let f = rf(&format!("({}) / ({})", poly_text(&num), poly_text(&den)));
        let partials = rf_partials(&f);
        let h = 1e-5;
        let at = |x: f64, y: f64| f.eval_f64(&|v: &str| if v == "x" { x } else { y });
        let fd = [(at(px + h, py) - at(px - h, py)) / (2.0 * h), (at(px, py + h) - at(px, py - h)) / (2.0 * h)];
        for (k, var) in ["x", "y"].iter().enumerate() {
            let exact = partials.get(*var).map_or(0.0, |d| d.eval_f64(&|v: &str| if v == "x" { px } else { py }));
            let scale = exact.abs().max(1e-9);
            prop_assert!((fd[k] - exact).abs() / scale < 1e-6, "d/d{var} {} vs {}", exact, fd[k]);
        }
    }
}

#[test]
fn retry_partial_against_central_difference() {
    let f = rf("p / (1 - (1 - p)*r)");
    let d = &rf_partials(&f)["p"];
    let at = |p: f64| f.eval_f64(&|v: &str| if v == "p" { p } else { 0.5 });
    let h = 1e-6;
    let fd = (at(0.5 + h) - at(0.5 - h)) / (2.0 * h);
    let exact = d.eval_f64(&|_: &str| 0.5);
    assert!((fd - exact).abs() < 1e-8);
    assert_eq!(rf_partials(&rf("x*y"))["y"], rf("x"));
    assert!(rf_partials(&rf("3/7")).is_empty());
}
