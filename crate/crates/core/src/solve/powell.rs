use super::{Domain, SolveError};

/// A sweep that improves the objective by at most `f_tolerance` and moves
/// no coordinate by more than `x_tolerance` ends the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowellOptions {
    pub f_tolerance: f64,
    pub x_tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for PowellOptions {
    fn default() -> Self {
        Self { f_tolerance: 1e-12, x_tolerance: 1e-8, max_evaluations: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowellReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

struct Counted<'a, F> {
    f: &'a F,
    evaluations: usize,
    budget: usize,
}

impl<F: Fn(&[f64]) -> Result<f64, SolveError>> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64, SolveError> {
        self.evaluations += 1;
        let v = (self.f)(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }
}

/// Powell's conjugate-direction method inside a box. Line searches are
/// golden-section over the part of the line that stays in the box. The
/// direction set is reset to the coordinate axes every `n` iterations.
pub fn powell_minimize<F>(f: F, x0: &[f64], domains: &[Domain], options: &PowellOptions) -> Result<PowellReport, SolveError>
where
    F: Fn(&[f64]) -> Result<f64, SolveError>,
{
    let n = x0.len();
    let mut counted = Counted { f: &f, evaluations: 0, budget: options.max_evaluations };
    let mut x: Vec<f64> = x0.iter().zip(domains).map(|(v, d)| d.clamp(*v)).collect();
    let mut fx = counted.eval(&x)?;
    let axes = || -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| if i == j { domains[i].width().max(1e-12) } else { 0.0 }).collect()).collect()
    };
    let mut directions = axes();
    let mut iterations = 0;
    if n == 0 {
        return Ok(PowellReport { x, value: fx, evaluations: counted.evaluations, iterations, converged: true });
    }
    loop {
        if counted.exhausted() {
            return Ok(PowellReport { x, value: fx, evaluations: counted.evaluations, iterations, converged: false });
        }
        iterations += 1;
        let start = x.clone();
        let f_start = fx;
        let mut biggest = (0, 0.0);
        for (k, d) in directions.iter().enumerate() {
            let before = fx;
            (x, fx) = line_minimize(&mut counted, &x, fx, d, domains, options.x_tolerance)?;
            if before - fx > biggest.1 {
                biggest = (k, before - fx);
            }
        }
        let moved = x.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if (f_start - fx <= options.f_tolerance && moved <= options.x_tolerance) || fx == 0.0 {
            return Ok(PowellReport { x, value: fx, evaluations: counted.evaluations, iterations, converged: true });
        }
        if iterations % n == 0 {
            directions = axes();
            continue;
        }
        let new_dir: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        if new_dir.iter().any(|v| *v != 0.0) {
            (x, fx) = line_minimize(&mut counted, &x, fx, &new_dir, domains, options.x_tolerance)?;
            directions.remove(biggest.0);
            directions.push(new_dir);
        }
    }
}

/// Minimizes along `x + t d` over the `t` keeping the point in the box.
/// Never returns a point worse than `x`.
fn line_minimize<F: Fn(&[f64]) -> Result<f64, SolveError>>(
    counted: &mut Counted<'_, F>,
    x: &[f64],
    fx: f64,
    d: &[f64],
    domains: &[Domain],
    x_tolerance: f64,
) -> Result<(Vec<f64>, f64), SolveError> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((xi, di), dom) in x.iter().zip(d).zip(domains) {
        if *di == 0.0 {
            continue;
        }
        let (a, b) = ((dom.lo - xi) / di, (dom.hi - xi) / di);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if !(lo < hi) {
        return Ok((x.to_vec(), fx));
    }
    let scale = d.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let tol = 0.1 * x_tolerance / scale;
    let point = |t: f64| -> Vec<f64> {
        x.iter().zip(d).zip(domains).map(|((xi, di), dom)| dom.clamp(xi + t * di)).collect()
    };
    let mut best = (x.to_vec(), fx);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut e = a + GOLDEN * (b - a);
    let (pc, pe) = (point(c), point(e));
    let mut fc = counted.eval(&pc)?;
    let mut fe = counted.eval(&pe)?;
    for (p, v) in [(pc, fc), (pe, fe)] {
        if v < best.1 {
            best = (p, v);
        }
    }
    while b - a > tol && !counted.exhausted() {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - GOLDEN * (b - a);
            let p = point(c);
            fc = counted.eval(&p)?;
            if fc < best.1 {
                best = (p, fc);
            }
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + GOLDEN * (b - a);
            let p = point(e);
            fe = counted.eval(&p)?;
            if fe < best.1 {
                best = (p, fe);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2));
        let doms = vec![Domain::new(-5.0, 5.0).unwrap(); 2];
        let r = powell_minimize(f, &[0.0, 0.0], &doms, &PowellOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_in_unit_interval() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).powi(2));
        let r = powell_minimize(f, &[0.9], &[Domain::UNIT], &PowellOptions::default()).unwrap();
        assert!((r.x[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn coupled_valley_and_budget() {
        let f = |x: &[f64]| Ok((x[0] - x[1]).powi(2) + 0.01 * (x[0] + x[1] - 1.0).powi(2));
        let doms = vec![Domain::UNIT; 2];
        let r = powell_minimize(f, &[0.0, 1.0], &doms, &PowellOptions::default()).unwrap();
        assert!(r.value < 1e-10, "{r:?}");
        let tight = PowellOptions { max_evaluations: 5, ..PowellOptions::default() };
        let r = powell_minimize(f, &[0.0, 1.0], &doms, &tight).unwrap();
        assert!(!r.converged);
        assert!(r.value <= f(&[0.0, 1.0]).unwrap());
    }
}
