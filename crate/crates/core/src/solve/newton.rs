use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{max_norm, Domain, SolveError};
use crate::parametric::RationalFunction;

/// `x_i = f_i(x)` for rational functions `f_i` over the named unknowns.
#[derive(Debug, Clone)]
pub struct EquationSystem {
    params: Vec<String>,
    functions: Vec<RationalFunction>,
    /// `partials[i][j] = d f_i / d x_j`.
    partials: Vec<Vec<RationalFunction>>,
    domains: Vec<Domain>,
}

impl EquationSystem {
    pub fn new(params: Vec<String>, functions: Vec<RationalFunction>, domains: Vec<Domain>) -> Result<Self, SolveError> {
        if params.len() != functions.len() || domains.len() != params.len() {
            return Err(SolveError::NotSquare { equations: functions.len(), unknowns: params.len() });
        }
        let partials = functions
            .iter()
            .map(|f| {
                let d: BTreeMap<String, RationalFunction> = f.partials();
                params.iter().map(|p| d.get(p).cloned().unwrap_or_else(RationalFunction::zero)).collect()
            })
            .collect();
        Ok(Self { params, functions, partials, domains })
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn functions(&self) -> &[RationalFunction] {
        &self.functions
    }

    fn lookup<'a>(&'a self, x: &'a [f64]) -> impl Fn(&str) -> f64 + 'a {
        move |name| self.params.iter().position(|p| p == name).map_or(f64::NAN, |i| x[i])
    }

    /// `g(x) = x - f(x)`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let v = self.lookup(x);
        self.functions.iter().zip(x).map(|(f, xi)| xi - f.eval_f64(&v)).collect()
    }

    /// Jacobian of the residual, `I - df/dx`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.params.len();
        let v = self.lookup(x);
        DMatrix::from_fn(n, n, |i, j| {
            let d = self.partials[i][j].eval_f64(&v);
            if i == j {
                1.0 - d
            } else {
                -d
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop once the max-norm residual falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Random restarts tried when a start fails.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 200, restarts: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Starts tried, the first included.
    pub attempts: usize,
}

const MAX_HALVINGS: usize = 40;

/// Damped Newton: full step first, halved until the residual norm drops;
/// iterates are clamped into the domains.
pub fn newton_system(sys: &EquationSystem, x0: &[f64], options: &NewtonOptions) -> Result<NewtonReport, SolveError> {
    let clamp = |x: &mut [f64]| {
        for (xi, d) in x.iter_mut().zip(&sys.domains) {
            *xi = d.clamp(*xi);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut g = sys.residual(&x);
    let mut norm = max_norm(&g);
    for iteration in 0..options.max_iterations {
        if norm < options.tolerance {
            return Ok(NewtonReport { x, residual: norm, iterations: iteration, attempts: 1 });
        }
        let j = sys.jacobian(&x);
        let step = j
            .lu()
            .solve(&DVector::from_column_slice(&g))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(SolveError::SingularJacobian { iteration })?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - t * si).collect();
            clamp(&mut trial);
            let gt = sys.residual(&trial);
            let nt = max_norm(&gt);
            if nt < norm {
                accepted = Some((trial, gt, nt));
                break;
            }
            t *= 0.5;
        }
        let Some((nx, ng, nn)) = accepted else {
            return Err(SolveError::NoConvergence { iterations: iteration + 1, residual: norm });
        };
        x = nx;
        g = ng;
        norm = nn;
    }
    if norm < options.tolerance {
        Ok(NewtonReport { x, residual: norm, iterations: options.max_iterations, attempts: 1 })
    } else {
        Err(SolveError::NoConvergence { iterations: options.max_iterations, residual: norm })
    }
}

/// Newton from `x0`, then from up to `options.restarts` uniform random
/// points in the domains until one converges.
pub fn newton_with_restarts(
    sys: &EquationSystem,
    x0: &[f64],
    options: &NewtonOptions,
) -> Result<NewtonReport, SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best = f64::INFINITY;
    let mut first_error = None;
    let mut start = x0.to_vec();
    for attempt in 0..=options.restarts {
        match newton_system(sys, &start, options) {
            Ok(mut report) => {
                report.attempts = attempt + 1;
                return Ok(report);
            }
            Err(e) => {
                if let SolveError::NoConvergence { residual, .. } = e {
                    best = best.min(residual);
                }
                first_error.get_or_insert(e);
            }
        }
        start = sys.domains.iter().map(|d| d.lo + rng.random::<f64>() * d.width()).collect();
    }
    if options.restarts == 0 {
        return Err(first_error.expect("one attempt"));
    }
    Err(SolveError::OutOfDomain { attempts: options.restarts + 1, residual: best })
}
