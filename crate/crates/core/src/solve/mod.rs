//! Numeric back-ends for circular dependencies: Newton-Raphson on systems
//! of rational functions, and Powell's method on black-box residuals.

mod newton;
mod powell;

use thiserror::Error;

pub use newton::{newton_system, newton_with_restarts, EquationSystem, NewtonOptions, NewtonReport};
pub use powell::{powell_minimize, PowellOptions, PowellReport};

/// Closed box `[lo, hi]` for one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub const UNIT: Domain = Domain { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, SolveError> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(SolveError::EmptyDomain { lo, hi })
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("empty domain [{lo}, {hi}]")]
    EmptyDomain { lo: f64, hi: f64 },
    #[error("system is not square: {equations} equations in {unknowns} unknowns")]
    NotSquare { equations: usize, unknowns: usize },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no root inside the domain after {attempts} starts (best residual {residual:e})")]
    OutOfDomain { attempts: usize, residual: f64 },
    #[error("objective evaluation failed: {0}")]
    Evaluation(String),
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}
