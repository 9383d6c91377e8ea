//! Long-run distributions: one stationary distribution per bottom SCC,
//! weighted by the probability of reaching that BSCC from the initial state.

use super::dtmc::{self, Rows};
use super::{ctmc, EngineError, Numeric};
use crate::graph;
use crate::linalg::{self, SparseRow, DENSE_LIMIT};
use crate::prism::{ExplicitModel, ModelKind};

const POWER_TOL: f64 = 1e-15;
const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// Steady-state distribution from the initial state of a dtmc or ctmc.
pub fn compute_steady_state(m: &ExplicitModel) -> Result<Vec<f64>, EngineError> {
    let num = Numeric::from_model(m)?;
    let rows = num.rows();
    match m.kind {
        ModelKind::Dtmc => dtmc_distribution(&rows, num.initial),
        ModelKind::Ctmc => ctmc_distribution(&rows, num.initial),
        kind => Err(EngineError::KindMismatch { kind, reason: "steady state needs a dtmc or ctmc".into() }),
    }
}

pub(crate) fn dtmc_distribution(rows: &Rows, initial: usize) -> Result<Vec<f64>, EngineError> {
    distribution(rows, rows, initial)
}

pub(crate) fn ctmc_distribution(rates: &Rows, initial: usize) -> Result<Vec<f64>, EngineError> {
    distribution(rates, &ctmc::embedded(rates), initial)
}

/// `rates` are the generator's off-diagonal entries (a dtmc's probabilities
/// work as well since `P - I` has the same stationary vectors); `jumps` is
/// the jump chain used for BSCC reachability.
fn distribution(rates: &Rows, jumps: &Rows, initial: usize) -> Result<Vec<f64>, EngineError> {
    let n = rates.len();
    let succ = dtmc::successors(jumps);
    let reachable = graph::forward_reachable(&succ, initial);
    let bsccs: Vec<Vec<usize>> = graph::bottom_sccs(&succ)
        .into_iter()
        .filter(|b| reachable[b[0]])
        .collect();
    let mut pi = vec![0.0; n];
    let all = vec![true; n];
    for (id, b) in bsccs.iter().enumerate() {
        let weight = if bsccs.len() == 1 {
            1.0
        } else {
            let mut inside = vec![false; n];
            for &s in b {
                inside[s] = true;
            }
            dtmc::until(jumps, &all, &inside)?[initial]
        };
        if weight == 0.0 {
            continue;
        }
        let local = bscc_distribution(rates, b).map_err(|detail| EngineError::SteadyState { bscc: id, detail })?;
        for (&s, p) in b.iter().zip(local) {
            pi[s] += weight * p;
        }
    }
    Ok(pi)
}

/// Stationary distribution of the chain restricted to one BSCC.
fn bscc_distribution(rates: &Rows, b: &[usize]) -> Result<Vec<f64>, String> {
    if b.len() == 1 {
        return Ok(vec![1.0]);
    }
    let mut local = vec![usize::MAX; rates.len()];
    for (i, &s) in b.iter().enumerate() {
        local[s] = i;
    }
    let k = b.len();
    // Off-diagonal generator entries inside the BSCC (no rate leaves it).
    let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut exit = vec![0.0; k];
    for (i, &s) in b.iter().enumerate() {
        for &(t, r) in &rates[s] {
            if t != s && r > 0.0 {
                out[i].push((local[t], r));
                exit[i] += r;
            }
        }
    }
    if k <= DENSE_LIMIT {
        // Columns of Q become rows of the transposed system; the last
        // balance equation is replaced by normalization.
        let mut a: Vec<SparseRow> = vec![Vec::new(); k];
        for i in 0..k {
            a[i].push((i, -exit[i]));
        }
        for (i, row) in out.iter().enumerate() {
            for &(j, r) in row {
                a[j].push((i, r));
            }
        }
        a[k - 1] = (0..k).map(|i| (i, 1.0)).collect();
        let mut rhs = vec![0.0; k];
        rhs[k - 1] = 1.0;
        let x = linalg::solve(&a, &rhs).map_err(|e| e.to_string())?;
        return Ok(x.into_iter().map(|v| v.max(0.0)).collect());
    }
    power_iteration(&out, &exit)
}

fn power_iteration(out: &[Vec<(usize, f64)>], exit: &[f64]) -> Result<Vec<f64>, String> {
    let k = out.len();
    let q = ctmc::UNIFORMIZATION_FACTOR * exit.iter().cloned().fold(0.0, f64::max);
    let mut pi = vec![1.0 / k as f64; k];
    let mut next = vec![0.0; k];
    for _ in 0..POWER_MAX_ITERATIONS {
        for i in 0..k {
            next[i] = pi[i] * (1.0 - exit[i] / q);
        }
        for (i, row) in out.iter().enumerate() {
            for &(j, r) in row {
                next[j] += pi[i] * r / q;
            }
        }
        let total: f64 = next.iter().sum();
        let mut change: f64 = 0.0;
        for i in 0..k {
            next[i] /= total;
            change = change.max((next[i] - pi[i]).abs());
        }
        std::mem::swap(&mut pi, &mut next);
        if change < POWER_TOL {
            return Ok(pi);
        }
    }
    Err(format!("power iteration did not converge in {POWER_MAX_ITERATIONS} iterations"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_detailed_balance() {
        let rates = vec![vec![(1, 2.0)], vec![(0, 1.0)]];
        let pi = ctmc_distribution(&rates, 0).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_bsccs_weighted_by_reachability() {
        // s0 -> s1 (absorbing) w.p. 0.25, -> {s2 <-> s3} w.p. 0.75
        let rows = vec![
            vec![(1, 0.25), (2, 0.75)],
            vec![(1, 1.0)],
            vec![(3, 1.0)],
            vec![(2, 1.0)],
        ];
        let pi = dtmc_distribution(&rows, 0).unwrap();
        assert!((pi[1] - 0.25).abs() < 1e-12);
        assert!((pi[2] - 0.375).abs() < 1e-12);
        assert!((pi[3] - 0.375).abs() < 1e-12);
        assert_eq!(pi[0], 0.0);
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let out = vec![vec![(1, 1.0)], vec![(0, 2.0), (2, 1.0)], vec![(1, 2.0)]];
        let exit = vec![1.0, 3.0, 2.0];
        let pi = power_iteration(&out, &exit).unwrap();
        // Birth-death with λ=1, μ=2: π ∝ (1, 1/2, 1/4).
        let z = 1.75;
        for (p, e) in pi.iter().zip([1.0 / z, 0.5 / z, 0.25 / z]) {
            assert!((p - e).abs() < 1e-12);
        }
    }
}
