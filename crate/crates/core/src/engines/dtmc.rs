//! Discrete-time Markov chains: graph precomputation, linear solves and
//! bounded iteration.

use super::{numeric_rewards, satisfying_states, steady, EngineError, LeafValues, Numeric};
use crate::graph;
use crate::linalg::{self, SparseRow};
use crate::prism::ExplicitModel;
use crate::props::{Horizon, Operator, PathBound, PathFormula, Query, RewardBody};

pub(crate) type Rows = [Vec<(usize, f64)>];

pub(crate) fn check_query(m: &ExplicitModel, num: &Numeric, q: &Query) -> Result<LeafValues, EngineError> {
    Ok(LeafValues::plain(check_induced(m, &num.rows(), num.initial, q, None)?))
}

/// Checks `q` on the chain with the given rows. `chosen[s]` names the
/// choice of `m` each row came from (the first choice when `None`), which
/// selects the transition rewards.
pub(crate) fn check_induced(
    m: &ExplicitModel,
    rows: &Rows,
    initial: usize,
    q: &Query,
    chosen: Option<&[usize]>,
) -> Result<Vec<f64>, EngineError> {
    let values = match &q.operator {
        Operator::P(path) => path_probabilities(m, rows, path)?,
        Operator::R { reward, body } => {
            let r = numeric_rewards(m, reward.as_deref())?;
            let per_step: Vec<f64> = (0..rows.len())
                .map(|s| {
                    let c = chosen.map_or(0, |ch| ch[s]);
                    r.state[s] + r.choice[s].get(c).copied().unwrap_or(0.0)
                })
                .collect();
            match body {
                RewardBody::Reach(target) => {
                    let target = satisfying_states(m, target)?;
                    reach_reward(rows, &per_step, &target)?
                }
                RewardBody::Cumulative(h) => cumulative_reward(rows, &per_step, steps(*h)),
                RewardBody::Instant(h) => instant_reward(rows, &r.state, steps(*h)),
                RewardBody::Steady => {
                    let pi = steady::dtmc_distribution(rows, initial)?;
                    let v: f64 = pi.iter().zip(&per_step).map(|(p, r)| p * r).sum();
                    // Long-run values are reported from the initial state only.
                    vec![v; rows.len()]
                }
            }
        }
        Operator::S(f) => {
            let sat = satisfying_states(m, f)?;
            let pi = steady::dtmc_distribution(rows, initial)?;
            let v: f64 = pi.iter().zip(&sat).filter(|(_, &b)| b).map(|(p, _)| p).sum();
            vec![v; rows.len()]
        }
    };
    Ok(values)
}

pub(crate) fn steps(h: Horizon) -> u64 {
    match h {
        Horizon::Steps(k) => k,
        Horizon::Time(t) => t as u64,
    }
}

fn path_probabilities(m: &ExplicitModel, rows: &Rows, path: &PathFormula) -> Result<Vec<f64>, EngineError> {
    Ok(match path {
        PathFormula::Next(f) => next(rows, &satisfying_states(m, f)?),
        PathFormula::Until { left, right, bound } => {
            let phi1 = satisfying_states(m, left)?;
            let phi2 = satisfying_states(m, right)?;
            match bound {
                None => until(rows, &phi1, &phi2)?,
                Some(b) => bounded_until(rows, &phi1, &phi2, step_bound(*b)),
            }
        }
        PathFormula::Globally { inner, bound } => {
            let bad: Vec<bool> = satisfying_states(m, inner)?.into_iter().map(|b| !b).collect();
            let all = vec![true; rows.len()];
            let reach = match bound {
                None => until(rows, &all, &bad)?,
                Some(b) => bounded_until(rows, &all, &bad, step_bound(*b)),
            };
            reach.into_iter().map(|p| 1.0 - p).collect()
        }
    })
}

pub(crate) fn step_bound(b: PathBound) -> u64 {
    match b {
        PathBound::Steps(k) => k,
        PathBound::Interval(_, hi) => hi as u64,
    }
}

pub(crate) fn successors(rows: &Rows) -> Vec<Vec<usize>> {
    rows.iter()
        .map(|r| r.iter().filter(|(_, p)| *p > 0.0).map(|(t, _)| *t).collect())
        .collect()
}

/// States with probability 0 of satisfying `phi1 U phi2`.
pub(crate) fn prob0(preds: &[Vec<usize>], phi1: &[bool], phi2: &[bool]) -> Vec<bool> {
    graph::backward_reachable(preds, phi2, phi1).into_iter().map(|b| !b).collect()
}

/// States with probability 1 of satisfying `phi1 U phi2`, given `prob0`.
pub(crate) fn prob1(preds: &[Vec<usize>], phi1: &[bool], phi2: &[bool], no: &[bool]) -> Vec<bool> {
    let allowed: Vec<bool> = phi1.iter().zip(phi2).map(|(&a, &b)| a && !b).collect();
    graph::backward_reachable(preds, no, &allowed).into_iter().map(|b| !b).collect()
}

pub(crate) fn next(rows: &Rows, phi: &[bool]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().filter(|(t, _)| phi[*t]).map(|(_, p)| p).sum()).collect()
}

/// Unbounded until by graph precomputation and a linear solve over the
/// remaining states.
pub(crate) fn until(rows: &Rows, phi1: &[bool], phi2: &[bool]) -> Result<Vec<f64>, EngineError> {
    let preds = graph::reverse(&successors(rows));
    let no = prob0(&preds, phi1, phi2);
    let yes = prob1(&preds, phi1, phi2, &no);
    let mut x: Vec<f64> = yes.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
    let maybe: Vec<bool> = (0..rows.len()).map(|s| !no[s] && !yes[s]).collect();
    let sol = solve_restricted(rows, &maybe, |s| {
        rows[s].iter().filter(|(t, _)| yes[*t]).map(|(_, p)| p).sum()
    })?;
    for (s, v) in sol {
        x[s] = v;
    }
    Ok(x)
}

/// Solves `x_s = b(s) + sum_{t in S} P(s,t) x_t` over the states `S` marked
/// in `subset`; returns `(state, value)` pairs.
pub(crate) fn solve_restricted(
    rows: &Rows,
    subset: &[bool],
    b: impl Fn(usize) -> f64,
) -> Result<Vec<(usize, f64)>, EngineError> {
    let states: Vec<usize> = (0..rows.len()).filter(|&s| subset[s]).collect();
    if states.is_empty() {
        return Ok(Vec::new());
    }
    let mut local = vec![usize::MAX; rows.len()];
    for (i, &s) in states.iter().enumerate() {
        local[s] = i;
    }
    let mut a: Vec<SparseRow> = Vec::with_capacity(states.len());
    let mut rhs = Vec::with_capacity(states.len());
    for &s in &states {
        let mut row: SparseRow = vec![(local[s], 1.0)];
        for &(t, p) in &rows[s] {
            if subset[t] {
                if t == s {
                    row[0].1 -= p;
                } else {
                    row.push((local[t], -p));
                }
            }
        }
        a.push(row);
        rhs.push(b(s));
    }
    let x = linalg::solve(&a, &rhs)?;
    Ok(states.into_iter().zip(x).collect())
}

pub(crate) fn bounded_until(rows: &Rows, phi1: &[bool], phi2: &[bool], k: u64) -> Vec<f64> {
    let preds = graph::reverse(&successors(rows));
    let no = prob0(&preds, phi1, phi2);
    let mut x: Vec<f64> = phi2.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let active: Vec<usize> = (0..rows.len()).filter(|&s| !phi2[s] && !no[s]).collect();
    let mut next = x.clone();
    for _ in 0..k {
        for &s in &active {
            next[s] = rows[s].iter().map(|(t, p)| p * x[*t]).sum();
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

/// Expected reward accumulated until reaching `target`; infinite where the
/// target is not reached almost surely.
pub(crate) fn reach_reward(rows: &Rows, reward: &[f64], target: &[bool]) -> Result<Vec<f64>, EngineError> {
    let n = rows.len();
    let preds = graph::reverse(&successors(rows));
    let all = vec![true; n];
    let no = prob0(&preds, &all, target);
    let sure = prob1(&preds, &all, target, &no);
    let mut x: Vec<f64> = (0..n).map(|s| if sure[s] { 0.0 } else { f64::INFINITY }).collect();
    let maybe: Vec<bool> = (0..n).map(|s| sure[s] && !target[s]).collect();
    for (s, v) in solve_restricted(rows, &maybe, |s| reward[s])? {
        x[s] = v;
    }
    Ok(x)
}

pub(crate) fn cumulative_reward(rows: &Rows, reward: &[f64], k: u64) -> Vec<f64> {
    let mut x = vec![0.0; rows.len()];
    let mut next = x.clone();
    for _ in 0..k {
        for (s, row) in rows.iter().enumerate() {
            next[s] = reward[s] + row.iter().map(|(t, p)| p * x[*t]).sum::<f64>();
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

pub(crate) fn instant_reward(rows: &Rows, state_reward: &[f64], k: u64) -> Vec<f64> {
    let mut x = state_reward.to_vec();
    let mut next = x.clone();
    for _ in 0..k {
        for (s, row) in rows.iter().enumerate() {
            next[s] = row.iter().map(|(t, p)| p * x[*t]).sum();
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}
