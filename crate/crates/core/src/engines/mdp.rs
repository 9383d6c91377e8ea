//! Markov decision processes: qualitative precomputation followed by value
//! iteration, with memoryless policy extraction.

use super::dtmc::{step_bound, steps};
use super::{numeric_rewards, satisfying_states, EngineError, EngineOptions, LeafValues, Numeric};
use crate::prism::ExplicitModel;
use crate::props::{Operator, Opt, PathFormula, Query, RewardBody};

type Choices = [Vec<Vec<(usize, f64)>>];

pub(crate) fn check_query(
    m: &ExplicitModel,
    num: &Numeric,
    q: &Query,
    dir: Opt,
    options: &EngineOptions,
) -> Result<LeafValues, EngineError> {
    let ch = &num.choices;
    let n = ch.len();
    match &q.operator {
        Operator::P(PathFormula::Next(f)) => {
            let phi = satisfying_states(m, f)?;
            let zero = vec![0.0; n];
            let v: Vec<f64> = phi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let (values, choice) = bellman(ch, &v, dir, &zero, None);
            Ok(with_policy(values, choice, 1, 0.0))
        }
        Operator::P(PathFormula::Until { left, right, bound }) => {
            let phi1 = satisfying_states(m, left)?;
            let phi2 = satisfying_states(m, right)?;
            match bound {
                None => until(ch, &phi1, &phi2, dir, options),
                Some(b) => Ok(bounded_until(ch, &phi1, &phi2, step_bound(*b), dir)),
            }
        }
        Operator::P(PathFormula::Globally { inner, bound }) => {
            let bad: Vec<bool> = satisfying_states(m, inner)?.into_iter().map(|b| !b).collect();
            let all = vec![true; n];
            let dual = flip(dir);
            let mut leaf = match bound {
                None => until(ch, &all, &bad, dual, options)?,
                Some(b) => bounded_until(ch, &all, &bad, step_bound(*b), dual),
            };
            for v in &mut leaf.values {
                *v = 1.0 - *v;
            }
            Ok(leaf)
        }
        Operator::R { reward, body } => {
            let r = numeric_rewards(m, reward.as_deref())?;
            let per_choice: Vec<Vec<f64>> = (0..n)
                .map(|s| (0..ch[s].len()).map(|c| r.state[s] + r.choice[s].get(c).copied().unwrap_or(0.0)).collect())
                .collect();
            match body {
                RewardBody::Reach(target) => {
                    let target = satisfying_states(m, target)?;
                    reach_reward(ch, &per_choice, &target, dir, options)
                }
                RewardBody::Cumulative(h) => {
                    let k = steps(*h);
                    let mut v = vec![0.0; n];
                    let mut choice = vec![0; n];
                    for _ in 0..k {
                        let (next, c) = bellman_rewarded(ch, &v, dir, &per_choice, None);
                        v = next;
                        choice = c;
                    }
                    Ok(with_policy(v, choice, k as usize, 0.0))
                }
                RewardBody::Instant(h) => {
                    let k = steps(*h);
                    let mut v = r.state.clone();
                    let zero = vec![0.0; n];
                    let mut choice = vec![0; n];
                    for _ in 0..k {
                        let (next, c) = bellman(ch, &v, dir, &zero, None);
                        v = next;
                        choice = c;
                    }
                    Ok(with_policy(v, choice, k as usize, 0.0))
                }
                RewardBody::Steady => Err(steady_error(m)),
            }
        }
        Operator::S(_) => Err(steady_error(m)),
    }
}

fn steady_error(m: &ExplicitModel) -> EngineError {
    EngineError::KindMismatch { kind: m.kind, reason: "long-run operators need a dtmc or ctmc".into() }
}

fn flip(dir: Opt) -> Opt {
    match dir {
        Opt::Min => Opt::Max,
        Opt::Max => Opt::Min,
    }
}

fn with_policy(values: Vec<f64>, choice: Vec<usize>, iterations: usize, residual: f64) -> LeafValues {
    LeafValues { values, choice: Some(choice), observation_policy: None, iterations, residual }
}

fn better(dir: Opt, a: f64, b: f64) -> bool {
    match dir {
        Opt::Max => a > b,
        Opt::Min => a < b,
    }
}

fn expectation(dist: &[(usize, f64)], v: &[f64]) -> f64 {
    dist.iter().map(|(t, p)| p * v[*t]).sum()
}

/// One Bellman step `base[s] + opt_c sum P(s,c,t) v[t]`. Returns new values
/// and the first optimal choice per state. `allowed` restricts choices.
fn bellman(ch: &Choices, v: &[f64], dir: Opt, base: &[f64], allowed: Option<&[Vec<bool>]>) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; ch.len()];
    let mut pick = vec![0; ch.len()];
    for (s, cs) in ch.iter().enumerate() {
        let mut best: Option<f64> = None;
        for (c, dist) in cs.iter().enumerate() {
            if allowed.is_some_and(|a| !a[s][c]) {
                continue;
            }
            let x = expectation(dist, v);
            if best.is_none_or(|b| better(dir, x, b)) {
                best = Some(x);
                pick[s] = c;
            }
        }
        out[s] = base[s] + best.unwrap_or(0.0);
    }
    (out, pick)
}

fn bellman_rewarded(
    ch: &Choices,
    v: &[f64],
    dir: Opt,
    reward: &[Vec<f64>],
    allowed: Option<&[Vec<bool>]>,
) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![0.0; ch.len()];
    let mut pick = vec![0; ch.len()];
    for (s, cs) in ch.iter().enumerate() {
        let mut best: Option<f64> = None;
        for (c, dist) in cs.iter().enumerate() {
            if allowed.is_some_and(|a| !a[s][c]) {
                continue;
            }
            let x = reward[s][c] + expectation(dist, v);
            if best.is_none_or(|b| better(dir, x, b)) {
                best = Some(x);
                pick[s] = c;
            }
        }
        out[s] = best.unwrap_or(0.0);
    }
    (out, pick)
}

fn positive(dist: &[(usize, f64)]) -> impl Iterator<Item = usize> + '_ {
    dist.iter().filter(|(_, p)| *p > 0.0).map(|(t, _)| *t)
}

/// Least fixed point of `X = seed ∪ {s in allowed : pred(s, X)}`.
fn fixpoint(n: usize, seed: &[bool], allowed: &[bool], pred: impl Fn(usize, &[bool]) -> bool) -> Vec<bool> {
    let mut x = seed.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !x[s] && allowed[s] && pred(s, &x) {
                x[s] = true;
                changed = true;
            }
        }
        if !changed {
            return x;
        }
    }
}

fn phi1_not_phi2(phi1: &[bool], phi2: &[bool]) -> Vec<bool> {
    phi1.iter().zip(phi2).map(|(&a, &b)| a && !b).collect()
}

/// States where the maximum probability of `phi1 U phi2` is zero.
fn prob0a(ch: &Choices, phi1: &[bool], phi2: &[bool]) -> Vec<bool> {
    let allowed = phi1_not_phi2(phi1, phi2);
    let some = fixpoint(ch.len(), phi2, &allowed, |s, x| ch[s].iter().any(|d| positive(d).any(|t| x[t])));
    some.into_iter().map(|b| !b).collect()
}

/// States where the minimum probability of `phi1 U phi2` is zero.
fn prob0e(ch: &Choices, phi1: &[bool], phi2: &[bool]) -> Vec<bool> {
    let allowed = phi1_not_phi2(phi1, phi2);
    let all = fixpoint(ch.len(), phi2, &allowed, |s, x| {
        !ch[s].is_empty() && ch[s].iter().all(|d| positive(d).any(|t| x[t]))
    });
    all.into_iter().map(|b| !b).collect()
}

/// States where the maximum probability is one.
fn prob1e(ch: &Choices, phi1: &[bool], phi2: &[bool]) -> Vec<bool> {
    let n = ch.len();
    let allowed = phi1_not_phi2(phi1, phi2);
    let mut u = vec![true; n];
    loop {
        let r = fixpoint(n, phi2, &allowed, |s, x| {
            ch[s].iter().any(|d| positive(d).all(|t| u[t]) && positive(d).any(|t| x[t]))
        });
        if r == u {
            return u;
        }
        u = r;
    }
}

/// States where the minimum probability is one, given `prob0e`.
fn prob1a(ch: &Choices, phi1: &[bool], phi2: &[bool], no_min: &[bool]) -> Vec<bool> {
    let allowed = phi1_not_phi2(phi1, phi2);
    let escape = fixpoint(ch.len(), no_min, &allowed, |s, x| ch[s].iter().any(|d| positive(d).any(|t| x[t])));
    escape.into_iter().map(|b| !b).collect()
}

/// Picks, among choices within tolerance of the optimum, one that makes
/// progress towards `goal`; ties broken by lowest index. This keeps
/// maximizing policies out of end components that never reach the goal.
fn progress_policy(
    ch: &Choices,
    values: &[f64],
    goal: &[bool],
    candidate: impl Fn(usize, usize) -> bool,
    value_of: impl Fn(usize, usize) -> f64,
    tol: f64,
) -> Vec<usize> {
    let n = ch.len();
    let optimal = |s: usize, c: usize| {
        let x = value_of(s, c);
        candidate(s, c) && (x - values[s]).abs() <= tol * values[s].abs().max(1.0)
    };
    let mut pick: Vec<Option<usize>> = vec![None; n];
    let mut reached = goal.to_vec();
    loop {
        let mut layer = Vec::new();
        for s in 0..n {
            if reached[s] {
                continue;
            }
            if let Some(c) = (0..ch[s].len()).find(|&c| optimal(s, c) && positive(&ch[s][c]).any(|t| reached[t])) {
                layer.push((s, c));
            }
        }
        if layer.is_empty() {
            break;
        }
        for (s, c) in layer {
            reached[s] = true;
            pick[s] = Some(c);
        }
    }
    (0..n)
        .map(|s| pick[s].or_else(|| (0..ch[s].len()).find(|&c| optimal(s, c))).unwrap_or(0))
        .collect()
}

const POLICY_TOL_FACTOR: f64 = 100.0;

fn until(ch: &Choices, phi1: &[bool], phi2: &[bool], dir: Opt, options: &EngineOptions) -> Result<LeafValues, EngineError> {
    let n = ch.len();
    let (no, yes) = match dir {
        Opt::Max => {
            let no = prob0a(ch, phi1, phi2);
            (no, prob1e(ch, phi1, phi2))
        }
        Opt::Min => {
            let no = prob0e(ch, phi1, phi2);
            let yes = prob1a(ch, phi1, phi2, &no);
            (no, yes)
        }
    };
    let maybe: Vec<bool> = (0..n).map(|s| !no[s] && !yes[s]).collect();
    let mut v: Vec<f64> = yes.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
    let (iterations, residual) = iterate(ch, &mut v, &maybe, dir, |_, _| 0.0, None, options)?;
    let tol = POLICY_TOL_FACTOR * options.vi_tolerance;
    let choice = match dir {
        Opt::Max => {
            let goal: Vec<bool> = (0..n).map(|s| phi2[s]).collect();
            progress_policy(ch, &v, &goal, |s, _| !no[s], |s, c| expectation(&ch[s][c], &v), tol)
        }
        Opt::Min => argopt(ch, &v, dir, |_, _| 0.0, None),
    };
    Ok(with_policy(v, choice, iterations, residual))
}

fn argopt(ch: &Choices, v: &[f64], dir: Opt, reward: impl Fn(usize, usize) -> f64, allowed: Option<&[Vec<bool>]>) -> Vec<usize> {
    ch.iter()
        .enumerate()
        .map(|(s, cs)| {
            let mut best: Option<(usize, f64)> = None;
            for (c, dist) in cs.iter().enumerate() {
                if allowed.is_some_and(|a| !a[s][c]) {
                    continue;
                }
                let x = reward(s, c) + expectation(dist, v);
                if best.is_none_or(|(_, b)| better(dir, x, b)) {
                    best = Some((c, x));
                }
            }
            best.map_or(0, |(c, _)| c)
        })
        .collect()
}

/// Gauss–Seidel value iteration over the `active` states until the largest
/// update is below the tolerance.
fn iterate(
    ch: &Choices,
    v: &mut [f64],
    active: &[bool],
    dir: Opt,
    reward: impl Fn(usize, usize) -> f64,
    allowed: Option<&[Vec<bool>]>,
    options: &EngineOptions,
) -> Result<(usize, f64), EngineError> {
    let states: Vec<usize> = (0..ch.len()).filter(|&s| active[s]).collect();
    if states.is_empty() {
        return Ok((0, 0.0));
    }
    let mut change = f64::INFINITY;
    for it in 1..=options.max_iterations {
        change = 0.0;
        for &s in &states {
            let mut best: Option<f64> = None;
            for (c, dist) in ch[s].iter().enumerate() {
                if allowed.is_some_and(|a| !a[s][c]) {
                    continue;
                }
                let x = reward(s, c) + expectation(dist, v);
                if best.is_none_or(|b| better(dir, x, b)) {
                    best = Some(x);
                }
            }
            let new = best.unwrap_or(0.0);
            change = change.max((new - v[s]).abs() / new.abs().max(1.0));
            v[s] = new;
        }
        if change < options.vi_tolerance {
            return Ok((it, change));
        }
    }
    Err(EngineError::NoConvergence { iterations: options.max_iterations, change })
}

fn bounded_until(ch: &Choices, phi1: &[bool], phi2: &[bool], k: u64, dir: Opt) -> LeafValues {
    let n = ch.len();
    let no = match dir {
        Opt::Max => prob0a(ch, phi1, phi2),
        Opt::Min => prob0e(ch, phi1, phi2),
    };
    let mut v: Vec<f64> = phi2.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut choice = vec![0; n];
    let zero = vec![0.0; n];
    for _ in 0..k {
        let (next, pick) = bellman(ch, &v, dir, &zero, None);
        for s in 0..n {
            if !phi2[s] && !no[s] {
                v[s] = next[s];
                choice[s] = pick[s];
            }
        }
    }
    with_policy(v, choice, k as usize, 0.0)
}

fn reach_reward(
    ch: &Choices,
    reward: &[Vec<f64>],
    target: &[bool],
    dir: Opt,
    options: &EngineOptions,
) -> Result<LeafValues, EngineError> {
    let n = ch.len();
    let all = vec![true; n];
    let tol = POLICY_TOL_FACTOR * options.vi_tolerance;
    match dir {
        Opt::Max => {
            // Infinite wherever some policy misses the target with positive
            // probability.
            let no_min = prob0e(ch, &all, target);
            let sure = prob1a(ch, &all, target, &no_min);
            let mut v: Vec<f64> = (0..n).map(|s| if sure[s] { 0.0 } else { f64::INFINITY }).collect();
            let active: Vec<bool> = (0..n).map(|s| sure[s] && !target[s]).collect();
            let (iterations, residual) = iterate(ch, &mut v, &active, dir, |s, c| reward[s][c], None, options)?;
            let choice = argopt(ch, &v, dir, |s, c| reward[s][c], None);
            Ok(with_policy(v, choice, iterations, residual))
        }
        Opt::Min => {
            let sure = prob1e(ch, &all, target);
            let allowed: Vec<Vec<bool>> = ch
                .iter()
                .enumerate()
                .map(|(s, cs)| cs.iter().map(|d| !sure[s] || positive(d).all(|t| sure[t])).collect())
                .collect();
            let active: Vec<bool> = (0..n).map(|s| sure[s] && !target[s]).collect();
            // Start from a proper policy so zero-reward cycles cannot pull the
            // values below the true minimum.
            let proper = progress_policy(ch, &vec![0.0; n], target, |s, c| allowed[s][c], |_, _| 0.0, f64::INFINITY);
            let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|s| ch[s].get(proper[s]).cloned().unwrap_or_default()).collect();
            let mut v: Vec<f64> = (0..n).map(|s| if sure[s] { 0.0 } else { f64::INFINITY }).collect();
            let start = super::dtmc::solve_restricted(&rows, &active, |s| reward[s].get(proper[s]).copied().unwrap_or(0.0))?;
            for (s, x) in start {
                v[s] = x;
            }
            let (iterations, residual) = iterate(ch, &mut v, &active, dir, |s, c| reward[s][c], Some(&allowed), options)?;
            let choice = progress_policy(
                ch,
                &v,
                target,
                |s, c| allowed[s][c],
                |s, c| reward[s][c] + expectation(&ch[s][c], &v),
                tol,
            );
            Ok(with_policy(v, choice, iterations, residual))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// s0: a -> s1 surely; b -> s0 (loop); s1 target; s2 sink reachable by c.
    fn choices() -> Vec<Vec<Vec<(usize, f64)>>> {
        vec![
            vec![vec![(0, 1.0)], vec![(1, 0.5), (2, 0.5)], vec![(1, 0.9), (2, 0.1)]],
            vec![vec![(1, 1.0)]],
            vec![vec![(2, 1.0)]],
        ]
    }

    #[test]
    fn max_and_min_reachability() {
        let ch = choices();
        let all = vec![true; 3];
        let target = vec![false, true, false];
        let o = EngineOptions::default();
        let max = until(&ch, &all, &target, Opt::Max, &o).unwrap();
        assert!((max.values[0] - 0.9).abs() < 1e-9);
        assert_eq!(max.choice.unwrap()[0], 2);
        let min = until(&ch, &all, &target, Opt::Min, &o).unwrap();
        assert_eq!(min.values[0], 0.0);
    }

    #[test]
    fn max_policy_leaves_self_loop() {
        // Looping keeps value 1 only if the exit is also worth 1.
        let ch = vec![vec![vec![(0, 1.0)], vec![(1, 1.0)]], vec![vec![(1, 1.0)]]];
        let leaf = until(&ch, &[true; 2], &[false, true], Opt::Max, &EngineOptions::default()).unwrap();
        assert_eq!(leaf.values[0], 1.0);
        assert_eq!(leaf.choice.unwrap()[0], 1);
    }

    #[test]
    fn min_reward_ignores_free_loops() {
        let ch = vec![vec![vec![(0, 1.0)], vec![(1, 1.0)]], vec![vec![(1, 1.0)]]];
        let reward = vec![vec![0.0, 3.0], vec![0.0]];
        let leaf = reach_reward(&ch, &reward, &[false, true], Opt::Min, &EngineOptions::default()).unwrap();
        assert!((leaf.values[0] - 3.0).abs() < 1e-12);
        let leaf = reach_reward(&ch, &reward, &[false, true], Opt::Max, &EngineOptions::default()).unwrap();
        assert_eq!(leaf.values[0], f64::INFINITY);
    }

    #[test]
    fn bounded_reports_first_step() {
        let ch = choices();
        let leaf = bounded_until(&ch, &[true; 3], &[false, true, false], 1, Opt::Max);
        assert!((leaf.values[0] - 0.9).abs() < 1e-15);
        assert_eq!(leaf.choice.unwrap()[0], 2);
    }
}
