//! Continuous-time Markov chains: uniformization for transient measures,
//! the embedded chain for unbounded ones.

use super::dtmc::{self, Rows};
use super::{numeric_rewards, satisfying_states, steady, EngineError, EngineOptions, LeafValues, Numeric};
use crate::prism::ExplicitModel;
use crate::props::{Horizon, Operator, PathBound, PathFormula, Query, RewardBody};

/// Uniformization rate as a multiple of the largest exit rate.
pub(crate) const UNIFORMIZATION_FACTOR: f64 = 1.02;
/// Poisson mass allowed outside the truncation window.
pub(crate) const POISSON_EPSILON: f64 = 1e-12;

pub(crate) fn check_query(
    m: &ExplicitModel,
    num: &Numeric,
    q: &Query,
    options: &EngineOptions,
) -> Result<LeafValues, EngineError> {
    let rates = num.rows();
    let n = rates.len();
    let values = match &q.operator {
        Operator::P(PathFormula::Next(f)) => dtmc::next(&embedded(&rates), &satisfying_states(m, f)?),
        Operator::P(PathFormula::Until { left, right, bound }) => {
            let phi1 = satisfying_states(m, left)?;
            let phi2 = satisfying_states(m, right)?;
            match interval(*bound) {
                None => dtmc::until(&embedded(&rates), &phi1, &phi2)?,
                Some((t1, t2)) => time_bounded_until(&rates, &phi1, &phi2, t1, t2, options)?,
            }
        }
        Operator::P(PathFormula::Globally { inner, bound }) => {
            let bad: Vec<bool> = satisfying_states(m, inner)?.into_iter().map(|b| !b).collect();
            let all = vec![true; n];
            let reach = match interval(*bound) {
                None => dtmc::until(&embedded(&rates), &all, &bad)?,
                Some((t1, t2)) => time_bounded_until(&rates, &all, &bad, t1, t2, options)?,
            };
            reach.into_iter().map(|p| 1.0 - p).collect()
        }
        Operator::R { reward, body } => {
            let r = numeric_rewards(m, reward.as_deref())?;
            let rate_reward: Vec<f64> =
                (0..n).map(|s| r.state[s] + r.choice[s].first().copied().unwrap_or(0.0)).collect();
            match body {
                RewardBody::Reach(target) => {
                    let target = satisfying_states(m, target)?;
                    let per_jump: Vec<f64> = (0..n)
                        .map(|s| {
                            let e = exit_rate(&rates[s]);
                            if e > 0.0 {
                                rate_reward[s] / e
                            } else if rate_reward[s] > 0.0 {
                                f64::INFINITY
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    dtmc::reach_reward(&embedded(&rates), &per_jump, &target)?
                }
                RewardBody::Cumulative(h) => cumulative_reward(&rates, &rate_reward, time(*h), options)?,
                RewardBody::Instant(h) => instant_reward(&rates, &r.state, time(*h), options)?,
                RewardBody::Steady => {
                    let pi = steady::ctmc_distribution(&rates, num.initial)?;
                    vec![pi.iter().zip(&rate_reward).map(|(p, r)| p * r).sum(); n]
                }
            }
        }
        Operator::S(f) => {
            let sat = satisfying_states(m, f)?;
            let pi = steady::ctmc_distribution(&rates, num.initial)?;
            vec![pi.iter().zip(&sat).filter(|(_, &b)| b).map(|(p, _)| p).sum(); n]
        }
    };
    Ok(LeafValues::plain(values))
}

fn interval(bound: Option<PathBound>) -> Option<(f64, f64)> {
    match bound? {
        PathBound::Interval(a, b) => Some((a, b)),
        PathBound::Steps(k) => Some((0.0, k as f64)),
    }
}

fn time(h: Horizon) -> f64 {
    match h {
        Horizon::Time(t) => t,
        Horizon::Steps(k) => k as f64,
    }
}

/// Exit rate `E(s)`, the sum of the row.
pub(crate) fn exit_rate(row: &[(usize, f64)]) -> f64 {
    row.iter().map(|(_, r)| r).sum()
}

/// Embedded jump chain; absorbing states get a self-loop.
pub(crate) fn embedded(rates: &Rows) -> Vec<Vec<(usize, f64)>> {
    rates
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let e = exit_rate(row);
            if e > 0.0 {
                row.iter().map(|&(t, r)| (t, r / e)).collect()
            } else {
                vec![(s, 1.0)]
            }
        })
        .collect()
}

/// Uniformized chain `I + Q/q`, with the rows marked in `absorbing`
/// replaced by self-loops.
fn uniformized(rates: &Rows, absorbing: &[bool], q: f64) -> Vec<Vec<(usize, f64)>> {
    rates
        .iter()
        .enumerate()
        .map(|(s, row)| {
            if absorbing[s] {
                return vec![(s, 1.0)];
            }
            let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len() + 1);
            let mut stay = 1.0;
            for &(t, r) in row {
                if t == s {
                    continue;
                }
                out.push((t, r / q));
                stay -= r / q;
            }
            out.push((s, stay));
            out
        })
        .collect()
}

fn uniformization_rate(rates: &Rows, absorbing: &[bool]) -> f64 {
    let max = rates
        .iter()
        .enumerate()
        .filter(|(s, _)| !absorbing[*s])
        .map(|(s, row)| row.iter().filter(|(t, _)| *t != s).map(|(_, r)| r).sum::<f64>())
        .fold(0.0, f64::max);
    UNIFORMIZATION_FACTOR * max
}

/// Truncated Poisson(λ) probabilities: `(left, weights)` with weights for
/// `left..left+weights.len()`, normalized, tail mass below `epsilon`.
/// Terms are built outward from the mode so nothing underflows.
pub(crate) fn poisson_weights(lambda: f64, epsilon: f64, cap: usize) -> Result<(usize, Vec<f64>), EngineError> {
    if lambda <= 0.0 {
        return Ok((0, vec![1.0]));
    }
    let mode = lambda.floor() as usize;
    let mut right = vec![1.0];
    let mut total = 1.0;
    let mut k = mode;
    loop {
        let ratio = lambda / (k + 1) as f64;
        let w = right[right.len() - 1] * ratio;
        if ratio < 1.0 && w / (1.0 - ratio) < epsilon * total {
            break;
        }
        right.push(w);
        total += w;
        k += 1;
        if right.len() > cap {
            return Err(EngineError::Truncation { lambda, cap });
        }
    }
    let mut left = Vec::new();
    let mut k = mode;
    let mut w = 1.0;
    while k > 0 {
        let ratio = k as f64 / lambda;
        let next = w * ratio;
        if ratio < 1.0 && next / (1.0 - ratio) < epsilon * total {
            break;
        }
        left.push(next);
        total += next;
        w = next;
        k -= 1;
        if left.len() + right.len() > cap {
            return Err(EngineError::Truncation { lambda, cap });
        }
    }
    let start = mode - left.len();
    let mut weights: Vec<f64> = left.into_iter().rev().chain(right).collect();
    for w in &mut weights {
        *w /= total;
    }
    Ok((start, weights))
}

fn step(p: &Rows, v: &[f64], out: &mut [f64]) {
    for (s, row) in p.iter().enumerate() {
        out[s] = row.iter().map(|(t, x)| x * v[*t]).sum();
    }
}

/// `sum_k Poisson(k; qt) P^k v` for the uniformized chain.
fn transient(rates: &Rows, absorbing: &[bool], v: Vec<f64>, t: f64, options: &EngineOptions) -> Result<Vec<f64>, EngineError> {
    let q = uniformization_rate(rates, absorbing);
    if q == 0.0 || t == 0.0 {
        return Ok(v);
    }
    let p = uniformized(rates, absorbing, q);
    let (left, weights) = poisson_weights(q * t, POISSON_EPSILON, options.poisson_cap)?;
    let mut x = vec![0.0; v.len()];
    let mut cur = v;
    let mut next = vec![0.0; cur.len()];
    for k in 0..left + weights.len() {
        if k >= left {
            let w = weights[k - left];
            for (xs, c) in x.iter_mut().zip(&cur) {
                *xs += w * c;
            }
        }
        step(&p, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(x)
}

/// `phi1 U[t1,t2] phi2`: the second phase covers `[t1,t2]` with `phi2`
/// absorbing; the first phase propagates that back over `[0,t1]` while
/// staying inside `phi1`.
pub(crate) fn time_bounded_until(
    rates: &Rows,
    phi1: &[bool],
    phi2: &[bool],
    t1: f64,
    t2: f64,
    options: &EngineOptions,
) -> Result<Vec<f64>, EngineError> {
    let n = rates.len();
    let stop: Vec<bool> = (0..n).map(|s| phi2[s] || !phi1[s]).collect();
    let goal: Vec<f64> = phi2.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let y = transient(rates, &stop, goal, t2 - t1, options)?;
    if t1 == 0.0 {
        return Ok(y);
    }
    let leave: Vec<bool> = phi1.iter().map(|&b| !b).collect();
    let start: Vec<f64> = (0..n).map(|s| if phi1[s] { y[s] } else { 0.0 }).collect();
    transient(rates, &leave, start, t1, options)
}

pub(crate) fn instant_reward(rates: &Rows, reward: &[f64], t: f64, options: &EngineOptions) -> Result<Vec<f64>, EngineError> {
    transient(rates, &vec![false; rates.len()], reward.to_vec(), t, options)
}

/// Reward accumulated over `[0,t]`: `sum_k (1/q)(1 - F(k)) P^k r`, with `F`
/// the Poisson(qt) distribution function.
pub(crate) fn cumulative_reward(
    rates: &Rows,
    reward: &[f64],
    t: f64,
    options: &EngineOptions,
) -> Result<Vec<f64>, EngineError> {
    let n = rates.len();
    let none = vec![false; n];
    let q = uniformization_rate(rates, &none);
    if q == 0.0 || t == 0.0 {
        return Ok(reward.iter().map(|r| r * t).collect());
    }
    let p = uniformized(rates, &none, q);
    let (left, weights) = poisson_weights(q * t, POISSON_EPSILON, options.poisson_cap)?;
    let mut x = vec![0.0; n];
    let mut cur = reward.to_vec();
    let mut next = vec![0.0; n];
    let mut cdf = 0.0;
    for k in 0..left + weights.len() {
        if k >= left {
            cdf += weights[k - left];
        }
        let coeff = (1.0 - cdf).max(0.0) / q;
        for (xs, c) in x.iter_mut().zip(&cur) {
            *xs += coeff * c;
        }
        step(&p, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(x)
}
