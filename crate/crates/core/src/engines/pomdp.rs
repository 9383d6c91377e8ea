//! Partially observable MDPs, restricted to memoryless observation-based
//! policies: every such policy is enumerated and its induced chain checked.

use rayon::prelude::*;

use super::dtmc;
use super::{EngineError, EngineOptions, LeafValues, Numeric};
use crate::prism::ExplicitModel;
use crate::props::{Operator, Opt, Query, RewardBody};

pub(crate) fn check_query(
    m: &ExplicitModel,
    num: &Numeric,
    q: &Query,
    dir: Opt,
    options: &EngineOptions,
) -> Result<LeafValues, EngineError> {
    if matches!(q.operator, Operator::S(_) | Operator::R { body: RewardBody::Steady, .. }) {
        return Err(EngineError::KindMismatch { kind: m.kind, reason: "long-run operators need a dtmc or ctmc".into() });
    }
    let n = num.n();
    // Choice count per observation, read off a representative state.
    let mut arity = vec![1usize; m.observation_count];
    for s in 0..n {
        arity[m.observations[s]] = num.choices[s].len().max(1);
    }
    let size: f64 = arity.iter().map(|&a| a as f64).product();
    if size > options.policy_cap as f64 {
        return Err(EngineError::PolicyCap { size, cap: options.policy_cap });
    }
    let count = size as usize;
    let decode = |mut index: usize| -> Vec<usize> {
        arity
            .iter()
            .map(|&a| {
                let c = index % a;
                index /= a;
                c
            })
            .collect()
    };
    let evaluate = |index: usize| -> Result<f64, EngineError> {
        let policy = decode(index);
        let chosen: Vec<usize> = (0..n).map(|s| policy[m.observations[s]]).collect();
        let rows: Vec<Vec<(usize, f64)>> =
            (0..n).map(|s| num.choices[s].get(chosen[s]).cloned().unwrap_or_default()).collect();
        let values = dtmc::check_induced(m, &rows, num.initial, q, Some(&chosen))?;
        Ok(values[num.initial])
    };
    let scores: Vec<Result<f64, EngineError>> = (0..count).into_par_iter().map(evaluate).collect();
    let mut best: Option<(usize, f64)> = None;
    for (index, score) in scores.into_iter().enumerate() {
        let v = score?;
        let improves = match best {
            None => true,
            Some((_, b)) => match dir {
                Opt::Max => v > b,
                Opt::Min => v < b,
            },
        };
        if improves {
            best = Some((index, v));
        }
    }
    let (index, _) = best.expect("at least one policy");
    let policy = decode(index);
    let chosen: Vec<usize> = (0..n).map(|s| policy[m.observations[s]]).collect();
    let rows: Vec<Vec<(usize, f64)>> =
        (0..n).map(|s| num.choices[s].get(chosen[s]).cloned().unwrap_or_default()).collect();
    let values = dtmc::check_induced(m, &rows, num.initial, q, Some(&chosen))?;
    Ok(LeafValues { values, choice: None, observation_policy: Some(policy), iterations: count, residual: 0.0 })
}
