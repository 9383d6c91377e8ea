//! Parametric model checking: closed-form rational functions of a model's
//! unbound parameters.
//!
//! [`eliminate_states`] removes the transient states of a parametric dtmc
//! one at a time, rerouting probability mass (and accumulated reward)
//! around each. Ctmc long-run queries are supported when every rate is a
//! constant multiple of one parameter.

mod poly;
mod rf;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub use poly::{gcd, Monomial, Polynomial};
pub use rf::RationalFunction;

use crate::engines::{satisfying_states, EngineError};
use crate::expr::{BinOp, Binding, Expr, Func, UnaryOp};
use crate::graph;
use crate::num;
use crate::prism::{ExplicitModel, ModelKind};
use crate::props::{Operator, PathFormula, Property, Query, RewardBody, StateFormula};

/// Default cap on the terms of any intermediate rational function.
pub const DEFAULT_TERM_LIMIT: usize = 100_000;
/// Largest bottom SCC solved exactly for ctmc long-run queries.
const EXACT_STEADY_LIMIT: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParametricError {
    #[error("not parametric-feasible: {0}")]
    NotFeasible(String),
    #[error("`{0}` is not a rational function of the parameters")]
    NonRational(String),
    #[error("denominator is identically zero{}", if .0.is_empty() { String::new() } else { format!(" after eliminating {}", .0) })]
    ZeroDenominator(String),
    #[error("denominator vanishes at {0}")]
    Pole(String),
    #[error("unbound parameters: {}", .0.join(", "))]
    Unbound(Vec<String>),
    #[error("intermediate rational function exceeds {limit} terms")]
    TermLimit { limit: usize },
    #[error("expected reward is infinite: the target is not reached almost surely")]
    InfiniteReward,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Order in which transient states are eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    /// Fewest predecessor-successor pairs first.
    #[default]
    MinDegree,
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EliminationOptions {
    pub order: EliminationOrder,
    pub term_limit: usize,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        Self { order: EliminationOrder::MinDegree, term_limit: DEFAULT_TERM_LIMIT }
    }
}

/// Converts an expression over parameters to a rational function.
pub fn to_rational_function(e: &Expr) -> Result<RationalFunction, ParametricError> {
    let bad = || ParametricError::NonRational(e.to_string());
    Ok(match e {
        Expr::Num(v) => RationalFunction::constant(v.clone()),
        Expr::Ident(name) => RationalFunction::var(name),
        Expr::Unary(UnaryOp::Neg, inner) => -&to_rational_function(inner)?,
        Expr::Binary(op, a, b) => {
            let a = to_rational_function(a)?;
            let b = to_rational_function(b)?;
            match op {
                BinOp::Add => &a + &b,
                BinOp::Sub => &a - &b,
                BinOp::Mul => &a * &b,
                BinOp::Div => &a * &b.recip()?,
                _ => return Err(bad()),
            }
        }
        Expr::Call(Func::Pow, args) if args.len() == 2 => {
            let exponent = args[1].fold();
            let k = exponent
                .as_rational()
                .filter(|r| r.is_integer())
                .and_then(|r| r.to_integer().to_i32())
                .ok_or_else(bad)?;
            to_rational_function(&args[0])?.pow(k)?
        }
        _ => {
            let folded = e.fold();
            match folded.as_rational() {
                Some(v) => RationalFunction::constant(v.clone()),
                None => return Err(bad()),
            }
        }
    })
}

/// Value of `prop` at the initial state of `m` as a rational function of
/// the model's parameters.
pub fn eliminate_states(m: &ExplicitModel, prop: &Property) -> Result<RationalFunction, ParametricError> {
    eliminate_states_with(m, prop, &EliminationOptions::default())
}

pub fn eliminate_states_with(
    m: &ExplicitModel,
    prop: &Property,
    options: &EliminationOptions,
) -> Result<RationalFunction, ParametricError> {
    let prop = prop.clone().normalize(m.kind).map_err(|e| ParametricError::NotFeasible(e.to_string()))?;
    fold_property(&prop, &mut |q| leaf(m, q, options))
}

fn fold_property(
    p: &Property,
    leaf: &mut dyn FnMut(&Query) -> Result<RationalFunction, ParametricError>,
) -> Result<RationalFunction, ParametricError> {
    use crate::props::ArithOp;
    Ok(match p {
        Property::Query(q) => leaf(q)?,
        Property::Num(v) => RationalFunction::constant(
            num::from_f64_decimal(*v).ok_or_else(|| ParametricError::NonRational(v.to_string()))?,
        ),
        Property::Neg(inner) => -&fold_property(inner, leaf)?,
        Property::Binary(op, a, b) => {
            let a = fold_property(a, leaf)?;
            let b = fold_property(b, leaf)?;
            match op {
                ArithOp::Add => &a + &b,
                ArithOp::Sub => &a - &b,
                ArithOp::Mul => &a * &b,
                ArithOp::Div => &a * &b.recip()?,
            }
        }
    })
}

fn leaf(m: &ExplicitModel, q: &Query, options: &EliminationOptions) -> Result<RationalFunction, ParametricError> {
    if q.has_nested_query() {
        return Err(ParametricError::NotFeasible("nested operators".into()));
    }
    if q.opt.is_some() || q.bound.is_some() {
        return Err(ParametricError::NotFeasible(format!("`{q}` must be a plain =? query")));
    }
    match m.kind {
        ModelKind::Dtmc => dtmc_leaf(m, q, options),
        ModelKind::Ctmc => ctmc_steady_leaf(m, q),
        kind => Err(ParametricError::NotFeasible(format!("{kind} models have no parametric engine"))),
    }
}

/// Sparse parametric chain.
struct Chain {
    succ: Vec<BTreeMap<usize, RationalFunction>>,
}

impl Chain {
    fn from_model(m: &ExplicitModel) -> Result<Self, ParametricError> {
        let mut succ = Vec::with_capacity(m.num_states());
        for choices in &m.choices {
            let mut row: BTreeMap<usize, RationalFunction> = BTreeMap::new();
            if let Some(c) = choices.first() {
                for t in &c.transitions {
                    let w = to_rational_function(&t.weight)?;
                    let slot = row.entry(t.target).or_insert_with(RationalFunction::zero);
                    *slot = &*slot + &w;
                }
            }
            row.retain(|_, w| !w.is_zero());
            succ.push(row);
        }
        Ok(Self { succ })
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.succ.iter().map(|r| r.keys().copied().collect()).collect()
    }
}

fn per_step_reward(m: &ExplicitModel, name: Option<&str>) -> Result<Vec<RationalFunction>, ParametricError> {
    let table = m.reward(name).ok_or_else(|| match name {
        Some(n) => EngineError::UnknownReward(n.to_string()),
        None => EngineError::NoRewards,
    })?;
    (0..m.num_states())
        .map(|s| {
            let mut r = to_rational_function(&table.state[s])?;
            if let Some(t) = table.transition[s].first() {
                r = &r + &to_rational_function(t)?;
            }
            Ok(r)
        })
        .collect()
}

fn dtmc_leaf(m: &ExplicitModel, q: &Query, options: &EliminationOptions) -> Result<RationalFunction, ParametricError> {
    let chain = Chain::from_model(m)?;
    let n = m.num_states();
    match &q.operator {
        Operator::P(PathFormula::Next(f)) => {
            let sat = satisfying_states(m, f)?;
            let mut acc = RationalFunction::zero();
            for (t, w) in &chain.succ[m.initial] {
                if sat[*t] {
                    acc = &acc + w;
                }
            }
            Ok(acc)
        }
        Operator::P(PathFormula::Until { left, right, bound: None }) => {
            let phi1 = satisfying_states(m, left)?;
            let phi2 = satisfying_states(m, right)?;
            reach_probability(chain, m.initial, &phi1, &phi2, options)
        }
        Operator::P(PathFormula::Globally { inner, bound: None }) => {
            let bad: Vec<bool> = satisfying_states(m, &StateFormula::Not(Box::new(inner.clone())))?;
            let p = reach_probability(chain, m.initial, &vec![true; n], &bad, options)?;
            Ok(&RationalFunction::one() - &p)
        }
        Operator::R { reward, body: RewardBody::Reach(target) } => {
            let target = satisfying_states(m, target)?;
            let rewards = per_step_reward(m, reward.as_deref())?;
            reach_reward(chain, m.initial, rewards, &target, options)
        }
        _ => Err(ParametricError::NotFeasible(format!(
            "`{q}`: only unbounded reachability and reachability rewards are parametric on a dtmc"
        ))),
    }
}

fn reach_probability(
    mut chain: Chain,
    initial: usize,
    phi1: &[bool],
    phi2: &[bool],
    options: &EliminationOptions,
) -> Result<RationalFunction, ParametricError> {
    let n = chain.succ.len();
    if phi2[initial] {
        return Ok(RationalFunction::one());
    }
    let preds = graph::reverse(&chain.adjacency());
    let allowed: Vec<bool> = (0..n).map(|s| phi1[s] && !phi2[s]).collect();
    let can = graph::backward_reachable(&preds, phi2, &allowed);
    if !can[initial] {
        return Ok(RationalFunction::zero());
    }
    // Targets absorb; states that cannot reach them are dropped.
    for s in 0..n {
        if phi2[s] || !can[s] {
            chain.succ[s].clear();
        } else {
            chain.succ[s].retain(|t, _| can[*t]);
        }
    }
    let rewards = vec![RationalFunction::zero(); n];
    let (row, _) = eliminate(chain, initial, rewards, phi2, options)?;
    let mut acc = RationalFunction::zero();
    for (t, w) in &row {
        if phi2[*t] {
            acc = &acc + w;
        }
    }
    Ok(acc)
}

fn reach_reward(
    mut chain: Chain,
    initial: usize,
    rewards: Vec<RationalFunction>,
    target: &[bool],
    options: &EliminationOptions,
) -> Result<RationalFunction, ParametricError> {
    let n = chain.succ.len();
    if target[initial] {
        return Ok(RationalFunction::zero());
    }
    let adj = chain.adjacency();
    let preds = graph::reverse(&adj);
    let all = vec![true; n];
    let can = graph::backward_reachable(&preds, target, &all);
    // Almost-sure reachability: no path from the initial state to a state
    // that cannot reach the target.
    let cannot: Vec<bool> = can.iter().map(|b| !b).collect();
    let avoid: Vec<bool> = (0..n).map(|s| !target[s]).collect();
    let doomed = graph::backward_reachable(&preds, &cannot, &avoid);
    if doomed[initial] {
        return Err(ParametricError::InfiniteReward);
    }
    for s in 0..n {
        if target[s] {
            chain.succ[s].clear();
        }
    }
    let (_, reward) = eliminate(chain, initial, rewards, target, options)?;
    Ok(reward)
}

/// Eliminates every state other than `initial` and the absorbing states;
/// returns the initial state's normalized outgoing row and accumulated
/// reward.
fn eliminate(
    mut chain: Chain,
    initial: usize,
    mut reward: Vec<RationalFunction>,
    absorbing: &[bool],
    options: &EliminationOptions,
) -> Result<(BTreeMap<usize, RationalFunction>, RationalFunction), ParametricError> {
    let n = chain.succ.len();
    let reachable = graph::forward_reachable(&chain.adjacency(), initial);
    for (s, row) in chain.succ.iter_mut().enumerate() {
        if !reachable[s] {
            row.clear();
        }
    }
    let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (s, row) in chain.succ.iter().enumerate() {
        for &t in row.keys() {
            if t != s {
                preds[t].insert(s);
            }
        }
    }
    let mut pending: BTreeSet<usize> =
        (0..n).filter(|&s| s != initial && !absorbing[s] && reachable[s]).collect();
    let mut trace: Vec<usize> = Vec::new();
    let limit = options.term_limit;
    let check = |f: &RationalFunction| if f.size() > limit { Err(ParametricError::TermLimit { limit }) } else { Ok(()) };

    while let Some(s) = pick(&pending, &chain, &preds, options.order) {
        pending.remove(&s);
        trace.push(s);
        let mut row = std::mem::take(&mut chain.succ[s]);
        let self_loop = row.remove(&s);
        let mut r = std::mem::replace(&mut reward[s], RationalFunction::zero());
        if let Some(p) = self_loop {
            let stay = &RationalFunction::one() - &p;
            if stay.is_zero() {
                return Err(zero_denominator(&trace));
            }
            let factor = stay.recip()?;
            for w in row.values_mut() {
                *w = &*w * &factor;
                check(w)?;
            }
            r = &r * &factor;
        }
        for &v in row.keys() {
            preds[v].remove(&s);
        }
        let incoming: Vec<usize> = std::mem::take(&mut preds[s]).into_iter().collect();
        for u in incoming {
            let p_us = chain.succ[u].remove(&s).expect("predecessor edge");
            for (&v, p_sv) in &row {
                let add = &p_us * p_sv;
                let slot = chain.succ[u].entry(v).or_insert_with(RationalFunction::zero);
                *slot = &*slot + &add;
                check(slot)?;
                if slot.is_zero() {
                    chain.succ[u].remove(&v);
                    preds[v].remove(&u);
                } else if v != u {
                    preds[v].insert(u);
                }
            }
            if !r.is_zero() {
                reward[u] = &reward[u] + &(&p_us * &r);
                check(&reward[u])?;
            }
        }
    }

    let mut row = std::mem::take(&mut chain.succ[initial]);
    let mut r = std::mem::replace(&mut reward[initial], RationalFunction::zero());
    if let Some(p) = row.remove(&initial) {
        let stay = &RationalFunction::one() - &p;
        if stay.is_zero() {
            return Err(zero_denominator(&trace));
        }
        let factor = stay.recip()?;
        for w in row.values_mut() {
            *w = &*w * &factor;
        }
        r = &r * &factor;
    }
    Ok((row, r))
}

fn zero_denominator(trace: &[usize]) -> ParametricError {
    let states: Vec<String> = trace.iter().map(|s| format!("s{s}")).collect();
    ParametricError::ZeroDenominator(states.join(" "))
}

fn pick(pending: &BTreeSet<usize>, chain: &Chain, preds: &[BTreeSet<usize>], order: EliminationOrder) -> Option<usize> {
    match order {
        EliminationOrder::Ascending => pending.first().copied(),
        EliminationOrder::Descending => pending.last().copied(),
        EliminationOrder::MinDegree => pending.iter().copied().min_by_key(|&s| {
            let outs = chain.succ[s].keys().filter(|&&t| t != s).count();
            (preds[s].len() * outs, s)
        }),
    }
}

/// Long-run queries on a ctmc whose rates are constants times a single
/// parameter: the stationary distribution does not depend on the scale, so
/// it is computed exactly from the unscaled generator.
fn ctmc_steady_leaf(m: &ExplicitModel, q: &Query) -> Result<RationalFunction, ParametricError> {
    let not_feasible = |why: &str| ParametricError::NotFeasible(format!("`{q}`: {why}"));
    let chain = Chain::from_model(m)?;
    let mut scale: Option<String> = None;
    let mut has_constant = false;
    let mut base: Vec<BTreeMap<usize, BigRational>> = Vec::with_capacity(chain.succ.len());
    for row in &chain.succ {
        let mut out = BTreeMap::new();
        for (&t, w) in row {
            let c = match w.as_constant() {
                Some(c) => {
                    has_constant = true;
                    c
                }
                None => {
                    let (name, c) = scaled_parameter(w).ok_or_else(|| not_feasible("rates are not one parameter times a constant"))?;
                    if scale.get_or_insert_with(|| name.clone()) != &name {
                        return Err(not_feasible("rates are scaled by more than one parameter"));
                    }
                    c
                }
            };
            out.insert(t, c);
        }
        base.push(out);
    }
    if scale.is_some() && has_constant {
        return Err(not_feasible("rates mix constants and a parameter"));
    }
    let adj: Vec<Vec<usize>> = base.iter().map(|r| r.keys().copied().collect()).collect();
    let reachable = graph::forward_reachable(&adj, m.initial);
    let bsccs: Vec<Vec<usize>> = graph::bottom_sccs(&adj).into_iter().filter(|b| reachable[b[0]]).collect();
    let [bscc] = bsccs.as_slice() else {
        return Err(not_feasible("more than one reachable bottom SCC"));
    };
    if bscc.len() > EXACT_STEADY_LIMIT {
        return Err(not_feasible("bottom SCC too large for an exact solve"));
    }
    let pi = exact_stationary(&base, bscc).ok_or_else(|| not_feasible("singular generator"))?;
    match &q.operator {
        Operator::S(f) => {
            let sat = satisfying_states(m, f)?;
            let mut acc = BigRational::zero();
            for (&s, p) in bscc.iter().zip(&pi) {
                if sat[s] {
                    acc += p;
                }
            }
            Ok(RationalFunction::constant(acc))
        }
        Operator::R { reward, body: RewardBody::Steady } => {
            let rewards = per_step_reward(m, reward.as_deref())?;
            let mut acc = RationalFunction::zero();
            for (&s, p) in bscc.iter().zip(&pi) {
                acc = &acc + &(&rewards[s] * &RationalFunction::constant(p.clone()));
            }
            Ok(acc)
        }
        _ => Err(not_feasible("only long-run queries are parametric on a ctmc")),
    }
}

/// `(x, c)` when `f = c * x`.
fn scaled_parameter(f: &RationalFunction) -> Option<(String, BigRational)> {
    let den = f.denominator().as_constant()?;
    let mut terms = f.numerator().terms();
    let (m, c) = terms.next()?;
    if terms.next().is_some() {
        return None;
    }
    match m.factors() {
        [(name, 1)] => Some((name.clone(), c / den)),
        _ => None,
    }
}

/// Exact `pi Q = 0, sum pi = 1` on one BSCC by Gaussian elimination.
fn exact_stationary(rates: &[BTreeMap<usize, BigRational>], bscc: &[usize]) -> Option<Vec<BigRational>> {
    let k = bscc.len();
    let local: BTreeMap<usize, usize> = bscc.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // Transposed generator; the last equation becomes normalization.
    let mut a = vec![vec![BigRational::zero(); k + 1]; k];
    for (i, &s) in bscc.iter().enumerate() {
        for (t, r) in &rates[s] {
            if *t == s {
                continue;
            }
            let j = *local.get(t)?;
            a[j][i] += r;
            a[i][i] -= r;
        }
    }
    for x in a[k - 1].iter_mut().take(k) {
        *x = BigRational::one();
    }
    a[k - 1][k] = BigRational::one();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        let prow = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= &f * p;
                }
            }
        }
    }
    let pi: Vec<BigRational> = a.into_iter().map(|row| row[k].clone()).collect();
    pi.iter().all(|p| !p.is_negative()).then_some(pi)
}

/// Partial derivatives of `f` with respect to each of its parameters.
pub fn rf_partials(f: &RationalFunction) -> BTreeMap<String, RationalFunction> {
    f.partials()
}

/// Exact value of `f` at `b`.
pub fn eval_rf(f: &RationalFunction, b: &Binding) -> Result<BigRational, ParametricError> {
    f.eval(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::{build_state_space, parse_model};
    use crate::props::parse_property;

    fn build(src: &str) -> ExplicitModel {
        build_state_space(&parse_model(src).unwrap(), &Binding::new()).unwrap()
    }

    #[test]
    fn retry_skeleton_is_geometric() {
        let m = build(
            "dtmc
            const double psucc; const double pRetry;
            module g
              s : [0..2] init 0;
              [] s=0 -> psucc:(s'=1) + (1-psucc)*pRetry:(s'=0) + (1-psucc)*(1-pRetry):(s'=2);
              [] s>0 -> true;
            endmodule
            label \"success\" = s=1;",
        );
        let f = eliminate_states(&m, &parse_property("P=?[F \"success\"]", ModelKind::Dtmc).unwrap()).unwrap();
        let p = RationalFunction::var("psucc");
        let r = RationalFunction::var("pRetry");
        let one = RationalFunction::one();
        let expected = &p * &(&one - &(&(&one - &p) * &r)).recip().unwrap();
        assert_eq!(f, expected);
    }

    #[test]
    fn series_chain_multiplies() {
        let m = build(
            "dtmc
            const double p; const double q;
            module c
              s : [0..3] init 0;
              [] s=0 -> p:(s'=1) + (1-p):(s'=3);
              [] s=1 -> q:(s'=2) + (1-q):(s'=3);
              [] s>=2 -> true;
            endmodule",
        );
        let f = eliminate_states(&m, &parse_property("P=?[F s=2]", ModelKind::Dtmc).unwrap()).unwrap();
        assert_eq!(f.to_string(), "p*q");
    }

    #[test]
    fn expression_conversion() {
        let e = crate::expr::parse_expr("pow(x, 2) / (1 - x) - -3").unwrap();
        let f = to_rational_function(&e).unwrap();
        let mut b = Binding::new();
        b.set("x", num::rational(1, 2));
        assert_eq!(f.eval(&b).unwrap(), num::rational(7, 2));
        assert!(to_rational_function(&crate::expr::parse_expr("min(x, 1)").unwrap()).is_err());
    }
}
