//! Numeric model checking of fully bound explicit models.
//!
//! [`check`] dispatches on the model kind. Every leaf query of a
//! [`Property`] is evaluated at the initial state and the property's
//! arithmetic is folded over the leaf values.

mod ctmc;
mod dtmc;
mod mdp;
mod pomdp;
mod steady;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::expr::{ExprError, Value};
use crate::linalg::LinalgError;
use crate::num;
use crate::prism::{ExplicitModel, ModelKind};
use crate::props::{Opt, Property, Query, StateFormula};

pub use steady::compute_steady_state;

/// Slack allowed on probabilities before clamping to [0,1].
pub const PROBABILITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Value-iteration stopping threshold on the max-norm update.
    pub vi_tolerance: f64,
    pub max_iterations: usize,
    /// Largest number of observation-based policies enumerated for a pomdp.
    pub policy_cap: usize,
    /// Largest number of Poisson terms used by uniformization.
    pub poisson_cap: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self { vi_tolerance: 1e-8, max_iterations: 1_000_000, policy_cap: 1_000_000, poisson_cap: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("property does not fit a {kind}: {reason}")]
    KindMismatch { kind: ModelKind, reason: String },
    #[error("{0}")]
    Unsupported(String),
    #[error("model still has unbound parameters: {}", .0.join(", "))]
    Parametric(Vec<String>),
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),
    #[error("model has no reward structure")]
    NoRewards,
    #[error("cannot evaluate state formula in state {state}: {source}")]
    Eval { state: String, source: ExprError },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("value iteration did not converge after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("observation-based policy space has {size} policies, above the cap of {cap}; reduce the actions or observations")]
    PolicyCap { size: f64, cap: usize },
    #[error("uniformization needs more than {cap} Poisson terms (rate x time = {lambda})")]
    Truncation { lambda: f64, cap: usize },
    #[error("steady-state solve failed in bottom SCC {bscc}: {detail}")]
    SteadyState { bscc: usize, detail: String },
}

/// Value of a checked property.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResultValue {
    Number(f64),
    Bool(bool),
}

impl ResultValue {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            ResultValue::Number(v) => Some(v),
            ResultValue::Bool(_) => None,
        }
    }
}

impl fmt::Display for ResultValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResultValue::Number(v) => f.write_str(&format_value(*v)),
            ResultValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for ResultValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ResultValue::Number(v) if v.is_finite() => s.serialize_f64(*v),
            ResultValue::Number(v) => s.serialize_str(&format_value(*v)),
            ResultValue::Bool(b) => s.serialize_bool(*b),
        }
    }
}

/// Text for a numeric result; `inf` for an infinite expected reward.
pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Deterministic memoryless policy. Keys are state descriptions or
/// observation descriptions; values are action names (`""` for unlabelled
/// choices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "map", rename_all = "lowercase")]
pub enum Policy {
    State(BTreeMap<String, String>),
    Observation(BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult {
    pub value: ResultValue,
    pub policy: Option<Policy>,
    /// Iterations of the dominant iterative method (0 for direct solves).
    pub iterations: usize,
    /// Last max-norm change of that method.
    pub residual: f64,
}

/// Result of one leaf query, at every state.
#[derive(Debug, Clone)]
pub(crate) struct LeafValues {
    pub values: Vec<f64>,
    /// Chosen choice index per state, for mdp/pomdp queries.
    pub choice: Option<Vec<usize>>,
    pub observation_policy: Option<Vec<usize>>,
    pub iterations: usize,
    pub residual: f64,
}

impl LeafValues {
    pub fn plain(values: Vec<f64>) -> Self {
        Self { values, choice: None, observation_policy: None, iterations: 0, residual: 0.0 }
    }
}

/// Numeric view of an explicit model: per state, per choice, sparse
/// successor distribution (probabilities or rates).
#[derive(Debug, Clone)]
pub(crate) struct Numeric {
    pub initial: usize,
    pub choices: Vec<Vec<Vec<(usize, f64)>>>,
}

impl Numeric {
    pub fn from_model(m: &ExplicitModel) -> Result<Self, EngineError> {
        if m.is_parametric() {
            return Err(EngineError::Parametric(m.parameters.iter().cloned().collect()));
        }
        let choices = m
            .choices
            .iter()
            .map(|cs| {
                cs.iter()
                    .map(|c| {
                        c.transitions
                            .iter()
                            .map(|t| (t.target, num::to_f64(t.weight.as_rational().expect("bound weight"))))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { initial: m.initial, choices })
    }

    pub fn n(&self) -> usize {
        self.choices.len()
    }

    /// Rows of a single-choice model.
    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.choices.iter().map(|cs| cs.first().cloned().unwrap_or_default()).collect()
    }
}

/// Numeric reward vectors: per state, and per state and choice.
#[derive(Debug, Clone)]
pub(crate) struct NumRewards {
    pub state: Vec<f64>,
    pub choice: Vec<Vec<f64>>,
}

pub(crate) fn numeric_rewards(m: &ExplicitModel, name: Option<&str>) -> Result<NumRewards, EngineError> {
    let table = m.reward(name).ok_or_else(|| match name {
        Some(n) => EngineError::UnknownReward(n.to_string()),
        None => EngineError::NoRewards,
    })?;
    let to = |e: &crate::expr::Expr| e.as_rational().map(num::to_f64);
    let params = || EngineError::Parametric(m.parameters.iter().cloned().collect());
    let state = table.state.iter().map(|e| to(e).ok_or_else(params)).collect::<Result<_, _>>()?;
    let choice = table
        .transition
        .iter()
        .map(|row| row.iter().map(|e| to(e).ok_or_else(params)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    Ok(NumRewards { state, choice })
}

/// Satisfaction set of a state formula.
pub fn satisfying_states(m: &ExplicitModel, f: &StateFormula) -> Result<Vec<bool>, EngineError> {
    let n = m.num_states();
    Ok(match f {
        StateFormula::True => vec![true; n],
        StateFormula::False => vec![false; n],
        StateFormula::Label(name) => {
            if let Some(set) = m.label(name) {
                set.to_vec()
            } else if name == "init" {
                (0..n).map(|s| s == m.initial).collect()
            } else if name == "deadlock" {
                (0..n).map(|s| is_deadlock(m, s)).collect()
            } else {
                return Err(EngineError::UnknownLabel(name.clone()));
            }
        }
        StateFormula::Atom(e) => {
            let mut out = Vec::with_capacity(n);
            for s in 0..n {
                let v = m.eval_in_state(s, e).and_then(|v| match v {
                    Value::Bool(b) => Ok(b),
                    Value::Num(_) => Err(ExprError::Type(format!("`{e}` is not boolean"))),
                });
                out.push(v.map_err(|source| EngineError::Eval { state: m.describe_state(s), source })?);
            }
            out
        }
        StateFormula::Not(inner) => satisfying_states(m, inner)?.into_iter().map(|b| !b).collect(),
        StateFormula::And(a, b) => {
            let a = satisfying_states(m, a)?;
            let b = satisfying_states(m, b)?;
            a.into_iter().zip(b).map(|(x, y)| x && y).collect()
        }
        StateFormula::Or(a, b) => {
            let a = satisfying_states(m, a)?;
            let b = satisfying_states(m, b)?;
            a.into_iter().zip(b).map(|(x, y)| x || y).collect()
        }
        StateFormula::Query(_) => {
            return Err(EngineError::Unsupported("nested P/R/S operators are not supported by the engines".into()))
        }
    })
}

fn is_deadlock(m: &ExplicitModel, s: usize) -> bool {
    match m.kind {
        ModelKind::Ctmc => m.choices[s].iter().all(|c| c.transitions.is_empty()),
        _ => {
            m.choices[s].len() == 1
                && m.choices[s][0].action.is_none()
                && m.choices[s][0].transitions.len() == 1
                && m.choices[s][0].transitions[0].target == s
        }
    }
}

pub fn check(m: &ExplicitModel, prop: &Property) -> Result<VerificationResult, EngineError> {
    check_with(m, prop, &EngineOptions::default())
}

pub fn check_with(
    m: &ExplicitModel,
    prop: &Property,
    options: &EngineOptions,
) -> Result<VerificationResult, EngineError> {
    let prop = prop
        .clone()
        .normalize(m.kind)
        .map_err(|e| EngineError::KindMismatch { kind: m.kind, reason: e.to_string() })?;
    let numeric = Numeric::from_model(m)?;
    let leaves = prop.leaves();
    let mut values = Vec::with_capacity(leaves.len());
    let mut policy = None;
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    let mut boolean = None;
    for q in &leaves {
        let leaf = check_leaf(m, &numeric, q, options)?;
        iterations = iterations.max(leaf.iterations);
        residual = residual.max(leaf.residual);
        let mut v = leaf.values[m.initial];
        if q.is_probability() {
            v = clamp_probability(v);
        }
        if policy.is_none() {
            policy = describe_policy(m, &leaf);
        }
        if let Some((cmp, threshold)) = q.bound {
            boolean = Some(cmp.holds(v, threshold));
        }
        values.push(v);
    }
    let value = match (boolean, &prop) {
        (Some(b), Property::Query(_)) => ResultValue::Bool(b),
        (Some(_), _) => {
            return Err(EngineError::Unsupported("bounded queries cannot appear inside arithmetic".into()))
        }
        (None, _) => ResultValue::Number(prop.combine(&values)),
    };
    Ok(VerificationResult { value, policy, iterations, residual })
}

pub fn check_dtmc(m: &ExplicitModel, prop: &Property) -> Result<VerificationResult, EngineError> {
    expect_kind(m, &[ModelKind::Dtmc])?;
    check(m, prop)
}

pub fn check_ctmc(m: &ExplicitModel, prop: &Property) -> Result<VerificationResult, EngineError> {
    expect_kind(m, &[ModelKind::Ctmc])?;
    check(m, prop)
}

pub fn check_mdp(m: &ExplicitModel, prop: &Property) -> Result<VerificationResult, EngineError> {
    expect_kind(m, &[ModelKind::Mdp])?;
    check(m, prop)
}

pub fn check_pomdp(m: &ExplicitModel, prop: &Property) -> Result<VerificationResult, EngineError> {
    expect_kind(m, &[ModelKind::Pomdp])?;
    check(m, prop)
}

fn expect_kind(m: &ExplicitModel, kinds: &[ModelKind]) -> Result<(), EngineError> {
    if kinds.contains(&m.kind) {
        Ok(())
    } else {
        Err(EngineError::KindMismatch { kind: m.kind, reason: format!("expected a {}", kinds[0]) })
    }
}

pub(crate) fn clamp_probability(v: f64) -> f64 {
    if (-PROBABILITY_EPSILON..=1.0 + PROBABILITY_EPSILON).contains(&v) {
        v.clamp(0.0, 1.0)
    } else {
        v
    }
}

/// Optimization direction of a query on a nondeterministic model. Bounds
/// without a qualifier take the conservative direction.
pub(crate) fn direction(q: &Query) -> Opt {
    use crate::props::Cmp;
    match (q.opt, q.bound) {
        (Some(o), _) => o,
        (None, Some((Cmp::Ge | Cmp::Gt, _))) => Opt::Min,
        _ => Opt::Max,
    }
}

fn check_leaf(
    m: &ExplicitModel,
    numeric: &Numeric,
    q: &Query,
    options: &EngineOptions,
) -> Result<LeafValues, EngineError> {
    match m.kind {
        ModelKind::Dtmc => dtmc::check_query(m, numeric, q),
        ModelKind::Ctmc => ctmc::check_query(m, numeric, q, options),
        ModelKind::Mdp => mdp::check_query(m, numeric, q, direction(q), options),
        ModelKind::Pomdp => pomdp::check_query(m, numeric, q, direction(q), options),
    }
}

fn describe_policy(m: &ExplicitModel, leaf: &LeafValues) -> Option<Policy> {
    if let Some(obs_choice) = &leaf.observation_policy {
        let mut map = BTreeMap::new();
        for (o, &a) in obs_choice.iter().enumerate() {
            let Some(rep) = m.observations.iter().position(|&x| x == o) else { continue };
            let action = m.choices[rep][a].action.clone().unwrap_or_default();
            map.insert(observation_text(m, rep), action);
        }
        return Some(Policy::Observation(map));
    }
    let choice = leaf.choice.as_ref()?;
    let map = choice
        .iter()
        .enumerate()
        .filter(|(s, _)| m.choices[*s].len() > 1)
        .map(|(s, &c)| (m.describe_state(s), m.choices[s][c].action.clone().unwrap_or_default()))
        .collect();
    Some(Policy::State(map))
}

fn observation_text(m: &ExplicitModel, s: usize) -> String {
    let parts: Vec<String> = m
        .observables
        .iter()
        .map(|&i| {
            let v = &m.variables[i];
            let x = m.states[s][i];
            if v.is_bool {
                format!("{}={}", v.name, x != 0)
            } else {
                format!("{}={}", v.name, x)
            }
        })
        .collect();
    format!("({})", parts.join(","))
}
