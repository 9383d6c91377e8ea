use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{ConstType, ModelError, ModelKind, RewardTarget, SourceModel, VarType};
use crate::expr::{BinOp, Binding, Expr, ExprError, Value};
use crate::num;

pub const DEFAULT_MAX_STATES: usize = 10_000_000;

/// Tolerance below zero accepted for a probability whose value came from a
/// floating-point dependency result (e.g. `1-p1-p2` with `p1+p2` one ulp
/// above 1).
const WEIGHT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub max_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { max_states: DEFAULT_MAX_STATES }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableInfo {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub is_bool: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub target: usize,
    /// Probability (dtmc/mdp/pomdp) or rate (ctmc).
    pub weight: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: Option<String>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    pub name: Option<String>,
    pub state: Vec<Expr>,
    /// Indexed `[state][choice]`. For a ctmc this is the rate-weighted sum
    /// over the merged commands, so dividing by the exit rate gives the
    /// expected reward per jump.
    pub transition: Vec<Vec<Expr>>,
}

impl RewardTable {
    pub fn has_transition_rewards(&self) -> bool {
        self.transition.iter().flatten().any(|e| e.as_rational().is_none_or(|v| !v.is_zero()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitModel {
    pub kind: ModelKind,
    pub variables: Vec<VariableInfo>,
    pub states: Vec<Vec<i64>>,
    pub initial: usize,
    pub choices: Vec<Vec<Choice>>,
    pub labels: BTreeMap<String, Vec<bool>>,
    pub rewards: Vec<RewardTable>,
    /// Observation class per state; empty unless the model is a pomdp.
    pub observations: Vec<usize>,
    pub observation_count: usize,
    /// Indices of the observable variables.
    pub observables: Vec<usize>,
    /// Values of the constants, usable from property expressions.
    pub constants: BTreeMap<String, Value>,
    /// Parameters still free in weights or rewards.
    pub parameters: BTreeSet<String>,
}

pub fn build_state_space(model: &SourceModel, bound: &Binding) -> Result<ExplicitModel, ModelError> {
    build_state_space_with(model, bound, &BuildOptions::default())
}

struct CompiledCommand {
    module: usize,
    index: usize,
    action: Option<String>,
    guard: Expr,
    branches: Vec<(Expr, Vec<(usize, Expr)>)>,
}

/// A choice before merging, with the commands that produced it.
struct RawChoice {
    action: Option<String>,
    commands: Vec<(usize, usize)>,
    branches: Vec<(Expr, Vec<i64>)>,
}

pub fn build_state_space_with(
    model: &SourceModel,
    bound: &Binding,
    options: &BuildOptions,
) -> Result<ExplicitModel, ModelError> {
    let (resolved, constants, parameters) = resolve_constants(model, bound)?;
    let lookup = |name: &str| resolved.get(name).cloned();
    let subst = |e: &Expr| e.substitute(&lookup);

    let structural = |e: &Expr, context: &dyn Fn() -> String| -> Result<Expr, ModelError> {
        let e = subst(e);
        if let Some(param) = e.free_params().into_iter().find(|p| parameters.contains(p)) {
            return Err(ModelError::StructuralParameter { param, context: context() });
        }
        Ok(e)
    };

    let mut variables = Vec::new();
    let mut initial = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    for m in &model.modules {
        for v in &m.variables {
            let ctx = || format!("the declaration of `{}`", v.name);
            let (lo, hi, is_bool) = match &v.ty {
                VarType::Bool => (0, 1, true),
                VarType::Range(lo, hi) => {
                    let lo = const_int(&structural(lo, &ctx)?, &ctx)?;
                    let hi = const_int(&structural(hi, &ctx)?, &ctx)?;
                    if lo > hi {
                        return Err(ModelError::EmptyRange { var: v.name.clone(), lo, hi });
                    }
                    (lo, hi, false)
                }
            };
            let init = match &v.init {
                None => lo,
                Some(e) => {
                    let e = structural(e, &ctx)?;
                    match e {
                        Expr::Bool(b) if is_bool => b as i64,
                        other => const_int(&other, &ctx)?,
                    }
                }
            };
            if init < lo || init > hi {
                return Err(ModelError::InitOutOfRange { var: v.name.clone(), value: init, lo, hi });
            }
            var_index.insert(v.name.clone(), variables.len());
            variables.push(VariableInfo { name: v.name.clone(), lo, hi, is_bool });
            initial.push(init);
        }
    }

    let mut commands = Vec::new();
    for (mi, m) in model.modules.iter().enumerate() {
        for (ci, cmd) in m.commands.iter().enumerate() {
            let ctx = || command_text(model, mi, ci);
            let guard = structural(&cmd.guard, &ctx)?;
            let mut branches = Vec::new();
            for b in &cmd.branches {
                let weight = subst(&b.weight);
                let mut assignments = Vec::new();
                for (var, value) in &b.assignments {
                    assignments.push((var_index[var], structural(value, &ctx)?));
                }
                branches.push((weight, assignments));
            }
            commands.push(CompiledCommand {
                module: mi,
                index: ci,
                action: cmd.action.clone(),
                guard,
                branches,
            });
        }
    }

    let mut actions: Vec<String> = Vec::new();
    for cmd in &commands {
        if let Some(a) = &cmd.action {
            if !actions.contains(a) {
                actions.push(a.clone());
            }
        }
    }
    let alphabet: Vec<Vec<usize>> = actions
        .iter()
        .map(|a| {
            let mut mods: Vec<usize> = commands
                .iter()
                .filter(|c| c.action.as_ref() == Some(a))
                .map(|c| c.module)
                .collect();
            mods.dedup();
            mods
        })
        .collect();

    let mut labels = Vec::new();
    for (name, e) in &model.labels {
        let ctx = || format!("label \"{name}\"");
        labels.push((name.clone(), structural(e, &ctx)?));
    }
    struct CompiledReward {
        name: Option<String>,
        items: Vec<(RewardTarget, Expr, Expr)>,
    }
    let mut reward_specs = Vec::new();
    for r in &model.rewards {
        let mut items = Vec::new();
        for item in &r.items {
            let ctx = || format!("reward structure {}", r.name.as_deref().unwrap_or("(unnamed)"));
            items.push((item.target.clone(), structural(&item.guard, &ctx)?, subst(&item.value)));
        }
        reward_specs.push(CompiledReward { name: r.name.clone(), items });
    }

    let describe = |vals: &[i64]| describe_state(&variables, vals);
    let env_of = |vals: &[i64]| {
        let vars = &variables;
        let index = &var_index;
        let vals = vals.to_vec();
        move |name: &str| -> Option<Value> {
            let i = *index.get(name)?;
            Some(if vars[i].is_bool { Value::Bool(vals[i] != 0) } else { Value::Num(num::integer(vals[i])) })
        }
    };
    let eval_bool = |e: &Expr, vals: &[i64], ctx: &dyn Fn() -> String| -> Result<bool, ModelError> {
        let env = env_of(vals);
        e.eval_with(&env)
            .and_then(|v| v.as_bool().ok_or_else(|| ExprError::Type(format!("`{e}` is not boolean"))))
            .map_err(|source| ModelError::Eval { context: ctx(), source })
    };
    let at_state = |e: &Expr, vals: &[i64]| -> Expr {
        let env = env_of(vals);
        e.substitute(&|n: &str| env(n).map(value_expr))
    };

    let mut states: Vec<Vec<i64>> = vec![initial.clone()];
    let mut index: HashMap<Vec<i64>, usize> = HashMap::from([(initial, 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut choices: Vec<Vec<Choice>> = Vec::new();
    let mut trans_rewards: Vec<Vec<Vec<Expr>>> = vec![Vec::new(); reward_specs.len()];

    while let Some(s) = queue.pop_front() {
        let vals = states[s].clone();
        let mut raw: Vec<RawChoice> = Vec::new();

        let enabled = |cmd: &CompiledCommand| -> Result<bool, ModelError> {
            eval_bool(&cmd.guard, &vals, &|| format!("guard of {}", command_text(model, cmd.module, cmd.index)))
        };
        for cmd in commands.iter().filter(|c| c.action.is_none()) {
            if enabled(cmd)? {
                let parts = vec![cmd];
                raw.push(combine(&parts, &vals, &variables, &at_state, &describe)?);
            }
        }
        for (ai, action) in actions.iter().enumerate() {
            let mut per_module: Vec<Vec<&CompiledCommand>> = Vec::new();
            for &mi in &alphabet[ai] {
                let mut list = Vec::new();
                for cmd in commands.iter().filter(|c| c.module == mi && c.action.as_ref() == Some(action)) {
                    if enabled(cmd)? {
                        list.push(cmd);
                    }
                }
                per_module.push(list);
            }
            if per_module.iter().any(Vec::is_empty) {
                continue;
            }
            let mut pick = vec![0usize; per_module.len()];
            'product: loop {
                let parts: Vec<&CompiledCommand> =
                    pick.iter().enumerate().map(|(k, &i)| per_module[k][i]).collect();
                raw.push(combine(&parts, &vals, &variables, &at_state, &describe)?);
                let mut k = pick.len();
                loop {
                    if k == 0 {
                        break 'product;
                    }
                    k -= 1;
                    pick[k] += 1;
                    if pick[k] < per_module[k].len() {
                        continue 'product;
                    }
                    pick[k] = 0;
                }
            }
        }

        let state_text = || describe(&vals);
        if model.kind == ModelKind::Dtmc && raw.len() > 1 {
            return Err(ModelError::NondeterministicDtmc { state: state_text(), count: raw.len() });
        }
        for rc in &raw {
            check_weights(model, rc, &state_text)?;
        }

        let mut reward_values: Vec<Vec<Expr>> = Vec::new();
        for spec in &reward_specs {
            let mut per_choice = Vec::new();
            for rc in &raw {
                let mut total = Expr::int(0);
                for (target, guard, value) in &spec.items {
                    let RewardTarget::Transition(action) = target else { continue };
                    if action != &rc.action {
                        continue;
                    }
                    if eval_bool(guard, &vals, &|| "reward guard".to_string())? {
                        total = Expr::binary(BinOp::Add, total, at_state(value, &vals)).fold();
                    }
                }
                per_choice.push(total);
            }
            reward_values.push(per_choice);
        }

        let mut state_choices = Vec::new();
        let mut state_rewards: Vec<Vec<Expr>> = vec![Vec::new(); reward_specs.len()];
        let mut resolve_target = |target: Vec<i64>| -> Result<usize, ModelError> {
            if let Some(&t) = index.get(&target) {
                return Ok(t);
            }
            if states.len() >= options.max_states {
                return Err(ModelError::StateSpaceTooLarge { cap: options.max_states });
            }
            let t = states.len();
            index.insert(target.clone(), t);
            states.push(target);
            queue.push_back(t);
            Ok(t)
        };

        if model.kind == ModelKind::Ctmc {
            let mut transitions: Vec<Transition> = Vec::new();
            for rc in &raw {
                for (w, target) in &rc.branches {
                    let t = resolve_target(target.clone())?;
                    push_transition(&mut transitions, t, w.clone());
                }
            }
            for (ri, per_choice) in reward_values.iter().enumerate() {
                let mut total = Expr::int(0);
                for (rc, r) in raw.iter().zip(per_choice) {
                    if r.as_rational().is_some_and(|v| v.is_zero()) {
                        continue;
                    }
                    let rate = rc
                        .branches
                        .iter()
                        .fold(Expr::int(0), |acc, (w, _)| Expr::binary(BinOp::Add, acc, w.clone()).fold());
                    total = Expr::binary(BinOp::Add, total, Expr::binary(BinOp::Mul, rate, r.clone()))
                        .fold();
                }
                state_rewards[ri].push(total);
            }
            state_choices.push(Choice { action: None, transitions });
        } else if raw.is_empty() {
            state_choices.push(Choice {
                action: None,
                transitions: vec![Transition { target: s, weight: Expr::int(1) }],
            });
            for r in state_rewards.iter_mut() {
                r.push(Expr::int(0));
            }
        } else {
            for (ci, rc) in raw.iter().enumerate() {
                let mut transitions = Vec::new();
                for (w, target) in &rc.branches {
                    let t = resolve_target(target.clone())?;
                    push_transition(&mut transitions, t, w.clone());
                }
                state_choices.push(Choice { action: rc.action.clone(), transitions });
                for (ri, per_choice) in reward_values.iter().enumerate() {
                    state_rewards[ri].push(per_choice[ci].clone());
                }
            }
        }
        if choices.len() <= s {
            choices.resize(s + 1, Vec::new());
        }
        choices[s] = state_choices;
        for (ri, r) in state_rewards.into_iter().enumerate() {
            if trans_rewards[ri].len() <= s {
                trans_rewards[ri].resize(s + 1, Vec::new());
            }
            trans_rewards[ri][s] = r;
        }
    }

    let n = states.len();
    let mut label_sets = BTreeMap::new();
    for (name, e) in &labels {
        let mut set = Vec::with_capacity(n);
        for vals in &states {
            set.push(eval_bool(e, vals, &|| format!("label \"{name}\""))?);
        }
        label_sets.insert(name.clone(), set);
    }

    let mut rewards = Vec::new();
    for (ri, spec) in reward_specs.iter().enumerate() {
        let mut state = Vec::with_capacity(n);
        for vals in &states {
            let mut total = Expr::int(0);
            for (target, guard, value) in &spec.items {
                if *target != RewardTarget::State {
                    continue;
                }
                if eval_bool(guard, vals, &|| "reward guard".to_string())? {
                    total = Expr::binary(BinOp::Add, total, at_state(value, vals)).fold();
                }
            }
            state.push(total);
        }
        rewards.push(RewardTable {
            name: spec.name.clone(),
            state,
            transition: std::mem::take(&mut trans_rewards[ri]),
        });
    }

    let (observations, observation_count) = if model.kind == ModelKind::Pomdp {
        observation_classes(model, &variables, &var_index, &states, &choices)?
    } else {
        (Vec::new(), 0)
    };

    let mut explicit = ExplicitModel {
        kind: model.kind,
        variables,
        states,
        initial: 0,
        choices,
        labels: label_sets,
        rewards,
        observations,
        observation_count,
        observables: model.observables.iter().map(|o| var_index[o]).collect(),
        constants,
        parameters: BTreeSet::new(),
    };
    explicit.parameters = explicit.collect_parameters();
    Ok(explicit)
}

/// Resolves constants in declaration order. Bound values win over
/// definitions; definitions depending on unbound parameters stay symbolic.
fn resolve_constants(
    model: &SourceModel,
    bound: &Binding,
) -> Result<(HashMap<String, Expr>, BTreeMap<String, Value>, BTreeSet<String>), ModelError> {
    let mut resolved: HashMap<String, Expr> = HashMap::new();
    let mut values = BTreeMap::new();
    let mut parameters = BTreeSet::new();
    for c in &model.constants {
        let expr = if let Some(v) = bound.get(&c.name) {
            match c.ty {
                ConstType::Bool => Expr::Bool(!v.is_zero()),
                _ => Expr::Num(v.clone()),
            }
        } else if let Some(def) = &c.value {
            def.substitute(&|n: &str| resolved.get(n).cloned())
        } else {
            parameters.insert(c.name.clone());
            continue;
        };
        if c.ty == ConstType::Int {
            if let Expr::Num(v) = &expr {
                if !v.is_integer() {
                    return Err(ModelError::Eval {
                        context: format!("constant `{}`", c.name),
                        source: ExprError::Type(format!("int constant has non-integer value {v}")),
                    });
                }
            }
        }
        match &expr {
            Expr::Num(v) => {
                values.insert(c.name.clone(), Value::Num(v.clone()));
            }
            Expr::Bool(b) => {
                values.insert(c.name.clone(), Value::Bool(*b));
            }
            _ => {}
        }
        resolved.insert(c.name.clone(), expr);
    }
    Ok((resolved, values, parameters))
}

fn combine(
    parts: &[&CompiledCommand],
    vals: &[i64],
    variables: &[VariableInfo],
    at_state: &dyn Fn(&Expr, &[i64]) -> Expr,
    describe: &dyn Fn(&[i64]) -> String,
) -> Result<RawChoice, ModelError> {
    let mut branches: Vec<(Expr, Vec<i64>, Vec<bool>)> =
        vec![(Expr::int(1), vals.to_vec(), vec![false; vals.len()])];
    for cmd in parts {
        let mut next = Vec::new();
        for (w0, target0, written0) in &branches {
            for (w, assignments) in &cmd.branches {
                let weight = Expr::binary(BinOp::Mul, w0.clone(), at_state(w, vals)).fold();
                let mut target = target0.clone();
                let mut written = written0.clone();
                for (var, value) in assignments {
                    if written[*var] {
                        return Err(ModelError::UpdateConflict {
                            var: variables[*var].name.clone(),
                            state: describe(vals),
                        });
                    }
                    written[*var] = true;
                    let info = &variables[*var];
                    let v = match at_state(value, vals) {
                        Expr::Bool(b) if info.is_bool => b as i64,
                        Expr::Num(r) if !info.is_bool && r.is_integer() => {
                            r.to_integer().to_i64().unwrap_or(i64::MAX)
                        }
                        other => {
                            return Err(ModelError::Eval {
                                context: format!("update of `{}` in state {}", info.name, describe(vals)),
                                source: ExprError::Type(format!("`{other}` is not a valid value")),
                            })
                        }
                    };
                    if v < info.lo || v > info.hi {
                        return Err(ModelError::UpdateOutOfRange {
                            var: info.name.clone(),
                            value: v,
                            lo: info.lo,
                            hi: info.hi,
                            state: describe(vals),
                        });
                    }
                    target[*var] = v;
                }
                next.push((weight, target, written));
            }
        }
        branches = next;
    }
    Ok(RawChoice {
        action: parts[0].action.clone(),
        commands: parts.iter().map(|c| (c.module, c.index)).collect(),
        branches: branches.into_iter().map(|(w, t, _)| (w, t)).collect(),
    })
}

fn check_weights(
    model: &SourceModel,
    rc: &RawChoice,
    state_text: &dyn Fn() -> String,
) -> Result<(), ModelError> {
    let command = || {
        rc.commands.iter().map(|&(m, c)| command_text(model, m, c)).collect::<Vec<_>>().join(" x ")
    };
    let mut sum = BigRational::zero();
    let mut all_bound = true;
    for (w, _) in &rc.branches {
        match w.as_rational() {
            Some(v) => {
                if v.is_negative() && num::to_f64(v) < -WEIGHT_SLACK {
                    let detail = format!("weight `{}` is negative", num::canonical_text(v));
                    return Err(if model.kind == ModelKind::Ctmc {
                        ModelError::NegativeRate { state: state_text(), command: command(), detail }
                    } else {
                        ModelError::ProbabilitySum { state: state_text(), command: command(), detail }
                    });
                }
                sum += v;
            }
            None if matches!(w, Expr::Bool(_)) => {
                return Err(ModelError::Eval {
                    context: format!("weight of {}", command()),
                    source: ExprError::Type("boolean used as a weight".into()),
                })
            }
            None => all_bound = false,
        }
    }
    if model.kind != ModelKind::Ctmc && all_bound && !sum.is_one() {
        return Err(ModelError::ProbabilitySum {
            state: state_text(),
            command: command(),
            detail: format!("weights sum to {}, not 1", num::canonical_text(&sum)),
        });
    }
    Ok(())
}

fn push_transition(transitions: &mut Vec<Transition>, target: usize, weight: Expr) {
    if weight.as_rational().is_some_and(|v| v.is_zero()) {
        return;
    }
    if let Some(t) = transitions.iter_mut().find(|t| t.target == target) {
        t.weight = Expr::binary(BinOp::Add, t.weight.clone(), weight).fold();
    } else {
        transitions.push(Transition { target, weight });
    }
}

fn observation_classes(
    model: &SourceModel,
    variables: &[VariableInfo],
    var_index: &HashMap<String, usize>,
    states: &[Vec<i64>],
    choices: &[Vec<Choice>],
) -> Result<(Vec<usize>, usize), ModelError> {
    let observed: Vec<usize> = model.observables.iter().map(|o| var_index[o]).collect();
    let mut classes: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut representative: Vec<usize> = Vec::new();
    let mut obs = Vec::with_capacity(states.len());
    for (s, vals) in states.iter().enumerate() {
        let key: Vec<i64> = observed.iter().map(|&i| vals[i]).collect();
        let next = classes.len();
        let class = *classes.entry(key).or_insert(next);
        if class == representative.len() {
            representative.push(s);
        }
        obs.push(class);
        let mut seen = BTreeSet::new();
        for c in &choices[s] {
            if !seen.insert(&c.action) {
                return Err(ModelError::DuplicateAction {
                    state: describe_state(variables, vals),
                    action: c.action.clone().unwrap_or_default(),
                });
            }
        }
        let rep = representative[class];
        let actions = |t: usize| choices[t].iter().map(|c| c.action.clone()).collect::<Vec<_>>();
        if actions(rep) != actions(s) {
            return Err(ModelError::ObservationInconsistent {
                first: describe_state(variables, &states[rep]),
                second: describe_state(variables, vals),
            });
        }
    }
    Ok((obs, representative.len()))
}

fn describe_state(variables: &[VariableInfo], vals: &[i64]) -> String {
    let mut out = String::from("(");
    for (i, (v, x)) in variables.iter().zip(vals).enumerate() {
        if i > 0 {
            out.push(',');
        }
        if v.is_bool {
            let _ = write!(out, "{}={}", v.name, *x != 0);
        } else {
            let _ = write!(out, "{}={}", v.name, x);
        }
    }
    out.push(')');
    out
}

fn command_text(model: &SourceModel, module: usize, index: usize) -> String {
    let m = &model.modules[module];
    let action = m.commands[index].action.as_deref().unwrap_or("");
    format!("command #{} [{}] of module `{}`", index + 1, action, m.name)
}

fn const_int(e: &Expr, ctx: &dyn Fn() -> String) -> Result<i64, ModelError> {
    match e {
        Expr::Num(v) if v.is_integer() => v.to_integer().to_i64().ok_or_else(|| ModelError::Eval {
            context: ctx(),
            source: ExprError::Type("integer out of range".into()),
        }),
        _ => {
            let source = match e.free_params().into_iter().next() {
                Some(name) => ExprError::Unbound(name),
                None => ExprError::Type(format!("`{e}` is not an integer")),
            };
            Err(ModelError::Eval { context: ctx(), source })
        }
    }
}

fn value_expr(v: Value) -> Expr {
    match v {
        Value::Num(n) => Expr::Num(n),
        Value::Bool(b) => Expr::Bool(b),
    }
}

impl ExplicitModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.choices.iter().flatten().map(|c| c.transitions.len()).sum()
    }

    pub fn is_parametric(&self) -> bool {
        !self.parameters.is_empty()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn describe_state(&self, s: usize) -> String {
        describe_state(&self.variables, &self.states[s])
    }

    /// Value of an identifier in state `s`: a variable, else a constant.
    pub fn lookup(&self, s: usize, name: &str) -> Option<Value> {
        if let Some(i) = self.variable_index(name) {
            let x = self.states[s][i];
            return Some(if self.variables[i].is_bool {
                Value::Bool(x != 0)
            } else {
                Value::Num(num::integer(x))
            });
        }
        self.constants.get(name).cloned()
    }

    pub fn eval_in_state(&self, s: usize, e: &Expr) -> Result<Value, ExprError> {
        e.eval_with(&|name: &str| self.lookup(s, name))
    }

    pub fn label(&self, name: &str) -> Option<&[bool]> {
        self.labels.get(name).map(Vec::as_slice)
    }

    /// Reward structure by name; `None` selects the first structure.
    pub fn reward(&self, name: Option<&str>) -> Option<&RewardTable> {
        match name {
            None => self.rewards.first(),
            Some(n) => self.rewards.iter().find(|r| r.name.as_deref() == Some(n)),
        }
    }

    /// Substitutes parameter values into weights and rewards, re-checking
    /// probability sums on choices that become fully bound.
    pub fn instantiate(&self, binding: &Binding) -> Result<ExplicitModel, ModelError> {
        let lookup = |name: &str| binding.get(name).map(|v| Expr::Num(v.clone()));
        let mut out = self.clone();
        for (s, state_choices) in out.choices.iter_mut().enumerate() {
            for choice in state_choices.iter_mut() {
                let mut sum = BigRational::zero();
                let mut all_bound = true;
                for t in choice.transitions.iter_mut() {
                    t.weight = t.weight.substitute(&lookup);
                    match t.weight.as_rational() {
                        Some(v) => {
                            if v.is_negative() && num::to_f64(v) < -WEIGHT_SLACK {
                                let detail = format!("weight `{}` is negative", num::canonical_text(v));
                                let state = describe_state(&self.variables, &self.states[s]);
                                let command = format!("choice [{}]", choice.action.as_deref().unwrap_or(""));
                                return Err(if self.kind == ModelKind::Ctmc {
                                    ModelError::NegativeRate { state, command, detail }
                                } else {
                                    ModelError::ProbabilitySum { state, command, detail }
                                });
                            }
                            sum += v;
                        }
                        None => all_bound = false,
                    }
                }
                if self.kind != ModelKind::Ctmc && all_bound && !sum.is_one() {
                    return Err(ModelError::ProbabilitySum {
                        state: describe_state(&self.variables, &self.states[s]),
                        command: format!("choice [{}]", choice.action.as_deref().unwrap_or("")),
                        detail: format!("weights sum to {}, not 1", num::canonical_text(&sum)),
                    });
                }
            }
        }
        for r in out.rewards.iter_mut() {
            for e in r.state.iter_mut().chain(r.transition.iter_mut().flatten()) {
                *e = e.substitute(&lookup);
            }
        }
        out.parameters = out.collect_parameters();
        Ok(out)
    }

    fn collect_parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in self.choices.iter().flatten().flat_map(|c| &c.transitions) {
            if !t.weight.is_constant() {
                out.extend(t.weight.free_params());
            }
        }
        for r in &self.rewards {
            for e in r.state.iter().chain(r.transition.iter().flatten()) {
                if !e.is_constant() {
                    out.extend(e.free_params());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_model;
    use super::*;

    fn build(text: &str) -> ExplicitModel {
        build_state_space(&parse_model(text).unwrap(), &Binding::new()).unwrap()
    }

    const FIG2: &str = "dtmc
        module m
          s : [0..3] init 0;
          [] s=0 -> 0.8:(s'=1) + 0.1:(s'=2) + 0.1:(s'=3);
          [] s=3 -> 0.5:(s'=0) + 0.5:(s'=2);
        endmodule";

    #[test]
    fn four_state_chain() {
        let m = build(FIG2);
        assert_eq!(m.num_states(), 4);
        for state_choices in &m.choices {
            assert_eq!(state_choices.len(), 1);
            let sum: BigRational =
                state_choices[0].transitions.iter().map(|t| t.weight.as_rational().unwrap().clone()).sum();
            assert!(sum.is_one());
        }
        // BFS order: s=0, then its successors in command order.
        assert_eq!(m.states, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn unreachable_values_are_absent() {
        let m = build("dtmc module m x:[0..5] init 0; [] x=0 -> (x'=2); endmodule");
        assert_eq!(m.states, vec![vec![0], vec![2]]);
    }

    #[test]
    fn deadlocks_get_self_loops_or_become_absorbing() {
        let m = build("dtmc module m x:[0..1]; [] x=0 -> (x'=1); endmodule");
        assert_eq!(m.choices[1][0].transitions, vec![Transition { target: 1, weight: Expr::int(1) }]);
        let m = build("ctmc module m x:[0..1]; [] x=0 -> 2:(x'=1); endmodule");
        assert!(m.choices[1][0].transitions.is_empty());
    }

    #[test]
    fn probability_sum_violation() {
        let src = parse_model(
            "dtmc const double p1; const double p2;
             module m x:[0..3]; [] x=0 -> p1:(x'=1) + p2:(x'=2) + (1-p1-p2):(x'=3); endmodule",
        )
        .unwrap();
        let b: Binding = [("p1".to_string(), num::rational(7, 10)), ("p2".to_string(), num::rational(7, 10))]
            .into_iter()
            .collect();
        assert!(matches!(build_state_space(&src, &b), Err(ModelError::ProbabilitySum { .. })));
        let m = build_state_space(&src, &Binding::new()).unwrap();
        assert_eq!(m.parameters.len(), 2);
        assert!(matches!(m.instantiate(&b), Err(ModelError::ProbabilitySum { .. })));
        let short = parse_model("dtmc module m x:[0..1]; [] x=0 -> 0.5:(x'=1) + 0.4:(x'=0); endmodule")
            .unwrap();
        let err = build_state_space(&short, &Binding::new()).unwrap_err();
        assert!(err.to_string().contains("sum to 0.9"), "{err}");
    }

    #[test]
    fn synchronization_multiplies() {
        let m = build(
            "dtmc
             module a x:[0..1]; [go] x=0 -> 0.5:(x'=1) + 0.5:(x'=0); endmodule
             module b y:[0..1]; [go] y=0 -> 0.2:(y'=1) + 0.8:(y'=0); endmodule",
        );
        let t = &m.choices[0][0].transitions;
        let w: Vec<String> = t.iter().map(|t| t.weight.to_string()).collect();
        assert_eq!(w, vec!["0.1", "0.4", "0.1", "0.4"]);
        // Only (0,0) enables `go`; every other state deadlocks.
        assert_eq!(m.num_states(), 4);
    }

    #[test]
    fn dtmc_nondeterminism_is_rejected_but_ctmc_races() {
        let text = "module m x:[0..2]; [] x=0 -> 1:(x'=1); [] x=0 -> 3:(x'=2); endmodule";
        let err = build_state_space(&parse_model(&format!("dtmc {text}")).unwrap(), &Binding::new())
            .unwrap_err();
        assert!(matches!(err, ModelError::NondeterministicDtmc { count: 2, .. }));
        let m = build(&format!("ctmc {text}"));
        assert_eq!(m.choices[0].len(), 1);
        assert_eq!(m.choices[0][0].transitions.len(), 2);
    }

    #[test]
    fn update_conflict() {
        let src = parse_model("mdp module m x:[0..2]; [] x=0 -> (x'=1)&(x'=2); endmodule").unwrap();
        assert!(matches!(build_state_space(&src, &Binding::new()), Err(ModelError::UpdateConflict { .. })));
    }

    #[test]
    fn structural_parameters_are_rejected() {
        let src = parse_model("dtmc const int N; module m x:[0..N]; endmodule").unwrap();
        assert!(matches!(
            build_state_space(&src, &Binding::new()),
            Err(ModelError::StructuralParameter { .. })
        ));
        let b: Binding = [("N".to_string(), num::integer(3))].into_iter().collect();
        let m = build_state_space(&src, &b).unwrap();
        assert_eq!(m.variables[0].hi, 3);
    }

    #[test]
    fn state_cap() {
        let src = parse_model("dtmc module m x:[0..100]; [] x<100 -> (x'=x+1); endmodule").unwrap();
        let err = build_state_space_with(&src, &Binding::new(), &BuildOptions { max_states: 10 })
            .unwrap_err();
        assert_eq!(err, ModelError::StateSpaceTooLarge { cap: 10 });
    }

    #[test]
    fn ctmc_transition_rewards_are_rate_weighted() {
        let m = build(
            r#"ctmc module m x:[0..2]; [a] x=0 -> 2:(x'=1); [b] x=0 -> 3:(x'=2); endmodule
               rewards "r" [a] true : 5; [b] true : 1; x=1 : 7; endrewards"#,
        );
        let r = m.reward(Some("r")).unwrap();
        assert_eq!(r.transition[0][0], Expr::int(13));
        assert_eq!(r.state[1], Expr::int(7));
    }

    #[test]
    fn pomdp_observations() {
        let m = build(
            "pomdp observables o endobservables
             module m o:[0..1]; h:[0..1];
               [a] o=0 & h=0 -> (o'=1);
               [b] o=0 & h=0 -> (o'=1)&(h'=1);
               [a] o=1 -> true;
             endmodule",
        );
        assert_eq!(m.observation_count, 2);
        let bad = parse_model(
            "pomdp observables o endobservables
             module m o:[0..1]; h:[0..1];
               [a] o=0 & h=0 -> (h'=1);
               [b] o=0 & h=1 -> true;
             endmodule",
        )
        .unwrap();
        assert!(matches!(
            build_state_space(&bad, &Binding::new()),
            Err(ModelError::ObservationInconsistent { .. })
        ));
    }

    #[test]
    fn derived_constants_stay_symbolic() {
        let m = build_state_space(
            &parse_model(
                "dtmc const double p; const double q = 1 - p;
                 module m x:[0..1]; [] x=0 -> p:(x'=1) + q:(x'=0); endmodule",
            )
            .unwrap(),
            &Binding::new(),
        )
        .unwrap();
        assert_eq!(m.choices[0][0].transitions[1].weight.to_string(), "1 - p");
        let b: Binding = [("p".to_string(), num::rational(1, 4))].into_iter().collect();
        let bound = m.instantiate(&b).unwrap();
        assert!(bound.parameters.is_empty());
        assert_eq!(bound.choices[0][0].transitions[1].weight, Expr::Num(num::rational(3, 4)));
    }
}
