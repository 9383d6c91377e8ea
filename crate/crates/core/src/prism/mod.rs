//! PRISM-language subset: model kind header, constants, formulas, modules
//! with guarded commands, labels, reward structures and observables.
//!
//! [`parse_model`] produces a [`SourceModel`]; [`build_state_space`]
//! compiles it into an [`ExplicitModel`] by breadth-first exploration of the
//! reachable valuations.

mod build;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr, ExprError};
use crate::syntax::{Cursor, ParseError, Tok};

pub use build::{
    build_state_space, build_state_space_with, BuildOptions, Choice, ExplicitModel, RewardTable,
    Transition, VariableInfo, DEFAULT_MAX_STATES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dtmc,
    Ctmc,
    Mdp,
    Pomdp,
}

impl ModelKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, ModelKind::Ctmc)
    }

    pub fn is_nondeterministic(self) -> bool {
        matches!(self, ModelKind::Mdp | ModelKind::Pomdp)
    }

    /// Kind implied by a file extension such as `.ctmc`.
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        path.extension().and_then(|e| e.to_str()).and_then(|e| e.parse().ok())
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Dtmc => "dtmc",
            ModelKind::Ctmc => "ctmc",
            ModelKind::Mdp => "mdp",
            ModelKind::Pomdp => "pomdp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "dtmc" | "probabilistic" => ModelKind::Dtmc,
            "ctmc" | "stochastic" => ModelKind::Ctmc,
            "mdp" | "nondeterministic" => ModelKind::Mdp,
            "pomdp" => ModelKind::Pomdp,
            other => return Err(format!("unknown model kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
    Bool,
    Untyped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: ConstType,
    /// `None` for an unbound constant, i.e. a model parameter.
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarType {
    Range(Expr, Expr),
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: VarType,
    pub init: Option<Expr>,
}

/// One probabilistic branch `weight : (x'=e)&(y'=f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub weight: Expr,
    pub assignments: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    pub guard: Expr,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub variables: Vec<VarDecl>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardTarget {
    State,
    /// `[]` (None) or `[action]`.
    Transition(Option<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    pub target: RewardTarget,
    pub guard: Expr,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStruct {
    pub name: Option<String>,
    pub items: Vec<RewardItem>,
}

/// Parsed model, formulas already inlined.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub kind: ModelKind,
    pub constants: Vec<ConstDecl>,
    pub modules: Vec<Module>,
    pub labels: Vec<(String, Expr)>,
    pub rewards: Vec<RewardStruct>,
    pub observables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("model kind missing: add a `dtmc`/`ctmc`/`mdp`/`pomdp` header")]
    MissingKind,
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("initial value {value} of `{var}` outside its range [{lo}..{hi}]")]
    InitOutOfRange { var: String, value: i64, lo: i64, hi: i64 },
    #[error("variable `{var}` has an empty range [{lo}..{hi}]")]
    EmptyRange { var: String, lo: i64, hi: i64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("observable `{0}` is not a declared variable")]
    UnknownObservable(String),
    #[error("module `{module}` updates variable `{var}` it does not own")]
    ForeignUpdate { module: String, var: String },
    #[error("formula `{0}` is defined recursively")]
    RecursiveFormula(String),
    #[error("{context}: {source}")]
    Eval { context: String, source: ExprError },
    #[error("parameter `{param}` is unbound but used in {context}; only transition weights and rewards may stay parametric")]
    StructuralParameter { param: String, context: String },
    #[error("invalid probabilities in state {state}, {command}: {detail}")]
    ProbabilitySum { state: String, command: String, detail: String },
    #[error("negative rate in state {state}, {command}: {detail}")]
    NegativeRate { state: String, command: String, detail: String },
    #[error("update sets `{var}` to {value}, outside [{lo}..{hi}], in state {state}")]
    UpdateOutOfRange { var: String, value: i64, lo: i64, hi: i64, state: String },
    #[error("synchronized updates both write `{var}` in state {state}")]
    UpdateConflict { var: String, state: String },
    #[error("state {state} of a dtmc has {count} enabled commands; dtmcs must be deterministic")]
    NondeterministicDtmc { state: String, count: usize },
    #[error("state {state} of a pomdp enables action `{action}` more than once")]
    DuplicateAction { state: String, action: String },
    #[error("states {first} and {second} share an observation but enable different actions")]
    ObservationInconsistent { first: String, second: String },
    #[error("state space exceeds the cap of {cap} states")]
    StateSpaceTooLarge { cap: usize },
}

pub fn parse_model(text: &str) -> Result<SourceModel, ModelError> {
    parse_model_with_kind(text, None)
}

/// Parses a model; `default_kind` applies when the text has no kind header
/// (e.g. taken from the file extension).
pub fn parse_model_with_kind(
    text: &str,
    default_kind: Option<ModelKind>,
) -> Result<SourceModel, ModelError> {
    let mut c = Cursor::new(text)?;
    let mut kind = None;
    let mut constants = Vec::new();
    let mut formulas: Vec<(String, Expr)> = Vec::new();
    let mut modules = Vec::new();
    let mut labels = Vec::new();
    let mut rewards = Vec::new();
    let mut observables = Vec::new();

    while !c.at_eof() {
        let word = match c.peek() {
            Tok::Ident(word) => word.clone(),
            _ => return Err(c.error(&["declaration"]).into()),
        };
        match word.as_str() {
            "dtmc" | "ctmc" | "mdp" | "pomdp" | "probabilistic" | "stochastic"
            | "nondeterministic" => {
                if kind.is_some() {
                    return Err(ModelError::Duplicate { what: "model kind", name: word });
                }
                c.bump();
                kind = Some(word.parse::<ModelKind>().expect("kind keyword"));
            }
            "const" => constants.push(parse_const(&mut c)?),
            "formula" => {
                c.bump();
                let name = c.expect_ident()?;
                c.expect(&Tok::Eq)?;
                let value = expr::parse_expression(&mut c)?;
                c.expect(&Tok::Semi)?;
                formulas.push((name, value));
            }
            "module" => modules.push(parse_module(&mut c)?),
            "label" => {
                c.bump();
                let name = c.expect_string()?;
                c.expect(&Tok::Eq)?;
                let value = expr::parse_expression(&mut c)?;
                c.expect(&Tok::Semi)?;
                labels.push((name, value));
            }
            "rewards" => rewards.push(parse_rewards(&mut c)?),
            "observables" => {
                c.bump();
                loop {
                    observables.push(c.expect_ident()?);
                    if !c.eat(&Tok::Comma) {
                        break;
                    }
                }
                c.expect_keyword("endobservables")?;
            }
            "player" | "smg" => {
                return Err(ModelError::Unsupported(
                    "stochastic games unsupported: `player` blocks cannot be verified".into(),
                ))
            }
            "global" => {
                return Err(ModelError::Unsupported("global variables are not supported".into()))
            }
            "init" => {
                return Err(ModelError::Unsupported("`init...endinit` blocks are not supported".into()))
            }
            _ => {
                return Err(c
                    .error(&["`const`", "`formula`", "`module`", "`label`", "`rewards`", "`observables`"])
                    .into())
            }
        }
    }

    let kind = kind.or(default_kind).ok_or(ModelError::MissingKind)?;
    let mut model = SourceModel { kind, constants, modules, labels, rewards, observables };
    inline_formulas(&mut model, &formulas)?;
    model.validate()?;
    Ok(model)
}

fn parse_const(c: &mut Cursor) -> Result<ConstDecl, ModelError> {
    c.expect_keyword("const")?;
    let ty = if c.eat_keyword("int") {
        ConstType::Int
    } else if c.eat_keyword("double") {
        ConstType::Double
    } else if c.eat_keyword("bool") {
        ConstType::Bool
    } else {
        ConstType::Untyped
    };
    let name = c.expect_ident()?;
    let value = if c.eat(&Tok::Eq) { Some(expr::parse_expression(c)?) } else { None };
    c.expect(&Tok::Semi)?;
    Ok(ConstDecl { name, ty, value })
}

fn parse_module(c: &mut Cursor) -> Result<Module, ModelError> {
    c.expect_keyword("module")?;
    let name = c.expect_ident()?;
    if c.at(&Tok::Eq) {
        return Err(ModelError::Unsupported("module renaming is not supported".into()));
    }
    let mut variables = Vec::new();
    let mut commands = Vec::new();
    loop {
        if c.eat_keyword("endmodule") {
            break;
        }
        if c.at(&Tok::LBracket) {
            commands.push(parse_command(c)?);
            continue;
        }
        if matches!(c.peek(), Tok::Ident(_)) && c.peek_at(1) == &Tok::Colon {
            variables.push(parse_var(c)?);
            continue;
        }
        return Err(c.error(&["variable declaration", "`[`", "`endmodule`"]).into());
    }
    Ok(Module { name, variables, commands })
}

fn parse_var(c: &mut Cursor) -> Result<VarDecl, ModelError> {
    let name = c.expect_ident()?;
    c.expect(&Tok::Colon)?;
    let ty = if c.eat_keyword("bool") {
        VarType::Bool
    } else if c.eat_keyword("clock") {
        return Err(ModelError::Unsupported("clock variables are not supported".into()));
    } else {
        c.expect(&Tok::LBracket)?;
        let lo = expr::parse_expression(c)?;
        c.expect(&Tok::DotDot)?;
        let hi = expr::parse_expression(c)?;
        c.expect(&Tok::RBracket)?;
        VarType::Range(lo, hi)
    };
    let init = if c.eat_keyword("init") { Some(expr::parse_expression(c)?) } else { None };
    c.expect(&Tok::Semi)?;
    Ok(VarDecl { name, ty, init })
}

fn parse_action(c: &mut Cursor) -> Result<Option<String>, ModelError> {
    c.expect(&Tok::LBracket)?;
    let action = if c.at(&Tok::RBracket) { None } else { Some(c.expect_ident()?) };
    c.expect(&Tok::RBracket)?;
    Ok(action)
}

fn parse_command(c: &mut Cursor) -> Result<Command, ModelError> {
    let action = parse_action(c)?;
    let guard = expr::parse_expression(c)?;
    c.expect(&Tok::Arrow)?;
    let mut branches = Vec::new();
    loop {
        let start = c.save();
        // A weight is present iff an expression is followed by `:`.
        let weight = match expr::parse_expression(c) {
            Ok(w) if c.eat(&Tok::Colon) => w,
            _ => {
                c.restore(start);
                Expr::int(1)
            }
        };
        let assignments = parse_update(c)?;
        branches.push(Branch { weight, assignments });
        if !c.eat(&Tok::Plus) {
            break;
        }
    }
    c.expect(&Tok::Semi)?;
    Ok(Command { action, guard, branches })
}

fn parse_update(c: &mut Cursor) -> Result<Vec<(String, Expr)>, ModelError> {
    if c.eat_keyword("true") {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    loop {
        c.expect(&Tok::LParen)?;
        let var = c.expect_ident()?;
        c.expect(&Tok::Prime)?;
        c.expect(&Tok::Eq)?;
        let value = expr::parse_expression(c)?;
        c.expect(&Tok::RParen)?;
        out.push((var, value));
        if !c.eat(&Tok::Amp) {
            break;
        }
    }
    Ok(out)
}

fn parse_rewards(c: &mut Cursor) -> Result<RewardStruct, ModelError> {
    c.expect_keyword("rewards")?;
    let name = match c.peek() {
        Tok::Str(_) => Some(c.expect_string()?),
        _ => None,
    };
    let mut items = Vec::new();
    while !c.eat_keyword("endrewards") {
        let target = if c.at(&Tok::LBracket) {
            RewardTarget::Transition(parse_action(c)?)
        } else {
            RewardTarget::State
        };
        let guard = expr::parse_expression(c)?;
        c.expect(&Tok::Colon)?;
        let value = expr::parse_expression(c)?;
        c.expect(&Tok::Semi)?;
        items.push(RewardItem { target, guard, value });
    }
    Ok(RewardStruct { name, items })
}

fn inline_formulas(model: &mut SourceModel, formulas: &[(String, Expr)]) -> Result<(), ModelError> {
    if formulas.is_empty() {
        return Ok(());
    }
    let mut seen = HashSet::new();
    for (name, _) in formulas {
        if !seen.insert(name.as_str()) {
            return Err(ModelError::Duplicate { what: "formula", name: name.clone() });
        }
    }
    let table: HashMap<&str, &Expr> = formulas.iter().map(|(n, e)| (n.as_str(), e)).collect();
    let mut expanded: HashMap<String, Expr> = HashMap::new();
    fn expand(
        name: &str,
        table: &HashMap<&str, &Expr>,
        expanded: &mut HashMap<String, Expr>,
        stack: &mut Vec<String>,
    ) -> Result<Expr, ModelError> {
        if let Some(e) = expanded.get(name) {
            return Ok(e.clone());
        }
        if stack.iter().any(|s| s == name) {
            return Err(ModelError::RecursiveFormula(name.to_string()));
        }
        stack.push(name.to_string());
        let body = table[name];
        let mut deps = Vec::new();
        for ident in body.free_params() {
            if table.contains_key(ident.as_str()) {
                deps.push((ident.clone(), expand(&ident, table, expanded, stack)?));
            }
        }
        stack.pop();
        let result = body.replace_idents(&|n: &str| {
            deps.iter().find(|(d, _)| d == n).map(|(_, e)| e.clone())
        });
        expanded.insert(name.to_string(), result.clone());
        Ok(result)
    }
    for (name, _) in formulas {
        expand(name, &table, &mut expanded, &mut Vec::new())?;
    }
    let lookup = |n: &str| expanded.get(n).cloned();
    model.for_each_expr_mut(&mut |e| *e = e.replace_idents(&lookup));
    Ok(())
}

impl SourceModel {
    /// Unbound constants, i.e. the model's parameters.
    pub fn list_parameters(&self) -> BTreeSet<String> {
        self.constants.iter().filter(|c| c.value.is_none()).map(|c| c.name.clone()).collect()
    }

    pub fn constant(&self, name: &str) -> Option<&ConstDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn variable_names(&self) -> Vec<&str> {
        self.modules.iter().flat_map(|m| m.variables.iter().map(|v| v.name.as_str())).collect()
    }

    pub fn label_names(&self) -> Vec<&str> {
        self.labels.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn reward_names(&self) -> Vec<Option<&str>> {
        self.rewards.iter().map(|r| r.name.as_deref()).collect()
    }

    /// Identifiers occurring where a parameter would change the state-space
    /// structure: guards, updates, variable ranges and initial values, and
    /// labels.
    pub fn structural_identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in &self.modules {
            for v in &m.variables {
                if let VarType::Range(lo, hi) = &v.ty {
                    out.extend(lo.free_params());
                    out.extend(hi.free_params());
                }
                if let Some(init) = &v.init {
                    out.extend(init.free_params());
                }
            }
            for cmd in &m.commands {
                out.extend(cmd.guard.free_params());
                for b in &cmd.branches {
                    for (_, e) in &b.assignments {
                        out.extend(e.free_params());
                    }
                }
            }
        }
        for (_, e) in &self.labels {
            out.extend(e.free_params());
        }
        for r in &self.rewards {
            for item in &r.items {
                out.extend(item.guard.free_params());
            }
        }
        out
    }

    fn for_each_expr_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        for c in &mut self.constants {
            if let Some(v) = &mut c.value {
                f(v);
            }
        }
        for m in &mut self.modules {
            for v in &mut m.variables {
                if let VarType::Range(lo, hi) = &mut v.ty {
                    f(lo);
                    f(hi);
                }
                if let Some(init) = &mut v.init {
                    f(init);
                }
            }
            for cmd in &mut m.commands {
                f(&mut cmd.guard);
                for b in &mut cmd.branches {
                    f(&mut b.weight);
                    for (_, e) in &mut b.assignments {
                        f(e);
                    }
                }
            }
        }
        for (_, e) in &mut self.labels {
            f(e);
        }
        for r in &mut self.rewards {
            for item in &mut r.items {
                f(&mut item.guard);
                f(&mut item.value);
            }
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let mut names: HashSet<&str> = HashSet::new();
        for c in &self.constants {
            if !names.insert(&c.name) {
                return Err(ModelError::Duplicate { what: "constant", name: c.name.clone() });
            }
        }
        let mut module_names = HashSet::new();
        for m in &self.modules {
            if !module_names.insert(m.name.as_str()) {
                return Err(ModelError::Duplicate { what: "module", name: m.name.clone() });
            }
            for v in &m.variables {
                if !names.insert(&v.name) {
                    return Err(ModelError::Duplicate { what: "variable", name: v.name.clone() });
                }
            }
        }
        for m in &self.modules {
            let own: HashSet<&str> = m.variables.iter().map(|v| v.name.as_str()).collect();
            for cmd in &m.commands {
                for b in &cmd.branches {
                    for (var, _) in &b.assignments {
                        if !own.contains(var.as_str()) {
                            return Err(ModelError::ForeignUpdate {
                                module: m.name.clone(),
                                var: var.clone(),
                            });
                        }
                    }
                }
            }
        }
        let mut label_names = HashSet::new();
        for (name, _) in &self.labels {
            if !label_names.insert(name.as_str()) {
                return Err(ModelError::Duplicate { what: "label", name: name.clone() });
            }
        }
        let mut reward_names = HashSet::new();
        for r in &self.rewards {
            if let Some(name) = &r.name {
                if !reward_names.insert(name.as_str()) {
                    return Err(ModelError::Duplicate { what: "reward structure", name: name.clone() });
                }
            }
        }
        if !self.observables.is_empty() && self.kind != ModelKind::Pomdp {
            return Err(ModelError::Unsupported("`observables` is only valid in a pomdp".into()));
        }
        let vars: HashSet<&str> = self.variable_names().into_iter().collect();
        for o in &self.observables {
            if !vars.contains(o.as_str()) {
                return Err(ModelError::UnknownObservable(o.clone()));
            }
        }
        self.check_initial_values()
    }

    /// Range/initial-value check for variables whose bounds only depend on
    /// defined constants; the rest is checked again at build time.
    fn check_initial_values(&self) -> Result<(), ModelError> {
        let mut defined = expr::Binding::new();
        for c in &self.constants {
            if let Some(v) = &c.value {
                if let Ok(value) = v.eval_rational(&defined) {
                    defined.set(c.name.clone(), value);
                }
            }
        }
        for m in &self.modules {
            for v in &m.variables {
                let VarType::Range(lo, hi) = &v.ty else { continue };
                let eval = |e: &Expr| e.eval_rational(&defined).ok().and_then(|r| {
                    if r.is_integer() {
                        num_traits::ToPrimitive::to_i64(&r.to_integer())
                    } else {
                        None
                    }
                });
                let (Some(lo), Some(hi)) = (eval(lo), eval(hi)) else { continue };
                if lo > hi {
                    return Err(ModelError::EmptyRange { var: v.name.clone(), lo, hi });
                }
                if let Some(init) = v.init.as_ref().and_then(eval) {
                    if init < lo || init > hi {
                        return Err(ModelError::InitOutOfRange {
                            var: v.name.clone(),
                            value: init,
                            lo,
                            hi,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
