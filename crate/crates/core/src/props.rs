//! PCTL/CSL property subset with reward and steady-state operators.
//!
//! A [`Property`] is an arithmetic combination of one or more [`Query`]
//! leaves, e.g. `P=?[F "a" & b]/P=?[F "a"]`. Engines evaluate each leaf
//! numerically and then fold the arithmetic.

use std::fmt;

use thiserror::Error;

use crate::expr::{self, BinOp, Expr};
use crate::prism::ModelKind;
use crate::syntax::{Cursor, ParseError, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opt {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Cmp::Lt => value < threshold,
            Cmp::Le => value <= threshold,
            Cmp::Gt => value > threshold,
            Cmp::Ge => value >= threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// Bound on a path formula: step count for discrete models, time interval
/// for ctmcs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathBound {
    Steps(u64),
    Interval(f64, f64),
}

/// Horizon of an instantaneous or cumulative reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Steps(u64),
    Time(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    False,
    Label(String),
    /// Boolean expression over variables and constants.
    Atom(Expr),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    /// Nested `P`/`R`/`S` operator; parsed but not checkable.
    Query(Box<Query>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    /// `F φ` is `true U φ`.
    Until { left: StateFormula, right: StateFormula, bound: Option<PathBound> },
    Globally { inner: StateFormula, bound: Option<PathBound> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardBody {
    Instant(Horizon),
    Cumulative(Horizon),
    Reach(StateFormula),
    Steady,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    P(PathFormula),
    R { reward: Option<String>, body: RewardBody },
    S(StateFormula),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub operator: Operator,
    pub opt: Option<Opt>,
    /// `None` for `=?`.
    pub bound: Option<(Cmp, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => a / b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    Query(Query),
    Num(f64),
    Neg(Box<Property>),
    Binary(ArithOp, Box<Property>, Box<Property>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropertyError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("property not applicable to a {kind}: {reason}")]
    KindMismatch { kind: ModelKind, reason: String },
    #[error("invalid bound: {0}")]
    InvalidBound(String),
}

pub fn parse_property(text: &str, kind: ModelKind) -> Result<Property, PropertyError> {
    let mut c = Cursor::new(text)?;
    let prop = parse_sum(&mut c)?;
    c.expect_eof()?;
    prop.normalize(kind)
}

fn parse_sum(c: &mut Cursor) -> Result<Property, PropertyError> {
    let mut lhs = parse_product(c)?;
    loop {
        let op = match c.peek() {
            Tok::Plus => ArithOp::Add,
            Tok::Minus => ArithOp::Sub,
            _ => return Ok(lhs),
        };
        c.bump();
        lhs = Property::Binary(op, Box::new(lhs), Box::new(parse_product(c)?));
    }
}

fn parse_product(c: &mut Cursor) -> Result<Property, PropertyError> {
    let mut lhs = parse_factor(c)?;
    loop {
        let op = match c.peek() {
            Tok::Star => ArithOp::Mul,
            Tok::Slash => ArithOp::Div,
            _ => return Ok(lhs),
        };
        c.bump();
        lhs = Property::Binary(op, Box::new(lhs), Box::new(parse_factor(c)?));
    }
}

fn parse_factor(c: &mut Cursor) -> Result<Property, PropertyError> {
    match c.peek().clone() {
        Tok::Minus => {
            c.bump();
            Ok(Property::Neg(Box::new(parse_factor(c)?)))
        }
        Tok::Number(_) => Ok(Property::Num(parse_number(c)?)),
        Tok::LParen => {
            c.bump();
            let inner = parse_sum(c)?;
            c.expect(&Tok::RParen)?;
            Ok(inner)
        }
        Tok::Ident(_) if at_query(c) => Ok(Property::Query(parse_query(c)?)),
        _ => Err(c.error(&["`P`", "`R`", "`S`", "number", "`(`"]).into()),
    }
}

fn at_query(c: &Cursor) -> bool {
    let Tok::Ident(word) = c.peek() else { return false };
    if !matches!(word.as_str(), "P" | "Pmin" | "Pmax" | "R" | "Rmin" | "Rmax" | "S") {
        return false;
    }
    matches!(
        c.peek_at(1),
        Tok::Eq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::LBrace | Tok::LBracket
    )
}

fn parse_number(c: &mut Cursor) -> Result<f64, PropertyError> {
    let offset = c.offset();
    match c.bump() {
        Tok::Number(text) => text.parse::<f64>().map_err(|_| {
            PropertyError::Syntax(ParseError { offset, expected: vec!["number".into()], found: text })
        }),
        other => Err(PropertyError::Syntax(ParseError {
            offset,
            expected: vec!["number".into()],
            found: other.to_string(),
        })),
    }
}

fn parse_query(c: &mut Cursor) -> Result<Query, PropertyError> {
    let word = c.expect_ident()?;
    let (letter, opt) = match word.as_str() {
        "P" => ('P', None),
        "Pmin" => ('P', Some(Opt::Min)),
        "Pmax" => ('P', Some(Opt::Max)),
        "R" => ('R', None),
        "Rmin" => ('R', Some(Opt::Min)),
        "Rmax" => ('R', Some(Opt::Max)),
        _ => ('S', None),
    };
    let reward = if letter == 'R' && c.eat(&Tok::LBrace) {
        let name = c.expect_string()?;
        c.expect(&Tok::RBrace)?;
        Some(name)
    } else {
        None
    };
    let bound = if c.eat(&Tok::Eq) {
        c.expect(&Tok::Question)?;
        None
    } else {
        let cmp = match c.peek() {
            Tok::Lt => Cmp::Lt,
            Tok::Le => Cmp::Le,
            Tok::Gt => Cmp::Gt,
            Tok::Ge => Cmp::Ge,
            _ => return Err(c.error(&["`=?`", "comparison"]).into()),
        };
        c.bump();
        Some((cmp, parse_number(c)?))
    };
    c.expect(&Tok::LBracket)?;
    let operator = match letter {
        'P' => Operator::P(parse_path(c)?),
        'R' => Operator::R { reward, body: parse_reward_body(c)? },
        _ => Operator::S(parse_state(c)?),
    };
    c.expect(&Tok::RBracket)?;
    Ok(Query { operator, opt, bound })
}

fn parse_path_bound(c: &mut Cursor) -> Result<Option<PathBound>, PropertyError> {
    if c.eat(&Tok::Le) {
        let offset = c.offset();
        let value = parse_number(c)?;
        // Stored as an interval; check_kind converts to steps for discrete
        // models.
        if value < 0.0 {
            return Err(PropertyError::InvalidBound(format!("negative bound at byte {offset}")));
        }
        return Ok(Some(PathBound::Interval(0.0, value)));
    }
    if c.at(&Tok::LBracket) {
        c.bump();
        let lo = parse_number(c)?;
        c.expect(&Tok::Comma)?;
        let hi = parse_number(c)?;
        c.expect(&Tok::RBracket)?;
        if !(0.0 <= lo && lo <= hi) {
            return Err(PropertyError::InvalidBound(format!("interval [{lo},{hi}] needs 0 <= t1 <= t2")));
        }
        return Ok(Some(PathBound::Interval(lo, hi)));
    }
    Ok(None)
}

fn parse_path(c: &mut Cursor) -> Result<PathFormula, PropertyError> {
    if c.eat_keyword("X") {
        return Ok(PathFormula::Next(parse_state(c)?));
    }
    if c.eat_keyword("F") {
        let bound = parse_path_bound(c)?;
        let right = parse_state(c)?;
        return Ok(PathFormula::Until { left: StateFormula::True, right, bound });
    }
    if c.eat_keyword("G") {
        let bound = parse_path_bound(c)?;
        return Ok(PathFormula::Globally { inner: parse_state(c)?, bound });
    }
    let left = parse_state(c)?;
    c.expect_keyword("U")?;
    let bound = parse_path_bound(c)?;
    let right = parse_state(c)?;
    Ok(PathFormula::Until { left, right, bound })
}

fn parse_reward_body(c: &mut Cursor) -> Result<RewardBody, PropertyError> {
    if c.at_keyword("I") && c.peek_at(1) == &Tok::Eq {
        c.bump();
        c.bump();
        return Ok(RewardBody::Instant(parse_horizon(c)?));
    }
    if c.at_keyword("C") && c.peek_at(1) == &Tok::Le {
        c.bump();
        c.bump();
        return Ok(RewardBody::Cumulative(parse_horizon(c)?));
    }
    if c.eat_keyword("F") {
        return Ok(RewardBody::Reach(parse_state(c)?));
    }
    if c.eat_keyword("S") {
        return Ok(RewardBody::Steady);
    }
    Err(c.error(&["`I=`", "`C<=`", "`F`", "`S`"]).into())
}

fn parse_horizon(c: &mut Cursor) -> Result<Horizon, PropertyError> {
    let value = parse_number(c)?;
    if value < 0.0 {
        return Err(PropertyError::InvalidBound("negative reward horizon".into()));
    }
    Ok(Horizon::Time(value))
}

pub fn parse_state_formula(text: &str) -> Result<StateFormula, PropertyError> {
    let mut c = Cursor::new(text)?;
    let f = parse_state(&mut c)?;
    c.expect_eof()?;
    Ok(f)
}

fn parse_state(c: &mut Cursor) -> Result<StateFormula, PropertyError> {
    let mut lhs = parse_state_and(c)?;
    while c.eat(&Tok::Pipe) {
        lhs = StateFormula::Or(Box::new(lhs), Box::new(parse_state_and(c)?));
    }
    Ok(lhs)
}

fn parse_state_and(c: &mut Cursor) -> Result<StateFormula, PropertyError> {
    let mut lhs = parse_state_unary(c)?;
    while c.eat(&Tok::Amp) {
        lhs = StateFormula::And(Box::new(lhs), Box::new(parse_state_unary(c)?));
    }
    Ok(lhs)
}

fn parse_state_unary(c: &mut Cursor) -> Result<StateFormula, PropertyError> {
    if c.eat(&Tok::Bang) {
        return Ok(StateFormula::Not(Box::new(parse_state_unary(c)?)));
    }
    parse_state_atom(c)
}

fn parse_state_atom(c: &mut Cursor) -> Result<StateFormula, PropertyError> {
    match c.peek().clone() {
        Tok::Str(name) => {
            c.bump();
            Ok(StateFormula::Label(name))
        }
        Tok::Ident(_) if at_query(c) => Ok(StateFormula::Query(Box::new(parse_query(c)?))),
        Tok::LParen => {
            // `(` opens either a state formula or an arithmetic operand.
            let start = c.save();
            c.bump();
            if let Ok(inner) = parse_state(c) {
                if c.eat(&Tok::RParen) && !continues_expression(c.peek()) {
                    return Ok(inner);
                }
            }
            c.restore(start);
            atom_expression(c)
        }
        _ => atom_expression(c),
    }
}

fn continues_expression(tok: &Tok) -> bool {
    matches!(
        tok,
        Tok::Eq
            | Tok::Neq
            | Tok::Lt
            | Tok::Le
            | Tok::Gt
            | Tok::Ge
            | Tok::Plus
            | Tok::Minus
            | Tok::Star
            | Tok::Slash
            | Tok::Question
    )
}

fn atom_expression(c: &mut Cursor) -> Result<StateFormula, PropertyError> {
    let e = expr::parse_comparison(c)?;
    Ok(match e {
        Expr::Bool(true) => StateFormula::True,
        Expr::Bool(false) => StateFormula::False,
        other => StateFormula::Atom(other),
    })
}

impl PathBound {
    /// Upper end of the bound as a step count.
    pub fn steps(self) -> Option<u64> {
        match self {
            PathBound::Steps(k) => Some(k),
            PathBound::Interval(..) => None,
        }
    }
}

fn as_steps(value: f64, what: &str) -> Result<u64, PropertyError> {
    if value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
        Ok(value as u64)
    } else {
        Err(PropertyError::InvalidBound(format!("{what} must be a non-negative integer, got {value}")))
    }
}

impl Property {
    pub fn leaves(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Query>) {
        match self {
            Property::Query(q) => out.push(q),
            Property::Num(_) => {}
            Property::Neg(p) => p.collect_leaves(out),
            Property::Binary(_, a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    fn leaves_mut(&mut self, f: &mut dyn FnMut(&mut Query) -> Result<(), PropertyError>) -> Result<(), PropertyError> {
        match self {
            Property::Query(q) => f(q),
            Property::Num(_) => Ok(()),
            Property::Neg(p) => p.leaves_mut(f),
            Property::Binary(_, a, b) => {
                a.leaves_mut(f)?;
                b.leaves_mut(f)
            }
        }
    }

    /// The single query when the property has no arithmetic wrapper.
    pub fn as_query(&self) -> Option<&Query> {
        match self {
            Property::Query(q) => Some(q),
            _ => None,
        }
    }

    /// Folds the arithmetic given one value per leaf (in [`Property::leaves`]
    /// order).
    pub fn combine(&self, values: &[f64]) -> f64 {
        let mut it = values.iter().copied();
        let v = self.combine_iter(&mut it);
        debug_assert!(it.next().is_none());
        v
    }

    fn combine_iter(&self, it: &mut impl Iterator<Item = f64>) -> f64 {
        match self {
            Property::Query(_) => it.next().expect("one value per leaf"),
            Property::Num(v) => *v,
            Property::Neg(p) => -p.combine_iter(it),
            Property::Binary(op, a, b) => {
                let a = a.combine_iter(it);
                let b = b.combine_iter(it);
                op.apply(a, b)
            }
        }
    }

    pub fn has_nested_query(&self) -> bool {
        self.leaves().iter().any(|q| q.has_nested_query())
    }

    /// Normalizes bounds for `kind` and rejects operators it does not
    /// support.
    pub fn check_kind(&self, kind: ModelKind) -> Result<(), PropertyError> {
        self.clone().normalize(kind).map(|_| ())
    }

    /// Like [`parse_property`]'s kind check, returning the normalized form.
    pub fn normalize(mut self, kind: ModelKind) -> Result<Property, PropertyError> {
        self.leaves_mut(&mut |q| q.normalize(kind))?;
        Ok(self)
    }

    fn precedence(&self) -> u8 {
        match self {
            Property::Binary(op, ..) => op.precedence(),
            Property::Neg(_) => 3,
            _ => 4,
        }
    }
}

impl Query {
    pub fn has_nested_query(&self) -> bool {
        match &self.operator {
            Operator::P(PathFormula::Next(f)) => f.has_nested_query(),
            Operator::P(PathFormula::Until { left, right, .. }) => {
                left.has_nested_query() || right.has_nested_query()
            }
            Operator::P(PathFormula::Globally { inner, .. }) => inner.has_nested_query(),
            Operator::R { body: RewardBody::Reach(f), .. } => f.has_nested_query(),
            Operator::R { .. } => false,
            Operator::S(f) => f.has_nested_query(),
        }
    }

    pub fn is_probability(&self) -> bool {
        matches!(self.operator, Operator::P(_) | Operator::S(_))
    }

    fn normalize(&mut self, kind: ModelKind) -> Result<(), PropertyError> {
        let mismatch = |reason: &str| PropertyError::KindMismatch { kind, reason: reason.to_string() };
        if let Some((_, threshold)) = self.bound {
            if self.is_probability() && !(0.0..=1.0).contains(&threshold) {
                return Err(PropertyError::InvalidBound(format!(
                    "probability threshold {threshold} outside [0,1]"
                )));
            }
        }
        if kind.is_nondeterministic() {
            if self.opt.is_none() && self.bound.is_none() {
                return Err(mismatch("nondeterministic models need `min=?` or `max=?`"));
            }
        } else if self.opt.is_some() {
            return Err(mismatch("min/max qualifiers need an mdp or pomdp"));
        }
        let discrete = kind.is_discrete();
        let fix_bound = |b: &mut Option<PathBound>| -> Result<(), PropertyError> {
            match *b {
                Some(PathBound::Interval(lo, hi)) if discrete => {
                    if lo != 0.0 {
                        return Err(mismatch("time intervals `[t1,t2]` need a ctmc"));
                    }
                    *b = Some(PathBound::Steps(as_steps(hi, "step bound")?));
                }
                Some(PathBound::Steps(k)) if !discrete => {
                    *b = Some(PathBound::Interval(0.0, k as f64));
                }
                _ => {}
            }
            Ok(())
        };
        let fix_horizon = |h: &mut Horizon| -> Result<(), PropertyError> {
            match *h {
                Horizon::Time(t) if discrete => *h = Horizon::Steps(as_steps(t, "reward horizon")?),
                Horizon::Steps(k) if !discrete => *h = Horizon::Time(k as f64),
                _ => {}
            }
            Ok(())
        };
        match &mut self.operator {
            Operator::P(PathFormula::Next(f)) => f.normalize(kind)?,
            Operator::P(PathFormula::Until { left, right, bound }) => {
                left.normalize(kind)?;
                right.normalize(kind)?;
                fix_bound(bound)?;
            }
            Operator::P(PathFormula::Globally { inner, bound }) => {
                inner.normalize(kind)?;
                fix_bound(bound)?;
            }
            Operator::R { body, .. } => match body {
                RewardBody::Instant(h) | RewardBody::Cumulative(h) => fix_horizon(h)?,
                RewardBody::Reach(f) => f.normalize(kind)?,
                RewardBody::Steady => {
                    if kind.is_nondeterministic() {
                        return Err(mismatch("long-run rewards need a dtmc or ctmc"));
                    }
                }
            },
            Operator::S(f) => {
                if kind.is_nondeterministic() {
                    return Err(mismatch("the S operator needs a dtmc or ctmc"));
                }
                f.normalize(kind)?;
            }
        }
        Ok(())
    }
}

impl StateFormula {
    pub fn has_nested_query(&self) -> bool {
        match self {
            StateFormula::Query(_) => true,
            StateFormula::Not(f) => f.has_nested_query(),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => a.has_nested_query() || b.has_nested_query(),
            _ => false,
        }
    }

    pub fn negate(self) -> StateFormula {
        StateFormula::Not(Box::new(self))
    }

    fn normalize(&mut self, kind: ModelKind) -> Result<(), PropertyError> {
        match self {
            StateFormula::Query(q) => q.normalize(kind),
            StateFormula::Not(f) => f.normalize(kind),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => {
                a.normalize(kind)?;
                b.normalize(kind)
            }
            _ => Ok(()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            StateFormula::Or(..) => 1,
            StateFormula::And(..) => 2,
            StateFormula::Not(_) => 3,
            _ => 4,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Whether the properties can be turned into rational functions of their
/// model's parameters: unbounded reachability probabilities and rewards on
/// dtmcs without nested operators, or steady-state queries on ctmcs.
pub fn parametric_feasible(props: &[(&Property, ModelKind)]) -> bool {
    props.iter().all(|(p, kind)| {
        p.leaves().iter().all(|q| leaf_feasible(q, *kind))
    })
}

fn leaf_feasible(q: &Query, kind: ModelKind) -> bool {
    if q.has_nested_query() || q.opt.is_some() {
        return false;
    }
    match kind {
        ModelKind::Dtmc => matches!(
            q.operator,
            Operator::P(PathFormula::Until { bound: None, .. })
                | Operator::R { body: RewardBody::Reach(_), .. }
        ),
        ModelKind::Ctmc => {
            matches!(q.operator, Operator::S(_) | Operator::R { body: RewardBody::Steady, .. })
        }
        _ => false,
    }
}

fn fmt_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    write!(f, "{v}")
}

impl fmt::Display for PathBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathBound::Steps(k) => write!(f, "<={k}"),
            PathBound::Interval(lo, hi) => write!(f, "[{lo},{hi}]"),
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Steps(k) => write!(f, "{k}"),
            Horizon::Time(t) => fmt_number(f, *t),
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("true"),
            StateFormula::False => f.write_str("false"),
            StateFormula::Label(name) => write!(f, "\"{name}\""),
            StateFormula::Atom(e) => {
                let comparison_or_tighter = match e {
                    Expr::Binary(op, ..) => op.is_comparison() || !matches!(op, BinOp::And | BinOp::Or | BinOp::Implies),
                    Expr::Ite(..) => false,
                    _ => true,
                };
                if comparison_or_tighter {
                    write!(f, "{e}")
                } else {
                    write!(f, "({e})")
                }
            }
            StateFormula::Not(inner) => {
                f.write_str("!")?;
                inner.write_child(f, 3)
            }
            StateFormula::And(a, b) => {
                a.write_child(f, 2)?;
                f.write_str(" & ")?;
                b.write_child(f, 3)
            }
            StateFormula::Or(a, b) => {
                a.write_child(f, 1)?;
                f.write_str(" | ")?;
                b.write_child(f, 2)
            }
            StateFormula::Query(q) => write!(f, "{q}"),
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bound = |f: &mut fmt::Formatter<'_>, b: &Option<PathBound>| match b {
            Some(b) => write!(f, "{b}"),
            None => Ok(()),
        };
        match self {
            PathFormula::Next(inner) => write!(f, "X {inner}"),
            PathFormula::Until { left: StateFormula::True, right, bound: b } => {
                f.write_str("F")?;
                bound(f, b)?;
                write!(f, " {right}")
            }
            PathFormula::Until { left, right, bound: b } => {
                // `U` binds looser than `|`, so no parentheses are needed.
                write!(f, "{left} U")?;
                bound(f, b)?;
                write!(f, " {right}")
            }
            PathFormula::Globally { inner, bound: b } => {
                f.write_str("G")?;
                bound(f, b)?;
                write!(f, " {inner}")
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.operator {
            Operator::P(_) => "P",
            Operator::R { .. } => "R",
            Operator::S(_) => "S",
        };
        f.write_str(letter)?;
        match self.opt {
            Some(Opt::Min) => f.write_str("min")?,
            Some(Opt::Max) => f.write_str("max")?,
            None => {}
        }
        if let Operator::R { reward: Some(name), .. } = &self.operator {
            write!(f, "{{\"{name}\"}}")?;
        }
        match self.bound {
            None => f.write_str("=?")?,
            Some((cmp, t)) => {
                f.write_str(cmp.symbol())?;
                fmt_number(f, t)?;
            }
        }
        f.write_str("[")?;
        match &self.operator {
            Operator::P(path) => write!(f, "{path}")?,
            Operator::R { body, .. } => match body {
                RewardBody::Instant(h) => write!(f, "I={h}")?,
                RewardBody::Cumulative(h) => write!(f, "C<={h}")?,
                RewardBody::Reach(target) => write!(f, "F {target}")?,
                RewardBody::Steady => f.write_str("S")?,
            },
            Operator::S(inner) => write!(f, "{inner}")?,
        }
        f.write_str("]")
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Query(q) => write!(f, "{q}"),
            Property::Num(v) => fmt_number(f, *v),
            Property::Neg(p) => {
                if p.precedence() < 3 {
                    write!(f, "-({p})")
                } else {
                    write!(f, "-{p}")
                }
            }
            Property::Binary(op, a, b) => {
                let p = op.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, "{}", op.symbol())?;
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}
