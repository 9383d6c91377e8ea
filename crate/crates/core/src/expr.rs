//! Arithmetic and boolean expressions over named constants and model
//! variables.
//!
//! Values are exact rationals; decimal literals are read exactly, so `0.1`
//! is `1/10`. Engines convert to `f64` only when assembling matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::num::{format_decimal, parse_rational};
use crate::syntax::{Cursor, ParseError, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Neq => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Implies => "=>",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Min,
    Max,
    Pow,
    Floor,
    Ceil,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            _ => return None,
        })
    }
}

/// Expression tree. Identifiers are resolved late: the same node kind
/// refers to a model variable, a constant or a parameter depending on the
/// environment it is evaluated in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(BigRational),
    Bool(bool),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Num(BigRational),
    Bool(bool),
}

impl Value {
    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Value::Num(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Num(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => f.write_str(&crate::num::canonical_text(v)),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("unbound parameter `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("type error: {0}")]
    Type(String),
    #[error("parameter `{0}` bound twice")]
    DuplicateBinding(String),
}

/// Values for named parameters; each name is bound at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Binding(BTreeMap<String, BigRational>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds a fresh name; rebinding is an error.
    pub fn bind(&mut self, name: impl Into<String>, value: BigRational) -> Result<(), ExprError> {
        let name = name.into();
        if self.0.contains_key(&name) {
            return Err(ExprError::DuplicateBinding(name));
        }
        self.0.insert(name, value);
        Ok(())
    }

    /// Binds or replaces.
    pub fn set(&mut self, name: impl Into<String>, value: BigRational) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&BigRational> {
        self.0.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<BigRational> {
        self.0.remove(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BigRational)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical `name=value;` text, stable across runs.
    pub fn fingerprint(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={};", crate::num::canonical_text(v)))
            .collect()
    }
}

impl<S: Into<String>> FromIterator<(S, BigRational)> for Binding {
    fn from_iter<T: IntoIterator<Item = (S, BigRational)>>(iter: T) -> Self {
        Binding(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut cursor = Cursor::new(text)?;
    let expr = parse_expression(&mut cursor)?;
    cursor.expect_eof()?;
    Ok(expr)
}

/// Full expression, including the ternary conditional.
pub fn parse_expression(c: &mut Cursor) -> Result<Expr, ParseError> {
    let cond = parse_implies(c)?;
    if c.eat(&Tok::Question) {
        let then = parse_expression(c)?;
        c.expect(&Tok::Colon)?;
        let other = parse_expression(c)?;
        return Ok(Expr::Ite(Box::new(cond), Box::new(then), Box::new(other)));
    }
    Ok(cond)
}

fn parse_implies(c: &mut Cursor) -> Result<Expr, ParseError> {
    let lhs = parse_or(c)?;
    if c.eat(&Tok::Implies) {
        let rhs = parse_or(c)?;
        return Ok(Expr::Binary(BinOp::Implies, Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

fn parse_or(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_and(c)?;
    while c.eat(&Tok::Pipe) {
        let rhs = parse_and(c)?;
        lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_comparison(c)?;
    while c.eat(&Tok::Amp) {
        let rhs = parse_comparison(c)?;
        lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

/// Arithmetic term optionally followed by a single comparison; the entry
/// point property atoms use.
pub fn parse_comparison(c: &mut Cursor) -> Result<Expr, ParseError> {
    let lhs = parse_additive(c)?;
    let op = match c.peek() {
        Tok::Eq => BinOp::Eq,
        Tok::Neq => BinOp::Neq,
        Tok::Lt => BinOp::Lt,
        Tok::Le => BinOp::Le,
        Tok::Gt => BinOp::Gt,
        Tok::Ge => BinOp::Ge,
        _ => return Ok(lhs),
    };
    c.bump();
    let rhs = parse_additive(c)?;
    Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
}

pub fn parse_additive(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_multiplicative(c)?;
    loop {
        let op = match c.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            _ => return Ok(lhs),
        };
        c.bump();
        let rhs = parse_multiplicative(c)?;
        lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_multiplicative(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_unary(c)?;
    loop {
        let op = match c.peek() {
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return Ok(lhs),
        };
        c.bump();
        let rhs = parse_unary(c)?;
        lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_unary(c: &mut Cursor) -> Result<Expr, ParseError> {
    if c.eat(&Tok::Minus) {
        return Ok(Expr::Unary(UnaryOp::Neg, Box::new(parse_unary(c)?)));
    }
    if c.eat(&Tok::Bang) {
        return Ok(Expr::Unary(UnaryOp::Not, Box::new(parse_unary(c)?)));
    }
    parse_primary(c)
}

fn parse_primary(c: &mut Cursor) -> Result<Expr, ParseError> {
    match c.peek().clone() {
        Tok::Number(text) => {
            let value = parse_rational(&text).ok_or_else(|| c.error(&["number"]))?;
            c.bump();
            Ok(Expr::Num(value))
        }
        Tok::Ident(name) => {
            c.bump();
            match name.as_str() {
                "true" => return Ok(Expr::Bool(true)),
                "false" => return Ok(Expr::Bool(false)),
                _ => {}
            }
            if let Some(func) = Func::from_name(&name) {
                if c.eat(&Tok::LParen) {
                    let mut args = vec![parse_expression(c)?];
                    while c.eat(&Tok::Comma) {
                        args.push(parse_expression(c)?);
                    }
                    c.expect(&Tok::RParen)?;
                    return Ok(Expr::Call(func, args));
                }
            }
            Ok(Expr::Ident(name))
        }
        Tok::LParen => {
            c.bump();
            let inner = parse_expression(c)?;
            c.expect(&Tok::RParen)?;
            Ok(inner)
        }
        _ => Err(c.error(&["number", "identifier", "`(`", "`-`", "`!`"])),
    }
}

fn bool_of(v: Value) -> Result<bool, ExprError> {
    v.as_bool().ok_or_else(|| ExprError::Type(format!("expected boolean, found {v}")))
}

fn num_of(v: Value) -> Result<BigRational, ExprError> {
    match v {
        Value::Num(n) => Ok(n),
        Value::Bool(b) => Err(ExprError::Type(format!("expected number, found {b}"))),
    }
}

fn integer_exponent(v: &BigRational) -> Result<i32, ExprError> {
    if !v.is_integer() {
        return Err(ExprError::Type("pow exponent must be an integer".into()));
    }
    v.to_integer().to_i32().ok_or_else(|| ExprError::Type("pow exponent too large".into()))
}

impl Expr {
    pub fn num(value: BigRational) -> Self {
        Expr::Num(value)
    }

    pub fn int(value: i64) -> Self {
        Expr::Num(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ident(name: impl Into<String>) -> Self {
        Expr::Ident(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Evaluates under an environment resolving identifiers.
    pub fn eval_with<F>(&self, env: &F) -> Result<Value, ExprError>
    where
        F: Fn(&str) -> Option<Value>,
    {
        match self {
            Expr::Num(v) => Ok(Value::Num(v.clone())),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Ident(name) => env(name).ok_or_else(|| ExprError::Unbound(name.clone())),
            Expr::Unary(UnaryOp::Neg, inner) => Ok(Value::Num(-num_of(inner.eval_with(env)?)?)),
            Expr::Unary(UnaryOp::Not, inner) => Ok(Value::Bool(!bool_of(inner.eval_with(env)?)?)),
            Expr::Binary(op, lhs, rhs) => {
                match op {
                    BinOp::And => {
                        if !bool_of(lhs.eval_with(env)?)? {
                            return Ok(Value::Bool(false));
                        }
                        return Ok(Value::Bool(bool_of(rhs.eval_with(env)?)?));
                    }
                    BinOp::Or => {
                        if bool_of(lhs.eval_with(env)?)? {
                            return Ok(Value::Bool(true));
                        }
                        return Ok(Value::Bool(bool_of(rhs.eval_with(env)?)?));
                    }
                    BinOp::Implies => {
                        if !bool_of(lhs.eval_with(env)?)? {
                            return Ok(Value::Bool(true));
                        }
                        return Ok(Value::Bool(bool_of(rhs.eval_with(env)?)?));
                    }
                    _ => {}
                }
                let l = lhs.eval_with(env)?;
                let r = rhs.eval_with(env)?;
                if matches!(op, BinOp::Eq | BinOp::Neq) {
                    if let (Value::Bool(a), Value::Bool(b)) = (&l, &r) {
                        let eq = a == b;
                        return Ok(Value::Bool(if *op == BinOp::Eq { eq } else { !eq }));
                    }
                }
                let a = num_of(l)?;
                let b = num_of(r)?;
                Ok(match op {
                    BinOp::Add => Value::Num(a + b),
                    BinOp::Sub => Value::Num(a - b),
                    BinOp::Mul => Value::Num(a * b),
                    BinOp::Div => {
                        if b.is_zero() {
                            return Err(ExprError::DivisionByZero);
                        }
                        Value::Num(a / b)
                    }
                    BinOp::Eq => Value::Bool(a == b),
                    BinOp::Neq => Value::Bool(a != b),
                    BinOp::Lt => Value::Bool(a < b),
                    BinOp::Le => Value::Bool(a <= b),
                    BinOp::Gt => Value::Bool(a > b),
                    BinOp::Ge => Value::Bool(a >= b),
                    BinOp::And | BinOp::Or | BinOp::Implies => unreachable!(),
                })
            }
            Expr::Ite(cond, then, other) => {
                if bool_of(cond.eval_with(env)?)? {
                    then.eval_with(env)
                } else {
                    other.eval_with(env)
                }
            }
            Expr::Call(func, args) => {
                let values = args
                    .iter()
                    .map(|a| a.eval_with(env).and_then(num_of))
                    .collect::<Result<Vec<_>, _>>()?;
                let arity = |n: usize| {
                    if values.len() == n {
                        Ok(())
                    } else {
                        Err(ExprError::Type(format!("{} expects {n} argument(s)", func.name())))
                    }
                };
                match func {
                    Func::Min | Func::Max => {
                        let mut it = values.into_iter();
                        let first = it.next().ok_or_else(|| {
                            ExprError::Type(format!("{} needs arguments", func.name()))
                        })?;
                        Ok(Value::Num(it.fold(first, |acc, v| {
                            if (*func == Func::Min) == (v < acc) {
                                v
                            } else {
                                acc
                            }
                        })))
                    }
                    Func::Pow => {
                        arity(2)?;
                        let exp = integer_exponent(&values[1])?;
                        if exp < 0 && values[0].is_zero() {
                            return Err(ExprError::DivisionByZero);
                        }
                        Ok(Value::Num(num_traits::pow::Pow::pow(&values[0], exp)))
                    }
                    Func::Floor => {
                        arity(1)?;
                        Ok(Value::Num(values[0].floor()))
                    }
                    Func::Ceil => {
                        arity(1)?;
                        Ok(Value::Num(values[0].ceil()))
                    }
                }
            }
        }
    }

    pub fn eval(&self, binding: &Binding) -> Result<Value, ExprError> {
        self.eval_with(&|name: &str| binding.get(name).map(|v| Value::Num(v.clone())))
    }

    /// Evaluates an arithmetic expression to an exact rational.
    pub fn eval_rational(&self, binding: &Binding) -> Result<BigRational, ExprError> {
        num_of(self.eval(binding)?)
    }

    /// Every identifier reachable in the tree.
    pub fn free_params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_idents(&mut out);
        out
    }

    fn collect_idents(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Ident(name) => {
                out.insert(name.clone());
            }
            Expr::Unary(_, e) => e.collect_idents(out),
            Expr::Binary(_, a, b) => {
                a.collect_idents(out);
                b.collect_idents(out);
            }
            Expr::Ite(a, b, c) => {
                a.collect_idents(out);
                b.collect_idents(out);
                c.collect_idents(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_idents(out)),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expr::Num(_) | Expr::Bool(_) => false,
            Expr::Ident(n) => n == name,
            Expr::Unary(_, e) => e.mentions(name),
            Expr::Binary(_, a, b) => a.mentions(name) || b.mentions(name),
            Expr::Ite(a, b, c) => a.mentions(name) || b.mentions(name) || c.mentions(name),
            Expr::Call(_, args) => args.iter().any(|a| a.mentions(name)),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Expr::Num(_) | Expr::Bool(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Expr::Num(v) => Some(v),
            _ => None,
        }
    }

    /// Replaces identifiers the lookup resolves, then folds constants.
    pub fn substitute<F>(&self, lookup: &F) -> Expr
    where
        F: Fn(&str) -> Option<Expr>,
    {
        self.replace_idents(lookup).fold()
    }

    /// Replaces identifiers without folding.
    pub fn replace_idents<F>(&self, lookup: &F) -> Expr
    where
        F: Fn(&str) -> Option<Expr>,
    {
        match self {
            Expr::Ident(name) => lookup(name).unwrap_or_else(|| self.clone()),
            Expr::Num(_) | Expr::Bool(_) => self.clone(),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.replace_idents(lookup))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.replace_idents(lookup)), Box::new(b.replace_idents(lookup)))
            }
            Expr::Ite(a, b, c) => Expr::Ite(
                Box::new(a.replace_idents(lookup)),
                Box::new(b.replace_idents(lookup)),
                Box::new(c.replace_idents(lookup)),
            ),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.replace_idents(lookup)).collect()),
        }
    }

    /// Constant folding. Subtrees without identifiers are evaluated; a few
    /// identities (`x+0`, `x*1`, `x-0`, `x/1`) are simplified. Subtrees whose
    /// evaluation fails are left untouched so the error surfaces at
    /// evaluation time.
    pub fn fold(&self) -> Expr {
        let folded = match self {
            Expr::Num(_) | Expr::Bool(_) | Expr::Ident(_) => return self.clone(),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.fold())),
            Expr::Binary(op, a, b) => {
                let a = a.fold();
                let b = b.fold();
                let zero = |e: &Expr| e.as_rational().is_some_and(|v| v.is_zero());
                let one = |e: &Expr| e.as_rational().is_some_and(|v| v.is_one());
                match op {
                    BinOp::Add if zero(&a) && !b.is_constant() => return b,
                    BinOp::Add | BinOp::Sub if zero(&b) && !a.is_constant() => return a,
                    BinOp::Mul if one(&a) && !b.is_constant() => return b,
                    BinOp::Mul | BinOp::Div if one(&b) && !a.is_constant() => return a,
                    _ => {}
                }
                Expr::Binary(*op, Box::new(a), Box::new(b))
            }
            Expr::Ite(c, t, e) => {
                let c = c.fold();
                match c {
                    Expr::Bool(true) => return t.fold(),
                    Expr::Bool(false) => return e.fold(),
                    _ => Expr::Ite(Box::new(c), Box::new(t.fold()), Box::new(e.fold())),
                }
            }
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(Expr::fold).collect()),
        };
        let children_constant = match &folded {
            Expr::Unary(_, e) => e.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Call(_, args) => args.iter().all(Expr::is_constant),
            _ => false,
        };
        if children_constant {
            if let Ok(value) = folded.eval_with(&|_: &str| None) {
                return match value {
                    Value::Num(v) => Expr::Num(v),
                    Value::Bool(b) => Expr::Bool(b),
                };
            }
        }
        folded
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Ite(..) => 0,
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 7,
            Expr::Num(v) if v.is_negative() && format_decimal(v).is_some() => 7,
            _ => 8,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => match format_decimal(v) {
                Some(text) => f.write_str(&text),
                None => write!(f, "({}/{})", v.numer(), v.denom()),
            },
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                })?;
                e.write_child(f, e.precedence() < 7)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let associative_left = !op.is_comparison() && *op != BinOp::Implies;
                let left_parens =
                    if associative_left { a.precedence() < p } else { a.precedence() <= p };
                a.write_child(f, left_parens)?;
                write!(f, " {} ", op.symbol())?;
                b.write_child(f, b.precedence() <= p)
            }
            Expr::Ite(c, t, e) => {
                c.write_child(f, c.precedence() <= 1)?;
                f.write_str(" ? ")?;
                t.write_child(f, t.precedence() == 0)?;
                f.write_str(" : ")?;
                e.write_child(f, false)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rational;

    fn bind(pairs: &[(&str, BigRational)]) -> Binding {
        pairs.iter().map(|(k, v)| (*k, v.clone())).collect()
    }

    #[test]
    fn literal_is_exact() {
        assert_eq!(parse_expr("0.8").unwrap(), Expr::Num(rational(4, 5)));
    }

    #[test]
    fn one_minus_parameter() {
        assert_eq!(
            parse_expr("1-pRetry").unwrap(),
            Expr::binary(BinOp::Sub, Expr::int(1), Expr::ident("pRetry"))
        );
    }

    #[test]
    fn product_of_parameters() {
        assert_eq!(
            parse_expr("psucc*rPick").unwrap(),
            Expr::binary(BinOp::Mul, Expr::ident("psucc"), Expr::ident("rPick"))
        );
    }

    #[test]
    fn precedence_and_printing() {
        let e = parse_expr("a + b * c - (d - e)").unwrap();
        assert_eq!(e.to_string(), "a + b * c - (d - e)");
        let e = parse_expr("!x & y = 1 | z").unwrap();
        assert_eq!(e.to_string(), "!x & y = 1 | z");
        let e = parse_expr("-(a+b)/2").unwrap();
        assert_eq!(e.to_string(), "-(a + b) / 2");
        let e = parse_expr("c ? 1 : d ? 2 : 3").unwrap();
        assert_eq!(e.to_string(), "c ? 1 : d ? 2 : 3");
    }

    #[test]
    fn syntax_error_reports_offset_and_expectation() {
        let err = parse_expr("1 + * 2").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.expected.iter().any(|e| e == "number"));
        let err = parse_expr("(a + b").unwrap_err();
        assert_eq!(err.offset, 6);
    }

    #[test]
    fn eval_examples() {
        let e = parse_expr("1-pRetry").unwrap();
        assert_eq!(e.eval_rational(&bind(&[("pRetry", rational(1, 2))])).unwrap(), rational(1, 2));
        let e = parse_expr("pLow+pMed").unwrap();
        let b = bind(&[("pLow", rational(3, 10)), ("pMed", rational(1, 5))]);
        assert_eq!(e.eval_rational(&b).unwrap(), rational(1, 2));
        let e = parse_expr("x/y").unwrap();
        let b = bind(&[("x", rational(1, 1)), ("y", rational(0, 1))]);
        assert_eq!(e.eval_rational(&b), Err(ExprError::DivisionByZero));
    }

    #[test]
    fn unbound_parameter_is_named() {
        let e = parse_expr("a*b").unwrap();
        let err = e.eval_rational(&bind(&[("a", rational(1, 1))])).unwrap_err();
        assert_eq!(err, ExprError::Unbound("b".into()));
    }

    #[test]
    fn free_params_examples() {
        assert!(parse_expr("0.8").unwrap().free_params().is_empty());
        let names: Vec<_> = parse_expr("1-pRetry").unwrap().free_params().into_iter().collect();
        assert_eq!(names, vec!["pRetry"]);
        let names: Vec<_> =
            parse_expr("pModel1+pModel2").unwrap().free_params().into_iter().collect();
        assert_eq!(names, vec!["pModel1", "pModel2"]);
    }

    #[test]
    fn functions_and_ternary() {
        let b = Binding::new();
        let v = |s: &str| parse_expr(s).unwrap().eval(&b).unwrap();
        assert_eq!(v("min(3, 1, 2)"), Value::Num(rational(1, 1)));
        assert_eq!(v("max(0.5, 0.25)"), Value::Num(rational(1, 2)));
        assert_eq!(v("pow(2, -2)"), Value::Num(rational(1, 4)));
        assert_eq!(v("floor(7/2)"), Value::Num(rational(3, 1)));
        assert_eq!(v("1 < 2 ? 10 : 20"), Value::Num(rational(10, 1)));
        assert_eq!(v("true = false"), Value::Bool(false));
    }

    #[test]
    fn fold_keeps_parameters_and_collapses_constants() {
        let e = parse_expr("(1 - 0.2) * p + 0 * 3").unwrap().fold();
        assert_eq!(e.to_string(), "0.8 * p");
        let e = parse_expr("x / (1 - 1)").unwrap().fold();
        assert!(e.eval(&bind(&[("x", rational(1, 1))])).is_err());
    }

    #[test]
    fn substitute_binds_and_folds() {
        let e = parse_expr("rPick * (1 - psucc) * pRetry").unwrap();
        let out = e.substitute(&|name: &str| match name {
            "psucc" => Some(Expr::Num(rational(7, 10))),
            "pRetry" => Some(Expr::Num(rational(4, 5))),
            _ => None,
        });
        assert_eq!(out.free_params().into_iter().collect::<Vec<_>>(), vec!["rPick"]);
        let v = out.eval_rational(&bind(&[("rPick", rational(1, 10))])).unwrap();
        assert_eq!(v, rational(24, 1000));
    }

    #[test]
    fn non_decimal_constants_print_as_fractions() {
        let e = Expr::binary(BinOp::Mul, Expr::Num(rational(1, 3)), Expr::ident("x"));
        assert_eq!(e.to_string(), "(1/3) * x");
        let back = parse_expr(&e.to_string()).unwrap();
        let b = bind(&[("x", rational(3, 1))]);
        assert_eq!(back.eval(&b).unwrap(), e.eval(&b).unwrap());
    }
}
