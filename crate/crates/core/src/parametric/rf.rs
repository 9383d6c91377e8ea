//! Rational functions: quotients of polynomials kept in lowest terms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::poly::{gcd, Polynomial};
use super::ParametricError;
use crate::expr::Binding;

/// `numerator / denominator`, with no common factor, integer coefficients
/// of content 1 across both, and a positive leading denominator coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalFunction {
    numerator: Polynomial,
    denominator: Polynomial,
}

impl RationalFunction {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self, ParametricError> {
        if denominator.is_zero() {
            return Err(ParametricError::ZeroDenominator(String::new()));
        }
        Ok(Self::normalized(numerator, denominator))
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_polynomial(Polynomial::constant(c))
    }

    pub fn var(name: &str) -> Self {
        Self::from_polynomial(Polynomial::var(name))
    }

    pub fn zero() -> Self {
        Self::from_polynomial(Polynomial::zero())
    }

    pub fn one() -> Self {
        Self::from_polynomial(Polynomial::one())
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        Self::normalized(p, Polynomial::one())
    }

    fn normalized(num: Polynomial, den: Polynomial) -> Self {
        if num.is_zero() {
            return Self { numerator: Polynomial::zero(), denominator: Polynomial::one() };
        }
        let (num, den) = if num.as_constant().is_some() || den.as_constant().is_some() {
            (num, den)
        } else {
            let g = gcd(&num, &den);
            if g.is_one() {
                (num, den)
            } else {
                (num.exact_div(&g).expect("gcd divides"), den.exact_div(&g).expect("gcd divides"))
            }
        };
        // Integer coefficients, content one, positive leading denominator
        // coefficient.
        let (fd, den) = den.integer_primitive();
        let (fnum, num) = num.integer_primitive();
        let mut ratio = fnum / fd;
        let mut den = den;
        if den.leading().is_some_and(|(_, c)| c.is_negative()) {
            den = -&den;
            ratio = -ratio;
        }
        Self {
            numerator: num.scale(&BigRational::from_integer(ratio.numer().clone())),
            denominator: den.scale(&BigRational::from_integer(ratio.denom().clone())),
        }
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        Some(self.numerator.as_constant()? / self.denominator.as_constant()?)
    }

    pub fn parameters(&self) -> BTreeSet<String> {
        let mut v = self.numerator.variables();
        v.extend(self.denominator.variables());
        v
    }

    /// Total number of stored terms.
    pub fn size(&self) -> usize {
        self.numerator.num_terms() + self.denominator.num_terms()
    }

    pub fn recip(&self) -> Result<Self, ParametricError> {
        Self::new(self.denominator.clone(), self.numerator.clone())
    }

    pub fn pow(&self, e: i32) -> Result<Self, ParametricError> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let k = e.unsigned_abs();
        Ok(Self { numerator: base.numerator.pow(k), denominator: base.denominator.pow(k) }.renormalized())
    }

    fn renormalized(self) -> Self {
        Self::normalized(self.numerator, self.denominator)
    }

    /// Renames every parameter.
    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Self {
        Self::normalized(self.numerator.rename(f), self.denominator.rename(f))
    }

    /// Exact value at a binding of every parameter.
    pub fn eval(&self, b: &Binding) -> Result<BigRational, ParametricError> {
        let lookup = |v: &str| b.get(v).cloned();
        let missing = || {
            let names: Vec<String> = self.parameters().into_iter().filter(|p| !b.contains(p)).collect();
            ParametricError::Unbound(names)
        };
        let den = self.denominator.eval(&lookup).ok_or_else(missing)?;
        if den.is_zero() {
            return Err(ParametricError::Pole(b.fingerprint()));
        }
        let num = self.numerator.eval(&lookup).ok_or_else(missing)?;
        Ok(num / den)
    }

    pub fn eval_f64(&self, value: &impl Fn(&str) -> f64) -> f64 {
        self.numerator.eval_f64(value) / self.denominator.eval_f64(value)
    }

    /// Quotient-rule partial derivative.
    pub fn derivative(&self, var: &str) -> Self {
        let dn = self.numerator.derivative(var);
        let dd = self.denominator.derivative(var);
        if dd.is_zero() {
            return Self::normalized(dn, self.denominator.clone());
        }
        let num = &(&dn * &self.denominator) - &(&self.numerator * &dd);
        Self::normalized(num, self.denominator.pow(2))
    }

    /// Partial derivatives with respect to every parameter.
    pub fn partials(&self) -> BTreeMap<String, RationalFunction> {
        self.parameters().into_iter().map(|v| {
            let d = self.derivative(&v);
            (v, d)
        }).collect()
    }

    fn combine(a: &Self, b: &Self, sign: bool) -> Self {
        if a.denominator == b.denominator {
            let num = if sign { &a.numerator + &b.numerator } else { &a.numerator - &b.numerator };
            return Self::normalized(num, a.denominator.clone());
        }
        let l = &a.numerator * &b.denominator;
        let r = &b.numerator * &a.denominator;
        let num = if sign { &l + &r } else { &l - &r };
        Self::normalized(num, &a.denominator * &b.denominator)
    }
}

impl Add for &RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        RationalFunction::combine(self, rhs, true)
    }
}

impl Sub for &RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        RationalFunction::combine(self, rhs, false)
    }
}

impl Mul for &RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        RationalFunction::normalized(&self.numerator * &rhs.numerator, &self.denominator * &rhs.denominator)
    }
}

/// Panics on division by the zero function; use [`RationalFunction::recip`]
/// to get an error instead.
impl Div for &RationalFunction {
    type Output = RationalFunction;
    fn div(self, rhs: &RationalFunction) -> RationalFunction {
        assert!(!rhs.is_zero(), "division by the zero rational function");
        RationalFunction::normalized(&self.numerator * &rhs.denominator, &self.denominator * &rhs.numerator)
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction { numerator: -&self.numerator, denominator: self.denominator.clone() }
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator.is_one() {
            return write!(f, "{}", self.numerator);
        }
        let wrap = |p: &Polynomial| {
            if p.num_terms() > 1 {
                format!("({p})")
            } else {
                p.to_string()
            }
        };
        write!(f, "{}/{}", wrap(&self.numerator), wrap(&self.denominator))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num;

    fn var(v: &str) -> RationalFunction {
        RationalFunction::var(v)
    }
    fn k(n: i64, d: i64) -> RationalFunction {
        RationalFunction::constant(num::rational(n, d))
    }

    #[test]
    fn normal_form() {
        assert_eq!(k(16, 19).to_string(), "16/19");
        let x = var("x");
        let f = &(&x * &x) / &x;
        assert_eq!(f, x);
        let half_x = &x * &k(1, 2);
        assert_eq!(half_x.to_string(), "x/2");
        let g = &k(1, 1) / &(&k(1, 1) - &x);
        assert_eq!(g.to_string(), "-1/(x - 1)");
        assert_eq!(&g - &g, RationalFunction::zero());
    }

    #[test]
    fn geometric_retry() {
        let p = var("psucc");
        let r = var("pRetry");
        let loop_ = &(&k(1, 1) - &p) * &r;
        let f = &p / &(&k(1, 1) - &loop_);
        let mut b = Binding::new();
        b.set("psucc", num::rational(1, 2));
        b.set("pRetry", num::rational(1, 2));
        assert_eq!(f.eval(&b).unwrap(), num::rational(2, 3));
        b.set("psucc", num::integer(1));
        b.set("pRetry", num::integer(0));
        assert_eq!(f.eval(&b).unwrap(), num::integer(1));
        let pole = &k(1, 1) / &(&k(1, 1) - &var("x"));
        let mut b = Binding::new();
        b.set("x", num::integer(1));
        assert!(matches!(pole.eval(&b), Err(ParametricError::Pole(_))));
    }

    #[test]
    fn derivative_of_product_and_constant() {
        let xy = &var("x") * &var("y");
        assert_eq!(xy.derivative("x"), var("y"));
        assert!(k(3, 7).derivative("x").is_zero());
    }
}
