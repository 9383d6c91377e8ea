//! Sparse multivariate polynomials with rational coefficients.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::num;

/// Power product, variables sorted by name, exponents positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        Self(vec![(name.to_string(), 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, var: &str) -> u32 {
        self.0.iter().find(|(v, _)| v == var).map_or(0, |(_, e)| *e)
    }

    pub fn factors(&self) -> &[(String, u32)] {
        &self.0
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: BTreeMap<&str, u32> = BTreeMap::new();
        for (v, e) in self.0.iter().chain(&other.0) {
            *out.entry(v).or_default() += e;
        }
        Monomial(out.into_iter().map(|(v, e)| (v.to_string(), e)).collect())
    }

    /// `self / other` if `other` divides `self`.
    fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            let d = other.exponent(v);
            if d > *e {
                return None;
            }
            if e - d > 0 {
                out.push((v.clone(), e - d));
            }
        }
        if other.0.iter().any(|(v, _)| self.exponent(v) == 0) {
            return None;
        }
        Some(Monomial(out))
    }

    fn without(&self, var: &str) -> Monomial {
        Monomial(self.0.iter().filter(|(v, _)| v != var).cloned().collect())
    }
}

/// Graded lexicographic: total degree first, then the larger exponent in
/// the alphabetically first variable where the two differ.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let (mut i, mut j) = (0, 0);
            loop {
                match (self.0.get(i), other.0.get(j)) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Greater,
                    (None, Some(_)) => return Ordering::Less,
                    (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => match ea.cmp(eb) {
                            Ordering::Equal => {
                                i += 1;
                                j += 1;
                            }
                            o => return o,
                        },
                    },
                }
            }
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Map from monomial to nonzero coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(name: &str) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(name), BigRational::one());
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, BigRational)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    /// The value if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, var: &str) -> u32 {
        self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|(v, _)| v.clone())).collect()
    }

    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Self::zero();
        }
        Polynomial { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    fn mul_term(&self, m: &Monomial, c: &BigRational) -> Polynomial {
        Polynomial { terms: self.terms.iter().map(|(k, v)| (k.mul(m), v * c)).collect() }
    }

    pub fn pow(&self, mut e: u32) -> Polynomial {
        let mut base = self.clone();
        let mut acc = Polynomial::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Evaluates with `value` supplying every variable.
    pub fn eval(&self, value: &impl Fn(&str) -> Option<BigRational>) -> Option<BigRational> {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in &m.0 {
                t *= num_traits::pow(value(v)?, *e as usize);
            }
            acc += t;
        }
        Some(acc)
    }

    pub fn eval_f64(&self, value: &impl Fn(&str) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| m.0.iter().fold(num::to_f64(c), |t, (v, e)| t * value(v).powi(*e as i32)))
            .sum()
    }

    pub fn derivative(&self, var: &str) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            if e == 0 {
                continue;
            }
            let mut factors = m.0.clone();
            for f in &mut factors {
                if f.0 == var {
                    f.1 -= 1;
                }
            }
            factors.retain(|(_, e)| *e > 0);
            out.add_term(Monomial(factors), c * BigRational::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Exact quotient, or `None` if `divisor` does not divide `self`.
    pub fn exact_div(&self, divisor: &Polynomial) -> Option<Polynomial> {
        if divisor.is_zero() {
            return None;
        }
        if let Some(c) = divisor.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (lm, lc) = divisor.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut rem = self.clone();
        let mut quot = Polynomial::zero();
        while let Some((m, c)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let qm = m.div(&lm)?;
            let qc = c / &lc;
            rem = &rem - &divisor.mul_term(&qm, &qc);
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Renames every variable; names may merge.
    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut acc: BTreeMap<String, u32> = BTreeMap::new();
            for (v, e) in &m.0 {
                *acc.entry(f(v)).or_default() += e;
            }
            out.add_term(Monomial(acc.into_iter().collect()), c.clone());
        }
        out
    }

    /// Coefficients as a polynomial in `var`: index = exponent.
    fn coefficients_in(&self, var: &str) -> Vec<Polynomial> {
        let mut out = vec![Polynomial::zero(); self.degree_in(var) as usize + 1];
        for (m, c) in &self.terms {
            out[m.exponent(var) as usize].add_term(m.without(var), c.clone());
        }
        out
    }

    fn from_coefficients(var: &str, coeffs: &[Polynomial]) -> Polynomial {
        let mut out = Polynomial::zero();
        for (e, p) in coeffs.iter().enumerate() {
            let x = if e == 0 { Monomial::one() } else { Monomial(vec![(var.to_string(), e as u32)]) };
            for (m, c) in &p.terms {
                out.add_term(m.mul(&x), c.clone());
            }
        }
        out
    }

    /// Multiplies by the lcm of coefficient denominators and divides by the
    /// gcd of the resulting numerators: a primitive integer polynomial,
    /// returned with the factor removed (`self = factor * result`).
    pub fn integer_primitive(&self) -> (BigRational, Polynomial) {
        if self.is_zero() {
            return (BigRational::one(), Polynomial::zero());
        }
        let lcm = self.terms.values().fold(BigInt::one(), |a, c| a.lcm(c.denom()));
        let gcd = self
            .terms
            .values()
            .fold(BigInt::zero(), |a, c| a.gcd(&(c.numer() * (&lcm / c.denom()))));
        let factor = BigRational::new(gcd, lcm);
        (factor.clone(), self.scale(&factor.recip()))
    }

    /// Makes the leading coefficient 1.
    pub fn monic(&self) -> Polynomial {
        match self.leading() {
            Some((_, c)) => self.scale(&c.recip()),
            None => Polynomial::zero(),
        }
    }
}

/// Monic greatest common divisor over the rationals.
///
/// Tries the heuristic integer gcd first and falls back to a primitive
/// PRS when it gives up.
pub fn gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Polynomial::one();
    }
    let vars: Vec<String> = a.variables().union(&b.variables()).cloned().collect();
    match heu_gcd(&a.integer_primitive().1, &b.integer_primitive().1, &vars) {
        Some(h) => h.monic(),
        None => prs_gcd(a, b),
    }
}

const HEU_ATTEMPTS: usize = 6;
/// Evaluation points beyond this size are left to the PRS.
const HEU_MAX_BITS: u64 = 1 << 16;

fn integer_coeff(c: &BigRational) -> &BigInt {
    debug_assert!(c.is_integer());
    c.numer()
}

fn max_norm(p: &Polynomial) -> BigInt {
    p.terms.values().map(|c| integer_coeff(c).abs()).max().unwrap_or_default()
}

fn integer_content(p: &Polynomial) -> BigInt {
    p.terms.values().fold(BigInt::zero(), |a, c| a.gcd(integer_coeff(c)))
}

/// Substitutes the integer `xi` for `var`.
fn eval_at(p: &Polynomial, var: &str, xi: &BigInt) -> Polynomial {
    let mut powers = vec![BigInt::one()];
    let mut out = Polynomial::zero();
    for (m, c) in &p.terms {
        let e = m.exponent(var) as usize;
        while powers.len() <= e {
            let next = powers.last().expect("nonempty") * xi;
            powers.push(next);
        }
        out.add_term(m.without(var), c * BigRational::from_integer(powers[e].clone()));
    }
    out
}

/// Rebuilds a polynomial in `var` from its image at `xi`, reading the
/// coefficients as balanced base-`xi` digits.
fn interpolate(mut h: Polynomial, var: &str, xi: &BigInt) -> Polynomial {
    let half = xi / 2;
    let mut coeffs = Vec::new();
    while !h.is_zero() {
        let digit = Polynomial::from_terms(h.terms.iter().map(|(m, c)| {
            let mut r = integer_coeff(c).mod_floor(xi);
            if r > half {
                r -= xi;
            }
            (m.clone(), BigRational::from_integer(r))
        }));
        h = (&h - &digit).scale(&BigRational::from_integer(xi.clone()).recip());
        coeffs.push(digit);
    }
    Polynomial::from_coefficients(var, &coeffs)
}

/// Heuristic gcd of integer polynomials (Char, Geddes and Gonnet). A
/// candidate that divides both inputs is the gcd when the evaluation point
/// exceeds twice the smaller max norm; `None` means give up.
fn heu_gcd(f: &Polynomial, g: &Polynomial, vars: &[String]) -> Option<Polynomial> {
    let cf = integer_content(f);
    let cg = integer_content(g);
    let c = cf.gcd(&cg);
    let Some((x, rest)) = vars.split_first() else {
        return Some(Polynomial::constant(BigRational::from_integer(c)));
    };
    let f = f.scale(&BigRational::from_integer(cf).recip());
    let g = g.scale(&BigRational::from_integer(cg).recip());
    let mut xi: BigInt = max_norm(&f).min(max_norm(&g)) * 2u32 + 29u32;
    for _ in 0..HEU_ATTEMPTS {
        if xi.bits() > HEU_MAX_BITS {
            return None;
        }
        let ff = eval_at(&f, x, &xi);
        let gg = eval_at(&g, x, &xi);
        if !ff.is_zero() && !gg.is_zero() {
            if let Some(h) = heu_gcd(&ff, &gg, rest) {
                let cand = interpolate(h, x, &xi);
                if !cand.is_zero() {
                    let cand = cand.scale(&BigRational::from_integer(integer_content(&cand)).recip());
                    if f.exact_div(&cand).is_some() && g.exact_div(&cand).is_some() {
                        return Some(cand.scale(&BigRational::from_integer(c)));
                    }
                }
            }
        }
        xi = &xi * 73794u32 * xi.sqrt().sqrt() / 27011u32;
    }
    None
}

/// Primitive PRS, recursive in the variables.
fn prs_gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Polynomial::one();
    }
    let va = a.variables();
    let vb = b.variables();
    let Some(var) = va.intersection(&vb).next().cloned() else {
        // No shared variable: the gcd lies in the content.
        let x = va.iter().next().expect("nonconstant").clone();
        return prs_gcd(&content(a, &x), b);
    };
    let ca = content(a, &var);
    let cb = content(b, &var);
    let pa = a.exact_div(&ca).expect("content divides").integer_primitive().1;
    let pb = b.exact_div(&cb).expect("content divides").integer_primitive().1;
    let g_content = prs_gcd(&ca, &cb);
    let (mut f, mut g) = if pa.degree_in(&var) >= pb.degree_in(&var) { (pa, pb) } else { (pb, pa) };
    loop {
        let r = pseudo_remainder(&f, &g, &var);
        if r.is_zero() {
            break;
        }
        if r.degree_in(&var) == 0 {
            return g_content.monic();
        }
        f = g;
        let cr = content(&r, &var);
        g = r.exact_div(&cr).expect("content divides").integer_primitive().1;
    }
    let cg = content(&g, &var);
    let pg = g.exact_div(&cg).expect("content divides");
    (&g_content * &pg).monic()
}

/// gcd of the coefficients of `p` viewed as a polynomial in `var`.
fn content(p: &Polynomial, var: &str) -> Polynomial {
    let mut g = Polynomial::zero();
    for c in p.coefficients_in(var).iter().filter(|c| !c.is_zero()) {
        g = gcd(&g, c);
        if g.is_one() {
            break;
        }
    }
    g
}

fn pseudo_remainder(f: &Polynomial, g: &Polynomial, var: &str) -> Polynomial {
    let gc = g.coefficients_in(var);
    let dg = gc.len() - 1;
    let lg = &gc[dg];
    let mut r = f.clone();
    loop {
        let dr = r.degree_in(var) as usize;
        if r.is_zero() || dr < dg {
            return r;
        }
        let rc = r.coefficients_in(var);
        let lr = &rc[dr];
        let shift = Polynomial::from_coefficients(
            var,
            &std::iter::repeat_n(Polynomial::zero(), dr - dg).chain(std::iter::once(lr.clone())).collect::<Vec<_>>(),
        );
        r = &(lg * &r) - &(&shift * g);
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut acc: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                *acc.entry(ma.mul(mb)).or_insert_with(BigRational::zero) += ca * cb;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Polynomial { terms: acc }
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }
}

/// Terms in descending graded lexicographic order, e.g. `2*p^2 - 1/3*q + 1`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let coeff = num::canonical_text(&abs);
            if m.0.is_empty() {
                f.write_str(&coeff)?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{coeff}*{m}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Polynomial {
        Polynomial::var("x")
    }
    fn y() -> Polynomial {
        Polynomial::var("y")
    }
    fn c(v: i64) -> Polynomial {
        Polynomial::constant(num::integer(v))
    }

    #[test]
    fn arithmetic_and_display() {
        let p = &(&x() * &y()) - &c(1);
        assert_eq!(p.to_string(), "x*y - 1");
        let sq = (&x() + &c(1)).pow(2);
        assert_eq!(sq.to_string(), "x^2 + 2*x + 1");
        assert!((&sq - &sq).is_zero());
        assert_eq!(sq.derivative("x").to_string(), "2*x + 2");
    }

    #[test]
    fn division_and_gcd() {
        let a = &(&x() + &c(1)) * &(&x() - &y());
        let b = &(&x() + &c(1)) * &(&y() + &c(2));
        assert_eq!(a.exact_div(&(&x() + &c(1))).unwrap(), &x() - &y());
        assert!(a.exact_div(&(&y() + &c(2))).is_none());
        assert_eq!(gcd(&a, &b), &x() + &c(1));
        let a2 = &a.scale(&num::rational(3, 4)) * &(&y() + &c(2));
        assert_eq!(gcd(&a2, &b), &(&x() + &c(1)) * &(&y() + &c(2)));
        assert_eq!(gcd(&x(), &y()), Polynomial::one());
    }

    #[test]
    fn heuristic_gcd_agrees_with_prs() {
        let f = &(&x() + &c(1)).pow(3) * &(&(&x() * &y()) - &c(7));
        let g = &(&x() + &c(1)) * &(&(&y() * &y()) - &(&x() * &c(3)));
        let h = &(&(&x() * &y()) - &c(7)).pow(2) * &(&y() + &c(1000));
        for (a, b) in [(&f, &g), (&f, &h), (&g, &h), (&f, &f)] {
            assert_eq!(gcd(a, b), prs_gcd(a, b));
        }
        assert_eq!(gcd(&f, &h), (&(&x() * &y()) - &c(7)).monic());
    }

    #[test]
    fn graded_lex_order() {
        let a = Monomial(vec![("x".into(), 2)]);
        let b = Monomial(vec![("x".into(), 1), ("y".into(), 1)]);
        let c = Monomial(vec![("y".into(), 1)]);
        assert!(a > b);
        assert!(b > c);
        assert!(Monomial::var("x") > Monomial::var("y"));
    }
}
