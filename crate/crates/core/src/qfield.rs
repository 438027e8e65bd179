//! Exact arithmetic in Q(q): rational functions in the deformation
//! parameter q with arbitrary-precision rational coefficients.
//!
//! A [`Scalar`] is a reduced fraction of two integer Laurent polynomials.
//! The canonical form is unique, so structural equality is field equality.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum QFieldError {
    #[error("division by zero in Q(q)")]
    DivisionByZero,
    #[error("pole at q = {0}: denominator vanishes")]
    Pole(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Integer-coefficient Laurent polynomial in q, stored sparsely as a
/// sorted (exponent, coefficient) list with no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LaurentPoly {
    terms: Vec<(i64, BigInt)>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        LaurentPoly::monomial(0, BigInt::one())
    }

    pub fn monomial(exp: i64, coeff: BigInt) -> Self {
        if coeff.is_zero() {
            LaurentPoly::zero()
        } else {
            LaurentPoly {
                terms: vec![(exp, coeff)],
            }
        }
    }

    pub fn from_terms(mut terms: Vec<(i64, BigInt)>) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(i64, BigInt)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match out.last_mut() {
                Some((le, lc)) if *le == e => *lc += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        LaurentPoly { terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0 == 0 && self.terms[0].1.is_one()
    }

    pub fn terms(&self) -> &[(i64, BigInt)] {
        &self.terms
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.terms.first().map(|t| t.0)
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.terms.last().map(|t| t.0)
    }

    /// Multiply by q^k.
    pub fn shifted(&self, k: i64) -> Self {
        LaurentPoly {
            terms: self.terms.iter().map(|(e, c)| (e + k, c.clone())).collect(),
        }
    }

    fn add_impl(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                Ordering::Less => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.terms[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &self.terms[i].1 + &other.terms[j].1;
                    if !c.is_zero() {
                        out.push((self.terms[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&other.terms[j..]);
        LaurentPoly { terms: out }
    }

    fn mul_impl(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return LaurentPoly::zero();
        }
        // monomial fast paths dominate in practice
        if self.terms.len() == 1 {
            let (e, c) = &self.terms[0];
            return LaurentPoly {
                terms: other.terms.iter().map(|(e2, c2)| (e + e2, c * c2)).collect(),
            };
        }
        if other.terms.len() == 1 {
            return other.mul_impl(self);
        }
        let mut acc: Vec<(i64, BigInt)> = Vec::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                acc.push((e1 + e2, c1 * c2));
            }
        }
        LaurentPoly::from_terms(acc)
    }

    fn neg_impl(&self) -> Self {
        LaurentPoly {
            terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect(),
        }
    }

    /// gcd of all coefficients (positive), zero polynomial has content 0.
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for (_, c) in &self.terms {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    fn div_content(&self, c: &BigInt) -> Self {
        LaurentPoly {
            terms: self.terms.iter().map(|(e, k)| (*e, k / c)).collect(),
        }
    }

    /// Exact evaluation at a rational point (q^k for negative k requires q0 != 0).
    pub fn eval(&self, q0: &BigRational) -> Result<BigRational, QFieldError> {
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let p = if *e >= 0 {
                pow_rational(q0, *e as u64)
            } else {
                if q0.is_zero() {
                    return Err(QFieldError::Pole("0".into()));
                }
                pow_rational(&q0.recip(), (-e) as u64)
            };
            acc += BigRational::from(c.clone()) * p;
        }
        Ok(acc)
    }
}

fn pow_rational(base: &BigRational, mut e: u64) -> BigRational {
    let mut acc = BigRational::one();
    let mut b = base.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &b;
        }
        b = &b * &b;
        e >>= 1;
    }
    acc
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.add_impl(rhs)
    }
}
impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.add_impl(&rhs.neg_impl())
    }
}
impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.mul_impl(rhs)
    }
}
impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        self.neg_impl()
    }
}

/// Polynomial part helpers: operate on Laurent polynomials normalized to
/// min_exp = 0 ("plain" polynomials indexed by usize degree).

fn leading(p: &LaurentPoly) -> &BigInt {
    &p.terms.last().expect("nonzero poly").1
}

fn degree(p: &LaurentPoly) -> i64 {
    p.max_exp().expect("nonzero poly")
}

/// Exact division: panics if not divisible (internal use only).
fn div_exact(a: &LaurentPoly, b: &LaurentPoly) -> LaurentPoly {
    assert!(!b.is_zero());
    if a.is_zero() {
        return LaurentPoly::zero();
    }
    let shift = a.min_exp().unwrap() - b.min_exp().unwrap();
    let mut rem = a.shifted(-a.min_exp().unwrap());
    let d = b.shifted(-b.min_exp().unwrap());
    let mut quo: Vec<(i64, BigInt)> = Vec::new();
    while !rem.is_zero() {
        let de = degree(&rem) - degree(&d);
        assert!(de >= 0, "inexact polynomial division");
        let (c_rem, c_d) = (leading(&rem), leading(&d));
        let (q, r) = c_rem.div_rem(c_d);
        assert!(r.is_zero(), "inexact polynomial division");
        let mono = LaurentPoly::monomial(de, q);
        rem = &rem - &(&mono * &d);
        quo.push((mono.terms[0].0, mono.terms[0].1.clone()));
    }
    LaurentPoly::from_terms(quo).shifted(shift)
}

/// Primitive polynomial gcd via a primitive pseudo-remainder sequence.
/// Inputs are arbitrary Laurent polynomials; the result is a primitive
/// polynomial with min_exp = 0 and positive leading coefficient
/// (q-power units are stripped).
fn poly_gcd(a: &LaurentPoly, b: &LaurentPoly) -> LaurentPoly {
    if a.is_zero() {
        return primitive_normal(b);
    }
    if b.is_zero() {
        return primitive_normal(a);
    }
    let mut f = primitive_normal(a);
    let mut g = primitive_normal(b);
    if degree(&f) < degree(&g) {
        std::mem::swap(&mut f, &mut g);
    }
    loop {
        if g.is_zero() {
            return primitive_normal(&f);
        }
        if degree(&g) == 0 {
            return LaurentPoly::one();
        }
        let r = pseudo_rem(&f, &g);
        f = g;
        g = if r.is_zero() {
            LaurentPoly::zero()
        } else {
            primitive_normal(&r)
        };
    }
}

/// Strip the q-power unit and integer content; make leading coeff positive.
fn primitive_normal(p: &LaurentPoly) -> LaurentPoly {
    if p.is_zero() {
        return LaurentPoly::zero();
    }
    let shifted = p.shifted(-p.min_exp().unwrap());
    let mut c = shifted.content();
    if leading(&shifted).is_negative() {
        c = -c;
    }
    shifted.div_content(&c)
}

/// Pseudo-remainder of f by g (both plain polys, deg f >= deg g >= 1).
fn pseudo_rem(f: &LaurentPoly, g: &LaurentPoly) -> LaurentPoly {
    let mut rem = f.clone();
    let dg = degree(g);
    let lg = leading(g).clone();
    while !rem.is_zero() && degree(&rem) >= dg {
        let dr = degree(&rem);
        let lr = leading(&rem).clone();
        // lg * rem - lr * q^(dr-dg) * g kills the leading term
        let scaled_rem = LaurentPoly {
            terms: rem.terms.iter().map(|(e, c)| (*e, c * &lg)).collect(),
        };
        let shift_g = LaurentPoly {
            terms: g.terms.iter().map(|(e, c)| (e + dr - dg, c * &lr)).collect(),
        };
        rem = &scaled_rem - &shift_g;
    }
    rem
}

/// Element of Q(q) in canonical form:
/// * the fraction is reduced (no common polynomial factor over Q, and the
///   integer contents of numerator and denominator are coprime);
/// * the denominator is a plain polynomial (min_exp = 0, so its constant
///   term is nonzero) with positive constant term;
/// * any leftover q-power unit lives in the numerator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar {
    num: LaurentPoly,
    den: LaurentPoly,
}

impl Scalar {
    pub fn new(num: LaurentPoly, den: LaurentPoly) -> Result<Self, QFieldError> {
        if den.is_zero() {
            return Err(QFieldError::DivisionByZero);
        }
        Ok(Scalar::reduced(num, den))
    }

    fn reduced(num: LaurentPoly, den: LaurentPoly) -> Self {
        debug_assert!(!den.is_zero());
        if num.is_zero() {
            return Scalar {
                num: LaurentPoly::zero(),
                den: LaurentPoly::one(),
            };
        }
        if den.is_one() {
            return Scalar {
                num,
                den: LaurentPoly::one(),
            };
        }
        // fast path: monomial denominator c*q^k
        if den.terms.len() == 1 {
            let (e, c) = (&den.terms[0].0, &den.terms[0].1);
            let num = num.shifted(-e);
            let mut g = num.content().gcd(c);
            if c.is_negative() {
                g = -g;
            }
            let c = c / &g;
            let num = num.div_content(&g);
            return Scalar {
                num,
                den: LaurentPoly::monomial(0, c),
            };
        }
        let num_shift = num.min_exp().unwrap();
        let den_shift = den.min_exp().unwrap();
        let mut n = num.shifted(-num_shift);
        let mut d = den.shifted(-den_shift);
        let g = poly_gcd(&n, &d);
        if !g.is_one() {
            n = div_exact(&n, &g);
            d = div_exact(&d, &g);
        }
        // n/d may have picked up denominators' unit: renormalize d to
        // min_exp 0 again (div_exact keeps shifts consistent, but be safe)
        let d_shift = d.min_exp().unwrap();
        let n = n.shifted(-d_shift + num_shift - den_shift);
        let d = d.shifted(-d_shift);
        let mut c = n.content().gcd(&d.content());
        if d.terms.first().unwrap().1.is_negative() {
            c = -c;
        }
        Scalar {
            num: n.div_content(&c),
            den: d.div_content(&c),
        }
    }

    pub fn zero() -> Self {
        Scalar {
            num: LaurentPoly::zero(),
            den: LaurentPoly::one(),
        }
    }

    pub fn one() -> Self {
        Scalar {
            num: LaurentPoly::one(),
            den: LaurentPoly::one(),
        }
    }

    pub fn from_int(k: i64) -> Self {
        Scalar {
            num: LaurentPoly::monomial(0, BigInt::from(k)),
            den: LaurentPoly::one(),
        }
    }

    /// Constant scalar with an exact rational value.
    pub fn from_rational(v: &BigRational) -> Self {
        Scalar::reduced(
            LaurentPoly::monomial(0, v.numer().clone()),
            LaurentPoly::monomial(0, v.denom().clone()),
        )
    }

    /// The deformation parameter q.
    pub fn q() -> Self {
        Scalar::q_pow(1)
    }

    /// q^k for any integer k.
    pub fn q_pow(k: i64) -> Self {
        Scalar {
            num: LaurentPoly::monomial(k, BigInt::one()),
            den: LaurentPoly::one(),
        }
    }

    /// lambda = q - q^{-1}.
    pub fn lambda() -> Self {
        &Scalar::q() - &Scalar::q_pow(-1)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn numerator(&self) -> &LaurentPoly {
        &self.num
    }

    pub fn denominator(&self) -> &LaurentPoly {
        &self.den
    }

    pub fn inverse(&self) -> Result<Self, QFieldError> {
        if self.is_zero() {
            return Err(QFieldError::DivisionByZero);
        }
        Ok(Scalar::reduced(self.den.clone(), self.num.clone()))
    }

    pub fn checked_div(&self, rhs: &Scalar) -> Result<Self, QFieldError> {
        if rhs.is_zero() {
            return Err(QFieldError::DivisionByZero);
        }
        Ok(Scalar::reduced(
            &self.num * &rhs.den,
            &self.den * &rhs.num,
        ))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Scalar::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Exact evaluation at a rational point q0; errors at poles.
    pub fn eval_at(&self, q0: &BigRational) -> Result<BigRational, QFieldError> {
        let d = self.den.eval(q0)?;
        if d.is_zero() {
            return Err(QFieldError::Pole(q0.to_string()));
        }
        let n = self.num.eval(q0)?;
        Ok(n / d)
    }

    /// Canonical interchange string, e.g. "(-1+2*q^2)/(1+q^2)".
    pub fn to_canonical_string(&self) -> String {
        format!("({})/({})", fmt_poly(&self.num), fmt_poly(&self.den))
    }

    /// Parse the canonical interchange form produced by
    /// [`Scalar::to_canonical_string`].
    pub fn parse(s: &str) -> Result<Self, QFieldError> {
        let s = s.trim();
        let (num_s, den_s) = split_fraction(s)?;
        let num = parse_poly(num_s)?;
        let den = parse_poly(den_s)?;
        Scalar::new(num, den)
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            let n = &self.num + &rhs.num;
            if n.is_zero() {
                return Scalar::zero();
            }
            return Scalar::reduced(n, self.den.clone());
        }
        Scalar::reduced(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}
impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}
impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        if self.is_zero() || rhs.is_zero() {
            return Scalar::zero();
        }
        if self.is_one() {
            return rhs.clone();
        }
        if rhs.is_one() {
            return self.clone();
        }
        Scalar::reduced(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}
impl Div for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        self.checked_div(rhs).expect("division by zero in Q(q)")
    }
}
impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            num: self.num.neg_impl(),
            den: self.den.clone(),
        }
    }
}
impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}
impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        &self + &rhs
    }
}
impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        &self - &rhs
    }
}
impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        &self * &rhs
    }
}
impl Div for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        &self / &rhs
    }
}
impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        *self = &*self + rhs;
    }
}
impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        *self = &*self - rhs;
    }
}
impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_canonical_string())
    }
}

fn fmt_poly(p: &LaurentPoly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (idx, (e, c)) in p.terms.iter().enumerate() {
        if idx > 0 && !c.is_negative() {
            out.push('+');
        }
        if *e == 0 {
            out.push_str(&c.to_string());
        } else {
            out.push_str(&format!("{}*q^{}", c, e));
        }
    }
    out
}

fn split_fraction(s: &str) -> Result<(&str, &str), QFieldError> {
    let err = || QFieldError::Parse(format!("expected \"(num)/(den)\", got {:?}", s));
    if !s.starts_with('(') {
        return Err(err());
    }
    // find the matching close paren of the leading open paren
    let mut depth = 0usize;
    let mut close = None;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = close.ok_or_else(err)?;
    let num = &s[1..close];
    let rest = s[close + 1..].trim();
    let rest = rest.strip_prefix('/').ok_or_else(err)?.trim();
    let den = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(err)?;
    Ok((num, den))
}

fn parse_poly(s: &str) -> Result<LaurentPoly, QFieldError> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(QFieldError::Parse("empty polynomial".into()));
    }
    if s == "0" {
        return Ok(LaurentPoly::zero());
    }
    let mut terms = Vec::new();
    let mut rest = s.as_str();
    while !rest.is_empty() {
        let sign = if let Some(r) = rest.strip_prefix('-') {
            rest = r;
            -1
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
            1
        } else {
            1
        };
        // term ends at the next top-level + or - (exponents may be negative,
        // marked by "^-")
        let mut end = rest.len();
        let bytes = rest.as_bytes();
        let mut i = 0;
        while i < rest.len() {
            let c = bytes[i] as char;
            if (c == '+' || c == '-') && i > 0 && bytes[i - 1] as char != '^' {
                end = i;
                break;
            }
            i += 1;
        }
        let term = &rest[..end];
        rest = &rest[end..];
        let (coeff_s, exp) = if let Some(pos) = term.find('q') {
            let coeff_part = term[..pos].trim_end_matches('*');
            let exp_part = &term[pos + 1..];
            let exp = if exp_part.is_empty() {
                1
            } else {
                exp_part
                    .strip_prefix('^')
                    .ok_or_else(|| QFieldError::Parse(format!("bad term {:?}", term)))?
                    .parse::<i64>()
                    .map_err(|e| QFieldError::Parse(format!("bad exponent in {:?}: {}", term, e)))?
            };
            (coeff_part, exp)
        } else {
            (term, 0)
        };
        let coeff: BigInt = if coeff_s.is_empty() {
            BigInt::one()
        } else {
            coeff_s
                .parse()
                .map_err(|e| QFieldError::Parse(format!("bad coefficient {:?}: {}", coeff_s, e)))?
        };
        terms.push((exp, coeff * BigInt::from(sign)));
    }
    Ok(LaurentPoly::from_terms(terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Scalar {
        Scalar::q()
    }

    fn qi(k: i64) -> Scalar {
        Scalar::q_pow(k)
    }

    #[test]
    fn difference_of_squares() {
        // (q - q^-1)(q + q^-1) = q^2 - q^-2
        let l = &(&q() - &qi(-1)) * &(&q() + &qi(-1));
        let r = &qi(2) - &qi(-2);
        assert_eq!(l, r);
    }

    #[test]
    fn common_denominator() {
        // 1/(q-1) + 1/(q+1) = 2q/(q^2-1)
        let one = Scalar::one();
        let a = &one / &(&q() - &one);
        let b = &one / &(&q() + &one);
        let sum = &a + &b;
        let expect = &(&Scalar::from_int(2) * &q())
            / &(&qi(2) - &one);
        assert_eq!(sum, expect);
    }

    #[test]
    fn quantum_trace_dimension() {
        // (q^4 - 1)/(q - q^-1) = q^3 + q, i.e. Tr(D^{-1}) at N = 2
        let l = &(&qi(4) - &Scalar::one()) / &Scalar::lambda();
        let r = &qi(3) + &q();
        assert_eq!(l, r);
    }

    #[test]
    fn eval_at_classical_point() {
        let one = BigRational::one();
        let v = (&qi(3) + &q()).eval_at(&one).unwrap();
        assert_eq!(v, BigRational::from(BigInt::from(2)));
        let lam = Scalar::lambda().eval_at(&one).unwrap();
        assert!(lam.is_zero());
        let inv_lam = Scalar::lambda().inverse().unwrap();
        assert!(matches!(inv_lam.eval_at(&one), Err(QFieldError::Pole(_))));
    }

    #[test]
    fn mul_inverse_is_one() {
        let a = &(&qi(3) - &Scalar::from_int(7)) / &(&qi(-2) + &q());
        assert!((&a * &a.inverse().unwrap()).is_one());
    }

    #[test]
    fn canonical_string_round_trip() {
        let cases = [
            &(&Scalar::from_int(2) * &qi(2)) - &Scalar::one(),
            Scalar::lambda(),
            Scalar::zero(),
            &(&qi(-3) + &Scalar::from_int(5)) / &(&qi(2) + &Scalar::one()),
        ];
        for c in &cases {
            let s = c.to_canonical_string();
            let back = Scalar::parse(&s).unwrap();
            assert_eq!(&back, c, "string was {}", s);
        }
        let printed = (&(&Scalar::from_int(2) * &qi(2)) - &Scalar::one()).to_canonical_string();
        assert_eq!(printed, "(-1+2*q^2)/(1)");
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(
            Scalar::one().checked_div(&Scalar::zero()),
            Err(QFieldError::DivisionByZero)
        );
    }

    #[test]
    fn reduction_cancels_common_factors() {
        // (q^4-1)/(q^2-1) = q^2+1
        let n = &qi(4) - &Scalar::one();
        let d = &qi(2) - &Scalar::one();
        assert_eq!(&n / &d, &qi(2) + &Scalar::one());
    }
}
