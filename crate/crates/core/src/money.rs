//! Exact money values.
//!
//! Declared amounts are rationals, but critical payments under a norm
//! `a / |s|^l` with fractional `l` are algebraic: for `l = 1/2` a payment is
//! `q * sqrt(m)`. [`Money`] stores a finite sum `sum_i c_i * rho_i` where every
//! `c_i` is rational and every `rho_i` is a product of primes raised to
//! exponents in `(0, 1)`. Such radicals are linearly independent over the
//! rationals, so the representation is canonical: structural equality is
//! numeric equality, and the sign of a non-zero value can always be settled by
//! refining interval bounds.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Product of primes raised to exponents strictly between 0 and 1, sorted by prime.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
struct Radical(Vec<(u64, Ratio<i64>)>);

impl Radical {
    fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// Product of two radicals. Whole powers of primes that overflow the open
    /// exponent range are returned as a rational carry.
    fn mul(&self, other: &Radical) -> (BigRational, Radical) {
        let mut carry = BigInt::one();
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            let take = match (self.0.get(i), other.0.get(j)) {
                (Some(a), Some(b)) => a.0.cmp(&b.0),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => unreachable!(),
            };
            match take {
                Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    let p = self.0[i].0;
                    let mut e = self.0[i].1 + other.0[j].1;
                    if e >= Ratio::one() {
                        e -= Ratio::one();
                        carry *= BigInt::from(p);
                    }
                    if !e.is_zero() {
                        out.push((p, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        (BigRational::from_integer(carry), Radical(out))
    }

    /// The radical as a single root `r^(1/q)`.
    fn as_root(&self) -> (BigUint, u32) {
        let q = self.0.iter().fold(1i64, |acc, (_, e)| acc.lcm(e.denom()));
        let mut r = BigUint::one();
        for (p, e) in &self.0 {
            let power = (e.numer() * (q / e.denom())) as u32;
            r *= BigUint::from(*p).pow(power);
        }
        (r, q as u32)
    }

    /// Interval `[lo, hi]` around the radical with width at most `2^-bits`.
    fn bounds(&self, bits: u32) -> (BigRational, BigRational) {
        let (r, q) = self.as_root();
        let scaled = r << (bits as usize * q as usize);
        let floor = scaled.nth_root(q);
        let denom = BigInt::one() << bits as usize;
        let lo = BigRational::new(BigInt::from(floor.clone()), denom.clone());
        let hi = BigRational::new(BigInt::from(floor + 1u32), denom);
        (lo, hi)
    }
}

impl fmt::Display for Radical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, q) = self.as_root();
        if q == 2 {
            write!(f, "sqrt({r})")
        } else {
            write!(f, "{r}^(1/{q})")
        }
    }
}

/// An exact, possibly irrational, amount of money.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Money {
    terms: BTreeMap<Radical, BigRational>,
}

impl Money {
    pub fn zero() -> Self {
        Money::default()
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(Radical::default(), q);
        }
        Money { terms }
    }

    pub fn from_integer(n: i64) -> Self {
        Money::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `base^exponent` for a positive integer base and rational exponent.
    pub fn int_power(base: u64, exponent: Ratio<i64>) -> Self {
        assert!(base > 0, "int_power needs a positive base");
        let mut coeff = BigRational::one();
        let mut rad = Vec::new();
        for (p, mult) in factorize(base) {
            let e = exponent * Ratio::from_integer(mult as i64);
            let whole = e.floor();
            let frac = e - whole;
            let w = whole.to_integer();
            let pp = BigRational::from_integer(BigInt::from(p));
            if w >= 0 {
                coeff *= num_traits::pow(pp, w as usize);
            } else {
                coeff /= num_traits::pow(pp, (-w) as usize);
            }
            if !frac.is_zero() {
                rad.push((p, frac));
            }
        }
        let mut terms = BTreeMap::new();
        terms.insert(Radical(rad), coeff);
        Money { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value as a rational, when it is one.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(r, _)| r.is_one())
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        self.as_rational().is_some()
    }

    pub fn scale(&self, factor: &BigRational) -> Money {
        if factor.is_zero() {
            return Money::zero();
        }
        Money {
            terms: self.terms.iter().map(|(r, c)| (r.clone(), c * factor)).collect(),
        }
    }

    /// Interval `[lo, hi]` containing the value.
    pub fn bounds(&self, bits: u32) -> (BigRational, BigRational) {
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        for (r, c) in &self.terms {
            if r.is_one() {
                lo += c;
                hi += c;
                continue;
            }
            let (rl, rh) = r.bounds(bits);
            if c.is_negative() {
                lo += c * &rh;
                hi += c * &rl;
            } else {
                lo += c * &rl;
                hi += c * &rh;
            }
        }
        (lo, hi)
    }

    pub fn signum(&self) -> Ordering {
        if self.terms.is_empty() {
            return Ordering::Equal;
        }
        if self.terms.len() == 1 {
            let c = self.terms.values().next().unwrap();
            return if c.is_negative() {
                Ordering::Less
            } else {
                Ordering::Greater
            };
        }
        // Non-zero by linear independence of the radicals, so refinement terminates.
        let mut bits = 64;
        loop {
            let (lo, hi) = self.bounds(bits);
            if lo.is_positive() {
                return Ordering::Greater;
            }
            if hi.is_negative() {
                return Ordering::Less;
            }
            assert!(bits < 1 << 20, "sign refinement diverged for {self}");
            bits *= 2;
        }
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    /// A rational strictly between `lo` and `hi`; requires `lo < hi`.
    pub fn rational_between(lo: &Money, hi: &Money) -> BigRational {
        assert!(lo < hi, "empty interval ({lo}, {hi})");
        if let (Some(a), Some(b)) = (lo.as_rational(), hi.as_rational()) {
            return (a + b) / BigRational::from_integer(2.into());
        }
        let mut bits = 64;
        loop {
            let (_, lo_hi) = lo.bounds(bits);
            let (hi_lo, _) = hi.bounds(bits);
            if lo_hi < hi_lo {
                return (lo_hi + hi_lo) / BigRational::from_integer(2.into());
            }
            bits *= 2;
        }
    }

    /// A rational upper bound on the value.
    pub fn upper_rational(&self) -> BigRational {
        self.as_rational().unwrap_or_else(|| self.bounds(32).1)
    }

    pub fn to_f64(&self) -> f64 {
        if let Some(q) = self.as_rational() {
            return ratio_to_f64(&q);
        }
        let (lo, hi) = self.bounds(80);
        ratio_to_f64(&((lo + hi) / BigRational::from_integer(2.into())))
    }

    /// Decimal rendering rounded to `sig` significant digits, trailing zeros trimmed.
    pub fn to_decimal(&self, sig: usize) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let x = match self.as_rational() {
            Some(q) => q,
            None => {
                let magnitude = self.to_f64().abs();
                let extra = if magnitude > 0.0 && magnitude < 1.0 {
                    (-magnitude.log2()).ceil() as u32
                } else {
                    0
                };
                let bits = 64 + 4 * sig as u32 + extra;
                let (lo, hi) = self.bounds(bits);
                (lo + hi) / BigRational::from_integer(2.into())
            }
        };
        format_significant(&x, sig)
    }
}

fn ratio_to_f64(q: &BigRational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Fall back on a scaled integer quotient.
            let shift = q.denom().bits().saturating_sub(60) as usize;
            let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

fn pow10(e: i64) -> BigRational {
    let ten = BigRational::from_integer(10.into());
    if e >= 0 {
        num_traits::pow(ten, e as usize)
    } else {
        BigRational::one() / num_traits::pow(ten, (-e) as usize)
    }
}

/// Formats a rational with `sig` significant digits in plain positional notation.
pub fn format_significant(x: &BigRational, sig: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let neg = x.is_negative();
    let a = x.abs();
    let mut e = ratio_to_f64(&a).log10().floor() as i64;
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    let scaled = &a * pow10(sig as i64 - 1 - e);
    let half = BigRational::new(1.into(), 2.into());
    let mut n = (scaled + half).floor().to_integer();
    if n == num_traits::pow(BigInt::from(10), sig) {
        n = num_traits::pow(BigInt::from(10), sig - 1);
        e += 1;
    }
    let digits = n.to_string();
    let point = e + 1;
    let mut s = if point >= sig as i64 {
        format!("{digits}{}", "0".repeat((point - sig as i64) as usize))
    } else if point > 0 {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    } else {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    };
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if neg {
        s.insert(0, '-');
    }
    s
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut m = 0;
            while n.is_multiple_of(p) {
                n /= p;
                m += 1;
            }
            out.push((p, m));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

impl From<BigRational> for Money {
    fn from(q: BigRational) -> Self {
        Money::from_rational(q)
    }
}

impl From<&BigRational> for Money {
    fn from(q: &BigRational) -> Self {
        Money::from_rational(q.clone())
    }
}

impl From<i64> for Money {
    fn from(n: i64) -> Self {
        Money::from_integer(n)
    }
}

impl Add<&Money> for &Money {
    type Output = Money;
    fn add(self, rhs: &Money) -> Money {
        let mut terms = self.terms.clone();
        for (r, c) in &rhs.terms {
            let entry = terms.entry(r.clone()).or_insert_with(BigRational::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(r);
            }
        }
        Money { terms }
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        &self + &rhs
    }
}

impl Neg for &Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money {
            terms: self.terms.iter().map(|(r, c)| (r.clone(), -c)).collect(),
        }
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        -&self
    }
}

impl Sub<&Money> for &Money {
    type Output = Money;
    fn sub(self, rhs: &Money) -> Money {
        self + &(-rhs)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        &self - &rhs
    }
}

impl Mul<&Money> for &Money {
    type Output = Money;
    fn mul(self, rhs: &Money) -> Money {
        let mut out = Money::zero();
        for (ra, ca) in &self.terms {
            for (rb, cb) in &rhs.terms {
                let (carry, r) = ra.mul(rb);
                let mut single = BTreeMap::new();
                single.insert(r, ca * cb * carry);
                out = &out + &Money { terms: single };
            }
        }
        out
    }
}

impl Mul for Money {
    type Output = Money;
    fn mul(self, rhs: Money) -> Money {
        &self * &rhs
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, m| &acc + &m)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::zero(), |acc, m| &acc + m)
    }
}

impl PartialOrd for Money {
    fn partial_cmp(&self, other: &Money) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Money {
    fn cmp(&self, other: &Money) -> Ordering {
        match (self.as_rational(), other.as_rational()) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => (self - other).signum(),
        }
    }
}

impl fmt::Display for Money {
    /// Exact form, e.g. `19/2` or `3/2*sqrt(2) + 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (r, c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if c.is_negative() { ("-", -c) } else { ("+", c.clone()) };
            match (i, sign) {
                (0, "-") => write!(f, "-")?,
                (0, _) => {}
                (_, s) => write!(f, " {s} ")?,
            }
            if r.is_one() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{r}")?;
            } else {
                write!(f, "{mag}*{r}")?;
            }
        }
        Ok(())
    }
}

/// Error returned when an amount literal cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount literal {0:?}")]
pub struct ParseAmountError(pub String);

/// Parses a decimal (`9.5`, `-2`, `0.125`) or fraction (`19/2`) literal exactly.
pub fn parse_amount(s: &str) -> Result<BigRational, ParseAmountError> {
    let err = || ParseAmountError(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if (int_part.is_empty() && frac_part.is_empty())
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| err())?;
    let d = num_traits::pow(BigInt::from(10), frac_part.len());
    let q = BigRational::new(n, d);
    Ok(if neg { -q } else { q })
}

/// Renders a rational exactly: a terminating decimal when one exists, else `n/d`.
pub fn format_amount(q: &BigRational) -> String {
    let mut d = q.denom().clone();
    let mut twos = 0usize;
    let mut fives = 0usize;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", q.numer(), q.denom());
    }
    let places = twos.max(fives);
    let scaled = q * BigRational::from_integer(num_traits::pow(BigInt::from(10), places));
    let n = scaled.to_integer();
    if places == 0 {
        return n.to_string();
    }
    let neg = n.is_negative();
    let mut digits = n.abs().to_string();
    if digits.len() <= places {
        digits = format!("{}{digits}", "0".repeat(places + 1 - digits.len()));
    }
    let split = digits.len() - places;
    format!(
        "{}{}.{}",
        if neg { "-" } else { "" },
        &digits[..split],
        &digits[split..]
    )
}
