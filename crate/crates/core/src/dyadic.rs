//! Exact dyadic rationals, bit strings, half-open dyadic intervals and rectangles.
//!
//! Everything here is immutable and exact. A [`Dyadic`] is kept in lowest
//! terms (numerator odd, or exponent zero), so structural equality is value
//! equality and hashing is consistent.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision rational used for quotients of measures.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseDyadicError {
    #[error("empty number")]
    Empty,
    #[error("malformed number `{0}`")]
    Malformed(String),
    #[error("non-dyadic endpoint `{0}`")]
    NonDyadic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntervalError {
    #[error("empty interval [{lo}, {hi})")]
    Empty { lo: Dyadic, hi: Dyadic },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("interval [{lo}, {hi}) extends beyond the last break {last}")]
    BeyondLastBreak {
        lo: Dyadic,
        hi: Dyadic,
        last: Dyadic,
    },
    #[error("no breaks supplied")]
    NoBreaks,
    #[error("breaks are not strictly increasing at position {0}")]
    NotIncreasing(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseBitStringError {
    #[error("invalid bit `{ch}` at position {pos}")]
    InvalidBit { ch: char, pos: usize },
}

/// A rational `num / 2^exp` in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

impl Dyadic {
    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        let mut d = Dyadic {
            num: num.into(),
            exp,
        };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic {
            num: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic {
            num: BigInt::one(),
            exp: 0,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(n, 0)
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Self {
        Dyadic {
            num: BigInt::one(),
            exp: k,
        }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0);
        let shift = tz.min(self.exp as u64) as u32;
        if shift > 0 {
            self.num >>= shift;
            self.exp -= shift;
        }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    /// Exponent of the denominator: the value is `numerator / 2^exponent`.
    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    /// Multiplies by `2^shift` (shift may be negative).
    pub fn scale_pow2(&self, shift: i64) -> Self {
        if self.is_zero() {
            return Dyadic::zero();
        }
        if shift >= 0 {
            let s = shift as u64;
            if s >= self.exp as u64 {
                Dyadic {
                    num: &self.num << (s - self.exp as u64),
                    exp: 0,
                }
            } else {
                Dyadic {
                    num: self.num.clone(),
                    exp: self.exp - s as u32,
                }
            }
        } else {
            let exp = self.exp as i64 - shift;
            Dyadic {
                num: self.num.clone(),
                exp: u32::try_from(exp).expect("dyadic exponent overflow"),
            }
        }
    }

    pub fn half(&self) -> Self {
        self.scale_pow2(-1)
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.num.clone(), BigInt::one() << self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Converts an exact rational, failing when its denominator is not a power of two.
    pub fn from_rational(r: &Rational) -> Option<Self> {
        let den = r.denom();
        let tz = den.trailing_zeros()?;
        if (den >> tz) != BigInt::one() {
            return None;
        }
        Some(Dyadic::new(r.numer().clone(), u32::try_from(tz).ok()?))
    }

    fn aligned(&self, other: &Dyadic) -> (BigInt, BigInt, u32) {
        match self.exp.cmp(&other.exp) {
            Ordering::Equal => (self.num.clone(), other.num.clone(), self.exp),
            Ordering::Greater => (
                self.num.clone(),
                &other.num << (self.exp - other.exp),
                self.exp,
            ),
            Ordering::Less => (
                &self.num << (other.exp - self.exp),
                other.num.clone(),
                other.exp,
            ),
        }
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.exp == other.exp {
            return self.num.cmp(&other.num);
        }
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, exp) = self.aligned(rhs);
        Dyadic::new(a + b, exp)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, exp) = self.aligned(rhs);
        Dyadic::new(a - b, exp)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(
            &self.num * &rhs.num,
            self.exp
                .checked_add(rhs.exp)
                .expect("dyadic exponent overflow"),
        )
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Dyadic {
            type Output = Dyadic;
            fn $method(self, rhs: Dyadic) -> Dyadic {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $method(self, rhs: &Dyadic) -> Dyadic {
                (&self).$method(rhs)
            }
        }
        impl $tr<Dyadic> for &Dyadic {
            type Output = Dyadic;
            fn $method(self, rhs: Dyadic) -> Dyadic {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -self.clone()
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = &'a Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, x| acc + x)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, BigInt::one() << self.exp)
        }
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `p`, `p/q` with `q` a power of two, and `p/2^k`.
impl FromStr for Dyadic {
    type Err = ParseDyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseDyadicError::Empty);
        }
        let malformed = || ParseDyadicError::Malformed(s.to_string());
        let (num, den) = match s.split_once('/') {
            None => (s, None),
            Some((n, d)) => (n.trim(), Some(d.trim())),
        };
        let num: BigInt = num.parse().map_err(|_| malformed())?;
        let Some(den) = den else {
            return Ok(Dyadic::new(num, 0));
        };
        if let Some(k) = den.strip_prefix("2^") {
            let k: u32 = k.trim().parse().map_err(|_| malformed())?;
            return Ok(Dyadic::new(num, k));
        }
        let den: BigInt = den.parse().map_err(|_| malformed())?;
        if !den.is_positive() {
            return Err(malformed());
        }
        let r = Rational::new(num, den);
        Dyadic::from_rational(&r).ok_or_else(|| ParseDyadicError::NonDyadic(s.to_string()))
    }
}

/// Renders a rational as a decimal rounded half-up to `places` digits.
pub fn to_decimal(r: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = r * Rational::from_integer(scale.clone());
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let rounded = if scaled.is_negative() {
        -((-scaled) + half).floor()
    } else {
        (scaled + half).floor()
    }
    .to_integer();
    let neg = rounded.is_negative();
    let (int, frac) = rounded.abs().div_rem(&scale);
    let sign = if neg { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = places)
    }
}

/// Finite binary word; indexes the cylinder of all its infinite extensions.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        BitString(bits.into_iter().collect())
    }

    pub fn zeros(n: usize) -> Self {
        BitString(vec![false; n])
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        BitString(
            (0..len)
                .rev()
                .map(|i| i < 64 && (value >> i) & 1 == 1)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bit(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn child(&self, bit: bool) -> BitString {
        let mut v = self.0.clone();
        v.push(bit);
        BitString(v)
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        BitString(v)
    }

    /// First `n` bits (the whole string when `n >= len`).
    pub fn prefix(&self, n: usize) -> BitString {
        BitString(self.0[..n.min(self.len())].to_vec())
    }

    /// Bits after the first `n`.
    pub fn suffix_from(&self, n: usize) -> BitString {
        BitString(self.0[n.min(self.len())..].to_vec())
    }

    pub fn contains_one_after(&self, n: usize) -> bool {
        self.0.iter().skip(n).any(|&b| b)
    }

    pub fn ends_with_one(&self) -> bool {
        self.0.last() == Some(&true)
    }

    /// All `2^d` extensions of length `len + d`, in lexicographic order.
    pub fn extensions(&self, d: usize) -> impl Iterator<Item = BitString> + '_ {
        assert!(d < 64, "extension depth too large");
        (0..(1u64 << d)).map(move |i| self.concat(&BitString::from_u64(i, d)))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = ParseBitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(pos, ch)| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(ParseBitStringError::InvalidBit { ch, pos }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

/// Half-open interval `[lo, hi)` with dyadic endpoints, `lo < hi`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicInterval {
    lo: Dyadic,
    hi: Dyadic,
}

impl DyadicInterval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Result<Self, IntervalError> {
        if lo >= hi {
            return Err(IntervalError::Empty { lo, hi });
        }
        Ok(DyadicInterval { lo, hi })
    }

    /// `[0, 1)`.
    pub fn unit() -> Self {
        DyadicInterval {
            lo: Dyadic::zero(),
            hi: Dyadic::one(),
        }
    }

    pub fn lo(&self) -> &Dyadic {
        &self.lo
    }

    pub fn hi(&self) -> &Dyadic {
        &self.hi
    }

    pub fn length(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        &self.lo <= x && x < &self.hi
    }

    pub fn contains_interval(&self, other: &DyadicInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &DyadicInterval) -> Option<DyadicInterval> {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        DyadicInterval::new(lo, hi).ok()
    }

    /// Cuts at `c`; either side is `None` when empty.
    pub fn split(&self, c: &Dyadic) -> (Option<DyadicInterval>, Option<DyadicInterval>) {
        let left = DyadicInterval::new(self.lo.clone(), self.hi.clone().min(c.clone())).ok();
        let right = DyadicInterval::new(self.lo.clone().max(c.clone()), self.hi.clone()).ok();
        (left, right)
    }

    pub fn midpoint(&self) -> Dyadic {
        (&self.lo + &self.hi).half()
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

impl fmt::Debug for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Product of a first-coordinate interval and a second-coordinate cylinder.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rect {
    pub interval: DyadicInterval,
    pub cyl: BitString,
}

impl Rect {
    pub fn new(interval: DyadicInterval, cyl: BitString) -> Self {
        Rect { interval, cyl }
    }

    pub fn uniform_measure(&self) -> Dyadic {
        uniform_measure(self)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} x [{}]", self.interval, self.cyl)
    }
}

impl fmt::Debug for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `[0.x, 0.x + 2^-|x|)`.
pub fn cylinder_to_interval(x: &BitString) -> DyadicInterval {
    let mut num = BigInt::zero();
    for &b in x.bits() {
        num <<= 1;
        if b {
            num += 1;
        }
    }
    let exp = u32::try_from(x.len()).expect("bit string too long");
    let lo = Dyadic::new(num.clone(), exp);
    let hi = Dyadic::new(num + 1, exp);
    DyadicInterval { lo, hi }
}

/// Product uniform measure `(hi - lo) * 2^-|cyl|`.
pub fn uniform_measure(r: &Rect) -> Dyadic {
    r.interval.length().scale_pow2(-(r.cyl.len() as i64))
}

pub fn split_interval(
    i: &DyadicInterval,
    c: &Dyadic,
) -> (Option<DyadicInterval>, Option<DyadicInterval>) {
    i.split(c)
}

/// Cuts `i` into maximal pieces lying in single bands `[b_n, b_{n+1})`, `b_0 = 0`,
/// where `breaks = [b_1, b_2, ...]`. Each piece is tagged with its band index `n`.
pub fn strip_partition(
    i: &DyadicInterval,
    breaks: &[Dyadic],
) -> Result<Vec<(usize, DyadicInterval)>, PartitionError> {
    let last = breaks.last().ok_or(PartitionError::NoBreaks)?;
    if let Some(pos) = breaks.windows(2).position(|w| w[0] >= w[1]) {
        return Err(PartitionError::NotIncreasing(pos + 1));
    }
    if i.hi() > last || i.lo().is_negative() {
        return Err(PartitionError::BeyondLastBreak {
            lo: i.lo().clone(),
            hi: i.hi().clone(),
            last: last.clone(),
        });
    }
    // band n is [breaks[n-1], breaks[n]); first band containing lo:
    let mut band = breaks.partition_point(|b| b <= i.lo());
    let mut pieces = Vec::new();
    let mut lo = i.lo().clone();
    while lo < *i.hi() {
        let band_hi = &breaks[band];
        let hi = i.hi().clone().min(band_hi.clone());
        if lo < hi {
            pieces.push((
                band,
                DyadicInterval::new(lo, hi.clone()).expect("nonempty piece"),
            ));
        }
        lo = hi;
        band += 1;
    }
    Ok(pieces)
}
