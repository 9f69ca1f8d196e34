//! Recovering set membership from certified conditional values.
//!
//! With `m0` a known nonmember, the normalized ratios
//! `r_b = P(2n+b | β)·2^(2n+b) / (P(2m0 | β)·2^(2m0))` are exactly 1 for a
//! nonmember `n`. For a member, at least one of them is 0 or 2. The decoder
//! refines certified enclosures until each `r_b` is either inside
//! `(3/4, 5/4)` or disjoint from it.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_traits::Zero;
use thiserror::Error;

use crate::ce::CeMeasure;
use crate::certify::{ce_conditional, CeError, CertifiedValue, PrefixSource};
use crate::dyadic::{Dyadic, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("oracle exhausted: {0}")]
    OracleExhausted(#[from] CeError),
    #[error("decoding needs the paired index scheme")]
    NotPaired,
    #[error("no decision after {0} refinements")]
    Undecided(usize),
}

/// Source of certified values of `P(k | β)` for one fixed `β`.
pub trait ConditionalOracle {
    /// An enclosure of width at most `2^-precision_bits`.
    fn certified(&self, k: u64, precision_bits: u32) -> Result<CertifiedValue, CeError>;

    /// Number of queries answered so far.
    fn queries(&self) -> usize;
}

/// Oracle backed by the certification engine, memoizing answers.
#[derive(Debug)]
pub struct CeOracle<'a> {
    measure: &'a CeMeasure,
    source: &'a dyn PrefixSource,
    memo: Mutex<HashMap<(u64, u32), CertifiedValue>>,
    queries: AtomicUsize,
}

impl<'a> CeOracle<'a> {
    pub fn new(measure: &'a CeMeasure, source: &'a dyn PrefixSource) -> Self {
        CeOracle {
            measure,
            source,
            memo: Mutex::new(HashMap::new()),
            queries: AtomicUsize::new(0),
        }
    }
}

impl ConditionalOracle for CeOracle<'_> {
    fn certified(&self, k: u64, precision_bits: u32) -> Result<CertifiedValue, CeError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        if let Some(v) = self
            .memo
            .lock()
            .expect("memo poisoned")
            .get(&(k, precision_bits))
        {
            return Ok(v.clone());
        }
        let eps = Dyadic::pow2_neg(precision_bits).to_rational();
        let v = ce_conditional(self.measure, k, self.source, &eps)?.value;
        self.memo
            .lock()
            .expect("memo poisoned")
            .insert((k, precision_bits), v.clone());
        Ok(v)
    }

    fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub candidate: u64,
    pub member: bool,
    /// Final enclosures of `r_0` and `r_1`.
    pub ratios: [CertifiedValue; 2],
    pub rounds: usize,
}

const MAX_ROUNDS: usize = 24;

fn scaled(v: &CertifiedValue, k: u64) -> (Rational, Rational) {
    let s = Dyadic::pow2_neg(0).scale_pow2(k as i64).to_rational();
    (&v.lower * &s, &v.upper * &s)
}

/// Enclosure of `a / b` for nonnegative enclosures; `None` if `b` may be 0.
fn ratio(a: (Rational, Rational), b: (Rational, Rational)) -> Option<CertifiedValue> {
    if b.0.is_zero() {
        return None;
    }
    Some(CertifiedValue::new(a.0 / &b.1, a.1 / &b.0))
}

pub fn decode_membership(
    mu: &CeMeasure,
    candidate: u64,
    oracle: &dyn ConditionalOracle,
    nonmember: u64,
) -> Result<Decoded, DecodeError> {
    if !mu.is_paired() {
        return Err(DecodeError::NotPaired);
    }
    let lo_gate: Rational = Rational::new(3.into(), 4.into());
    let hi_gate: Rational = Rational::new(5.into(), 4.into());
    let reference = 2 * nonmember;
    for round in 0..MAX_ROUNDS {
        let extra = 4 + 2 * round as u32;
        let base = oracle.certified(reference, reference as u32 + extra)?;
        let base = scaled(&base, reference);
        let mut ratios = Vec::with_capacity(2);
        for b in 0..2u64 {
            let k = 2 * candidate + b;
            let v = oracle.certified(k, k as u32 + extra)?;
            ratios.push(ratio(scaled(&v, k), base.clone()));
        }
        let excluded = |r: &CertifiedValue| r.upper <= lo_gate || r.lower >= hi_gate;
        let inside = |r: &CertifiedValue| r.lower > lo_gate && r.upper < hi_gate;
        if ratios.iter().all(Option::is_some) {
            let rs: Vec<CertifiedValue> = ratios.into_iter().flatten().collect();
            let done = if rs.iter().any(excluded) {
                Some(true)
            } else if rs.iter().all(inside) {
                Some(false)
            } else {
                None
            };
            if let Some(member) = done {
                return Ok(Decoded {
                    candidate,
                    member,
                    ratios: [rs[0].clone(), rs[1].clone()],
                    rounds: round + 1,
                });
            }
        }
    }
    Err(DecodeError::Undecided(MAX_ROUNDS))
}
