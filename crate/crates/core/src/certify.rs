//! Certified enclosures of the limit conditional `P(k | β)`.
//!
//! For every `β` in a cylinder `[x]`, the density `f(i, β)` of each index lies
//! in an exact range. Indices below a truncation point `J` are enclosed
//! individually, and those at or above `J` contribute between 0 and
//! `Σ_{i>=J} 2·2^-i = 2^(2-J)`. Writing the conditional as
//! `num / (num + rest)` gives an enclosure that is monotone in both parts.
//! Deeper prefixes and larger `J` shrink it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::ce::{index_weight, CeMeasure, EventuallyConstant};
use crate::dyadic::{BitString, Dyadic, Rational};
use crate::sample::MarginalSampler;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CeError {
    #[error("precision unreachable: source {source_desc} gave out at depth {depth}")]
    PrecisionUnreachable { source_desc: String, depth: usize },
    #[error("precision must be positive")]
    NonPositivePrecision,
    #[error("unknown prefix source `{0}`")]
    UnknownSource(String),
    #[error("invalid prefix source parameters: {0}")]
    InvalidSource(String),
}

/// Exact interval `[lower, upper]` containing a limit quantity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifiedValue {
    pub lower: Rational,
    pub upper: Rational,
}

impl CertifiedValue {
    pub fn new(lower: Rational, upper: Rational) -> Self {
        debug_assert!(lower <= upper);
        CertifiedValue { lower, upper }
    }

    pub fn width(&self) -> Rational {
        &self.upper - &self.lower
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lower <= x && x <= &self.upper
    }

    pub fn overlaps(&self, other: &CertifiedValue) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

impl fmt::Display for CertifiedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifiedReport {
    pub index: u64,
    pub value: CertifiedValue,
    pub depth: usize,
    pub truncation: u64,
    pub source: String,
}

/// Supplier of prefixes of one fixed `β`.
pub trait PrefixSource: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn describe(&self) -> String;
    /// First `depth` bits, or `None` when the source cannot supply them.
    fn prefix(&self, depth: usize) -> Option<BitString>;
}

/// Given bits, optionally followed by a constant tail.
#[derive(Debug, Clone)]
pub struct ExplicitPrefix {
    bits: BitString,
    tail: Option<bool>,
}

impl ExplicitPrefix {
    pub const NAME: &'static str = "explicit";

    pub fn new(bits: BitString, tail: Option<bool>) -> Self {
        ExplicitPrefix { bits, tail }
    }

    /// `bits` then all zeros.
    pub fn zero_tail(bits: BitString) -> Self {
        ExplicitPrefix::new(bits, Some(false))
    }

    pub fn from_sequence(beta: &EventuallyConstant) -> Self {
        ExplicitPrefix::new(beta.prefix.clone(), Some(beta.tail))
    }

    pub fn as_sequence(&self) -> Option<EventuallyConstant> {
        self.tail
            .map(|t| EventuallyConstant::new(self.bits.clone(), t))
    }
}

impl PrefixSource for ExplicitPrefix {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn describe(&self) -> String {
        match self.tail {
            Some(t) => format!("explicit:{}({})^inf", self.bits, t as u8),
            None => format!("explicit:{}", self.bits),
        }
    }

    fn prefix(&self, depth: usize) -> Option<BitString> {
        if depth <= self.bits.len() {
            return Some(self.bits.prefix(depth));
        }
        let t = self.tail?;
        let mut p = self.bits.clone();
        while p.len() < depth {
            p.push(t);
        }
        Some(p)
    }
}

/// Prefix of a `β` drawn from the marginal, extended lazily up to `max_depth`.
#[derive(Debug)]
pub struct SampledPrefix {
    seed: u64,
    max_depth: usize,
    sampler: Mutex<MarginalSampler>,
}

impl SampledPrefix {
    pub const NAME: &'static str = "sampled";

    pub fn new(measure: CeMeasure, seed: u64, max_depth: usize) -> Self {
        SampledPrefix {
            seed,
            max_depth,
            sampler: Mutex::new(MarginalSampler::new(measure, seed)),
        }
    }
}

impl PrefixSource for SampledPrefix {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn describe(&self) -> String {
        format!("sampled:seed={}:max_depth={}", self.seed, self.max_depth)
    }

    fn prefix(&self, depth: usize) -> Option<BitString> {
        if depth > self.max_depth {
            return None;
        }
        let mut s = self.sampler.lock().expect("sampler poisoned");
        Some(s.extend_to(depth).prefix(depth))
    }
}

/// Parameters shared by the built-in source factories.
#[derive(Debug, Clone, Default)]
pub struct SourceParams {
    pub bits: BitString,
    /// Constant tail after `bits`; `None` makes the source finite.
    pub tail: Option<bool>,
    pub seed: u64,
    pub max_depth: usize,
}

pub type SourceFactory = fn(&SourceParams, &CeMeasure) -> Result<Box<dyn PrefixSource>, CeError>;

/// Name → factory table for prefix sources.
#[derive(Clone)]
pub struct SourceRegistry {
    factories: BTreeMap<&'static str, SourceFactory>,
}

impl SourceRegistry {
    pub fn builtin() -> Self {
        let mut r = SourceRegistry {
            factories: BTreeMap::new(),
        };
        r.register(ExplicitPrefix::NAME, |p, _| {
            Ok(Box::new(ExplicitPrefix::new(p.bits.clone(), p.tail)))
        });
        r.register(SampledPrefix::NAME, |p, mu| {
            if p.max_depth == 0 {
                return Err(CeError::InvalidSource("max_depth must be positive".into()));
            }
            Ok(Box::new(SampledPrefix::new(
                mu.clone(),
                p.seed,
                p.max_depth,
            )))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, factory: SourceFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(
        &self,
        name: &str,
        params: &SourceParams,
        mu: &CeMeasure,
    ) -> Result<Box<dyn PrefixSource>, CeError> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| CeError::UnknownSource(name.to_string()))?;
        f(params, mu)
    }
}

impl fmt::Debug for SourceRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

/// Enclosure of `P(k | β)` valid for every `β ∈ [prefix]`, with indices
/// `>= truncation` bounded as a block.
pub fn bounds_at(mu: &CeMeasure, k: u64, prefix: &BitString, truncation: u64) -> CertifiedValue {
    let (num_lo, num_hi) = mu.density_range(k, prefix);

    // Σ_{i<J} 2^-i = 2 - 2^(1-J); start from the all-constant sum and correct
    // the member indices (and k itself).
    let j = truncation;
    let head = Dyadic::from_int(2) - Dyadic::pow2_neg(j as u32).scale_pow2(1);
    let mut rest_lo = head.clone();
    let mut rest_hi = head;
    if k < j {
        let w = index_weight(k);
        rest_lo = rest_lo - &w;
        rest_hi = rest_hi - &w;
    }
    for c in mu.components() {
        if c.index >= j || c.index == k {
            continue;
        }
        let w = index_weight(c.index);
        let (lo, hi) = mu.density_range(c.index, prefix);
        rest_lo = rest_lo - &w + lo;
        rest_hi = rest_hi - &w + hi;
    }
    rest_hi = rest_hi + Dyadic::pow2_neg(j as u32).scale_pow2(2);

    let lower = if num_lo.is_zero() {
        Rational::zero()
    } else {
        num_lo.to_rational() / (&num_lo + &rest_hi).to_rational()
    };
    let upper = if num_hi.is_zero() {
        Rational::zero()
    } else if rest_lo.is_zero() {
        Rational::one()
    } else {
        num_hi.to_rational() / (&num_hi + &rest_lo).to_rational()
    };
    CertifiedValue::new(lower, upper)
}

/// Smallest `j` with `2^-j <= x` (x > 0).
fn log2_ceil_inv(x: &Rational) -> u64 {
    let mut j = 0u64;
    let mut p = Rational::one();
    while &p > x {
        p /= Rational::from_integer(2.into());
        j += 1;
    }
    j
}

/// Depth steps tried beyond the starting depth before giving up.
const MAX_DEEPENINGS: usize = 96;

/// Enclosure of `P(k | β)` of width at most `eps`, deepening the prefix as needed.
pub fn ce_conditional(
    mu: &CeMeasure,
    k: u64,
    source: &dyn PrefixSource,
    eps: &Rational,
) -> Result<CertifiedReport, CeError> {
    if *eps <= Rational::zero() {
        return Err(CeError::NonPositivePrecision);
    }
    let bits = log2_ceil_inv(eps);
    // tail bound 2^(2-J) < eps/4
    let mut truncation = (bits + 5).max(k + 1);
    // member ranges shrink like 2^(t - depth)
    let mut depth = (mu.instance().max_time() + bits + 5) as usize;
    for _ in 0..MAX_DEEPENINGS {
        let prefix = source
            .prefix(depth)
            .ok_or_else(|| CeError::PrecisionUnreachable {
                source_desc: source.describe(),
                depth,
            })?;
        let value = bounds_at(mu, k, &prefix, truncation);
        if value.width() <= *eps {
            return Ok(CertifiedReport {
                index: k,
                value,
                depth,
                truncation,
                source: source.describe(),
            });
        }
        depth += 2;
        truncation += 2;
    }
    Err(CeError::PrecisionUnreachable {
        source_desc: source.describe(),
        depth,
    })
}

/// Enclosure from exactly `depth` bits, with truncation tied to depth so the
/// tail bound is `2^-(depth+1)`.
pub fn certify_at_depth(
    mu: &CeMeasure,
    k: u64,
    source: &dyn PrefixSource,
    depth: usize,
) -> Result<CertifiedReport, CeError> {
    let prefix = source
        .prefix(depth)
        .ok_or_else(|| CeError::PrecisionUnreachable {
            source_desc: source.describe(),
            depth,
        })?;
    let truncation = depth as u64 + 3;
    Ok(CertifiedReport {
        index: k,
        value: bounds_at(mu, k, &prefix, truncation),
        depth,
        truncation,
        source: source.describe(),
    })
}
