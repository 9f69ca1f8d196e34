//! Strictly increasing dyadic sequences `α_1 < α_2 < ... < 1`.
//!
//! A sequence is produced by an [`AlphaGenerator`] picked by name from a
//! [`GeneratorRegistry`]. [`AlphaSequence`] owns the generator, caches the
//! terms it has produced and checks every new term before caching it, so a
//! misconfigured generator surfaces as [`AlphaError::MonotonicityViolation`]
//! at the first offending index. `α_0` is the constant 0.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::RwLock;

use thiserror::Error;

use crate::dyadic::{Dyadic, Rational};
use crate::instance::CeInstance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlphaError {
    #[error("generator `{generator}` has only {available} terms, term {requested} requested")]
    GeneratorExhausted {
        generator: String,
        available: usize,
        requested: usize,
    },
    #[error("monotonicity violation at α_{index}: {value} does not exceed {previous}")]
    MonotonicityViolation {
        index: usize,
        previous: Dyadic,
        value: Dyadic,
    },
    #[error("α_{index} = {value} lies outside (0,1)")]
    OutOfRange { index: usize, value: Dyadic },
    #[error("unknown generator kind `{0}`")]
    UnknownGenerator(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

pub trait AlphaGenerator: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Term `n >= 1`, given the already validated terms `α_1..α_{n-1}`.
    /// `None` once the generator has no further terms.
    fn term(&self, n: usize, previous: &[Dyadic]) -> Option<Dyadic>;

    /// A declared upper bound on the limit, when the generator knows one.
    fn limit_upper_bound(&self) -> Option<Rational>;
}

/// Kind-specific configuration values.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Dyadic(Dyadic),
    DyadicList(Vec<Dyadic>),
    Pairs(Vec<(u64, u64)>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratorParams {
    values: BTreeMap<String, ParamValue>,
}

impl GeneratorParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn insert(&mut self, key: &str, value: ParamValue) {
        self.values.insert(key.to_string(), value);
    }

    fn take(&mut self, key: &str) -> Result<ParamValue, AlphaError> {
        self.values
            .remove(key)
            .ok_or_else(|| AlphaError::InvalidParams(format!("missing key `{key}`")))
    }

    pub fn take_dyadic(&mut self, key: &str) -> Result<Dyadic, AlphaError> {
        match self.take(key)? {
            ParamValue::Dyadic(d) => Ok(d),
            other => Err(wrong_type(key, "a dyadic rational", &other)),
        }
    }

    pub fn take_dyadic_list(&mut self, key: &str) -> Result<Vec<Dyadic>, AlphaError> {
        match self.take(key)? {
            ParamValue::DyadicList(v) => Ok(v),
            other => Err(wrong_type(key, "a list of dyadic rationals", &other)),
        }
    }

    pub fn take_pairs(&mut self, key: &str) -> Result<Vec<(u64, u64)>, AlphaError> {
        match self.take(key)? {
            ParamValue::Pairs(v) => Ok(v),
            other => Err(wrong_type(key, "a list of [n, t] pairs", &other)),
        }
    }

    /// Fails if any key was not consumed by the factory.
    pub fn finish(self) -> Result<(), AlphaError> {
        match self.values.keys().next() {
            None => Ok(()),
            Some(k) => Err(AlphaError::InvalidParams(format!("unknown key `{k}`"))),
        }
    }
}

fn wrong_type(key: &str, expected: &str, got: &ParamValue) -> AlphaError {
    AlphaError::InvalidParams(format!("`{key}` must be {expected}, got {got:?}"))
}

/// Generator kind name plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: String,
    pub params: GeneratorParams,
}

impl GeneratorSpec {
    pub fn explicit(values: Vec<Dyadic>) -> Self {
        GeneratorSpec {
            kind: ExplicitList::NAME.into(),
            params: GeneratorParams::new().with("values", ParamValue::DyadicList(values)),
        }
    }

    pub fn geometric(start: Dyadic, ratio: Dyadic) -> Self {
        GeneratorSpec {
            kind: Geometric::NAME.into(),
            params: GeneratorParams::new()
                .with("start", ParamValue::Dyadic(start))
                .with("ratio", ParamValue::Dyadic(ratio)),
        }
    }

    pub fn specker(members: Vec<(u64, u64)>) -> Self {
        GeneratorSpec {
            kind: Specker::NAME.into(),
            params: GeneratorParams::new().with("members", ParamValue::Pairs(members)),
        }
    }
}

pub type GeneratorFactory = fn(GeneratorParams) -> Result<Box<dyn AlphaGenerator>, AlphaError>;

/// Name → factory table for α-generators.
#[derive(Clone)]
pub struct GeneratorRegistry {
    factories: BTreeMap<&'static str, GeneratorFactory>,
}

impl GeneratorRegistry {
    pub fn empty() -> Self {
        GeneratorRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with `explicit-list`, `specker` and `geometric`.
    pub fn builtin() -> Self {
        let mut r = GeneratorRegistry::empty();
        r.register(ExplicitList::NAME, ExplicitList::from_params);
        r.register(Specker::NAME, Specker::from_params);
        r.register(Geometric::NAME, Geometric::from_params);
        r
    }

    pub fn register(&mut self, name: &'static str, factory: GeneratorFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(&self, spec: &GeneratorSpec) -> Result<Box<dyn AlphaGenerator>, AlphaError> {
        let factory = self
            .factories
            .get(spec.kind.as_str())
            .ok_or_else(|| AlphaError::UnknownGenerator(spec.kind.clone()))?;
        factory(spec.params.clone())
    }

    pub fn sequence(&self, spec: &GeneratorSpec) -> Result<AlphaSequence, AlphaError> {
        Ok(AlphaSequence::new(self.build(spec)?))
    }
}

impl Default for GeneratorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Debug for GeneratorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

/// A fixed finite list of terms.
#[derive(Debug, Clone)]
pub struct ExplicitList {
    values: Vec<Dyadic>,
}

impl ExplicitList {
    pub const NAME: &'static str = "explicit-list";

    pub fn new(values: Vec<Dyadic>) -> Self {
        ExplicitList { values }
    }

    fn from_params(mut p: GeneratorParams) -> Result<Box<dyn AlphaGenerator>, AlphaError> {
        let values = p.take_dyadic_list("values")?;
        p.finish()?;
        Ok(Box::new(ExplicitList::new(values)))
    }
}

impl AlphaGenerator for ExplicitList {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn term(&self, n: usize, _previous: &[Dyadic]) -> Option<Dyadic> {
        self.values.get(n - 1).cloned()
    }

    fn limit_upper_bound(&self) -> Option<Rational> {
        None
    }
}

/// Partial sums `start * (1 + ratio + ... + ratio^(n-1))`.
#[derive(Debug, Clone)]
pub struct Geometric {
    start: Dyadic,
    ratio: Dyadic,
}

impl Geometric {
    pub const NAME: &'static str = "geometric";

    pub fn new(start: Dyadic, ratio: Dyadic) -> Result<Self, AlphaError> {
        if start <= Dyadic::zero() || start >= Dyadic::one() {
            return Err(AlphaError::InvalidParams(format!(
                "start {start} must lie in (0,1)"
            )));
        }
        if ratio <= Dyadic::zero() || ratio >= Dyadic::one() {
            return Err(AlphaError::InvalidParams(format!(
                "ratio {ratio} must lie in (0,1)"
            )));
        }
        // limit start/(1-ratio) must not exceed 1
        if start > Dyadic::one() - &ratio {
            return Err(AlphaError::InvalidParams(format!(
                "limit {start}/(1-{ratio}) exceeds 1"
            )));
        }
        Ok(Geometric { start, ratio })
    }

    fn from_params(mut p: GeneratorParams) -> Result<Box<dyn AlphaGenerator>, AlphaError> {
        let start = p.take_dyadic("start")?;
        let ratio = p.take_dyadic("ratio")?;
        p.finish()?;
        Ok(Box::new(Geometric::new(start, ratio)?))
    }
}

impl AlphaGenerator for Geometric {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn term(&self, n: usize, previous: &[Dyadic]) -> Option<Dyadic> {
        let prev = if n == 1 {
            Dyadic::zero()
        } else {
            previous[n - 2].clone()
        };
        Some(&self.start + &(&self.ratio * &prev))
    }

    fn limit_upper_bound(&self) -> Option<Rational> {
        Some(self.start.to_rational() / (Dyadic::one() - &self.ratio).to_rational())
    }
}

/// Partial sums of `2^-(n+2)` over the elements of a c.e. instance, in order
/// of enumeration. Only stages where the sum changes yield a term.
#[derive(Debug, Clone)]
pub struct Specker {
    terms: Vec<Dyadic>,
    total: Dyadic,
}

impl Specker {
    pub const NAME: &'static str = "specker";

    pub fn weight(n: u64) -> Dyadic {
        Dyadic::pow2_neg(u32::try_from(n + 2).expect("element index too large"))
    }

    pub fn new(members: &[(u64, u64)]) -> Result<Self, AlphaError> {
        let mut seen = std::collections::BTreeSet::new();
        for &(n, _) in members {
            if !seen.insert(n) {
                return Err(AlphaError::InvalidParams(format!(
                    "element {n} enumerated twice"
                )));
            }
        }
        let mut by_stage: BTreeMap<u64, Dyadic> = BTreeMap::new();
        for &(n, t) in members {
            let w = by_stage.entry(t).or_default();
            *w = &*w + &Specker::weight(n);
        }
        let mut terms = Vec::with_capacity(by_stage.len());
        let mut sum = Dyadic::zero();
        for w in by_stage.into_values() {
            sum = sum + w;
            terms.push(sum.clone());
        }
        Ok(Specker { terms, total: sum })
    }

    pub fn from_instance(instance: &CeInstance) -> Self {
        let members: Vec<_> = instance.members().collect();
        Specker::new(&members).expect("instance members are distinct")
    }

    fn from_params(mut p: GeneratorParams) -> Result<Box<dyn AlphaGenerator>, AlphaError> {
        let members = p.take_pairs("members")?;
        p.finish()?;
        Ok(Box::new(Specker::new(&members)?))
    }
}

impl AlphaGenerator for Specker {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn term(&self, n: usize, _previous: &[Dyadic]) -> Option<Dyadic> {
        self.terms.get(n - 1).cloned()
    }

    fn limit_upper_bound(&self) -> Option<Rational> {
        Some(self.total.to_rational())
    }
}

/// Lazily extended, validated cache over a generator.
#[derive(Debug)]
pub struct AlphaSequence {
    generator: Box<dyn AlphaGenerator>,
    cache: RwLock<Vec<Dyadic>>,
}

impl AlphaSequence {
    pub fn new(generator: Box<dyn AlphaGenerator>) -> Self {
        AlphaSequence {
            generator,
            cache: RwLock::new(Vec::new()),
        }
    }

    pub fn from_spec(spec: &GeneratorSpec) -> Result<Self, AlphaError> {
        GeneratorRegistry::builtin().sequence(spec)
    }

    pub fn geometric(start: Dyadic, ratio: Dyadic) -> Result<Self, AlphaError> {
        Ok(AlphaSequence::new(Box::new(Geometric::new(start, ratio)?)))
    }

    pub fn explicit(values: Vec<Dyadic>) -> Self {
        AlphaSequence::new(Box::new(ExplicitList::new(values)))
    }

    pub fn generator_id(&self) -> &'static str {
        self.generator.name()
    }

    fn ensure(&self, n: usize) -> Result<(), AlphaError> {
        if self.cache.read().expect("alpha cache poisoned").len() >= n {
            return Ok(());
        }
        let mut cache = self.cache.write().expect("alpha cache poisoned");
        while cache.len() < n {
            let index = cache.len() + 1;
            let value = self.generator.term(index, &cache).ok_or_else(|| {
                AlphaError::GeneratorExhausted {
                    generator: self.generator.name().to_string(),
                    available: index - 1,
                    requested: n,
                }
            })?;
            if value <= Dyadic::zero() || value >= Dyadic::one() {
                return Err(AlphaError::OutOfRange { index, value });
            }
            if let Some(previous) = cache.last() {
                if value <= *previous {
                    return Err(AlphaError::MonotonicityViolation {
                        index,
                        previous: previous.clone(),
                        value,
                    });
                }
            }
            cache.push(value);
        }
        Ok(())
    }

    /// `α_n`, with `α_0 = 0`.
    pub fn alpha(&self, n: usize) -> Result<Dyadic, AlphaError> {
        if n == 0 {
            return Ok(Dyadic::zero());
        }
        self.ensure(n)?;
        Ok(self.cache.read().expect("alpha cache poisoned")[n - 1].clone())
    }

    /// `α_1..α_n`.
    pub fn terms(&self, n: usize) -> Result<Vec<Dyadic>, AlphaError> {
        self.ensure(n)?;
        Ok(self.cache.read().expect("alpha cache poisoned")[..n].to_vec())
    }

    /// `(α_n, declared upper bound on the limit)`.
    pub fn limit_bounds(&self, n: usize) -> Result<(Dyadic, Option<Rational>), AlphaError> {
        Ok((self.alpha(n)?, self.generator.limit_upper_bound()))
    }

    /// Number of terms currently cached.
    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("alpha cache poisoned").len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn explicit_lookup() {
        let a = AlphaSequence::explicit(vec![d("1/4"), d("3/8"), d("7/16")]);
        assert_eq!(a.alpha(2).unwrap(), d("3/8"));
        assert_eq!(a.alpha(0).unwrap(), Dyadic::zero());
        assert_eq!(
            a.alpha(4),
            Err(AlphaError::GeneratorExhausted {
                generator: "explicit-list".into(),
                available: 3,
                requested: 4
            })
        );
        assert_eq!(a.limit_bounds(3).unwrap(), (d("7/16"), None));
    }

    #[test]
    fn explicit_monotonicity_violation() {
        let a = AlphaSequence::explicit(vec![d("1/4"), d("1/8")]);
        assert_eq!(a.alpha(1).unwrap(), d("1/4"));
        assert!(matches!(
            a.alpha(2),
            Err(AlphaError::MonotonicityViolation { index: 2, .. })
        ));
        let b = AlphaSequence::explicit(vec![d("1")]);
        assert!(matches!(
            b.alpha(1),
            Err(AlphaError::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn geometric_closed_form() {
        let a = AlphaSequence::geometric(d("1/4"), d("1/2")).unwrap();
        assert_eq!(a.alpha(3).unwrap(), d("7/16"));
        for n in 1..=40usize {
            // oracle: 1/2 - 2^-(n+1)
            let expected = d("1/2") - Dyadic::pow2_neg(n as u32 + 1);
            assert_eq!(a.alpha(n).unwrap(), expected);
        }
        let (lo, hi) = a.limit_bounds(3).unwrap();
        assert_eq!(lo, d("7/16"));
        assert_eq!(hi, Some(Rational::new(BigInt::from(1), BigInt::from(2))));
    }

    #[test]
    fn geometric_rejects_bad_params() {
        assert!(Geometric::new(d("1/2"), d("3/4")).is_err());
        assert!(Geometric::new(d("0"), d("1/2")).is_err());
        assert!(Geometric::new(d("1/4"), d("1")).is_err());
        assert!(Geometric::new(d("1/2"), d("1/2")).is_ok());
    }

    #[test]
    fn specker_grows_by_element_weight() {
        let a = AlphaSequence::new(Box::new(Specker::new(&[(1, 3)]).unwrap()));
        // element 1 contributes 2^-(1+2)
        assert_eq!(a.alpha(1).unwrap(), d("1/8"));
        assert!(matches!(
            a.alpha(2),
            Err(AlphaError::GeneratorExhausted { .. })
        ));

        let members = [(0, 5), (3, 1), (2, 5), (6, 2)];
        let s = Specker::new(&members).unwrap();
        let seq = AlphaSequence::new(Box::new(s.clone()));
        // oracle: direct summation of weights enumerated by each stage
        let stages = [1u64, 2, 5];
        for (i, &stage) in stages.iter().enumerate() {
            let expected: Dyadic = members
                .iter()
                .filter(|&&(_, t)| t <= stage)
                .map(|&(n, _)| Dyadic::pow2_neg(n as u32 + 2))
                .sum();
            assert_eq!(seq.alpha(i + 1).unwrap(), expected);
        }
        let total: Dyadic = members
            .iter()
            .map(|&(n, _)| Dyadic::pow2_neg(n as u32 + 2))
            .sum();
        assert_eq!(seq.limit_bounds(1).unwrap().1, Some(total.to_rational()));
    }

    #[test]
    fn registry_builds_by_name() {
        let reg = GeneratorRegistry::builtin();
        assert_eq!(
            reg.names().collect::<Vec<_>>(),
            vec!["explicit-list", "geometric", "specker"]
        );
        let seq = reg
            .sequence(&GeneratorSpec::geometric(d("1/4"), d("1/2")))
            .unwrap();
        assert_eq!(seq.generator_id(), "geometric");
        let bad = GeneratorSpec {
            kind: "chaitin".into(),
            params: GeneratorParams::new(),
        };
        assert_eq!(
            reg.build(&bad).unwrap_err(),
            AlphaError::UnknownGenerator("chaitin".into())
        );
        let mut extra = GeneratorSpec::geometric(d("1/4"), d("1/2"));
        extra.params.insert("bogus", ParamValue::Dyadic(d("1")));
        assert!(matches!(
            reg.build(&extra),
            Err(AlphaError::InvalidParams(_))
        ));
    }

    #[test]
    fn deterministic_prefixes() {
        let specs = [
            GeneratorSpec::geometric(d("1/4"), d("1/2")),
            GeneratorSpec::geometric(d("3/16"), d("3/4")),
        ];
        for spec in specs {
            let a = AlphaSequence::from_spec(&spec).unwrap();
            let b = AlphaSequence::from_spec(&spec).unwrap();
            assert_eq!(a.terms(64).unwrap(), b.terms(64).unwrap());
            let t = a.terms(64).unwrap();
            assert!(t.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn concurrent_extension_is_consistent() {
        let a = AlphaSequence::geometric(d("1/4"), d("1/2")).unwrap();
        let reference = AlphaSequence::geometric(d("1/4"), d("1/2")).unwrap();
        std::thread::scope(|s| {
            for k in 0..4 {
                let a = &a;
                s.spawn(move || {
                    for n in (1..=48).rev().skip(k) {
                        a.alpha(n).unwrap();
                    }
                });
            }
        });
        assert_eq!(a.terms(48).unwrap(), reference.terms(48).unwrap());
    }
}
