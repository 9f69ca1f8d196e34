//! Exact computation with dyadic rationals for two families of measures on
//! product spaces: a measure on `[0,1) x 2^N` with variable-length strips,
//! and index/sequence measures whose conditionals encode a c.e. set.

pub mod alpha;
pub mod ce;
pub mod certify;
pub mod consistency;
pub mod decode;
pub mod density;
pub mod dyadic;
pub mod instance;
pub mod sample;
pub mod selftest;
pub mod trim;
pub mod vlf;

pub use alpha::{AlphaError, AlphaGenerator, AlphaSequence, GeneratorRegistry, GeneratorSpec};
pub use ce::{CeMeasure, EventuallyConstant};
pub use certify::{ce_conditional, CeError, CertifiedValue, PrefixSource, SourceRegistry};
pub use decode::{decode_membership, CeOracle, ConditionalOracle, DecodeError};
pub use dyadic::{BitString, Dyadic, DyadicInterval, Rational, Rect};
pub use instance::CeInstance;
pub use vlf::{VlfError, VlfMeasure};
