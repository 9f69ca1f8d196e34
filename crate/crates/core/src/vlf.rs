//! The bivariate measure `P` on `[0,1) x 2^N` that concentrates mass on
//! finitely many horizontal lines inside each strip `[α_n, α_{n+1})`.
//!
//! On a strip `[α_n, α_{n+1})` and a cylinder `[wx]` with `|w| = n`, the mass is
//! `μ(I x [w])` when `x` has no 1 and zero otherwise. Right of `α_{|y|}` the
//! mass of `I x [y]` equals the uniform mass. Evaluation splits a rectangle at
//! `α_{|y|}` and strip-partitions the left part, so only `α_1..α_{|y|}` are
//! ever needed.

use thiserror::Error;

use crate::alpha::{AlphaError, AlphaSequence};
use crate::dyadic::{
    strip_partition, uniform_measure, BitString, Dyadic, DyadicInterval, PartitionError, Rational,
    Rect,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VlfError {
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("zero marginal mass at prefix \"{0}\"")]
    ZeroMarginal(BitString),
}

#[derive(Debug)]
pub struct VlfMeasure {
    alphas: AlphaSequence,
}

/// Finite-depth conditional ratio together with the uniform-on-`[α_{|b|},1)` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalReport {
    pub prefix: BitString,
    pub interval: DyadicInterval,
    pub ratio: Rational,
    pub predicted_limit: Rational,
    pub depth_band: usize,
}

impl ConditionalReport {
    /// Prefixes where the ratio is known to equal the predicted value exactly.
    pub fn identity_applies(&self) -> bool {
        self.prefix.is_empty() || self.prefix.ends_with_one()
    }
}

impl VlfMeasure {
    pub fn new(alphas: AlphaSequence) -> Self {
        VlfMeasure { alphas }
    }

    pub fn alphas(&self) -> &AlphaSequence {
        &self.alphas
    }

    pub fn p_eval(&self, r: &Rect) -> Result<Dyadic, VlfError> {
        let depth = r.cyl.len();
        let cut = self.alphas.alpha(depth)?;
        let (left, right) = r.interval.split(&cut);
        let mut total = match right {
            Some(right) => uniform_measure(&Rect::new(right, r.cyl.clone())),
            None => Dyadic::zero(),
        };
        if let Some(left) = left {
            let breaks = self.alphas.terms(depth)?;
            for (band, piece) in strip_partition(&left, &breaks)? {
                if !r.cyl.contains_one_after(band) {
                    total = total + piece.length().scale_pow2(-(band as i64));
                }
            }
        }
        Ok(total)
    }

    /// `P_M([y]) = P([0,1) x [y])`.
    pub fn marginal(&self, y: &BitString) -> Result<Dyadic, VlfError> {
        self.p_eval(&Rect::new(DyadicInterval::unit(), y.clone()))
    }

    /// Mass of `i` under the uniform measure on `[α_depth, 1)`.
    pub fn predicted_limit(&self, i: &DyadicInterval, depth: usize) -> Result<Rational, VlfError> {
        let a = self.alphas.alpha(depth)?;
        let support = DyadicInterval::new(a, Dyadic::one()).expect("α < 1");
        let inside = i
            .intersect(&support)
            .map(|x| x.length())
            .unwrap_or_else(Dyadic::zero);
        Ok(inside.to_rational() / support.length().to_rational())
    }

    pub fn conditional_ratio(
        &self,
        i: &DyadicInterval,
        prefix: &BitString,
    ) -> Result<ConditionalReport, VlfError> {
        let marginal = self.marginal(prefix)?;
        if marginal.is_zero() {
            return Err(VlfError::ZeroMarginal(prefix.clone()));
        }
        let joint = self.p_eval(&Rect::new(i.clone(), prefix.clone()))?;
        Ok(ConditionalReport {
            prefix: prefix.clone(),
            interval: i.clone(),
            ratio: joint.to_rational() / marginal.to_rational(),
            predicted_limit: self.predicted_limit(i, prefix.len())?,
            depth_band: prefix.len(),
        })
    }

    /// Total mass of the atoms `w0^∞` created by strips `0..=n`.
    ///
    /// Strip `k` puts equal mass on each of its `2^k` lines; a line's mass is
    /// read off as `P(strip_k x [0^(k+1)])`, which lies left of `α_{k+1}`.
    pub fn atom_mass_cumulative(&self, n: usize) -> Result<Dyadic, VlfError> {
        let mut total = Dyadic::zero();
        for k in 0..=n {
            let strip = DyadicInterval::new(self.alphas.alpha(k)?, self.alphas.alpha(k + 1)?)
                .expect("α strictly increasing");
            let line = self.p_eval(&Rect::new(strip, BitString::zeros(k + 1)))?;
            total = total + line.scale_pow2(k as i64);
        }
        Ok(total)
    }
}
