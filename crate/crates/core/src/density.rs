//! Continuous piecewise-linear densities on `[0,1]` with exact dyadic arithmetic.

use std::fmt;

use thiserror::Error;

use crate::dyadic::{cylinder_to_interval, BitString, Dyadic};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DensityError {
    #[error("need at least two breakpoints")]
    TooFewPoints,
    #[error("breakpoints must start at 0 and end at 1")]
    NotUnitDomain,
    #[error("breakpoint positions must strictly increase (index {0})")]
    NotIncreasing(usize),
    #[error("segment {0} length is not a power of two")]
    SegmentNotDyadic(usize),
    #[error("negative value at breakpoint {0}")]
    Negative(usize),
}

/// Graph through `(position, value)` points, linear in between.
///
/// Segment lengths are powers of two, so slopes are dyadic and evaluation at a
/// dyadic point stays dyadic.
#[derive(Clone, PartialEq, Eq)]
pub struct PwlDensity {
    points: Vec<(Dyadic, Dyadic)>,
    // slope of each segment
    segments: Vec<Dyadic>,
}

impl PwlDensity {
    pub fn new(points: Vec<(Dyadic, Dyadic)>) -> Result<Self, DensityError> {
        if points.len() < 2 {
            return Err(DensityError::TooFewPoints);
        }
        if !points[0].0.is_zero() || points[points.len() - 1].0 != Dyadic::one() {
            return Err(DensityError::NotUnitDomain);
        }
        let mut segments = Vec::with_capacity(points.len() - 1);
        for (i, w) in points.windows(2).enumerate() {
            let len = &w[1].0 - &w[0].0;
            if len <= Dyadic::zero() {
                return Err(DensityError::NotIncreasing(i + 1));
            }
            if len.numerator() != &1.into() {
                return Err(DensityError::SegmentNotDyadic(i));
            }
            segments.push((&w[1].1 - &w[0].1).scale_pow2(len.exponent() as i64));
        }
        if let Some(i) = points.iter().position(|(_, v)| v.is_negative()) {
            return Err(DensityError::Negative(i));
        }
        Ok(PwlDensity { points, segments })
    }

    /// Through `(0,2), (1/4,0), (1/2,0), (3/4,2), (1,2)`.
    pub fn f0() -> Self {
        PwlDensity::from_quarters([2, 0, 0, 2, 2])
    }

    /// `f1(r) = f0((r - 1/4) mod 1)`: through `(0,2), (1/4,2), (1/2,0), (3/4,0), (1,2)`.
    pub fn f1() -> Self {
        PwlDensity::from_quarters([2, 2, 0, 0, 2])
    }

    /// `f0` for `b = 0`, `f1` for `b = 1`.
    pub fn family(b: bool) -> Self {
        if b {
            PwlDensity::f1()
        } else {
            PwlDensity::f0()
        }
    }

    fn from_quarters(values: [i64; 5]) -> Self {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (Dyadic::new(i as i64, 2), Dyadic::from_int(v)))
            .collect();
        PwlDensity::new(points).expect("valid quarter-grid density")
    }

    pub fn points(&self) -> &[(Dyadic, Dyadic)] {
        &self.points
    }

    /// Largest absolute slope.
    pub fn lipschitz(&self) -> Dyadic {
        self.segments
            .iter()
            .map(Dyadic::abs)
            .max()
            .unwrap_or_else(Dyadic::zero)
    }

    fn segment_of(&self, r: &Dyadic) -> usize {
        // last segment whose left end is <= r
        let i = self.points.partition_point(|(x, _)| x <= r);
        i.saturating_sub(1).min(self.segments.len() - 1)
    }

    /// Exact value at `r` in `[0,1]`.
    ///
    /// Panics when `r` lies outside `[0,1]`.
    pub fn eval(&self, r: &Dyadic) -> Dyadic {
        assert!(
            !r.is_negative() && *r <= Dyadic::one(),
            "density evaluated outside [0,1] at {r}"
        );
        let s = self.segment_of(r);
        let (x0, v0) = &self.points[s];
        v0 + &(&self.segments[s] * &(r - x0))
    }

    /// Exact `∫_lo^hi f`, `0 <= lo <= hi <= 1`.
    pub fn integral(&self, lo: &Dyadic, hi: &Dyadic) -> Dyadic {
        assert!(lo <= hi, "reversed integration bounds");
        let mut total = Dyadic::zero();
        for (s, w) in self.points.windows(2).enumerate() {
            let a = lo.clone().max(w[0].0.clone());
            let b = hi.clone().min(w[1].0.clone());
            if a >= b {
                continue;
            }
            let fa = &w[0].1 + &(&self.segments[s] * &(&a - &w[0].0));
            let fb = &w[0].1 + &(&self.segments[s] * &(&b - &w[0].0));
            total = total + (&(b - a) * &(fa + fb)).half();
        }
        total
    }

    pub fn mean(&self) -> Dyadic {
        self.integral(&Dyadic::zero(), &Dyadic::one())
    }

    /// Exact `(min, max)` of `f` over the closed interval `[lo, hi]`.
    pub fn range(&self, lo: &Dyadic, hi: &Dyadic) -> (Dyadic, Dyadic) {
        let mut min = self.eval(lo);
        let mut max = min.clone();
        let candidates = self
            .points
            .iter()
            .filter(|(x, _)| x > lo && x < hi)
            .map(|(_, v)| v.clone())
            .chain(std::iter::once(self.eval(hi)));
        for v in candidates {
            if v < min {
                min = v;
            } else if v > max {
                max = v;
            }
        }
        (min, max)
    }
}

impl fmt::Debug for PwlDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.points.iter().map(|(x, v)| format!("({x},{v})")))
            .finish()
    }
}

/// The dyadic interval covered by the bits of a cylinder after the first `t`.
/// `None` when `|cyl| <= t`, i.e. when the cylinder spans whole periods.
pub fn tail_interval(t: u64, cyl: &BitString) -> Option<crate::dyadic::DyadicInterval> {
    let t = usize::try_from(t).ok()?;
    (cyl.len() > t).then(|| cylinder_to_interval(&cyl.suffix_from(t)))
}

/// `∫_[cyl] f(β_{t+1} β_{t+2} ...) dβ`: `f` repeated with period `2^-t`.
pub fn density_integral(f: &PwlDensity, t: u64, cyl: &BitString) -> Dyadic {
    match tail_interval(t, cyl) {
        None => Dyadic::pow2_neg(cyl.len() as u32),
        Some(i) => f.integral(i.lo(), i.hi()).scale_pow2(-(t as i64)),
    }
}
