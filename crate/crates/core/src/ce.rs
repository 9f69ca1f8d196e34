//! Measures on `N x 2^N` whose conditional encodes a c.e. set.
//!
//! Index `k` carries weight `2^-k`. In the paired scheme `k = 2n + b`; if `n`
//! is enumerated at stage `t_n`, the density of `k` is `f_b` repeated with
//! period `2^-t_n`, otherwise it is constant. The plain scheme uses `k = n` and
//! `f0` only. Cylinders of length `<= t_n` cannot tell members from
//! nonmembers, which is what makes the measure computable.

use std::fmt;

use crate::density::{density_integral, tail_interval, PwlDensity};
use crate::dyadic::{BitString, Dyadic, Rational};
use crate::instance::CeInstance;

/// A sequence `prefix` followed by a constant tail of `tail` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventuallyConstant {
    pub prefix: BitString,
    pub tail: bool,
}

impl EventuallyConstant {
    pub fn new(prefix: BitString, tail: bool) -> Self {
        EventuallyConstant { prefix, tail }
    }

    pub fn zeros() -> Self {
        EventuallyConstant::new(BitString::empty(), false)
    }

    pub fn bit(&self, i: usize) -> bool {
        self.prefix.bit(i).unwrap_or(self.tail)
    }

    /// First `n` bits.
    pub fn take(&self, n: usize) -> BitString {
        BitString::from_bits((0..n).map(|i| self.bit(i)))
    }

    /// The real `0.β_{t+1} β_{t+2} ...` in `[0,1]`.
    pub fn tail_value(&self, t: u64) -> Dyadic {
        let t = usize::try_from(t).expect("stage too large");
        let rest = self.prefix.suffix_from(t);
        let lo = crate::dyadic::cylinder_to_interval(&rest);
        if self.tail {
            lo.hi().clone()
        } else {
            lo.lo().clone()
        }
    }
}

impl fmt::Display for EventuallyConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})^∞", self.prefix, if self.tail { 1 } else { 0 })
    }
}

/// Per-index density component: `(index, t_n, b)` for indices whose element
/// is a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemberComponent {
    pub index: u64,
    pub time: u64,
    pub family: bool,
}

#[derive(Debug, Clone)]
pub struct CeMeasure {
    instance: CeInstance,
    paired: bool,
    f0: PwlDensity,
    f1: PwlDensity,
    components: Vec<MemberComponent>,
}

pub fn index_weight(k: u64) -> Dyadic {
    Dyadic::pow2_neg(u32::try_from(k).expect("index too large"))
}

impl CeMeasure {
    pub fn new(instance: CeInstance, paired: bool) -> Self {
        let mut components: Vec<MemberComponent> = instance
            .members()
            .flat_map(|(n, t)| {
                let bs: &[bool] = if paired { &[false, true] } else { &[false] };
                bs.iter()
                    .map(|&b| MemberComponent {
                        index: if paired { 2 * n + b as u64 } else { n },
                        time: t,
                        family: b,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        components.sort_by_key(|c| c.index);
        CeMeasure {
            instance,
            paired,
            f0: PwlDensity::f0(),
            f1: PwlDensity::f1(),
            components,
        }
    }

    pub fn paired(instance: CeInstance) -> Self {
        CeMeasure::new(instance, true)
    }

    pub fn plain(instance: CeInstance) -> Self {
        CeMeasure::new(instance, false)
    }

    pub fn instance(&self) -> &CeInstance {
        &self.instance
    }

    pub fn is_paired(&self) -> bool {
        self.paired
    }

    pub fn family(&self, b: bool) -> &PwlDensity {
        if b {
            &self.f1
        } else {
            &self.f0
        }
    }

    /// Indices with a non-constant density, in increasing order.
    pub fn components(&self) -> &[MemberComponent] {
        &self.components
    }

    /// Largest index whose density can be non-constant; the instance horizon
    /// bounds the element, so this is finite.
    pub fn max_member_index(&self) -> Option<u64> {
        self.components.last().map(|c| c.index)
    }

    /// `(t_n, b)` when index `k` belongs to an element enumerated by `stage`.
    fn component(&self, k: u64, stage: Option<u64>) -> Option<(u64, bool)> {
        let (n, b) = if self.paired {
            (k / 2, k % 2 == 1)
        } else {
            (k, false)
        };
        let t = match stage {
            Some(s) => self.instance.enumerated_by(n, s)?,
            None => self.instance.enumeration_time(n)?,
        };
        Some((t, b))
    }

    /// Total unnormalized mass `Σ_k 2^-k = 2`.
    pub fn total_mass(&self) -> Dyadic {
        Dyadic::from_int(2)
    }

    /// Factor turning unnormalized masses into probabilities.
    pub fn normalization(&self) -> Dyadic {
        Dyadic::pow2_neg(1)
    }

    /// Unnormalized `P({k} x [cyl]) = ∫_[cyl] f(k, β) dβ`.
    pub fn ce_rect(&self, k: u64, cyl: &BitString) -> Dyadic {
        self.rect_with(k, cyl, None)
    }

    /// Same value, computed after running the enumeration for only `|cyl|` stages.
    pub fn ce_rect_audited(&self, k: u64, cyl: &BitString) -> Dyadic {
        self.rect_with(k, cyl, Some(cyl.len() as u64))
    }

    fn rect_with(&self, k: u64, cyl: &BitString, stage: Option<u64>) -> Dyadic {
        let inner = match self.component(k, stage) {
            Some((t, b)) => density_integral(self.family(b), t, cyl),
            None => Dyadic::pow2_neg(cyl.len() as u32),
        };
        index_weight(k) * inner
    }

    pub fn probability(&self, k: u64, cyl: &BitString) -> Dyadic {
        self.ce_rect(k, cyl) * self.normalization()
    }

    /// Unnormalized `P(N x [cyl])`, exact.
    pub fn marginal(&self, cyl: &BitString) -> Dyadic {
        let cell = Dyadic::pow2_neg(cyl.len() as u32);
        let mut constant = self.total_mass();
        let mut total = Dyadic::zero();
        for c in &self.components {
            constant = constant - index_weight(c.index);
            total = total + self.ce_rect(c.index, cyl);
        }
        total + constant * cell
    }

    /// Exact `(min, max)` of `f(k, β)` over `β ∈ [cyl]`.
    pub fn density_range(&self, k: u64, cyl: &BitString) -> (Dyadic, Dyadic) {
        let w = index_weight(k);
        match self.component(k, None) {
            None => (w.clone(), w),
            Some((t, b)) => match tail_interval(t, cyl) {
                None => (Dyadic::zero(), Dyadic::from_int(2) * w),
                Some(i) => {
                    let (lo, hi) = self.family(b).range(i.lo(), i.hi());
                    (lo * &w, hi * &w)
                }
            },
        }
    }

    /// `f(k, β)` at an eventually constant `β`.
    pub fn density_at(&self, k: u64, beta: &EventuallyConstant) -> Dyadic {
        let w = index_weight(k);
        match self.component(k, None) {
            None => w,
            Some((t, b)) => self.family(b).eval(&beta.tail_value(t)) * w,
        }
    }

    /// `Σ_k f(k, β)`, exact.
    pub fn marginal_density_at(&self, beta: &EventuallyConstant) -> Dyadic {
        let mut total = self.total_mass();
        for c in &self.components {
            total = total - index_weight(c.index) + self.density_at(c.index, beta);
        }
        total
    }

    /// The limit conditional `f(k, β) / Σ_i f(i, β)` at an eventually constant `β`.
    pub fn conditional_limit(&self, k: u64, beta: &EventuallyConstant) -> Rational {
        self.density_at(k, beta).to_rational() / self.marginal_density_at(beta).to_rational()
    }
}
