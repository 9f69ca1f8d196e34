//! Cross-checks of the closed-form rectangle masses.

use num_traits::Signed;

use crate::ce::{index_weight, CeMeasure, EventuallyConstant};
use crate::density::PwlDensity;
use crate::dyadic::{cylinder_to_interval, BitString, Dyadic, Rational};

/// Refinement depths compared against the direct value.
pub const CONSISTENCY_DEPTHS: u32 = 4;

/// `∫_lo^hi f` by the trapezoid rule on the breakpoints inside `[lo, hi]`,
/// using pointwise values only. Exact because `f` is linear between them.
fn trapezoid(f: &PwlDensity, lo: &Dyadic, hi: &Dyadic) -> Dyadic {
    let mut xs = vec![lo.clone()];
    xs.extend(
        f.points()
            .iter()
            .map(|(x, _)| x.clone())
            .filter(|x| x > lo && x < hi),
    );
    xs.push(hi.clone());
    xs.windows(2)
        .map(|w| (&(&w[1] - &w[0]) * &(f.eval(&w[0]) + f.eval(&w[1]))).half())
        .sum()
}

/// `P({k} x [z])` from pointwise density values.
fn pointwise_rect(mu: &CeMeasure, k: u64, z: &BitString) -> Dyadic {
    let w = index_weight(k);
    let cell = Dyadic::pow2_neg(z.len() as u32);
    let (n, b) = if mu.is_paired() {
        (k / 2, k % 2 == 1)
    } else {
        (k, false)
    };
    let Some(t) = mu.instance().enumeration_time(n) else {
        return w * cell;
    };
    let t = t as usize;
    let f = mu.family(b);
    if z.len() <= t {
        // whole periods; each averages to ∫_0^1 f
        return w * cell * trapezoid(f, &Dyadic::zero(), &Dyadic::one());
    }
    let i = cylinder_to_interval(&z.suffix_from(t));
    w * trapezoid(f, i.lo(), i.hi()).scale_pow2(-(t as i64))
}

/// Whether `ce_rect(k, y)` equals the sum over the children of `y` at each
/// depth `|y| + d`, `d = 0..=4`, evaluated independently.
pub fn consistency_check(mu: &CeMeasure, k: u64, y: &BitString) -> bool {
    let direct = mu.ce_rect(k, y);
    (0..=CONSISTENCY_DEPTHS as usize).all(|d| {
        let refined: Dyadic = y.extensions(d).map(|z| pointwise_rect(mu, k, &z)).sum();
        refined == direct
    })
}

/// `|P(k | [β↾j]) - P(k | β)|`, the gap between the cylinder ratio and the
/// pointwise limit.
pub fn lebesgue_gap(mu: &CeMeasure, k: u64, beta: &EventuallyConstant, j: usize) -> Rational {
    let x = beta.take(j);
    let ratio = mu.ce_rect(k, &x).to_rational() / mu.marginal(&x).to_rational();
    (ratio - mu.conditional_limit(k, beta)).abs()
}
