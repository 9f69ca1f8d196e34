//! Invariant suites run by `condlab selftest`.
//!
//! Each suite records how many checks ran and a message per failure; nothing
//! here panics on a failed invariant.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alpha::{AlphaError, AlphaSequence, GeneratorRegistry, GeneratorSpec};
use crate::ce::{CeMeasure, EventuallyConstant};
use crate::certify::{ce_conditional, ExplicitPrefix};
use crate::consistency::consistency_check;
use crate::decode::{decode_membership, CeOracle};
use crate::density::{density_integral, PwlDensity};
use crate::dyadic::{
    strip_partition, uniform_measure, BitString, Dyadic, DyadicInterval, Rational, Rect,
};
use crate::instance::CeInstance;
use crate::trim::{trim_level, verify_conditions, TestLevel};
use crate::vlf::VlfMeasure;

#[derive(Debug, Clone)]
pub struct SelftestConfig {
    pub alpha: GeneratorSpec,
    pub instance: CeInstance,
    pub paired: bool,
    pub seed: u64,
    /// Random trials per property.
    pub trials: usize,
    /// Largest cylinder length used for the `α`-dependent suites.
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn fail(&mut self, msg: impl fmt::Display) {
        self.checks += 1;
        self.failures.push(msg.to_string());
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "pass" } else { "fail" };
        write!(
            f,
            "suite={} status={} checks={} failures={}",
            self.name,
            status,
            self.checks,
            self.failures.len()
        )?;
        if let Some(first) = self.failures.first() {
            write!(f, " first=\"{}\"", first.replace('"', "'"))?;
        }
        Ok(())
    }
}

pub fn random_bits<R: Rng>(rng: &mut R, len: usize) -> BitString {
    BitString::from_bits((0..len).map(|_| rng.random::<bool>()))
}

/// Nonempty `[a/2^e, b/2^e)` inside `[0,1)`.
pub fn random_interval<R: Rng>(rng: &mut R, e: u32) -> DyadicInterval {
    let n = 1i64 << e;
    let a = rng.random_range(0..n);
    let b = rng.random_range(a + 1..=n);
    DyadicInterval::new(Dyadic::new(a, e), Dyadic::new(b, e)).expect("a < b")
}

pub fn random_dyadic_unit<R: Rng>(rng: &mut R, e: u32) -> Dyadic {
    Dyadic::new(rng.random_range(0..=(1i64 << e)), e)
}

/// Usable `α` depth: the largest `n <= cap` for which `α_1..α_n` are available.
fn usable_depth(alphas: &AlphaSequence, cap: usize) -> usize {
    (1..=cap)
        .take_while(|&n| alphas.alpha(n).is_ok())
        .last()
        .unwrap_or(0)
}

pub fn run_all(cfg: &SelftestConfig) -> Vec<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let alphas = GeneratorRegistry::builtin().sequence(&cfg.alpha);
    let mu = CeMeasure::new(cfg.instance.clone(), cfg.paired);
    let mut out = vec![dyadic_suite(&mut rng, cfg.trials)];
    match alphas {
        Ok(seq) => {
            out.push(alpha_suite(&seq, cfg.max_depth));
            let depth = usable_depth(&seq, cfg.max_depth);
            let m = VlfMeasure::new(seq);
            out.push(vlf_suite(&m, &mut rng, cfg.trials, depth));
            out.push(trim_suite(&m, &mut rng, cfg.trials, depth));
        }
        Err(e) => {
            for name in ["alpha-gen", "vlf-measure", "test-trimmer"] {
                let mut s = SuiteResult::new(name);
                s.fail(&e);
                out.push(s);
            }
        }
    }
    out.push(density_suite(&mu, &mut rng, cfg.trials));
    out.push(decode_suite(&mu));
    out
}

fn dyadic_suite(rng: &mut ChaCha8Rng, trials: usize) -> SuiteResult {
    let mut s = SuiteResult::new("dyadic-core");
    for _ in 0..trials {
        let i = random_interval(rng, 10);
        let cyl = {
            let len = rng.random_range(0..8);
            random_bits(rng, len)
        };
        let r = Rect::new(i.clone(), cyl.clone());
        let c = random_dyadic_unit(rng, 10);
        let (l, h) = i.split(&c);
        let parts: Dyadic = [l, h]
            .into_iter()
            .flatten()
            .map(|p| uniform_measure(&Rect::new(p, cyl.clone())))
            .sum();
        s.check(parts == uniform_measure(&r), || {
            format!("split at {c} of {i}")
        });
        let text = i.lo().to_string();
        s.check(text.parse::<Dyadic>().ok().as_ref() == Some(i.lo()), || {
            format!("round trip of {text}")
        });
        let breaks: Vec<Dyadic> = (1..=4)
            .map(|n| Dyadic::one() - Dyadic::pow2_neg(n))
            .collect();
        let left = i.split(&breaks[3]).0;
        if let Some(left) = left {
            match strip_partition(&left, &breaks) {
                Ok(pieces) => {
                    let total: Dyadic = pieces.iter().map(|(_, p)| p.length()).sum();
                    s.check(total == left.length(), || format!("strip cover of {left}"));
                }
                Err(e) => s.fail(format!("strip partition of {left}: {e}")),
            }
        }
    }
    s
}

fn alpha_suite(seq: &AlphaSequence, depth: usize) -> SuiteResult {
    let mut s = SuiteResult::new("alpha-gen");
    // finite generators are checked over the terms they have
    let terms = match seq.terms(depth) {
        Err(AlphaError::GeneratorExhausted { available, .. }) => seq.terms(available),
        other => other,
    };
    match terms {
        Ok(terms) => {
            for (i, w) in terms.windows(2).enumerate() {
                s.check(w[0] < w[1], || format!("α_{} >= α_{}", i + 1, i + 2));
            }
            if let Ok((_, Some(ub))) = seq.limit_bounds(depth) {
                let last = terms.last().cloned().unwrap_or_else(Dyadic::zero);
                s.check(last.to_rational() <= ub, || "term above limit bound".into());
            }
            s.check(
                terms.iter().all(|a| !a.is_negative() && *a < Dyadic::one()),
                || "term outside [0,1)".into(),
            );
        }
        Err(e) => s.fail(e),
    }
    s
}

fn vlf_suite(m: &VlfMeasure, rng: &mut ChaCha8Rng, trials: usize, depth: usize) -> SuiteResult {
    let mut s = SuiteResult::new("vlf-measure");
    let unit = Rect::new(DyadicInterval::unit(), BitString::empty());
    match m.p_eval(&unit) {
        Ok(v) => s.check(v == Dyadic::one(), || format!("total mass {v}")),
        Err(e) => s.fail(e),
    }
    for _ in 0..trials {
        let i = random_interval(rng, 10);
        let cyl = {
            let len = rng.random_range(0..depth.max(1));
            random_bits(rng, len)
        };
        let r = Rect::new(i.clone(), cyl.clone());
        let c = random_dyadic_unit(rng, 10);
        let res = (|| -> Result<(), crate::vlf::VlfError> {
            let whole = m.p_eval(&r)?;
            s.check(!whole.is_negative(), || format!("negative mass at {r:?}"));
            let (a, b) = i.split(&c);
            let mut parts = Dyadic::zero();
            for p in [a, b].into_iter().flatten() {
                parts = parts + m.p_eval(&Rect::new(p, cyl.clone()))?;
            }
            s.check(parts == whole, || format!("interval split of {r:?}"));
            let kids = m.p_eval(&Rect::new(i.clone(), cyl.child(false)))?
                + m.p_eval(&Rect::new(i.clone(), cyl.child(true)))?;
            s.check(kids == whole, || format!("cylinder split of {r:?}"));
            if cyl.is_empty() || cyl.ends_with_one() {
                let rep = m.conditional_ratio(&i, &cyl)?;
                s.check(rep.ratio == rep.predicted_limit, || {
                    format!("conditional identity at {cyl}")
                });
            }
            Ok(())
        })();
        if let Err(e) = res {
            s.fail(e);
        }
    }
    for n in 0..depth {
        match (m.atom_mass_cumulative(n), m.alphas().alpha(n + 1)) {
            (Ok(a), Ok(b)) => s.check(a == b, || format!("atom telescoping at {n}")),
            (Err(e), _) => s.fail(e),
            (_, Err(e)) => s.fail(e),
        }
    }
    s
}

fn trim_suite(m: &VlfMeasure, rng: &mut ChaCha8Rng, trials: usize, depth: usize) -> SuiteResult {
    let mut s = SuiteResult::new("test-trimmer");
    let rects: Vec<Rect> = (0..trials)
        .map(|_| {
            let cyl = {
                let len = rng.random_range(0..=depth);
                random_bits(rng, len)
            };
            Rect::new(random_interval(rng, 8), cyl)
        })
        .collect();
    let probes: Vec<Dyadic> = (1..=depth)
        .filter_map(|n| m.alphas().alpha(n).ok())
        .collect();
    let v = TestLevel::new(1, rects);
    let res = trim_level(m, &v).and_then(|u| verify_conditions(m, &v, &u, &probes));
    match res {
        Ok(report) => {
            for rc in &report.rects {
                s.check(rc.passed(), || format!("rect {} check", rc.position));
            }
            s.check(report.correspondence_ok, || "trimmed list mismatch".into());
            s.check(report.aggregate_ok(), || "aggregate μ(U) > P(V)".into());
            s.check(report.probes_ok(), || "slice membership changed".into());
        }
        Err(e) => s.fail(e),
    }
    s
}

fn density_suite(mu: &CeMeasure, rng: &mut ChaCha8Rng, trials: usize) -> SuiteResult {
    let mut s = SuiteResult::new("ce-density");
    let fams = [PwlDensity::f0(), PwlDensity::f1()];
    for f in &fams {
        for t in 0..=20u64 {
            let v = density_integral(f, t, &BitString::empty());
            s.check(v == Dyadic::one(), || format!("mean at t={t}"));
        }
    }
    let zero = Dyadic::zero();
    let two = Dyadic::from_int(2);
    let extreme = |v: &Dyadic| *v == zero || *v == two;
    for _ in 0..trials {
        let r = random_dyadic_unit(rng, 16);
        s.check(
            extreme(&fams[0].eval(&r)) || extreme(&fams[1].eval(&r)),
            || format!("complementarity at {r}"),
        );
        let u = random_dyadic_unit(rng, 16);
        for f in &fams {
            let diff = (f.eval(&r) - f.eval(&u)).abs();
            s.check(diff <= Dyadic::from_int(8) * (&r - &u).abs(), || {
                format!("Lipschitz at {r}, {u}")
            });
        }
        let k = rng.random_range(0..12u64);
        let x = {
            let len = rng.random_range(0..10);
            random_bits(rng, len)
        };
        s.check(
            mu.ce_rect(k, &x) == mu.ce_rect(k, &x.child(false)) + mu.ce_rect(k, &x.child(true)),
            || format!("additivity k={k} x={x}"),
        );
        s.check(mu.ce_rect(k, &x) == mu.ce_rect_audited(k, &x), || {
            format!("stage audit k={k} x={x}")
        });
        let y = {
            let len = rng.random_range(0..6);
            random_bits(rng, len)
        };
        s.check(consistency_check(mu, k, &y), || {
            format!("consistency k={k} y={y}")
        });
    }
    let beta = EventuallyConstant::zeros();
    let src = ExplicitPrefix::from_sequence(&beta);
    let eps = Rational::new(1.into(), 1024.into());
    for k in 0..6 {
        match ce_conditional(mu, k, &src, &eps) {
            Ok(rep) => s.check(rep.value.contains(&mu.conditional_limit(k, &beta)), || {
                format!("certified value for k={k} misses limit")
            }),
            Err(e) => s.fail(e),
        }
    }
    s
}

fn decode_suite(mu: &CeMeasure) -> SuiteResult {
    let mut s = SuiteResult::new("decoder");
    if !mu.is_paired() {
        return s;
    }
    let src = ExplicitPrefix::zero_tail(BitString::empty());
    let oracle = CeOracle::new(mu, &src);
    let inst = mu.instance();
    for n in 0..=inst.horizon() {
        match decode_membership(mu, n, &oracle, inst.nonmember()) {
            Ok(d) => s.check(d.member == inst.is_member(n), || {
                format!("decoded {n} wrongly")
            }),
            Err(e) => s.fail(format!("n={n}: {e}")),
        }
    }
    s
}
