use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use condmeasure::alpha::GeneratorRegistry;
use condmeasure::certify::{certify_at_depth, ExplicitPrefix, SampledPrefix, SourceParams};
use condmeasure::decode::{decode_membership, CeOracle, ConditionalOracle};
use condmeasure::dyadic::{to_decimal, BitString, Dyadic, DyadicInterval, Rational, Rect};
use condmeasure::sample::sample_marginal;
use condmeasure::selftest::{run_all, SelftestConfig};
use condmeasure::trim::{
    parse_rect_line, parse_rects, trim_level, verify_conditions, ProbeOutcome, TestLevel,
};
use condmeasure::{
    ce_conditional, CeInstance, CeMeasure, PrefixSource, SourceRegistry, VlfError, VlfMeasure,
};

use crate::config::{BetaSource, LabConfig};

pub const DEMO_LEVEL: &str = include_str!("../../../configs/demo_level.txt");

const PLACES: usize = 12;

/// Whether every check in a command held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// Rows for CSV output; written to `--csv` when given.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes to `path`, or to stdout when `stdout_fallback` is set.
    pub fn emit(&self, path: Option<&Path>, stdout_fallback: bool) -> Result<()> {
        match path {
            Some(p) => {
                let f = std::fs::File::create(p)
                    .with_context(|| format!("creating {}", p.display()))?;
                self.write_to(f)
            }
            None if stdout_fallback => self.write_to(std::io::stdout().lock()),
            None => Ok(()),
        }
    }
}

fn dec(r: &Rational) -> String {
    to_decimal(r, PLACES)
}

fn ddec(d: &Dyadic) -> String {
    dec(&d.to_rational())
}

fn vlf(cfg: &LabConfig) -> Result<VlfMeasure> {
    Ok(VlfMeasure::new(
        GeneratorRegistry::builtin().sequence(&cfg.alpha)?,
    ))
}

fn ce_measure(cfg: &LabConfig) -> CeMeasure {
    CeMeasure::new(cfg.ce.clone(), cfg.paired)
}

fn beta_source(
    beta: &BetaSource,
    mu: &CeMeasure,
    seed: u64,
    max_depth: usize,
) -> Result<Box<dyn PrefixSource>> {
    let reg = SourceRegistry::builtin();
    let (name, params) = match beta {
        BetaSource::Explicit { bits, tail } => (
            ExplicitPrefix::NAME,
            SourceParams {
                bits: bits.clone(),
                tail: *tail,
                ..Default::default()
            },
        ),
        BetaSource::Sampled => (
            SampledPrefix::NAME,
            SourceParams {
                seed,
                max_depth,
                ..Default::default()
            },
        ),
    };
    Ok(reg.build(name, &params, mu)?)
}

/// Prefix sources draw up to this many bits when sampling.
const SAMPLED_MAX_DEPTH: usize = 4096;

pub fn eval_p(cfg: &LabConfig, rect: &[String], csv: Option<&Path>) -> Result<Outcome> {
    let text = rect.join(" ");
    let r = parse_rect_line(&text).map_err(|(field, msg)| anyhow!("field {field}: {msg}"))?;
    let m = vlf(cfg)?;
    let p = m.p_eval(&r)?;
    println!("{} {}", p, ddec(&p));
    let mut t = Table::new(&["lo", "hi", "cyl", "p", "p_decimal"]);
    t.push(vec![
        r.interval.lo().to_string(),
        r.interval.hi().to_string(),
        r.cyl.to_string(),
        p.to_string(),
        ddec(&p),
    ]);
    t.emit(csv, false)?;
    Ok(Outcome::Pass)
}

pub fn eval_phat(
    cfg: &LabConfig,
    index: u64,
    beta: &BetaSource,
    eps: &Dyadic,
    csv: Option<&Path>,
) -> Result<Outcome> {
    let mu = ce_measure(cfg);
    let src = beta_source(beta, &mu, cfg.experiment.seed, SAMPLED_MAX_DEPTH)?;
    let rep = ce_conditional(&mu, index, src.as_ref(), &eps.to_rational())?;
    let v = &rep.value;
    println!("index {index}, beta {}", rep.source);
    println!("lower {} {}", v.lower, dec(&v.lower));
    println!("upper {} {}", v.upper, dec(&v.upper));
    println!("width {} (eps {eps})", dec(&v.width()));
    println!("depth {}, truncation {}", rep.depth, rep.truncation);
    let limit = match beta {
        BetaSource::Explicit {
            bits,
            tail: Some(tail),
        } => {
            let l = mu.conditional_limit(
                index,
                &condmeasure::EventuallyConstant::new(bits.clone(), *tail),
            );
            println!("exact limit {} {}", l, dec(&l));
            Some(l)
        }
        _ => None,
    };
    let mut t = Table::new(&[
        "index",
        "lower",
        "upper",
        "lower_decimal",
        "upper_decimal",
        "depth",
        "limit",
    ]);
    t.push(vec![
        index.to_string(),
        v.lower.to_string(),
        v.upper.to_string(),
        dec(&v.lower),
        dec(&v.upper),
        rep.depth.to_string(),
        limit.map(|l| l.to_string()).unwrap_or_default(),
    ]);
    t.emit(csv, false)?;
    Ok(Outcome::Pass)
}

pub struct ConvergeArgs {
    pub ce: bool,
    pub prefix: BitString,
    pub tail: Option<bool>,
    pub interval: DyadicInterval,
    pub index: u64,
    pub depths: Vec<usize>,
}

pub fn converge(cfg: &LabConfig, a: &ConvergeArgs, csv: Option<&Path>) -> Result<Outcome> {
    if a.depths.windows(2).any(|w| w[0] >= w[1]) {
        bail!("depths must be strictly increasing");
    }
    let table = if a.ce {
        converge_ce(cfg, a)?
    } else {
        converge_vlf(cfg, a)?
    };
    table.emit(csv, true)?;
    Ok(Outcome::Pass)
}

/// Without a tail the conditioning cylinder is the prefix itself and depth
/// `d` sums over its `2^d` refinements; with a tail, depth `d` conditions on
/// the first `d` bits of the prefix followed by that tail.
fn converge_vlf(cfg: &LabConfig, a: &ConvergeArgs) -> Result<Table> {
    let m = vlf(cfg)?;
    let mut t = Table::new(&[
        "depth",
        "prefix",
        "ratio",
        "predicted",
        "ratio_decimal",
        "predicted_decimal",
        "exact",
    ]);
    for &d in &a.depths {
        let (prefix, joint, marginal) = match a.tail {
            None => {
                let mut joint = Dyadic::zero();
                let mut marginal = Dyadic::zero();
                for z in a.prefix.extensions(d) {
                    joint = joint + m.p_eval(&Rect::new(a.interval.clone(), z.clone()))?;
                    marginal = marginal + m.marginal(&z)?;
                }
                (a.prefix.clone(), joint, marginal)
            }
            Some(tail) => {
                let src = ExplicitPrefix::new(a.prefix.clone(), Some(tail));
                let p = src.prefix(d).expect("tailed source is infinite");
                let joint = m.p_eval(&Rect::new(a.interval.clone(), p.clone()))?;
                let marginal = m.marginal(&p)?;
                (p, joint, marginal)
            }
        };
        let predicted = m.predicted_limit(&a.interval, prefix.len())?;
        if marginal.is_zero() {
            let e = VlfError::ZeroMarginal(prefix.clone());
            t.push(vec![
                d.to_string(),
                prefix.to_string(),
                "zero-marginal".into(),
                predicted.to_string(),
                String::new(),
                dec(&predicted),
                e.to_string(),
            ]);
            continue;
        }
        let ratio = joint.to_rational() / marginal.to_rational();
        t.push(vec![
            d.to_string(),
            prefix.to_string(),
            ratio.to_string(),
            predicted.to_string(),
            dec(&ratio),
            dec(&predicted),
            (ratio == predicted).to_string(),
        ]);
    }
    Ok(t)
}

fn converge_ce(cfg: &LabConfig, a: &ConvergeArgs) -> Result<Table> {
    let mu = ce_measure(cfg);
    let beta = BetaSource::Explicit {
        bits: a.prefix.clone(),
        tail: a.tail,
    };
    let src = beta_source(&beta, &mu, cfg.experiment.seed, SAMPLED_MAX_DEPTH)?;
    let limit = a.tail.map(|tail| {
        mu.conditional_limit(
            a.index,
            &condmeasure::EventuallyConstant::new(a.prefix.clone(), tail),
        )
    });
    let mut t = Table::new(&[
        "depth",
        "lower",
        "upper",
        "width",
        "lower_decimal",
        "upper_decimal",
        "width_decimal",
        "limit",
        "contains_limit",
    ]);
    for &d in &a.depths {
        let rep = certify_at_depth(&mu, a.index, src.as_ref(), d)?;
        let v = rep.value;
        let w = v.width();
        t.push(vec![
            d.to_string(),
            v.lower.to_string(),
            v.upper.to_string(),
            w.to_string(),
            dec(&v.lower),
            dec(&v.upper),
            dec(&w),
            limit.as_ref().map(|l| l.to_string()).unwrap_or_default(),
            limit
                .as_ref()
                .map(|l| v.contains(l).to_string())
                .unwrap_or_default(),
        ]);
    }
    Ok(t)
}

pub fn trim_demo(
    cfg: &LabConfig,
    level: Option<&Path>,
    probes: Option<Vec<Dyadic>>,
    csv: Option<&Path>,
) -> Result<Outcome> {
    let text = match level {
        Some(p) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => DEMO_LEVEL.to_string(),
    };
    let rects = parse_rects(&text)?;
    let m = vlf(cfg)?;
    let probes = match probes {
        Some(p) => p,
        None => m.alphas().terms(16)?,
    };
    let v = TestLevel::new(1, rects);
    let u = trim_level(&m, &v)?;
    let report = verify_conditions(&m, &v, &u, &probes)?;
    let mut t = Table::new(&[
        "position",
        "original",
        "trimmed",
        "p_original",
        "mu_trimmed",
        "p_removed",
        "untouched",
        "ok",
    ]);
    for rc in &report.rects {
        let orig = show_rect(&rc.original);
        let trimmed = rc
            .trimmed
            .as_ref()
            .map(show_rect)
            .unwrap_or_else(|| "dropped".into());
        let ok = if rc.passed() { "ok" } else { "FAIL" };
        println!(
            "rect {:>2}: {orig} -> {trimmed}  P={} mu={} removed={} {ok}",
            rc.position, rc.p_original, rc.mu_trimmed, rc.p_removed
        );
        t.push(vec![
            rc.position.to_string(),
            orig,
            trimmed,
            rc.p_original.to_string(),
            rc.mu_trimmed.to_string(),
            rc.p_removed.to_string(),
            rc.untouched.to_string(),
            rc.passed().to_string(),
        ]);
    }
    let agree = report
        .probes
        .iter()
        .filter(|p| matches!(p.outcome, ProbeOutcome::Agree { .. }))
        .count();
    println!(
        "aggregate: mu(U) = {} <= P(V) = {} {}",
        report.mu_u,
        report.p_v,
        if report.aggregate_ok() { "ok" } else { "FAIL" }
    );
    println!(
        "probes: {agree} agree, {} left of breakpoint, {} disagree",
        report.skipped_probes(),
        report.probes.len() - agree - report.skipped_probes()
    );
    if !report.correspondence_ok {
        println!("trimmed level does not match the original rect by rect");
    }
    let ok = report.all_passed();
    println!(
        "{}",
        if ok {
            "ALL CHECKS PASS"
        } else {
            "CHECKS FAILED"
        }
    );
    t.emit(csv, false)?;
    Ok(Outcome::from_bool(ok))
}

fn show_rect(r: &Rect) -> String {
    let cyl = if r.cyl.is_empty() {
        "-".to_string()
    } else {
        r.cyl.to_string()
    };
    format!("[{}, {}) x {}", r.interval.lo(), r.interval.hi(), cyl)
}

pub fn decode(cfg: &LabConfig, batch: Option<usize>, csv: Option<&Path>) -> Result<Outcome> {
    if !cfg.paired {
        bail!("decode needs [ce] scheme = \"paired\"");
    }
    let mut t = Table::new(&["instance", "n", "decoded", "truth", "queries", "status"]);
    let seed = cfg.experiment.seed;
    let mut mismatches = 0usize;
    let mut rows = 0usize;
    let instances: Vec<CeInstance> = match batch {
        None => vec![cfg.ce.clone()],
        Some(count) => {
            let e = &cfg.experiment;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    CeInstance::random(
                        &mut rng,
                        e.batch_max_members,
                        e.batch_max_time,
                        0,
                        e.batch_horizon,
                    )
                })
                .collect()
        }
    };
    for (i, inst) in instances.iter().enumerate() {
        let mu = CeMeasure::new(inst.clone(), cfg.paired);
        let src = beta_source(
            &cfg.experiment.beta,
            &mu,
            seed.wrapping_add(i as u64),
            SAMPLED_MAX_DEPTH,
        )?;
        let oracle = CeOracle::new(&mu, src.as_ref());
        for n in 0..=inst.horizon() {
            let before = oracle.queries();
            let truth = inst.is_member(n);
            let (decoded, status) = match decode_membership(&mu, n, &oracle, inst.nonmember()) {
                Ok(d) => (
                    Some(d.member),
                    if d.member == truth {
                        "ok".to_string()
                    } else {
                        "mismatch".into()
                    },
                ),
                Err(e) => (None, e.to_string()),
            };
            if decoded != Some(truth) {
                mismatches += 1;
            }
            rows += 1;
            let used = oracle.queries() - before;
            if batch.is_none() {
                println!(
                    "n={n:>3} decoded={:<8} truth={:<8} queries={used:>3} {status}",
                    decoded.map(member_word).unwrap_or("error"),
                    member_word(truth)
                );
            }
            t.push(vec![
                i.to_string(),
                n.to_string(),
                decoded.map(|b| b.to_string()).unwrap_or_default(),
                truth.to_string(),
                used.to_string(),
                status,
            ]);
        }
    }
    println!(
        "decoded {rows} indices over {} instance(s): {mismatches} mismatches",
        instances.len()
    );
    t.emit(csv, false)?;
    Ok(Outcome::from_bool(mismatches == 0))
}

fn member_word(b: bool) -> &'static str {
    if b {
        "member"
    } else {
        "absent"
    }
}

pub fn sample(cfg: &LabConfig, depth: usize, count: usize, csv: Option<&Path>) -> Result<Outcome> {
    let mu = ce_measure(cfg);
    let mut t = Table::new(&["seed", "prefix", "probability", "probability_decimal"]);
    for i in 0..count as u64 {
        let seed = cfg.experiment.seed.wrapping_add(i);
        let x = sample_marginal(&mu, seed, depth);
        let p = mu.marginal(&x) * mu.normalization();
        println!("{seed} {x} {p}");
        t.push(vec![
            seed.to_string(),
            x.to_string(),
            p.to_string(),
            ddec(&p),
        ]);
    }
    t.emit(csv, false)?;
    Ok(Outcome::Pass)
}

pub fn selftest(cfg: &LabConfig, csv: Option<&Path>) -> Result<Outcome> {
    let st = SelftestConfig {
        alpha: cfg.alpha.clone(),
        instance: cfg.ce.clone(),
        paired: cfg.paired,
        seed: cfg.experiment.seed,
        trials: cfg.experiment.trials,
        max_depth: cfg.experiment.max_depth,
    };
    let results = run_all(&st);
    let mut t = Table::new(&["suite", "status", "checks", "failures", "first_failure"]);
    for r in &results {
        println!("{r}");
        t.push(vec![
            r.name.to_string(),
            if r.passed() { "pass" } else { "fail" }.to_string(),
            r.checks.to_string(),
            r.failures.len().to_string(),
            r.failures.first().cloned().unwrap_or_default(),
        ]);
    }
    let passed = results.iter().filter(|r| r.passed()).count();
    let ok = passed == results.len();
    println!(
        "selftest: {} ({passed}/{} suites)",
        if ok { "pass" } else { "fail" },
        results.len()
    );
    t.emit(csv, false)?;
    Ok(Outcome::from_bool(ok))
}
