//! Trimming a test for `P` into a test for the uniform measure.
//!
//! Each enumerated rectangle `[r,s) x [x]` keeps only its part right of
//! `α_{|x|}`. There `P` agrees with the uniform measure, so the trimmed
//! rectangle has uniform mass at most the `P`-mass of the original, and
//! vertical slices at `γ >= α_{|x|}` are unchanged.

use std::fmt;

use thiserror::Error;

use crate::alpha::AlphaSequence;
use crate::dyadic::{uniform_measure, BitString, Dyadic, DyadicInterval, Rect};
use crate::vlf::{VlfError, VlfMeasure};

/// One level `V_n` of a test, as an enumerated list of rectangles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestLevel {
    pub index: u32,
    pub rects: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrimmedLevel {
    pub index: u32,
    pub rects: Vec<Rect>,
}

impl TestLevel {
    pub fn new(index: u32, rects: Vec<Rect>) -> Self {
        TestLevel { index, rects }
    }

    /// Intended bound `2^-index` on the `P`-mass.
    pub fn budget(&self) -> Dyadic {
        Dyadic::pow2_neg(self.index)
    }

    /// Sum of rectangle masses (an upper bound on the mass of the union).
    pub fn p_mass(&self, m: &VlfMeasure) -> Result<Dyadic, VlfError> {
        self.rects
            .iter()
            .try_fold(Dyadic::zero(), |acc, r| Ok(acc + m.p_eval(r)?))
    }
}

impl TrimmedLevel {
    pub fn as_test_level(&self) -> TestLevel {
        TestLevel::new(self.index, self.rects.clone())
    }

    pub fn uniform_mass(&self) -> Dyadic {
        self.rects.iter().map(uniform_measure).sum()
    }
}

/// `[max(lo, α_{|cyl|}), hi) x cyl`, or `None` when `hi <= α_{|cyl|}`.
pub fn trim_rect(alphas: &AlphaSequence, r: &Rect) -> Result<Option<Rect>, VlfError> {
    let cut = alphas.alpha(r.cyl.len())?;
    let (_, right) = r.interval.split(&cut);
    Ok(right.map(|i| Rect::new(i, r.cyl.clone())))
}

pub fn trim_level(m: &VlfMeasure, v: &TestLevel) -> Result<TrimmedLevel, VlfError> {
    let mut rects = Vec::with_capacity(v.rects.len());
    for r in &v.rects {
        if let Some(t) = trim_rect(m.alphas(), r)? {
            rects.push(t);
        }
    }
    Ok(TrimmedLevel {
        index: v.index,
        rects,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RectCheck {
    pub position: usize,
    pub original: Rect,
    pub trimmed: Option<Rect>,
    pub p_original: Dyadic,
    pub p_trimmed: Dyadic,
    pub mu_trimmed: Dyadic,
    /// `P` of the discarded part left of the breakpoint.
    pub p_removed: Dyadic,
    pub untouched: bool,
}

impl RectCheck {
    /// `μ(trim) = P(trim) <= P(orig)`, equality when untouched, and the gap is
    /// exactly the mass of the discarded part.
    pub fn passed(&self) -> bool {
        self.mu_trimmed == self.p_trimmed
            && self.p_trimmed <= self.p_original
            && (!self.untouched || self.mu_trimmed == self.p_original)
            && &self.p_original - &self.mu_trimmed == self.p_removed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeOutcome {
    Agree {
        member: bool,
    },
    Disagree {
        in_v: bool,
        in_u: bool,
    },
    /// `γ < α_{|cyl|}`: the slice is not claimed to be preserved.
    LeftOfBreakpoint {
        breakpoint: Dyadic,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeCheck {
    pub probe: Dyadic,
    pub position: usize,
    pub cyl: BitString,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub rects: Vec<RectCheck>,
    /// `u` is exactly the rect-by-rect trimming of `v`, in order.
    pub correspondence_ok: bool,
    pub mu_u: Dyadic,
    pub p_v: Dyadic,
    pub probes: Vec<ProbeCheck>,
}

impl VerificationReport {
    pub fn aggregate_ok(&self) -> bool {
        self.mu_u <= self.p_v
    }

    pub fn probes_ok(&self) -> bool {
        !self
            .probes
            .iter()
            .any(|p| matches!(p.outcome, ProbeOutcome::Disagree { .. }))
    }

    pub fn skipped_probes(&self) -> usize {
        self.probes
            .iter()
            .filter(|p| matches!(p.outcome, ProbeOutcome::LeftOfBreakpoint { .. }))
            .count()
    }

    pub fn all_passed(&self) -> bool {
        self.correspondence_ok
            && self.rects.iter().all(RectCheck::passed)
            && self.aggregate_ok()
            && self.probes_ok()
    }
}

pub fn verify_conditions(
    m: &VlfMeasure,
    v: &TestLevel,
    u: &TrimmedLevel,
    probes: &[Dyadic],
) -> Result<VerificationReport, VlfError> {
    let mut rects = Vec::with_capacity(v.rects.len());
    let mut probe_checks = Vec::new();
    let mut next_u = 0usize;
    let mut correspondence_ok = true;
    for (position, r) in v.rects.iter().enumerate() {
        let cut = m.alphas().alpha(r.cyl.len())?;
        let trimmed = trim_rect(m.alphas(), r)?;
        if let Some(t) = &trimmed {
            if u.rects.get(next_u) != Some(t) {
                correspondence_ok = false;
            }
            next_u += 1;
        }
        let removed = r.interval.split(&cut).0;
        let p_removed = match removed {
            Some(i) => m.p_eval(&Rect::new(i, r.cyl.clone()))?,
            None => Dyadic::zero(),
        };
        let (p_trimmed, mu_trimmed) = match &trimmed {
            Some(t) => (m.p_eval(t)?, uniform_measure(t)),
            None => (Dyadic::zero(), Dyadic::zero()),
        };
        rects.push(RectCheck {
            position,
            original: r.clone(),
            untouched: trimmed.as_ref() == Some(r),
            trimmed: trimmed.clone(),
            p_original: m.p_eval(r)?,
            p_trimmed,
            mu_trimmed,
            p_removed,
        });
        for g in probes {
            let outcome = if *g < cut {
                ProbeOutcome::LeftOfBreakpoint {
                    breakpoint: cut.clone(),
                }
            } else {
                let in_v = r.interval.contains(g);
                let in_u = trimmed.as_ref().is_some_and(|t| t.interval.contains(g));
                if in_v == in_u {
                    ProbeOutcome::Agree { member: in_v }
                } else {
                    ProbeOutcome::Disagree { in_v, in_u }
                }
            };
            probe_checks.push(ProbeCheck {
                probe: g.clone(),
                position,
                cyl: r.cyl.clone(),
                outcome,
            });
        }
    }
    if next_u != u.rects.len() {
        correspondence_ok = false;
    }
    Ok(VerificationReport {
        rects,
        correspondence_ok,
        mu_u: u.uniform_mass(),
        p_v: v.p_mass(m)?,
        probes: probe_checks,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, field {field}: {message}")]
pub struct LevelParseError {
    pub line: usize,
    pub field: usize,
    pub message: String,
}

/// Parses one rectangle per line, `lo hi cyl`. The cylinder may be omitted
/// or written `-` when empty; `#` starts a comment.
pub fn parse_rects(text: &str) -> Result<Vec<Rect>, LevelParseError> {
    let mut rects = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        rects.push(
            parse_rect_line(content).map_err(|(field, message)| LevelParseError {
                line,
                field,
                message,
            })?,
        );
    }
    Ok(rects)
}

/// Parses `lo hi [cyl]`; on failure returns the 1-based field and a message.
pub fn parse_rect_line(content: &str) -> Result<Rect, (usize, String)> {
    let fields: Vec<&str> = content.split_whitespace().collect();
    if fields.len() < 2 || fields.len() > 3 {
        return Err((
            fields.len().min(3) + 1,
            format!("expected `lo hi [cyl]`, found {} fields", fields.len()),
        ));
    }
    let lo: Dyadic = fields[0].parse().map_err(|e| (1, format!("{e}")))?;
    let hi: Dyadic = fields[1].parse().map_err(|e| (2, format!("{e}")))?;
    if lo.is_negative() || hi > Dyadic::one() {
        return Err((1, format!("interval [{lo}, {hi}) not inside [0,1]")));
    }
    let interval = DyadicInterval::new(lo, hi).map_err(|e| (2, e.to_string()))?;
    let cyl = match fields.get(2) {
        None | Some(&"-") => BitString::empty(),
        Some(s) => s.parse().map_err(|e| (3, format!("{e}")))?,
    };
    Ok(Rect::new(interval, cyl))
}

/// Inverse of [`parse_rects`].
pub fn dump_rects(rects: &[Rect]) -> String {
    let mut out = String::new();
    for r in rects {
        out.push_str(&format!("{}\n", RectLine(r)));
    }
    out
}

struct RectLine<'a>(&'a Rect);

impl fmt::Display for RectLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        let cyl = if r.cyl.is_empty() {
            "-".to_string()
        } else {
            r.cyl.to_string()
        };
        write!(f, "{} {} {}", r.interval.lo(), r.interval.hi(), cyl)
    }
}
