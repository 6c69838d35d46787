//! Learning-rate policies as pure functions of the training iteration.
//!
//! Decaying policies evaluate to `k * g(t)`; cyclic policies evaluate to
//! `|k0 - k1| * g(t) + min(k0, k1)` where `g` is a triangle, sine or cosine
//! wave of half-period `l`, optionally damped by a halving or exponential
//! envelope. A composite policy dispatches to one of its segments and runs
//! the inner policy on a segment-local clock.

mod codec;
mod series;

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

pub use codec::{parse_policy, policy_from_value, policy_to_value, serialize_policy, PolicyParseError};
pub use series::{schedule_series, ScheduleSeries};

/// Wave family and envelope of a cyclic policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CyclicKind {
    Tri,
    Tri2,
    TriExp,
    Sin,
    Sin2,
    SinExp,
    Cos,
    Cos2,
    CosExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wave {
    Triangle,
    Sine,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    /// Undamped.
    Flat,
    /// Amplitude halves every full cycle of `2l` iterations.
    Halving,
    /// Amplitude multiplied by `gamma^t`.
    Exponential,
}

impl CyclicKind {
    pub const ALL: [CyclicKind; 9] = [
        CyclicKind::Tri,
        CyclicKind::Tri2,
        CyclicKind::TriExp,
        CyclicKind::Sin,
        CyclicKind::Sin2,
        CyclicKind::SinExp,
        CyclicKind::Cos,
        CyclicKind::Cos2,
        CyclicKind::CosExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CyclicKind::Tri => "TRI",
            CyclicKind::Tri2 => "TRI2",
            CyclicKind::TriExp => "TRIEXP",
            CyclicKind::Sin => "SIN",
            CyclicKind::Sin2 => "SIN2",
            CyclicKind::SinExp => "SINEXP",
            CyclicKind::Cos => "COS",
            CyclicKind::Cos2 => "COS2",
            CyclicKind::CosExp => "COSEXP",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        CyclicKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn wave(self) -> Wave {
        match self {
            CyclicKind::Tri | CyclicKind::Tri2 | CyclicKind::TriExp => Wave::Triangle,
            CyclicKind::Sin | CyclicKind::Sin2 | CyclicKind::SinExp => Wave::Sine,
            CyclicKind::Cos | CyclicKind::Cos2 | CyclicKind::CosExp => Wave::Cosine,
        }
    }

    pub fn envelope(self) -> Envelope {
        match self {
            CyclicKind::Tri | CyclicKind::Sin | CyclicKind::Cos => Envelope::Flat,
            CyclicKind::Tri2 | CyclicKind::Sin2 | CyclicKind::Cos2 => Envelope::Halving,
            CyclicKind::TriExp | CyclicKind::SinExp | CyclicKind::CosExp => Envelope::Exponential,
        }
    }

    /// `*EXP` kinds carry a decay factor; the others must not.
    pub fn needs_gamma(self) -> bool {
        self.envelope() == Envelope::Exponential
    }
}

impl fmt::Display for CyclicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl serde::Serialize for CyclicKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for CyclicKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        CyclicKind::from_name(&name).ok_or_else(|| serde::de::Error::custom(format!("unknown cyclic kind {name:?}")))
    }
}

/// A concrete learning-rate policy.
#[derive(Debug, Clone, PartialEq)]
pub enum LrPolicy {
    Fix {
        k: f64,
    },
    Step {
        k: f64,
        gamma: f64,
        l: u64,
    },
    NStep {
        k: f64,
        gamma: f64,
        boundaries: Vec<u64>,
    },
    Exp {
        k: f64,
        gamma: f64,
    },
    Inv {
        k: f64,
        gamma: f64,
        p: f64,
    },
    /// `max_iter = None` binds to the budget of whatever evaluates it.
    Poly {
        k: f64,
        p: f64,
        max_iter: Option<u64>,
    },
    Cyclic {
        kind: CyclicKind,
        k0: f64,
        k1: f64,
        l: u64,
        gamma: Option<f64>,
    },
    Composite {
        segments: Vec<Segment>,
    },
}

/// One stage of a composite policy, covering `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: u64,
    pub end: u64,
    pub policy: LrPolicy,
}

impl Segment {
    pub fn new(start: u64, end: u64, policy: LrPolicy) -> Self {
        Segment { start, end, policy }
    }

    pub fn span(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }
}

/// An invariant violation found by [`validate_policy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Location inside the policy, e.g. `segments[1].k0`.
    pub path: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.reason)
        } else {
            write!(f, "{}: {}", self.path, self.reason)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("iteration {t} is outside the budget of {total_iters} iterations")]
    IterationOutOfRange { t: u64, total_iters: u64 },
    #[error("POLY evaluated at t={t}, past max_iter={max_iter}")]
    PastMaxIter { t: u64, max_iter: u64 },
    #[error("iteration {t} is not covered by any composite segment")]
    NotCovered { t: u64 },
    #[error("series stride must be at least 1")]
    ZeroStride,
    #[error("invalid policy: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl LrPolicy {
    pub fn fix(k: f64) -> Self {
        LrPolicy::Fix { k }
    }

    pub fn cyclic(kind: CyclicKind, k0: f64, k1: f64, l: u64) -> Self {
        LrPolicy::Cyclic {
            kind,
            k0,
            k1,
            l,
            gamma: None,
        }
    }

    pub fn cyclic_exp(kind: CyclicKind, k0: f64, k1: f64, l: u64, gamma: f64) -> Self {
        LrPolicy::Cyclic {
            kind,
            k0,
            k1,
            l,
            gamma: Some(gamma),
        }
    }

    /// Type tag as used in policy documents.
    pub fn type_name(&self) -> &'static str {
        match self {
            LrPolicy::Fix { .. } => "FIX",
            LrPolicy::Step { .. } => "STEP",
            LrPolicy::NStep { .. } => "NSTEP",
            LrPolicy::Exp { .. } => "EXP",
            LrPolicy::Inv { .. } => "INV",
            LrPolicy::Poly { .. } => "POLY",
            LrPolicy::Cyclic { kind, .. } => kind.name(),
            LrPolicy::Composite { .. } => "COMPOSITE",
        }
    }

    pub fn family(&self) -> PolicyFamily {
        match self {
            LrPolicy::Fix { .. } => PolicyFamily::Fixed,
            LrPolicy::Step { .. }
            | LrPolicy::NStep { .. }
            | LrPolicy::Exp { .. }
            | LrPolicy::Inv { .. }
            | LrPolicy::Poly { .. } => PolicyFamily::Decaying,
            LrPolicy::Cyclic { .. } => PolicyFamily::Cyclic,
            LrPolicy::Composite { .. } => PolicyFamily::Composite,
        }
    }

    /// Validate against a budget and evaluate.
    pub fn validated(&self, total_iters: u64) -> Result<&Self, ScheduleError> {
        let violations = validate_policy(self, total_iters);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ScheduleError::Invalid(violations))
        }
    }

    pub fn eval(&self, t: u64, total_iters: u64) -> Result<f64, ScheduleError> {
        eval_lr(self, t, total_iters)
    }
}

impl fmt::Display for LrPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_policy(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyFamily {
    Fixed,
    Decaying,
    Cyclic,
    Composite,
}

/// Checks every invariant of `policy` for a run of `total_iters` iterations.
/// Returns all violations; an empty list means the policy is valid.
pub fn validate_policy(policy: &LrPolicy, total_iters: u64) -> Vec<Violation> {
    let mut out = Vec::new();
    if total_iters == 0 {
        out.push(Violation {
            path: String::new(),
            reason: "total_iters must be at least 1".into(),
        });
        return out;
    }
    validate_into(policy, total_iters, "", true, &mut out);
    out
}

fn field(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn check_rate(out: &mut Vec<Violation>, prefix: &str, name: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        out.push(Violation {
            path: field(prefix, name),
            reason: format!("must be a finite positive rate, got {v}"),
        });
    }
}

fn check_unit_gamma(out: &mut Vec<Violation>, prefix: &str, gamma: f64) {
    if !(gamma > 0.0 && gamma < 1.0) {
        out.push(Violation {
            path: field(prefix, "gamma"),
            reason: format!("must lie in (0,1), got {gamma}"),
        });
    }
}

fn check_positive(out: &mut Vec<Violation>, prefix: &str, name: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        out.push(Violation {
            path: field(prefix, name),
            reason: format!("must be a finite positive number, got {v}"),
        });
    }
}

fn check_len(out: &mut Vec<Violation>, prefix: &str, name: &str, l: u64) {
    if l == 0 {
        out.push(Violation {
            path: field(prefix, name),
            reason: "must be at least 1".into(),
        });
    }
}

fn validate_into(policy: &LrPolicy, span: u64, prefix: &str, top: bool, out: &mut Vec<Violation>) {
    match policy {
        LrPolicy::Fix { k } => check_rate(out, prefix, "k", *k),
        LrPolicy::Step { k, gamma, l } => {
            check_rate(out, prefix, "k", *k);
            check_unit_gamma(out, prefix, *gamma);
            check_len(out, prefix, "l", *l);
        }
        LrPolicy::NStep { k, gamma, boundaries } => {
            check_rate(out, prefix, "k", *k);
            check_unit_gamma(out, prefix, *gamma);
            if boundaries.first() == Some(&0) {
                out.push(Violation {
                    path: field(prefix, "boundaries"),
                    reason: "boundaries must be positive".into(),
                });
            }
            if boundaries.windows(2).any(|w| w[0] >= w[1]) {
                out.push(Violation {
                    path: field(prefix, "boundaries"),
                    reason: "boundaries must be strictly increasing".into(),
                });
            }
        }
        LrPolicy::Exp { k, gamma } => {
            check_rate(out, prefix, "k", *k);
            check_unit_gamma(out, prefix, *gamma);
        }
        LrPolicy::Inv { k, gamma, p } => {
            check_rate(out, prefix, "k", *k);
            check_positive(out, prefix, "gamma", *gamma);
            check_positive(out, prefix, "p", *p);
        }
        LrPolicy::Poly { k, p, max_iter } => {
            check_rate(out, prefix, "k", *k);
            check_positive(out, prefix, "p", *p);
            if let Some(m) = max_iter {
                if *m == 0 {
                    out.push(Violation {
                        path: field(prefix, "max_iter"),
                        reason: "must be at least 1".into(),
                    });
                } else if *m < span {
                    out.push(Violation {
                        path: field(prefix, "max_iter"),
                        reason: format!("max_iter={m} is shorter than the {span} iterations it must cover"),
                    });
                }
            }
        }
        LrPolicy::Cyclic { kind, k0, k1, l, gamma } => {
            check_rate(out, prefix, "k0", *k0);
            check_rate(out, prefix, "k1", *k1);
            check_len(out, prefix, "l", *l);
            match (kind.needs_gamma(), gamma) {
                (true, Some(g)) => check_unit_gamma(out, prefix, *g),
                (true, None) => out.push(Violation {
                    path: field(prefix, "gamma"),
                    reason: format!("{kind} requires gamma"),
                }),
                (false, Some(_)) => out.push(Violation {
                    path: field(prefix, "gamma"),
                    reason: format!("{kind} does not take gamma"),
                }),
                (false, None) => {}
            }
        }
        LrPolicy::Composite { segments } => {
            if !top {
                out.push(Violation {
                    path: prefix.to_string(),
                    reason: "composite policies cannot be nested".into(),
                });
                return;
            }
            validate_segments(segments, span, out);
        }
    }
}

fn validate_segments(segments: &[Segment], total_iters: u64, out: &mut Vec<Violation>) {
    if segments.is_empty() {
        out.push(Violation {
            path: "segments".into(),
            reason: "composite needs at least one segment".into(),
        });
        return;
    }
    if segments[0].start != 0 {
        out.push(Violation {
            path: "segments[0].start".into(),
            reason: format!("first segment must start at 0, got {}", segments[0].start),
        });
    }
    for (i, seg) in segments.iter().enumerate() {
        let path = format!("segments[{i}]");
        if seg.end <= seg.start {
            out.push(Violation {
                path: path.clone(),
                reason: format!("empty or reversed range [{}, {})", seg.start, seg.end),
            });
        }
        if let Some(next) = segments.get(i + 1) {
            if next.start != seg.end {
                let what = if next.start > seg.end { "gap" } else { "overlap" };
                out.push(Violation {
                    path: format!("segments[{}]", i + 1),
                    reason: format!("{what} between {} and {}", seg.end, next.start),
                });
            }
        }
        // Inner policies only ever see the part of their segment inside the budget.
        let span = seg.end.min(total_iters).saturating_sub(seg.start).max(1);
        validate_into(&seg.policy, span, &format!("{path}.policy"), false, out);
    }
    let covered = segments.last().map(|s| s.end).unwrap_or(0);
    if covered < total_iters {
        out.push(Violation {
            path: "segments".into(),
            reason: format!("segments do not cover [0,{total_iters}): coverage ends at {covered}"),
        });
    }
}

/// `base^n` for a possibly huge non-negative integer exponent.
fn powu(base: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(n) => base.powi(n),
        Err(_) => base.powf(n as f64),
    }
}

/// Undamped wave value in `[0, 1]` at iteration `t` for half-period `l`.
pub(crate) fn wave_value(wave: Wave, t: u64, l: u64) -> f64 {
    let period = l.saturating_mul(2);
    let phase = t % period;
    let lf = l as f64;
    match wave {
        // Piecewise-linear form of (2/pi)|asin(sin(pi t / 2l))|, exact at integer t.
        Wave::Triangle => {
            if phase <= l {
                phase as f64 / lf
            } else {
                (period - phase) as f64 / lf
            }
        }
        Wave::Sine => (PI * phase as f64 / (2.0 * lf)).sin().abs(),
        Wave::Cosine => 0.5 * (1.0 + (PI * phase as f64 / lf).cos()),
    }
}

fn envelope_value(envelope: Envelope, t: u64, l: u64, gamma: Option<f64>) -> f64 {
    match envelope {
        Envelope::Flat => 1.0,
        Envelope::Halving => {
            let cycles = t / l.saturating_mul(2);
            if cycles > 1100 {
                0.0
            } else {
                powu(0.5, cycles)
            }
        }
        Envelope::Exponential => gamma.unwrap_or(1.0).powf(t as f64),
    }
}

/// Learning rate of `policy` at iteration `t` of a run lasting `total_iters`.
///
/// The policy is assumed valid for `total_iters` (see [`validate_policy`]).
pub fn eval_lr(policy: &LrPolicy, t: u64, total_iters: u64) -> Result<f64, ScheduleError> {
    if t >= total_iters {
        return Err(ScheduleError::IterationOutOfRange { t, total_iters });
    }
    let lr = match policy {
        LrPolicy::Fix { k } => *k,
        LrPolicy::Step { k, gamma, l } => k * powu(*gamma, t / (*l).max(1)),
        LrPolicy::NStep { k, gamma, boundaries } => {
            let passed = boundaries.partition_point(|&b| b <= t);
            k * powu(*gamma, passed as u64)
        }
        LrPolicy::Exp { k, gamma } => k * gamma.powf(t as f64),
        LrPolicy::Inv { k, gamma, p } => k * (1.0 + t as f64 * gamma).powf(-p),
        LrPolicy::Poly { k, p, max_iter } => {
            let max_iter = max_iter.unwrap_or(total_iters);
            if t > max_iter {
                return Err(ScheduleError::PastMaxIter { t, max_iter });
            }
            k * (1.0 - t as f64 / max_iter as f64).powf(*p)
        }
        LrPolicy::Cyclic { kind, k0, k1, l, gamma } => {
            let l = (*l).max(1);
            let g = wave_value(kind.wave(), t, l) * envelope_value(kind.envelope(), t, l, *gamma);
            (k0 - k1).abs() * g + k0.min(*k1)
        }
        LrPolicy::Composite { segments } => {
            let seg = segments
                .iter()
                .find(|s| s.start <= t && t < s.end)
                .ok_or(ScheduleError::NotCovered { t })?;
            return eval_lr(&seg.policy, t - seg.start, seg.span());
        }
    };
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
    }

    fn tri(k0: f64, k1: f64, l: u64) -> LrPolicy {
        LrPolicy::cyclic(CyclicKind::Tri, k0, k1, l)
    }

    #[test]
    fn validate_examples() {
        assert!(validate_policy(&LrPolicy::fix(0.01), 10_000).is_empty());

        let v = validate_policy(&LrPolicy::Step { k: 0.01, gamma: 1.5, l: 5000 }, 10_000);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "gamma");

        let composite = LrPolicy::Composite {
            segments: vec![
                Segment::new(0, 60_000, tri(0.001, 0.005, 2000)),
                Segment::new(60_000, 65_000, LrPolicy::cyclic(CyclicKind::Tri2, 0.0001, 0.0005, 1000)),
            ],
        };
        let v = validate_policy(&composite, 70_000);
        assert_eq!(v.len(), 1);
        assert!(v[0].reason.contains("do not cover [0,70000)"), "{}", v[0]);
    }

    #[test]
    fn validate_reports_every_violation() {
        let p = LrPolicy::Cyclic {
            kind: CyclicKind::TriExp,
            k0: 0.0,
            k1: -1.0,
            l: 0,
            gamma: None,
        };
        let paths: Vec<_> = validate_policy(&p, 10).into_iter().map(|v| v.path).collect();
        assert_eq!(paths, ["k0", "k1", "l", "gamma"]);
    }

    #[test]
    fn validate_rejects_gamma_on_plain_cyclic() {
        let p = LrPolicy::Cyclic {
            kind: CyclicKind::Sin,
            k0: 0.01,
            k1: 0.06,
            l: 10,
            gamma: Some(0.9),
        };
        assert_eq!(validate_policy(&p, 100).len(), 1);
    }

    #[test]
    fn validate_composite_structure() {
        let nested = LrPolicy::Composite {
            segments: vec![Segment::new(
                0,
                10,
                LrPolicy::Composite {
                    segments: vec![Segment::new(0, 10, LrPolicy::fix(0.1))],
                },
            )],
        };
        let v = validate_policy(&nested, 10);
        assert!(v.iter().any(|v| v.reason.contains("nested")));

        let overlap = LrPolicy::Composite {
            segments: vec![
                Segment::new(0, 6, LrPolicy::fix(0.1)),
                Segment::new(5, 10, LrPolicy::fix(0.1)),
            ],
        };
        assert!(validate_policy(&overlap, 10).iter().any(|v| v.reason.contains("overlap")));

        let late = LrPolicy::Composite {
            segments: vec![Segment::new(1, 10, LrPolicy::fix(0.1))],
        };
        assert!(!validate_policy(&late, 10).is_empty());

        let empty = LrPolicy::Composite { segments: vec![] };
        assert!(!validate_policy(&empty, 10).is_empty());
    }

    #[test]
    fn validate_nstep_boundaries() {
        let p = LrPolicy::NStep {
            k: 0.1,
            gamma: 0.1,
            boundaries: vec![5, 5, 9],
        };
        assert_eq!(validate_policy(&p, 10).len(), 1);
    }

    #[test]
    fn validate_poly_max_iter() {
        let short = LrPolicy::Poly { k: 0.1, p: 1.0, max_iter: Some(5) };
        assert_eq!(validate_policy(&short, 10).len(), 1);
        let ok = LrPolicy::Poly { k: 0.1, p: 1.0, max_iter: Some(10) };
        assert!(validate_policy(&ok, 10).is_empty());
        assert!(!validate_policy(&LrPolicy::fix(0.1), 0).is_empty());
    }

    #[test]
    fn fix_is_constant() {
        assert_eq!(eval_lr(&LrPolicy::fix(0.01), 7777, 10_000).unwrap(), 0.01);
    }

    #[test]
    fn tri_hits_bounds() {
        let p = tri(0.01, 0.06, 2000);
        assert!(close(eval_lr(&p, 2000, 10_000).unwrap(), 0.06));
        assert!(close(eval_lr(&p, 0, 10_000).unwrap(), 0.01));
        assert!(close(eval_lr(&p, 4000, 10_000).unwrap(), 0.01));
    }

    #[test]
    fn step_decays_by_gamma_per_stage() {
        let p = LrPolicy::Step { k: 0.01, gamma: 0.85, l: 5000 };
        assert!(close(eval_lr(&p, 10_000, 10_001).unwrap(), 0.007225));
        assert!(close(eval_lr(&p, 4999, 10_001).unwrap(), 0.01));
    }

    #[test]
    fn nstep_boundaries_are_inclusive_on_the_left() {
        let p = LrPolicy::NStep {
            k: 0.001,
            gamma: 0.1,
            boundaries: vec![60_000, 65_000],
        };
        assert!(close(eval_lr(&p, 59_999, 70_000).unwrap(), 0.001));
        assert!(close(eval_lr(&p, 60_000, 70_000).unwrap(), 0.0001));
        assert!(close(eval_lr(&p, 65_000, 70_000).unwrap(), 0.00001));
    }

    #[test]
    fn cos_starts_high() {
        let p = LrPolicy::cyclic(CyclicKind::Cos, 0.01, 0.06, 2000);
        assert!(close(eval_lr(&p, 0, 10_000).unwrap(), 0.06));
        assert!(close(eval_lr(&p, 2000, 10_000).unwrap(), 0.01));
    }

    #[test]
    fn tri2_halves_after_first_cycle() {
        let p = LrPolicy::cyclic(CyclicKind::Tri2, 0.01, 0.06, 2000);
        assert!(close(eval_lr(&p, 6000, 10_000).unwrap(), 0.035));
    }

    #[test]
    fn exp_envelope_multiplies_by_gamma_to_t() {
        let p = LrPolicy::cyclic_exp(CyclicKind::CosExp, 0.0, 1.0, 10, 0.5);
        // k0 = 0 is invalid but the formula is still well defined; isolate g(t).
        assert!(close(eval_lr(&p, 2, 100).unwrap(), 0.25 * 0.5 * (1.0 + (PI * 0.2).cos())));
    }

    #[test]
    fn swapped_bounds_are_symmetric() {
        let a = tri(0.06, 0.01, 50);
        let b = tri(0.01, 0.06, 50);
        for t in 0..200 {
            assert_eq!(eval_lr(&a, t, 200).unwrap(), eval_lr(&b, t, 200).unwrap());
        }
    }

    #[test]
    fn eval_errors() {
        assert_eq!(
            eval_lr(&LrPolicy::fix(0.1), 10, 10),
            Err(ScheduleError::IterationOutOfRange { t: 10, total_iters: 10 })
        );
        let p = LrPolicy::Poly { k: 0.1, p: 1.0, max_iter: Some(5) };
        assert_eq!(eval_lr(&p, 6, 10), Err(ScheduleError::PastMaxIter { t: 6, max_iter: 5 }));
        let c = LrPolicy::Composite {
            segments: vec![Segment::new(0, 5, LrPolicy::fix(0.1))],
        };
        assert_eq!(eval_lr(&c, 7, 10), Err(ScheduleError::NotCovered { t: 7 }));
    }

    #[test]
    fn poly_defaults_to_budget() {
        let p = LrPolicy::Poly { k: 0.01, p: 1.2, max_iter: None };
        let expected = 0.01 * (1.0f64 - 5000.0 / 10_000.0).powf(1.2);
        assert!(close(eval_lr(&p, 5000, 10_000).unwrap(), expected));
    }

    #[test]
    fn composite_uses_segment_local_clock() {
        let c = LrPolicy::Composite {
            segments: vec![
                Segment::new(0, 30_000, tri(0.1, 0.5, 1500)),
                Segment::new(30_000, 60_000, tri(0.01, 0.05, 1000)),
                Segment::new(60_000, 64_000, tri(0.001, 0.005, 500)),
            ],
        };
        assert!(validate_policy(&c, 64_000).is_empty());
        assert!(close(eval_lr(&c, 30_000, 64_000).unwrap(), 0.01));
        assert!(close(eval_lr(&c, 31_000, 64_000).unwrap(), 0.05));
        assert!(close(eval_lr(&c, 60_500, 64_000).unwrap(), 0.005));
    }
}
