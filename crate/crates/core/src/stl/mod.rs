//! Concave STL fragment: predicates, boolean state formulas and the single
//! temporal layer (`G`, `F`, `F G`) that sits on top of them.
//!
//! State formulas (`psi`) are evaluated with space robustness where the
//! conjunction is replaced by a flat log-sum-exp smooth minimum. Temporal
//! formulas (`phi`) are only ever monitored over sampled traces; control is
//! synthesized from the inner `psi`.

mod monitor;
mod parse;
mod semantics;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use monitor::{monitor, monitor_with, RobustnessTrace, WindowPolicy};
pub use parse::{parse_formula, parse_state_formula, ParseError};
pub use semantics::{smooth_min, softmin_weights, ConcavityReport, RhoOptConfig, DEFAULT_TOP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("state has dimension {got}, predicate `{predicate}` selects index {index}")]
    DimensionMismatch {
        predicate: String,
        index: usize,
        got: usize,
    },
    #[error("gradient of `true` is undefined")]
    GradientOfTrue,
    #[error("formula is not concave: {0}")]
    NotConcave(String),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid predicate `{name}`: {reason}")]
    InvalidPredicate { name: String, reason: String },
    #[error("trace covers [{have_lo}, {have_hi}] but window [{need_lo}, {need_hi}] is required")]
    WindowNotCovered {
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },
    #[error("trace has {times} time samples but {values} values")]
    MalformedTrace { times: usize, values: usize },
}

/// Closed time interval `[a, b]` in seconds with `0 <= a <= b < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, StlError> {
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || a > b {
            return Err(StlError::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn start(&self) -> f64 {
        self.a
    }

    pub fn end(&self) -> f64 {
        self.b
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.a, self.b)
    }
}

/// Shape of a concave, continuously differentiable predicate function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredicateKind {
    /// `P(x) = coeffs . x_sel + offset`
    Affine { coeffs: Vec<f64>, offset: f64 },
    /// `P(x) = radius^2 - |x_sel - center|^2`
    #[serde(rename = "ball")]
    SquaredBall { center: Vec<f64>, radius: f64 },
}

/// Serialized form of a predicate (the name lives in the enclosing map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateSpec {
    #[serde(flatten)]
    pub kind: PredicateKind,
    pub selector: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    name: String,
    kind: PredicateKind,
    selector: Vec<usize>,
}

impl Predicate {
    pub fn new(
        name: impl Into<String>,
        kind: PredicateKind,
        selector: Vec<usize>,
    ) -> Result<Self, StlError> {
        let name = name.into();
        let invalid = |reason: &str| StlError::InvalidPredicate {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if selector.is_empty() {
            return Err(invalid("empty selector"));
        }
        let mut sorted = selector.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("selector indices must be distinct"));
        }
        match &kind {
            PredicateKind::Affine { coeffs, offset } => {
                if coeffs.len() != selector.len() {
                    return Err(invalid("coefficient count differs from selector length"));
                }
                if !coeffs.iter().chain(std::iter::once(offset)).all(|v| v.is_finite()) {
                    return Err(invalid("non-finite coefficient"));
                }
            }
            PredicateKind::SquaredBall { center, radius } => {
                if center.len() != selector.len() {
                    return Err(invalid("center dimension differs from selector length"));
                }
                if !(radius.is_finite() && *radius > 0.0) || !center.iter().all(|c| c.is_finite())
                {
                    return Err(invalid("radius must be positive and center finite"));
                }
            }
        }
        Ok(Self {
            name,
            kind,
            selector,
        })
    }

    pub fn affine(
        name: impl Into<String>,
        coeffs: Vec<f64>,
        offset: f64,
        selector: Vec<usize>,
    ) -> Result<Self, StlError> {
        Self::new(name, PredicateKind::Affine { coeffs, offset }, selector)
    }

    pub fn ball(
        name: impl Into<String>,
        center: Vec<f64>,
        radius: f64,
        selector: Vec<usize>,
    ) -> Result<Self, StlError> {
        Self::new(name, PredicateKind::SquaredBall { center, radius }, selector)
    }

    pub fn from_spec(name: impl Into<String>, spec: &PredicateSpec) -> Result<Self, StlError> {
        Self::new(name, spec.kind.clone(), spec.selector.clone())
    }

    pub fn spec(&self) -> PredicateSpec {
        PredicateSpec {
            kind: self.kind.clone(),
            selector: self.selector.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &PredicateKind {
        &self.kind
    }

    pub fn selector(&self) -> &[usize] {
        &self.selector
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, PredicateKind::Affine { .. })
    }

    /// Smallest state dimension this predicate can be evaluated on.
    pub fn min_dim(&self) -> usize {
        self.selector.iter().max().map_or(0, |m| m + 1)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), StlError> {
        match self.selector.iter().find(|&&i| i >= x.len()) {
            Some(&index) => Err(StlError::DimensionMismatch {
                predicate: self.name.clone(),
                index,
                got: x.len(),
            }),
            None => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, StlError> {
        self.check_dim(x)?;
        Ok(match &self.kind {
            PredicateKind::Affine { coeffs, offset } => {
                coeffs
                    .iter()
                    .zip(&self.selector)
                    .map(|(a, &i)| a * x[i])
                    .sum::<f64>()
                    + offset
            }
            PredicateKind::SquaredBall { center, radius } => {
                let dist2: f64 = center
                    .iter()
                    .zip(&self.selector)
                    .map(|(c, &i)| (x[i] - c).powi(2))
                    .sum();
                radius * radius - dist2
            }
        })
    }

    /// Adds `scale * grad P(x)` into `out` (full state dimension).
    fn accumulate_grad(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match &self.kind {
            PredicateKind::Affine { coeffs, .. } => {
                for (a, &i) in coeffs.iter().zip(&self.selector) {
                    out[i] += scale * a;
                }
            }
            PredicateKind::SquaredBall { center, .. } => {
                for (c, &i) in center.iter().zip(&self.selector) {
                    out[i] += scale * -2.0 * (x[i] - c);
                }
            }
        }
    }
}

/// Non-temporal (boolean) formula `psi`.
///
/// Conjunctions are n-ary; use [`StateFormula::and`] to build them so nested
/// conjunctions are flattened into a single smooth minimum.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    Pred(Arc<Predicate>),
    NegPred(Arc<Predicate>),
    And(Vec<StateFormula>),
}

impl StateFormula {
    pub fn pred(p: Predicate) -> Self {
        Self::Pred(Arc::new(p))
    }

    /// Negated predicate. Only affine predicates keep the formula concave.
    pub fn neg(p: Predicate) -> Result<Self, StlError> {
        if !p.is_affine() {
            return Err(StlError::NotConcave(format!(
                "negation of non-affine predicate `{}`",
                p.name
            )));
        }
        Ok(Self::NegPred(Arc::new(p)))
    }

    /// Flattening n-ary conjunction. A single operand is returned unchanged.
    pub fn and(parts: impl IntoIterator<Item = StateFormula>) -> Self {
        let mut flat = Vec::new();
        for part in parts {
            match part {
                StateFormula::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => StateFormula::True,
            1 => flat.pop().unwrap(),
            _ => StateFormula::And(flat),
        }
    }

    /// Visits every predicate leaf (negated or not).
    pub fn predicates(&self) -> Vec<(&Arc<Predicate>, bool)> {
        let mut out = Vec::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<(&'a Arc<Predicate>, bool)>) {
        match self {
            StateFormula::True => {}
            StateFormula::Pred(p) => out.push((p, false)),
            StateFormula::NegPred(p) => out.push((p, true)),
            StateFormula::And(parts) => parts.iter().for_each(|p| p.collect_predicates(out)),
        }
    }

    /// Smallest state dimension every leaf can be evaluated on.
    pub fn min_dim(&self) -> usize {
        self.predicates()
            .iter()
            .map(|(p, _)| p.min_dim())
            .max()
            .unwrap_or(0)
    }

    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            StateFormula::True => write!(f, "true"),
            StateFormula::Pred(p) => write!(f, "{}", p.name),
            StateFormula::NegPred(p) => write!(f, "!{}", p.name),
            StateFormula::And(parts) => {
                if nested {
                    write!(f, "(")?;
                }
                for (k, part) in parts.iter().enumerate() {
                    if k > 0 {
                        write!(f, " & ")?;
                    }
                    part.fmt_inner(f, true)?;
                }
                if nested {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_inner(f, false)
    }
}

/// The single temporal layer of the fragment.
#[derive(Debug, Clone, PartialEq)]
pub enum TemporalFormula {
    Always(Interval, StateFormula),
    Eventually(Interval, StateFormula),
    EventuallyAlways {
        outer: Interval,
        inner: Interval,
        body: StateFormula,
    },
}

impl TemporalFormula {
    /// Builds a temporal formula after checking the body is concave.
    pub fn always(interval: Interval, body: StateFormula) -> Result<Self, StlError> {
        body.ensure_concave()?;
        Ok(Self::Always(interval, body))
    }

    pub fn eventually(interval: Interval, body: StateFormula) -> Result<Self, StlError> {
        body.ensure_concave()?;
        Ok(Self::Eventually(interval, body))
    }

    pub fn eventually_always(
        outer: Interval,
        inner: Interval,
        body: StateFormula,
    ) -> Result<Self, StlError> {
        body.ensure_concave()?;
        Ok(Self::EventuallyAlways { outer, inner, body })
    }

    pub fn body(&self) -> &StateFormula {
        match self {
            TemporalFormula::Always(_, body)
            | TemporalFormula::Eventually(_, body)
            | TemporalFormula::EventuallyAlways { body, .. } => body,
        }
    }

    /// Absolute time window, relative to evaluation time 0, that a full
    /// evaluation touches.
    pub fn horizon(&self) -> (f64, f64) {
        match self {
            TemporalFormula::Always(i, _) | TemporalFormula::Eventually(i, _) => (i.a, i.b),
            TemporalFormula::EventuallyAlways { outer, inner, .. } => {
                (outer.a + inner.a, outer.b + inner.b)
            }
        }
    }
}

impl fmt::Display for TemporalFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemporalFormula::Always(i, body) => write!(f, "G{i} {}", Paren(body)),
            TemporalFormula::Eventually(i, body) => write!(f, "F{i} {}", Paren(body)),
            TemporalFormula::EventuallyAlways { outer, inner, body } => {
                write!(f, "F{outer}G{inner} {}", Paren(body))
            }
        }
    }
}

struct Paren<'a>(&'a StateFormula);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_inner(f, true)
    }
}
