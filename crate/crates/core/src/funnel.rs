//! Exponential performance funnels and the selection of funnel parameters
//! that turn "stay inside the funnel" into "satisfy the temporal task with
//! robustness at least `r`".

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::{
    parse_formula, ParseError, Predicate, PredicateSpec, StateFormula, StlError, TemporalFormula,
    DEFAULT_TOP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("task is infeasible: rho_opt = {0} is not positive")]
    Infeasible(f64),
    #[error("initial robustness {rho0} is not below rho_opt = {rho_opt}")]
    InitialAboveOptimum { rho0: f64, rho_opt: f64 },
    #[error("t* = 0 requires initial robustness {rho0} above r = {r}; the gamma0 interval is empty")]
    EmptyGammaInterval { rho0: f64, r: f64 },
    #[error("invalid funnel: {0}")]
    InvalidFunnel(String),
    #[error("invalid selection policy: {0}")]
    InvalidPolicy(String),
}

/// `gamma(t) = (gamma0 - gamma_inf) exp(-decay t) + gamma_inf`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Funnel {
    gamma0: f64,
    gamma_inf: f64,
    decay: f64,
}

impl Funnel {
    pub fn new(gamma0: f64, gamma_inf: f64, decay: f64) -> Result<Self, DesignError> {
        let finite = gamma0.is_finite() && gamma_inf.is_finite() && decay.is_finite();
        if !finite || gamma_inf <= 0.0 || gamma0 < gamma_inf || decay < 0.0 {
            return Err(DesignError::InvalidFunnel(format!(
                "need gamma0 >= gamma_inf > 0 and decay >= 0, got ({gamma0}, {gamma_inf}, {decay})"
            )));
        }
        Ok(Self {
            gamma0,
            gamma_inf,
            decay,
        })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn gamma_inf(&self) -> f64 {
        self.gamma_inf
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn gamma(&self, t: f64) -> f64 {
        (self.gamma0 - self.gamma_inf) * (-self.decay * t).exp() + self.gamma_inf
    }

    pub fn gamma_dot(&self, t: f64) -> f64 {
        -self.decay * (self.gamma0 - self.gamma_inf) * (-self.decay * t).exp()
    }

    /// Normalized decay rate `-gamma'(t) / gamma(t) >= 0`.
    pub fn alpha(&self, t: f64) -> f64 {
        -self.gamma_dot(t) / self.gamma(t)
    }
}

/// Where inside the admissible deadline interval `t*` is placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deadline {
    Earliest,
    Latest,
    /// Linear position in `[0, 1]` between the earliest and latest deadline.
    Fraction(f64),
}

/// Resolves every admissible interval of the parameter selection to a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionPolicy {
    pub deadline: Deadline,
    /// `rho_max = base + rho_max_fraction * (rho_opt - base)`, `base = max(0, rho0)`.
    pub rho_max_fraction: f64,
    /// Used instead of the fraction when `rho_opt` is unbounded.
    pub unbounded_margin: f64,
    /// `r = r_fraction * rho_max`.
    pub r_fraction: f64,
    /// `gamma0 = (1 + headroom) * (rho_max - rho0)` when `t* > 0`.
    pub gamma0_headroom: f64,
    /// `gamma_inf = gamma_inf_fraction * min(gamma0, rho_max - r)`.
    pub gamma_inf_fraction: f64,
    /// Decay used when any `l >= 0` is admissible.
    pub free_decay: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            deadline: Deadline::Latest,
            rho_max_fraction: 0.8,
            unbounded_margin: 1.0,
            r_fraction: 0.1,
            gamma0_headroom: 0.2,
            gamma_inf_fraction: 0.9,
            free_decay: 0.0,
        }
    }
}

impl SelectionPolicy {
    fn validate(&self) -> Result<(), DesignError> {
        let open01 = |v: f64| v > 0.0 && v < 1.0;
        let bad = |what: &str| Err(DesignError::InvalidPolicy(what.to_string()));
        if let Deadline::Fraction(f) = self.deadline {
            if !(0.0..=1.0).contains(&f) {
                return bad("deadline fraction must lie in [0, 1]");
            }
        }
        if !open01(self.rho_max_fraction) {
            return bad("rho_max_fraction must lie in (0, 1)");
        }
        if !open01(self.r_fraction) {
            return bad("r_fraction must lie in (0, 1)");
        }
        if !(self.gamma_inf_fraction > 0.0 && self.gamma_inf_fraction <= 1.0) {
            return bad("gamma_inf_fraction must lie in (0, 1]");
        }
        if !(self.gamma0_headroom > 0.0 && self.gamma0_headroom.is_finite()) {
            return bad("gamma0_headroom must be positive");
        }
        if !(self.unbounded_margin > 0.0 && self.unbounded_margin.is_finite()) {
            return bad("unbounded_margin must be positive");
        }
        if !(self.free_decay >= 0.0 && self.free_decay.is_finite()) {
            return bad("free_decay must be non-negative");
        }
        Ok(())
    }
}

/// Admissible deadlines `[lo, hi]` for `t*`.
pub fn deadline_range(phi: &TemporalFormula) -> (f64, f64) {
    match phi {
        TemporalFormula::Always(i, _) => (i.start(), i.start()),
        TemporalFormula::Eventually(i, _) => (i.start(), i.end()),
        TemporalFormula::EventuallyAlways { outer, inner, .. } => {
            (outer.start() + inner.start(), outer.end() + inner.start())
        }
    }
}

/// A temporal task together with the funnel that enforces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncodingRecord", into = "EncodingRecord")]
pub struct TaskEncoding {
    phi: TemporalFormula,
    funnel: Funnel,
    rho_max: f64,
    r_min: f64,
    t_star: f64,
}

impl TaskEncoding {
    /// Assembles an encoding from hand-chosen parameters, checking the
    /// envelope invariants.
    pub fn new(
        phi: TemporalFormula,
        funnel: Funnel,
        rho_max: f64,
        r_min: f64,
        t_star: f64,
    ) -> Result<Self, DesignError> {
        if !(r_min > 0.0 && r_min < rho_max) {
            return Err(DesignError::InvalidFunnel(format!(
                "need 0 < r ({r_min}) < rho_max ({rho_max})"
            )));
        }
        if !(t_star >= 0.0 && t_star.is_finite()) {
            return Err(DesignError::InvalidFunnel(format!("bad deadline t* = {t_star}")));
        }
        Ok(Self {
            phi,
            funnel,
            rho_max,
            r_min,
            t_star,
        })
    }

    pub fn phi(&self) -> &TemporalFormula {
        &self.phi
    }

    pub fn psi(&self) -> &StateFormula {
        self.phi.body()
    }

    pub fn funnel(&self) -> &Funnel {
        &self.funnel
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    /// `(rho_max - gamma(t), rho_max)`
    pub fn envelope(&self, t: f64) -> (f64, f64) {
        (self.rho_max - self.funnel.gamma(t), self.rho_max)
    }

    /// Strict containment in the open envelope.
    pub fn contains(&self, t: f64, rho: f64) -> bool {
        let (lo, hi) = self.envelope(t);
        lo < rho && rho < hi
    }

    /// True when the decay rate was solved from the deadline condition.
    pub fn decay_solved(&self) -> bool {
        -self.funnel.gamma0 + self.rho_max < self.r_min
    }
}

/// Chooses `(t*, rho_max, r, gamma0, gamma_inf, l)` for a task.
pub fn design_parameters(
    phi: &TemporalFormula,
    rho0: f64,
    rho_opt: f64,
    policy: &SelectionPolicy,
) -> Result<TaskEncoding, DesignError> {
    policy.validate()?;
    if rho_opt.is_nan() || rho_opt <= 0.0 {
        return Err(DesignError::Infeasible(rho_opt));
    }
    if !(rho0 < rho_opt) {
        return Err(DesignError::InitialAboveOptimum { rho0, rho_opt });
    }

    let (t_lo, t_hi) = deadline_range(phi);
    let t_star = match policy.deadline {
        Deadline::Earliest => t_lo,
        Deadline::Latest => t_hi,
        Deadline::Fraction(f) => t_lo + f * (t_hi - t_lo),
    };

    let base = rho0.max(0.0);
    let rho_max = if rho_opt.is_finite() && rho_opt < DEFAULT_TOP {
        base + policy.rho_max_fraction * (rho_opt - base)
    } else {
        base + policy.unbounded_margin
    };

    let mut r = policy.r_fraction * rho_max;
    let gamma0 = if t_star > 0.0 {
        (1.0 + policy.gamma0_headroom) * (rho_max - rho0)
    } else {
        // The funnel must certify r from t = 0, so rho0 itself must exceed r.
        if rho0 <= 0.0 {
            return Err(DesignError::EmptyGammaInterval { rho0, r });
        }
        if r >= rho0 {
            r = 0.5 * rho0;
        }
        let lo = rho_max - rho0;
        let hi = rho_max - r;
        0.5 * (lo + hi)
    };
    let gamma_inf = policy.gamma_inf_fraction * gamma0.min(rho_max - r);

    let decay = if -gamma0 + rho_max >= r {
        policy.free_decay
    } else {
        -((rho_max - r - gamma_inf) / (gamma0 - gamma_inf)).ln() / t_star
    };

    let funnel = Funnel::new(gamma0, gamma_inf, decay)?;
    let enc = TaskEncoding::new(phi.clone(), funnel, rho_max, r, t_star)?;

    let (lo0, _) = enc.envelope(0.0);
    assert!(
        lo0 < rho0 && rho0 < rho_max,
        "designed funnel must contain the initial robustness"
    );
    let (lo_star, _) = enc.envelope(t_star);
    assert!(
        lo_star >= r - 1e-9 * r.abs().max(1.0),
        "designed funnel must reach r by t* (lower = {lo_star}, r = {r})"
    );
    Ok(enc)
}

/// On-disk form of a [`TaskEncoding`]: formula text plus the predicates it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingRecord {
    pub formula: String,
    pub predicates: BTreeMap<String, PredicateSpec>,
    pub funnel: Funnel,
    pub rho_max: f64,
    pub r: f64,
    pub t_star: f64,
}

#[derive(Debug, Error)]
pub enum EncodingRecordError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

impl From<TaskEncoding> for EncodingRecord {
    fn from(enc: TaskEncoding) -> Self {
        let predicates = enc
            .psi()
            .predicates()
            .into_iter()
            .map(|(p, _)| (p.name().to_string(), p.spec()))
            .collect();
        Self {
            formula: enc.phi.to_string(),
            predicates,
            funnel: enc.funnel,
            rho_max: enc.rho_max,
            r: enc.r_min,
            t_star: enc.t_star,
        }
    }
}

impl TryFrom<EncodingRecord> for TaskEncoding {
    type Error = EncodingRecordError;

    fn try_from(rec: EncodingRecord) -> Result<Self, Self::Error> {
        let env = rec
            .predicates
            .iter()
            .map(|(name, spec)| Ok((name.clone(), Predicate::from_spec(name, spec)?)))
            .collect::<Result<BTreeMap<_, _>, StlError>>()?;
        let phi = parse_formula(&rec.formula, &env)?;
        Funnel::new(rec.funnel.gamma0, rec.funnel.gamma_inf, rec.funnel.decay)?;
        Ok(TaskEncoding::new(phi, rec.funnel, rec.rho_max, rec.r, rec.t_star)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{monitor_with, Interval, RobustnessTrace, WindowPolicy};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn x_pred() -> StateFormula {
        StateFormula::pred(Predicate::affine("p", vec![1.0], 0.0, vec![0]).unwrap())
    }

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn constant_funnel() {
        let f = Funnel::new(1.0, 1.0, 3.0).unwrap();
        assert_eq!((f.gamma(5.0), f.gamma_dot(5.0), f.alpha(5.0)), (1.0, 0.0, 0.0));
    }

    #[test]
    fn zero_decay() {
        assert_eq!(Funnel::new(2.0, 1.0, 0.0).unwrap().gamma(7.0), 2.0);
    }

    #[test]
    fn decaying_funnel_at_ln2() {
        let f = Funnel::new(2.0, 1.0, 1.0).unwrap();
        let t = std::f64::consts::LN_2;
        assert_relative_eq!(f.gamma(t), 1.5, epsilon = 1e-15);
        assert_relative_eq!(f.gamma_dot(t), -0.5, epsilon = 1e-15);
        assert_relative_eq!(f.alpha(t), 1.0 / 3.0, epsilon = 1e-15);
        // Central difference of gamma as an independent route to gamma_dot.
        let h = 1e-6;
        let fd = (f.gamma(t + h) - f.gamma(t - h)) / (2.0 * h);
        assert!((fd - f.gamma_dot(t)).abs() < 1e-9);
    }

    #[test]
    fn invalid_funnels_rejected() {
        assert!(Funnel::new(1.0, 2.0, 0.0).is_err());
        assert!(Funnel::new(1.0, 0.0, 0.0).is_err());
        assert!(Funnel::new(1.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn always_task_with_t_star_zero_keeps_constant_width() {
        let phi = TemporalFormula::always(iv(0.0, 8.0), x_pred()).unwrap();
        let enc = design_parameters(&phi, 0.5, 1.0, &SelectionPolicy::default()).unwrap();
        assert_eq!(enc.t_star(), 0.0);
        assert!(!enc.decay_solved());
        assert_eq!(enc.funnel().decay(), 0.0);
        assert!(enc.envelope(0.0).0 >= enc.r_min());
        assert!(enc.contains(0.0, 0.5));
    }

    #[test]
    fn eventually_task_reaches_r_by_deadline() {
        let phi = TemporalFormula::eventually(iv(0.0, 8.0), x_pred()).unwrap();
        let enc = design_parameters(&phi, -0.4, 1.0, &SelectionPolicy::default()).unwrap();
        assert_eq!(enc.t_star(), 8.0);
        assert!(enc.decay_solved());
        // Dense grid check of the two defining inequalities.
        assert!(enc.envelope(0.0).0 < -0.4);
        for k in 0..=8000 {
            let t = 8.0 + f64::from(k) * 1e-3;
            assert!(enc.envelope(t).0 >= enc.r_min() - 1e-12, "t = {t}");
        }
        assert!((enc.funnel().gamma(8.0) - (enc.rho_max() - enc.r_min())).abs() < 1e-9);
    }

    #[test]
    fn design_errors() {
        let phi = TemporalFormula::always(iv(0.0, 8.0), x_pred()).unwrap();
        let p = SelectionPolicy::default();
        assert!(matches!(design_parameters(&phi, 0.0, -1.0, &p), Err(DesignError::Infeasible(_))));
        assert!(matches!(
            design_parameters(&phi, 2.0, 1.0, &p),
            Err(DesignError::InitialAboveOptimum { .. })
        ));
        assert!(matches!(
            design_parameters(&phi, -0.5, 1.0, &p),
            Err(DesignError::EmptyGammaInterval { .. })
        ));
    }

    #[test]
    fn unbounded_rho_opt_uses_margin() {
        let phi = TemporalFormula::eventually(iv(1.0, 2.0), x_pred()).unwrap();
        let enc = design_parameters(&phi, -3.0, f64::INFINITY, &SelectionPolicy::default()).unwrap();
        assert_eq!(enc.rho_max(), 1.0);
    }

    #[test]
    fn envelope_edges() {
        let phi = TemporalFormula::eventually(iv(0.0, 8.0), x_pred()).unwrap();
        let enc = design_parameters(&phi, -0.4, 1.0, &SelectionPolicy::default()).unwrap();
        assert!(!enc.contains(3.0, enc.rho_max()));
        let (lo, _) = enc.envelope(1e6);
        assert_relative_eq!(lo, enc.rho_max() - enc.funnel().gamma_inf(), epsilon = 1e-12);
    }

    #[test]
    fn record_round_trip() {
        let phi = TemporalFormula::eventually(iv(0.0, 8.0), x_pred()).unwrap();
        let enc = design_parameters(&phi, -0.4, 1.0, &SelectionPolicy::default()).unwrap();
        let json = serde_json::to_string(&enc).unwrap();
        let back: TaskEncoding = serde_json::from_str(&json).unwrap();
        assert_eq!(back, enc);
    }

    proptest! {
        #[test]
        fn gamma_is_non_increasing(
            g_inf in 0.01f64..5.0, extra in 0.0f64..5.0, l in 0.0f64..3.0,
            t1 in 0.0f64..50.0, dt in 0.0f64..50.0,
        ) {
            let f = Funnel::new(g_inf + extra, g_inf, l).unwrap();
            prop_assert!(f.gamma(t1) >= f.gamma(t1 + dt));
            prop_assert!(f.gamma(t1 + dt) > 0.0);
        }

        // Any trace strictly inside the envelope satisfies the task with margin r.
        #[test]
        fn funnel_implies_task(
            kind in 0usize..3, a in 0.0f64..4.0, len in 0.5f64..6.0, inner in 0.5f64..3.0,
            rho0 in -3.0f64..0.9, rho_opt in 1.0f64..3.0,
            frac in proptest::collection::vec(0.001f64..0.999, 1..40),
        ) {
            let phi = match kind {
                0 => TemporalFormula::always(iv(0.0, len), x_pred()).unwrap(),
                1 => TemporalFormula::eventually(iv(a, a + len), x_pred()).unwrap(),
                _ => TemporalFormula::eventually_always(iv(a, a + len), iv(inner, 2.0 * inner), x_pred()).unwrap(),
            };
            let rho0 = if kind == 0 { rho0.abs() + 0.05 } else { rho0 };
            prop_assume!(rho0 < rho_opt);
            let enc = match design_parameters(&phi, rho0, rho_opt, &SelectionPolicy::default()) {
                Ok(enc) => enc,
                Err(DesignError::EmptyGammaInterval { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let (_, hi) = phi.horizon();
            let dt = 0.01;
            let n = (hi / dt).ceil() as usize + 2;
            let times: Arc<[f64]> = (0..n).map(|k| k as f64 * dt).collect::<Vec<_>>().into();
            let values = times
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let (lo, up) = enc.envelope(t);
                    lo + frac[k % frac.len()] * (up - lo)
                })
                .collect();
            let tr = RobustnessTrace::new(times, values).unwrap();
            let v = monitor_with(&phi, &tr, 0.0, WindowPolicy::Strict).unwrap();
            prop_assert!(v >= enc.r_min() - 1e-12, "monitor {} < r {}", v, enc.r_min());
        }
    }
}
