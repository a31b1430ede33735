//! Error transformation and the closed-form decentralized feedback law.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::funnel::{Funnel, TaskEncoding};
use crate::sim::{Dynamics, SubsystemId};
use crate::stl::StlError;

pub const DEFAULT_CLAMP_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("clamp margin {0} outside (0, 0.5)")]
    ClampMargin(f64),
}

/// Which funnel wall the normalized error was pushed back from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampSide {
    /// `e_hat <= -1`: robustness at or below the lower envelope.
    Lower,
    /// `e_hat >= 0`: robustness at or above `rho_max`.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    /// `rho^psi(x)`
    pub rho: f64,
    /// `rho - rho_max`
    pub e: f64,
    /// `e / gamma(t)`, clamped into `[-1 + eps_c, -eps_c]`.
    pub e_hat: f64,
    /// `T(e_hat)`
    pub epsilon_t: f64,
    pub jacobian: f64,
    /// Set when `e_hat` had to be clamped; carries the raw value.
    pub clamp: Option<(ClampSide, f64)>,
}

/// `T(e) = ln(-(e + 1) / e)`, a bijection from `(-1, 0)` onto the reals.
pub fn transform(e_hat: f64) -> f64 {
    (-(e_hat + 1.0) / e_hat).ln()
}

/// `T^{-1}(eps) = -1 / (1 + e^eps)`
pub fn inverse_transform(eps: f64) -> f64 {
    -1.0 / (1.0 + eps.exp())
}

/// Normalized Jacobian `-1 / (gamma e (1 + e))` of the transformation.
pub fn transform_jacobian(e_hat: f64, gamma: f64) -> f64 {
    -1.0 / (gamma * e_hat * (1.0 + e_hat))
}

/// Error state for a given robustness value.
pub fn error_state_from_rho(enc: &TaskEncoding, rho: f64, t: f64, clamp_margin: f64) -> ErrorState {
    let gamma = enc.funnel().gamma(t);
    let e = rho - enc.rho_max();
    let raw = e / gamma;
    let (lo, hi) = (-1.0 + clamp_margin, -clamp_margin);
    let (e_hat, clamp) = if raw < lo || raw.is_nan() {
        (lo, Some((ClampSide::Lower, raw)))
    } else if raw > hi {
        (hi, Some((ClampSide::Upper, raw)))
    } else {
        (raw, None)
    };
    if let Some((side, raw)) = clamp {
        log::debug!("clamped e_hat {raw} at t = {t} ({side:?})");
    }
    ErrorState {
        rho,
        e,
        e_hat,
        epsilon_t: transform(e_hat),
        jacobian: transform_jacobian(e_hat, gamma),
        clamp,
    }
}

/// Error state at state `x` and time `t`.
pub fn error_state(
    enc: &TaskEncoding,
    x: &[f64],
    t: f64,
    clamp_margin: f64,
) -> Result<ErrorState, StlError> {
    let rho = enc.psi().rho(x)?;
    Ok(error_state_from_rho(enc, rho, t, clamp_margin))
}

type Buf = SmallVec<[f64; 16]>;

/// Local feedback law of one subsystem:
/// `u = -g(x)^T (grad rho^T J eps_T + h(d(t)))`.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    subsystem: SubsystemId,
    encoding: Arc<TaskEncoding>,
    neighbor_funnels: Vec<(Funnel, usize)>,
    clamp_margin: f64,
}

impl ControlLaw {
    /// `neighbor_funnels` pairs each neighbor's funnel with its state
    /// dimension, in the order the neighbors are stacked into `w`.
    pub fn new(
        subsystem: SubsystemId,
        encoding: Arc<TaskEncoding>,
        neighbor_funnels: Vec<(Funnel, usize)>,
        clamp_margin: f64,
    ) -> Result<Self, ControlError> {
        if !(clamp_margin > 0.0 && clamp_margin < 0.5) {
            return Err(ControlError::ClampMargin(clamp_margin));
        }
        if encoding.psi().is_trivially_true() {
            return Err(StlError::GradientOfTrue.into());
        }
        Ok(Self {
            subsystem,
            encoding,
            neighbor_funnels,
            clamp_margin,
        })
    }

    pub fn subsystem(&self) -> SubsystemId {
        self.subsystem
    }

    pub fn encoding(&self) -> &Arc<TaskEncoding> {
        &self.encoding
    }

    pub fn neighbor_funnels(&self) -> &[(Funnel, usize)] {
        &self.neighbor_funnels
    }

    pub fn clamp_margin(&self) -> f64 {
        self.clamp_margin
    }

    /// `d(t)`: each neighbor's `gamma_j(t)` repeated over its state dimension.
    pub fn feedforward_d(&self, t: f64) -> Vec<f64> {
        let mut d = Vec::new();
        self.fill_d(t, &mut d);
        d
    }

    fn fill_d<E: Extend<f64>>(&self, t: f64, d: &mut E) {
        for (f, dim) in &self.neighbor_funnels {
            d.extend(std::iter::repeat_n(f.gamma(t), *dim));
        }
    }

    /// Evaluates the law into `u` and returns the error state it used.
    pub fn control_into(
        &self,
        model: &dyn Dynamics,
        x: &[f64],
        t: f64,
        u: &mut [f64],
    ) -> Result<ErrorState, ControlError> {
        let (n, m, p) = (model.state_dim(), model.input_dim(), model.internal_dim());
        let check = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(ControlError::Dimension { what, expected, got })
            }
        };
        check("state", n, x.len())?;
        check("input", m, u.len())?;
        let p_law: usize = self.neighbor_funnels.iter().map(|(_, d)| d).sum();
        check("feedforward", p, p_law)?;

        let mut grad: Buf = SmallVec::from_elem(0.0, n);
        let rho = self.encoding.psi().rho_and_grad(x, &mut grad)?;
        let es = error_state_from_rho(&self.encoding, rho, t, self.clamp_margin);

        let mut d: Buf = SmallVec::new();
        self.fill_d(t, &mut d);
        let mut v: Buf = SmallVec::from_elem(0.0, n);
        model.coupling(&d, &mut v);
        let gain = es.jacobian * es.epsilon_t;
        for (vi, gi) in v.iter_mut().zip(&grad) {
            *vi += gi * gain;
        }

        let mut g: Buf = SmallVec::from_elem(0.0, n * m);
        model.input_matrix(x, &mut g);
        for (k, uk) in u.iter_mut().enumerate() {
            *uk = -(0..n).map(|i| g[i * m + k] * v[i]).sum::<f64>();
        }
        Ok(es)
    }

    pub fn control(
        &self,
        model: &dyn Dynamics,
        x: &[f64],
        t: f64,
    ) -> Result<(Vec<f64>, ErrorState), ControlError> {
        let mut u = vec![0.0; model.input_dim()];
        let es = self.control_into(model, x, t, &mut u)?;
        Ok((u, es))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{Interval, Predicate, StateFormula, TemporalFormula};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// `x' = g u + h(w)` with scalar constant `g` and `h(w) = c * sum(w)`.
    #[derive(Debug)]
    struct Scalar {
        g: f64,
        c: f64,
        p: usize,
    }

    impl Dynamics for Scalar {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn internal_dim(&self) -> usize {
            self.p
        }
        fn drift(&self, _x: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn input_matrix(&self, _x: &[f64], out: &mut [f64]) {
            out[0] = self.g;
        }
        fn coupling(&self, w: &[f64], out: &mut [f64]) {
            out[0] = self.c * w.iter().sum::<f64>();
        }
    }

    /// psi = x (identity affine), constant funnel gamma = g0, rho_max = 1.
    fn encoding(g0: f64) -> Arc<TaskEncoding> {
        let psi = StateFormula::pred(Predicate::affine("x", vec![1.0], 0.0, vec![0]).unwrap());
        let phi = TemporalFormula::always(Interval::new(0.0, 1.0).unwrap(), psi).unwrap();
        let f = Funnel::new(g0, g0, 0.0).unwrap();
        Arc::new(TaskEncoding::new(phi, f, 1.0, 0.1, 0.0).unwrap())
    }

    #[test]
    fn transform_values() {
        assert_eq!(transform(-0.5), 0.0);
        assert_relative_eq!(transform(-0.1), 9f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(transform_jacobian(-0.5, 2.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn midpoint_without_coupling_gives_zero_input() {
        let law = ControlLaw::new(SubsystemId(1), encoding(1.0), vec![], 1e-9).unwrap();
        let model = Scalar { g: 1.0, c: 0.0, p: 0 };
        // rho = 0.5 -> e = -0.5, e_hat = -0.5, eps_T = 0.
        let (u, es) = law.control(&model, &[0.5], 0.0).unwrap();
        assert_eq!(es.epsilon_t, 0.0);
        assert_eq!(u, vec![0.0]);
    }

    #[test]
    fn direct_substitution() {
        // Pick gamma so that eps_T = 1 and J = 2 hold together; then u = -2.
        let e_hat = inverse_transform(1.0);
        let gamma = -1.0 / (2.0 * e_hat * (1.0 + e_hat));
        let law = ControlLaw::new(SubsystemId(1), encoding(gamma), vec![], 1e-9).unwrap();
        let model = Scalar { g: 1.0, c: 0.0, p: 0 };
        let rho = 1.0 + gamma * e_hat;
        let (u, es) = law.control(&model, &[rho], 0.0).unwrap();
        assert_relative_eq!(es.epsilon_t, 1.0, epsilon = 1e-12);
        assert_relative_eq!(es.jacobian, 2.0, epsilon = 1e-12);
        assert_relative_eq!(u[0], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn feedforward_stacking() {
        let one = ControlLaw::new(
            SubsystemId(1),
            encoding(1.0),
            vec![(Funnel::new(1.5, 1.5, 0.0).unwrap(), 1)],
            1e-9,
        )
        .unwrap();
        assert_eq!(one.feedforward_d(3.0), vec![1.5]);
        let two = ControlLaw::new(
            SubsystemId(1),
            encoding(1.0),
            vec![
                (Funnel::new(2.0, 2.0, 0.0).unwrap(), 1),
                (Funnel::new(1.0, 1.0, 0.0).unwrap(), 1),
            ],
            1e-9,
        )
        .unwrap();
        assert_eq!(two.feedforward_d(0.0), vec![2.0, 1.0]);
        let block = ControlLaw::new(
            SubsystemId(1),
            encoding(1.0),
            vec![(Funnel::new(4.0, 1.0, 0.3).unwrap(), 3)],
            1e-9,
        )
        .unwrap();
        assert_eq!(block.feedforward_d(0.0), vec![4.0; 3]);
    }

    #[test]
    fn clamping_is_reported() {
        let enc = encoding(1.0);
        let below = error_state_from_rho(&enc, -0.5, 0.0, 1e-9);
        assert!(matches!(below.clamp, Some((ClampSide::Lower, _))));
        assert_eq!(below.e_hat, -1.0 + 1e-9);
        let above = error_state_from_rho(&enc, 1.0, 0.0, 1e-9);
        assert!(matches!(above.clamp, Some((ClampSide::Upper, _))));
        assert!(error_state_from_rho(&enc, 0.3, 0.0, 1e-9).clamp.is_none());
    }

    #[test]
    fn dimension_and_margin_errors() {
        let model = Scalar { g: 1.0, c: 1.0, p: 2 };
        let law = ControlLaw::new(SubsystemId(1), encoding(1.0), vec![], 1e-9).unwrap();
        assert!(matches!(
            law.control(&model, &[0.5], 0.0),
            Err(ControlError::Dimension { what: "feedforward", .. })
        ));
        assert!(ControlLaw::new(SubsystemId(1), encoding(1.0), vec![], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn transform_strictly_increasing(a in 1e-9f64..1.0 - 1e-9, b in 1e-9f64..1.0 - 1e-9) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (-1.0 + a, -1.0 + b) } else { (-1.0 + b, -1.0 + a) };
            prop_assert!(transform(lo) < transform(hi));
        }

        #[test]
        fn inverse_composes_to_identity(e in -1.0 + 1e-6f64..-1e-6) {
            prop_assert!((inverse_transform(transform(e)) - e).abs() <= 1e-12);
        }

        #[test]
        fn jacobian_positive(e in -1.0 + 1e-9f64..-1e-9, gamma in 1e-6f64..1e6) {
            prop_assert!(transform_jacobian(e, gamma) > 0.0);
        }

        // Near the lower wall, with f = 0 and h = 0, the law drives rho up.
        #[test]
        fn sign_correct_near_lower_wall(g in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], frac in 0.9f64..0.999) {
            let enc = encoding(1.0);
            let law = ControlLaw::new(SubsystemId(1), enc.clone(), vec![], 1e-9).unwrap();
            let model = Scalar { g, c: 0.0, p: 0 };
            let rho = enc.rho_max() - frac;
            let (u, _) = law.control(&model, &[rho], 0.0).unwrap();
            // rho_dot = grad . (g u) with grad = 1
            prop_assert!(g * u[0] > 0.0);
        }
    }
}
