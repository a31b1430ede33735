use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{Predicate, PredicateKind, StateFormula, StlError};

/// Robustness reported for `true`. Large but finite so it survives arithmetic.
pub const DEFAULT_TOP: f64 = 1e12;

/// Flat log-sum-exp smooth minimum `-ln(sum_k exp(-v_k))`, shifted by the
/// hard minimum so large magnitudes do not overflow.
pub fn smooth_min(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|v| (-(v - m)).exp()).sum();
    m - s.ln()
}

/// Softmin weights `w_k = exp(-v_k) / sum_j exp(-v_j)`, written into `out`.
pub fn softmin_weights(values: &[f64], out: &mut [f64]) {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut s = 0.0;
    for (w, v) in out.iter_mut().zip(values) {
        *w = (-(v - m)).exp();
        s += *w;
    }
    out.iter_mut().for_each(|w| *w /= s);
}

type Values = SmallVec<[f64; 8]>;

impl StateFormula {
    /// `true` itself, or a conjunction made only of `true`.
    pub fn is_trivially_true(&self) -> bool {
        match self {
            StateFormula::True => true,
            StateFormula::And(parts) => parts.iter().all(StateFormula::is_trivially_true),
            _ => false,
        }
    }

    /// Space robustness of the state formula at `x`.
    pub fn rho(&self, x: &[f64]) -> Result<f64, StlError> {
        self.rho_with_top(x, DEFAULT_TOP)
    }

    pub fn rho_with_top(&self, x: &[f64], top: f64) -> Result<f64, StlError> {
        match self {
            StateFormula::True => Ok(top),
            StateFormula::Pred(p) => p.eval(x),
            StateFormula::NegPred(p) => p.eval(x).map(|v| -v),
            StateFormula::And(parts) => {
                let values = self.operand_values(parts, x)?;
                if values.is_empty() {
                    Ok(top)
                } else {
                    Ok(smooth_min(&values))
                }
            }
        }
    }

    // `true` operands are dropped: their sentinel would otherwise dominate.
    fn operand_values(&self, parts: &[StateFormula], x: &[f64]) -> Result<Values, StlError> {
        parts
            .iter()
            .filter(|p| !p.is_trivially_true())
            .map(|p| p.rho(x))
            .collect()
    }

    /// Gradient of the robustness with respect to the full state `x`.
    pub fn grad_rho(&self, x: &[f64]) -> Result<Vec<f64>, StlError> {
        let mut out = vec![0.0; x.len()];
        self.rho_and_grad(x, &mut out)?;
        Ok(out)
    }

    /// Writes the gradient into `grad` (overwritten) and returns the value.
    pub fn rho_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, StlError> {
        if self.is_trivially_true() {
            return Err(StlError::GradientOfTrue);
        }
        if grad.len() != x.len() {
            return Err(StlError::DimensionMismatch {
                predicate: "<gradient buffer>".into(),
                index: grad.len(),
                got: x.len(),
            });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.accumulate(x, 1.0, grad)
    }

    fn accumulate(&self, x: &[f64], scale: f64, out: &mut [f64]) -> Result<f64, StlError> {
        match self {
            StateFormula::True => Err(StlError::GradientOfTrue),
            StateFormula::Pred(p) => {
                let v = p.eval(x)?;
                p.accumulate_grad(x, scale, out);
                Ok(v)
            }
            StateFormula::NegPred(p) => {
                let v = p.eval(x)?;
                p.accumulate_grad(x, -scale, out);
                Ok(-v)
            }
            StateFormula::And(parts) => {
                let live: SmallVec<[&StateFormula; 8]> =
                    parts.iter().filter(|p| !p.is_trivially_true()).collect();
                let values: Values = live.iter().map(|p| p.rho(x)).collect::<Result<_, _>>()?;
                let mut weights: Values = SmallVec::from_elem(0.0, values.len());
                softmin_weights(&values, &mut weights);
                for (part, w) in live.iter().zip(&weights) {
                    part.accumulate(x, scale * w, out)?;
                }
                Ok(smooth_min(&values))
            }
        }
    }

    /// Structural concavity and well-posedness check.
    pub fn validate_concavity(&self) -> ConcavityReport {
        let leaves = self.predicates();
        let violations = leaves
            .iter()
            .filter(|(p, negated)| *negated && !p.is_affine())
            .map(|(p, _)| format!("negation of non-affine predicate `{}`", p.name()))
            .collect();
        ConcavityReport {
            violations,
            well_posed: structurally_well_posed(&leaves),
        }
    }

    pub(crate) fn ensure_concave(&self) -> Result<(), StlError> {
        let report = self.validate_concavity();
        match report.violations.first() {
            Some(v) => Err(StlError::NotConcave(v.clone())),
            None => Ok(()),
        }
    }

    /// Supremum of the robustness over the whole state space.
    ///
    /// Returns `f64::INFINITY` when the formula is unbounded above and the
    /// `top` sentinel for formulas that are trivially true.
    pub fn rho_opt(&self, cfg: &RhoOptConfig) -> Result<f64, StlError> {
        self.ensure_concave()?;
        if self.is_trivially_true() {
            return Ok(cfg.top);
        }
        let leaves = self.predicates();
        let has_ball = leaves.iter().any(|(p, _)| !p.is_affine());
        let dim = self.min_dim();
        if !has_ball && opposing_directions(&leaves, dim).is_empty() {
            return Ok(f64::INFINITY);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..cfg.starts.max(1) {
            let x0: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(cfg.box_lo..=cfg.box_hi))
                .collect();
            match self.ascend(x0, cfg)? {
                Ascent::Converged(v) => best = best.max(v),
                Ascent::Diverged => return Ok(f64::INFINITY),
            }
        }
        Ok(best)
    }

    fn ascend(&self, mut x: Vec<f64>, cfg: &RhoOptConfig) -> Result<Ascent, StlError> {
        let dim = x.len();
        let mut grad = vec![0.0; dim];
        let mut trial = vec![0.0; dim];
        let mut value = self.rho_and_grad(&x, &mut grad)?;
        let mut step = 1.0;
        // Consecutive accepted steps whose gain is lost in rounding.
        let mut stalled = 0;
        for _ in 0..cfg.max_iter {
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() < cfg.grad_tol {
                return Ok(Ascent::Converged(value));
            }
            // Armijo backtracking on the concave objective.
            step *= 2.0;
            let accepted = loop {
                for k in 0..dim {
                    trial[k] = x[k] + step * grad[k];
                }
                let v = self.rho(&trial)?;
                if v >= value + 1e-4 * step * gnorm2 {
                    break Some(v);
                }
                step *= 0.5;
                if step < 1e-300 {
                    break None;
                }
            };
            match accepted {
                Some(v) => {
                    if v - value <= 4.0 * f64::EPSILON * value.abs().max(1.0) {
                        stalled += 1;
                    } else {
                        stalled = 0;
                    }
                    std::mem::swap(&mut x, &mut trial);
                    value = self.rho_and_grad(&x, &mut grad)?;
                    if stalled >= 10 {
                        return Ok(Ascent::Converged(value));
                    }
                }
                // No ascent possible at machine precision.
                None => return Ok(Ascent::Converged(value)),
            }
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() > cfg.divergence_radius {
                return Ok(Ascent::Diverged);
            }
        }
        log::warn!("rho_opt ascent hit the iteration cap; using best value {value}");
        Ok(Ascent::Converged(value))
    }
}

enum Ascent {
    Converged(f64),
    Diverged,
}

/// Multistart configuration for [`StateFormula::rho_opt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RhoOptConfig {
    pub starts: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub divergence_radius: f64,
    pub seed: u64,
    pub top: f64,
}

impl Default for RhoOptConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            box_lo: -10.0,
            box_hi: 10.0,
            grad_tol: 1e-9,
            max_iter: 200_000,
            divergence_radius: 1e9,
            seed: 0,
            top: DEFAULT_TOP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub violations: Vec<String>,
    /// Superlevel sets are bounded in every selected coordinate.
    pub well_posed: bool,
}

impl ConcavityReport {
    pub fn is_concave(&self) -> bool {
        self.violations.is_empty()
    }
}

fn signed_direction(p: &Predicate, negated: bool, dim: usize) -> Option<Vec<f64>> {
    match p.kind() {
        PredicateKind::Affine { coeffs, .. } => {
            let sign = if negated { -1.0 } else { 1.0 };
            let mut v = vec![0.0; dim];
            for (a, &i) in coeffs.iter().zip(p.selector()) {
                v[i] += sign * a;
            }
            Some(v)
        }
        PredicateKind::SquaredBall { .. } => None,
    }
}

/// Directions along which a pair of affine atoms with opposite gradients
/// bounds the robustness from above.
fn opposing_directions(leaves: &[(&std::sync::Arc<Predicate>, bool)], dim: usize) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = leaves
        .iter()
        .filter_map(|(p, neg)| signed_direction(p, *neg, dim))
        .collect();
    let mut out = Vec::new();
    for (i, u) in dirs.iter().enumerate() {
        for v in &dirs[i + 1..] {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nu > 0.0 && nv > 0.0 && dot < 0.0 && (dot.abs() - nu * nv).abs() <= 1e-9 * nu * nv {
                out.push(u.clone());
            }
        }
    }
    out
}

fn structurally_well_posed(leaves: &[(&std::sync::Arc<Predicate>, bool)]) -> bool {
    let dim = leaves.iter().map(|(p, _)| p.min_dim()).max().unwrap_or(0);
    let mut selected: Vec<usize> = leaves
        .iter()
        .flat_map(|(p, _)| p.selector().iter().copied())
        .collect();
    selected.sort_unstable();
    selected.dedup();
    if selected.is_empty() {
        return false;
    }

    let mut bounded: Vec<Vec<f64>> = opposing_directions(leaves, dim);
    for (p, _) in leaves.iter().filter(|(p, _)| !p.is_affine()) {
        for &i in p.selector() {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            bounded.push(e);
        }
    }
    if bounded.len() < selected.len() {
        return false;
    }
    let m = DMatrix::from_fn(bounded.len(), selected.len(), |r, c| bounded[r][selected[c]]);
    m.rank(1e-9) == selected.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn affine(name: &str, a: Vec<f64>, b: f64, sel: Vec<usize>) -> StateFormula {
        StateFormula::pred(Predicate::affine(name, a, b, sel).unwrap())
    }

    fn room_odd() -> StateFormula {
        StateFormula::and([
            affine("below25", vec![-1.0], 25.0, vec![0]),
            affine("above21", vec![1.0], -21.0, vec![0]),
        ])
    }

    #[test]
    fn conjunction_of_two_zeros_is_minus_ln2() {
        let f = StateFormula::and([
            affine("a", vec![1.0], 0.0, vec![0]),
            affine("b", vec![-1.0], 0.0, vec![0]),
        ]);
        assert_relative_eq!(f.rho(&[0.0]).unwrap(), -std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn identity_affine() {
        assert_eq!(affine("a", vec![1.0], 0.0, vec![0]).rho(&[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn room_odd_at_23() {
        // Direct evaluation of -ln(e^-2 + e^-2) as an independent route.
        let brute = -((-2.0f64).exp() + (-2.0f64).exp()).ln();
        let v = room_odd().rho(&[23.0]).unwrap();
        assert_relative_eq!(v, brute, epsilon = 1e-14);
        assert_relative_eq!(v, 2.0 - std::f64::consts::LN_2, epsilon = 1e-14);
    }

    #[test]
    fn true_sentinel_and_dropped_in_conjunction() {
        assert_eq!(StateFormula::True.rho(&[]).unwrap(), DEFAULT_TOP);
        let f = StateFormula::And(vec![StateFormula::True, affine("a", vec![1.0], 0.0, vec![0])]);
        assert_eq!(f.rho(&[2.5]).unwrap(), 2.5);
        assert!(matches!(f.grad_rho(&[0.0]), Ok(g) if g == vec![1.0]));
        assert_eq!(StateFormula::True.grad_rho(&[1.0]), Err(StlError::GradientOfTrue));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = affine("a", vec![1.0], 0.0, vec![2]);
        assert!(matches!(f.rho(&[1.0]), Err(StlError::DimensionMismatch { .. })));
    }

    #[test]
    fn ball_gradient_vanishes_at_center() {
        let f = StateFormula::pred(Predicate::ball("b", vec![1.0, -2.0], 0.5, vec![0, 1]).unwrap());
        assert_eq!(f.grad_rho(&[1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn affine_gradient_is_constant() {
        let f = affine("a", vec![2.0, 0.0], 1.0, vec![0, 1]);
        for x in [[0.0, 0.0], [5.0, -3.0]] {
            assert_eq!(f.grad_rho(&x).unwrap(), vec![2.0, 0.0]);
        }
    }

    #[test]
    fn negated_affine_gradient() {
        let f = StateFormula::neg(Predicate::affine("a", vec![3.0], 1.0, vec![0]).unwrap()).unwrap();
        assert_eq!(f.grad_rho(&[7.0]).unwrap(), vec![-3.0]);
        assert_eq!(f.rho(&[1.0]).unwrap(), -4.0);
    }

    #[test]
    fn concavity_report_cases() {
        let ball = Predicate::ball("b", vec![0.0], 1.0, vec![0]).unwrap();
        let r = StateFormula::and([StateFormula::pred(ball.clone()), affine("a", vec![1.0], 0.0, vec![0])])
            .validate_concavity();
        assert!(r.is_concave() && r.well_posed);

        let r = StateFormula::NegPred(std::sync::Arc::new(ball)).validate_concavity();
        assert!(!r.is_concave());

        let r = room_odd().validate_concavity();
        assert!(r.is_concave() && r.well_posed);

        let r = affine("a", vec![1.0], 0.0, vec![0]).validate_concavity();
        assert!(r.is_concave() && !r.well_posed);
    }

    #[test]
    fn rho_opt_cases() {
        let cfg = RhoOptConfig::default();
        let ball = StateFormula::pred(Predicate::ball("b", vec![3.0, -1.0], 0.7, vec![0, 1]).unwrap());
        assert_relative_eq!(ball.rho_opt(&cfg).unwrap(), 0.49, epsilon = 1e-12);
        assert_eq!(affine("a", vec![1.0], 0.0, vec![0]).rho_opt(&cfg).unwrap(), f64::INFINITY);
        // A free extra coordinate only ever lowers the smooth minimum, so the
        // supremum is approached as y grows and equals the room optimum.
        let f = StateFormula::and([room_odd(), affine("y", vec![1.0], 0.0, vec![1])]);
        assert_relative_eq!(f.rho_opt(&cfg).unwrap(), 2.0 - std::f64::consts::LN_2, epsilon = 1e-8);
    }

    #[test]
    fn rho_opt_room_matches_grid_search() {
        let f = room_odd();
        // 1-D grid search oracle at resolution 1e-4 over [15, 31].
        let mut best = f64::NEG_INFINITY;
        let mut k = 0u32;
        loop {
            let t = 15.0 + f64::from(k) * 1e-4;
            if t > 31.0 {
                break;
            }
            best = best.max(f.rho(&[t]).unwrap());
            k += 1;
        }
        let opt = f.rho_opt(&RhoOptConfig::default()).unwrap();
        assert_relative_eq!(opt, best, epsilon = 1e-8);
        assert_relative_eq!(opt, 2.0 - std::f64::consts::LN_2, epsilon = 1e-12);
    }
}
