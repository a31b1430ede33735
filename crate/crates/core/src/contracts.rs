//! Assume-guarantee contracts over funnel envelopes and their sampled checkers.
//!
//! Satisfaction is judged on the trace grid. For uniform-strong satisfaction
//! the reading is: if the assumptions hold throughout `[0, t]`, the guarantee
//! holds throughout `[0, t + delta]`; `delta` is measured in whole grid steps.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::funnel::TaskEncoding;
use crate::sim::{Network, SubsystemId};
use crate::stl::{RobustnessTrace, StlError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("no encoding for subsystem {0}")]
    MissingEncoding(SubsystemId),
    #[error("subsystem {from} lists unknown neighbor {to}")]
    DanglingNeighbor { from: SubsystemId, to: SubsystemId },
    #[error("traces do not share one time grid")]
    GridMismatch,
    #[error("expected {expected} neighbor traces, got {got}")]
    NeighborCount { expected: usize, got: usize },
    #[error("inflation must be finite and non-negative, got {0}")]
    Inflation(f64),
    #[error("topology mismatch: {0}")]
    Topology(String),
    #[error("subsystem {id}")]
    Stl {
        id: SubsystemId,
        #[source]
        source: StlError,
    },
}

/// The set of robustness traces that stay strictly inside a (possibly
/// inflated) funnel envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeEnvelope {
    subsystem: SubsystemId,
    encoding: Arc<TaskEncoding>,
    inflation: f64,
}

impl GuaranteeEnvelope {
    pub fn new(subsystem: SubsystemId, encoding: Arc<TaskEncoding>) -> Self {
        Self {
            subsystem,
            encoding,
            inflation: 0.0,
        }
    }

    pub fn subsystem(&self) -> SubsystemId {
        self.subsystem
    }

    pub fn encoding(&self) -> &Arc<TaskEncoding> {
        &self.encoding
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    /// `(rho_max - gamma(t) - eps, rho_max + eps)`
    pub fn bounds(&self, t: f64) -> (f64, f64) {
        let (lo, hi) = self.encoding.envelope(t);
        (lo - self.inflation, hi + self.inflation)
    }

    pub fn contains(&self, t: f64, rho: f64) -> bool {
        let (lo, hi) = self.bounds(t);
        lo < rho && rho < hi
    }

    /// Signed distance to the nearer boundary; positive inside.
    pub fn margin(&self, t: f64, rho: f64) -> f64 {
        let (lo, hi) = self.bounds(t);
        (rho - lo).min(hi - rho)
    }
}

/// Inflates both envelope bounds by `eps` in robustness-value space.
pub fn epsilon_expand(env: &GuaranteeEnvelope, eps: f64) -> Result<GuaranteeEnvelope, ContractError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(ContractError::Inflation(eps));
    }
    Ok(GuaranteeEnvelope {
        inflation: env.inflation + eps,
        ..env.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contract {
    pub subsystem: SubsystemId,
    /// One per neighbor, in the order the neighbors are stacked.
    pub assumptions: Vec<GuaranteeEnvelope>,
    pub guarantee: GuaranteeEnvelope,
}

impl Contract {
    /// Same contract with every assumption inflated by `eps`.
    pub fn expand_assumptions(&self, eps: f64) -> Result<Self, ContractError> {
        let assumptions = self
            .assumptions
            .iter()
            .map(|a| epsilon_expand(a, eps))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            assumptions,
            ..self.clone()
        })
    }

    /// Same contract with the guarantee inflated by `eps`.
    pub fn expand_guarantee(&self, eps: f64) -> Result<Self, ContractError> {
        Ok(Self {
            guarantee: epsilon_expand(&self.guarantee, eps)?,
            ..self.clone()
        })
    }
}

/// Assumptions are the neighbors' guarantees, guarantees the own envelope.
pub fn assemble_contracts(
    network: &Network,
    encodings: &BTreeMap<SubsystemId, Arc<TaskEncoding>>,
) -> Result<BTreeMap<SubsystemId, Contract>, ContractError> {
    let envelope = |id: SubsystemId| {
        encodings
            .get(&id)
            .map(|e| GuaranteeEnvelope::new(id, e.clone()))
            .ok_or(ContractError::MissingEncoding(id))
    };
    let mut out = BTreeMap::new();
    for s in network.subsystems() {
        let guarantee = envelope(s.id)?;
        let assumptions = s
            .neighbors
            .iter()
            .map(|&j| {
                if network.position(j).is_none() {
                    return Err(ContractError::DanglingNeighbor { from: s.id, to: j });
                }
                envelope(j)
            })
            .collect::<Result<_, _>>()?;
        out.insert(
            s.id,
            Contract {
                subsystem: s.id,
                assumptions,
                guarantee,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    WeakSatisfied,
    UniformStrongSatisfied { delta: f64 },
    /// The guarantee failed at `t` while the assumptions held on `[0, t]`.
    Violated { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatisfactionReport {
    pub subsystem: SubsystemId,
    pub verdict: Verdict,
    /// First time some assumption fails, and whose.
    pub assumption_failure: Option<(f64, SubsystemId)>,
    /// First time the guarantee fails.
    pub guarantee_failure: Option<f64>,
    /// Smallest signed distance of the own trace to the guarantee boundary.
    pub min_margin: f64,
    /// Per-sample signed distance of the own trace to the guarantee boundary.
    #[serde(skip)]
    pub margins: Vec<f64>,
}

impl SatisfactionReport {
    pub fn is_weak(&self) -> bool {
        !matches!(self.verdict, Verdict::Violated { .. })
    }

    pub fn is_uniform_strong(&self) -> bool {
        matches!(self.verdict, Verdict::UniformStrongSatisfied { .. })
    }
}

fn same_grid(a: &RobustnessTrace, b: &RobustnessTrace) -> bool {
    Arc::ptr_eq(a.shared_times(), b.shared_times()) || a.times() == b.times()
}

/// First failing indices of the assumptions and the guarantee.
struct Scan {
    assumption: Option<(usize, SubsystemId)>,
    guarantee: Option<usize>,
    margins: Vec<f64>,
}

fn scan(
    own: &RobustnessTrace,
    neighbors: &[&RobustnessTrace],
    c: &Contract,
) -> Result<Scan, ContractError> {
    if neighbors.len() != c.assumptions.len() {
        return Err(ContractError::NeighborCount {
            expected: c.assumptions.len(),
            got: neighbors.len(),
        });
    }
    if neighbors.iter().any(|tr| !same_grid(own, tr)) {
        return Err(ContractError::GridMismatch);
    }
    let times = own.times();
    let mut assumption = None;
    'outer: for (k, &t) in times.iter().enumerate() {
        for (a, tr) in c.assumptions.iter().zip(neighbors) {
            if !a.contains(t, tr.values()[k]) {
                assumption = Some((k, a.subsystem()));
                break 'outer;
            }
        }
    }
    let margins: Vec<f64> = times
        .iter()
        .zip(own.values())
        .map(|(&t, &rho)| c.guarantee.margin(t, rho))
        .collect();
    let guarantee = times
        .iter()
        .zip(own.values())
        .position(|(&t, &rho)| !c.guarantee.contains(t, rho));
    Ok(Scan {
        assumption,
        guarantee,
        margins,
    })
}

fn report(own: &RobustnessTrace, c: &Contract, s: Scan, verdict: Verdict) -> SatisfactionReport {
    let times = own.times();
    SatisfactionReport {
        subsystem: c.subsystem,
        verdict,
        assumption_failure: s.assumption.map(|(k, id)| (times[k], id)),
        guarantee_failure: s.guarantee.map(|k| times[k]),
        min_margin: s.margins.iter().copied().fold(f64::INFINITY, f64::min),
        margins: s.margins,
    }
}

/// Weak satisfaction: on every prefix where the assumptions hold, so does the guarantee.
pub fn check_weak(
    own: &RobustnessTrace,
    neighbors: &[&RobustnessTrace],
    c: &Contract,
) -> Result<SatisfactionReport, ContractError> {
    let s = scan(own, neighbors, c)?;
    let len = own.len();
    let a = s.assumption.map_or(len, |(k, _)| k);
    let verdict = match s.guarantee {
        Some(g) if g < a => Verdict::Violated { t: own.times()[g] },
        _ => Verdict::WeakSatisfied,
    };
    Ok(report(own, c, s, verdict))
}

/// Uniform-strong satisfaction with the largest grid-resolution `delta`.
///
/// With `a` the first index where an assumption fails and `g` the first
/// index where the guarantee fails (the trace length if none):
/// - `a = 0` (vacuous) or no failure at all: `delta` is the whole horizon;
/// - otherwise `delta = (g - a) dt`, and the verdict needs `g - a >= 1`.
pub fn check_uniform_strong(
    own: &RobustnessTrace,
    neighbors: &[&RobustnessTrace],
    c: &Contract,
) -> Result<SatisfactionReport, ContractError> {
    let s = scan(own, neighbors, c)?;
    let times = own.times();
    let len = own.len();
    let horizon = times[len - 1] - times[0];
    let a = s.assumption.map_or(len, |(k, _)| k);
    let g = s.guarantee.unwrap_or(len);
    let verdict = if g < a {
        Verdict::Violated { t: times[g] }
    } else if a == 0 || (a == len && g == len) {
        Verdict::UniformStrongSatisfied { delta: horizon }
    } else if g > a {
        // Both indices are valid grid positions or `len`; measure on the grid.
        let last = |k: usize| times[k.min(len) - 1];
        Verdict::UniformStrongSatisfied {
            delta: last(g) - last(a),
        }
    } else {
        Verdict::WeakSatisfied
    };
    Ok(report(own, c, s, verdict))
}

/// Checks every contract in parallel; results keyed by subsystem id.
pub fn check_all(
    contracts: &BTreeMap<SubsystemId, Contract>,
    traces: &BTreeMap<SubsystemId, RobustnessTrace>,
) -> Result<BTreeMap<SubsystemId, SatisfactionReport>, ContractError> {
    let items: Vec<(&SubsystemId, &Contract)> = contracts.iter().collect();
    let results: Vec<Result<(SubsystemId, SatisfactionReport), ContractError>> = items
        .par_iter()
        .map(|(&id, c)| {
            let own = traces.get(&id).ok_or(ContractError::MissingEncoding(id))?;
            let neighbors = c
                .assumptions
                .iter()
                .map(|a| {
                    traces
                        .get(&a.subsystem())
                        .ok_or(ContractError::MissingEncoding(a.subsystem()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((id, check_uniform_strong(own, &neighbors, c)?))
        })
        .collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionReport {
    /// Initial robustness strictly inside every guarantee envelope.
    pub initial_inside: bool,
    /// Every subsystem's report is uniform-strong.
    pub uniform_strong: bool,
    /// Neighbor guarantees are included in the corresponding assumptions.
    pub assumptions_cover_guarantees: bool,
    pub findings: Vec<String>,
}

impl CompositionReport {
    pub fn holds(&self) -> bool {
        self.initial_inside && self.uniform_strong && self.assumptions_cover_guarantees
    }
}

/// `guarantee` is contained in `assumption` (as sets of traces).
fn included(guarantee: &GuaranteeEnvelope, assumption: &GuaranteeEnvelope, grid: &[f64]) -> bool {
    let same = Arc::ptr_eq(guarantee.encoding(), assumption.encoding())
        || guarantee.encoding() == assumption.encoding();
    if same && assumption.inflation() >= guarantee.inflation() {
        return true;
    }
    grid.iter().all(|&t| {
        let (glo, ghi) = guarantee.bounds(t);
        let (alo, ahi) = assumption.bounds(t);
        alo <= glo && ghi <= ahi
    })
}

/// Checks the three conditions under which the local contracts compose.
///
/// `grid` is used for the pointwise inclusion fallback when assumptions are
/// not structurally identical to the neighbor guarantees.
pub fn check_composition(
    contracts: &BTreeMap<SubsystemId, Contract>,
    network: &Network,
    initial_states: &BTreeMap<SubsystemId, Vec<f64>>,
    reports: &BTreeMap<SubsystemId, SatisfactionReport>,
    grid: &[f64],
) -> Result<CompositionReport, ContractError> {
    let ids: Vec<SubsystemId> = network.ids().collect();
    if contracts.len() != ids.len() || ids.iter().any(|id| !contracts.contains_key(id)) {
        return Err(ContractError::Topology(
            "contract ids differ from network subsystems".into(),
        ));
    }
    let mut findings = Vec::new();
    let mut initial_inside = true;
    let mut uniform_strong = true;
    let mut covered = true;

    for s in network.subsystems() {
        let c = &contracts[&s.id];
        let assumed: Vec<SubsystemId> = c.assumptions.iter().map(|a| a.subsystem()).collect();
        if assumed != s.neighbors {
            return Err(ContractError::Topology(format!(
                "contract {} assumes {:?} but neighbors are {:?}",
                s.id, assumed, s.neighbors
            )));
        }

        let x0 = initial_states
            .get(&s.id)
            .ok_or_else(|| ContractError::Topology(format!("no initial state for {}", s.id)))?;
        let rho0 = c
            .guarantee
            .encoding()
            .psi()
            .rho(x0)
            .map_err(|source| ContractError::Stl { id: s.id, source })?;
        if !c.guarantee.contains(0.0, rho0) {
            initial_inside = false;
            let (lo, hi) = c.guarantee.bounds(0.0);
            findings.push(format!(
                "subsystem {}: initial robustness {rho0} not in ({lo}, {hi})",
                s.id
            ));
        }

        match reports.get(&s.id) {
            Some(r) if r.is_uniform_strong() => {}
            Some(r) => {
                uniform_strong = false;
                findings.push(format!("subsystem {}: verdict {:?}", s.id, r.verdict));
            }
            None => {
                uniform_strong = false;
                findings.push(format!("subsystem {}: no satisfaction report", s.id));
            }
        }

        for a in &c.assumptions {
            let g = &contracts[&a.subsystem()].guarantee;
            if !included(g, a, grid) {
                covered = false;
                findings.push(format!(
                    "subsystem {}: guarantee of {} not inside its assumption",
                    s.id,
                    a.subsystem()
                ));
            }
        }
    }
    Ok(CompositionReport {
        initial_inside,
        uniform_strong,
        assumptions_cover_guarantees: covered,
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funnel::Funnel;
    use crate::sim::{rooms, RoomParams};
    use crate::stl::{Interval, Predicate, StateFormula, TemporalFormula};
    use proptest::prelude::*;

    /// Constant envelope (0, 1) for a scalar identity predicate.
    fn enc() -> Arc<TaskEncoding> {
        let psi = StateFormula::pred(Predicate::affine("x", vec![1.0], 0.0, vec![0]).unwrap());
        let phi = TemporalFormula::always(Interval::new(0.0, 1.0).unwrap(), psi).unwrap();
        Arc::new(TaskEncoding::new(phi, Funnel::new(1.0, 1.0, 0.0).unwrap(), 1.0, 0.1, 0.0).unwrap())
    }

    fn pair_contract() -> Contract {
        Contract {
            subsystem: SubsystemId(1),
            assumptions: vec![GuaranteeEnvelope::new(SubsystemId(2), enc())],
            guarantee: GuaranteeEnvelope::new(SubsystemId(1), enc()),
        }
    }

    fn grid(n: usize) -> Arc<[f64]> {
        (0..n).map(|k| k as f64 * 0.5).collect::<Vec<_>>().into()
    }

    fn trace(times: &Arc<[f64]>, v: Vec<f64>) -> RobustnessTrace {
        RobustnessTrace::new(times.clone(), v).unwrap()
    }

    #[test]
    fn two_cycle_assumes_each_other() {
        let net = rooms(3, RoomParams::default()).unwrap();
        let encs = net.ids().map(|id| (id, enc())).collect();
        let cs = assemble_contracts(&net, &encs).unwrap();
        let c1 = &cs[&SubsystemId(1)];
        assert_eq!(
            c1.assumptions.iter().map(|a| a.subsystem()).collect::<Vec<_>>(),
            vec![SubsystemId(3), SubsystemId(2)]
        );
        assert_eq!(c1.assumptions[1], cs[&SubsystemId(2)].guarantee);
    }

    #[test]
    fn missing_encoding_errors() {
        let net = rooms(3, RoomParams::default()).unwrap();
        let encs: BTreeMap<_, _> = [(SubsystemId(1), enc())].into();
        assert!(matches!(
            assemble_contracts(&net, &encs),
            Err(ContractError::MissingEncoding(_))
        ));
    }

    #[test]
    fn vacuous_when_assumptions_fail_at_start() {
        let t = grid(6);
        let own = trace(&t, vec![2.0; 6]);
        let nb = trace(&t, vec![5.0; 6]);
        let r = check_weak(&own, &[&nb], &pair_contract()).unwrap();
        assert_eq!(r.verdict, Verdict::WeakSatisfied);
        let r = check_uniform_strong(&own, &[&nb], &pair_contract()).unwrap();
        assert_eq!(r.verdict, Verdict::UniformStrongSatisfied { delta: 2.5 });
    }

    #[test]
    fn guarantee_exit_under_valid_assumptions() {
        let t = grid(6);
        let own = trace(&t, vec![0.5, 0.5, 0.5, 1.5, 0.5, 0.5]);
        let nb = trace(&t, vec![0.5; 6]);
        let r = check_weak(&own, &[&nb], &pair_contract()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated { t: 1.5 });
        assert_eq!(r.guarantee_failure, Some(1.5));
        assert!(r.margins[3] < 0.0);
    }

    #[test]
    fn delta_is_remaining_horizon() {
        let t = grid(6);
        let own = trace(&t, vec![0.5; 6]);
        let nb = trace(&t, vec![0.5, 0.5, 1.5, 1.5, 1.5, 1.5]);
        let r = check_uniform_strong(&own, &[&nb], &pair_contract()).unwrap();
        // Assumptions valid through t = 0.5; guarantee through t = 2.5.
        assert_eq!(r.verdict, Verdict::UniformStrongSatisfied { delta: 2.0 });
        assert_eq!(r.assumption_failure, Some((1.0, SubsystemId(2))));
    }

    #[test]
    fn simultaneous_failure_is_not_uniform_strong() {
        let t = grid(6);
        let own = trace(&t, vec![0.5, 0.5, 1.5, 1.5, 1.5, 1.5]);
        let nb = trace(&t, vec![0.5, 0.5, 1.5, 1.5, 1.5, 1.5]);
        let r = check_uniform_strong(&own, &[&nb], &pair_contract()).unwrap();
        assert_eq!(r.verdict, Verdict::WeakSatisfied);
        assert!(r.is_weak() && !r.is_uniform_strong());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let own = trace(&grid(6), vec![0.5; 6]);
        let other: Arc<[f64]> = (0..6).map(|k| k as f64).collect::<Vec<_>>().into();
        let nb = trace(&other, vec![0.5; 6]);
        assert_eq!(
            check_weak(&own, &[&nb], &pair_contract()).unwrap_err(),
            ContractError::GridMismatch
        );
    }

    #[test]
    fn expansion() {
        let g = GuaranteeEnvelope::new(SubsystemId(1), enc());
        assert_eq!(epsilon_expand(&g, 0.0).unwrap(), g);
        assert_eq!(epsilon_expand(&g, 0.1).unwrap().bounds(0.0).1, 1.1);
        assert!(epsilon_expand(&g, -0.1).is_err());

        // Trace 0.05 above rho_max: only the expanded guarantee accepts it.
        let t = grid(4);
        let own = trace(&t, vec![0.5, 1.05, 0.5, 0.5]);
        let nb = trace(&t, vec![0.5; 4]);
        let c = pair_contract();
        assert!(!check_weak(&own, &[&nb], &c).unwrap().is_weak());
        assert!(check_weak(&own, &[&nb], &c.expand_guarantee(0.1).unwrap()).unwrap().is_weak());
    }

    #[test]
    fn composition_conditions() {
        let net = rooms(3, RoomParams::default()).unwrap();
        let encs = net.ids().map(|id| (id, enc())).collect();
        let cs = assemble_contracts(&net, &encs).unwrap();
        let t = grid(5);
        let traces: BTreeMap<_, _> = net.ids().map(|id| (id, trace(&t, vec![0.5; 5]))).collect();
        let reports = check_all(&cs, &traces).unwrap();
        let x0: BTreeMap<_, _> = net.ids().map(|id| (id, vec![0.5])).collect();
        let r = check_composition(&cs, &net, &x0, &reports, &t).unwrap();
        assert!(r.holds(), "{r:?}");

        // rho(x0) = rho_max breaks the strict initial condition.
        let mut bad = x0.clone();
        bad.insert(SubsystemId(2), vec![1.0]);
        let r = check_composition(&cs, &net, &bad, &reports, &t).unwrap();
        assert!(!r.initial_inside && r.uniform_strong && r.assumptions_cover_guarantees);

        // A tighter assumption than the neighbor guarantee fails inclusion.
        let mut tight = cs.clone();
        let c = tight.get_mut(&SubsystemId(1)).unwrap();
        let narrow = Arc::new(
            TaskEncoding::new(
                enc().phi().clone(),
                Funnel::new(0.5, 0.5, 0.0).unwrap(),
                1.0,
                0.1,
                0.0,
            )
            .unwrap(),
        );
        c.assumptions[0] = GuaranteeEnvelope::new(SubsystemId(3), narrow);
        let r = check_composition(&tight, &net, &x0, &reports, &t).unwrap();
        assert!(!r.assumptions_cover_guarantees);
    }

    fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![3 => 0.05f64..0.95, 1 => -0.5f64..1.5], n)
    }

    proptest! {
        #[test]
        fn uniform_strong_implies_weak(own in values(30), nb in values(30)) {
            let t = grid(30);
            let (own, nb) = (trace(&t, own), trace(&t, nb));
            let c = pair_contract();
            let us = check_uniform_strong(&own, &[&nb], &c).unwrap();
            let weak = check_weak(&own, &[&nb], &c).unwrap();
            if us.is_uniform_strong() {
                prop_assert!(weak.is_weak());
            }
        }

        #[test]
        fn vacuity(own in values(20), nb in values(20)) {
            let t = grid(20);
            let mut nb = nb;
            nb[0] = 3.0;
            let r = check_weak(&trace(&t, own), &[&trace(&t, nb)], &pair_contract()).unwrap();
            prop_assert!(r.is_weak());
        }

        // Inflating assumptions admits more prefixes, so passing with a
        // larger inflation implies passing with any smaller one.
        #[test]
        fn assumption_inflation_monotone(own in values(20), nb in values(20), e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let t = grid(20);
            let (own, nb) = (trace(&t, own), trace(&t, nb));
            let c = pair_contract();
            let pass = |e: f64| check_weak(&own, &[&nb], &c.expand_assumptions(e).unwrap()).unwrap().is_weak();
            if pass(hi) {
                prop_assert!(pass(lo));
            }
        }

        // Inflating the guarantee can only help.
        #[test]
        fn guarantee_inflation_monotone(own in values(20), nb in values(20), e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let t = grid(20);
            let (own, nb) = (trace(&t, own), trace(&t, nb));
            let c = pair_contract();
            let pass = |e: f64| check_weak(&own, &[&nb], &c.expand_guarantee(e).unwrap()).unwrap().is_weak();
            if pass(lo) {
                prop_assert!(pass(hi));
            }
        }
    }
}
