//! Subsystems, interconnections, built-in case-study models, and the
//! fixed-step simulator.

mod builtin;
mod csv;
mod integrate;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControlError;

pub use builtin::{
    robot_initial_states, room_initial_states, rooms, robots, LinearDynamics, RobotDynamics,
    RobotParams, RoomDynamics, RoomParams,
};
pub use csv::{read_csv, write_csv, CsvTable};
pub use integrate::{
    derivative, simulate, ClampEvent, Integrator, SimConfig, Trajectory, Violation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SubsystemId(pub u32);

// Accepts `3` and `"3"`: JSON object keys are always strings, and buffered
// (untagged) contexts do not coerce them back to integers.
impl<'de> Deserialize<'de> for SubsystemId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = SubsystemId;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a subsystem id (non-negative integer)")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Self::Value, E> {
                u32::try_from(v).map(SubsystemId).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Self::Value, E> {
                u32::try_from(v).map(SubsystemId).map_err(E::custom)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Self::Value, E> {
                v.parse().map(SubsystemId).map_err(E::custom)
            }
        }
        d.deserialize_any(Visitor)
    }
}

impl fmt::Display for SubsystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("subsystem {0} appears twice")]
    DuplicateId(SubsystemId),
    #[error("subsystem {from} lists unknown neighbor {to}")]
    DanglingNeighbor { from: SubsystemId, to: SubsystemId },
    #[error("subsystem {id}: internal input dimension {declared} != stacked neighbor dimension {stacked}")]
    InternalDim {
        id: SubsystemId,
        declared: usize,
        stacked: usize,
    },
    #[error("model parameter error: {0}")]
    Model(String),
    #[error("expected {expected} values for {what}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("subsystem {id}: initial robustness {rho} outside funnel ({lower}, {upper})")]
    InitialOutsideFunnel {
        id: SubsystemId,
        rho: f64,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite state in subsystem {id} at t = {t}; the closed loop is stiff near the funnel walls, try more `substeps` or a smaller `dt`")]
    NonFinite { id: SubsystemId, t: f64 },
    #[error("subsystem {id}: g g^T not positive definite at t = {t} (lambda_min = {lambda_min:e})")]
    InputMatrixDegenerate {
        id: SubsystemId,
        t: f64,
        lambda_min: f64,
    },
    #[error("bad simulation config: {0}")]
    Config(String),
    #[error("subsystem {id}")]
    Control {
        id: SubsystemId,
        #[source]
        source: ControlError,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<::csv::Error> for SimError {
    fn from(e: ::csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                ::csv::ErrorKind::Io(io) => SimError::Io(io),
                _ => unreachable!("checked to be an io error"),
            }
        } else {
            SimError::Csv(e.to_string())
        }
    }
}

/// Control-affine subsystem dynamics `x' = f(x) + g(x) u + h(w)`.
///
/// Implementations must be locally Lipschitz; the simulator cannot check this.
pub trait Dynamics: fmt::Debug + Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Dimension of `w`, the stacked neighbor states.
    fn internal_dim(&self) -> usize;
    /// Writes `f(x)`.
    fn drift(&self, x: &[f64], out: &mut [f64]);
    /// Writes `g(x)` as an `n x m` row-major matrix.
    fn input_matrix(&self, x: &[f64], out: &mut [f64]);
    /// Writes `h(w)`.
    fn coupling(&self, w: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct Subsystem {
    pub id: SubsystemId,
    pub dynamics: Arc<dyn Dynamics>,
    /// Order defines how `w` is stacked.
    pub neighbors: Vec<SubsystemId>,
}

impl Subsystem {
    pub fn new(id: SubsystemId, dynamics: Arc<dyn Dynamics>, neighbors: Vec<SubsystemId>) -> Self {
        Self {
            id,
            dynamics,
            neighbors,
        }
    }

    pub fn n(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn m(&self) -> usize {
        self.dynamics.input_dim()
    }

    pub fn p(&self) -> usize {
        self.dynamics.internal_dim()
    }
}

/// Interconnection of subsystems whose internal inputs are exactly the
/// stacked states of their neighbors.
#[derive(Debug, Clone)]
pub struct Network {
    subsystems: Vec<Subsystem>,
    index: BTreeMap<SubsystemId, usize>,
    offsets: Vec<usize>,
    neighbor_index: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self, SimError> {
        let mut index = BTreeMap::new();
        for (k, s) in subsystems.iter().enumerate() {
            if index.insert(s.id, k).is_some() {
                return Err(SimError::DuplicateId(s.id));
            }
        }
        let mut offsets = Vec::with_capacity(subsystems.len() + 1);
        let mut acc = 0;
        for s in &subsystems {
            offsets.push(acc);
            acc += s.n();
        }
        offsets.push(acc);
        let mut neighbor_index = Vec::with_capacity(subsystems.len());
        for s in &subsystems {
            let mut idx = Vec::with_capacity(s.neighbors.len());
            let mut stacked = 0;
            for j in &s.neighbors {
                let k = *index.get(j).ok_or(SimError::DanglingNeighbor { from: s.id, to: *j })?;
                stacked += subsystems[k].n();
                idx.push(k);
            }
            if stacked != s.p() {
                return Err(SimError::InternalDim {
                    id: s.id,
                    declared: s.p(),
                    stacked,
                });
            }
            neighbor_index.push(idx);
        }
        Ok(Self {
            subsystems,
            index,
            offsets,
            neighbor_index,
        })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = SubsystemId> + '_ {
        self.subsystems.iter().map(|s| s.id)
    }

    pub fn position(&self, id: SubsystemId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn get(&self, id: SubsystemId) -> Option<&Subsystem> {
        self.position(id).map(|k| &self.subsystems[k])
    }

    /// Total stacked state dimension.
    pub fn state_dim(&self) -> usize {
        self.offsets[self.subsystems.len()]
    }

    /// Range of subsystem `k` (by position) inside the stacked state.
    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Positions of the neighbors of subsystem `k`, in stacking order.
    pub fn neighbor_positions(&self, k: usize) -> &[usize] {
        &self.neighbor_index[k]
    }

    /// Stacks `w_k` from the full state.
    pub fn gather_internal(&self, k: usize, x_all: &[f64], w: &mut Vec<f64>) {
        w.clear();
        for &j in &self.neighbor_index[k] {
            w.extend_from_slice(&x_all[self.range(j)]);
        }
    }

    /// Stacks per-subsystem states (keyed by id) into network order.
    pub fn stack(&self, states: &BTreeMap<SubsystemId, Vec<f64>>) -> Result<Vec<f64>, SimError> {
        let mut out = Vec::with_capacity(self.state_dim());
        for s in &self.subsystems {
            let x = states.get(&s.id).ok_or_else(|| SimError::Dimension {
                what: format!("initial state of subsystem {}", s.id),
                expected: s.n(),
                got: 0,
            })?;
            if x.len() != s.n() {
                return Err(SimError::Dimension {
                    what: format!("initial state of subsystem {}", s.id),
                    expected: s.n(),
                    got: x.len(),
                });
            }
            out.extend_from_slice(x);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_topology_and_offsets() {
        let net = rooms(4, RoomParams::default()).unwrap();
        assert_eq!(net.len(), 4);
        for (k, s) in net.subsystems().iter().enumerate() {
            assert_eq!(s.neighbors.len(), 2);
            assert_eq!(net.range(k), k..k + 1);
        }
        assert_eq!(net.subsystems()[0].neighbors, vec![SubsystemId(4), SubsystemId(2)]);
        assert_eq!(net.subsystems()[3].neighbors, vec![SubsystemId(3), SubsystemId(1)]);
    }

    #[test]
    fn dangling_and_duplicate_rejected() {
        let d: Arc<dyn Dynamics> = Arc::new(RoomDynamics::new(RoomParams::default()));
        let bad = Network::new(vec![Subsystem::new(SubsystemId(1), d.clone(), vec![SubsystemId(9), SubsystemId(1)])]);
        assert!(matches!(bad, Err(SimError::DanglingNeighbor { .. })));
        let dup = Network::new(vec![
            Subsystem::new(SubsystemId(1), d.clone(), vec![SubsystemId(1), SubsystemId(1)]),
            Subsystem::new(SubsystemId(1), d, vec![SubsystemId(1), SubsystemId(1)]),
        ]);
        assert!(matches!(dup, Err(SimError::DuplicateId(_))));
    }

    #[test]
    fn internal_dim_must_match() {
        let d: Arc<dyn Dynamics> = Arc::new(RoomDynamics::new(RoomParams::default()));
        let net = Network::new(vec![
            Subsystem::new(SubsystemId(1), d.clone(), vec![SubsystemId(2)]),
            Subsystem::new(SubsystemId(2), d, vec![SubsystemId(1), SubsystemId(1)]),
        ]);
        assert!(matches!(net, Err(SimError::InternalDim { .. })));
    }
}
