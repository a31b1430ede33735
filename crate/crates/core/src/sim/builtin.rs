use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use super::{Dynamics, Network, SimError, Subsystem, SubsystemId};

/// Heat-exchange parameters of the circular building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoomParams {
    pub alpha: f64,
    pub alpha_e: f64,
    pub alpha_h: f64,
    pub t_e: f64,
    pub t_h: f64,
}

impl Default for RoomParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            alpha_e: 0.008,
            alpha_h: 0.0036,
            t_e: -1.0,
            t_h: 50.0,
        }
    }
}

/// One room: `T' = (-2a - a_e) T + a (T_prev + T_next) + a_h (T_h - T) v + a_e T_e`.
///
/// The valve ratio `v` is the input. Writing the heater term as
/// `a_h (T_h - T) v` keeps the model control-affine with `g(T) = a_h (T_h - T)`.
#[derive(Debug, Clone)]
pub struct RoomDynamics {
    params: RoomParams,
}

impl RoomDynamics {
    pub fn new(params: RoomParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &RoomParams {
        &self.params
    }
}

impl Dynamics for RoomDynamics {
    fn state_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn internal_dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        out[0] = (-2.0 * p.alpha - p.alpha_e) * x[0] + p.alpha_e * p.t_e;
    }

    fn input_matrix(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.params.alpha_h * (self.params.t_h - x[0]);
    }

    fn coupling(&self, w: &[f64], out: &mut [f64]) {
        out[0] = self.params.alpha * (w[0] + w[1]);
    }
}

/// Ring of `n >= 3` rooms, ids `1..=n`; room `i` sees `[i-1, i+1]` (cyclic).
pub fn rooms(n: usize, params: RoomParams) -> Result<Network, SimError> {
    if n < 3 {
        return Err(SimError::Model(format!("room ring needs at least 3 rooms, got {n}")));
    }
    let dynamics: Arc<dyn Dynamics> = Arc::new(RoomDynamics::new(params));
    let id = |k: usize| SubsystemId(k as u32);
    let subsystems = (1..=n)
        .map(|i| {
            let prev = if i == 1 { n } else { i - 1 };
            let next = if i == n { 1 } else { i + 1 };
            Subsystem::new(id(i), dynamics.clone(), vec![id(prev), id(next)])
        })
        .collect();
    Network::new(subsystems)
}

/// 19 degrees in odd rooms, 25 in even rooms.
pub fn room_initial_states(n: usize) -> BTreeMap<SubsystemId, Vec<f64>> {
    (1..=n)
        .map(|i| {
            let t = if i % 2 == 1 { 19.0 } else { 25.0 };
            (SubsystemId(i as u32), vec![t])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    pub wheel_radius: f64,
    pub body_radius: f64,
    /// Consensus coupling gain.
    pub k: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            wheel_radius: 0.02,
            body_radius: 0.2,
            k: 0.1,
        }
    }
}

impl RobotParams {
    /// Wheel geometry matrix `B`.
    pub fn geometry(&self) -> Matrix3<f64> {
        let (c, s, l) = (FRAC_PI_6.cos(), FRAC_PI_6.sin(), self.body_radius);
        Matrix3::new(0.0, c, -c, -1.0, s, -s, l, l, l)
    }
}

/// Three-wheel omnidirectional robot with consensus coupling:
/// `x' = R(x_3) (B^T)^{-1} R_w u - k sum_j (x - x_j)`.
#[derive(Debug, Clone)]
pub struct RobotDynamics {
    params: RobotParams,
    neighbors: usize,
    // (B^T)^{-1} R_w
    wheel_map: Matrix3<f64>,
}

impl RobotDynamics {
    pub fn new(params: RobotParams, neighbors: usize) -> Result<Self, SimError> {
        let inv = params
            .geometry()
            .transpose()
            .try_inverse()
            .ok_or_else(|| SimError::Model("robot wheel geometry matrix is singular".into()))?;
        Ok(Self {
            params,
            neighbors,
            wheel_map: inv * params.wheel_radius,
        })
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }
}

impl Dynamics for RobotDynamics {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        3
    }

    fn internal_dim(&self) -> usize {
        3 * self.neighbors
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let gain = -self.params.k * self.neighbors as f64;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = gain * xi;
        }
    }

    fn input_matrix(&self, x: &[f64], out: &mut [f64]) {
        let (s, c) = x[2].sin_cos();
        let rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        let g = rot * self.wheel_map;
        for r in 0..3 {
            for col in 0..3 {
                out[3 * r + col] = g[(r, col)];
            }
        }
    }

    fn coupling(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for block in w.chunks_exact(3) {
            for (o, v) in out.iter_mut().zip(block) {
                *o += self.params.k * v;
            }
        }
    }
}

/// Five robots in a directed ring: robot `i` sees `i+1`, robot 5 sees 1.
pub fn robots(params: RobotParams) -> Result<Network, SimError> {
    let dynamics: Arc<dyn Dynamics> = Arc::new(RobotDynamics::new(params, 1)?);
    let subsystems = (1..=5u32)
        .map(|i| {
            let next = if i == 5 { 1 } else { i + 1 };
            Subsystem::new(SubsystemId(i), dynamics.clone(), vec![SubsystemId(next)])
        })
        .collect();
    Network::new(subsystems)
}

pub fn robot_initial_states() -> BTreeMap<SubsystemId, Vec<f64>> {
    [
        [0.1, 0.6, FRAC_PI_4],
        [0.4, 1.1, -FRAC_PI_4],
        [1.05, 0.8, -FRAC_PI_4],
        [1.0, 0.2, FRAC_PI_4],
        [0.3, 0.1, 0.0],
    ]
    .into_iter()
    .enumerate()
    .map(|(k, x)| (SubsystemId(k as u32 + 1), x.to_vec()))
    .collect()
}

/// `x' = A x + B u + H w + c` with constant matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearDynamics {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    c: Vec<f64>,
}

impl LinearDynamics {
    /// `h` may have zero columns (no neighbors); `c` may be empty (zero).
    pub fn new(
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        h: Vec<Vec<f64>>,
        c: Vec<f64>,
    ) -> Result<Self, SimError> {
        let n = a.len();
        let bad = |what: &str| Err(SimError::Model(format!("linear model: {what}")));
        if n == 0 || a.iter().any(|r| r.len() != n) {
            return bad("A must be square and non-empty");
        }
        if b.len() != n || b[0].is_empty() || b.iter().any(|r| r.len() != b[0].len()) {
            return bad("B must have n rows of equal, non-zero length");
        }
        let h = if h.is_empty() { vec![Vec::new(); n] } else { h };
        if h.len() != n || h.iter().any(|r| r.len() != h[0].len()) {
            return bad("H must have n rows of equal length");
        }
        let c = if c.is_empty() { vec![0.0; n] } else { c };
        if c.len() != n {
            return bad("c must have n entries");
        }
        let finite = a.iter().chain(&b).chain(&h).flatten().chain(&c).all(|v| v.is_finite());
        if !finite {
            return bad("entries must be finite");
        }
        Ok(Self { a, b, h, c })
    }

    /// Smallest eigenvalue of `B B^T`; positive iff the input matrix has full row rank.
    pub fn input_gram_min_eigenvalue(&self) -> f64 {
        let n = self.a.len();
        let m = self.b[0].len();
        let b = DMatrix::from_fn(n, m, |r, c| self.b[r][c]);
        (&b * b.transpose()).symmetric_eigenvalues().min()
    }
}

impl Dynamics for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.a.len()
    }

    fn input_dim(&self) -> usize {
        self.b[0].len()
    }

    fn internal_dim(&self) -> usize {
        self.h[0].len()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for ((o, row), c) in out.iter_mut().zip(&self.a).zip(&self.c) {
            *o = row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + c;
        }
    }

    fn input_matrix(&self, _x: &[f64], out: &mut [f64]) {
        for (dst, row) in out.chunks_exact_mut(self.input_dim()).zip(&self.b) {
            dst.copy_from_slice(row);
        }
    }

    fn coupling(&self, w: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.h) {
            *o = row.iter().zip(w).map(|(h, w)| h * w).sum();
        }
    }
}
