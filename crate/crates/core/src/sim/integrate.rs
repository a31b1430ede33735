use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{Network, SimError, SubsystemId};
use crate::controller::{ClampSide, ControlLaw, ErrorState};
use crate::funnel::TaskEncoding;
use crate::stl::RobustnessTrace;

const GRAM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub parallel: bool,
    /// Internal integration steps per output interval. The trajectory is
    /// still recorded on the `dt` grid; the controller is re-evaluated at
    /// every internal stage.
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            integrator: Integrator::Rk4,
            parallel: false,
            substeps: 1,
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    /// Number of steps; the grid has `steps + 1` points `k * dt`.
    pub fn steps(&self) -> Result<usize, SimError> {
        if self.substeps == 0 {
            return Err(SimError::Config("substeps must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(SimError::Config(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            )));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(SimError::Config(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// The normalized error left the open interval `(-1, 0)` and was clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampEvent {
    pub subsystem: SubsystemId,
    pub t: f64,
    pub side: ClampSide,
    pub e_hat: f64,
}

/// A grid point where the robustness is not strictly inside its envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub subsystem: SubsystemId,
    pub t: f64,
    pub rho: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Uniformly sampled closed-loop run of a network.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Arc<[f64]>,
    ids: Vec<SubsystemId>,
    dims: Vec<(usize, usize)>,
    states: Vec<Vec<f64>>,
    inputs: Vec<Vec<f64>>,
    rho: Vec<RobustnessTrace>,
    encodings: Vec<Arc<TaskEncoding>>,
    clamp_events: Vec<ClampEvent>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn ids(&self) -> &[SubsystemId] {
        &self.ids
    }

    pub fn position(&self, id: SubsystemId) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }

    /// `(n, m)` of subsystem at position `k`.
    pub fn dims(&self, k: usize) -> (usize, usize) {
        self.dims[k]
    }

    pub fn state(&self, k: usize, step: usize) -> &[f64] {
        let n = self.dims[k].0;
        &self.states[k][step * n..(step + 1) * n]
    }

    pub fn input(&self, k: usize, step: usize) -> &[f64] {
        let m = self.dims[k].1;
        &self.inputs[k][step * m..(step + 1) * m]
    }

    pub fn rho(&self, k: usize) -> &RobustnessTrace {
        &self.rho[k]
    }

    pub fn encoding(&self, k: usize) -> &Arc<TaskEncoding> {
        &self.encodings[k]
    }

    pub fn envelope(&self, k: usize, step: usize) -> (f64, f64) {
        self.encodings[k].envelope(self.times[step])
    }

    pub fn clamp_events(&self) -> &[ClampEvent] {
        &self.clamp_events
    }

    /// Stacked network state at a grid point.
    pub fn stacked_state(&self, step: usize) -> Vec<f64> {
        (0..self.ids.len())
            .flat_map(|k| self.state(k, step).iter().copied())
            .collect()
    }

    /// Every grid point where some robustness trace leaves its envelope.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (k, id) in self.ids.iter().enumerate() {
            for (step, (&t, &rho)) in self.times.iter().zip(self.rho[k].values()).enumerate() {
                let (lower, upper) = self.envelope(k, step);
                if !(lower < rho && rho < upper) {
                    out.push(Violation {
                        subsystem: *id,
                        t,
                        rho,
                        lower,
                        upper,
                    });
                }
            }
        }
        out
    }
}

fn input_offsets(network: &Network) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(network.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for s in network.subsystems() {
        acc += s.m();
        offsets.push(acc);
    }
    offsets
}

type Buf = SmallVec<[f64; 16]>;

/// `x_k' = f(x_k) + g(x_k) u_k + h(w_k)` for the subsystem at position `k`.
fn subsystem_rate(
    network: &Network,
    law: &ControlLaw,
    k: usize,
    x_all: &[f64],
    t: f64,
    out: &mut [f64],
    u: &mut [f64],
) -> Result<ErrorState, SimError> {
    let s = &network.subsystems()[k];
    let model = s.dynamics.as_ref();
    let x = &x_all[network.range(k)];
    let es = law
        .control_into(model, x, t, u)
        .map_err(|source| SimError::Control { id: s.id, source })?;

    let (n, m) = (s.n(), s.m());
    let mut w: Buf = SmallVec::new();
    for &j in network.neighbor_positions(k) {
        w.extend_from_slice(&x_all[network.range(j)]);
    }
    let mut h: Buf = SmallVec::from_elem(0.0, n);
    model.coupling(&w, &mut h);
    let mut g: Buf = SmallVec::from_elem(0.0, n * m);
    model.input_matrix(x, &mut g);
    model.drift(x, out);
    for i in 0..n {
        let gu: f64 = (0..m).map(|j| g[i * m + j] * u[j]).sum();
        out[i] += gu + h[i];
    }
    Ok(es)
}

/// Splits `buf` into consecutive chunks at `offsets`.
fn split_chunks<'a>(mut buf: &'a mut [f64], offsets: &[usize]) -> Vec<&'a mut [f64]> {
    let mut chunks = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = buf.split_at_mut(w[1] - w[0]);
        chunks.push(head);
        buf = tail;
    }
    chunks
}

struct Stage<'a> {
    network: &'a Network,
    laws: &'a [ControlLaw],
    state_offsets: Vec<usize>,
    input_offsets: Vec<usize>,
    parallel: bool,
}

impl Stage<'_> {
    /// Writes the stacked derivative and inputs; returns per-subsystem error states.
    fn eval(
        &self,
        x_all: &[f64],
        t: f64,
        out: &mut [f64],
        inputs: &mut [f64],
    ) -> Result<Vec<ErrorState>, SimError> {
        let outs = split_chunks(out, &self.state_offsets);
        let us = split_chunks(inputs, &self.input_offsets);
        let work = |(k, (o, u)): (usize, (&mut [f64], &mut [f64]))| {
            subsystem_rate(self.network, &self.laws[k], k, x_all, t, o, u)
        };
        // Each subsystem's arithmetic is independent of scheduling, so the
        // parallel and serial paths produce identical bits.
        let results: Vec<Result<ErrorState, SimError>> = if self.parallel {
            outs.into_par_iter()
                .zip(us.into_par_iter())
                .enumerate()
                .with_min_len(32)
                .map(work)
                .collect()
        } else {
            outs.into_iter().zip(us).enumerate().map(work).collect()
        };
        results.into_iter().collect()
    }
}

fn check_laws(network: &Network, laws: &[ControlLaw]) -> Result<(), SimError> {
    if laws.len() != network.len() {
        return Err(SimError::Config(format!(
            "{} control laws for {} subsystems",
            laws.len(),
            network.len()
        )));
    }
    for (s, law) in network.subsystems().iter().zip(laws) {
        if s.id != law.subsystem() {
            return Err(SimError::Config(format!(
                "control law for {} placed at subsystem {}",
                law.subsystem(),
                s.id
            )));
        }
    }
    Ok(())
}

/// Stacked closed-loop derivative at `(x_all, t)`.
pub fn derivative(
    network: &Network,
    laws: &[ControlLaw],
    x_all: &[f64],
    t: f64,
) -> Result<Vec<f64>, SimError> {
    check_laws(network, laws)?;
    if x_all.len() != network.state_dim() {
        return Err(SimError::Dimension {
            what: "stacked state".into(),
            expected: network.state_dim(),
            got: x_all.len(),
        });
    }
    let stage = Stage {
        network,
        laws,
        state_offsets: (0..=network.len())
            .map(|k| if k == network.len() { network.state_dim() } else { network.range(k).start })
            .collect(),
        input_offsets: input_offsets(network),
        parallel: false,
    };
    let mut out = vec![0.0; x_all.len()];
    let mut u = vec![0.0; *stage.input_offsets.last().unwrap_or(&0)];
    stage.eval(x_all, t, &mut out, &mut u)?;
    Ok(out)
}

fn min_gram_eigenvalue(g: &[f64], n: usize, m: usize) -> f64 {
    if n == 1 {
        return g.iter().map(|v| v * v).sum();
    }
    let g = DMatrix::from_row_slice(n, m, g);
    (&g * g.transpose()).symmetric_eigenvalues().min()
}

/// Fixed-step closed-loop simulation of `network` under `laws` (one per
/// subsystem, in network order) from the stacked initial state `x0`.
pub fn simulate(
    network: &Network,
    laws: &[ControlLaw],
    cfg: &SimConfig,
    x0: &[f64],
) -> Result<Trajectory, SimError> {
    check_laws(network, laws)?;
    let steps = cfg.steps()?;
    let dim = network.state_dim();
    if x0.len() != dim {
        return Err(SimError::Dimension {
            what: "stacked initial state".into(),
            expected: dim,
            got: x0.len(),
        });
    }
    let n_sub = network.len();

    for (k, (s, law)) in network.subsystems().iter().zip(laws).enumerate() {
        let x = &x0[network.range(k)];
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { id: s.id, t: 0.0 });
        }
        let enc = law.encoding();
        let rho = enc
            .psi()
            .rho(x)
            .map_err(|e| SimError::Control { id: s.id, source: e.into() })?;
        let (lower, upper) = enc.envelope(0.0);
        if !(lower < rho && rho < upper) {
            return Err(SimError::InitialOutsideFunnel {
                id: s.id,
                rho,
                lower,
                upper,
            });
        }
    }

    let stage = Stage {
        network,
        laws,
        state_offsets: (0..=n_sub)
            .map(|k| if k == n_sub { dim } else { network.range(k).start })
            .collect(),
        input_offsets: input_offsets(network),
        parallel: cfg.parallel,
    };
    let m_total = *stage.input_offsets.last().unwrap_or(&0);
    let grid = steps + 1;
    let times: Arc<[f64]> = (0..grid).map(|k| k as f64 * cfg.dt).collect::<Vec<_>>().into();
    let dims: Vec<(usize, usize)> = network.subsystems().iter().map(|s| (s.n(), s.m())).collect();
    let mut states: Vec<Vec<f64>> = dims.iter().map(|(n, _)| Vec::with_capacity(grid * n)).collect();
    let mut inputs: Vec<Vec<f64>> = dims.iter().map(|(_, m)| Vec::with_capacity(grid * m)).collect();
    let mut rho: Vec<Vec<f64>> = (0..n_sub).map(|_| Vec::with_capacity(grid)).collect();
    let mut clamp_events = Vec::new();

    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut xs = vec![0.0; dim];
    let mut u = vec![0.0; m_total];
    let mut u_scratch = vec![0.0; m_total];
    let mut g_probe: Vec<f64> = Vec::new();
    let probe = cfg!(debug_assertions);

    let record_clamps = |es: &[ErrorState], t: f64, events: &mut Vec<ClampEvent>| {
        for (s, e) in network.subsystems().iter().zip(es) {
            if let Some((side, raw)) = e.clamp {
                events.push(ClampEvent {
                    subsystem: s.id,
                    t,
                    side,
                    e_hat: raw,
                });
            }
        }
    };

    for step in 0..grid {
        let t = times[step];
        let es = stage.eval(&x, t, &mut k1, &mut u)?;
        record_clamps(&es, t, &mut clamp_events);
        for (k, s) in network.subsystems().iter().enumerate() {
            let xk = &x[network.range(k)];
            states[k].extend_from_slice(xk);
            inputs[k].extend_from_slice(&u[stage.input_offsets[k]..stage.input_offsets[k + 1]]);
            rho[k].push(es[k].rho);
            if probe {
                let (n, m) = dims[k];
                g_probe.resize(n * m, 0.0);
                s.dynamics.input_matrix(xk, &mut g_probe);
                let lambda_min = min_gram_eigenvalue(&g_probe, n, m);
                if !(lambda_min > GRAM_TOLERANCE) {
                    return Err(SimError::InputMatrixDegenerate { id: s.id, t, lambda_min });
                }
            }
        }
        if step == steps {
            break;
        }

        let h = cfg.dt / cfg.substeps as f64;
        for j in 0..cfg.substeps {
            let ts = t + j as f64 * h;
            if j > 0 {
                let es = stage.eval(&x, ts, &mut k1, &mut u_scratch)?;
                record_clamps(&es, ts, &mut clamp_events);
            }
            match cfg.integrator {
                Integrator::Euler => {
                    for i in 0..dim {
                        x[i] += h * k1[i];
                    }
                }
                Integrator::Rk4 => {
                    let half = ts + 0.5 * h;
                    for i in 0..dim {
                        xs[i] = x[i] + 0.5 * h * k1[i];
                    }
                    let es = stage.eval(&xs, half, &mut k2, &mut u_scratch)?;
                    record_clamps(&es, half, &mut clamp_events);
                    for i in 0..dim {
                        xs[i] = x[i] + 0.5 * h * k2[i];
                    }
                    let es = stage.eval(&xs, half, &mut k3, &mut u_scratch)?;
                    record_clamps(&es, half, &mut clamp_events);
                    for i in 0..dim {
                        xs[i] = x[i] + h * k3[i];
                    }
                    let es = stage.eval(&xs, ts + h, &mut k4, &mut u_scratch)?;
                    record_clamps(&es, ts + h, &mut clamp_events);
                    for i in 0..dim {
                        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                }
            }
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        for (k, s) in network.subsystems().iter().enumerate() {
            if x[network.range(k)].iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite { id: s.id, t: times[step + 1] });
            }
        }
    }

    if !clamp_events.is_empty() {
        log::warn!("{} clamp events during simulation", clamp_events.len());
    }
    let rho = rho
        .into_iter()
        .map(|v| RobustnessTrace::new(times.clone(), v).expect("trace matches grid"))
        .collect();
    Ok(Trajectory {
        times,
        ids: network.ids().collect(),
        dims,
        states,
        inputs,
        rho,
        encodings: laws.iter().map(|l| l.encoding().clone()).collect(),
        clamp_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::DEFAULT_CLAMP_MARGIN;
    use crate::funnel::{Funnel, TaskEncoding};
    use crate::sim::{Dynamics, Subsystem};
    use crate::stl::{Interval, Predicate, StateFormula, TemporalFormula};

    /// `x' = -x + u` style test model with configurable pieces.
    #[derive(Debug)]
    pub(crate) struct Decay {
        pub a: f64,
        pub g: f64,
    }

    impl Dynamics for Decay {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn internal_dim(&self) -> usize {
            0
        }
        fn drift(&self, x: &[f64], out: &mut [f64]) {
            out[0] = self.a * x[0];
        }
        fn input_matrix(&self, _x: &[f64], out: &mut [f64]) {
            out[0] = self.g;
        }
        fn coupling(&self, _w: &[f64], _out: &mut [f64]) {}
    }

    fn wide_law(id: u32) -> ControlLaw {
        // Funnel so wide that the controller output is ~0 near x = 0.5.
        let psi = StateFormula::pred(Predicate::affine("x", vec![1.0], 0.0, vec![0]).unwrap());
        let phi = TemporalFormula::always(Interval::new(0.0, 1.0).unwrap(), psi).unwrap();
        let f = Funnel::new(1e6, 1e6, 0.0).unwrap();
        let enc = TaskEncoding::new(phi, f, 1e5, 1.0, 0.0).unwrap();
        ControlLaw::new(SubsystemId(id), Arc::new(enc), vec![], DEFAULT_CLAMP_MARGIN).unwrap()
    }

    /// Constant robustness 0.5 with a zero gradient: the law outputs exactly 0.
    fn silent_law(id: u32) -> ControlLaw {
        let psi = StateFormula::pred(Predicate::affine("c", vec![0.0], 0.5, vec![0]).unwrap());
        let phi = TemporalFormula::always(Interval::new(0.0, 1.0).unwrap(), psi).unwrap();
        let enc = TaskEncoding::new(phi, Funnel::new(1.0, 1.0, 0.0).unwrap(), 1.0, 0.1, 0.0).unwrap();
        ControlLaw::new(SubsystemId(id), Arc::new(enc), vec![], DEFAULT_CLAMP_MARGIN).unwrap()
    }

    fn decay_network() -> Network {
        Network::new(vec![Subsystem::new(
            SubsystemId(1),
            Arc::new(Decay { a: -1.0, g: 1.0 }),
            vec![],
        )])
        .unwrap()
    }

    fn final_error(cfg: SimConfig) -> f64 {
        let traj = simulate(&decay_network(), &[silent_law(1)], &cfg, &[1.0]).unwrap();
        assert!(traj.input(0, 0).iter().all(|&u| u == 0.0));
        (traj.state(0, traj.len() - 1)[0] - (-1f64).exp()).abs()
    }

    #[test]
    fn grid_and_config_checks() {
        assert_eq!(SimConfig::new(0.1, 1000.0).steps().unwrap(), 10_000);
        assert!(SimConfig::new(0.3, 1.0).steps().is_err());
        assert!(SimConfig::new(0.0, 1.0).steps().is_err());
        assert!(SimConfig::new(1.0, 0.5).steps().is_err());
    }

    #[test]
    fn zero_dynamics_zero_derivative() {
        let net = Network::new(vec![Subsystem::new(
            SubsystemId(1),
            Arc::new(Decay { a: 0.0, g: 1.0 }),
            vec![],
        )])
        .unwrap();
        // e_hat = -0.5 exactly -> eps_T = 0 -> u = 0.
        let psi = StateFormula::pred(Predicate::affine("x", vec![1.0], 0.0, vec![0]).unwrap());
        let phi = TemporalFormula::always(Interval::new(0.0, 1.0).unwrap(), psi).unwrap();
        let enc = TaskEncoding::new(phi, Funnel::new(1.0, 1.0, 0.0).unwrap(), 1.0, 0.1, 0.0).unwrap();
        let law = ControlLaw::new(SubsystemId(1), Arc::new(enc), vec![], 1e-9).unwrap();
        assert_eq!(derivative(&net, &[law], &[0.5], 0.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn initial_state_outside_funnel_rejected() {
        let net = Network::new(vec![Subsystem::new(
            SubsystemId(1),
            Arc::new(Decay { a: -1.0, g: 1.0 }),
            vec![],
        )])
        .unwrap();
        let law = wide_law(1);
        let err = simulate(&net, &[law], &SimConfig::new(0.1, 1.0), &[2e5]).unwrap_err();
        assert!(matches!(err, SimError::InitialOutsideFunnel { .. }));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let ratio = final_error(SimConfig::new(0.1, 1.0)) / final_error(SimConfig::new(0.05, 1.0));
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn euler_is_first_order() {
        let euler = |dt| SimConfig {
            integrator: Integrator::Euler,
            ..SimConfig::new(dt, 1.0)
        };
        let ratio = final_error(euler(0.01)) / final_error(euler(0.005));
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
    }
}
