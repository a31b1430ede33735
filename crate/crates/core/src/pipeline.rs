//! Design, simulation, monitoring and verification wired together.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ProjectConfig;
use crate::contracts::{
    assemble_contracts, check_all, check_composition, CompositionReport, ContractError,
    SatisfactionReport, Verdict,
};
use crate::controller::{ControlError, ControlLaw};
use crate::funnel::{design_parameters, DesignError, EncodingRecord, TaskEncoding};
use crate::sim::{
    simulate, ClampEvent, CsvTable, Network, SimConfig, SimError, SubsystemId, Trajectory,
    Violation,
};
use crate::stl::{monitor_with, ParseError, RobustnessTrace, StlError, WindowPolicy, DEFAULT_TOP};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid formula")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("subsystem {id}")]
    Design {
        id: SubsystemId,
        #[source]
        source: DesignError,
    },
    #[error("subsystem {id}")]
    Control {
        id: SubsystemId,
        #[source]
        source: ControlError,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("trajectory: {0}")]
    Trajectory(String),
}

/// Chosen parameters of one subsystem, for human inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub subsystem: SubsystemId,
    pub formula: String,
    pub rho0: f64,
    /// `None` when the supremum is unbounded.
    pub rho_opt: Option<f64>,
    pub t_star: f64,
    pub rho_max: f64,
    pub r: f64,
    pub gamma0: f64,
    pub gamma_inf: f64,
    pub decay: f64,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub encodings: BTreeMap<SubsystemId, Arc<TaskEncoding>>,
    pub rows: Vec<DesignRow>,
}

/// Computes `rho_opt` once per task entry and designs every subsystem's funnel.
pub fn design(cfg: &ProjectConfig, network: &Network) -> Result<Design, PipelineError> {
    let tasks = cfg.resolve_tasks(network)?;
    let x0 = cfg.initial_states()?;
    let mut rho_opts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut encodings = BTreeMap::new();
    let mut rows = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let id = task.subsystem;
        let psi = task.phi.body();
        let rho_opt = match rho_opts.get(&task.task) {
            Some(v) => *v,
            None => {
                let v = psi.rho_opt(&cfg.rho_opt)?;
                log::info!("task {}: rho_opt = {v}", task.task);
                rho_opts.insert(task.task, v);
                v
            }
        };
        let x = x0
            .get(&id)
            .ok_or_else(|| PipelineError::Config(format!("no initial state for subsystem {id}")))?;
        let rho0 = psi.rho(x)?;
        let enc = design_parameters(&task.phi, rho0, rho_opt, &task.policy)
            .map_err(|source| PipelineError::Design { id, source })?;
        let f = enc.funnel();
        rows.push(DesignRow {
            subsystem: id,
            formula: task.phi.to_string(),
            rho0,
            rho_opt: (rho_opt.is_finite() && rho_opt < DEFAULT_TOP).then_some(rho_opt),
            t_star: enc.t_star(),
            rho_max: enc.rho_max(),
            r: enc.r_min(),
            gamma0: f.gamma0(),
            gamma_inf: f.gamma_inf(),
            decay: f.decay(),
        });
        encodings.insert(id, Arc::new(enc));
    }
    Ok(Design { encodings, rows })
}

/// Serialized encodings, keyed by subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingsFile {
    pub config_hash: String,
    pub encodings: BTreeMap<SubsystemId, EncodingRecord>,
}

impl EncodingsFile {
    pub fn new(config_hash: String, encodings: &BTreeMap<SubsystemId, Arc<TaskEncoding>>) -> Self {
        Self {
            config_hash,
            encodings: encodings
                .iter()
                .map(|(id, e)| (*id, EncodingRecord::from(e.as_ref().clone())))
                .collect(),
        }
    }

    pub fn resolve(&self) -> Result<BTreeMap<SubsystemId, Arc<TaskEncoding>>, PipelineError> {
        self.encodings
            .iter()
            .map(|(id, rec)| {
                let enc = TaskEncoding::try_from(rec.clone())
                    .map_err(|e| PipelineError::Config(format!("encoding of {id}: {e}")))?;
                Ok((*id, Arc::new(enc)))
            })
            .collect()
    }
}

/// One control law per subsystem, in network order.
pub fn build_laws(
    network: &Network,
    encodings: &BTreeMap<SubsystemId, Arc<TaskEncoding>>,
    clamp_margin: f64,
) -> Result<Vec<ControlLaw>, PipelineError> {
    let get = |id: SubsystemId| {
        encodings
            .get(&id)
            .ok_or_else(|| PipelineError::Config(format!("no encoding for subsystem {id}")))
    };
    network
        .subsystems()
        .iter()
        .map(|s| {
            let neighbor_funnels = s
                .neighbors
                .iter()
                .map(|&j| {
                    let n = network.get(j).map(|sj| sj.n()).unwrap_or(0);
                    Ok((*get(j)?.funnel(), n))
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            ControlLaw::new(s.id, get(s.id)?.clone(), neighbor_funnels, clamp_margin)
                .map_err(|source| PipelineError::Control { id: s.id, source })
        })
        .collect()
}

pub fn run_simulation(
    cfg: &ProjectConfig,
    sim: &SimConfig,
    network: &Network,
    encodings: &BTreeMap<SubsystemId, Arc<TaskEncoding>>,
) -> Result<Trajectory, PipelineError> {
    let laws = build_laws(network, encodings, cfg.clamp_margin)?;
    let x0 = network.stack(&cfg.initial_states()?)?;
    Ok(simulate(network, &laws, sim, &x0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub subsystem: SubsystemId,
    pub formula: String,
    /// `rho^phi(x, 0)`
    pub value: f64,
    pub r: f64,
    pub pass: bool,
}

/// Robustness traces recomputed from the state columns of a trajectory CSV.
pub fn traces_from_csv(
    table: &CsvTable,
    network: &Network,
    encodings: &BTreeMap<SubsystemId, Arc<TaskEncoding>>,
) -> Result<BTreeMap<SubsystemId, RobustnessTrace>, PipelineError> {
    let times: Arc<[f64]> = table
        .column("t")
        .ok_or_else(|| PipelineError::Trajectory("missing column `t`".into()))?
        .to_vec()
        .into();
    if times.is_empty() {
        return Err(PipelineError::Trajectory("no rows".into()));
    }
    let mut out = BTreeMap::new();
    for s in network.subsystems() {
        let enc = encodings
            .get(&s.id)
            .ok_or_else(|| PipelineError::Config(format!("no encoding for subsystem {}", s.id)))?;
        let cols = (0..s.n())
            .map(|i| {
                let name = format!("{}.x{i}", s.id);
                table
                    .column(&name)
                    .ok_or_else(|| PipelineError::Trajectory(format!("missing column `{name}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut x = vec![0.0; s.n()];
        let values = (0..times.len())
            .map(|k| {
                for (xi, col) in x.iter_mut().zip(&cols) {
                    *xi = col[k];
                }
                enc.psi().rho(&x)
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(s.id, RobustnessTrace::new(times.clone(), values)?);
    }
    Ok(out)
}

pub fn traces_from_trajectory(traj: &Trajectory) -> BTreeMap<SubsystemId, RobustnessTrace> {
    traj.ids()
        .iter()
        .enumerate()
        .map(|(k, id)| (*id, traj.rho(k).clone()))
        .collect()
}

/// Monitors each subsystem's temporal task against its `rho^psi` trace.
pub fn monitor_all(
    traces: &BTreeMap<SubsystemId, RobustnessTrace>,
    encodings: &BTreeMap<SubsystemId, Arc<TaskEncoding>>,
    policy: WindowPolicy,
) -> Result<Vec<MonitorRow>, PipelineError> {
    encodings
        .iter()
        .map(|(id, enc)| {
            let tr = traces
                .get(id)
                .ok_or_else(|| PipelineError::Trajectory(format!("no trace for subsystem {id}")))?;
            let value = monitor_with(enc.phi(), tr, 0.0, policy)?;
            Ok(MonitorRow {
                subsystem: *id,
                formula: enc.phi().to_string(),
                value,
                r: enc.r_min(),
                pass: value >= enc.r_min(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub reports: BTreeMap<SubsystemId, SatisfactionReport>,
    pub composition: CompositionReport,
    pub all_uniform_strong: bool,
    /// Composition holds, so the network satisfies every guarantee.
    pub global: bool,
}

pub fn verify(
    network: &Network,
    encodings: &BTreeMap<SubsystemId, Arc<TaskEncoding>>,
    traces: &BTreeMap<SubsystemId, RobustnessTrace>,
    initial_states: &BTreeMap<SubsystemId, Vec<f64>>,
) -> Result<VerifyReport, PipelineError> {
    let contracts = assemble_contracts(network, encodings)?;
    let reports = check_all(&contracts, traces)?;
    let grid = traces
        .values()
        .next()
        .map(|t| t.times().to_vec())
        .unwrap_or_default();
    let composition = check_composition(&contracts, network, initial_states, &reports, &grid)?;
    let all_uniform_strong = reports.values().all(SatisfactionReport::is_uniform_strong);
    Ok(VerifyReport {
        global: composition.holds(),
        all_uniform_strong,
        reports,
        composition,
    })
}

/// Compact per-subsystem verdict line for manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractRow {
    pub subsystem: SubsystemId,
    pub assumes: Vec<SubsystemId>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub violations: usize,
    pub clamp_events: usize,
    pub monitors_pass: bool,
    pub contracts_uniform_strong: bool,
    pub composition_holds: bool,
    pub success: bool,
}

/// Everything a run produced, without wall-clock data so that equal configs
/// give equal manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub design: Vec<DesignRow>,
    pub contracts: Vec<ContractRow>,
    pub monitors: Vec<MonitorRow>,
    pub first_violations: Vec<Violation>,
    pub first_clamp_events: Vec<ClampEvent>,
    pub summary: RunSummary,
}

pub struct RunOutcome {
    pub network: Network,
    pub design: Design,
    pub trajectory: Trajectory,
    pub monitors: Vec<MonitorRow>,
    pub verify: VerifyReport,
    pub manifest: RunManifest,
}

const REPORTED_EVENTS: usize = 20;

/// Design, simulate, monitor and verify.
pub fn run(cfg: &ProjectConfig) -> Result<RunOutcome, PipelineError> {
    let network = cfg.network()?;
    let design = design(cfg, &network)?;
    let trajectory = run_simulation(cfg, &cfg.sim, &network, &design.encodings)?;
    let traces = traces_from_trajectory(&trajectory);
    let monitors = monitor_all(&traces, &design.encodings, cfg.monitor.window_policy)?;
    let verify = verify(&network, &design.encodings, &traces, &cfg.initial_states()?)?;
    let manifest = manifest(cfg, &network, &design, &trajectory, &monitors, &verify);
    Ok(RunOutcome {
        network,
        design,
        trajectory,
        monitors,
        verify,
        manifest,
    })
}

pub fn manifest(
    cfg: &ProjectConfig,
    network: &Network,
    design: &Design,
    trajectory: &Trajectory,
    monitors: &[MonitorRow],
    verify: &VerifyReport,
) -> RunManifest {
    let violations = trajectory.violations();
    let clamps = trajectory.clamp_events();
    let summary = RunSummary {
        violations: violations.len(),
        clamp_events: clamps.len(),
        monitors_pass: monitors.iter().all(|m| m.pass),
        contracts_uniform_strong: verify.all_uniform_strong,
        composition_holds: verify.composition.holds(),
        success: violations.is_empty()
            && clamps.is_empty()
            && monitors.iter().all(|m| m.pass)
            && verify.all_uniform_strong,
    };
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        design: design.rows.clone(),
        contracts: network
            .subsystems()
            .iter()
            .map(|s| ContractRow {
                subsystem: s.id,
                assumes: s.neighbors.clone(),
                verdict: verify.reports[&s.id].verdict,
            })
            .collect(),
        monitors: monitors.to_vec(),
        first_violations: violations.into_iter().take(REPORTED_EVENTS).collect(),
        first_clamp_events: clamps.iter().take(REPORTED_EVENTS).copied().collect(),
        summary,
    }
}
