//! Project configuration: predicates, tasks, model, simulation and output.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::DEFAULT_CLAMP_MARGIN;
use crate::funnel::{Deadline, SelectionPolicy};
use crate::pipeline::PipelineError;
use crate::sim::{
    robot_initial_states, robots, room_initial_states, rooms, Dynamics, LinearDynamics, Network,
    RobotParams, RoomParams, SimConfig, Subsystem, SubsystemId,
};
use crate::stl::{
    parse_formula, Predicate, PredicateKind, PredicateSpec, RhoOptConfig, TemporalFormula,
    WindowPolicy,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub predicates: BTreeMap<String, PredicateSpec>,
    pub tasks: Vec<TaskConfig>,
    pub model: ModelConfig,
    #[serde(default)]
    pub initial_state: InitialState,
    pub sim: SimConfig,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub rho_opt: RhoOptConfig,
    #[serde(default = "default_clamp_margin")]
    pub clamp_margin: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_clamp_margin() -> f64 {
    DEFAULT_CLAMP_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub subsystems: SubsystemSelect,
    pub formula: String,
    /// Partial objects override individual defaults.
    #[serde(default)]
    pub policy: SelectionPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    All,
    Odd,
    Even,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsystemSelect {
    Group(Group),
    Ids(Vec<SubsystemId>),
}

impl SubsystemSelect {
    pub fn matches(&self, id: SubsystemId) -> bool {
        match self {
            SubsystemSelect::Group(Group::All) => true,
            SubsystemSelect::Group(Group::Odd) => id.0 % 2 == 1,
            SubsystemSelect::Group(Group::Even) => id.0.is_multiple_of(2),
            SubsystemSelect::Ids(ids) => ids.contains(&id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Rooms {
        n: usize,
        #[serde(default)]
        params: RoomParams,
    },
    Robots {
        #[serde(default)]
        params: RobotParams,
    },
    Linear { subsystems: Vec<LinearSubsystem> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSubsystem {
    pub id: SubsystemId,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub h: Vec<Vec<f64>>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub neighbors: Vec<SubsystemId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The model's own initial states (built-in models only).
    #[default]
    Builtin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Preset(Preset),
    Explicit(BTreeMap<SubsystemId, Vec<f64>>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Preset(Preset::Builtin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub window_policy: WindowPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub plot: bool,
    /// Keep every n-th grid row in the trajectory CSV.
    pub csv_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            plot: true,
            csv_stride: 1,
        }
    }
}

/// A temporal task resolved for one subsystem.
#[derive(Debug, Clone)]
pub struct ResolvedTask {
    pub subsystem: SubsystemId,
    /// Index into [`ProjectConfig::tasks`].
    pub task: usize,
    pub phi: Arc<TemporalFormula>,
    pub policy: SelectionPolicy,
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn predicate_env(&self) -> Result<BTreeMap<String, Predicate>, PipelineError> {
        self.predicates
            .iter()
            .map(|(name, spec)| Ok((name.clone(), Predicate::from_spec(name, spec)?)))
            .collect()
    }

    pub fn network(&self) -> Result<Network, PipelineError> {
        Ok(match &self.model {
            ModelConfig::Rooms { n, params } => rooms(*n, *params)?,
            ModelConfig::Robots { params } => robots(*params)?,
            ModelConfig::Linear { subsystems } => {
                let subs = subsystems
                    .iter()
                    .map(|s| {
                        let d = LinearDynamics::new(s.a.clone(), s.b.clone(), s.h.clone(), s.c.clone())?;
                        if !(d.input_gram_min_eigenvalue() > 1e-10) {
                            return Err(PipelineError::Config(format!(
                                "subsystem {}: B B^T is not positive definite",
                                s.id
                            )));
                        }
                        let d: Arc<dyn Dynamics> = Arc::new(d);
                        Ok(Subsystem::new(s.id, d, s.neighbors.clone()))
                    })
                    .collect::<Result<Vec<_>, PipelineError>>()?;
                Network::new(subs)?
            }
        })
    }

    pub fn initial_states(&self) -> Result<BTreeMap<SubsystemId, Vec<f64>>, PipelineError> {
        match (&self.initial_state, &self.model) {
            (InitialState::Explicit(m), _) => Ok(m.clone()),
            (InitialState::Preset(Preset::Builtin), ModelConfig::Rooms { n, .. }) => {
                Ok(room_initial_states(*n))
            }
            (InitialState::Preset(Preset::Builtin), ModelConfig::Robots { .. }) => {
                Ok(robot_initial_states())
            }
            (InitialState::Preset(Preset::Builtin), ModelConfig::Linear { .. }) => Err(
                PipelineError::Config("linear models need explicit initial states".into()),
            ),
        }
    }

    /// One task per subsystem; formulas are parsed once per task entry.
    pub fn resolve_tasks(&self, network: &Network) -> Result<Vec<ResolvedTask>, PipelineError> {
        let env = self.predicate_env()?;
        let parsed = self
            .tasks
            .iter()
            .map(|t| Ok(Arc::new(parse_formula(&t.formula, &env)?)))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let mut out = Vec::with_capacity(network.len());
        for s in network.subsystems() {
            let hits: Vec<usize> = (0..self.tasks.len())
                .filter(|&k| self.tasks[k].subsystems.matches(s.id))
                .collect();
            let task = match hits.as_slice() {
                [k] => *k,
                [] => return Err(PipelineError::Config(format!("no task for subsystem {}", s.id))),
                _ => {
                    return Err(PipelineError::Config(format!(
                        "subsystem {} matches several tasks: {hits:?}",
                        s.id
                    )))
                }
            };
            let phi = parsed[task].clone();
            let need = phi.body().min_dim();
            if need > s.n() {
                return Err(PipelineError::Config(format!(
                    "task `{}` reads coordinate {} but subsystem {} has dimension {}",
                    self.tasks[task].formula,
                    need - 1,
                    s.id,
                    s.n()
                )));
            }
            out.push(ResolvedTask {
                subsystem: s.id,
                task,
                phi,
                policy: self.tasks[task].policy.clone(),
            });
        }
        Ok(out)
    }
}

fn affine(coeffs: f64, offset: f64, selector: usize) -> PredicateSpec {
    PredicateSpec {
        kind: PredicateKind::Affine {
            coeffs: vec![coeffs],
            offset,
        },
        selector: vec![selector],
    }
}

fn earliest() -> SelectionPolicy {
    SelectionPolicy {
        deadline: Deadline::Earliest,
        ..SelectionPolicy::default()
    }
}

/// Circular building with `n` rooms: odd rooms reach [21, 25] within 200 s,
/// even rooms reach [28, 30] within 500 s.
pub fn demo_rooms(n: usize) -> ProjectConfig {
    let predicates = [
        ("odd_upper", affine(-1.0, 25.0, 0)),
        ("odd_lower", affine(1.0, -21.0, 0)),
        ("even_upper", affine(-1.0, 30.0, 0)),
        ("even_lower", affine(1.0, -28.0, 0)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let tasks = vec![
        TaskConfig {
            subsystems: SubsystemSelect::Group(Group::Odd),
            formula: "F[0,1000]G[200,1000] (odd_upper & odd_lower)".into(),
            policy: earliest(),
        },
        TaskConfig {
            subsystems: SubsystemSelect::Group(Group::Even),
            formula: "F[0,1000]G[500,1000] (even_upper & even_lower)".into(),
            policy: earliest(),
        },
    ];
    ProjectConfig {
        predicates,
        tasks,
        model: ModelConfig::Rooms {
            n,
            params: RoomParams::default(),
        },
        initial_state: InitialState::default(),
        sim: SimConfig::new(0.1, 1000.0).with_substeps(4),
        monitor: MonitorConfig {
            window_policy: WindowPolicy::Truncated,
        },
        rho_opt: RhoOptConfig::default(),
        clamp_margin: DEFAULT_CLAMP_MARGIN,
        output: OutputConfig::default(),
    }
}

/// Goal centers, radii and headings (degrees) of the five robots.
pub const ROBOT_GOALS: [([f64; 2], f64, f64); 5] = [
    ([0.7, 0.6], 0.05, 0.0),
    ([0.725, 0.45], 0.5, -90.0),
    ([0.5, 0.425], 0.5, -180.0),
    ([0.475, 0.55], 0.5, 145.0),
    ([0.575, 0.65], 0.5, 45.0),
];

/// Five robots, each reaching its goal ball and heading band by t = 30 s and
/// staying there until 35 s.
pub fn demo_robots() -> ProjectConfig {
    let deg = 180.0 / PI;
    let mut predicates = BTreeMap::new();
    let mut tasks = Vec::new();
    for (k, (center, radius, heading)) in ROBOT_GOALS.iter().enumerate() {
        let i = k + 1;
        predicates.insert(
            format!("goal{i}"),
            PredicateSpec {
                kind: PredicateKind::SquaredBall {
                    center: center.to_vec(),
                    radius: *radius,
                },
                selector: vec![0, 1],
            },
        );
        // |deg(x3) - heading| <= 7.5 as two affine half-planes.
        predicates.insert(format!("heading{i}_upper"), affine(-deg, 7.5 + heading, 2));
        predicates.insert(format!("heading{i}_lower"), affine(deg, 7.5 - heading, 2));
        tasks.push(TaskConfig {
            subsystems: SubsystemSelect::Ids(vec![SubsystemId(i as u32)]),
            formula: format!("F[0,35]G[30,35] (goal{i} & heading{i}_upper & heading{i}_lower)"),
            policy: earliest(),
        });
    }
    ProjectConfig {
        predicates,
        tasks,
        model: ModelConfig::Robots {
            params: RobotParams::default(),
        },
        initial_state: InitialState::default(),
        sim: SimConfig::new(0.001, 35.0),
        monitor: MonitorConfig {
            window_policy: WindowPolicy::Truncated,
        },
        rho_opt: RhoOptConfig::default(),
        clamp_margin: DEFAULT_CLAMP_MARGIN,
        output: OutputConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_configs_round_trip() {
        for cfg in [demo_rooms(4), demo_robots()] {
            let back = ProjectConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
        assert_ne!(demo_rooms(4).hash(), demo_rooms(5).hash());
    }

    #[test]
    fn room_tasks_resolve_by_parity() {
        let cfg = demo_rooms(4);
        let net = cfg.network().unwrap();
        let tasks = cfg.resolve_tasks(&net).unwrap();
        assert_eq!(tasks.iter().map(|t| t.task).collect::<Vec<_>>(), vec![0, 1, 0, 1]);
        assert!(Arc::ptr_eq(&tasks[0].phi, &tasks[2].phi));
    }

    #[test]
    fn overlapping_or_missing_tasks_rejected() {
        let mut cfg = demo_rooms(4);
        cfg.tasks[1].subsystems = SubsystemSelect::Group(Group::All);
        let net = cfg.network().unwrap();
        assert!(cfg.resolve_tasks(&net).is_err());
        cfg.tasks.pop();
        assert!(cfg.resolve_tasks(&net).is_err());
    }

    #[test]
    fn partial_policy_and_inline_linear_model() {
        let text = r#"{
            "predicates": {"p": {"type": "affine", "coeffs": [1.0], "offset": 0.0, "selector": [0]}},
            "tasks": [{"subsystems": [1], "formula": "F[0,2] p", "policy": {"deadline": "earliest"}}],
            "model": {"kind": "linear", "subsystems": [{"id": 1, "a": [[-1.0]], "b": [[1.0]]}]},
            "initial_state": {"1": [-0.5]},
            "sim": {"dt": 0.01, "horizon": 3.0}
        }"#;
        let cfg = ProjectConfig::from_json(text).unwrap();
        assert_eq!(cfg.tasks[0].policy.deadline, Deadline::Earliest);
        assert_eq!(cfg.tasks[0].policy.rho_max_fraction, 0.8);
        let net = cfg.network().unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(cfg.initial_states().unwrap()[&SubsystemId(1)], vec![-0.5]);
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&demo_rooms(3).to_json()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(ProjectConfig::from_json(&v.to_string()).is_err());
    }
}
