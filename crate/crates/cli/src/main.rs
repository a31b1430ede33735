mod plot;
mod report;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stlfunnel_core::config::{demo_robots, demo_rooms, ProjectConfig};
use stlfunnel_core::funnel::TaskEncoding;
use stlfunnel_core::pipeline::{
    self, design, monitor_all, run_simulation, traces_from_csv, verify, EncodingsFile,
};
use stlfunnel_core::sim::{read_csv, write_csv, CsvTable, SubsystemId, Trajectory};

#[derive(Parser)]
#[command(name = "stlfunnel", version, about = "Funnel-based STL control of interconnected systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose funnel parameters for every subsystem and write the encodings.
    Design {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate the closed loop and write the trajectory CSV and event log.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Encodings produced by `design` (default: <out>/encodings.json, else designed on the fly).
        #[arg(long)]
        encodings: Option<PathBuf>,
    },
    /// Evaluate each temporal task on a trajectory CSV.
    Monitor {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        encodings: Option<PathBuf>,
        /// Trajectory CSV (default: <out>/trajectory.csv).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check the assume-guarantee contracts and their composition on a trajectory CSV.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        encodings: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Draw funnel and state plots (SVG) and a gnuplot script from a trajectory CSV.
    Plot {
        /// Trajectory CSV (default: <out>/trajectory.csv).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, env = "STLFUNNEL_OUT")]
        out: Option<PathBuf>,
        #[command(flatten)]
        select: plot::Selection,
    },
    /// Run one of the built-in examples end to end.
    Demo {
        which: DemoKind,
        #[command(flatten)]
        sim: SimOverrides,
        #[arg(long, env = "STLFUNNEL_OUT")]
        out: Option<PathBuf>,
        /// Number of rooms.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Skip the plots.
        #[arg(long)]
        no_plot: bool,
        #[command(flatten)]
        select: plot::Selection,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoKind {
    Rooms,
    Robots,
}

#[derive(Args)]
struct Common {
    /// Project configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config `output.dir`, else `out`).
    #[arg(long, env = "STLFUNNEL_OUT")]
    out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimOverrides,
}

#[derive(Args, Default)]
struct SimOverrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Evaluate subsystems in parallel.
    #[arg(long)]
    parallel: bool,
    /// Seed of the multistart search for the robustness optimum.
    #[arg(long)]
    seed: Option<u64>,
}

impl SimOverrides {
    fn apply(&self, cfg: &mut ProjectConfig) {
        if let Some(dt) = self.dt {
            cfg.sim.dt = dt;
        }
        if let Some(h) = self.horizon {
            cfg.sim.horizon = h;
        }
        cfg.sim.parallel |= self.parallel;
        if let Some(seed) = self.seed {
            cfg.rho_opt.seed = seed;
        }
    }
}

fn load_config(common: &Common) -> Result<(ProjectConfig, PathBuf)> {
    let text = fs::read_to_string(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let mut cfg = ProjectConfig::from_json(&text)
        .with_context(|| format!("parsing {}", common.config.display()))?;
    common.sim.apply(&mut cfg);
    let out = out_dir(common.out.clone(), &cfg);
    Ok((cfg, out))
}

fn out_dir(flag: Option<PathBuf>, cfg: &ProjectConfig) -> PathBuf {
    flag.or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_encodings(
    cfg: &ProjectConfig,
    out: &Path,
    explicit: Option<&Path>,
) -> Result<Option<BTreeMap<SubsystemId, Arc<TaskEncoding>>>> {
    let default = out.join("encodings.json");
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None if default.exists() => default,
        None => return Ok(None),
    };
    let file: EncodingsFile = serde_json::from_reader(BufReader::new(
        File::open(&path).with_context(|| format!("opening {}", path.display()))?,
    ))
    .with_context(|| format!("parsing {}", path.display()))?;
    if file.config_hash != cfg.hash() {
        log::warn!(
            "{} was designed for a different configuration (hash {})",
            path.display(),
            file.config_hash
        );
    }
    Ok(Some(file.resolve()?))
}

fn encodings_or_design(
    cfg: &ProjectConfig,
    network: &stlfunnel_core::sim::Network,
    out: &Path,
    explicit: Option<&Path>,
) -> Result<BTreeMap<SubsystemId, Arc<TaskEncoding>>> {
    match load_encodings(cfg, out, explicit)? {
        Some(e) => Ok(e),
        None => {
            log::info!("no encodings file; designing from the configuration");
            Ok(design(cfg, network)?.encodings)
        }
    }
}

fn load_csv(path: &Path) -> Result<CsvTable> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_trajectory(traj: &Trajectory, out: &Path, stride: usize) -> Result<()> {
    let path = out.join("trajectory.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(traj, file, stride)?;

    let path = out.join("events.jsonl");
    let mut log = BufWriter::new(File::create(&path)?);
    #[derive(Serialize)]
    #[serde(tag = "kind", rename_all = "snake_case")]
    enum Event<'a> {
        Clamp(&'a stlfunnel_core::sim::ClampEvent),
        Violation(&'a stlfunnel_core::sim::Violation),
    }
    for e in traj.clamp_events() {
        serde_json::to_writer(&mut log, &Event::Clamp(e))?;
        log.write_all(b"\n")?;
    }
    for v in &traj.violations() {
        serde_json::to_writer(&mut log, &Event::Violation(v))?;
        log.write_all(b"\n")?;
    }
    log.flush()?;
    Ok(())
}

fn cmd_design(common: &Common) -> Result<bool> {
    let (cfg, out) = load_config(common)?;
    let network = cfg.network()?;
    let d = design(&cfg, &network)?;
    create_dir(&out)?;
    write_json(&out.join("encodings.json"), &EncodingsFile::new(cfg.hash(), &d.encodings))?;
    write_json(&out.join("design.json"), &d.rows)?;
    let text = report::design_table(&d.rows);
    fs::write(out.join("design.txt"), &text)?;
    print!("{text}");
    Ok(true)
}

fn cmd_simulate(common: &Common, encodings: Option<&Path>) -> Result<bool> {
    let (cfg, out) = load_config(common)?;
    let network = cfg.network()?;
    let enc = encodings_or_design(&cfg, &network, &out, encodings)?;
    let traj = run_simulation(&cfg, &cfg.sim, &network, &enc)?;
    create_dir(&out)?;
    write_trajectory(&traj, &out, cfg.output.csv_stride)?;
    let violations = traj.violations();
    println!(
        "{} subsystems, {} samples: {} envelope violations, {} clamp events",
        traj.ids().len(),
        traj.len(),
        violations.len(),
        traj.clamp_events().len()
    );
    for v in violations.iter().take(10) {
        println!(
            "  subsystem {} at t = {}: rho = {} outside ({}, {})",
            v.subsystem, v.t, v.rho, v.lower, v.upper
        );
    }
    Ok(violations.is_empty() && traj.clamp_events().is_empty())
}

fn cmd_monitor(common: &Common, encodings: Option<&Path>, csv: Option<&Path>) -> Result<bool> {
    let (cfg, out) = load_config(common)?;
    let network = cfg.network()?;
    let enc = encodings_or_design(&cfg, &network, &out, encodings)?;
    let table = load_csv(&csv.map_or_else(|| out.join("trajectory.csv"), Path::to_path_buf))?;
    let traces = traces_from_csv(&table, &network, &enc)?;
    let rows = monitor_all(&traces, &enc, cfg.monitor.window_policy)?;
    create_dir(&out)?;
    write_json(&out.join("monitor.json"), &rows)?;
    print!("{}", report::monitor_table(&rows));
    Ok(rows.iter().all(|r| r.pass))
}

fn cmd_verify(common: &Common, encodings: Option<&Path>, csv: Option<&Path>) -> Result<bool> {
    let (cfg, out) = load_config(common)?;
    let network = cfg.network()?;
    let enc = encodings_or_design(&cfg, &network, &out, encodings)?;
    let table = load_csv(&csv.map_or_else(|| out.join("trajectory.csv"), Path::to_path_buf))?;
    let traces = traces_from_csv(&table, &network, &enc)?;
    let rep = verify(&network, &enc, &traces, &cfg.initial_states()?)?;
    create_dir(&out)?;
    write_json(&out.join("verify.json"), &rep)?;
    print!("{}", report::verify_text(&rep));
    Ok(rep.global && rep.all_uniform_strong)
}

fn cmd_plot(csv: Option<&Path>, out: Option<PathBuf>, select: &plot::Selection) -> Result<bool> {
    let out = out.unwrap_or_else(|| PathBuf::from("out"));
    let csv = csv.map_or_else(|| out.join("trajectory.csv"), Path::to_path_buf);
    let table = load_csv(&csv)?;
    create_dir(&out)?;
    let written = plot::write_all(&table, &csv, &out, select)?;
    println!("wrote {} files to {}", written, out.display());
    Ok(true)
}

fn cmd_demo(
    which: DemoKind,
    sim: &SimOverrides,
    out: Option<PathBuf>,
    n: usize,
    no_plot: bool,
    select: &plot::Selection,
) -> Result<bool> {
    let mut cfg = match which {
        DemoKind::Rooms => {
            if n < 3 {
                bail!("the room ring needs at least 3 rooms, got {n}");
            }
            demo_rooms(n)
        }
        DemoKind::Robots => demo_robots(),
    };
    sim.apply(&mut cfg);
    let out = out_dir(out, &cfg);
    create_dir(&out)?;
    write_json(&out.join("config.json"), &cfg)?;

    let outcome = pipeline::run(&cfg)?;
    write_json(
        &out.join("encodings.json"),
        &EncodingsFile::new(cfg.hash(), &outcome.design.encodings),
    )?;
    write_json(&out.join("design.json"), &outcome.design.rows)?;
    write_trajectory(&outcome.trajectory, &out, cfg.output.csv_stride)?;
    write_json(&out.join("monitor.json"), &outcome.monitors)?;
    write_json(&out.join("verify.json"), &outcome.verify)?;
    write_json(&out.join("manifest.json"), &outcome.manifest)?;

    print!("{}", report::design_table(&outcome.manifest.design));
    print!("{}", report::monitor_table(&outcome.monitors));
    print!("{}", report::verify_text(&outcome.verify));
    print!("{}", report::summary_text(&outcome.manifest.summary));

    if cfg.output.plot && !no_plot {
        let csv = out.join("trajectory.csv");
        let table = load_csv(&csv)?;
        plot::write_all(&table, &csv, &out, select)?;
    }
    Ok(outcome.manifest.summary.success)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Design { common } => cmd_design(common),
        Command::Simulate { common, encodings } => cmd_simulate(common, encodings.as_deref()),
        Command::Monitor {
            common,
            encodings,
            csv,
        } => cmd_monitor(common, encodings.as_deref(), csv.as_deref()),
        Command::Verify {
            common,
            encodings,
            csv,
        } => cmd_verify(common, encodings.as_deref(), csv.as_deref()),
        Command::Plot { csv, out, select } => cmd_plot(csv.as_deref(), out.clone(), select),
        Command::Demo {
            which,
            sim,
            out,
            n,
            no_plot,
            select,
        } => cmd_demo(*which, sim, out.clone(), *n, *no_plot, select),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
