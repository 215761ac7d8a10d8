//! Command-line front end. Every command writes its outputs plus a
//! `<output>.manifest.json` from which the run can be replayed.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::StateMode;
use crate::error::{Error, Result};
use crate::memory::{self, McGrid, McProtocol, McResult, McTrial};
use crate::numerics::eigenvalues;
use crate::selection::{
    enumerate_all, run_sweep, run_trial, select_best, write_results_csv, GridSpec, ModelKind, TrialConfig, TrialResult,
    DEFAULT_CONNECTIVITY, DEFAULT_SEED,
};
use crate::tasks::{self, SplitSpec, SupervisedTask, TimeSeries};
use crate::topology::{parse_topology, CycleSpec, JumpSpec, ReservoirTopology};

#[derive(Debug, Parser)]
#[command(name = "crlab", version, about = "Cycle and concentric reservoir experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of a cycle or concentric reservoir matrix.
    Eigen(EigenArgs),
    /// One train/validate/test run on NARMA-10 or a series file.
    Bench(BenchArgs),
    /// Memory capacity of one model, or the best over the standard grid.
    Mc(McArgs),
    /// Grid search with validation-based selection.
    Grid(GridArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EigenArgs {
    /// Cycle lengths, outermost first, e.g. `40-60`; a single length is a simple cycle.
    #[arg(long)]
    pub topology: String,
    /// Cycle weight, or one comma-separated weight per cycle.
    #[arg(long, value_delimiter = ',', required = true)]
    pub wc: Vec<f64>,
    #[arg(long)]
    pub wj: Option<f64>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Narma,
    /// Next-value prediction on the series in `--data`, normalized into [−1, 1].
    File,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// SCR, CRJ, cESN, cjESN or randomESN.
    #[arg(long, default_value = "cjESN")]
    pub model: ModelKind,
    /// Defaults to `100-50-50` for concentric models and `200` otherwise.
    #[arg(long)]
    pub topology: Option<String>,
    /// Cycle weight (spectral radius for randomESN).
    #[arg(long, default_value_t = 0.8)]
    pub wc: f64,
    #[arg(long, default_value_t = 0.6)]
    pub wj: f64,
    #[arg(long, default_value_t = 5)]
    pub tau: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub lambda: f64,
    #[arg(long = "input-scale", default_value_t = 0.2)]
    pub input_scale: f64,
}

impl ModelArgs {
    fn topology_or_default(&self) -> String {
        self.topology.clone().unwrap_or_else(|| {
            if self.model.is_concentric() {
                "100-50-50".into()
            } else {
                "200".into()
            }
        })
    }

    fn trial(&self, seed: u64, state_mode: StateMode) -> Result<TrialConfig> {
        let topology = self.topology_or_default();
        let lengths = parse_topology(&topology)?;
        if !self.model.is_concentric() && lengths.len() != 1 {
            return Err(Error::param(format!("{} takes a single size, got {topology}", self.model)));
        }
        let random = self.model == ModelKind::RandomEsn;
        Ok(TrialConfig {
            model_kind: self.model,
            n_r: lengths.iter().sum(),
            topology,
            v: self.input_scale,
            w_c: self.wc,
            w_j: self.model.uses_jumps().then_some(self.wj),
            tau_j: self.model.uses_jumps().then_some(self.tau),
            alpha: self.alpha,
            lambda: self.lambda,
            seed: random.then_some(seed),
            connectivity: random.then_some(DEFAULT_CONNECTIVITY),
            state_mode,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TaskArgs {
    #[arg(long, value_enum, default_value = "narma")]
    pub task: TaskKind,
    /// Series file for `--task file`: one number per line, `#` comments.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// NARMA data seed; also seeds random reservoirs.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = tasks::DEFAULT_WASHOUT)]
    pub washout: usize,
    #[arg(long = "state-mode", default_value = "reset")]
    pub state_mode: StateMode,
}

impl TaskArgs {
    fn load(&self) -> Result<(SupervisedTask, Provenance)> {
        match self.task {
            TaskKind::Narma => {
                let data = tasks::generate_narma10(tasks::NARMA_LENGTH, self.seed)?;
                let prov = Provenance::Generated {
                    generator: "narma10".into(),
                    seed: self.seed,
                    seed_used: data.seed_used,
                };
                let split = SplitSpec {
                    washout: self.washout,
                    ..SplitSpec::narma()
                };
                Ok((data.into_task(split)?, prov))
            }
            TaskKind::File => {
                let path = self.data.as_ref().ok_or_else(|| {
                    Error::param("--task file needs --data <path> (one number per line, '#' comments)")
                })?;
                if !path.exists() {
                    return Err(Error::param(format!(
                        "data file {} not found (expected one number per line, '#' comments)",
                        path.display()
                    )));
                }
                let series = tasks::normalize(&tasks::load_series(path)?, -1.0, 1.0)?;
                let split = SplitSpec {
                    washout: self.washout,
                    ..SplitSpec::laser()
                };
                let prov = Provenance::File {
                    path: path.clone(),
                    samples: series.len(),
                };
                Ok((tasks::next_step_task(&series, split)?, prov))
            }
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[command(flatten)]
    pub model: McModelArgs,
    #[arg(long, default_value_t = memory::MC_K_MAX)]
    pub kmax: usize,
    #[arg(long, default_value_t = memory::MC_LAMBDA)]
    pub lambda: f64,
    /// Stream seed when no `--data` is given.
    #[arg(long, default_value_t = memory::MC_STREAM_SEED)]
    pub seed: u64,
    /// Input stream file; a uniform [−1, 1] stream is generated otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = memory::MC_WASHOUT)]
    pub washout: usize,
    /// Search α, the weights and τ for the best MC; concentric models also
    /// search the two-cycle topologies unless `--topology` is given.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McModelArgs {
    #[arg(long, default_value = "cjESN")]
    pub model: ModelKind,
    /// Defaults to `20-80` for concentric models and `100` otherwise.
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long, default_value_t = 0.9)]
    pub wc: f64,
    #[arg(long, default_value_t = 0.5)]
    pub wj: f64,
    #[arg(long, default_value_t = 5)]
    pub tau: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "input-scale", default_value_t = memory::MC_INPUT_SCALE)]
    pub input_scale: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// JSON grid file; see `--preset` for the built-in ones.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fast")]
    pub preset: Preset,
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// First, middle and last value of every hyperparameter list.
    Fast,
    /// The full published grid.
    Paper,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    Generated { generator: String, seed: u64, seed_used: u64 },
    File { path: PathBuf, samples: usize },
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: serde_json::Value,
    /// Fully resolved inputs of the run (grid, trial configuration, protocol).
    pub resolved: serde_json::Value,
    pub data: Provenance,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| Error::io(path, e))
}

fn write_manifest(
    command: &str,
    args: &impl Serialize,
    resolved: serde_json::Value,
    data: Provenance,
    outputs: Vec<PathBuf>,
    primary: &Path,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.into(),
        args: serde_json::to_value(args)?,
        resolved,
        data,
        outputs,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    write_json(&manifest_path(primary), &manifest)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eigen(a) => cmd_eigen(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Mc(a) => cmd_mc(&a),
        Command::Grid(a) => cmd_grid(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

pub fn eigen_topology(args: &EigenArgs) -> Result<ReservoirTopology> {
    let lengths = parse_topology(&args.topology)?;
    let weights = match args.wc.as_slice() {
        [w] => vec![*w; lengths.len()],
        ws if ws.len() == lengths.len() => ws.to_vec(),
        ws => {
            return Err(Error::param(format!(
                "--wc needs 1 or {} values, got {}",
                lengths.len(),
                ws.len()
            )))
        }
    };
    let jumps = match (args.wj, args.tau) {
        (Some(w), Some(t)) => Some(JumpSpec::new(w, t)?),
        (None, None) => None,
        _ => return Err(Error::param("--wj and --tau go together")),
    };
    let cycles = lengths
        .iter()
        .zip(&weights)
        .map(|(&n, &w)| CycleSpec::new(n, w))
        .collect::<Result<Vec<_>>>()?;
    let topo = match (cycles.len(), jumps) {
        (1, None) => ReservoirTopology::SimpleCycle { cycle: cycles[0] },
        (1, Some(jumps)) => ReservoirTopology::CycleWithJumps { cycle: cycles[0], jumps },
        (_, jumps) => ReservoirTopology::Concentric { cycles, jumps },
    };
    topo.validate()?;
    Ok(topo)
}

fn cmd_eigen(args: &EigenArgs) -> Result<()> {
    let topo = eigen_topology(args)?;
    let spectrum = eigenvalues(&topo.build()?)?;
    let mut values = spectrum.values.clone();
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(["re", "im"])?;
    for z in &values {
        w.write_record([z.re.to_string(), z.im.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&args.out, e))?;
    write_manifest(
        "eigen",
        args,
        serde_json::to_value(&topo)?,
        Provenance::None,
        vec![args.out.clone()],
        &args.out,
    )
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let (task, prov) = args.task.load()?;
    let config = args.model.trial(args.task.seed, args.task.state_mode)?;
    let result = run_trial(&config, &task);
    if let Some(reason) = &result.failure {
        return Err(Error::param(format!("trial failed: {reason}")));
    }
    write_results_csv(create(&args.out)?, std::slice::from_ref(&result))?;
    let summary = sibling(&args.out, "json");
    write_json(&summary, &result)?;
    write_manifest(
        "bench",
        args,
        serde_json::json!({ "trial": config, "split": task.split }),
        prov,
        vec![args.out.clone(), summary],
        &args.out,
    )?;
    println!(
        "{} {} valid NMSE {:.6} test NMSE {:.6}",
        config.model_kind, config.topology, result.valid_err, result.test_err
    );
    Ok(())
}

fn mc_stream(args: &McArgs) -> Result<(TimeSeries, Provenance)> {
    match &args.data {
        Some(path) => {
            let series = tasks::load_series(path)?;
            let samples = series.len();
            Ok((series, Provenance::File { path: path.clone(), samples }))
        }
        None => Ok((
            memory::default_stream(args.seed)?,
            Provenance::Generated {
                generator: "uniform[-1,1]".into(),
                seed: args.seed,
                seed_used: args.seed,
            },
        )),
    }
}

fn mc_single_trial(m: &McModelArgs, seed: u64) -> Result<McTrial> {
    let topology = m.topology.clone().unwrap_or_else(|| {
        if m.model.is_concentric() { "20-80" } else { "100" }.into()
    });
    let lengths = parse_topology(&topology)?;
    let n_r: usize = lengths.iter().sum();
    let cycle = |n| CycleSpec::new(n, m.wc);
    let topo = match m.model {
        ModelKind::Scr => ReservoirTopology::SimpleCycle { cycle: cycle(n_r)? },
        ModelKind::Crj => ReservoirTopology::CycleWithJumps {
            cycle: cycle(n_r)?,
            jumps: JumpSpec::new(m.wj, m.tau)?,
        },
        ModelKind::Cesn | ModelKind::Cjesn => ReservoirTopology::Concentric {
            cycles: lengths.iter().map(|&n| cycle(n)).collect::<Result<_>>()?,
            jumps: (m.model == ModelKind::Cjesn)
                .then(|| JumpSpec::new(m.wj, m.tau))
                .transpose()?,
        },
        ModelKind::RandomEsn => ReservoirTopology::RandomSparse {
            n_r,
            connectivity: DEFAULT_CONNECTIVITY,
            target_radius: m.wc,
            seed,
        },
    };
    topo.validate()?;
    Ok(McTrial {
        topology: topo,
        leak_rate: m.alpha,
        input_scale: m.input_scale,
    })
}

/// Trials searched by `mc --sweep` for one model kind.
pub fn mc_sweep_trials(m: &McModelArgs, seed: u64) -> Result<Vec<McTrial>> {
    let mut grid = match &m.topology {
        Some(t) => McGrid::standard(&[t.as_str()]),
        None => McGrid::standard(&McGrid::two_cycle_topologies()),
    };
    grid.input_scale = m.input_scale;
    match m.model {
        ModelKind::Cesn => grid.concentric_trials(false),
        ModelKind::Cjesn => grid.concentric_trials(true),
        _ => {
            // flat reservoirs: fixed topology and weight, α from the grid
            let base = mc_single_trial(m, seed)?;
            Ok(grid
                .leak_rates
                .iter()
                .map(|&a| McTrial {
                    leak_rate: a,
                    ..base.clone()
                })
                .collect())
        }
    }
}

#[derive(Debug, Serialize)]
struct McSummary<'a> {
    total: f64,
    k_max: usize,
    trial: &'a McTrial,
    result: &'a McResult,
    trials_evaluated: usize,
}

fn cmd_mc(args: &McArgs) -> Result<()> {
    let (stream, prov) = mc_stream(args)?;
    let protocol = McProtocol {
        k_max: args.kmax,
        washout: args.washout,
        lambda: args.lambda,
        ..McProtocol::default()
    };
    let trials = if args.sweep {
        mc_sweep_trials(&args.model, args.seed)?
    } else {
        vec![mc_single_trial(&args.model, args.seed)?]
    };
    let results = memory::mc_sweep(&trials, &stream, &protocol, args.workers)?;
    let best = match memory::best_mc(&results) {
        Some(i) => i,
        None => {
            let first = results.into_iter().find_map(|r| r.err());
            return Err(first.unwrap_or_else(|| Error::param("no MC trial to run")));
        }
    };
    let result = results[best].as_ref().map_err(|e| Error::param(e.to_string()))?;

    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(["k", "mc_k", "mc_k_raw"])?;
    for (i, (c, r)) in result.per_delay.iter().zip(&result.raw_per_delay).enumerate() {
        w.write_record([(i + 1).to_string(), c.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&args.out, e))?;

    let summary = sibling(&args.out, "summary.json");
    write_json(
        &summary,
        &McSummary {
            total: result.total,
            k_max: result.k_max,
            trial: &trials[best],
            result,
            trials_evaluated: trials.len(),
        },
    )?;
    let mut outputs = vec![args.out.clone(), summary];
    if args.sweep {
        let totals = sibling(&args.out, "sweep.csv");
        let mut w = csv::Writer::from_writer(create(&totals)?);
        w.write_record(["topology", "alpha", "w_c", "w_j", "tau_j", "total_mc"])?;
        for (t, r) in trials.iter().zip(&results) {
            let (w_c, jumps) = match &t.topology {
                ReservoirTopology::Concentric { cycles, jumps } => (cycles[0].weight, *jumps),
                ReservoirTopology::SimpleCycle { cycle } => (cycle.weight, None),
                ReservoirTopology::CycleWithJumps { cycle, jumps } => (cycle.weight, Some(*jumps)),
                ReservoirTopology::RandomSparse { target_radius, .. } => (*target_radius, None),
            };
            w.write_record([
                t.topology.label(),
                t.leak_rate.to_string(),
                w_c.to_string(),
                jumps.map(|j| j.weight.to_string()).unwrap_or_default(),
                jumps.map(|j| j.step.to_string()).unwrap_or_default(),
                r.as_ref().map(|r| r.total.to_string()).unwrap_or_else(|_| "NaN".into()),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&totals, e))?;
        outputs.push(totals);
    }
    write_manifest(
        "mc",
        args,
        serde_json::json!({ "protocol": protocol, "best_trial": trials[best] }),
        prov,
        outputs,
        &args.out,
    )?;
    println!("{} {} total MC {:.4}", args.model.model, trials[best].topology.label(), result.total);
    Ok(())
}

fn cmd_grid(args: &GridArgs) -> Result<()> {
    let mut spec = match &args.grid {
        Some(path) => GridSpec::load(path)?,
        None => match args.preset {
            Preset::Fast => GridSpec::fast(),
            Preset::Paper => GridSpec::paper(),
        },
    };
    spec.state_mode = args.task.state_mode;
    let (task, prov) = args.task.load()?;
    let configs = enumerate_all(&spec)?;
    let results = run_sweep(&configs, &task, args.workers)?;
    write_results_csv(create(&args.out)?, &results)?;
    let best_path = sibling(&args.out, "best.json");
    let best = select_best(&results)?;
    write_json(&best_path, best)?;
    write_manifest(
        "grid",
        args,
        serde_json::json!({ "grid": spec, "split": task.split, "trials": configs.len() }),
        prov,
        vec![args.out.clone(), best_path],
        &args.out,
    )?;
    print_best(best, results.len());
    Ok(())
}

fn print_best(best: &TrialResult, total: usize) {
    let c = &best.config;
    println!(
        "{total} trials; best {} {} v={} w_c={} w_j={:?} tau={:?} alpha={} lambda={:e}: valid {:.6} test {:.6}",
        c.model_kind, c.topology, c.v, c.w_c, c.w_j, c.tau_j, c.alpha, c.lambda, best.valid_err, best.test_err
    );
}

fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let path = &args.manifest;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    fn restore<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
        serde_path_to_error::deserialize(v).map_err(|e| Error::Config {
            path: format!("args.{}", e.path()),
            msg: e.inner().to_string(),
        })
    }
    let out = args.out.clone();
    match manifest.command.as_str() {
        "eigen" => {
            let mut a: EigenArgs = restore(manifest.args)?;
            a.out = out.unwrap_or(a.out);
            cmd_eigen(&a)
        }
        "bench" => {
            let mut a: BenchArgs = restore(manifest.args)?;
            a.out = out.unwrap_or(a.out);
            cmd_bench(&a)
        }
        "mc" => {
            let mut a: McArgs = restore(manifest.args)?;
            a.out = out.unwrap_or(a.out);
            cmd_mc(&a)
        }
        "grid" => {
            let mut a: GridArgs = restore(manifest.args)?;
            a.out = out.unwrap_or(a.out);
            cmd_grid(&a)
        }
        other => Err(Error::Config {
            path: "command".into(),
            msg: format!("unknown command {other:?}"),
        }),
    }
}
