//! Grid-search model selection.
//!
//! A [`GridSpec`] lists the candidate hyperparameters. [`enumerate_grid`]
//! expands the part a model kind consumes into [`TrialConfig`]s; [`run_sweep`]
//! evaluates them on a worker pool, and [`select_best`] picks the winner on
//! validation error alone.
//!
//! Trials that differ only in λ share one reservoir, so a sweep harvests the
//! states and forms `X Xᵀ` once per reservoir and solves once per λ.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{harvest_scalar_from, EsnConfig, ReservoirState, StateMatrix, StateMode};
use crate::error::{Error, Result};
use crate::readout::{error_report, predict_states, ErrorReport, NormalEquations};
use crate::tasks::{Segment, SupervisedTask};
use crate::topology::{parse_topology, CycleSpec, JumpSpec, ReservoirTopology};

pub const DEFAULT_CONNECTIVITY: f64 = 0.1;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "SCR")]
    Scr,
    #[serde(rename = "CRJ")]
    Crj,
    #[serde(rename = "cESN")]
    Cesn,
    #[serde(rename = "cjESN")]
    Cjesn,
    #[serde(rename = "randomESN")]
    RandomEsn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Scr,
        ModelKind::Crj,
        ModelKind::Cesn,
        ModelKind::Cjesn,
        ModelKind::RandomEsn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Scr => "SCR",
            Self::Crj => "CRJ",
            Self::Cesn => "cESN",
            Self::Cjesn => "cjESN",
            Self::RandomEsn => "randomESN",
        }
    }

    pub fn uses_jumps(self) -> bool {
        matches!(self, Self::Crj | Self::Cjesn)
    }

    pub fn is_concentric(self) -> bool {
        matches!(self, Self::Cesn | Self::Cjesn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().to_ascii_lowercase() == lower || (lower == "esn" && *k == Self::RandomEsn))
            .ok_or_else(|| {
                Error::param(format!(
                    "unknown model kind {s:?} (expected SCR, CRJ, cESN, cjESN or randomESN)"
                ))
            })
    }
}

/// Candidate values for every hyperparameter, plus the concentric topologies
/// per reservoir size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub input_weights: Vec<f64>,
    pub cycle_weights: Vec<f64>,
    pub jump_weights: Vec<f64>,
    pub reservoir_sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub leak_rates: Vec<f64>,
    pub jump_sizes: Vec<usize>,
    pub topologies_per_size: BTreeMap<usize, Vec<String>>,
    pub model_kinds: Vec<ModelKind>,
    /// Connection probability of the random baseline; its cycle weight list
    /// doubles as the spectral-radius list.
    #[serde(default = "default_connectivity")]
    pub random_connectivity: f64,
    #[serde(default = "default_seed")]
    pub random_seed: u64,
    #[serde(default)]
    pub state_mode: StateMode,
}

fn default_connectivity() -> f64 {
    DEFAULT_CONNECTIVITY
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn thin<T: Clone>(values: &[T]) -> Vec<T> {
    if values.len() <= 3 {
        return values.to_vec();
    }
    vec![
        values[0].clone(),
        values[values.len() / 2].clone(),
        values[values.len() - 1].clone(),
    ]
}

impl GridSpec {
    /// The full published search space.
    pub fn paper() -> Self {
        let topo = |n: usize, list: &[&str]| (n, list.iter().map(|s| s.to_string()).collect());
        Self {
            input_weights: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            cycle_weights: vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            jump_weights: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            reservoir_sizes: vec![100, 150, 200, 300, 350, 600],
            lambdas: (-15..=0).map(|k| 10f64.powi(k)).collect(),
            leak_rates: vec![0.1, 0.2, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            jump_sizes: vec![5, 10, 15, 20, 30, 45],
            topologies_per_size: BTreeMap::from([
                topo(100, &["50-50", "60-40", "40-60"]),
                topo(150, &["50-50-50", "75-75", "90-60"]),
                topo(200, &["100-50-50", "50-100-50", "50-50-100", "100-100"]),
                topo(
                    300,
                    &[
                        "100-100-100",
                        "150-100-50",
                        "150-50-100",
                        "50-150-100",
                        "50-100-150",
                        "100-50-150",
                        "100-150-50",
                    ],
                ),
                topo(
                    350,
                    &[
                        "100-200-50",
                        "100-50-200",
                        "50-100-200",
                        "50-200-100",
                        "200-100-50",
                        "200-50-100",
                    ],
                ),
                topo(
                    600,
                    &["200-200-200", "300-300", "400-200", "200-400", "150-150-150-150"],
                ),
            ]),
            model_kinds: vec![ModelKind::Scr, ModelKind::Cesn, ModelKind::Crj, ModelKind::Cjesn],
            random_connectivity: DEFAULT_CONNECTIVITY,
            random_seed: DEFAULT_SEED,
            state_mode: StateMode::Reset,
        }
    }

    /// First, middle and last value of every list; topologies kept in full.
    pub fn fast() -> Self {
        let p = Self::paper();
        Self {
            input_weights: thin(&p.input_weights),
            cycle_weights: thin(&p.cycle_weights),
            jump_weights: thin(&p.jump_weights),
            reservoir_sizes: thin(&p.reservoir_sizes),
            lambdas: thin(&p.lambdas),
            leak_rates: thin(&p.leak_rates),
            jump_sizes: thin(&p.jump_sizes),
            ..p
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |path: &str, msg: String| Error::Config {
            path: path.into(),
            msg,
        };
        if self.model_kinds.is_empty() {
            return Err(cfg("model_kinds", "must list at least one model kind".into()));
        }
        if self.reservoir_sizes.is_empty() {
            return Err(cfg("reservoir_sizes", "must not be empty".into()));
        }
        for (i, value) in self.lambdas.iter().enumerate() {
            if !value.is_finite() || *value < 0.0 {
                return Err(cfg(&format!("lambdas[{i}]"), format!("must be >= 0, got {value}")));
            }
        }
        for (i, value) in self.leak_rates.iter().enumerate() {
            if !(0.0..=1.0).contains(value) {
                return Err(cfg(&format!("leak_rates[{i}]"), format!("must lie in [0, 1], got {value}")));
            }
        }
        for (field, values) in [
            ("input_weights", &self.input_weights),
            ("cycle_weights", &self.cycle_weights),
            ("jump_weights", &self.jump_weights),
        ] {
            if let Some(i) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
                return Err(cfg(
                    &format!("{field}[{i}]"),
                    format!("must be positive, got {}", values[i]),
                ));
            }
        }
        for (n, list) in &self.topologies_per_size {
            for (i, t) in list.iter().enumerate() {
                let path = format!("topologies_per_size.{n}[{i}]");
                let lengths = parse_topology(t).map_err(|e| cfg(&path, e.to_string()))?;
                let sum: usize = lengths.iter().sum();
                if sum != *n {
                    return Err(cfg(&path, format!("{t} has {sum} neurons, not {n}")));
                }
            }
        }
        Ok(())
    }
}

/// One point of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub model_kind: ModelKind,
    pub n_r: usize,
    /// Cycle lengths for concentric kinds, otherwise the size.
    pub topology: String,
    pub v: f64,
    /// Cycle weight; spectral radius for the random baseline.
    pub w_c: f64,
    pub w_j: Option<f64>,
    pub tau_j: Option<usize>,
    pub alpha: f64,
    pub lambda: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub connectivity: Option<f64>,
    #[serde(default)]
    pub state_mode: StateMode,
}

impl TrialConfig {
    pub fn reservoir(&self) -> Result<ReservoirTopology> {
        let jumps = || -> Result<JumpSpec> {
            match (self.w_j, self.tau_j) {
                (Some(w), Some(t)) => JumpSpec::new(w, t),
                _ => Err(Error::param(format!("{} needs w_j and tau_j", self.model_kind))),
            }
        };
        let topo = match self.model_kind {
            ModelKind::Scr => ReservoirTopology::SimpleCycle {
                cycle: CycleSpec::new(self.n_r, self.w_c)?,
            },
            ModelKind::Crj => ReservoirTopology::CycleWithJumps {
                cycle: CycleSpec::new(self.n_r, self.w_c)?,
                jumps: jumps()?,
            },
            ModelKind::Cesn | ModelKind::Cjesn => {
                let lengths = parse_topology(&self.topology)?;
                if lengths.iter().sum::<usize>() != self.n_r {
                    return Err(Error::param(format!(
                        "topology {} does not have {} neurons",
                        self.topology, self.n_r
                    )));
                }
                ReservoirTopology::Concentric {
                    cycles: lengths
                        .iter()
                        .map(|&n| CycleSpec::new(n, self.w_c))
                        .collect::<Result<_>>()?,
                    jumps: if self.model_kind == ModelKind::Cjesn {
                        Some(jumps()?)
                    } else {
                        None
                    },
                }
            }
            ModelKind::RandomEsn => ReservoirTopology::RandomSparse {
                n_r: self.n_r,
                connectivity: self.connectivity.unwrap_or(DEFAULT_CONNECTIVITY),
                target_radius: self.w_c,
                seed: self.seed.unwrap_or(DEFAULT_SEED),
            },
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn esn(&self) -> Result<EsnConfig> {
        EsnConfig::new(self.reservoir()?.build_weights(1, self.v)?, self.alpha)
    }

    /// True when both configurations realize the same reservoir and inputs.
    fn same_reservoir(&self, other: &Self) -> bool {
        Self {
            lambda: 0.0,
            ..self.clone()
        } == Self {
            lambda: 0.0,
            ..other.clone()
        }
    }

    /// Lexicographic order over every field; floats by total order.
    pub fn lexicographic_cmp(&self, other: &Self) -> Ordering {
        let opt_f = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (a, b) => a.is_some().cmp(&b.is_some()),
        };
        self.model_kind
            .cmp(&other.model_kind)
            .then(self.n_r.cmp(&other.n_r))
            .then_with(|| self.topology.cmp(&other.topology))
            .then(self.v.total_cmp(&other.v))
            .then(self.w_c.total_cmp(&other.w_c))
            .then(opt_f(self.w_j, other.w_j))
            .then(self.tau_j.cmp(&other.tau_j))
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.lambda.total_cmp(&other.lambda))
            .then(self.seed.cmp(&other.seed))
            .then(opt_f(self.connectivity, other.connectivity))
    }
}

fn require<'a, T>(values: &'a [T], field: &str, kind: ModelKind) -> Result<&'a [T]> {
    if values.is_empty() {
        return Err(Error::Config {
            path: field.into(),
            msg: format!("{kind} needs at least one value"),
        });
    }
    Ok(values)
}

/// Cartesian product of the lists `kind` consumes, in the nesting order
/// topology, v, w_c, w_j, τ, α, λ (λ fastest).
pub fn enumerate_grid(spec: &GridSpec, kind: ModelKind, n_r: usize) -> Result<Vec<TrialConfig>> {
    let vs = require(&spec.input_weights, "input_weights", kind)?;
    let wcs = require(&spec.cycle_weights, "cycle_weights", kind)?;
    let alphas = require(&spec.leak_rates, "leak_rates", kind)?;
    let lambdas = require(&spec.lambdas, "lambdas", kind)?;
    let jumps: Vec<(Option<f64>, Option<usize>)> = if kind.uses_jumps() {
        let wjs = require(&spec.jump_weights, "jump_weights", kind)?;
        let taus = require(&spec.jump_sizes, "jump_sizes", kind)?;
        wjs.iter()
            .flat_map(|&w| taus.iter().map(move |&t| (Some(w), Some(t))))
            .collect()
    } else {
        vec![(None, None)]
    };
    let topologies = if kind.is_concentric() {
        let list = spec.topologies_per_size.get(&n_r).map(Vec::as_slice).unwrap_or(&[]);
        require(list, &format!("topologies_per_size.{n_r}"), kind)?.to_vec()
    } else {
        vec![n_r.to_string()]
    };
    let random = kind == ModelKind::RandomEsn;

    let mut out = Vec::with_capacity(topologies.len() * vs.len() * wcs.len() * jumps.len() * alphas.len() * lambdas.len());
    for topology in &topologies {
        for &v in vs {
            for &w_c in wcs {
                for &(w_j, tau_j) in &jumps {
                    for &alpha in alphas {
                        for &lambda in lambdas {
                            out.push(TrialConfig {
                                model_kind: kind,
                                n_r,
                                topology: topology.clone(),
                                v,
                                w_c,
                                w_j,
                                tau_j,
                                alpha,
                                lambda,
                                seed: random.then_some(spec.random_seed),
                                connectivity: random.then_some(spec.random_connectivity),
                                state_mode: spec.state_mode,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Every configuration of the spec: each kind at each size.
pub fn enumerate_all(spec: &GridSpec) -> Result<Vec<TrialConfig>> {
    let mut out = Vec::new();
    for &kind in &spec.model_kinds {
        for &n in &spec.reservoir_sizes {
            out.extend(enumerate_grid(spec, kind, n)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config: TrialConfig,
    pub train_err: f64,
    pub valid_err: f64,
    pub test_err: f64,
    pub valid_mse: f64,
    pub test_mse: f64,
    pub wall_ms: f64,
    /// Set when the trial could not be evaluated; errors are then infinite.
    pub failure: Option<String>,
}

impl TrialResult {
    fn failed(config: TrialConfig, reason: String, wall_ms: f64) -> Self {
        Self {
            config,
            train_err: f64::INFINITY,
            valid_err: f64::INFINITY,
            test_err: f64::INFINITY,
            valid_mse: f64::INFINITY,
            test_mse: f64::INFINITY,
            wall_ms,
            failure: Some(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// States of the three segments, each with its own washout. In continuous
/// mode each segment starts where the previous one ended.
pub fn harvest_segments(cfg: &EsnConfig, task: &SupervisedTask, mode: StateMode) -> Result<[StateMatrix; 3]> {
    let washout = task.split.washout;
    let mut carried = ReservoirState::zeros(cfg.n_r());
    let mut run = |segment: Segment| -> Result<StateMatrix> {
        let initial = match mode {
            StateMode::Reset => ReservoirState::zeros(cfg.n_r()),
            StateMode::Continuous => carried.clone(),
        };
        let (states, last) = harvest_scalar_from(cfg, task.inputs_of(segment), washout, initial)?;
        carried = last;
        Ok(states)
    };
    Ok([run(Segment::Train)?, run(Segment::Validation)?, run(Segment::Test)?])
}

struct Shared {
    states: [StateMatrix; 3],
    normal: NormalEquations,
}

fn prepare(config: &TrialConfig, task: &SupervisedTask) -> Result<Shared> {
    let cfg = config.esn()?;
    let states = harvest_segments(&cfg, task, config.state_mode)?;
    let normal = NormalEquations::new(&states[0], &[task.scored_targets(Segment::Train)])?;
    Ok(Shared { states, normal })
}

fn evaluate(shared: &Shared, lambda: f64, task: &SupervisedTask) -> Result<[ErrorReport; 3]> {
    let w = shared.normal.solve(lambda)?;
    let mut reports = [ErrorReport { nmse: 0.0, mse: 0.0, sample_count: 0 }; 3];
    for ((states, segment), report) in shared.states.iter().zip(Segment::ALL).zip(&mut reports) {
        let pred = predict_states(&w, states)?.swap_remove(0);
        if !pred.iter().all(|v| v.is_finite()) {
            return Err(Error::param("readout produced non-finite predictions"));
        }
        *report = error_report(&pred, task.scored_targets(segment))?;
    }
    Ok(reports)
}

/// Evaluates consecutive configurations that share a reservoir. Failures are
/// reported per trial, never raised.
fn run_group(group: &[TrialConfig], task: &SupervisedTask) -> Vec<TrialResult> {
    let started = Instant::now();
    let shared = prepare(&group[0], task);
    let shared_ms = started.elapsed().as_secs_f64() * 1e3 / group.len() as f64;
    group
        .iter()
        .map(|config| {
            let t = Instant::now();
            let outcome = match &shared {
                Ok(s) => evaluate(s, config.lambda, task).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            let wall_ms = shared_ms + t.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok([train, valid, test]) => TrialResult {
                    config: config.clone(),
                    train_err: train.nmse,
                    valid_err: valid.nmse,
                    test_err: test.nmse,
                    valid_mse: valid.mse,
                    test_mse: test.mse,
                    wall_ms,
                    failure: None,
                },
                Err(msg) => TrialResult::failed(config.clone(), msg, wall_ms),
            }
        })
        .collect()
}

pub fn run_trial(config: &TrialConfig, task: &SupervisedTask) -> TrialResult {
    run_group(std::slice::from_ref(config), task).swap_remove(0)
}

fn groups(configs: &[TrialConfig]) -> Vec<&[TrialConfig]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=configs.len() {
        if i == configs.len() || !configs[i].same_reservoir(&configs[start]) {
            out.push(&configs[start..i]);
            start = i;
        }
    }
    out
}

/// Runs every configuration on a pool of `workers` threads. Results come back
/// in configuration order whatever the degree of parallelism.
pub fn run_sweep(configs: &[TrialConfig], task: &SupervisedTask, workers: usize) -> Result<Vec<TrialResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    let batches = groups(configs);
    let nested: Vec<Vec<TrialResult>> = pool.install(|| batches.par_iter().map(|g| run_group(g, task)).collect());
    Ok(nested.into_iter().flatten().collect())
}

/// Lowest validation error; ties go to the smaller reservoir, then to the
/// lexicographically first configuration. Test errors are never read.
pub fn select_best(results: &[TrialResult]) -> Result<&TrialResult> {
    results
        .iter()
        .min_by(|a, b| {
            a.valid_err
                .total_cmp(&b.valid_err)
                .then(a.config.n_r.cmp(&b.config.n_r))
                .then_with(|| a.config.lexicographic_cmp(&b.config))
        })
        .ok_or_else(|| Error::param("cannot select from an empty result list"))
}

pub const CSV_HEADER: [&str; 11] = [
    "model_kind",
    "topology",
    "v",
    "w_c",
    "w_j",
    "tau_j",
    "alpha",
    "lambda",
    "valid_err",
    "test_err",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub model_kind: ModelKind,
    pub topology: String,
    pub v: f64,
    pub w_c: f64,
    pub w_j: Option<f64>,
    pub tau_j: Option<usize>,
    pub alpha: f64,
    pub lambda: f64,
    pub valid_err: f64,
    pub test_err: f64,
    pub wall_ms: f64,
}

impl From<&TrialResult> for CsvRow {
    fn from(r: &TrialResult) -> Self {
        let c = &r.config;
        Self {
            model_kind: c.model_kind,
            topology: c.topology.clone(),
            v: c.v,
            w_c: c.w_c,
            w_j: c.w_j,
            tau_j: c.tau_j,
            alpha: c.alpha,
            lambda: c.lambda,
            valid_err: r.valid_err,
            test_err: r.test_err,
            wall_ms: (r.wall_ms * 1e3).round() / 1e3,
        }
    }
}

pub fn write_results_csv<W: std::io::Write>(sink: W, results: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    if results.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in results {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_results_csv<R: std::io::Read>(source: R) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(source)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{generate_narma10, SplitSpec};
    use proptest::prelude::*;

    fn singleton() -> GridSpec {
        GridSpec {
            input_weights: vec![0.1],
            cycle_weights: vec![0.5],
            jump_weights: vec![0.3],
            reservoir_sizes: vec![20],
            lambdas: vec![1e-6],
            leak_rates: vec![1.0],
            jump_sizes: vec![5],
            topologies_per_size: BTreeMap::from([(20, vec!["10-10".to_string()])]),
            model_kinds: ModelKind::ALL.to_vec(),
            random_connectivity: 0.2,
            random_seed: 3,
            state_mode: StateMode::Reset,
        }
    }

    fn small_task(seed: u64) -> SupervisedTask {
        generate_narma10(1500, seed)
            .unwrap()
            .into_task(SplitSpec {
                train_len: 600,
                valid_len: 400,
                test_len: 400,
                washout: 50,
            })
            .unwrap()
    }

    #[test]
    fn full_grid_counts() {
        let spec = GridSpec::paper();
        for n in [100, 200, 600] {
            let per_topology = enumerate_grid(&spec, ModelKind::Cjesn, n).unwrap().len()
                / spec.topologies_per_size[&n].len();
            assert_eq!(per_topology, 268_800);
        }
        assert_eq!(enumerate_grid(&spec, ModelKind::Scr, 100).unwrap().len(), 4480);
        assert_eq!(enumerate_grid(&spec, ModelKind::Crj, 100).unwrap().len(), 4480 * 60);
        assert_eq!(enumerate_grid(&spec, ModelKind::Cesn, 300).unwrap().len(), 4480 * 7);
        for kind in ModelKind::ALL {
            assert_eq!(enumerate_grid(&singleton(), kind, 20).unwrap().len(), 1);
        }
    }

    #[test]
    fn paper_grid_lists() {
        let spec = GridSpec::paper();
        assert_eq!(spec.lambdas.len(), 16);
        assert_eq!((spec.lambdas[0], spec.lambdas[15]), (1e-15, 1.0));
        let topologies: usize = spec.topologies_per_size.values().map(Vec::len).sum();
        assert_eq!(topologies, 3 + 3 + 4 + 7 + 6 + 5);
        spec.validate().unwrap();
        let round = GridSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(round, spec);
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["cycle_weights"], serde_json::json!([0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]));
        assert_eq!(json["topologies_per_size"]["150"], serde_json::json!(["50-50-50", "75-75", "90-60"]));
    }

    #[test]
    fn fast_grid_thins_lists() {
        let f = GridSpec::fast();
        assert_eq!(f.input_weights, vec![0.1, 0.3, 0.5]);
        assert_eq!(f.cycle_weights, vec![0.4, 0.7, 1.0]);
        assert_eq!(f.jump_weights, vec![0.1, 0.6, 1.0]);
        assert_eq!(f.leak_rates, vec![0.1, 0.7, 1.0]);
        assert_eq!(f.jump_sizes, vec![5, 20, 45]);
        assert_eq!(f.lambdas, vec![1e-15, 1e-7, 1.0]);
        assert_eq!(f.topologies_per_size, GridSpec::paper().topologies_per_size);
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut json = serde_json::to_value(GridSpec::fast()).unwrap();
        json["leak_rates"][1] = serde_json::json!("fast");
        match GridSpec::from_json(&json.to_string()).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "leak_rates[1]"),
            e => panic!("{e}"),
        }
        let mut json = serde_json::to_value(GridSpec::fast()).unwrap();
        json["topologies_per_size"]["200"][1] = serde_json::json!("50-50");
        match GridSpec::from_json(&json.to_string()).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "topologies_per_size.200[1]"),
            e => panic!("{e}"),
        }
        let mut spec = singleton();
        spec.jump_sizes.clear();
        assert!(enumerate_grid(&spec, ModelKind::Scr, 20).is_ok());
        assert!(enumerate_grid(&spec, ModelKind::Cjesn, 20).is_err());
        assert!(enumerate_grid(&singleton(), ModelKind::Cesn, 30).is_err());
    }

    #[test]
    fn model_kind_names() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), k.as_str());
        }
        assert_eq!("cjesn".parse::<ModelKind>().unwrap(), ModelKind::Cjesn);
        assert!("deep".parse::<ModelKind>().is_err());
    }

    #[test]
    fn trials_are_deterministic() {
        let task = small_task(1);
        for config in enumerate_all(&singleton()).unwrap() {
            let a = run_trial(&config, &task);
            let b = run_trial(&config, &task);
            assert!(a.is_ok(), "{:?}", a.failure);
            assert_eq!(
                (a.train_err, a.valid_err, a.test_err),
                (b.train_err, b.valid_err, b.test_err)
            );
        }
    }

    #[test]
    fn grouped_sweep_matches_single_trials() {
        let task = small_task(2);
        let mut spec = singleton();
        spec.lambdas = vec![1e-15, 1e-6, 1.0];
        spec.leak_rates = vec![0.5, 1.0];
        let configs = enumerate_grid(&spec, ModelKind::Cjesn, 20).unwrap();
        let sweep = run_sweep(&configs, &task, 2).unwrap();
        assert_eq!(groups(&configs).len(), 2);
        for (config, r) in configs.iter().zip(&sweep) {
            let single = run_trial(config, &task);
            assert_eq!(&r.config, config);
            assert_eq!((r.valid_err, r.test_err), (single.valid_err, single.test_err));
        }
        // regularization can only worsen the training fit
        assert!(sweep[2].train_err >= sweep[0].train_err);
    }

    #[test]
    fn failures_are_recorded() {
        let task = small_task(3);
        let mut config = enumerate_grid(&singleton(), ModelKind::RandomEsn, 20).unwrap().remove(0);
        config.w_c = 1.0;
        let r = run_trial(&config, &task);
        assert!(!r.is_ok());
        assert_eq!(r.valid_err, f64::INFINITY);
        let mut config = enumerate_grid(&singleton(), ModelKind::Scr, 20).unwrap().remove(0);
        config.lambda = 0.0;
        config.alpha = 0.0;
        assert!(!run_trial(&config, &task).is_ok());
    }

    #[test]
    fn continuous_mode_differs_only_after_training() {
        let task = small_task(4);
        let mut config = enumerate_grid(&singleton(), ModelKind::Cjesn, 20).unwrap().remove(0);
        let reset = run_trial(&config, &task);
        config.state_mode = StateMode::Continuous;
        let cont = run_trial(&config, &task);
        assert_eq!(reset.train_err, cont.train_err);
        assert_ne!(reset.valid_err, cont.valid_err);
    }

    fn result(n_r: usize, valid: f64, test: f64, v: f64) -> TrialResult {
        let mut config = enumerate_grid(&singleton(), ModelKind::Scr, 20).unwrap().remove(0);
        config.n_r = n_r;
        config.v = v;
        TrialResult {
            config,
            train_err: 0.0,
            valid_err: valid,
            test_err: test,
            valid_mse: 0.0,
            test_mse: 0.0,
            wall_ms: 0.0,
            failure: None,
        }
    }

    #[test]
    fn selection_examples() {
        let one = [result(100, 0.05, 0.1, 0.1)];
        assert_eq!(select_best(&one).unwrap(), &one[0]);
        let two = [result(100, 0.05, 0.01, 0.1), result(100, 0.04, 0.9, 0.1)];
        assert_eq!(select_best(&two).unwrap().valid_err, 0.04);
        let tie = [result(150, 0.04, 0.0, 0.1), result(100, 0.04, 0.5, 0.2)];
        assert_eq!(select_best(&tie).unwrap().config.n_r, 100);
        let tie = [result(100, 0.04, 0.0, 0.3), result(100, 0.04, 0.5, 0.2)];
        assert_eq!(select_best(&tie).unwrap().config.v, 0.2);
        assert!(select_best(&[]).is_err());
        let failed = [result(100, f64::INFINITY, 0.0, 0.1), result(200, 0.3, 0.0, 0.1)];
        assert_eq!(select_best(&failed).unwrap().config.n_r, 200);
    }

    #[test]
    fn csv_round_trip() {
        let rs = [result(100, 0.05, 0.1, 0.1), result(100, f64::INFINITY, f64::INFINITY, 0.2)];
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        let rows = read_results_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], CsvRow::from(&rs[0]));
        assert_eq!(rows[1].valid_err, f64::INFINITY);
        let mut empty = Vec::new();
        write_results_csv(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), CSV_HEADER.join(","));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn selection_ignores_test_errors(
            valids in proptest::collection::vec(0.0f64..1.0, 1..20),
            tests in proptest::collection::vec(0.0f64..1.0, 20),
            rot in 0usize..20,
        ) {
            let rs: Vec<TrialResult> = valids.iter().enumerate()
                .map(|(i, &v)| result(100, v, tests[i], i as f64)).collect();
            let mut shuffled = rs.clone();
            let n = shuffled.len();
            for (i, r) in shuffled.iter_mut().enumerate() {
                r.test_err = tests[(i + rot) % n];
            }
            prop_assert_eq!(&select_best(&rs).unwrap().config, &select_best(&shuffled).unwrap().config);
        }
    }
}
