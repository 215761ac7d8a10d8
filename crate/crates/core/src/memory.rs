//! Short-term memory capacity.
//!
//! A reservoir is driven by an i.i.d. stream and a single readout with one
//! output per delay `k = 1..K` is trained to recall `u(t−k)`. On held-out data
//! `MC_k = Cov²(u(t−k), y_k(t)) / (Var(u(t)) Var(y_k(t)))` and the capacity is
//! the sum over delays.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{harvest_scalar, EsnConfig, StateMatrix};
use crate::error::{Error, Result};
use crate::readout::{predict_states, NormalEquations};
use crate::tasks::{iid_stream, TimeSeries};
use crate::topology::{parse_topology, CycleSpec, JumpSpec, ReservoirTopology};

pub const MC_STREAM_LEN: usize = 6000;
pub const MC_TRAIN_LEN: usize = 5000;
pub const MC_TEST_LEN: usize = 1000;
pub const MC_K_MAX: usize = 200;
pub const MC_WASHOUT: usize = 100;
pub const MC_N_R: usize = 100;
pub const MC_INPUT_SCALE: f64 = 0.1;
pub const MC_LAMBDA: f64 = 1e-8;
pub const MC_STREAM_SEED: u64 = 2019;

/// Squared correlation between `u(t−k)` and `y(t)`.
///
/// `y` covers the scored times `t0..t0+m`; `u` must cover `t0−k..t0+m`, so
/// `u.len() == y.len() + k`. The variance of the input is taken over the
/// undelayed window `u(t0..t0+m)`. A constant `y` gives 0.
pub fn mc_k(u: &[f64], y: &[f64], k: usize) -> Result<f64> {
    if u.len() != y.len() + k {
        return Err(Error::dim("mc_k (input covers scored window plus delay)", y.len() + k, u.len()));
    }
    let m = y.len();
    if m < 2 {
        return Err(Error::param(format!("mc_k needs at least 2 overlapping samples, got {m}")));
    }
    let delayed = &u[..m];
    let current = &u[k..];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / m as f64;
    let (md, my, mc) = (mean(delayed), mean(y), mean(current));
    let mut cov = 0.0;
    let mut var_y = 0.0;
    let mut var_u = 0.0;
    for i in 0..m {
        let dy = y[i] - my;
        cov += (delayed[i] - md) * dy;
        var_y += dy * dy;
        var_u += (current[i] - mc).powi(2);
    }
    if var_y == 0.0 {
        return Ok(0.0);
    }
    if var_u == 0.0 {
        return Err(Error::param("mc_k undefined for a constant input"));
    }
    let n = m as f64;
    Ok((cov / n).powi(2) / ((var_u / n) * (var_y / n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McProtocol {
    pub k_max: usize,
    pub train_len: usize,
    pub test_len: usize,
    /// Leading training states dropped before regression; raised to `k_max`
    /// when smaller so every training target `u(t−k)` exists.
    pub washout: usize,
    pub lambda: f64,
}

impl Default for McProtocol {
    fn default() -> Self {
        Self {
            k_max: MC_K_MAX,
            train_len: MC_TRAIN_LEN,
            test_len: MC_TEST_LEN,
            washout: MC_WASHOUT,
            lambda: MC_LAMBDA,
        }
    }
}

impl McProtocol {
    pub fn effective_washout(&self) -> usize {
        self.washout.max(self.k_max)
    }

    fn validate(&self, stream_len: usize) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::param("k_max must be >= 1"));
        }
        if self.train_len + self.test_len > stream_len {
            return Err(Error::param(format!(
                "MC split {}+{} exceeds stream length {stream_len}",
                self.train_len, self.test_len
            )));
        }
        if self.effective_washout() >= self.train_len {
            return Err(Error::param(format!(
                "training portion of {} leaves no samples after dropping {}",
                self.train_len,
                self.effective_washout()
            )));
        }
        if self.test_len < 2 {
            return Err(Error::param("MC test portion needs at least 2 samples"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::param(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSnapshot {
    pub n_r: usize,
    pub n_u: usize,
    pub leak_rate: f64,
    pub reservoir_nonzeros: usize,
    pub input_max_abs: f64,
    pub protocol: McProtocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// `MC_k` clipped to [0, 1], index `k − 1`.
    pub per_delay: Vec<f64>,
    /// Unclipped values.
    pub raw_per_delay: Vec<f64>,
    pub total: f64,
    pub k_max: usize,
    pub config_snapshot: Option<McSnapshot>,
}

/// MC from states already aligned with the stream: column `i` of `states` is
/// the state after reading `stream[i]`.
pub fn estimate_mc_from_states(states: &StateMatrix, stream: &[f64], protocol: &McProtocol) -> Result<McResult> {
    protocol.validate(stream.len())?;
    let end = protocol.train_len + protocol.test_len;
    if states.len() < end {
        return Err(Error::dim("estimate_mc (state columns)", end, states.len()));
    }
    let k_max = protocol.k_max;
    let start = protocol.effective_washout();
    let train_states = states.slice(start..protocol.train_len);
    let targets: Vec<&[f64]> = (1..=k_max)
        .map(|k| &stream[start - k..protocol.train_len - k])
        .collect();
    let w = NormalEquations::new(&train_states, &targets)?.solve(protocol.lambda)?;
    let predictions = predict_states(&w, &states.slice(protocol.train_len..end))?;

    let mut raw = Vec::with_capacity(k_max);
    for (i, y) in predictions.iter().enumerate() {
        let k = i + 1;
        raw.push(mc_k(&stream[protocol.train_len - k..end], y, k)?);
    }
    let per_delay: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(McResult {
        total: per_delay.iter().sum(),
        per_delay,
        raw_per_delay: raw,
        k_max,
        config_snapshot: None,
    })
}

pub fn estimate_mc(cfg: &EsnConfig, stream: &TimeSeries, protocol: &McProtocol) -> Result<McResult> {
    if cfg.n_u() != 1 {
        return Err(Error::dim("estimate_mc (input units)", 1, cfg.n_u()));
    }
    protocol.validate(stream.len())?;
    let end = protocol.train_len + protocol.test_len;
    let values = &stream.values()[..end];
    let states = harvest_scalar(cfg, values, 0)?;
    let mut result = estimate_mc_from_states(&states, values, protocol)?;
    let weights = cfg.weights();
    result.config_snapshot = Some(McSnapshot {
        n_r: cfg.n_r(),
        n_u: cfg.n_u(),
        leak_rate: cfg.leak_rate(),
        reservoir_nonzeros: weights.w_h.nonzero_count(),
        input_max_abs: weights.w_in.max_abs(),
        protocol: *protocol,
    });
    Ok(result)
}

/// Default uniform `[−1, 1]` stream of the standard protocol length.
pub fn default_stream(seed: u64) -> Result<TimeSeries> {
    iid_stream(MC_STREAM_LEN, seed, -1.0, 1.0)
}

/// Hyperparameter lists explored when searching for the best MC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McGrid {
    pub topologies: Vec<String>,
    pub leak_rates: Vec<f64>,
    pub cycle_weights: Vec<f64>,
    pub jump_weights: Vec<f64>,
    pub jump_steps: Vec<usize>,
    pub input_scale: f64,
}

impl McGrid {
    pub fn standard(topologies: &[&str]) -> Self {
        Self {
            topologies: topologies.iter().map(|s| s.to_string()).collect(),
            leak_rates: vec![0.0, 0.55, 1.0],
            cycle_weights: vec![0.1, 0.5, 0.9],
            jump_weights: vec![0.1, 0.5, 0.9],
            jump_steps: vec![5, 25, 50],
            input_scale: MC_INPUT_SCALE,
        }
    }

    /// Two-cycle topologies compared in the MC study.
    pub fn two_cycle_topologies() -> Vec<&'static str> {
        vec!["75-25", "25-75", "40-60", "20-80", "15-85", "80-20", "95-5", "90-10", "85-15"]
    }

    /// Concentric reservoirs without jumps (`with_jumps = false`) or with them.
    pub fn concentric_trials(&self, with_jumps: bool) -> Result<Vec<McTrial>> {
        let mut out = Vec::new();
        for topo in &self.topologies {
            let lengths = parse_topology(topo)?;
            for &alpha in &self.leak_rates {
                for &w_c in &self.cycle_weights {
                    let cycles = lengths
                        .iter()
                        .map(|&n| CycleSpec::new(n, w_c))
                        .collect::<Result<Vec<_>>>()?;
                    if !with_jumps {
                        out.push(McTrial {
                            topology: ReservoirTopology::Concentric { cycles, jumps: None },
                            leak_rate: alpha,
                            input_scale: self.input_scale,
                        });
                        continue;
                    }
                    for &w_j in &self.jump_weights {
                        for &tau in &self.jump_steps {
                            out.push(McTrial {
                                topology: ReservoirTopology::Concentric {
                                    cycles: cycles.clone(),
                                    jumps: Some(JumpSpec::new(w_j, tau)?),
                                },
                                leak_rate: alpha,
                                input_scale: self.input_scale,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTrial {
    pub topology: ReservoirTopology,
    pub leak_rate: f64,
    pub input_scale: f64,
}

impl McTrial {
    pub fn run(&self, stream: &TimeSeries, protocol: &McProtocol) -> Result<McResult> {
        let weights = self.topology.build_weights(1, self.input_scale)?;
        let cfg = EsnConfig::new(weights, self.leak_rate)?;
        estimate_mc(&cfg, stream, protocol)
    }
}

/// Runs every trial on `workers` threads; results keep the trial order.
pub fn mc_sweep(
    trials: &[McTrial],
    stream: &TimeSeries,
    protocol: &McProtocol,
    workers: usize,
) -> Result<Vec<Result<McResult>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        trials
            .par_iter()
            .map(|t| t.run(stream, protocol))
            .collect()
    }))
}

/// Index of the highest total among successful results; the earliest wins ties.
pub fn best_mc(results: &[Result<McResult>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        if let Ok(r) = r {
            if best.map_or(true, |(_, t)| r.total > t) {
                best = Some((i, r.total));
            }
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::WeightSet;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn periodic(period: usize, len: usize) -> Vec<f64> {
        (0..len).map(|i| ((i % period) as f64 * 1.7).sin()).collect()
    }

    #[test]
    fn mc_k_examples() {
        // period k makes the delayed and current windows the same multiset
        let k = 5;
        let u = periodic(k, 105);
        let recall: Vec<f64> = u[..100].to_vec();
        assert_abs_diff_eq!(mc_k(&u, &recall, k).unwrap(), 1.0, epsilon = 1e-12);
        let negated: Vec<f64> = recall.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(mc_k(&u, &negated, k).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(mc_k(&u, &[0.3; 100], k).unwrap(), 0.0);
        assert!(mc_k(&u, &recall, k + 1).is_err());
        assert!(mc_k(&[1.0, 2.0], &[1.0], 1).is_err());
    }

    #[test]
    fn mc_k_uses_undelayed_variance() {
        // u(t−1) takes values {0, 2}, u(t) takes {2, 2}: delayed variance 1, current variance 0
        assert!(mc_k(&[0.0, 2.0, 2.0], &[0.0, 2.0], 1).is_err());
        // current window {2, 4} has variance 1, delayed {0, 2} also 1
        assert_abs_diff_eq!(mc_k(&[0.0, 2.0, 4.0], &[0.0, 2.0], 1).unwrap(), 1.0);
        // current window {2, 6} has variance 4: MC = 1/4
        assert_abs_diff_eq!(mc_k(&[0.0, 2.0, 6.0], &[0.0, 2.0], 1).unwrap(), 0.25);
    }

    fn delay_line_states(stream: &[f64], depth: usize) -> StateMatrix {
        let cols: Vec<Vec<f64>> = (0..stream.len())
            .map(|t| {
                (1..=depth)
                    .map(|j| if t >= j { stream[t - j] } else { 0.0 })
                    .collect()
            })
            .collect();
        StateMatrix::from_columns(depth, 1, &cols).unwrap()
    }

    #[test]
    fn delay_line_recall() {
        let stream = default_stream(MC_STREAM_SEED).unwrap();
        let states = delay_line_states(stream.values(), 20);
        let r = estimate_mc_from_states(&states, stream.values(), &McProtocol::default()).unwrap();
        assert_eq!(r.per_delay.len(), 200);
        for k in 1..=20 {
            assert!(r.per_delay[k - 1] >= 0.99, "k={k}: {}", r.per_delay[k - 1]);
        }
        let tail = r.per_delay[29..].iter().sum::<f64>() / 171.0;
        assert!(tail <= 0.05, "{tail}");
    }

    #[test]
    fn disconnected_input_has_no_memory() {
        let topo = ReservoirTopology::SimpleCycle {
            cycle: CycleSpec::new(MC_N_R, 0.9).unwrap(),
        };
        let cfg = EsnConfig::new(topo.build_weights(1, 0.0).unwrap(), 1.0).unwrap();
        let r = estimate_mc(&cfg, &default_stream(1).unwrap(), &McProtocol::default()).unwrap();
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn scr_memory_is_bounded_and_fades() {
        let stream = default_stream(MC_STREAM_SEED).unwrap();
        let trial = McTrial {
            topology: ReservoirTopology::SimpleCycle {
                cycle: CycleSpec::new(MC_N_R, 0.9).unwrap(),
            },
            leak_rate: 1.0,
            input_scale: MC_INPUT_SCALE,
        };
        let r = trial.run(&stream, &McProtocol::default()).unwrap();
        assert!(r.total > 5.0 && r.total <= MC_N_R as f64 + 2.0, "{}", r.total);
        let tail = r.per_delay[149..].iter().sum::<f64>() / 51.0;
        assert!(tail <= 0.1, "{tail}");
        let snap = r.config_snapshot.unwrap();
        assert_eq!((snap.n_r, snap.reservoir_nonzeros), (100, 100));
    }

    #[test]
    fn protocol_checks() {
        let stream = default_stream(1).unwrap();
        let states = delay_line_states(&stream.values()[..100], 5);
        let p = McProtocol::default();
        assert!(estimate_mc_from_states(&states, stream.values(), &p).is_err());
        let bad = McProtocol { train_len: 150, ..p };
        assert!(bad.validate(6000).is_err());
        let over = McProtocol { test_len: 1001, ..p };
        assert!(over.validate(6000).is_err());
        assert_eq!(p.effective_washout(), 200);
        let cfg = EsnConfig::new(
            WeightSet::new(
                crate::numerics::DenseMatrix::zeros(3, 2),
                crate::numerics::DenseMatrix::zeros(3, 3),
            )
            .unwrap(),
            1.0,
        )
        .unwrap();
        assert!(estimate_mc(&cfg, &stream, &p).is_err());
    }

    #[test]
    fn grid_counts() {
        let g = McGrid::standard(&McGrid::two_cycle_topologies());
        assert_eq!(g.concentric_trials(false).unwrap().len(), 9 * 3 * 3);
        assert_eq!(g.concentric_trials(true).unwrap().len(), 9 * 3 * 3 * 3 * 3);
    }

    #[test]
    fn best_picks_highest_total() {
        let mk = |t: f64| {
            Ok(McResult {
                per_delay: vec![],
                raw_per_delay: vec![],
                total: t,
                k_max: 0,
                config_snapshot: None,
            })
        };
        let rs = vec![mk(1.0), Err(Error::param("x")), mk(3.0), mk(3.0)];
        assert_eq!(best_mc(&rs), Some(2));
        assert_eq!(best_mc(&[]), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mc_k_affine_invariant(
            u in proptest::collection::vec(-1.0f64..1.0, 40..80),
            noise in proptest::collection::vec(-0.5f64..0.5, 80),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], b in -3.0f64..3.0, k in 0usize..5,
        ) {
            let m = u.len() - k;
            let y: Vec<f64> = (0..m).map(|i| u[i] + noise[i]).collect();
            let y2: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let m1 = mc_k(&u, &y, k).unwrap();
            let m2 = mc_k(&u, &y2, k).unwrap();
            prop_assert!((m1 - m2).abs() <= 1e-9 * m1.max(1.0));
            prop_assert!(m1 >= 0.0);
        }
    }
}
