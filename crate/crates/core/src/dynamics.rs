//! Leaky-integrator reservoir dynamics and state harvesting.
//!
//! `x(t) = (1 − α)·x(t−1) + α·tanh(W_in·u(t) + W_h·x(t−1))`, starting from
//! the zero state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::topology::WeightSet;

/// Whether evaluation segments each start from a fresh zero state or share
/// one continuous pass over the stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMode {
    #[default]
    Reset,
    Continuous,
}

impl std::str::FromStr for StateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reset" => Ok(Self::Reset),
            "continuous" => Ok(Self::Continuous),
            other => Err(Error::param(format!(
                "state mode must be `reset` or `continuous`, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for StateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Reset => "reset",
            Self::Continuous => "continuous",
        })
    }
}

/// Everything needed to run the state update: weights, leak rate and the
/// derived dimensions. The activation is always `tanh`.
#[derive(Debug, Clone)]
pub struct EsnConfig {
    weights: WeightSet,
    leak_rate: f64,
    // nonzeros of W_h per row; deterministic reservoirs are very sparse
    sparse_rows: Vec<Vec<(usize, f64)>>,
}

impl EsnConfig {
    pub fn new(weights: WeightSet, leak_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&leak_rate) {
            return Err(Error::param(format!(
                "leak rate must lie in [0, 1], got {leak_rate}"
            )));
        }
        let w_h = &weights.w_h;
        let sparse_rows = (0..w_h.rows())
            .map(|r| {
                w_h.row(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, v)| (c, *v))
                    .collect()
            })
            .collect();
        Ok(Self {
            weights,
            leak_rate,
            sparse_rows,
        })
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn leak_rate(&self) -> f64 {
        self.leak_rate
    }

    pub fn n_r(&self) -> usize {
        self.weights.n_r()
    }

    pub fn n_u(&self) -> usize {
        self.weights.n_u()
    }

    fn update_in_place(&self, x: &mut [f64], scratch: &mut [f64], u: &[f64]) {
        let w_in = &self.weights.w_in;
        for (i, pre) in scratch.iter_mut().enumerate() {
            let mut acc: f64 = w_in.row(i).iter().zip(u).map(|(w, u)| w * u).sum();
            for &(c, w) in &self.sparse_rows[i] {
                acc += w * x[c];
            }
            *pre = acc;
        }
        let a = self.leak_rate;
        for (xi, pre) in x.iter_mut().zip(scratch.iter()) {
            *xi = (1.0 - a) * *xi + a * pre.tanh();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState {
    pub x: Vec<f64>,
    pub t: usize,
}

impl ReservoirState {
    pub fn zeros(n_r: usize) -> Self {
        Self {
            x: vec![0.0; n_r],
            t: 0,
        }
    }
}

/// Harvested states stored column by column: column `j` is `x(t_start + j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    n_r: usize,
    t_start: usize,
    data: Vec<f64>,
}

impl StateMatrix {
    pub fn new(n_r: usize, t_start: usize) -> Self {
        Self {
            n_r,
            t_start,
            data: Vec::new(),
        }
    }

    /// Builds a state matrix from explicit columns (e.g. synthetic states).
    pub fn from_columns(n_r: usize, t_start: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::new(n_r, t_start);
        for c in columns {
            if c.len() != n_r {
                return Err(Error::dim("StateMatrix::from_columns", n_r, c.len()));
            }
            m.data.extend_from_slice(c);
        }
        Ok(m)
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn len(&self) -> usize {
        if self.n_r == 0 {
            0
        } else {
            self.data.len() / self.n_r
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Retained time indices, half open.
    pub fn t_range(&self) -> std::ops::Range<usize> {
        self.t_start..self.t_start + self.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_r..(j + 1) * self.n_r]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_r.max(1))
    }

    /// Columns `range` as a new state matrix.
    pub fn slice(&self, range: std::ops::Range<usize>) -> StateMatrix {
        StateMatrix {
            n_r: self.n_r,
            t_start: self.t_start + range.start,
            data: self.data[range.start * self.n_r..range.end * self.n_r].to_vec(),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.data.extend_from_slice(x);
    }

    /// `N_R × T` dense copy. Fails on an empty state matrix.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        DenseMatrix::from_vec(self.len(), self.n_r, self.data.clone()).map(|m| m.transpose())
    }
}

pub fn step(state: &ReservoirState, u: &[f64], cfg: &EsnConfig) -> Result<ReservoirState> {
    if u.len() != cfg.n_u() {
        return Err(Error::dim("step (input)", cfg.n_u(), u.len()));
    }
    if state.x.len() != cfg.n_r() {
        return Err(Error::dim("step (state)", cfg.n_r(), state.x.len()));
    }
    let mut x = state.x.clone();
    let mut scratch = vec![0.0; cfg.n_r()];
    cfg.update_in_place(&mut x, &mut scratch, u);
    Ok(ReservoirState { x, t: state.t + 1 })
}

/// Runs the reservoir from the zero state over `inputs` and keeps the states
/// after the first `washout` steps.
pub fn harvest(cfg: &EsnConfig, inputs: &[Vec<f64>], washout: usize) -> Result<StateMatrix> {
    harvest_from(cfg, inputs, washout, ReservoirState::zeros(cfg.n_r())).map(|(m, _)| m)
}

/// Like [`harvest`] but from an explicit initial state; also returns the
/// final state so a later segment can continue from it.
pub fn harvest_from(
    cfg: &EsnConfig,
    inputs: &[Vec<f64>],
    washout: usize,
    initial: ReservoirState,
) -> Result<(StateMatrix, ReservoirState)> {
    if washout > inputs.len() {
        return Err(Error::param(format!(
            "washout {washout} exceeds sequence length {}",
            inputs.len()
        )));
    }
    if initial.x.len() != cfg.n_r() {
        return Err(Error::dim("harvest (state)", cfg.n_r(), initial.x.len()));
    }
    if let Some(bad) = inputs.iter().find(|u| u.len() != cfg.n_u()) {
        return Err(Error::dim("harvest (input)", cfg.n_u(), bad.len()));
    }
    let ReservoirState { mut x, t } = initial;
    let mut scratch = vec![0.0; cfg.n_r()];
    let mut states = StateMatrix::new(cfg.n_r(), t + washout + 1);
    states.data.reserve((inputs.len() - washout) * cfg.n_r());
    for (k, u) in inputs.iter().enumerate() {
        cfg.update_in_place(&mut x, &mut scratch, u);
        if k >= washout {
            states.push(&x);
        }
    }
    Ok((
        states,
        ReservoirState {
            x,
            t: t + inputs.len(),
        },
    ))
}

/// [`harvest`] for a scalar input stream.
pub fn harvest_scalar(cfg: &EsnConfig, inputs: &[f64], washout: usize) -> Result<StateMatrix> {
    harvest_scalar_from(cfg, inputs, washout, ReservoirState::zeros(cfg.n_r())).map(|(m, _)| m)
}

pub fn harvest_scalar_from(
    cfg: &EsnConfig,
    inputs: &[f64],
    washout: usize,
    initial: ReservoirState,
) -> Result<(StateMatrix, ReservoirState)> {
    if cfg.n_u() != 1 {
        return Err(Error::dim("harvest_scalar", 1, cfg.n_u()));
    }
    let wrapped: Vec<Vec<f64>> = inputs.iter().map(|&u| vec![u]).collect();
    harvest_from(cfg, &wrapped, washout, initial)
}
