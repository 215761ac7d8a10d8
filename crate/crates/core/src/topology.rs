//! Reservoir and input weight construction.
//!
//! Deterministic builders (simple cycle, cycle with jumps, concentric cycles)
//! and the seeded random sparse reservoir. Node indices are 1-based in the
//! public pair lists and 0-based in matrices.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{spectral_radius, DenseMatrix};

/// Environment variable that points at an alternative π digit file.
pub const PI_DIGITS_ENV: &str = "CRLAB_PI_DIGITS";

static BUNDLED_PI_DIGITS: &str = include_str!("../data/pi_digits.txt");

const MAX_RANDOM_ATTEMPTS: u64 = 10;

/// One unidirectional loop of `length` neurons sharing a single weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub length: usize,
    pub weight: f64,
}

impl CycleSpec {
    pub fn new(length: usize, weight: f64) -> Result<Self> {
        let c = Self { length, weight };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::param(format!(
                "cycle length must be at least 2, got {}",
                self.length
            )));
        }
        if !self.weight.is_finite() || self.weight <= 0.0 {
            return Err(Error::param(format!(
                "cycle weight must be finite and positive, got {}",
                self.weight
            )));
        }
        Ok(())
    }
}

/// Bidirectional shortcut connections of weight `weight` every `step` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub weight: f64,
    pub step: usize,
}

impl JumpSpec {
    pub fn new(weight: f64, step: usize) -> Result<Self> {
        let j = Self { weight, step };
        j.validate()?;
        Ok(j)
    }

    fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::param("jump step must be at least 1"));
        }
        if !self.weight.is_finite() {
            return Err(Error::param("jump weight must be finite"));
        }
        Ok(())
    }
}

/// Declarative description of a reservoir graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReservoirTopology {
    RandomSparse {
        n_r: usize,
        connectivity: f64,
        target_radius: f64,
        seed: u64,
    },
    SimpleCycle {
        cycle: CycleSpec,
    },
    CycleWithJumps {
        cycle: CycleSpec,
        jumps: JumpSpec,
    },
    /// Cycles ordered outermost first.
    Concentric {
        cycles: Vec<CycleSpec>,
        jumps: Option<JumpSpec>,
    },
}

impl ReservoirTopology {
    pub fn n_r(&self) -> usize {
        match self {
            Self::RandomSparse { n_r, .. } => *n_r,
            Self::SimpleCycle { cycle } | Self::CycleWithJumps { cycle, .. } => cycle.length,
            Self::Concentric { cycles, .. } => cycles.iter().map(|c| c.length).sum(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Self::RandomSparse { .. })
    }

    /// `n1-n2-...` for cycle topologies, the plain size for random ones.
    pub fn label(&self) -> String {
        match self {
            Self::RandomSparse { n_r, .. } => n_r.to_string(),
            Self::SimpleCycle { cycle } | Self::CycleWithJumps { cycle, .. } => {
                cycle.length.to_string()
            }
            Self::Concentric { cycles, .. } => format_topology(
                &cycles.iter().map(|c| c.length).collect::<Vec<_>>(),
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::RandomSparse {
                n_r,
                connectivity,
                target_radius,
                ..
            } => check_random_params(*n_r, *connectivity, *target_radius),
            Self::SimpleCycle { cycle } => cycle.validate(),
            Self::CycleWithJumps { cycle, jumps } => {
                cycle.validate()?;
                jumps.validate()?;
                check_crj_step(cycle.length, jumps.step)
            }
            Self::Concentric { cycles, jumps } => {
                if cycles.len() < 2 {
                    return Err(Error::param(format!(
                        "concentric reservoirs need at least 2 cycles, got {}",
                        cycles.len()
                    )));
                }
                cycles.iter().try_for_each(CycleSpec::validate)?;
                jumps.as_ref().map_or(Ok(()), JumpSpec::validate)
            }
        }
    }

    /// Realizes the reservoir matrix `W_h`.
    pub fn build(&self) -> Result<DenseMatrix> {
        self.validate()?;
        match self {
            Self::RandomSparse {
                n_r,
                connectivity,
                target_radius,
                seed,
            } => build_random_esn(*n_r, *connectivity, *target_radius, *seed),
            Self::SimpleCycle { cycle } => build_scr(cycle.length, cycle.weight),
            Self::CycleWithJumps { cycle, jumps } => build_crj(cycle.length, cycle.weight, jumps),
            Self::Concentric { cycles, jumps } => build_concentric(cycles, jumps.as_ref()),
        }
    }

    /// Reservoir plus input matrix. Cycle reservoirs take π-signed inputs of
    /// magnitude `input_scale`; random ones draw uniform inputs from their own
    /// seed. A zero scale disconnects the input.
    pub fn build_weights(&self, n_u: usize, input_scale: f64) -> Result<WeightSet> {
        if !input_scale.is_finite() || input_scale < 0.0 {
            return Err(Error::param(format!(
                "input scale must be non-negative, got {input_scale}"
            )));
        }
        let w_h = self.build()?;
        let n_r = w_h.rows();
        let w_in = match self {
            _ if input_scale == 0.0 => DenseMatrix::zeros(n_r, n_u.max(1)),
            Self::RandomSparse { seed, .. } => {
                build_uniform_input_weights(n_r, n_u, input_scale, seed ^ INPUT_SEED_SALT)?
            }
            _ => build_input_weights(n_r, n_u, InputWeightSpec::new(input_scale)?)?,
        };
        WeightSet::new(w_in, w_h)
    }
}

// keeps the input draw of a random ESN independent of its reservoir draw
const INPUT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Common absolute value `v` of every input weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputWeightSpec {
    pub magnitude: f64,
}

impl InputWeightSpec {
    pub fn new(magnitude: f64) -> Result<Self> {
        if !magnitude.is_finite() || magnitude <= 0.0 {
            return Err(Error::param(format!(
                "input weight magnitude must be positive, got {magnitude}"
            )));
        }
        Ok(Self { magnitude })
    }
}

/// Input matrix `W_in` (N_R × N_U) and reservoir matrix `W_h` (N_R × N_R).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub w_in: DenseMatrix,
    pub w_h: DenseMatrix,
}

impl WeightSet {
    pub fn new(w_in: DenseMatrix, w_h: DenseMatrix) -> Result<Self> {
        if !w_h.is_square() {
            return Err(Error::dim(
                "WeightSet",
                "square reservoir matrix",
                format!("{}x{}", w_h.rows(), w_h.cols()),
            ));
        }
        if w_in.rows() != w_h.rows() {
            return Err(Error::dim("WeightSet", w_h.rows(), w_in.rows()));
        }
        Ok(Self { w_in, w_h })
    }

    pub fn n_r(&self) -> usize {
        self.w_h.rows()
    }

    pub fn n_u(&self) -> usize {
        self.w_in.cols()
    }
}

/// Decimal digits of π after the decimal point.
#[derive(Debug, Clone)]
pub struct PiDigits {
    digits: Vec<u8>,
}

impl PiDigits {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_PI_DIGITS).expect("bundled pi digits are well formed")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> Result<Self> {
        let text = text.trim_end();
        let digits = text
            .bytes()
            .map(|b| {
                if b.is_ascii_digit() {
                    Ok(b - b'0')
                } else {
                    Err(Error::param(format!(
                        "pi digit file must contain only digits, found {:?}",
                        b as char
                    )))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        if digits.is_empty() {
            return Err(Error::param("pi digit file is empty"));
        }
        Ok(Self { digits })
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Signs from the first `n` digits: 0-4 → −1, 5-9 → +1.
    pub fn signs(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::param("requested zero pi signs"));
        }
        if n > self.digits.len() {
            return Err(Error::DigitBudget {
                requested: n,
                available: self.digits.len(),
            });
        }
        Ok(self.digits[..n]
            .iter()
            .map(|&d| if d < 5 { -1.0 } else { 1.0 })
            .collect())
    }
}

/// The process-wide digit source: `$CRLAB_PI_DIGITS` if set, else the
/// bundled file.
pub fn default_pi_digits() -> Result<&'static PiDigits> {
    static SOURCE: OnceLock<std::result::Result<PiDigits, String>> = OnceLock::new();
    SOURCE
        .get_or_init(|| match std::env::var_os(PI_DIGITS_ENV) {
            Some(path) => PiDigits::from_path(Path::new(&path)).map_err(|e| e.to_string()),
            None => Ok(PiDigits::bundled()),
        })
        .as_ref()
        .map_err(|e| Error::param(format!("{PI_DIGITS_ENV}: {e}")))
}

pub fn pi_signs(n: usize) -> Result<Vec<f64>> {
    default_pi_digits()?.signs(n)
}

/// Dense `N_R × N_U` input matrix; entry (i, j) takes the sign of π digit
/// `i·N_U + j + 1` and magnitude `v`.
pub fn build_input_weights(n_r: usize, n_u: usize, spec: InputWeightSpec) -> Result<DenseMatrix> {
    build_input_weights_from(default_pi_digits()?, n_r, n_u, spec)
}

pub fn build_input_weights_from(
    digits: &PiDigits,
    n_r: usize,
    n_u: usize,
    spec: InputWeightSpec,
) -> Result<DenseMatrix> {
    if n_r == 0 || n_u == 0 {
        return Err(Error::param("input weight dimensions must be positive"));
    }
    let signs = digits.signs(n_r * n_u)?;
    DenseMatrix::from_vec(
        n_r,
        n_u,
        signs.into_iter().map(|s| s * spec.magnitude).collect(),
    )
}

/// Seeded uniform input weights in `[−scale, scale]`, as used by the random
/// ESN baseline.
pub fn build_uniform_input_weights(
    n_r: usize,
    n_u: usize,
    scale: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if n_r == 0 || n_u == 0 {
        return Err(Error::param("input weight dimensions must be positive"));
    }
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::param(format!("input scale must be non-negative, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n_r * n_u)
        .map(|_| scale * rng.gen_range(-1.0..=1.0))
        .collect();
    DenseMatrix::from_vec(n_r, n_u, data)
}

fn write_cycle(w: &mut DenseMatrix, offset: usize, length: usize, weight: f64) {
    for i in 0..length - 1 {
        w[(offset + i + 1, offset + i)] = weight;
    }
    w[(offset, offset + length - 1)] = weight;
}

/// Bidirectional edge; superposes onto whatever is already there.
fn write_jump(w: &mut DenseMatrix, a: usize, b: usize, weight: f64) {
    w[(a, b)] += weight;
    w[(b, a)] += weight;
}

pub fn build_scr(n_r: usize, w_c: f64) -> Result<DenseMatrix> {
    let cycle = CycleSpec::new(n_r, w_c)?;
    let mut w = DenseMatrix::zeros(n_r, n_r);
    write_cycle(&mut w, 0, cycle.length, cycle.weight);
    Ok(w)
}

fn check_crj_step(n_r: usize, step: usize) -> Result<()> {
    if step < 2 || step >= n_r {
        return Err(Error::param(format!(
            "jump step must satisfy 2 <= step < {n_r}, got {step}"
        )));
    }
    Ok(())
}

/// Jump pairs of a cycle with jumps, 1-indexed, in anchor order.
///
/// Anchors sit at 1, 1+τ, 1+2τ, ...; consecutive anchors are joined and the
/// last anchor closes back onto node 1 (with a shorter span when τ does not
/// divide N_R).
pub fn crj_jump_pairs(n_r: usize, step: usize) -> Result<Vec<(usize, usize)>> {
    check_crj_step(n_r, step)?;
    let anchors: Vec<usize> = (1..=n_r).step_by(step).collect();
    let mut pairs: Vec<(usize, usize)> = anchors.windows(2).map(|w| (w[0], w[1])).collect();
    if let Some(&last) = anchors.last() {
        if last != 1 {
            pairs.push((last, 1));
        }
    }
    Ok(pairs)
}

pub fn build_crj(n_r: usize, w_c: f64, jumps: &JumpSpec) -> Result<DenseMatrix> {
    jumps.validate()?;
    let pairs = crj_jump_pairs(n_r, jumps.step)?;
    let mut w = build_scr(n_r, w_c)?;
    for (a, b) in pairs {
        write_jump(&mut w, a - 1, b - 1, jumps.weight);
    }
    Ok(w)
}

/// Jump pairs between adjacent concentric cycles, 1-indexed global nodes.
///
/// Local position p of one cycle links to local position p of the next for
/// p = 1, 1+τ, ... while p fits in the shorter of the two.
pub fn concentric_jump_pairs(lengths: &[usize], step: usize) -> Result<Vec<(usize, usize)>> {
    if step == 0 {
        return Err(Error::param("jump step must be at least 1"));
    }
    let mut pairs = Vec::new();
    let mut offset = 0;
    for w in lengths.windows(2) {
        let (na, nb) = (w[0], w[1]);
        for p in (1..=na.min(nb)).step_by(step) {
            pairs.push((offset + p, offset + na + p));
        }
        offset += na;
    }
    Ok(pairs)
}

pub fn build_concentric(cycles: &[CycleSpec], jumps: Option<&JumpSpec>) -> Result<DenseMatrix> {
    if cycles.is_empty() {
        return Err(Error::param("concentric reservoir needs at least one cycle"));
    }
    cycles.iter().try_for_each(CycleSpec::validate)?;
    let n: usize = cycles.iter().map(|c| c.length).sum();
    let mut w = DenseMatrix::zeros(n, n);
    let mut offset = 0;
    for c in cycles {
        write_cycle(&mut w, offset, c.length, c.weight);
        offset += c.length;
    }
    if let Some(j) = jumps {
        j.validate()?;
        let lengths: Vec<usize> = cycles.iter().map(|c| c.length).collect();
        for (a, b) in concentric_jump_pairs(&lengths, j.step)? {
            write_jump(&mut w, a - 1, b - 1, j.weight);
        }
    }
    Ok(w)
}

fn check_random_params(n_r: usize, connectivity: f64, target_radius: f64) -> Result<()> {
    if n_r == 0 {
        return Err(Error::param("reservoir size must be positive"));
    }
    if !(connectivity > 0.0 && connectivity <= 1.0) {
        return Err(Error::param(format!(
            "connectivity must lie in (0, 1], got {connectivity}"
        )));
    }
    if !(target_radius > 0.0 && target_radius < 1.0) {
        return Err(Error::param(format!(
            "target spectral radius must lie in (0, 1), got {target_radius}"
        )));
    }
    Ok(())
}

/// Sparse uniform `[−1, 1]` reservoir rescaled to `target_radius`.
///
/// A draw with zero spectral radius cannot be rescaled; it is redrawn with the
/// next seed, up to ten attempts.
pub fn build_random_esn(
    n_r: usize,
    connectivity: f64,
    target_radius: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    check_random_params(n_r, connectivity, target_radius)?;
    for attempt in 0..MAX_RANDOM_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut w = DenseMatrix::zeros(n_r, n_r);
        for r in 0..n_r {
            for v in w.row_mut(r) {
                if rng.gen_bool(connectivity) {
                    *v = rng.gen_range(-1.0..=1.0);
                }
            }
        }
        let radius = spectral_radius(&w)?;
        if radius > 0.0 {
            return Ok(w.scaled(target_radius / radius));
        }
    }
    Err(Error::Generation {
        attempts: MAX_RANDOM_ATTEMPTS as usize,
        reason: "random reservoir draws had zero spectral radius".into(),
    })
}

/// Parses `n1-n2-...` into cycle lengths, outermost first.
pub fn parse_topology(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::TopologyParse("empty topology string".into()));
    }
    text.split('-')
        .map(|tok| {
            let tok = tok.trim();
            let n: usize = tok
                .parse()
                .map_err(|_| Error::TopologyParse(format!("invalid cycle length {tok:?} in {text:?}")))?;
            if n == 0 {
                return Err(Error::TopologyParse(format!("zero cycle length in {text:?}")));
            }
            Ok(n)
        })
        .collect()
}

pub fn format_topology(lengths: &[usize]) -> String {
    lengths
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

/// Expected nonzero positions `(row, col)` of a deterministic reservoir,
/// 1-indexed. Random reservoirs have no fixed structure and return `None`.
pub fn expected_edges(topology: &ReservoirTopology) -> Result<Option<BTreeSet<(usize, usize)>>> {
    topology.validate()?;
    let cycle_edges = |offset: usize, len: usize| {
        (1..=len).map(move |p| {
            let next = if p == len { 1 } else { p + 1 };
            (offset + next, offset + p)
        })
    };
    let mut edges = BTreeSet::new();
    match topology {
        ReservoirTopology::RandomSparse { .. } => return Ok(None),
        ReservoirTopology::SimpleCycle { cycle } => edges.extend(cycle_edges(0, cycle.length)),
        ReservoirTopology::CycleWithJumps { cycle, jumps } => {
            edges.extend(cycle_edges(0, cycle.length));
            if jumps.weight != 0.0 {
                for (a, b) in crj_jump_pairs(cycle.length, jumps.step)? {
                    edges.insert((a, b));
                    edges.insert((b, a));
                }
            }
        }
        ReservoirTopology::Concentric { cycles, jumps } => {
            let mut offset = 0;
            for c in cycles {
                edges.extend(cycle_edges(offset, c.length));
                offset += c.length;
            }
            if let Some(j) = jumps.filter(|j| j.weight != 0.0) {
                let lengths: Vec<usize> = cycles.iter().map(|c| c.length).collect();
                for (a, b) in concentric_jump_pairs(&lengths, j.step)? {
                    edges.insert((a, b));
                    edges.insert((b, a));
                }
            }
        }
    }
    Ok(Some(edges))
}

/// Checks that a reservoir matrix has exactly the nonzero pattern of its
/// topology and a zero main diagonal.
pub fn audit_structure(topology: &ReservoirTopology, w_h: &DenseMatrix) -> Result<()> {
    let n = topology.n_r();
    if w_h.rows() != n || w_h.cols() != n {
        return Err(Error::dim(
            "audit_structure",
            format!("{n}x{n}"),
            format!("{}x{}", w_h.rows(), w_h.cols()),
        ));
    }
    let Some(expected) = expected_edges(topology)? else {
        return Ok(());
    };
    for r in 0..n {
        if w_h[(r, r)] != 0.0 {
            return Err(Error::param(format!("nonzero diagonal entry at node {}", r + 1)));
        }
        for c in 0..n {
            let present = w_h[(r, c)] != 0.0;
            if present != expected.contains(&(r + 1, c + 1)) {
                return Err(Error::param(format!(
                    "unexpected {} at ({}, {})",
                    if present { "edge" } else { "missing edge" },
                    r + 1,
                    c + 1
                )));
            }
        }
    }
    Ok(())
}
