//! Benchmark data: the NARMA-10 generator, one-value-per-line series files,
//! min-max normalization, train/validation/test splitting and i.i.d. streams.

use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pre-normalization magnitude beyond which a NARMA draw counts as divergent.
pub const NARMA_DIVERGENCE_BOUND: f64 = 10.0;
pub const NARMA_MAX_ATTEMPTS: usize = 10;
pub const NARMA_LENGTH: usize = 10_000;
pub const LASER_LENGTH: usize = 10_092;
pub const DEFAULT_WASHOUT: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("time series must hold at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            name: name.into(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_len: usize,
    pub valid_len: usize,
    pub test_len: usize,
    /// Leading states discarded in every segment.
    pub washout: usize,
}

impl SplitSpec {
    pub const fn narma() -> Self {
        Self {
            train_len: 2000,
            valid_len: 5000,
            test_len: 3000,
            washout: DEFAULT_WASHOUT,
        }
    }

    pub const fn laser() -> Self {
        Self {
            train_len: 2000,
            valid_len: 5000,
            test_len: 3092,
            washout: DEFAULT_WASHOUT,
        }
    }

    pub fn total(&self) -> usize {
        self.train_len + self.valid_len + self.test_len
    }

    pub fn validate(&self, series_len: usize) -> Result<()> {
        for (name, len) in [
            ("train", self.train_len),
            ("validation", self.valid_len),
            ("test", self.test_len),
        ] {
            if len < self.washout || len == self.washout {
                return Err(Error::param(format!(
                    "{name} segment of {len} samples leaves nothing after a washout of {}",
                    self.washout
                )));
            }
        }
        if self.total() > series_len {
            return Err(Error::param(format!(
                "split needs {} samples but the series has {series_len}",
                self.total()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Train,
    Validation,
    Test,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::Train, Segment::Validation, Segment::Test];
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedTask {
    pub inputs: TimeSeries,
    pub targets: TimeSeries,
    pub split: SplitSpec,
}

impl SupervisedTask {
    pub fn range(&self, segment: Segment) -> Range<usize> {
        let s = &self.split;
        match segment {
            Segment::Train => 0..s.train_len,
            Segment::Validation => s.train_len..s.train_len + s.valid_len,
            Segment::Test => s.train_len + s.valid_len..s.total(),
        }
    }

    pub fn inputs_of(&self, segment: Segment) -> &[f64] {
        &self.inputs.values()[self.range(segment)]
    }

    pub fn targets_of(&self, segment: Segment) -> &[f64] {
        &self.targets.values()[self.range(segment)]
    }

    /// Targets that survive the segment washout.
    pub fn scored_targets(&self, segment: Segment) -> &[f64] {
        &self.targets_of(segment)[self.split.washout..]
    }
}

pub fn make_task(inputs: TimeSeries, targets: TimeSeries, split: SplitSpec) -> Result<SupervisedTask> {
    if inputs.len() != targets.len() {
        return Err(Error::dim("make_task (targets)", inputs.len(), targets.len()));
    }
    split.validate(inputs.len())?;
    Ok(SupervisedTask {
        inputs,
        targets,
        split,
    })
}

/// Inputs `s[0..n-1]`, targets `s[1..n]`.
pub fn next_step_pair(series: &TimeSeries) -> Result<(TimeSeries, TimeSeries)> {
    let v = series.values();
    if v.len() < 2 {
        return Err(Error::param("next-step prediction needs at least two samples"));
    }
    Ok((
        TimeSeries::new(format!("{}:input", series.name), v[..v.len() - 1].to_vec())?,
        TimeSeries::new(format!("{}:target", series.name), v[1..].to_vec())?,
    ))
}

/// Next-value prediction on a series already normalized by the caller.
/// The test segment is shortened to what remains once one sample is lost to
/// the input/target shift.
pub fn next_step_task(series: &TimeSeries, split: SplitSpec) -> Result<SupervisedTask> {
    let (inputs, targets) = next_step_pair(series)?;
    let head = split.train_len + split.valid_len;
    let split = SplitSpec {
        test_len: split.test_len.min(inputs.len().saturating_sub(head)),
        ..split
    };
    make_task(inputs, targets, split)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarmaData {
    /// Raw `s(t)`.
    pub inputs: TimeSeries,
    /// `y(t)` normalized into [0, 1].
    pub targets: TimeSeries,
    /// Seed of the accepted draw; differs from the requested one after divergence.
    pub seed_used: u64,
}

impl NarmaData {
    pub fn into_task(self, split: SplitSpec) -> Result<SupervisedTask> {
        make_task(self.inputs, self.targets, split)
    }
}

/// Raw NARMA-10 recurrence for a given input sequence, with zero history.
/// Returns `None` once `|y|` leaves the divergence bound.
pub fn narma10_response(s: &[f64]) -> Option<Vec<f64>> {
    let n = s.len();
    let mut y = vec![0.0; n];
    // y[i] is y(i+1); it is driven by s(i), which is s[i-1] and zero for i = 0
    let s_at = |t: isize| if t >= 1 { s[(t - 1) as usize] } else { 0.0 };
    let y_at = |y: &[f64], t: isize| if t >= 1 { y[(t - 1) as usize] } else { 0.0 };
    for i in 0..n {
        let t = i as isize;
        let yt = y_at(&y, t);
        let window: f64 = (0..10).map(|d| y_at(&y, t - d)).sum();
        let next = 0.3 * yt + 0.05 * yt * window + 1.5 * s_at(t - 9) * s_at(t) + 0.1;
        if !next.is_finite() || next.abs() > NARMA_DIVERGENCE_BOUND {
            return None;
        }
        y[i] = next;
    }
    Some(y)
}

pub fn generate_narma10(length: usize, seed: u64) -> Result<NarmaData> {
    if length < 20 {
        return Err(Error::param(format!("NARMA length must be >= 20, got {length}")));
    }
    for attempt in 0..NARMA_MAX_ATTEMPTS as u64 {
        let seed_used = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed_used);
        let s: Vec<f64> = (0..length).map(|_| rng.gen_range(0.0..=0.5)).collect();
        let Some(y) = narma10_response(&s) else {
            continue;
        };
        let targets = normalize(&TimeSeries::new("narma10:y", y)?, 0.0, 1.0)?;
        return Ok(NarmaData {
            inputs: TimeSeries::new("narma10:s", s)?,
            targets,
            seed_used,
        });
    }
    Err(Error::Generation {
        attempts: NARMA_MAX_ATTEMPTS,
        reason: format!("NARMA-10 diverged (|y| > {NARMA_DIVERGENCE_BOUND}) starting at seed {seed}"),
    })
}

pub fn parse_series(name: &str, text: &str, origin: &Path) -> Result<TimeSeries> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::SeriesFormat {
            path: origin.to_path_buf(),
            line: i + 1,
            msg: format!("expected one decimal number per line, found {line:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::SeriesFormat {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: "value is not finite".into(),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::SeriesFormat {
            path: origin.to_path_buf(),
            line: 0,
            msg: "no values (expected one decimal number per line, '#' for comments)".into(),
        });
    }
    TimeSeries::new(name, values)
}

pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    parse_series(&name, &text, path)
}

/// Affine map of `[min, max]` onto `[lo, hi]`.
pub fn normalize(series: &TimeSeries, lo: f64, hi: f64) -> Result<TimeSeries> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(format!("normalization range [{lo}, {hi}] is empty")));
    }
    let (min, max) = series.min_max();
    if min == max {
        return Err(Error::param(format!(
            "cannot normalize constant series {:?}",
            series.name
        )));
    }
    let scale = (hi - lo) / (max - min);
    let values = series
        .values()
        .iter()
        .map(|&v| {
            if v == max {
                hi
            } else {
                lo + (v - min) * scale
            }
        })
        .collect();
    TimeSeries::new(series.name.clone(), values)
}

/// Uniform i.i.d. samples on `[low, high]`.
pub fn iid_stream(length: usize, seed: u64, low: f64, high: f64) -> Result<TimeSeries> {
    if length == 0 {
        return Err(Error::param("stream length must be >= 1"));
    }
    if !(high > low) || !low.is_finite() || !high.is_finite() {
        return Err(Error::param(format!("stream range [{low}, {high}] is empty")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..length).map(|_| rng.gen_range(low..=high)).collect();
    TimeSeries::new(format!("iid[{low},{high}]#{seed}"), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use std::io::Write;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new("t", v.to_vec()).unwrap()
    }

    #[test]
    fn narma_first_values() {
        let s = vec![0.2; 30];
        let y = narma10_response(&s).unwrap();
        assert_eq!(y[0], 0.1);
        assert_abs_diff_eq!(y[1], 0.1305, epsilon = 1e-15);
    }

    /// Direct transcription with explicit zero-padded history buffers.
    fn narma_oracle(s: &[f64]) -> Vec<f64> {
        let pad = 10;
        let mut sp = vec![0.0; pad];
        sp.extend_from_slice(s);
        let mut yp = vec![0.0; pad + 1];
        for t in pad..pad + s.len() {
            // yp[t] is y(t - pad), sp[t] is s(t - pad + 1)
            let sum: f64 = yp[t - 9..=t].iter().sum();
            let s_now = sp[t - 1];
            let s_old = if t >= 10 { sp[t - 10] } else { 0.0 };
            yp.push(0.3 * yp[t] + 0.05 * yp[t] * sum + 1.5 * s_old * s_now + 0.1);
        }
        yp[pad + 1..].to_vec()
    }

    #[test]
    fn narma_matches_padded_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..0.5)).collect();
        let y = narma10_response(&s).unwrap();
        let o = narma_oracle(&s);
        assert_eq!(y.len(), o.len());
        for (a, b) in y.iter().zip(&o) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn narma_generation() {
        let a = generate_narma10(NARMA_LENGTH, 7).unwrap();
        let b = generate_narma10(NARMA_LENGTH, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.inputs.len(), NARMA_LENGTH);
        assert!(a.inputs.values().iter().all(|v| (0.0..=0.5).contains(v)));
        assert_eq!(a.targets.min_max(), (0.0, 1.0));
        let task = a.into_task(SplitSpec::narma()).unwrap();
        assert_eq!(task.range(Segment::Test), 7000..10_000);
        assert!(generate_narma10(19, 0).is_err());
    }

    #[test]
    fn divergent_responses_are_rejected() {
        assert!(narma10_response(&[0.25; 500]).is_some());
        assert!(narma10_response(&[5.0; 50]).is_none());
    }

    #[test]
    fn load_examples() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, body: &str| {
            let p = dir.path().join(name);
            std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
            p
        };
        assert_eq!(load_series(write("a.txt", "1.0\n2.0\n")).unwrap().values(), &[1.0, 2.0]);
        assert_eq!(load_series(write("b.txt", "# c\n3.5\n")).unwrap().values(), &[3.5]);
        assert_eq!(load_series(write("n.txt", "4")).unwrap().values(), &[4.0]);
        match load_series(write("c.txt", "abc\n")).unwrap_err() {
            Error::SeriesFormat { line, .. } => assert_eq!(line, 1),
            e => panic!("{e}"),
        }
        match load_series(write("d.txt", "1\n# x\n2\nnan\n")).unwrap_err() {
            Error::SeriesFormat { line, .. } => assert_eq!(line, 4),
            e => panic!("{e}"),
        }
        assert!(load_series(write("e.txt", "# only\n")).is_err());
        assert!(matches!(
            load_series(dir.path().join("missing.txt")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&ts(&[0.0, 5.0, 10.0]), 0.0, 1.0).unwrap().values(), &[0.0, 0.5, 1.0]);
        assert_eq!(normalize(&ts(&[0.0, 5.0, 10.0]), -1.0, 1.0).unwrap().values(), &[-1.0, 0.0, 1.0]);
        assert!(normalize(&ts(&[2.0, 2.0, 2.0]), 0.0, 1.0).is_err());
        assert!(normalize(&ts(&[0.0, 1.0]), 1.0, 1.0).is_err());
    }

    #[test]
    fn split_defaults() {
        let v: Vec<f64> = (0..NARMA_LENGTH).map(|i| i as f64).collect();
        let task = make_task(ts(&v), ts(&v), SplitSpec::narma()).unwrap();
        let lens: Vec<usize> = Segment::ALL.iter().map(|&s| task.inputs_of(s).len()).collect();
        assert_eq!(lens, [2000, 5000, 3000]);
        assert_eq!(task.scored_targets(Segment::Validation)[0], 2200.0);

        let v: Vec<f64> = (0..LASER_LENGTH).map(|i| i as f64).collect();
        let task = make_task(ts(&v), ts(&v), SplitSpec::laser()).unwrap();
        assert_eq!(task.inputs_of(Segment::Test).len(), 3092);
        assert_eq!(task.range(Segment::Test).end, LASER_LENGTH);

        assert!(make_task(ts(&v[..9000]), ts(&v[..9000]), SplitSpec::narma()).is_err());
        assert!(make_task(ts(&v[..20]), ts(&v[..21]), SplitSpec {
            train_len: 5,
            valid_len: 5,
            test_len: 5,
            washout: 1
        })
        .is_err());
        let tight = SplitSpec { train_len: 200, ..SplitSpec::narma() };
        assert!(tight.validate(NARMA_LENGTH).is_err());
    }

    #[test]
    fn next_step_alignment_on_ramp() {
        let ramp: Vec<f64> = (0..LASER_LENGTH).map(|i| i as f64).collect();
        let task = next_step_task(&ts(&ramp), SplitSpec::laser()).unwrap();
        for seg in Segment::ALL {
            for (u, y) in task.inputs_of(seg).iter().zip(task.targets_of(seg)) {
                assert_eq!(*y, u + 1.0);
            }
        }
        assert_eq!(task.split.test_len, 3091);
        assert_eq!(task.inputs_of(Segment::Validation)[0], 2000.0);
    }

    #[test]
    fn iid_examples() {
        let a = iid_stream(6000, 1, -1.0, 1.0).unwrap();
        assert_eq!(a.len(), 6000);
        assert!(a.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(a, iid_stream(6000, 1, -1.0, 1.0).unwrap());
        assert_ne!(a, iid_stream(6000, 2, -1.0, 1.0).unwrap());
        let big = iid_stream(100_000, 9, -1.0, 1.0).unwrap();
        let mean = big.values().iter().sum::<f64>() / 1e5;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!(iid_stream(0, 1, -1.0, 1.0).is_err());
        assert!(iid_stream(5, 1, 1.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn normalized_series_spans_range(
            values in proptest::collection::vec(-1e3f64..1e3, 2..200),
            lo in -5.0f64..5.0, width in 0.1f64..10.0,
        ) {
            let s = ts(&values);
            let (min, max) = s.min_max();
            prop_assume!(max > min);
            let n = normalize(&s, lo, lo + width).unwrap();
            let (a, b) = n.min_max();
            prop_assert_eq!(a, lo);
            prop_assert_eq!(b, lo + width);
        }

        #[test]
        fn segments_tile_the_prefix(train in 2usize..50, valid in 2usize..50, test in 2usize..50, extra in 0usize..20) {
            let split = SplitSpec { train_len: train, valid_len: valid, test_len: test, washout: 1 };
            let v: Vec<f64> = (0..split.total() + extra).map(|i| i as f64).collect();
            let task = make_task(ts(&v), ts(&v), split).unwrap();
            let mut cursor = 0;
            for seg in Segment::ALL {
                let r = task.range(seg);
                prop_assert_eq!(r.start, cursor);
                cursor = r.end;
            }
            prop_assert_eq!(cursor, split.total());
        }

        #[test]
        fn narma_stays_bounded(seed in any::<u64>()) {
            let d = generate_narma10(2000, seed).unwrap();
            prop_assert!(d.targets.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
