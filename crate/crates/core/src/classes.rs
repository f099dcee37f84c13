//! Generators and validators for the studied string classes and the hard
//! instance constructions.
//!
//! Every generator is a pure function of its [`ClassSpec`] (including the
//! seed), and every generator's output passes [`validate_class`] for the same
//! spec. Thresholds use the base-`1/q` logarithm and are rounded up to
//! integers.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum ClassError {
    #[error("infeasible spec: {0}")]
    Infeasible(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    AllLongRuns,
    LongOneRuns,
    #[serde(rename = "gap")]
    GapClass,
    PerturbedGap,
    DenseIntervals,
    Random,
}

impl ClassKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassKind::AllLongRuns => "all-long-runs",
            ClassKind::LongOneRuns => "long-one-runs",
            ClassKind::GapClass => "gap",
            ClassKind::PerturbedGap => "perturbed-gap",
            ClassKind::DenseIntervals => "dense-intervals",
            ClassKind::Random => "random",
        }
    }
}

/// Parameters of one string class instance: target length `n`, accuracy
/// `epsilon`, the constant `c_prime`, the channel deletion probability `q`
/// (which fixes the log base), and the generator seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub class_kind: ClassKind,
    pub n: usize,
    pub epsilon: f64,
    pub c_prime: f64,
    pub q: f64,
    pub seed: u64,
}

/// `log_{1/q}(n) = ln n / ln(1/q)`.
pub fn log_base_inv_q(n: usize, q: f64) -> f64 {
    (n as f64).ln() / (1.0 / q).ln()
}

fn ceil_pos(x: f64) -> usize {
    x.ceil().max(0.0) as usize
}

impl ClassSpec {
    pub fn log_n(&self) -> f64 {
        log_base_inv_q(self.n, self.q)
    }

    /// Minimum run length for the all-long-runs class: `ceil(5 log n)`.
    pub fn all_runs_min(&self) -> usize {
        ceil_pos(5.0 * self.log_n())
    }

    /// Minimum 1-run length for the long-one-runs class: `ceil(C' log n / eps^2)`.
    pub fn long_one_run_min(&self) -> usize {
        ceil_pos(self.c_prime * self.log_n() / (self.epsilon * self.epsilon))
    }

    /// Minimum 1-run length for the gap class: `ceil(C' log n / eps)`.
    pub fn gap_one_run_min(&self) -> usize {
        ceil_pos(self.c_prime * self.log_n() / self.epsilon)
    }

    /// The closed forbidden interval `[ceil(C' log n), ceil(3 C' log n)]` for
    /// 0-run lengths in the gap class.
    pub fn gap_bounds(&self) -> (usize, usize) {
        (
            ceil_pos(self.c_prime * self.log_n()),
            ceil_pos(3.0 * self.c_prime * self.log_n()),
        )
    }

    /// Per-run flip budget for the perturbed class: `floor(eps C' log n)`.
    pub fn flip_budget(&self) -> usize {
        (self.epsilon * self.c_prime * self.log_n()).floor().max(0.0) as usize
    }

    /// Minimum interval length for the dense-intervals class:
    /// `ceil(C' log n / eps^2)`.
    pub fn interval_min(&self) -> usize {
        ceil_pos(self.c_prime * self.log_n() / (self.epsilon * self.epsilon))
    }

    /// Largest allowed minority count for a dense interval of length `len`
    /// (density threshold `1 - eps/12`, closed).
    pub fn dense_minority_budget(&self, len: usize) -> usize {
        (self.epsilon / 12.0 * len as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<(), ClassError> {
        if self.n < 2 {
            return Err(ClassError::InvalidSpec(format!("n = {} too small", self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ClassError::InvalidSpec(format!(
                "epsilon = {} not in (0,1)",
                self.epsilon
            )));
        }
        if !(0.05..=0.95).contains(&self.q) {
            return Err(ClassError::InvalidSpec(format!("q = {} not in [0.05, 0.95]", self.q)));
        }
        if self.c_prime <= 0.0 {
            return Err(ClassError::InvalidSpec("c_prime must be positive".into()));
        }
        match self.class_kind {
            ClassKind::AllLongRuns => {
                let t = self.all_runs_min();
                if t < 1 {
                    return Err(ClassError::InvalidSpec("run threshold rounds to zero".into()));
                }
                if self.n < t {
                    return Err(ClassError::Infeasible(format!(
                        "n = {} below single-run minimum {t}",
                        self.n
                    )));
                }
            }
            ClassKind::LongOneRuns => {
                let t = self.long_one_run_min();
                if self.n < t {
                    return Err(ClassError::Infeasible(format!(
                        "no room for a 1-run of length {t} in n = {}",
                        self.n
                    )));
                }
            }
            ClassKind::GapClass | ClassKind::PerturbedGap => {
                let one_min = self.gap_one_run_min();
                let (gap_lo, _) = self.gap_bounds();
                if gap_lo < 2 {
                    return Err(ClassError::InvalidSpec(
                        "gap lower bound leaves no room for short 0-runs".into(),
                    ));
                }
                if self.n < one_min {
                    return Err(ClassError::Infeasible(format!(
                        "no room for a 1-run of length {one_min} in n = {}",
                        self.n
                    )));
                }
            }
            ClassKind::DenseIntervals => {
                let t = self.interval_min();
                if self.n < t {
                    return Err(ClassError::Infeasible(format!(
                        "n = {} below single-interval minimum {t}",
                        self.n
                    )));
                }
            }
            ClassKind::Random => {}
        }
        Ok(())
    }
}

/// Which of the hard pair a block was drawn as.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockChoice {
    A,
    B,
}

/// Ground truth for a block-concatenation instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockTruth {
    pub block_length: usize,
    pub choices: Vec<BlockChoice>,
    /// Trailing 0-fill after the last whole block.
    pub remainder_zeros: usize,
}

impl BlockTruth {
    /// The `k` of the underlying hard pair (`block_length = 4k + 3`).
    pub fn pair_index(&self) -> usize {
        (self.block_length - 3) / 4
    }

    /// Reassembles the generated string from the recorded choices.
    pub fn rebuild(&self) -> Bits {
        let (a, b) = gen_hard_pair(self.pair_index());
        let mut out =
            Bits::with_capacity(self.block_length * self.choices.len() + self.remainder_zeros);
        for c in &self.choices {
            out.extend_from(match c {
                BlockChoice::A => &a,
                BlockChoice::B => &b,
            });
        }
        out.extend_run(false, self.remainder_zeros);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub len: usize,
    pub majority: bool,
}

/// Positions flipped by [`perturb_runs`], plus the per-run counts in run order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipLog {
    pub positions: Vec<usize>,
    pub per_run: Vec<usize>,
}

/// Generator side data needed to validate classes that cannot be checked from
/// the string alone.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ClassMeta {
    pub intervals: Option<Vec<Interval>>,
    pub flips: Option<FlipLog>,
}

// stream tags keep the generator families on disjoint substreams of one seed
const STREAM_COMPOSE: u64 = 1;
const STREAM_PERTURB: u64 = 2;
const STREAM_DENSE: u64 = 3;
const STREAM_BLOCK: u64 = 4;
const STREAM_RANDOM: u64 = 5;

/// Disjoint inclusive integer spans; samples run lengths uniformly from a
/// union of feasible windows.
#[derive(Default, Debug)]
struct WindowSet {
    spans: Vec<(usize, usize)>,
}

impl WindowSet {
    fn add(&mut self, lo: usize, hi: usize) {
        if lo <= hi {
            self.spans.push((lo, hi));
        }
    }

    fn normalize(&mut self) {
        self.spans.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(self.spans.len());
        for &(lo, hi) in &self.spans {
            match merged.last_mut() {
                Some((_, mhi)) if lo <= mhi.saturating_add(1) => *mhi = (*mhi).max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        self.spans = merged;
    }

    fn clipped(&self, lo: usize, hi: usize) -> WindowSet {
        let mut out = WindowSet::default();
        for &(slo, shi) in &self.spans {
            out.add(slo.max(lo), shi.min(hi));
        }
        out
    }

    fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    fn total(&self) -> usize {
        self.spans.iter().map(|&(lo, hi)| hi - lo + 1).sum()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let mut idx = rng.random_range(0..self.total());
        for &(lo, hi) in &self.spans {
            let size = hi - lo + 1;
            if idx < size {
                return lo + idx;
            }
            idx -= size;
        }
        unreachable!("sample index within total")
    }
}

/// All runs at least `ceil(5 log n)` long; total length exactly `n`.
pub fn gen_all_long_runs(spec: &ClassSpec) -> Result<Bits, ClassError> {
    expect_kind(spec, ClassKind::AllLongRuns)?;
    spec.validate()?;
    let t = spec.all_runs_min();
    let mut rng = seed::stream(&[spec.seed, STREAM_COMPOSE]);
    let mut value = rng.random::<bool>();
    let mut out = Bits::with_capacity(spec.n);
    let mut remaining = spec.n;
    while remaining > 0 {
        let len = if remaining < 2 * t { remaining } else { rng.random_range(t..=remaining - t) };
        out.extend_run(value, len);
        value = !value;
        remaining -= len;
    }
    Ok(out)
}

/// Every 1-run at least `ceil(C' log n / eps^2)` long; 0-runs arbitrary.
pub fn gen_long_one_runs(spec: &ClassSpec) -> Result<Bits, ClassError> {
    expect_kind(spec, ClassKind::LongOneRuns)?;
    spec.validate()?;
    let one_min = spec.long_one_run_min();
    let n = spec.n;
    let mut rng = seed::stream(&[spec.seed, STREAM_COMPOSE]);

    match rng.random_range(0..8u32) {
        0 => return Ok(Bits::ones(n)),
        1 => return Ok(Bits::zeros(n)),
        _ => {}
    }

    let mut runs = Vec::new();
    let mut value = rng.random::<bool>();
    if !value && n < one_min + 1 {
        value = true; // a leading 0-run would leave no room for any 1-run
    }
    let mut remaining = n;
    while remaining > 0 {
        let mut full = WindowSet::default();
        if value {
            // any remainder is completable after a 1-run
            full.add(one_min, remaining);
        } else {
            full.add(remaining, remaining);
            if remaining > one_min {
                full.add(1, remaining - one_min);
            }
        }
        full.normalize();
        if full.is_empty() {
            return Err(ClassError::Infeasible(format!("stuck at remainder {remaining}")));
        }
        let preferred = full.clipped(if value { one_min } else { 1 }, 2 * one_min);
        let len =
            if preferred.is_empty() { full.sample(&mut rng) } else { preferred.sample(&mut rng) };
        runs.push((value, len));
        remaining -= len;
        value = !value;
    }
    Ok(build_runs(&runs))
}

/// 1-runs at least `ceil(C' log n / eps)`; every 0-run strictly shorter or
/// strictly longer than the closed gap `[ceil(C' log n), ceil(3 C' log n)]`.
pub fn gen_gap_class(spec: &ClassSpec) -> Result<Bits, ClassError> {
    if !matches!(spec.class_kind, ClassKind::GapClass | ClassKind::PerturbedGap) {
        return Err(ClassError::InvalidSpec(format!(
            "gap generator called with {:?}",
            spec.class_kind
        )));
    }
    spec.validate()?;
    let one_min = spec.gap_one_run_min();
    let (gap_lo, gap_hi) = spec.gap_bounds();
    let short_max = gap_lo - 1;
    let long_min = gap_hi + 1;
    let n = spec.n;
    let mut rng = seed::stream(&[spec.seed, STREAM_COMPOSE]);

    match rng.random_range(0..8u32) {
        0 => return Ok(Bits::ones(n)),
        1 if n <= short_max || n >= long_min => return Ok(Bits::zeros(n)),
        _ => {}
    }

    // a remainder r before a 0-run is completable iff r == 0, or r fits a
    // single legal 0-run, or a legal 0-run plus a minimum 1-run fit
    let zero_rest_min = long_min.min(one_min + 1);
    let can_start_zero = n <= short_max || n >= long_min || n >= one_min + 1;

    let mut value = if can_start_zero { rng.random::<bool>() } else { true };
    let mut runs = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let len = if value {
            let mut full = WindowSet::default();
            if remaining >= one_min {
                full.add(remaining, remaining);
                if remaining > one_min {
                    full.add(one_min.max(remaining.saturating_sub(short_max)), remaining - 1);
                }
                if remaining >= one_min + zero_rest_min {
                    full.add(one_min, remaining - zero_rest_min);
                }
            }
            full.normalize();
            if full.is_empty() {
                return Err(ClassError::Infeasible(format!("stuck at remainder {remaining}")));
            }
            let pref = full.clipped(one_min, one_min + one_min / 2);
            if pref.is_empty() { full.sample(&mut rng) } else { pref.sample(&mut rng) }
        } else {
            let mut full = WindowSet::default();
            if remaining <= short_max || remaining >= long_min {
                full.add(remaining, remaining);
            }
            if remaining > one_min {
                let cap = remaining - one_min;
                full.add(1, cap.min(short_max));
                if cap >= long_min {
                    full.add(long_min, cap);
                }
            }
            full.normalize();
            if full.is_empty() {
                return Err(ClassError::Infeasible(format!("stuck at remainder {remaining}")));
            }
            // shorts stay at half the cap and longs start a quarter above the
            // floor; run images under the channel then stay clear of the gap
            let short_pref = full.clipped(1, (short_max / 2).max(1));
            let long_pref = full.clipped(long_min + long_min / 4, long_min + 3 * (long_min / 4));
            match (short_pref.is_empty(), long_pref.is_empty()) {
                (false, false) => {
                    if rng.random::<bool>() {
                        short_pref.sample(&mut rng)
                    } else {
                        long_pref.sample(&mut rng)
                    }
                }
                (false, true) => short_pref.sample(&mut rng),
                (true, false) => long_pref.sample(&mut rng),
                (true, true) => full.sample(&mut rng),
            }
        };
        runs.push((value, len));
        remaining -= len;
        value = !value;
    }
    Ok(build_runs(&runs))
}

/// Flips, independently per run of `y`, a uniformly sized (up to the spec's
/// flip budget) uniformly placed set of positions.
pub fn perturb_runs(y: &Bits, spec: &ClassSpec) -> Result<(Bits, FlipLog), ClassError> {
    spec.validate()?;
    let budget = spec.flip_budget();
    let mut rng = seed::stream(&[spec.seed, STREAM_PERTURB]);
    let mut x = y.clone();
    let mut log = FlipLog::default();
    let mut start = 0usize;
    for &len in &y.runs().lengths {
        let count = rng.random_range(0..=budget.min(len));
        let mut picks: Vec<usize> =
            index::sample(&mut rng, len, count).iter().map(|i| start + i).collect();
        picks.sort_unstable();
        for &p in &picks {
            x.flip(p);
        }
        log.positions.extend(picks);
        log.per_run.push(count);
        start += len;
    }
    Ok((x, log))
}

/// Adversarial variant: flips the first `min(budget, len)` bits of every run.
pub fn perturb_runs_adversarial(y: &Bits, spec: &ClassSpec) -> Result<(Bits, FlipLog), ClassError> {
    spec.validate()?;
    let budget = spec.flip_budget();
    let mut x = y.clone();
    let mut log = FlipLog::default();
    let mut start = 0usize;
    for &len in &y.runs().lengths {
        let count = budget.min(len);
        for p in start..start + count {
            x.flip(p);
            log.positions.push(p);
        }
        log.per_run.push(count);
        start += len;
    }
    Ok((x, log))
}

/// Contiguous intervals, each at least `ceil(C' log n / eps^2)` long and with
/// density at least `1 - eps/12` of its majority bit.
pub fn gen_dense_intervals(spec: &ClassSpec) -> Result<(Bits, Vec<Interval>), ClassError> {
    expect_kind(spec, ClassKind::DenseIntervals)?;
    spec.validate()?;
    let imin = spec.interval_min();
    let n = spec.n;
    let mut rng = seed::stream(&[spec.seed, STREAM_DENSE]);
    let mut x = Bits::with_capacity(n);
    let mut intervals = Vec::new();
    let mut pos = 0usize;
    while pos < n {
        let rem = n - pos;
        let len =
            if rem < 2 * imin { rem } else { rng.random_range(imin..=(rem - imin).min(2 * imin)) };
        let majority = rng.random::<bool>();
        let minority = rng.random_range(0..=spec.dense_minority_budget(len));
        x.extend_run(majority, len);
        for i in index::sample(&mut rng, len, minority).iter() {
            x.flip(pos + i);
        }
        intervals.push(Interval { start: pos, len, majority });
        pos += len;
    }
    Ok((x, intervals))
}

/// Uniform random bits; the baseline class.
pub fn gen_random(spec: &ClassSpec) -> Result<Bits, ClassError> {
    expect_kind(spec, ClassKind::Random)?;
    spec.validate()?;
    let mut rng = seed::stream(&[spec.seed, STREAM_RANDOM]);
    Ok((0..spec.n).map(|_| rng.random::<bool>()).collect())
}

/// The hard-to-distinguish pair `(01)^k 1 (01)^{k+1}` and `(01)^{k+1} 1 (01)^k`,
/// each of length `4k + 3`.
pub fn gen_hard_pair(k: usize) -> (Bits, Bits) {
    assert!(k >= 1, "hard pair needs k >= 1");
    let alt = |reps: usize| {
        let mut b = Bits::with_capacity(2 * reps);
        for _ in 0..reps {
            b.push(false);
            b.push(true);
        }
        b
    };
    let mut x = alt(k);
    x.push(true);
    x.extend_from(&alt(k + 1));
    let mut y = alt(k + 1);
    y.push(true);
    y.extend_from(&alt(k));
    (x, y)
}

/// The Hamming-separated pair `0^k (01)^k 0^{k+1}` and `0^{k+1} (01)^k 0^k`,
/// each of length `4k + 1` and at Hamming distance `2k`.
pub fn gen_hamming_pair(k: usize) -> (Bits, Bits) {
    assert!(k >= 1, "hamming pair needs k >= 1");
    let mid = |b: &mut Bits| {
        for _ in 0..k {
            b.push(false);
            b.push(true);
        }
    };
    let mut x = Bits::zeros(k);
    mid(&mut x);
    x.extend_run(false, k + 1);
    let mut y = Bits::zeros(k + 1);
    mid(&mut y);
    y.extend_run(false, k);
    (x, y)
}

/// A length-`n` concatenation of independent uniform choices of the hard
/// pair. The block length is the largest realizable `4k + 3` not exceeding
/// `ceil(1/(128 eps))`, with `k >= 1`; any trailing remainder is 0-filled and
/// recorded.
pub fn gen_block_concat(
    n: usize,
    epsilon: f64,
    seed_value: u64,
) -> Result<(Bits, BlockTruth), ClassError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ClassError::InvalidSpec(format!("epsilon = {epsilon} not in (0,1)")));
    }
    let target = (1.0 / (128.0 * epsilon)).ceil() as usize;
    let k = (target.saturating_sub(3) / 4).max(1);
    let block_length = 4 * k + 3;
    if n < block_length {
        return Err(ClassError::Infeasible(format!(
            "n = {n} below one block of length {block_length}"
        )));
    }
    let blocks = n / block_length;
    let remainder_zeros = n - blocks * block_length;
    let (a, b) = gen_hard_pair(k);
    let mut rng = seed::stream(&[seed_value, STREAM_BLOCK]);
    let mut out = Bits::with_capacity(n);
    let mut choices = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        if rng.random::<bool>() {
            choices.push(BlockChoice::A);
            out.extend_from(&a);
        } else {
            choices.push(BlockChoice::B);
            out.extend_from(&b);
        }
    }
    out.extend_run(false, remainder_zeros);
    Ok((out, BlockTruth { block_length, choices, remainder_zeros }))
}

/// Generates the string (plus side metadata) for any class kind.
pub fn generate(spec: &ClassSpec) -> Result<(Bits, ClassMeta), ClassError> {
    match spec.class_kind {
        ClassKind::AllLongRuns => Ok((gen_all_long_runs(spec)?, ClassMeta::default())),
        ClassKind::LongOneRuns => Ok((gen_long_one_runs(spec)?, ClassMeta::default())),
        ClassKind::GapClass => Ok((gen_gap_class(spec)?, ClassMeta::default())),
        ClassKind::PerturbedGap => {
            let y = gen_gap_class(spec)?;
            let (x, flips) = perturb_runs(&y, spec)?;
            Ok((x, ClassMeta { flips: Some(flips), ..Default::default() }))
        }
        ClassKind::DenseIntervals => {
            let (x, intervals) = gen_dense_intervals(spec)?;
            Ok((x, ClassMeta { intervals: Some(intervals), ..Default::default() }))
        }
        ClassKind::Random => Ok((gen_random(spec)?, ClassMeta::default())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationDetail {
    Valid,
    LengthMismatch { expected: usize, actual: usize },
    RunViolation { run_index: usize, run_start: usize, run_len: usize, value: u8, reason: String },
    IntervalViolation { interval_index: usize, reason: String },
    RequiresMetadata { reason: String },
    SpecInvalid { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassDiagnostics {
    pub ok: bool,
    pub detail: ValidationDetail,
}

impl ClassDiagnostics {
    fn pass() -> Self {
        ClassDiagnostics { ok: true, detail: ValidationDetail::Valid }
    }

    fn fail(detail: ValidationDetail) -> Self {
        ClassDiagnostics { ok: false, detail }
    }
}

const DENSE_SEARCH_MAX: usize = 8192;

/// Checks class membership, reporting the first violating run or interval.
///
/// `PerturbedGap` needs the flip log, and `DenseIntervals` needs either the
/// interval layout or `n` small enough for the decomposition search; both
/// report `RequiresMetadata` otherwise.
pub fn validate_class(x: &Bits, spec: &ClassSpec, meta: Option<&ClassMeta>) -> ClassDiagnostics {
    if let Err(e) = spec.validate() {
        return ClassDiagnostics::fail(ValidationDetail::SpecInvalid { reason: e.to_string() });
    }
    if x.len() != spec.n {
        return ClassDiagnostics::fail(ValidationDetail::LengthMismatch {
            expected: spec.n,
            actual: x.len(),
        });
    }
    match spec.class_kind {
        ClassKind::AllLongRuns => validate_runs(x, |_, len| {
            let t = spec.all_runs_min();
            if len < t {
                Err(format!("run length {len} below minimum {t}"))
            } else {
                Ok(())
            }
        }),
        ClassKind::LongOneRuns => validate_runs(x, |value, len| {
            let t = spec.long_one_run_min();
            if value && len < t {
                Err(format!("1-run length {len} below minimum {t}"))
            } else {
                Ok(())
            }
        }),
        ClassKind::GapClass => validate_gap_runs(x, spec),
        ClassKind::PerturbedGap => {
            let Some(flips) = meta.and_then(|m| m.flips.as_ref()) else {
                return ClassDiagnostics::fail(ValidationDetail::RequiresMetadata {
                    reason: "perturbed-gap membership cannot be checked from the string alone; \
                             pass the flip log"
                        .into(),
                });
            };
            validate_perturbed(x, spec, flips)
        }
        ClassKind::DenseIntervals => match meta.and_then(|m| m.intervals.as_ref()) {
            Some(intervals) => validate_dense_layout(x, spec, intervals),
            None if spec.n <= DENSE_SEARCH_MAX => validate_dense_search(x, spec),
            None => ClassDiagnostics::fail(ValidationDetail::RequiresMetadata {
                reason: format!(
                    "dense-interval layout search is limited to n <= {DENSE_SEARCH_MAX}; \
                     pass the interval layout"
                ),
            }),
        },
        ClassKind::Random => ClassDiagnostics::pass(),
    }
}

fn validate_runs(x: &Bits, check: impl Fn(bool, usize) -> Result<(), String>) -> ClassDiagnostics {
    let runs = x.runs();
    let mut start = 0usize;
    for (i, &len) in runs.lengths.iter().enumerate() {
        let value = runs.value_at(i);
        if let Err(reason) = check(value, len) {
            return ClassDiagnostics::fail(ValidationDetail::RunViolation {
                run_index: i,
                run_start: start,
                run_len: len,
                value: value as u8,
                reason,
            });
        }
        start += len;
    }
    ClassDiagnostics::pass()
}

fn validate_gap_runs(x: &Bits, spec: &ClassSpec) -> ClassDiagnostics {
    let one_min = spec.gap_one_run_min();
    let (gap_lo, gap_hi) = spec.gap_bounds();
    validate_runs(x, |value, len| {
        if value {
            if len < one_min {
                return Err(format!("1-run length {len} below minimum {one_min}"));
            }
        } else if (gap_lo..=gap_hi).contains(&len) {
            return Err(format!("0-run length {len} inside the gap [{gap_lo}, {gap_hi}]"));
        }
        Ok(())
    })
}

fn validate_perturbed(x: &Bits, spec: &ClassSpec, flips: &FlipLog) -> ClassDiagnostics {
    let mut y = x.clone();
    for &p in &flips.positions {
        if p >= y.len() {
            return ClassDiagnostics::fail(ValidationDetail::SpecInvalid {
                reason: format!("flip position {p} out of range"),
            });
        }
        y.flip(p);
    }
    let base = validate_gap_runs(&y, spec);
    if !base.ok {
        return base;
    }
    // flips must respect the per-run budget of the unperturbed string
    let budget = spec.flip_budget();
    let runs = y.runs();
    let mut boundaries = Vec::with_capacity(runs.lengths.len() + 1);
    let mut acc = 0usize;
    boundaries.push(0);
    for &len in &runs.lengths {
        acc += len;
        boundaries.push(acc);
    }
    let mut counts = vec![0usize; runs.lengths.len()];
    for &p in &flips.positions {
        let run = boundaries.partition_point(|&b| b <= p) - 1;
        counts[run] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        if c > budget {
            return ClassDiagnostics::fail(ValidationDetail::RunViolation {
                run_index: i,
                run_start: boundaries[i],
                run_len: runs.lengths[i],
                value: runs.value_at(i) as u8,
                reason: format!("{c} flips exceed the per-run budget {budget}"),
            });
        }
    }
    ClassDiagnostics::pass()
}

fn validate_dense_layout(x: &Bits, spec: &ClassSpec, intervals: &[Interval]) -> ClassDiagnostics {
    let imin = spec.interval_min();
    let mut pos = 0usize;
    for (i, iv) in intervals.iter().enumerate() {
        if iv.start != pos {
            return ClassDiagnostics::fail(ValidationDetail::IntervalViolation {
                interval_index: i,
                reason: format!("interval starts at {} but previous ended at {pos}", iv.start),
            });
        }
        if iv.len < imin {
            return ClassDiagnostics::fail(ValidationDetail::IntervalViolation {
                interval_index: i,
                reason: format!("interval length {} below minimum {imin}", iv.len),
            });
        }
        let seg = x.slice(iv.start..iv.start + iv.len);
        let minority = seg.count(!iv.majority);
        if minority > spec.dense_minority_budget(iv.len) {
            return ClassDiagnostics::fail(ValidationDetail::IntervalViolation {
                interval_index: i,
                reason: format!(
                    "minority count {minority} exceeds budget {} for length {}",
                    spec.dense_minority_budget(iv.len),
                    iv.len
                ),
            });
        }
        pos += iv.len;
    }
    if pos != x.len() {
        return ClassDiagnostics::fail(ValidationDetail::IntervalViolation {
            interval_index: intervals.len(),
            reason: format!("layout covers {pos} of {} bits", x.len()),
        });
    }
    ClassDiagnostics::pass()
}

/// Decides whether any legal interval decomposition exists (quadratic search).
fn validate_dense_search(x: &Bits, spec: &ClassSpec) -> ClassDiagnostics {
    let n = x.len();
    let imin = spec.interval_min();
    let mut ones_prefix = vec![0usize; n + 1];
    for (i, b) in x.iter().enumerate() {
        ones_prefix[i + 1] = ones_prefix[i] + b as usize;
    }
    let mut feasible = vec![false; n + 1];
    feasible[0] = true;
    for j in imin..=n {
        for i in (0..=j - imin).rev() {
            if !feasible[i] {
                continue;
            }
            let len = j - i;
            let ones = ones_prefix[j] - ones_prefix[i];
            let minority = ones.min(len - ones);
            if minority <= spec.dense_minority_budget(len) {
                feasible[j] = true;
                break;
            }
        }
    }
    if feasible[n] {
        ClassDiagnostics::pass()
    } else {
        ClassDiagnostics::fail(ValidationDetail::IntervalViolation {
            interval_index: 0,
            reason: "no legal interval decomposition exists".into(),
        })
    }
}

fn expect_kind(spec: &ClassSpec, kind: ClassKind) -> Result<(), ClassError> {
    if spec.class_kind != kind {
        return Err(ClassError::InvalidSpec(format!(
            "generator for {kind:?} called with {:?}",
            spec.class_kind
        )));
    }
    Ok(())
}

fn build_runs(runs: &[(bool, usize)]) -> Bits {
    let mut out = Bits::with_capacity(runs.iter().map(|r| r.1).sum());
    for &(value, len) in runs {
        out.extend_run(value, len);
    }
    out
}
