//! The reconstruction algorithms, their derived thresholds and trace counts,
//! and the zero-density statistic used by the robust variant.
//!
//! All reconstructors are pure functions of their inputs, emit an alternating
//! 1-run/0-run structure (a possibly empty 1-run first and last), and estimate
//! source lengths by scaling trace averages by `1/p`, rounding half-up.

use serde::Serialize;
use thiserror::Error;

use crate::bits::Bits;
use crate::classes::log_base_inv_q;

#[derive(Debug, Error, PartialEq)]
pub enum ReconError {
    #[error("empty trace set")]
    EmptyTraceSet,
    #[error("position {index} is not a 0 in the trace")]
    NotAZero { index: usize },
    #[error(
        "robust premise violated: zero quorum {quorum} must exceed 3 * flip budget {budget} \
         (needs p > 3 eps)"
    )]
    RobustPremiseViolated { quorum: usize, budget: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TraceCountVariant {
    LongRuns,
    Gap,
    Robust,
}

/// Trace budget for each algorithm family:
/// `ceil(2 log n / (p eps^2))` for the long-runs warm-up and
/// `ceil(2 log n / (p^2 eps^2))` for the gap algorithms.
pub fn trace_count(epsilon: f64, p: f64, q: f64, n: usize, variant: TraceCountVariant) -> usize {
    let logn = log_base_inv_q(n, q);
    let t = match variant {
        TraceCountVariant::LongRuns => 2.0 / (p * epsilon * epsilon) * logn,
        TraceCountVariant::Gap | TraceCountVariant::Robust => {
            2.0 / (p * p * epsilon * epsilon) * logn
        }
    };
    (t.ceil() as usize).max(1)
}

/// Derived parameters shared by the gap reconstructors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapParams {
    pub epsilon: f64,
    pub c_prime: f64,
    pub q: f64,
    pub p: f64,
    pub n: usize,
    /// Trace budget `T = ceil(2 log n / (p^2 eps^2))`.
    pub trace_budget: usize,
    /// In-trace 0-run length threshold `L = ceil(2 C' p log n)`.
    pub long_run_threshold: usize,
    /// Per-run flip budget `m = floor(eps C' log n)`.
    pub flip_budget: usize,
    /// Zero quorum `a = ceil(p C' log n)` for the dense-substring trigger.
    pub zero_quorum: usize,
    /// Long/short score cutoff `2 C' p log n` (the scaled gap midpoint).
    pub long_score_cutoff: f64,
}

impl GapParams {
    pub fn derive(epsilon: f64, c_prime: f64, q: f64, n: usize) -> Result<Self, ReconError> {
        Self::derive_with_log_base(epsilon, c_prime, q, q, n)
    }

    /// Same derivation but with the log base decoupled from the channel, for
    /// noiseless-channel checks where `channel_q` is 0.
    pub fn derive_with_log_base(
        epsilon: f64,
        c_prime: f64,
        channel_q: f64,
        log_base_q: f64,
        n: usize,
    ) -> Result<Self, ReconError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ReconError::InvalidParameter(format!("epsilon = {epsilon} not in (0,1)")));
        }
        if !(log_base_q > 0.0 && log_base_q < 1.0) {
            return Err(ReconError::InvalidParameter(format!(
                "log base q = {log_base_q} not in (0,1)"
            )));
        }
        if !(0.0..1.0).contains(&channel_q) {
            return Err(ReconError::InvalidParameter(format!("channel q = {channel_q} not in [0,1)")));
        }
        if c_prime <= 0.0 {
            return Err(ReconError::InvalidParameter("c_prime must be positive".into()));
        }
        if n < 2 {
            return Err(ReconError::InvalidParameter(format!("n = {n} too small")));
        }
        let p = 1.0 - channel_q;
        let logn = log_base_inv_q(n, log_base_q);
        Ok(GapParams {
            epsilon,
            c_prime,
            q: channel_q,
            p,
            n,
            trace_budget: ((2.0 / (p * p * epsilon * epsilon) * logn).ceil() as usize).max(1),
            long_run_threshold: ((2.0 * c_prime * p * logn).ceil() as usize).max(1),
            flip_budget: (epsilon * c_prime * logn).floor().max(0.0) as usize,
            zero_quorum: (p * c_prime * logn).ceil().max(1.0) as usize,
            long_score_cutoff: 2.0 * c_prime * p * logn,
        })
    }

    /// The dense-substring scan requires `a > 3m`, the image of `p > 3 eps`.
    pub fn require_robust_premise(&self) -> Result<(), ReconError> {
        if self.zero_quorum > 3 * self.flip_budget {
            Ok(())
        } else {
            Err(ReconError::RobustPremiseViolated {
                quorum: self.zero_quorum,
                budget: self.flip_budget,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ReconStatus {
    Ok,
    CountMismatchFail,
    AllZeroFallback,
}

impl ReconStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReconStatus::Ok => "ok",
            ReconStatus::CountMismatchFail => "count_mismatch_fail",
            ReconStatus::AllZeroFallback => "all_zero_fallback",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ReconDiagnostics {
    /// Number of runs aligned across traces (run-averaging algorithms).
    pub run_count: Option<usize>,
    /// Number of long 0-runs / 0-dense substrings aligned across traces.
    pub long_run_count: Option<usize>,
    /// Mean trace-side lengths (or scores) of the aligned 0-segments.
    pub zero_segment_means: Vec<f64>,
    /// Mean trace-side lengths of the segments approximated by 1-runs.
    pub one_segment_means: Vec<f64>,
    /// 0-run length threshold used to classify long runs in traces.
    pub long_run_threshold: Option<usize>,
    /// Score cutoff separating long from short dense substrings.
    pub long_score_cutoff: Option<f64>,
    /// Majority-vote window width.
    pub window: Option<usize>,
    /// Short-run allowance `s` echoed by the robust long-runs filter.
    pub short_run_allowance: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconReport {
    pub output: Bits,
    pub status: ReconStatus,
    pub traces_used: usize,
    pub diagnostics: ReconDiagnostics,
}

impl ReconReport {
    fn ok(output: Bits, traces_used: usize, diagnostics: ReconDiagnostics) -> Self {
        ReconReport { output, status: ReconStatus::Ok, traces_used, diagnostics }
    }

    fn count_mismatch(traces_used: usize, diagnostics: ReconDiagnostics) -> Self {
        ReconReport {
            output: Bits::new(),
            status: ReconStatus::CountMismatchFail,
            traces_used,
            diagnostics,
        }
    }
}

fn round_half_up(x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        (x + 0.5).floor() as usize
    }
}

/// Scaled length estimate `mean / p`, floored at 1 for nonempty segments.
fn scaled_len(mean: f64, p: f64) -> usize {
    if mean <= 0.0 {
        0
    } else {
        round_half_up(mean / p).max(1)
    }
}

/// Averages the i-th run length across traces and outputs one run per index,
/// scaled by `1/p`. Fails unless every trace has the same run count and the
/// same leading value.
pub fn recon_long_runs(traces: &[Bits], p: f64) -> Result<ReconReport, ReconError> {
    if traces.is_empty() {
        return Err(ReconError::EmptyTraceSet);
    }
    let decomposed: Vec<_> = traces.iter().map(|t| t.runs()).collect();
    let k = decomposed[0].lengths.len();
    let first_value = decomposed[0].first_value;
    let aligned = decomposed
        .iter()
        .all(|r| r.lengths.len() == k && (k == 0 || r.first_value == first_value));
    if !aligned {
        return Ok(ReconReport::count_mismatch(
            traces.len(),
            ReconDiagnostics { run_count: None, ..Default::default() },
        ));
    }
    let t = traces.len() as f64;
    let mut means = vec![0.0f64; k];
    for r in &decomposed {
        for (i, &len) in r.lengths.iter().enumerate() {
            means[i] += len as f64;
        }
    }
    for m in &mut means {
        *m /= t;
    }
    let mut output = Bits::new();
    for (i, &mean) in means.iter().enumerate() {
        output.extend_run(first_value ^ (i % 2 == 1), scaled_len(mean, p));
    }
    Ok(ReconReport::ok(
        output,
        traces.len(),
        ReconDiagnostics { run_count: Some(k), zero_segment_means: means, ..Default::default() },
    ))
}

/// Keeps only the traces attaining the maximum run count, then runs
/// [`recon_long_runs`] on them. `s` is the short-run allowance the caller
/// sized the trace budget for; it is echoed in the diagnostics.
pub fn recon_long_runs_robust(traces: &[Bits], s: usize, p: f64) -> Result<ReconReport, ReconError> {
    if traces.is_empty() {
        return Err(ReconError::EmptyTraceSet);
    }
    let counts: Vec<usize> = traces.iter().map(|t| t.runs().lengths.len()).collect();
    let max = *counts.iter().max().unwrap();
    let kept: Vec<Bits> = traces
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == max)
        .map(|(t, _)| t.clone())
        .collect();
    let mut report = recon_long_runs(&kept, p)?;
    report.traces_used = kept.len();
    report.diagnostics.short_run_allowance = Some(s);
    Ok(report)
}

/// Threshold on in-trace 0-run lengths for the single-trace warm-up:
/// `ceil(log n / (10 eps))`.
pub fn one_runs_threshold(epsilon: f64, q: f64, n: usize) -> usize {
    ((log_base_inv_q(n, q) / (10.0 * epsilon)).ceil() as usize).max(1)
}

/// Single-trace reconstruction: keeps 0-runs of trace length at least
/// `ceil(log n / (10 eps))`, fills everything between them with 1-runs, and
/// scales all lengths by `1/p`.
pub fn recon_one_runs(trace: &Bits, epsilon: f64, p: f64, q: f64, n: usize) -> ReconReport {
    let threshold = one_runs_threshold(epsilon, q, n);
    let longs = long_zero_runs(trace, threshold);
    let (output, zero_means, one_means) = assemble_from_long_runs(trace, &longs, p);
    ReconReport::ok(
        output,
        1,
        ReconDiagnostics {
            long_run_count: Some(longs.len()),
            zero_segment_means: zero_means,
            one_segment_means: one_means,
            long_run_threshold: Some(threshold),
            ..Default::default()
        },
    )
}

/// `(start, len)` of the 0-runs of length at least `min_len`.
fn long_zero_runs(trace: &Bits, min_len: usize) -> Vec<(usize, usize)> {
    let runs = trace.runs();
    let mut out = Vec::new();
    let mut pos = 0usize;
    for (i, &len) in runs.lengths.iter().enumerate() {
        if !runs.value_at(i) && len >= min_len {
            out.push((pos, len));
        }
        pos += len;
    }
    out
}

fn assemble_from_long_runs(
    trace: &Bits,
    longs: &[(usize, usize)],
    p: f64,
) -> (Bits, Vec<f64>, Vec<f64>) {
    let mut output = Bits::new();
    let mut zero_means = Vec::with_capacity(longs.len());
    let mut one_means = Vec::with_capacity(longs.len() + 1);
    let mut prev_end = 0usize;
    for &(start, len) in longs {
        let seg = (start - prev_end) as f64;
        output.extend_run(true, scaled_len(seg, p));
        output.extend_run(false, scaled_len(len as f64, p));
        one_means.push(seg);
        zero_means.push(len as f64);
        prev_end = start + len;
    }
    let tail = (trace.len() - prev_end) as f64;
    output.extend_run(true, scaled_len(tail, p));
    one_means.push(tail);
    (output, zero_means, one_means)
}

/// Aligns traces by their long 0-runs (length at least `L` in the trace),
/// averages the aligned run and inter-run segment lengths, and outputs the
/// alternating structure with short 0-runs absorbed into 1-runs. Fails when
/// the traces disagree on the number of long 0-runs.
pub fn recon_gap(traces: &[Bits], params: &GapParams) -> Result<ReconReport, ReconError> {
    if traces.is_empty() {
        return Err(ReconError::EmptyTraceSet);
    }
    let threshold = params.long_run_threshold;
    let per_trace: Vec<Vec<(usize, usize)>> =
        traces.iter().map(|t| long_zero_runs(t, threshold)).collect();
    let k = per_trace[0].len();
    let diagnostics = ReconDiagnostics {
        long_run_threshold: Some(threshold),
        ..Default::default()
    };
    if per_trace.iter().any(|v| v.len() != k) {
        return Ok(ReconReport::count_mismatch(traces.len(), diagnostics));
    }
    let t = traces.len() as f64;
    let mut zero_means = vec![0.0f64; k];
    let mut one_means = vec![0.0f64; k + 1];
    for (trace, longs) in traces.iter().zip(&per_trace) {
        let mut prev_end = 0usize;
        for (i, &(start, len)) in longs.iter().enumerate() {
            zero_means[i] += len as f64;
            one_means[i] += (start - prev_end) as f64;
            prev_end = start + len;
        }
        one_means[k] += (trace.len() - prev_end) as f64;
    }
    for m in zero_means.iter_mut().chain(one_means.iter_mut()) {
        *m /= t;
    }
    let mut output = Bits::new();
    for i in 0..k {
        output.extend_run(true, scaled_len(one_means[i], params.p));
        output.extend_run(false, scaled_len(zero_means[i], params.p));
    }
    output.extend_run(true, scaled_len(one_means[k], params.p));
    Ok(ReconReport::ok(
        output,
        traces.len(),
        ReconDiagnostics {
            long_run_count: Some(k),
            zero_segment_means: zero_means,
            one_segment_means: one_means,
            ..diagnostics
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SStatKind {
    Interior,
    LeftBound,
    RightBound,
    Undefined,
}

/// Result of the zero-count statistic at one trace position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SStatResult {
    /// Zeros counted over the anchored window (0 when `Undefined`).
    pub value: usize,
    /// Position of the `(m+1)`-th 1 strictly left of the query, if any.
    pub left_anchor: Option<usize>,
    /// Position of the `(m+1)`-th 1 strictly right of the query, if any.
    pub right_anchor: Option<usize>,
    pub kind: SStatKind,
}

/// Prefix/select structures over one trace.
struct TraceIndex {
    len: usize,
    ones_pos: Vec<u32>,
    zeros_pos: Vec<u32>,
    /// `zeros_before[i]` = number of zeros at positions `< i`; length `len + 1`.
    zeros_before: Vec<u32>,
}

impl TraceIndex {
    fn new(trace: &Bits) -> Self {
        let len = trace.len();
        let mut ones_pos = Vec::new();
        let mut zeros_pos = Vec::new();
        let mut zeros_before = Vec::with_capacity(len + 1);
        zeros_before.push(0);
        let mut zeros = 0u32;
        for (i, b) in trace.iter().enumerate() {
            if b {
                ones_pos.push(i as u32);
            } else {
                zeros_pos.push(i as u32);
                zeros += 1;
            }
            zeros_before.push(zeros);
        }
        TraceIndex { len, ones_pos, zeros_pos, zeros_before }
    }

    fn zeros_in(&self, lo: usize, hi_incl: usize) -> usize {
        (self.zeros_before[hi_incl + 1] - self.zeros_before[lo]) as usize
    }

    fn ones_before(&self, i: usize) -> usize {
        i - self.zeros_before[i] as usize
    }

    fn s_stat(&self, ell: usize, m: usize) -> SStatResult {
        let left_ones = self.ones_before(ell);
        let left = if left_ones >= m + 1 {
            Some(self.ones_pos[left_ones - (m + 1)] as usize)
        } else {
            None
        };
        let right = if self.ones_pos.len() - left_ones >= m + 1 {
            Some(self.ones_pos[left_ones + m] as usize)
        } else {
            None
        };
        match (left, right) {
            (Some(i), Some(j)) => SStatResult {
                value: self.zeros_in(i, j),
                left_anchor: Some(i),
                right_anchor: Some(j),
                kind: SStatKind::Interior,
            },
            (None, Some(j)) => SStatResult {
                value: self.zeros_in(0, j),
                left_anchor: None,
                right_anchor: Some(j),
                kind: SStatKind::LeftBound,
            },
            (Some(i), None) => SStatResult {
                value: self.zeros_in(i, self.len - 1),
                left_anchor: Some(i),
                right_anchor: None,
                kind: SStatKind::RightBound,
            },
            (None, None) => SStatResult {
                value: 0,
                left_anchor: None,
                right_anchor: None,
                kind: SStatKind::Undefined,
            },
        }
    }

    /// Smallest zero position `i >= from` with at least `quorum` zeros within
    /// `radius` positions of `i`.
    fn next_dense_zero(&self, from: usize, quorum: usize, radius: usize) -> Option<usize> {
        let start_rank = self.zeros_before[from.min(self.len)] as usize;
        for &pos in &self.zeros_pos[start_rank..] {
            let i = pos as usize;
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(self.len - 1);
            if self.zeros_in(lo, hi) >= quorum {
                return Some(i);
            }
        }
        None
    }

    /// The `(rank+1)`-th zero at or after `lo`, if it exists.
    fn zero_at_rank_from(&self, lo: usize, rank: usize) -> Option<usize> {
        let base = self.zeros_before[lo.min(self.len)] as usize;
        self.zeros_pos.get(base + rank).map(|&p| p as usize)
    }
}

/// Zero-count statistic at trace position `ell`, anchored at the `(m+1)`-th 1
/// on each side. Errors unless `trace[ell]` is 0.
pub fn s_statistic(trace: &Bits, ell: usize, m: usize) -> Result<SStatResult, ReconError> {
    if ell >= trace.len() || trace.get(ell) {
        return Err(ReconError::NotAZero { index: ell });
    }
    Ok(TraceIndex::new(trace).s_stat(ell, m))
}

/// One dense-substring detection inside a single trace.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Detection {
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) query: usize,
    pub(crate) score: usize,
    /// Left anchor, or 0 when the score window was left-bounded.
    pub(crate) left: usize,
    /// Right anchor, or the last trace index when right-bounded.
    pub(crate) right: usize,
}

/// Scans one trace for 0-dense substrings. Returns the detections, or `None`
/// when a query point had no anchoring 1s on either side (the all-zeros
/// fallback condition).
pub(crate) fn robust_scan(trace: &Bits, params: &GapParams) -> Option<Vec<Detection>> {
    let m = params.flip_budget;
    let quorum = params.zero_quorum;
    let radius = quorum + m;
    let idx = TraceIndex::new(trace);
    let mut detections = Vec::new();
    let mut from = 0usize;
    while from < trace.len() {
        let Some(i) = idx.next_dense_zero(from, quorum, radius) else { break };
        let lo = i.saturating_sub(radius);
        let Some(query) = idx.zero_at_rank_from(lo, m) else { break };
        let stat = idx.s_stat(query, m);
        match stat.kind {
            SStatKind::Undefined => return None,
            SStatKind::Interior | SStatKind::LeftBound => {
                let right = stat.right_anchor.unwrap();
                detections.push(Detection {
                    query,
                    score: stat.value,
                    left: stat.left_anchor.unwrap_or(0),
                    right,
                });
                // resume m+1 bits past the last counted bit; the max() keeps
                // the scan strictly advancing on adversarial inputs
                from = (right + m + 2).max(i + 1);
            }
            SStatKind::RightBound => {
                detections.push(Detection {
                    query,
                    score: stat.value,
                    left: stat.left_anchor.unwrap_or(0),
                    right: trace.len() - 1,
                });
                break;
            }
        }
    }
    Some(detections)
}

/// The flip-robust gap reconstructor: detects 0-dense substrings per trace
/// with the zero-count statistic, keeps those scoring above the cutoff,
/// aligns them across traces, and rebuilds the string from averaged scores
/// and anchor positions. Falls back to an all-zeros output when a trace has
/// no anchoring 1s around a dense region.
pub fn recon_gap_robust(traces: &[Bits], params: &GapParams) -> Result<ReconReport, ReconError> {
    if traces.is_empty() {
        return Err(ReconError::EmptyTraceSet);
    }
    params.require_robust_premise()?;
    let cutoff = params.long_score_cutoff;
    let diagnostics = ReconDiagnostics {
        long_score_cutoff: Some(cutoff),
        ..Default::default()
    };
    let mean_len =
        traces.iter().map(|t| t.len() as f64).sum::<f64>() / traces.len() as f64;

    let mut per_trace: Vec<Vec<Detection>> = Vec::with_capacity(traces.len());
    for trace in traces {
        match robust_scan(trace, params) {
            Some(dets) => {
                per_trace.push(dets.into_iter().filter(|d| (d.score as f64) > cutoff).collect())
            }
            None => {
                return Ok(ReconReport {
                    output: Bits::zeros(scaled_len(mean_len, params.p)),
                    status: ReconStatus::AllZeroFallback,
                    traces_used: traces.len(),
                    diagnostics,
                });
            }
        }
    }

    let count = per_trace[0].len();
    if per_trace.iter().any(|v| v.len() != count) {
        return Ok(ReconReport::count_mismatch(traces.len(), diagnostics));
    }
    if count == 0 {
        return Ok(ReconReport::ok(
            Bits::ones(scaled_len(mean_len, params.p)),
            traces.len(),
            ReconDiagnostics { long_run_count: Some(0), ..diagnostics },
        ));
    }

    let t = traces.len() as f64;
    let mut score_means = vec![0.0f64; count];
    let mut left_means = vec![0.0f64; count];
    let mut right_means = vec![0.0f64; count];
    for dets in &per_trace {
        for (i, d) in dets.iter().enumerate() {
            score_means[i] += d.score as f64;
            left_means[i] += d.left as f64;
            right_means[i] += d.right as f64;
        }
    }
    for v in score_means.iter_mut().chain(left_means.iter_mut()).chain(right_means.iter_mut()) {
        *v /= t;
    }

    let p = params.p;
    let mut output = Bits::new();
    let mut one_means = Vec::with_capacity(count + 1);
    output.extend_run(true, round_half_up(left_means[0] / p));
    one_means.push(left_means[0]);
    for i in 0..count {
        output.extend_run(false, scaled_len(score_means[i], p));
        let gap_to_next = if i + 1 < count {
            (left_means[i + 1] - right_means[i]).abs()
        } else {
            (p * params.n as f64 - right_means[i]).abs()
        };
        output.extend_run(true, round_half_up(gap_to_next / p));
        one_means.push(gap_to_next);
    }
    Ok(ReconReport::ok(
        output,
        traces.len(),
        ReconDiagnostics {
            long_run_count: Some(count),
            zero_segment_means: score_means,
            one_segment_means: one_means,
            ..diagnostics
        },
    ))
}

/// Window width for the majority voter: `L = ceil(50 log n / (p^2 eps^2))`,
/// `w = max(1, round(eps p L))`.
pub fn majority_window(epsilon: f64, p: f64, q: f64, n: usize) -> usize {
    let l = (50.0 * log_base_inv_q(n, q) / (p * p * epsilon * epsilon)).ceil();
    round_half_up(epsilon * p * l).max(1)
}

/// Single-trace majority voting: uniform windows of width `w`, one output run
/// of length `round(w/p)` per window, valued by the window's majority bit
/// (ties resolve to 1).
pub fn recon_majority(trace: &Bits, epsilon: f64, p: f64, q: f64, n: usize) -> ReconReport {
    majority_vote_windows(trace, majority_window(epsilon, p, q, n), p)
}

/// The voting core of [`recon_majority`], with an explicit window width.
pub fn majority_vote_windows(trace: &Bits, window: usize, p: f64) -> ReconReport {
    let window = window.max(1);
    let run_len = round_half_up(window as f64 / p).max(1);
    let mut output = Bits::new();
    let mut windows = 0usize;
    let mut pos = 0usize;
    while pos < trace.len() {
        let end = (pos + window).min(trace.len());
        let ones = trace.slice(pos..end).count(true);
        let majority = 2 * ones >= end - pos;
        output.extend_run(majority, run_len);
        windows += 1;
        pos = end;
    }
    ReconReport::ok(
        output,
        1,
        ReconDiagnostics { window: Some(window), run_count: Some(windows), ..Default::default() },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapEstimateVariant {
    Gap,
    Robust,
}

/// Scans a geometric grid of candidate constants for the smallest one whose
/// scaled gap band is empty in the pooled 0-run length histogram of the
/// traces. A band counts as a gap only if some run image lies at or above its
/// top (or the traces carry no 0-runs at all, the vacuous case).
pub fn estimate_gap_constant(
    traces: &[Bits],
    q: f64,
    n: usize,
    variant: GapEstimateVariant,
) -> Option<f64> {
    let p = 1.0 - q;
    let logn = log_base_inv_q(n, q);
    let floor_c = match variant {
        GapEstimateVariant::Gap => 100.0 / p,
        GapEstimateVariant::Robust => 1000.0 / p,
    };
    let mut lengths: Vec<usize> = Vec::new();
    for t in traces {
        let runs = t.runs();
        for (i, &len) in runs.lengths.iter().enumerate() {
            if !runs.value_at(i) {
                lengths.push(len);
            }
        }
    }
    lengths.sort_unstable();
    lengths.dedup();

    let grid_max = n as f64 / logn;
    let mut c = 1.0f64;
    while c <= grid_max {
        if c >= floor_c {
            let lo = (c * p * logn).ceil() as usize;
            let hi = (3.0 * c * p * logn).floor() as usize;
            if hi > lo {
                let first_above_lo = lengths.partition_point(|&l| l <= lo);
                let inside = lengths.get(first_above_lo).is_some_and(|&l| l < hi);
                let above = lengths.last().is_some_and(|&l| l >= hi);
                if !inside && (lengths.is_empty() || above) {
                    return Some(c);
                }
            }
        }
        c *= 1.1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::from_runs;
    use crate::bits::RunSeq;
    use crate::channel::{sample_traces, ChannelParams};
    use crate::classes::{gen_gap_class, ClassKind, ClassSpec};
    use crate::distance::edit_distance;

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    fn traces(strs: &[&str]) -> Vec<Bits> {
        strs.iter().map(|s| bits(s)).collect()
    }

    #[test]
    fn trace_count_formula() {
        assert_eq!(trace_count(0.5, 0.5, 0.5, 1024, TraceCountVariant::Gap), 320);
        assert_eq!(trace_count(0.5, 0.5, 0.5, 1024, TraceCountVariant::LongRuns), 160);
        let mut last = usize::MAX;
        for eps in [0.1, 0.2, 0.3, 0.5, 0.8] {
            let t = trace_count(eps, 0.5, 0.5, 1 << 14, TraceCountVariant::Gap);
            assert!(t <= last, "trace count must be nonincreasing in epsilon");
            last = t;
        }
    }

    #[test]
    fn long_runs_hand_examples() {
        let r = recon_long_runs(&traces(&["0011", "0011"]), 0.5).unwrap();
        assert_eq!(r.output.to_string(), "00001111");
        assert_eq!(r.status, ReconStatus::Ok);

        let r = recon_long_runs(&traces(&["01", "011"]), 0.5).unwrap();
        assert_eq!(r.output.to_string(), "00111");

        // noiseless identity
        let x = bits("000111010");
        let r = recon_long_runs(&[x.clone()], 1.0).unwrap();
        assert_eq!(r.output, x);
    }

    #[test]
    fn long_runs_mismatch_and_errors() {
        let r = recon_long_runs(&traces(&["0011", "010"]), 0.5).unwrap();
        assert_eq!(r.status, ReconStatus::CountMismatchFail);
        // same count but different leading value
        let r = recon_long_runs(&traces(&["01", "10"]), 0.5).unwrap();
        assert_eq!(r.status, ReconStatus::CountMismatchFail);
        assert!(matches!(recon_long_runs(&[], 0.5), Err(ReconError::EmptyTraceSet)));
        // all traces empty: empty output, not a failure
        let r = recon_long_runs(&[Bits::new(), Bits::new()], 0.5).unwrap();
        assert_eq!(r.status, ReconStatus::Ok);
        assert!(r.output.is_empty());
    }

    #[test]
    fn robust_filter_keeps_max_run_count() {
        let r = recon_long_runs_robust(&traces(&["010", "00"]), 1, 1.0).unwrap();
        assert_eq!(r.traces_used, 1);
        assert_eq!(r.output, bits("010"));
        assert_eq!(r.diagnostics.short_run_allowance, Some(1));

        // all same count: filter keeps everything
        let all = traces(&["0011", "011", "0011"]);
        let r = recon_long_runs_robust(&all, 0, 0.5).unwrap();
        assert_eq!(r.traces_used, 3);
        let plain = recon_long_runs(&all, 0.5).unwrap();
        assert_eq!(r.output, plain.output);
    }

    #[test]
    fn one_runs_hand_examples() {
        // q=0.5, n=1024, eps=0.25 -> threshold ceil(10/2.5) = 4
        assert_eq!(one_runs_threshold(0.25, 0.5, 1024), 4);
        let trace = bits("1110000000011");
        let r = recon_one_runs(&trace, 0.25, 0.5, 0.5, 1024);
        assert_eq!(r.output.to_string(), format!("{}{}{}", "1".repeat(6), "0".repeat(16), "1111"));

        // no long 0-run: all ones of round(len/p)
        let r = recon_one_runs(&bits("101"), 0.25, 0.5, 0.5, 1024);
        assert_eq!(r.output, Bits::ones(6));
        assert_eq!(r.diagnostics.long_run_count, Some(0));

        let r = recon_one_runs(&Bits::new(), 0.25, 0.5, 0.5, 1024);
        assert!(r.output.is_empty());
    }

    fn hand_params(p: f64, long_threshold: usize, m: usize, a: usize, cutoff: f64, n: usize) -> GapParams {
        GapParams {
            epsilon: 0.2,
            c_prime: 10.0,
            q: 1.0 - p,
            p,
            n,
            trace_budget: 1,
            long_run_threshold: long_threshold,
            flip_budget: m,
            zero_quorum: a,
            long_score_cutoff: cutoff,
        }
    }

    #[test]
    fn gap_noiseless_identity_without_short_runs() {
        let x = from_runs(&RunSeq { first_value: true, lengths: vec![30, 40, 30, 40, 25] }).unwrap();
        let params = hand_params(1.0, 20, 2, 10, 20.0, x.len());
        let r = recon_gap(&[x.clone()], &params).unwrap();
        assert_eq!(r.output, x);
        assert_eq!(r.diagnostics.long_run_count, Some(2));
    }

    #[test]
    fn gap_replaces_short_zero_runs_with_ones() {
        // 1^30 0^40 1^30 0^5 1^30: the 0^5 is below threshold and becomes 1s
        let x = from_runs(&RunSeq { first_value: true, lengths: vec![30, 40, 30, 5, 30] }).unwrap();
        let params = hand_params(1.0, 20, 2, 10, 20.0, x.len());
        let r = recon_gap(&[x.clone()], &params).unwrap();
        let expected =
            from_runs(&RunSeq { first_value: true, lengths: vec![30, 40, 65] }).unwrap();
        assert_eq!(r.output, expected);
    }

    #[test]
    fn gap_averaging_is_idempotent_and_mismatch_fails() {
        let x = from_runs(&RunSeq { first_value: true, lengths: vec![30, 40, 30] }).unwrap();
        let params = hand_params(1.0, 20, 2, 10, 20.0, x.len());
        let single = recon_gap(&[x.clone()], &params).unwrap();
        let double = recon_gap(&[x.clone(), x.clone()], &params).unwrap();
        assert_eq!(single.output, double.output);

        let y = from_runs(&RunSeq { first_value: true, lengths: vec![30, 40, 5, 40, 15] }).unwrap();
        let r = recon_gap(&[x, y], &params).unwrap();
        assert_eq!(r.status, ReconStatus::CountMismatchFail);
    }

    #[test]
    fn s_statistic_examples() {
        let t = bits("11100111");
        let s = s_statistic(&t, 3, 1).unwrap();
        assert_eq!(s.kind, SStatKind::Interior);
        assert_eq!((s.left_anchor, s.right_anchor), (Some(1), Some(6)));
        assert_eq!(s.value, 2);

        let t = bits("00111");
        let s = s_statistic(&t, 0, 1).unwrap();
        assert_eq!(s.kind, SStatKind::LeftBound);
        assert_eq!(s.right_anchor, Some(3));
        assert_eq!(s.value, 2);

        let t = bits("000");
        let s = s_statistic(&t, 1, 1).unwrap();
        assert_eq!(s.kind, SStatKind::Undefined);

        assert!(s_statistic(&bits("11100111"), 1, 1).is_err());
    }

    #[test]
    fn robust_scan_finds_true_long_runs_noiselessly() {
        // 1^30 0^40 1^30 0^5 1^30 0^40 1^25, scanned with m=2, a=10
        let x =
            from_runs(&RunSeq { first_value: true, lengths: vec![30, 40, 30, 5, 30, 40, 25] })
                .unwrap();
        let params = hand_params(1.0, 20, 2, 10, 20.0, x.len());
        let dets = robust_scan(&x, &params).unwrap();
        assert_eq!(dets.len(), 2);
        assert!((30..70).contains(&dets[0].query));
        assert!((133..173).contains(&dets[1].query));
        assert_eq!(dets[0].score, 40);
        assert_eq!(dets[1].score, 40);

        // robust output stays within 2 * (#long runs) * (m+1) edits of the
        // plain gap output
        let robust = recon_gap_robust(&[x.clone()], &params).unwrap();
        let plain = recon_gap(&[x], &params).unwrap();
        let d = edit_distance(&robust.output, &plain.output);
        assert!(d <= 2 * 2 * 3, "edit distance {d}");
    }

    #[test]
    fn robust_no_trigger_outputs_single_one_run() {
        let params = hand_params(0.5, 20, 2, 10, 20.0, 40);
        let r = recon_gap_robust(&traces(&["11111111111111111111"]), &params).unwrap();
        assert_eq!(r.status, ReconStatus::Ok);
        assert_eq!(r.output, Bits::ones(40));
        assert_eq!(r.diagnostics.long_run_count, Some(0));
    }

    #[test]
    fn robust_all_zero_fallback() {
        let params = hand_params(0.5, 20, 2, 10, 20.0, 80);
        let r = recon_gap_robust(&[Bits::zeros(40)], &params).unwrap();
        assert_eq!(r.status, ReconStatus::AllZeroFallback);
        assert_eq!(r.output, Bits::zeros(80));
    }

    #[test]
    fn robust_count_mismatch() {
        let params = hand_params(1.0, 20, 2, 10, 20.0, 110);
        let with_long =
            from_runs(&RunSeq { first_value: true, lengths: vec![30, 40, 40] }).unwrap();
        let without = Bits::ones(110);
        let r = recon_gap_robust(&[with_long, without], &params).unwrap();
        assert_eq!(r.status, ReconStatus::CountMismatchFail);
    }

    #[test]
    fn robust_premise_enforced() {
        let mut params = hand_params(0.5, 20, 7, 10, 20.0, 80);
        assert!(matches!(
            recon_gap_robust(&[Bits::zeros(10)], &params),
            Err(ReconError::RobustPremiseViolated { quorum: 10, budget: 7 })
        ));
        params.flip_budget = 3;
        assert!(params.require_robust_premise().is_ok());
    }

    #[test]
    fn majority_hand_examples() {
        let t = bits("00000000001111111111");
        let r = majority_vote_windows(&t, 5, 0.5);
        assert_eq!(r.output.to_string(), format!("{}{}", "0".repeat(20), "1".repeat(20)));

        let r = majority_vote_windows(&Bits::new(), 5, 0.5);
        assert!(r.output.is_empty());

        // all zeros: ceil(len/w) runs of round(w/p) zeros
        let r = majority_vote_windows(&Bits::zeros(12), 5, 0.5);
        assert_eq!(r.output, Bits::zeros(30));

        // ties go to 1
        let r = majority_vote_windows(&bits("01"), 2, 1.0);
        assert_eq!(r.output, Bits::ones(2));
    }

    #[test]
    fn majority_window_formula() {
        // q=0.5, n=2^16, eps=0.25, p=0.5: L = 51200, w = 6400
        assert_eq!(majority_window(0.25, 0.5, 0.5, 1 << 16), 6400);
    }

    #[test]
    fn gap_params_derivation() {
        let gp = GapParams::derive(0.25, 200.0, 0.5, 1 << 14).unwrap();
        assert_eq!(gp.trace_budget, 1792);
        assert_eq!(gp.long_run_threshold, 2800);
        assert_eq!(gp.flip_budget, 700);
        assert_eq!(gp.zero_quorum, 1400);
        assert!((gp.long_score_cutoff - 2800.0).abs() < 1e-9);
        assert!(GapParams::derive(0.25, 200.0, 1.0, 1 << 14).is_err());
    }

    #[test]
    fn estimate_gap_constant_round_trip() {
        let spec = ClassSpec {
            class_kind: ClassKind::GapClass,
            n: 1 << 14,
            epsilon: 0.25,
            c_prime: 200.0,
            q: 0.5,
            seed: 12,
        };
        // make sure the instance actually has long 0-runs
        let mut found = None;
        for seed in 0..50 {
            let x = gen_gap_class(&ClassSpec { seed, ..spec.clone() }).unwrap();
            let runs = x.runs();
            if (0..runs.lengths.len())
                .any(|i| !runs.value_at(i) && runs.lengths[i] > spec.gap_bounds().1)
            {
                found = Some(x);
                break;
            }
        }
        let x = found.expect("no gap instance with a long 0-run");
        let ch = ChannelParams::new(0.5, 77).unwrap();
        let ts = sample_traces(&x, &ch, 64);
        let c = estimate_gap_constant(&ts, 0.5, spec.n, GapEstimateVariant::Gap)
            .expect("no consistent constant found");
        assert!(c >= spec.c_prime / 1.5 && c <= spec.c_prime * 1.5, "c = {c}");
        // the detected band must contain the scaled gap midpoint 2 C' p log n
        let p = 0.5;
        let logn = log_base_inv_q(spec.n, 0.5);
        let mid = 2.0 * spec.c_prime * p * logn;
        assert!((c * p * logn) < mid && mid < 3.0 * c * p * logn);
    }

    #[test]
    fn estimate_gap_constant_vacuous_and_none() {
        let n = 1 << 14;
        // all-ones traces: no 0-runs at all, the vacuous gap at the grid floor
        let ones = vec![Bits::ones(n / 2); 4];
        let c = estimate_gap_constant(&ones, 0.5, n, GapEstimateVariant::Gap).unwrap();
        let floor_c = 100.0 / 0.5;
        let mut grid = 1.0f64;
        while grid < floor_c {
            grid *= 1.1;
        }
        assert!((c - grid).abs() < 1e-9, "expected first grid point >= floor, got {c}");

        // alternating bits: plenty of short 0-runs but nothing above any band
        let alt: Bits = (0..n / 2).map(|i| i % 2 == 0).collect();
        assert_eq!(
            estimate_gap_constant(&[alt], 0.5, n, GapEstimateVariant::Gap),
            None
        );
    }
}
