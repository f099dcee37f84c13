//! Exact trace likelihoods under the deletion channel and maximum-likelihood
//! distinguishing experiments between two candidate strings.
//!
//! Every deletion pattern keeping `|t|` of `|x|` bits has probability
//! `p^|t| q^(|x|-|t|)`, so the likelihood of observing trace `t` is that
//! weight times the number of subsequence embeddings of `t` in `x`. Embedding
//! counts are exact integers (they outgrow `u64` near `|x| = 70`); the
//! likelihoods live in log space.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::bits::Bits;
use crate::channel::{delete_with_rng, ChannelParams};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum DistinguishError {
    #[error("candidate strings must be nonempty")]
    EmptyCandidate,
    #[error("q = {0} outside validated range [{min}, {max}]",
            min = ChannelParams::MIN_Q, max = ChannelParams::MAX_Q)]
    QOutOfRange(f64),
    #[error("no traces supplied")]
    NoTraces,
    #[error("trace {index} has zero likelihood under both candidates")]
    ImpossibleTrace { index: usize },
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Number of distinct deletion subsets of `x` that produce exactly `t`.
pub fn embedding_count(x: &Bits, t: &Bits) -> BigUint {
    if t.len() > x.len() {
        return BigUint::zero();
    }
    if x.len() <= 64 {
        // counts are bounded by C(64, 32) < 2^63
        return BigUint::from(embedding_count_u64(x, t));
    }
    let tb: Vec<bool> = t.iter().collect();
    let mut ways = vec![BigUint::zero(); tb.len() + 1];
    ways[0] = BigUint::from(1u32);
    for xb in x.iter() {
        for j in (1..=tb.len()).rev() {
            if tb[j - 1] == xb {
                let add = ways[j - 1].clone();
                ways[j] += add;
            }
        }
    }
    ways[tb.len()].clone()
}

fn embedding_count_u64(x: &Bits, t: &Bits) -> u64 {
    debug_assert!(x.len() <= 64);
    let tb: Vec<bool> = t.iter().collect();
    let mut ways = vec![0u64; tb.len() + 1];
    ways[0] = 1;
    for xb in x.iter() {
        for j in (1..=tb.len()).rev() {
            if tb[j - 1] == xb {
                ways[j] += ways[j - 1];
            }
        }
    }
    ways[tb.len()]
}

fn ln_biguint(c: &BigUint) -> f64 {
    let bits = c.bits();
    if bits <= 53 {
        c.to_f64().expect("fits in f64").ln()
    } else {
        let shift = bits - 53;
        let top = (c >> shift).to_f64().expect("53-bit top fits");
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// A probability in natural-log space; exact zero is `NEG_INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct LogProb(pub f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);

    pub fn is_zero(&self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn prob(&self) -> f64 {
        self.0.exp()
    }
}

/// Probability that the deletion channel with deletion probability `q` turns
/// `x` into exactly `t`.
pub fn trace_likelihood(x: &Bits, t: &Bits, q: f64) -> LogProb {
    let p = 1.0 - q;
    if t.len() > x.len() {
        return LogProb::ZERO;
    }
    let deleted = x.len() - t.len();
    if q == 0.0 && deleted > 0 {
        return LogProb::ZERO;
    }
    if p == 0.0 && !t.is_empty() {
        return LogProb::ZERO;
    }
    let count = embedding_count(x, t);
    if count.is_zero() {
        return LogProb::ZERO;
    }
    let mut ll = ln_biguint(&count);
    if !t.is_empty() {
        ll += t.len() as f64 * p.ln();
    }
    if deleted > 0 {
        ll += deleted as f64 * q.ln();
    }
    LogProb(ll)
}

/// Two candidate source strings and the channel they are observed through.
#[derive(Clone, Debug)]
pub struct LikelihoodModel {
    candidate_a: Bits,
    candidate_b: Bits,
    q: f64,
}

impl LikelihoodModel {
    pub fn new(candidate_a: Bits, candidate_b: Bits, q: f64) -> Result<Self, DistinguishError> {
        if candidate_a.is_empty() || candidate_b.is_empty() {
            return Err(DistinguishError::EmptyCandidate);
        }
        if !(ChannelParams::MIN_Q..=ChannelParams::MAX_Q).contains(&q) {
            return Err(DistinguishError::QOutOfRange(q));
        }
        Ok(LikelihoodModel { candidate_a, candidate_b, q })
    }

    pub fn candidate_a(&self) -> &Bits {
        &self.candidate_a
    }

    pub fn candidate_b(&self) -> &Bits {
        &self.candidate_b
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Decision {
    A,
    B,
    Tie,
}

/// Compares total log-likelihood of the traces under each candidate. Ties
/// only on exact equality. Errors if some trace is impossible under both.
pub fn ml_decide(model: &LikelihoodModel, traces: &[Bits]) -> Result<Decision, DistinguishError> {
    if traces.is_empty() {
        return Err(DistinguishError::NoTraces);
    }
    let mut total_a = 0.0f64;
    let mut total_b = 0.0f64;
    for (index, t) in traces.iter().enumerate() {
        let la = trace_likelihood(&model.candidate_a, t, model.q);
        let lb = trace_likelihood(&model.candidate_b, t, model.q);
        if la.is_zero() && lb.is_zero() {
            return Err(DistinguishError::ImpossibleTrace { index });
        }
        total_a += la.0;
        total_b += lb.0;
    }
    Ok(if total_a > total_b {
        Decision::A
    } else if total_b > total_a {
        Decision::B
    } else {
        Decision::Tie
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AdvantageEstimate {
    pub t_count: usize,
    pub trials: usize,
    pub success_rate: f64,
    /// 95% binomial confidence half-width (normal approximation).
    pub ci_half_width: f64,
}

impl AdvantageEstimate {
    pub fn lower_bound(&self) -> f64 {
        self.success_rate - self.ci_half_width
    }
}

const MIN_TRIALS: usize = 100;

/// Monte Carlo success probability of the ML distinguisher given `t_count`
/// traces per trial. Each trial picks the true candidate uniformly, samples
/// traces of it, and scores `ml_decide` (ties resolved by a seeded fair
/// coin). Deterministic in `seed`.
pub fn advantage_estimate(
    model: &LikelihoodModel,
    t_count: usize,
    trials: usize,
    seed_value: u64,
) -> Result<AdvantageEstimate, DistinguishError> {
    if trials < MIN_TRIALS {
        return Err(DistinguishError::TooFewTrials { min: MIN_TRIALS, got: trials });
    }
    if t_count == 0 {
        return Err(DistinguishError::InvalidParameter("t_count must be >= 1".into()));
    }
    let p = 1.0 - model.q;
    let mut successes = 0usize;
    for trial in 0..trials {
        let mut rng = seed::stream(&[seed_value, t_count as u64, trial as u64]);
        let truth_is_a: bool = rand::Rng::random(&mut rng);
        let src = if truth_is_a { &model.candidate_a } else { &model.candidate_b };
        let traces: Vec<Bits> = (0..t_count).map(|_| delete_with_rng(src, p, &mut rng)).collect();
        let correct = match ml_decide(model, &traces)? {
            Decision::A => truth_is_a,
            Decision::B => !truth_is_a,
            Decision::Tie => rand::Rng::random::<bool>(&mut rng) == truth_is_a,
        };
        successes += correct as usize;
    }
    let rate = successes as f64 / trials as f64;
    let ci = 1.96 * (rate * (1.0 - rate) / trials as f64).sqrt();
    Ok(AdvantageEstimate { t_count, trials, success_rate: rate, ci_half_width: ci })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TraceDemand {
    /// Smallest trace count whose success lower bound reached the target.
    Found(usize),
    ExceedsCap,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub t_count: usize,
    pub success: f64,
    pub ci: f64,
}

/// Doubling-then-bisection search for the smallest trace count whose
/// [`advantage_estimate`] lower confidence bound reaches `target_success`.
/// Returns the probed success curve alongside the answer.
pub fn traces_to_distinguish(
    model: &LikelihoodModel,
    target_success: f64,
    trials: usize,
    seed_value: u64,
    t_cap: usize,
) -> Result<(TraceDemand, Vec<CurvePoint>), DistinguishError> {
    if !(target_success > 0.5 && target_success < 1.0) {
        return Err(DistinguishError::InvalidParameter(format!(
            "target success {target_success} must lie in (1/2, 1)"
        )));
    }
    if t_cap == 0 {
        return Err(DistinguishError::InvalidParameter("t_cap must be >= 1".into()));
    }
    let mut curve: Vec<CurvePoint> = Vec::new();
    let probe = |t: usize, curve: &mut Vec<CurvePoint>| -> Result<bool, DistinguishError> {
        let est = advantage_estimate(model, t, trials, seed_value)?;
        curve.push(CurvePoint { t_count: t, success: est.success_rate, ci: est.ci_half_width });
        Ok(est.lower_bound() >= target_success)
    };

    let mut below = 0usize;
    let mut t = 1usize;
    loop {
        if t > t_cap {
            curve.sort_by_key(|c| c.t_count);
            return Ok((TraceDemand::ExceedsCap, curve));
        }
        if probe(t, &mut curve)? {
            break;
        }
        below = t;
        t *= 2;
    }
    let (mut lo, mut hi) = (below, t);
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if probe(mid, &mut curve)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    curve.sort_by_key(|c| c.t_count);
    Ok((TraceDemand::Found(hi), curve))
}
