//! The i.i.d. deletion channel with reproducible per-trace randomness.
//!
//! Each trace is keyed by `(master_seed, trial)`: the same key always yields
//! the same trace, independent of how many traces are drawn or in what order,
//! so trials can be generated concurrently.

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::seed;

pub type TraceSet = Vec<Bits>;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("deletion probability {0} outside validated range [{min}, {max}]",
            min = ChannelParams::MIN_Q, max = ChannelParams::MAX_Q)]
    QOutOfRange(f64),
}

/// Deletion probability `q`, retention probability `p = 1 - q`, and the
/// master seed all per-trace randomness derives from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    q: f64,
    master_seed: u64,
}

impl ChannelParams {
    pub const MIN_Q: f64 = 0.05;
    pub const MAX_Q: f64 = 0.95;

    /// Production constructor; rejects `q` outside `[0.05, 0.95]`, where the
    /// base-`1/q` logarithms and the trace-count formulas degenerate.
    pub fn new(q: f64, master_seed: u64) -> Result<Self, ChannelError> {
        if !(Self::MIN_Q..=Self::MAX_Q).contains(&q) {
            return Err(ChannelError::QOutOfRange(q));
        }
        Ok(ChannelParams { q, master_seed })
    }

    /// Test bypass: accepts any `q` in `[0, 1]`, including the exact 0 and 1
    /// endpoints (noiseless / delete-everything channels).
    pub fn bypass_validation(q: f64, master_seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&q), "q must be a probability");
        ChannelParams { q, master_seed }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Retention probability `p = 1 - q`, exactly.
    pub fn p(&self) -> f64 {
        1.0 - self.q
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }
}

/// The subsequence of `x` formed by retaining each bit independently with
/// probability `p`, under the stream keyed by `(master_seed, trial)`.
pub fn sample_trace(x: &Bits, ch: &ChannelParams, trial: u64) -> Bits {
    let mut rng = trace_stream(ch, trial);
    delete_with_rng(x, ch.p(), &mut rng)
}

/// Traces for trials `0..t_count`.
pub fn sample_traces(x: &Bits, ch: &ChannelParams, t_count: usize) -> TraceSet {
    (0..t_count as u64).map(|t| sample_trace(x, ch, t)).collect()
}

/// The per-position retention decisions behind [`sample_trace`]:
/// `sample_trace(x, ch, trial)` equals `x` filtered by this mask.
pub fn retention_mask(len: usize, ch: &ChannelParams, trial: u64) -> Vec<bool> {
    let mut rng = trace_stream(ch, trial);
    let keep = retention_dist(ch.p());
    (0..len).map(|_| keep.sample(&mut rng)).collect()
}

fn trace_stream(ch: &ChannelParams, trial: u64) -> rand_chacha::ChaCha8Rng {
    seed::stream(&[ch.master_seed, trial])
}

fn retention_dist(p: f64) -> Bernoulli {
    Bernoulli::new(p.clamp(0.0, 1.0)).expect("p is a probability")
}

/// One uniform draw per source bit; survivors concatenate in order.
pub(crate) fn delete_with_rng<R: Rng>(x: &Bits, p: f64, rng: &mut R) -> Bits {
    let keep = retention_dist(p);
    let mut out = Bits::with_capacity(x.len());
    for bit in x.iter() {
        if keep.sample(rng) {
            out.push(bit);
        }
    }
    out
}

/// True iff `t` can be obtained from `x` by deletions (greedy matching).
pub fn is_subsequence(t: &Bits, x: &Bits) -> bool {
    let mut it = t.iter().peekable();
    for b in x.iter() {
        match it.peek() {
            None => return true,
            Some(&want) if want == b => {
                it.next();
            }
            _ => {}
        }
    }
    it.peek().is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn q_validation() {
        assert!(ChannelParams::new(0.5, 1).is_ok());
        assert!(ChannelParams::new(0.05, 1).is_ok());
        assert!(ChannelParams::new(0.95, 1).is_ok());
        assert_eq!(ChannelParams::new(0.01, 1), Err(ChannelError::QOutOfRange(0.01)));
        assert_eq!(ChannelParams::new(1.0, 1), Err(ChannelError::QOutOfRange(1.0)));
        let ch = ChannelParams::new(0.3, 1).unwrap();
        assert_eq!(ch.p() + ch.q(), 1.0);
    }

    #[test]
    fn noiseless_bypass_is_identity() {
        let ch = ChannelParams::bypass_validation(0.0, 7);
        let x = bits("0110100111");
        assert_eq!(sample_trace(&x, &ch, 0), x);
        assert_eq!(sample_traces(&x, &ch, 3), vec![x.clone(), x.clone(), x]);
    }

    #[test]
    fn delete_everything_bypass() {
        let ch = ChannelParams::bypass_validation(1.0, 7);
        let x = bits("0110100111");
        assert_eq!(sample_trace(&x, &ch, 0), Bits::new());
    }

    #[test]
    fn traces_are_subsequences() {
        let ch = ChannelParams::new(0.5, 99).unwrap();
        let x: Bits = (0..500).map(|i| i % 3 == 0).collect();
        for trial in 0..50 {
            let t = sample_trace(&x, &ch, trial);
            assert!(is_subsequence(&t, &x));
        }
    }

    #[test]
    fn subsequence_examples() {
        assert!(is_subsequence(&bits("11"), &bits("101")));
        assert!(!is_subsequence(&bits("110"), &bits("101")));
        assert!(is_subsequence(&Bits::new(), &bits("101")));
        assert!(is_subsequence(&Bits::new(), &Bits::new()));
        assert!(!is_subsequence(&bits("0"), &Bits::new()));
    }

    #[test]
    fn same_key_same_trace() {
        let ch = ChannelParams::new(0.4, 1234).unwrap();
        let x: Bits = (0..300).map(|i| i % 2 == 0).collect();
        assert_eq!(sample_trace(&x, &ch, 17), sample_trace(&x, &ch, 17));
        assert_ne!(sample_trace(&x, &ch, 17), sample_trace(&x, &ch, 18));
    }

    #[test]
    fn trace_matches_retention_mask() {
        let ch = ChannelParams::new(0.5, 5).unwrap();
        let x: Bits = (0..200).map(|i| i % 5 < 2).collect();
        let mask = retention_mask(x.len(), &ch, 3);
        let filtered: Bits = x.iter().zip(&mask).filter(|(_, &m)| m).map(|(b, _)| b).collect();
        assert_eq!(sample_trace(&x, &ch, 3), filtered);
    }

    #[test]
    fn mean_trace_length_concentrates() {
        // |x| = 200, q = 0.5: mean over 10^4 trials within 3 sigma of the
        // binomial mean (sigma here is for the mean itself)
        let n = 200usize;
        let trials = 10_000u64;
        let ch = ChannelParams::new(0.5, 2024).unwrap();
        let x: Bits = (0..n).map(|i| i % 2 == 0).collect();
        let total: usize = (0..trials).map(|t| sample_trace(&x, &ch, t).len()).sum();
        let mean = total as f64 / trials as f64;
        let expect = 0.5 * n as f64;
        let sigma_mean = (n as f64 * 0.25 / trials as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * sigma_mean,
            "mean {mean} vs {expect} (sigma {sigma_mean})"
        );
    }
}
