//! Approximate reconstruction of binary strings observed through an i.i.d.
//! deletion channel.
//!
//! The crate provides, in dependency order:
//!
//! - [`bits`]: packed binary strings, run decomposition, partitions.
//! - [`distance`]: edit/Hamming distance kernels and partition oracles.
//! - [`channel`]: the deletion channel with seeded per-trace streams.
//! - [`classes`]: generators and validators for the studied string classes
//!   and the hard instance pairs.
//! - [`recon`]: the reconstruction algorithms and their derived parameters.
//! - [`likelihood`]: exact trace likelihoods and the maximum-likelihood
//!   distinguishing experiments.
//! - [`harness`]: config-driven, reproducible experiment sweeps with CSV
//!   output.

pub mod bits;
pub mod channel;
pub mod classes;
pub mod distance;
pub mod harness;
pub mod likelihood;
pub mod recon;
pub mod seed;

pub use bits::{from_runs, runs, Bits, BitsError, Partition, RunSeq};
pub use channel::{
    is_subsequence, retention_mask, sample_trace, sample_traces, ChannelError, ChannelParams,
    TraceSet,
};
pub use classes::{
    gen_all_long_runs, gen_block_concat, gen_dense_intervals, gen_gap_class, gen_hamming_pair,
    gen_hard_pair, gen_long_one_runs, perturb_runs, validate_class, BlockChoice, BlockTruth,
    ClassError, ClassKind, ClassMeta, ClassSpec, FlipLog, Interval,
};
pub use distance::{
    density, edit_distance, edit_distance_banded, hamming_distance,
    min_partition_mismatch_bruteforce, partition_edit_witness, BandedDistance,
};
pub use likelihood::{
    advantage_estimate, embedding_count, ml_decide, trace_likelihood, traces_to_distinguish,
    AdvantageEstimate, Decision, DistinguishError, LikelihoodModel, LogProb, TraceDemand,
};
pub use recon::{
    estimate_gap_constant, recon_gap, recon_gap_robust, recon_long_runs, recon_long_runs_robust,
    recon_majority, recon_one_runs, s_statistic, trace_count, GapEstimateVariant, GapParams,
    ReconDiagnostics, ReconError, ReconReport, ReconStatus, SStatKind, SStatResult,
    TraceCountVariant,
};
