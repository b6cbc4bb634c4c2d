//! Coordination-free budget partitioning for parallel similarity-search
//! lanes.
//!
//! When `M` identical search lanes answer the same query, deterministic
//! backends make them redundant: every lane returns (nearly) the same
//! candidates, so the merged result is no better than one lane's. This
//! crate removes that redundancy without any lane-to-lane communication.
//! Each lane derives, from shared configuration alone, which slice of a
//! per-query candidate pool it is responsible for: the pool is permuted by
//! a keyed pseudorandom function, a dedicated fraction `alpha` of each
//! lane's budget maps to disjoint positional slices, and the remainder is
//! shared for straggler tolerance. At `alpha = 1` the lanes are provably
//! disjoint and the merged coverage is exactly `M` times one lane's; at
//! `alpha = 0` the scheme degrades to the naive redundant baseline.
//!
//! The crate is organized bottom-up:
//!
//! - [`config`]: validated partition configurations and quota arithmetic;
//! - [`prf`]: the frozen splitmix64-based permutation (bit-exact across
//!   platforms and versions);
//! - [`pool`] / [`planner`]: candidate pools and the positional
//!   `alpha`-partition with its coverage accounting;
//! - [`index`]: desk-scale backends (brute force, HNSW-lite, IVF-Flat)
//!   with honest cost counters and persistence;
//! - [`lanes`]: the lane harness, straggler policies, and the planner
//!   microbenchmark;
//! - [`metrics`]: overlap and quality measurement plus the flat CSV row
//!   every experiment emits;
//! - [`datasets`]: synthetic clustered benchmarks, `.fvecs`/`.ivecs`
//!   ingestion, and checksummed ground-truth caches.
//!
//! Numeric code is generic over the scalar type through [`Scalar`]
//! (implemented for `f32` and `f64`); the `*F32`/`*F64` aliases at the
//! crate root pick a concrete width.
//!
//! # Example
//!
//! ```
//! use lanekit::{
//!     alpha_partition, coverage, permute_ids, PartitionConfig, PrfKey,
//! };
//!
//! // Four lanes, 16 candidates each, fully dedicated, over a 64-pool.
//! let cfg = PartitionConfig::new(4, 16, 1.0, 64, 0xC0FFEE).unwrap();
//! let pool: Vec<u64> = (0..64).collect();
//! let permuted = permute_ids(&pool, PrfKey::new(cfg.query_seed())).unwrap();
//!
//! let mut seen = std::collections::BTreeSet::new();
//! for lane in 0..cfg.m() {
//!     let share = alpha_partition(&permuted, &cfg, lane).unwrap();
//!     assert_eq!(share.selected_ids.len(), 16);
//!     for id in share.selected_ids {
//!         assert!(seen.insert(id), "lanes must not overlap at alpha = 1");
//!     }
//! }
//! assert_eq!(seen.len(), coverage(&cfg) as usize);
//! ```

pub mod config;
pub mod datasets;
pub mod error;
pub mod index;
pub mod lanes;
pub mod metrics;
pub mod outcome;
pub mod planner;
pub mod pool;
pub mod prf;
pub mod scalar;

pub use config::{
    derive_quotas, HeterogeneousPartitionConfig, LaneQuota, PartitionConfig, Quotas,
};
pub use error::{Error, Result};
pub use index::{
    brute_force_topk, hnsw_build, hnsw_search, hnsw_search_layer0_from, ivf_build,
    ivf_search_lists, load_index, save_index, BruteForceIndex, Dataset, HnswLiteIndex,
    IndexFamily, IndexHandle, IvfFlatIndex, Metric, ProbePlan, SearchBudget,
};
pub use lanes::{
    exponential_delays, merge_lanes, planner_microbenchmark, prepare_query, run_query,
    run_query_opts, run_single_baseline, simulate_stragglers, Execution, LaneMode, LaneOptions,
    OutcomeRecord, PendingOutcome, PlannerTiming, QueryOutcome, StragglerPolicy,
};
pub use metrics::{
    audit_assignments, csv_to_string, hit_at_k, jaccard_overlap, linear_fit, mean_std,
    measure_rho0, mrr_at_k, read_csv, recall_at_k, write_csv, AssignmentAudit, CsvRow, LinearFit,
    OverlapStats, QualityReport,
};
pub use outcome::{CostCounters, LaneResult, MergedResult, ScoredId};
pub use planner::{
    alpha_partition, alpha_partition_heterogeneous, alpha_partition_with_strategy, coverage,
    predicted_gain, recommend_alpha, AssignmentRecord, LaneAssignment, PartitionStrategy,
};
pub use pool::CandidatePool;
pub use prf::{
    derive_query_seed, mix64, permute_ids, permute_pool, prf_score, splitmix64_next, PrfKey,
    SplitMix64,
};
pub use scalar::Scalar;

pub use datasets::{
    build_ground_truth, generate_synthetic, load_benchmark, save_benchmark, Benchmark,
    BenchmarkManifest, SyntheticSpec,
};

/// [`Dataset`] at single precision.
pub type DatasetF32 = Dataset<f32>;
/// [`Dataset`] at double precision.
pub type DatasetF64 = Dataset<f64>;
/// [`IndexHandle`] at single precision.
pub type IndexF32 = IndexHandle<f32>;
/// [`IndexHandle`] at double precision.
pub type IndexF64 = IndexHandle<f64>;
/// [`Benchmark`] at single precision (the width used by `.fvecs` files).
pub type BenchmarkF32 = Benchmark<f32>;
/// [`Benchmark`] at double precision.
pub type BenchmarkF64 = Benchmark<f64>;
/// [`QueryOutcome`] at single precision.
pub type QueryOutcomeF32 = QueryOutcome<f32>;
/// [`QueryOutcome`] at double precision.
pub type QueryOutcomeF64 = QueryOutcome<f64>;
