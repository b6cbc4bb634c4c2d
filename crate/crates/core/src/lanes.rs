//! Lane harness: run `M` parallel search lanes against one index, merge
//! their candidate sets, and apply straggler policies.
//!
//! The harness supports three execution modes. `NaiveIdentical` runs the
//! same budgeted search on every lane, which is the redundant baseline:
//! deterministic backends return identical candidate sets, so the merged
//! union is no larger than a single lane's output. `NaiveJitteredEntry`
//! varies only the graph entry point per lane (HNSW only), buying partial
//! decorrelation without any budget coordination. `Partitioned` enumerates
//! one candidate pool, applies the keyed PRF permutation, and hands each
//! lane its positional slice — no lane-to-lane communication, identical
//! per-lane budgets, and (at `alpha = 1`) pairwise-disjoint selections.
//!
//! Straggler handling is separated from lane execution: [`prepare_query`]
//! produces a [`PendingOutcome`] holding every lane's result, and
//! [`simulate_stragglers`] replays arrival schedules against it. Arrival
//! order is a pure function of the injected delays, so policy behaviour is
//! reproducible and independent of host scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::PartitionConfig;
use crate::error::{Error, Result};
use crate::index::{
    hnsw_search, hnsw_search_layer0_from, ivf_search_lists, Dataset, IndexHandle, Metric,
};
use crate::outcome::{CostCounters, LaneResult, MergedResult, ScoredId};
use crate::planner::alpha_partition;
use crate::pool::CandidatePool;
use crate::prf::{mix64, permute_ids, permute_pool, PrfKey, SplitMix64};
use crate::scalar::Scalar;

/// Stream tag mixed into per-lane jittered-entry draws so they do not
/// collide with any other use of the query seed.
const JITTER_STREAM: u64 = 0x6c61_6e65_5f6a_6974;

/// How the lanes derive their per-query work.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LaneMode {
    /// Every lane runs the same budgeted search; the redundant baseline.
    NaiveIdentical,
    /// Every lane runs the same budget from a different pseudorandom graph
    /// entry point. HNSW only; other families have no entry point to vary.
    NaiveJitteredEntry,
    /// One shared pool, PRF-permuted, positionally partitioned. `alpha`
    /// overrides the configured dedicated fraction for this run.
    Partitioned { alpha: f64 },
}

impl std::fmt::Display for LaneMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LaneMode::NaiveIdentical => f.write_str("naive_identical"),
            LaneMode::NaiveJitteredEntry => f.write_str("naive_jittered"),
            LaneMode::Partitioned { .. } => f.write_str("partitioned"),
        }
    }
}

impl LaneMode {
    /// The effective dedicated fraction, if this mode has one.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            LaneMode::Partitioned { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

/// Which lanes count toward the merged result when arrivals are staggered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StragglerPolicy {
    /// Count every lane regardless of arrival time.
    WaitAll,
    /// Count the minimal arrival-ordered lane prefix whose merged distinct
    /// candidate count reaches the given target (all lanes if unreachable).
    FirstKArrivals(u32),
    /// Count lanes arriving within the deadline; if the merged distinct
    /// count then falls short of the requested top-k, backfill candidates
    /// from the shared region of the pool.
    TimeBoxedBackfill(Duration),
}

/// Whether lanes run on the calling thread or one OS thread each.
///
/// Outcomes are identical either way — lane work is pure and the merge
/// consumes lanes in lane-id order — which is itself a tested invariant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    Threads,
}

/// Harness knobs that are not part of the partition configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct LaneOptions {
    pub execution: Execution,
    /// Partition IVF pools at document granularity (each lane rescores a
    /// slice of covered documents) instead of the default list-granularity
    /// routing (each lane scans a disjoint share of the covering lists).
    pub ivf_doc_level: bool,
}

/// Everything the straggler policies need, captured before any policy is
/// applied: one result per lane plus the pool context for backfilling.
#[derive(Clone, Debug)]
pub struct PendingOutcome<T> {
    mode: LaneMode,
    per_lane: Vec<LaneResult<T>>,
    pool_cost: CostCounters,
    planner_time: Duration,
    /// Ids eligible for deadline backfill, in preference order: the shared
    /// region of the permuted pool (doc partitioning) or the documents of
    /// the shared list suffix (list partitioning). Empty for naive modes.
    backfill_candidates: Vec<u64>,
    dataset: Arc<Dataset<T>>,
    query: Vec<T>,
    k_total: u32,
}

/// Final per-query result after merging and straggler accounting.
#[derive(Clone, Debug)]
pub struct QueryOutcome<T> {
    /// Union, overlap, and top-k over the counted lanes (plus backfill).
    pub merged: MergedResult<T>,
    /// Every lane's result, counted or not, in lane-id order.
    pub per_lane: Vec<LaneResult<T>>,
    /// Lanes contributing to `merged`, in arrival order.
    pub lanes_counted: Vec<u32>,
    /// Candidates added by deadline backfill (empty for other policies).
    pub backfilled: Vec<ScoredId<T>>,
    /// Candidate-generation cost: pool enumeration for partitioned mode,
    /// the (single) search cost for baselines.
    pub pool_cost: CostCounters,
    /// All work actually executed: pool enumeration plus every lane,
    /// counted or not, plus backfill rescoring; `planner_time` holds the
    /// permutation + partition + merge bookkeeping time.
    pub total_cost: CostCounters,
}

/// One query outcome flattened to a JSON line for experiment logs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub query_id: u64,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub m: u32,
    pub lanes_counted: Vec<u32>,
    pub union_size: usize,
    pub overlap_rho: f64,
    pub backfilled: usize,
    pub topk: Vec<u64>,
    pub per_lane_ids: Vec<Vec<u64>>,
    pub cost: CostCounters,
}

impl<T: Scalar> QueryOutcome<T> {
    /// Flatten for the JSONL experiment log.
    pub fn to_record(&self, query_id: u64, mode: LaneMode) -> OutcomeRecord {
        OutcomeRecord {
            query_id,
            mode: mode.to_string(),
            alpha: mode.alpha(),
            m: self.per_lane.len() as u32,
            lanes_counted: self.lanes_counted.clone(),
            union_size: self.merged.union_size,
            overlap_rho: self.merged.overlap_rho,
            backfilled: self.backfilled.len(),
            topk: self.merged.topk_ids(),
            per_lane_ids: self
                .per_lane
                .iter()
                .map(|l| l.ids().collect())
                .collect(),
            cost: self.total_cost,
        }
    }
}

impl<T: Scalar> PendingOutcome<T> {
    pub fn lane_count(&self) -> usize {
        self.per_lane.len()
    }

    pub fn per_lane(&self) -> &[LaneResult<T>] {
        &self.per_lane
    }

    pub fn mode(&self) -> LaneMode {
        self.mode
    }

    /// Apply a straggler policy under an injected delay schedule.
    ///
    /// Arrival order is `(delay, lane_id)` ascending — a pure function of
    /// the delays, never of host scheduling. `delays` must have one entry
    /// per lane and `k` must satisfy `1 <= k <= k_total`.
    pub fn finalize(
        &self,
        policy: StragglerPolicy,
        delays: &[Duration],
        k: usize,
    ) -> Result<QueryOutcome<T>> {
        let m = self.per_lane.len();
        if delays.len() != m {
            return Err(Error::invalid(format!(
                "got {} injected delays for {m} lanes",
                delays.len()
            )));
        }
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if k > self.k_total as usize {
            return Err(Error::invalid(format!(
                "k={k} exceeds the lane budget total k_total={}",
                self.k_total
            )));
        }

        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&r| (delays[r], r));

        let counted: Vec<usize> = match policy {
            StragglerPolicy::WaitAll => order,
            StragglerPolicy::FirstKArrivals(target) => {
                if target == 0 {
                    return Err(Error::invalid("FirstKArrivals target must be >= 1"));
                }
                let mut distinct: BTreeSet<u64> = BTreeSet::new();
                let mut prefix = Vec::new();
                for &r in &order {
                    prefix.push(r);
                    distinct.extend(self.per_lane[r].ids());
                    if distinct.len() >= target as usize {
                        break;
                    }
                }
                prefix
            }
            StragglerPolicy::TimeBoxedBackfill(deadline) => order
                .into_iter()
                .filter(|&r| delays[r] <= deadline)
                .collect(),
        };

        // Union with first-wins dedupe; scores for a given id are identical
        // across lanes because every lane scores exactly.
        let mut by_id: BTreeMap<u64, T> = BTreeMap::new();
        for &r in &counted {
            for s in &self.per_lane[r].selected {
                by_id.entry(s.id).or_insert(s.score);
            }
        }
        let overlap_rho = jaccard_counted(&self.per_lane, &counted);

        let metric = self.dataset.metric();
        let mut backfilled = Vec::new();
        if matches!(policy, StragglerPolicy::TimeBoxedBackfill(_)) && by_id.len() < k {
            for &id in &self.backfill_candidates {
                if by_id.len() >= k {
                    break;
                }
                if by_id.contains_key(&id) {
                    continue;
                }
                let score = metric.score(&self.query, self.dataset.vector(id as usize));
                by_id.insert(id, score);
                backfilled.push(ScoredId::new(id, score));
            }
        }

        let union_ids: BTreeSet<u64> = by_id.keys().copied().collect();
        let mut ranked: Vec<ScoredId<T>> = by_id
            .iter()
            .map(|(&id, &score)| ScoredId::new(id, score))
            .collect();
        metric.sort(&mut ranked);
        ranked.truncate(k);

        let mut total_cost: CostCounters = self
            .per_lane
            .iter()
            .map(|l| l.cost)
            .sum::<CostCounters>()
            + self.pool_cost;
        total_cost.vectors_scored += backfilled.len() as u64;
        total_cost.planner_time = self.planner_time;

        Ok(QueryOutcome {
            merged: MergedResult {
                union_size: union_ids.len(),
                union_ids,
                topk: ranked,
                overlap_rho,
            },
            per_lane: self.per_lane.clone(),
            lanes_counted: counted.into_iter().map(|r| r as u32).collect(),
            backfilled,
            pool_cost: self.pool_cost,
            total_cost,
        })
    }
}

/// Replay a straggler policy against prepared lane results.
///
/// Pure in `pending`: calling with different policies or delay schedules
/// never re-executes lane work, so policy comparisons see byte-identical
/// lane outputs.
pub fn simulate_stragglers<T: Scalar>(
    pending: &PendingOutcome<T>,
    policy: StragglerPolicy,
    injected_delays: &[Duration],
    k: usize,
) -> Result<QueryOutcome<T>> {
    pending.finalize(policy, injected_delays, k)
}

/// Jaccard overlap of the counted lanes' id sets; degenerate cases (fewer
/// than two lanes, empty union) report `1.0`, "as overlapped as possible".
fn jaccard_counted<T: Scalar>(per_lane: &[LaneResult<T>], counted: &[usize]) -> f64 {
    if counted.len() < 2 {
        return 1.0;
    }
    let mut inter: BTreeSet<u64> = per_lane[counted[0]].id_set();
    let mut union: BTreeSet<u64> = BTreeSet::new();
    for &r in counted {
        let set = per_lane[r].id_set();
        inter = inter.intersection(&set).copied().collect();
        union.extend(set);
    }
    if union.is_empty() {
        return 1.0;
    }
    inter.len() as f64 / union.len() as f64
}

/// Merge lane selections: dedupe by id, rank under the metric, truncate.
///
/// Merging is idempotent — feeding the merged output back in reproduces it
/// — and `overlap_rho` is the Jaccard overlap of the input selections.
pub fn merge_lanes<T: Scalar>(
    metric: Metric,
    lane_selections: &[&[ScoredId<T>]],
    k: usize,
) -> MergedResult<T> {
    let mut by_id: BTreeMap<u64, T> = BTreeMap::new();
    for sel in lane_selections {
        for s in *sel {
            by_id.entry(s.id).or_insert(s.score);
        }
    }
    let union_ids: BTreeSet<u64> = by_id.keys().copied().collect();
    let mut ranked: Vec<ScoredId<T>> = by_id
        .iter()
        .map(|(&id, &score)| ScoredId::new(id, score))
        .collect();
    metric.sort(&mut ranked);
    ranked.truncate(k);

    let overlap_rho = if lane_selections.len() < 2 {
        1.0
    } else {
        let sets: Vec<BTreeSet<u64>> = lane_selections
            .iter()
            .map(|sel| sel.iter().map(|s| s.id).collect())
            .collect();
        let mut inter = sets[0].clone();
        for set in &sets[1..] {
            inter = inter.intersection(set).copied().collect();
        }
        if union_ids.is_empty() {
            1.0
        } else {
            inter.len() as f64 / union_ids.len() as f64
        }
    };

    MergedResult {
        union_size: union_ids.len(),
        union_ids,
        topk: ranked,
        overlap_rho,
    }
}

/// Deterministic per-(query, lane) entry node for the jittered baseline.
fn jittered_entry(query_seed: u64, lane_id: u32, n: usize) -> u32 {
    let mut rng = SplitMix64::new(query_seed ^ mix64(JITTER_STREAM.wrapping_add(lane_id as u64)));
    rng.next_below(n as u64) as u32
}

/// Run one closure per lane, sequentially or on scoped threads.
fn run_lanes<T, F>(m: u32, execution: Execution, task: F) -> Result<Vec<LaneResult<T>>>
where
    T: Scalar,
    F: Fn(u32) -> Result<LaneResult<T>> + Sync,
{
    match execution {
        Execution::Sequential => (0..m).map(&task).collect(),
        Execution::Threads => {
            let task = &task;
            let results: Vec<Result<LaneResult<T>>> = std::thread::scope(|scope| {
                let handles: Vec<_> = (0..m)
                    .map(|r| scope.spawn(move || task(r)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("lane thread panicked"))
                    .collect()
            });
            results.into_iter().collect()
        }
    }
}

/// Score `ids` against `query` exactly and order them by rank.
fn rescore_ids<T: Scalar>(
    ds: &Dataset<T>,
    metric: Metric,
    query: &[T],
    ids: &[u64],
) -> Vec<ScoredId<T>> {
    let mut out: Vec<ScoredId<T>> = ids
        .iter()
        .map(|&id| ScoredId::new(id, metric.score(query, ds.vector(id as usize))))
        .collect();
    metric.sort(&mut out);
    out
}

/// Execute all lanes for one query and capture the pre-policy state.
///
/// Partitioned mode performs pool enumeration once, then derives each
/// lane's share from the shared PRF key and the configuration alone. For
/// HNSW and brute-force (and IVF with `ivf_doc_level`), lanes rescore
/// their document slices exactly; for IVF, lanes scan a round-robin share
/// of the covering lists (the first `floor(alpha * L)` permuted lists are
/// dedicated, the rest shared by all lanes), so dedicated list scans sum
/// to exactly one naive scan of the same lists.
pub fn prepare_query<T: Scalar>(
    idx: &IndexHandle<T>,
    query: &[T],
    cfg: &PartitionConfig,
    mode: LaneMode,
    opts: &LaneOptions,
) -> Result<PendingOutcome<T>> {
    let ds = idx.dataset().clone();
    ds.check_query(query)?;
    let m = cfg.m();
    let k_lane = cfg.k_lane() as usize;

    let timed = |r: u32, f: &dyn Fn() -> Result<(Vec<ScoredId<T>>, CostCounters)>| {
        let start = Instant::now();
        let (selected, cost) = f()?;
        Ok(LaneResult {
            lane_id: r,
            selected,
            cost,
            wall_time: start.elapsed(),
        })
    };

    match mode {
        LaneMode::NaiveIdentical => {
            let per_lane = run_lanes(m, opts.execution, |r| {
                timed(r, &|| match idx {
                    IndexHandle::BruteForce(b) => b.search(query, k_lane),
                    IndexHandle::HnswLite(h) => hnsw_search(h, query, k_lane, k_lane),
                    IndexHandle::IvfFlat(ivf) => {
                        let plan = ivf.probe_plan(query, k_lane)?;
                        let (sel, scan) = ivf_search_lists(ivf, query, &plan.lists, k_lane)?;
                        Ok((sel, plan.cost + scan))
                    }
                })
            })?;
            Ok(PendingOutcome {
                mode,
                per_lane,
                pool_cost: CostCounters::default(),
                planner_time: Duration::ZERO,
                backfill_candidates: Vec::new(),
                dataset: ds,
                query: query.to_vec(),
                k_total: cfg.k_total(),
            })
        }
        LaneMode::NaiveJitteredEntry => {
            let IndexHandle::HnswLite(h) = idx else {
                return Err(Error::invalid(
                    "jittered-entry mode requires an hnsw index",
                ));
            };
            let n = ds.len();
            let seed = cfg.query_seed();
            let per_lane = run_lanes(m, opts.execution, |r| {
                let entry = jittered_entry(seed, r, n);
                timed(r, &|| {
                    hnsw_search_layer0_from(h, query, entry, k_lane, k_lane)
                })
            })?;
            Ok(PendingOutcome {
                mode,
                per_lane,
                pool_cost: CostCounters::default(),
                planner_time: Duration::ZERO,
                backfill_candidates: Vec::new(),
                dataset: ds,
                query: query.to_vec(),
                k_total: cfg.k_total(),
            })
        }
        LaneMode::Partitioned { alpha } => {
            let cfg = cfg.clone().with_alpha(alpha)?;
            let (pool, pool_cost) = idx.enumerate_pool(query, cfg.k_pool() as usize)?;
            let key = PrfKey::new(cfg.query_seed());

            let list_granularity =
                matches!(idx, IndexHandle::IvfFlat(_)) && !opts.ivf_doc_level;
            if list_granularity {
                prepare_partitioned_lists(idx, query, &cfg, &pool, pool_cost, key, opts)
            } else {
                prepare_partitioned_docs(&ds, query, &cfg, &pool, pool_cost, key, opts)
            }
        }
    }
}

/// Document-granularity partitioning: permute the pool, slice positions.
fn prepare_partitioned_docs<T: Scalar>(
    ds: &Arc<Dataset<T>>,
    query: &[T],
    cfg: &PartitionConfig,
    pool: &CandidatePool<T>,
    pool_cost: CostCounters,
    key: PrfKey,
    opts: &LaneOptions,
) -> Result<PendingOutcome<T>> {
    // IVF document pools cover whole lists and may exceed K_pool; the
    // partition then runs over the actual pool length (still feasible,
    // since a longer pool only relaxes the requirement).
    let eff = if pool.len() as u32 == cfg.k_pool() {
        cfg.clone()
    } else {
        PartitionConfig::new(
            cfg.m(),
            cfg.k_lane(),
            cfg.alpha(),
            pool.len() as u32,
            cfg.query_seed(),
        )?
    };

    let planner_start = Instant::now();
    let permuted = permute_pool(pool, key)?;
    let perm_ids = permuted.ids();
    let assignments: Vec<Vec<u64>> = (0..eff.m())
        .map(|r| Ok(alpha_partition(&perm_ids, &eff, r)?.selected_ids))
        .collect::<Result<_>>()?;
    let planner_time = planner_start.elapsed();

    let suffix_start = (eff.m() * eff.quotas().k_ded) as usize;
    let backfill_candidates = perm_ids[suffix_start..].to_vec();

    let metric = ds.metric();
    let per_lane = run_lanes(eff.m(), opts.execution, |r| {
        let start = Instant::now();
        let ids = &assignments[r as usize];
        let selected = rescore_ids(ds, metric, query, ids);
        Ok(LaneResult {
            lane_id: r,
            selected,
            cost: CostCounters {
                vectors_scored: ids.len() as u64,
                ..CostCounters::default()
            },
            wall_time: start.elapsed(),
        })
    })?;

    Ok(PendingOutcome {
        mode: LaneMode::Partitioned { alpha: eff.alpha() },
        per_lane,
        pool_cost,
        planner_time,
        backfill_candidates,
        dataset: ds.clone(),
        query: query.to_vec(),
        k_total: eff.k_total(),
    })
}

/// List-granularity partitioning for IVF: permute the covering lists, give
/// lane `r` the dedicated lists at permuted positions `< floor(alpha * L)`
/// with `pos % M == r`, and let every lane scan the shared list suffix.
fn prepare_partitioned_lists<T: Scalar>(
    idx: &IndexHandle<T>,
    query: &[T],
    cfg: &PartitionConfig,
    pool: &CandidatePool<T>,
    pool_cost: CostCounters,
    key: PrfKey,
    opts: &LaneOptions,
) -> Result<PendingOutcome<T>> {
    let IndexHandle::IvfFlat(ivf) = idx else {
        return Err(Error::invalid("list partitioning requires an ivf index"));
    };
    let ds = idx.dataset().clone();
    let m = cfg.m() as usize;
    let k_lane = cfg.k_lane() as usize;
    let lists = pool.route_sequence();
    let planner_start = Instant::now();
    let as_u64: Vec<u64> = lists.iter().map(|&l| l as u64).collect();
    let permuted = permute_ids(&as_u64, key)?;
    let dedicated = ((cfg.alpha() * permuted.len() as f64).floor() as usize).min(permuted.len());
    let mut lane_lists: Vec<Vec<u32>> = vec![Vec::new(); m];
    for (pos, &list) in permuted.iter().enumerate() {
        if pos < dedicated {
            lane_lists[pos % m].push(list as u32);
        } else {
            for ll in &mut lane_lists {
                ll.push(list as u32);
            }
        }
    }
    let planner_time = planner_start.elapsed();

    // Backfill draws on documents of the shared list suffix, pool order.
    let shared: BTreeSet<u32> = permuted[dedicated..].iter().map(|&l| l as u32).collect();
    let backfill_candidates: Vec<u64> = pool
        .entries()
        .iter()
        .zip(pool.list_routes())
        .filter(|(_, route)| shared.contains(route))
        .map(|(entry, _)| entry.id)
        .collect();

    let per_lane = run_lanes(cfg.m(), opts.execution, |r| {
        let start = Instant::now();
        let mine = &lane_lists[r as usize];
        let (selected, cost) = if mine.is_empty() {
            // Fewer covering lists than lanes: this lane has no work.
            (Vec::new(), CostCounters::default())
        } else {
            ivf_search_lists(ivf, query, mine, k_lane)?
        };
        Ok(LaneResult {
            lane_id: r,
            selected,
            cost,
            wall_time: start.elapsed(),
        })
    })?;

    Ok(PendingOutcome {
        mode: LaneMode::Partitioned { alpha: cfg.alpha() },
        per_lane,
        pool_cost,
        planner_time,
        backfill_candidates,
        dataset: ds,
        query: query.to_vec(),
        k_total: cfg.k_total(),
    })
}

/// Run one query end to end with zero injected delay.
///
/// The policy still applies (e.g. `FirstKArrivals` counts a lane-id-order
/// prefix when all delays are equal); use [`simulate_stragglers`] to replay
/// other schedules without re-running lanes.
pub fn run_query<T: Scalar>(
    idx: &IndexHandle<T>,
    query: &[T],
    cfg: &PartitionConfig,
    mode: LaneMode,
    policy: StragglerPolicy,
    k: usize,
) -> Result<QueryOutcome<T>> {
    run_query_opts(idx, query, cfg, mode, policy, k, &LaneOptions::default())
}

/// [`run_query`] with explicit execution/granularity options.
pub fn run_query_opts<T: Scalar>(
    idx: &IndexHandle<T>,
    query: &[T],
    cfg: &PartitionConfig,
    mode: LaneMode,
    policy: StragglerPolicy,
    k: usize,
    opts: &LaneOptions,
) -> Result<QueryOutcome<T>> {
    let pending = prepare_query(idx, query, cfg, mode, opts)?;
    let delays = vec![Duration::ZERO; pending.lane_count()];
    pending.finalize(policy, &delays, k)
}

/// One search over the whole budget `k_total` on a single index, reported
/// in the same shape as a lane run (one pseudo-lane, `rho = 1`).
///
/// For HNSW this is literally the same call as partitioned pool
/// enumeration at `K_pool = k_total`, which is what makes the equal-cost
/// comparison exact; for IVF it scans the minimal covering list prefix.
pub fn run_single_baseline<T: Scalar>(
    idx: &IndexHandle<T>,
    query: &[T],
    k_total: u32,
    k: usize,
) -> Result<QueryOutcome<T>> {
    if k == 0 || k as u32 > k_total {
        return Err(Error::invalid(format!(
            "need 1 <= k <= k_total, got k={k}, k_total={k_total}"
        )));
    }
    let budget = k_total as usize;
    let start = Instant::now();
    let (selected, cost) = match idx {
        IndexHandle::BruteForce(b) => b.search(query, budget)?,
        IndexHandle::HnswLite(h) => hnsw_search(h, query, budget, budget)?,
        IndexHandle::IvfFlat(ivf) => {
            let plan = ivf.probe_plan(query, budget)?;
            let (sel, scan) = ivf_search_lists(ivf, query, &plan.lists, budget)?;
            (sel, plan.cost + scan)
        }
    };
    let wall_time = start.elapsed();

    let merged = merge_lanes(idx.dataset().metric(), &[selected.as_slice()], k);
    Ok(QueryOutcome {
        merged,
        per_lane: vec![LaneResult {
            lane_id: 0,
            selected,
            cost,
            wall_time,
        }],
        lanes_counted: vec![0],
        backfilled: Vec::new(),
        pool_cost: cost,
        total_cost: cost,
    })
}

/// Deterministic exponential delay schedule for straggler experiments.
///
/// Inverse-CDF sampling on the shared splitmix64 stream: the schedule for
/// a given `(m, mean, seed)` is identical on every platform.
pub fn exponential_delays(m: u32, mean: Duration, seed: u64) -> Vec<Duration> {
    let mut rng = SplitMix64::new(seed);
    (0..m)
        .map(|_| {
            let u = rng.next_f64().min(1.0 - f64::EPSILON);
            Duration::from_secs_f64(-mean.as_secs_f64() * (1.0 - u).ln())
        })
        .collect()
}

/// Timing summary for one planner grid point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PlannerTiming {
    pub k_total: u32,
    pub m: u32,
    pub trials: u32,
    pub mean_micros: f64,
    pub p50_micros: f64,
    pub p95_micros: f64,
}

/// Time the full planner path — permute, `M` partitions, union merge — for
/// each `k_total` in the grid.
///
/// Every grid point runs `trials` timed iterations (after a short warm-up)
/// with a fresh query seed per trial, and reports mean/p50/p95 in
/// microseconds. The planner touches only ids, so this measures the
/// coordination overhead a lane pays per query, independent of any index.
pub fn planner_microbenchmark(
    m: u32,
    alpha: f64,
    k_total_grid: &[u32],
    trials: u32,
    seed: u64,
) -> Result<Vec<PlannerTiming>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    if k_total_grid.is_empty() {
        return Err(Error::invalid("the k_total grid must be nonempty"));
    }
    let mut out = Vec::with_capacity(k_total_grid.len());
    for &k_total in k_total_grid {
        if m == 0 || k_total == 0 || k_total % m != 0 {
            return Err(Error::invalid(format!(
                "k_total={k_total} must be a positive multiple of m={m}"
            )));
        }
        let k_lane = k_total / m;
        let cfg = PartitionConfig::new(m, k_lane, alpha, k_total, seed)?;
        let ids: Vec<u64> = (0..k_total as u64).collect();

        let one_trial = |trial: u64| -> Result<f64> {
            let cfg = cfg.clone().with_query_seed(seed.wrapping_add(trial));
            let start = Instant::now();
            let key = PrfKey::new(cfg.query_seed());
            let permuted = permute_ids(&ids, key)?;
            let mut union: Vec<u64> = Vec::with_capacity(k_total as usize);
            for r in 0..m {
                let assignment = alpha_partition(&permuted, &cfg, r)?;
                union.extend_from_slice(&assignment.selected_ids);
            }
            union.sort_unstable();
            union.dedup();
            let elapsed = start.elapsed().as_secs_f64() * 1e6;
            std::hint::black_box(&union);
            Ok(elapsed)
        };

        let warmup = (trials / 10).clamp(10, 1_000);
        for t in 0..warmup {
            one_trial(t as u64)?;
        }
        let mut samples: Vec<f64> = Vec::with_capacity(trials as usize);
        for t in 0..trials {
            samples.push(one_trial(warmup as u64 + t as u64)?);
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let quantile = |q: f64| -> f64 {
            let rank = ((q * samples.len() as f64).ceil() as usize).max(1) - 1;
            samples[rank.min(samples.len() - 1)]
        };
        out.push(PlannerTiming {
            k_total,
            m,
            trials,
            mean_micros: mean,
            p50_micros: quantile(0.50),
            p95_micros: quantile(0.95),
        });
    }
    Ok(out)
}
