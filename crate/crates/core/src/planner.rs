//! Position-based slicing of the permuted pool into per-lane selections,
//! plus the closed-form coverage/gain predictors and the deployment helper.
//!
//! The planner is pure integer arithmetic over pool positions: computing lane
//! `r`'s assignment reads only `(pool, cfg, r)`, which is what makes the
//! scheme coordination-free — every lane can slice the same permuted pool
//! independently and the slices compose into the predicted union.

use serde::{Deserialize, Serialize};

use crate::config::{HeterogeneousPartitionConfig, PartitionConfig};
use crate::error::{Error, Result};

/// How a lane fills the budget left after its dedicated positions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Fill from the shared suffix `[M*k_ded, M*k_ded + k_shr)`.
    ///
    /// This is the semantics consistent with the coverage law
    /// `|S_union| = M*k_ded + k_shr`: the union of lane selections is exactly
    /// the pool prefix of that length.
    #[default]
    SuffixShared,
    /// Fill by scanning the pool from position 0, skipping already-chosen
    /// positions.
    ///
    /// Compatibility mode only: for `0 < alpha < 1` the scan refills from
    /// other lanes' dedicated positions, shrinking the union below the
    /// coverage law's prediction. Kept selectable so the two fill rules can
    /// be compared; never the default.
    ScanBackfill,
}

/// One lane's slice of the permuted pool.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaneAssignment {
    pub lane_id: u32,
    /// Pool positions dedicated to this lane; strictly increasing, all
    /// congruent to `lane_id` mod `M` in the homogeneous layout.
    pub dedicated_positions: Vec<u32>,
    /// Pool positions drawn from the shared region; identical across lanes
    /// under [`PartitionStrategy::SuffixShared`] (homogeneous config).
    pub shared_positions: Vec<u32>,
    /// Candidate ids at `dedicated_positions` then `shared_positions`,
    /// truncated to the lane budget.
    pub selected_ids: Vec<u64>,
}

impl LaneAssignment {
    /// All assigned pool positions in selection order.
    pub fn positions(&self) -> Vec<u32> {
        let mut p = self.dedicated_positions.clone();
        p.extend_from_slice(&self.shared_positions);
        p
    }

    /// Flatten into an audit record for one query.
    pub fn to_record(&self, query_id: u64) -> AssignmentRecord {
        AssignmentRecord {
            query_id,
            lane_id: self.lane_id,
            positions: self.positions(),
            ids: self.selected_ids.clone(),
        }
    }
}

/// One planner decision as a flat, serializable line.
///
/// Dumped as JSON lines by the experiment CLI and re-read by the metrics
/// module's offline overlap audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub query_id: u64,
    pub lane_id: u32,
    pub positions: Vec<u32>,
    pub ids: Vec<u64>,
}

fn check_pool_len(pool_len: usize, k_pool: u32) -> Result<()> {
    if pool_len != k_pool as usize {
        return Err(Error::PoolTooSmall {
            required: k_pool as usize,
            actual: pool_len,
        });
    }
    Ok(())
}

fn check_lane_id(lane_id: u32, m: u32) -> Result<()> {
    if lane_id >= m {
        return Err(Error::invalid(format!(
            "lane_id {lane_id} out of range for M={m}"
        )));
    }
    Ok(())
}

/// Slice the permuted pool for one lane under the default suffix semantics.
///
/// Lane `r` takes dedicated positions `{r, r+M, ..., r+(k_ded-1)M}` — the
/// congruence class `r mod M` — and then the shared suffix
/// `[M*k_ded, M*k_ded + k_shr)`, identical for every lane. `pool` must be the
/// full permuted pool (`|pool| == K_pool`).
pub fn alpha_partition(
    pool: &[u64],
    cfg: &PartitionConfig,
    lane_id: u32,
) -> Result<LaneAssignment> {
    alpha_partition_with_strategy(pool, cfg, lane_id, PartitionStrategy::SuffixShared)
}

/// [`alpha_partition`] with an explicit backfill strategy.
pub fn alpha_partition_with_strategy(
    pool: &[u64],
    cfg: &PartitionConfig,
    lane_id: u32,
    strategy: PartitionStrategy,
) -> Result<LaneAssignment> {
    check_pool_len(pool.len(), cfg.k_pool())?;
    check_lane_id(lane_id, cfg.m())?;
    let q = cfg.quotas();
    let m = cfg.m();

    let dedicated_positions: Vec<u32> = (0..q.k_ded).map(|j| lane_id + j * m).collect();

    let shared_positions: Vec<u32> = match strategy {
        PartitionStrategy::SuffixShared => {
            let start = m * q.k_ded;
            (start..start + q.k_shr).collect()
        }
        PartitionStrategy::ScanBackfill => {
            // Front-scan fill rule: walk the pool from the front, skipping
            // this lane's own dedicated positions, until the lane budget is
            // met.
            let dedicated: std::collections::HashSet<u32> =
                dedicated_positions.iter().copied().collect();
            let mut extra = Vec::with_capacity(q.k_shr as usize);
            for pos in 0..cfg.k_pool() {
                if extra.len() as u32 >= q.k_shr {
                    break;
                }
                if !dedicated.contains(&pos) {
                    extra.push(pos);
                }
            }
            extra
        }
    };

    let mut selected_ids: Vec<u64> = dedicated_positions
        .iter()
        .chain(shared_positions.iter())
        .map(|&p| pool[p as usize])
        .collect();
    selected_ids.truncate(cfg.k_lane() as usize);

    Ok(LaneAssignment {
        lane_id,
        dedicated_positions,
        shared_positions,
        selected_ids,
    })
}

/// Slice the permuted pool for one lane of a heterogeneous configuration.
///
/// Dedicated blocks are laid out by interleaved round-robin in lane-id
/// order: walk pool positions from 0, handing each position to the next lane
/// (by id) that still has unfilled dedicated quota. The blocks are pairwise
/// disjoint and exactly fill positions `[0, sum_r k_ded_r)`; with equal
/// budgets the layout reduces to the homogeneous congruence classes. The
/// shared suffix starts at `sum_r k_ded_r` and lane `r` takes its first
/// `k_shr_r` positions.
pub fn alpha_partition_heterogeneous(
    pool: &[u64],
    cfg: &HeterogeneousPartitionConfig,
    lane_id: u32,
) -> Result<LaneAssignment> {
    check_pool_len(pool.len(), cfg.k_pool())?;
    check_lane_id(lane_id, cfg.m())?;
    let quotas = cfg.lane_quotas();
    let m = cfg.m() as usize;

    let mut remaining: Vec<u32> = quotas.iter().map(|q| q.k_ded).collect();
    let mut dedicated_positions = Vec::with_capacity(quotas[lane_id as usize].k_ded as usize);
    let mut pos: u32 = 0;
    while remaining.iter().any(|&r| r > 0) {
        for lane in 0..m {
            if remaining[lane] > 0 {
                if lane == lane_id as usize {
                    dedicated_positions.push(pos);
                }
                remaining[lane] -= 1;
                pos += 1;
            }
        }
    }

    let start = cfg.total_dedicated();
    let k_shr = quotas[lane_id as usize].k_shr;
    let shared_positions: Vec<u32> = (start..start + k_shr).collect();

    let mut selected_ids: Vec<u64> = dedicated_positions
        .iter()
        .chain(shared_positions.iter())
        .map(|&p| pool[p as usize])
        .collect();
    selected_ids.truncate(quotas[lane_id as usize].k_lane as usize);

    Ok(LaneAssignment {
        lane_id,
        dedicated_positions,
        shared_positions,
        selected_ids,
    })
}

/// Predicted distinct coverage `|S_union(alpha)| = M*k_ded + k_shr`.
///
/// Exact (not approximate) under feasibility and suffix-shared fill; equals
/// `k_lane * (1 + alpha*(M-1))` whenever `alpha * k_lane` is integral.
pub fn coverage(cfg: &PartitionConfig) -> u32 {
    let q = cfg.quotas();
    cfg.m() * q.k_ded + q.k_shr
}

/// Predicted recall lift from alpha=0 to alpha=1 at equal cost:
/// `M / (1 + (M-1)(1-rho0))`.
///
/// `rho0` is the baseline lane-overlap Jaccard; as duplication vanishes
/// (`rho0 -> 0`) the gain collapses to 1, and at full duplication it
/// approaches the lane count.
pub fn predicted_gain(rho0: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("M must be >= 1"));
    }
    if !rho0.is_finite() || !(0.0..=1.0).contains(&rho0) {
        return Err(Error::invalid(format!(
            "rho0 must lie in [0, 1], got {rho0}"
        )));
    }
    let m = f64::from(m);
    Ok(m / (1.0 + (m - 1.0) * (1.0 - rho0)))
}

/// Deployment-guide dedication fraction for a measured baseline overlap.
///
/// High-overlap regimes dedicate everything; moderate and low regimes keep
/// some shared budget as a hedge.
pub fn recommend_alpha(rho0: f64) -> f64 {
    if rho0 >= 0.9 {
        1.0
    } else if rho0 >= 0.6 {
        0.7
    } else {
        0.5
    }
}
