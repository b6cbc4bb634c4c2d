//! Result and accounting types produced by searches and lane runs.

use std::collections::BTreeSet;
use std::ops::{Add, AddAssign};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// One candidate with its exact score under the dataset metric.
///
/// `score` is a distance for L2 (smaller is better) or a similarity for inner
/// product (larger is better); ordering is owned by [`crate::index::Metric`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredId<T> {
    pub id: u64,
    pub score: T,
}

impl<T: Scalar> ScoredId<T> {
    pub fn new(id: u64, score: T) -> Self {
        ScoredId { id, score }
    }
}

/// Serialize a `Duration` as integer microseconds (and back).
///
/// Keeps outcome logs flat and language-agnostic; sub-microsecond remainder
/// is dropped, which is fine for wall-clock reporting.
pub mod duration_micros {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        (d.as_micros() as u64).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_micros(u64::deserialize(d)?))
    }
}

/// Work accounting for one search, lane, or whole query.
///
/// Counters are additive: summing per-lane counters gives the query total.
/// `node_visits` counts HNSW distance evaluations, `list_scans` counts IVF
/// inverted lists opened, `vectors_scored` counts exact scoring operations
/// (brute force, IVF list scanning, rescoring). `planner_time` is the time
/// spent in PRF permutation + position assignment, kept separate from
/// traversal counters so cost parity can be asserted on work counts alone.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub node_visits: u64,
    pub list_scans: u64,
    pub vectors_scored: u64,
    #[serde(with = "duration_micros")]
    pub planner_time: Duration,
}

impl CostCounters {
    /// Traversal/scoring work only, excluding planner wall time.
    ///
    /// Use this for equal-cost comparisons: wall time is not reproducible,
    /// the work counts are.
    pub fn work_counts(&self) -> (u64, u64, u64) {
        (self.node_visits, self.list_scans, self.vectors_scored)
    }
}

impl Add for CostCounters {
    type Output = CostCounters;

    fn add(self, rhs: CostCounters) -> CostCounters {
        CostCounters {
            node_visits: self.node_visits + rhs.node_visits,
            list_scans: self.list_scans + rhs.list_scans,
            vectors_scored: self.vectors_scored + rhs.vectors_scored,
            planner_time: self.planner_time + rhs.planner_time,
        }
    }
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, rhs: CostCounters) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for CostCounters {
    fn sum<I: Iterator<Item = CostCounters>>(iter: I) -> CostCounters {
        iter.fold(CostCounters::default(), |acc, c| acc + c)
    }
}

/// One lane's selection for one query, with its cost and timing.
#[derive(Clone, Debug)]
pub struct LaneResult<T> {
    /// Lane index in `[0, M)`.
    pub lane_id: u32,
    /// Rescored candidates in final (score, id) order; no duplicate ids, and
    /// exactly `k_lane` entries whenever feasibility holds.
    pub selected: Vec<ScoredId<T>>,
    pub cost: CostCounters,
    pub wall_time: Duration,
}

impl<T: Scalar> LaneResult<T> {
    /// Selected ids in selection order.
    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.selected.iter().map(|s| s.id)
    }

    /// Selected ids as a sorted set.
    pub fn id_set(&self) -> BTreeSet<u64> {
        self.ids().collect()
    }
}

/// Deduplicated union of lane selections with the final top-k.
///
/// Built by [`crate::lanes::merge_lanes`]; the fields mirror what the union
/// accounting needs: the distinct coverage `|S_union|`, the Jaccard overlap
/// `rho` across the counted lanes, and the top-k re-ranked under the dataset
/// metric with ties broken by ascending id.
#[derive(Clone, Debug)]
pub struct MergedResult<T> {
    pub union_ids: BTreeSet<u64>,
    pub topk: Vec<ScoredId<T>>,
    pub overlap_rho: f64,
    pub union_size: usize,
}

impl<T: Scalar> MergedResult<T> {
    /// Top-k ids in rank order.
    pub fn topk_ids(&self) -> Vec<u64> {
        self.topk.iter().map(|s| s.id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_are_additive() {
        let a = CostCounters {
            node_visits: 3,
            list_scans: 1,
            vectors_scored: 10,
            planner_time: Duration::from_micros(5),
        };
        let b = CostCounters {
            node_visits: 7,
            list_scans: 2,
            vectors_scored: 30,
            planner_time: Duration::from_micros(15),
        };
        let sum: CostCounters = [a, b].into_iter().sum();
        assert_eq!(sum.node_visits, 10);
        assert_eq!(sum.list_scans, 3);
        assert_eq!(sum.vectors_scored, 40);
        assert_eq!(sum.planner_time, Duration::from_micros(20));
        assert_eq!(sum.work_counts(), (10, 3, 40));
    }

    #[test]
    fn counters_serialize_duration_as_micros() {
        let c = CostCounters {
            node_visits: 1,
            list_scans: 2,
            vectors_scored: 3,
            planner_time: Duration::from_micros(37),
        };
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"planner_time\":37"), "json was {json}");
        let back: CostCounters = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn lane_result_id_accessors() {
        let lane = LaneResult {
            lane_id: 0,
            selected: vec![ScoredId::new(5, 1.0f32), ScoredId::new(2, 2.0)],
            cost: CostCounters::default(),
            wall_time: Duration::ZERO,
        };
        assert_eq!(lane.ids().collect::<Vec<_>>(), vec![5, 2]);
        assert_eq!(lane.id_set().into_iter().collect::<Vec<_>>(), vec![2, 5]);
    }
}
