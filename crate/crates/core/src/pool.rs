//! Per-query candidate pool.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::outcome::ScoredId;
use crate::scalar::Scalar;

/// Ordered list of candidate documents for one query.
///
/// Produced by an index's pool enumeration in the index's natural order, then
/// reordered by [`crate::prf::permute_pool`] into the per-query permutation
/// that the planner slices by position. Entries keep the score from
/// enumeration so lanes can rescore-free when the metric already matched.
///
/// For IVF pools each entry also records the coarse list it came from
/// (`list_routes`), which lane routing uses to preserve per-list scan parity.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePool<T> {
    entries: Vec<ScoredId<T>>,
    /// Parallel to `entries` when present; empty for non-IVF pools.
    list_routes: Vec<u32>,
}

impl<T: Scalar> CandidatePool<T> {
    /// Pool without routing information (brute-force and HNSW enumeration).
    ///
    /// Errors on duplicate ids: a pool is a set of candidates and duplicates
    /// indicate an enumeration bug upstream.
    pub fn new(entries: Vec<ScoredId<T>>) -> Result<Self> {
        Self::check_unique(&entries)?;
        Ok(CandidatePool {
            entries,
            list_routes: Vec::new(),
        })
    }

    /// Pool with a source-list route per entry (IVF enumeration).
    pub fn with_routes(entries: Vec<ScoredId<T>>, list_routes: Vec<u32>) -> Result<Self> {
        if entries.len() != list_routes.len() {
            return Err(Error::data(format!(
                "pool has {} entries but {} list routes",
                entries.len(),
                list_routes.len()
            )));
        }
        Self::check_unique(&entries)?;
        Ok(CandidatePool {
            entries,
            list_routes,
        })
    }

    fn check_unique(entries: &[ScoredId<T>]) -> Result<()> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in entries {
            if !seen.insert(e.id) {
                return Err(Error::DuplicatePoolId { id: e.id });
            }
        }
        Ok(())
    }

    /// Reorder entries (and routes) by `order`, a permutation of positions.
    ///
    /// Internal helper for the PRF permutation; debug-asserts that `order`
    /// is the right length.
    pub(crate) fn reordered(&self, order: &[usize]) -> Self {
        debug_assert_eq!(order.len(), self.entries.len());
        let entries = order.iter().map(|&i| self.entries[i]).collect();
        let list_routes = if self.list_routes.is_empty() {
            Vec::new()
        } else {
            order.iter().map(|&i| self.list_routes[i]).collect()
        };
        CandidatePool {
            entries,
            list_routes,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScoredId<T>] {
        &self.entries
    }

    /// Source list per entry; empty when the index has no list structure.
    pub fn list_routes(&self) -> &[u32] {
        &self.list_routes
    }

    /// Distinct source lists in first-occurrence order.
    ///
    /// For IVF pools (entries appended list by list in centroid rank order)
    /// this is exactly the ranked covering-list sequence.
    pub fn route_sequence(&self) -> Vec<u32> {
        let mut seen = HashSet::new();
        self.list_routes
            .iter()
            .filter(|&&r| seen.insert(r))
            .copied()
            .collect()
    }

    /// Candidate ids in pool order.
    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.id).collect()
    }

    /// Entry at a pool position.
    pub fn get(&self, pos: usize) -> Option<&ScoredId<T>> {
        self.entries.get(pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: u64, score: f32) -> ScoredId<f32> {
        ScoredId::new(id, score)
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = CandidatePool::new(vec![entry(1, 0.1), entry(2, 0.2), entry(1, 0.3)])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicatePoolId { id: 1 }));
    }

    #[test]
    fn rejects_route_length_mismatch() {
        assert!(CandidatePool::with_routes(vec![entry(1, 0.1)], vec![0, 1]).is_err());
    }

    #[test]
    fn route_sequence_is_first_occurrence_order() {
        let entries: Vec<ScoredId<f32>> = (0..6).map(|i| entry(i, 0.0)).collect();
        let pool = CandidatePool::with_routes(entries, vec![3, 3, 1, 1, 3, 0]).unwrap();
        assert_eq!(pool.route_sequence(), vec![3, 1, 0]);
        let unrouted = CandidatePool::new(vec![entry(1, 0.0)]).unwrap();
        assert!(unrouted.route_sequence().is_empty());
    }

    #[test]
    fn reorder_moves_routes_with_entries() {
        let pool =
            CandidatePool::with_routes(vec![entry(10, 0.1), entry(20, 0.2)], vec![7, 9]).unwrap();
        let flipped = pool.reordered(&[1, 0]);
        assert_eq!(flipped.ids(), vec![20, 10]);
        assert_eq!(flipped.list_routes(), &[9, 7]);
    }
}
