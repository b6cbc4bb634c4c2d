//! IVF-Flat: k-means coarse quantizer over inverted lists, with
//! caller-routed list scanning.
//!
//! The routing decision (which lists to open) is deliberately split from the
//! scanning work so the lane harness can hand each lane its own list set
//! while holding total per-list scan work constant.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{Dataset, Metric};
use crate::outcome::{CostCounters, ScoredId};
use crate::pool::CandidatePool;
use crate::prf::SplitMix64;
use crate::scalar::Scalar;

/// Lloyd-iteration cap; frozen for reproducibility.
const KMEANS_MAX_ITERS: usize = 25;

/// Inverted-file index with exact (flat) scoring inside lists.
///
/// Lists store ids in ascending order; vectors stay in the dataset and are
/// fetched by id at scan time. Centroids are dense `nlist x d`.
#[derive(Clone, Debug)]
pub struct IvfFlatIndex<T> {
    ds: Arc<Dataset<T>>,
    nlist: usize,
    train_sample_size: usize,
    rng_seed: u64,
    centroids: Vec<T>,
    lists: Vec<Vec<u32>>,
}

/// Ranked probe prefix for one query: the nearest lists, in centroid order,
/// covering at least the requested number of documents.
#[derive(Clone, Debug)]
pub struct ProbePlan {
    /// List ids in centroid-score order (best first).
    pub lists: Vec<u32>,
    /// Total documents across `lists`.
    pub covered_docs: usize,
    /// Centroid-ranking cost (`vectors_scored = nlist`).
    pub cost: CostCounters,
}

impl<T: Scalar> IvfFlatIndex<T> {
    pub fn dataset(&self) -> &Arc<Dataset<T>> {
        &self.ds
    }

    pub fn nlist(&self) -> usize {
        self.nlist
    }

    pub fn train_sample_size(&self) -> usize {
        self.train_sample_size
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Centroid of `list` as a slice.
    pub fn centroid(&self, list: u32) -> &[T] {
        let d = self.ds.dim();
        &self.centroids[list as usize * d..(list as usize + 1) * d]
    }

    /// Ids in `list`, ascending.
    pub fn list(&self, list: u32) -> &[u32] {
        &self.lists[list as usize]
    }

    /// Reassemble from persisted parts, re-checking structural invariants.
    pub(crate) fn from_parts(
        ds: Arc<Dataset<T>>,
        nlist: usize,
        train_sample_size: usize,
        rng_seed: u64,
        centroids: Vec<T>,
        lists: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if lists.len() != nlist || centroids.len() != nlist * ds.dim() {
            return Err(Error::data("centroid/list shape does not match header"));
        }
        let mut seen = vec![false; ds.len()];
        for list in &lists {
            for &id in list {
                let slot = seen
                    .get_mut(id as usize)
                    .ok_or_else(|| Error::data("list member id out of range"))?;
                if std::mem::replace(slot, true) {
                    return Err(Error::data(format!("id {id} appears in two lists")));
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::data("some dataset ids missing from lists"));
        }
        Ok(IvfFlatIndex {
            ds,
            nlist,
            train_sample_size,
            rng_seed,
            centroids,
            lists,
        })
    }

    /// Rank every list by centroid score for `query`, best first, ties by
    /// ascending list id. Costs one scoring operation per centroid.
    pub fn rank_lists(&self, query: &[T]) -> Result<(Vec<ScoredId<T>>, CostCounters)> {
        self.ds.check_query(query)?;
        let metric = self.ds.metric();
        let mut ranked: Vec<ScoredId<T>> = (0..self.nlist)
            .map(|c| ScoredId::new(c as u64, metric.score(query, self.centroid(c as u32))))
            .collect();
        metric.sort(&mut ranked);
        let cost = CostCounters {
            vectors_scored: self.nlist as u64,
            ..CostCounters::default()
        };
        Ok((ranked, cost))
    }

    /// Nearest-list prefix covering at least `min_docs` documents.
    ///
    /// The prefix is minimal: dropping its last list would leave fewer than
    /// `min_docs` covered. Errors if the whole index holds fewer.
    pub fn probe_plan(&self, query: &[T], min_docs: usize) -> Result<ProbePlan> {
        if min_docs == 0 {
            return Err(Error::invalid("probe plan needs min_docs >= 1"));
        }
        if min_docs > self.ds.len() {
            return Err(Error::invalid(format!(
                "min_docs={min_docs} exceeds dataset size {}",
                self.ds.len()
            )));
        }
        let (ranked, cost) = self.rank_lists(query)?;
        let mut lists = Vec::new();
        let mut covered = 0usize;
        for entry in &ranked {
            lists.push(entry.id as u32);
            covered += self.lists[entry.id as usize].len();
            if covered >= min_docs {
                break;
            }
        }
        Ok(ProbePlan {
            lists,
            covered_docs: covered,
            cost,
        })
    }

    /// Document-level pool: every doc in the covering list prefix, in list
    /// order then ascending id, each entry routed to its source list.
    ///
    /// Entries are unscored (score zero): enumeration only routes; scoring
    /// happens when a lane scans its lists or rescores its slice. The cost
    /// is the centroid ranking only.
    pub fn enumerate_pool(
        &self,
        query: &[T],
        k_pool: usize,
    ) -> Result<(CandidatePool<T>, CostCounters)> {
        let plan = self.probe_plan(query, k_pool)?;
        let mut entries = Vec::with_capacity(plan.covered_docs);
        let mut routes = Vec::with_capacity(plan.covered_docs);
        for &list in &plan.lists {
            for &id in &self.lists[list as usize] {
                entries.push(ScoredId::new(id as u64, T::zero()));
                routes.push(list);
            }
        }
        Ok((CandidatePool::with_routes(entries, routes)?, plan.cost))
    }
}

/// Train an IVF-Flat index: seeded sampling k-means, then assign all.
///
/// Deterministic for a fixed seed. `train_sample_size` is clamped to `N`;
/// after clamping it must still be at least `nlist` so every centroid can
/// start from its own sample point (D^2-weighted seeding). Empty clusters
/// are repaired each iteration by splitting the largest cluster at its
/// farthest member.
pub fn ivf_build<T: Scalar>(
    ds: Arc<Dataset<T>>,
    nlist: usize,
    train_sample_size: usize,
    seed: u64,
) -> Result<IvfFlatIndex<T>> {
    let n = ds.len();
    if n == 0 {
        return Err(Error::data("cannot build an index over an empty dataset"));
    }
    if nlist == 0 {
        return Err(Error::invalid("nlist must be >= 1"));
    }
    if nlist > n {
        return Err(Error::invalid(format!(
            "nlist={nlist} exceeds dataset size {n}"
        )));
    }
    let sample_size = train_sample_size.min(n);
    if sample_size < nlist {
        return Err(Error::invalid(format!(
            "train_sample_size={sample_size} (after clamping to N) is below nlist={nlist}"
        )));
    }

    // Seeded sample without replacement: partial Fisher-Yates over [0, N).
    let mut rng = SplitMix64::new(seed);
    let mut pool_idx: Vec<u32> = (0..n as u32).collect();
    for i in 0..sample_size {
        let j = i as u64 + rng.next_below((n - i) as u64);
        pool_idx.swap(i, j as usize);
    }
    let sample: Vec<u32> = pool_idx[..sample_size].to_vec();

    let d = ds.dim();
    let metric = ds.metric();

    // D^2-weighted seeding over the sample: the first center is the first
    // sampled point, each further center is drawn with probability
    // proportional to squared distance from the nearest chosen center.
    // Far-apart blobs then get one center each instead of sharing.
    let mut centroids: Vec<T> = Vec::with_capacity(nlist * d);
    centroids.extend_from_slice(ds.vector(sample[0] as usize));
    let mut best_d2: Vec<f64> = sample
        .iter()
        .map(|&s| crate::scalar::l2_sq(ds.vector(s as usize), &centroids[..d]).to_f64_lossy())
        .collect();
    for _ in 1..nlist {
        let total: f64 = best_d2.iter().sum();
        let chosen_pos = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut pos = 0usize;
            for (i, &w) in best_d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pos = i;
                    break;
                }
                pos = i;
            }
            pos
        } else {
            // All residuals zero (duplicate-heavy data): fall back to the
            // next unused sample position for distinctness.
            (centroids.len() / d).min(sample_size - 1)
        };
        let new_center = ds.vector(sample[chosen_pos] as usize).to_vec();
        for (i, &s) in sample.iter().enumerate() {
            let d2 = crate::scalar::l2_sq(ds.vector(s as usize), &new_center).to_f64_lossy();
            if d2 < best_d2[i] {
                best_d2[i] = d2;
            }
        }
        centroids.extend_from_slice(&new_center);
    }

    fn centroid_of<T>(centroids: &[T], c: usize, d: usize) -> &[T] {
        &centroids[c * d..(c + 1) * d]
    }
    let assign_one = |centroids: &[T], v: &[T]| -> usize {
        let mut best = 0usize;
        let mut best_score = metric.score(v, centroid_of(centroids, 0, d));
        for c in 1..nlist {
            let score = metric.score(v, centroid_of(centroids, c, d));
            let better = match metric {
                Metric::L2 => score < best_score,
                Metric::InnerProduct => score > best_score,
            };
            if better {
                best = c;
                best_score = score;
            }
        }
        best
    };

    let mut assignment: Vec<usize> = vec![usize::MAX; sample_size];
    for _iter in 0..KMEANS_MAX_ITERS {
        let new_assignment: Vec<usize> = sample
            .par_iter()
            .map(|&s| assign_one(&centroids, ds.vector(s as usize)))
            .collect();
        let changed = new_assignment != assignment;
        assignment = new_assignment;

        // Recompute means in f64 for stability; deterministic sequential sum.
        let mut sums = vec![0.0f64; nlist * d];
        let mut counts = vec![0usize; nlist];
        for (pos, &s) in sample.iter().enumerate() {
            let c = assignment[pos];
            counts[c] += 1;
            for (j, &x) in ds.vector(s as usize).iter().enumerate() {
                sums[c * d + j] += x.to_f64_lossy();
            }
        }
        for c in 0..nlist {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[c * d + j] = T::from_f64_lossy(sums[c * d + j] / counts[c] as f64);
                }
            }
        }

        // Repair empty clusters: seed each from the farthest member of the
        // currently largest cluster (ties: larger cluster first, then lower
        // index; farthest member by distance then lower id).
        let mut repaired = false;
        for c in 0..nlist {
            if counts[c] > 0 {
                continue;
            }
            let largest = (0..nlist)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("nlist >= 1");
            if counts[largest] <= 1 {
                break;
            }
            let mut far_pos = None;
            let mut far_dist = f64::NEG_INFINITY;
            for (pos, &s) in sample.iter().enumerate() {
                if assignment[pos] != largest {
                    continue;
                }
                let dist = crate::scalar::l2_sq(ds.vector(s as usize), centroid_of(&centroids, largest, d))
                    .to_f64_lossy();
                if dist > far_dist {
                    far_dist = dist;
                    far_pos = Some(pos);
                }
            }
            let pos = far_pos.expect("largest cluster has members");
            let member = sample[pos] as usize;
            centroids[c * d..(c + 1) * d].copy_from_slice(ds.vector(member));
            assignment[pos] = c;
            counts[largest] -= 1;
            counts[c] += 1;
            repaired = true;
        }

        if !changed && !repaired {
            break;
        }
    }

    // Final pass: assign every dataset vector to its best centroid.
    let full_assignment: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| assign_one(&centroids, ds.vector(i)))
        .collect();
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); nlist];
    for (id, &c) in full_assignment.iter().enumerate() {
        lists[c].push(id as u32);
    }

    Ok(IvfFlatIndex {
        ds,
        nlist,
        train_sample_size: sample_size,
        rng_seed: seed,
        centroids,
        lists,
    })
}

/// Scan exactly the given lists and return the top-k among their members.
///
/// `probe_lists` is treated as a set: nonempty, in-range, no duplicates.
/// Counters report `list_scans = |probe_lists|` and `vectors_scored` equal to
/// the summed list sizes — no centroid-ranking cost, because routing was the
/// caller's. Fewer than `k` results are returned only when the lists hold
/// fewer documents.
pub fn ivf_search_lists<T: Scalar>(
    idx: &IvfFlatIndex<T>,
    query: &[T],
    probe_lists: &[u32],
    k: usize,
) -> Result<(Vec<ScoredId<T>>, CostCounters)> {
    idx.ds.check_query(query)?;
    if probe_lists.is_empty() {
        return Err(Error::invalid("probe_lists must be nonempty"));
    }
    let mut seen = vec![false; idx.nlist];
    for &list in probe_lists {
        let slot = seen
            .get_mut(list as usize)
            .ok_or_else(|| Error::invalid(format!("unknown list id {list} (nlist={})", idx.nlist)))?;
        if std::mem::replace(slot, true) {
            return Err(Error::invalid(format!("duplicate probe list {list}")));
        }
    }

    let metric = idx.ds.metric();
    let mut scored: Vec<ScoredId<T>> = Vec::new();
    let mut vectors_scored = 0u64;
    for &list in probe_lists {
        for &id in &idx.lists[list as usize] {
            scored.push(ScoredId::new(
                id as u64,
                metric.score(query, idx.ds.vector(id as usize)),
            ));
            vectors_scored += 1;
        }
    }
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, |a, b| metric.rank_cmp(a, b));
    }
    scored.truncate(k);
    metric.sort(&mut scored);

    let cost = CostCounters {
        list_scans: probe_lists.len() as u64,
        vectors_scored,
        ..CostCounters::default()
    };
    Ok((scored, cost))
}
