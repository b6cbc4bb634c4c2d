//! HNSW-lite: layered small-world graph with greedy descent and beam search.
//!
//! Deliberately minimal: geometric level assignment, plain closest-neighbor
//! selection (no pruning heuristic), sequential deterministic build. The
//! point of this index is to reproduce the convergent-traversal behaviour of
//! production HNSW at desk scale, not to compete on index quality.
//!
//! Plain closest selection has one sharp edge: on strongly clustered data
//! the long cross-cluster edges are exactly the ones pruning discards, which
//! can strand whole components. A deterministic post-build repair pass
//! therefore bridges every stranded component back to the entry point's
//! component at every level, keeping degree caps intact.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::index::{Dataset, Metric};
use crate::outcome::{CostCounters, ScoredId};
use crate::prf::SplitMix64;
use crate::scalar::Scalar;

/// Hard cap on assigned levels; the geometric tail beyond this is
/// astronomically unlikely at desk scale and a cap bounds memory.
const MAX_LEVEL_CAP: usize = 24;

/// Bound on repair sweeps per level. Each sweep pins its bridges against
/// eviction, so convergence is nearly always immediate; the bound exists to
/// turn a pathological dataset into an error instead of a hang.
const MAX_REPAIR_ROUNDS: usize = 16;

/// Beam/heap entry ordered by (rank key ascending, id ascending).
///
/// The rank key folds the metric direction into "smaller is better": L2
/// distance as-is, inner product negated. Scores come from finite vectors,
/// so the unwrap in `cmp` cannot observe NaN.
#[derive(Clone, Copy, Debug)]
struct Cand<T> {
    key: T,
    id: u32,
}

impl<T: Scalar> PartialEq for Cand<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.id == other.id
    }
}

impl<T: Scalar> Eq for Cand<T> {}

impl<T: Scalar> PartialOrd for Cand<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Cand<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .partial_cmp(&other.key)
            .expect("finite rank keys are comparable")
            .then(self.id.cmp(&other.id))
    }
}

#[inline]
/// Squared L2 distance between a vector and an f64 centroid.
fn dist_to_centroid<T: Scalar>(v: &[T], centroid: &[f64]) -> f64 {
    v.iter()
        .zip(centroid)
        .map(|(&x, &c)| {
            let d = x.to_f64_lossy() - c;
            d * d
        })
        .sum()
}

fn rank_key<T: Scalar>(metric: Metric, score: T) -> T {
    match metric {
        Metric::L2 => score,
        Metric::InnerProduct => -score,
    }
}

#[inline]
fn key_to_score<T: Scalar>(metric: Metric, key: T) -> T {
    // Negation is exact, so this inverts rank_key bit-for-bit.
    match metric {
        Metric::L2 => key,
        Metric::InnerProduct => -key,
    }
}

/// Layered navigable-small-world graph over a dataset.
///
/// Adjacency is node-major: `links[node][level]` lists out-neighbors, with
/// levels `0..=node_level`. Edges are directed; reciprocal links are added at
/// insert time and pruned back to the degree cap by plain closest selection.
#[derive(Clone, Debug)]
pub struct HnswLiteIndex<T> {
    ds: Arc<Dataset<T>>,
    graph_degree: usize,
    ef_construction: usize,
    rng_seed: u64,
    entry_point: u32,
    max_level: usize,
    links: Vec<Vec<Vec<u32>>>,
}

impl<T: Scalar> HnswLiteIndex<T> {
    pub fn dataset(&self) -> &Arc<Dataset<T>> {
        &self.ds
    }

    pub fn graph_degree(&self) -> usize {
        self.graph_degree
    }

    pub fn ef_construction(&self) -> usize {
        self.ef_construction
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn entry_point(&self) -> u32 {
        self.entry_point
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Highest level node `i` participates in.
    pub fn node_level(&self, i: u32) -> usize {
        self.links[i as usize].len() - 1
    }

    /// Out-neighbors of `i` at `level` (empty if the node is below it).
    pub fn neighbors(&self, i: u32, level: usize) -> &[u32] {
        self.links[i as usize]
            .get(level)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Reassemble from persisted parts, re-checking structural invariants.
    pub(crate) fn from_parts(
        ds: Arc<Dataset<T>>,
        graph_degree: usize,
        ef_construction: usize,
        rng_seed: u64,
        entry_point: u32,
        max_level: usize,
        links: Vec<Vec<Vec<u32>>>,
    ) -> Result<Self> {
        if links.len() != ds.len() || links.is_empty() {
            return Err(Error::data("adjacency node count does not match dataset"));
        }
        if entry_point as usize >= links.len() {
            return Err(Error::data("entry point out of range"));
        }
        let n = links.len() as u32;
        for per_node in &links {
            if per_node.is_empty() {
                return Err(Error::data("node with no levels"));
            }
            for level in per_node {
                if level.iter().any(|&nb| nb >= n) {
                    return Err(Error::data("neighbor id out of range"));
                }
            }
        }
        Ok(HnswLiteIndex {
            ds,
            graph_degree,
            ef_construction,
            rng_seed,
            entry_point,
            max_level,
            links,
        })
    }

    fn degree_cap(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.graph_degree
        } else {
            self.graph_degree
        }
    }

    #[inline]
    fn key_of(&self, query: &[T], id: u32, visits: &mut u64) -> T {
        *visits += 1;
        rank_key(
            self.ds.metric(),
            self.ds.metric().score(query, self.ds.vector(id as usize)),
        )
    }

    /// Greedy walk at one level: repeatedly move to the best-scoring
    /// neighbor until no neighbor improves on the current node.
    fn greedy_at_level(
        &self,
        query: &[T],
        start: u32,
        start_key: T,
        level: usize,
        visits: &mut u64,
    ) -> (u32, T) {
        let mut cur = start;
        let mut cur_key = start_key;
        loop {
            let mut best = cur;
            let mut best_key = cur_key;
            for &nb in self.neighbors(cur, level) {
                let key = self.key_of(query, nb, visits);
                if key < best_key || (key == best_key && nb < best) {
                    best = nb;
                    best_key = key;
                }
            }
            if best == cur {
                return (cur, cur_key);
            }
            cur = best;
            cur_key = best_key;
        }
    }

    /// Beam search at one level from the given entries.
    ///
    /// Returns up to `ef` candidates sorted by (key, id) ascending. Every
    /// distance evaluation increments `visits`.
    fn search_layer(
        &self,
        query: &[T],
        entries: &[(u32, T)],
        ef: usize,
        level: usize,
        visits: &mut u64,
    ) -> Vec<Cand<T>> {
        let mut visited = vec![false; self.len()];
        // Min-heap on (key, id) via Reverse; results is a max-heap capped at
        // ef whose top is the current worst kept candidate.
        let mut frontier: BinaryHeap<std::cmp::Reverse<Cand<T>>> = BinaryHeap::new();
        let mut results: BinaryHeap<Cand<T>> = BinaryHeap::new();
        for &(id, key) in entries {
            if std::mem::replace(&mut visited[id as usize], true) {
                continue;
            }
            let c = Cand { key, id };
            frontier.push(std::cmp::Reverse(c));
            results.push(c);
            if results.len() > ef {
                results.pop();
            }
        }
        while let Some(std::cmp::Reverse(c)) = frontier.pop() {
            if results.len() == ef {
                let worst = results.peek().expect("results nonempty").key;
                if c.key > worst {
                    break;
                }
            }
            for &nb in self.neighbors(c.id, level) {
                if std::mem::replace(&mut visited[nb as usize], true) {
                    continue;
                }
                let key = self.key_of(query, nb, visits);
                let admit = results.len() < ef
                    || key < results.peek().expect("results nonempty").key;
                if admit {
                    let cand = Cand { key, id: nb };
                    frontier.push(std::cmp::Reverse(cand));
                    results.push(cand);
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out = results.into_vec();
        out.sort_unstable();
        out
    }

    /// Prune `node`'s links at `level` back to the cap by closest selection.
    fn prune(&mut self, node: u32, level: usize) {
        let cap = self.degree_cap(level);
        if self.links[node as usize][level].len() <= cap {
            return;
        }
        let base = self.ds.vector(node as usize).to_vec();
        let metric = self.ds.metric();
        let mut scored: Vec<Cand<T>> = self.links[node as usize][level]
            .iter()
            .map(|&nb| Cand {
                key: rank_key(metric, metric.score(&base, self.ds.vector(nb as usize))),
                id: nb,
            })
            .collect();
        scored.sort_unstable();
        scored.truncate(cap);
        self.links[node as usize][level] = scored.into_iter().map(|c| c.id).collect();
    }

    /// Mark everything reachable from `start` at `level` via out-edges.
    ///
    /// Respects `reached` entries that are already set, so it doubles as an
    /// incremental flood fill when a bridge attaches a new component.
    fn flood(&self, start: u32, level: usize, reached: &mut [bool]) {
        if reached[start as usize] {
            return;
        }
        reached[start as usize] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &nb in self.neighbors(v, level) {
                if !reached[nb as usize] {
                    reached[nb as usize] = true;
                    queue.push_back(nb);
                }
            }
        }
    }

    /// Insert a directed edge `from -> to` at `level`, evicting the farthest
    /// unprotected neighbor if the degree cap would overflow. The new edge is
    /// recorded in `protected` so later evictions cannot undo a bridge.
    fn add_bridge_edge(
        &mut self,
        from: u32,
        to: u32,
        level: usize,
        protected: &mut HashSet<(u32, u32)>,
    ) {
        protected.insert((from, to));
        if self.links[from as usize][level].contains(&to) {
            return;
        }
        self.links[from as usize][level].push(to);
        let cap = self.degree_cap(level);
        if self.links[from as usize][level].len() <= cap {
            return;
        }
        let base = self.ds.vector(from as usize).to_vec();
        let metric = self.ds.metric();
        // Farthest edge by rank key, larger id breaking ties, skipping
        // protected bridges. With cap >= 2 at every level there is always at
        // least one unprotected candidate in practice; if every edge is a
        // bridge we drop the farthest bridge other than the new one and rely
        // on the outer verification pass to restore anything that severed.
        let pick = |allow_protected: bool, links: &[u32], protected: &HashSet<(u32, u32)>| {
            let mut worst: Option<(T, u32, usize)> = None;
            for (pos, &nb) in links.iter().enumerate() {
                if nb == to || (!allow_protected && protected.contains(&(from, nb))) {
                    continue;
                }
                let key = rank_key(metric, metric.score(&base, self.ds.vector(nb as usize)));
                let better = match worst {
                    None => true,
                    Some((wk, wn, _)) => key > wk || (key == wk && nb > wn),
                };
                if better {
                    worst = Some((key, nb, pos));
                }
            }
            worst.map(|(_, _, pos)| pos)
        };
        let links = self.links[from as usize][level].clone();
        let victim = pick(false, &links, protected).or_else(|| pick(true, &links, protected));
        if let Some(pos) = victim {
            let evicted = self.links[from as usize][level].remove(pos);
            protected.remove(&(from, evicted));
        }
    }

    /// Mean of the reached nodes' vectors, accumulated in f64.
    fn reached_centroid(&self, present: &[u32], reached: &[bool]) -> Vec<f64> {
        let d = self.ds.dim();
        let mut acc = vec![0.0f64; d];
        let mut count = 0usize;
        for &w in present {
            if !reached[w as usize] {
                continue;
            }
            for (a, &x) in acc.iter_mut().zip(self.ds.vector(w as usize)) {
                *a += x.to_f64_lossy();
            }
            count += 1;
        }
        if count > 0 {
            for a in &mut acc {
                *a /= count as f64;
            }
        }
        acc
    }

    /// Flood from the entry point and bridge every stranded component until
    /// the whole level is reachable.
    ///
    /// Each stranded component is attached through a gateway node facing the
    /// reached mass, linked in both directions to its `graph_degree` nearest
    /// reached nodes. A single edge pair would restore reachability, but a
    /// beam that enters through one edge spreads poorly; a degree-wide
    /// junction behaves like an ordinary neighborhood. Evictions forced by
    /// degree caps never remove a protected edge (except in the degenerate
    /// all-protected case, which the outer loop then re-repairs), and all
    /// ties break on id, so the result is deterministic.
    fn ensure_reachable(
        &mut self,
        level: usize,
        present: &[u32],
        protected: &mut HashSet<(u32, u32)>,
    ) -> Result<()> {
        let n = self.len();
        let metric = self.ds.metric();
        let mut rounds = 0usize;
        loop {
            let mut reached = vec![false; n];
            self.flood(self.entry_point, level, &mut reached);
            let mut stranded: Vec<u32> = present
                .iter()
                .copied()
                .filter(|&i| !reached[i as usize])
                .collect();
            if stranded.is_empty() {
                return Ok(());
            }
            rounds += 1;
            if rounds > MAX_REPAIR_ROUNDS {
                return Err(Error::data(format!(
                    "connectivity repair did not converge at level {level}"
                )));
            }
            while !stranded.is_empty() {
                // Gateway: the stranded node facing the reached mass, so the
                // junction sits where the regions are closest. Plain squared
                // distance to the reached centroid is a geometric heuristic
                // only; correctness never depends on it.
                let centroid = self.reached_centroid(present, &reached);
                let u = *stranded
                    .iter()
                    .min_by(|&&a, &&b| {
                        let da = dist_to_centroid(self.ds.vector(a as usize), &centroid);
                        let db = dist_to_centroid(self.ds.vector(b as usize), &centroid);
                        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                    })
                    .expect("stranded set is non-empty");
                let uv = self.ds.vector(u as usize).to_vec();
                let mut near: Vec<Cand<T>> = present
                    .iter()
                    .filter(|&&w| reached[w as usize])
                    .map(|&w| Cand {
                        key: rank_key(metric, metric.score(&uv, self.ds.vector(w as usize))),
                        id: w,
                    })
                    .collect();
                near.sort_unstable();
                near.truncate(self.graph_degree);
                for c in &near {
                    self.add_bridge_edge(c.id, u, level, protected);
                    self.add_bridge_edge(u, c.id, level, protected);
                }
                self.flood(u, level, &mut reached);
                stranded.retain(|&i| !reached[i as usize]);
            }
        }
    }

    /// Trim each list at `level` to its closest `trim_to` edges, then fill
    /// the freed capacity with reverse edges in global closeness order.
    ///
    /// Closest selection makes the graph strongly directed on clustered
    /// data: a fringe node points into the dense core, but the core's capped
    /// lists have no room to point back, so a beam that floods the core can
    /// still never step outward to the fringe, no matter the beam width.
    /// Reserving a slice of each list for the closest missing reverse edges
    /// makes every edge's source discoverable from its target's side. Both
    /// phases use plain closest selection and id tie-breaks only.
    fn symmetrize(&mut self, level: usize, trim_to: usize) {
        let metric = self.ds.metric();
        let cap = self.degree_cap(level);
        for i in 0..self.len() {
            if self.links[i].len() <= level || self.links[i][level].len() <= trim_to {
                continue;
            }
            let base = self.ds.vector(i).to_vec();
            let mut scored: Vec<Cand<T>> = self.links[i][level]
                .iter()
                .map(|&nb| Cand {
                    key: rank_key(metric, metric.score(&base, self.ds.vector(nb as usize))),
                    id: nb,
                })
                .collect();
            scored.sort_unstable();
            scored.truncate(trim_to);
            self.links[i][level] = scored.into_iter().map(|c| c.id).collect();
        }
        // Missing reverse edges, closest first so the most local ones win
        // the remaining slots.
        let mut missing: Vec<(Cand<T>, u32)> = Vec::new();
        for i in 0..self.len() as u32 {
            if self.node_level(i) < level {
                continue;
            }
            let base = self.ds.vector(i as usize).to_vec();
            for &j in self.neighbors(i, level) {
                if !self.links[j as usize][level].contains(&i) {
                    let key = rank_key(metric, metric.score(&base, self.ds.vector(j as usize)));
                    missing.push((Cand { key, id: j }, i));
                }
            }
        }
        missing.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        for (cand, src) in missing {
            let list = &mut self.links[cand.id as usize][level];
            if list.len() < cap {
                list.push(src);
            }
        }
    }

    /// Restore reachability from the entry point at every level.
    ///
    /// Plain closest selection can orphan whole regions: once a tight cluster
    /// fills a node's neighbor list, the longer cross-cluster edges are
    /// pruned away and the graph fragments. This pass symmetrizes layer 0
    /// (where the beam runs) and then bridges every stranded component at
    /// every level.
    fn repair_connectivity(&mut self) -> Result<()> {
        let n = self.len();
        // Trim to 3/4 of the cap: enough slack for reverse edges to matter,
        // shallow enough that forward closest lists stay intact. Levels above
        // 1 hold a handful of nodes and are handled by bridging alone.
        self.symmetrize(0, 3 * self.degree_cap(0) / 4);
        if self.max_level >= 1 {
            self.symmetrize(1, 3 * self.degree_cap(1) / 4);
        }
        for level in (0..=self.max_level).rev() {
            let present: Vec<u32> = (0..n as u32)
                .filter(|&i| self.node_level(i) >= level)
                .collect();
            if present.len() <= 1 {
                continue;
            }
            let mut protected: HashSet<(u32, u32)> = HashSet::new();
            self.ensure_reachable(level, &present, &mut protected)?;
        }
        Ok(())
    }
}

/// Geometric level draw with scale `1/ln(graph_degree)`.
fn draw_level(rng: &mut SplitMix64, mult: f64) -> usize {
    let mut u = rng.next_f64();
    if u <= 0.0 {
        u = f64::MIN_POSITIVE;
    }
    (((-u.ln()) * mult).floor() as usize).min(MAX_LEVEL_CAP)
}

/// Build an HNSW-lite index by sequential insertion.
///
/// Deterministic for a fixed seed: level draws come from an internal
/// splitmix64 stream, insertion order is id order, and every selection step
/// is totally ordered. Requires a nonempty dataset and `graph_degree >= 2`
/// (the level scale divides by `ln(graph_degree)`).
pub fn hnsw_build<T: Scalar>(
    ds: Arc<Dataset<T>>,
    graph_degree: usize,
    ef_construction: usize,
    seed: u64,
) -> Result<HnswLiteIndex<T>> {
    if ds.is_empty() {
        return Err(Error::data("cannot build an index over an empty dataset"));
    }
    if graph_degree < 2 {
        return Err(Error::invalid("graph_degree must be >= 2"));
    }
    if ef_construction == 0 {
        return Err(Error::invalid("ef_construction must be >= 1"));
    }
    let mult = 1.0 / (graph_degree as f64).ln();
    let mut rng = SplitMix64::new(seed);
    let n = ds.len();

    let mut index = HnswLiteIndex {
        ds: ds.clone(),
        graph_degree,
        ef_construction,
        rng_seed: seed,
        entry_point: 0,
        max_level: 0,
        links: Vec::with_capacity(n),
    };

    for i in 0..n {
        let node_level = draw_level(&mut rng, mult);
        index.links.push(vec![Vec::new(); node_level + 1]);
        if i == 0 {
            index.entry_point = 0;
            index.max_level = node_level;
            continue;
        }

        let query = ds.vector(i).to_vec();
        let mut visits = 0u64; // build-time evaluations are not reported
        let mut cur = index.entry_point;
        let mut cur_key = index.key_of(&query, cur, &mut visits);

        // Descend levels above the new node's top level greedily.
        let top = index.max_level;
        for level in ((node_level + 1)..=top).rev() {
            (cur, cur_key) = index.greedy_at_level(&query, cur, cur_key, level, &mut visits);
        }

        // Connect at each level from min(node_level, max_level) down to 0,
        // taking the closest candidates up to the level's degree cap (twice
        // the fanout at layer 0, where the search beam runs).
        for level in (0..=node_level.min(top)).rev() {
            let found =
                index.search_layer(&query, &[(cur, cur_key)], ef_construction, level, &mut visits);
            let chosen: Vec<u32> = found
                .iter()
                .take(index.degree_cap(level))
                .map(|c| c.id)
                .collect();
            for &nb in &chosen {
                index.links[i][level].push(nb);
                index.links[nb as usize][level].push(i as u32);
                index.prune(nb, level);
            }
            if let Some(best) = found.first() {
                cur = best.id;
                cur_key = best.key;
            }
        }

        if node_level > index.max_level {
            index.max_level = node_level;
            index.entry_point = i as u32;
        }
    }
    index.repair_connectivity()?;
    Ok(index)
}

/// Budgeted HNSW search: greedy descent over upper layers, then a beam of
/// width `ef_search` at layer 0.
///
/// Returns the best `k` candidates (`k <= ef_search` required) with exact
/// scores, plus cost counters where `node_visits` counts every distance
/// evaluation performed, upper layers included.
pub fn hnsw_search<T: Scalar>(
    idx: &HnswLiteIndex<T>,
    query: &[T],
    ef_search: usize,
    k: usize,
) -> Result<(Vec<ScoredId<T>>, CostCounters)> {
    if idx.is_empty() {
        return Err(Error::data("search on an empty index"));
    }
    idx.ds.check_query(query)?;
    if ef_search == 0 {
        return Err(Error::invalid("ef_search must be >= 1"));
    }
    if k > ef_search {
        return Err(Error::invalid(format!(
            "k={k} must not exceed ef_search={ef_search}"
        )));
    }
    let mut visits = 0u64;
    let mut cur = idx.entry_point;
    let mut cur_key = idx.key_of(query, cur, &mut visits);
    for level in (1..=idx.max_level).rev() {
        (cur, cur_key) = idx.greedy_at_level(query, cur, cur_key, level, &mut visits);
    }
    let found = idx.search_layer(query, &[(cur, cur_key)], ef_search, 0, &mut visits);
    Ok(finish(idx, found, k, visits))
}

/// Layer-0 beam search from an explicit entry node, skipping the descent.
///
/// This is the "jittered entry" baseline: same budget, different starting
/// point, no change to the graph. `entry_id` must be a valid node id.
pub fn hnsw_search_layer0_from<T: Scalar>(
    idx: &HnswLiteIndex<T>,
    query: &[T],
    entry_id: u32,
    ef_search: usize,
    k: usize,
) -> Result<(Vec<ScoredId<T>>, CostCounters)> {
    if idx.is_empty() {
        return Err(Error::data("search on an empty index"));
    }
    idx.ds.check_query(query)?;
    if entry_id as usize >= idx.len() {
        return Err(Error::invalid(format!(
            "entry node {entry_id} out of range for {} nodes",
            idx.len()
        )));
    }
    if ef_search == 0 {
        return Err(Error::invalid("ef_search must be >= 1"));
    }
    if k > ef_search {
        return Err(Error::invalid(format!(
            "k={k} must not exceed ef_search={ef_search}"
        )));
    }
    let mut visits = 0u64;
    let entry_key = idx.key_of(query, entry_id, &mut visits);
    let found = idx.search_layer(query, &[(entry_id, entry_key)], ef_search, 0, &mut visits);
    Ok(finish(idx, found, k, visits))
}

fn finish<T: Scalar>(
    idx: &HnswLiteIndex<T>,
    found: Vec<Cand<T>>,
    k: usize,
    visits: u64,
) -> (Vec<ScoredId<T>>, CostCounters) {
    let metric = idx.ds.metric();
    let top: Vec<ScoredId<T>> = found
        .into_iter()
        .take(k)
        .map(|c| ScoredId::new(c.id as u64, key_to_score(metric, c.key)))
        .collect();
    let cost = CostCounters {
        node_visits: visits,
        ..CostCounters::default()
    };
    (top, cost)
}
