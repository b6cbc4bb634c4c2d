//! Desk-scale search backends: exact brute force, HNSW-lite, and IVF-Flat.
//!
//! All three expose the two entry points the lane harness needs — pool
//! enumeration (`K_pool` candidates per query) and budgeted search — behind
//! [`IndexHandle`]. Results are totally ordered: score under the metric, ties
//! broken by ascending id, so repeated invocation is byte-identical.

mod hnsw;
mod ivf;
mod persist;

pub use hnsw::{hnsw_build, hnsw_search, hnsw_search_layer0_from, HnswLiteIndex};
pub use ivf::{ivf_build, ivf_search_lists, IvfFlatIndex, ProbePlan};
pub use persist::{load_index, save_index};

use std::cmp::Ordering;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::outcome::{CostCounters, ScoredId};
use crate::pool::CandidatePool;
use crate::scalar::{dot, l2_sq, Scalar};

/// Scoring metric for a dataset.
///
/// `L2` scores are squared Euclidean distances (ascending is better);
/// `InnerProduct` scores are dot products (descending is better). Squared L2
/// preserves the L2 ranking and skips the square root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    L2,
    InnerProduct,
}

impl Metric {
    /// Stable one-byte tag for persisted headers.
    pub fn tag(self) -> u8 {
        match self {
            Metric::L2 => 0,
            Metric::InnerProduct => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Metric::L2),
            1 => Ok(Metric::InnerProduct),
            other => Err(Error::data(format!("unknown metric tag {other}"))),
        }
    }

    /// Score a query/document pair. Higher-is-better depends on the variant;
    /// use [`Metric::rank_cmp`] to order results.
    #[inline]
    pub fn score<T: Scalar>(self, a: &[T], b: &[T]) -> T {
        match self {
            Metric::L2 => l2_sq(a, b),
            Metric::InnerProduct => dot(a, b),
        }
    }

    /// Total order over scored candidates: better score first, ties broken
    /// by ascending id.
    ///
    /// Scores originate from finite vectors, so `partial_cmp` cannot observe
    /// NaN; the expect documents that assumption.
    #[inline]
    pub fn rank_cmp<T: Scalar>(self, a: &ScoredId<T>, b: &ScoredId<T>) -> Ordering {
        let by_score = match self {
            Metric::L2 => a.score.partial_cmp(&b.score),
            Metric::InnerProduct => b.score.partial_cmp(&a.score),
        }
        .expect("scores of finite vectors are comparable");
        by_score.then(a.id.cmp(&b.id))
    }

    /// Sort candidates into final rank order.
    pub fn sort<T: Scalar>(self, items: &mut [ScoredId<T>]) {
        items.sort_unstable_by(|a, b| self.rank_cmp(a, b));
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::InnerProduct => "ip",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" | "L2" => Ok(Metric::L2),
            "ip" | "IP" | "inner_product" => Ok(Metric::InnerProduct),
            other => Err(Error::invalid(format!(
                "unknown metric '{other}' (expected 'l2' or 'ip')"
            ))),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Metric::from_str(&text).map_err(serde::de::Error::custom)
    }
}

/// Immutable `N x d` vector collection with implicit ids `[0, N)`.
///
/// Construction validates that every component is finite and, for inner
/// product, that vectors are unit-normalized to `1e-4` (so IP behaves as
/// cosine and the metric's ranking semantics stay meaningful).
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    data: Vec<T>,
    dim: usize,
    metric: Metric,
}

impl<T: Scalar> Dataset<T> {
    /// Build from a flat row-major buffer of `N * dim` components.
    pub fn new(data: Vec<T>, dim: usize, metric: Metric) -> Result<Self> {
        if dim == 0 {
            return Err(Error::data("dimension must be >= 1"));
        }
        if data.len() % dim != 0 {
            return Err(Error::data(format!(
                "flat buffer of {} components is not a multiple of dim {dim}",
                data.len()
            )));
        }
        let ds = Dataset { data, dim, metric };
        for i in 0..ds.len() {
            let v = ds.vector(i);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::data(format!("vector {i} has a non-finite component")));
            }
            if metric == Metric::InnerProduct {
                let norm_sq = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
                let norm = norm_sq.to_f64_lossy().sqrt();
                if (norm - 1.0).abs() > 1e-4 {
                    return Err(Error::data(format!(
                        "inner-product dataset requires unit vectors; vector {i} has norm {norm}"
                    )));
                }
            }
        }
        Ok(ds)
    }

    /// Build from per-row vectors of equal length.
    pub fn from_rows(rows: Vec<Vec<T>>, metric: Metric) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::data("rows have inconsistent dimensions"));
        }
        Dataset::new(rows.into_iter().flatten().collect(), dim, metric)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Row `i`; panics if out of bounds (callers index from validated ids).
    #[inline]
    pub fn vector(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat row-major component buffer.
    pub fn raw(&self) -> &[T] {
        &self.data
    }

    /// Check a query's dimensionality against the dataset.
    pub fn check_query(&self, query: &[T]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::data(format!(
                "query dimension {} does not match dataset dimension {}",
                query.len(),
                self.dim
            )));
        }
        if query.iter().any(|x| !x.is_finite()) {
            return Err(Error::data("query has a non-finite component"));
        }
        Ok(())
    }

    /// SHA-256 over (dim, N, metric tag, little-endian components).
    ///
    /// Persisted index files store this so an index can never be loaded
    /// against a different dataset than it was built from.
    pub fn checksum(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.dim as u32).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        h.update([self.metric.tag(), T::DTYPE]);
        let mut buf = Vec::with_capacity(self.data.len() * T::WIDTH);
        for &x in &self.data {
            x.write_le(&mut buf).expect("vec write cannot fail");
        }
        h.update(&buf);
        h.finalize().into()
    }
}

/// Exact top-k by exhaustive scan; the ground-truth oracle.
///
/// Scores every vector, selects the k best under the metric with ties broken
/// by ascending id. `k` must not exceed `N`.
pub fn brute_force_topk<T: Scalar>(
    ds: &Dataset<T>,
    query: &[T],
    k: usize,
) -> Result<Vec<ScoredId<T>>> {
    ds.check_query(query)?;
    if k > ds.len() {
        return Err(Error::invalid(format!(
            "k={k} exceeds dataset size {}",
            ds.len()
        )));
    }
    let metric = ds.metric();
    let mut scored: Vec<ScoredId<T>> = (0..ds.len())
        .map(|i| ScoredId::new(i as u64, metric.score(query, ds.vector(i))))
        .collect();
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, |a, b| metric.rank_cmp(a, b));
    }
    scored.truncate(k);
    metric.sort(&mut scored);
    Ok(scored)
}

/// Search budget for [`IndexHandle::search_budgeted`].
///
/// Exactly one variant applies per call, and it must match the index family:
/// beam width for HNSW, an explicit list set for IVF, plain `k` for brute
/// force.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchBudget {
    EfSearch(u32),
    ProbeLists(Vec<u32>),
    K(u32),
}

/// Index family discriminant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexFamily {
    BruteForce,
    HnswLite,
    IvfFlat,
}

impl std::fmt::Display for IndexFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IndexFamily::BruteForce => "brute",
            IndexFamily::HnswLite => "hnsw",
            IndexFamily::IvfFlat => "ivf",
        })
    }
}

/// Exhaustive-scan "index": no structure, exact answers.
///
/// Useful as the oracle backend in experiments and as the degenerate case of
/// the pool/search contract.
#[derive(Clone, Debug)]
pub struct BruteForceIndex<T> {
    ds: Arc<Dataset<T>>,
}

impl<T: Scalar> BruteForceIndex<T> {
    pub fn new(ds: Arc<Dataset<T>>) -> Self {
        BruteForceIndex { ds }
    }

    pub fn dataset(&self) -> &Arc<Dataset<T>> {
        &self.ds
    }

    /// Exact top-k plus the full-scan cost.
    pub fn search(&self, query: &[T], k: usize) -> Result<(Vec<ScoredId<T>>, CostCounters)> {
        let top = brute_force_topk(&self.ds, query, k)?;
        let cost = CostCounters {
            vectors_scored: self.ds.len() as u64,
            ..CostCounters::default()
        };
        Ok((top, cost))
    }
}

/// One of the three search backends, sharing the pool/search interface.
#[derive(Clone, Debug)]
pub enum IndexHandle<T> {
    BruteForce(BruteForceIndex<T>),
    HnswLite(HnswLiteIndex<T>),
    IvfFlat(IvfFlatIndex<T>),
}

impl<T: Scalar> IndexHandle<T> {
    pub fn family(&self) -> IndexFamily {
        match self {
            IndexHandle::BruteForce(_) => IndexFamily::BruteForce,
            IndexHandle::HnswLite(_) => IndexFamily::HnswLite,
            IndexHandle::IvfFlat(_) => IndexFamily::IvfFlat,
        }
    }

    pub fn dataset(&self) -> &Arc<Dataset<T>> {
        match self {
            IndexHandle::BruteForce(i) => i.dataset(),
            IndexHandle::HnswLite(i) => i.dataset(),
            IndexHandle::IvfFlat(i) => i.dataset(),
        }
    }

    /// Enumerate the per-query candidate pool of (at least) `k_pool` docs.
    ///
    /// - brute force: exact top-`k_pool` (pool length exactly `k_pool`);
    /// - HNSW: one search with `ef_search = k_pool` — by construction the
    ///   same call, hence the same cost, as a single-index search with that
    ///   total budget;
    /// - IVF: nearest coarse lists in centroid order until `k_pool` docs are
    ///   covered; the pool is every covered doc (possibly more than
    ///   `k_pool`), each carrying its source list for routing.
    pub fn enumerate_pool(
        &self,
        query: &[T],
        k_pool: usize,
    ) -> Result<(CandidatePool<T>, CostCounters)> {
        if k_pool == 0 {
            return Err(Error::invalid("K_pool must be >= 1"));
        }
        if k_pool > self.dataset().len() {
            return Err(Error::invalid(format!(
                "K_pool={k_pool} exceeds dataset size {}",
                self.dataset().len()
            )));
        }
        match self {
            IndexHandle::BruteForce(idx) => {
                let (top, cost) = idx.search(query, k_pool)?;
                Ok((CandidatePool::new(top)?, cost))
            }
            IndexHandle::HnswLite(idx) => {
                let (top, cost) = hnsw_search(idx, query, k_pool, k_pool)?;
                if top.len() < k_pool {
                    return Err(Error::PoolTooSmall {
                        required: k_pool,
                        actual: top.len(),
                    });
                }
                Ok((CandidatePool::new(top)?, cost))
            }
            IndexHandle::IvfFlat(idx) => idx.enumerate_pool(query, k_pool),
        }
    }

    /// Budgeted search with an explicit [`SearchBudget`].
    ///
    /// The budget variant must match the index family; a mismatch is an
    /// error rather than a silent reinterpretation.
    pub fn search_budgeted(
        &self,
        query: &[T],
        budget: &SearchBudget,
        k: usize,
    ) -> Result<(Vec<ScoredId<T>>, CostCounters)> {
        match (self, budget) {
            (IndexHandle::BruteForce(idx), SearchBudget::K(bk)) => {
                idx.search(query, (*bk as usize).max(k))
            }
            (IndexHandle::HnswLite(idx), SearchBudget::EfSearch(ef)) => {
                hnsw_search(idx, query, *ef as usize, k)
            }
            (IndexHandle::IvfFlat(idx), SearchBudget::ProbeLists(lists)) => {
                ivf_search_lists(idx, query, lists, k)
            }
            (idx, budget) => Err(Error::invalid(format!(
                "budget {budget:?} does not apply to a {} index",
                idx.family()
            ))),
        }
    }
}
