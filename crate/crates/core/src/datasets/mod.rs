//! Benchmark construction: synthetic clustered corpora, ground-truth
//! production, and on-disk benchmark bundles with checksummed caches.
//!
//! The desk-scale default ("mini-sift") is a Gaussian-mixture stand-in for
//! the classic descriptor benchmarks: large enough for lane experiments to
//! show their effects, small enough to regenerate in seconds. Real `.fvecs`
//! corpora load through the same [`Benchmark`] shape via [`vecio`].

pub mod vecio;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::index::{brute_force_topk, Dataset, Metric};
use crate::scalar::Scalar;

/// Cluster centers are drawn at this multiple of unit scale, so
/// `cluster_std` alone controls how much neighboring clusters bleed into
/// each other (and therefore how hard approximate search is).
const CENTER_SCALE: f64 = 10.0;

/// Query vectors perturb a random base vector by this fraction of
/// `cluster_std`, keeping the true neighbor nontrivial but well-defined.
const QUERY_NOISE_FRAC: f64 = 1.0;

/// Recipe for a synthetic clustered benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub n_clusters: usize,
    pub cluster_std: f64,
    pub seed: u64,
    pub metric: Metric,
    pub n_queries: usize,
    /// Ground-truth depth per query.
    pub depth: usize,
    /// Oracle top-`relevance_depth` ids become the query's relevant set.
    pub relevance_depth: usize,
}

impl SyntheticSpec {
    /// The desk-scale default benchmark: 50k x 32d, 64 clusters, 500
    /// queries, ground truth to depth 100.
    pub fn mini_sift(seed: u64) -> Self {
        SyntheticSpec {
            n: 50_000,
            d: 32,
            n_clusters: 64,
            cluster_std: 4.25,
            seed,
            metric: Metric::L2,
            n_queries: 500,
            depth: 100,
            relevance_depth: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.n < self.n_clusters {
            return Err(Error::invalid(format!(
                "need N >= n_clusters >= 1, got N={}, n_clusters={}",
                self.n, self.n_clusters
            )));
        }
        if !(self.cluster_std > 0.0) {
            return Err(Error::invalid("cluster_std must be > 0"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d must be >= 1"));
        }
        if self.n_queries == 0 {
            return Err(Error::invalid("n_queries must be >= 1"));
        }
        if self.depth == 0 || self.depth > self.n {
            return Err(Error::invalid(format!(
                "depth must be in [1, N], got {}",
                self.depth
            )));
        }
        if self.relevance_depth == 0 || self.relevance_depth > self.depth {
            return Err(Error::invalid(format!(
                "relevance_depth must be in [1, depth], got {}",
                self.relevance_depth
            )));
        }
        Ok(())
    }
}

/// A ready-to-run benchmark: base corpus, queries, oracle ground truth,
/// and per-query relevant sets.
#[derive(Clone, Debug)]
pub struct Benchmark<T> {
    pub base: Arc<Dataset<T>>,
    pub queries: Vec<Vec<T>>,
    /// Row `i` holds the oracle top-`depth` ids for query `i`, best first.
    pub ground_truth: Vec<Vec<u32>>,
    /// Per-query relevant ids (oracle head); never empty by construction.
    pub relevance: Vec<BTreeSet<u64>>,
}

impl<T: Scalar> Benchmark<T> {
    /// Ground-truth row `i` as `u64` ids, for the metrics functions.
    pub fn truth_ids(&self, i: usize) -> Vec<u64> {
        self.ground_truth[i].iter().map(|&id| id as u64).collect()
    }

    pub fn depth(&self) -> usize {
        self.ground_truth.first().map_or(0, |row| row.len())
    }
}

/// Scale `row` to unit L2 norm, in f64 for accuracy.
fn normalize_unit<T: Scalar>(row: &mut [T]) {
    let norm = row
        .iter()
        .map(|&x| {
            let v = x.to_f64_lossy();
            v * v
        })
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        for x in row.iter_mut() {
            *x = T::from_f64_lossy(x.to_f64_lossy() / norm);
        }
    }
}

/// Generate a synthetic clustered benchmark, deterministically.
///
/// Base vector `i` belongs to cluster `i % n_clusters` (balanced
/// clusters); queries perturb uniformly-drawn base vectors. All draws come
/// from one seeded ChaCha8 stream, so a fixed spec reproduces the exact
/// same benchmark bytes on any platform. Under `InnerProduct` every base
/// and query vector is unit-normalized.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Benchmark<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        z * std
    }

    let mut centers = Vec::with_capacity(spec.n_clusters);
    for _ in 0..spec.n_clusters {
        centers.push(
            (0..spec.d)
                .map(|_| gauss(&mut rng, CENTER_SCALE))
                .collect::<Vec<f64>>(),
        );
    }

    let mut rows: Vec<Vec<T>> = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let center = &centers[i % spec.n_clusters];
        let mut row: Vec<T> = center
            .iter()
            .map(|&c| T::from_f64_lossy(c + gauss(&mut rng, spec.cluster_std)))
            .collect();
        if spec.metric == Metric::InnerProduct {
            normalize_unit(&mut row);
        }
        rows.push(row);
    }

    let mut queries: Vec<Vec<T>> = Vec::with_capacity(spec.n_queries);
    for _ in 0..spec.n_queries {
        let pick = rng.gen_range(0..spec.n);
        let noise_std = spec.cluster_std * QUERY_NOISE_FRAC;
        let mut q: Vec<T> = rows[pick]
            .iter()
            .map(|&x| T::from_f64_lossy(x.to_f64_lossy() + gauss(&mut rng, noise_std)))
            .collect();
        if spec.metric == Metric::InnerProduct {
            normalize_unit(&mut q);
        }
        queries.push(q);
    }

    let base = Arc::new(Dataset::from_rows(rows, spec.metric)?);
    let ground_truth = build_ground_truth(&base, &queries, spec.depth)?;
    let relevance = relevance_from_truth(&ground_truth, spec.relevance_depth);
    Ok(Benchmark {
        base,
        queries,
        ground_truth,
        relevance,
    })
}

/// Exact top-`depth` ids per query via the brute-force oracle.
///
/// Parallel over queries; the output order is the query order regardless
/// of scheduling, so repeated runs agree byte for byte.
pub fn build_ground_truth<T: Scalar>(
    base: &Arc<Dataset<T>>,
    queries: &[Vec<T>],
    depth: usize,
) -> Result<Vec<Vec<u32>>> {
    if depth == 0 || depth > base.len() {
        return Err(Error::invalid(format!(
            "depth must be in [1, N], got {depth} for N={}",
            base.len()
        )));
    }
    queries
        .par_iter()
        .map(|q| {
            let top = brute_force_topk(base, q, depth)?;
            Ok(top.iter().map(|s| s.id as u32).collect())
        })
        .collect()
}

/// Oracle-head relevant sets (`relevance_depth` ids per query).
pub fn relevance_from_truth(ground_truth: &[Vec<u32>], relevance_depth: usize) -> Vec<BTreeSet<u64>> {
    ground_truth
        .iter()
        .map(|row| {
            row.iter()
                .take(relevance_depth)
                .map(|&id| id as u64)
                .collect()
        })
        .collect()
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_sha256_hex(path: impl AsRef<Path>) -> Result<String> {
    let mut file = File::open(path.as_ref())?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk description of a saved benchmark: the three files plus the
/// checksums that tie the ground-truth cache to its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub name: String,
    pub metric: Metric,
    pub base_file: String,
    pub query_file: String,
    pub ground_truth_file: String,
    pub depth: usize,
    pub relevance_depth: usize,
    pub base_sha256: String,
    pub query_sha256: String,
    pub ground_truth_sha256: String,
    /// Present when the benchmark was generated rather than ingested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<SyntheticSpec>,
}

impl BenchmarkManifest {
    pub fn manifest_path(dir: impl AsRef<Path>, name: &str) -> PathBuf {
        dir.as_ref().join(format!("{name}.manifest.json"))
    }
}

/// Write a benchmark bundle (`fvecs` + `ivecs` + manifest) into `dir`.
///
/// File I/O is f32-width (the `.fvecs` element type). Returns the manifest
/// it wrote. Saving is idempotent: the same benchmark produces identical
/// bytes and checksums.
pub fn save_benchmark(
    dir: impl AsRef<Path>,
    name: &str,
    bench: &Benchmark<f32>,
    relevance_depth: usize,
    spec: Option<&SyntheticSpec>,
) -> Result<BenchmarkManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let base_file = format!("{name}.base.fvecs");
    let query_file = format!("{name}.query.fvecs");
    let ground_truth_file = format!("{name}.groundtruth.ivecs");

    let base_rows: Vec<Vec<f32>> = (0..bench.base.len())
        .map(|i| bench.base.vector(i).to_vec())
        .collect();
    vecio::write_fvecs(dir.join(&base_file), &base_rows)?;
    vecio::write_fvecs(dir.join(&query_file), &bench.queries)?;
    let truth_rows: Vec<Vec<i32>> = bench
        .ground_truth
        .iter()
        .map(|row| row.iter().map(|&id| id as i32).collect())
        .collect();
    vecio::write_ivecs(dir.join(&ground_truth_file), &truth_rows)?;

    let manifest = BenchmarkManifest {
        name: name.to_string(),
        metric: bench.base.metric(),
        base_sha256: file_sha256_hex(dir.join(&base_file))?,
        query_sha256: file_sha256_hex(dir.join(&query_file))?,
        ground_truth_sha256: file_sha256_hex(dir.join(&ground_truth_file))?,
        base_file,
        query_file,
        ground_truth_file,
        depth: bench.depth(),
        relevance_depth,
        spec: spec.cloned(),
    };
    let manifest_path = BenchmarkManifest::manifest_path(dir, name);
    serde_json::to_writer_pretty(File::create(&manifest_path)?, &manifest)?;
    Ok(manifest)
}

/// Load a benchmark bundle saved by [`save_benchmark`].
///
/// Every file checksum is re-verified against the manifest before use; a
/// mismatch means the ground-truth cache no longer describes the data and
/// the load fails instead of silently mixing generations.
pub fn load_benchmark(dir: impl AsRef<Path>, name: &str) -> Result<Benchmark<f32>> {
    let dir = dir.as_ref();
    let manifest_path = BenchmarkManifest::manifest_path(dir, name);
    let manifest: BenchmarkManifest =
        serde_json::from_reader(File::open(&manifest_path).map_err(|e| Error::MalformedFile {
            path: manifest_path.clone(),
            reason: format!("cannot open: {e}"),
        })?)?;

    for (file, expected) in [
        (&manifest.base_file, &manifest.base_sha256),
        (&manifest.query_file, &manifest.query_sha256),
        (&manifest.ground_truth_file, &manifest.ground_truth_sha256),
    ] {
        let actual = file_sha256_hex(dir.join(file))?;
        if &actual != expected {
            return Err(Error::ArtifactMismatch(format!(
                "{file}: checksum {actual} does not match manifest {expected}; \
                 the cached benchmark is stale"
            )));
        }
    }

    let base_rows = vecio::load_fvecs(dir.join(&manifest.base_file))?;
    let queries = vecio::load_fvecs(dir.join(&manifest.query_file))?;
    let truth_rows = vecio::load_ivecs(dir.join(&manifest.ground_truth_file))?;
    let ground_truth: Vec<Vec<u32>> = truth_rows
        .iter()
        .map(|row| row.iter().map(|&id| id as u32).collect())
        .collect();
    if ground_truth.len() != queries.len() {
        return Err(Error::data(format!(
            "{} ground-truth rows for {} queries",
            ground_truth.len(),
            queries.len()
        )));
    }
    let relevance = relevance_from_truth(&ground_truth, manifest.relevance_depth);
    Ok(Benchmark {
        base: Arc::new(Dataset::from_rows(base_rows, manifest.metric)?),
        queries,
        ground_truth,
        relevance,
    })
}
