//! `lanekit` — experiment runner for partitioned-lane ANN search.
//!
//! The binary wraps the library's planner, lane harness, and metrics into a
//! reproducible experiment grid: generate a benchmark bundle, train an index
//! over it, then sweep the dedicated fraction `alpha` (and the pool size,
//! and the lane count) while logging machine-readable reports.
//!
//! Artifacts live under the dataset root (`--data`, or the `LANEKIT_DATA`
//! environment variable, default `./data`): one directory per
//! `(dataset, seed)` pair holding the fvecs/ivecs bundle, the trained
//! index, and its build log. Reports land under `--out` as CSV rows in the
//! fixed `dataset,index,M,k_lane,alpha,seed,metric,value` schema, plus
//! JSON/JSONL sidecars for outcome-level detail.
//!
//! ```bash
//! lanekit gen                   # benchmark bundles for seeds 42/123/789
//! lanekit build                 # train the HNSW index per bundle
//! lanekit sweep --out reports   # alpha sweep + baselines -> CSV/JSONL
//! lanekit recommend             # measure rho_0, print the alpha to use
//! ```
//!
//! Every CSV row is a pure function of the manifest and its seeds; wall
//! times never enter the CSV (build and bench timings go to JSON logs,
//! where drift across machines is expected). The grid runs in parallel
//! over cells, but each cell's query loop is sequential and its output
//! position is fixed, so reruns produce byte-identical reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use lanekit::datasets::{file_sha256_hex, relevance_from_truth, vecio};
use lanekit::{
    build_ground_truth, derive_query_seed, generate_synthetic, hnsw_build, ivf_build, linear_fit,
    load_benchmark, load_index, measure_rho0, planner_microbenchmark, predicted_gain, recall_at_k,
    recommend_alpha, run_query_opts, run_single_baseline, save_benchmark, save_index, write_csv,
    Benchmark, BenchmarkManifest, BruteForceIndex, CsvRow, Dataset, IndexHandle, LaneMode,
    LaneOptions, Metric, OutcomeRecord, PartitionConfig, StragglerPolicy, SyntheticSpec,
};

type BenchF32 = Benchmark<f32>;
type IndexF32 = IndexHandle<f32>;

/// File names the full-scale corpus is expected under (inside
/// `<data>/sift1m/`). The ground-truth file is optional; it is computed and
/// cached on first use when absent.
const SIFT_BASE: &str = "sift_base.fvecs";
const SIFT_QUERY: &str = "sift_query.fvecs";
const SIFT_TRUTH: &str = "sift_groundtruth.ivecs";
const SIFT_TRUTH_DEPTH: usize = 100;

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "lanekit",
    about = "Experiment runner for partitioned-lane ANN search",
    version
)]
struct Cli {
    /// Experiment manifest (JSON). Omitted fields take the desk-scale
    /// defaults; omitting the flag uses the default manifest entirely.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Report directory (overrides the manifest's `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for the experiment grid (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Run a single seed instead of the manifest's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Dataset root directory.
    #[arg(long, global = true, env = "LANEKIT_DATA", default_value = "data")]
    data: PathBuf,

    /// Use the full-scale corpus when fvecs files are present under
    /// `<data>/sift1m/`; falls back to the synthetic default otherwise.
    #[arg(long, global = true)]
    paper_scale: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the benchmark bundle (vectors, queries, ground truth) per seed.
    Gen,
    /// Train the manifest's index over each generated bundle.
    Build,
    /// Recompute ground truth for existing bundles and refresh checksums.
    Groundtruth {
        /// Oracle depth per query (default: the bundle's recorded depth).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Alpha sweep x seeds x modes, plus the single-index baseline.
    Sweep,
    /// Pool-size ablation at fixed total budget.
    Poolsize,
    /// Lane-count scaling at alpha in {0, 1} with per-M baselines.
    Lanescale {
        /// Comma-separated lane counts.
        #[arg(long, default_value = "2,4,8", value_delimiter = ',')]
        lanes: Vec<u32>,
    },
    /// Measure baseline lane overlap rho_0 on the built index.
    Rho0 {
        /// Lane mode to measure: naive_identical, naive_jittered, or
        /// partitioned:<alpha> (default: the manifest's mode).
        #[arg(long)]
        mode: Option<String>,
        /// Measure only the first N queries.
        #[arg(long)]
        queries: Option<usize>,
        /// Lane count (default: first entry of the manifest's M list).
        #[arg(long)]
        m: Option<u32>,
    },
    /// Measure rho_0, then print the recommended alpha and predicted gain.
    Recommend {
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        m: Option<u32>,
    },
    /// Planner-only timing over a k_total grid (no index involved).
    Microbench {
        /// Timed iterations per grid point.
        #[arg(long, default_value_t = 200)]
        trials: u32,
        /// Lane count (default: first entry of the manifest's M list).
        #[arg(long)]
        m: Option<u32>,
    },
}

// ---------------------------------------------------------------------------
// Experiment manifest
// ---------------------------------------------------------------------------

/// Index family plus its training parameters, as named in manifests.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum IndexSpec {
    Hnsw {
        graph_degree: usize,
        ef_construction: usize,
    },
    IvfFlat {
        nlist: usize,
        train_sample_size: usize,
    },
    BruteForce,
}

impl IndexSpec {
    /// Short identifier used in file names and the CSV `index` column.
    fn id(&self) -> &'static str {
        match self {
            IndexSpec::Hnsw { .. } => "hnsw",
            IndexSpec::IvfFlat { .. } => "ivf",
            IndexSpec::BruteForce => "brute",
        }
    }
}

/// Straggler policy, as named in manifests.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicySpec {
    WaitAll,
    FirstK { target: u32 },
    Timeboxed { deadline_ms: u64 },
}

impl PolicySpec {
    fn to_policy(self) -> StragglerPolicy {
        match self {
            PolicySpec::WaitAll => StragglerPolicy::WaitAll,
            PolicySpec::FirstK { target } => StragglerPolicy::FirstKArrivals(target),
            PolicySpec::Timeboxed { deadline_ms } => {
                StragglerPolicy::TimeBoxedBackfill(Duration::from_millis(deadline_ms))
            }
        }
    }
}

/// Everything a run needs: the dataset reference, the index family and its
/// parameters, the partition grid, the seeds, the baseline mode, the
/// straggler policy, and where reports go.
///
/// Loaded from `--manifest` JSON; omitted fields take the defaults below,
/// which reproduce the desk-scale main comparison (M=4, k_lane=16, alpha in
/// {0, 0.25, 0.5, 0.75, 1}). Validation expands every `(M, alpha)` pair
/// into a concrete `PartitionConfig` so an infeasible grid fails before any
/// work starts.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentManifest {
    /// Dataset name; per-seed bundles live at `<data>/<dataset>-s<seed>/`.
    dataset: String,
    /// Inline synthetic generator spec (its `seed` field is overridden by
    /// each run seed). `None` means the desk-scale default benchmark.
    synthetic: Option<SyntheticSpec>,
    index: IndexSpec,
    m_list: Vec<u32>,
    k_lane: u32,
    alphas: Vec<f64>,
    /// Pool-size ablation ratios, as multiples of `k_total`.
    pool_ratios: Vec<f64>,
    seeds: Vec<u64>,
    /// Baseline lane mode measured for rho_0 (`naive_identical`,
    /// `naive_jittered`, or `partitioned:<alpha>`).
    mode: String,
    policy: PolicySpec,
    out_dir: PathBuf,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        ExperimentManifest {
            dataset: "mini-sift".into(),
            synthetic: None,
            index: IndexSpec::Hnsw {
                graph_degree: 16,
                ef_construction: 100,
            },
            m_list: vec![4],
            k_lane: 16,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            pool_ratios: vec![0.8, 0.9, 1.0, 1.1, 1.25, 1.5],
            seeds: vec![42, 123, 789],
            mode: "naive_identical".into(),
            policy: PolicySpec::WaitAll,
            out_dir: PathBuf::from("reports"),
        }
    }
}

impl ExperimentManifest {
    fn load(path: Option<&Path>) -> Result<Self> {
        let manifest = match path {
            Some(p) => {
                let raw = fs::read_to_string(p)
                    .with_context(|| format!("cannot read manifest {}", p.display()))?;
                serde_json::from_str(&raw)
                    .with_context(|| format!("malformed manifest {}", p.display()))?
            }
            None => ExperimentManifest::default(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Expand the grid and reject anything that cannot run.
    fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "manifest needs at least one seed");
        ensure!(!self.m_list.is_empty(), "manifest needs at least one lane count");
        ensure!(!self.alphas.is_empty(), "manifest needs at least one alpha");
        ensure!(
            self.pool_ratios.iter().all(|&r| r > 0.0 && r.is_finite()),
            "pool ratios must be positive and finite"
        );
        parse_mode(&self.mode)?;
        for &m in &self.m_list {
            for &alpha in &self.alphas {
                PartitionConfig::new(m, self.k_lane, alpha, m * self.k_lane, 0).with_context(
                    || format!("grid cell M={m}, k_lane={}, alpha={alpha} is infeasible", self.k_lane),
                )?;
            }
        }
        Ok(())
    }

    /// Synthetic spec for one run seed.
    fn spec_for(&self, seed: u64) -> SyntheticSpec {
        match &self.synthetic {
            Some(s) => {
                let mut s = s.clone();
                s.seed = seed;
                s
            }
            None => SyntheticSpec::mini_sift(seed),
        }
    }
}

fn parse_mode(s: &str) -> Result<LaneMode> {
    if let Some(rest) = s.strip_prefix("partitioned") {
        let alpha: f64 = match rest.strip_prefix(':') {
            Some(a) => a
                .parse()
                .with_context(|| format!("bad alpha in lane mode `{s}`"))?,
            None if rest.is_empty() => 1.0,
            None => bail!("unknown lane mode `{s}`"),
        };
        ensure!(
            (0.0..=1.0).contains(&alpha),
            "alpha in lane mode `{s}` must lie in [0, 1]"
        );
        return Ok(LaneMode::Partitioned { alpha });
    }
    match s {
        "naive_identical" => Ok(LaneMode::NaiveIdentical),
        "naive_jittered" | "naive_jittered_entry" => Ok(LaneMode::NaiveJitteredEntry),
        _ => bail!(
            "unknown lane mode `{s}` (expected naive_identical, naive_jittered, \
             or partitioned[:<alpha>])"
        ),
    }
}

// ---------------------------------------------------------------------------
// Run context: artifact resolution
// ---------------------------------------------------------------------------

/// One dataset bundle on disk: its name, directory, and whether it is the
/// full-scale corpus (which is shared across seeds) or a per-seed bundle.
struct Bundle {
    name: String,
    dir: PathBuf,
    full_scale: bool,
}

struct Ctx {
    m: ExperimentManifest,
    data: PathBuf,
    out: PathBuf,
    paper_scale: bool,
}

impl Ctx {
    fn new(cli: &Cli, mut manifest: ExperimentManifest) -> Self {
        if let Some(seed) = cli.seed {
            manifest.seeds = vec![seed];
        }
        let out = cli.out.clone().unwrap_or_else(|| manifest.out_dir.clone());
        let mut paper_scale = cli.paper_scale;
        if paper_scale {
            let dir = cli.data.join("sift1m");
            if !(dir.join(SIFT_BASE).exists() && dir.join(SIFT_QUERY).exists()) {
                eprintln!(
                    "note: --paper-scale requested but {}/{{{SIFT_BASE},{SIFT_QUERY}}} not found; \
                     falling back to `{}`",
                    dir.display(),
                    manifest.dataset
                );
                paper_scale = false;
            }
        }
        Ctx {
            m: manifest,
            data: cli.data.clone(),
            out,
            paper_scale,
        }
    }

    fn bundle(&self, seed: u64) -> Bundle {
        if self.paper_scale {
            return Bundle {
                name: "sift1m".into(),
                dir: self.data.join("sift1m"),
                full_scale: true,
            };
        }
        let name = format!("{}-s{seed}", self.m.dataset);
        Bundle {
            dir: self.data.join(&name),
            name,
            full_scale: false,
        }
    }

    fn index_path(&self, bundle: &Bundle) -> PathBuf {
        bundle.dir.join(format!("{}.idx", self.m.index.id()))
    }

    fn load_bench(&self, bundle: &Bundle) -> Result<BenchF32> {
        if bundle.full_scale {
            return self.load_full_scale_bundle(&bundle.dir);
        }
        load_benchmark(&bundle.dir, &bundle.name).with_context(|| {
            format!(
                "no benchmark bundle at {}; run `lanekit gen` first",
                bundle.dir.display()
            )
        })
    }

    /// Load the full-scale corpus from raw fvecs files, computing and
    /// caching the ground truth on first use.
    fn load_full_scale_bundle(&self, dir: &Path) -> Result<BenchF32> {
        let base_rows = vecio::load_fvecs(dir.join(SIFT_BASE))?;
        let queries = vecio::load_fvecs(dir.join(SIFT_QUERY))?;
        let base = Arc::new(Dataset::from_rows(base_rows, Metric::L2)?);
        let truth_path = dir.join(SIFT_TRUTH);
        let ground_truth: Vec<Vec<u32>> = if truth_path.exists() {
            vecio::load_ivecs(&truth_path)?
                .into_iter()
                .map(|row| row.into_iter().map(|v| v as u32).collect())
                .collect()
        } else {
            eprintln!(
                "computing ground truth for {} queries at depth {SIFT_TRUTH_DEPTH} (one-time)",
                queries.len()
            );
            let truth = build_ground_truth(&base, &queries, SIFT_TRUTH_DEPTH)?;
            let rows: Vec<Vec<i32>> = truth
                .iter()
                .map(|row| row.iter().map(|&v| v as i32).collect())
                .collect();
            vecio::write_ivecs(&truth_path, &rows)?;
            truth
        };
        let relevance = relevance_from_truth(&ground_truth, 1);
        Ok(Benchmark {
            base,
            queries,
            ground_truth,
            relevance,
        })
    }

    fn load_built(&self, seed: u64) -> Result<(Bundle, BenchF32, IndexF32)> {
        let bundle = self.bundle(seed);
        let bench = self.load_bench(&bundle)?;
        let path = self.index_path(&bundle);
        ensure!(
            path.exists(),
            "no trained index at {}; run `lanekit build` first",
            path.display()
        );
        let idx = load_index(&path, Arc::clone(&bench.base))
            .with_context(|| format!("cannot load index {}", path.display()))?;
        Ok((bundle, bench, idx))
    }
}

fn build_index(ds: Arc<Dataset<f32>>, spec: &IndexSpec, seed: u64) -> Result<IndexF32> {
    Ok(match spec {
        IndexSpec::Hnsw {
            graph_degree,
            ef_construction,
        } => IndexHandle::HnswLite(hnsw_build(ds, *graph_degree, *ef_construction, seed)?),
        IndexSpec::IvfFlat {
            nlist,
            train_sample_size,
        } => IndexHandle::IvfFlat(ivf_build(ds, *nlist, *train_sample_size, seed)?),
        IndexSpec::BruteForce => IndexHandle::BruteForce(BruteForceIndex::new(ds)),
    })
}

// ---------------------------------------------------------------------------
// Grid cells
// ---------------------------------------------------------------------------

/// One experiment cell: a lane configuration (or the single-index baseline)
/// run over the whole query set.
#[derive(Clone, Debug)]
enum Cell {
    Lanes {
        /// Metric-name prefix (`partitioned`, `naive_identical`, ...).
        tag: String,
        /// Value for the CSV `alpha` column.
        alpha_col: f64,
        mode: LaneMode,
        /// Alpha used to construct the `PartitionConfig`.
        alpha_cfg: f64,
        k_pool: u32,
    },
    Single,
}

/// Aggregates from one cell, plus its serialized per-query outcome lines.
struct CellStats {
    tag: String,
    alpha_col: f64,
    k_report: usize,
    recall_mean: f64,
    rho_mean: f64,
    union_mean: f64,
    lines: Vec<String>,
}

/// Shared per-seed state for running cells.
struct Runner<'a> {
    ds_name: &'a str,
    index_id: &'a str,
    idx: &'a IndexF32,
    bench: &'a BenchF32,
    /// Ground truth as u64 rows, one per query.
    truth: &'a [Vec<u64>],
    policy: StragglerPolicy,
    opts: LaneOptions,
    seed: u64,
}

impl Runner<'_> {
    /// Reported cutoff: recall@10 unless the total budget is smaller.
    fn k_report(&self, k_total: u32) -> usize {
        10.min(k_total as usize)
    }

    fn run(&self, cell: &Cell, m: u32, k_lane: u32) -> Result<CellStats> {
        match cell {
            Cell::Lanes {
                tag,
                alpha_col,
                mode,
                alpha_cfg,
                k_pool,
            } => self.lanes_cell(tag, *alpha_col, *mode, *alpha_cfg, *k_pool, m, k_lane),
            Cell::Single => self.single_cell(m, k_lane),
        }
    }

    fn lanes_cell(
        &self,
        tag: &str,
        alpha_col: f64,
        mode: LaneMode,
        alpha_cfg: f64,
        k_pool: u32,
        m: u32,
        k_lane: u32,
    ) -> Result<CellStats> {
        let k_report = self.k_report(m * k_lane);
        let base_cfg = PartitionConfig::new(m, k_lane, alpha_cfg, k_pool, self.seed)?;
        let mut recall_sum = 0.0;
        let mut rho_sum = 0.0;
        let mut union_sum = 0.0;
        let mut lines = Vec::with_capacity(self.bench.queries.len());
        for (qi, query) in self.bench.queries.iter().enumerate() {
            let cfg = base_cfg
                .clone()
                .with_query_seed(derive_query_seed(self.seed, qi as u64));
            let out = run_query_opts(self.idx, query, &cfg, mode, self.policy, k_report, &self.opts)?;
            let record = out.to_record(qi as u64, mode);
            recall_sum += recall_at_k(&record.topk, &self.truth[qi], k_report)?;
            rho_sum += record.overlap_rho;
            union_sum += record.union_size as f64;
            lines.push(self.line(tag, alpha_col, &record)?);
        }
        let n = self.bench.queries.len() as f64;
        Ok(CellStats {
            tag: tag.to_string(),
            alpha_col,
            k_report,
            recall_mean: recall_sum / n,
            rho_mean: rho_sum / n,
            union_mean: union_sum / n,
            lines,
        })
    }

    /// One search over the whole budget on the same index: the ceiling the
    /// fully dedicated partition is compared against.
    fn single_cell(&self, m: u32, k_lane: u32) -> Result<CellStats> {
        let k_total = m * k_lane;
        let k_report = self.k_report(k_total);
        let mut recall_sum = 0.0;
        let mut rho_sum = 0.0;
        let mut union_sum = 0.0;
        let mut lines = Vec::with_capacity(self.bench.queries.len());
        for (qi, query) in self.bench.queries.iter().enumerate() {
            let out = run_single_baseline(self.idx, query, k_total, k_report)?;
            let record = OutcomeRecord {
                query_id: qi as u64,
                mode: "single".into(),
                alpha: None,
                m: 1,
                lanes_counted: vec![0],
                union_size: out.merged.union_size,
                overlap_rho: out.merged.overlap_rho,
                backfilled: 0,
                topk: out.merged.topk_ids(),
                per_lane_ids: out.per_lane.iter().map(|l| l.ids().collect()).collect(),
                cost: out.total_cost,
            };
            recall_sum += recall_at_k(&record.topk, &self.truth[qi], k_report)?;
            rho_sum += record.overlap_rho;
            union_sum += record.union_size as f64;
            lines.push(self.line("single", 1.0, &record)?);
        }
        let n = self.bench.queries.len() as f64;
        Ok(CellStats {
            tag: "single".into(),
            alpha_col: 1.0,
            k_report,
            recall_mean: recall_sum / n,
            rho_mean: rho_sum / n,
            union_mean: union_sum / n,
            lines,
        })
    }

    /// One JSONL line: the outcome record wrapped with its grid coordinates.
    fn line(&self, tag: &str, alpha_col: f64, record: &OutcomeRecord) -> Result<String> {
        Ok(serde_json::to_string(&json!({
            "dataset": self.ds_name,
            "index": self.index_id,
            "seed": self.seed,
            "cell": tag,
            "alpha": alpha_col,
            "record": record,
        }))?)
    }

    /// The three standard CSV rows for one cell.
    fn rows(&self, m: u32, k_lane: u32, stats: &CellStats) -> Vec<CsvRow> {
        let row = |metric: String, value: f64| CsvRow {
            dataset: self.ds_name.to_string(),
            index: self.index_id.to_string(),
            m,
            k_lane,
            alpha: stats.alpha_col,
            seed: self.seed,
            metric,
            value,
        };
        vec![
            row(format!("{}/recall@{}", stats.tag, stats.k_report), stats.recall_mean),
            row(format!("{}/overlap_rho", stats.tag), stats.rho_mean),
            row(format!("{}/union_size", stats.tag), stats.union_mean),
        ]
    }
}

// ---------------------------------------------------------------------------
// Subcommands: artifact plumbing
// ---------------------------------------------------------------------------

fn cmd_gen(ctx: &Ctx) -> Result<()> {
    for &seed in &ctx.m.seeds {
        let bundle = ctx.bundle(seed);
        if bundle.full_scale {
            // Nothing to generate: verify the user-supplied files and make
            // sure the ground-truth cache exists.
            ctx.load_full_scale_bundle(&bundle.dir)?;
            println!(
                "{}",
                json!({
                    "dataset": bundle.name,
                    "dir": bundle.dir,
                    "base_sha256": file_sha256_hex(bundle.dir.join(SIFT_BASE))?,
                    "query_sha256": file_sha256_hex(bundle.dir.join(SIFT_QUERY))?,
                    "ground_truth_sha256": file_sha256_hex(bundle.dir.join(SIFT_TRUTH))?,
                })
            );
            break;
        }
        let spec = ctx.m.spec_for(seed);
        let bench = generate_synthetic::<f32>(&spec)?;
        let manifest = save_benchmark(&bundle.dir, &bundle.name, &bench, spec.relevance_depth, Some(&spec))?;
        println!(
            "{}",
            json!({
                "dataset": manifest.name,
                "dir": bundle.dir,
                "n": bench.base.len(),
                "d": bench.base.dim(),
                "queries": bench.queries.len(),
                "depth": manifest.depth,
                "base_sha256": manifest.base_sha256,
                "query_sha256": manifest.query_sha256,
                "ground_truth_sha256": manifest.ground_truth_sha256,
            })
        );
    }
    Ok(())
}

fn cmd_build(ctx: &Ctx) -> Result<()> {
    for &seed in &ctx.m.seeds {
        let bundle = ctx.bundle(seed);
        let bench = ctx.load_bench(&bundle)?;
        let start = Instant::now();
        let idx = build_index(Arc::clone(&bench.base), &ctx.m.index, seed)?;
        let wall_ms = start.elapsed().as_millis() as u64;
        let path = ctx.index_path(&bundle);
        save_index(&idx, &path)?;
        let log = json!({
            "dataset": bundle.name,
            "index": ctx.m.index.id(),
            "params": ctx.m.index,
            "build_seed": seed,
            "n": bench.base.len(),
            "d": bench.base.dim(),
            "index_file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "index_sha256": file_sha256_hex(&path)?,
            "wall_ms": wall_ms,
        });
        fs::write(
            bundle.dir.join(format!("{}.build.json", ctx.m.index.id())),
            serde_json::to_string_pretty(&log)?,
        )?;
        println!("{log}");
        if bundle.full_scale {
            break;
        }
    }
    Ok(())
}

fn cmd_groundtruth(ctx: &Ctx, depth: Option<usize>) -> Result<()> {
    for &seed in &ctx.m.seeds {
        let bundle = ctx.bundle(seed);
        if bundle.full_scale {
            let truth_path = bundle.dir.join(SIFT_TRUTH);
            if truth_path.exists() && depth.is_none() {
                println!(
                    "{}",
                    json!({
                        "dataset": bundle.name,
                        "ground_truth_sha256": file_sha256_hex(&truth_path)?,
                        "status": "cached",
                    })
                );
                break;
            }
            let base_rows = vecio::load_fvecs(bundle.dir.join(SIFT_BASE))?;
            let queries = vecio::load_fvecs(bundle.dir.join(SIFT_QUERY))?;
            let base = Arc::new(Dataset::from_rows(base_rows, Metric::L2)?);
            let truth = build_ground_truth(&base, &queries, depth.unwrap_or(SIFT_TRUTH_DEPTH))?;
            let rows: Vec<Vec<i32>> = truth
                .iter()
                .map(|row| row.iter().map(|&v| v as i32).collect())
                .collect();
            vecio::write_ivecs(&truth_path, &rows)?;
            println!(
                "{}",
                json!({
                    "dataset": bundle.name,
                    "ground_truth_sha256": file_sha256_hex(&truth_path)?,
                    "status": "computed",
                })
            );
            break;
        }
        let manifest_path = BenchmarkManifest::manifest_path(&bundle.dir, &bundle.name);
        ensure!(
            manifest_path.exists(),
            "no benchmark manifest at {}; run `lanekit gen` first",
            manifest_path.display()
        );
        let manifest: BenchmarkManifest = serde_json::from_reader(File::open(&manifest_path)?)?;
        // The ground-truth cache is only valid for the exact vectors it was
        // computed from; refuse to refresh over drifted inputs.
        for (file, want) in [
            (&manifest.base_file, &manifest.base_sha256),
            (&manifest.query_file, &manifest.query_sha256),
        ] {
            let got = file_sha256_hex(bundle.dir.join(file))?;
            ensure!(
                &got == want,
                "checksum mismatch for {file}; regenerate the bundle with `lanekit gen`"
            );
        }
        let base_rows = vecio::load_fvecs(bundle.dir.join(&manifest.base_file))?;
        let queries = vecio::load_fvecs(bundle.dir.join(&manifest.query_file))?;
        let base = Arc::new(Dataset::from_rows(base_rows, manifest.metric)?);
        let depth = depth.unwrap_or(manifest.depth);
        let ground_truth = build_ground_truth(&base, &queries, depth)?;
        let relevance = relevance_from_truth(&ground_truth, manifest.relevance_depth);
        let bench = Benchmark {
            base,
            queries,
            ground_truth,
            relevance,
        };
        let updated = save_benchmark(
            &bundle.dir,
            &bundle.name,
            &bench,
            manifest.relevance_depth,
            manifest.spec.as_ref(),
        )?;
        println!(
            "{}",
            json!({
                "dataset": updated.name,
                "depth": updated.depth,
                "queries": bench.queries.len(),
                "ground_truth_sha256": updated.ground_truth_sha256,
            })
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommands: experiments
// ---------------------------------------------------------------------------

fn cmd_sweep(ctx: &Ctx) -> Result<()> {
    fs::create_dir_all(&ctx.out)?;
    let index_id = ctx.m.index.id();
    let jitter_requested = matches!(parse_mode(&ctx.m.mode)?, LaneMode::NaiveJitteredEntry);
    let mut rows: Vec<CsvRow> = Vec::new();
    let mut gains: Vec<serde_json::Value> = Vec::new();
    let mut outcomes = BufWriter::new(File::create(ctx.out.join("sweep-outcomes.jsonl"))?);

    for &seed in &ctx.m.seeds {
        let (bundle, bench, idx) = ctx.load_built(seed)?;
        let truth: Vec<Vec<u64>> = (0..bench.queries.len()).map(|i| bench.truth_ids(i)).collect();
        let runner = Runner {
            ds_name: &bundle.name,
            index_id,
            idx: &idx,
            bench: &bench,
            truth: &truth,
            policy: ctx.m.policy.to_policy(),
            opts: LaneOptions::default(),
            seed,
        };
        for &m in &ctx.m.m_list {
            let k_total = m * ctx.m.k_lane;
            let mut cells: Vec<Cell> = ctx
                .m
                .alphas
                .iter()
                .map(|&alpha| Cell::Lanes {
                    tag: "partitioned".into(),
                    alpha_col: alpha,
                    mode: LaneMode::Partitioned { alpha },
                    alpha_cfg: alpha,
                    k_pool: k_total,
                })
                .collect();
            cells.push(Cell::Lanes {
                tag: "naive_identical".into(),
                alpha_col: 0.0,
                mode: LaneMode::NaiveIdentical,
                alpha_cfg: 0.0,
                k_pool: k_total,
            });
            if jitter_requested && matches!(idx, IndexHandle::HnswLite(_)) {
                cells.push(Cell::Lanes {
                    tag: "naive_jittered".into(),
                    alpha_col: 0.0,
                    mode: LaneMode::NaiveJitteredEntry,
                    alpha_cfg: 0.0,
                    k_pool: k_total,
                });
            }
            cells.push(Cell::Single);

            let stats: Vec<CellStats> = cells
                .par_iter()
                .map(|cell| runner.run(cell, m, ctx.m.k_lane))
                .collect::<Result<_>>()?;
            for s in &stats {
                rows.extend(runner.rows(m, ctx.m.k_lane, s));
                for line in &s.lines {
                    writeln!(outcomes, "{line}")?;
                }
            }

            // Predicted vs measured gain, anchored on the naive baseline:
            // the partition multiplies distinct coverage by k_total / U0,
            // which the overlap model predicts from rho_0 alone.
            let naive = stats
                .iter()
                .find(|s| s.tag == "naive_identical")
                .expect("naive cell always present");
            let predicted = predicted_gain(naive.rho_mean, m)?;
            let measured = k_total as f64 / naive.union_mean;
            let gain_row = |metric: &str, alpha: f64, value: f64| CsvRow {
                dataset: bundle.name.clone(),
                index: index_id.to_string(),
                m,
                k_lane: ctx.m.k_lane,
                alpha,
                seed,
                metric: metric.to_string(),
                value,
            };
            rows.push(gain_row("gain/rho0", 0.0, naive.rho_mean));
            rows.push(gain_row("gain/predicted", 1.0, predicted));
            rows.push(gain_row("gain/measured", 1.0, measured));
            gains.push(json!({
                "dataset": bundle.name,
                "index": index_id,
                "m": m,
                "k_lane": ctx.m.k_lane,
                "seed": seed,
                "rho0_mean": naive.rho_mean,
                "u0_mean": naive.union_mean,
                "predicted_gain": predicted,
                "measured_gain": measured,
            }));

            let pick = |tag: &str, alpha: f64| {
                stats
                    .iter()
                    .find(|s| s.tag == tag && s.alpha_col == alpha)
                    .map(|s| s.recall_mean)
            };
            let single = stats.iter().find(|s| s.tag == "single").map(|s| s.recall_mean);
            println!(
                "{} {} M={m}: recall@10 alpha=0 {} -> alpha=1 {} | single {} | rho0 {:.3}",
                bundle.name,
                index_id,
                fmt_opt(pick("partitioned", 0.0)),
                fmt_opt(pick("partitioned", 1.0)),
                fmt_opt(single),
                naive.rho_mean,
            );
        }
    }
    outcomes.flush()?;
    write_csv(ctx.out.join("sweep.csv"), &rows)?;
    fs::write(
        ctx.out.join("sweep-gain.json"),
        serde_json::to_string_pretty(&gains)?,
    )?;
    println!(
        "wrote {} rows to {}",
        rows.len(),
        ctx.out.join("sweep.csv").display()
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

/// Concrete pool-size cell: the nearest feasible configuration to
/// `K_pool = ratio * k_total`.
///
/// Ratios at or above 1 keep `alpha = 1` and simply enlarge the pool (the
/// partition then covers a pseudorandom `k_total`-subset of it). Ratios
/// below 1 cannot feed `M` disjoint full-size slices, so the dedicated
/// quota is lowered to the closest value whose coverage fits the target
/// pool, and the pool shrinks to exactly that coverage.
#[derive(Clone, Copy, Debug)]
struct PoolPlan {
    ratio: f64,
    k_pool: u32,
    alpha: f64,
    k_ded: u32,
}

fn pool_plan(ratio: f64, m: u32, k_lane: u32) -> std::result::Result<PoolPlan, String> {
    let k_total = m * k_lane;
    let k_target = ((ratio * k_total as f64).round() as i64).max(1) as u32;
    if k_target >= k_total {
        return Ok(PoolPlan {
            ratio,
            k_pool: k_target,
            alpha: 1.0,
            k_ded: k_lane,
        });
    }
    if k_target < k_lane {
        return Err(format!(
            "K_pool={k_target} cannot cover a single lane budget k_lane={k_lane}"
        ));
    }
    // Coverage M*k_ded + (k_lane - k_ded) is the closest feasible pool size
    // to the target; solve for k_ded and round.
    let k_ded = (((k_target - k_lane) as f64 / (m - 1).max(1) as f64).round() as u32).min(k_lane);
    Ok(PoolPlan {
        ratio,
        k_pool: m * k_ded + (k_lane - k_ded),
        alpha: alpha_for_k_ded(k_ded, k_lane),
        k_ded,
    })
}

/// An alpha whose `floor(alpha * k_lane)` hits `k_ded` exactly, robust to
/// floating-point rounding: the midpoint `(k_ded + 1/2) / k_lane`.
fn alpha_for_k_ded(k_ded: u32, k_lane: u32) -> f64 {
    if k_ded >= k_lane {
        1.0
    } else {
        (2 * k_ded + 1) as f64 / (2 * k_lane) as f64
    }
}

fn cmd_poolsize(ctx: &Ctx) -> Result<()> {
    fs::create_dir_all(&ctx.out)?;
    let index_id = ctx.m.index.id();
    let m = ctx.m.m_list[0];
    let k_lane = ctx.m.k_lane;
    let k_total = m * k_lane;
    let mut rows: Vec<CsvRow> = Vec::new();
    let mut skips: Vec<serde_json::Value> = Vec::new();

    for &seed in &ctx.m.seeds {
        let (bundle, bench, idx) = ctx.load_built(seed)?;
        let truth: Vec<Vec<u64>> = (0..bench.queries.len()).map(|i| bench.truth_ids(i)).collect();
        let runner = Runner {
            ds_name: &bundle.name,
            index_id,
            idx: &idx,
            bench: &bench,
            truth: &truth,
            policy: ctx.m.policy.to_policy(),
            opts: LaneOptions::default(),
            seed,
        };
        let mut plans: Vec<PoolPlan> = Vec::new();
        for &ratio in &ctx.m.pool_ratios {
            match pool_plan(ratio, m, k_lane) {
                Ok(plan) if plan.k_pool as usize > bench.base.len() => {
                    let reason = format!(
                        "K_pool={} exceeds dataset size {}",
                        plan.k_pool,
                        bench.base.len()
                    );
                    eprintln!("skip ratio {ratio} seed {seed}: {reason}");
                    skips.push(json!({"ratio": ratio, "seed": seed, "reason": reason}));
                }
                Ok(plan) => {
                    // Guard the quota arithmetic before committing to the run.
                    let cfg = PartitionConfig::new(m, k_lane, plan.alpha, plan.k_pool, seed)?;
                    ensure!(
                        cfg.quotas().k_ded == plan.k_ded,
                        "alpha {} does not yield k_ded={} at k_lane={k_lane}",
                        plan.alpha,
                        plan.k_ded
                    );
                    plans.push(plan);
                }
                Err(reason) => {
                    eprintln!("skip ratio {ratio} seed {seed}: {reason}");
                    skips.push(json!({"ratio": ratio, "seed": seed, "reason": reason}));
                }
            }
        }
        let stats: Vec<(PoolPlan, CellStats)> = plans
            .par_iter()
            .map(|plan| {
                let tag = format!("poolsize@{:.2}", plan.ratio);
                runner
                    .lanes_cell(
                        &tag,
                        plan.alpha,
                        LaneMode::Partitioned { alpha: plan.alpha },
                        plan.alpha,
                        plan.k_pool,
                        m,
                        k_lane,
                    )
                    .map(|s| (*plan, s))
            })
            .collect::<Result<_>>()?;
        for (plan, s) in &stats {
            rows.extend(runner.rows(m, k_lane, s));
            let extra = |metric: String, value: f64| CsvRow {
                dataset: bundle.name.clone(),
                index: index_id.to_string(),
                m,
                k_lane,
                alpha: plan.alpha,
                seed,
                metric,
                value,
            };
            rows.push(extra(format!("{}/k_pool", s.tag), plan.k_pool as f64));
            rows.push(extra(
                format!("{}/predicted", s.tag),
                (k_total as f64 / plan.k_pool as f64).min(1.0),
            ));
            println!(
                "{} {} ratio {:.2}: K_pool={} alpha={:.4} recall@{} {:.3} union {:.1}",
                bundle.name, index_id, plan.ratio, plan.k_pool, plan.alpha, s.k_report,
                s.recall_mean, s.union_mean,
            );
        }
    }
    write_csv(ctx.out.join("poolsize.csv"), &rows)?;
    if !skips.is_empty() {
        fs::write(
            ctx.out.join("poolsize-skips.json"),
            serde_json::to_string_pretty(&skips)?,
        )?;
    }
    println!(
        "wrote {} rows to {} ({} skipped)",
        rows.len(),
        ctx.out.join("poolsize.csv").display(),
        skips.len()
    );
    Ok(())
}

fn cmd_lanescale(ctx: &Ctx, lanes: &[u32]) -> Result<()> {
    ensure!(!lanes.is_empty(), "need at least one lane count");
    ensure!(lanes.iter().all(|&m| m >= 1), "lane counts must be >= 1");
    fs::create_dir_all(&ctx.out)?;
    let index_id = ctx.m.index.id();
    let k_lane = ctx.m.k_lane;
    let mut rows: Vec<CsvRow> = Vec::new();

    for &seed in &ctx.m.seeds {
        let (bundle, bench, idx) = ctx.load_built(seed)?;
        let truth: Vec<Vec<u64>> = (0..bench.queries.len()).map(|i| bench.truth_ids(i)).collect();
        let runner = Runner {
            ds_name: &bundle.name,
            index_id,
            idx: &idx,
            bench: &bench,
            truth: &truth,
            policy: ctx.m.policy.to_policy(),
            opts: LaneOptions::default(),
            seed,
        };
        // Flatten (M, cell) so the grid parallelism covers both axes.
        let mut grid: Vec<(u32, Cell)> = Vec::new();
        for &m in lanes {
            let k_total = m * k_lane;
            for &alpha in &[0.0, 1.0] {
                grid.push((
                    m,
                    Cell::Lanes {
                        tag: "partitioned".into(),
                        alpha_col: alpha,
                        mode: LaneMode::Partitioned { alpha },
                        alpha_cfg: alpha,
                        k_pool: k_total,
                    },
                ));
            }
            grid.push((
                m,
                Cell::Lanes {
                    tag: "naive_identical".into(),
                    alpha_col: 0.0,
                    mode: LaneMode::NaiveIdentical,
                    alpha_cfg: 0.0,
                    k_pool: k_total,
                },
            ));
            grid.push((m, Cell::Single));
        }
        let stats: Vec<(u32, CellStats)> = grid
            .par_iter()
            .map(|(m, cell)| runner.run(cell, *m, k_lane).map(|s| (*m, s)))
            .collect::<Result<_>>()?;
        for (m, s) in &stats {
            rows.extend(runner.rows(*m, k_lane, s));
        }
        for &m in lanes {
            let pick = |tag: &str, alpha: f64| {
                stats
                    .iter()
                    .find(|(sm, s)| *sm == m && s.tag == tag && s.alpha_col == alpha)
                    .map(|(_, s)| s.recall_mean)
            };
            println!(
                "{} {} M={m} (k_total={}): alpha=0 {} | alpha=1 {} | single {}",
                bundle.name,
                index_id,
                m * k_lane,
                fmt_opt(pick("partitioned", 0.0)),
                fmt_opt(pick("partitioned", 1.0)),
                fmt_opt(pick("single", 1.0)),
            );
        }
    }
    write_csv(ctx.out.join("lanescale.csv"), &rows)?;
    println!(
        "wrote {} rows to {}",
        rows.len(),
        ctx.out.join("lanescale.csv").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommands: measurement and advice
// ---------------------------------------------------------------------------

/// Measure rho_0 for the requested mode over (a prefix of) the query set.
fn overlap_stats(
    ctx: &Ctx,
    mode: Option<&str>,
    queries: Option<usize>,
    m: Option<u32>,
) -> Result<(Bundle, LaneMode, u32, lanekit::OverlapStats)> {
    let seed = ctx.m.seeds[0];
    let (bundle, bench, idx) = ctx.load_built(seed)?;
    let m = m.unwrap_or(ctx.m.m_list[0]);
    let mode = parse_mode(mode.unwrap_or(&ctx.m.mode))?;
    if matches!(mode, LaneMode::NaiveJitteredEntry) {
        ensure!(
            matches!(idx, IndexHandle::HnswLite(_)),
            "naive_jittered varies the graph entry point and needs an HNSW index"
        );
    }
    let alpha_cfg = match mode {
        LaneMode::Partitioned { alpha } => alpha,
        _ => 0.0,
    };
    let cfg = PartitionConfig::new(m, ctx.m.k_lane, alpha_cfg, m * ctx.m.k_lane, seed)?;
    let limit = queries.unwrap_or(bench.queries.len()).min(bench.queries.len());
    ensure!(limit >= 1, "need at least one query");
    let stats = measure_rho0(&idx, &bench.queries[..limit], &cfg, mode)?;
    Ok((bundle, mode, m, stats))
}

fn cmd_rho0(ctx: &Ctx, mode: Option<&str>, queries: Option<usize>, m: Option<u32>) -> Result<()> {
    let (bundle, mode, m, stats) = overlap_stats(ctx, mode, queries, m)?;
    println!(
        "{}",
        json!({
            "dataset": bundle.name,
            "index": ctx.m.index.id(),
            "mode": mode.to_string(),
            "m": m,
            "k_lane": stats.k_lane,
            "queries": stats.per_query_rho.len(),
            "rho0_mean": stats.rho0_mean,
            "rho0_std": stats.rho0_std,
            "u0_mean": stats.u0_mean,
            "u0_std": stats.u0_std,
        })
    );
    fs::create_dir_all(&ctx.out)?;
    fs::write(
        ctx.out.join("rho0.json"),
        serde_json::to_string_pretty(&stats)?,
    )?;
    Ok(())
}

fn cmd_recommend(ctx: &Ctx, mode: Option<&str>, queries: Option<usize>, m: Option<u32>) -> Result<()> {
    let (bundle, mode, m, stats) = overlap_stats(ctx, mode, queries, m)?;
    let alpha = recommend_alpha(stats.rho0_mean);
    let gain = predicted_gain(stats.rho0_mean, m)?;
    println!(
        "{}",
        json!({
            "dataset": bundle.name,
            "index": ctx.m.index.id(),
            "mode": mode.to_string(),
            "m": m,
            "k_lane": stats.k_lane,
            "queries": stats.per_query_rho.len(),
            "rho0_mean": stats.rho0_mean,
            "rho0_std": stats.rho0_std,
            "recommended_alpha": alpha,
            "predicted_gain": gain,
        })
    );
    Ok(())
}

fn cmd_microbench(ctx: &Ctx, trials: u32, m: Option<u32>) -> Result<()> {
    let m = m.unwrap_or(ctx.m.m_list[0]);
    let grid: Vec<u32> = [16u32, 32, 64, 128, 256]
        .iter()
        .copied()
        .filter(|k| k % m == 0)
        .collect();
    ensure!(
        !grid.is_empty(),
        "no k_total in {{16,32,64,128,256}} is a multiple of M={m}"
    );
    let seed = ctx.m.seeds[0];
    let timings = planner_microbenchmark(m, 1.0, &grid, trials, seed)?;
    let xs: Vec<f64> = timings.iter().map(|t| t.k_total as f64).collect();
    let ys: Vec<f64> = timings.iter().map(|t| t.mean_micros).collect();
    let fit = linear_fit(&xs, &ys)?;
    println!("planner timing, M={m}, alpha=1, {trials} trials per point:");
    println!("  k_total   mean(us)    p50(us)    p95(us)   p95/p50");
    for t in &timings {
        println!(
            "  {:>7} {:>10.2} {:>10.2} {:>10.2} {:>9.3}",
            t.k_total,
            t.mean_micros,
            t.p50_micros,
            t.p95_micros,
            t.p95_micros / t.p50_micros,
        );
    }
    println!(
        "fit: mean_us ~ {:.4} * k_total + {:.2}  (R^2 = {:.4})",
        fit.slope, fit.intercept, fit.r2
    );
    fs::create_dir_all(&ctx.out)?;
    fs::write(
        ctx.out.join("microbench.json"),
        serde_json::to_string_pretty(&json!({
            "m": m,
            "alpha": 1.0,
            "trials": trials,
            "rows": timings,
            "fit": fit,
        }))?,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("worker pool already initialized")?;
    }
    let manifest = ExperimentManifest::load(cli.manifest.as_deref())?;
    let ctx = Ctx::new(&cli, manifest);
    match &cli.command {
        Command::Gen => cmd_gen(&ctx),
        Command::Build => cmd_build(&ctx),
        Command::Groundtruth { depth } => cmd_groundtruth(&ctx, *depth),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Poolsize => cmd_poolsize(&ctx),
        Command::Lanescale { lanes } => cmd_lanescale(&ctx, lanes),
        Command::Rho0 { mode, queries, m } => cmd_rho0(&ctx, mode.as_deref(), *queries, *m),
        Command::Recommend { mode, queries, m } => {
            cmd_recommend(&ctx, mode.as_deref(), *queries, *m)
        }
        Command::Microbench { trials, m } => cmd_microbench(&ctx, *trials, *m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_validates() {
        ExperimentManifest::default().validate().unwrap();
    }

    #[test]
    fn manifest_rejects_unknown_fields() {
        let err = serde_json::from_str::<ExperimentManifest>(r#"{"bogus": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn partial_manifest_fills_defaults() {
        let m: ExperimentManifest = serde_json::from_str(r#"{"seeds": [7], "k_lane": 8}"#).unwrap();
        assert_eq!(m.seeds, vec![7]);
        assert_eq!(m.k_lane, 8);
        assert_eq!(m.m_list, vec![4]);
        m.validate().unwrap();
    }

    #[test]
    fn mode_strings_parse() {
        assert_eq!(parse_mode("naive_identical").unwrap(), LaneMode::NaiveIdentical);
        assert_eq!(parse_mode("naive_jittered").unwrap(), LaneMode::NaiveJitteredEntry);
        assert_eq!(
            parse_mode("partitioned:0.5").unwrap(),
            LaneMode::Partitioned { alpha: 0.5 }
        );
        assert_eq!(
            parse_mode("partitioned").unwrap(),
            LaneMode::Partitioned { alpha: 1.0 }
        );
        assert!(parse_mode("partitioned:1.5").is_err());
        assert!(parse_mode("bogus").is_err());
    }

    #[test]
    fn pool_plan_matches_targets() {
        // Ratio >= 1 keeps alpha = 1 and the full target pool.
        let p = pool_plan(1.5, 4, 16).unwrap();
        assert_eq!((p.k_pool, p.alpha, p.k_ded), (96, 1.0, 16));
        let p = pool_plan(1.0, 4, 16).unwrap();
        assert_eq!((p.k_pool, p.alpha, p.k_ded), (64, 1.0, 16));
        // Ratio < 1 lowers the dedicated quota to the nearest coverage.
        let p = pool_plan(0.8, 4, 16).unwrap();
        assert_eq!(p.k_ded, 12); // round((51 - 16) / 3)
        assert_eq!(p.k_pool, 4 * 12 + 4);
        let cfg = PartitionConfig::new(4, 16, p.alpha, p.k_pool, 0).unwrap();
        assert_eq!(cfg.quotas().k_ded, 12);
        // Pools below a single lane budget cannot run.
        assert!(pool_plan(0.1, 4, 16).is_err());
    }

    #[test]
    fn alpha_midpoint_floors_exactly() {
        for k_lane in [3u32, 7, 10, 16, 33] {
            for k_ded in 0..=k_lane {
                let alpha = alpha_for_k_ded(k_ded, k_lane);
                assert_eq!((alpha * k_lane as f64).floor() as u32, k_ded);
            }
        }
    }
}
