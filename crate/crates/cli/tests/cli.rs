//! End-to-end exercises of the `lanekit` binary on a small synthetic
//! bundle: generate, build, sweep, ablate, and advise, asserting both the
//! headline orderings and byte-level reproducibility of the reports.

use std::path::Path;
use std::process::{Command, Output};

use lanekit::read_csv;

/// Small-but-structured grid so the whole flow stays in CI time: 1,500
/// vectors in 8 clusters, 60 queries, M=4 lanes of 8.
const MANIFEST: &str = r#"{
  "dataset": "toy",
  "synthetic": {
    "n": 1500, "d": 16, "n_clusters": 8, "cluster_std": 2.0, "seed": 0,
    "metric": "L2", "n_queries": 60, "depth": 20, "relevance_depth": 1
  },
  "index": { "family": "hnsw", "graph_degree": 8, "ef_construction": 48 },
  "m_list": [4],
  "k_lane": 8,
  "alphas": [0.0, 0.5, 1.0],
  "pool_ratios": [0.8, 1.0, 1.5],
  "seeds": [7]
}"#;

fn lanekit(data: &Path, out: &Path, manifest: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanekit"))
        .arg("--data")
        .arg(data)
        .arg("--out")
        .arg(out)
        .arg("--manifest")
        .arg(manifest)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// The `value` of the unique row matching the metric/alpha pair.
fn value(rows: &[lanekit::CsvRow], metric: &str, alpha: f64) -> f64 {
    let hits: Vec<_> = rows
        .iter()
        .filter(|r| r.metric == metric && r.alpha == alpha)
        .collect();
    assert_eq!(hits.len(), 1, "expected one row for {metric} @ {alpha}");
    hits[0].value
}

#[test]
fn end_to_end_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("reports");
    let manifest = tmp.path().join("exp.json");
    std::fs::write(&manifest, MANIFEST).unwrap();

    // gen twice: the second run must reproduce the first byte-for-byte.
    ok(&lanekit(&data, &out, &manifest, &["gen"]));
    let bundle = data.join("toy-s7");
    let base_sha = lanekit::datasets::file_sha256_hex(bundle.join("toy-s7.base.fvecs")).unwrap();
    let truth_sha =
        lanekit::datasets::file_sha256_hex(bundle.join("toy-s7.groundtruth.ivecs")).unwrap();
    ok(&lanekit(&data, &out, &manifest, &["gen"]));
    assert_eq!(
        base_sha,
        lanekit::datasets::file_sha256_hex(bundle.join("toy-s7.base.fvecs")).unwrap()
    );

    // groundtruth refresh leaves the oracle unchanged (same inputs).
    ok(&lanekit(&data, &out, &manifest, &["groundtruth"]));
    assert_eq!(
        truth_sha,
        lanekit::datasets::file_sha256_hex(bundle.join("toy-s7.groundtruth.ivecs")).unwrap()
    );

    // build: index + build log appear and rebuilds are deterministic.
    ok(&lanekit(&data, &out, &manifest, &["build"]));
    let idx_sha = lanekit::datasets::file_sha256_hex(bundle.join("hnsw.idx")).unwrap();
    assert!(bundle.join("hnsw.build.json").exists());
    ok(&lanekit(&data, &out, &manifest, &["build"]));
    assert_eq!(
        idx_sha,
        lanekit::datasets::file_sha256_hex(bundle.join("hnsw.idx")).unwrap()
    );

    // sweep: headline orderings plus bit-for-bit reproducibility.
    ok(&lanekit(&data, &out, &manifest, &["sweep"]));
    let sweep_bytes = std::fs::read(out.join("sweep.csv")).unwrap();
    let rows = read_csv(out.join("sweep.csv")).unwrap();
    let r0 = value(&rows, "partitioned/recall@10", 0.0);
    let r1 = value(&rows, "partitioned/recall@10", 1.0);
    let single = value(&rows, "single/recall@10", 1.0);
    assert!(r1 > r0, "alpha=1 recall {r1} must beat alpha=0 recall {r0}");
    assert_eq!(r1, single, "fully dedicated partition matches the single search");
    assert_eq!(value(&rows, "partitioned/overlap_rho", 0.0), 1.0);
    assert_eq!(value(&rows, "partitioned/overlap_rho", 1.0), 0.0);
    assert_eq!(value(&rows, "naive_identical/overlap_rho", 0.0), 1.0);
    // Identical lanes: the gain model's prediction is exact.
    assert_eq!(value(&rows, "gain/predicted", 1.0), 4.0);
    assert_eq!(value(&rows, "gain/measured", 1.0), 4.0);
    assert!(out.join("sweep-outcomes.jsonl").exists());
    ok(&lanekit(&data, &out, &manifest, &["sweep"]));
    assert_eq!(sweep_bytes, std::fs::read(out.join("sweep.csv")).unwrap());

    // poolsize: under-pooling exhausts the pool, over-pooling never helps.
    ok(&lanekit(&data, &out, &manifest, &["poolsize"]));
    let rows = read_csv(out.join("poolsize.csv")).unwrap();
    let under_alpha = rows
        .iter()
        .find(|r| r.metric == "poolsize@0.80/k_pool")
        .expect("under-pool row")
        .alpha;
    let k_pool = value(&rows, "poolsize@0.80/k_pool", under_alpha);
    assert_eq!(value(&rows, "poolsize@0.80/union_size", under_alpha), k_pool);
    assert_eq!(value(&rows, "poolsize@1.50/predicted", 1.0), 2.0 / 3.0);
    let exact = value(&rows, "poolsize@1.00/recall@10", 1.0);
    let over = value(&rows, "poolsize@1.50/recall@10", 1.0);
    assert!(exact >= over, "matched pool {exact} must not lose to over-pool {over}");

    // lanescale: alpha=1 equals the per-M single baseline; alpha=0 does
    // not improve as lanes are added.
    ok(&lanekit(&data, &out, &manifest, &["lanescale", "--lanes", "2,4"]));
    let rows = read_csv(out.join("lanescale.csv")).unwrap();
    for m in [2u32, 4] {
        let pick = |metric: &str, alpha: f64| {
            rows.iter()
                .find(|r| r.m == m && r.metric == metric && r.alpha == alpha)
                .unwrap_or_else(|| panic!("missing {metric} for M={m}"))
                .value
        };
        assert_eq!(pick("partitioned/recall@10", 1.0), pick("single/recall@10", 1.0));
    }
    let a0 = |m: u32| {
        rows.iter()
            .find(|r| r.m == m && r.metric == "partitioned/recall@10" && r.alpha == 0.0)
            .unwrap()
            .value
    };
    assert!(a0(2) >= a0(4), "alpha=0 recall must not rise with lane count");

    // rho0 / recommend: identical lanes pin the whole advice chain.
    let out_rho = lanekit(&data, &out, &manifest, &["rho0"]);
    ok(&out_rho);
    let v: serde_json::Value =
        serde_json::from_slice(&out_rho.stdout).expect("rho0 prints JSON");
    assert_eq!(v["rho0_mean"], 1.0);
    let out_rec = lanekit(&data, &out, &manifest, &["recommend"]);
    ok(&out_rec);
    let v: serde_json::Value =
        serde_json::from_slice(&out_rec.stdout).expect("recommend prints JSON");
    assert_eq!(v["rho0_mean"], 1.0);
    assert_eq!(v["recommended_alpha"], 1.0);
    assert_eq!(v["predicted_gain"], 4.0);

    // microbench: one row per grid point, sane fit fields.
    let out_mb = lanekit(&data, &out, &manifest, &["microbench", "--trials", "20"]);
    ok(&out_mb);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("microbench.json")).unwrap())
            .unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 5);
    assert!(report["fit"]["slope"].as_f64().unwrap().is_finite());
}

#[test]
fn missing_inputs_fail_with_guidance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("reports");
    let manifest = tmp.path().join("exp.json");
    std::fs::write(&manifest, MANIFEST).unwrap();

    // sweep before gen: must fail and point at the missing step.
    let res = lanekit(&data, &out, &manifest, &["sweep"]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("lanekit gen"), "stderr was: {stderr}");

    // gen then sweep without build: same idea, next step.
    ok(&lanekit(&data, &out, &manifest, &["gen"]));
    let res = lanekit(&data, &out, &manifest, &["sweep"]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("lanekit build"), "stderr was: {stderr}");

    // A malformed manifest is rejected up front.
    std::fs::write(&manifest, r#"{"alphas": [2.0]}"#).unwrap();
    let res = lanekit(&data, &out, &manifest, &["sweep"]);
    assert!(!res.status.success());
}
