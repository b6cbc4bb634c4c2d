//! Overlap and quality measurement: Jaccard overlap, recall/hit/MRR,
//! aggregate reports, the flat CSV row emitted by every experiment, and an
//! offline audit over planner assignment logs.
//!
//! Conventions: all aggregate standard deviations are population standard
//! deviations (`ddof = 0`), and every rate is reported in `[0, 1]` rather
//! than as a percentage.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PartitionConfig;
use crate::error::{Error, Result};
use crate::index::IndexHandle;
use crate::lanes::{run_query, LaneMode, StragglerPolicy};
use crate::planner::AssignmentRecord;
use crate::scalar::Scalar;

/// Jaccard overlap `|intersection| / |union|` across two or more sets.
///
/// Requires at least two sets, all nonempty: overlap of fewer sets is not
/// defined here, and an empty set would silently zero the intersection.
pub fn jaccard_overlap(sets: &[BTreeSet<u64>]) -> Result<f64> {
    if sets.len() < 2 {
        return Err(Error::invalid("jaccard overlap needs at least two sets"));
    }
    if sets.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid("jaccard overlap over an empty set"));
    }
    let mut inter = sets[0].clone();
    let mut union = sets[0].clone();
    for set in &sets[1..] {
        inter = inter.intersection(set).copied().collect();
        union.extend(set.iter().copied());
    }
    Ok(inter.len() as f64 / union.len() as f64)
}

/// Recall@k: `|result[..k] ∩ truth[..k]| / k`.
///
/// `truth` must be the exact ranking with at least `k` entries; `result`
/// may be shorter than `k` (missing entries simply cannot match).
pub fn recall_at_k(result: &[u64], truth: &[u64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("recall@k needs k >= 1"));
    }
    if truth.len() < k {
        return Err(Error::invalid(format!(
            "ground truth holds {} entries, need {k}",
            truth.len()
        )));
    }
    let truth_set: BTreeSet<u64> = truth[..k].iter().copied().collect();
    let hits = result
        .iter()
        .take(k)
        .filter(|id| truth_set.contains(id))
        .count();
    Ok(hits as f64 / k as f64)
}

/// Hit@k: does any of the first `k` results appear in the relevant set?
///
/// An empty relevant set is an error so callers exclude the query from
/// aggregates instead of scoring it zero.
pub fn hit_at_k(result: &[u64], relevant: &BTreeSet<u64>, k: usize) -> Result<bool> {
    if k == 0 {
        return Err(Error::invalid("hit@k needs k >= 1"));
    }
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet);
    }
    Ok(result.iter().take(k).any(|id| relevant.contains(id)))
}

/// MRR@k: reciprocal rank of the first relevant result within the top `k`,
/// or `0.0` when none appears. Ranks are 1-based.
pub fn mrr_at_k(result: &[u64], relevant: &BTreeSet<u64>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("mrr@k needs k >= 1"));
    }
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet);
    }
    Ok(result
        .iter()
        .take(k)
        .position(|id| relevant.contains(id))
        .map_or(0.0, |pos| 1.0 / (pos + 1) as f64))
}

/// Population mean and standard deviation (`ddof = 0`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Least-squares line fit `y = slope * x + intercept` with `R^2`.
///
/// Degenerate inputs (fewer than two points, constant `x`) are errors; a
/// constant `y` fits exactly (`R^2 = 1`) since the residuals vanish.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("linear fit needs >= 2 paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("linear fit over constant x"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Baseline overlap measurement over a query set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverlapStats {
    pub m: u32,
    pub k_lane: u32,
    /// Per-query Jaccard overlap across lanes.
    pub per_query_rho: Vec<f64>,
    /// Per-query distinct union size `U0`.
    pub per_query_u0: Vec<u32>,
    pub rho0_mean: f64,
    pub rho0_std: f64,
    pub u0_mean: f64,
    pub u0_std: f64,
}

/// Measure the baseline overlap `rho_0` (and union size `U0`) of a lane
/// mode over a query set, with every lane counted.
///
/// With deterministic backends, `NaiveIdentical` reports `rho_0 = 1` and
/// `U0 = k_lane` exactly; the jittered-entry and partitioned modes sit in
/// between depending on how decorrelated the lanes are.
pub fn measure_rho0<T: Scalar>(
    idx: &IndexHandle<T>,
    queries: &[Vec<T>],
    cfg: &PartitionConfig,
    mode: LaneMode,
) -> Result<OverlapStats> {
    if queries.is_empty() {
        return Err(Error::invalid("rho_0 measurement needs >= 1 query"));
    }
    let mut per_query_rho = Vec::with_capacity(queries.len());
    let mut per_query_u0 = Vec::with_capacity(queries.len());
    for (qi, query) in queries.iter().enumerate() {
        let cfg = cfg.clone().with_query_seed(crate::prf::derive_query_seed(
            cfg.query_seed(),
            qi as u64,
        ));
        let out = run_query(
            idx,
            query,
            &cfg,
            mode,
            StragglerPolicy::WaitAll,
            cfg.k_lane() as usize,
        )?;
        per_query_rho.push(out.merged.overlap_rho);
        per_query_u0.push(out.merged.union_size as u32);
    }
    let (rho0_mean, rho0_std) = mean_std(&per_query_rho);
    let u0s: Vec<f64> = per_query_u0.iter().map(|&u| u as f64).collect();
    let (u0_mean, u0_std) = mean_std(&u0s);
    Ok(OverlapStats {
        m: cfg.m(),
        k_lane: cfg.k_lane(),
        per_query_rho,
        per_query_u0,
        rho0_mean,
        rho0_std,
        u0_mean,
        u0_std,
    })
}

/// One aggregate quality number with its per-seed breakdown.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QualityReport {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// `(seed, value)` pairs behind the aggregate.
    pub per_seed: Vec<(u64, f64)>,
}

impl QualityReport {
    pub fn from_per_seed(name: impl Into<String>, per_seed: Vec<(u64, f64)>) -> Self {
        let values: Vec<f64> = per_seed.iter().map(|&(_, v)| v).collect();
        let (mean, std) = mean_std(&values);
        QualityReport {
            name: name.into(),
            mean,
            std,
            per_seed,
        }
    }
}

/// The flat row every experiment emits; one metric value per line.
///
/// Column order is fixed: `dataset,index,M,k_lane,alpha,seed,metric,value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub dataset: String,
    pub index: String,
    #[serde(rename = "M")]
    pub m: u32,
    pub k_lane: u32,
    pub alpha: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Serialize rows to CSV with the fixed header.
pub fn csv_to_string(rows: &[CsvRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::data(e.to_string()))
}

/// Write rows to `path` as CSV with the fixed header.
pub fn write_csv(path: impl AsRef<Path>, rows: &[CsvRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read rows back from a CSV produced by [`write_csv`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Offline disjointness audit over a planner assignment log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentAudit {
    pub queries: usize,
    pub lanes_checked: usize,
    /// Largest pairwise id-set intersection across lanes of one query.
    pub max_pairwise_overlap: usize,
    /// True when every query's lanes are pairwise disjoint (full
    /// dedication logs must audit as disjoint).
    pub all_disjoint: bool,
}

/// Re-check lane disjointness from a JSONL stream of assignment records.
///
/// The audit is independent of the planner: it trusts nothing but the
/// logged id lists, so a planner bug that leaked duplicate ids across
/// lanes shows up here even if the in-process invariants were bypassed.
pub fn audit_assignments(reader: impl BufRead) -> Result<AssignmentAudit> {
    let mut by_query: BTreeMap<u64, Vec<AssignmentRecord>> = BTreeMap::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AssignmentRecord = serde_json::from_str(&line).map_err(|e| {
            Error::data(format!("assignment log line {}: {e}", line_no + 1))
        })?;
        by_query.entry(record.query_id).or_default().push(record);
    }
    let mut lanes_checked = 0;
    let mut max_pairwise_overlap = 0;
    for records in by_query.values() {
        lanes_checked += records.len();
        let sets: Vec<BTreeSet<u64>> = records
            .iter()
            .map(|r| r.ids.iter().copied().collect())
            .collect();
        for i in 0..sets.len() {
            for j in (i + 1)..sets.len() {
                let overlap = sets[i].intersection(&sets[j]).count();
                max_pairwise_overlap = max_pairwise_overlap.max(overlap);
            }
        }
    }
    Ok(AssignmentAudit {
        queries: by_query.len(),
        lanes_checked,
        max_pairwise_overlap,
        all_disjoint: max_pairwise_overlap == 0,
    })
}
