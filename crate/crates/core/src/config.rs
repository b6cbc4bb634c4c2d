//! Partition configuration and derived budget quantities.
//!
//! A [`PartitionConfig`] fixes how one query's candidate budget is split
//! across `M` parallel lanes: each lane gets `k_lane` candidates, a fraction
//! `alpha` of which come from lane-dedicated pool positions and the rest from
//! a suffix shared by every lane. Validation happens once, at construction;
//! everything downstream can assume feasibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Budget split derived from a partition configuration.
///
/// `k_ded + k_shr == k_lane` always holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quotas {
    /// Dedicated per-lane quota, `floor(alpha * k_lane)`.
    pub k_ded: u32,
    /// Shared per-lane quota, `k_lane - k_ded`.
    pub k_shr: u32,
    /// Total budget across lanes, `M * k_lane`.
    pub k_total: u32,
}

/// Homogeneous lane configuration: `M` lanes with equal budgets.
///
/// Fields are private so a value can only exist in a validated state; use the
/// accessors or [`PartitionConfig::quotas`]. The feasibility requirement
/// `K_pool >= M * k_ded + k_shr` is checked here and never clamped: a pool
/// too small for the requested dedication is a caller error, because the
/// coverage law assumes every dedicated position exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(into = "ConfigJson")]
pub struct PartitionConfig {
    m: u32,
    k_lane: u32,
    alpha: f64,
    k_pool: u32,
    query_seed: u64,
}

/// Serde mirror of [`PartitionConfig`] with the external key spelling.
///
/// The JSON contract uses upper-case `M` and `K_pool`; unknown keys are
/// rejected so silently misspelled parameters cannot slip into experiments.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigJson {
    #[serde(rename = "M")]
    m: u32,
    k_lane: u32,
    alpha: f64,
    #[serde(rename = "K_pool")]
    k_pool: u32,
    query_seed: u64,
}

impl From<PartitionConfig> for ConfigJson {
    fn from(cfg: PartitionConfig) -> Self {
        ConfigJson {
            m: cfg.m,
            k_lane: cfg.k_lane,
            alpha: cfg.alpha,
            k_pool: cfg.k_pool,
            query_seed: cfg.query_seed,
        }
    }
}

impl<'de> Deserialize<'de> for PartitionConfig {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = ConfigJson::deserialize(deserializer)?;
        PartitionConfig::new(raw.m, raw.k_lane, raw.alpha, raw.k_pool, raw.query_seed)
            .map_err(serde::de::Error::custom)
    }
}

/// Compute `floor(alpha * k_lane)` robustly.
///
/// `alpha` is validated to lie in `[0, 1]`, so the product is at most
/// `k_lane` and the cast cannot overflow. An explicit min guards against
/// `alpha = 1.0` rounding artifacts.
fn floor_ded(alpha: f64, k_lane: u32) -> u32 {
    ((alpha * f64::from(k_lane)).floor() as u32).min(k_lane)
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

impl PartitionConfig {
    /// Validate and construct a configuration.
    ///
    /// Errors if `m == 0`, `k_lane == 0`, `alpha` is outside `[0, 1]` (or
    /// NaN), or the pool cannot cover the dedicated positions plus the shared
    /// suffix (`K_pool < M * k_ded + k_shr`).
    pub fn new(m: u32, k_lane: u32, alpha: f64, k_pool: u32, query_seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("M (lane count) must be >= 1"));
        }
        if k_lane == 0 {
            return Err(Error::invalid("k_lane must be >= 1"));
        }
        validate_alpha(alpha)?;
        let k_ded = floor_ded(alpha, k_lane);
        let k_shr = k_lane - k_ded;
        let required = m
            .checked_mul(k_ded)
            .and_then(|v| v.checked_add(k_shr))
            .ok_or_else(|| Error::invalid("M * k_ded overflows u32"))?;
        if k_pool < required {
            return Err(Error::InfeasiblePartition {
                k_pool,
                m,
                k_ded,
                k_shr,
                required,
            });
        }
        Ok(PartitionConfig {
            m,
            k_lane,
            alpha,
            k_pool,
            query_seed,
        })
    }

    /// Lane count `M`.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Per-lane candidate budget.
    pub fn k_lane(&self) -> u32 {
        self.k_lane
    }

    /// Dedicated fraction in `[0, 1]`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Pool size `K_pool`.
    pub fn k_pool(&self) -> u32 {
        self.k_pool
    }

    /// Per-query permutation seed.
    pub fn query_seed(&self) -> u64 {
        self.query_seed
    }

    /// Total budget `M * k_lane`.
    pub fn k_total(&self) -> u32 {
        self.m * self.k_lane
    }

    /// Derived budget split; see [`derive_quotas`].
    pub fn quotas(&self) -> Quotas {
        derive_quotas(self)
    }

    /// Same configuration with a different per-query seed.
    ///
    /// Seed changes cannot affect feasibility, so no re-validation is needed.
    pub fn with_query_seed(mut self, query_seed: u64) -> Self {
        self.query_seed = query_seed;
        self
    }

    /// Same lanes and pool with a different dedication fraction.
    ///
    /// Re-validates: raising `alpha` raises the dedicated demand and can make
    /// a previously feasible pool infeasible.
    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        PartitionConfig::new(self.m, self.k_lane, alpha, self.k_pool, self.query_seed)
    }

    /// Parse from a JSON document with keys
    /// `{"M", "k_lane", "alpha", "K_pool", "query_seed"}`.
    ///
    /// Unknown keys are rejected, and the parsed values go through the same
    /// validation as [`PartitionConfig::new`].
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Serialize to the canonical JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialization cannot fail")
    }
}

/// Compute `(k_ded, k_shr, k_total)` for a validated configuration.
pub fn derive_quotas(cfg: &PartitionConfig) -> Quotas {
    let k_ded = floor_ded(cfg.alpha, cfg.k_lane);
    Quotas {
        k_ded,
        k_shr: cfg.k_lane - k_ded,
        k_total: cfg.m * cfg.k_lane,
    }
}

/// Per-lane quota for one lane of a heterogeneous configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LaneQuota {
    /// This lane's budget `k_lane_r`.
    pub k_lane: u32,
    /// Dedicated quota `floor(alpha * k_lane_r)`.
    pub k_ded: u32,
    /// Shared quota `k_lane_r - k_ded_r`.
    pub k_shr: u32,
}

/// Lane configuration with unequal per-lane budgets.
///
/// Each lane `r` gets `k_ded_r = floor(alpha * k_lane_r)` dedicated
/// positions; all lanes backfill from one shared suffix, so feasibility needs
/// `K_pool >= sum_r k_ded_r + max_r k_shr_r` (the suffix is common, so only
/// the largest shared demand counts).
#[derive(Clone, Debug, PartialEq)]
pub struct HeterogeneousPartitionConfig {
    lane_budgets: Vec<u32>,
    alpha: f64,
    k_pool: u32,
    query_seed: u64,
}

impl HeterogeneousPartitionConfig {
    /// Validate and construct; mirrors [`PartitionConfig::new`].
    pub fn new(lane_budgets: Vec<u32>, alpha: f64, k_pool: u32, query_seed: u64) -> Result<Self> {
        if lane_budgets.is_empty() {
            return Err(Error::invalid("lane_budgets must contain at least one lane"));
        }
        if lane_budgets.iter().any(|&b| b == 0) {
            return Err(Error::invalid("every lane budget must be >= 1"));
        }
        validate_alpha(alpha)?;
        let mut sum_ded: u64 = 0;
        let mut max_shr: u64 = 0;
        for &b in &lane_budgets {
            let k_ded = floor_ded(alpha, b);
            sum_ded += u64::from(k_ded);
            max_shr = max_shr.max(u64::from(b - k_ded));
        }
        let required = sum_ded + max_shr;
        if u64::from(k_pool) < required {
            return Err(Error::invalid(format!(
                "infeasible heterogeneous partition: K_pool={k_pool} < sum(k_ded)+max(k_shr)={required}"
            )));
        }
        Ok(HeterogeneousPartitionConfig {
            lane_budgets,
            alpha,
            k_pool,
            query_seed,
        })
    }

    /// Number of lanes.
    pub fn m(&self) -> u32 {
        self.lane_budgets.len() as u32
    }

    /// Per-lane budgets `k_lane_r`.
    pub fn lane_budgets(&self) -> &[u32] {
        &self.lane_budgets
    }

    /// Dedicated fraction.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Pool size.
    pub fn k_pool(&self) -> u32 {
        self.k_pool
    }

    /// Per-query permutation seed.
    pub fn query_seed(&self) -> u64 {
        self.query_seed
    }

    /// Total budget `sum_r k_lane_r`.
    pub fn k_total(&self) -> u32 {
        self.lane_budgets.iter().sum()
    }

    /// Quotas for every lane in lane-id order.
    pub fn lane_quotas(&self) -> Vec<LaneQuota> {
        self.lane_budgets
            .iter()
            .map(|&b| {
                let k_ded = floor_ded(self.alpha, b);
                LaneQuota {
                    k_lane: b,
                    k_ded,
                    k_shr: b - k_ded,
                }
            })
            .collect()
    }

    /// Total dedicated demand `sum_r k_ded_r` (start of the shared suffix).
    pub fn total_dedicated(&self) -> u32 {
        self.lane_budgets
            .iter()
            .map(|&b| floor_ded(self.alpha, b))
            .sum()
    }
}
