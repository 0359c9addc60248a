//! Declarative Monte Carlo experiments: validated configs, parallel
//! replication with derived seeds, statistical gates, and CSV/JSON reporting.
//!
//! An [`ExperimentResult`] is a pure function of (config, crate version):
//! replicate streams are derived from the master seed, ensemble reductions use
//! pairwise summation, and output files are byte-stable across reruns.

mod presets;
mod runs;

pub use presets::{preset, preset_names};

use crate::error::{Error, Result};
use crate::sojourn::Normalization;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// spatial cell size
    pub h: f64,
    /// time step
    pub dt: f64,
    /// number of time steps
    pub n_t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SamplerConfig {
    Circulant { pad_factor: usize },
    Cholesky,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig::Circulant { pad_factor: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Gaussian limit of the excursion sojourn statistic (Hermite rank 1).
    CltM1 {
        model: crate::covariance::CovarianceModel,
        body: crate::geometry::ConvexBody,
        grid: GridConfig,
        u: f64,
        replicates: usize,
        #[serde(default)]
        sampler: SamplerConfig,
    },
    /// Reduction-principle gap decay for ranks 1 and 2 plus the rank-2
    /// statistic correlation.
    ReductionM2 {
        model: crate::covariance::CovarianceModel,
        body: crate::geometry::ConvexBody,
        h: f64,
        dt: f64,
        /// time-step counts, strictly increasing; stats are computed on
        /// prefixes of one simulation at the largest
        t_steps: Vec<usize>,
        u: f64,
        replicates: usize,
        #[serde(default)]
        sampler: SamplerConfig,
    },
    /// Rank-2 limit: Y2 ensemble against the discretized second-chaos sampler.
    RosenblattM2 {
        alpha: f64,
        spatial: crate::covariance::SpatialCovariance,
        body: crate::geometry::ConvexBody,
        grid: GridConfig,
        replicates: usize,
        sampler_draws: usize,
        #[serde(default)]
        frequency_grid: crate::rosenblatt::FrequencyGrid,
        #[serde(default)]
        sampler: SamplerConfig,
    },
    /// Slow-growth diagnostic and variance-growth exponent for the
    /// nonseparable covariance family.
    GneitingVariance {
        cases: Vec<GneitingCase>,
        /// dyadic T grid for the growth diagnostic
        diagnostic_t: Vec<f64>,
        delta: f64,
        /// dyadic T grid for the exponent fit
        fit_t: Vec<f64>,
        min_exponent: f64,
    },
    /// Closed-form equivalences and Monte Carlo agreement of the pair-distance
    /// densities.
    GeometryCheck {
        ball_dims: Vec<usize>,
        grid_points: usize,
        mc_bodies: Vec<crate::geometry::ConvexBody>,
        mc_pairs: u64,
        mc_bins: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GneitingCase {
    pub model: crate::covariance::CovarianceModel,
    pub body: crate::geometry::ConvexBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

fn default_normalization() -> Normalization {
    Normalization::TheoremConsistent
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Check every module precondition up front with named diagnostics.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ExperimentKind::CltM1 { model, grid, replicates, .. } => {
                model.validate()?;
                check_grid(grid)?;
                check_replicates(*replicates)?;
            }
            ExperimentKind::ReductionM2 { model, h, dt, t_steps, u, replicates, .. } => {
                model.validate()?;
                if !(*h > 0.0 && *dt > 0.0) {
                    return Err(Error::Config(format!("bad grid: h={h}, dt={dt}")));
                }
                if t_steps.len() < 2 || t_steps.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(
                        "t_steps must be strictly increasing with >= 2 entries".into(),
                    ));
                }
                if !(*u > 0.0) {
                    return Err(Error::Config(format!(
                        "u = {u}: the rank-2 modulus statistics need u > 0"
                    )));
                }
                check_replicates(*replicates)?;
            }
            ExperimentKind::RosenblattM2 { alpha, spatial, grid, replicates, sampler_draws, .. } => {
                if !(*alpha > 0.0 && *alpha < 0.5) {
                    return Err(Error::Config(format!("alpha = {alpha} outside (0, 1/2)")));
                }
                spatial.validate()?;
                check_grid(grid)?;
                check_replicates(*replicates)?;
                if *sampler_draws < 100 {
                    return Err(Error::Config("sampler_draws must be >= 100".into()));
                }
            }
            ExperimentKind::GneitingVariance { cases, diagnostic_t, delta, fit_t, .. } => {
                if cases.is_empty() {
                    return Err(Error::Config("no covariance cases".into()));
                }
                for c in cases {
                    c.model.validate()?;
                }
                if diagnostic_t.len() < 3 || fit_t.len() < 4 {
                    return Err(Error::Config("need >= 3 diagnostic and >= 4 fit T values".into()));
                }
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::Config(format!("delta = {delta} outside (0, 1)")));
                }
            }
            ExperimentKind::GeometryCheck { ball_dims, grid_points, mc_pairs, mc_bins, .. } => {
                if ball_dims.iter().any(|&d| d < 2) {
                    return Err(Error::Config("ball dims must be >= 2".into()));
                }
                if *grid_points < 10 || *mc_bins < 2 || *mc_pairs < 10_000 {
                    return Err(Error::Config("geometry check sizes too small".into()));
                }
            }
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }
}

fn check_grid(grid: &GridConfig) -> Result<()> {
    if !(grid.h > 0.0 && grid.dt > 0.0) {
        return Err(Error::Config(format!("bad grid: h={}, dt={}", grid.h, grid.dt)));
    }
    if grid.n_t < 2 {
        return Err(Error::Config("n_t must be >= 2".into()));
    }
    Ok(())
}

fn check_replicates(r: usize) -> Result<()> {
    if r < 30 {
        return Err(Error::Config(format!("replicates = {r}: need >= 30")));
    }
    Ok(())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Pass/fail record for one acceptance gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateCheck {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub requirement: String,
}

impl GateCheck {
    pub fn new(name: &str, passed: bool, observed: f64, requirement: impl Into<String>) -> Self {
        GateCheck {
            name: name.to_string(),
            passed,
            observed,
            requirement: requirement.into(),
        }
    }
}

/// One per-replicate statistics row (the ensemble CSV schema).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: u64,
    pub seed: u64,
    pub t: f64,
    pub u: f64,
    pub m1: f64,
    pub m2: f64,
    pub x1_tc: f64,
    pub x1_pl: f64,
    pub x2_tc: f64,
    pub x2_pl: f64,
    pub y2: f64,
    pub eta_1: f64,
    pub eta_2: f64,
    pub eta_3: f64,
    pub eta_4: f64,
}

/// A kind-specific numeric table destined for CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub elapsed_s: f64,
    pub gates: Vec<GateCheck>,
    pub summary: serde_json::Value,
    #[serde(skip)]
    pub replicate_rows: Vec<ReplicateRow>,
    #[serde(skip)]
    pub tables: Vec<NamedTable>,
}

impl ExperimentResult {
    pub fn all_passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    /// One pass/fail line per gate.
    pub fn gate_report(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            out.push_str(&format!(
                "[{}] {}: observed {:.6e} ({})\n",
                if g.passed { "PASS" } else { "FAIL" },
                g.name,
                g.observed,
                g.requirement
            ));
        }
        out
    }

    /// Write `<name>-summary.json`, `<name>-replicates.csv` (when the
    /// experiment produced ensemble rows), and one CSV per named table.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let summary_path = dir.join(format!("{}-summary.json", self.name));
        let json = serde_json::to_string_pretty(self).expect("result serializes");
        std::fs::write(summary_path, json + "\n")?;
        if !self.replicate_rows.is_empty() {
            let path = dir.join(format!("{}-replicates.csv", self.name));
            let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
            w.write_record([
                "replicate", "seed", "t", "u", "m1", "m2", "x1_tc", "x1_pl", "x2_tc", "x2_pl",
                "y2", "eta_1", "eta_2", "eta_3", "eta_4",
            ])
            .map_err(csv_err)?;
            for r in &self.replicate_rows {
                w.write_record([
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    fmt(r.t),
                    fmt(r.u),
                    fmt(r.m1),
                    fmt(r.m2),
                    fmt(r.x1_tc),
                    fmt(r.x1_pl),
                    fmt(r.x2_tc),
                    fmt(r.x2_pl),
                    fmt(r.y2),
                    fmt(r.eta_1),
                    fmt(r.eta_2),
                    fmt(r.eta_3),
                    fmt(r.eta_4),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
        for t in &self.tables {
            let path = dir.join(format!("{}-{}.csv", self.name, t.name));
            let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
            w.write_record(&t.header).map_err(csv_err)?;
            for row in &t.rows {
                w.write_record(row.iter().map(|v| fmt(*v))).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

pub(crate) fn fmt(v: f64) -> String {
    // shortest round-trip representation; byte-stable across runs
    let mut buf = ryu_like(v);
    if buf.is_empty() {
        buf = "0".into();
    }
    buf
}

fn ryu_like(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv write: {e}"))
}

/// Run a validated experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let started = std::time::Instant::now();
    let mut result = match &config.kind {
        ExperimentKind::CltM1 { .. } => runs::run_clt(config)?,
        ExperimentKind::ReductionM2 { .. } => runs::run_reduction(config)?,
        ExperimentKind::RosenblattM2 { .. } => runs::run_rosenblatt(config)?,
        ExperimentKind::GneitingVariance { .. } => runs::run_gneiting(config)?,
        ExperimentKind::GeometryCheck { .. } => runs::run_geometry(config)?,
    };
    result.elapsed_s = started.elapsed().as_secs_f64();
    result.config_hash = config.hash();
    result.version = env!("CARGO_PKG_VERSION").to_string();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_hash_stability() {
        for name in preset_names() {
            let cfg = preset(name, 1234).unwrap();
            let json = cfg.to_json();
            let back = ExperimentConfig::from_json(&json).unwrap();
            assert_eq!(cfg, back, "round trip failed for {name}");
            assert_eq!(cfg.hash(), back.hash());
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = preset("clt-m1", 1).unwrap();
        if let ExperimentKind::CltM1 { replicates, .. } = &mut cfg.kind {
            *replicates = 5;
        }
        assert!(cfg.validate().is_err());

        let mut cfg2 = preset("reduction-m2", 1).unwrap();
        if let ExperimentKind::ReductionM2 { u, .. } = &mut cfg2.kind {
            *u = 0.0;
        }
        assert!(cfg2.validate().is_err());

        assert!(preset("no-such-preset", 1).is_err());
    }
}
