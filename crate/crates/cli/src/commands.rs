//! Subcommand implementations: JSON config in, CSV/JSON files out.

use crate::{Common, ExperimentArgs};
use serde::{Deserialize, Serialize};
use sojourn_core::covariance::{
    spatial_spectral_density, temporal_spectral_density, CovarianceModel, SpaceTimeCov,
    SpatialCovariance,
};
use sojourn_core::error::{Error, Result};
use sojourn_core::experiment::{preset, run_experiment, ExperimentConfig};
use sojourn_core::fieldsim::{build_grid, simulate_cholesky, CirculantSampler};
use sojourn_core::geometry::{distance_density, distance_density_mc, ConvexBody, DistanceDensity};
use sojourn_core::rosenblatt::{rosenblatt_cumulants, RosenblattParams, RosenblattSampler};
use sojourn_core::variance::{scaling_exponent_fit, QuadSpec};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub enum Outcome {
    Success,
    GateFailure,
}

fn load_config<T: for<'de> Deserialize<'de>>(common: &Common) -> Result<T> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <file> is required for this subcommand".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("csv open {}: {e}", path.display())))?;
    w.write_record(header)
        .map_err(|e| Error::Config(format!("csv write: {e}")))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v}")))
            .map_err(|e| Error::Config(format!("csv write: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DensityConfig {
    body: ConvexBody,
    seed: u64,
    #[serde(default = "default_pairs")]
    mc_pairs: u64,
    #[serde(default = "default_bins")]
    mc_bins: usize,
}

fn default_pairs() -> u64 {
    1_000_000
}
fn default_bins() -> usize {
    50
}

pub fn density(common: &Common) -> Result<Outcome> {
    let cfg: DensityConfig = load_config(common)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let table = distance_density_mc(&cfg.body, cfg.mc_pairs, cfg.mc_bins, seed)?;
    let mut rows = Vec::with_capacity(cfg.mc_bins);
    for (i, &mc) in table.density.iter().enumerate() {
        let z = 0.5 * (table.bin_edges[i] + table.bin_edges[i + 1]);
        let closed = distance_density(&cfg.body, z).unwrap_or(f64::NAN);
        rows.push(vec![z, closed, mc, table.std_error[i]]);
    }
    let path = out_dir(common).join("density.csv");
    write_csv(&path, &["z", "psi_closed_form", "psi_mc", "mc_stderr"], &rows)?;
    println!("wrote {}", path.display());
    Ok(Outcome::Success)
}

#[derive(Serialize, Deserialize)]
struct CovarianceCliConfig {
    model: CovarianceModel,
    z_max: f64,
    tau_max: f64,
    #[serde(default = "default_grid_n")]
    n_z: usize,
    #[serde(default = "default_grid_n")]
    n_tau: usize,
    /// frequencies for the temporal spectral density (separable models)
    #[serde(default)]
    mu_list: Vec<f64>,
    /// radial frequencies for the spatial spectral density
    #[serde(default)]
    omega_list: Vec<f64>,
    #[serde(default = "default_dim")]
    spatial_dim: usize,
}

fn default_grid_n() -> usize {
    64
}
fn default_dim() -> usize {
    1
}

pub fn covariance(common: &Common) -> Result<Outcome> {
    let cfg: CovarianceCliConfig = load_config(common)?;
    cfg.model.validate()?;
    let dir = out_dir(common);
    let mut rows = Vec::with_capacity(cfg.n_z * cfg.n_tau);
    for i in 0..cfg.n_z {
        let z = cfg.z_max * i as f64 / (cfg.n_z - 1).max(1) as f64;
        for j in 0..cfg.n_tau {
            let tau = cfg.tau_max * j as f64 / (cfg.n_tau - 1).max(1) as f64;
            rows.push(vec![z, tau, cfg.model.eval(z, tau)]);
        }
    }
    write_csv(&dir.join("covariance.csv"), &["z", "tau", "c"], &rows)?;

    if !cfg.mu_list.is_empty() {
        let mut ft = Vec::new();
        for &mu in &cfg.mu_list {
            let p = temporal_spectral_density(&cfg.model, mu)?;
            ft.push(vec![mu, p.value, p.tauberian.unwrap_or(f64::NAN)]);
        }
        write_csv(&dir.join("spectral-temporal.csv"), &["mu", "f_t", "tauberian"], &ft)?;
    }
    if !cfg.omega_list.is_empty() {
        let spatial = match &cfg.model {
            CovarianceModel::Separable { spatial, .. } => spatial.clone(),
            _ => {
                return Err(Error::Config(
                    "spatial spectral density needs the separable variant".into(),
                ))
            }
        };
        let mut fs = Vec::new();
        for &w in &cfg.omega_list {
            fs.push(vec![w, spatial_spectral_density(&spatial, cfg.spatial_dim, w)?]);
        }
        write_csv(&dir.join("spectral-spatial.csv"), &["omega", "f_s"], &fs)?;
    }
    println!("wrote covariance tables to {}", dir.display());
    Ok(Outcome::Success)
}

#[derive(Serialize, Deserialize)]
struct VarianceCliConfig {
    model: CovarianceModel,
    body: ConvexBody,
    n: u32,
    t_list: Vec<f64>,
}

pub fn variance(common: &Common) -> Result<Outcome> {
    let cfg: VarianceCliConfig = load_config(common)?;
    let psi = DistanceDensity::closed_form(cfg.body.clone())?;
    let fit = scaling_exponent_fit(&cfg.model, &psi, cfg.n, &cfg.t_list, &QuadSpec::default())?;
    let mut rows = Vec::new();
    for (&t, &s) in fit.t_list.iter().zip(&fit.sigma2) {
        let predicted = (fit.intercept + fit.reference_exponent * t.ln()).exp();
        rows.push(vec![t, s, predicted, s / predicted]);
    }
    let path = out_dir(common).join("variance.csv");
    write_csv(&path, &["t", "sigma2", "predicted", "ratio"], &rows)?;
    println!(
        "fitted exponent {:.4} (reference {:.4}, R^2 {:.6}); wrote {}",
        fit.fitted_exponent,
        fit.reference_exponent,
        fit.r_squared,
        path.display()
    );
    Ok(Outcome::Success)
}

#[derive(Serialize, Deserialize)]
struct SimulateConfig {
    model: CovarianceModel,
    body: ConvexBody,
    h: f64,
    dt: f64,
    n_t: usize,
    seed: u64,
    #[serde(default)]
    method: SimMethodConfig,
    #[serde(default)]
    format: OutputFormat,
}

#[derive(Serialize, Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "kebab-case")]
enum SimMethodConfig {
    #[default]
    Circulant,
    Cholesky,
}

#[derive(Serialize, Deserialize, Default, Clone, Copy, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum OutputFormat {
    #[default]
    Csv,
    Binary,
}

pub fn simulate(common: &Common) -> Result<Outcome> {
    let cfg: SimulateConfig = load_config(common)?;
    cfg.model.validate()?;
    let grid = Arc::new(build_grid(&cfg.body, cfg.h, cfg.dt, cfg.n_t)?);
    let seed = common.seed.unwrap_or(cfg.seed);
    let field = match cfg.method {
        SimMethodConfig::Circulant => CirculantSampler::new(&cfg.model, &grid, 2)?.sample(seed),
        SimMethodConfig::Cholesky => simulate_cholesky(&cfg.model, &grid, seed)?,
    };
    let dir = out_dir(common);
    match cfg.format {
        OutputFormat::Csv => {
            let d = grid.body.dim();
            let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
            header.push("t".into());
            header.push("value".into());
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut rows = Vec::with_capacity(grid.n_s() * grid.n_t);
            for (s, point) in grid.points.iter().enumerate() {
                for t in 0..grid.n_t {
                    let mut row = point.clone();
                    row.push(t as f64 * grid.dt);
                    row.push(field.value(s, t));
                    rows.push(row);
                }
            }
            let path = dir.join("field.csv");
            write_csv(&path, &header_refs, &rows)?;
            println!("wrote {}", path.display());
        }
        OutputFormat::Binary => {
            // layout: magic "SJF1", u32 LE {d, n_s, n_t}, coordinates
            // (n_s * d f64 LE), then values (n_s * n_t f64 LE, s-major)
            let path = dir.join("field.bin");
            std::fs::create_dir_all(&dir)?;
            let mut buf: Vec<u8> = Vec::new();
            buf.extend_from_slice(b"SJF1");
            for v in [grid.body.dim() as u32, grid.n_s() as u32, grid.n_t as u32] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for p in &grid.points {
                for &c in p {
                    buf.extend_from_slice(&c.to_le_bytes());
                }
            }
            for &v in &field.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            std::fs::write(&path, buf)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(Outcome::Success)
}

#[derive(Serialize, Deserialize)]
struct RosenblattCliConfig {
    alpha: f64,
    spatial: SpatialCovariance,
    body: ConvexBody,
    #[serde(default)]
    frequency_grid: sojourn_core::rosenblatt::FrequencyGrid,
    draws: usize,
    seed: u64,
}

pub fn rosenblatt(common: &Common) -> Result<Outcome> {
    let cfg: RosenblattCliConfig = load_config(common)?;
    let params = RosenblattParams {
        alpha: cfg.alpha,
        spatial: cfg.spatial,
        body: cfg.body,
        grid: cfg.frequency_grid,
    };
    let sampler = RosenblattSampler::new(&params)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let draws = sampler.sample_many(cfg.draws, seed);
    let cums = rosenblatt_cumulants(&params)?;
    let dir = out_dir(common);
    let rows: Vec<Vec<f64>> = draws
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i as f64, v])
        .collect();
    write_csv(&dir.join("rosenblatt-samples.csv"), &["sample", "value"], &rows)?;
    write_csv(
        &dir.join("rosenblatt-cumulants.csv"),
        &[
            "kappa2_quadrature",
            "kappa2_rel_err",
            "kappa2_discrete",
            "kappa3_coarse",
            "kappa3_err",
            "i_omega_quad",
            "i_omega_closed",
        ],
        &[vec![
            cums.kappa2,
            cums.kappa2_rel_err,
            sampler.kappa2_discrete(),
            cums.kappa3,
            cums.kappa3_err,
            cums.i_omega_quad,
            cums.i_omega_closed,
        ]],
    )?;
    println!(
        "kappa2 quadrature {:.4} / discrete {:.4}; wrote samples and cumulants to {}",
        cums.kappa2,
        sampler.kappa2_discrete(),
        dir.display()
    );
    Ok(Outcome::Success)
}

pub fn experiment(args: &ExperimentArgs) -> Result<Outcome> {
    let mut cfg: ExperimentConfig = if let Some(name) = &args.preset {
        preset(name, args.common.seed.unwrap_or(20_260_810))?
    } else {
        load_config(&args.common)?
    };
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let result = run_experiment(&cfg)?;
    let dir = out_dir(&args.common);
    result.write_outputs(&dir)?;
    print!("{}", result.gate_report());
    println!(
        "experiment `{}` finished in {:.1}s; outputs in {}",
        result.name,
        result.elapsed_s,
        dir.display()
    );
    if args.gate && !result.all_passed() {
        return Ok(Outcome::GateFailure);
    }
    Ok(Outcome::Success)
}
