//! Shipped experiment presets.

use super::{ExperimentConfig, ExperimentKind, GneitingCase, GridConfig, SamplerConfig};
use crate::covariance::{CovarianceModel, SpatialCovariance};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::sojourn::Normalization;

pub fn preset_names() -> &'static [&'static str] {
    &[
        "clt-m1",
        "reduction-m2",
        "rosenblatt-m2",
        "gneiting-variance",
        "geometry-check",
    ]
}

/// Build a named preset with the given master seed.
pub fn preset(name: &str, seed: u64) -> Result<ExperimentConfig> {
    let kind = match name {
        "clt-m1" => ExperimentKind::CltM1 {
            // lambda = 8 keeps ~8 cells per spatial correlation length and
            // gives real spatial averaging, so the finite-T skew of X1 stays
            // small enough for the 1%-level normality gate at 400 replicates
            model: CovarianceModel::separable(
                SpatialCovariance::PoweredExponential { lambda: 8.0, kappa: 1.0 },
                0.4,
            )?,
            body: ConvexBody::interval(1.0)?,
            grid: GridConfig {
                h: 1.0 / 64.0,
                dt: 1.0,
                n_t: 4096,
            },
            u: 1.0,
            replicates: 400,
            sampler: SamplerConfig::Circulant { pad_factor: 2 },
        },
        "reduction-m2" => ExperimentKind::ReductionM2 {
            model: CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.2)?,
            body: ConvexBody::interval(1.0)?,
            h: 0.5,
            dt: 1.0,
            t_steps: vec![256, 1024, 4096],
            u: 1.0,
            replicates: 200,
            sampler: SamplerConfig::Circulant { pad_factor: 2 },
        },
        "rosenblatt-m2" => ExperimentKind::RosenblattM2 {
            alpha: 0.3,
            spatial: SpatialCovariance::PoweredExponential { lambda: 1.0, kappa: 1.0 },
            body: ConvexBody::interval(1.0)?,
            grid: GridConfig {
                h: 1.0 / 16.0,
                dt: 1.0,
                n_t: 4096,
            },
            replicates: 400,
            sampler_draws: 600,
            frequency_grid: crate::rosenblatt::FrequencyGrid::default(),
            sampler: SamplerConfig::Circulant { pad_factor: 2 },
        },
        "gneiting-variance" => ExperimentKind::GneitingVariance {
            cases: vec![
                GneitingCase {
                    // 2 alpha beta (d/2 - gamma) = 0.3 at d = 1
                    model: CovarianceModel::gneiting_ml(1.0, 0.6, 0.5556, 0.05, 0.5, 1)?,
                    body: ConvexBody::interval(1.0)?,
                },
                GneitingCase {
                    // 2 alpha beta (d/2 - gamma) = 0.3 at d = 2
                    model: CovarianceModel::gneiting_ml(1.0, 0.6, 0.263_16, 0.05, 0.5, 2)?,
                    body: ConvexBody::ball(2, 1.0)?,
                },
            ],
            diagnostic_t: (6..=12).map(|k| (1u64 << k) as f64).collect(),
            delta: 0.5,
            fit_t: (9..=12).map(|k| (1u64 << k) as f64).collect(),
            min_exponent: 1.6,
        },
        "geometry-check" => ExperimentKind::GeometryCheck {
            ball_dims: vec![2, 3, 4],
            grid_points: 1000,
            mc_bodies: vec![
                ConvexBody::interval(2.0)?,
                ConvexBody::ball(2, 1.0)?,
                ConvexBody::ball(3, 1.0)?,
            ],
            mc_pairs: 1_000_000,
            mc_bins: 50,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; available: {}",
                preset_names().join(", ")
            )))
        }
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        seed,
        normalization: Normalization::TheoremConsistent,
        kind,
    })
}
