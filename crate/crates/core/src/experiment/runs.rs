//! The experiment runners behind `run_experiment`.

use super::{
    ExperimentConfig, ExperimentKind, GateCheck, NamedTable, ReplicateRow, SamplerConfig,
};
use crate::covariance::{condition2_check, CovarianceModel};
use crate::error::Result;
use crate::fieldsim::{build_grid, simulate_cholesky, CirculantSampler, FieldSample, GridSpec};
use crate::geometry::{
    chord_length_cdf_ball, distance_density, distance_density_from_chord_cdf,
    distance_density_mc, ConvexBody, DistanceDensity,
};
use crate::hermite::FunctionalSpec;
use crate::rng::replicate_seed;
use crate::rosenblatt::{rosenblatt_cumulants, RosenblattParams, RosenblattSampler};
use crate::sojourn::{
    eta_upto, eta_variance_grid, minkowski1, minkowski2, stat_x1, stat_x2_y2, stat_y,
    Normalization,
};
use crate::specfun::{gauss_legendre, pairwise_sum};
use crate::stats::{correlation, ks_critical_value, ks_test_normal, ks_two_sample, moment_report};
use crate::variance::scaling_exponent_fit;
use rayon::prelude::*;
use serde_json::json;
use std::sync::Arc;

fn empty_result(config: &ExperimentConfig) -> super::ExperimentResult {
    super::ExperimentResult {
        name: config.name.clone(),
        version: String::new(),
        config_hash: String::new(),
        seed: config.seed,
        elapsed_s: 0.0,
        gates: Vec::new(),
        summary: serde_json::Value::Null,
        replicate_rows: Vec::new(),
        tables: Vec::new(),
    }
}

fn draw_sample(
    model: &CovarianceModel,
    grid: &Arc<GridSpec>,
    circ: Option<&CirculantSampler>,
    seed: u64,
) -> Result<FieldSample> {
    match circ {
        Some(c) => Ok(c.sample(seed)),
        None => simulate_cholesky(model, grid, seed),
    }
}

fn build_sampler(
    model: &CovarianceModel,
    grid: &Arc<GridSpec>,
    cfg: &SamplerConfig,
) -> Result<Option<CirculantSampler>> {
    match cfg {
        SamplerConfig::Circulant { pad_factor } => {
            Ok(Some(CirculantSampler::new(model, grid, *pad_factor)?))
        }
        SamplerConfig::Cholesky => Ok(None),
    }
}

fn row_from_sample(
    f: &FieldSample,
    u: f64,
    sigma1: f64,
    sigma2: f64,
    replicate: u64,
    seed: u64,
) -> Result<ReplicateRow> {
    let etas = eta_upto(f, 4);
    let x2y2_tc = stat_x2_y2(f, u, sigma2, Normalization::TheoremConsistent)?;
    let x2y2_pl = stat_x2_y2(f, u, sigma2, Normalization::PaperLiteral)?;
    Ok(ReplicateRow {
        replicate,
        seed,
        t: f.grid.t_end(),
        u,
        m1: minkowski1(f, u),
        m2: minkowski2(f, u)?,
        x1_tc: stat_x1(f, u, sigma1, Normalization::TheoremConsistent)?,
        x1_pl: stat_x1(f, u, sigma1, Normalization::PaperLiteral)?,
        x2_tc: x2y2_tc.x2,
        x2_pl: x2y2_pl.x2,
        y2: x2y2_tc.y2,
        eta_1: etas[0],
        eta_2: etas[1],
        eta_3: etas[2],
        eta_4: etas[3],
    })
}

pub(super) fn run_clt(config: &ExperimentConfig) -> Result<super::ExperimentResult> {
    let ExperimentKind::CltM1 { model, body, grid, u, replicates, sampler } = &config.kind
    else {
        unreachable!()
    };
    let gspec = Arc::new(build_grid(body, grid.h, grid.dt, grid.n_t)?);
    let sigma1 = eta_variance_grid(model, &gspec, 1).sqrt();
    let sigma2 = eta_variance_grid(model, &gspec, 2).sqrt();
    let circ = build_sampler(model, &gspec, sampler)?;
    let rows: Vec<ReplicateRow> = (0..*replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(config.seed, r);
            let f = draw_sample(model, &gspec, circ.as_ref(), seed)?;
            row_from_sample(&f, *u, sigma1, sigma2, r, seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let x1: Vec<f64> = rows.iter().map(|r| r.x1_tc).collect();
    let ks = ks_test_normal(&x1)?;
    let crit = ks_critical_value(x1.len(), 0.01);
    let mom = moment_report(&x1)?;
    let m1s: Vec<f64> = rows.iter().map(|r| r.m1).collect();
    let m1_mom = moment_report(&m1s)?;
    let expected_m1 =
        (1.0 - crate::specfun::gauss_cdf(*u)) * gspec.total_weight() * gspec.t_end();

    let gates = vec![
        GateCheck::new(
            "clt-ks-statistic",
            ks.statistic < crit,
            ks.statistic,
            format!("one-sample KS vs N(0,1) below the 1% critical value {crit:.5}"),
        ),
        GateCheck::new(
            "clt-x1-variance",
            (0.8..=1.25).contains(&mom.variance),
            mom.variance,
            "ensemble variance of X1 within [0.8, 1.25]",
        ),
        GateCheck::new(
            "clt-m1-mean",
            (m1_mom.mean - expected_m1).abs() <= 3.0 * m1_mom.se_mean,
            (m1_mom.mean - expected_m1) / m1_mom.se_mean,
            "ensemble mean of M1 within 3 SE of (1 - Phi(u)) T |K|",
        ),
    ];
    let mut out = empty_result(config);
    out.gates = gates;
    out.summary = json!({
        "ks": ks,
        "ks_critical_1pct": crit,
        "x1_moments": mom,
        "m1_moments": m1_mom,
        "expected_m1_mean": expected_m1,
        "sigma1_grid": sigma1,
        "sigma2_grid": sigma2,
        "embedding": circ.as_ref().map(|c| c.diagnostics),
    });
    out.replicate_rows = rows;
    Ok(out)
}

struct ReductionPerRep {
    rows: Vec<ReplicateRow>,
    gap1: Vec<f64>,
    gap2: Vec<f64>,
    x2_final: f64,
    y2_final: f64,
}

pub(super) fn run_reduction(config: &ExperimentConfig) -> Result<super::ExperimentResult> {
    let ExperimentKind::ReductionM2 { model, body, h, dt, t_steps, u, replicates, sampler } =
        &config.kind
    else {
        unreachable!()
    };
    let n_t_max = *t_steps.last().expect("validated");
    let grid_max = Arc::new(build_grid(body, *h, *dt, n_t_max)?);
    let grids: Vec<Arc<GridSpec>> = t_steps
        .iter()
        .map(|&n| build_grid(body, *h, *dt, n).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let indicator = FunctionalSpec::indicator(*u);
    let modulus = FunctionalSpec::abs_indicator(*u)?;
    let sig1: Vec<f64> = grids
        .iter()
        .map(|g| eta_variance_grid(model, g, 1).sqrt())
        .collect();
    let sig2: Vec<f64> = grids
        .iter()
        .map(|g| eta_variance_grid(model, g, 2).sqrt())
        .collect();
    let circ = build_sampler(model, &grid_max, sampler)?;

    let per_rep: Vec<ReductionPerRep> = (0..*replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<ReductionPerRep> {
            let seed = replicate_seed(config.seed, r);
            let full = draw_sample(model, &grid_max, circ.as_ref(), seed)?;
            let n_s = full.n_s();
            let mut rows = Vec::with_capacity(t_steps.len());
            let mut gap1 = Vec::with_capacity(t_steps.len());
            let mut gap2 = Vec::with_capacity(t_steps.len());
            let mut x2_final = 0.0;
            let mut y2_final = 0.0;
            for (ti, &n_t) in t_steps.iter().enumerate() {
                // prefix view of the same realization
                let mut values = Vec::with_capacity(n_s * n_t);
                for s in 0..n_s {
                    values.extend_from_slice(&full.values[s * n_t_max..s * n_t_max + n_t]);
                }
                let prefix = FieldSample {
                    grid: Arc::clone(&grids[ti]),
                    values,
                    method: full.method,
                    seed,
                    embedding: full.embedding,
                };
                let ys1 = stat_y(&prefix, &indicator, sig1[ti])?;
                let ys2 = stat_y(&prefix, &modulus, sig2[ti])?;
                gap1.push((ys1.y_t - ys1.y_m_t).powi(2));
                gap2.push((ys2.y_t - ys2.y_m_t).powi(2));
                rows.push(row_from_sample(&prefix, *u, sig1[ti], sig2[ti], r, seed)?);
                if ti == t_steps.len() - 1 {
                    let xy = stat_x2_y2(&prefix, *u, sig2[ti], Normalization::TheoremConsistent)?;
                    x2_final = xy.x2;
                    y2_final = xy.y2;
                }
            }
            Ok(ReductionPerRep {
                rows,
                gap1,
                gap2,
                x2_final,
                y2_final,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_rep = per_rep.len() as f64;
    let mean_se = |pick: &dyn Fn(&ReductionPerRep) -> &Vec<f64>, ti: usize| -> (f64, f64) {
        let vals: Vec<f64> = per_rep.iter().map(|p| pick(p)[ti]).collect();
        let m = pairwise_sum(&vals) / n_rep;
        let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n_rep - 1.0);
        (m, (v / n_rep).sqrt())
    };
    let gaps1: Vec<(f64, f64)> = (0..t_steps.len()).map(|ti| mean_se(&|p| &p.gap1, ti)).collect();
    let gaps2: Vec<(f64, f64)> = (0..t_steps.len()).map(|ti| mean_se(&|p| &p.gap2, ti)).collect();
    let x2s: Vec<f64> = per_rep.iter().map(|p| p.x2_final).collect();
    let y2s: Vec<f64> = per_rep.iter().map(|p| p.y2_final).collect();
    let corr = correlation(&x2s, &y2s)?;

    let ratio1 = gaps1.last().unwrap().0 / gaps1[0].0;
    let ratio2 = gaps2.last().unwrap().0 / gaps2[0].0;
    let mono1 = gaps1.windows(2).all(|w| w[1].0 < w[0].0);
    let mono2 = gaps2.windows(2).all(|w| w[1].0 < w[0].0);

    let gates = vec![
        GateCheck::new(
            "reduction-rank2-halving",
            ratio2 < 0.5,
            ratio2,
            "E[(Y_T - Y_{2,T})^2] at the largest T below half its value at the smallest",
        ),
        GateCheck::new(
            "reduction-rank1-monotone",
            mono1,
            ratio1,
            "rank-1 gap strictly decreasing across the dyadic T grid",
        ),
        GateCheck::new(
            "reduction-rank2-monotone",
            mono2,
            ratio2,
            "rank-2 gap strictly decreasing across the dyadic T grid",
        ),
        GateCheck::new(
            "reduction-x2-y2-correlation",
            corr > 0.95,
            corr,
            "corr(X2_tc, Y2) above 0.95 at the largest T",
        ),
    ];

    let gap_table = NamedTable {
        name: "gaps".into(),
        header: vec![
            "t".into(),
            "gap_rank1".into(),
            "gap_rank1_se".into(),
            "gap_rank2".into(),
            "gap_rank2_se".into(),
        ],
        rows: t_steps
            .iter()
            .enumerate()
            .map(|(ti, &n)| {
                vec![n as f64 * dt, gaps1[ti].0, gaps1[ti].1, gaps2[ti].0, gaps2[ti].1]
            })
            .collect(),
    };

    let mut out = empty_result(config);
    out.gates = gates;
    out.summary = json!({
        "gap_rank1": gaps1,
        "gap_rank2": gaps2,
        "gap_rank1_ratio": ratio1,
        "gap_rank2_ratio": ratio2,
        "corr_x2_y2": corr,
        "note": "the rank-1 halving ratio is reported, not gated: its population value \
                 at alpha=0.2 is ~0.53 (the leading chaos ratio decays like T^-alpha), \
                 so halving over a factor-16 span is attainable only for rank 2",
    });
    out.replicate_rows = per_rep.into_iter().flat_map(|p| p.rows).collect();
    out.tables = vec![gap_table];
    Ok(out)
}

pub(super) fn run_rosenblatt(config: &ExperimentConfig) -> Result<super::ExperimentResult> {
    let ExperimentKind::RosenblattM2 {
        alpha,
        spatial,
        body,
        grid,
        replicates,
        sampler_draws,
        frequency_grid,
        sampler,
    } = &config.kind
    else {
        unreachable!()
    };
    let model = CovarianceModel::separable(spatial.clone(), *alpha)?;
    let gspec = Arc::new(build_grid(body, grid.h, grid.dt, grid.n_t)?);
    let sigma2 = eta_variance_grid(&model, &gspec, 2).sqrt();
    let circ = build_sampler(&model, &gspec, sampler)?;
    let y2s: Vec<f64> = (0..*replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let seed = replicate_seed(config.seed, r);
            let f = draw_sample(&model, &gspec, circ.as_ref(), seed)?;
            Ok(crate::sojourn::eta_n(&f, 2) / sigma2)
        })
        .collect::<Result<Vec<_>>>()?;
    let y2_mom = moment_report(&y2s)?;

    let params = RosenblattParams {
        alpha: *alpha,
        spatial: spatial.clone(),
        body: body.clone(),
        grid: *frequency_grid,
    };
    let rsampler = RosenblattSampler::new(&params)?;
    let draws = rsampler.sample_many(*sampler_draws, config.seed.wrapping_add(0x526f_73_65));
    let draw_mom = moment_report(&draws)?;
    let cums = rosenblatt_cumulants(&params)?;
    let ks2 = ks_two_sample(&draws, &y2s)?;

    let capture = rsampler.kappa2_discrete() / rsampler.kappa2_quadrature();
    let var_ratio = rsampler.kappa2_discrete() / y2_mom.variance;
    let gates = vec![
        GateCheck::new(
            "rosenblatt-sampler-vs-quadrature",
            (capture - 1.0).abs() <= 0.10,
            capture,
            "discretized sampler variance within 10% of the quadrature kappa2",
        ),
        GateCheck::new(
            "rosenblatt-variance-ratio",
            (0.8..=1.25).contains(&var_ratio),
            var_ratio,
            "sampler variance / Y2 ensemble variance within [0.8, 1.25]",
        ),
        GateCheck::new(
            "rosenblatt-skewness-sign",
            draw_mom.skewness > 0.0 && y2_mom.skewness > 0.0,
            draw_mom.skewness,
            "sampler and Y2 ensemble both positively skewed",
        ),
        GateCheck::new(
            "rosenblatt-kappa2-refinement",
            cums.kappa2_rel_err < 0.05,
            cums.kappa2_rel_err,
            "quadrature kappa2 stable under grid doubling within 5% (E[R^2] finite)",
        ),
    ];

    let samples_table = NamedTable {
        name: "samples".into(),
        header: vec!["sample".into(), "value".into()],
        rows: draws
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![i as f64, v])
            .collect(),
    };
    let cum_table = NamedTable {
        name: "cumulants".into(),
        header: vec![
            "kappa2_quadrature".into(),
            "kappa2_rel_err".into(),
            "kappa2_discrete".into(),
            "kappa3_coarse".into(),
            "kappa3_err".into(),
            "i_omega_quad".into(),
            "i_omega_closed".into(),
        ],
        rows: vec![vec![
            cums.kappa2,
            cums.kappa2_rel_err,
            rsampler.kappa2_discrete(),
            cums.kappa3,
            cums.kappa3_err,
            cums.i_omega_quad,
            cums.i_omega_closed,
        ]],
    };

    let mut out = empty_result(config);
    out.gates = gates;
    out.summary = json!({
        "y2_moments": y2_mom,
        "sampler_moments": draw_mom,
        "kappa2_discrete": rsampler.kappa2_discrete(),
        "kappa2_quadrature": rsampler.kappa2_quadrature(),
        "cumulants": cums,
        "two_sample_ks": ks2,
        "note": "the two-sample KS is reported, not gated: finite-T Y2 converges slowly \
                 in distribution, so only cumulant/shape agreement is enforced",
    });
    out.tables = vec![samples_table, cum_table];
    Ok(out)
}

pub(super) fn run_gneiting(config: &ExperimentConfig) -> Result<super::ExperimentResult> {
    let ExperimentKind::GneitingVariance { cases, diagnostic_t, delta, fit_t, min_exponent } =
        &config.kind
    else {
        unreachable!()
    };
    let mut gates = Vec::new();
    let mut case_summaries = Vec::new();
    let mut tables = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let psi = DistanceDensity::closed_form(case.body.clone())?;
        let rep = condition2_check(&case.model, &psi, 1, *delta, diagnostic_t)?;
        let fit = scaling_exponent_fit(
            &case.model,
            &psi,
            1,
            fit_t,
            &crate::variance::QuadSpec::default(),
        )?;
        let d = case.body.dim();
        gates.push(GateCheck::new(
            &format!("gneiting-d{d}-condition2-increasing"),
            rep.strictly_increasing,
            rep.points.last().unwrap().value / rep.points[0].value,
            "slow-growth diagnostic strictly increasing over the dyadic T grid",
        ));
        gates.push(GateCheck::new(
            &format!("gneiting-d{d}-variance-exponent"),
            fit.fitted_exponent >= *min_exponent,
            fit.fitted_exponent,
            format!("fitted variance-growth exponent at least {min_exponent}"),
        ));
        tables.push(NamedTable {
            name: format!("case{i}-diagnostic"),
            header: vec!["t".into(), "condition2_value".into()],
            rows: rep.points.iter().map(|p| vec![p.t, p.value]).collect(),
        });
        tables.push(NamedTable {
            name: format!("case{i}-variance"),
            header: vec!["t".into(), "sigma2".into(), "predicted".into(), "ratio".into()],
            rows: fit
                .t_list
                .iter()
                .zip(&fit.sigma2)
                .map(|(&t, &s)| {
                    let predicted = (fit.intercept + fit.reference_exponent * t.ln()).exp();
                    vec![t, s, predicted, s / predicted]
                })
                .collect(),
        });
        case_summaries.push(json!({
            "dim": d,
            "model": case.model,
            "condition2": rep,
            "fit": fit,
            "theta_1": crate::covariance::lrd_exponent(&case.model, 1),
        }));
    }
    let mut out = empty_result(config);
    out.gates = gates;
    out.summary = json!({ "cases": case_summaries });
    out.tables = tables;
    Ok(out)
}

pub(super) fn run_geometry(config: &ExperimentConfig) -> Result<super::ExperimentResult> {
    let ExperimentKind::GeometryCheck { ball_dims, grid_points, mc_bodies, mc_pairs, mc_bins } =
        &config.kind
    else {
        unreachable!()
    };
    let mut gates = Vec::new();
    let mut summary_rows = Vec::new();
    for &d in ball_dims {
        let ball = ConvexBody::ball(d, 1.0)?;
        let mut sup = 0.0f64;
        for i in 1..=*grid_points {
            let z = 2.0 * i as f64 / (*grid_points as f64 + 1.0);
            let a = distance_density(&ball, z)?;
            let b = distance_density_from_chord_cdf(
                &ball,
                |v| chord_length_cdf_ball(d, v).unwrap_or(0.0),
                z,
            )?;
            sup = sup.max((a - b).abs());
        }
        gates.push(GateCheck::new(
            &format!("geometry-ball{d}-route-equivalence"),
            sup <= 1e-8,
            sup,
            "sup |incomplete-beta route - chord-CDF route| at most 1e-8",
        ));
        let rule = gauss_legendre(256, 0.0, 2.0)?;
        let mass = rule.integrate(|z| distance_density(&ball, z).unwrap_or(0.0));
        gates.push(GateCheck::new(
            &format!("geometry-ball{d}-unit-mass"),
            (mass - 1.0).abs() <= 1e-6,
            mass,
            "closed-form density integrates to 1 within 1e-6",
        ));
        summary_rows.push(json!({"dim": d, "sup_route_diff": sup, "mass": mass}));
    }

    let mut tables = Vec::new();
    for (bi, body) in mc_bodies.iter().enumerate() {
        let table = distance_density_mc(body, *mc_pairs, *mc_bins, replicate_seed(config.seed, bi as u64))?;
        let mut worst = 0.0f64;
        let mut rows = Vec::with_capacity(table.density.len());
        for (i, &est) in table.density.iter().enumerate() {
            let mid = 0.5 * (table.bin_edges[i] + table.bin_edges[i + 1]);
            let closed = distance_density(body, mid)?;
            worst = worst.max((est - closed).abs());
            rows.push(vec![mid, closed, est, table.std_error[i]]);
        }
        gates.push(GateCheck::new(
            &format!("geometry-mc-body{bi}"),
            worst < 0.02,
            worst,
            "max bin error of the MC histogram vs the closed form below 0.02",
        ));
        tables.push(NamedTable {
            name: format!("density-body{bi}"),
            header: vec![
                "z".into(),
                "psi_closed_form".into(),
                "psi_mc".into(),
                "mc_stderr".into(),
            ],
            rows,
        });
        summary_rows.push(json!({"mc_body": body, "max_bin_error": worst}));
    }

    let mut out = empty_result(config);
    out.gates = gates;
    out.summary = json!({ "checks": summary_rows });
    out.tables = tables;
    Ok(out)
}
