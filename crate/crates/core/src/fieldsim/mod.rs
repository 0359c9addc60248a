//! Gaussian field realizations on body-clipped lattices: exact dense-Cholesky
//! sampling for small grids and FFT circulant embedding for rectangular
//! lattices, plus an ensemble covariance check.
//!
//! Determinism contract: (model, grid, seed) fully determines a sample.
//! Replicates draw from independent derived ChaCha streams, so ensembles are
//! reproducible bit-for-bit under any thread count.

mod circulant;

pub use circulant::{simulate_circulant, CirculantSampler, EmbeddingDiagnostics, NEG_MASS_TOL};

use crate::covariance::SpaceTimeCov;
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::rng::stream_rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One lattice axis: `n` cell centers starting at `origin`, spaced by `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub step: f64,
    pub origin: f64,
}

impl Axis {
    pub fn coord(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.step
    }
}

/// Cell-center lattice clipped to a body, plus the uniform time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub body: ConvexBody,
    pub axes: Vec<Axis>,
    /// flat (row-major) axis indices of the centers inside the body
    pub in_body: Vec<usize>,
    /// coordinates of the in-body centers, lexicographic order
    pub points: Vec<Vec<f64>>,
    /// integration weight per spatial cell (product of steps)
    pub cell_weight: f64,
    pub dt: f64,
    pub n_t: usize,
}

/// Hard cap on n_s * n_t to keep lattice allocations sane.
pub const GRID_BUDGET: usize = 1 << 24;

/// Build the cell-center lattice for `body`, step `h`, and `n_t` time steps of
/// length `dt`. Box-like axes snap the step to an integer cell count so the
/// cell weights sum exactly to the volume; the ball keeps centers with
/// ||x|| <= r on the bounding-box lattice.
pub fn build_grid(body: &ConvexBody, h: f64, dt: f64, n_t: usize) -> Result<GridSpec> {
    if !(h > 0.0 && h <= body.diameter() / 2.0) {
        return Err(Error::invalid(
            "h",
            format!("{h} outside (0, D/2] = (0, {}]", body.diameter() / 2.0),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    if n_t < 2 {
        return Err(Error::invalid("n_t", "need at least 2 time steps"));
    }
    let (lo, hi) = body.bounding_box();
    let axes: Vec<Axis> = lo
        .iter()
        .zip(&hi)
        .map(|(&a, &b)| {
            let n = (((b - a) / h).round() as usize).max(1);
            let step = (b - a) / n as f64;
            Axis {
                n,
                step,
                origin: a + step / 2.0,
            }
        })
        .collect();
    let total: usize = axes.iter().map(|ax| ax.n).product();
    if total.saturating_mul(n_t) > GRID_BUDGET {
        return Err(Error::invalid(
            "grid",
            format!("{total} x {n_t} lattice exceeds the budget of {GRID_BUDGET} points"),
        ));
    }
    let mut in_body = Vec::new();
    let mut points = Vec::new();
    let mut coord = vec![0usize; axes.len()];
    for flat in 0..total {
        let mut rem = flat;
        for (j, ax) in axes.iter().enumerate().rev() {
            coord[j] = rem % ax.n;
            rem /= ax.n;
        }
        let x: Vec<f64> = axes.iter().zip(&coord).map(|(ax, &k)| ax.coord(k)).collect();
        if body.contains(&x) {
            in_body.push(flat);
            points.push(x);
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("h", "no lattice cell center falls inside the body"));
    }
    let cell_weight = axes.iter().map(|ax| ax.step).product();
    Ok(GridSpec {
        body: body.clone(),
        axes,
        in_body,
        points,
        cell_weight,
        dt,
        n_t,
    })
}

impl GridSpec {
    pub fn n_s(&self) -> usize {
        self.points.len()
    }

    /// total measure carried by the spatial cells
    pub fn total_weight(&self) -> f64 {
        self.cell_weight * self.n_s() as f64
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.n_t as f64
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.points[a]
            .iter()
            .zip(&self.points[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    Cholesky,
    Circulant,
}

/// A realization of the field on grid x time, values indexed (s, t).
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub grid: Arc<GridSpec>,
    /// row-major: values[s * n_t + t]
    pub values: Vec<f64>,
    pub method: SimMethod,
    pub seed: u64,
    pub embedding: Option<EmbeddingDiagnostics>,
}

impl FieldSample {
    #[inline]
    pub fn value(&self, s: usize, t: usize) -> f64 {
        self.values[s * self.grid.n_t + t]
    }

    pub fn n_s(&self) -> usize {
        self.grid.n_s()
    }

    pub fn n_t(&self) -> usize {
        self.grid.n_t
    }
}

/// Exact sampler: assembles the full (n_s n_t)^2 covariance matrix, factors it,
/// and applies the factor to a standard normal vector from the seed's stream.
///
/// On a first factorization failure a single diagonal jitter of
/// 1e-10 * trace/N is applied; a second failure reports the smallest
/// eigenvalue estimate.
pub fn simulate_cholesky(
    model: &dyn SpaceTimeCov,
    grid: &Arc<GridSpec>,
    seed: u64,
) -> Result<FieldSample> {
    let n_s = grid.n_s();
    let n_t = grid.n_t;
    let n = n_s * n_t;
    if n > 8192 {
        return Err(Error::invalid(
            "grid",
            format!("{n} points exceed the 8192-point Cholesky budget"),
        ));
    }
    // spatial distances are reused across time lags
    let mut dist = vec![0.0f64; n_s * n_s];
    for a in 0..n_s {
        for b in 0..n_s {
            dist[a * n_s + b] = grid.distance(a, b);
        }
    }
    let mut cov = vec![0.0f64; n * n];
    for i in 0..n {
        let (si, ti) = (i / n_t, i % n_t);
        for j in 0..=i {
            let (sj, tj) = (j / n_t, j % n_t);
            let tau = (ti as f64 - tj as f64).abs() * grid.dt;
            let c = model.eval(dist[si * n_s + sj], tau);
            cov[i * n + j] = c;
            cov[j * n + i] = c;
        }
    }
    let trace_avg = 1.0; // unit variance on the diagonal by construction
    let mut factor = cov.clone();
    if cholesky_in_place(&mut factor, n).is_err() {
        factor.copy_from_slice(&cov);
        let jitter = 1e-10 * trace_avg;
        for i in 0..n {
            factor[i * n + i] += jitter;
        }
        if cholesky_in_place(&mut factor, n).is_err() {
            let min_eig = smallest_eigenvalue_estimate(&cov, n);
            return Err(Error::Factorization { min_eig });
        }
    }
    drop(cov);
    let mut rng = stream_rng(seed, 0);
    let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    // values in (s, t) layout: index i = s * n_t + t matches the matrix order
    let mut values = vec![0.0f64; n];
    for i in 0..n {
        let row = &factor[i * n..i * n + i + 1];
        values[i] = row.iter().zip(&g).map(|(l, gv)| l * gv).sum();
    }
    Ok(FieldSample {
        grid: Arc::clone(grid),
        values,
        method: SimMethod::Cholesky,
        seed,
        embedding: None,
    })
}

/// In-place lower Cholesky on a row-major n x n matrix.
fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), ()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(());
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                s -= a[ri + k] * a[rj + k];
            }
            a[ri + j] = s / d;
        }
    }
    // zero the strict upper triangle so the factor can be applied directly
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// lambda_min estimate by power iteration on (lambda_max I - A).
fn smallest_eigenvalue_estimate(a: &[f64], n: usize) -> f64 {
    let matvec = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = a[i * n..(i + 1) * n].iter().zip(v).map(|(x, y)| x * y).sum();
        }
    };
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut lam_max = 1.0;
    for _ in 0..60 {
        matvec(&v, &mut w);
        lam_max = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lam_max == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / lam_max;
        }
    }
    // power iteration on the reflected matrix
    for x in v.iter_mut() {
        *x = 1.0 / (n as f64).sqrt();
    }
    let mut mu = 0.0;
    for _ in 0..120 {
        matvec(&v, &mut w);
        for i in 0..n {
            w[i] = lam_max * v[i] - w[i];
        }
        mu = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if mu == 0.0 {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / mu;
        }
    }
    lam_max - mu
}

/// A probe lag for the ensemble covariance check: spatial point pair plus a
/// time-step offset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeLag {
    pub s_a: usize,
    pub s_b: usize,
    pub dt_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovCheckRow {
    pub z: f64,
    pub tau: f64,
    pub target: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub studentized: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovCheckReport {
    pub rows: Vec<CovCheckRow>,
    pub max_abs_studentized: f64,
}

/// Empirical covariance at probe lags across an ensemble, with Monte Carlo
/// standard errors and studentized deviations from the model values.
pub fn sample_cov_check(
    model: &dyn SpaceTimeCov,
    samples: &[FieldSample],
    probes: &[ProbeLag],
) -> Result<CovCheckReport> {
    if samples.len() < 100 {
        return Err(Error::invalid("samples", "need at least 100 replicates"));
    }
    let grid = &samples[0].grid;
    let mut rows = Vec::with_capacity(probes.len());
    let mut max_dev = 0.0f64;
    for p in probes {
        if p.s_a >= grid.n_s() || p.s_b >= grid.n_s() || p.dt_steps >= grid.n_t {
            return Err(Error::invalid("probes", "probe indices outside the grid"));
        }
        let z = grid.distance(p.s_a, p.s_b);
        let tau = p.dt_steps as f64 * grid.dt;
        let per_rep: Vec<f64> = samples
            .iter()
            .map(|f| {
                let n_avail = f.n_t() - p.dt_steps;
                let mut acc = 0.0;
                for t in 0..n_avail {
                    acc += f.value(p.s_a, t) * f.value(p.s_b, t + p.dt_steps);
                }
                acc / n_avail as f64
            })
            .collect();
        let n = per_rep.len() as f64;
        let mean = crate::specfun::pairwise_sum(&per_rep) / n;
        let var = per_rep.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let target = model.eval(z, tau);
        let studentized = if se > 0.0 { (mean - target) / se } else { 0.0 };
        max_dev = max_dev.max(studentized.abs());
        rows.push(CovCheckRow {
            z,
            tau,
            target,
            estimate: mean,
            std_error: se,
            studentized,
        });
    }
    Ok(CovCheckReport {
        rows,
        max_abs_studentized: max_dev,
    })
}
