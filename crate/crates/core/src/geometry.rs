//! Convex bodies and the geometric probability quantities attached to them:
//! descriptors, the chord-length CDF of the ball, and the density of the
//! distance between two independent uniform points (`psi` below).
//!
//! Closed forms exist for the interval and the ball; boxes fall back to a
//! Monte Carlo table or a caller-supplied chord-length CDF.

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::specfun::{gamma, gauss_legendre, incomplete_beta};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Compact convex spatial domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ConvexBody {
    Interval { length: f64 },
    Box { sides: Vec<f64> },
    Ball { dim: usize, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyDescriptors {
    pub diameter: f64,
    pub volume: f64,
    pub surface_area: f64,
}

/// Surface measure of the unit sphere S_{d-1} in R^d: 2 pi^{d/2} / Gamma(d/2).
pub fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Volume of the d-ball of radius r: pi^{d/2} r^d / Gamma(d/2 + 1).
pub fn ball_volume(d: usize, r: f64) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) * r.powi(d as i32) / gamma(d as f64 / 2.0 + 1.0)
}

impl ConvexBody {
    pub fn interval(length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid("length", format!("{length} must be > 0")));
        }
        Ok(ConvexBody::Interval { length })
    }

    pub fn cuboid(sides: Vec<f64>) -> Result<Self> {
        if sides.is_empty() || sides.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("sides", "all side lengths must be > 0"));
        }
        Ok(ConvexBody::Box { sides })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "dimension must be >= 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("{radius} must be > 0")));
        }
        Ok(ConvexBody::Ball { dim, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Interval { .. } => 1,
            ConvexBody::Box { sides } => sides.len(),
            ConvexBody::Ball { dim, .. } => *dim,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ConvexBody::Interval { length } => *length,
            ConvexBody::Box { sides } => sides.iter().map(|s| s * s).sum::<f64>().sqrt(),
            ConvexBody::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            ConvexBody::Interval { length } => *length,
            ConvexBody::Box { sides } => sides.iter().product(),
            ConvexBody::Ball { dim, radius } => ball_volume(*dim, *radius),
        }
    }

    /// Surface area U_{d-1}(K); zero in dimension one by convention.
    pub fn surface_area(&self) -> f64 {
        match self {
            ConvexBody::Interval { .. } => 0.0,
            ConvexBody::Box { sides } => {
                if sides.len() == 1 {
                    return 0.0;
                }
                let vol: f64 = sides.iter().product();
                2.0 * sides.iter().map(|s| vol / s).sum::<f64>()
            }
            ConvexBody::Ball { dim, radius } => {
                if *dim == 1 {
                    0.0
                } else {
                    sphere_area(*dim) * radius.powi(*dim as i32 - 1)
                }
            }
        }
    }

    pub fn descriptors(&self) -> BodyDescriptors {
        BodyDescriptors {
            diameter: self.diameter(),
            volume: self.volume(),
            surface_area: self.surface_area(),
        }
    }

    /// Axis-aligned bounding box as (lower, upper) corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ConvexBody::Interval { length } => (vec![0.0], vec![*length]),
            ConvexBody::Box { sides } => (vec![0.0; sides.len()], sides.clone()),
            ConvexBody::Ball { dim, radius } => (vec![-radius; *dim], vec![*radius; *dim]),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ConvexBody::Interval { length } => x[0] >= 0.0 && x[0] <= *length,
            ConvexBody::Box { sides } => x.iter().zip(sides).all(|(&v, &s)| v >= 0.0 && v <= s),
            ConvexBody::Ball { radius, .. } => {
                x.iter().map(|v| v * v).sum::<f64>().sqrt() <= *radius
            }
        }
    }

    fn sample_uniform(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            ConvexBody::Interval { length } => vec![rng.random::<f64>() * length],
            ConvexBody::Box { sides } => sides.iter().map(|&s| rng.random::<f64>() * s).collect(),
            ConvexBody::Ball { dim, radius } => {
                // rejection from the bounding cube
                loop {
                    let x: Vec<f64> = (0..*dim)
                        .map(|_| (2.0 * rng.random::<f64>() - 1.0) * radius)
                        .collect();
                    if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                        return x;
                    }
                }
            }
        }
    }
}

/// Chord-length distribution function of the unit ball in R^d, d >= 2.
pub fn chord_length_cdf_ball(d: usize, v: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid("d", "chord-length CDF needs d >= 2"));
    }
    Ok(if v <= 0.0 {
        0.0
    } else if v >= 2.0 {
        1.0
    } else {
        1.0 - (1.0 - (v / 2.0) * (v / 2.0)).powf((d as f64 - 1.0) / 2.0)
    })
}

/// Density of ||P1 - P2|| for independent uniform points in `body`, evaluated
/// from the closed forms (interval and ball variants).
///
/// Interval of length L: psi(z) = (2/L)(1 - z/L). Unit ball: the Lord (1954)
/// form d z^{d-1} I_{1-(z/2)^2}((d+1)/2, 1/2); general radius scales as
/// psi_{rK}(z) = psi_K(z/r)/r.
pub fn distance_density(body: &ConvexBody, z: f64) -> Result<f64> {
    match body {
        ConvexBody::Interval { length } => {
            check_support(z, *length)?;
            Ok(2.0 / length * (1.0 - z / length))
        }
        ConvexBody::Ball { dim, radius } => {
            check_support(z, 2.0 * radius)?;
            if *dim == 1 {
                // the 1-ball is an interval of length 2r
                return Ok((1.0 - z / (2.0 * radius)) / radius);
            }
            let zu = z / radius;
            let mu = 1.0 - (zu / 2.0) * (zu / 2.0);
            let beta = incomplete_beta(mu, (*dim as f64 + 1.0) / 2.0, 0.5)?;
            Ok(*dim as f64 * zu.powi(*dim as i32 - 1) * beta / radius)
        }
        ConvexBody::Box { .. } => Err(Error::invalid(
            "body",
            "no closed-form pair-distance density for boxes; supply a chord-length CDF or an MC table",
        )),
    }
}

fn check_support(z: f64, diameter: f64) -> Result<()> {
    if !(0.0..=diameter).contains(&z) {
        return Err(Error::invalid(
            "z",
            format!("{z} outside the support [0, {diameter}]"),
        ));
    }
    Ok(())
}

/// Pair-distance density from a chord-length CDF `F_K`:
///
/// psi(z) = (1/|K|^2) [ z^{d-1} |S_{d-1}| |K|
///        - z^{d-1} |S_{d-2}| U_{d-1}(K) (1/(d-1)) int_0^z (1 - F_K(v)) dv ].
pub fn distance_density_from_chord_cdf(
    body: &ConvexBody,
    chord_cdf: impl Fn(f64) -> f64,
    z: f64,
) -> Result<f64> {
    let d = body.dim();
    if d < 2 {
        return Err(Error::invalid("body", "the chord-CDF formula needs d >= 2"));
    }
    check_support(z, body.diameter())?;
    if z == 0.0 {
        return Ok(0.0);
    }
    let vol = body.volume();
    let surf = body.surface_area();
    // 256 nodes: chord CDFs can carry a square-root endpoint singularity at
    // the diameter (even-d balls), which slows plain Gauss-Legendre
    let tail = gauss_legendre(256, 0.0, z)?.integrate(|v| 1.0 - chord_cdf(v));
    let zp = z.powi(d as i32 - 1);
    let val = (zp * sphere_area(d) * vol
        - zp * sphere_area(d - 1) * surf * tail / (d as f64 - 1.0))
        / (vol * vol);
    Ok(val)
}

/// Histogram estimate of the pair-distance density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McDensityTable {
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_pairs: u64,
    pub seed: u64,
}

impl McDensityTable {
    pub fn eval(&self, z: f64) -> f64 {
        let lo = self.bin_edges[0];
        let hi = *self.bin_edges.last().unwrap();
        if z < lo || z > hi {
            return 0.0;
        }
        let width = self.bin_edges[1] - self.bin_edges[0];
        let i = (((z - lo) / width) as usize).min(self.density.len() - 1);
        self.density[i]
    }
}

/// Monte Carlo tabulation of the pair-distance density: `n_pairs` i.i.d.
/// uniform pairs, equal-width bins, batches parallelized with derived seeds.
pub fn distance_density_mc(
    body: &ConvexBody,
    n_pairs: u64,
    n_bins: usize,
    seed: u64,
) -> Result<McDensityTable> {
    if n_pairs < 10_000 {
        return Err(Error::invalid("n_pairs", "need at least 1e4 pairs"));
    }
    if n_bins < 2 {
        return Err(Error::invalid("n_bins", "need at least 2 bins"));
    }
    let diameter = body.diameter();
    let width = diameter / n_bins as f64;
    const BATCH: u64 = 65_536;
    let n_batches = n_pairs.div_ceil(BATCH);
    let counts = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let todo = BATCH.min(n_pairs - b * BATCH);
            let mut c = vec![0u64; n_bins];
            for _ in 0..todo {
                let p = body.sample_uniform(&mut rng);
                let q = body.sample_uniform(&mut rng);
                let dist = p
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let i = ((dist / width) as usize).min(n_bins - 1);
                c[i] += 1;
            }
            c
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let n = n_pairs as f64;
    let mut density = Vec::with_capacity(n_bins);
    let mut std_error = Vec::with_capacity(n_bins);
    for &c in &counts {
        let p = c as f64 / n;
        density.push(p / width);
        std_error.push((p * (1.0 - p) / n).sqrt() / width);
    }
    let bin_edges = (0..=n_bins).map(|i| i as f64 * width).collect();
    Ok(McDensityTable {
        bin_edges,
        density,
        std_error,
        n_pairs,
        seed,
    })
}

/// Evaluable pair-distance density with its provenance.
#[derive(Clone)]
pub struct DistanceDensity {
    body: ConvexBody,
    method: DensityMethod,
}

#[derive(Clone)]
enum DensityMethod {
    ClosedForm,
    ChordCdf(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    McTable(McDensityTable),
}

impl std::fmt::Debug for DistanceDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let m = match &self.method {
            DensityMethod::ClosedForm => "closed-form",
            DensityMethod::ChordCdf(_) => "chord-cdf",
            DensityMethod::McTable(_) => "monte-carlo-table",
        };
        write!(f, "DistanceDensity({:?}, {m})", self.body)
    }
}

impl DistanceDensity {
    pub fn closed_form(body: ConvexBody) -> Result<Self> {
        // probe once so construction fails instead of evaluation
        distance_density(&body, 0.5 * body.diameter())?;
        Ok(Self {
            body,
            method: DensityMethod::ClosedForm,
        })
    }

    pub fn from_chord_cdf(
        body: ConvexBody,
        cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if body.dim() < 2 {
            return Err(Error::invalid("body", "chord-CDF density needs d >= 2"));
        }
        Ok(Self {
            body,
            method: DensityMethod::ChordCdf(cdf),
        })
    }

    pub fn from_mc(body: ConvexBody, n_pairs: u64, n_bins: usize, seed: u64) -> Result<Self> {
        let table = distance_density_mc(&body, n_pairs, n_bins, seed)?;
        Ok(Self {
            body,
            method: DensityMethod::McTable(table),
        })
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn diameter(&self) -> f64 {
        self.body.diameter()
    }

    /// psi(z); zero outside the support.
    pub fn eval(&self, z: f64) -> f64 {
        if !(0.0..=self.body.diameter()).contains(&z) {
            return 0.0;
        }
        match &self.method {
            DensityMethod::ClosedForm => distance_density(&self.body, z).unwrap_or(0.0),
            DensityMethod::ChordCdf(cdf) => {
                distance_density_from_chord_cdf(&self.body, |v| cdf(v), z).unwrap_or(0.0)
            }
            DensityMethod::McTable(t) => t.eval(z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn descriptors_match_closed_forms() {
        let b2 = ConvexBody::ball(2, 1.0).unwrap().descriptors();
        assert_abs_diff_eq!(b2.diameter, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b2.volume, PI, epsilon = 1e-13);
        assert_abs_diff_eq!(b2.surface_area, 2.0 * PI, epsilon = 1e-13);

        let i2 = ConvexBody::interval(2.0).unwrap().descriptors();
        assert_eq!((i2.diameter, i2.volume, i2.surface_area), (2.0, 2.0, 0.0));

        let b3 = ConvexBody::ball(3, 1.0).unwrap().descriptors();
        assert_abs_diff_eq!(b3.volume, 4.0 * PI / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(b3.surface_area, 4.0 * PI, epsilon = 1e-13);

        // ball descriptors scale as r, r^d, r^{d-1}
        let b3r = ConvexBody::ball(3, 2.5).unwrap().descriptors();
        assert_abs_diff_eq!(b3r.diameter, 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b3r.volume, b3.volume * 2.5f64.powi(3), epsilon = 1e-12);
        assert_abs_diff_eq!(b3r.surface_area, b3.surface_area * 2.5f64.powi(2), epsilon = 1e-12);

        let bx = ConvexBody::cuboid(vec![1.0, 2.0, 3.0]).unwrap().descriptors();
        assert_abs_diff_eq!(bx.diameter, 14f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(bx.volume, 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bx.surface_area, 22.0, epsilon = 1e-13);
    }

    #[test]
    fn chord_cdf_ball_cases() {
        assert_abs_diff_eq!(chord_length_cdf_ball(3, 2.0).unwrap(), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(chord_length_cdf_ball(2, 0.0).unwrap(), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(
            chord_length_cdf_ball(3, std::f64::consts::SQRT_2).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(chord_length_cdf_ball(1, 0.5).is_err());
    }

    #[test]
    fn interval_density() {
        assert_abs_diff_eq!(
            distance_density(&ConvexBody::interval(2.0).unwrap(), 1.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(distance_density(&ConvexBody::interval(2.0).unwrap(), 2.5).is_err());
    }

    #[test]
    fn ball_density_values() {
        let b2 = ConvexBody::ball(2, 1.0).unwrap();
        assert_abs_diff_eq!(distance_density(&b2, 0.0).unwrap(), 0.0, epsilon = 0.0);
        // d=3, z=1: 3 * I_{3/4}(2, 1/2) = 3 * 0.3125 = 0.9375, the classical value
        let b3 = ConvexBody::ball(3, 1.0).unwrap();
        assert_abs_diff_eq!(distance_density(&b3, 1.0).unwrap(), 0.9375, epsilon = 1e-12);
        // closed polynomial form in d=3: p(z) = 3z^2 - (9/4) z^3 + (3/16) z^5
        for z in [0.3f64, 0.9, 1.4, 1.9] {
            let expect = 3.0 * z * z - 2.25 * z.powi(3) + 3.0 / 16.0 * z.powi(5);
            assert_abs_diff_eq!(distance_density(&b3, z).unwrap(), expect, epsilon = 1e-11);
        }
    }

    #[test]
    fn ball_scaling_law() {
        // psi_{rK}(z) = psi_K(z/r) / r
        let unit = ConvexBody::ball(2, 1.0).unwrap();
        let scaled = ConvexBody::ball(2, 2.5).unwrap();
        for z in [0.1, 1.0, 2.0, 4.0] {
            let lhs = distance_density(&scaled, z).unwrap();
            let rhs = distance_density(&unit, z / 2.5).unwrap() / 2.5;
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn chord_cdf_route_matches_beta_route_on_balls() {
        for d in [2usize, 3, 4] {
            let ball = ConvexBody::ball(d, 1.0).unwrap();
            let mut worst = 0.0f64;
            for i in 1..200 {
                let z = 2.0 * i as f64 / 200.0;
                let a = distance_density(&ball, z).unwrap();
                let b = distance_density_from_chord_cdf(
                    &ball,
                    |v| chord_length_cdf_ball(d, v).unwrap(),
                    z,
                )
                .unwrap();
                worst = worst.max((a - b).abs());
            }
            assert!(worst < 1e-8, "d={d}: max |beta - chord| = {worst:.2e}");
        }
    }

    #[test]
    fn density_from_chord_cdf_edges() {
        let ball = ConvexBody::ball(3, 1.0).unwrap();
        let f = |v: f64| chord_length_cdf_ball(3, v).unwrap();
        assert_abs_diff_eq!(distance_density_from_chord_cdf(&ball, f, 0.0).unwrap(), 0.0, epsilon = 0.0);
        assert!(distance_density_from_chord_cdf(&ball, f, 2.0).unwrap().abs() < 1e-8);
        assert!(
            distance_density_from_chord_cdf(&ConvexBody::interval(1.0).unwrap(), f, 0.5).is_err()
        );
    }

    #[test]
    fn closed_form_densities_integrate_to_one() {
        for body in [
            ConvexBody::interval(2.0).unwrap(),
            ConvexBody::ball(2, 1.0).unwrap(),
            ConvexBody::ball(3, 1.5).unwrap(),
            ConvexBody::ball(4, 1.0).unwrap(),
        ] {
            let rule = gauss_legendre(256, 0.0, body.diameter()).unwrap();
            let mass = rule.integrate(|z| distance_density(&body, z).unwrap());
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn pointwise_bound_by_sphere_term() {
        // psi(z) <= z^{d-1} |S_{d-1}| / |K| for d >= 2
        for d in [2usize, 3, 4] {
            let ball = ConvexBody::ball(d, 1.0).unwrap();
            let bound_c = sphere_area(d) / ball.volume();
            for i in 1..=100 {
                let z = 2.0 * i as f64 / 100.0;
                let psi = distance_density(&ball, z).unwrap();
                assert!(psi <= z.powi(d as i32 - 1) * bound_c + 1e-12);
            }
        }
    }

    #[test]
    fn mc_table_matches_closed_forms() {
        let interval = ConvexBody::interval(2.0).unwrap();
        let t = distance_density_mc(&interval, 1_000_000, 50, 7).unwrap();
        let width = t.bin_edges[1] - t.bin_edges[0];
        let mass: f64 = t.density.iter().map(|d| d * width).sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        let mut worst = 0.0f64;
        for (i, &d) in t.density.iter().enumerate() {
            let mid = 0.5 * (t.bin_edges[i] + t.bin_edges[i + 1]);
            worst = worst.max((d - (1.0 - mid / 2.0)).abs());
        }
        assert!(worst < 0.02, "interval max bin error {worst}");

        let disk = ConvexBody::ball(2, 1.0).unwrap();
        let t2 = distance_density_mc(&disk, 1_000_000, 50, 11).unwrap();
        let mut worst2 = 0.0f64;
        for (i, &d) in t2.density.iter().enumerate() {
            let mid = 0.5 * (t2.bin_edges[i] + t2.bin_edges[i + 1]);
            worst2 = worst2.max((d - distance_density(&disk, mid).unwrap()).abs());
        }
        assert!(worst2 < 0.02, "disk max bin error {worst2}");
    }

    #[test]
    fn mc_determinism() {
        let body = ConvexBody::ball(2, 1.0).unwrap();
        let a = distance_density_mc(&body, 50_000, 20, 123).unwrap();
        let b = distance_density_mc(&body, 50_000, 20, 123).unwrap();
        assert_eq!(a.density, b.density);
        let c = distance_density_mc(&body, 50_000, 20, 124).unwrap();
        assert_ne!(a.density, c.density);
    }

    #[test]
    fn density_object_dispatch() {
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        let closed = DistanceDensity::closed_form(ball.clone()).unwrap();
        let cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
            Arc::new(|v| chord_length_cdf_ball(2, v).unwrap());
        let chord = DistanceDensity::from_chord_cdf(ball.clone(), cdf).unwrap();
        for z in [0.2, 0.9, 1.7] {
            assert_abs_diff_eq!(closed.eval(z), chord.eval(z), epsilon = 1e-8);
        }
        assert_eq!(closed.eval(-0.1), 0.0);
        assert_eq!(closed.eval(2.1), 0.0);
        assert!(DistanceDensity::closed_form(ConvexBody::cuboid(vec![1.0, 1.0]).unwrap()).is_err());
        let mc = DistanceDensity::from_mc(ConvexBody::cuboid(vec![1.0, 1.0]).unwrap(), 60_000, 30, 5)
            .unwrap();
        assert!(mc.eval(0.5) > 0.0);
    }
}
