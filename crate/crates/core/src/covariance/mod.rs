//! Space-time correlation models and their long-range-dependence diagnostics.
//!
//! All models satisfy C(0,0) = 1, 0 <= C <= 1, and C(z, tau) >= 0; parameters
//! are validated at construction so evaluation never fails.
//!
//! The separable family uses the regularized temporal kernel
//! C_T(tau) = (1 + tau^2)^{-alpha/2}: its slowly varying part
//! L(tau) = tau^alpha C_T(tau) tends to one, so the asymptotic constants below
//! carry no L-correction. (The bare kernel L(tau)/tau^alpha of the covariance
//! condition blows up at zero and cannot have unit variance.)

mod spectral;

pub use spectral::{spatial_spectral_density, temporal_spectral_density, TemporalSpectralPoint};
pub(crate) use spectral::{bessel_j0, bessel_j1};

use crate::error::{Error, Result};
use crate::geometry::DistanceDensity;
use crate::specfun::{gauss_legendre, mittag_leffler_neg};
use serde::{Deserialize, Serialize};

/// Isotropic spatial correlation C_S(z), unit at zero, nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SpatialCovariance {
    /// exp(-(lambda z)^kappa), lambda > 0, kappa in (0, 1].
    PoweredExponential { lambda: f64, kappa: f64 },
    /// (1 + c z^{2 gamma})^{-nu}, c > 0, gamma in (0, 1], nu > 0.
    Cauchy { c: f64, gamma: f64, nu: f64 },
    /// Constant one (spatially fully coherent field).
    ConstantOne,
}

impl SpatialCovariance {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpatialCovariance::PoweredExponential { lambda, kappa } => {
                if !(lambda > 0.0) {
                    return Err(Error::invalid("lambda", format!("{lambda} must be > 0")));
                }
                if !(kappa > 0.0 && kappa <= 1.0) {
                    return Err(Error::invalid("kappa", format!("{kappa} outside (0, 1]")));
                }
            }
            SpatialCovariance::Cauchy { c, gamma, nu } => {
                if !(c > 0.0) {
                    return Err(Error::invalid("c", format!("{c} must be > 0")));
                }
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(Error::invalid("gamma", format!("{gamma} outside (0, 1]")));
                }
                if !(nu > 0.0) {
                    return Err(Error::invalid("nu", format!("{nu} must be > 0")));
                }
            }
            SpatialCovariance::ConstantOne => {}
        }
        Ok(())
    }

    pub fn eval(&self, z: f64) -> f64 {
        debug_assert!(z >= 0.0);
        match *self {
            SpatialCovariance::PoweredExponential { lambda, kappa } => {
                (-((lambda * z).powf(kappa))).exp()
            }
            SpatialCovariance::Cauchy { c, gamma, nu } => {
                (1.0 + c * z.powf(2.0 * gamma)).powf(-nu)
            }
            SpatialCovariance::ConstantOne => 1.0,
        }
    }
}

/// Unit-variance nonnegative space-time correlation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CovarianceModel {
    /// C_S(z) * (1 + tau^2)^{-alpha/2}, alpha in (0, 1).
    Separable {
        spatial: SpatialCovariance,
        alpha: f64,
    },
    /// (a tau^{2 alpha} + 1)^{-beta d / 2} * E_nu(-z^{2 gamma} / (a tau^{2 alpha} + 1)^{beta gamma}).
    GneitingMl {
        a: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        nu: f64,
        dim: usize,
    },
    /// (1 + a tau^{2 alpha})^{-beta d / 2} * (1 + c z^{2 gamma} / (1 + a tau^{2 alpha})^{beta gamma})^{-nu}.
    GneitingCauchy {
        a: f64,
        alpha: f64,
        beta: f64,
        c: f64,
        gamma: f64,
        nu: f64,
        dim: usize,
    },
}

impl CovarianceModel {
    pub fn separable(spatial: SpatialCovariance, alpha: f64) -> Result<Self> {
        spatial.validate()?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} outside (0, 1)")));
        }
        Ok(CovarianceModel::Separable { spatial, alpha })
    }

    pub fn gneiting_ml(a: f64, alpha: f64, beta: f64, gamma: f64, nu: f64, dim: usize) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma), ("nu", nu)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("{v} outside (0, 1)")));
            }
        }
        if !(a > 0.0) {
            return Err(Error::invalid("a", format!("{a} must be > 0")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "dimension must be >= 1"));
        }
        Ok(CovarianceModel::GneitingMl { a, alpha, beta, gamma, nu, dim })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn gneiting_cauchy(
        a: f64,
        alpha: f64,
        beta: f64,
        c: f64,
        gamma: f64,
        nu: f64,
        dim: usize,
    ) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("{v} outside (0, 1]")));
            }
        }
        if !(a > 0.0 && c > 0.0 && nu > 0.0) {
            return Err(Error::invalid("a/c/nu", "must be > 0"));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "dimension must be >= 1"));
        }
        Ok(CovarianceModel::GneitingCauchy { a, alpha, beta, c, gamma, nu, dim })
    }

    pub fn validate(&self) -> Result<()> {
        match self.clone() {
            CovarianceModel::Separable { spatial, alpha } => {
                CovarianceModel::separable(spatial, alpha).map(|_| ())
            }
            CovarianceModel::GneitingMl { a, alpha, beta, gamma, nu, dim } => {
                CovarianceModel::gneiting_ml(a, alpha, beta, gamma, nu, dim).map(|_| ())
            }
            CovarianceModel::GneitingCauchy { a, alpha, beta, c, gamma, nu, dim } => {
                CovarianceModel::gneiting_cauchy(a, alpha, beta, c, gamma, nu, dim).map(|_| ())
            }
        }
    }

    /// Temporal factor of the separable family.
    pub fn temporal_factor(&self, tau: f64) -> Option<f64> {
        match *self {
            CovarianceModel::Separable { alpha, .. } => {
                Some((1.0 + tau * tau).powf(-alpha / 2.0))
            }
            _ => None,
        }
    }
}

/// Point evaluation C(z, tau) shared by models and frozen test kernels.
pub trait SpaceTimeCov: Sync {
    fn eval(&self, z: f64, tau: f64) -> f64;
}

impl SpaceTimeCov for CovarianceModel {
    fn eval(&self, z: f64, tau: f64) -> f64 {
        debug_assert!(z >= 0.0 && tau >= 0.0);
        match *self {
            CovarianceModel::Separable { ref spatial, alpha } => {
                spatial.eval(z) * (1.0 + tau * tau).powf(-alpha / 2.0)
            }
            CovarianceModel::GneitingMl { a, alpha, beta, gamma, nu, dim } => {
                let s = a * tau.powf(2.0 * alpha) + 1.0;
                let arg = z.powf(2.0 * gamma) / s.powf(beta * gamma);
                s.powf(-beta * dim as f64 / 2.0)
                    * mittag_leffler_neg(nu, arg).expect("parameters validated at construction")
            }
            CovarianceModel::GneitingCauchy { a, alpha, beta, c, gamma, nu, dim } => {
                let s = 1.0 + a * tau.powf(2.0 * alpha);
                s.powf(-beta * dim as f64 / 2.0)
                    * (1.0 + c * z.powf(2.0 * gamma) / s.powf(beta * gamma)).powf(-nu)
            }
        }
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> SpaceTimeCov for F {
    fn eval(&self, z: f64, tau: f64) -> f64 {
        self(z, tau)
    }
}

/// Temporal decay exponent of the m-th covariance power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrdExponent {
    pub theta: f64,
    pub is_lrd: bool,
}

/// theta_m such that the spatially integrated C^m decays like tau^{-theta_m};
/// the model is long-range dependent at Hermite rank m when theta_m < 1.
pub fn lrd_exponent(model: &CovarianceModel, m: u32) -> LrdExponent {
    let m = m as f64;
    let theta = match *model {
        CovarianceModel::Separable { alpha, .. } => m * alpha,
        CovarianceModel::GneitingMl { alpha, beta, gamma, dim, .. } => {
            2.0 * m * alpha * beta * (dim as f64 / 2.0 - gamma)
        }
        CovarianceModel::GneitingCauchy { alpha, beta, gamma, nu, dim, .. } => {
            2.0 * m * alpha * beta * (dim as f64 / 2.0 - gamma * nu)
        }
    };
    LrdExponent {
        theta,
        is_lrd: theta < 1.0,
    }
}

/// One row of the slow-growth diagnostic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Condition2Point {
    pub t: f64,
    /// (1/T^delta) int_0^T (1 - tau/T) int_0^D C^m psi dz dtau
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Condition2Report {
    pub delta: f64,
    pub m: u32,
    pub points: Vec<Condition2Point>,
    /// true when the diagnostic grows strictly along `t_list`
    pub strictly_increasing: bool,
}

/// Growth diagnostic for the slow-decay condition: evaluates the normalized
/// double integral at each T and reports whether the sequence increases.
pub fn condition2_check(
    model: &dyn SpaceTimeCov,
    psi: &DistanceDensity,
    m: u32,
    delta: f64,
    t_list: &[f64],
) -> Result<Condition2Report> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} outside (0, 1)")));
    }
    if t_list.len() < 3 || t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("t_list", "need >= 3 strictly increasing values"));
    }
    let mut points = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let inner = weighted_time_average(model, psi, m, t)?;
        points.push(Condition2Point {
            t,
            value: inner / t.powf(delta),
        });
    }
    let strictly_increasing = points.windows(2).all(|w| w[1].value > w[0].value);
    Ok(Condition2Report {
        delta,
        m,
        points,
        strictly_increasing,
    })
}

/// int_0^T (1 - tau/T) int_0^{D} C^m(z, tau) psi(z) dz dtau by panelled
/// Gauss-Legendre: a unit panel at the origin then geometric panels, 64 nodes
/// each; the z integral uses 128 nodes.
pub(crate) fn weighted_time_average(
    model: &dyn SpaceTimeCov,
    psi: &DistanceDensity,
    m: u32,
    t_end: f64,
) -> Result<f64> {
    let z_rule = gauss_legendre(128, 0.0, psi.diameter())?;
    let spatial_avg = |tau: f64| z_rule.integrate(|z| model.eval(z, tau).powi(m as i32) * psi.eval(z));
    let mut total = 0.0;
    for (lo, hi) in geometric_time_panels(t_end) {
        let rule = gauss_legendre(64, lo, hi)?;
        total += rule.integrate(|tau| (1.0 - tau / t_end) * spatial_avg(tau));
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on panel [{lo}, {hi}]"
            )));
        }
    }
    Ok(total)
}

/// Panels {[0,1], [1,2], [2,4], ..., [T/2, T]} (clipped when T <= 1).
pub(crate) fn geometric_time_panels(t_end: f64) -> Vec<(f64, f64)> {
    if t_end <= 1.0 {
        return vec![(0.0, t_end)];
    }
    let mut panels = vec![(0.0, 1.0)];
    let mut lo = 1.0;
    while lo * 2.0 < t_end {
        panels.push((lo, lo * 2.0));
        lo *= 2.0;
    }
    panels.push((lo, t_end));
    panels
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupDecayReport {
    pub taus: Vec<f64>,
    pub sups: Vec<f64>,
    pub nonincreasing: bool,
    /// final value below 0.05 (uniform decay verdict)
    pub decays: bool,
}

/// sup_z C(z, tau) over a 512-point z grid on [0, D(K)], per tau.
pub fn sup_decay_check(model: &dyn SpaceTimeCov, diameter: f64, tau_list: &[f64]) -> SupDecayReport {
    let sups: Vec<f64> = tau_list
        .iter()
        .map(|&tau| {
            (0..512)
                .map(|i| model.eval(diameter * i as f64 / 511.0, tau))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let nonincreasing = sups.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let decays = sups.last().is_some_and(|&v| v < 0.05);
    SupDecayReport {
        taus: tau_list.to_vec(),
        sups,
        nonincreasing,
        decays,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexBody;
    use approx::assert_abs_diff_eq;

    fn interval_psi() -> DistanceDensity {
        DistanceDensity::closed_form(ConvexBody::interval(1.0).unwrap()).unwrap()
    }

    #[test]
    fn unit_variance_at_origin() {
        let models = shipped_models();
        for m in &models {
            assert_abs_diff_eq!(m.eval(0.0, 0.0), 1.0, epsilon = 1e-12);
        }
    }

    fn shipped_models() -> Vec<CovarianceModel> {
        vec![
            CovarianceModel::separable(
                SpatialCovariance::PoweredExponential { lambda: 1.0, kappa: 1.0 },
                0.4,
            )
            .unwrap(),
            CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.5).unwrap(),
            CovarianceModel::gneiting_ml(1.0, 0.6, 0.5556, 0.05, 0.5, 1).unwrap(),
            CovarianceModel::gneiting_cauchy(1.0, 0.6, 0.4, 1.0, 0.5, 0.3, 2).unwrap(),
        ]
    }

    #[test]
    fn bounded_and_nonnegative_on_grid() {
        for model in shipped_models() {
            for i in 0..100 {
                for j in 0..100 {
                    let z = 3.0 * i as f64 / 99.0;
                    let tau = 10.0 * j as f64 / 99.0;
                    let c = model.eval(z, tau);
                    assert!((0.0..=1.0 + 1e-12).contains(&c), "{model:?} at ({z},{tau}): {c}");
                }
            }
        }
    }

    #[test]
    fn gneiting_ml_reduces_to_mittag_leffler() {
        // z=1, tau=0, a=1, alpha=beta=gamma=nu=0.5, d=1 -> E_{0.5}(-1)
        let m = CovarianceModel::gneiting_ml(1.0, 0.5, 0.5, 0.5, 0.5, 1).unwrap();
        assert_abs_diff_eq!(m.eval(1.0, 0.0), 0.427_583_576_155_807, epsilon = 1e-10);
        assert_abs_diff_eq!(m.eval(0.0, 0.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn separable_temporal_tail_normalization() {
        // tau^alpha * C_T(tau) -> 1
        for alpha in [0.2, 0.5, 0.8] {
            let m = CovarianceModel::separable(SpatialCovariance::ConstantOne, alpha).unwrap();
            let tau: f64 = 1e4;
            let l = tau.powf(alpha) * m.eval(0.0, tau);
            assert!((l - 1.0).abs() < 0.01, "alpha={alpha}: L={l}");
        }
    }

    #[test]
    fn lrd_exponents_match_cited_rates() {
        let sep = CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.4).unwrap();
        let e2 = lrd_exponent(&sep, 2);
        assert_abs_diff_eq!(e2.theta, 0.8, epsilon = 1e-14);
        assert!(e2.is_lrd);
        let e3 = lrd_exponent(&sep, 3);
        assert_abs_diff_eq!(e3.theta, 1.2, epsilon = 1e-14);
        assert!(!e3.is_lrd);

        let gm = CovarianceModel::gneiting_ml(1.0, 0.5, 0.5, 0.4, 0.5, 2).unwrap();
        let e1 = lrd_exponent(&gm, 1);
        assert_abs_diff_eq!(e1.theta, 0.3, epsilon = 1e-14);
        assert!(e1.is_lrd);

        let gc = CovarianceModel::gneiting_cauchy(1.0, 0.5, 0.5, 1.0, 0.4, 0.5, 2).unwrap();
        assert_abs_diff_eq!(lrd_exponent(&gc, 1).theta, 2.0 * 0.5 * 0.5 * (1.0 - 0.2), epsilon = 1e-14);
    }

    #[test]
    fn lrd_exponent_matches_empirical_slope() {
        // log-log slope of tau -> C^m(z*, tau) at large tau vs -theta_m, m=1
        let cases: Vec<(CovarianceModel, f64)> = vec![
            (
                CovarianceModel::separable(
                    SpatialCovariance::PoweredExponential { lambda: 1.0, kappa: 1.0 },
                    0.4,
                )
                .unwrap(),
                1.0,
            ),
            (CovarianceModel::gneiting_ml(1.0, 0.6, 0.5556, 0.05, 0.5, 1).unwrap(), 1.0),
            (CovarianceModel::gneiting_cauchy(1.0, 0.6, 0.5556, 1.0, 0.05, 0.9, 1).unwrap(), 1.0),
        ];
        for (model, diameter) in cases {
            let zs = diameter / 2.0;
            let (t1, t2) = (1e4, 1e6);
            let slope =
                (model.eval(zs, t2).ln() - model.eval(zs, t1).ln()) / (t2.ln() - t1.ln());
            let theta = lrd_exponent(&model, 1).theta;
            assert!(
                (slope + theta).abs() < 0.05,
                "{model:?}: slope {slope:.4} vs -theta {:.4}",
                -theta
            );
        }
    }

    #[test]
    fn gneiting_ml_respects_spectral_lower_bound() {
        // substitute the Mittag-Leffler lower bound into the Gneiting form
        let (a, alpha, beta, gamma, nu, d) = (1.0, 0.6, 0.5556, 0.05, 0.5, 1usize);
        let model = CovarianceModel::gneiting_ml(a, alpha, beta, gamma, nu, d).unwrap();
        let g1mn = crate::specfun::gamma(1.0 - nu);
        for i in 0..50 {
            for j in 0..50 {
                let z = 2.0 * i as f64 / 49.0;
                let tau = 100.0 * j as f64 / 49.0;
                let s = a * tau.powf(2.0 * alpha) + 1.0;
                let lower = s.powf(-beta * d as f64 / 2.0)
                    / (1.0 + g1mn * z.powf(2.0 * gamma) / s.powf(beta * gamma));
                assert!(model.eval(z, tau) >= lower - 1e-10);
            }
        }
    }

    #[test]
    fn condition2_diagnostic_separable() {
        let psi = interval_psi();
        let ts: Vec<f64> = (6..=12).map(|k| (1u64 << k) as f64).collect();
        // alpha=0.4, m=1, delta=0.5: theta=0.4 < 1-delta -> strictly increasing
        let m = CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.4).unwrap();
        let rep = condition2_check(&m, &psi, 1, 0.5, &ts).unwrap();
        assert!(rep.strictly_increasing, "{:?}", rep.points);

        // alpha=0.9, m=2: theta=1.8 > 1 -> integral converges, T^{1-delta} scaling shrinks
        let m2 = CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.9).unwrap();
        let rep2 = condition2_check(&m2, &psi, 2, 0.5, &ts).unwrap();
        assert!(!rep2.strictly_increasing);
        let last = rep2.points.len() - 1;
        assert!(rep2.points[last].value < rep2.points[last - 1].value);
    }

    #[test]
    fn condition2_validates_input() {
        let psi = interval_psi();
        let m = CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.4).unwrap();
        assert!(condition2_check(&m, &psi, 1, 1.5, &[1.0, 2.0, 4.0]).is_err());
        assert!(condition2_check(&m, &psi, 1, 0.5, &[1.0, 2.0]).is_err());
        assert!(condition2_check(&m, &psi, 1, 0.5, &[2.0, 1.0, 4.0]).is_err());
    }

    #[test]
    fn sup_decay_reports() {
        let mut taus = vec![0.0];
        taus.extend((0..12).map(|k| (1u64 << k) as f64));
        let gm = CovarianceModel::gneiting_ml(1.0, 0.6, 0.5556, 0.05, 0.5, 1).unwrap();
        let rep = sup_decay_check(&gm, 1.0, &taus);
        assert_abs_diff_eq!(rep.sups[0], 1.0, epsilon = 1e-12);
        assert!(rep.nonincreasing);

        // constant-one spatial: sup equals the temporal factor
        let sep = CovarianceModel::separable(SpatialCovariance::ConstantOne, 0.4).unwrap();
        let rep2 = sup_decay_check(&sep, 1.0, &taus);
        for (i, &tau) in taus.iter().enumerate() {
            assert_abs_diff_eq!(rep2.sups[i], sep.temporal_factor(tau).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(CovarianceModel::separable(SpatialCovariance::ConstantOne, 1.0).is_err());
        assert!(CovarianceModel::separable(
            SpatialCovariance::PoweredExponential { lambda: -1.0, kappa: 1.0 },
            0.5
        )
        .is_err());
        assert!(CovarianceModel::gneiting_ml(1.0, 0.5, 0.5, 0.5, 1.0, 1).is_err());
        assert!(CovarianceModel::gneiting_cauchy(0.0, 0.5, 0.5, 1.0, 0.5, 0.5, 1).is_err());
        assert!(CovarianceModel::gneiting_ml(1.0, 0.5, 0.5, 0.5, 0.5, 0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        for m in shipped_models() {
            let s = serde_json::to_string(&m).unwrap();
            let back: CovarianceModel = serde_json::from_str(&s).unwrap();
            assert_eq!(m, back);
        }
    }
}
