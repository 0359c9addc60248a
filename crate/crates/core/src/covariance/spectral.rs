//! Spectral densities of the separable model: numeric cosine transform of the
//! temporal kernel (with the Tauberian low-frequency comparison value) and
//! radial Hankel-type transforms of the spatial kernels for d <= 4.
//!
//! Oscillatory tails are integrated over half-period panels and the
//! alternating panel series is Euler-accelerated, which handles both the
//! power-law kernels (slow decay) and the low-frequency regime.

use super::{CovarianceModel, SpatialCovariance};
use crate::error::{Error, Result};
use crate::specfun::gauss_legendre;
use crate::variance::tauberian_constant;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TemporalSpectralPoint {
    pub frequency: f64,
    /// f_T(mu) from the numeric cosine transform
    pub value: f64,
    /// Tauberian comparison c_T(alpha) L(1/|mu|) / |mu|^{1-alpha}, present below
    /// the low-frequency crossover
    pub tauberian: Option<f64>,
}

/// Temporal spectral density of the separable model,
/// f_T(mu) = (1/pi) int_0^inf cos(mu tau) C_T(tau) dtau.
pub fn temporal_spectral_density(model: &CovarianceModel, mu: f64) -> Result<TemporalSpectralPoint> {
    let CovarianceModel::Separable { alpha, .. } = *model else {
        return Err(Error::invalid("model", "temporal spectral density needs the separable variant"));
    };
    let u = mu.abs();
    if u == 0.0 {
        return Err(Error::invalid(
            "mu",
            "f_T diverges at zero frequency under long-range dependence",
        ));
    }
    let ct = move |tau: f64| (1.0 + tau * tau).powf(-alpha / 2.0);
    let value = oscillatory_transform(&ct, u, Kernel::Cos)? / PI;
    let tauberian = if u < 0.1 {
        let tau = 1.0 / u;
        let slowly_varying = tau.powf(alpha) * ct(tau);
        Some(tauberian_constant(alpha)? * slowly_varying / u.powf(1.0 - alpha))
    } else {
        None
    };
    Ok(TemporalSpectralPoint {
        frequency: mu,
        value,
        tauberian,
    })
}

/// Radial spatial spectral density f_S(||omega||) in dimension d (1..=4):
/// f_S = (2pi)^{-d} int_{R^d} e^{-i <omega, x>} C_S(||x||) dx.
///
/// Exponential decay (kappa = 1) in d = 1 uses the closed Cauchy-density form;
/// everything else goes through the radial transform. Values with magnitude
/// below 1e-12 are clipped to zero.
pub fn spatial_spectral_density(spatial: &SpatialCovariance, d: usize, omega: f64) -> Result<f64> {
    spatial.validate()?;
    if d == 0 || d > 4 {
        return Err(Error::invalid("d", format!("{d} outside the supported range 1..=4")));
    }
    // integrability of C_S(r) r^{d-1}: the Cauchy family needs 2 gamma nu > d
    if let SpatialCovariance::Cauchy { gamma, nu, .. } = *spatial {
        if 2.0 * gamma * nu <= d as f64 {
            return Err(Error::Numerical(format!(
                "spatial transform non-convergent: Cauchy tail exponent {} <= d = {d}",
                2.0 * gamma * nu
            )));
        }
    }
    let w = omega.abs();
    if let SpatialCovariance::PoweredExponential { lambda, kappa } = *spatial {
        if d == 1 && (kappa - 1.0).abs() < 1e-14 {
            return Ok(lambda / PI / (lambda * lambda + w * w));
        }
    }
    let f = |r: f64| spatial.eval(r);
    let value = if w < 1e-12 {
        // f_S(0) = (2pi)^{-d} |S_{d-1}| int_0^inf C_S(r) r^{d-1} dr
        let radial = oscillatory_transform(&|r: f64| f(r) * r.powi(d as i32 - 1), 1.0, Kernel::One)?;
        crate::geometry::sphere_area(d) * radial / (2.0 * PI).powi(d as i32)
    } else {
        match d {
            1 => oscillatory_transform(&f, w, Kernel::Cos)? / PI,
            2 => oscillatory_transform(&|r: f64| f(r) * r, w, Kernel::J0)? / (2.0 * PI),
            3 => oscillatory_transform(&|r: f64| f(r) * r, w, Kernel::Sin)? / (2.0 * PI * PI * w),
            4 => oscillatory_transform(&|r: f64| f(r) * r * r, w, Kernel::J1)? / (4.0 * PI * PI * w),
            _ => unreachable!(),
        }
    };
    if value < 0.0 {
        if value > -1e-12 {
            return Ok(0.0);
        }
        return Err(Error::Numerical(format!(
            "spatial spectral density came out negative ({value:.3e}) at omega={omega}"
        )));
    }
    Ok(value)
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    One,
    Cos,
    Sin,
    J0,
    J1,
}

impl Kernel {
    fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::One => 1.0,
            Kernel::Cos => x.cos(),
            Kernel::Sin => x.sin(),
            Kernel::J0 => bessel_j0(x),
            Kernel::J1 => bessel_j1(x),
        }
    }

    /// first positive zero (argument scale)
    fn first_zero(self) -> f64 {
        match self {
            Kernel::One => 1.0,
            Kernel::Cos => PI / 2.0,
            Kernel::Sin => PI,
            Kernel::J0 => 2.404_825_557_695_773,
            Kernel::J1 => 3.831_705_970_207_512,
        }
    }
}

/// int_0^inf f(r) K(u r) dr for a nonnegative decaying f: head panel up to the
/// kernel's first zero, then half-period panels with Euler acceleration of the
/// alternating partial sums. Every panel is subdivided so that both the
/// oscillation and f's own variation stay resolved.
pub(crate) fn oscillatory_transform(
    f: &dyn Fn(f64) -> f64,
    u: f64,
    kernel: Kernel,
) -> Result<f64> {
    debug_assert!(u > 0.0);
    if kernel == Kernel::One {
        // plain decaying integral: geometric panels until the tail is negligible
        let mut total = 0.0;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for _ in 0..80 {
            total += panel_integral(f, u, kernel, lo, hi)?;
            let tail_probe = f(hi).abs() * hi;
            if tail_probe < 1e-15 * total.abs().max(1e-12) {
                return Ok(total);
            }
            lo = hi;
            hi *= 2.0;
        }
        return Err(Error::Quadrature(
            "radial integral did not settle within the panel budget".into(),
        ));
    }

    let half_period = PI / u;
    let mut edge = kernel.first_zero() / u;
    let mut total = panel_integral(f, u, kernel, 0.0, edge)?;
    let mut partials: Vec<f64> = Vec::with_capacity(96);
    let mut tiny_in_a_row = 0;
    for _ in 0..96 {
        let next = edge + half_period;
        let c = panel_integral(f, u, kernel, edge, next)?;
        total += c;
        partials.push(total);
        edge = next;
        if c.abs() < 1e-16 * total.abs().max(1e-12) {
            tiny_in_a_row += 1;
            if tiny_in_a_row >= 2 {
                return Ok(total);
            }
        } else {
            tiny_in_a_row = 0;
        }
    }
    Ok(euler_accelerate(&partials))
}

fn panel_integral(
    f: &dyn Fn(f64) -> f64,
    u: f64,
    kernel: Kernel,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut a = lo;
    let mut guard = 0;
    while a < hi {
        // resolve the kernel oscillation and the kernel f's own scale
        let width = (hi - a).min((PI / (2.0 * u)).min((a / 6.0).max(0.5)));
        let b = (a + width).min(hi);
        let rule = gauss_legendre(16, a, b)?;
        total += rule.integrate(|r| f(r) * kernel.eval(u * r));
        a = b;
        guard += 1;
        if guard > 4000 {
            return Err(Error::Quadrature("panel subdivision budget exceeded".into()));
        }
    }
    if !total.is_finite() {
        return Err(Error::Quadrature(format!("non-finite panel on [{lo}, {hi}]")));
    }
    Ok(total)
}

/// Iterated averaging of the trailing partial sums (Euler transformation of an
/// alternating series).
fn euler_accelerate(partials: &[f64]) -> f64 {
    let m = partials.len().min(14);
    let mut s: Vec<f64> = partials[partials.len() - m..].to_vec();
    while s.len() > 1 {
        for i in 0..s.len() - 1 {
            s[i] = 0.5 * (s[i] + s[i + 1]);
        }
        s.pop();
    }
    s[0]
}

// Rational/asymptotic approximations for J0, J1 (single-precision-era
// coefficients carried to double, ~1e-8 accuracy; ample for the transforms).
pub(crate) fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let p1 = 57_568_490_574.0
            + y * (-13_362_590_354.0
                + y * (651_619_640.7 + y * (-11_214_424.18 + y * (77_392.330_17 + y * (-184.905_245_6)))));
        let p2 = 57_568_490_411.0
            + y * (1_029_532_985.0 + y * (9_494_680.718 + y * (59_272.648_53 + y * (267.853_271_2 + y))));
        p1 / p2
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 0.785_398_163_4;
        let p1 = 1.0
            + y * (-0.109_862_862_7e-2
                + y * (0.273_451_040_7e-4 + y * (-0.207_337_063_9e-5 + y * 0.209_388_721_1e-6)));
        let p2 = -0.156_249_999_5e-1
            + y * (0.143_048_876_5e-3
                + y * (-0.691_114_765_1e-5 + y * (0.762_109_516_1e-6 + y * (-0.934_935_152e-7))));
        (2.0 / (PI * ax)).sqrt() * (xx.cos() * p1 - z * xx.sin() * p2)
    }
}

pub(crate) fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < 8.0 {
        let y = x * x;
        let p1 = x
            * (72_362_614_232.0
                + y * (-7_895_059_235.0
                    + y * (242_396_853.1 + y * (-2_972_611.439 + y * (15_704.482_60 + y * (-30.160_366_06))))));
        let p2 = 144_725_228_442.0
            + y * (2_300_535_178.0 + y * (18_583_304.74 + y * (99_447.433_94 + y * (376.999_139_7 + y))));
        return p1 / p2;
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 2.356_194_491;
        let p1 = 1.0
            + y * (0.183_105e-2
                + y * (-0.351_639_64_96e-4 + y * (0.245_752_017_4e-5 + y * (-0.240_337_019_6e-6))));
        let p2 = 0.046_874_999_95
            + y * (-0.200_269_087_3e-3
                + y * (0.844_919_909_6e-5 + y * (-0.882_289_870_5e-6 + y * 0.105_787_412e-6)));
        (2.0 / (PI * ax)).sqrt() * (xx.cos() * p1 - z * xx.sin() * p2)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}
