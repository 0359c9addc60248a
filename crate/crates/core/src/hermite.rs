//! Hermite expansions of square-integrable transforms of a standard Gaussian:
//! Fourier-Hermite coefficients, closed forms for the threshold indicators,
//! and Hermite-rank detection.
//!
//! Coefficient conventions follow the expansion
//! G(z) = sum_q (G_q / q!) H_q(z), G_q = int H_q(xi) G(xi) phi(xi) dxi.

use crate::error::{Error, Result};
use crate::specfun::{
    gauss_cdf, gauss_hermite_weighted, gauss_pdf, QuadratureKind, QuadratureRule,
};
use std::sync::Arc;

/// G_q for the excursion indicator 1{z >= u}: G_0 = 1 - Phi(u),
/// G_q = phi(u) H_{q-1}(u) for q >= 1.
pub fn coeff_indicator(u: f64, q: u32) -> f64 {
    if q == 0 {
        1.0 - gauss_cdf(u)
    } else {
        gauss_pdf(u) * crate::specfun::hermite_poly_unchecked(q - 1, u)
    }
}

/// G_q for the modulus indicator 1{|z| >= u}, u >= 0: twice the indicator
/// coefficients at even orders, zero at odd orders.
pub fn coeff_abs_indicator(u: f64, q: u32) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::invalid("u", format!("{u} must be >= 0")));
    }
    Ok(if q == 0 {
        2.0 * (1.0 - gauss_cdf(u))
    } else if q % 2 == 1 {
        0.0
    } else {
        2.0 * gauss_pdf(u) * crate::specfun::hermite_poly_unchecked(q - 1, u)
    })
}

/// Fourier-Hermite coefficient of an arbitrary transform by Gauss-Hermite
/// quadrature (needs a hermite-weighted rule with at least 64 nodes).
pub fn coeff_numeric(
    transform: impl Fn(f64) -> f64,
    q: u32,
    rule: &QuadratureRule,
) -> Result<f64> {
    if rule.kind != QuadratureKind::HermiteWeighted || rule.len() < 64 {
        return Err(Error::invalid(
            "rule",
            "need a hermite-weighted rule with >= 64 nodes",
        ));
    }
    let mut acc = Vec::with_capacity(rule.len());
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let g = transform(x);
        if !g.is_finite() {
            return Err(Error::Numerical(format!(
                "transform not finite at quadrature node {x}"
            )));
        }
        acc.push(w * g * crate::specfun::hermite_poly_unchecked(q, x));
    }
    Ok(crate::specfun::pairwise_sum(&acc))
}

/// A transform G with its cached coefficients and Hermite rank.
#[derive(Clone)]
pub struct FunctionalSpec {
    kind: FunctionalKind,
    /// G_0 .. G_Q
    coeffs: Vec<f64>,
    rank: u32,
}

#[derive(Clone)]
enum FunctionalKind {
    Indicator { u: f64 },
    AbsIndicator { u: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            FunctionalKind::Indicator { u } => write!(f, "Indicator(u={u}, rank={})", self.rank),
            FunctionalKind::AbsIndicator { u } => {
                write!(f, "AbsIndicator(u={u}, rank={})", self.rank)
            }
            FunctionalKind::Custom(_) => write!(f, "Custom(rank={})", self.rank),
        }
    }
}

pub const DEFAULT_COEFF_DEPTH: u32 = 40;
pub const RANK_TOLERANCE: f64 = 1e-10;

impl FunctionalSpec {
    /// Excursion indicator 1{z >= u}.
    pub fn indicator(u: f64) -> Self {
        let coeffs: Vec<f64> = (0..=DEFAULT_COEFF_DEPTH)
            .map(|q| coeff_indicator(u, q))
            .collect();
        let rank = detect_rank(&coeffs, RANK_TOLERANCE).expect("phi(u) H_{q-1}(u) cannot all vanish");
        Self {
            kind: FunctionalKind::Indicator { u },
            coeffs,
            rank,
        }
    }

    /// Modulus indicator 1{|z| >= u}, u > 0 (rank 2).
    ///
    /// At u = 0 the functional is almost surely constant (every H_{q-1}(0)
    /// with even q vanishes along with the odd coefficients), so no rank
    /// exists and construction fails; the rank-2 statistics downstream
    /// require u > 0.
    pub fn abs_indicator(u: f64) -> Result<Self> {
        let coeffs = (0..=DEFAULT_COEFF_DEPTH)
            .map(|q| coeff_abs_indicator(u, q))
            .collect::<Result<Vec<_>>>()?;
        let rank = detect_rank(&coeffs, RANK_TOLERANCE).ok_or_else(|| {
            Error::invalid(
                "u",
                "the modulus indicator is a.s. constant at u = 0; no Hermite rank exists",
            )
        })?;
        Ok(Self {
            kind: FunctionalKind::AbsIndicator { u },
            coeffs,
            rank,
        })
    }

    /// Arbitrary point-evaluable transform; coefficients by 128-node
    /// Gauss-Hermite quadrature up to `depth`.
    pub fn custom(transform: Arc<dyn Fn(f64) -> f64 + Send + Sync>, depth: u32) -> Result<Self> {
        let rule = gauss_hermite_weighted(128)?;
        let coeffs = (0..=depth)
            .map(|q| coeff_numeric(&*transform, q, &rule))
            .collect::<Result<Vec<_>>>()?;
        let rank = detect_rank(&coeffs, RANK_TOLERANCE).ok_or_else(|| {
            Error::Numerical(format!(
                "no coefficient above {RANK_TOLERANCE} up to order {depth}"
            ))
        })?;
        Ok(Self {
            kind: FunctionalKind::Custom(transform),
            coeffs,
            rank,
        })
    }

    /// Smallest q >= 1 with |G_q| above tolerance.
    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// G_q (0 beyond the cached depth).
    pub fn coeff(&self, q: u32) -> f64 {
        self.coeffs.get(q as usize).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn depth(&self) -> u32 {
        (self.coeffs.len() - 1) as u32
    }

    /// Pointwise evaluation of the transform itself.
    pub fn eval(&self, z: f64) -> f64 {
        match &self.kind {
            FunctionalKind::Indicator { u } => {
                if z >= *u {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionalKind::AbsIndicator { u } => {
                if z.abs() >= *u {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionalKind::Custom(f) => f(z),
        }
    }

    /// Threshold of the indicator variants.
    pub fn threshold(&self) -> Option<f64> {
        match &self.kind {
            FunctionalKind::Indicator { u } | FunctionalKind::AbsIndicator { u } => Some(*u),
            FunctionalKind::Custom(_) => None,
        }
    }

    /// Variance of G(Z): sum_{q>=1} G_q^2 / q!.
    pub fn variance(&self) -> f64 {
        let mut fact = 1.0;
        let mut acc = 0.0;
        for q in 1..self.coeffs.len() {
            fact *= q as f64;
            acc += self.coeffs[q] * self.coeffs[q] / fact;
        }
        acc
    }
}

/// Smallest q >= 1 with |G_q| > tol, given coefficients G_0..G_Q.
pub fn hermite_rank(coeffs: &[f64], tol: f64) -> Result<u32> {
    detect_rank(coeffs, tol).ok_or_else(|| {
        Error::Numerical(format!(
            "all coefficients up to order {} below tolerance {tol}",
            coeffs.len().saturating_sub(1)
        ))
    })
}

fn detect_rank(coeffs: &[f64], tol: f64) -> Option<u32> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, c)| c.abs() > tol)
        .map(|(q, _)| q as u32)
}
