//! Gauss-Legendre and Gauss-Hermite quadrature rules.
//!
//! The Hermite rule integrates against the standard Gaussian density phi(x) dx
//! (probabilists' normalization), so its weights sum to one.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureKind {
    /// Exact for polynomials of degree 2n-1 on [a, b] against dx.
    LegendreOnInterval { a: f64, b: f64 },
    /// Exact for polynomials of degree 2n-1 against phi(x) dx.
    HermiteWeighted,
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: QuadratureKind,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of w_i f(x_i).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Pairwise (cascade) summation: deterministic and with O(log n) error growth.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// n-point Gauss-Legendre rule on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    check_n(n)?;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::invalid("a/b", format!("bad interval [{a}, {b}]")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p1, pp) = legendre_and_derivative(n, z);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        let (_, pp) = legendre_and_derivative(n, z);
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        let w = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: QuadratureKind::LegendreOnInterval { a, b },
    })
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
    }
    let pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
    (p1, pp)
}

/// n-point Gauss-Hermite rule against phi(x) dx (probabilists' weight).
///
/// Built by Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix
/// (diagonal 0, off-diagonal sqrt(k)), weights come from first eigenvector
/// components. For very large n the extreme weights fall below the smallest
/// positive f64; they are clamped to `f64::MIN_POSITIVE` to keep the rule's
/// positivity invariant (their true magnitude is far below any use here).
pub fn gauss_hermite_weighted(n: usize) -> Result<QuadratureRule> {
    check_n(n)?;
    let mut diag = vec![0.0f64; n];
    let mut off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let mut first_row = vec![0.0f64; n];
    first_row[0] = 1.0;
    imtqlx(&mut diag, &mut off, &mut first_row)?;
    let weights: Vec<f64> = first_row
        .iter()
        .map(|&z| (z * z).max(f64::MIN_POSITIVE))
        .collect();
    Ok(QuadratureRule {
        nodes: diag,
        weights,
        kind: QuadratureKind::HermiteWeighted,
    })
}

/// Implicit-QL diagonalization of a symmetric tridiagonal matrix that also
/// carries a row vector through the rotations (Golub-Welsch weight extraction).
/// Eigenvalues are returned sorted ascending in `d`, with matching entries in `z`.
fn imtqlx(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    let mut e = {
        let mut v = e.to_vec();
        v.push(0.0);
        v
    };
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Numerical(
                    "tridiagonal QL iteration did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if r == 0.0 && i > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    // insertion-sort eigenpairs ascending
    for i in 1..n {
        let dv = d[i];
        let zv = z[i];
        let mut j = i;
        while j > 0 && d[j - 1] > dv {
            d[j] = d[j - 1];
            z[j] = z[j - 1];
            j -= 1;
        }
        d[j] = dv;
        z[j] = zv;
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > 512 {
        return Err(Error::invalid("n", format!("{n} outside 1..=512")));
    }
    Ok(())
}
