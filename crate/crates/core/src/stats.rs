//! Goodness-of-fit and moment summaries for Monte Carlo ensembles.

use crate::error::{Error, Result};
use crate::specfun::gauss_cdf;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov survival function Q(x) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 x^2}.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        if term < 1e-18 {
            break;
        }
        acc += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * acc).clamp(1e-16, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, with the
/// asymptotic p-value (Stephens' finite-n correction).
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let n = samples.len();
    if n < 30 {
        return Err(Error::invalid("samples", format!("need >= 30, got {n}")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / nf).abs());
        d = d.max(((i as f64 + 1.0) / nf - f).abs());
    }
    let z = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(z),
        n,
    })
}

/// One-sample KS against the standard normal.
pub fn ks_test_normal(samples: &[f64]) -> Result<KsResult> {
    ks_test(samples, gauss_cdf)
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.len() < 30 || ys.len() < 30 {
        return Err(Error::invalid("samples", "need >= 30 in each sample"));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).expect("NaN in sample"));
    b.sort_by(|p, q| p.partial_cmp(q).expect("NaN in sample"));
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    let z = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(z),
        n: na.min(nb),
    })
}

/// Critical KS distance at significance `level` for sample size n
/// (inverts the corrected asymptotic statistic).
pub fn ks_critical_value(n: usize, level: f64) -> f64 {
    // invert Q(k) = level by bisection
    let (mut lo, mut hi) = (0.3, 3.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nf = n as f64;
    0.5 * (lo + hi) / (nf.sqrt() + 0.12 + 0.11 / nf.sqrt())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
    /// variance is (numerically) zero: shape statistics are meaningless
    pub degenerate: bool,
}

/// Central moments with jackknife standard errors (leave-one-out via power
/// sums, O(n)).
pub fn moment_report(samples: &[f64]) -> Result<MomentReport> {
    let n = samples.len();
    if n < 30 {
        return Err(Error::invalid("samples", format!("need >= 30, got {n}")));
    }
    let nf = n as f64;
    // center on the global mean first for numerical stability of power sums
    let rough_mean = samples.iter().sum::<f64>() / nf;
    let c: Vec<f64> = samples.iter().map(|x| x - rough_mean).collect();
    let s1: f64 = c.iter().sum();
    let s2: f64 = c.iter().map(|x| x * x).sum();
    let s3: f64 = c.iter().map(|x| x * x * x).sum();
    let s4: f64 = c.iter().map(|x| x * x * x * x).sum();

    let stats_from = |s1: f64, s2: f64, s3: f64, s4: f64, m: f64| -> (f64, f64, f64, f64) {
        let mean = s1 / m;
        let m2 = s2 / m - mean * mean;
        let m3 = s3 / m - 3.0 * mean * s2 / m + 2.0 * mean.powi(3);
        let m4 = s4 / m - 4.0 * mean * s3 / m + 6.0 * mean * mean * s2 / m - 3.0 * mean.powi(4);
        let var = m2 * m / (m - 1.0);
        if m2 <= 0.0 {
            return (mean, var.max(0.0), f64::NAN, f64::NAN);
        }
        (mean, var, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    let (mean_c, variance, skewness, excess_kurtosis) = stats_from(s1, s2, s3, s4, nf);
    let degenerate = !(variance > 1e-300) || !skewness.is_finite();

    let (mut se_mean, mut se_variance, mut se_skewness, mut se_kurtosis) = (0.0, 0.0, 0.0, 0.0);
    if !degenerate {
        let mut acc = [0.0f64; 4];
        let mut sums = [0.0f64; 4];
        let mut loo = Vec::with_capacity(n);
        for &x in &c {
            let (m_i, v_i, sk_i, ku_i) = stats_from(
                s1 - x,
                s2 - x * x,
                s3 - x * x * x,
                s4 - x * x * x * x,
                nf - 1.0,
            );
            loo.push([m_i, v_i, sk_i, ku_i]);
            for (s, v) in sums.iter_mut().zip([m_i, v_i, sk_i, ku_i]) {
                *s += v;
            }
        }
        for row in &loo {
            for k in 0..4 {
                let d = row[k] - sums[k] / nf;
                acc[k] += d * d;
            }
        }
        let factor = (nf - 1.0) / nf;
        se_mean = (factor * acc[0]).sqrt();
        se_variance = (factor * acc[1]).sqrt();
        se_skewness = (factor * acc[2]).sqrt();
        se_kurtosis = (factor * acc[3]).sqrt();
    }

    Ok(MomentReport {
        n,
        mean: mean_c + rough_mean,
        variance,
        skewness,
        excess_kurtosis,
        se_mean,
        se_variance,
        se_skewness,
        se_kurtosis,
        degenerate,
    })
}

/// Pearson correlation of two equal-length ensembles.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::invalid("samples", "need equal lengths >= 3"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Numerical("degenerate sample in correlation".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn ks_null_calibration() {
        // p-values under the null should rarely be tiny
        let mut small = 0;
        for seed in 0..200 {
            let xs = normals(500, seed);
            let r = ks_test_normal(&xs).unwrap();
            assert!(r.statistic > 0.0 && r.statistic < 1.0);
            if r.p_value < 0.001 {
                small += 1;
            }
        }
        assert!(small <= 2, "{small} tiny p-values out of 200 under the null");
    }

    #[test]
    fn ks_power_against_shift() {
        let xs: Vec<f64> = normals(1000, 7).iter().map(|x| x + 1.0).collect();
        let r = ks_test_normal(&xs).unwrap();
        assert!(r.p_value < 1e-6, "p = {}", r.p_value);
    }

    #[test]
    fn ks_needs_enough_samples() {
        assert!(ks_test_normal(&[0.0; 10]).is_err());
    }

    #[test]
    fn ks_two_sample_behaviour() {
        let xs = normals(800, 1);
        let ys = normals(800, 2);
        let same = ks_two_sample(&xs, &ys).unwrap();
        assert!(same.p_value > 0.001);
        let shifted: Vec<f64> = ys.iter().map(|y| y + 0.8).collect();
        let diff = ks_two_sample(&xs, &shifted).unwrap();
        assert!(diff.p_value < 1e-6);
    }

    #[test]
    fn ks_critical_values_match_table() {
        // classical asymptotic quantiles: K_{0.05} = 1.358, K_{0.01} = 1.628
        let d5 = ks_critical_value(400, 0.05);
        let d1 = ks_critical_value(400, 0.01);
        assert_abs_diff_eq!(d5 * (20.0 + 0.12 + 0.11 / 20.0), 1.358, epsilon = 2e-3);
        assert_abs_diff_eq!(d1 * (20.0 + 0.12 + 0.11 / 20.0), 1.628, epsilon = 2e-3);
    }

    #[test]
    fn moments_of_standard_normal() {
        let xs = normals(10_000, 11);
        let m = moment_report(&xs).unwrap();
        assert!(m.mean.abs() < 4.0 * m.se_mean);
        assert!((m.variance - 1.0).abs() < 4.0 * m.se_variance);
        assert!(m.skewness.abs() < 4.0 * m.se_skewness);
        assert!(m.excess_kurtosis.abs() < 5.0 * m.se_kurtosis);
        assert!(!m.degenerate);
    }

    #[test]
    fn moments_degenerate_flag() {
        let xs = vec![2.5; 100];
        let m = moment_report(&xs).unwrap();
        assert!(m.degenerate);
        assert_abs_diff_eq!(m.variance, 0.0, epsilon = 1e-20);
        assert!(m.skewness.is_nan());
    }

    #[test]
    fn correlation_basics() {
        let xs = normals(500, 21);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_abs_diff_eq!(correlation(&xs, &ys).unwrap(), 1.0, epsilon = 1e-12);
        let zs = normals(500, 22);
        assert!(correlation(&xs, &zs).unwrap().abs() < 0.2);
    }
}
