//! Goodness-of-fit tests for normality of estimator replications.
//!
//! KS and CvM p-values come from the asymptotic null laws with no
//! correction for estimated parameters, so they are conservative when the
//! data were studentized first.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chi2_sf, cvm_sf_inf, kolmogorov_sf, normal_cdf, normal_quantile, normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "cvm")]
    CvM,
    #[serde(rename = "ks")]
    KS,
    #[serde(rename = "sw")]
    SW,
    #[serde(rename = "pearson")]
    Pearson,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [TestKind::CvM, TestKind::KS, TestKind::SW, TestKind::Pearson];

    pub fn label(self) -> &'static str {
        match self {
            TestKind::CvM => "CvM",
            TestKind::KS => "KS",
            TestKind::SW => "SW",
            TestKind::Pearson => "Pearson",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub test: TestKind,
    pub n: usize,
}

fn sorted_finite(data: &[f64], min: usize, max: usize) -> Result<Vec<f64>> {
    if data.len() < min || data.len() > max {
        return Err(Error::Size { n: data.len(), min, max });
    }
    if let Some(x) = data.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain(format!("non-finite observation {x}")));
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Kolmogorov–Smirnov distance to a fully specified continuous cdf.
pub fn ks_test(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    let v = sorted_finite(data, 1, usize::MAX)?;
    let n = v.len() as f64;
    let d = v.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    });
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d).clamp(0.0, 1.0),
        test: TestKind::KS,
        n: v.len(),
    })
}

/// Cramér–von Mises W² against a fully specified continuous cdf.
pub fn cvm_test(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    let v = sorted_finite(data, 1, usize::MAX)?;
    let n = v.len() as f64;
    let w2 = 1.0 / (12.0 * n)
        + v.iter()
            .enumerate()
            .map(|(i, &x)| (cdf(x) - (2 * i + 1) as f64 / (2.0 * n)).powi(2))
            .sum::<f64>();
    Ok(TestResult {
        statistic: w2,
        p_value: cvm_sf_inf(w2).clamp(0.0, 1.0),
        test: TestKind::CvM,
        n: v.len(),
    })
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Half-vector of Shapiro–Wilk weights for the upper order statistics,
/// largest first.
fn sw_weights(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> =
        (1..=half).map(|i| -normal_quantile((i as f64 - 0.375) / an25)).collect();
    let summ2 = 2.0 * m.iter().map(|x| x * x).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) + m[0] / ssumm2;
    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = poly(&C2, rsn) + m[1] / ssumm2;
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
    };
    for i in first..half {
        a[i] = m[i] / fac;
    }
    a
}

fn sw_p_value(w: f64, n: usize) -> f64 {
    if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - 0.75_f64.sqrt().asin());
        return p.clamp(0.0, 1.0);
    }
    let an = n as f64;
    let y = (1.0 - w).ln();
    let (y, m, s) = if n <= 11 {
        let gamma = poly(&[-2.273, 0.459], an);
        if y >= gamma {
            return 0.0;
        }
        (
            -(gamma - y).ln(),
            poly(&[0.544, -0.39978, 0.025054, -6.714e-4], an),
            poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp(),
        )
    } else {
        let x = an.ln();
        (
            y,
            poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], x),
            poly(&[-0.4803, -0.082676, 0.0030302], x).exp(),
        )
    };
    normal_sf((y - m) / s).clamp(0.0, 1.0)
}

/// Shapiro–Wilk W with Royston's normalizing approximation.
pub fn shapiro_wilk(data: &[f64]) -> Result<TestResult> {
    let v = sorted_finite(data, 3, 5000)?;
    let n = v.len();
    if v[n - 1] - v[0] <= 0.0 {
        return Err(Error::DegenerateData("all observations are equal".into()));
    }
    let a = sw_weights(n);
    let b: f64 = a.iter().enumerate().map(|(i, ai)| ai * (v[n - 1 - i] - v[i])).sum();
    let mean = v.iter().sum::<f64>() / n as f64;
    let ssq: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    let w = (b * b / ssq).min(1.0);
    Ok(TestResult { statistic: w, p_value: sw_p_value(w, n), test: TestKind::SW, n })
}

/// Number of equiprobable cells used by the Pearson test.
pub fn pearson_cells(n: usize) -> usize {
    ((2.0 * (n as f64).powf(0.4)).ceil() as usize).max(4)
}

/// Pearson χ² of observed counts against equal expected counts.
pub fn pearson_statistic(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum()
}

fn studentize(data: &[f64]) -> Result<Vec<f64>> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DegenerateData("sample standard deviation is zero".into()));
    }
    Ok(data.iter().map(|x| (x - mean) / sd).collect())
}

/// Pearson χ² on equiprobable standard-normal cells after studentizing.
pub fn pearson_test(data: &[f64]) -> Result<TestResult> {
    let v = sorted_finite(data, 20, usize::MAX)?;
    let z = studentize(&v)?;
    let m = pearson_cells(v.len());
    let mut counts = vec![0usize; m];
    for x in z {
        counts[((normal_cdf(x) * m as f64) as usize).min(m - 1)] += 1;
    }
    let stat = pearson_statistic(&counts);
    Ok(TestResult {
        statistic: stat,
        p_value: chi2_sf(stat, (m - 3) as f64).clamp(0.0, 1.0),
        test: TestKind::Pearson,
        n: v.len(),
    })
}

/// Runs all four tests on the studentized values against N(0, 1).
pub fn normality_battery(estimates: &[f64]) -> Result<BTreeMap<TestKind, TestResult>> {
    sorted_finite(estimates, 20, usize::MAX)?;
    let z = studentize(estimates)?;
    let mut out = BTreeMap::new();
    out.insert(TestKind::CvM, cvm_test(&z, normal_cdf)?);
    out.insert(TestKind::KS, ks_test(&z, normal_cdf)?);
    if z.len() <= 5000 {
        out.insert(TestKind::SW, shapiro_wilk(&z)?);
    }
    out.insert(TestKind::Pearson, pearson_test(&z)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, normal_draws, DEFAULT_SEED};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn midpoints(n: usize) -> Vec<f64> {
        (0..n).map(|i| normal_quantile((2 * i + 1) as f64 / (2 * n) as f64)).collect()
    }

    #[test]
    fn ks_examples() {
        let r = ks_test(&midpoints(25), normal_cdf).unwrap();
        assert_relative_eq!(r.statistic, 1.0 / 50.0, epsilon = 1e-12);
        let r = ks_test(&[0.0], normal_cdf).unwrap();
        assert_relative_eq!(r.statistic, 0.5, epsilon = 1e-15);
        assert!(ks_test(&[], normal_cdf).is_err());
    }

    #[test]
    fn cvm_examples() {
        let r = cvm_test(&[0.0], normal_cdf).unwrap();
        assert_relative_eq!(r.statistic, 1.0 / 12.0, epsilon = 1e-15);
        let r = cvm_test(&midpoints(40), normal_cdf).unwrap();
        assert_relative_eq!(r.statistic, 1.0 / 480.0, epsilon = 1e-12);
    }

    #[test]
    fn cvm_transform_invariance() {
        let x = normal_draws(60, 11);
        let a = cvm_test(&x, normal_cdf).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let b = cvm_test(&y, |t: f64| normal_cdf(t.ln())).unwrap();
        assert_relative_eq!(a.statistic, b.statistic, epsilon = 1e-12);
    }

    #[test]
    fn shapiro_wilk_examples() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(r.statistic, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-9);
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::Size { .. })));
        assert!(matches!(shapiro_wilk(&vec![0.5; 5001]), Err(Error::Size { .. })));
        let x = normal_draws(500, DEFAULT_SEED);
        assert!(shapiro_wilk(&x).unwrap().p_value > 0.001);
    }

    // Reference values from scipy.stats.shapiro.
    #[test]
    fn shapiro_wilk_matches_reference() {
        let cases: [(&[f64], f64, f64); 4] = [
            (&[2.1, 0.4, 3.3, 1.7], 0.989377551026796, 0.9542574793239262),
            (&[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0], 0.7931897014985756, 0.03505476674002426),
            (
                &[0.3, -1.2, 0.8, 2.4, -0.5, 0.1, 1.9, -2.2, 0.7, 0.05, -0.9, 1.3, 0.45, -0.15],
                0.9897469093054765,
                0.9994662032263817,
            ),
            (&[1.0, 1.5, 9.0], 0.796680497925311, 0.10659798663498787),
        ];
        for (x, w, p) in cases {
            let r = shapiro_wilk(x).unwrap();
            assert_relative_eq!(r.statistic, w, epsilon = 2e-6);
            assert_relative_eq!(r.p_value, p, epsilon = 2e-5);
        }
    }

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson_statistic(&[10; 8]), 0.0);
        let alt = [13, 12, 13, 12, 13, 12, 13, 12];
        assert_relative_eq!(pearson_statistic(&alt), 0.16, epsilon = 1e-12);
        assert_eq!(pearson_cells(20), 7);
        assert!(matches!(pearson_test(&[0.0; 19]), Err(Error::Size { .. })));
    }

    // Reference values from scipy: kstest with the asymptotic method, and the
    // cramervonmises statistic with the limiting-law survival function.
    #[test]
    fn ks_cvm_match_reference() {
        let x = [-1.3, -0.4, 0.05, 0.2, 0.9, 1.4, 2.2];
        let ks = ks_test(&x, normal_cdf).unwrap();
        let cvm = cvm_test(&x, normal_cdf).unwrap();
        assert_relative_eq!(ks.statistic, KS_REF.0, epsilon = 1e-9);
        assert_relative_eq!(cvm.statistic, CVM_REF.0, epsilon = 1e-9);
        assert_relative_eq!(ks.p_value, KS_REF.1, epsilon = 1e-8);
        assert_relative_eq!(cvm.p_value, CVM_REF.1, epsilon = 1e-6);
    }

    const KS_REF: (f64, f64) = (0.24451130322466907, 0.7967726959321921);
    const CVM_REF: (f64, f64) = (0.11340604585364608, 0.5230674476344155);

    #[test]
    fn battery_rejects_constant_input() {
        assert!(matches!(normality_battery(&[2.5; 30]), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn battery_null_self_test() {
        let x = normal_draws(200, DEFAULT_SEED);
        let r = normality_battery(&x).unwrap();
        assert_eq!(r.len(), 4);
        for (k, t) in &r {
            assert!(t.p_value > 0.05, "{k}: {t:?}");
        }
    }

    #[test]
    fn null_rejection_rates() {
        let reps = 400;
        let mut rejects = [0usize; 4];
        let mut battery_rejects = [0usize; 4];
        for rep in 0..reps {
            let x = normal_draws(200, derive_seed(99, &[rep]));
            let direct = [
                cvm_test(&x, normal_cdf).unwrap(),
                ks_test(&x, normal_cdf).unwrap(),
                shapiro_wilk(&x).unwrap(),
                pearson_test(&x).unwrap(),
            ];
            for (i, t) in direct.iter().enumerate() {
                rejects[i] += (t.p_value < 0.05) as usize;
            }
            for (i, t) in normality_battery(&x).unwrap().values().enumerate() {
                battery_rejects[i] += (t.p_value < 0.05) as usize;
            }
        }
        for i in 0..4 {
            let rate = rejects[i] as f64 / reps as f64;
            assert!((0.02..=0.08).contains(&rate), "{}: {rate}", TestKind::ALL[i]);
            // Estimated location and scale only make the battery more conservative.
            assert!(battery_rejects[i] as f64 / (reps as f64) <= 0.08);
        }
    }

    proptest! {
        #[test]
        fn battery_affine_invariant(seed in 0u64..1000, a in 0.1f64..50.0, b in -100f64..100.0) {
            let x = normal_draws(40, seed);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r1 = normality_battery(&x).unwrap();
            let r2 = normality_battery(&y).unwrap();
            for k in TestKind::ALL {
                prop_assert!((r1[&k].statistic - r2[&k].statistic).abs() < 1e-8);
                prop_assert!((0.0..=1.0).contains(&r1[&k].p_value));
            }
        }

        #[test]
        fn ks_dominance(seed in 0u64..1000, n in 1usize..80) {
            let mut x = normal_draws(n, seed);
            let d = ks_test(&x, normal_cdf).unwrap().statistic;
            x.sort_by(f64::total_cmp);
            for (i, v) in x.iter().enumerate() {
                let gap = (normal_cdf(*v) - (2 * i + 1) as f64 / (2 * n) as f64).abs();
                prop_assert!(d >= gap - 0.5 / n as f64 - 1e-12);
            }
        }

        #[test]
        fn ks_duplicate_worst_point(seed in 0u64..1000, n in 1usize..50) {
            let x = normal_draws(n, seed);
            let d = ks_test(&x, normal_cdf).unwrap().statistic;
            let mut x = x;
            x.sort_by(f64::total_cmp);
            let gap = |i: usize| {
                let f = normal_cdf(x[i]);
                ((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64)
            };
            let worst = (0..n).max_by(|&a, &b| gap(a).total_cmp(&gap(b))).unwrap();
            let mut y = x.clone();
            y.push(x[worst]);
            prop_assert!(ks_test(&y, normal_cdf).unwrap().statistic >= d - 1e-12);
        }

        #[test]
        fn sw_location_scale(seed in 0u64..1000, n in 3usize..200, a in 0.01f64..100.0, b in -50f64..50.0) {
            let x = normal_draws(n, seed);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let w1 = shapiro_wilk(&x).unwrap();
            let w2 = shapiro_wilk(&y).unwrap();
            prop_assert!((w1.statistic - w2.statistic).abs() < 1e-9);
            prop_assert!(w1.statistic > 0.0 && w1.statistic <= 1.0);
        }
    }
}
