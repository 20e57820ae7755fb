//! Hill's tail index, Weissman's high quantile, and Peng's mean estimator.

use serde::{Deserialize, Serialize};

use crate::dist::HallConstants;
use crate::empirical::{SortedSample, TailView};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PengEstimate {
    pub mean_hat: f64,
    pub hill_alpha: f64,
    pub k: usize,
    /// `√(k/n) X(n-k,n) σ(α̂) / √n`; absent when the Hill estimate is outside
    /// `(1, 2)` where the asymptotic variance is not defined.
    pub std_err: Option<f64>,
}

pub(crate) fn hill_from_view(tail: &TailView) -> Result<f64> {
    if tail.s1 <= 0.0 {
        return Err(Error::DegenerateTail { k: tail.k });
    }
    Ok(1.0 / tail.s1)
}

/// Hill estimator: reciprocal of the mean log-spacing over the top `k`.
pub fn hill(sample: &SortedSample, k: usize) -> Result<f64> {
    hill_from_view(&sample.tail_view(k)?)
}

/// Weissman's extrapolated quantile `Q(1 - s)` for `0 < s < k/n`, and `s = k/n`
/// where it reduces to the threshold.
pub fn weissman_quantile(sample: &SortedSample, k: usize, s: f64) -> Result<f64> {
    let tail = sample.tail_view(k)?;
    let alpha = hill_from_view(&tail)?;
    let frac = k as f64 / sample.n() as f64;
    if !(s > 0.0 && s <= frac) {
        return Err(Error::domain(format!("level s = {s} must lie in (0, k/n = {frac}]")));
    }
    Ok(tail.threshold * (frac / s).powf(1.0 / alpha))
}

/// Peng's estimator: Weissman tail integrated over `(0, k/n)` plus the
/// empirical mean of the remaining observations.
pub fn peng_mean(sample: &SortedSample, k: usize) -> Result<PengEstimate> {
    let tail = sample.tail_view(k)?;
    let alpha = hill_from_view(&tail)?;
    if alpha <= 1.0 {
        return Err(Error::InfiniteMean { alpha });
    }
    let n = sample.n() as f64;
    let frac = k as f64 / n;
    let mean_hat = frac * alpha / (alpha - 1.0) * tail.threshold + sample.lower_tail_mean(k)?;
    let std_err = peng_variance(alpha)
        .ok()
        .map(|v| frac.sqrt() * tail.threshold * v.sqrt() / n.sqrt());
    Ok(PengEstimate { mean_hat, hill_alpha: alpha, k, std_err })
}

/// `σ²(α) = α / ((1-α)⁴ (2-α))` for `1 < α < 2`.
pub fn peng_variance(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!("Peng variance needs 1 < alpha < 2, got {alpha}")));
    }
    Ok(alpha / ((1.0 - alpha).powi(4) * (2.0 - alpha)))
}

/// Asymptotically MSE-optimal number of upper order statistics for Hill's
/// estimator, rounded and clamped into `[1, n-1]`.
pub fn k_opt(constants: &HallConstants, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::domain("k_opt needs n >= 2"));
    }
    let HallConstants { alpha: a, beta: b, c, d, .. } = *constants;
    let coef = a * b * b * (b - a).powi(-3) * d.powi(-2) * c.powf(2.0 * b / a) / 2.0;
    let k = coef.powf(a / (2.0 * b - a)) * (n as f64).powf((2.0 * b - 2.0 * a) / (2.0 * b - a));
    Ok((k.round() as usize).clamp(1, n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::HeavyTailModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn powers_of_e() -> SortedSample {
        SortedSample::new(vec![1.0, E, E * E, E.powi(3)]).unwrap()
    }

    fn small() -> SortedSample {
        SortedSample::new(vec![1.0, 1.2, 1.4, 1.6]).unwrap()
    }

    #[test]
    fn hill_examples() {
        assert_relative_eq!(hill(&powers_of_e(), 3).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(hill(&small(), 3).unwrap(), 3.033_99, max_relative = 5e-6);
        let ties = SortedSample::new(vec![1.0, 3.0, 3.0, 3.0]).unwrap();
        assert_eq!(hill(&ties, 2).unwrap_err(), Error::DegenerateTail { k: 2 });
    }

    #[test]
    fn weissman_examples() {
        let s = powers_of_e();
        assert_eq!(weissman_quantile(&s, 3, 0.75).unwrap(), s.order_stat(1).unwrap());
        let level = 0.75 / 0.5f64.exp();
        assert_relative_eq!(weissman_quantile(&s, 3, level).unwrap(), E, max_relative = 1e-14);
        assert!(weissman_quantile(&s, 3, 0.8).is_err());
        assert!(weissman_quantile(&s, 3, 0.0).is_err());
    }

    #[test]
    fn peng_examples() {
        let p = peng_mean(&small(), 3).unwrap();
        assert_relative_eq!(p.mean_hat, 1.3687, max_relative = 5e-5);
        assert_eq!(p.k, 3);
        // α̂ ≈ 3.03 lies outside (1, 2).
        assert!(p.std_err.is_none());
        assert!(matches!(peng_mean(&powers_of_e(), 3), Err(Error::InfiniteMean { .. })));
        let ties = SortedSample::new(vec![1.0, 3.0, 3.0, 3.0]).unwrap();
        assert!(matches!(peng_mean(&ties, 2), Err(Error::DegenerateTail { .. })));
    }

    #[test]
    fn peng_variance_examples() {
        assert_eq!(peng_variance(1.5).unwrap(), 48.0);
        assert_relative_eq!(peng_variance(1.7).unwrap(), 1.7 / (0.2401 * 0.3), max_relative = 1e-12);
        assert!((peng_variance(1.7).unwrap() - 23.6013).abs() < 1e-4);
        assert!(peng_variance(1.999_999).unwrap() > peng_variance(1.99).unwrap());
        assert!(peng_variance(2.0).is_err());
        assert!(peng_variance(1.0).is_err());
    }

    #[test]
    fn k_opt_examples() {
        let h = HeavyTailModel::frechet(1.5).unwrap().hall_constants().unwrap();
        assert_eq!(k_opt(&h, 1000).unwrap(), 200);
        assert_eq!(k_opt(&h, 8000).unwrap(), 800);
        assert_eq!(k_opt(&h, 2).unwrap(), 1);
        for n in [2, 3, 10, 50, 100_000] {
            assert!(k_opt(&h, n).unwrap() < n);
        }
    }

    #[test]
    fn k_opt_growth_rate() {
        let h = HeavyTailModel::frechet(1.5).unwrap().hall_constants().unwrap();
        for n in [10_000usize, 50_000, 200_000] {
            let r = k_opt(&h, 2 * n).unwrap() as f64 / k_opt(&h, n).unwrap() as f64;
            assert!((r - 2f64.powf(2.0 / 3.0)).abs() < 0.01, "ratio {r} at n={n}");
        }
    }

    proptest! {
        #[test]
        fn peng_is_scale_equivariant(seed in 0u64..500, c in 0.01f64..100.0) {
            let s = HeavyTailModel::frechet(1.5).unwrap().sample(300, seed);
            if let Ok(p) = peng_mean(&s, 60) {
                let q = peng_mean(&s.scaled(c).unwrap(), 60).unwrap();
                prop_assert!((q.mean_hat - c * p.mean_hat).abs() <= 1e-9 * c * p.mean_hat);
                prop_assert!((q.hill_alpha - p.hill_alpha).abs() <= 1e-9 * p.hill_alpha);
            }
        }

        #[test]
        fn weissman_is_monotone(seed in 0u64..200, a in 0.001f64..0.2, b in 0.001f64..0.2) {
            let s = HeavyTailModel::frechet(1.5).unwrap().sample(200, seed);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(weissman_quantile(&s, 40, lo).unwrap() >= weissman_quantile(&s, 40, hi).unwrap());
        }
    }
}
