//! Adaptive choice of the sample fraction `k` by the Reiss–Thomas heuristic.
//!
//! For each candidate `k` the objective is
//! `(1/k) Σ_{i≤k} i^θ |α̂(i) − median(α̂(1), …, α̂(k))|`, where `α̂(i)` is the
//! CML tail index on the `i` largest observations, and `k*` minimizes it.

use serde::{Deserialize, Serialize};

use crate::classic::hill_from_view;
use crate::cml::cml_root_from_view;
use crate::empirical::SortedSample;
use crate::error::{Error, Result};

pub const DEFAULT_THETA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub i: usize,
    /// `None` when neither the CML solve nor Hill produced an estimate.
    pub alpha: Option<f64>,
    /// The CML solve failed and `alpha` is the Hill estimate.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k_star: usize,
    pub theta: f64,
    /// `(k, objective)` over the searched range; `None` where no estimate was usable.
    pub objective_values: Vec<(usize, Option<f64>)>,
    /// `α̂(i)` for `i = 1..=k_max`.
    pub alpha_path: Vec<AlphaPoint>,
}

impl KSelection {
    pub fn objective_at_star(&self) -> f64 {
        self.objective_values
            .iter()
            .find(|(k, _)| *k == self.k_star)
            .and_then(|(_, v)| *v)
            .expect("k_star has an objective value")
    }

    pub fn fallback_count(&self) -> usize {
        self.alpha_path.iter().filter(|p| p.fallback).count()
    }
}

/// `(k_min, k_max) = (max(10, ⌈0.02 n⌉), ⌈0.5 n⌉)`, pulled inside `[2, n-1]`.
pub fn default_k_range(n: usize) -> (usize, usize) {
    let k_max = ((0.5 * n as f64).ceil() as usize).min(n.saturating_sub(1)).max(2);
    let k_min = 10usize.max((0.02 * n as f64).ceil() as usize).min(k_max);
    (k_min, k_max)
}

/// Tail-index path `α̂(1..=k_max)`: CML where it converges, Hill otherwise.
///
/// Each solve is warm-started from the last non-degenerate root on the path.
pub fn alpha_path(sample: &SortedSample, k_max: usize) -> Result<Vec<AlphaPoint>> {
    if k_max >= sample.n() {
        return Err(Error::domain(format!("k_max = {k_max} must be below n = {}", sample.n())));
    }
    let mut hint = None;
    let path = (1..=k_max)
        .map(|i| {
            let tail = sample.tail_view(i).expect("1 <= i < n");
            let hill = hill_from_view(&tail).ok();
            if i >= 2 && hill.is_some() {
                if let Ok(root) = cml_root_from_view(&tail, hint) {
                    if root.converged {
                        if !root.degenerate {
                            hint = Some([root.alpha, root.beta]);
                        }
                        return AlphaPoint { i, alpha: Some(root.alpha), fallback: false };
                    }
                }
            }
            AlphaPoint { i, alpha: hill, fallback: true }
        })
        .collect();
    Ok(path)
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// The objective at `k` from the first `k` entries of a path.
pub fn rt_objective(path: &[Option<f64>], theta: f64, k: usize) -> Option<f64> {
    let prefix = &path[..k];
    let mut sorted: Vec<f64> = prefix.iter().flatten().copied().collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(f64::total_cmp);
    let med = median_sorted(&sorted);
    let total: f64 = prefix
        .iter()
        .enumerate()
        .filter_map(|(idx, a)| a.map(|a| ((idx + 1) as f64).powf(theta) * (a - med).abs()))
        .sum();
    Some(total / k as f64)
}

/// Objective over `[k_min, k_max]` and its minimizer (smallest `k` on ties).
pub fn select_from_path(
    path: &[Option<f64>],
    theta: f64,
    k_min: usize,
    k_max: usize,
) -> Result<(usize, Vec<(usize, Option<f64>)>)> {
    if k_max > path.len() || k_min == 0 || k_min > k_max {
        return Err(Error::domain(format!("bad search range [{k_min}, {k_max}]")));
    }
    // Running sorted prefix so each median costs one insertion.
    let mut sorted: Vec<f64> = Vec::with_capacity(k_max);
    let mut values = Vec::with_capacity(k_max - k_min + 1);
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=k_max {
        if let Some(a) = path[k - 1] {
            let pos = sorted.partition_point(|x| x.total_cmp(&a).is_le());
            sorted.insert(pos, a);
        }
        if k < k_min {
            continue;
        }
        let obj = (!sorted.is_empty()).then(|| {
            let med = median_sorted(&sorted);
            path[..k]
                .iter()
                .enumerate()
                .filter_map(|(idx, a)| a.map(|a| ((idx + 1) as f64).powf(theta) * (a - med).abs()))
                .sum::<f64>()
                / k as f64
        });
        if let Some(v) = obj {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
        values.push((k, obj));
    }
    let (k_star, _) = best
        .ok_or_else(|| Error::InvalidEstimate("no tail-index estimate anywhere in the search range".into()))?;
    Ok((k_star, values))
}

/// Chooses `k*` in `[k_min, k_max]` for the sample.
pub fn reiss_thomas(sample: &SortedSample, theta: f64, k_min: usize, k_max: usize) -> Result<KSelection> {
    if !(0.0..=0.5).contains(&theta) {
        return Err(Error::domain(format!("theta = {theta} outside [0, 0.5]")));
    }
    if !(2 <= k_min && k_min <= k_max && k_max < sample.n()) {
        return Err(Error::domain(format!(
            "search range needs 2 <= k_min <= k_max < n, got [{k_min}, {k_max}] with n = {}",
            sample.n()
        )));
    }
    let alpha_path = alpha_path(sample, k_max)?;
    let raw: Vec<Option<f64>> = alpha_path.iter().map(|p| p.alpha).collect();
    let (k_star, objective_values) = select_from_path(&raw, theta, k_min, k_max)?;
    Ok(KSelection { k_star, theta, objective_values, alpha_path })
}

/// [`reiss_thomas`] over [`default_k_range`].
pub fn reiss_thomas_default(sample: &SortedSample, theta: f64) -> Result<KSelection> {
    let (k_min, k_max) = default_k_range(sample.n());
    reiss_thomas(sample, theta, k_min, k_max)
}
