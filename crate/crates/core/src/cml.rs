//! Censored maximum-likelihood estimation of the first- and second-order tail
//! parameters, the bias-reduced quantile and mean built on them, and the
//! asymptotic confidence interval for the mean.

use serde::{Deserialize, Serialize};

use crate::classic::hill_from_view;
use crate::empirical::{SortedSample, TailView};
use crate::error::{Error, Result, RootFailure};
use crate::special::normal_quantile;

/// Residual sup-norm accepted as a root.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Relative parameter step below which Newton is considered stalled.
pub const STEP_FLOOR: f64 = 1e-12;
/// Total Newton iteration budget per solve, fallback included.
pub const MAX_ITERATIONS: usize = 200;
/// Roots with `beta` this close to the Hill estimate are flagged as boundary roots.
pub const BOUNDARY_TOL: f64 = 1e-4;
/// Roots with `beta / alpha ≤ 1 + SEPARATION` do not identify a second-order term.
pub const SEPARATION: f64 = 0.01;
const GRID_SEPARATION: f64 = 0.05;
const GRID: usize = 40;

/// Fitted CML parameters with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmlEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub c_hat: f64,
    pub d_hat: f64,
    pub k: usize,
    pub hill_alpha: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// See [`CmlRoot::degenerate`].
    pub degenerate: bool,
}

impl CmlEstimate {
    /// Fails with [`Error::Unidentified`] for a degenerate root, where `ĉ`
    /// and `d̂` carry no usable second-order term.
    pub fn identified(&self) -> Result<&Self> {
        if self.degenerate {
            return Err(Error::Unidentified { alpha: self.alpha_hat, beta: self.beta_hat });
        }
        Ok(self)
    }

    /// [`lpy_quantile`] at the fitted parameters; refuses degenerate roots.
    pub fn quantile(&self, s: f64) -> Result<f64> {
        self.identified()?;
        lpy_quantile(self.c_hat, self.d_hat, self.alpha_hat, self.beta_hat, s)
    }
}

/// Raw root of the likelihood equations, before `c` and `d` are plugged in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmlRoot {
    pub alpha: f64,
    pub beta: f64,
    pub hill_alpha: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residuals within tolerance at a root with `beta` clear of the Hill boundary.
    pub converged: bool,
    /// The best root found has `beta` within [`BOUNDARY_TOL`] of the Hill estimate.
    pub on_boundary: bool,
    /// The root has `beta ≤ alpha (1 + SEPARATION)`. There `ĉ` and `d̂`
    /// diverge with opposite signs, so the estimators that use them refuse it.
    /// Only reported when the search found no better separated root.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean_hat: f64,
    pub cml: CmlEstimate,
    /// `σ(α̂, β̂)`; absent when `α̂ ≥ 2` where the variance formula does not apply.
    pub sigma: Option<f64>,
    /// `√(k/n) σ(α̂, β̂) (n ĉ / k)^{1/α̂} / √n`.
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub point: f64,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// `H(α) = 1/α - S₁`.
pub fn h_func(alpha: f64, tail: &TailView) -> f64 {
    1.0 / alpha - tail.s1
}

/// One term of the likelihood system:
/// `(α/β)(1 + αβ/(α-β) h) ratio^{β-α} - αβ/(α-β) h`.
pub fn g_i(alpha: f64, beta: f64, ratio: f64, h: f64) -> Result<f64> {
    if beta == alpha {
        return Err(Error::Singular(alpha));
    }
    let gamma = alpha * beta / (alpha - beta);
    Ok(alpha / beta * (1.0 + gamma * h) * ratio.powf(beta - alpha) - gamma * h)
}

/// Residuals of the likelihood equations over a fixed tail.
struct System<'a> {
    log_spacings: &'a [f64],
    s1: f64,
    hill: f64,
}

impl System<'_> {
    /// `None` outside the admissible region (`β ≤ α̂_H`, `β = α`, or some
    /// `G_i ≤ 0`).
    fn residuals(&self, alpha: f64, beta: f64) -> Option<[f64; 2]> {
        self.residuals_with(alpha, beta, |l| ((beta - alpha) * l).exp())
    }

    /// Residuals with `r_i^{β-α}` supplied per log-spacing by `power`.
    fn residuals_with(&self, alpha: f64, beta: f64, mut power: impl FnMut(f64) -> f64) -> Option<[f64; 2]> {
        if !(alpha > 0.0 && beta > self.hill && alpha.is_finite() && beta.is_finite()) {
            return None;
        }
        if (beta - alpha).abs() <= 1e-12 * beta {
            return None;
        }
        let h = 1.0 / alpha - self.s1;
        let gamma = alpha * beta / (alpha - beta);
        let a = alpha / beta * (1.0 + gamma * h);
        let b = -gamma * h;
        let (mut s0, mut s1) = (0.0, 0.0);
        for &l in self.log_spacings {
            let g = a * power(l) + b;
            if !(g > 0.0 && g.is_finite()) {
                return None;
            }
            let w = 1.0 / g;
            s0 += w;
            s1 += l * w;
        }
        let k = self.log_spacings.len() as f64;
        let r = [s0 / k - 1.0, s1 / k - 1.0 / beta];
        (r[0].is_finite() && r[1].is_finite()).then_some(r)
    }

    /// Analytic Jacobian of the residuals; `None` where they are undefined.
    fn jacobian(&self, x: [f64; 2]) -> Option<[[f64; 2]; 2]> {
        let [alpha, beta] = x;
        self.residuals(alpha, beta)?;
        let h = 1.0 / alpha - self.s1;
        let diff = alpha - beta;
        let gamma = alpha * beta / diff;
        let u = gamma * h;
        let u_a = -beta * beta / (diff * diff) * h - gamma / (alpha * alpha);
        let u_b = alpha * alpha / (diff * diff) * h;
        let a = alpha / beta * (1.0 + u);
        let a_a = (1.0 + u) / beta + alpha / beta * u_a;
        let a_b = -alpha / (beta * beta) * (1.0 + u) + alpha / beta * u_b;
        let e = beta - alpha;
        let mut j = [[0.0; 2]; 2];
        for &l in self.log_spacings {
            let ex = (e * l).exp();
            let g = a * ex - u;
            let g_a = (a_a - a * l) * ex - u_a;
            let g_b = (a_b + a * l) * ex - u_b;
            let w = 1.0 / (g * g);
            j[0][0] -= g_a * w;
            j[0][1] -= g_b * w;
            j[1][0] -= l * g_a * w;
            j[1][1] -= l * g_b * w;
        }
        let k = self.log_spacings.len() as f64;
        for row in &mut j {
            for v in row.iter_mut() {
                *v /= k;
            }
        }
        j[1][1] += 1.0 / (beta * beta);
        j.iter().flatten().all(|v| v.is_finite()).then_some(j)
    }

    /// Damped Newton from `start`, consuming at most `budget` iterations.
    /// Returns the best point reached, its residual sup-norm, and iterations used.
    fn newton(&self, start: [f64; 2], budget: usize) -> ([f64; 2], f64, usize, bool) {
        let mut x = start;
        let Some(mut f) = self.residuals(x[0], x[1]) else {
            return (x, f64::INFINITY, 0, false);
        };
        let mut iters = 0;
        while iters < budget {
            if sup(f) <= RESIDUAL_TOL {
                return (x, sup(f), iters, true);
            }
            iters += 1;
            let Some(j) = self.jacobian(x) else { break };
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det.is_finite() && det != 0.0) {
                break;
            }
            let dx = [
                -(j[1][1] * f[0] - j[0][1] * f[1]) / det,
                -(j[0][0] * f[1] - j[1][0] * f[0]) / det,
            ];
            let merit = norm2(f);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
                if let Some(fc) = self.residuals(cand[0], cand[1]) {
                    if norm2(fc) < merit {
                        accepted = Some((cand, fc));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let Some((cand, fc)) = accepted else { break };
            let step = ((cand[0] - x[0]) / x[0]).abs().max(((cand[1] - x[1]) / x[1]).abs());
            x = cand;
            f = fc;
            if step < STEP_FLOOR {
                break;
            }
        }
        let ok = sup(f) <= RESIDUAL_TOL;
        (x, sup(f), iters, ok)
    }

    fn classify(&self, x: [f64; 2]) -> RootKind {
        if x[1] - self.hill < BOUNDARY_TOL {
            RootKind::Boundary
        } else if x[1] <= x[0] * (1.0 + SEPARATION) {
            RootKind::Degenerate
        } else {
            RootKind::Proper
        }
    }

    /// Newton starting points from a 40×40 grid over
    /// `[0.5 α̂_H, 2 α̂_H] × (1.01 α̂_H, 5 α̂_H]`: first the centres of cells on
    /// which both residuals change sign, then the remaining grid nodes, each
    /// group ordered by residual sup-norm.
    fn grid_starts(&self) -> Vec<[f64; 2]> {
        let hill = self.hill;
        let alphas: Vec<f64> =
            (0..GRID).map(|i| 0.5 * hill + 1.5 * hill * i as f64 / (GRID - 1) as f64).collect();
        let betas: Vec<f64> =
            (1..=GRID).map(|j| 1.01 * hill + (5.0 - 1.01) * hill * j as f64 / GRID as f64).collect();
        let admissible = |a: f64, b: f64| b > a * (1.0 + GRID_SEPARATION);
        // Along a row the powers r_i^{β-α} advance by a fixed factor per β step.
        let step: Vec<f64> = self.log_spacings.iter().map(|l| ((betas[1] - betas[0]) * l).exp()).collect();
        let values: Vec<Vec<Option<[f64; 2]>>> = alphas
            .iter()
            .map(|&a| {
                let mut powers: Vec<f64> =
                    self.log_spacings.iter().map(|l| ((betas[0] - a) * l).exp()).collect();
                betas
                    .iter()
                    .enumerate()
                    .map(|(j, &b)| {
                        if j > 0 {
                            powers.iter_mut().zip(&step).for_each(|(p, s)| *p *= s);
                        }
                        if !admissible(a, b) {
                            return None;
                        }
                        let mut it = powers.iter();
                        self.residuals_with(a, b, |_| *it.next().expect("one power per spacing"))
                    })
                    .collect()
            })
            .collect();

        let mut bracketed = Vec::new();
        for i in 0..GRID - 1 {
            for j in 0..GRID - 1 {
                let corners = [values[i][j], values[i + 1][j], values[i][j + 1], values[i + 1][j + 1]];
                let Some(corners) = corners.into_iter().collect::<Option<Vec<_>>>() else {
                    continue;
                };
                let changes = |c: usize| {
                    corners.iter().any(|r| r[c] > 0.0) && corners.iter().any(|r| r[c] < 0.0)
                };
                if changes(0) && changes(1) {
                    let centre = [0.5 * (alphas[i] + alphas[i + 1]), 0.5 * (betas[j] + betas[j + 1])];
                    if let Some(r) = self.residuals(centre[0], centre[1]) {
                        bracketed.push((sup(r), centre));
                    }
                }
            }
        }
        bracketed.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut nodes: Vec<(f64, [f64; 2])> = Vec::new();
        for (i, row) in values.iter().enumerate() {
            for (j, r) in row.iter().enumerate() {
                if let Some(r) = r {
                    nodes.push((sup(*r), [alphas[i], betas[j]]));
                }
            }
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        bracketed.into_iter().chain(nodes).map(|(_, x)| x).collect()
    }

    /// Newton from `hint` (if any), then from `(α̂_H, 2α̂_H)`, then from grid
    /// starts, until a proper root appears or the iteration budget runs out.
    fn solve(&self, hint: Option<[f64; 2]>) -> CmlRoot {
        let hill = self.hill;
        let mut fallback: Option<([f64; 2], f64, RootKind)> = None;
        let mut best = ([hill, 2.0 * hill], f64::INFINITY);
        let mut found = None;
        let mut used = 0;

        for start in hint.into_iter().chain([[hill, 2.0 * hill]]) {
            let (x, nrm, it, conv) = self.newton(start, MAX_ITERATIONS.saturating_sub(used));
            used += it.max(1);
            if conv {
                match self.classify(x) {
                    RootKind::Proper => {
                        found = Some((x, nrm));
                        break;
                    }
                    kind => {
                        if fallback.is_none_or(|f| f.2 == RootKind::Boundary && kind == RootKind::Degenerate) {
                            fallback = Some((x, nrm, kind));
                        }
                    }
                }
            } else if nrm < best.1 {
                best = (x, nrm);
            }
        }

        if found.is_none() {
            for start in self.grid_starts() {
                if used >= MAX_ITERATIONS {
                    break;
                }
                let (x, nrm, it, conv) = self.newton(start, MAX_ITERATIONS.saturating_sub(used));
                used += it.max(1);
                if !conv {
                    if nrm < best.1 {
                        best = (x, nrm);
                    }
                    continue;
                }
                match self.classify(x) {
                    RootKind::Proper => {
                        found = Some((x, nrm));
                        break;
                    }
                    kind => {
                        // A degenerate root is preferred over a boundary one.
                        if fallback.is_none_or(|f| f.2 == RootKind::Boundary && kind == RootKind::Degenerate) {
                            fallback = Some((x, nrm, kind));
                        }
                    }
                }
            }
        }

        let (x, nrm, kind) = match (found, fallback) {
            (Some((x, nrm)), _) => (x, nrm, Some(RootKind::Proper)),
            (None, Some((x, nrm, kind))) => (x, nrm, Some(kind)),
            (None, None) => (best.0, best.1, None),
        };
        CmlRoot {
            alpha: x[0],
            beta: x[1],
            hill_alpha: hill,
            residual_norm: nrm,
            iterations: used,
            converged: matches!(kind, Some(RootKind::Proper | RootKind::Degenerate)),
            on_boundary: kind == Some(RootKind::Boundary),
            degenerate: kind == Some(RootKind::Degenerate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RootKind {
    Proper,
    Boundary,
    Degenerate,
}

fn sup(f: [f64; 2]) -> f64 {
    f[0].abs().max(f[1].abs())
}

fn norm2(f: [f64; 2]) -> f64 {
    f[0] * f[0] + f[1] * f[1]
}

/// Solves the likelihood equations for `(α, β)` on the top `k` observations
/// subject to `β > α̂_H`, without requiring success.
pub fn cml_root(sample: &SortedSample, k: usize) -> Result<CmlRoot> {
    if k < 2 {
        return Err(Error::domain(format!("CML needs k >= 2, got {k}")));
    }
    let tail = sample.tail_view(k)?;
    cml_root_from_view(&tail, None)
}

pub(crate) fn cml_root_from_view(tail: &TailView, hint: Option<[f64; 2]>) -> Result<CmlRoot> {
    let hill = hill_from_view(tail)?;
    let system = System { log_spacings: &tail.log_spacings, s1: tail.s1, hill };
    Ok(system.solve(hint))
}

/// Full CML fit: root of the likelihood equations plus `ĉ` and `d̂`.
///
/// Fails with [`Error::NonConvergence`] when no admissible root is found (or
/// the only root sits on the `β = α̂_H` boundary) and with
/// [`Error::InvalidEstimate`] when the root implies `ĉ ≤ 0`.
pub fn cml_solve(sample: &SortedSample, k: usize) -> Result<CmlEstimate> {
    if k < 2 {
        return Err(Error::domain(format!("CML needs k >= 2, got {k}")));
    }
    let tail = sample.tail_view(k)?;
    let root = cml_root_from_view(&tail, None)?;
    if !root.converged {
        return Err(Error::NonConvergence {
            iterations: root.iterations,
            residual: root.residual_norm,
            cause: if root.on_boundary { RootFailure::Boundary } else { RootFailure::Residual },
        });
    }
    let (c_hat, d_hat) = chat_dhat(&tail, sample.n(), root.alpha, root.beta)?;
    Ok(CmlEstimate {
        alpha_hat: root.alpha,
        beta_hat: root.beta,
        c_hat,
        d_hat,
        k,
        hill_alpha: root.hill_alpha,
        residual_norm: root.residual_norm,
        iterations: root.iterations,
        converged: true,
        degenerate: root.degenerate,
    })
}

/// Plug-in estimates of the scale constants `c` and `d`.
pub fn chat_dhat(tail: &TailView, n: usize, alpha_hat: f64, beta_hat: f64) -> Result<(f64, f64)> {
    if alpha_hat == beta_hat {
        return Err(Error::Singular(alpha_hat));
    }
    if !(tail.threshold > 0.0) {
        return Err(Error::domain("tail threshold is not strictly positive"));
    }
    let frac = tail.k as f64 / n as f64;
    let ab = alpha_hat * beta_hat;
    let c = ab / (alpha_hat - beta_hat) * frac * tail.threshold.powf(alpha_hat) * (1.0 / beta_hat - tail.s1);
    let d = ab / (beta_hat - alpha_hat) * frac * tail.threshold.powf(beta_hat) * (1.0 / alpha_hat - tail.s1);
    if !(c > 0.0) {
        return Err(Error::InvalidEstimate(format!("c_hat = {c} is not positive")));
    }
    Ok((c, d))
}

/// Bias-reduced estimate of the high quantile `Q(1 - s)`.
pub fn lpy_quantile(c_hat: f64, d_hat: f64, alpha_hat: f64, beta_hat: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("level s = {s} outside (0, 1)")));
    }
    if !(alpha_hat > 0.0 && c_hat > 0.0) {
        return Err(Error::domain("lpy_quantile needs alpha_hat > 0 and c_hat > 0"));
    }
    let inv_a = 1.0 / alpha_hat;
    let correction =
        inv_a * c_hat.powf(-beta_hat / alpha_hat) * d_hat * s.powf(beta_hat / alpha_hat - 1.0);
    Ok(c_hat.powf(inv_a) * s.powf(-inv_a) * (1.0 + correction))
}

/// The bias-reduced mean: the bias-reduced quantile integrated in closed form
/// over `(0, k/n)` plus the empirical mean of the `n - k` smallest values.
pub fn br_mean(sample: &SortedSample, k: usize) -> Result<MeanEstimate> {
    let cml = cml_solve(sample, k)?;
    br_mean_from(sample, &cml)
}

/// [`br_mean`] for an already fitted CML estimate.
///
/// Fails with [`Error::Unidentified`] for a degenerate root.
pub fn br_mean_from(sample: &SortedSample, cml: &CmlEstimate) -> Result<MeanEstimate> {
    cml.identified()?;
    let (a, b, c, d) = (cml.alpha_hat, cml.beta_hat, cml.c_hat, cml.d_hat);
    if !(b > a && a > 1.0 && b > 1.0) {
        return Err(Error::UndefinedMean { alpha: a, beta: b });
    }
    let n = sample.n() as f64;
    let frac = cml.k as f64 / n;
    let scale = (c / frac).powf(1.0 / a);
    let tail_part = frac
        * scale
        * (a / (a - 1.0) + d * c.powf(-b / a) * frac.powf(b / a - 1.0) / (b - 1.0));
    let mean_hat = tail_part + sample.lower_tail_mean(cml.k)?;
    let sigma = sigma2(a, b).ok().map(f64::sqrt);
    let std_err = sigma.map(|s| frac.sqrt() * s * scale / n.sqrt());
    Ok(MeanEstimate { mean_hat, cml: *cml, sigma, std_err })
}

/// Asymptotic variance of the normalized bias-reduced mean.
pub fn sigma2(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0 && beta > alpha) {
        return Err(Error::domain(format!(
            "sigma2 needs 1 < alpha < 2 and beta > alpha, got ({alpha}, {beta})"
        )));
    }
    let (a, b) = (alpha, beta);
    Ok(a * a * b.powi(4) / ((a - 1.0).powi(4) * (a - b).powi(4))
        + 2.0 / (2.0 - a)
        + 2.0 * a * b * b / ((a - 1.0).powi(2) * (a - b).powi(2)))
}

/// Two-sided interval `μ̂ ± z √(k/n) σ(α̂,β̂) (nĉ/k)^{1/α̂} / √n` with `z` the
/// `(1 + level)/2` standard normal quantile.
pub fn confidence_interval(est: &MeanEstimate, k: usize, n: usize, level: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level {level} outside (0, 1)")));
    }
    if k == 0 || k >= n {
        return Err(Error::domain(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let sigma = est.sigma.ok_or_else(|| {
        Error::InvalidEstimate(format!(
            "asymptotic variance undefined at alpha_hat = {}",
            est.cml.alpha_hat
        ))
    })?;
    if !est.mean_hat.is_finite() {
        return Err(Error::InvalidEstimate("mean estimate is not finite".into()));
    }
    let (nf, frac) = (n as f64, k as f64 / n as f64);
    let z = normal_quantile(0.5 * (1.0 + level));
    let half = z * frac.sqrt() * sigma * (est.cml.c_hat / frac).powf(1.0 / est.cml.alpha_hat) / nf.sqrt();
    Ok(ConfidenceInterval {
        lower: est.mean_hat - half,
        upper: est.mean_hat + half,
        level,
        point: est.mean_hat,
    })
}
