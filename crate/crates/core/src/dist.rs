//! Parametric heavy-tailed laws used as simulation ground truth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::empirical::SortedSample;
use crate::error::{Error, Result};
use crate::rng;
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `F(x) = exp(-x^-α)`, `x > 0`.
    Frechet,
    /// `F(x) = 1 - x^-α`, `x ≥ 1`.
    Pareto,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Frechet => f.write_str("frechet"),
            Family::Pareto => f.write_str("pareto"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frechet" | "fréchet" => Ok(Family::Frechet),
            "pareto" => Ok(Family::Pareto),
            other => Err(Error::Config(format!("unknown distribution '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailModel {
    pub family: Family,
    /// Tail index.
    pub alpha: f64,
}

/// Constants of the second-order expansion `1 - F(x) = c x^-α + d x^-β + o(x^-β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallConstants {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub d: f64,
    /// Third-order parameter, when known.
    pub rho: Option<f64>,
}

impl HallConstants {
    pub fn new(alpha: f64, beta: f64, c: f64, d: f64, rho: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && beta > alpha && c > 0.0 && d != 0.0 && d.is_finite()) {
            return Err(Error::domain(format!(
                "Hall constants need beta > alpha > 0, c > 0, d != 0 (got {alpha}, {beta}, {c}, {d})"
            )));
        }
        Ok(Self { alpha, beta, c, d, rho })
    }
}

impl HeavyTailModel {
    pub fn new(family: Family, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("tail index must be positive, got {alpha}")));
        }
        Ok(Self { family, alpha })
    }

    pub fn frechet(alpha: f64) -> Result<Self> {
        Self::new(Family::Frechet, alpha)
    }

    pub fn pareto(alpha: f64) -> Result<Self> {
        Self::new(Family::Pareto, alpha)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.family {
            Family::Frechet if x > 0.0 => (-x.powf(-self.alpha)).exp(),
            Family::Pareto if x >= 1.0 => 1.0 - x.powf(-self.alpha),
            _ => 0.0,
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile level {p} outside (0, 1)")));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        match self.family {
            Family::Frechet => (-p.ln()).powf(-1.0 / self.alpha),
            // ln_1p keeps precision for p near 0.
            Family::Pareto => (-(-p).ln_1p() / self.alpha).exp(),
        }
    }

    /// Inverse-transform sample of size `n` from the seeded uniform stream.
    pub fn sample(&self, n: usize, seed: u64) -> SortedSample {
        let mut stream = rng::stream(seed);
        let values: Vec<f64> = (0..n.max(1))
            .map(|_| self.quantile_unchecked(rng::open_unit(&mut stream)))
            .collect();
        SortedSample::new(values).expect("model quantiles are positive and finite")
    }

    /// The mean, finite only for `alpha > 1`.
    pub fn true_mean(&self) -> Result<f64> {
        if self.alpha <= 1.0 {
            return Err(Error::InfiniteMean { alpha: self.alpha });
        }
        Ok(match self.family {
            Family::Frechet => gamma(1.0 - 1.0 / self.alpha),
            Family::Pareto => self.alpha / (self.alpha - 1.0),
        })
    }

    /// Second-order expansion constants.
    ///
    /// For Fréchet, expanding the tail quantile gives `β = 2α`, `c = 1`,
    /// `d = -1/2` and third-order parameter `ρ = 3α`. Pareto is an exact power
    /// law with no second-order term and is rejected.
    pub fn hall_constants(&self) -> Result<HallConstants> {
        match self.family {
            Family::Frechet => {
                let a = self.alpha;
                HallConstants::new(a, 2.0 * a, 1.0, -0.5, Some(3.0 * a))
            }
            Family::Pareto => Err(Error::DegenerateModel(
                "Pareto tail has no second-order term (d = 0)".into(),
            )),
        }
    }
}

impl fmt::Display for HeavyTailModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.alpha)
    }
}
