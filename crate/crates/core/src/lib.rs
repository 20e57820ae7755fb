//! Estimation of the mean of a heavy-tailed distribution whose second moment
//! is infinite (tail index between 1 and 2).
//!
//! Two estimators are provided over a [`SortedSample`]:
//!
//! * [`peng_mean`]: extrapolates the upper tail with Weissman's power-law
//!   quantile driven by the Hill estimate.
//! * [`br_mean`]: replaces the Weissman tail with the bias-reduced quantile
//!   built from the censored maximum-likelihood estimates of the first- and
//!   second-order tail parameters, and comes with an asymptotic confidence
//!   interval ([`confidence_interval`]).
//!
//! The sample fraction `k` is chosen adaptively by [`reiss_thomas`]. The
//! [`mc`] module runs seeded Monte Carlo studies comparing the two estimators
//! and checking their normality with the tests in [`gof`].
//!
//! ```
//! use tailmean::{br_mean, peng_mean, HeavyTailModel};
//!
//! let model = HeavyTailModel::frechet(1.5).unwrap();
//! let sample = model.sample(2000, 7);
//! let peng = peng_mean(&sample, 300).unwrap();
//! assert!(peng.mean_hat > 1.0);
//! // The likelihood equations need not have a usable root.
//! match br_mean(&sample, 300) {
//!     Ok(br) => assert!(br.mean_hat > 1.0),
//!     Err(e) => assert!(e.is_numerical()),
//! }
//! ```

pub mod classic;
pub mod cml;
pub mod dist;
pub mod empirical;
mod error;
pub mod gof;
pub mod ksel;
pub mod mc;
pub mod rng;
pub mod special;

pub use classic::{hill, k_opt, peng_mean, peng_variance, weissman_quantile, PengEstimate};
pub use cml::{
    br_mean, chat_dhat, cml_solve, confidence_interval, g_i, h_func, lpy_quantile, sigma2,
    CmlEstimate, ConfidenceInterval, MeanEstimate,
};
pub use dist::{Family, HallConstants, HeavyTailModel};
pub use empirical::{SortedSample, TailView};
pub use error::{Error, Result, RootFailure};
pub use gof::{normality_battery, TestKind, TestResult};

pub use ksel::{reiss_thomas, KSelection};
