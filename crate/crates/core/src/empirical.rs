//! Order statistics and the pieces of the sample every estimator consumes.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly positive observations in ascending order, `X(1,n) ≤ … ≤ X(n,n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SortedSample {
    values: Vec<f64>,
}

/// The top `k` order statistics seen relative to the threshold `X(n-k,n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailView {
    pub k: usize,
    pub threshold: f64,
    /// `log(X(n-i+1,n) / X(n-k,n))` for `i = 1..=k`, largest observation first.
    pub log_spacings: Vec<f64>,
    /// Mean of `log_spacings`.
    pub s1: f64,
}

impl SortedSample {
    /// Sorts and validates; rejects empty input and values that are not
    /// finite and strictly positive.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::data(None, "empty sample"));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::data(None, format!("observation {bad} is not strictly positive")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    /// Reads one positive decimal per line, with an optional `value` header.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let values = read_values(reader)?;
        for (line, v) in &values {
            if *v <= 0.0 {
                return Err(Error::data(Some(*line), format!("nonpositive observation {v}")));
            }
        }
        Self::new(values.into_iter().map(|(_, v)| v).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `X(i,n)`, 1-based.
    pub fn order_stat(&self, i: usize) -> Result<f64> {
        if i == 0 || i > self.n() {
            return Err(Error::Index { index: i, n: self.n() });
        }
        Ok(self.values[i - 1])
    }

    /// `Q_n(p) = inf{x : F_n(x) ≥ p} = X(⌈np⌉,n)`.
    pub fn empirical_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("probability {p} outside (0, 1]")));
        }
        let n = self.n();
        // Guard ⌈np⌉ against rounding just above an integer, e.g. 3 * (1/3).
        let np = n as f64 * p;
        let mut idx = np.ceil() as usize;
        if idx > 1 && ((idx - 1) as f64 - np).abs() <= 4.0 * f64::EPSILON * np {
            idx -= 1;
        }
        Ok(self.values[idx.clamp(1, n) - 1])
    }

    /// `X(n-k,n)`, the tail threshold for fraction `k`.
    pub fn threshold(&self, k: usize) -> Result<f64> {
        if k >= self.n() {
            return Err(Error::Index { index: k, n: self.n() - 1 });
        }
        Ok(self.values[self.n() - k - 1])
    }

    pub fn tail_view(&self, k: usize) -> Result<TailView> {
        let n = self.n();
        if k == 0 || k >= n {
            return Err(Error::domain(format!("tail fraction k = {k} must satisfy 1 <= k < n = {n}")));
        }
        let threshold = self.values[n - k - 1];
        if threshold <= 0.0 {
            return Err(Error::domain("tail threshold is not strictly positive"));
        }
        let log_spacings: Vec<f64> =
            self.values[n - k..].iter().rev().map(|x| (x / threshold).ln()).collect();
        let s1 = log_spacings.iter().sum::<f64>() / k as f64;
        Ok(TailView { k, threshold, log_spacings, s1 })
    }

    /// `(1/n) Σ_{i=k+1}^{n} X(n-i+1,n)`: the `n - k` smallest values summed and
    /// divided by `n`.
    pub fn lower_tail_mean(&self, k: usize) -> Result<f64> {
        let n = self.n();
        if k >= n {
            return Err(Error::Index { index: k, n: n - 1 });
        }
        Ok(self.values[..n - k].iter().sum::<f64>() / n as f64)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    /// The sample multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect())
    }
}

impl TryFrom<Vec<f64>> for SortedSample {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SortedSample> for Vec<f64> {
    fn from(s: SortedSample) -> Self {
        s.values
    }
}

/// Parses one decimal per line (plain or scientific notation, `.` decimal
/// separator). A first line reading `value` is treated as a header; blank
/// lines are ignored. Returns `(line number, value)` pairs.
pub fn read_values<R: BufRead>(reader: R) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::data(Some(lineno), e.to_string()))?;
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        if out.is_empty() && lineno == 1 && field.eq_ignore_ascii_case("value") {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| Error::data(Some(lineno), format!("cannot parse '{field}' as a number")))?;
        if !v.is_finite() {
            return Err(Error::data(Some(lineno), format!("non-finite value '{field}'")));
        }
        out.push((lineno, v));
    }
    if out.is_empty() {
        return Err(Error::data(None, "no observations"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn powers_of_e() -> SortedSample {
        SortedSample::new(vec![E.powi(3), 1.0, E * E, E]).unwrap()
    }

    #[test]
    fn order_statistics() {
        let s = powers_of_e();
        assert_eq!(s.order_stat(4).unwrap(), E.powi(3));
        assert_eq!(s.order_stat(1).unwrap(), 1.0);
        assert_eq!(s.order_stat(3).unwrap(), E * E);
        assert!(matches!(s.order_stat(0), Err(Error::Index { .. })));
        assert!(matches!(s.order_stat(5), Err(Error::Index { .. })));
    }

    #[test]
    fn empirical_quantile_examples() {
        let s = SortedSample::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.empirical_quantile(0.5).unwrap(), 2.0);
        assert_eq!(s.empirical_quantile(1.0).unwrap(), 4.0);
        assert_eq!(s.empirical_quantile(0.25 + 1e-9).unwrap(), 2.0);
        assert_eq!(s.empirical_quantile(0.25).unwrap(), 1.0);
        assert!(s.empirical_quantile(0.0).is_err());
        assert!(s.empirical_quantile(1.1).is_err());
    }

    #[test]
    fn empirical_quantile_hits_order_stats() {
        let s = crate::HeavyTailModel::frechet(1.5).unwrap().sample(37, 5);
        for i in 1..=37 {
            assert_eq!(s.empirical_quantile(i as f64 / 37.0).unwrap(), s.order_stat(i).unwrap());
        }
    }

    #[test]
    fn tail_view_examples() {
        let t = powers_of_e().tail_view(3).unwrap();
        assert_eq!(t.threshold, 1.0);
        for (got, want) in t.log_spacings.iter().zip([3.0, 2.0, 1.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-14);
        }
        assert_relative_eq!(t.s1, 2.0, epsilon = 1e-14);
        assert!(powers_of_e().tail_view(4).is_err());
        assert!(powers_of_e().tail_view(0).is_err());
    }

    #[test]
    fn tied_top_values_give_zero_spacings() {
        let s = SortedSample::new(vec![1.0, 2.0, 5.0, 5.0, 5.0]).unwrap();
        let t = s.tail_view(2).unwrap();
        assert_eq!(t.log_spacings, vec![0.0, 0.0]);
        assert_eq!(t.s1, 0.0);
    }

    #[test]
    fn lower_tail_mean_examples() {
        let s = SortedSample::new(vec![1.0, 1.2, 1.4, 1.6]).unwrap();
        assert_relative_eq!(s.lower_tail_mean(3).unwrap(), 0.25);
        assert_relative_eq!(s.lower_tail_mean(0).unwrap(), s.mean());
        let s = SortedSample::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(s.lower_tail_mean(2).unwrap(), 0.75);
        assert!(s.lower_tail_mean(4).is_err());
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(SortedSample::new(vec![1.0, 0.0]).is_err());
        assert!(SortedSample::new(vec![]).is_err());
        assert!(SortedSample::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_ingestion() {
        let s = SortedSample::from_csv("value\n1.5\n2e0\n\n0.25\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[0.25, 1.5, 2.0]);
        let s = SortedSample::from_csv("3\n1\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.0, 3.0]);

        let err = SortedSample::from_csv("value\n1.0\nabc\n".as_bytes()).unwrap_err();
        assert_eq!(err, Error::Data { line: Some(3), message: "cannot parse 'abc' as a number".into() });
        let err = SortedSample::from_csv("1.0\n-2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Data { line: Some(2), .. }));
        let err = SortedSample::from_csv("1.0\n0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Data { line: Some(2), .. }));
        // Decimal comma is not accepted.
        assert!(SortedSample::from_csv("1,5\n".as_bytes()).is_err());
        assert!(SortedSample::from_csv("value\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_the_mean(
            mut v in prop::collection::vec(0.01f64..100.0, 2..60),
            kfrac in 0.0f64..1.0,
        ) {
            v.sort_by(f64::total_cmp);
            let s = SortedSample::new(v).unwrap();
            let n = s.n();
            let k = ((n - 1) as f64 * kfrac) as usize;
            let top: f64 = s.values()[n - k..].iter().sum::<f64>() / n as f64;
            prop_assert!((s.lower_tail_mean(k).unwrap() + top - s.mean()).abs() <= 1e-12 * s.mean());
        }

        #[test]
        fn log_spacings_scale_invariant(
            v in prop::collection::vec(0.01f64..100.0, 3..40),
            c in 0.001f64..1000.0,
            kfrac in 0.0f64..1.0,
        ) {
            let s = SortedSample::new(v).unwrap();
            let k = 1 + ((s.n() - 2) as f64 * kfrac) as usize;
            let a = s.tail_view(k).unwrap();
            let b = s.scaled(c).unwrap().tail_view(k).unwrap();
            for (x, y) in a.log_spacings.iter().zip(&b.log_spacings) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn quantile_is_monotone(v in prop::collection::vec(0.01f64..100.0, 1..40), p in 0.001f64..1.0, dp in 0.0f64..1.0) {
            let s = SortedSample::new(v).unwrap();
            let q = (p + dp).min(1.0);
            prop_assert!(s.empirical_quantile(p).unwrap() <= s.empirical_quantile(q).unwrap());
        }
    }
}
