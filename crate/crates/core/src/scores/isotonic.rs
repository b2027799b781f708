use crate::error::{Error, Result};

/// Weighted pool-adjacent-violators on an already ordered sequence.
/// Returns the non-decreasing least-squares fit, one value per input.
pub fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    // blocks as (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = (yi, wi, 1usize);
        while let Some(&(mean, weight, len)) = blocks.last() {
            if mean <= cur.0 {
                break;
            }
            blocks.pop();
            let total = weight + cur.1;
            cur = ((mean * weight + cur.0 * cur.1) / total, total, len + cur.2);
        }
        blocks.push(cur);
    }
    blocks.into_iter().flat_map(|(mean, _, len)| std::iter::repeat_n(mean, len)).collect()
}

/// Monotone map from raw positive-class probability to calibrated
/// probability. Linear between knots, constant beyond the end knots.
#[derive(Clone, Debug, PartialEq)]
pub struct IsotonicCalibrator {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicCalibrator {
    /// Least-squares non-decreasing fit of `outcomes` against `raw`. Tied raw
    /// values are pooled first, so they always share one fitted value.
    pub fn fit(raw: &[f64], outcomes: &[f64]) -> Result<Self> {
        if raw.len() != outcomes.len() {
            return Err(Error::InvalidArgument("raw and outcome lengths differ".into()));
        }
        if raw.len() < 2 {
            return Err(Error::InvalidArgument("isotonic calibration needs at least 2 points".into()));
        }
        if raw.iter().chain(outcomes).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
        let mut knots: Vec<f64> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for &i in &order {
            if knots.last() == Some(&raw[i]) {
                *sums.last_mut().unwrap() += outcomes[i];
                *weights.last_mut().unwrap() += 1.0;
            } else {
                knots.push(raw[i]);
                sums.push(outcomes[i]);
                weights.push(1.0);
            }
        }
        let means: Vec<f64> = sums.iter().zip(&weights).map(|(s, w)| s / w).collect();
        let values = pava(&means, &weights);
        Ok(Self { knots, values })
    }

    pub fn fit_binary(raw: &[f64], labels: &[u8]) -> Result<Self> {
        let outcomes: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        Self::fit(raw, &outcomes)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn predict(&self, p: f64) -> f64 {
        let n = self.knots.len();
        if n == 1 || p <= self.knots[0] {
            return self.values[0];
        }
        if p >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let hi = self.knots.partition_point(|&k| k <= p);
        let lo = hi - 1;
        let t = (p - self.knots[lo]) / (self.knots[hi] - self.knots[lo]);
        self.values[lo] + t * (self.values[hi] - self.values[lo])
    }

    /// True when the knot values strictly increase, so the map preserves order.
    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_input_is_fixed_point() {
        let c = IsotonicCalibrator::fit(&[0.1, 0.5, 0.9], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(c.values(), &[0.0, 1.0, 1.0]);
        assert_eq!(c.predict(0.5), 1.0);
    }

    #[test]
    fn violating_pair_pools_to_mean() {
        let c = IsotonicCalibrator::fit(&[0.2, 0.8], &[1.0, 0.0]).unwrap();
        assert_eq!(c.values(), &[0.5, 0.5]);
    }

    #[test]
    fn identical_raw_gives_mean_outcome() {
        let c = IsotonicCalibrator::fit_binary(&[0.4, 0.4, 0.4, 0.4], &[1, 0, 0, 0]).unwrap();
        assert_eq!(c.knots(), &[0.4]);
        assert_eq!(c.predict(0.0), 0.25);
        assert_eq!(c.predict(0.9), 0.25);
    }

    #[test]
    fn interpolates_and_clips() {
        let c = IsotonicCalibrator::fit(&[0.2, 0.4, 0.8], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(c.predict(0.1), 0.0);
        assert!((c.predict(0.3) - 0.25).abs() < 1e-15);
        assert!((c.predict(0.6) - 0.75).abs() < 1e-15);
        assert_eq!(c.predict(0.95), 1.0);
        assert!(c.is_strictly_increasing());
    }

    #[test]
    fn rejects_too_few_points() {
        assert!(IsotonicCalibrator::fit(&[0.3], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn never_worse_than_identity_and_bounded(
            pairs in prop::collection::vec((0.0f64..1.0, 0u8..2), 2..60)
        ) {
            let raw: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            let c = IsotonicCalibrator::fit(&raw, &y).unwrap();
            let sse_fit: f64 = raw.iter().zip(&y).map(|(r, t)| (c.predict(*r) - t).powi(2)).sum();
            let sse_id: f64 = raw.iter().zip(&y).map(|(r, t)| (r - t).powi(2)).sum();
            prop_assert!(sse_fit <= sse_id + 1e-12);
            prop_assert!(c.values().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
