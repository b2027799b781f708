//! Statistical kernels shared by the task evaluators.

use crate::error::{Error, Result};

/// Area under the ROC curve for `scores` predicting `labels == 1`.
///
/// Computed as the Mann-Whitney statistic with mid-ranks, so tied scores
/// get half credit. Returns `None` unless both classes are present.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of doubled mid-ranks of the positives keeps everything integral
    let mut rank_sum_x2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1..=end, doubled mid-rank = start + end + 1
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        rank_sum_x2 += positives * (start + end + 1) as u128;
        start = end;
    }
    let n_pos_u = n_pos as u128;
    let u_x2 = rank_sum_x2 - n_pos_u * (n_pos_u + 1);
    Some(u_x2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Binary F1 for the positive class: `2TP / (2TP + FP + FN)`.
/// Equals 1.0 when there are no positives in either vector.
pub fn f1_score(predictions: &[u8], labels: &[u8]) -> f64 {
    assert_eq!(predictions.len(), labels.len(), "predictions and labels differ in length");
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fne += 1,
            _ => {}
        }
    }
    if tp + fp + fne == 0 {
        return 1.0;
    }
    (2 * tp) as f64 / (2 * tp + fp + fne) as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test. The statistic is exact; the p-value
/// uses the asymptotic Kolmogorov distribution at `sqrt(n_a n_b / (n_a + n_b)) * D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS test needs two non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < na && a[i] == x {
            i += 1;
        }
        while j < nb && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na as f64 * nb as f64) / (na + nb) as f64;
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(n_eff.sqrt() * d) })
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // small-x form converges fast: P(K <= x) = sqrt(2pi)/x * sum exp(-(2k-1)^2 pi^2 / (8x^2))
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (-(m * m) * pi2 / (8.0 * x * x)).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * cdf;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-16 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Trapezoid rule over strictly increasing `xs`.
pub fn trapezoid_area(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("xs and ys differ in length".into()));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("xs must be strictly increasing".into()));
    }
    Ok(xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum())
}
