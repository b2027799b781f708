use crate::models::PROB_FLOOR;

/// Shannon entropy in nats, probabilities clamped to `[1e-12, 1 - 1e-12]`
/// inside the log.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&pi| pi * pi.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR).ln()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintyTriple {
    pub total: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
}

/// Entropy decomposition of one input's member predictive distributions:
/// total is the entropy of the mean, aleatoric the mean member entropy,
/// epistemic their difference (the mutual information).
pub fn decompose(members: &[[f64; 2]]) -> UncertaintyTriple {
    let m = members.len() as f64;
    let mut mean = [0.0; 2];
    let mut aleatoric = 0.0;
    for p in members {
        mean[0] += p[0];
        mean[1] += p[1];
        aleatoric += entropy(p);
    }
    mean[0] /= m;
    mean[1] /= m;
    aleatoric /= m;
    let total = entropy(&mean);
    UncertaintyTriple { total, aleatoric, epistemic: total - aleatoric }
}
