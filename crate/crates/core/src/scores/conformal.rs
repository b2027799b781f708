use ndarray::Array2;

use crate::error::{Error, Result};

/// Label-conditional split-conformal calibration state.
///
/// Nonconformity of `(x, y)` is `1 - p(y|x)`. Scores are kept per class,
/// sorted ascending; a class with no calibration points cannot produce
/// p-values.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalState {
    class_scores: [Vec<f64>; 2],
}

impl ConformalState {
    pub fn fit(cal_proba: &Array2<f64>, cal_labels: &[u8]) -> Result<Self> {
        if cal_proba.nrows() != cal_labels.len() {
            return Err(Error::InvalidArgument("calibration probabilities and labels differ in length".into()));
        }
        let mut class_scores = [Vec::new(), Vec::new()];
        for (row, &label) in cal_proba.rows().into_iter().zip(cal_labels) {
            let c = label as usize;
            class_scores[c].push(1.0 - row[c]);
        }
        for scores in &mut class_scores {
            scores.sort_by(f64::total_cmp);
        }
        Ok(Self { class_scores })
    }

    pub fn class_scores(&self, class: usize) -> &[f64] {
        &self.class_scores[class]
    }

    pub fn usable(&self, class: usize) -> bool {
        !self.class_scores[class].is_empty()
    }

    /// Classes without calibration data.
    pub fn unusable_classes(&self) -> Vec<usize> {
        (0..2).filter(|&c| !self.usable(c)).collect()
    }

    /// `(#{i : a_i >= a} + 1) / (n_c + 1)` over class-`c` calibration scores.
    pub fn p_value(&self, class: usize, nonconformity: f64) -> Option<f64> {
        let scores = &self.class_scores[class];
        if scores.is_empty() {
            return None;
        }
        let below = scores.partition_point(|&s| s < nonconformity);
        let at_least = scores.len() - below;
        Some((at_least + 1) as f64 / (scores.len() + 1) as f64)
    }

    /// Per-row `[p_0, p_1]` for test probabilities.
    pub fn p_values(&self, proba: &Array2<f64>) -> Vec<[Option<f64>; 2]> {
        proba
            .rows()
            .into_iter()
            .map(|row| [self.p_value(0, 1.0 - row[0]), self.p_value(1, 1.0 - row[1])])
            .collect()
    }
}

/// Conformal uncertainty scores, oriented so that higher means more uncertain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalScores {
    /// `1 - p` of the predicted class.
    pub u_pvalue: f64,
    /// `1 - max p`.
    pub u_credibility: f64,
    /// Second-largest p-value, i.e. `1 - confidence`.
    pub u_confidence: f64,
}

pub fn conformal_scores(pvals: [Option<f64>; 2], predicted_class: usize) -> Result<ConformalScores> {
    let [Some(p0), Some(p1)] = pvals else {
        return Err(Error::InvalidArgument("p-value missing for an uncalibrated class".into()));
    };
    let p = [p0, p1];
    let (hi, lo) = if p0 >= p1 { (p0, p1) } else { (p1, p0) };
    Ok(ConformalScores { u_pvalue: 1.0 - p[predicted_class], u_credibility: 1.0 - hi, u_confidence: lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn stores_sorted_class_scores() {
        let proba = array![[0.1, 0.9], [0.3, 0.7], [0.5, 0.5]];
        let s = ConformalState::fit(&proba, &[1, 1, 1]).unwrap();
        let got = s.class_scores(1);
        let want = [0.1, 0.3, 0.5];
        assert!(got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-15));
        assert!(!s.usable(0));
        assert_eq!(s.unusable_classes(), vec![0]);
        assert_eq!(s.p_value(0, 0.2), None);
    }

    #[test]
    fn duplicated_calibration_doubles_multiplicities() {
        let proba = array![[0.2, 0.8], [0.6, 0.4], [0.9, 0.1]];
        let labels = [1, 0, 0];
        let once = ConformalState::fit(&proba, &labels).unwrap();
        let twice_proba = ndarray::concatenate![ndarray::Axis(0), proba, proba];
        let twice = ConformalState::fit(&twice_proba, &[1, 0, 0, 1, 0, 0]).unwrap();
        for c in 0..2 {
            let doubled: Vec<f64> = once.class_scores(c).iter().flat_map(|&v| [v, v]).collect();
            assert_eq!(twice.class_scores(c), doubled.as_slice());
        }
    }

    #[test]
    fn p_value_counting() {
        let s = ConformalState { class_scores: [vec![0.1, 0.2, 0.3], vec![]] };
        assert_eq!(s.p_value(0, 0.05), Some(1.0));
        assert_eq!(s.p_value(0, 0.9), Some(0.25));
        assert_eq!(s.p_value(0, 0.25), Some(0.5));
        // ties count as at least as nonconforming
        assert_eq!(s.p_value(0, 0.2), Some(0.75));
    }

    #[test]
    fn score_orientation() {
        let s = conformal_scores([Some(1.0), Some(0.0)], 0).unwrap();
        assert_eq!((s.u_pvalue, s.u_credibility, s.u_confidence), (0.0, 0.0, 0.0));
        let s = conformal_scores([Some(0.5), Some(0.5)], 1).unwrap();
        assert_eq!((s.u_credibility, s.u_confidence), (0.5, 0.5));
        let s = conformal_scores([Some(0.8), Some(0.1)], 0).unwrap();
        assert!((s.u_pvalue - 0.2).abs() < 1e-15);
        assert!((s.u_credibility - 0.2).abs() < 1e-15);
        assert_eq!(s.u_confidence, 0.1);
        assert!(conformal_scores([None, Some(0.3)], 1).is_err());
    }
}
