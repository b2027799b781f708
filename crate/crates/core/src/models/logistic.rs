use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_training_data, Predictor};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Inverse regularization strength on the summed log-loss.
    pub c: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { c: 1.0, grad_tol: 1e-6, max_iter: 1000 }
    }
}

/// L2-regularized logistic regression with an unpenalized intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Array1<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Per-sample objective `mean(logloss) + ||w||^2 / (2 C N)` and its gradient
/// with respect to `(weights, intercept)`.
pub fn logistic_objective(
    weights: &[f64],
    intercept: f64,
    x: ArrayView2<f64>,
    y: &[u8],
    c: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let w = Array1::from(weights.to_vec());
    let z = x.dot(&w) + intercept;
    let mut loss = 0.0;
    let mut resid = Array1::<f64>::zeros(x.nrows());
    for (i, (&zi, &yi)) in z.iter().zip(y).enumerate() {
        loss += softplus(zi) - f64::from(yi) * zi;
        resid[i] = sigmoid(zi) - f64::from(yi);
    }
    let penalty = 1.0 / (c * n);
    loss = loss / n + 0.5 * penalty * w.dot(&w);
    let grad_w = x.t().dot(&resid) / n + &w * penalty;
    let grad_b = resid.sum() / n;
    (loss, grad_w.to_vec(), grad_b)
}

impl LogisticRegression {
    /// Newton's method with backtracking line search. Deterministic, so no seed.
    pub fn fit(x: ArrayView2<f64>, y: &[u8], config: &LogisticConfig) -> Result<Self> {
        check_training_data(x, y)?;
        let (n, d) = x.dim();
        let nf = n as f64;
        let penalty = 1.0 / (config.c * nf);
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let (mut loss, mut gw, mut gb) = logistic_objective(&w, b, x, y, config.c);
        let mut iterations = 0;
        while iterations < config.max_iter {
            let gnorm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
            if gnorm <= config.grad_tol {
                break;
            }
            iterations += 1;

            // Hessian over [w; b]: X~^T S X~ / n + penalty on the w block
            let wa = Array1::from(w.clone());
            let z = x.dot(&wa) + b;
            let s: Array1<f64> = z.mapv(|zi| {
                let p = sigmoid(zi);
                p * (1.0 - p)
            });
            let xs = &x * &s.view().insert_axis(Axis(1));
            let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
            let xtsx = x.t().dot(&xs) / nf;
            let xts = xs.sum_axis(Axis(0)) / nf;
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] = xtsx[[i, j]];
                }
                h[(i, i)] += penalty;
                h[(i, d)] = xts[i];
                h[(d, i)] = xts[i];
            }
            h[(d, d)] = s.sum() / nf;
            let mut g = DVector::<f64>::zeros(d + 1);
            for i in 0..d {
                g[i] = gw[i];
            }
            g[d] = gb;
            let step = match h.cholesky() {
                Some(chol) => chol.solve(&g),
                None => g.clone(),
            };

            let slope: f64 = step.dot(&g);
            let mut t = 1.0;
            loop {
                let w_new: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, si)| wi - t * si).collect();
                let b_new = b - t * step[d];
                let (l_new, gw_new, gb_new) = logistic_objective(&w_new, b_new, x, y, config.c);
                if l_new <= loss - 1e-4 * t * slope || t < 1e-10 {
                    w = w_new;
                    b = b_new;
                    loss = l_new;
                    gw = gw_new;
                    gb = gb_new;
                    break;
                }
                t *= 0.5;
            }
        }
        Ok(Self { weights: Array1::from(w), intercept: b, iterations })
    }
}

impl Predictor for LogisticRegression {
    fn name(&self) -> &str {
        "logistic"
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let z = x.dot(&self.weights) + self.intercept;
        let mut out = Array2::<f64>::zeros((x.nrows(), 2));
        for (i, zi) in z.iter().enumerate() {
            let p = sigmoid(*zi);
            out[[i, 0]] = 1.0 - p;
            out[[i, 1]] = p;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use ndarray::array;

    #[test]
    fn separable_two_points() {
        let x = array![[-1.0], [1.0]];
        let m = LogisticRegression::fit(x.view(), &[0, 1], &LogisticConfig::default()).unwrap();
        let p = m.predict_proba(array![[1.0]].view());
        assert!(p[[0, 1]] > 0.5);
    }

    #[test]
    fn all_zero_features_recover_class_prior() {
        let x = Array2::<f64>::zeros((10, 3));
        let y = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let m = LogisticRegression::fit(x.view(), &y, &LogisticConfig::default()).unwrap();
        let p = m.predict_proba(x.view());
        for row in p.rows() {
            assert!((row[1] - 0.3).abs() < 1e-3);
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn converges_to_stationary_point() {
        let x = array![[0.5, 1.0], [-1.0, 0.2], [1.5, -0.3], [0.1, 0.1], [-0.7, -1.2], [2.0, 0.4]];
        let y = [1, 0, 1, 0, 0, 1];
        let cfg = LogisticConfig::default();
        let m = LogisticRegression::fit(x.view(), &y, &cfg).unwrap();
        let (_, gw, gb) = logistic_objective(m.weights.as_slice().unwrap(), m.intercept, x.view(), &y, cfg.c);
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        assert!(norm <= 1e-6, "gradient norm {norm}");
        assert!(m.iterations < 50);
    }

    #[test]
    fn rejects_single_class_and_non_finite() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            LogisticRegression::fit(x.view(), &[1, 1], &LogisticConfig::default()),
            Err(Error::SingleClass)
        ));
        let x = array![[f64::NAN], [1.0]];
        assert!(matches!(
            LogisticRegression::fit(x.view(), &[0, 1], &LogisticConfig::default()),
            Err(Error::NonFinite)
        ));
    }
}
