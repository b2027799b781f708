use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Mlp, MlpConfig, Predictor};
use crate::error::{Error, Result};
use crate::rng::derive_indexed;

/// Uniform average of independently seeded MLPs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepEnsemble {
    members: Vec<Mlp>,
}

impl DeepEnsemble {
    /// Member `i` trains with a seed derived from `(seed, "member", i)`.
    /// Members train in parallel; the result does not depend on scheduling.
    pub fn fit(x: ArrayView2<f64>, y: &[u8], seed: u64, size: usize, cfg: &MlpConfig) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidArgument(format!("ensemble needs at least 2 members, got {size}")));
        }
        let members = (0..size)
            .into_par_iter()
            .map(|i| Mlp::fit(x, y, derive_indexed(seed, "member", i), cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { members })
    }

    pub fn from_members(members: Vec<Mlp>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidArgument("ensemble needs at least 2 members".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }
}

impl Predictor for DeepEnsemble {
    fn name(&self) -> &str {
        "deep_ensemble"
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut sum = Array2::<f64>::zeros((x.nrows(), 2));
        for m in &self.members {
            sum += &m.predict_proba(x);
        }
        sum / self.members.len() as f64
    }

    fn member_proba(&self, x: ArrayView2<f64>) -> Option<Vec<Array2<f64>>> {
        Some(self.members.iter().map(|m| m.predict_proba(x)).collect())
    }

    fn is_ensemble(&self) -> bool {
        true
    }
}
