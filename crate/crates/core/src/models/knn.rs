use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model-free anomaly score: mean Euclidean distance to the `k` nearest
/// training points of a class, minimized over classes.
///
/// A test point has no known label, so each class is tried and the closest
/// class wins. Classes with fewer than `k` training points use all of them;
/// classes absent from training are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnAnomalyModel {
    k: usize,
    /// Training mean, subtracted from all points.
    center: Array1<f64>,
    class_points: Vec<Array2<f64>>,
}

impl KnnAnomalyModel {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::InvalidArgument("training points and labels must be non-empty and aligned".into()));
        }
        let center = x.mean_axis(Axis(0)).expect("non-empty");
        let class_points = (0..2u8)
            .map(|c| {
                let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
                &x.select(Axis(0), &rows) - &center.view().insert_axis(Axis(0))
            })
            .collect();
        Ok(Self { k, center, class_points })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn score_row(&self, row: ArrayView1<f64>) -> f64 {
        self.score(row.insert_axis(Axis(0)))[0]
    }

    /// For each query row, the mean distance to its `k` nearest `points`.
    /// `sq` holds approximate squared distances used only to shortlist
    /// candidates; the shortlist is rescored exactly.
    fn mean_nearest(&self, q: ArrayView2<f64>, points: &Array2<f64>, sq: ArrayView2<f64>, out: &mut [f64]) {
        const SLACK: usize = 8;
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(sq.ncols());
        let mut exact = Vec::with_capacity(self.k + SLACK);
        for ((row, query), best) in sq.rows().into_iter().zip(q.rows()).zip(out.iter_mut()) {
            cand.clear();
            cand.extend(row.iter().copied().zip(0..));
            let m = (self.k + SLACK).min(cand.len());
            if m < cand.len() {
                cand.select_nth_unstable_by(m - 1, |a, b| a.0.total_cmp(&b.0));
            }
            exact.clear();
            exact.extend(cand[..m].iter().map(|&(_, j)| {
                points.row(j).iter().zip(query.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }));
            exact.sort_by(f64::total_cmp);
            let k = self.k.min(exact.len());
            let mean = exact[..k].iter().map(|d| d.sqrt()).sum::<f64>() / k as f64;
            *best = best.min(mean);
        }
    }

    /// Candidates come from `|q|^2 + |p|^2 - 2 q.p` computed in query blocks.
    pub fn score(&self, x: ArrayView2<f64>) -> Vec<f64> {
        const BLOCK: usize = 256;
        let norms: Vec<Array1<f64>> =
            self.class_points.iter().map(|p| p.rows().into_iter().map(|r| r.dot(&r)).collect()).collect();
        let centered = &x - &self.center.view().insert_axis(Axis(0));
        let starts: Vec<usize> = (0..x.nrows()).step_by(BLOCK).collect();
        let blocks: Vec<Vec<f64>> = starts
            .into_par_iter()
            .map(|start| {
                let q = centered.slice(s![start..(start + BLOCK).min(x.nrows()), ..]);
                let q_norms: Array1<f64> = q.rows().into_iter().map(|r| r.dot(&r)).collect();
                let mut best = vec![f64::INFINITY; q.nrows()];
                for (points, p_norms) in self.class_points.iter().zip(&norms).filter(|(p, _)| p.nrows() > 0) {
                    let mut sq = q.dot(&points.t());
                    sq.zip_mut_with(&p_norms.view().insert_axis(Axis(0)), |d, &pn| *d = pn - 2.0 * *d);
                    sq += &q_norms.view().insert_axis(Axis(1));
                    self.mean_nearest(q, points, sq.view(), &mut best);
                }
                best
            })
            .collect();
        blocks.concat()
    }
}
