use nalgebra::DMatrix;

use super::{row_sq_dist, LabeledSet};
use crate::error::{Result, SsaError};
use crate::linalg::row_mean;
use crate::Label;

/// k-nearest-neighbour classifier. Distance ties resolve to the lowest stored
/// index; vote ties to the lowest label.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub points: DMatrix<f64>,
    pub labels: Vec<Label>,
    classes: Vec<Label>,
}

impl KnnModel {
    pub(super) fn fit(set: &LabeledSet, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(SsaError::InvalidConfig("k must be >= 1".into()));
        }
        Ok(Self {
            k,
            points: set.coords.clone(),
            labels: set.labels.clone(),
            classes: set.classes(),
        })
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub(super) fn predict(&self, coords: &DMatrix<f64>) -> Vec<Label> {
        let k = self.k.min(self.labels.len());
        (0..coords.nrows())
            .map(|q| {
                let mut dists: Vec<(f64, usize)> =
                    (0..self.points.nrows()).map(|i| (row_sq_dist(coords, q, &self.points, i), i)).collect();
                if k == 1 {
                    let best = dists.iter().fold((f64::INFINITY, 0), |b, &d| if d.0 < b.0 { d } else { b });
                    return self.labels[best.1].clone();
                }
                dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut votes = vec![0usize; self.classes.len()];
                for &(_, i) in &dists[..k] {
                    let c = self.classes.binary_search(&self.labels[i]).expect("known class");
                    votes[c] += 1;
                }
                let best = votes.iter().enumerate().fold(0, |b, (c, &v)| if v > votes[b] { c } else { b });
                self.classes[best].clone()
            })
            .collect()
    }
}

/// Nearest class mean; ties go to the lowest label.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    pub classes: Vec<Label>,
    /// One row per class, in `classes` order.
    pub centroids: DMatrix<f64>,
}

impl CentroidModel {
    pub(super) fn fit(set: &LabeledSet) -> Self {
        let classes = set.classes();
        let mut centroids = DMatrix::zeros(classes.len(), set.dim());
        for (c, class) in classes.iter().enumerate() {
            let rows: Vec<usize> = (0..set.len()).filter(|&i| &set.labels[i] == class).collect();
            centroids.set_row(c, &row_mean(&set.coords.select_rows(&rows)));
        }
        Self { classes, centroids }
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    pub(super) fn predict(&self, coords: &DMatrix<f64>) -> Vec<Label> {
        (0..coords.nrows())
            .map(|q| {
                let mut best = (0, f64::INFINITY);
                for c in 0..self.classes.len() {
                    let d = row_sq_dist(coords, q, &self.centroids, c);
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                self.classes[best.0].clone()
            })
            .collect()
    }
}
