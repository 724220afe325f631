use super::linear::Standardizer;
use super::{check_rows, FittedModel, Learner, LearnerError};
use crate::numerics::Matrix;

/// k-nearest-neighbour mean on standardized features (Euclidean distance).
/// Distance ties go to the lower training index.
#[derive(Debug, Clone, Copy)]
pub struct Knn {
    pub k: usize,
}

struct KnnModel {
    k: usize,
    std: Standardizer,
    z: Vec<f64>,
    p: usize,
    y: Vec<f64>,
}

impl FittedModel for KnnModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut q = vec![0.0; self.p];
        self.std.row_into(row, &mut q);
        let k = self.k.min(self.y.len());
        // nearest so far, sorted by (distance, index)
        let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for i in 0..self.y.len() {
            let zi = &self.z[i * self.p..(i + 1) * self.p];
            let d: f64 = zi.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            if nearest.len() == k {
                if d >= nearest[k - 1].0 {
                    continue;
                }
                nearest.pop();
            }
            let pos = nearest.partition_point(|&(e, _)| e <= d);
            nearest.insert(pos, (d, i));
        }
        nearest.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / k as f64
    }
}

impl Learner for Knn {
    fn name(&self) -> String {
        format!("knn(k={})", self.k)
    }

    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError> {
        check_rows(self, x, y)?;
        let std = Standardizer::fit(x);
        let z = std.transform(x);
        Ok(Box::new(KnnModel {
            k: self.k,
            std,
            z,
            p: x.cols(),
            y: y.to_vec(),
        }))
    }
}
