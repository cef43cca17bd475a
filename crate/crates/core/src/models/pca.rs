//! Principal component projection fitted on a training split.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Components whose variance falls below this fraction of the largest are
/// treated as absent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `k` rows, each a unit-length component.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaProjection {
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("PCA rows"))?;
        let d = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!("component count {k} must be in 1..={d}")));
        }
        if rows.len() < k {
            return Err(Error::InvalidParameter(format!(
                "PCA with {k} components needs at least {k} samples, got {}",
                rows.len()
            )));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
        let centred = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c] - mean[c]);
        let denom = (rows.len().max(2) - 1) as f64;
        let cov = (centred.transpose() * &centred) / denom;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let mut components = Vec::with_capacity(k);
        let mut explained_variance = Vec::with_capacity(k);
        for (rank, &idx) in order.iter().take(k).enumerate() {
            let var = eig.eigenvalues[idx];
            if !(var > RANK_TOL * top.max(1e-300)) {
                return Err(Error::RankDeficient {
                    component: rank,
                    variance: var,
                });
            }
            let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .expect("non-empty component");
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            explained_variance.push(var);
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x.iter().zip(&self.mean)).map(|(w, (v, m))| w * (v - m)).sum())
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }

    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (coef, c) in projected.iter().zip(&self.components) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += coef * w;
            }
        }
        out
    }
}
