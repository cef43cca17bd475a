//! Single affine layer with a logistic output, trained on BCE-with-logits,
//! alone or jointly with an encoder underneath it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderNetwork;
use crate::error::{Error, Result};
use crate::training::{optimize, sample_batches, Labeled, LossHistory, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// `max(z,0) − z·t + ln(1 + e^{−|z|})`, stable for large `|z|`.
fn bce_with_logit(z: f64, target: f64) -> f64 {
    z.max(0.0) - z * target + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn target(label: i8) -> f64 {
    if label == 1 {
        1.0
    } else {
        0.0
    }
}

impl LinearClassifier {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    /// Uniform weights in `±sqrt(6/(dim+1))`, zero bias.
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (6.0 / (dim + 1) as f64).sqrt();
        Self {
            weights: (0..dim).map(|_| rng.random_range(-a..=a)).collect(),
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Flat layout: weights then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    pub fn from_params(params: &[f64]) -> Self {
        let (w, b) = params.split_at(params.len() - 1);
        Self {
            weights: w.to_vec(),
            bias: b[0],
        }
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        self.logit(x).map(sigmoid)
    }

    /// Class `+1` when the probability is ≥ ½.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<i8>> {
        rows.iter()
            .map(|r| self.logit(r).map(|z| if z >= 0.0 { 1 } else { -1 }))
            .collect()
    }

    pub fn loss(&self, data: &Labeled<'_>, idx: &[usize]) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::Empty("classifier batch"));
        }
        let mut total = 0.0;
        for &i in idx {
            total += bce_with_logit(self.logit(&data.x[i])?, target(data.y[i]));
        }
        Ok(total / idx.len() as f64)
    }

    /// Mean loss and gradient in the flat layout.
    pub fn loss_gradient(&self, data: &Labeled<'_>, idx: &[usize]) -> Result<(f64, Vec<f64>)> {
        if idx.is_empty() {
            return Err(Error::Empty("classifier batch"));
        }
        let scale = 1.0 / idx.len() as f64;
        let mut grad = vec![0.0; self.dim() + 1];
        let mut total = 0.0;
        for &i in idx {
            let z = self.logit(&data.x[i])?;
            let t = target(data.y[i]);
            total += bce_with_logit(z, t);
            let r = (sigmoid(z) - t) * scale;
            for (g, v) in grad.iter_mut().zip(&data.x[i]) {
                *g += r * v;
            }
            grad[self.dim()] += r;
        }
        Ok((total * scale, grad))
    }
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub model: LinearClassifier,
    pub history: LossHistory,
    pub best_epoch: usize,
}

pub fn single_layer_train(
    init: &LinearClassifier,
    train: &Labeled<'_>,
    val: &Labeled<'_>,
    cfg: &TrainConfig,
) -> Result<LinearFit> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("classifier splits"));
    }
    let val_idx: Vec<usize> = (0..val.len()).collect();
    let fitted = optimize(
        init.params(),
        cfg,
        |rng| Ok(sample_batches(train.len(), cfg.batch_samples, cfg.steps_per_epoch, rng)),
        |p, batch: &Vec<usize>| LinearClassifier::from_params(p).loss_gradient(train, batch),
        |p| LinearClassifier::from_params(p).loss(val, &val_idx),
    )?;
    Ok(LinearFit {
        model: LinearClassifier::from_params(&fitted.params),
        history: fitted.history,
        best_epoch: fitted.best_epoch,
    })
}

/// An encoder with a logistic layer on its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedClassifier {
    pub encoder: EncoderNetwork,
    pub head: LinearClassifier,
}

impl StackedClassifier {
    pub fn new(encoder: EncoderNetwork, head: LinearClassifier) -> Result<Self> {
        if head.dim() != encoder.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: encoder.output_dim(),
                found: head.dim(),
            });
        }
        Ok(Self { encoder, head })
    }

    /// Flat layout: encoder parameters then head parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.encoder.params().to_vec();
        p.extend(self.head.params());
        p
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let (enc, head) = params.split_at(self.encoder.n_params());
        let mut encoder = self.encoder.clone();
        encoder.set_params(enc)?;
        Ok(Self {
            encoder,
            head: LinearClassifier::from_params(head),
        })
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        self.head.logit(&self.encoder.forward(x)?)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<i8>> {
        rows.par_iter()
            .map(|r| self.logit(r).map(|z| if z >= 0.0 { 1 } else { -1 }))
            .collect()
    }

    pub fn loss(&self, data: &Labeled<'_>, idx: &[usize]) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::Empty("classifier batch"));
        }
        let losses = idx
            .par_iter()
            .map(|&i| self.logit(&data.x[i]).map(|z| bce_with_logit(z, target(data.y[i]))))
            .collect::<Result<Vec<_>>>()?;
        Ok(losses.iter().sum::<f64>() / idx.len() as f64)
    }

    pub fn loss_gradient(&self, data: &Labeled<'_>, idx: &[usize]) -> Result<(f64, Vec<f64>)> {
        if idx.is_empty() {
            return Err(Error::Empty("classifier batch"));
        }
        let scale = 1.0 / idx.len() as f64;
        let parts = idx
            .par_iter()
            .map(|&i| -> Result<(f64, Vec<f64>)> {
                let h = self.encoder.forward(&data.x[i])?;
                let z = self.head.logit(&h)?;
                let t = target(data.y[i]);
                let r = (sigmoid(z) - t) * scale;
                let up: Vec<f64> = self.head.weights.iter().map(|w| w * r).collect();
                let mut g = self.encoder.backward(&data.x[i], &up)?.params;
                g.extend(h.iter().map(|v| r * v));
                g.push(r);
                Ok((bce_with_logit(z, t), g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; self.encoder.n_params() + self.head.dim() + 1];
        let mut total = 0.0;
        for (l, g) in parts {
            total += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok((total * scale, grad))
    }
}

#[derive(Debug, Clone)]
pub struct StackedFit {
    pub model: StackedClassifier,
    pub history: LossHistory,
    pub best_epoch: usize,
}

/// Trains encoder and head together on BCE-with-logits.
pub fn joint_train(
    init: &StackedClassifier,
    train: &Labeled<'_>,
    val: &Labeled<'_>,
    cfg: &TrainConfig,
) -> Result<StackedFit> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("classifier splits"));
    }
    let val_idx: Vec<usize> = (0..val.len()).collect();
    let fitted = optimize(
        init.params(),
        cfg,
        |rng| Ok(sample_batches(train.len(), cfg.batch_samples, cfg.steps_per_epoch, rng)),
        |p, batch: &Vec<usize>| init.with_params(p)?.loss_gradient(train, batch),
        |p| init.with_params(p)?.loss(val, &val_idx),
    )?;
    Ok(StackedFit {
        model: init.with_params(&fitted.params)?,
        history: fitted.history,
        best_epoch: fitted.best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Activation;
    use crate::training::tests::{gaussian_classes, relative_gap};

    #[test]
    fn zero_init_on_balanced_data_has_ln2_loss() {
        let x = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3], vec![2.0, -1.0]];
        let y = vec![1, -1, 1, -1];
        let data = Labeled::new(&x, &y).unwrap();
        let loss = LinearClassifier::zeros(2).loss(&data, &[0, 1, 2, 3]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn separable_one_dimensional_data() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0 - 2.0 + if i < 20 { -0.05 } else { 0.05 }]).collect();
        let y: Vec<i8> = (0..40).map(|i| if i < 20 { -1 } else { 1 }).collect();
        let data = Labeled::new(&x, &y).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            max_epochs: 300,
            batch_samples: 40,
            steps_per_epoch: 1,
            patience: 300,
            ..TrainConfig::default()
        };
        let fit = single_layer_train(&LinearClassifier::zeros(1), &data, &data, &cfg).unwrap();
        assert_eq!(fit.model.predict(&x).unwrap(), y);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20u64 {
            let (x, y) = gaussian_classes(10, 5, 1.0, seed);
            let data = Labeled::new(&x, &y).unwrap();
            let idx: Vec<usize> = (0..10).collect();
            let model = LinearClassifier::random(5, seed);
            let (_, grad) = model.loss_gradient(&data, &idx).unwrap();
            let mut p = model.params();
            let eps = 1e-5;
            for k in 0..p.len() {
                let orig = p[k];
                p[k] = orig + eps;
                let up = LinearClassifier::from_params(&p).loss(&data, &idx).unwrap();
                p[k] = orig - eps;
                let down = LinearClassifier::from_params(&p).loss(&data, &idx).unwrap();
                p[k] = orig;
                let fd = (up - down) / (2.0 * eps);
                assert!(relative_gap(fd, grad[k]) < 1e-4 || (fd - grad[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn joint_gradient_matches_finite_differences() {
        let (x, y) = gaussian_classes(6, 5, 1.0, 3);
        let data = Labeled::new(&x, &y).unwrap();
        let idx: Vec<usize> = (0..6).collect();
        let model = StackedClassifier::new(
            EncoderNetwork::new(&[5, 4, 3], Activation::Tanh, 1).unwrap(),
            LinearClassifier::random(3, 2),
        )
        .unwrap();
        let (loss, grad) = model.loss_gradient(&data, &idx).unwrap();
        assert!((loss - model.loss(&data, &idx).unwrap()).abs() < 1e-14);
        let mut p = model.params();
        let eps = 1e-5;
        for k in 0..p.len() {
            let orig = p[k];
            p[k] = orig + eps;
            let up = model.with_params(&p).unwrap().loss(&data, &idx).unwrap();
            p[k] = orig - eps;
            let down = model.with_params(&p).unwrap().loss(&data, &idx).unwrap();
            p[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            assert!(relative_gap(fd, grad[k]) < 1e-4 || (fd - grad[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn stable_loss_for_extreme_logits() {
        assert!((bce_with_logit(800.0, 1.0)).abs() < 1e-300);
        assert!((bce_with_logit(-800.0, 1.0) - 800.0).abs() < 1e-9);
        assert_eq!(sigmoid(-800.0), 0.0);
    }
}
