//! Embedding trainers: the fidelity (NQE) loss over embedded pairs, the RBF
//! kernel-alignment loss, a shared Adam/early-stopping loop, and class
//! ensemble trace distances.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderNetwork;
use crate::error::{Error, Result};
use crate::featuremap::FeatureMap;
use crate::kernels::sq_dist;
use crate::qcore::{trace_distance, DensityMatrix, StateVector, C64};

pub const DEFAULT_PATIENCE: usize = 40;
/// Bandwidth of the alignment kernel on encoder outputs.
pub const RBF_ALIGN_GAMMA: f64 = 1.0;
/// Per-class sample cap for ensemble density matrices.
pub const TRACE_SAMPLE_CAP: usize = 512;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Optimizer {
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Pairs per NQE step.
    pub batch_pairs: usize,
    /// Samples per step for per-sample objectives.
    pub batch_samples: usize,
    pub steps_per_epoch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Cap on validation pairs (NQE) or samples (alignment).
    pub val_cap: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_pairs: 32,
            batch_samples: 32,
            steps_per_epoch: 10,
            max_epochs: 100,
            patience: DEFAULT_PATIENCE,
            val_cap: 256,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("train config: {what}")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and ≥ 0");
        }
        if self.batch_pairs == 0 || self.batch_samples == 0 || self.steps_per_epoch == 0 {
            return bad("batch sizes and steps_per_epoch must be ≥ 1");
        }
        if self.patience == 0 {
            return bad("patience must be ≥ 1");
        }
        if self.val_cap < 2 {
            return bad("val_cap must be ≥ 2");
        }
        Ok(())
    }
}

/// Adam with the conventional constants.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self {
            lr,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * grad[k];
            self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
            params[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Tracks the best validation loss and signals a stop after `patience`
/// epochs without strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        let improved = loss < self.best;
        if improved {
            self.best = loss;
            self.best_epoch = epoch;
        }
        (improved, epoch - self.best_epoch >= self.patience)
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub epochs: Vec<EpochLoss>,
}

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_loss).expect("write to string");
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_csv().as_bytes())
    }

    /// Running minimum of the validation column.
    pub fn best_val_curve(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.epochs
            .iter()
            .map(|e| {
                best = best.min(e.val_loss);
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub params: Vec<f64>,
    pub history: LossHistory,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Shared minibatch loop. Epoch 0 records the losses of the initial
/// parameters; each later epoch draws its batches, takes one Adam step per
/// batch, then evaluates `val_loss`. Returns the best-validation parameters.
pub fn optimize<B: Sync>(
    init: Vec<f64>,
    cfg: &TrainConfig,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<Vec<B>>,
    loss_grad: impl Fn(&[f64], &B) -> Result<(f64, Vec<f64>)>,
    val_loss: impl Fn(&[f64]) -> Result<f64>,
) -> Result<Fitted> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init;
    let mut adam = Adam::new(cfg.learning_rate, params.len());
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut history = LossHistory::default();
    let diverged = |epoch: usize, loss: f64| -> Result<f64> {
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::Diverged { epoch, loss })
        }
    };

    let batches = draw(&mut rng)?;
    let mut total = 0.0;
    for b in &batches {
        total += loss_grad(&params, b)?.0;
    }
    let train0 = diverged(0, total / batches.len().max(1) as f64)?;
    let val0 = diverged(0, val_loss(&params)?)?;
    stopper.observe(0, val0);
    history.epochs.push(EpochLoss {
        epoch: 0,
        train_loss: train0,
        val_loss: val0,
    });
    let mut best_params = params.clone();
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        let batches = draw(&mut rng)?;
        let mut total = 0.0;
        for b in &batches {
            let (loss, grad) = loss_grad(&params, b)?;
            diverged(epoch, loss)?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, loss: f64::NAN });
            }
            total += loss;
            adam.step(&mut params, &grad);
        }
        let train = total / batches.len().max(1) as f64;
        let val = diverged(epoch, val_loss(&params)?)?;
        history.epochs.push(EpochLoss {
            epoch,
            train_loss: train,
            val_loss: val,
        });
        epochs_run = epoch;
        let (improved, stop) = stopper.observe(epoch, val);
        if improved {
            best_params.copy_from_slice(&params);
        }
        if stop {
            break;
        }
    }
    Ok(Fitted {
        params: best_params,
        history,
        best_epoch: stopper.best_epoch(),
        epochs_run,
    })
}

/// Rows with their ±1 labels.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [i8],
}

impl<'a> Labeled<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [i8]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidParameter(format!("labels must be ±1, found {bad}")));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.y.contains(&1) && self.y.contains(&-1)
    }
}

/// Index pairs `(i, j)` with `i < j`, no repeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBatch {
    pairs: Vec<(usize, usize)>,
}

impl PairBatch {
    pub fn new(pairs: Vec<(usize, usize)>, n_samples: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("pair batch"));
        }
        let mut seen = HashSet::new();
        for &(i, j) in &pairs {
            if i >= j || j >= n_samples {
                return Err(Error::InvalidParameter(format!(
                    "pair ({i}, {j}) must satisfy i < j < {n_samples}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidParameter(format!("duplicate pair ({i}, {j})")));
            }
        }
        Ok(Self { pairs })
    }

    /// Draws up to `size` distinct pairs, about half same-class.
    pub fn sample_stratified(labels: &[i8], size: usize, rng: &mut impl Rng) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::Empty("pair sampling needs two samples"));
        }
        let pos = labels.iter().filter(|&&v| v == 1).count();
        let neg = n - pos;
        let same_avail = pos * pos.saturating_sub(1) / 2 + neg * neg.saturating_sub(1) / 2;
        let diff_avail = pos * neg;
        let mut same_quota = (size / 2).min(same_avail);
        let diff_quota = (size - same_quota).min(diff_avail);
        same_quota = (size - diff_quota).min(same_avail);

        let mut chosen = Vec::with_capacity(same_quota + diff_quota);
        for (same, quota, avail) in [(true, same_quota, same_avail), (false, diff_quota, diff_avail)] {
            if quota == 0 {
                continue;
            }
            if avail <= 4 * quota {
                let mut all: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| (labels[i] == labels[j]) == same)
                    .collect();
                all.shuffle(rng);
                chosen.extend_from_slice(&all[..quota]);
            } else {
                let mut taken = HashSet::new();
                while taken.len() < quota {
                    let a = rng.random_range(0..n);
                    let b = rng.random_range(0..n);
                    if a == b || (labels[a] == labels[b]) != same {
                        continue;
                    }
                    let pair = (a.min(b), a.max(b));
                    if taken.insert(pair) {
                        chosen.push(pair);
                    }
                }
            }
        }
        chosen.shuffle(rng);
        Self::new(chosen, n)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `½(1 + y_i y_j)`.
fn pair_target(a: i8, b: i8) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// How fidelity derivatives with respect to circuit inputs are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GradientMode {
    #[default]
    Adjoint,
    FiniteDifference,
}

fn unique_indices(pairs: &[(usize, usize)]) -> Vec<usize> {
    let mut idx: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn check_pairs(pairs: &[(usize, usize)], data: &Labeled<'_>) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair batch"));
    }
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i.max(j) >= data.len()) {
        return Err(Error::InvalidParameter(format!("pair ({i}, {j}) out of range")));
    }
    Ok(())
}

/// Encoder outputs for each listed sample.
fn encode_many(encoder: &EncoderNetwork, x: &[Vec<f64>], idx: &[usize]) -> Result<BTreeMap<usize, Vec<f64>>> {
    idx.par_iter()
        .map(|&i| encoder.forward(&x[i]).map(|z| (i, z)))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

fn check_map_width(encoder: &EncoderNetwork, map: &FeatureMap) -> Result<()> {
    if encoder.output_dim() != map.spec().input_dim() {
        return Err(Error::DimensionMismatch {
            expected: map.spec().input_dim(),
            found: encoder.output_dim(),
        });
    }
    Ok(())
}

/// Mean over pairs of `(|⟨ψ_i|ψ_j⟩|² − ½(1 + y_i y_j))²`.
pub fn nqe_loss(encoder: &EncoderNetwork, map: &FeatureMap, pairs: &[(usize, usize)], data: &Labeled<'_>) -> Result<f64> {
    check_pairs(pairs, data)?;
    check_map_width(encoder, map)?;
    let idx = unique_indices(pairs);
    let z = encode_many(encoder, data.x, &idx)?;
    let states: BTreeMap<usize, StateVector> = idx
        .par_iter()
        .map(|&i| map.embed(&z[&i]).map(|s| (i, s)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let total: f64 = pairs
        .iter()
        .map(|&(i, j)| {
            let f = states[&i].inner(&states[&j]).expect("same width").norm_sqr();
            (f - pair_target(data.y[i], data.y[j])).powi(2)
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Loss and its gradient over the encoder's flat parameters.
pub fn nqe_loss_gradient(
    encoder: &EncoderNetwork,
    map: &FeatureMap,
    pairs: &[(usize, usize)],
    data: &Labeled<'_>,
    mode: GradientMode,
) -> Result<(f64, Vec<f64>)> {
    check_pairs(pairs, data)?;
    check_map_width(encoder, map)?;
    let idx = unique_indices(pairs);
    let z = encode_many(encoder, data.x, &idx)?;
    let states: BTreeMap<usize, StateVector> = idx
        .par_iter()
        .map(|&i| map.embed(&z[&i]).map(|s| (i, s)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let scale = 1.0 / pairs.len() as f64;
    let overlap_grad = |zv: &[f64], target: &StateVector| -> Result<(C64, Vec<C64>)> {
        let (_, c, dc) = match mode {
            GradientMode::Adjoint => map.overlap_gradient(zv, target)?,
            GradientMode::FiniteDifference => map.overlap_gradient_fd(zv, target, 1e-6)?,
        };
        Ok((c, dc))
    };
    // dF/dz for one side: F = |c|², dF = 2 Re(c̄ dc)
    let per_pair: Vec<(f64, Vec<f64>, Vec<f64>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (c_j, dc_j) = overlap_grad(&z[&j], &states[&i])?;
            let (c_i, dc_i) = overlap_grad(&z[&i], &states[&j])?;
            let f = c_j.norm_sqr();
            let resid = f - pair_target(data.y[i], data.y[j]);
            let up = 2.0 * resid * scale;
            let dz_j = dc_j.iter().map(|d| up * 2.0 * (c_j.conj() * d).re).collect();
            let dz_i = dc_i.iter().map(|d| up * 2.0 * (c_i.conj() * d).re).collect();
            Ok((resid * resid, dz_i, dz_j))
        })
        .collect::<Result<Vec<_>>>()?;

    let width = encoder.output_dim();
    let mut dz: BTreeMap<usize, Vec<f64>> = idx.iter().map(|&i| (i, vec![0.0; width])).collect();
    let mut loss = 0.0;
    for (&(i, j), (l, dz_i, dz_j)) in pairs.iter().zip(&per_pair) {
        loss += l;
        for (acc, v) in dz.get_mut(&i).expect("indexed").iter_mut().zip(dz_i) {
            *acc += v;
        }
        for (acc, v) in dz.get_mut(&j).expect("indexed").iter_mut().zip(dz_j) {
            *acc += v;
        }
    }
    let grad = backprop_sum(encoder, data.x, &dz)?;
    Ok((loss * scale, grad))
}

/// `Σ_i ∂⟨up_i, g(x_i)⟩/∂w`, summed in index order.
fn backprop_sum(encoder: &EncoderNetwork, x: &[Vec<f64>], upstream: &BTreeMap<usize, Vec<f64>>) -> Result<Vec<f64>> {
    let parts = upstream
        .par_iter()
        .map(|(&i, up)| encoder.backward(&x[i], up).map(|g| g.params))
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; encoder.n_params()];
    for p in parts {
        for (a, b) in grad.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(grad)
}

fn check_subset(idx: &[usize], data: &Labeled<'_>) -> Result<()> {
    if idx.len() < 2 {
        return Err(Error::Empty("alignment loss needs at least two samples"));
    }
    if idx.iter().any(|&i| i >= data.len()) {
        return Err(Error::InvalidParameter("sample index out of range".into()));
    }
    Ok(())
}

/// `(1/M) Σ_{i<j} [exp(−‖h_i − h_j‖²) − δ(y_i, y_j)]²` over the listed samples.
pub fn rbf_align_loss(encoder: &EncoderNetwork, idx: &[usize], data: &Labeled<'_>) -> Result<f64> {
    check_subset(idx, data)?;
    let h = encode_many(encoder, data.x, idx)?;
    let mut total = 0.0;
    let mut m = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let k = (-RBF_ALIGN_GAMMA * sq_dist(&h[&i], &h[&j])).exp();
            total += (k - pair_target(data.y[i], data.y[j])).powi(2);
            m += 1;
        }
    }
    Ok(total / m as f64)
}

pub fn rbf_align_loss_gradient(encoder: &EncoderNetwork, idx: &[usize], data: &Labeled<'_>) -> Result<(f64, Vec<f64>)> {
    check_subset(idx, data)?;
    let h = encode_many(encoder, data.x, idx)?;
    let width = encoder.output_dim();
    let m = idx.len() * (idx.len() - 1) / 2;
    let scale = 1.0 / m as f64;
    let mut dh: BTreeMap<usize, Vec<f64>> = idx.iter().map(|&i| (i, vec![0.0; width])).collect();
    let mut total = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let (hi, hj) = (&h[&i], &h[&j]);
            let k = (-RBF_ALIGN_GAMMA * sq_dist(hi, hj)).exp();
            let resid = k - pair_target(data.y[i], data.y[j]);
            total += resid * resid;
            // dL/dh_i = 2r/M · K · (−2γ)(h_i − h_j)
            let coef = 2.0 * resid * scale * k * (-2.0 * RBF_ALIGN_GAMMA);
            let diff: Vec<f64> = hi.iter().zip(hj).map(|(p, q)| coef * (p - q)).collect();
            for (acc, d) in dh.get_mut(&i).expect("indexed").iter_mut().zip(&diff) {
                *acc += d;
            }
            for (acc, d) in dh.get_mut(&j).expect("indexed").iter_mut().zip(&diff) {
                *acc -= d;
            }
        }
    }
    Ok((total * scale, backprop_sum(encoder, data.x, &dh)?))
}

pub enum Objective {
    Nqe { map: FeatureMap, mode: GradientMode },
    RbfAlign,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: EncoderNetwork,
    pub history: LossHistory,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Seeded subsample of at most `cap` indices of `0..n`, in ascending order.
pub(crate) fn capped_indices(n: usize, cap: usize, rng: &mut impl Rng) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut v = index::sample(rng, n, cap).into_vec();
    v.sort_unstable();
    v
}

/// Minibatches of distinct sample indices covering a shuffled epoch, capped
/// at `steps` batches.
pub(crate) fn sample_batches(n: usize, batch: usize, steps: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let batch = batch.min(n).max(1);
    let mut out = Vec::with_capacity(steps);
    let mut cursor = 0;
    for _ in 0..steps {
        if cursor + batch > n {
            order.shuffle(rng);
            cursor = 0;
        }
        let mut b = order[cursor..cursor + batch].to_vec();
        b.sort_unstable();
        out.push(b);
        cursor += batch;
    }
    out
}

/// Trains `encoder` on `objective`; returns the best-validation weights.
pub fn train_embedding(
    objective: &Objective,
    encoder: &EncoderNetwork,
    train: &Labeled<'_>,
    val: &Labeled<'_>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.len() < 2 || val.len() < 2 {
        return Err(Error::Empty("training and validation splits need two samples each"));
    }
    let mut val_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5641_4c5f_5345_4c45);
    let with = |p: &[f64]| EncoderNetwork::from_params(encoder.dims(), encoder.activation(), p.to_vec());

    let fitted = match objective {
        Objective::Nqe { map, mode } => {
            check_map_width(encoder, map)?;
            let val_pairs = PairBatch::sample_stratified(val.y, cfg.val_cap, &mut val_rng)?;
            optimize(
                encoder.params().to_vec(),
                cfg,
                |rng| {
                    (0..cfg.steps_per_epoch)
                        .map(|_| PairBatch::sample_stratified(train.y, cfg.batch_pairs, rng))
                        .collect()
                },
                |p, batch: &PairBatch| nqe_loss_gradient(&with(p)?, map, batch.pairs(), train, *mode),
                |p| nqe_loss(&with(p)?, map, val_pairs.pairs(), val),
            )?
        }
        Objective::RbfAlign => {
            let val_idx = capped_indices(val.len(), cfg.val_cap, &mut val_rng);
            optimize(
                encoder.params().to_vec(),
                cfg,
                |rng| Ok(sample_batches(train.len(), cfg.batch_samples.max(2), cfg.steps_per_epoch, rng)),
                |p, batch: &Vec<usize>| rbf_align_loss_gradient(&with(p)?, batch, train),
                |p| rbf_align_loss(&with(p)?, &val_idx, val),
            )?
        }
    };
    Ok(TrainOutcome {
        encoder: with(&fitted.params)?,
        history: fitted.history,
        best_epoch: fitted.best_epoch,
        epochs_run: fitted.epochs_run,
    })
}

/// Embeds every row: encoder, then feature map.
pub fn embed_all(encoder: &EncoderNetwork, map: &FeatureMap, x: &[Vec<f64>]) -> Result<Vec<StateVector>> {
    check_map_width(encoder, map)?;
    x.par_iter().map(|row| map.embed(&encoder.forward(row)?)).collect()
}

/// Trace distance between the uniform class mixtures of already embedded
/// states, each class capped at [`TRACE_SAMPLE_CAP`] seeded picks.
pub fn class_trace_distance(states: &[StateVector], labels: &[i8], seed: u64) -> Result<f64> {
    if states.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            found: labels.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mixtures = Vec::with_capacity(2);
    for class in [1i8, -1] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            return Err(Error::SingleClass);
        }
        let picked: Vec<StateVector> = capped_indices(members.len(), TRACE_SAMPLE_CAP, &mut rng)
            .into_iter()
            .map(|k| states[members[k]].clone())
            .collect();
        mixtures.push(DensityMatrix::mixture(&picked)?);
    }
    trace_distance(&mixtures[0], &mixtures[1])
}

/// Trace distance between the class ensembles of the embedded split.
pub fn ensemble_trace_distance(encoder: &EncoderNetwork, map: &FeatureMap, data: &Labeled<'_>, seed: u64) -> Result<f64> {
    if !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    class_trace_distance(&embed_all(encoder, map, data.x)?, data.y, seed)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::encoder::Activation;
    use crate::featuremap::FeatureMapSpec;
    use crate::qcore::fidelity;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    /// Two Gaussian classes in `d` dimensions whose means differ by `shift`
    /// along every axis.
    pub(crate) fn gaussian_classes(n: usize, d: usize, shift: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1 } else { -1 };
            let offset = 0.5 * shift * label as f64;
            x.push((0..d).map(|_| normal.sample(&mut rng) + offset).collect());
            y.push(label);
        }
        (x, y)
    }

    fn small_setup(out: usize, seed: u64) -> (EncoderNetwork, Vec<Vec<f64>>, Vec<i8>) {
        let enc = EncoderNetwork::new(&[6, 5, out], Activation::Tanh, seed).unwrap();
        let (x, y) = gaussian_classes(8, 6, 1.0, seed + 100);
        (enc, x, y)
    }

    #[test]
    fn nqe_loss_simple_values() {
        // identical encodings: F = 1 for every pair
        let enc = EncoderNetwork::zeros(&[3, 2], Activation::Tanh).unwrap();
        let map = FeatureMap::new(FeatureMapSpec::zz(2)).unwrap();
        let x = vec![vec![0.0; 3]; 3];
        let y = vec![1, 1, -1];
        let data = Labeled::new(&x, &y).unwrap();
        assert!(nqe_loss(&enc, &map, &[(0, 1)], &data).unwrap() < 1e-24);
        assert!((nqe_loss(&enc, &map, &[(0, 2)], &data).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(nqe_loss(&enc, &map, &[], &data), Err(Error::Empty(_))));
    }

    #[test]
    fn nqe_loss_orthogonal_and_half_fidelity() {
        // one-qubit ZZ map with one layer: H then exp(iθZ); θ = π/2 gives |−⟩
        // up to phase, θ = π/4 has fidelity ½ with |+⟩
        let spec = FeatureMapSpec::zz(1).with_layers(1);
        let map = FeatureMap::new(spec).unwrap();
        let mut enc = EncoderNetwork::zeros(&[1, 1], Activation::Tanh).unwrap();
        enc.set_weight(0, 0, 0, 1.0);
        let x = vec![vec![0.0], vec![std::f64::consts::FRAC_PI_2], vec![std::f64::consts::FRAC_PI_4]];
        let y = vec![1, -1, 1];
        let data = Labeled::new(&x, &y).unwrap();
        assert!(nqe_loss(&enc, &map, &[(0, 1)], &data).unwrap() < 1e-24);
        assert!((nqe_loss(&enc, &map, &[(0, 2)], &data).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nqe_loss_matches_brute_force_loop() {
        let (enc, x, y) = small_setup(4, 1);
        let map = FeatureMap::new(FeatureMapSpec::zz(4)).unwrap();
        let data = Labeled::new(&x[..4], &y[..4]).unwrap();
        let pairs: Vec<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
        let mut want = 0.0;
        for &(i, j) in &pairs {
            let a = crate::featuremap::embed_zz(&enc.forward(&x[i]).unwrap(), map.spec()).unwrap();
            let b = crate::featuremap::embed_zz(&enc.forward(&x[j]).unwrap(), map.spec()).unwrap();
            let t = 0.5 * (1.0 + (y[i] * y[j]) as f64);
            want += (fidelity(&a, &b).unwrap() - t).powi(2);
        }
        want /= pairs.len() as f64;
        assert!((nqe_loss(&enc, &map, &pairs, &data).unwrap() - want).abs() < 1e-12);
    }

    fn fd_encoder_gradient(enc: &EncoderNetwork, f: impl Fn(&EncoderNetwork) -> f64) -> Vec<f64> {
        let eps = 1e-5;
        let mut p = enc.params().to_vec();
        let mut probe = enc.clone();
        (0..p.len())
            .map(|k| {
                let orig = p[k];
                p[k] = orig + eps;
                probe.set_params(&p).unwrap();
                let up = f(&probe);
                p[k] = orig - eps;
                probe.set_params(&p).unwrap();
                let down = f(&probe);
                p[k] = orig;
                (up - down) / (2.0 * eps)
            })
            .collect()
    }

    fn assert_grad_close(analytic: &[f64], fd: &[f64]) {
        for (k, (a, f)) in analytic.iter().zip(fd).enumerate() {
            assert!(
                relative_gap(*a, *f) < 1e-4 || (a - f).abs() < 1e-8,
                "param {k}: analytic {a} vs fd {f}"
            );
        }
    }

    #[test]
    fn nqe_gradient_matches_finite_differences() {
        for seed in 0..20u64 {
            let kind_xyz = seed % 2 == 1;
            let spec = if kind_xyz { FeatureMapSpec::xyz(2) } else { FeatureMapSpec::zz(3) };
            let map = FeatureMap::new(spec).unwrap();
            let (enc, x, y) = small_setup(spec.input_dim(), seed);
            let data = Labeled::new(&x, &y).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let batch = PairBatch::sample_stratified(&y, 6, &mut rng).unwrap();
            let (loss, grad) = nqe_loss_gradient(&enc, &map, batch.pairs(), &data, GradientMode::Adjoint).unwrap();
            assert!((loss - nqe_loss(&enc, &map, batch.pairs(), &data).unwrap()).abs() < 1e-12);
            let fd = fd_encoder_gradient(&enc, |e| nqe_loss(e, &map, batch.pairs(), &data).unwrap());
            assert_grad_close(&grad, &fd);
        }
    }

    #[test]
    fn nqe_gradient_modes_agree() {
        let map = FeatureMap::new(FeatureMapSpec::zz(3)).unwrap();
        let (enc, x, y) = small_setup(3, 7);
        let data = Labeled::new(&x, &y).unwrap();
        let pairs = [(0, 1), (2, 5), (3, 4)];
        let (_, a) = nqe_loss_gradient(&enc, &map, &pairs, &data, GradientMode::Adjoint).unwrap();
        let (_, f) = nqe_loss_gradient(&enc, &map, &pairs, &data, GradientMode::FiniteDifference).unwrap();
        for (p, q) in a.iter().zip(&f) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn nqe_gradient_vanishes_at_targets_and_ignores_duplicates() {
        let enc = EncoderNetwork::new(&[3, 2], Activation::Tanh, 0).unwrap();
        let map = FeatureMap::new(FeatureMapSpec::zz(2)).unwrap();
        let x = vec![vec![0.4, -0.2, 0.9]; 2];
        let y = vec![-1, -1];
        let data = Labeled::new(&x, &y).unwrap();
        let (loss, grad) = nqe_loss_gradient(&enc, &map, &[(0, 1)], &data, GradientMode::Adjoint).unwrap();
        assert!(loss < 1e-24);
        assert!(grad.iter().all(|g| g.abs() < 1e-10));

        let (enc, x, y) = small_setup(2, 3);
        let data = Labeled::new(&x, &y).unwrap();
        let (l1, g1) = nqe_loss_gradient(&enc, &map, &[(1, 4)], &data, GradientMode::Adjoint).unwrap();
        let (l2, g2) = nqe_loss_gradient(&enc, &map, &[(1, 4), (1, 4)], &data, GradientMode::Adjoint).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rbf_align_loss_examples() {
        let enc = EncoderNetwork::zeros(&[3, 2], Activation::Tanh).unwrap();
        let x = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 5.0]];
        let same = Labeled::new(&x, &[1, 1]).unwrap();
        assert_eq!(rbf_align_loss(&enc, &[0, 1], &same).unwrap(), 0.0);
        let diff = Labeled::new(&x, &[1, -1]).unwrap();
        assert_eq!(rbf_align_loss(&enc, &[0, 1], &diff).unwrap(), 1.0);
        assert!(matches!(rbf_align_loss(&enc, &[0], &diff), Err(Error::Empty(_))));
    }

    #[test]
    fn rbf_align_loss_matches_naive_loop() {
        let (enc, x, y) = small_setup(3, 4);
        let data = Labeled::new(&x, &y).unwrap();
        let idx = [0, 1, 2, 3];
        let mut want = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                let ha = enc.forward(&x[a]).unwrap();
                let hb = enc.forward(&x[b]).unwrap();
                let d2: f64 = ha.iter().zip(&hb).map(|(p, q)| (p - q) * (p - q)).sum();
                let delta = if y[a] == y[b] { 1.0 } else { 0.0 };
                want += ((-d2).exp() - delta).powi(2);
            }
        }
        want /= 6.0;
        assert!((rbf_align_loss(&enc, &idx, &data).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn rbf_align_gradient_matches_finite_differences() {
        for seed in 0..20u64 {
            let (enc, x, y) = small_setup(3, seed + 50);
            let data = Labeled::new(&x, &y).unwrap();
            let idx: Vec<usize> = (0..x.len()).collect();
            let (loss, grad) = rbf_align_loss_gradient(&enc, &idx, &data).unwrap();
            assert!((loss - rbf_align_loss(&enc, &idx, &data).unwrap()).abs() < 1e-14);
            let fd = fd_encoder_gradient(&enc, |e| rbf_align_loss(e, &idx, &data).unwrap());
            assert_grad_close(&grad, &fd);
        }
    }

    #[test]
    fn early_stopper_patience() {
        let mut s = EarlyStopper::new(40);
        assert_eq!(s.observe(0, 1.0), (true, false));
        assert_eq!(s.observe(1, 0.5), (true, false));
        let mut stopped_at = None;
        for epoch in 2..100 {
            if s.observe(epoch, 0.7).1 {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(41));
    }

    #[test]
    fn pair_sampling_is_stratified_and_distinct() {
        let labels: Vec<i8> = (0..70).map(|i| if i % 7 == 0 { 1 } else { -1 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = PairBatch::sample_stratified(&labels, 40, &mut rng).unwrap();
        assert_eq!(batch.len(), 40);
        let same = batch.pairs().iter().filter(|&&(i, j)| labels[i] == labels[j]).count();
        assert_eq!(same, 20);
        let set: HashSet<_> = batch.pairs().iter().collect();
        assert_eq!(set.len(), 40);
        // tiny set: quotas fall back to what exists
        let small = PairBatch::sample_stratified(&[1, -1, -1], 10, &mut rng).unwrap();
        assert_eq!(small.len(), 3);
        assert!(PairBatch::new(vec![(1, 0)], 3).is_err());
        assert!(PairBatch::new(vec![(0, 1), (0, 1)], 3).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_initial_weights() {
        let map = FeatureMap::new(FeatureMapSpec::zz(2)).unwrap();
        let enc = EncoderNetwork::new(&[6, 4, 2], Activation::Tanh, 1).unwrap();
        let (x, y) = gaussian_classes(20, 6, 2.0, 2);
        let train = Labeled::new(&x[..14], &y[..14]).unwrap();
        let val = Labeled::new(&x[14..], &y[14..]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 3,
            ..TrainConfig::default()
        };
        for objective in [
            Objective::Nqe {
                map: map.clone(),
                mode: GradientMode::Adjoint,
            },
            Objective::RbfAlign,
        ] {
            let out = train_embedding(&objective, &enc, &train, &val, &cfg).unwrap();
            assert_eq!(out.encoder, enc);
            assert_eq!(out.history.epochs.len(), 4);
        }
    }

    #[test]
    fn nqe_training_reduces_validation_loss() {
        let map = FeatureMap::new(FeatureMapSpec::zz(4)).unwrap();
        let enc = EncoderNetwork::new(&EncoderNetwork::default_dims(4), Activation::Tanh, 3).unwrap();
        let (x, y) = gaussian_classes(120, 39, 1.0, 4);
        let train = Labeled::new(&x[..90], &y[..90]).unwrap();
        let val = Labeled::new(&x[90..], &y[90..]).unwrap();
        let cfg = TrainConfig {
            max_epochs: 30,
            ..TrainConfig::default()
        };
        let out = train_embedding(
            &Objective::Nqe {
                map,
                mode: GradientMode::Adjoint,
            },
            &enc,
            &train,
            &val,
            &cfg,
        )
        .unwrap();
        let h = &out.history.epochs;
        let best = out.history.best_val_curve();
        assert!(best.last().unwrap() < &h[0].val_loss);
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(h[out.best_epoch].val_loss, *best.last().unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig {
            max_epochs: 5,
            ..TrainConfig::default()
        };
        let res = optimize(
            vec![0.0],
            &cfg,
            |_| Ok(vec![()]),
            |p, _| Ok((if p[0] != 0.0 { f64::NAN } else { 1.0 }, vec![1.0])),
            |_| Ok(1.0),
        );
        assert!(matches!(res, Err(Error::Diverged { epoch: 2, .. })));
    }

    #[test]
    fn loss_history_csv() {
        let h = LossHistory {
            epochs: vec![
                EpochLoss {
                    epoch: 0,
                    train_loss: 0.5,
                    val_loss: 0.25,
                },
                EpochLoss {
                    epoch: 1,
                    train_loss: 0.125,
                    val_loss: 0.375,
                },
            ],
        };
        assert_eq!(h.to_csv(), "epoch,train_loss,val_loss\n0,0.5,0.25\n1,0.125,0.375\n");
    }

    #[test]
    fn trace_distance_extremes() {
        let zero = StateVector::zero(2).unwrap();
        let one = StateVector::basis(2, 3).unwrap();
        let y = [1, 1, -1, -1];
        assert!(class_trace_distance(&[zero.clone(), zero.clone(), zero.clone(), zero.clone()], &y, 0).unwrap() < 1e-12);
        let d = class_trace_distance(&[zero.clone(), zero.clone(), one.clone(), one], &y, 0).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(matches!(class_trace_distance(&[zero.clone(), zero], &[1, 1], 0), Err(Error::SingleClass)));
    }

    #[test]
    fn capped_indices_respects_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = capped_indices(2000, 512, &mut rng);
        assert_eq!(v.len(), 512);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(capped_indices(10, 512, &mut rng), (0..10).collect::<Vec<_>>());
    }
}
