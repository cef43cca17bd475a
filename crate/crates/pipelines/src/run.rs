//! End-to-end execution of one condition over its seeds, and the batteries.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DMatrix;
use qembed_core::encoder::{EncoderNetwork, Standardizer};
use qembed_core::featuremap::{xyz_inputs_from_features, FeatureMap, MapKind};
use qembed_core::kernels::{
    fidelity_cross, fidelity_gram, linear_cross, linear_gram, pauli_features, pqk_cross, pqk_gamma, pqk_gram,
    rbf_cross, rbf_gram, GramMatrix, VarianceMode,
};
use qembed_core::models::{
    joint_train, metrics, qcnn_train, single_layer_train, svm_fit, svm_predict_rows, LinearClassifier, PcaProjection,
    Qcnn, StackedClassifier,
};
use qembed_core::qcore::StateVector;
use qembed_core::training::{
    embed_all, ensemble_trace_distance, train_embedding, Labeled, LossHistory, Objective, TrainConfig,
};
use rayon::prelude::*;

use crate::config::{AngleScaling, Condition, ExperimentConfig, SvmKernel};
use crate::data::{cap_indices, class_counts, load_features, ratio_indices, stratified_split, ClassRatio, Sample, Split};
use crate::error::{PipelineError, Result};
use crate::report::{Protocol, ReportHeader, RunReport, SeedResult, TraceDistances};

/// Loaded, ratio-sampled, capped and split data shared by every seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub samples: Vec<Sample>,
    pub split: Split,
}

impl Prepared {
    pub fn rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.samples[i].features.clone()).collect()
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<i8> {
        idx.iter().map(|&i| self.samples[i].label).collect()
    }
}

const CAP_STREAM: u64 = 0x4341_5000;
const ENCODER_STREAM: u64 = 0x454e_4300;
const HEAD_STREAM: u64 = 0x4845_4100;
const EMBED_STREAM: u64 = 0x454d_4200;
const FINETUNE_STREAM: u64 = 0x4654_4e00;
const CLASSIFIER_STREAM: u64 = 0x434c_5300;

/// Independent sub-seed for one stage of a repetition.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17) ^ stream
}

fn with_seed(tc: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..tc.clone() }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Vec<Sample>> {
    let path = cfg.dataset_file();
    let samples = load_features(&path)?;
    if let Some(t) = &cfg.target {
        if samples.first().is_some_and(|s| &s.target_name != t) {
            return Err(PipelineError::Config(format!(
                "target {t:?} does not match dataset {}",
                path.display()
            )));
        }
    }
    if samples.is_empty() {
        return Err(PipelineError::Data(format!("{} has no rows", path.display())));
    }
    Ok(samples)
}

/// Ratio sampling, the sample cap and the stratified split, all driven by
/// `split_seed`.
pub fn prepare(cfg: &ExperimentConfig, samples: &[Sample]) -> Result<Prepared> {
    let labels: Vec<i8> = samples.iter().map(|s| s.label).collect();
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    if cfg.ratio_before_split {
        let keep = match cfg.class_ratio {
            ClassRatio::PerActivator(k) => ratio_indices(&labels, k, cfg.split_seed)?,
            ClassRatio::AsIs => (0..samples.len()).collect(),
        };
        let sub = pick(&keep);
        let sub_labels: Vec<i8> = sub.iter().map(|s| s.label).collect();
        let capped = pick_from(&sub, &cap_indices(&sub_labels, cfg.sample_cap, cfg.split_seed ^ CAP_STREAM));
        let capped_labels: Vec<i8> = capped.iter().map(|s| s.label).collect();
        let split = stratified_split(&capped_labels, cfg.split, cfg.split_seed)?;
        return Ok(Prepared { samples: capped, split });
    }

    let capped = pick(&cap_indices(&labels, cfg.sample_cap, cfg.split_seed ^ CAP_STREAM));
    let capped_labels: Vec<i8> = capped.iter().map(|s| s.label).collect();
    let full = stratified_split(&capped_labels, cfg.split, cfg.split_seed)?;
    let mut out = Vec::new();
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (p, idx) in [&full.train, &full.val, &full.test].into_iter().enumerate() {
        let part_labels: Vec<i8> = idx.iter().map(|&i| capped_labels[i]).collect();
        let keep = match cfg.class_ratio {
            ClassRatio::PerActivator(k) => ratio_indices(&part_labels, k, cfg.split_seed.wrapping_add(p as u64 + 1))?,
            ClassRatio::AsIs => (0..idx.len()).collect(),
        };
        for k in keep {
            parts[p].push(out.len());
            out.push(capped[idx[k]].clone());
        }
    }
    let [train, val, test] = parts;
    Ok(Prepared {
        samples: out,
        split: Split { train, val, test },
    })
}

fn pick_from(samples: &[Sample], idx: &[usize]) -> Vec<Sample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

/// Where per-seed artifacts go and what they are named.
struct Artifacts<'a> {
    dir: Option<&'a Path>,
    stem: String,
}

impl Artifacts<'_> {
    fn name(&self, seed: u64, what: &str) -> String {
        format!("{}_seed{seed}_{what}", self.stem)
    }

    fn history(&self, seed: u64, what: &str, h: &LossHistory, list: &mut Vec<String>) -> Result<()> {
        if let Some(dir) = self.dir {
            let name = self.name(seed, &format!("{what}_loss.csv"));
            h.save_csv(&dir.join(&name))?;
            list.push(name);
        }
        Ok(())
    }

    fn encoder(&self, seed: u64, what: &str, enc: &EncoderNetwork, list: &mut Vec<String>) -> Result<()> {
        if let Some(dir) = self.dir {
            let name = self.name(seed, &format!("{what}.qenc"));
            enc.save(&dir.join(&name))?;
            list.push(name);
        }
        Ok(())
    }

    fn gram(&self, seed: u64, g: &GramMatrix, list: &mut Vec<String>) -> Result<()> {
        if let Some(dir) = self.dir {
            let name = self.name(seed, "gram.qgrm");
            g.save(&dir.join(&name))?;
            list.push(name);
        }
        Ok(())
    }
}

/// Standardized rows of the three splits, scaled with training statistics.
pub struct SplitRows {
    pub standardizer: Standardizer,
    pub train: Vec<Vec<f64>>,
    pub val: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub y_train: Vec<i8>,
    pub y_val: Vec<i8>,
    pub y_test: Vec<i8>,
}

pub fn standardized_splits(prep: &Prepared) -> Result<SplitRows> {
    let s = &prep.split;
    let standardizer = Standardizer::fit(&prep.rows(&s.train))?;
    Ok(SplitRows {
        train: standardizer.transform_all(&prep.rows(&s.train))?,
        val: standardizer.transform_all(&prep.rows(&s.val))?,
        test: standardizer.transform_all(&prep.rows(&s.test))?,
        y_train: prep.labels(&s.train),
        y_val: prep.labels(&s.val),
        y_test: prep.labels(&s.test),
        standardizer,
    })
}

/// A trained fidelity-loss encoder and its separability record.
pub struct NqeOutcome {
    pub encoder: EncoderNetwork,
    pub history: Option<LossHistory>,
    pub trace: Option<TraceDistances>,
}

/// Trains the encoder of a map-based condition from its seeded
/// initialization, recording class-ensemble trace distances around training.
pub fn train_nqe(cfg: &ExperimentConfig, map: &FeatureMap, rows: &SplitRows, seed: u64) -> Result<NqeOutcome> {
    let init = EncoderNetwork::new(
        &cfg.encoder_dims(map.spec().input_dim()),
        cfg.activation,
        derive_seed(seed, ENCODER_STREAM),
    )?;
    let train = Labeled::new(&rows.train, &rows.y_train)?;
    let val = Labeled::new(&rows.val, &rows.y_val)?;
    let test = Labeled::new(&rows.test, &rows.y_test)?;
    let train_before = ensemble_trace_distance(&init, map, &train, seed)?;
    let test_before = ensemble_trace_distance(&init, map, &test, seed)?;
    let objective = Objective::Nqe {
        map: map.clone(),
        mode: cfg.gradient_mode,
    };
    let out = train_embedding(&objective, &init, &train, &val, &with_seed(&cfg.embed, derive_seed(seed, EMBED_STREAM)))?;
    let trace = TraceDistances {
        train_before,
        train_after: ensemble_trace_distance(&out.encoder, map, &train, seed)?,
        test_before,
        test_after: ensemble_trace_distance(&out.encoder, map, &test, seed)?,
    };
    if trace.train_after + 1e-6 < trace.train_before {
        warn!(
            "seed {seed}: train trace distance fell from {:.4} to {:.4}",
            trace.train_before, trace.train_after
        );
    }
    Ok(NqeOutcome {
        encoder: out.encoder,
        history: Some(out.history),
        trace: Some(trace),
    })
}

/// The encoder reused by the quantum-pretrained conditions: loaded when a
/// weight file is configured, otherwise trained in-run.
pub fn pretrained_encoder(cfg: &ExperimentConfig, map: &FeatureMap, rows: &SplitRows, seed: u64) -> Result<NqeOutcome> {
    let Some(path) = &cfg.pretrained_encoder else {
        return train_nqe(cfg, map, rows, seed);
    };
    let encoder = EncoderNetwork::load(path)?;
    let want = map.spec().input_dim();
    if encoder.input_dim() != crate::data::N_FEATURES || encoder.output_dim() != want {
        return Err(PipelineError::Config(format!(
            "{} maps {} → {}, expected {} → {want}",
            path.display(),
            encoder.input_dim(),
            encoder.output_dim(),
            crate::data::N_FEATURES
        )));
    }
    Ok(NqeOutcome {
        encoder,
        history: None,
        trace: None,
    })
}

/// The embedding-training stage of a trained condition on its own: the
/// fidelity-loss encoder for the map-based conditions (ignoring any
/// configured weight file), the alignment encoder for `RBF_SingleLayer`.
pub fn train_embedding_stage(cfg: &ExperimentConfig, prep: &Prepared, seed: u64) -> Result<NqeOutcome> {
    let rows = standardized_splits(prep)?;
    if cfg.condition == Condition::RbfSingleLayer {
        let width = cfg.rbf_dim.unwrap_or(cfg.n_qubits);
        let init = EncoderNetwork::new(&cfg.encoder_dims(width), cfg.activation, derive_seed(seed, ENCODER_STREAM))?;
        let out = train_embedding(
            &Objective::RbfAlign,
            &init,
            &Labeled::new(&rows.train, &rows.y_train)?,
            &Labeled::new(&rows.val, &rows.y_val)?,
            &with_seed(&cfg.embed, derive_seed(seed, EMBED_STREAM)),
        )?;
        return Ok(NqeOutcome {
            encoder: out.encoder,
            history: Some(out.history),
            trace: None,
        });
    }
    let kind = cfg
        .map_kind()
        .filter(|_| cfg.condition.svm_kernel().is_none())
        .ok_or_else(|| PipelineError::Config(format!("{} has no trainable embedding", cfg.condition)))?;
    let map = FeatureMap::new(cfg.map_spec(kind)?)?;
    train_nqe(cfg, &map, &rows, seed)
}

fn forward_all(enc: &EncoderNetwork, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(rows.iter().map(|r| enc.forward(r)).collect::<qembed_core::Result<_>>()?)
}

/// Trains the logistic head on fixed features and scores the test split.
fn single_layer_on(
    cfg: &ExperimentConfig,
    enc: &EncoderNetwork,
    rows: &SplitRows,
    seed: u64,
    art: &Artifacts<'_>,
    files: &mut Vec<String>,
) -> Result<(f64, f64)> {
    let (h_train, h_val, h_test) = (forward_all(enc, &rows.train)?, forward_all(enc, &rows.val)?, forward_all(enc, &rows.test)?);
    let init = LinearClassifier::random(enc.output_dim(), derive_seed(seed, HEAD_STREAM));
    let fit = single_layer_train(
        &init,
        &Labeled::new(&h_train, &rows.y_train)?,
        &Labeled::new(&h_val, &rows.y_val)?,
        &with_seed(&cfg.classifier, derive_seed(seed, CLASSIFIER_STREAM)),
    )?;
    art.history(seed, "classifier", &fit.history, files)?;
    let m = metrics(&rows.y_test, &fit.model.predict(&h_test)?)?;
    Ok((m.accuracy, m.balanced_accuracy))
}

fn split_sizes(prep: &Prepared) -> (usize, usize, usize) {
    (prep.split.train.len(), prep.split.val.len(), prep.split.test.len())
}

fn run_trained_seed(cfg: &ExperimentConfig, prep: &Prepared, seed: u64, art: &Artifacts<'_>) -> Result<SeedResult> {
    let rows = standardized_splits(prep)?;
    let mut files = Vec::new();
    let mut trace = None;
    let (accuracy, balanced_accuracy) = match cfg.condition {
        Condition::NqeZzQcnn | Condition::NqeXyzQcnn => {
            let kind = cfg.map_kind().expect("map condition");
            let map = FeatureMap::new(cfg.map_spec(kind)?)?;
            let nqe = train_nqe(cfg, &map, &rows, seed)?;
            trace = nqe.trace;
            record_nqe(&nqe, seed, art, &mut files)?;
            let embed = |x: &[Vec<f64>]| -> Result<Vec<StateVector>> { Ok(embed_all(&nqe.encoder, &map, x)?) };
            let (s_train, s_val, s_test) = (embed(&rows.train)?, embed(&rows.val)?, embed(&rows.test)?);
            let fit = qcnn_train(
                &Qcnn::random(derive_seed(seed, HEAD_STREAM)),
                (&s_train, &rows.y_train),
                (&s_val, &rows.y_val),
                &with_seed(&cfg.classifier, derive_seed(seed, CLASSIFIER_STREAM)),
            )?;
            art.history(seed, "classifier", &fit.history, &mut files)?;
            let m = metrics(&rows.y_test, &fit.model.predict(&s_test)?)?;
            (m.accuracy, m.balanced_accuracy)
        }
        Condition::RbfSingleLayer => {
            let width = cfg.rbf_dim.unwrap_or(cfg.n_qubits);
            let init = EncoderNetwork::new(&cfg.encoder_dims(width), cfg.activation, derive_seed(seed, ENCODER_STREAM))?;
            let out = train_embedding(
                &Objective::RbfAlign,
                &init,
                &Labeled::new(&rows.train, &rows.y_train)?,
                &Labeled::new(&rows.val, &rows.y_val)?,
                &with_seed(&cfg.embed, derive_seed(seed, EMBED_STREAM)),
            )?;
            art.history(seed, "embed", &out.history, &mut files)?;
            art.encoder(seed, "encoder", &out.encoder, &mut files)?;
            single_layer_on(cfg, &out.encoder, &rows, seed, art, &mut files)?
        }
        Condition::QPre1FineTuneRbf | Condition::QPre2Frozen | Condition::QPre3Joint => {
            let map = FeatureMap::new(cfg.map_spec(cfg.pretrain_map)?)?;
            let nqe = pretrained_encoder(cfg, &map, &rows, seed)?;
            trace = nqe.trace;
            record_nqe(&nqe, seed, art, &mut files)?;
            match cfg.condition {
                Condition::QPre1FineTuneRbf => {
                    let out = train_embedding(
                        &Objective::RbfAlign,
                        &nqe.encoder,
                        &Labeled::new(&rows.train, &rows.y_train)?,
                        &Labeled::new(&rows.val, &rows.y_val)?,
                        &with_seed(&cfg.finetune, derive_seed(seed, FINETUNE_STREAM)),
                    )?;
                    art.history(seed, "finetune", &out.history, &mut files)?;
                    art.encoder(seed, "finetuned_encoder", &out.encoder, &mut files)?;
                    single_layer_on(cfg, &out.encoder, &rows, seed, art, &mut files)?
                }
                Condition::QPre2Frozen => single_layer_on(cfg, &nqe.encoder, &rows, seed, art, &mut files)?,
                _ => {
                    let head = LinearClassifier::random(nqe.encoder.output_dim(), derive_seed(seed, HEAD_STREAM));
                    let fit = joint_train(
                        &StackedClassifier::new(nqe.encoder.clone(), head)?,
                        &Labeled::new(&rows.train, &rows.y_train)?,
                        &Labeled::new(&rows.val, &rows.y_val)?,
                        &with_seed(&cfg.classifier, derive_seed(seed, CLASSIFIER_STREAM)),
                    )?;
                    art.history(seed, "classifier", &fit.history, &mut files)?;
                    let m = metrics(&rows.y_test, &fit.model.predict(&rows.test)?)?;
                    (m.accuracy, m.balanced_accuracy)
                }
            }
        }
        c => unreachable!("{c} is an SVM condition"),
    };
    let (n_train, n_val, n_test) = split_sizes(prep);
    Ok(SeedResult {
        seed,
        accuracy,
        balanced_accuracy,
        n_train,
        n_val,
        n_test,
        trace_distance: trace,
        gram_min_eigenvalue: None,
        kernel_gamma: None,
        artifacts: files,
    })
}

fn record_nqe(nqe: &NqeOutcome, seed: u64, art: &Artifacts<'_>, files: &mut Vec<String>) -> Result<()> {
    if let Some(h) = &nqe.history {
        art.history(seed, "embed", h, files)?;
        art.encoder(seed, "encoder", &nqe.encoder, files)?;
    }
    Ok(())
}

/// Affine map `a_c = slope_c · (v_c − min_c)` of PCA scores onto angles,
/// fitted on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleScaler {
    pub min: Vec<f64>,
    pub slope: Vec<f64>,
}

impl AngleScaler {
    /// `shared = false`: every component onto `[0, π]`. `shared = true`: one
    /// slope, set by the widest component.
    pub fn fit(rows: &[Vec<f64>], shared: bool) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(qembed_core::Error::Empty("angle scaler rows"))?;
        let min: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min)).collect();
        let max: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let range: Vec<f64> = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        let slope = if shared {
            let widest = range.iter().copied().fold(0.0, f64::max);
            if !(widest > 1e-12) {
                return Err(PipelineError::Data("all components are constant on the training rows".into()));
            }
            vec![PI / widest; d]
        } else {
            if let Some(c) = (0..d).find(|&c| !(range[c] > 1e-12)) {
                return Err(PipelineError::Data(format!("component {c} is constant on the training rows")));
            }
            range.iter().map(|r| PI / r).collect()
        };
        Ok(Self { min, slope })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.slope))
            .map(|(v, (lo, k))| k * (v - lo))
            .collect()
    }
}

/// Everything the SVM rows fit on the training side, plus the kernel inputs.
pub struct SvmInputs {
    pub standardizer: Standardizer,
    pub pca: Option<PcaProjection>,
    pub scaler: Option<AngleScaler>,
    /// Bandwidth of the PQK or RBF kernel.
    pub gamma: Option<f64>,
    pub gram: GramMatrix,
    /// Test rows × training rows.
    pub cross: DMatrix<f64>,
    pub y_fit: Vec<i8>,
    pub y_test: Vec<i8>,
}

/// Standardize → (PCA) → (angles → embed) → Gram, with every statistic fitted
/// on the SVM's training rows (train ∪ validation; the SVM rows tune nothing).
pub fn svm_inputs(cfg: &ExperimentConfig, prep: &Prepared) -> Result<SvmInputs> {
    let kernel = cfg
        .condition
        .svm_kernel()
        .ok_or_else(|| PipelineError::Config(format!("{} is not an SVM condition", cfg.condition)))?;
    let fit_idx = prep.split.fit_set();
    let standardizer = Standardizer::fit(&prep.rows(&fit_idx))?;
    let x_fit = standardizer.transform_all(&prep.rows(&fit_idx))?;
    let x_test = standardizer.transform_all(&prep.rows(&prep.split.test))?;
    let pca_dims = match kernel {
        SvmKernel::Fidelity(_) | SvmKernel::Pqk(_) => Some(cfg.pca_dims.unwrap_or(cfg.n_qubits)),
        SvmKernel::Rbf | SvmKernel::Linear => cfg.pca_dims,
    };
    let pca = pca_dims.map(|k| PcaProjection::fit(&x_fit, k)).transpose()?;
    let (f_fit, f_test) = match &pca {
        Some(p) => (p.transform_all(&x_fit)?, p.transform_all(&x_test)?),
        None => (x_fit, x_test),
    };

    let mut scaler = None;
    let mut gamma = None;
    let (gram, cross) = match kernel {
        SvmKernel::Fidelity(kind) | SvmKernel::Pqk(kind) => {
            let (a_fit, a_test) = match cfg.angle_scaling {
                AngleScaling::MinMaxPi | AngleScaling::SharedPi => {
                    let s = AngleScaler::fit(&f_fit, cfg.angle_scaling == AngleScaling::SharedPi)?;
                    let out = (
                        f_fit.iter().map(|r| s.transform(r)).collect::<Vec<_>>(),
                        f_test.iter().map(|r| s.transform(r)).collect::<Vec<_>>(),
                    );
                    scaler = Some(s);
                    out
                }
                AngleScaling::None => (f_fit, f_test),
            };
            let map = FeatureMap::new(cfg.map_spec(kind)?)?;
            let embed = |rows: &[Vec<f64>]| -> Result<Vec<StateVector>> {
                Ok(rows
                    .par_iter()
                    .map(|a| match kind {
                        MapKind::Zz => map.embed(a),
                        MapKind::Xyz => map.embed(&xyz_inputs_from_features(a)),
                    })
                    .collect::<qembed_core::Result<_>>()?)
            };
            let (s_fit, s_test) = (embed(&a_fit)?, embed(&a_test)?);
            if matches!(kernel, SvmKernel::Pqk(_)) {
                let d = a_fit[0].len();
                let g = pqk_gamma(&pauli_features(&s_fit), d, VarianceMode::Pooled)?;
                gamma = Some(g);
                (pqk_gram(&s_fit, g)?, pqk_cross(&s_test, &s_fit, g)?)
            } else {
                (fidelity_gram(&s_fit)?, fidelity_cross(&s_test, &s_fit)?)
            }
        }
        SvmKernel::Rbf => {
            let g = scale_gamma(&f_fit)?;
            gamma = Some(g);
            (rbf_gram(&f_fit, g)?, rbf_cross(&f_test, &f_fit, g)?)
        }
        SvmKernel::Linear => (linear_gram(&f_fit)?, linear_cross(&f_test, &f_fit)?),
    };
    Ok(SvmInputs {
        standardizer,
        pca,
        scaler,
        gamma,
        gram,
        cross,
        y_fit: prep.labels(&fit_idx),
        y_test: prep.labels(&prep.split.test),
    })
}

/// `1 / (d · Var(X))` over every entry of the training matrix.
pub fn scale_gamma(rows: &[Vec<f64>]) -> Result<f64> {
    let d = rows.first().map(Vec::len).unwrap_or(0);
    let n = (rows.len() * d) as f64;
    if n == 0.0 {
        return Err(PipelineError::Data("no rows for the RBF bandwidth".into()));
    }
    let mean = rows.iter().flatten().sum::<f64>() / n;
    let var = rows.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 1e-20) {
        return Err(PipelineError::Data("training features have zero variance".into()));
    }
    Ok(1.0 / (d as f64 * var))
}

fn run_svm_seed(cfg: &ExperimentConfig, prep: &Prepared, seed: u64, art: &Artifacts<'_>) -> Result<SeedResult> {
    let inputs = svm_inputs(cfg, prep)?;
    let model = svm_fit(&inputs.gram, &inputs.y_fit, cfg.svm_c)?;
    let pred = svm_predict_rows(&model, &inputs.cross)?;
    let m = metrics(&inputs.y_test, &pred)?;
    let mut files = Vec::new();
    art.gram(seed, &inputs.gram, &mut files)?;
    let (n_train, n_val, n_test) = split_sizes(prep);
    Ok(SeedResult {
        seed,
        accuracy: m.accuracy,
        balanced_accuracy: m.balanced_accuracy,
        n_train,
        n_val,
        n_test,
        trace_distance: None,
        gram_min_eigenvalue: Some(inputs.gram.min_eigenvalue()),
        kernel_gamma: inputs.gamma,
        artifacts: files,
    })
}

/// One repetition of the configured condition.
pub fn run_seed(cfg: &ExperimentConfig, prep: &Prepared, seed: u64, artifact_dir: Option<&Path>) -> Result<SeedResult> {
    let art = Artifacts {
        dir: artifact_dir,
        stem: report_stem(cfg),
    };
    if cfg.condition.svm_kernel().is_some() {
        run_svm_seed(cfg, prep, seed, &art)
    } else {
        run_trained_seed(cfg, prep, seed, &art)
    }
}

/// File stem shared by a condition's report and artifacts.
pub fn report_stem(cfg: &ExperimentConfig) -> String {
    let mut stem = cfg.condition.name().to_owned();
    if cfg.map_kind().is_some() {
        stem.push_str(&format!("_{}q", cfg.n_qubits));
    }
    if let (Some(k), false) = (cfg.pca_dims, cfg.condition.is_quantum_svm()) {
        stem.push_str(&format!("_pca{k}"));
    }
    stem
}

/// Table row label.
pub fn row_label(cfg: &ExperimentConfig) -> String {
    let pca = cfg.condition.is_quantum_svm() || (cfg.condition.svm_kernel().is_some() && cfg.pca_dims.is_some());
    let mut label = format!("{}{}", if pca { "PCA + " } else { "" }, cfg.condition.describe());
    if cfg.map_kind().is_some() {
        label.push_str(&format!(" [{} qubits]", cfg.n_qubits));
    }
    label
}

fn header(cfg: &ExperimentConfig, prep: &Prepared, samples: &[Sample]) -> ReportHeader {
    let (n_activators, _) = class_counts(&prep.samples);
    ReportHeader {
        label: row_label(cfg),
        condition: cfg.condition.name().to_owned(),
        n_qubits: cfg.map_kind().map(|_| cfg.n_qubits),
        pca_dims: if cfg.condition.is_quantum_svm() {
            Some(cfg.pca_dims.unwrap_or(cfg.n_qubits))
        } else {
            cfg.pca_dims
        },
        protocol: Protocol {
            dataset: cfg.dataset_file().display().to_string(),
            target: samples.first().map(|s| s.target_name.clone()).unwrap_or_default(),
            class_ratio: cfg.class_ratio.to_string(),
            ratio_before_split: cfg.ratio_before_split,
            sample_cap: cfg.sample_cap,
            split: cfg.split,
            split_seed: cfg.split_seed,
            stratified: true,
            n_samples: prep.samples.len(),
            n_activators,
        },
        fingerprint: cfg.fingerprint(),
    }
}

/// Runs every seed (in parallel) on already loaded samples.
pub fn run_condition_on(cfg: &ExperimentConfig, samples: &[Sample]) -> Result<RunReport> {
    cfg.validate()?;
    let prep = prepare(cfg, samples)?;
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
    }
    info!(
        "{}: {} samples ({} train / {} val / {} test), seeds {:?}",
        cfg.condition,
        prep.samples.len(),
        prep.split.train.len(),
        prep.split.val.len(),
        prep.split.test.len(),
        cfg.seeds
    );
    let outcomes: Vec<(u64, std::result::Result<SeedResult, String>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let res = run_seed(cfg, &prep, seed, cfg.output_dir.as_deref()).map_err(|e| {
                warn!("{} seed {seed} failed: {e}", cfg.condition);
                e.to_string()
            });
            (seed, res)
        })
        .collect();
    RunReport::assemble(header(cfg, &prep, samples), &cfg.seeds, outcomes)
}

/// Loads the configured dataset and runs the condition end to end.
pub fn run_condition(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let samples = load_dataset(cfg)?;
    run_condition_on(cfg, &samples)
}

/// Qubit counts of the kernel battery's quantum rows.
pub const BATTERY_QUBITS: [usize; 2] = [4, 8];

/// Configs of the kernel-SVM battery: four quantum kernels at each qubit
/// count, then linear and RBF with and without PCA.
pub fn covid_battery_configs(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    let derive = |condition: Condition, n_qubits: usize, pca: Option<usize>| ExperimentConfig {
        condition,
        n_qubits,
        pca_dims: pca,
        pretrained_encoder: None,
        ..base.clone()
    };
    for cond in [Condition::SvmZz, Condition::SvmPqkZz, Condition::SvmXyz, Condition::SvmPqkXyz] {
        for q in BATTERY_QUBITS {
            out.push(derive(cond, q, None));
        }
    }
    let classical_pca = base.pca_dims.unwrap_or(BATTERY_QUBITS[0]);
    for pca in [Some(classical_pca), None] {
        for cond in [Condition::SvmLinear, Condition::SvmRbf] {
            out.push(derive(cond, base.n_qubits, pca));
        }
    }
    out
}

/// Configs of the screening battery: the six embedding conditions.
pub fn screening_battery_configs(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    Condition::SCREENING
        .into_iter()
        .map(|condition| ExperimentConfig {
            condition,
            n_qubits: if condition.uses_qcnn() {
                qembed_core::models::qcnn::QCNN_QUBITS
            } else {
                base.n_qubits
            },
            pca_dims: None,
            pretrained_encoder: base.pretrained_encoder.clone().filter(|_| condition.is_pretrained()),
            ..base.clone()
        })
        .collect()
}

fn run_battery(configs: Vec<ExperimentConfig>) -> Result<Vec<RunReport>> {
    let first = configs.first().ok_or_else(|| PipelineError::Config("empty battery".into()))?;
    let samples = load_dataset(first)?;
    configs.iter().map(|cfg| run_condition_on(cfg, &samples)).collect()
}

/// Kernel-SVM battery on one dataset; one report per table row.
pub fn run_covid_battery(base: &ExperimentConfig) -> Result<Vec<RunReport>> {
    run_battery(covid_battery_configs(base))
}

pub fn run_screening_battery(base: &ExperimentConfig) -> Result<Vec<RunReport>> {
    run_battery(screening_battery_configs(base))
}

/// Output directory of a config, defaulting to the working directory.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}
