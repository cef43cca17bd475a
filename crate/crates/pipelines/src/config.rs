//! Experiment configuration and its flat `key = value` file format.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | value | default |
//! |-----|-------|---------|
//! | `dataset` | feature CSV, or a directory holding `<target>.csv` | required |
//! | `target` | target name filter | file stem |
//! | `condition` | one of [`Condition::ALL`] | required |
//! | `class_ratio` | `1:k` or `as_is` | `as_is` |
//! | `ratio_before_split` | `true` / `false` | `true` |
//! | `sample_cap` | max rows after ratio sampling | `1400` |
//! | `n_qubits` | register width | `8` |
//! | `layers` | feature-map layers | map default |
//! | `pca_dims` | PCA width (SVM rows) | quantum rows: `n_qubits`; classical rows: none |
//! | `rbf_dim` | encoder width for `RBF_SingleLayer` | `n_qubits` |
//! | `pretrain_map` | `zz` / `xyz`, map for the QPre conditions | `zz` |
//! | `pretrained_encoder` | weight file reused by the QPre conditions | trained in-run |
//! | `hidden` | comma-separated hidden widths | `64,32` |
//! | `activation` | `tanh` / `relu` | `tanh` |
//! | `gradient_mode` | `adjoint` / `finite_difference` | `adjoint` |
//! | `angle_scaling` | `shared_pi` / `minmax_pi` / `none` (quantum SVM rows) | `shared_pi` |
//! | `seeds` | comma-separated | `0,1,2,3,4` |
//! | `split` | train,val,test fractions | `0.7,0.15,0.15` |
//! | `split_seed` | seed of ratio sampling and splitting | `2024` |
//! | `svm_c` | SVM box constraint | `1` |
//! | `output_dir` | artifact directory | none |
//! | `embed.*`, `finetune.*`, `classifier.*` | trainer settings: `learning_rate`, `batch_pairs`, `batch_samples`, `steps_per_epoch`, `max_epochs`, `patience`, `val_cap` | trainer defaults |

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qembed_core::encoder::{Activation, DEFAULT_HIDDEN};
use qembed_core::featuremap::{FeatureMapSpec, MapKind};
use qembed_core::models::qcnn::QCNN_QUBITS;
use qembed_core::training::{GradientMode, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ClassRatio, N_FEATURES};
use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "NQE_ZZ_QCNN")]
    NqeZzQcnn,
    #[serde(rename = "NQE_XYZ_QCNN")]
    NqeXyzQcnn,
    #[serde(rename = "RBF_SingleLayer")]
    RbfSingleLayer,
    #[serde(rename = "QPre1_FineTuneRBF")]
    QPre1FineTuneRbf,
    #[serde(rename = "QPre2_Frozen")]
    QPre2Frozen,
    #[serde(rename = "QPre3_Joint")]
    QPre3Joint,
    #[serde(rename = "SVM_ZZ")]
    SvmZz,
    #[serde(rename = "SVM_PQK_ZZ")]
    SvmPqkZz,
    #[serde(rename = "SVM_XYZ")]
    SvmXyz,
    #[serde(rename = "SVM_PQK_XYZ")]
    SvmPqkXyz,
    #[serde(rename = "SVM_RBF")]
    SvmRbf,
    #[serde(rename = "SVM_Linear")]
    SvmLinear,
}

/// Kernel behind an SVM condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmKernel {
    Fidelity(MapKind),
    Pqk(MapKind),
    Rbf,
    Linear,
}

impl Condition {
    pub const ALL: [Condition; 12] = [
        Condition::NqeZzQcnn,
        Condition::NqeXyzQcnn,
        Condition::RbfSingleLayer,
        Condition::QPre1FineTuneRbf,
        Condition::QPre2Frozen,
        Condition::QPre3Joint,
        Condition::SvmZz,
        Condition::SvmPqkZz,
        Condition::SvmXyz,
        Condition::SvmPqkXyz,
        Condition::SvmRbf,
        Condition::SvmLinear,
    ];

    /// The embedding conditions compared on the screening targets.
    pub const SCREENING: [Condition; 6] = [
        Condition::NqeZzQcnn,
        Condition::NqeXyzQcnn,
        Condition::RbfSingleLayer,
        Condition::QPre1FineTuneRbf,
        Condition::QPre2Frozen,
        Condition::QPre3Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::NqeZzQcnn => "NQE_ZZ_QCNN",
            Condition::NqeXyzQcnn => "NQE_XYZ_QCNN",
            Condition::RbfSingleLayer => "RBF_SingleLayer",
            Condition::QPre1FineTuneRbf => "QPre1_FineTuneRBF",
            Condition::QPre2Frozen => "QPre2_Frozen",
            Condition::QPre3Joint => "QPre3_Joint",
            Condition::SvmZz => "SVM_ZZ",
            Condition::SvmPqkZz => "SVM_PQK_ZZ",
            Condition::SvmXyz => "SVM_XYZ",
            Condition::SvmPqkXyz => "SVM_PQK_XYZ",
            Condition::SvmRbf => "SVM_RBF",
            Condition::SvmLinear => "SVM_Linear",
        }
    }

    /// Human-readable row label.
    pub fn describe(self) -> &'static str {
        match self {
            Condition::NqeZzQcnn => "NQE (ZZ feature map) + QCNN",
            Condition::NqeXyzQcnn => "NQE (XYZ feature map) + QCNN",
            Condition::RbfSingleLayer => "RBF kernel + single-layer network",
            Condition::QPre1FineTuneRbf => "Quantum-pretrained 1 (RBF fine-tuning)",
            Condition::QPre2Frozen => "Quantum-pretrained 2 (frozen encoder)",
            Condition::QPre3Joint => "Quantum-pretrained 3 (joint training)",
            Condition::SvmZz => "SVM (ZZ feature map kernel)",
            Condition::SvmPqkZz => "SVM (PQK with the ZZ feature map)",
            Condition::SvmXyz => "SVM (XYZ feature map kernel)",
            Condition::SvmPqkXyz => "SVM (PQK with the XYZ feature map)",
            Condition::SvmRbf => "SVM (RBF kernel)",
            Condition::SvmLinear => "SVM (linear kernel)",
        }
    }

    pub fn svm_kernel(self) -> Option<SvmKernel> {
        Some(match self {
            Condition::SvmZz => SvmKernel::Fidelity(MapKind::Zz),
            Condition::SvmPqkZz => SvmKernel::Pqk(MapKind::Zz),
            Condition::SvmXyz => SvmKernel::Fidelity(MapKind::Xyz),
            Condition::SvmPqkXyz => SvmKernel::Pqk(MapKind::Xyz),
            Condition::SvmRbf => SvmKernel::Rbf,
            Condition::SvmLinear => SvmKernel::Linear,
            _ => return None,
        })
    }

    pub fn is_quantum_svm(self) -> bool {
        matches!(self.svm_kernel(), Some(SvmKernel::Fidelity(_) | SvmKernel::Pqk(_)))
    }

    pub fn is_pretrained(self) -> bool {
        matches!(self, Condition::QPre1FineTuneRbf | Condition::QPre2Frozen | Condition::QPre3Joint)
    }

    pub fn uses_qcnn(self) -> bool {
        matches!(self, Condition::NqeZzQcnn | Condition::NqeXyzQcnn)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<&str> = Condition::ALL.iter().map(|c| c.name()).collect();
                format!("unknown condition {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// How PCA outputs become circuit angles in the quantum SVM rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AngleScaling {
    /// Per-component min–max onto `[0, π]`, fitted on the training rows.
    MinMaxPi,
    /// Each component shifted to start at 0, all scaled by one factor so the
    /// widest training range spans `π`; keeps the PCA variance ordering.
    #[default]
    SharedPi,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub target: Option<String>,
    pub condition: Condition,
    pub class_ratio: ClassRatio,
    pub ratio_before_split: bool,
    pub sample_cap: usize,
    pub n_qubits: usize,
    pub layers: Option<usize>,
    pub pca_dims: Option<usize>,
    pub rbf_dim: Option<usize>,
    pub pretrain_map: MapKind,
    pub pretrained_encoder: Option<PathBuf>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub gradient_mode: GradientMode,
    pub angle_scaling: AngleScaling,
    pub seeds: Vec<u64>,
    pub split: [f64; 3],
    pub split_seed: u64,
    pub svm_c: f64,
    pub output_dir: Option<PathBuf>,
    pub embed: TrainConfig,
    pub finetune: TrainConfig,
    pub classifier: TrainConfig,
}

pub const DEFAULT_SAMPLE_CAP: usize = 1400;
pub const DEFAULT_SPLIT: [f64; 3] = [0.70, 0.15, 0.15];
pub const DEFAULT_SPLIT_SEED: u64 = 2024;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, condition: Condition) -> Self {
        Self {
            dataset: dataset.into(),
            target: None,
            condition,
            class_ratio: ClassRatio::AsIs,
            ratio_before_split: true,
            sample_cap: DEFAULT_SAMPLE_CAP,
            n_qubits: QCNN_QUBITS,
            layers: None,
            pca_dims: None,
            rbf_dim: None,
            pretrain_map: MapKind::Zz,
            pretrained_encoder: None,
            hidden: DEFAULT_HIDDEN.to_vec(),
            activation: Activation::Tanh,
            gradient_mode: GradientMode::Adjoint,
            angle_scaling: AngleScaling::SharedPi,
            seeds: DEFAULT_SEEDS.to_vec(),
            split: DEFAULT_SPLIT,
            split_seed: DEFAULT_SPLIT_SEED,
            svm_c: qembed_core::models::svm::DEFAULT_C,
            output_dir: None,
            embed: TrainConfig::default(),
            finetune: TrainConfig::default(),
            classifier: TrainConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dataset = None;
        let mut condition = None;
        let mut rest = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_owned()) {
                return Err(PipelineError::Config(format!("line {}: duplicate key {key}", n + 1)));
            }
            match key {
                "dataset" => dataset = Some(PathBuf::from(value)),
                "condition" => condition = Some(value.parse::<Condition>().map_err(PipelineError::Config)?),
                _ => rest.push((n + 1, key, value)),
            }
        }
        let dataset = dataset.ok_or_else(|| PipelineError::Config("missing key `dataset`".into()))?;
        let condition = condition.ok_or_else(|| PipelineError::Config("missing key `condition`".into()))?;
        let mut cfg = Self::new(dataset, condition);
        for (line, key, value) in rest {
            cfg.set(key, value)
                .map_err(|e| PipelineError::Config(format!("line {line}: {}", strip_prefix(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Assigns one key. Empty values reset optional keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |why: String| PipelineError::Config(format!("{key}: {why}"));
        let num = |v: &str| v.parse::<usize>().map_err(|e| bad(format!("{v:?}: {e}")));
        let opt_num = |v: &str| if v.is_empty() { Ok(None) } else { num(v).map(Some) };
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "target" => self.target = (!value.is_empty()).then(|| value.to_owned()),
            "condition" => self.condition = value.parse().map_err(bad)?,
            "class_ratio" => self.class_ratio = value.parse().map_err(bad)?,
            "ratio_before_split" => self.ratio_before_split = parse_bool(value).map_err(bad)?,
            "sample_cap" => self.sample_cap = num(value)?,
            "n_qubits" => self.n_qubits = num(value)?,
            "layers" => self.layers = opt_num(value)?,
            "pca_dims" => self.pca_dims = opt_num(value)?,
            "rbf_dim" => self.rbf_dim = opt_num(value)?,
            "pretrain_map" => {
                self.pretrain_map = match value {
                    "zz" => MapKind::Zz,
                    "xyz" => MapKind::Xyz,
                    _ => return Err(bad(format!("{value:?} is not zz or xyz"))),
                }
            }
            "pretrained_encoder" => self.pretrained_encoder = (!value.is_empty()).then(|| PathBuf::from(value)),
            "hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|v| num(v.trim())).collect::<Result<_>>()?
                }
            }
            "activation" => {
                self.activation = match value {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    _ => return Err(bad(format!("{value:?} is not tanh or relu"))),
                }
            }
            "gradient_mode" => {
                self.gradient_mode = match value {
                    "adjoint" => GradientMode::Adjoint,
                    "finite_difference" => GradientMode::FiniteDifference,
                    _ => return Err(bad(format!("{value:?} is not adjoint or finite_difference"))),
                }
            }
            "angle_scaling" => {
                self.angle_scaling = match value {
                    "minmax_pi" => AngleScaling::MinMaxPi,
                    "shared_pi" => AngleScaling::SharedPi,
                    "none" => AngleScaling::None,
                    _ => return Err(bad(format!("{value:?} is not minmax_pi, shared_pi or none"))),
                }
            }
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| v.trim().parse::<u64>().map_err(|e| bad(format!("{v:?}: {e}"))))
                    .collect::<Result<_>>()?
            }
            "split" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
                    .collect::<Result<_>>()?;
                self.split = parts.try_into().map_err(|_| bad("expected three fractions".into()))?;
            }
            "split_seed" => self.split_seed = value.parse().map_err(|e| bad(format!("{e}")))?,
            "svm_c" => self.svm_c = value.parse().map_err(|e| bad(format!("{e}")))?,
            "output_dir" => self.output_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => {
                let (section, field) = key.split_once('.').ok_or_else(|| bad("unknown key".into()))?;
                let tc = match section {
                    "embed" => &mut self.embed,
                    "finetune" => &mut self.finetune,
                    "classifier" => &mut self.classifier,
                    _ => return Err(bad("unknown key".into())),
                };
                set_trainer(tc, field, value).map_err(bad)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(PipelineError::Config(why));
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        let total: f64 = self.split.iter().sum();
        if self.split.iter().any(|f| !(*f > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return bad(format!("split {:?} must be three positive fractions summing to 1", self.split));
        }
        if self.sample_cap < 6 {
            return bad("sample_cap must be at least 6".into());
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return bad("svm_c must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if self.layers == Some(0) {
            return bad("layers must be at least 1".into());
        }
        if self.condition.uses_qcnn() && self.n_qubits != QCNN_QUBITS {
            return bad(format!("{} reads out through an {QCNN_QUBITS}-qubit QCNN; n_qubits must be {QCNN_QUBITS}", self.condition));
        }
        if self.condition.svm_kernel().is_none() || self.condition.is_quantum_svm() {
            self.map_spec(self.map_kind().unwrap_or(MapKind::Zz))?;
        }
        if let Some(k) = self.pca_dims {
            if k == 0 || k > N_FEATURES {
                return bad(format!("pca_dims must be in 1..={N_FEATURES}"));
            }
            if self.condition.is_quantum_svm() && k != self.n_qubits {
                return bad(format!("pca_dims = {k}, but quantum SVM rows project onto n_qubits = {} components", self.n_qubits));
            }
        }
        if self.rbf_dim == Some(0) {
            return bad("rbf_dim must be positive".into());
        }
        if self.pretrained_encoder.is_some() && !self.condition.is_pretrained() {
            return bad("pretrained_encoder only applies to the QPre conditions".into());
        }
        for (name, tc) in [("embed", &self.embed), ("finetune", &self.finetune), ("classifier", &self.classifier)] {
            tc.validate().map_err(|e| PipelineError::Config(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Map kind used by the condition, if it embeds into a circuit.
    pub fn map_kind(&self) -> Option<MapKind> {
        match self.condition {
            Condition::NqeZzQcnn => Some(MapKind::Zz),
            Condition::NqeXyzQcnn => Some(MapKind::Xyz),
            c if c.is_pretrained() => Some(self.pretrain_map),
            c => match c.svm_kernel() {
                Some(SvmKernel::Fidelity(k) | SvmKernel::Pqk(k)) => Some(k),
                _ => None,
            },
        }
    }

    pub fn map_spec(&self, kind: MapKind) -> Result<FeatureMapSpec> {
        let spec = FeatureMapSpec::new(kind, self.n_qubits).with_layers(self.layers.unwrap_or(kind.default_layers()));
        spec.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(spec)
    }

    /// Layer widths of an encoder ending in `output_dim`.
    pub fn encoder_dims(&self, output_dim: usize) -> Vec<usize> {
        let mut dims = vec![N_FEATURES];
        dims.extend(&self.hidden);
        dims.push(output_dim);
        dims
    }

    /// The feature CSV this config reads.
    pub fn dataset_file(&self) -> PathBuf {
        match &self.target {
            Some(t) if self.dataset.is_dir() => self.dataset.join(format!("{t}.csv")),
            _ => self.dataset.clone(),
        }
    }

    /// Every key except `output_dir`, in a fixed order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("dataset", self.dataset.display().to_string());
        kv("target", self.target.clone().unwrap_or_default());
        kv("condition", self.condition.to_string());
        kv("class_ratio", self.class_ratio.to_string());
        kv("ratio_before_split", self.ratio_before_split.to_string());
        kv("sample_cap", self.sample_cap.to_string());
        kv("n_qubits", self.n_qubits.to_string());
        kv("layers", opt(self.layers));
        kv("pca_dims", opt(self.pca_dims));
        kv("rbf_dim", opt(self.rbf_dim));
        kv("pretrain_map", map_name(self.pretrain_map).into());
        kv(
            "pretrained_encoder",
            self.pretrained_encoder.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv("hidden", join(&self.hidden));
        kv(
            "activation",
            match self.activation {
                Activation::Tanh => "tanh",
                Activation::Relu => "relu",
            }
            .into(),
        );
        kv(
            "gradient_mode",
            match self.gradient_mode {
                GradientMode::Adjoint => "adjoint",
                GradientMode::FiniteDifference => "finite_difference",
            }
            .into(),
        );
        kv(
            "angle_scaling",
            match self.angle_scaling {
                AngleScaling::MinMaxPi => "minmax_pi",
                AngleScaling::SharedPi => "shared_pi",
                AngleScaling::None => "none",
            }
            .into(),
        );
        kv("seeds", join(&self.seeds));
        kv("split", join(&self.split));
        kv("split_seed", self.split_seed.to_string());
        kv("svm_c", self.svm_c.to_string());
        for (name, tc) in [("embed", &self.embed), ("finetune", &self.finetune), ("classifier", &self.classifier)] {
            kv(&format!("{name}.learning_rate"), tc.learning_rate.to_string());
            kv(&format!("{name}.batch_pairs"), tc.batch_pairs.to_string());
            kv(&format!("{name}.batch_samples"), tc.batch_samples.to_string());
            kv(&format!("{name}.steps_per_epoch"), tc.steps_per_epoch.to_string());
            kv(&format!("{name}.max_epochs"), tc.max_epochs.to_string());
            kv(&format!("{name}.patience"), tc.patience.to_string());
            kv(&format!("{name}.val_cap"), tc.val_cap.to_string());
        }
        s
    }

    /// Full file form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = self.canonical();
        if let Some(dir) = &self.output_dir {
            writeln!(s, "output_dir = {}", dir.display()).expect("write to string");
        }
        s
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").expect("write to string");
            s
        })
    }
}

fn strip_prefix(e: PipelineError) -> String {
    match e {
        PipelineError::Config(m) => m,
        other => other.to_string(),
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{v:?} is not a boolean")),
    }
}

fn set_trainer(tc: &mut TrainConfig, field: &str, value: &str) -> std::result::Result<(), String> {
    let num = || value.parse::<usize>().map_err(|e| format!("{value:?}: {e}"));
    match field {
        "learning_rate" => tc.learning_rate = value.parse().map_err(|e| format!("{value:?}: {e}"))?,
        "batch_pairs" => tc.batch_pairs = num()?,
        "batch_samples" => tc.batch_samples = num()?,
        "steps_per_epoch" => tc.steps_per_epoch = num()?,
        "max_epochs" => tc.max_epochs = num()?,
        "patience" => tc.patience = num()?,
        "val_cap" => tc.val_cap = num()?,
        _ => return Err("unknown trainer key".into()),
    }
    Ok(())
}

fn opt(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn map_name(kind: MapKind) -> &'static str {
    match kind {
        MapKind::Zz => "zz",
        MapKind::Xyz => "xyz",
    }
}
