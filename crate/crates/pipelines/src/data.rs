//! Feature CSV loading, class-ratio sampling and stratified splitting.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Descriptor columns, in file order, after `id` and `label`.
pub const DESCRIPTOR_NAMES: [&str; 39] = [
    "Num_C",
    "Num_N",
    "Num_O",
    "Num_P",
    "Num_S",
    "Num_F",
    "Num_Cl",
    "Num_Br",
    "Num_I",
    "Single_Bonds",
    "Double_Bonds",
    "NumStereoE",
    "Num_Aromatic_Atoms",
    "Aromatic_Proportion",
    "NumRotatableBonds",
    "Total_NH_OH",
    "Total_N_O",
    "NumHydrogenAcceptors",
    "NumHydrogenDonors",
    "NumofHeteroatoms",
    "MolLogP",
    "MolWt",
    "FpDensityMorgan1",
    "FpDensityMorgan2",
    "FpDensityMorgan3",
    "MaxAbsPartialCharge",
    "MinAbsPartialCharge",
    "NumValenceElectrons",
    "BertzCT",
    "BalabanJ",
    "Chi0",
    "Chi1",
    "Chi2n",
    "Chi3n",
    "HallKierAlpha",
    "Ipc",
    "Kappa1",
    "Kappa2",
    "Kappa3",
];

pub const N_FEATURES: usize = DESCRIPTOR_NAMES.len();

/// Full header row of a feature CSV.
pub fn header() -> Vec<&'static str> {
    let mut h = vec!["id", "label"];
    h.extend(DESCRIPTOR_NAMES);
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    /// +1 activator, −1 inactivator.
    pub label: i8,
    pub target_name: String,
}

/// `1`/`+1` → +1, `0`/`-1` → −1.
pub fn parse_label(token: &str) -> Option<i8> {
    match token.trim() {
        "1" | "+1" => Some(1),
        "0" | "-1" => Some(-1),
        _ => None,
    }
}

/// Reads a feature CSV. Lines starting with `#` are comments. Errors name
/// the offending file line.
pub fn load_features(path: &Path) -> Result<Vec<Sample>> {
    let target = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = std::fs::File::open(path).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
    read_features(file, &target).map_err(|e| match e {
        PipelineError::Data(msg) => PipelineError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_features(reader: impl std::io::Read, target_name: &str) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let expected = header();
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| PipelineError::Data(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != expected {
        let mismatch = expected
            .iter()
            .zip(&found)
            .position(|(a, b)| a != b)
            .unwrap_or(expected.len().min(found.len()));
        return Err(PipelineError::Data(format!(
            "header has {} columns, expected {}; first difference at column {} ({:?} vs {:?})",
            found.len(),
            expected.len(),
            mismatch + 1,
            found.get(mismatch).map(String::as_str).unwrap_or("<none>"),
            expected.get(mismatch).copied().unwrap_or("<none>"),
        )));
    }

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| PipelineError::Data(format!("malformed CSV: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != expected.len() {
            return Err(PipelineError::Data(format!(
                "line {line}: {} columns, expected {} (id, label and {N_FEATURES} descriptors)",
                record.len(),
                expected.len()
            )));
        }
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(PipelineError::Data(format!("line {line}: empty id")));
        }
        let label = parse_label(&record[1])
            .ok_or_else(|| PipelineError::Data(format!("line {line}: unknown label token {:?}", &record[1])))?;
        let mut features = Vec::with_capacity(N_FEATURES);
        for (k, cell) in record.iter().skip(2).enumerate() {
            let column = DESCRIPTOR_NAMES[k];
            if cell.is_empty() {
                return Err(PipelineError::Data(format!("line {line}: missing value for {column}")));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| PipelineError::Data(format!("line {line}: non-numeric {column} value {cell:?}")))?;
            if !v.is_finite() {
                return Err(PipelineError::Data(format!("line {line}: non-finite {column} value {cell:?}")));
            }
            features.push(v);
        }
        samples.push(Sample {
            id,
            features,
            label,
            target_name: target_name.to_owned(),
        });
    }
    Ok(samples)
}

/// Serializes samples in the schema [`read_features`] accepts; labels are
/// written as `1`/`0`.
pub fn write_features(samples: &[Sample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| PipelineError::Data(format!("CSV write failed: {e}"));
    w.write_record(header()).map_err(csv_err)?;
    for s in samples {
        if s.features.len() != N_FEATURES {
            return Err(PipelineError::Data(format!("sample {} has {} features", s.id, s.features.len())));
        }
        let mut row = vec![s.id.clone(), if s.label == 1 { "1".into() } else { "0".into() }];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| PipelineError::Data(format!("CSV flush failed: {e}")))
}

pub fn class_counts(samples: &[Sample]) -> (usize, usize) {
    let pos = samples.iter().filter(|s| s.label == 1).count();
    (pos, samples.len() - pos)
}

/// Activator:inactivator ratio applied before modelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassRatio {
    /// `k` inactivators per activator.
    PerActivator(usize),
    AsIs,
}

impl fmt::Display for ClassRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassRatio::PerActivator(k) => write!(f, "1:{k}"),
            ClassRatio::AsIs => f.write_str("as_is"),
        }
    }
}

impl FromStr for ClassRatio {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("as_is") || s.eq_ignore_ascii_case("asis") {
            return Ok(ClassRatio::AsIs);
        }
        let k = s
            .strip_prefix("1:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .ok_or_else(|| format!("class ratio {s:?} is not 1:k (k ≥ 1) or as_is"))?;
        Ok(ClassRatio::PerActivator(k))
    }
}

/// Keeps every activator and draws `k` inactivators per activator uniformly
/// without replacement. Input order is preserved.
pub fn sample_ratio(samples: &[Sample], ratio: ClassRatio, seed: u64) -> Result<Vec<Sample>> {
    let ClassRatio::PerActivator(k) = ratio else {
        return Ok(samples.to_vec());
    };
    let labels: Vec<i8> = samples.iter().map(|s| s.label).collect();
    let keep = ratio_indices(&labels, k, seed)?;
    Ok(keep.into_iter().map(|i| samples[i].clone()).collect())
}

/// Sorted indices selected by [`sample_ratio`].
pub fn ratio_indices(labels: &[i8], per_activator: usize, seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    if pos.is_empty() {
        return Err(PipelineError::Data("no activators to sample against".into()));
    }
    let need = pos.len() * per_activator;
    if neg.len() < need {
        return Err(PipelineError::Data(format!(
            "ratio 1:{per_activator} needs {need} inactivators for {} activators, only {} available",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = pos;
    keep.extend(index::sample(&mut rng, neg.len(), need).into_iter().map(|k| neg[k]));
    keep.sort_unstable();
    Ok(keep)
}

/// Subsamples to at most `cap` rows, keeping class proportions (largest
/// remainder); sorted indices.
pub fn cap_indices(labels: &[i8], cap: usize, seed: u64) -> Vec<usize> {
    if labels.len() <= cap {
        return (0..labels.len()).collect();
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let exact = cap as f64 * pos.len() as f64 / labels.len() as f64;
    let mut n_pos = exact.floor() as usize;
    if exact - n_pos as f64 >= 0.5 {
        n_pos += 1;
    }
    if !pos.is_empty() && !neg.is_empty() {
        n_pos = n_pos.clamp(1, cap - 1);
    }
    let n_pos = n_pos.min(pos.len());
    let n_neg = (cap - n_pos).min(neg.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = index::sample(&mut rng, pos.len(), n_pos).into_iter().map(|k| pos[k]).collect();
    keep.extend(index::sample(&mut rng, neg.len(), n_neg).into_iter().map(|k| neg[k]));
    keep.sort_unstable();
    keep
}

/// Train/validation/test index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Train and validation together, sorted.
    pub fn fit_set(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.train.iter().chain(&self.val).copied().collect();
        v.sort_unstable();
        v
    }
}

/// Per-class shuffled split with `round(f·n_c)` train and validation members;
/// each part receives at least one sample of a class with ≥ 3 members.
pub fn stratified_split(labels: &[i8], fractions: [f64; 3], seed: u64) -> Result<Split> {
    let total: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f > 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(PipelineError::Config(format!("split fractions {fractions:?} must be positive and sum to 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in [1i8, -1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| (labels[i] == 1) == (class == 1)).collect();
        let n = members.len();
        if n < 3 {
            return Err(PipelineError::Data(format!(
                "class {class:+} has {n} samples; a three-way split needs at least 3"
            )));
        }
        members.shuffle(&mut rng);
        let n_train = ((fractions[0] * n as f64).round() as usize).clamp(1, n - 2);
        let n_val = ((fractions[1] * n as f64).round() as usize).clamp(1, n - n_train - 1);
        split.train.extend_from_slice(&members[..n_train]);
        split.val.extend_from_slice(&members[n_train..n_train + n_val]);
        split.test.extend_from_slice(&members[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
