//! Run reports: per-seed metrics, aggregation and emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Balanced accuracies within this distance of 0.5 are flagged.
pub const NEAR_CHANCE_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceDistances {
    pub train_before: f64,
    pub train_after: f64,
    pub test_before: f64,
    pub test_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    #[serde(default)]
    pub trace_distance: Option<TraceDistances>,
    #[serde(default)]
    pub gram_min_eigenvalue: Option<f64>,
    #[serde(default)]
    pub kernel_gamma: Option<f64>,
    /// File names, relative to the output directory.
    #[serde(default)]
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub cause: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: MeanStd,
    pub balanced_accuracy: MeanStd,
}

/// Evaluation protocol choices, repeated in every report header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub dataset: String,
    pub target: String,
    pub class_ratio: String,
    pub ratio_before_split: bool,
    pub sample_cap: usize,
    pub split: [f64; 3],
    pub split_seed: u64,
    pub stratified: bool,
    pub n_samples: usize,
    pub n_activators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub condition: String,
    #[serde(default)]
    pub n_qubits: Option<usize>,
    #[serde(default)]
    pub pca_dims: Option<usize>,
    pub protocol: Protocol,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub failures: Vec<SeedFailure>,
    pub summary: Option<Summary>,
    pub partial: bool,
    pub near_chance: bool,
    pub fingerprint: String,
    pub version: String,
}

/// Identifies a report row before any seed has run.
#[derive(Debug, Clone)]
pub struct ReportHeader {
    pub label: String,
    pub condition: String,
    pub n_qubits: Option<usize>,
    pub pca_dims: Option<usize>,
    pub protocol: Protocol,
    pub fingerprint: String,
}

impl RunReport {
    /// Collects per-seed outcomes in seed order and aggregates the successes.
    pub fn assemble(
        header: ReportHeader,
        seeds: &[u64],
        outcomes: Vec<(u64, std::result::Result<SeedResult, String>)>,
    ) -> Result<Self> {
        if seeds.is_empty() {
            return Err(PipelineError::Config("a report needs at least one seed".into()));
        }
        let mut per_seed = Vec::new();
        let mut failures = Vec::new();
        for (seed, outcome) in outcomes {
            match outcome {
                Ok(r) => per_seed.push(r),
                Err(cause) => failures.push(SeedFailure { seed, cause }),
            }
        }
        let summary = summarize(&per_seed);
        let partial = per_seed.len() < seeds.len();
        let near_chance = summary.is_some_and(|s| (s.balanced_accuracy.mean - 0.5).abs() <= NEAR_CHANCE_BAND);
        Ok(Self {
            label: header.label,
            condition: header.condition,
            n_qubits: header.n_qubits,
            pca_dims: header.pca_dims,
            protocol: header.protocol,
            seeds: seeds.to_vec(),
            per_seed,
            failures,
            summary,
            partial,
            near_chance,
            fingerprint: header.fingerprint,
            version: env!("CARGO_PKG_VERSION").to_owned(),
        })
    }

    /// Recomputes the summary from `per_seed` and compares exactly.
    pub fn summary_is_consistent(&self) -> bool {
        summarize(&self.per_seed) == self.summary
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PipelineError::Data(format!("malformed report: {e}")))
    }
}

pub fn summarize(per_seed: &[SeedResult]) -> Option<Summary> {
    let acc: Vec<f64> = per_seed.iter().map(|r| r.accuracy).collect();
    let bal: Vec<f64> = per_seed.iter().map(|r| r.balanced_accuracy).collect();
    Some(Summary {
        accuracy: MeanStd::of(&acc)?,
        balanced_accuracy: MeanStd::of(&bal)?,
    })
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Data(format!("cannot encode report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Parses either one report or a list of them.
pub fn parse_reports(text: &str) -> Result<Vec<RunReport>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| PipelineError::Data(format!("malformed report: {e}")))?;
    let parsed = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    };
    parsed.map_err(|e| PipelineError::Data(format!("malformed report: {e}")))
}

fn pm(m: &MeanStd) -> String {
    format!("{:.2} ± {:.2}", m.mean, m.std)
}

/// Plain-text table in the layout of the published result tables, followed
/// by per-seed detail.
pub fn render_table(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    let p = &first.protocol;
    let w = |out: &mut String, line: String| writeln!(out, "{line}").expect("write to string");
    w(&mut out, format!("# qembed {} | config {}", first.version, &first.fingerprint));
    w(
        &mut out,
        format!(
            "# data: {} (target {}), {} samples, {} activators",
            p.dataset, p.target, p.n_samples, p.n_activators
        ),
    );
    w(
        &mut out,
        format!(
            "# protocol: class ratio {} sampled {} split; cap {}; {}split {:.2}/{:.2}/{:.2} (train/val/test), split seed {}",
            p.class_ratio,
            if p.ratio_before_split { "before" } else { "after" },
            p.sample_cap,
            if p.stratified { "stratified " } else { "" },
            p.split[0],
            p.split[1],
            p.split[2],
            p.split_seed
        ),
    );
    w(&mut out, "# metrics: test split, mean ± population std over seeds".into());
    out.push('\n');

    let width = reports.iter().map(|r| r.label.chars().count()).max().unwrap_or(9).max(9);
    w(&mut out, format!("{:<width$}  {:<13}  {:<17}  {}", "Condition", "Accuracy", "Balanced accuracy", "Notes"));
    w(&mut out, "-".repeat(width + 2 + 13 + 2 + 17 + 2 + 5));
    for r in reports {
        let (acc, bal) = match &r.summary {
            Some(s) => (pm(&s.accuracy), pm(&s.balanced_accuracy)),
            None => ("n/a".into(), "n/a".into()),
        };
        let mut notes = Vec::new();
        if r.partial {
            notes.push(format!("partial ({}/{} seeds)", r.per_seed.len(), r.seeds.len()));
        }
        if r.near_chance {
            notes.push("near chance".to_owned());
        }
        if r.fingerprint != first.fingerprint && reports.len() > 1 {
            notes.push(format!("config {}", &r.fingerprint[..12.min(r.fingerprint.len())]));
        }
        w(&mut out, format!("{:<width$}  {acc:<13}  {bal:<17}  {}", r.label, notes.join("; ")));
    }

    let traced: Vec<&RunReport> = reports.iter().filter(|r| r.per_seed.iter().any(|s| s.trace_distance.is_some())).collect();
    if !traced.is_empty() {
        out.push('\n');
        w(&mut out, "Trace distance between class ensembles (train / test), before → after embedding training".into());
        for r in traced {
            for s in &r.per_seed {
                if let Some(t) = &s.trace_distance {
                    w(
                        &mut out,
                        format!(
                            "  {} seed {}: {:.4} / {:.4} → {:.4} / {:.4}",
                            r.label, s.seed, t.train_before, t.test_before, t.train_after, t.test_after
                        ),
                    );
                }
            }
        }
    }

    out.push('\n');
    w(&mut out, "Per-seed results".into());
    for r in reports {
        w(&mut out, format!("  {}", r.label));
        for s in &r.per_seed {
            let mut extra = String::new();
            if let Some(g) = s.kernel_gamma {
                write!(extra, "  gamma {g:.6}").expect("write to string");
            }
            if let Some(e) = s.gram_min_eigenvalue {
                write!(extra, "  min eig {e:.3e}").expect("write to string");
            }
            w(
                &mut out,
                format!(
                    "    seed {:>4}  acc {:.4}  bal {:.4}  n {}/{}/{}{extra}",
                    s.seed, s.accuracy, s.balanced_accuracy, s.n_train, s.n_val, s.n_test
                ),
            );
        }
        for f in &r.failures {
            w(&mut out, format!("    seed {:>4}  FAILED: {}", f.seed, f.cause));
        }
    }
    out
}

/// Output file paths for a report stem.
pub fn report_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.json")), dir.join(format!("{stem}.txt")))
}

/// Writes `<stem>.json` and `<stem>.txt` atomically; returns their paths.
pub fn emit_report(report: &RunReport, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    write_pair(dir, stem, &report.to_json()?, &render_table(std::slice::from_ref(report)))
}

/// Battery form: a JSON list and one combined table.
pub fn emit_battery(reports: &[RunReport], dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    if reports.is_empty() {
        return Err(PipelineError::Config("battery produced no reports".into()));
    }
    write_pair(dir, stem, &to_json(reports)?, &render_table(reports))
}

fn write_pair(dir: &Path, stem: &str, json: &str, text: &str) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let (jp, tp) = report_paths(dir, stem);
    qembed_core::write_atomic(&jp, json.as_bytes())?;
    qembed_core::write_atomic(&tp, text.as_bytes())?;
    Ok((jp, tp))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn header() -> ReportHeader {
        ReportHeader {
            label: "SVM (RBF kernel)".into(),
            condition: "SVM_RBF".into(),
            n_qubits: None,
            pca_dims: None,
            protocol: Protocol {
                dataset: "covid.csv".into(),
                target: "covid".into(),
                class_ratio: "as_is".into(),
                ratio_before_split: true,
                sample_cap: 1400,
                split: [0.7, 0.15, 0.15],
                split_seed: 2024,
                stratified: true,
                n_samples: 123,
                n_activators: 34,
            },
            fingerprint: "ab".repeat(32),
        }
    }

    fn result(seed: u64, acc: f64, bal: f64) -> SeedResult {
        SeedResult {
            seed,
            accuracy: acc,
            balanced_accuracy: bal,
            n_train: 86,
            n_val: 18,
            n_test: 19,
            trace_distance: None,
            gram_min_eigenvalue: Some(-1e-15),
            kernel_gamma: Some(0.1 + 0.2),
            artifacts: vec![],
        }
    }

    #[test]
    fn mean_and_population_std() {
        let m = MeanStd::of(&[0.75, 0.75, 0.75]).unwrap();
        assert_eq!((m.mean, m.std), (0.75, 0.0));
        let m = MeanStd::of(&[1.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert!(MeanStd::of(&[]).is_none());
    }

    #[test]
    fn empty_seed_list_is_refused() {
        assert!(matches!(RunReport::assemble(header(), &[], vec![]), Err(PipelineError::Config(_))));
    }

    #[test]
    fn partial_reports_are_marked_everywhere() {
        let r = RunReport::assemble(
            header(),
            &[0, 1],
            vec![(0, Ok(result(0, 0.7, 0.6))), (1, Err("diverged at epoch 3".into()))],
        )
        .unwrap();
        assert!(r.partial);
        assert!(r.to_json().unwrap().contains("\"partial\": true"));
        let text = render_table(std::slice::from_ref(&r));
        assert!(text.contains("partial (1/2 seeds)"), "{text}");
        assert!(text.contains("FAILED: diverged at epoch 3"));
    }

    #[test]
    fn near_chance_is_flagged() {
        let r = RunReport::assemble(header(), &[0], vec![(0, Ok(result(0, 0.72, 0.5)))]).unwrap();
        assert!(r.near_chance);
        assert!(render_table(&[r]).contains("near chance"));
    }

    #[test]
    fn emit_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = RunReport::assemble(header(), &[0], vec![(0, Ok(result(0, 0.7, 0.65)))]).unwrap();
        let (jp, tp) = emit_report(&r, dir.path(), "row").unwrap();
        assert_eq!(RunReport::from_json(&std::fs::read_to_string(jp).unwrap()).unwrap(), r);
        let text = std::fs::read_to_string(tp).unwrap();
        assert!(text.contains("0.70 ± 0.00") && text.contains(&"ab".repeat(32)));
        let (jp, _) = emit_battery(&[r.clone(), r.clone()], dir.path(), "battery").unwrap();
        assert_eq!(parse_reports(&std::fs::read_to_string(jp).unwrap()).unwrap().len(), 2);
    }

    proptest! {
        #[test]
        fn json_round_trip_and_summary_recompute(
            metrics in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8)
        ) {
            let seeds: Vec<u64> = (0..metrics.len() as u64).collect();
            let outcomes = metrics.iter().enumerate().map(|(i, &(a, b))| (i as u64, Ok(result(i as u64, a, b)))).collect();
            let r = RunReport::assemble(header(), &seeds, outcomes).unwrap();
            prop_assert!(r.summary_is_consistent());
            let back = RunReport::from_json(&r.to_json().unwrap()).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(back.to_json().unwrap(), r.to_json().unwrap());
        }
    }
}
