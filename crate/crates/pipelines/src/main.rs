use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use qembed_pipelines::config::ExperimentConfig;
use qembed_pipelines::data::{class_counts, load_features, N_FEATURES};
use qembed_pipelines::error::{exit, PipelineError, Result};
use qembed_pipelines::report::{emit_battery, emit_report, parse_reports, render_table};
use qembed_pipelines::run::{
    load_dataset, output_dir, prepare, report_stem, run_condition, run_covid_battery, run_screening_battery,
    svm_inputs, train_embedding_stage,
};

#[derive(Parser)]
#[command(name = "qembed", version, about = "Trainable quantum embeddings for ligand-based virtual screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a feature CSV and print its class counts.
    ExtractCheck { csv: PathBuf },
    /// Train the embedding encoder of a condition for one seed.
    TrainEmbed {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Repetition seed (defaults to the first configured seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Encoder weight file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build, validate and cache the training Gram matrix of an SVM condition.
    EvalKernel {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Gram cache file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one condition over all seeds and write its report.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Sweep the embedding conditions or the kernel-SVM rows.
    Battery {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        table: Table,
    },
    /// Render a machine-readable report as a text table.
    Report {
        json: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    /// NQE, RBF and quantum-pretrained conditions.
    #[value(name = "screening", alias = "3")]
    Screening,
    /// Quantum and classical kernel SVMs.
    #[value(name = "kernels", alias = "4")]
    Kernels,
}

#[derive(Args)]
struct ConfigArgs {
    /// Key-value config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    condition: Option<String>,
    /// `1:k` or `as_is`.
    #[arg(long)]
    class_ratio: Option<String>,
    #[arg(long)]
    n_qubits: Option<usize>,
    #[arg(long)]
    pca_dims: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Output directory for reports and artifacts.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Any config key, e.g. `--set embed.max_epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_owned(), v));
            }
        };
        push("dataset", self.dataset.clone());
        push("target", self.target.clone());
        push("condition", self.condition.clone());
        push("class_ratio", self.class_ratio.clone());
        push("n_qubits", self.n_qubits.map(|v| v.to_string()));
        push("pca_dims", self.pca_dims.map(|v| v.to_string()));
        push("seeds", self.seeds.clone());
        push("split_seed", self.split_seed.map(|v| v.to_string()));
        push("output_dir", self.output_dir.as_ref().map(|p| p.display().to_string()));
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
            pairs.push((k.trim().to_owned(), v.trim().to_owned()));
        }

        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let find = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.clone());
                let dataset = find("dataset").ok_or_else(|| PipelineError::Config("no --config and no --dataset".into()))?;
                let condition = find("condition")
                    .ok_or_else(|| PipelineError::Config("no --config and no --condition".into()))?
                    .parse()
                    .map_err(PipelineError::Config)?;
                ExperimentConfig::new(dataset, condition)
            }
        };
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn extract_check(csv: &PathBuf) -> Result<i32> {
    let samples = load_features(csv)?;
    let (pos, neg) = class_counts(&samples);
    println!(
        "{}: {} rows, {pos} activators, {neg} inactivators, {N_FEATURES} descriptors",
        csv.display(),
        samples.len()
    );
    Ok(exit::SUCCESS)
}

fn train_embed(args: &ConfigArgs, seed: Option<u64>, out: Option<PathBuf>) -> Result<i32> {
    let cfg = args.resolve()?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let prep = prepare(&cfg, &load_dataset(&cfg)?)?;
    let outcome = train_embedding_stage(&cfg, &prep, seed)?;
    let path = out.unwrap_or_else(|| output_dir(&cfg).join(format!("{}_seed{seed}_encoder.qenc", report_stem(&cfg))));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    outcome.encoder.save(&path)?;
    if let Some(h) = &outcome.history {
        h.save_csv(&path.with_extension("loss.csv"))?;
    }
    println!("encoder: {} ({:?})", path.display(), outcome.encoder.dims());
    if let Some(t) = outcome.trace {
        println!(
            "trace distance train {:.4} → {:.4}, test {:.4} → {:.4}",
            t.train_before, t.train_after, t.test_before, t.test_after
        );
    }
    Ok(exit::SUCCESS)
}

fn eval_kernel(args: &ConfigArgs, out: Option<PathBuf>) -> Result<i32> {
    let cfg = args.resolve()?;
    let prep = prepare(&cfg, &load_dataset(&cfg)?)?;
    let inputs = svm_inputs(&cfg, &prep)?;
    let path = out.unwrap_or_else(|| output_dir(&cfg).join(format!("{}_gram.qgrm", report_stem(&cfg))));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    inputs.gram.save(&path)?;
    println!(
        "{}: {}×{} {:?} Gram, min eigenvalue {:.3e}{}",
        path.display(),
        inputs.gram.size(),
        inputs.gram.size(),
        inputs.gram.kind(),
        inputs.gram.min_eigenvalue(),
        inputs.gamma.map(|g| format!(", gamma {g:.6}")).unwrap_or_default()
    );
    Ok(exit::SUCCESS)
}

fn run(args: &ConfigArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let report = run_condition(&cfg)?;
    let (json, text) = emit_report(&report, &output_dir(&cfg), &report_stem(&cfg))?;
    print!("{}", render_table(std::slice::from_ref(&report)));
    info!("wrote {} and {}", json.display(), text.display());
    Ok(if report.partial { exit::PARTIAL } else { exit::SUCCESS })
}

fn battery(args: &ConfigArgs, table: Table) -> Result<i32> {
    let cfg = args.resolve()?;
    let (reports, stem) = match table {
        Table::Screening => (run_screening_battery(&cfg)?, "screening_battery"),
        Table::Kernels => (run_covid_battery(&cfg)?, "kernel_battery"),
    };
    let (json, text) = emit_battery(&reports, &output_dir(&cfg), stem)?;
    print!("{}", render_table(&reports));
    info!("wrote {} and {}", json.display(), text.display());
    Ok(if reports.iter().any(|r| r.partial) { exit::PARTIAL } else { exit::SUCCESS })
}

fn report(json: &PathBuf, out: Option<PathBuf>) -> Result<i32> {
    let text = std::fs::read_to_string(json).map_err(|e| PipelineError::Data(format!("{}: {e}", json.display())))?;
    let reports = parse_reports(&text)?;
    let table = render_table(&reports);
    match out {
        Some(path) => qembed_core::write_atomic(&path, table.as_bytes())?,
        None => print!("{table}"),
    }
    Ok(if reports.iter().any(|r| r.partial) { exit::PARTIAL } else { exit::SUCCESS })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::ExtractCheck { csv } => extract_check(csv),
        Command::TrainEmbed { cfg, seed, out } => train_embed(cfg, *seed, out.clone()),
        Command::EvalKernel { cfg, out } => eval_kernel(cfg, out.clone()),
        Command::Run { cfg } => run(cfg),
        Command::Battery { cfg, table } => battery(cfg, *table),
        Command::Report { json, out } => report(json, out.clone()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
