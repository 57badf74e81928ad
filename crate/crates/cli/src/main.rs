//! `mbfd` — command-line front end for the MBFD pipeline: dataset ingestion,
//! feature extraction, training, evaluation, and result tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 missing data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbfd_core::dataio::adapters::load_recording;
use mbfd_core::dataio::canonical::write_canonical;
use mbfd_core::dataio::Dataset;
use mbfd_core::features::FEATURE_NAMES;
use mbfd_core::harness::{
    self, assemble_split, emit_table_csv, emit_table_markdown, ExperimentConfig, FeatureDomain,
    StoredRecord,
};
use mbfd_core::{protocols, MbfdError};

#[derive(Parser)]
#[command(name = "mbfd", about = "Motor bearing fault detection pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert MATLAB archives to canonical .f32 containers.
    Ingest {
        /// Source dataset: PU, CWRU, or MFPT.
        dataset: String,
        /// A .mat file or a directory of .mat files.
        src: PathBuf,
        /// Output directory for the .f32 containers.
        dst: PathBuf,
    },
    /// Write the hand-crafted feature matrix of a split as CSV.
    Extract {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path; defaults to features_<digest>.csv in the
        /// config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the configured pipeline, writing the checkpoint and loss log.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured experiment (cached by config digest) and report
    /// its accuracy.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render the accuracy table over all records in a directory.
    Table {
        /// Directory holding record_<digest>.json files.
        records: PathBuf,
        /// Also write <prefix>.csv and <prefix>.md.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3 for absent data, 2 for everything the user can fix in the config.
fn exit_code(e: &MbfdError) -> u8 {
    match e {
        MbfdError::MissingFile(_) | MbfdError::MissingData(_) | MbfdError::ChannelAbsent { .. } => 3,
        MbfdError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
        _ => 2,
    }
}

fn run(cmd: Command) -> Result<(), MbfdError> {
    match cmd {
        Command::Ingest { dataset, src, dst } => ingest(&dataset, &src, &dst),
        Command::Extract { config, out } => extract(&config, out.as_deref()),
        Command::Train { config } => train(&config),
        Command::Eval { config } => eval(&config),
        Command::Table { records, out } => table(&records, out.as_deref()),
    }
}

fn ingest(dataset: &str, src: &Path, dst: &Path) -> Result<(), MbfdError> {
    let dataset: Dataset = dataset.parse()?;
    let files: Vec<PathBuf> = if src.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(src)
            .map_err(|e| MbfdError::Io { path: src.to_path_buf(), source: e })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("mat"))
            .collect();
        v.sort();
        v
    } else if src.is_file() {
        vec![src.to_path_buf()]
    } else {
        return Err(MbfdError::MissingFile(src.to_path_buf()));
    };
    if files.is_empty() {
        return Err(MbfdError::MissingData(format!("no .mat files under {}", src.display())));
    }
    std::fs::create_dir_all(dst).map_err(|e| MbfdError::Io { path: dst.to_path_buf(), source: e })?;
    for path in files {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| MbfdError::MissingFile(path.clone()))?
            .to_string();
        let rec = load_recording(&path, dataset, &id)?;
        let out = dst.join(format!("{id}.f32"));
        write_canonical(&rec, &out)?;
        println!("{} -> {} ({} samples @ {} Hz)", path.display(), out.display(), rec.len(), rec.sample_rate);
    }
    Ok(())
}

fn load_samples(
    cfg: &ExperimentConfig,
) -> Result<
    (Vec<mbfd_core::dataio::VibrationSample>, Vec<mbfd_core::dataio::VibrationSample>),
    MbfdError,
> {
    if cfg.split.eq_ignore_ascii_case("SYNTHETIC") {
        return Ok(harness::synthetic_dataset(cfg.train.seed));
    }
    let dir = cfg
        .data_dir
        .clone()
        .or_else(|| std::env::var_os("MBFD_DATA_DIR").map(PathBuf::from))
        .ok_or_else(|| {
            MbfdError::MissingData(
                "no data directory: set data_dir in the config or MBFD_DATA_DIR".into(),
            )
        })?;
    let spec = protocols::by_name(&cfg.split, cfg.strict_disjoint)?;
    spec.validate()?;
    assemble_split(&spec, &dir)
}

fn extract(config: &Path, out: Option<&Path>) -> Result<(), MbfdError> {
    let cfg = ExperimentConfig::from_toml_path(config)?;
    let (train_s, test_s) = load_samples(&cfg)?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(format!("features_{}.csv", cfg.digest())));
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| MbfdError::Io { path: parent.to_path_buf(), source: e })?;
    }
    let mut w = csv::Writer::from_path(&out).map_err(|e| MbfdError::Serde(e.to_string()))?;
    let mut header = vec!["side", "source", "start", "label"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header).map_err(|e| MbfdError::Serde(e.to_string()))?;
    for (side, samples) in [("train", &train_s), ("test", &test_s)] {
        let matrix = harness::feature_matrix(samples, FeatureDomain::Both)?;
        for (s, row) in samples.iter().zip(matrix.rows()) {
            let mut record = vec![
                side.to_string(),
                s.origin.0.clone(),
                s.origin.1.to_string(),
                s.label.index.to_string(),
            ];
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record).map_err(|e| MbfdError::Serde(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| MbfdError::Io { path: out.clone(), source: e })?;
    println!("wrote {} ({} train + {} test rows)", out.display(), train_s.len(), test_s.len());
    Ok(())
}

fn train(config: &Path) -> Result<(), MbfdError> {
    let cfg = ExperimentConfig::from_toml_path(config)?;
    // always retrain: drop any cached record for this digest first
    let record_path = cfg.output_dir.join(format!("record_{}.json", cfg.digest()));
    if record_path.is_file() {
        std::fs::remove_file(&record_path)
            .map_err(|e| MbfdError::Io { path: record_path.clone(), source: e })?;
    }
    let record = harness::run_experiment(&cfg)?;
    println!(
        "trained {} on {}: accuracy {:.2}% in {:.1}s (record {})",
        cfg.pipeline, cfg.split, record.accuracy, record.wall_time_s, record.digest
    );
    Ok(())
}

fn eval(config: &Path) -> Result<(), MbfdError> {
    let cfg = ExperimentConfig::from_toml_path(config)?;
    let record = harness::run_experiment(&cfg)?;
    println!("split:      {}", cfg.split);
    println!("pipeline:   {} + {} ({})", cfg.pipeline, cfg.backend, cfg.normalization);
    println!("accuracy:   {:.2}%", record.accuracy);
    if !record.sub_accuracies.is_empty() {
        let subs: Vec<String> =
            record.sub_accuracies.iter().map(|a| format!("{a:.2}")).collect();
        println!("combos:     {}", subs.join(" "));
    }
    println!("confusion (rows = truth):");
    for row in &record.confusion {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
        println!("  {}", cells.join(" "));
    }
    Ok(())
}

fn table(records_dir: &Path, out: Option<&Path>) -> Result<(), MbfdError> {
    let entries = std::fs::read_dir(records_dir)
        .map_err(|e| MbfdError::Io { path: records_dir.to_path_buf(), source: e })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("record_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let records: Vec<StoredRecord> =
        paths.iter().map(|p| StoredRecord::load(p)).collect::<Result<_, _>>()?;
    let csv = emit_table_csv(&records);
    print!("{csv}");
    if let Some(prefix) = out {
        let write = |ext: &str, text: &str| {
            let path = prefix.with_extension(ext);
            std::fs::write(&path, text)
                .map_err(|e| MbfdError::Io { path: path.clone(), source: e })
        };
        write("csv", &csv)?;
        write("md", &emit_table_markdown(&records))?;
    }
    Ok(())
}
