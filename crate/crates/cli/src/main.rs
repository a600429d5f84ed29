use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use disorder_lab::experiment::{run_experiment, Check, ExperimentConfig, Format, ResultTable, RunOutput};
use disorder_lab::Error;

#[derive(Parser)]
#[command(name = "disorder-lab", version, about = "Run disordered-system experiments from a config file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its tables and manifest.
    Run(RunArgs),
    /// Run an experiment and fail (exit 4) if any built-in check fails.
    Check(RunArgs),
    /// Validate a config without running it.
    Validate(RunArgs),
    /// Re-run the config recorded in a manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    /// Override a config entry, e.g. `--set experiment.samples=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; defaults to `replay/` next to the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(format!("unknown format `{other}` (expected csv or json)")),
    }
}

enum Failure {
    /// Malformed or invalid configuration.
    Config(String),
    Core(Error),
    Io(String),
    /// A built-in check or replay comparison failed.
    Check(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Core(Error::Validation { .. } | Error::Domain(_) | Error::Input(_)) => 2,
            Failure::Core(Error::Resource(_)) => 3,
            Failure::Core(_) | Failure::Io(_) => 1,
            Failure::Check(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn io<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", context.display()))
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: ExperimentConfig,
    config_hash: String,
    seed: u64,
    version: String,
    started: String,
    elapsed: f64,
    threads: usize,
    outputs: Vec<String>,
    checks: Vec<CheckRecord>,
}

#[derive(Serialize, Deserialize)]
struct CheckRecord {
    name: String,
    value: f64,
    threshold: f64,
    passed: bool,
}

impl From<&Check> for CheckRecord {
    fn from(c: &Check) -> Self {
        CheckRecord {
            name: c.name.clone(),
            value: c.value,
            threshold: c.threshold,
            passed: c.passed,
        }
    }
}

/// Sets `path` (dot separated) in a TOML table, parsing `raw` as a TOML value
/// and falling back to a string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Failure::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&args.config).map_err(io(&args.config))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
    for assignment in &args.overrides {
        apply_override(&mut table, assignment)?;
    }
    let mut config: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| Failure::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(t) = args.threads {
        config.threads = Some(t);
    }
    if let Some(out) = &args.out {
        config.output.path = Some(out.display().to_string());
    }
    if let Some(f) = args.format {
        config.output.format = f;
    }
    Ok(config)
}

fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("configs serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn execute(config: &ExperimentConfig) -> Result<(RunOutput, usize, f64, String), Failure> {
    config.validate()?;
    let threads = config.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    let started = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let output = pool.install(|| run_experiment(config))?;
    Ok((output, threads, clock.elapsed().as_secs_f64(), started))
}

fn write_table(dir: &Path, table: &ResultTable, format: Format) -> Result<String, Failure> {
    match format {
        Format::Csv => {
            let name = format!("{}.csv", table.name);
            let path = dir.join(&name);
            let mut w = csv::Writer::from_path(&path).map_err(io(&path))?;
            w.write_record(&table.columns).map_err(io(&path))?;
            for row in &table.rows {
                w.write_record(row.iter().map(|c| c.to_string())).map_err(io(&path))?;
            }
            w.flush().map_err(io(&path))?;
            Ok(name)
        }
        Format::Json => {
            let name = format!("{}.json", table.name);
            let path = dir.join(&name);
            let records: Vec<serde_json::Map<String, serde_json::Value>> = table
                .rows
                .iter()
                .map(|row| {
                    table
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null)))
                        .collect()
                })
                .collect();
            let text = serde_json::to_string_pretty(&records).expect("records serialize");
            fs::write(&path, text + "\n").map_err(io(&path))?;
            Ok(name)
        }
    }
}

fn output_dir(config: &ExperimentConfig) -> PathBuf {
    PathBuf::from(config.output.path.clone().unwrap_or_else(|| "results".into()))
}

/// Runs a config, writes tables and `manifest.json` into `dir`.
fn run_and_write(config: &ExperimentConfig, dir: &Path) -> Result<Manifest, Failure> {
    let (output, threads, elapsed, started) = execute(config)?;
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut outputs = Vec::new();
    for table in &output.tables {
        outputs.push(write_table(dir, table, config.output.format)?);
    }
    let manifest = Manifest {
        config: config.clone(),
        config_hash: config_hash(config),
        seed: config.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        elapsed,
        threads,
        outputs,
        checks: output.checks.iter().map(CheckRecord::from).collect(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    for c in &output.checks {
        println!(
            "{}: {} {:e} ≤ {:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    println!("{} → {} ({:.2}s, {} threads)", config.experiment.name(), dir.display(), elapsed, threads);
    Ok(manifest)
}

/// File content in a row-order independent form.
fn canonical_rows(path: &Path) -> Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(io(path))?;
        let mut rows: Vec<String> = value
            .as_array()
            .map(|a| a.iter().map(|v| v.to_string()).collect())
            .unwrap_or_default();
        rows.sort();
        Ok(rows)
    } else {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().to_string();
        let mut rows: Vec<String> = lines.map(str::to_string).collect();
        rows.sort();
        rows.insert(0, header);
        Ok(rows)
    }
}

fn replay(args: &ReplayArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.manifest).map_err(io(&args.manifest))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("manifest: {e}")))?;
    let original = args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut config = manifest.config.clone();
    if let Some(t) = args.threads {
        config.threads = Some(t);
    }
    if config_hash(&manifest.config) != manifest.config_hash {
        return Err(Failure::Config("manifest config does not match its recorded hash".into()));
    }
    let dir = args.out.clone().unwrap_or_else(|| original.join("replay"));
    let rerun = run_and_write(&config, &dir)?;
    let mut differing = Vec::new();
    for name in &manifest.outputs {
        if !rerun.outputs.contains(name) || canonical_rows(&original.join(name))? != canonical_rows(&dir.join(name))? {
            differing.push(name.clone());
        }
    }
    if differing.is_empty() {
        println!("replay identical: {} files", manifest.outputs.len());
        Ok(())
    } else {
        Err(Failure::Check(format!("replayed outputs differ: {}", differing.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => load_config(args).and_then(|c| run_and_write(&c, &output_dir(&c)).map(|_| ())),
        Command::Check(args) => load_config(args).and_then(|c| {
            let manifest = run_and_write(&c, &output_dir(&c))?;
            let failed: Vec<&str> = manifest.checks.iter().filter(|k| !k.passed).map(|k| k.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Check(failed.join(", ")))
            }
        }),
        Command::Validate(args) => load_config(args).and_then(|c| {
            c.validate()?;
            println!("{}: valid", c.experiment.name());
            Ok(())
        }),
        Command::Replay(args) => replay(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
