use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use opebench_core::harness::report::write_summary;
use opebench_core::harness::{
    read_records, render_markdown, run_experiment, summarize, true_value, write_outputs, EstimatorId,
    ExperimentConfig, RunOptions,
};
use opebench_core::{generate_dataset, DatasetMetadata};

#[derive(Parser)]
#[command(name = "opebench", version, about = "Tabular off-policy evaluation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write report.csv, summary.csv and report.md.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Also write fitted Q/omega tables and MAGIC diagnostics to q_dump.jsonl.
        #[arg(long)]
        dump_q: bool,
    },
    /// Re-aggregate an existing report.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
    /// Print the true value of the evaluation policy.
    Truth {
        #[arg(long)]
        config: PathBuf,
    },
    /// List every estimator name with its class.
    ListEstimators,
    /// Write one behavior dataset as JSON lines plus a metadata sidecar.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).with_context(|| format!("loading config {}", path.display()))
}

fn run(config: &Path, out: &Path, threads: Option<usize>, dump_q: bool) -> Result<()> {
    if let Some(k) = threads {
        if k == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    let cfg = load(config)?;
    let report = run_experiment(&cfg, RunOptions { dump_q })?;
    write_outputs(out, &report.records, &report.summary)?;
    if dump_q {
        let mut w = BufWriter::new(File::create(out.join("q_dump.jsonl"))?);
        for d in &report.dumps {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let failed = report.records.iter().filter(|r| !r.status.has_estimate()).count();
    println!(
        "{}: T={} gamma={} true value {:.6} mismatch {:.3e}; {} cells, {} failed; wrote {}",
        report.env,
        report.horizon,
        report.gamma,
        report.true_value,
        report.policy_mismatch,
        report.records.len(),
        failed,
        out.display()
    );
    Ok(())
}

fn report(input: &Path, format: Format) -> Result<()> {
    let path = if input.is_dir() { input.join("report.csv") } else { input.to_path_buf() };
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let summary = summarize(&read_records(file)?);
    let stdout = std::io::stdout();
    match format {
        Format::Csv => write_summary(&summary, stdout.lock())?,
        Format::Md => write!(stdout.lock(), "{}", render_markdown(&summary))?,
    }
    Ok(())
}

fn generate(config: &Path, n: usize, seed: u64, out: &Path) -> Result<()> {
    let cfg = load(config)?;
    cfg.validate()?;
    let env = cfg.build_env()?;
    let raw = generate_dataset(&env.mdp, &env.lift(&env.pi_b)?, n, seed)?;
    let ds = match &env.observation {
        Some(obs) => raw.observe(&obs.map, obs.absorbing_observation, env.pi_b.clone())?,
        None => raw,
    };
    ds.write_jsonl(BufWriter::new(File::create(out)?))?;
    let meta = DatasetMetadata::describe(&ds, &cfg.label(), cfg.gamma, &cfg.behavior.describe());
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".meta.json");
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, threads, dump_q } => run(&config, &out, threads, dump_q),
        Command::Report { input, format } => report(&input, format),
        Command::Truth { config } => {
            let cfg = load(&config)?;
            cfg.validate()?;
            println!("{:.12}", true_value(&cfg, &cfg.build_env()?)?);
            Ok(())
        }
        Command::ListEstimators => {
            for id in EstimatorId::all() {
                println!("{id}\t{}", id.class());
            }
            Ok(())
        }
        Command::Generate { config, n, seed, out } => generate(&config, n, seed, &out),
    }
}
