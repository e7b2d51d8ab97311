use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use reify::output::{MANIFEST_FILE, RAW_FILE, SUMMARY_FILE};
use reify::{ExperimentId, ExperimentSpec, EXPERIMENTS, WORKERS_ENV};
use reify_core::tasks::{gen_majority, gen_parity, gen_reber, gen_symmetry, Dataset};

#[derive(Parser)]
#[command(name = "reify", version, about = "Run state-reification experiments", after_help = after_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn after_help() -> String {
    format!("Set {WORKERS_ENV}=N to fix the number of worker threads.")
}

#[derive(Subcommand)]
enum Command {
    /// List experiments with their parameters and defaults.
    List,
    /// Check a spec file and print the grid it expands to.
    Validate { spec: PathBuf },
    /// Run a spec file.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Write a generated dataset in the line-oriented text format.
    Dataset {
        /// parity | majority | reber | symmetry
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Task parameters: l (majority), n_train/n_test (reber, symmetry), s/f (symmetry).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Directory for one file per split.
        #[arg(long)]
        out: PathBuf,
    },
    Capacity(RunArgs),
    Parity(RunArgs),
    Majority(RunArgs),
    Reber(RunArgs),
    Symmetry(RunArgs),
    Adversarial(RunArgs),
    #[command(name = "score_check", alias = "score-check")]
    ScoreCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    replications: Option<usize>,
    /// Base seed; replication r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default results/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a parameter; a comma-separated list makes it a grid axis.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// No per-cell progress lines.
    #[arg(long, short)]
    quiet: bool,
}

fn list() {
    for def in EXPERIMENTS.iter() {
        println!("{}  ({} replications)", def.id, def.default_replications);
        println!("    {}", def.summary);
        for p in def.params {
            println!("    {:<16} {:<28} {}", p.key, p.default, p.help);
        }
        println!();
    }
}

fn validate(path: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = ExperimentSpec::from_toml(&text).with_context(|| path.display().to_string())?;
    let r = spec.resolve().with_context(|| path.display().to_string())?;
    let conditions = r.conditions();
    println!(
        "{}: {} conditions x {} replications = {} cells, seeds {}..={}",
        r.experiment,
        conditions.len(),
        r.replications,
        conditions.len() * r.replications,
        r.base_seed,
        r.base_seed + r.replications as u64 - 1
    );
    for c in &conditions {
        println!("  {}", c.label());
    }
    if !r.defaulted.is_empty() {
        println!("defaulted:");
        for (k, v) in &r.defaulted {
            println!("  {k} = {}", v.join(","));
        }
    }
    Ok(())
}

fn run(mut spec: ExperimentSpec, args: RunArgs) -> anyhow::Result<()> {
    if args.replications.is_some() {
        spec.replications = args.replications;
    }
    if args.seed.is_some() {
        spec.base_seed = args.seed;
    }
    for s in &args.set {
        spec.set(s)?;
    }
    let dir = args
        .out
        .or_else(|| spec.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("results").join(spec.experiment.name()));
    spec.out = Some(dir.display().to_string());
    let out = reify::run(&spec, Some(&dir), !args.quiet)?;
    for f in &out.manifest.failures {
        eprintln!("failed: {} rep {} (seed {}): {}", f.condition, f.replication, f.seed, f.error);
    }
    println!("{:<40} {:<24} {:>12} {:>12} {:>4}", "condition", "metric", "mean", "sem", "n");
    for s in &out.summary {
        println!("{:<40} {:<24} {:>12.6} {:>12.6} {:>4}", s.condition, s.metric, s.mean, s.sem, s.n);
    }
    println!(
        "wrote {}, {}, {} to {}",
        RAW_FILE,
        SUMMARY_FILE,
        MANIFEST_FILE,
        dir.display()
    );
    if !out.manifest.failures.is_empty() {
        bail!("{} cells failed", out.manifest.failures.len());
    }
    Ok(())
}

fn dataset(task: &str, seed: u64, set: &[String], out: &Path) -> anyhow::Result<()> {
    let mut params = std::collections::BTreeMap::new();
    for s in set {
        let (k, v) = s.split_once('=').with_context(|| format!("expected KEY=VALUE, got '{s}'"))?;
        params.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str, default: usize| -> anyhow::Result<usize> {
        params.get(k).map_or(Ok(default), |v| v.parse().with_context(|| format!("{k}={v}")))
    };
    let splits: Vec<(&str, Dataset)> = match task {
        "parity" => {
            let d = gen_parity(seed);
            vec![("train", d.train), ("novel", d.novel), ("noisy", d.noisy)]
        }
        "majority" => {
            let d = gen_majority(get("l", 11)?, seed)?;
            vec![("train", d.train), ("novel", d.novel), ("noisy", d.noisy)]
        }
        "reber" => {
            let d = gen_reber(get("n_train", 200)?, get("n_test", 2000)?, seed);
            vec![("train", d.train), ("test", d.test)]
        }
        "symmetry" => {
            let d = gen_symmetry(get("s", 5)?, get("f", 10)?, get("n_train", 5000)?, get("n_test", 2000)?, seed)?;
            vec![("train", d.train), ("test", d.test)]
        }
        other => bail!("no text export for '{other}' (parity, majority, reber, symmetry)"),
    };
    std::fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    for (name, d) in splits {
        let path = out.join(format!("{task}_{name}.txt"));
        let file = std::fs::File::create(&path).with_context(|| path.display().to_string())?;
        d.write_text(std::io::BufWriter::new(file)).with_context(|| path.display().to_string())?;
        println!("{} ({} sequences)", path.display(), d.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            list();
            Ok(())
        }
        Command::Validate { spec } => validate(&spec),
        Command::Run { spec, args } => std::fs::read_to_string(&spec)
            .with_context(|| format!("reading {}", spec.display()))
            .and_then(|t| ExperimentSpec::from_toml(&t).with_context(|| spec.display().to_string()))
            .and_then(|s| run(s, args)),
        Command::Dataset { task, seed, set, out } => dataset(&task, seed, &set, &out),
        Command::Capacity(a) => run(ExperimentSpec::new(ExperimentId::Capacity), a),
        Command::Parity(a) => run(ExperimentSpec::new(ExperimentId::Parity), a),
        Command::Majority(a) => run(ExperimentSpec::new(ExperimentId::Majority), a),
        Command::Reber(a) => run(ExperimentSpec::new(ExperimentId::Reber), a),
        Command::Symmetry(a) => run(ExperimentSpec::new(ExperimentId::Symmetry), a),
        Command::Adversarial(a) => run(ExperimentSpec::new(ExperimentId::Adversarial), a),
        Command::ScoreCheck(a) => run(ExperimentSpec::new(ExperimentId::ScoreCheck), a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
