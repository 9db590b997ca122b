use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use applegrasp_core::bench::{
    build_estimator, parse_structured, render_structured, render_text, report_render, run_suite, timing_probe,
    Config,
};
use applegrasp_core::estimators::{train_regressor, Method};
use applegrasp_core::synthgen::{
    generate_dataset, generate_split, read_dataset, write_dataset, Condition, DEFAULT_SPLIT,
};
use applegrasp_core::tinynn::Checkpoint;
use applegrasp_core::Point3;

const SPLIT_FILES: [&str; 3] = ["train.jsonl", "validation.jsonl", "test.jsonl"];

#[derive(Parser)]
#[command(name = "applegrasp", version, about = "Grasp-pose estimation for spherical fruit")]
struct Cli {
    /// TOML config; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labelled synthetic clouds.
    Gen {
        /// Write a single file with this many samples.
        #[arg(long, conflicts_with = "split")]
        count: Option<usize>,
        /// Train, validation and test sizes, written as three files into
        /// the `--out` directory.
        #[arg(long, value_delimiter = ',')]
        split: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the learned estimator.
    Train {
        /// A split directory, or a single file used entirely for training.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint_out: PathBuf,
        /// Also write the per-epoch loss history as JSON.
        #[arg(long)]
        history_out: Option<PathBuf>,
    },
    /// Fit every cloud of a dataset file or one `x y z` point file.
    Fit {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the method × condition benchmark.
    Bench {
        /// A split directory (its test file is used) or a dataset file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "normal,noise,outlier,dense_clutter,combined")]
        conditions: Vec<Condition>,
        #[arg(long, value_delimiter = ',', default_value = "pointnet,ransac,hough")]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Structured report destination; the text tables go to stdout.
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Render a structured report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Per-cloud latency of one method.
    Timing {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
    },
}

fn load_checkpoint(path: Option<&Path>) -> Result<Option<Checkpoint>> {
    path.map(|p| Checkpoint::load(p).with_context(|| format!("loading checkpoint {}", p.display())))
        .transpose()
}

/// A directory stands for its split file `name`; a file stands for itself.
fn resolve(data: &Path, name: &str) -> PathBuf {
    if data.is_dir() {
        data.join(name)
    } else {
        data.to_path_buf()
    }
}

/// Clouds from a dataset file, or one cloud from whitespace-separated
/// coordinates.
fn read_clouds(path: &Path) -> Result<Vec<Vec<Point3>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        return Ok(read_dataset(path)?.into_iter().map(|s| s.points).collect());
    }
    let mut cloud = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}:{}: not a number", path.display(), i + 1))?;
        let [x, y, z] = v[..] else {
            bail!("{}:{}: expected 3 coordinates, got {}", path.display(), i + 1, v.len());
        };
        cloud.push(Point3::new(x, y, z));
    }
    Ok(vec![cloud])
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Gen { count, split, seed, out } => {
            if let Some(n) = count {
                let samples = generate_dataset(&config.generator, n, seed)?;
                write_dataset(&samples, &out)?;
                eprintln!("wrote {n} samples to {}", out.display());
            } else {
                let sizes = split.unwrap_or_else(|| DEFAULT_SPLIT.to_vec());
                let Ok(sizes) = <[usize; 3]>::try_from(sizes.as_slice()) else {
                    bail!("--split takes three sizes, got {sizes:?}");
                };
                let split = generate_split(&config.generator, sizes, seed)?;
                fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
                for (name, part) in SPLIT_FILES.iter().zip([&split.train, &split.validation, &split.test]) {
                    write_dataset(part, out.join(name))?;
                }
                eprintln!("wrote {sizes:?} samples to {}", out.display());
            }
        }
        Command::Train { data, epochs, seed, checkpoint_out, history_out } => {
            let mut recipe = config.training;
            if let Some(e) = epochs {
                recipe.train.epochs = e;
            }
            if let Some(s) = seed {
                recipe.train.seed = s;
            }
            let train = read_dataset(resolve(&data, SPLIT_FILES[0]))?;
            let validation = if data.is_dir() && data.join(SPLIT_FILES[1]).exists() {
                read_dataset(data.join(SPLIT_FILES[1]))?
            } else {
                Vec::new()
            };
            let trained = train_regressor(&train, &validation, &recipe, |e| {
                let v = e.validation_loss.map_or("-".into(), |v| format!("{v:.6}"));
                eprintln!("epoch {:>3}  train {:.6}  validation {v}  lr {:.2e}", e.epoch, e.train_loss, e.learning_rate);
            })?;
            trained.checkpoint().save(&checkpoint_out)?;
            if let Some(p) = history_out {
                write_out(&p, &serde_json::to_string_pretty(&trained.history)?)?;
            }
            eprintln!("kept epoch {}; checkpoint written to {}", trained.best_epoch, checkpoint_out.display());
        }
        Command::Fit { method, input, checkpoint, seed } => {
            let ck = load_checkpoint(checkpoint.as_deref())?;
            let estimator = build_estimator(method, ck.as_ref(), &config.suite)?;
            let clouds = read_clouds(&input)?;
            let mut failed = 0;
            let mut stdout = std::io::stdout().lock();
            for (i, cloud) in clouds.iter().enumerate() {
                let line = match estimator.estimate(cloud, seed) {
                    Ok(e) => json!({ "index": i, "sphere": e.sphere, "pose": e.pose }),
                    Err(e) => {
                        failed += 1;
                        json!({ "index": i, "error": { "kind": e.kind(), "message": e.to_string() } })
                    }
                };
                writeln!(stdout, "{line}")?;
            }
            if failed > 0 {
                bail!("{failed} of {} clouds could not be fitted", clouds.len());
            }
        }
        Command::Bench { data, checkpoint, conditions, methods, seed, report_out } => {
            let ck = load_checkpoint(checkpoint.as_deref())?;
            let report = run_suite(&methods, resolve(&data, SPLIT_FILES[2]), &conditions, &config.suite, ck.as_ref(), seed)?;
            if let Some(p) = report_out {
                write_out(&p, &render_structured(&report)?)?;
            }
            print!("{}", render_text(&report));
        }
        Command::Report { input, format } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let report = parse_structured(&text).with_context(|| format!("parsing {}", input.display()))?;
            print!("{}", report_render(&report, &format)?);
        }
        Command::Timing { method, data, checkpoint, repetitions } => {
            let ck = load_checkpoint(checkpoint.as_deref())?;
            let estimator = build_estimator(method, ck.as_ref(), &config.suite)?;
            let samples = read_dataset(resolve(&data, SPLIT_FILES[2]))?;
            let t = timing_probe(&estimator, &samples, repetitions)?;
            println!("{}", serde_json::to_string_pretty(&t)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
