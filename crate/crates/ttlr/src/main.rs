use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ttlr::experiment::{
    format_summary, run_experiment, summarize, write_csv, write_json, DataSource, ExperimentSpec, MethodSpec,
    NoiseKindName, NoiseSweep,
};
use ttlr::libsvm::{read_libsvm_file, write_libsvm, LabelTable, ParseOptions};
use ttlr::model_io::{load_model, save_model};
use ttlr::report::{write_bayes_csv, write_curvature_csv};
use ttlr::verify::{eta_grid, run_verification, Suite};
use ttlr_core::analysis::{bayes_binary_check, curvature_report};
use ttlr_core::noise::{synth_gaussians, NoiseKind, NoiseSpec};
use ttlr_core::{fit, FitConfig, TemperaturePair};

#[derive(Parser)]
#[command(name = "ttlr", version, about = "Two-temperature logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a LIBSVM file and save it.
    Train(TrainArgs),
    /// Predict labels for a LIBSVM file with a saved model.
    Predict(PredictArgs),
    /// Run a noise-robustness experiment.
    Sweep(SweepArgs),
    /// Run the numerical property batteries; exits nonzero on any failure.
    Verify(VerifyArgs),
    /// Write a noisy copy of a dataset in LIBSVM format.
    Noise(NoiseArgs),
}

#[derive(Args)]
struct Temps {
    #[arg(long, default_value_t = 0.6)]
    t1: f64,
    #[arg(long, default_value_t = 1.6)]
    t2: f64,
}

impl Temps {
    fn pair(&self) -> Result<TemperaturePair> {
        Ok(TemperaturePair::new(self.t1, self.t2)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data in LIBSVM format.
    #[arg(long)]
    data: PathBuf,
    /// Feature dimension, if larger than the largest index in the file.
    #[arg(long)]
    dim: Option<usize>,
    #[command(flatten)]
    temps: Temps,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    /// Seed of the weight initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec in TOML. Flags below override its seed, repetitions and timing.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Training data in LIBSVM format; synthetic Gaussians when absent.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test data; without it each repetition splits the training file 50/50.
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value = "outlier")]
    noise: NoiseArg,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5")]
    levels: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,
    /// Temperatures of the two-temperature method; plain LR and t-LR(t2) run alongside.
    #[command(flatten)]
    temps: Temps,
    /// Fix the regularization instead of cross-validating it.
    #[arg(long)]
    lambda: Option<f64>,
    /// Append a constant feature with this value.
    #[arg(long)]
    bias: Option<f64>,
    /// Write 0 in the `seconds` column so that reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Results file; the summary goes to stdout. Without it results go to stdout and the
    /// summary to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Outlier,
    RandomFlip,
    MarginFlip,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run; all when omitted.
    #[arg(long, value_enum)]
    suite: Vec<Suite>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the curvature profile of the `--t1/--t2` loss on [-20, 20].
    #[arg(long)]
    curvature_csv: Option<PathBuf>,
    /// Also write the binary minimizer check over eta = 0.05..0.95 for `--t1/--t2`.
    #[arg(long)]
    bayes_csv: Option<PathBuf>,
    #[command(flatten)]
    temps: Temps,
}

#[derive(Args)]
struct NoiseArgs {
    /// Input in LIBSVM format.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Generate this many points from two unit Gaussians at (2, 0) and (-2, 0) instead.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum)]
    kind: NoiseArg,
    /// Contamination ratio, or flip probability for random flips.
    #[arg(long)]
    level: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn train(args: TrainArgs) -> Result<()> {
    let opts = ParseOptions {
        dim: args.dim,
        labels: None,
    };
    let data = read_libsvm_file(&args.data, &opts).with_context(|| format!("reading {}", args.data.display()))?;
    let config = FitConfig {
        seed: args.seed,
        ..FitConfig::default()
    };
    let model = fit(&data.data, args.temps.pair()?, args.lambda, &config)?;
    if let Some(r) = model.report() {
        eprintln!(
            "{} iterations, objective {:.6}, termination {:?}",
            r.trace.iterations(),
            r.trace.final_value(),
            r.trace.termination
        );
        for w in &r.warnings {
            eprintln!("warning: {w:?}");
        }
    }
    eprintln!("training accuracy {:.4}", model.accuracy(&data.data)?);
    save_model(&args.out, &model, &data.labels).with_context(|| format!("writing {}", args.out.display()))
}

#[derive(Serialize)]
struct Prediction {
    row: usize,
    label: f64,
    predicted: f64,
}

fn predict(args: PredictArgs) -> Result<()> {
    let saved = load_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let opts = ParseOptions {
        dim: Some(saved.model.dim()),
        labels: Some(saved.labels.clone()),
    };
    let data = read_libsvm_file(&args.data, &opts).with_context(|| format!("reading {}", args.data.display()))?;
    let mut rows = Vec::with_capacity(data.data.len());
    for (i, ex) in data.data.examples().iter().enumerate() {
        rows.push(Prediction {
            row: i + 1,
            label: saved.labels.label(ex.label),
            predicted: saved.labels.label(saved.model.predict(&ex.x)?),
        });
    }
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => serde_json::to_writer_pretty(&mut out, &rows)?,
    }
    out.flush()?;
    eprintln!("accuracy {:.4}", saved.model.accuracy(&data.data)?);
    Ok(())
}

fn noise_name(n: NoiseArg) -> NoiseKindName {
    match n {
        NoiseArg::None => NoiseKindName::None,
        NoiseArg::Outlier => NoiseKindName::Outlier,
        NoiseArg::RandomFlip => NoiseKindName::RandomFlip,
        NoiseArg::MarginFlip => NoiseKindName::MarginFlip,
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentSpec::from_toml(&text)?
        }
        None => {
            let data = match &args.train {
                Some(train) => DataSource::Files {
                    train: train.clone(),
                    test: args.test.clone(),
                    dim: args.dim,
                },
                None => DataSource::default(),
            };
            let mut spec = ExperimentSpec {
                seed: 0,
                repetitions: 10,
                timing: true,
                bias: args.bias,
                methods: vec![
                    MethodSpec::PlainLr,
                    MethodSpec::TLr { t: args.temps.t2 },
                    MethodSpec::Ttlr {
                        t1: args.temps.t1,
                        t2: args.temps.t2,
                    },
                ],
                data,
                noise: NoiseSweep {
                    kind: noise_name(args.noise),
                    levels: args.levels.clone(),
                    sigma: args.sigma,
                },
                cv: Default::default(),
            };
            if let Some(l) = args.lambda {
                spec.cv.lambdas = vec![l];
            }
            spec
        }
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(r) = args.repetitions {
        spec.repetitions = r;
    }
    if args.no_timing {
        spec.timing = false;
    }

    let rows = run_experiment(&spec)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_csv(&mut out, &rows)?,
        Format::Json => write_json(&mut out, &rows)?,
    }
    out.flush()?;
    let table = format_summary(&summarize(&rows));
    if args.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let suites = if args.suite.is_empty() { Suite::ALL.to_vec() } else { args.suite };
    let report = run_verification(&suites, args.seed);
    println!("{report}");

    let temps = args.temps.pair()?;
    if let Some(path) = &args.curvature_csv {
        let r = curvature_report(temps, -20.0, 20.0, 2001)?;
        write_curvature_csv(output(Some(path))?, &r)?;
    }
    if let Some(path) = &args.bayes_csv {
        let checks = eta_grid()
            .into_iter()
            .map(|eta| bayes_binary_check(eta, temps))
            .collect::<ttlr_core::Result<Vec<_>>>()?;
        write_bayes_csv(output(Some(path))?, &checks)?;
    }
    Ok(report.passed())
}

fn noise(args: NoiseArgs) -> Result<()> {
    let (data, labels) = match (&args.data, args.synthetic) {
        (Some(path), None) => {
            let opts = ParseOptions {
                dim: args.dim,
                labels: None,
            };
            let d = read_libsvm_file(path, &opts).with_context(|| format!("reading {}", path.display()))?;
            (d.data, d.labels)
        }
        (None, Some(n)) => {
            if n == 0 || n % 2 != 0 {
                bail!("--synthetic needs a positive even count");
            }
            let means = [vec![2.0, 0.0], vec![-2.0, 0.0]];
            (synth_gaussians(n / 2, &means, 1.0, args.seed)?, LabelTable::sequential(2))
        }
        _ => bail!("give exactly one of --data or --synthetic"),
    };
    let kind = match args.kind {
        NoiseArg::None => None,
        NoiseArg::Outlier => Some(NoiseKind::Outlier {
            sigma: args.sigma,
            ratio: args.level,
        }),
        NoiseArg::RandomFlip => Some(NoiseKind::RandomFlip { prob: args.level }),
        NoiseArg::MarginFlip => Some(NoiseKind::MarginFlip { ratio: args.level }),
    };
    let noisy = match kind {
        Some(kind) => NoiseSpec { kind, seed: args.seed }.apply(&data)?,
        None => data,
    };
    let mut out = output(args.out.as_deref())?;
    write_libsvm(&mut out, &noisy, &labels)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a).map(|_| true),
        Command::Predict(a) => predict(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Noise(a) => noise(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
