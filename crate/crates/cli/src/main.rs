use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use genrefuse::data::{preprocess_manifest, synth_dataset, Dataset, SyntheticSpec};
use genrefuse::train::{
    build_graph, evaluate, lambda_sweep, label_prior_baseline, sweep_csv, train_with, write_run, Checkpoint, RunConfig,
};

#[derive(Parser)]
#[command(name = "genrefuse", version, about = "Multimodal multi-label music genre classification")]
struct Cli {
    /// JSON run config; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Components to switch off: any of al-loss, scma, gcem.
    #[arg(long, global = true, value_name = "LIST")]
    ablate: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted genre co-occurrence.
    Synth(SynthArgs),
    /// Convert manifest audio into mel caches.
    Preprocess(PreprocessArgs),
    /// Train a model and write its checkpoint, metrics and epoch log.
    Train(DataArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Train once per alignment weight and tabulate test scores.
    Sweep(SweepArgs),
    /// Dump the genre correlation matrices as JSON.
    Graph(DataArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Data directory; overrides `data.dir` of the config.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct MelArgs {
    #[arg(long)]
    sample_rate: Option<u32>,
    #[arg(long)]
    n_fft: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    mels: Option<usize>,
    #[arg(long)]
    seconds: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    tracks: usize,
    #[arg(long, default_value_t = 12)]
    genres: usize,
    /// Also write the rendered WAV files next to the mel caches.
    #[arg(long)]
    audio: bool,
    #[command(flatten)]
    mel: MelArgs,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    mel: MelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated alignment weights.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.3, 1.0])]
    lambdas: Vec<f64>,
    #[command(flatten)]
    data: DataArgs,
}

impl MelArgs {
    fn apply(&self, mel: &mut genrefuse::dsp::MelConfig) {
        if let Some(v) = self.sample_rate {
            mel.sample_rate = v;
        }
        if let Some(v) = self.n_fft {
            mel.n_fft = v;
        }
        if let Some(v) = self.hop {
            mel.hop = v;
        }
        if let Some(v) = self.mels {
            mel.n_mels = v;
        }
        if let Some(v) = self.seconds {
            mel.seconds = v;
        }
    }
}

impl Cli {
    /// The config file with command-line overrides applied.
    fn run_config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(list) = &self.ablate {
            config.ablation = config.ablation.disable(list)?;
        }
        Ok(config)
    }

    fn out_dir(&self) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!("--out <DIR> is required for this command"),
        }
    }
}

fn open_dataset(config: &mut RunConfig, args: &DataArgs) -> Result<Dataset> {
    if let Some(dir) = &args.data {
        config.data.dir = dir.clone();
    }
    Dataset::open(&config.data).with_context(|| format!("opening dataset in {}", config.data.dir.display()))
}

/// Writes `contents` to `out/name`, or to stdout without `--out`.
fn emit(out: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, contents)?;
            log::info!("wrote {}", path.display());
        }
        None => println!("{contents}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let mut config = cli.run_config()?;
    match &cli.command {
        Command::Synth(args) => {
            let mut spec = SyntheticSpec::new(args.tracks, args.genres, config.seed);
            spec.mel = config.mel.clone();
            args.mel.apply(&mut spec.mel);
            spec.write_audio = args.audio;
            let out = cli.out_dir()?;
            let summary = synth_dataset(&spec, out)?;
            println!(
                "wrote {} tracks over {} genres to {}",
                summary.records.len(),
                args.genres,
                out.display()
            );
        }
        Command::Preprocess(args) => {
            args.mel.apply(&mut config.mel);
            let n = preprocess_manifest(&args.manifest, cli.out_dir()?, &config.mel)?;
            println!("converted {n} tracks");
        }
        Command::Train(args) => {
            let dataset = open_dataset(&mut config, args)?;
            let out = cli.out_dir()?;
            let outcome = train_with(&config, &dataset, |_| {})?;
            write_run(out, &outcome)?;
            let prior = label_prior_baseline(&dataset, &outcome.split, config.eval.threshold)?;
            println!(
                "best epoch {}: test accuracy {:.4} F {:.4} (label prior F {:.4})",
                outcome.best_epoch, outcome.test.accuracy, outcome.test.f_measure, prior.f_measure
            );
        }
        Command::Eval(args) => {
            let checkpoint = Checkpoint::load(&args.checkpoint)
                .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
            let mut run_config = checkpoint.header.config.clone();
            let dataset = open_dataset(&mut run_config, &args.data)?;
            let model = checkpoint.to_model(&dataset.vocab)?;
            let split = dataset.split(run_config.data.split, run_config.split_seed)?;
            let indices = match args.split {
                SplitName::Train => &split.train,
                SplitName::Val => &split.val,
                SplitName::Test => &split.test,
            };
            let eval = evaluate(&model, &dataset, indices, run_config.eval.threshold)?;
            emit(cli.out.as_deref(), "eval.json", &serde_json::to_string_pretty(&eval.report)?)?;
        }
        Command::Sweep(args) => {
            let dataset = open_dataset(&mut config, &args.data)?;
            let rows = lambda_sweep(&config, &dataset, &args.lambdas)?;
            emit(cli.out.as_deref(), "sweep.csv", sweep_csv(&rows).trim_end())?;
        }
        Command::Graph(args) => {
            let dataset = open_dataset(&mut config, args)?;
            let graph = build_graph(&config, &dataset)?;
            emit(cli.out.as_deref(), "graph.json", &serde_json::to_string_pretty(&graph.to_json())?)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
