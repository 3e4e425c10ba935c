use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fmmatch::config::GlobalConfig;
use fmmatch::dataset::{build_dataset, verify, Dataset};
use fmmatch::dsp::{mfccd, MfccConfig};
use fmmatch::estimator::{Estimator, FeatureExtractor, Modality};
use fmmatch::experiment::{ablation_table, standard_variants, Experiment};
use fmmatch::pdc::dilated_locations;
use fmmatch::search::{genetic_search, hill_climb, GaConfig, HillClimbConfig, SearchBudget};
use fmmatch::synth::{render, AudioBuffer, ParameterSpace, Preset};
use fmmatch::{Error, Result};

/// Relative output paths land under this directory when it is set.
const OUTPUT_DIR_ENV: &str = "FMMATCH_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "fmmatch", version, about = "Estimate FM synthesizer presets from audio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a preset to a WAV file.
    Render {
        #[arg(long)]
        preset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Extract the model's input features from a WAV file as JSON.
    Features {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build or check a dataset.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Train an estimator on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train every ablation variant on a dataset and print the comparison.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate a preset for an audio file.
    Match {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// MFCC distance between a preset's render and a target.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 13)]
        bands: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Search for a preset by rendering candidates.
    Baseline {
        method: Method,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        space: String,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Prime-dilated convolution helpers.
    Pdc {
        #[command(subcommand)]
        command: PdcCommand,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    Verify { dir: PathBuf },
}

#[derive(Subcommand)]
enum PdcCommand {
    /// Dilated tap locations in bins.
    Locations {
        #[arg(long = "B", default_value_t = 12)]
        bins_per_octave: usize,
        #[arg(long, default_value_t = 4)]
        l: usize,
        /// Mirror the taps to negative offsets.
        #[arg(long)]
        symmetric: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Hillclimb,
    Ga,
}

/// Failure reported to the user.
enum Failure {
    User(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_user_error() {
            Failure::User(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_config(common: &Common) -> Result<GlobalConfig> {
    let mut cfg = match &common.config {
        Some(path) => GlobalConfig::load(path)?,
        None => GlobalConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output_path(path: &Path, cfg: Option<&GlobalConfig>) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    let base = std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .or_else(|| cfg.and_then(|c| c.paths.output_dir.as_ref()).map(PathBuf::from));
    match base {
        Some(b) => b.join(path),
        None => path.to_path_buf(),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(Error::Io),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(Error::Io)
}

fn read_preset(path: &Path) -> Result<Preset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidPreset(format!("{}: {e}", path.display())))?;
    Preset::from_json_catalog(&text).map_err(|e| Error::InvalidPreset(format!("{}: {e}", path.display())))
}

fn read_audio(path: &Path) -> Result<AudioBuffer> {
    AudioBuffer::read_wav(path).map_err(|e| Error::InvalidAudio(format!("{}: {e}", path.display())))
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

/// Outputs with a fixed schema carry the hash on stderr instead.
fn announce_hash(hash: &str) {
    eprintln!("config-hash: {hash}");
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Render { preset, out, common } => {
            let cfg = load_config(&common)?;
            let p = read_preset(&preset)?;
            let audio = render(&p, &cfg.note(), cfg.sample_rate())?;
            let out = output_path(&out, Some(&cfg));
            ensure_parent(&out)?;
            audio.write_wav(&out)?;
            print(json!({
                "out": out,
                "samples": audio.len(),
                "sample_rate": audio.sample_rate(),
                "rms": audio.rms(),
                "config_hash": cfg.hash(),
            }));
        }
        Command::Features { audio, out, common } => {
            let cfg = load_config(&common)?;
            let a = read_audio(&audio)?;
            let input = FeatureExtractor::new(&cfg.features(), a.sample_rate())?.model_input(&a)?;
            let mut modalities = serde_json::Map::new();
            for m in Modality::ALL {
                if let Some(t) = input.get(m) {
                    modalities.insert(m.name().into(), json!({"shape": t.shape(), "data": t.data()}));
                }
            }
            let doc = json!({
                "config_hash": cfg.hash(),
                "sample_rate": a.sample_rate(),
                "modalities": modalities,
            });
            let out = output_path(&out, Some(&cfg));
            write_text(&out, &serde_json::to_string(&doc).map_err(Error::Json)?)?;
            print(json!({"out": out, "config_hash": cfg.hash()}));
        }
        Command::Dataset {
            command: DatasetCommand::Gen { out, common },
        } => {
            let cfg = load_config(&common)?;
            let out = output_path(&out, Some(&cfg));
            std::fs::create_dir_all(&out).map_err(Error::Io)?;
            let m = build_dataset(&cfg.dataset, cfg.seed, &out)?;
            use fmmatch::dataset::Split;
            print(json!({
                "out": out,
                "records": m.records.len(),
                "train": m.count(Split::Train),
                "val": m.count(Split::Val),
                "test": m.count(Split::Test),
                "test_themes": m.sidecar.test_themes,
                "config_hash": cfg.hash(),
            }));
        }
        Command::Dataset {
            command: DatasetCommand::Verify { dir },
        } => {
            let report = verify(&dir)?;
            print(serde_json::to_value(&report).map_err(Error::Json)?);
            if !report.ok() {
                return Err(Failure::User(format!("{} manifest issue(s) in {}", report.issues.len(), dir.display())));
            }
        }
        Command::Train { dataset, out, common } => {
            let cfg = training_config(&common, &dataset)?;
            let exp = Experiment::open(&cfg, &dataset)?;
            let outcome = exp.fit(&cfg.model, &cfg.train)?;
            let state = exp.state(&outcome, &cfg.model, &cfg.train);
            let out = output_path(&out, Some(&cfg));
            let mut est = outcome.estimator;
            est.save(&out, &outcome.optimizer, &state)?;
            let last = outcome.history.epochs.last();
            print(json!({
                "out": out,
                "epochs": outcome.history.len(),
                "best_epoch": outcome.history.best_epoch,
                "final_train_loss": last.map(|e| e.train_loss),
                "final_val_loss": last.map(|e| e.val_loss),
                "config_hash": cfg.hash(),
            }));
        }
        Command::Ablate { dataset, common } => {
            let cfg = training_config(&common, &dataset)?;
            let exp = Experiment::open(&cfg, &dataset)?;
            let rows = exp.ablation(&standard_variants(&cfg.model, &cfg.train))?;
            announce_hash(&cfg.hash());
            print!("{}", ablation_table(&rows));
        }
        Command::Match { model, audio, out } => {
            let (mut est, state) = Estimator::load(&model)?;
            let a = read_audio(&audio)?;
            let preset = est.estimate(&a)?;
            preset.validate()?;
            let out = output_path(&out, None);
            write_text(&out, &(preset.to_json() + "\n"))?;
            print(json!({"out": out, "config_hash": state.config_hash}));
        }
        Command::Eval {
            pred,
            target,
            bands,
            common,
        } => {
            let cfg = load_config(&common)?;
            let p = read_preset(&pred)?;
            let t = read_audio(&target)?;
            let audio = render(&p, &cfg.note(), t.sample_rate())?;
            let d = mfccd(&audio, &t, &MfccConfig::with_bands(bands))?;
            announce_hash(&cfg.hash());
            print(json!({"mfccd": d, "bands": bands}));
        }
        Command::Baseline {
            method,
            target,
            space,
            budget,
            out,
            trace,
            common,
        } => {
            let cfg = load_config(&common)?;
            let space = Arc::new(ParameterSpace::by_id(&space)?);
            let t = read_audio(&target)?;
            let b = SearchBudget::new(budget, cfg.seed)?;
            let (preset, tr) = match method {
                Method::Hillclimb => hill_climb(&t, &space, &cfg.note(), b, HillClimbConfig::default())?,
                Method::Ga => genetic_search(&t, &space, &cfg.note(), b, GaConfig::default())?,
            };
            let out = output_path(&out, Some(&cfg));
            write_text(&out, &(preset.to_json() + "\n"))?;
            if let Some(path) = trace {
                let path = output_path(&path, Some(&cfg));
                ensure_parent(&path)?;
                tr.write_csv(&path)?;
            }
            print(json!({
                "out": out,
                "evaluations": tr.len(),
                "best_mfccd": tr.best(),
                "config_hash": cfg.hash(),
            }));
        }
        Command::Pdc {
            command: PdcCommand::Locations {
                bins_per_octave,
                l,
                symmetric,
            },
        } => {
            if bins_per_octave == 0 || l == 0 {
                return Err(Failure::User("--B and --l must be positive".into()));
            }
            let locs = dilated_locations(bins_per_octave, l, symmetric);
            print(json!(locs.locations));
        }
    }
    Ok(())
}

/// The dataset section comes from the dataset itself, so training always
/// sees the features it was built for.
fn training_config(common: &Common, dataset: &Path) -> Result<GlobalConfig> {
    let mut cfg = load_config(common)?;
    cfg.dataset = Dataset::open(dataset)?.manifest.sidecar.config;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
