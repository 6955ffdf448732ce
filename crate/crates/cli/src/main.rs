//! `kws`: few-shot keyword spotting from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use kws_core::config::{FeatureSource, RunConfig};
use kws_core::dataset::{gen_toy, load_corpus};
use kws_core::dtw::template_io::{read_template_dir, write_template, EXTENSION};
use kws_core::dtw::{Template, Thresholds};
use kws_core::eval::{format_detections, read_annotations, read_detections, ThresholdMode};
use kws_core::frontend::features_io::write_features;
use kws_core::frontend::{load_clip, FeatureKind, FeatureMatrix};
use kws_core::pipeline::{self, Features};
use kws_core::tacos::model_io::{read_model, write_model};
use kws_core::tacos::TrainedModel;
use kws_core::KwsError;

const MANIFEST: &str = "enroll.json";

#[derive(Parser, Debug)]
#[command(name = "kws", version, about = "Few-shot keyword spotting with sub-sequence DTW")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// TOML file with configuration overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    features: Option<FeatureArg>,
    /// Threshold mode used by `tune`.
    #[arg(long, global = true, value_enum)]
    thresholds: Option<ModeArg>,
    /// Train without time-reversed keyword classes.
    #[arg(long, global = true)]
    no_reversed: bool,
    /// Train with the keyword loss only.
    #[arg(long, global = true)]
    no_pos_loss: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeatureArg {
    Embedding,
    Hfcc,
}

impl From<FeatureArg> for FeatureSource {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Embedding => FeatureSource::Embedding,
            FeatureArg::Hfcc => FeatureSource::Hfcc,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Global,
    Individual,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic toy corpus.
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_keywords: Option<usize>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        n_sentences: Option<usize>,
        #[arg(long)]
        noise_level: Option<f64>,
    },
    /// Train the frame embedder on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one template per training file.
    Enroll {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect keywords in audio files.
    Detect {
        #[command(flatten)]
        t: TemplateOpts,
        /// Thresholds JSON as written by `tune`.
        #[arg(long)]
        threshold_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        audio: Vec<PathBuf>,
    },
    /// Tune thresholds on the validation split of a corpus.
    Tune {
        #[command(flatten)]
        t: TemplateOpts,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score detections against reference annotations.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time detection against audio duration.
    Bench {
        #[command(flatten)]
        t: TemplateOpts,
        #[arg(long)]
        threshold_file: Option<PathBuf>,
        /// Also write the detections TSV here.
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// WAV files or directories of WAV files.
        audio: Vec<PathBuf>,
    },
    /// Dump the frame features of one file as KWFE.
    Features {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        audio: PathBuf,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Args, Debug)]
struct TemplateOpts {
    /// Directory written by `enroll`.
    #[arg(long)]
    templates: PathBuf,
    /// Embedder model; defaults to the one recorded at enrollment.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    features: FeatureSource,
    model: Option<PathBuf>,
    templates: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    keyword: String,
    source: PathBuf,
    frames: usize,
}

#[derive(Debug, Serialize)]
struct TuneOutput<'a> {
    thresholds: &'a Thresholds,
    validation: kws_core::eval::MetricsReport,
    evaluations: usize,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    KwsError::Config(msg.into()).into()
}

fn load_config(g: &GlobalOpts) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(f) = g.features {
        cfg.detect.features = f.into();
    }
    if let Some(m) = g.thresholds {
        cfg.eval.thresholds = match m {
            ModeArg::Global => ThresholdMode::Global,
            ModeArg::Individual => ThresholdMode::Individual,
        };
    }
    if g.no_reversed {
        cfg.train.reversed = false;
    }
    if g.no_pos_loss {
        cfg.train.pos_loss = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers(n: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building the worker pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        log::warn!("built without the `parallel` feature; running on one thread");
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn open_model(path: &Path) -> Result<TrainedModel> {
    if !path.is_file() {
        return Err(config_error(format!("model {} does not exist", path.display())));
    }
    Ok(read_model(path)?)
}

fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let p = dir.join(MANIFEST);
    if !p.is_file() {
        return Ok(None);
    }
    let m = serde_json::from_slice(&fs::read(&p)?).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
    Ok(Some(m))
}

/// Templates plus the model they need, reconciled with the enrollment
/// manifest.
struct Enrolled {
    templates: Vec<Template>,
    model: Option<TrainedModel>,
}

fn open_templates(opts: &TemplateOpts, g: &GlobalOpts, cfg: &mut RunConfig) -> Result<Enrolled> {
    if !opts.templates.is_dir() {
        return Err(config_error(format!("{} is not a directory", opts.templates.display())));
    }
    let manifest = read_manifest(&opts.templates)?;
    if let Some(m) = &manifest {
        if g.features.is_some() && cfg.detect.features != m.features {
            return Err(config_error(format!(
                "templates were enrolled with {:?} features",
                m.features
            )));
        }
        cfg.detect.features = m.features;
    }
    let templates = read_template_dir(&opts.templates)?;
    let model = match cfg.detect.features {
        FeatureSource::Hfcc => None,
        FeatureSource::Embedding => {
            let path = opts
                .model
                .clone()
                .or_else(|| manifest.and_then(|m| m.model))
                .ok_or_else(|| config_error("embedding templates need --model"))?;
            Some(open_model(&path)?)
        }
    };
    Ok(Enrolled { templates, model })
}

fn read_thresholds(path: &Path) -> Result<Thresholds> {
    let bad = |e: &dyn std::fmt::Display| config_error(format!("{}: {e}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| bad(&e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    let inner = match value.get("mode") {
        Some(_) => value,
        None => value.get("thresholds").cloned().ok_or_else(|| bad(&"no thresholds"))?,
    };
    serde_json::from_value(inner).map_err(|e| bad(&e))
}

fn audio_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut v: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            v.sort();
            out.extend(v);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let mut cfg = load_config(g)?;
    init_workers(cfg.workers)?;

    match cli.command {
        Command::GenToy {
            out,
            n_keywords,
            shots,
            n_sentences,
            noise_level,
        } => {
            let mut spec = cfg.toy.clone();
            if let Some(v) = n_keywords {
                spec.n_keywords = v;
            }
            if let Some(v) = shots {
                spec.shots = v;
            }
            if let Some(v) = n_sentences {
                spec.n_sentences = v;
            }
            if let Some(v) = noise_level {
                spec.noise_level = v;
            }
            if let Some(s) = g.seed {
                spec.seed = s;
            }
            let layout = gen_toy(&spec, &out).with_context(|| format!("generating into {}", out.display()))?;
            log::info!(
                "wrote {} keywords, {} training files to {}",
                layout.keywords.len(),
                layout.train.len(),
                out.display()
            );
        }
        Command::Train { corpus, out } => {
            let layout = load_corpus(&corpus)?;
            let model = pipeline::train(&layout, &cfg)?;
            log::info!("final loss {:.4}", model.loss_trace.last().copied().unwrap_or(f64::NAN));
            write_model(&out, &model)?;
        }
        Command::Enroll { corpus, model, out } => {
            let layout = load_corpus(&corpus)?;
            let loaded = match (cfg.detect.features, &model) {
                (FeatureSource::Embedding, None) => return Err(config_error("embedding enrollment needs --model")),
                (FeatureSource::Embedding, Some(p)) => Some(open_model(p)?),
                (FeatureSource::Hfcc, _) => None,
            };
            let features = Features::new(&cfg, loaded.as_ref())?;
            let enrolled = pipeline::enroll(&layout, &features)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut entries = Vec::new();
            for e in &enrolled {
                let file = format!("{}.{EXTENSION}", e.name);
                write_template(&out.join(&file), &e.template)?;
                entries.push(ManifestEntry {
                    file,
                    keyword: e.template.keyword.clone(),
                    source: e.source.clone(),
                    frames: e.template.len(),
                });
            }
            let manifest = Manifest {
                features: cfg.detect.features,
                model: match cfg.detect.features {
                    FeatureSource::Embedding => model.map(|p| fs::canonicalize(&p).unwrap_or(p)),
                    FeatureSource::Hfcc => None,
                },
                templates: entries,
            };
            fs::write(out.join(MANIFEST), to_json(&manifest)?)?;
        }
        Command::Detect {
            t,
            threshold_file,
            out,
            audio,
        } => {
            let thresholds = match &threshold_file {
                Some(p) => read_thresholds(p)?,
                None => return Err(config_error("detect needs --threshold-file")),
            };
            let enrolled = open_templates(&t, g, &mut cfg)?;
            let features = Features::new(&cfg, enrolled.model.as_ref())?;
            let files = audio_files(&audio)?;
            let records = pipeline::detect_files(&files, &enrolled.templates, &features, &thresholds, &cfg)?;
            emit(out.as_deref(), &format_detections(&records))?;
        }
        Command::Tune { t, corpus, out } => {
            let layout = load_corpus(&corpus)?;
            let enrolled = open_templates(&t, g, &mut cfg)?;
            let features = Features::new(&cfg, enrolled.model.as_ref())?;
            let scored = pipeline::score_files(&layout.validation.sentences, &enrolled.templates, &features)?;
            let tuned = pipeline::tune(&scored, &enrolled.templates, &layout.validation.annotations, &cfg)?;
            log::info!("validation F {:.4}", tuned.report.f_score);
            let body = TuneOutput {
                thresholds: &tuned.thresholds,
                validation: tuned.report,
                evaluations: tuned.evaluations,
            };
            emit(out.as_deref(), &to_json(&body)?)?;
        }
        Command::Eval {
            detections,
            annotations,
            out,
        } => {
            let records = read_detections(&detections)?;
            let refs = read_annotations(&annotations)?;
            let report = pipeline::evaluate(&records, &refs, &cfg)?;
            emit(out.as_deref(), &to_json(&report)?)?;
        }
        Command::Bench {
            t,
            threshold_file,
            detections,
            out,
            audio,
        } => {
            let thresholds = match &threshold_file {
                Some(p) => read_thresholds(p)?,
                None => Thresholds::Global(f64::NEG_INFINITY),
            };
            let enrolled = open_templates(&t, g, &mut cfg)?;
            let features = Features::new(&cfg, enrolled.model.as_ref())?;
            let files = audio_files(&audio)?;
            let (report, records) = pipeline::bench(&files, &enrolled.templates, &features, &thresholds, &cfg)?;
            if let Some(p) = detections {
                fs::write(&p, format_detections(&records)).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(out.as_deref(), &to_json(&report)?)?;
        }
        Command::Features { model, out, audio } => {
            let loaded = match (cfg.detect.features, &model) {
                (FeatureSource::Embedding, None) => return Err(config_error("embedding features need --model")),
                (FeatureSource::Embedding, Some(p)) => Some(open_model(p)?),
                (FeatureSource::Hfcc, _) => None,
            };
            let features = Features::new(&cfg, loaded.as_ref())?;
            let clip = load_clip(&audio)?;
            let fm = FeatureMatrix {
                frames: features.frames(&clip)?,
                frame_step_s: features.frame_hop_s(),
                kind: match cfg.detect.features {
                    FeatureSource::Embedding => FeatureKind::Embedding,
                    FeatureSource::Hfcc => FeatureKind::Hfcc,
                },
            };
            write_features(&out, &fm, &audio.display().to_string())?;
        }
        Command::Config => {
            print!("{}", toml::to_string(&cfg)?);
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<KwsError>() {
        Some(k) if k.is_config_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KWS_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = if msg.is_empty() { cause } else { format!("{msg}: {cause}") };
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
