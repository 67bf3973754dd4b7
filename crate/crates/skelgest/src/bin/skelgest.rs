//! Command-line harness: dataset synthesis, detector training, five
//! detection pipelines, scoring, parameter search and gradient
//! verification.
//!
//! Every tunable resolves in three layers: an explicit flag wins over
//! the `--config` key=value file, which wins over the built-in default.
//! All randomness is seeded through explicit `--seed` flags, so every
//! run is reproducible.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use skelgest::config::{load_config, ConfigMap};
use skelgest::dissim::build_dictionary;
use skelgest::energy::{
    detect_candidates_scored, CandidateFilterConfig, EnergyMode, DEFAULT_ENERGY_STRIDE,
    DEFAULT_ENERGY_WINDOW, DEFAULT_SEGMENT_LENGTH,
};
use skelgest::eval::{match_and_score, sequence_lengths, TimingStats};
use skelgest::fsm::{run_fsm, FsmConfig};
use skelgest::grid::{grid_search, GridCell, ParamGrid};
use skelgest::io::{
    read_annotations, read_dataset, read_sequence_dir, write_annotations, write_dataset,
    ANNOTATION_FILE,
};
use skelgest::model::{AnnotationSpan, DetectionEvent, SkeletonSequence, Span};
use skelgest::net::gradcheck::standard_battery;
use skelgest::recognizers::{
    ensemble_predict, frame_labels_to_spans, load_bundle, save_bundle, train_recognizer,
    RecognizerConfig, RecognizerKind, TrainProtocol, TrainedRecognizer,
};
use skelgest::svm::{
    detect_sliding, load_baseline, save_baseline, train_svms, BaselineModel, SvmTrainConfig,
};
use skelgest::synth::{synth_generate, SynthConfig};
use skelgest::trajectory::{
    build_templates_from_dataset, load_templates, refine_detections, ClassTemplates,
    DEFAULT_BINS, DEFAULT_LAMBDA, TRAJECTORY_CLASSES,
};

#[derive(Parser)]
#[command(
    name = "skelgest",
    version,
    about = "Detects and classifies hand gestures in 20-joint skeleton streams"
)]
struct Cli {
    /// key = value settings consulted for flags not given explicitly
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset
    Synth(SynthArgs),
    /// Train a detector on a dataset directory
    Train(TrainArgs),
    /// Run a detection pipeline over every recording in a directory
    Detect(DetectArgs),
    /// Score detections against ground-truth annotations
    Eval(EvalArgs),
    /// Exhaustive parameter search for the energy pipeline
    Gridsearch(GridArgs),
    /// Verify analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
}

/// Every configuration key any subcommand reads; the rest are typos.
const KNOWN_KEYS: &[&str] = &[
    "synth.sequences",
    "synth.gestures-min",
    "synth.gestures-max",
    "synth.classes",
    "synth.noise-mm",
    "synth.idle-mm",
    "synth.rate",
    "synth.seed",
    "train.seed",
    "train.epochs",
    "train.lr",
    "train.batch",
    "train.chunk",
    "train.validation",
    "train.patience",
    "train.portion",
    "train.jitter-mm",
    "train.gamma",
    "train.hidden",
    "train.reg",
    "train.negatives",
    "detect.alpha",
    "detect.beta",
    "detect.lambda",
    "detect.epsilon",
    "detect.stride",
    "detect.window",
    "detect.segment",
    "detect.energy-mode",
    "detect.buffer",
    "detect.confirm",
    "detect.end-confirm",
    "grid.alpha",
    "grid.beta",
    "grid.lambda",
    "grid.epsilon",
    "grid.stride",
    "grid.window",
    "grid.energy-mode",
    "gradcheck.seed",
    "gradcheck.instances",
];

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => {
            load_config(path).with_context(|| format!("reading config {}", path.display()))?
        }
        None => ConfigMap::default(),
    };
    for key in cfg.unknown_keys(KNOWN_KEYS) {
        log::warn!("config key {key:?} is not recognized by any subcommand");
    }
    match cli.command {
        Command::Synth(a) => run_synth(a, &cfg),
        Command::Train(a) => run_train(a, &cfg),
        Command::Detect(a) => run_detect(a, &cfg),
        Command::Eval(a) => run_eval(a),
        Command::Gridsearch(a) => run_gridsearch(a, &cfg),
        Command::Gradcheck(a) => run_gradcheck(a, &cfg),
    }
}

// --- flag / file / default resolution -----------------------------------

fn pick<T>(flag: Option<T>, file: skelgest::Result<Option<T>>, default: T) -> Result<T> {
    Ok(flag.or(file?).unwrap_or(default))
}

fn pick_opt<T>(flag: Option<T>, file: skelgest::Result<Option<T>>) -> Result<Option<T>> {
    Ok(flag.or(file?))
}

fn parse_f64_csv(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .with_context(|| format!("{what}: bad number {p:?}"))
        })
        .collect()
}

fn parse_usize_csv(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<usize>()
                .with_context(|| format!("{what}: bad integer {p:?}"))
        })
        .collect()
}

/// Comma-separated flatness bounds where `auto` means the per-sequence
/// 5%-of-peak default.
fn parse_epsilon_csv(s: &str, what: &str) -> Result<Vec<Option<f64>>> {
    s.split(',')
        .map(|p| match p.trim() {
            "auto" => Ok(None),
            p => p
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .with_context(|| format!("{what}: expected a number or \"auto\", got {p:?}")),
        })
        .collect()
}

// --- synth ---------------------------------------------------------------

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of recordings
    #[arg(long)]
    sequences: Option<usize>,
    /// Fewest gestures per recording
    #[arg(long)]
    gestures_min: Option<usize>,
    /// Most gestures per recording
    #[arg(long)]
    gestures_max: Option<usize>,
    /// Comma-separated class names (default: all 18)
    #[arg(long)]
    classes: Option<String>,
    /// Per-coordinate Gaussian jitter, millimetres
    #[arg(long)]
    noise_mm: Option<f64>,
    /// Idle drift amplitude, millimetres
    #[arg(long)]
    idle_mm: Option<f64>,
    /// Frames per second
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn run_synth(a: SynthArgs, cfg: &ConfigMap) -> Result<()> {
    let d = SynthConfig::default();
    let classes = match a.classes {
        Some(s) => s.split(',').map(|c| c.trim().to_string()).collect(),
        None => cfg.get_str_list("synth.classes")?.unwrap_or(d.classes),
    };
    let config = SynthConfig {
        classes,
        sequence_count: pick(a.sequences, cfg.get_usize("synth.sequences"), d.sequence_count)?,
        gestures_min: pick(a.gestures_min, cfg.get_usize("synth.gestures-min"), d.gestures_min)?,
        gestures_max: pick(a.gestures_max, cfg.get_usize("synth.gestures-max"), d.gestures_max)?,
        noise_mm: pick(a.noise_mm, cfg.get_f64("synth.noise-mm"), d.noise_mm)?,
        idle_amplitude_mm: pick(a.idle_mm, cfg.get_f64("synth.idle-mm"), d.idle_amplitude_mm)?,
        frame_rate_hz: pick(a.rate, cfg.get_f64("synth.rate"), d.frame_rate_hz)?,
        seed: pick(a.seed, cfg.get_u64("synth.seed"), d.seed)?,
    };
    let (seqs, spans) = synth_generate(&config)?;
    write_dataset(&a.out, &seqs, &spans)
        .with_context(|| format!("writing dataset {}", a.out.display()))?;
    let frames: usize = seqs.iter().map(|s| s.len()).sum();
    println!(
        "wrote {} recordings ({frames} frames) with {} annotated gestures to {}",
        seqs.len(),
        spans.len(),
        a.out.display()
    );
    Ok(())
}

// --- train ---------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMethod {
    /// Dissimilarity dictionary + per-class linear SVMs
    Baseline,
    /// Unidirectional GRU stack
    Udeepgru,
    /// Temporal-shift feed-forward stack
    Tsgr,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    method: TrainMethod,
    /// Training dataset directory (.skel recordings + annotations.txt)
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output model file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Seed for splits, shuffling and weight initialization
    #[arg(long)]
    seed: Option<u64>,
    /// Training epochs (networks default 30, baseline 200)
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate (networks default 2e-4, baseline 0.1)
    #[arg(long)]
    lr: Option<f64>,
    /// Recordings per optimizer step (networks)
    #[arg(long)]
    batch: Option<usize>,
    /// Longest training chunk in frames (networks)
    #[arg(long)]
    chunk: Option<usize>,
    /// Recordings withheld for per-epoch validation (networks)
    #[arg(long)]
    validation: Option<usize>,
    /// Early-stopping patience in epochs (networks)
    #[arg(long)]
    patience: Option<usize>,
    /// Fraction of the training recordings actually used (networks)
    #[arg(long)]
    portion: Option<f64>,
    /// Uniform positional jitter augmentation, millimetres (networks)
    #[arg(long)]
    jitter_mm: Option<f64>,
    /// Focal-loss focusing exponent (networks)
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated hidden layer widths (networks)
    #[arg(long)]
    hidden: Option<String>,
    /// L2 regularization strength (baseline)
    #[arg(long)]
    reg: Option<f64>,
    /// Sampled non-gesture windows (baseline; default: one per gesture)
    #[arg(long)]
    negatives: Option<usize>,
}

fn run_train(a: TrainArgs, cfg: &ConfigMap) -> Result<()> {
    let (seqs, spans) = read_dataset(&a.input)
        .with_context(|| format!("reading dataset {}", a.input.display()))?;
    if spans.is_empty() {
        bail!(
            "dataset {} has no annotations ({ANNOTATION_FILE} missing or empty)",
            a.input.display()
        );
    }
    let seed = pick(a.seed, cfg.get_u64("train.seed"), 0)?;
    let started = Instant::now();
    match a.method {
        TrainMethod::Baseline => {
            let d = SvmTrainConfig::default();
            let config = SvmTrainConfig {
                epochs: pick(a.epochs, cfg.get_usize("train.epochs"), d.epochs)?,
                lr: pick(a.lr, cfg.get_f64("train.lr"), d.lr)?,
                reg: pick(a.reg, cfg.get_f64("train.reg"), d.reg)?,
                seed,
            };
            let negatives = pick(a.negatives, cfg.get_usize("train.negatives"), spans.len())?;
            let dict = build_dictionary(&seqs, &spans, negatives, seed)?;
            let models = train_svms(&dict, &config)?;
            let model = BaselineModel { dict, models };
            save_baseline(&a.out, &model)
                .with_context(|| format!("writing model {}", a.out.display()))?;
            println!(
                "trained {} class SVMs on {} windows ({} representation) in {:.1} s -> {}",
                model.models.len(),
                model.dict.training.len(),
                model.dict.representation.len(),
                started.elapsed().as_secs_f64(),
                a.out.display()
            );
        }
        TrainMethod::Udeepgru | TrainMethod::Tsgr => {
            let mut config = match a.method {
                TrainMethod::Udeepgru => RecognizerConfig::udeepgru(seed),
                _ => RecognizerConfig::tsgr(seed),
            };
            if let Some(g) = pick_opt(a.gamma, cfg.get_f64("train.gamma"))? {
                config.gamma = g;
            }
            let hidden = match &a.hidden {
                Some(s) => Some(parse_usize_csv(s, "--hidden")?),
                None => cfg.get_usize_list("train.hidden")?,
            };
            if let Some(h) = hidden {
                config.hidden = h;
            }
            let d = TrainProtocol::default();
            let protocol = TrainProtocol {
                lr: pick(a.lr, cfg.get_f64("train.lr"), d.lr)?,
                batch_size: pick(a.batch, cfg.get_usize("train.batch"), d.batch_size)?,
                max_chunk: pick(a.chunk, cfg.get_usize("train.chunk"), d.max_chunk)?,
                validation_sequences: pick(
                    a.validation,
                    cfg.get_usize("train.validation"),
                    d.validation_sequences,
                )?,
                epochs: pick(a.epochs, cfg.get_usize("train.epochs"), d.epochs)?,
                patience: pick(a.patience, cfg.get_usize("train.patience"), d.patience)?,
                portion: pick(a.portion, cfg.get_f64("train.portion"), d.portion)?,
                jitter_mm: pick(a.jitter_mm, cfg.get_f64("train.jitter-mm"), d.jitter_mm)?,
                seed,
            };
            let rec = train_recognizer(&config, &protocol, &seqs, &spans)?;
            save_bundle(&a.out, &rec)
                .with_context(|| format!("writing model {}", a.out.display()))?;
            println!(
                "trained {} (validation F1 {:.3}) in {:.1} s -> {}",
                rec.config.kind.name(),
                rec.best_f1,
                started.elapsed().as_secs_f64(),
                a.out.display()
            );
        }
    }
    Ok(())
}

// --- detect --------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectMethod {
    /// Sliding dissimilarity windows scored by per-class SVMs
    Baseline,
    /// Per-frame GRU labels collapsed into events
    Udeepgru,
    /// Per-frame temporal-shift labels collapsed into events
    Tsgr,
    /// Per-frame labels post-processed by the detection state machine
    Fsm,
    /// Energy candidates classified per segment, histogram-refined
    Energy,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, value_enum)]
    method: DetectMethod,
    /// Input directory of .skel recordings
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output detections file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Model file; repeat to average an ensemble (network methods)
    #[arg(long, value_name = "FILE", required = true)]
    model: Vec<PathBuf>,
    /// Trajectory templates refining energy candidates
    #[arg(long, value_name = "FILE")]
    templates: Option<PathBuf>,
    /// Build refinement templates from an annotated dataset directory
    #[arg(long, value_name = "DIR", conflicts_with = "templates")]
    templates_from: Option<PathBuf>,
    /// Drop candidates whose non-gesture confidence exceeds this
    #[arg(long)]
    alpha: Option<f64>,
    /// Drop candidates whose best gesture confidence is below this
    #[arg(long)]
    beta: Option<f64>,
    /// Histogram refinement blend weight
    #[arg(long)]
    lambda: Option<f64>,
    /// Energy flatness bound (default: 5% of the largest change)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Energy window stride in frames
    #[arg(long)]
    stride: Option<usize>,
    /// Energy window length in frames
    #[arg(long)]
    window: Option<usize>,
    /// Classified segment length in frames
    #[arg(long)]
    segment: Option<usize>,
    /// Energy definition: ratio or displacement
    #[arg(long)]
    energy_mode: Option<String>,
    /// Label-window length in frames (fsm)
    #[arg(long)]
    buffer: Option<usize>,
    /// Gesture frames required to confirm a candidate (fsm)
    #[arg(long)]
    confirm: Option<usize>,
    /// Fully-empty windows required to close an event (fsm)
    #[arg(long)]
    end_confirm: Option<usize>,
}

fn single_model<'a>(models: &'a [PathBuf], method: &str) -> Result<&'a PathBuf> {
    match models {
        [one] => Ok(one),
        _ => bail!("--method {method} takes exactly one --model, got {}", models.len()),
    }
}

fn load_members(paths: &[PathBuf], expect: Option<RecognizerKind>) -> Result<Vec<TrainedRecognizer>> {
    let mut members = Vec::with_capacity(paths.len());
    for path in paths {
        let rec =
            load_bundle(path).with_context(|| format!("reading model {}", path.display()))?;
        if let Some(kind) = expect {
            if rec.config.kind != kind {
                bail!(
                    "{} holds a {} model, not {}",
                    path.display(),
                    rec.config.kind.name(),
                    kind.name()
                );
            }
        }
        members.push(rec);
    }
    Ok(members)
}

fn run_detect(a: DetectArgs, cfg: &ConfigMap) -> Result<()> {
    let seqs = read_sequence_dir(&a.input)
        .with_context(|| format!("reading recordings in {}", a.input.display()))?;
    if seqs.is_empty() {
        bail!("no .skel recordings in {}", a.input.display());
    }

    let started = Instant::now();
    let per_seq: Vec<Vec<DetectionEvent>> = match a.method {
        DetectMethod::Baseline => {
            let path = single_model(&a.model, "baseline")?;
            let model = load_baseline(path)
                .with_context(|| format!("reading model {}", path.display()))?;
            model.validate()?;
            seqs.par_iter()
                .map(|s| detect_sliding(s, &model.models, &model.dict))
                .collect::<skelgest::Result<_>>()?
        }
        DetectMethod::Udeepgru | DetectMethod::Tsgr => {
            let kind = if a.method == DetectMethod::Udeepgru {
                RecognizerKind::UDeepGru
            } else {
                RecognizerKind::Tsgr
            };
            let members = load_members(&a.model, Some(kind))?;
            seqs.par_iter()
                .map(|s| {
                    let (labels, _) = ensemble_predict(&members, s)?;
                    Ok(frame_labels_to_spans(&labels, &s.id))
                })
                .collect::<skelgest::Result<_>>()?
        }
        DetectMethod::Fsm => {
            let members = load_members(&a.model, None)?;
            let base = FsmConfig::default();
            let buffer = pick(a.buffer, cfg.get_usize("detect.buffer"), base.buffer_size)?;
            let confirm =
                pick(a.confirm, cfg.get_usize("detect.confirm"), base.confirm_threshold)?;
            let end_confirm =
                pick(a.end_confirm, cfg.get_usize("detect.end-confirm"), base.end_confirm)?;
            seqs.par_iter()
                .map(|s| {
                    let (labels, _) = ensemble_predict(&members, s)?;
                    let config = FsmConfig {
                        buffer_size: buffer,
                        confirm_threshold: confirm,
                        end_confirm,
                        frame_rate_hz: s.frame_rate_hz,
                    };
                    run_fsm(&labels, &config, &s.id)
                })
                .collect::<skelgest::Result<_>>()?
        }
        DetectMethod::Energy => {
            let path = single_model(&a.model, "energy")?;
            let member = load_bundle(path)
                .with_context(|| format!("reading model {}", path.display()))?;
            let templates = match (&a.templates, &a.templates_from) {
                (Some(p), _) => Some(
                    load_templates(p)
                        .with_context(|| format!("reading templates {}", p.display()))?,
                ),
                (None, Some(dir)) => {
                    let (tseqs, tspans) = read_dataset(dir)
                        .with_context(|| format!("reading template dataset {}", dir.display()))?;
                    Some(default_templates(&tseqs, &tspans)?)
                }
                (None, None) => None,
            };
            let filter = CandidateFilterConfig {
                epsilon: pick_opt(a.epsilon, cfg.get_f64("detect.epsilon"))?,
                alpha: pick(a.alpha, cfg.get_f64("detect.alpha"), 0.5)?,
                beta: pick(a.beta, cfg.get_f64("detect.beta"), 0.5)?,
                segment_length: pick(
                    a.segment,
                    cfg.get_usize("detect.segment"),
                    DEFAULT_SEGMENT_LENGTH,
                )?,
            };
            let lambda = pick(a.lambda, cfg.get_f64("detect.lambda"), DEFAULT_LAMBDA)?;
            let stride = pick(a.stride, cfg.get_usize("detect.stride"), DEFAULT_ENERGY_STRIDE)?;
            let window = pick(a.window, cfg.get_usize("detect.window"), DEFAULT_ENERGY_WINDOW)?;
            let mode = energy_mode(a.energy_mode, cfg, "detect.energy-mode")?;
            seqs.par_iter()
                .map(|s| {
                    let scored =
                        match detect_candidates_scored(s, window, stride, &filter, &member, mode)
                        {
                            Ok(scored) => scored,
                            Err(skelgest::Error::WindowTooShort { got, need }) => {
                                log::warn!(
                                    "recording '{}' has {got} frames, fewer than the {need} the energy profile needs; skipping",
                                    s.id
                                );
                                Vec::new()
                            }
                            Err(err) => return Err(err),
                        };
                    match &templates {
                        Some(t) => refine_detections(s, &scored, t, lambda),
                        None => Ok(scored.into_iter().map(|(e, _)| e).collect()),
                    }
                })
                .collect::<skelgest::Result<_>>()?
        }
    };
    let total_seconds = started.elapsed().as_secs_f64();

    let events: Vec<DetectionEvent> = per_seq.into_iter().flatten().collect();
    write_annotations(&a.out, &events)
        .with_context(|| format!("writing detections {}", a.out.display()))?;
    let timing = TimingStats {
        total_seconds,
        mean_classification_seconds: total_seconds / events.len().max(1) as f64,
    };
    write_timing(&a.out, &timing, events.len())?;
    println!(
        "{} events across {} recordings -> {}",
        events.len(),
        seqs.len(),
        a.out.display()
    );
    println!(
        "total {:.3} s, mean per classification {:.6} s",
        timing.total_seconds, timing.mean_classification_seconds
    );
    Ok(())
}

fn energy_mode(flag: Option<String>, cfg: &ConfigMap, key: &str) -> Result<EnergyMode> {
    let name = match flag {
        Some(s) => s,
        None => cfg.get(key).unwrap_or("ratio").to_string(),
    };
    EnergyMode::from_name(&name)
        .with_context(|| format!("energy mode must be ratio or displacement, got {name:?}"))
}

// --- timing sidecar ------------------------------------------------------

fn timing_path(detections: &std::path::Path) -> PathBuf {
    let mut name = detections.file_name().unwrap_or_default().to_os_string();
    name.push(".timing");
    detections.with_file_name(name)
}

fn write_timing(detections: &std::path::Path, timing: &TimingStats, events: usize) -> Result<()> {
    let text = format!(
        "# wall-clock totals for the detection pass\ntotal-seconds = {}\nclassifications = {events}\nmean-classification-seconds = {}\n",
        timing.total_seconds, timing.mean_classification_seconds
    );
    std::fs::write(timing_path(detections), text)?;
    Ok(())
}

fn read_timing(detections: &std::path::Path) -> Result<Option<TimingStats>> {
    let path = timing_path(detections);
    if !path.exists() {
        return Ok(None);
    }
    let cfg = load_config(&path)?;
    let total = cfg.get_f64("total-seconds")?;
    let mean = cfg.get_f64("mean-classification-seconds")?;
    match (total, mean) {
        (Some(total_seconds), Some(mean_classification_seconds)) => Ok(Some(TimingStats {
            total_seconds,
            mean_classification_seconds,
        })),
        _ => bail!("{} is missing timing fields", path.display()),
    }
}

// --- eval ----------------------------------------------------------------

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth annotations file
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Detections file
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Report file (.json for JSON, anything else for CSV)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Dataset directory for exact recording lengths (otherwise
    /// inferred from the spans)
    #[arg(long = "in", value_name = "DIR")]
    input: Option<PathBuf>,
}

fn inferred_lengths(gt: &[Span], pred: &[Span]) -> BTreeMap<String, usize> {
    let mut lens: BTreeMap<String, usize> = BTreeMap::new();
    for span in gt.iter().chain(pred) {
        let len = lens.entry(span.sequence_id.clone()).or_insert(0);
        *len = (*len).max(span.end_frame + 1);
    }
    lens
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let gt = read_annotations(&a.gt)
        .with_context(|| format!("reading ground truth {}", a.gt.display()))?;
    let pred = read_annotations(&a.pred)
        .with_context(|| format!("reading detections {}", a.pred.display()))?;
    let lens = match &a.input {
        Some(dir) => sequence_lengths(
            &read_sequence_dir(dir)
                .with_context(|| format!("reading recordings in {}", dir.display()))?,
        ),
        None => {
            log::info!("no --in directory; inferring recording lengths from the spans");
            inferred_lengths(&gt, &pred)
        }
    };
    let mut report = match_and_score(&gt, &pred, &lens)?;
    let timing = read_timing(&a.pred)?;
    if let Some(t) = timing {
        report.timing = t;
    }

    let text = if a.out.extension().is_some_and(|e| e == "json") {
        format!("{:#}\n", report.to_json())
    } else {
        report.to_csv()
    };
    std::fs::write(&a.out, &text).with_context(|| format!("writing report {}", a.out.display()))?;

    println!(
        "mean Jaccard {:.4}  detection rate {:.4}  FP rate {:.4}",
        report.mean_jaccard, report.mean_detection_rate, report.mean_fp_rate
    );
    if report.timing.total_seconds > 0.0 {
        println!(
            "total {:.3} s, mean per classification {:.6} s",
            report.timing.total_seconds, report.timing.mean_classification_seconds
        );
    }
    println!("report -> {}", a.out.display());
    Ok(())
}

// --- gridsearch ----------------------------------------------------------

#[derive(Args)]
struct GridArgs {
    /// Validation dataset directory (annotations required)
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Segment-classifier model (recognizer bundle)
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Trajectory templates (default: built from the validation data)
    #[arg(long, value_name = "FILE")]
    templates: Option<PathBuf>,
    /// Score table CSV
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Comma-separated candidate values
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Comma-separated bounds; "auto" = 5% of the largest change
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    window: Option<String>,
    /// Energy definition: ratio or displacement
    #[arg(long)]
    energy_mode: Option<String>,
}

fn f64_axis(
    flag: Option<String>,
    cfg: &ConfigMap,
    key: &str,
    default: Vec<f64>,
) -> Result<Vec<f64>> {
    match flag {
        Some(s) => parse_f64_csv(&s, key),
        None => Ok(cfg.get_f64_list(key)?.unwrap_or(default)),
    }
}

fn usize_axis(
    flag: Option<String>,
    cfg: &ConfigMap,
    key: &str,
    default: Vec<usize>,
) -> Result<Vec<usize>> {
    match flag {
        Some(s) => parse_usize_csv(&s, key),
        None => Ok(cfg.get_usize_list(key)?.unwrap_or(default)),
    }
}

fn epsilon_cell(e: Option<f64>) -> String {
    e.map_or_else(|| "auto".to_string(), |v| format!("{v}"))
}

fn grid_table_csv(table: &[GridCell]) -> String {
    let mut s =
        String::from("alpha,beta,lambda,epsilon,stride,window,mean_jaccard,detection_rate,fp_rate\n");
    for cell in table {
        let p = cell.point;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.alpha,
            p.beta,
            p.lambda,
            epsilon_cell(p.epsilon),
            p.stride,
            p.window,
            cell.mean_jaccard,
            cell.detection_rate,
            cell.fp_rate
        ));
    }
    s
}

fn run_gridsearch(a: GridArgs, cfg: &ConfigMap) -> Result<()> {
    let (seqs, spans) = read_dataset(&a.input)
        .with_context(|| format!("reading dataset {}", a.input.display()))?;
    if spans.is_empty() {
        bail!(
            "validation dataset {} has no annotations ({ANNOTATION_FILE} missing or empty)",
            a.input.display()
        );
    }
    let member = load_bundle(&a.model)
        .with_context(|| format!("reading model {}", a.model.display()))?;
    let templates = match &a.templates {
        Some(p) => {
            load_templates(p).with_context(|| format!("reading templates {}", p.display()))?
        }
        None => default_templates(&seqs, &spans)?,
    };

    let d = ParamGrid::default();
    let epsilon = match a.epsilon {
        Some(s) => parse_epsilon_csv(&s, "grid.epsilon")?,
        None => match cfg.get("grid.epsilon") {
            Some(s) => parse_epsilon_csv(s, "grid.epsilon")?,
            None => d.epsilon,
        },
    };
    let grid = ParamGrid {
        alpha: f64_axis(a.alpha, cfg, "grid.alpha", d.alpha)?,
        beta: f64_axis(a.beta, cfg, "grid.beta", d.beta)?,
        lambda: f64_axis(a.lambda, cfg, "grid.lambda", d.lambda)?,
        epsilon,
        stride: usize_axis(a.stride, cfg, "grid.stride", d.stride)?,
        window: usize_axis(a.window, cfg, "grid.window", d.window)?,
    };
    let mode = energy_mode(a.energy_mode, cfg, "grid.energy-mode")?;

    let started = Instant::now();
    let (best, table) = grid_search(&grid, &seqs, &spans, &member, &templates, mode)?;
    println!(
        "searched {} cells in {:.1} s",
        table.len(),
        started.elapsed().as_secs_f64()
    );
    let p = best.point;
    println!(
        "best: alpha {} beta {} lambda {} epsilon {} stride {} window {} -> mean Jaccard {:.4} (detection rate {:.4}, FP rate {:.4})",
        p.alpha,
        p.beta,
        p.lambda,
        epsilon_cell(p.epsilon),
        p.stride,
        p.window,
        best.mean_jaccard,
        best.detection_rate,
        best.fp_rate
    );
    if let Some(out) = &a.out {
        std::fs::write(out, grid_table_csv(&table))
            .with_context(|| format!("writing table {}", out.display()))?;
        println!("score table -> {}", out.display());
    }
    Ok(())
}

/// Templates from whichever trajectory-shaped classes the annotated
/// data actually contains; empty (refinement becomes a pass-through)
/// when there are none.
fn default_templates(
    seqs: &[SkeletonSequence],
    spans: &[AnnotationSpan],
) -> Result<ClassTemplates> {
    let classes: Vec<_> = TRAJECTORY_CLASSES
        .iter()
        .copied()
        .filter(|c| spans.iter().any(|s| s.label == *c))
        .collect();
    if classes.is_empty() {
        log::info!("no trajectory-shaped classes in the annotations; refinement is a pass-through");
        return Ok(ClassTemplates {
            templates: BTreeMap::new(),
        });
    }
    log::info!(
        "building templates for {} classes from the annotated data",
        classes.len()
    );
    Ok(build_templates_from_dataset(seqs, spans, &classes, DEFAULT_BINS)?)
}

// --- gradcheck -----------------------------------------------------------

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Seeded random instances per architecture stack
    #[arg(long)]
    instances: Option<usize>,
}

fn run_gradcheck(a: GradcheckArgs, cfg: &ConfigMap) -> Result<()> {
    let seed = pick(a.seed, cfg.get_u64("gradcheck.seed"), 0)?;
    let instances = pick(a.instances, cfg.get_usize("gradcheck.instances"), 20)?;
    if instances == 0 {
        bail!("--instances must be positive");
    }
    let started = Instant::now();
    let battery = standard_battery(seed, instances)?;
    let mut failed = false;
    for (name, worst) in &battery {
        let ok = *worst < 1e-4;
        failed |= !ok;
        println!(
            "{name:<16} worst relative error {worst:.3e}  {}",
            if ok { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{} instances per stack in {:.1} s",
        instances,
        started.elapsed().as_secs_f64()
    );
    if failed {
        bail!("at least one gradient disagrees with finite differences");
    }
    Ok(())
}
