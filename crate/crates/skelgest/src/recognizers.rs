//! Per-frame gesture recognizers built on the sequence-network core: a
//! recurrent stack and a temporal-shift stack, their training protocol
//! (focal loss, Adam, chunked mini-batches, validation-F1 model
//! selection), streaming prediction and probability-averaging ensembles.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{window_vectors, FeatureStats, FrameRecipe};
use crate::model::{
    AnnotationSpan, GestureClass, SkeletonSequence, Span, CLASS_COUNT, GESTURE_CLASS_COUNT,
};
use crate::net::adam::{Adam, AdamConfig};
use crate::net::gru::GruCell;
use crate::net::linear::Dense;
use crate::net::mat::Mat;
use crate::net::param::Activation;
use crate::net::shift::ShiftNode;
use crate::net::{checkpoint_from_string, checkpoint_to_string, train_step, Layer, Network};

/// The two recognizer families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecognizerKind {
    /// Dense feature layer (tanh) feeding a stack of recurrent cells.
    UDeepGru,
    /// A stack of temporal-shift nodes (tanh first, ReLU after).
    Tsgr,
}

impl RecognizerKind {
    pub fn name(self) -> &'static str {
        match self {
            RecognizerKind::UDeepGru => "udeepgru",
            RecognizerKind::Tsgr => "tsgr",
        }
    }

    pub fn from_name(s: &str) -> Option<RecognizerKind> {
        match s {
            "udeepgru" => Some(RecognizerKind::UDeepGru),
            "tsgr" => Some(RecognizerKind::Tsgr),
            _ => None,
        }
    }
}

/// Architecture description. `hidden` is the stack of internal widths:
/// for [`RecognizerKind::UDeepGru`] the first entry is the dense feature
/// layer and the rest are recurrent widths; for [`RecognizerKind::Tsgr`]
/// every entry is a shift-node width. A final dense classifier over the
/// 19 classes (18 gestures + non-gesture) is always appended.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerConfig {
    pub kind: RecognizerKind,
    pub recipe: FrameRecipe,
    pub hidden: Vec<usize>,
    /// Focusing exponent of the focal loss.
    pub gamma: f64,
    /// Weight-initialization seed.
    pub seed: u64,
}

impl RecognizerConfig {
    pub fn udeepgru(seed: u64) -> RecognizerConfig {
        RecognizerConfig {
            kind: RecognizerKind::UDeepGru,
            recipe: FrameRecipe::PosSpeedAccel,
            hidden: vec![128, 128, 128, 64],
            gamma: 1.0,
            seed,
        }
    }

    pub fn tsgr(seed: u64) -> RecognizerConfig {
        RecognizerConfig {
            kind: RecognizerKind::Tsgr,
            recipe: FrameRecipe::PosSpeedAccel,
            hidden: vec![128, 128, 128, 128],
            gamma: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min_hidden = match self.kind {
            RecognizerKind::UDeepGru => 2,
            RecognizerKind::Tsgr => 1,
        };
        if self.hidden.len() < min_hidden || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::Invalid(format!(
                "{} needs at least {min_hidden} non-zero hidden widths",
                self.kind.name()
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Invalid("gamma must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Builds a freshly initialized network for this architecture.
    pub fn build_network(&self) -> Result<Network> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut layers = Vec::new();
        let mut width = self.recipe.width();
        match self.kind {
            RecognizerKind::UDeepGru => {
                layers.push(Layer::Dense(Dense::new(
                    width,
                    self.hidden[0],
                    true,
                    Activation::Tanh,
                    &mut rng,
                )));
                width = self.hidden[0];
                for &h in &self.hidden[1..] {
                    layers.push(Layer::Gru(GruCell::new(width, h, &mut rng)));
                    width = h;
                }
            }
            RecognizerKind::Tsgr => {
                for (i, &h) in self.hidden.iter().enumerate() {
                    let act = if i == 0 { Activation::Tanh } else { Activation::Relu };
                    layers.push(Layer::Shift(ShiftNode::new(width, h, act, &mut rng)));
                    width = h;
                }
            }
        }
        layers.push(Layer::Dense(Dense::new(
            width,
            CLASS_COUNT,
            true,
            Activation::Identity,
            &mut rng,
        )));
        Network::new(layers)
    }
}

/// Knobs of the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainProtocol {
    pub lr: f64,
    pub batch_size: usize,
    /// Longer training sequences are split into chunks of at most this
    /// many frames.
    pub max_chunk: usize,
    /// Sequences withheld for per-epoch validation.
    pub validation_sequences: usize,
    pub epochs: usize,
    /// Stop early after this many epochs without a validation-F1
    /// improvement.
    pub patience: usize,
    /// Fraction of the (non-validation) training sequences actually
    /// used; ensemble members train on seeded random subsets.
    pub portion: f64,
    /// Uniform positional jitter in millimetres applied once to the
    /// training sequences; 0 disables augmentation (the default — it
    /// was found to hurt).
    pub jitter_mm: f64,
    /// Seed for the split, the portion draw, shuffling and jitter.
    pub seed: u64,
}

impl Default for TrainProtocol {
    fn default() -> TrainProtocol {
        TrainProtocol {
            lr: 2e-4,
            batch_size: 10,
            max_chunk: 256,
            validation_sequences: 6,
            epochs: 30,
            patience: 5,
            portion: 1.0,
            jitter_mm: 0.0,
            seed: 0,
        }
    }
}

impl TrainProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Invalid("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_chunk == 0 || self.epochs == 0 {
            return Err(Error::Invalid(
                "batch size, chunk length and epochs must be positive".into(),
            ));
        }
        if self.validation_sequences == 0 {
            return Err(Error::Invalid("validation sequence count must be positive".into()));
        }
        if !(self.portion > 0.0 && self.portion <= 1.0) {
            return Err(Error::Invalid("portion must be in (0, 1]".into()));
        }
        if !(self.jitter_mm.is_finite() && self.jitter_mm >= 0.0) {
            return Err(Error::Invalid("jitter must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Per-frame class labels for a sequence: frames inside a span carry its
/// class, everything else is `NonGesture`. Later spans overwrite earlier
/// ones where they overlap.
pub fn spans_to_frame_labels(seq_len: usize, spans: &[AnnotationSpan]) -> Vec<GestureClass> {
    let mut labels = vec![GestureClass::NonGesture; seq_len];
    for span in spans {
        for frame in span.start_frame..=span.end_frame.min(seq_len.saturating_sub(1)) {
            labels[frame] = span.label;
        }
    }
    labels
}

/// Maximal runs of one gesture class become spans; inverse of
/// [`spans_to_frame_labels`] for sorted, non-adjacent spans.
pub fn frame_labels_to_spans(labels: &[GestureClass], sequence_id: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut run_start = 0usize;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[run_start] {
            if labels[run_start].is_gesture() {
                spans.push(Span::new(sequence_id, labels[run_start], run_start, i - 1));
            }
            run_start = i;
        }
    }
    spans
}

/// A trained recognizer: frozen network plus everything needed to
/// reproduce its input pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRecognizer {
    pub config: RecognizerConfig,
    pub stats: FeatureStats,
    pub net: Network,
    /// How this member's training subset was drawn.
    pub portion: f64,
    pub portion_seed: u64,
    /// Validation macro-F1 of the checkpointed epoch.
    pub best_f1: f64,
}

fn annotations_for<'a>(spans: &'a [AnnotationSpan], id: &str) -> Vec<&'a AnnotationSpan> {
    spans.iter().filter(|s| s.sequence_id == id).collect()
}

fn feature_rows(seq: &SkeletonSequence, recipe: FrameRecipe) -> Result<Vec<Vec<f64>>> {
    window_vectors(&seq.frames, recipe)
}

fn rows_to_mat(mut rows: Vec<Vec<f64>>, stats: &FeatureStats) -> Mat {
    for row in rows.iter_mut() {
        stats.apply(row);
    }
    Mat::from_rows(&rows)
}

/// Splits one labeled sequence into consecutive chunks of at most
/// `max_chunk` frames.
fn chunk_labeled(x: Mat, labels: Vec<usize>, max_chunk: usize) -> Vec<(Mat, Vec<usize>)> {
    if x.rows <= max_chunk {
        return vec![(x, labels)];
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < x.rows {
        let end = (start + max_chunk).min(x.rows);
        let rows: Vec<Vec<f64>> = (start..end).map(|t| x.row(t).to_vec()).collect();
        out.push((Mat::from_rows(&rows), labels[start..end].to_vec()));
        start = end;
    }
    out
}

/// Frame-level macro-F1 over the 18 gesture classes. A class absent
/// from both the references and the predictions counts as perfectly
/// handled (F1 = 1); one present on either side scores the usual
/// 2·tp / (2·tp + fp + fn).
pub fn macro_f1(reference: &[Vec<GestureClass>], predicted: &[Vec<GestureClass>]) -> f64 {
    let mut tp = [0usize; GESTURE_CLASS_COUNT];
    let mut fp = [0usize; GESTURE_CLASS_COUNT];
    let mut fn_ = [0usize; GESTURE_CLASS_COUNT];
    for (refs, preds) in reference.iter().zip(predicted) {
        for (&r, &p) in refs.iter().zip(preds) {
            if r == p {
                if r.is_gesture() {
                    tp[r.ordinal()] += 1;
                }
            } else {
                if r.is_gesture() {
                    fn_[r.ordinal()] += 1;
                }
                if p.is_gesture() {
                    fp[p.ordinal()] += 1;
                }
            }
        }
    }
    let mut sum = 0.0;
    for c in 0..GESTURE_CLASS_COUNT {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        sum += if denom == 0 { 1.0 } else { 2.0 * tp[c] as f64 / denom as f64 };
    }
    sum / GESTURE_CLASS_COUNT as f64
}

/// Argmax over a 19-probability row with ties broken toward
/// `NonGesture`, then toward the lowest class ordinal.
pub fn argmax_label(probs: &[f64]) -> GestureClass {
    let mut best = GestureClass::NonGesture.ordinal();
    for j in 0..CLASS_COUNT - 1 {
        if probs[j] > probs[best] {
            best = j;
        }
    }
    GestureClass::from_ordinal(best).expect("ordinal in range")
}

fn softmax_rows(logits: &Mat) -> Vec<Vec<f64>> {
    (0..logits.rows)
        .map(|t| crate::net::loss::softmax(logits.row(t)))
        .collect()
}

/// Trains one recognizer. Withholds `validation_sequences` seeded-random
/// sequences, fits feature statistics on the training frames only,
/// optimizes the focal loss with Adam over shuffled chunked mini-batches
/// and returns the epoch checkpoint with the best validation macro-F1.
pub fn train_recognizer(
    config: &RecognizerConfig,
    protocol: &TrainProtocol,
    sequences: &[SkeletonSequence],
    annotations: &[AnnotationSpan],
) -> Result<TrainedRecognizer> {
    config.validate()?;
    protocol.validate()?;
    let need = protocol.validation_sequences + 1;
    if sequences.len() < need {
        return Err(Error::TooFewSequences {
            need,
            got: sequences.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    order.shuffle(&mut rng);
    let (val_idx, train_pool) = order.split_at(protocol.validation_sequences);
    // Seeded portion of the remaining pool (ensemble members differ here).
    let take = ((protocol.portion * train_pool.len() as f64).ceil() as usize)
        .clamp(1, train_pool.len());
    let train_idx = &train_pool[..take];

    // Assemble labeled training chunks in raw feature space first so the
    // statistics can be fitted on exactly the training frames.
    let mut raw_rows: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut raw_labels: Vec<Vec<usize>> = Vec::new();
    for &i in train_idx {
        let seq = &sequences[i];
        let mut frames = seq.frames.clone();
        if protocol.jitter_mm > 0.0 {
            for f in frames.iter_mut() {
                for p in f.positions.iter_mut() {
                    for v in p.iter_mut() {
                        *v += rng.gen_range(-protocol.jitter_mm..=protocol.jitter_mm);
                    }
                }
            }
        }
        let jittered = SkeletonSequence {
            id: seq.id.clone(),
            frames,
            frame_rate_hz: seq.frame_rate_hz,
        };
        let rows = feature_rows(&jittered, config.recipe)?;
        let spans: Vec<AnnotationSpan> = annotations_for(annotations, &seq.id)
            .into_iter()
            .cloned()
            .collect();
        let labels: Vec<usize> = spans_to_frame_labels(seq.len(), &spans)
            .iter()
            .map(|c| c.ordinal())
            .collect();
        raw_rows.push(rows);
        raw_labels.push(labels);
    }
    let all_rows: Vec<&[f64]> = raw_rows
        .iter()
        .flat_map(|rs| rs.iter().map(|r| r.as_slice()))
        .collect();
    let stats = FeatureStats::fit(&all_rows)?;

    let mut chunks: Vec<(Mat, Vec<usize>)> = Vec::new();
    for (rows, labels) in raw_rows.into_iter().zip(raw_labels) {
        let x = rows_to_mat(rows, &stats);
        chunks.extend(chunk_labeled(x, labels, protocol.max_chunk));
    }

    // Validation inputs and references, fixed for the whole run.
    let mut val_inputs: Vec<Mat> = Vec::new();
    let mut val_refs: Vec<Vec<GestureClass>> = Vec::new();
    for &i in val_idx {
        let seq = &sequences[i];
        val_inputs.push(rows_to_mat(feature_rows(seq, config.recipe)?, &stats));
        let spans: Vec<AnnotationSpan> = annotations_for(annotations, &seq.id)
            .into_iter()
            .cloned()
            .collect();
        val_refs.push(spans_to_frame_labels(seq.len(), &spans));
    }

    let mut net = config.build_network()?;
    let mut adam = Adam::new(AdamConfig::with_lr(protocol.lr));
    let mut best: Option<(Network, f64)> = None;
    let mut stale_epochs = 0usize;

    for _epoch in 0..protocol.epochs {
        chunks.shuffle(&mut rng);
        for batch in chunks.chunks(protocol.batch_size) {
            train_step(&mut net, batch, config.gamma, &mut adam)?;
        }

        let logits = net.forward_infer(&val_inputs)?;
        let predicted: Vec<Vec<GestureClass>> = logits
            .iter()
            .map(|l| softmax_rows(l).iter().map(|p| argmax_label(p)).collect())
            .collect();
        let f1 = macro_f1(&val_refs, &predicted);
        let improved = best.as_ref().map_or(true, |(_, b)| f1 > *b);
        if improved {
            best = Some((net.clone(), f1));
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= protocol.patience {
                break;
            }
        }
    }

    let (net, best_f1) = best.expect("at least one epoch ran");
    Ok(TrainedRecognizer {
        config: config.clone(),
        stats,
        net,
        portion: protocol.portion,
        portion_seed: protocol.seed,
        best_f1,
    })
}

impl TrainedRecognizer {
    /// Per-frame class probabilities for a sequence. Causal: frame t's
    /// row depends only on frames 0..=t.
    pub fn predict_probabilities(&self, seq: &SkeletonSequence) -> Result<Vec<Vec<f64>>> {
        let x = rows_to_mat(feature_rows(seq, self.config.recipe)?, &self.stats);
        let logits = self.net.forward_infer(std::slice::from_ref(&x))?;
        Ok(softmax_rows(&logits[0]))
    }

    /// Per-frame labels and probabilities.
    pub fn predict_stream(
        &self,
        seq: &SkeletonSequence,
    ) -> Result<(Vec<GestureClass>, Vec<Vec<f64>>)> {
        let probs = self.predict_probabilities(seq)?;
        let labels = probs.iter().map(|p| argmax_label(p)).collect();
        Ok((labels, probs))
    }
}

/// Averages member probabilities per frame, then takes the tie-broken
/// argmax. Members may use different architectures and recipes but must
/// agree on the class set.
pub fn ensemble_predict(
    members: &[TrainedRecognizer],
    seq: &SkeletonSequence,
) -> Result<(Vec<GestureClass>, Vec<Vec<f64>>)> {
    if members.is_empty() {
        return Err(Error::Invalid("ensemble needs at least one member".into()));
    }
    if members.iter().any(|m| m.net.out_width() != CLASS_COUNT) {
        return Err(Error::HeterogeneousEnsemble);
    }
    let mut mean: Vec<Vec<f64>> = vec![vec![0.0; CLASS_COUNT]; seq.len()];
    for member in members {
        let probs = member.predict_probabilities(seq)?;
        for (acc, p) in mean.iter_mut().zip(&probs) {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
    }
    let scale = 1.0 / members.len() as f64;
    for row in mean.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    let labels = mean.iter().map(|p| argmax_label(p)).collect();
    Ok((labels, mean))
}

// --- bundle serialization -----------------------------------------------

pub const BUNDLE_MAGIC: &str = "skelgest-bundle-v1";

fn push_values(out: &mut String, key: &str, v: &[f64]) {
    out.push_str(key);
    out.push('=');
    out.push_str(&v.len().to_string());
    out.push(';');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{x}"));
    }
    out.push('\n');
}

/// Single-file serialization of a trained recognizer: architecture,
/// normalization statistics, training-subset record and the embedded
/// network checkpoint.
pub fn bundle_to_string(rec: &TrainedRecognizer) -> String {
    let mut s = String::new();
    s.push_str(BUNDLE_MAGIC);
    s.push('\n');
    s.push_str(&format!("kind={}\n", rec.config.kind.name()));
    s.push_str(&format!("recipe={}\n", rec.config.recipe.name()));
    let widths: Vec<String> = rec.config.hidden.iter().map(|w| w.to_string()).collect();
    s.push_str(&format!("hidden={}\n", widths.join(",")));
    s.push_str(&format!("gamma={}\n", rec.config.gamma));
    s.push_str(&format!("seed={}\n", rec.config.seed));
    s.push_str(&format!("portion={}\n", rec.portion));
    s.push_str(&format!("portion_seed={}\n", rec.portion_seed));
    s.push_str(&format!("best_f1={}\n", rec.best_f1));
    push_values(&mut s, "stats_mean", &rec.stats.mean);
    push_values(&mut s, "stats_std", &rec.stats.std);
    s.push_str(&checkpoint_to_string(&rec.net));
    s
}

fn take_kv<'a>(line: Option<(usize, &'a str)>, key: &str, path: &str) -> Result<(usize, &'a str)> {
    let (lno, line) = line.ok_or_else(|| Error::parse(path, 0, format!("missing {key}")))?;
    let v = line
        .strip_prefix(key)
        .and_then(|l| l.strip_prefix('='))
        .ok_or_else(|| Error::parse(path, lno, format!("expected {key}=<value>")))?;
    Ok((lno, v))
}

fn parse_values(decl: &str, expect_len: usize, path: &str, lno: usize) -> Result<Vec<f64>> {
    let (len_s, body) = decl
        .split_once(';')
        .ok_or_else(|| Error::parse(path, lno, "expected <len>;<values>"))?;
    let len: usize = len_s
        .parse()
        .map_err(|_| Error::parse(path, lno, format!("bad length {len_s:?}")))?;
    if len != expect_len {
        return Err(Error::parse(
            path,
            lno,
            format!("expected {expect_len} values, header says {len}"),
        ));
    }
    let mut out = Vec::with_capacity(len);
    if !body.is_empty() {
        for field in body.split(',') {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(path, lno, format!("bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lno, "non-finite value"));
            }
            if out.len() == len {
                return Err(Error::parse(path, lno, "too many values"));
            }
            out.push(v);
        }
    }
    if out.len() != len {
        return Err(Error::parse(path, lno, format!("{} of {len} values", out.len())));
    }
    Ok(out)
}

/// Parses a bundle produced by [`bundle_to_string`]; rejects anything
/// inconsistent and never panics on arbitrary input.
pub fn bundle_from_string(text: &str, path: &str) -> Result<TrainedRecognizer> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, magic) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty bundle"))?;
    if magic != BUNDLE_MAGIC {
        return Err(Error::parse(path, 1, format!("bad magic {magic:?}")));
    }
    let (lno, kind) = take_kv(lines.next(), "kind", path)?;
    let kind = RecognizerKind::from_name(kind)
        .ok_or_else(|| Error::parse(path, lno, format!("unknown kind {kind:?}")))?;
    let (lno, recipe) = take_kv(lines.next(), "recipe", path)?;
    let recipe = FrameRecipe::from_name(recipe)
        .ok_or_else(|| Error::parse(path, lno, format!("unknown recipe {recipe:?}")))?;
    let (lno, hidden) = take_kv(lines.next(), "hidden", path)?;
    let hidden: Vec<usize> = hidden
        .split(',')
        .map(|w| w.parse().map_err(|_| Error::parse(path, lno, format!("bad width {w:?}"))))
        .collect::<Result<_>>()?;
    if hidden.len() > 64 || hidden.iter().any(|&w| w == 0 || w > 4096) {
        return Err(Error::parse(path, lno, "hidden widths out of range"));
    }
    let (lno, gamma) = take_kv(lines.next(), "gamma", path)?;
    let gamma: f64 = gamma
        .parse()
        .map_err(|_| Error::parse(path, lno, format!("bad gamma {gamma:?}")))?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::parse(path, lno, "gamma out of range"));
    }
    let (lno, seed) = take_kv(lines.next(), "seed", path)?;
    let seed: u64 = seed
        .parse()
        .map_err(|_| Error::parse(path, lno, format!("bad seed {seed:?}")))?;
    let (lno, portion) = take_kv(lines.next(), "portion", path)?;
    let portion: f64 = portion
        .parse()
        .map_err(|_| Error::parse(path, lno, format!("bad portion {portion:?}")))?;
    if !(portion > 0.0 && portion <= 1.0) {
        return Err(Error::parse(path, lno, "portion out of range"));
    }
    let (lno, portion_seed) = take_kv(lines.next(), "portion_seed", path)?;
    let portion_seed: u64 = portion_seed
        .parse()
        .map_err(|_| Error::parse(path, lno, format!("bad portion_seed {portion_seed:?}")))?;
    let (lno, best_f1) = take_kv(lines.next(), "best_f1", path)?;
    let best_f1: f64 = best_f1
        .parse()
        .map_err(|_| Error::parse(path, lno, format!("bad best_f1 {best_f1:?}")))?;
    if !best_f1.is_finite() {
        return Err(Error::parse(path, lno, "best_f1 out of range"));
    }

    let width = recipe.width();
    let (lno, mean_decl) = take_kv(lines.next(), "stats_mean", path)?;
    let mean = parse_values(mean_decl, width, path, lno)?;
    let (lno, std_decl) = take_kv(lines.next(), "stats_std", path)?;
    let std = parse_values(std_decl, width, path, lno)?;

    // The rest of the file is the embedded network checkpoint.
    let rest_start = lines
        .next()
        .ok_or_else(|| Error::parse(path, 0, "missing network checkpoint"))?;
    if rest_start.1 != crate::net::CHECKPOINT_MAGIC {
        return Err(Error::parse(path, rest_start.0, "expected network checkpoint"));
    }
    let mut checkpoint = String::new();
    checkpoint.push_str(crate::net::CHECKPOINT_MAGIC);
    checkpoint.push('\n');
    for (_, line) in lines {
        checkpoint.push_str(line);
        checkpoint.push('\n');
    }
    let net = checkpoint_from_string(&checkpoint, path)?;

    let config = RecognizerConfig {
        kind,
        recipe,
        hidden,
        gamma,
        seed,
    };
    config.validate().map_err(|e| Error::parse(path, 0, e.to_string()))?;
    // The embedded network must really be this architecture.
    let expect = config.build_network().map_err(|e| Error::parse(path, 0, e.to_string()))?;
    if expect.layers.len() != net.layers.len()
        || expect
            .layers
            .iter()
            .zip(&net.layers)
            .any(|(a, b)| std::mem::discriminant(a) != std::mem::discriminant(b))
        || expect.in_width() != net.in_width()
        || net.out_width() != CLASS_COUNT
        || expect
            .layers
            .iter()
            .zip(&net.layers)
            .any(|(a, b)| a.in_width() != b.in_width() || a.out_width() != b.out_width())
    {
        return Err(Error::parse(path, 0, "checkpoint does not match declared architecture"));
    }
    Ok(TrainedRecognizer {
        config,
        stats: FeatureStats { mean, std },
        net,
        portion,
        portion_seed,
        best_f1,
    })
}

pub fn save_bundle(path: &std::path::Path, rec: &TrainedRecognizer) -> Result<()> {
    std::fs::write(path, bundle_to_string(rec))?;
    Ok(())
}

pub fn load_bundle(path: &std::path::Path) -> Result<TrainedRecognizer> {
    let text = std::fs::read_to_string(path)?;
    bundle_from_string(&text, &path.display().to_string())
}
