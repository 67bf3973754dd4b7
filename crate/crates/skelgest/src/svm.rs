//! Per-class binary linear SVMs over dissimilarity vectors, trained by
//! seeded subgradient descent on the L2-regularized hinge loss, plus
//! the stride-6 sliding-window online detector with its merge rule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dissim::{
    dissimilarity_vector_features, GestureDictionary, WindowFeatures, RESAMPLE_STEPS,
};
use crate::error::{Error, Result};
use crate::features::FeatureStats;
use crate::model::{
    crop_window, resample_window, DetectionEvent, GestureClass, SkeletonSequence, Span,
};

/// Sliding-window sampling step, in frames.
pub const DETECT_STRIDE: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub class: GestureClass,
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// L2 regularization strength.
    pub reg: f64,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> SvmTrainConfig {
        SvmTrainConfig {
            epochs: 200,
            lr: 0.1,
            reg: 1e-3,
            seed: 0,
        }
    }
}

impl SvmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) || !(self.reg.is_finite() && self.reg >= 0.0) {
            return Err(Error::Invalid("lr must be positive and reg non-negative".into()));
        }
        Ok(())
    }
}

/// Trains one binary hinge classifier. Features are standardized
/// internally (fitted on this training set) and the scaling is folded
/// back into the returned weights, so `decision` applies to raw
/// features. Positives are up-weighted by the class imbalance ratio.
pub fn train_binary(
    xs: &[Vec<f64>],
    positive: &[bool],
    config: &SvmTrainConfig,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    config.validate()?;
    if xs.is_empty() || xs.len() != positive.len() {
        return Err(Error::Invalid("empty or mismatched training set".into()));
    }
    let dim = xs[0].len();
    if xs.iter().any(|x| x.len() != dim) {
        return Err(Error::Invalid("inconsistent feature widths".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = xs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Invalid("need both positive and negative examples".into()));
    }
    let pos_weight = n_neg as f64 / n_pos as f64;

    let stats = FeatureStats::fit(xs)?;
    let scaled: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let mut row = x.clone();
            stats.apply(&mut row);
            row
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 0..config.epochs {
        let lr = config.lr / (1.0 + epoch as f64 * 0.05);
        order.shuffle(&mut rng);
        for &i in &order {
            let y = if positive[i] { 1.0 } else { -1.0 };
            let cw = if positive[i] { pos_weight } else { 1.0 };
            let margin = y * (w.iter().zip(&scaled[i]).map(|(a, v)| a * v).sum::<f64>() + b);
            for (wj, &vj) in w.iter_mut().zip(&scaled[i]) {
                let hinge = if margin < 1.0 { y * cw * vj } else { 0.0 };
                *wj += lr * (hinge - config.reg * *wj);
            }
            if margin < 1.0 {
                b += lr * y * cw;
            }
        }
    }

    // Fold the standardization back: decision on raw x must equal the
    // decision the trained weights made on (x − mean) / std.
    let mut raw_w = vec![0.0; dim];
    let mut raw_b = b;
    for j in 0..dim {
        let s = if stats.std[j] > crate::features::EPS_VAR {
            stats.std[j]
        } else {
            1.0
        };
        raw_w[j] = w[j] / s;
        raw_b -= w[j] * stats.mean[j] / s;
    }
    Ok((raw_w, raw_b))
}

/// Trains the 18 per-class SVMs on the dictionary's training remainder
/// (positives: that class; negatives: every other entry, including the
/// non-gesture crops).
pub fn train_svms(dict: &GestureDictionary, config: &SvmTrainConfig) -> Result<Vec<LinearSvmModel>> {
    config.validate()?;
    let vectors: Vec<(GestureClass, Vec<f64>)> = dict
        .training
        .iter()
        .map(|e| {
            (
                e.class,
                dissimilarity_vector_features(&WindowFeatures::from_window(&e.window), dict),
            )
        })
        .collect();

    let mut models = Vec::with_capacity(GestureClass::GESTURES.len());
    for class in GestureClass::GESTURES {
        let positive: Vec<bool> = vectors.iter().map(|(c, _)| *c == class).collect();
        if !positive.iter().any(|&p| p) {
            return Err(Error::MissingClass(class.name().to_string()));
        }
        // An empty negative pool (single-class training set) is caught
        // inside train_binary.
        let xs: Vec<Vec<f64>> = vectors.iter().map(|(_, v)| v.clone()).collect();
        let (weights, bias) = train_binary(
            &xs,
            &positive,
            config,
            config.seed.wrapping_add(class.ordinal() as u64),
        )?;
        models.push(LinearSvmModel {
            class,
            bias,
            weights,
        });
    }
    Ok(models)
}

// --- model serialization ------------------------------------------------

const MAX_SVM_WEIGHTS: usize = 1 << 20;

/// One `class;bias;w0,w1,…` line per model.
pub fn models_to_string(models: &[LinearSvmModel]) -> String {
    let mut s = String::new();
    for m in models {
        s.push_str(m.class.name());
        s.push(';');
        s.push_str(&format!("{}", m.bias));
        s.push(';');
        for (i, w) in m.weights.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format!("{w}"));
        }
        s.push('\n');
    }
    s
}

/// Parses [`models_to_string`] output: unique gesture classes, finite
/// numbers, one consistent weight length. Never panics on bad input.
pub fn models_from_string(text: &str, path: &str) -> Result<Vec<LinearSvmModel>> {
    let mut models: Vec<LinearSvmModel> = Vec::new();
    for (lno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, ';');
        let class_name = parts.next().unwrap_or("");
        let class = GestureClass::from_name(class_name)
            .filter(|c| c.is_gesture())
            .ok_or_else(|| Error::parse(path, lno, format!("unknown class {class_name:?}")))?;
        if models.iter().any(|m| m.class == class) {
            return Err(Error::parse(path, lno, format!("duplicate class {class}")));
        }
        let bias_s = parts
            .next()
            .ok_or_else(|| Error::parse(path, lno, "missing bias"))?;
        let bias: f64 = bias_s
            .parse()
            .map_err(|_| Error::parse(path, lno, format!("bad bias {bias_s:?}")))?;
        if !bias.is_finite() {
            return Err(Error::parse(path, lno, "non-finite bias"));
        }
        let body = parts
            .next()
            .ok_or_else(|| Error::parse(path, lno, "missing weights"))?;
        let mut weights = Vec::new();
        for field in body.split(',') {
            let w: f64 = field
                .parse()
                .map_err(|_| Error::parse(path, lno, format!("bad weight {field:?}")))?;
            if !w.is_finite() {
                return Err(Error::parse(path, lno, "non-finite weight"));
            }
            if weights.len() == MAX_SVM_WEIGHTS {
                return Err(Error::parse(path, lno, "too many weights"));
            }
            weights.push(w);
        }
        if let Some(first) = models.first() {
            if first.weights.len() != weights.len() {
                return Err(Error::parse(path, lno, "inconsistent weight lengths"));
            }
        }
        models.push(LinearSvmModel {
            class,
            bias,
            weights,
        });
    }
    if models.is_empty() {
        return Err(Error::parse(path, 0, "no models in file"));
    }
    Ok(models)
}

pub fn save_models(path: &std::path::Path, models: &[LinearSvmModel]) -> Result<()> {
    std::fs::write(path, models_to_string(models))?;
    Ok(())
}

pub fn load_models(path: &std::path::Path) -> Result<Vec<LinearSvmModel>> {
    let text = std::fs::read_to_string(path)?;
    models_from_string(&text, &path.display().to_string())
}

// --- baseline bundle ----------------------------------------------------

/// First line of a serialized baseline detector (dictionary + SVMs).
pub const BASELINE_MAGIC: &str = "skelgest-baseline-v1";

/// Everything the sliding-window detector needs: the dissimilarity
/// dictionary and one trained SVM per class.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub dict: GestureDictionary,
    pub models: Vec<LinearSvmModel>,
}

impl BaselineModel {
    /// Checks that the SVMs fit the dictionary: weight lengths match
    /// the dissimilarity vector and every class has a window length.
    pub fn validate(&self) -> Result<()> {
        let expect = self.dict.vector_len();
        for m in &self.models {
            if m.weights.len() != expect {
                return Err(Error::Invalid(format!(
                    "model {} has {} weights, dictionary produces {expect}",
                    m.class,
                    m.weights.len()
                )));
            }
            self.dict.class_length(m.class)?;
        }
        Ok(())
    }
}

/// Serializes a baseline detector: the magic line, a `[svm]` section in
/// the [`models_to_string`] format, then a `[dict]` section in the
/// dictionary format.
pub fn baseline_to_string(model: &BaselineModel) -> String {
    let mut s = String::new();
    s.push_str(BASELINE_MAGIC);
    s.push_str("\n[svm]\n");
    s.push_str(&models_to_string(&model.models));
    s.push_str("[dict]\n");
    s.push_str(&crate::dissim::dictionary_to_string(&model.dict));
    s
}

/// Parses [`baseline_to_string`] output, validating that the SVMs and
/// dictionary agree. Never panics on arbitrary input.
pub fn baseline_from_string(text: &str, path: &str) -> Result<BaselineModel> {
    let mut lines = text.lines().enumerate();
    let magic = lines
        .by_ref()
        .map(|(i, l)| (i + 1, l.trim()))
        .find(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match magic {
        Some((_, first)) if first == BASELINE_MAGIC => {}
        Some((lineno, first)) => {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {BASELINE_MAGIC:?}, got {first:?}"),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let mut svm_lines: Option<Vec<&str>> = None;
    let mut dict_lines: Option<Vec<&str>> = None;
    for (i, raw) in lines {
        let line = raw.trim();
        match line {
            "[svm]" if svm_lines.is_none() && dict_lines.is_none() => {
                svm_lines = Some(Vec::new());
            }
            "[dict]" if svm_lines.is_some() && dict_lines.is_none() => {
                dict_lines = Some(Vec::new());
            }
            "[svm]" | "[dict]" => {
                return Err(Error::parse(path, i + 1, format!("unexpected {line} section")))
            }
            _ => match (&mut svm_lines, &mut dict_lines) {
                (_, Some(d)) => d.push(raw),
                (Some(s), None) => s.push(raw),
                (None, None) if line.is_empty() || line.starts_with('#') => {}
                (None, None) => {
                    return Err(Error::parse(path, i + 1, "expected [svm] section"))
                }
            },
        }
    }
    let svm_text = svm_lines
        .ok_or_else(|| Error::parse(path, 0, "missing [svm] section"))?
        .join("\n");
    let dict_text = dict_lines
        .ok_or_else(|| Error::parse(path, 0, "missing [dict] section"))?
        .join("\n");
    let model = BaselineModel {
        models: models_from_string(&svm_text, path)?,
        dict: crate::dissim::dictionary_from_string(&dict_text, path)?,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_baseline(path: &std::path::Path, model: &BaselineModel) -> Result<()> {
    std::fs::write(path, baseline_to_string(model))?;
    Ok(())
}

pub fn load_baseline(path: &std::path::Path) -> Result<BaselineModel> {
    let text = std::fs::read_to_string(path)?;
    baseline_from_string(&text, &path.display().to_string())
}

// --- sliding-window detection -------------------------------------------

/// Merges consecutive stride hits `(window-end frame, margin)` of one
/// class into events. k consecutive hits with window length `l` span
/// `l + (k−1)·stride` frames, ending at the last hit.
fn merge_runs(hits: &[(usize, f64)], l: usize, stride: usize) -> Vec<(Span, f64)> {
    let mut out: Vec<(usize, usize, f64)> = Vec::new(); // (first_t, last_t, margin)
    for &(t, margin) in hits {
        match out.last_mut() {
            Some((_, last_t, best)) if t == *last_t + stride => {
                *last_t = t;
                *best = best.max(margin);
            }
            _ => out.push((t, t, margin)),
        }
    }
    out.into_iter()
        .map(|(first_t, last_t, margin)| {
            let span = Span::new("", GestureClass::NonGesture, first_t + 1 - l, last_t);
            (span, margin)
        })
        .collect()
}

/// Scores a window of length `l(c)` ending at every stride-6 position
/// for every model, merges consecutive positives per class, and
/// resolves overlapping events greedily by the largest margin.
pub fn detect_sliding(
    seq: &SkeletonSequence,
    models: &[LinearSvmModel],
    dict: &GestureDictionary,
) -> Result<Vec<DetectionEvent>> {
    let expect_len = dict.vector_len();
    for m in models {
        if m.weights.len() != expect_len {
            return Err(Error::Invalid(format!(
                "model {} has {} weights, dictionary produces {expect_len}",
                m.class,
                m.weights.len()
            )));
        }
    }

    let mut events: Vec<(Span, f64)> = Vec::new();
    for model in models {
        let l = dict.class_length(model.class)?;
        let mut hits: Vec<(usize, f64)> = Vec::new();
        let mut t = 0usize;
        while t < seq.len() {
            if t + 1 >= l {
                let window = crop_window(seq, t + 1 - l, l)?;
                let resampled = resample_window(window, RESAMPLE_STEPS)?;
                let features = WindowFeatures::from_window(&resampled);
                let x = dissimilarity_vector_features(&features, dict);
                let margin = model.decision(&x);
                if margin > 0.0 {
                    hits.push((t, margin));
                }
            }
            t += DETECT_STRIDE;
        }
        for (mut span, margin) in merge_runs(&hits, l, DETECT_STRIDE) {
            span.sequence_id = seq.id.clone();
            span.label = model.class;
            events.push((span, margin));
        }
    }

    // Greedy conflict resolution by margin: an event survives only if it
    // overlaps no stronger surviving event. Ties resolved by class
    // ordinal then start frame for determinism.
    events.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.label.ordinal().cmp(&b.0.label.ordinal()))
            .then(a.0.start_frame.cmp(&b.0.start_frame))
    });
    let mut kept: Vec<Span> = Vec::new();
    for (span, _) in events {
        if kept.iter().all(|k| k.intersection(&span) == 0) {
            kept.push(span);
        }
    }
    kept.sort_by_key(|s| (s.start_frame, s.label.ordinal()));
    Ok(kept)
}
