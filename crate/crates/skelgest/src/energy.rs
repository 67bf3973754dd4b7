//! Non-learned candidate segmentation from joint-motion energy.
//!
//! A sliding window sweeps the sequence; each window gets an energy
//! score summed over all joints, the discrete time derivative of that
//! profile picks out local maxima, and a 200-frame segment around each
//! maximum is handed to a pluggable classifier. Segments that look like
//! non-gestures (or like nothing in particular) are filtered by the
//! `alpha`/`beta` confidence thresholds.

use crate::error::{Error, Result};
use crate::model::{
    DetectionEvent, GestureClass, HandFrame, SkeletonSequence, Span, CLASS_COUNT,
};
use crate::recognizers::TrainedRecognizer;

/// Positions are translated by this many millimetres on every axis
/// before ratio energies are computed, so that coordinates are bounded
/// away from zero and the per-axis ratios stay well-conditioned.
pub const ENERGY_OFFSET_MM: f64 = 500.0;

/// Floor applied to ratio denominators that still end up near zero.
pub const EPS_DIV: f64 = 1e-6;

/// Default sliding-window length in frames.
pub const DEFAULT_ENERGY_WINDOW: usize = 40;

/// Default sliding-window stride in frames.
pub const DEFAULT_ENERGY_STRIDE: usize = 10;

/// Default classified-segment length in frames.
pub const DEFAULT_SEGMENT_LENGTH: usize = 200;

/// When no explicit flatness bound is given, use this fraction of the
/// largest |dE| in the sequence.
pub const FLATNESS_FRACTION: f64 = 0.05;

/// Fraction of the segment's peak per-frame energy a frame must exceed
/// to be kept when event bounds are trimmed to the motion burst.
pub const TRIM_FRACTION: f64 = 0.05;

/// How a step between consecutive frames is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMode {
    /// Per-axis coordinate ratios: sqrt(sum_axis (p_t/p_{t-1} - 1)^2).
    /// Sensitive to absolute position, hence the `ENERGY_OFFSET_MM`
    /// translation applied by [`energy_profile`].
    CoordinateRatio,
    /// Plain Euclidean displacement |p_t - p_{t-1}| per joint, provided
    /// as a translation-invariant alternative for comparison.
    DisplacementNorm,
}

impl EnergyMode {
    pub fn name(self) -> &'static str {
        match self {
            EnergyMode::CoordinateRatio => "ratio",
            EnergyMode::DisplacementNorm => "displacement",
        }
    }

    pub fn from_name(s: &str) -> Option<EnergyMode> {
        match s {
            "ratio" => Some(EnergyMode::CoordinateRatio),
            "displacement" => Some(EnergyMode::DisplacementNorm),
            _ => None,
        }
    }
}

/// Windowed energy scores over one sequence.
#[derive(Debug, Clone)]
pub struct EnergyProfile {
    /// First frame of each window, ascending.
    pub window_starts: Vec<usize>,
    pub window_length: usize,
    pub stride: usize,
    /// Energy per window; always non-negative.
    pub e: Vec<f64>,
    /// Central-difference derivative (e[i+1] - e[i-1]) / 2. Defined for
    /// interior windows only; the first and last entries are 0.0
    /// placeholders and never inspected by candidate selection.
    pub delta_e: Vec<f64>,
}

/// Thresholds applied to candidate segments after classification.
#[derive(Debug, Clone)]
pub struct CandidateFilterConfig {
    /// Flatness bound on dE at a candidate window. `None` selects
    /// `FLATNESS_FRACTION` of the sequence's largest |dE|.
    pub epsilon: Option<f64>,
    /// Segments whose non-gesture confidence exceeds this are dropped.
    pub alpha: f64,
    /// Segments whose best gesture confidence falls below this are
    /// dropped.
    pub beta: f64,
    /// Length of the classified segment cropped around each candidate.
    pub segment_length: usize,
}

impl Default for CandidateFilterConfig {
    fn default() -> Self {
        CandidateFilterConfig {
            epsilon: None,
            alpha: 0.5,
            beta: 0.5,
            segment_length: DEFAULT_SEGMENT_LENGTH,
        }
    }
}

impl CandidateFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Invalid(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Invalid(format!("beta must be in [0, 1], got {}", self.beta)));
        }
        if let Some(eps) = self.epsilon {
            if !eps.is_finite() {
                return Err(Error::Invalid(format!("epsilon must be finite, got {eps}")));
            }
        }
        if self.segment_length < 2 {
            return Err(Error::Invalid(format!(
                "segment_length must be at least 2, got {}",
                self.segment_length
            )));
        }
        Ok(())
    }
}

/// Classifies one candidate segment into probabilities over all
/// [`CLASS_COUNT`] classes (gestures plus non-gesture).
pub trait SegmentClassifier {
    fn classify_segment(&self, frames: &[HandFrame]) -> Result<Vec<f64>>;
}

/// A trained frame-labelling network scores a segment with the mean of
/// its per-frame class probabilities.
impl SegmentClassifier for TrainedRecognizer {
    fn classify_segment(&self, frames: &[HandFrame]) -> Result<Vec<f64>> {
        if frames.is_empty() {
            return Err(Error::WindowTooShort { got: 0, need: 1 });
        }
        let seq = SkeletonSequence {
            id: "segment".to_string(),
            frames: frames.to_vec(),
            frame_rate_hz: 0.0,
        };
        let probs = self.predict_probabilities(&seq)?;
        let width = probs[0].len();
        let mut mean = vec![0.0; width];
        for row in &probs {
            for (m, p) in mean.iter_mut().zip(row) {
                *m += *p;
            }
        }
        for m in &mut mean {
            *m /= probs.len() as f64;
        }
        Ok(mean)
    }
}

fn guarded(denom: f64) -> f64 {
    if denom.abs() < EPS_DIV {
        if denom < 0.0 {
            -EPS_DIV
        } else {
            EPS_DIV
        }
    } else {
        denom
    }
}

/// Energy of one step between consecutive frames, summed over joints.
fn step_energy(prev: &HandFrame, cur: &HandFrame, mode: EnergyMode) -> f64 {
    let mut total = 0.0;
    for (p, c) in prev.positions.iter().zip(cur.positions.iter()) {
        let mut sq = 0.0;
        for axis in 0..3 {
            let d = match mode {
                EnergyMode::CoordinateRatio => c[axis] / guarded(p[axis]) - 1.0,
                EnergyMode::DisplacementNorm => c[axis] - p[axis],
            };
            sq += d * d;
        }
        total += sq.sqrt();
    }
    total
}

/// Energy accumulated over a window of frames: the sum of per-step
/// contributions across all joints. Windows shorter than two frames
/// carry no steps and score zero. Positions are used as given; callers
/// feeding ratio mode are expected to keep coordinates away from zero
/// (see [`ENERGY_OFFSET_MM`]).
pub fn window_energy(window: &[HandFrame], mode: EnergyMode) -> f64 {
    window
        .windows(2)
        .map(|pair| step_energy(&pair[0], &pair[1], mode))
        .sum()
}

/// Per-frame energy contributions: entry `t` is the energy of the step
/// from frame `t-1` to frame `t`; entry 0 is 0.
pub fn frame_energies(frames: &[HandFrame], mode: EnergyMode) -> Vec<f64> {
    let mut out = vec![0.0; frames.len()];
    for t in 1..frames.len() {
        out[t] = step_energy(&frames[t - 1], &frames[t], mode);
    }
    out
}

/// Clones frames with every coordinate translated by `offset`.
pub fn shift_positions(frames: &[HandFrame], offset: f64) -> Vec<HandFrame> {
    frames
        .iter()
        .map(|f| {
            let mut shifted = f.clone();
            for p in shifted.positions.iter_mut() {
                for axis in 0..3 {
                    p[axis] += offset;
                }
            }
            shifted
        })
        .collect()
}

/// Central-difference derivative of an energy profile. Boundary entries
/// are 0.0 placeholders; only interior entries are meaningful.
pub fn delta_energy(e: &[f64]) -> Vec<f64> {
    let mut delta = vec![0.0; e.len()];
    for i in 1..e.len().saturating_sub(1) {
        delta[i] = (e[i + 1] - e[i - 1]) / 2.0;
    }
    delta
}

/// Indices of windows that are local maxima of the energy profile:
/// dE(i) < epsilon, dE(i-1) > 0 and dE(i+1) < 0, considering only
/// indices whose neighbours' derivatives are themselves defined.
pub fn select_candidates(delta: &[f64], epsilon: f64) -> Vec<usize> {
    let n = delta.len();
    let mut picks = Vec::new();
    for i in 2..n.saturating_sub(2) {
        if delta[i] < epsilon && delta[i - 1] > 0.0 && delta[i + 1] < 0.0 {
            picks.push(i);
        }
    }
    picks
}

fn profile_from_frame_energies(fe: &[f64], window_length: usize, stride: usize) -> EnergyProfile {
    let mut prefix = vec![0.0; fe.len() + 1];
    for (t, v) in fe.iter().enumerate() {
        prefix[t + 1] = prefix[t] + v;
    }
    let mut window_starts = Vec::new();
    let mut e = Vec::new();
    let mut start = 0;
    while start + window_length <= fe.len() {
        window_starts.push(start);
        // Steps strictly inside the window: frames start+1 .. start+L-1.
        e.push(prefix[start + window_length] - prefix[start + 1]);
        start += stride;
    }
    let delta_e = delta_energy(&e);
    EnergyProfile {
        window_starts,
        window_length,
        stride,
        e,
        delta_e,
    }
}

/// Sliding-window energy profile of a frame run. Positions are first
/// translated by [`ENERGY_OFFSET_MM`] so ratio energies are
/// well-conditioned; displacement energies are unaffected by the shift.
pub fn energy_profile(
    frames: &[HandFrame],
    window_length: usize,
    stride: usize,
    mode: EnergyMode,
) -> Result<EnergyProfile> {
    if window_length < 2 {
        return Err(Error::Invalid(format!(
            "energy window must cover at least 2 frames, got {window_length}"
        )));
    }
    if stride == 0 {
        return Err(Error::Invalid("energy stride must be positive".to_string()));
    }
    let need = window_length + 2 * stride;
    if frames.len() < need {
        return Err(Error::WindowTooShort {
            got: frames.len(),
            need,
        });
    }
    let fe = frame_energies(&shift_positions(frames, ENERGY_OFFSET_MM), mode);
    Ok(profile_from_frame_energies(&fe, window_length, stride))
}

/// Bounds (relative to the segment) of the motion burst: the first and
/// last frame whose energy contribution exceeds `TRIM_FRACTION` of the
/// segment's peak contribution. A flat segment keeps its full bounds.
fn trim_to_burst(fe_segment: &[f64]) -> (usize, usize) {
    let peak = fe_segment.iter().cloned().fold(0.0, f64::max);
    let threshold = TRIM_FRACTION * peak;
    let mut first = None;
    let mut last = 0;
    for (t, &v) in fe_segment.iter().enumerate() {
        if v > threshold {
            if first.is_none() {
                first = Some(t);
            }
            last = t;
        }
    }
    match first {
        Some(f) => (f, last),
        None => (0, fe_segment.len() - 1),
    }
}

/// Runs the full candidate pipeline on one sequence: energy profile,
/// local-maxima selection, segment classification and confidence
/// filtering. Segments the classifier rejects with an error are skipped
/// with a warning. Surviving events are trimmed to the motion burst
/// inside their segment.
pub fn detect_candidates(
    seq: &SkeletonSequence,
    window_length: usize,
    stride: usize,
    filter: &CandidateFilterConfig,
    classifier: &dyn SegmentClassifier,
    mode: EnergyMode,
) -> Result<Vec<DetectionEvent>> {
    let scored = detect_candidates_scored(seq, window_length, stride, filter, classifier, mode)?;
    Ok(scored.into_iter().map(|(event, _)| event).collect())
}

/// Like [`detect_candidates`], but keeps each event's best gesture
/// confidence so downstream refinement can weigh it.
pub fn detect_candidates_scored(
    seq: &SkeletonSequence,
    window_length: usize,
    stride: usize,
    filter: &CandidateFilterConfig,
    classifier: &dyn SegmentClassifier,
    mode: EnergyMode,
) -> Result<Vec<(DetectionEvent, f64)>> {
    filter.validate()?;
    let n = seq.frames.len();
    let shifted = shift_positions(&seq.frames, ENERGY_OFFSET_MM);
    let fe = frame_energies(&shifted, mode);
    let profile = {
        if window_length < 2 {
            return Err(Error::Invalid(format!(
                "energy window must cover at least 2 frames, got {window_length}"
            )));
        }
        if stride == 0 {
            return Err(Error::Invalid("energy stride must be positive".to_string()));
        }
        let need = window_length + 2 * stride;
        if n < need {
            return Err(Error::WindowTooShort { got: n, need });
        }
        profile_from_frame_energies(&fe, window_length, stride)
    };
    let epsilon = filter.epsilon.unwrap_or_else(|| {
        let max_abs = profile
            .delta_e
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max);
        FLATNESS_FRACTION * max_abs
    });
    let segment_length = filter.segment_length.min(n);
    let mut events = Vec::new();
    for i in select_candidates(&profile.delta_e, epsilon) {
        let center = profile.window_starts[i] + window_length / 2;
        let start = center
            .saturating_sub(segment_length / 2)
            .min(n - segment_length);
        let segment = &seq.frames[start..start + segment_length];
        let probs = match classifier.classify_segment(segment) {
            Ok(p) => p,
            Err(err) => {
                log::warn!(
                    "skipping candidate near frame {center} of '{}': {err}",
                    seq.id
                );
                continue;
            }
        };
        if probs.len() != CLASS_COUNT {
            return Err(Error::Invalid(format!(
                "segment classifier returned {} scores, expected {CLASS_COUNT}",
                probs.len()
            )));
        }
        let non_gesture = probs[GestureClass::NonGesture.ordinal()];
        let mut best_class = GestureClass::GESTURES[0];
        let mut best_conf = probs[best_class.ordinal()];
        for class in GestureClass::GESTURES.iter().skip(1) {
            if probs[class.ordinal()] > best_conf {
                best_conf = probs[class.ordinal()];
                best_class = *class;
            }
        }
        if non_gesture > filter.alpha || best_conf < filter.beta {
            continue;
        }
        let (lo, hi) = trim_to_burst(&fe[start..start + segment_length]);
        events.push((
            Span::new(&seq.id, best_class, start + lo, start + hi),
            best_conf,
        ));
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JOINT_COUNT;
    use crate::synth::{synth_generate, SynthConfig};

    fn uniform_frame(value: f64, t: f64) -> HandFrame {
        HandFrame::new([[value; 3]; JOINT_COUNT], t)
    }

    struct ConstantClassifier {
        probs: Vec<f64>,
    }

    impl SegmentClassifier for ConstantClassifier {
        fn classify_segment(&self, _frames: &[HandFrame]) -> Result<Vec<f64>> {
            Ok(self.probs.clone())
        }
    }

    /// Mostly GRAB, a little non-gesture mass, remainder spread evenly.
    fn grab_classifier() -> ConstantClassifier {
        let mut probs = vec![0.2 / 17.0; CLASS_COUNT];
        probs[GestureClass::Grab.ordinal()] = 0.6;
        probs[GestureClass::NonGesture.ordinal()] = 0.2;
        ConstantClassifier { probs }
    }

    struct FailingClassifier;

    impl SegmentClassifier for FailingClassifier {
        fn classify_segment(&self, _frames: &[HandFrame]) -> Result<Vec<f64>> {
            Err(Error::Invalid("deliberately broken".to_string()))
        }
    }

    #[test]
    fn static_hand_away_from_origin_has_zero_energy() {
        let frames: Vec<HandFrame> = (0..8).map(|t| uniform_frame(500.0, t as f64)).collect();
        assert_eq!(window_energy(&frames, EnergyMode::CoordinateRatio), 0.0);
        assert_eq!(window_energy(&frames, EnergyMode::DisplacementNorm), 0.0);
    }

    #[test]
    fn unit_step_matches_hand_arithmetic() {
        // Every joint rests at (1, 1, 1); one joint moves x: 1 -> 2.
        let a = uniform_frame(1.0, 0.0);
        let mut b = uniform_frame(1.0, 1.0);
        b.positions[5][0] = 2.0;
        let window = vec![a, b];
        // Ratio: sqrt((2/1 - 1)^2) = 1. Displacement: |(1, 0, 0)| = 1.
        assert_eq!(window_energy(&window, EnergyMode::CoordinateRatio), 1.0);
        assert_eq!(window_energy(&window, EnergyMode::DisplacementNorm), 1.0);
    }

    #[test]
    fn periodic_motion_energy_adds_over_periods() {
        // One joint oscillates with an exactly repeating 20-step cycle;
        // doubling the number of steps doubles the accumulated energy.
        let frames: Vec<HandFrame> = (0..81)
            .map(|t| {
                let mut f = uniform_frame(500.0, t as f64);
                let phase = (t % 20) as f64 / 20.0 * std::f64::consts::TAU;
                f.positions[7][0] = 500.0 + 10.0 * phase.sin();
                f
            })
            .collect();
        for mode in [EnergyMode::CoordinateRatio, EnergyMode::DisplacementNorm] {
            let one = window_energy(&frames[0..41], mode);
            let two = window_energy(&frames[0..81], mode);
            assert!(one > 0.0);
            assert!(
                (two - 2.0 * one).abs() <= 1e-12 * two,
                "{mode:?}: {two} vs 2 x {one}"
            );
        }
    }

    #[test]
    fn energy_is_invariant_under_joint_permutation() {
        let frames: Vec<HandFrame> = (0..12)
            .map(|t| {
                let mut positions = [[0.0; 3]; JOINT_COUNT];
                for (n, p) in positions.iter_mut().enumerate() {
                    p[0] = 400.0 + 7.0 * n as f64 + 1.3 * t as f64;
                    p[1] = 500.0 - 3.0 * n as f64 + 0.8 * (t * t) as f64 / 10.0;
                    p[2] = 450.0 + ((n * 13 + t * 5) % 17) as f64;
                }
                HandFrame::new(positions, t as f64)
            })
            .collect();
        let permuted: Vec<HandFrame> = frames
            .iter()
            .map(|f| {
                let mut positions = f.positions;
                positions.reverse();
                HandFrame::new(positions, f.timestamp_ms)
            })
            .collect();
        for mode in [EnergyMode::CoordinateRatio, EnergyMode::DisplacementNorm] {
            let a = window_energy(&frames, mode);
            let b = window_energy(&permuted, mode);
            assert!((a - b).abs() < 1e-9 * a.max(1.0), "{mode:?}: {a} vs {b}");
        }
    }

    #[test]
    fn scripted_delta_profile_selects_single_peak() {
        let e = [1.0, 3.0, 5.0, 4.0, 2.0];
        let delta = delta_energy(&e);
        assert_eq!(delta, vec![0.0, 2.0, 0.5, -1.5, 0.0]);
        assert_eq!(select_candidates(&delta, 1.0), vec![2]);
        // Monotonically increasing energy never changes derivative sign.
        let rising: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(select_candidates(&delta_energy(&rising), 1.0).is_empty());
    }

    #[test]
    fn profile_dimensions_and_bounds() {
        let frames: Vec<HandFrame> = (0..200)
            .map(|t| {
                let mut f = uniform_frame(0.0, t as f64);
                f.positions[3][1] = 5.0 * (t as f64 * 0.21).sin();
                f
            })
            .collect();
        let profile =
            energy_profile(&frames, DEFAULT_ENERGY_WINDOW, DEFAULT_ENERGY_STRIDE, EnergyMode::CoordinateRatio)
                .unwrap();
        let starts: Vec<usize> = (0..=160).step_by(10).collect();
        assert_eq!(profile.window_starts, starts);
        assert_eq!(profile.e.len(), 17);
        assert_eq!(profile.delta_e.len(), 17);
        assert!(profile.e.iter().all(|&v| v >= 0.0));
        let err = energy_profile(&frames[0..30], 40, 10, EnergyMode::CoordinateRatio).unwrap_err();
        assert!(matches!(err, Error::WindowTooShort { got: 30, need: 60 }));
    }

    #[test]
    fn displacement_mode_ignores_absolute_position() {
        let near: Vec<HandFrame> = (0..10)
            .map(|t| {
                let mut f = uniform_frame(1.0, t as f64);
                f.positions[0][0] = 1.0 + t as f64;
                f
            })
            .collect();
        let far = shift_positions(&near, 10_000.0);
        let near_d = window_energy(&near, EnergyMode::DisplacementNorm);
        let far_d = window_energy(&far, EnergyMode::DisplacementNorm);
        assert!((near_d - far_d).abs() < 1e-9);
        let near_r = window_energy(&near, EnergyMode::CoordinateRatio);
        let far_r = window_energy(&far, EnergyMode::CoordinateRatio);
        assert!((near_r - far_r).abs() > 1.0, "{near_r} vs {far_r}");
    }

    fn burst_corpus(seed: u64) -> (SkeletonSequence, Vec<Span>) {
        let config = SynthConfig {
            classes: vec!["CIRCLE".into(), "GRAB".into(), "LEFT".into()],
            sequence_count: 1,
            gestures_min: 3,
            gestures_max: 3,
            seed,
            ..SynthConfig::default()
        };
        let (mut seqs, spans) = synth_generate(&config).unwrap();
        (seqs.remove(0), spans)
    }

    #[test]
    fn bursts_are_each_covered_by_a_candidate() {
        let (seq, spans) = burst_corpus(11);
        assert_eq!(spans.len(), 3);
        let filter = CandidateFilterConfig {
            alpha: 1.0,
            beta: 0.0,
            ..CandidateFilterConfig::default()
        };
        let events = detect_candidates(
            &seq,
            DEFAULT_ENERGY_WINDOW,
            DEFAULT_ENERGY_STRIDE,
            &filter,
            &grab_classifier(),
            EnergyMode::CoordinateRatio,
        )
        .unwrap();
        assert!(events.len() >= 3, "only {} events", events.len());
        for event in &events {
            assert!(event.start_frame <= event.end_frame);
            assert!(event.end_frame < seq.len());
        }
        for span in &spans {
            let covered = events.iter().any(|e| e.intersection(span) > 0);
            assert!(covered, "span {span:?} missed by {events:?}");
        }
    }

    #[test]
    fn filter_thresholds_bound_the_event_count() {
        let (seq, _) = burst_corpus(12);
        let classifier = grab_classifier();
        let count = |alpha: f64, beta: f64| {
            let filter = CandidateFilterConfig {
                alpha,
                beta,
                ..CandidateFilterConfig::default()
            };
            detect_candidates(
                &seq,
                DEFAULT_ENERGY_WINDOW,
                DEFAULT_ENERGY_STRIDE,
                &filter,
                &classifier,
                EnergyMode::CoordinateRatio,
            )
            .unwrap()
            .len()
        };
        let open = count(1.0, 0.0);
        assert!(open > 0);
        // The constant classifier scores 0.6 for GRAB and 0.2 for the
        // non-gesture class, so these thresholds keep everything...
        assert_eq!(count(0.5, 0.5), open);
        // ...while a full-strength gesture floor or a zero non-gesture
        // ceiling rejects every candidate.
        assert_eq!(count(1.0, 1.0), 0);
        assert_eq!(count(0.0, 0.0), 0);
    }

    #[test]
    fn classifier_contract_violations_are_handled() {
        let (seq, _) = burst_corpus(13);
        let filter = CandidateFilterConfig {
            alpha: 1.0,
            beta: 0.0,
            ..CandidateFilterConfig::default()
        };
        // Per-segment failures are skipped, yielding an empty result.
        let events = detect_candidates(
            &seq,
            DEFAULT_ENERGY_WINDOW,
            DEFAULT_ENERGY_STRIDE,
            &filter,
            &FailingClassifier,
            EnergyMode::CoordinateRatio,
        )
        .unwrap();
        assert!(events.is_empty());
        // A classifier with the wrong output width is a hard error.
        let short = ConstantClassifier { probs: vec![0.5; 3] };
        let err = detect_candidates(
            &seq,
            DEFAULT_ENERGY_WINDOW,
            DEFAULT_ENERGY_STRIDE,
            &filter,
            &short,
            EnergyMode::CoordinateRatio,
        )
        .unwrap_err();
        assert!(err.to_string().contains("expected 19"), "{err}");
    }
}
