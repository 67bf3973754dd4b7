//! Exhaustive parameter search for the energy-candidate detection
//! pipeline.
//!
//! Every combination drawn from the declared axis ranges is evaluated
//! by running detection plus trajectory refinement over a validation
//! set and scoring the result; the cell with the highest mean Jaccard
//! wins. Enumeration order is fixed (alpha, beta, lambda, epsilon,
//! stride, window, each in declared order) so results are reproducible
//! and ties resolve to the earliest cell.

use rayon::prelude::*;

use crate::energy::{
    detect_candidates_scored, CandidateFilterConfig, EnergyMode, SegmentClassifier,
    DEFAULT_ENERGY_STRIDE, DEFAULT_ENERGY_WINDOW,
};
use crate::error::{Error, Result};
use crate::eval::{match_and_score, sequence_lengths};
use crate::model::{AnnotationSpan, DetectionEvent, SkeletonSequence};
use crate::trajectory::{refine_detections, ClassTemplates, DEFAULT_LAMBDA};

/// Value ranges for each searched axis.
#[derive(Debug, Clone)]
pub struct ParamGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Flatness bounds; `None` means the per-sequence automatic bound.
    pub epsilon: Vec<Option<f64>>,
    pub stride: Vec<usize>,
    pub window: Vec<usize>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        ParamGrid {
            alpha: vec![0.5],
            beta: vec![0.5],
            lambda: vec![DEFAULT_LAMBDA],
            epsilon: vec![None],
            stride: vec![DEFAULT_ENERGY_STRIDE],
            window: vec![DEFAULT_ENERGY_WINDOW],
        }
    }
}

/// One parameter combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub epsilon: Option<f64>,
    pub stride: usize,
    pub window: usize,
}

/// A parameter combination with its validation scores.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub point: GridPoint,
    pub mean_jaccard: f64,
    pub detection_rate: f64,
    pub fp_rate: f64,
}

/// Runs the detection pipeline with one parameter combination over the
/// validation set and scores it. Sequences too short for the requested
/// window simply contribute no events.
pub fn evaluate_point(
    point: GridPoint,
    sequences: &[SkeletonSequence],
    annotations: &[AnnotationSpan],
    classifier: &(dyn SegmentClassifier + Sync),
    templates: &ClassTemplates,
    mode: EnergyMode,
) -> Result<GridCell> {
    let filter = CandidateFilterConfig {
        epsilon: point.epsilon,
        alpha: point.alpha,
        beta: point.beta,
        ..CandidateFilterConfig::default()
    };
    let mut events: Vec<DetectionEvent> = Vec::new();
    for seq in sequences {
        let scored = match detect_candidates_scored(
            seq,
            point.window,
            point.stride,
            &filter,
            classifier,
            mode,
        ) {
            Ok(scored) => scored,
            Err(Error::WindowTooShort { got, need }) => {
                log::warn!("sequence '{}' has {got} frames, below the {need} this cell needs", seq.id);
                Vec::new()
            }
            Err(err) => return Err(err),
        };
        events.extend(refine_detections(seq, &scored, templates, point.lambda)?);
    }
    let report = match_and_score(annotations, &events, &sequence_lengths(sequences))?;
    Ok(GridCell {
        point,
        mean_jaccard: report.mean_jaccard,
        detection_rate: report.mean_detection_rate,
        fp_rate: report.mean_fp_rate,
    })
}

/// Evaluates every combination in the grid and returns the best cell
/// (highest mean Jaccard, earliest on ties) together with the full
/// score table in enumeration order.
pub fn grid_search(
    grid: &ParamGrid,
    sequences: &[SkeletonSequence],
    annotations: &[AnnotationSpan],
    classifier: &(dyn SegmentClassifier + Sync),
    templates: &ClassTemplates,
    mode: EnergyMode,
) -> Result<(GridCell, Vec<GridCell>)> {
    let cells = grid.alpha.len()
        * grid.beta.len()
        * grid.lambda.len()
        * grid.epsilon.len()
        * grid.stride.len()
        * grid.window.len();
    if cells == 0 {
        return Err(Error::EmptyGrid);
    }
    let mut points = Vec::with_capacity(cells);
    for &alpha in &grid.alpha {
        for &beta in &grid.beta {
            for &lambda in &grid.lambda {
                for &epsilon in &grid.epsilon {
                    for &stride in &grid.stride {
                        for &window in &grid.window {
                            points.push(GridPoint {
                                alpha,
                                beta,
                                lambda,
                                epsilon,
                                stride,
                                window,
                            });
                        }
                    }
                }
            }
        }
    }
    // Cells are independent; the collected order still follows the
    // enumeration order, so results are identical to a serial run.
    let table: Vec<GridCell> = points
        .into_par_iter()
        .map(|point| {
            evaluate_point(point, sequences, annotations, classifier, templates, mode)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, cell) in table.iter().enumerate() {
        if cell.mean_jaccard > table[best].mean_jaccard {
            best = i;
        }
    }
    Ok((table[best].clone(), table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GestureClass, HandFrame, Span, CLASS_COUNT};
    use crate::synth::{gesture_pose, rest_pose};
    use crate::trajectory::build_templates_from_dataset;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct ConstantClassifier {
        probs: Vec<f64>,
    }

    impl SegmentClassifier for ConstantClassifier {
        fn classify_segment(&self, _frames: &[HandFrame]) -> Result<Vec<f64>> {
            Ok(self.probs.clone())
        }
    }

    fn circle_classifier() -> ConstantClassifier {
        let mut probs = vec![0.2 / 17.0; CLASS_COUNT];
        probs[GestureClass::Circle.ordinal()] = 0.6;
        probs[GestureClass::NonGesture.ordinal()] = 0.2;
        ConstantClassifier { probs }
    }

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0f64);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    }

    /// Two recordings of slow drift with two long CIRCLE draws each.
    /// Gestures run 160 frames so a 200-frame candidate segment that
    /// covers one clears the IoU > 0.5 matching bar.
    fn validation_corpus() -> (
        Vec<crate::model::SkeletonSequence>,
        Vec<AnnotationSpan>,
        ClassTemplates,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut seqs = Vec::new();
        let mut spans = Vec::new();
        for s in 0..2 {
            let id = format!("clip-{s}");
            let mut frames: Vec<HandFrame> = Vec::new();
            for (is_gesture, len) in [(false, 100), (true, 160), (false, 120), (true, 160), (false, 100)] {
                let start = frames.len();
                for i in 0..len {
                    let t = frames.len();
                    let mut pose = if is_gesture {
                        gesture_pose(GestureClass::Circle, i as f64 / (len - 1) as f64)
                    } else {
                        rest_pose()
                    };
                    let drift_x = 3.0 * (0.037 * t as f64).sin();
                    let drift_y = 2.0 * (0.023 * t as f64 + 1.0).sin();
                    for p in pose.iter_mut() {
                        p[0] += drift_x + 0.5 * gaussian(&mut rng);
                        p[1] += drift_y + 0.5 * gaussian(&mut rng);
                        p[2] += 0.5 * gaussian(&mut rng);
                    }
                    frames.push(HandFrame::new(pose, t as f64 * 20.0));
                }
                if is_gesture {
                    spans.push(Span::new(&id, GestureClass::Circle, start, frames.len() - 1));
                }
            }
            seqs.push(crate::model::SkeletonSequence {
                id,
                frames,
                frame_rate_hz: 50.0,
            });
        }
        let templates =
            build_templates_from_dataset(&seqs, &spans, &[GestureClass::Circle], 16).unwrap();
        (seqs, spans, templates)
    }

    #[test]
    fn single_point_grid_returns_itself() {
        let (seqs, spans, templates) = validation_corpus();
        let grid = ParamGrid::default();
        let classifier = circle_classifier();
        let (best, table) = grid_search(
            &grid,
            &seqs,
            &spans,
            &classifier,
            &templates,
            EnergyMode::CoordinateRatio,
        )
        .unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(best, table[0]);
        assert_eq!(best.point.alpha, 0.5);
        assert_eq!(best.point.window, DEFAULT_ENERGY_WINDOW);
        assert!(best.mean_jaccard > 0.0);
        // Same inputs, same table.
        let (_, again) = grid_search(
            &grid,
            &seqs,
            &spans,
            &classifier,
            &templates,
            EnergyMode::CoordinateRatio,
        )
        .unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn dominating_config_is_selected() {
        let (seqs, spans, templates) = validation_corpus();
        // beta = 1.0 silences the detector entirely, so the open
        // configuration strictly dominates.
        let grid = ParamGrid {
            alpha: vec![1.0],
            beta: vec![0.0, 1.0],
            ..ParamGrid::default()
        };
        let classifier = circle_classifier();
        let (best, table) = grid_search(
            &grid,
            &seqs,
            &spans,
            &classifier,
            &templates,
            EnergyMode::CoordinateRatio,
        )
        .unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table[0].point.beta, 0.0);
        assert_eq!(table[1].point.beta, 1.0);
        assert!(table[0].detection_rate > 0.0);
        assert_eq!(table[1].detection_rate, 0.0);
        assert!(table[0].mean_jaccard > table[1].mean_jaccard);
        assert_eq!(best, table[0]);
    }

    #[test]
    fn detection_rate_never_rises_with_beta() {
        let (seqs, spans, templates) = validation_corpus();
        let grid = ParamGrid {
            alpha: vec![1.0],
            beta: vec![0.0, 0.4, 0.8, 1.0],
            ..ParamGrid::default()
        };
        let classifier = circle_classifier();
        let (_, table) = grid_search(
            &grid,
            &seqs,
            &spans,
            &classifier,
            &templates,
            EnergyMode::CoordinateRatio,
        )
        .unwrap();
        assert!(table[0].detection_rate > 0.0);
        for pair in table.windows(2) {
            assert!(
                pair[0].detection_rate >= pair[1].detection_rate,
                "{:?}",
                table.iter().map(|c| c.detection_rate).collect::<Vec<_>>()
            );
        }
        // The confidence floor between the classifier's 0.6 and 1.0
        // rejects everything.
        assert_eq!(table[2].detection_rate, 0.0);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let (seqs, spans, templates) = validation_corpus();
        let grid = ParamGrid {
            alpha: Vec::new(),
            ..ParamGrid::default()
        };
        let err = grid_search(
            &grid,
            &seqs,
            &spans,
            &circle_classifier(),
            &templates,
            EnergyMode::CoordinateRatio,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyGrid));
    }
}
