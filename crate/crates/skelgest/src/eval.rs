//! Detection scoring: frame-level Jaccard index, strict-overlap event
//! matching, per-class detection and false-positive rates, and report
//! serialization (CSV + JSON).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{DetectionEvent, GestureClass, SkeletonSequence, Span, GESTURE_CLASS_COUNT};

/// Per-frame binary occupancy of one class over one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabelVector(pub Vec<bool>);

impl FrameLabelVector {
    /// Rasterizes all spans of `class` onto a length-`seq_len` vector.
    pub fn rasterize(spans: &[Span], seq_len: usize, class: GestureClass) -> Result<Self> {
        let mut v = vec![false; seq_len];
        for sp in spans.iter().filter(|sp| sp.label == class) {
            sp.validate(seq_len)?;
            for f in v.iter_mut().take(sp.end_frame + 1).skip(sp.start_frame) {
                *f = true;
            }
        }
        Ok(FrameLabelVector(v))
    }
}

/// Frame-level intersection-over-union of one class's ground truth and
/// predictions on one sequence. An empty union (class absent from both)
/// scores 1.
pub fn jaccard_index(
    gt: &[Span],
    pred: &[Span],
    seq_len: usize,
    class: GestureClass,
) -> Result<f64> {
    let g = FrameLabelVector::rasterize(gt, seq_len, class)?;
    let p = FrameLabelVector::rasterize(pred, seq_len, class)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in g.0.iter().zip(&p.0) {
        if *a && *b {
            inter += 1;
        }
        if *a || *b {
            union += 1;
        }
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Matching threshold: a prediction counts only when its temporal
/// intersection-over-union with a same-class ground-truth span is
/// strictly above this value.
pub const MATCH_IOU: f64 = 0.5;

/// One row of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: GestureClass,
    /// Mean Jaccard over sequences where the class appears in ground
    /// truth or prediction; 1.0 when it appears in neither.
    pub jaccard: f64,
    pub detection_rate: f64,
    /// Unmatched predictions over ground-truth count; infinite when
    /// there are unmatched predictions but no ground truth.
    pub fp_rate: f64,
    pub gt_count: usize,
    pub matched: usize,
    pub unmatched_pred: usize,
}

/// Wall-clock bookkeeping attached to a report by the caller.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingStats {
    pub total_seconds: f64,
    pub mean_classification_seconds: f64,
}

/// Full scoring result: one row per gesture class plus aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    /// Per-sequence mean Jaccard over classes present in either side,
    /// then averaged over sequences with at least one such class.
    pub mean_jaccard: f64,
    /// Total matched over total ground-truth spans.
    pub mean_detection_rate: f64,
    /// Total unmatched predictions over total ground-truth spans.
    pub mean_fp_rate: f64,
    pub timing: TimingStats,
}

pub fn sequence_lengths(seqs: &[SkeletonSequence]) -> BTreeMap<String, usize> {
    seqs.iter().map(|s| (s.id.clone(), s.len())).collect()
}

/// Greedy one-to-one matching of one sequence's predictions of one
/// class against its ground truth, in temporal order. Returns the
/// number of matched predictions.
fn match_class_greedy(gt: &[&Span], pred: &[&Span]) -> usize {
    let mut gt_used = vec![false; gt.len()];
    let mut matched = 0;
    for p in pred {
        for (i, g) in gt.iter().enumerate() {
            if !gt_used[i] && p.iou(g) > MATCH_IOU {
                gt_used[i] = true;
                matched += 1;
                break;
            }
        }
    }
    matched
}

/// Scores predictions against ground truth over a set of sequences.
///
/// A prediction matches an unmatched ground-truth span of the same
/// class when their frame IoU is strictly above 0.5; matching is greedy
/// in temporal order and one-to-one. Detection rate is matched over
/// ground-truth count, false-positive rate is unmatched predictions
/// over ground-truth count (so it may exceed 1).
pub fn match_and_score(
    gt: &[Span],
    pred: &[DetectionEvent],
    seq_lens: &BTreeMap<String, usize>,
) -> Result<MetricsReport> {
    for sp in gt.iter().chain(pred.iter()) {
        let len = seq_lens
            .get(&sp.sequence_id)
            .ok_or_else(|| Error::UnknownSequence(sp.sequence_id.clone()))?;
        sp.validate(*len)?;
        if sp.label == GestureClass::NonGesture {
            return Err(Error::Invalid(format!(
                "span in sequence {} uses the non-gesture label",
                sp.sequence_id
            )));
        }
    }

    let mut per_class = Vec::with_capacity(GESTURE_CLASS_COUNT);
    for class in GestureClass::GESTURES {
        let mut gt_count = 0;
        let mut matched = 0;
        let mut pred_count = 0;
        let mut ji_sum = 0.0;
        let mut ji_n = 0usize;
        for (id, &len) in seq_lens {
            let g: Vec<&Span> = gt
                .iter()
                .filter(|s| s.sequence_id == *id && s.label == class)
                .collect();
            let mut p: Vec<&Span> = pred
                .iter()
                .filter(|s| s.sequence_id == *id && s.label == class)
                .collect();
            p.sort_by_key(|s| (s.start_frame, s.end_frame));
            let mut g_sorted = g.clone();
            g_sorted.sort_by_key(|s| (s.start_frame, s.end_frame));
            gt_count += g.len();
            pred_count += p.len();
            matched += match_class_greedy(&g_sorted, &p);
            if !g.is_empty() || !p.is_empty() {
                let gt_owned: Vec<Span> = g.iter().map(|s| (*s).clone()).collect();
                let p_owned: Vec<Span> = p.iter().map(|s| (*s).clone()).collect();
                ji_sum += jaccard_index(&gt_owned, &p_owned, len, class)?;
                ji_n += 1;
            }
        }
        let unmatched_pred = pred_count - matched;
        let detection_rate = if gt_count == 0 {
            0.0
        } else {
            matched as f64 / gt_count as f64
        };
        let fp_rate = if gt_count == 0 {
            if unmatched_pred == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            unmatched_pred as f64 / gt_count as f64
        };
        let jaccard = if ji_n == 0 { 1.0 } else { ji_sum / ji_n as f64 };
        per_class.push(ClassMetrics {
            class,
            jaccard,
            detection_rate,
            fp_rate,
            gt_count,
            matched,
            unmatched_pred,
        });
    }

    // Aggregate Jaccard: average per sequence over classes present in
    // either side, then over sequences with at least one present class.
    let mut seq_ji = Vec::new();
    for (id, &len) in seq_lens {
        let mut sum = 0.0;
        let mut n = 0usize;
        for class in GestureClass::GESTURES {
            let g: Vec<Span> = gt
                .iter()
                .filter(|s| s.sequence_id == *id && s.label == class)
                .cloned()
                .collect();
            let p: Vec<Span> = pred
                .iter()
                .filter(|s| s.sequence_id == *id && s.label == class)
                .cloned()
                .collect();
            if !g.is_empty() || !p.is_empty() {
                sum += jaccard_index(&g, &p, len, class)?;
                n += 1;
            }
        }
        if n > 0 {
            seq_ji.push(sum / n as f64);
        }
    }
    let mean_jaccard = if seq_ji.is_empty() {
        1.0
    } else {
        seq_ji.iter().sum::<f64>() / seq_ji.len() as f64
    };

    let total_gt: usize = per_class.iter().map(|c| c.gt_count).sum();
    let total_matched: usize = per_class.iter().map(|c| c.matched).sum();
    let total_unmatched: usize = per_class.iter().map(|c| c.unmatched_pred).sum();
    let mean_detection_rate = if total_gt == 0 {
        0.0
    } else {
        total_matched as f64 / total_gt as f64
    };
    let mean_fp_rate = if total_gt == 0 {
        if total_unmatched == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        total_unmatched as f64 / total_gt as f64
    };

    Ok(MetricsReport {
        per_class,
        mean_jaccard,
        mean_detection_rate,
        mean_fp_rate,
        timing: TimingStats::default(),
    })
}

impl MetricsReport {
    /// CSV with one row per gesture class and a MEAN row carrying the
    /// aggregates and totals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,jaccard,det_rate,fp_rate,gt_count,matched,unmatched_pred\n");
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                c.class, c.jaccard, c.detection_rate, c.fp_rate, c.gt_count, c.matched, c.unmatched_pred
            );
        }
        let _ = writeln!(
            s,
            "MEAN,{},{},{},{},{},{}",
            self.mean_jaccard,
            self.mean_detection_rate,
            self.mean_fp_rate,
            self.per_class.iter().map(|c| c.gt_count).sum::<usize>(),
            self.per_class.iter().map(|c| c.matched).sum::<usize>(),
            self.per_class.iter().map(|c| c.unmatched_pred).sum::<usize>(),
        );
        s
    }

    /// JSON mirror of the CSV plus aggregate and timing blocks.
    /// Non-finite rates serialize as null.
    pub fn to_json(&self) -> serde_json::Value {
        fn num(v: f64) -> serde_json::Value {
            if v.is_finite() {
                serde_json::json!(v)
            } else {
                serde_json::Value::Null
            }
        }
        serde_json::json!({
            "per_class": self.per_class.iter().map(|c| serde_json::json!({
                "class": c.class.name(),
                "jaccard": num(c.jaccard),
                "det_rate": num(c.detection_rate),
                "fp_rate": num(c.fp_rate),
                "gt_count": c.gt_count,
                "matched": c.matched,
                "unmatched_pred": c.unmatched_pred,
            })).collect::<Vec<_>>(),
            "aggregate": {
                "jaccard": num(self.mean_jaccard),
                "det_rate": num(self.mean_detection_rate),
                "fp_rate": num(self.mean_fp_rate),
            },
            "timing": {
                "total_seconds": self.timing.total_seconds,
                "mean_classification_seconds": self.timing.mean_classification_seconds,
            },
        })
    }

    pub fn class_row(&self, class: GestureClass) -> &ClassMetrics {
        &self.per_class[class.ordinal()]
    }
}

/// Exhaustive optimal matching for small cases: the maximum number of
/// one-to-one (prediction, ground-truth) pairs with same class and
/// IoU > 0.5. Used to validate the greedy matcher.
pub fn optimal_match_count(gt: &[Span], pred: &[Span]) -> usize {
    fn recurse(gt: &[Span], pred: &[Span], i: usize, used: &mut Vec<bool>) -> usize {
        if i == pred.len() {
            return 0;
        }
        // Option 1: leave prediction i unmatched.
        let mut best = recurse(gt, pred, i + 1, used);
        for (j, g) in gt.iter().enumerate() {
            if !used[j]
                && g.sequence_id == pred[i].sequence_id
                && g.label == pred[i].label
                && pred[i].iou(g) > MATCH_IOU
            {
                used[j] = true;
                best = best.max(1 + recurse(gt, pred, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    let mut used = vec![false; gt.len()];
    recurse(gt, pred, 0, &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn lens(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(id, n)| (id.to_string(), *n)).collect()
    }

    #[test]
    fn jaccard_identical_and_disjoint() {
        let g = vec![Span::new("s", GestureClass::Tap, 10, 19)];
        assert_eq!(jaccard_index(&g, &g, 50, GestureClass::Tap).unwrap(), 1.0);
        let p = vec![Span::new("s", GestureClass::Tap, 30, 39)];
        assert_eq!(jaccard_index(&g, &p, 50, GestureClass::Tap).unwrap(), 0.0);
        // Class absent from both sides scores 1.
        assert_eq!(jaccard_index(&g, &p, 50, GestureClass::Ok).unwrap(), 1.0);
    }

    #[test]
    fn jaccard_partial_overlap() {
        let g = vec![Span::new("s", GestureClass::Tap, 10, 19)];
        let p = vec![Span::new("s", GestureClass::Tap, 15, 24)];
        let ji = jaccard_index(&g, &p, 50, GestureClass::Tap).unwrap();
        assert!((ji - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn match_overlap_above_half() {
        let l = lens(&[("s", 100)]);
        let gt = vec![Span::new("s", GestureClass::Grab, 0, 9)];
        let pred = vec![Span::new("s", GestureClass::Grab, 2, 9)];
        let r = match_and_score(&gt, &pred, &l).unwrap();
        let row = r.class_row(GestureClass::Grab);
        assert_eq!((row.matched, row.unmatched_pred), (1, 0));
        assert_eq!(row.detection_rate, 1.0);
        assert_eq!(row.fp_rate, 0.0);
    }

    #[test]
    fn wrong_label_is_miss_plus_fp() {
        let l = lens(&[("s", 100)]);
        let gt = vec![Span::new("s", GestureClass::Grab, 0, 9)];
        let pred = vec![Span::new("s", GestureClass::Pinch, 2, 9)];
        let r = match_and_score(&gt, &pred, &l).unwrap();
        assert_eq!(r.class_row(GestureClass::Grab).detection_rate, 0.0);
        let pinch = r.class_row(GestureClass::Pinch);
        assert_eq!(pinch.unmatched_pred, 1);
        assert!(pinch.fp_rate.is_infinite());
    }

    #[test]
    fn exact_half_iou_is_not_a_match() {
        // Spans 0–2 and 1–3: intersection 2, union 4, IoU exactly 0.5.
        let a = Span::new("s", GestureClass::V, 0, 2);
        let b = Span::new("s", GestureClass::V, 1, 3);
        assert_eq!(a.iou(&b), 0.5);
        let l = lens(&[("s", 10)]);
        let r = match_and_score(&[a], &[b], &l).unwrap();
        let row = r.class_row(GestureClass::V);
        assert_eq!(row.matched, 0);
        assert_eq!(row.unmatched_pred, 1);
    }

    #[test]
    fn empty_predictions() {
        let l = lens(&[("s", 100)]);
        let gt = vec![Span::new("s", GestureClass::Grab, 0, 9)];
        let r = match_and_score(&gt, &[], &l).unwrap();
        let row = r.class_row(GestureClass::Grab);
        assert_eq!(row.detection_rate, 0.0);
        assert_eq!(row.fp_rate, 0.0);
        assert_eq!(row.jaccard, 0.0);
        assert_eq!(r.mean_detection_rate, 0.0);
    }

    #[test]
    fn unknown_sequence_rejected() {
        let l = lens(&[("s", 100)]);
        let pred = vec![Span::new("ghost", GestureClass::Grab, 0, 9)];
        assert!(matches!(
            match_and_score(&[], &pred, &l),
            Err(Error::UnknownSequence(_))
        ));
    }

    #[test]
    fn perfect_detector_scores_one() {
        let l = lens(&[("a", 200), ("b", 200)]);
        let gt = vec![
            Span::new("a", GestureClass::One, 10, 60),
            Span::new("a", GestureClass::Left, 100, 160),
            Span::new("b", GestureClass::Circle, 20, 90),
        ];
        let r = match_and_score(&gt, &gt, &l).unwrap();
        assert_eq!(r.mean_jaccard, 1.0);
        assert_eq!(r.mean_detection_rate, 1.0);
        assert_eq!(r.mean_fp_rate, 0.0);
        for c in [GestureClass::One, GestureClass::Left, GestureClass::Circle] {
            assert_eq!(r.class_row(c).jaccard, 1.0);
            assert_eq!(r.class_row(c).detection_rate, 1.0);
        }
    }

    #[test]
    fn order_invariance() {
        let l = lens(&[("a", 300)]);
        let gt = vec![
            Span::new("a", GestureClass::Tap, 10, 40),
            Span::new("a", GestureClass::Tap, 100, 140),
            Span::new("a", GestureClass::Knob, 200, 260),
        ];
        let mut pred = vec![
            Span::new("a", GestureClass::Tap, 12, 44),
            Span::new("a", GestureClass::Knob, 210, 255),
            Span::new("a", GestureClass::Tap, 95, 130),
        ];
        let r1 = match_and_score(&gt, &pred, &l).unwrap();
        pred.reverse();
        let r2 = match_and_score(&gt, &pred, &l).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn csv_and_json_shapes() {
        let l = lens(&[("s", 100)]);
        let gt = vec![Span::new("s", GestureClass::Grab, 0, 9)];
        let mut r = match_and_score(&gt, &gt, &l).unwrap();
        r.timing.total_seconds = 1.25;
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 18 + 1);
        assert_eq!(lines[0], "class,jaccard,det_rate,fp_rate,gt_count,matched,unmatched_pred");
        assert!(lines.last().unwrap().starts_with("MEAN,"));
        let json = r.to_json();
        assert_eq!(json["per_class"].as_array().unwrap().len(), 18);
        assert_eq!(json["aggregate"]["det_rate"], 1.0);
        assert_eq!(json["timing"]["total_seconds"], 1.25);
    }

    #[test]
    fn greedy_matches_optimal_on_random_small_cases() {
        // Disjoint same-class ground-truth spans (as annotations are)
        // admit at most one candidate ground truth per prediction, so
        // greedy matching must reach the optimal count.
        let mut rng = ChaCha8Rng::seed_from_u64(417);
        for case in 0..1000 {
            let seq_len = 100;
            let n_gt = rng.gen_range(0..=3);
            let n_pred = rng.gen_range(0..=3);
            let classes = [GestureClass::Tap, GestureClass::V];
            // Build disjoint ground-truth spans per class.
            let mut gt: Vec<Span> = Vec::new();
            for &class in &classes {
                let mut cursor = 0usize;
                for _ in 0..n_gt {
                    let start = cursor + rng.gen_range(0..10);
                    let len = rng.gen_range(3..25);
                    let end = start + len - 1;
                    if end >= seq_len {
                        break;
                    }
                    gt.push(Span::new("s", class, start, end));
                    cursor = end + 2;
                }
            }
            let mut pred: Vec<Span> = Vec::new();
            for _ in 0..n_pred {
                let start = rng.gen_range(0..seq_len - 3);
                let len = rng.gen_range(3..30).min(seq_len - start);
                let class = classes[rng.gen_range(0..2)];
                pred.push(Span::new("s", class, start, start + len - 1));
            }
            let l = lens(&[("s", seq_len)]);
            let r = match_and_score(&gt, &pred, &l).unwrap();
            let greedy: usize = r.per_class.iter().map(|c| c.matched).sum();
            let optimal = optimal_match_count(&gt, &pred);
            assert_eq!(greedy, optimal, "case {case}: gt={gt:?} pred={pred:?}");
        }
    }
}
