//! Trajectory-shape refinement for gestures whose index-finger path is
//! distinctive.
//!
//! The index fingertip's 3D path is reduced to 2D with PCA, the angles
//! of its step-to-step gradients are folded into `[-pi/2, pi/2]` and
//! histogrammed, and the histogram is matched against per-class mean
//! templates by cosine similarity. The best template score is blended
//! with the base classifier's confidence to settle the final label.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    AnnotationSpan, DetectionEvent, GestureClass, HandFrame, JointId, SkeletonSequence,
};

/// Default orientation-histogram resolution.
pub const DEFAULT_BINS: usize = 16;

/// Default weight of the base classifier in the blended score.
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Classes whose index-finger trajectory is distinctive enough to carry
/// a template. Other classes are never overridden by histogram
/// evidence.
pub const TRAJECTORY_CLASSES: [GestureClass; 4] = [
    GestureClass::Circle,
    GestureClass::V,
    GestureClass::Cross,
    GestureClass::Deny,
];

/// Upper bound on template width accepted from files.
pub const MAX_TEMPLATE_BINS: usize = 4096;

/// Steps shorter than this fraction of the total path length are
/// treated as standstill and excluded from the histogram.
const GRADIENT_SKIP_FRACTION: f64 = 1e-6;

/// Distribution of folded gradient angles over `[-pi/2, pi/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationHistogram {
    /// Non-negative masses, normalized to sum 1.
    pub bins: Vec<f64>,
}

impl OrientationHistogram {
    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }
}

/// One mean histogram per configured class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTemplates {
    pub templates: BTreeMap<GestureClass, OrientationHistogram>,
}

impl ClassTemplates {
    pub fn contains(&self, class: GestureClass) -> bool {
        self.templates.contains_key(&class)
    }

    pub fn bin_count(&self) -> usize {
        self.templates
            .values()
            .next()
            .map(|h| h.bin_count())
            .unwrap_or(DEFAULT_BINS)
    }
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order with their unit
/// eigenvectors as rows; ties keep the original axis order, and each
/// vector's first non-negligible component is made positive so the
/// basis is deterministic.
fn symmetric_eigen_3x3(a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut m = a;
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let norm: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * norm.max(1.0);
    for _ in 0..64 {
        // Largest off-diagonal element decides the next rotation.
        let (mut p, mut q, mut biggest) = (0, 1, 0.0);
        for i in 0..3 {
            for j in (i + 1)..3 {
                if m[i][j].abs() > biggest {
                    biggest = m[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if biggest <= tol {
            break;
        }
        let theta = 0.5 * (2.0 * m[p][q]).atan2(m[p][p] - m[q][q]);
        let (s, c) = theta.sin_cos();
        let mut rotated = m;
        for k in 0..3 {
            rotated[p][k] = c * m[p][k] + s * m[q][k];
            rotated[q][k] = -s * m[p][k] + c * m[q][k];
        }
        let mut next = rotated;
        for k in 0..3 {
            next[k][p] = c * rotated[k][p] + s * rotated[k][q];
            next[k][q] = -s * rotated[k][p] + c * rotated[k][q];
        }
        m = next;
        for k in 0..3 {
            let vp = v[k][p];
            let vq = v[k][q];
            v[k][p] = c * vp + s * vq;
            v[k][q] = -s * vp + c * vq;
        }
    }
    let mut order = [0usize, 1, 2];
    // Stable selection sort: descending eigenvalue, original index on ties.
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap().then(i.cmp(&j)));
    let mut values = [0.0; 3];
    let mut vectors = [[0.0; 3]; 3];
    for (rank, &idx) in order.iter().enumerate() {
        values[rank] = m[idx][idx];
        for k in 0..3 {
            vectors[rank][k] = v[k][idx];
        }
        if let Some(first) = vectors[rank].iter().find(|c| c.abs() > 1e-12) {
            if *first < 0.0 {
                for c in vectors[rank].iter_mut() {
                    *c = -*c;
                }
            }
        }
    }
    (values, vectors)
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Centers the points and projects them onto the top-2 principal axes
/// of their covariance.
pub fn pca_project(points: &[[f64; 3]]) -> Vec<[f64; 2]> {
    if points.is_empty() {
        return Vec::new();
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for axis in 0..3 {
            mean[axis] += p[axis];
        }
    }
    for axis in 0..3 {
        mean[axis] /= n;
    }
    let mut cov = [[0.0; 3]; 3];
    for p in points {
        let c = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += c[i] * c[j] / n;
            }
        }
    }
    let (_, axes) = symmetric_eigen_3x3(cov);
    points
        .iter()
        .map(|p| {
            let c = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
            [dot3(c, axes[0]), dot3(c, axes[1])]
        })
        .collect()
}

/// Builds the orientation histogram of one segment's index-fingertip
/// trajectory. A segment with no appreciable motion yields a uniform
/// histogram (with a warning) so downstream cosine matching stays
/// defined.
pub fn trajectory_descriptor(segment: &[HandFrame], bins: usize) -> Result<OrientationHistogram> {
    if bins < 2 {
        return Err(Error::Invalid(format!("need at least 2 histogram bins, got {bins}")));
    }
    if segment.len() < 3 {
        return Err(Error::WindowTooShort {
            got: segment.len(),
            need: 3,
        });
    }
    let path: Vec<[f64; 3]> = segment
        .iter()
        .map(|f| f.position(JointId::IndexEnd))
        .collect();
    let projected = pca_project(&path);
    let steps: Vec<[f64; 2]> = projected
        .windows(2)
        .map(|w| [w[1][0] - w[0][0], w[1][1] - w[0][1]])
        .collect();
    let path_length: f64 = steps.iter().map(|s| s[0].hypot(s[1])).sum();
    let cutoff = GRADIENT_SKIP_FRACTION * path_length;
    let mut counts = vec![0.0; bins];
    let mut kept = 0usize;
    for step in &steps {
        let norm = step[0].hypot(step[1]);
        if norm <= cutoff {
            continue;
        }
        let bin = if step[0] == 0.0 {
            // A vertical gradient sits on the +-pi/2 boundary.
            bins - 1
        } else {
            let angle = (step[1] / step[0]).atan();
            let scaled = (angle + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI;
            ((scaled * bins as f64) as usize).min(bins - 1)
        };
        counts[bin] += 1.0;
        kept += 1;
    }
    if kept == 0 {
        log::warn!("segment of {} frames has no appreciable motion; using a flat descriptor", segment.len());
        return Ok(OrientationHistogram {
            bins: vec![1.0 / bins as f64; bins],
        });
    }
    for c in counts.iter_mut() {
        *c /= kept as f64;
    }
    Ok(OrientationHistogram { bins: counts })
}

/// Cosine similarity between two non-negative vectors; zero-norm input
/// scores 0 against everything.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Builds one mean descriptor per class from labeled segments. Every
/// requested class must contribute at least one usable segment.
pub fn build_templates(
    segments: &[(GestureClass, Vec<HandFrame>)],
    classes: &[GestureClass],
    bins: usize,
) -> Result<ClassTemplates> {
    let mut sums: BTreeMap<GestureClass, (Vec<f64>, usize)> = BTreeMap::new();
    for (class, frames) in segments {
        if !classes.contains(class) {
            continue;
        }
        if frames.len() < 3 {
            log::warn!("skipping a {}-frame segment of {class}: too short for a descriptor", frames.len());
            continue;
        }
        let descriptor = trajectory_descriptor(frames, bins)?;
        let entry = sums.entry(*class).or_insert_with(|| (vec![0.0; bins], 0));
        for (acc, b) in entry.0.iter_mut().zip(&descriptor.bins) {
            *acc += *b;
        }
        entry.1 += 1;
    }
    let mut templates = BTreeMap::new();
    for class in classes {
        let (sum, count) = sums
            .remove(class)
            .ok_or_else(|| Error::MissingClass(class.name().to_string()))?;
        let bins = sum.into_iter().map(|v| v / count as f64).collect();
        templates.insert(*class, OrientationHistogram { bins });
    }
    Ok(ClassTemplates { templates })
}

/// Collects annotated segments of the template classes from a dataset
/// and averages their descriptors into [`ClassTemplates`].
pub fn build_templates_from_dataset(
    sequences: &[SkeletonSequence],
    annotations: &[AnnotationSpan],
    classes: &[GestureClass],
    bins: usize,
) -> Result<ClassTemplates> {
    let by_id: BTreeMap<&str, &SkeletonSequence> =
        sequences.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut segments = Vec::new();
    for span in annotations {
        if !classes.contains(&span.label) {
            continue;
        }
        let seq = by_id
            .get(span.sequence_id.as_str())
            .ok_or_else(|| Error::UnknownSequence(span.sequence_id.clone()))?;
        span.validate(seq.len())?;
        segments.push((
            span.label,
            seq.frames[span.start_frame..=span.end_frame].to_vec(),
        ));
    }
    build_templates(&segments, classes, bins)
}

/// Settles a segment's label between the base classifier and the
/// template evidence. Classes without a template are never overridden.
/// When both sources agree the scores are blended with weight `lambda`
/// on the base confidence; when they disagree the higher-scoring source
/// wins outright.
pub fn classify_by_histogram(
    descriptor: &OrientationHistogram,
    templates: &ClassTemplates,
    base: (GestureClass, f64),
    lambda: f64,
) -> (GestureClass, f64) {
    let (base_class, base_conf) = base;
    if !templates.contains(base_class) {
        return base;
    }
    let norm: f64 = descriptor.bins.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return base;
    }
    let mut best: Option<(GestureClass, f64)> = None;
    for (class, template) in &templates.templates {
        let sim = cosine_similarity(&descriptor.bins, &template.bins);
        if best.map_or(true, |(_, s)| sim > s) {
            best = Some((*class, sim));
        }
    }
    let (best_class, best_sim) = best.expect("templates are never empty");
    if best_class == base_class {
        (base_class, lambda * base_conf + (1.0 - lambda) * best_sim)
    } else if best_sim > base_conf {
        (best_class, best_sim)
    } else {
        (base_class, base_conf)
    }
}

/// Applies histogram refinement to scored detection events: each
/// event's segment is described and its label re-settled. Bounds are
/// kept; segments too short to describe pass through unchanged.
pub fn refine_detections(
    seq: &SkeletonSequence,
    scored: &[(DetectionEvent, f64)],
    templates: &ClassTemplates,
    lambda: f64,
) -> Result<Vec<DetectionEvent>> {
    let bins = templates.bin_count();
    let mut out = Vec::with_capacity(scored.len());
    for (event, confidence) in scored {
        event.validate(seq.len())?;
        let frames = &seq.frames[event.start_frame..=event.end_frame];
        if frames.len() < 3 {
            out.push(event.clone());
            continue;
        }
        let descriptor = trajectory_descriptor(frames, bins)?;
        let (label, _) =
            classify_by_histogram(&descriptor, templates, (event.label, *confidence), lambda);
        let mut refined = event.clone();
        refined.label = label;
        out.push(refined);
    }
    Ok(out)
}

/// Renders templates as one `class;b0,b1,...` line per class.
pub fn templates_to_string(templates: &ClassTemplates) -> String {
    let mut out = String::new();
    for (class, histogram) in &templates.templates {
        let bins: Vec<String> = histogram.bins.iter().map(|b| format!("{b}")).collect();
        out.push_str(&format!("{};{}\n", class.name(), bins.join(",")));
    }
    out
}

/// Parses the template file format. Lines starting with `#` and blank
/// lines are ignored; every class line must agree on bin count.
pub fn templates_from_string(text: &str, path: &str) -> Result<ClassTemplates> {
    let fail = |line: usize, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut templates: BTreeMap<GestureClass, OrientationHistogram> = BTreeMap::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, rest) = line
            .split_once(';')
            .ok_or_else(|| fail(line_no, "expected 'class;b0,b1,...'".to_string()))?;
        let class = GestureClass::from_name(name.trim())
            .ok_or_else(|| fail(line_no, format!("unknown class '{}'", name.trim())))?;
        if !class.is_gesture() {
            return Err(fail(line_no, format!("'{}' cannot carry a template", class.name())));
        }
        if templates.contains_key(&class) {
            return Err(fail(line_no, format!("duplicate class '{}'", class.name())));
        }
        let mut bins = Vec::new();
        for piece in rest.split(',') {
            if bins.len() >= MAX_TEMPLATE_BINS {
                return Err(fail(line_no, format!("more than {MAX_TEMPLATE_BINS} bins")));
            }
            let value: f64 = piece
                .trim()
                .parse()
                .map_err(|_| fail(line_no, format!("bad bin value '{}'", piece.trim())))?;
            if !value.is_finite() || value < 0.0 {
                return Err(fail(line_no, format!("bin value {value} is not a non-negative real")));
            }
            bins.push(value);
        }
        if bins.len() < 2 {
            return Err(fail(line_no, format!("need at least 2 bins, got {}", bins.len())));
        }
        match width {
            None => width = Some(bins.len()),
            Some(w) if w != bins.len() => {
                return Err(fail(
                    line_no,
                    format!("bin count {} disagrees with earlier lines ({w})", bins.len()),
                ));
            }
            Some(_) => {}
        }
        templates.insert(class, OrientationHistogram { bins });
    }
    if templates.is_empty() {
        return Err(fail(0, "no templates found".to_string()));
    }
    Ok(ClassTemplates { templates })
}

pub fn save_templates(templates: &ClassTemplates, path: &Path) -> Result<()> {
    std::fs::write(path, templates_to_string(templates))?;
    Ok(())
}

pub fn load_templates(path: &Path) -> Result<ClassTemplates> {
    let text = std::fs::read_to_string(path)?;
    templates_from_string(&text, &path.display().to_string())
}
