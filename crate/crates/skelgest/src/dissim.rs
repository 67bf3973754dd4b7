//! Dissimilarity-vector representation for whole gesture windows: a
//! dictionary of 20-step resampled examples, a seeded representation
//! set, and the 12-component-per-representative dissimilarity axes
//! (palm trajectory, articulation, path length, velocity profile).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{articulation_distances, ARTICULATION_TRACES};
use crate::model::{
    crop_window, resample_window, vec3_dist, AnnotationSpan, GestureClass, HandFrame,
    SkeletonSequence, Vec3,
};

/// Every dictionary window is resampled to this many steps.
pub const RESAMPLE_STEPS: usize = 20;

/// Dissimilarity components contributed per representation gesture:
/// 1 palm-trajectory + 9 articulation + 1 path-length + 1 velocity.
pub const DISSIM_COMPONENTS: usize = 12;

/// One labeled, resampled window.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEntry {
    pub class: GestureClass,
    pub window: Vec<HandFrame>,
}

/// Everything the dissimilarity computation needs about one window,
/// extracted once.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeatures {
    pub palm: Vec<Vec3>,
    pub traces: [Vec<f64>; ARTICULATION_TRACES],
    pub path_length: f64,
    /// Per-step palm displacement norms (length steps − 1).
    pub speeds: Vec<f64>,
}

impl WindowFeatures {
    pub fn from_window(window: &[HandFrame]) -> WindowFeatures {
        let palm: Vec<Vec3> = window.iter().map(|f| f.positions[0]).collect();
        let speeds: Vec<f64> = palm.windows(2).map(|w| vec3_dist(w[0], w[1])).collect();
        let path_length = speeds.iter().sum();
        WindowFeatures {
            palm,
            traces: articulation_distances(window).traces,
            path_length,
            speeds,
        }
    }
}

/// Labeled example windows split into a representation set (defining
/// the dissimilarity axes) and a training remainder, plus the mean
/// gesture length per class.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureDictionary {
    pub representation: Vec<DictionaryEntry>,
    pub training: Vec<DictionaryEntry>,
    /// Mean annotated duration per class, in frames (≥ 2).
    pub mean_length: BTreeMap<GestureClass, usize>,
    /// Cached features of the representation windows, same order.
    pub rep_features: Vec<WindowFeatures>,
}

impl GestureDictionary {
    /// Length of the dissimilarity vectors this dictionary produces.
    pub fn vector_len(&self) -> usize {
        DISSIM_COMPONENTS * self.representation.len()
    }

    pub fn class_length(&self, class: GestureClass) -> Result<usize> {
        self.mean_length
            .get(&class)
            .copied()
            .ok_or_else(|| Error::MissingClass(class.name().to_string()))
    }
}

/// Maximal unannotated stretches (start, length) of one sequence.
fn unannotated_stretches(seq_len: usize, spans: &[&AnnotationSpan]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<&&AnnotationSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| s.start_frame);
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for span in sorted {
        if span.start_frame > cursor {
            out.push((cursor, span.start_frame - cursor));
        }
        cursor = cursor.max(span.end_frame + 1);
    }
    if cursor < seq_len {
        out.push((cursor, seq_len - cursor));
    }
    out
}

/// Crops every annotated span, resamples it to 20 steps, samples seeded
/// non-gesture windows from unannotated stretches (lengths drawn from
/// the empirical gesture-length distribution) and splits the gesture
/// entries into a stratified seeded half per class (the representation
/// set) and a remainder. Non-gestures always stay in the remainder.
pub fn build_dictionary(
    sequences: &[SkeletonSequence],
    annotations: &[AnnotationSpan],
    non_gesture_count: usize,
    seed: u64,
) -> Result<GestureDictionary> {
    if annotations.is_empty() {
        return Err(Error::Invalid("cannot build a dictionary without annotations".into()));
    }
    let by_id: BTreeMap<&str, &SkeletonSequence> =
        sequences.iter().map(|s| (s.id.as_str(), s)).collect();

    let mut gesture_entries: Vec<DictionaryEntry> = Vec::new();
    let mut lengths: Vec<usize> = Vec::new();
    let mut length_sums: BTreeMap<GestureClass, (usize, usize)> = BTreeMap::new();
    for span in annotations {
        let seq = by_id
            .get(span.sequence_id.as_str())
            .ok_or_else(|| Error::UnknownSequence(span.sequence_id.clone()))?;
        let window = crop_window(seq, span.start_frame, span.len())?;
        gesture_entries.push(DictionaryEntry {
            class: span.label,
            window: resample_window(window, RESAMPLE_STEPS)?,
        });
        lengths.push(span.len());
        let e = length_sums.entry(span.label).or_default();
        e.0 += span.len();
        e.1 += 1;
    }
    let mean_length: BTreeMap<GestureClass, usize> = length_sums
        .into_iter()
        .map(|(c, (sum, n))| {
            let mean = (sum as f64 / n as f64).round() as usize;
            (c, mean.max(2))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Seeded non-gesture crops.
    let mut stretch_pool: Vec<(usize, usize, usize)> = Vec::new(); // (seq idx, start, len)
    for (i, seq) in sequences.iter().enumerate() {
        let here: Vec<&AnnotationSpan> =
            annotations.iter().filter(|s| s.sequence_id == seq.id).collect();
        for (start, len) in unannotated_stretches(seq.len(), &here) {
            stretch_pool.push((i, start, len));
        }
    }
    let mut negatives: Vec<DictionaryEntry> = Vec::new();
    for _ in 0..non_gesture_count {
        let want = lengths[rng.gen_range(0..lengths.len())];
        let fits: Vec<&(usize, usize, usize)> =
            stretch_pool.iter().filter(|(_, _, len)| *len >= want).collect();
        if fits.is_empty() {
            log::warn!("no unannotated stretch of {want}+ frames; skipping a non-gesture crop");
            continue;
        }
        let &(seq_idx, s_start, s_len) = fits[rng.gen_range(0..fits.len())];
        let offset = s_start + rng.gen_range(0..=s_len - want);
        let window = crop_window(&sequences[seq_idx], offset, want)?;
        negatives.push(DictionaryEntry {
            class: GestureClass::NonGesture,
            window: resample_window(window, RESAMPLE_STEPS)?,
        });
    }

    // Stratified seeded half split, classes visited in ordinal order.
    let mut per_class: BTreeMap<GestureClass, Vec<usize>> = BTreeMap::new();
    for (i, e) in gesture_entries.iter().enumerate() {
        per_class.entry(e.class).or_default().push(i);
    }
    let mut rep_idx: Vec<usize> = Vec::new();
    let mut train_idx: Vec<usize> = Vec::new();
    for (_, mut idxs) in per_class {
        idxs.shuffle(&mut rng);
        let half = idxs.len() / 2;
        rep_idx.extend(&idxs[..half]);
        train_idx.extend(&idxs[half..]);
    }
    let representation: Vec<DictionaryEntry> =
        rep_idx.iter().map(|&i| gesture_entries[i].clone()).collect();
    let mut training: Vec<DictionaryEntry> =
        train_idx.iter().map(|&i| gesture_entries[i].clone()).collect();
    training.extend(negatives);

    let rep_features = representation
        .iter()
        .map(|e| WindowFeatures::from_window(&e.window))
        .collect();
    Ok(GestureDictionary {
        representation,
        training,
        mean_length,
        rep_features,
    })
}

/// The 12 dissimilarity components of `query` against one
/// representative, appended to `out`.
fn push_components(out: &mut Vec<f64>, query: &WindowFeatures, rep: &WindowFeatures) {
    // (a) summed palm-position distance over the aligned steps.
    let palm: f64 = query
        .palm
        .iter()
        .zip(&rep.palm)
        .map(|(&a, &b)| vec3_dist(a, b))
        .sum();
    out.push(palm);
    // (b) per-trace summed absolute articulation differences.
    for (qt, rt) in query.traces.iter().zip(&rep.traces) {
        out.push(qt.iter().zip(rt).map(|(a, b)| (a - b).abs()).sum());
    }
    // (c) absolute palm path-length difference.
    out.push((query.path_length - rep.path_length).abs());
    // (d) summed absolute per-step velocity-magnitude differences.
    out.push(
        query
            .speeds
            .iter()
            .zip(&rep.speeds)
            .map(|(a, b)| (a - b).abs())
            .sum(),
    );
}

/// Dissimilarity vector of pre-extracted query features.
pub fn dissimilarity_vector_features(
    query: &WindowFeatures,
    dict: &GestureDictionary,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(dict.vector_len());
    for rep in &dict.rep_features {
        push_components(&mut out, query, rep);
    }
    out
}

/// Dissimilarity vector of a 20-step window against the dictionary's
/// representation set.
pub fn dissimilarity_vector(query: &[HandFrame], dict: &GestureDictionary) -> Vec<f64> {
    dissimilarity_vector_features(&WindowFeatures::from_window(query), dict)
}

// --- persistence --------------------------------------------------------

/// First line of a serialized dictionary.
pub const DICT_MAGIC: &str = "skelgest-dict-v1";

/// Cap on stored window length, bounding allocation on untrusted files.
pub const MAX_DICT_STEPS: usize = 10_000;

/// Serializes a dictionary: the magic line, one `length;CLASS;frames`
/// line per class, then every example window as an
/// `entry;<rep|train>;CLASS;steps=K;quat=<0|1>` header followed by K
/// frame lines in the recording format. Floats round-trip bit for bit.
pub fn dictionary_to_string(dict: &GestureDictionary) -> String {
    let mut s = String::new();
    s.push_str(DICT_MAGIC);
    s.push('\n');
    for (class, len) in &dict.mean_length {
        let _ = writeln!(s, "length;{class};{len}");
    }
    for (which, entries) in [("rep", &dict.representation), ("train", &dict.training)] {
        for e in entries {
            let with_quat = e.window.iter().all(|f| f.rotations.is_some());
            let _ = writeln!(
                s,
                "entry;{which};{};steps={};quat={}",
                e.class,
                e.window.len(),
                if with_quat { 1 } else { 0 }
            );
            for f in &e.window {
                crate::io::write_frame_line(&mut s, f, with_quat);
            }
        }
    }
    s
}

/// Parses [`dictionary_to_string`] output. Rejects structural damage —
/// unknown classes, non-gesture representation windows, windows shorter
/// than 2 steps, missing frame lines, unsorted timestamps, entry
/// classes without a length record — and never panics on arbitrary
/// input. Representation features are recomputed, which reproduces the
/// originals exactly because the text format is lossless.
pub fn dictionary_from_string(text: &str, path: &str) -> Result<GestureDictionary> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        Some((_, first)) if first == DICT_MAGIC => {}
        Some((lineno, first)) => {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {DICT_MAGIC:?}, got {first:?}"),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }

    let mut mean_length: BTreeMap<GestureClass, usize> = BTreeMap::new();
    let mut representation: Vec<DictionaryEntry> = Vec::new();
    let mut training: Vec<DictionaryEntry> = Vec::new();
    while let Some((lineno, line)) = lines.next() {
        let fields: Vec<&str> = line.split(';').collect();
        match fields[0] {
            "length" => {
                if fields.len() != 3 {
                    return Err(Error::parse(path, lineno, "expected length;CLASS;frames"));
                }
                let class = GestureClass::from_name(fields[1])
                    .filter(|c| c.is_gesture())
                    .ok_or_else(|| {
                        Error::parse(path, lineno, format!("unknown class {:?}", fields[1]))
                    })?;
                let len: usize = fields[2]
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, "bad length"))?;
                if !(2..=MAX_DICT_STEPS).contains(&len) {
                    return Err(Error::parse(path, lineno, "length out of range"));
                }
                if mean_length.insert(class, len).is_some() {
                    return Err(Error::parse(path, lineno, format!("duplicate length for {class}")));
                }
            }
            "entry" => {
                if fields.len() != 5 {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "expected entry;<rep|train>;CLASS;steps=K;quat=<0|1>",
                    ));
                }
                let is_rep = match fields[1] {
                    "rep" => true,
                    "train" => false,
                    other => {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("expected rep or train, got {other:?}"),
                        ))
                    }
                };
                let class = GestureClass::from_name(fields[2]).ok_or_else(|| {
                    Error::parse(path, lineno, format!("unknown class {:?}", fields[2]))
                })?;
                if is_rep && !class.is_gesture() {
                    return Err(Error::parse(
                        path,
                        lineno,
                        "representation windows must be gestures",
                    ));
                }
                let steps: usize = fields[3]
                    .strip_prefix("steps=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "bad steps field"))?;
                if !(2..=MAX_DICT_STEPS).contains(&steps) {
                    return Err(Error::parse(path, lineno, "steps out of range"));
                }
                let with_quat = match fields[4] {
                    "quat=0" => false,
                    "quat=1" => true,
                    other => {
                        return Err(Error::parse(path, lineno, format!("bad quat field {other:?}")))
                    }
                };
                let mut window = Vec::with_capacity(steps);
                for _ in 0..steps {
                    let (flineno, fline) = lines.next().ok_or_else(|| {
                        Error::parse(path, lineno, "file ends inside an entry")
                    })?;
                    let frame = crate::io::parse_frame_line(fline, with_quat, path, flineno)?;
                    if let Some(prev) = window.last() {
                        let prev: &HandFrame = prev;
                        if frame.timestamp_ms <= prev.timestamp_ms {
                            return Err(Error::parse(
                                path,
                                flineno,
                                "timestamps must strictly increase",
                            ));
                        }
                    }
                    window.push(frame);
                }
                let entry = DictionaryEntry { class, window };
                if is_rep {
                    representation.push(entry);
                } else {
                    training.push(entry);
                }
            }
            other => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected length or entry record, got {other:?}"),
                ))
            }
        }
    }
    if representation.is_empty() {
        return Err(Error::parse(path, 0, "no representation windows"));
    }
    for e in representation.iter().chain(&training) {
        if e.class.is_gesture() && !mean_length.contains_key(&e.class) {
            return Err(Error::parse(
                path,
                0,
                format!("entry class {} has no length record", e.class),
            ));
        }
    }
    let rep_features = representation
        .iter()
        .map(|e| WindowFeatures::from_window(&e.window))
        .collect();
    Ok(GestureDictionary {
        representation,
        training,
        mean_length,
        rep_features,
    })
}

pub fn save_dictionary(path: &std::path::Path, dict: &GestureDictionary) -> Result<()> {
    std::fs::write(path, dictionary_to_string(dict))?;
    Ok(())
}

pub fn load_dictionary(path: &std::path::Path) -> Result<GestureDictionary> {
    let text = std::fs::read_to_string(path)?;
    dictionary_from_string(&text, &path.to_string_lossy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JOINT_COUNT;
    use crate::synth::{synth_generate, SynthConfig};

    /// A simple moving-hand window: palm glides along +x, fingers rigid.
    fn gliding_window(speed: f64, lift: f64) -> Vec<HandFrame> {
        (0..RESAMPLE_STEPS)
            .map(|t| {
                let mut pos = [[0.0; 3]; JOINT_COUNT];
                for (j, p) in pos.iter_mut().enumerate() {
                    p[0] = speed * t as f64 + j as f64 * 2.0;
                    p[1] = j as f64;
                    p[2] = lift;
                }
                HandFrame::new(pos, t as f64 * 20.0)
            })
            .collect()
    }

    fn dict_of(windows: Vec<(GestureClass, Vec<HandFrame>)>) -> GestureDictionary {
        let representation: Vec<DictionaryEntry> = windows
            .into_iter()
            .map(|(class, window)| DictionaryEntry { class, window })
            .collect();
        let rep_features = representation
            .iter()
            .map(|e| WindowFeatures::from_window(&e.window))
            .collect();
        GestureDictionary {
            representation,
            training: Vec::new(),
            mean_length: BTreeMap::new(),
            rep_features,
        }
    }

    #[test]
    fn self_dissimilarity_block_is_zero_and_others_are_not() {
        let dict = dict_of(vec![
            (GestureClass::Left, gliding_window(3.0, 0.0)),
            (GestureClass::Right, gliding_window(-2.0, 10.0)),
        ]);
        let v = dissimilarity_vector(&dict.representation[0].window, &dict);
        assert_eq!(v.len(), 24);
        assert!(v[..12].iter().all(|&x| x == 0.0), "own block {:?}", &v[..12]);
        assert!(v[12..].iter().any(|&x| x > 1.0), "other block {:?}", &v[12..]);
    }

    #[test]
    fn rigid_translation_moves_only_the_palm_component() {
        let rep = gliding_window(2.5, 5.0);
        let dict = dict_of(vec![(GestureClass::Circle, rep.clone())]);
        let query: Vec<HandFrame> = rep
            .iter()
            .map(|f| {
                let mut g = f.clone();
                for p in g.positions.iter_mut() {
                    p[0] += 10.0;
                }
                g
            })
            .collect();
        let v = dissimilarity_vector(&query, &dict);
        assert_eq!(v.len(), 12);
        assert!((v[0] - 200.0).abs() < 1e-9, "palm component {}", v[0]);
        for (i, &x) in v.iter().enumerate().skip(1) {
            assert!(x.abs() < 1e-9, "component {i} = {x}");
        }
    }

    #[test]
    fn dictionary_structure_and_determinism() {
        let config = SynthConfig {
            sequence_count: 5,
            gestures_min: 4,
            gestures_max: 4,
            seed: 11,
            ..SynthConfig::default()
        };
        let (seqs, spans) = synth_generate(&config).unwrap();
        let dict = build_dictionary(&seqs, &spans, 7, 3).unwrap();
        let again = build_dictionary(&seqs, &spans, 7, 3).unwrap();
        assert_eq!(dict, again);

        // 20 gesture entries split half-per-class; negatives stay in
        // the training remainder.
        let rep_n = dict.representation.len();
        let train_gestures = dict
            .training
            .iter()
            .filter(|e| e.class.is_gesture())
            .count();
        let train_negatives = dict.training.len() - train_gestures;
        assert_eq!(rep_n + train_gestures, spans.len());
        assert_eq!(train_negatives, 7);
        assert!(dict.representation.iter().all(|e| e.class.is_gesture()));
        assert!(dict
            .representation
            .iter()
            .chain(&dict.training)
            .all(|e| e.window.len() == RESAMPLE_STEPS));
        assert_eq!(dict.vector_len(), 12 * rep_n);

        // Mean lengths exist for every annotated class and are sane.
        for span in &spans {
            let l = dict.class_length(span.label).unwrap();
            assert!((2..=200).contains(&l));
        }
        assert!(dict.class_length(GestureClass::NonGesture).is_err());
    }

    #[test]
    fn stratified_split_is_per_class() {
        let config = SynthConfig {
            sequence_count: 9,
            gestures_min: 4,
            gestures_max: 4,
            seed: 5,
            ..SynthConfig::default()
        };
        let (seqs, spans) = synth_generate(&config).unwrap();
        let dict = build_dictionary(&seqs, &spans, 0, 1).unwrap();
        let mut total: BTreeMap<GestureClass, usize> = BTreeMap::new();
        for span in &spans {
            *total.entry(span.label).or_default() += 1;
        }
        let mut rep: BTreeMap<GestureClass, usize> = BTreeMap::new();
        for e in &dict.representation {
            *rep.entry(e.class).or_default() += 1;
        }
        for (class, &n) in &total {
            assert_eq!(
                rep.get(class).copied().unwrap_or(0),
                n / 2,
                "class {class} rep share"
            );
        }
    }

    #[test]
    fn empty_annotations_are_rejected() {
        let config = SynthConfig {
            sequence_count: 1,
            ..SynthConfig::default()
        };
        let (seqs, _) = synth_generate(&config).unwrap();
        assert!(build_dictionary(&seqs, &[], 0, 0).is_err());
    }

    #[test]
    fn non_gesture_windows_avoid_annotated_frames() {
        // Sampled negative windows must come from unannotated
        // stretches; verify the stretch computation directly.
        let spans = vec![
            AnnotationSpan::new("s", GestureClass::Grab, 10, 19),
            AnnotationSpan::new("s", GestureClass::Tap, 40, 49),
        ];
        let refs: Vec<&AnnotationSpan> = spans.iter().collect();
        let stretches = unannotated_stretches(60, &refs);
        assert_eq!(stretches, vec![(0, 10), (20, 20), (50, 10)]);
        // Degenerate: annotation touching both ends.
        let spans2 = vec![AnnotationSpan::new("s", GestureClass::Grab, 0, 59)];
        let refs2: Vec<&AnnotationSpan> = spans2.iter().collect();
        assert!(unannotated_stretches(60, &refs2).is_empty());
    }

    #[test]
    fn serialized_dictionary_round_trips_exactly() {
        let config = SynthConfig {
            classes: vec!["LEFT".into(), "GRAB".into(), "OK".into()],
            sequence_count: 4,
            seed: 21,
            ..SynthConfig::default()
        };
        let (seqs, spans) = synth_generate(&config).unwrap();
        let dict = build_dictionary(&seqs, &spans, 5, 3).unwrap();
        assert!(!dict.training.is_empty());

        let text = dictionary_to_string(&dict);
        let back = dictionary_from_string(&text, "t").unwrap();
        assert_eq!(back, dict);
        // A second cycle is byte-stable.
        assert_eq!(dictionary_to_string(&back), text);
    }

    #[test]
    fn rotations_survive_the_dictionary_format() {
        let window: Vec<HandFrame> = (0..3)
            .map(|t| {
                let mut f = gliding_window(1.0, 0.0)[t].clone();
                let mut quats = [[0.0; 4]; JOINT_COUNT];
                for (j, q) in quats.iter_mut().enumerate() {
                    q[0] = 1.0;
                    q[1] = 0.25 * (t as f64) + 0.01 * j as f64;
                }
                f.rotations = Some(quats);
                f
            })
            .collect();
        let mut dict = dict_of(vec![(GestureClass::Pinch, window.clone())]);
        dict.mean_length.insert(GestureClass::Pinch, 3);
        dict.training.push(DictionaryEntry {
            class: GestureClass::NonGesture,
            window,
        });
        let back = dictionary_from_string(&dictionary_to_string(&dict), "t").unwrap();
        assert_eq!(back, dict);
        assert!(back.representation[0].window[1].rotations.is_some());
    }

    #[test]
    fn damaged_dictionary_files_are_rejected() {
        let frame_line = |t: usize| {
            let mut s = format!("{}", t * 20);
            for j in 0..JOINT_COUNT {
                let _ = write!(s, ";{};{};{}", j, t, 0);
            }
            s
        };
        let good = format!(
            "{DICT_MAGIC}\nlength;LEFT;5\nentry;rep;LEFT;steps=2;quat=0\n{}\n{}\n",
            frame_line(0),
            frame_line(1)
        );
        assert!(dictionary_from_string(&good, "t").is_ok());

        let with_magic = |body: &str| format!("{DICT_MAGIC}\n{body}");
        for (text, needle) in [
            (String::new(), "empty file"),
            ("nonsense\n".to_string(), "expected \"skelgest-dict-v1\""),
            (with_magic("length;WAVE;5\n"), "unknown class"),
            (with_magic("length;NON_GESTURE;5\n"), "unknown class"),
            (with_magic("length;LEFT;1\n"), "length out of range"),
            (with_magic("length;LEFT\n"), "expected length;CLASS;frames"),
            (
                with_magic("length;LEFT;5\nlength;LEFT;6\n"),
                "duplicate length",
            ),
            (
                with_magic("entry;mid;LEFT;steps=2;quat=0\n"),
                "expected rep or train",
            ),
            (
                with_magic("entry;rep;NON_GESTURE;steps=2;quat=0\n"),
                "must be gestures",
            ),
            (
                with_magic("entry;rep;LEFT;steps=1;quat=0\n"),
                "steps out of range",
            ),
            (
                with_magic("entry;rep;LEFT;steps=2;quat=2\n"),
                "bad quat field",
            ),
            (
                format!("{DICT_MAGIC}\nentry;rep;LEFT;steps=3;quat=0\n{}\n{}\n", frame_line(0), frame_line(1)),
                "ends inside an entry",
            ),
            (
                format!("{DICT_MAGIC}\nentry;rep;LEFT;steps=2;quat=0\n{}\n0;1;2\n", frame_line(0)),
                "expected 61 fields",
            ),
            (
                format!("{DICT_MAGIC}\nentry;rep;LEFT;steps=2;quat=0\n{}\n{}\n", frame_line(1), frame_line(1)),
                "strictly increase",
            ),
            (
                format!("{DICT_MAGIC}\nentry;rep;LEFT;steps=2;quat=0\n{}\n{}\n", frame_line(0), frame_line(1)),
                "no length record",
            ),
            (DICT_MAGIC.to_string(), "no representation windows"),
            (with_magic("garbage;x\n"), "expected length or entry"),
        ] {
            let err = dictionary_from_string(&text, "t").unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?} -> {err}");
        }
    }
}
