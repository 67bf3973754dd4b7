//! Text formats for skeleton recordings and labeled spans.
//!
//! A recording file carries a one-line header
//! `frames=<n>;rate=<hz>;joints=20;quat=<0|1>` followed by one line per
//! frame: the timestamp in milliseconds, then per joint `x;y;z` (plus
//! `qw;qx;qy;qz` when `quat=1`), all `;`-separated. A span file carries
//! one `sequence_id;LABEL;start_frame;end_frame` record per line. Blank
//! lines and `#` comments are allowed in both.
//!
//! Floats are written with the shortest round-trip formatting, so a
//! write/parse cycle reproduces every value bit for bit. Parsers reject
//! malformed structure, non-finite numbers and unsorted timestamps with
//! a line-numbered error; they never panic on arbitrary input.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    AnnotationSpan, GestureClass, HandFrame, SkeletonSequence, Span, JOINT_COUNT,
};

/// File extension used for skeleton recordings.
pub const SEQUENCE_EXT: &str = "skel";

/// Default span file name inside a dataset directory.
pub const ANNOTATION_FILE: &str = "annotations.txt";

fn parse_num(field: &str, path: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad number {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite number {field:?}")));
    }
    Ok(v)
}

fn header_field<'a>(part: Option<&'a str>, key: &str, path: &str) -> Result<&'a str> {
    let part = part.ok_or_else(|| Error::parse(path, 1, format!("missing header field {key}")))?;
    part.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse(path, 1, format!("expected {key}=<value>, got {part:?}")))
}

/// Parses one `t;x;y;z…` frame line (quaternions expected when
/// `with_quat`). Shared by the recording and dictionary formats.
pub(crate) fn parse_frame_line(
    line: &str,
    with_quat: bool,
    path: &str,
    lineno: usize,
) -> Result<HandFrame> {
    let per_joint = if with_quat { 7 } else { 3 };
    let expect_fields = 1 + JOINT_COUNT * per_joint;
    let fields: Vec<&str> = line.split(';').collect();
    if fields.len() != expect_fields {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {expect_fields} fields, got {}", fields.len()),
        ));
    }
    let timestamp_ms = parse_num(fields[0], path, lineno)?;
    let mut positions = [[0.0; 3]; JOINT_COUNT];
    let mut rotations = if with_quat {
        Some([[0.0; 4]; JOINT_COUNT])
    } else {
        None
    };
    for j in 0..JOINT_COUNT {
        let base = 1 + j * per_joint;
        for z in 0..3 {
            positions[j][z] = parse_num(fields[base + z], path, lineno)?;
        }
        if let Some(rot) = rotations.as_mut() {
            for z in 0..4 {
                rot[j][z] = parse_num(fields[base + 3 + z], path, lineno)?;
            }
        }
    }
    Ok(HandFrame {
        positions,
        rotations,
        timestamp_ms,
    })
}

/// Appends one frame line. Every frame must carry rotations when
/// `with_quat` is set.
pub(crate) fn write_frame_line(s: &mut String, f: &HandFrame, with_quat: bool) {
    let _ = write!(s, "{}", f.timestamp_ms);
    for j in 0..JOINT_COUNT {
        let p = f.positions[j];
        let _ = write!(s, ";{};{};{}", p[0], p[1], p[2]);
        if with_quat {
            let q = f.rotations.as_ref().unwrap()[j];
            let _ = write!(s, ";{};{};{};{}", q[0], q[1], q[2], q[3]);
        }
    }
    s.push('\n');
}

/// Parses a recording from text. `path` only labels errors; the sequence
/// id is supplied by the caller (usually the file stem).
pub fn parse_sequence_str(id: &str, text: &str, path: &str) -> Result<SkeletonSequence> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut parts = header.split(';');
    let frames: usize = header_field(parts.next(), "frames", path)?
        .parse()
        .map_err(|_| Error::parse(path, hline, "bad frame count"))?;
    let rate = parse_num(header_field(parts.next(), "rate", path)?, path, hline)?;
    let joints: usize = header_field(parts.next(), "joints", path)?
        .parse()
        .map_err(|_| Error::parse(path, hline, "bad joint count"))?;
    let quat_flag = header_field(parts.next(), "quat", path)?;
    if parts.next().is_some() {
        return Err(Error::parse(path, hline, "trailing header fields"));
    }
    if joints != JOINT_COUNT {
        return Err(Error::parse(
            path,
            hline,
            format!("expected joints={JOINT_COUNT}, got {joints}"),
        ));
    }
    let with_quat = match quat_flag {
        "0" => false,
        "1" => true,
        other => return Err(Error::parse(path, hline, format!("quat must be 0 or 1, got {other:?}"))),
    };
    if frames == 0 {
        return Err(Error::parse(path, hline, "frame count must be positive"));
    }
    if rate <= 0.0 {
        return Err(Error::parse(path, hline, "rate must be positive"));
    }

    // The header count is verified after parsing; never trust it for
    // allocation, or a hostile header could reserve gigabytes.
    let mut out: Vec<HandFrame> = Vec::with_capacity(frames.min(4096));
    for (lineno, line) in lines {
        let frame = parse_frame_line(line, with_quat, path, lineno)?;
        if let Some(prev) = out.last() {
            if frame.timestamp_ms <= prev.timestamp_ms {
                return Err(Error::parse(path, lineno, "timestamps must strictly increase"));
            }
        }
        out.push(frame);
    }
    if out.len() != frames {
        return Err(Error::parse(
            path,
            0,
            format!("header says {frames} frames, file has {}", out.len()),
        ));
    }
    Ok(SkeletonSequence {
        id: id.to_string(),
        frames: out,
        frame_rate_hz: rate,
    })
}

/// Serializes a recording. Quaternions are written only when every frame
/// carries them.
pub fn sequence_to_string(seq: &SkeletonSequence) -> String {
    let with_quat = seq.frames.iter().all(|f| f.rotations.is_some());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "frames={};rate={};joints={};quat={}",
        seq.frames.len(),
        seq.frame_rate_hz,
        JOINT_COUNT,
        if with_quat { 1 } else { 0 }
    );
    for f in &seq.frames {
        let _ = write!(s, "{}", f.timestamp_ms);
        for j in 0..JOINT_COUNT {
            let p = f.positions[j];
            let _ = write!(s, ";{};{};{}", p[0], p[1], p[2]);
            if with_quat {
                let q = f.rotations.as_ref().unwrap()[j];
                let _ = write!(s, ";{};{};{};{}", q[0], q[1], q[2], q[3]);
            }
        }
        s.push('\n');
    }
    s
}

pub fn read_sequence(path: &Path) -> Result<SkeletonSequence> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = std::fs::read_to_string(path)?;
    parse_sequence_str(&id, &text, &path.to_string_lossy())
}

pub fn write_sequence(path: &Path, seq: &SkeletonSequence) -> Result<()> {
    std::fs::write(path, sequence_to_string(seq))?;
    Ok(())
}

/// Parses labeled spans from text; bounds are inclusive frame indices.
pub fn parse_annotations_str(text: &str, path: &str) -> Result<Vec<Span>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(';').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let label = GestureClass::from_name(fields[1].trim())
            .ok_or_else(|| Error::parse(path, lineno, format!("unknown label {:?}", fields[1])))?;
        let start: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, "bad start frame"))?;
        let end: usize = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, "bad end frame"))?;
        if start > end {
            return Err(Error::parse(path, lineno, "start frame after end frame"));
        }
        out.push(Span::new(fields[0].trim(), label, start, end));
    }
    Ok(out)
}

pub fn annotations_to_string(spans: &[Span]) -> String {
    let mut s = String::new();
    for sp in spans {
        let _ = writeln!(
            s,
            "{};{};{};{}",
            sp.sequence_id, sp.label, sp.start_frame, sp.end_frame
        );
    }
    s
}

pub fn read_annotations(path: &Path) -> Result<Vec<Span>> {
    let text = std::fs::read_to_string(path)?;
    parse_annotations_str(&text, &path.to_string_lossy())
}

pub fn write_annotations(path: &Path, spans: &[Span]) -> Result<()> {
    std::fs::write(path, annotations_to_string(spans))?;
    Ok(())
}

/// Reads every `.skel` file in a directory, sorted by file name so the
/// dataset order never depends on directory enumeration order.
pub fn read_sequence_dir(dir: &Path) -> Result<Vec<SkeletonSequence>> {
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == SEQUENCE_EXT).unwrap_or(false))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_sequence(p)).collect()
}

/// Loads a dataset directory: all recordings plus `annotations.txt` when
/// present. Every span is checked against its sequence's length.
pub fn read_dataset(dir: &Path) -> Result<(Vec<SkeletonSequence>, Vec<AnnotationSpan>)> {
    let seqs = read_sequence_dir(dir)?;
    let ann_path = dir.join(ANNOTATION_FILE);
    let spans = if ann_path.exists() {
        read_annotations(&ann_path)?
    } else {
        Vec::new()
    };
    for sp in &spans {
        let seq = seqs
            .iter()
            .find(|s| s.id == sp.sequence_id)
            .ok_or_else(|| Error::UnknownSequence(sp.sequence_id.clone()))?;
        sp.validate(seq.len())?;
    }
    Ok((seqs, spans))
}

/// Writes a dataset directory: one `.skel` file per recording plus
/// `annotations.txt`.
pub fn write_dataset(
    dir: &Path,
    seqs: &[SkeletonSequence],
    spans: &[AnnotationSpan],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for seq in seqs {
        write_sequence(&dir.join(format!("{}.{SEQUENCE_EXT}", seq.id)), seq)?;
    }
    write_annotations(&dir.join(ANNOTATION_FILE), spans)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JOINT_COUNT;

    fn sample_seq(with_quat: bool) -> SkeletonSequence {
        let mut frames = Vec::new();
        for t in 0..5 {
            let mut positions = [[0.0; 3]; JOINT_COUNT];
            for (j, p) in positions.iter_mut().enumerate() {
                p[0] = t as f64 * 1.5 + j as f64 * 0.25;
                p[1] = (t * j) as f64 / 7.0;
                p[2] = -3.25 + t as f64 / 3.0;
            }
            let rotations = with_quat.then(|| {
                let mut rot = [[0.0; 4]; JOINT_COUNT];
                for (j, q) in rot.iter_mut().enumerate() {
                    let a = (t + j) as f64 / 11.0;
                    let n = (1.0 + a * a).sqrt();
                    *q = [1.0 / n, a / n, 0.0, 0.0];
                }
                rot
            });
            frames.push(HandFrame {
                positions,
                rotations,
                timestamp_ms: t as f64 * 16.3,
            });
        }
        SkeletonSequence {
            id: "sample".into(),
            frames,
            frame_rate_hz: 61.3,
        }
    }

    #[test]
    fn sequence_round_trip_exact() {
        for with_quat in [false, true] {
            let seq = sample_seq(with_quat);
            let text = sequence_to_string(&seq);
            let back = parse_sequence_str("sample", &text, "mem").unwrap();
            assert_eq!(back, seq);
        }
    }

    #[test]
    fn sequence_rejects_bad_header() {
        for text in [
            "",
            "frames=2;rate=50",
            "frames=2;rate=50;joints=19;quat=0\n",
            "frames=2;rate=50;joints=20;quat=2\n",
            "frames=0;rate=50;joints=20;quat=0\n",
            "frames=1;rate=-1;joints=20;quat=0\n",
            "frames=1;rate=nan;joints=20;quat=0\n",
            "frames=1;rate=50;joints=20;quat=0;extra=1\n",
        ] {
            assert!(parse_sequence_str("x", text, "mem").is_err(), "{text:?}");
        }
    }

    #[test]
    fn sequence_rejects_bad_body() {
        let seq = sample_seq(false);
        let good = sequence_to_string(&seq);

        // Wrong field count on a frame line.
        let mut lines: Vec<String> = good.lines().map(String::from).collect();
        lines[2].push_str(";1.0");
        assert!(parse_sequence_str("x", &lines.join("\n"), "mem").is_err());

        // Non-finite coordinate.
        let bad = good.replacen("-3.25", "inf", 1);
        assert!(parse_sequence_str("x", &bad, "mem").is_err());

        // Frame count mismatch with header.
        let mut lines: Vec<String> = good.lines().map(String::from).collect();
        lines.pop();
        assert!(parse_sequence_str("x", &lines.join("\n"), "mem").is_err());

        // Timestamps must strictly increase.
        let bad = good.replacen("\n16.3;", "\n0;", 1);
        assert!(parse_sequence_str("x", &bad, "mem").is_err());
    }

    #[test]
    fn annotations_round_trip() {
        let spans = vec![
            Span::new("seq_000", GestureClass::Grab, 10, 55),
            Span::new("seq_000", GestureClass::Left, 120, 180),
            Span::new("seq_001", GestureClass::NonGesture, 0, 3),
        ];
        let text = annotations_to_string(&spans);
        let back = parse_annotations_str(&text, "mem").unwrap();
        assert_eq!(back, spans);
    }

    #[test]
    fn annotations_reject_malformed() {
        for text in [
            "seq;GRAB;10",
            "seq;WIBBLE;10;20",
            "seq;GRAB;x;20",
            "seq;GRAB;21;20",
        ] {
            assert!(parse_annotations_str(text, "mem").is_err(), "{text:?}");
        }
        // Comments and blank lines are fine.
        let ok = "# header\n\nseq;GRAB;1;2\n";
        assert_eq!(parse_annotations_str(ok, "mem").unwrap().len(), 1);
    }

    #[test]
    fn dataset_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let seqs = vec![sample_seq(false)];
        let spans = vec![Span::new("sample", GestureClass::Tap, 1, 3)];
        write_dataset(dir.path(), &seqs, &spans).unwrap();
        let (rseqs, rspans) = read_dataset(dir.path()).unwrap();
        assert_eq!(rseqs, seqs);
        assert_eq!(rspans, spans);

        // A span past the end of its sequence is rejected on load.
        let bad = vec![Span::new("sample", GestureClass::Tap, 1, 99)];
        write_annotations(&dir.path().join(ANNOTATION_FILE), &bad).unwrap();
        assert!(read_dataset(dir.path()).is_err());

        // A span naming a missing sequence is rejected on load.
        let bad = vec![Span::new("ghost", GestureClass::Tap, 1, 2)];
        write_annotations(&dir.path().join(ANNOTATION_FILE), &bad).unwrap();
        assert!(read_dataset(dir.path()).is_err());
    }
}
