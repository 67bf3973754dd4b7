//! Canonical data types for hand skeleton streams: the 20-joint layout,
//! timestamped frames, recordings, gesture classes and labeled spans,
//! plus the temporal window operations shared by every recognizer.

use crate::error::{Error, Result};

/// 3D point or vector in millimeters.
pub type Vec3 = [f64; 3];

/// Unit quaternion as (w, x, y, z).
pub type Quat = [f64; 4];

pub fn vec3_sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn vec3_add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn vec3_scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn vec3_norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn vec3_dist(a: Vec3, b: Vec3) -> f64 {
    vec3_norm(vec3_sub(a, b))
}

/// Number of joints in the canonical hand skeleton.
pub const JOINT_COUNT: usize = 20;

/// The 20 tracked joints of one hand, in canonical ordinal order.
///
/// One palm point, three thumb joints and four joints per finger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum JointId {
    Palm = 0,
    ThumbA = 1,
    ThumbB = 2,
    ThumbEnd = 3,
    IndexA = 4,
    IndexB = 5,
    IndexC = 6,
    IndexEnd = 7,
    MiddleA = 8,
    MiddleB = 9,
    MiddleC = 10,
    MiddleEnd = 11,
    RingA = 12,
    RingB = 13,
    RingC = 14,
    RingEnd = 15,
    PinkyA = 16,
    PinkyB = 17,
    PinkyC = 18,
    PinkyEnd = 19,
}

impl JointId {
    pub const ALL: [JointId; JOINT_COUNT] = [
        JointId::Palm,
        JointId::ThumbA,
        JointId::ThumbB,
        JointId::ThumbEnd,
        JointId::IndexA,
        JointId::IndexB,
        JointId::IndexC,
        JointId::IndexEnd,
        JointId::MiddleA,
        JointId::MiddleB,
        JointId::MiddleC,
        JointId::MiddleEnd,
        JointId::RingA,
        JointId::RingB,
        JointId::RingC,
        JointId::RingEnd,
        JointId::PinkyA,
        JointId::PinkyB,
        JointId::PinkyC,
        JointId::PinkyEnd,
    ];

    /// Fingertips, thumb to pinky.
    pub const FINGERTIPS: [JointId; 5] = [
        JointId::ThumbEnd,
        JointId::IndexEnd,
        JointId::MiddleEnd,
        JointId::RingEnd,
        JointId::PinkyEnd,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

/// One timestamped skeleton sample: 20 joint positions (mm) and,
/// optionally, 20 unit joint orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct HandFrame {
    pub positions: [Vec3; JOINT_COUNT],
    pub rotations: Option<[Quat; JOINT_COUNT]>,
    pub timestamp_ms: f64,
}

impl HandFrame {
    pub fn new(positions: [Vec3; JOINT_COUNT], timestamp_ms: f64) -> Self {
        HandFrame {
            positions,
            rotations: None,
            timestamp_ms,
        }
    }

    pub fn position(&self, joint: JointId) -> Vec3 {
        self.positions[joint.ordinal()]
    }
}

/// One recording: an ordered run of frames with a nominal sampling rate.
///
/// Timestamps are strictly increasing; the rate is stored per sequence
/// rather than assumed global because capture rates differ between rigs.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub id: String,
    pub frames: Vec<HandFrame>,
    pub frame_rate_hz: f64,
}

impl SkeletonSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Style of gesture execution, fixed per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GestureKind {
    /// A hand pose held fixed for a minimum time.
    Static,
    /// A single global palm trajectory.
    CoarseDynamic,
    /// Evolution of the fingers' articulation.
    FineDynamic,
    /// The non-gesture filler class.
    None,
}

/// The 18 gesture classes of the dictionary plus the non-gesture label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(usize)]
pub enum GestureClass {
    One = 0,
    Two = 1,
    Three = 2,
    Four = 3,
    Ok = 4,
    Menu = 5,
    Pointing = 6,
    Left = 7,
    Right = 8,
    Circle = 9,
    V = 10,
    Cross = 11,
    Grab = 12,
    Pinch = 13,
    Tap = 14,
    Deny = 15,
    Knob = 16,
    Expand = 17,
    NonGesture = 18,
}

/// Total number of labels including `NonGesture`.
pub const CLASS_COUNT: usize = 19;

/// Number of real gesture classes.
pub const GESTURE_CLASS_COUNT: usize = 18;

impl GestureClass {
    /// Every label, in ordinal order (`NonGesture` last).
    pub const ALL: [GestureClass; CLASS_COUNT] = [
        GestureClass::One,
        GestureClass::Two,
        GestureClass::Three,
        GestureClass::Four,
        GestureClass::Ok,
        GestureClass::Menu,
        GestureClass::Pointing,
        GestureClass::Left,
        GestureClass::Right,
        GestureClass::Circle,
        GestureClass::V,
        GestureClass::Cross,
        GestureClass::Grab,
        GestureClass::Pinch,
        GestureClass::Tap,
        GestureClass::Deny,
        GestureClass::Knob,
        GestureClass::Expand,
        GestureClass::NonGesture,
    ];

    /// The 18 real gesture classes.
    pub const GESTURES: [GestureClass; GESTURE_CLASS_COUNT] = [
        GestureClass::One,
        GestureClass::Two,
        GestureClass::Three,
        GestureClass::Four,
        GestureClass::Ok,
        GestureClass::Menu,
        GestureClass::Pointing,
        GestureClass::Left,
        GestureClass::Right,
        GestureClass::Circle,
        GestureClass::V,
        GestureClass::Cross,
        GestureClass::Grab,
        GestureClass::Pinch,
        GestureClass::Tap,
        GestureClass::Deny,
        GestureClass::Knob,
        GestureClass::Expand,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<GestureClass> {
        GestureClass::ALL.get(i).copied()
    }

    pub fn kind(self) -> GestureKind {
        use GestureClass::*;
        match self {
            One | Two | Three | Four | Ok | Menu | Pointing => GestureKind::Static,
            Left | Right | Circle | V | Cross => GestureKind::CoarseDynamic,
            Grab | Pinch | Tap | Deny | Knob | Expand => GestureKind::FineDynamic,
            NonGesture => GestureKind::None,
        }
    }

    pub fn is_gesture(self) -> bool {
        self != GestureClass::NonGesture
    }

    pub fn name(self) -> &'static str {
        use GestureClass::*;
        match self {
            One => "ONE",
            Two => "TWO",
            Three => "THREE",
            Four => "FOUR",
            Ok => "OK",
            Menu => "MENU",
            Pointing => "POINTING",
            Left => "LEFT",
            Right => "RIGHT",
            Circle => "CIRCLE",
            V => "V",
            Cross => "CROSS",
            Grab => "GRAB",
            Pinch => "PINCH",
            Tap => "TAP",
            Deny => "DENY",
            Knob => "KNOB",
            Expand => "EXPAND",
            NonGesture => "NON_GESTURE",
        }
    }

    pub fn from_name(s: &str) -> Option<GestureClass> {
        GestureClass::ALL.iter().copied().find(|c| c.name() == s)
    }
}

impl std::fmt::Display for GestureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A labeled temporal interval inside one sequence, with inclusive frame
/// bounds. The same shape serves ground-truth annotations and detector
/// output, so the scorer consumes both through one grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub sequence_id: String,
    pub label: GestureClass,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Ground-truth annotation of one gesture occurrence.
pub type AnnotationSpan = Span;

/// One detected gesture event.
pub type DetectionEvent = Span;

impl Span {
    pub fn new(sequence_id: impl Into<String>, label: GestureClass, start: usize, end: usize) -> Self {
        Span {
            sequence_id: sequence_id.into(),
            label,
            start_frame: start,
            end_frame: end,
        }
    }

    /// Number of frames covered (bounds are inclusive).
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frames shared with another span (same sequence assumed).
    pub fn intersection(&self, other: &Span) -> usize {
        let lo = self.start_frame.max(other.start_frame);
        let hi = self.end_frame.min(other.end_frame);
        if lo > hi {
            0
        } else {
            hi - lo + 1
        }
    }

    /// Frame-level intersection over union with another span.
    pub fn iou(&self, other: &Span) -> f64 {
        let inter = self.intersection(other);
        let union = self.len() + other.len() - inter;
        inter as f64 / union as f64
    }

    pub fn validate(&self, seq_len: usize) -> Result<()> {
        if self.start_frame > self.end_frame || self.end_frame >= seq_len {
            return Err(Error::SpanOutOfRange {
                id: self.sequence_id.clone(),
                start: self.start_frame,
                end: self.end_frame,
                len: seq_len,
            });
        }
        Ok(())
    }
}

/// Returns exactly `length` consecutive frames starting at `start`.
pub fn crop_window(seq: &SkeletonSequence, start: usize, length: usize) -> Result<&[HandFrame]> {
    let end = start.checked_add(length).ok_or(Error::CropOutOfRange {
        start,
        len: length,
        seq_len: seq.len(),
    })?;
    if end > seq.len() {
        return Err(Error::CropOutOfRange {
            start,
            len: length,
            seq_len: seq.len(),
        });
    }
    Ok(&seq.frames[start..end])
}

/// Resamples a frame window to exactly `target_steps` frames by linear
/// interpolation per coordinate, with endpoints preserved exactly.
///
/// The interpolation parameter is computed in integer arithmetic so that
/// an identity resample (input length == target) copies frames verbatim.
/// Quaternions, when present, are lerped component-wise and renormalized.
pub fn resample_window(window: &[HandFrame], target_steps: usize) -> Result<Vec<HandFrame>> {
    if window.len() < 2 {
        return Err(Error::WindowTooShort {
            got: window.len(),
            need: 2,
        });
    }
    if target_steps < 2 {
        return Err(Error::WindowTooShort {
            got: target_steps,
            need: 2,
        });
    }
    let n = window.len();
    let mut out = Vec::with_capacity(target_steps);
    for k in 0..target_steps {
        // Position k maps to parameter k * (n-1) / (target-1) along the input.
        let num = k * (n - 1);
        let den = target_steps - 1;
        let idx = num / den;
        let rem = num % den;
        if rem == 0 {
            out.push(window[idx].clone());
            continue;
        }
        let t = rem as f64 / den as f64;
        let a = &window[idx];
        let b = &window[idx + 1];
        let mut positions = [[0.0; 3]; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            for z in 0..3 {
                positions[j][z] = a.positions[j][z] + t * (b.positions[j][z] - a.positions[j][z]);
            }
        }
        let rotations = match (&a.rotations, &b.rotations) {
            (Some(ra), Some(rb)) => {
                let mut rot = [[0.0; 4]; JOINT_COUNT];
                for j in 0..JOINT_COUNT {
                    let mut q = [0.0; 4];
                    for z in 0..4 {
                        q[z] = ra[j][z] + t * (rb[j][z] - ra[j][z]);
                    }
                    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
                    if norm > 1e-12 {
                        for v in q.iter_mut() {
                            *v /= norm;
                        }
                    } else {
                        q = [1.0, 0.0, 0.0, 0.0];
                    }
                    rot[j] = q;
                }
                Some(rot)
            }
            _ => None,
        };
        out.push(HandFrame {
            positions,
            rotations,
            timestamp_ms: a.timestamp_ms + t * (b.timestamp_ms - a.timestamp_ms),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn frame_at(x: f64, t: f64) -> HandFrame {
        let mut positions = [[0.0; 3]; JOINT_COUNT];
        for p in positions.iter_mut() {
            p[0] = x;
        }
        HandFrame::new(positions, t)
    }

    fn seq_linear(n: usize) -> SkeletonSequence {
        SkeletonSequence {
            id: "lin".into(),
            frames: (0..n).map(|t| frame_at(t as f64, t as f64 * 10.0)).collect(),
            frame_rate_hz: 100.0,
        }
    }

    #[test]
    fn joint_ordinals_stable() {
        for (i, j) in JointId::ALL.iter().enumerate() {
            assert_eq!(j.ordinal(), i);
        }
        assert_eq!(JointId::ALL.len(), 20);
        assert_eq!(JointId::IndexEnd.ordinal(), 7);
        assert_eq!(JointId::PinkyA.ordinal(), 16);
    }

    #[test]
    fn class_kinds_fixed() {
        use GestureClass::*;
        for c in [One, Two, Three, Four, Ok, Menu, Pointing] {
            assert_eq!(c.kind(), GestureKind::Static);
        }
        for c in [Left, Right, Circle, V, Cross] {
            assert_eq!(c.kind(), GestureKind::CoarseDynamic);
        }
        for c in [Grab, Pinch, Tap, Deny, Knob, Expand] {
            assert_eq!(c.kind(), GestureKind::FineDynamic);
        }
        assert_eq!(NonGesture.kind(), GestureKind::None);
        assert_eq!(GestureClass::GESTURES.len(), 18);
    }

    #[test]
    fn class_names_round_trip() {
        for c in GestureClass::ALL {
            assert_eq!(GestureClass::from_name(c.name()), Some(c));
        }
        assert_eq!(GestureClass::from_name("NOPE"), None);
    }

    #[test]
    fn crop_basic() {
        let seq = seq_linear(10);
        let w = crop_window(&seq, 0, 10).unwrap();
        assert_eq!(w.len(), 10);
        let w = crop_window(&seq, 3, 4).unwrap();
        let xs: Vec<f64> = w.iter().map(|f| f.positions[0][0]).collect();
        assert_eq!(xs, vec![3.0, 4.0, 5.0, 6.0]);
        assert!(crop_window(&seq, 8, 5).is_err());
    }

    #[test]
    fn resample_identity() {
        let seq = seq_linear(20);
        let out = resample_window(&seq.frames, 20).unwrap();
        assert_eq!(out, seq.frames);
    }

    #[test]
    fn resample_linear_exact() {
        // x(t) = t over 39 frames resampled to 20 steps lands on 0,2,4,...,38.
        let seq = seq_linear(39);
        let out = resample_window(&seq.frames, 20).unwrap();
        let xs: Vec<f64> = out.iter().map(|f| f.positions[0][0]).collect();
        let expect: Vec<f64> = (0..20).map(|k| (2 * k) as f64).collect();
        for (a, b) in xs.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn resample_matches_interpolation_oracle() {
        // 7 frames with a non-linear value profile; compare against direct
        // evaluation of the piecewise-linear interpolant at k*6/19.
        let values = [0.0, 1.0, -2.0, 4.0, 0.5, 3.0, -1.0];
        let frames: Vec<HandFrame> = values
            .iter()
            .enumerate()
            .map(|(t, &v)| frame_at(v, t as f64))
            .collect();
        let out = resample_window(&frames, 20).unwrap();
        assert_eq!(out.len(), 20);
        for (k, f) in out.iter().enumerate() {
            let s = k as f64 * 6.0 / 19.0;
            let i = (s.floor() as usize).min(5);
            let t = s - i as f64;
            let expect = values[i] + t * (values[i + 1] - values[i]);
            assert!(
                (f.positions[0][0] - expect).abs() < 1e-12,
                "step {k}: {} vs {expect}",
                f.positions[0][0]
            );
        }
        assert_eq!(out[0].positions[0][0], values[0]);
        assert_eq!(out[19].positions[0][0], values[6]);
    }

    #[test]
    fn resample_too_short() {
        let seq = seq_linear(1);
        assert!(resample_window(&seq.frames, 20).is_err());
    }

    #[test]
    fn span_iou_counts_frames() {
        let a = Span::new("s", GestureClass::One, 10, 19);
        let b = Span::new("s", GestureClass::One, 15, 24);
        assert_eq!(a.intersection(&b), 5);
        assert!((a.iou(&b) - 5.0 / 15.0).abs() < 1e-12);
    }
}
