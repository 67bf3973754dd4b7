//! Procedural generation of labeled hand-skeleton streams: parametric
//! templates for all 18 gesture classes embedded between low-frequency
//! idle gesticulation, with seeded Gaussian jitter and exact span
//! annotations. Used for end-to-end pipeline tests and demos.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    AnnotationSpan, GestureClass, GestureKind, HandFrame, SkeletonSequence, Span, Vec3,
    JOINT_COUNT,
};

/// Generation knobs. `gestures_min..=gestures_max` gestures are placed
/// per sequence (the mirrored corpus uses 3..=5), classes assigned
/// round-robin so per-class counts stay balanced.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Class names to include (see [`GestureClass::name`]).
    pub classes: Vec<String>,
    pub sequence_count: usize,
    pub gestures_min: usize,
    pub gestures_max: usize,
    /// Standard deviation of the per-coordinate Gaussian jitter (mm).
    pub noise_mm: f64,
    /// Base amplitude of the idle whole-hand drift (mm).
    pub idle_amplitude_mm: f64,
    pub frame_rate_hz: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            classes: GestureClass::GESTURES.iter().map(|c| c.name().to_string()).collect(),
            sequence_count: 10,
            gestures_min: 3,
            gestures_max: 5,
            noise_mm: 0.8,
            idle_amplitude_mm: 10.0,
            frame_rate_hz: 50.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.sequence_count == 0 {
            return Err(Error::Invalid("need at least one class and one sequence".into()));
        }
        if self.gestures_min == 0 || self.gestures_min > self.gestures_max {
            return Err(Error::Invalid("gesture count range must be 1 ≤ min ≤ max".into()));
        }
        if !(self.noise_mm.is_finite() && self.noise_mm >= 0.0)
            || !(self.idle_amplitude_mm.is_finite() && self.idle_amplitude_mm >= 0.0)
        {
            return Err(Error::Invalid("noise and idle amplitude must be non-negative".into()));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(Error::Invalid("frame rate must be positive".into()));
        }
        Ok(())
    }
}

// --- canonical poses ----------------------------------------------------

/// Resting pose: flat open hand, palm at the origin, fingers fanned in
/// the x-y plane, millimetre scale.
pub fn rest_pose() -> [Vec3; JOINT_COUNT] {
    [
        [0.0, 0.0, 0.0],    // palm
        [45.0, 15.0, 0.0],  // thumb A
        [70.0, 35.0, 0.0],  // thumb B
        [85.0, 50.0, 0.0],  // thumb end
        [25.0, 45.0, 0.0],  // index A
        [32.0, 75.0, 0.0],  // index B
        [36.0, 95.0, 0.0],  // index C
        [40.0, 115.0, 0.0], // index end
        [0.0, 50.0, 0.0],   // middle A
        [0.0, 85.0, 0.0],   // middle B
        [0.0, 108.0, 0.0],  // middle C
        [0.0, 128.0, 0.0],  // middle end
        [-22.0, 47.0, 0.0], // ring A
        [-28.0, 79.0, 0.0], // ring B
        [-32.0, 100.0, 0.0],// ring C
        [-36.0, 118.0, 0.0],// ring end
        [-42.0, 40.0, 0.0], // pinky A
        [-50.0, 65.0, 0.0], // pinky B
        [-55.0, 82.0, 0.0], // pinky C
        [-60.0, 95.0, 0.0], // pinky end
    ]
}

/// Joint indices per finger, thumb first, base to tip.
const FINGERS: [&[usize]; 5] = [&[1, 2, 3], &[4, 5, 6, 7], &[8, 9, 10, 11], &[12, 13, 14, 15], &[16, 17, 18, 19]];

/// How strongly each joint along a finger participates in a curl.
fn curl_depth(finger: usize, pos_in_finger: usize) -> f64 {
    if finger == 0 {
        [0.25, 0.7, 1.0][pos_in_finger]
    } else {
        [0.15, 0.55, 0.8, 1.0][pos_in_finger]
    }
}

/// Curls one finger of `pose` toward the palm by `amount` ∈ [0,1].
fn curl_finger(pose: &mut [Vec3; JOINT_COUNT], finger: usize, amount: f64) {
    if amount == 0.0 {
        return;
    }
    let rest = rest_pose();
    for (k, &j) in FINGERS[finger].iter().enumerate() {
        // Fold toward a point hovering over the palm heel.
        let target = [rest[j][0] * 0.3, 20.0, 25.0];
        let w = curl_depth(finger, k) * amount;
        for a in 0..3 {
            pose[j][a] = rest[j][a] + w * (target[a] - rest[j][a]);
        }
    }
}

/// Fans the fingers apart (spread > 1) or together (< 1) by scaling
/// their x-offsets from the palm.
fn spread_fingers(pose: &mut [Vec3; JOINT_COUNT], spread: f64) {
    for joints in FINGERS.iter().skip(1) {
        for &j in *joints {
            pose[j][0] *= spread;
        }
    }
}

fn rotate_about_palm(pose: &mut [Vec3; JOINT_COUNT], axis: usize, angle_rad: f64) {
    let (s, c) = angle_rad.sin_cos();
    let palm = pose[0];
    let (a, b) = match axis {
        0 => (1, 2), // about x: rotate y,z
        1 => (2, 0), // about y: rotate z,x
        _ => (0, 1), // about z: rotate x,y
    };
    for p in pose.iter_mut() {
        let pa = p[a] - palm[a];
        let pb = p[b] - palm[b];
        p[a] = palm[a] + c * pa - s * pb;
        p[b] = palm[b] + s * pa + c * pb;
    }
}

fn translate(pose: &mut [Vec3; JOINT_COUNT], by: Vec3) {
    for p in pose.iter_mut() {
        for a in 0..3 {
            p[a] += by[a];
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Piecewise-linear ramp up to 1 at `peak`, back to 0 at 1. The peak
/// fraction is chosen so uniformly spaced samples never repeat a value
/// on consecutive frames (monotone templates stay strictly monotone).
fn peak_ramp(u: f64, peak: f64) -> f64 {
    if u <= peak {
        u / peak
    } else {
        (1.0 - u) / (1.0 - peak)
    }
}

fn lerp3(a: Vec3, b: Vec3, w: f64) -> Vec3 {
    [
        a[0] + w * (b[0] - a[0]),
        a[1] + w * (b[1] - a[1]),
        a[2] + w * (b[2] - a[2]),
    ]
}

/// Piecewise-linear path through `points` (first = last = origin for
/// continuity), evaluated at u ∈ [0,1].
fn poly_path(points: &[Vec3], u: f64) -> Vec3 {
    let segments = points.len() - 1;
    let scaled = (u * segments as f64).clamp(0.0, segments as f64);
    let i = (scaled.floor() as usize).min(segments - 1);
    lerp3(points[i], points[i + 1], scaled - i as f64)
}

// --- per-class templates ------------------------------------------------

/// Held pose of a static class at full formation.
fn static_pose(class: GestureClass) -> [Vec3; JOINT_COUNT] {
    let mut pose = rest_pose();
    match class {
        GestureClass::One => {
            for f in [0, 2, 3, 4] {
                curl_finger(&mut pose, f, 1.0);
            }
        }
        GestureClass::Two => {
            for f in [0, 3, 4] {
                curl_finger(&mut pose, f, 1.0);
            }
        }
        GestureClass::Three => {
            for f in [0, 4] {
                curl_finger(&mut pose, f, 1.0);
            }
        }
        GestureClass::Four => {
            curl_finger(&mut pose, 0, 1.0);
        }
        GestureClass::Ok => {
            // Thumb and index tips meet in a ring; other fingers stay up.
            let meet = [38.0, 66.0, -10.0];
            let rest = rest_pose();
            for (&j, w) in [(2usize, 0.5), (3, 1.0)].iter().map(|(j, w)| (j, *w)) {
                pose[j] = lerp3(rest[j], meet, w);
            }
            for (&j, w) in [(5usize, 0.35), (6, 0.7), (7, 1.0)].iter().map(|(j, w)| (j, *w)) {
                pose[j] = lerp3(rest[j], meet, w);
            }
        }
        GestureClass::Menu => {
            spread_fingers(&mut pose, 1.25);
            rotate_about_palm(&mut pose, 1, 80.0_f64.to_radians());
        }
        GestureClass::Pointing => {
            for f in [0, 2, 3, 4] {
                curl_finger(&mut pose, f, 1.0);
            }
            rotate_about_palm(&mut pose, 0, -50.0_f64.to_radians());
        }
        _ => unreachable!("not a static class"),
    }
    pose
}

/// Full hand configuration of `class` at phase u ∈ [0,1], relative to
/// the idle baseline; u=0 and u=1 coincide with the resting pose.
pub fn gesture_pose(class: GestureClass, u: f64) -> [Vec3; JOINT_COUNT] {
    let mut pose = rest_pose();
    match class.kind() {
        GestureKind::Static => {
            // Form, hold, release.
            let w = if u < 0.15 {
                smoothstep(u / 0.15)
            } else if u > 0.85 {
                smoothstep((1.0 - u) / 0.15)
            } else {
                1.0
            };
            let held = static_pose(class);
            for (p, h) in pose.iter_mut().zip(&held) {
                *p = lerp3(*p, *h, w);
            }
        }
        GestureKind::CoarseDynamic => {
            let offset = match class {
                GestureClass::Left => {
                    let a = (PI * u).sin();
                    [-120.0 * a, 0.0, 0.0]
                }
                GestureClass::Right => {
                    let a = (PI * u).sin();
                    [120.0 * a, 0.0, 0.0]
                }
                GestureClass::Circle => {
                    let th = TAU * u;
                    [60.0 * (th.cos() - 1.0), 60.0 * th.sin(), 0.0]
                }
                GestureClass::V => poly_path(
                    &[[0.0; 3], [35.0, -70.0, 0.0], [70.0, 0.0, 0.0], [0.0; 3]],
                    u,
                ),
                GestureClass::Cross => poly_path(
                    &[
                        [0.0; 3],
                        [65.0, -65.0, 0.0],
                        [65.0, 0.0, 0.0],
                        [0.0, -65.0, 0.0],
                        [0.0; 3],
                    ],
                    u,
                ),
                _ => unreachable!("not a coarse class"),
            };
            translate(&mut pose, offset);
        }
        GestureKind::FineDynamic => match class {
            GestureClass::Grab => {
                let c = peak_ramp(u, 0.47);
                for f in 0..5 {
                    curl_finger(&mut pose, f, c);
                }
            }
            GestureClass::Pinch => {
                // Thumb and index tips converge to 2.5 mm apart.
                let c = peak_ramp(u, 0.47);
                let rest = rest_pose();
                let meet_thumb = [42.0, 78.75, 0.0];
                let meet_index = [42.0, 81.25, 0.0];
                pose[2] = lerp3(rest[2], lerp3(rest[2], meet_thumb, 0.6), c);
                pose[3] = lerp3(rest[3], meet_thumb, c);
                pose[5] = lerp3(rest[5], lerp3(rest[5], meet_index, 0.45), c);
                pose[6] = lerp3(rest[6], lerp3(rest[6], meet_index, 0.75), c);
                pose[7] = lerp3(rest[7], meet_index, c);
            }
            GestureClass::Tap => {
                let d = (PI * u).sin();
                for (j, w) in [(5usize, 0.35), (6, 0.7), (7, 1.0)] {
                    pose[j][2] -= 38.0 * w * d;
                }
                translate(&mut pose, [0.0, 0.0, -8.0 * d]);
            }
            GestureClass::Deny => {
                // Two side-to-side wags under a start/end envelope.
                let wag = (2.0 * TAU * u).sin() * (PI * u).sin();
                translate(&mut pose, [30.0 * wag, 0.0, 0.0]);
            }
            GestureClass::Knob => {
                let th = 65.0_f64.to_radians() * (PI * u).sin();
                rotate_about_palm(&mut pose, 2, th);
            }
            GestureClass::Expand => {
                // Close, then open wide, then relax back.
                let (closure, spread) = if u < 0.25 {
                    (0.75 * smoothstep(u / 0.25), 1.0)
                } else if u < 0.75 {
                    let w = smoothstep((u - 0.25) / 0.5);
                    (0.75 * (1.0 - w), 1.0 + 0.35 * w)
                } else {
                    (0.0, 1.35 - 0.35 * smoothstep((u - 0.75) / 0.25))
                };
                for f in 0..5 {
                    curl_finger(&mut pose, f, closure);
                }
                spread_fingers(&mut pose, spread);
            }
            _ => unreachable!("not a fine class"),
        },
        GestureKind::None => unreachable!("non-gesture has no template"),
    }
    pose
}

// --- idle model and assembly --------------------------------------------

struct IdleComponent {
    amp: Vec3,
    freq: Vec3,
    phase: Vec3,
}

struct IdleModel {
    components: Vec<IdleComponent>,
    curl_freq: f64,
    curl_phase: f64,
}

impl IdleModel {
    fn draw(rng: &mut ChaCha8Rng, amplitude: f64) -> IdleModel {
        let n = rng.gen_range(2..=3usize);
        let components = (0..n)
            .map(|_| {
                let mut amp = [0.0; 3];
                let mut freq = [0.0; 3];
                let mut phase = [0.0; 3];
                for a in 0..3 {
                    amp[a] = amplitude * rng.gen_range(0.4..1.0);
                    freq[a] = rng.gen_range(0.2..0.6);
                    phase[a] = rng.gen_range(0.0..TAU);
                }
                IdleComponent { amp, freq, phase }
            })
            .collect();
        IdleModel {
            components,
            curl_freq: rng.gen_range(0.2..0.45),
            curl_phase: rng.gen_range(0.0..TAU),
        }
    }

    fn offset(&self, t_s: f64) -> Vec3 {
        let mut o = [0.0; 3];
        for c in &self.components {
            for a in 0..3 {
                o[a] += c.amp[a] * (TAU * c.freq[a] * t_s + c.phase[a]).sin();
            }
        }
        o
    }

    /// Small finger-curl wander, in [0, 0.13].
    fn curl(&self, t_s: f64) -> f64 {
        0.065 * (1.0 + (TAU * self.curl_freq * t_s + self.curl_phase).sin())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

fn duration_range(kind: GestureKind) -> (usize, usize) {
    match kind {
        // Statics hold the pose for ≥ 1 s inside form/hold/release.
        GestureKind::Static => (74, 85),
        _ => (65, 85),
    }
}

/// Generates a labeled synthetic dataset. Deterministic in the seed.
pub fn synth_generate(config: &SynthConfig) -> Result<(Vec<SkeletonSequence>, Vec<AnnotationSpan>)> {
    config.validate()?;
    let classes: Vec<GestureClass> = config
        .classes
        .iter()
        .map(|name| {
            GestureClass::from_name(name)
                .filter(|c| c.is_gesture())
                .ok_or_else(|| Error::Invalid(format!("unknown gesture class {name:?}")))
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dt_ms = 1000.0 / config.frame_rate_hz;
    let mut sequences = Vec::with_capacity(config.sequence_count);
    let mut annotations = Vec::new();
    let mut class_cycle = 0usize;

    for s in 0..config.sequence_count {
        let id = format!("synth-{s:03}");
        let idle = IdleModel::draw(&mut rng, config.idle_amplitude_mm);
        let n_gestures = rng.gen_range(config.gestures_min..=config.gestures_max);

        // Layout: gap, gesture, gap, gesture, …, gap.
        let mut plan: Vec<(Option<GestureClass>, usize)> = Vec::new();
        for g in 0..=n_gestures {
            plan.push((None, rng.gen_range(80..=130)));
            if g < n_gestures {
                let class = classes[class_cycle % classes.len()];
                class_cycle += 1;
                let (lo, hi) = duration_range(class.kind());
                plan.push((Some(class), rng.gen_range(lo..=hi)));
            }
        }

        let total: usize = plan.iter().map(|(_, d)| d).sum();
        // Distance from each frame to the nearest gesture, for ramping
        // the idle finger wander to zero at gesture boundaries.
        let mut in_gesture = vec![false; total];
        {
            let mut t = 0;
            for (class, dur) in &plan {
                if class.is_some() {
                    for f in t..t + dur {
                        in_gesture[f] = true;
                    }
                }
                t += dur;
            }
        }
        let mut gap_ramp = vec![1.0f64; total];
        for t in 0..total {
            if in_gesture[t] {
                gap_ramp[t] = 0.0;
                continue;
            }
            let mut d = usize::MAX;
            for r in 1..=15usize {
                if (t >= r && in_gesture[t - r]) || (t + r < total && in_gesture[t + r]) {
                    d = r;
                    break;
                }
            }
            gap_ramp[t] = if d == usize::MAX { 1.0 } else { d as f64 / 15.0 };
        }

        let mut frames = Vec::with_capacity(total);
        let mut t = 0usize;
        for (class, dur) in &plan {
            for k in 0..*dur {
                let frame_idx = t + k;
                let t_s = frame_idx as f64 / config.frame_rate_hz;
                let mut pose = match class {
                    Some(c) => {
                        let u = if *dur > 1 { k as f64 / (*dur as f64 - 1.0) } else { 0.0 };
                        gesture_pose(*c, u)
                    }
                    None => {
                        let mut p = rest_pose();
                        let c = idle.curl(t_s) * gap_ramp[frame_idx];
                        for f in 0..5 {
                            curl_finger(&mut p, f, c);
                        }
                        p
                    }
                };
                translate(&mut pose, idle.offset(t_s));
                if config.noise_mm > 0.0 {
                    for p in pose.iter_mut() {
                        for v in p.iter_mut() {
                            *v += config.noise_mm * gaussian(&mut rng);
                        }
                    }
                }
                frames.push(HandFrame::new(pose, frame_idx as f64 * dt_ms));
            }
            if let Some(c) = class {
                annotations.push(Span::new(&id, *c, t, t + dur - 1));
            }
            t += dur;
        }

        sequences.push(SkeletonSequence {
            id,
            frames,
            frame_rate_hz: config.frame_rate_hz,
        });
    }
    Ok((sequences, annotations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::sequence_to_string;
    use crate::model::{vec3_dist, JointId};
    use std::collections::BTreeMap;

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig {
            sequence_count: 3,
            ..SynthConfig::default()
        };
        let (a_seqs, a_spans) = synth_generate(&config).unwrap();
        let (b_seqs, b_spans) = synth_generate(&config).unwrap();
        assert_eq!(a_spans, b_spans);
        for (a, b) in a_seqs.iter().zip(&b_seqs) {
            assert_eq!(sequence_to_string(a), sequence_to_string(b));
        }
    }

    #[test]
    fn fixed_count_config_yields_balanced_spans() {
        let config = SynthConfig {
            sequence_count: 5,
            gestures_min: 4,
            gestures_max: 4,
            seed: 9,
            ..SynthConfig::default()
        };
        let (seqs, spans) = synth_generate(&config).unwrap();
        assert_eq!(seqs.len(), 5);
        assert_eq!(spans.len(), 20);
        let mut counts: BTreeMap<GestureClass, usize> = BTreeMap::new();
        for s in &spans {
            *counts.entry(s.label).or_default() += 1;
        }
        // Round-robin: 20 slots over 18 classes → every class 1 or 2.
        assert_eq!(counts.len(), 18);
        assert!(counts.values().all(|&c| c == 1 || c == 2));
        // Spans are valid and sorted within their sequences.
        for seq in &seqs {
            let mut last_end = 0;
            for s in spans.iter().filter(|s| s.sequence_id == seq.id) {
                s.validate(seq.len()).unwrap();
                assert!(s.start_frame >= last_end);
                last_end = s.end_frame;
            }
        }
    }

    #[test]
    fn pinch_tip_distance_strictly_closes_then_opens() {
        let config = SynthConfig {
            classes: vec!["PINCH".into()],
            sequence_count: 2,
            gestures_min: 3,
            gestures_max: 3,
            noise_mm: 0.0,
            seed: 4,
            ..SynthConfig::default()
        };
        let (seqs, spans) = synth_generate(&config).unwrap();
        assert!(spans.len() >= 4);
        for span in &spans {
            let seq = seqs.iter().find(|s| s.id == span.sequence_id).unwrap();
            let d: Vec<f64> = (span.start_frame..=span.end_frame)
                .map(|t| {
                    let f = &seq.frames[t];
                    vec3_dist(f.position(JointId::ThumbEnd), f.position(JointId::IndexEnd))
                })
                .collect();
            let min_at = d
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(min_at > 0 && min_at < d.len() - 1, "min at boundary: {min_at}");
            for i in 0..d.len() - 1 {
                if i < min_at {
                    assert!(d[i] > d[i + 1], "not closing at step {i}");
                } else {
                    assert!(d[i] < d[i + 1], "not opening at step {i}");
                }
            }
            // The pinch really closes: minimum distance a few millimetres.
            assert!(d[min_at] < 10.0 && d[0] > 50.0);
        }
    }

    #[test]
    fn static_gestures_hold_their_pose_for_a_second() {
        let config = SynthConfig {
            classes: vec!["ONE".into(), "MENU".into()],
            sequence_count: 1,
            gestures_min: 4,
            gestures_max: 4,
            noise_mm: 0.0,
            seed: 2,
            ..SynthConfig::default()
        };
        let (seqs, spans) = synth_generate(&config).unwrap();
        let seq = &seqs[0];
        for span in &spans {
            let dur = span.len();
            assert!(dur >= 74, "static span lasts {dur}");
            // The template holds its pose over u ∈ [0.15, 0.85], which
            // covers at least 50 frames (1 s at 50 Hz) for every drawn
            // duration. Probe just inside that window: the articulation
            // must be frozen (idle drift is whole-hand only).
            assert!(0.7 * (dur as f64 - 1.0) >= 50.0);
            let hold_a = span.start_frame + (0.16 * (dur as f64 - 1.0)).ceil() as usize;
            let hold_b = span.start_frame + (0.84 * (dur as f64 - 1.0)).floor() as usize;
            let rel = |t: usize, j: usize| {
                let f = &seq.frames[t];
                crate::model::vec3_sub(f.positions[j], f.positions[0])
            };
            for j in 1..JOINT_COUNT {
                let a = rel(hold_a, j);
                let b = rel(hold_b, j);
                assert!(vec3_dist(a, b) < 1e-9, "joint {j} moved during hold");
            }
        }
    }

    #[test]
    fn idle_palm_motion_stays_below_gesture_scale() {
        let config = SynthConfig {
            classes: vec!["CIRCLE".into()],
            sequence_count: 1,
            gestures_min: 1,
            gestures_max: 1,
            noise_mm: 0.0,
            seed: 7,
            ..SynthConfig::default()
        };
        let (seqs, spans) = synth_generate(&config).unwrap();
        let seq = &seqs[0];
        let span = &spans[0];
        let palm_span = |range: std::ops::Range<usize>| {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for t in range {
                for a in 0..3 {
                    lo[a] = lo[a].min(seq.frames[t].positions[0][a]);
                    hi[a] = hi[a].max(seq.frames[t].positions[0][a]);
                }
            }
            (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max)
        };
        let idle_extent = palm_span(0..span.start_frame);
        let gesture_extent = palm_span(span.start_frame..span.end_frame + 1);
        assert!(
            gesture_extent > 2.0 * idle_extent,
            "gesture {gesture_extent} vs idle {idle_extent}"
        );
    }

    #[test]
    fn unknown_class_is_rejected() {
        let config = SynthConfig {
            classes: vec!["WAVE".into()],
            ..SynthConfig::default()
        };
        assert!(synth_generate(&config).is_err());
        let config = SynthConfig {
            classes: vec!["NON_GESTURE".into()],
            ..SynthConfig::default()
        };
        assert!(synth_generate(&config).is_err());
    }

    #[test]
    fn all_templates_start_and_end_at_rest() {
        for class in GestureClass::GESTURES {
            let start = gesture_pose(class, 0.0);
            let end = gesture_pose(class, 1.0);
            let rest = rest_pose();
            for j in 0..JOINT_COUNT {
                assert!(vec3_dist(start[j], rest[j]) < 1e-9, "{class} start joint {j}");
                assert!(vec3_dist(end[j], rest[j]) < 1e-9, "{class} end joint {j}");
            }
        }
    }

    #[test]
    fn templates_are_mutually_distinct() {
        // Every pair of classes differs visibly at some probe phase
        // (single phases can coincide, e.g. a swipe and a circle both
        // pass through the same leftmost point).
        let probes = [0.2, 0.35, 0.5, 0.65, 0.8];
        let shapes: Vec<Vec<[Vec3; JOINT_COUNT]>> = GestureClass::GESTURES
            .iter()
            .map(|&c| probes.iter().map(|&u| gesture_pose(c, u)).collect())
            .collect();
        for i in 0..shapes.len() {
            for j in i + 1..shapes.len() {
                let max_gap = shapes[i]
                    .iter()
                    .zip(&shapes[j])
                    .flat_map(|(a, b)| (0..JOINT_COUNT).map(move |k| vec3_dist(a[k], b[k])))
                    .fold(0.0f64, f64::max);
                assert!(
                    max_gap > 8.0,
                    "{} vs {} differ by only {max_gap} mm",
                    GestureClass::GESTURES[i],
                    GestureClass::GESTURES[j]
                );
            }
        }
    }
}
