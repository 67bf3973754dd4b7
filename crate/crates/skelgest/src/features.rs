//! Per-frame and per-window feature extractors shared by the
//! recognizers: backward-difference kinematics, joint-distance matrices,
//! fingertip articulation traces, window normalizations and the flat
//! frame vectors fed to the sequence networks.

use crate::error::{Error, Result};
use crate::model::{vec3_dist, HandFrame, JointId, JOINT_COUNT};

/// Variance guard used wherever a division by a spread occurs.
pub const EPS_VAR: f64 = 1e-8;

/// First and second backward differences of the joint positions at one
/// frame, in mm/frame and mm/frame². Frames without enough history are
/// zero-filled so every frame has a defined value.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsFrame {
    pub speed: [[f64; 3]; JOINT_COUNT],
    pub acceleration: [[f64; 3]; JOINT_COUNT],
}

/// Computes per-frame speed (difference t vs t−1, zero at t=0) and
/// acceleration (difference of speeds, zero at t<2).
pub fn compute_kinematics(window: &[HandFrame]) -> Vec<KinematicsFrame> {
    let mut out: Vec<KinematicsFrame> = Vec::with_capacity(window.len());
    for (t, frame) in window.iter().enumerate() {
        let mut speed = [[0.0; 3]; JOINT_COUNT];
        if t >= 1 {
            for j in 0..JOINT_COUNT {
                for z in 0..3 {
                    speed[j][z] = frame.positions[j][z] - window[t - 1].positions[j][z];
                }
            }
        }
        let mut acceleration = [[0.0; 3]; JOINT_COUNT];
        if t >= 2 {
            for j in 0..JOINT_COUNT {
                for z in 0..3 {
                    acceleration[j][z] = speed[j][z] - out[t - 1].speed[j][z];
                }
            }
        }
        out.push(KinematicsFrame {
            speed,
            acceleration,
        });
    }
    out
}

/// Per-axis joint-to-joint absolute coordinate differences for one
/// frame: `d[z][k][j] = |J_k,z − J_j,z|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub d: [[[f64; JOINT_COUNT]; JOINT_COUNT]; 3],
}

pub fn joint_distance_matrix(frame: &HandFrame) -> DistanceMatrix {
    let mut d = [[[0.0; JOINT_COUNT]; JOINT_COUNT]; 3];
    for z in 0..3 {
        for k in 0..JOINT_COUNT {
            for j in 0..JOINT_COUNT {
                d[z][k][j] = (frame.positions[k][z] - frame.positions[j][z]).abs();
            }
        }
    }
    DistanceMatrix { d }
}

/// The four adjacent fingertip pairs in anatomical order.
pub const ADJACENT_TIP_PAIRS: [(JointId, JointId); 4] = [
    (JointId::ThumbEnd, JointId::IndexEnd),
    (JointId::IndexEnd, JointId::MiddleEnd),
    (JointId::MiddleEnd, JointId::RingEnd),
    (JointId::RingEnd, JointId::PinkyEnd),
];

/// Number of articulation traces: 4 adjacent-tip pairs + 5 tip-to-palm.
pub const ARTICULATION_TRACES: usize = 9;

/// Per-frame hand-shape distances over a window: traces 0..4 are the
/// adjacent fingertip pairs thumb→pinky, traces 4..9 the fingertip-to-
/// palm distances thumb→pinky. Every trace has one value per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulationProfile {
    pub traces: [Vec<f64>; ARTICULATION_TRACES],
}

pub fn articulation_distances(window: &[HandFrame]) -> ArticulationProfile {
    let mut traces: [Vec<f64>; ARTICULATION_TRACES] =
        std::array::from_fn(|_| Vec::with_capacity(window.len()));
    for frame in window {
        for (i, (a, b)) in ADJACENT_TIP_PAIRS.iter().enumerate() {
            traces[i].push(vec3_dist(frame.position(*a), frame.position(*b)));
        }
        let palm = frame.position(JointId::Palm);
        for (i, tip) in JointId::FINGERTIPS.iter().enumerate() {
            traces[4 + i].push(vec3_dist(frame.position(*tip), palm));
        }
    }
    ArticulationProfile { traces }
}

/// Mean IndexA–PinkyA distance over a window, the hand-size scale used
/// by [`NormalizeMode::HandSizeThenZNorm`].
pub fn hand_size(window: &[HandFrame]) -> f64 {
    if window.is_empty() {
        return 0.0;
    }
    let sum: f64 = window
        .iter()
        .map(|f| vec3_dist(f.position(JointId::IndexA), f.position(JointId::PinkyA)))
        .sum();
    sum / window.len() as f64
}

/// Per-feature mean and standard deviation fitted on training rows,
/// applied as `(x − μ)/σ` with a variance guard.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Fits per-feature statistics over rows of equal width (population
    /// variance).
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<FeatureStats> {
        let width = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::Invalid("no rows to fit statistics on".into()))?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; width];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt()).collect();
        Ok(FeatureStats { mean, std })
    }

    /// Normalizes one row in place. Features with near-zero spread are
    /// centered but not scaled.
    pub fn apply(&self, row: &mut [f64]) {
        for (i, x) in row.iter_mut().enumerate() {
            *x -= self.mean[i];
            if self.std[i] > EPS_VAR {
                *x /= self.std[i];
            }
        }
    }
}

/// Window normalization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizeMode {
    /// Each coordinate axis of the window gets mean 0, variance 1,
    /// pooled over all joints and frames.
    PerInstanceZNorm,
    /// Positions divided by the window's mean IndexA–PinkyA distance,
    /// then per-instance z-normalized.
    HandSizeThenZNorm,
    /// `(x − μ)/σ` per coordinate with statistics fitted on a training
    /// set (60 features: joint-major x,y,z).
    DatasetZScore,
}

/// Normalizes a window's positions; rotations and timestamps pass
/// through untouched. `stats` is required only for `DatasetZScore`.
pub fn normalize(
    window: &[HandFrame],
    mode: NormalizeMode,
    stats: Option<&FeatureStats>,
) -> Result<Vec<HandFrame>> {
    let mut out: Vec<HandFrame> = window.to_vec();
    match mode {
        NormalizeMode::PerInstanceZNorm => znorm_axes(&mut out),
        NormalizeMode::HandSizeThenZNorm => {
            let size = hand_size(window).max(EPS_VAR);
            for f in out.iter_mut() {
                for p in f.positions.iter_mut() {
                    for v in p.iter_mut() {
                        *v /= size;
                    }
                }
            }
            znorm_axes(&mut out);
        }
        NormalizeMode::DatasetZScore => {
            let stats = stats.ok_or(Error::MissingStats)?;
            if stats.mean.len() != 3 * JOINT_COUNT {
                return Err(Error::Invalid(format!(
                    "dataset statistics must cover {} coordinates, got {}",
                    3 * JOINT_COUNT,
                    stats.mean.len()
                )));
            }
            for f in out.iter_mut() {
                let mut row = frame_vector(f, FrameRecipe::Positions60, None)?;
                stats.apply(&mut row);
                for j in 0..JOINT_COUNT {
                    for z in 0..3 {
                        f.positions[j][z] = row[3 * j + z];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Zero-mean unit-variance per coordinate axis, pooled over joints and
/// frames; constant axes end at 0 instead of dividing by nothing.
fn znorm_axes(frames: &mut [HandFrame]) {
    let n = (frames.len() * JOINT_COUNT) as f64;
    for z in 0..3 {
        let mut mean = 0.0;
        for f in frames.iter() {
            for p in &f.positions {
                mean += p[z];
            }
        }
        mean /= n;
        let mut var = 0.0;
        for f in frames.iter() {
            for p in &f.positions {
                let d = p[z] - mean;
                var += d * d;
            }
        }
        let std = (var / n).sqrt();
        for f in frames.iter_mut() {
            for p in f.positions.iter_mut() {
                p[z] -= mean;
                if std > EPS_VAR {
                    p[z] /= std;
                }
            }
        }
    }
}

/// Flat per-frame input layouts for the sequence networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameRecipe {
    /// 20 joints × (x,y,z) = 60 values, joint-major.
    Positions60,
    /// Positions, then speeds, then accelerations: 180 values.
    PosSpeedAccel,
    /// 20 joints × (x,y,z,qw,qx,qy,qz) = 140 values, joint-major.
    PosQuat140,
}

impl FrameRecipe {
    pub fn width(self) -> usize {
        match self {
            FrameRecipe::Positions60 => 3 * JOINT_COUNT,
            FrameRecipe::PosSpeedAccel => 9 * JOINT_COUNT,
            FrameRecipe::PosQuat140 => 7 * JOINT_COUNT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameRecipe::Positions60 => "positions",
            FrameRecipe::PosSpeedAccel => "pos-speed-accel",
            FrameRecipe::PosQuat140 => "pos-quat",
        }
    }

    pub fn from_name(s: &str) -> Option<FrameRecipe> {
        [
            FrameRecipe::Positions60,
            FrameRecipe::PosSpeedAccel,
            FrameRecipe::PosQuat140,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }
}

/// Builds one flat input vector for a frame. `PosSpeedAccel` needs the
/// frame's kinematics; `PosQuat140` needs quaternions on the frame.
pub fn frame_vector(
    frame: &HandFrame,
    recipe: FrameRecipe,
    kinematics: Option<&KinematicsFrame>,
) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(recipe.width());
    match recipe {
        FrameRecipe::Positions60 => {
            for p in &frame.positions {
                v.extend_from_slice(p);
            }
        }
        FrameRecipe::PosSpeedAccel => {
            let kin = kinematics.ok_or(Error::MissingKinematics)?;
            for p in &frame.positions {
                v.extend_from_slice(p);
            }
            for s in &kin.speed {
                v.extend_from_slice(s);
            }
            for a in &kin.acceleration {
                v.extend_from_slice(a);
            }
        }
        FrameRecipe::PosQuat140 => {
            let rot = frame.rotations.as_ref().ok_or(Error::MissingQuaternions)?;
            for (p, q) in frame.positions.iter().zip(rot) {
                v.extend_from_slice(p);
                v.extend_from_slice(q);
            }
        }
    }
    Ok(v)
}

/// Frame vectors for a whole window, computing kinematics internally
/// when the recipe needs them.
pub fn window_vectors(window: &[HandFrame], recipe: FrameRecipe) -> Result<Vec<Vec<f64>>> {
    match recipe {
        FrameRecipe::PosSpeedAccel => {
            let kin = compute_kinematics(window);
            window
                .iter()
                .zip(&kin)
                .map(|(f, k)| frame_vector(f, recipe, Some(k)))
                .collect()
        }
        _ => window.iter().map(|f| frame_vector(f, recipe, None)).collect(),
    }
}
