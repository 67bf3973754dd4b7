//! Four-state online event detector over per-frame label streams.
//!
//! The machine watches a sliding 10-frame window of classifier labels
//! (advancing one frame at a time) and walks Idle → BeginCheck →
//! InGesture → EndCheck:
//!
//! * Idle: a single gesture-labeled frame opens a hypothesis.
//! * BeginCheck: the hypothesis must accumulate `confirm_threshold`
//!   gesture frames within a `buffer_size`-window probation; failure
//!   discards the hypothesis and suppresses the frames already seen, a
//!   fully empty window short-circuits to EndCheck so very short
//!   gestures survive.
//! * InGesture: stays until a window with no gesture frame at all.
//! * EndCheck: `end_confirm` consecutive empty windows emit the event;
//!   a new frame of the candidate class reopens InGesture instead.
//!
//! The emitted class is the majority label tallied since the hypothesis
//! opened (ties go to the earliest-seen class). Everything is exactly
//! deterministic in the label stream and the config.

use crate::error::{Error, Result};
use crate::model::{DetectionEvent, GestureClass, Span, GESTURE_CLASS_COUNT};

/// Detector thresholds. Sizes are in windows/frames; the nominal frame
/// rate is carried along so callers can reason in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FsmConfig {
    /// Label-window length in frames (also the probation length in
    /// windows for BeginCheck).
    pub buffer_size: usize,
    /// Gesture frames required within the probation to confirm.
    pub confirm_threshold: usize,
    /// Consecutive fully-empty windows required to close an event.
    pub end_confirm: usize,
    pub frame_rate_hz: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        FsmConfig {
            buffer_size: 10,
            confirm_threshold: 5,
            end_confirm: 25,
            frame_rate_hz: 50.0,
        }
    }
}

impl FsmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.buffer_size == 0 {
            return Err(Error::Invalid("buffer_size must be positive".into()));
        }
        if self.confirm_threshold == 0 || self.confirm_threshold > self.buffer_size {
            return Err(Error::Invalid(format!(
                "confirm_threshold must be in 1..={}, got {}",
                self.buffer_size, self.confirm_threshold
            )));
        }
        if self.end_confirm == 0 {
            return Err(Error::Invalid("end_confirm must be positive".into()));
        }
        Ok(())
    }
}

/// The four phases of the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmPhase {
    Idle,
    BeginCheck,
    InGesture,
    EndCheck,
}

/// One running detector instance for one label stream.
#[derive(Debug, Clone)]
pub struct Fsm {
    config: FsmConfig,
    phase: FsmPhase,
    /// Frames before this index are ignored as triggers (set after a
    /// discarded hypothesis or an emitted event).
    ignore_before: usize,
    tentative_start: usize,
    last_gesture_frame: usize,
    /// Gesture-frame tally since the hypothesis opened, plus the order
    /// each class was first seen (for deterministic tie-breaks).
    tally: [usize; GESTURE_CLASS_COUNT],
    first_seen: [usize; GESTURE_CLASS_COUNT],
    seen_count: usize,
    /// Windows observed since BeginCheck entry (trigger window included).
    probation_seen: usize,
    positives: usize,
    empty_run: usize,
}

impl Fsm {
    pub fn new(config: FsmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Fsm {
            config,
            phase: FsmPhase::Idle,
            ignore_before: 0,
            tentative_start: 0,
            last_gesture_frame: 0,
            tally: [0; GESTURE_CLASS_COUNT],
            first_seen: [usize::MAX; GESTURE_CLASS_COUNT],
            seen_count: 0,
            probation_seen: 0,
            positives: 0,
            empty_run: 0,
        })
    }

    pub fn phase(&self) -> FsmPhase {
        self.phase
    }

    /// Majority class of the current hypothesis; ties break toward the
    /// class seen first.
    pub fn candidate(&self) -> Option<GestureClass> {
        let mut best: Option<usize> = None;
        for i in 0..GESTURE_CLASS_COUNT {
            if self.tally[i] == 0 {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    if self.tally[i] > self.tally[b]
                        || (self.tally[i] == self.tally[b] && self.first_seen[i] < self.first_seen[b])
                    {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best.and_then(GestureClass::from_ordinal)
    }

    fn tally_frame(&mut self, class: GestureClass, frame: usize) {
        let i = class.ordinal();
        if self.tally[i] == 0 {
            self.first_seen[i] = self.seen_count;
            self.seen_count += 1;
        }
        self.tally[i] += 1;
        self.positives += 1;
        self.last_gesture_frame = self.last_gesture_frame.max(frame);
    }

    fn reset_hypothesis(&mut self) {
        self.tally = [0; GESTURE_CLASS_COUNT];
        self.first_seen = [usize::MAX; GESTURE_CLASS_COUNT];
        self.seen_count = 0;
        self.probation_seen = 0;
        self.positives = 0;
        self.empty_run = 0;
    }

    fn take_event(&mut self) -> Option<(GestureClass, usize, usize)> {
        let class = self.candidate()?;
        Some((class, self.tentative_start, self.last_gesture_frame))
    }

    /// Advances the machine by one window. `window` holds the labels of
    /// the most recent `buffer_size` frames, newest last; `newest` is
    /// that frame's index in the stream. Returns an emitted event as
    /// (class, start, end) when one closes on this step.
    pub fn step(
        &mut self,
        window: &[GestureClass],
        newest: usize,
    ) -> Result<Option<(GestureClass, usize, usize)>> {
        if window.len() != self.config.buffer_size {
            return Err(Error::Invalid(format!(
                "window must hold {} labels, got {}",
                self.config.buffer_size,
                window.len()
            )));
        }
        let oldest = newest + 1 - window.len();
        let frame_of = |k: usize| oldest + k;
        let fully_empty = window.iter().all(|l| !l.is_gesture());
        let newest_label = *window.last().unwrap();

        match self.phase {
            FsmPhase::Idle => {
                // A single (non-suppressed) gesture frame opens a hypothesis.
                let trigger = window
                    .iter()
                    .enumerate()
                    .find(|(k, l)| l.is_gesture() && frame_of(*k) >= self.ignore_before);
                if let Some((k, _)) = trigger {
                    self.reset_hypothesis();
                    self.phase = FsmPhase::BeginCheck;
                    self.tentative_start = frame_of(k);
                    self.last_gesture_frame = frame_of(k);
                    for (k, l) in window.iter().enumerate() {
                        if l.is_gesture() && frame_of(k) >= self.ignore_before {
                            self.tally_frame(*l, frame_of(k));
                        }
                    }
                    self.probation_seen = 1;
                    if self.positives >= self.config.confirm_threshold {
                        self.phase = FsmPhase::InGesture;
                    }
                }
                Ok(None)
            }
            FsmPhase::BeginCheck => {
                if newest_label.is_gesture() && newest >= self.ignore_before {
                    self.tally_frame(newest_label, newest);
                }
                self.probation_seen += 1;
                if fully_empty {
                    // The evidence already slid out: treat it as a very
                    // short gesture and move straight to end checking.
                    self.phase = FsmPhase::EndCheck;
                    self.empty_run = 1;
                } else if self.positives >= self.config.confirm_threshold {
                    self.phase = FsmPhase::InGesture;
                } else if self.probation_seen >= self.config.buffer_size {
                    // Not enough evidence: discard the hypothesis and
                    // suppress everything observed so far.
                    self.phase = FsmPhase::Idle;
                    self.ignore_before = newest + 1;
                    self.reset_hypothesis();
                }
                Ok(None)
            }
            FsmPhase::InGesture => {
                if newest_label.is_gesture() {
                    self.tally_frame(newest_label, newest);
                }
                if fully_empty {
                    self.phase = FsmPhase::EndCheck;
                    self.empty_run = 1;
                }
                Ok(None)
            }
            FsmPhase::EndCheck => {
                if newest_label.is_gesture() && Some(newest_label) == self.candidate() {
                    // The gesture resumes.
                    self.phase = FsmPhase::InGesture;
                    self.tally_frame(newest_label, newest);
                    self.empty_run = 0;
                    return Ok(None);
                }
                if fully_empty {
                    self.empty_run += 1;
                    if self.empty_run >= self.config.end_confirm {
                        let event = self.take_event();
                        self.phase = FsmPhase::Idle;
                        self.ignore_before = newest + 1;
                        self.reset_hypothesis();
                        return Ok(event);
                    }
                } else {
                    // Stray non-candidate frames keep the window busy
                    // without reopening or closing the event.
                    self.empty_run = 0;
                }
                Ok(None)
            }
        }
    }

    /// Closes the stream: a hypothesis that reached InGesture or
    /// EndCheck is emitted with its last gesture frame as the end; an
    /// unconfirmed BeginCheck hypothesis is discarded.
    pub fn finish(&mut self) -> Option<(GestureClass, usize, usize)> {
        match self.phase {
            FsmPhase::InGesture | FsmPhase::EndCheck => {
                let event = self.take_event();
                self.phase = FsmPhase::Idle;
                self.reset_hypothesis();
                event
            }
            _ => None,
        }
    }
}

/// Runs the detector over a whole per-frame label stream. Streams
/// shorter than the buffer produce no events.
pub fn run_fsm(
    labels: &[GestureClass],
    config: &FsmConfig,
    sequence_id: &str,
) -> Result<Vec<DetectionEvent>> {
    let mut fsm = Fsm::new(config.clone())?;
    let buf = config.buffer_size;
    let mut events = Vec::new();
    if labels.len() >= buf {
        for newest in (buf - 1)..labels.len() {
            let window = &labels[newest + 1 - buf..=newest];
            if let Some((class, start, end)) = fsm.step(window, newest)? {
                events.push(Span::new(sequence_id, class, start, end));
            }
        }
    }
    if let Some((class, start, end)) = fsm.finish() {
        events.push(Span::new(sequence_id, class, start, end));
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use GestureClass::*;

    fn stream(len: usize, blocks: &[(usize, usize, GestureClass)]) -> Vec<GestureClass> {
        let mut v = vec![NonGesture; len];
        for &(start, end, class) in blocks {
            for l in v.iter_mut().take(end + 1).skip(start) {
                *l = class;
            }
        }
        v
    }

    fn run(labels: &[GestureClass]) -> Vec<Span> {
        run_fsm(labels, &FsmConfig::default(), "s").unwrap()
    }

    #[test]
    fn silent_stream_stays_idle() {
        assert!(run(&stream(200, &[])).is_empty());
    }

    #[test]
    fn clean_block_yields_one_event() {
        // 60 gesture frames with ample quiet on both sides.
        let labels = stream(200, &[(50, 109, Cross)]);
        let events = run(&labels);
        assert_eq!(events, vec![Span::new("s", Cross, 50, 109)]);
    }

    #[test]
    fn emission_happens_after_end_confirmation() {
        // The event closes 34 frames after the last gesture frame:
        // the first fully-empty window arrives 10 frames after it and
        // 25 consecutive empty windows follow. One frame earlier the
        // stream-end path must fire instead of the in-stream one.
        let labels = stream(144, &[(50, 109, Cross)]);
        let events = run(&labels);
        assert_eq!(events, vec![Span::new("s", Cross, 50, 109)]);
        let mut fsm = Fsm::new(FsmConfig::default()).unwrap();
        let mut emitted_at = None;
        for newest in 9..labels.len() {
            let window = &labels[newest - 9..=newest];
            if fsm.step(window, newest).unwrap().is_some() {
                emitted_at = Some(newest);
            }
        }
        assert_eq!(emitted_at, Some(143)); // 109 + 34
    }

    #[test]
    fn five_of_ten_confirmation_boundary() {
        // 5 positives spread over the probation confirm; 4 do not.
        let five = stream(100, &[(20, 20, V), (22, 22, V), (24, 24, V), (26, 26, V), (28, 28, V)]);
        let events = run(&five);
        assert_eq!(events, vec![Span::new("s", V, 20, 28)]);

        let four = stream(100, &[(20, 20, V), (22, 22, V), (24, 24, V), (26, 26, V)]);
        assert!(run(&four).is_empty());
    }

    #[test]
    fn probation_walkthrough_phases() {
        // A single positive frame: BeginCheck for 10 windows, then back
        // to Idle with the frame suppressed, never past BeginCheck.
        let labels = stream(60, &[(20, 20, Tap)]);
        let mut fsm = Fsm::new(FsmConfig::default()).unwrap();
        let mut phases = Vec::new();
        for newest in 9..labels.len() {
            fsm.step(&labels[newest - 9..=newest], newest).unwrap();
            phases.push((newest, fsm.phase()));
        }
        for (newest, phase) in phases {
            let expect = if (20..29).contains(&newest) {
                FsmPhase::BeginCheck
            } else {
                FsmPhase::Idle
            };
            assert_eq!(phase, expect, "newest={newest}");
        }
        assert!(fsm.finish().is_none());
    }

    #[test]
    fn short_gesture_at_stream_start_survives() {
        // Two gesture frames at 0..1: probation would fail, but the
        // fully-empty window at step 11 short-circuits to EndCheck and
        // the event is emitted after 25 empty windows.
        let labels = stream(60, &[(0, 1, Tap)]);
        let events = run(&labels);
        assert_eq!(events, vec![Span::new("s", Tap, 0, 1)]);

        let mut fsm = Fsm::new(FsmConfig::default()).unwrap();
        let mut emitted_at = None;
        for newest in 9..labels.len() {
            if fsm.step(&labels[newest - 9..=newest], newest).unwrap().is_some() {
                emitted_at = Some(newest);
            }
        }
        assert_eq!(emitted_at, Some(35)); // empty windows at steps 11..=35
    }

    #[test]
    fn nearby_blocks_merge_distant_blocks_split() {
        // 15 quiet frames between blocks: merged into one event.
        let near = stream(200, &[(30, 39, Tap), (55, 64, Tap)]);
        assert_eq!(run(&near), vec![Span::new("s", Tap, 30, 64)]);

        // 35 quiet frames: the first event closes before the second block.
        let far = stream(200, &[(30, 39, Tap), (75, 84, Tap)]);
        assert_eq!(
            run(&far),
            vec![Span::new("s", Tap, 30, 39), Span::new("s", Tap, 75, 84)]
        );
    }

    #[test]
    fn candidate_is_majority_with_earliest_tie_break() {
        // Mixed labels inside one block: majority wins.
        let mut labels = stream(160, &[(50, 99, Grab)]);
        for t in (50..70).step_by(2) {
            labels[t] = Pinch;
        }
        let events = run(&labels);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].label, Grab);

        // Exact tie: the class seen first wins.
        let tie = stream(200, &[(50, 59, Pinch), (60, 69, Grab)]);
        let events = run(&tie);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].label, Pinch);
        assert_eq!((events[0].start_frame, events[0].end_frame), (50, 69));
    }

    #[test]
    fn open_gesture_emitted_at_stream_end() {
        // The stream ends while still inside the gesture.
        let labels = stream(80, &[(50, 79, Knob)]);
        assert_eq!(run(&labels), vec![Span::new("s", Knob, 50, 79)]);

        // ...and while waiting out the end confirmation.
        let labels = stream(90, &[(50, 69, Knob)]);
        assert_eq!(run(&labels), vec![Span::new("s", Knob, 50, 69)]);
    }

    #[test]
    fn events_ordered_and_disjoint() {
        let labels = stream(400, &[(30, 80, One), (150, 200, Left), (280, 340, Deny)]);
        let events = run(&labels);
        assert_eq!(events.len(), 3);
        for pair in events.windows(2) {
            assert!(pair[0].end_frame < pair[1].start_frame);
        }
    }

    #[test]
    fn determinism() {
        let labels = stream(300, &[(40, 90, Circle), (160, 230, Expand)]);
        assert_eq!(run(&labels), run(&labels));
    }

    #[test]
    fn short_stream_produces_nothing() {
        assert!(run(&stream(5, &[(0, 4, Tap)])).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(Fsm::new(FsmConfig { confirm_threshold: 0, ..Default::default() }).is_err());
        assert!(Fsm::new(FsmConfig { confirm_threshold: 11, ..Default::default() }).is_err());
        assert!(Fsm::new(FsmConfig { end_confirm: 0, ..Default::default() }).is_err());
        assert!(Fsm::new(FsmConfig { buffer_size: 0, confirm_threshold: 0, ..Default::default() }).is_err());
    }
}
