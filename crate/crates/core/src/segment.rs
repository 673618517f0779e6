//! Non-uniform segmentation of the normalized stretch stream.
//!
//! A five-point derivative feeds a trend state machine. A new segment starts
//! when the confirmed trend turns from flat or decreasing to increasing,
//! subject to a minimum segment duration; a segment that reaches the
//! maximum duration is cut unconditionally.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AccelSample, SensorStream};

pub const MIN_SEGMENT_MS: i64 = 1000;
pub const MAX_SEGMENT_MS: i64 = 3000;
/// Derivatives with magnitude below this (normalized units per sample) count as flat.
pub const FLAT_EPSILON: f64 = 0.01;
/// Consecutive derivative classifications needed to confirm a new trend.
pub const TREND_CONFIRMATIONS: u8 = 3;

/// Five-point central difference at the middle of `s`, in units per sample.
pub fn derivative5(s: &[f64]) -> Result<f64> {
    match s {
        [a, b, _, d, e] => Ok((a - 8.0 * b + 8.0 * d - e) / 12.0),
        _ => Err(Error::InvalidArgument(format!(
            "five-point derivative needs exactly 5 samples, got {}",
            s.len()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrendState {
    Increasing,
    Decreasing,
    Flat,
}

impl TrendState {
    pub fn classify(derivative: f64, epsilon: f64) -> Self {
        if derivative > epsilon {
            TrendState::Increasing
        } else if derivative < -epsilon {
            TrendState::Decreasing
        } else {
            TrendState::Flat
        }
    }
}

/// Debounced trend: the state changes only after three consecutive
/// derivatives agree on the same new state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trend {
    pub state: TrendState,
    candidate: TrendState,
    pub consecutive_evidence: u8,
}

impl Default for Trend {
    fn default() -> Self {
        Self {
            state: TrendState::Flat,
            candidate: TrendState::Flat,
            consecutive_evidence: 0,
        }
    }
}

impl Trend {
    /// Feed one classified derivative. Returns the previous state when the
    /// trend changes.
    pub fn observe(&mut self, observed: TrendState) -> Option<TrendState> {
        if observed == self.state {
            self.consecutive_evidence = 0;
            return None;
        }
        if observed == self.candidate && self.consecutive_evidence > 0 {
            self.consecutive_evidence += 1;
        } else {
            self.candidate = observed;
            self.consecutive_evidence = 1;
        }
        if self.consecutive_evidence >= TREND_CONFIRMATIONS {
            let previous = self.state;
            self.state = observed;
            self.consecutive_evidence = 0;
            Some(previous)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryCause {
    TrendRise,
    MaxDuration,
    StreamEnd,
}

impl fmt::Display for BoundaryCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryCause::TrendRise => "TrendRise",
            BoundaryCause::MaxDuration => "MaxDuration",
            BoundaryCause::StreamEnd => "StreamEnd",
        })
    }
}

impl FromStr for BoundaryCause {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "TrendRise" => Ok(BoundaryCause::TrendRise),
            "MaxDuration" => Ok(BoundaryCause::MaxDuration),
            "StreamEnd" => Ok(BoundaryCause::StreamEnd),
            other => Err(Error::InvalidArgument(format!("unknown boundary cause {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub t_ms: i64,
    pub cause: BoundaryCause,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    pub min_ms: i64,
    pub max_ms: i64,
    pub epsilon: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            min_ms: MIN_SEGMENT_MS,
            max_ms: MAX_SEGMENT_MS,
            epsilon: FLAT_EPSILON,
        }
    }
}

/// Streaming boundary detector.
///
/// Decisions lag the input by two samples (the derivative lookahead), but
/// boundaries carry the timestamp of the derivative's center sample.
#[derive(Debug, Clone)]
pub struct BoundaryDetector {
    config: SegmenterConfig,
    trend: Trend,
    window: VecDeque<(i64, f64)>,
    seen: usize,
    last_boundary_ms: Option<i64>,
}

impl BoundaryDetector {
    pub fn new(config: SegmenterConfig) -> Self {
        Self {
            config,
            trend: Trend::default(),
            window: VecDeque::with_capacity(5),
            seen: 0,
            last_boundary_ms: None,
        }
    }

    pub fn trend(&self) -> Trend {
        self.trend
    }

    /// Push one stretch sample; returns a boundary decided at the sample two
    /// steps back, if any.
    pub fn push(&mut self, t_ms: i64, s: f64) -> Option<Boundary> {
        if self.last_boundary_ms.is_none() {
            self.last_boundary_ms = Some(t_ms);
        }
        if self.window.len() == 5 {
            self.window.pop_front();
        }
        self.window.push_back((t_ms, s));
        self.seen += 1;

        match self.seen {
            // Centers 0 and 1 have no full stencil.
            3 | 4 => {
                let (t, _) = self.window[self.seen - 3];
                self.step(t, None)
            }
            n if n >= 5 => {
                let values: Vec<f64> = self.window.iter().map(|&(_, v)| v).collect();
                let d = derivative5(&values).expect("window holds five samples");
                let (t, _) = self.window[2];
                self.step(t, Some(d))
            }
            _ => None,
        }
    }

    /// Flush the trailing samples that never get a full stencil.
    pub fn finish(&mut self) -> Vec<Boundary> {
        // Centers 0..=n-3 were handled by push; the last two remain.
        let len = self.window.len();
        let tail: Vec<i64> = self
            .window
            .iter()
            .skip(len.saturating_sub(2))
            .map(|&(t, _)| t)
            .collect();
        tail.into_iter().filter_map(|t| self.step(t, None)).collect()
    }

    fn step(&mut self, t_ms: i64, derivative: Option<f64>) -> Option<Boundary> {
        let last = self.last_boundary_ms.unwrap_or(t_ms);
        let elapsed = t_ms - last;
        if let Some(d) = derivative {
            let observed = TrendState::classify(d, self.config.epsilon);
            if let Some(previous) = self.trend.observe(observed) {
                let rising = self.trend.state == TrendState::Increasing
                    && matches!(previous, TrendState::Flat | TrendState::Decreasing);
                if rising && elapsed >= self.config.min_ms {
                    self.last_boundary_ms = Some(t_ms);
                    return Some(Boundary {
                        t_ms,
                        cause: BoundaryCause::TrendRise,
                    });
                }
            }
        }
        if elapsed >= self.config.max_ms {
            self.last_boundary_ms = Some(t_ms);
            self.trend = Trend::default();
            return Some(Boundary {
                t_ms,
                cause: BoundaryCause::MaxDuration,
            });
        }
        None
    }
}

/// Run the detector over a whole stretch track.
pub fn detect_boundaries(times_ms: &[i64], values: &[f64], config: SegmenterConfig) -> Vec<Boundary> {
    let mut detector = BoundaryDetector::new(config);
    let mut out: Vec<Boundary> = times_ms
        .iter()
        .zip(values)
        .filter_map(|(&t, &s)| detector.push(t, s))
        .collect();
    out.extend(detector.finish());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_ms: i64,
    pub end_ms: i64,
    /// Native-rate normalized stretch samples in `[start_ms, end_ms)`.
    pub stretch: Vec<f64>,
    /// Native-rate accelerometer samples in `[start_ms, end_ms)`.
    pub accel: Vec<AccelSample>,
    /// Cause of the boundary that closes this segment.
    pub boundary_cause: BoundaryCause,
    /// Set when the whole stream is shorter than the minimum duration.
    pub degenerate: bool,
}

impl Segment {
    pub fn duration_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ms() as f64 / 1000.0
    }
}

/// Time span of one segment, as written to segment CSVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub start_ms: i64,
    pub end_ms: i64,
    pub cause: BoundaryCause,
}

/// Spans between consecutive boundaries, closed by a final StreamEnd span.
pub fn spans_from_boundaries(stream_start: i64, stream_end: i64, boundaries: &[Boundary]) -> Vec<SegmentSpan> {
    let mut spans = Vec::with_capacity(boundaries.len() + 1);
    let mut start = stream_start;
    for b in boundaries {
        spans.push(SegmentSpan {
            start_ms: start,
            end_ms: b.t_ms,
            cause: b.cause,
        });
        start = b.t_ms;
    }
    spans.push(SegmentSpan {
        start_ms: start,
        end_ms: stream_end,
        cause: BoundaryCause::StreamEnd,
    });
    spans
}

/// Collect the native-rate samples of each span. Spans must be sorted and
/// non-overlapping.
pub fn cut_stream(stream: &SensorStream, spans: &[SegmentSpan], config: SegmenterConfig) -> Vec<Segment> {
    let degenerate = stream.duration_ms() < config.min_ms;
    let mut stretch_idx = 0;
    let mut accel_idx = 0;
    spans
        .iter()
        .map(|span| {
            while stretch_idx < stream.stretch.len() && stream.stretch[stretch_idx].t_ms < span.start_ms {
                stretch_idx += 1;
            }
            let s0 = stretch_idx;
            while stretch_idx < stream.stretch.len() && stream.stretch[stretch_idx].t_ms < span.end_ms {
                stretch_idx += 1;
            }
            while accel_idx < stream.accel.len() && stream.accel[accel_idx].t_ms < span.start_ms {
                accel_idx += 1;
            }
            let a0 = accel_idx;
            while accel_idx < stream.accel.len() && stream.accel[accel_idx].t_ms < span.end_ms {
                accel_idx += 1;
            }
            Segment {
                start_ms: span.start_ms,
                end_ms: span.end_ms,
                stretch: stream.stretch[s0..stretch_idx].iter().map(|p| p.s).collect(),
                accel: stream.accel[a0..accel_idx].to_vec(),
                boundary_cause: span.cause,
                degenerate,
            }
        })
        .collect()
}

/// Segment spans of a stream.
pub fn segment_spans(stream: &SensorStream, config: SegmenterConfig) -> Result<Vec<SegmentSpan>> {
    let (Some(first), Some(last)) = (stream.stretch.first(), stream.stretch.last()) else {
        return Err(Error::EmptyChannel("stretch".into()));
    };
    let times: Vec<i64> = stream.stretch.iter().map(|p| p.t_ms).collect();
    let values: Vec<f64> = stream.stretch.iter().map(|p| p.s).collect();
    let boundaries = detect_boundaries(&times, &values, config);
    Ok(spans_from_boundaries(
        first.t_ms,
        last.t_ms + stream.stretch_period_ms(),
        &boundaries,
    ))
}

/// Cut a stream into tiling segments.
pub fn segment_stream(stream: &SensorStream, config: SegmenterConfig) -> Result<Vec<Segment>> {
    let spans = segment_spans(stream, config)?;
    Ok(cut_stream(stream, &spans, config))
}
