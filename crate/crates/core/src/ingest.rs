//! Raw sensor logs: CSV parsing, clock alignment, prefiltering and stretch
//! normalization.
//!
//! Each sensor writes its own CSV with timestamps in its local clock. An
//! optional `# origin_ms=<int>` comment line before the header records the
//! local clock value at the shared experiment start (defaults to the first
//! timestamp), and `# rate_hz=<real>` overrides the nominal sampling rate.
//! Label intervals are expressed in the stretch sensor's clock.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::activity::ActivityLabel;
use crate::error::{Error, Result};

pub const DEFAULT_STRETCH_RATE_HZ: f64 = 100.0;
pub const DEFAULT_ACCEL_RATE_HZ: f64 = 250.0;
pub const DEFAULT_FILTER_WINDOW: usize = 9;
pub const DEFAULT_S_CONST: f64 = 8.0;
/// Plausible capacitance band of the textile stretch sensor.
pub const CAPACITANCE_BAND_PF: (f64, f64) = (300.0, 600.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchSample {
    pub t_ms: i64,
    pub c_pf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t_ms: i64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start_ms: i64,
    pub end_ms: i64,
    pub activity: ActivityLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub stretch: Vec<StretchSample>,
    pub accel: Vec<AccelSample>,
    pub stretch_rate_hz: f64,
    pub accel_rate_hz: f64,
    pub stretch_clock_origin_ms: i64,
    pub accel_clock_origin_ms: i64,
}

/// Normalized stretch sample on the shared time base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchPoint {
    pub t_ms: i64,
    pub s: f64,
}

/// Aligned, filtered and normalized recording ready for segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStream {
    pub stretch: Vec<StretchPoint>,
    pub accel: Vec<AccelSample>,
    pub labels: Option<Vec<LabelInterval>>,
    pub stretch_rate_hz: f64,
    pub accel_rate_hz: f64,
}

impl SensorStream {
    pub fn stretch_period_ms(&self) -> i64 {
        (1000.0 / self.stretch_rate_hz).round().max(1.0) as i64
    }

    pub fn duration_ms(&self) -> i64 {
        match (self.stretch.first(), self.stretch.last()) {
            (Some(a), Some(b)) => b.t_ms - a.t_ms + self.stretch_period_ms(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub filter_window: usize,
    pub s_const: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            filter_window: DEFAULT_FILTER_WINDOW,
            s_const: DEFAULT_S_CONST,
        }
    }
}

struct CsvBody {
    origin_ms: Option<i64>,
    rate_hz: Option<f64>,
    /// (line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

fn malformed(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::MalformedRow {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_csv_body(mut input: impl Read, file: &str, header: &[&str]) -> Result<CsvBody> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut body = CsvBody {
        origin_ms: None,
        rate_hz: None,
        rows: Vec::new(),
    };
    let mut saw_header = false;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "origin_ms" => {
                        body.origin_ms = Some(
                            value
                                .parse()
                                .map_err(|_| malformed(file, line_no, format!("bad origin_ms {value:?}")))?,
                        )
                    }
                    "rate_hz" => {
                        let rate: f64 = value
                            .parse()
                            .map_err(|_| malformed(file, line_no, format!("bad rate_hz {value:?}")))?;
                        if !(rate.is_finite() && rate > 0.0) {
                            return Err(malformed(file, line_no, "rate_hz must be positive"));
                        }
                        body.rate_hz = Some(rate);
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        if !saw_header {
            if fields != header {
                return Err(malformed(
                    file,
                    line_no,
                    format!("expected header {:?}", header.join(",")),
                ));
            }
            saw_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(malformed(
                file,
                line_no,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        body.rows.push((line_no, fields));
    }
    Ok(body)
}

fn parse_field<T: std::str::FromStr>(file: &str, line: usize, name: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| malformed(file, line, format!("bad {name} value {value:?}")))
}

fn parse_real(file: &str, line: usize, name: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_field(file, line, name, value)?;
    if !v.is_finite() {
        return Err(malformed(file, line, format!("non-finite {name}")));
    }
    Ok(v)
}

/// Parse the stretch, accelerometer and optional label CSVs of one recording.
pub fn parse_recording(
    stretch_file: impl Read,
    accel_file: impl Read,
    labels_file: Option<&mut dyn Read>,
) -> Result<(RawRecording, Option<Vec<LabelInterval>>)> {
    let stretch_body = read_csv_body(stretch_file, "stretch", &["t_ms", "c_pf"])?;
    let mut stretch = Vec::with_capacity(stretch_body.rows.len());
    let mut prev_t = None;
    for (line, fields) in &stretch_body.rows {
        let t_ms: i64 = parse_field("stretch", *line, "t_ms", &fields[0])?;
        let c_pf = parse_real("stretch", *line, "c_pf", &fields[1])?;
        if prev_t.is_some_and(|p| t_ms <= p) {
            return Err(Error::NonMonotonic {
                channel: "stretch".into(),
                line: *line,
            });
        }
        let (lo, hi) = CAPACITANCE_BAND_PF;
        if !(lo..=hi).contains(&c_pf) {
            return Err(Error::OutOfBand {
                line: *line,
                value: c_pf,
            });
        }
        prev_t = Some(t_ms);
        stretch.push(StretchSample { t_ms, c_pf });
    }
    if stretch.is_empty() {
        return Err(Error::EmptyChannel("stretch".into()));
    }

    let accel_body = read_csv_body(accel_file, "accel", &["t_ms", "ax", "ay", "az"])?;
    let mut accel = Vec::with_capacity(accel_body.rows.len());
    let mut prev_t = None;
    for (line, fields) in &accel_body.rows {
        let t_ms: i64 = parse_field("accel", *line, "t_ms", &fields[0])?;
        if prev_t.is_some_and(|p| t_ms <= p) {
            return Err(Error::NonMonotonic {
                channel: "accel".into(),
                line: *line,
            });
        }
        prev_t = Some(t_ms);
        accel.push(AccelSample {
            t_ms,
            ax: parse_real("accel", *line, "ax", &fields[1])?,
            ay: parse_real("accel", *line, "ay", &fields[2])?,
            az: parse_real("accel", *line, "az", &fields[3])?,
        });
    }
    if accel.is_empty() {
        return Err(Error::EmptyChannel("accel".into()));
    }

    let labels = match labels_file {
        Some(file) => Some(parse_labels(file)?),
        None => None,
    };

    let raw = RawRecording {
        stretch_clock_origin_ms: stretch_body.origin_ms.unwrap_or(stretch[0].t_ms),
        accel_clock_origin_ms: accel_body.origin_ms.unwrap_or(accel[0].t_ms),
        stretch_rate_hz: stretch_body.rate_hz.unwrap_or(DEFAULT_STRETCH_RATE_HZ),
        accel_rate_hz: accel_body.rate_hz.unwrap_or(DEFAULT_ACCEL_RATE_HZ),
        stretch,
        accel,
    };
    Ok((raw, labels))
}

pub fn parse_labels(input: impl Read) -> Result<Vec<LabelInterval>> {
    let body = read_csv_body(input, "labels", &["start_ms", "end_ms", "activity"])?;
    let mut labels: Vec<LabelInterval> = Vec::with_capacity(body.rows.len());
    for (line, fields) in &body.rows {
        let start_ms: i64 = parse_field("labels", *line, "start_ms", &fields[0])?;
        let end_ms: i64 = parse_field("labels", *line, "end_ms", &fields[1])?;
        let activity: ActivityLabel = fields[2]
            .parse()
            .map_err(|_| malformed("labels", *line, format!("unknown activity {:?}", fields[2])))?;
        if end_ms <= start_ms {
            return Err(malformed("labels", *line, "end_ms must exceed start_ms"));
        }
        if labels.last().is_some_and(|prev| start_ms < prev.end_ms) {
            return Err(Error::OverlappingLabels { line: *line });
        }
        labels.push(LabelInterval {
            start_ms,
            end_ms,
            activity,
        });
    }
    Ok(labels)
}

fn write_origin_comments(out: &mut String, origin_ms: i64, rate_hz: f64) {
    let _ = writeln!(out, "# origin_ms={origin_ms}");
    let _ = writeln!(out, "# rate_hz={rate_hz}");
}

pub fn write_stretch_csv(raw: &RawRecording, mut out: impl Write) -> io::Result<()> {
    let mut text = String::new();
    write_origin_comments(&mut text, raw.stretch_clock_origin_ms, raw.stretch_rate_hz);
    text.push_str("t_ms,c_pf\n");
    for s in &raw.stretch {
        let _ = writeln!(text, "{},{}", s.t_ms, s.c_pf);
    }
    out.write_all(text.as_bytes())
}

pub fn write_accel_csv(raw: &RawRecording, mut out: impl Write) -> io::Result<()> {
    let mut text = String::new();
    write_origin_comments(&mut text, raw.accel_clock_origin_ms, raw.accel_rate_hz);
    text.push_str("t_ms,ax,ay,az\n");
    for a in &raw.accel {
        let _ = writeln!(text, "{},{},{},{}", a.t_ms, a.ax, a.ay, a.az);
    }
    out.write_all(text.as_bytes())
}

pub fn write_labels_csv(labels: &[LabelInterval], mut out: impl Write) -> io::Result<()> {
    let mut text = String::from("start_ms,end_ms,activity\n");
    for l in labels {
        let _ = writeln!(text, "{},{},{}", l.start_ms, l.end_ms, l.activity);
    }
    out.write_all(text.as_bytes())
}

/// Express accelerometer timestamps in the stretch sensor's clock.
pub fn align_clocks(raw: &RawRecording) -> RawRecording {
    let shift = raw.stretch_clock_origin_ms - raw.accel_clock_origin_ms;
    let mut aligned = raw.clone();
    for a in &mut aligned.accel {
        a.t_ms += shift;
    }
    aligned.accel_clock_origin_ms = raw.stretch_clock_origin_ms;
    aligned
}

/// Centered moving average. Near the stream edges the window shrinks
/// symmetrically so that it stays centered on the output sample.
pub fn moving_average(samples: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "moving-average window must be odd and positive, got {window}"
        )));
    }
    let n = samples.len();
    let half = window / 2;
    Ok((0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            let span = &samples[k - h..=k + h];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect())
}

/// `s = (c - min c) / s_const` over the whole input.
pub fn normalize_stretch(filtered: &[f64], s_const: f64) -> Result<Vec<f64>> {
    if filtered.is_empty() {
        return Err(Error::EmptyChannel("stretch".into()));
    }
    if !(s_const.is_finite() && s_const > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "s_const must be positive, got {s_const}"
        )));
    }
    let min = filtered.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(filtered.iter().map(|&c| (c - min) / s_const).collect())
}

/// Streaming counterpart of [`normalize_stretch`].
///
/// Samples from the first `calibration_ms` are held back until the window
/// closes and are then normalized by the window minimum. Afterwards each
/// sample is normalized against the running minimum seen so far.
#[derive(Debug, Clone)]
pub struct StreamingNormalizer {
    s_const: f64,
    calibration_ms: i64,
    start_ms: Option<i64>,
    pending: Vec<(i64, f64)>,
    running_min: f64,
    calibrated: bool,
}

impl StreamingNormalizer {
    pub const DEFAULT_CALIBRATION_MS: i64 = 2000;

    pub fn new(s_const: f64, calibration_ms: i64) -> Self {
        Self {
            s_const,
            calibration_ms,
            start_ms: None,
            pending: Vec::new(),
            running_min: f64::INFINITY,
            calibrated: false,
        }
    }

    pub fn push(&mut self, t_ms: i64, c_pf: f64) -> Vec<StretchPoint> {
        let start = *self.start_ms.get_or_insert(t_ms);
        if self.calibrated {
            self.running_min = self.running_min.min(c_pf);
            return vec![self.point(t_ms, c_pf)];
        }
        if t_ms - start < self.calibration_ms {
            self.running_min = self.running_min.min(c_pf);
            self.pending.push((t_ms, c_pf));
            return Vec::new();
        }
        let mut out = self.flush();
        self.running_min = self.running_min.min(c_pf);
        out.push(self.point(t_ms, c_pf));
        out
    }

    /// Release any samples still held in the calibration buffer.
    pub fn finish(&mut self) -> Vec<StretchPoint> {
        self.flush()
    }

    fn flush(&mut self) -> Vec<StretchPoint> {
        self.calibrated = true;
        let pending = std::mem::take(&mut self.pending);
        pending.into_iter().map(|(t, c)| self.point(t, c)).collect()
    }

    fn point(&self, t_ms: i64, c_pf: f64) -> StretchPoint {
        StretchPoint {
            t_ms,
            s: (c_pf - self.running_min) / self.s_const,
        }
    }
}

/// Align, rebase to the stretch origin, filter and normalize a recording.
pub fn preprocess(
    raw: &RawRecording,
    labels: Option<&[LabelInterval]>,
    config: &PreprocessConfig,
) -> Result<SensorStream> {
    let aligned = align_clocks(raw);
    let origin = aligned.stretch_clock_origin_ms;

    let c: Vec<f64> = aligned.stretch.iter().map(|s| s.c_pf).collect();
    let s = normalize_stretch(&moving_average(&c, config.filter_window)?, config.s_const)?;
    let stretch = aligned
        .stretch
        .iter()
        .zip(s)
        .map(|(raw, s)| StretchPoint {
            t_ms: raw.t_ms - origin,
            s,
        })
        .collect();

    let axis = |f: fn(&AccelSample) -> f64| -> Result<Vec<f64>> {
        let v: Vec<f64> = aligned.accel.iter().map(f).collect();
        moving_average(&v, config.filter_window)
    };
    let (ax, ay, az) = (axis(|a| a.ax)?, axis(|a| a.ay)?, axis(|a| a.az)?);
    let accel = aligned
        .accel
        .iter()
        .enumerate()
        .map(|(i, a)| AccelSample {
            t_ms: a.t_ms - origin,
            ax: ax[i],
            ay: ay[i],
            az: az[i],
        })
        .collect();

    let labels = labels.map(|ls| {
        ls.iter()
            .map(|l| LabelInterval {
                start_ms: l.start_ms - origin,
                end_ms: l.end_ms - origin,
                activity: l.activity,
            })
            .collect()
    });

    Ok(SensorStream {
        stretch,
        accel,
        labels,
        stretch_rate_hz: raw.stretch_rate_hz,
        accel_rate_hz: raw.accel_rate_hz,
    })
}
