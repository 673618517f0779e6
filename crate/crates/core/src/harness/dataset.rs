//! Recording directories, segment labeling and the segment/feature CSVs.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::activity::ActivityLabel;
use crate::error::{Error, Result};
use crate::features::{feature_names, FeatureExtractor, FeatureVector, N_FEATURES};
use crate::ingest::{
    parse_recording, preprocess, write_accel_csv, write_labels_csv, write_stretch_csv, LabelInterval, PreprocessConfig,
    RawRecording, SensorStream,
};
use crate::model::LabeledSample;
use crate::segment::{BoundaryCause, Segment, SegmentSpan};

pub const STRETCH_FILE: &str = "stretch.csv";
pub const ACCEL_FILE: &str = "accel.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// The CSV trio of one recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingPaths {
    pub stretch: PathBuf,
    pub accel: PathBuf,
    pub labels: Option<PathBuf>,
}

impl RecordingPaths {
    /// `stretch.csv`, `accel.csv` and, if present, `labels.csv` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let labels = dir.join(LABELS_FILE);
        Self {
            stretch: dir.join(STRETCH_FILE),
            accel: dir.join(ACCEL_FILE),
            labels: labels.exists().then_some(labels),
        }
    }
}

pub fn load_recording(paths: &RecordingPaths) -> Result<(RawRecording, Option<Vec<LabelInterval>>)> {
    let stretch = BufReader::new(File::open(&paths.stretch)?);
    let accel = BufReader::new(File::open(&paths.accel)?);
    match &paths.labels {
        Some(p) => {
            let mut labels = BufReader::new(File::open(p)?);
            parse_recording(stretch, accel, Some(&mut labels))
        }
        None => parse_recording(stretch, accel, None),
    }
}

pub fn write_recording(
    dir: impl AsRef<Path>,
    raw: &RawRecording,
    labels: Option<&[LabelInterval]>,
) -> Result<RecordingPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_stretch_csv(raw, File::create(dir.join(STRETCH_FILE))?)?;
    write_accel_csv(raw, File::create(dir.join(ACCEL_FILE))?)?;
    if let Some(labels) = labels {
        write_labels_csv(labels, File::create(dir.join(LABELS_FILE))?)?;
    }
    Ok(RecordingPaths::in_dir(dir))
}

/// Load and preprocess a recording; failures are attributed to `ingest`.
pub fn load_stream(paths: &RecordingPaths, config: &PreprocessConfig) -> Result<SensorStream> {
    let (raw, labels) = load_recording(paths).map_err(|e| e.at_stage("ingest"))?;
    preprocess(&raw, labels.as_deref(), config).map_err(|e| e.at_stage("ingest"))
}

/// The label covering more than half of `[start_ms, end_ms)`, if any.
pub fn majority_label(start_ms: i64, end_ms: i64, labels: &[LabelInterval]) -> Option<ActivityLabel> {
    let len = end_ms - start_ms;
    if len <= 0 {
        return None;
    }
    let mut cover = [0i64; crate::activity::N_ACTIVITIES];
    for l in labels {
        let overlap = l.end_ms.min(end_ms) - l.start_ms.max(start_ms);
        if overlap > 0 {
            cover[l.activity.index()] += overlap;
        }
    }
    cover
        .iter()
        .position(|&c| 2 * c > len)
        .and_then(ActivityLabel::from_index)
}

/// One extracted segment with its features and majority label.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub span: SegmentSpan,
    pub label: Option<ActivityLabel>,
    pub features: FeatureVector,
}

/// Features for consecutive segments of one stream. The previous-activity
/// slot carries the previous segment's majority label.
pub fn extract_records(stream: &SensorStream, segments: &[Segment]) -> Vec<SegmentRecord> {
    let mut extractor = FeatureExtractor::default();
    let mut prev = None;
    segments
        .iter()
        .map(|seg| {
            let label = stream
                .labels
                .as_deref()
                .and_then(|ls| majority_label(seg.start_ms, seg.end_ms, ls));
            let features = extractor.extract(seg, prev);
            prev = label;
            SegmentRecord {
                span: SegmentSpan {
                    start_ms: seg.start_ms,
                    end_ms: seg.end_ms,
                    cause: seg.boundary_cause,
                },
                label,
                features,
            }
        })
        .collect()
}

/// Labeled rows only; unlabeled segments are dropped.
pub fn labeled_samples(rows: &[(FeatureVector, Option<ActivityLabel>)]) -> Vec<LabeledSample> {
    rows.iter().filter_map(|(x, y)| y.map(|y| (*x, y))).collect()
}

pub fn write_segments_csv(spans: &[SegmentSpan], mut out: impl Write) -> Result<()> {
    let mut text = String::from("start_ms,end_ms,cause\n");
    for s in spans {
        let _ = writeln!(text, "{},{},{}", s.start_ms, s.end_ms, s.cause);
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn malformed(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::MalformedRow {
        file: file.into(),
        line,
        msg: msg.into(),
    }
}

pub fn read_segments_csv(mut input: impl Read) -> Result<Vec<SegmentSpan>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "start_ms,end_ms,cause" => {}
        _ => return Err(malformed("segments", 1, "expected header start_ms,end_ms,cause")),
    }
    let mut spans: Vec<SegmentSpan> = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(malformed("segments", i + 1, "expected 3 fields"));
        }
        let start_ms: i64 = f[0].parse().map_err(|_| malformed("segments", i + 1, "bad start_ms"))?;
        let end_ms: i64 = f[1].parse().map_err(|_| malformed("segments", i + 1, "bad end_ms"))?;
        let cause: BoundaryCause = f[2].parse().map_err(|_| malformed("segments", i + 1, "bad cause"))?;
        if end_ms <= start_ms || spans.last().is_some_and(|p| start_ms < p.end_ms) {
            return Err(malformed(
                "segments",
                i + 1,
                "spans must be ordered and non-overlapping",
            ));
        }
        spans.push(SegmentSpan {
            start_ms,
            end_ms,
            cause,
        });
    }
    Ok(spans)
}

pub fn write_features_csv(rows: &[(FeatureVector, Option<ActivityLabel>)], mut out: impl Write) -> Result<()> {
    let mut text = feature_names().join(",");
    text.push_str(",label\n");
    for (x, y) in rows {
        for v in x.0.iter() {
            let _ = write!(text, "{v},");
        }
        if let Some(y) = y {
            text.push_str(y.code());
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_features_csv(mut input: impl Read) -> Result<Vec<(FeatureVector, Option<ActivityLabel>)>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !saw_header {
            if fields.len() != N_FEATURES + 1 || fields[N_FEATURES] != "label" {
                return Err(malformed(
                    "features",
                    line_no,
                    "expected 117 feature columns and a label column",
                ));
            }
            saw_header = true;
            continue;
        }
        if fields.len() != N_FEATURES + 1 {
            return Err(malformed(
                "features",
                line_no,
                format!("expected {} fields, found {}", N_FEATURES + 1, fields.len()),
            ));
        }
        let mut x = [0.0; N_FEATURES];
        for (k, f) in fields[..N_FEATURES].iter().enumerate() {
            x[k] = f
                .parse()
                .map_err(|_| malformed("features", line_no, format!("bad value in column {k}")))?;
        }
        let label = match fields[N_FEATURES] {
            "" => None,
            code => Some(
                code.parse()
                    .map_err(|_| malformed("features", line_no, format!("unknown label {code:?}")))?,
            ),
        };
        rows.push((FeatureVector(x), label));
    }
    if !saw_header {
        return Err(malformed("features", 1, "missing header"));
    }
    Ok(rows)
}
