//! Per-segment feature extraction.
//!
//! Every segment is standardized to 32 stretch points and 64 accelerometer
//! points, then reduced to a fixed 117-value vector:
//!
//! | offset | count | content                                      |
//! |--------|-------|----------------------------------------------|
//! | 0      | 16    | FFT magnitudes of previous ∥ current stretch |
//! | 16     | 1     | native-rate stretch minimum                  |
//! | 17     | 1     | native-rate stretch maximum                  |
//! | 18     | 32    | Haar A1 of `ax`                              |
//! | 50     | 32    | Haar A1 of `az`                              |
//! | 82     | 32    | Haar A1 of body acceleration                 |
//! | 114    | 1     | mean of `ay`                                 |
//! | 115    | 1     | segment length in seconds                    |
//! | 116    | 1     | previous activity encoding                   |

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::activity::ActivityLabel;
use crate::error::{Error, Result};
use crate::segment::Segment;
use crate::transform::{dwt_level1, real_fft_magnitudes};

pub const STRETCH_POINTS: usize = 32;
pub const ACCEL_POINTS: usize = 64;
pub const FFT_BINS: usize = 16;
pub const N_FEATURES: usize = 117;

pub const FFT_RANGE: Range<usize> = 0..16;
pub const STRETCH_MIN: usize = 16;
pub const STRETCH_MAX: usize = 17;
pub const DWT_AX_RANGE: Range<usize> = 18..50;
pub const DWT_AZ_RANGE: Range<usize> = 50..82;
pub const DWT_BACC_RANGE: Range<usize> = 82..114;
pub const AY_MEAN: usize = 114;
pub const SEG_LEN: usize = 115;
pub const PREV_ACTIVITY: usize = 116;

/// Standard gravity in accelerometer units.
pub const GRAVITY_G: f64 = 1.0;

/// Sub-sample and smooth `samples` to exactly `target` points.
///
/// With `N >= target` samples and stride `S = N / target`, point `k` is the
/// mean of the `2S + 1` samples centered at `k * S`, indices clamped to the
/// input. Shorter inputs are copied and zero-padded at the tail.
pub fn subsample_smooth(samples: &[f64], target: usize) -> Vec<f64> {
    let n = samples.len();
    if n < target {
        let mut out = samples.to_vec();
        out.resize(target, 0.0);
        return out;
    }
    let stride = (n / target) as isize;
    let last = n as isize - 1;
    (0..target as isize)
        .map(|k| {
            let center = k * stride;
            let sum: f64 = (-stride..=stride)
                .map(|i| samples[(center + i).clamp(0, last) as usize])
                .sum();
            sum / (2 * stride + 1) as f64
        })
        .collect()
}

/// Magnitudes of bins 0..16 of the 64-point DFT of `previous ∥ current`.
pub fn fft_stretch(current: &[f64; STRETCH_POINTS], previous: &[f64; STRETCH_POINTS]) -> [f64; FFT_BINS] {
    let mut signal = [0.0; 2 * STRETCH_POINTS];
    signal[..STRETCH_POINTS].copy_from_slice(previous);
    signal[STRETCH_POINTS..].copy_from_slice(current);
    let mags = real_fft_magnitudes(&signal).expect("64 is a power of two");
    let mut out = [0.0; FFT_BINS];
    out.copy_from_slice(&mags[..FFT_BINS]);
    out
}

/// Gravity-removed acceleration magnitude.
pub fn body_accel(ax: f64, ay: f64, az: f64) -> f64 {
    (ax * ax + ay * ay + az * az).sqrt() - GRAVITY_G
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedSegment {
    pub stretch32: [f64; STRETCH_POINTS],
    /// Rows of `(ax, ay, az, b_acc)`.
    pub accel64: [[f64; 4]; ACCEL_POINTS],
    pub n_native_stretch: usize,
    pub n_native_accel: usize,
    pub stretch_min: f64,
    pub stretch_max: f64,
}

impl StandardizedSegment {
    pub fn zeros() -> Self {
        Self {
            stretch32: [0.0; STRETCH_POINTS],
            accel64: [[0.0; 4]; ACCEL_POINTS],
            n_native_stretch: 0,
            n_native_accel: 0,
            stretch_min: 0.0,
            stretch_max: 0.0,
        }
    }

    fn accel_column(&self, col: usize) -> [f64; ACCEL_POINTS] {
        let mut out = [0.0; ACCEL_POINTS];
        for (o, row) in out.iter_mut().zip(&self.accel64) {
            *o = row[col];
        }
        out
    }
}

pub fn standardize(segment: &Segment) -> StandardizedSegment {
    let mut stretch32 = [0.0; STRETCH_POINTS];
    stretch32.copy_from_slice(&subsample_smooth(&segment.stretch, STRETCH_POINTS));

    let ax: Vec<f64> = segment.accel.iter().map(|a| a.ax).collect();
    let ay: Vec<f64> = segment.accel.iter().map(|a| a.ay).collect();
    let az: Vec<f64> = segment.accel.iter().map(|a| a.az).collect();
    let bacc: Vec<f64> = segment.accel.iter().map(|a| body_accel(a.ax, a.ay, a.az)).collect();
    let columns = [ax, ay, az, bacc].map(|c| subsample_smooth(&c, ACCEL_POINTS));
    let mut accel64 = [[0.0; 4]; ACCEL_POINTS];
    for (k, row) in accel64.iter_mut().enumerate() {
        for (c, col) in columns.iter().enumerate() {
            row[c] = col[k];
        }
    }

    let (stretch_min, stretch_max) = if segment.stretch.is_empty() {
        (0.0, 0.0)
    } else {
        segment
            .stretch
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    };

    StandardizedSegment {
        stretch32,
        accel64,
        n_native_stretch: segment.stretch.len(),
        n_native_accel: segment.accel.len(),
        stretch_min,
        stretch_max,
    }
}

/// The classifier input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(#[serde(with = "serde_array")] pub [f64; N_FEATURES]);

mod serde_array {
    use super::N_FEATURES;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; N_FEATURES], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; N_FEATURES], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| serde::de::Error::invalid_length(v.len(), &"117 features"))
    }
}

impl FeatureVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; N_FEATURES] = values.try_into().map_err(|_| Error::Dimension {
            expected: N_FEATURES,
            got: values.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn fft_mag(&self) -> &[f64] {
        &self.0[FFT_RANGE]
    }
    pub fn stretch_min(&self) -> f64 {
        self.0[STRETCH_MIN]
    }
    pub fn stretch_max(&self) -> f64 {
        self.0[STRETCH_MAX]
    }
    pub fn dwt_ax(&self) -> &[f64] {
        &self.0[DWT_AX_RANGE]
    }
    pub fn dwt_az(&self) -> &[f64] {
        &self.0[DWT_AZ_RANGE]
    }
    pub fn dwt_bacc(&self) -> &[f64] {
        &self.0[DWT_BACC_RANGE]
    }
    pub fn ay_mean(&self) -> f64 {
        self.0[AY_MEAN]
    }
    pub fn seg_len_s(&self) -> f64 {
        self.0[SEG_LEN]
    }
    pub fn prev_activity(&self) -> f64 {
        self.0[PREV_ACTIVITY]
    }

    /// Copy with the previous-activity slot replaced.
    pub fn with_prev_activity(mut self, prev: Option<ActivityLabel>) -> Self {
        self.0[PREV_ACTIVITY] = ActivityLabel::encode_prev(prev);
        self
    }
}

/// Column names in feature order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = (0..FFT_BINS).map(|i| format!("fft_mag_{i}")).collect();
    names.push("stretch_min".into());
    names.push("stretch_max".into());
    for prefix in ["dwt_ax", "dwt_az", "dwt_bacc"] {
        names.extend((0..32).map(|i| format!("{prefix}_{i}")));
    }
    names.push("ay_mean".into());
    names.push("seg_len_s".into());
    names.push("prev_activity".into());
    debug_assert_eq!(names.len(), N_FEATURES);
    names
}

pub fn assemble_features(
    seg: &StandardizedSegment,
    prev_fft_window: &[f64; STRETCH_POINTS],
    seg_len_s: f64,
    prev_activity: Option<ActivityLabel>,
) -> FeatureVector {
    let mut v = [0.0; N_FEATURES];
    v[FFT_RANGE].copy_from_slice(&fft_stretch(&seg.stretch32, prev_fft_window));
    v[STRETCH_MIN] = seg.stretch_min;
    v[STRETCH_MAX] = seg.stretch_max;
    let dwt = |col| dwt_level1(&seg.accel_column(col)).expect("64-point column");
    v[DWT_AX_RANGE].copy_from_slice(&dwt(0));
    v[DWT_AZ_RANGE].copy_from_slice(&dwt(2));
    v[DWT_BACC_RANGE].copy_from_slice(&dwt(3));
    v[AY_MEAN] = seg.accel64.iter().map(|r| r[1]).sum::<f64>() / ACCEL_POINTS as f64;
    v[SEG_LEN] = seg_len_s;
    v[PREV_ACTIVITY] = ActivityLabel::encode_prev(prev_activity);
    FeatureVector(v)
}

/// Per-stream extraction context carrying the previous stretch window.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    prev_window: [f64; STRETCH_POINTS],
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self {
            prev_window: [0.0; STRETCH_POINTS],
        }
    }
}

impl FeatureExtractor {
    pub fn extract(&mut self, segment: &Segment, prev_activity: Option<ActivityLabel>) -> FeatureVector {
        let std = standardize(segment);
        let fv = assemble_features(&std, &self.prev_window, segment.duration_s(), prev_activity);
        self.prev_window = std.stretch32;
        fv
    }
}
