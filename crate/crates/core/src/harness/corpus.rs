//! Synthetic multi-user corpora.

use crate::error::Result;
use crate::ingest::{preprocess, SensorStream};
use crate::model::LabeledSample;
use crate::segment::segment_stream;

use super::config::HarnessConfig;
use super::dataset::{extract_records, SegmentRecord};
use super::synth::{generate_synthetic, random_script, SynthConfig, SyntheticRecording, UserProfile};

/// One synthetic user after the full front end.
#[derive(Debug, Clone)]
pub struct UserCorpus {
    pub recording: SyntheticRecording,
    pub stream: SensorStream,
    pub records: Vec<SegmentRecord>,
}

impl UserCorpus {
    /// Labeled segments in stream order; segments without a majority label
    /// are skipped.
    pub fn labeled(&self) -> Vec<LabeledSample> {
        self.records
            .iter()
            .filter_map(|r| r.label.map(|y| (r.features, y)))
            .collect()
    }
}

/// Mild variation between the users of a training corpus.
pub fn training_profile(base: &UserProfile, user: usize) -> UserProfile {
    let k = user as f64;
    UserProfile {
        gait_hz: base.gait_hz * (1.0 + 0.05 * ((k * 1.7).sin())),
        stretch_amplitude: base.stretch_amplitude * (1.0 + 0.04 * ((k * 2.3).cos())),
        mount_tilt_deg: base.mount_tilt_deg + 2.0 * (k * 0.9).sin(),
        motion_intensity: base.motion_intensity * (1.0 + 0.05 * (k * 1.1).cos()),
        ..base.clone()
    }
}

/// Generate and process one user's recording with a random script.
pub fn synthesize_user(
    seed: u64,
    profile: &UserProfile,
    duration_s: f64,
    config: &HarnessConfig,
) -> Result<UserCorpus> {
    let synth = SynthConfig {
        seed,
        activity_script: random_script(seed, duration_s),
        profile: profile.clone(),
        stretch_rate_hz: config.synth.stretch_rate_hz,
        accel_rate_hz: config.synth.accel_rate_hz,
        stretch_origin_ms: 0,
        accel_origin_ms: config.synth.accel_offset_ms,
    };
    let recording = generate_synthetic(&synth)?;
    let stream = preprocess(&recording.raw, Some(&recording.labels), &config.preprocess)?;
    let segments = segment_stream(&stream, config.segmenter)?;
    let records = extract_records(&stream, &segments);
    Ok(UserCorpus {
        recording,
        stream,
        records,
    })
}

/// `users` training users derived from `config.synth.profile`, seeded from
/// `seed`.
pub fn training_corpus(seed: u64, users: usize, config: &HarnessConfig) -> Result<Vec<UserCorpus>> {
    (0..users)
        .map(|u| {
            let profile = training_profile(&config.synth.profile, u);
            synthesize_user(
                seed.wrapping_mul(1000).wrapping_add(u as u64),
                &profile,
                config.synth.duration_s,
                config,
            )
        })
        .collect()
}
