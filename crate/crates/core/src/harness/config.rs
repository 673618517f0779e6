//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so typos do not silently fall back to defaults.

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::PreprocessConfig;
use crate::model::TrainConfig;
use crate::online::{LearnerConfig, PrevActivitySource, RewardMode};
use crate::segment::SegmenterConfig;

use super::synth::UserProfile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSettings {
    pub users: usize,
    pub duration_s: f64,
    pub stretch_rate_hz: f64,
    pub accel_rate_hz: f64,
    /// Accelerometer clock reading minus stretch clock reading at start.
    pub accel_offset_ms: i64,
    pub profile: UserProfile,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            users: 1,
            duration_s: 300.0,
            stretch_rate_hz: 100.0,
            accel_rate_hz: 250.0,
            accel_offset_ms: 0,
            profile: UserProfile::default(),
        }
    }
}

/// Every tunable of the harness in one place.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessConfig {
    pub seed: u64,
    #[serde(skip)]
    pub preprocess: PreprocessConfig,
    #[serde(skip)]
    pub segmenter: SegmenterConfig,
    pub train: TrainConfig,
    pub learner: LearnerConfig,
    pub synth: SynthSettings,
    pub sweep_min: usize,
    pub sweep_max: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            preprocess: PreprocessConfig::default(),
            segmenter: SegmenterConfig::default(),
            train: TrainConfig::default(),
            learner: LearnerConfig::default(),
            synth: SynthSettings::default(),
            sweep_min: 1,
            sweep_max: 8,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("config key {key}: cannot parse {value:?}")))
}

/// Split `text` into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::MalformedRow {
                file: "config".into(),
                line: i + 1,
                msg: "expected key=value".into(),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::MalformedRow {
                file: "config".into(),
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        out.push((i + 1, key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl HarnessConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, key, value) in parse_pairs(text)? {
            cfg.set(&key, &value).map_err(|e| match e {
                Error::InvalidArgument(msg) => Error::MalformedRow {
                    file: "config".into(),
                    line,
                    msg,
                },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Set the run seed everywhere it is consumed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.learner.seed = seed;
        self
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "seed" => *self = self.clone().with_seed(parse(key, v)?),
            "filter_window" => self.preprocess.filter_window = parse(key, v)?,
            "s_const" => self.preprocess.s_const = parse(key, v)?,
            "min_segment_ms" => self.segmenter.min_ms = parse(key, v)?,
            "max_segment_ms" => self.segmenter.max_ms = parse(key, v)?,
            "flat_epsilon" => self.segmenter.epsilon = parse(key, v)?,
            "n_hidden" => self.train.n_hidden = parse(key, v)?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "momentum" => self.train.momentum = parse(key, v)?,
            "test_fraction" => self.train.test_fraction = parse(key, v)?,
            "validation_fraction" => self.train.validation_fraction = parse(key, v)?,
            "restarts" => self.train.restarts = parse(key, v)?,
            "alpha" => self.learner.alpha = parse(key, v)?,
            "episodes" => self.learner.episodes = parse(key, v)?,
            "runs" => self.learner.runs = parse(key, v)?,
            "reward_mode" => {
                self.learner.reward_mode = match v {
                    "segment" => RewardMode::PerSegment,
                    "epoch" => RewardMode::PerEpoch,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "reward_mode must be segment or epoch, got {v:?}"
                        )))
                    }
                }
            }
            "prev_activity" => {
                self.learner.prev_activity = match v {
                    "closed_loop" => PrevActivitySource::ClosedLoop,
                    "ground_truth" => PrevActivitySource::GroundTruth,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "prev_activity must be closed_loop or ground_truth, got {v:?}"
                        )))
                    }
                }
            }
            "users" => self.synth.users = parse(key, v)?,
            "duration_s" => self.synth.duration_s = parse(key, v)?,
            "stretch_rate_hz" => self.synth.stretch_rate_hz = parse(key, v)?,
            "accel_rate_hz" => self.synth.accel_rate_hz = parse(key, v)?,
            "accel_offset_ms" => self.synth.accel_offset_ms = parse(key, v)?,
            "gait_hz" => self.synth.profile.gait_hz = parse(key, v)?,
            "stretch_amplitude" => self.synth.profile.stretch_amplitude = parse(key, v)?,
            "accel_noise" => self.synth.profile.accel_noise = parse(key, v)?,
            "stretch_noise" => self.synth.profile.stretch_noise = parse(key, v)?,
            "mount_tilt_deg" => self.synth.profile.mount_tilt_deg = parse(key, v)?,
            "motion_intensity" => self.synth.profile.motion_intensity = parse(key, v)?,
            "sweep_min" => self.sweep_min = parse(key, v)?,
            "sweep_max" => self.sweep_max = parse(key, v)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.preprocess.filter_window == 0 {
            return bad("filter_window must be positive");
        }
        if !(self.preprocess.s_const > 0.0) {
            return bad("s_const must be positive");
        }
        if self.segmenter.min_ms <= 0 || self.segmenter.max_ms < self.segmenter.min_ms {
            return bad("segment limits must satisfy 0 < min_segment_ms <= max_segment_ms");
        }
        if !(self.segmenter.epsilon >= 0.0) {
            return bad("flat_epsilon must be non-negative");
        }
        if self.train.n_hidden == 0 || self.train.n_hidden > u16::MAX as usize {
            return bad("n_hidden out of range");
        }
        if !(0.0..1.0).contains(&self.train.test_fraction) || !(0.0..1.0).contains(&self.train.validation_fraction) {
            return bad("test_fraction and validation_fraction must be in [0, 1)");
        }
        if !(self.learner.alpha >= 0.0) || !self.learner.alpha.is_finite() {
            return bad("alpha must be a finite non-negative number");
        }
        if self.sweep_min == 0 || self.sweep_max < self.sweep_min {
            return bad("sweep range must satisfy 1 <= sweep_min <= sweep_max");
        }
        if self.synth.users == 0 || !(self.synth.duration_s > 0.0) {
            return bad("users and duration_s must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_pairs() {
        let cfg = HarnessConfig::from_text(
            "# comment\n\nn_hidden = 6\nalpha=0.05\nreward_mode = epoch\nseed = 9\nmount_tilt_deg = 12.5\n",
        )
        .unwrap();
        assert_eq!(cfg.train.n_hidden, 6);
        assert_eq!(cfg.learner.alpha, 0.05);
        assert_eq!(cfg.learner.reward_mode, RewardMode::PerEpoch);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.learner.seed, 9);
        assert_eq!(cfg.synth.profile.mount_tilt_deg, 12.5);
    }

    #[test]
    fn rejects_unknown_keys_with_line() {
        let err = HarnessConfig::from_text("n_hidden=4\nn_hiden=5\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(HarnessConfig::from_text("epochs = many").is_err());
        assert!(HarnessConfig::from_text("no equals sign").is_err());
        assert!(HarnessConfig::from_text("n_hidden = 0").is_err());
        assert!(HarnessConfig::from_text("test_fraction = 1.5").is_err());
    }

    #[test]
    fn empty_text_is_default() {
        assert_eq!(HarnessConfig::from_text("").unwrap(), HarnessConfig::default());
    }
}
