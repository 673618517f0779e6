//! Streaming activity recognition from a knee stretch sensor and an
//! accelerometer.
//!
//! The stages are:
//!
//! 1. [`ingest`]: parse, align, filter and normalize the raw channels.
//! 2. [`segment`]: cut the stream at rising stretch trends, 1 to 3 s apart.
//! 3. [`features`]: a 117-value vector per segment from FFT and Haar DWT.
//! 4. [`model`]: a one-hidden-layer softmax classifier with ~2 kB of weights.
//! 5. [`online`]: policy-gradient adaptation of the output layer.
//!
//! [`harness`] holds the synthetic generator, evaluation and the driver.

pub mod activity;
pub mod error;
pub mod features;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod online;
pub mod segment;
pub mod transform;

pub use activity::{ActivityLabel, N_ACTIVITIES};
pub use error::{Error, ModelFormatError, Result};
pub use features::{FeatureExtractor, FeatureVector, N_FEATURES};
pub use ingest::{preprocess, PreprocessConfig, RawRecording, SensorStream};
pub use model::{NetworkParams, Policy, TrainConfig};
pub use online::{LearnerConfig, RewardEvent, RewardMode};
pub use segment::{segment_stream, Segment, SegmenterConfig};
