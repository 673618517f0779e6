//! Synthetic data, datasets on disk, evaluation and the end-to-end driver.

pub mod config;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod pipeline;
pub mod synth;

pub use config::HarnessConfig;
pub use corpus::{synthesize_user, training_corpus, training_profile, UserCorpus};
pub use dataset::{
    extract_records, labeled_samples, load_recording, load_stream, majority_label, read_features_csv,
    read_segments_csv, write_features_csv, write_recording, write_segments_csv, RecordingPaths, SegmentRecord,
};
pub use eval::{evaluate, ConfusionMatrix};
pub use pipeline::{run_pipeline, run_pipeline_with, PipelineMode, PipelineOutput, Recognition};
pub use synth::{generate_synthetic, random_script, SynthConfig, SyntheticRecording, UserProfile};
