use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::activity::ActivityLabel;
use crate::error::Result;
use crate::features::FeatureExtractor;
use crate::model::{load_model, NetworkParams};
use crate::online::{update_weights_in_place, RewardEvent};
use crate::segment::segment_stream;

use super::config::HarnessConfig;
use super::dataset::{load_stream, majority_label, RecordingPaths};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PipelineMode {
    /// Classify only; the model is never changed.
    Infer,
    /// Classify, then update the output layer from label-derived feedback.
    Rl,
}

impl std::str::FromStr for PipelineMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infer" => Ok(Self::Infer),
            "rl" => Ok(Self::Rl),
            _ => Err(crate::error::Error::InvalidArgument(format!(
                "mode must be infer or rl, got {s:?}"
            ))),
        }
    }
}

/// What the device would transmit for one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recognition {
    pub activity: ActivityLabel,
    pub start_ms: i64,
    pub end_ms: i64,
    /// Majority ground-truth label, when the recording has labels.
    pub truth: Option<ActivityLabel>,
    /// Probability the classifier assigned to `activity`.
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub recognized: Vec<Recognition>,
    /// The model after the session; equal to the input in infer mode.
    pub params: NetworkParams,
    pub updates: usize,
}

impl PipelineOutput {
    /// Fraction of labeled segments recognized correctly, if any are labeled.
    pub fn session_accuracy(&self) -> Option<f64> {
        let labeled: Vec<_> = self
            .recognized
            .iter()
            .filter_map(|r| r.truth.map(|t| t == r.activity))
            .collect();
        (!labeled.is_empty()).then(|| labeled.iter().filter(|&&ok| ok).count() as f64 / labeled.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("activity,start_ms,end_ms,truth,confidence\n");
        for r in &self.recognized {
            let truth = r.truth.map_or("", |t| t.code());
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6}",
                r.activity, r.start_ms, r.end_ms, truth, r.confidence
            );
        }
        out
    }
}

/// Run ingest, segmentation, feature extraction and classification over one
/// recording, with online updates in `Rl` mode. The previous-activity
/// feature is the classifier's own previous output.
pub fn run_pipeline_with(
    paths: &RecordingPaths,
    params: &NetworkParams,
    mode: PipelineMode,
    config: &HarnessConfig,
) -> Result<PipelineOutput> {
    let stream = load_stream(paths, &config.preprocess)?;
    let segments = segment_stream(&stream, config.segmenter).map_err(|e| e.at_stage("segment"))?;
    let mut params = params.clone();
    let mut extractor = FeatureExtractor::default();
    let mut prev = None;
    let mut recognized = Vec::with_capacity(segments.len());
    let mut updates = 0;

    for seg in &segments {
        let x = extractor.extract(seg, prev);
        let policy = params.forward(&x).map_err(|e| e.at_stage("model"))?;
        let action = policy.action();
        let truth = stream
            .labels
            .as_deref()
            .and_then(|ls| majority_label(seg.start_ms, seg.end_ms, ls));
        recognized.push(Recognition {
            activity: action,
            start_ms: seg.start_ms,
            end_ms: seg.end_ms,
            truth,
            confidence: policy.prob(action),
        });
        if mode == PipelineMode::Rl {
            let reward = match truth {
                Some(t) if t == action => 1.0,
                Some(_) => -1.0,
                None => 0.0,
            };
            if reward != 0.0 {
                let event = RewardEvent { reward, action, policy };
                update_weights_in_place(&mut params, &event, config.learner.alpha).map_err(|e| e.at_stage("online"))?;
                updates += 1;
            }
        }
        prev = Some(action);
    }

    Ok(PipelineOutput {
        recognized,
        params,
        updates,
    })
}

/// [`run_pipeline_with`] reading the model from a file. The file is only
/// read; callers decide whether to persist the updated params.
pub fn run_pipeline(
    paths: &RecordingPaths,
    model_path: impl AsRef<Path>,
    mode: PipelineMode,
    config: &HarnessConfig,
) -> Result<PipelineOutput> {
    let params = load_model(model_path).map_err(|e| e.at_stage("model"))?;
    run_pipeline_with(paths, &params, mode, config)
}
