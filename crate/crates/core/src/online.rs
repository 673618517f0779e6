//! Online adaptation of the output layer from user feedback.
//!
//! Only `θ` (hidden → output) is touched. For the greedy action `a_t` with
//! reward `r`, every output weight moves along `α·r·∂log π(a_t)/∂θ[j][i]`:
//!
//! ```text
//! θ[j][t] += α r (1 − π(a_t)) h_j      weights into the chosen output
//! θ[j][i] -= α r π(a_i) h_j            every other output weight
//! ```

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity::{ActivityLabel, N_ACTIVITIES};
use crate::error::{Error, Result};
use crate::model::{LabeledSample, NetworkParams, Policy};

#[derive(Debug, Clone, PartialEq)]
pub struct RewardEvent {
    pub reward: f64,
    pub action: ActivityLabel,
    pub policy: Policy,
}

impl RewardEvent {
    pub fn new(reward: f64, action: ActivityLabel, policy: Policy) -> Result<Self> {
        if ![-1.0, 0.0, 1.0].contains(&reward) {
            return Err(Error::InvalidArgument(format!(
                "reward must be -1, 0 or +1, got {reward}"
            )));
        }
        Ok(Self { reward, action, policy })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardMode {
    /// One reward per segment.
    PerSegment,
    /// One reward per maximal run of identical true labels, shared by every
    /// segment of the run.
    PerEpoch,
}

/// Where the previous-activity feature comes from during a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrevActivitySource {
    /// The classifier's own previous output.
    ClosedLoop,
    /// The previous segment's true label.
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub reward_mode: RewardMode,
    pub episodes: usize,
    pub runs: usize,
    pub seed: u64,
    pub prev_activity: PrevActivitySource,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            reward_mode: RewardMode::PerSegment,
            episodes: 100,
            runs: 5,
            seed: 0,
            prev_activity: PrevActivitySource::ClosedLoop,
        }
    }
}

/// Accuracy trace of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// Accuracy before any update.
    pub initial_accuracy: f64,
    /// Accuracy after each episode.
    pub accuracy: Vec<f64>,
    /// Reward epochs per episode.
    pub epochs_per_episode: usize,
    pub updates: usize,
}

/// `∂π(a_t)/∂O_i` for every output `i`.
pub fn policy_gradient_wrt_outputs(policy: &Policy, action: ActivityLabel) -> Vec<f64> {
    let t = action.index();
    let pt = policy.probs[t];
    policy
        .probs
        .iter()
        .enumerate()
        .map(|(i, &pi)| if i == t { pt * (1.0 - pt) } else { -pt * pi })
        .collect()
}

/// Apply one reward to the output layer in place. On a non-finite result the
/// params are left untouched.
pub fn update_weights_in_place(params: &mut NetworkParams, event: &RewardEvent, alpha: f64) -> Result<()> {
    if event.reward == 0.0 {
        return Ok(());
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {alpha}"
        )));
    }
    let h = &event.policy.hidden;
    if h.len() != params.n_hidden() + 1 || event.policy.probs.len() != N_ACTIVITIES {
        return Err(Error::Dimension {
            expected: params.n_hidden() + 1,
            got: h.len(),
        });
    }
    let t = event.action.index();
    let step = alpha * event.reward;
    let mut updated = params.theta.clone();
    for (j, &hj) in h.iter().enumerate() {
        for (i, &pi) in event.policy.probs.iter().enumerate() {
            let w = &mut updated[j * N_ACTIVITIES + i];
            if i == t {
                *w += step * (1.0 - pi) * hj;
            } else {
                *w -= step * pi * hj;
            }
        }
    }
    if let Some(k) = updated.iter().position(|w| !w.is_finite()) {
        return Err(Error::NonFinite(format!(
            "online update produced a non-finite weight at θ[{}][{}] (alpha {alpha} too large?)",
            k / N_ACTIVITIES,
            k % N_ACTIVITIES
        )));
    }
    params.theta = updated;
    Ok(())
}

pub fn update_weights(params: &NetworkParams, event: &RewardEvent, alpha: f64) -> Result<NetworkParams> {
    let mut next = params.clone();
    update_weights_in_place(&mut next, event, alpha)?;
    Ok(next)
}

fn prev_for(
    source: PrevActivitySource,
    predicted: Option<ActivityLabel>,
    truth: Option<ActivityLabel>,
) -> Option<ActivityLabel> {
    match source {
        PrevActivitySource::ClosedLoop => predicted,
        PrevActivitySource::GroundTruth => truth,
    }
}

/// Classify a segment sequence in order and return the fraction correct.
pub fn sequence_accuracy(
    params: &NetworkParams,
    segments: &[LabeledSample],
    source: PrevActivitySource,
) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::InvalidArgument("empty segment sequence".into()));
    }
    let mut predicted = None;
    let mut truth = None;
    let mut correct = 0usize;
    for (x, y) in segments {
        let action = params.classify(&x.with_prev_activity(prev_for(source, predicted, truth)))?;
        if action == *y {
            correct += 1;
        }
        predicted = Some(action);
        truth = Some(*y);
    }
    Ok(correct as f64 / segments.len() as f64)
}

/// Index ranges of maximal runs of identical true labels.
pub fn epochs(segments: &[LabeledSample]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=segments.len() {
        if i == segments.len() || segments[i].1 != segments[start].1 {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Replay a labeled segment sequence for `config.episodes` episodes,
/// updating the output layer from simulated user feedback.
pub fn run_feedback_session(
    params: &NetworkParams,
    segments: &[LabeledSample],
    config: &LearnerConfig,
) -> Result<(NetworkParams, EpisodeLog)> {
    if segments.is_empty() {
        return Err(Error::InvalidArgument("empty segment sequence".into()));
    }
    let mut params = params.clone();
    let source = config.prev_activity;
    let initial_accuracy = sequence_accuracy(&params, segments, source)?;
    let epoch_ranges = epochs(segments);
    let mut accuracy = Vec::with_capacity(config.episodes);
    let mut updates = 0usize;

    for _ in 0..config.episodes {
        let mut predicted = None;
        let mut truth = None;
        match config.reward_mode {
            RewardMode::PerSegment => {
                for (x, y) in segments {
                    let policy = params.forward(&x.with_prev_activity(prev_for(source, predicted, truth)))?;
                    let action = policy.action();
                    let reward = if action == *y { 1.0 } else { -1.0 };
                    update_weights_in_place(&mut params, &RewardEvent { reward, action, policy }, config.alpha)?;
                    updates += 1;
                    predicted = Some(action);
                    truth = Some(*y);
                }
            }
            RewardMode::PerEpoch => {
                for range in &epoch_ranges {
                    let mut events = Vec::with_capacity(range.len());
                    let mut correct = 0usize;
                    for (x, y) in &segments[range.clone()] {
                        let policy = params.forward(&x.with_prev_activity(prev_for(source, predicted, truth)))?;
                        let action = policy.action();
                        if action == *y {
                            correct += 1;
                        }
                        events.push((action, policy));
                        predicted = Some(action);
                        truth = Some(*y);
                    }
                    let reward = if 2 * correct > range.len() { 1.0 } else { -1.0 };
                    for (action, policy) in events {
                        update_weights_in_place(&mut params, &RewardEvent { reward, action, policy }, config.alpha)?;
                        updates += 1;
                    }
                }
            }
        }
        accuracy.push(sequence_accuracy(&params, segments, source)?);
    }

    Ok((
        params,
        EpisodeLog {
            initial_accuracy,
            accuracy,
            epochs_per_episode: match config.reward_mode {
                RewardMode::PerSegment => segments.len(),
                RewardMode::PerEpoch => epoch_ranges.len(),
            },
            updates,
        },
    ))
}

/// Per-user result of a multi-run experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTrace {
    pub runs: Vec<EpisodeLog>,
    pub mean_initial: f64,
    pub mean_accuracy: Vec<f64>,
}

/// Seeded reordering of a session: label epochs are shuffled as blocks so
/// the within-activity segment order survives.
pub fn shuffle_epochs(segments: &[LabeledSample], seed: u64) -> Vec<LabeledSample> {
    let mut blocks = epochs(segments);
    blocks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    blocks.into_iter().flat_map(|r| segments[r].iter().copied()).collect()
}

/// Independent runs per user from the same starting params; runs differ
/// only in their seeded epoch order. Traces are averaged pointwise.
pub fn run_experiment(
    params: &NetworkParams,
    per_user_segments: &[Vec<LabeledSample>],
    config: &LearnerConfig,
) -> Result<Vec<UserTrace>> {
    if config.runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    per_user_segments
        .iter()
        .enumerate()
        .map(|(user, segments)| {
            let runs = (0..config.runs)
                .map(|run| {
                    let seed = config.seed ^ ((user as u64) << 32) ^ run as u64;
                    let order = shuffle_epochs(segments, seed);
                    run_feedback_session(params, &order, config).map(|(_, log)| log)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = runs.len() as f64;
            let mean_initial = runs.iter().map(|r| r.initial_accuracy).sum::<f64>() / n;
            let mean_accuracy = (0..config.episodes)
                .map(|e| runs.iter().map(|r| r.accuracy[e]).sum::<f64>() / n)
                .collect();
            Ok(UserTrace {
                runs,
                mean_initial,
                mean_accuracy,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, N_FEATURES};
    use crate::model::softmax;
    use rand::Rng;

    fn uniform_policy(n_hidden: usize) -> Policy {
        Policy {
            hidden: vec![1.0; n_hidden + 1],
            outputs: vec![0.0; N_ACTIVITIES],
            probs: vec![1.0 / 7.0; N_ACTIVITIES],
        }
    }

    #[test]
    fn gradient_at_uniform_policy() {
        let g = policy_gradient_wrt_outputs(&uniform_policy(4), ActivityLabel::Drive);
        assert!((g[0] - 6.0 / 49.0).abs() < 1e-15);
        for v in &g[1..] {
            assert!((v + 1.0 / 49.0).abs() < 1e-15);
        }
        assert!(g.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let o: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let t = rng.random_range(0..7);
            let policy = Policy {
                hidden: vec![1.0],
                probs: softmax(&o),
                outputs: o.clone(),
            };
            let g = policy_gradient_wrt_outputs(&policy, ActivityLabel::ALL[t]);
            let h = 1e-6;
            for i in 0..7 {
                let mut plus = o.clone();
                plus[i] += h;
                let mut minus = o.clone();
                minus[i] -= h;
                let fd = (softmax(&plus)[t] - softmax(&minus)[t]) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7, "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn zero_reward_is_bit_identical() {
        let params = NetworkParams::init(4, 3).unwrap();
        let event = RewardEvent::new(0.0, ActivityLabel::Walk, uniform_policy(4)).unwrap();
        let next = update_weights(&params, &event, 0.5).unwrap();
        assert_eq!(
            next.theta.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            params.theta.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(next, params);
    }

    #[test]
    fn uniform_update_increments() {
        let params = NetworkParams::init(4, 3).unwrap();
        let alpha = 0.01;
        let event = RewardEvent::new(1.0, ActivityLabel::Drive, uniform_policy(4)).unwrap();
        let next = update_weights(&params, &event, alpha).unwrap();
        for j in 0..5 {
            for i in 0..7 {
                let d = next.theta_at(j, i) - params.theta_at(j, i);
                let expected = if i == 0 { alpha * 6.0 / 7.0 } else { -alpha / 7.0 };
                assert!((d - expected).abs() < 1e-15);
            }
        }
        assert_eq!(next.theta_in, params.theta_in);
    }

    #[test]
    fn rejects_bad_reward_and_divergence() {
        assert!(RewardEvent::new(0.5, ActivityLabel::Walk, uniform_policy(4)).is_err());
        let params = NetworkParams::init(4, 3).unwrap();
        let mut policy = uniform_policy(4);
        policy.hidden = vec![1e308; 5];
        let event = RewardEvent::new(1.0, ActivityLabel::Walk, policy).unwrap();
        let mut p = params.clone();
        assert!(matches!(
            update_weights_in_place(&mut p, &event, 10.0),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(p, params);
    }

    fn random_segments(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut x = [0.0; N_FEATURES];
                x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                (FeatureVector(x), ActivityLabel::ALL[(i / 4) % 7])
            })
            .collect()
    }

    #[test]
    fn epochs_are_maximal_label_runs() {
        let segs = random_segments(10, 1);
        let e = epochs(&segs);
        assert_eq!(e, vec![0..4, 4..8, 8..10]);
        let shuffled = shuffle_epochs(&segs, 3);
        assert_eq!(shuffled.len(), segs.len());
    }

    #[test]
    fn sessions_are_deterministic_and_keep_theta_in() {
        let params = NetworkParams::init(4, 8).unwrap();
        let segs = random_segments(30, 2);
        for mode in [RewardMode::PerSegment, RewardMode::PerEpoch] {
            let config = LearnerConfig {
                episodes: 5,
                reward_mode: mode,
                ..LearnerConfig::default()
            };
            let (a, log_a) = run_feedback_session(&params, &segs, &config).unwrap();
            let (b, log_b) = run_feedback_session(&params, &segs, &config).unwrap();
            assert_eq!(a, b);
            assert_eq!(log_a, log_b);
            assert_eq!(log_a.accuracy.len(), 5);
            assert!(log_a.accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
            assert_eq!(
                a.theta_in.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
                params.theta_in.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn single_run_experiment_equals_its_session() {
        let params = NetworkParams::init(4, 8).unwrap();
        let users = vec![random_segments(16, 4)];
        let config = LearnerConfig {
            episodes: 3,
            runs: 1,
            ..LearnerConfig::default()
        };
        let traces = run_experiment(&params, &users, &config).unwrap();
        assert_eq!(traces[0].mean_accuracy, traces[0].runs[0].accuracy);
        assert_eq!(traces, run_experiment(&params, &users, &config).unwrap());
        assert!(run_experiment(&params, &users, &LearnerConfig { runs: 0, ..config }).is_err());
    }
}
