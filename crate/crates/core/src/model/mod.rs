//! The 117 → N_h → 7 feed-forward activity classifier.
//!
//! Hidden units use ReLU; the hidden layer is extended with a constant bias
//! unit `h[N_h] = 1`, so the output pre-activations are plain dot products
//! `O_i = Σ_j h_j θ[j][i]` over `N_h + 1` terms and the output layer carries
//! no separate bias.

mod io;
mod train;

pub use io::{load_model, read_model, save_model, write_model, MAGIC, VERSION};
pub use train::{
    loss_and_gradient, split_dataset, sweep_hidden, train_supervised, Gradient, LabeledSample, SweepPoint, TrainConfig,
    TrainOutcome,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activity::{ActivityLabel, N_ACTIVITIES};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, N_FEATURES};

pub const DEFAULT_HIDDEN: usize = 4;
/// Bytes per stored weight.
pub const WEIGHT_BYTES: usize = 4;

/// Stored weights of a network with `n_hidden` hidden units.
pub fn weight_count(n_hidden: usize) -> usize {
    (N_FEATURES + 1) * n_hidden + (n_hidden + 1) * N_ACTIVITIES
}

/// Multiplications per inference; equal to [`weight_count`].
pub fn inference_multiplications(n_hidden: usize) -> usize {
    weight_count(n_hidden)
}

pub fn weight_bytes(n_hidden: usize) -> usize {
    weight_count(n_hidden) * WEIGHT_BYTES
}

/// Per-feature z-score applied before the input layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Default for FeatureScaler {
    fn default() -> Self {
        Self {
            mean: vec![0.0; N_FEATURES],
            std: vec![1.0; N_FEATURES],
        }
    }
}

impl FeatureScaler {
    /// Population mean and standard deviation; near-constant features get
    /// unit scale.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut count = 0usize;
        let mut sum = vec![0.0; N_FEATURES];
        let mut sum_sq = vec![0.0; N_FEATURES];
        let rows: Vec<&FeatureVector> = rows.into_iter().collect();
        for r in &rows {
            count += 1;
            for (s, v) in sum.iter_mut().zip(r.0.iter()) {
                *s += v;
            }
        }
        if count == 0 {
            return Self::default();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        for r in &rows {
            for ((acc, v), m) in sum_sq.iter_mut().zip(r.0.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = sum_sq
            .iter()
            .map(|s| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    n_hidden: usize,
    /// `(N_FEATURES + 1) × n_hidden`, row-major; the last row is the input bias.
    pub theta_in: Vec<f64>,
    /// `(n_hidden + 1) × N_ACTIVITIES`, row-major; the last row multiplies the hidden bias unit.
    pub theta: Vec<f64>,
    pub scaler: FeatureScaler,
}

/// Network output for one input: hidden activations (bias unit last),
/// output pre-activations and the softmax policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub hidden: Vec<f64>,
    pub outputs: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Policy {
    pub fn prob(&self, action: ActivityLabel) -> f64 {
        self.probs[action.index()]
    }

    /// Most probable activity; ties go to the lowest index.
    pub fn action(&self) -> ActivityLabel {
        ActivityLabel::from_index(argmax(&self.probs)).expect("N_A probabilities")
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(outputs: &[f64]) -> Vec<f64> {
    let max = outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = outputs.iter().map(|o| (o - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl NetworkParams {
    /// Seeded Glorot-uniform initialization with an identity scaler.
    pub fn init(n_hidden: usize, seed: u64) -> Result<Self> {
        if n_hidden == 0 {
            return Err(Error::InvalidArgument("network needs at least one hidden unit".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit_in = (6.0 / (N_FEATURES + 1 + n_hidden) as f64).sqrt();
        let limit_out = (6.0 / (n_hidden + 1 + N_ACTIVITIES) as f64).sqrt();
        let theta_in = (0..(N_FEATURES + 1) * n_hidden)
            .map(|_| rng.random_range(-limit_in..limit_in))
            .collect();
        let theta = (0..(n_hidden + 1) * N_ACTIVITIES)
            .map(|_| rng.random_range(-limit_out..limit_out))
            .collect();
        Ok(Self {
            n_hidden,
            theta_in,
            theta,
            scaler: FeatureScaler::default(),
        })
    }

    pub fn from_parts(n_hidden: usize, theta_in: Vec<f64>, theta: Vec<f64>, scaler: FeatureScaler) -> Result<Self> {
        let check = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension { expected, got })
            }
        };
        if n_hidden == 0 {
            return Err(Error::InvalidArgument("network needs at least one hidden unit".into()));
        }
        check((N_FEATURES + 1) * n_hidden, theta_in.len())?;
        check((n_hidden + 1) * N_ACTIVITIES, theta.len())?;
        check(N_FEATURES, scaler.mean.len())?;
        check(N_FEATURES, scaler.std.len())?;
        let params = Self {
            n_hidden,
            theta_in,
            theta,
            scaler,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("network weights".into()));
        }
        Ok(params)
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_activities(&self) -> usize {
        N_ACTIVITIES
    }

    pub fn weight_count(&self) -> usize {
        weight_count(self.n_hidden)
    }

    pub fn is_finite(&self) -> bool {
        self.theta_in.iter().chain(&self.theta).all(|w| w.is_finite())
            && self.scaler.mean.iter().chain(&self.scaler.std).all(|w| w.is_finite())
    }

    #[inline]
    pub fn theta_at(&self, j: usize, i: usize) -> f64 {
        self.theta[j * N_ACTIVITIES + i]
    }

    /// Hidden activations for an already-scaled input, bias unit appended.
    pub(crate) fn hidden_from_scaled(&self, scaled: &[f64]) -> Vec<f64> {
        let nh = self.n_hidden;
        let mut z = self.theta_in[N_FEATURES * nh..].to_vec();
        for (r, &x) in scaled.iter().enumerate() {
            let row = &self.theta_in[r * nh..(r + 1) * nh];
            for (zj, w) in z.iter_mut().zip(row) {
                *zj += x * w;
            }
        }
        let mut h: Vec<f64> = z.into_iter().map(|v| v.max(0.0)).collect();
        h.push(1.0);
        h
    }

    /// Output pre-activations `O_i = Σ_j h_j θ[j][i]`.
    pub fn outputs_from_hidden(&self, hidden: &[f64]) -> Vec<f64> {
        let mut o = vec![0.0; N_ACTIVITIES];
        for (j, &h) in hidden.iter().enumerate() {
            for (i, oi) in o.iter_mut().enumerate() {
                *oi += h * self.theta_at(j, i);
            }
        }
        o
    }

    pub fn policy_from_hidden(&self, hidden: Vec<f64>) -> Policy {
        let outputs = self.outputs_from_hidden(&hidden);
        let probs = softmax(&outputs);
        Policy { hidden, outputs, probs }
    }

    pub fn forward_slice(&self, x: &[f64]) -> Result<Policy> {
        if x.len() != N_FEATURES {
            return Err(Error::Dimension {
                expected: N_FEATURES,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature {i}")));
        }
        let hidden = self.hidden_from_scaled(&self.scaler.apply(x));
        Ok(self.policy_from_hidden(hidden))
    }

    pub fn forward(&self, x: &FeatureVector) -> Result<Policy> {
        self.forward_slice(&x.0)
    }

    pub fn classify(&self, x: &FeatureVector) -> Result<ActivityLabel> {
        Ok(self.forward(x)?.action())
    }
}
