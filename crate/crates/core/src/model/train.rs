//! Offline supervised training: full-batch gradient descent with momentum on
//! the mean cross-entropy, all weights trainable.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, softmax, weight_bytes, FeatureScaler, NetworkParams};
use crate::activity::{ActivityLabel, N_ACTIVITIES};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub type LabeledSample = (FeatureVector, ActivityLabel);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Fraction held out for the test report.
    pub test_fraction: f64,
    /// Fraction of the remaining data held out for validation.
    pub validation_fraction: f64,
    /// Independent initializations; the one with the lowest final training
    /// loss is kept.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_hidden: super::DEFAULT_HIDDEN,
            epochs: 1500,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 0,
            test_fraction: 0.2,
            validation_fraction: 0.0,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub final_loss: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Gradient of the mean cross-entropy, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub theta_in: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Mean cross-entropy and its gradient over already-scaled inputs.
fn scaled_loss_and_gradient(params: &NetworkParams, scaled: &[Vec<f64>], labels: &[usize]) -> (f64, Gradient) {
    let nh = params.n_hidden();
    let mut g_in = vec![0.0; params.theta_in.len()];
    let mut g_out = vec![0.0; params.theta.len()];
    let mut loss = 0.0;
    let mut d_hidden = vec![0.0; nh];

    for (x, &label) in scaled.iter().zip(labels) {
        let hidden = params.hidden_from_scaled(x);
        let outputs = params.outputs_from_hidden(&hidden);
        let mut delta = softmax(&outputs);
        loss -= delta[label].max(f64::MIN_POSITIVE).ln();
        delta[label] -= 1.0;

        for (j, &h) in hidden.iter().enumerate() {
            let row = &mut g_out[j * N_ACTIVITIES..(j + 1) * N_ACTIVITIES];
            for (g, d) in row.iter_mut().zip(&delta) {
                *g += h * d;
            }
        }
        for (j, dh) in d_hidden.iter_mut().enumerate() {
            *dh = if hidden[j] > 0.0 {
                (0..N_ACTIVITIES).map(|i| params.theta_at(j, i) * delta[i]).sum()
            } else {
                0.0
            };
        }
        for (r, &xr) in x.iter().chain(std::iter::once(&1.0)).enumerate() {
            let row = &mut g_in[r * nh..(r + 1) * nh];
            for (g, dh) in row.iter_mut().zip(&d_hidden) {
                *g += xr * dh;
            }
        }
    }
    let n = scaled.len().max(1) as f64;
    g_in.iter_mut().chain(g_out.iter_mut()).for_each(|g| *g /= n);
    (
        loss / n,
        Gradient {
            theta_in: g_in,
            theta: g_out,
        },
    )
}

/// Mean cross-entropy of `params` on `data` and its gradient with respect to
/// every weight, with the params' own scaler applied.
pub fn loss_and_gradient(params: &NetworkParams, data: &[LabeledSample]) -> (f64, Gradient) {
    let scaled: Vec<Vec<f64>> = data.iter().map(|(x, _)| params.scaler.apply(&x.0)).collect();
    let labels: Vec<usize> = data.iter().map(|(_, y)| y.index()).collect();
    scaled_loss_and_gradient(params, &scaled, &labels)
}

/// Stratified seeded split into `(train, test)`.
pub fn split_dataset(
    data: &[LabeledSample],
    test_fraction: f64,
    seed: u64,
) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in ActivityLabel::ALL {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].1 == label).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        for (k, &i) in idx.iter().enumerate() {
            if k < n_test {
                test.push(data[i]);
            } else {
                train.push(data[i]);
            }
        }
    }
    (train, test)
}

fn accuracy(params: &NetworkParams, data: &[LabeledSample]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, y) in data {
        if params.classify(x)? == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Full-batch gradient descent with momentum; returns the last loss.
fn descend(params: &mut NetworkParams, scaled: &[Vec<f64>], labels: &[usize], config: &TrainConfig) -> Result<f64> {
    let mut v_in = vec![0.0; params.theta_in.len()];
    let mut v_out = vec![0.0; params.theta.len()];
    let mut final_loss = f64::NAN;
    for epoch in 0..config.epochs {
        let (loss, grad) = scaled_loss_and_gradient(params, scaled, labels);
        if !loss.is_finite() {
            return Err(Error::NanLoss { batch: epoch });
        }
        final_loss = loss;
        for ((w, v), g) in params.theta_in.iter_mut().zip(&mut v_in).zip(&grad.theta_in) {
            *v = config.momentum * *v - config.learning_rate * g;
            *w += *v;
        }
        for ((w, v), g) in params.theta.iter_mut().zip(&mut v_out).zip(&grad.theta) {
            *v = config.momentum * *v - config.learning_rate * g;
            *w += *v;
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("weights diverged during training".into()));
    }
    Ok(final_loss)
}

/// Train a fresh network on `dataset`, holding out `config.test_fraction`
/// (stratified, seeded) for the test report.
pub fn train_supervised(dataset: &[LabeledSample], config: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if let Some(i) = dataset.iter().position(|(x, _)| x.0.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("training sample {i}")));
    }
    if !(0.0..1.0).contains(&config.test_fraction) || !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::InvalidArgument("split fractions must lie in [0, 1)".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }

    let (rest, test) = split_dataset(dataset, config.test_fraction, config.seed);
    let (train, validation) = split_dataset(&rest, config.validation_fraction, config.seed.wrapping_add(1));
    let mut classes = [false; N_ACTIVITIES];
    for (_, y) in &train {
        classes[y.index()] = true;
    }
    if classes.iter().filter(|&&c| c).count() < 2 {
        return Err(Error::SingleClass);
    }

    let scaler = FeatureScaler::fit(train.iter().map(|(x, _)| x));
    let scaled: Vec<Vec<f64>> = train.iter().map(|(x, _)| scaler.apply(&x.0)).collect();
    let labels: Vec<usize> = train.iter().map(|(_, y)| y.index()).collect();

    let mut best: Option<(NetworkParams, f64)> = None;
    for restart in 0..config.restarts.max(1) {
        let init_seed = config
            .seed
            .wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut params = NetworkParams::init(config.n_hidden, init_seed)?;
        params.scaler = scaler.clone();
        let loss = descend(&mut params, &scaled, &labels, config)?;
        if best.as_ref().is_none_or(|(_, b)| loss < *b) {
            best = Some((params, loss));
        }
    }
    let (params, final_loss) = best.expect("at least one restart");

    let train_accuracy = {
        let correct = scaled
            .iter()
            .zip(&labels)
            .filter(|(x, &y)| argmax(&params.policy_from_hidden(params.hidden_from_scaled(x)).probs) == y)
            .count();
        correct as f64 / scaled.len() as f64
    };
    Ok(TrainOutcome {
        train_accuracy,
        validation_accuracy: if validation.is_empty() {
            None
        } else {
            Some(accuracy(&params, &validation)?)
        },
        test_accuracy: if test.is_empty() {
            None
        } else {
            Some(accuracy(&params, &test)?)
        },
        final_loss,
        train_size: train.len(),
        test_size: test.len(),
        params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_hidden: usize,
    pub accuracy: f64,
    pub weight_bytes: usize,
}

/// Train one model per hidden-layer size. Accuracy is measured on the test
/// split when one is configured, otherwise on the training data.
pub fn sweep_hidden(
    dataset: &[LabeledSample],
    n_hidden: impl IntoIterator<Item = usize>,
    base: &TrainConfig,
) -> Result<Vec<SweepPoint>> {
    n_hidden
        .into_iter()
        .map(|nh| {
            let config = TrainConfig {
                n_hidden: nh,
                ..base.clone()
            };
            let outcome = train_supervised(dataset, &config)?;
            Ok(SweepPoint {
                n_hidden: nh,
                accuracy: outcome.test_accuracy.unwrap_or(outcome.train_accuracy),
                weight_bytes: weight_bytes(nh),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::N_FEATURES;
    use rand::Rng;

    fn cluster_data(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 {
                    ActivityLabel::Walk
                } else {
                    ActivityLabel::Sit
                };
                let center = if i % 2 == 0 { 2.0 } else { -2.0 };
                let mut x = [0.0; N_FEATURES];
                for v in x.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
                x[0] += center;
                x[7] -= center;
                (FeatureVector(x), label)
            })
            .collect()
    }

    #[test]
    fn separable_clusters_train_to_full_accuracy() {
        let data = cluster_data(200, 3);
        // Oracle: the known separating direction x0 - x7 classifies every sample.
        for (x, y) in &data {
            let side = x.0[0] - x.0[7] > 0.0;
            assert_eq!(side, *y == ActivityLabel::Walk);
        }
        let config = TrainConfig {
            epochs: 200,
            test_fraction: 0.0,
            ..TrainConfig::default()
        };
        let outcome = train_supervised(&data, &config).unwrap();
        assert!(outcome.train_accuracy >= 0.99, "{}", outcome.train_accuracy);
        assert!(outcome.test_accuracy.is_none());
    }

    #[test]
    fn duplicated_data_learns_the_same_params() {
        let data = cluster_data(40, 5);
        let doubled: Vec<LabeledSample> = data.iter().flat_map(|s| [*s, *s]).collect();
        let config = TrainConfig {
            epochs: 50,
            test_fraction: 0.0,
            ..TrainConfig::default()
        };
        let a = train_supervised(&data, &config).unwrap().params;
        let b = train_supervised(&doubled, &config).unwrap().params;
        for (x, y) in a.theta_in.iter().chain(&a.theta).zip(b.theta_in.iter().chain(&b.theta)) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
        let again = train_supervised(&data, &config).unwrap().params;
        assert_eq!(a, again);
    }

    #[test]
    fn single_class_and_empty_are_rejected() {
        let data: Vec<LabeledSample> = cluster_data(10, 1)
            .into_iter()
            .map(|(x, _)| (x, ActivityLabel::Jump))
            .collect();
        assert!(matches!(
            train_supervised(&data, &TrainConfig::default()),
            Err(Error::SingleClass)
        ));
        assert!(train_supervised(&[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn divergent_step_reports_nan_batch() {
        let mut data = cluster_data(20, 2);
        data[0].0 .0[3] = 1e300;
        let config = TrainConfig {
            learning_rate: 1e300,
            test_fraction: 0.0,
            ..TrainConfig::default()
        };
        match train_supervised(&data, &config) {
            Err(Error::NanLoss { .. }) | Err(Error::NonFinite(_)) => {}
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<LabeledSample> = (0..10)
            .map(|i| {
                let mut x = [0.0; N_FEATURES];
                x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                (FeatureVector(x), ActivityLabel::ALL[i % 7])
            })
            .collect();
        let mut params = NetworkParams::init(3, 4).unwrap();
        params.theta_in.iter_mut().for_each(|w| *w *= 3.0);
        let (_, grad) = loss_and_gradient(&params, &data);
        let h = 1e-6;
        let loss_at = |p: &NetworkParams| loss_and_gradient(p, &data).0;
        let mut checked = 0;
        for idx in (0..params.theta_in.len()).step_by(7) {
            let mut plus = params.clone();
            plus.theta_in[idx] += h;
            let mut minus = params.clone();
            minus.theta_in[idx] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let an = grad.theta_in[idx];
            assert!(
                (fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()).max(1e-3),
                "theta_in[{idx}]: {fd} vs {an}"
            );
            checked += 1;
        }
        for idx in 0..params.theta.len() {
            let mut plus = params.clone();
            plus.theta[idx] += h;
            let mut minus = params.clone();
            minus.theta[idx] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let an = grad.theta[idx];
            assert!(
                (fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()).max(1e-3),
                "theta[{idx}]: {fd} vs {an}"
            );
            checked += 1;
        }
        assert_eq!(checked, 51 + 28);
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let data = cluster_data(100, 9);
        let (train, test) = split_dataset(&data, 0.2, 1);
        assert_eq!(test.len(), 20);
        assert_eq!(train.len(), 80);
        assert_eq!(test.iter().filter(|(_, y)| *y == ActivityLabel::Walk).count(), 10);
        let (train2, _) = split_dataset(&data, 0.2, 1);
        assert_eq!(train, train2);
    }

    #[test]
    fn sweep_reports_weight_bytes() {
        let data = cluster_data(60, 4);
        let config = TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        };
        let points = sweep_hidden(&data, 1..=3, &config).unwrap();
        let bytes: Vec<usize> = points.iter().map(|p| p.weight_bytes).collect();
        assert_eq!(
            bytes,
            vec![weight_bytes(1), weight_bytes(1) + 500, weight_bytes(1) + 1000]
        );
    }
}
