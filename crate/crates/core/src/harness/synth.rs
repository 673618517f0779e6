//! Synthetic labeled recordings.
//!
//! The signal model is deliberately simple: static postures are DC levels of
//! knee stretch and gravity direction plus Gaussian noise, walking and
//! jumping are periodic stretch bumps with correlated accelerometer
//! oscillation, and transitions are smooth monotone ramps between the
//! neighbouring postures. Every rise onset the segmenter should find is
//! logged as a ground-truth event.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activity::ActivityLabel;
use crate::error::{Error, Result};
use crate::ingest::{AccelSample, LabelInterval, RawRecording, StretchSample};

pub const NEUTRAL_PF: f64 = 390.0;

/// Per-user variation of the generated signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Stride frequency of the instrumented leg.
    pub gait_hz: f64,
    /// Scale applied to every stretch deviation from neutral.
    pub stretch_amplitude: f64,
    /// Accelerometer noise standard deviation, g.
    pub accel_noise: f64,
    /// Stretch noise standard deviation, pF.
    pub stretch_noise: f64,
    /// Accelerometer mounting rotation about the lateral axis, degrees.
    pub mount_tilt_deg: f64,
    /// Scale applied to dynamic (non-gravity) acceleration.
    pub motion_intensity: f64,
}

impl Default for UserProfile {
    fn default() -> Self {
        Self {
            gait_hz: 0.9,
            stretch_amplitude: 1.0,
            accel_noise: 0.02,
            stretch_noise: 0.08,
            mount_tilt_deg: 0.0,
            motion_intensity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub activity_script: Vec<(ActivityLabel, f64)>,
    pub profile: UserProfile,
    pub stretch_rate_hz: f64,
    pub accel_rate_hz: f64,
    /// Local clock reading of each sensor at the experiment start.
    pub stretch_origin_ms: i64,
    pub accel_origin_ms: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            activity_script: Vec::new(),
            profile: UserProfile::default(),
            stretch_rate_hz: 100.0,
            accel_rate_hz: 250.0,
            stretch_origin_ms: 0,
            accel_origin_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    ActivityStart(ActivityLabel),
    StepOnset,
}

/// Ground-truth event on the experiment time base (ms since start).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub t_ms: i64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub raw: RawRecording,
    /// Label intervals in the stretch sensor's clock.
    pub labels: Vec<LabelInterval>,
    pub events: Vec<GroundTruthEvent>,
}

/// Stretch deviation above neutral (pF) and gravity direction (g) of a static posture.
fn posture(activity: ActivityLabel) -> (f64, [f64; 3]) {
    match activity {
        ActivityLabel::Drive => (34.0, [0.60, 0.05, 0.80]),
        ActivityLabel::LieDown => (7.0, [0.95, 0.25, 0.18]),
        ActivityLabel::Sit => (48.0, [0.34, 0.0, 0.94]),
        ActivityLabel::Stand | ActivityLabel::Walk | ActivityLabel::Jump | ActivityLabel::Transition => {
            (2.0, [0.05, 0.0, 1.0])
        }
    }
}

const WALK_BUMP_PF: f64 = 30.0;
const WALK_SWING: f64 = 0.6;
const JUMP_BUMP_PF: f64 = 58.0;
/// Jump cycles run slower than strides.
const JUMP_RATE_FACTOR: f64 = 0.7;

fn raised_cosine(phase: f64, width: f64) -> f64 {
    if (0.0..width).contains(&phase) {
        0.5 * (1.0 - (2.0 * PI * phase / width).cos())
    } else {
        0.0
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

struct ScriptItem {
    activity: ActivityLabel,
    start_s: f64,
    end_s: f64,
    from: (f64, [f64; 3]),
    to: (f64, [f64; 3]),
}

fn validate(config: &SynthConfig) -> Result<()> {
    if config.activity_script.is_empty() {
        return Err(Error::InvalidArgument("empty activity script".into()));
    }
    if let Some((a, d)) = config
        .activity_script
        .iter()
        .find(|(_, d)| !(d.is_finite() && *d > 0.0))
    {
        return Err(Error::InvalidArgument(format!(
            "duration of {a} must be positive, got {d}"
        )));
    }
    let p = &config.profile;
    if !(0.5..=3.0).contains(&p.gait_hz) {
        return Err(Error::InvalidArgument(format!(
            "gait frequency {} Hz outside [0.5, 3]",
            p.gait_hz
        )));
    }
    if !(p.stretch_amplitude > 0.0 && p.accel_noise >= 0.0 && p.stretch_noise >= 0.0 && p.motion_intensity >= 0.0) {
        return Err(Error::InvalidArgument("profile scales must be non-negative".into()));
    }
    if !(config.stretch_rate_hz > 0.0 && config.accel_rate_hz > 0.0) {
        return Err(Error::InvalidArgument("sampling rates must be positive".into()));
    }
    Ok(())
}

fn build_script(script: &[(ActivityLabel, f64)]) -> Vec<ScriptItem> {
    let mut items = Vec::with_capacity(script.len());
    let mut t = 0.0;
    for (k, &(activity, d)) in script.iter().enumerate() {
        let here = posture(activity);
        let (from, to) = if activity == ActivityLabel::Transition {
            let prev = k
                .checked_sub(1)
                .map(|p| posture(script[p].0))
                .unwrap_or(posture(ActivityLabel::Stand));
            let next = script
                .get(k + 1)
                .map(|n| posture(n.0))
                .unwrap_or(posture(ActivityLabel::Sit));
            (prev, next)
        } else {
            (here, here)
        };
        items.push(ScriptItem {
            activity,
            start_s: t,
            end_s: t + d,
            from,
            to,
        });
        t += d;
    }
    items
}

/// Noise-free stretch deviation (pF, before amplitude scaling) and
/// acceleration (g, before mounting tilt) at experiment time `t`.
fn clean_signal(item: &ScriptItem, t: f64, profile: &UserProfile) -> (f64, [f64; 3]) {
    let tau = t - item.start_s;
    let f = profile.gait_hz;
    let m = profile.motion_intensity;
    let (level, g) = item.from;
    match item.activity {
        ActivityLabel::Walk => {
            let phase = (tau * f).fract();
            let w = 2.0 * PI * f * tau;
            let stretch = level + WALK_BUMP_PF * raised_cosine(phase, WALK_SWING);
            let acc = [
                g[0] + m * 0.45 * w.sin(),
                g[1] + m * 0.06 * (w + 1.0).sin(),
                g[2] + m * 0.30 * (2.0 * w + 0.5).sin(),
            ];
            (stretch, acc)
        }
        ActivityLabel::Jump => {
            let phase = (tau * f * JUMP_RATE_FACTOR).fract();
            let stretch = level + JUMP_BUMP_PF * raised_cosine(phase, 0.45);
            let acc = if (0.45..0.55).contains(&phase) {
                [g[0] + m * 0.3, g[1], g[2] + m * 1.6]
            } else if (0.55..0.75).contains(&phase) {
                [g[0] * (1.0 - m).max(0.0), 0.0, g[2] * (1.0 - m).max(0.0)]
            } else if (0.75..0.85).contains(&phase) {
                let decay = 1.0 - (phase - 0.75) / 0.1;
                [g[0] - m * 0.4 * decay, g[1], g[2] + m * 2.2 * decay]
            } else {
                g
            };
            (stretch, acc)
        }
        ActivityLabel::Transition => {
            let x = smoothstep(tau / (item.end_s - item.start_s));
            let (l0, g0) = item.from;
            let (l1, g1) = item.to;
            let stretch = l0 + (l1 - l0) * x;
            let mut acc = [0.0; 3];
            for i in 0..3 {
                acc[i] = g0[i] + (g1[i] - g0[i]) * x;
            }
            // Body movement during the posture change.
            acc[0] += m * 0.15 * (PI * x).sin();
            (stretch, acc)
        }
        ActivityLabel::Drive => {
            let pedal = 1.5 * (2.0 * PI * 0.25 * tau).sin();
            (level + pedal, g)
        }
        _ => (level, g),
    }
}

fn step_onsets(item: &ScriptItem, profile: &UserProfile) -> Vec<f64> {
    let rate = match item.activity {
        ActivityLabel::Walk => profile.gait_hz,
        ActivityLabel::Jump => profile.gait_hz * JUMP_RATE_FACTOR,
        _ => return Vec::new(),
    };
    let d = item.end_s - item.start_s;
    (0..)
        .map(|k| k as f64 / rate)
        .take_while(|&tau| tau < d - 1e-9)
        .map(|tau| item.start_s + tau)
        .collect()
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticRecording> {
    validate(config)?;
    let profile = &config.profile;
    let items = build_script(&config.activity_script);
    let total_s = items.last().map_or(0.0, |i| i.end_s);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let stretch_noise = Normal::new(0.0, profile.stretch_noise).expect("non-negative sigma");
    let accel_noise = Normal::new(0.0, profile.accel_noise).expect("non-negative sigma");
    let drive_vibration = Normal::new(0.0, 0.05).expect("positive sigma");
    let (tilt_sin, tilt_cos) = profile.mount_tilt_deg.to_radians().sin_cos();

    let item_at = |t: f64| {
        let idx = items.partition_point(|i| i.end_s <= t);
        &items[idx.min(items.len() - 1)]
    };

    let n_stretch = (total_s * config.stretch_rate_hz).floor() as usize;
    let stretch = (0..n_stretch)
        .map(|i| {
            let t = i as f64 / config.stretch_rate_hz;
            let (dev, _) = clean_signal(item_at(t), t, profile);
            let c = NEUTRAL_PF + dev * profile.stretch_amplitude + stretch_noise.sample(&mut rng);
            StretchSample {
                t_ms: config.stretch_origin_ms + (i as f64 * 1000.0 / config.stretch_rate_hz).round() as i64,
                c_pf: c,
            }
        })
        .collect();

    let n_accel = (total_s * config.accel_rate_hz).floor() as usize;
    let accel = (0..n_accel)
        .map(|i| {
            let t = i as f64 / config.accel_rate_hz;
            let item = item_at(t);
            let (_, [mut ax, mut ay, mut az]) = clean_signal(item, t, profile);
            if item.activity == ActivityLabel::Drive {
                ax += profile.motion_intensity * drive_vibration.sample(&mut rng);
                az += profile.motion_intensity * drive_vibration.sample(&mut rng);
            }
            ax += accel_noise.sample(&mut rng);
            ay += accel_noise.sample(&mut rng);
            az += accel_noise.sample(&mut rng);
            AccelSample {
                t_ms: config.accel_origin_ms + (i as f64 * 1000.0 / config.accel_rate_hz).round() as i64,
                ax: ax * tilt_cos + az * tilt_sin,
                ay,
                az: -ax * tilt_sin + az * tilt_cos,
            }
        })
        .collect();

    let to_ms = |s: f64| (s * 1000.0).round() as i64;
    let labels = items
        .iter()
        .map(|i| LabelInterval {
            start_ms: config.stretch_origin_ms + to_ms(i.start_s),
            end_ms: config.stretch_origin_ms + to_ms(i.end_s),
            activity: i.activity,
        })
        .collect();

    let mut events = Vec::new();
    for item in &items {
        events.push(GroundTruthEvent {
            t_ms: to_ms(item.start_s),
            kind: EventKind::ActivityStart(item.activity),
        });
        for onset in step_onsets(item, profile) {
            events.push(GroundTruthEvent {
                t_ms: to_ms(onset),
                kind: EventKind::StepOnset,
            });
        }
    }
    events.sort_by_key(|e| e.t_ms);

    Ok(SyntheticRecording {
        raw: RawRecording {
            stretch,
            accel,
            stretch_rate_hz: config.stretch_rate_hz,
            accel_rate_hz: config.accel_rate_hz,
            stretch_clock_origin_ms: config.stretch_origin_ms,
            accel_clock_origin_ms: config.accel_origin_ms,
        },
        labels,
        events,
    })
}

/// Postures that need an explicit transition when entered or left.
fn needs_transition(a: ActivityLabel, b: ActivityLabel) -> bool {
    if a == ActivityLabel::Transition || b == ActivityLabel::Transition {
        return false;
    }
    let seated = |x| matches!(x, ActivityLabel::Sit | ActivityLabel::Drive | ActivityLabel::LieDown);
    seated(a) != seated(b) || (seated(a) && seated(b) && a != b)
}

/// Random daily-life script of roughly `total_s` seconds.
pub fn random_script(seed: u64, total_s: f64) -> Vec<(ActivityLabel, f64)> {
    use ActivityLabel::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = |rng: &mut ChaCha8Rng, a: ActivityLabel| -> f64 {
        let (lo, hi) = match a {
            Drive => (20.0, 40.0),
            Jump => (8.0, 16.0),
            LieDown => (15.0, 30.0),
            Sit => (15.0, 30.0),
            Stand => (9.0, 18.0),
            Walk => (15.0, 35.0),
            Transition => (1.5, 2.5),
        };
        rng.random_range(lo..hi)
    };
    let next_of = |a: ActivityLabel| -> &'static [ActivityLabel] {
        match a {
            Stand => &[Walk, Sit, LieDown, Jump, Drive, Walk],
            Walk => &[Stand, Jump, Stand],
            Jump => &[Stand, Walk],
            Sit | LieDown | Drive | Transition => &[Stand],
        }
    };

    let mut script = Vec::new();
    let mut current = Stand;
    let mut elapsed = 0.0;
    while elapsed < total_s {
        let d = duration(&mut rng, current);
        script.push((current, d));
        elapsed += d;
        let choices = next_of(current);
        let next = choices[rng.random_range(0..choices.len())];
        if needs_transition(current, next) {
            let d = duration(&mut rng, Transition);
            script.push((Transition, d));
            elapsed += d;
        }
        current = next;
    }
    script
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(script: Vec<(ActivityLabel, f64)>) -> SynthConfig {
        SynthConfig {
            seed: 4,
            activity_script: script,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn walking_logs_one_event_per_stride() {
        let mut c = config(vec![(ActivityLabel::Walk, 10.0)]);
        c.profile.gait_hz = 1.0;
        let rec = generate_synthetic(&c).unwrap();
        let steps = rec.events.iter().filter(|e| e.kind == EventKind::StepOnset).count();
        assert_eq!(steps, 10);
        assert_eq!(rec.raw.stretch.len(), 1000);
        assert_eq!(rec.raw.accel.len(), 2500);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let c = config(random_script(1, 60.0));
        assert_eq!(generate_synthetic(&c).unwrap(), generate_synthetic(&c).unwrap());
        let mut other = c.clone();
        other.seed += 1;
        assert_ne!(
            generate_synthetic(&c).unwrap().raw,
            generate_synthetic(&other).unwrap().raw
        );
    }

    #[test]
    fn sit_sits_higher_than_stand() {
        let rec = generate_synthetic(&config(vec![
            (ActivityLabel::Stand, 20.0),
            (ActivityLabel::Transition, 2.0),
            (ActivityLabel::Sit, 20.0),
        ]))
        .unwrap();
        let mean_var = |range: std::ops::Range<usize>| {
            let v: Vec<f64> = rec.raw.stretch[range].iter().map(|s| s.c_pf).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var, v.len() as f64)
        };
        let (ms, vs, ns) = mean_var(100..1900);
        let (mi, vi, ni) = mean_var(2300..4100);
        // Welch t statistic for the level difference.
        let t = (mi - ms) / (vs / ns + vi / ni).sqrt();
        assert!(mi > ms);
        assert!(t > 50.0, "t = {t}");
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(generate_synthetic(&config(vec![])).is_err());
        assert!(generate_synthetic(&config(vec![(ActivityLabel::Walk, 0.0)])).is_err());
        let mut c = config(vec![(ActivityLabel::Walk, 5.0)]);
        c.profile.gait_hz = 4.0;
        assert!(generate_synthetic(&c).is_err());
    }

    #[test]
    fn labels_tile_the_recording() {
        let rec = generate_synthetic(&config(random_script(7, 120.0))).unwrap();
        for pair in rec.labels.windows(2) {
            assert_eq!(pair[0].end_ms, pair[1].start_ms);
        }
        assert!(rec.raw.stretch.iter().all(|s| (300.0..=600.0).contains(&s.c_pf)));
    }

    #[test]
    fn random_scripts_insert_transitions_between_postures() {
        let script = random_script(3, 600.0);
        for pair in script.windows(2) {
            if needs_transition(pair[0].0, pair[1].0) {
                panic!("missing transition between {} and {}", pair[0].0, pair[1].0);
            }
        }
        assert!(script.iter().map(|(_, d)| d).sum::<f64>() >= 600.0);
    }
}
