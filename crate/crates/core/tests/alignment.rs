use har_core::harness::{generate_synthetic, SynthConfig};
use har_core::ingest::{preprocess, PreprocessConfig, SensorStream};
use har_core::ActivityLabel;

fn walking(stretch_origin_ms: i64, accel_origin_ms: i64) -> SynthConfig {
    let mut c = SynthConfig {
        seed: 21,
        activity_script: vec![(ActivityLabel::Walk, 20.0)],
        stretch_origin_ms,
        accel_origin_ms,
        ..SynthConfig::default()
    };
    c.profile.gait_hz = 1.1;
    c
}

/// Lag (ms) of the accelerometer x axis that best matches the stretch
/// channel, found by brute-force cross-correlation on the stretch grid.
fn best_lag_ms(stretch: &[(i64, f64)], accel: &[(i64, f64)]) -> i64 {
    let mean = |v: &[(i64, f64)]| v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64;
    let (ms, ma) = (mean(stretch), mean(accel));
    let accel_at = |t: i64| -> Option<f64> {
        let i = accel.partition_point(|p| p.0 < t);
        accel.get(i).filter(|p| (p.0 - t).abs() <= 4).map(|p| p.1 - ma)
    };
    (-60..=60)
        .map(|k| k * 10)
        .map(|lag| {
            let score: f64 = stretch
                .iter()
                .filter_map(|&(t, s)| accel_at(t + lag).map(|a| a * (s - ms)))
                .sum();
            (lag, score)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

type Channel = Vec<(i64, f64)>;

fn channels(stream: &SensorStream) -> (Channel, Channel) {
    (
        stream.stretch.iter().map(|p| (p.t_ms, p.s)).collect(),
        stream.accel.iter().map(|a| (a.t_ms, a.ax)).collect(),
    )
}

#[test]
fn aligned_stream_does_not_depend_on_clock_origins() {
    let config = PreprocessConfig::default();
    let base = generate_synthetic(&walking(0, 0)).unwrap();
    let shifted = generate_synthetic(&walking(1_000_000, 1_000_370)).unwrap();
    let a = preprocess(&base.raw, Some(&base.labels), &config).unwrap();
    let b = preprocess(&shifted.raw, Some(&shifted.labels), &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cross_correlation_recovers_the_clock_offset() {
    let offset = 370;
    let config = PreprocessConfig::default();
    let rec = generate_synthetic(&walking(50_000, 50_000 + offset)).unwrap();
    let aligned = preprocess(&rec.raw, None, &config).unwrap();
    let (s, a) = channels(&aligned);
    let aligned_lag = best_lag_ms(&s, &a);

    // Same samples, but with the accelerometer read on the stretch clock as
    // if the two clocks agreed.
    let mut naive = rec.raw.clone();
    naive.accel_clock_origin_ms = naive.stretch_clock_origin_ms;
    let unaligned = preprocess(&naive, None, &config).unwrap();
    let (s, a) = channels(&unaligned);
    let naive_lag = best_lag_ms(&s, &a);

    let reference = preprocess(&generate_synthetic(&walking(0, 0)).unwrap().raw, None, &config).unwrap();
    let (s, a) = channels(&reference);
    let reference_lag = best_lag_ms(&s, &a);

    assert!(
        (aligned_lag - reference_lag).abs() <= 10,
        "{aligned_lag} vs {reference_lag}"
    );
    assert!(
        (naive_lag - reference_lag - offset).abs() <= 10,
        "naive lag {naive_lag}, reference {reference_lag}"
    );
}
