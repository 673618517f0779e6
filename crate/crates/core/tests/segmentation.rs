use har_core::harness::synth::EventKind;
use har_core::harness::{generate_synthetic, random_script, SynthConfig, UserProfile};
use har_core::ingest::{preprocess, PreprocessConfig};
use har_core::segment::{segment_stream, BoundaryCause, SegmenterConfig};
use har_core::ActivityLabel;

#[test]
fn walk_then_sit() {
    let mut config = SynthConfig {
        seed: 3,
        activity_script: vec![(ActivityLabel::Walk, 20.0), (ActivityLabel::Sit, 15.0)],
        ..SynthConfig::default()
    };
    config.profile.gait_hz = 1.0;
    let rec = generate_synthetic(&config).unwrap();
    let stream = preprocess(&rec.raw, Some(&rec.labels), &PreprocessConfig::default()).unwrap();
    let segments = segment_stream(&stream, SegmenterConfig::default()).unwrap();

    let walking: Vec<_> = segments
        .iter()
        .filter(|s| s.start_ms >= 1000 && s.end_ms <= 20_000)
        .collect();
    assert!(walking.len() >= 17, "{} walking segments", walking.len());
    for s in &walking {
        assert_eq!(s.boundary_cause, BoundaryCause::TrendRise, "{s:?}");
        assert!(
            (s.duration_ms() - 1000).abs() <= 20,
            "step segment lasts {} ms",
            s.duration_ms()
        );
    }

    let sitting: Vec<_> = segments
        .iter()
        .filter(|s| s.start_ms >= 21_000 && s.boundary_cause != BoundaryCause::StreamEnd)
        .collect();
    assert!(sitting.len() >= 3);
    for s in &sitting {
        assert_eq!(s.boundary_cause, BoundaryCause::MaxDuration);
        assert_eq!(s.duration_ms(), 3000);
    }
}

#[test]
fn trend_rise_boundaries_land_near_ground_truth_events() {
    let mut total = 0usize;
    let mut near = 0usize;
    for user in 0..5u64 {
        let profile = UserProfile {
            gait_hz: 0.8 + 0.1 * user as f64,
            ..UserProfile::default()
        };
        let config = SynthConfig {
            seed: 300 + user,
            activity_script: random_script(300 + user, 240.0),
            profile,
            ..SynthConfig::default()
        };
        let rec = generate_synthetic(&config).unwrap();
        let stream = preprocess(&rec.raw, Some(&rec.labels), &PreprocessConfig::default()).unwrap();
        let segments = segment_stream(&stream, SegmenterConfig::default()).unwrap();
        let events: Vec<i64> = rec
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::StepOnset | EventKind::ActivityStart(_)))
            .map(|e| e.t_ms)
            .collect();
        for s in segments.iter().filter(|s| s.boundary_cause == BoundaryCause::TrendRise) {
            total += 1;
            if events.iter().any(|&e| (e - s.end_ms).abs() <= 250) {
                near += 1;
            }
        }
    }
    let rate = near as f64 / total as f64;
    assert!(total > 200, "only {total} TrendRise boundaries");
    assert!(rate >= 0.95, "{near}/{total} = {rate:.3} within 250 ms");
}
