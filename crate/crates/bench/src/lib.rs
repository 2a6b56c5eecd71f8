//! Fixtures shared by the benchmarks.

use apnea_core::{amplitude_envelope, generate_scenario, FilterConfig, ScalarSeries, ScenarioSpec, Segment, SegmentKind};

/// Envelope of `minutes` of breathing at 10 Hz with a 20 s apnea every
/// 2 minutes and light noise.
pub fn recording_envelope(minutes: usize) -> ScalarSeries {
    let mut segments = Vec::with_capacity(2 * minutes);
    for _ in 0..minutes / 2 {
        segments.push(Segment::new(SegmentKind::Normal, 100.0, 1.0, 4.0));
        segments.push(Segment::new(SegmentKind::Apnea, 20.0, 0.1, 4.0));
    }
    let spec = ScenarioSpec {
        segments,
        noise_std: 0.02,
        seed: 1,
        ..ScenarioSpec::reference()
    };
    let (d, _) = generate_scenario(&spec).expect("valid scenario");
    amplitude_envelope(&d, &FilterConfig::default()).expect("valid filter")
}

/// Envelope of the 100 s reference scenario.
pub fn reference_envelope() -> ScalarSeries {
    let (d, _) = generate_scenario(&ScenarioSpec::reference()).expect("valid scenario");
    amplitude_envelope(&d, &FilterConfig::default()).expect("valid filter")
}
