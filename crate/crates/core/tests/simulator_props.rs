use ecm_core::{
    run_simulation, run_with_predictor, summarize, synth_markov_trace, FrameOutcome, Predictor, PredictorSpec,
    SimConfig, SimulationResult, SyntheticTraceSpec, ThroughputSample, ThroughputTrace,
};
use proptest::prelude::*;

fn constant(bw: f64, end: f64) -> ThroughputTrace {
    ThroughputTrace::new(vec![ThroughputSample::new(0.0, bw)], end).unwrap()
}

/// Knows the link rate in advance.
struct Oracle(f64);

impl Predictor for Oracle {
    fn observe(&mut self, _: f64) {}
    fn predict(&self) -> f64 {
        self.0
    }
}

/// Replays a fixed forecast script regardless of what it observes.
struct Scripted {
    script: Vec<f64>,
    pos: std::cell::Cell<usize>,
}

impl Predictor for Scripted {
    fn observe(&mut self, _: f64) {}
    fn predict(&self) -> f64 {
        let i = self.pos.get();
        self.pos.set(i + 1);
        self.script[i % self.script.len()]
    }
}

fn transfers(r: &SimulationResult) -> Vec<(usize, f64, Option<f64>, f64)> {
    r.frames
        .iter()
        .filter_map(|f| match f.outcome {
            FrameOutcome::Sent { start, completed, size, .. } => Some((f.index, start, Some(completed), size)),
            FrameOutcome::InFlightAtEnd { start, size, .. } => Some((f.index, start, None, size)),
            FrameOutcome::Lost => None,
        })
        .collect()
}

fn check_invariants(trace: &ThroughputTrace, r: &SimulationResult) {
    assert_eq!(r.generated_count, r.sent_count + r.lost_count + r.in_flight_count);
    assert!(r.in_flight_count <= 1);
    assert_eq!(r.frames.len(), r.generated_count);
    if r.generated_count > 0 {
        assert_eq!(r.loss_rate, r.lost_count as f64 / r.generated_count as f64);
    }
    let sent_sum: f64 = r
        .frames
        .iter()
        .filter_map(|f| match f.outcome {
            FrameOutcome::Sent { size, .. } => Some(size),
            _ => None,
        })
        .sum();
    assert!((sent_sum - r.sum_frame_sizes).abs() <= 1e-9 * sent_sum.max(1.0));
    assert_eq!(r.predictions.len(), r.sent_count);

    let taken = transfers(r);
    for w in taken.windows(2) {
        let (i, _, done, _) = w[0];
        let (j, next_start, _, _) = w[1];
        assert!(i < j, "transfers ordered by frame index");
        assert!(done.unwrap() <= next_start + 1e-12, "stop-and-wait overlap");
    }
    let mut prev_taken: Option<usize> = None;
    for &(i, start, done, size) in &taken {
        let f = &r.frames[i];
        assert!(start >= f.generated_at);
        if let Some(done) = done {
            assert!(done > start);
            if let FrameOutcome::Sent { measured_throughput, .. } = f.outcome {
                assert!((measured_throughput - size / (done - start)).abs() <= 1e-9 * measured_throughput);
                // Whole transfer inside one constant segment: measured equals link rate.
                let bw = trace.bandwidth_at(start).unwrap();
                let mid = trace.bandwidth_at((start + done) / 2.0).unwrap_or(bw);
                let seg_end = trace
                    .samples()
                    .iter()
                    .find(|s| s.time > start)
                    .map_or(trace.end_time(), |s| s.time);
                if done <= seg_end && mid == bw {
                    assert!((measured_throughput - bw).abs() <= 1e-9 * bw);
                }
            }
        }
        // Newest-frame rule: nothing newer had been generated when this one was taken,
        // and everything skipped since the previous transfer was lost.
        if let Some(next) = r.frames.get(i + 1) {
            assert!(next.generated_at > start - 1e-9);
        }
        let from = prev_taken.map_or(0, |p| p + 1);
        for skipped in &r.frames[from..i] {
            assert!(matches!(skipped.outcome, FrameOutcome::Lost));
        }
        prev_taken = Some(i);
    }
}

#[test]
fn steady_state_constant_bandwidth() {
    let trace = constant(1000.0, 10.0);
    let cfg = SimConfig::new(10.0, 0.0, 1000.0, PredictorSpec::Am { window: 1 });
    let r = run_simulation(&trace, &cfg).unwrap();
    check_invariants(&trace, &r);
    assert_eq!(r.generated_count, 100);
    assert_eq!(r.loss_rate, 0.0);
    for f in &r.frames {
        if let FrameOutcome::Sent { size, start, completed, .. } = f.outcome {
            assert!((size - 100.0).abs() < 1e-9);
            assert!((completed - start - 0.1).abs() < 1e-9);
        }
    }
    let s = summarize(&r);
    assert_eq!(s.whole.loss_rate, 0.0);
    assert!((s.whole.sum_frame_sizes - 100.0 * r.sent_count as f64).abs() < 1e-6);
}

#[test]
fn oracle_predictor_is_lossless() {
    for (bw, fps, smin) in [(1000.0, 10.0, 0.0), (750.0, 25.0, 30.0), (123.0, 7.0, 17.5)] {
        let trace = constant(bw, 40.0);
        let cfg = SimConfig::new(fps, smin, bw, PredictorSpec::Am { window: 1 });
        let r = run_with_predictor(&trace, &cfg, &mut Oracle(bw)).unwrap();
        check_invariants(&trace, &r);
        assert_eq!(r.lost_count, 0, "bw {bw} fps {fps}");
    }
}

#[test]
fn identical_configs_give_identical_results() {
    let spec = SyntheticTraceSpec::two_state(1000.0, 200.0, 0.9, 0.1, 60.0, 0.1, 9);
    let trace = synth_markov_trace(&spec).unwrap();
    let cfg = SimConfig::new(10.0, 5.0, 500.0, PredictorSpec::Ecm { bins: 16, cap: Some(200) }).with_warmup(0.3);
    assert_eq!(run_simulation(&trace, &cfg).unwrap(), run_simulation(&trace, &cfg).unwrap());
}

#[test]
fn warmup_window_is_reported_separately() {
    let spec = SyntheticTraceSpec::two_state(1000.0, 200.0, 0.9, 0.1, 60.0, 0.1, 9);
    let trace = synth_markov_trace(&spec).unwrap();
    let cfg = SimConfig::new(10.0, 0.0, 500.0, PredictorSpec::Ecm { bins: 16, cap: None }).with_warmup(0.5);
    let r = run_simulation(&trace, &cfg).unwrap();
    let s = summarize(&r);
    let eval = s.evaluation.unwrap();
    assert_eq!(eval.generated, 300);
    assert!(eval.generated < s.whole.generated);
    assert!(eval.nrmse.is_some());
}

fn arb_trace() -> impl Strategy<Value = ThroughputTrace> {
    prop::collection::vec((0.05f64..2.0, 50.0f64..2000.0), 1..30).prop_map(|segs| {
        let mut t = 0.0;
        let mut samples = Vec::new();
        for (gap, bw) in &segs {
            samples.push(ThroughputSample::new(t, *bw));
            t += gap;
        }
        ThroughputTrace::new(samples, t.max(0.5)).unwrap()
    })
}

fn arb_predictor() -> impl Strategy<Value = PredictorSpec> {
    prop_oneof![
        (1usize..32).prop_map(|window| PredictorSpec::Am { window }),
        (2usize..40, prop::option::of(1u64..500)).prop_map(|(bins, cap)| PredictorSpec::Ecm { bins, cap }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_invariants(trace in arb_trace(), fps in 1.0f64..40.0, smin in 0.0f64..80.0, spec in arb_predictor(), warmup in 0.0f64..0.9) {
        let cfg = SimConfig::new(fps, smin, 500.0, spec).with_warmup(warmup);
        match run_simulation(&trace, &cfg) {
            Ok(r) => check_invariants(&trace, &r),
            // ECM cannot fit bins on a single-valued trace.
            Err(ecm_core::Error::InsufficientData(_)) => prop_assert!(trace.min_bandwidth() == trace.max_bandwidth()),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn raising_the_floor_never_shortens_a_transfer(script in prop::collection::vec(10.0f64..3000.0, 1..20), fps in 2.0f64..30.0, low in 0.0f64..100.0, extra in 0.0f64..100.0) {
        let trace = constant(800.0, 20.0);
        let run = |smin: f64| {
            let cfg = SimConfig::new(fps, smin, 500.0, PredictorSpec::Am { window: 1 });
            let mut p = Scripted { script: script.clone(), pos: Default::default() };
            run_with_predictor(&trace, &cfg, &mut p).unwrap()
        };
        let a = transfers(&run(low));
        let b = transfers(&run(low + extra));
        for ((_, sa, da, _), (_, sb, db, _)) in a.iter().zip(&b) {
            if let (Some(da), Some(db)) = (da, db) {
                prop_assert!(db - sb >= da - sa - 1e-12);
            }
        }
    }
}
