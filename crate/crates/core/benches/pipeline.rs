use cookstate_core::model::{
    load_prompt_catalog, GazeArea, PromptPair, SeriesMode, SessionManifest, StateChangeKind,
};
use cookstate_core::recognizer::{
    run_protocol, select_prompt_with, ProtocolConfig, ProtocolSession,
};
use cookstate_core::scoring::{
    score_session, BackendError, ScoreOptions, ScoreRequest, Similarities,
};
use cookstate_core::signal::{degree_series, DegreeSeries};
use cookstate_core::synthgen::{generate_session, SynthSpec};
use cookstate_core::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::collections::BTreeMap;
use std::hint::black_box;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn spec(id: &str, t_change: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        session_id: id.into(),
        state_change_kind: StateChangeKind::Vaporization,
        gaze_area: GazeArea::EntireVessel,
        heat_power: "same".into(),
        t_change,
        duration: 600.0,
        sampling_period: 0.25,
        pre_level: 0.1,
        post_level: 0.9,
        transition_width: 5.0,
        noise_sigma: 0.05,
        seed,
        mode: SeriesMode::Continuous,
        slope_quality: vec![0.3, 1.0, 0.0, 0.6],
        prompt_pair_ids: None,
        temperature: 100.0,
    }
}

fn session(id: &str, t_change: f64, seed: u64) -> ProtocolSession {
    let s = generate_session(&spec(id, t_change, seed)).unwrap();
    ProtocolSession {
        manifest: s.manifest,
        scores: s.scores,
    }
}

fn entire_pairs() -> Vec<PromptPair> {
    load_prompt_catalog(StateChangeKind::Vaporization)
        .into_iter()
        .filter(|p| p.gaze_area == GazeArea::EntireVessel)
        .collect()
}

fn protocol(c: &mut Criterion) {
    let pairs = entire_pairs();
    let cal: Vec<ProtocolSession> = (0..4)
        .map(|i| session(&format!("cal{i}"), 300.0, i))
        .collect();
    let mut group = c.benchmark_group("run_protocol");
    for n_test in [16usize, 128] {
        let test: Vec<ProtocolSession> = (0..n_test)
            .map(|i| session(&format!("t{i}"), 250.0 + i as f64, 1000 + i as u64))
            .collect();
        for execution in MODES {
            let config = ProtocolConfig {
                execution,
                ..ProtocolConfig::default()
            };
            group.bench_with_input(
                BenchmarkId::new(format!("{execution:?}"), n_test),
                &test,
                |b, test| {
                    b.iter(|| {
                        run_protocol(black_box(&cal), black_box(test), &pairs, &config).unwrap()
                    })
                },
            );
        }
    }
    group.finish();
}

fn prompt_selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("select_prompt");
    for n_candidates in [8usize, 64] {
        let mut s = spec("sel", 300.0, 7);
        s.slope_quality = (0..n_candidates)
            .map(|i| i as f64 / n_candidates as f64)
            .collect();
        s.prompt_pair_ids = Some((0..n_candidates).map(|i| format!("p{i:03}")).collect());
        let scores = generate_session(&s).unwrap().scores;
        let degrees: BTreeMap<String, DegreeSeries> = scores
            .iter()
            .map(|(id, series)| (id.clone(), degree_series(series, 100.0).unwrap()))
            .collect();
        for execution in MODES {
            group.bench_with_input(
                BenchmarkId::new(format!("{execution:?}"), n_candidates),
                &degrees,
                |b, d| b.iter(|| select_prompt_with(black_box(d), execution).unwrap()),
            );
        }
    }
    group.finish();
}

/// Stands in for model inference with a fixed amount of arithmetic per request.
fn synthetic_backend(request: &ScoreRequest) -> Result<Similarities, BackendError> {
    let mut h = 0u64;
    for (i, byte) in request
        .frame
        .bytes()
        .chain(request.positive.bytes())
        .enumerate()
    {
        h = h
            .wrapping_mul(0x100000001b3)
            .wrapping_add(byte as u64 ^ i as u64);
    }
    let mut x = (h % 1000) as f64 / 1000.0;
    for _ in 0..20_000 {
        x = (x * 3.7 * (1.0 - x)).clamp(1e-6, 1.0 - 1e-6);
    }
    Ok(Similarities {
        sim_pos: 0.2 + x * 0.1,
        sim_neg: 0.25,
    })
}

fn scoring(c: &mut Criterion) {
    let manifest = SessionManifest {
        session_id: "bench".into(),
        state_change_kind: StateChangeKind::Vaporization,
        heat_power: "same".into(),
        annotation_time: None,
        score_source: "synthetic".into(),
        gaze_area: GazeArea::EntireVessel,
    };
    let frames: Vec<String> = (0..200).map(|i| format!("frame_{i:05}.png")).collect();
    let pairs = load_prompt_catalog(StateChangeKind::Vaporization);
    let mut group = c.benchmark_group("score_session");
    group.sample_size(20);
    for execution in MODES {
        let mut options = ScoreOptions::new(0.5);
        options.execution = execution;
        group.bench_function(format!("{execution:?}"), |b| {
            b.iter(|| {
                score_session(
                    &manifest,
                    black_box(&frames),
                    &pairs,
                    &synthetic_backend,
                    &options,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, protocol, prompt_selection, scoring);
criterion_main!(benches);
