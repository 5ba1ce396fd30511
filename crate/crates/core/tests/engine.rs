//! Stochastic checks of the event-driven engines against exact laws.

use dsf::analytics::mean_halting_finite;
use dsf::engine::*;
use dsf::graphs::{build_graph, random_regular, GraphSpec, RegularGraph};
use dsf::stats::{ks_two_sample, summarize};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(spec: GraphSpec) -> RegularGraph {
    build_graph(&spec).unwrap()
}

fn ab_localized(g: &RegularGraph, seed: u64) -> HaltingSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = init_localized(g, 0).unwrap();
    run_to_halt(g, &mut state, &mut rng, None).unwrap()
}

#[test]
fn complete_graph_mean_matches_exact_sum() {
    let g = graph(GraphSpec::Complete { vertices: 21 });
    let samples: Vec<f64> = (0..4000).map(|i| ab_localized(&g, i).halting_time).collect();
    let s = summarize(&samples, 2).unwrap();
    let exact = mean_halting_finite(20.0, 20).unwrap();
    assert!((s.mean - exact).abs() < 4.0 * s.se_mean, "{} +- {} vs {exact}", s.mean, s.se_mean);
}

#[test]
fn last_step_is_exponential_with_mean_n() {
    let g = graph(GraphSpec::Complete { vertices: 31 });
    let last: Vec<f64> = (0..4000).map(|i| ab_localized(&g, 10_000 + i).last_step).collect();
    let s = summarize(&last, 2).unwrap();
    assert!((s.mean - 30.0).abs() < 4.0 * s.se_mean, "{}", s.mean);
    assert!((s.normalized_moments[1] - 2.0).abs() < 4.0 * s.se_normalized_moments[1]);
}

#[test]
fn simulation_matches_fast_sampler() {
    let g = graph(GraphSpec::Complete { vertices: 41 });
    let slow: Vec<f64> = (0..3000).map(|i| ab_localized(&g, i).halting_time).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let fast: Vec<f64> = (0..3000)
        .map(|_| sample_complete_fast(40.0, 40, &mut rng).halting_time)
        .collect();
    let ks = ks_two_sample(&slow, &fast).unwrap();
    assert!(!ks.rejects_at_1(), "{ks:?}");
}

#[test]
fn pile_and_annihilation_agree_on_a_ring() {
    let g = graph(GraphSpec::Ring { side: 16 });
    let mut ab = Vec::new();
    let mut piles = Vec::new();
    for i in 0..1500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let mut state = init_uncorrelated(&g, &mut rng);
        ab.push(run_to_halt(&g, &mut state, &mut rng, None).unwrap().halting_time);
        let mut rng = ChaCha8Rng::seed_from_u64(1_000_000 + i);
        let mut state = PileState::uncorrelated(&g, &mut rng);
        piles.push(run_to_halt_piles(&g, &mut state, &mut rng, None).unwrap().halting_time);
    }
    let ks = ks_two_sample(&ab, &piles).unwrap();
    assert!(!ks.rejects_at_1(), "{ks:?}");
}

#[test]
fn torus_and_random_regular_runs_halt() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in [
        graph(GraphSpec::Torus { d: 2, side: 6 }),
        graph(GraphSpec::Torus { d: 3, side: 3 }),
        random_regular(50, 3, 11).unwrap(),
    ] {
        let mut state = init_uncorrelated(&g, &mut rng);
        let m0 = state.m0();
        let sample = run_to_halt(&g, &mut state, &mut rng, None).unwrap();
        assert_eq!(state.m(), 0);
        assert!(state.occupancy().iter().all(|&k| k == 1));
        assert_eq!(sample.m0, m0);
        assert!(sample.last_step <= sample.halting_time);
    }
}

#[test]
fn horizon_stop_then_resume() {
    let g = graph(GraphSpec::Ring { side: 30 });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut state = init_uncorrelated(&g, &mut rng);
    let mut trace = observe_m_trace(&[0.0, 2.5, 5.0]).unwrap();
    let status = advance(&g, &mut state, &mut rng, 5.0, DEFAULT_MAX_EVENTS, Some(&mut trace)).unwrap();
    let RunStatus::Horizon { remaining } = status else {
        panic!("a ring of 30 does not fill by t = 5");
    };
    assert_eq!(state.clock(), 5.0);
    assert!(trace.is_complete());
    assert_eq!(trace.values()[2], remaining);
    let sample = run_to_halt(&g, &mut state, &mut rng, None).unwrap();
    assert!(sample.halting_time > 5.0);
    state.check_invariants().unwrap();
}

#[test]
fn trace_on_grid_is_nonincreasing_and_starts_at_m0() {
    let g = graph(GraphSpec::Torus { d: 2, side: 20 });
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut state = init_uncorrelated(&g, &mut rng);
    let m0 = state.m0();
    let grid: Vec<f64> = (0..50).map(|k| k as f64 * 0.5).collect();
    let mut trace = observe_m_trace(&grid).unwrap();
    let status = advance(&g, &mut state, &mut rng, 24.5, DEFAULT_MAX_EVENTS, Some(&mut trace)).unwrap();
    assert!(trace.is_complete());
    let values = trace.values();
    assert_eq!(values[0], m0);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
    if let RunStatus::Horizon { remaining } = status {
        assert_eq!(*values.last().unwrap(), remaining);
    }
}

#[test]
fn uncorrelated_m0_has_vacancy_fraction_one_over_e() {
    let g = graph(GraphSpec::Complete { vertices: 20_000 });
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let fractions: Vec<f64> = (0..50)
        .map(|_| init_uncorrelated(&g, &mut rng).m0() as f64 / 20_000.0)
        .collect();
    let s = summarize(&fractions, 1).unwrap();
    assert!((s.mean - (-1.0f64).exp()).abs() < 4.0 * s.se_mean + 1e-4);
}
