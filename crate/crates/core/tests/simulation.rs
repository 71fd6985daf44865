use ldpc_floor::code::random_regular;
use ldpc_floor::combin::binomial;
use ldpc_floor::enumeration::find_j;
use ldpc_floor::simulation::{estimate_m, simulate, SimConfig};
use ldpc_floor::DecoderConfig;

#[test]
fn failure_rate_at_weight_j_matches_enumeration() {
    let g = random_regular(20, 3, 5, false, 0).unwrap();
    let cfg = DecoderConfig::gallager_a(&g);
    let found = find_j(&g, &cfg, 4, 1).unwrap();
    let j = found.j_min.unwrap();
    let sim = SimConfig {
        min_frame_errors: u64::MAX,
        max_frames: 20_000,
        ..SimConfig::new(0.1, 8)
    };
    let r = simulate(&g, &cfg, &sim).unwrap();
    for w in 0..j {
        let bin = r.weight_histogram.get(&w).copied().unwrap_or_default();
        assert_eq!(bin.failures, 0, "weight {w}");
    }
    let bin = r.weight_histogram[&j];
    let p = found.e_j_count as f64 / binomial(g.n(), j) as f64;
    let sigma = (p * (1.0 - p) / bin.frames as f64).sqrt();
    let observed = bin.failures as f64 / bin.frames as f64;
    assert!((observed - p).abs() < 4.0 * sigma, "{observed} vs {p}");
}

#[test]
fn high_crossover_fails_almost_always() {
    let g = random_regular(200, 3, 6, true, 3).unwrap();
    let r = simulate(&g, &DecoderConfig::gallager_a(&g), &SimConfig::new(0.2, 1)).unwrap();
    assert!(r.fer >= 0.9 && r.fer <= 1.0, "{}", r.fer);
    assert!(r.fer_ci_low <= r.fer && r.fer <= r.fer_ci_high);
}

#[test]
fn stops_at_the_error_target() {
    let g = random_regular(200, 3, 6, true, 3).unwrap();
    let r = simulate(&g, &DecoderConfig::gallager_a(&g), &SimConfig::new(0.03, 2)).unwrap();
    assert!(r.frame_errors >= 100);
    assert!(r.note.is_none());
    assert_eq!(
        r.weight_histogram.values().map(|b| b.frames).sum::<u64>(),
        r.frames
    );
    assert_eq!(
        r.weight_histogram.values().map(|b| b.failures).sum::<u64>(),
        r.frame_errors
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let g = random_regular(200, 3, 6, true, 3).unwrap();
    let cfg = DecoderConfig::gallager_a(&g);
    let one = simulate(&g, &cfg, &SimConfig::new(0.03, 4)).unwrap();
    let three = simulate(
        &g,
        &cfg,
        &SimConfig {
            workers: 3,
            ..SimConfig::new(0.03, 4)
        },
    )
    .unwrap();
    assert_eq!(one, three);
    assert_eq!(
        estimate_m(&g, &cfg, 8, 2000, 4, 1).unwrap(),
        estimate_m(&g, &cfg, 8, 2000, 4, 3).unwrap()
    );
}

#[test]
fn weight_zero_leaves_nothing() {
    let g = random_regular(200, 3, 6, true, 3).unwrap();
    let m = estimate_m(&g, &DecoderConfig::gallager_a(&g), 0, 100, 0, 1).unwrap();
    assert_eq!((m.m_avg, m.failures, m.m_failures_only), (0.0, 0, None));
}
