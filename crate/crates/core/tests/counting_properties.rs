use proptest::prelude::*;
use ptring::counting::{car, coincidence_histogram, visibility_fit, CoincidenceHistogram};
use ptring::photon_sim::{generate_pair_streams, simulate_franson, FransonConfig, PairSourceConfig};
use ptring::units::PS;
use ptring::TimestampStream;
use std::f64::consts::PI;

fn stream(name: &str, mut times: Vec<u64>) -> TimestampStream {
    times.sort_unstable();
    TimestampStream::new(name, times).unwrap()
}

/// O(n²) pairing with the same bin rule: ties at half a bin go to the even index.
fn brute_force(start: &[u64], stop: &[u64], bin: i64, span: i64) -> Vec<u64> {
    let k_max = (span + bin) / (2 * bin);
    let mut counts = vec![0u64; (2 * k_max + 1) as usize];
    for &a in start {
        for &b in stop {
            let d = b as i64 - a as i64;
            if 2 * d.abs() > span {
                continue;
            }
            let k = (d as f64 / bin as f64).round_ties_even() as i64;
            counts[(k + k_max) as usize] += 1;
        }
    }
    counts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn histogram_matches_pairwise_count(
        start in proptest::collection::vec(0u64..20_000, 0..300),
        stop in proptest::collection::vec(0u64..20_000, 0..300),
        bin in 1i64..60,
        span_bins in 1i64..40,
        extra in 0i64..60,
    ) {
        let span = bin * span_bins + extra;
        let (s, t) = (stream("a", start), stream("b", stop));
        let h = coincidence_histogram(&s, &t, bin as f64 * PS, span as f64 * PS).unwrap();
        prop_assert_eq!(h.counts, brute_force(&s.times_ps, &t.times_ps, bin, span));
    }

    #[test]
    fn swapping_channels_mirrors_the_histogram(
        start in proptest::collection::vec(0u64..5_000, 0..200),
        stop in proptest::collection::vec(0u64..5_000, 0..200),
        bin in 1i64..50,
        span in 50i64..2_000,
    ) {
        let (s, t) = (stream("a", start), stream("b", stop));
        let ab = coincidence_histogram(&s, &t, bin as f64 * PS, span as f64 * PS).unwrap();
        let ba = coincidence_histogram(&t, &s, bin as f64 * PS, span as f64 * PS).unwrap();
        let mut mirrored = ba.counts.clone();
        mirrored.reverse();
        prop_assert_eq!(ab.counts, mirrored);
        prop_assert_eq!(ab.offsets.len(), ba.offsets.len());
    }

    #[test]
    fn uniform_histogram_has_unit_car(level in 1u64..10_000, peak_bins in 1usize..10) {
        let n = 201;
        let bin = 10.0 * PS;
        let h = CoincidenceHistogram {
            bin_width: bin,
            offsets: (0..n).map(|i| (i as f64 - 100.0) * bin).collect(),
            counts: vec![level; n],
            start_channel: "a".into(),
            stop_channel: "b".into(),
            total_starts: 0,
        };
        let peak = peak_bins as f64 * bin;
        let r = car(&h, peak, 4.0 * peak + bin, false).unwrap();
        prop_assert!((r.car - 1.0).abs() < 1e-12, "{}", r.car);
    }

    #[test]
    fn visibility_is_deterministic_and_phase_offset_free(
        seed in any::<u64>(),
        shift in -PI..PI,
        v_true in 0.1..0.95f64,
    ) {
        let phases: Vec<f64> = (0..13).map(|i| i as f64 * 2.0 * PI / 13.0).collect();
        let counts: Vec<u64> = phases.iter().map(|p| (400.0 * (1.0 + v_true * p.cos())).round() as u64).collect();
        let a = visibility_fit(&phases, &counts, 50, seed).unwrap();
        let b = visibility_fit(&phases, &counts, 50, seed).unwrap();
        prop_assert_eq!(a.visibility.to_bits(), b.visibility.to_bits());
        prop_assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
        let shifted: Vec<f64> = phases.iter().map(|p| p + shift).collect();
        let c = visibility_fit(&shifted, &counts, 50, seed).unwrap();
        prop_assert!((c.visibility - a.visibility).abs() < 1e-12);
    }
}

#[test]
fn independent_streams_fill_bins_at_the_accidental_rate() {
    let (r1, r2, duration) = (2e5, 3e5, 2.0);
    let cfg = PairSourceConfig {
        pgr_coefficient: 0.0,
        pump_power: 1.0,
        tau_signal: 0.0,
        tau_idler: 0.0,
        eff_signal: 1.0,
        eff_idler: 1.0,
        dark_signal: r1,
        dark_idler: r2,
        jitter_signal: 0.0,
        jitter_idler: 0.0,
        duration,
        seed: 11,
    };
    let (a, b) = generate_pair_streams(&cfg).unwrap();
    let bin = 100.0 * PS;
    let h = coincidence_histogram(&a, &b, bin, 20e-9).unwrap();
    // use the realised singles so only the pairing statistics are tested
    let expected = a.len() as f64 * b.len() as f64 / duration * bin;
    let sigma = expected.sqrt();
    for (o, &c) in h.offsets.iter().zip(&h.counts) {
        assert!((c as f64 - expected).abs() <= 5.0 * sigma, "bin {o:e}: {c} vs {expected}");
    }
    let mean = h.total() as f64 / h.counts.len() as f64;
    assert!((mean - expected).abs() <= 5.0 * sigma / (h.counts.len() as f64).sqrt());
}

#[test]
fn flat_noisy_fringe_has_small_visibility() {
    let phases: Vec<f64> = (0..21).map(|i| i as f64 * 2.0 * PI / 20.0).collect();
    let counts: Vec<u64> = phases
        .iter()
        .enumerate()
        .map(|(i, &phase)| {
            simulate_franson(&FransonConfig {
                phase,
                visibility_true: 0.0,
                base_rate: 40.0,
                singles_signal: 0.0,
                singles_idler: 0.0,
                integration_time: 20.0,
                seed: 500 + i as u64,
            })
            .unwrap()
            .coincidences
        })
        .collect();
    let r = visibility_fit(&phases, &counts, 1000, 3).unwrap();
    // fringe amplitude consistent with Poisson noise on ~400 counts per point
    assert!(r.visibility < 4.0 * r.sigma.max(1e-3), "{r:?}");
    assert!(r.sigma > 0.0 && r.sigma < 0.05, "{r:?}");
}
