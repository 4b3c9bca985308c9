use ptring::counting::heralded_g2;
use ptring::photon_sim::{generate_pair_streams, simulate_franson, simulate_hbt, FransonConfig, HbtConfig, PairSourceConfig};
use ptring::units::PS;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;

fn quiet_source(rate: f64, tau: f64, duration: f64, seed: u64) -> PairSourceConfig {
    PairSourceConfig {
        pgr_coefficient: rate,
        pump_power: 1.0,
        tau_signal: tau,
        tau_idler: tau,
        eff_signal: 1.0,
        eff_idler: 1.0,
        dark_signal: 0.0,
        dark_idler: 0.0,
        jitter_signal: 0.0,
        jitter_idler: 0.0,
        duration,
        seed,
    }
}

fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

#[test]
fn pair_delay_difference_is_laplace() {
    // pairs are ~1 ms apart and decay in ~1 ns, so the k-th signal and the
    // k-th idler belong to the same pair
    let tau = 1e-9;
    let (signal, idler) = generate_pair_streams(&quiet_source(1020.0, tau, 1000.0, 8)).unwrap();
    let n = signal.len().min(idler.len());
    assert!(n >= 1_000_000, "{n} pairs");
    let mut diffs: Vec<f64> = signal.times_ps[..n]
        .iter()
        .zip(&idler.times_ps[..n])
        .map(|(&s, &i)| (s as i64 - i as i64) as f64 * PS)
        .collect();
    diffs.sort_unstable_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (k, &d) in diffs.iter().enumerate() {
        let f = laplace_cdf(d, tau);
        ks = ks.max((f - k as f64 / n as f64).abs()).max(((k + 1) as f64 / n as f64 - f).abs());
    }
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn streams_are_stationary() {
    for seed in 0..20 {
        let cfg = PairSourceConfig {
            dark_signal: 2e4,
            dark_idler: 5e4,
            eff_signal: 0.6,
            eff_idler: 0.4,
            ..quiet_source(1e5, 150e-12, 0.5, 1000 + seed)
        };
        let (s, i) = generate_pair_streams(&cfg).unwrap();
        let half = (cfg.duration / 2.0 / PS) as u64;
        for st in [&s, &i] {
            let first = st.times_ps.partition_point(|&t| t < half) as f64;
            let second = st.len() as f64 - first;
            let sigma = (first + second).sqrt();
            assert!((first - second).abs() < 5.0 * sigma, "seed {seed} {}: {first} vs {second}", st.channel);
        }
    }
}

#[test]
fn identical_config_gives_identical_streams() {
    let cfg = PairSourceConfig {
        dark_signal: 1e3,
        jitter_signal: 70e-12,
        jitter_idler: 50e-12,
        ..quiet_source(5e4, 100e-12, 0.2, 77)
    };
    assert_eq!(generate_pair_streams(&cfg).unwrap(), generate_pair_streams(&cfg).unwrap());
    let other = PairSourceConfig { seed: 78, ..cfg };
    assert_ne!(generate_pair_streams(&cfg).unwrap().0, generate_pair_streams(&other).unwrap().0);
}

#[test]
fn franson_singles_do_not_follow_the_phase() {
    let runs: Vec<_> = (0..20)
        .map(|k| {
            simulate_franson(&FransonConfig {
                phase: k as f64 * 2.0 * PI / 20.0,
                visibility_true: 0.871,
                base_rate: 40.0,
                singles_signal: 40.1e3,
                singles_idler: 40.0e3,
                integration_time: 20.0,
                seed: 40 + k,
            })
            .unwrap()
        })
        .collect();
    let critical = ChiSquared::new(19.0).unwrap().inverse_cdf(0.99);
    for singles in [
        runs.iter().map(|r| r.signal_singles as f64).collect::<Vec<_>>(),
        runs.iter().map(|r| r.idler_singles as f64).collect(),
    ] {
        let mean = singles.iter().sum::<f64>() / singles.len() as f64;
        let chi2: f64 = singles.iter().map(|s| (s - mean).powi(2) / mean).sum();
        assert!(chi2 < critical, "χ² {chi2} vs {critical}");
    }
    // the coincidences do follow it
    assert!(runs[0].coincidences > 3 * runs[10].coincidences);
}

#[test]
fn more_pairs_per_window_raise_g2() {
    let source = PairSourceConfig {
        eff_signal: 0.5,
        eff_idler: 0.5,
        jitter_signal: 50e-12,
        jitter_idler: 50e-12,
        ..quiet_source(0.0, 100e-12, 1.0, 0)
    };
    let g2 = |mu: f64| {
        let cfg = HbtConfig {
            mean_pairs_per_window: mu,
            splitter_ratio: 0.5,
            n_windows: 1_000_000,
            window_period: 10e-9,
            seed: 6,
        };
        let (h, a1, a2) = simulate_hbt(&source, &cfg).unwrap();
        heralded_g2(&h, &a1, &a2, 1e-9, &[0.0]).unwrap().g2_zero
    };
    let (low, high) = (g2(0.01), g2(0.1));
    assert!(high > low, "{low} vs {high}");
}

#[test]
fn fair_splitter_balances_the_arms() {
    let source = quiet_source(0.0, 100e-12, 1.0, 0);
    let cfg = HbtConfig {
        mean_pairs_per_window: 0.2,
        splitter_ratio: 0.5,
        n_windows: 500_000,
        window_period: 10e-9,
        seed: 12,
    };
    let (_, a1, a2) = simulate_hbt(&source, &cfg).unwrap();
    let n = (a1.len() + a2.len()) as f64;
    let diff = a1.len() as f64 - a2.len() as f64;
    // binomial σ of n1 - n2 is √n at p = 1/2
    assert!(diff.abs() < 5.0 * n.sqrt(), "{} vs {}", a1.len(), a2.len());
}
