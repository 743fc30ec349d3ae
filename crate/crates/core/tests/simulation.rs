use chargeplan::{
    fit_sqrt_law, simulate_mmqv, simulate_search_times, simulate_swap_station, swap_metrics_vs_des,
    Metric, PluginInput, RegionSpec, SimConfig, SwapDiscipline, SwapInput,
};

fn cfg(seed: u64, arrivals: u64) -> SimConfig {
    SimConfig {
        horizon_arrivals: arrivals,
        warmup_fraction: 0.1,
        seed,
        batch_count: 20,
    }
}

#[test]
fn same_seed_same_result() {
    let i = PluginInput::new(4.3, 1.0, 4.0, 8).unwrap();
    let a = simulate_mmqv(&i, &cfg(9, 100_000)).unwrap();
    let b = simulate_mmqv(&i, &cfg(9, 100_000)).unwrap();
    let c = simulate_mmqv(&i, &cfg(10, 100_000)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.wait.mean, c.wait.mean);
    let s = SwapInput::new(3.8, 2.0 / 60.0, 1.0, 6, 15).unwrap();
    for d in [SwapDiscipline::Continuous, SwapDiscipline::Slotted] {
        assert_eq!(
            simulate_swap_station(&s, &cfg(3, 100_000), d).unwrap(),
            simulate_swap_station(&s, &cfg(3, 100_000), d).unwrap()
        );
    }
}

#[test]
fn single_server_wait_matches_closed_form() {
    // M/M/1 with a room large enough to be effectively infinite:
    // W_q = ρ / (μ − λ)
    let (lam, mu) = (0.8, 1.0);
    let i = PluginInput::new(lam, 1.0 / mu, 1.0, 200).unwrap();
    let r = simulate_mmqv(&i, &cfg(5, 400_000)).unwrap();
    let want = (lam / mu) / (mu - lam);
    assert!(
        r.wait.z_score(want).abs() < 4.0,
        "wait {} ± {}",
        r.wait.mean,
        r.wait.stderr
    );
    assert_eq!(r.blocking.mean, 0.0);
}

#[test]
fn loss_system_blocking_matches_erlang() {
    // two servers, no waiting room: B = (ρ²/2) / (1 + ρ + ρ²/2)
    let rho: f64 = 1.5;
    let i = PluginInput::new(rho, 1.0, 2.0, 2).unwrap();
    let r = simulate_mmqv(&i, &cfg(6, 300_000)).unwrap();
    let want = rho * rho / 2.0 / (1.0 + rho + rho * rho / 2.0);
    assert!(r.blocking.z_score(want).abs() < 4.0);
    assert_eq!(r.wait.mean, 0.0);
}

#[test]
fn estimates_are_well_formed() {
    let i = PluginInput::new(9.0, 1.0, 8.0, 12).unwrap();
    let r = simulate_mmqv(&i, &cfg(2, 100_000)).unwrap();
    for e in [r.blocking, r.wait, r.mean_in_system] {
        assert!(e.stderr > 0.0 && e.batches == 20);
        let (lo, hi) = e.interval(0.95);
        assert!(lo < e.mean && e.mean < hi);
    }
    assert!((0.0..=1.0).contains(&r.blocking.mean));
    assert!(r.events_processed >= 100_000);
}

#[test]
fn slotted_swap_station_matches_embedded_chain() {
    let s = SwapInput::new(4.2, 2.0 / 60.0, 1.2, 6, 10).unwrap();
    let cmp = swap_metrics_vs_des(&s, &cfg(4, 300_000), SwapDiscipline::Slotted).unwrap();
    for row in &cmp.rows {
        assert!(row.within(4.0), "{}: z = {}", row.metric, row.z_score);
    }
}

#[test]
fn continuous_swap_station_runs_and_conserves_batteries() {
    // the battery-count invariant is asserted on every event in debug builds
    let s = SwapInput::new(5.0, 2.0 / 60.0, 1.5, 6, 15).unwrap();
    let r = simulate_swap_station(&s, &cfg(8, 200_000), SwapDiscipline::Continuous).unwrap();
    assert!(r.wait.mean > 0.0 && r.blocking.mean >= 0.0);
}

#[test]
fn rejects_short_horizons() {
    let i = PluginInput::new(1.0, 1.0, 1.0, 2).unwrap();
    assert!(simulate_mmqv(&i, &cfg(1, 10_000)).is_err());
    let mut c = cfg(1, 100_000);
    c.batch_count = 3;
    assert!(simulate_mmqv(&i, &c).is_err());
}

fn region(counts: Vec<u32>, metric: Metric) -> RegionSpec {
    RegionSpec {
        station_counts: counts,
        samples_per_count: 40_000,
        layouts_per_count: 40_000,
        metric,
        ..RegionSpec::default()
    }
}

#[test]
fn one_station_mean_distance() {
    // mean distance between two uniform points in the unit square
    let want = (2.0 + 2f64.sqrt() + 5.0 * (1.0 + 2f64.sqrt()).ln()) / 15.0;
    let t = simulate_search_times(&region(vec![1], Metric::Euclidean)).unwrap();
    assert!((t[0].1 - want).abs() < 0.01, "{} vs {want}", t[0].1);
    // Manhattan: E|Δx| + E|Δy| = 2/3
    let t = simulate_search_times(&region(vec![1], Metric::Manhattan)).unwrap();
    assert!((t[0].1 - 2.0 / 3.0).abs() < 0.01);
}

#[test]
fn square_root_law_fits_well() {
    let pts: Vec<(f64, f64)> = simulate_search_times(&RegionSpec::default())
        .unwrap()
        .into_iter()
        .map(|(k, t)| (k as f64, t))
        .collect();
    let fit = fit_sqrt_law(&pts).unwrap();
    assert!(fit.r_squared >= 0.99, "R² = {}", fit.r_squared);
    // large-K limit of the mean nearest distance is 1/(2√K)
    assert!((fit.scale - 0.5).abs() < 0.05, "B = {}", fit.scale);
}

#[test]
fn fitted_scale_tracks_region_size_and_speed() {
    let base = RegionSpec::default();
    let fit = |r: &RegionSpec| {
        let pts: Vec<(f64, f64)> = simulate_search_times(r)
            .unwrap()
            .into_iter()
            .map(|(k, t)| (k as f64, t))
            .collect();
        fit_sqrt_law(&pts).unwrap().scale
    };
    let b0 = fit(&base);
    let wide = RegionSpec {
        side_length: 3.0,
        ..base.clone()
    };
    assert!((fit(&wide) / b0 - 3.0).abs() < 1e-9);
    let slow = RegionSpec {
        travel_speed: 0.5,
        ..base.clone()
    };
    assert!((fit(&slow) / b0 - 2.0).abs() < 1e-9);
    let other_seed = RegionSpec { seed: 99, ..base };
    assert!((fit(&other_seed) / b0 - 1.0).abs() < 0.03);
}

#[test]
fn region_validation() {
    let mut r = RegionSpec::default();
    r.samples_per_count = 500;
    assert!(simulate_search_times(&r).is_err());
    let mut r = RegionSpec::default();
    r.station_counts = vec![0, 4];
    assert!(simulate_search_times(&r).is_err());
}
