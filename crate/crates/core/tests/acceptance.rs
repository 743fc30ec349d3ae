//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of the outcome so the workspace test run stays green;
//! set `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::time::{Duration, Instant};

use chargeplan::market::pax_threshold;
use chargeplan::planner::SweepParameter;
use chargeplan::{
    build_transition_kernel, ctmc_oracle, fit_sqrt_law, fleet_from_gamma, gamma_domain,
    mmqv_continuous, mmqv_steady_state, optimize_plan, plugin_metrics_vs_des, simulate_mmqv,
    simulate_search_times, simulate_swap_station, social_welfare, solve_pax_times,
    swap_metrics_vs_des, sweep, Equilibrium, Error, GridSpec, Infeasibility, Outcome, Params, Plan,
    PlanGrid, PluginInput, RegionSpec, SearchRange, SearchRanges, SimConfig, Strategy,
    SwapDiscipline, SwapInput,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn queue_grid() -> Vec<PluginInput> {
    let mut out = Vec::new();
    for q in 1..=6u32 {
        for v in q..=q + 10 {
            for rho in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
                out.push(PluginInput::new(rho, 1.0, q as f64, v).unwrap());
            }
        }
    }
    out
}

fn queue_oracle() -> Verdict {
    let mut worst = 0.0f64;
    for i in queue_grid() {
        let a = mmqv_steady_state(&i).unwrap().state_probabilities.unwrap();
        let b = ctmc_oracle(&i).unwrap().state_probabilities.unwrap();
        worst = a
            .iter()
            .zip(&b)
            .fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    verdict(
        worst <= 1e-10,
        format!("max |dP| = {worst:.2e} over {} cases", queue_grid().len()),
    )
}

fn continuation() -> Verdict {
    let (mut wp, mut ww) = (0.0f64, 0.0f64);
    for i in queue_grid() {
        let e = mmqv_steady_state(&i).unwrap();
        let c = mmqv_continuous(&i).unwrap();
        wp = wp.max(rel(e.blocking_probability, c.blocking_probability));
        if e.mean_wait > 0.0 {
            ww = ww.max(rel(e.mean_wait, c.mean_wait));
        }
    }
    verdict(
        wp <= 1e-9 && ww <= 1e-9,
        format!("max rel error P_V {wp:.2e}, t_w {ww:.2e}"),
    )
}

fn swap_configs() -> Vec<SwapInput> {
    let ts = 2.0 / 60.0;
    let tc = 22.5 / 22.22;
    vec![
        SwapInput::new(216.0f64.recip() * 820.0, ts, tc, 6, 15).unwrap(),
        SwapInput::new(1.2, ts, tc, 6, 15).unwrap(),
        SwapInput::new(7.5, ts, tc, 6, 15).unwrap(),
        SwapInput::new(3.8, 3.0 / 60.0, tc, 4, 15).unwrap(),
        SwapInput::new(3.8, ts, 0.6, 8, 10).unwrap(),
        SwapInput::new(9.0, ts, 1.8, 10, 25).unwrap(),
    ]
}

fn swap_network() -> Verdict {
    let (mut rows, mut resid, mut little) = (0.0f64, 0.0f64, 0.0f64);
    for i in swap_configs() {
        let k = build_transition_kernel(&i).unwrap();
        for r in 0..k.dim() {
            rows = rows.max((k.row(r).iter().sum::<f64>() - 1.0).abs());
        }
        let s = chargeplan::swap_steady_state(&i).unwrap();
        resid = resid.max(s.residual);
        let rebuilt = i.arrival_rate * (1.0 - s.blocking_probability) * (s.mean_wait + i.swap_time);
        little = little.max(rel(rebuilt, s.mean_evs_in_station));
    }
    verdict(
        rows <= 1e-12 && resid <= 1e-10 && little <= 1e-9,
        format!("row sums {rows:.1e}, residual {resid:.1e}, Little {little:.1e} on 6 configs"),
    )
}

fn sim(seed: u64, arrivals: u64) -> SimConfig {
    SimConfig {
        horizon_arrivals: arrivals,
        warmup_fraction: 0.1,
        seed,
        batch_count: 20,
    }
}

fn des_plugin_configs() -> Vec<PluginInput> {
    vec![
        PluginInput::new(7.0, 1.0, 4.0, 8).unwrap(),
        PluginInput::new(7.5, 1.0, 8.0, 10).unwrap(),
        PluginInput::new(9.0, 22.5 / 22.0, 8.0, 20).unwrap(),
    ]
}

fn des_swap_configs() -> Vec<SwapInput> {
    vec![
        SwapInput::new(3.8, 2.0 / 60.0, 22.5 / 22.22, 6, 15).unwrap(),
        SwapInput::new(4.2, 2.0 / 60.0, 1.2, 6, 10).unwrap(),
        SwapInput::new(6.0, 2.0 / 60.0, 0.9, 8, 12).unwrap(),
    ]
}

fn des_cross_validation() -> Verdict {
    let mut rows = Vec::new();
    let plug: Vec<_> = des_plugin_configs()
        .par_iter()
        .map(|i| plugin_metrics_vs_des(i, &sim(1, 1_000_000)).unwrap())
        .collect();
    let swap: Vec<_> = des_swap_configs()
        .par_iter()
        .map(|i| swap_metrics_vs_des(i, &sim(1, 1_000_000), SwapDiscipline::Slotted).unwrap())
        .collect();
    for c in plug.iter().chain(&swap) {
        rows.extend(
            c.rows
                .iter()
                .filter(|r| r.metric != "mean_in_system")
                .cloned(),
        );
    }
    let inside = rows.iter().filter(|r| r.within(3.0)).count();
    let worst = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);

    // coverage of the 95% interval over 50 seeds, one config per station type
    let p = des_plugin_configs()[0];
    let s = des_swap_configs()[1];
    let pe = mmqv_steady_state(&p).unwrap();
    let se = chargeplan::swap_steady_state(&s).unwrap();
    let hits: Vec<[bool; 4]> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let a = simulate_mmqv(&p, &sim(100 + seed, 200_000)).unwrap();
            let b = simulate_swap_station(&s, &sim(100 + seed, 200_000), SwapDiscipline::Slotted)
                .unwrap();
            let covers = |e: &chargeplan::Estimate, x: f64| {
                let (lo, hi) = e.interval(0.95);
                lo <= x && x <= hi
            };
            [
                covers(&a.blocking, pe.blocking_probability),
                covers(&a.wait, pe.mean_wait),
                covers(&b.blocking, se.blocking_probability),
                covers(&b.wait, se.mean_wait),
            ]
        })
        .collect();
    let cover: Vec<usize> = (0..4)
        .map(|j| hits.iter().filter(|h| h[j]).count())
        .collect();
    verdict(
        inside == rows.len() && cover.iter().all(|&c| c >= 45),
        format!(
            "{inside}/{} inside 3 s.e. (max |z| {worst:.2}); 95% coverage over 50 seeds {:?}/50",
            rows.len(),
            cover
        ),
    )
}

fn figure_params() -> Params {
    let mut p = Params::figure_calibrated();
    p.charge_speed = 22.22;
    p
}

// The default inner grid leaves tens of $/h of welfare noise at fixed (K, Q),
// which is larger than the plug-in welfare ridge is deep along K.
fn plan_grid() -> PlanGrid {
    PlanGrid {
        inner: GridSpec {
            refine_rounds: 6,
            ..GridSpec::default()
        },
        refine_rounds: 3,
        ..PlanGrid::default()
    }
}

fn within(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol * want.abs()
}

fn spot_plugin() -> Verdict {
    let p = figure_params();
    let b = optimize_plan(
        Strategy::PlugIn,
        &p,
        &SearchRanges::default_for(&p),
        &plan_grid(),
    )
    .unwrap()
    .best;
    let checks = [
        within(b.plan.stations, 186.88, 0.05),
        within(b.plan.chargers, 8.454, 0.05),
        within(b.welfare, 118_823.8, 0.05),
        within(b.profit, 39_612.9, 0.05),
    ];
    verdict(
        checks.iter().all(|&c| c),
        format!(
            "K {:.2} Q {:.3} SW {:.1} profit {:.1}",
            b.plan.stations, b.plan.chargers, b.welfare, b.profit
        ),
    )
}

fn spot_swap() -> Verdict {
    let p = figure_params();
    let b = optimize_plan(
        Strategy::Swap,
        &p,
        &SearchRanges::default_for(&p),
        &plan_grid(),
    )
    .unwrap()
    .best;
    let checks = [
        within(b.plan.stations, 216.50, 0.05),
        within(b.welfare, 92_512.8, 0.05),
        within(b.profit, 50_380.2, 0.05),
    ];
    verdict(
        checks.iter().all(|&c| c),
        format!(
            "K {:.2} SW {:.1} profit {:.1}",
            b.plan.stations, b.welfare, b.profit
        ),
    )
}

fn trend_table(name: &str, values: &[f64]) -> (Vec<Outcome>, Vec<Outcome>) {
    let p = Params::figure_calibrated();
    let param = SweepParameter::parse(name).unwrap();
    let rows = sweep(
        &param,
        values,
        &[Strategy::PlugIn, Strategy::Swap],
        &p,
        &SearchRanges::default_for(&p),
        &plan_grid(),
    );
    let pick = |s: Strategy| -> Vec<Outcome> {
        rows.iter()
            .filter(|r| r.strategy == s)
            .map(|r| r.outcome.clone().expect("sweep cell solved"))
            .collect()
    };
    (pick(Strategy::PlugIn), pick(Strategy::Swap))
}

fn increasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] > w[0])
}

fn decreasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] < w[0])
}

fn fmt(x: &[f64], digits: usize) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.digits$}")).collect();
    format!("[{}]", parts.join(", "))
}

fn charge_speed_trends() -> Verdict {
    let (pl, sw) = trend_table("s", &[11.0, 16.5, 22.0, 27.5, 33.0, 38.5, 44.0]);
    let k: Vec<f64> = pl.iter().map(|o| o.plan.stations).collect();
    let q: Vec<f64> = pl.iter().map(|o| o.plan.chargers).collect();
    let ks: Vec<f64> = sw.iter().map(|o| o.plan.stations).collect();
    let pp: Vec<f64> = pl.iter().map(|o| o.profit).collect();
    let sp: Vec<f64> = sw.iter().map(|o| o.profit).collect();
    let peak = sp
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let interior = peak > 0 && peak < sp.len() - 1;
    verdict(
        increasing(&k) && decreasing(&q) && decreasing(&ks) && increasing(&pp) && interior,
        format!(
            "plug-in K {} Q {} profit {}; swap K {} profit {}",
            fmt(&k, 1),
            fmt(&q, 2),
            fmt(&pp, 0),
            fmt(&ks, 1),
            fmt(&sp, 0)
        ),
    )
}

fn capacity_trends() -> Verdict {
    let (pl, sw) = trend_table("C", &[12.5, 20.0, 27.5, 35.0, 42.5, 50.0]);
    let k: Vec<f64> = pl.iter().map(|o| o.plan.stations).collect();
    let q: Vec<f64> = pl.iter().map(|o| o.plan.chargers).collect();
    let ks: Vec<f64> = sw.iter().map(|o| o.plan.stations).collect();
    let wp: Vec<f64> = pl.iter().map(|o| o.welfare).collect();
    let ws: Vec<f64> = sw.iter().map(|o| o.welfare).collect();
    verdict(
        decreasing(&k) && increasing(&q) && decreasing(&ks) && increasing(&wp) && increasing(&ws),
        format!(
            "plug-in K {} Q {} SW {}; swap K {} SW {}",
            fmt(&k, 1),
            fmt(&q, 2),
            fmt(&wp, 0),
            fmt(&ks, 1),
            fmt(&ws, 0)
        ),
    )
}

fn break_even() -> Verdict {
    let p = Params::figure_calibrated();
    let ranges = SearchRanges::default_for(&p);
    let table = chargeplan::compare_strategies(&p, 5.0, &[40.0, 20.0], None, &ranges, &plan_grid())
        .expect("comparison runs");
    let d40 = table.cells[0][0].delta().unwrap();
    let d20 = table.cells[1][0].delta().unwrap();
    verdict(
        d40 < 0.0 && d20 > 0.0,
        format!("dSW(swap - plug-in) = {d40:.1} at 40 $/h, {d20:.1} at 20 $/h"),
    )
}

fn calibration_law() -> Verdict {
    let region = RegionSpec::default();
    let pts: Vec<(f64, f64)> = simulate_search_times(&region)
        .unwrap()
        .into_iter()
        .map(|(k, t)| (k as f64, t))
        .collect();
    let fit = fit_sqrt_law(&pts).unwrap();
    verdict(
        fit.r_squared >= 0.99,
        format!(
            "R^2 {:.5}, B {:.4} h on a unit square at unit speed",
            fit.r_squared, fit.scale
        ),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> Params {
    let mut p = Params::nominal();
    p.matching_scale_pax *= rng.random_range(0.7..1.4);
    p.matching_scale_chg *= rng.random_range(0.7..1.4);
    p.charge_speed *= rng.random_range(0.6..1.8);
    p.battery_capacity *= rng.random_range(0.6..1.8);
    p
}

fn random_plan(rng: &mut ChaCha8Rng, p: &Params) -> Plan {
    let k = p.station_supply_bound().max(1.0) * rng.random_range(60.0..400.0);
    if rng.random_bool(0.5) {
        Plan::plugin(k, rng.random_range(2.0..16.0), p.plugin_capacity)
    } else {
        Plan::swap(k, p)
    }
}

/// Checks on one randomized parameter draw; returns the failed property names.
fn draw_properties(d: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024 + d);
    let mut failures = Vec::new();
    let p = random_params(&mut rng);
    let plan = random_plan(&mut rng, &p);

    // matching feasibility boundary located by bisection
    let lam = rng.random_range(100.0..40_000.0);
    let (mut lo, mut hi) = (lam * p.trip_duration, lam * p.trip_duration + 1e5);
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if solve_pax_times(lam, mid, &p).is_ok() {
            hi = mid
        } else {
            lo = mid
        }
    }
    if rel(hi, pax_threshold(lam, &p)) > 1e-9 {
        failures.push(format!("draw {d}: boundary"));
    }

    // operating fleet positive and single-peaked on (0, γ0)
    let dom = gamma_domain(&plan, &p).unwrap();
    let n1: Vec<f64> = (1..1000)
        .map(|i| {
            fleet_from_gamma(dom.gamma_zero * i as f64 / 1000.0, &plan, &p)
                .unwrap()
                .operating
        })
        .collect();
    let rises: Vec<bool> = n1.windows(2).map(|w| w[1] > w[0]).collect();
    let flips = rises.windows(2).filter(|w| w[0] != w[1]).count();
    if n1.iter().any(|&x| x <= 0.0) || flips != 1 || !rises[0] {
        failures.push(format!("draw {d}: shape ({flips} flips)"));
    }

    // stations below the supply bound
    let mut few = plan;
    few.stations = p.station_supply_bound() * rng.random_range(0.05..0.99);
    if !matches!(
        gamma_domain(&few, &p),
        Err(Error::Infeasible(Infeasibility::StationSupply { .. }))
    ) {
        failures.push(format!("draw {d}: supply bound"));
    }

    // welfare decomposition and closure on an interior equilibrium
    let g = dom.gamma_peak * rng.random_range(0.1..0.9);
    let fleet = fleet_from_gamma(g, &plan, &p).unwrap();
    let (mut a, mut b) = (0.0, p.potential_demand);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if pax_threshold(m, &p) < fleet.operating {
            a = m
        } else {
            b = m
        }
    }
    let e = Equilibrium::assemble(a * rng.random_range(0.1..0.9), g, &plan, &p).unwrap();
    let w = social_welfare(&e, &plan, &p);
    let rearranged = (w.welfare + w.infra_cost - w.profit - w.surplus).abs();
    if w.welfare != w.surplus + w.profit - w.infra_cost || rearranged > 1e-12 * w.surplus {
        failures.push(format!("draw {d}: welfare identity"));
    }
    if e.closure_residual(&p) > 1e-6 {
        failures.push(format!("draw {d}: closure"));
    }
    failures
}

fn property_suite() -> Verdict {
    let draws = 40u64;
    let mut failures: Vec<String> = (0..draws)
        .into_par_iter()
        .flat_map(draw_properties)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // argmax and determinism on a coarse grid
    let coarse = PlanGrid {
        inner: GridSpec {
            lambda_points: 16,
            gamma_points: 16,
            refine_rounds: 2,
            refine_shrink: 0.3,
        },
        station_points: 8,
        charger_points: 4,
        refine_rounds: 2,
        refine_shrink: 0.4,
    };
    for d in 0..6 {
        let p = random_params(&mut rng);
        let s = if d % 2 == 0 {
            Strategy::PlugIn
        } else {
            Strategy::Swap
        };
        let ranges = SearchRanges {
            stations: SearchRange::new(p.station_supply_bound().max(1.0) * 40.0, 900.0).unwrap(),
            chargers: SearchRange::new(1.0, 20.0).unwrap(),
        };
        let a = optimize_plan(s, &p, &ranges, &coarse).unwrap();
        let b = optimize_plan(s, &p, &ranges, &coarse).unwrap();
        let dominates = a.evaluated.iter().all(|c| c.2 <= a.best.welfare);
        let monotone = a.round_best.windows(2).all(|w| w[1] >= w[0]);
        let identity = a.best.welfare == a.best.surplus + a.best.profit - a.best.infra_cost;
        if a != b || !dominates || !monotone || !identity {
            failures.push(format!("search {d}: argmax/determinism"));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{draws} parameter draws plus 6 searches clean")
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check, u64); 11] = [
        ("1 queue oracle equivalence", queue_oracle, 1),
        ("2 continuation consistency", continuation, 1),
        ("3 swap network correctness", swap_network, 5),
        ("4 simulation cross-validation", des_cross_validation, 120),
        ("5a spot values, plug-in", spot_plugin, 300),
        ("5b spot values, swap", spot_swap, 300),
        ("6 charge-speed trends", charge_speed_trends, 1800),
        ("7 battery-capacity trends", capacity_trends, 1800),
        ("8 break-even structure", break_even, 600),
        ("9 calibration law", calibration_law, 60),
        ("10 property suite", property_suite, 120),
    ];
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check, limit) in criteria {
        if let Some(o) = &only {
            let id = name.split(' ').next().unwrap();
            if !o
                .split(',')
                .any(|x| x.trim() == id || id.starts_with(x.trim()))
            {
                continue;
            }
        }
        ran += 1;
        let t = Instant::now();
        let v = check();
        let elapsed = t.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} | {} | {:.2} s of {limit} s{}",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { " (over time)" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
