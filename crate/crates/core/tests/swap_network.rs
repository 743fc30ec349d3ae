use chargeplan::{
    arrival_pmf, build_transition_kernel, charge_completion_pmf, swap_steady_state, SwapInput,
    SwapState,
};
use proptest::prelude::*;

fn station(rate: f64, ts: f64, tc: f64, q: u32, v: u32) -> SwapInput {
    SwapInput::new(rate, ts, tc, q, v).unwrap()
}

/// Kernel assembled by enumerating (arrivals, completions) outcomes with
/// closed-form Poisson and binomial weights; arrivals beyond the room are
/// summed explicitly up to a deep cutoff.
fn kernel_oracle(i: &SwapInput) -> Vec<Vec<f64>> {
    let (bq, bv) = (i.batteries as usize, i.ev_buffer as usize);
    let mu = i.arrival_rate * i.swap_time;
    let p = 1.0 - (-i.swap_time / i.charge_time).exp();
    let poisson: Vec<f64> = {
        let mut out = vec![(-mu).exp()];
        for k in 1..400 {
            let last = out[k - 1];
            out.push(last * mu / k as f64);
        }
        out
    };
    let choose =
        |n: usize, k: usize| (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
    let n = (bv + 1) * (bq + 1);
    let mut k = vec![vec![0.0; n]; n];
    for v in 0..=bv {
        for q in 0..=bq {
            let s = usize::from(v > 0 && q > 0);
            let charging = bq - q;
            for done in 0..=charging {
                let pf = choose(charging, done)
                    * p.powi(done as i32)
                    * (1.0 - p).powi((charging - done) as i32);
                for (arr, pa) in poisson.iter().enumerate() {
                    let vp = (v - s + arr).min(bv);
                    let qp = q - s + done;
                    k[v * (bq + 1) + q][vp * (bq + 1) + qp] += pa * pf;
                }
            }
        }
    }
    k
}

fn configs() -> Vec<SwapInput> {
    let base = (3.8, 2.0 / 60.0, 22.5 / 22.22, 6, 15);
    vec![
        station(base.0, base.1, base.2, base.3, base.4),
        station(1.5, base.1, base.2, base.3, base.4),
        station(6.5, base.1, base.2, base.3, base.4),
        station(base.0, 3.0 / 60.0, base.2, 4, base.4),
        station(base.0, base.1, 0.6, 8, 10),
        station(9.0, base.1, 1.8, 10, 25),
    ]
}

#[test]
fn pmf_closed_forms() {
    // λ t_s = 1 gives g(0) = 1/e
    let i = station(30.0, 2.0 / 60.0, 1.0, 6, 15);
    assert!((arrival_pmf(0, &i) - (-1.0f64).exp()).abs() < 1e-15);
    assert!((arrival_pmf(2, &i) - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
    // t_s / t_c = ln 2 gives a completion chance of exactly 1/2
    let i = station(1.0, 2.0f64.ln(), 1.0, 6, 15);
    assert!((charge_completion_pmf(1, 1, &i) - 0.5).abs() < 1e-15);
    assert!((charge_completion_pmf(4, 2, &i) - 6.0 / 16.0).abs() < 1e-14);
    // more charging batteries than chargers is capped at Q
    assert_eq!(
        charge_completion_pmf(9, 6, &i),
        charge_completion_pmf(6, 6, &i)
    );
}

#[test]
fn kernel_matches_enumeration_oracle() {
    for i in configs() {
        let k = build_transition_kernel(&i).unwrap();
        let o = kernel_oracle(&i);
        for (r, row) in o.iter().enumerate() {
            for (c, &want) in row.iter().enumerate() {
                assert!((k.get(r, c) - want).abs() < 1e-13, "entry ({r},{c})");
            }
        }
    }
}

fn check(i: &SwapInput, s: &SwapState) {
    let k = build_transition_kernel(i).unwrap();
    for r in 0..k.dim() {
        let sum: f64 = k.row(r).iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "row {r} sums to {sum}");
    }
    let total: f64 = s.joint_probabilities.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert!(s.joint_probabilities.iter().all(|&p| p >= 0.0));
    assert!(s.residual <= 1e-10, "residual {}", s.residual);
    let rebuilt = i.arrival_rate * (1.0 - s.blocking_probability) * (s.mean_wait + i.swap_time);
    assert!((rebuilt - s.mean_evs_in_station).abs() <= 1e-9 * s.mean_evs_in_station.max(1.0));
}

#[test]
fn steady_state_matches_power_iteration_oracle() {
    for i in configs() {
        let s = swap_steady_state(&i).unwrap();
        check(&i, &s);
        let k = kernel_oracle(&i);
        let n = k.len();
        let mut p = vec![1.0 / n as f64; n];
        for _ in 0..200_000 {
            let mut next = vec![0.0; n];
            for (r, row) in k.iter().enumerate() {
                for (c, &x) in row.iter().enumerate() {
                    next[c] += p[r] * x;
                }
            }
            let z: f64 = next.iter().sum();
            let diff = next
                .iter()
                .zip(&p)
                .map(|(a, b)| (a / z - b).abs())
                .fold(0.0, f64::max);
            p = next.into_iter().map(|x| x / z).collect();
            if diff < 1e-15 {
                break;
            }
        }
        for (a, b) in s.joint_probabilities.iter().zip(&p) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn large_state_space_uses_iteration() {
    let i = station(20.0, 2.0 / 60.0, 0.8, 40, 124);
    assert!(i.state_count() > 5000);
    let s = swap_steady_state(&i).unwrap();
    assert!(s.residual <= 1e-10);
    let total: f64 = s.joint_probabilities.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
}

#[test]
fn single_precision_runs() {
    let d = swap_steady_state(&configs()[0]).unwrap();
    let s = swap_steady_state(
        &chargeplan::SwapInputF32::new(3.8, 2.0 / 60.0, 22.5 / 22.22, 6, 15).unwrap(),
    )
    .unwrap();
    assert!((f64::from(s.mean_wait) - d.mean_wait).abs() <= 5e-3 * d.mean_wait);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariants_on_random_stations(rate in 0.2f64..10.0, ts_min in 0.5f64..5.0, tc in 0.3f64..2.5, q in 1u32..9, v in 1u32..20) {
        let i = station(rate, ts_min / 60.0, tc, q, v);
        let s = swap_steady_state(&i).unwrap();
        check(&i, &s);
    }

    #[test]
    fn blocking_grows_with_arrivals(rate in 0.2f64..10.0, bump in 1.01f64..2.0, q in 1u32..8, v in 2u32..16) {
        let lo = swap_steady_state(&station(rate, 2.0 / 60.0, 1.0, q, v)).unwrap();
        let hi = swap_steady_state(&station(rate * bump, 2.0 / 60.0, 1.0, q, v)).unwrap();
        prop_assert!(hi.blocking_probability >= lo.blocking_probability - 1e-13);
    }
}
