//! Battery-swap station: an open EV queue with buffer V and one constant-time
//! swap bay, coupled to a closed loop of Q batteries on Q chargers.
//!
//! The station is observed at multiples of the swap time t_s. Between two
//! epochs the EV count grows by Poisson(λ t_s) arrivals and each battery that
//! was charging completes with probability 1 − e^{−t_s/t_c}.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{stationary_direct, stationary_power, Matrix};
use crate::scalar::{from_usize, lit, Scalar};
use crate::special::ln_gamma;

const DIRECT_SOLVE_LIMIT: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapStationInput<T> {
    /// EVs per hour arriving at one station.
    pub arrival_rate: T,
    /// Constant swap duration t_s, hours.
    pub swap_time: T,
    /// Mean battery charging time t_c, hours.
    pub charge_time: T,
    /// Chargers, equal to the number of stored batteries.
    pub batteries: u32,
    /// EV room V.
    pub ev_buffer: u32,
}

impl<T: Scalar> SwapStationInput<T> {
    pub fn new(
        arrival_rate: T,
        swap_time: T,
        charge_time: T,
        batteries: u32,
        ev_buffer: u32,
    ) -> Result<Self> {
        let input = SwapStationInput {
            arrival_rate,
            swap_time,
            charge_time,
            batteries,
            ev_buffer,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= T::zero()) || !self.arrival_rate.is_finite() {
            return Err(Error::invalid(format!(
                "arrival rate must be nonnegative, got {}",
                self.arrival_rate
            )));
        }
        for (name, v) in [
            ("swap time", self.swap_time),
            ("charge time", self.charge_time),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.batteries == 0 || self.ev_buffer == 0 {
            return Err(Error::invalid(
                "swap station needs at least one battery and one EV slot",
            ));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        (self.ev_buffer as usize + 1) * (self.batteries as usize + 1)
    }

    /// Probability that a charging battery finishes within one swap time.
    pub fn completion_probability(&self) -> T {
        -(-self.swap_time / self.charge_time).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SwapStationState {
    pub ev_count: u32,
    pub full_batteries: u32,
}

impl SwapStationState {
    pub fn index(&self, batteries: u32) -> usize {
        self.ev_count as usize * (batteries as usize + 1) + self.full_batteries as usize
    }

    pub fn from_index(i: usize, batteries: u32) -> Self {
        let w = batteries as usize + 1;
        SwapStationState {
            ev_count: (i / w) as u32,
            full_batteries: (i % w) as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapSteadyState<T> {
    /// P(v, q) row-major in v, length (V+1)(Q+1).
    pub joint_probabilities: Vec<T>,
    pub batteries: u32,
    pub ev_buffer: u32,
    /// P_V, probability the EV room is full.
    pub blocking_probability: T,
    /// N̄, mean EVs at the station.
    pub mean_evs_in_station: T,
    /// t_w in hours.
    pub mean_wait: T,
    /// max |πP − π|.
    pub residual: T,
}

impl<T: Scalar> SwapSteadyState<T> {
    pub fn probability(&self, state: SwapStationState) -> T {
        self.joint_probabilities[state.index(self.batteries)]
    }
}

/// g(k): Poisson(λ t_s) probability of `count` arrivals in one swap time.
pub fn arrival_pmf<T: Scalar>(count: i64, input: &SwapStationInput<T>) -> T {
    if count < 0 {
        return T::zero();
    }
    let mu = input.arrival_rate * input.swap_time;
    if mu == T::zero() {
        return if count == 0 { T::one() } else { T::zero() };
    }
    let k = lit::<T>(count as f64);
    (k * mu.ln() - mu - ln_gamma(k + T::one())).exp()
}

/// f(m, n): probability that `completed` of the min(Q, m) charging batteries
/// finish within one swap time.
pub fn charge_completion_pmf<T: Scalar>(
    charging: i64,
    completed: i64,
    input: &SwapStationInput<T>,
) -> T {
    let trials = charging.clamp(0, input.batteries as i64);
    if completed < 0 || completed > trials {
        return T::zero();
    }
    binomial_pmf(
        trials as usize,
        completed as usize,
        input.completion_probability(),
    )
}

fn binomial_pmf<T: Scalar>(trials: usize, k: usize, p: T) -> T {
    let one = T::one();
    if p >= one {
        return if k == trials { one } else { T::zero() };
    }
    if p <= T::zero() {
        return if k == 0 { one } else { T::zero() };
    }
    let (nn, kk) = (from_usize::<T>(trials), from_usize::<T>(k));
    let ln_c = ln_gamma(nn + one) - ln_gamma(kk + one) - ln_gamma(nn - kk + one);
    (ln_c + kk * p.ln() + (nn - kk) * (-p).ln_1p()).exp()
}

/// One-step transition matrix of the embedded chain over (v, q).
pub fn build_transition_kernel<T: Scalar>(input: &SwapStationInput<T>) -> Result<Matrix<T>> {
    input.validate()?;
    let big_v = input.ev_buffer as usize;
    let big_q = input.batteries as usize;
    let n = input.state_count();
    let g: Vec<T> = (0..=big_v + 1)
        .map(|k| arrival_pmf(k as i64, input))
        .collect();
    let f: Vec<Vec<T>> = (0..=big_q)
        .map(|m| {
            (0..=m)
                .map(|c| charge_completion_pmf(m as i64, c as i64, input))
                .collect()
        })
        .collect();
    let mut kernel = Matrix::zeros(n);
    for v in 0..=big_v {
        for q in 0..=big_q {
            let s = usize::from(v >= 1 && q >= 1);
            let from = v * (big_q + 1) + q;
            let charging = big_q - q;
            // EV marginal: v' = v − s + arrivals, lumped at V
            let mut ev = vec![T::zero(); big_v + 1];
            let mut below = T::zero();
            for (vp, slot) in ev.iter_mut().enumerate().take(big_v) {
                if vp + s >= v {
                    let p = g[vp + s - v];
                    *slot = p;
                    below += p;
                }
            }
            ev[big_v] = (T::one() - below).max(T::zero());
            for (done, &pf) in f[charging].iter().enumerate() {
                let qp = q - s + done;
                for (vp, &pe) in ev.iter().enumerate() {
                    if pe != T::zero() {
                        kernel.add(from, vp * (big_q + 1) + qp, pe * pf);
                    }
                }
            }
        }
    }
    Ok(kernel)
}

/// Stationary law of the embedded chain plus blocking, mean EV count and wait.
pub fn swap_steady_state<T: Scalar>(input: &SwapStationInput<T>) -> Result<SwapSteadyState<T>> {
    input.validate()?;
    let big_v = input.ev_buffer as usize;
    let big_q = input.batteries as usize;
    let n = input.state_count();
    if input.arrival_rate == T::zero() {
        let mut p = vec![T::zero(); n];
        p[big_q] = T::one();
        return Ok(SwapSteadyState {
            joint_probabilities: p,
            batteries: input.batteries,
            ev_buffer: input.ev_buffer,
            blocking_probability: T::zero(),
            mean_evs_in_station: T::zero(),
            mean_wait: T::zero(),
            residual: T::zero(),
        });
    }
    let kernel = build_transition_kernel(input)?;
    let mut p = if n <= DIRECT_SOLVE_LIMIT {
        stationary_direct(&kernel)?
    } else {
        stationary_power(&kernel, lit(1e-12), 1_000_000)?
    };
    for x in p.iter_mut() {
        if *x < T::zero() {
            if *x > lit(-1e-10) {
                *x = T::zero();
            } else {
                return Err(Error::numeric(format!(
                    "negative stationary probability {x}"
                )));
            }
        }
    }
    let z: T = p.iter().copied().sum();
    for x in p.iter_mut() {
        *x /= z;
    }
    let next = kernel.left_mul(&p);
    let residual = next
        .iter()
        .zip(&p)
        .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));

    let mut pv = T::zero();
    let mut mean = T::zero();
    for v in 0..=big_v {
        let row: T = p[v * (big_q + 1)..(v + 1) * (big_q + 1)]
            .iter()
            .copied()
            .sum();
        mean += from_usize::<T>(v) * row;
        if v == big_v {
            pv = row;
        }
    }
    let admitted = input.arrival_rate * (T::one() - pv);
    if !(admitted > T::zero()) {
        return Err(Error::numeric("swap station admits no vehicles"));
    }
    let mut wait = mean / admitted - input.swap_time;
    if wait < T::zero() {
        if wait > lit(-1e-9) {
            wait = T::zero();
        } else {
            return Err(Error::numeric(format!("negative swap wait {wait}")));
        }
    }
    Ok(SwapSteadyState {
        joint_probabilities: p,
        batteries: input.batteries,
        ev_buffer: input.ev_buffer,
        blocking_probability: pv,
        mean_evs_in_station: mean,
        mean_wait: wait,
        residual,
    })
}
