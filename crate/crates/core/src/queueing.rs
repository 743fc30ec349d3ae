//! Steady state of a plug-in station modeled as an M/M/Q/V queue.
//!
//! Times are in hours, rates per hour.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, Matrix};
use crate::scalar::{from_usize, lit, Scalar};
use crate::special::scaled_upper_gamma;

/// Load window around a = 1 where the geometric sums switch to their series.
const UNIT_LOAD_WINDOW: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PluginStationInput<T> {
    /// Vehicles per hour arriving at one station (γ/K).
    pub arrival_rate: T,
    /// Mean charging time in hours.
    pub service_time: T,
    /// Number of chargers; may be fractional for the continuous form.
    pub chargers: T,
    /// Total room at the station, waiting plus charging.
    pub capacity: u32,
}

impl<T: Scalar> PluginStationInput<T> {
    pub fn new(arrival_rate: T, service_time: T, chargers: T, capacity: u32) -> Result<Self> {
        let input = PluginStationInput {
            arrival_rate,
            service_time,
            chargers,
            capacity,
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
        if !(self.service_time > T::zero()) || !self.service_time.is_finite() {
            return Err(Error::invalid(format!(
                "service time must be positive, got {}",
                self.service_time
            )));
        }
        if !(self.chargers > T::zero()) || !self.chargers.is_finite() {
            return Err(Error::invalid(format!(
                "charger count must be positive, got {}",
                self.chargers
            )));
        }
        if self.capacity == 0 {
            return Err(Error::invalid("station capacity must be at least 1"));
        }
        if self.chargers.ceil() > lit(self.capacity as f64) {
            return Err(Error::invalid(format!(
                "{} chargers exceed station capacity {}",
                self.chargers, self.capacity
            )));
        }
        Ok(())
    }

    /// ρ = arrival rate × service time.
    pub fn offered_load(&self) -> T {
        self.arrival_rate * self.service_time
    }

    /// a = ρ / Q.
    pub fn per_server_load(&self) -> T {
        self.offered_load() / self.chargers
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueMetrics<T> {
    /// P_0..P_V; only produced by the integer-charger solvers.
    pub state_probabilities: Option<Vec<T>>,
    pub blocking_probability: T,
    /// Mean wait before charging starts, hours, over admitted vehicles.
    pub mean_wait: T,
    pub mean_in_system: T,
}

impl<T: Scalar> QueueMetrics<T> {
    fn empty(capacity: u32, with_states: bool) -> Self {
        let states = with_states.then(|| {
            let mut p = vec![T::zero(); capacity as usize + 1];
            p[0] = T::one();
            p
        });
        QueueMetrics {
            state_probabilities: states,
            blocking_probability: T::zero(),
            mean_wait: T::zero(),
            mean_in_system: T::zero(),
        }
    }

    fn from_distribution(p: Vec<T>, input: &PluginStationInput<T>, q: usize) -> Self {
        let v = input.capacity as usize;
        let pv = p[v];
        let mut l = T::zero();
        let mut lq = T::zero();
        for (k, &pk) in p.iter().enumerate() {
            l += from_usize::<T>(k) * pk;
            if k > q {
                lq += from_usize::<T>(k - q) * pk;
            }
        }
        let admitted = input.arrival_rate * (T::one() - pv);
        let wait = if admitted > T::zero() {
            lq / admitted
        } else {
            T::zero()
        };
        QueueMetrics {
            state_probabilities: Some(p),
            blocking_probability: pv,
            mean_wait: wait,
            mean_in_system: l,
        }
    }
}

fn integer_chargers<T: Scalar>(input: &PluginStationInput<T>) -> Result<usize> {
    let q = input.chargers;
    if q.fract() != T::zero() {
        return Err(Error::invalid(format!(
            "integer form needs a whole charger count, got {q}"
        )));
    }
    q.to_usize()
        .ok_or_else(|| Error::invalid("charger count out of range"))
}

/// Exact product-form solution for an integer number of chargers.
///
/// Terms ρ^v / v! and ρ^v / (Q^{v−Q} Q!) are accumulated in log space.
pub fn mmqv_steady_state<T: Scalar>(input: &PluginStationInput<T>) -> Result<QueueMetrics<T>> {
    input.validate()?;
    let q = integer_chargers(input)?;
    let v = input.capacity as usize;
    if input.arrival_rate == T::zero() {
        return Ok(QueueMetrics::empty(input.capacity, true));
    }
    let ln_rho = input.offered_load().ln();
    let mut lw = Vec::with_capacity(v + 1);
    lw.push(T::zero());
    for k in 1..=v {
        let prev = lw[k - 1];
        lw.push(prev + ln_rho - from_usize::<T>(k.min(q)).ln());
    }
    let top = lw.iter().copied().fold(T::neg_infinity(), T::max);
    let w: Vec<T> = lw.iter().map(|&x| (x - top).exp()).collect();
    let z: T = w.iter().copied().sum();
    let p = w.into_iter().map(|x| x / z).collect();
    Ok(QueueMetrics::from_distribution(p, input, q))
}

/// Birth–death generator solved as a linear system; an independent check on
/// the product form.
pub fn ctmc_oracle<T: Scalar>(input: &PluginStationInput<T>) -> Result<QueueMetrics<T>> {
    input.validate()?;
    let q = integer_chargers(input)?;
    let v = input.capacity as usize;
    if input.arrival_rate == T::zero() {
        return Ok(QueueMetrics::empty(input.capacity, true));
    }
    let n = v + 1;
    let mu = T::one() / input.service_time;
    let mut gen = Matrix::zeros(n);
    for k in 0..n {
        if k < v {
            gen.set(k, k + 1, input.arrival_rate);
        }
        if k > 0 {
            gen.set(k, k - 1, from_usize::<T>(k.min(q)) * mu);
        }
        let out: T = gen.row(k).iter().copied().sum();
        gen.set(k, k, -out);
    }
    // pi G = 0  <=>  G^T pi^T = 0; last equation replaced by normalization
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            a.set(j, i, gen.get(i, j));
        }
    }
    for j in 0..n {
        a.set(n - 1, j, T::one());
    }
    let mut b = vec![T::zero(); n];
    b[n - 1] = T::one();
    let (p, _) = solve_dense(a, b)?;
    Ok(QueueMetrics::from_distribution(p, input, q))
}

/// Generalized binomial coefficients C(m, 0..).
struct Binomials<T> {
    m: T,
    k: usize,
    c: T,
}

impl<T: Scalar> Iterator for Binomials<T> {
    type Item = T;
    fn next(&mut self) -> Option<T> {
        let out = self.c;
        self.k += 1;
        let k = from_usize::<T>(self.k);
        self.c = self.c * (self.m - k + T::one()) / k;
        Some(out)
    }
}

fn binomials<T: Scalar>(m: T) -> Binomials<T> {
    Binomials {
        m,
        k: 0,
        c: T::one(),
    }
}

/// Series around a = 1 (e = 1 − a, n = V − Q) of
/// geo(a) = Σ_{k=0}^{n} a^k and fb(a) = Σ_{j=1}^{n} j a^{j−1},
/// continued to real n through generalized binomials.
fn unit_load_series<T: Scalar>(e: T, n: T) -> Result<(T, T)> {
    let eps = T::epsilon();
    let np1 = n + T::one();
    let min_terms = (2.0 * crate::scalar::to_f64(np1 * e.abs())) as usize + 3;

    // geo = Σ_k C(n+1, k+1) (−e)^k
    let mut geo = T::zero();
    let mut pw = T::one();
    let mut done = false;
    for (k, c) in binomials(np1).skip(1).take(4000).enumerate() {
        let term = c * pw;
        geo += term;
        if k >= min_terms && term.abs() <= eps * geo.abs() {
            done = true;
            break;
        }
        pw = pw * (-e);
    }
    if !done {
        return Err(Error::numeric(
            "geometric series near unit load did not converge",
        ));
    }

    // fb = Σ_{j≥2} (−1)^j (j−1) C(n+1, j) e^{j−2}
    let mut fb = T::zero();
    let mut pw = T::one();
    let mut done = false;
    for (j, c) in binomials(np1).enumerate().skip(2).take(4000) {
        let term = from_usize::<T>(j - 1) * c * pw;
        fb += term;
        if j >= min_terms + 2 && term.abs() <= eps * fb.abs() {
            done = true;
            break;
        }
        pw = pw * (-e);
    }
    if !done {
        return Err(Error::numeric(
            "wait series near unit load did not converge",
        ));
    }
    Ok((geo, fb))
}

/// Continuous-charger form of the M/M/Q/V metrics, valid for real Q.
///
/// The first Q terms of the normalizing sum become e^ρ·Q(Q, ρ) with Q(·,·) the
/// regularized upper incomplete gamma; the tail is a geometric sum in a = ρ/Q
/// with exponent V − Q + 1. Everything is carried relative to ρ^Q/Γ(Q+1), and
/// relative to a^{V−Q} as well when a > 1.
pub fn mmqv_continuous<T: Scalar>(input: &PluginStationInput<T>) -> Result<QueueMetrics<T>> {
    input.validate()?;
    if input.arrival_rate == T::zero() {
        return Ok(QueueMetrics::empty(input.capacity, false));
    }
    let q = input.chargers;
    let n = lit::<T>(input.capacity as f64) - q;
    let rho = input.offered_load();
    let a = rho / q;
    let lambda = input.arrival_rate;
    let one = T::one();
    // e^ρ Σ-part over ρ^Q/Γ(Q+1)
    let r = q * scaled_upper_gamma(q, rho)?;
    let e = one - a;

    let (pv, one_minus_pv, d, fb) = if e.abs() < lit(UNIT_LOAD_WINDOW) {
        let (geo, fb) = unit_load_series(e, n)?;
        let an = a.powf(n);
        let d = r + geo;
        let pv = an / d;
        (pv, one - pv, d, fb)
    } else if a < one {
        let an = a.powf(n);
        let an1 = an * a;
        let geo = (one - an1) / e;
        let fb = (one - an1 - e * (n + one) * an) / (e * e);
        let d = r + geo;
        // geo − a^n = Σ_{k<n} a^k
        let head = (one - an) / e;
        (an / d, (r + head) / d, d, fb)
    } else {
        let b = one / a;
        let bn = b.powf(n);
        let bn1 = bn * b;
        let eb = one - b;
        let geo = (one - bn1) / eb;
        let fb = b * (bn1 - one + (n + one) * eb) / (eb * eb);
        let d = r * bn + geo;
        let head = b * (one - bn) / eb;
        (one / d, (r * bn + head) / d, d, fb)
    };

    if !(pv >= T::zero()) || !(one_minus_pv > T::zero()) {
        return Err(Error::numeric(format!(
            "blocking probability {pv} out of range"
        )));
    }
    let mut wait = a * fb / (lambda * one_minus_pv * d);
    if wait < T::zero() {
        if wait > lit(-1e-12) {
            wait = T::zero();
        } else {
            return Err(Error::numeric(format!("negative plug-in wait {wait}")));
        }
    }
    let admitted = lambda * one_minus_pv;
    Ok(QueueMetrics {
        state_probabilities: None,
        blocking_probability: pv,
        mean_wait: wait,
        mean_in_system: admitted * (wait + input.service_time),
    })
}

/// Erlang-B blocking for `servers` servers at offered load `rho`.
pub fn erlang_b<T: Scalar>(servers: u32, rho: T) -> T {
    let mut b = T::one();
    for k in 1..=servers {
        let k = lit::<T>(k as f64);
        b = rho * b / (k + rho * b);
    }
    b
}
