//! Discrete-event simulation of single stations, for checking the analytic
//! steady states. Confidence intervals use batch means after a warmup.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::queueing::{mmqv_steady_state, PluginStationInput};
use crate::swap::{swap_steady_state, SwapStationInput};

/// RNG stream per stochastic process, so changing one process leaves the
/// others' draws untouched.
const STREAM_ARRIVALS: u64 = 0;
const STREAM_SERVICES: u64 = 1;
const STREAM_CHARGES: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub horizon_arrivals: u64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub batch_count: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon_arrivals: 1_000_000,
            warmup_fraction: 0.1,
            seed: 1,
            batch_count: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_arrivals < 100_000 {
            return Err(Error::invalid(
                "simulation horizon must be at least 1e5 arrivals",
            ));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::invalid("warmup fraction must lie in (0, 1)"));
        }
        if self.batch_count < 10 {
            return Err(Error::invalid("at least 10 batches are needed"));
        }
        Ok(())
    }

    fn split(&self, total: u64) -> (u64, u64) {
        let warm = (total as f64 * self.warmup_fraction).floor() as u64;
        let per_batch = (total - warm) / self.batch_count as u64;
        (warm, per_batch.max(1))
    }
}

/// Batch-means estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub batches: usize,
}

impl Estimate {
    fn from_batches(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
            batches: x.len(),
        }
    }

    /// Two-sided Student-t interval at the given confidence.
    pub fn interval(&self, confidence: f64) -> (f64, f64) {
        let t = StudentsT::new(0.0, 1.0, (self.batches - 1) as f64)
            .expect("at least two batches")
            .inverse_cdf(0.5 + confidence / 2.0);
        (self.mean - t * self.stderr, self.mean + t * self.stderr)
    }

    /// Distance from `value` in standard errors; zero when both coincide.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = self.mean - value;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub blocking: Estimate,
    /// Hours.
    pub wait: Estimate,
    pub mean_in_system: Estimate,
    pub events_processed: u64,
}

#[derive(Default, Clone)]
struct Batch {
    arrivals: u64,
    blocked: u64,
    wait_sum: f64,
    waits: u64,
    area: f64,
    duration: f64,
}

fn finish(batches: &[Batch], events: u64) -> SimResult {
    let blocking: Vec<f64> = batches
        .iter()
        .map(|b| b.blocked as f64 / b.arrivals.max(1) as f64)
        .collect();
    let wait: Vec<f64> = batches
        .iter()
        .map(|b| {
            if b.waits > 0 {
                b.wait_sum / b.waits as f64
            } else {
                0.0
            }
        })
        .collect();
    let occupancy: Vec<f64> = batches
        .iter()
        .map(|b| {
            if b.duration > 0.0 {
                b.area / b.duration
            } else {
                0.0
            }
        })
        .collect();
    SimResult {
        blocking: Estimate::from_batches(&blocking),
        wait: Estimate::from_batches(&wait),
        mean_in_system: Estimate::from_batches(&occupancy),
        events_processed: events,
    }
}

#[derive(Debug, Clone, Copy)]
struct At(f64);

impl PartialEq for At {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for At {}

impl PartialOrd for At {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for At {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Tracks time-weighted occupancy and attributes it to the current batch.
struct Clock {
    now: f64,
    batch: Option<usize>,
}

impl Clock {
    fn advance(&mut self, to: f64, level: u32, batches: &mut [Batch]) {
        if let Some(b) = self.batch {
            let dt = to - self.now;
            batches[b].area += dt * level as f64;
            batches[b].duration += dt;
        }
        self.now = to;
    }
}

fn batch_of(i: u64, warm: u64, per_batch: u64, count: usize) -> Option<usize> {
    if i < warm {
        return None;
    }
    let b = ((i - warm) / per_batch) as usize;
    (b < count).then_some(b)
}

fn interarrival(rate: f64) -> Result<Option<Exp<f64>>> {
    if rate == 0.0 {
        return Ok(None);
    }
    Exp::new(rate)
        .map(Some)
        .map_err(|e| Error::invalid(e.to_string()))
}

fn exp_mean(mean: f64) -> Result<Exp<f64>> {
    Exp::new(1.0 / mean).map_err(|e| Error::invalid(e.to_string()))
}

/// M/M/Q/V station with FCFS waiting; Q must be whole.
pub fn simulate_mmqv(input: &PluginStationInput<f64>, cfg: &SimConfig) -> Result<SimResult> {
    input.validate()?;
    cfg.validate()?;
    if input.chargers.fract() != 0.0 {
        return Err(Error::invalid(
            "simulation needs a whole number of chargers",
        ));
    }
    let servers = input.chargers as u32;
    let cap = input.capacity;
    let mut arr_rng = stream(cfg.seed, STREAM_ARRIVALS);
    let mut svc_rng = stream(cfg.seed, STREAM_SERVICES);
    let gap = interarrival(input.arrival_rate)?;
    let service = exp_mean(input.service_time)?;

    let (warm, per_batch) = cfg.split(cfg.horizon_arrivals);
    let mut batches = vec![Batch::default(); cfg.batch_count];
    let mut clock = Clock {
        now: 0.0,
        batch: None,
    };
    let mut in_system = 0u32;
    let mut queue: VecDeque<(f64, Option<usize>)> = VecDeque::new();
    let mut completions: BinaryHeap<Reverse<At>> = BinaryHeap::new();
    let mut events = 0u64;
    let mut t_arr = 0.0;

    for i in 0..=cfg.horizon_arrivals {
        t_arr += match &gap {
            Some(g) => g.sample(&mut arr_rng),
            // no arrivals: unit spacing so batches still have a duration
            None => 1.0,
        };
        while let Some(&Reverse(At(tc))) = completions.peek() {
            if tc > t_arr {
                break;
            }
            completions.pop();
            clock.advance(tc, in_system, &mut batches);
            events += 1;
            in_system -= 1;
            if let Some((t0, b)) = queue.pop_front() {
                if let Some(b) = b {
                    batches[b].wait_sum += tc - t0;
                    batches[b].waits += 1;
                }
                completions.push(Reverse(At(tc + service.sample(&mut svc_rng))));
            }
        }
        clock.advance(t_arr, in_system, &mut batches);
        if i == cfg.horizon_arrivals {
            break;
        }
        let b = batch_of(i, warm, per_batch, cfg.batch_count);
        clock.batch = b;
        if gap.is_none() {
            continue;
        }
        events += 1;
        if let Some(b) = b {
            batches[b].arrivals += 1;
        }
        if in_system == cap {
            if let Some(b) = b {
                batches[b].blocked += 1;
            }
            continue;
        }
        in_system += 1;
        if in_system <= servers {
            if let Some(b) = b {
                batches[b].waits += 1;
            }
            completions.push(Reverse(At(t_arr + service.sample(&mut svc_rng))));
        } else {
            queue.push_back((t_arr, b));
        }
    }
    // let the last waiters reach a charger so their waits are counted
    while let Some(Reverse(At(tc))) = completions.pop() {
        events += 1;
        if let Some((t0, b)) = queue.pop_front() {
            if let Some(b) = b {
                batches[b].wait_sum += tc - t0;
                batches[b].waits += 1;
            }
            completions.push(Reverse(At(tc + service.sample(&mut svc_rng))));
        }
    }
    Ok(finish(&batches, events))
}

/// How the swap station is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SwapDiscipline {
    /// Physical continuous-time station: a swap starts as soon as an EV and a
    /// full battery are both present and the bay is free.
    Continuous,
    /// Swaps happen in lock-step slots of length t_s, the semantics of the
    /// analytic embedded chain. Estimates are read at slot boundaries.
    Slotted,
}

/// Swap station simulation. Arrivals, charging times and the arrival count
/// per slot are drawn from first principles, independent of the pmfs used by
/// the analytic kernel.
pub fn simulate_swap_station(
    input: &SwapStationInput<f64>,
    cfg: &SimConfig,
    discipline: SwapDiscipline,
) -> Result<SimResult> {
    input.validate()?;
    cfg.validate()?;
    match discipline {
        SwapDiscipline::Continuous => simulate_swap_continuous(input, cfg),
        SwapDiscipline::Slotted => simulate_swap_slotted(input, cfg),
    }
}

fn simulate_swap_continuous(input: &SwapStationInput<f64>, cfg: &SimConfig) -> Result<SimResult> {
    let q_total = input.batteries;
    let cap = input.ev_buffer;
    let ts = input.swap_time;
    let mut arr_rng = stream(cfg.seed, STREAM_ARRIVALS);
    let mut chg_rng = stream(cfg.seed, STREAM_CHARGES);
    let gap = interarrival(input.arrival_rate)?;
    let charge = exp_mean(input.charge_time)?;

    let (warm, per_batch) = cfg.split(cfg.horizon_arrivals);
    let mut batches = vec![Batch::default(); cfg.batch_count];
    let mut clock = Clock {
        now: 0.0,
        batch: None,
    };
    let mut evs = 0u32;
    let mut full = q_total;
    let mut charging: BinaryHeap<Reverse<At>> = BinaryHeap::new();
    let mut bay: Option<f64> = None;
    let mut queue: VecDeque<(f64, Option<usize>)> = VecDeque::new();
    let mut events = 0u64;

    let conserve = |full: u32, charging: usize, bay: bool| {
        debug_assert_eq!(
            full + charging as u32 + u32::from(bay),
            q_total,
            "battery count drifted"
        );
    };

    let start_swap = |now: f64,
                      queue: &mut VecDeque<(f64, Option<usize>)>,
                      full: &mut u32,
                      bay: &mut Option<f64>,
                      batches: &mut [Batch]| {
        if bay.is_none() && *full > 0 {
            if let Some((t0, b)) = queue.pop_front() {
                if let Some(b) = b {
                    batches[b].wait_sum += now - t0;
                    batches[b].waits += 1;
                }
                *full -= 1;
                *bay = Some(now + ts);
            }
        }
    };

    let mut i = 0u64;
    let mut next_arrival = match &gap {
        Some(g) => g.sample(&mut arr_rng),
        None => f64::INFINITY,
    };
    loop {
        let t_bay = bay.unwrap_or(f64::INFINITY);
        let t_chg = charging.peek().map_or(f64::INFINITY, |r| r.0 .0);
        let t_next = next_arrival.min(t_bay).min(t_chg);
        if i >= cfg.horizon_arrivals && queue.is_empty() && bay.is_none() {
            break;
        }
        if !t_next.is_finite() {
            // idle station with no arrival process
            break;
        }
        if i < cfg.horizon_arrivals || t_next != next_arrival {
            clock.advance(t_next, evs, &mut batches);
        }
        events += 1;
        if t_next == t_bay {
            bay = None;
            evs -= 1;
            assert!(
                charging.len() < q_total as usize,
                "no free charger for a depleted battery"
            );
            charging.push(Reverse(At(t_next + charge.sample(&mut chg_rng))));
        } else if t_next == t_chg {
            charging.pop();
            full += 1;
        } else {
            if i >= cfg.horizon_arrivals {
                clock.batch = None;
                next_arrival = f64::INFINITY;
                continue;
            }
            let b = batch_of(i, warm, per_batch, cfg.batch_count);
            clock.batch = b;
            i += 1;
            next_arrival = t_next
                + gap
                    .as_ref()
                    .map_or(f64::INFINITY, |g| g.sample(&mut arr_rng));
            if let Some(b) = b {
                batches[b].arrivals += 1;
            }
            if evs == cap {
                if let Some(b) = b {
                    batches[b].blocked += 1;
                }
            } else {
                evs += 1;
                queue.push_back((t_next, b));
            }
        }
        start_swap(t_next, &mut queue, &mut full, &mut bay, &mut batches);
        conserve(full, charging.len(), bay.is_some());
    }
    Ok(finish(&batches, events))
}

fn simulate_swap_slotted(input: &SwapStationInput<f64>, cfg: &SimConfig) -> Result<SimResult> {
    let q_total = input.batteries;
    let cap = input.ev_buffer;
    let ts = input.swap_time;
    let rate = input.arrival_rate;
    let mut arr_rng = stream(cfg.seed, STREAM_ARRIVALS);
    let mut chg_rng = stream(cfg.seed, STREAM_CHARGES);
    let gap = interarrival(rate)?;
    let charge = exp_mean(input.charge_time)?;

    let per_slot = rate * ts;
    let slots = if per_slot > 0.0 {
        (cfg.horizon_arrivals as f64 / per_slot).ceil() as u64
    } else {
        cfg.horizon_arrivals
    };
    let (warm, per_batch) = cfg.split(slots);
    let mut full_slots = vec![0u64; cfg.batch_count];
    let mut ev_sum = vec![0u64; cfg.batch_count];
    let mut seen = vec![0u64; cfg.batch_count];

    let mut evs = 0u32;
    let mut full = q_total;
    // completion times of batteries on chargers
    let mut charging: Vec<f64> = Vec::with_capacity(q_total as usize);
    let mut next_arrival = match &gap {
        Some(g) => g.sample(&mut arr_rng),
        None => f64::INFINITY,
    };
    let mut events = 0u64;

    for k in 0..slots {
        let t = k as f64 * ts;
        let t_end = t + ts;
        if let Some(b) = batch_of(k, warm, per_batch, cfg.batch_count) {
            seen[b] += 1;
            ev_sum[b] += evs as u64;
            full_slots[b] += u64::from(evs == cap);
        }
        let served = u32::from(evs >= 1 && full >= 1);
        let mut arrivals = 0u32;
        while next_arrival <= t_end {
            arrivals += 1;
            events += 1;
            next_arrival += gap
                .as_ref()
                .map_or(f64::INFINITY, |g| g.sample(&mut arr_rng));
        }
        let before = charging.len();
        charging.retain(|&done| done > t_end);
        let completed = (before - charging.len()) as u32;
        events += completed as u64;
        full = full - served + completed;
        evs = (evs - served + arrivals).min(cap);
        if served == 1 {
            events += 1;
            charging.push(t_end + charge.sample(&mut chg_rng));
        }
        debug_assert_eq!(
            full as usize + charging.len(),
            q_total as usize,
            "battery count drifted"
        );
    }

    let mut blocking = Vec::with_capacity(cfg.batch_count);
    let mut occupancy = Vec::with_capacity(cfg.batch_count);
    let mut wait = Vec::with_capacity(cfg.batch_count);
    for b in 0..cfg.batch_count {
        let n = seen[b].max(1) as f64;
        let pv = full_slots[b] as f64 / n;
        let mean = ev_sum[b] as f64 / n;
        blocking.push(pv);
        occupancy.push(mean);
        // the analytic model's own estimator: N̄ / (λ(1 − P_V)) − t_s
        wait.push(if rate > 0.0 && pv < 1.0 {
            mean / (rate * (1.0 - pv)) - ts
        } else {
            0.0
        });
    }
    Ok(SimResult {
        blocking: Estimate::from_batches(&blocking),
        wait: Estimate::from_batches(&wait),
        mean_in_system: Estimate::from_batches(&occupancy),
        events_processed: events,
    })
}

/// One analytic-versus-simulated line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub analytic: f64,
    pub simulated: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub z_score: f64,
}

impl ComparisonRow {
    fn new(metric: &'static str, analytic: f64, est: &Estimate) -> Self {
        ComparisonRow {
            metric,
            analytic,
            simulated: est.mean,
            stderr: est.stderr,
            ci95: est.interval(0.95),
            z_score: est.z_score(analytic),
        }
    }

    /// |z| within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.z_score.abs() <= k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesComparison {
    pub rows: Vec<ComparisonRow>,
    pub events_processed: u64,
}

/// Exact M/M/Q/V metrics against the simulator.
pub fn plugin_metrics_vs_des(
    input: &PluginStationInput<f64>,
    cfg: &SimConfig,
) -> Result<DesComparison> {
    let exact = mmqv_steady_state(input)?;
    let sim = simulate_mmqv(input, cfg)?;
    Ok(DesComparison {
        rows: vec![
            ComparisonRow::new("blocking", exact.blocking_probability, &sim.blocking),
            ComparisonRow::new("wait_h", exact.mean_wait, &sim.wait),
            ComparisonRow::new("mean_in_system", exact.mean_in_system, &sim.mean_in_system),
        ],
        events_processed: sim.events_processed,
    })
}

/// Embedded-chain metrics against the simulator.
pub fn swap_metrics_vs_des(
    input: &SwapStationInput<f64>,
    cfg: &SimConfig,
    discipline: SwapDiscipline,
) -> Result<DesComparison> {
    let exact = swap_steady_state(input)?;
    let sim = simulate_swap_station(input, cfg, discipline)?;
    Ok(DesComparison {
        rows: vec![
            ComparisonRow::new("blocking", exact.blocking_probability, &sim.blocking),
            ComparisonRow::new("wait_h", exact.mean_wait, &sim.wait),
            ComparisonRow::new(
                "mean_in_system",
                exact.mean_evs_in_station,
                &sim.mean_in_system,
            ),
        ],
        events_processed: sim.events_processed,
    })
}

/// Uniform draw helper shared with the spatial sampler.
pub(crate) fn unit<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
