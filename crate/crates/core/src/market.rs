//! Passenger demand, fleet conservation and matching frictions.
//!
//! Internal units: hours, vehicles per hour, dollars, kW and kWh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Infeasibility, Result};
use crate::queueing::{mmqv_continuous, PluginStationInput};
use crate::scalar::{lit, to_f64, Scalar};
use crate::swap::{swap_steady_state, SwapStationInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    PlugIn,
    Swap,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::PlugIn => "plug-in",
            Strategy::Swap => "swap",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plug-in" | "plugin" => Ok(Strategy::PlugIn),
            "swap" | "swapping" => Ok(Strategy::Swap),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Exogenous model parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams<T> {
    /// λ0, potential trips per hour.
    pub potential_demand: T,
    /// α, dollars per hour of passenger waiting.
    pub value_of_time: T,
    /// τ, average trip duration, hours.
    pub trip_duration: T,
    /// ε, logit sensitivity per dollar.
    pub logit_sensitivity: T,
    /// c0, logit offset in dollars.
    pub logit_offset: T,
    /// δ, mean state of charge on arrival at a station.
    pub arrival_soc: T,
    /// s, charging power, kW.
    pub charge_speed: T,
    /// C, battery capacity, kWh.
    pub battery_capacity: T,
    /// l, average power draw while operating, kW.
    pub consumption_rate: T,
    /// p_e, dollars per kWh.
    pub electricity_price: T,
    /// C_av, dollars per vehicle-hour.
    pub vehicle_cost: T,
    /// A, pickup matching scale in hours·√vehicles.
    pub matching_scale_pax: T,
    /// B, station search scale in hours·√stations.
    pub matching_scale_chg: T,
    /// Constant battery swap time, hours.
    pub swap_service_time: T,
    /// φ_vc, dollars per plug-in charger-hour.
    pub infra_cost_plugin: T,
    /// φ_bs, dollars per swap charger-hour.
    pub infra_cost_swap: T,
    /// Chargers (and stored batteries) per swap station.
    pub swap_batteries: u32,
    /// EV room per swap station.
    pub swap_buffer: u32,
    /// Room per plug-in station, waiting plus charging.
    pub plugin_capacity: u32,
}

pub(crate) const PARAM_NAMES: [&str; 16] = [
    "potential_demand",
    "value_of_time",
    "trip_duration",
    "logit_sensitivity",
    "logit_offset",
    "arrival_soc",
    "charge_speed",
    "battery_capacity",
    "consumption_rate",
    "electricity_price",
    "vehicle_cost",
    "matching_scale_pax",
    "matching_scale_chg",
    "swap_service_time",
    "infra_cost_plugin",
    "infra_cost_swap",
];

impl<T: Scalar> ModelParams<T> {
    /// The New York City parameter block, converted to hours.
    pub fn nominal() -> Self {
        ModelParams {
            potential_demand: lit(944.0 * 60.0),
            value_of_time: lit(2.58 * 60.0),
            trip_duration: lit(16.3 / 60.0),
            logit_sensitivity: lit(0.155),
            logit_offset: lit(15.48),
            arrival_soc: lit(0.1),
            charge_speed: lit(22.0),
            battery_capacity: lit(25.0),
            consumption_rate: lit(2.21),
            electricity_price: lit(0.12),
            vehicle_cost: lit(15.0),
            matching_scale_pax: lit(230.0 / 60.0),
            matching_scale_chg: lit(230.0 / 60.0),
            swap_service_time: lit(2.0 / 60.0),
            infra_cost_plugin: lit(8.0),
            infra_cost_swap: lit(40.0),
            swap_batteries: 6,
            swap_buffer: 15,
            plugin_capacity: 20,
        }
    }

    /// Nominal block with the matching scales and consumption rate that
    /// reproduce the published sweep data: A = B = 226 min·√veh and
    /// l = 36/16.3 kW.
    pub fn figure_calibrated() -> Self {
        ModelParams {
            matching_scale_pax: lit(226.0 / 60.0),
            matching_scale_chg: lit(226.0 / 60.0),
            consumption_rate: lit(36.0 / 16.3),
            ..Self::nominal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in PARAM_NAMES {
            let v = self.get(name).expect("listed name");
            let ok = if name == "arrival_soc" {
                v >= T::zero() && v < T::one()
            } else {
                v > T::zero() && v.is_finite()
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "parameter {name} out of range: {v}"
                )));
            }
        }
        if self.swap_batteries == 0 || self.swap_buffer == 0 || self.plugin_capacity == 0 {
            return Err(Error::invalid("station sizes must be at least 1"));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<T> {
        Some(match name {
            "potential_demand" => self.potential_demand,
            "value_of_time" => self.value_of_time,
            "trip_duration" => self.trip_duration,
            "logit_sensitivity" => self.logit_sensitivity,
            "logit_offset" => self.logit_offset,
            "arrival_soc" => self.arrival_soc,
            "charge_speed" => self.charge_speed,
            "battery_capacity" => self.battery_capacity,
            "consumption_rate" => self.consumption_rate,
            "electricity_price" => self.electricity_price,
            "vehicle_cost" => self.vehicle_cost,
            "matching_scale_pax" => self.matching_scale_pax,
            "matching_scale_chg" => self.matching_scale_chg,
            "swap_service_time" => self.swap_service_time,
            "infra_cost_plugin" => self.infra_cost_plugin,
            "infra_cost_swap" => self.infra_cost_swap,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: T) -> Result<()> {
        let slot = match name {
            "potential_demand" => &mut self.potential_demand,
            "value_of_time" => &mut self.value_of_time,
            "trip_duration" => &mut self.trip_duration,
            "logit_sensitivity" => &mut self.logit_sensitivity,
            "logit_offset" => &mut self.logit_offset,
            "arrival_soc" => &mut self.arrival_soc,
            "charge_speed" => &mut self.charge_speed,
            "battery_capacity" => &mut self.battery_capacity,
            "consumption_rate" => &mut self.consumption_rate,
            "electricity_price" => &mut self.electricity_price,
            "vehicle_cost" => &mut self.vehicle_cost,
            "matching_scale_pax" => &mut self.matching_scale_pax,
            "matching_scale_chg" => &mut self.matching_scale_chg,
            "swap_service_time" => &mut self.swap_service_time,
            "infra_cost_plugin" => &mut self.infra_cost_plugin,
            "infra_cost_swap" => &mut self.infra_cost_swap,
            other => return Err(Error::invalid(format!("unknown parameter `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// Energy replenished per visit, (1−δ)C, kWh.
    pub fn energy_per_visit(&self) -> T {
        (T::one() - self.arrival_soc) * self.battery_capacity
    }

    /// Plug-in charging time, also the mean battery charging time at a swap
    /// station: (1−δ)C/s hours.
    pub fn charge_time(&self) -> T {
        self.energy_per_visit() / self.charge_speed
    }

    /// Operating hours between visits, (1−δ)C/l.
    pub fn range_hours(&self) -> T {
        self.energy_per_visit() / self.consumption_rate
    }

    /// Fewest stations for which any vehicle can finish its search within
    /// one battery range: (B l / ((1−δ)C))².
    pub fn station_supply_bound(&self) -> T {
        let r = self.matching_scale_chg / self.range_hours();
        r * r
    }

    pub fn infra_cost_per_charger(&self, strategy: Strategy) -> T {
        match strategy {
            Strategy::PlugIn => self.infra_cost_plugin,
            Strategy::Swap => self.infra_cost_swap,
        }
    }
}

/// Charging strategy and infrastructure (K, Q, V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationPlan<T> {
    pub strategy: Strategy,
    pub stations: T,
    pub chargers: T,
    pub capacity: u32,
}

impl<T: Scalar> StationPlan<T> {
    pub fn plugin(stations: T, chargers: T, capacity: u32) -> Self {
        StationPlan {
            strategy: Strategy::PlugIn,
            stations,
            chargers,
            capacity,
        }
    }

    /// Swap plan; Q and V come from the parameters and are never searched.
    pub fn swap(stations: T, params: &ModelParams<T>) -> Self {
        StationPlan {
            strategy: Strategy::Swap,
            stations,
            chargers: lit(params.swap_batteries as f64),
            capacity: params.swap_buffer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stations > T::zero()) || !self.stations.is_finite() {
            return Err(Error::invalid(format!(
                "station count must be positive, got {}",
                self.stations
            )));
        }
        if !(self.chargers > T::zero()) || !self.chargers.is_finite() {
            return Err(Error::invalid(format!(
                "charger count must be positive, got {}",
                self.chargers
            )));
        }
        if self.strategy == Strategy::Swap && self.chargers.fract() != T::zero() {
            return Err(Error::invalid(
                "swap stations need a whole number of chargers",
            ));
        }
        if self.chargers.ceil() > lit(self.capacity as f64) {
            return Err(Error::invalid(format!(
                "{} chargers exceed station capacity {}",
                self.chargers, self.capacity
            )));
        }
        Ok(())
    }

    /// Total chargers K·Q.
    pub fn total_chargers(&self) -> T {
        self.stations * self.chargers
    }
}

/// λ0 / (1 + e^{ε(c − c0)}).
pub fn logit_demand<T: Scalar>(cost: T, params: &ModelParams<T>) -> T {
    let z = params.logit_sensitivity * (cost - params.logit_offset);
    if z > T::zero() {
        let e = (-z).exp();
        params.potential_demand * e / (T::one() + e)
    } else {
        params.potential_demand / (T::one() + z.exp())
    }
}

/// Generalized travel cost that induces demand λ.
pub fn inverse_logit<T: Scalar>(demand: T, params: &ModelParams<T>) -> Result<T> {
    if !(demand > T::zero() && demand < params.potential_demand) {
        return Err(Error::invalid(format!(
            "demand {demand} outside (0, {})",
            params.potential_demand
        )));
    }
    Ok(inverse_logit_unchecked(demand, params))
}

#[inline]
fn inverse_logit_unchecked<T: Scalar>(demand: T, params: &ModelParams<T>) -> T {
    // ln(λ0/λ − 1) = ln((λ0 − λ)/λ)
    let odds = (params.potential_demand - demand) / demand;
    params.logit_offset + odds.ln() / params.logit_sensitivity
}

/// Passenger pickup wait w^c and vehicle idle time w^v.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaxTimes<T> {
    pub pax_wait: T,
    pub vehicle_idle: T,
}

/// Smallest operating fleet that admits a matching equilibrium at demand λ:
/// (27/4)^{1/3} (Aλ)^{2/3} + λτ.
pub fn pax_threshold<T: Scalar>(demand: T, params: &ModelParams<T>) -> T {
    let c = lit::<T>(6.75).cbrt();
    c * (params.matching_scale_pax * demand).powf(lit(2.0 / 3.0)) + demand * params.trip_duration
}

/// Smaller positive root of λw³ + (λτ − N1)w² + A² = 0, if any.
///
/// With b = τ − N1/λ < 0 and d = A²/λ the roots have the trigonometric form
/// w = (|b|/3)(1 + 2cos(θ/3 − 2π/3)), cos θ = 1 − 27d/(2|b|³); the middle root
/// is rewritten as 2sin²(θ/6) + √3 sin(θ/3) to avoid cancellation at small d.
#[inline]
pub(crate) fn pax_wait_root<T: Scalar>(demand: T, operating: T, a_scale: T, tau: T) -> Option<T> {
    let b = tau - operating / demand;
    if !(b < T::zero()) {
        return None;
    }
    let d = a_scale * a_scale / demand;
    let mb = -b;
    let x = lit::<T>(13.5) * d / (mb * mb * mb);
    if !(x <= lit(2.0)) {
        return None;
    }
    let theta = lit::<T>(2.0) * (x * lit(0.5)).sqrt().min(T::one()).asin();
    let s6 = (theta / lit(6.0)).sin();
    let mut w =
        mb / lit(3.0) * (lit::<T>(2.0) * s6 * s6 + lit::<T>(3.0).sqrt() * (theta / lit(3.0)).sin());
    // one guarded Newton step on h(w) = w³ + b w² + d
    let h = w * w * (w + b) + d;
    let dh = w * (lit::<T>(3.0) * w + lit::<T>(2.0) * b);
    if dh != T::zero() {
        let cand = w - h / dh;
        let hc = cand * cand * (cand + b) + d;
        if cand > T::zero() && hc.abs() < h.abs() {
            w = cand;
        }
    }
    Some(w)
}

pub fn solve_pax_times<T: Scalar>(
    demand: T,
    operating: T,
    params: &ModelParams<T>,
) -> Result<PaxTimes<T>> {
    if !(demand > T::zero()) || !demand.is_finite() {
        return Err(Error::invalid(format!(
            "demand must be positive, got {demand}"
        )));
    }
    let a = params.matching_scale_pax;
    match pax_wait_root(demand, operating, a, params.trip_duration) {
        Some(w) => Ok(PaxTimes {
            pax_wait: w,
            vehicle_idle: a * a / (demand * w * w),
        }),
        None => Err(Infeasibility::PaxTimes {
            demand: to_f64(demand),
            operating: to_f64(operating),
            threshold: to_f64(pax_threshold(demand, params)),
        }
        .into()),
    }
}

/// t_m = B / √(K (1 − P_V)).
pub fn search_time<T: Scalar>(stations: T, blocking: T, params: &ModelParams<T>) -> T {
    params.matching_scale_chg / (stations * (T::one() - blocking)).sqrt()
}

/// Fleet split implied by a charging rate γ at a given plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FleetState<T> {
    pub charging_rate: T,
    pub blocking: T,
    pub station_wait: T,
    pub search_time: T,
    pub service_time: T,
    /// N1.
    pub operating: T,
    /// N2m.
    pub searching: T,
    /// N2w.
    pub waiting: T,
    /// N2s.
    pub in_service: T,
    /// N2 = N2m + N2w + N2s.
    pub charging_shift: T,
    /// N.
    pub total: T,
}

/// Station blocking, wait and service time at per-station arrival rate γ/K.
pub fn station_metrics<T: Scalar>(
    gamma: T,
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
) -> Result<(T, T, T)> {
    let rate = gamma / plan.stations;
    match plan.strategy {
        Strategy::PlugIn => {
            let ts = params.charge_time();
            let m = mmqv_continuous(&PluginStationInput::new(
                rate,
                ts,
                plan.chargers,
                plan.capacity,
            )?)?;
            Ok((m.blocking_probability, m.mean_wait, ts))
        }
        Strategy::Swap => {
            let q = plan
                .chargers
                .to_u32()
                .ok_or_else(|| Error::invalid("swap charger count out of range"))?;
            let input = SwapStationInput::new(
                rate,
                params.swap_service_time,
                params.charge_time(),
                q,
                plan.capacity,
            )?;
            let s = swap_steady_state(&input)?;
            Ok((
                s.blocking_probability,
                s.mean_wait,
                params.swap_service_time,
            ))
        }
    }
}

pub fn fleet_from_gamma<T: Scalar>(
    gamma: T,
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
) -> Result<FleetState<T>> {
    plan.validate()?;
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "charging rate must be nonnegative, got {gamma}"
        )));
    }
    let (pv, tw, ts) = station_metrics(gamma, plan, params)?;
    let tm = search_time(plan.stations, pv, params);
    let searching = gamma * tm;
    let waiting = gamma * tw;
    let in_service = gamma * ts;
    let energy_fleet = gamma * params.range_hours();
    let charging_shift = searching + waiting + in_service;
    Ok(FleetState {
        charging_rate: gamma,
        blocking: pv,
        station_wait: tw,
        search_time: tm,
        service_time: ts,
        operating: energy_fleet - searching,
        searching,
        waiting,
        in_service,
        charging_shift,
        total: energy_fleet + waiting + in_service,
    })
}

/// γ0 (where N̂1 returns to zero), γ* (its maximizer) and N̂1(γ*).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaDomain<T> {
    pub gamma_zero: T,
    pub gamma_peak: T,
    pub operating_peak: T,
}

pub(crate) fn check_station_supply<T: Scalar>(
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
) -> Result<()> {
    plan.validate()?;
    let bound = params.station_supply_bound();
    if !(plan.stations > bound) {
        return Err(Infeasibility::StationSupply {
            stations: to_f64(plan.stations),
            bound: to_f64(bound),
        }
        .into());
    }
    Ok(())
}

fn operating_at<T: Scalar>(gamma: T, plan: &StationPlan<T>, params: &ModelParams<T>) -> Result<T> {
    Ok(fleet_from_gamma(gamma, plan, params)?.operating)
}

/// Maximizer of N̂1 over γ > 0: geometric bracketing then golden section.
pub fn gamma_peak<T: Scalar>(plan: &StationPlan<T>, params: &ModelParams<T>) -> Result<(T, T)> {
    check_station_supply(plan, params)?;
    let two = lit::<T>(2.0);
    let mut lo = T::zero();
    let mut mid = plan.stations;
    let mut f_mid = operating_at(mid, plan, params)?;
    let mut hi = mid * two;
    let mut f_hi = operating_at(hi, plan, params)?;
    let mut steps = 0;
    while f_hi > f_mid {
        lo = mid;
        mid = hi;
        f_mid = f_hi;
        hi = hi * two;
        f_hi = operating_at(hi, plan, params)?;
        steps += 1;
        if steps > 200 {
            return Err(Error::numeric("operating fleet has no interior maximum"));
        }
    }
    let _ = f_mid;
    let inv_phi = lit::<T>(0.618_033_988_749_894_9);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = operating_at(x1, plan, params)?;
    let mut f2 = operating_at(x2, plan, params)?;
    let tol = lit::<T>(1e-10);
    for _ in 0..200 {
        if hi - lo <= tol * (x1.abs() + x2.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = operating_at(x2, plan, params)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = operating_at(x1, plan, params)?;
        }
    }
    let (g, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok((g, f))
}

pub fn gamma_domain<T: Scalar>(
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
) -> Result<GammaDomain<T>> {
    let (peak, top) = gamma_peak(plan, params)?;
    // the matching condition needs N1 > 0, and logit demand is positive
    // everywhere, so the demand half of the condition always holds
    if !(top > T::zero()) {
        return Err(Infeasibility::NoDemand.into());
    }
    let mut lo = peak;
    let mut hi = peak * lit(2.0);
    let mut steps = 0;
    while operating_at(hi, plan, params)? > T::zero() {
        lo = hi;
        hi = hi * lit(2.0);
        steps += 1;
        if steps > 400 {
            return Err(Error::numeric("operating fleet never returns to zero"));
        }
    }
    for _ in 0..200 {
        let m = lo + (hi - lo) * lit(0.5);
        if m <= lo || m >= hi {
            break;
        }
        if operating_at(m, plan, params)? > T::zero() {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(GammaDomain {
        gamma_zero: lo + (hi - lo) * lit(0.5),
        gamma_peak: peak,
        operating_peak: top,
    })
}

/// Platform profit given a precomputed fleet; −∞ where no equilibrium exists.
#[inline]
pub fn profit_with_fleet<T: Scalar>(
    demand: T,
    fleet: &FleetState<T>,
    params: &ModelParams<T>,
) -> T {
    if !(demand > T::zero() && demand < params.potential_demand) {
        return T::neg_infinity();
    }
    let Some(w) = pax_wait_root(
        demand,
        fleet.operating,
        params.matching_scale_pax,
        params.trip_duration,
    ) else {
        return T::neg_infinity();
    };
    let cost = inverse_logit_unchecked(demand, params);
    demand * (cost - params.value_of_time * w)
        - fleet.charging_rate * params.energy_per_visit() * params.electricity_price
        - fleet.total * params.vehicle_cost
}

/// Π = λ(F⁻¹(λ/λ0) − α w^c) − γ(1−δ)C p_e − N C_av, or −∞ when (λ, γ) is
/// infeasible.
pub fn platform_profit<T: Scalar>(
    demand: T,
    gamma: T,
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
) -> T {
    match fleet_from_gamma(gamma, plan, params) {
        Ok(f) => profit_with_fleet(demand, &f, params),
        Err(_) => T::neg_infinity(),
    }
}

/// Largest fare revenue λ·F⁻¹(λ/λ0) any demand level can earn, ignoring
/// pickup waits; an upper bound on platform revenue.
pub fn revenue_ceiling<T: Scalar>(params: &ModelParams<T>) -> T {
    let l0 = params.potential_demand;
    let rev = |l: T| l * inverse_logit_unchecked(l, params);
    // coarse scan, then golden section around the best sample
    let n = 256usize;
    let step = l0 / lit(n as f64);
    let mut best = 1usize;
    for i in 1..n {
        if rev(step * lit(i as f64)) > rev(step * lit(best as f64)) {
            best = i;
        }
    }
    let mut lo = step * lit(best as f64 - 1.0);
    let mut hi = step * lit(best as f64 + 1.0);
    let inv_phi = lit::<T>(0.618_033_988_749_894_9);
    for _ in 0..100 {
        let x1 = hi - inv_phi * (hi - lo);
        let x2 = lo + inv_phi * (hi - lo);
        if rev(x1) < rev(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let mid = (lo + hi) * lit(0.5);
    rev(mid).max(rev(step * lit(best as f64)))
}

/// Smallest cost the platform incurs per unit of charging rate: every visit
/// ties up a vehicle for its range plus the service time, and buys
/// (1−δ)C of energy.
pub fn cost_per_visit_floor<T: Scalar>(plan: &StationPlan<T>, params: &ModelParams<T>) -> T {
    let service = match plan.strategy {
        Strategy::PlugIn => params.charge_time(),
        Strategy::Swap => params.swap_service_time,
    };
    (params.range_hours() + service) * params.vehicle_cost
        + params.energy_per_visit() * params.electricity_price
}

/// λ0 ∫_c^∞ F_p(x) dx = (λ0/ε) ln(1 + e^{−ε(c − c0)}).
pub fn consumer_surplus<T: Scalar>(cost: T, params: &ModelParams<T>) -> T {
    let z = -params.logit_sensitivity * (cost - params.logit_offset);
    let softplus = z.max(T::zero()) + (-z.abs()).exp().ln_1p();
    params.potential_demand / params.logit_sensitivity * softplus
}

/// All endogenous variables at one (λ, γ, plan).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketEquilibrium<T> {
    /// p_f, dollars per trip.
    pub fare: T,
    /// λ, trips per hour.
    pub demand: T,
    /// γ, station visits per hour.
    pub charging_rate: T,
    /// w^c, hours.
    pub pax_wait: T,
    /// w^v, hours.
    pub vehicle_idle: T,
    pub fleet: T,
    pub operating: T,
    pub charging_shift: T,
    pub searching: T,
    pub waiting: T,
    pub in_service: T,
    /// t_m, hours.
    pub search_time: T,
    /// t_w, hours.
    pub station_wait: T,
    /// Station service time t_s, hours.
    pub service_time: T,
    pub blocking: T,
    /// c = p_f + α w^c.
    pub travel_cost: T,
}

impl<T: Scalar> MarketEquilibrium<T> {
    pub fn assemble(
        demand: T,
        gamma: T,
        plan: &StationPlan<T>,
        params: &ModelParams<T>,
    ) -> Result<Self> {
        let fleet = fleet_from_gamma(gamma, plan, params)?;
        Self::from_fleet(demand, &fleet, params)
    }

    pub fn from_fleet(demand: T, fleet: &FleetState<T>, params: &ModelParams<T>) -> Result<Self> {
        let cost = inverse_logit(demand, params)?;
        let pax = solve_pax_times(demand, fleet.operating, params)?;
        Ok(MarketEquilibrium {
            fare: cost - params.value_of_time * pax.pax_wait,
            demand,
            charging_rate: fleet.charging_rate,
            pax_wait: pax.pax_wait,
            vehicle_idle: pax.vehicle_idle,
            fleet: fleet.total,
            operating: fleet.operating,
            charging_shift: fleet.charging_shift,
            searching: fleet.searching,
            waiting: fleet.waiting,
            in_service: fleet.in_service,
            search_time: fleet.search_time,
            station_wait: fleet.station_wait,
            service_time: fleet.service_time,
            blocking: fleet.blocking,
            travel_cost: cost,
        })
    }

    /// Revenue minus energy and vehicle costs, $/h.
    pub fn profit(&self, params: &ModelParams<T>) -> T {
        self.demand * self.fare
            - self.charging_rate * params.energy_per_visit() * params.electricity_price
            - self.fleet * params.vehicle_cost
    }

    /// Largest relative violation among the conservation and balance
    /// identities the equilibrium must satisfy.
    pub fn closure_residual(&self, params: &ModelParams<T>) -> T {
        let rel = |a: T, b: T| {
            let scale = a.abs().max(b.abs()).max(T::epsilon());
            (a - b).abs() / scale
        };
        let g = self.charging_rate;
        [
            rel(self.fleet, self.operating + self.charging_shift),
            rel(
                self.operating,
                self.demand * (self.vehicle_idle + self.pax_wait + params.trip_duration),
            ),
            rel(
                self.charging_shift,
                self.searching + self.waiting + self.in_service,
            ),
            rel(self.searching, g * self.search_time),
            rel(self.waiting, g * self.station_wait),
            rel(self.in_service, g * self.service_time),
            rel(
                (self.fleet - self.waiting - self.in_service) * params.consumption_rate,
                g * params.energy_per_visit(),
            ),
            rel(
                self.travel_cost,
                self.fare + params.value_of_time * self.pax_wait,
            ),
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }
}

/// Surplus, profit, infrastructure cost and their welfare total, $/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareBreakdown<T> {
    pub surplus: T,
    pub profit: T,
    pub infra_cost: T,
    pub welfare: T,
}

pub fn social_welfare<T: Scalar>(
    equilibrium: &MarketEquilibrium<T>,
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
) -> WelfareBreakdown<T> {
    let surplus = consumer_surplus(equilibrium.travel_cost, params);
    let profit = equilibrium.profit(params);
    let infra_cost = params.infra_cost_per_charger(plan.strategy) * plan.total_chargers();
    WelfareBreakdown {
        surplus,
        profit,
        infra_cost,
        welfare: surplus + profit - infra_cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_is_half_at_offset() {
        let p = ModelParams::<f64>::nominal();
        assert!((logit_demand(p.logit_offset, &p) - p.potential_demand / 2.0).abs() < 1e-9);
        assert!(
            (inverse_logit(p.potential_demand / 2.0, &p).unwrap() - p.logit_offset).abs() < 1e-12
        );
        assert!(logit_demand(1e6, &p) < 1e-100);
        assert!(inverse_logit(0.0, &p).is_err());
    }

    #[test]
    fn parameter_names_round_trip() {
        let mut p = ModelParams::<f64>::nominal();
        for name in PARAM_NAMES {
            let v = p.get(name).unwrap();
            p.set(name, v * 2.0).unwrap();
            assert_eq!(p.get(name).unwrap(), v * 2.0);
        }
        assert!(p.set("beta", 1.0).is_err());
    }

    #[test]
    fn search_time_square_root_law() {
        let p = ModelParams::<f64>::nominal();
        let b = p.matching_scale_chg;
        assert!((search_time(b * b, 0.0, &p) - 1.0).abs() < 1e-15);
        let t1 = search_time(100.0, 0.2, &p);
        assert!((search_time(400.0, 0.2, &p) - t1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn supply_bound_rejects_sparse_networks() {
        let p = ModelParams::<f64>::nominal();
        let bound = p.station_supply_bound();
        let plan = StationPlan::plugin(bound * 0.9, 4.0, 20);
        assert!(matches!(
            gamma_domain(&plan, &p),
            Err(Error::Infeasible(Infeasibility::StationSupply { .. }))
        ));
    }
}
