//! Bi-level search: the platform picks (λ, γ) to maximize profit for a given
//! plan, and the planner picks the plan to maximize social welfare.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Infeasibility, Result};
use crate::market::{
    check_station_supply, cost_per_visit_floor, fleet_from_gamma, gamma_peak, profit_with_fleet,
    revenue_ceiling, social_welfare, FleetState, MarketEquilibrium, ModelParams, StationPlan,
    Strategy,
};
use crate::scalar::{from_usize, lit, Scalar};

/// Inner (λ, γ) grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub lambda_points: usize,
    pub gamma_points: usize,
    pub refine_rounds: usize,
    pub refine_shrink: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_points: 64,
            gamma_points: 64,
            refine_rounds: 3,
            refine_shrink: 0.25,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_points < 16 || self.gamma_points < 16 {
            return Err(Error::invalid(
                "inner grid needs at least 16 points per axis",
            ));
        }
        check_shrink(self.refine_shrink)
    }
}

fn check_shrink(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!(
            "refinement shrink must lie in (0, 1), got {s}"
        )));
    }
    Ok(())
}

/// Outer (K, Q) grid plus the inner grid used at every outer cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanGrid {
    pub inner: GridSpec,
    pub station_points: usize,
    pub charger_points: usize,
    pub refine_rounds: usize,
    pub refine_shrink: f64,
}

impl Default for PlanGrid {
    fn default() -> Self {
        PlanGrid {
            inner: GridSpec::default(),
            station_points: 64,
            charger_points: 32,
            refine_rounds: 2,
            refine_shrink: 0.25,
        }
    }
}

impl PlanGrid {
    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if self.station_points < 2 || self.charger_points < 2 {
            return Err(Error::invalid(
                "outer grid needs at least 2 points per axis",
            ));
        }
        check_shrink(self.refine_shrink)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchRange<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> SearchRange<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo > T::zero() && hi > lo) || !hi.is_finite() {
            return Err(Error::invalid(format!("bad search range [{lo}, {hi}]")));
        }
        Ok(SearchRange { lo, hi })
    }
}

/// Station and charger ranges for the outer search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchRanges<T> {
    pub stations: SearchRange<T>,
    pub chargers: SearchRange<T>,
}

impl<T: Scalar> SearchRanges<T> {
    pub fn default_for(params: &ModelParams<T>) -> Self {
        SearchRanges {
            stations: SearchRange {
                lo: lit(10.0),
                hi: lit(1000.0),
            },
            chargers: SearchRange {
                lo: T::one(),
                hi: lit(params.plugin_capacity as f64),
            },
        }
    }
}

/// A shrinking window inside a fixed box, sampled at cell midpoints.
#[derive(Debug, Clone, Copy)]
struct Window<T> {
    box_lo: T,
    box_hi: T,
    lo: T,
    hi: T,
}

impl<T: Scalar> Window<T> {
    fn new(lo: T, hi: T) -> Self {
        Window {
            box_lo: lo,
            box_hi: hi,
            lo,
            hi,
        }
    }

    fn points(&self, n: usize) -> Vec<T> {
        let step = (self.hi - self.lo) / from_usize(n);
        (0..n)
            .map(|i| self.lo + (from_usize::<T>(i) + lit(0.5)) * step)
            .collect()
    }

    fn recenter(&mut self, center: T, shrink: T) {
        let width = (self.hi - self.lo) * shrink;
        let hi = (center + width * lit(0.5)).min(self.box_hi);
        let lo = (hi - width).max(self.box_lo);
        self.lo = lo;
        self.hi = (lo + width).min(self.box_hi);
    }
}

/// Profit-maximizing operations for one plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationsOptimum<T> {
    pub demand: T,
    pub charging_rate: T,
    pub equilibrium: MarketEquilibrium<T>,
    pub profit: T,
    /// Upper end of the γ search box.
    pub gamma_cap: T,
    /// Incumbent objective after each round.
    pub round_best: Vec<T>,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Incumbent<T> {
    value: T,
    x: T,
    y: T,
}

impl<T: Scalar> Incumbent<T> {
    fn none() -> Self {
        Incumbent {
            value: T::neg_infinity(),
            x: T::infinity(),
            y: T::infinity(),
        }
    }

    /// Higher value wins; ties go to the smaller first then second coordinate.
    fn offer(&mut self, value: T, x: T, y: T) {
        if !(value > T::neg_infinity()) {
            return;
        }
        let better = value > self.value
            || (value == self.value && (x < self.x || (x == self.x && y < self.y)));
        if better {
            *self = Incumbent { value, x, y };
        }
    }

    fn found(&self) -> bool {
        self.value > T::neg_infinity()
    }
}

/// Grid search over λ ∈ (0, λ0) and γ ∈ (0, γ_max], with window refinement.
///
/// γ_max is the smaller of γ* (beyond it a smaller γ gives the same operating
/// fleet with fewer vehicles and less energy) and the rate at which the
/// cheapest possible fleet already costs more than the revenue ceiling minus
/// the best profit found. If the first pass ends with a profit that loosens
/// the second bound, the pass is repeated on the wider box.
pub fn optimize_operations<T: Scalar>(
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
    grid: &GridSpec,
) -> Result<OperationsOptimum<T>> {
    grid.validate()?;
    params.validate()?;
    check_station_supply(plan, params)?;
    let (peak, _) = gamma_peak(plan, params)?;
    let ceiling = revenue_ceiling(params);
    let unit = cost_per_visit_floor(plan, params);
    let cap_for = |profit: T| peak.min((ceiling - profit.min(T::zero())) / unit);

    let mut cap = cap_for(T::zero());
    let mut evaluations = 0;
    let mut attempts = 0;
    let (mut best, mut best_fleet, mut first) = loop {
        let mut best = Incumbent::none();
        let mut fleet = None;
        let lam = Window::new(T::zero(), params.potential_demand);
        let gam = Window::new(T::zero(), cap);
        scan(
            plan,
            params,
            grid,
            &lam,
            &gam,
            &mut best,
            &mut fleet,
            &mut evaluations,
        );
        attempts += 1;
        if best.found() {
            let wider = cap_for(best.value);
            if wider > cap * lit(1.0 + 1e-12) && attempts < 8 {
                cap = wider;
                continue;
            }
        } else if cap < peak && attempts < 8 {
            cap = peak;
            continue;
        }
        break (best, fleet, (lam, gam));
    };
    if !best.found() {
        return Err(Infeasibility::NoFeasibleCell.into());
    }

    let shrink = lit::<T>(grid.refine_shrink);
    let mut round_best = vec![best.value];
    for _ in 0..grid.refine_rounds {
        first.0.recenter(best.x, shrink);
        first.1.recenter(best.y, shrink);
        scan(
            plan,
            params,
            grid,
            &first.0,
            &first.1,
            &mut best,
            &mut best_fleet,
            &mut evaluations,
        );
        round_best.push(best.value);
    }

    let fleet = best_fleet.expect("incumbent carries its fleet");
    let equilibrium = MarketEquilibrium::from_fleet(best.x, &fleet, params)?;
    Ok(OperationsOptimum {
        demand: best.x,
        charging_rate: best.y,
        profit: equilibrium.profit(params),
        equilibrium,
        gamma_cap: cap,
        round_best,
        evaluations,
    })
}

#[allow(clippy::too_many_arguments)]
fn scan<T: Scalar>(
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
    grid: &GridSpec,
    lam: &Window<T>,
    gam: &Window<T>,
    best: &mut Incumbent<T>,
    best_fleet: &mut Option<FleetState<T>>,
    evaluations: &mut usize,
) {
    let lambdas = lam.points(grid.lambda_points);
    for g in gam.points(grid.gamma_points) {
        let Ok(fleet) = fleet_from_gamma(g, plan, params) else {
            continue;
        };
        for &l in &lambdas {
            *evaluations += 1;
            let before = (best.x, best.y);
            best.offer(profit_with_fleet(l, &fleet, params), l, g);
            if (best.x, best.y) != before {
                *best_fleet = Some(fleet);
            }
        }
    }
}

/// Welfare-optimal plan with its induced market equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanOutcome<T> {
    pub plan: StationPlan<T>,
    pub equilibrium: MarketEquilibrium<T>,
    pub profit: T,
    pub surplus: T,
    pub infra_cost: T,
    pub welfare: T,
}

/// Solves the platform problem at a fixed plan and prices the outcome.
pub fn evaluate_plan<T: Scalar>(
    plan: &StationPlan<T>,
    params: &ModelParams<T>,
    grid: &GridSpec,
) -> Result<PlanOutcome<T>> {
    let ops = optimize_operations(plan, params, grid)?;
    let w = social_welfare(&ops.equilibrium, plan, params);
    Ok(PlanOutcome {
        plan: *plan,
        equilibrium: ops.equilibrium,
        profit: w.profit,
        surplus: w.surplus,
        infra_cost: w.infra_cost,
        welfare: w.welfare,
    })
}

/// Result of an outer search, with the incumbent welfare after each round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSearch<T> {
    pub best: PlanOutcome<T>,
    pub round_best: Vec<T>,
    /// Every evaluated cell's welfare (−∞ where infeasible), in evaluation order.
    pub evaluated: Vec<(T, T, T)>,
}

fn outer_search<T: Scalar>(
    params: &ModelParams<T>,
    stations: SearchRange<T>,
    chargers: Option<SearchRange<T>>,
    grid: &PlanGrid,
    make: impl Fn(T, T) -> StationPlan<T> + Sync,
) -> Result<PlanSearch<T>> {
    grid.validate()?;
    params.validate()?;
    let mut kw = Window::new(stations.lo, stations.hi);
    let mut qw = chargers.map(|r| Window::new(r.lo, r.hi));
    let shrink = lit::<T>(grid.refine_shrink);
    let mut best = Incumbent::none();
    let mut best_outcome: Option<PlanOutcome<T>> = None;
    let mut round_best = Vec::new();
    let mut evaluated = Vec::new();

    for round in 0..=grid.refine_rounds {
        if round > 0 {
            kw.recenter(best.x, shrink);
            if let Some(q) = qw.as_mut() {
                q.recenter(best.y, shrink);
            }
        }
        let ks = kw.points(grid.station_points);
        let qs = match &qw {
            Some(q) => q.points(grid.charger_points),
            None => vec![T::zero()],
        };
        let cells: Vec<(T, T)> = ks
            .iter()
            .flat_map(|&k| qs.iter().map(move |&q| (k, q)))
            .collect();
        let results: Vec<Option<PlanOutcome<T>>> = cells
            .par_iter()
            .map(|&(k, q)| evaluate_plan(&make(k, q), params, &grid.inner).ok())
            .collect();
        for ((k, q), r) in cells.into_iter().zip(results) {
            let value = r.as_ref().map_or(T::neg_infinity(), |o| o.welfare);
            evaluated.push((k, q, value));
            let before = (best.x, best.y, best.value);
            best.offer(value, k, q);
            if (best.x, best.y, best.value) != before {
                best_outcome = r;
            }
        }
        if !best.found() {
            return Err(Infeasibility::NoFeasibleCell.into());
        }
        round_best.push(best.value);
    }
    Ok(PlanSearch {
        best: best_outcome.expect("incumbent carries its outcome"),
        round_best,
        evaluated,
    })
}

/// Outer search over stations K and chargers per station Q.
pub fn optimize_plan_plugin<T: Scalar>(
    params: &ModelParams<T>,
    stations: SearchRange<T>,
    chargers: SearchRange<T>,
    grid: &PlanGrid,
) -> Result<PlanSearch<T>> {
    let cap = lit::<T>(params.plugin_capacity as f64);
    if chargers.hi > cap {
        return Err(Error::invalid(format!(
            "charger range reaches {} but stations hold {}",
            chargers.hi, params.plugin_capacity
        )));
    }
    let v = params.plugin_capacity;
    outer_search(params, stations, Some(chargers), grid, |k, q| {
        StationPlan::plugin(k, q, v)
    })
}

/// Outer search over K only; Q and V stay at their configured values.
pub fn optimize_plan_swap<T: Scalar>(
    params: &ModelParams<T>,
    stations: SearchRange<T>,
    grid: &PlanGrid,
) -> Result<PlanSearch<T>> {
    outer_search(params, stations, None, grid, |k, _| {
        StationPlan::swap(k, params)
    })
}

pub fn optimize_plan<T: Scalar>(
    strategy: Strategy,
    params: &ModelParams<T>,
    ranges: &SearchRanges<T>,
    grid: &PlanGrid,
) -> Result<PlanSearch<T>> {
    match strategy {
        Strategy::PlugIn => optimize_plan_plugin(params, ranges.stations, ranges.chargers, grid),
        Strategy::Swap => optimize_plan_swap(params, ranges.stations, grid),
    }
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SweepParameter {
    /// Any scalar field of the model parameters, by name.
    Field(String),
    /// Swap charger cost, with the plug-in cost held at swap cost / ratio.
    SwapCostAtRatio(f64),
}

impl SweepParameter {
    /// Accepts field names plus the short forms `s` and `C`.
    pub fn parse(name: &str) -> Result<Self> {
        let field = match name {
            "s" => "charge_speed",
            "C" => "battery_capacity",
            other => other,
        };
        if ModelParams::<f64>::nominal().get(field).is_none() {
            return Err(Error::invalid(format!("unknown sweep parameter `{name}`")));
        }
        Ok(SweepParameter::Field(field.to_string()))
    }

    pub fn name(&self) -> String {
        match self {
            SweepParameter::Field(f) => f.clone(),
            SweepParameter::SwapCostAtRatio(_) => "infra_cost_swap".to_string(),
        }
    }

    pub fn apply<T: Scalar>(&self, params: &ModelParams<T>, value: T) -> Result<ModelParams<T>> {
        let mut p = params.clone();
        match self {
            SweepParameter::Field(f) => p.set(f, value)?,
            SweepParameter::SwapCostAtRatio(r) => {
                if !(*r > 0.0) {
                    return Err(Error::invalid("cost ratio must be positive"));
                }
                p.infra_cost_swap = value;
                p.infra_cost_plugin = value / lit(*r);
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub parameter: String,
    pub value: T,
    pub strategy: Strategy,
    pub outcome: Result<PlanOutcome<T>>,
}

/// One optimized plan per (value, strategy); failures stay in their row.
pub fn sweep<T: Scalar>(
    parameter: &SweepParameter,
    values: &[T],
    strategies: &[Strategy],
    params: &ModelParams<T>,
    ranges: &SearchRanges<T>,
    grid: &PlanGrid,
) -> Vec<SweepRow<T>> {
    let cells: Vec<(T, Strategy)> = values
        .iter()
        .flat_map(|&v| strategies.iter().map(move |&s| (v, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(value, strategy)| {
            let outcome = parameter
                .apply(params, value)
                .and_then(|p| optimize_plan(strategy, &p, ranges, grid))
                .map(|s| s.best);
            SweepRow {
                parameter: parameter.name(),
                value,
                strategy,
                outcome,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCell<T> {
    pub plugin: Result<PlanOutcome<T>>,
    pub swap: Result<PlanOutcome<T>>,
}

impl<T: Scalar> ComparisonCell<T> {
    /// Swap welfare minus plug-in welfare.
    pub fn delta(&self) -> Result<T> {
        match (&self.plugin, &self.swap) {
            (Ok(p), Ok(s)) => Ok(s.welfare - p.welfare),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        }
    }
}

/// Welfare difference (swap − plug-in) over swap charger costs at a fixed cost
/// ratio (rows) and an optional second parameter axis (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable<T> {
    pub ratio: f64,
    pub swap_costs: Vec<T>,
    pub axis: Option<String>,
    pub axis_values: Vec<T>,
    pub cells: Vec<Vec<ComparisonCell<T>>>,
}

pub fn compare_strategies<T: Scalar>(
    params: &ModelParams<T>,
    ratio: f64,
    swap_costs: &[T],
    axis: Option<(&SweepParameter, &[T])>,
    ranges: &SearchRanges<T>,
    grid: &PlanGrid,
) -> Result<ComparisonTable<T>> {
    let cost = SweepParameter::SwapCostAtRatio(ratio);
    cost.apply(params, params.infra_cost_swap)?;
    let (axis_name, axis_values) = match axis {
        Some((p, v)) => (Some(p.name()), v.to_vec()),
        None => (None, Vec::new()),
    };
    let columns: Vec<Option<T>> = if axis_values.is_empty() {
        vec![None]
    } else {
        axis_values.iter().copied().map(Some).collect()
    };
    let jobs: Vec<(usize, usize, Strategy)> = (0..swap_costs.len())
        .flat_map(|i| {
            (0..columns.len())
                .flat_map(move |j| [Strategy::PlugIn, Strategy::Swap].map(|s| (i, j, s)))
        })
        .collect();
    let results: Vec<Result<PlanOutcome<T>>> = jobs
        .par_iter()
        .map(|&(i, j, s)| {
            let mut p = cost.apply(params, swap_costs[i])?;
            if let (Some(v), Some((ap, _))) = (columns[j], axis) {
                p = ap.apply(&p, v)?;
            }
            optimize_plan(s, &p, ranges, grid).map(|r| r.best)
        })
        .collect();
    let mut it = results.into_iter();
    let cells = (0..swap_costs.len())
        .map(|_| {
            (0..columns.len())
                .map(|_| ComparisonCell {
                    plugin: it.next().expect("plug-in cell"),
                    swap: it.next().expect("swap cell"),
                })
                .collect()
        })
        .collect();
    Ok(ComparisonTable {
        ratio,
        swap_costs: swap_costs.to_vec(),
        axis: axis_name,
        axis_values,
        cells,
    })
}

/// Re-solves the platform problem at the nearest whole K and Q.
pub fn round_plan<T: Scalar>(
    outcome: &PlanOutcome<T>,
    params: &ModelParams<T>,
    grid: &GridSpec,
) -> Result<PlanOutcome<T>> {
    let mut plan = outcome.plan;
    plan.stations = plan.stations.round().max(T::one());
    plan.chargers = plan.chargers.round().max(T::one());
    evaluate_plan(&plan, params, grid)
}
