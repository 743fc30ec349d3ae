//! Charging-infrastructure planning for an autonomous ride-hailing fleet.
//!
//! Plug-in stations are M/M/Q/V queues ([`queueing`]); swap stations are an
//! EV queue coupled to a closed battery loop ([`swap`]). [`market`] turns a
//! station plan and the platform's choice of demand λ and charging rate γ into
//! a market equilibrium, and [`planner`] nests the platform's profit
//! maximization inside a welfare-maximizing search over the plan.
//! [`des`] and [`calibrate`] check the station models and the search-time law
//! by simulation; [`scenario`] drives everything from TOML files.

// `!(x > 0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod des;
pub mod error;
pub mod linalg;
pub mod market;
pub mod planner;
pub mod queueing;
pub mod scalar;
pub mod scenario;
pub mod special;
pub mod swap;

pub use calibrate::{fit_sqrt_law, simulate_search_times, Metric, RegionSpec, SqrtLawFit};
pub use des::{
    plugin_metrics_vs_des, simulate_mmqv, simulate_swap_station, swap_metrics_vs_des,
    DesComparison, Estimate, SimConfig, SimResult, SwapDiscipline,
};
pub use error::{Error, Infeasibility, Result};
pub use market::{
    consumer_surplus, fleet_from_gamma, gamma_domain, inverse_logit, logit_demand, platform_profit,
    search_time, social_welfare, solve_pax_times, FleetState, GammaDomain, MarketEquilibrium,
    ModelParams, PaxTimes, StationPlan, Strategy, WelfareBreakdown,
};
pub use planner::{
    compare_strategies, optimize_operations, optimize_plan, optimize_plan_plugin,
    optimize_plan_swap, sweep, GridSpec, OperationsOptimum, PlanGrid, PlanOutcome, PlanSearch,
    SearchRange, SearchRanges, SweepParameter,
};
pub use queueing::{
    ctmc_oracle, mmqv_continuous, mmqv_steady_state, PluginStationInput, QueueMetrics,
};
pub use scalar::Scalar;
pub use scenario::{run, Command, Format, ScenarioConfig};
pub use special::regularized_upper_gamma;
pub use swap::{
    arrival_pmf, build_transition_kernel, charge_completion_pmf, swap_steady_state,
    SwapStationInput, SwapStationState, SwapSteadyState,
};

pub type Params = ModelParams<f64>;
pub type Plan = StationPlan<f64>;
pub type Equilibrium = MarketEquilibrium<f64>;
pub type Outcome = PlanOutcome<f64>;
pub type Metrics = QueueMetrics<f64>;
pub type PluginInput = PluginStationInput<f64>;
pub type SwapInput = SwapStationInput<f64>;
pub type SwapState = SwapSteadyState<f64>;

pub type ParamsF32 = ModelParams<f32>;
pub type PlanF32 = StationPlan<f32>;
pub type MetricsF32 = QueueMetrics<f32>;
pub type PluginInputF32 = PluginStationInput<f32>;
pub type SwapInputF32 = SwapStationInput<f32>;
