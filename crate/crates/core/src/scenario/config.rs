//! Scenario files: TOML with a unit tag on every dimensional value.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::units::{param_kind, parse_quantity, Kind};
use crate::calibrate::{Metric, RegionSpec};
use crate::des::{SimConfig, SwapDiscipline};
use crate::error::{Error, Result};
use crate::market::{ModelParams, Strategy};
use crate::planner::{GridSpec, PlanGrid, SearchRange, SearchRanges, SweepParameter};
use crate::queueing::PluginStationInput;
use crate::swap::SwapStationInput;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSpec {
    pub strategy: Strategy,
    pub stations: f64,
    /// Ignored for swap plans, which use the configured battery count.
    pub chargers: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub ratio: f64,
    pub swap_costs: Vec<f64>,
    pub axis: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSpec {
    pub sim: SimConfig,
    pub discipline: SwapDiscipline,
    pub plugin: PluginStationInput<f64>,
    pub swap: SwapStationInput<f64>,
}

impl Default for ValidateSpec {
    fn default() -> Self {
        ValidateSpec {
            sim: SimConfig::default(),
            discipline: SwapDiscipline::Slotted,
            plugin: PluginStationInput {
                arrival_rate: 4.3,
                service_time: 22.5 / 22.0,
                chargers: 8.0,
                capacity: 20,
            },
            swap: SwapStationInput {
                arrival_rate: 3.8,
                swap_time: 2.0 / 60.0,
                charge_time: 22.5 / 22.0,
                batteries: 6,
                ev_buffer: 15,
            },
        }
    }
}

/// A fully resolved scenario, all quantities in canonical units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub params: ModelParams<f64>,
    pub plan: Option<PlanSpec>,
    pub ranges: SearchRanges<f64>,
    pub strategies: Vec<Strategy>,
    pub grid: PlanGrid,
    pub sweep: Option<SweepSpec>,
    pub compare: Option<CompareSpec>,
    pub validate: ValidateSpec,
    pub calibrate: RegionSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    params: Option<BTreeMap<String, toml::Value>>,
    plan: Option<RawPlan>,
    search: Option<RawSearch>,
    grid: Option<RawGrid>,
    sweep: Option<RawSweep>,
    compare: Option<RawCompare>,
    validate: Option<RawValidate>,
    calibrate: Option<RawCalibrate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    strategy: String,
    stations: f64,
    chargers: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    stations: Option<[f64; 2]>,
    chargers: Option<[f64; 2]>,
    strategies: Option<Vec<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lambda_points: Option<usize>,
    gamma_points: Option<usize>,
    inner_rounds: Option<usize>,
    inner_shrink: Option<f64>,
    station_points: Option<usize>,
    charger_points: Option<usize>,
    outer_rounds: Option<usize>,
    outer_shrink: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: String,
    values: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    ratio: f64,
    swap_costs: Vec<String>,
    axis: Option<String>,
    axis_values: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    horizon_arrivals: Option<u64>,
    warmup_fraction: Option<f64>,
    batch_count: Option<usize>,
    discipline: Option<String>,
    plugin: Option<RawPluginStation>,
    swap: Option<RawSwapStation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPluginStation {
    arrival_rate: String,
    service_time: String,
    chargers: u32,
    capacity: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSwapStation {
    arrival_rate: String,
    swap_time: String,
    charge_time: String,
    batteries: u32,
    ev_buffer: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibrate {
    side_length: Option<String>,
    travel_speed: Option<String>,
    station_counts: Option<Vec<u32>>,
    samples_per_count: Option<usize>,
    layouts_per_count: Option<usize>,
    metric: Option<String>,
}

fn params_from(raw: Option<BTreeMap<String, toml::Value>>) -> Result<ModelParams<f64>> {
    let raw = raw.unwrap_or_default();
    let mut params = match raw.get("base") {
        None => ModelParams::nominal(),
        Some(toml::Value::String(s)) if s == "nominal" => ModelParams::nominal(),
        Some(toml::Value::String(s)) if s == "figure-calibrated" => {
            ModelParams::figure_calibrated()
        }
        Some(other) => {
            return Err(Error::config(
                "params.base",
                format!("expected \"nominal\" or \"figure-calibrated\", got {other}"),
            ))
        }
    };
    for (key, value) in &raw {
        let field = format!("params.{key}");
        match key.as_str() {
            "base" => {}
            "swap_batteries" | "swap_buffer" | "plugin_capacity" => {
                let n = value
                    .as_integer()
                    .filter(|n| *n >= 1 && *n <= u32::MAX as i64)
                    .ok_or_else(|| Error::config(&field, "expected a positive integer"))?
                    as u32;
                match key.as_str() {
                    "swap_batteries" => params.swap_batteries = n,
                    "swap_buffer" => params.swap_buffer = n,
                    _ => params.plugin_capacity = n,
                }
            }
            name => {
                let kind = param_kind(name).ok_or_else(|| Error::config(&field, "unknown key"))?;
                let text = value.as_str().ok_or_else(|| {
                    Error::config(
                        &field,
                        "expected a quoted value with a unit, e.g. \"16.3 min\"",
                    )
                })?;
                params.set(name, parse_quantity(&field, text, kind)?)?;
            }
        }
    }
    params
        .validate()
        .map_err(|e| Error::config("params", e.to_string()))?;
    Ok(params)
}

fn sweep_kind(parameter: &SweepParameter) -> Kind {
    match parameter {
        SweepParameter::Field(f) => param_kind(f).expect("validated field"),
        SweepParameter::SwapCostAtRatio(_) => Kind::MoneyRate,
    }
}

fn quantities(field: &str, values: &[String], kind: Kind) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| parse_quantity(&format!("{field}[{i}]"), v, kind))
        .collect()
}

fn range(field: &str, r: [f64; 2]) -> Result<SearchRange<f64>> {
    SearchRange::new(r[0], r[1]).map_err(|e| Error::config(field, e.to_string()))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or("<file>".to_string(), |s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            });
            Error::config(field, e.message().to_string())
        })?;
        let params = params_from(raw.params)?;

        let plan = raw
            .plan
            .map(|p| -> Result<PlanSpec> {
                let strategy: Strategy = p
                    .strategy
                    .parse()
                    .map_err(|e: Error| Error::config("plan.strategy", e.to_string()))?;
                let chargers = match (strategy, p.chargers) {
                    (Strategy::PlugIn, Some(q)) => q,
                    (Strategy::PlugIn, None) => {
                        return Err(Error::config("plan.chargers", "required for plug-in plans"))
                    }
                    (Strategy::Swap, _) => params.swap_batteries as f64,
                };
                Ok(PlanSpec {
                    strategy,
                    stations: p.stations,
                    chargers,
                })
            })
            .transpose()?;

        let mut ranges = SearchRanges::default_for(&params);
        let mut strategies = vec![Strategy::PlugIn, Strategy::Swap];
        if let Some(s) = raw.search {
            if let Some(r) = s.stations {
                ranges.stations = range("search.stations", r)?;
            }
            if let Some(r) = s.chargers {
                ranges.chargers = range("search.chargers", r)?;
            }
            if let Some(list) = s.strategies {
                strategies = list
                    .iter()
                    .map(|x| {
                        x.parse()
                            .map_err(|e: Error| Error::config("search.strategies", e.to_string()))
                    })
                    .collect::<Result<_>>()?;
            }
        }

        let g = raw.grid.unwrap_or_default();
        let d = PlanGrid::default();
        let grid = PlanGrid {
            inner: GridSpec {
                lambda_points: g.lambda_points.unwrap_or(d.inner.lambda_points),
                gamma_points: g.gamma_points.unwrap_or(d.inner.gamma_points),
                refine_rounds: g.inner_rounds.unwrap_or(d.inner.refine_rounds),
                refine_shrink: g.inner_shrink.unwrap_or(d.inner.refine_shrink),
            },
            station_points: g.station_points.unwrap_or(d.station_points),
            charger_points: g.charger_points.unwrap_or(d.charger_points),
            refine_rounds: g.outer_rounds.unwrap_or(d.refine_rounds),
            refine_shrink: g.outer_shrink.unwrap_or(d.refine_shrink),
        };
        grid.validate()
            .map_err(|e| Error::config("grid", e.to_string()))?;

        let sweep = raw
            .sweep
            .map(|s| -> Result<SweepSpec> {
                let parameter = SweepParameter::parse(&s.parameter)
                    .map_err(|e| Error::config("sweep.parameter", e.to_string()))?;
                let values = quantities("sweep.values", &s.values, sweep_kind(&parameter))?;
                Ok(SweepSpec { parameter, values })
            })
            .transpose()?;

        let compare = raw
            .compare
            .map(|c| -> Result<CompareSpec> {
                if !(c.ratio > 0.0) {
                    return Err(Error::config("compare.ratio", "must be positive"));
                }
                let swap_costs = quantities("compare.swap_costs", &c.swap_costs, Kind::MoneyRate)?;
                let axis = match (c.axis, c.axis_values) {
                    (None, None) => None,
                    (Some(a), Some(v)) => {
                        let parameter = SweepParameter::parse(&a)
                            .map_err(|e| Error::config("compare.axis", e.to_string()))?;
                        let values = quantities("compare.axis_values", &v, sweep_kind(&parameter))?;
                        Some(SweepSpec { parameter, values })
                    }
                    _ => {
                        return Err(Error::config(
                            "compare.axis",
                            "axis and axis_values go together",
                        ))
                    }
                };
                Ok(CompareSpec {
                    ratio: c.ratio,
                    swap_costs,
                    axis,
                })
            })
            .transpose()?;

        let mut validate = ValidateSpec::default();
        if let Some(v) = raw.validate {
            let sim = &mut validate.sim;
            sim.horizon_arrivals = v.horizon_arrivals.unwrap_or(sim.horizon_arrivals);
            sim.warmup_fraction = v.warmup_fraction.unwrap_or(sim.warmup_fraction);
            sim.batch_count = v.batch_count.unwrap_or(sim.batch_count);
            if let Some(d) = v.discipline {
                validate.discipline = match d.as_str() {
                    "slotted" => SwapDiscipline::Slotted,
                    "continuous" => SwapDiscipline::Continuous,
                    _ => {
                        return Err(Error::config(
                            "validate.discipline",
                            "expected \"slotted\" or \"continuous\"",
                        ))
                    }
                };
            }
            if let Some(p) = v.plugin {
                validate.plugin = PluginStationInput::new(
                    parse_quantity("validate.plugin.arrival_rate", &p.arrival_rate, Kind::Rate)?,
                    parse_quantity("validate.plugin.service_time", &p.service_time, Kind::Time)?,
                    p.chargers as f64,
                    p.capacity,
                )
                .map_err(|e| Error::config("validate.plugin", e.to_string()))?;
            }
            if let Some(s) = v.swap {
                validate.swap = SwapStationInput::new(
                    parse_quantity("validate.swap.arrival_rate", &s.arrival_rate, Kind::Rate)?,
                    parse_quantity("validate.swap.swap_time", &s.swap_time, Kind::Time)?,
                    parse_quantity("validate.swap.charge_time", &s.charge_time, Kind::Time)?,
                    s.batteries,
                    s.ev_buffer,
                )
                .map_err(|e| Error::config("validate.swap", e.to_string()))?;
            }
            validate
                .sim
                .validate()
                .map_err(|e| Error::config("validate", e.to_string()))?;
        }

        let mut calibrate = RegionSpec::default();
        if let Some(c) = raw.calibrate {
            if let Some(s) = c.side_length {
                calibrate.side_length = parse_quantity("calibrate.side_length", &s, Kind::Length)?;
            }
            if let Some(s) = c.travel_speed {
                calibrate.travel_speed = parse_quantity("calibrate.travel_speed", &s, Kind::Speed)?;
            }
            calibrate.station_counts = c.station_counts.unwrap_or(calibrate.station_counts);
            calibrate.samples_per_count =
                c.samples_per_count.unwrap_or(calibrate.samples_per_count);
            calibrate.layouts_per_count =
                c.layouts_per_count.unwrap_or(calibrate.layouts_per_count);
            if let Some(m) = c.metric {
                calibrate.metric = match m.as_str() {
                    "euclidean" => Metric::Euclidean,
                    "manhattan" => Metric::Manhattan,
                    _ => {
                        return Err(Error::config(
                            "calibrate.metric",
                            "expected \"euclidean\" or \"manhattan\"",
                        ))
                    }
                };
            }
            calibrate
                .validate()
                .map_err(|e| Error::config("calibrate", e.to_string()))?;
        }

        let seed = raw.seed.unwrap_or(1);
        Ok(ScenarioConfig {
            seed,
            params,
            plan,
            ranges,
            strategies,
            grid,
            sweep,
            compare,
            validate,
            calibrate,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    /// Overrides the seed used by simulations.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
