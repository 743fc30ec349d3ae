//! Scenario runner behind the command-line front end. Every command turns a
//! [`ScenarioConfig`] into a CSV or JSON document in display units (minutes,
//! trips per minute, dollars per hour).

pub mod config;
pub mod report;
pub mod units;

use serde::Serialize;

pub use config::{CompareSpec, PlanSpec, ScenarioConfig, SweepSpec, ValidateSpec};
pub use report::{PlanRecord, PlanRow, PLAN_COLUMNS, SCHEMA_VERSION};

use crate::calibrate::{fit_sqrt_law, simulate_search_times};
use crate::des::{plugin_metrics_vs_des, swap_metrics_vs_des, DesComparison};
use crate::error::{Error, Result};
use crate::market::StationPlan;
use crate::planner::{compare_strategies, evaluate_plan, optimize_plan, sweep};
use report::{json, num, plan_rows_csv, table_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Plan,
    Sweep,
    Compare,
    Validate,
    Calibrate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Plan => "plan",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
            Command::Validate => "validate",
            Command::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Runs one command and renders its output document.
pub fn run(command: Command, config: &ScenarioConfig, format: Format) -> Result<String> {
    match command {
        Command::Solve => render_plans(vec![solve(config)?], format),
        Command::Plan => render_plans(plan(config)?, format),
        Command::Sweep => render_plans(run_sweep(config)?, format),
        Command::Compare => {
            let rows = compare(config)?;
            match format {
                Format::Csv => table_csv(
                    &COMPARE_COLUMNS,
                    &rows.iter().map(CompareRow::fields).collect::<Vec<_>>(),
                ),
                Format::Json => json(&Rows { rows: &rows }),
            }
        }
        Command::Validate => {
            let rows = validate(config)?;
            match format {
                Format::Csv => table_csv(
                    &VALIDATE_COLUMNS,
                    &rows.iter().map(ValidateRow::fields).collect::<Vec<_>>(),
                ),
                Format::Json => json(&Rows { rows: &rows }),
            }
        }
        Command::Calibrate => {
            let rows = calibrate(config)?;
            match format {
                Format::Csv => table_csv(
                    &CALIBRATE_COLUMNS,
                    &rows.iter().map(CalibrateRow::fields).collect::<Vec<_>>(),
                ),
                Format::Json => json(&Rows { rows: &rows }),
            }
        }
    }
}

#[derive(Serialize)]
struct Rows<'a, R> {
    rows: &'a [R],
}

fn render_plans(rows: Vec<PlanRow>, format: Format) -> Result<String> {
    match format {
        Format::Csv => plan_rows_csv(&rows),
        Format::Json => json(&Rows { rows: &rows }),
    }
}

/// Platform optimum at the configured plan.
pub fn solve(config: &ScenarioConfig) -> Result<PlanRow> {
    let spec = config
        .plan
        .as_ref()
        .ok_or_else(|| Error::config("plan", "the solve command needs a [plan] table"))?;
    let plan = match spec.strategy {
        crate::market::Strategy::PlugIn => {
            StationPlan::plugin(spec.stations, spec.chargers, config.params.plugin_capacity)
        }
        crate::market::Strategy::Swap => StationPlan::swap(spec.stations, &config.params),
    };
    plan.validate()?;
    let outcome = evaluate_plan(&plan, &config.params, &config.grid.inner)?;
    Ok(PlanRow::new(None, None, spec.strategy, &Ok(outcome)))
}

/// Welfare-optimal plan per configured strategy.
pub fn plan(config: &ScenarioConfig) -> Result<Vec<PlanRow>> {
    config
        .strategies
        .iter()
        .map(|&s| {
            let best = optimize_plan(s, &config.params, &config.ranges, &config.grid)?.best;
            Ok(PlanRow::new(None, None, s, &Ok(best)))
        })
        .collect()
}

/// One row per (value, strategy). Failed cells keep their error in `status`.
pub fn run_sweep(config: &ScenarioConfig) -> Result<Vec<PlanRow>> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "the sweep command needs a [sweep] table"))?;
    let rows = sweep(
        &spec.parameter,
        &spec.values,
        &config.strategies,
        &config.params,
        &config.ranges,
        &config.grid,
    );
    Ok(rows
        .iter()
        .map(|r| {
            PlanRow::new(
                Some(r.parameter.clone()),
                Some(r.value),
                r.strategy,
                &r.outcome,
            )
        })
        .collect())
}

const COMPARE_COLUMNS: [&str; 14] = [
    "ratio",
    "swap_cost_per_h",
    "plugin_cost_per_h",
    "axis",
    "axis_value",
    "plugin_K",
    "plugin_Q",
    "plugin_welfare_per_h",
    "swap_K",
    "swap_Q",
    "swap_welfare_per_h",
    "delta_welfare_per_h",
    "preferred",
    "status",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub ratio: f64,
    pub swap_cost_per_h: f64,
    pub plugin_cost_per_h: f64,
    pub axis: Option<String>,
    pub axis_value: Option<f64>,
    pub plugin: Option<PlanRecord>,
    pub swap: Option<PlanRecord>,
    /// Swap welfare minus plug-in welfare.
    pub delta_welfare_per_h: Option<f64>,
    pub status: String,
}

impl CompareRow {
    pub fn preferred(&self) -> &'static str {
        match self.delta_welfare_per_h {
            Some(d) if d > 0.0 => "swap",
            Some(d) if d < 0.0 => "plug-in",
            Some(_) => "tie",
            None => "",
        }
    }

    fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let plan = |r: &Option<PlanRecord>| {
            [
                opt(r.as_ref().map(|p| p.stations)),
                opt(r.as_ref().map(|p| p.chargers)),
                opt(r.as_ref().map(|p| p.welfare_per_h)),
            ]
        };
        let mut out = vec![
            num(self.ratio),
            num(self.swap_cost_per_h),
            num(self.plugin_cost_per_h),
            self.axis.clone().unwrap_or_default(),
            opt(self.axis_value),
        ];
        out.extend(plan(&self.plugin));
        out.extend(plan(&self.swap));
        out.push(opt(self.delta_welfare_per_h));
        out.push(self.preferred().to_string());
        out.push(self.status.clone());
        out
    }
}

/// Welfare-optimal plug-in and swap plans over swap charger costs, with the
/// plug-in cost at swap cost / ratio.
pub fn compare(config: &ScenarioConfig) -> Result<Vec<CompareRow>> {
    let spec = config
        .compare
        .as_ref()
        .ok_or_else(|| Error::config("compare", "the compare command needs a [compare] table"))?;
    let axis = spec
        .axis
        .as_ref()
        .map(|a| (&a.parameter, a.values.as_slice()));
    let table = compare_strategies(
        &config.params,
        spec.ratio,
        &spec.swap_costs,
        axis,
        &config.ranges,
        &config.grid,
    )?;
    let mut rows = Vec::new();
    for (i, &cost) in table.swap_costs.iter().enumerate() {
        for (j, cell) in table.cells[i].iter().enumerate() {
            let status = match cell.delta() {
                Ok(_) => "ok".to_string(),
                Err(e) => format!("error: {e}"),
            };
            rows.push(CompareRow {
                ratio: table.ratio,
                swap_cost_per_h: cost,
                plugin_cost_per_h: cost / table.ratio,
                axis: table.axis.clone(),
                axis_value: table.axis_values.get(j).copied(),
                plugin: cell.plugin.as_ref().ok().map(PlanRecord::from_outcome),
                swap: cell.swap.as_ref().ok().map(PlanRecord::from_outcome),
                delta_welfare_per_h: cell.delta().ok(),
                status,
            });
        }
    }
    Ok(rows)
}

const VALIDATE_COLUMNS: [&str; 9] = [
    "station",
    "metric",
    "analytic",
    "simulated",
    "stderr",
    "ci95_lo",
    "ci95_hi",
    "z_score",
    "within_3_sigma",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateRow {
    pub station: &'static str,
    pub metric: &'static str,
    pub analytic: f64,
    pub simulated: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub z_score: f64,
    pub within_3_sigma: bool,
}

impl ValidateRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.station.to_string(),
            self.metric.to_string(),
            num(self.analytic),
            num(self.simulated),
            num(self.stderr),
            num(self.ci95.0),
            num(self.ci95.1),
            num(self.z_score),
            self.within_3_sigma.to_string(),
        ]
    }
}

fn validate_rows(station: &'static str, cmp: DesComparison) -> Vec<ValidateRow> {
    cmp.rows
        .into_iter()
        .map(|r| {
            // Waits are reported in minutes.
            let (metric, s) = if r.metric == "wait_h" {
                ("wait_min", 60.0)
            } else {
                (r.metric, 1.0)
            };
            ValidateRow {
                station,
                metric,
                analytic: r.analytic * s,
                simulated: r.simulated * s,
                stderr: r.stderr * s,
                ci95: (r.ci95.0 * s, r.ci95.1 * s),
                z_score: r.z_score,
                within_3_sigma: r.within(3.0),
            }
        })
        .collect()
}

/// Analytic station metrics against discrete-event simulation.
pub fn validate(config: &ScenarioConfig) -> Result<Vec<ValidateRow>> {
    let v = &config.validate;
    let mut sim = v.sim;
    sim.seed = config.seed;
    let (plugin, swap) = rayon::join(
        || plugin_metrics_vs_des(&v.plugin, &sim),
        || swap_metrics_vs_des(&v.swap, &sim, v.discipline),
    );
    let mut rows = validate_rows("plug-in", plugin?);
    rows.extend(validate_rows("swap", swap?));
    Ok(rows)
}

const CALIBRATE_COLUMNS: [&str; 6] = [
    "kind",
    "K",
    "search_time_min",
    "fitted_min",
    "scale_min",
    "r_squared",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrateRow {
    /// `point` for a simulated station count, `fit` for the summary line.
    pub kind: &'static str,
    pub stations: Option<u32>,
    pub search_time_min: Option<f64>,
    pub fitted_min: Option<f64>,
    pub scale_min: f64,
    pub r_squared: f64,
}

impl CalibrateRow {
    fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        vec![
            self.kind.to_string(),
            self.stations.map(|k| k.to_string()).unwrap_or_default(),
            opt(self.search_time_min),
            opt(self.fitted_min),
            num(self.scale_min),
            num(self.r_squared),
        ]
    }
}

/// Simulated nearest-station travel times and the fitted t = B/√K.
pub fn calibrate(config: &ScenarioConfig) -> Result<Vec<CalibrateRow>> {
    let mut region = config.calibrate.clone();
    region.seed = config.seed;
    let times = simulate_search_times(&region)?;
    let points: Vec<(f64, f64)> = times.iter().map(|&(k, t)| (k as f64, t * 60.0)).collect();
    let fit = fit_sqrt_law(&points)?;
    let mut rows: Vec<CalibrateRow> = times
        .iter()
        .map(|&(k, t)| CalibrateRow {
            kind: "point",
            stations: Some(k),
            search_time_min: Some(t * 60.0),
            fitted_min: Some(fit.scale / (k as f64).sqrt()),
            scale_min: fit.scale,
            r_squared: fit.r_squared,
        })
        .collect();
    rows.push(CalibrateRow {
        kind: "fit",
        stations: None,
        search_time_min: None,
        fitted_min: None,
        scale_min: fit.scale,
        r_squared: fit.r_squared,
    });
    Ok(rows)
}
