//! CSV and JSON renderings. CSV numbers carry 17 significant digits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{social_welfare, MarketEquilibrium, ModelParams, StationPlan, Strategy};
use crate::planner::PlanOutcome;

/// Bumped whenever a CSV header changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Frozen column order of plan rows.
pub const PLAN_COLUMNS: [&str; 25] = [
    "schema_version",
    "parameter",
    "value",
    "strategy",
    "K",
    "Q",
    "p_f",
    "lambda_per_min",
    "gamma_per_h",
    "w_c_min",
    "w_v_min",
    "t_m_min",
    "t_w_min",
    "P_V",
    "N",
    "N1",
    "N2",
    "N2m",
    "N2w",
    "N2s",
    "profit_per_h",
    "surplus_per_h",
    "infra_cost_per_h",
    "welfare_per_h",
    "status",
];

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// Display-unit record of one plan and its equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRecord {
    pub strategy: Strategy,
    pub stations: f64,
    pub chargers: f64,
    pub capacity: u32,
    pub fare: f64,
    pub demand_per_min: f64,
    pub charging_rate_per_h: f64,
    pub pax_wait_min: f64,
    pub vehicle_idle_min: f64,
    pub search_time_min: f64,
    pub station_wait_min: f64,
    pub blocking: f64,
    pub fleet: f64,
    pub operating: f64,
    pub charging_shift: f64,
    pub searching: f64,
    pub waiting: f64,
    pub in_service: f64,
    pub travel_cost: f64,
    pub profit_per_h: f64,
    pub surplus_per_h: f64,
    pub infra_cost_per_h: f64,
    pub welfare_per_h: f64,
}

impl PlanRecord {
    pub fn from_outcome(o: &PlanOutcome<f64>) -> Self {
        Self::build(
            &o.plan,
            &o.equilibrium,
            o.profit,
            o.surplus,
            o.infra_cost,
            o.welfare,
        )
    }

    pub fn from_equilibrium(
        plan: &StationPlan<f64>,
        eq: &MarketEquilibrium<f64>,
        params: &ModelParams<f64>,
    ) -> Self {
        let w = social_welfare(eq, plan, params);
        Self::build(plan, eq, w.profit, w.surplus, w.infra_cost, w.welfare)
    }

    fn build(
        plan: &StationPlan<f64>,
        e: &MarketEquilibrium<f64>,
        profit: f64,
        surplus: f64,
        infra: f64,
        welfare: f64,
    ) -> Self {
        PlanRecord {
            strategy: plan.strategy,
            stations: plan.stations,
            chargers: plan.chargers,
            capacity: plan.capacity,
            fare: e.fare,
            demand_per_min: e.demand / 60.0,
            charging_rate_per_h: e.charging_rate,
            pax_wait_min: e.pax_wait * 60.0,
            vehicle_idle_min: e.vehicle_idle * 60.0,
            search_time_min: e.search_time * 60.0,
            station_wait_min: e.station_wait * 60.0,
            blocking: e.blocking,
            fleet: e.fleet,
            operating: e.operating,
            charging_shift: e.charging_shift,
            searching: e.searching,
            waiting: e.waiting,
            in_service: e.in_service,
            travel_cost: e.travel_cost,
            profit_per_h: profit,
            surplus_per_h: surplus,
            infra_cost_per_h: infra,
            welfare_per_h: welfare,
        }
    }

    fn fields(&self) -> Vec<String> {
        [
            self.stations,
            self.chargers,
            self.fare,
            self.demand_per_min,
            self.charging_rate_per_h,
            self.pax_wait_min,
            self.vehicle_idle_min,
            self.search_time_min,
            self.station_wait_min,
            self.blocking,
            self.fleet,
            self.operating,
            self.charging_shift,
            self.searching,
            self.waiting,
            self.in_service,
            self.profit_per_h,
            self.surplus_per_h,
            self.infra_cost_per_h,
            self.welfare_per_h,
        ]
        .iter()
        .map(|&x| num(x))
        .collect()
    }
}

/// One CSV/JSON row: a plan record, or the error that replaced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRow {
    pub parameter: Option<String>,
    pub value: Option<f64>,
    pub strategy: Strategy,
    pub record: Option<PlanRecord>,
    pub status: String,
}

impl PlanRow {
    pub fn new(
        parameter: Option<String>,
        value: Option<f64>,
        strategy: Strategy,
        outcome: &Result<PlanOutcome<f64>>,
    ) -> Self {
        let (record, status) = match outcome {
            Ok(o) => (Some(PlanRecord::from_outcome(o)), "ok".to_string()),
            Err(e) => (None, format!("error: {e}")),
        };
        PlanRow {
            parameter,
            value,
            strategy,
            record,
            status,
        }
    }
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn plan_rows_csv(rows: &[PlanRow]) -> Result<String> {
    let mut w = writer();
    w.write_record(PLAN_COLUMNS).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            SCHEMA_VERSION.to_string(),
            r.parameter.clone().unwrap_or_default(),
            r.value.map(num).unwrap_or_default(),
            r.strategy.label().to_string(),
        ];
        match &r.record {
            Some(p) => rec.extend(p.fields()),
            None => rec.extend(std::iter::repeat_n(String::new(), PLAN_COLUMNS.len() - 5)),
        }
        rec.push(r.status.clone());
        w.write_record(&rec).map_err(csv_err)?;
    }
    into_string(w)
}

/// Generic table with its own header.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = writer();
    let mut h = vec!["schema_version"];
    h.extend_from_slice(header);
    w.write_record(&h).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![SCHEMA_VERSION.to_string()];
        rec.extend(r.iter().cloned());
        w.write_record(&rec).map_err(csv_err)?;
    }
    into_string(w)
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Versioned<'a, T> {
        schema_version: u32,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body: value,
    })
    .map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 186.878834, 1e-300, 123456789.123456789] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(num(f64::NEG_INFINITY), "");
    }

    #[test]
    fn empty_table_is_header_only() {
        let csv = plan_rows_csv(&[]).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("schema_version,parameter,value,strategy,K,Q,"));
    }
}
