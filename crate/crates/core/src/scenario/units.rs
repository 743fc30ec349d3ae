//! Unit-tagged quantities in configuration files, e.g. `"16.3 min"`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Converted to hours.
    Time,
    /// Converted to per hour.
    Rate,
    /// Converted to dollars per hour.
    MoneyRate,
    Money,
    PerMoney,
    /// Fraction in [0, 1]; `%` or a bare number.
    Fraction,
    Power,
    Energy,
    EnergyPrice,
    /// Converted to miles.
    Length,
    /// Converted to miles per hour.
    Speed,
}

impl Kind {
    fn units(&self) -> &'static [(&'static str, f64)] {
        match self {
            Kind::Time => &[("min", 1.0 / 60.0), ("h", 1.0), ("s", 1.0 / 3600.0)],
            Kind::Rate => &[("per-min", 60.0), ("per-h", 1.0)],
            Kind::MoneyRate => &[("$/min", 60.0), ("$/h", 1.0)],
            Kind::Money => &[("$", 1.0)],
            Kind::PerMoney => &[("per-$", 1.0)],
            Kind::Fraction => &[("%", 0.01), ("", 1.0)],
            Kind::Power => &[("kW", 1.0), ("W", 1e-3)],
            Kind::Energy => &[("kWh", 1.0), ("Wh", 1e-3)],
            Kind::EnergyPrice => &[("$/kWh", 1.0)],
            Kind::Length => &[("mi", 1.0), ("km", 1.0 / 1.609_344)],
            Kind::Speed => &[("mph", 1.0), ("km/h", 1.0 / 1.609_344)],
        }
    }

    fn expected(&self) -> String {
        self.units()
            .iter()
            .filter(|u| !u.0.is_empty())
            .map(|u| format!("`{}`", u.0))
            .collect::<Vec<_>>()
            .join(" or ")
    }
}

/// Parses `"<number> <unit>"` into the canonical unit of `kind`.
pub fn parse_quantity(field: &str, text: &str, kind: Kind) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace() || c == '%')
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| Error::config(field, format!("`{text}` does not start with a number")))?;
    let unit = unit.trim();
    let factor = kind
        .units()
        .iter()
        .find(|u| u.0 == unit)
        .map(|u| u.1)
        .ok_or_else(|| {
            if unit.is_empty() {
                Error::config(field, format!("missing unit, expected {}", kind.expected()))
            } else {
                Error::config(
                    field,
                    format!("unknown unit `{unit}`, expected {}", kind.expected()),
                )
            }
        })?;
    if !value.is_finite() {
        return Err(Error::config(field, "value must be finite"));
    }
    Ok(value * factor)
}

/// Unit kind of each scalar model parameter.
pub fn param_kind(name: &str) -> Option<Kind> {
    Some(match name {
        "potential_demand" => Kind::Rate,
        "value_of_time" | "vehicle_cost" | "infra_cost_plugin" | "infra_cost_swap" => {
            Kind::MoneyRate
        }
        "trip_duration" | "swap_service_time" | "matching_scale_pax" | "matching_scale_chg" => {
            Kind::Time
        }
        "logit_sensitivity" => Kind::PerMoney,
        "logit_offset" => Kind::Money,
        "arrival_soc" => Kind::Fraction,
        "charge_speed" | "consumption_rate" => Kind::Power,
        "battery_capacity" => Kind::Energy,
        "electricity_price" => Kind::EnergyPrice,
        _ => return None,
    })
}
