//! Road network, delivery instance and logistics-cost data model.
//!
//! Everything here is immutable once loaded; the risk and routing stages
//! read from it and fill in the derived per-arc fields.

mod instance;
mod io;
mod network;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use instance::{CostMatrix, FleetFeasibility, Instance, InstanceDef, LegCost, Node, NodeIdx};
pub use io::{
    load_instance, load_network, load_traffic, parse_arcs_csv, parse_instance, parse_roads_csv,
    parse_traffic, write_arcs_csv, write_roads_csv,
};
pub use network::{Arc, Network, Road, RoadSegment};

/// Relative tolerance for `Σ segment lengths = arc length`.
pub const LENGTH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: row {row}: {message}")]
    Row {
        file: String,
        row: u64,
        message: String,
    },
    #[error("{file}: row {row}: unknown road id {road_id:?}")]
    UnknownRoad {
        file: String,
        row: u64,
        road_id: String,
    },
    #[error("{file}: row {row}: segment length must be positive, got {length}")]
    NonPositiveLength { file: String, row: u64, length: f64 },
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error("arc {from}->{to}: segment lengths sum to {sum} km, expected {total} km")]
    LengthMismatch {
        from: String,
        to: String,
        sum: f64,
        total: f64,
    },
    #[error("invalid traffic statistics: {0}")]
    Traffic(String),
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("no arc from {from:?} to {to:?}")]
    MissingArc { from: String, to: String },
    #[error("arc {from}->{to} has no logistics cost")]
    MissingLogisticsCost { from: String, to: String },
    #[error("fuel consumption must be positive, got {0} km/l")]
    NonPositiveConsumption(f64),
    #[error("invalid cost input: {0}")]
    Cost(String),
}

/// The five carriageway categories of the national accident panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadType {
    /// Two lanes, two ways, central safety lane.
    CentralSafetyLane,
    /// Two lanes, two ways, central barrier.
    CentralBarrier,
    /// Two lanes, two ways, painted central line.
    CentralLine,
    /// Single lane, one way.
    SingleOneWay,
    /// Single lane, two ways.
    SingleTwoWay,
}

impl RoadType {
    pub const ALL: [RoadType; 5] = [
        RoadType::CentralSafetyLane,
        RoadType::CentralBarrier,
        RoadType::CentralLine,
        RoadType::SingleOneWay,
        RoadType::SingleTwoWay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoadType::CentralSafetyLane => "central_safety_lane",
            RoadType::CentralBarrier => "central_barrier",
            RoadType::CentralLine => "central_line",
            RoadType::SingleOneWay => "single_one_way",
            RoadType::SingleTwoWay => "single_two_way",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RoadType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoadType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoadType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown road type {s:?} (expected one of {})",
                    RoadType::ALL.map(RoadType::as_str).join(", ")
                )
            })
    }
}

/// Deaths per 100 accidents for each road category.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadTypeTable {
    rates: [f64; 5],
}

impl RoadTypeTable {
    /// Rates indexed in [`RoadType::ALL`] order. Every rate must be positive.
    pub fn new(rates: [f64; 5]) -> Result<Self, DataError> {
        if let Some((t, r)) = RoadType::ALL
            .iter()
            .zip(rates)
            .find(|(_, r)| !(r.is_finite() && *r > 0.0))
        {
            return Err(DataError::Format {
                file: "road type table".into(),
                message: format!("death rate for {t} must be positive, got {r}"),
            });
        }
        Ok(Self { rates })
    }

    pub fn death_rate(&self, road_type: RoadType) -> f64 {
        self.rates[road_type.slot()]
    }

    /// Returns a copy with one category's rate replaced.
    pub fn with_rate(&self, road_type: RoadType, rate: f64) -> Result<Self, DataError> {
        let mut rates = self.rates;
        rates[road_type.slot()] = rate;
        Self::new(rates)
    }

    pub fn iter(&self) -> impl Iterator<Item = (RoadType, f64)> + '_ {
        RoadType::ALL.into_iter().zip(self.rates)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for RoadTypeTable {
    /// Accident panel figures: 12.3, 8.5, 18.0, 11.9, 22.3.
    fn default() -> Self {
        Self {
            rates: [12.3, 8.5, 18.0, 11.9, 22.3],
        }
    }
}

/// Aggregate traffic counts behind the general accident probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficStats {
    /// Average daily volume of all vehicles on federal roads.
    pub federal_daily_volume: f64,
    /// Heavy vehicles counted on state roads.
    pub sp_heavy_count: f64,
    /// All vehicles counted on state roads.
    pub sp_total_count: f64,
    /// Accidents recorded over the reference period.
    pub accident_count: f64,
}

impl TrafficStats {
    pub fn validate(&self) -> Result<(), DataError> {
        let fields = [
            ("federal_daily_volume", self.federal_daily_volume),
            ("sp_heavy_count", self.sp_heavy_count),
            ("sp_total_count", self.sp_total_count),
            ("accident_count", self.accident_count),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DataError::Traffic(format!(
                    "{name} must be a non-negative number, got {v}"
                )));
            }
        }
        if self.sp_heavy_count > self.sp_total_count {
            return Err(DataError::Traffic(format!(
                "sp_heavy_count ({}) exceeds sp_total_count ({})",
                self.sp_heavy_count, self.sp_total_count
            )));
        }
        Ok(())
    }
}

/// Fuel price and consumption used to turn kilometres into money.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuelPolicy {
    /// Money per litre.
    pub fuel_price: f64,
    /// Kilometres per litre.
    pub consumption_km_per_liter: f64,
}

impl FuelPolicy {
    pub fn cost_of(&self, arc: &Arc) -> Result<f64, DataError> {
        compute_logistics_cost(
            arc.total_length_km,
            self.fuel_price,
            self.consumption_km_per_liter,
            arc.tolls,
        )
    }
}

/// Fuel spent over `length_km` plus tolls.
pub fn compute_logistics_cost(
    length_km: f64,
    fuel_price: f64,
    consumption_km_per_liter: f64,
    tolls: f64,
) -> Result<f64, DataError> {
    if !(consumption_km_per_liter > 0.0) || !consumption_km_per_liter.is_finite() {
        return Err(DataError::NonPositiveConsumption(consumption_km_per_liter));
    }
    if !(fuel_price >= 0.0 && fuel_price.is_finite()) {
        return Err(DataError::Cost(format!(
            "fuel price must be non-negative, got {fuel_price}"
        )));
    }
    if !(tolls >= 0.0 && tolls.is_finite()) {
        return Err(DataError::Cost(format!(
            "tolls must be non-negative, got {tolls}"
        )));
    }
    if !(length_km >= 0.0 && length_km.is_finite()) {
        return Err(DataError::Cost(format!(
            "length must be non-negative, got {length_km}"
        )));
    }
    Ok(length_km * fuel_price / consumption_km_per_liter + tolls)
}

/// Money with two decimals, for reports.
pub fn fmt_money(value: f64) -> String {
    format!("{value:.2}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logistics_cost_examples() {
        assert_eq!(compute_logistics_cost(0.0, 6.0, 2.5, 0.0).unwrap(), 0.0);
        let c = compute_logistics_cost(100.0, 6.0, 2.5, 30.0).unwrap();
        assert!((c - 270.0).abs() < 1e-12);
        assert_eq!(compute_logistics_cost(0.0, 6.0, 2.5, 12.5).unwrap(), 12.5);
    }

    #[test]
    fn logistics_cost_rejects_bad_consumption() {
        assert!(matches!(
            compute_logistics_cost(10.0, 6.0, 0.0, 0.0),
            Err(DataError::NonPositiveConsumption(_))
        ));
        assert!(compute_logistics_cost(10.0, 6.0, -1.0, 0.0).is_err());
        assert!(compute_logistics_cost(10.0, -6.0, 2.0, 0.0).is_err());
        assert!(compute_logistics_cost(10.0, 6.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn road_type_round_trips_through_str() {
        for t in RoadType::ALL {
            assert_eq!(t.as_str().parse::<RoadType>().unwrap(), t);
        }
        assert!("dirt_track".parse::<RoadType>().is_err());
    }

    #[test]
    fn default_table_has_five_positive_rates() {
        let table = RoadTypeTable::default();
        assert_eq!(table.iter().count(), 5);
        assert!(table.iter().all(|(_, r)| r > 0.0));
        assert_eq!(table.death_rate(RoadType::SingleTwoWay), 22.3);
        assert!(table.with_rate(RoadType::CentralLine, 0.0).is_err());
    }

    #[test]
    fn traffic_validation() {
        let ok = TrafficStats {
            federal_daily_volume: 10.0,
            sp_heavy_count: 2.0,
            sp_total_count: 5.0,
            accident_count: 1.0,
        };
        assert!(ok.validate().is_ok());
        let bad = TrafficStats {
            sp_heavy_count: 6.0,
            ..ok
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn logistics_cost_is_linear(
            len in 0.0f64..1e4,
            tolls in 0.0f64..1e3,
            price in 0.0f64..20.0,
            cons in 0.1f64..10.0,
            k in 0.0f64..100.0,
        ) {
            let base = compute_logistics_cost(len, price, cons, 0.0).unwrap();
            let scaled = compute_logistics_cost(k * len, price, cons, 0.0).unwrap();
            prop_assert!((scaled - k * base).abs() <= 1e-9 * (1.0 + scaled.abs()));

            let with_tolls = compute_logistics_cost(len, price, cons, tolls).unwrap();
            prop_assert!((with_tolls - base - tolls).abs() <= 1e-9 * (1.0 + with_tolls.abs()));
        }
    }
}
