//! Accident probabilities from traffic statistics and road characteristics.
//!
//! A single general probability is derived from national counts; each arc
//! then scales it by an exposure factor, the length-weighted average over
//! its segments of (flow index x road-type index). An index above 1.0 means
//! the road is riskier than the average road of the problem.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::domain::{Arc, DataError, Network, Road, RoadTypeTable, TrafficStats};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("zero total state volume")]
    ZeroStateVolume,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no heavy vehicles to attribute {accidents} accidents to")]
    NoHeavyVehicles { accidents: f64 },
    #[error("{accidents} accidents exceed the {heavy_vehicles} heavy vehicles (probability above 1)")]
    AccidentsExceedVehicles { accidents: f64, heavy_vehicles: f64 },
    #[error("empty road set")]
    EmptyRoadSet,
    #[error("mean heavy-vehicle flow over the road set is zero")]
    ZeroMeanFlow,
    #[error("no indexes for road {road_id:?} (arc {from}->{to})")]
    MissingIndex {
        road_id: String,
        from: String,
        to: String,
    },
    #[error("arc {from}->{to} has non-positive length")]
    NonPositiveLength { from: String, to: String },
    #[error("general probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("exposure must be non-negative, got {0}")]
    InvalidExposure(f64),
    #[error("exposure drives probability above certainty ({p_general} x {exposure} = {product})")]
    AboveCertainty {
        p_general: f64,
        exposure: f64,
        product: f64,
    },
}

/// Intermediate values of the general probability computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralProbability {
    /// Share of heavy vehicles in the state counts.
    pub heavy_share: f64,
    /// Estimated daily heavy vehicles on federal roads.
    pub heavy_vehicles: f64,
    /// Accidents per heavy vehicle, as a fraction.
    pub probability: f64,
}

/// Accident probability for any heavy vehicle on any road.
pub fn general_probability(stats: &TrafficStats) -> Result<GeneralProbability, RiskError> {
    if stats.sp_total_count == 0.0 {
        return Err(RiskError::ZeroStateVolume);
    }
    stats.validate()?;
    let heavy_share = stats.sp_heavy_count / stats.sp_total_count;
    let heavy_vehicles = heavy_share * stats.federal_daily_volume;
    let probability = if stats.accident_count == 0.0 {
        0.0
    } else if heavy_vehicles == 0.0 {
        return Err(RiskError::NoHeavyVehicles {
            accidents: stats.accident_count,
        });
    } else {
        stats.accident_count / heavy_vehicles
    };
    if probability > 1.0 {
        return Err(RiskError::AccidentsExceedVehicles {
            accidents: stats.accident_count,
            heavy_vehicles,
        });
    }
    Ok(GeneralProbability {
        heavy_share,
        heavy_vehicles,
        probability,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadIndexes {
    pub road_id: String,
    /// Flow relative to the mean flow of the road set.
    pub flow_index: f64,
    /// Death rate relative to the mean over all five road categories.
    pub type_index: f64,
    pub mean_flow: f64,
    pub mean_death_rate: f64,
}

/// Mean over the road set of heavy-vehicle flows.
pub fn mean_flow(roads: &[Road]) -> Result<f64, RiskError> {
    if roads.is_empty() {
        return Err(RiskError::EmptyRoadSet);
    }
    Ok(roads.iter().map(|r| r.heavy_vehicle_flow).sum::<f64>() / roads.len() as f64)
}

/// Mean death rate over every category of the table, used or not.
pub fn mean_death_rate(types: &RoadTypeTable) -> f64 {
    types.iter().map(|(_, r)| r).sum::<f64>() / types.len() as f64
}

/// Flow and type indexes of every road in the problem's road set.
pub fn road_indexes(
    roads: &[Road],
    types: &RoadTypeTable,
) -> Result<BTreeMap<String, RoadIndexes>, RiskError> {
    let x_bar = mean_flow(roads)?;
    if x_bar == 0.0 {
        return Err(RiskError::ZeroMeanFlow);
    }
    let y_bar = mean_death_rate(types);
    Ok(roads
        .iter()
        .map(|r| {
            let idx = RoadIndexes {
                road_id: r.id.clone(),
                flow_index: r.heavy_vehicle_flow / x_bar,
                type_index: types.death_rate(r.road_type) / y_bar,
                mean_flow: x_bar,
                mean_death_rate: y_bar,
            };
            (r.id.clone(), idx)
        })
        .collect())
}

/// Length-weighted average of `flow_index * type_index` over the arc's segments.
pub fn arc_exposure(arc: &Arc, indexes: &BTreeMap<String, RoadIndexes>) -> Result<f64, RiskError> {
    if !(arc.total_length_km > 0.0) {
        return Err(RiskError::NonPositiveLength {
            from: arc.from.clone(),
            to: arc.to.clone(),
        });
    }
    let mut weighted = 0.0;
    for seg in &arc.segments {
        let idx = indexes
            .get(&seg.road_id)
            .ok_or_else(|| RiskError::MissingIndex {
                road_id: seg.road_id.clone(),
                from: arc.from.clone(),
                to: arc.to.clone(),
            })?;
        weighted += idx.flow_index * idx.type_index * seg.length_km;
    }
    Ok(weighted / arc.total_length_km)
}

/// `p_general * exposure`; a product above 1 is an error, never clamped.
pub fn arc_accident_probability(p_general: f64, exposure: f64) -> Result<f64, RiskError> {
    if !(0.0..=1.0).contains(&p_general) {
        return Err(RiskError::InvalidProbability(p_general));
    }
    if !(exposure >= 0.0 && exposure.is_finite()) {
        return Err(RiskError::InvalidExposure(exposure));
    }
    let product = p_general * exposure;
    if product > 1.0 {
        return Err(RiskError::AboveCertainty {
            p_general,
            exposure,
            product,
        });
    }
    Ok(product)
}

/// Fills `exposure` and `accident_probability` on every arc of the network.
pub fn annotate_network(
    network: &mut Network,
    p_general: f64,
    types: &RoadTypeTable,
) -> Result<(), RiskError> {
    let indexes = road_indexes(network.roads(), types)?;
    network.update_file_arcs(|_, arc| {
        let e = arc_exposure(arc, &indexes)?;
        arc.exposure = Some(e);
        arc.accident_probability = Some(arc_accident_probability(p_general, e)?);
        Ok::<_, RiskError>(())
    })
}

/// `from,to,exposure,paccident_pct` for every listed arc.
pub fn write_probability_report<W: Write>(network: &Network, mut out: W) -> std::io::Result<()> {
    writeln!(out, "from,to,exposure,paccident_pct")?;
    for arc in network.file_arcs() {
        let (Some(e), Some(p)) = (arc.exposure, arc.accident_probability) else {
            continue;
        };
        writeln!(out, "{},{},{:.9},{:.6}", arc.from, arc.to, e, p * 100.0)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{RoadSegment, RoadType};
    use proptest::prelude::*;

    fn road(id: &str, t: RoadType, flow: f64) -> Road {
        Road {
            id: id.into(),
            road_type: t,
            heavy_vehicle_flow: flow,
        }
    }

    fn arc(segs: &[(&str, f64)]) -> Arc {
        Arc::new(
            "a",
            "b",
            segs.iter()
                .map(|&(id, l)| RoadSegment {
                    road_id: id.into(),
                    length_km: l,
                })
                .collect(),
            0.0,
        )
    }

    fn stats(v: f64, hv_sp: f64, v_sp: f64, n: f64) -> TrafficStats {
        TrafficStats {
            federal_daily_volume: v,
            sp_heavy_count: hv_sp,
            sp_total_count: v_sp,
            accident_count: n,
        }
    }

    #[test]
    fn general_probability_examples() {
        assert_eq!(
            general_probability(&stats(5e5, 1e3, 2e3, 0.0)).unwrap().probability,
            0.0
        );
        let g = general_probability(&stats(1e6, 2e5, 1e6, 1e3)).unwrap();
        assert!((g.heavy_share - 0.2).abs() < 1e-15);
        assert!((g.heavy_vehicles - 200_000.0).abs() < 1e-9);
        assert!((g.probability - 0.005).abs() < 1e-15);

        let err = general_probability(&stats(1e6, 0.0, 0.0, 1.0)).unwrap_err();
        assert_eq!(err.to_string(), "zero total state volume");
        assert!(matches!(
            general_probability(&stats(10.0, 1.0, 1.0, 11.0)),
            Err(RiskError::AccidentsExceedVehicles { .. })
        ));
        assert!(matches!(
            general_probability(&stats(10.0, 0.0, 1.0, 1.0)),
            Err(RiskError::NoHeavyVehicles { .. })
        ));
    }

    #[test]
    fn mean_death_rate_of_accident_panel() {
        let y_bar = mean_death_rate(&RoadTypeTable::default());
        assert_eq!(y_bar, 14.6);
        let idx = road_indexes(
            &[road("r", RoadType::SingleTwoWay, 10.0)],
            &RoadTypeTable::default(),
        )
        .unwrap();
        assert!((idx["r"].type_index - 22.3 / 14.6).abs() < 1e-12);
        assert!((idx["r"].type_index - 1.52740).abs() < 1e-5);
        // A single road is its own mean.
        assert_eq!(idx["r"].flow_index, 1.0);
    }

    #[test]
    fn index_errors() {
        let t = RoadTypeTable::default();
        assert!(matches!(road_indexes(&[], &t), Err(RiskError::EmptyRoadSet)));
        assert!(matches!(
            road_indexes(&[road("a", RoadType::CentralLine, 0.0)], &t),
            Err(RiskError::ZeroMeanFlow)
        ));
    }

    #[test]
    fn exposure_examples() {
        let t = RoadTypeTable::default();
        let roads = [
            road("A", RoadType::CentralLine, 100.0),
            road("B", RoadType::SingleTwoWay, 300.0),
        ];
        let idx = road_indexes(&roads, &t).unwrap();
        let single = arc_exposure(&arc(&[("B", 7.0)]), &idx).unwrap();
        let b = &idx["B"];
        assert!((single - b.flow_index * b.type_index).abs() < 1e-15);

        // Hand-built indexes: products 1.0 and 2.0 over equal lengths.
        let mut manual = BTreeMap::new();
        for (id, iv, it) in [("X", 1.0, 1.0), ("Y", 2.0, 1.0)] {
            manual.insert(
                id.to_string(),
                RoadIndexes {
                    road_id: id.into(),
                    flow_index: iv,
                    type_index: it,
                    mean_flow: 1.0,
                    mean_death_rate: 1.0,
                },
            );
        }
        let e = arc_exposure(&arc(&[("X", 5.0), ("Y", 5.0)]), &manual).unwrap();
        assert!((e - 1.5).abs() < 1e-15);
        let neutral = arc_exposure(&arc(&[("X", 2.0), ("X", 3.0)]), &manual).unwrap();
        assert!((neutral - 1.0).abs() < 1e-15);

        assert!(matches!(
            arc_exposure(&arc(&[("Q", 1.0)]), &manual),
            Err(RiskError::MissingIndex { .. })
        ));
    }

    #[test]
    fn accident_probability_examples() {
        assert_eq!(arc_accident_probability(0.005, 0.0).unwrap(), 0.0);
        assert!((arc_accident_probability(0.005, 1.2).unwrap() - 0.006).abs() < 1e-15);
        let err = arc_accident_probability(0.5, 3.0).unwrap_err();
        assert!(err
            .to_string()
            .contains("exposure drives probability above certainty"));
        assert!(arc_accident_probability(1.5, 0.1).is_err());
        assert!(arc_accident_probability(0.1, -0.1).is_err());
    }

    #[test]
    fn higher_flow_same_type_is_riskier() {
        let t = RoadTypeTable::default();
        let roads = [
            road("SP304", RoadType::CentralLine, 6943.0),
            road("SP147", RoadType::CentralLine, 535.0),
        ];
        let idx = road_indexes(&roads, &t).unwrap();
        let hi = arc_exposure(&arc(&[("SP304", 30.0)]), &idx).unwrap();
        let lo = arc_exposure(&arc(&[("SP147", 60.0)]), &idx).unwrap();
        let p = 0.005;
        assert!(
            arc_accident_probability(p, hi).unwrap() > arc_accident_probability(p, lo).unwrap()
        );
    }

    fn road_set() -> impl Strategy<Value = Vec<Road>> {
        prop::collection::vec((0.0f64..20_000.0, 0usize..5), 1..30).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (flow, t))| road(&format!("R{i}"), RoadType::ALL[t], flow))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn flow_index_identities(mut roads in road_set(), bump in 1.0f64..100.0) {
            // Guarantee a non-zero mean.
            roads[0].heavy_vehicle_flow += bump;
            let idx = road_indexes(&roads, &RoadTypeTable::default()).unwrap();
            let x_bar = mean_flow(&roads).unwrap();
            let mut sum = 0.0;
            for r in &roads {
                let i = &idx[&r.id];
                prop_assert_eq!(i.flow_index, r.heavy_vehicle_flow / x_bar);
                let textbook = 1.0 + (r.heavy_vehicle_flow - x_bar) / x_bar;
                prop_assert!((i.flow_index - textbook).abs() < 1e-12);
                prop_assert!(i.flow_index >= 0.0 && i.type_index > 0.0);
                sum += i.flow_index;
            }
            prop_assert!((sum / roads.len() as f64 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn type_index_mean_is_one(rates in prop::array::uniform5(0.1f64..100.0)) {
            let table = RoadTypeTable::new(rates).unwrap();
            let y_bar = mean_death_rate(&table);
            let mean: f64 = table.iter().map(|(_, r)| r / y_bar).sum::<f64>() / 5.0;
            prop_assert!((mean - 1.0).abs() < 1e-12);
        }

        #[test]
        fn probability_monotone_in_own_flow(
            roads in road_set(),
            extra in 0.0f64..5_000.0,
            p in 0.0f64..0.01,
        ) {
            let mut roads = roads;
            roads[0].heavy_vehicle_flow += 1.0;
            let t = RoadTypeTable::default();
            let a = arc(&[("R0", 12.0)]);
            let before = arc_exposure(&a, &road_indexes(&roads, &t).unwrap()).unwrap();
            roads[0].heavy_vehicle_flow += extra;
            let after = arc_exposure(&a, &road_indexes(&roads, &t).unwrap()).unwrap();
            prop_assert!(after >= before - 1e-12);
            let pb = p * before;
            let pa = p * after;
            prop_assert!(pa >= pb - 1e-15);
        }

        #[test]
        fn probability_monotone_in_own_death_rate(
            roads in road_set(),
            extra in 0.0f64..50.0,
        ) {
            let mut roads = roads;
            roads[0].heavy_vehicle_flow += 1.0;
            let t = RoadTypeTable::default();
            let ty = roads[0].road_type;
            let a = arc(&[("R0", 3.0), ("R0", 4.0)]);
            let before = arc_exposure(&a, &road_indexes(&roads, &t).unwrap()).unwrap();
            let t2 = t.with_rate(ty, t.death_rate(ty) + extra).unwrap();
            let after = arc_exposure(&a, &road_indexes(&roads, &t2).unwrap()).unwrap();
            prop_assert!(after >= before - 1e-12);
        }

        #[test]
        fn exposure_monotone_in_any_segment_index(
            ivs in prop::collection::vec(0.0f64..5.0, 1..5),
            lens in prop::collection::vec(0.1f64..50.0, 5),
            which in 0usize..5,
            extra in 0.0f64..3.0,
        ) {
            let mut table = BTreeMap::new();
            for (i, iv) in ivs.iter().enumerate() {
                table.insert(format!("R{i}"), RoadIndexes {
                    road_id: format!("R{i}"),
                    flow_index: *iv,
                    type_index: 1.0 + i as f64 * 0.1,
                    mean_flow: 1.0,
                    mean_death_rate: 1.0,
                });
            }
            let segs: Vec<(String, f64)> =
                ivs.iter().enumerate().map(|(i, _)| (format!("R{i}"), lens[i])).collect();
            let segs_ref: Vec<(&str, f64)> = segs.iter().map(|(s, l)| (s.as_str(), *l)).collect();
            let a = arc(&segs_ref);
            let before = arc_exposure(&a, &table).unwrap();
            let key = format!("R{}", which % ivs.len());
            table.get_mut(&key).unwrap().flow_index += extra;
            let after = arc_exposure(&a, &table).unwrap();
            prop_assert!(after >= before - 1e-12);
        }
    }
}
