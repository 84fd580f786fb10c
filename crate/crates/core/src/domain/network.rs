use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DataError, FuelPolicy, RoadType, LENGTH_TOLERANCE};

/// A physical road of the problem's road set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: String,
    pub road_type: RoadType,
    /// Heavy vehicles per day.
    pub heavy_vehicle_flow: f64,
}

/// The stretch of one road travelled inside an arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub road_id: String,
    pub length_km: f64,
}

/// A directed origin-destination leg.
///
/// Derived fields start as `None` and are filled in by the logistics, risk
/// probability and Monte Carlo stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: String,
    pub to: String,
    pub segments: Vec<RoadSegment>,
    pub total_length_km: f64,
    pub tolls: f64,
    pub logistics_cost: Option<f64>,
    pub exposure: Option<f64>,
    pub accident_probability: Option<f64>,
    pub risk_cost: Option<f64>,
    pub risk_std_error: Option<f64>,
    /// Index of the file arc this one mirrors, when it was not listed itself.
    pub mirror_of: Option<usize>,
}

impl Arc {
    /// Arc whose length is the sum of its segments.
    pub fn new(
        from: impl Into<String>,
        to: impl Into<String>,
        segments: Vec<RoadSegment>,
        tolls: f64,
    ) -> Self {
        let total = segments.iter().map(|s| s.length_km).sum();
        Self {
            from: from.into(),
            to: to.into(),
            segments,
            total_length_km: total,
            tolls,
            logistics_cost: None,
            exposure: None,
            accident_probability: None,
            risk_cost: None,
            risk_std_error: None,
            mirror_of: None,
        }
    }

    /// Arc with a stated total length that must agree with its segments.
    pub fn with_total_length(
        from: impl Into<String>,
        to: impl Into<String>,
        segments: Vec<RoadSegment>,
        tolls: f64,
        total_length_km: f64,
    ) -> Result<Self, DataError> {
        let mut arc = Self::new(from, to, segments, tolls);
        let sum = arc.total_length_km;
        let scale = total_length_km.abs().max(sum.abs()).max(f64::MIN_POSITIVE);
        if (sum - total_length_km).abs() > LENGTH_TOLERANCE * scale {
            return Err(DataError::LengthMismatch {
                from: arc.from,
                to: arc.to,
                sum,
                total: total_length_km,
            });
        }
        arc.total_length_km = total_length_km;
        Ok(arc)
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.from, &self.to)
    }

    fn reversed(&self, mirror_of: usize) -> Self {
        let mut segments = self.segments.clone();
        segments.reverse();
        Self {
            from: self.to.clone(),
            to: self.from.clone(),
            segments,
            total_length_km: self.total_length_km,
            tolls: self.tolls,
            logistics_cost: None,
            exposure: None,
            accident_probability: None,
            risk_cost: None,
            risk_std_error: None,
            mirror_of: Some(mirror_of),
        }
    }

    fn copy_derived_from(&mut self, other: &Arc) {
        self.logistics_cost = other.logistics_cost;
        self.exposure = other.exposure;
        self.accident_probability = other.accident_probability;
        self.risk_cost = other.risk_cost;
        self.risk_std_error = other.risk_std_error;
    }
}

/// Roads plus directed arcs. Arcs listed in one direction only are mirrored
/// with reversed segment order; listing both directions overrides that.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    roads: Vec<Road>,
    road_index: HashMap<String, usize>,
    arcs: Vec<Arc>,
    arc_index: HashMap<(String, String), usize>,
}

impl Network {
    /// Builds a network from roads and file-order arcs.
    ///
    /// Every segment must reference a known road and have positive length.
    pub fn new(roads: Vec<Road>, file_arcs: Vec<Arc>) -> Result<Self, DataError> {
        let mut road_index = HashMap::with_capacity(roads.len());
        for (i, r) in roads.iter().enumerate() {
            if road_index.insert(r.id.clone(), i).is_some() {
                return Err(DataError::Format {
                    file: "roads".into(),
                    message: format!("duplicate road id {:?}", r.id),
                });
            }
        }
        let mut arcs: Vec<Arc> = Vec::with_capacity(file_arcs.len() * 2);
        let mut arc_index = HashMap::with_capacity(file_arcs.len() * 2);
        for mut arc in file_arcs {
            if arc.from == arc.to {
                return Err(DataError::Format {
                    file: "arcs".into(),
                    message: format!("arc {}->{} is a loop", arc.from, arc.to),
                });
            }
            if arc.segments.is_empty() {
                return Err(DataError::Format {
                    file: "arcs".into(),
                    message: format!("arc {}->{} has no segments", arc.from, arc.to),
                });
            }
            for seg in &arc.segments {
                if !road_index.contains_key(&seg.road_id) {
                    return Err(DataError::Format {
                        file: "arcs".into(),
                        message: format!(
                            "arc {}->{} references unknown road id {:?}",
                            arc.from, arc.to, seg.road_id
                        ),
                    });
                }
                if !(seg.length_km > 0.0) {
                    return Err(DataError::Format {
                        file: "arcs".into(),
                        message: format!(
                            "arc {}->{}: segment on {} must have positive length",
                            arc.from, arc.to, seg.road_id
                        ),
                    });
                }
            }
            arc.mirror_of = None;
            let key = (arc.from.clone(), arc.to.clone());
            if arc_index.insert(key, arcs.len()).is_some() {
                return Err(DataError::Format {
                    file: "arcs".into(),
                    message: format!("arc {}->{} is defined twice", arc.from, arc.to),
                });
            }
            arcs.push(arc);
        }
        let listed = arcs.len();
        for i in 0..listed {
            let rev_key = (arcs[i].to.clone(), arcs[i].from.clone());
            if let std::collections::hash_map::Entry::Vacant(slot) = arc_index.entry(rev_key) {
                slot.insert(arcs.len());
                let mirror = arcs[i].reversed(i);
                arcs.push(mirror);
            }
        }
        Ok(Self {
            roads,
            road_index,
            arcs,
            arc_index,
        })
    }

    pub fn roads(&self) -> &[Road] {
        &self.roads
    }

    pub fn road(&self, id: &str) -> Option<&Road> {
        self.road_index.get(id).map(|&i| &self.roads[i])
    }

    /// All directed arcs: file arcs first, then generated mirrors.
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Arcs as listed in the arcs file.
    pub fn file_arcs(&self) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().filter(|a| a.mirror_of.is_none())
    }

    pub fn arc(&self, from: &str, to: &str) -> Option<&Arc> {
        self.arc_index
            .get(&(from.to_owned(), to.to_owned()))
            .map(|&i| &self.arcs[i])
    }

    /// Sets `logistics_cost` on every arc.
    pub fn apply_fuel_policy(&mut self, policy: &FuelPolicy) -> Result<(), DataError> {
        for arc in &mut self.arcs {
            arc.logistics_cost = Some(policy.cost_of(arc)?);
        }
        Ok(())
    }

    /// Applies `f` to every file arc, then copies derived fields onto mirrors
    /// so both directions of a shared link stay identical.
    pub fn update_file_arcs<E>(
        &mut self,
        mut f: impl FnMut(usize, &mut Arc) -> Result<(), E>,
    ) -> Result<(), E> {
        for (i, arc) in self.arcs.iter_mut().enumerate() {
            if arc.mirror_of.is_none() {
                f(i, arc)?;
            }
        }
        self.sync_mirrors();
        Ok(())
    }

    /// Mutable access to file arcs in index order, for bulk updates.
    pub fn file_arc_indices(&self) -> Vec<usize> {
        (0..self.arcs.len())
            .filter(|&i| self.arcs[i].mirror_of.is_none())
            .collect()
    }

    pub fn arc_mut(&mut self, index: usize) -> &mut Arc {
        &mut self.arcs[index]
    }

    pub fn sync_mirrors(&mut self) {
        for i in 0..self.arcs.len() {
            if let Some(src) = self.arcs[i].mirror_of {
                let source = self.arcs[src].clone();
                self.arcs[i].copy_derived_from(&source);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn road(id: &str, flow: f64) -> Road {
        Road {
            id: id.into(),
            road_type: RoadType::CentralLine,
            heavy_vehicle_flow: flow,
        }
    }

    fn seg(id: &str, len: f64) -> RoadSegment {
        RoadSegment {
            road_id: id.into(),
            length_km: len,
        }
    }

    #[test]
    fn mirrors_single_direction_arcs() {
        let net = Network::new(
            vec![road("A", 1.0), road("B", 2.0)],
            vec![Arc::new("x", "y", vec![seg("A", 1.0), seg("B", 2.0)], 3.0)],
        )
        .unwrap();
        assert_eq!(net.arcs().len(), 2);
        let back = net.arc("y", "x").unwrap();
        assert_eq!(back.mirror_of, Some(0));
        assert_eq!(back.segments[0].road_id, "B");
        assert_eq!(back.tolls, 3.0);
        assert_eq!(net.file_arcs().count(), 1);
    }

    #[test]
    fn explicit_reverse_overrides_mirror() {
        let net = Network::new(
            vec![road("A", 1.0)],
            vec![
                Arc::new("x", "y", vec![seg("A", 1.0)], 0.0),
                Arc::new("y", "x", vec![seg("A", 1.5)], 2.0),
            ],
        )
        .unwrap();
        assert_eq!(net.arcs().len(), 2);
        assert_eq!(net.arc("y", "x").unwrap().total_length_km, 1.5);
        assert!(net.arcs().iter().all(|a| a.mirror_of.is_none()));
    }

    #[test]
    fn stated_length_must_match_segments() {
        let ok = Arc::with_total_length("x", "y", vec![seg("A", 1.0), seg("A", 2.0)], 0.0, 3.0);
        assert!(ok.is_ok());
        let bad = Arc::with_total_length("x", "y", vec![seg("A", 1.0)], 0.0, 1.1);
        assert!(matches!(bad, Err(DataError::LengthMismatch { .. })));
    }

    #[test]
    fn rejects_unknown_road_and_duplicates() {
        let err = Network::new(vec![road("A", 1.0)], vec![Arc::new("x", "y", vec![seg("Z", 1.0)], 0.0)])
            .unwrap_err();
        assert!(err.to_string().contains("\"Z\""));
        assert!(Network::new(vec![road("A", 1.0), road("A", 2.0)], vec![]).is_err());
    }

    #[test]
    fn mirrors_receive_derived_fields() {
        let mut net = Network::new(
            vec![road("A", 1.0)],
            vec![Arc::new("x", "y", vec![seg("A", 10.0)], 1.0)],
        )
        .unwrap();
        net.update_file_arcs(|_, a| {
            a.exposure = Some(1.25);
            Ok::<_, ()>(())
        })
        .unwrap();
        assert_eq!(net.arc("y", "x").unwrap().exposure, Some(1.25));
    }
}
