use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, Network};

/// Index into [`Instance::nodes`]; the depot is always 0.
pub type NodeIdx = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub name: String,
    /// (latitude, longitude) when known.
    pub coords: Option<(f64, f64)>,
}

impl Node {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            coords: None,
        }
    }
}

/// Logistics and risk cost of travelling one directed leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegCost {
    pub logistics: f64,
    pub risk: Option<f64>,
}

/// Dense directed cost table over instance node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    legs: Vec<Option<LegCost>>,
}

impl CostMatrix {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            legs: vec![None; size * size],
        }
    }

    /// Full matrices with every risk set. Diagonals are ignored.
    pub fn from_dense(logistics: &[Vec<f64>], risk: &[Vec<f64>]) -> Self {
        let size = logistics.len();
        let mut m = Self::new(size);
        for i in 0..size {
            for j in 0..size {
                if i != j {
                    m.set(
                        i,
                        j,
                        LegCost {
                            logistics: logistics[i][j],
                            risk: Some(risk[i][j]),
                        },
                    );
                }
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn set(&mut self, from: NodeIdx, to: NodeIdx, leg: LegCost) {
        self.legs[from * self.size + to] = Some(leg);
    }

    pub fn get(&self, from: NodeIdx, to: NodeIdx) -> Option<&LegCost> {
        self.legs[from * self.size + to].as_ref()
    }
}

/// An instance file before it is bound to a network's arc costs.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDef {
    pub nodes: Vec<Node>,
    pub depot: String,
    pub demands: BTreeMap<String, u32>,
    pub vehicle_count: usize,
    pub capacity: u32,
    pub allow_idle_vehicles: bool,
}

impl InstanceDef {
    /// Resolves every required leg against the network. The depot becomes
    /// node 0; customers keep file order.
    pub fn bind(&self, network: &Network) -> Result<Instance, DataError> {
        let depot_pos = self
            .nodes
            .iter()
            .position(|n| n.id == self.depot)
            .ok_or_else(|| {
                DataError::Instance(format!("depot {:?} is not among the nodes", self.depot))
            })?;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        nodes.push(self.nodes[depot_pos].clone());
        nodes.extend(
            self.nodes
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != depot_pos)
                .map(|(_, n)| n.clone()),
        );
        for id in self.demands.keys() {
            if !nodes.iter().any(|n| &n.id == id) {
                return Err(DataError::Instance(format!(
                    "demand given for unknown node {id:?}"
                )));
            }
        }
        let demands = nodes
            .iter()
            .map(|n| self.demands.get(&n.id).copied().unwrap_or(0))
            .collect();

        let mut costs = CostMatrix::new(nodes.len());
        for (i, a) in nodes.iter().enumerate() {
            for (j, b) in nodes.iter().enumerate() {
                if i == j {
                    continue;
                }
                let arc = network.arc(&a.id, &b.id).ok_or_else(|| DataError::MissingArc {
                    from: a.id.clone(),
                    to: b.id.clone(),
                })?;
                let logistics =
                    arc.logistics_cost
                        .ok_or_else(|| DataError::MissingLogisticsCost {
                            from: a.id.clone(),
                            to: b.id.clone(),
                        })?;
                costs.set(
                    i,
                    j,
                    LegCost {
                        logistics,
                        risk: arc.risk_cost,
                    },
                );
            }
        }
        let mut instance = Instance::new(nodes, demands, self.vehicle_count, self.capacity, costs)?;
        instance.allow_idle_vehicles = self.allow_idle_vehicles;
        Ok(instance)
    }
}

/// A CVRP instance: one depot (index 0), customers `1..=n`, a homogeneous
/// fleet and a directed cost table.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    nodes: Vec<Node>,
    demands: Vec<u32>,
    pub vehicle_count: usize,
    pub capacity: u32,
    /// Accept solutions using fewer than `vehicle_count` routes.
    pub allow_idle_vehicles: bool,
    costs: CostMatrix,
}

impl Instance {
    /// `nodes[0]` is the depot; `demands` is index-aligned with `nodes`.
    pub fn new(
        nodes: Vec<Node>,
        demands: Vec<u32>,
        vehicle_count: usize,
        capacity: u32,
        costs: CostMatrix,
    ) -> Result<Self, DataError> {
        if nodes.is_empty() {
            return Err(DataError::Instance("no depot".into()));
        }
        if demands.len() != nodes.len() {
            return Err(DataError::Instance(format!(
                "{} demands for {} nodes",
                demands.len(),
                nodes.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(DataError::Instance(format!("duplicate node id {:?}", n.id)));
            }
        }
        if demands[0] != 0 {
            return Err(DataError::Instance(format!(
                "depot {:?} has demand {}",
                nodes[0].id, demands[0]
            )));
        }
        if let Some(i) = (1..nodes.len()).find(|&i| demands[i] == 0) {
            return Err(DataError::Instance(format!(
                "customer {:?} has no demand",
                nodes[i].id
            )));
        }
        if vehicle_count == 0 {
            return Err(DataError::Instance("vehicle_count must be at least 1".into()));
        }
        if capacity == 0 {
            return Err(DataError::Instance("capacity must be positive".into()));
        }
        if costs.size() != nodes.len() {
            return Err(DataError::Instance(format!(
                "cost table covers {} nodes, instance has {}",
                costs.size(),
                nodes.len()
            )));
        }
        for i in 0..nodes.len() {
            for j in 0..nodes.len() {
                if i != j && costs.get(i, j).is_none() {
                    return Err(DataError::MissingArc {
                        from: nodes[i].id.clone(),
                        to: nodes[j].id.clone(),
                    });
                }
            }
        }
        Ok(Self {
            nodes,
            demands,
            vehicle_count,
            capacity,
            allow_idle_vehicles: false,
            costs,
        })
    }

    /// Instance with generated node ids `"0"`, `"1"`, ...; `demands` excludes
    /// the depot.
    pub fn from_matrices(
        customer_demands: &[u32],
        vehicle_count: usize,
        capacity: u32,
        logistics: &[Vec<f64>],
        risk: &[Vec<f64>],
    ) -> Result<Self, DataError> {
        let n = customer_demands.len();
        let nodes = (0..=n).map(|i| Node::new(i.to_string())).collect();
        let mut demands = Vec::with_capacity(n + 1);
        demands.push(0);
        demands.extend_from_slice(customer_demands);
        Self::new(
            nodes,
            demands,
            vehicle_count,
            capacity,
            CostMatrix::from_dense(logistics, risk),
        )
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx]
    }

    pub fn depot(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn customer_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn customers(&self) -> std::ops::RangeInclusive<NodeIdx> {
        1..=self.customer_count()
    }

    pub fn demand(&self, idx: NodeIdx) -> u32 {
        self.demands[idx]
    }

    pub fn demands(&self) -> &[u32] {
        &self.demands
    }

    pub fn total_demand(&self) -> u64 {
        self.demands.iter().map(|&d| u64::from(d)).sum()
    }

    pub fn costs(&self) -> &CostMatrix {
        &self.costs
    }

    pub fn leg(&self, from: NodeIdx, to: NodeIdx) -> &LegCost {
        self.costs
            .get(from, to)
            .expect("instance invariant: every off-diagonal leg is present")
    }

    pub fn index_of(&self, id: &str) -> Option<NodeIdx> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Describes the first aggregate that makes the instance unsolvable.
    pub fn feasibility(&self) -> FleetFeasibility {
        let fleet = self.vehicle_count as u64 * u64::from(self.capacity);
        if self.total_demand() > fleet {
            return FleetFeasibility::Infeasible(format!(
                "total demand {} exceeds fleet capacity {} ({} vehicles x {})",
                self.total_demand(),
                fleet,
                self.vehicle_count,
                self.capacity
            ));
        }
        if let Some(i) = self.customers().find(|&i| self.demands[i] > self.capacity) {
            return FleetFeasibility::Infeasible(format!(
                "demand {} of customer {:?} exceeds vehicle capacity {}",
                self.demands[i], self.nodes[i].id, self.capacity
            ));
        }
        if !self.allow_idle_vehicles && self.customer_count() < self.vehicle_count {
            return FleetFeasibility::Infeasible(format!(
                "{} customers cannot keep {} vehicles busy (enable allow_idle_vehicles)",
                self.customer_count(),
                self.vehicle_count
            ));
        }
        FleetFeasibility::Feasible
    }

    /// SHA-256 over every field that influences a solve, as lowercase hex.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"riskroute-instance-v1\n");
        for (node, demand) in self.nodes.iter().zip(&self.demands) {
            h.update(node.id.as_bytes());
            h.update([0]);
            h.update(node.name.as_bytes());
            h.update([0]);
            if let Some((lat, lon)) = node.coords {
                h.update(lat.to_bits().to_le_bytes());
                h.update(lon.to_bits().to_le_bytes());
            }
            h.update(demand.to_le_bytes());
        }
        h.update((self.vehicle_count as u64).to_le_bytes());
        h.update(self.capacity.to_le_bytes());
        h.update([u8::from(self.allow_idle_vehicles)]);
        for leg in &self.costs.legs {
            match leg {
                None => h.update([0]),
                Some(leg) => {
                    h.update([1]);
                    h.update(leg.logistics.to_bits().to_le_bytes());
                    match leg.risk {
                        None => h.update([0]),
                        Some(r) => {
                            h.update([1]);
                            h.update(r.to_bits().to_le_bytes());
                        }
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FleetFeasibility {
    Feasible,
    Infeasible(String),
}
