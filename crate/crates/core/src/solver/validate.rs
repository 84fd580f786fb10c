use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{Instance, NodeIdx};

use super::{scalarize, CostModel, Solution, COST_TOLERANCE};

/// The constraint groups of the routing model, checked one by one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    /// Every customer is served exactly once.
    Coverage,
    /// No vehicle carries more than its capacity.
    Capacity,
    /// Each vehicle leaves the depot once.
    DepotDeparture,
    /// Whatever enters a customer leaves it, on the same vehicle.
    FlowConservation,
    /// Each vehicle returns to the depot once.
    DepotArrival,
    /// No vehicle runs a cycle detached from the depot.
    SubtourFreedom,
    /// Reported costs match the instance data.
    Objective,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintFamily::Coverage => "coverage",
            ConstraintFamily::Capacity => "capacity",
            ConstraintFamily::DepotDeparture => "depot departure",
            ConstraintFamily::FlowConservation => "flow conservation",
            ConstraintFamily::DepotArrival => "depot arrival",
            ConstraintFamily::SubtourFreedom => "subtour freedom",
            ConstraintFamily::Objective => "objective",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub family: ConstraintFamily,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, family: ConstraintFamily) -> &Check {
        self.checks
            .iter()
            .find(|c| c.family == family)
            .expect("every family is checked")
    }
}

/// Directed edges chosen for each vehicle over vertices `0..=n+1`, where
/// `0` is the depot as origin and `n + 1` the depot as destination.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeSelection {
    pub vehicles: Vec<Vec<(usize, usize)>>,
}

impl EdgeSelection {
    /// Edges traced by route stop lists; an empty route uses `(0, n+1)`.
    pub fn from_routes<'a>(routes: impl IntoIterator<Item = &'a [NodeIdx]>, customers: usize) -> Self {
        let sink = customers + 1;
        let vehicles = routes
            .into_iter()
            .map(|stops| {
                let mut seq = Vec::with_capacity(stops.len() + 2);
                seq.push(0);
                seq.extend_from_slice(stops);
                seq.push(sink);
                seq.windows(2).map(|w| (w[0], w[1])).collect()
            })
            .collect();
        Self { vehicles }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtour {
    pub vehicle: usize,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubtourError {
    #[error("vehicle {vehicle}: edge {from}->{to} is not in the edge set")]
    InvalidEdge { vehicle: usize, from: usize, to: usize },
    #[error("vehicle {vehicle}: node {node} has in-degree {inflow} and out-degree {outflow}")]
    DegreeMismatch {
        vehicle: usize,
        node: usize,
        inflow: usize,
        outflow: usize,
    },
}

/// Cycles in each vehicle's edge set that do not touch the depot.
///
/// Every customer must have equal in- and out-degree of at most one, the
/// origin may only emit and the destination only absorb. Inputs breaking
/// that are rejected rather than guessed at.
pub fn detect_subtours(
    selection: &EdgeSelection,
    instance: &Instance,
) -> Result<Vec<Subtour>, SubtourError> {
    let n = instance.customer_count();
    let sink = n + 1;
    let mut found = Vec::new();
    for (v, edges) in selection.vehicles.iter().enumerate() {
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        let mut indeg = vec![0usize; n + 2];
        let mut outdeg = vec![0usize; n + 2];
        for &(from, to) in edges {
            let valid = from != to && from <= n && to >= 1 && to <= sink;
            if !valid {
                return Err(SubtourError::InvalidEdge { vehicle: v, from, to });
            }
            outdeg[from] += 1;
            indeg[to] += 1;
            next.insert(from, to);
        }
        for node in 1..=n {
            if indeg[node] != outdeg[node] || indeg[node] > 1 {
                return Err(SubtourError::DegreeMismatch {
                    vehicle: v,
                    node,
                    inflow: indeg[node],
                    outflow: outdeg[node],
                });
            }
        }
        // Edge validation already rules out entering the origin or leaving
        // the sink; each may be used at most once, and together.
        for (node, inflow, outflow) in [(0, indeg[0], outdeg[0]), (sink, indeg[sink], outdeg[sink])] {
            if inflow > 1 || outflow > 1 || outdeg[0] != indeg[sink] {
                return Err(SubtourError::DegreeMismatch {
                    vehicle: v,
                    node,
                    inflow,
                    outflow,
                });
            }
        }

        let mut reached = BTreeSet::new();
        let mut at = 0;
        while let Some(&to) = next.get(&at) {
            if to == sink {
                break;
            }
            reached.insert(to);
            at = to;
        }
        let mut seen = reached;
        for start in 1..=n {
            if outdeg[start] == 0 || seen.contains(&start) {
                continue;
            }
            let mut cycle = Vec::new();
            let mut at = start;
            while seen.insert(at) {
                cycle.push(at);
                at = next[&at];
            }
            cycle.sort_unstable();
            found.push(Subtour { vehicle: v, nodes: cycle });
        }
    }
    Ok(found)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn check(family: ConstraintFamily, problems: Vec<String>) -> Check {
    Check {
        family,
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            "ok".to_string()
        } else {
            problems.join("; ")
        },
    }
}

/// Checks `solution` against every constraint family of `instance`.
///
/// The report always has one entry per family, in declaration order; the
/// detail names the offending customer, route or vehicle.
pub fn validate_solution(instance: &Instance, solution: &Solution) -> ValidationReport {
    let n = instance.customer_count();
    let name = |i: NodeIdx| {
        if i <= n {
            format!("{:?}", instance.node(i).id)
        } else {
            format!("#{i}")
        }
    };
    let mut checks = Vec::with_capacity(7);

    let mut visits = vec![0usize; n + 1];
    let mut coverage = Vec::new();
    for r in &solution.routes {
        for &s in &r.stops {
            if s == 0 || s > n {
                coverage.push(format!("vehicle {} visits unknown node {}", r.vehicle_id, name(s)));
            } else {
                visits[s] += 1;
            }
        }
    }
    for c in 1..=n {
        if visits[c] != 1 {
            coverage.push(format!("customer {} visited {} times", name(c), visits[c]));
        }
    }
    checks.push(check(ConstraintFamily::Coverage, coverage));

    let mut capacity = Vec::new();
    for r in &solution.routes {
        let load: u64 = r
            .stops
            .iter()
            .filter(|&&s| s >= 1 && s <= n)
            .map(|&s| u64::from(instance.demand(s)))
            .sum();
        if load > u64::from(instance.capacity) {
            capacity.push(format!(
                "vehicle {} carries {load} over capacity {}",
                r.vehicle_id, instance.capacity
            ));
        }
        if load != r.load {
            capacity.push(format!(
                "vehicle {} reports load {} but carries {load}",
                r.vehicle_id, r.load
            ));
        }
    }
    checks.push(check(ConstraintFamily::Capacity, capacity));

    let mut departure = Vec::new();
    let k = instance.vehicle_count;
    let used = solution.routes.len();
    if used > k {
        departure.push(format!("{used} routes for {k} vehicles"));
    } else if used < k && !instance.allow_idle_vehicles {
        departure.push(format!("{} of {k} vehicles never leave the depot", k - used));
    }
    let mut ids = BTreeSet::new();
    for r in &solution.routes {
        if r.vehicle_id == 0 || r.vehicle_id > k || !ids.insert(r.vehicle_id) {
            departure.push(format!("vehicle id {} is out of range or repeated", r.vehicle_id));
        }
        if r.stops.is_empty() && !instance.allow_idle_vehicles {
            departure.push(format!("vehicle {} leaves the depot without customers", r.vehicle_id));
        }
    }
    checks.push(check(ConstraintFamily::DepotDeparture, departure));

    let in_range: Vec<Vec<NodeIdx>> = solution
        .routes
        .iter()
        .map(|r| r.stops.iter().copied().filter(|&s| s >= 1 && s <= n).collect())
        .collect();
    let selection = EdgeSelection::from_routes(in_range.iter().map(Vec::as_slice), n);
    let mut flow = Vec::new();
    for (v, edges) in selection.vehicles.iter().enumerate() {
        let mut indeg = vec![0usize; n + 2];
        let mut outdeg = vec![0usize; n + 2];
        for &(a, b) in edges {
            outdeg[a] += 1;
            indeg[b] += 1;
        }
        for c in 1..=n {
            if indeg[c] != outdeg[c] || indeg[c] > 1 {
                flow.push(format!(
                    "vehicle {} enters customer {} {} times and leaves {} times",
                    solution.routes[v].vehicle_id,
                    name(c),
                    indeg[c],
                    outdeg[c]
                ));
            }
        }
    }
    checks.push(check(ConstraintFamily::FlowConservation, flow));

    let mut arrival = Vec::new();
    for (v, edges) in selection.vehicles.iter().enumerate() {
        let back = edges.iter().filter(|&&(_, b)| b == n + 1).count();
        if back != 1 {
            arrival.push(format!(
                "vehicle {} returns to the depot {back} times",
                solution.routes[v].vehicle_id
            ));
        }
    }
    checks.push(check(ConstraintFamily::DepotArrival, arrival));

    let subtours = match detect_subtours(&selection, instance) {
        Ok(found) => found
            .into_iter()
            .map(|s| {
                let names: Vec<String> = s.nodes.iter().map(|&i| name(i)).collect();
                format!(
                    "vehicle {} cycles through {} without the depot",
                    solution.routes[s.vehicle].vehicle_id,
                    names.join(", ")
                )
            })
            .collect(),
        Err(e) => vec![e.to_string()],
    };
    checks.push(check(ConstraintFamily::SubtourFreedom, subtours));

    checks.push(check(ConstraintFamily::Objective, objective_problems(instance, solution, n)));
    ValidationReport { checks }
}

fn objective_problems(instance: &Instance, solution: &Solution, n: usize) -> Vec<String> {
    let mut problems = Vec::new();
    let model = match CostModel::new(instance, solution.alpha) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    let mut total_c = 0.0;
    let mut total_r = 0.0;
    for r in &solution.routes {
        if r.stops.iter().any(|&s| s == 0 || s > n) {
            problems.push(format!("vehicle {} cannot be costed", r.vehicle_id));
            continue;
        }
        let (c, k) = model.route_costs(&r.stops);
        if !close(c, r.logistics_cost) || !close(k, r.risk_cost) {
            problems.push(format!(
                "vehicle {} reports costs ({}, {}) but its legs sum to ({c}, {k})",
                r.vehicle_id, r.logistics_cost, r.risk_cost
            ));
        }
        total_c += c;
        total_r += k;
    }
    if !close(total_c, solution.logistics_total) {
        problems.push(format!(
            "logistics total {} differs from recomputed {total_c}",
            solution.logistics_total
        ));
    }
    if !close(total_r, solution.risk_total) {
        problems.push(format!(
            "risk total {} differs from recomputed {total_r}",
            solution.risk_total
        ));
    }
    let z = scalarize(total_c, total_r, solution.alpha);
    if !close(z, solution.objective) {
        problems.push(format!("objective {} differs from recomputed {z}", solution.objective));
    }
    problems
}
