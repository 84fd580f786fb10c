//! Capacitated vehicle routing under the α-weighted cost
//! `(1 - α)·logistics + α·risk`.
//!
//! Two engines share one solution type: an exact two-layer dynamic program
//! (best single route for every capacity-feasible customer subset, then the
//! best partition of all customers into vehicle routes) and a savings plus
//! local-search heuristic for instances past the exact engine's size limit.
//! [`validate_solution`] re-checks any solution against every constraint
//! family independently of how it was produced.

mod exact;
mod heuristic;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Arc, FleetFeasibility, Instance, NodeIdx};

pub use exact::{solve_exact, EXACT_CUSTOMER_LIMIT};
pub use heuristic::{solve_heuristic, HeuristicParams};
pub use validate::{
    detect_subtours, validate_solution, Check, ConstraintFamily, EdgeSelection, Subtour,
    SubtourError, ValidationReport,
};

/// Slack used when comparing money amounts that went through different
/// summation orders.
pub const COST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("leg {from}->{to} has no risk cost")]
    MissingRisk { from: String, to: String },
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error("{customers} customers exceed the exact engine limit of {limit}")]
    TooLarge { customers: usize, limit: usize },
    #[error("heuristic ended with {routes} routes for {vehicles} vehicles; {suggestion}")]
    FleetMismatch {
        routes: usize,
        vehicles: usize,
        suggestion: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Heuristic,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::Heuristic => "heuristic",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Engine::Exact),
            "heuristic" => Ok(Engine::Heuristic),
            other => Err(format!("unknown engine {other:?} (expected exact or heuristic)")),
        }
    }
}

/// One vehicle's tour; the depot is implicit at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub vehicle_id: usize,
    pub stops: Vec<NodeIdx>,
    pub load: u64,
    pub logistics_cost: f64,
    pub risk_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
    pub alpha: f64,
    pub logistics_total: f64,
    pub risk_total: f64,
    pub objective: f64,
    pub engine: Engine,
}

impl Solution {
    /// Routes as sorted stop lists; equal for solutions with the same tours.
    pub fn canonical_routes(&self) -> Vec<Vec<NodeIdx>> {
        let mut routes: Vec<_> = self.routes.iter().map(|r| r.stops.clone()).collect();
        routes.sort();
        routes
    }
}

fn scalarize(logistics: f64, risk: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * logistics + alpha * risk
}

fn check_alpha(alpha: f64) -> Result<(), SolveError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(SolveError::InvalidAlpha(alpha))
    }
}

/// `(1 - α)·c + α·r` for one arc.
pub fn weighted_arc_cost(arc: &Arc, alpha: f64) -> Result<f64, SolveError> {
    check_alpha(alpha)?;
    let missing = || SolveError::MissingRisk {
        from: arc.from.clone(),
        to: arc.to.clone(),
    };
    let c = arc.logistics_cost.ok_or_else(missing)?;
    let r = arc.risk_cost.ok_or_else(missing)?;
    Ok(scalarize(c, r, alpha))
}

/// Dense per-leg logistics, risk and weighted costs for one α.
#[derive(Debug, Clone)]
pub(crate) struct CostModel {
    size: usize,
    logistics: Vec<f64>,
    risk: Vec<f64>,
    weighted: Vec<f64>,
    pub alpha: f64,
}

impl CostModel {
    pub fn new(instance: &Instance, alpha: f64) -> Result<Self, SolveError> {
        check_alpha(alpha)?;
        let size = instance.nodes().len();
        let mut logistics = vec![0.0; size * size];
        let mut risk = vec![0.0; size * size];
        let mut weighted = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                if i == j {
                    continue;
                }
                let leg = instance.leg(i, j);
                let r = leg.risk.ok_or_else(|| SolveError::MissingRisk {
                    from: instance.node(i).id.clone(),
                    to: instance.node(j).id.clone(),
                })?;
                let k = i * size + j;
                logistics[k] = leg.logistics;
                risk[k] = r;
                weighted[k] = scalarize(leg.logistics, r, alpha);
            }
        }
        Ok(Self {
            size,
            logistics,
            risk,
            weighted,
            alpha,
        })
    }

    #[inline]
    pub fn w(&self, i: NodeIdx, j: NodeIdx) -> f64 {
        self.weighted[i * self.size + j]
    }

    #[inline]
    pub fn c(&self, i: NodeIdx, j: NodeIdx) -> f64 {
        self.logistics[i * self.size + j]
    }

    #[inline]
    pub fn r(&self, i: NodeIdx, j: NodeIdx) -> f64 {
        self.risk[i * self.size + j]
    }

    fn legs(stops: &[NodeIdx]) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        let first = stops.first().map(|&s| (0, s));
        let last = stops.last().map(|&s| (s, 0));
        first
            .into_iter()
            .chain(stops.windows(2).map(|w| (w[0], w[1])))
            .chain(last)
    }

    /// Weighted cost of a depot-to-depot tour.
    pub fn route_weight(&self, stops: &[NodeIdx]) -> f64 {
        Self::legs(stops).map(|(i, j)| self.w(i, j)).sum()
    }

    /// (logistics, risk) of a depot-to-depot tour.
    pub fn route_costs(&self, stops: &[NodeIdx]) -> (f64, f64) {
        Self::legs(stops).fold((0.0, 0.0), |(c, r), (i, j)| {
            (c + self.c(i, j), r + self.r(i, j))
        })
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn preflight(instance: &Instance, alpha: f64) -> Result<CostModel, SolveError> {
    check_alpha(alpha)?;
    if let FleetFeasibility::Infeasible(why) = instance.feasibility() {
        return Err(SolveError::Infeasible(why));
    }
    CostModel::new(instance, alpha)
}

/// Assembles a canonical solution from unordered tours.
///
/// A tour is reversed when travelling it backwards costs the same and puts
/// the smaller node index first. Tours are then sorted and numbered.
pub(crate) fn assemble_solution(
    instance: &Instance,
    model: &CostModel,
    engine: Engine,
    tours: Vec<Vec<NodeIdx>>,
) -> Solution {
    let mut tours: Vec<Vec<NodeIdx>> = tours
        .into_iter()
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (c, r) = model.route_costs(&t);
            let mut rev = t.clone();
            rev.reverse();
            let (rc, rr) = model.route_costs(&rev);
            if rev[0] < t[0] && nearly_equal(c, rc) && nearly_equal(r, rr) {
                rev
            } else {
                t
            }
        })
        .collect();
    tours.sort();
    let routes: Vec<Route> = tours
        .into_iter()
        .enumerate()
        .map(|(i, stops)| {
            let (c, r) = model.route_costs(&stops);
            Route {
                vehicle_id: i + 1,
                load: stops.iter().map(|&s| u64::from(instance.demand(s))).sum(),
                stops,
                logistics_cost: c,
                risk_cost: r,
            }
        })
        .collect();
    let logistics_total = routes.iter().map(|r| r.logistics_cost).sum();
    let risk_total = routes.iter().map(|r| r.risk_cost).sum();
    Solution {
        routes,
        alpha: model.alpha,
        logistics_total,
        risk_total,
        objective: scalarize(logistics_total, risk_total, model.alpha),
        engine,
    }
}

/// Solves with the chosen engine; the heuristic uses `params`.
pub fn solve(
    instance: &Instance,
    alpha: f64,
    engine: Engine,
    params: &HeuristicParams,
) -> Result<Solution, SolveError> {
    match engine {
        Engine::Exact => solve_exact(instance, alpha),
        Engine::Heuristic => solve_heuristic(instance, alpha, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RoadSegment;

    #[test]
    fn weighted_cost_endpoints_and_midpoint() {
        let mut arc = Arc::new(
            "a",
            "b",
            vec![RoadSegment {
                road_id: "r".into(),
                length_km: 1.0,
            }],
            0.0,
        );
        arc.logistics_cost = Some(100.0);
        assert!(matches!(
            weighted_arc_cost(&arc, 0.5),
            Err(SolveError::MissingRisk { .. })
        ));
        arc.risk_cost = Some(300.0);
        assert_eq!(weighted_arc_cost(&arc, 0.0).unwrap(), 100.0);
        assert_eq!(weighted_arc_cost(&arc, 1.0).unwrap(), 300.0);
        assert_eq!(weighted_arc_cost(&arc, 0.5).unwrap(), 200.0);
        assert!(matches!(
            weighted_arc_cost(&arc, 1.5),
            Err(SolveError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn engine_parses() {
        assert_eq!("exact".parse::<Engine>().unwrap(), Engine::Exact);
        assert_eq!("heuristic".parse::<Engine>().unwrap(), Engine::Heuristic);
        assert!("milp".parse::<Engine>().is_err());
    }
}
