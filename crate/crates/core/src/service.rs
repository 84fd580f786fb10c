//! Read-only API over precomputed results.
//!
//! A [`Snapshot`] renders every response body once, when it is built, so
//! requests never solve or simulate anything and repeated requests return
//! identical bytes. The HTTP transport lives in the command-line crate.

use serde_json::{json, Value};

use crate::domain::{Instance, Network};
use crate::pipeline::solution_value;
use crate::sweep::{transition_points, SweepResult};

/// Run settings echoed by `GET /meta`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaInfo {
    pub seed: u64,
    pub iterations: u64,
    pub deductible_rate: f64,
    pub open_bracket_cap: f64,
    pub p_general: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

impl Response {
    fn ok(body: &str) -> Self {
        Self {
            status: 200,
            body: body.to_string(),
        }
    }

    fn error(status: u16, message: &str) -> Self {
        Self {
            status,
            body: json!({ "error": message }).to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    fingerprint: String,
    instance: String,
    arcs: String,
    sweep: String,
    meta: String,
    /// (α, body) per sweep point, ascending α.
    solutions: Vec<(f64, String)>,
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, Value::from)
}

impl Snapshot {
    pub fn build(instance: &Instance, network: &Network, sweep: &SweepResult, meta: &MetaInfo) -> Self {
        let fingerprint = instance.fingerprint();
        let nodes: Vec<Value> = instance
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                json!({
                    "index": i,
                    "id": n.id,
                    "name": n.name,
                    "lat": opt(n.coords.map(|c| c.0)),
                    "lon": opt(n.coords.map(|c| c.1)),
                    "demand": instance.demand(i),
                })
            })
            .collect();
        let instance_body = json!({
            "fingerprint": fingerprint,
            "depot": instance.depot().id,
            "vehicle_count": instance.vehicle_count,
            "capacity": instance.capacity,
            "allow_idle_vehicles": instance.allow_idle_vehicles,
            "total_demand": instance.total_demand(),
            "nodes": nodes,
        });

        let arcs: Vec<Value> = network
            .arcs()
            .iter()
            .map(|a| {
                json!({
                    "from": a.from,
                    "to": a.to,
                    "length_km": a.total_length_km,
                    "tolls": a.tolls,
                    "logistics_cost": opt(a.logistics_cost),
                    "exposure": opt(a.exposure),
                    "paccident": opt(a.accident_probability),
                    "risk_cost": opt(a.risk_cost),
                    "risk_std_error": opt(a.risk_std_error),
                    "mirrored": a.mirror_of.is_some(),
                })
            })
            .collect();
        let arcs_body = json!({ "fingerprint": fingerprint, "arcs": arcs });

        let points: Vec<Value> = sweep
            .points
            .iter()
            .map(|p| {
                json!({
                    "alpha": p.alpha,
                    "logistics_total": p.logistics_total,
                    "risk_total": p.risk_total,
                    "objective": p.objective,
                    "wall_ms": opt(p.wall_ms),
                    "routes": p.solution.routes.len(),
                })
            })
            .collect();
        let transitions: Vec<Value> = transition_points(sweep)
            .iter()
            .map(|t| json!({ "from_alpha": t.from_alpha, "to_alpha": t.to_alpha }))
            .collect();
        let sweep_body = json!({
            "fingerprint": fingerprint,
            "engine": sweep.engine.as_str(),
            "grid": sweep.grid,
            "complete": sweep.complete,
            "points": points,
            "transitions": transitions,
        });

        let meta_body = json!({
            "fingerprint": fingerprint,
            "sweep_digest": sweep.digest(),
            "seed": meta.seed,
            "iterations": meta.iterations,
            "deductible_rate": meta.deductible_rate,
            "open_bracket_cap": meta.open_bracket_cap,
            "p_general": meta.p_general,
            "grid": sweep.grid,
            "engine": sweep.engine.as_str(),
        });

        let solutions = sweep
            .points
            .iter()
            .map(|p| {
                (
                    p.alpha,
                    solution_value(instance, &p.solution, p.wall_ms).to_string(),
                )
            })
            .collect();

        Self {
            fingerprint,
            instance: instance_body.to_string(),
            arcs: arcs_body.to_string(),
            sweep: sweep_body.to_string(),
            meta: meta_body.to_string(),
            solutions,
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Body for the grid point nearest `alpha`; ties go to the smaller α.
    pub fn solution_for(&self, alpha: f64) -> Option<&str> {
        self.solutions
            .iter()
            .fold(None, |best: Option<&(f64, String)>, s| match best {
                Some(b) if (b.0 - alpha).abs() <= (s.0 - alpha).abs() => Some(b),
                _ => Some(s),
            })
            .map(|(_, body)| body.as_str())
    }

    /// Routes a GET request. `query` is the raw query string, if any.
    pub fn respond(&self, path: &str, query: Option<&str>) -> Response {
        match path.trim_end_matches('/') {
            "/instance" => Response::ok(&self.instance),
            "/arcs" => Response::ok(&self.arcs),
            "/sweep" => Response::ok(&self.sweep),
            "/meta" => Response::ok(&self.meta),
            "/solution" => {
                let raw = query
                    .unwrap_or("")
                    .split('&')
                    .filter_map(|kv| kv.split_once('='))
                    .find(|(k, _)| *k == "alpha")
                    .map(|(_, v)| v);
                let Some(raw) = raw else {
                    return Response::error(400, "missing query parameter alpha");
                };
                let alpha = match raw.parse::<f64>() {
                    Ok(a) if (0.0..=1.0).contains(&a) => a,
                    _ => {
                        return Response::error(400, &format!("alpha must be a number in [0, 1], got {raw:?}"))
                    }
                };
                match self.solution_for(alpha) {
                    Some(body) => Response::ok(body),
                    None => Response::error(404, "no sweep points available"),
                }
            }
            other => Response::error(404, &format!("unknown endpoint {other:?}")),
        }
    }
}
