//! End-to-end stages behind the command-line tool.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::domain::{
    load_instance, load_network, load_traffic, DataError, Instance, Network, RoadTypeTable,
};
use crate::mcsim::{estimate_network_risk, write_risk_report, ArcRisk, LossBracketTable, McError};
use crate::riskprob::{
    annotate_network, general_probability, write_probability_report, GeneralProbability, RiskError,
};
use crate::solver::{solve, Solution, SolveError};
use crate::sweep::{
    alpha_sweep_with, alpha_label, export_report, load_plotdata, SolutionCache, SweepError,
    SweepOptions, SweepResult, PLOTDATA_JSON,
};

pub const PROBABILITY_CSV: &str = "probabilities.csv";
pub const RISK_CSV: &str = "risk_costs.csv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Network with logistics, probability and risk costs filled in.
#[derive(Debug, Clone)]
pub struct RiskRun {
    pub network: Network,
    pub general: GeneralProbability,
    pub table: LossBracketTable,
    pub rows: Vec<ArcRisk>,
}

/// Loads the data and runs the probability and Monte Carlo stages. The
/// general probability is computed once and scaled per arc.
pub fn run_risk(cfg: &RunConfig) -> Result<RiskRun, PipelineError> {
    let mut network = load_network(&cfg.data.roads, &cfg.data.arcs)?;
    network.apply_fuel_policy(&cfg.costs)?;
    let traffic = load_traffic(&cfg.data.traffic)?;
    let general = general_probability(&traffic)?;
    annotate_network(&mut network, general.probability, &RoadTypeTable::default())?;
    let table = LossBracketTable::load(
        &cfg.data.brackets,
        cfg.risk.deductible_rate,
        cfg.risk.open_bracket_cap,
    )?;
    let rows = estimate_network_risk(&mut network, &table, cfg.risk.iterations, cfg.risk.seed)?;
    Ok(RiskRun {
        network,
        general,
        table,
        rows,
    })
}

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes the probability and risk-cost CSVs into `dir`.
pub fn write_risk_reports(run: &RiskRun, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    create_dir(dir)?;
    let prob = dir.join(PROBABILITY_CSV);
    let file = fs::File::create(&prob).map_err(io_err(&prob))?;
    write_probability_report(&run.network, BufWriter::new(file)).map_err(io_err(&prob))?;
    let risk = dir.join(RISK_CSV);
    let file = fs::File::create(&risk).map_err(io_err(&risk))?;
    write_risk_report(&run.rows, BufWriter::new(file)).map_err(io_err(&risk))?;
    Ok(vec![prob, risk])
}

/// Binds the instance file to the risk-annotated network.
pub fn build_instance(cfg: &RunConfig, run: &RiskRun) -> Result<Instance, PipelineError> {
    Ok(load_instance(&cfg.data.instance)?.bind(&run.network)?)
}

#[derive(Serialize)]
struct LegDoc<'a> {
    from: &'a str,
    to: &'a str,
    logistics_cost: f64,
    risk_cost: f64,
}

#[derive(Serialize)]
struct RouteDoc<'a> {
    vehicle_id: usize,
    stops: Vec<&'a str>,
    load: u64,
    logistics_cost: f64,
    risk_cost: f64,
    legs: Vec<LegDoc<'a>>,
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    instance_fingerprint: String,
    alpha: f64,
    engine: String,
    logistics_total: f64,
    risk_total: f64,
    objective: f64,
    wall_ms: Option<f64>,
    routes: Vec<RouteDoc<'a>>,
}

/// Solution as JSON with sorted keys: stops by node id, per-leg costs,
/// totals, α, engine and wall time when known.
pub fn solution_value(
    instance: &Instance,
    solution: &Solution,
    wall_ms: Option<f64>,
) -> serde_json::Value {
    let id = |i: usize| instance.node(i).id.as_str();
    let routes = solution
        .routes
        .iter()
        .map(|r| {
            let mut path = vec![0];
            path.extend(&r.stops);
            path.push(0);
            let legs = path
                .windows(2)
                .map(|w| {
                    let leg = instance.leg(w[0], w[1]);
                    LegDoc {
                        from: id(w[0]),
                        to: id(w[1]),
                        logistics_cost: leg.logistics,
                        risk_cost: leg.risk.unwrap_or(f64::NAN),
                    }
                })
                .collect();
            RouteDoc {
                vehicle_id: r.vehicle_id,
                stops: r.stops.iter().map(|&s| id(s)).collect(),
                load: r.load,
                logistics_cost: r.logistics_cost,
                risk_cost: r.risk_cost,
                legs,
            }
        })
        .collect();
    let doc = SolutionDoc {
        instance_fingerprint: instance.fingerprint(),
        alpha: solution.alpha,
        engine: solution.engine.to_string(),
        logistics_total: solution.logistics_total,
        risk_total: solution.risk_total,
        objective: solution.objective,
        wall_ms,
        routes,
    };
    serde_json::to_value(&doc).expect("solution document serializes")
}

pub struct SolveRun {
    pub solution: Solution,
    pub wall_ms: f64,
    pub path: PathBuf,
}

/// Solves one α and writes `solution_<alpha>.json` into the output dir.
pub fn run_solve(cfg: &RunConfig, instance: &Instance, alpha: f64) -> Result<SolveRun, PipelineError> {
    let started = Instant::now();
    let solution = solve(instance, alpha, cfg.sweep.engine, &cfg.heuristic)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    create_dir(&cfg.output_dir)?;
    let path = cfg
        .output_dir
        .join(format!("solution_{}.json", alpha_label(alpha)));
    let value = solution_value(instance, &solution, Some(wall_ms));
    let mut text = serde_json::to_string_pretty(&value).expect("json value prints");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(SolveRun {
        solution,
        wall_ms,
        path,
    })
}

pub fn sweep_options(cfg: &RunConfig) -> SweepOptions {
    SweepOptions {
        heuristic: cfg.heuristic.clone(),
        record_timing: cfg.sweep.record_timing,
    }
}

/// Runs the configured sweep and exports its report files.
pub fn run_sweep(
    cfg: &RunConfig,
    instance: &Instance,
    cache: Option<&SolutionCache>,
) -> Result<(SweepResult, Vec<PathBuf>), PipelineError> {
    let result = alpha_sweep_with(
        instance,
        &cfg.sweep.grid,
        cfg.sweep.engine,
        &sweep_options(cfg),
        cache,
    )?;
    let files = export_report(&result, &cfg.output_dir)?;
    Ok((result, files))
}

/// Where the sweep served by the API came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepSource {
    Loaded,
    Recomputed(String),
}

/// Reuses `plotdata.json` when it matches the current instance, grid and
/// engine; otherwise re-solves and rewrites the sweep artifacts.
pub fn load_or_run_sweep(
    cfg: &RunConfig,
    instance: &Instance,
    cache: &SolutionCache,
) -> Result<(SweepResult, SweepSource), PipelineError> {
    let path = cfg.output_dir.join(PLOTDATA_JSON);
    let stale = match load_plotdata(&path) {
        Ok(saved) => {
            let mut grid = cfg.sweep.grid.clone();
            grid.sort_by(f64::total_cmp);
            if saved.instance_fingerprint != instance.fingerprint() {
                Some(format!("{} was built from different inputs", path.display()))
            } else if saved.grid != grid || saved.engine != cfg.sweep.engine {
                Some(format!("{} uses a different grid or engine", path.display()))
            } else if !saved.complete {
                Some(format!("{} holds an incomplete sweep", path.display()))
            } else {
                cache.absorb(&saved);
                return Ok((saved, SweepSource::Loaded));
            }
        }
        Err(SweepError::Io { .. }) => Some(format!("{} not found", path.display())),
        Err(e) => Some(e.to_string()),
    };
    let (result, _) = run_sweep(cfg, instance, Some(cache))?;
    Ok((result, SweepSource::Recomputed(stale.unwrap_or_default())))
}
