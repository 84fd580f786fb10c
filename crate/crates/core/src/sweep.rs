//! α sweeps over the weighted routing objective and their report files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{fmt_money, Instance, NodeIdx};
use crate::solver::{solve, Engine, HeuristicParams, Solution, SolveError};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const PLOTDATA_JSON: &str = "plotdata.json";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid alpha grid: {0}")]
    Grid(String),
    #[error("solving at alpha {alpha} failed after {} of {} points: {source}", partial.points.len(), partial.grid.len())]
    Solve {
        alpha: f64,
        source: SolveError,
        /// Every point that did solve; flagged as incomplete.
        partial: Box<SweepResult>,
    },
    #[error("output directory path is empty")]
    EmptyPath,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub logistics_total: f64,
    pub risk_total: f64,
    pub objective: f64,
    /// Solve time; only recorded when asked for, so reruns stay identical.
    pub wall_ms: Option<f64>,
    pub solution: Solution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub grid: Vec<f64>,
    pub engine: Engine,
    pub instance_fingerprint: String,
    /// Node ids by index, for readable route listings.
    pub node_ids: Vec<String>,
    /// False when a solver error stopped the sweep early.
    pub complete: bool,
}

impl SweepResult {
    /// Point whose α is closest to `alpha`; ties go to the smaller α.
    pub fn nearest(&self, alpha: f64) -> Option<&SweepPoint> {
        self.points.iter().fold(None, |best: Option<&SweepPoint>, p| match best {
            Some(b) if (b.alpha - alpha).abs() <= (p.alpha - alpha).abs() => Some(b),
            _ => Some(p),
        })
    }

    /// SHA-256 over everything except wall times.
    pub fn digest(&self) -> String {
        let mut copy = self.clone();
        for p in &mut copy.points {
            p.wall_ms = None;
        }
        let bytes = serde_json::to_vec(&copy).expect("sweep results serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from_alpha: f64,
    pub to_alpha: f64,
}

/// 0.00 to 1.00 in steps of 0.05.
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) / 20.0).collect()
}

/// Checks that every value lies in [0, 1] and none repeats.
pub fn validate_grid(grid: &[f64]) -> Result<(), SweepError> {
    if grid.is_empty() {
        return Err(SweepError::Grid("grid is empty".into()));
    }
    if let Some(a) = grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(SweepError::Grid(format!("{a} lies outside [0, 1]")));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(SweepError::Grid(format!("{} appears more than once", w[0])));
    }
    Ok(())
}

/// Solved points keyed by (instance fingerprint, α, engine).
#[derive(Debug, Default)]
pub struct SolutionCache {
    entries: RwLock<HashMap<(String, u64, Engine), Solution>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl SolutionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, fingerprint: &str, alpha: f64, engine: Engine) -> Option<Solution> {
        let found = self
            .entries
            .read()
            .expect("cache lock")
            .get(&(fingerprint.to_string(), alpha.to_bits(), engine))
            .cloned();
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn insert(&self, fingerprint: &str, alpha: f64, engine: Engine, solution: Solution) {
        self.entries
            .write()
            .expect("cache lock")
            .insert((fingerprint.to_string(), alpha.to_bits(), engine), solution);
    }

    /// Seeds the cache with every point of a finished sweep.
    pub fn absorb(&self, result: &SweepResult) {
        for p in &result.points {
            self.insert(&result.instance_fingerprint, p.alpha, result.engine, p.solution.clone());
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub heuristic: HeuristicParams,
    pub record_timing: bool,
}

/// Solves `instance` at every grid value with default options.
pub fn alpha_sweep(
    instance: &Instance,
    grid: &[f64],
    engine: Engine,
) -> Result<SweepResult, SweepError> {
    alpha_sweep_with(instance, grid, engine, &SweepOptions::default(), None)
}

/// Full-control sweep. Grid points are solved in parallel and reported in
/// ascending α order; cached solutions are reused and new ones stored.
pub fn alpha_sweep_with(
    instance: &Instance,
    grid: &[f64],
    engine: Engine,
    options: &SweepOptions,
    cache: Option<&SolutionCache>,
) -> Result<SweepResult, SweepError> {
    validate_grid(grid)?;
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let fingerprint = instance.fingerprint();

    let outcomes: Vec<Result<SweepPoint, SolveError>> = grid
        .par_iter()
        .map(|&alpha| {
            let started = Instant::now();
            let solution = match cache.and_then(|c| c.get(&fingerprint, alpha, engine)) {
                Some(s) => s,
                None => {
                    let s = solve(instance, alpha, engine, &options.heuristic)?;
                    if let Some(c) = cache {
                        c.insert(&fingerprint, alpha, engine, s.clone());
                    }
                    s
                }
            };
            let wall_ms = options
                .record_timing
                .then(|| started.elapsed().as_secs_f64() * 1e3);
            Ok(SweepPoint {
                alpha,
                logistics_total: solution.logistics_total,
                risk_total: solution.risk_total,
                objective: solution.objective,
                wall_ms,
                solution,
            })
        })
        .collect();

    let mut result = SweepResult {
        points: Vec::with_capacity(grid.len()),
        grid: grid.clone(),
        engine,
        instance_fingerprint: fingerprint,
        node_ids: instance.nodes().iter().map(|n| n.id.clone()).collect(),
        complete: true,
    };
    let mut failure = None;
    for (alpha, outcome) in grid.iter().zip(outcomes) {
        match outcome {
            Ok(p) => result.points.push(p),
            Err(e) => {
                if failure.is_none() {
                    failure = Some((*alpha, e));
                }
            }
        }
    }
    match failure {
        None => Ok(result),
        Some((alpha, source)) => {
            result.complete = false;
            Err(SweepError::Solve {
                alpha,
                source,
                partial: Box::new(result),
            })
        }
    }
}

/// Adjacent grid points whose canonical route sets differ.
pub fn transition_points(result: &SweepResult) -> Vec<Transition> {
    result
        .points
        .windows(2)
        .filter(|w| w[0].solution.canonical_routes() != w[1].solution.canonical_routes())
        .map(|w| Transition {
            from_alpha: w[0].alpha,
            to_alpha: w[1].alpha,
        })
        .collect()
}

/// α for file names: at least two decimals, no trailing zeros beyond that.
pub fn alpha_label(alpha: f64) -> String {
    let mut s = format!("{alpha:.6}");
    while s.ends_with('0') && s.len() > s.find('.').unwrap_or(0) + 3 {
        s.pop();
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), SweepError> {
    fs::write(path, contents).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `sweep.csv` body: one row per point, fixed decimals.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("alpha,logistics,risk,objective,wall_ms\n");
    for p in &result.points {
        let wall = p.wall_ms.map(|w| format!("{w:.3}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:.4},{:.6},{:.6},{:.6},{wall}",
            p.alpha, p.logistics_total, p.risk_total, p.objective
        );
    }
    out
}

fn route_text(node_ids: &[String], stops: &[NodeIdx]) -> String {
    let name = |i: NodeIdx| node_ids.get(i).map_or("?", String::as_str);
    let mut s = name(0).to_string();
    for &stop in stops {
        s.push_str(" -> ");
        s.push_str(name(stop));
    }
    s.push_str(" -> ");
    s.push_str(name(0));
    s
}

/// Human-readable route listing; `node_ids` are indexed like the instance.
pub fn route_listing(node_ids: &[String], s: &Solution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "alpha {}  engine {}", alpha_label(s.alpha), s.engine);
    let _ = writeln!(
        out,
        "logistics {}  risk {}  objective {}",
        fmt_money(s.logistics_total),
        fmt_money(s.risk_total),
        fmt_money(s.objective)
    );
    for r in &s.routes {
        let _ = writeln!(
            out,
            "vehicle {}: {}  load {}  logistics {}  risk {}",
            r.vehicle_id,
            route_text(node_ids, &r.stops),
            r.load,
            fmt_money(r.logistics_cost),
            fmt_money(r.risk_cost)
        );
    }
    out
}

#[derive(Serialize, Deserialize)]
struct PlotData {
    sweep: SweepResult,
    transitions: Vec<Transition>,
}

/// JSON with sorted keys: the sweep plus its transitions.
pub fn plotdata_json(result: &SweepResult) -> String {
    let data = PlotData {
        sweep: result.clone(),
        transitions: transition_points(result),
    };
    let value = serde_json::to_value(&data).expect("plot data serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("json value prints");
    s.push('\n');
    s
}

/// Reads back a sweep written by [`export_report`].
pub fn load_plotdata(path: &Path) -> Result<SweepResult, SweepError> {
    let text = fs::read_to_string(path).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let data: PlotData = serde_json::from_str(&text).map_err(|e| SweepError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(data.sweep)
}

/// Writes `sweep.csv`, one `routes_<alpha>.txt` per point and
/// `plotdata.json` into `directory`, creating it if needed.
pub fn export_report(result: &SweepResult, directory: &Path) -> Result<Vec<PathBuf>, SweepError> {
    if directory.as_os_str().is_empty() {
        return Err(SweepError::EmptyPath);
    }
    fs::create_dir_all(directory).map_err(|source| SweepError::Io {
        path: directory.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(result.points.len() + 2);
    let csv = directory.join(SWEEP_CSV);
    write_file(&csv, &sweep_csv(result))?;
    written.push(csv);
    for p in &result.points {
        let path = directory.join(format!("routes_{}.txt", alpha_label(p.alpha)));
        write_file(&path, &route_listing(&result.node_ids, &p.solution))?;
        written.push(path);
    }
    let plot = directory.join(PLOTDATA_JSON);
    write_file(&plot, &plotdata_json(result))?;
    written.push(plot);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance() -> Instance {
        // Pairing 1 with 3 is cheapest; pairing 1 with 2 is safest.
        let logistics = vec![
            vec![0.0, 10.0, 10.0, 30.0],
            vec![10.0, 0.0, 5.0, 22.0],
            vec![10.0, 5.0, 0.0, 25.0],
            vec![30.0, 22.0, 25.0, 0.0],
        ];
        let risk = vec![
            vec![0.0, 40.0, 2.0, 1.0],
            vec![40.0, 0.0, 2.0, 30.0],
            vec![2.0, 2.0, 0.0, 1.0],
            vec![1.0, 30.0, 1.0, 0.0],
        ];
        Instance::from_matrices(&[1, 1, 1], 2, 2, &logistics, &risk).unwrap()
    }

    #[test]
    fn default_grid_has_21_exact_points() {
        let g = default_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.15);
        assert_eq!(g[20], 1.0);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.0, 1.0]).is_ok());
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.2, 0.2]).is_err());
        assert!(validate_grid(&[-0.1]).is_err());
        assert!(validate_grid(&[f64::NAN]).is_err());
    }

    #[test]
    fn endpoints_match_single_solves() {
        let inst = instance();
        let r = alpha_sweep(&inst, &[1.0, 0.0], Engine::Exact).unwrap();
        assert_eq!(r.grid, vec![0.0, 1.0]);
        for p in &r.points {
            let direct = crate::solver::solve_exact(&inst, p.alpha).unwrap();
            assert_eq!(p.solution, direct);
        }
        assert!(r.complete);
    }

    #[test]
    fn transitions_and_flat_sweeps() {
        let inst = instance();
        let r = alpha_sweep(&inst, &default_grid(), Engine::Exact).unwrap();
        let t = transition_points(&r);
        assert!(!t.is_empty());
        for tr in &t {
            let a = r.nearest(tr.from_alpha).unwrap();
            let b = r.nearest(tr.to_alpha).unwrap();
            assert_ne!(a.solution.canonical_routes(), b.solution.canonical_routes());
        }
        let flat = alpha_sweep(&inst, &[0.0], Engine::Exact).unwrap();
        assert!(transition_points(&flat).is_empty());
    }

    #[test]
    fn nearest_prefers_smaller_alpha_on_ties() {
        let inst = instance();
        let r = alpha_sweep(&inst, &[0.0, 0.5, 1.0], Engine::Exact).unwrap();
        assert_eq!(r.nearest(0.25).unwrap().alpha, 0.0);
        assert_eq!(r.nearest(0.26).unwrap().alpha, 0.5);
        assert_eq!(r.nearest(0.9).unwrap().alpha, 1.0);
    }

    #[test]
    fn cache_serves_repeat_sweeps() {
        let inst = instance();
        let cache = SolutionCache::new();
        let opts = SweepOptions::default();
        let a = alpha_sweep_with(&inst, &default_grid(), Engine::Exact, &opts, Some(&cache)).unwrap();
        assert_eq!((cache.hits(), cache.misses()), (0, 21));
        let b = alpha_sweep_with(&inst, &default_grid(), Engine::Exact, &opts, Some(&cache)).unwrap();
        assert_eq!((cache.hits(), cache.misses()), (21, 21));
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn solver_failure_keeps_partial_points() {
        let logistics = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let mut costs = crate::domain::CostMatrix::new(3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    costs.set(
                        i,
                        j,
                        crate::domain::LegCost {
                            logistics: logistics[i][j],
                            risk: None,
                        },
                    );
                }
            }
        }
        let nodes = (0..3).map(|i| crate::domain::Node::new(i.to_string())).collect();
        let inst = Instance::new(nodes, vec![0, 1, 1], 1, 2, costs).unwrap();
        match alpha_sweep(&inst, &[0.0, 0.5], Engine::Exact) {
            Err(SweepError::Solve { alpha, partial, .. }) => {
                assert_eq!(alpha, 0.0);
                assert!(!partial.complete);
                assert!(partial.points.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn export_writes_every_artifact() {
        let inst = instance();
        let r = alpha_sweep(&inst, &default_grid(), Engine::Exact).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = export_report(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 23);
        let csv = fs::read_to_string(dir.path().join(SWEEP_CSV)).unwrap();
        assert_eq!(csv.lines().count(), 22);
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
        assert!(dir.path().join("routes_0.05.txt").exists());
        assert!(dir.path().join("routes_1.00.txt").exists());
        let back = load_plotdata(&dir.path().join(PLOTDATA_JSON)).unwrap();
        assert_eq!(back, r);

        let again = tempfile::tempdir().unwrap();
        export_report(&r, again.path()).unwrap();
        for f in &files {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(f).unwrap(), fs::read(again.path().join(name)).unwrap());
        }
        assert!(matches!(export_report(&r, Path::new("")), Err(SweepError::EmptyPath)));
    }

    #[test]
    fn labels() {
        assert_eq!(alpha_label(0.0), "0.00");
        assert_eq!(alpha_label(0.05), "0.05");
        assert_eq!(alpha_label(0.125), "0.125");
        assert_eq!(alpha_label(1.0), "1.00");
    }
}
