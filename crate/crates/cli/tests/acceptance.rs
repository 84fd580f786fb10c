//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are fixed here and printed with each result.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use riskroute::config::RunConfig;
use riskroute::domain::{Arc, Instance, Network, Road, RoadSegment, RoadType, RoadTypeTable};
use riskroute::mcsim::rng::UniformStream;
use riskroute::mcsim::{
    build_cost_distribution, estimate_network_risk, estimate_risk_cost, expected_risk_cost,
    LossBracketTable,
};
use riskroute::pipeline::{build_instance, run_risk};
use riskroute::riskprob::{annotate_network, mean_death_rate, road_indexes};
use riskroute::solver::{solve_exact, validate_solution, Engine};
use riskroute::sweep::{alpha_sweep, default_grid, transition_points};

type Outcome = Result<String, String>;

fn sample_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample/riskroute.toml")
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean_death_rate_check() -> Outcome {
    let types = RoadTypeTable::default();
    let ybar = mean_death_rate(&types);
    let roads = vec![
        Road {
            id: "a".into(),
            road_type: RoadType::SingleTwoWay,
            heavy_vehicle_flow: 100.0,
        },
        Road {
            id: "b".into(),
            road_type: RoadType::CentralLine,
            heavy_vehicle_flow: 300.0,
        },
    ];
    let idx = road_indexes(&roads, &types).map_err(|e| e.to_string())?;
    let it = idx["a"].type_index;
    let want = 22.3 / 14.6;
    ensure(
        ybar == 14.6 && (it - want).abs() <= 1e-12,
        format!("mean death rate {ybar} (want 14.6 exactly), single-lane two-way index {it:.15} (want {want:.15} +/- 1e-12)"),
    )
}

fn index_identities() -> Outcome {
    let types = RoadTypeTable::default();
    let mut rng = UniformStream::new(0x1dea);
    let mut worst: f64 = 0.0;
    let cases = 250;
    for case in 0..cases {
        let n = 1 + rng.below(40) as usize;
        let roads: Vec<Road> = (0..n)
            .map(|i| Road {
                id: format!("r{i}"),
                road_type: RoadType::ALL[rng.below(5) as usize],
                heavy_vehicle_flow: 1.0 + rng.next_f64() * 20_000.0,
            })
            .collect();
        let xbar = roads.iter().map(|r| r.heavy_vehicle_flow).sum::<f64>() / n as f64;
        let idx = road_indexes(&roads, &types).map_err(|e| format!("case {case}: {e}"))?;
        let mut sum = 0.0;
        for r in &roads {
            let iv = idx[&r.id].flow_index;
            worst = worst.max((iv - r.heavy_vehicle_flow / xbar).abs());
            sum += iv;
        }
        worst = worst.max((sum / n as f64 - 1.0).abs());
    }
    ensure(
        worst <= 1e-12,
        format!("{cases} random road sets, worst deviation {worst:.2e} (tolerance 1e-12)"),
    )
}

fn distribution_anchor() -> Outcome {
    let dist = build_cost_distribution(0.009029, &LossBracketTable::default())
        .map_err(|e| e.to_string())?;
    let first = &dist.outcomes[0];
    ensure(
        first.cost == 0.0 && (first.cumulative - 0.990971).abs() <= 1e-9,
        format!(
            "no-accident region [0, {:.9}) for Paccident 0.009029 (want 0.990971 +/- 1e-9)",
            first.cumulative
        ),
    )
}

fn monte_carlo_convergence() -> Outcome {
    let started = Instant::now();
    let table = LossBracketTable::default();
    let conditional = table.conditional_mean();
    let runs = 200u64;
    let mut within_one = 0;
    let mut worst_z: f64 = 0.0;
    for k in 0..runs {
        let p = 0.0005 + 0.0003 * k as f64;
        let dist = build_cost_distribution(p, &table).map_err(|e| e.to_string())?;
        let est = estimate_risk_cost(&dist, 1_000_000, 1_000 + k).map_err(|e| e.to_string())?;
        let z = (est.mean - expected_risk_cost(&dist)).abs() / est.std_error;
        worst_z = worst_z.max(z);
        if z <= 1.0 {
            within_one += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let share = within_one as f64 / runs as f64;
    ensure(
        worst_z <= 4.0 && share >= 0.6 && conditional == 4279.8 && secs < 30.0,
        format!(
            "{runs} runs x 1e6 draws: worst |err| {worst_z:.2} SE (limit 4), {:.1}% within 1 SE (need 60%), conditional mean {conditional:.2} (want 4279.80), {secs:.1} s (limit 30)",
            share * 100.0
        ),
    )
}

/// Cheapest capacity-feasible split over every customer ordering cut into
/// `k` contiguous non-empty tours.
fn brute_force(
    demands: &[u32],
    k: usize,
    q: u32,
    c: &[Vec<f64>],
    r: &[Vec<f64>],
    alpha: f64,
) -> Option<f64> {
    fn perms(items: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
        if i == items.len() {
            out.push(items.clone());
            return;
        }
        for j in i..items.len() {
            items.swap(i, j);
            perms(items, i + 1, out);
            items.swap(i, j);
        }
    }
    fn cuts(start: usize, n: usize, left: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(acc.clone());
            return;
        }
        for p in start..n {
            acc.push(p);
            cuts(p + 1, n, left - 1, acc, out);
            acc.pop();
        }
    }
    let n = demands.len();
    let mut orders = Vec::new();
    perms(&mut (1..=n).collect(), 0, &mut orders);
    let mut splits = Vec::new();
    cuts(1, n, k - 1, &mut Vec::new(), &mut splits);
    let w = |i: usize, j: usize| (1.0 - alpha) * c[i][j] + alpha * r[i][j];
    let mut best: Option<f64> = None;
    for order in &orders {
        'split: for split in &splits {
            let mut bounds = vec![0];
            bounds.extend(split);
            bounds.push(n);
            let mut total = 0.0;
            for b in bounds.windows(2) {
                let part = &order[b[0]..b[1]];
                if part.iter().map(|&s| demands[s - 1]).sum::<u32>() > q {
                    continue 'split;
                }
                let mut prev = 0;
                for &s in part {
                    total += w(prev, s);
                    prev = s;
                }
                total += w(prev, 0);
            }
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    }
    best
}

fn exact_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = UniformStream::new(0xb10c);
    let mut matched = 0;
    let mut worst: f64 = 0.0;
    let mut attempts = 0;
    while matched < 120 {
        attempts += 1;
        let n = 1 + rng.below(7) as usize;
        let k = 1 + rng.below(n.min(3) as u64) as usize;
        let demands: Vec<u32> = (0..n).map(|_| 1 + rng.below(6) as u32).collect();
        let total: u32 = demands.iter().sum();
        let floor = (*demands.iter().max().unwrap()).max(total.div_ceil(k as u32));
        let q = floor + rng.below(u64::from(total - floor) + 1) as u32;
        let mut mat = || {
            let mut m = vec![vec![0.0; n + 1]; n + 1];
            for i in 0..=n {
                for j in (i + 1)..=n {
                    m[i][j] = 1.0 + rng.next_f64() * 500.0;
                    m[j][i] = m[i][j];
                }
            }
            m
        };
        let c = mat();
        let r = mat();
        let alpha = rng.below(21) as f64 / 20.0;
        let inst = Instance::from_matrices(&demands, k, q, &c, &r).map_err(|e| e.to_string())?;
        let oracle = brute_force(&demands, k, q, &c, &r, alpha);
        match (oracle, solve_exact(&inst, alpha)) {
            (Some(z), Ok(sol)) => {
                if !validate_solution(&inst, &sol).is_valid() {
                    return Err(format!("instance {attempts}: solver output fails validation"));
                }
                worst = worst.max((z - sol.objective).abs());
                matched += 1;
            }
            (None, Err(_)) => {}
            (o, s) => return Err(format!("instance {attempts}: oracle {o:?} vs solver {s:?}")),
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(
        worst <= 1e-9 && secs < 60.0,
        format!("{matched} feasible instances (n <= 7, K <= 3): worst |z - z_brute| {worst:.2e} (tolerance 1e-9), {secs:.2} s (limit 60)"),
    )
}

fn scalarization_on_sample() -> Outcome {
    let cfg = RunConfig::load(&sample_config()).map_err(|e| e.to_string())?;
    let run = run_risk(&cfg).map_err(|e| e.to_string())?;
    let inst = build_instance(&cfg, &run).map_err(|e| e.to_string())?;
    let grid = default_grid();
    let started = Instant::now();
    let sweep = alpha_sweep(&inst, &grid, Engine::Exact).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let slack = 1e-9;
    let pts = &sweep.points;
    let mut problems = Vec::new();
    for w in pts.windows(2) {
        if w[1].logistics_total < w[0].logistics_total - slack {
            problems.push(format!("logistics drops at alpha {}", w[1].alpha));
        }
        if w[1].risk_total > w[0].risk_total + slack {
            problems.push(format!("risk rises at alpha {}", w[1].alpha));
        }
    }
    for i in 1..pts.len() - 1 {
        if pts[i].objective < (pts[i - 1].objective + pts[i + 1].objective) / 2.0 - slack {
            problems.push(format!("z not concave at alpha {}", pts[i].alpha));
        }
    }
    let transitions: Vec<String> = transition_points(&sweep)
        .iter()
        .map(|t| format!("{:.2}-{:.2}", t.from_alpha, t.to_alpha))
        .collect();
    ensure(
        problems.is_empty()
            && pts.len() == 21
            && inst.customer_count() == 9
            && inst.vehicle_count == 3
            && secs < 5.0,
        format!(
            "{} customers, K={}, {} points: {} violations (slack 1e-9), sweep {secs:.3} s (limit 5), transitions [{}]{}",
            inst.customer_count(),
            inst.vehicle_count,
            pts.len(),
            problems.len(),
            transitions.join(", "),
            if problems.is_empty() { String::new() } else { format!(": {}", problems.join("; ")) }
        ),
    )
}

fn orderings() -> Outcome {
    let road = |id: &str, t, flow| Road {
        id: id.into(),
        road_type: t,
        heavy_vehicle_flow: flow,
    };
    let arc = |from: &str, to: &str, road: &str| {
        Arc::new(
            from,
            to,
            vec![RoadSegment {
                road_id: road.into(),
                length_km: 25.0,
            }],
            0.0,
        )
    };
    let roads = vec![
        road("SP304", RoadType::CentralLine, 6943.0),
        road("SP147", RoadType::CentralLine, 535.0),
        road("SP191", RoadType::SingleTwoWay, 2400.0),
        road("SP127", RoadType::CentralLine, 2450.0),
        road("SP330", RoadType::CentralBarrier, 9800.0),
    ];
    let arcs = vec![
        arc("a", "b", "SP304"),
        arc("c", "d", "SP147"),
        arc("e", "f", "SP191"),
        arc("g", "h", "SP127"),
    ];
    let mut network = Network::new(roads, arcs).map_err(|e| e.to_string())?;
    annotate_network(&mut network, 0.006, &RoadTypeTable::default()).map_err(|e| e.to_string())?;
    estimate_network_risk(&mut network, &LossBracketTable::default(), 1_000_000, 7)
        .map_err(|e| e.to_string())?;
    let get = |f: &str, t: &str| {
        let a = network.arc(f, t).unwrap();
        (a.accident_probability.unwrap(), a.risk_cost.unwrap())
    };
    let (p_hi, r_hi) = get("a", "b");
    let (p_lo, r_lo) = get("c", "d");
    let (p_bad, r_bad) = get("e", "f");
    let (p_good, r_good) = get("g", "h");
    ensure(
        p_hi > p_lo && r_hi > r_lo && p_bad > p_good && r_bad > r_good,
        format!(
            "flow 6943 vs 535: P {:.4}% > {:.4}%, r {r_hi:.2} > {r_lo:.2}; single-lane two-way vs central line: P {:.4}% > {:.4}%, r {r_bad:.2} > {r_good:.2}",
            p_hi * 100.0,
            p_lo * 100.0,
            p_bad * 100.0,
            p_good * 100.0
        ),
    )
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_riskroute");
    let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = sample_config();
    let mut summary = Vec::new();
    for cmd in ["risk", "sweep"] {
        let mut outputs = Vec::new();
        for run in ["first", "second"] {
            let out = scratch.path().join(format!("{cmd}-{run}"));
            let status = Command::new(bin)
                .arg(cmd)
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .env_remove("RISKROUTE_CONFIG")
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!(
                    "{cmd} failed: {}",
                    String::from_utf8_lossy(&status.stderr)
                ));
            }
            outputs.push(dir_contents(&out));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{cmd} artifacts differ between runs"));
        }
        summary.push(format!("{cmd}: {} files identical", outputs[0].len()));
    }
    Ok(summary.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("mean death rate and type index", mean_death_rate_check),
        ("flow index identities", index_identities),
        ("no-accident distribution anchor", distribution_anchor),
        ("Monte Carlo convergence", monte_carlo_convergence),
        ("exact solver vs brute force", exact_oracle),
        ("scalarization on the sample instance", scalarization_on_sample),
        ("flow and road-type orderings", orderings),
        ("risk and sweep determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let ms = started.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{ms:.0} ms]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{ms:.0} ms]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
