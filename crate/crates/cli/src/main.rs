mod serve;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use riskroute::config::{Overrides, RunConfig};
use riskroute::domain::fmt_money;
use riskroute::pipeline::{
    build_instance, load_or_run_sweep, run_risk, run_solve, run_sweep, write_risk_reports,
    SweepSource,
};
use riskroute::service::{MetaInfo, Snapshot};
use riskroute::solver::Engine;
use riskroute::sweep::{route_listing, transition_points, SolutionCache};

#[derive(Parser)]
#[command(name = "riskroute", version, about = "Risk-weighted routing for hazardous cargo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate accident probabilities and risk costs for every arc.
    Risk(Common),
    /// Solve the routing instance for one alpha.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Weight of risk cost against logistics cost, in [0, 1].
        #[arg(long, value_parser = parse_alpha)]
        alpha: f64,
    },
    /// Solve across the alpha grid and write the sweep reports.
    Sweep(Common),
    /// Serve instance, arcs, sweep and solutions over HTTP.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Address to listen on; overrides the config.
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long, env = "RISKROUTE_CONFIG")]
    config: PathBuf,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo iterations per arc.
    #[arg(long)]
    iterations: Option<u64>,
    /// Routing engine: exact or heuristic.
    #[arg(long)]
    engine: Option<Engine>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)
            .with_context(|| format!("loading config {}", self.config.display()))?;
        cfg.apply(&Overrides {
            seed: self.seed,
            iterations: self.iterations,
            engine: self.engine,
            output_dir: self.out.clone(),
        })?;
        Ok(cfg)
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&a) {
        Ok(a)
    } else {
        Err(format!("alpha must lie in [0, 1], got {a}"))
    }
}

fn cmd_risk(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let run = run_risk(&cfg)?;
    let files = write_risk_reports(&run, &cfg.output_dir)?;
    println!(
        "general accident probability {:.6}% ({} arcs, {} iterations, seed {})",
        run.general.probability * 100.0,
        run.rows.len(),
        cfg.risk.iterations,
        cfg.risk.seed
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_solve(common: &Common, alpha: f64) -> Result<()> {
    let cfg = common.load()?;
    let run = run_risk(&cfg)?;
    let instance = build_instance(&cfg, &run)?;
    let solved = run_solve(&cfg, &instance, alpha)?;
    let ids: Vec<String> = instance.nodes().iter().map(|n| n.id.clone()).collect();
    print!("{}", route_listing(&ids, &solved.solution));
    println!("solved in {:.1} ms; wrote {}", solved.wall_ms, solved.path.display());
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let run = run_risk(&cfg)?;
    let instance = build_instance(&cfg, &run)?;
    let (result, files) = run_sweep(&cfg, &instance, None)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "alpha", "logistics", "risk", "objective");
    for p in &result.points {
        println!(
            "{:>6.2} {:>12} {:>12} {:>12}",
            p.alpha,
            fmt_money(p.logistics_total),
            fmt_money(p.risk_total),
            fmt_money(p.objective)
        );
    }
    for t in transition_points(&result) {
        println!("routes change between alpha {:.2} and {:.2}", t.from_alpha, t.to_alpha);
    }
    println!("wrote {} files to {}", files.len(), cfg.output_dir.display());
    Ok(())
}

fn cmd_serve(common: &Common, bind: Option<SocketAddr>) -> Result<()> {
    let cfg = common.load()?;
    let run = run_risk(&cfg)?;
    let instance = build_instance(&cfg, &run)?;
    let cache = SolutionCache::new();
    let (sweep, source) = load_or_run_sweep(&cfg, &instance, &cache)?;
    if let SweepSource::Recomputed(reason) = source {
        eprintln!("warning: {reason}; recomputed the sweep");
    }
    let meta = MetaInfo {
        seed: cfg.risk.seed,
        iterations: cfg.risk.iterations,
        deductible_rate: cfg.risk.deductible_rate,
        open_bracket_cap: cfg.risk.open_bracket_cap,
        p_general: run.general.probability,
    };
    let snapshot = Snapshot::build(&instance, &run.network, &sweep, &meta);
    serve::run(snapshot, bind.unwrap_or(cfg.bind))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Risk(c) => cmd_risk(c),
        Command::Solve { common, alpha } => cmd_solve(common, *alpha),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Serve { common, bind } => cmd_serve(common, *bind),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
