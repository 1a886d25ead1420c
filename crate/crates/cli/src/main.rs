//! `roving`: analyze, simulate and cross-check cyclic polling networks with
//! customer routing.
//!
//! Exit codes: 0 success, 1 config or usage error, 2 unstable network,
//! 3 simulation disagrees with the analysis, 4 numerical failure.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use roving::analysis::{log_grid, report, ReportConfig, WaitReport};
use roving::model::NetworkModel;
use roving::sim::{compare, shift_analytic_means, simulate, SimConfig, SimEstimate};
use roving::{AnalysisError, Network};
use serde_json::{json, Value};

use config::{parse_param, Loaded};

#[derive(Parser, Debug)]
#[command(name = "roving", version, about = "Waiting times in cyclic polling networks with customer routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Waiting-time and cycle-time moments and transform samples.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Also tabulate moments over loads `start:stop:step` (sweep.csv).
        #[arg(long, value_name = "START:STOP:STEP")]
        sweep_rho: Option<String>,
    },
    /// Discrete-event simulation estimates.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Analysis and simulation side by side; exits 3 unless every z-score
    /// is within 3.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Negative control: shift every analytic mean by this many
        /// simulation standard errors before comparing.
        #[arg(long, value_name = "SIGMAS", allow_hyphen_values = true)]
        perturb: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Network config (JSON), or an artifact written by this tool.
    config: PathBuf,
    /// Scale all external arrival rates so the total load equals this.
    #[arg(long)]
    rho: Option<f64>,
    /// Override a config parameter (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    params: Vec<(String, String)>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnalysisArgs {
    /// Number of moments carried in the jets.
    #[arg(long, default_value_t = 4)]
    jet_order: usize,
    /// Highest moment written to the tables.
    #[arg(long, default_value_t = 3)]
    moments: usize,
    /// Transform sample points: `none`, `log:LO:HI:COUNT`, `lin:LO:HI:COUNT`
    /// or a comma-separated list.
    #[arg(long, default_value = "log:0.001:10:32")]
    omega_grid: String,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Measured cycles per replication.
    #[arg(long, default_value_t = 100_000)]
    cycles: u64,
    #[arg(long, default_value_t = 1_000)]
    warmup: u64,
    #[arg(long, default_value_t = 10)]
    replications: usize,
    /// Batches per replication.
    #[arg(long, default_value_t = 10)]
    batches: usize,
    /// Customers in the system at which a run counts as divergent.
    #[arg(long, default_value_t = 1_000_000)]
    max_backlog: usize,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            warmup_cycles: self.warmup,
            measured_cycles: self.cycles,
            replications: self.replications,
            batches: self.batches,
            seed: self.seed,
            max_backlog: self.max_backlog,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Unstable(String),
    Disagreement(String),
    Numerical(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Unstable(_) => 2,
            Failure::Disagreement(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) | Failure::Numerical(e) => write!(f, "{e:#}"),
            Failure::Unstable(m) | Failure::Disagreement(m) => f.write_str(m),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Unstable { .. } => Failure::Unstable(e.to_string()),
            AnalysisError::Model(_) | AnalysisError::NoSwitchover | AnalysisError::ArgumentOutOfRange(_) => {
                Failure::Config(e.into())
            }
            _ => Failure::Numerical(e.into()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn io<T>(r: anyhow::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Config)
}

fn parse_grid(spec: &str) -> Outcome<Vec<f64>> {
    let bad = |why: &str| Failure::Config(anyhow!("invalid --omega-grid {spec:?}: {why}"));
    let spec = spec.trim();
    if spec == "none" {
        return Ok(Vec::new());
    }
    let grid: Vec<f64> = if let Some((kind, rest)) = spec.split_once(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err(bad("expected KIND:LO:HI:COUNT"));
        };
        let lo: f64 = lo.parse().map_err(|_| bad("LO is not a number"))?;
        let hi: f64 = hi.parse().map_err(|_| bad("HI is not a number"))?;
        let count: usize = count.parse().map_err(|_| bad("COUNT is not an integer"))?;
        match kind {
            "log" if lo > 0.0 && hi >= lo => log_grid(lo, hi, count),
            "log" => return Err(bad("log grids need 0 < LO <= HI")),
            "lin" if count >= 2 => (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                .collect(),
            "lin" => vec![lo; count.min(1)],
            _ => return Err(bad("unknown grid kind")),
        }
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("list entries must be numbers")))
            .collect::<Outcome<_>>()?
    };
    if grid.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(bad("points must be finite and nonnegative"));
    }
    Ok(grid)
}

fn parse_sweep(spec: &str) -> Outcome<Vec<f64>> {
    let bad = || Failure::Config(anyhow!("invalid --sweep-rho {spec:?}: expected START:STOP:STEP with 0 < STEP"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Outcome<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start >= 0.0 && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

/// Loaded config and the model it describes.
struct Prepared {
    loaded: Loaded,
    model: NetworkModel,
}

fn prepare(args: &ModelArgs) -> Outcome<Prepared> {
    let loaded = io(config::load(&args.config, &args.params))?;
    let model = config::build_model(&loaded, args.rho).map_err(|e| Failure::Config(e.into()))?;
    log::info!("model {} with {} queues", model.fingerprint(), model.n());
    io(std::fs::create_dir_all(&args.out).map_err(anyhow::Error::from))?;
    Ok(Prepared { loaded, model })
}

fn report_config(args: &AnalysisArgs) -> Outcome<ReportConfig> {
    Ok(ReportConfig {
        jet_order: args.jet_order,
        moments: args.moments,
        omega_grid: parse_grid(&args.omega_grid)?,
    })
}

/// Fields shared by every JSON artifact.
fn header(command: &str, p: &Prepared, net: &Network) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert(
        "tool".into(),
        json!({"name": "roving", "version": env!("CARGO_PKG_VERSION"), "command": command}),
    );
    m.insert("model_hash".into(), json!(p.model.fingerprint()));
    m.insert("model".into(), json!(p.model.to_config()));
    m.insert("params".into(), json!(p.loaded.params));
    m.insert("traffic".into(), json!(net.traffic()));
    m.insert("tolerances".into(), json!(net.tol()));
    m
}

fn network(model: &NetworkModel) -> Outcome<Network> {
    Network::new(model.clone()).map_err(Failure::from)
}

fn write(out: &Path, name: &str, text: String) -> Outcome {
    io(output::write_atomic(&out.join(name), text.as_bytes()))
}

fn write_json(out: &Path, name: &str, v: serde_json::Map<String, Value>) -> Outcome {
    io(output::write_json(&out.join(name), Value::Object(v)))
}

fn analyze(model: &ModelArgs, analysis: &AnalysisArgs, sweep: Option<&str>) -> Outcome {
    let sweep = sweep.map(parse_sweep).transpose()?;
    let p = prepare(model)?;
    let net = network(&p.model)?;
    let cfg = report_config(analysis)?;
    let rep = report(&net, &cfg)?;
    if let Some(delta) = rep.max_little_delta() {
        log::info!("largest cycle-time gap to the Little's-law route: {delta:e}");
    }
    write(&model.out, "moments.csv", output::moments_csv(&rep))?;
    if !cfg.omega_grid.is_empty() {
        write(&model.out, "lst_grid.csv", output::lst_csv(&rep))?;
    }
    if let Some(loads) = sweep {
        let moments_only = ReportConfig {
            omega_grid: Vec::new(),
            ..cfg.clone()
        };
        let mut points = Vec::with_capacity(loads.len());
        for rho in loads {
            let scaled = p.model.with_load(rho).map_err(|e| Failure::Config(e.into()))?;
            let r = report(&network(&scaled)?, &moments_only)?;
            points.push((rho, r));
        }
        write(&model.out, "sweep.csv", output::sweep_csv(&points))?;
    }
    let mut doc = header("analyze", &p, &net);
    doc.insert("report_config".into(), json!(cfg));
    doc.insert("report".into(), json!(rep));
    write_json(&model.out, "analysis.json", doc)
}

fn run_simulation(p: &Prepared, args: &SimArgs) -> Outcome<SimEstimate> {
    let cfg = args.config();
    let est = simulate(&p.model, &cfg).map_err(|e| Failure::Config(e.into()))?;
    if est.diverged {
        let rho = roving::model::solve_traffic(&p.model).map(|t| t.rho).unwrap_or(f64::NAN);
        return Err(Failure::Unstable(format!(
            "simulation diverged (backlog above {}); total load rho = {rho}",
            cfg.max_backlog
        )));
    }
    Ok(est)
}

fn simulate_cmd(model: &ModelArgs, sim: &SimArgs) -> Outcome {
    let p = prepare(model)?;
    // the simulator also runs unstable models, so only the traffic solution
    // is needed here
    let net = Network::with_tolerances(p.model.clone(), Default::default())?;
    let est = run_simulation(&p, sim)?;
    write(&model.out, "simulation.csv", output::simulation_csv(&est))?;
    let mut doc = header("simulate", &p, &net);
    doc.insert("sim_config".into(), json!(est.config));
    doc.insert("estimate".into(), json!(est));
    write_json(&model.out, "simulation.json", doc)
}

fn compare_cmd(model: &ModelArgs, analysis: &AnalysisArgs, sim: &SimArgs, perturb: Option<f64>) -> Outcome {
    let p = prepare(model)?;
    let net = network(&p.model)?;
    let cfg = report_config(analysis)?;
    let mut rep: WaitReport = report(&net, &cfg)?;
    let est = run_simulation(&p, sim)?;
    if let Some(sigmas) = perturb {
        log::warn!("analytic means shifted by {sigmas} standard errors (negative control)");
        shift_analytic_means(&mut rep, &est, sigmas);
    }
    let cmp = compare(&rep, &est).map_err(|e| Failure::Config(e.into()))?;
    write(&model.out, "comparison.csv", output::comparison_csv(&cmp))?;
    let mut doc = header("compare", &p, &net);
    doc.insert("report_config".into(), json!(cfg));
    doc.insert("sim_config".into(), json!(est.config));
    doc.insert("perturb".into(), json!(perturb));
    doc.insert("report".into(), json!(rep));
    doc.insert("estimate".into(), json!(est));
    doc.insert("comparison".into(), json!(cmp));
    write_json(&model.out, "comparison.json", doc)?;
    println!(
        "{}: max |z| = {:.3} over {} rows (threshold {})",
        if cmp.passed { "pass" } else { "FAIL" },
        cmp.max_abs_z(),
        cmp.rows.len(),
        cmp.z_threshold
    );
    if cmp.passed {
        Ok(())
    } else {
        Err(Failure::Disagreement(format!(
            "simulation disagrees with the analysis: max |z| = {:.3} > {}",
            cmp.max_abs_z(),
            cmp.z_threshold
        )))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROVING_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze {
            model,
            analysis,
            sweep_rho,
        } => analyze(model, analysis, sweep_rho.as_deref()),
        Command::Simulate { model, sim } => simulate_cmd(model, sim),
        Command::Compare {
            model,
            analysis,
            sim,
            perturb,
        } => compare_cmd(model, analysis, sim, *perturb),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
