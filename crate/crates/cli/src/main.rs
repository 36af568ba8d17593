//! `czest`: run multi-agent set-membership estimation scenarios.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 containment
//! violation (`run`) or failed check (`verify`).

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use czest::simharness::{
    builtin, compute_metrics, run_monte_carlo, threads_from_env, write_metrics_csv, Algorithm, HarnessError,
    MonteCarloResult, ResolvedScenario, ScenarioConfig,
};
use czest::verify::{all_passed, render_table, run_verify, Suite, VerifyOptions};

#[derive(Parser)]
#[command(name = "czest", version, about = "Set-membership state estimation for multi-agent systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo trials of a scenario and write metrics, logs and plots.
    Run(RunArgs),
    /// Run the built-in oracle suites.
    Verify(VerifyArgs),
    /// Write a built-in scenario (uav5 or pair1d) as an editable JSON file.
    ScenarioInit(InitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file, or the name of a built-in scenario.
    scenario: String,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Base seed; overrides the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// OIT window length; overrides the scenario file.
    #[arg(long)]
    delta_bar: Option<usize>,
    /// Horizon K; overrides the scenario file.
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated subset of centralized, oit, distributed.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    #[arg(long, default_value = "czest-out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only one suite: geometry, filters or ordering.
    #[arg(long)]
    filter: Option<String>,
    /// Flip the offset sign in the stacked intersection (self-test of the suite).
    #[arg(long)]
    inject_fault: bool,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

#[derive(Args)]
struct InitArgs {
    /// uav5 or pair1d.
    name: String,
    /// Output file; defaults to `<name>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Violations(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Violations(_) => 2,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

/// What a run produces and where.
#[derive(Debug)]
struct RunManifest {
    scenario: ResolvedScenario,
    out: PathBuf,
    emit_csv: bool,
    emit_jsonl: bool,
    emit_svg: bool,
    trials: usize,
}

fn load_scenario(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(&args.scenario);
    let mut cfg = if path.is_file() {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        ScenarioConfig::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    } else {
        builtin(&args.scenario, args.horizon, args.seed.unwrap_or(0)).ok_or_else(|| {
            Failure::Usage(format!("'{}' is neither a readable file nor a built-in scenario (uav5, pair1d)", args.scenario))
        })?
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(k) = args.horizon {
        cfg.horizon = k;
    }
    if let Some(d) = args.delta_bar {
        cfg.delta_bar = Some(d);
    }
    if let Some(names) = &args.algorithms {
        cfg.algorithms = names.iter().map(|n| n.trim().parse::<Algorithm>()).collect::<Result<_, _>>()?;
    }
    Ok(cfg)
}

fn write_outputs(m: &RunManifest, mc: &MonteCarloResult) -> Result<(), Failure> {
    let trials_dir = m.out.join("trials");
    fs::create_dir_all(&trials_dir).map_err(io_err(&trials_dir))?;
    let scenario_path = m.out.join("scenario.json");
    fs::write(&scenario_path, m.scenario.config.to_json_pretty() + "\n").map_err(io_err(&scenario_path))?;
    let summary_path = m.out.join("summary.json");
    let summary = serde_json::to_string_pretty(&mc.summary).expect("summary serializes");
    fs::write(&summary_path, summary + "\n").map_err(io_err(&summary_path))?;
    for log in &mc.logs {
        let stem = format!("trial-{:04}", log.trial);
        if m.emit_jsonl {
            let p = trials_dir.join(format!("{stem}.jsonl"));
            fs::write(&p, log.to_jsonl()).map_err(io_err(&p))?;
        }
        if m.emit_csv {
            let p = trials_dir.join(format!("{stem}.csv"));
            let mut buf = Vec::new();
            write_metrics_csv(&compute_metrics(log), &mut buf)?;
            fs::write(&p, buf).map_err(io_err(&p))?;
        }
    }
    if m.emit_svg {
        let plots = m.out.join("plots");
        fs::create_dir_all(&plots).map_err(io_err(&plots))?;
        let n_agents = m.scenario.system.num_agents();
        for log in &mc.logs {
            for i in 0..n_agents {
                let p = plots.join(format!("trial-{:04}-agent-{}.svg", log.trial, i + 1));
                fs::write(&p, svg::trajectory(log, i)).map_err(io_err(&p))?;
            }
        }
        for i in 1..=n_agents {
            let p = plots.join(format!("gnorm-agent-{i}.svg"));
            fs::write(&p, svg::gnorm_curves(&mc.summary, i)).map_err(io_err(&p))?;
        }
    }
    Ok(())
}

fn violation_report(mc: &MonteCarloResult) -> String {
    let mut lines = vec![format!("{} containment violation(s)", mc.summary.violations)];
    for log in &mc.logs {
        for step in &log.steps {
            for est in &step.estimates {
                for a in est.agents.iter().filter(|a| !a.contained) {
                    lines.push(format!(
                        "  trial {} k={} {} agent {}: truth outside the estimate",
                        log.trial,
                        step.k,
                        est.algorithm.name(),
                        a.agent
                    ));
                }
            }
        }
    }
    for a in &mc.summary.aborted {
        lines.push(format!(
            "  trial {} aborted at k={} ({}): {}",
            a.trial,
            a.abort.k,
            a.abort.algorithm.name(),
            a.abort.message
        ));
    }
    const SHOWN: usize = 20;
    if lines.len() > SHOWN + 1 {
        let more = lines.len() - SHOWN - 1;
        lines.truncate(SHOWN + 1);
        lines.push(format!("  ... {more} more"));
    }
    lines.join("\n")
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_scenario(&args)?;
    let scenario = cfg.resolve()?;
    let m = RunManifest {
        scenario,
        out: args.out,
        emit_csv: true,
        emit_jsonl: true,
        emit_svg: args.svg,
        trials: args.trials,
    };
    let threads = threads_from_env()?;
    let mc = run_monte_carlo(&m.scenario, m.trials, threads)?;
    write_outputs(&m, &mc)?;
    println!(
        "{} trial(s), K={}, delta_bar={} (mu0={}): {} violation(s); output in {}",
        mc.summary.trials,
        m.scenario.config.horizon,
        m.scenario.delta_bar,
        m.scenario.mu0,
        mc.summary.violations,
        m.out.display()
    );
    if mc.summary.violations > 0 {
        return Err(Failure::Violations(violation_report(&mc)));
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let suites = match &args.filter {
        Some(f) => vec![f.parse::<Suite>().map_err(Failure::Usage)?],
        None => Suite::ALL.to_vec(),
    };
    let opts = VerifyOptions {
        suites,
        inject_fault: args.inject_fault,
        seed: args.seed,
        ..VerifyOptions::default()
    };
    let reports = run_verify(&opts);
    print!("{}", render_table(&reports));
    if all_passed(&reports) {
        Ok(())
    } else {
        Err(Failure::Violations("verification failed".into()))
    }
}

fn cmd_scenario_init(args: InitArgs) -> Result<(), Failure> {
    let comment = match args.name.as_str() {
        "uav5" => "Five planar UAVs, coordinated-turn dynamics with omega = 1 and T = pi/12, \
                   state [px, vx, py, vy] per agent, noise boxes [-1, 1] on every axis. \
                   Edges are directed from the measured agent to the measuring agent.",
        "pair1d" => "Two scalar random-walk agents measuring each other; truth and noise are drawn \
                     on a 0.05 lattice so a brute-force lattice search is exact.",
        other => return Err(Failure::Usage(format!("unknown scenario '{other}' (expected uav5 or pair1d)"))),
    };
    let mut cfg = builtin(&args.name, None, 0).expect("name checked above");
    cfg.comment = Some(comment.to_string());
    let path = args.out.unwrap_or_else(|| PathBuf::from(format!("{}.json", args.name)));
    fs::write(&path, cfg.to_json_pretty() + "\n").map_err(io_err(&path))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::ScenarioInit(a) => cmd_scenario_init(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Violations(m) => eprintln!("{m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
