use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dtcbf::harness::{
    compare_controllers, envelope, estimation_report, run_scenario, run_seeds, write_csv, write_json, write_svg,
    RngDisturbance, RunConfig, TrajectoryLog,
};
use dtcbf::verification::{run_suite, Suite};

const EXIT_FAILURE: u8 = 1;
const EXIT_UNSAFE: u8 = 2;
const EXIT_ASSUMPTION: u8 = 3;

#[derive(Parser)]
#[command(name = "dtcbf", version, about = "Adaptive discrete-time control barrier function filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured controller and write CSV, JSON and SVG output.
    Sim {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `output_dir`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the comparison controllers on shared seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Report estimator consistency and contraction.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the numerical verification suites.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the full reports as JSON to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    Invariance,
    Robustness,
    Oracles,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::All => Suite::All,
            SuiteArg::Invariance => Suite::Invariance,
            SuiteArg::Robustness => Suite::Robustness,
            SuiteArg::Oracles => Suite::Oracles,
        }
    }
}

fn init_logging() {
    let (level, bad) = match std::env::var("DTCBF_LOG_LEVEL").as_deref() {
        Err(_) | Ok("info") => (log::LevelFilter::Info, None),
        Ok("quiet") => (log::LevelFilter::Off, None),
        Ok("debug") => (log::LevelFilter::Debug, None),
        Ok(other) => (log::LevelFilter::Info, Some(other.to_string())),
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Some(v) = bad {
        log::warn!("DTCBF_LOG_LEVEL={v} not one of quiet, info, debug; using info");
    }
}

fn main() -> ExitCode {
    init_logging();
    // usage errors exit 1 so that 2 stays reserved for safety violations
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let assumption = e
                .downcast_ref::<dtcbf::Error>()
                .is_some_and(dtcbf::Error::is_assumption_violation);
            ExitCode::from(if assumption { EXIT_ASSUMPTION } else { EXIT_FAILURE })
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Sim { config, seed, out } => sim(&config, seed, out),
        Command::Compare { config } => compare(&config),
        Command::Estimate { config } => estimate(&config),
        Command::Verify { suite, seed, report } => verify(suite.into(), seed, report.as_deref()),
    }
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig> {
    Ok(RunConfig::from_file(path)?)
}

fn sim(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<u8> {
    let cfg = load(config)?;
    let sc = cfg.scenario()?;
    let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
    let logs: Vec<TrajectoryLog> = if seeds.len() == 1 {
        let mut source = RngDisturbance::new(seeds[0], sc.disturbance);
        vec![run_scenario(&sc, seeds[0], &mut source)?]
    } else {
        run_seeds(&sc, &seeds)?
    };
    let dir = out.or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for log in &logs {
        let stem = format!("{}_seed{}", sc.controller.name(), log.header.seed);
        write_csv(log, &dir.join(format!("{stem}.csv")))?;
        write_json(log, &dir.join(format!("{stem}.json")))?;
    }
    let env = envelope(&logs);
    write_svg(&env, &dir.join(format!("{}.svg", sc.controller.name())))?;

    let summary = serde_json::json!({
        "controller": sc.controller.name(),
        "seeds": seeds,
        "min_b": env.safety_floor,
        "first_violation": logs.iter().map(|l| l.first_violation()).collect::<Vec<_>>(),
        "first_exit": logs.iter().map(|l| l.first_exit()).collect::<Vec<_>>(),
        "output_dir": dir,
    });
    emit(&serde_json::to_string_pretty(&summary)?)?;
    let exits: Vec<_> = logs.iter().filter_map(|l| l.first_exit().map(|t| (l.header.seed, t))).collect();
    let unsafe_run = sc.controller.is_filtered() && !exits.is_empty();
    if unsafe_run {
        log::error!("filtered run left the safe set (seed, step): {exits:?}");
    }
    Ok(if unsafe_run { EXIT_UNSAFE } else { 0 })
}

fn compare(config: &Path) -> Result<u8> {
    let cfg = load(config)?;
    let rep = compare_controllers(&cfg)?;
    for c in &rep.controllers {
        match &c.failure {
            None => log::info!(
                "{:<24} min B {:>12.4e}  unsafe seeds {:>5.1}%  mean energy {:.4e}",
                c.controller.name(),
                c.min_b(),
                100.0 * c.violation_fraction(),
                c.mean_energy()
            ),
            Some(f) => log::info!("{:<24} failed: {}", c.controller.name(), f.message),
        }
    }
    emit(&serde_json::to_string_pretty(&rep)?)?;
    if rep.controllers.iter().any(|c| c.failure.as_ref().is_some_and(|f| f.assumption_violation)) {
        return Ok(EXIT_ASSUMPTION);
    }
    if rep.controllers.iter().any(|c| c.failure.is_some()) {
        return Ok(EXIT_FAILURE);
    }
    let unsafe_filtered = rep
        .controllers
        .iter()
        .any(|c| c.controller.is_filtered() && c.seeds().iter().any(|s| s.first_exit.is_some()));
    Ok(if unsafe_filtered { EXIT_UNSAFE } else { 0 })
}

fn estimate(config: &Path) -> Result<u8> {
    let cfg = load(config)?;
    let logs = run_seeds(&cfg.scenario()?, &cfg.seeds)?;
    let rep = estimation_report(&logs);
    log::info!(
        "theta* always in set: {}; beta1 ratio {:.4}; error ratio {:.4}",
        rep.all_consistent,
        rep.mean_beta1_ratio,
        rep.mean_error_ratio
    );
    let out = serde_json::json!({
        "all_consistent": rep.all_consistent,
        "mean_beta1_ratio": rep.mean_beta1_ratio,
        "mean_error_ratio": rep.mean_error_ratio,
        "runs": rep.runs,
    });
    emit(&serde_json::to_string_pretty(&out)?)?;
    Ok(0)
}

fn verify(suite: Suite, seed: u64, report: Option<&Path>) -> Result<u8> {
    let reports = run_suite(suite, seed)?;
    if let Some(path) = report {
        write_json(&reports, path)?;
    }
    let mut ok = true;
    for r in &reports {
        for c in &r.children {
            emit(&format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))?;
        }
        ok &= r.passed;
    }
    for r in reports.iter().flat_map(|r| &r.children) {
        if !r.counterexamples.is_empty() && !r.name.contains("mutated") {
            emit(&serde_json::to_string_pretty(&r.counterexamples)?)?;
        }
    }
    Ok(if ok { 0 } else { EXIT_FAILURE })
}
