//! `relaypb`: simulate relay-driven heat flow, analyze the free boundary,
//! run the self-checks and draw space-time pictures.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 runtime error.

mod run_dir;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use relaypb::diagnostics::{analyze, Tolerances};
use relaypb::io::{
    spacetime_svg, summary_rows, time_slice_svg, write_events_csv, write_facets_csv, write_report_json,
    write_report_tables, write_snapshots, RunManifest,
};
use relaypb::scenario::{emit_config, parse_config, preset, ScenarioError, ScenarioSpec, PRESETS};
use relaypb::solver;
use relaypb::verify::{relay_property_suite, verify_preset, CheckStatus};
use relaypb::RunOutcome;

use run_dir::{scenario_hash, DirLock, RunDir};

#[derive(Parser)]
#[command(name = "relaypb", version, about = "Heat flow driven by a hysteresis relay")]
struct Cli {
    /// Worker threads for per-point kernels (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario; see `list-scenarios`.
    #[arg(long)]
    preset: Option<String>,
    /// Halve the grid spacing and time step this many times.
    #[arg(long, default_value_t = 0)]
    refine: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write snapshots, events and a manifest.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
        /// Recorded in the manifest; simulations themselves are deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute the diagnostics report for a run directory or a fresh run.
    Analyze {
        #[command(flatten)]
        source: Source,
        /// Directory written by `simulate`.
        #[arg(long, conflicts_with_all = ["config", "preset"])]
        run: Option<PathBuf>,
        /// Where to write report.json and the section tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the relay property suite and the preset self-checks.
    Verify {
        /// Preset to check; all presets when omitted.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 0)]
        refine: u32,
        #[arg(long, default_value_t = 20_241_014)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        traces: usize,
        /// Write the results as verify.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the phases and free boundary of a run directory.
    Plot {
        #[arg(long)]
        run: PathBuf,
        /// Defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Snapshot indices for 2D runs; first, middle and last by default.
        #[arg(long, value_delimiter = ',')]
        slices: Vec<usize>,
    },
    /// Print the built-in scenarios.
    ListScenarios,
}

/// A failure, classified by exit code.
#[derive(Debug)]
enum Failure {
    Verification(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Solver(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<relaypb::io::IoError> for Failure {
    fn from(e: relaypb::io::IoError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(source: &Source) -> Result<ScenarioSpec, Failure> {
    let spec = match (&source.config, &source.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?.spec
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Failure::Config("give --config or --preset".into())),
    };
    Ok(spec.refined(source.refine))
}

fn simulate(source: &Source, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let spec = load(source)?;
    let problem = spec.build()?;
    std::fs::create_dir_all(out)?;
    let _lock = DirLock::acquire(out)?;
    let scenario_text = emit_config(&spec);
    std::fs::write(out.join(run_dir::SCENARIO), &scenario_text)?;
    let start = Instant::now();
    let result = solver::run(problem.initial.clone(), &problem.boundary, &problem.config);
    let wall = start.elapsed().as_secs_f64();
    let mut manifest = RunManifest {
        scenario: spec.name.clone(),
        scenario_hash: scenario_hash(&scenario_text),
        code_version: RunManifest::code_version(),
        refine: source.refine,
        seed,
        solver: problem.config,
        diagnostics: spec.diagnostics.clone(),
        tolerances: None,
        outcome: "error".into(),
        run_outcome: None,
        error: None,
        stats: None,
        wall_time_s: wall,
        artifacts: vec![run_dir::SCENARIO.into()],
    };
    let run = match result {
        Ok(run) => run,
        Err(e) => {
            manifest.error = Some(e.to_string());
            manifest.write(&out.join(run_dir::MANIFEST))?;
            return Err(runtime(e));
        }
    };
    write_snapshots(&run.u, &run.h, &out.join(run_dir::SNAPSHOTS))?;
    write_events_csv(&run.events, &problem.grid, &out.join(run_dir::EVENTS))?;
    manifest.artifacts.extend([run_dir::SNAPSHOTS.into(), run_dir::EVENTS.into()]);
    manifest.outcome = run.outcome.label().into();
    manifest.run_outcome = Some(run.outcome.clone());
    manifest.stats = Some(run.stats);
    manifest.tolerances = Some(Tolerances::resolve(
        &spec.diagnostics,
        &run.u,
        &problem.params,
        problem.config.event_tol,
        problem.config.dt_init,
    ));
    manifest.write(&out.join(run_dir::MANIFEST))?;
    println!(
        "{}: {} after {} steps, {} events, {} snapshots, {wall:.3}s",
        spec.name,
        run.outcome.label(),
        run.stats.committed_steps,
        run.events.len(),
        run.u.len()
    );
    Ok(())
}

fn analyze_cmd(source: &Source, run: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let (spec, output) = match run {
        Some(dir) => {
            let d = RunDir::open(dir)?;
            println!("scenario {} ({}), code {}", d.manifest.scenario, &d.manifest.scenario_hash[..12], d.manifest.code_version);
            (d.spec, d.output)
        }
        None => {
            let spec = load(source)?;
            let (_, output) = spec.simulate()?;
            (spec, output)
        }
    };
    let p = spec.params()?;
    let (_, decomp, report) =
        analyze(&output, &p, &spec.diagnostics, spec.solver.event_tol, spec.solver.dt).map_err(runtime)?;
    println!("run outcome: {}", output.outcome.label());
    if output.outcome != RunOutcome::Completed {
        println!("note: the run did not reach t_end; this is reported, not treated as a failure");
    }
    for (key, value) in summary_rows(&report) {
        println!("{key}: {value}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_report_json(&report, &dir.join("report.json"))?;
        write_facets_csv(&decomp, &dir.join("facets.csv"))?;
        write_report_tables(&report, dir)?;
    }
    Ok(())
}

fn verify_cmd(
    name: Option<&str>,
    refine: u32,
    seed: u64,
    traces: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let suite = relay_property_suite(seed, traces);
    println!(
        "relay suite (seed {seed}): {} traces, {} switches, {} violations",
        suite.traces,
        suite.switches,
        suite.violations.len()
    );
    for v in suite.violations.iter().take(10) {
        println!("  {} on trace {}: {}", v.property.as_str(), v.trace, v.detail);
    }
    let names: Vec<&str> = match name {
        Some(n) => {
            preset(n)?;
            vec![n]
        }
        None => PRESETS.iter().map(|p| p.0).collect(),
    };
    let mut failed = usize::from(!suite.passed());
    let mut results = Vec::new();
    for n in names {
        let checks = verify_preset(n, refine).map_err(Failure::Runtime)?;
        for c in &checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => {
                    failed += 1;
                    "FAIL"
                }
                CheckStatus::Observed => "NOTE",
            };
            println!("{n} {tag} {}: {}", c.name, c.detail);
        }
        results.push(serde_json::json!({ "preset": n, "checks": checks }));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let doc = serde_json::json!({ "relay_suite": suite, "presets": results });
        let text = serde_json::to_string_pretty(&doc).map_err(runtime)?;
        std::fs::write(dir.join("verify.json"), text + "\n")?;
    }
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn plot(run: &Path, out: Option<&Path>, slices: &[usize]) -> Result<(), Failure> {
    let d = RunDir::open(run)?;
    let out = out.unwrap_or(run);
    std::fs::create_dir_all(out)?;
    let p = d.spec.params()?;
    let u = &d.output.u;
    let title = format!("{} ({})", d.spec.name, d.output.outcome.label());
    if u.grid().dim() == 1 {
        let opts = &d.spec.diagnostics;
        let (_, decomp, _) = analyze(&d.output, &p, opts, d.spec.solver.event_tol, d.spec.solver.dt).map_err(runtime)?;
        std::fs::write(out.join("spacetime.svg"), spacetime_svg(u, &d.output.h, &decomp, &p, &title)?)?;
        write_facets_csv(&decomp, &out.join("facets.csv"))?;
        println!("wrote spacetime.svg and facets.csv");
    } else {
        let picks: Vec<usize> = if slices.is_empty() {
            let last = u.len().saturating_sub(1);
            let mut v = vec![0, last / 2, last];
            v.dedup();
            v
        } else {
            slices.to_vec()
        };
        for k in picks {
            let svg = time_slice_svg(u, &d.output.h, &p, k, &format!("{title}, snapshot {k}"))?;
            std::fs::write(out.join(format!("slice_{k:05}.svg")), svg)?;
            println!("wrote slice_{k:05}.svg");
        }
    }
    Ok(())
}

fn list_scenarios() {
    for (name, description) in PRESETS {
        println!("{name:<20} {description}");
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate { source, out, seed } => simulate(&source, &out, seed),
        Command::Analyze { source, run, out } => analyze_cmd(&source, run.as_deref(), out.as_deref()),
        Command::Verify {
            preset,
            refine,
            seed,
            traces,
            out,
        } => verify_cmd(preset.as_deref(), refine, seed, traces, out.as_deref()),
        Command::Plot { run, out, slices } => plot(&run, out.as_deref(), &slices),
        Command::ListScenarios => {
            list_scenarios();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
