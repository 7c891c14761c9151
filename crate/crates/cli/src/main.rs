use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use chemolab::config::{RunConfig, SourceKind};
use chemolab::motility::HypothesisAudit;
use chemolab::output;
use chemolab::pipeline::{self, PipelineError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "chemolab", version, about = "Chemotaxis model runs, comparison envelopes and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the PDE and write snapshots, scalars and metadata.
    Simulate(Common),
    /// Integrate the comparison envelope selected by the config.
    Envelope(Common),
    /// Simulate, integrate both envelopes and run every check.
    Verify(Common),
    /// Verify every point of the config's `[sweep]` grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Concurrent sweep points (default: `sweep.workers`, else available cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check the motility hypotheses on a sample grid.
    Audit(Common),
    /// Estimate the domain constants for the configured grid.
    Constants(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed override for random initial data and constant estimation.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

/// Exit 1: a gated check failed. Exit 2: bad input or a runtime error.
enum Failure {
    Gated(String),
    Runtime(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<output::OutputError> for Failure {
    fn from(e: output::OutputError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

struct Loaded {
    cfg: RunConfig,
    out: PathBuf,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", common.config.display())))?;
    let mut cfg =
        RunConfig::parse(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.to_string_lossy().into_owned();
    }
    Ok(Loaded { cfg, out })
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(common)?;
    let traj = pipeline::simulate(&cfg)?;
    output::write_trajectory(&out, &cfg, &traj)?;
    output::write_plot_script(&out)?;
    let last = traj.last();
    println!(
        "simulated to t = {} in {} steps, {} snapshots -> {}",
        last.t,
        traj.steps,
        traj.snapshots.len(),
        out.display()
    );
    match &traj.failure {
        Some(why) => Err(Failure::Runtime(format!("run stopped early: {why} (partial output kept)"))),
        None => Ok(()),
    }
}

fn envelope(common: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(common)?;
    let kind = cfg.envelope.source;
    let c_omega = match kind {
        SourceKind::ClosedBound => pipeline::c_omega(&cfg)?.0,
        _ => 0.0,
    };
    let traj = match kind {
        SourceKind::Measured => Some(pipeline::simulate(&cfg)?),
        _ => None,
    };
    let env = pipeline::envelope(&cfg, kind, traj.as_ref(), c_omega)?;
    let mu0 = match kind {
        SourceKind::ClosedBound => {
            let audit = pipeline::audit(&cfg)?;
            audit.growth_dominance().then_some(audit.mu0_hat)
        }
        _ => None,
    };
    output::write_config(&out, &cfg)?;
    let path = out.join("envelope.csv");
    output::write_envelope(&path, &env, mu0)?;
    output::write_plot_script(&out)?;
    let last = env.last();
    println!(
        "{} envelope to t = {}: lo = {:.6}, hi = {:.6} -> {}",
        env.source,
        last.t,
        last.lo(),
        last.hi(),
        path.display()
    );
    if let Some(v) = &env.rectangle_violation {
        println!("left the rectangle: {v:?}");
    }
    Ok(())
}

fn verify(common: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(common)?;
    let outcome = pipeline::verify_to_dir(&cfg, &out)?;
    print!("{}", outcome.report.to_text());
    println!("artifacts -> {}", out.display());
    if outcome.report.passed {
        Ok(())
    } else {
        Err(Failure::Gated("verification failed".into()))
    }
}

fn sweep(common: &Common, workers: Option<usize>) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(common)?;
    let Some(section) = &cfg.sweep else {
        return Err(Failure::Runtime(format!("{}: no [sweep] section", common.config.display())));
    };
    let workers = workers
        .or((section.workers > 0).then_some(section.workers))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = pipeline::sweep(&cfg, &out, workers);
    output::write_json(&out.join("sweep.json"), &results)?;

    let mut errors = 0;
    let mut failed = 0;
    for r in &results {
        let verdict = match (r.passed, &r.error) {
            (Some(true), _) => "PASS".to_string(),
            (Some(false), _) => {
                failed += 1;
                "FAIL".to_string()
            }
            (None, e) => {
                errors += 1;
                format!("ERROR {}", e.as_deref().unwrap_or("unknown"))
            }
        };
        let audit = if r.audit_passed { "hypotheses met" } else { "hypotheses unmet" };
        println!("{:<28} {audit:<17} {verdict}", r.label);
    }
    println!("{} points -> {}", results.len(), out.display());
    if errors > 0 {
        Err(Failure::Runtime(format!("{errors} sweep point(s) could not be evaluated")))
    } else if failed > 0 {
        Err(Failure::Gated(format!("{failed} sweep point(s) failed verification")))
    } else {
        Ok(())
    }
}

fn audit_text(a: &HypothesisAudit) -> String {
    let mut s = String::new();
    let flag = |b: bool| if b { "ok" } else { "VIOLATED" };
    let _ = writeln!(s, "gamma > 0           {}", flag(a.sign_checks.positive));
    let _ = writeln!(s, "gamma' <= 0         {}", flag(a.sign_checks.non_increasing));
    let _ = writeln!(s, "gamma'' >= 0        {}", flag(a.sign_checks.convex));
    let _ = writeln!(s, "gamma''' <= 0       {}", flag(a.sign_checks.third_derivative));
    let _ = writeln!(s, "mu0_hat             {:.6}", a.mu0_hat);
    let _ = writeln!(s, "c_gamma_hat         {:.6}", a.c_gamma_hat);
    let _ = writeln!(s, "gamma_min           {:.6e}", a.gamma_min);
    let _ = writeln!(s, "mu - mu0_hat        {:.6}", a.margin);
    if a.mu0_max_at_boundary || a.c_gamma_max_at_boundary {
        let _ = writeln!(s, "warning: a maximum sits at s_max = {}; widen the audit range", a.s_max);
    }
    for v in &a.violations {
        let _ = writeln!(s, "violation: {v:?}");
    }
    let _ = writeln!(s, "audit: {}", if a.passed { "PASS" } else { "FAIL" });
    s
}

fn audit(common: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(common)?;
    let a = pipeline::audit(&cfg)?;
    output::write_json(&out.join("audit.json"), &a)?;
    print!("{}", audit_text(&a));
    if a.passed {
        Ok(())
    } else {
        Err(Failure::Gated("motility hypotheses unmet".into()))
    }
}

fn constants(common: &Common) -> Result<(), Failure> {
    let Loaded { cfg, out } = load(common)?;
    let k = pipeline::constants(&cfg)?;
    output::write_json(&out.join("constants.json"), &k)?;
    println!("c_omega_hat  {:.6}", k.c_omega_hat);
    for (p, c) in &k.c_p {
        println!("c_{p:<10} {c:.6}");
    }
    println!("{} samples, seed {} -> {}", k.samples, k.seed, out.join("constants.json").display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Envelope(c) => envelope(c),
        Command::Verify(c) => verify(c),
        Command::Sweep { common, workers } => sweep(common, *workers),
        Command::Audit(c) => audit(c),
        Command::Constants(c) => constants(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Gated(msg)) => {
            eprintln!("chemolab: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("chemolab: error: {msg}");
            ExitCode::from(2)
        }
    }
}
