use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use rayon::prelude::*;
use spectral_cert::oracle::{discretize_radial, kth_eigenvalue, write_spectrum_csv};
use spectral_cert::scenario::{
    builtin, builtin_scenarios, emit_report, exit_code_for, run_scenario, ScenarioConfig, ScenarioReport, EXIT_CONFIG,
    EXIT_OK,
};
use spectral_cert::Error;

#[derive(Debug, Parser)]
#[command(name = "spectral-cert", version, about = "Certify and cross-check spectral intervals on model manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search and certify intervals, without the oracle.
    Certify(RunArgs),
    /// Write the lowest eigenvalues of the truncated radial operator.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Certify, then cross-validate against the oracle spectrum.
    Compare(RunArgs),
    #[command(subcommand)]
    Demo(Demo),
    /// Print the built-in scenarios.
    ListScenarios,
}

#[derive(Debug, Subcommand)]
enum Demo {
    /// Distributional Laplacian of the distance on the flat cylinder.
    Cylinder {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long = "h", value_delimiter = ',')]
        spacings: Option<Vec<f64>>,
    },
    /// Mollifier and partition blend checks.
    Mollify {
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(run: &RunArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = match (&run.config, &run.scenario) {
        (Some(path), _) => ScenarioConfig::from_path(path)?,
        (None, Some(name)) => builtin(name).ok_or_else(|| {
            let names: Vec<_> = builtin_scenarios().into_iter().map(|s| s.name).collect();
            Error::Config(format!("unknown scenario {name:?}; known: {}", names.join(", ")))
        })?,
        (None, None) => return Err(Error::Config("pass --config or --scenario".into())),
    };
    if let Some(seed) = run.out.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig, out: &OutArgs) -> PathBuf {
    out.out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

fn execute(cfg: ScenarioConfig, out: &OutArgs) -> Result<i32, Error> {
    let dir = out_dir(&cfg, out);
    let rep = run_scenario(&cfg, out.jobs)?;
    emit_report(&rep, &dir)?;
    summarize(&rep, &dir);
    Ok(rep.exit_code)
}

fn summarize(rep: &ScenarioReport, dir: &Path) {
    println!("{} [{}] -> {:?} (exit {})", rep.scenario, rep.mode, rep.status, rep.exit_code);
    for c in &rep.certificates {
        println!(
            "  lambda {:>8.4}  sigma {:.3e}  epsilon {:.3e}  {:?}",
            c.lambda, c.sigma, c.epsilon, c.method
        );
    }
    if let Some(v) = &rep.validation {
        for e in &v.entries {
            println!(
                "  oracle lambda {:>8.4}: nearest {}  {}",
                e.lambda,
                e.nearest_eigenvalue.map_or("-".to_string(), |mu| format!("{mu:.6}")),
                if e.validated { "ok" } else { "MISS" }
            );
        }
    }
    for f in &rep.failures {
        println!("  failure [{}] {}", f.kind, f.message);
    }
    for c in &rep.checks {
        println!("  {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    println!("  reports in {}", dir.display());
}

fn oracle(cfg: &ScenarioConfig, out: &OutArgs, count: usize) -> Result<i32, Error> {
    let (Some(spec), Some(o)) = (&cfg.manifold, &cfg.oracle) else {
        return Err(Error::Config(format!("scenario {:?} has no manifold or oracle section", cfg.name)));
    };
    let t = discretize_radial(&spec.build()?, o.length, o.m)?;
    let eigenvalues = (0..count.min(t.size()))
        .into_par_iter()
        .map(|k| kth_eigenvalue(&t, k, 1e-10))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = out_dir(cfg, out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("spectrum.csv");
    write_spectrum_csv(&path, &eigenvalues)?;
    println!("{}: {} eigenvalues (L = {}, m = {})", cfg.name, eigenvalues.len(), o.length, o.m);
    for (k, mu) in eigenvalues.iter().enumerate().take(10) {
        println!("  {k:>3}  {mu:.8}");
    }
    println!("  written to {}", path.display());
    Ok(EXIT_OK)
}

fn dispatch(cmd: Command) -> Result<i32, Error> {
    match cmd {
        Command::Certify(run) => {
            let mut cfg = load(&run)?;
            cfg.oracle = None;
            execute(cfg, &run.out)
        }
        Command::Compare(run) => {
            let cfg = load(&run)?;
            if cfg.oracle.is_none() {
                return Err(Error::Config(format!("scenario {:?} has no oracle section", cfg.name)));
            }
            execute(cfg, &run.out)
        }
        Command::Oracle { run, count } => {
            let cfg = load(&run)?;
            oracle(&cfg, &run.out, count)
        }
        Command::Demo(Demo::Cylinder { out, spacings }) => {
            let mut cfg = builtin("cylinder").expect("builtin cylinder");
            if let Some(h) = spacings {
                cfg.mode = spectral_cert::scenario::Mode::Cylinder { spacings: h };
            }
            if let Some(seed) = out.seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            execute(cfg, &out)
        }
        Command::Demo(Demo::Mollify { out }) => {
            let mut cfg = builtin("mollify_suite").expect("builtin mollify_suite");
            if let Some(seed) = out.seed {
                cfg.seed = seed;
            }
            execute(cfg, &out)
        }
        Command::ListScenarios => {
            for s in builtin_scenarios() {
                let manifold = s.manifold.as_ref().map_or("-".to_string(), |m| format!("{} n={}", m.kind, m.dimension));
                let lambdas: Vec<String> = s.lambdas.iter().map(|l| l.to_string()).collect();
                println!(
                    "{:<22} {:<15} {:<18} lambdas [{}]{}",
                    s.name,
                    s.mode.name(),
                    manifold,
                    lambdas.join(", "),
                    if s.expected_failure { "  (negative control)" } else { "" }
                );
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPECTRAL_CERT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { EXIT_OK as u8 });
        }
    };
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
