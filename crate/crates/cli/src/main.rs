use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use pism::gme::{dr_certificate, gme_exact, hoeffding_samples};
use pism::harness::{
    compare_runs, format_comparison, preset, run_experiment, BuiltObjective, Experiment, ObjectiveSpec, PRESETS,
};
use pism::inference::{
    block_ca_update, elbo, lmo_shrunken_block, lmo_simplex_block, log_partition_bruteforce, EvalMode,
};
use pism::lattice::{
    check_dr_submodular, check_lattice_submodular, check_monotone, CheckReport, DEFAULT_ENUMERATION_CAP,
};
use pism::objective::value_range;
use pism::{ProductCategorical, SeedStream};

#[derive(Parser)]
#[command(name = "pism", version, about = "Mean-field inference for integer submodular models")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or an earlier bundle's manifest.
    Run {
        config: PathBuf,
        /// Write the bundle here instead of the configured directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Submodularity, DR and monotonicity checks plus GME certificates.
    Check {
        /// Config file, objective-only TOML file, or preset name.
        objective: String,
        /// Block pairs sampled per certificate.
        #[arg(long, default_value_t = 200)]
        trials: u64,
        /// Largest domain given the brute-force checks (the lattice check is
        /// quadratic in the domain size).
        #[arg(long, default_value_t = 20_000)]
        limit: u64,
    },
    /// Summarize one or more bundles that share an objective.
    Compare {
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
    },
    /// Print a preset config (or list the presets).
    Preset { name: Option<String> },
    /// Evaluate the oracles on one gradient block.
    LmoTest {
        /// Comma-separated gradient entries for levels 1..k-1.
        #[arg(long, allow_hyphen_values = true)]
        grad: String,
        /// Comma-separated caps for the shrunken oracle (default: all 1).
        #[arg(long)]
        caps: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
    },
    /// Brute-force log-partition, ELBO and GME at a starting point.
    Oracle {
        /// Config file, objective-only TOML file, or preset name.
        objective: String,
        #[arg(long, default_value = "uniform")]
        rho: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo sample count for a range width, error and confidence.
    Samples {
        #[arg(long)]
        range: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pism: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, output } => run(&config, output),
        Command::Check {
            objective,
            trials,
            limit,
        } => check(&objective, trials, limit),
        Command::Compare { bundles } => {
            let rows = compare_runs(&bundles).context("compare")?;
            print!("{}", format_comparison(&rows));
            Ok(())
        }
        Command::Preset { name: None } => {
            for p in PRESETS {
                println!("{p}");
            }
            Ok(())
        }
        Command::Preset { name: Some(name) } => {
            let c = preset(&name).ok_or_else(|| anyhow!("preset: unknown preset {name:?}"))?;
            print!("{}", c.to_toml());
            Ok(())
        }
        Command::LmoTest { grad, caps, budget } => lmo_test(&grad, caps.as_deref(), budget),
        Command::Oracle { objective, rho, seed } => oracle(&objective, &rho, seed),
        Command::Samples { range, eps, delta } => {
            println!("{}", hoeffding_samples(range, eps, delta).context("samples")?);
            Ok(())
        }
    }
}

fn run(config: &Path, output: Option<PathBuf>) -> Result<()> {
    let mut exp = Experiment::load(config).with_context(|| format!("config: {}", config.display()))?;
    if let Some(out) = output {
        exp.config.output = std::path::absolute(out)?;
    }
    let outcome = run_experiment(&exp)?;
    println!("bundle: {}", outcome.output_dir.display());
    let rows = compare_runs(&[outcome.output_dir]).context("summary")?;
    print!("{}", format_comparison(&rows));
    Ok(())
}

#[derive(Deserialize)]
struct ObjectiveOnly {
    objective: ObjectiveSpec,
    #[serde(default)]
    seed: u64,
}

/// Accepts a preset name, a config or manifest, or a TOML file with just an
/// `[objective]` table (and optionally `seed`).
fn load_objective(arg: &str) -> Result<BuiltObjective> {
    let (spec, seed, base) = if let Some(c) = preset(arg) {
        (c.objective, c.seed, PathBuf::from("."))
    } else {
        let path = Path::new(arg);
        if !path.is_file() {
            bail!("objective: {arg:?} is neither a preset nor a file");
        }
        match Experiment::load(path) {
            Ok(exp) => (exp.config.objective, exp.config.seed, exp.base_dir),
            Err(_) => {
                let text = std::fs::read_to_string(path)?;
                let o: ObjectiveOnly =
                    toml::from_str(&text).with_context(|| format!("objective: {}", path.display()))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (o.objective, o.seed, base)
            }
        }
    };
    BuiltObjective::build(&spec, seed, &base).context("objective")
}

fn report(name: &str, r: &CheckReport) {
    let verdict = if r.passed { "pass" } else { "FAIL" };
    match &r.witness {
        Some(w) => println!("{name:<26} {verdict}  ({} checks) witness: {w}", r.checks),
        None => println!("{name:<26} {verdict}  ({} checks)", r.checks),
    }
}

fn check(arg: &str, trials: u64, limit: u64) -> Result<()> {
    let built = load_objective(arg)?;
    let f = built.objective();
    println!("{}", built.describe());
    println!("objective hash {}", built.hash());
    let enumerable = f.domain().ensure_enumerable(limit.min(DEFAULT_ENUMERATION_CAP)).is_ok();
    if enumerable {
        let range = value_range(f);
        println!("value range [{}, {}]", range.lo, range.hi);
        report("lattice-submodular", &check_lattice_submodular(f).context("check")?);
        report("dr-submodular", &check_dr_submodular(f).context("check")?);
        report("monotone", &check_monotone(f).context("check")?);
        let seeds = SeedStream::new(0);
        for (label, rho) in [
            ("uniform", ProductCategorical::uniform(f.domain())),
            ("random", ProductCategorical::random(f.domain(), 1)),
        ] {
            let r = dr_certificate(f, &rho, trials, &seeds).context("certificate")?;
            report(&format!("gme certificate ({label})"), &r);
        }
    } else {
        let b = f.value_bound();
        println!("value bound [{}, {}]", b.lo, b.hi);
        println!("domain larger than {limit} points; brute-force checks skipped");
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("lmo-test: {t:?} is not a number"))
        })
        .collect()
}

fn lmo_test(grad: &str, caps: Option<&str>, budget: f64) -> Result<()> {
    let g = parse_list(grad)?;
    let caps = match caps {
        Some(c) => parse_list(c)?,
        None => vec![1.0; g.len()],
    };
    if caps.len() != g.len() {
        bail!("lmo-test: {} caps for {} gradient entries", caps.len(), g.len());
    }
    println!("simplex vertex  {:?}", lmo_simplex_block(&g));
    println!("shrunken point  {:?}", lmo_shrunken_block(&g, &caps, budget));
    println!("block update    {:?}", block_ca_update(&g));
    Ok(())
}

fn oracle(arg: &str, rho: &str, seed: u64) -> Result<()> {
    let built = load_objective(arg)?;
    let f = built.objective();
    let d = f.domain();
    let rho = match rho {
        "uniform" => ProductCategorical::uniform(d),
        "zero" => ProductCategorical::zero(d),
        "random" => ProductCategorical::random(d, seed),
        other => bail!("oracle: unknown starting point {other:?} (uniform, zero, random)"),
    };
    println!("{}", built.describe());
    println!("log Z     {:.12}", log_partition_bruteforce(f).context("oracle")?);
    println!("GME       {:.12}", gme_exact(f, &rho).context("oracle")?);
    println!("entropy   {:.12}", rho.entropy());
    println!(
        "ELBO      {:.12}",
        elbo(f, &rho, &EvalMode::Exact).context("oracle")?.value
    );
    Ok(())
}
