use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use boolrc::config::RunConfig;
use boolrc::experiments::{run_experiment, summarize, ExperimentKind, Simulation};
use boolrc::io::{self, RunContext};
use boolrc::Error;

mod report;
mod svg;

/// Boolean evolutionary learning in a simulated noisy photonic reservoir.
#[derive(Parser, Debug)]
#[command(name = "boolrc", version)]
struct Cli {
    /// Worker threads for independent minimizers (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML config file, or `preset:<name>`.
    #[arg(long)]
    config: Option<String>,
    /// Master seed, replacing `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted override such as `noise.sigma_out=0` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the Mackey-Glass dataset (`dataset.csv`, `dataset.json`).
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment into a fresh run directory.
    Run {
        /// ensemble | master-slave | separated-pair | inverted-paths
        kind: ExperimentKind,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Reuse (or create) simulated network states at this path.
        #[arg(long)]
        states_cache: Option<PathBuf>,
    },
    /// Verify a run directory and recompute its summary and plot data.
    Analyze {
        dir: PathBuf,
        /// Write results here instead of into the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a markdown report with SVG figures from an analysed run.
    Report {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { cfg, out } => generate(&load_config(&cfg)?, &out),
        Command::Run { kind, cfg, out, states_cache } => run(kind, &load_config(&cfg)?, &out, states_cache.as_deref()),
        Command::Analyze { dir, out } => analyze(&dir, out.as_deref().unwrap_or(&dir)),
        Command::Report { dir, out } => report::write(&dir, out.as_deref().unwrap_or(&dir)),
    }
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<RunConfig> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let config = match &args.config {
        Some(path) => RunConfig::load(path, &overrides)?,
        None => RunConfig::from_toml_str("", &overrides)?,
    };
    Ok(config)
}

fn generate(config: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let (series, dataset) = config.task.build::<f64>(config.series_seed())?;
    let sidecar = io::write_dataset(out, &series, &dataset, config)?;
    println!("wrote {} samples to {} (sha256 {})", sidecar.length, out.join("dataset.csv").display(), sidecar.csv_sha256);
    Ok(())
}

fn simulation(config: &RunConfig, cache: Option<&Path>) -> anyhow::Result<Simulation<f64>> {
    let params = config.resolved_reservoir();
    let series_seed = config.series_seed();
    let Some(path) = cache else {
        return Ok(Simulation::build(&config.task, series_seed, params)?);
    };
    let (_, dataset) = config.task.build::<f64>(series_seed)?;
    let rows = |w| dataset.error_target(w).len();
    let header = io::cache_header(config, rows(boolrc::task::Window::Train), rows(boolrc::task::Window::Test));
    if path.exists() {
        let (train, test) = io::read_states_cache::<f64>(path, &header).map_err(|e| match e {
            Error::CacheMismatch { expected, found } => anyhow::anyhow!(
                "stale states cache {}\n  cache params hash: {found}\n  run params hash:   {expected}\n\
                 delete the cache or point --states-cache elsewhere",
                path.display()
            ),
            e => e.into(),
        })?;
        log::info!("reusing states from {}", path.display());
        return Ok(Simulation::with_states(&config.task, series_seed, params, train, test)?);
    }
    let sim = Simulation::build(&config.task, series_seed, params)?;
    io::write_states_cache(path, &header, &sim.train, &sim.test)?;
    Ok(sim)
}

fn run(kind: ExperimentKind, config: &RunConfig, out: &Path, cache: Option<&Path>) -> anyhow::Result<()> {
    let sim = simulation(config, cache)?;
    let sigma = config.resolve_sigma(&sim)?;
    let experiment = config.experiment_config(kind, sigma);
    experiment.validate(sim.nodes())?;
    let report = run_experiment(&sim, &experiment)?;
    let checksums =
        [("train".to_string(), sim.train.checksum()), ("test".to_string(), sim.test.checksum())].into_iter().collect();
    let ctx = RunContext { config, sigma_out: sigma, states_checksum: checksums };
    let manifest = io::write_run(out, &report, &ctx)?;
    println!(
        "{kind}: N={} sigma_out={sigma:.4e} traces={} config_hash={} -> {}",
        manifest.nodes,
        manifest.traces.len(),
        manifest.config_hash,
        out.display()
    );
    Ok(())
}

fn analyze(dir: &Path, out: &Path) -> anyhow::Result<()> {
    let run = io::load_run::<f64>(dir)?;
    let m = &run.manifest;
    let summary = summarize(&m.experiment, m.nodes, &run.traces, &run.hamming, &run.minima, run.paths.as_ref())?;
    std::fs::create_dir_all(out)?;
    io::write_json(&out.join("summary.json"), &summary)?;
    let plots = io::write_plots(&out.join("plots"), &summary, run.paths.as_ref())?;
    if let Some(l) = &summary.learning {
        println!(
            "learning: eps0={:.4e} rate={:.4e} R2={:.3} k_min={:.1}",
            l.exponential.eps0, l.exponential.rate, l.exponential.r_squared, l.k_min_mean
        );
        if let Some(s) = &l.minima {
            println!("minima: mean H={:.1} std={:.1} mean|rho|={:.3}", s.mean, s.std, s.mean_abs_correlation);
        }
    }
    if let Some(d) = &summary.divergence {
        println!("divergence: C~={:.4} C={:.4} R2={:.3}", d.fit.params.c_tilde, d.fit.params.c, d.fit.r_squared);
    }
    if let Some(p) = &summary.inverted_paths {
        println!(
            "inverted paths: m={} dependent={:.2} independent={:.2} below-noise={:.2}",
            p.differing, p.dependent.fraction, p.potentially_independent.fraction, p.below_noise.fraction
        );
    }
    println!("wrote summary.json and {} plot tables to {}", plots.len(), out.display());
    Ok(())
}
