use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phylodrift::experiments::{
    run_persistence, sweep, write_estimates_csv, write_estimates_json, SweepGrid,
};
use phylodrift::population::{DEFAULT_MAX_EVENTS, DEFAULT_MAX_POPULATION};
use phylodrift::seed::{auxiliary_seed, rng_from_seed};
use phylodrift::tree::{build_tree, export_newick};
use phylodrift::{
    simulate, AttachmentRule, Error, Estimator, MomentTable, PersistenceEstimate,
    PersistenceParams, SimConfig, Trajectory,
};

use crate::manifest::{sidecar, RunManifest};

/// Stream index of the tree-attachment generator relative to a run's seed.
const TREE_STREAM: u64 = 1;

/// A command-line mistake not caught by the parser.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "phylodrift",
    version,
    about = "Fitness-ranked birth-death simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Simulate one trajectory and optionally export its events and tree.
    Simulate(SimulateArgs),
    /// Estimate the probability that the record holder at alpha*t survives to t.
    Persistence(PersistenceArgs),
    /// Tabulate first-passage moments of the supercritical chain.
    Moments(MomentsArgs),
    /// Persistence estimates over a grid of (lambda, alpha, t).
    Sweep(SweepArgs),
    /// Repeat a run recorded in a manifest.
    Rerun(RerunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Persistence(_) => "persistence",
            Command::Moments(_) => "moments",
            Command::Sweep(_) => "sweep",
            Command::Rerun(_) => "rerun",
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            Command::Simulate(a) => a.seed = seed,
            Command::Persistence(a) => a.seed = seed,
            Command::Sweep(a) => a.seed = seed,
            Command::Moments(_) | Command::Rerun(_) => {}
        }
    }
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct Caps {
    /// Stop with exit code 3 after this many events.
    #[arg(long, default_value_t = DEFAULT_MAX_EVENTS)]
    pub max_events: u64,
    /// Stop with exit code 3 once this many types are alive.
    #[arg(long, default_value_t = DEFAULT_MAX_POPULATION)]
    pub max_population: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeRule {
    /// Attach each newborn to the fittest alive type.
    Max,
    /// Attach each newborn to an alive type chosen uniformly.
    Random,
}

impl From<TreeRule> for AttachmentRule {
    fn from(rule: TreeRule) -> Self {
        match rule {
            TreeRule::Max => AttachmentRule::MaxFitnessParent,
            TreeRule::Random => AttachmentRule::RandomAliveParent,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorChoice {
    Direct,
    Conditional,
    Both,
}

impl EstimatorChoice {
    fn estimators(self) -> Vec<Estimator> {
        match self {
            EstimatorChoice::Direct => vec![Estimator::Direct],
            EstimatorChoice::Conditional => vec![Estimator::Conditional],
            EstimatorChoice::Both => vec![Estimator::Direct, Estimator::Conditional],
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// Birth rate per type.
    #[arg(long)]
    pub lambda: f64,
    /// Time horizon.
    #[arg(long)]
    pub t: f64,
    #[arg(long, env = "PHYLODRIFT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Attachment rule for the exported tree.
    #[arg(long, value_enum, default_value_t = TreeRule::Max)]
    pub tree: TreeRule,
    /// Write the tree in Newick format.
    #[arg(long)]
    pub newick: Option<PathBuf>,
    /// Keep types without a descendant alive at the horizon in the Newick output.
    #[arg(long)]
    pub include_dead: bool,
    /// Write the event log as CSV.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Manifest location (default: next to the first output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PersistenceArgs {
    #[arg(long)]
    pub lambda: f64,
    /// Early time as a fraction of t, in (0, 1).
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub t: f64,
    /// Number of replicates.
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long, value_enum, default_value_t = EstimatorChoice::Both)]
    pub estimator: EstimatorChoice,
    #[arg(long, env = "PHYLODRIFT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Results CSV; a JSON copy is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MomentsArgs {
    /// Birth rate, must exceed 1.
    #[arg(long)]
    pub lambda: f64,
    /// Largest level n to tabulate.
    #[arg(long, default_value_t = 100)]
    pub n_max: usize,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub alpha_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub t_list: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long, value_enum, default_value_t = EstimatorChoice::Both)]
    pub estimator: EstimatorChoice,
    #[arg(long, env = "PHYLODRIFT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for manifest.json, results.csv and results.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub caps: Caps,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args, argv),
        Command::Persistence(args) => cmd_persistence(&args, argv),
        Command::Moments(args) => cmd_moments(&args, argv),
        Command::Sweep(args) => cmd_sweep(&args, argv),
        Command::Rerun(args) => cmd_rerun(&args),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn write_manifest<P: Serialize>(
    path: &Path,
    command: &str,
    params: &P,
    seed: u64,
    outputs: Vec<PathBuf>,
    argv: Vec<String>,
) -> Result<()> {
    RunManifest::new(command, params, seed, outputs, argv)?.write(path)
}

fn cmd_simulate(args: &SimulateArgs, argv: Vec<String>) -> Result<()> {
    let mut config = SimConfig::new(args.lambda, args.t, args.seed)
        .with_caps(args.caps.max_events, args.caps.max_population);
    if args.newick.is_some() {
        config = config.with_ledger();
    } else if args.events.is_none() {
        config = config.without_events();
    }
    config.validate()?;

    let outputs: Vec<PathBuf> = args.events.iter().chain(&args.newick).cloned().collect();
    if let Some(first) = outputs.first() {
        let path = args.manifest.clone().unwrap_or_else(|| sidecar(first));
        write_manifest(&path, "simulate", args, args.seed, outputs.clone(), argv)?;
    }

    let (trajectory, stopped) = match simulate(&config) {
        Ok(t) => (t, None),
        Err(Error::Explosion {
            cap,
            limit,
            time,
            replicate,
            partial: Some(partial),
        }) => (
            *partial,
            Some(Error::Explosion {
                cap,
                limit,
                time,
                replicate,
                partial: None,
            }),
        ),
        Err(e) => return Err(e.into()),
    };

    write_simulation_outputs(args, &trajectory)?;
    let state = &trajectory.state;
    let best = state.record_holder();
    println!(
        "{}n={} S={} record_holder=t{} fitness={} time={}",
        if stopped.is_some() { "partial: " } else { "" },
        state.size(),
        state.births(),
        best.id,
        best.fitness,
        state.time(),
    );
    match stopped {
        Some(err) => {
            Err(anyhow::Error::new(err).context("simulation stopped; partial outputs written"))
        }
        None => Ok(()),
    }
}

fn write_simulation_outputs(args: &SimulateArgs, trajectory: &Trajectory) -> Result<()> {
    if let Some(path) = &args.events {
        let mut out = create(path)?;
        trajectory.log.write_csv(&mut out)?;
        out.flush()?;
    }
    if let Some(path) = &args.newick {
        let ledger = trajectory
            .ledger
            .as_ref()
            .context("trajectory has no type ledger")?;
        let mut rng = rng_from_seed(auxiliary_seed(args.seed, TREE_STREAM));
        let tree = build_tree(ledger, &trajectory.log, args.tree.into(), &mut rng)?;
        tree.validate()?;
        let mut out = create(path)?;
        writeln!(out, "{}", export_newick(&tree, args.include_dead))?;
        out.flush()?;
    }
    Ok(())
}

fn json_mirror(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_estimates(path: &Path, rows: &[PersistenceEstimate]) -> Result<()> {
    let mut out = create(path)?;
    write_estimates_csv(&mut out, rows)?;
    out.flush()?;
    let mut out = create(&json_mirror(path))?;
    write_estimates_json(&mut out, rows)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn print_estimates(rows: &[PersistenceEstimate]) {
    for r in rows {
        println!(
            "lambda={} alpha={} t={} {}: {:.6} (se {:.6}, {} replicates, {} excluded)",
            r.lambda, r.alpha, r.t, r.estimator, r.point, r.std_err, r.replicates, r.excluded
        );
    }
}

fn cmd_persistence(args: &PersistenceArgs, argv: Vec<String>) -> Result<()> {
    let params = PersistenceParams {
        max_events: args.caps.max_events,
        max_population: args.caps.max_population,
        ..PersistenceParams::new(args.lambda, args.alpha, args.t, args.reps, args.seed)
    };
    params.validate()?;

    if let Some(out) = &args.out {
        let outputs = vec![out.clone(), json_mirror(out)];
        write_manifest(&sidecar(out), "persistence", args, args.seed, outputs, argv)?;
    }
    let run = with_jobs(args.jobs, || run_persistence(&params))??;
    let rows: Vec<PersistenceEstimate> = args
        .estimator
        .estimators()
        .into_iter()
        .map(|e| PersistenceEstimate::from_run(&run, e))
        .collect();
    match &args.out {
        Some(out) => {
            write_estimates(out, &rows)?;
            print_estimates(&rows);
        }
        None => write_estimates_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn cmd_moments(args: &MomentsArgs, argv: Vec<String>) -> Result<()> {
    let table = MomentTable::compute(args.lambda, args.n_max)?;
    match &args.out {
        Some(out) => {
            write_manifest(&sidecar(out), "moments", args, 0, vec![out.clone()], argv)?;
            let mut file = create(out)?;
            table.write_csv(&mut file)?;
            file.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, argv: Vec<String>) -> Result<()> {
    let grid = SweepGrid {
        lambdas: args.lambda_list.clone(),
        alphas: args.alpha_list.clone(),
        ts: args.t_list.clone(),
    };
    if grid.is_empty() {
        return Err(usage("sweep grid is empty"));
    }
    let template = PersistenceParams {
        max_events: args.caps.max_events,
        max_population: args.caps.max_population,
        ..PersistenceParams::new(
            grid.lambdas[0],
            grid.alphas[0],
            grid.ts[0],
            args.reps,
            args.seed,
        )
    };
    for (lambda, alpha, t) in grid.points() {
        PersistenceParams {
            lambda,
            alpha,
            t,
            ..template
        }
        .validate()?;
    }

    let results = args.out_dir.join("results.csv");
    let outputs = vec![results.clone(), json_mirror(&results)];
    write_manifest(
        &args.out_dir.join("manifest.json"),
        "sweep",
        args,
        args.seed,
        outputs,
        argv,
    )?;
    let estimators = args.estimator.estimators();
    let rows = with_jobs(args.jobs, || sweep(&grid, &template, &estimators))??;
    write_estimates(&results, &rows)?;
    println!("{} rows written to {}", rows.len(), results.display());
    Ok(())
}

fn cmd_rerun(args: &RerunArgs) -> Result<()> {
    let manifest = RunManifest::read(&args.manifest)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, running {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let argv = std::iter::once("phylodrift".to_owned()).chain(manifest.argv.iter().cloned());
    let mut cli = Cli::try_parse_from(argv)
        .map_err(|e| usage(format!("manifest arguments do not parse: {e}")))?;
    if cli.command.name() != manifest.command {
        return Err(usage(format!(
            "manifest records command {:?} but its arguments run {:?}",
            manifest.command,
            cli.command.name()
        )));
    }
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(usage("a manifest cannot record a rerun"));
    }
    cli.command.set_seed(manifest.master_seed);
    run(cli, manifest.argv)
}
