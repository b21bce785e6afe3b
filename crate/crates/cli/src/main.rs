//! `nats`: run, sweep and calibrate active-search experiments.
//!
//! Exit status is 0 on success, 1 for bad input (flags, config, data files)
//! and 2 for runtime or numerical failures.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nats_core::config::DelayDistribution;
use nats_core::experiments::{
    calibrate_noise, load_samples, run_sweep, write_calibration_csv, IdealScore, SweepSpec, Vary,
};
use nats_core::viewshed::{coarsen, load_dem, viewshed_mask_strided, write_fraction_csv, Nodata};
use nats_core::{metrics, ExperimentConfig, PolicyKind, Scenario};

#[derive(Debug, Parser)]
#[command(
    name = "nats",
    version,
    about = "Decentralized multi-agent active search experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one run and write `trace.ndjson` and `metrics.json`.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Repeat trials over a parameter and write recovery curves.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Fit a depth-noise table from detector confidence logs.
    Calibrate(CalibrateArgs),
    /// Visible fraction of every coarse node from one observer node.
    Viewshed(ViewshedArgs),
}

/// Config file plus per-field overrides.
#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML experiment config; the synthetic benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// nats | bints | ig | rnd | point
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Message drop probability.
    #[arg(long)]
    drop: Option<f64>,
    /// `D` (constant), `uniform:LOW:HIGH` or `exp:MEAN`.
    #[arg(long, value_parser = parse_delay)]
    delay: Option<DelayDistribution>,
    /// Action-set radius in cells.
    #[arg(long)]
    radius: Option<usize>,
    /// Travel weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Decision threshold on the posterior mean.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VaryParam {
    Agents,
    K,
    Policy,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Parameter to vary; only the measurement axis when omitted.
    #[arg(long, value_enum, requires = "values")]
    vary: Option<VaryParam>,
    /// Comma-separated values for `--vary`.
    #[arg(long, value_delimiter = ',', requires = "vary")]
    values: Vec<String>,
    /// Spacing of the reported measurement counts.
    #[arg(long, default_value_t = 1)]
    t_step: usize,
    /// Recovery level for the time-to-recovery table.
    #[arg(long, default_value_t = 0.7)]
    level: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Ideal {
    /// True-positive logs.
    One,
    /// False-positive logs.
    Zero,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// CSV with header `distance,confidence,label`.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated distance bin edges in meters.
    #[arg(long, value_delimiter = ',', required = true)]
    edges: Vec<f64>,
    #[arg(long, value_enum, default_value = "one")]
    ideal: Ideal,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ViewshedArgs {
    /// ESRI ASCII grid.
    #[arg(long)]
    dem: PathBuf,
    /// Coarse node spacing in meters.
    #[arg(long)]
    spacing: f64,
    /// Observer node as `ROW,COL`.
    #[arg(long, value_parser = parse_node)]
    node: (usize, usize),
    #[arg(long, default_value_t = 2.0)]
    observer_height: f64,
    #[arg(long, default_value_t = 1)]
    pixel_stride: usize,
    /// Replace NODATA cells with this height instead of failing.
    #[arg(long)]
    nodata_fill: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failure with the exit status it maps to.
#[derive(Debug)]
enum Failure {
    Input(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<nats_core::Error> for Failure {
    fn from(e: nats_core::Error) -> Self {
        if e.is_config_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn parse_delay(s: &str) -> Result<DelayDistribution, String> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad delay '{x}': {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(DelayDistribution::Constant { value: num(v)? }),
        ["uniform", lo, hi] => Ok(DelayDistribution::Uniform {
            low: num(lo)?,
            high: num(hi)?,
        }),
        ["exp", mean] => Ok(DelayDistribution::Exponential { mean: num(mean)? }),
        _ => Err(format!("delay '{s}': expected D, uniform:LOW:HIGH or exp:MEAN")),
    }
}

fn parse_node(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(',')
        .ok_or_else(|| format!("node '{s}': expected ROW,COL"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("node '{s}': {e}"));
    Ok((p(r)?, p(c)?))
}

impl ExperimentArgs {
    fn config(&self) -> Outcome<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.policy {
            c.agents.policy = v;
            c.agents.policies = None;
        }
        if let Some(v) = self.agents {
            c.agents.count = v;
        }
        if let Some(v) = self.k {
            c.targets.k = v;
        }
        if let Some(v) = self.budget {
            c.budget = v;
        }
        if let Some(v) = self.drop {
            c.comm.drop = v;
        }
        if let Some(v) = &self.delay {
            c.comm.delay = v.clone();
        }
        if let Some(v) = self.radius {
            c.planner.radius = Some(v);
        }
        if let Some(v) = self.alpha {
            c.planner.alpha = Some(v);
        }
        if let Some(v) = self.threshold {
            c.threshold = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn create(dir: &Path, name: &str) -> Outcome<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn written(dir: &Path, name: &str, r: std::io::Result<()>) -> Outcome {
    r.map_err(|e| Failure::Runtime(format!("writing {}: {e}", dir.join(name).display())))?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn run(exp: &ExperimentArgs) -> Outcome {
    let cfg = exp.config()?;
    let trace = Scenario::build(&cfg)?.run(cfg.seed)?;
    let m = metrics(&trace)?;
    let mut w = create(&exp.out, "trace.ndjson")?;
    trace.write_ndjson(&mut w)?;
    written(&exp.out, "trace.ndjson", w.flush())?;
    let mut w = create(&exp.out, "metrics.json")?;
    let json = serde_json::to_string_pretty(&m).map_err(|e| Failure::Runtime(e.to_string()))?;
    written(&exp.out, "metrics.json", writeln!(w, "{json}").and_then(|_| w.flush()))?;
    match m.first_recovery {
        Some(t) => println!("recovered after {t} measurements ({} agents)", m.agents),
        None => println!("not recovered within {} measurements", m.measurements),
    }
    Ok(())
}

fn sweep(exp: &ExperimentArgs, args: &SweepArgs) -> Outcome {
    let cfg = exp.config()?;
    let bad = |e: String| Failure::Input(e);
    let vary = match args.vary {
        None => Vary::None,
        Some(VaryParam::Agents) => Vary::Agents(
            args.values
                .iter()
                .map(|v| v.trim().parse().map_err(|e| bad(format!("agents '{v}': {e}"))))
                .collect::<Outcome<_>>()?,
        ),
        Some(VaryParam::K) => Vary::Targets(
            args.values
                .iter()
                .map(|v| v.trim().parse().map_err(|e| bad(format!("k '{v}': {e}"))))
                .collect::<Outcome<_>>()?,
        ),
        Some(VaryParam::Policy) => Vary::Policy(
            args.values
                .iter()
                .map(|v| v.trim().parse::<PolicyKind>().map_err(bad))
                .collect::<Outcome<_>>()?,
        ),
    };
    if args.t_step == 0 {
        return Err(bad("--t-step must be at least 1".into()));
    }
    let mut spec = SweepSpec::new(cfg);
    spec.t_grid = (0..=spec.base.budget).step_by(args.t_step).collect();
    spec.vary = vary;
    spec.level = args.level;
    let result = run_sweep(&spec)?;
    let mut w = create(&exp.out, "curve.csv")?;
    written(
        &exp.out,
        "curve.csv",
        result.write_curve_csv(&mut w).and_then(|_| w.flush()),
    )?;
    let mut w = create(&exp.out, "time_to_recovery.csv")?;
    written(
        &exp.out,
        "time_to_recovery.csv",
        result.write_time_to_recovery_csv(&mut w).and_then(|_| w.flush()),
    )?;
    let mut w = create(&exp.out, "trials.csv")?;
    written(
        &exp.out,
        "trials.csv",
        result.write_trials_csv(&mut w).and_then(|_| w.flush()),
    )?;
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Outcome {
    let samples = load_samples(&args.input)?;
    let ideal = match args.ideal {
        Ideal::One => IdealScore::One,
        Ideal::Zero => IdealScore::Zero,
    };
    let (model, bins) = calibrate_noise(&samples, &args.edges, ideal)?;
    let mut w = create(&args.out, "calibration.csv")?;
    written(
        &args.out,
        "calibration.csv",
        write_calibration_csv(&bins, &mut w).and_then(|_| w.flush()),
    )?;
    println!(
        "[noise]\nmetric = \"meters\"\ndepths = {:?}\nvariances = {:?}",
        model.depths(),
        model.variances()
    );
    Ok(())
}

fn viewshed(args: &ViewshedArgs) -> Outcome {
    let nodata = args.nodata_fill.map_or(Nodata::Reject, Nodata::Fill);
    let dem = load_dem(&args.dem, nodata)?;
    let grid = coarsen(&dem, args.spacing)?;
    let (r, c) = args.node;
    if r >= grid.rows || c >= grid.cols {
        return Err(Failure::Input(format!(
            "node ({r}, {c}) outside the {}x{} coarse grid",
            grid.rows, grid.cols
        )));
    }
    let fractions = viewshed_mask_strided(&dem, &grid, r * grid.cols + c, args.observer_height, args.pixel_stride);
    let mut w = create(&args.out, "viewshed.csv")?;
    written(
        &args.out,
        "viewshed.csv",
        write_fraction_csv(&grid, &fractions, &mut w).and_then(|_| w.flush()),
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run { exp } => run(exp),
        Command::Sweep { exp, sweep: s } => sweep(exp, s),
        Command::Calibrate(args) => calibrate(args),
        Command::Viewshed(args) => viewshed(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(m) => eprintln!("error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
