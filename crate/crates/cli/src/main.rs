use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anisoflock::analysis::{hex_lattice, verify_equilibrium_for, EXACT_TIE_TOLERANCE};
use anisoflock::harness::config::{
    parse_heading_rule, render_params, ConfigFile, ExperimentSection,
};
use anisoflock::harness::experiment::{
    run_experiment, ExperimentSpec, SweepAxis, DEFAULT_REPLICATES,
};
use anisoflock::harness::output;
use anisoflock::metrics::{classify_pattern, MetricsReport};
use anisoflock::{random_initial, run_with, Configuration, ModelParams, Preset, RunOptions};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "anisoflock",
    version,
    about = "Anisotropic attraction-repulsion group simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded simulation and write its record, snapshots and metrics.
    Simulate(SimulateArgs),
    /// Run a parameter sweep with replicates.
    Batch(BatchArgs),
    /// Compute metrics of a positions CSV or of a run record's terminal state.
    Metrics(MetricsArgs),
    /// Check whether a configuration is an n = 1 isotropic equilibrium.
    EquilibriumCheck(EquilibriumArgs),
    /// Write a hexagonal lattice as a positions CSV.
    Lattice(LatticeArgs),
    /// Emit tab-delimited plot tables from a run record.
    Plotdata(PlotdataArgs),
}

/// Parameter flags; names match the config-file keys.
#[derive(Args, Clone, Debug, Default)]
struct ParamArgs {
    /// Starting parameter set (cluster, line, vee).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n_agents: Option<f64>,
    #[arg(long = "n")]
    n_neighbors: Option<f64>,
    #[arg(long = "xi")]
    xi: Option<f64>,
    #[arg(long = "alpha_a")]
    alpha_a: Option<f64>,
    #[arg(long = "alpha_r")]
    alpha_r: Option<f64>,
    #[arg(long = "R_sr")]
    r_sr: Option<f64>,
    #[arg(long = "v_max")]
    v_max: Option<f64>,
    #[arg(long = "L")]
    domain: Option<f64>,
    #[arg(long = "alpha_noise")]
    alpha_noise: Option<f64>,
    #[arg(long = "eps_angle")]
    eps_angle: Option<f64>,
    /// fixed or velocity.
    #[arg(long = "heading_rule")]
    heading_rule: Option<String>,
    #[arg(long = "dt_max")]
    dt_max: Option<f64>,
    #[arg(long = "disp_cap")]
    disp_cap: Option<f64>,
    #[arg(long = "eps_steady")]
    eps_steady: Option<f64>,
    #[arg(long = "steady_window")]
    steady_window: Option<f64>,
    #[arg(long = "max_iters")]
    max_iters: Option<f64>,
}

impl ParamArgs {
    /// Parameters from preset or config, then flag overrides.
    fn resolve(&self) -> Result<(ModelParams, ExperimentSection)> {
        let (mut params, experiment) = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let cfg = ConfigFile::load(path)?;
                (cfg.params, cfg.experiment)
            }
            (None, Some(name)) => (
                name.parse::<Preset>()?.params(),
                ExperimentSection::default(),
            ),
            (None, None) => (ModelParams::default(), ExperimentSection::default()),
        };
        let overrides = [
            ("N", self.n_agents),
            ("n", self.n_neighbors),
            ("xi", self.xi),
            ("alpha_a", self.alpha_a),
            ("alpha_r", self.alpha_r),
            ("R_sr", self.r_sr),
            ("v_max", self.v_max),
            ("L", self.domain),
            ("alpha_noise", self.alpha_noise),
            ("eps_angle", self.eps_angle),
            ("dt_max", self.dt_max),
            ("disp_cap", self.disp_cap),
            ("eps_steady", self.eps_steady),
            ("steady_window", self.steady_window),
            ("max_iters", self.max_iters),
        ];
        for (name, value) in overrides {
            if let Some(v) = value {
                params.set(name, v)?;
            }
        }
        if let Some(rule) = &self.heading_rule {
            params.heading_rule = parse_heading_rule(rule)?;
        }
        Ok((params, experiment))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Store every k-th step (0: first and last only).
    #[arg(
        long = "snapshot_stride",
        alias = "snapshot-stride",
        default_value_t = 100
    )]
    snapshot_stride: u64,
    #[arg(long, default_value = "run")]
    run_id: String,
    /// Extra alignment-index probe angle (repeatable).
    #[arg(long = "ai-probe")]
    ai_probes: Vec<f64>,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Seed base for replicate seeds.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output directory (default: the config's output_dir, else "batch").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep axis `NAME=V1,V2,...` (repeatable; cross product).
    #[arg(long)]
    sweep: Vec<String>,
    #[arg(long = "snapshot_stride", alias = "snapshot-stride")]
    snapshot_stride: Option<u64>,
    #[arg(long = "ai-probe")]
    ai_probes: Vec<f64>,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Positions CSV (x,y[,heading_x,heading_y]).
    #[arg(long, conflicts_with = "record", required_unless_present = "record")]
    positions: Option<PathBuf>,
    /// Run record JSON; its parameters are used unless flags override them.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long = "ai-probe")]
    ai_probes: Vec<f64>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EquilibriumArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, conflicts_with = "record", required_unless_present = "record")]
    positions: Option<PathBuf>,
    #[arg(long)]
    record: Option<PathBuf>,
    /// Distance tolerance around xi (default 1e-9, or 0.05 xi for records).
    #[arg(long)]
    eps_dist: Option<f64>,
    /// Tie tolerance for closest sets (default 1e-9, or 0.05 xi for records).
    #[arg(long)]
    eps_tie: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long, default_value_t = 2)]
    rings: usize,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Positions CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotdataArgs {
    /// Run record JSON.
    record: PathBuf,
    #[arg(long, default_value = "plot")]
    out: PathBuf,
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (mut params, _) = args.params.resolve()?;
    params.seed = args.seed;
    params.validate()?;
    let initial = random_initial(&params, args.seed)?;
    let record = run_with(
        &initial,
        &params,
        &RunOptions {
            snapshot_stride: args.snapshot_stride,
            run_id: args.run_id,
            ai_probes: args.ai_probes,
        },
    )?;
    let files = output::write_run(&args.out, &record)?;
    fs::write(args.out.join("params.toml"), render_params(&params))
        .with_context(|| format!("writing {}", args.out.display()))?;
    let m = &record.final_metrics;
    println!(
        "termination: {:?} after {} steps (t = {:.3})",
        record.termination.kind, record.termination.iterations, record.termination.final_time
    );
    println!(
        "nnd_mean = {:.4}  elongation = {:.4}  AI(30) = {:.2}%  AI({}) = {:.2}%  pattern = {}",
        m.nnd_mean,
        m.elongation,
        m.ai(30.0).unwrap_or(f64::NAN),
        0.5 * params.alpha_r,
        m.ai(0.5 * params.alpha_r).unwrap_or(f64::NAN),
        classify_pattern(m, &params)
    );
    println!("record: {}", files.record.display());
    println!("snapshots: {}", files.snapshots.display());
    println!("metrics: {}", files.metrics.display());
    Ok(())
}

fn parse_sweep(arg: &str) -> Result<SweepAxis> {
    let (name, values) = arg
        .split_once('=')
        .with_context(|| format!("sweep `{arg}` is not NAME=V1,V2,..."))?;
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad sweep value `{v}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepAxis::single(name.trim(), values))
}

fn batch(args: BatchArgs) -> Result<()> {
    let (base, section) = args.params.resolve()?;
    let mut spec = ExperimentSpec::new(base, args.seed);
    spec.replicates = args
        .replicates
        .or(section.replicates)
        .unwrap_or(DEFAULT_REPLICATES);
    spec.snapshot_stride = args
        .snapshot_stride
        .or(section.snapshot_stride)
        .unwrap_or(0);
    spec.ai_probes = section.ai_probes.unwrap_or_default();
    spec.ai_probes.extend(args.ai_probes);
    for entry in section.sweep {
        spec.sweep.push(entry.into_axis()?);
    }
    for s in &args.sweep {
        spec.sweep.push(parse_sweep(s)?);
    }
    let out = args
        .out
        .or(section.output_dir)
        .unwrap_or_else(|| PathBuf::from("batch"));
    spec.output_dir = Some(out.clone());
    let outcome = run_experiment(&spec)?;
    for cell in &outcome.summary.cells {
        let label = cell
            .assignment
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        let stat = |key: &str| cell.metric(key).map(|s| s.mean).unwrap_or(f64::NAN);
        println!(
            "cell {:>3} [{label}] runs={} steady={} nnd={:.4} elongation={:.4} ai_30={:.2}",
            cell.cell,
            cell.runs,
            cell.steady_runs,
            stat("nnd_mean"),
            stat("elongation"),
            stat("ai_30"),
        );
    }
    println!("summary: {}", out.join(output::SUMMARY_JSON).display());
    Ok(())
}

/// Configuration and parameters for the metrics and equilibrium commands.
fn load_target(
    params: &ParamArgs,
    positions: Option<&Path>,
    record: Option<&Path>,
) -> Result<(Configuration, ModelParams, bool)> {
    match (positions, record) {
        (Some(path), _) => {
            let config = output::read_positions_csv(path)?;
            let (p, _) = params.resolve()?;
            Ok((config, p, false))
        }
        (None, Some(path)) => {
            let rec = output::read_record(path)?;
            let explicit = params.config.is_some() || params.preset.is_some();
            let p = if explicit {
                params.resolve()?.0
            } else {
                rec.params.clone()
            };
            let terminal = rec
                .terminal_snapshot()
                .context("empty record")?
                .to_configuration();
            Ok((terminal, p, true))
        }
        (None, None) => bail!("one of --positions or --record is required"),
    }
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let (config, params, _) = load_target(
        &args.params,
        args.positions.as_deref(),
        args.record.as_deref(),
    )?;
    let report = MetricsReport::compute(&config, &params, &args.ai_probes)?;
    emit_json(&report, args.out.as_deref())
}

fn equilibrium_check(args: EquilibriumArgs) -> Result<()> {
    let (config, mut params, from_run) = load_target(
        &args.params,
        args.positions.as_deref(),
        args.record.as_deref(),
    )?;
    if let Some(xi) = args.params.xi {
        params.xi = xi;
    }
    let default_tol = if from_run {
        0.05 * params.xi
    } else {
        EXACT_TIE_TOLERANCE
    };
    let verdict = verify_equilibrium_for(
        &config,
        &params,
        args.eps_dist.unwrap_or(default_tol),
        args.eps_tie.unwrap_or(default_tol),
    )?;
    emit_json(&verdict, args.out.as_deref())
}

fn lattice(args: LatticeArgs) -> Result<()> {
    if !(args.spacing > 0.0 && args.spacing.is_finite()) {
        bail!("--spacing must be positive, got {}", args.spacing);
    }
    let config = hex_lattice(args.rings, args.spacing);
    match args.out {
        Some(path) => output::write_positions_csv(&path, &config)?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "x,y,heading_x,heading_y")?;
            for a in &config.agents {
                writeln!(
                    out,
                    "{},{},{},{}",
                    a.position.x, a.position.y, a.heading.x, a.heading.y
                )?;
            }
        }
    }
    Ok(())
}

fn plotdata(args: PlotdataArgs) -> Result<()> {
    let record = output::read_record(&args.record)?;
    for path in output::write_plotdata(&args.out, &record)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Batch(a) => batch(a),
        Command::Metrics(a) => metrics(a),
        Command::EquilibriumCheck(a) => equilibrium_check(a),
        Command::Lattice(a) => lattice(a),
        Command::Plotdata(a) => plotdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
