//! Command-line front end.  Every subcommand wraps one library entry
//! point and writes the same file formats the library emits; exit codes
//! are 0 for pass, 1 when a verification verdict is fail or violation,
//! and 2 for usage or input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mcflab::arrival::{
    asymptotic_residual, signed_distance_convex, solve_arrival, ArrivalControls, Grid2,
    ResidualOptions,
};
use mcflab::estimates::VerificationReport;
use mcflab::flow::{run_to_extinction, FlowControls, FlowTrajectory, TrajectoryMeta};
use mcflab::pipeline::{
    build_shape, run_checks, run_pipeline, seeded_variants, sweep, write_sweep_csv, CheckKind,
    CheckParams, ExperimentConfig, GaugeConfig, GaugeMode, ShapePreset,
};
use mcflab::rescale::{build_graph_trajectory, Gauge, GraphTrajectory};
use mcflab::spectral::{mode_spectrum, SphereGrid};
use mcflab::Error;

#[derive(Parser)]
#[command(
    name = "mcflab",
    version,
    about = "Arrival times and rescaled asymptotics of curvature flow on convex planar domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow a convex shape to extinction and write the trajectory.
    Flow(FlowCmd),
    /// Solve the arrival-time equation on a planar grid.
    Arrival(ArrivalCmd),
    /// Rescale a flow trajectory into a graph trajectory over the circle.
    Rescale(RescaleCmd),
    /// Print the stability eigenvalue table.
    Spectrum(SpectrumCmd),
    /// Run one verification check against a graph trajectory.
    Verify(VerifyCmd),
    /// Run the whole chain for one config.
    Pipeline(PipelineCmd),
    /// Run many seeded configs and tabulate verdicts.
    Sweep(SweepCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShapeKind {
    Circle,
    Ellipse,
    PerturbedCircle,
}

#[derive(Args, Clone)]
struct ShapeArgs {
    #[arg(long, value_enum)]
    shape: Option<ShapeKind>,
    /// Circle and perturbed-circle radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Circle center.
    #[arg(long, num_args = 2, value_names = ["X", "Y"], default_values_t = [0.0, 0.0], allow_negative_numbers = true)]
    center: Vec<f64>,
    /// Ellipse semi-axes.
    #[arg(long, default_value_t = 1.2)]
    a: f64,
    #[arg(long, default_value_t = 1.0 / 1.2)]
    b: f64,
    /// Perturbation size of the perturbed circle.
    #[arg(long, default_value_t = 0.05)]
    amplitude: f64,
    /// Highest perturbed mode.
    #[arg(long, default_value_t = 8)]
    max_mode: u32,
}

impl ShapeArgs {
    fn preset(&self) -> Result<ShapePreset, Error> {
        let kind = self
            .shape
            .ok_or_else(|| Error::Config("--shape is required here".into()))?;
        Ok(match kind {
            ShapeKind::Circle => ShapePreset::Circle {
                radius: self.radius,
                center: [self.center[0], self.center[1]],
            },
            ShapeKind::Ellipse => ShapePreset::Ellipse {
                a: self.a,
                b: self.b,
            },
            ShapeKind::PerturbedCircle => ShapePreset::PerturbedCircle {
                radius: self.radius,
                amplitude: self.amplitude,
                max_mode: self.max_mode,
            },
        })
    }
}

#[derive(Args)]
struct FlowCmd {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Gauss-map nodes of the support function.
    #[arg(long, default_value_t = 256)]
    flow_m: usize,
    #[arg(long, default_value_t = FlowControls::default().cfl)]
    cfl: f64,
    /// Snapshot spacing in the rescaled time s.
    #[arg(long, default_value_t = FlowControls::default().log_ds)]
    snapshot_ds: f64,
    #[arg(long, default_value_t = FlowControls::default().area_floor_frac)]
    area_floor_frac: f64,
    #[arg(long, default_value_t = FlowControls::default().max_steps)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory output (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ArrivalCmd {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Support-function nodes used to build the signed distance.
    #[arg(long, default_value_t = 256)]
    flow_m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid nodes per side.
    #[arg(long, default_value_t = 128)]
    n: usize,
    /// Half-width of the grid; by default 1.15 times the shape's reach.
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long, default_value_t = ArrivalControls::default().dtau_factor)]
    dtau_factor: f64,
    /// Flow time between distance refreshes.
    #[arg(long, default_value_t = ArrivalControls::default().reinit_interval)]
    reinit_interval: f64,
    /// Arrival field output (CSV: x,y,t).
    #[arg(long)]
    out_csv: PathBuf,
    /// Grid metadata output (JSON).
    #[arg(long)]
    out_header: PathBuf,
    /// Optional near-extinction residual report (CSV per annulus).
    #[arg(long)]
    residual_csv: Option<PathBuf>,
    /// Order of the residual expansion the report tests against.
    #[arg(long, default_value_t = 3)]
    claimed_order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GaugeArg {
    Exact,
    Estimated,
}

#[derive(Args)]
struct RescaleCmd {
    /// Flow trajectory to rescale (JSONL from `flow`).
    #[arg(long)]
    traj: PathBuf,
    /// Nodes of the circle grid the graph is sampled on.
    #[arg(long, default_value_t = 64)]
    sphere_m: usize,
    #[arg(long, value_enum, default_value_t = GaugeArg::Estimated)]
    gauge: GaugeArg,
    /// Deliberate gauge offsets for mis-gauging experiments.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta_t: f64,
    #[arg(long, num_args = 2, value_names = ["X", "Y"], default_values_t = [0.0, 0.0], allow_negative_numbers = true)]
    delta_x0: Vec<f64>,
    /// Graph trajectory output (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumCmd {
    /// Sphere dimension.
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[arg(long, default_value_t = 8)]
    l_max: u32,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyCmd {
    /// certificate | decay | quadratic-bound | key-inequality | sup-bound | duhamel
    check: String,
    /// Graph trajectory input (JSONL from `rescale` or `pipeline`).
    #[arg(long)]
    graph: PathBuf,
    /// Sobolev index of the estimates.
    #[arg(long, default_value_t = 2)]
    r: u32,
    /// Ranks for the projected inequalities.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
    ranks: Vec<u32>,
    /// Base time of the projected inequalities.
    #[arg(long)]
    s0: Option<f64>,
    /// Product-bound constant; sampled when omitted.
    #[arg(long)]
    c_hat: Option<f64>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start of the variation-of-constants identity.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    span: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Report destination directory; reports print to stdout when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineCmd {
    /// Config file (TOML); overrides all other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    flow_m: usize,
    #[arg(long, default_value_t = 64)]
    sphere_m: usize,
    #[arg(long, value_enum, default_value_t = GaugeArg::Estimated)]
    gauge: GaugeArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta_t: f64,
    #[arg(long, num_args = 2, value_names = ["X", "Y"], default_values_t = [0.0, 0.0], allow_negative_numbers = true)]
    delta_x0: Vec<f64>,
    /// Comma-separated checks to run.
    #[arg(long, value_delimiter = ',', default_values_t = ["certificate".to_string(), "decay".to_string()])]
    checks: Vec<String>,
}

#[derive(Args)]
struct SweepCmd {
    /// Base config file (TOML); seeds and output folders are varied per run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Number of seeded runs.
    #[arg(long, default_value_t = 8)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_start: u64,
    /// Summary table output (CSV); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Flow(cmd) => cmd_flow(cmd),
        Command::Arrival(cmd) => cmd_arrival(cmd),
        Command::Rescale(cmd) => cmd_rescale(cmd),
        Command::Spectrum(cmd) => cmd_spectrum(cmd),
        Command::Verify(cmd) => cmd_verify(cmd),
        Command::Pipeline(cmd) => cmd_pipeline(cmd),
        Command::Sweep(cmd) => cmd_sweep(cmd),
    }
}

fn cmd_flow(cmd: FlowCmd) -> Result<ExitCode, Error> {
    let preset = cmd.shape.preset()?;
    let start = build_shape(&preset, cmd.flow_m, cmd.seed)?;
    let controls = FlowControls {
        cfl: cmd.cfl,
        area_floor_frac: cmd.area_floor_frac,
        log_ds: cmd.snapshot_ds,
        max_steps: cmd.max_steps,
    };
    let traj = run_to_extinction(&start, &controls)?;
    let meta = TrajectoryMeta {
        shape: preset.kind().to_string(),
        params: preset.params_json(),
        dtau_policy: controls.dtau_policy(),
        seed: Some(cmd.seed),
    };
    traj.write_jsonl(&cmd.out, &meta)?;
    println!(
        "{} snapshots, T_hat = {:.8}, x0_hat = ({:.3e}, {:.3e}) -> {}",
        traj.snapshots.len(),
        traj.t_hat,
        traj.x0_hat[0],
        traj.x0_hat[1],
        cmd.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_arrival(cmd: ArrivalCmd) -> Result<ExitCode, Error> {
    let preset = cmd.shape.preset()?;
    let sf = build_shape(&preset, cmd.flow_m, cmd.seed)?;
    let reach = sf
        .boundary_points()
        .iter()
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max);
    let extent = cmd.extent.unwrap_or(1.15 * reach);
    let grid = Grid2::square(cmd.n, extent)?;
    let phi0 = signed_distance_convex(&sf, &grid);
    let controls = ArrivalControls {
        dtau_factor: cmd.dtau_factor,
        reinit_interval: cmd.reinit_interval,
        ..ArrivalControls::default()
    };
    let field = solve_arrival(&grid, &phi0, &controls)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&cmd.out_csv)?);
    field.write_csv(&mut w)?;
    drop(w);
    field.write_header_json(&cmd.out_header)?;
    println!(
        "T_hat = {:.8}, x0_hat = ({:.3e}, {:.3e}), resolved until t = {:.6}",
        field.t_hat, field.x0_hat[0], field.x0_hat[1], field.resolved_until
    );
    if let Some(path) = cmd.residual_csv {
        let report = asymptotic_residual(
            &field,
            field.t_hat,
            field.x0_hat,
            cmd.claimed_order,
            &ResidualOptions::default(),
        )?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        report.write_csv(&mut w)?;
        match report.global_exponent {
            Some(p) => println!("residual exponent {p:.3} over resolved annuli"),
            None => println!("residual below the resolved floor everywhere"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_rescale(cmd: RescaleCmd) -> Result<ExitCode, Error> {
    let (traj, header) = FlowTrajectory::read_jsonl(&cmd.traj)?;
    let (t, x0) = match cmd.gauge {
        GaugeArg::Estimated => (traj.t_hat, traj.x0_hat),
        GaugeArg::Exact => {
            if header.shape != "circle" {
                return Err(Error::Config(
                    "exact gauge is only available for circle trajectories".into(),
                ));
            }
            let radius = header.params["radius"].as_f64().ok_or_else(|| {
                Error::Config("circle trajectory header lacks a radius".into())
            })?;
            let center = header.params.get("center").and_then(|c| {
                Some([c.get(0)?.as_f64()?, c.get(1)?.as_f64()?])
            });
            (0.5 * radius * radius, center.unwrap_or([0.0, 0.0]))
        }
    };
    let gauge = Gauge {
        t_hat: t + cmd.delta_t,
        x0: [x0[0] + cmd.delta_x0[0], x0[1] + cmd.delta_x0[1]],
    };
    let sphere = SphereGrid::new(1, cmd.sphere_m)?;
    let graph = build_graph_trajectory(&traj, &sphere, &gauge)?;
    graph.write_jsonl(&cmd.out)?;
    println!(
        "{} graph snapshots (skipped {} lead, {} tail) -> {}",
        graph.snapshots.len(),
        graph.skipped_lead,
        graph.skipped_tail,
        cmd.out.display()
    );
    if let Some(reason) = &graph.truncation {
        println!("truncated: {reason}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(cmd: SpectrumCmd) -> Result<ExitCode, Error> {
    let spectrum = mode_spectrum(cmd.n, cmd.l_max)?;
    match cmd.out {
        Some(path) => {
            let w = std::io::BufWriter::new(std::fs::File::create(path)?);
            spectrum.write_csv(w)?;
        }
        None => spectrum.write_csv(std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cmd: VerifyCmd) -> Result<ExitCode, Error> {
    let check: CheckKind = cmd.check.parse()?;
    let graph = GraphTrajectory::read_jsonl(&cmd.graph)?;
    let params = CheckParams {
        r: cmd.r,
        ranks: cmd.ranks.clone(),
        s0: cmd.s0,
        c_hat: cmd.c_hat,
        samples: cmd.samples,
        seed: cmd.seed,
        duhamel_s: cmd.s,
        duhamel_span: cmd.span,
        duhamel_tol: cmd.tol,
        ..CheckParams::default()
    };
    let reports = run_checks(&graph, &[check], &params)?;
    let mut failed = false;
    for (name, report) in &reports {
        failed |= report.verdict.is_failure();
        match &cmd.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                report.write_json(&dir.join(format!("{name}.json")))?;
            }
            None => {
                let f = std::io::stdout().lock();
                serde_json::to_writer_pretty(f, report)?;
                println!();
            }
        }
        print_report_line(name, report);
    }
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn print_report_line(name: &str, report: &VerificationReport) {
    let margin = report.min_margin();
    if margin.is_finite() {
        eprintln!("{name}: {} (min margin {margin:.3e})", report.verdict);
    } else {
        eprintln!("{name}: {}", report.verdict);
    }
}

fn inline_config(
    shape: &ShapeArgs,
    output_dir: Option<&PathBuf>,
    what: &str,
) -> Result<ExperimentConfig, Error> {
    let shape = shape
        .preset()
        .map_err(|_| Error::Config(format!("{what} needs --config or --shape")))?;
    let output_dir = output_dir
        .ok_or_else(|| Error::Config(format!("{what} needs --output-dir without --config")))?
        .clone();
    Ok(ExperimentConfig::new(shape, output_dir))
}

fn cmd_pipeline(cmd: PipelineCmd) -> Result<ExitCode, Error> {
    let config = match &cmd.config {
        Some(path) => ExperimentConfig::read_toml(path)?,
        None => {
            let mut config = inline_config(&cmd.shape, cmd.output_dir.as_ref(), "pipeline")?;
            config.seed = cmd.seed;
            config.grid.flow_m = cmd.flow_m;
            config.grid.sphere_m = cmd.sphere_m;
            config.gauge = GaugeConfig {
                policy: match cmd.gauge {
                    GaugeArg::Exact => GaugeMode::Exact,
                    GaugeArg::Estimated => GaugeMode::Estimated,
                },
                delta_t: cmd.delta_t,
                delta_x0: [cmd.delta_x0[0], cmd.delta_x0[1]],
            };
            config.checks = cmd
                .checks
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()?;
            config
        }
    };
    let bundle = run_pipeline(&config)?;
    for report in &bundle.reports {
        print_report_line(&report.check, report);
    }
    if let Some(v) = bundle.headline_verdict() {
        println!("verdict: {v}");
    }
    println!("artifacts in {}", bundle.dir.display());
    Ok(if bundle.failed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_sweep(cmd: SweepCmd) -> Result<ExitCode, Error> {
    let base = match &cmd.config {
        Some(path) => ExperimentConfig::read_toml(path)?,
        None => inline_config(&cmd.shape, cmd.output_dir.as_ref(), "sweep")?,
    };
    let configs = seeded_variants(&base, cmd.seed_start..cmd.seed_start + cmd.seeds);
    let rows = sweep(&configs);
    match &cmd.out {
        Some(path) => {
            let w = std::io::BufWriter::new(std::fs::File::create(path)?);
            write_sweep_csv(&rows, w)?;
        }
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    let mut bad = false;
    for row in &rows {
        if let Some(e) = &row.error {
            eprintln!("{}: failed ({e})", row.label);
            bad = true;
        } else if row.verdict.is_some_and(|v| v.is_failure()) {
            eprintln!("{}: {}", row.label, row.verdict.unwrap());
            bad = true;
        }
    }
    Ok(if bad {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}
