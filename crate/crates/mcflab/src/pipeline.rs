//! Experiment orchestration.  One config drives the whole chain: build a
//! shape, flow it to extinction, fix a gauge, extract the rescaled graph
//! trajectory, run the requested verification checks, and leave a
//! self-describing artifact directory with a checksum manifest behind.
//!
//! Runs are deterministic in (config, seed): all randomness flows through
//! one seeded generator, files are written with stable key order, and the
//! manifest lets a reader confirm nothing was edited after the fact.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimates::{
    self, CertificateOptions, DecayFit, SmallnessPolicy, Verdict, VerificationReport,
};
use crate::flow::{self, FlowControls, FlowTrajectory, SupportFunction, TrajectoryMeta};
use crate::rescale::{self, Gauge, GraphTrajectory};
use crate::shapes;
use crate::spectral::{self, SphereGrid};

/// Initial domain for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapePreset {
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Circle plus a random convex perturbation drawn from the run's
    /// generator; modes l = 2..=max_mode.
    PerturbedCircle {
        radius: f64,
        amplitude: f64,
        max_mode: u32,
    },
}

impl ShapePreset {
    pub fn kind(&self) -> &'static str {
        match self {
            ShapePreset::Circle { .. } => "circle",
            ShapePreset::Ellipse { .. } => "ellipse",
            ShapePreset::PerturbedCircle { .. } => "perturbed-circle",
        }
    }

    pub fn params_json(&self) -> serde_json::Value {
        match self {
            ShapePreset::Circle { radius, center } => {
                serde_json::json!({"radius": radius, "center": center})
            }
            ShapePreset::Ellipse { a, b } => serde_json::json!({"a": a, "b": b}),
            ShapePreset::PerturbedCircle {
                radius,
                amplitude,
                max_mode,
            } => serde_json::json!({
                "radius": radius, "amplitude": amplitude, "max_mode": max_mode
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ShapePreset::Circle { radius, center } => {
                radius > 0.0 && center.iter().all(|c| c.is_finite())
            }
            ShapePreset::Ellipse { a, b } => a > 0.0 && b > 0.0,
            ShapePreset::PerturbedCircle {
                radius,
                amplitude,
                max_mode,
            } => radius > 0.0 && amplitude >= 0.0 && max_mode >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {} parameters", self.kind())))
        }
    }
}

/// How the extinction time and point are chosen before rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeMode {
    /// Closed-form gauge; available for the circle preset only.
    Exact,
    /// Area-law and moment estimates from the flow itself.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    pub policy: GaugeMode,
    /// Deliberate offsets for mis-gauging experiments; both default to zero.
    pub delta_t: f64,
    pub delta_x0: [f64; 2],
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self {
            policy: GaugeMode::Estimated,
            delta_t: 0.0,
            delta_x0: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Gauss-map nodes carried by the support-function flow.
    pub flow_m: usize,
    /// Nodes of the circle grid the rescaled graph is sampled on.
    pub sphere_m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            flow_m: 256,
            sphere_m: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub cfl: f64,
    /// Snapshot spacing in the rescaled time s.
    pub snapshot_ds: f64,
    /// Stop once the area falls below this fraction of the initial area.
    pub area_floor_frac: f64,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        let d = FlowControls::default();
        Self {
            cfl: d.cfl,
            snapshot_ds: d.log_ds,
            area_floor_frac: d.area_floor_frac,
            max_steps: d.max_steps,
        }
    }
}

impl FlowConfig {
    fn controls(&self) -> FlowControls {
        FlowControls {
            cfl: self.cfl,
            area_floor_frac: self.area_floor_frac,
            log_ds: self.snapshot_ds,
            max_steps: self.max_steps,
        }
    }
}

/// Verification checks a run can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Certificate,
    Decay,
    QuadraticBound,
    KeyInequality,
    SupBound,
    Duhamel,
}

impl CheckKind {
    pub fn all() -> [CheckKind; 6] {
        [
            CheckKind::Certificate,
            CheckKind::Decay,
            CheckKind::QuadraticBound,
            CheckKind::KeyInequality,
            CheckKind::SupBound,
            CheckKind::Duhamel,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Certificate => "certificate",
            CheckKind::Decay => "decay",
            CheckKind::QuadraticBound => "quadratic-bound",
            CheckKind::KeyInequality => "key-inequality",
            CheckKind::SupBound => "sup-bound",
            CheckKind::Duhamel => "duhamel",
        }
    }
}

impl std::str::FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckKind::all()
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check `{s}`")))
    }
}

fn default_checks() -> Vec<CheckKind> {
    vec![CheckKind::Certificate, CheckKind::Decay]
}

/// Full description of one run; round-trips through TOML unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub shape: ShapePreset,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckKind>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(shape: ShapePreset, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            shape,
            seed: 0,
            grid: GridConfig::default(),
            flow: FlowConfig::default(),
            gauge: GaugeConfig::default(),
            checks: default_checks(),
            output_dir: output_dir.into(),
        }
    }

    pub fn label(&self) -> String {
        format!("{}-seed{}", self.shape.kind(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.grid.flow_m < 32 || self.grid.flow_m % 2 != 0 {
            return Err(Error::Config("flow_m must be even and at least 32".into()));
        }
        if self.grid.sphere_m < 8 {
            return Err(Error::Config("sphere_m must be at least 8".into()));
        }
        if !(self.flow.snapshot_ds > 0.0 && self.flow.snapshot_ds.is_finite()) {
            return Err(Error::Config("snapshot_ds must be positive".into()));
        }
        if self.flow.cfl.is_nan() || self.flow.cfl <= 0.0 {
            return Err(Error::Config("cfl must be positive".into()));
        }
        if !(self.flow.area_floor_frac > 0.0 && self.flow.area_floor_frac < 1.0) {
            return Err(Error::Config("area_floor_frac must lie in (0, 1)".into()));
        }
        if !self.gauge.delta_t.is_finite() || self.gauge.delta_x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("gauge offsets must be finite".into()));
        }
        if self.gauge.policy == GaugeMode::Exact
            && !matches!(self.shape, ShapePreset::Circle { .. })
        {
            return Err(Error::Config(
                "exact gauge is only available for the circle preset".into(),
            ));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    /// Canonical text form; checksums of configs are taken over this.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read_toml(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_toml(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

/// Everything a finished run leaves in memory; the files live under `dir`.
#[derive(Debug)]
pub struct ArtifactBundle {
    pub config: ExperimentConfig,
    pub dir: PathBuf,
    pub flow: FlowTrajectory,
    pub gauge: Gauge,
    pub graph: GraphTrajectory,
    pub decay: Option<DecayFit>,
    pub reports: Vec<VerificationReport>,
    /// Relative path -> SHA-256 of every file written, except the manifest.
    pub manifest: BTreeMap<String, String>,
}

impl ArtifactBundle {
    /// Verdict of the certificate check when present, else the worst
    /// verdict over all reports.
    pub fn headline_verdict(&self) -> Option<Verdict> {
        self.reports
            .iter()
            .find(|r| r.check == "unique_continuation")
            .map(|r| r.verdict)
            .or_else(|| self.reports.iter().map(|r| r.verdict).max_by_key(|v| severity(*v)))
    }

    pub fn failed(&self) -> bool {
        self.reports.iter().any(|r| r.verdict.is_failure())
    }

    pub fn min_margin(&self) -> Option<f64> {
        let m = self
            .reports
            .iter()
            .flat_map(|r| r.margins.iter().map(|x| x.value))
            .fold(f64::INFINITY, f64::min);
        m.is_finite().then_some(m)
    }
}

fn severity(v: Verdict) -> u8 {
    match v {
        Verdict::Violation => 4,
        Verdict::Fail => 3,
        Verdict::Inconclusive => 2,
        Verdict::Pass | Verdict::Rigid | Verdict::Quantized => 1,
    }
}

/// Materialize a preset at m nodes; the perturbed circle draws its
/// coefficients from a generator seeded with `seed`.
pub fn build_shape(preset: &ShapePreset, m: usize, seed: u64) -> Result<SupportFunction> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match *preset {
        ShapePreset::Circle { radius, center } => shapes::circle(radius, center, m),
        ShapePreset::Ellipse { a, b } => shapes::ellipse(a, b, m),
        ShapePreset::PerturbedCircle {
            radius,
            amplitude,
            max_mode,
        } => shapes::perturbed_circle(radius, amplitude, max_mode, m, &mut rng),
    }
}

fn resolve_gauge(config: &ExperimentConfig, traj: &FlowTrajectory) -> Result<Gauge> {
    let (t, x0) = match config.gauge.policy {
        GaugeMode::Estimated => (traj.t_hat, traj.x0_hat),
        GaugeMode::Exact => match config.shape {
            ShapePreset::Circle { radius, center } => (0.5 * radius * radius, center),
            _ => {
                return Err(Error::Config(
                    "exact gauge is only available for the circle preset".into(),
                ))
            }
        },
    };
    Ok(Gauge {
        t_hat: t + config.gauge.delta_t,
        x0: [
            x0[0] + config.gauge.delta_x0[0],
            x0[1] + config.gauge.delta_x0[1],
        ],
    })
}

/// Window for rate fits: prefer s in [3, 6], fall back to the trailing
/// stretch when the trajectory does not reach that far.
pub fn fit_window(snaps: &[rescale::GraphSnapshot]) -> [f64; 2] {
    let s_first = snaps.first().map(|g| g.s).unwrap_or(0.0);
    let s_last = snaps.last().map(|g| g.s).unwrap_or(0.0);
    let lo = s_first.max(3.0);
    let hi = s_last.min(6.0);
    if hi - lo >= 1.0 {
        [lo, hi]
    } else {
        [s_first.max(s_last - 3.0), s_last]
    }
}

fn decay_report(fit: &DecayFit, digest: String) -> VerificationReport {
    let mut report = VerificationReport::new("decay", digest);
    report.param("r", fit.r);
    report.param("window", format!("[{:.3}, {:.3}]", fit.window[0], fit.window[1]));
    report.param("rate", format!("{:.6}", fit.rate));
    report.param("amplitude", format!("{:.6e}", fit.amplitude));
    report.param("n_points", fit.n_points);
    if fit.at_floor {
        report.notes.push("norms sat at the numerical floor".into());
        report.verdict = Verdict::Inconclusive;
    } else {
        report.push_margin("fit_residual_slack", 0.1 - fit.residual);
        report.verdict = if fit.reliable {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        };
    }
    report
}

fn write_decay_csv(path: &Path, graph: &GraphTrajectory) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "s,sup_norm")?;
    for r in 0..=6u32 {
        write!(w, ",h{r}")?;
    }
    writeln!(w)?;
    for g in &graph.snapshots {
        write!(w, "{},{:.12e}", g.s, g.sup_norm())?;
        for r in 0..=6u32 {
            write!(w, ",{:.12e}", spectral::sobolev_norm(&g.coeffs, r))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn write_summary_csv(path: &Path, reports: &[(String, VerificationReport)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "check,verdict,min_margin,notes")?;
    for (name, report) in reports {
        let margin = report.min_margin();
        let margin = if margin.is_finite() {
            format!("{margin:.6e}")
        } else {
            String::new()
        };
        writeln!(w, "{name},{},{margin},{}", report.verdict, report.notes.len())?;
    }
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}

/// Tunables of the verification checks; `Default` is what `run_pipeline`
/// uses (apart from the seed, which follows the run).
#[derive(Debug, Clone)]
pub struct CheckParams {
    /// Sobolev index the estimates are evaluated at.
    pub r: u32,
    /// Ranks the projected inequalities are tried at.
    pub ranks: Vec<u32>,
    /// Base time of the projected inequalities; defaults to the later of
    /// the first snapshot and s = 1.
    pub s0: Option<f64>,
    /// Product-bound constant handed to the integral inequalities;
    /// sampled fresh when absent.
    pub c_hat: Option<f64>,
    /// Monte-Carlo samples behind that constant, and their norm cap.
    pub samples: usize,
    pub sample_cap: f64,
    pub seed: u64,
    /// Start of the variation-of-constants identity; defaults like `s0`.
    pub duhamel_s: Option<f64>,
    pub duhamel_span: f64,
    pub duhamel_tol: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        Self {
            r: 2,
            ranks: vec![1, 2, 3, 4],
            s0: None,
            c_hat: None,
            samples: 100,
            sample_cap: 0.1,
            seed: 0,
            duhamel_s: None,
            duhamel_span: 1.0,
            duhamel_tol: 1e-4,
        }
    }
}

/// Run verification checks against a graph trajectory and name each
/// resulting report (the rank-indexed inequality emits one per rank).
/// Reports come back sorted by name.
pub fn run_checks(
    graph: &GraphTrajectory,
    checks: &[CheckKind],
    params: &CheckParams,
) -> Result<Vec<(String, VerificationReport)>> {
    let snaps = &graph.snapshots;
    let first = snaps
        .first()
        .ok_or(Error::InsufficientData { need: 1, found: 0 })?;
    let sphere = first.grid;
    let spec = spectrum(&sphere)?;
    let digest = estimates::digest_graphs(snaps);
    let s_first = first.s;
    let s_last = snaps.last().unwrap().s;
    let s0 = params.s0.unwrap_or_else(|| s_first.max(1.0).min(s_last));

    // the product-bound constant feeds the integral inequalities, so it
    // is sampled whenever one of the three wants it; the sampling stream
    // is seeded apart from the shape stream
    let wants = |c: CheckKind| checks.contains(&c);
    let quad = if wants(CheckKind::QuadraticBound)
        || ((wants(CheckKind::KeyInequality) || wants(CheckKind::SupBound))
            && params.c_hat.is_none())
    {
        let mut rng =
            ChaCha12Rng::seed_from_u64(params.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
        let samples: Vec<_> = (0..params.samples)
            .map(|_| {
                estimates::random_band_limited(1, sphere.max_l(), params.sample_cap, &mut rng)
            })
            .collect::<Result<_>>()?;
        Some(estimates::check_quadratic_bound(&sphere, &samples, params.r)?)
    } else {
        None
    };
    let c_hat = params.c_hat.or_else(|| quad.as_ref().map(|q| q.c_hat));

    let mut reports: Vec<(String, VerificationReport)> = Vec::new();
    for &check in checks {
        match check {
            CheckKind::Certificate => {
                let opts = CertificateOptions {
                    r: params.r,
                    ..CertificateOptions::default()
                };
                let report = estimates::unique_continuation_certificate(snaps, &spec, &opts)?;
                reports.push(("certificate".into(), report));
            }
            CheckKind::Decay => {
                let window = fit_window(snaps);
                let report = match estimates::decay_fit_floored(
                    snaps,
                    params.r,
                    window,
                    estimates::RIGID_FLOOR,
                    10,
                ) {
                    Ok(fit) => decay_report(&fit, digest.clone()),
                    Err(Error::InsufficientData { .. }) => {
                        let mut r = VerificationReport::new("decay", digest.clone());
                        r.notes.push("trajectory too short for a rate fit".into());
                        r.verdict = Verdict::Inconclusive;
                        r
                    }
                    Err(e) => return Err(e),
                };
                reports.push(("decay".into(), report));
            }
            CheckKind::QuadraticBound => {
                let q = quad.as_ref().expect("sampled above");
                reports.push(("quadratic_bound".into(), q.report.clone()));
            }
            CheckKind::KeyInequality => {
                let c_hat = c_hat.expect("constant resolved above");
                let rems: Vec<_> = snaps
                    .iter()
                    .map(estimates::nonlinear_remainder)
                    .collect::<Result<_>>()?;
                for &k in &params.ranks {
                    let report = estimates::verify_key_inequality_with(
                        snaps, &rems, &spec, k, params.r, s0, c_hat,
                    )?;
                    reports.push((format!("key_inequality_k{k}"), report));
                }
            }
            CheckKind::SupBound => {
                let c_hat = c_hat.expect("constant resolved above");
                let report = estimates::verify_sup_bound(
                    snaps,
                    &spec,
                    &params.ranks,
                    params.r,
                    SmallnessPolicy::Least,
                    c_hat,
                )?;
                reports.push(("sup_bound".into(), report));
            }
            CheckKind::Duhamel => {
                let s = params
                    .duhamel_s
                    .unwrap_or_else(|| s_first.max(1.0))
                    .min((s_last - params.duhamel_span).max(s_first));
                let s1 = (s + params.duhamel_span).min(s_last);
                let report =
                    estimates::verify_duhamel(snaps, params.r, s, s1, params.duhamel_tol)?;
                reports.push(("duhamel".into(), report));
            }
        }
    }
    reports.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(reports)
}

/// Run the whole chain for one config and leave the artifact directory
/// behind.  Deterministic in (config, seed); the returned bundle lists
/// the SHA-256 of every file written.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<ArtifactBundle> {
    config.validate().map_err(|e| Error::stage("config", e))?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::stage("io", e.into()))?;
    std::fs::create_dir_all(dir.join("reports")).map_err(|e| Error::stage("io", e.into()))?;

    let mut files: Vec<PathBuf> = Vec::new();
    let config_path = dir.join("config.toml");
    config
        .write_toml(&config_path)
        .map_err(|e| Error::stage("config", e))?;
    files.push(config_path);

    let start = build_shape(&config.shape, config.grid.flow_m, config.seed)
        .map_err(|e| Error::stage("shape", e))?;

    let traj = flow::run_to_extinction(&start, &config.flow.controls())
        .map_err(|e| Error::stage("flow", e))?;
    let flow_path = dir.join("flow.jsonl");
    let meta = TrajectoryMeta {
        shape: config.shape.kind().to_string(),
        params: config.shape.params_json(),
        dtau_policy: config.flow.controls().dtau_policy(),
        seed: Some(config.seed),
    };
    traj.write_jsonl(&flow_path, &meta)
        .map_err(|e| Error::stage("flow", e))?;
    files.push(flow_path);

    let gauge = resolve_gauge(config, &traj).map_err(|e| Error::stage("gauge", e))?;
    let sphere = SphereGrid::new(1, config.grid.sphere_m).map_err(|e| Error::stage("rescale", e))?;
    let graph = rescale::build_graph_trajectory(&traj, &sphere, &gauge)
        .map_err(|e| Error::stage("rescale", e))?;
    let graph_path = dir.join("graph.jsonl");
    graph
        .write_jsonl(&graph_path)
        .map_err(|e| Error::stage("rescale", e))?;
    files.push(graph_path);

    let decay_path = dir.join("decay.csv");
    write_decay_csv(&decay_path, &graph).map_err(|e| Error::stage("io", e))?;
    files.push(decay_path);

    let snaps = &graph.snapshots;
    let window = fit_window(snaps);
    let decay = match estimates::decay_fit_floored(snaps, 2, window, estimates::RIGID_FLOOR, 10) {
        Ok(fit) => Some(fit),
        Err(Error::InsufficientData { .. }) => None,
        Err(e) => return Err(Error::stage("verify", e)),
    };

    let params = CheckParams {
        seed: config.seed,
        ..CheckParams::default()
    };
    let reports =
        run_checks(&graph, &config.checks, &params).map_err(|e| Error::stage("verify", e))?;
    for (name, report) in &reports {
        let path = dir.join("reports").join(format!("{name}.json"));
        report.write_json(&path).map_err(|e| Error::stage("io", e))?;
        files.push(path);
    }

    let summary_path = dir.join("summary.csv");
    write_summary_csv(&summary_path, &reports).map_err(|e| Error::stage("io", e))?;
    files.push(summary_path);

    let mut manifest = BTreeMap::new();
    for path in &files {
        let rel = path
            .strip_prefix(&dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        manifest.insert(rel, sha256_file(path).map_err(|e| Error::stage("io", e))?);
    }
    let manifest_path = dir.join("manifest.json");
    let f = std::io::BufWriter::new(
        std::fs::File::create(&manifest_path).map_err(|e| Error::stage("io", Error::from(e)))?,
    );
    serde_json::to_writer_pretty(f, &manifest).map_err(|e| Error::stage("io", Error::from(e)))?;

    Ok(ArtifactBundle {
        config: config.clone(),
        dir,
        flow: traj,
        gauge,
        graph,
        decay,
        reports: reports.into_iter().map(|(_, r)| r).collect(),
        manifest,
    })
}

fn spectrum(grid: &SphereGrid) -> Result<spectral::ModeSpectrum> {
    spectral::mode_spectrum(grid.n(), grid.max_l() as u32)
}

/// One line of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub shape: String,
    pub seed: u64,
    /// Fitted decay rate of the H^2 norm, when a fit existed.
    pub rate: Option<f64>,
    pub verdict: Option<Verdict>,
    pub min_margin: Option<f64>,
    /// Stage-tagged message when the run failed outright.
    pub error: Option<String>,
}

/// Copies of `base` with the seed replaced and per-seed output folders.
pub fn seeded_variants(
    base: &ExperimentConfig,
    seeds: impl IntoIterator<Item = u64>,
) -> Vec<ExperimentConfig> {
    seeds
        .into_iter()
        .map(|seed| {
            let mut c = base.clone();
            c.seed = seed;
            c.output_dir = base.output_dir.join(format!("seed-{seed:04}"));
            c
        })
        .collect()
}

/// Run every config independently; per-run failures land in the row, not
/// in a panic, so a sweep always produces a full table. Rows keep input
/// order.
pub fn sweep(configs: &[ExperimentConfig]) -> Vec<SweepRow> {
    configs
        .par_iter()
        .map(|config| {
            let label = config.label();
            let shape = config.shape.kind().to_string();
            let seed = config.seed;
            match run_pipeline(config) {
                Ok(bundle) => SweepRow {
                    label,
                    shape,
                    seed,
                    rate: bundle.decay.as_ref().filter(|f| !f.at_floor).map(|f| f.rate),
                    verdict: bundle.headline_verdict(),
                    min_margin: bundle.min_margin(),
                    error: None,
                },
                Err(e) => SweepRow {
                    label,
                    shape,
                    seed,
                    rate: None,
                    verdict: None,
                    min_margin: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "label,shape,seed,rate,verdict,min_margin,error")?;
    for row in rows {
        let rate = row.rate.map(|r| format!("{r:.6}")).unwrap_or_default();
        let verdict = row.verdict.map(|v| v.to_string()).unwrap_or_default();
        let margin = row
            .min_margin
            .map(|m| format!("{m:.6e}"))
            .unwrap_or_default();
        let error = row
            .error
            .as_deref()
            .map(|e| e.replace(',', ";"))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{rate},{verdict},{margin},{error}",
            row.label, row.shape, row.seed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("mcflab-pipeline-tests").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    fn fast_circle(name: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            ShapePreset::Circle {
                radius: 1.0,
                center: [0.0, 0.0],
            },
            tmp(name),
        );
        c.grid.flow_m = 96;
        c.grid.sphere_m = 48;
        c.flow.area_floor_frac = 1e-4;
        c
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut c = fast_circle("roundtrip");
        c.checks = CheckKind::all().to_vec();
        c.gauge.delta_t = 1e-5;
        c.seed = 42;
        let text = c.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn minimal_toml_fills_defaults() {
        let text = r#"
            output_dir = "out"

            [shape]
            kind = "ellipse"
            a = 1.2
            b = 0.8
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.seed, 0);
        assert_eq!(c.checks, default_checks());
        assert!(matches!(c.shape, ShapePreset::Ellipse { .. }));
    }

    #[test]
    fn bad_configs_are_rejected_with_context() {
        let mut c = fast_circle("bad");
        c.grid.sphere_m = 4;
        assert!(matches!(c.validate(), Err(Error::Config(_))));

        let mut c = fast_circle("bad2");
        c.shape = ShapePreset::Ellipse { a: 1.2, b: 0.8 };
        c.gauge.policy = GaugeMode::Exact;
        let err = run_pipeline(&c).unwrap_err();
        assert!(matches!(err, Error::Stage { ref stage, .. } if stage == "config"), "{err}");

        assert!(ExperimentConfig::from_toml_str("output_dir = 3").is_err());
    }

    #[test]
    fn circle_pipeline_is_rigid_and_leaves_complete_artifacts() {
        let mut config = fast_circle("circle");
        config.gauge.policy = GaugeMode::Exact;
        let bundle = run_pipeline(&config).unwrap();

        assert_eq!(bundle.headline_verdict(), Some(Verdict::Rigid));
        assert!(!bundle.failed());
        // every manifest entry exists and matches its checksum
        assert!(bundle.manifest.len() >= 6);
        for (rel, digest) in &bundle.manifest {
            let path = bundle.dir.join(rel);
            assert!(path.exists(), "missing {rel}");
            assert_eq!(&sha256_file(&path).unwrap(), digest, "checksum drift in {rel}");
        }
        // the summary lists one row per report
        let summary = std::fs::read_to_string(bundle.dir.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + bundle.reports.len());
        std::fs::remove_dir_all(&bundle.dir).ok();
    }

    #[test]
    fn same_seed_reruns_are_byte_identical() {
        let mut a = fast_circle("det-a");
        a.shape = ShapePreset::PerturbedCircle {
            radius: 1.0,
            amplitude: 0.05,
            max_mode: 6,
        };
        a.seed = 7;
        a.checks = vec![CheckKind::Certificate, CheckKind::Decay, CheckKind::QuadraticBound];
        let mut b = a.clone();
        b.output_dir = tmp("det-b");

        let ba = run_pipeline(&a).unwrap();
        let bb = run_pipeline(&b).unwrap();
        for rel in ba.manifest.keys() {
            if rel == "config.toml" {
                continue; // embeds the differing output folder
            }
            assert_eq!(
                ba.manifest[rel], bb.manifest[rel],
                "file {rel} differs between identical runs"
            );
        }
        std::fs::remove_dir_all(&ba.dir).ok();
        std::fs::remove_dir_all(&bb.dir).ok();
    }

    #[test]
    fn different_seeds_draw_different_shapes() {
        let mut a = fast_circle("seed-a");
        a.shape = ShapePreset::PerturbedCircle {
            radius: 1.0,
            amplitude: 0.05,
            max_mode: 6,
        };
        a.checks = vec![CheckKind::Decay];
        let mut b = a.clone();
        b.seed = 1;
        b.output_dir = tmp("seed-b");
        let ba = run_pipeline(&a).unwrap();
        let bb = run_pipeline(&b).unwrap();
        assert_ne!(ba.manifest["flow.jsonl"], bb.manifest["flow.jsonl"]);
        std::fs::remove_dir_all(&ba.dir).ok();
        std::fs::remove_dir_all(&bb.dir).ok();
    }

    #[test]
    fn sweep_keeps_order_and_records_failures_per_row() {
        let good = fast_circle("sweep-good");
        let mut bad = fast_circle("sweep-bad");
        bad.grid.sphere_m = 4; // fails validation inside the run
        let rows = sweep(&[good.clone(), bad]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].label, good.label());
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap_or("").contains("config"));

        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().contains("rigid"));
        std::fs::remove_dir_all(good.output_dir).ok();
    }

    #[test]
    fn empty_sweep_gives_empty_table() {
        let rows = sweep(&[]);
        assert!(rows.is_empty());
        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1);
    }

    #[test]
    fn seeded_variants_relocate_outputs() {
        let base = fast_circle("variants");
        let vs = seeded_variants(&base, 3..6);
        assert_eq!(vs.len(), 3);
        assert_eq!(vs[0].seed, 3);
        assert!(vs[2].output_dir.ends_with("seed-0005"));
        assert_eq!(vs[1].shape, base.shape);
    }
}
