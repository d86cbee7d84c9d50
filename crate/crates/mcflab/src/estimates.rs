//! Quantitative checks on graph trajectories.
//!
//! The rescaled radial graph rho = sqrt(2) + u evolves by
//!
//!   d_s u = L u + N(u),      L = Laplace-Beltrami + 1,
//!
//! where N collects everything beyond the linearization and vanishes to
//! second order at u = 0.  This module evaluates the geometric right-hand
//! side exactly (never by differencing snapshots), measures N against the
//! product bound ||N(u)||_r <= C ||u||_{r+1} ||u||_{r+2}, and checks the
//! integral inequalities that pin exponential decay rates to the spectrum
//! of L: a projected grow-back inequality, a smallness threshold with a
//! factor-2 sup bound, and the variation-of-constants identity.  The
//! endpoint is a certificate classifying each trajectory as rigid (graph
//! at the numerical floor), quantized (rate locked to an eigenvalue), or a
//! violation (decay outpacing every exponential with the graph above
//! floor), the last being the falsification alarm that must never fire.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rescale::GraphSnapshot;
use crate::spectral::{self, ModeSpectrum, SpectralCoeffs, SphereGrid};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Norms below this are indistinguishable from transform round-off.
pub const NORM_FLOOR: f64 = 1e-12;
/// Norms below this count as "graph is identically zero" for verdicts.
pub const RIGID_FLOOR: f64 = 1e-8;

// ---------------------------------------------------------------------------
// geometric right-hand side and nonlinear remainder

/// Full nonlinear speed of the radial graph under the rescaled flow,
/// sampled at the grid nodes:
///
///   d_s rho = (-kappa + rho^2 / (2 W)) * W / rho,
///   W = sqrt(rho^2 + rho_phi^2),
///   kappa = (rho^2 + 2 rho_phi^2 - rho rho_phiphi) / W^3.
pub fn rmcf_rhs(g: &GraphSnapshot) -> Result<Vec<f64>> {
    let d1 = g.coeffs.series().derivative();
    let d2 = d1.derivative();
    let m = g.grid.m();
    let rho_p = d1.synthesize(m)?;
    let rho_pp = d2.synthesize(m)?;
    let mut rhs = Vec::with_capacity(m);
    for j in 0..m {
        let rho = SQRT2 + g.u[j];
        if rho <= 0.0 {
            return Err(Error::GraphCondition {
                node: j,
                value: rho,
            });
        }
        let w2 = rho * rho + rho_p[j] * rho_p[j];
        let w = w2.sqrt();
        let kappa = (rho * rho + 2.0 * rho_p[j] * rho_p[j] - rho * rho_pp[j]) / (w2 * w);
        rhs.push((-kappa + rho * rho / (2.0 * w)) * w / rho);
    }
    Ok(rhs)
}

/// The remainder N(u) = rhs(u) - (L u) at one snapshot, with its norms.
#[derive(Debug, Clone)]
pub struct NonlinearRemainder {
    pub s: f64,
    pub coeffs: SpectralCoeffs,
    pub norms: BTreeMap<u32, f64>,
}

pub fn nonlinear_remainder(g: &GraphSnapshot) -> Result<NonlinearRemainder> {
    let rhs = spectral::analyze(&g.grid, &rmcf_rhs(g)?)?;
    let n = g.grid.n();
    let linear = g.coeffs.map_modes(|l, a, b| {
        let mult = 1.0 - spectral::nu(n, l as u32);
        (mult * a, mult * b)
    });
    let coeffs = rhs.lin_comb(1.0, &linear, -1.0);
    let norms = spectral::norm_table(&coeffs, 0..=6u32);
    Ok(NonlinearRemainder {
        s: g.s,
        coeffs,
        norms,
    })
}

// ---------------------------------------------------------------------------
// report plumbing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Rigid,
    Quantized,
    Violation,
}

impl Verdict {
    /// Nonzero process exit is warranted for these.
    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Fail | Verdict::Violation)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Rigid => "rigid",
            Verdict::Quantized => "quantized",
            Verdict::Violation => "violation",
        };
        f.write_str(s)
    }
}

/// One labelled slack value; nonnegative means the inequality held.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Margin {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: BTreeMap<String, String>,
    pub inputs_digest: String,
    pub margins: Vec<Margin>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub(crate) fn new(check: &str, digest: String) -> Self {
        Self {
            check: check.to_string(),
            params: BTreeMap::new(),
            inputs_digest: digest,
            margins: Vec::new(),
            verdict: Verdict::Inconclusive,
            notes: Vec::new(),
        }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.params.insert(key.to_string(), value.to_string());
    }

    pub(crate) fn push_margin(&mut self, label: impl Into<String>, value: f64) {
        self.margins.push(Margin {
            label: label.into(),
            value,
        });
    }

    pub fn min_margin(&self) -> f64 {
        self.margins
            .iter()
            .fold(f64::INFINITY, |m, x| m.min(x.value))
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

/// Content hash identifying the trajectory a report was computed from.
pub fn digest_graphs(snaps: &[GraphSnapshot]) -> String {
    let mut hasher = Sha256::new();
    for g in snaps {
        hasher.update(g.s.to_le_bytes());
        for l in 0..=g.coeffs.l_max() {
            hasher.update(g.coeffs.a(l).to_le_bytes());
            hasher.update(g.coeffs.b(l).to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

// ---------------------------------------------------------------------------
// quadratic bound

/// Gaussian band-limited sample with smoothly decaying mode variance,
/// rescaled so the H^2 norm lies in (h2_cap/5, h2_cap].
pub fn random_band_limited(
    n: u32,
    l_max: usize,
    h2_cap: f64,
    rng: &mut impl Rng,
) -> Result<SpectralCoeffs> {
    let mut c = SpectralCoeffs::zero(n, l_max)?;
    for l in 0..=l_max {
        let sigma = (1.0 + spectral::nu(n, l as u32)).powi(-2);
        let a: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma;
        let b: f64 = if l == 0 {
            0.0
        } else {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * sigma
        };
        c.set(l, a, b);
    }
    let norm = spectral::sobolev_norm(&c, 2);
    if norm == 0.0 {
        return Ok(c);
    }
    let target = h2_cap * rng.random_range(0.2..=1.0);
    Ok(c.map_modes(|_, a, b| (a * target / norm, b * target / norm)))
}

#[derive(Debug, Clone)]
pub struct QuadraticBoundReport {
    pub report: VerificationReport,
    /// Empirical sup of ||N(u)||_r / (||u||_{r+1} ||u||_{r+2}).
    pub c_sup: f64,
    /// `c_sup` doubled, the constant handed to downstream checks.
    pub c_hat: f64,
    pub excluded: usize,
}

/// Monte-Carlo estimate of the product-bound constant, plus the exact
/// norm chain ||u||_{r+1} ||u||_{r+2} <= ||u||_{r+2}^2 <= ||u||_r ||u||_{r+4}
/// on every sample.
pub fn check_quadratic_bound(
    grid: &SphereGrid,
    samples: &[SpectralCoeffs],
    r: u32,
) -> Result<QuadraticBoundReport> {
    if r < 2 {
        return Err(Error::invalid("product bound needs r >= 2 when n = 1"));
    }
    let mut report = VerificationReport::new("quadratic_bound", String::new());
    report.param("r", r);
    report.param("samples", samples.len());
    let mut c_sup = 0.0f64;
    let mut excluded = 0;
    let mut chain_min = f64::INFINITY;
    let mut hasher = Sha256::new();
    for (i, u) in samples.iter().enumerate() {
        let nr = spectral::sobolev_norm(u, r);
        if nr > 1.0 {
            excluded += 1;
            report.notes.push(format!(
                "sample {i} excluded: ||u||_{r} = {nr:.3e} > 1"
            ));
            continue;
        }
        for l in 0..=u.l_max() {
            hasher.update(u.a(l).to_le_bytes());
            hasher.update(u.b(l).to_le_bytes());
        }
        let g = GraphSnapshot::from_coeffs(0.0, *grid, u.clone())?;
        let rem = nonlinear_remainder(&g)?;
        let num = spectral::sobolev_norm(&rem.coeffs, r);
        let n1 = spectral::sobolev_norm(u, r + 1);
        let n2 = spectral::sobolev_norm(u, r + 2);
        let n4 = spectral::sobolev_norm(u, r + 4);
        if n1 * n2 > 0.0 {
            c_sup = c_sup.max(num / (n1 * n2));
        }
        // both steps of the chain, as slack relative to the larger side
        let s1 = n2 * n2 - n1 * n2;
        let s2 = nr * n4 - n2 * n2;
        let scale = (nr * n4).max(1e-300);
        chain_min = chain_min.min(s1 / scale).min(s2 / scale);
    }
    report.inputs_digest = hex::encode(hasher.finalize());
    if !chain_min.is_finite() {
        chain_min = 0.0;
    }
    report.param("c_sup", format!("{c_sup:.6e}"));
    report.param("c_hat", format!("{:.6e}", 2.0 * c_sup));
    report.push_margin("chain_slack_min", chain_min);
    report.push_margin(
        "ratio_finite",
        if c_sup.is_finite() { 1.0 } else { -1.0 },
    );
    report.verdict = if c_sup.is_finite() && chain_min >= -1e-12 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(QuadraticBoundReport {
        report,
        c_sup,
        c_hat: 2.0 * c_sup,
        excluded,
    })
}

/// Log-log slope of ||N(eps u)||_0 against eps; 2 for a clean quadratic.
pub fn remainder_scaling_order(
    grid: &SphereGrid,
    direction: &SpectralCoeffs,
    eps: &[f64],
) -> Result<f64> {
    if eps.len() < 2 {
        return Err(Error::InsufficientData {
            need: 2,
            found: eps.len(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &e in eps {
        let scaled = direction.map_modes(|_, a, b| (e * a, e * b));
        let g = GraphSnapshot::from_coeffs(0.0, *grid, scaled)?;
        let rem = nonlinear_remainder(&g)?;
        let norm = spectral::sobolev_norm(&rem.coeffs, 0);
        if norm > NORM_FLOOR {
            xs.push(e.ln());
            ys.push(norm.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            need: 2,
            found: xs.len(),
        });
    }
    Ok(least_squares_slope(&xs, &ys))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

// ---------------------------------------------------------------------------
// decay fits

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub r: u32,
    pub window: [f64; 2],
    /// Exponential rate: ||u(s)||_r ~ amplitude * e^{-rate * s}.
    pub rate: f64,
    pub amplitude: f64,
    /// Max log-deviation of the data from the fit over the window.
    pub residual: f64,
    pub n_points: usize,
    /// Fits with residual above 0.1 are unreliable.
    pub reliable: bool,
    /// Every norm in the window sat at the numerical floor.
    pub at_floor: bool,
}

/// Least-squares exponential fit of s -> ||u(s)||_r over a window.
pub fn decay_fit(snaps: &[GraphSnapshot], r: u32, window: [f64; 2]) -> Result<DecayFit> {
    decay_fit_floored(snaps, r, window, NORM_FLOOR, 20)
}

pub fn decay_fit_floored(
    snaps: &[GraphSnapshot],
    r: u32,
    window: [f64; 2],
    floor: f64,
    min_points: usize,
) -> Result<DecayFit> {
    fit_log_series(
        snaps.iter().map(|g| (g.s, spectral::sobolev_norm(&g.coeffs, r))),
        r,
        window,
        floor,
        min_points,
    )
}

/// Exponential fit of a single coefficient block's amplitude; the growth
/// diagnostic for mis-gauged runs (negative rate = growth).
pub fn mode_decay_fit(
    snaps: &[GraphSnapshot],
    l: usize,
    window: [f64; 2],
    floor: f64,
    min_points: usize,
) -> Result<DecayFit> {
    fit_log_series(
        snaps.iter().map(|g| (g.s, g.coeffs.block_sq(l).sqrt())),
        l as u32,
        window,
        floor,
        min_points,
    )
}

fn fit_log_series(
    series: impl Iterator<Item = (f64, f64)>,
    r: u32,
    window: [f64; 2],
    floor: f64,
    min_points: usize,
) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut in_window = 0usize;
    let mut above_floor = 0usize;
    for (s, value) in series {
        if s < window[0] || s > window[1] {
            continue;
        }
        in_window += 1;
        if value > floor {
            above_floor += 1;
            xs.push(s);
            ys.push(value.ln());
        }
    }
    if in_window < min_points {
        return Err(Error::InsufficientData {
            need: min_points,
            found: in_window,
        });
    }
    if above_floor == 0 {
        return Ok(DecayFit {
            r,
            window,
            rate: 0.0,
            amplitude: 0.0,
            residual: 0.0,
            n_points: in_window,
            reliable: false,
            at_floor: true,
        });
    }
    if above_floor < min_points {
        return Err(Error::InsufficientData {
            need: min_points,
            found: above_floor,
        });
    }
    let slope = least_squares_slope(&xs, &ys);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0f64, f64::max);
    Ok(DecayFit {
        r,
        window,
        rate: -slope,
        amplitude: intercept.exp(),
        residual,
        n_points: above_floor,
        reliable: residual <= 0.1,
        at_floor: false,
    })
}

/// Fits on overlapping windows marching across the trajectory; the rate
/// sequence is the raw material for the quantization verdict.
pub fn sliding_decay_rates(
    snaps: &[GraphSnapshot],
    r: u32,
    width: f64,
    stride: f64,
    floor: f64,
) -> Vec<DecayFit> {
    let mut out = Vec::new();
    if snaps.is_empty() {
        return out;
    }
    let s_lo = snaps.first().unwrap().s;
    let s_hi = snaps.last().unwrap().s;
    let mut a = s_lo;
    while a + width <= s_hi + 1e-9 {
        if let Ok(fit) = decay_fit_floored(snaps, r, [a, a + width], floor, 6) {
            if !fit.at_floor {
                out.push(fit);
            }
        }
        a += stride;
    }
    out
}

// ---------------------------------------------------------------------------
// integral inequalities

fn norms_floored(snaps: &[GraphSnapshot], r: u32, floor: f64) -> Vec<f64> {
    snaps
        .iter()
        .map(|g| {
            let v = spectral::sobolev_norm(&g.coeffs, r);
            if v > floor {
                v
            } else {
                0.0
            }
        })
        .collect()
}

fn index_at_or_after(snaps: &[GraphSnapshot], s: f64) -> Result<usize> {
    let i = snaps.partition_point(|g| g.s < s - 1e-9);
    if i >= snaps.len() {
        return Err(Error::invalid(format!(
            "no snapshot at or after s = {s}; trajectory ends at {}",
            snaps.last().map(|g| g.s).unwrap_or(f64::NAN)
        )));
    }
    Ok(i)
}

/// The projected grow-back inequality: for eigenvalue rank k,
///
///   e^{lambda_k (s - s0)} ||u(s)||_r
///     <= ||P_k u(s0)||_r + int_{s0}^inf e^{lambda_k (t - s0)} ||N(t)||_r dt,
///
/// where P_k drops the first k - 1 eigenmode blocks.  The integral is a
/// trapezoid over the simulated range plus an analytic tail using the
/// fitted decay rate; k with lambda_k >= twice the fitted rate have a
/// divergent tail majorant and come back inconclusive.
pub fn verify_key_inequality(
    snaps: &[GraphSnapshot],
    spectrum: &ModeSpectrum,
    k: u32,
    r: u32,
    s0: f64,
    c_hat: f64,
) -> Result<VerificationReport> {
    let rems: Vec<NonlinearRemainder> = snaps
        .iter()
        .map(nonlinear_remainder)
        .collect::<Result<_>>()?;
    verify_key_inequality_with(snaps, &rems, spectrum, k, r, s0, c_hat)
}

pub fn verify_key_inequality_with(
    snaps: &[GraphSnapshot],
    rems: &[NonlinearRemainder],
    spectrum: &ModeSpectrum,
    k: u32,
    r: u32,
    s0: f64,
    c_hat: f64,
) -> Result<VerificationReport> {
    if snaps.len() != rems.len() {
        return Err(Error::invalid("snapshot and remainder counts differ"));
    }
    let lambda_k = spectrum
        .lambda_at_rank(k)
        .ok_or_else(|| Error::invalid(format!("rank {k} beyond tabulated spectrum")))?;
    let mut report = VerificationReport::new("key_inequality", digest_graphs(snaps));
    report.param("k", k);
    report.param("mode_l", k - 1);
    report.param("lambda_k", format!("{lambda_k:.6}"));
    report.param("r", r);
    report.param("s0", format!("{s0:.4}"));
    report.param("C_hat", format!("{c_hat:.4e}"));

    let i0 = index_at_or_after(snaps, s0)?;
    let s0 = snaps[i0].s;
    let u_norms = norms_floored(snaps, r, RIGID_FLOOR);
    let n_norms: Vec<f64> = rems
        .iter()
        .map(|nr| {
            let v = nr.norms.get(&r).copied().unwrap_or(0.0);
            if v > RIGID_FLOOR * 1e-2 {
                v
            } else {
                0.0
            }
        })
        .collect();

    let zero_tail = u_norms[i0..].iter().all(|&v| v == 0.0);
    let fit = if zero_tail {
        None
    } else {
        Some(decay_fit_floored(
            snaps,
            r,
            [s0, snaps.last().unwrap().s],
            RIGID_FLOOR,
            10,
        )?)
    };
    let rate = fit.as_ref().map(|f| f.rate).unwrap_or(f64::INFINITY);
    if let Some(f) = &fit {
        report.param("fitted_rate", format!("{:.4}", f.rate));
        if !f.reliable {
            report
                .notes
                .push(format!("decay fit residual {:.3} above 0.1", f.residual));
        }
    }

    let admissible = rate.is_infinite()
        || (rate > 0.0
            && lambda_k < 2.0 * rate
            && (lambda_k < 0.0 || fit.as_ref().map(|f| f.reliable).unwrap_or(true)));
    if !admissible {
        report.verdict = Verdict::Inconclusive;
        report
            .notes
            .push("divergent majorant: lambda_k not below twice the decay rate".into());
        return Ok(report);
    }

    // trapezoid of e^{lambda_k (t - s0)} ||N(t)||_r over [s0, s_max]
    let mut integral = 0.0;
    for i in i0..snaps.len() - 1 {
        let f_a = (lambda_k * (snaps[i].s - s0)).exp() * n_norms[i];
        let f_b = (lambda_k * (snaps[i + 1].s - s0)).exp() * n_norms[i + 1];
        integral += 0.5 * (snaps[i + 1].s - snaps[i].s) * (f_a + f_b);
    }
    // analytic tail: beyond s_max, ||N|| <= C_hat ||u||_{r+1} ||u||_{r+2}
    // with both factors decaying at the fitted rate
    let last = snaps.len() - 1;
    let tail = if rate.is_finite() && u_norms[last] > 0.0 {
        let n1 = spectral::sobolev_norm(&snaps[last].coeffs, r + 1);
        let n2 = spectral::sobolev_norm(&snaps[last].coeffs, r + 2);
        c_hat * n1 * n2 * (lambda_k * (snaps[last].s - s0)).exp() / (2.0 * rate - lambda_k)
    } else {
        0.0
    };
    report.param("integral", format!("{integral:.6e}"));
    report.param("tail_bound", format!("{tail:.6e}"));

    let projected = spectral::project_tail(&snaps[i0].coeffs, k)?;
    let head = spectral::sobolev_norm(&projected, r);
    let head = if head > RIGID_FLOOR { head } else { 0.0 };
    let rhs = head + integral + tail;
    report.param("rhs", format!("{rhs:.6e}"));

    for i in i0..snaps.len() {
        let lhs = (lambda_k * (snaps[i].s - s0)).exp() * u_norms[i];
        report.push_margin(format!("s={:.3}", snaps[i].s), rhs - lhs);
    }
    report.verdict = if report.min_margin() >= -1e-6 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// Policy for choosing the base time of the smallness condition.
#[derive(Debug, Clone, Copy)]
pub enum SmallnessPolicy {
    /// Least nonnegative snapshot time satisfying the condition.
    Least,
    /// Least admissible snapshot time at or after the given s.
    From(f64),
}

/// Smallness threshold and factor-2 sup bound: find the least s0 with
///
///   C_hat * int_{s0}^inf ||u(t)||_{r+4} dt <= 1/2,
///
/// then check sup_{t >= s0} e^{lambda_k (t - s0)} ||u(t)||_r
/// <= 2 ||P_k u(s0)||_r for each admissible rank k.
pub fn verify_sup_bound(
    snaps: &[GraphSnapshot],
    spectrum: &ModeSpectrum,
    ks: &[u32],
    r: u32,
    policy: SmallnessPolicy,
    c_hat: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("sup_bound", digest_graphs(snaps));
    report.param("r", r);
    report.param("C_hat", format!("{c_hat:.4e}"));
    let s_min = match policy {
        SmallnessPolicy::Least => 0.0,
        SmallnessPolicy::From(s) => s,
    };

    let hi_norms = norms_floored(snaps, r + 4, RIGID_FLOOR);
    let u_norms = norms_floored(snaps, r, RIGID_FLOOR);
    let all_zero = u_norms.iter().all(|&v| v == 0.0);
    let fit = if all_zero {
        None
    } else {
        let s_last = snaps.last().unwrap().s;
        let s_first = snaps.first().unwrap().s;
        Some(decay_fit_floored(
            snaps,
            r,
            [s_first.max(s_last - 6.0), s_last],
            RIGID_FLOOR,
            10,
        )?)
    };
    let rate = fit.as_ref().map(|f| f.rate).unwrap_or(f64::INFINITY);
    if let Some(f) = &fit {
        report.param("fitted_rate", format!("{:.4}", f.rate));
        if f.rate <= 0.0 {
            report.verdict = Verdict::Inconclusive;
            report.notes.push("trajectory is not decaying".into());
            return Ok(report);
        }
    }

    // cumulative trapezoid of ||u||_{r+4} from each snapshot to the end
    let last = snaps.len() - 1;
    let mut integral_from = vec![0.0; snaps.len()];
    for i in (0..last).rev() {
        let seg = 0.5 * (snaps[i + 1].s - snaps[i].s) * (hi_norms[i] + hi_norms[i + 1]);
        integral_from[i] = integral_from[i + 1] + seg;
    }
    let tail = if rate.is_finite() && hi_norms[last] > 0.0 {
        hi_norms[last] / rate
    } else {
        0.0
    };

    let mut s0_idx = None;
    for i in 0..snaps.len() {
        if snaps[i].s < s_min {
            continue;
        }
        let total = c_hat * (integral_from[i] + tail);
        if total <= 0.5 {
            s0_idx = Some(i);
            report.param("smallness_value", format!("{total:.6e}"));
            break;
        }
    }
    let Some(i0) = s0_idx else {
        let achieved = c_hat * (integral_from[0] + tail);
        report.verdict = Verdict::Inconclusive;
        report.notes.push(format!(
            "smallness condition never met; best C*integral = {achieved:.3e}"
        ));
        return Ok(report);
    };
    let s0 = snaps[i0].s;
    report.param("s0", format!("{s0:.4}"));

    for &k in ks {
        let lambda_k = spectrum
            .lambda_at_rank(k)
            .ok_or_else(|| Error::invalid(format!("rank {k} beyond tabulated spectrum")))?;
        if !(rate.is_infinite() || lambda_k < 2.0 * rate) {
            report
                .notes
                .push(format!("k={k} skipped: divergent majorant"));
            continue;
        }
        let mut sup = 0.0f64;
        for i in i0..snaps.len() {
            sup = sup.max((lambda_k * (snaps[i].s - s0)).exp() * u_norms[i]);
        }
        let projected = spectral::project_tail(&snaps[i0].coeffs, k)?;
        let head = spectral::sobolev_norm(&projected, r);
        let head = if head > RIGID_FLOOR { head } else { 0.0 };
        report.push_margin(format!("k={k}"), 2.0 * head - sup);
        if sup > 0.0 && head > 0.0 {
            report.param(format!("sup_ratio_k{k}").as_str(), format!("{:.6}", sup / head));
        }
    }
    report.verdict = if report.margins.is_empty() {
        Verdict::Inconclusive
    } else if report.min_margin() >= -1e-9 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// int_0^1 e^{z q} (1 - q) dq and int_0^1 e^{z q} q dq, stable through z = 0.
fn exp_lin_weights(z: f64) -> (f64, f64) {
    if z.abs() < 1e-4 {
        let w1 = 0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0));
        let w2 = 0.5 + z * (1.0 / 3.0 + z * (1.0 / 8.0 + z / 30.0));
        (w1, w2)
    } else {
        let ez = z.exp();
        let z2 = z * z;
        ((ez - 1.0 - z) / z2, ((z - 1.0) * ez + 1.0) / z2)
    }
}

/// Variation-of-constants identity between two snapshot times:
///
///   u(s1) = e^{L (s1 - s)} u(s) + int_s^{s1} e^{L (s1 - t)} N(u(t)) dt,
///
/// evaluated mode by mode (e^{L d} multiplies block l by e^{-lambda_l d}),
/// with the integral done segment by segment against the exact
/// exponential weight.
pub fn verify_duhamel(
    snaps: &[GraphSnapshot],
    r: u32,
    s: f64,
    s1: f64,
    tol: f64,
) -> Result<VerificationReport> {
    let rems: Vec<NonlinearRemainder> = snaps
        .iter()
        .map(nonlinear_remainder)
        .collect::<Result<_>>()?;
    verify_duhamel_with(snaps, &rems, r, s, s1, tol)
}

pub fn verify_duhamel_with(
    snaps: &[GraphSnapshot],
    rems: &[NonlinearRemainder],
    r: u32,
    s: f64,
    s1: f64,
    tol: f64,
) -> Result<VerificationReport> {
    if snaps.len() != rems.len() {
        return Err(Error::invalid("snapshot and remainder counts differ"));
    }
    if s.is_nan() || s1.is_nan() || s1 <= s {
        return Err(Error::invalid("need s1 > s"));
    }
    let ia = index_at_or_after(snaps, s)?;
    let ib = index_at_or_after(snaps, s1)?;
    if ib <= ia + 1 {
        return Err(Error::InsufficientData {
            need: 3,
            found: ib.saturating_sub(ia) + 1,
        });
    }
    let sa = snaps[ia].s;
    let sb = snaps[ib].s;
    let n = snaps[ia].coeffs.n();
    let mut report = VerificationReport::new("duhamel", digest_graphs(&snaps[ia..=ib]));
    report.param("r", r);
    report.param("s", format!("{sa:.4}"));
    report.param("s1", format!("{sb:.4}"));
    report.param("delta_s_max", {
        let mut d = 0.0f64;
        for i in ia..ib {
            d = d.max(snaps[i + 1].s - snaps[i].s);
        }
        format!("{d:.4}")
    });

    // semigroup term
    let mut pred = snaps[ia].coeffs.map_modes(|l, a, b| {
        let lam = spectral::lambda(n, l as u32);
        let f = (-lam * (sb - sa)).exp();
        (f * a, f * b)
    });
    // product integration of e^{L (s1 - t)} N(t): N linear per segment
    // against the exact exponential weight.  A plain trapezoid of the
    // product loses a (lambda + 2)^2 factor in the error constant, which
    // the Sobolev weight then amplifies on the stiff modes.
    let l_max = pred.l_max();
    for i in ia..ib {
        let d = snaps[i + 1].s - snaps[i].s;
        let ta = snaps[i].s;
        let na = &rems[i].coeffs;
        let nb = &rems[i + 1].coeffs;
        let seg = na.map_modes(|l, a, b| {
            let lam = spectral::lambda(n, l as u32);
            let wa = (-lam * (sb - ta)).exp();
            let (w1, w2) = exp_lin_weights(lam * d);
            let c = d * wa;
            (
                c * (w1 * a + w2 * nb.a(l)),
                c * (w1 * b + w2 * nb.b(l)),
            )
        });
        pred = pred.lin_comb(1.0, &seg.truncated(l_max), 1.0);
    }

    let diff = pred.lin_comb(1.0, &snaps[ib].coeffs, -1.0);
    let mismatch = spectral::sobolev_norm(&diff, r);
    report.param("h_r_mismatch", format!("{mismatch:.6e}"));
    for l in 0..=l_max.min(8) {
        let d = (diff.a(l).powi(2) + diff.b(l).powi(2)).sqrt();
        report.push_margin(format!("mode_l{l}"), tol - d);
    }
    report.push_margin("h_r", tol - mismatch);
    report.verdict = if report.min_margin() >= 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

// ---------------------------------------------------------------------------
// certificate

#[derive(Debug, Clone, Copy)]
pub struct CertificateOptions {
    pub r: u32,
    /// Everything below this is "identically zero".
    pub floor_rigid: f64,
    /// Fits only use norms above this, keeping clear of round-off.
    pub floor_fit: f64,
    /// Relative tolerance for matching the rate to an eigenvalue.
    pub match_rel_tol: f64,
    pub window_width: f64,
    pub window_stride: f64,
    /// Consecutive sliding rates may rise by at most this and still count
    /// as "non-increasing".
    pub increase_tol: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            r: 2,
            floor_rigid: RIGID_FLOOR,
            floor_fit: 1e-7,
            match_rel_tol: 0.2,
            window_width: 1.5,
            window_stride: 0.5,
            increase_tol: 0.05,
        }
    }
}

/// Classify a gauge-fixed trajectory:
///
/// * rigid: the graph norm sits at the numerical floor throughout;
/// * quantized: the decay rate settles onto a positive eigenvalue of L,
///   with sliding-window rates non-increasing toward it;
/// * violation: sliding rates increase without bound while the graph is
///   above floor (decay faster than every exponential);
/// * inconclusive: fits too unreliable to decide.
pub fn unique_continuation_certificate(
    snaps: &[GraphSnapshot],
    spectrum: &ModeSpectrum,
    opts: &CertificateOptions,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("unique_continuation", digest_graphs(snaps));
    report.param("r", opts.r);
    report.param("floor_rigid", format!("{:.1e}", opts.floor_rigid));
    if snaps.is_empty() {
        return Err(Error::InsufficientData { need: 20, found: 0 });
    }

    let norms: Vec<f64> = snaps
        .iter()
        .map(|g| spectral::sobolev_norm(&g.coeffs, opts.r))
        .collect();
    let peak = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    report.param("peak_norm", format!("{peak:.4e}"));
    if peak <= opts.floor_rigid {
        report.push_margin("floor_gap", opts.floor_rigid - peak);
        report.verdict = Verdict::Rigid;
        return Ok(report);
    }

    let fits = sliding_decay_rates(
        snaps,
        opts.r,
        opts.window_width,
        opts.window_stride,
        opts.floor_fit,
    );
    if fits.len() < 3 {
        report.verdict = Verdict::Inconclusive;
        report
            .notes
            .push(format!("only {} usable rate windows", fits.len()));
        return Ok(report);
    }
    let rates: Vec<f64> = fits.iter().map(|f| f.rate).collect();
    for (f, rate) in fits.iter().zip(&rates) {
        report.push_margin(
            format!("rate@[{:.2},{:.2}]", f.window[0], f.window[1]),
            *rate,
        );
    }

    // strictly increasing rates with a large total climb: the alarm
    let climbing = rates
        .windows(2)
        .all(|w| w[1] - w[0] > opts.increase_tol);
    let climb_total = rates.last().unwrap() - rates.first().unwrap();
    if climbing && rates.len() >= 4 && climb_total > 0.75 {
        report.verdict = Verdict::Violation;
        report.notes.push(format!(
            "sliding rates climbed {climb_total:.2} across {} windows with the graph above floor",
            rates.len()
        ));
        return Ok(report);
    }

    let last_fit = fits.last().unwrap();
    if !last_fit.reliable {
        report.verdict = Verdict::Inconclusive;
        report.notes.push(format!(
            "terminal fit residual {:.3} above 0.1",
            last_fit.residual
        ));
        return Ok(report);
    }
    let final_rate = last_fit.rate;
    report.param("final_rate", format!("{final_rate:.4}"));

    // nearest positive eigenvalue
    let mut best: Option<(u32, f64)> = None;
    for l in 0..=32u32 {
        let lam = spectral::lambda(spectrum.n, l);
        if lam <= 0.0 {
            continue;
        }
        let gap = (final_rate - lam).abs();
        if best.map(|(_, g)| gap < g).unwrap_or(true) {
            best = Some((l, gap));
        }
    }
    let (l_match, gap) = best.unwrap();
    let lam = spectral::lambda(spectrum.n, l_match);
    report.param("matched_l", l_match);
    report.param("matched_lambda", format!("{lam:.4}"));
    report.push_margin("rate_match_slack", opts.match_rel_tol * lam - gap);

    let non_increasing = rates.windows(2).all(|w| w[1] - w[0] <= opts.increase_tol);
    if gap <= opts.match_rel_tol * lam && non_increasing {
        report.verdict = Verdict::Quantized;
    } else {
        report.verdict = Verdict::Inconclusive;
        if gap > opts.match_rel_tol * lam {
            report.notes.push(format!(
                "rate {final_rate:.3} not within {:.0}% of eigenvalue {lam:.3}",
                100.0 * opts.match_rel_tol
            ));
        }
        if !non_increasing {
            report
                .notes
                .push("sliding rates not monotone toward the eigenvalue".into());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_to_extinction, FlowControls};
    use crate::rescale::{build_graph_trajectory, Gauge};
    use crate::shapes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SphereGrid {
        SphereGrid::new(1, 96).unwrap()
    }

    fn snap_from(c: &SpectralCoeffs, s: f64) -> GraphSnapshot {
        GraphSnapshot::from_coeffs(s, grid(), c.clone()).unwrap()
    }

    fn mode_coeffs(l: usize, a: f64, b: f64) -> SpectralCoeffs {
        let mut c = SpectralCoeffs::zero(1, grid().max_l()).unwrap();
        c.set(l, a, b);
        c
    }

    /// u(s) = amp * e^{-rate s} cos(l theta) sampled on a uniform s-grid.
    fn eigen_trajectory(l: usize, amp: f64, rate: f64, s_grid: &[f64]) -> Vec<GraphSnapshot> {
        s_grid
            .iter()
            .map(|&s| snap_from(&mode_coeffs(l, amp * (-rate * s).exp(), 0.0), s))
            .collect()
    }

    fn s_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn rhs_vanishes_on_the_reference_circle() {
        let g = snap_from(&SpectralCoeffs::zero(1, grid().max_l()).unwrap(), 0.0);
        let rhs = rmcf_rhs(&g).unwrap();
        for v in rhs {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_constant_matches_the_radial_ode() {
        let c = 0.05;
        let g = snap_from(&mode_coeffs(0, c, 0.0), 0.0);
        let rhs = rmcf_rhs(&g).unwrap();
        let want = -1.0 / (SQRT2 + c) + (SQRT2 + c) / 2.0;
        for v in rhs {
            assert!((v - want).abs() < 1e-12, "got {v}, want {want}");
        }
    }

    #[test]
    fn remainder_vanishes_at_zero_and_for_constants_matches_closed_form() {
        let zero = snap_from(&SpectralCoeffs::zero(1, grid().max_l()).unwrap(), 0.0);
        let rem = nonlinear_remainder(&zero).unwrap();
        for l in 0..=rem.coeffs.l_max() {
            assert!(rem.coeffs.a(l).abs() < 1e-14 && rem.coeffs.b(l).abs() < 1e-14);
        }

        let c = 0.03;
        let rem = nonlinear_remainder(&snap_from(&mode_coeffs(0, c, 0.0), 0.0)).unwrap();
        let want = -1.0 / (SQRT2 + c) + (SQRT2 + c) / 2.0 - c;
        assert!((rem.coeffs.a(0) - want).abs() < 1e-12);
        for l in 1..=rem.coeffs.l_max() {
            assert!(rem.coeffs.a(l).abs() < 1e-13 && rem.coeffs.b(l).abs() < 1e-13);
        }
    }

    #[test]
    fn linearization_error_is_second_order() {
        let dir = mode_coeffs(2, 1.0, 0.0);
        let eps: Vec<f64> = (0..6).map(|i| 0.2 * 0.5f64.powi(i)).collect();
        let order = remainder_scaling_order(&grid(), &dir, &eps).unwrap();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn remainder_scales_quadratically_for_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let eps: Vec<f64> = (0..5).map(|i| 0.1 * 0.5f64.powi(i)).collect();
        for _ in 0..20 {
            let dir = random_band_limited(1, 12, 1.0, &mut rng).unwrap();
            let order = remainder_scaling_order(&grid(), &dir, &eps).unwrap();
            assert!(order >= 1.9, "order {order}");
        }
    }

    #[test]
    fn quadratic_bound_is_stable_across_seeds() {
        let gather = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<_> = (0..100)
                .map(|_| random_band_limited(1, 12, 0.1, &mut rng).unwrap())
                .collect();
            check_quadratic_bound(&grid(), &samples, 2).unwrap()
        };
        let a = gather(1);
        let b = gather(2);
        assert_eq!(a.report.verdict, Verdict::Pass);
        assert!(a.report.min_margin() >= -1e-12);
        let ratio = a.c_sup.max(b.c_sup) / a.c_sup.min(b.c_sup);
        assert!(ratio < 2.0, "seed instability: {} vs {}", a.c_sup, b.c_sup);
        assert_eq!(a.excluded, 0);
        assert!((a.c_hat - 2.0 * a.c_sup).abs() < 1e-15);
    }

    #[test]
    fn oversized_samples_are_excluded_not_silently_used() {
        let big = mode_coeffs(2, 5.0, 0.0);
        let out = check_quadratic_bound(&grid(), &[big], 2).unwrap();
        assert_eq!(out.excluded, 1);
        assert_eq!(out.c_sup, 0.0);
        assert_eq!(out.report.notes.len(), 1);
    }

    #[test]
    fn decay_fit_recovers_a_synthetic_rate() {
        let snaps = eigen_trajectory(2, 1e-2, 1.0, &s_grid(0.0, 3.0, 31));
        let fit = decay_fit(&snaps, 2, [0.0, 3.0]).unwrap();
        assert!((fit.rate - 1.0).abs() < 1e-6, "rate {}", fit.rate);
        assert!(fit.reliable && !fit.at_floor);
        assert!(fit.residual < 1e-6);
    }

    #[test]
    fn decay_fit_reports_the_floor_case() {
        let zeros: Vec<_> = s_grid(0.0, 2.0, 25)
            .into_iter()
            .map(|s| snap_from(&SpectralCoeffs::zero(1, grid().max_l()).unwrap(), s))
            .collect();
        let fit = decay_fit(&zeros, 2, [0.0, 2.0]).unwrap();
        assert!(fit.at_floor);
        assert!(decay_fit(&zeros[..5], 2, [0.0, 2.0]).is_err());
    }

    #[test]
    fn key_inequality_sharp_on_a_linear_eigenmode() {
        let spectrum = spectral::mode_spectrum(1, 16).unwrap();
        let snaps = eigen_trajectory(2, 1e-7, 1.0, &s_grid(0.0, 4.0, 81));
        for k in [1u32, 2, 3] {
            let rep = verify_key_inequality(&snaps, &spectrum, k, 2, 0.0, 2.0).unwrap();
            assert_eq!(rep.verdict, Verdict::Pass, "k={k}: {:?}", rep.notes);
            assert!(rep.min_margin() >= -1e-10, "k={k}: {}", rep.min_margin());
        }
        let rep = verify_key_inequality(&snaps, &spectrum, 4, 2, 0.0, 2.0).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert!(rep.notes.iter().any(|n| n.contains("divergent majorant")));
    }

    #[test]
    fn key_inequality_trivial_for_a_floor_trajectory() {
        let spectrum = spectral::mode_spectrum(1, 16).unwrap();
        let zeros: Vec<_> = s_grid(0.0, 3.0, 31)
            .into_iter()
            .map(|s| snap_from(&SpectralCoeffs::zero(1, grid().max_l()).unwrap(), s))
            .collect();
        for k in [1u32, 2, 3, 4] {
            let rep = verify_key_inequality(&zeros, &spectrum, k, 2, 0.0, 2.0).unwrap();
            assert_eq!(rep.verdict, Verdict::Pass);
            assert!(rep.min_margin() >= 0.0);
        }
    }

    #[test]
    fn sup_bound_factor_one_on_a_pure_eigenmode() {
        let spectrum = spectral::mode_spectrum(1, 16).unwrap();
        let snaps = eigen_trajectory(2, 1e-3, 1.0, &s_grid(0.0, 5.0, 101));
        let rep = verify_sup_bound(
            &snaps,
            &spectrum,
            &[1, 2, 3],
            2,
            SmallnessPolicy::Least,
            2.0,
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.notes);
        assert_eq!(rep.params.get("s0").unwrap(), "0.0000");
        let ratio: f64 = rep.params.get("sup_ratio_k3").unwrap().parse().unwrap();
        assert!((ratio - 1.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn duhamel_exact_for_the_linear_semigroup() {
        let snaps = eigen_trajectory(2, 1e-8, 1.0, &s_grid(0.0, 1.0, 21));
        let rep = verify_duhamel(&snaps, 2, 0.0, 1.0, 1e-10).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.params);
        let mismatch: f64 = rep.params.get("h_r_mismatch").unwrap().parse().unwrap();
        assert!(mismatch < 1e-12, "mismatch {mismatch:e}");
    }

    #[test]
    fn duhamel_sees_the_gauge_growth_factor() {
        // overestimated extinction time feeds the constant mode, which the
        // semigroup propagates with factor e^{s1 - s}
        let delta = 1e-6;
        let sf = shapes::circle(1.0, [0.0, 0.0], 96).unwrap();
        let traj = run_to_extinction(
            &sf,
            &FlowControls {
                area_floor_frac: 1e-4,
                ..FlowControls::default()
            },
        )
        .unwrap();
        let gauge = Gauge {
            t_hat: traj.t_hat + delta,
            x0: [0.0, 0.0],
        };
        let graphs = build_graph_trajectory(&traj, &grid(), &gauge).unwrap();
        let rep = verify_duhamel(&graphs.snapshots, 2, 1.0, 2.0, 1e-7).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.params);
        let ia = graphs.snapshots.iter().position(|g| g.s >= 1.0 - 1e-9).unwrap();
        let ib = graphs.snapshots.iter().position(|g| g.s >= 2.0 - 1e-9).unwrap();
        let (ga, gb) = (&graphs.snapshots[ia], &graphs.snapshots[ib]);
        let factor = gb.coeffs.a(0) / ga.coeffs.a(0);
        let want = (gb.s - ga.s).exp();
        assert!(
            (factor - want).abs() < 1e-3 * want,
            "factor {factor}, want {want}"
        );
    }

    #[test]
    fn certificate_rigid_quantized_and_violation() {
        let spectrum = spectral::mode_spectrum(1, 16).unwrap();
        let opts = CertificateOptions::default();

        let zeros: Vec<_> = s_grid(0.0, 8.0, 161)
            .into_iter()
            .map(|s| snap_from(&SpectralCoeffs::zero(1, grid().max_l()).unwrap(), s))
            .collect();
        let rep = unique_continuation_certificate(&zeros, &spectrum, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Rigid);

        let snaps = eigen_trajectory(2, 1e-2, 1.0, &s_grid(0.0, 8.0, 161));
        let rep = unique_continuation_certificate(&snaps, &spectrum, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Quantized, "{:?}", rep.notes);
        assert_eq!(rep.params.get("matched_l").unwrap(), "2");

        let gaussian: Vec<_> = s_grid(0.0, 5.0, 101)
            .into_iter()
            .map(|s| snap_from(&mode_coeffs(2, 1e-2 * (-0.5 * s * s).exp(), 0.0), s))
            .collect();
        let rep = unique_continuation_certificate(&gaussian, &spectrum, &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::Violation, "{:?}", rep.notes);
    }

    #[test]
    fn report_serializes_and_round_trips() {
        let snaps = eigen_trajectory(2, 1e-3, 1.0, &s_grid(0.0, 2.0, 25));
        let fitted = decay_fit(&snaps, 2, [0.0, 2.0]).unwrap();
        assert!(fitted.reliable);
        let spectrum = spectral::mode_spectrum(1, 8).unwrap();
        let rep = verify_key_inequality(&snaps, &spectrum, 3, 2, 0.0, 2.0).unwrap();
        let dir = std::env::temp_dir().join("mcflab-estimates-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.json");
        rep.write_json(&path).unwrap();
        let back: VerificationReport =
            serde_json::from_reader(std::fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(back.check, rep.check);
        assert_eq!(back.verdict, rep.verdict);
        assert_eq!(back.margins.len(), rep.margins.len());
        std::fs::remove_file(&path).ok();
    }
}
