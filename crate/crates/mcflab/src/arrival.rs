//! Arrival-time solver on a Cartesian grid.
//!
//! The arrival time t(x) of a convex domain is the instant the mean
//! curvature flow of the boundary sweeps past x; its level sets are the
//! flowing curves and it satisfies the degenerate elliptic equation
//! |grad t| div(grad t / |grad t|) = -1 with t = 0 on the boundary.  The
//! solver evolves a level set function by curvature speed,
//!
//!   phi_tau = (phi_xx phi_y^2 - 2 phi_x phi_y phi_xy + phi_yy phi_x^2)
//!             / (phi_x^2 + phi_y^2 + eps),
//!
//! from the signed distance of the domain and records, per node, the first
//! time phi changes sign, interpolated linearly within the step.  Periodic
//! reinitialization keeps phi close to a distance function so the stencil
//! stays conditioned.  The exact solution over a ball is kept alongside as
//! the oracle, and an annulus-regression helper measures how fast the
//! residual t - T + |x - x0|^2/2 vanishes at the extinction point.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::SupportFunction;

const EPS_GRAD: f64 = 1e-8;

/// Uniform node-centered grid, symmetric about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
}

impl Grid2 {
    pub fn new(nx: usize, ny: usize, dx: f64) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::invalid("grid needs at least 8 nodes per side"));
        }
        if !dx.is_finite() || dx <= 0.0 {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        Ok(Self { nx, ny, dx })
    }

    /// Square grid covering [-extent, extent] in both directions.
    pub fn square(n: usize, extent: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::invalid("grid needs at least 8 nodes per side"));
        }
        Self::new(n, n, 2.0 * extent / (n - 1) as f64)
    }

    /// Mirrored index pairs land on exactly negated coordinates.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.nx - 1) as f64) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - 0.5 * (self.ny - 1) as f64) * self.dx
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> [f64; 2] {
        [self.x(0), self.y(0)]
    }
}

/// Exact arrival time inside a shrinking ball in R^{n+1}:
/// t_B(x) = r^2/(2n) - |x - x0|^2/(2n).
pub fn ball_arrival_exact(x: [f64; 2], r: f64, x0: [f64; 2], n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::UnsupportedDimension { n });
    }
    let d2 = (x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2);
    if d2 > r * r * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain {
            dist: d2.sqrt(),
            radius: r,
        });
    }
    Ok((r * r - d2) / (2.0 * n as f64))
}

/// Signed distance to a smooth convex body given by its support function,
/// negative inside: the max over directions of x . u(theta) - h(theta),
/// sharpened by a parabolic pass through the discrete argmax.
pub fn signed_distance_convex(sf: &SupportFunction, grid: &Grid2) -> Vec<f64> {
    let m = sf.m();
    let h = sf.samples();
    let dirs: Vec<[f64; 2]> = sf
        .thetas()
        .iter()
        .map(|&t| {
            let (s, c) = t.sin_cos();
            [c, s]
        })
        .collect();
    let nx = grid.nx;
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        let y = grid.y(j);
        for (i, v) in row.iter_mut().enumerate() {
            let x = grid.x(i);
            let mut best = f64::NEG_INFINITY;
            let mut jb = 0;
            for (k, d) in dirs.iter().enumerate() {
                let val = x * d[0] + y * d[1] - h[k];
                if val > best {
                    best = val;
                    jb = k;
                }
            }
            let prev = x * dirs[(jb + m - 1) % m][0] + y * dirs[(jb + m - 1) % m][1]
                - h[(jb + m - 1) % m];
            let next = x * dirs[(jb + 1) % m][0] + y * dirs[(jb + 1) % m][1] - h[(jb + 1) % m];
            let denom = prev - 2.0 * best + next;
            *v = if denom < -1e-300 {
                best - (prev - next) * (prev - next) / (8.0 * denom)
            } else {
                best
            };
        }
    });
    out
}

#[derive(Debug, Clone, Copy)]
pub struct ArrivalControls {
    /// dtau = dtau_factor * dx^2; stability requires <= 1/4.
    pub dtau_factor: f64,
    /// Flow time between distance refreshes (50 steps at 64 cells across
    /// the unit disk).  Fixed in time, not in steps: a step-counted
    /// cadence accumulates a grid-independent front drift and the arrival
    /// times stop converging under refinement.  Infinite disables.
    pub reinit_interval: f64,
    pub reinit_iters: usize,
    pub max_steps: usize,
}

impl Default for ArrivalControls {
    fn default() -> Self {
        Self {
            dtau_factor: 0.25,
            reinit_interval: 0.016,
            reinit_iters: 5,
            max_steps: 2_000_000,
        }
    }
}

/// Arrival times on the grid; NaN marks nodes outside the domain.
#[derive(Debug, Clone)]
pub struct ArrivalField {
    pub grid: Grid2,
    pub values: Vec<f64>,
    pub t_hat: f64,
    pub x0_hat: [f64; 2],
    /// Times beyond this sit in the collar where the front spans < 2 dx.
    pub resolved_until: f64,
    pub warning: Option<String>,
}

impl ArrivalField {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Synthetic field from a closed form; None marks outside nodes.
    pub fn from_fn(grid: Grid2, f: impl Fn([f64; 2]) -> Option<f64>) -> Result<Self> {
        let mut values = vec![f64::NAN; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if let Some(t) = f([grid.x(i), grid.y(j)]) {
                    values[grid.idx(i, j)] = t;
                }
            }
        }
        let (t_hat, x0_hat) = fit_peak(&grid, &values)?;
        Ok(Self {
            grid,
            values,
            t_hat,
            x0_hat,
            resolved_until: t_hat,
            warning: None,
        })
    }

    /// CSV rows x,y,t for every defined node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,t")?;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let t = self.value(i, j);
                if t.is_finite() {
                    writeln!(w, "{},{},{}", self.grid.x(i), self.grid.y(j), t)?;
                }
            }
        }
        Ok(())
    }

    pub fn write_header_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Header {
            nx: usize,
            ny: usize,
            dx: f64,
            origin: [f64; 2],
            #[serde(rename = "T_hat")]
            t_hat: f64,
            x0_hat: [f64; 2],
            resolved_until: f64,
        }
        let h = Header {
            nx: self.grid.nx,
            ny: self.grid.ny,
            dx: self.grid.dx,
            origin: self.grid.origin(),
            t_hat: self.t_hat,
            x0_hat: self.x0_hat,
            resolved_until: self.resolved_until,
        };
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, &h)?;
        Ok(())
    }
}

/// March the level set by curvature speed from the signed distance phi0
/// and record per-node first crossing times.
pub fn solve_arrival(grid: &Grid2, phi0: &[f64], controls: &ArrivalControls) -> Result<ArrivalField> {
    if phi0.len() != grid.len() {
        return Err(Error::invalid("signed distance length does not match grid"));
    }
    if phi0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSamples);
    }
    if !(controls.dtau_factor > 0.0 && controls.dtau_factor <= 0.25) {
        return Err(Error::invalid("dtau_factor must lie in (0, 1/4]"));
    }
    if controls.reinit_interval.is_nan() || controls.reinit_interval <= 0.0 {
        return Err(Error::invalid("reinit_interval must be positive"));
    }
    let (nx, ny, dx) = (grid.nx, grid.ny, grid.dx);
    let dtau = controls.dtau_factor * dx * dx;
    let reinit_stride = if controls.reinit_interval.is_finite() {
        ((controls.reinit_interval / dtau).round() as usize).max(1)
    } else {
        usize::MAX
    };
    let mut phi = phi0.to_vec();
    let mut next = vec![0.0; phi.len()];
    let mut times = vec![f64::NAN; phi.len()];
    let mut remaining: usize = phi.iter().filter(|&&v| v < 0.0).count();
    if remaining == 0 {
        return Err(Error::invalid("domain has no interior nodes on this grid"));
    }
    let extent = 0.5 * (nx.max(ny) - 1) as f64 * dx;
    let tau_cap = 2.0 * extent * extent + 1.0;
    let mut tau = 0.0;
    let mut step = 0usize;
    let mut warning = None;
    let mut neg_mask = vec![false; phi.len()];

    while remaining > 0 {
        if step >= controls.max_steps || tau > tau_cap {
            warning = Some(format!(
                "stopped at tau = {tau:.4} with {remaining} nodes never crossed"
            ));
            break;
        }
        let crossings: usize = next
            .par_chunks_mut(nx)
            .zip(times.par_chunks_mut(nx))
            .enumerate()
            .map(|(j, (out, trow))| {
                step_row(&phi, nx, ny, j, dx, dtau, tau, out, trow)
            })
            .sum();
        remaining -= crossings;
        std::mem::swap(&mut phi, &mut next);
        tau += dtau;
        step += 1;

        if reinit_stride != usize::MAX
            && step % reinit_stride == 0
            && remaining > 0
            && controls.reinit_iters > 0
        {
            for (mask, (&p, t)) in neg_mask.iter_mut().zip(phi.iter().zip(&times)) {
                *mask = p < 0.0 && t.is_nan();
            }
            reinitialize(grid, &mut phi, &mut next, controls.reinit_iters);
            for idx in 0..phi.len() {
                if neg_mask[idx] && phi[idx] >= 0.0 {
                    times[idx] = tau;
                    remaining -= 1;
                }
            }
        }
    }

    let (t_hat, x0_hat) = fit_peak(grid, &times)?;
    let resolved_until = t_hat - 2.0 * dx * dx;
    Ok(ArrivalField {
        grid: *grid,
        values: times,
        t_hat,
        x0_hat,
        resolved_until,
        warning: warning.or(Some(format!(
            "front width fell below 2 dx for t > {resolved_until:.6}; collar values are unresolved"
        ))),
    })
}

/// One explicit step on row j: writes phi + dtau * speed into `out` and
/// records fresh sign changes in `trow`; returns the number of crossings.
#[allow(clippy::too_many_arguments)]
fn step_row(
    phi: &[f64],
    nx: usize,
    ny: usize,
    j: usize,
    dx: f64,
    dtau: f64,
    tau: f64,
    out: &mut [f64],
    trow: &mut [f64],
) -> usize {
    let jm = j.saturating_sub(1);
    let jp = (j + 1).min(ny - 1);
    let row = &phi[j * nx..(j + 1) * nx];
    let rowm = &phi[jm * nx..jm * nx + nx];
    let rowp = &phi[jp * nx..jp * nx + nx];
    let inv2dx = 0.5 / dx;
    let invdx2 = 1.0 / (dx * dx);
    let mut crossings = 0;
    for i in 0..nx {
        let im = i.saturating_sub(1);
        let ip = (i + 1).min(nx - 1);
        let c = row[i];
        let px = (row[ip] - row[im]) * inv2dx;
        let py = (rowp[i] - rowm[i]) * inv2dx;
        let pxx = (row[ip] - 2.0 * c + row[im]) * invdx2;
        let pyy = (rowp[i] - 2.0 * c + rowm[i]) * invdx2;
        let pxy = (rowp[ip] - rowp[im] - rowm[ip] + rowm[im]) * inv2dx * inv2dx;
        let num = pxx * py * py - 2.0 * px * py * pxy + pyy * px * px;
        let den = px * px + py * py + EPS_GRAD;
        let new = c + dtau * num / den;
        out[i] = new;
        if c < 0.0 && new >= 0.0 && trow[i].is_nan() {
            trow[i] = tau + dtau * c / (c - new);
            crossings += 1;
        }
    }
    crossings
}

/// A few iterations of the distance-restoring flow
/// phi_t = S(phi_0) (1 - |grad phi|) with Godunov upwinding.  Nodes whose
/// entry value changes sign against a neighbor instead relax onto their
/// subcell distance to the front, which keeps the zero level set pinned;
/// without that fix every call drifts the front by O(dx) and the arrival
/// times stop converging under refinement.
fn reinitialize(grid: &Grid2, phi: &mut Vec<f64>, scratch: &mut Vec<f64>, iters: usize) {
    let (nx, ny, dx) = (grid.nx, grid.ny, grid.dx);
    let phi0 = phi.clone();
    let s_field: Vec<f64> = phi0
        .iter()
        .map(|&v| v / (v * v + dx * dx).sqrt())
        .collect();
    // subcell target distance for front-adjacent nodes, NaN elsewhere
    let mut target = vec![f64::NAN; phi0.len()];
    for j in 0..ny {
        let jm = j.saturating_sub(1);
        let jp = (j + 1).min(ny - 1);
        for i in 0..nx {
            let im = i.saturating_sub(1);
            let ip = (i + 1).min(nx - 1);
            let p = phi0[j * nx + i];
            let near = p * phi0[j * nx + im] < 0.0
                || p * phi0[j * nx + ip] < 0.0
                || p * phi0[jm * nx + i] < 0.0
                || p * phi0[jp * nx + i] < 0.0;
            if near {
                let gx = (phi0[j * nx + ip] - phi0[j * nx + im]) / (2.0 * dx);
                let gy = (phi0[jp * nx + i] - phi0[jm * nx + i]) / (2.0 * dx);
                target[j * nx + i] = p / gx.hypot(gy).max(0.5);
            }
        }
    }
    let dt = 0.5 * dx;
    for _ in 0..iters {
        scratch
            .par_chunks_mut(nx)
            .enumerate()
            .for_each(|(j, out)| {
                let jm = j.saturating_sub(1);
                let jp = (j + 1).min(ny - 1);
                let row = &phi[j * nx..(j + 1) * nx];
                let rowm = &phi[jm * nx..jm * nx + nx];
                let rowp = &phi[jp * nx..jp * nx + nx];
                let srow = &s_field[j * nx..(j + 1) * nx];
                let trow = &target[j * nx..(j + 1) * nx];
                let inv = 1.0 / dx;
                for i in 0..nx {
                    if trow[i].is_finite() {
                        let sg = if trow[i] >= 0.0 { 1.0 } else { -1.0 };
                        out[i] = row[i] - dt * inv * (sg * row[i].abs() - trow[i]);
                        continue;
                    }
                    let im = i.saturating_sub(1);
                    let ip = (i + 1).min(nx - 1);
                    let a = (row[i] - row[im]) * inv;
                    let b = (row[ip] - row[i]) * inv;
                    let c = (row[i] - rowm[i]) * inv;
                    let d = (rowp[i] - row[i]) * inv;
                    let s = srow[i];
                    let g2 = if s > 0.0 {
                        a.max(0.0).powi(2).max(b.min(0.0).powi(2))
                            + c.max(0.0).powi(2).max(d.min(0.0).powi(2))
                    } else {
                        a.min(0.0).powi(2).max(b.max(0.0).powi(2))
                            + c.min(0.0).powi(2).max(d.max(0.0).powi(2))
                    };
                    out[i] = row[i] - dt * s * (g2.sqrt() - 1.0);
                }
            });
        std::mem::swap(phi, scratch);
    }
}

/// Quadratic fit through the 3x3 patch around the discrete argmax; falls
/// back to the raw node when the patch is incomplete or not concave.
fn fit_peak(grid: &Grid2, values: &[f64]) -> Result<(f64, [f64; 2])> {
    let mut best = f64::NEG_INFINITY;
    let mut bi = 0usize;
    let mut bj = 0usize;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let v = values[grid.idx(i, j)];
            if v.is_finite() && v > best {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::InsufficientData { need: 1, found: 0 });
    }
    let fallback = (best, [grid.x(bi), grid.y(bj)]);
    if bi == 0 || bj == 0 || bi + 1 >= grid.nx || bj + 1 >= grid.ny {
        return Ok(fallback);
    }
    let v = |di: isize, dj: isize| {
        values[grid.idx(
            (bi as isize + di) as usize,
            (bj as isize + dj) as usize,
        )]
    };
    let patch = [
        v(-1, -1),
        v(0, -1),
        v(1, -1),
        v(-1, 0),
        v(0, 0),
        v(1, 0),
        v(-1, 1),
        v(0, 1),
        v(1, 1),
    ];
    if patch.iter().any(|p| !p.is_finite()) {
        return Ok(fallback);
    }
    let gx = 0.5 * (v(1, 0) - v(-1, 0));
    let gy = 0.5 * (v(0, 1) - v(0, -1));
    let hxx = v(1, 0) - 2.0 * best + v(-1, 0);
    let hyy = v(0, 1) - 2.0 * best + v(0, -1);
    let hxy = 0.25 * (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1));
    let det = hxx * hyy - hxy * hxy;
    if !(det > 0.0 && hxx < 0.0) {
        return Ok(fallback);
    }
    let ox = (-(hyy * gx - hxy * gy) / det).clamp(-1.0, 1.0);
    let oy = (-(hxx * gy - hxy * gx) / det).clamp(-1.0, 1.0);
    let t_hat = best
        + gx * ox
        + gy * oy
        + 0.5 * (hxx * ox * ox + 2.0 * hxy * ox * oy + hyy * oy * oy);
    Ok((
        t_hat,
        [grid.x(bi) + ox * grid.dx, grid.y(bj) + oy * grid.dx],
    ))
}

// ---------------------------------------------------------------------------
// residual regression around the extinction point

#[derive(Debug, Clone, Copy)]
pub struct ResidualOptions {
    pub annuli: usize,
    pub subshells: usize,
    /// Innermost usable radius, in cells.
    pub min_cells: f64,
    /// Annuli whose median |R| falls below this are reported but excluded
    /// from pass/fail use: the solver cannot resolve them.
    pub resolved_floor: f64,
    /// Below this the residual counts as identically zero.
    pub fit_floor: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            annuli: 4,
            subshells: 8,
            min_cells: 3.0,
            resolved_floor: 6e-3,
            fit_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnulusFit {
    pub r_lo: f64,
    pub r_hi: f64,
    pub samples: usize,
    pub median_abs: f64,
    /// Log-log slope of |R| against radius across the sub-shells.
    pub exponent: Option<f64>,
    pub resolved: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub claimed_order: u32,
    pub annuli: Vec<AnnulusFit>,
    /// Slope across the resolved annuli's medians.
    pub global_exponent: Option<f64>,
    /// Residual sat at the numerical floor everywhere.
    pub floor_hit: bool,
}

impl ResidualReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r_lo,r_hi,samples,median_abs,exponent,resolved")?;
        for a in &self.annuli {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                a.r_lo,
                a.r_hi,
                a.samples,
                a.median_abs,
                a.exponent.map(|e| e.to_string()).unwrap_or_default(),
                a.resolved
            )?;
        }
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Regress the expansion residual R(x) = t(x) - T + |x - x0|^2/2 on
/// dyadic annuli around x0.  Each annulus is split into radial sub-shells
/// whose median |R| feeds a log-log fit, so angular sign changes of R do
/// not poison the exponent.
pub fn asymptotic_residual(
    field: &ArrivalField,
    t_ext: f64,
    x0: [f64; 2],
    claimed_order: u32,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    if claimed_order < 3 {
        return Err(Error::invalid("claimed vanishing order must be at least 3"));
    }
    if opts.subshells < 3 || opts.annuli == 0 {
        return Err(Error::invalid("need at least 3 sub-shells and 1 annulus"));
    }
    let grid = &field.grid;
    // limit to the largest disk around x0 inside both domain and grid
    let mut r_domain = f64::INFINITY;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !field.value(i, j).is_finite() {
                let d = (grid.x(i) - x0[0]).hypot(grid.y(j) - x0[1]);
                r_domain = r_domain.min(d);
            }
        }
    }
    let edge = (grid.x(grid.nx - 1) - x0[0].abs()).min(grid.y(grid.ny - 1) - x0[1].abs());
    let r_max = 0.92 * r_domain.min(edge);
    let r_floor = opts.min_cells * grid.dx;
    if r_max.is_nan() || r_floor.is_nan() || r_max <= r_floor {
        return Err(Error::InsufficientData { need: 1, found: 0 });
    }

    let mut annuli = Vec::new();
    let mut all_floor = true;
    for k in 0..opts.annuli {
        let hi = r_max * 0.5f64.powi(k as i32);
        let lo = 0.5 * hi;
        if lo < opts.min_cells * grid.dx {
            break;
        }
        let mut shells: Vec<Vec<f64>> = vec![Vec::new(); opts.subshells];
        let mut all_abs: Vec<f64> = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let t = field.value(i, j);
                if !t.is_finite() {
                    continue;
                }
                let r = (grid.x(i) - x0[0]).hypot(grid.y(j) - x0[1]);
                if r < lo || r >= hi {
                    continue;
                }
                let res = (t - t_ext + 0.5 * r * r).abs();
                let shell = (((r - lo) / (hi - lo) * opts.subshells as f64) as usize)
                    .min(opts.subshells - 1);
                shells[shell].push(res);
                all_abs.push(res);
            }
        }
        let samples = all_abs.len();
        if samples == 0 {
            break;
        }
        let med = median(&mut all_abs);
        if med > opts.fit_floor {
            all_floor = false;
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (si, shell) in shells.iter_mut().enumerate() {
            if shell.is_empty() {
                continue;
            }
            let m = median(shell);
            if m > opts.fit_floor {
                let r_mid = lo + (si as f64 + 0.5) / opts.subshells as f64 * (hi - lo);
                xs.push(r_mid.ln());
                ys.push(m.ln());
            }
        }
        let exponent = if xs.len() >= 3 {
            Some(slope(&xs, &ys))
        } else {
            None
        };
        annuli.push(AnnulusFit {
            r_lo: lo,
            r_hi: hi,
            samples,
            median_abs: med,
            exponent,
            resolved: med >= opts.resolved_floor,
        });
    }
    if annuli.is_empty() {
        return Err(Error::InsufficientData { need: 1, found: 0 });
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for a in &annuli {
        if a.resolved && a.median_abs > opts.fit_floor {
            xs.push((a.r_lo * a.r_hi).sqrt().ln());
            ys.push(a.median_abs.ln());
        }
    }
    let global_exponent = if xs.len() >= 2 {
        Some(slope(&xs, &ys))
    } else {
        None
    };
    Ok(ResidualReport {
        claimed_order,
        annuli,
        global_exponent,
        floor_hit: all_floor,
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
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
