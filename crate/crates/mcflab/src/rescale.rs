//! Parabolic rescaling of a shrinking curve and extraction of the radial
//! graph over the reference circle.
//!
//! Given a gauge (T, x0), a snapshot at time tau maps to
//!
//!   y = (x - x0) / sqrt(T - tau),        s = -log(T - tau).
//!
//! For a correctly gauged convex flow the rescaled curves converge to the
//! circle of radius sqrt(2), so late snapshots are radial graphs
//! rho(phi) = sqrt(2) + u(phi).  The graph u is resampled onto equispaced
//! polar angles by solving phi(theta) = phi_i along the band-limited support
//! parametrization (Newton on the Gauss-map parameter), then band-limited to
//! the sphere grid's transform band.
//!
//! Gauge errors show up as specific growing modes: an offset in T feeds the
//! constant mode at rate 1, an offset in x0 feeds the degree-1 pair at rate
//! 1/2.  `build_graph_trajectory` therefore returns the degree-0/1 tracks
//! separately for diagnostics.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowTrajectory, SupportFunction};
use crate::spectral::{self, SpectralCoeffs, SphereGrid};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Extinction gauge used for rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub t_hat: f64,
    pub x0: [f64; 2],
}

/// A snapshot mapped into the rescaled frame, keeping the exact support
/// parametrization so resampling can evaluate the curve anywhere.
#[derive(Debug, Clone)]
pub struct RescaledBoundary {
    pub s: f64,
    pub gauge: Gauge,
    pub points: Vec<[f64; 2]>,
    source: SupportFunction,
    scale: f64,
}

/// Rescale one snapshot about the gauge; requires tau < T.
pub fn rescale_snapshot(sf: &SupportFunction, gauge: &Gauge) -> Result<RescaledBoundary> {
    let rem = gauge.t_hat - sf.tau();
    if rem.is_nan() || rem <= 0.0 {
        return Err(Error::GaugeTime {
            tau: sf.tau(),
            t_hat: gauge.t_hat,
        });
    }
    let scale = 1.0 / rem.sqrt();
    let points = sf
        .boundary_points()
        .into_iter()
        .map(|p| [(p[0] - gauge.x0[0]) * scale, (p[1] - gauge.x0[1]) * scale])
        .collect();
    Ok(RescaledBoundary {
        s: -rem.ln(),
        gauge: *gauge,
        points,
        source: sf.clone(),
        scale,
    })
}

/// Radial graph over the reference circle at one rescaled time.
#[derive(Debug, Clone)]
pub struct GraphSnapshot {
    pub s: f64,
    pub grid: SphereGrid,
    pub u: Vec<f64>,
    pub coeffs: SpectralCoeffs,
}

impl GraphSnapshot {
    /// Build from coefficients (synthetic trajectories, file reads); the
    /// nodal values are the synthesis of the coefficients by construction.
    pub fn from_coeffs(s: f64, grid: SphereGrid, coeffs: SpectralCoeffs) -> Result<Self> {
        let u = spectral::synthesize(&coeffs, &grid)?;
        if let Some((j, &v)) = worst_node(&u) {
            if SQRT2 + v <= 0.0 {
                return Err(Error::GraphCondition {
                    node: j,
                    value: SQRT2 + v,
                });
            }
        }
        Ok(Self { s, grid, u, coeffs })
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn worst_node(u: &[f64]) -> Option<(usize, &f64)> {
    u.iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
}

/// Resample the rescaled boundary as a radial graph on the sphere grid.
///
/// The boundary must be star-shaped about the gauge point.  The returned
/// coefficients are band-limited to the grid's transform band and the nodal
/// values are their exact synthesis.
pub fn extract_graph(rb: &RescaledBoundary, grid: &SphereGrid) -> Result<GraphSnapshot> {
    let src = &rb.source;
    let m_src = src.m();
    let th = src.thetas();
    let h = src.samples();
    let x0 = rb.gauge.x0;

    // star-shape check and polar angles at the source nodes
    let mut phi = Vec::with_capacity(m_src);
    for j in 0..m_src {
        let (sn, cs) = th[j].sin_cos();
        let radial = h[j] - (x0[0] * cs + x0[1] * sn);
        if radial <= 0.0 {
            return Err(Error::NotStarShaped {
                theta: th[j],
                margin: radial,
            });
        }
        let p = rb.points[j];
        phi.push(p[1].atan2(p[0]));
    }
    // unwrap to a strictly increasing angle sequence
    let mut unwrapped = vec![phi[0]; m_src];
    for j in 1..m_src {
        let mut d = phi[j] - phi[j - 1];
        while d <= -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        while d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        }
        if d <= 0.0 {
            return Err(Error::NotStarShaped {
                theta: th[j],
                margin: d,
            });
        }
        unwrapped[j] = unwrapped[j - 1] + d;
    }

    let series = src.series();
    let d1 = series.derivative();
    let d2 = d1.derivative();
    let dtheta = std::f64::consts::TAU / m_src as f64;

    // evaluate the rescaled offset d(theta) = scale * (x(theta) - x0)
    let eval_point = |theta: f64| -> ([f64; 2], f64, f64) {
        let (sn, cs) = theta.sin_cos();
        let hv = series.eval(theta);
        let hp = d1.eval(theta);
        let hpp = d2.eval(theta);
        let dx = (hv * cs - hp * sn - x0[0]) * rb.scale;
        let dy = (hv * sn + hp * cs - x0[1]) * rb.scale;
        let radial = (hv - (x0[0] * cs + x0[1] * sn)) * rb.scale;
        let rc = (hv + hpp) * rb.scale;
        // dphi/dtheta = radial * curvature_radius / |d|^2 in any common scale
        ([dx, dy], radial, rc)
    };

    let m_g = grid.m();
    let mut u = vec![0.0; m_g];
    for (i, ui) in u.iter_mut().enumerate() {
        let mut target = std::f64::consts::TAU * i as f64 / m_g as f64;
        // shift the target into the unwrapped range [phi_0, phi_0 + 2 pi)
        while target < unwrapped[0] {
            target += std::f64::consts::TAU;
        }
        while target >= unwrapped[0] + std::f64::consts::TAU {
            target -= std::f64::consts::TAU;
        }
        // bracket by binary search, then linear initial guess
        let jhi = unwrapped.partition_point(|&v| v < target);
        let mut theta = if jhi == 0 {
            th[0]
        } else if jhi >= m_src {
            let frac = (target - unwrapped[m_src - 1])
                / (unwrapped[0] + std::f64::consts::TAU - unwrapped[m_src - 1]);
            th[m_src - 1] + frac * dtheta
        } else {
            let frac = (target - unwrapped[jhi - 1]) / (unwrapped[jhi] - unwrapped[jhi - 1]);
            th[jhi - 1] + frac * dtheta
        };

        let (tsin, tcos) = target.sin_cos();
        let mut converged = false;
        for _ in 0..50 {
            let (d, radial, rc) = eval_point(theta);
            let r2 = d[0] * d[0] + d[1] * d[1];
            // angle of d relative to the target direction, branch-free
            let err = (tcos * d[1] - tsin * d[0]).atan2(tcos * d[0] + tsin * d[1]);
            if err.abs() < 1e-13 {
                *ui = r2.sqrt() - SQRT2;
                converged = true;
                break;
            }
            let slope = radial * rc / r2;
            if slope.is_nan() || slope <= 0.0 {
                return Err(Error::NotStarShaped {
                    theta,
                    margin: slope,
                });
            }
            // cap the update at one source cell to stay near the bracket
            theta -= (err / slope).clamp(-2.0 * dtheta, 2.0 * dtheta);
        }
        if !converged {
            return Err(Error::ResampleDiverged {
                phi: std::f64::consts::TAU * i as f64 / m_g as f64,
            });
        }
    }

    let coeffs = spectral::analyze(grid, &u)?;
    let mut snap = GraphSnapshot::from_coeffs(rb.s, *grid, coeffs)?;
    snap.s = rb.s;
    Ok(snap)
}

/// Decay rate of the graph implied by an arrival-time vanishing order N:
/// |u| = O(e^{-(N/2 - 1) s}), meaningful for N >= 3.
pub fn decay_exponent_map(n_order: u32) -> Result<f64> {
    if n_order < 3 {
        return Err(Error::invalid(
            "vanishing order must be at least 3 for a decaying graph",
        ));
    }
    Ok(n_order as f64 / 2.0 - 1.0)
}

/// Inverse of `decay_exponent_map`: vanishing order implied by a decay rate.
pub fn arrival_order_for_rate(rate: f64) -> f64 {
    2.0 * (rate + 1.0)
}

/// Degree-0 and degree-1 coefficient tracks, the gauge diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaugeTrack {
    pub s: f64,
    pub c0: f64,
    pub c1: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct GraphTrajectory {
    pub snapshots: Vec<GraphSnapshot>,
    pub gauge: Gauge,
    /// Snapshots before the first successful extraction.
    pub skipped_lead: usize,
    /// Snapshots at tau >= T_hat or after a graph breakdown (both happen
    /// under a wrong gauge).
    pub skipped_tail: usize,
    /// Why the trajectory ends early, when it does.
    pub truncation: Option<String>,
}

impl GraphTrajectory {
    pub fn gauge_tracks(&self) -> Vec<GaugeTrack> {
        self.snapshots
            .iter()
            .map(|g| GaugeTrack {
                s: g.s,
                c0: g.coeffs.a(0),
                c1: [g.coeffs.a(1), g.coeffs.b(1)],
            })
            .collect()
    }
}

/// Rescale and extract every usable snapshot of a flow trajectory.
///
/// Snapshots that fail the graph or star-shape condition before the first
/// success are skipped and counted.  A failure after the first success
/// truncates the trajectory with the reason recorded: under a mis-set
/// gauge the graph representation genuinely breaks down near extinction,
/// and the usable prefix is the experiment.  Snapshots at tau >= T_hat
/// are skipped and counted.
pub fn build_graph_trajectory(
    traj: &FlowTrajectory,
    grid: &SphereGrid,
    gauge: &Gauge,
) -> Result<GraphTrajectory> {
    let mut snapshots: Vec<GraphSnapshot> = Vec::new();
    let mut skipped_lead = 0;
    let mut skipped_tail = 0;
    let mut truncation = None;
    for (i, sf) in traj.snapshots.iter().enumerate() {
        if sf.tau() >= gauge.t_hat {
            skipped_tail += 1;
            continue;
        }
        let attempt = rescale_snapshot(sf, gauge).and_then(|rb| extract_graph(&rb, grid));
        match attempt {
            Ok(snap) => {
                if let Some(prev) = snapshots.last() {
                    debug_assert!(snap.s > prev.s, "rescaled times must increase");
                }
                snapshots.push(snap);
            }
            Err(e) => {
                if snapshots.is_empty() {
                    skipped_lead += 1;
                } else {
                    truncation = Some(format!("graph breakdown at tau = {:.6e}: {e}", sf.tau()));
                    skipped_tail += traj.snapshots.len() - i;
                    break;
                }
            }
        }
    }
    if snapshots.is_empty() {
        return Err(Error::InsufficientData { need: 1, found: 0 });
    }
    Ok(GraphTrajectory {
        snapshots,
        gauge: *gauge,
        skipped_lead,
        skipped_tail,
        truncation,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphHeader {
    n: u32,
    m: usize,
    #[serde(rename = "T_hat")]
    t_hat: f64,
    x0_hat: [f64; 2],
    skipped_lead: usize,
    skipped_tail: usize,
    #[serde(default)]
    truncation: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    s: f64,
    l_max: usize,
    blocks: Vec<(u32, f64, f64)>,
    sup_norm: f64,
    h_norms: std::collections::BTreeMap<u32, f64>,
}

impl GraphTrajectory {
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let first = &self.snapshots[0];
        let header = GraphHeader {
            n: first.grid.n(),
            m: first.grid.m(),
            t_hat: self.gauge.t_hat,
            x0_hat: self.gauge.x0,
            skipped_lead: self.skipped_lead,
            skipped_tail: self.skipped_tail,
            truncation: self.truncation.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for g in &self.snapshots {
            let rec = GraphRecord {
                s: g.s,
                l_max: g.coeffs.l_max(),
                blocks: (0..=g.coeffs.l_max())
                    .map(|l| (l as u32, g.coeffs.a(l), g.coeffs.b(l)))
                    .collect(),
                sup_norm: g.sup_norm(),
                h_norms: spectral::norm_table(&g.coeffs, 0..=6u32),
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::invalid("graph trajectory file is empty"))??;
        let header: GraphHeader = serde_json::from_str(&header_line)?;
        let grid = SphereGrid::new(header.n, header.m)?;
        let mut snapshots = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: GraphRecord = serde_json::from_str(&line)?;
            let mut coeffs = SpectralCoeffs::zero(header.n, rec.l_max)?;
            for (l, a, b) in rec.blocks {
                coeffs.set(l as usize, a, b);
            }
            snapshots.push(GraphSnapshot::from_coeffs(rec.s, grid, coeffs)?);
        }
        if snapshots.is_empty() {
            return Err(Error::InsufficientData { need: 1, found: 0 });
        }
        Ok(Self {
            snapshots,
            gauge: Gauge {
                t_hat: header.t_hat,
                x0: header.x0_hat,
            },
            skipped_lead: header.skipped_lead,
            skipped_tail: header.skipped_tail,
            truncation: header.truncation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_to_extinction, FlowControls};
    use crate::shapes;

    fn grid96() -> SphereGrid {
        SphereGrid::new(1, 96).unwrap()
    }

    fn fast_controls() -> FlowControls {
        FlowControls {
            area_floor_frac: 1e-4,
            ..FlowControls::default()
        }
    }

    #[test]
    fn exact_gauge_circle_rescales_to_reference() {
        let sf = shapes::circle(1.0, [0.0, 0.0], 96).unwrap();
        let traj = run_to_extinction(&sf, &fast_controls()).unwrap();
        let gauge = Gauge {
            t_hat: traj.t_hat,
            x0: traj.x0_hat,
        };
        let graphs = build_graph_trajectory(&traj, &grid96(), &gauge).unwrap();
        assert_eq!(graphs.skipped_lead, 0);
        for g in &graphs.snapshots {
            assert!(g.sup_norm() < 1e-9, "s = {}, sup = {:e}", g.s, g.sup_norm());
        }
        for p in rescale_snapshot(&traj.snapshots[3], &gauge)
            .unwrap()
            .points
        {
            assert!((p[0].hypot(p[1]) - SQRT2).abs() < 1e-9);
        }
    }

    #[test]
    fn inflated_circle_gives_constant_graph() {
        let eps = 1e-3;
        let sf = shapes::circle(SQRT2 * (1.0 + eps), [0.0, 0.0], 96).unwrap();
        let gauge = Gauge {
            t_hat: 1.0,
            x0: [0.0, 0.0],
        };
        let rb = rescale_snapshot(&sf, &gauge).unwrap();
        assert_eq!(rb.s, 0.0);
        let g = extract_graph(&rb, &grid96()).unwrap();
        assert!((g.coeffs.a(0) - SQRT2 * eps).abs() < 1e-12);
        for l in 1..=g.coeffs.l_max() {
            assert!(g.coeffs.a(l).abs() < 1e-12 && g.coeffs.b(l).abs() < 1e-12);
        }
    }

    #[test]
    fn extraction_is_translation_invariant() {
        let sf = shapes::ellipse(1.2, 0.8, 96).unwrap();
        let v = [0.4, -0.15];
        let g0 = extract_graph(
            &rescale_snapshot(&sf, &Gauge { t_hat: 0.5, x0: [0.0, 0.0] }).unwrap(),
            &grid96(),
        )
        .unwrap();
        let g1 = extract_graph(
            &rescale_snapshot(&sf.translated(v), &Gauge { t_hat: 0.5, x0: v }).unwrap(),
            &grid96(),
        )
        .unwrap();
        for (a, b) in g0.u.iter().zip(&g1.u) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn overestimated_t_feeds_the_constant_mode() {
        // closed form for the circle: u(s) = sqrt(2) (sqrt(1 - delta e^s) - 1)
        let delta = 1e-3;
        let sf = shapes::circle(1.0, [0.0, 0.0], 96).unwrap();
        let traj = run_to_extinction(&sf, &fast_controls()).unwrap();
        let gauge = Gauge {
            t_hat: traj.t_hat + delta,
            x0: [0.0, 0.0],
        };
        let graphs = build_graph_trajectory(&traj, &grid96(), &gauge).unwrap();
        for g in &graphs.snapshots {
            let want = SQRT2 * ((1.0 - delta * g.s.exp()).sqrt() - 1.0);
            assert!(
                (g.coeffs.a(0) - want).abs() < 1e-8 * want.abs().max(1.0),
                "s = {}, got {}, want {}",
                g.s,
                g.coeffs.a(0),
                want
            );
        }
    }

    #[test]
    fn offset_x0_feeds_the_degree_one_mode() {
        let delta = 1e-4;
        let sf = shapes::circle(1.0, [0.0, 0.0], 96).unwrap();
        let traj = run_to_extinction(&sf, &fast_controls()).unwrap();
        let gauge = Gauge {
            t_hat: traj.t_hat,
            x0: [delta, 0.0],
        };
        let graphs = build_graph_trajectory(&traj, &grid96(), &gauge).unwrap();
        for t in graphs.gauge_tracks() {
            if t.s < 2.0 {
                continue;
            }
            let want = -delta * (0.5 * t.s).exp();
            assert!(
                (t.c1[0] - want).abs() < 0.01 * want.abs(),
                "s = {}, got {}, want {}",
                t.s,
                t.c1[0],
                want
            );
            assert!(t.c1[1].abs() < 1e-9);
        }
    }

    #[test]
    fn ellipse_settles_near_the_reference_circle() {
        let sf = shapes::ellipse(1.2, 1.0 / 1.2, 128).unwrap();
        let traj = run_to_extinction(&sf, &fast_controls()).unwrap();
        let gauge = Gauge {
            t_hat: traj.t_hat,
            x0: [0.0, 0.0],
        };
        let near_six = traj
            .snapshots
            .iter()
            .min_by(|a, b| {
                let sa = (-(gauge.t_hat - a.tau()).ln() - 6.0).abs();
                let sb = (-(gauge.t_hat - b.tau()).ln() - 6.0).abs();
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap();
        let rb = rescale_snapshot(near_six, &gauge).unwrap();
        let worst = rb
            .points
            .iter()
            .map(|p| (p[0].hypot(p[1]) - SQRT2).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-2, "Hausdorff gap {worst:.3e}");

        // degree-2 pair dominates the settled graph
        let grid = SphereGrid::new(1, 128).unwrap();
        let g = extract_graph(&rb, &grid).unwrap();
        let l2 = g.coeffs.block_sq(2).sqrt();
        let total = spectral::sobolev_norm(&g.coeffs, 0);
        assert!(l2 / total > 0.9, "l2 fraction {}", l2 / total);
    }

    #[test]
    fn exponent_map_round_trip() {
        assert_eq!(decay_exponent_map(3).unwrap(), 0.5);
        assert_eq!(decay_exponent_map(4).unwrap(), 1.0);
        assert!(decay_exponent_map(2).is_err());
        assert_eq!(arrival_order_for_rate(1.0), 4.0);
        assert_eq!(arrival_order_for_rate(0.5), 3.0);
    }

    #[test]
    fn graph_condition_and_star_shape_errors() {
        let grid = grid96();
        let mut deep = SpectralCoeffs::zero(1, grid.max_l()).unwrap();
        deep.set(0, -2.0, 0.0);
        assert!(matches!(
            GraphSnapshot::from_coeffs(0.0, grid, deep),
            Err(Error::GraphCondition { .. })
        ));

        let sf = shapes::circle(1.0, [0.0, 0.0], 96).unwrap();
        let rb = rescale_snapshot(&sf, &Gauge { t_hat: 0.5, x0: [1.5, 0.0] }).unwrap();
        assert!(matches!(
            extract_graph(&rb, &grid),
            Err(Error::NotStarShaped { .. })
        ));

        assert!(matches!(
            rescale_snapshot(&sf, &Gauge { t_hat: -0.1, x0: [0.0, 0.0] }),
            Err(Error::GaugeTime { .. })
        ));
    }

    #[test]
    fn graph_file_round_trip() {
        let sf = shapes::ellipse(1.2, 0.9, 96).unwrap();
        let traj = run_to_extinction(
            &sf,
            &FlowControls {
                area_floor_frac: 1e-3,
                ..FlowControls::default()
            },
        )
        .unwrap();
        let gauge = Gauge {
            t_hat: traj.t_hat,
            x0: traj.x0_hat,
        };
        let graphs = build_graph_trajectory(&traj, &grid96(), &gauge).unwrap();
        let dir = std::env::temp_dir().join("mcflab-rescale-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("graphs.jsonl");
        graphs.write_jsonl(&path).unwrap();
        let back = GraphTrajectory::read_jsonl(&path).unwrap();
        assert_eq!(back.snapshots.len(), graphs.snapshots.len());
        for (a, b) in back.snapshots.iter().zip(&graphs.snapshots) {
            assert_eq!(a.s, b.s);
            assert_eq!(a.coeffs, b.coeffs);
        }
        std::fs::remove_file(&path).ok();
    }
}
