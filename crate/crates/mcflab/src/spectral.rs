//! Spectral calculus on the round sphere of radius sqrt(2n).
//!
//! This is the reference geometry that rescaled flows converge to.  For the
//! curve case (n = 1) the sphere is the circle of radius sqrt(2) parametrized
//! by theta, with surface measure sqrt(2) dtheta and Laplace-Beltrami
//! operator (1/2) d^2/dtheta^2.  Modes cos(l theta), sin(l theta) satisfy
//!
//!   -Delta e_l = nu_l e_l,          nu_l = l (l + n - 1) / (2n),
//!
//! and the stability operator -Delta - 1 has eigenvalues lambda_l = nu_l - 1,
//! so lambda_0 = -1, lambda_1 = -1/2 and lambda_2 = 1/n.  Sobolev norms are
//! defined spectrally: ||u||_r^2 = sum_l (1 + nu_l)^r ||u_l||_{L^2}^2.
//!
//! Transforms are implemented for n = 1; the mode table is available for all
//! n.  Eigenvalues carry two index conventions: the mode degree l (from 0)
//! used everywhere in this crate, and the rank k = l + 1 (from 1) that orders
//! the distinct eigenvalues lambda_1 < lambda_2 < ...; `project_tail` takes
//! the rank.  Both conventions appear in reports, always labelled.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::{self, TrigSeries};

/// Equispaced sampling grid on the radius sqrt(2n) sphere.  `max_l` is the
/// default transform band, kept at m/4 so quadratic products of band-limited
/// data stay alias-free on the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereGrid {
    n: u32,
    m: usize,
}

impl SphereGrid {
    pub fn new(n: u32, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension n must be at least 1"));
        }
        if m < 8 {
            return Err(Error::invalid("grid needs at least 8 nodes"));
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Radius of the reference sphere; radius^2 = 2n exactly.
    pub fn radius(&self) -> f64 {
        (2.0 * self.n as f64).sqrt()
    }

    pub fn nodes(&self) -> Vec<f64> {
        trig::nodes(self.m)
    }

    /// Default band limit for transforms on this grid.
    pub fn max_l(&self) -> usize {
        self.m / 4
    }

    fn require_curve(&self) -> Result<()> {
        if self.n != 1 {
            return Err(Error::UnsupportedDimension { n: self.n });
        }
        Ok(())
    }
}

/// Eigenvalue of -Delta on the radius sqrt(2n) sphere at mode degree l,
/// computed as a single rational division so small cases stay exact.
pub fn nu(n: u32, l: u32) -> f64 {
    let num = l as u64 * (l as u64 + n as u64 - 1);
    num as f64 / (2 * n) as f64
}

/// Eigenvalue of the stability operator -Delta - 1 at mode degree l.
pub fn lambda(n: u32, l: u32) -> f64 {
    let num = l as i64 * (l as i64 + n as i64 - 1) - 2 * n as i64;
    num as f64 / (2 * n) as f64
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeEntry {
    pub l: u32,
    pub nu: f64,
    pub lambda: f64,
}

/// Table of stability eigenvalues, ordered by mode degree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub n: u32,
    pub entries: Vec<ModeEntry>,
}

impl ModeSpectrum {
    pub fn entry(&self, l: u32) -> Option<&ModeEntry> {
        self.entries.get(l as usize)
    }

    /// Rank of a mode among the distinct eigenvalues (1-based).
    pub fn rank_of_mode(l: u32) -> u32 {
        l + 1
    }

    /// Eigenvalue at 1-based rank k (so k = 1 is lambda = -1).
    pub fn lambda_at_rank(&self, k: u32) -> Option<f64> {
        if k == 0 {
            return None;
        }
        self.entry(k - 1).map(|e| e.lambda)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "l,nu,lambda")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.l, e.nu, e.lambda)?;
        }
        Ok(())
    }
}

/// Eigenvalue table for modes 0..=l_max.
pub fn mode_spectrum(n: u32, l_max: u32) -> Result<ModeSpectrum> {
    if n == 0 {
        return Err(Error::invalid("dimension n must be at least 1"));
    }
    let entries = (0..=l_max)
        .map(|l| ModeEntry {
            l,
            nu: nu(n, l),
            lambda: lambda(n, l),
        })
        .collect();
    Ok(ModeSpectrum { n, entries })
}

/// Spectral coefficients of a function on the reference sphere, stored as
/// one block per mode degree.  For n = 1 a block is a (cos, sin) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    n: u32,
    series: TrigSeries,
}

impl SpectralCoeffs {
    pub fn new(n: u32, series: TrigSeries) -> Result<Self> {
        if n != 1 {
            return Err(Error::UnsupportedDimension { n });
        }
        Ok(Self { n, series })
    }

    pub fn zero(n: u32, l_max: usize) -> Result<Self> {
        Self::new(n, TrigSeries::zero(l_max))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.series.l_max()
    }

    pub fn series(&self) -> &TrigSeries {
        &self.series
    }

    pub fn a(&self, l: usize) -> f64 {
        self.series.a(l)
    }

    pub fn b(&self, l: usize) -> f64 {
        self.series.b(l)
    }

    pub fn set(&mut self, l: usize, a: f64, b: f64) {
        self.series.set(l, a, b);
    }

    /// Squared L^2 norm of the degree-l block against the surface measure.
    pub fn block_sq(&self, l: usize) -> f64 {
        // circumference factor sqrt(2) on top of the plain dtheta blocks
        std::f64::consts::SQRT_2 * self.series.block_sq_plain(l)
    }

    pub fn map_modes(&self, f: impl FnMut(usize, f64, f64) -> (f64, f64)) -> Self {
        Self {
            n: self.n,
            series: self.series.map_modes(f),
        }
    }

    /// Blockwise linear combination ca * self + cb * other.
    pub fn lin_comb(&self, ca: f64, other: &Self, cb: f64) -> Self {
        let l = self.l_max().max(other.l_max());
        Self {
            n: self.n,
            series: TrigSeries::lin_comb(&self.series.truncated(l), ca, &other.series.truncated(l), cb),
        }
    }

    pub fn truncated(&self, l_max: usize) -> Self {
        Self {
            n: self.n,
            series: self.series.truncated(l_max),
        }
    }
}

/// Forward transform with the grid's default band (l_max = m/4).
pub fn analyze(grid: &SphereGrid, samples: &[f64]) -> Result<SpectralCoeffs> {
    analyze_banded(grid, samples, grid.max_l())
}

/// Forward transform keeping modes up to `l_max`; needs m >= 2 l_max + 1.
pub fn analyze_banded(grid: &SphereGrid, samples: &[f64], l_max: usize) -> Result<SpectralCoeffs> {
    grid.require_curve()?;
    if samples.len() != grid.m() {
        return Err(Error::invalid(format!(
            "expected {} samples, got {}",
            grid.m(),
            samples.len()
        )));
    }
    SpectralCoeffs::new(grid.n(), TrigSeries::analyze(samples, l_max)?)
}

/// Inverse transform onto the grid nodes.
pub fn synthesize(coeffs: &SpectralCoeffs, grid: &SphereGrid) -> Result<Vec<f64>> {
    grid.require_curve()?;
    if coeffs.n() != grid.n() {
        return Err(Error::UnsupportedDimension { n: coeffs.n() });
    }
    coeffs.series.synthesize(grid.m())
}

/// Apply the Laplace-Beltrami operator blockwise: block_l -> -nu_l block_l.
pub fn laplace_beltrami(coeffs: &SpectralCoeffs) -> SpectralCoeffs {
    let n = coeffs.n();
    coeffs.map_modes(|l, a, b| {
        let w = -nu(n, l as u32);
        (w * a, w * b)
    })
}

/// Spectral Sobolev norm ||u||_r = ( sum_l (1 + nu_l)^r ||u_l||^2 )^{1/2}.
pub fn sobolev_norm(coeffs: &SpectralCoeffs, r: u32) -> f64 {
    let n = coeffs.n();
    let mut acc = 0.0;
    for l in 0..=coeffs.l_max() {
        let w = (1.0 + nu(n, l as u32)).powi(r as i32);
        acc += w * coeffs.block_sq(l);
    }
    acc.sqrt()
}

/// Projection onto the eigenvalue tail of rank >= k, i.e. onto modes
/// l >= k - 1.  k = 1 is the identity; k = 2 removes the constant block.
pub fn project_tail(coeffs: &SpectralCoeffs, k: u32) -> Result<SpectralCoeffs> {
    if k == 0 {
        return Err(Error::invalid("tail rank k starts at 1"));
    }
    let cut = (k - 1) as usize;
    Ok(coeffs.map_modes(|l, a, b| if l < cut { (0.0, 0.0) } else { (a, b) }))
}

/// Wire format for coefficient files: one [l, c_cos, c_sin] triple per block.
#[derive(Debug, Serialize, Deserialize)]
pub struct CoeffsFile {
    pub n: u32,
    pub l_max: usize,
    pub blocks: Vec<(u32, f64, f64)>,
}

impl CoeffsFile {
    pub fn from_coeffs(c: &SpectralCoeffs) -> Self {
        let blocks = (0..=c.l_max())
            .map(|l| (l as u32, c.a(l), c.b(l)))
            .collect();
        Self {
            n: c.n(),
            l_max: c.l_max(),
            blocks,
        }
    }

    pub fn into_coeffs(&self) -> Result<SpectralCoeffs> {
        let mut out = SpectralCoeffs::zero(self.n, self.l_max)?;
        for &(l, a, b) in &self.blocks {
            if l as usize > self.l_max {
                return Err(Error::invalid(format!(
                    "block degree {l} exceeds declared l_max {}",
                    self.l_max
                )));
            }
            out.set(l as usize, a, b);
        }
        Ok(out)
    }
}

pub fn write_coeffs_json(path: &Path, c: &SpectralCoeffs) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, &CoeffsFile::from_coeffs(c))?;
    Ok(())
}

pub fn read_coeffs_json(path: &Path) -> Result<SpectralCoeffs> {
    let file = std::fs::File::open(path)?;
    let wire: CoeffsFile = serde_json::from_reader(file)?;
    wire.into_coeffs()
}

/// Sobolev norms at several indices, keyed by r.  BTreeMap keeps the
/// serialized key order stable.
pub fn norm_table(coeffs: &SpectralCoeffs, rs: impl IntoIterator<Item = u32>) -> BTreeMap<u32, f64> {
    rs.into_iter().map(|r| (r, sobolev_norm(coeffs, r))).collect()
}
