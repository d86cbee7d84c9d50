//! Real trigonometric series on the periodic interval [0, 2pi).
//!
//! A series is stored unpacked,
//!
//!   f(theta) = c[0] + sum_{l=1}^{L} ( c[l] cos(l theta) + s[l] sin(l theta) ),
//!
//! so differentiation, truncation and mode surgery are plain coefficient
//! operations.  Transforms to and from m equispaced nodes theta_j = 2 pi j / m
//! go through an FFT; the forward transform requires m >= 2 l_max + 1 so the
//! requested band is alias-free for band-limited input.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan_forward(m: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m))
}

fn plan_inverse(m: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(m))
}

/// Equispaced angular nodes theta_j = 2 pi j / m.
pub fn nodes(m: usize) -> Vec<f64> {
    let step = std::f64::consts::TAU / m as f64;
    (0..m).map(|j| j as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    cos: Vec<f64>,
    sin: Vec<f64>, // sin[0] is structurally zero
}

impl TrigSeries {
    pub fn zero(l_max: usize) -> Self {
        Self {
            cos: vec![0.0; l_max + 1],
            sin: vec![0.0; l_max + 1],
        }
    }

    pub fn constant(c: f64, l_max: usize) -> Self {
        let mut s = Self::zero(l_max);
        s.cos[0] = c;
        s
    }

    /// Build from unpacked coefficient vectors; `sin[0]` must be zero.
    pub fn from_coeffs(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if cos.len() != sin.len() || cos.is_empty() {
            return Err(Error::invalid("coefficient vectors must have equal nonzero length"));
        }
        if sin[0] != 0.0 {
            return Err(Error::invalid("sin coefficient at l = 0 must be zero"));
        }
        if cos.iter().chain(sin.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSamples);
        }
        Ok(Self { cos, sin })
    }

    pub fn l_max(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn a(&self, l: usize) -> f64 {
        self.cos.get(l).copied().unwrap_or(0.0)
    }

    pub fn b(&self, l: usize) -> f64 {
        self.sin.get(l).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, l: usize, a: f64, b: f64) {
        self.cos[l] = a;
        if l > 0 {
            self.sin[l] = b;
        }
    }

    /// Forward transform of nodal samples, keeping modes up to `l_max`.
    pub fn analyze(samples: &[f64], l_max: usize) -> Result<Self> {
        let m = samples.len();
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSamples);
        }
        if m < 2 * l_max + 1 {
            return Err(Error::Aliasing { l_max, m });
        }
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        plan_forward(m).process(&mut buf);
        let scale = 1.0 / m as f64;
        let mut out = Self::zero(l_max);
        out.cos[0] = buf[0].re * scale;
        for (l, c) in buf.iter().enumerate().skip(1).take(l_max) {
            out.cos[l] = 2.0 * c.re * scale;
            out.sin[l] = -2.0 * c.im * scale;
        }
        Ok(out)
    }

    /// Inverse transform onto m equispaced nodes.
    pub fn synthesize(&self, m: usize) -> Result<Vec<f64>> {
        let l_max = self.l_max();
        if m < 2 * l_max + 1 {
            return Err(Error::Aliasing { l_max, m });
        }
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        buf[0] = Complex::new(self.cos[0], 0.0);
        for l in 1..=l_max {
            let half = Complex::new(0.5 * self.cos[l], -0.5 * self.sin[l]);
            buf[l] = half;
            buf[m - l] = half.conj();
        }
        plan_inverse(m).process(&mut buf);
        Ok(buf.into_iter().map(|z| z.re).collect())
    }

    /// Evaluate at an arbitrary angle by a sin/cos recurrence.
    pub fn eval(&self, theta: f64) -> f64 {
        let (s1, c1) = theta.sin_cos();
        let mut c = 1.0;
        let mut s = 0.0;
        let mut acc = self.cos[0];
        for l in 1..=self.l_max() {
            let cn = c * c1 - s * s1;
            let sn = s * c1 + c * s1;
            c = cn;
            s = sn;
            acc += self.cos[l] * c + self.sin[l] * s;
        }
        acc
    }

    /// d/dtheta in coefficient space: (a_l, b_l) -> (l b_l, -l a_l).
    pub fn derivative(&self) -> Self {
        let l_max = self.l_max();
        let mut out = Self::zero(l_max);
        for l in 1..=l_max {
            let lf = l as f64;
            out.cos[l] = lf * self.sin[l];
            out.sin[l] = -lf * self.cos[l];
        }
        out
    }

    pub fn second_derivative(&self) -> Self {
        let l_max = self.l_max();
        let mut out = Self::zero(l_max);
        for l in 1..=l_max {
            let w = -((l * l) as f64);
            out.cos[l] = w * self.cos[l];
            out.sin[l] = w * self.sin[l];
        }
        out
    }

    /// Copy with modes above `l_max` dropped (or zero-padded above the old band).
    pub fn truncated(&self, l_max: usize) -> Self {
        let mut out = Self::zero(l_max);
        let keep = l_max.min(self.l_max());
        out.cos[..=keep].copy_from_slice(&self.cos[..=keep]);
        out.sin[..=keep].copy_from_slice(&self.sin[..=keep]);
        out
    }

    /// Rewrite each mode through `f(l, a_l, b_l) -> (a_l', b_l')`.
    pub fn map_modes(&self, mut f: impl FnMut(usize, f64, f64) -> (f64, f64)) -> Self {
        let mut out = self.clone();
        for l in 0..=self.l_max() {
            let (a, b) = f(l, self.cos[l], self.sin[l]);
            out.cos[l] = a;
            out.sin[l] = if l == 0 { 0.0 } else { b };
        }
        out
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.cos.iter_mut().chain(self.sin.iter_mut()) {
            *v *= c;
        }
    }

    /// self += c * other; the bands must agree.
    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        assert_eq!(self.l_max(), other.l_max(), "band mismatch");
        for (v, w) in self.cos.iter_mut().zip(&other.cos) {
            *v += c * w;
        }
        for (v, w) in self.sin.iter_mut().zip(&other.sin) {
            *v += c * w;
        }
    }

    pub fn lin_comb(a: &Self, ca: f64, b: &Self, cb: f64) -> Self {
        let mut out = a.clone();
        out.scale(ca);
        out.add_scaled(b, cb);
        out
    }

    /// Mean-square of the series against the plain measure dtheta / (2 pi)
    /// would be this divided by 2 pi; callers weight blocks themselves.
    pub fn block_sq_plain(&self, l: usize) -> f64 {
        use std::f64::consts::PI;
        if l == 0 {
            2.0 * PI * self.cos[0] * self.cos[0]
        } else {
            PI * (self.cos[l] * self.cos[l] + self.sin[l] * self.sin[l])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    // Direct-quadrature transform, the independent oracle for the FFT path.
    fn naive_analyze(samples: &[f64], l_max: usize) -> TrigSeries {
        let m = samples.len();
        let th = nodes(m);
        let mut out = TrigSeries::zero(l_max);
        out.cos[0] = samples.iter().sum::<f64>() / m as f64;
        for l in 1..=l_max {
            let mut ca = 0.0;
            let mut sa = 0.0;
            for (j, &f) in samples.iter().enumerate() {
                ca += f * (l as f64 * th[j]).cos();
                sa += f * (l as f64 * th[j]).sin();
            }
            out.cos[l] = 2.0 * ca / m as f64;
            out.sin[l] = 2.0 * sa / m as f64;
        }
        out
    }

    fn random_series(rng: &mut impl Rng, l_max: usize) -> TrigSeries {
        let mut s = TrigSeries::zero(l_max);
        for l in 0..=l_max {
            s.set(l, rng.random_range(-1.0..1.0), if l == 0 { 0.0 } else { rng.random_range(-1.0..1.0) });
        }
        s
    }

    #[test]
    fn analyze_matches_direct_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, l_max) in &[(64usize, 15usize), (128, 40), (96, 20)] {
            let truth = random_series(&mut rng, l_max);
            let samples = truth.synthesize(m).unwrap();
            let fft = TrigSeries::analyze(&samples, l_max).unwrap();
            let naive = naive_analyze(&samples, l_max);
            for l in 0..=l_max {
                assert!((fft.a(l) - naive.a(l)).abs() < 1e-12, "cos l={l}");
                assert!((fft.b(l) - naive.b(l)).abs() < 1e-12, "sin l={l}");
                assert!((fft.a(l) - truth.a(l)).abs() < 1e-12);
                assert!((fft.b(l) - truth.b(l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synthesize_matches_pointwise_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_series(&mut rng, 17);
        let m = 80;
        let vals = s.synthesize(m).unwrap();
        for (j, &th) in nodes(m).iter().enumerate() {
            assert!((vals[j] - s.eval(th)).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_series(&mut rng, 31);
        let back = TrigSeries::analyze(&s.synthesize(128).unwrap(), 31).unwrap();
        for l in 0..=31 {
            assert!((s.a(l) - back.a(l)).abs() < 1e-13);
            assert!((s.b(l) - back.b(l)).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_is_exact_on_modes() {
        // d/dtheta [cos 3t + 2 sin 5t] = -3 sin 3t + 10 cos 5t
        let mut s = TrigSeries::zero(6);
        s.set(3, 1.0, 0.0);
        s.set(5, 0.0, 2.0);
        let d = s.derivative();
        assert_eq!(d.a(5), 10.0);
        assert_eq!(d.b(3), -3.0);
        let d2 = s.second_derivative();
        assert_eq!(d2.a(3), -9.0);
        assert_eq!(d2.b(5), -50.0);
        // cross-check against a centered difference of eval
        let h = 1e-5;
        let th = 0.83;
        let fd = (s.eval(th + h) - s.eval(th - h)) / (2.0 * h);
        assert!((fd - d.eval(th)).abs() < 1e-6);
    }

    #[test]
    fn undersized_grid_is_rejected() {
        let s = TrigSeries::zero(10);
        assert!(matches!(s.synthesize(20), Err(Error::Aliasing { .. })));
        assert!(matches!(
            TrigSeries::analyze(&[0.0; 20], 10),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let mut v = vec![0.0; 32];
        v[5] = f64::NAN;
        assert!(matches!(
            TrigSeries::analyze(&v, 4),
            Err(Error::NonFiniteSamples)
        ));
    }
}
