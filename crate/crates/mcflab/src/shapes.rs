//! Convex shape presets, all given by their support function
//!
//!   h(theta) = sup_{x in Omega} x . (cos theta, sin theta),
//!
//! the signed distance from the origin to the tangent line with outward
//! normal angle theta.  A C^2 support function describes a convex body iff
//! the curvature radius h + h'' is positive.

use rand::Rng;

use crate::error::{Error, Result};
use crate::flow::{band, SupportFunction};
use crate::trig::TrigSeries;

/// Circle of the given radius centered at `center`.
pub fn circle(radius: f64, center: [f64; 2], m: usize) -> Result<SupportFunction> {
    if radius <= 0.0 {
        return Err(Error::invalid("circle radius must be positive"));
    }
    let mut series = TrigSeries::zero(band(m));
    series.set(0, radius, 0.0);
    series.set(1, center[0], center[1]);
    SupportFunction::from_series(series, m, 0.0)
}

/// Axis-aligned ellipse with semi-axes a, b centered at the origin:
/// h(theta) = sqrt(a^2 cos^2 + b^2 sin^2).
pub fn ellipse(a: f64, b: f64, m: usize) -> Result<SupportFunction> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::invalid("ellipse semi-axes must be positive"));
    }
    let h: Vec<f64> = crate::trig::nodes(m)
        .iter()
        .map(|&t| ((a * t.cos()).powi(2) + (b * t.sin()).powi(2)).sqrt())
        .collect();
    SupportFunction::from_samples(&h, m, 0.0)
}

/// Random convex perturbation of a circle: modes 2..=max_mode with
/// coefficients drawn uniformly at `amplitude` scale, then damped just
/// enough that the curvature radius keeps a 30% margin.  Deterministic in
/// the caller's RNG.
pub fn perturbed_circle(
    radius: f64,
    amplitude: f64,
    max_mode: u32,
    m: usize,
    rng: &mut impl Rng,
) -> Result<SupportFunction> {
    if radius <= 0.0 || amplitude < 0.0 {
        return Err(Error::invalid("radius must be positive and amplitude nonnegative"));
    }
    if max_mode < 2 {
        return Err(Error::invalid("perturbation modes start at l = 2"));
    }
    let mut pert = TrigSeries::zero(band(m).max(max_mode as usize));
    for l in 2..=max_mode as usize {
        // higher modes damped so the curvature radius stays tame
        let w = amplitude / (l * l) as f64 * 4.0;
        pert.set(l, rng.random_range(-w..w), rng.random_range(-w..w));
    }
    // min over theta of pert + pert'' decides how much damping convexity needs
    let rc_pert = TrigSeries::lin_comb(&pert, 1.0, &pert.second_derivative(), 1.0);
    let worst = rc_pert
        .synthesize(4 * m)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let margin = 0.7 * radius;
    if worst < -margin {
        pert.scale(margin / -worst);
    }
    let mut series = pert.truncated(band(m));
    series.set(0, radius + series.a(0), 0.0);
    SupportFunction::from_series(series, m, 0.0)
}
