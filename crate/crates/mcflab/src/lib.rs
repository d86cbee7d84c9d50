//! Numerical laboratory for arrival-time functions of mean curvature flow
//! on convex planar domains.
//!
//! The crate follows one story: a convex curve shrinks under curvature flow
//! to a point in finite time T; the arrival time t(x) records when the front
//! passes x; parabolic rescaling about the extinction point turns the flow
//! into a normal graph u over the round circle of radius sqrt(2); and the
//! decay of u as the rescaled time s -> infinity is controlled by the
//! spectrum of the stability operator -Delta - 1.  Modules:
//!
//! * [`trig`]      - trigonometric series engine (FFT transforms, calculus)
//! * [`spectral`]  - spectral calculus on the reference sphere
//! * [`shapes`]    - convex shape presets via support functions
//! * [`flow`]      - support-function curve-shortening flow
//! * [`arrival`]   - level-set arrival-time solver on a planar grid
//! * [`rescale`]   - parabolic rescaling and graph extraction
//! * [`estimates`] - quantitative checks on graph trajectories
//! * [`pipeline`]  - experiment configs, end-to-end runs, sweeps

pub mod error;
pub mod trig;
pub mod spectral;
pub mod shapes;
pub mod flow;
pub mod rescale;
pub mod estimates;
pub mod arrival;
pub mod pipeline;

pub use error::{Error, Result};
pub use flow::{FlowTrajectory, SupportFunction};
pub use pipeline::{ArtifactBundle, ExperimentConfig, ShapePreset};
pub use spectral::{ModeSpectrum, SpectralCoeffs, SphereGrid};
