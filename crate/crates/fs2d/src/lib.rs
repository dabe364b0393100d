//! Frequency-domain registration of 2D radar scans.
//!
//! Polar scans are gridded to Cartesian images, translation is recovered by
//! FFT phase correlation, and rotation by correlating spherical-harmonic
//! expansions of the spectral magnitudes (which makes the rotation search
//! independent of translation). On top of single-pair registration the crate
//! provides multi-peak motion hypotheses, confidence-based outlier flagging,
//! strided SE(2) odometry, a deterministic synthetic scene generator, and
//! ground-truth evaluation.
//!
//! Everything is generic over the scalar type via [`Scalar`] (`f32`/`f64`);
//! the `*64` aliases below cover the common case.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod grid;
pub mod odometry;
pub mod registration;
pub mod rotation;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{polar_to_cartesian, polar_to_cartesian_checked, preprocess, Window};
pub use odometry::{chain_motions, register_pairs, run_odometry, StrideMode};
pub use registration::{register, register_grids};
pub use rotation::{estimate_rotation, normalize_angle};
pub use scalar::Scalar;
pub use spectral::phase_correlate;

/// Concrete `f64` aliases for the generic core types.
pub type PolarScan64 = grid::PolarScan<f64>;
pub type GridConfig64 = grid::GridConfig<f64>;
pub type CartesianGrid64 = grid::CartesianGrid<f64>;
pub type ComplexSpectrum64 = spectral::ComplexSpectrum<f64>;
pub type SpectralMagnitude64 = spectral::SpectralMagnitude<f64>;
pub type CorrelationSurface64 = spectral::CorrelationSurface<f64>;
pub type ShtPlan64 = rotation::sht::ShtPlan<f64>;
pub type RotationEstimate64 = rotation::RotationEstimate<f64>;
pub type RigidMotion2D64 = registration::RigidMotion2D<f64>;
pub type RegistrationConfig64 = registration::RegistrationConfig<f64>;
pub type RegistrationResult64 = registration::RegistrationResult<f64>;
pub type Pose2D64 = odometry::Pose2D<f64>;
pub type Trajectory64 = odometry::Trajectory<f64>;
pub type OdometryConfig64 = odometry::OdometryConfig<f64>;
