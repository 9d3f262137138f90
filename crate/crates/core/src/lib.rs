//! Spectral solver for the defocusing cubic NLS `i∂ₜu + Δu = |u|²u`,
//! delayed-bubble initial data, and the decay measurements built on top.

pub mod error;
pub mod fields;
pub mod grid;
pub mod observe;
pub mod profiles;
pub mod propagate;
pub mod ratefit;

pub use error::{Error, Result};
pub use fields::{Field, InterpolationCheck, NormReport};
pub use grid::{make_geometry, FrequencyLattice, Geometry, GeometrySpec, Mode, SpectralWorkspace};
pub use profiles::{BaseProfile, Bubble, ProfileSpec};
pub use propagate::{evolve, free_propagate, nls_step, SolverConfig, Sponge, Trajectory};
pub use rustfft::num_complex::Complex64;
