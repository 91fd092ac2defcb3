//! Stokes flow in a box coupled to a clamped von Karman plate forming its
//! top lid: discretization, a strongly coupled time stepper, energy and
//! Lyapunov audits, and long-time probes.

pub mod attractor;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod manufactured;
pub mod pipeline;
pub mod plate;
pub mod profiles;
pub mod scalar;
pub mod snapshot;
pub mod stokes;

pub use coupling::{CoupledState, Coupler, Forcing, ModelParams, StepReport, Trajectory};
pub use error::{Error, Result};
pub use grid::{BoxGeometry, FluidGrid, PlateGrid, PlateVector, StaggeredVelocity};
pub use plate::{PlateField, PlateModel, PlateSolver};
pub use stokes::{FluidField, StokesWorkspace};

/// Symmetric 2x2 tensor in double precision.
pub type SymTensor = plate::law::SymTensor2<f64>;
