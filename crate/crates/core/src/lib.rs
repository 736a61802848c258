//! Cucker-Smale alignment with self-propulsion and Rayleigh friction.
//!
//! The crate is `no_std` and only needs `alloc`. It provides
//!
//! * [`model`]: agents, system parameters and communication kernels,
//! * [`dynamics`]: right-hand sides for the full flock, the velocity-only
//!   system and the scalar opinion system, plus a fixed-step RK4 integrator,
//! * [`diagnostics`]: alignment/diameter/angle monitors including the
//!   Grassmannian-projected angle and log-linear rate fits,
//! * [`nash`]: the opinion game, its Newton solver and equilibrium certificates,
//! * [`potential`]: the rescaled gradient-flow structure of the opinion system,
//! * [`scenarios`]: closed-form two-agent examples and seeded random states.
//!
//! IO, configuration and the command line live in the `csflock` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod dynamics;
pub mod linalg;
pub mod model;
pub mod nash;
pub mod potential;
pub mod rk4;
pub mod scenarios;

pub use diagnostics::{DiagnosticsFrame, RateFit};
pub use dynamics::{Derivative, IntegratorSpec, Probes, Trajectory};
pub use model::{FlockState, Kernel, SystemParams};
pub use nash::{Equilibrium, OpinionGame};
