//! Simulation and optimization of heralded entangled-state generation from
//! squeezed-vacuum Gaussian sources.
//!
//! The pipeline is:
//!
//! * [`symplectic`]: quadrature Gaussian states, squeezers, beamsplitters and
//!   rectangular interferometer meshes.
//! * [`hafnian`]: hafnian and loop-hafnian kernels (power-trace algorithm).
//! * [`fock`]: Fock-basis probabilities and pure-state amplitudes of Gaussian
//!   states.
//! * [`circuit`]: the heralded circuit layout, photon addition/subtraction
//!   gadgets and the dual-rail target states.
//! * [`analysis`]: heralding probability, fidelity, non-vacuum post-selected
//!   metrics and the optimization cost.
//! * [`optimizer`]: finite-difference quasi-Newton descent with restarts and
//!   robustness studies.
//! * [`validate`]: the oracle suite comparing the fast kernels against
//!   enumeration and closed forms.
//! * `runner` (feature `cli`): experiment configs, the
//!   optimize/sweep/robustness/validate jobs and their on-disk artifacts.

pub mod analysis;
pub mod circuit;
mod error;
pub mod fock;
pub mod hafnian;
pub mod optimizer;
pub mod oracle;
#[cfg(feature = "cli")]
pub mod runner;
pub mod symplectic;
pub mod validate;

pub use error::{Error, Result};
pub use num_complex::Complex64;
