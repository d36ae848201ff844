//! Numerical toolkit for the effective dynamics of solitons in the Hartree
//! equation and the one-dimensional cubic NLS in slowly varying potentials.

pub mod effective;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod groundstate;
pub mod modulation;
pub mod pde;
pub mod potential;
pub mod spectral;
pub mod stats;
pub mod symmetry;

pub use error::{Error, Result};
pub use grid::{Field, Fourier, Grid};
pub use groundstate::{GroundState, Model, RadialProfile};
pub use potential::{ExternalPotential, Landscape};
pub use symmetry::{GroupElement, GroupTangent};
