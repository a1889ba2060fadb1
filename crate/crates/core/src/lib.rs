//! Coulomb crystals in rf traps, their Floquet phonon modes, and kink-mediated
//! entangling gates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coulomb;
pub mod crystal;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod gate;
pub mod mathieu;
pub mod nonlinear;
pub mod par;
pub mod pipeline;
pub mod presets;
pub mod trap;
pub mod units;

pub use error::{Error, Result};
pub use trap::{potential_and_force, Geometry, IonSpecies, Ions, SpeciesRole, TrapModel, TrapParameters, Vec3};
