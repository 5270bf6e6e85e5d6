//! Transmit beamspace design and direction-of-arrival estimation for MIMO
//! radar with uniform linear arrays.
//!
//! The crate covers the full signal chain: array manifolds ([`array`]),
//! beamspace matrices ([`beamspace`]) and their design ([`design`],
//! [`minimax`]), snapshot simulation ([`sim`]), subspace estimators
//! ([`estimators`]) and Cramér–Rao bounds ([`crb`]).

pub mod array;
pub mod beamspace;
pub mod crb;
pub mod design;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod minimax;
pub mod sim;
pub mod socp;

pub use array::{steering_derivative, steering_vector, virtual_steering, AngleDeg, ElementPositions, UlaGeometry};
pub use beamspace::{BeamspaceMatrix, DesignMethod, TransmitModel};
pub use error::{Error, Result};
