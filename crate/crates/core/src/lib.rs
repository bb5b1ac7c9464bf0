//! Moment-SOS relaxations of polynomial optimisation problems whose matrix
//! constraints have arrow structure, together with their arrow decomposition.
//!
//! The crate is organised bottom-up:
//!
//! * [`polymat`] polynomial and polynomial-matrix algebra, monomial bases;
//! * [`linalg`] small dense helpers (symmetric eigen, pseudoinverse, bases);
//! * [`arrowcore`] arrow structures, interface matrices `Π_k` and the
//!   decomposition of a linear matrix inequality into bordered blocks;
//! * [`rankproj`] null/range bases, interface-variable elimination and
//!   projected blocks;
//! * [`momentsos`] moment and localizing matrices, the standard hierarchy and
//!   the arrow-decomposed hierarchy;
//! * [`sdpcore`] the block-diagonal conic program, SDPA files and an
//!   interior-point solver;
//! * [`frames`] plane frames, compliance and weight problems, and the
//!   built-in beam and 24-element frame models.

pub mod arrowcore;
pub mod error;
pub mod frames;
pub mod linalg;
pub mod momentsos;
pub mod polymat;
pub mod rankproj;
pub mod sdpcore;

pub use error::{Error, Result};
