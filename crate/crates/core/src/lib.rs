//! Finite abstractions of smooth flows.
//!
//! A continuous system (state space, vector field) is turned into a finite
//! combinatorial system: a set of cells `Z` and a discrete flow map
//! `phi(t, z) -> set of cells`. Four constructions are provided:
//!
//! * [`cover`]: ordered covers with an image computed through a family of
//!   linear fields enclosing the vector field.
//! * [`contraction`]: disk covers of a contracting system, where one
//!   simulated center trajectory per cell is enough.
//! * [`morse`]: flow-invariant connection cells between declared singular
//!   elements of a Morse-Smale field.
//! * [`levelset`]: slab cells cut out by descent functions, with transit-time
//!   boxes driving the discrete flow.
//!
//! [`abstraction`] checks any of them for over-, under- and complete
//! approximation, estimates conservativeness, and answers safety queries.

pub mod abstraction;
pub mod contraction;
pub mod cover;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod levelset;
pub mod linalg;
pub mod morse;
pub mod par;
pub mod rng;

pub use abstraction::{ApproximationKind, ApproximationReport, ContinuousSystem, DiscreteSystem, Soundness};
pub use dynamics::FlowConfig;
pub use error::{Error, Result};
pub use field::{Builtin, ScalarField, VectorField};
pub use geometry::{CellId, CellSet, Metric, OrderedCover, Region, SpaceKind, StateSpace};
