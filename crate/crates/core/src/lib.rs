//! Classification pipeline for lattice walks in the positive octant.
//!
//! The crate implements the full cascade for models with steps in
//! {-1,0,1}^3: enumeration of symmetry classes, elimination of models in
//! bijection with quarter-plane models, Hadamard decompositions, the group
//! of the walk with orbit sums, a modular counting kernel with Chinese
//! remainder reconstruction, growth-constant estimation with Richardson
//! acceleration and algebraic recognition, and P-recurrence/ODE guessing
//! over prime fields.

pub mod countkernel;
pub mod exactify;
pub mod guess;
pub mod minpoly;
pub mod modarith;
pub mod asymptotics;
pub mod pipeline;
pub mod reduce;
pub mod stepset;
pub mod walkgroup;

pub use stepset::{enumerate_classes, AxisPerm, Axis, FilterStatus, ModelRecord, Step, StepSet};
