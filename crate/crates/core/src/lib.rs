//! Learning the objectives and constraints of multiobjective decision
//! problems from noisy observations of their efficient solutions.

pub mod builders;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod identifiability;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod reform;
pub mod solver;

pub use error::{ImopError, Result};
pub use model::{
    ConcreteDmp, Constraints, DmpInstance, Family, Normalization, Objective, ParamSpace, ParamVector, PolyTerm, Slot,
    SlotTarget,
};
pub use solver::{ForwardSolution, WeightVector};
