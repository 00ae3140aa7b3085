//! Convex and adversarially robust training of one-hidden-layer ReLU networks.
//!
//! Training problems are sampled convex programs over activation patterns,
//! compiled to a conic form and solved by an interior-point method. Network
//! weights are recovered from the convex solution and evaluated against
//! FGSM, PGD and closed-form worst-case adversaries.

pub mod attacks;
pub mod baseline;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod model;
pub mod patterns;
pub mod program;
pub mod rng;
pub mod solver;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{ActivationPattern, ConvexSolution, Dataset, LossKind, NetworkWeights, Task};
