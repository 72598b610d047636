//! gridshed-core: a frequency-security workbench.
//!
//! Simulates post-contingency grid frequency dynamics with the classical
//! swing-equation model, generates labeled datasets for frequency security
//! assessment (FSA), trains small ML surrogates (decision tree, linear SVM,
//! MLP, CNN, aggregation GNN), and trains a constrained-MDP soft actor-critic
//! agent that performs under-frequency load shedding with minimal shed load.

pub mod error;
pub mod classifiers;
pub mod dynamics;
pub mod env;
pub mod grid;
pub mod rng;
pub mod sac;
pub mod scenario;
pub mod tensor;
pub mod util;

pub use error::{Error, Result};
