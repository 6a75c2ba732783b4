//! Benchmark problem builders: analytic toys with grid-computable optima,
//! multi-class Neyman-Pearson classification, fairness-constrained
//! classification, and approximate linear programs for perishable inventory
//! control.

pub mod fairness;
pub mod inventory;
pub mod multiclass;
pub mod toy;

pub use fairness::{build_fairness, FairnessSpec};
pub use inventory::{build_alp, AlpSpec, PerishableMdpSpec, TruncatedNormal};
pub use multiclass::{build_np_multiclass, MulticlassNpSpec};
pub use toy::{build_toy, ToyVariant};
