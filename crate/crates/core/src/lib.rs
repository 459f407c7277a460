//! Orthologic reasoning over propositional formulas and And-Inverter Graphs.
//!
//! * [`formula`]: hash-consed formula DAGs, negation normal form, inverses.
//! * [`entailment`]: the forward-saturation prover for orthologic with axioms.
//! * [`oracle`]: slow reference deciders and formula generators for testing.
//! * [`normalizer`]: orthologic normal forms.
//! * [`circuits`]: AIGER, cones, Tseitin encoding, miters and DIMACS.

pub mod circuits;
pub mod entailment;
pub mod formula;
pub mod normalizer;
pub mod oracle;

pub use formula::{FormulaError, FormulaId, FormulaStore, Kind, Node, VarId};
