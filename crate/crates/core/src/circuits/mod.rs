//! And-Inverter Graphs, CNF encodings and the file formats around them.
//!
//! Literals follow AIGER: `2·var + negated`, with variable 0 the constant
//! false. CNF literals follow DIMACS.

mod aig;
mod cnf;
mod generators;

pub use aig::{
    formula_to_circuit, formulas_to_circuit, AigBuilder, AigCircuit, Gate, Symbol, SymbolKind,
};
pub use cnf::{miter_cnf, miter_cnf_over, tseitin, tseitin_over, CnfInstance};
pub use generators::{array_multiplier, ripple_carry_adder};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: sequential circuits unsupported")]
    Sequential { line: usize },
    #[error("output index {index} out of range ({outputs} outputs)")]
    OutputIndex { index: usize, outputs: usize },
    #[error("expected {expected} input bits, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("variable {0} is not among the inputs")]
    UnknownVariable(String),
}
