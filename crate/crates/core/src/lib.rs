//! Length reduction of quantum circuits over discrete gate sets, preserving
//! the implemented unitary up to global phase.
//!
//! Three reduction strategies share one loop ([`reducer`]): random search
//! over shorter candidate chains, retrieval from a precomputed
//! shortest-factorization database ([`database`]), and database retrieval
//! gated by a random-forest classifier ([`forest`]).

pub mod bench;
pub mod circuit;
pub mod database;
pub mod error;
pub mod forest;
pub mod gates;
pub mod graph;
pub mod reducer;
pub mod unitary;

pub use circuit::{Circuit, QubitMap, Subblock, Token};
pub use error::{Error, Result};
pub use gates::{parse_gate_set, GateSet, TokenDef};
pub use unitary::{CanonicalKey, PhaseTolerance, Unitary};
