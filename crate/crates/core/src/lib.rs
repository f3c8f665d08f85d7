//! Solitons and conserved charges of brickwork dual-unitary circuits.
//!
//! The crate covers gate validation ([`gates`]), the light-cone window maps
//! and their unimodular spectra ([`lightcone`]), exact periodic-chain
//! evolution ([`chain`]), charge construction together with a brute-force
//! conserved-space oracle ([`charges`]), and exact Clifford propagation of
//! Pauli sums on the infinite lattice ([`pauli`]).

pub mod chain;
pub mod charges;
pub mod error;
pub mod gates;
pub mod io;
pub mod lightcone;
pub mod limits;
pub mod linalg;
pub mod pauli;
pub mod tensor;

pub use chain::{FloquetOperator, ParityClass, SupportProfile};
pub use charges::{ChargeRecord, ChargeTerm, Provenance};
pub use error::{Error, Result};
pub use gates::Gate;
pub use lightcone::{Direction, SolitonRecord, Superoperator};
pub use limits::Limits;
pub use pauli::{CliffordTableau, Pauli, PauliSum, PauliTerm};
pub use tensor::{hs_inner, hs_norm, EmbeddedOperator, LocalOperator};
