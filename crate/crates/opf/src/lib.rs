//! AC optimal power flow on top of `trap-core`.
//!
//! Cases are read from MATPOWER-style text, laid out as bus and line nodes,
//! and exposed as [`trap_core::EqualityNlp`] problems in polar or
//! rectangular voltage coordinates.

pub mod case;
pub mod coloring;
pub mod layout;
pub mod problem;

pub use case::{builtin, parse_case, CASE9, STAR3, TOY2, Branch, Bus, CaseError, Generator, NetworkCase};
pub use coloring::{centralized_partition, opf_coloring};
pub use layout::{Formulation, OpfLayout};
pub use problem::{build_opf, build_polar_opf, build_rect_opf, OpfProblem};
