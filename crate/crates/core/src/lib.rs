//! Trust-region solver for bound-constrained problems whose variables split
//! into coupled nodes.
//!
//! The solver alternates projected-gradient steps over colour groups of
//! mutually uncoupled nodes to find a Cauchy point, improves it with a
//! proximally regularised safeguarded conjugate-gradient stage on the free
//! subspace, and globalises with a sup-norm trust region. The same machinery
//! drives augmented-Lagrangian outer loops for equality-constrained problems.
//!
//! Module map:
//!
//! - [`blockspace`]: partitions, colourings, boxes, projections, criticality
//! - [`model`]: problem oracles, block-sparse Hessians, the quadratic model
//! - [`cauchy`]: the alternating projected-gradient sweep
//! - [`refine`]: safeguarded CG on the reduced regularised model
//! - [`driver`]: the outer trust-region loop
//! - [`auglag`]: augmented Lagrangian wrappers and outer loops
//! - [`comm`]: accounting of the communication a distributed run would need
//! - [`fixtures`]: synthetic problems used by tests, examples and benchmarks

pub mod auglag;
pub mod blockspace;
pub mod cauchy;
pub mod comm;
pub mod driver;
mod error;
pub mod fixtures;
pub mod model;
pub mod refine;

pub use error::{Error, Result};

pub use auglag::{
    auglag_oracle, auglag_outer, lancelot_outer, AugLagOracle, BoundOnly, EqualityNlp, JacobianStructure,
    LancelotParams, OuterParams, OuterReport, OuterRow, OuterTermination, SingleBlock,
};
pub use blockspace::{
    active_set, criticality, greedy_coloring, project_box, projected_gradient, ActiveSet,
    BlockVector, BoxSet, CouplingGraph, Partition,
};
pub use cauchy::{cauchy_sweep, CauchyParams, CauchyResult};
pub use comm::{CommEvent, CommLedger, Phase};
pub use driver::{trap_solve, IterationRecord, StepClass, TrapParams, TrapReport, TrapTermination};
pub use model::{BlockSparseMatrix, NlpProblem, QuadraticModel};
pub use refine::{scg_refine, Forcing, RefineParams, RefineResult, RefineTermination};
