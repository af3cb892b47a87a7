//! Reanalysis of modified 2D trusses and frames by system reduction and
//! preconditioned conjugate gradients on the reduced system.

// NaN must fail the positivity checks, hence `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod costmodel;
pub mod elements;
pub mod error;
pub mod linalg;
pub mod model;
pub mod nonlinear;
pub mod solvers;

pub use assembly::{
    assemble_global, assemble_parameters, make_partition, make_partition_with, CsStorage,
    GlobalDecomposition, ReducedRhs, SystemPartition,
};
pub use costmodel::{
    flops_fdp, flops_pcg, flops_sri, ratio_sweep, relative_time, RatioSweep, SweepMode, SweepSpec,
};
pub use elements::{
    element_decomposition, element_parameters, fg_section_constants, fg_section_constants_with,
    ElementDecomposition, FgSectionConstants,
};
pub use error::{Error, Result};
pub use model::{
    apply_floor_grading, default_additional_set, spans_from_level, ElementKind, ElementRecord,
    FgMoments, FrameGrid, GradingTarget, GridLayout, MaterialSpec, MemberKind, MemberTag,
    ModelData, ModelDocument, NodalLoad, Node, PartitionSpec, SectionSpec, StructuralModel,
    Support, TrussGrid,
};
pub use nonlinear::{run_newton_raphson, Backend, NonlinearOptions, NonlinearRun};
pub use solvers::{
    build_sri_preconditioner, solve_conventional, solve_fdp, solve_pcg_full, solve_sri,
    IterOptions, Method, SolveReport, SriPreconditioner, StiffnessFactor,
};
