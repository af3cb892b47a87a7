use std::time::Instant;

use super::{preconditioned_cg, IterOptions, Method, SolveReport};
use crate::assembly::assemble_global;
use crate::costmodel::flops_pcg;
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::model::StructuralModel;

/// Factorized stiffness of the original structure, used as preconditioner.
#[derive(Debug)]
pub struct StiffnessFactor {
    factor: SpdFactor,
}

impl StiffnessFactor {
    pub fn new(original: &StructuralModel) -> Result<Self> {
        Ok(StiffnessFactor {
            factor: SpdFactor::new(&assemble_global(original)?)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.factor.solve(b)
    }
}

/// Preconditioned CG on the full modified system with `M = K₀`.
/// Residuals are normalized by `‖R‖` unless a reference norm is given.
pub fn solve_pcg_full(
    modified: &StructuralModel,
    k0: &StiffnessFactor,
    opts: &IterOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let n = modified.n_dofs();
    if k0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: k0.dim(),
        });
    }
    let k = assemble_global(modified)?;
    let r = modified.load_vector();
    let out = preconditioned_cg(&r, |p| k.mul_vec(p), |v| k0.solve(v), opts)?;
    Ok(SolveReport {
        method: Method::Pcg,
        displacements: out.x,
        additional_forces: None,
        iterations: out.iterations,
        residual_history: out.history,
        flops_estimate: Some(flops_pcg(n as u64, out.iterations as u64)),
        wall_time: start.elapsed(),
        converged: out.converged,
    })
}
