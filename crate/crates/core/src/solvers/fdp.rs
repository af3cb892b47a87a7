use std::time::Instant;

use faer::Mat;

use super::{Method, SolveReport};
use crate::assembly::SystemPartition;
use crate::costmodel::flops_fdp;
use crate::error::{Error, Result};
use crate::linalg::DenseLu;

/// Direct SMW solve: `S_a = (I + C_s K_Lb⁻¹ C_sᵀ K_La)⁻¹` by dense LU, then
/// `d = C_b⁻¹ K_Lb⁻¹ (P_R − C_sᵀ K_La S_a C_s K_Lb⁻¹ P_R)` with `P_R = C_b⁻ᵀ R`,
/// evaluated right to left.
pub fn solve_fdp(partition: &SystemPartition, r: &[f64]) -> Result<SolveReport> {
    let start = Instant::now();
    let (n, q) = (partition.n(), partition.q());
    if r.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.len(),
        });
    }
    let klb = partition.basis_parameters();
    let kla = partition.additional_parameters();
    let p_r = partition.basis_factorization().solve_transpose(r);
    let t1 = klb.apply_inverse(&p_r);

    let (mut rhs, forces) = if q == 0 {
        (p_r, Vec::new())
    } else {
        let mut s = partition.reduced_gram();
        kla.right_multiply(s.as_mut());
        let s = s + Mat::<f64>::identity(q, q);
        let lu = DenseLu::new(s.as_ref())
            .ok_or_else(|| Error::Internal("SMW capacitance matrix is singular".into()))?;
        let t2 = partition.cs_apply(&t1);
        let t3 = lu.solve(&t2);
        let t4 = kla.apply(&t3);
        let t5 = partition.cs_transpose_apply(&t4);
        (p_r.iter().zip(&t5).map(|(a, b)| a - b).collect(), t4)
    };
    rhs = klb.apply_inverse(&rhs);
    let d = partition.basis_factorization().solve(&rhs);
    Ok(SolveReport {
        method: Method::Fdp,
        displacements: d,
        additional_forces: Some(forces),
        iterations: 0,
        residual_history: Vec::new(),
        flops_estimate: Some(flops_fdp(n as u64, q as u64)),
        wall_time: start.elapsed(),
        converged: true,
    })
}
