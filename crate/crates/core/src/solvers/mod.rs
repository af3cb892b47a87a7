//! Direct, full-system PCG, reduced preconditioned (SRI) and SMW (FDP)
//! solution paths sharing one report type.

mod conventional;
mod fdp;
mod pcg;
mod sri;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conventional::solve_conventional;
pub use fdp::solve_fdp;
pub use pcg::{solve_pcg_full, StiffnessFactor};
pub use sri::{build_sri_preconditioner, solve_sri, SriPreconditioner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Conventional,
    Pcg,
    Sri,
    Fdp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Conventional, Method::Pcg, Method::Sri, Method::Fdp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::Pcg => "pcg",
            Method::Sri => "sri",
            Method::Fdp => "fdp",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub displacements: Vec<f64>,
    /// Forces of the additional components (reduced unknowns), when the
    /// method computes them.
    pub additional_forces: Option<Vec<f64>>,
    pub iterations: usize,
    /// Normalized residual norms, starting with the initial residual.
    pub residual_history: Vec<f64>,
    pub flops_estimate: Option<u128>,
    pub wall_time: Duration,
    pub converged: bool,
}

impl SolveReport {
    /// Turn an unconverged report into a `NoConvergence` error.
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                residual: self.residual_history.last().copied().unwrap_or(f64::NAN),
            })
        }
    }
}

/// Stopping rule for the iterative paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterOptions {
    pub tol: f64,
    /// Defaults to ten times the system size.
    pub max_iter: Option<usize>,
    /// Residual normalization; defaults to the right-hand-side norm.
    pub reference_norm: Option<f64>,
}

impl Default for IterOptions {
    fn default() -> Self {
        IterOptions {
            tol: 1e-12,
            max_iter: None,
            reference_norm: None,
        }
    }
}

impl IterOptions {
    pub fn with_tol(tol: f64) -> Self {
        IterOptions {
            tol,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if let Some(r) = self.reference_norm {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "reference norm must be non-negative, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Preconditioned conjugate gradients on an SPD operator.
///
/// Stops as soon as the updated residual satisfies `‖r‖ / scale < tol`, so an
/// exact preconditioner finishes in one iteration.
pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
}

pub(crate) fn preconditioned_cg(
    b: &[f64],
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    opts: &IterOptions,
) -> Result<CgOutcome> {
    use crate::linalg::{dot, norm};
    opts.validate()?;
    let n = b.len();
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let scale = opts.reference_norm.unwrap_or_else(|| norm(b));
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = norm(&r);
    if r0 == 0.0 || scale == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            history: Vec::new(),
            converged: r0 == 0.0,
        });
    }
    let mut history = vec![r0 / scale];
    if r0 / scale < opts.tol {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            history,
            converged: true,
        });
    }
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&ap, &p);
        if !(pap > 0.0) {
            return Err(Error::Internal(format!(
                "operator is not positive definite (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / scale;
        history.push(rel);
        if rel < opts.tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                history,
                converged: true,
            });
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(CgOutcome {
        x,
        iterations: max_iter,
        history,
        converged: false,
    })
}
