//! Load-controlled Newton–Raphson for trusses with bilinear bars.
//!
//! The tangent system is solved one of three ways: a sparse direct solve of
//! the full tangent stiffness, a dense direct solve of the reduced system,
//! or the reduced preconditioned iteration with the elastic preconditioner.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_parameters, make_partition, GlobalDecomposition, SystemPartition};
use crate::elements::{BilinearLaw, MaterialState};
use crate::error::{Error, Result};
use crate::linalg::{norm, BlockDiagonal, DenseLu, SpdFactor};
use crate::model::{ElementKind, MaterialSpec, PartitionSpec, StructuralModel};
use crate::solvers::{build_sri_preconditioner, solve_sri, IterOptions, SriPreconditioner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Sparse direct solve of the full tangent system.
    Regular,
    /// Dense direct solve of the reduced system.
    Reduction,
    /// Reduced preconditioned iteration.
    Sri,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Regular, Backend::Reduction, Backend::Sri];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Regular => "regular",
            Backend::Reduction => "reduction",
            Backend::Sri => "sri",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown backend '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearOptions {
    pub n_steps: usize,
    /// On `‖R_r‖ / ‖λP₀‖`.
    pub tol_outer: f64,
    /// On the reduced residual, normalized by `‖λP₀‖` (iterative backend only).
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: Option<usize>,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            n_steps: 20,
            tol_outer: 1e-8,
            tol_inner: 1e-15,
            max_outer: 50,
            max_inner: None,
        }
    }
}

/// Per-bar constitutive data and geometry needed by the driver.
#[derive(Debug, Clone)]
struct Bar {
    law: BilinearLaw,
    area: f64,
    length: f64,
}

/// Equilibrium data for one truss: bar laws plus the stacked mode rows.
#[derive(Debug, Clone)]
pub struct TrussMechanics {
    bars: Vec<Bar>,
    decomposition: GlobalDecomposition,
}

impl TrussMechanics {
    pub fn new(model: &StructuralModel) -> Result<Self> {
        let decomposition = assemble_parameters(model)?;
        let bars = model
            .elements()
            .iter()
            .map(|el| {
                if el.kind != ElementKind::TrussBar {
                    return Err(Error::InvalidModel(format!(
                        "element {} is not a truss bar",
                        el.id
                    )));
                }
                let law = match el.material {
                    MaterialSpec::Bilinear { e0, et, sigma_y } => BilinearLaw { e0, et, sigma_y },
                    MaterialSpec::Homogeneous { e } => BilinearLaw {
                        e0: e,
                        et: e,
                        sigma_y: f64::INFINITY,
                    },
                    m => {
                        return Err(Error::InvalidMaterial(format!(
                            "{m:?} is not valid for a truss bar"
                        )))
                    }
                };
                if !(law.et > 0.0) {
                    return Err(Error::InvalidState(format!(
                        "element {}: tangent modulus must be positive, got {}",
                        el.id, law.et
                    )));
                }
                let area = el.section.area.ok_or_else(|| {
                    Error::InvalidParameter(format!("element {} has no area", el.id))
                })?;
                Ok(Bar {
                    law,
                    area,
                    length: model.element_geometry(el).0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrussMechanics {
            bars,
            decomposition,
        })
    }

    pub fn element_count(&self) -> usize {
        self.bars.len()
    }

    /// Bar states for displacements `d`.
    pub fn states(&self, d: &[f64]) -> Vec<MaterialState> {
        let u = self.decomposition.transform.mul_vec(d);
        self.bars
            .iter()
            .zip(u)
            .map(|(bar, u)| bar.law.state(std::f64::consts::SQRT_2 * u / bar.length))
            .collect()
    }

    /// Internal force `F(d) = Σ √2·σ·A·c̃ᵀ` and the bar states it came from.
    pub fn internal_force(&self, d: &[f64]) -> (Vec<f64>, Vec<MaterialState>) {
        let states = self.states(d);
        let forces: Vec<f64> = self
            .bars
            .iter()
            .zip(&states)
            .map(|(bar, s)| std::f64::consts::SQRT_2 * s.stress * bar.area)
            .collect();
        (
            self.decomposition.transform.mul_transpose_vec(&forces),
            states,
        )
    }

    /// Tangent stiffness parameters `2·E_t·A/L`, one per bar.
    pub fn tangent_parameters(&self, states: &[MaterialState]) -> Vec<f64> {
        self.bars
            .iter()
            .zip(states)
            .map(|(bar, s)| 2.0 * s.tangent * bar.area / bar.length)
            .collect()
    }

    /// Sparse tangent stiffness `Cᵀ K_L,t C`.
    pub fn tangent_stiffness(&self, states: &[MaterialState]) -> Result<crate::linalg::CsrMatrix> {
        let params =
            BlockDiagonal::from_blocks(self.tangent_parameters(states).into_iter().map(|k| [k]))?;
        let dec = GlobalDecomposition {
            blocks: self.decomposition.blocks.clone(),
            params,
            transform: self.decomposition.transform.clone(),
        };
        Ok(dec.reconstruct())
    }
}

/// Count of yielded bars.
pub fn nonlinear_element_count(states: &[MaterialState]) -> usize {
    states.iter().filter(|s| s.yielded).count()
}

/// Partition with tangent parameter blocks and the elastic topology reused.
pub fn tangent_partition(
    mechanics: &TrussMechanics,
    states: &[MaterialState],
    elastic: &SystemPartition,
) -> Result<SystemPartition> {
    let kt = mechanics.tangent_parameters(states);
    let pick = |ids: &[usize]| BlockDiagonal::from_blocks(ids.iter().map(|&id| [kt[id]]));
    elastic.with_parameters(pick(elastic.basis_ids())?, pick(elastic.additional_ids())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lambda: f64,
    pub displacements: Vec<f64>,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub n_nle: usize,
    /// `‖F(d) − λP₀‖ / ‖λP₀‖` at acceptance.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub step: usize,
    pub lambda: f64,
    pub residual: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearRun {
    pub backend: Backend,
    pub n_steps: usize,
    pub steps: Vec<StepRecord>,
    pub final_states: Vec<MaterialState>,
    pub failure: Option<StepFailure>,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

impl NonlinearRun {
    pub fn completed(&self) -> bool {
        self.failure.is_none() && self.steps.len() == self.n_steps
    }

    pub fn final_nle(&self) -> Option<usize> {
        self.steps.last().map(|s| s.n_nle)
    }

    /// CSV `step,lambda,node_id,dof,value,outer_iters,n_nle`, one row per step
    /// and requested `(node, local dof)`. A failed step is appended with
    /// empty value columns.
    pub fn write_csv<W: Write>(
        &self,
        model: &StructuralModel,
        points: &[(usize, usize)],
        mut out: W,
    ) -> Result<()> {
        let io = |e: std::io::Error| Error::Internal(e.to_string());
        writeln!(out, "step,lambda,node_id,dof,value,outer_iters,n_nle").map_err(io)?;
        let mut dofs = Vec::with_capacity(points.len());
        for &(node, dof) in points {
            dofs.push(model.dof(node, dof).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "node {node} dof {dof} is not a free degree of freedom"
                ))
            })?);
        }
        for s in &self.steps {
            for (&(node, dof), &g) in points.iter().zip(&dofs) {
                writeln!(
                    out,
                    "{},{},{},{},{:.7e},{},{}",
                    s.step, s.lambda, node, dof, s.displacements[g], s.outer_iters, s.n_nle
                )
                .map_err(io)?;
            }
        }
        if let Some(f) = &self.failure {
            writeln!(out, "{},{},,,failed,,", f.step, f.lambda).map_err(io)?;
        }
        Ok(())
    }
}

enum Engine {
    Regular,
    Reduction(SystemPartition),
    Sri(SystemPartition, SriPreconditioner),
}

/// Incremental–iterative load control: `λ = s / n_steps` for `s = 1..=n_steps`,
/// each step starting from the previous converged displacements.
pub fn run_newton_raphson(
    model: &StructuralModel,
    p0: &[f64],
    partition: &PartitionSpec,
    backend: Backend,
    opts: &NonlinearOptions,
) -> Result<NonlinearRun> {
    let start = Instant::now();
    let n = model.n_dofs();
    if p0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p0.len(),
        });
    }
    if opts.n_steps == 0 || !(opts.tol_outer > 0.0) || !(opts.tol_inner > 0.0) {
        return Err(Error::InvalidParameter(
            "steps and tolerances must be positive".into(),
        ));
    }
    let mech = TrussMechanics::new(model)?;
    let engine = match backend {
        Backend::Regular => Engine::Regular,
        Backend::Reduction => Engine::Reduction(make_partition(model, partition)?),
        Backend::Sri => {
            let elastic = make_partition(model, partition)?;
            let precond = build_sri_preconditioner(&elastic)?;
            Engine::Sri(elastic, precond)
        }
    };

    let mut d = vec![0.0; n];
    let mut steps = Vec::with_capacity(opts.n_steps);
    let mut states = mech.states(&d);
    let mut failure = None;
    'steps: for step in 1..=opts.n_steps {
        let lambda = step as f64 / opts.n_steps as f64;
        let load: Vec<f64> = p0.iter().map(|p| lambda * p).collect();
        let load_norm = norm(&load);
        let mut outer = 0;
        let mut inner = 0;
        loop {
            let (f, s) = mech.internal_force(&d);
            states = s;
            let rr: Vec<f64> = load.iter().zip(&f).map(|(p, f)| p - f).collect();
            let residual = if load_norm > 0.0 {
                norm(&rr) / load_norm
            } else {
                norm(&rr)
            };
            if residual < opts.tol_outer {
                steps.push(StepRecord {
                    step,
                    lambda,
                    displacements: d.clone(),
                    outer_iters: outer,
                    inner_iters: inner,
                    n_nle: nonlinear_element_count(&states),
                    residual,
                });
                break;
            }
            if outer == opts.max_outer {
                failure = Some(StepFailure {
                    step,
                    lambda,
                    residual,
                    message: format!("no equilibrium after {outer} iterations"),
                });
                break 'steps;
            }
            let delta = match &engine {
                Engine::Regular => SpdFactor::new(&mech.tangent_stiffness(&states)?)?.solve(&rr),
                Engine::Reduction(elastic) => {
                    let part = tangent_partition(&mech, &states, elastic)?;
                    let rhs = part.reduced_rhs(&rr)?;
                    let forces = if part.q() == 0 {
                        Vec::new()
                    } else {
                        DenseLu::new(part.reduced_matrix().as_ref())
                            .ok_or_else(|| {
                                Error::Internal("reduced tangent matrix is singular".into())
                            })?
                            .solve(&rhs.b)
                    };
                    part.recover_displacements(&rhs.b_s, &forces)?
                }
                Engine::Sri(elastic, precond) => {
                    let part = tangent_partition(&mech, &states, elastic)?;
                    let iter = IterOptions {
                        tol: opts.tol_inner,
                        max_iter: opts.max_inner,
                        reference_norm: Some(load_norm),
                    };
                    let report = solve_sri(&part, &rr, precond, &iter)?;
                    inner += report.iterations;
                    match report.into_converged() {
                        Ok(r) => r.displacements,
                        Err(e) => {
                            failure = Some(StepFailure {
                                step,
                                lambda,
                                residual,
                                message: e.to_string(),
                            });
                            break 'steps;
                        }
                    }
                }
            };
            for (di, dd) in d.iter_mut().zip(delta) {
                *di += dd;
            }
            outer += 1;
        }
    }
    Ok(NonlinearRun {
        backend,
        n_steps: opts.n_steps,
        steps,
        final_states: states,
        failure,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_global;
    use crate::linalg::relative_difference;
    use crate::model::{default_additional_set, TrussGrid};

    fn bilinear_truss(ns: usize, nf: usize, sigma_y: f64) -> StructuralModel {
        let mut g = TrussGrid::new(ns, nf);
        g.area = 200.0;
        g.material = MaterialSpec::Bilinear {
            e0: 2e5,
            et: 0.3e5,
            sigma_y,
        };
        g.load = 500.0;
        g.build().unwrap()
    }

    #[test]
    fn zero_displacement_zero_force() {
        let m = bilinear_truss(3, 3, 25.0);
        let mech = TrussMechanics::new(&m).unwrap();
        let (f, s) = mech.internal_force(&vec![0.0; m.n_dofs()]);
        assert!(f.iter().all(|&x| x == 0.0));
        assert_eq!(nonlinear_element_count(&s), 0);
    }

    #[test]
    fn elastic_force_is_linear() {
        let m = bilinear_truss(3, 3, 1e9);
        let mech = TrussMechanics::new(&m).unwrap();
        let d = crate::linalg::probe_vector(m.n_dofs(), 3);
        let (f, _) = mech.internal_force(&d);
        let kd = assemble_global(&m).unwrap().mul_vec(&d);
        assert!(relative_difference(&f, &kd) < 1e-13);
    }

    #[test]
    fn single_yielded_bar_by_hand() {
        use crate::model::*;
        let data = ModelData {
            dofs_per_node: 2,
            nodes: vec![
                Node {
                    id: 0,
                    x: 0.0,
                    y: 0.0,
                },
                Node {
                    id: 1,
                    x: 100.0,
                    y: 0.0,
                },
            ],
            elements: vec![ElementRecord {
                id: 0,
                kind: ElementKind::TrussBar,
                node_i: 0,
                node_j: 1,
                section: SectionSpec::bar(2.0),
                material: MaterialSpec::Bilinear {
                    e0: 1000.0,
                    et: 100.0,
                    sigma_y: 5.0,
                },
                tag: None,
            }],
            supports: vec![
                Support {
                    node: 0,
                    dofs: vec![0, 1],
                },
                Support {
                    node: 1,
                    dofs: vec![1],
                },
            ],
            loads: vec![],
            layout: None,
            reference_nodes: None,
        };
        let m = StructuralModel::from_data(data).unwrap();
        let mech = TrussMechanics::new(&m).unwrap();
        // ε = 0.02, εy = 0.005, σ = 5 + 100·0.015 = 6.5, N = 13
        let (f, s) = mech.internal_force(&[2.0]);
        assert!((f[0] - 13.0).abs() < 1e-12);
        assert!(s[0].yielded);
        assert!((mech.tangent_parameters(&s)[0] - 2.0 * 100.0 * 2.0 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn tangent_partition_reuses_topology_and_matches_assembly() {
        let m = bilinear_truss(3, 4, 25.0);
        let spec = default_additional_set(&m).unwrap();
        let elastic = make_partition(&m, &spec).unwrap();
        let mech = TrussMechanics::new(&m).unwrap();
        let d: Vec<f64> = crate::linalg::probe_vector(m.n_dofs(), 9)
            .iter()
            .map(|x| x * 0.5)
            .collect();
        let states = mech.states(&d);
        assert!(nonlinear_element_count(&states) > 0);
        let t = tangent_partition(&mech, &states, &elastic).unwrap();
        assert!(t.shares_topology(&elastic));
        // reduced operator applied through the tangent partition recovers K_t⁻¹ R
        let r = m.load_vector();
        let rhs = t.reduced_rhs(&r).unwrap();
        let fa = DenseLu::new(t.reduced_matrix().as_ref())
            .unwrap()
            .solve(&rhs.b);
        let d_red = t.recover_displacements(&rhs.b_s, &fa).unwrap();
        let d_dir = SpdFactor::new(&mech.tangent_stiffness(&states).unwrap())
            .unwrap()
            .solve(&r);
        assert!(relative_difference(&d_red, &d_dir) < 1e-10);

        let none = mech.states(&vec![0.0; m.n_dofs()]);
        let t0 = tangent_partition(&mech, &none, &elastic).unwrap();
        assert_eq!(t0.basis_parameters(), elastic.basis_parameters());
    }

    #[test]
    fn backends_agree_on_small_truss() {
        let m = bilinear_truss(4, 6, 5.0);
        let spec = default_additional_set(&m).unwrap();
        let p0 = m.load_vector();
        let opts = NonlinearOptions {
            n_steps: 5,
            ..Default::default()
        };
        let runs: Vec<_> = Backend::ALL
            .iter()
            .map(|&b| run_newton_raphson(&m, &p0, &spec, b, &opts).unwrap())
            .collect();
        for r in &runs {
            assert!(r.completed(), "{:?}", r.failure);
        }
        for s in 0..5 {
            let a = &runs[0].steps[s].displacements;
            for r in &runs[1..] {
                assert!(relative_difference(&r.steps[s].displacements, a) < 1e-8);
            }
        }
        assert!(runs[0].final_nle().unwrap() > 0);
        let mut buf = Vec::new();
        runs[0]
            .write_csv(&m, &[(m.reference_nodes().unwrap().1, 0)], &mut buf)
            .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }

    #[test]
    fn outer_cap_reports_partial_history() {
        let m = bilinear_truss(2, 3, 5.0);
        let spec = default_additional_set(&m).unwrap();
        let opts = NonlinearOptions {
            n_steps: 4,
            max_outer: 0,
            ..Default::default()
        };
        let run = run_newton_raphson(&m, &m.load_vector(), &spec, Backend::Regular, &opts).unwrap();
        assert!(!run.completed());
        assert_eq!(run.failure.as_ref().unwrap().step, 1);
        assert!(run.steps.is_empty());
    }
}
