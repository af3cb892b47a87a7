//! Element stiffness in factored form `K_e = Cᵀ K_L C`.
//!
//! `C` holds unit-norm deformation-mode rows and `K_L` the stiffness
//! parameters of those modes. The row convention is fixed crate-wide:
//!
//! * bar: `(−1, 0, 1, 0)/√2`
//! * beam, DOF order `(u₁, v₁, θ₁, u₂, v₂, θ₂)`:
//!   `(−1,0,0,1,0,0)/√2`, `(0,0,−1,0,0,1)/√2`, `(0,2,L,0,−2,L)/√(2(L²+4))`
//!
//! With this choice the homogeneous beam parameters come out diagonal and a
//! graded beam couples only the first two modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ElementKind, ElementRecord, FgMoments, MaterialSpec, StructuralModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ElementDecomposition {
    modes: usize,
    element_dofs: usize,
    params: Vec<f64>,
    local_rows: Vec<f64>,
    global_rows: Vec<f64>,
}

impl ElementDecomposition {
    fn new(params: Vec<f64>, local_rows: Vec<f64>, angle: f64) -> Self {
        let modes = (params.len() as f64).sqrt() as usize;
        debug_assert_eq!(modes * modes, params.len());
        let element_dofs = local_rows.len() / modes;
        let global_rows = rotate_rows(&local_rows, modes, element_dofs, angle);
        ElementDecomposition {
            modes,
            element_dofs,
            params,
            local_rows,
            global_rows,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn element_dofs(&self) -> usize {
        self.element_dofs
    }

    /// `K_L` in row-major order.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param(&self, i: usize, j: usize) -> f64 {
        self.params[i * self.modes + j]
    }

    pub fn local_row(&self, k: usize) -> &[f64] {
        &self.local_rows[k * self.element_dofs..(k + 1) * self.element_dofs]
    }

    pub fn global_row(&self, k: usize) -> &[f64] {
        &self.global_rows[k * self.element_dofs..(k + 1) * self.element_dofs]
    }

    /// `Cᵀ K_L C` with the global rows, row-major.
    pub fn stiffness(&self) -> Vec<f64> {
        self.reconstruct(&self.global_rows)
    }

    pub fn local_stiffness(&self) -> Vec<f64> {
        self.reconstruct(&self.local_rows)
    }

    fn reconstruct(&self, rows: &[f64]) -> Vec<f64> {
        let (m, nd) = (self.modes, self.element_dofs);
        let mut out = vec![0.0; nd * nd];
        for a in 0..m {
            for b in 0..m {
                let k = self.params[a * m + b];
                if k == 0.0 {
                    continue;
                }
                for r in 0..nd {
                    let ca = rows[a * nd + r] * k;
                    if ca == 0.0 {
                        continue;
                    }
                    for c in 0..nd {
                        out[r * nd + c] += ca * rows[b * nd + c];
                    }
                }
            }
        }
        out
    }
}

fn rotate_rows(local: &[f64], modes: usize, nd: usize, angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    let per_node = nd / 2;
    let mut out = local.to_vec();
    for k in 0..modes {
        for node in 0..2 {
            let base = k * nd + node * per_node;
            let (lu, lv) = (local[base], local[base + 1]);
            // global = local · T with T = [[c, s], [−s, c]]
            out[base] = lu * c - lv * s;
            out[base + 1] = lu * s + lv * c;
        }
    }
    out
}

fn check_length(length: f64) -> Result<()> {
    if length.is_finite() && length > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateElement {
            element: usize::MAX,
            length,
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

pub fn truss_decomposition(
    length: f64,
    angle: f64,
    modulus: f64,
    area: f64,
) -> Result<ElementDecomposition> {
    check_length(length)?;
    check_positive("E", modulus)?;
    check_positive("A", area)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Ok(ElementDecomposition::new(
        vec![2.0 * modulus * area / length],
        vec![-r, 0.0, r, 0.0],
        angle,
    ))
}

/// Homogeneous Euler–Bernoulli parameters `diag(2EA/L, 2EI/L, 6EI(L²+4)/L³)`.
pub fn beam_parameter_matrix(
    modulus: f64,
    area: f64,
    inertia: f64,
    length: f64,
) -> Result<[[f64; 3]; 3]> {
    check_length(length)?;
    check_positive("E", modulus)?;
    check_positive("A", area)?;
    check_positive("I", inertia)?;
    let l = length;
    let l2 = l * l;
    Ok([
        [2.0 * modulus * area * l2 / (l2 * l), 0.0, 0.0],
        [0.0, 2.0 * modulus * inertia * l2 / (l2 * l), 0.0],
        [0.0, 0.0, 6.0 * modulus * inertia * (l2 + 4.0) / (l2 * l)],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamModeRows {
    pub local: [[f64; 6]; 3],
    pub global: [[f64; 6]; 3],
}

pub fn beam_mode_rows(length: f64, angle: f64) -> Result<BeamModeRows> {
    check_length(length)?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let l = length;
    let s3 = (2.0 * (l * l + 4.0)).sqrt();
    let local = [
        [-r, 0.0, 0.0, r, 0.0, 0.0],
        [0.0, 0.0, -r, 0.0, 0.0, r],
        [0.0, 2.0 / s3, l / s3, 0.0, -2.0 / s3, l / s3],
    ];
    let flat: Vec<f64> = local.iter().flatten().copied().collect();
    let rotated = rotate_rows(&flat, 3, 6, angle);
    let mut global = [[0.0; 6]; 3];
    for (k, row) in global.iter_mut().enumerate() {
        row.copy_from_slice(&rotated[k * 6..(k + 1) * 6]);
    }
    Ok(BeamModeRows { local, global })
}

/// Through-depth moments of a power-law graded modulus, per unit width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgSectionConstants {
    /// `∫E(y) dy`
    pub a_e: f64,
    /// `∫E(y)·y dy`
    pub b_e: f64,
    /// `∫E(y)·y² dy`
    pub d_e: f64,
}

/// Section moments of `E(y) = (E_US − E_LS)(y/h + 1/2)^p + E_LS` over
/// `[−h/2, h/2]` using the published closed form (see [`FgMoments`]).
pub fn fg_section_constants(h: f64, p: f64, e_us: f64, e_ls: f64) -> Result<FgSectionConstants> {
    fg_section_constants_with(h, p, e_us, e_ls, FgMoments::Published)
}

pub fn fg_section_constants_with(
    h: f64,
    p: f64,
    e_us: f64,
    e_ls: f64,
    rule: FgMoments,
) -> Result<FgSectionConstants> {
    check_positive("h", h)?;
    check_positive("E_US", e_us)?;
    check_positive("E_LS", e_ls)?;
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "p must be non-negative, got {p}"
        )));
    }
    let (p1, p2, p3) = (p + 1.0, p + 2.0, p + 3.0);
    let h3 = h * h * h;
    let a_e = h / p1 * e_us + h * p / p1 * e_ls;
    let b_coef = match rule {
        FgMoments::Published => h * h / (2.0 * p1 * p2),
        FgMoments::Exact => h * h * p / (2.0 * p1 * p2),
    };
    let b_e = b_coef * e_us - b_coef * e_ls;
    let d_coef = h3 * (p * p + p + 2.0) / (4.0 * p1 * p2 * p3);
    let d_e = d_coef * e_us + (h3 / 12.0 - d_coef) * e_ls;
    Ok(FgSectionConstants { a_e, b_e, d_e })
}

pub fn fg_beam_parameter_matrix(
    width: f64,
    c: &FgSectionConstants,
    length: f64,
) -> Result<[[f64; 3]; 3]> {
    check_length(length)?;
    check_positive("b", width)?;
    let (b, l) = (width, length);
    let k11 = 2.0 * c.a_e * b / l;
    let k12 = -2.0 * c.b_e * b / l;
    let k22 = 2.0 * c.d_e * b / l;
    let k33 = 6.0 * (l * l + 4.0) * c.d_e * b / (l * l * l);
    if !(k11 > 0.0 && k33 > 0.0 && k11 * k22 - k12 * k12 > 0.0) {
        return Err(Error::InvalidMaterial(format!(
            "graded section constants {c:?} give a non positive definite parameter matrix"
        )));
    }
    Ok([[k11, k12, 0.0], [k12, k22, 0.0], [0.0, 0.0, k33]])
}

/// Local 6×6 stiffness of a graded Euler–Bernoulli element, written out
/// entry by entry. Kept as an independent check on the factored form.
pub fn fg_beam_local_stiffness(
    width: f64,
    c: &FgSectionConstants,
    length: f64,
) -> Result<[[f64; 6]; 6]> {
    check_length(length)?;
    check_positive("b", width)?;
    let (b, l) = (width, length);
    let l2 = l * l;
    let a = c.a_e * b * l2;
    let bb = c.b_e * b * l2;
    let d12 = 12.0 * c.d_e * b;
    let d6 = 6.0 * c.d_e * b * l;
    let d4 = 4.0 * c.d_e * b * l2;
    let d2 = 2.0 * c.d_e * b * l2;
    let k = [
        [a, 0.0, -bb, -a, 0.0, bb],
        [0.0, d12, d6, 0.0, -d12, d6],
        [-bb, d6, d4, bb, -d6, d2],
        [-a, 0.0, bb, a, 0.0, -bb],
        [0.0, -d12, -d6, 0.0, d12, -d6],
        [bb, d6, d2, -bb, -d6, d4],
    ];
    let l3 = l2 * l;
    Ok(k.map(|row| row.map(|v| v / l3)))
}

/// Parameter block `K_L` (row-major) of a model element with its current material.
pub fn element_parameters(model: &StructuralModel, el: &ElementRecord) -> Result<Vec<f64>> {
    let (length, _) = model.element_geometry(el);
    let tag_err = |e: Error| match e {
        Error::DegenerateElement { length, .. } => Error::DegenerateElement {
            element: el.id,
            length,
        },
        other => other,
    };
    let flat = |k: [[f64; 3]; 3]| k.iter().flatten().copied().collect();
    match (el.kind, el.material) {
        (ElementKind::TrussBar, m) => {
            let e = m.elastic_modulus().ok_or_else(|| {
                Error::InvalidMaterial(format!("element {} has no elastic modulus", el.id))
            })?;
            let area = section_area(el)?;
            check_length(length).map_err(tag_err)?;
            check_positive("E", e)?;
            check_positive("A", area)?;
            Ok(vec![2.0 * e * area / length])
        }
        (ElementKind::HomogeneousBeam, MaterialSpec::Homogeneous { e }) => {
            let inertia = el.section.inertia.ok_or_else(|| {
                Error::InvalidParameter(format!("element {} has no inertia", el.id))
            })?;
            Ok(flat(
                beam_parameter_matrix(e, section_area(el)?, inertia, length).map_err(tag_err)?,
            ))
        }
        (
            ElementKind::FgBeam,
            MaterialSpec::Graded {
                e_us,
                e_ls,
                p,
                moments,
            },
        ) => {
            let (b, h) = el.section.width.zip(el.section.height).ok_or_else(|| {
                Error::InvalidParameter(format!("element {} needs b and h", el.id))
            })?;
            let constants = fg_section_constants_with(h, p, e_us, e_ls, moments)?;
            Ok(flat(
                fg_beam_parameter_matrix(b, &constants, length).map_err(tag_err)?,
            ))
        }
        (kind, m) => Err(Error::InvalidMaterial(format!(
            "{m:?} is not valid for {kind:?}"
        ))),
    }
}

/// Factored stiffness of a model element with its current material.
pub fn element_decomposition(
    model: &StructuralModel,
    el: &ElementRecord,
) -> Result<ElementDecomposition> {
    let params = element_parameters(model, el)?;
    let (length, angle) = model.element_geometry(el);
    let local = match el.kind {
        ElementKind::TrussBar => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            vec![-r, 0.0, r, 0.0]
        }
        ElementKind::HomogeneousBeam | ElementKind::FgBeam => beam_mode_rows(length, angle)?
            .local
            .iter()
            .flatten()
            .copied()
            .collect(),
    };
    Ok(ElementDecomposition::new(params, local, angle))
}

fn section_area(el: &ElementRecord) -> Result<f64> {
    el.section
        .area
        .ok_or_else(|| Error::InvalidParameter(format!("element {} has no area", el.id)))
}

/// Bilinear elastic / linear-hardening law in total-strain form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearLaw {
    pub e0: f64,
    pub et: f64,
    pub sigma_y: f64,
}

impl BilinearLaw {
    pub fn yield_strain(&self) -> f64 {
        self.sigma_y / self.e0
    }

    /// Stress and tangent modulus at `strain`. `|ε| = εy` counts as elastic.
    pub fn stress(&self, strain: f64) -> (f64, f64) {
        bilinear_stress(strain, self.e0, self.et, self.sigma_y)
    }

    pub fn state(&self, strain: f64) -> MaterialState {
        let (stress, tangent) = self.stress(strain);
        MaterialState {
            strain,
            stress,
            tangent,
            yielded: strain.abs() > self.yield_strain(),
        }
    }
}

pub fn bilinear_stress(strain: f64, e0: f64, et: f64, sigma_y: f64) -> (f64, f64) {
    let eps_y = sigma_y / e0;
    if strain.abs() <= eps_y {
        (e0 * strain, e0)
    } else {
        (
            strain.signum() * (sigma_y + et * (strain.abs() - eps_y)),
            et,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialState {
    pub strain: f64,
    pub stress: f64,
    pub tangent: f64,
    pub yielded: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn bar_parameter_and_rows() {
        let d = truss_decomposition(500.0, 0.0, 20000.0, 20.0).unwrap();
        assert_eq!(d.params(), &[1600.0]);
        // Cᵀ K_L C = (EA/L) v vᵀ with v = (−1, 0, 1, 0)
        let k = d.stiffness();
        let ea_l = 20000.0 * 20.0 / 500.0;
        let v = [-1.0, 0.0, 1.0, 0.0];
        for r in 0..4 {
            for c in 0..4 {
                assert_relative_eq!(k[r * 4 + c], ea_l * v[r] * v[c], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vertical_bar_row() {
        let d = truss_decomposition(1.0, FRAC_PI_2, 1.0, 1.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [0.0, -r, 0.0, r];
        for (a, b) in d.global_row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn doubling_modulus_doubles_parameters_only() {
        let a = truss_decomposition(3.0, 0.4, 10.0, 2.0).unwrap();
        let b = truss_decomposition(3.0, 0.4, 20.0, 2.0).unwrap();
        assert_eq!(b.param(0, 0), 2.0 * a.param(0, 0));
        assert_eq!(a.global_row(0), b.global_row(0));
    }

    #[test]
    fn degenerate_lengths_rejected() {
        assert!(matches!(
            truss_decomposition(0.0, 0.0, 1.0, 1.0),
            Err(Error::DegenerateElement { .. })
        ));
        assert!(matches!(
            beam_mode_rows(-1.0, 0.0),
            Err(Error::DegenerateElement { .. })
        ));
        assert!(matches!(
            beam_parameter_matrix(1.0, 1.0, 1.0, 0.0),
            Err(Error::DegenerateElement { .. })
        ));
        assert!(beam_parameter_matrix(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn beam_parameters_by_substitution() {
        let k = beam_parameter_matrix(20000.0, 300.0, 22500.0, 500.0).unwrap();
        assert_relative_eq!(k[0][0], 24000.0, max_relative = 1e-15);
        assert_relative_eq!(k[1][1], 1.8e6, max_relative = 1e-15);
        assert_relative_eq!(k[2][2], 5_400_086.4, max_relative = 1e-14);
        let k2 = beam_parameter_matrix(20000.0, 300.0, 22500.0, 1000.0).unwrap();
        assert_relative_eq!(k2[0][0], k[0][0] / 2.0, max_relative = 1e-15);
        assert_relative_eq!(k2[1][1], k[1][1] / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn beam_rows_are_unit_norm() {
        for l in [0.1, 1.0, 2.0, 37.5, 500.0] {
            let rows = beam_mode_rows(l, 0.7).unwrap();
            for k in 0..3 {
                assert_relative_eq!(norm(&rows.local[k]), 1.0, max_relative = 1e-15);
                assert_relative_eq!(norm(&rows.global[k]), 1.0, max_relative = 1e-15);
            }
        }
        let rows = beam_mode_rows(2.0, 0.0).unwrap();
        assert_eq!(rows.local[2], [0.0, 0.5, 0.5, 0.0, -0.5, 0.5]);
    }

    #[test]
    fn fg_constants_hand_values() {
        let c = fg_section_constants(1.0, 1.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(c.a_e, 1.5, max_relative = 1e-15);
        assert_relative_eq!(c.b_e, 1.0 / 12.0, max_relative = 1e-15);
        // ∫ y²·(y + 3/2) dy over [−1/2, 1/2] = 1/8
        assert_relative_eq!(c.d_e, 1.0 / 8.0, max_relative = 1e-15);

        let h = fg_section_constants(3.0, 2.5, 7.0, 7.0).unwrap();
        assert_relative_eq!(h.a_e, 21.0, max_relative = 1e-14);
        assert_eq!(h.b_e, 0.0);
        assert_relative_eq!(h.d_e, 27.0 * 7.0 / 12.0, max_relative = 1e-14);

        // p = 0 is a uniform section at E_US
        let z = fg_section_constants_with(2.0, 0.0, 5.0, 1.0, FgMoments::Exact).unwrap();
        assert_relative_eq!(z.a_e, 10.0, max_relative = 1e-15);
        assert_eq!(z.b_e, 0.0);
        assert_relative_eq!(z.d_e, 8.0 * 5.0 / 12.0, max_relative = 1e-14);
        let zp = fg_section_constants(2.0, 0.0, 5.0, 1.0).unwrap();
        assert_eq!((zp.a_e, zp.d_e), (z.a_e, z.d_e));
        assert_relative_eq!(zp.b_e, 4.0, max_relative = 1e-15);
    }

    #[test]
    fn moment_rules_agree_only_where_expected() {
        for p in [0.5, 1.0, 2.0, 7.0] {
            let a =
                fg_section_constants_with(0.3, p, 36000.0, 20000.0, FgMoments::Published).unwrap();
            let b = fg_section_constants_with(0.3, p, 36000.0, 20000.0, FgMoments::Exact).unwrap();
            assert_eq!(a.a_e, b.a_e);
            assert_eq!(a.d_e, b.d_e);
            assert_relative_eq!(a.b_e * p, b.b_e, max_relative = 1e-15);
        }
    }

    #[test]
    fn fg_parameter_matrix_hand_values() {
        let c = fg_section_constants(1.0, 1.0, 2.0, 1.0).unwrap();
        let k = fg_beam_parameter_matrix(1.0, &c, 1.0).unwrap();
        assert_relative_eq!(k[0][0], 3.0, max_relative = 1e-15);
        assert_relative_eq!(k[0][1], -1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(k[1][0], -1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(k[1][1], 0.25, max_relative = 1e-15);
        assert_relative_eq!(k[2][2], 3.75, max_relative = 1e-15);
        assert_eq!(k[0][2], 0.0);
    }

    #[test]
    fn fg_parameter_matrix_rejects_corrupt_constants() {
        let c = FgSectionConstants {
            a_e: 1.0,
            b_e: 2.0,
            d_e: 1.0,
        };
        assert!(matches!(
            fg_beam_parameter_matrix(1.0, &c, 1.0),
            Err(Error::InvalidMaterial(_))
        ));
    }

    #[test]
    fn fg_local_stiffness_symmetric_and_decoupled() {
        let c = fg_section_constants(30.0, 2.0, 36000.0, 20000.0).unwrap();
        let k = fg_beam_local_stiffness(10.0, &c, 62.5).unwrap();
        for (r, row) in k.iter().enumerate() {
            for (s, v) in row.iter().enumerate() {
                assert_eq!(*v, k[s][r]);
            }
        }
        let c0 = fg_section_constants(30.0, 2.0, 20000.0, 20000.0).unwrap();
        let k0 = fg_beam_local_stiffness(10.0, &c0, 62.5).unwrap();
        for axial in [0, 3] {
            for bend in [1, 2, 4, 5] {
                assert_eq!(k0[axial][bend], 0.0);
            }
        }
    }

    #[test]
    fn bilinear_branches() {
        assert_eq!(bilinear_stress(0.0, 2e5, 0.3e5, 25.0), (0.0, 2e5));
        let eps_y = 25.0 / 2e5;
        assert_eq!(bilinear_stress(eps_y, 2e5, 0.3e5, 25.0), (25.0, 2e5));
        let (s, t) = bilinear_stress(2e-4, 2e5, 0.3e5, 25.0);
        assert_relative_eq!(s, 27.25, max_relative = 1e-14);
        assert_eq!(t, 0.3e5);
        let (s, t) = bilinear_stress(-2e-4, 2e5, 0.3e5, 25.0);
        assert_relative_eq!(s, -27.25, max_relative = 1e-14);
        assert_eq!(t, 0.3e5);
    }

    #[test]
    fn material_state_flags_yield() {
        let law = BilinearLaw {
            e0: 2e5,
            et: 0.3e5,
            sigma_y: 25.0,
        };
        assert!(!law.state(1e-4).yielded);
        assert!(law.state(-3e-4).yielded);
        assert_eq!(law.state(-3e-4).tangent, 0.3e5);
    }
}
