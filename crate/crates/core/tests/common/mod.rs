#![allow(dead_code, clippy::excessive_precision)]

use faer::prelude::Solve;
use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reanalysis::elements::{element_decomposition, fg_section_constants_with};
use reanalysis::model::{
    default_additional_set, ElementKind, ElementRecord, FgMoments, FrameGrid, MaterialSpec,
    ModelData, Node, PartitionSpec, SectionSpec, StructuralModel, Support, TrussGrid,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Original structure, a modification of every element, and the default split.
pub struct Case {
    pub original: StructuralModel,
    pub modified: StructuralModel,
    pub spec: PartitionSpec,
}

fn scale_material(m: MaterialSpec, f: f64, g: f64) -> MaterialSpec {
    match m {
        MaterialSpec::Homogeneous { e } => MaterialSpec::Homogeneous { e: e * f },
        MaterialSpec::Bilinear { e0, et, sigma_y } => MaterialSpec::Bilinear {
            e0: e0 * f,
            et: et * f,
            sigma_y,
        },
        MaterialSpec::Graded {
            e_us,
            e_ls,
            p,
            moments,
        } => MaterialSpec::Graded {
            e_us: e_us * f,
            e_ls: e_ls * g,
            p,
            moments,
        },
    }
}

/// Random generated structure with n ≤ `max_dofs` and every element's modulus
/// rescaled by a factor in [0.2, 5].
pub fn random_case(rng: &mut ChaCha8Rng, max_dofs: usize) -> Case {
    loop {
        let original = match rng.random_range(0..3) {
            0 => {
                let ns = rng.random_range(1..=6);
                let nf = rng.random_range(1..=8);
                let mut g = TrussGrid::new(ns, nf);
                g.span = rng.random_range(100.0..800.0);
                g.height = rng.random_range(100.0..800.0);
                g.build().unwrap()
            }
            1 => {
                let mut g = FrameGrid::new(
                    rng.random_range(1..=3),
                    rng.random_range(1..=3),
                    rng.random_range(1..=3),
                );
                g.n_sc = rng.random_range(1..=2);
                g.build().unwrap()
            }
            _ => {
                let mut g = FrameGrid::graded(rng.random_range(1..=2), rng.random_range(1..=2));
                g.n_sb = 2;
                g.n_sc = 2;
                g.material = MaterialSpec::Graded {
                    e_us: 20000.0,
                    e_ls: 20000.0,
                    p: rng.random_range(0.5..5.0),
                    moments: if rng.random_bool(0.5) {
                        FgMoments::Published
                    } else {
                        FgMoments::Exact
                    },
                };
                g.build().unwrap()
            }
        };
        if original.n_dofs() > max_dofs {
            continue;
        }
        let elements = original
            .elements()
            .iter()
            .map(|el| {
                let mut el = *el;
                let f = rng.random_range(0.2..5.0);
                let g = rng.random_range(0.2..5.0);
                el.material = scale_material(el.material, f, g);
                el
            })
            .collect();
        let modified = original.with_elements(elements).unwrap();
        let spec = default_additional_set(&original).unwrap();
        return Case {
            original,
            modified,
            spec,
        };
    }
}

/// Global element stiffness from the textbook displacement-method matrices.
pub fn textbook_element_stiffness(model: &StructuralModel, id: usize) -> Mat<f64> {
    let el = &model.elements()[id];
    let (a, b) = (&model.nodes()[el.node_i], &model.nodes()[el.node_j]);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let l = dx.hypot(dy);
    let (c, s) = (dx / l, dy / l);
    match el.kind {
        ElementKind::TrussBar => {
            let e = el.material.elastic_modulus().unwrap();
            let k = e * el.section.area.unwrap() / l;
            let t = [-c, -s, c, s];
            Mat::from_fn(4, 4, |i, j| k * t[i] * t[j])
        }
        ElementKind::HomogeneousBeam | ElementKind::FgBeam => {
            let (ae, be, de) = match el.material {
                MaterialSpec::Homogeneous { e } => (
                    e * el.section.area.unwrap(),
                    0.0,
                    e * el.section.inertia.unwrap(),
                ),
                MaterialSpec::Graded {
                    e_us,
                    e_ls,
                    p,
                    moments,
                } => {
                    let bw = el.section.width.unwrap();
                    let k = fg_section_constants_with(
                        el.section.height.unwrap(),
                        p,
                        e_us,
                        e_ls,
                        moments,
                    )
                    .unwrap();
                    (k.a_e * bw, k.b_e * bw, k.d_e * bw)
                }
                m => panic!("{m:?}"),
            };
            let (l2, l3) = (l * l, l * l * l);
            // axial EA/L, bending 12EI/L³..., axial–bending coupling B/L
            let local = [
                [ae / l, 0.0, -be / l, -ae / l, 0.0, be / l],
                [
                    0.0,
                    12.0 * de / l3,
                    6.0 * de / l2,
                    0.0,
                    -12.0 * de / l3,
                    6.0 * de / l2,
                ],
                [
                    -be / l,
                    6.0 * de / l2,
                    4.0 * de / l,
                    be / l,
                    -6.0 * de / l2,
                    2.0 * de / l,
                ],
                [-ae / l, 0.0, be / l, ae / l, 0.0, -be / l],
                [
                    0.0,
                    -12.0 * de / l3,
                    -6.0 * de / l2,
                    0.0,
                    12.0 * de / l3,
                    -6.0 * de / l2,
                ],
                [
                    be / l,
                    6.0 * de / l2,
                    2.0 * de / l,
                    -be / l,
                    -6.0 * de / l2,
                    4.0 * de / l,
                ],
            ];
            let rot = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
            let t = Mat::from_fn(6, 6, |i, j| {
                if i / 3 == j / 3 {
                    rot[i % 3][j % 3]
                } else {
                    0.0
                }
            });
            let k = Mat::from_fn(6, 6, |i, j| local[i][j]);
            t.transpose() * k * &t
        }
    }
}

/// Dense global stiffness over free DOFs, assembled from textbook matrices.
pub fn dense_stiffness_oracle(model: &StructuralModel) -> Mat<f64> {
    let n = model.n_dofs();
    let mut k = Mat::zeros(n, n);
    for el in model.elements() {
        let ke = textbook_element_stiffness(model, el.id);
        let dofs = model.element_dofs(el);
        for (a, ga) in dofs.iter().enumerate() {
            for (b, gb) in dofs.iter().enumerate() {
                if let (Some(i), Some(j)) = (ga, gb) {
                    k[(*i, *j)] += ke[(a, b)];
                }
            }
        }
    }
    k
}

pub fn dense_solve(k: &Mat<f64>, r: &[f64]) -> Vec<f64> {
    let rhs = Mat::from_fn(r.len(), 1, |i, _| r[i]);
    let x = k.as_ref().partial_piv_lu().solve(&rhs);
    (0..r.len()).map(|i| x[(i, 0)]).collect()
}

pub fn max_rel(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    (a - b).norm_max() / b.norm_max()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn piece(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Piece {
    let (value, error) = gk15(f, lo, hi);
    Piece {
        lo,
        hi,
        value,
        error,
    }
}

/// Globally adaptive Gauss–Kronrod integral: bisect the piece with the
/// largest error estimate until the total estimate is below `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut heap = std::collections::BinaryHeap::from([piece(&f, a, b)]);
    let mut total = heap.peek().unwrap().error;
    for _ in 0..1000 {
        if total <= tol {
            break;
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.lo + worst.hi);
        let (l, r) = (piece(&f, worst.lo, mid), piece(&f, mid, worst.hi));
        total += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
    }
    heap.iter().map(|p| p.value).sum()
}

/// `(∫E dy, ∫E·y dy, ∫E·y² dy)` of the power-law modulus by quadrature.
pub fn fg_moments_by_quadrature(h: f64, p: f64, e_us: f64, e_ls: f64) -> (f64, f64, f64) {
    let e = |y: f64| (e_us - e_ls) * (y / h + 0.5).max(0.0).powf(p) + e_ls;
    let scale = e_us.max(e_ls);
    let tol = |k: i32| 1e-14 * scale * h.powi(k + 1);
    (
        integrate(e, -0.5 * h, 0.5 * h, tol(0)),
        integrate(|y| e(y) * y, -0.5 * h, 0.5 * h, tol(1)),
        integrate(|y| e(y) * y * y, -0.5 * h, 0.5 * h, tol(2)),
    )
}

pub fn two_node(
    kind: ElementKind,
    length: f64,
    angle: f64,
    section: SectionSpec,
    material: MaterialSpec,
) -> StructuralModel {
    let dpn = kind.dofs_per_node();
    StructuralModel::from_data(ModelData {
        dofs_per_node: dpn,
        nodes: vec![
            Node {
                id: 0,
                x: 0.0,
                y: 0.0,
            },
            Node {
                id: 1,
                x: length * angle.cos(),
                y: length * angle.sin(),
            },
        ],
        elements: vec![ElementRecord {
            id: 0,
            kind,
            node_i: 0,
            node_j: 1,
            section,
            material,
            tag: None,
        }],
        supports: vec![Support {
            node: 0,
            dofs: (0..dpn).collect(),
        }],
        loads: vec![],
        layout: None,
        reference_nodes: None,
    })
    .unwrap()
}

pub fn reconstructed(model: &StructuralModel) -> Mat<f64> {
    let d = element_decomposition(model, &model.elements()[0]).unwrap();
    let nd = d.element_dofs();
    let k = d.stiffness();
    Mat::from_fn(nd, nd, |i, j| k[i * nd + j])
}

#[allow(clippy::too_many_arguments)]
pub fn graded(
    l: f64,
    angle: f64,
    e_us: f64,
    e_ls: f64,
    p: f64,
    b: f64,
    h: f64,
    moments: FgMoments,
) -> StructuralModel {
    two_node(
        ElementKind::FgBeam,
        l,
        angle,
        SectionSpec::rectangle(b, h),
        MaterialSpec::Graded {
            e_us,
            e_ls,
            p,
            moments,
        },
    )
}

pub fn element_case() -> impl Strategy<Value = StructuralModel> {
    let geometry = (1.0f64..1000.0, -std::f64::consts::PI..std::f64::consts::PI);
    prop_oneof![
        (geometry.clone(), 1.0f64..1e6, 0.1f64..1e4).prop_map(|((l, a), e, area)| two_node(
            ElementKind::TrussBar,
            l,
            a,
            SectionSpec::bar(area),
            MaterialSpec::Homogeneous { e }
        )),
        (geometry.clone(), 1.0f64..1e6, 1.0f64..100.0, 1.0f64..100.0).prop_map(
            |((l, a), e, b, h)| two_node(
                ElementKind::HomogeneousBeam,
                l,
                a,
                SectionSpec::rectangle(b, h),
                MaterialSpec::Homogeneous { e }
            )
        ),
        (
            geometry.clone(),
            1.0f64..1e5,
            0.01f64..100.0,
            0.0f64..10.0,
            1.0f64..100.0,
            1.0f64..100.0
        )
            .prop_map(|((l, a), e_us, ratio, p, b, h)| graded(
                l,
                a,
                e_us,
                e_us * ratio,
                p,
                b,
                h,
                FgMoments::Exact
            )),
        // the published first moment is only positive definite away from p = 0
        (
            geometry,
            1.0f64..1e5,
            0.2f64..5.0,
            0.5f64..10.0,
            1.0f64..100.0,
            1.0f64..100.0
        )
            .prop_map(|((l, a), e_us, ratio, p, b, h)| graded(
                l,
                a,
                e_us,
                e_us * ratio,
                p,
                b,
                h,
                FgMoments::Published
            )),
    ]
}

/// Per-formula tallies of the reduced iteration, summed line by line.
pub fn sri_by_lines(n: u128, q: u128, k: u128) -> u128 {
    let setup = [
        2 * n * n + 2 * n * q + n,         // B
        2 * q * q + 4 * n * q + 2 * q + n, // r₀
        2 * n * q,                         // z₀
    ];
    let per_iteration = [
        2 * q * q + 4 * n * q + 5 * q + n + 1, // α
        2 * q,                                 // x
        2 * q * q + 4 * n * q + 3 * q + n,     // r
        2 * q * q,                             // z
        4 * q + 1,                             // β
        2 * q,                                 // p
    ];
    let recovery = 2 * q * q + 2 * n * q + 2 * n;
    setup.iter().sum::<u128>() + k * per_iteration.iter().sum::<u128>() + recovery
}

/// `S_a` then `d`, following the stated evaluation order.
pub fn fdp_by_chain(n: u128, q: u128) -> u128 {
    let s_a = 2 * n * q * q + q * q * q + 2 * n * q + q;
    let d = 2 * n * n + 2 * q * q + 4 * n * q + 3 * n + q;
    s_a + d
}

/// `∫E·|y|^k dy` for k = 0, 1, 2: the magnitudes that set relative accuracy
/// of each moment.
pub fn fg_moment_magnitudes(h: f64, p: f64, e_us: f64, e_ls: f64) -> (f64, f64, f64) {
    let e = |y: f64| (e_us - e_ls) * (y / h + 0.5).max(0.0).powf(p) + e_ls;
    let scale = e_us.max(e_ls);
    let tol = |k: i32| 1e-14 * scale * h.powi(k + 1);
    (
        integrate(e, -0.5 * h, 0.5 * h, tol(0)),
        integrate(|y| e(y) * y.abs(), -0.5 * h, 0.5 * h, tol(1)),
        integrate(|y| e(y) * y * y, -0.5 * h, 0.5 * h, tol(2)),
    )
}
