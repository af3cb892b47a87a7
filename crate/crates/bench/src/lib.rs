//! Shared scenario builders for benchmarks.

use reanalysis::{
    apply_floor_grading, build_sri_preconditioner, default_additional_set, make_partition,
    FgMoments, FrameGrid, GradingTarget, MaterialSpec, SriPreconditioner, StiffnessFactor,
    StructuralModel, SystemPartition, TrussGrid,
};

/// An original structure, its floor-graded modification and the data reused
/// across reanalyses.
pub struct Scenario {
    pub name: String,
    pub original: StructuralModel,
    pub modified: StructuralModel,
    pub partition: SystemPartition,
    pub precond: SriPreconditioner,
    pub k0: StiffnessFactor,
    pub load: Vec<f64>,
}

impl Scenario {
    fn new(name: String, original: StructuralModel, modified: StructuralModel) -> Self {
        let spec = default_additional_set(&original).expect("generated models carry a layout");
        let partition = make_partition(&original, &spec).expect("default partition is determinate");
        let precond = build_sri_preconditioner(&partition).expect("reduced matrix is SPD");
        let k0 = StiffnessFactor::new(&original).expect("original structure is stable");
        let load = modified.load_vector();
        Scenario {
            name,
            original,
            modified,
            partition,
            precond,
            k0,
            load,
        }
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }
}

/// Braced truss graded from 35000 at the bottom floor to 5000 at the top.
pub fn graded_truss(n_span: usize, n_floor: usize) -> Scenario {
    let original = TrussGrid::new(n_span, n_floor).build().expect("valid grid");
    let modified = apply_floor_grading(&original, 5000.0, 35000.0, GradingTarget::Modulus)
        .expect("homogeneous bars");
    Scenario::new(format!("truss {n_span}x{n_floor}"), original, modified)
}

/// Homogeneous frame graded from 36000 to 4000.
pub fn graded_frame(n_span: usize, n_floor: usize, n_sb: usize) -> Scenario {
    let original = FrameGrid::new(n_span, n_floor, n_sb)
        .build()
        .expect("valid grid");
    let modified = apply_floor_grading(&original, 4000.0, 36000.0, GradingTarget::Modulus)
        .expect("homogeneous beams");
    Scenario::new(
        format!("frame {n_span}x{n_floor} nsb{n_sb}"),
        original,
        modified,
    )
}

/// Graded-section frame with the upper-surface modulus graded per floor.
pub fn fg_frame(n_span: usize, n_floor: usize, p: f64) -> Scenario {
    let mut g = FrameGrid::graded(n_span, n_floor);
    g.material = MaterialSpec::Graded {
        e_us: 20000.0,
        e_ls: 20000.0,
        p,
        moments: FgMoments::Published,
    };
    let original = g.build().expect("valid grid");
    let modified = apply_floor_grading(
        &original,
        4000.0,
        36000.0,
        GradingTarget::UpperSurfaceModulus,
    )
    .expect("graded beams");
    Scenario::new(
        format!("fg frame {n_span}x{n_floor} p{p}"),
        original,
        modified,
    )
}
