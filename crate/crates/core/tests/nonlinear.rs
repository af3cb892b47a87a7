use reanalysis::linalg::{norm, relative_difference};
use reanalysis::{
    default_additional_set, run_newton_raphson, solve_conventional, Backend, MaterialSpec,
    NonlinearOptions, StructuralModel, TrussGrid,
};

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

/// Axial strain of every bar, then nodal internal forces, from the
/// member geometry alone.
fn internal_forces(model: &StructuralModel, d: &[f64]) -> (Vec<f64>, usize) {
    let mut f = vec![0.0; model.n_dofs()];
    let mut yielded = 0;
    let disp = |node: usize, k: usize| model.dof(node, k).map_or(0.0, |g| d[g]);
    for el in model.elements() {
        let (a, b) = (&model.nodes()[el.node_i], &model.nodes()[el.node_j]);
        let l = (b.x - a.x).hypot(b.y - a.y);
        let (c, s) = ((b.x - a.x) / l, (b.y - a.y) / l);
        let strain = ((disp(el.node_j, 0) - disp(el.node_i, 0)) * c
            + (disp(el.node_j, 1) - disp(el.node_i, 1)) * s)
            / l;
        let MaterialSpec::Bilinear { e0, et, sigma_y } = el.material else {
            panic!("bilinear bars only")
        };
        let eps_y = sigma_y / e0;
        let stress = if strain.abs() <= eps_y {
            e0 * strain
        } else {
            yielded += 1;
            strain.signum() * (sigma_y + et * (strain.abs() - eps_y))
        };
        let axial = stress * el.section.area.unwrap();
        for (node, sign) in [(el.node_i, -1.0), (el.node_j, 1.0)] {
            for (k, dir) in [(0, c), (1, s)] {
                if let Some(g) = model.dof(node, k) {
                    f[g] += sign * axial * dir;
                }
            }
        }
    }
    (f, yielded)
}

#[test]
fn accepted_steps_satisfy_equilibrium_independently() {
    let model = bilinear_truss(4, 4, 5.0);
    let spec = default_additional_set(&model).unwrap();
    let p0 = model.load_vector();
    let opts = NonlinearOptions::default();
    for backend in Backend::ALL {
        let run = run_newton_raphson(&model, &p0, &spec, backend, &opts).unwrap();
        assert!(run.completed(), "{backend:?}: {:?}", run.failure);
        for (k, step) in run.steps.iter().enumerate() {
            assert_eq!(step.step, k + 1);
            assert!((step.lambda - (k + 1) as f64 / opts.n_steps as f64).abs() < 1e-15);
            let (f, yielded) = internal_forces(&model, &step.displacements);
            let target: Vec<f64> = p0.iter().map(|p| step.lambda * p).collect();
            let r: Vec<f64> = target.iter().zip(&f).map(|(t, f)| t - f).collect();
            assert!(
                norm(&r) / norm(&target) < opts.tol_outer,
                "{backend:?} step {}",
                step.step
            );
            assert_eq!(step.n_nle, yielded);
        }
        assert!(run.final_nle().unwrap() > 0);
    }
}

#[test]
fn backends_follow_the_same_path() {
    let model = bilinear_truss(6, 6, 5.0);
    let spec = default_additional_set(&model).unwrap();
    let p0 = model.load_vector();
    let opts = NonlinearOptions::default();
    let runs: Vec<_> = Backend::ALL
        .iter()
        .map(|&b| run_newton_raphson(&model, &p0, &spec, b, &opts).unwrap())
        .collect();
    for run in &runs[1..] {
        assert_eq!(run.steps.len(), runs[0].steps.len());
        for (a, b) in run.steps.iter().zip(&runs[0].steps) {
            assert!(relative_difference(&a.displacements, &b.displacements) <= 1e-6);
            assert_eq!(a.n_nle, b.n_nle);
        }
    }
    assert!(runs[2].steps.iter().all(|s| s.inner_iters >= s.outer_iters));
}

#[test]
fn high_yield_stress_is_linear() {
    let model = bilinear_truss(5, 5, 1e9);
    let spec = default_additional_set(&model).unwrap();
    let p0 = model.load_vector();
    let run = run_newton_raphson(
        &model,
        &p0,
        &spec,
        Backend::Sri,
        &NonlinearOptions::default(),
    )
    .unwrap();
    let elastic = model
        .with_uniform_material(MaterialSpec::Homogeneous { e: 2e5 })
        .unwrap();
    let linear = solve_conventional(&elastic).unwrap().displacements;
    let last = run.steps.last().unwrap();
    assert_eq!(last.n_nle, 0);
    assert!(relative_difference(&last.displacements, &linear) <= 1e-10);
    // one correction per step reaches equilibrium in the elastic range
    assert!(run.steps.iter().all(|s| s.outer_iters == 1));
}

#[test]
fn yielding_grows_with_load() {
    let model = bilinear_truss(5, 8, 5.0);
    let spec = default_additional_set(&model).unwrap();
    let run = run_newton_raphson(
        &model,
        &model.load_vector(),
        &spec,
        Backend::Regular,
        &NonlinearOptions::default(),
    )
    .unwrap();
    assert!(run.steps.windows(2).all(|w| w[1].n_nle >= w[0].n_nle));
}

#[test]
fn csv_history_layout() {
    let model = bilinear_truss(3, 3, 25.0);
    let spec = default_additional_set(&model).unwrap();
    let opts = NonlinearOptions {
        n_steps: 4,
        ..Default::default()
    };
    let run = run_newton_raphson(
        &model,
        &model.load_vector(),
        &spec,
        Backend::Reduction,
        &opts,
    )
    .unwrap();
    let (a, _) = model.reference_nodes().unwrap();
    let mut buf = Vec::new();
    run.write_csv(&model, &[(a, 0), (a, 1)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "step,lambda,node_id,dof,value,outer_iters,n_nle");
    assert_eq!(lines.len(), 1 + 4 * 2);
    assert!(lines[1].starts_with("1,0.25,"));
    assert!(run.write_csv(&model, &[(0, 0)], Vec::new()).is_err());
}

#[test]
fn invalid_inputs() {
    let model = bilinear_truss(3, 3, 25.0);
    let spec = default_additional_set(&model).unwrap();
    let p0 = model.load_vector();
    let opts = NonlinearOptions::default();
    assert!(run_newton_raphson(&model, &p0[1..], &spec, Backend::Regular, &opts).is_err());
    let zero_steps = NonlinearOptions { n_steps: 0, ..opts };
    assert!(run_newton_raphson(&model, &p0, &spec, Backend::Regular, &zero_steps).is_err());
    let softening = model
        .with_uniform_material(MaterialSpec::Bilinear {
            e0: 2e5,
            et: 0.0,
            sigma_y: 25.0,
        })
        .unwrap();
    assert!(run_newton_raphson(&softening, &p0, &spec, Backend::Regular, &opts).is_err());
}
