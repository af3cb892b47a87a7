//! Subcommand implementations. Every command builds all of its results
//! before writing, so a failed run leaves no partial files behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use reanalysis::{
    build_sri_preconditioner, costmodel::flops_at, make_partition, ratio_sweep, run_newton_raphson,
    solve_conventional, solve_fdp, solve_pcg_full, solve_sri, IterOptions, MaterialSpec, Method,
    ModelDocument, NonlinearOptions, NonlinearRun, PartitionSpec, SolveReport, StiffnessFactor,
    StructuralModel, SweepMode, SweepSpec,
};

use crate::config::{Precision, ScenarioConfig};
use crate::table::{fmt, io, writer, DisplacementRow, ResultTable, SummaryRow};
use crate::CliError;

/// Settings after command-line overrides.
#[derive(Debug, Clone)]
pub struct Settings {
    pub out: PathBuf,
    pub precision: Precision,
    pub repeat: usize,
    pub tol: f64,
}

impl Settings {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn generate(cfg: &ScenarioConfig, s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let (original, partition) = cfg.original()?;
    let modified = cfg.modified(&original)?;
    let doc = |model: StructuralModel| ModelDocument {
        model,
        partition: Some(partition.clone()),
    };
    let mut files = vec![(s.path("model.json"), json(&doc(original.clone()))?)];
    if let Some(m) = modified {
        files.push((s.path("modified.json"), json(&doc(m))?));
    }
    ensure_dir(&s.out)?;
    for (path, text) in &files {
        write_text(path, text)?;
    }
    println!(
        "{}: {} nodes, {} elements, {} free DOFs, {} additional elements",
        cfg.id,
        original.nodes().len(),
        original.elements().len(),
        original.n_dofs(),
        partition.additional_ids.len()
    );
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

fn json(doc: &ModelDocument) -> Result<String, CliError> {
    serde_json::to_string_pretty(doc).map_err(io)
}

/// Reporting points: configured, or every DOF of the two reference nodes.
fn points(cfg: &ScenarioConfig, model: &StructuralModel) -> Result<Vec<(usize, usize)>, CliError> {
    let pts = match &cfg.output.points {
        Some(p) => p.clone(),
        None => {
            let (a, b) = model.reference_nodes().ok_or_else(|| {
                CliError::Config("model has no reference nodes; set output.points".into())
            })?;
            [a, b]
                .into_iter()
                .flat_map(|n| (0..model.dofs_per_node()).map(move |d| (n, d)))
                .collect()
        }
    };
    for &(node, dof) in &pts {
        if model.dof(node, dof).is_none() {
            return Err(CliError::Config(format!(
                "point ({node}, {dof}) is not a free degree of freedom"
            )));
        }
    }
    Ok(pts)
}

struct Timed {
    report: SolveReport,
    times: Vec<f64>,
}

/// Runs every configured method on `target`, with `reference` supplying the
/// reusable data (partition, reduced preconditioner, `K₀` factor). Only the
/// per-structure work is timed.
fn run_methods(
    cfg: &ScenarioConfig,
    s: &Settings,
    reference: &StructuralModel,
    target: &StructuralModel,
    partition: &PartitionSpec,
) -> Result<(usize, usize, Vec<Timed>), CliError> {
    let methods = &cfg.solver.methods;
    let needs = |m: Method| methods.contains(&m);
    let opts = IterOptions {
        max_iter: cfg.solver.max_iter,
        ..IterOptions::with_tol(s.tol)
    };
    let p0 = make_partition(reference, partition)?;
    let precond = if needs(Method::Sri) {
        Some(build_sri_preconditioner(&p0)?)
    } else {
        None
    };
    let k0 = if needs(Method::Pcg) {
        Some(StiffnessFactor::new(reference)?)
    } else {
        None
    };
    let r = target.load_vector();
    let solve_once = |m: Method| -> Result<SolveReport, CliError> {
        Ok(match m {
            Method::Conventional => solve_conventional(target)?,
            Method::Fdp => solve_fdp(&p0.reparameterize(target)?, &r)?,
            Method::Sri => solve_sri(
                &p0.reparameterize(target)?,
                &r,
                precond.as_ref().unwrap(),
                &opts,
            )?,
            Method::Pcg => solve_pcg_full(target, k0.as_ref().unwrap(), &opts)?,
        })
    };
    let mut out: Vec<Option<Timed>> = methods.iter().map(|_| None).collect();
    // repeats are interleaved so drift affects every method alike
    for _ in 0..s.repeat {
        for (slot, &m) in out.iter_mut().zip(methods) {
            let start = Instant::now();
            let report = solve_once(m)?;
            let t = start.elapsed().as_secs_f64();
            match slot {
                Some(timed) => {
                    timed.times.push(t);
                    timed.report = report;
                }
                None => {
                    *slot = Some(Timed {
                        report,
                        times: vec![t],
                    })
                }
            }
        }
    }
    Ok((
        p0.n(),
        p0.q(),
        out.into_iter().map(Option::unwrap).collect(),
    ))
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn build_table(
    cfg: &ScenarioConfig,
    target: &StructuralModel,
    n: usize,
    q: usize,
    runs: &[Timed],
) -> Result<ResultTable, CliError> {
    let pts = points(cfg, target)?;
    let t_conv = runs
        .iter()
        .find(|t| t.report.method == Method::Conventional)
        .map(|t| median(&t.times));
    let mut table = ResultTable::default();
    for t in runs {
        let rep = &t.report;
        for &(node, dof) in &pts {
            table.displacements.push(DisplacementRow {
                scenario: cfg.id.clone(),
                method: rep.method,
                node,
                dof,
                value: rep.displacements[target.dof(node, dof).expect("checked")],
            });
        }
        let time = median(&t.times);
        let rct = t_conv
            .map(|tc| reanalysis::relative_time(time, tc))
            .transpose()?;
        table.summary.push(SummaryRow {
            scenario: cfg.id.clone(),
            method: rep.method,
            n,
            q,
            iterations: rep.iterations,
            converged: rep.converged,
            flops: rep.flops_estimate,
            time,
            time_min: t.times.iter().copied().fold(f64::INFINITY, f64::min),
            time_max: t.times.iter().copied().fold(0.0, f64::max),
            repeat: t.times.len(),
            rct,
        });
    }
    table.sort();
    Ok(table)
}

/// Analyses one structure with every method, each using the structure
/// itself as reference. The configured modification, if any, is applied first.
pub fn solve(cfg: &ScenarioConfig, s: &Settings) -> Result<ResultTable, CliError> {
    let (original, partition) = cfg.original()?;
    let target = cfg.modified(&original)?.unwrap_or(original);
    let (n, q, runs) = run_methods(cfg, s, &target, &target, &partition)?;
    finish(cfg, s, &target, n, q, &runs)
}

/// Original structure as reference, modified structure as target.
pub fn reanalyze(cfg: &ScenarioConfig, s: &Settings) -> Result<ResultTable, CliError> {
    let (original, partition) = cfg.original()?;
    let modified = cfg
        .modified(&original)?
        .ok_or_else(|| CliError::Config("reanalyze needs a modification block".into()))?;
    let (n, q, runs) = run_methods(cfg, s, &original, &modified, &partition)?;
    finish(cfg, s, &modified, n, q, &runs)
}

fn finish(
    cfg: &ScenarioConfig,
    s: &Settings,
    target: &StructuralModel,
    n: usize,
    q: usize,
    runs: &[Timed],
) -> Result<ResultTable, CliError> {
    let table = build_table(cfg, target, n, q, runs)?;
    ensure_dir(&s.out)?;
    table.write_displacements(&s.path("displacements.csv"), s.precision)?;
    table.write_summary(&s.path("summary.csv"), s.precision)?;
    for r in &table.summary {
        if !r.converged {
            eprintln!(
                "warning: {} did not converge in {} iterations",
                r.method, r.iterations
            );
        }
    }
    Ok(table)
}

/// Timing-only campaign: reanalysis when a modification is configured,
/// otherwise a plain solve; writes `bench.csv`.
pub fn bench(cfg: &ScenarioConfig, s: &Settings) -> Result<ResultTable, CliError> {
    let (original, partition) = cfg.original()?;
    let (reference, target) = match cfg.modified(&original)? {
        Some(m) => (original, m),
        None => (original.clone(), original),
    };
    let (n, q, runs) = run_methods(cfg, s, &reference, &target, &partition)?;
    let table = build_table(cfg, &target, n, q, &runs)?;
    ensure_dir(&s.out)?;
    table.write_summary(&s.path("bench.csv"), s.precision)?;
    for r in &table.summary {
        println!(
            "{:<13} median {:.3e} s over {}  rct {}",
            r.method.name(),
            r.time,
            r.repeat,
            r.rct.map_or("-".into(), |x| format!("{x:.3}"))
        );
    }
    Ok(table)
}

fn mode_name(m: SweepMode) -> &'static str {
    match m {
        SweepMode::SriVsPcg => "sri_vs_pcg",
        SweepMode::SriVsFdp => "sri_vs_fdp",
    }
}

/// Cost-ratio sweeps and single-point queries. Without a `flops` block both
/// default sweeps are produced.
pub fn flops(cfg: Option<&ScenarioConfig>, s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let block = cfg.and_then(|c| c.flops.clone());
    let (sweeps, queries) = match block {
        Some(b) => (
            b.sweeps
                .iter()
                .map(|sw| {
                    let d = SweepSpec::default_for(sw.mode);
                    SweepSpec {
                        mode: sw.mode,
                        n: sw.n.unwrap_or(d.n),
                        axis_min: sw.axis_min.unwrap_or(d.axis_min),
                        axis_max: sw.axis_max.unwrap_or(d.axis_max),
                        points: sw.points.unwrap_or(d.points),
                        labels: sw.labels.clone().unwrap_or(d.labels),
                    }
                })
                .collect(),
            b.points,
        ),
        None => (
            vec![
                SweepSpec::default_for(SweepMode::SriVsPcg),
                SweepSpec::default_for(SweepMode::SriVsFdp),
            ],
            Vec::new(),
        ),
    };
    let mut results = Vec::new();
    for spec in &sweeps {
        results.push(ratio_sweep(spec)?);
    }
    let mut rows = Vec::new();
    for p in &queries {
        if p.n == 0 || !(p.x > 0.0 && p.x <= 1.0) || !(p.label > 0.0 && p.label <= 1.0) {
            return Err(CliError::Config(format!("flops point out of range: {p:?}")));
        }
        let (sri, other) = flops_at(p.mode, p.n, p.x, p.label);
        rows.push((p, sri, other, sri as f64 / other as f64));
    }

    ensure_dir(&s.out)?;
    let mut written = Vec::new();
    for (i, sweep) in results.iter().enumerate() {
        let name = if results.iter().filter(|r| r.mode == sweep.mode).count() > 1 {
            format!("flops_{}_{i}.csv", mode_name(sweep.mode))
        } else {
            format!("flops_{}.csv", mode_name(sweep.mode))
        };
        let path = s.path(&name);
        let mut w = writer(&path)?;
        w.write_record(["n", "x", "series_label", "ratio"])
            .map_err(io)?;
        for series in &sweep.series {
            for (x, r) in sweep.axis.iter().zip(&series.ratios) {
                w.write_record([
                    sweep.n.to_string(),
                    fmt(*x, s.precision),
                    series.label.to_string(),
                    fmt(*r, s.precision),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
        written.push(path);
    }
    if !rows.is_empty() {
        let path = s.path("flops_points.csv");
        let mut w = writer(&path)?;
        w.write_record([
            "mode",
            "n",
            "x",
            "label",
            "flops_sri",
            "flops_other",
            "ratio",
        ])
        .map_err(io)?;
        for (p, sri, other, ratio) in rows {
            w.write_record([
                mode_name(p.mode).to_string(),
                p.n.to_string(),
                p.x.to_string(),
                p.label.to_string(),
                sri.to_string(),
                other.to_string(),
                fmt(ratio, s.precision),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
        written.push(path);
    }
    Ok(written)
}

/// Load-controlled runs for every configured yield stress and backend.
pub fn nonlinear(cfg: &ScenarioConfig, s: &Settings) -> Result<Vec<NonlinearRun>, CliError> {
    let nl = cfg
        .nonlinear
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no nonlinear block".into()))?;
    let (base, partition) = cfg.original()?;
    let mut opts = NonlinearOptions {
        n_steps: nl.n_steps,
        ..NonlinearOptions::default()
    };
    if let Some(t) = nl.tol_outer {
        opts.tol_outer = t;
    }
    if let Some(t) = nl.tol_inner {
        opts.tol_inner = t;
    }
    if let Some(m) = nl.max_outer {
        opts.max_outer = m;
    }
    let mut runs = Vec::new();
    let mut histories = Vec::new();
    for &sigma_y in &nl.sigma_y {
        let model = base.with_uniform_material(MaterialSpec::Bilinear {
            e0: nl.e0,
            et: nl.et,
            sigma_y,
        })?;
        let model = cfg.modified(&model)?.unwrap_or(model);
        let pts = match &cfg.output.points {
            Some(_) => points(cfg, &model)?,
            None => {
                let (_, b) = model.reference_nodes().ok_or_else(|| {
                    CliError::Config("model has no reference nodes; set output.points".into())
                })?;
                vec![(b, 0)]
            }
        };
        let p0 = model.load_vector();
        for &backend in &nl.backends {
            let run = run_newton_raphson(&model, &p0, &partition, backend, &opts)?;
            if let Some(f) = &run.failure {
                eprintln!(
                    "warning: sigma_y={sigma_y} {}: step {} failed: {}",
                    backend.name(),
                    f.step,
                    f.message
                );
            }
            histories.push((sigma_y, model.clone(), pts.clone(), runs.len()));
            runs.push(run);
        }
    }

    ensure_dir(&s.out)?;
    let mut w = writer(&s.path("nonlinear.csv"))?;
    w.write_record([
        "sigma_y",
        "backend",
        "step",
        "lambda",
        "node",
        "dof",
        "value",
        "outer_iters",
        "n_nle",
        "status",
    ])
    .map_err(io)?;
    for (sigma_y, model, pts, i) in &histories {
        let run = &runs[*i];
        for st in &run.steps {
            for &(node, dof) in pts {
                let g = model.dof(node, dof).expect("checked");
                w.write_record([
                    sigma_y.to_string(),
                    run.backend.name().to_string(),
                    st.step.to_string(),
                    st.lambda.to_string(),
                    node.to_string(),
                    dof.to_string(),
                    fmt(st.displacements[g], s.precision),
                    st.outer_iters.to_string(),
                    st.n_nle.to_string(),
                    "ok".to_string(),
                ])
                .map_err(io)?;
            }
        }
        if let Some(f) = &run.failure {
            w.write_record([
                sigma_y.to_string(),
                run.backend.name().to_string(),
                f.step.to_string(),
                f.lambda.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "failed".to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)?;

    let mut w = writer(&s.path("nonlinear_summary.csv"))?;
    w.write_record([
        "sigma_y",
        "backend",
        "steps",
        "completed",
        "n_nle",
        "outer_iters",
        "time_s",
    ])
    .map_err(io)?;
    for (sigma_y, _, _, i) in &histories {
        let run = &runs[*i];
        let outer: usize = run.steps.iter().map(|st| st.outer_iters).sum();
        w.write_record([
            sigma_y.to_string(),
            run.backend.name().to_string(),
            run.steps.len().to_string(),
            run.completed().to_string(),
            run.final_nle().map(|n| n.to_string()).unwrap_or_default(),
            outer.to_string(),
            fmt(run.wall_time.as_secs_f64(), s.precision),
        ])
        .map_err(io)?;
        println!(
            "sigma_y={sigma_y:<8} {:<10} steps {:>3}  N_NLE {}",
            run.backend.name(),
            run.steps.len(),
            run.final_nle().map_or("-".into(), |n| n.to_string())
        );
    }
    w.flush().map_err(io)?;
    Ok(runs)
}
