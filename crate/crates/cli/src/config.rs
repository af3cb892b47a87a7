//! Scenario configuration read from JSON.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use reanalysis::{
    spans_from_level, Backend, FrameGrid, GradingTarget, MaterialSpec, Method, ModelDocument,
    PartitionSpec, StructuralModel, SweepMode, TrussGrid,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub model: Option<ModelSource>,
    pub modification: Option<Modification>,
    pub partition: Option<PartitionChoice>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default = "default_repeat")]
    pub repeat: usize,
    pub flops: Option<FlopsBlock>,
    pub nonlinear: Option<NonlinearBlock>,
}

fn default_id() -> String {
    "scenario".into()
}

fn default_repeat() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Truss {
        /// Spans as `2^level - 1`; alternative to `n_span`.
        level: Option<i64>,
        n_span: Option<usize>,
        /// Free node count; alternative to `n_floor`.
        n_node: Option<usize>,
        n_floor: Option<usize>,
        span: Option<f64>,
        height: Option<f64>,
        area: Option<f64>,
        load: Option<f64>,
        material: Option<MaterialSpec>,
    },
    Frame {
        n_span: usize,
        n_floor: usize,
        #[serde(default = "one")]
        n_sb: usize,
        #[serde(default = "one")]
        n_sc: usize,
        span: Option<f64>,
        height: Option<f64>,
        width: Option<f64>,
        depth: Option<f64>,
        load: Option<f64>,
        material: Option<MaterialSpec>,
    },
    /// A model document previously written by `generate`.
    File { path: PathBuf },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modification {
    pub e_l: f64,
    pub e_u: f64,
    #[serde(default = "default_target")]
    pub target: GradingTarget,
}

fn default_target() -> GradingTarget {
    GradingTarget::Modulus
}

/// `"default"` or an explicit additional-element list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PartitionChoice {
    Named(DefaultKeyword),
    Explicit { additional_ids: BTreeSet<usize> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultKeyword {
    Default,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            methods: all_methods(),
            tol: default_tol(),
            max_iter: None,
        }
    }
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// Seven significant digits.
    #[default]
    Table,
    /// Shortest representation that round-trips.
    Full,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub precision: Precision,
    /// `(node, local dof)` pairs to report; defaults to every DOF of the
    /// two reference nodes.
    pub points: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlopsBlock {
    #[serde(default)]
    pub sweeps: Vec<SweepBlock>,
    #[serde(default)]
    pub points: Vec<FlopsPoint>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub mode: SweepMode,
    pub n: Option<u64>,
    pub axis_min: Option<f64>,
    pub axis_max: Option<f64>,
    pub points: Option<usize>,
    pub labels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlopsPoint {
    pub mode: SweepMode,
    pub n: u64,
    pub x: f64,
    pub label: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearBlock {
    pub sigma_y: Vec<f64>,
    #[serde(default = "default_e0")]
    pub e0: f64,
    #[serde(default = "default_et")]
    pub et: f64,
    #[serde(default = "all_backends")]
    pub backends: Vec<Backend>,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    pub tol_outer: Option<f64>,
    pub tol_inner: Option<f64>,
    pub max_outer: Option<usize>,
}

fn default_e0() -> f64 {
    2e5
}

fn default_et() -> f64 {
    0.3e5
}

fn all_backends() -> Vec<Backend> {
    Backend::ALL.to_vec()
}

fn default_steps() -> usize {
    20
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.repeat == 0 {
            return bad("repeat must be at least 1".into());
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return bad(format!(
                "solver.tol must lie in (0, 1), got {}",
                self.solver.tol
            ));
        }
        if self.solver.methods.is_empty() {
            return bad("solver.methods is empty".into());
        }
        if let Some(Modification { e_l, e_u, .. }) = self.modification {
            if !(e_l > 0.0 && e_u > 0.0) {
                return bad("modification moduli must be positive".into());
            }
        }
        if let Some(ModelSource::Truss {
            level,
            n_span,
            n_node,
            n_floor,
            ..
        }) = &self.model
        {
            if level.is_some() == n_span.is_some() {
                return bad("truss model needs exactly one of level, n_span".into());
            }
            if n_node.is_some() == n_floor.is_some() {
                return bad("truss model needs exactly one of n_node, n_floor".into());
            }
        }
        if let Some(nl) = &self.nonlinear {
            if nl.sigma_y.is_empty() || nl.backends.is_empty() {
                return bad("nonlinear.sigma_y and nonlinear.backends must be non-empty".into());
            }
        }
        Ok(())
    }

    /// Builds or loads the original model and its partition.
    pub fn original(&self) -> Result<(StructuralModel, PartitionSpec), CliError> {
        let source = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no model block".into()))?;
        let (model, stored) = match source {
            ModelSource::Truss {
                level,
                n_span,
                n_node,
                n_floor,
                span,
                height,
                area,
                load,
                material,
            } => {
                let n_span = match (level, n_span) {
                    (Some(a), _) => {
                        spans_from_level(*a).map_err(|e| CliError::Config(e.to_string()))?
                    }
                    (_, Some(s)) => *s,
                    _ => unreachable!("validated"),
                };
                let n_floor = match (n_node, n_floor) {
                    (Some(nodes), _) => {
                        if nodes % (n_span + 1) != 0 {
                            return Err(CliError::Config(format!(
                                "n_node {nodes} is not a multiple of n_span + 1 = {}",
                                n_span + 1
                            )));
                        }
                        nodes / (n_span + 1)
                    }
                    (_, Some(f)) => *f,
                    _ => unreachable!("validated"),
                };
                let mut g = TrussGrid::new(n_span, n_floor);
                set(&mut g.span, span);
                set(&mut g.height, height);
                set(&mut g.area, area);
                set(&mut g.load, load);
                set(&mut g.material, material);
                (g.build()?, None)
            }
            ModelSource::Frame {
                n_span,
                n_floor,
                n_sb,
                n_sc,
                span,
                height,
                width,
                depth,
                load,
                material,
            } => {
                let mut g = FrameGrid::new(*n_span, *n_floor, *n_sb);
                g.n_sc = *n_sc;
                set(&mut g.span, span);
                set(&mut g.height, height);
                set(&mut g.width, width);
                set(&mut g.depth, depth);
                set(&mut g.load, load);
                set(&mut g.material, material);
                (g.build()?, None)
            }
            ModelSource::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                let doc: ModelDocument = serde_json::from_str(&text)
                    .map_err(|e| CliError::Model(reanalysis::Error::InvalidModel(e.to_string())))?;
                (doc.model, doc.partition)
            }
        };
        let partition = match (&self.partition, stored) {
            (Some(PartitionChoice::Explicit { additional_ids }), _) => {
                let known: BTreeSet<usize> = model.elements().iter().map(|e| e.id).collect();
                if let Some(id) = additional_ids.iter().find(|id| !known.contains(id)) {
                    return Err(CliError::Config(format!(
                        "partition references unknown element {id}"
                    )));
                }
                PartitionSpec::new(additional_ids.iter().copied())
            }
            (None, Some(p)) => p,
            _ => reanalysis::default_additional_set(&model)?,
        };
        Ok((model, partition))
    }

    /// The modified structure, or `None` when no modification is configured.
    pub fn modified(
        &self,
        original: &StructuralModel,
    ) -> Result<Option<StructuralModel>, CliError> {
        self.modification
            .as_ref()
            .map(|m| {
                reanalysis::apply_floor_grading(original, m.e_l, m.e_u, m.target)
                    .map_err(CliError::Model)
            })
            .transpose()
    }
}

fn set<T: Copy>(slot: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *slot = *v;
    }
}
