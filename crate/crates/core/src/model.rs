//! Structural data model and the parametric truss / frame generators.
//!
//! Node ids and element ids are dense and start at zero. Free DOFs are
//! numbered in node-id order; constrained DOFs are eliminated from the
//! global system rather than penalised.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    TrussBar,
    HomogeneousBeam,
    FgBeam,
}

impl ElementKind {
    /// Number of independent stiffness parameters (element DOFs minus the
    /// three planar rigid-body modes).
    pub fn mode_count(self) -> usize {
        match self {
            ElementKind::TrussBar => 1,
            ElementKind::HomogeneousBeam | ElementKind::FgBeam => 3,
        }
    }

    pub fn dofs_per_node(self) -> usize {
        match self {
            ElementKind::TrussBar => 2,
            ElementKind::HomogeneousBeam | ElementKind::FgBeam => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    Chord,
    Vertical,
    Diagonal,
    Column,
    BeamSegment,
}

/// Where a member sits in a generated grid.
///
/// `floor` is 1-based from the bottom. For verticals and columns `span`
/// holds the 0-based column line; for chords, diagonals and beam segments
/// it is the 1-based span counted from the left. `segment` is 1-based
/// along the member (left to right for beams, bottom to top for columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemberTag {
    pub kind: MemberKind,
    pub floor: usize,
    pub span: usize,
    pub segment: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SectionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

impl SectionSpec {
    pub fn bar(area: f64) -> Self {
        SectionSpec {
            area: Some(area),
            ..Default::default()
        }
    }

    /// Rectangular section carrying both representations (A = bh, I = bh³/12).
    pub fn rectangle(width: f64, height: f64) -> Self {
        SectionSpec {
            area: Some(width * height),
            inertia: Some(width * height.powi(3) / 12.0),
            width: Some(width),
            height: Some(height),
        }
    }

    fn validate(&self, kind: ElementKind) -> Result<()> {
        let positive = |name: &str, v: Option<f64>, required: bool| -> Result<()> {
            match v {
                Some(v) if !(v.is_finite() && v > 0.0) => Err(Error::InvalidParameter(format!(
                    "section {name} must be positive, got {v}"
                ))),
                None if required => Err(Error::InvalidParameter(format!(
                    "section {name} is required for {kind:?}"
                ))),
                _ => Ok(()),
            }
        };
        let beam = kind == ElementKind::HomogeneousBeam;
        let fg = kind == ElementKind::FgBeam;
        positive("area", self.area, !fg)?;
        positive("inertia", self.inertia, beam)?;
        positive("width", self.width, fg)?;
        positive("height", self.height, fg)?;
        if let (Some(b), Some(h)) = (self.width, self.height) {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
            if let Some(a) = self.area {
                if !close(a, b * h) {
                    return Err(Error::InvalidParameter(format!(
                        "section area {a} disagrees with b*h = {}",
                        b * h
                    )));
                }
            }
            if let Some(i) = self.inertia {
                if !close(i, b * h.powi(3) / 12.0) {
                    return Err(Error::InvalidParameter(format!(
                        "section inertia {i} disagrees with b*h^3/12 = {}",
                        b * h.powi(3) / 12.0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How the section moments of a graded beam are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgMoments {
    /// Published closed form. Its first moment `B_E` lacks the factor `p` of
    /// the exact integral, so the two rules differ unless `p = 1` or
    /// `E_US = E_LS`. `A_E` and `D_E` are the same in both.
    #[default]
    Published,
    /// Exact moments of the power-law modulus.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MaterialSpec {
    Homogeneous {
        e: f64,
    },
    /// Power-law graded through the depth; `e_us` at the +y local surface.
    Graded {
        e_us: f64,
        e_ls: f64,
        p: f64,
        #[serde(default)]
        moments: FgMoments,
    },
    Bilinear {
        e0: f64,
        et: f64,
        sigma_y: f64,
    },
}

impl MaterialSpec {
    /// Modulus used for the linear (elastic) stiffness.
    pub fn elastic_modulus(&self) -> Option<f64> {
        match *self {
            MaterialSpec::Homogeneous { e } => Some(e),
            MaterialSpec::Bilinear { e0, .. } => Some(e0),
            MaterialSpec::Graded { .. } => None,
        }
    }

    fn validate(&self, kind: ElementKind) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidMaterial(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match (*self, kind) {
            (
                MaterialSpec::Homogeneous { e },
                ElementKind::TrussBar | ElementKind::HomogeneousBeam,
            ) => pos("E", e),
            (MaterialSpec::Bilinear { e0, et, sigma_y }, ElementKind::TrussBar) => {
                pos("E0", e0)?;
                pos("sigma_y", sigma_y)?;
                if !(et.is_finite() && et >= 0.0) {
                    return Err(Error::InvalidMaterial(format!(
                        "Et must be non-negative, got {et}"
                    )));
                }
                Ok(())
            }
            (MaterialSpec::Graded { e_us, e_ls, p, .. }, ElementKind::FgBeam) => {
                pos("E_US", e_us)?;
                pos("E_LS", e_ls)?;
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::InvalidMaterial(format!(
                        "p must be non-negative, got {p}"
                    )));
                }
                Ok(())
            }
            (m, k) => Err(Error::InvalidMaterial(format!(
                "{m:?} is not valid for {k:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub id: usize,
    pub kind: ElementKind,
    pub node_i: usize,
    pub node_j: usize,
    pub section: SectionSpec,
    pub material: MaterialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<MemberTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Support {
    pub node: usize,
    /// Constrained local DOFs (0 = x, 1 = y, 2 = rotation).
    pub dofs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalLoad {
    pub node: usize,
    pub dof: usize,
    pub value: f64,
}

/// Generator parameters retained on the model; needed for the default
/// partition and for locating the reporting nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridLayout {
    Truss {
        n_span: usize,
        n_floor: usize,
    },
    Frame {
        n_span: usize,
        n_floor: usize,
        n_sb: usize,
        n_sc: usize,
    },
}

impl GridLayout {
    pub fn n_floor(&self) -> usize {
        match *self {
            GridLayout::Truss { n_floor, .. } | GridLayout::Frame { n_floor, .. } => n_floor,
        }
    }

    pub fn n_span(&self) -> usize {
        match *self {
            GridLayout::Truss { n_span, .. } | GridLayout::Frame { n_span, .. } => n_span,
        }
    }
}

/// Serialized form of a model; the DOF map is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelData {
    pub dofs_per_node: usize,
    pub nodes: Vec<Node>,
    pub elements: Vec<ElementRecord>,
    pub supports: Vec<Support>,
    pub loads: Vec<NodalLoad>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<GridLayout>,
    /// Top-left and top-right free corner nodes (reporting nodes A and B).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_nodes: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    dofs_per_node: usize,
    nodes: Vec<Node>,
    elements: Vec<ElementRecord>,
    supports: Vec<Support>,
    loads: Vec<NodalLoad>,
    layout: Option<GridLayout>,
    reference_nodes: Option<(usize, usize)>,
    dof_map: Vec<Option<usize>>,
    n_free: usize,
}

impl Serialize for StructuralModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_data().serialize(s)
    }
}

impl<'de> Deserialize<'de> for StructuralModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = ModelData::deserialize(d)?;
        StructuralModel::from_data(data).map_err(serde::de::Error::custom)
    }
}

impl StructuralModel {
    pub fn from_data(data: ModelData) -> Result<Self> {
        let ModelData {
            dofs_per_node,
            nodes,
            elements,
            supports,
            loads,
            layout,
            reference_nodes,
        } = data;
        if !(dofs_per_node == 2 || dofs_per_node == 3) {
            return Err(Error::InvalidModel(format!(
                "dofs_per_node must be 2 or 3, got {dofs_per_node}"
            )));
        }
        for (k, node) in nodes.iter().enumerate() {
            if node.id != k {
                return Err(Error::InvalidModel(format!(
                    "node ids must be dense, found {} at {k}",
                    node.id
                )));
            }
            if !(node.x.is_finite() && node.y.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "node {k} has non-finite coordinates"
                )));
            }
        }
        for (k, el) in elements.iter().enumerate() {
            if el.id != k {
                return Err(Error::InvalidModel(format!(
                    "element ids must be dense, found {} at {k}",
                    el.id
                )));
            }
            if el.node_i >= nodes.len() || el.node_j >= nodes.len() {
                return Err(Error::InvalidModel(format!(
                    "element {k} references a missing node"
                )));
            }
            if el.node_i == el.node_j {
                return Err(Error::DegenerateElement {
                    element: k,
                    length: 0.0,
                });
            }
            if el.kind.dofs_per_node() != dofs_per_node {
                return Err(Error::InvalidModel(format!(
                    "element {k} ({:?}) does not fit a model with {dofs_per_node} DOFs per node",
                    el.kind
                )));
            }
            let (a, b) = (nodes[el.node_i], nodes[el.node_j]);
            let length = (b.x - a.x).hypot(b.y - a.y);
            if !(length > 0.0) {
                return Err(Error::DegenerateElement { element: k, length });
            }
            el.section.validate(el.kind)?;
            el.material.validate(el.kind)?;
        }

        let mut constrained = vec![false; nodes.len() * dofs_per_node];
        for s in &supports {
            if s.node >= nodes.len() {
                return Err(Error::InvalidModel(format!(
                    "support on missing node {}",
                    s.node
                )));
            }
            for &d in &s.dofs {
                if d >= dofs_per_node {
                    return Err(Error::InvalidModel(format!("support dof {d} out of range")));
                }
                constrained[s.node * dofs_per_node + d] = true;
            }
        }
        let mut n_free = 0;
        let dof_map: Vec<Option<usize>> = constrained
            .iter()
            .map(|&c| {
                if c {
                    None
                } else {
                    n_free += 1;
                    Some(n_free - 1)
                }
            })
            .collect();

        for l in &loads {
            let slot = l.node.checked_mul(dofs_per_node).map(|s| s + l.dof);
            match slot.and_then(|s| dof_map.get(s).copied()).flatten() {
                Some(_) if l.dof < dofs_per_node && l.value.is_finite() => {}
                _ => {
                    return Err(Error::InvalidModel(format!(
                        "load on node {} dof {} does not address a free DOF",
                        l.node, l.dof
                    )))
                }
            }
        }

        let model = StructuralModel {
            dofs_per_node,
            nodes,
            elements,
            supports,
            loads,
            layout,
            reference_nodes,
            dof_map,
            n_free,
        };
        model.check_connected()?;
        Ok(model)
    }

    fn check_connected(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidModel("model has no nodes".into()));
        }
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for el in &self.elements {
            let (a, b) = (find(&mut parent, el.node_i), find(&mut parent, el.node_j));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        if (1..self.nodes.len()).any(|k| find(&mut parent, k) != root) {
            return Err(Error::InvalidModel("model is not connected".into()));
        }
        Ok(())
    }

    pub fn to_data(&self) -> ModelData {
        ModelData {
            dofs_per_node: self.dofs_per_node,
            nodes: self.nodes.clone(),
            elements: self.elements.clone(),
            supports: self.supports.clone(),
            loads: self.loads.clone(),
            layout: self.layout,
            reference_nodes: self.reference_nodes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn elements(&self) -> &[ElementRecord] {
        &self.elements
    }

    pub fn supports(&self) -> &[Support] {
        &self.supports
    }

    pub fn loads(&self) -> &[NodalLoad] {
        &self.loads
    }

    pub fn layout(&self) -> Option<GridLayout> {
        self.layout
    }

    /// Top-left (A) and top-right (B) free corner nodes of a generated grid.
    pub fn reference_nodes(&self) -> Option<(usize, usize)> {
        self.reference_nodes
    }

    pub fn dofs_per_node(&self) -> usize {
        self.dofs_per_node
    }

    /// Number of free DOFs.
    pub fn n_dofs(&self) -> usize {
        self.n_free
    }

    /// Global index of a node DOF, `None` if constrained.
    pub fn dof(&self, node: usize, local: usize) -> Option<usize> {
        if local >= self.dofs_per_node {
            return None;
        }
        self.dof_map
            .get(node * self.dofs_per_node + local)
            .copied()
            .flatten()
    }

    /// Global indices of the element's DOFs in (i, j) order.
    pub fn element_dofs(&self, el: &ElementRecord) -> Vec<Option<usize>> {
        let d = self.dofs_per_node;
        (0..d)
            .map(|k| self.dof(el.node_i, k))
            .chain((0..d).map(|k| self.dof(el.node_j, k)))
            .collect()
    }

    /// Length and orientation angle (radians, from node i to node j).
    pub fn element_geometry(&self, el: &ElementRecord) -> (f64, f64) {
        let (a, b) = (self.nodes[el.node_i], self.nodes[el.node_j]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        (dx.hypot(dy), dy.atan2(dx))
    }

    /// Assembled nodal load vector over the free DOFs.
    pub fn load_vector(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n_free];
        for l in &self.loads {
            if let Some(k) = self.dof(l.node, l.dof) {
                r[k] += l.value;
            }
        }
        r
    }

    pub fn total_parameter_count(&self) -> usize {
        self.elements.iter().map(|e| e.kind.mode_count()).sum()
    }

    pub fn with_elements(&self, elements: Vec<ElementRecord>) -> Result<Self> {
        let mut data = self.to_data();
        data.elements = elements;
        Self::from_data(data)
    }

    pub fn with_loads(&self, loads: Vec<NodalLoad>) -> Result<Self> {
        let mut data = self.to_data();
        data.loads = loads;
        Self::from_data(data)
    }

    /// Replace every element's material with `material`.
    pub fn with_uniform_material(&self, material: MaterialSpec) -> Result<Self> {
        let elements = self
            .elements
            .iter()
            .map(|e| ElementRecord { material, ..*e })
            .collect();
        self.with_elements(elements)
    }

    fn floor_count(&self) -> usize {
        self.layout.map(|l| l.n_floor()).unwrap_or_else(|| {
            self.elements
                .iter()
                .filter_map(|e| e.tag.map(|t| t.floor))
                .max()
                .unwrap_or(0)
        })
    }
}

/// The set of elements removed from the basis system (ADDSYS).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub additional_ids: BTreeSet<usize>,
}

impl PartitionSpec {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Self {
        PartitionSpec {
            additional_ids: ids.into_iter().collect(),
        }
    }

    pub fn is_additional(&self, id: usize) -> bool {
        self.additional_ids.contains(&id)
    }
}

/// A model bundled with its partition, as written by `generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub model: StructuralModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
}

/// `2^a - 1` spans for the truss scale parameter `a`.
pub fn spans_from_level(a: i64) -> Result<usize> {
    if !(1..=62).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "level a must be in 1..=62, got {a}"
        )));
    }
    Ok((1usize << a) - 1)
}

fn require_count(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidParameter(format!(
            "{name} must be at least 1"
        )))
    } else {
        Ok(())
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Braced truss tower: one diagonal per panel, lower-left to upper-right,
/// pinned base, horizontal load on every free left-edge node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrussGrid {
    pub n_span: usize,
    pub n_floor: usize,
    pub span: f64,
    pub height: f64,
    pub area: f64,
    pub material: MaterialSpec,
    pub load: f64,
}

impl TrussGrid {
    pub fn new(n_span: usize, n_floor: usize) -> Self {
        TrussGrid {
            n_span,
            n_floor,
            span: 500.0,
            height: 500.0,
            area: 20.0,
            material: MaterialSpec::Homogeneous { e: 20000.0 },
            load: 20.0,
        }
    }

    pub fn build(&self) -> Result<StructuralModel> {
        build_truss_grid(self)
    }
}

pub fn build_truss_grid(g: &TrussGrid) -> Result<StructuralModel> {
    require_count("n_span", g.n_span)?;
    require_count("n_floor", g.n_floor)?;
    require_positive("span", g.span)?;
    require_positive("height", g.height)?;
    require_positive("area", g.area)?;
    require_positive("load", g.load)?;
    let cols = g.n_span + 1;
    let id = |i: usize, j: usize| j * cols + i;

    let mut nodes = Vec::with_capacity(cols * (g.n_floor + 1));
    for j in 0..=g.n_floor {
        for i in 0..cols {
            nodes.push(Node {
                id: id(i, j),
                x: i as f64 * g.span,
                y: j as f64 * g.height,
            });
        }
    }

    let section = SectionSpec::bar(g.area);
    let mut elements = Vec::with_capacity(g.n_floor * (3 * g.n_span + 1));
    let mut push = |node_i, node_j, kind, floor, span| {
        let eid = elements.len();
        elements.push(ElementRecord {
            id: eid,
            kind: ElementKind::TrussBar,
            node_i,
            node_j,
            section,
            material: g.material,
            tag: Some(MemberTag {
                kind,
                floor,
                span,
                segment: 1,
            }),
        });
    };
    for f in 1..=g.n_floor {
        for i in 0..cols {
            push(id(i, f - 1), id(i, f), MemberKind::Vertical, f, i);
        }
        for s in 1..=g.n_span {
            push(id(s - 1, f), id(s, f), MemberKind::Chord, f, s);
        }
        for s in 1..=g.n_span {
            push(id(s - 1, f - 1), id(s, f), MemberKind::Diagonal, f, s);
        }
    }

    let supports = (0..cols)
        .map(|i| Support {
            node: id(i, 0),
            dofs: vec![0, 1],
        })
        .collect();
    let loads = (1..=g.n_floor)
        .map(|j| NodalLoad {
            node: id(0, j),
            dof: 0,
            value: g.load,
        })
        .collect();

    StructuralModel::from_data(ModelData {
        dofs_per_node: 2,
        nodes,
        elements,
        supports,
        loads,
        layout: Some(GridLayout::Truss {
            n_span: g.n_span,
            n_floor: g.n_floor,
        }),
        reference_nodes: Some((id(0, g.n_floor), id(g.n_span, g.n_floor))),
    })
}

/// Portal-frame grid with fixed base. Each beam is split into `n_sb`
/// elements and each column into `n_sc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    pub n_span: usize,
    pub n_floor: usize,
    pub n_sb: usize,
    pub n_sc: usize,
    pub span: f64,
    pub height: f64,
    pub width: f64,
    pub depth: f64,
    pub material: MaterialSpec,
    pub load: f64,
}

impl FrameGrid {
    /// 10 cm x 30 cm homogeneous section, E = 20000, P = 20, single-element columns.
    pub fn new(n_span: usize, n_floor: usize, n_sb: usize) -> Self {
        FrameGrid {
            n_span,
            n_floor,
            n_sb,
            n_sc: 1,
            span: 500.0,
            height: 500.0,
            width: 10.0,
            depth: 30.0,
            material: MaterialSpec::Homogeneous { e: 20000.0 },
            load: 20.0,
        }
    }

    /// Functionally graded variant: 8 elements per member, E_US = E_LS = 20000, p = 1.
    pub fn graded(n_span: usize, n_floor: usize) -> Self {
        FrameGrid {
            n_sb: 8,
            n_sc: 8,
            material: MaterialSpec::Graded {
                e_us: 20000.0,
                e_ls: 20000.0,
                p: 1.0,
                moments: FgMoments::Published,
            },
            ..FrameGrid::new(n_span, n_floor, 8)
        }
    }

    pub fn build(&self) -> Result<StructuralModel> {
        build_frame_grid(self)
    }

    /// Free node count `n_floor·((n_span+1) + (n_sb−1)·n_span + (n_sc−1)·(n_span+1))`.
    pub fn free_node_count(&self) -> usize {
        let cols = self.n_span + 1;
        self.n_floor * (cols + (self.n_sb - 1) * self.n_span + (self.n_sc - 1) * cols)
    }
}

pub fn build_frame_grid(g: &FrameGrid) -> Result<StructuralModel> {
    require_count("n_span", g.n_span)?;
    require_count("n_floor", g.n_floor)?;
    require_count("n_sb", g.n_sb)?;
    require_count("n_sc", g.n_sc)?;
    require_positive("span", g.span)?;
    require_positive("height", g.height)?;
    require_positive("width", g.width)?;
    require_positive("depth", g.depth)?;
    require_positive("load", g.load)?;
    let kind = match g.material {
        MaterialSpec::Homogeneous { .. } => ElementKind::HomogeneousBeam,
        MaterialSpec::Graded { .. } => ElementKind::FgBeam,
        MaterialSpec::Bilinear { .. } => {
            return Err(Error::InvalidParameter(
                "frames do not support bilinear material".into(),
            ))
        }
    };
    let cols = g.n_span + 1;
    let section = SectionSpec::rectangle(g.width, g.depth);

    let mut nodes: Vec<Node> = Vec::new();
    let mut add_node = |x: f64, y: f64| {
        let id = nodes.len();
        nodes.push(Node { id, x, y });
        id
    };
    // junction[j][i]
    let mut junction = vec![vec![0usize; cols]; g.n_floor + 1];
    for (i, slot) in junction[0].iter_mut().enumerate() {
        *slot = add_node(i as f64 * g.span, 0.0);
    }
    let mut elements: Vec<ElementRecord> = Vec::new();
    let mut add_element = |node_i, node_j, tag| {
        let id = elements.len();
        elements.push(ElementRecord {
            id,
            kind,
            node_i,
            node_j,
            section,
            material: g.material,
            tag: Some(tag),
        });
    };

    for f in 1..=g.n_floor {
        let y0 = (f - 1) as f64 * g.height;
        // column interior nodes, ordered by height then column line
        let mut column_chain = vec![vec![0usize; g.n_sc + 1]; cols];
        for (i, chain) in column_chain.iter_mut().enumerate() {
            chain[0] = junction[f - 1][i];
        }
        for k in 1..g.n_sc {
            let y = y0 + k as f64 * g.height / g.n_sc as f64;
            for (i, chain) in column_chain.iter_mut().enumerate() {
                chain[k] = add_node(i as f64 * g.span, y);
            }
        }
        let y = f as f64 * g.height;
        let mut beam_chain = vec![vec![0usize; g.n_sb + 1]; g.n_span];
        for i in 0..cols {
            junction[f][i] = add_node(i as f64 * g.span, y);
            column_chain[i][g.n_sc] = junction[f][i];
            if i > 0 {
                beam_chain[i - 1][g.n_sb] = junction[f][i];
            }
            if i < g.n_span {
                beam_chain[i][0] = junction[f][i];
                for (k, slot) in beam_chain[i][..g.n_sb].iter_mut().enumerate().skip(1) {
                    *slot = add_node(i as f64 * g.span + k as f64 * g.span / g.n_sb as f64, y);
                }
            }
        }
        for (i, chain) in column_chain.iter().enumerate() {
            for k in 1..=g.n_sc {
                add_element(
                    chain[k - 1],
                    chain[k],
                    MemberTag {
                        kind: MemberKind::Column,
                        floor: f,
                        span: i,
                        segment: k,
                    },
                );
            }
        }
        for (s, chain) in beam_chain.iter().enumerate() {
            for k in 1..=g.n_sb {
                add_element(
                    chain[k - 1],
                    chain[k],
                    MemberTag {
                        kind: MemberKind::BeamSegment,
                        floor: f,
                        span: s + 1,
                        segment: k,
                    },
                );
            }
        }
    }

    let supports = (0..cols)
        .map(|i| Support {
            node: junction[0][i],
            dofs: vec![0, 1, 2],
        })
        .collect();
    let loads = (1..=g.n_floor)
        .map(|j| NodalLoad {
            node: junction[j][0],
            dof: 0,
            value: g.load,
        })
        .collect();

    StructuralModel::from_data(ModelData {
        dofs_per_node: 3,
        nodes,
        elements,
        supports,
        loads,
        layout: Some(GridLayout::Frame {
            n_span: g.n_span,
            n_floor: g.n_floor,
            n_sb: g.n_sb,
            n_sc: g.n_sc,
        }),
        reference_nodes: Some((junction[g.n_floor][0], junction[g.n_floor][g.n_span])),
    })
}

/// Which material value the floor grading overwrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradingTarget {
    /// Young's modulus of homogeneous (or the initial modulus of bilinear) members.
    Modulus,
    /// Upper-surface modulus `E_US` of graded members; `E_LS` is untouched.
    UpperSurfaceModulus,
}

/// Modulus on floor `floor` (1-based) when grading linearly from `e_u` at
/// the bottom to `e_l` at the top.
pub fn floor_modulus(floor: usize, n_floor: usize, e_l: f64, e_u: f64) -> f64 {
    if n_floor <= 1 {
        e_u
    } else {
        e_u - (floor as f64 - 1.0) * (e_u - e_l) / (n_floor as f64 - 1.0)
    }
}

pub fn apply_floor_grading(
    model: &StructuralModel,
    e_l: f64,
    e_u: f64,
    target: GradingTarget,
) -> Result<StructuralModel> {
    require_positive("E_l", e_l)?;
    require_positive("E_u", e_u)?;
    if e_l > e_u {
        return Err(Error::InvalidParameter(format!(
            "E_l ({e_l}) exceeds E_u ({e_u})"
        )));
    }
    let n_floor = model.floor_count();
    if n_floor == 0 {
        return Err(Error::InvalidParameter("model has no floor tags".into()));
    }
    let mut elements = model.elements().to_vec();
    for el in &mut elements {
        let floor = el.tag.map(|t| t.floor).ok_or_else(|| {
            Error::InvalidParameter(format!("element {} has no floor tag", el.id))
        })?;
        let value = floor_modulus(floor, n_floor, e_l, e_u);
        el.material = match (el.material, target) {
            (MaterialSpec::Homogeneous { .. }, GradingTarget::Modulus) => {
                MaterialSpec::Homogeneous { e: value }
            }
            (MaterialSpec::Bilinear { et, sigma_y, .. }, GradingTarget::Modulus) => {
                MaterialSpec::Bilinear {
                    e0: value,
                    et,
                    sigma_y,
                }
            }
            (
                MaterialSpec::Graded {
                    e_ls, p, moments, ..
                },
                GradingTarget::UpperSurfaceModulus,
            ) => MaterialSpec::Graded {
                e_us: value,
                e_ls,
                p,
                moments,
            },
            (m, t) => {
                return Err(Error::InvalidParameter(format!(
                    "grading target {t:?} does not apply to material {m:?}"
                )))
            }
        };
    }
    model.with_elements(elements)
}

/// Default additional set: truss diagonals in spans 2..N_span, or the first
/// element of every frame beam.
pub fn default_additional_set(model: &StructuralModel) -> Result<PartitionSpec> {
    let layout = model.layout().ok_or(Error::UnsupportedModel)?;
    let mut ids = BTreeSet::new();
    for el in model.elements() {
        let tag = el.tag.ok_or(Error::UnsupportedModel)?;
        let additional = match layout {
            GridLayout::Truss { .. } => tag.kind == MemberKind::Diagonal && tag.span >= 2,
            GridLayout::Frame { .. } => tag.kind == MemberKind::BeamSegment && tag.segment == 1,
        };
        if additional {
            ids.insert(el.id);
        }
    }
    Ok(PartitionSpec {
        additional_ids: ids,
    })
}

/// Count of elements per member kind; handy for sanity checks and reports.
pub fn member_census(model: &StructuralModel) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for el in model.elements() {
        let key = el
            .tag
            .map(|t| format!("{:?}", t.kind).to_lowercase())
            .unwrap_or_else(|| "untagged".into());
        *out.entry(key).or_insert(0) += 1;
    }
    out
}
