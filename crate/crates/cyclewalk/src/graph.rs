//! Attributed undirected graphs: construction, node-link JSON I/O, lattices.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

/// Per-vertex attributes. `area` and `exterior_perimeter` feed the
/// compactness score; `county` feeds the split count.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub population: u64,
    pub area: f64,
    pub exterior_perimeter: f64,
    pub county: Option<String>,
}

impl Vertex {
    pub fn unit(population: u64) -> Self {
        Vertex { population, area: 1.0, exterior_perimeter: 0.0, county: None }
    }
}

/// Undirected edge. `weight` is the sampling weight alpha(e); `shared_perimeter`
/// is the boundary length between the two cells, used for district perimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: f64,
    pub shared_perimeter: f64,
}

impl Edge {
    pub fn unit(u: VertexId, v: VertexId) -> Self {
        Edge { u, v, weight: 1.0, shared_perimeter: 1.0 }
    }
}

/// Immutable attributed graph. Vertices and edges are dense indices; adjacency
/// lists are sorted by neighbor id. Extra numeric node columns (vote counts
/// and the like) are kept by name for observable extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(VertexId, EdgeId)>>,
    attributes: BTreeMap<String, Vec<f64>>,
    total_population: u64,
}

/// A single validation failure, printable for error reports.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoVertices,
    EndpointOutOfRange { u: VertexId, v: VertexId, n: usize },
    SelfLoop { vertex: VertexId },
    DuplicateEdge { u: VertexId, v: VertexId },
    BadWeight { u: VertexId, v: VertexId, value: f64 },
    BadSharedPerimeter { u: VertexId, v: VertexId, value: f64 },
    BadArea { vertex: VertexId, value: f64 },
    BadExteriorPerimeter { vertex: VertexId, value: f64 },
    ZeroTotalPopulation,
    Disconnected { component_sizes: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVertices => write!(f, "graph has no vertices"),
            Violation::EndpointOutOfRange { u, v, n } => {
                write!(f, "edge ({u}, {v}) references a vertex outside 0..{n}")
            }
            Violation::SelfLoop { vertex } => write!(f, "self-loop at vertex {vertex}"),
            Violation::DuplicateEdge { u, v } => write!(f, "duplicate edge ({u}, {v})"),
            Violation::BadWeight { u, v, value } => {
                write!(f, "edge ({u}, {v}) weight {value} is not positive and finite")
            }
            Violation::BadSharedPerimeter { u, v, value } => {
                write!(f, "edge ({u}, {v}) shared perimeter {value} is not non-negative and finite")
            }
            Violation::BadArea { vertex, value } => {
                write!(f, "vertex {vertex} area {value} is not non-negative and finite")
            }
            Violation::BadExteriorPerimeter { vertex, value } => {
                write!(f, "vertex {vertex} exterior perimeter {value} is not non-negative and finite")
            }
            Violation::ZeroTotalPopulation => write!(f, "total population is zero"),
            Violation::Disconnected { component_sizes } => {
                write!(f, "graph is disconnected (component sizes {component_sizes:?})")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("graph document: {0}")]
    Document(String),
    #[error("graph JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Checks raw vertex and edge lists against the structural invariants without
/// building a graph, so invalid input can be reported in full.
pub fn validate_parts(vertices: &[Vertex], edges: &[Edge]) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = vertices.len();
    if n == 0 {
        out.push(Violation::NoVertices);
        return out;
    }
    for (i, vx) in vertices.iter().enumerate() {
        if !(vx.area >= 0.0 && vx.area.is_finite()) {
            out.push(Violation::BadArea { vertex: i, value: vx.area });
        }
        if !(vx.exterior_perimeter >= 0.0 && vx.exterior_perimeter.is_finite()) {
            out.push(Violation::BadExteriorPerimeter { vertex: i, value: vx.exterior_perimeter });
        }
    }
    if vertices.iter().map(|v| v.population).sum::<u64>() == 0 {
        out.push(Violation::ZeroTotalPopulation);
    }
    let mut endpoints_ok = true;
    let mut seen = std::collections::HashSet::new();
    for e in edges {
        if e.u >= n || e.v >= n {
            out.push(Violation::EndpointOutOfRange { u: e.u, v: e.v, n });
            endpoints_ok = false;
            continue;
        }
        if e.u == e.v {
            out.push(Violation::SelfLoop { vertex: e.u });
            continue;
        }
        let key = (e.u.min(e.v), e.u.max(e.v));
        if !seen.insert(key) {
            out.push(Violation::DuplicateEdge { u: key.0, v: key.1 });
        }
        if !(e.weight > 0.0 && e.weight.is_finite()) {
            out.push(Violation::BadWeight { u: e.u, v: e.v, value: e.weight });
        }
        if !(e.shared_perimeter >= 0.0 && e.shared_perimeter.is_finite()) {
            out.push(Violation::BadSharedPerimeter { u: e.u, v: e.v, value: e.shared_perimeter });
        }
    }
    if endpoints_ok {
        let sizes = component_sizes(n, edges);
        if sizes.len() > 1 {
            out.push(Violation::Disconnected { component_sizes: sizes });
        }
    }
    out
}

fn component_sizes(n: usize, edges: &[Edge]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        if e.u != e.v {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
    }
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut size = 0;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            size += 1;
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

impl Graph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        Self::with_attributes(vertices, edges, BTreeMap::new())
    }

    pub fn with_attributes(
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        attributes: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, GraphError> {
        let violations = validate_parts(&vertices, &edges);
        if !violations.is_empty() {
            return Err(GraphError::Invalid(violations));
        }
        for (name, column) in &attributes {
            if column.len() != vertices.len() {
                return Err(GraphError::Document(format!(
                    "attribute column {name:?} has {} entries for {} vertices",
                    column.len(),
                    vertices.len()
                )));
            }
        }
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| Edge { u: e.u.min(e.v), v: e.u.max(e.v), ..e })
            .collect();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (id, e) in edges.iter().enumerate() {
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let total_population = vertices.iter().map(|v| v.population).sum();
        Ok(Graph { vertices, edges, adjacency, attributes, total_population })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        (self.edges[e].u, self.edges[e].v)
    }

    /// The endpoint of `e` that is not `v`.
    pub fn other_endpoint(&self, e: EdgeId, v: VertexId) -> VertexId {
        let edge = &self.edges[e];
        if edge.u == v {
            edge.v
        } else {
            edge.u
        }
    }

    /// Neighbors of `v` as `(neighbor, edge id)`, sorted by neighbor.
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        let list = &self.adjacency[u];
        list.binary_search_by_key(&v, |&(w, _)| w).ok().map(|i| list[i].1)
    }

    pub fn total_population(&self) -> u64 {
        self.total_population
    }

    /// Extra numeric node column by name, if present.
    pub fn attribute(&self, name: &str) -> Option<&[f64]> {
        self.attributes.get(name).map(|c| c.as_slice())
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.keys().map(|s| s.as_str())
    }

    /// Re-checks the structural invariants; empty on any constructed graph.
    pub fn validate(&self) -> Vec<Violation> {
        validate_parts(&self.vertices, &self.edges)
    }

    /// Perimeter of a vertex subset from the attributes: exterior perimeter of
    /// the members plus shared perimeter over edges leaving the subset.
    pub fn subset_perimeter(&self, members: &[VertexId]) -> f64 {
        let mut inside = vec![false; self.num_vertices()];
        for &v in members {
            inside[v] = true;
        }
        let mut total = 0.0;
        for &v in members {
            total += self.vertices[v].exterior_perimeter;
            for &(w, e) in self.neighbors(v) {
                if !inside[w] {
                    total += self.edges[e].shared_perimeter;
                }
            }
        }
        total
    }
}

/// Square lattices use 4-neighbor adjacency; triangular lattices add one
/// down-right diagonal per cell square, giving interior degree 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    Square,
    Triangular,
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeKind::Square => write!(f, "square"),
            LatticeKind::Triangular => write!(f, "triangular"),
        }
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "square" => Ok(LatticeKind::Square),
            "triangular" => Ok(LatticeKind::Triangular),
            other => Err(format!("unknown lattice kind {other:?} (square | triangular)")),
        }
    }
}

/// Builds a `rows x cols` lattice of unit cells: unit populations and areas,
/// exterior perimeter from exposed sides, unit shared perimeter on orthogonal
/// edges. Triangular diagonals carry zero shared perimeter so subset
/// perimeters stay geometric.
pub fn make_grid(rows: usize, cols: usize, kind: LatticeKind) -> Graph {
    assert!(rows >= 2 && cols >= 2, "lattice needs at least 2 rows and 2 columns");
    let mut vertices = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let exposed = (r == 0) as u32 + (r == rows - 1) as u32 + (c == 0) as u32 + (c == cols - 1) as u32;
            vertices.push(Vertex {
                population: 1,
                area: 1.0,
                exterior_perimeter: exposed as f64,
                county: None,
            });
        }
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push(Edge::unit(v, v + 1));
            }
            if r + 1 < rows {
                edges.push(Edge::unit(v, v + cols));
            }
            if kind == LatticeKind::Triangular && c + 1 < cols && r + 1 < rows {
                edges.push(Edge { u: v, v: v + cols + 1, weight: 1.0, shared_perimeter: 0.0 });
            }
        }
    }
    Graph::new(vertices, edges).expect("lattice construction is always valid")
}

/// JSON attribute keys for node-link documents. Defaults match the common
/// redistricting dual-graph layout.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GraphKeys {
    pub population: String,
    pub area: String,
    pub exterior_perimeter: String,
    pub county: String,
    pub shared_perimeter: String,
    pub weight: String,
}

impl Default for GraphKeys {
    fn default() -> Self {
        GraphKeys {
            population: "population".into(),
            area: "area".into(),
            exterior_perimeter: "exterior_perim".into(),
            county: "county".into(),
            shared_perimeter: "shared_perim".into(),
            weight: "weight".into(),
        }
    }
}

fn doc_err(msg: String) -> GraphError {
    GraphError::Document(msg)
}

fn numeric(value: &Value) -> Option<f64> {
    value.as_f64()
}

/// Parses a node-link JSON document: a `nodes` array of attribute objects and
/// an `adjacency` array with one neighbor list per node. Neighbor entries are
/// either bare vertex ids or objects with an `id` key plus optional edge
/// attributes. Adjacency must be symmetric and edge attributes must agree in
/// both directions. Defaults: area 1, exterior perimeter 0, shared perimeter
/// 1, weight 1.
pub fn load_graph(text: &str, keys: &GraphKeys) -> Result<Graph, GraphError> {
    let doc: Value = serde_json::from_str(text)?;
    let nodes = doc
        .get("nodes")
        .and_then(Value::as_array)
        .ok_or_else(|| doc_err("missing \"nodes\" array".into()))?;
    let adjacency = doc
        .get("adjacency")
        .and_then(Value::as_array)
        .ok_or_else(|| doc_err("missing \"adjacency\" array".into()))?;
    if nodes.len() != adjacency.len() {
        return Err(doc_err(format!(
            "{} nodes but {} adjacency rows",
            nodes.len(),
            adjacency.len()
        )));
    }
    let n = nodes.len();

    let mut vertices = Vec::with_capacity(n);
    let mut attributes: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let reserved = [
        keys.population.as_str(),
        keys.area.as_str(),
        keys.exterior_perimeter.as_str(),
        keys.county.as_str(),
    ];
    for (i, node) in nodes.iter().enumerate() {
        let obj = node
            .as_object()
            .ok_or_else(|| doc_err(format!("node {i} is not an object")))?;
        let population = match obj.get(&keys.population) {
            Some(v) => parse_population(v)
                .ok_or_else(|| doc_err(format!("node {i}: bad population {v}")))?,
            None => return Err(doc_err(format!("node {i}: missing key {:?}", keys.population))),
        };
        let area = match obj.get(&keys.area) {
            Some(v) => numeric(v).ok_or_else(|| doc_err(format!("node {i}: bad area {v}")))?,
            None => 1.0,
        };
        let exterior_perimeter = match obj.get(&keys.exterior_perimeter) {
            Some(v) => numeric(v)
                .ok_or_else(|| doc_err(format!("node {i}: bad exterior perimeter {v}")))?,
            None => 0.0,
        };
        let county = match obj.get(&keys.county) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(Value::Null) | None => None,
            Some(other) => return Err(doc_err(format!("node {i}: bad county {other}"))),
        };
        vertices.push(Vertex { population, area, exterior_perimeter, county });
        for (key, value) in obj {
            if reserved.contains(&key.as_str()) {
                continue;
            }
            if let Some(x) = numeric(value) {
                attributes
                    .entry(key.clone())
                    .or_insert_with(|| vec![0.0; n])[i] = x;
            }
        }
    }

    struct Half {
        weight: Option<f64>,
        shared_perimeter: Option<f64>,
    }
    let mut halves: BTreeMap<(usize, usize), Vec<Half>> = BTreeMap::new();
    for (i, row) in adjacency.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| doc_err(format!("adjacency row {i} is not an array")))?;
        for entry in row {
            let (j, weight, shared) = match entry {
                Value::Number(num) => {
                    let j = num
                        .as_u64()
                        .ok_or_else(|| doc_err(format!("adjacency row {i}: bad neighbor {num}")))?;
                    (j as usize, None, None)
                }
                Value::Object(obj) => {
                    let j = obj
                        .get("id")
                        .and_then(Value::as_u64)
                        .ok_or_else(|| doc_err(format!("adjacency row {i}: entry missing id")))?;
                    let weight = obj.get(&keys.weight).map(|v| {
                        numeric(v).ok_or_else(|| doc_err(format!("edge ({i}, {j}): bad weight {v}")))
                    });
                    let shared = obj.get(&keys.shared_perimeter).map(|v| {
                        numeric(v).ok_or_else(|| {
                            doc_err(format!("edge ({i}, {j}): bad shared perimeter {v}"))
                        })
                    });
                    (j as usize, weight.transpose()?, shared.transpose()?)
                }
                other => return Err(doc_err(format!("adjacency row {i}: bad entry {other}"))),
            };
            if j >= n {
                return Err(doc_err(format!("adjacency row {i}: neighbor {j} out of range")));
            }
            halves
                .entry((i.min(j), i.max(j)))
                .or_default()
                .push(Half { weight, shared_perimeter: shared });
        }
    }

    let mut edges = Vec::with_capacity(halves.len());
    for (&(u, v), parts) in &halves {
        if parts.len() != 2 {
            return Err(doc_err(format!(
                "edge ({u}, {v}) appears in {} adjacency rows, expected both endpoints",
                parts.len()
            )));
        }
        let pick = |a: Option<f64>, b: Option<f64>, what: &str| -> Result<Option<f64>, GraphError> {
            match (a, b) {
                (Some(x), Some(y)) if (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1.0) => {
                    Err(doc_err(format!("edge ({u}, {v}): {what} disagrees between directions ({x} vs {y})")))
                }
                (Some(x), _) => Ok(Some(x)),
                (None, y) => Ok(y),
            }
        };
        let weight = pick(parts[0].weight, parts[1].weight, "weight")?.unwrap_or(1.0);
        let shared =
            pick(parts[0].shared_perimeter, parts[1].shared_perimeter, "shared perimeter")?
                .unwrap_or(1.0);
        edges.push(Edge { u, v, weight, shared_perimeter: shared });
    }

    Graph::with_attributes(vertices, edges, attributes)
}

fn parse_population(value: &Value) -> Option<u64> {
    if let Some(p) = value.as_u64() {
        return Some(p);
    }
    let x = value.as_f64()?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Some(x as u64)
    } else {
        None
    }
}

/// Serializes a graph as a node-link document using the default keys, shaped
/// so `load_graph` reproduces the graph exactly.
pub fn export_graph(g: &Graph) -> String {
    let keys = GraphKeys::default();
    let nodes: Vec<Value> = (0..g.num_vertices())
        .map(|i| {
            let vx = g.vertex(i);
            let mut obj = Map::new();
            obj.insert(keys.population.clone(), json!(vx.population));
            obj.insert(keys.area.clone(), json!(vx.area));
            obj.insert(keys.exterior_perimeter.clone(), json!(vx.exterior_perimeter));
            if let Some(county) = &vx.county {
                obj.insert(keys.county.clone(), json!(county));
            }
            for (name, column) in &g.attributes {
                obj.insert(name.clone(), json!(column[i]));
            }
            Value::Object(obj)
        })
        .collect();
    let adjacency: Vec<Value> = (0..g.num_vertices())
        .map(|i| {
            let row: Vec<Value> = g
                .neighbors(i)
                .iter()
                .map(|&(j, e)| {
                    let edge = g.edge(e);
                    json!({
                        "id": j,
                        keys.weight.clone(): edge.weight,
                        keys.shared_perimeter.clone(): edge.shared_perimeter,
                    })
                })
                .collect();
            Value::Array(row)
        })
        .collect();
    let doc = json!({ "nodes": nodes, "adjacency": adjacency });
    serde_json::to_string_pretty(&doc).expect("graph JSON serialization cannot fail")
}

pub mod presets {
    //! Small ready-made graphs used by the bundled configurations and the
    //! validation suite.

    use super::*;

    /// 4x4 lattice with a non-uniform boundary-length profile: corner-adjacent
    /// cell pairs share a border of 2, mid-side pairs 2.5, the four center
    /// pairs 3, and the remaining pairs 1. Corner cells carry exterior
    /// perimeter 2 and mid-side cells 1. The profile is symmetric under the
    /// lattice's rotations and reflections.
    pub fn grid4_perimeter_weighted() -> Graph {
        let base = make_grid(4, 4, LatticeKind::Square);
        let mut vertices = Vec::new();
        for r in 0..4usize {
            for c in 0..4usize {
                let corner = (r == 0 || r == 3) && (c == 0 || c == 3);
                let boundary = r == 0 || r == 3 || c == 0 || c == 3;
                let ext = if corner {
                    2.0
                } else if boundary {
                    1.0
                } else {
                    0.0
                };
                vertices.push(Vertex { population: 1, area: 1.0, exterior_perimeter: ext, county: None });
            }
        }
        let edges = (0..base.num_edges())
            .map(|e| {
                let (u, v) = base.endpoints(e);
                Edge { u, v, weight: 1.0, shared_perimeter: border_length(u, v) }
            })
            .collect();
        Graph::new(vertices, edges).expect("preset is valid")
    }

    /// 4x4 lattice with the same symmetric 2 / 2.5 / 3 / 1 profile applied to
    /// the edge weights instead, with unit perimeters everywhere.
    pub fn grid4_edge_weighted() -> Graph {
        let base = make_grid(4, 4, LatticeKind::Square);
        let vertices = (0..16).map(|v| base.vertex(v).clone()).collect();
        let edges = (0..base.num_edges())
            .map(|e| {
                let (u, v) = base.endpoints(e);
                Edge { u, v, weight: border_length(u, v), shared_perimeter: 1.0 }
            })
            .collect();
        Graph::new(vertices, edges).expect("preset is valid")
    }

    /// Border length between two adjacent cells of the 4x4 lattice under the
    /// symmetric profile above.
    fn border_length(u: VertexId, v: VertexId) -> f64 {
        let (ur, uc) = (u / 4, u % 4);
        let (vr, vc) = (v / 4, v % 4);
        let corner = |r: usize, c: usize| (r == 0 || r == 3) && (c == 0 || c == 3);
        let center = |r: usize, c: usize| (1..=2).contains(&r) && (1..=2).contains(&c);
        let mid_side = |r: usize, c: usize| {
            (r == 0 || r == 3 || c == 0 || c == 3) && !corner(r, c)
        };
        if corner(ur, uc) || corner(vr, vc) {
            2.0
        } else if center(ur, uc) && center(vr, vc) {
            3.0
        } else if mid_side(ur, uc) && mid_side(vr, vc) {
            2.5
        } else {
            1.0
        }
    }
}
