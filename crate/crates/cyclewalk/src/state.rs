//! Partition states: a spanning forest with one tree per district, plus the
//! incremental indexes the walks sample from.
//!
//! A state keeps, per district, its population, area, perimeter, vertex
//! count, and the list of graph edges internal to it; across districts it
//! keeps every boundary edge bucketed by district pair and the set of
//! adjacent district pairs. District relabelings after an accepted move
//! rebuild exactly the containers touching the two districts involved, in
//! ascending edge order, so a from-scratch reindex reproduces the live
//! structures verbatim.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::energy::{self, DistrictStats, EnergyError};
use crate::forest::DynamicForest;
use crate::graph::{EdgeId, Graph, VertexId};

pub type DistrictId = u32;

/// Inclusive integer population window shared by all districts, plus the
/// ideal (average) district population used for deviations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PopBounds {
    pub min_pop: u64,
    pub max_pop: u64,
    pub ideal: f64,
}

impl PopBounds {
    /// Window of populations within `tol` relative deviation of the ideal.
    /// Boundary comparisons get a tiny nudge so exactly-representable
    /// fractions land inside the window.
    pub fn fraction(total: u64, districts: usize, tol: f64) -> Self {
        let ideal = total as f64 / districts as f64;
        let lo = ideal * (1.0 - tol);
        let hi = ideal * (1.0 + tol);
        PopBounds {
            min_pop: (lo - 1e-9).ceil().max(0.0) as u64,
            max_pop: (hi + 1e-9).floor() as u64,
            ideal,
        }
    }

    /// Explicit window.
    pub fn window(total: u64, districts: usize, min_pop: u64, max_pop: u64) -> Self {
        PopBounds { min_pop, max_pop, ideal: total as f64 / districts as f64 }
    }

    /// Floor/ceiling of the ideal: district populations may vary by one unit
    /// around a fractional ideal, and must be exact when the ideal is an
    /// integer.
    pub fn unit_step(total: u64, districts: usize) -> Self {
        let ideal = total as f64 / districts as f64;
        PopBounds { min_pop: ideal.floor() as u64, max_pop: ideal.ceil() as u64, ideal }
    }

    pub fn contains(&self, population: u64) -> bool {
        (self.min_pop..=self.max_pop).contains(&population)
    }

    /// True when `districts` windows can tile the total at all.
    pub fn is_feasible(&self, total: u64, districts: usize) -> bool {
        self.min_pop <= self.max_pop
            && self.min_pop.saturating_mul(districts as u64) <= total
            && total <= self.max_pop.saturating_mul(districts as u64)
    }

    /// Signed relative deviation `(population - ideal) / ideal`.
    pub fn deviation(&self, population: u64) -> f64 {
        (population as f64 - self.ideal) / self.ideal
    }
}

/// Aggregates and edge lists for one district.
#[derive(Debug, Clone, PartialEq)]
pub struct DistrictData {
    pub population: u64,
    pub area: f64,
    pub perimeter: f64,
    pub vertex_count: usize,
    /// Graph edges with both endpoints in the district, ascending.
    pub internal_edges: Vec<EdgeId>,
    /// Lowest-numbered member vertex.
    pub representative: VertexId,
    /// Cached log tree weights, indexed by the weighted flag.
    pub(crate) tree_log: [Option<f64>; 2],
}

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("assignment has {got} entries for {expected} vertices")]
    WrongLength { got: usize, expected: usize },
    #[error("vertex {vertex} is labeled {label}, outside 0..{districts}")]
    LabelOutOfRange { vertex: VertexId, label: DistrictId, districts: usize },
    #[error("district {district} has no vertices")]
    EmptyDistrict { district: usize },
    #[error("district {district}: {got} tree edges for {vertices} vertices")]
    TreeSize { district: usize, got: usize, vertices: usize },
    #[error("district {district}: tree edge ({u}, {v}) leaves the district")]
    TreeEdgeAstray { district: usize, u: VertexId, v: VertexId },
    #[error("district {district}: tree edges contain a cycle")]
    TreeCycle { district: usize },
    #[error("district {district} population {population} outside [{min}, {max}]")]
    PopulationOutOfBounds { district: usize, population: u64, min: u64, max: u64 },
    #[error("vertex {vertex} has no county attribute")]
    MissingCounty { vertex: VertexId },
    #[error("vertex set {{{first}, ...}} is not connected; no spanning tree exists")]
    RegionDisconnected { first: VertexId },
}

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("seeding failed after {retries} attempts on a {vertices}-vertex region; \
             loosen the population tolerance or reduce the district count")]
    RetriesExhausted { retries: u32, vertices: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Error, PartialEq)]
#[error("audit mismatch: {0}")]
pub struct AuditError(pub String);

/// Canonical per-district aggregate computation: population, area, and
/// exterior perimeter summed in `members` order, boundary contributions in
/// neighbor-list order. Every aggregate producer goes through here so
/// incremental and from-scratch values agree bitwise.
pub(crate) fn compute_stats(
    g: &Graph,
    members_sorted: &[VertexId],
    mut in_district: impl FnMut(VertexId) -> bool,
) -> DistrictStats {
    let mut population = 0u64;
    let mut area = 0.0f64;
    let mut perimeter = 0.0f64;
    for &v in members_sorted {
        let vx = g.vertex(v);
        population += vx.population;
        area += vx.area;
        perimeter += vx.exterior_perimeter;
    }
    for &v in members_sorted {
        for &(w, e) in g.neighbors(v) {
            if !in_district(w) {
                perimeter += g.edge(e).shared_perimeter;
            }
        }
    }
    DistrictStats { population, area, perimeter }
}

/// Relabeling payload for an accepted two-district move; see
/// [`ForestState::apply_split`].
pub(crate) struct SplitUpdate {
    pub label_a: DistrictId,
    pub label_b: DistrictId,
    /// Sorted members of the tree taking `label_a`, likewise for `b`.
    pub members_a: Vec<VertexId>,
    pub members_b: Vec<VertexId>,
    pub stats_a: DistrictStats,
    pub stats_b: DistrictStats,
    pub tree_log_a: [Option<f64>; 2],
    pub tree_log_b: [Option<f64>; 2],
}

/// A full sampler state over a fixed graph. The graph itself is passed by
/// reference to the operations that need it; the state stores only indices.
#[derive(Debug)]
pub struct ForestState {
    forest: DynamicForest,
    assignment: Vec<DistrictId>,
    districts: Vec<DistrictData>,
    bounds: PopBounds,
    cross_buckets: BTreeMap<(DistrictId, DistrictId), Vec<EdgeId>>,
    active_pairs: Vec<(DistrictId, DistrictId)>,
    active_pos: BTreeMap<(DistrictId, DistrictId), usize>,
    district_neighbors: Vec<BTreeSet<DistrictId>>,
}

impl ForestState {
    /// Builds a state from an explicit assignment and one spanning tree per
    /// district, validating connectivity, tree shape, and population windows.
    pub fn from_assignment(
        g: &Graph,
        assignment: Vec<DistrictId>,
        trees: &[Vec<EdgeId>],
        bounds: PopBounds,
    ) -> Result<Self, StateError> {
        let n = g.num_vertices();
        let d = trees.len();
        if assignment.len() != n {
            return Err(StateError::WrongLength { got: assignment.len(), expected: n });
        }
        for (v, &label) in assignment.iter().enumerate() {
            if (label as usize) >= d {
                return Err(StateError::LabelOutOfRange { vertex: v, label, districts: d });
            }
        }

        let mut members: Vec<Vec<VertexId>> = vec![Vec::new(); d];
        for (v, &label) in assignment.iter().enumerate() {
            members[label as usize].push(v);
        }

        for (district, tree) in trees.iter().enumerate() {
            let count = members[district].len();
            if count == 0 {
                return Err(StateError::EmptyDistrict { district });
            }
            if tree.len() + 1 != count {
                return Err(StateError::TreeSize { district, got: tree.len(), vertices: count });
            }
            // Union-find over the tree edges: any premature merge is a cycle,
            // and with exactly count-1 edges acyclic implies spanning.
            let mut parent: BTreeMap<VertexId, VertexId> =
                members[district].iter().map(|&v| (v, v)).collect();
            fn find(parent: &mut BTreeMap<VertexId, VertexId>, mut x: VertexId) -> VertexId {
                while parent[&x] != x {
                    let up = parent[&parent[&x]];
                    parent.insert(x, up);
                    x = up;
                }
                x
            }
            for &e in tree {
                let (u, v) = g.endpoints(e);
                if assignment[u] as usize != district || assignment[v] as usize != district {
                    return Err(StateError::TreeEdgeAstray { district, u, v });
                }
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru == rv {
                    return Err(StateError::TreeCycle { district });
                }
                parent.insert(ru, rv);
            }
        }

        let mut districts = Vec::with_capacity(d);
        for (district, mem) in members.iter().enumerate() {
            let stats = compute_stats(g, mem, |w| assignment[w] as usize == district);
            if !bounds.contains(stats.population) {
                return Err(StateError::PopulationOutOfBounds {
                    district,
                    population: stats.population,
                    min: bounds.min_pop,
                    max: bounds.max_pop,
                });
            }
            districts.push(DistrictData {
                population: stats.population,
                area: stats.area,
                perimeter: stats.perimeter,
                vertex_count: mem.len(),
                internal_edges: Vec::new(),
                representative: mem[0],
                tree_log: [None, None],
            });
        }

        let masses: Vec<u64> = (0..n).map(|v| g.vertex(v).population).collect();
        let mut state = ForestState {
            forest: DynamicForest::new(&masses),
            assignment,
            districts,
            bounds,
            cross_buckets: BTreeMap::new(),
            active_pairs: Vec::new(),
            active_pos: BTreeMap::new(),
            district_neighbors: vec![BTreeSet::new(); d],
        };
        for e in 0..g.num_edges() {
            state.classify_edge(g, e);
        }
        for tree in trees {
            for &e in tree {
                let (u, v) = g.endpoints(e);
                state.forest.link(u, v);
            }
        }
        Ok(state)
    }

    /// Files edge `e` into the internal list or cross bucket matching the
    /// current assignment.
    fn classify_edge(&mut self, g: &Graph, e: EdgeId) {
        let (u, v) = g.endpoints(e);
        let (du, dv) = (self.assignment[u], self.assignment[v]);
        if du == dv {
            self.districts[du as usize].internal_edges.push(e);
        } else {
            let pair = (du.min(dv), du.max(dv));
            let bucket = self.cross_buckets.entry(pair).or_default();
            if bucket.is_empty() {
                self.active_pos.insert(pair, self.active_pairs.len());
                self.active_pairs.push(pair);
                self.district_neighbors[pair.0 as usize].insert(pair.1);
                self.district_neighbors[pair.1 as usize].insert(pair.0);
            }
            bucket.push(e);
        }
    }

    fn deactivate_pair(&mut self, pair: (DistrictId, DistrictId)) {
        self.cross_buckets.remove(&pair);
        if let Some(idx) = self.active_pos.remove(&pair) {
            self.active_pairs.swap_remove(idx);
            if idx < self.active_pairs.len() {
                let moved = self.active_pairs[idx];
                self.active_pos.insert(moved, idx);
            }
            self.district_neighbors[pair.0 as usize].remove(&pair.1);
            self.district_neighbors[pair.1 as usize].remove(&pair.0);
        }
    }

    /// Applies the bookkeeping side of an accepted two-district move after
    /// the forest itself has been relinked: reassigns the moved vertices and
    /// rebuilds every edge container touching the two districts.
    pub(crate) fn apply_split(&mut self, g: &Graph, upd: SplitUpdate) {
        let (a, b) = (upd.label_a, upd.label_b);
        let mut affected: Vec<EdgeId> = Vec::new();
        affected.append(&mut self.districts[a as usize].internal_edges);
        affected.append(&mut self.districts[b as usize].internal_edges);
        for x in [a, b] {
            let pairs: Vec<(DistrictId, DistrictId)> = self.district_neighbors[x as usize]
                .iter()
                .map(|&c| (x.min(c), x.max(c)))
                .collect();
            for pair in pairs {
                if let Some(mut bucket) = self.cross_buckets.remove(&pair) {
                    affected.append(&mut bucket);
                }
                self.deactivate_pair(pair);
            }
        }
        affected.sort_unstable();

        for &v in &upd.members_a {
            self.assignment[v] = a;
        }
        for &v in &upd.members_b {
            self.assignment[v] = b;
        }
        for e in affected {
            self.classify_edge(g, e);
        }

        let slot_a = &mut self.districts[a as usize];
        slot_a.population = upd.stats_a.population;
        slot_a.area = upd.stats_a.area;
        slot_a.perimeter = upd.stats_a.perimeter;
        slot_a.vertex_count = upd.members_a.len();
        slot_a.representative = upd.members_a[0];
        slot_a.tree_log = upd.tree_log_a;
        let slot_b = &mut self.districts[b as usize];
        slot_b.population = upd.stats_b.population;
        slot_b.area = upd.stats_b.area;
        slot_b.perimeter = upd.stats_b.perimeter;
        slot_b.vertex_count = upd.members_b.len();
        slot_b.representative = upd.members_b[0];
        slot_b.tree_log = upd.tree_log_b;
    }

    // ---- accessors ----

    pub fn num_districts(&self) -> usize {
        self.districts.len()
    }

    pub fn assignment(&self) -> &[DistrictId] {
        &self.assignment
    }

    pub fn district_of(&self, v: VertexId) -> DistrictId {
        self.assignment[v]
    }

    pub fn district(&self, d: usize) -> &DistrictData {
        &self.districts[d]
    }

    pub fn bounds(&self) -> &PopBounds {
        &self.bounds
    }

    pub(crate) fn forest_mut(&mut self) -> &mut DynamicForest {
        &mut self.forest
    }

    pub fn forest(&self) -> &DynamicForest {
        &self.forest
    }

    /// Adjacent district pairs `(lo, hi)`, one entry per pair with at least
    /// one boundary edge. Order is an implementation detail.
    pub fn adjacent_pairs(&self) -> &[(DistrictId, DistrictId)] {
        &self.active_pairs
    }

    /// Boundary edges between two districts, ascending; empty when the
    /// districts are not adjacent.
    pub fn boundary_edges(&self, a: DistrictId, b: DistrictId) -> &[EdgeId] {
        self.cross_buckets
            .get(&(a.min(b), a.max(b)))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn cut_edge_count(&self) -> usize {
        self.cross_buckets.values().map(|b| b.len()).sum()
    }

    /// Number of districts currently adjacent to `d`.
    pub fn district_neighbor_count(&self, d: DistrictId) -> usize {
        self.district_neighbors[d as usize].len()
    }

    pub fn district_stats(&self) -> Vec<DistrictStats> {
        (0..self.districts.len()).map(|d| self.district_stats_of(d)).collect()
    }

    pub fn district_stats_of(&self, d: usize) -> DistrictStats {
        let data = &self.districts[d];
        DistrictStats { population: data.population, area: data.area, perimeter: data.perimeter }
    }

    pub fn pop_deviation(&self, d: usize) -> f64 {
        self.bounds.deviation(self.districts[d].population)
    }

    /// Members of district `d`, ascending.
    pub fn district_members(&self, d: usize) -> Vec<VertexId> {
        let mut members = self.forest.component_vertices(self.districts[d].representative);
        members.sort_unstable();
        members
    }

    /// The district's current tree as graph edge ids, ascending.
    pub fn district_tree_edges(&self, g: &Graph, d: usize) -> Vec<EdgeId> {
        let mut edges: Vec<EdgeId> = self
            .forest
            .component_edges(self.districts[d].representative)
            .into_iter()
            .map(|(u, v)| g.edge_between(u, v).expect("tree edge exists in the graph"))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Cached log tree weight of district `d`, computing it on demand over
    /// the sorted member list.
    pub fn log_tree_count(&mut self, g: &Graph, d: usize, weighted: bool) -> Result<f64, EnergyError> {
        if let Some(cached) = self.districts[d].tree_log[weighted as usize] {
            return Ok(cached);
        }
        let members = self.district_members(d);
        let value = energy::log_tree_count(g, &members, weighted)?;
        self.districts[d].tree_log[weighted as usize] = Some(value);
        Ok(value)
    }

    /// Sum of log edge weights over the forest's tree edges.
    pub fn forest_log_weight(&self, g: &Graph) -> f64 {
        let mut total = 0.0;
        for d in 0..self.districts.len() {
            for e in self.district_tree_edges(g, d) {
                total += g.edge(e).weight.ln();
            }
        }
        total
    }

    /// Number of counties whose vertices touch at least two districts.
    pub fn county_split_count(&self, g: &Graph) -> Result<usize, StateError> {
        let mut county_districts: BTreeMap<&str, BTreeSet<DistrictId>> = BTreeMap::new();
        for v in 0..g.num_vertices() {
            match &g.vertex(v).county {
                Some(county) => {
                    county_districts.entry(county).or_default().insert(self.assignment[v]);
                }
                None => return Err(StateError::MissingCounty { vertex: v }),
            }
        }
        Ok(county_districts.values().filter(|set| set.len() >= 2).count())
    }

    /// Hash of the represented structure: assignment, per-district tree
    /// edges, and integer aggregates. Splay-internal arrangement does not
    /// contribute, so a rejected proposal must leave the checksum unchanged.
    pub fn checksum(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.assignment.hash(&mut h);
        for d in 0..self.districts.len() {
            self.forest.component_edges(self.districts[d].representative).hash(&mut h);
            self.districts[d].population.hash(&mut h);
            self.districts[d].vertex_count.hash(&mut h);
            self.districts[d].internal_edges.hash(&mut h);
        }
        for (pair, bucket) in &self.cross_buckets {
            pair.hash(&mut h);
            bucket.hash(&mut h);
        }
        h.finish()
    }

    /// Rebuilds the state from its assignment and live trees and compares
    /// every index and aggregate with the incremental values.
    pub fn audit(&self, g: &Graph) -> Result<(), AuditError> {
        let trees: Vec<Vec<EdgeId>> =
            (0..self.districts.len()).map(|d| self.district_tree_edges(g, d)).collect();
        let fresh =
            ForestState::from_assignment(g, self.assignment.clone(), &trees, self.bounds)
                .map_err(|e| AuditError(format!("rebuild failed: {e}")))?;
        for d in 0..self.districts.len() {
            let (live, scratch) = (&self.districts[d], &fresh.districts[d]);
            if live.population != scratch.population
                || live.vertex_count != scratch.vertex_count
                || live.representative != scratch.representative
            {
                return Err(AuditError(format!("district {d} aggregates diverge")));
            }
            if live.area.to_bits() != scratch.area.to_bits()
                || live.perimeter.to_bits() != scratch.perimeter.to_bits()
            {
                return Err(AuditError(format!(
                    "district {d} float aggregates diverge: area {} vs {}, perimeter {} vs {}",
                    live.area, scratch.area, live.perimeter, scratch.perimeter
                )));
            }
            if live.internal_edges != scratch.internal_edges {
                return Err(AuditError(format!("district {d} internal edge list diverges")));
            }
            for weighted in [false, true] {
                if let Some(cached) = live.tree_log[weighted as usize] {
                    let members = self.district_members(d);
                    let recomputed = energy::log_tree_count(g, &members, weighted)
                        .map_err(|e| AuditError(format!("district {d}: {e}")))?;
                    if cached.to_bits() != recomputed.to_bits() {
                        return Err(AuditError(format!(
                            "district {d} cached tree weight diverges: {cached} vs {recomputed}"
                        )));
                    }
                }
            }
        }
        if self.cross_buckets != fresh.cross_buckets {
            return Err(AuditError("cross-edge buckets diverge".into()));
        }
        let live_pairs: BTreeSet<_> = self.active_pairs.iter().collect();
        let fresh_pairs: BTreeSet<_> = fresh.active_pairs.iter().collect();
        if live_pairs != fresh_pairs {
            return Err(AuditError("active pair set diverges".into()));
        }
        if self.district_neighbors != fresh.district_neighbors {
            return Err(AuditError("district neighbor sets diverge".into()));
        }
        if self.active_pos.len() != self.active_pairs.len()
            || self
                .active_pos
                .iter()
                .any(|(pair, &idx)| self.active_pairs.get(idx) != Some(pair))
        {
            return Err(AuditError("active pair positions are inconsistent".into()));
        }
        Ok(())
    }
}

/// Uniform (or weight-proportional) random spanning tree of the subgraph
/// induced by `vertices`, by loop-erased random walk.
pub fn wilson_ust(
    g: &Graph,
    vertices: &[VertexId],
    weighted: bool,
    rng: &mut impl Rng,
) -> Result<Vec<EdgeId>, StateError> {
    assert!(!vertices.is_empty(), "cannot draw a tree on an empty region");
    let n = vertices.len();
    let mut local: BTreeMap<VertexId, usize> = BTreeMap::new();
    for (i, &v) in vertices.iter().enumerate() {
        local.insert(v, i);
    }
    let mut adj: Vec<Vec<(usize, EdgeId, f64)>> = vec![Vec::new(); n];
    for (i, &v) in vertices.iter().enumerate() {
        for &(w, e) in g.neighbors(v) {
            if let Some(&j) = local.get(&w) {
                adj[i].push((j, e, g.edge(e).weight));
            }
        }
    }

    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    let root = rng.gen_range(0..n);
    in_tree[root] = true;

    // Connectivity check up front; the random walk would never terminate on
    // a disconnected region.
    {
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut stack = vec![root];
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &(j, _, _) in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        if count != n {
            return Err(StateError::RegionDisconnected { first: vertices[0] });
        }
    }

    for start in 0..n {
        if in_tree[start] {
            continue;
        }
        let mut u = start;
        while !in_tree[u] {
            let step = if weighted {
                let total: f64 = adj[u].iter().map(|&(_, _, w)| w).sum();
                let mut x = rng.gen_range(0.0..total);
                let mut chosen = adj[u].len() - 1;
                for (idx, &(_, _, w)) in adj[u].iter().enumerate() {
                    if x < w {
                        chosen = idx;
                        break;
                    }
                    x -= w;
                }
                chosen
            } else {
                rng.gen_range(0..adj[u].len())
            };
            next[u] = step;
            u = adj[u][step].0;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = adj[u][next[u]].0;
        }
    }

    // A vertex's `next` pointer is frozen once it joins the tree, so the
    // surviving pointers are exactly the tree edges.
    let mut edges: Vec<EdgeId> =
        (0..n).filter(|&i| i != root).map(|i| adj[i][next[i]].1).collect();
    edges.sort_unstable();
    Ok(edges)
}

/// Draws a valid random starting state by recursive bipartition: split the
/// region's district budget roughly in half, draw a spanning tree, and cut a
/// uniformly chosen tree edge whose two sides fit the halves' population
/// windows; recurse until single districts remain. Each level redraws on
/// failure up to `max_retries` times.
pub fn seed_random(
    g: &Graph,
    num_districts: usize,
    bounds: PopBounds,
    rng: &mut impl Rng,
    max_retries: u32,
) -> Result<ForestState, SeedError> {
    assert!(num_districts >= 1, "need at least one district");
    let all: Vec<VertexId> = (0..g.num_vertices()).collect();
    let mut assignment = vec![0 as DistrictId; g.num_vertices()];
    let mut trees: Vec<Vec<EdgeId>> = vec![Vec::new(); num_districts];
    split_region(g, &all, num_districts, 0, &mut assignment, &mut trees, bounds, rng, max_retries)?;
    Ok(ForestState::from_assignment(g, assignment, &trees, bounds)?)
}

#[allow(clippy::too_many_arguments)]
fn split_region(
    g: &Graph,
    region: &[VertexId],
    k: usize,
    first_label: usize,
    assignment: &mut [DistrictId],
    trees: &mut [Vec<EdgeId>],
    bounds: PopBounds,
    rng: &mut impl Rng,
    max_retries: u32,
) -> Result<(), SeedError> {
    let pop: u64 = region.iter().map(|&v| g.vertex(v).population).sum();
    if k == 1 {
        if !bounds.contains(pop) {
            return Err(SeedError::RetriesExhausted { retries: 0, vertices: region.len() });
        }
        for &v in region {
            assignment[v] = first_label as DistrictId;
        }
        trees[first_label] = wilson_ust(g, region, false, rng)?;
        return Ok(());
    }
    let k1 = k / 2;
    let k2 = k - k1;
    let window = |parts: usize, p: u64| {
        bounds.min_pop.saturating_mul(parts as u64) <= p
            && p <= bounds.max_pop.saturating_mul(parts as u64)
    };
    for _ in 0..max_retries {
        let tree = wilson_ust(g, region, false, rng)?;
        // Root the tree and accumulate subtree populations.
        let mut local: BTreeMap<VertexId, usize> = BTreeMap::new();
        for (i, &v) in region.iter().enumerate() {
            local.insert(v, i);
        }
        let mut adj: Vec<Vec<(usize, EdgeId)>> = vec![Vec::new(); region.len()];
        for &e in &tree {
            let (u, v) = g.endpoints(e);
            let (lu, lv) = (local[&u], local[&v]);
            adj[lu].push((lv, e));
            adj[lv].push((lu, e));
        }
        let mut order = Vec::with_capacity(region.len());
        let mut parent_edge = vec![usize::MAX; region.len()];
        let mut parent = vec![usize::MAX; region.len()];
        let mut stack = vec![0usize];
        let mut seen = vec![false; region.len()];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            order.push(i);
            for &(j, e) in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = i;
                    parent_edge[j] = e;
                    stack.push(j);
                }
            }
        }
        let mut subtree_pop: Vec<u64> =
            region.iter().map(|&v| g.vertex(v).population).collect();
        for &i in order.iter().rev() {
            if parent[i] != usize::MAX {
                subtree_pop[parent[i]] += subtree_pop[i];
            }
        }
        // Candidate cuts: (child vertex, halves assigned to the child side).
        let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
        for i in 0..region.len() {
            if parent[i] == usize::MAX {
                continue;
            }
            let (p1, p2) = (subtree_pop[i], pop - subtree_pop[i]);
            if window(k1, p1) && window(k2, p2) {
                candidates.push((i, k1, k2));
            }
            if k1 != k2 && window(k2, p1) && window(k1, p2) {
                candidates.push((i, k2, k1));
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let (child, k_child, k_rest) = candidates[rng.gen_range(0..candidates.len())];
        // Collect the child side by walking the tree without crossing the
        // cut edge.
        let mut child_side = vec![false; region.len()];
        child_side[child] = true;
        let mut stack = vec![child];
        while let Some(i) = stack.pop() {
            for &(j, e) in &adj[i] {
                if e != parent_edge[child] && !child_side[j] {
                    child_side[j] = true;
                    stack.push(j);
                }
            }
        }
        let side_a: Vec<VertexId> =
            (0..region.len()).filter(|&i| child_side[i]).map(|i| region[i]).collect();
        let side_b: Vec<VertexId> =
            (0..region.len()).filter(|&i| !child_side[i]).map(|i| region[i]).collect();
        let ok_a =
            split_region(g, &side_a, k_child, first_label, assignment, trees, bounds, rng, max_retries)
                .is_ok();
        if ok_a
            && split_region(
                g,
                &side_b,
                k_rest,
                first_label + k_child,
                assignment,
                trees,
                bounds,
                rng,
                max_retries,
            )
            .is_ok()
        {
            return Ok(());
        }
    }
    Err(SeedError::RetriesExhausted { retries: max_retries, vertices: region.len() })
}
