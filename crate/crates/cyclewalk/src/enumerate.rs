//! Exact enumeration of balanced connected partitions on small graphs, and
//! the exact target distribution over them.
//!
//! The enumerator backtracks over districts in label order, always seeding
//! the next district with the lowest unassigned vertex, so every partition
//! appears exactly once and already in canonical labeling. Intended for
//! validation; it refuses graphs beyond a small vertex limit.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::energy::{self, EnergyError, MeasureSpec};
use crate::graph::{Graph, VertexId};
use crate::state::{compute_stats, DistrictId, PopBounds};

/// Hard ceiling for enumeration; beyond this the partition count is
/// unmanageable and the request is almost certainly a mistake.
pub const MAX_ENUM_VERTICES: usize = 36;

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("{vertices} vertices exceed the enumeration limit of {limit}")]
    TooLarge { vertices: usize, limit: usize },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Relabels an assignment so districts are numbered by first appearance.
/// Two assignments describe the same partition exactly when their canonical
/// forms are equal.
pub fn canonicalize(assignment: &[DistrictId]) -> Vec<DistrictId> {
    let mut remap: BTreeMap<DistrictId, DistrictId> = BTreeMap::new();
    assignment
        .iter()
        .map(|&label| {
            let next = remap.len() as DistrictId;
            *remap.entry(label).or_insert(next)
        })
        .collect()
}

/// Every partition of the graph into `districts` connected parts whose
/// populations all lie in the window, in canonical labeling.
pub fn enumerate_partitions(
    g: &Graph,
    districts: usize,
    bounds: &PopBounds,
) -> Result<Vec<Vec<DistrictId>>, EnumError> {
    let n = g.num_vertices();
    if n > MAX_ENUM_VERTICES {
        return Err(EnumError::TooLarge { vertices: n, limit: MAX_ENUM_VERTICES });
    }
    assert!(districts >= 1, "need at least one district");
    let mut search = Search {
        g,
        districts,
        bounds: *bounds,
        assignment: vec![FREE; n],
        unassigned_pop: g.total_population(),
        unassigned_count: n,
        results: Vec::new(),
    };
    search.next_district(0);
    Ok(search.results)
}

const FREE: DistrictId = DistrictId::MAX;

struct Search<'a> {
    g: &'a Graph,
    districts: usize,
    bounds: PopBounds,
    assignment: Vec<DistrictId>,
    unassigned_pop: u64,
    unassigned_count: usize,
    results: Vec<Vec<DistrictId>>,
}

impl Search<'_> {
    fn next_district(&mut self, k: usize) {
        if k == self.districts {
            if self.unassigned_count == 0 {
                self.results.push(self.assignment.clone());
            }
            return;
        }
        let Some(seed) = self.assignment.iter().position(|&a| a == FREE) else {
            return;
        };
        let label = k as DistrictId;
        self.assignment[seed] = label;
        let seed_pop = self.g.vertex(seed).population;
        self.unassigned_pop -= seed_pop;
        self.unassigned_count -= 1;
        let mut in_queue = vec![false; self.g.num_vertices()];
        in_queue[seed] = true;
        let mut queue: Vec<VertexId> = self
            .g
            .neighbors(seed)
            .iter()
            .filter(|&&(w, _)| self.assignment[w] == FREE)
            .map(|&(w, _)| w)
            .collect();
        for &w in &queue {
            in_queue[w] = true;
        }
        self.grow(k, seed_pop, &mut queue, 0, &mut in_queue);
        self.assignment[seed] = FREE;
        self.unassigned_pop += seed_pop;
        self.unassigned_count += 1;
    }

    /// Extends district `k` with supersets of the current subset, visiting
    /// each connected vertex set exactly once: the subset itself is closed
    /// here, then each branch picks which queue candidate joins next, in
    /// increasing position. Candidates passed over never rejoin a branch,
    /// and staying in the queue keeps them from being re-added as fresh
    /// neighbors.
    fn grow(
        &mut self,
        k: usize,
        pop: u64,
        queue: &mut Vec<VertexId>,
        pos: usize,
        in_queue: &mut Vec<bool>,
    ) {
        if self.bounds.contains(pop) {
            let rest = self.districts - k - 1;
            let pop_fits = self.bounds.min_pop.saturating_mul(rest as u64) <= self.unassigned_pop
                && self.unassigned_pop <= self.bounds.max_pop.saturating_mul(rest as u64);
            if pop_fits && self.unassigned_count >= rest {
                self.next_district(k + 1);
            }
        }
        for next in pos..queue.len() {
            let v = queue[next];
            let v_pop = self.g.vertex(v).population;
            if pop + v_pop > self.bounds.max_pop {
                continue;
            }
            self.assignment[v] = k as DistrictId;
            self.unassigned_pop -= v_pop;
            self.unassigned_count -= 1;
            let before = queue.len();
            for &(w, _) in self.g.neighbors(v) {
                if self.assignment[w] == FREE && !in_queue[w] {
                    in_queue[w] = true;
                    queue.push(w);
                }
            }
            self.grow(k, pop + v_pop, queue, next + 1, in_queue);
            for &w in &queue[before..] {
                in_queue[w] = false;
            }
            queue.truncate(before);
            self.assignment[v] = FREE;
            self.unassigned_pop += v_pop;
            self.unassigned_count += 1;
        }
    }
}

/// The exact (unnormalized log, and normalized) target distribution over all
/// admissible partitions.
#[derive(Debug, Clone)]
pub struct PartitionTable {
    /// Canonical assignments, in enumeration order.
    pub partitions: Vec<Vec<DistrictId>>,
    /// Unnormalized log weight of each partition.
    pub log_weights: Vec<f64>,
    index: BTreeMap<Vec<DistrictId>, usize>,
}

impl PartitionTable {
    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Table position of the partition an assignment describes, under any
    /// labeling.
    pub fn index_of(&self, assignment: &[DistrictId]) -> Option<usize> {
        self.index.get(&canonicalize(assignment)).copied()
    }

    /// Normalized probabilities, stable against large log offsets.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return vec![0.0; self.log_weights.len()];
        }
        let unnorm: Vec<f64> = self.log_weights.iter().map(|&w| (w - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|w| w / total).collect()
    }

    /// Exact distribution of a discrete observable of the partition.
    pub fn pushforward<K: Ord>(
        &self,
        mut observable: impl FnMut(&[DistrictId]) -> K,
    ) -> BTreeMap<K, f64> {
        let probs = self.probabilities();
        let mut out: BTreeMap<K, f64> = BTreeMap::new();
        for (partition, p) in self.partitions.iter().zip(probs) {
            *out.entry(observable(partition)).or_insert(0.0) += p;
        }
        out
    }
}

/// Enumerates all admissible partitions and weighs each by the target
/// measure's partition marginal: the score factor times the product of
/// per-district tree weights raised to `1 - gamma`.
pub fn exact_partition_distribution(
    g: &Graph,
    districts: usize,
    bounds: &PopBounds,
    spec: &MeasureSpec,
) -> Result<PartitionTable, EnumError> {
    let partitions = enumerate_partitions(g, districts, bounds)?;
    let mut log_weights = Vec::with_capacity(partitions.len());
    for assignment in &partitions {
        let mut members: Vec<Vec<VertexId>> = vec![Vec::new(); districts];
        for (v, &label) in assignment.iter().enumerate() {
            members[label as usize].push(v);
        }
        let stats: Vec<_> = members
            .iter()
            .enumerate()
            .map(|(d, m)| compute_stats(g, m, |w| assignment[w] as usize == d))
            .collect();
        let score = energy::score(&stats, bounds, spec)?;
        let mut log_w = -score;
        if spec.gamma != 1.0 {
            let mut log_trees = 0.0;
            for m in &members {
                log_trees += energy::log_tree_count(g, m, spec.weighted)?;
            }
            log_w += (1.0 - spec.gamma) * log_trees;
        }
        log_weights.push(log_w);
    }
    let index = partitions.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    Ok(PartitionTable { partitions, log_weights, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::PopScore;
    use crate::graph::LatticeKind::Square;
    use crate::graph::{make_grid, Edge, Graph, Vertex};
    use std::collections::BTreeSet;

    fn path(weights: &[f64]) -> Graph {
        let vertices = vec![Vertex::unit(1); weights.len() + 1];
        let edges = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| Edge { u: i, v: i + 1, weight: w, shared_perimeter: 1.0 })
            .collect();
        Graph::new(vertices, edges).unwrap()
    }

    /// Brute force over all label vectors: filter to connected parts within
    /// the window, then canonicalize and dedup.
    fn oracle(g: &Graph, districts: usize, bounds: &PopBounds) -> BTreeSet<Vec<DistrictId>> {
        let n = g.num_vertices();
        let mut out = BTreeSet::new();
        let mut assignment = vec![0 as DistrictId; n];
        'outer: loop {
            'check: {
                for d in 0..districts as DistrictId {
                    let members: Vec<VertexId> =
                        (0..n).filter(|&v| assignment[v] == d).collect();
                    if members.is_empty() {
                        break 'check;
                    }
                    let pop: u64 = members.iter().map(|&v| g.vertex(v).population).sum();
                    if !bounds.contains(pop) {
                        break 'check;
                    }
                    // BFS within the part.
                    let mut seen = BTreeSet::from([members[0]]);
                    let mut stack = vec![members[0]];
                    while let Some(v) = stack.pop() {
                        for &(w, _) in g.neighbors(v) {
                            if assignment[w] == d && seen.insert(w) {
                                stack.push(w);
                            }
                        }
                    }
                    if seen.len() != members.len() {
                        break 'check;
                    }
                }
                out.insert(canonicalize(&assignment));
            }
            for v in 0..n {
                assignment[v] += 1;
                if (assignment[v] as usize) < districts {
                    continue 'outer;
                }
                assignment[v] = 0;
            }
            return out;
        }
    }

    #[test]
    fn square_halves_are_the_only_balanced_pairs() {
        let g = make_grid(2, 2, Square);
        let parts =
            enumerate_partitions(&g, 2, &PopBounds::window(4, 2, 2, 2)).unwrap();
        assert_eq!(parts, vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1]]);
    }

    #[test]
    fn a_path_splits_at_each_interior_edge() {
        let g = path(&[1.0, 1.0, 1.0]);
        let parts =
            enumerate_partitions(&g, 2, &PopBounds::window(4, 2, 1, 3)).unwrap();
        assert_eq!(
            parts,
            vec![vec![0, 1, 1, 1], vec![0, 0, 1, 1], vec![0, 0, 0, 1]]
        );
    }

    #[test]
    fn enumeration_matches_brute_force_on_small_grids() {
        for (rows, cols, d, min, max) in
            [(2, 3, 2, 2, 4), (2, 3, 3, 1, 3), (3, 3, 3, 3, 3), (2, 4, 2, 4, 4)]
        {
            let g = make_grid(rows, cols, Square);
            let total = (rows * cols) as u64;
            let bounds = PopBounds::window(total, d, min, max);
            let listed = enumerate_partitions(&g, d, &bounds).unwrap();
            let ours: BTreeSet<Vec<DistrictId>> = listed.iter().cloned().collect();
            assert_eq!(listed.len(), ours.len(), "{rows}x{cols} into {d}: duplicates");
            let reference = oracle(&g, d, &bounds);
            assert_eq!(ours, reference, "{rows}x{cols} into {d}");
        }
    }

    #[test]
    fn canonical_form_ignores_label_order() {
        assert_eq!(canonicalize(&[1, 1, 0, 0]), vec![0, 0, 1, 1]);
        assert_eq!(canonicalize(&[2, 0, 2, 1]), vec![0, 1, 0, 2]);
    }

    #[test]
    fn gamma_reweights_partitions_by_their_tree_counts() {
        // Weighted path: the three balanced-enough splits have per-district
        // tree weight products 12, 8, and 6.
        let g = path(&[2.0, 3.0, 4.0]);
        let bounds = PopBounds::window(4, 2, 1, 3);
        let expect = |gamma: f64, expected: [f64; 3]| {
            let spec = MeasureSpec {
                gamma,
                weighted: true,
                w_compact: 0.0,
                pop_score: PopScore::Hard,
            };
            let table = exact_partition_distribution(&g, 2, &bounds, &spec).unwrap();
            let probs = table.probabilities();
            for (p, e) in probs.iter().zip(expected) {
                assert!((p - e).abs() < 1e-12, "gamma {gamma}: {probs:?} vs {expected:?}");
            }
        };
        let z0 = 12.0 + 8.0 + 6.0;
        expect(0.0, [12.0 / z0, 8.0 / z0, 6.0 / z0]);
        expect(1.0, [1.0 / 3.0; 3]);
        let z_half = 12.0f64.sqrt() + 8.0f64.sqrt() + 6.0f64.sqrt();
        expect(0.5, [
            12.0f64.sqrt() / z_half,
            8.0f64.sqrt() / z_half,
            6.0f64.sqrt() / z_half,
        ]);
    }

    #[test]
    fn pushforward_sums_probabilities_by_observable_value() {
        let g = path(&[2.0, 3.0, 4.0]);
        let bounds = PopBounds::window(4, 2, 1, 3);
        let spec = MeasureSpec {
            gamma: 0.0,
            weighted: true,
            w_compact: 0.0,
            pop_score: PopScore::Hard,
        };
        let table = exact_partition_distribution(&g, 2, &bounds, &spec).unwrap();
        let by_max_pop = table.pushforward(|assignment| {
            let mut pops = [0u64; 2];
            for (v, &d) in assignment.iter().enumerate() {
                pops[d as usize] += g.vertex(v).population;
            }
            pops[0].max(pops[1])
        });
        assert!((by_max_pop[&3] - 18.0 / 26.0).abs() < 1e-12);
        assert!((by_max_pop[&2] - 8.0 / 26.0).abs() < 1e-12);
    }

    #[test]
    fn lookup_by_any_labeling() {
        let g = make_grid(2, 2, Square);
        let spec = MeasureSpec::default();
        let table =
            exact_partition_distribution(&g, 2, &PopBounds::window(4, 2, 2, 2), &spec).unwrap();
        assert_eq!(table.index_of(&[1, 1, 0, 0]), Some(0));
        assert_eq!(table.index_of(&[1, 0, 1, 0]), Some(1));
        assert_eq!(table.index_of(&[0, 0, 0, 1]), None);
    }

    #[test]
    fn oversized_graphs_are_refused() {
        let g = make_grid(7, 6, Square);
        assert!(matches!(
            enumerate_partitions(&g, 2, &PopBounds::window(42, 2, 21, 21)),
            Err(EnumError::TooLarge { vertices: 42, limit: MAX_ENUM_VERTICES })
        ));
    }
}
