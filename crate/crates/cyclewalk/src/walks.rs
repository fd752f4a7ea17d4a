//! The two proposal kernels.
//!
//! The 1-tree walk resamples one district's spanning tree in place: pick a
//! district, pick an internal edge not on its tree, and remove one edge of
//! the cycle this closes, chosen with probability inversely proportional to
//! its weight. The removal distribution includes the just-added edge, and
//! the move needs no accept/reject step.
//!
//! The 2-tree walk changes the partition: pick an adjacent district pair,
//! pick two of its boundary edges, link one to merge the trees, and close a
//! cycle with the other. Cutting any two cycle edges whose arcs both satisfy
//! the population window re-splits the merged tree; the cut pair is drawn
//! inversely proportional to the product of its edge weights and the result
//! goes through a Metropolis test. Forward and reverse proposals share the
//! same cycle, so the acceptance ratio reduces to counting terms, the score
//! difference, and the tree-count difference.

use std::collections::BTreeSet;

use rand::Rng;

use crate::energy::{self, DistrictStats, EnergyError, MeasureSpec};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::state::{compute_stats, DistrictId, ForestState, PopBounds, SplitUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    OneTree,
    TwoTree,
}

/// What a single proposal did to the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub kernel: KernelKind,
    /// False only when a 2-tree proposal failed its Metropolis test or could
    /// not be constructed; 1-tree proposals always pass.
    pub accepted: bool,
    /// True when the forest or the partition actually changed.
    pub changed: bool,
    /// Vertices whose district label changed.
    pub nodes_moved: usize,
    /// The district pair a 2-tree proposal acted on.
    pub pair: Option<(DistrictId, DistrictId)>,
    /// Log Metropolis ratio of an evaluated 2-tree proposal, 0 otherwise.
    pub log_ratio: f64,
    /// Largest proposed district population change relative to the ideal,
    /// for proposals that got far enough to have one.
    pub rel_pop_change: Option<f64>,
}

impl StepOutcome {
    fn rejected_2tree(pair: Option<(DistrictId, DistrictId)>) -> Self {
        StepOutcome {
            kernel: KernelKind::TwoTree,
            accepted: false,
            changed: false,
            nodes_moved: 0,
            pair,
            log_ratio: f64::NEG_INFINITY,
            rel_pop_change: None,
        }
    }
}

/// One admissible cut of a cycle: removing cycle edges `s < t` leaves the
/// arc `s+1..=t` as one district and the rest as the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutPair {
    pub s: usize,
    pub t: usize,
    pub pop_inner: u64,
    pub pop_outer: u64,
}

fn arc_pop_window(total: u64, bounds: &PopBounds) -> Option<(u64, u64)> {
    let lo = bounds.min_pop.max(total.saturating_sub(bounds.max_pop));
    let hi = bounds.max_pop.min(total.checked_sub(bounds.min_pop)?);
    (lo <= hi).then_some((lo, hi))
}

/// All cut pairs whose two sides both satisfy the population window.
/// `masses[i]` is the population hanging at cycle position `i`; the cycle
/// has as many edges as positions. Runs on prefix sums: for each first cut
/// the admissible second cuts form one contiguous run.
pub fn valid_cut_pairs(masses: &[u64], bounds: &PopBounds) -> Vec<CutPair> {
    let len = masses.len();
    let total: u64 = masses.iter().sum();
    let Some((lo, hi)) = arc_pop_window(total, bounds) else {
        return Vec::new();
    };
    let mut prefix = Vec::with_capacity(len);
    let mut run = 0u64;
    for &m in masses {
        run += m;
        prefix.push(run);
    }
    let mut pairs = Vec::new();
    for s in 0..len.saturating_sub(1) {
        let base = prefix[s];
        let t_lo = s + 1 + prefix[s + 1..].partition_point(|&w| w < base + lo);
        let t_hi = s + 1 + prefix[s + 1..].partition_point(|&w| w <= base + hi);
        for t in t_lo..t_hi {
            let pop_inner = prefix[t] - base;
            pairs.push(CutPair { s, t, pop_inner, pop_outer: total - pop_inner });
        }
    }
    pairs
}

/// Reference implementation of [`valid_cut_pairs`] that checks every pair.
pub fn valid_cut_pairs_exhaustive(masses: &[u64], bounds: &PopBounds) -> Vec<CutPair> {
    let total: u64 = masses.iter().sum();
    let mut pairs = Vec::new();
    for s in 0..masses.len() {
        for t in s + 1..masses.len() {
            let pop_inner: u64 = masses[s + 1..=t].iter().sum();
            let pop_outer = total - pop_inner;
            if bounds.contains(pop_inner) && bounds.contains(pop_outer) {
                pairs.push(CutPair { s, t, pop_inner, pop_outer });
            }
        }
    }
    pairs
}

/// Draws a valid cut pair with probability proportional to
/// `inv_weight[s] * inv_weight[t]`, without materializing the pair list.
/// Returns `None` when no pair is valid.
pub fn sample_cut_pair(
    masses: &[u64],
    inv_weights: &[f64],
    bounds: &PopBounds,
    rng: &mut impl Rng,
) -> Option<(usize, usize)> {
    let len = masses.len();
    assert_eq!(inv_weights.len(), len);
    let total: u64 = masses.iter().sum();
    let (lo, hi) = arc_pop_window(total, bounds)?;
    let mut prefix = Vec::with_capacity(len);
    let mut run = 0u64;
    for &m in masses {
        run += m;
        prefix.push(run);
    }
    let mut q_prefix = Vec::with_capacity(len);
    let mut q_run = 0.0f64;
    for &q in inv_weights {
        q_run += q;
        q_prefix.push(q_run);
    }
    let window = |s: usize| {
        let base = prefix[s];
        let t_lo = s + 1 + prefix[s + 1..].partition_point(|&w| w < base + lo);
        let t_hi = s + 1 + prefix[s + 1..].partition_point(|&w| w <= base + hi);
        (t_lo, t_hi)
    };
    let mass_of = |s: usize| {
        let (t_lo, t_hi) = window(s);
        if t_lo >= t_hi {
            return 0.0;
        }
        let below = if t_lo == 0 { 0.0 } else { q_prefix[t_lo - 1] };
        inv_weights[s] * (q_prefix[t_hi - 1] - below)
    };
    let z: f64 = (0..len.saturating_sub(1)).map(mass_of).sum();
    if z <= 0.0 {
        return None;
    }
    let mut x = rng.gen_range(0.0..z);
    let mut fallback = None;
    for s in 0..len - 1 {
        let zs = mass_of(s);
        if zs <= 0.0 {
            continue;
        }
        let (t_lo, t_hi) = window(s);
        fallback = Some((s, t_hi - 1));
        if x < zs {
            let below = if t_lo == 0 { 0.0 } else { q_prefix[t_lo - 1] };
            let y = below + x / inv_weights[s];
            for t in t_lo..t_hi {
                if q_prefix[t] > y || t == t_hi - 1 {
                    return Some((s, t));
                }
            }
        }
        x -= zs;
    }
    // Rounding pushed the draw past the final block.
    fallback
}

/// Everything evaluated about one candidate cut of an open 2-tree move.
#[derive(Debug, Clone)]
pub struct CutEval {
    pub log_ratio: f64,
    pub label_inner: DistrictId,
    pub label_outer: DistrictId,
    /// Sorted vertex sets of the two proposed districts.
    pub members_inner: Vec<VertexId>,
    pub members_outer: Vec<VertexId>,
    pub stats_inner: DistrictStats,
    pub stats_outer: DistrictStats,
    pub nodes_moved: usize,
    pub rel_pop_change: f64,
    pub new_boundary_len: usize,
    pub new_pair_count: usize,
    tree_log_inner: [Option<f64>; 2],
    tree_log_outer: [Option<f64>; 2],
}

/// An in-progress 2-tree proposal: the bridge edge is tentatively linked, so
/// the two districts form one tree decomposed around the cycle path. Every
/// `open` must end in exactly one `commit` or `abort` to restore a
/// consistent state.
pub struct TwoTreeMove<'a> {
    g: &'a Graph,
    state: &'a mut ForestState,
    spec: &'a MeasureSpec,
    a: DistrictId,
    b: DistrictId,
    bridge: EdgeId,
    closing: EdgeId,
    path: Vec<VertexId>,
    masses: Vec<u64>,
    members: Vec<VertexId>,
    anchor: Vec<u32>,
    cycle_edges: Vec<EdgeId>,
    bridge_pos: usize,
    boundary_len: usize,
    old_pair_count: usize,
    old_ab_pair_count: usize,
    old_log_trees: f64,
    old_stats: [DistrictStats; 2],
    old_pop_terms: [f64; 2],
    old_compact_terms: [f64; 2],
}

impl<'a> TwoTreeMove<'a> {
    /// Links `bridge` between districts `a` and `b` and decomposes the
    /// merged tree around the cycle that `closing` completes. Both edges
    /// must be distinct boundary edges of the pair.
    pub fn open(
        g: &'a Graph,
        state: &'a mut ForestState,
        spec: &'a MeasureSpec,
        a: DistrictId,
        b: DistrictId,
        bridge: EdgeId,
        closing: EdgeId,
    ) -> Result<Self, EnergyError> {
        debug_assert_ne!(bridge, closing);
        debug_assert!(state.boundary_edges(a, b).contains(&bridge));
        debug_assert!(state.boundary_edges(a, b).contains(&closing));
        let boundary_len = state.boundary_edges(a, b).len();
        let old_pair_count = state.adjacent_pairs().len();
        let old_ab_pair_count =
            state.district_neighbor_count(a) + state.district_neighbor_count(b) - 1;
        let old_log_trees = if spec.gamma != 0.0 {
            state.log_tree_count(g, a as usize, spec.weighted)?
                + state.log_tree_count(g, b as usize, spec.weighted)?
        } else {
            0.0
        };
        let old_stats = [
            state.district_stats_of(a as usize),
            state.district_stats_of(b as usize),
        ];
        let bounds = *state.bounds();
        let old_pop_terms = old_stats
            .map(|s| energy::district_pop_term(s.population, &bounds, spec.pop_score));
        let old_compact_terms = if spec.w_compact != 0.0 {
            [
                energy::district_compact_term(&old_stats[0], a as usize)?,
                energy::district_compact_term(&old_stats[1], b as usize)?,
            ]
        } else {
            [0.0, 0.0]
        };

        let (bu, bv) = g.endpoints(bridge);
        let (cu, cv) = g.endpoints(closing);
        state.forest_mut().link(bu, bv);
        let decomposition = state
            .forest_mut()
            .path_decomposition(cu, cv)
            .expect("closing edge endpoints lie in the merged tree");
        let path = decomposition.path;
        let mut cycle_edges: Vec<EdgeId> = path
            .windows(2)
            .map(|w| g.edge_between(w[0], w[1]).expect("path steps are graph edges"))
            .collect();
        cycle_edges.push(closing);
        let bridge_pos = cycle_edges
            .iter()
            .position(|&e| e == bridge)
            .expect("the bridge lies on the cycle");
        Ok(TwoTreeMove {
            g,
            state,
            spec,
            a,
            b,
            bridge,
            closing,
            path,
            masses: decomposition.hanging_mass,
            members: decomposition.members,
            anchor: decomposition.anchor,
            cycle_edges,
            bridge_pos,
            boundary_len,
            old_pair_count,
            old_ab_pair_count,
            old_log_trees,
            old_stats,
            old_pop_terms,
            old_compact_terms,
        })
    }

    pub fn cycle_len(&self) -> usize {
        self.cycle_edges.len()
    }

    /// Cycle vertices in order; the closing edge joins the last back to the
    /// first.
    pub fn path(&self) -> &[VertexId] {
        &self.path
    }

    /// Population hanging at each cycle position.
    pub fn masses(&self) -> &[u64] {
        &self.masses
    }

    pub fn cycle_edges(&self) -> &[EdgeId] {
        &self.cycle_edges
    }

    /// Per-edge reciprocal weights driving cut-pair selection; all ones in
    /// unweighted mode.
    pub fn inv_edge_weights(&self) -> Vec<f64> {
        if self.spec.weighted {
            self.cycle_edges.iter().map(|&e| 1.0 / self.g.edge(e).weight).collect()
        } else {
            vec![1.0; self.cycle_edges.len()]
        }
    }

    pub fn valid_cuts(&self) -> Vec<CutPair> {
        valid_cut_pairs(&self.masses, self.state.bounds())
    }

    /// True when cutting `(s, t)` reproduces the current partition and trees.
    pub fn is_identity(&self, s: usize, t: usize) -> bool {
        let closing_pos = self.cycle_edges.len() - 1;
        (s.min(t), s.max(t)) == (self.bridge_pos.min(closing_pos), self.bridge_pos.max(closing_pos))
    }

    /// Scores the split made by cutting cycle edges `s < t`: the resulting
    /// districts, their aggregates, and the log Metropolis ratio.
    pub fn eval_cut(&self, s: usize, t: usize) -> Result<CutEval, EnergyError> {
        debug_assert!(s < t && t < self.cycle_edges.len());
        let n = self.g.num_vertices();
        let spec = self.spec;
        let mut in_inner = vec![false; n];
        let mut in_merged = vec![false; n];
        for &v in &self.members {
            in_merged[v] = true;
        }
        let inner_range = (s + 1) as u32..=(t as u32);
        for (i, &v) in self.members.iter().enumerate() {
            if inner_range.contains(&self.anchor[i]) {
                in_inner[v] = true;
            }
        }
        let mut members_inner: Vec<VertexId> = Vec::new();
        let mut members_outer: Vec<VertexId> = Vec::new();
        for &v in &self.members {
            if in_inner[v] {
                members_inner.push(v);
            } else {
                members_outer.push(v);
            }
        }
        members_inner.sort_unstable();
        members_outer.sort_unstable();

        let stats_inner = compute_stats(self.g, &members_inner, |w| in_inner[w]);
        let stats_outer = compute_stats(self.g, &members_outer, |w| in_merged[w] && !in_inner[w]);

        // Labels: keep as many vertices in their current district as
        // possible; break ties toward the side holding the lowest vertex.
        let assignment = self.state.assignment();
        let inner_in_a =
            members_inner.iter().filter(|&&v| assignment[v] == self.a).count();
        let count_a = self.state.district(self.a as usize).vertex_count;
        let outer_in_a = count_a - inner_in_a;
        let moved_if_inner_a = (members_inner.len() - inner_in_a) + outer_in_a;
        let moved_if_inner_b = inner_in_a + (members_outer.len() - outer_in_a);
        let inner_takes_a = match moved_if_inner_a.cmp(&moved_if_inner_b) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => {
                let lowest = members_inner[0].min(members_outer[0]);
                if in_inner[lowest] {
                    assignment[lowest] == self.a
                } else {
                    assignment[lowest] == self.b
                }
            }
        };
        let (label_inner, label_outer, nodes_moved) = if inner_takes_a {
            (self.a, self.b, moved_if_inner_a)
        } else {
            (self.b, self.a, moved_if_inner_b)
        };

        // Boundary length of the proposed pair and the new adjacent-pair
        // count, from one scan over the merged region's incident edges.
        let mut new_boundary_len = 0usize;
        let mut ext_inner: BTreeSet<DistrictId> = BTreeSet::new();
        let mut ext_outer: BTreeSet<DistrictId> = BTreeSet::new();
        for &v in &members_inner {
            for &(w, _) in self.g.neighbors(v) {
                if !in_merged[w] {
                    ext_inner.insert(assignment[w]);
                } else if !in_inner[w] {
                    new_boundary_len += 1;
                }
            }
        }
        for &v in &members_outer {
            for &(w, _) in self.g.neighbors(v) {
                if !in_merged[w] {
                    ext_outer.insert(assignment[w]);
                }
            }
        }
        let new_pair_count =
            self.old_pair_count - self.old_ab_pair_count + ext_inner.len() + ext_outer.len() + 1;

        let bounds = *self.state.bounds();
        let old_index = |label: DistrictId| usize::from(label == self.b);
        let mut delta_score = energy::district_pop_term(
            stats_inner.population,
            &bounds,
            spec.pop_score,
        ) + energy::district_pop_term(stats_outer.population, &bounds, spec.pop_score)
            - self.old_pop_terms[0]
            - self.old_pop_terms[1];
        if spec.w_compact != 0.0 {
            let compact_new = energy::district_compact_term(&stats_inner, label_inner as usize)?
                + energy::district_compact_term(&stats_outer, label_outer as usize)?;
            delta_score +=
                spec.w_compact * (compact_new - self.old_compact_terms[0] - self.old_compact_terms[1]);
        }

        let mut tree_log_inner = [None, None];
        let mut tree_log_outer = [None, None];
        let delta_log_trees = if spec.gamma != 0.0 {
            let inner = energy::log_tree_count(self.g, &members_inner, spec.weighted)?;
            let outer = energy::log_tree_count(self.g, &members_outer, spec.weighted)?;
            tree_log_inner[spec.weighted as usize] = Some(inner);
            tree_log_outer[spec.weighted as usize] = Some(outer);
            inner + outer - self.old_log_trees
        } else {
            0.0
        };

        let b_old = self.boundary_len as f64;
        let b_new = new_boundary_len as f64;
        let log_ratio = (self.old_pair_count as f64).ln() - (new_pair_count as f64).ln()
            + (b_old * (b_old - 1.0)).ln()
            - (b_new * (b_new - 1.0)).ln()
            - spec.gamma * delta_log_trees
            - delta_score;

        let pop_change = |label: DistrictId, new_pop: u64| {
            self.old_stats[old_index(label)].population.abs_diff(new_pop) as f64
        };
        let rel_pop_change = pop_change(label_inner, stats_inner.population)
            .max(pop_change(label_outer, stats_outer.population))
            / bounds.ideal;

        Ok(CutEval {
            log_ratio,
            label_inner,
            label_outer,
            members_inner,
            members_outer,
            stats_inner,
            stats_outer,
            nodes_moved,
            rel_pop_change,
            new_boundary_len,
            new_pair_count,
            tree_log_inner,
            tree_log_outer,
        })
    }

    /// Applies the cut `(s, t)`: rewires the forest and updates every index
    /// and aggregate. The evaluation must come from the same `(s, t)`.
    pub fn commit(self, s: usize, t: usize, eval: CutEval) {
        debug_assert!(s < t);
        let closing_pos = self.cycle_edges.len() - 1;
        let cut_edge = |state: &mut ForestState, g: &Graph, e: EdgeId| {
            let (u, v) = g.endpoints(e);
            state.forest_mut().cut(u, v);
        };
        if t == closing_pos {
            // The closing edge was never linked; dropping it and one path
            // edge needs a single cut.
            cut_edge(self.state, self.g, self.cycle_edges[s]);
        } else {
            cut_edge(self.state, self.g, self.cycle_edges[s]);
            cut_edge(self.state, self.g, self.cycle_edges[t]);
            let (cu, cv) = self.g.endpoints(self.closing);
            self.state.forest_mut().link(cu, cv);
        }
        self.state.apply_split(
            self.g,
            SplitUpdate {
                label_a: eval.label_inner,
                label_b: eval.label_outer,
                members_a: eval.members_inner,
                members_b: eval.members_outer,
                stats_a: eval.stats_inner,
                stats_b: eval.stats_outer,
                tree_log_a: eval.tree_log_inner,
                tree_log_b: eval.tree_log_outer,
            },
        );
    }

    /// Unlinks the bridge, restoring the state that `open` saw.
    pub fn abort(self) {
        let (bu, bv) = self.g.endpoints(self.bridge);
        self.state.forest_mut().cut(bu, bv);
    }

    pub fn districts(&self) -> (DistrictId, DistrictId) {
        (self.a, self.b)
    }
}

/// One 1-tree proposal: rewires a uniformly chosen district's tree and
/// always succeeds (possibly as the identity).
pub fn step_1tree(
    g: &Graph,
    state: &mut ForestState,
    spec: &MeasureSpec,
    rng: &mut impl Rng,
) -> StepOutcome {
    let outcome = |changed| StepOutcome {
        kernel: KernelKind::OneTree,
        accepted: true,
        changed,
        nodes_moved: 0,
        pair: None,
        log_ratio: 0.0,
        rel_pop_change: None,
    };
    let d = rng.gen_range(0..state.num_districts());
    let district = state.district(d);
    let tree_edges = district.vertex_count - 1;
    let internal = &district.internal_edges;
    if internal.len() == tree_edges {
        // Every internal edge is on the tree; the only move is to stay.
        return outcome(false);
    }
    // Redraw on tree edges a bounded number of times, then fall back to an
    // explicit scan; both draw uniformly over the non-tree internal edges.
    let mut added = None;
    for _ in 0..32 {
        let e = internal[rng.gen_range(0..internal.len())];
        let (u, v) = g.endpoints(e);
        if !state.forest().is_tree_edge(u, v) {
            added = Some(e);
            break;
        }
    }
    let added = added.unwrap_or_else(|| {
        let off_tree: Vec<EdgeId> = internal
            .iter()
            .copied()
            .filter(|&e| {
                let (u, v) = g.endpoints(e);
                !state.forest().is_tree_edge(u, v)
            })
            .collect();
        off_tree[rng.gen_range(0..off_tree.len())]
    });

    let (u, v) = g.endpoints(added);
    let path = state
        .forest_mut()
        .tree_path(u, v)
        .expect("internal edge endpoints share a tree");
    let mut cycle: Vec<EdgeId> = path
        .windows(2)
        .map(|w| g.edge_between(w[0], w[1]).expect("path steps are graph edges"))
        .collect();
    cycle.push(added);
    let removed = if spec.weighted {
        let inv: Vec<f64> = cycle.iter().map(|&e| 1.0 / g.edge(e).weight).collect();
        let total: f64 = inv.iter().sum();
        let mut x = rng.gen_range(0.0..total);
        let mut pick = cycle.len() - 1;
        for (i, &q) in inv.iter().enumerate() {
            if x < q {
                pick = i;
                break;
            }
            x -= q;
        }
        pick
    } else {
        rng.gen_range(0..cycle.len())
    };
    if cycle[removed] == added {
        return outcome(false);
    }
    let (ru, rv) = g.endpoints(cycle[removed]);
    state.forest_mut().cut(ru, rv);
    state.forest_mut().link(u, v);
    outcome(true)
}

/// One 2-tree proposal with its Metropolis test.
pub fn step_2tree(
    g: &Graph,
    state: &mut ForestState,
    spec: &MeasureSpec,
    rng: &mut impl Rng,
) -> Result<StepOutcome, EnergyError> {
    let pairs = state.adjacent_pairs();
    if pairs.is_empty() {
        return Ok(StepOutcome::rejected_2tree(None));
    }
    let (a, b) = pairs[rng.gen_range(0..pairs.len())];
    let boundary = state.boundary_edges(a, b);
    if boundary.len() < 2 {
        return Ok(StepOutcome::rejected_2tree(Some((a, b))));
    }
    let i = rng.gen_range(0..boundary.len());
    let mut j = rng.gen_range(0..boundary.len() - 1);
    if j >= i {
        j += 1;
    }
    let (bridge, closing) = (boundary[i], boundary[j]);

    let mv = TwoTreeMove::open(g, state, spec, a, b, bridge, closing)?;
    let inv = mv.inv_edge_weights();
    let Some((s, t)) = sample_cut_pair(mv.masses(), &inv, mv.state.bounds(), rng) else {
        mv.abort();
        return Ok(StepOutcome::rejected_2tree(Some((a, b))));
    };
    if mv.is_identity(s, t) {
        mv.abort();
        return Ok(StepOutcome {
            kernel: KernelKind::TwoTree,
            accepted: true,
            changed: false,
            nodes_moved: 0,
            pair: Some((a, b)),
            log_ratio: 0.0,
            rel_pop_change: Some(0.0),
        });
    }
    let eval = mv.eval_cut(s, t)?;
    let accept = eval.log_ratio >= 0.0 || rng.gen::<f64>() < eval.log_ratio.exp();
    let outcome = StepOutcome {
        kernel: KernelKind::TwoTree,
        accepted: accept,
        changed: accept,
        nodes_moved: if accept { eval.nodes_moved } else { 0 },
        pair: Some((a, b)),
        log_ratio: eval.log_ratio,
        rel_pop_change: Some(eval.rel_pop_change),
    };
    if accept {
        mv.commit(s, t, eval);
    } else {
        mv.abort();
    }
    Ok(outcome)
}

/// One step of the mixture kernel: with probability `p_two_tree` propose a
/// 2-tree move, otherwise a 1-tree move. Single-district states always take
/// 1-tree steps.
pub fn step(
    g: &Graph,
    state: &mut ForestState,
    spec: &MeasureSpec,
    p_two_tree: f64,
    rng: &mut impl Rng,
) -> Result<StepOutcome, EnergyError> {
    if state.num_districts() >= 2 && rng.gen::<f64>() < p_two_tree {
        step_2tree(g, state, spec, rng)
    } else {
        Ok(step_1tree(g, state, spec, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LatticeKind::Square;
    use crate::graph::{make_grid, presets, Edge, Graph, Vertex};
    use crate::state::{seed_random, ForestState};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    proptest! {
        #[test]
        fn cut_pair_enumerations_agree(
            masses in prop::collection::vec(0u64..20, 2..12),
            min in 0u64..30,
            width in 0u64..30,
        ) {
            let total: u64 = masses.iter().sum();
            let bounds = PopBounds::window(total, 2, min, min + width);
            prop_assert_eq!(
                valid_cut_pairs(&masses, &bounds),
                valid_cut_pairs_exhaustive(&masses, &bounds)
            );
        }
    }

    #[test]
    fn cut_pair_sampler_matches_pair_weights() {
        let masses = [1u64, 1, 1, 1];
        let inv = [1.0, 2.0, 1.0, 0.5];
        let bounds = PopBounds::window(4, 2, 1, 3);
        let pairs = valid_cut_pairs(&masses, &bounds);
        assert_eq!(pairs.len(), 6);
        let z: f64 = pairs.iter().map(|p| inv[p.s] * inv[p.t]).sum();
        let mut rng = rng(19);
        let draws = 60_000;
        let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for _ in 0..draws {
            let (s, t) = sample_cut_pair(&masses, &inv, &bounds, &mut rng).unwrap();
            *counts.entry((s, t)).or_default() += 1;
        }
        for p in &pairs {
            let expected = inv[p.s] * inv[p.t] / z;
            let seen = counts[&(p.s, p.t)] as f64 / draws as f64;
            assert!(
                (seen - expected).abs() < 0.01,
                "pair ({}, {}): saw {seen}, expected {expected}",
                p.s,
                p.t
            );
        }
    }

    #[test]
    fn sampler_returns_none_when_no_cut_fits() {
        let masses = [5u64, 5, 5];
        let bounds = PopBounds::window(15, 2, 1, 2);
        assert_eq!(sample_cut_pair(&masses, &[1.0; 3], &bounds, &mut rng(1)), None);
        assert!(valid_cut_pairs(&masses, &bounds).is_empty());
    }

    fn single_district(g: &Graph, tree: Vec<EdgeId>) -> ForestState {
        let n = g.num_vertices();
        let total = g.total_population();
        ForestState::from_assignment(
            g,
            vec![0; n],
            &[tree],
            PopBounds::window(total, 1, total, total),
        )
        .unwrap()
    }

    #[test]
    fn one_tree_walk_is_stationary_on_a_square() {
        let g = make_grid(2, 2, Square);
        let mut state = single_district(
            &g,
            vec![
                g.edge_between(0, 1).unwrap(),
                g.edge_between(0, 2).unwrap(),
                g.edge_between(1, 3).unwrap(),
            ],
        );
        let spec = MeasureSpec::default();
        let mut rng = rng(23);
        let mut counts: BTreeMap<Vec<EdgeId>, u32> = BTreeMap::new();
        let steps = 40_000;
        for _ in 0..steps {
            let out = step_1tree(&g, &mut state, &spec, &mut rng);
            assert!(out.accepted);
            *counts.entry(state.district_tree_edges(&g, 0)).or_default() += 1;
        }
        assert_eq!(counts.len(), 4, "the 4-cycle has four spanning trees");
        for &c in counts.values() {
            let freq = c as f64 / steps as f64;
            assert!((freq - 0.25).abs() < 0.02, "tree frequency {freq}");
        }
        state.audit(&g).unwrap();
    }

    #[test]
    fn one_tree_walk_weights_trees_by_their_edge_products() {
        let vertices = vec![Vertex::unit(1); 3];
        let edges = vec![
            Edge { u: 0, v: 1, weight: 1.0, shared_perimeter: 1.0 },
            Edge { u: 1, v: 2, weight: 1.0, shared_perimeter: 1.0 },
            Edge { u: 0, v: 2, weight: 8.0, shared_perimeter: 1.0 },
        ];
        let g = Graph::new(vertices, edges).unwrap();
        let mut state = single_district(&g, vec![0, 1]);
        let spec = MeasureSpec { weighted: true, ..MeasureSpec::default() };
        let mut rng = rng(29);
        let mut counts: BTreeMap<Vec<EdgeId>, u32> = BTreeMap::new();
        let steps = 60_000;
        for _ in 0..steps {
            step_1tree(&g, &mut state, &spec, &mut rng);
            *counts.entry(state.district_tree_edges(&g, 0)).or_default() += 1;
        }
        // Tree weights are the products of their edge weights: 1, 8, 8.
        let freq = |t: &[EdgeId]| counts.get(t).copied().unwrap_or(0) as f64 / steps as f64;
        assert!((freq(&[0, 1]) - 1.0 / 17.0).abs() < 0.02);
        assert!((freq(&[0, 2]) - 8.0 / 17.0).abs() < 0.02);
        assert!((freq(&[1, 2]) - 8.0 / 17.0).abs() < 0.02);
    }

    #[test]
    fn two_tree_walk_flips_between_the_two_balanced_halves() {
        let g = make_grid(2, 2, Square);
        let bounds = PopBounds::window(4, 2, 2, 2);
        let mut state = ForestState::from_assignment(
            &g,
            vec![0, 0, 1, 1],
            &[vec![g.edge_between(0, 1).unwrap()], vec![g.edge_between(2, 3).unwrap()]],
            bounds,
        )
        .unwrap();
        let spec = MeasureSpec::default();
        let mut rng = rng(31);
        let steps = 20_000;
        let mut rows = 0u32;
        for i in 0..steps {
            let before = state.checksum();
            let out = step_2tree(&g, &mut state, &spec, &mut rng).unwrap();
            assert!(out.accepted, "both proposals here have unit Metropolis ratio");
            if !out.changed {
                assert_eq!(state.checksum(), before);
            }
            if state.district_of(0) == state.district_of(1) {
                rows += 1;
            }
            if i % 500 == 0 {
                state.audit(&g).unwrap();
            }
        }
        let freq = rows as f64 / steps as f64;
        assert!((freq - 0.5).abs() < 0.05, "rows occupancy {freq}");
    }

    #[test]
    fn a_single_boundary_edge_cannot_form_a_proposal() {
        let vertices = vec![Vertex::unit(1); 4];
        let edges = vec![Edge::unit(0, 1), Edge::unit(1, 2), Edge::unit(2, 3)];
        let g = Graph::new(vertices, edges).unwrap();
        let mut state = ForestState::from_assignment(
            &g,
            vec![0, 0, 1, 1],
            &[vec![0], vec![2]],
            PopBounds::window(4, 2, 2, 2),
        )
        .unwrap();
        let spec = MeasureSpec::default();
        let before = state.checksum();
        let out = step_2tree(&g, &mut state, &spec, &mut rng(3)).unwrap();
        assert!(!out.accepted && !out.changed);
        assert_eq!(out.pair, Some((0, 1)));
        assert_eq!(state.checksum(), before);
    }

    fn quarters_4x4(g: &Graph) -> ForestState {
        let t = |list: &[(usize, usize)]| {
            list.iter().map(|&(u, v)| g.edge_between(u, v).unwrap()).collect::<Vec<_>>()
        };
        ForestState::from_assignment(
            g,
            vec![0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3],
            &[
                t(&[(0, 1), (0, 4), (4, 5)]),
                t(&[(2, 3), (2, 6), (6, 7)]),
                t(&[(8, 9), (8, 12), (12, 13)]),
                t(&[(10, 11), (10, 14), (14, 15)]),
            ],
            PopBounds::window(16, 4, 3, 4),
        )
        .unwrap()
    }

    #[test]
    fn evaluating_the_identity_cut_scores_zero() {
        let g = presets::grid4_edge_weighted();
        let mut state = quarters_4x4(&g);
        let spec = MeasureSpec { gamma: 1.0, weighted: true, ..MeasureSpec::default() };
        let before = state.checksum();
        let (a, b) = state.adjacent_pairs()[0];
        let boundary = state.boundary_edges(a, b);
        let (bridge, closing) = (boundary[0], boundary[1]);
        let old_stats = [state.district_stats_of(a as usize), state.district_stats_of(b as usize)];
        let mv = TwoTreeMove::open(&g, &mut state, &spec, a, b, bridge, closing).unwrap();
        let cuts = mv.valid_cuts();
        let identity: Vec<&CutPair> =
            cuts.iter().filter(|c| mv.is_identity(c.s, c.t)).collect();
        assert_eq!(identity.len(), 1, "exactly one cut reproduces the current split");
        let id = identity[0];
        let eval = mv.eval_cut(id.s, id.t).unwrap();
        assert!(eval.log_ratio.abs() < 1e-9, "identity log ratio {}", eval.log_ratio);
        assert_eq!(eval.nodes_moved, 0);
        assert_eq!(eval.rel_pop_change, 0.0);
        assert_eq!(eval.new_boundary_len, state_boundary(&mv), "boundary length is preserved");
        let check = |label: DistrictId, stats: &DistrictStats| {
            let old = old_stats[usize::from(label == b)];
            assert_eq!(stats.population, old.population);
            assert_eq!(stats.area.to_bits(), old.area.to_bits());
            assert_eq!(stats.perimeter.to_bits(), old.perimeter.to_bits());
        };
        check(eval.label_inner, &eval.stats_inner);
        check(eval.label_outer, &eval.stats_outer);
        mv.abort();
        assert_eq!(state.checksum(), before);
        state.audit(&g).unwrap();
    }

    fn state_boundary(mv: &TwoTreeMove) -> usize {
        mv.boundary_len
    }

    #[test]
    fn rejections_restore_the_state_exactly() {
        let g = presets::grid4_edge_weighted();
        let mut state = quarters_4x4(&g);
        let spec = MeasureSpec { gamma: 1.0, weighted: true, ..MeasureSpec::default() };
        let mut rng = rng(41);
        let (mut accepted, mut rejected, mut moved) = (0u32, 0u32, 0u32);
        for i in 0..3_000 {
            let before = state.checksum();
            let out = step(&g, &mut state, &spec, 0.5, &mut rng).unwrap();
            if out.kernel == KernelKind::TwoTree {
                if out.accepted {
                    accepted += 1;
                } else {
                    rejected += 1;
                }
            }
            if out.changed && out.nodes_moved > 0 {
                moved += 1;
            }
            if !out.changed {
                assert_eq!(state.checksum(), before, "step {i} altered a kept state");
            }
            if i % 250 == 0 {
                state.audit(&g).unwrap();
            }
        }
        state.audit(&g).unwrap();
        assert!(accepted > 0, "no 2-tree proposal was accepted");
        assert!(rejected > 0, "no 2-tree proposal was rejected");
        assert!(moved > 0, "no proposal relabeled any vertex");
    }

    #[test]
    fn seeded_states_stay_valid_under_long_mixed_runs() {
        let g = make_grid(4, 4, Square);
        let mut state =
            seed_random(&g, 4, PopBounds::window(16, 4, 3, 4), &mut rng(47), 256).unwrap();
        let spec = MeasureSpec::default();
        let mut rng = rng(53);
        for i in 0..5_000 {
            step(&g, &mut state, &spec, 0.25, &mut rng).unwrap();
            if i % 500 == 0 {
                state.audit(&g).unwrap();
            }
        }
        state.audit(&g).unwrap();
        for d in 0..4 {
            assert_eq!(state.district(d).population, 4);
        }
    }
}
