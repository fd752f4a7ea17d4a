//! Target-measure ingredients: weighted spanning-tree counts via the
//! matrix-tree theorem, population and compactness scores, and the combined
//! log measure.
//!
//! The sampled distribution over spanning forests is, up to normalization,
//!
//! ```text
//! exp(-J(partition)) * prod_{e in forest} weight(e)
//!                    * prod_districts tree_weight(district)^(-gamma)
//! ```
//!
//! where `tree_weight` is the weighted spanning-tree count of a district's
//! induced subgraph and `J = j_population + w_compact * j_compact`. Summing
//! over the forests of a fixed partition leaves the partition marginal
//! `exp(-J) * prod_districts tree_weight^(1 - gamma)`: `gamma = 0` weights
//! partitions by their forest count (uniform over forests) and `gamma = 1`
//! cancels it (uniform over partitions).

use crate::graph::{Graph, VertexId};
use crate::state::{ForestState, PopBounds};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("empty vertex set has no spanning tree")]
    EmptyVertexSet,
    #[error("vertex set is disconnected; its spanning-tree count is zero")]
    Disconnected,
    #[error("laplacian factorization failed: pivot {pivot:e} at row {row}")]
    NumericalFailure { row: usize, pivot: f64 },
    #[error("district {district} has zero area")]
    ZeroArea { district: usize },
}

/// Log of the weighted spanning-tree count of the subgraph induced by
/// `vertices`: the log-determinant of a principal minor of the weighted
/// Laplacian, computed by a symmetric (Cholesky) factorization whose
/// log-pivots are summed. Unweighted mode counts trees with every edge
/// weight treated as 1.
pub fn log_tree_count(g: &Graph, vertices: &[VertexId], weighted: bool) -> Result<f64, EnergyError> {
    let n = vertices.len();
    if n == 0 {
        return Err(EnergyError::EmptyVertexSet);
    }
    if n == 1 {
        return Ok(0.0);
    }
    let mut local = std::collections::HashMap::with_capacity(n);
    for (i, &v) in vertices.iter().enumerate() {
        local.insert(v, i);
    }

    // Induced edges, with an explicit connectivity pass so a zero tree count
    // is reported as such rather than as a failed factorization.
    let mut adj_local: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, &v) in vertices.iter().enumerate() {
        for &(w, e) in g.neighbors(v) {
            if let Some(&j) = local.get(&w) {
                let weight = if weighted { g.edge(e).weight } else { 1.0 };
                adj_local[i].push((j, weight));
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut visited = 1;
    while let Some(i) = stack.pop() {
        for &(j, _) in &adj_local[i] {
            if !seen[j] {
                seen[j] = true;
                visited += 1;
                stack.push(j);
            }
        }
    }
    if visited != n {
        return Err(EnergyError::Disconnected);
    }

    // Reduced Laplacian with the last row and column deleted.
    let m = n - 1;
    let mut a = vec![0.0f64; m * m];
    let mut scale = 0.0f64;
    for i in 0..n {
        for &(j, w) in &adj_local[i] {
            if i < m {
                a[i * m + i] += w;
                scale = scale.max(a[i * m + i]);
                if j < m {
                    a[i * m + j] -= w;
                }
            }
        }
    }

    let tol = scale * 1e-12;
    let mut log_det = 0.0;
    for k in 0..m {
        let mut pivot = a[k * m + k];
        for j in 0..k {
            let l = a[k * m + j];
            pivot -= l * l;
        }
        if pivot <= tol {
            return Err(EnergyError::NumericalFailure { row: k, pivot });
        }
        let root = pivot.sqrt();
        log_det += root.ln();
        a[k * m + k] = root;
        for i in (k + 1)..m {
            let mut x = a[i * m + k];
            for j in 0..k {
                x -= a[i * m + j] * a[k * m + j];
            }
            a[i * m + k] = x / root;
        }
    }
    Ok(2.0 * log_det)
}

/// How district populations enter the score: a hard window, a linear soft
/// penalty on relative deviations, or both.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopScore {
    Hard,
    Soft { w_pop: f64 },
    Mixed { w_pop: f64 },
}

/// Parameters of the target measure.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeasureSpec {
    /// Interpolation exponent: 0 is uniform over spanning forests, 1 uniform
    /// over partitions (with unit weights and zero scores).
    pub gamma: f64,
    /// Multiplier on the isoperimetric compactness score.
    pub w_compact: f64,
    pub pop_score: PopScore,
    /// When set, edge weights drive tree counts, proposal probabilities, and
    /// the forest factor of the measure; otherwise all weights are 1.
    pub weighted: bool,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec { gamma: 0.0, w_compact: 0.0, pop_score: PopScore::Hard, weighted: false }
    }
}

/// Per-district aggregates sufficient to score a partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistrictStats {
    pub population: u64,
    pub area: f64,
    pub perimeter: f64,
}

/// One district's contribution to the population score.
pub fn district_pop_term(population: u64, bounds: &PopBounds, pop_score: PopScore) -> f64 {
    let gate = |p: u64| if bounds.contains(p) { 0.0 } else { f64::INFINITY };
    match pop_score {
        PopScore::Hard => gate(population),
        PopScore::Soft { w_pop } => w_pop * bounds.deviation(population).abs(),
        PopScore::Mixed { w_pop } => gate(population) + w_pop * bounds.deviation(population).abs(),
    }
}

/// Population score over all districts. Infinite when a hard window is
/// violated.
pub fn j_population(stats: &[DistrictStats], bounds: &PopBounds, pop_score: PopScore) -> f64 {
    stats.iter().map(|s| district_pop_term(s.population, bounds, pop_score)).sum()
}

/// One district's isoperimetric ratio, perimeter squared over area.
pub fn district_compact_term(stats: &DistrictStats, district: usize) -> Result<f64, EnergyError> {
    if stats.area <= 0.0 {
        return Err(EnergyError::ZeroArea { district });
    }
    Ok(stats.perimeter * stats.perimeter / stats.area)
}

/// Sum of isoperimetric ratios. The caller multiplies by its compactness
/// weight.
pub fn j_compact(stats: &[DistrictStats]) -> Result<f64, EnergyError> {
    let mut total = 0.0;
    for (d, s) in stats.iter().enumerate() {
        total += district_compact_term(s, d)?;
    }
    Ok(total)
}

/// Total score `J`. The compactness term is only evaluated when its weight
/// is nonzero.
pub fn score(stats: &[DistrictStats], bounds: &PopBounds, spec: &MeasureSpec) -> Result<f64, EnergyError> {
    let mut total = j_population(stats, bounds, spec.pop_score);
    if spec.w_compact != 0.0 {
        total += spec.w_compact * j_compact(stats)?;
    }
    Ok(total)
}

/// Score components of a state, serialized into sample records.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoreBreakdown {
    pub j_population: f64,
    pub j_compact: f64,
    pub log_trees: f64,
    pub j_total: f64,
}

pub fn score_breakdown(
    g: &Graph,
    state: &mut ForestState,
    spec: &MeasureSpec,
) -> Result<ScoreBreakdown, EnergyError> {
    let stats = state.district_stats();
    let bounds = *state.bounds();
    let j_pop = j_population(&stats, &bounds, spec.pop_score);
    let j_comp = j_compact(&stats)?;
    let mut log_trees = 0.0;
    for d in 0..state.num_districts() {
        log_trees += state.log_tree_count(g, d, spec.weighted)?;
    }
    Ok(ScoreBreakdown {
        j_population: j_pop,
        j_compact: j_comp,
        log_trees,
        j_total: j_pop + spec.w_compact * j_comp,
    })
}

/// Unnormalized log density of a forest state under the target measure:
/// `-J` plus the log forest weight minus `gamma` times the summed district
/// log tree weights. Infinite scores yield `-inf`.
pub fn log_measure(g: &Graph, state: &mut ForestState, spec: &MeasureSpec) -> Result<f64, EnergyError> {
    let stats = state.district_stats();
    let bounds = *state.bounds();
    let j = score(&stats, &bounds, spec)?;
    if j.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut total = -j;
    if spec.weighted {
        total += state.forest_log_weight(g);
    }
    if spec.gamma != 0.0 {
        for d in 0..state.num_districts() {
            total -= spec.gamma * state.log_tree_count(g, d, spec.weighted)?;
        }
    }
    Ok(total)
}
