//! Convergence and proposal diagnostics for sampler runs.
//!
//! Chains are compared through total-variation distances between binned
//! observables, rank-ordered so that district labels play no role, plus the
//! classic between/within variance ratio and an integrated autocorrelation
//! time. Proposal streams are profiled by how acceptance decays with the
//! size of the attempted population change.

use std::collections::BTreeMap;

use crate::walks::{KernelKind, StepOutcome};

/// Uniform binning over `[lo, hi]`; out-of-range values land in the edge
/// bins so mass is never dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins >= 1 && hi > lo, "need a positive range and at least one bin");
        HistogramSpec { lo, hi, bins }
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let scaled = (x - self.lo) / (self.hi - self.lo) * self.bins as f64;
        (scaled.floor().max(0.0) as usize).min(self.bins - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(spec: HistogramSpec) -> Self {
        Histogram { spec, counts: vec![0; spec.bins], total: 0 }
    }

    pub fn add(&mut self, x: f64) {
        self.counts[self.spec.bin_of(x)] += 1;
        self.total += 1;
    }

    pub fn add_all(&mut self, values: impl IntoIterator<Item = f64>) {
        for x in values {
            self.add(x);
        }
    }

    /// Bin frequencies; all zero for an empty histogram.
    pub fn probabilities(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Total-variation distance to another histogram over the same binning.
    pub fn tv(&self, other: &Histogram) -> f64 {
        assert_eq!(self.spec, other.spec, "histograms use different binnings");
        tv_distance(&self.probabilities(), &other.probabilities())
    }
}

/// Total-variation distance between two discrete distributions: half the
/// absolute difference, summed.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions have different supports");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Reorders each sample's per-district values into ranks: `result[r][i]` is
/// the `r`-th smallest entry of sample `i`. Rank views compare chains
/// without caring how districts are labeled.
pub fn ranked_marginals(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = samples.first() else {
        return Vec::new();
    };
    let d = first.len();
    let mut out = vec![Vec::with_capacity(samples.len()); d];
    for sample in samples {
        assert_eq!(sample.len(), d, "samples have different district counts");
        let mut sorted = sample.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("rankable values"));
        for (r, v) in sorted.into_iter().enumerate() {
            out[r].push(v);
        }
    }
    out
}

/// Worst pairwise distance between chains, where each pair's distance is the
/// mean over ranks of the total-variation distance between their rank
/// histograms. Zero for fewer than two chains.
pub fn max_pairwise_ranked_tv(chains: &[Vec<Vec<f64>>], spec: HistogramSpec) -> f64 {
    let ranked: Vec<Vec<Histogram>> = chains
        .iter()
        .map(|samples| {
            ranked_marginals(samples)
                .into_iter()
                .map(|values| {
                    let mut h = Histogram::new(spec);
                    h.add_all(values);
                    h
                })
                .collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for i in 0..ranked.len() {
        for j in i + 1..ranked.len() {
            assert_eq!(ranked[i].len(), ranked[j].len(), "chains have different rank counts");
            let mean: f64 = ranked[i]
                .iter()
                .zip(&ranked[j])
                .map(|(a, b)| a.tv(b))
                .sum::<f64>()
                / ranked[i].len().max(1) as f64;
            worst = worst.max(mean);
        }
    }
    worst
}

/// Between/within variance diagnostic over equal-length chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GelmanRubin {
    pub rhat: f64,
    /// Set when the within-chain variance vanished and the ratio is only a
    /// sentinel: 1 for identical constant chains, a large value otherwise.
    pub degenerate: bool,
}

pub fn gelman_rubin(chains: &[Vec<f64>]) -> GelmanRubin {
    assert!(chains.len() >= 2, "need at least two chains");
    let n = chains[0].len();
    assert!(n >= 2, "need at least two samples per chain");
    for c in chains {
        assert_eq!(c.len(), n, "chains have different lengths");
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| c.iter().map(|&x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    let b_over_n =
        means.iter().map(|&mu| (mu - grand).powi(2)).sum::<f64>() / (m - 1.0);
    if w == 0.0 {
        return GelmanRubin { rhat: if b_over_n == 0.0 { 1.0 } else { 1e12 }, degenerate: true };
    }
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    GelmanRubin { rhat: (var_plus / w).sqrt(), degenerate: false }
}

/// Lag-`k` autocorrelation with the usual biased normalization.
pub fn autocorrelation(series: &[f64], lag: usize) -> f64 {
    let n = series.len();
    assert!(lag < n, "lag exceeds the series");
    let mean = series.iter().sum::<f64>() / n as f64;
    let denom: f64 = series.iter().map(|&x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return f64::NAN;
    }
    let num: f64 = series[..n - lag]
        .iter()
        .zip(&series[lag..])
        .map(|(&a, &b)| (a - mean) * (b - mean))
        .sum();
    num / denom
}

/// Steps per effectively independent sample: one plus twice the sum of
/// autocorrelations, truncated at the first non-positive lag. An
/// uncorrelated series scores 1; a constant series has no information and
/// scores infinity.
pub fn ess_steps(series: &[f64]) -> f64 {
    let n = series.len();
    assert!(n >= 2, "need at least two samples");
    let mut tau = 1.0;
    for lag in 1..n {
        let rho = autocorrelation(series, lag);
        if rho.is_nan() {
            return f64::INFINITY;
        }
        if rho <= 0.0 {
            break;
        }
        tau += 2.0 * rho;
    }
    tau
}

/// Acceptance behavior of a proposal stream, grouped by how much population
/// each proposal tried to move.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalProfile {
    /// Rel-pop-change cut points between the four groups.
    pub quartile_edges: [f64; 3],
    pub quartile_counts: [usize; 4],
    pub quartile_acceptance: [f64; 4],
    /// Relabeled-vertex counts over accepted partition changes.
    pub nodes_moved: BTreeMap<usize, u64>,
    pub one_tree_steps: usize,
    /// 2-tree proposals that reached a Metropolis test.
    pub two_tree_evaluated: usize,
    /// 2-tree proposals that never formed (no second boundary edge).
    pub two_tree_unformed: usize,
    /// Acceptance rate over evaluated 2-tree proposals.
    pub acceptance_rate: f64,
}

pub fn proposal_profile(outcomes: &[StepOutcome]) -> ProposalProfile {
    let mut evaluated: Vec<(f64, bool)> = Vec::new();
    let mut nodes_moved: BTreeMap<usize, u64> = BTreeMap::new();
    let mut one_tree_steps = 0;
    let mut two_tree_unformed = 0;
    for out in outcomes {
        match out.kernel {
            KernelKind::OneTree => one_tree_steps += 1,
            KernelKind::TwoTree => match out.rel_pop_change {
                Some(rel) => {
                    evaluated.push((rel, out.accepted));
                    if out.accepted && out.nodes_moved > 0 {
                        *nodes_moved.entry(out.nodes_moved).or_default() += 1;
                    }
                }
                None => two_tree_unformed += 1,
            },
        }
    }
    let mut sorted: Vec<f64> = evaluated.iter().map(|&(rel, _)| rel).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("rankable values"));
    // Each edge is the inclusive upper bound of its quarter, so binning by
    // strict comparison splits evenly when the count divides by four.
    let edge = |q: f64| {
        if sorted.is_empty() {
            0.0
        } else {
            let idx = (sorted.len() as f64 * q).ceil() as usize;
            sorted[idx.saturating_sub(1).min(sorted.len() - 1)]
        }
    };
    let quartile_edges = [edge(0.25), edge(0.5), edge(0.75)];
    let bin_of = |rel: f64| quartile_edges.iter().filter(|&&e| rel > e).count();
    let mut counts = [0usize; 4];
    let mut accepted = [0usize; 4];
    let mut accepted_total = 0usize;
    for &(rel, acc) in &evaluated {
        let b = bin_of(rel);
        counts[b] += 1;
        if acc {
            accepted[b] += 1;
            accepted_total += 1;
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    ProposalProfile {
        quartile_edges,
        quartile_counts: counts,
        quartile_acceptance: [
            rate(accepted[0], counts[0]),
            rate(accepted[1], counts[1]),
            rate(accepted[2], counts[2]),
            rate(accepted[3], counts[3]),
        ],
        nodes_moved,
        one_tree_steps,
        two_tree_evaluated: evaluated.len(),
        two_tree_unformed,
        acceptance_rate: rate(accepted_total, evaluated.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tv_of_simple_pair_is_three_tenths() {
        assert!((tv_distance(&[0.5, 0.5], &[0.8, 0.2]) - 0.3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn tv_is_a_bounded_metric(
            a in prop::collection::vec(0.0f64..1.0, 4),
            b in prop::collection::vec(0.0f64..1.0, 4),
            c in prop::collection::vec(0.0f64..1.0, 4),
        ) {
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum::<f64>().max(1e-12);
                v.iter().map(|x| x / s).collect::<Vec<_>>()
            };
            let (a, b, c) = (norm(&a), norm(&b), norm(&c));
            let (ab, ba) = (tv_distance(&a, &b), tv_distance(&b, &a));
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
            prop_assert!(tv_distance(&a, &a) < 1e-12);
            prop_assert!(ab <= tv_distance(&a, &c) + tv_distance(&c, &b) + 1e-12);
        }
    }

    #[test]
    fn histogram_clamps_outliers_into_edge_bins() {
        let mut h = Histogram::new(HistogramSpec::new(0.0, 1.0, 4));
        h.add_all([-5.0, 0.1, 0.3, 0.6, 0.9, 7.0]);
        assert_eq!(h.counts, vec![2, 1, 1, 2]);
        assert!((h.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_strip_labeling() {
        let samples = vec![vec![3.0, 1.0, 2.0], vec![2.0, 3.0, 1.0]];
        let ranked = ranked_marginals(&samples);
        assert_eq!(ranked, vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]);
    }

    #[test]
    fn permuted_chains_have_zero_ranked_distance() {
        let spec = HistogramSpec::new(0.0, 4.0, 8);
        let a = vec![vec![1.0, 3.0], vec![2.0, 0.5]];
        let b = vec![vec![3.0, 1.0], vec![0.5, 2.0]];
        assert_eq!(max_pairwise_ranked_tv(&[a, b], spec), 0.0);
    }

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0f64;
        (0..n)
            .map(|_| {
                x = rho * x + rng.gen_range(-1.0..1.0);
                x
            })
            .collect()
    }

    #[test]
    fn matched_chains_score_near_one() {
        let chains: Vec<Vec<f64>> = (0..4).map(|i| ar1(0.3, 20_000, 100 + i)).collect();
        let gr = gelman_rubin(&chains);
        assert!(!gr.degenerate);
        assert!((gr.rhat - 1.0).abs() < 0.01, "rhat {}", gr.rhat);
    }

    #[test]
    fn shifted_chains_score_far_from_one() {
        let mut chains: Vec<Vec<f64>> = (0..4).map(|i| ar1(0.3, 2_000, 200 + i)).collect();
        for x in &mut chains[0] {
            *x += 5.0;
        }
        let gr = gelman_rubin(&chains);
        assert!(gr.rhat > 1.5, "rhat {}", gr.rhat);
    }

    #[test]
    fn constant_chains_are_flagged() {
        let same = gelman_rubin(&[vec![2.0; 10], vec![2.0; 10]]);
        assert!(same.degenerate && same.rhat == 1.0);
        let split = gelman_rubin(&[vec![1.0; 10], vec![2.0; 10]]);
        assert!(split.degenerate && split.rhat > 1e6);
    }

    #[test]
    fn ar1_with_half_decay_needs_three_steps() {
        let series = ar1(0.5, 1_000_000, 7);
        let tau = ess_steps(&series);
        assert!((tau - 3.0).abs() < 0.1, "tau {tau}");
    }

    #[test]
    fn alternating_series_truncates_immediately() {
        let series: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(ess_steps(&series), 1.0);
    }

    #[test]
    fn independent_draws_need_about_one_step() {
        let series = ar1(0.0, 200_000, 13);
        let tau = ess_steps(&series);
        assert!((tau - 1.0).abs() < 0.1, "tau {tau}");
    }

    #[test]
    fn constant_series_has_no_information() {
        assert_eq!(ess_steps(&[4.0; 50]), f64::INFINITY);
    }

    #[test]
    fn profile_groups_acceptance_by_pop_change() {
        let two_tree = |rel: f64, accepted: bool, nodes: usize| StepOutcome {
            kernel: KernelKind::TwoTree,
            accepted,
            changed: accepted && nodes > 0,
            nodes_moved: nodes,
            pair: Some((0, 1)),
            log_ratio: 0.0,
            rel_pop_change: Some(rel),
        };
        let one_tree = StepOutcome {
            kernel: KernelKind::OneTree,
            accepted: true,
            changed: true,
            nodes_moved: 0,
            pair: None,
            log_ratio: 0.0,
            rel_pop_change: None,
        };
        let unformed = StepOutcome {
            kernel: KernelKind::TwoTree,
            accepted: false,
            changed: false,
            nodes_moved: 0,
            pair: Some((0, 1)),
            log_ratio: f64::NEG_INFINITY,
            rel_pop_change: None,
        };
        let mut outcomes = vec![one_tree, unformed];
        // Eight evaluated proposals: small changes always accepted, large
        // never.
        for i in 0..8 {
            let rel = 0.1 * (i + 1) as f64;
            outcomes.push(two_tree(rel, i < 4, if i < 4 { i + 1 } else { 0 }));
        }
        let profile = proposal_profile(&outcomes);
        assert_eq!(profile.one_tree_steps, 1);
        assert_eq!(profile.two_tree_unformed, 1);
        assert_eq!(profile.two_tree_evaluated, 8);
        assert_eq!(profile.quartile_counts, [2, 2, 2, 2]);
        assert_eq!(profile.quartile_acceptance, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(profile.acceptance_rate, 0.5);
        assert_eq!(profile.nodes_moved, BTreeMap::from([(1, 1), (2, 1), (3, 1), (4, 1)]));
    }
}
