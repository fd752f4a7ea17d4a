//! Chain driver: seeds a state, runs the kernel mixture for a configured
//! number of proposals, and streams newline-delimited JSON records.
//!
//! A log starts with a header record carrying the fully resolved
//! configuration, followed by one sample record for the initial state and one
//! per cadence interval after that. Reruns with the same graph and
//! configuration produce byte-identical logs; multi-chain launches get
//! non-overlapping randomness by fixing the seed and varying the stream
//! index.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{district_compact_term, score_breakdown, EnergyError, MeasureSpec, ScoreBreakdown};
use crate::graph::Graph;
use crate::state::{seed_random, DistrictId, ForestState, PopBounds, SeedError, StateError};
use crate::walks::{step, KernelKind, StepOutcome};

/// Quantities recorded per sample. Vote shares name two per-vertex numeric
/// attribute columns and report the first column's fraction of the two
/// columns' sum within each district.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Populations,
    CutEdges,
    Isoperimetric,
    VoteShares { dem: String, rep: String },
    CountySplits,
    ScoreBreakdown,
    Assignment,
}

fn default_sample_every() -> u64 {
    1
}

fn default_seed_retries() -> u32 {
    1000
}

/// Everything one chain needs besides the graph. The header record embeds
/// this verbatim, so a log is reproducible from its own first line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub seed: u64,
    /// Stream index for multi-chain launches; chains sharing a seed but
    /// differing here draw from non-overlapping random streams.
    #[serde(default)]
    pub chain_index: u32,
    /// Total proposals, counting both kernels.
    pub steps: u64,
    /// Record every n-th proposal (the initial state is always recorded).
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
    /// Probability in (0, 1] that a proposal uses the 2-tree kernel.
    pub p_two_tree: f64,
    pub num_districts: usize,
    pub bounds: PopBounds,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub observables: Vec<Observable>,
    #[serde(default = "default_seed_retries")]
    pub seed_retries: u32,
    /// Where the log was written, when launched through the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("p_two_tree must lie in (0, 1], got {0}")]
    BadMixture(f64),
    #[error("sample_every must be at least 1")]
    ZeroCadence,
    #[error("graph has no attribute column named {0:?}")]
    MissingAttribute(String),
    #[error("district {district} has zero total votes in columns {dem:?} and {rep:?}")]
    NoVotes { district: usize, dem: String, rep: String },
    #[error("log line {line}: {message}")]
    MalformedLog { line: usize, message: String },
    #[error("log does not start with a header record")]
    MissingHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Vote shares for one column pair: `shares[d]` is the `dem` column's
/// fraction of the combined vote summed over district `d`'s vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteShareSet {
    pub dem: String,
    pub rep: String,
    pub shares: Vec<f64>,
}

/// First line of every log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub config: ChainConfig,
    pub num_vertices: usize,
    pub num_edges: usize,
    pub total_population: u64,
}

/// One logged state, plus what the proposal landing on it did. The initial
/// record has no kernel and no proposal fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelKind>,
    pub accepted: bool,
    pub changed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_moved: Option<usize>,
    /// Metropolis log ratio of an evaluated 2-tree proposal; omitted when it
    /// was infinite or the step was not one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_pop_change: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_edges: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isoperimetric: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_shares: Option<Vec<VoteShareSet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub county_splits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<DistrictId>>,
}

impl SampleRecord {
    /// Reconstructs the proposal outcome this record describes, for profiling
    /// full-cadence logs. The initial record has none.
    pub fn outcome(&self) -> Option<StepOutcome> {
        Some(StepOutcome {
            kernel: self.kernel?,
            accepted: self.accepted,
            changed: self.changed,
            nodes_moved: self.nodes_moved.unwrap_or(0),
            pair: None,
            log_ratio: self.log_ratio.unwrap_or(f64::NEG_INFINITY),
            rel_pop_change: self.rel_pop_change,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(RunHeader),
    Sample(SampleRecord),
}

/// Step counters accumulated over a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub steps: u64,
    /// Sample records written, counting the initial one.
    pub records: u64,
    pub one_tree_steps: u64,
    pub two_tree_steps: u64,
    /// 2-tree proposals that reached a Metropolis test.
    pub two_tree_evaluated: u64,
    pub two_tree_accepted: u64,
    /// Proposals that relabeled at least one vertex.
    pub partition_changes: u64,
}

/// The generator for chain `chain_index` of a run seeded with `seed`.
/// Distinct indexes select distinct ChaCha streams, so concurrent chains
/// never share randomness.
pub fn chain_rng(seed: u64, chain_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_index as u64);
    rng
}

fn vote_share_set(
    g: &Graph,
    state: &ForestState,
    dem: &str,
    rep: &str,
) -> Result<VoteShareSet, ChainError> {
    let dem_col = g
        .attribute(dem)
        .ok_or_else(|| ChainError::MissingAttribute(dem.to_string()))?;
    let rep_col = g
        .attribute(rep)
        .ok_or_else(|| ChainError::MissingAttribute(rep.to_string()))?;
    let mut shares = Vec::with_capacity(state.num_districts());
    for d in 0..state.num_districts() {
        let (mut dem_sum, mut rep_sum) = (0.0, 0.0);
        for v in state.district_members(d) {
            dem_sum += dem_col[v];
            rep_sum += rep_col[v];
        }
        if dem_sum + rep_sum == 0.0 {
            return Err(ChainError::NoVotes {
                district: d,
                dem: dem.to_string(),
                rep: rep.to_string(),
            });
        }
        shares.push(dem_sum / (dem_sum + rep_sum));
    }
    Ok(VoteShareSet { dem: dem.to_string(), rep: rep.to_string(), shares })
}

/// Reads the requested observables out of a state. Exposed for the CLI's
/// enumeration pushforwards and one-off inspections; `run_to_writer` calls it
/// at every cadence point.
pub fn extract_observables(
    g: &Graph,
    state: &mut ForestState,
    requested: &[Observable],
    measure: &MeasureSpec,
    record: &mut SampleRecord,
) -> Result<(), ChainError> {
    for obs in requested {
        match obs {
            Observable::Populations => {
                let pops: Vec<u64> =
                    (0..state.num_districts()).map(|d| state.district(d).population).collect();
                for (d, &p) in pops.iter().enumerate() {
                    assert!(
                        state.bounds().contains(p),
                        "district {d} population {p} escaped its bounds"
                    );
                }
                record.populations = Some(pops);
            }
            Observable::CutEdges => record.cut_edges = Some(state.cut_edge_count()),
            Observable::Isoperimetric => {
                let mut ratios = Vec::with_capacity(state.num_districts());
                for d in 0..state.num_districts() {
                    ratios.push(district_compact_term(&state.district_stats_of(d), d)?);
                }
                record.isoperimetric = Some(ratios);
            }
            Observable::VoteShares { dem, rep } => {
                record
                    .vote_shares
                    .get_or_insert_with(Vec::new)
                    .push(vote_share_set(g, state, dem, rep)?);
            }
            Observable::CountySplits => {
                record.county_splits = Some(state.county_split_count(g)?);
            }
            Observable::ScoreBreakdown => {
                record.score = Some(score_breakdown(g, state, measure)?);
            }
            Observable::Assignment => record.assignment = Some(state.assignment().to_vec()),
        }
    }
    Ok(())
}

fn sample_record(
    g: &Graph,
    state: &mut ForestState,
    cfg: &ChainConfig,
    step: u64,
    outcome: Option<&StepOutcome>,
) -> Result<SampleRecord, ChainError> {
    let mut record = SampleRecord {
        step,
        kernel: outcome.map(|o| o.kernel),
        accepted: outcome.map_or(true, |o| o.accepted),
        changed: outcome.map_or(false, |o| o.changed),
        nodes_moved: outcome.map(|o| o.nodes_moved),
        log_ratio: outcome.and_then(|o| o.log_ratio.is_finite().then_some(o.log_ratio)),
        rel_pop_change: outcome.and_then(|o| o.rel_pop_change),
        populations: None,
        cut_edges: None,
        isoperimetric: None,
        vote_shares: None,
        county_splits: None,
        score: None,
        assignment: None,
    };
    extract_observables(g, state, &cfg.observables, &cfg.measure, &mut record)?;
    Ok(record)
}

fn write_record(out: &mut impl Write, record: &LogRecord) -> Result<(), ChainError> {
    serde_json::to_writer(&mut *out, record)
        .map_err(|e| ChainError::Io(std::io::Error::other(e)))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Seeds a fresh state and drives the kernel mixture for `cfg.steps`
/// proposals, logging to `out`. Returns aggregate counters; the log itself
/// carries the per-sample detail.
pub fn run_to_writer(
    g: &Graph,
    cfg: &ChainConfig,
    out: &mut impl Write,
) -> Result<RunSummary, ChainError> {
    if !(cfg.p_two_tree > 0.0 && cfg.p_two_tree <= 1.0) {
        return Err(ChainError::BadMixture(cfg.p_two_tree));
    }
    if cfg.sample_every == 0 {
        return Err(ChainError::ZeroCadence);
    }
    let mut rng = chain_rng(cfg.seed, cfg.chain_index);
    let mut state = seed_random(g, cfg.num_districts, cfg.bounds, &mut rng, cfg.seed_retries)?;

    let header = RunHeader {
        config: cfg.clone(),
        num_vertices: g.num_vertices(),
        num_edges: g.num_edges(),
        total_population: g.total_population(),
    };
    write_record(out, &LogRecord::Header(header))?;
    let initial = sample_record(g, &mut state, cfg, 0, None)?;
    write_record(out, &LogRecord::Sample(initial))?;

    let mut summary = RunSummary { steps: cfg.steps, records: 1, ..RunSummary::default() };
    for i in 1..=cfg.steps {
        let outcome = step(g, &mut state, &cfg.measure, cfg.p_two_tree, &mut rng)?;
        match outcome.kernel {
            KernelKind::OneTree => summary.one_tree_steps += 1,
            KernelKind::TwoTree => {
                summary.two_tree_steps += 1;
                if outcome.rel_pop_change.is_some() {
                    summary.two_tree_evaluated += 1;
                }
                if outcome.accepted {
                    summary.two_tree_accepted += 1;
                }
            }
        }
        if outcome.nodes_moved > 0 {
            summary.partition_changes += 1;
        }
        if i % cfg.sample_every == 0 {
            let record = sample_record(g, &mut state, cfg, i, Some(&outcome))?;
            write_record(out, &LogRecord::Sample(record))?;
            summary.records += 1;
        }
    }
    Ok(summary)
}

/// Parses a log back into its header and samples. Lines must hold exactly
/// one record each, header first.
pub fn read_log(text: &str) -> Result<(RunHeader, Vec<SampleRecord>), ChainError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines.next().ok_or(ChainError::MissingHeader)?;
    let parse = |n: usize, line: &str| -> Result<LogRecord, ChainError> {
        serde_json::from_str(line)
            .map_err(|e| ChainError::MalformedLog { line: n + 1, message: e.to_string() })
    };
    let LogRecord::Header(header) = parse(n, first)? else {
        return Err(ChainError::MissingHeader);
    };
    let mut samples = Vec::new();
    for (n, line) in lines {
        match parse(n, line)? {
            LogRecord::Sample(s) => samples.push(s),
            LogRecord::Header(_) => {
                return Err(ChainError::MalformedLog {
                    line: n + 1,
                    message: "second header record".to_string(),
                })
            }
        }
    }
    Ok((header, samples))
}

/// Column-wise series extraction used by the diagnostics front end: pulls
/// one scalar per record, skipping records that lack it.
pub fn scalar_series(samples: &[SampleRecord], pick: impl Fn(&SampleRecord) -> Option<f64>) -> Vec<f64> {
    samples.iter().filter_map(pick).collect()
}

/// Per-district series for ranked-marginal diagnostics: each returned row is
/// one record's vector, in record order.
pub fn district_series(
    samples: &[SampleRecord],
    pick: impl Fn(&SampleRecord) -> Option<Vec<f64>>,
) -> Vec<Vec<f64>> {
    samples.iter().filter_map(pick).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LatticeKind::Square;
    use crate::graph::{make_grid, Edge, Vertex};
    use crate::state::PopBounds;
    use std::collections::BTreeMap;

    fn quad_config(steps: u64, observables: Vec<Observable>) -> ChainConfig {
        ChainConfig {
            seed: 11,
            chain_index: 0,
            steps,
            sample_every: 1,
            p_two_tree: 0.5,
            num_districts: 4,
            bounds: PopBounds::window(16, 4, 4, 4),
            measure: MeasureSpec::default(),
            observables,
            seed_retries: 200,
            output: None,
        }
    }

    #[test]
    fn a_zero_step_run_logs_header_and_initial_state() {
        let g = make_grid(4, 4, Square);
        let cfg = quad_config(0, vec![Observable::Populations, Observable::CutEdges]);
        let mut buf = Vec::new();
        let summary = run_to_writer(&g, &cfg, &mut buf).unwrap();
        assert_eq!(summary.records, 1);
        assert_eq!(summary.steps, 0);

        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let (header, samples) = read_log(&text).unwrap();
        assert_eq!(header.config, cfg);
        assert_eq!(header.total_population, 16);
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].step, 0);
        assert_eq!(samples[0].kernel, None);
        assert_eq!(samples[0].populations, Some(vec![4, 4, 4, 4]));
        assert!(samples[0].cut_edges.is_some());
    }

    #[test]
    fn identical_configs_produce_identical_bytes() {
        let g = make_grid(4, 4, Square);
        let cfg = quad_config(
            400,
            vec![Observable::Populations, Observable::CutEdges, Observable::Assignment],
        );
        let mut first = Vec::new();
        let mut second = Vec::new();
        run_to_writer(&g, &cfg, &mut first).unwrap();
        run_to_writer(&g, &cfg, &mut second).unwrap();
        assert_eq!(first, second);

        let mut sibling = Vec::new();
        let other = ChainConfig { chain_index: 1, ..cfg };
        run_to_writer(&g, &other, &mut sibling).unwrap();
        assert_ne!(first, sibling);
    }

    #[test]
    fn kernel_mixture_matches_the_configured_rate() {
        let g = make_grid(2, 2, Square);
        let p = 0.1;
        let cfg = ChainConfig {
            seed: 5,
            chain_index: 0,
            steps: 100_000,
            sample_every: 100_000,
            p_two_tree: p,
            num_districts: 2,
            bounds: PopBounds::window(4, 2, 2, 2),
            measure: MeasureSpec::default(),
            observables: Vec::new(),
            seed_retries: 100,
            output: None,
        };
        let mut buf = Vec::new();
        let summary = run_to_writer(&g, &cfg, &mut buf).unwrap();
        let fraction = summary.two_tree_steps as f64 / summary.steps as f64;
        let three_sigma = 3.0 * (p * (1.0 - p) / summary.steps as f64).sqrt();
        assert!((fraction - p).abs() <= three_sigma, "fraction {fraction}");
        assert_eq!(summary.one_tree_steps + summary.two_tree_steps, summary.steps);
    }

    #[test]
    fn cadence_controls_which_steps_are_recorded() {
        let g = make_grid(4, 4, Square);
        let cfg = ChainConfig { sample_every: 3, ..quad_config(10, vec![]) };
        let mut buf = Vec::new();
        let summary = run_to_writer(&g, &cfg, &mut buf).unwrap();
        assert_eq!(summary.records, 4);
        let (_, samples) = read_log(&String::from_utf8(buf).unwrap()).unwrap();
        let steps: Vec<u64> = samples.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 3, 6, 9]);
    }

    /// Path of four vertices split down the middle, with vote columns and
    /// counties chosen so every observable has a hand-checkable value.
    fn vote_fixture() -> (Graph, ForestState) {
        let vertices: Vec<Vertex> = ["west", "west", "east", "east"]
            .iter()
            .map(|county| Vertex {
                population: 1,
                area: 1.0,
                exterior_perimeter: 1.0,
                county: Some(county.to_string()),
            })
            .collect();
        let edges = vec![Edge::unit(0, 1), Edge::unit(1, 2), Edge::unit(2, 3)];
        let attributes = BTreeMap::from([
            ("dem".to_string(), vec![30.0, 10.0, 5.0, 5.0]),
            ("rep".to_string(), vec![10.0, 10.0, 15.0, 25.0]),
        ]);
        let g = Graph::with_attributes(vertices, edges, attributes).unwrap();
        let bounds = PopBounds::window(4, 2, 2, 2);
        let state =
            ForestState::from_assignment(&g, vec![0, 0, 1, 1], &[vec![0], vec![2]], bounds)
                .unwrap();
        (g, state)
    }

    #[test]
    fn vote_shares_aggregate_per_district() {
        let (g, mut state) = vote_fixture();
        let requested = vec![
            Observable::VoteShares { dem: "dem".to_string(), rep: "rep".to_string() },
            Observable::CountySplits,
        ];
        let mut record = SampleRecord {
            step: 0,
            kernel: None,
            accepted: true,
            changed: false,
            nodes_moved: None,
            log_ratio: None,
            rel_pop_change: None,
            populations: None,
            cut_edges: None,
            isoperimetric: None,
            vote_shares: None,
            county_splits: None,
            score: None,
            assignment: None,
        };
        extract_observables(&g, &mut state, &requested, &MeasureSpec::default(), &mut record)
            .unwrap();
        let sets = record.vote_shares.unwrap();
        assert_eq!(sets.len(), 1);
        // District 0: 40 of 60 votes; district 1: 10 of 50.
        assert_eq!(sets[0].shares, vec![40.0 / 60.0, 10.0 / 50.0]);
        assert_eq!(record.county_splits, Some(0));
    }

    #[test]
    fn a_single_district_share_is_the_global_share() {
        let (g, _) = vote_fixture();
        let bounds = PopBounds::window(4, 1, 4, 4);
        let state =
            ForestState::from_assignment(&g, vec![0; 4], &[vec![0, 1, 2]], bounds).unwrap();
        let set = vote_share_set(&g, &state, "dem", "rep").unwrap();
        assert_eq!(set.shares, vec![50.0 / 110.0]);
    }

    #[test]
    fn missing_vote_columns_are_reported() {
        let (g, state) = vote_fixture();
        let err = vote_share_set(&g, &state, "dem", "turnout").unwrap_err();
        assert!(matches!(err, ChainError::MissingAttribute(name) if name == "turnout"));
    }

    #[test]
    fn logs_round_trip_with_all_observables() {
        let g = crate::graph::presets::grid4_perimeter_weighted();
        let mut cfg = quad_config(
            60,
            vec![
                Observable::Populations,
                Observable::CutEdges,
                Observable::Isoperimetric,
                Observable::ScoreBreakdown,
                Observable::Assignment,
            ],
        );
        cfg.sample_every = 10;
        cfg.measure = MeasureSpec { gamma: 1.0, w_compact: 0.02, ..MeasureSpec::default() };
        let mut buf = Vec::new();
        let summary = run_to_writer(&g, &cfg, &mut buf).unwrap();
        assert_eq!(summary.records, 7);

        let (header, samples) = read_log(&String::from_utf8(buf.clone()).unwrap()).unwrap();
        assert_eq!(header.config, cfg);
        assert_eq!(samples.len(), 7);
        for s in &samples {
            let pops = s.populations.as_ref().unwrap();
            assert!(pops.iter().all(|&p| (3..=4).contains(&p)));
            assert_eq!(pops.iter().sum::<u64>(), 16);
            assert_eq!(s.isoperimetric.as_ref().unwrap().len(), 4);
            let score = s.score.unwrap();
            assert!(score.j_total.is_finite() && score.log_trees.is_finite());
            assert_eq!(s.assignment.as_ref().unwrap().len(), 16);
        }
        // Re-serializing what was read reproduces the original bytes.
        let mut again = Vec::new();
        write_record(&mut again, &LogRecord::Header(header)).unwrap();
        for s in samples {
            write_record(&mut again, &LogRecord::Sample(s)).unwrap();
        }
        assert_eq!(buf, again);
    }

    #[test]
    fn bad_mixture_and_cadence_are_rejected() {
        let g = make_grid(2, 2, Square);
        let mut cfg = ChainConfig {
            seed: 1,
            chain_index: 0,
            steps: 1,
            sample_every: 1,
            p_two_tree: 0.0,
            num_districts: 2,
            bounds: PopBounds::window(4, 2, 2, 2),
            measure: MeasureSpec::default(),
            observables: Vec::new(),
            seed_retries: 10,
            output: None,
        };
        let mut buf = Vec::new();
        assert!(matches!(run_to_writer(&g, &cfg, &mut buf), Err(ChainError::BadMixture(_))));
        cfg.p_two_tree = 0.5;
        cfg.sample_every = 0;
        assert!(matches!(run_to_writer(&g, &cfg, &mut buf), Err(ChainError::ZeroCadence)));
    }

    #[test]
    fn record_outcomes_reconstruct_proposal_streams() {
        let g = make_grid(4, 4, Square);
        let cfg = quad_config(300, vec![]);
        let mut buf = Vec::new();
        let summary = run_to_writer(&g, &cfg, &mut buf).unwrap();
        let (_, samples) = read_log(&String::from_utf8(buf).unwrap()).unwrap();
        assert!(samples[0].outcome().is_none());
        let outcomes: Vec<StepOutcome> =
            samples.iter().filter_map(|s| s.outcome()).collect();
        assert_eq!(outcomes.len(), 300);
        let two_tree =
            outcomes.iter().filter(|o| o.kernel == KernelKind::TwoTree).count() as u64;
        assert_eq!(two_tree, summary.two_tree_steps);
        let profile = crate::diagnostics::proposal_profile(&outcomes);
        assert_eq!(profile.one_tree_steps as u64, summary.one_tree_steps);
        assert_eq!(
            profile.two_tree_evaluated as u64 + profile.two_tree_unformed as u64,
            summary.two_tree_steps
        );
    }
}
