//! Replications, the 3x3x3 factorial sweep, run-length selection by mean
//! square pure error, and aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{simulate, RunControl, RunOutput, SimError, SimOptions};
use crate::network::NodeKind;
use crate::scenario::{FactorLevels, Level, ScenarioConfig};
use crate::stats::NodeSummary;
use crate::stochastic::mix_seed;

/// Seed for the random streams of one replication. Under common random
/// numbers the scenario does not enter the seed, so every scenario sees the
/// same streams for a given replication.
pub fn run_seed(config: &ScenarioConfig, replication: u32) -> u64 {
    let master = config.run.master_seed.to_le_bytes();
    let rep = replication.to_le_bytes();
    if config.run.crn {
        mix_seed(&[&master, &rep])
    } else {
        mix_seed(&[&master, &rep, config.digest().as_bytes()])
    }
}

pub fn run_scenario(config: &ScenarioConfig, replication: u32, options: &SimOptions) -> Result<RunOutput, SimError> {
    simulate(config, run_seed(config, replication), options)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub rep: u32,
    pub seed: u64,
    pub nodes: Vec<NodeSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation; 0 when there is a single replication.
    pub std: f64,
}

impl MetricStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MetricStats { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricStats { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAggregate {
    pub node_id: crate::network::NodeId,
    pub node_kind: NodeKind,
    pub fill_rate_orders: MetricStats,
    pub fill_rate_quantity: MetricStats,
    pub avg_on_hand: MetricStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario_id: String,
    pub factors: FactorLevels,
    pub replications: Vec<ReplicationResult>,
    pub aggregate: Vec<NodeAggregate>,
    /// False with a single replication, where the reported std is 0.
    pub std_defined: bool,
    pub warnings: Vec<String>,
}

impl ScenarioResult {
    pub fn from_replications(scenario_id: String, factors: FactorLevels, replications: Vec<ReplicationResult>) -> Self {
        let std_defined = replications.len() > 1;
        let mut warnings = Vec::new();
        if !std_defined {
            warnings.push("single replication: standard deviations reported as 0".to_string());
        } else if replications.windows(2).all(|w| w[0].nodes == w[1].nodes) {
            warnings.push(
                "all replications produced identical results; check that replication seeds differ"
                    .to_string(),
            );
        }
        let node_count = replications.first().map_or(0, |r| r.nodes.len());
        let aggregate = (0..node_count)
            .map(|k| {
                let col = |f: fn(&NodeSummary) -> f64| -> Vec<f64> {
                    replications.iter().map(|r| f(&r.nodes[k])).collect()
                };
                let first = &replications[0].nodes[k];
                NodeAggregate {
                    node_id: first.node_id,
                    node_kind: first.node_kind,
                    fill_rate_orders: MetricStats::of(&col(|n| n.fill_rate_orders)),
                    fill_rate_quantity: MetricStats::of(&col(|n| n.fill_rate_quantity)),
                    avg_on_hand: MetricStats::of(&col(|n| n.avg_on_hand)),
                }
            })
            .collect();
        ScenarioResult {
            scenario_id,
            factors,
            replications,
            aggregate,
            std_defined,
            warnings,
        }
    }
}

fn mean_over(nodes: &[NodeSummary], kind: NodeKind, f: fn(&NodeSummary) -> f64) -> f64 {
    let v: Vec<f64> = nodes.iter().filter(|n| n.node_kind == kind).map(f).collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Mean order fill rate over stores.
pub fn store_fill_rate(nodes: &[NodeSummary]) -> f64 {
    mean_over(nodes, NodeKind::Store, |n| n.fill_rate_orders)
}

pub fn store_quantity_loss(nodes: &[NodeSummary]) -> f64 {
    mean_over(nodes, NodeKind::Store, |n| n.fill_rate_quantity)
}

pub fn dc_fill_rate(nodes: &[NodeSummary]) -> f64 {
    mean_over(nodes, NodeKind::DistributionCenter, |n| n.fill_rate_orders)
}

pub fn store_avg_on_hand(nodes: &[NodeSummary]) -> f64 {
    mean_over(nodes, NodeKind::Store, |n| n.avg_on_hand)
}

#[derive(Debug, Clone, Default)]
pub struct ReplicateOptions {
    /// Maximum simulations in flight; 0 means one per core.
    pub jobs: usize,
    pub control: Option<RunControl>,
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

/// Run every replication of `config` on independent instances.
pub fn replicate(config: &ScenarioConfig, options: &ReplicateOptions) -> Result<ScenarioResult, SimError> {
    config.validate()?;
    let sim = SimOptions {
        control: options.control.clone(),
        ..SimOptions::default()
    };
    let reps = pool(options.jobs).install(|| {
        (0..config.run.replications)
            .into_par_iter()
            .map(|rep| {
                let out = run_scenario(config, rep, &sim)?;
                Ok(ReplicationResult {
                    rep,
                    seed: run_seed(config, rep),
                    nodes: out.nodes,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()
    })?;
    let id = if config.name.is_empty() {
        config.digest()[..12].to_string()
    } else {
        config.name.clone()
    };
    Ok(ScenarioResult::from_replications(id, config.factors, reps))
}

/// The 27 level combinations with intensity varying slowest and lead time
/// fastest.
pub fn factorial_levels() -> Vec<FactorLevels> {
    let mut out = Vec::with_capacity(27);
    for i in Level::ALL {
        for v in Level::ALL {
            for l in Level::ALL {
                out.push(FactorLevels::new(i, v, l));
            }
        }
    }
    out
}

/// One config per factorial run, named `run-01` to `run-27`.
pub fn full_factorial(base: &ScenarioConfig) -> Vec<ScenarioConfig> {
    factorial_levels()
        .into_iter()
        .enumerate()
        .map(|(k, levels)| {
            let mut c = base.clone();
            c.name = format!("run-{:02}", k + 1);
            c.factors = levels;
            c
        })
        .collect()
}

/// One line of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: u32,
    pub rep: u32,
    pub demand_intensity: Level,
    pub demand_variability: Level,
    pub lead_time: Level,
    pub store_fill_rate_orders: f64,
    pub store_fill_rate_quantity: f64,
    pub dc_fill_rate_orders: f64,
    pub store_avg_on_hand: f64,
}

pub fn sweep_rows(run: u32, result: &ScenarioResult) -> Vec<SweepRow> {
    result
        .replications
        .iter()
        .map(|r| SweepRow {
            run,
            rep: r.rep,
            demand_intensity: result.factors.demand_intensity,
            demand_variability: result.factors.demand_variability,
            lead_time: result.factors.lead_time,
            store_fill_rate_orders: store_fill_rate(&r.nodes),
            store_fill_rate_quantity: store_quantity_loss(&r.nodes),
            dc_fill_rate_orders: dc_fill_rate(&r.nodes),
            store_avg_on_hand: store_avg_on_hand(&r.nodes),
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("scenario {scenario}: {source}")]
    Sim {
        scenario: String,
        #[source]
        source: SimError,
    },
    #[error("writing results of scenario {scenario}: {source}")]
    Io {
        scenario: String,
        #[source]
        source: std::io::Error,
    },
}

/// Run the full factorial, calling `on_done` after each scenario in run
/// order so results can be written as they become available.
pub fn sweep<F>(base: &ScenarioConfig, options: &ReplicateOptions, mut on_done: F) -> Result<Vec<ScenarioResult>, SweepError>
where
    F: FnMut(usize, &ScenarioConfig, &ScenarioResult) -> std::io::Result<()>,
{
    let mut results = Vec::with_capacity(27);
    for (k, cfg) in full_factorial(base).iter().enumerate() {
        let res = replicate(cfg, options).map_err(|source| SweepError::Sim {
            scenario: cfg.name.clone(),
            source,
        })?;
        on_done(k, cfg, &res).map_err(|source| SweepError::Io {
            scenario: cfg.name.clone(),
            source,
        })?;
        results.push(res);
    }
    Ok(results)
}

/// Pure-error mean square of replicated values: `sum (y - mean)^2 / (r - 1)`.
pub fn mspe(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspePoint {
    pub length_days: u32,
    pub values: Vec<f64>,
    pub mean: f64,
    pub mspe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspeAnalysis {
    pub points: Vec<MspePoint>,
    pub selected_length: u32,
    pub threshold_factor: f64,
}

#[derive(Debug, Error)]
pub enum MspeError {
    #[error("at least 2 replications per length are needed, got {0}")]
    InsufficientReps(u32),
    #[error("candidate lengths must be nonempty, positive and strictly increasing")]
    InvalidLengths,
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub const MSPE_THRESHOLD_FACTOR: f64 = 1.10;

/// Smallest length whose MSPE is within `factor` of the curve minimum.
pub fn select_run_length(points: &[MspePoint], factor: f64) -> Option<u32> {
    let min = points.iter().map(|p| p.mspe).fold(f64::INFINITY, f64::min);
    points
        .iter()
        .find(|p| p.mspe <= factor * min)
        .map(|p| p.length_days)
}

/// MSPE of the mean store order fill rate at each candidate run length.
pub fn mspe_run_length(
    config: &ScenarioConfig,
    lengths: &[u32],
    reps: u32,
    options: &ReplicateOptions,
) -> Result<MspeAnalysis, MspeError> {
    if reps < 2 {
        return Err(MspeError::InsufficientReps(reps));
    }
    if lengths.is_empty() || lengths[0] == 0 || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MspeError::InvalidLengths);
    }
    let mut points = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut cfg = config.clone();
        cfg.run.run_length_days = len;
        cfg.run.replications = reps;
        if cfg.run.warmup_days >= len {
            cfg.run.warmup_days = 0;
        }
        let result = replicate(&cfg, options)?;
        let values: Vec<f64> = result
            .replications
            .iter()
            .map(|r| store_fill_rate(&r.nodes))
            .collect();
        points.push(MspePoint {
            length_days: len,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            mspe: mspe(&values),
            values,
        });
    }
    let selected_length = select_run_length(&points, MSPE_THRESHOLD_FACTOR).expect("nonempty");
    Ok(MspeAnalysis {
        points,
        selected_length,
        threshold_factor: MSPE_THRESHOLD_FACTOR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeId;

    #[test]
    fn factorial_matches_run_table() {
        let levels = factorial_levels();
        assert_eq!(levels.len(), 27);
        use Level::*;
        assert_eq!(levels[0], FactorLevels::new(Minus, Minus, Minus));
        assert_eq!(levels[1], FactorLevels::new(Minus, Minus, Zero));
        assert_eq!(levels[3], FactorLevels::new(Minus, Zero, Minus));
        assert_eq!(levels[13], FactorLevels::new(Zero, Zero, Zero));
        assert_eq!(levels[26], FactorLevels::new(Plus, Plus, Plus));
        let unique: std::collections::BTreeSet<_> = levels
            .iter()
            .map(|l| (l.demand_intensity, l.demand_variability, l.lead_time))
            .collect();
        assert_eq!(unique.len(), 27);
        let cfgs = full_factorial(&ScenarioConfig::reduced());
        assert_eq!(cfgs[13].name, "run-14");
    }

    fn summary(fr: f64) -> NodeSummary {
        NodeSummary {
            node_id: NodeId(0),
            node_kind: NodeKind::Store,
            orders_received: 10,
            orders_satisfied: 9,
            fill_rate_orders: fr,
            qty_ordered: 100,
            qty_lost: 1,
            fill_rate_quantity: 0.01,
            avg_on_hand: 5.0,
        }
    }

    fn rep(rep: u32, fr: f64) -> ReplicationResult {
        ReplicationResult {
            rep,
            seed: u64::from(rep),
            nodes: vec![summary(fr)],
        }
    }

    #[test]
    fn aggregate_mean_and_std() {
        let r = ScenarioResult::from_replications(
            "x".into(),
            FactorLevels::default(),
            vec![rep(0, 0.8), rep(1, 0.9), rep(2, 1.0)],
        );
        let a = &r.aggregate[0].fill_rate_orders;
        assert!((a.mean - 0.9).abs() < 1e-12);
        assert!((a.std - 0.1).abs() < 1e-12);
        assert!(r.std_defined);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn single_replication_flags_std() {
        let r = ScenarioResult::from_replications("x".into(), FactorLevels::default(), vec![rep(0, 0.8)]);
        assert!(!r.std_defined);
        assert_eq!(r.aggregate[0].fill_rate_orders.std, 0.0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn identical_replications_warn() {
        let r = ScenarioResult::from_replications(
            "x".into(),
            FactorLevels::default(),
            vec![rep(0, 0.8), rep(1, 0.8)],
        );
        assert_eq!(r.aggregate[0].fill_rate_orders.std, 0.0);
        assert!(r.warnings[0].contains("identical"));
    }

    #[test]
    fn mspe_of_constant_is_zero() {
        assert_eq!(mspe(&[0.5, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn selection_picks_smallest_within_threshold() {
        let pt = |l, m| MspePoint {
            length_days: l,
            values: vec![],
            mean: 0.0,
            mspe: m,
        };
        let pts = vec![pt(130, 4.0), pt(260, 1.05), pt(390, 1.0), pt(520, 1.02)];
        assert_eq!(select_run_length(&pts, 1.10), Some(260));
        let flat = vec![pt(130, 0.0), pt(260, 0.0)];
        assert_eq!(select_run_length(&flat, 1.10), Some(130));
    }

    #[test]
    fn mspe_argument_checks() {
        let c = ScenarioConfig::new(1, 1, 1, 1);
        let o = ReplicateOptions::default();
        assert!(matches!(mspe_run_length(&c, &[10, 20], 1, &o), Err(MspeError::InsufficientReps(1))));
        assert!(matches!(mspe_run_length(&c, &[20, 10], 2, &o), Err(MspeError::InvalidLengths)));
        assert!(matches!(mspe_run_length(&c, &[], 2, &o), Err(MspeError::InvalidLengths)));
    }

    #[test]
    fn crn_seed_ignores_scenario() {
        let mut a = ScenarioConfig::reduced();
        a.run.crn = true;
        let mut b = a.clone();
        b.factors.demand_intensity = Level::Plus;
        assert_eq!(run_seed(&a, 0), run_seed(&b, 0));
        assert_ne!(run_seed(&a, 0), run_seed(&a, 1));
        a.run.crn = false;
        b.run.crn = false;
        assert_ne!(run_seed(&a, 0), run_seed(&b, 0));
    }
}
