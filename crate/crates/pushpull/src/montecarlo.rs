//! Seeded replication ensembles for the rate, normality, and coverage
//! experiments.
//!
//! A replication is a pure function of `(config, rep_id)`: its streams are
//! derived by counter-based splitting, the network is built once per
//! ensemble (or per replication when configured), and aggregation is a
//! deterministic reduction in replication order. The ensemble summary is
//! therefore byte-stable under any degree of parallelism.

use crate::algorithms::{
    dsgd_init, sab_init, AlgorithmError, AveragedIterate, DsgdStepper, NetworkState,
    PushPullStepper, StepSchedule,
};
use crate::config::ExperimentConfig;
use crate::graph::{satisfies_assumption2_topology, DirectedGraph, GraphError};
use crate::inference::{confidence_region_contains, InferenceError, PlugIn};
use crate::oracle::{GroundTruth, Oracle, OracleError, RidgeModel};
use crate::rng::{agent_streams, Purpose};
use crate::weights::{
    metropolis_matrix, pull_matrix, push_matrix, EigenPair, WeightError, WeightMatrix,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("every replication diverged")]
    AllDiverged,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Rate,
    Normality,
    Coverage,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Result<Self, EnsembleError> {
        match name {
            "rate" => Ok(Self::Rate),
            "normality" => Ok(Self::Normality),
            "coverage" => Ok(Self::Coverage),
            other => Err(EnsembleError::Invalid(format!(
                "unknown experiment kind {other:?}"
            ))),
        }
    }

    /// The plug-in recursions run whenever coverage or normality is
    /// requested.
    pub fn wants_plugin(self) -> bool {
        matches!(self, Self::Normality | Self::Coverage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sab,
    Dsgt,
    Dsgd,
}

impl Algorithm {
    pub fn parse(name: &str) -> Result<Self, EnsembleError> {
        match name {
            "sab" => Ok(Self::Sab),
            "dsgt" => Ok(Self::Dsgt),
            "dsgd" => Ok(Self::Dsgd),
            other => Err(EnsembleError::Invalid(format!(
                "unknown algorithm {other:?}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sab => "sab",
            Self::Dsgt => "dsgt",
            Self::Dsgd => "dsgd",
        }
    }
}

/// Network, weights, oracle, and ground truth shared by all replications.
#[derive(Debug, Clone)]
pub struct SharedSetup {
    pub kind: ExperimentKind,
    pub graph: DirectedGraph,
    pub pull: WeightMatrix,
    pub push: WeightMatrix,
    pub metro: WeightMatrix,
    pub pair: EigenPair,
    pub model: RidgeModel,
    pub schedule: StepSchedule,
    pub ground_truth: GroundTruth,
    pub checkpoints: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
}

impl SharedSetup {
    pub fn build(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<Self, EnsembleError> {
        cfg.validate()
            .map_err(|e| EnsembleError::Invalid(e.to_string()))?;
        if let Some(named) = &cfg.experiment.kind {
            let named = ExperimentKind::parse(named)?;
            if named != kind {
                return Err(EnsembleError::Invalid(format!(
                    "config says kind {named:?} but {kind:?} was requested"
                )));
            }
        }
        let graph = DirectedGraph::ring_plus_random(cfg.graph.n, cfg.graph.p, cfg.graph.seed)?;
        if !satisfies_assumption2_topology(&graph, &graph)? {
            return Err(EnsembleError::Invalid(
                "pull and transposed push graphs share no spanning-tree root".into(),
            ));
        }
        let pull = pull_matrix(&graph);
        let push = push_matrix(&graph);
        let metro = metropolis_matrix(&graph);
        let pair = EigenPair::compute(&pull, &push)?;
        let model = cfg
            .build_model()
            .map_err(|e| EnsembleError::Invalid(e.to_string()))?;
        let schedule =
            StepSchedule::diminishing(cfg.schedule.a, cfg.schedule.b, cfg.schedule.alpha)?;
        let gt_seed = cfg.experiment.gt_seed.unwrap_or(cfg.experiment.base_seed);
        let ground_truth = model.ground_truth(cfg.experiment.gt_mc_samples, gt_seed)?;
        let algorithms = cfg
            .experiment
            .algorithms
            .iter()
            .map(|a| Algorithm::parse(a))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            kind,
            graph,
            pull,
            push,
            metro,
            pair,
            model,
            schedule,
            ground_truth,
            checkpoints: cfg.resolved_checkpoints(),
            algorithms,
        })
    }
}

/// Error metrics of one algorithm at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgMetrics {
    /// `(1/n) sum_i ||x_i - x*||^2`.
    pub msd: f64,
    /// `||xbar - x*||^2` with the u-weighted average.
    pub weighted_err: f64,
    /// `sum_i ||x_i - xbar||^2`.
    pub consensus: f64,
}

/// Plug-in and confidence-region results at one checkpoint (push-pull run).
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRow {
    pub k: usize,
    /// Region of the tracked agent contains the optimum.
    pub pi_hit: bool,
    /// Fraction of agents whose own region contains the optimum.
    pub piave_fraction: f64,
    /// `||Sigma_hat_tracked - Sigma||_F / ||Sigma||_F`.
    pub sigma_rel_err: f64,
    /// Max pairwise Frobenius distance between agents' estimates.
    pub sigma_spread: f64,
    /// Tracked agent's covariance estimate.
    pub sigma_tracked: DMatrix<f64>,
    /// Own-weight estimates `u_{i,k}(i)` per agent.
    pub own_weights: Vec<f64>,
    pub floor_hits: u64,
}

/// Everything recorded from one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep_id: u64,
    /// `metrics[alg_index][checkpoint_index]`.
    pub metrics: Vec<Vec<AlgMetrics>>,
    pub inference: Vec<InferenceRow>,
    /// `sqrt(k) (pr_average_tracked - x*)` at the final iteration.
    pub normality_tracked: Option<DVector<f64>>,
    /// Same statistic for the across-agent average.
    pub normality_average: Option<DVector<f64>>,
    /// Iteration at which the state diverged, if it did.
    pub diverged: Option<usize>,
}

enum Stepper<'a> {
    PushPull(PushPullStepper<'a, RidgeModel>),
    Dsgd(DsgdStepper<'a, RidgeModel>),
}

impl Stepper<'_> {
    fn step(
        &mut self,
        state: &mut NetworkState,
        streams: &mut [rand_chacha::ChaCha8Rng],
    ) -> Result<(), AlgorithmError> {
        match self {
            Stepper::PushPull(s) => s.step(state, streams),
            Stepper::Dsgd(s) => s.step(state, streams),
        }
    }
}

struct LocalNet {
    pull: WeightMatrix,
    push: WeightMatrix,
    metro: WeightMatrix,
    pair: EigenPair,
}

/// Run one seeded replication. Pure in `(cfg, setup, rep_id)`.
pub fn run_replication(
    cfg: &ExperimentConfig,
    setup: &SharedSetup,
    rep_id: u64,
) -> Result<ReplicationRecord, EnsembleError> {
    // Optionally redraw the network for robustness studies.
    let local: Option<LocalNet> = if cfg.graph.per_replication {
        let g = DirectedGraph::ring_plus_random(
            cfg.graph.n,
            cfg.graph.p,
            cfg.graph.seed.wrapping_add(1 + rep_id),
        )?;
        let pull = pull_matrix(&g);
        let push = push_matrix(&g);
        let metro = metropolis_matrix(&g);
        let pair = EigenPair::compute(&pull, &push)?;
        Some(LocalNet {
            pull,
            push,
            metro,
            pair,
        })
    } else {
        None
    };
    let (pull, push, metro, pair) = match &local {
        Some(l) => (&l.pull, &l.push, &l.metro, &l.pair),
        None => (&setup.pull, &setup.push, &setup.metro, &setup.pair),
    };

    let model = &setup.model;
    let n = model.agents();
    let d = model.dim();
    let x_star = &setup.ground_truth.x_star;
    let sigma = &setup.ground_truth.sigma;
    let sigma_norm = sigma.norm();
    let k_max = cfg.experiment.iterations;
    let base_seed = cfg.experiment.base_seed;
    let beta = cfg.experiment.beta;
    let tracked = cfg.experiment.tracked_agent;
    let x0 = DMatrix::zeros(d, n);

    let mut record = ReplicationRecord {
        rep_id,
        metrics: Vec::with_capacity(setup.algorithms.len()),
        inference: Vec::new(),
        normality_tracked: None,
        normality_average: None,
        diverged: None,
    };

    for &alg in &setup.algorithms {
        let mut streams = agent_streams(base_seed, rep_id, n, Purpose::Gradient);
        let mut state = match alg {
            Algorithm::Sab | Algorithm::Dsgt => sab_init(model, &x0, &mut streams)?,
            Algorithm::Dsgd => dsgd_init(model, &x0)?,
        };
        let mut stepper = match alg {
            Algorithm::Sab => {
                Stepper::PushPull(PushPullStepper::new(model, pull, push, setup.schedule)?)
            }
            Algorithm::Dsgt => {
                Stepper::PushPull(PushPullStepper::dsgt(model, metro, setup.schedule)?)
            }
            Algorithm::Dsgd => Stepper::Dsgd(DsgdStepper::new(model, metro, setup.schedule)?),
        };

        // Plug-in machinery rides along on the push-pull run only.
        let with_plugin = alg == Algorithm::Sab && setup.kind.wants_plugin();
        let mut plugin = if with_plugin {
            Some(PlugIn::new(pull, d, &state.g_prev)?)
        } else {
            None
        };
        let mut hessian_streams = if with_plugin {
            Some(agent_streams(base_seed, rep_id, n, Purpose::Hessian))
        } else {
            None
        };
        let mut averager = with_plugin.then(|| AveragedIterate::new(d, n, cfg.experiment.burn_in));
        let mut hessian_buf = vec![DMatrix::<f64>::zeros(d, d); if with_plugin { n } else { 0 }];

        let mut alg_metrics: Vec<AlgMetrics> = Vec::with_capacity(setup.checkpoints.len());
        let mut cp_idx = 0usize;
        let mut k = 0usize;
        loop {
            if cp_idx < setup.checkpoints.len() && setup.checkpoints[cp_idx] == k {
                alg_metrics.push(AlgMetrics {
                    msd: state.mean_squared_error(x_star),
                    weighted_err: (state.weighted_average(&pair.u) - x_star).norm_squared(),
                    consensus: state.consensus_error(&pair.u),
                });
                // Regions need at least one accumulated iterate.
                if let (Some(plugin), Some(averager)) = (plugin.as_ref(), averager.as_ref()) {
                    if averager.count() > 0 {
                        record.inference.push(inference_row(
                            plugin, averager, x_star, sigma, sigma_norm, beta, tracked, k,
                        )?);
                    }
                }
                cp_idx += 1;
            }
            if k >= k_max {
                break;
            }

            if let Some(avg) = averager.as_mut() {
                avg.update(&state);
            }
            if let Err(AlgorithmError::Divergence { k: at }) =
                stepper.step(&mut state, &mut streams)
            {
                record.diverged = Some(at);
                break;
            }
            k += 1;

            if let Some(plugin) = plugin.as_mut() {
                let hstreams = hessian_streams.as_mut().unwrap();
                for i in 0..n {
                    model.sample_hessian(
                        i,
                        state.x.column(i),
                        &mut hessian_buf[i],
                        &mut hstreams[i],
                    );
                }
                plugin.step(&state.g_prev, &hessian_buf);
            }
        }

        if record.diverged.is_none() {
            if let Some(avg) = averager.as_ref() {
                if let Some(mean) = avg.average() {
                    let count = avg.count() as f64;
                    let stat_tracked = (mean.column(tracked) - x_star) * count.sqrt();
                    let mut overall = DVector::zeros(d);
                    for i in 0..n {
                        overall += mean.column(i);
                    }
                    overall /= n as f64;
                    let stat_avg = (overall - x_star) * count.sqrt();
                    record.normality_tracked = Some(stat_tracked);
                    record.normality_average = Some(stat_avg);
                }
            }
        }

        record.metrics.push(alg_metrics);
        if record.diverged.is_some() {
            break;
        }
    }
    Ok(record)
}

fn inference_row(
    plugin: &PlugIn,
    averager: &AveragedIterate,
    x_star: &DVector<f64>,
    sigma: &DMatrix<f64>,
    sigma_norm: f64,
    beta: f64,
    tracked: usize,
    k: usize,
) -> Result<InferenceRow, EnsembleError> {
    let n = plugin.own_weights().len();
    let mean = averager.average().expect("averager ran");
    let count = averager.count();

    let estimates: Vec<DMatrix<f64>> = (0..n)
        .map(|i| plugin.covariance(i).map(|e| e.sigma_hat))
        .collect::<Result<_, _>>()?;

    let sigma_tracked = estimates[tracked].clone();
    let sigma_rel_err = (&sigma_tracked - sigma).norm() / sigma_norm;
    let mut sigma_spread: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sigma_spread = sigma_spread.max((&estimates[i] - &estimates[j]).norm());
        }
    }

    let mut agent_hits = 0usize;
    let mut pi_hit = false;
    for i in 0..n {
        let x_hat = mean.column(i).clone_owned();
        let hit = confidence_region_contains(&x_hat, &estimates[i], count, beta, x_star)?;
        if hit {
            agent_hits += 1;
        }
        if i == tracked {
            pi_hit = hit;
        }
    }
    Ok(InferenceRow {
        k,
        pi_hit,
        piave_fraction: agent_hits as f64 / n as f64,
        sigma_rel_err,
        sigma_spread,
        sigma_tracked,
        own_weights: plugin.own_weights(),
        floor_hits: plugin.floor_hits(),
    })
}

/// Across-replication mean and standard error of one metric of one
/// algorithm at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub k: usize,
    pub algorithm: Algorithm,
    pub msd_mean: f64,
    pub msd_se: f64,
    pub weighted_mean: f64,
    pub weighted_se: f64,
    pub consensus_mean: f64,
    pub consensus_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub k: usize,
    pub pi_hits: usize,
    /// Sum over replications of the per-replication fraction of agents
    /// whose own region contains the optimum.
    pub piave_hit_equivalent: f64,
    pub replications: usize,
}

impl CoverageSummary {
    pub fn pi_rate(&self) -> f64 {
        self.pi_hits as f64 / self.replications as f64
    }

    pub fn piave_rate(&self) -> f64 {
        self.piave_hit_equivalent / self.replications as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PluginSummary {
    pub k: usize,
    pub mean_sigma_rel_err: f64,
    pub mean_sigma_spread: f64,
    pub mean_sigma_tracked: DMatrix<f64>,
    pub mean_own_weights: Vec<f64>,
    pub total_floor_hits: u64,
}

/// Per-replication normality statistics at the final iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalitySamples {
    pub tracked: Vec<DVector<f64>>,
    pub average: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub checkpoints: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub metrics: Vec<MetricSummary>,
    pub coverage: Vec<CoverageSummary>,
    pub plugin: Vec<PluginSummary>,
    pub normality: NormalitySamples,
    pub replications: usize,
    pub diverged: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Execute all replications (in parallel up to `parallelism`) and reduce in
/// replication order.
pub fn run_ensemble(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
) -> Result<(SharedSetup, Vec<ReplicationRecord>, EnsembleSummary), EnsembleError> {
    let setup = SharedSetup::build(cfg, kind)?;
    let reps = cfg.experiment.replications as u64;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.parallelism)
        .build()
        .map_err(|e| EnsembleError::Invalid(format!("thread pool: {e}")))?;
    let records: Vec<Result<ReplicationRecord, EnsembleError>> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| run_replication(cfg, &setup, rep))
            .collect()
    });
    let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
    let summary = aggregate(&setup, &records)?;
    Ok((setup, records, summary))
}

/// Deterministic reduction of replication records, in rep order.
pub fn aggregate(
    setup: &SharedSetup,
    records: &[ReplicationRecord],
) -> Result<EnsembleSummary, EnsembleError> {
    let live: Vec<&ReplicationRecord> = records.iter().filter(|r| r.diverged.is_none()).collect();
    let diverged = records.len() - live.len();
    if live.is_empty() {
        return Err(EnsembleError::AllDiverged);
    }
    let d = setup.model.dim();
    let n = setup.model.agents();

    let mut metrics = Vec::new();
    for (ai, &alg) in setup.algorithms.iter().enumerate() {
        for (ci, &k) in setup.checkpoints.iter().enumerate() {
            let msd: Vec<f64> = live.iter().map(|r| r.metrics[ai][ci].msd).collect();
            let weighted: Vec<f64> = live
                .iter()
                .map(|r| r.metrics[ai][ci].weighted_err)
                .collect();
            let consensus: Vec<f64> = live.iter().map(|r| r.metrics[ai][ci].consensus).collect();
            let (msd_mean, msd_se) = mean_se(&msd);
            let (weighted_mean, weighted_se) = mean_se(&weighted);
            let (consensus_mean, consensus_se) = mean_se(&consensus);
            metrics.push(MetricSummary {
                k,
                algorithm: alg,
                msd_mean,
                msd_se,
                weighted_mean,
                weighted_se,
                consensus_mean,
                consensus_se,
            });
        }
    }

    let mut coverage = Vec::new();
    let mut plugin = Vec::new();
    if setup.kind.wants_plugin() {
        let rows_per_rep = live.first().map(|r| r.inference.len()).unwrap_or(0);
        for ri in 0..rows_per_rep {
            let k = live[0].inference[ri].k;
            let pi_hits = live.iter().filter(|r| r.inference[ri].pi_hit).count();
            let piave_hit_equivalent: f64 =
                live.iter().map(|r| r.inference[ri].piave_fraction).sum();
            coverage.push(CoverageSummary {
                k,
                pi_hits,
                piave_hit_equivalent,
                replications: live.len(),
            });

            let rel: Vec<f64> = live.iter().map(|r| r.inference[ri].sigma_rel_err).collect();
            let spread: Vec<f64> = live.iter().map(|r| r.inference[ri].sigma_spread).collect();
            let mut mean_sigma = DMatrix::zeros(d, d);
            let mut mean_weights = vec![0.0; n];
            let mut floor_hits = 0u64;
            for r in &live {
                mean_sigma += &r.inference[ri].sigma_tracked;
                for (acc, w) in mean_weights.iter_mut().zip(&r.inference[ri].own_weights) {
                    *acc += w;
                }
                floor_hits += r.inference[ri].floor_hits;
            }
            mean_sigma /= live.len() as f64;
            for w in &mut mean_weights {
                *w /= live.len() as f64;
            }
            plugin.push(PluginSummary {
                k,
                mean_sigma_rel_err: mean_se(&rel).0,
                mean_sigma_spread: mean_se(&spread).0,
                mean_sigma_tracked: mean_sigma,
                mean_own_weights: mean_weights,
                total_floor_hits: floor_hits,
            });
        }
    }

    let mut normality = NormalitySamples::default();
    for r in &live {
        if let (Some(t), Some(a)) = (&r.normality_tracked, &r.normality_average) {
            normality.tracked.push(t.clone());
            normality.average.push(a.clone());
        }
    }

    Ok(EnsembleSummary {
        checkpoints: setup.checkpoints.clone(),
        algorithms: setup.algorithms.clone(),
        metrics,
        coverage,
        plugin,
        normality,
        replications: records.len(),
        diverged,
    })
}

fn vec_json(v: &DVector<f64>) -> serde_json::Value {
    serde_json::Value::from(v.iter().copied().collect::<Vec<f64>>())
}

fn mat_json(m: &DMatrix<f64>) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    serde_json::Value::from(
        rows.into_iter()
            .map(serde_json::Value::from)
            .collect::<Vec<_>>(),
    )
}

impl ReplicationRecord {
    pub fn to_json(&self, setup: &SharedSetup) -> serde_json::Value {
        let metrics: Vec<serde_json::Value> = setup
            .algorithms
            .iter()
            .zip(&self.metrics)
            .map(|(alg, rows)| {
                serde_json::json!({
                    "algorithm": alg.name(),
                    "checkpoints": rows
                        .iter()
                        .zip(&setup.checkpoints)
                        .map(|(m, k)| serde_json::json!({
                            "k": k,
                            "msd": m.msd,
                            "weighted_err": m.weighted_err,
                            "consensus": m.consensus,
                        }))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        let inference: Vec<serde_json::Value> = self
            .inference
            .iter()
            .map(|row| {
                serde_json::json!({
                    "k": row.k,
                    "pi_hit": row.pi_hit,
                    "piave_fraction": row.piave_fraction,
                    "sigma_rel_err": row.sigma_rel_err,
                    "sigma_spread": row.sigma_spread,
                    "sigma_tracked": mat_json(&row.sigma_tracked),
                    "own_weights": row.own_weights,
                    "floor_hits": row.floor_hits,
                })
            })
            .collect();
        serde_json::json!({
            "rep_id": self.rep_id,
            "metrics": metrics,
            "inference": inference,
            "normality_tracked": self.normality_tracked.as_ref().map(vec_json),
            "normality_average": self.normality_average.as_ref().map(vec_json),
            "diverged": self.diverged,
        })
    }
}

impl EnsembleSummary {
    pub fn to_json(&self) -> serde_json::Value {
        let normality = serde_json::json!({
            "tracked": self.normality.tracked.iter().map(vec_json).collect::<Vec<_>>(),
            "average": self.normality.average.iter().map(vec_json).collect::<Vec<_>>(),
        });
        serde_json::json!({
            "replications": self.replications,
            "diverged": self.diverged,
            "checkpoints": self.checkpoints,
            "algorithms": self.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>(),
            "metrics": self.metrics.iter().map(|m| serde_json::json!({
                "k": m.k,
                "algorithm": m.algorithm.name(),
                "msd_mean": m.msd_mean,
                "msd_se": m.msd_se,
                "weighted_mean": m.weighted_mean,
                "weighted_se": m.weighted_se,
                "consensus_mean": m.consensus_mean,
                "consensus_se": m.consensus_se,
            })).collect::<Vec<_>>(),
            "coverage": self.coverage.iter().map(|c| serde_json::json!({
                "k": c.k,
                "pi_hits": c.pi_hits,
                "piave_hit_equivalent": c.piave_hit_equivalent,
                "pi_rate": c.pi_rate(),
                "piave_rate": c.piave_rate(),
            })).collect::<Vec<_>>(),
            "plugin": self.plugin.iter().map(|p| serde_json::json!({
                "k": p.k,
                "mean_sigma_rel_err": p.mean_sigma_rel_err,
                "mean_sigma_spread": p.mean_sigma_spread,
                "mean_sigma_tracked": mat_json(&p.mean_sigma_tracked),
                "mean_own_weights": p.mean_own_weights,
                "total_floor_hits": p.total_floor_hits,
            })).collect::<Vec<_>>(),
            "normality": normality,
        })
    }
}

/// Least-squares slope of `log v` against `log k` over the trailing
/// `tail_fraction` of the checkpoints.
pub fn loglog_slope(trajectory: &[(usize, f64)], tail_fraction: f64) -> Result<f64, EnsembleError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(EnsembleError::Invalid(format!(
            "tail fraction must lie in (0,1], got {tail_fraction}"
        )));
    }
    let take = ((trajectory.len() as f64) * tail_fraction).ceil() as usize;
    let tail = &trajectory[trajectory.len().saturating_sub(take)..];
    if tail.len() < 10 {
        return Err(EnsembleError::Invalid(format!(
            "slope fit needs at least 10 tail points, got {}",
            tail.len()
        )));
    }
    if tail.iter().any(|&(k, v)| k == 0 || !(v > 0.0)) {
        return Err(EnsembleError::Invalid(
            "slope fit needs positive iteration indices and values".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(k, v)| ((k as f64).ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}
