//! Experiment runners: execute an ensemble from a configuration and write
//! the data files. CSV output is UTF-8 with LF line endings and shortest
//! round-trip float formatting; identical config and seed give byte
//! identical files.

use crate::algorithms::validate_schedule;
use crate::config::{ConfigError, ExperimentConfig};
use crate::graph::satisfies_assumption2_topology;
use crate::inference::{ks_statistic, InferenceError};
use crate::montecarlo::{
    loglog_slope, run_ensemble, Algorithm, EnsembleError, EnsembleSummary, ExperimentKind,
    ReplicationRecord, SharedSetup,
};
use crate::oracle::{GroundTruth, Oracle};
use crate::weights::{contraction_diagnostic, StochasticKind};
use nalgebra::DMatrix;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), ReportError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn echo_config(cfg: &ExperimentConfig, dir: &Path) -> Result<(), ReportError> {
    write_file(dir, "resolved_config.json", &cfg.to_json_pretty())
}

/// Full ensemble summary plus one compact JSON line per replication.
fn write_ensemble_json(
    dir: &Path,
    setup: &SharedSetup,
    records: &[ReplicationRecord],
    summary: &EnsembleSummary,
) -> Result<(), ReportError> {
    write_file(
        dir,
        "ensemble_summary.json",
        &serde_json::to_string_pretty(&summary.to_json()).unwrap(),
    )?;
    let mut lines = String::new();
    for r in records {
        lines.push_str(&r.to_json(setup).to_string());
        lines.push('\n');
    }
    write_file(dir, "replication_records.jsonl", &lines)
}

/// Checkpointed metric curves in long format.
pub fn curves_csv(summary: &EnsembleSummary) -> String {
    let mut out = String::from("k,algorithm,metric,mean,stderr\n");
    for m in &summary.metrics {
        let alg = m.algorithm.name();
        let _ = writeln!(out, "{},{},msd,{},{}", m.k, alg, m.msd_mean, m.msd_se);
        let _ = writeln!(
            out,
            "{},{},weighted_err,{},{}",
            m.k, alg, m.weighted_mean, m.weighted_se
        );
        let _ = writeln!(
            out,
            "{},{},consensus,{},{}",
            m.k, alg, m.consensus_mean, m.consensus_se
        );
    }
    out
}

/// The mean `||xbar_k - x*||^2` trajectory of one algorithm.
fn weighted_trajectory(summary: &EnsembleSummary, alg: Algorithm) -> Vec<(usize, f64)> {
    summary
        .metrics
        .iter()
        .filter(|m| m.algorithm == alg)
        .map(|m| (m.k, m.weighted_mean))
        .collect()
}

#[derive(Debug, Serialize)]
struct SlopeEntry {
    algorithm: &'static str,
    slope: Option<f64>,
    tail_fraction: f64,
}

#[derive(Debug, Serialize)]
struct RateSummaryJson {
    replications: usize,
    diverged: usize,
    checkpoints: Vec<usize>,
    algorithms: Vec<&'static str>,
    first_checkpoint_msd: Vec<f64>,
    final_checkpoint_msd: Vec<f64>,
    slopes: Vec<SlopeEntry>,
}

/// Outcome of the rate experiment, with the numbers the acceptance checks
/// read off.
#[derive(Debug)]
pub struct RateOutcome {
    pub setup: SharedSetup,
    pub summary: EnsembleSummary,
    /// Slope of the mean weighted error, per algorithm, over the tail.
    pub slopes: Vec<(Algorithm, Option<f64>)>,
}

pub fn run_rate(cfg: &ExperimentConfig, outdir: &Path) -> Result<RateOutcome, ReportError> {
    let (setup, records, summary) = run_ensemble(cfg, ExperimentKind::Rate)?;
    let slopes: Vec<(Algorithm, Option<f64>)> = setup
        .algorithms
        .iter()
        .map(|&alg| {
            let traj = weighted_trajectory(&summary, alg);
            (alg, loglog_slope(&traj, cfg.experiment.tail_fraction).ok())
        })
        .collect();

    let first_ck = 0usize;
    let last_ck = setup.checkpoints.len() - 1;
    let json = RateSummaryJson {
        replications: summary.replications,
        diverged: summary.diverged,
        checkpoints: setup.checkpoints.clone(),
        algorithms: setup.algorithms.iter().map(|a| a.name()).collect(),
        first_checkpoint_msd: setup
            .algorithms
            .iter()
            .enumerate()
            .map(|(ai, _)| summary.metrics[ai * setup.checkpoints.len() + first_ck].msd_mean)
            .collect(),
        final_checkpoint_msd: setup
            .algorithms
            .iter()
            .enumerate()
            .map(|(ai, _)| summary.metrics[ai * setup.checkpoints.len() + last_ck].msd_mean)
            .collect(),
        slopes: slopes
            .iter()
            .map(|(alg, s)| SlopeEntry {
                algorithm: alg.name(),
                slope: *s,
                tail_fraction: cfg.experiment.tail_fraction,
            })
            .collect(),
    };

    echo_config(cfg, outdir)?;
    write_file(outdir, "rate_curves.csv", &curves_csv(&summary))?;
    write_file(
        outdir,
        "rate_summary.json",
        &serde_json::to_string_pretty(&json).unwrap(),
    )?;
    write_ensemble_json(outdir, &setup, &records, &summary)?;
    Ok(RateOutcome {
        setup,
        summary,
        slopes,
    })
}

/// Normality statistic samples in long format: one row per replication,
/// series, and component.
pub fn normality_csv(summary: &EnsembleSummary) -> String {
    let mut out = String::from("rep,series,component,value\n");
    for (rep, stat) in summary.normality.tracked.iter().enumerate() {
        for c in 0..stat.len() {
            let _ = writeln!(out, "{rep},agent,{c},{}", stat[c]);
        }
    }
    for (rep, stat) in summary.normality.average.iter().enumerate() {
        for c in 0..stat.len() {
            let _ = writeln!(out, "{rep},average,{c},{}", stat[c]);
        }
    }
    out
}

#[derive(Debug, Serialize, Clone)]
pub struct KsEntry {
    pub series: String,
    pub component: usize,
    pub d_stat: f64,
    pub critical_5pct: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
struct NormalityReportJson {
    iterations: usize,
    replications: usize,
    diverged: usize,
    tracked_agent: usize,
    sigma_diagonal: Vec<f64>,
    ks_skipped: bool,
    warnings: Vec<String>,
    tests: Vec<KsEntry>,
}

#[derive(Debug)]
pub struct NormalityOutcome {
    pub setup: SharedSetup,
    pub summary: EnsembleSummary,
    /// KS results, empty when there were too few samples.
    pub tests: Vec<KsEntry>,
    pub ks_skipped: bool,
}

/// Fewest replications on which the KS check is meaningful.
pub const KS_MIN_SAMPLES: usize = 10;

pub fn run_normality(
    cfg: &ExperimentConfig,
    outdir: &Path,
) -> Result<NormalityOutcome, ReportError> {
    let (setup, records, summary) = run_ensemble(cfg, ExperimentKind::Normality)?;
    let d = setup.model.dim();
    let sigma_diag: Vec<f64> = (0..d).map(|c| setup.ground_truth.sigma[(c, c)]).collect();

    let mut warnings = Vec::new();
    let ks_skipped = summary.normality.tracked.len() < KS_MIN_SAMPLES;
    let mut tests = Vec::new();
    if ks_skipped {
        warnings.push(format!(
            "KS test skipped: {} samples are fewer than {KS_MIN_SAMPLES}",
            summary.normality.tracked.len()
        ));
    } else {
        for (name, stats) in [
            ("agent", &summary.normality.tracked),
            ("average", &summary.normality.average),
        ] {
            for c in 0..d {
                let samples: Vec<f64> = stats.iter().map(|s| s[c]).collect();
                let (d_stat, critical) = ks_statistic(&samples, 0.0, sigma_diag[c].sqrt())?;
                tests.push(KsEntry {
                    series: name.to_string(),
                    component: c,
                    d_stat,
                    critical_5pct: critical,
                    pass: d_stat < critical,
                });
            }
        }
    }

    let json = NormalityReportJson {
        iterations: cfg.experiment.iterations,
        replications: summary.replications,
        diverged: summary.diverged,
        tracked_agent: cfg.experiment.tracked_agent,
        sigma_diagonal: sigma_diag,
        ks_skipped,
        warnings,
        tests: tests.clone(),
    };

    echo_config(cfg, outdir)?;
    write_file(outdir, "normality_samples.csv", &normality_csv(&summary))?;
    write_file(
        outdir,
        "normality_report.json",
        &serde_json::to_string_pretty(&json).unwrap(),
    )?;
    write_ensemble_json(outdir, &setup, &records, &summary)?;
    Ok(NormalityOutcome {
        setup,
        summary,
        tests,
        ks_skipped,
    })
}

/// Coverage rates in the layout of the reported table: one row per method,
/// one column per checkpoint, percentages.
pub fn coverage_csv(summary: &EnsembleSummary) -> String {
    let mut out = String::from("method");
    for c in &summary.coverage {
        let _ = write!(out, ",{}", c.k);
    }
    out.push('\n');
    out.push_str("PI");
    for c in &summary.coverage {
        let _ = write!(out, ",{}", 100.0 * c.pi_rate());
    }
    out.push('\n');
    out.push_str("PIave");
    for c in &summary.coverage {
        let _ = write!(out, ",{}", 100.0 * c.piave_rate());
    }
    out.push('\n');
    out
}

#[derive(Debug, Serialize)]
struct CoverageCheckpointJson {
    k: usize,
    pi_hits: usize,
    piave_hit_equivalent: f64,
    pi_rate: f64,
    piave_rate: f64,
    mean_sigma_rel_err: f64,
    mean_sigma_spread: f64,
    mean_sigma_tracked: Vec<Vec<f64>>,
    mean_own_weights: Vec<f64>,
    floor_hits: u64,
}

#[derive(Debug, Serialize)]
struct CoverageSummaryJson {
    replications: usize,
    diverged: usize,
    beta: f64,
    tracked_agent: usize,
    sigma_truth: Vec<Vec<f64>>,
    checkpoints: Vec<CoverageCheckpointJson>,
}

#[derive(Debug)]
pub struct CoverageOutcome {
    pub setup: SharedSetup,
    pub summary: EnsembleSummary,
}

pub fn run_coverage(cfg: &ExperimentConfig, outdir: &Path) -> Result<CoverageOutcome, ReportError> {
    let (setup, records, summary) = run_ensemble(cfg, ExperimentKind::Coverage)?;
    let checkpoints = summary
        .coverage
        .iter()
        .zip(&summary.plugin)
        .map(|(c, p)| CoverageCheckpointJson {
            k: c.k,
            pi_hits: c.pi_hits,
            piave_hit_equivalent: c.piave_hit_equivalent,
            pi_rate: c.pi_rate(),
            piave_rate: c.piave_rate(),
            mean_sigma_rel_err: p.mean_sigma_rel_err,
            mean_sigma_spread: p.mean_sigma_spread,
            mean_sigma_tracked: matrix_rows(&p.mean_sigma_tracked),
            mean_own_weights: p.mean_own_weights.clone(),
            floor_hits: p.total_floor_hits,
        })
        .collect();
    let json = CoverageSummaryJson {
        replications: summary.replications,
        diverged: summary.diverged,
        beta: cfg.experiment.beta,
        tracked_agent: cfg.experiment.tracked_agent,
        sigma_truth: matrix_rows(&setup.ground_truth.sigma),
        checkpoints,
    };

    echo_config(cfg, outdir)?;
    write_file(outdir, "coverage_table.csv", &coverage_csv(&summary))?;
    write_file(
        outdir,
        "coverage_summary.json",
        &serde_json::to_string_pretty(&json).unwrap(),
    )?;
    write_ensemble_json(outdir, &setup, &records, &summary)?;
    Ok(CoverageOutcome { setup, summary })
}

#[derive(Debug)]
pub struct ValidateOutcome {
    /// False when a hard assumption fails; warnings alone stay true.
    pub passed: bool,
    pub warnings: Vec<String>,
    pub text: String,
}

/// Build the network and matrices of a config, check every assumption, and
/// render a human-readable report. When `outdir` is given, the graph edge
/// list and all three weight matrices are written next to the report.
pub fn run_validate(
    cfg: &ExperimentConfig,
    outdir: Option<&Path>,
) -> Result<ValidateOutcome, ReportError> {
    use crate::graph::DirectedGraph;
    use crate::weights::{metropolis_matrix, pull_matrix, push_matrix, EigenPair};

    cfg.validate()?;
    if cfg.graph.n < 2 {
        return Err(ReportError::Config(ConfigError::Invalid(
            "network experiments need graph.n >= 2".into(),
        )));
    }
    let mut text = String::new();
    let mut passed = true;
    let mut warnings = Vec::new();

    let graph = DirectedGraph::ring_plus_random(cfg.graph.n, cfg.graph.p, cfg.graph.seed)
        .map_err(EnsembleError::from)?;
    let _ = writeln!(
        text,
        "graph: n={} edges={} seed={}",
        graph.node_count(),
        graph.edge_count(),
        cfg.graph.seed
    );

    let roots_ok = satisfies_assumption2_topology(&graph, &graph).map_err(EnsembleError::from)?;
    let _ = writeln!(
        text,
        "spanning-tree roots: pull={} push^T={} intersection {}",
        graph.root_set().len(),
        graph.transpose().root_set().len(),
        if roots_ok { "nonempty" } else { "EMPTY" }
    );
    if !roots_ok {
        passed = false;
    }

    let a = pull_matrix(&graph);
    let b = push_matrix(&graph);
    let w = metropolis_matrix(&graph);
    for (name, m) in [("A", &a), ("B", &b), ("W", &w)] {
        let n = m.n();
        let row_res = (0..n)
            .map(|i| (m.matrix().row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max);
        let col_res = (0..n)
            .map(|j| (m.matrix().column(j).sum() - 1.0).abs())
            .fold(0.0, f64::max);
        let min_diag = (0..n)
            .map(|i| m.matrix()[(i, i)])
            .fold(f64::INFINITY, f64::min);
        let residuals = match m.kind() {
            StochasticKind::RowStochastic => format!("row residual {row_res:.2e}"),
            StochasticKind::ColumnStochastic => format!("column residual {col_res:.2e}"),
            StochasticKind::DoublyStochastic => {
                format!("row residual {row_res:.2e}, column residual {col_res:.2e}")
            }
        };
        let _ = writeln!(text, "{name}: {residuals}, min diagonal {min_diag:.4}");
    }

    let pair = EigenPair::compute(&a, &b).map_err(EnsembleError::from)?;
    let left_res = (pair.u.transpose() * a.matrix() - pair.u.transpose()).amax();
    let right_res = (b.matrix() * &pair.v - &pair.v).amax();
    let _ = writeln!(
        text,
        "perron: u^T v = {:.6}, residuals left={left_res:.2e} right={right_res:.2e}",
        pair.uv
    );
    if pair.uv <= 0.0 || left_res > 1e-10 || right_res > 1e-10 {
        passed = false;
    }

    let tau_a = contraction_diagnostic(&a, &pair);
    let tau_b = contraction_diagnostic(&b, &pair);
    let tau_w = contraction_diagnostic(&w, &pair);
    let _ = writeln!(
        text,
        "contraction: tau_A={tau_a:.4} tau_B={tau_b:.4} tau_W={tau_w:.4}"
    );
    if tau_a >= 1.0 || tau_b >= 1.0 {
        passed = false;
    }

    let model = cfg.build_model()?;
    let schedule = crate::algorithms::StepSchedule::diminishing(
        cfg.schedule.a,
        cfg.schedule.b,
        cfg.schedule.alpha,
    )
    .map_err(EnsembleError::from)?;
    let report = validate_schedule(
        &schedule,
        &pair,
        model.lipschitz_bound(),
        model.strong_convexity(),
        cfg.graph.n,
    );
    let _ = writeln!(
        text,
        "oracle: L={:.4} mu={:.4}",
        model.lipschitz_bound(),
        model.strong_convexity()
    );
    let _ = writeln!(
        text,
        "schedule: initial step {:.6} vs bound {:.6} -> {}",
        report.initial_step,
        report.step_bound,
        if report.step_condition_holds {
            "ok"
        } else {
            "WARNING"
        }
    );
    if let (Some(t), Some(h)) = (
        report.one_over_k_threshold,
        report.one_over_k_condition_holds,
    ) {
        let _ = writeln!(
            text,
            "1/k rate condition: scale must exceed {:.4} -> {}",
            t,
            if h { "ok" } else { "WARNING" }
        );
    }
    warnings.extend(report.warnings());
    let _ = writeln!(text, "result: {}", if passed { "pass" } else { "FAIL" });

    if let Some(dir) = outdir {
        echo_config(cfg, dir)?;
        write_file(dir, "graph.txt", &graph.to_edge_list())?;
        write_file(dir, "matrix_pull.csv", &a.to_csv())?;
        write_file(dir, "matrix_push.csv", &b.to_csv())?;
        write_file(dir, "matrix_metropolis.csv", &w.to_csv())?;
        write_file(dir, "validate_report.txt", &text)?;
    }
    debug_assert_eq!(a.kind(), StochasticKind::RowStochastic);
    Ok(ValidateOutcome {
        passed,
        warnings,
        text,
    })
}

#[derive(Debug, Serialize)]
struct GroundTruthJson {
    x_star: Vec<f64>,
    h: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    mc_samples: usize,
    s_standard_error: Vec<Vec<f64>>,
    max_standard_error: f64,
    warnings: Vec<String>,
}

#[derive(Debug)]
pub struct GroundTruthOutcome {
    pub ground_truth: GroundTruth,
    pub warnings: Vec<String>,
}

/// Sample count below which the ground-truth covariance is flagged noisy.
pub const GT_RECOMMENDED_SAMPLES: usize = 100_000;

pub fn run_ground_truth(
    cfg: &ExperimentConfig,
    outdir: &Path,
) -> Result<GroundTruthOutcome, ReportError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let seed = cfg.experiment.gt_seed.unwrap_or(cfg.experiment.base_seed);
    let gt = model
        .ground_truth(cfg.experiment.gt_mc_samples, seed)
        .map_err(EnsembleError::from)?;
    let mut warnings = Vec::new();
    if cfg.experiment.gt_mc_samples < GT_RECOMMENDED_SAMPLES {
        warnings.push(format!(
            "only {} Monte Carlo samples (recommended at least {GT_RECOMMENDED_SAMPLES}); covariance standard errors will be large",
            cfg.experiment.gt_mc_samples
        ));
    }
    let json = GroundTruthJson {
        x_star: gt.x_star.iter().copied().collect(),
        h: matrix_rows(&gt.h),
        s: matrix_rows(&gt.s),
        sigma: matrix_rows(&gt.sigma),
        mc_samples: gt.mc_samples,
        s_standard_error: matrix_rows(&gt.s_standard_error),
        max_standard_error: gt.s_standard_error.amax(),
        warnings: warnings.clone(),
    };
    echo_config(cfg, outdir)?;
    write_file(
        outdir,
        "ground_truth.json",
        &serde_json::to_string_pretty(&json).unwrap(),
    )?;
    Ok(GroundTruthOutcome {
        ground_truth: gt,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::study_rate();
        cfg.experiment.iterations = 40;
        cfg.experiment.replications = 2;
        cfg.experiment.checkpoints = Some(vec![0, 20, 40]);
        cfg.experiment.gt_mc_samples = 1000;
        cfg
    }

    #[test]
    fn rate_files_are_written_and_reproducible() {
        let cfg = smoke_config();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        run_rate(&cfg, dir1.path()).unwrap();
        run_rate(&cfg, dir2.path()).unwrap();
        for name in [
            "rate_curves.csv",
            "rate_summary.json",
            "resolved_config.json",
        ] {
            let a = fs::read(dir1.path().join(name)).unwrap();
            let b = fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} must be byte-identical");
            assert!(!a.is_empty());
        }
        let csv = fs::read_to_string(dir1.path().join("rate_curves.csv")).unwrap();
        assert!(csv.starts_with("k,algorithm,metric,mean,stderr\n"));
        // 3 algorithms x 3 checkpoints x 3 metrics + header
        assert_eq!(csv.lines().count(), 1 + 27);
    }

    #[test]
    fn normality_smoke_skips_ks_below_minimum() {
        let mut cfg = ExperimentConfig::study_normality();
        cfg.experiment.iterations = 50;
        cfg.experiment.replications = 3;
        cfg.experiment.checkpoints = Some(vec![50]);
        cfg.experiment.gt_mc_samples = 1000;
        let dir = tempfile::tempdir().unwrap();
        let out = run_normality(&cfg, dir.path()).unwrap();
        assert!(out.ks_skipped);
        assert!(out.tests.is_empty());
        let csv = fs::read_to_string(dir.path().join("normality_samples.csv")).unwrap();
        // header + 2 series x 3 reps x 3 components
        assert_eq!(csv.lines().count(), 1 + 18);
    }

    #[test]
    fn coverage_table_layout() {
        let mut cfg = ExperimentConfig::study_coverage();
        cfg.experiment.iterations = 60;
        cfg.experiment.replications = 3;
        cfg.experiment.checkpoints = Some(vec![30, 60]);
        cfg.experiment.gt_mc_samples = 1000;
        let dir = tempfile::tempdir().unwrap();
        run_coverage(&cfg, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("coverage_table.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,30,60");
        assert!(lines[1].starts_with("PI,"));
        assert!(lines[2].starts_with("PIave,"));
    }

    #[test]
    fn validate_passes_on_study_config_and_flags_large_steps() {
        let cfg = ExperimentConfig::study_rate();
        let out = run_validate(&cfg, None).unwrap();
        assert!(out.passed);
        // The experimental step 0.05 slightly exceeds the conservative
        // sufficient bound, which is exactly what the warning channel is
        // for.
        let mut loud = cfg.clone();
        loud.schedule.a = 5.0;
        let out = run_validate(&loud, None).unwrap();
        assert!(out.passed);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn validate_writes_artifacts() {
        let cfg = ExperimentConfig::study_rate();
        let dir = tempfile::tempdir().unwrap();
        run_validate(&cfg, Some(dir.path())).unwrap();
        for name in [
            "graph.txt",
            "matrix_pull.csv",
            "matrix_push.csv",
            "matrix_metropolis.csv",
            "validate_report.txt",
            "resolved_config.json",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let g = fs::read_to_string(dir.path().join("graph.txt")).unwrap();
        assert!(g.starts_with("20\n"));
    }

    #[test]
    fn ground_truth_single_agent_zero_target() {
        let mut cfg = ExperimentConfig::study_rate();
        cfg.graph.n = 1;
        cfg.experiment.tracked_agent = 0;
        cfg.model.xtilde = crate::config::XtildeConfig {
            rule: "constant".into(),
            low: None,
            high: None,
            value: Some(0.0),
        };
        cfg.experiment.gt_mc_samples = 500;
        let dir = tempfile::tempdir().unwrap();
        let out = run_ground_truth(&cfg, dir.path()).unwrap();
        assert!(out.ground_truth.x_star.amax() < 1e-15);
        assert!(!out.warnings.is_empty(), "low sample count must warn");
        let text = fs::read_to_string(dir.path().join("ground_truth.json")).unwrap();
        assert!(text.contains("\"x_star\""));
    }
}
