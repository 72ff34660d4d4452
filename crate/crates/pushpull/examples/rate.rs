//! Reduced version of the error-trajectory comparison: push-pull, DSGT,
//! and DSGD on the ridge problem, averaged over a small ensemble. The full
//! study is `pushpull rate` (50 replications of 5000 iterations).
//!
//!     cargo run --release --example rate

use pushpull::config::ExperimentConfig;
use pushpull::montecarlo::{loglog_slope, run_ensemble, ExperimentKind};

fn main() {
    let mut cfg = ExperimentConfig::study_rate();
    cfg.experiment.replications = 10;
    cfg.experiment.iterations = 2000;
    cfg.experiment.checkpoints = None;
    cfg.experiment.gt_mc_samples = 50_000;

    let (setup, _, summary) = run_ensemble(&cfg, ExperimentKind::Rate).expect("ensemble");

    println!(
        "{} replications x {} iterations, {} diverged",
        summary.replications, cfg.experiment.iterations, summary.diverged
    );
    for &alg in &setup.algorithms {
        let trajectory: Vec<(usize, f64)> = summary
            .metrics
            .iter()
            .filter(|m| m.algorithm == alg)
            .map(|m| (m.k, m.weighted_mean))
            .collect();
        let last = trajectory.last().unwrap();
        let slope = loglog_slope(&trajectory, 0.5).expect("slope");
        println!(
            "{:>5}: final mean ||xbar - x*||^2 = {:.4e}, tail slope {:.3}",
            alg.name(),
            last.1,
            slope
        );
    }
}
