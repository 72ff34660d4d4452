//! Reduced normality study: distribution of the scaled averaged error
//! `sqrt(k) (x_hat - x*)`, checked per component against the limit normal
//! with a one-sample KS test. The full study is `pushpull normality`.
//!
//!     cargo run --release --example normality

use pushpull::config::ExperimentConfig;
use pushpull::report::run_normality;

fn main() {
    let mut cfg = ExperimentConfig::study_normality();
    cfg.experiment.replications = 100;
    cfg.experiment.iterations = 10_000;
    cfg.experiment.checkpoints = Some(vec![10_000]);
    cfg.experiment.gt_mc_samples = 100_000;

    let dir = std::env::temp_dir().join("pushpull_normality_example");
    let outcome = run_normality(&cfg, &dir).expect("normality run");

    println!(
        "{} samples of sqrt(k)(x_hat - x*) at k = {}",
        outcome.summary.normality.tracked.len(),
        cfg.experiment.iterations
    );
    println!(
        "theory sigma diagonal: {:?}",
        (0..3)
            .map(|c| outcome.setup.ground_truth.sigma[(c, c)])
            .collect::<Vec<_>>()
    );
    for t in &outcome.tests {
        println!(
            "{:>7} component {}: D = {:.4}, 5% critical = {:.4} -> {}",
            t.series,
            t.component,
            t.d_stat,
            t.critical_5pct,
            if t.pass { "pass" } else { "fail" }
        );
    }
    println!("samples written to {}", dir.display());
}
