//! Reduced coverage study: how often the plug-in confidence region
//! contains the true optimum, per checkpoint. The full table is
//! `pushpull coverage` (500 replications of 30000 iterations).
//!
//!     cargo run --release --example coverage

use pushpull::config::ExperimentConfig;
use pushpull::report::run_coverage;

fn main() {
    let mut cfg = ExperimentConfig::study_coverage();
    cfg.experiment.replications = 50;
    cfg.experiment.iterations = 10_000;
    cfg.experiment.checkpoints = Some(vec![1000, 2500, 5000, 10_000]);
    cfg.experiment.gt_mc_samples = 100_000;

    let dir = std::env::temp_dir().join("pushpull_coverage_example");
    let outcome = run_coverage(&cfg, &dir).expect("coverage run");

    println!("target coverage: {}%", 100.0 * (1.0 - cfg.experiment.beta));
    println!("{:<10} {:>8} {:>8}", "k", "PI", "PIave");
    for c in &outcome.summary.coverage {
        println!(
            "{:<10} {:>7.1}% {:>7.1}%",
            c.k,
            100.0 * c.pi_rate(),
            100.0 * c.piave_rate()
        );
    }
    let last = outcome.summary.plugin.last().unwrap();
    println!(
        "\nplug-in at k={}: mean relative error {:.3}, across-agent spread {:.3e}",
        last.k, last.mean_sigma_rel_err, last.mean_sigma_spread
    );
    println!("table written to {}", dir.display());
}
