//! Check every standing assumption of the default experiment: weight
//! stochasticity, positive diagonals, shared spanning-tree roots, Perron
//! residuals, contraction factors, and the step-size conditions.
//!
//!     cargo run --release --example validate

use pushpull::config::ExperimentConfig;
use pushpull::report::run_validate;

fn main() {
    let cfg = ExperimentConfig::study_rate();
    let outcome = run_validate(&cfg, None).expect("validation ran");
    print!("{}", outcome.text);
    for w in &outcome.warnings {
        println!("warning: {w}");
    }
    std::process::exit(if outcome.passed { 0 } else { 1 });
}
