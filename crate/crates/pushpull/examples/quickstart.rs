//! Run one stochastic push-pull trajectory on the ridge test problem and
//! watch the per-agent error fall.
//!
//!     cargo run --release --example quickstart

use nalgebra::DMatrix;
use pushpull::algorithms::{sab_init, PushPullStepper, StepSchedule};
use pushpull::graph::DirectedGraph;
use pushpull::oracle::RidgeModel;
use pushpull::rng::{agent_streams, Purpose};
use pushpull::weights::{pull_matrix, push_matrix, EigenPair};

fn main() {
    let graph = DirectedGraph::ring_plus_random(20, 0.3, 7).expect("graph");
    let pull = pull_matrix(&graph);
    let push = push_matrix(&graph);
    let pair = EigenPair::compute(&pull, &push).expect("perron vectors");

    let model = RidgeModel::study_config();
    let x_star = model.analytic_optimum();
    let schedule = StepSchedule::diminishing(0.05, 1.0, 0.6).expect("schedule");

    let mut streams = agent_streams(42, 0, 20, Purpose::Gradient);
    let mut state = sab_init(&model, &DMatrix::zeros(3, 20), &mut streams).expect("init");
    let mut stepper = PushPullStepper::new(&model, &pull, &push, schedule).expect("stepper");

    println!("k      (1/n) sum ||x_i - x*||^2    ||xbar - x*||^2    consensus");
    for k in 0..=5000usize {
        if k.is_power_of_two() || k == 5000 || k == 0 {
            let msd = state.mean_squared_error(&x_star);
            let werr = (state.weighted_average(&pair.u) - &x_star).norm_squared();
            let cons = state.consensus_error(&pair.u);
            println!("{k:<6} {msd:<28.6e} {werr:<18.6e} {cons:.6e}");
        }
        if k < 5000 {
            stepper.step(&mut state, &mut streams).expect("step");
        }
    }
    println!(
        "\ntracking conservation residual: {:.3e}",
        state.conservation_residual()
    );
}
