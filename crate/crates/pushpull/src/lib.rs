//! Simulation and statistical-inference toolkit for stochastic push-pull
//! (AB) gradient tracking over directed communication graphs.
//!
//! The crate provides the building blocks of a decentralized stochastic
//! optimization experiment and the Monte Carlo harness that ties them
//! together:
//!
//! - [`graph`]: directed communication topologies (ring plus random links),
//!   spanning-tree root sets, and the topology condition the weight matrices
//!   must satisfy.
//! - [`weights`]: row-stochastic pull matrices, column-stochastic push
//!   matrices, the Metropolis matrix used by the doubly stochastic baselines,
//!   Perron eigenvectors and mixing diagnostics.
//! - [`oracle`]: stochastic first- and second-order oracles. The main one is
//!   a ridge regression model with analytic optimum and limit covariance; a
//!   deterministic quadratic with optional Gaussian noise backs exact tests.
//! - [`algorithms`]: the stochastic push-pull stepper, the DSGT and DSGD
//!   baselines, diminishing step-size schedules, and Polyak-Ruppert
//!   averaging.
//! - [`inference`]: the distributed plug-in estimator of the limit
//!   covariance, chi-square quantiles, confidence regions, and a one-sample
//!   Kolmogorov-Smirnov test.
//! - [`montecarlo`]: seeded replication ensembles for the rate, normality,
//!   and coverage experiments.
//! - [`cli`]: the `pushpull` command line front end over the experiment
//!   runners in [`report`].
//!
//! Every simulation is a pure function of its configuration: randomness is
//! drawn from counter-based ChaCha streams keyed by (replication, agent,
//! purpose), so ensembles reproduce bit-for-bit regardless of the degree of
//! parallelism. See the `examples/` directory for one runnable example per
//! capability.

pub mod algorithms;
pub mod cli;
pub mod config;
pub mod graph;
pub mod inference;
pub mod montecarlo;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod weights;

pub use algorithms::{AveragedIterate, NetworkState, StepSchedule};
pub use graph::DirectedGraph;
pub use inference::PlugIn;
pub use oracle::{GroundTruth, Oracle, QuadraticModel, RidgeModel};
pub use weights::{EigenPair, WeightMatrix};
