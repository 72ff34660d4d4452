//! Steppers for stochastic push-pull gradient tracking and its doubly
//! stochastic baselines, plus step-size schedules and Polyak-Ruppert
//! averaging.
//!
//! State matrices are laid out d x n with one agent per column, so an
//! agent's vector is a contiguous view. Mixing by a weight matrix `M` acts
//! on the agent axis: `X <- X M^T` puts `sum_j m_ij x_j` in column `i`.
//! Steppers are pure transitions on explicit state; all randomness comes
//! from caller-owned per-agent streams.

use crate::oracle::Oracle;
use crate::weights::{EigenPair, StochasticKind, WeightMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlgorithmError {
    #[error("state diverged (NaN or infinity) at iteration {k}")]
    Divergence { k: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("weight matrix of wrong kind: {0}")]
    KindMismatch(String),
}

/// Step-size sequence. The diminishing form is `a / (k + b)^alpha` with
/// `alpha` in (1/2, 1]; the constant form backs noiseless sanity runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Diminishing { a: f64, b: f64, alpha: f64 },
    Constant { step: f64 },
}

impl StepSchedule {
    pub fn diminishing(a: f64, b: f64, alpha: f64) -> Result<Self, AlgorithmError> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(AlgorithmError::InvalidSchedule(format!(
                "scale and offset must be positive, got a={a}, b={b}"
            )));
        }
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(AlgorithmError::InvalidSchedule(format!(
                "exponent must lie in (1/2, 1], got {alpha}"
            )));
        }
        Ok(StepSchedule::Diminishing { a, b, alpha })
    }

    pub fn constant(step: f64) -> Result<Self, AlgorithmError> {
        if !(step > 0.0) {
            return Err(AlgorithmError::InvalidSchedule(format!(
                "constant step must be positive, got {step}"
            )));
        }
        Ok(StepSchedule::Constant { step })
    }

    /// The step used by the transition from iteration `k` to `k + 1`.
    pub fn value(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Diminishing { a, b, alpha } => a / (k as f64 + b).powf(alpha),
            StepSchedule::Constant { step } => step,
        }
    }
}

/// Which sufficient step-size conditions of the convergence theory hold.
/// Advisory only; nothing here blocks execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    /// `a / b^alpha`, the largest step the schedule takes.
    pub initial_step: f64,
    /// `min(1, n / (u^T v L))`.
    pub step_bound: f64,
    /// `initial_step <= step_bound`.
    pub step_condition_holds: bool,
    /// For `alpha = 1` only: the threshold `n^2 / (u^T v mu)` that `a`
    /// must exceed for the 1/k mean-square rate.
    pub one_over_k_threshold: Option<f64>,
    /// For `alpha = 1` only: whether `a` exceeds the threshold.
    pub one_over_k_condition_holds: Option<bool>,
}

impl ScheduleReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.step_condition_holds {
            w.push(format!(
                "initial step {:.6} exceeds the theoretical bound {:.6}",
                self.initial_step, self.step_bound
            ));
        }
        if self.one_over_k_condition_holds == Some(false) {
            w.push(format!(
                "1/k rate condition unmet: scale must exceed {:.6}",
                self.one_over_k_threshold.unwrap()
            ));
        }
        w
    }
}

/// Check the schedule against the sufficient conditions, given the Perron
/// pair and the oracle's smoothness and strong-convexity constants.
pub fn validate_schedule(
    schedule: &StepSchedule,
    pair: &EigenPair,
    lipschitz: f64,
    mu: f64,
    n: usize,
) -> ScheduleReport {
    let nf = n as f64;
    let step_bound = (nf / (pair.uv * lipschitz)).min(1.0);
    let (initial_step, alpha, a) = match *schedule {
        StepSchedule::Diminishing { a, b, alpha } => (a / b.powf(alpha), alpha, a),
        StepSchedule::Constant { step } => (step, f64::NAN, step),
    };
    let (threshold, holds) = if alpha == 1.0 {
        let t = nf * nf / (pair.uv * mu);
        (Some(t), Some(a > t))
    } else {
        (None, None)
    };
    ScheduleReport {
        initial_step,
        step_bound,
        step_condition_holds: initial_step <= step_bound,
        one_over_k_threshold: threshold,
        one_over_k_condition_holds: holds,
    }
}

/// All agents' decision vectors, gradient trackers, and last gradient
/// samples at iteration `k`. Columns index agents.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub k: usize,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub g_prev: DMatrix<f64>,
}

impl NetworkState {
    pub fn agents(&self) -> usize {
        self.x.ncols()
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Tracking conservation residual `|| y 1 - G 1 ||_inf`: the agent sums
    /// of trackers and of latest gradient samples agree exactly up to float
    /// roundoff for column-stochastic mixing.
    pub fn conservation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim() {
            let mut diff = 0.0;
            for c in 0..self.agents() {
                diff += self.y[(r, c)] - self.g_prev[(r, c)];
            }
            worst = worst.max(diff.abs());
        }
        worst
    }

    /// The network average weighted by the left Perron vector:
    /// `sum_i (u_i / n) x_i`.
    pub fn weighted_average(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.x * (u / self.agents() as f64)
    }

    /// `(1/n) sum_i ||x_i - x_star||^2`.
    pub fn mean_squared_error(&self, x_star: &DVector<f64>) -> f64 {
        let n = self.agents();
        let mut total = 0.0;
        for i in 0..n {
            total += (self.x.column(i) - x_star).norm_squared();
        }
        total / n as f64
    }

    /// `sum_i ||x_i - xbar||^2` with the u-weighted average.
    pub fn consensus_error(&self, u: &DVector<f64>) -> f64 {
        let xbar = self.weighted_average(u);
        let mut total = 0.0;
        for i in 0..self.agents() {
            total += (self.x.column(i) - &xbar).norm_squared();
        }
        total
    }

    fn all_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.y.iter().all(|v| v.is_finite())
    }
}

/// Initialize push-pull state at `x0`: trackers start at fresh gradient
/// samples, which seeds the conservation identity.
pub fn sab_init<O: Oracle, R: Rng>(
    model: &O,
    x0: &DMatrix<f64>,
    streams: &mut [R],
) -> Result<NetworkState, AlgorithmError> {
    let (d, n) = (model.dim(), model.agents());
    if x0.nrows() != d || x0.ncols() != n {
        return Err(AlgorithmError::Dimension(format!(
            "x0 is {}x{}, model wants {}x{}",
            x0.nrows(),
            x0.ncols(),
            d,
            n
        )));
    }
    if streams.len() != n {
        return Err(AlgorithmError::Dimension(format!(
            "{} streams for {} agents",
            streams.len(),
            n
        )));
    }
    let mut g = DMatrix::zeros(d, n);
    for i in 0..n {
        model.sample_gradient(i, x0.column(i), g.column_mut(i), &mut streams[i]);
    }
    Ok(NetworkState {
        k: 0,
        x: x0.clone(),
        y: g.clone(),
        g_prev: g,
    })
}

/// Initialize a tracker-free state for plain distributed SGD.
pub fn dsgd_init<O: Oracle>(model: &O, x0: &DMatrix<f64>) -> Result<NetworkState, AlgorithmError> {
    let (d, n) = (model.dim(), model.agents());
    if x0.nrows() != d || x0.ncols() != n {
        return Err(AlgorithmError::Dimension(format!(
            "x0 is {}x{}, model wants {}x{}",
            x0.nrows(),
            x0.ncols(),
            d,
            n
        )));
    }
    Ok(NetworkState {
        k: 0,
        x: x0.clone(),
        y: DMatrix::zeros(d, n),
        g_prev: DMatrix::zeros(d, n),
    })
}

/// The push-pull transition: pull-mix the decision variables, descend along
/// the trackers, then push-mix the trackers and refresh them with the
/// gradient increment at the new iterates.
pub struct PushPullStepper<'a, O: Oracle> {
    model: &'a O,
    a_t: DMatrix<f64>,
    b_t: DMatrix<f64>,
    schedule: StepSchedule,
    x_next: DMatrix<f64>,
    y_next: DMatrix<f64>,
    g_new: DMatrix<f64>,
}

impl<'a, O: Oracle> PushPullStepper<'a, O> {
    pub fn new(
        model: &'a O,
        a: &WeightMatrix,
        b: &WeightMatrix,
        schedule: StepSchedule,
    ) -> Result<Self, AlgorithmError> {
        if !matches!(
            a.kind(),
            StochasticKind::RowStochastic | StochasticKind::DoublyStochastic
        ) {
            return Err(AlgorithmError::KindMismatch(
                "pull matrix must be row stochastic".into(),
            ));
        }
        if !matches!(
            b.kind(),
            StochasticKind::ColumnStochastic | StochasticKind::DoublyStochastic
        ) {
            return Err(AlgorithmError::KindMismatch(
                "push matrix must be column stochastic".into(),
            ));
        }
        let n = model.agents();
        if a.n() != n || b.n() != n {
            return Err(AlgorithmError::Dimension(format!(
                "weights are {}x{} / {}x{}, model has {} agents",
                a.n(),
                a.n(),
                b.n(),
                b.n(),
                n
            )));
        }
        let d = model.dim();
        Ok(Self {
            model,
            a_t: a.matrix().transpose(),
            b_t: b.matrix().transpose(),
            schedule,
            x_next: DMatrix::zeros(d, n),
            y_next: DMatrix::zeros(d, n),
            g_new: DMatrix::zeros(d, n),
        })
    }

    /// Gradient tracking with a single doubly stochastic matrix on both
    /// mixing steps: the DSGT baseline.
    pub fn dsgt(
        model: &'a O,
        w: &WeightMatrix,
        schedule: StepSchedule,
    ) -> Result<Self, AlgorithmError> {
        if w.kind() != StochasticKind::DoublyStochastic {
            return Err(AlgorithmError::KindMismatch(
                "DSGT needs a doubly stochastic matrix".into(),
            ));
        }
        Self::new(model, w, w, schedule)
    }

    pub fn step<R: Rng>(
        &mut self,
        state: &mut NetworkState,
        streams: &mut [R],
    ) -> Result<(), AlgorithmError> {
        let alpha = self.schedule.value(state.k);
        let n = state.agents();

        // x+ = A x - alpha y
        self.x_next.gemm(1.0, &state.x, &self.a_t, 0.0);
        for (xv, yv) in self.x_next.iter_mut().zip(state.y.iter()) {
            *xv -= alpha * *yv;
        }

        for i in 0..n {
            self.model.sample_gradient(
                i,
                self.x_next.column(i),
                self.g_new.column_mut(i),
                &mut streams[i],
            );
        }

        // y+ = (B y - G) + G+; subtracting before adding keeps the n = 1
        // reduction to SGD exact in floating point.
        self.y_next.gemm(1.0, &state.y, &self.b_t, 0.0);
        for (yv, (gp, gn)) in self
            .y_next
            .iter_mut()
            .zip(state.g_prev.iter().zip(self.g_new.iter()))
        {
            *yv = (*yv - *gp) + *gn;
        }

        std::mem::swap(&mut state.x, &mut self.x_next);
        std::mem::swap(&mut state.y, &mut self.y_next);
        state.g_prev.copy_from(&self.g_new);
        state.k += 1;
        if !state.all_finite() {
            return Err(AlgorithmError::Divergence { k: state.k });
        }
        Ok(())
    }
}

/// Distributed SGD: mix, then descend along a fresh local gradient sampled
/// at the current iterate. No tracker.
pub struct DsgdStepper<'a, O: Oracle> {
    model: &'a O,
    w_t: DMatrix<f64>,
    schedule: StepSchedule,
    x_next: DMatrix<f64>,
    g_new: DMatrix<f64>,
}

impl<'a, O: Oracle> DsgdStepper<'a, O> {
    pub fn new(
        model: &'a O,
        w: &WeightMatrix,
        schedule: StepSchedule,
    ) -> Result<Self, AlgorithmError> {
        if w.kind() != StochasticKind::DoublyStochastic {
            return Err(AlgorithmError::KindMismatch(
                "DSGD needs a doubly stochastic matrix".into(),
            ));
        }
        let (d, n) = (model.dim(), model.agents());
        if w.n() != n {
            return Err(AlgorithmError::Dimension(format!(
                "{}x{} weights, {} agents",
                w.n(),
                w.n(),
                n
            )));
        }
        Ok(Self {
            model,
            w_t: w.matrix().transpose(),
            schedule,
            x_next: DMatrix::zeros(d, n),
            g_new: DMatrix::zeros(d, n),
        })
    }

    pub fn step<R: Rng>(
        &mut self,
        state: &mut NetworkState,
        streams: &mut [R],
    ) -> Result<(), AlgorithmError> {
        let alpha = self.schedule.value(state.k);
        let n = state.agents();
        for i in 0..n {
            self.model.sample_gradient(
                i,
                state.x.column(i),
                self.g_new.column_mut(i),
                &mut streams[i],
            );
        }
        self.x_next.gemm(1.0, &state.x, &self.w_t, 0.0);
        for (xv, gv) in self.x_next.iter_mut().zip(self.g_new.iter()) {
            *xv -= alpha * *gv;
        }
        std::mem::swap(&mut state.x, &mut self.x_next);
        state.g_prev.copy_from(&self.g_new);
        state.k += 1;
        if !state.all_finite() {
            return Err(AlgorithmError::Divergence { k: state.k });
        }
        Ok(())
    }
}

/// Running per-agent sum of iterates for Polyak-Ruppert averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedIterate {
    sum: DMatrix<f64>,
    count: usize,
    burn_in: usize,
}

impl AveragedIterate {
    pub fn new(dim: usize, agents: usize, burn_in: usize) -> Self {
        Self {
            sum: DMatrix::zeros(dim, agents),
            count: 0,
            burn_in,
        }
    }

    /// Accumulate the current iterates. Call before each step so that after
    /// `k` steps the average covers iterations `burn_in..k`.
    pub fn update(&mut self, state: &NetworkState) {
        if state.k >= self.burn_in {
            self.sum += &state.x;
            self.count += 1;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Per-agent averages (columns), or None before any accumulation.
    pub fn average(&self) -> Option<DMatrix<f64>> {
        (self.count > 0).then(|| &self.sum / self.count as f64)
    }
}
