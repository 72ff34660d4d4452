//! Stochastic first- and second-order oracles.
//!
//! Oracles are immutable; every sampling call takes a caller-owned RNG
//! stream, so concurrent replications never share mutable state. The ridge
//! model is the workhorse: per-agent objective
//! `E[(w^T x - v)^2] + gamma ||x||^2` with `v = w^T xtilde_i + nu`,
//! `w` uniform on a box and `nu` Gaussian, which admits a closed-form
//! optimum and Hessian and a Monte Carlo limit covariance.

use crate::rng::{self, Purpose};
use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular system: {0}")]
    Singular(String),
}

/// A stochastic oracle over `agents()` local objectives in dimension
/// `dim()`. Gradient samples are unbiased estimates of the local gradients.
pub trait Oracle {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;

    /// Draw a stochastic gradient of agent `i`'s objective at `x`.
    fn sample_gradient(
        &self,
        i: usize,
        x: DVectorView<f64>,
        out: DVectorViewMut<f64>,
        rng: &mut impl Rng,
    );

    /// Draw a stochastic Hessian of agent `i`'s objective at `x`.
    fn sample_hessian(
        &self,
        i: usize,
        x: DVectorView<f64>,
        out: &mut DMatrix<f64>,
        rng: &mut impl Rng,
    );

    /// Upper bound on `max_i sqrt(E[L_i(zeta)^2])` for the per-sample
    /// gradient Lipschitz constants.
    fn lipschitz_bound(&self) -> f64;

    /// Strong convexity modulus of the summed objective.
    fn strong_convexity(&self) -> f64;
}

/// How the per-agent true parameters are laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XtildePlacement {
    /// `xtilde_i = (low + (high-low) * i/(n-1)) * ones`; the same value in
    /// every coordinate, linear in the agent index.
    Linear { low: f64, high: f64 },
    /// Every agent uses `value * ones`.
    Constant { value: f64 },
}

impl XtildePlacement {
    fn value(&self, i: usize, n: usize) -> f64 {
        match *self {
            XtildePlacement::Linear { low, high } => {
                if n == 1 {
                    low
                } else {
                    low + (high - low) * i as f64 / (n - 1) as f64
                }
            }
            XtildePlacement::Constant { value } => value,
        }
    }
}

/// Ridge regression oracle with uniform regressors and Gaussian
/// observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    n: usize,
    d: usize,
    gamma: f64,
    w_low: f64,
    w_high: f64,
    noise_sd: f64,
    xtilde: Vec<DVector<f64>>,
}

/// Analytic optimum and limit-covariance data for a model.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Unique minimizer of the summed objective.
    pub x_star: DVector<f64>,
    /// Hessian of the summed objective at the optimum.
    pub h: DMatrix<f64>,
    /// Covariance of the summed gradient noise at the optimum.
    pub s: DMatrix<f64>,
    /// Limit covariance `H^{-1} S H^{-1}` of the averaged iterates.
    pub sigma: DMatrix<f64>,
    /// Monte Carlo sample count behind `s`.
    pub mc_samples: usize,
    /// Per-entry Monte Carlo standard error of `s`.
    pub s_standard_error: DMatrix<f64>,
}

fn uniform_moment(lo: f64, hi: f64, k: u32) -> f64 {
    // E[w^k] for w ~ Uniform[lo, hi].
    let k1 = k + 1;
    (hi.powi(k1 as i32) - lo.powi(k1 as i32)) / (k1 as f64 * (hi - lo))
}

impl RidgeModel {
    pub fn new(
        n: usize,
        d: usize,
        gamma: f64,
        w_low: f64,
        w_high: f64,
        noise_sd: f64,
        placement: XtildePlacement,
    ) -> Self {
        assert!(n >= 1 && d >= 1);
        assert!(gamma > 0.0, "ridge needs gamma > 0");
        assert!(w_high > w_low);
        let xtilde = (0..n)
            .map(|i| DVector::from_element(d, placement.value(i, n)))
            .collect();
        Self {
            n,
            d,
            gamma,
            w_low,
            w_high,
            noise_sd,
            xtilde,
        }
    }

    /// The configuration of the simulation study: 20 agents, dimension 3,
    /// `gamma = 1`, `w ~ Uniform[1,2]^3`, unit observation noise, true
    /// parameters spread linearly over `[1, 10]`. The model itself is
    /// deterministic; seeds only enter through sampling streams.
    pub fn study_config() -> Self {
        Self::new(
            20,
            3,
            1.0,
            1.0,
            2.0,
            1.0,
            XtildePlacement::Linear {
                low: 1.0,
                high: 10.0,
            },
        )
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn xtilde(&self, i: usize) -> &DVector<f64> {
        &self.xtilde[i]
    }

    /// `E[w w^T]`: diagonal `E[w^2]`, off-diagonal `E[w]^2`.
    pub fn regressor_second_moment(&self) -> DMatrix<f64> {
        let m1 = uniform_moment(self.w_low, self.w_high, 1);
        let m2 = uniform_moment(self.w_low, self.w_high, 2);
        let mut m = DMatrix::from_element(self.d, self.d, m1 * m1);
        for i in 0..self.d {
            m[(i, i)] = m2;
        }
        m
    }

    /// Exact-moment gradient of agent `i`: `2 E[ww^T](x - xtilde_i) + 2 gamma x`.
    pub fn mean_gradient(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let m = self.regressor_second_moment();
        2.0 * &m * (x - &self.xtilde[i]) + 2.0 * self.gamma * x
    }

    /// Exact-moment gradient of the summed objective.
    pub fn mean_full_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.d);
        for i in 0..self.n {
            g += self.mean_gradient(i, x);
        }
        g
    }

    /// Hessian of the summed objective, constant in `x`.
    pub fn full_hessian(&self) -> DMatrix<f64> {
        let m = self.regressor_second_moment();
        (2.0 * m + 2.0 * self.gamma * DMatrix::identity(self.d, self.d)) * self.n as f64
    }

    /// Closed-form minimizer of the summed objective.
    pub fn analytic_optimum(&self) -> DVector<f64> {
        let m = self.regressor_second_moment();
        let mut lhs = DMatrix::zeros(self.d, self.d);
        let mut rhs = DVector::zeros(self.d);
        for xt in &self.xtilde {
            lhs += &m;
            rhs += &m * xt;
        }
        lhs += self.n as f64 * self.gamma * DMatrix::identity(self.d, self.d);
        lhs.lu()
            .solve(&rhs)
            .expect("gamma > 0 makes the system nonsingular")
    }

    fn draw_regressor(&self, rng: &mut impl Rng, out: &mut DVector<f64>) {
        for k in 0..self.d {
            out[k] = self.w_low + (self.w_high - self.w_low) * rng.random::<f64>();
        }
    }

    /// Monte Carlo ground truth: analytic `x_star` and `H`, a sample
    /// covariance estimate of `S` over `mc_samples` draws of the summed
    /// gradient at the optimum, and `Sigma = H^{-1} S H^{-1}`.
    pub fn ground_truth(&self, mc_samples: usize, seed: u64) -> Result<GroundTruth, OracleError> {
        assert!(mc_samples >= 2);
        let d = self.d;
        let x_star = self.analytic_optimum();
        let h = self.full_hessian();

        let mut streams: Vec<_> = (0..self.n)
            .map(|i| rng::stream(seed, 0, i, Purpose::GroundTruth))
            .collect();
        let mut sum = DVector::zeros(d);
        let mut sum_outer: DMatrix<f64> = DMatrix::zeros(d, d);
        let mut sum_outer_sq: DMatrix<f64> = DMatrix::zeros(d, d);
        let mut g_total = DVector::zeros(d);
        let mut g_i = DVector::zeros(d);
        for _ in 0..mc_samples {
            g_total.fill(0.0);
            for i in 0..self.n {
                self.sample_gradient(i, x_star.as_view(), g_i.as_view_mut(), &mut streams[i]);
                g_total += &g_i;
            }
            sum += &g_total;
            for a in 0..d {
                for b in 0..d {
                    let p = g_total[a] * g_total[b];
                    sum_outer[(a, b)] += p;
                    sum_outer_sq[(a, b)] += p * p;
                }
            }
        }
        let nf = mc_samples as f64;
        let mean = &sum / nf;
        let s = (&sum_outer - nf * &mean * mean.transpose()) / (nf - 1.0);
        let mut s_standard_error = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let ex = sum_outer[(a, b)] / nf;
                let ex2 = sum_outer_sq[(a, b)] / nf;
                s_standard_error[(a, b)] = ((ex2 - ex * ex).max(0.0) / nf).sqrt();
            }
        }

        let h_inv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| OracleError::Singular("full Hessian".into()))?;
        let sigma_raw = &h_inv * &s * &h_inv;
        let sigma = (&sigma_raw + sigma_raw.transpose()) / 2.0;
        Ok(GroundTruth {
            x_star,
            h,
            s,
            sigma,
            mc_samples,
            s_standard_error,
        })
    }
}

impl Oracle for RidgeModel {
    fn agents(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn sample_gradient(
        &self,
        i: usize,
        x: DVectorView<f64>,
        mut out: DVectorViewMut<f64>,
        rng: &mut impl Rng,
    ) {
        debug_assert!(i < self.n);
        let mut w = DVector::zeros(self.d);
        self.draw_regressor(rng, &mut w);
        let nu: f64 = if self.noise_sd > 0.0 {
            self.noise_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        } else {
            0.0
        };
        let v = w.dot(&self.xtilde[i]) + nu;
        let resid = w.dot(&x) - v;
        for k in 0..self.d {
            out[k] = 2.0 * resid * w[k] + 2.0 * self.gamma * x[k];
        }
    }

    fn sample_hessian(
        &self,
        i: usize,
        _x: DVectorView<f64>,
        out: &mut DMatrix<f64>,
        rng: &mut impl Rng,
    ) {
        debug_assert!(i < self.n);
        let mut w = DVector::zeros(self.d);
        self.draw_regressor(rng, &mut w);
        for a in 0..self.d {
            for b in 0..self.d {
                out[(a, b)] = 2.0 * w[a] * w[b];
            }
            out[(a, a)] += 2.0 * self.gamma;
        }
    }

    fn lipschitz_bound(&self) -> f64 {
        // L_i(zeta) = 2(||w||^2 + gamma); E[L^2] has a closed form for the
        // uniform box.
        let d = self.d as f64;
        let m2 = uniform_moment(self.w_low, self.w_high, 2);
        let m4 = uniform_moment(self.w_low, self.w_high, 4);
        let e_norm2 = d * m2;
        let e_norm4 = d * m4 + d * (d - 1.0) * m2 * m2;
        2.0 * (e_norm4 + 2.0 * self.gamma * e_norm2 + self.gamma * self.gamma).sqrt()
    }

    fn strong_convexity(&self) -> f64 {
        let m1 = uniform_moment(self.w_low, self.w_high, 1);
        let m2 = uniform_moment(self.w_low, self.w_high, 2);
        let lambda_min = if self.d == 1 { m2 } else { m2 - m1 * m1 };
        2.0 * self.n as f64 * (lambda_min + self.gamma)
    }
}

/// Deterministic strongly convex quadratic with optional additive Gaussian
/// gradient noise. Exact answers are known, which isolates algorithm bugs
/// from oracle sampling noise.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    q: Vec<DMatrix<f64>>,
    c: Vec<DVector<f64>>,
    /// Cholesky factor of the gradient-noise covariance, if any.
    noise_chol: Option<DMatrix<f64>>,
}

impl QuadraticModel {
    /// Per-agent objectives `1/2 (x - c_i)^T Q_i (x - c_i)`.
    pub fn new(
        q: Vec<DMatrix<f64>>,
        c: Vec<DVector<f64>>,
        noise_cov: Option<DMatrix<f64>>,
    ) -> Self {
        assert!(!q.is_empty() && q.len() == c.len());
        let d = c[0].len();
        assert!(q.iter().all(|m| m.nrows() == d && m.ncols() == d));
        let noise_chol = noise_cov.map(|cov| {
            nalgebra::Cholesky::new(cov)
                .expect("noise covariance must be positive definite")
                .l()
        });
        Self { q, c, noise_chol }
    }

    /// Isotropic noise of standard deviation `sd` per coordinate.
    pub fn with_isotropic_noise(
        q: Vec<DMatrix<f64>>,
        c: Vec<DVector<f64>>,
        sd: f64,
        d: usize,
    ) -> Self {
        let cov = DMatrix::identity(d, d) * (sd * sd);
        Self::new(q, c, if sd > 0.0 { Some(cov) } else { None })
    }

    /// The zero oracle: all gradients vanish identically. Used by pure
    /// consensus tests.
    pub fn zero(n: usize, d: usize) -> Self {
        Self::new(
            vec![DMatrix::zeros(d, d); n],
            vec![DVector::zeros(d); n],
            None,
        )
    }

    pub fn analytic_optimum(&self) -> Option<DVector<f64>> {
        let d = self.c[0].len();
        let mut lhs = DMatrix::zeros(d, d);
        let mut rhs = DVector::zeros(d);
        for (q, c) in self.q.iter().zip(&self.c) {
            lhs += q;
            rhs += q * c;
        }
        lhs.lu().solve(&rhs)
    }
}

impl Oracle for QuadraticModel {
    fn agents(&self) -> usize {
        self.q.len()
    }

    fn dim(&self) -> usize {
        self.c[0].len()
    }

    fn sample_gradient(
        &self,
        i: usize,
        x: DVectorView<f64>,
        mut out: DVectorViewMut<f64>,
        rng: &mut impl Rng,
    ) {
        let d = self.dim();
        let g = &self.q[i] * (DVector::from_column_slice(x.as_slice()) - &self.c[i]);
        for k in 0..d {
            out[k] = g[k];
        }
        if let Some(l) = &self.noise_chol {
            let z = DVector::from_fn(d, |_, _| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            });
            let noise = l * z;
            for k in 0..d {
                out[k] += noise[k];
            }
        }
    }

    fn sample_hessian(
        &self,
        i: usize,
        _x: DVectorView<f64>,
        out: &mut DMatrix<f64>,
        _rng: &mut impl Rng,
    ) {
        out.copy_from(&self.q[i]);
    }

    fn lipschitz_bound(&self) -> f64 {
        self.q
            .iter()
            .map(|q| {
                let sym = (q + q.transpose()) / 2.0;
                sym.symmetric_eigen().eigenvalues.amax()
            })
            .fold(0.0, f64::max)
    }

    fn strong_convexity(&self) -> f64 {
        let d = self.dim();
        let mut total = DMatrix::zeros(d, d);
        for q in &self.q {
            total += q;
        }
        let sym = (&total + total.transpose()) / 2.0;
        sym.symmetric_eigen().eigenvalues.min()
    }
}
