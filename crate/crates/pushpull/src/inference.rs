//! Distributed plug-in estimation of the limit covariance, and the
//! statistical utilities behind confidence regions and normality checks.
//!
//! Each agent runs three coupled recursions driven by the pull matrix: a
//! Perron-weight estimate obtained by mixing its own basis vector, and
//! rescaled running averages of gradient-difference outer products and of
//! Hessian samples. Their limits are the covariance of the summed gradient
//! noise at the optimum and the Hessian there, so
//! `H_i^{-1} S_i H_i^{-1}` estimates the covariance of the averaged
//! iterates' limit normal.

use crate::weights::{StochasticKind, WeightMatrix};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("estimate is numerically singular (condition number {cond:.3e})")]
    SingularEstimate { cond: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Per-agent plug-in state, stacked over agents. Row `i` of `u` is agent
/// `i`'s mixed basis vector, so the stack equals the k-th power of the pull
/// matrix; columns of the flattened `s`/`h` stacks hold one vectorized
/// d x d matrix per agent.
#[derive(Debug, Clone)]
pub struct PlugIn {
    n: usize,
    d: usize,
    a: DMatrix<f64>,
    a_t: DMatrix<f64>,
    u: DMatrix<f64>,
    s_flat: DMatrix<f64>,
    h_flat: DMatrix<f64>,
    prev_grad: DMatrix<f64>,
    k: usize,
    eps: f64,
    floor_hits: u64,
    u_next: DMatrix<f64>,
    flat_next: DMatrix<f64>,
}

/// Division floor for the own-weight estimate during the first mixing
/// rounds, before it is bounded away from zero.
pub const U_FLOOR: f64 = 1e-9;

impl PlugIn {
    /// Start the recursions at iteration 0: `u` is the identity stack,
    /// both matrix stacks are zero, and `init_grads` are the gradient
    /// samples the stepper drew at the initial iterates (one column per
    /// agent).
    pub fn new(
        a: &WeightMatrix,
        d: usize,
        init_grads: &DMatrix<f64>,
    ) -> Result<Self, InferenceError> {
        if !matches!(
            a.kind(),
            StochasticKind::RowStochastic | StochasticKind::DoublyStochastic
        ) {
            return Err(InferenceError::InvalidInput(
                "plug-in mixing needs a row stochastic matrix".into(),
            ));
        }
        let n = a.n();
        if init_grads.nrows() != d || init_grads.ncols() != n {
            return Err(InferenceError::InvalidInput(format!(
                "init gradients are {}x{}, expected {}x{}",
                init_grads.nrows(),
                init_grads.ncols(),
                d,
                n
            )));
        }
        Ok(Self {
            n,
            d,
            a: a.matrix().clone(),
            a_t: a.matrix().transpose(),
            u: DMatrix::identity(n, n),
            s_flat: DMatrix::zeros(d * d, n),
            h_flat: DMatrix::zeros(d * d, n),
            prev_grad: init_grads.clone(),
            k: 0,
            eps: U_FLOOR,
            floor_hits: 0,
            u_next: DMatrix::zeros(n, n),
            flat_next: DMatrix::zeros(d * d, n),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn floor_hits(&self) -> u64 {
        self.floor_hits
    }

    /// Agent `i`'s estimate of its own Perron weight `u_i / n`.
    pub fn own_weight(&self, i: usize) -> f64 {
        self.u[(i, i)]
    }

    /// All own-weight estimates, in agent order.
    pub fn own_weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.own_weight(i)).collect()
    }

    /// Row `i` of the mixed basis stack.
    pub fn u_row(&self, i: usize) -> DVector<f64> {
        self.u.row(i).transpose()
    }

    pub fn s_mat(&self, i: usize) -> DMatrix<f64> {
        self.unflatten(&self.s_flat, i)
    }

    pub fn h_mat(&self, i: usize) -> DMatrix<f64> {
        self.unflatten(&self.h_flat, i)
    }

    fn unflatten(&self, flat: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.d, self.d, flat.column(i).as_slice())
    }

    /// Advance every agent from iteration `k` to `k + 1`, consuming the
    /// gradient samples the stepper drew at the new iterates and one
    /// Hessian sample per agent.
    pub fn step(&mut self, grads: &DMatrix<f64>, hessians: &[DMatrix<f64>]) {
        assert_eq!(grads.nrows(), self.d);
        assert_eq!(grads.ncols(), self.n);
        assert_eq!(hessians.len(), self.n);
        let k_new = self.k + 1;
        let keep = k_new as f64 / (k_new as f64 + 1.0);
        let fresh = 1.0 / (k_new as f64 + 1.0);
        let d = self.d;

        // u_i <- sum_j a_ij u_j
        self.u_next.gemm(1.0, &self.a, &self.u, 0.0);
        std::mem::swap(&mut self.u, &mut self.u_next);

        // S_i <- keep * sum_j a_ij S_j + sym(g (g - g_prev)^T) * fresh / u_ii
        self.flat_next.gemm(keep, &self.s_flat, &self.a_t, 0.0);
        for i in 0..self.n {
            let mut w = self.u[(i, i)];
            if w < self.eps {
                w = self.eps;
                self.floor_hits += 1;
            }
            let scale = fresh / w;
            let g = grads.column(i);
            let gp = self.prev_grad.column(i);
            let mut col = self.flat_next.column_mut(i);
            for b in 0..d {
                let db = g[b] - gp[b];
                for a in 0..d {
                    let da = g[a] - gp[a];
                    col[a + b * d] += scale * 0.5 * (g[a] * db + da * g[b]);
                }
            }
        }
        std::mem::swap(&mut self.s_flat, &mut self.flat_next);

        // H_i <- keep * sum_j a_ij H_j + hessian_i * fresh / u_ii
        self.flat_next.gemm(keep, &self.h_flat, &self.a_t, 0.0);
        for i in 0..self.n {
            let w = self.u[(i, i)].max(self.eps);
            let scale = fresh / w;
            let hs = &hessians[i];
            let mut col = self.flat_next.column_mut(i);
            for b in 0..d {
                for a in 0..d {
                    col[a + b * d] += scale * hs[(a, b)];
                }
            }
        }
        std::mem::swap(&mut self.h_flat, &mut self.flat_next);

        self.prev_grad.copy_from(grads);
        self.k = k_new;
    }

    /// Agent `i`'s covariance estimate `H_i^{-1} S_i H_i^{-1}`,
    /// symmetrized. Fails when the Hessian estimate is numerically
    /// singular.
    pub fn covariance(&self, i: usize) -> Result<CovarianceEstimate, InferenceError> {
        let h = self.h_mat(i);
        let s = self.s_mat(i);
        plugin_covariance(&h, &s, self.k)
    }
}

/// A formed covariance estimate together with the iteration it was taken
/// at and the condition number of the Hessian estimate behind it.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub sigma_hat: DMatrix<f64>,
    pub k: usize,
    pub condition_number: f64,
}

/// Condition-number ceiling beyond which an estimate is reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// `H^{-1} S H^{-1}`, symmetrized as `(M + M^T)/2`.
pub fn plugin_covariance(
    h: &DMatrix<f64>,
    s: &DMatrix<f64>,
    k: usize,
) -> Result<CovarianceEstimate, InferenceError> {
    let svd = h.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(InferenceError::SingularEstimate { cond });
    }
    let h_inv = h
        .clone()
        .try_inverse()
        .ok_or(InferenceError::SingularEstimate { cond })?;
    let raw = &h_inv * s * &h_inv;
    let sigma_hat = (&raw + raw.transpose()) / 2.0;
    Ok(CovarianceEstimate {
        sigma_hat,
        k,
        condition_number: cond,
    })
}

/// Regularized lower incomplete gamma function P(a, x), by series expansion
/// for small x and continued fraction otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x - libm::lgamma(a);
    if log_prefactor < -700.0 {
        return if x < a { 0.0 } else { 1.0 };
    }
    const EPS: f64 = 1e-16;
    if x < a + 1.0 {
        // Series: P(a,x) = x^a e^-x / Gamma(a) * sum x^k / (a (a+1) ... (a+k))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..500 {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        sum * log_prefactor.exp()
    } else {
        // Lentz continued fraction for Q(a,x), then P = 1 - Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        1.0 - log_prefactor.exp() * h
    }
}

/// Upper-tail chi-square quantile: the value whose upper-tail probability
/// under chi-square(d) is `beta`. Bisection on the regularized lower
/// incomplete gamma function, absolute tolerance 1e-10.
pub fn chi2_quantile(beta: f64, d: usize) -> f64 {
    assert!(
        beta > 0.0 && beta < 1.0,
        "tail probability must lie in (0,1)"
    );
    assert!(d >= 1);
    let target = 1.0 - beta;
    let a = d as f64 / 2.0;
    let cdf = |q: f64| gamma_p(a, q / 2.0);
    let mut hi = d as f64 + 8.0;
    while cdf(hi) < target {
        hi *= 2.0;
        assert!(hi.is_finite());
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against
/// `N(mean, sd^2)`, with the asymptotic 5% critical value `1.358/sqrt(N)`.
pub fn ks_statistic(samples: &[f64], mean: f64, sd: f64) -> Result<(f64, f64), InferenceError> {
    if sd <= 0.0 {
        return Err(InferenceError::InvalidInput(format!(
            "sd must be positive, got {sd}"
        )));
    }
    if samples.len() < 2 {
        return Err(InferenceError::InvalidInput(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = xs.len() as f64;
    let mut d_stat: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal_cdf((x - mean) / sd);
        let below = f - i as f64 / n;
        let above = (i as f64 + 1.0) / n - f;
        d_stat = d_stat.max(below).max(above);
    }
    Ok((d_stat, 1.358 / n.sqrt()))
}

/// Whether `point` lies inside the ellipsoidal confidence region
/// `{ y : (y - x_hat)^T Sigma^{-1} (y - x_hat) <= chi2_beta(d) / k }`.
pub fn confidence_region_contains(
    x_hat: &DVector<f64>,
    sigma_hat: &DMatrix<f64>,
    k: usize,
    beta: f64,
    point: &DVector<f64>,
) -> Result<bool, InferenceError> {
    if k == 0 {
        return Err(InferenceError::InvalidInput("region needs k >= 1".into()));
    }
    let d = x_hat.len();
    let diff = point - x_hat;
    let z = match sigma_hat.clone().cholesky() {
        Some(chol) => chol.solve(&diff),
        None => sigma_hat
            .clone()
            .lu()
            .solve(&diff)
            .ok_or(InferenceError::SingularEstimate {
                cond: f64::INFINITY,
            })?,
    };
    let quad_form = diff.dot(&z);
    Ok(quad_form <= chi2_quantile(beta, d) / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;
    use crate::weights::{pull_matrix, push_matrix, EigenPair};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn study_pull() -> WeightMatrix {
        pull_matrix(&DirectedGraph::ring_plus_random(20, 0.3, 7).unwrap())
    }

    fn random_inputs(n: usize, d: usize, rng: &mut impl Rng) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let grads = DMatrix::from_fn(d, n, |_, _| rng.random::<f64>() - 0.5);
        let hessians = (0..n)
            .map(|_| {
                let m = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
                &m * m.transpose()
            })
            .collect();
        (grads, hessians)
    }

    #[test]
    fn u_rows_are_matrix_powers() {
        let a = study_pull();
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (g0, _) = random_inputs(20, d, &mut rng);
        let mut plugin = PlugIn::new(&a, d, &g0).unwrap();
        let mut power = DMatrix::<f64>::identity(20, 20);
        for _ in 0..20 {
            let (g, h) = random_inputs(20, d, &mut rng);
            plugin.step(&g, &h);
            power = a.matrix() * &power;
            for i in 0..20 {
                let row = plugin.u_row(i);
                let expect = power.row(i).transpose();
                assert!((row - expect).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn own_weights_converge_to_perron_weights() {
        let g = DirectedGraph::ring_plus_random(20, 0.3, 7).unwrap();
        let a = pull_matrix(&g);
        let b = push_matrix(&g);
        let pair = EigenPair::compute(&a, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (g0, _) = random_inputs(20, 3, &mut rng);
        let mut plugin = PlugIn::new(&a, 3, &g0).unwrap();
        for _ in 0..200 {
            let (gr, h) = random_inputs(20, 3, &mut rng);
            plugin.step(&gr, &h);
        }
        for i in 0..20 {
            assert!(
                (plugin.own_weight(i) - pair.u[i] / 20.0).abs() < 1e-6,
                "agent {i}: {} vs {}",
                plugin.own_weight(i),
                pair.u[i] / 20.0
            );
        }
        assert_eq!(plugin.floor_hits(), 0);
    }

    #[test]
    fn stacks_stay_symmetric() {
        let a = study_pull();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (g0, _) = random_inputs(20, 3, &mut rng);
        let mut plugin = PlugIn::new(&a, 3, &g0).unwrap();
        for _ in 0..50 {
            let (gr, h) = random_inputs(20, 3, &mut rng);
            plugin.step(&gr, &h);
            for i in 0..20 {
                let s = plugin.s_mat(i);
                let hm = plugin.h_mat(i);
                assert!((&s - s.transpose()).amax() < 1e-14);
                assert!((&hm - hm.transpose()).amax() < 1e-14);
            }
        }
    }

    #[test]
    fn single_agent_recursions_telescope() {
        let a = WeightMatrix::from_parts(DMatrix::identity(1, 1), StochasticKind::DoublyStochastic)
            .unwrap();
        let d = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (g0, _) = random_inputs(1, d, &mut rng);
        let mut plugin = PlugIn::new(&a, d, &g0).unwrap();

        let mut h_sum = DMatrix::<f64>::zeros(d, d);
        let mut s_sum = DMatrix::<f64>::zeros(d, d);
        let mut prev_g = g0.column(0).clone_owned();
        for k in 1..=40 {
            let (gr, hs) = random_inputs(1, d, &mut rng);
            plugin.step(&gr, &hs);
            let g = gr.column(0).clone_owned();
            let diff = &g - &prev_g;
            s_sum += (&g * diff.transpose() + &diff * g.transpose()) / 2.0;
            h_sum += &hs[0];
            prev_g = g;

            assert_eq!(plugin.own_weight(0), 1.0);
            let expect_h = &h_sum / (k as f64 + 1.0);
            let expect_s = &s_sum / (k as f64 + 1.0);
            assert!((plugin.h_mat(0) - expect_h).amax() < 1e-12);
            assert!((plugin.s_mat(0) - expect_s).amax() < 1e-12);
        }
    }

    #[test]
    fn covariance_scalar_algebra() {
        let id = DMatrix::<f64>::identity(3, 3);
        let est = plugin_covariance(&id, &id, 5).unwrap();
        assert!((est.sigma_hat - &id).amax() < 1e-15);

        let est = plugin_covariance(&(2.0 * &id), &(4.0 * &id), 5).unwrap();
        assert!((est.sigma_hat - &id).amax() < 1e-15);

        let singular = DMatrix::<f64>::zeros(3, 3);
        assert!(matches!(
            plugin_covariance(&singular, &id, 5),
            Err(InferenceError::SingularEstimate { .. })
        ));
    }

    #[test]
    fn chi2_quantile_reference_values() {
        assert!((chi2_quantile(0.05, 3) - 7.8147).abs() < 1e-3);
        assert_relative_eq!(
            chi2_quantile(0.5, 2),
            2.0 * std::f64::consts::LN_2,
            epsilon = 1e-9
        );
        assert!(chi2_quantile(1.0 - 1e-12, 1) < 1e-9);
        // Classical table entries.
        assert!((chi2_quantile(0.95, 1) - 0.0039321).abs() < 1e-6);
        assert!((chi2_quantile(0.01, 10) - 23.209).abs() < 1e-3);
    }

    #[test]
    fn chi2_quantile_monotonicity() {
        let mut prev = f64::INFINITY;
        for beta in [0.01, 0.05, 0.1, 0.5, 0.9, 0.99] {
            let q = chi2_quantile(beta, 4);
            assert!(q < prev, "must decrease in beta");
            prev = q;
        }
        let mut prev = 0.0;
        for d in 1..=12 {
            let q = chi2_quantile(0.05, d);
            assert!(q > prev, "must increase in d");
            prev = q;
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.96) - 0.9750021048517795).abs() < 1e-12);
        assert!(normal_cdf(40.0) == 1.0);
        assert!(normal_cdf(-40.0) == 0.0);
        for z in [-2.5, -0.3, 0.7, 3.1] {
            assert_relative_eq!(normal_cdf(z) + normal_cdf(-z), 1.0, epsilon = 1e-14);
        }
    }

    /// Inverse standard normal by bisection, for test constructions only.
    fn normal_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-12.0, 12.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn ks_near_perfect_fit() {
        let n = 400;
        let samples: Vec<f64> = (1..=n)
            .map(|i| normal_quantile(i as f64 / (n as f64 + 1.0)))
            .collect();
        let (d, crit) = ks_statistic(&samples, 0.0, 1.0).unwrap();
        assert!(d <= 1.0 / (n as f64 + 1.0) + 1e-12, "D = {d}");
        assert_relative_eq!(crit, 1.358 / (n as f64).sqrt());
    }

    #[test]
    fn ks_critical_value_is_calibrated() {
        // 200 deterministic families of 500 standard normal draws: the
        // statistic clears the 5% critical value 1.358/sqrt(500) = 0.0608
        // in at least 95% of them (194 for this fixed family).
        use rand_distr::{Distribution, StandardNormal};
        let mut below = 0;
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (d, crit) = ks_statistic(&samples, 0.0, 1.0).unwrap();
            assert!((crit - 1.358 / 500f64.sqrt()).abs() < 1e-12);
            if d < 0.0608 {
                below += 1;
            }
        }
        assert!(below >= 190, "only {below}/200 below the critical value");
    }

    #[test]
    fn ks_point_mass_is_far_from_normal() {
        let samples = vec![0.3; 50];
        let (d, _) = ks_statistic(&samples, 0.0, 1.0).unwrap();
        assert!(d >= 0.5);
    }

    #[test]
    fn ks_input_validation() {
        assert!(ks_statistic(&[1.0, 2.0], 0.0, 0.0).is_err());
        assert!(ks_statistic(&[1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn region_membership() {
        let x_hat = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let sigma = DMatrix::identity(3, 3);
        assert!(confidence_region_contains(&x_hat, &sigma, 10, 0.5, &x_hat).unwrap());

        // Quadratic form 10 exceeds the 95% chi-square(3) quantile 7.8147.
        let far = &x_hat + DVector::from_vec(vec![10f64.sqrt(), 0.0, 0.0]);
        assert!(!confidence_region_contains(&x_hat, &sigma, 1, 0.05, &far).unwrap());
        // ... but a point at squared distance 7 is inside.
        let near = &x_hat + DVector::from_vec(vec![7f64.sqrt(), 0.0, 0.0]);
        assert!(confidence_region_contains(&x_hat, &sigma, 1, 0.05, &near).unwrap());

        let singular = DMatrix::zeros(3, 3);
        assert!(confidence_region_contains(&x_hat, &singular, 1, 0.05, &far).is_err());
    }
}
