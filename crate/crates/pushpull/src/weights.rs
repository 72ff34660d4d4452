//! Weight matrices over a communication graph.
//!
//! The pull matrix mixes decision variables and is row stochastic; the push
//! matrix mixes gradient trackers and is column stochastic; the Metropolis
//! matrix is the doubly stochastic choice the DSGT/DSGD baselines require.
//! All three have strictly positive diagonals by construction.

use crate::graph::DirectedGraph;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Stochasticity residual tolerated at construction time.
pub const STOCHASTICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("matrix violates {kind:?} structure: {detail}")]
    Structure {
        kind: StochasticKind,
        detail: String,
    },
    #[error(
        "power iteration did not converge within {max_iter} iterations (residual {residual:.3e})"
    )]
    ConvergenceFailure { max_iter: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StochasticKind {
    RowStochastic,
    ColumnStochastic,
    DoublyStochastic,
}

/// A validated nonnegative stochastic matrix with positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    kind: StochasticKind,
    matrix: DMatrix<f64>,
}

impl WeightMatrix {
    /// Wrap and validate an explicit matrix.
    pub fn from_parts(matrix: DMatrix<f64>, kind: StochasticKind) -> Result<Self, WeightError> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(WeightError::Dimension(format!(
                "expected square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let structure = |detail: String| WeightError::Structure { kind, detail };
        if matrix.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(structure("negative or non-finite entry".into()));
        }
        for i in 0..n {
            if matrix[(i, i)] <= 0.0 {
                return Err(structure(format!("diagonal entry {i} is not positive")));
            }
        }
        let row_ok = (0..n).all(|i| (matrix.row(i).sum() - 1.0).abs() <= STOCHASTICITY_TOL);
        let col_ok = (0..n).all(|j| (matrix.column(j).sum() - 1.0).abs() <= STOCHASTICITY_TOL);
        let ok = match kind {
            StochasticKind::RowStochastic => row_ok,
            StochasticKind::ColumnStochastic => col_ok,
            StochasticKind::DoublyStochastic => row_ok && col_ok,
        };
        if !ok {
            return Err(structure("row/column sums deviate from 1".into()));
        }
        Ok(Self { kind, matrix })
    }

    pub fn kind(&self) -> StochasticKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// CSV serialization: n rows of n comma-separated reals, shortest
    /// round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.matrix[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Row-stochastic pull matrix: `A[i][j] = 1/(deg_in(i)+1)` for in-neighbors
/// `j`, remainder on the diagonal.
pub fn pull_matrix(g: &DirectedGraph) -> WeightMatrix {
    let n = g.node_count();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let innb = g.in_neighbors(i);
        let w = 1.0 / (innb.len() as f64 + 1.0);
        let mut off = 0.0;
        for j in innb {
            m[(i, j)] = w;
            off += w;
        }
        m[(i, i)] = 1.0 - off;
    }
    WeightMatrix::from_parts(m, StochasticKind::RowStochastic)
        .expect("pull matrix is row stochastic by construction")
}

/// Column-stochastic push matrix: `B[j][i] = 1/(deg_out(i)+1)` for
/// out-neighbors `j` of `i`, remainder on the diagonal.
pub fn push_matrix(g: &DirectedGraph) -> WeightMatrix {
    let n = g.node_count();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let outnb = g.out_neighbors(i);
        let w = 1.0 / (outnb.len() as f64 + 1.0);
        let mut off = 0.0;
        for j in outnb {
            m[(j, i)] = w;
            off += w;
        }
        m[(i, i)] = 1.0 - off;
    }
    WeightMatrix::from_parts(m, StochasticKind::ColumnStochastic)
        .expect("push matrix is column stochastic by construction")
}

/// Doubly stochastic Metropolis matrix on the undirected support of `g`.
pub fn metropolis_matrix(g: &DirectedGraph) -> WeightMatrix {
    let n = g.node_count();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && (g.has_edge(i, j) || g.has_edge(j, i)))
                .collect()
        })
        .collect();
    let deg: Vec<usize> = neighbors.iter().map(|nb| nb.len()).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for &j in &neighbors[i] {
            let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
            m[(i, j)] = w;
            off += w;
        }
        m[(i, i)] = 1.0 - off;
    }
    WeightMatrix::from_parts(m, StochasticKind::DoublyStochastic)
        .expect("Metropolis matrix is doubly stochastic by construction")
}

/// Perron eigenvectors of a pull/push pair, normalized so each sums to `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Left eigenvector of the pull matrix at eigenvalue 1.
    pub u: DVector<f64>,
    /// Right eigenvector of the push matrix at eigenvalue 1.
    pub v: DVector<f64>,
    /// The inner product `u^T v`.
    pub uv: f64,
}

impl EigenPair {
    /// Power iteration with the design-decision defaults.
    pub fn compute(a: &WeightMatrix, b: &WeightMatrix) -> Result<Self, WeightError> {
        perron_vectors(a, b, 1e-12, 100_000)
    }
}

fn power_to_fixed_point(
    m: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>, WeightError> {
    let n = m.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut next = DVector::zeros(n);
    for _ in 0..max_iter {
        next.gemv(1.0, m, &x, 0.0);
        let residual = (&next - &x).amax();
        std::mem::swap(&mut x, &mut next);
        if residual < tol {
            // Sum is preserved by stochasticity; rescale to sum exactly n.
            let s = x.sum();
            return Ok(x * (n as f64 / s));
        }
    }
    let residual = (&next - &x).amax();
    Err(WeightError::ConvergenceFailure { max_iter, residual })
}

/// Left Perron vector of `a` and right Perron vector of `b`, each scaled to
/// sum to `n`. Fails if power iteration stalls, which happens exactly when
/// the topology condition does not hold.
pub fn perron_vectors(
    a: &WeightMatrix,
    b: &WeightMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair, WeightError> {
    if a.n() != b.n() {
        return Err(WeightError::Dimension(format!("{} vs {}", a.n(), b.n())));
    }
    let u = power_to_fixed_point(&a.matrix().transpose(), tol, max_iter)?;
    let v = power_to_fixed_point(b.matrix(), tol, max_iter)?;
    let uv = u.dot(&v);
    if !(uv > 0.0) {
        // Nonnegative vectors with disjoint support: the shared-root
        // condition cannot hold.
        return Err(WeightError::Structure {
            kind: StochasticKind::RowStochastic,
            detail: format!("Perron vectors have nonpositive inner product {uv}"),
        });
    }
    Ok(EigenPair { u, v, uv })
}

/// Spectral-radius estimate of the mixing residual `M - 1 u^T / n` (row
/// stochastic) or `M - v 1^T / n` (column stochastic): the modulus of the
/// second-largest eigenvalue of `M`. Strictly below 1 whenever the weight
/// assumptions hold; reported as a diagnostic only.
pub fn contraction_diagnostic(m: &WeightMatrix, pair: &EigenPair) -> f64 {
    let n = m.n();
    let ones = DVector::from_element(n, 1.0);
    let residual = match m.kind() {
        StochasticKind::RowStochastic => m.matrix() - &ones * (pair.u.transpose() / n as f64),
        StochasticKind::ColumnStochastic => m.matrix() - &pair.v * (ones.transpose() / n as f64),
        StochasticKind::DoublyStochastic => {
            m.matrix() - DMatrix::from_element(n, n, 1.0 / n as f64)
        }
    };
    spectral_radius(&residual, 4000)
}

/// Growth-rate power iteration: geometric mean of per-step norm growth over
/// the trailing half of the iterations. Robust to complex dominant pairs,
/// where plain Rayleigh quotients oscillate.
fn spectral_radius(m: &DMatrix<f64>, iters: usize) -> f64 {
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    x /= x.norm();
    let mut y = DVector::zeros(n);
    let mut log_sum = 0.0;
    let mut count = 0u32;
    for t in 0..iters {
        y.gemv(1.0, m, &x, 0.0);
        let growth = y.norm();
        if growth == 0.0 {
            return 0.0;
        }
        std::mem::swap(&mut x, &mut y);
        x /= growth;
        if t >= iters / 2 {
            log_sum += growth.ln();
            count += 1;
        }
    }
    (log_sum / count as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn study_graph() -> DirectedGraph {
        DirectedGraph::ring_plus_random(20, 0.3, 7).unwrap()
    }

    fn empty(n: usize) -> DirectedGraph {
        DirectedGraph::new(n, []).unwrap()
    }

    fn complete(n: usize) -> DirectedGraph {
        DirectedGraph::ring_plus_random(n, 1.0, 0).unwrap()
    }

    /// Left Perron vector by a dense linear solve of (A^T - I)u = 0 with the
    /// normalization row appended in place of the last equation.
    fn left_perron_dense(a: &WeightMatrix) -> DVector<f64> {
        let n = a.n();
        let mut m = a.matrix().transpose() - DMatrix::<f64>::identity(n, n);
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = n as f64;
        m.lu().solve(&rhs).expect("unique Perron vector")
    }

    fn dense_second_eigenvalue_modulus(residual: &DMatrix<f64>) -> f64 {
        residual
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn pull_matrix_on_ring() {
        let g = DirectedGraph::ring_plus_random(4, 0.0, 0).unwrap();
        let a = pull_matrix(&g);
        for i in 0..4 {
            assert_relative_eq!(a.matrix()[(i, i)], 0.5);
            assert_relative_eq!(a.matrix()[(i, (i + 3) % 4)], 0.5);
        }
    }

    #[test]
    fn pull_and_push_on_empty_graph_are_identity() {
        let g = empty(3);
        assert_eq!(pull_matrix(&g).matrix(), &DMatrix::identity(3, 3));
        assert_eq!(push_matrix(&g).matrix(), &DMatrix::identity(3, 3));
        assert_eq!(metropolis_matrix(&g).matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn complete_graph_gives_uniform_weights() {
        let g = complete(3);
        let a = pull_matrix(&g);
        let b = push_matrix(&g);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(a.matrix()[(i, j)], 1.0 / 3.0, epsilon = 1e-15);
                assert_relative_eq!(b.matrix()[(i, j)], 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn push_matrix_on_ring_is_column_stochastic() {
        let g = DirectedGraph::ring_plus_random(4, 0.0, 0).unwrap();
        let b = push_matrix(&g);
        for i in 0..4 {
            assert_relative_eq!(b.matrix()[(i, i)], 0.5);
            assert_relative_eq!(b.matrix()[((i + 1) % 4, i)], 0.5);
        }
    }

    #[test]
    fn metropolis_examples() {
        let two = DirectedGraph::new(2, [(0, 1)]).unwrap();
        let w = metropolis_matrix(&two);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(w.matrix()[(i, j)], 0.5);
            }
        }

        let star = DirectedGraph::new(3, [(0, 1), (0, 2)]).unwrap();
        let w = metropolis_matrix(&star);
        assert_relative_eq!(w.matrix()[(0, 1)], 1.0 / 3.0);
        assert_relative_eq!(w.matrix()[(0, 2)], 1.0 / 3.0);
        assert_relative_eq!(w.matrix()[(0, 0)], 1.0 / 3.0);
        assert_relative_eq!(w.matrix()[(1, 1)], 2.0 / 3.0);
        assert_relative_eq!(w.matrix()[(2, 2)], 2.0 / 3.0);
        assert_eq!(w.matrix(), &w.matrix().transpose());
    }

    #[test]
    fn doubly_stochastic_pair_is_all_ones() {
        let g = study_graph();
        let w = metropolis_matrix(&g);
        let pair = EigenPair::compute(&w, &w).unwrap();
        for i in 0..20 {
            assert_relative_eq!(pair.u[i], 1.0, epsilon = 1e-9);
            assert_relative_eq!(pair.v[i], 1.0, epsilon = 1e-9);
        }
        assert_relative_eq!(pair.uv, 20.0, epsilon = 1e-8);
    }

    #[test]
    fn perron_pair_invariants_on_study_graph() {
        let g = study_graph();
        let a = pull_matrix(&g);
        let b = push_matrix(&g);
        let pair = EigenPair::compute(&a, &b).unwrap();

        let left_residual = (pair.u.transpose() * a.matrix() - pair.u.transpose()).amax();
        let right_residual = (b.matrix() * &pair.v - &pair.v).amax();
        assert!(left_residual <= 1e-10, "left residual {left_residual}");
        assert!(right_residual <= 1e-10, "right residual {right_residual}");
        assert_relative_eq!(pair.u.sum(), 20.0, epsilon = 1e-10);
        assert_relative_eq!(pair.v.sum(), 20.0, epsilon = 1e-10);
        assert!(pair.uv > 0.0);
        assert!(pair.u.iter().all(|&x| x >= 0.0));
        assert!(pair.v.iter().all(|&x| x >= 0.0));

        let dense = left_perron_dense(&a);
        assert!((dense - &pair.u).amax() < 1e-9);
    }

    #[test]
    fn swap_matrix_is_rejected() {
        // The periodic swap matrix violates the positive-diagonal condition.
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        assert!(WeightMatrix::from_parts(m, StochasticKind::DoublyStochastic).is_err());
    }

    #[test]
    fn perron_reports_non_convergence() {
        let g = study_graph();
        let a = pull_matrix(&g);
        let b = push_matrix(&g);
        match perron_vectors(&a, &b, 1e-12, 2) {
            Err(WeightError::ConvergenceFailure {
                max_iter: 2,
                residual,
            }) => {
                assert!(residual > 1e-12)
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn contraction_diagnostic_degenerate_cases() {
        let n = 4;
        let id =
            WeightMatrix::from_parts(DMatrix::identity(n, n), StochasticKind::DoublyStochastic)
                .unwrap();
        let pair = EigenPair {
            u: DVector::from_element(n, 1.0),
            v: DVector::from_element(n, 1.0),
            uv: n as f64,
        };
        assert_relative_eq!(contraction_diagnostic(&id, &pair), 1.0, epsilon = 1e-12);

        let g = complete(3);
        let a = pull_matrix(&g);
        let pair = EigenPair::compute(&a, &push_matrix(&g)).unwrap();
        assert!(contraction_diagnostic(&a, &pair) < 1e-12);
    }

    #[test]
    fn contraction_diagnostic_matches_dense_eigenvalues() {
        let g = study_graph();
        let a = pull_matrix(&g);
        let b = push_matrix(&g);
        let pair = EigenPair::compute(&a, &b).unwrap();

        let n = 20.0;
        let ones = DVector::from_element(20, 1.0);
        let res_a = a.matrix() - &ones * (pair.u.transpose() / n);
        let res_b = b.matrix() - &pair.v * (ones.transpose() / n);

        let tau_a = contraction_diagnostic(&a, &pair);
        let tau_b = contraction_diagnostic(&b, &pair);
        assert!(tau_a > 0.0 && tau_a < 1.0);
        assert!(tau_b > 0.0 && tau_b < 1.0);
        assert_relative_eq!(
            tau_a,
            dense_second_eigenvalue_modulus(&res_a),
            epsilon = 1e-3
        );
        assert_relative_eq!(
            tau_b,
            dense_second_eigenvalue_modulus(&res_b),
            epsilon = 1e-3
        );
    }

    #[test]
    fn csv_has_full_precision() {
        let g = DirectedGraph::ring_plus_random(3, 0.0, 0).unwrap();
        let a = pull_matrix(&g);
        let csv = a.to_csv();
        assert_eq!(csv.lines().count(), 3);
        let first: Vec<f64> = csv
            .lines()
            .next()
            .unwrap()
            .split(',')
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 3);
        assert_eq!(first.iter().sum::<f64>(), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn constructed_matrices_are_stochastic(n in 2usize..14, p in 0.0f64..=1.0, seed: u64) {
            let g = DirectedGraph::ring_plus_random(n, p, seed).unwrap();
            let a = pull_matrix(&g);
            let b = push_matrix(&g);
            let w = metropolis_matrix(&g);
            for i in 0..n {
                prop_assert!((a.matrix().row(i).sum() - 1.0).abs() <= STOCHASTICITY_TOL);
                prop_assert!((b.matrix().column(i).sum() - 1.0).abs() <= STOCHASTICITY_TOL);
                prop_assert!((w.matrix().row(i).sum() - 1.0).abs() <= STOCHASTICITY_TOL);
                prop_assert!((w.matrix().column(i).sum() - 1.0).abs() <= STOCHASTICITY_TOL);
                prop_assert!(a.matrix()[(i, i)] > 0.0);
                prop_assert!(b.matrix()[(i, i)] > 0.0);
                prop_assert!(w.matrix()[(i, i)] > 0.0);
            }

            // Ring guarantees strong connectivity, so the contraction
            // diagnostics must certify mixing.
            let pair = EigenPair::compute(&a, &b).unwrap();
            prop_assert!(contraction_diagnostic(&a, &pair) < 1.0);
            prop_assert!(contraction_diagnostic(&b, &pair) < 1.0);
        }
    }
}
