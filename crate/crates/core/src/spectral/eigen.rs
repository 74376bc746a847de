//! Generalized eigensolvers for K v = lambda M v.
//!
//! Two regimes. Small systems go through a dense Cholesky reduction to a
//! standard symmetric problem, which is simple and exhausts the spectrum.
//! Larger systems use shift-invert Lanczos on C = (K + M)^{-1} M, which is
//! self-adjoint in the (K + M) inner product and whose top eigenvalues
//! nu = 1/(1 + lambda) are exactly the low Neumann modes; the inner solves
//! are incomplete-Cholesky preconditioned conjugate gradients, so nothing
//! beyond matrix-vector products and triangular sweeps is ever needed.

use nalgebra::{DMatrix, DVector};

use super::sparse::{
    conjugate_gradients, CsrMatrix, IncompleteCholesky, Preconditioner, ScaledSum,
};
use super::SpectralError;

/// Unknown-count threshold between the dense and iterative eigen paths.
pub const DENSE_EIGEN_LIMIT: usize = 3000;

/// Relative accuracy demanded of iterative eigenvalues.
const LANCZOS_TOL: f64 = 1e-8;

/// Eigenpairs of the transmission Laplacian, ascending, M-orthonormal.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<f64>>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Computes the lowest `nev` Neumann eigenpairs, choosing the algorithm by
/// problem size.
pub fn solve_neumann(
    k: &CsrMatrix,
    m: &CsrMatrix,
    nev: usize,
) -> Result<EigenSystem, SpectralError> {
    let n = k.dim();
    let nev = nev.min(n);
    if n <= DENSE_EIGEN_LIMIT {
        solve_dense(k, m, nev)
    } else {
        solve_shift_invert(k, m, nev)
    }
}

/// Dense path: M = L L^T, then the standard symmetric problem for
/// A = L^{-1} K L^{-T}.
pub fn solve_dense(
    k: &CsrMatrix,
    m: &CsrMatrix,
    nev: usize,
) -> Result<EigenSystem, SpectralError> {
    let kd = k.to_dense();
    let md = m.to_dense();
    let chol = md
        .cholesky()
        .ok_or(SpectralError::MassNotPositive)?;
    let l = chol.l();
    // A = L^{-1} K L^{-T}; built via two triangular solves.
    let x = l.solve_lower_triangular(&kd).ok_or(SpectralError::MassNotPositive)?;
    let a = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(SpectralError::MassNotPositive)?;
    let a = 0.5 * (&a + a.transpose());
    let eig = a.symmetric_eigen();

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut eigenvalues = Vec::with_capacity(nev);
    let mut eigenvectors = Vec::with_capacity(nev);
    for &idx in order.iter().take(nev) {
        eigenvalues.push(eig.eigenvalues[idx]);
        let w = eig.eigenvectors.column(idx).into_owned();
        let v = lt
            .solve_upper_triangular(&w)
            .ok_or(SpectralError::MassNotPositive)?;
        eigenvectors.push(gauge(v));
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Deterministic sign convention: the component of largest magnitude is
/// positive (first such index on ties).
fn gauge(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-14 * v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Iterative path: B-inner-product Lanczos for C = B^{-1} M with
/// B = K + M.
pub fn solve_shift_invert(
    k: &CsrMatrix,
    m: &CsrMatrix,
    nev: usize,
) -> Result<EigenSystem, SpectralError> {
    let n = k.dim();
    let nev = nev.min(n);
    let b_sum = ScaledSum::new(vec![(1.0, k), (1.0, m)]);
    let b_csr = b_sum.to_csr();
    let precond = match IncompleteCholesky::new(&b_csr) {
        Some(ic) => Preconditioner::Ic0(ic),
        None => Preconditioner::jacobi_of(&b_csr.diagonal()),
    };
    let apply_b = |x: &DVector<f64>| b_csr.matvec(x);

    let steps = (3 * nev + 60).min(n);

    // Deterministic start with broad spectral content.
    let x0 = DVector::from_fn(n, |i, _| 1.0 + 0.125 * ((i as f64) * 1.2345).sin());
    let bx0 = apply_b(&x0);
    let norm0 = x0.dot(&bx0).sqrt();
    let mut basis: Vec<DVector<f64>> = vec![&x0 / norm0];
    let mut b_basis: Vec<DVector<f64>> = vec![bx0 / norm0];

    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::new();

    for j in 0..steps {
        let vj = basis[j].clone();
        let mv = m.matvec(&vj);
        let mut w = conjugate_gradients(apply_b, &mv, &precond, 1e-12, 100 * n, None)?;
        alpha.push(w.dot(&b_basis[j]));
        // Full reorthogonalization in the B inner product, two sweeps.
        for _ in 0..2 {
            for (v_i, bv_i) in basis.iter().zip(&b_basis) {
                let c = w.dot(bv_i);
                w -= c * v_i;
            }
        }
        let bw = apply_b(&w);
        let norm = w.dot(&bw).sqrt();
        if j + 1 == steps || norm < 1e-14 {
            beta.push(norm);
            break;
        }
        beta.push(norm);
        basis.push(&w / norm);
        b_basis.push(bw / norm);
    }

    let mdim = alpha.len();
    let mut t = DMatrix::zeros(mdim, mdim);
    for i in 0..mdim {
        t[(i, i)] = alpha[i];
        if i + 1 < mdim {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..mdim).collect();
    // Descending nu = ascending lambda.
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    if mdim < nev {
        return Err(SpectralError::EigenConvergence {
            requested: nev,
            converged: mdim,
        });
    }

    let beta_last = *beta.last().unwrap_or(&0.0);
    let mut eigenvalues = Vec::with_capacity(nev);
    let mut eigenvectors = Vec::with_capacity(nev);
    for &idx in order.iter().take(nev) {
        let nu = eig.eigenvalues[idx];
        if nu <= 0.0 {
            return Err(SpectralError::EigenConvergence {
                requested: nev,
                converged: eigenvalues.len(),
            });
        }
        let lambda = 1.0 / nu - 1.0;
        let s = eig.eigenvectors.column(idx);
        // Residual of the Ritz pair, mapped from nu to lambda scale.
        let res_nu = beta_last.abs() * s[mdim - 1].abs();
        if res_nu / (nu * nu) > LANCZOS_TOL * lambda.abs().max(1.0) {
            return Err(SpectralError::EigenConvergence {
                requested: nev,
                converged: eigenvalues.len(),
            });
        }
        let mut v = DVector::zeros(n);
        for (j, basis_v) in basis.iter().enumerate() {
            v += s[j] * basis_v;
        }
        eigenvalues.push(lambda);
        eigenvectors.push(v);
    }

    // Clean up roundoff: M-orthonormalize in order (modified Gram-Schmidt),
    // which also keeps clusters consistent.
    let mut m_applied: Vec<DVector<f64>> = Vec::with_capacity(nev);
    for i in 0..nev {
        let mut v = eigenvectors[i].clone();
        for (w, mw) in eigenvectors[..i].iter().zip(&m_applied) {
            let c = v.dot(mw);
            v -= c * w;
        }
        let mv = m.matvec(&v);
        let norm = v.dot(&mv).sqrt();
        if norm < 1e-14 {
            return Err(SpectralError::EigenConvergence {
                requested: nev,
                converged: i,
            });
        }
        v /= norm;
        eigenvectors[i] = gauge(v);
        m_applied.push(m.matvec(&eigenvectors[i]));
    }

    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Groups eigenvalues into clusters of near-degenerate values: indices i
/// and i+1 share a cluster when their gap is below tol * max(1, |lambda|).
pub fn cluster_ranges(eigenvalues: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=eigenvalues.len() {
        let split = i == eigenvalues.len()
            || (eigenvalues[i] - eigenvalues[i - 1]) > tol * eigenvalues[i - 1].abs().max(1.0);
        if split {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Residual norm ||K v - lambda M v|| / ||(K + M) v|| of one eigenpair.
pub fn eigen_residual(k: &CsrMatrix, m: &CsrMatrix, lambda: f64, v: &DVector<f64>) -> f64 {
    let kv = k.matvec(v);
    let mv = m.matvec(v);
    let denom = (&kv + &mv).norm().max(1e-300);
    (kv - lambda * mv).norm() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{SimplicialComplex, VertexId};
    use crate::metric::PiecewiseMetric;
    use crate::spectral::assemble::assemble;
    use crate::spectral::mesh::Mesh;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn vid(v: &[usize]) -> Vec<VertexId> {
        v.iter().map(|&i| VertexId(i)).collect()
    }

    fn square() -> SimplicialComplex {
        SimplicialComplex::build(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
            ],
            vec![vid(&[0, 1, 2]), vid(&[1, 3, 2])],
            vec![],
        )
        .unwrap()
    }

    fn square_problem(k: usize) -> (CsrMatrix, CsrMatrix) {
        let c = square();
        let mesh = Mesh::refine(&c, k).unwrap();
        let flat = PiecewiseMetric::flat(&c);
        assemble(&mesh, &flat).unwrap()
    }

    #[test]
    fn dense_path_matches_unit_square_spectrum() {
        let (k, m) = square_problem(16);
        let eig = solve_dense(&k, &m, 7).unwrap();
        // Neumann eigenvalues pi^2 (p^2 + q^2):
        let exact = [
            0.0,
            PI * PI,
            PI * PI,
            2.0 * PI * PI,
            4.0 * PI * PI,
            4.0 * PI * PI,
            5.0 * PI * PI,
        ];
        assert!(eig.eigenvalues[0].abs() < 1e-10);
        for i in 1..7 {
            assert_relative_eq!(eig.eigenvalues[i], exact[i], max_relative = 0.02);
        }
    }

    #[test]
    fn dense_eigenvectors_are_mass_orthonormal() {
        let (k, m) = square_problem(8);
        let eig = solve_dense(&k, &m, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let ip = eig.eigenvectors[i].dot(&m.matvec(&eig.eigenvectors[j]));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(ip, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn shift_invert_agrees_with_dense() {
        let (k, m) = square_problem(10);
        let nev = 9;
        let dense = solve_dense(&k, &m, nev).unwrap();
        let lanczos = solve_shift_invert(&k, &m, nev).unwrap();
        for i in 0..nev {
            assert_relative_eq!(
                lanczos.eigenvalues[i],
                dense.eigenvalues[i],
                epsilon = 1e-8,
                max_relative = 1e-8
            );
        }
        // Compare cluster subspaces through the M-weighted Gram matrix.
        for range in cluster_ranges(&dense.eigenvalues[..nev], 1e-6) {
            let d = range.len();
            let mut gram = DMatrix::zeros(d, d);
            for (a, i) in range.clone().enumerate() {
                let mv = m.matvec(&lanczos.eigenvectors[i]);
                for (b, j) in range.clone().enumerate() {
                    gram[(a, b)] = dense.eigenvectors[j].dot(&mv);
                }
            }
            let svd = gram.svd(false, false);
            for s in svd.singular_values.iter() {
                assert_relative_eq!(*s, 1.0, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn eigen_residuals_are_small() {
        let (k, m) = square_problem(12);
        let eig = solve_neumann(&k, &m, 8).unwrap();
        for i in 0..eig.len() {
            assert!(eigen_residual(&k, &m, eig.eigenvalues[i], &eig.eigenvectors[i]) < 1e-9);
        }
    }

    #[test]
    fn clusters_group_degenerate_pairs() {
        let vals = [0.0, 9.87, 9.88, 19.7, 39.4, 39.4, 39.5];
        let ranges = cluster_ranges(&vals, 1e-2);
        assert_eq!(ranges, vec![0..1, 1..3, 3..4, 4..7]);
        let singletons = cluster_ranges(&vals, 1e-9);
        assert_eq!(singletons.len(), 6);
    }
}
