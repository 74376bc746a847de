//! Minimal sparse kernels for the finite element solvers: CSR storage,
//! preconditioned conjugate gradients, and zero-fill incomplete Cholesky.

use nalgebra::{DMatrix, DVector};

use super::SpectralError;

/// Compressed sparse row matrix (square, f64).
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets, summing duplicates and
    /// dropping exact zeros after accumulation.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *data.last_mut().expect("entry exists") += v;
            } else {
                indptr[i + 1] += 1;
                indices.push(j);
                data.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
        y
    }

    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    d[i] = *v;
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] = *v;
            }
        }
        m
    }

    /// Extracts the submatrix with the given row and column node sets.
    /// `row_of` / `col_of` map global indices to local ones (usize::MAX =
    /// not selected).
    pub fn submatrix(&self, row_of: &[usize], col_of: &[usize], nrows: usize, ncols: usize) -> CsrSubMatrix {
        let mut triplets = Vec::new();
        for i in 0..self.n {
            let ri = row_of[i];
            if ri == usize::MAX {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let cj = col_of[*c];
                if cj != usize::MAX {
                    triplets.push((ri, cj, *v));
                }
            }
        }
        CsrSubMatrix::from_triplets(nrows, ncols, triplets)
    }
}

/// Rectangular CSR block used for interior/boundary partitions.
#[derive(Clone, Debug)]
pub struct CsrSubMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrSubMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *data.last_mut().expect("entry exists") += v;
            } else {
                indptr[i + 1] += 1;
                indices.push(j);
                data.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrSubMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
        y
    }

    /// Square-view diagonal (valid when nrows == ncols).
    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    d[i] = *v;
                }
            }
        }
        d
    }
}

/// Symmetric positive definite operator given by a sum of scaled CSR
/// matrices, e.g. K + M or M + beta dt^2 K.
pub struct ScaledSum<'a> {
    pub terms: Vec<(f64, &'a CsrMatrix)>,
}

impl<'a> ScaledSum<'a> {
    pub fn new(terms: Vec<(f64, &'a CsrMatrix)>) -> Self {
        ScaledSum { terms }
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, m)| m.dim())
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for (s, m) in &self.terms {
            y += *s * m.matvec(x);
        }
        y
    }

    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.dim());
        for (s, m) in &self.terms {
            d += *s * m.diagonal();
        }
        d
    }

    /// Materializes the sum as CSR (needed for incomplete factorization).
    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.dim();
        let mut triplets = Vec::new();
        for (s, m) in &self.terms {
            for i in 0..n {
                let (cols, vals) = m.row(i);
                for (c, v) in cols.iter().zip(vals) {
                    triplets.push((i, *c, s * v));
                }
            }
        }
        CsrMatrix::from_triplets(n, triplets)
    }
}

/// Zero-fill incomplete Cholesky factor of an SPD CSR matrix, stored as a
/// lower-triangular CSR plus its transpose for the backward solve.
pub struct IncompleteCholesky {
    lower: CsrSubMatrix,
    upper: CsrSubMatrix,
}

impl IncompleteCholesky {
    /// Factors on the lower-triangular pattern of `a`. Returns None on
    /// breakdown (non-positive pivot), in which case callers fall back to
    /// a diagonal preconditioner.
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let n = a.dim();
        // Row-major lower-triangular working copy.
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut r: Vec<(usize, f64)> = cols
                .iter()
                .zip(vals)
                .filter(|(c, _)| **c <= i)
                .map(|(c, v)| (*c, *v))
                .collect();
            r.sort_unstable_by_key(|&(c, _)| c);
            rows.push(r);
        }
        let mut diag = vec![0.0f64; n];
        for i in 0..n {
            let row_i = std::mem::take(&mut rows[i]);
            let mut new_row = Vec::with_capacity(row_i.len());
            for (k, aik) in &row_i {
                let (k, aik) = (*k, *aik);
                if k == i {
                    // Pivot: a_ii - sum of squares of the factored row.
                    let mut s = aik;
                    for (_, v) in &new_row {
                        s -= v * v;
                    }
                    if s <= 0.0 {
                        return None;
                    }
                    diag[i] = s.sqrt();
                    new_row.push((i, diag[i]));
                } else {
                    // L[i,k] = (a_ik - sum_j L[i,j] L[k,j]) / L[k,k]
                    let mut s = aik;
                    let row_k = &rows[k];
                    let mut p = 0;
                    let mut q = 0;
                    while p < new_row.len() && q < row_k.len() {
                        let (cj, cv) = new_row[p];
                        let (kj, kv) = row_k[q];
                        if cj == kj {
                            if cj < k {
                                s -= cv * kv;
                            }
                            p += 1;
                            q += 1;
                        } else if cj < kj {
                            p += 1;
                        } else {
                            q += 1;
                        }
                    }
                    if diag[k] == 0.0 {
                        return None;
                    }
                    new_row.push((k, s / diag[k]));
                }
            }
            rows[i] = new_row;
        }

        let mut lower_trip = Vec::new();
        let mut upper_trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row {
                lower_trip.push((i, *j, *v));
                upper_trip.push((*j, i, *v));
            }
        }
        Some(IncompleteCholesky {
            lower: CsrSubMatrix::from_triplets(n, n, lower_trip),
            upper: CsrSubMatrix::from_triplets(n, n, upper_trip),
        })
    }

    /// Solves L L^T z = r.
    pub fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        let n = self.lower.nrows();
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let (cols, vals) = self.lower.row(i);
            let mut acc = r[i];
            let mut dii = 1.0;
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    dii = *v;
                } else {
                    acc -= v * y[*c];
                }
            }
            y[i] = acc / dii;
        }
        let mut z = DVector::zeros(n);
        for i in (0..n).rev() {
            let (cols, vals) = self.upper.row(i);
            let mut acc = y[i];
            let mut dii = 1.0;
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    dii = *v;
                } else {
                    acc -= v * z[*c];
                }
            }
            z[i] = acc / dii;
        }
        z
    }
}

/// Preconditioner choices for conjugate gradients.
pub enum Preconditioner {
    Identity,
    Jacobi(DVector<f64>),
    Ic0(IncompleteCholesky),
}

impl Preconditioner {
    pub fn jacobi_of(diag: &DVector<f64>) -> Preconditioner {
        Preconditioner::Jacobi(diag.map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }))
    }

    fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            Preconditioner::Identity => r.clone(),
            Preconditioner::Jacobi(inv) => r.component_mul(inv),
            Preconditioner::Ic0(ic) => ic.apply(r),
        }
    }
}

/// Preconditioned conjugate gradients for SPD operators. Solves A x = b to
/// a relative residual tolerance; `x0` seeds the iteration when given.
pub fn conjugate_gradients(
    apply_a: impl Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    precond: &Preconditioner,
    rel_tol: f64,
    max_iter: usize,
    x0: Option<&DVector<f64>>,
) -> Result<DVector<f64>, SpectralError> {
    let norm_b = b.norm();
    if norm_b == 0.0 {
        return Ok(DVector::zeros(b.len()));
    }
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(b.len()));
    let mut r = b - apply_a(&x);
    if r.norm() <= rel_tol * norm_b {
        return Ok(x);
    }
    let mut z = precond.apply(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..max_iter {
        let ap = apply_a(&p);
        let alpha = rz / p.dot(&ap);
        x += alpha * &p;
        r -= alpha * &ap;
        if r.norm() <= rel_tol * norm_b {
            return Ok(x);
        }
        z = precond.apply(&r);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = z + beta * &p;
    }
    Err(SpectralError::IterationStall {
        context: "conjugate gradients",
        residual: r.norm() / norm_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 5.0)]);
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(1, 0)], 5.0);
    }

    #[test]
    fn cg_matches_dense_solve() {
        let a = laplacian_1d(50);
        let b = DVector::from_fn(50, |i, _| (i as f64 * 0.3).sin());
        let pre = Preconditioner::jacobi_of(&a.diagonal());
        let x = conjugate_gradients(|v| a.matvec(v), &b, &pre, 1e-12, 1000, None).unwrap();
        let dense = a.to_dense();
        let x_ref = dense.lu().solve(&b).unwrap();
        assert_relative_eq!((x - x_ref).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn ic0_preconditioner_accelerates_cg() {
        let a = laplacian_1d(400);
        let b = DVector::from_fn(400, |i, _| ((i * 7 % 13) as f64) - 6.0);
        let ic = IncompleteCholesky::new(&a).expect("spd factorization");
        // 1D tridiagonal: IC(0) is exact, so CG converges in one step.
        let x = conjugate_gradients(
            |v| a.matvec(v),
            &b,
            &Preconditioner::Ic0(ic),
            1e-12,
            5,
            None,
        )
        .unwrap();
        assert_relative_eq!((a.matvec(&x) - &b).norm() / b.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn submatrix_extracts_block() {
        let a = laplacian_1d(5);
        // Select rows/cols {1, 3}.
        let mut map = vec![usize::MAX; 5];
        map[1] = 0;
        map[3] = 1;
        let sub = a.submatrix(&map, &map, 2, 2);
        assert_eq!(sub.nrows(), 2);
        let x = DVector::from_column_slice(&[1.0, 1.0]);
        let y = sub.matvec(&x);
        // Rows 1 and 3 of the 1D Laplacian restricted to {1,3}: only the
        // diagonal survives (columns 0, 2, 4 dropped).
        assert_eq!(y[0], 2.0);
        assert_eq!(y[1], 2.0);
    }
}
