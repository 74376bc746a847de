//! Polynomial metric fields on reference charts.
//!
//! Each metric entry is a polynomial in the cell's reference coordinates,
//! so first and second derivatives (needed by geodesic and Riccati
//! equations) are exact. Total degree is capped so that file round-trips
//! stay faithful and quadrature orders can be fixed once.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::complex::{CellId, SimplicialComplex};

/// Maximum total degree accepted for a metric entry polynomial.
pub const MAX_METRIC_DEGREE: u32 = 4;

/// Minimum eigenvalue a metric sample must exceed to count as positive.
pub const SPD_EIGENVALUE_FLOOR: f64 = 1e-10;

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("polynomial term has {got} exponents, expected {expected}")]
    ExponentArity { got: usize, expected: usize },
    #[error("polynomial total degree {got} exceeds {max}")]
    DegreeTooHigh { got: u32, max: u32 },
    #[error("metric entry index ({i},{j}) out of range for dimension {n}")]
    EntryIndex { i: usize, j: usize, n: usize },
    #[error("metric for cell {cell:?} failed positivity: min eigenvalue {min_eig:.3e} at {point:?}")]
    NotSpd {
        cell: CellId,
        point: Vec<f64>,
        min_eig: f64,
    },
    #[error("metric has {got} cell fields, complex has {expected} cells")]
    CellCount { got: usize, expected: usize },
    #[error("metric dimension {got} does not match complex dimension {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("path node {index} lies outside its declared cell (margin {margin:.3e})")]
    PathLeavesSimplex { index: usize, margin: f64 },
    #[error("path nodes {index} and {next} switch cells without meeting on a shared facet")]
    PathCrossingMismatch { index: usize, next: usize },
    #[error("path has fewer than two nodes")]
    PathTooShort,
    #[error("point not inside any cell of the complex")]
    PointNotLocated,
    #[error("facet {0:?} is not an interface")]
    NotAnInterface(crate::complex::FacetId),
    #[error("normal coordinates fold or leave the simplex at depth {reached:.3e} (requested {requested:.3e}) on facet {facet:?}")]
    ChartFold {
        facet: crate::complex::FacetId,
        reached: f64,
        requested: f64,
    },
    #[error("interface chart requested {got} derivative orders, supported up to {max}")]
    ChartOrder { got: usize, max: usize },
    #[error(transparent)]
    Complex(#[from] crate::complex::ComplexError),
}

/// A polynomial in `nvars` variables, stored as sorted monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    /// (exponents, coefficient), sorted by exponents, no duplicates,
    /// no zero coefficients.
    terms: Vec<(Vec<u32>, f64)>,
}

impl Poly {
    pub fn new(nvars: usize, raw: Vec<(Vec<u32>, f64)>) -> Result<Self, MetricError> {
        let mut terms: Vec<(Vec<u32>, f64)> = Vec::new();
        for (e, c) in raw {
            if e.len() != nvars {
                return Err(MetricError::ExponentArity {
                    got: e.len(),
                    expected: nvars,
                });
            }
            let deg: u32 = e.iter().sum();
            if deg > MAX_METRIC_DEGREE {
                return Err(MetricError::DegreeTooHigh {
                    got: deg,
                    max: MAX_METRIC_DEGREE,
                });
            }
            terms.push((e, c));
        }
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        // Merge duplicates, drop zeros.
        let mut merged: Vec<(Vec<u32>, f64)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => merged.push((e, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        Ok(Poly {
            nvars,
            terms: merged,
        })
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Poly::new(nvars, vec![(vec![0; nvars], c)]).expect("constant is valid")
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[(Vec<u32>, f64)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(e, _)| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = *c;
            for (k, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    m *= x[k];
                }
            }
            acc += m;
        }
        acc
    }

    /// Exact partial derivative with respect to variable `k`.
    pub fn partial(&self, k: usize) -> Poly {
        let mut terms = Vec::new();
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut e2 = e.clone();
                e2[k] -= 1;
                terms.push((e2, c * e[k] as f64));
            }
        }
        Poly {
            nvars: self.nvars,
            terms,
        }
    }
}

/// A smooth metric on one cell: symmetric matrix of polynomials with
/// precomputed first and second derivatives.
#[derive(Clone, Debug)]
pub struct MetricField {
    n: usize,
    /// Upper triangle, row major: index of (i,j), i <= j.
    entries: Vec<Poly>,
    /// partials[k][entry]
    partials: Vec<Vec<Poly>>,
    /// seconds[k * n + l][entry]
    seconds: Vec<Vec<Poly>>,
}

#[inline]
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

impl MetricField {
    /// Builds a metric field from upper-triangle entries `(i, j, poly)`
    /// with `i <= j`; omitted entries default to the identity's.
    pub fn new(n: usize, upper: Vec<(usize, usize, Poly)>) -> Result<Self, MetricError> {
        let mut entries: Vec<Poly> = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| Poly::constant(n, if i == j { 1.0 } else { 0.0 }))
            .collect();
        for (i, j, p) in upper {
            if i > j || j >= n {
                return Err(MetricError::EntryIndex { i, j, n });
            }
            if p.nvars() != n {
                return Err(MetricError::ExponentArity {
                    got: p.nvars(),
                    expected: n,
                });
            }
            entries[tri_index(n, i, j)] = p;
        }
        let partials: Vec<Vec<Poly>> = (0..n)
            .map(|k| entries.iter().map(|p| p.partial(k)).collect())
            .collect();
        let seconds: Vec<Vec<Poly>> = (0..n * n)
            .map(|kl| {
                let (k, l) = (kl / n, kl % n);
                partials[k].iter().map(|p| p.partial(l)).collect()
            })
            .collect();
        Ok(MetricField {
            n,
            entries,
            partials,
            seconds,
        })
    }

    pub fn identity(n: usize) -> Self {
        MetricField::new(n, vec![]).expect("identity is valid")
    }

    /// Constant metric from a symmetric matrix.
    pub fn constant(n: usize, m: &DMatrix<f64>) -> Self {
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                upper.push((i, j, Poly::constant(n, m[(i, j)])));
            }
        }
        MetricField::new(n, upper).expect("constant entries are valid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.entries[tri_index(self.n, i, j)]
    }

    fn assemble(&self, vals: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = vals(tri_index(n, i, j));
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        self.assemble(|e| self.entries[e].eval(x))
    }

    /// d g / d x_k, exact.
    pub fn eval_partial(&self, k: usize, x: &[f64]) -> DMatrix<f64> {
        self.assemble(|e| self.partials[k][e].eval(x))
    }

    /// d^2 g / (d x_k d x_l), exact.
    pub fn eval_second(&self, k: usize, l: usize, x: &[f64]) -> DMatrix<f64> {
        self.assemble(|e| self.seconds[k * self.n + l][e].eval(x))
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }
}

/// A piecewise-smooth metric: one smooth field per cell.
#[derive(Clone, Debug)]
pub struct PiecewiseMetric {
    fields: Vec<MetricField>,
}

impl PiecewiseMetric {
    /// One field per cell, in cell order.
    pub fn new(
        complex: &SimplicialComplex,
        fields: Vec<MetricField>,
    ) -> Result<Self, MetricError> {
        if fields.len() != complex.cell_count() {
            return Err(MetricError::CellCount {
                got: fields.len(),
                expected: complex.cell_count(),
            });
        }
        for f in &fields {
            if f.dim() != complex.dim() {
                return Err(MetricError::Dimension {
                    got: f.dim(),
                    expected: complex.dim(),
                });
            }
        }
        Ok(PiecewiseMetric { fields })
    }

    /// The flat metric (identity in every chart).
    pub fn flat(complex: &SimplicialComplex) -> Self {
        PiecewiseMetric {
            fields: vec![MetricField::identity(complex.dim()); complex.cell_count()],
        }
    }

    pub fn field(&self, c: CellId) -> &MetricField {
        &self.fields[c.0]
    }

    pub fn fields(&self) -> &[MetricField] {
        &self.fields
    }

    /// Replaces the field of one cell (used by perturbation studies).
    pub fn with_field(mut self, c: CellId, f: MetricField) -> Self {
        self.fields[c.0] = f;
        self
    }

    /// Validates positivity of every cell field on a barycentric sample
    /// grid of the given depth (lattice points i/depth).
    pub fn validate_spd(
        &self,
        complex: &SimplicialComplex,
        grid_depth: usize,
    ) -> Result<(), MetricError> {
        let n = complex.dim();
        for ci in 0..complex.cell_count() {
            let cell = CellId(ci);
            let field = &self.fields[ci];
            for bary in barycentric_lattice(n, grid_depth) {
                let x = complex.from_barycentric(cell, &bary);
                let g = field.eval(&x);
                let eig = g.clone().symmetric_eigen();
                let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                if !(min_eig > SPD_EIGENVALUE_FLOOR) {
                    return Err(MetricError::NotSpd {
                        cell,
                        point: x,
                        min_eig,
                    });
                }
            }
        }
        Ok(())
    }
}

/// All barycentric lattice points with weights i/depth summing to one
/// over n+1 vertices, in lexicographic order.
pub fn barycentric_lattice(n: usize, depth: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n + 1];
    fn rec(slot: usize, remaining: usize, current: &mut Vec<usize>, depth: usize, out: &mut Vec<Vec<f64>>) {
        if slot == current.len() - 1 {
            current[slot] = remaining;
            out.push(current.iter().map(|&i| i as f64 / depth as f64).collect());
            return;
        }
        for i in 0..=remaining {
            current[slot] = i;
            rec(slot + 1, remaining - i, current, depth, out);
        }
    }
    rec(0, depth, &mut current, depth.max(1), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn poly_eval_and_partials() {
        // p = 3 x^2 y + 2 y - 1
        let p = Poly::new(
            2,
            vec![
                (vec![2, 1], 3.0),
                (vec![0, 1], 2.0),
                (vec![0, 0], -1.0),
            ],
        )
        .unwrap();
        assert_relative_eq!(p.eval(&[2.0, 0.5]), 3.0 * 4.0 * 0.5 + 1.0 - 1.0);
        let px = p.partial(0);
        assert_relative_eq!(px.eval(&[2.0, 0.5]), 6.0 * 2.0 * 0.5);
        let pxy = px.partial(1);
        assert_relative_eq!(pxy.eval(&[2.0, 0.5]), 6.0 * 2.0);
        assert_eq!(p.partial(0).partial(0).partial(0).terms().len(), 0);
    }

    #[test]
    fn degree_cap_enforced() {
        let r = Poly::new(2, vec![(vec![3, 2], 1.0)]);
        assert!(matches!(r, Err(MetricError::DegreeTooHigh { got: 5, .. })));
    }

    #[test]
    fn duplicate_monomials_merge() {
        let p = Poly::new(1, vec![(vec![1], 2.0), (vec![1], 3.0)]).unwrap();
        assert_eq!(p.terms().len(), 1);
        assert_relative_eq!(p.eval(&[2.0]), 10.0);
    }

    #[test]
    fn metric_field_eval_symmetry_and_derivatives() {
        // g = [[1 + x^2, x y], [x y, 2]]
        let f = MetricField::new(
            2,
            vec![
                (0, 0, Poly::new(2, vec![(vec![0, 0], 1.0), (vec![2, 0], 1.0)]).unwrap()),
                (0, 1, Poly::new(2, vec![(vec![1, 1], 1.0)]).unwrap()),
                (1, 1, Poly::constant(2, 2.0)),
            ],
        )
        .unwrap();
        let x = [0.7, -0.3];
        let g = f.eval(&x);
        assert_relative_eq!(g[(0, 0)], 1.49);
        assert_relative_eq!(g[(0, 1)], g[(1, 0)]);
        let gx = f.eval_partial(0, &x);
        assert_relative_eq!(gx[(0, 0)], 1.4);
        assert_relative_eq!(gx[(0, 1)], -0.3);
        let gxy = f.eval_second(0, 1, &x);
        assert_relative_eq!(gxy[(0, 1)], 1.0);
        assert_relative_eq!(gxy[(0, 0)], 0.0);
    }

    #[test]
    fn spd_validation_flags_indefinite_metric() {
        let complex = SimplicialComplex::build(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![
                crate::complex::VertexId(0),
                crate::complex::VertexId(1),
                crate::complex::VertexId(2),
            ]],
            vec![],
        )
        .unwrap();
        // g_00 = 1 - 3x turns negative inside the triangle.
        let bad = MetricField::new(
            2,
            vec![(
                0,
                0,
                Poly::new(2, vec![(vec![0, 0], 1.0), (vec![1, 0], -3.0)]).unwrap(),
            )],
        )
        .unwrap();
        let m = PiecewiseMetric::new(&complex, vec![bad]).unwrap();
        assert!(matches!(
            m.validate_spd(&complex, 8),
            Err(MetricError::NotSpd { .. })
        ));
        let good = PiecewiseMetric::flat(&complex);
        assert!(good.validate_spd(&complex, 8).is_ok());
    }

    #[test]
    fn barycentric_lattice_sizes() {
        assert_eq!(barycentric_lattice(2, 4).len(), 15);
        for b in barycentric_lattice(2, 4) {
            assert_relative_eq!(b.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}
