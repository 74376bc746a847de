//! P1 assembly of the transmission Laplacian.
//!
//! Stiffness and mass are the standard Riemannian Dirichlet and L2 forms,
//!
//!    K_ij = int grad(u_i)^T g^{-1} grad(u_j) sqrt(det g),
//!    M_ij = int u_i u_j sqrt(det g),
//!
//! integrated element by element in reference coordinates with the metric
//! of the element's parent cell. Nothing special happens at interfaces:
//! conformity of the mesh enforces continuity of u, and flux continuity is
//! the natural condition of the form. Eigenvectors of K v = lambda M v are
//! Neumann modes of the polyhedron.

use nalgebra::DVector;

use crate::metric::PiecewiseMetric;

use super::mesh::Mesh;
use super::sparse::CsrMatrix;
use super::SpectralError;

/// Degree-5 triangle rule: (barycentric coordinates, weight), weights
/// summing to one.
const TRI_QUADRATURE: [([f64; 3], f64); 7] = [
    (
        [
            0.333333333333333333,
            0.333333333333333333,
            0.333333333333333333,
        ],
        0.225,
    ),
    (
        [
            0.059715871789769820,
            0.470142064105115090,
            0.470142064105115090,
        ],
        0.132394152788506181,
    ),
    (
        [
            0.470142064105115090,
            0.059715871789769820,
            0.470142064105115090,
        ],
        0.132394152788506181,
    ),
    (
        [
            0.470142064105115090,
            0.470142064105115090,
            0.059715871789769820,
        ],
        0.132394152788506181,
    ),
    (
        [
            0.797426985353087320,
            0.101286507323456340,
            0.101286507323456340,
        ],
        0.125939180544827153,
    ),
    (
        [
            0.101286507323456340,
            0.797426985353087320,
            0.101286507323456340,
        ],
        0.125939180544827153,
    ),
    (
        [
            0.101286507323456340,
            0.101286507323456340,
            0.797426985353087320,
        ],
        0.125939180544827153,
    ),
];

/// Assembles (K, M) for the mesh under the piecewise metric.
pub fn assemble(
    mesh: &Mesh,
    metric: &PiecewiseMetric,
) -> Result<(CsrMatrix, CsrMatrix), SpectralError> {
    let n = mesh.node_count();
    let mut kt = Vec::with_capacity(9 * mesh.elements().len());
    let mut mt = Vec::with_capacity(9 * mesh.elements().len());

    for el in mesh.elements() {
        let field = metric.field(el.cell);
        let p: Vec<&[f64]> = el.nodes.iter().map(|&i| mesh.node(i)).collect();
        let d1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
        let d2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
        let det = d1[0] * d2[1] - d1[1] * d2[0];
        if det <= 0.0 {
            return Err(SpectralError::DegenerateElement);
        }
        let area = 0.5 * det;

        // Constant P1 gradients: grad(lambda_i) = J^{-T} grad_ref.
        let inv_det = 1.0 / det;
        let grads = [
            [
                (-d2[1] + d1[1]) * inv_det,
                (d2[0] - d1[0]) * inv_det,
            ],
            [d2[1] * inv_det, -d2[0] * inv_det],
            [-d1[1] * inv_det, d1[0] * inv_det],
        ];

        let mut ke = [[0.0f64; 3]; 3];
        let mut me = [[0.0f64; 3]; 3];
        for (bary, w) in TRI_QUADRATURE {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let g = field.eval(&x);
            let detg = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
            if detg <= 0.0 {
                return Err(SpectralError::DegenerateElement);
            }
            let vol = detg.sqrt();
            let ginv = [
                [g[(1, 1)] / detg, -g[(0, 1)] / detg],
                [-g[(1, 0)] / detg, g[(0, 0)] / detg],
            ];
            for i in 0..3 {
                for j in 0..3 {
                    let mut quad = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            quad += grads[i][a] * ginv[a][b] * grads[j][b];
                        }
                    }
                    ke[i][j] += w * area * vol * quad;
                    me[i][j] += w * area * vol * bary[i] * bary[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                kt.push((el.nodes[i], el.nodes[j], ke[i][j]));
                mt.push((el.nodes[i], el.nodes[j], me[i][j]));
            }
        }
    }
    Ok((
        CsrMatrix::from_triplets(n, kt),
        CsrMatrix::from_triplets(n, mt),
    ))
}

/// Riemannian volume of the mesh (sum of the mass matrix).
pub fn total_volume(m: &CsrMatrix) -> f64 {
    let ones = DVector::from_element(m.dim(), 1.0);
    ones.dot(&m.matvec(&ones))
}

/// Conormal flux mismatch of a P1 field across interface edges: the mean
/// (reference-length weighted) jump of sqrt(det g) n^T g^{-1} grad(u),
/// the quantity the transmission problem conserves. First-order elements
/// cannot make this vanish; it must shrink under refinement.
pub fn transmission_residual(
    mesh: &Mesh,
    metric: &PiecewiseMetric,
    u: &DVector<f64>,
) -> f64 {
    let mut total = 0.0;
    let mut length = 0.0;
    for edge in mesh.interface_edges() {
        let a = mesh.node(edge.nodes[0]);
        let b = mesh.node(edge.nodes[1]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        // Euclidean unit normal of the edge (sign fixed below per side).
        let nx = (b[1] - a[1]) / len;
        let ny = -(b[0] - a[0]) / len;

        let mut flux = [0.0f64; 2];
        for (slot, &ei) in [edge.minus_element, edge.plus_element].iter().enumerate() {
            let el = mesh.elements()[ei];
            let field = metric.field(el.cell);
            let p: Vec<&[f64]> = el.nodes.iter().map(|&i| mesh.node(i)).collect();
            let d1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
            let d2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
            let det = d1[0] * d2[1] - d1[1] * d2[0];
            let inv_det = 1.0 / det;
            let grads = [
                [(-d2[1] + d1[1]) * inv_det, (d2[0] - d1[0]) * inv_det],
                [d2[1] * inv_det, -d2[0] * inv_det],
                [-d1[1] * inv_det, d1[0] * inv_det],
            ];
            let mut du = [0.0f64; 2];
            for i in 0..3 {
                du[0] += u[el.nodes[i]] * grads[i][0];
                du[1] += u[el.nodes[i]] * grads[i][1];
            }
            let g = field.eval(&mid);
            let detg = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
            let vol = detg.sqrt();
            let ginv = [
                [g[(1, 1)] / detg, -g[(0, 1)] / detg],
                [-g[(1, 0)] / detg, g[(0, 0)] / detg],
            ];
            let q = [
                ginv[0][0] * du[0] + ginv[0][1] * du[1],
                ginv[1][0] * du[0] + ginv[1][1] * du[1],
            ];
            flux[slot] = vol * (q[0] * nx + q[1] * ny);
        }
        total += len * (flux[0] - flux[1]).abs();
        length += len;
    }
    if length > 0.0 {
        total / length
    } else {
        0.0
    }
}

/// Gradient of a P1 field on one element, in reference coordinates.
pub fn element_gradient(mesh: &Mesh, element: usize, u: &DVector<f64>) -> [f64; 2] {
    let el = mesh.elements()[element];
    let p: Vec<&[f64]> = el.nodes.iter().map(|&i| mesh.node(i)).collect();
    let d1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
    let d2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
    let det = d1[0] * d2[1] - d1[1] * d2[0];
    let inv_det = 1.0 / det;
    let grads = [
        [(-d2[1] + d1[1]) * inv_det, (d2[0] - d1[0]) * inv_det],
        [d2[1] * inv_det, -d2[0] * inv_det],
        [-d1[1] * inv_det, d1[0] * inv_det],
    ];
    let mut du = [0.0f64; 2];
    for i in 0..3 {
        du[0] += u[el.nodes[i]] * grads[i][0];
        du[1] += u[el.nodes[i]] * grads[i][1];
    }
    du
}

/// Evaluates a P1 field at a point of a given element.
pub fn element_value(mesh: &Mesh, element: usize, u: &DVector<f64>, x: &[f64]) -> f64 {
    let el = mesh.elements()[element];
    let p: Vec<&[f64]> = el.nodes.iter().map(|&i| mesh.node(i)).collect();
    let d1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
    let d2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
    let det = d1[0] * d2[1] - d1[1] * d2[0];
    let rx = [x[0] - p[0][0], x[1] - p[0][1]];
    let l1 = (rx[0] * d2[1] - rx[1] * d2[0]) / det;
    let l2 = (d1[0] * rx[1] - d1[1] * rx[0]) / det;
    let l0 = 1.0 - l1 - l2;
    l0 * u[el.nodes[0]] + l1 * u[el.nodes[1]] + l2 * u[el.nodes[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{SimplicialComplex, VertexId};
    use crate::spectral::mesh::Mesh;
    use approx::assert_relative_eq;

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

    #[test]
    fn mass_sums_to_riemannian_volume() {
        let c = square();
        let mesh = Mesh::refine(&c, 6).unwrap();
        let flat = PiecewiseMetric::flat(&c);
        let (_, m) = assemble(&mesh, &flat).unwrap();
        assert_relative_eq!(total_volume(&m), 1.0, epsilon = 1e-12);

        // Scaling the metric by 4 scales areas by det^(1/2) = 4.
        let four = nalgebra::DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 4.0]);
        let scaled = PiecewiseMetric::new(
            &c,
            vec![crate::metric::MetricField::constant(2, &four); 2],
        )
        .unwrap();
        let (_, m4) = assemble(&mesh, &scaled).unwrap();
        assert_relative_eq!(total_volume(&m4), 4.0, epsilon = 1e-11);
    }

    #[test]
    fn stiffness_annihilates_constants_and_matches_dirichlet_energy() {
        let c = square();
        let mesh = Mesh::refine(&c, 8).unwrap();
        let flat = PiecewiseMetric::flat(&c);
        let (k, _) = assemble(&mesh, &flat).unwrap();
        let ones = nalgebra::DVector::from_element(mesh.node_count(), 1.0);
        assert!(k.matvec(&ones).norm() < 1e-12);

        // u = x is in the P1 space; energy = int |grad u|^2 = 1.
        let u = mesh.interpolate(|_, x| x[0]);
        assert_relative_eq!(u.dot(&k.matvec(&u)), 1.0, epsilon = 1e-12);

        // u = x + 2y: energy 5.
        let u2 = mesh.interpolate(|_, x| x[0] + 2.0 * x[1]);
        assert_relative_eq!(u2.dot(&k.matvec(&u2)), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_flux_is_continuous_across_interface() {
        let c = square();
        let mesh = Mesh::refine(&c, 4).unwrap();
        let flat = PiecewiseMetric::flat(&c);
        // Linear fields have constant gradient: exact flux continuity.
        let u = mesh.interpolate(|_, x| 3.0 * x[0] - 2.0 * x[1]);
        assert!(transmission_residual(&mesh, &flat, &u) < 1e-13);
    }
}
