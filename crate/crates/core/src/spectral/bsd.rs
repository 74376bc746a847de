//! Local boundary spectral data and its equivalence test.
//!
//! The data of a polyhedron on a boundary set Gamma is the eigenvalue
//! sequence together with the traces of the eigenfunctions on Gamma. Two
//! data sets are equivalent when the eigenvalues agree and, cluster by
//! cluster of near-degenerate eigenvalues, the trace subspaces agree up to
//! an orthogonal change of basis inside the cluster; the change of basis
//! is recovered explicitly as the polar factor of the weighted trace
//! cross-Gram matrix. Comparing subspaces rather than individual traces is
//! what makes the test well defined: inside a degenerate cluster the
//! eigenbasis is only determined up to rotation, and any solver gauge
//! whatsoever must be accepted.

use nalgebra::{DMatrix, DVector};

use crate::complex::{FacetClass, FacetId, SimplicialComplex};
use crate::metric::PiecewiseMetric;

use super::assemble::element_gradient;
use super::eigen::{cluster_ranges, EigenSystem};
use super::mesh::Mesh;
use super::SpectralError;

/// One trace sample point on the boundary.
#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub facet: FacetId,
    /// Affine facet parameter of the sample.
    pub u: f64,
    pub point: Vec<f64>,
    /// L2(Gamma) quadrature weight (metric length share).
    pub weight: f64,
}

/// Eigenvalues plus eigenfunction traces on a boundary set.
#[derive(Clone, Debug)]
pub struct BoundarySpectralData {
    pub eigenvalues: Vec<f64>,
    pub samples: Vec<BoundarySample>,
    /// traces[k][s]: k-th eigenfunction at sample s.
    pub traces: Vec<DVector<f64>>,
}

/// Samples eigenfunction traces on the given boundary facets at roughly
/// the requested pitch (at least two samples per facet, midpoint layout so
/// corners are never sampled).
pub fn extract_bsd(
    complex: &SimplicialComplex,
    metric: &PiecewiseMetric,
    mesh: &Mesh,
    eigen: &EigenSystem,
    boundary: &[FacetId],
    pitch: f64,
) -> Result<BoundarySpectralData, SpectralError> {
    let classes = complex.classify_facets()?;
    let mut samples = Vec::new();
    let mut per_facet: Vec<(FacetId, Vec<(f64, usize)>, usize, usize)> = Vec::new();

    for &f in boundary {
        let cell = match classes[f.0] {
            FacetClass::Boundary { cell } => cell,
            FacetClass::Interface { .. } => return Err(SpectralError::NotBoundary),
        };
        let verts = complex.facet(f)?.vertices().to_vec();
        let a = complex.vertex_coords(verts[0]).to_vec();
        let b = complex.vertex_coords(verts[1]).to_vec();
        let len = crate::metric::segment_length(metric.field(cell), &a, &b);
        let m = ((len / pitch).ceil() as usize).max(2);
        let start = samples.len();
        for i in 0..m {
            let u = (i as f64 + 0.5) / m as f64;
            let point: Vec<f64> = (0..2).map(|d| a[d] + u * (b[d] - a[d])).collect();
            samples.push(BoundarySample {
                facet: f,
                u,
                point,
                weight: len / m as f64,
            });
        }
        let nodes = mesh.nodes_on_facet(complex, f)?;
        per_facet.push((f, nodes, start, m));
    }
    if samples.is_empty() {
        return Err(SpectralError::EmptyBoundary);
    }

    let mut traces = Vec::with_capacity(eigen.len());
    for v in &eigen.eigenvectors {
        let mut tr = DVector::zeros(samples.len());
        for (_, nodes, start, m) in &per_facet {
            for i in 0..*m {
                let u = samples[start + i].u;
                // Piecewise-linear interpolation along the facet nodes.
                let j = match nodes.binary_search_by(|(nu, _)| nu.total_cmp(&u)) {
                    Ok(j) => j.min(nodes.len() - 2),
                    Err(j) => j.saturating_sub(1).min(nodes.len() - 2),
                };
                let (u0, n0) = nodes[j];
                let (u1, n1) = nodes[j + 1];
                let t = ((u - u0) / (u1 - u0)).clamp(0.0, 1.0);
                tr[start + i] = (1.0 - t) * v[n0] + t * v[n1];
            }
        }
        traces.push(tr);
    }

    Ok(BoundarySpectralData {
        eigenvalues: eigen.eigenvalues.clone(),
        samples,
        traces,
    })
}

/// Tolerances and depth of the equivalence test.
#[derive(Clone, Copy, Debug)]
pub struct BsdCompareOptions {
    /// Number of leading modes to compare.
    pub modes: usize,
    /// Relative eigenvalue agreement required.
    pub lambda_tol: f64,
    /// Relative trace-subspace residual allowed per cluster.
    pub trace_tol: f64,
    /// Gap threshold for grouping eigenvalues into clusters.
    pub cluster_tol: f64,
}

impl Default for BsdCompareOptions {
    fn default() -> Self {
        BsdCompareOptions {
            modes: 20,
            lambda_tol: 1e-2,
            trace_tol: 1e-2,
            cluster_tol: 1e-2,
        }
    }
}

/// One compared cluster: mode range, recovered orthogonal basis change,
/// and the relative residual after aligning.
#[derive(Clone, Debug)]
pub struct BsdBlock {
    pub range: std::ops::Range<usize>,
    pub rotation: DMatrix<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct BsdComparison {
    pub equivalent: bool,
    pub modes_compared: usize,
    pub max_eigenvalue_gap: f64,
    pub max_trace_residual: f64,
    pub blocks: Vec<BsdBlock>,
}

/// Tests unitary equivalence of two boundary spectral data sets sampled at
/// corresponding points (same sample count and layout).
pub fn compare_bsd(
    left: &BoundarySpectralData,
    right: &BoundarySpectralData,
    opts: &BsdCompareOptions,
) -> Result<BsdComparison, SpectralError> {
    let s = left.samples.len();
    if s != right.samples.len() {
        return Err(SpectralError::SampleMismatch {
            left: s,
            right: right.samples.len(),
        });
    }
    let available = left.eigenvalues.len().min(right.eigenvalues.len());
    if opts.modes > available {
        return Err(SpectralError::ModeCount {
            requested: opts.modes,
            available,
        });
    }

    // Clusters from the left data, truncated to whole clusters within the
    // requested depth (a split cluster cannot be compared fairly).
    let ranges = cluster_ranges(&left.eigenvalues[..available], opts.cluster_tol);
    let mut max_gap = 0.0f64;
    let mut max_residual = 0.0f64;
    let mut blocks = Vec::new();
    let mut compared = 0;

    let w = DVector::from_iterator(s, left.samples.iter().map(|smp| smp.weight));

    for range in ranges {
        if range.end > opts.modes {
            break;
        }
        for k in range.clone() {
            let gap = (left.eigenvalues[k] - right.eigenvalues[k]).abs()
                / left.eigenvalues[k].abs().max(1.0);
            max_gap = max_gap.max(gap);
        }
        let d = range.len();
        // Weighted cross-Gram and self-Gram of the cluster traces.
        let mut cross = DMatrix::zeros(d, d);
        let mut norm_left = 0.0f64;
        for (a, i) in range.clone().enumerate() {
            for (b, j) in range.clone().enumerate() {
                let mut acc = 0.0;
                for t in 0..s {
                    acc += w[t] * left.traces[i][t] * right.traces[j][t];
                }
                cross[(a, b)] = acc;
            }
            for t in 0..s {
                norm_left += w[t] * left.traces[i][t] * left.traces[i][t];
            }
        }
        // Orthogonal Procrustes: U = (polar factor of cross Gram).
        let svd = cross.clone().svd(true, true);
        let u_mat = svd.u.as_ref().expect("svd with u");
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        let rotation = u_mat * v_t;

        // Residual of left traces against rotated right traces.
        let mut resid = 0.0f64;
        for (a, i) in range.clone().enumerate() {
            for t in 0..s {
                let mut aligned = 0.0;
                for (b, j) in range.clone().enumerate() {
                    aligned += rotation[(a, b)] * right.traces[j][t];
                }
                resid += w[t] * (left.traces[i][t] - aligned).powi(2);
            }
        }
        let residual = (resid / norm_left.max(1e-300)).sqrt();
        max_residual = max_residual.max(residual);
        compared = range.end;
        blocks.push(BsdBlock {
            range,
            rotation,
            residual,
        });
    }

    Ok(BsdComparison {
        equivalent: max_gap <= opts.lambda_tol && max_residual <= opts.trace_tol,
        modes_compared: compared,
        max_eigenvalue_gap: max_gap,
        max_trace_residual: max_residual,
        blocks,
    })
}

/// Immersion margin of the spectral map x -> (phi_1(x), ..., phi_m(x)):
/// the smallest ratio sigma_2/sigma_1 of the per-element gradient stack
/// over all elements, with the element attaining it. A margin bounded away
/// from zero certifies the map is an immersion on the mesh scale.
pub fn eigenmap_rank_margin(
    mesh: &Mesh,
    eigen: &EigenSystem,
    modes: usize,
) -> Result<(f64, usize), SpectralError> {
    let modes = modes.min(eigen.len());
    if modes < 2 {
        return Err(SpectralError::ModeCount {
            requested: 2,
            available: modes,
        });
    }
    let mut min_ratio = f64::INFINITY;
    let mut argmin = 0;
    for e in 0..mesh.elements().len() {
        let mut stack = DMatrix::zeros(modes, 2);
        for k in 0..modes {
            let g = element_gradient(mesh, e, &eigen.eigenvectors[k]);
            stack[(k, 0)] = g[0];
            stack[(k, 1)] = g[1];
        }
        let svd = stack.svd(false, false);
        let s1 = svd.singular_values[0];
        let s2 = svd.singular_values[svd.singular_values.len() - 1];
        let ratio = if s1 > 0.0 { s2 / s1 } else { 0.0 };
        if ratio < min_ratio {
            min_ratio = ratio;
            argmin = e;
        }
    }
    Ok((min_ratio, argmin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::VertexId;
    use crate::spectral::assemble::assemble;
    use crate::spectral::eigen::solve_dense;
    use approx::assert_relative_eq;

    fn vid(v: &[usize]) -> Vec<VertexId> {
        v.iter().map(|&i| VertexId(i)).collect()
    }

    fn square_at(origin: [f64; 2]) -> SimplicialComplex {
        SimplicialComplex::build(
            2,
            vec![
                vec![origin[0], origin[1]],
                vec![origin[0] + 1.0, origin[1]],
                vec![origin[0], origin[1] + 1.0],
                vec![origin[0] + 1.0, origin[1] + 1.0],
            ],
            vec![vid(&[0, 1, 2]), vid(&[1, 3, 2])],
            vec![],
        )
        .unwrap()
    }

    fn boundary_facets(c: &SimplicialComplex) -> Vec<FacetId> {
        let classes = c.classify_facets().unwrap();
        (0..c.facet_count())
            .map(FacetId)
            .filter(|f| matches!(classes[f.0], FacetClass::Boundary { .. }))
            .collect()
    }

    fn bsd_of(c: &SimplicialComplex, k: usize, modes: usize) -> BoundarySpectralData {
        let mesh = Mesh::refine(c, k).unwrap();
        let flat = PiecewiseMetric::flat(c);
        let (kk, mm) = assemble(&mesh, &flat).unwrap();
        let eig = solve_dense(&kk, &mm, modes).unwrap();
        extract_bsd(&c, &flat, &mesh, &eig, &boundary_facets(c), 0.1).unwrap()
    }

    #[test]
    fn translated_square_is_equivalent() {
        // A translate is trivially isometric; the solver gauge of
        // degenerate pairs will differ, which is exactly what the cluster
        // rotation must absorb.
        let a = bsd_of(&square_at([0.0, 0.0]), 12, 8);
        let b = bsd_of(&square_at([3.0, -2.0]), 12, 8);
        let cmp = compare_bsd(
            &a,
            &b,
            &BsdCompareOptions {
                modes: 8,
                lambda_tol: 1e-8,
                trace_tol: 1e-6,
                cluster_tol: 1e-6,
            },
        )
        .unwrap();
        assert!(cmp.equivalent, "gap {:.3e} resid {:.3e}", cmp.max_eigenvalue_gap, cmp.max_trace_residual);
        // Every recovered block map is orthogonal.
        for block in &cmp.blocks {
            let d = block.range.len();
            let q = &block.rotation * block.rotation.transpose();
            for i in 0..d {
                for j in 0..d {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(q[(i, j)], expect, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn different_metric_is_not_equivalent() {
        let c = square_at([0.0, 0.0]);
        let a = bsd_of(&c, 12, 8);

        let mesh = Mesh::refine(&c, 12).unwrap();
        let stretched = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.69]);
        let m2 = PiecewiseMetric::new(
            &c,
            vec![crate::metric::MetricField::constant(2, &stretched); 2],
        )
        .unwrap();
        let (kk, mm) = assemble(&mesh, &m2).unwrap();
        let eig = solve_dense(&kk, &mm, 8).unwrap();
        let b = extract_bsd(&c, &m2, &mesh, &eig, &boundary_facets(&c), 0.1).unwrap();

        // Sample counts differ (facet metric lengths changed), or if equal
        // the eigenvalues must differ; accept either failure mode.
        match compare_bsd(&a, &b, &BsdCompareOptions::default()) {
            Ok(cmp) => assert!(!cmp.equivalent),
            Err(SpectralError::SampleMismatch { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn eigenmap_immerses_the_square() {
        let c = square_at([0.0, 0.0]);
        let mesh = Mesh::refine(&c, 10).unwrap();
        let flat = PiecewiseMetric::flat(&c);
        let (kk, mm) = assemble(&mesh, &flat).unwrap();
        let eig = solve_dense(&kk, &mm, 6).unwrap();
        // cos(pi x), cos(pi y) alone already immerse the open square; the
        // full stack of five nonconstant modes certainly does.
        let (margin, _) = eigenmap_rank_margin(&mesh, &eig, 6).unwrap();
        assert!(margin > 1e-3, "margin {margin:.3e}");
    }

    #[test]
    fn too_few_modes_is_an_error() {
        let c = square_at([0.0, 0.0]);
        let mesh = Mesh::refine(&c, 4).unwrap();
        let flat = PiecewiseMetric::flat(&c);
        let (kk, mm) = assemble(&mesh, &flat).unwrap();
        let eig = solve_dense(&kk, &mm, 3).unwrap();
        let bsd = extract_bsd(&c, &flat, &mesh, &eig, &boundary_facets(&c), 0.25).unwrap();
        assert!(matches!(
            compare_bsd(
                &bsd,
                &bsd,
                &BsdCompareOptions {
                    modes: 10,
                    ..BsdCompareOptions::default()
                }
            ),
            Err(SpectralError::ModeCount { .. })
        ));
    }
}
