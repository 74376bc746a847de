//! Piecewise-smooth metrics: fields, paths, distances, interface charts.

mod chart;
mod distance;
mod field;
pub mod geodesic;

pub use chart::{
    chambers, default_artificial_tol, detect_artificial_interfaces, ArtificialScan, ChartOptions,
    Chambers, InterfaceChart, JumpProfile,
};
pub use distance::{check_admissibility, AdmissibilityReport, DistanceGraph};
pub use field::{
    barycentric_lattice, MetricError, MetricField, PiecewiseMetric, Poly, MAX_METRIC_DEGREE,
    SPD_EIGENVALUE_FLOOR,
};

use crate::complex::{CellId, SimplicialComplex};

/// Barycentric slack used when checking that path nodes lie in their cells.
pub const PATH_INCLUSION_TOL: f64 = 1e-9;

/// One node of a piecewise-straight admissible path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathNode {
    pub cell: CellId,
    pub point: Vec<f64>,
}

/// A piecewise-straight path through the complex. Consecutive nodes either
/// share a cell (a straight segment inside that cell's chart) or name
/// different cells with coinciding points on a shared facet (an interface
/// crossing of zero length).
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissiblePath {
    pub nodes: Vec<PathNode>,
}

impl AdmissiblePath {
    pub fn new(nodes: Vec<PathNode>) -> Self {
        AdmissiblePath { nodes }
    }
}

/// 3-point Gauss-Legendre nodes and weights on [0, 1].
pub(crate) const GAUSS3: [(f64, f64); 3] = [
    (0.11270166537925831, 0.2777777777777778),
    (0.5, 0.4444444444444444),
    (0.8872983346207417, 0.2777777777777778),
];

/// Length of the straight segment from `a` to `b` measured in the metric of
/// one cell, by 3-point Gauss quadrature of sqrt(d^T g d).
pub(crate) fn segment_length(
    metric: &MetricField,
    a: &[f64],
    b: &[f64],
) -> f64 {
    let n = metric.dim();
    let mut acc = 0.0;
    let mut x = vec![0.0; n];
    for &(t, w) in &GAUSS3 {
        for i in 0..n {
            x[i] = a[i] + t * (b[i] - a[i]);
        }
        let g = metric.eval(&x);
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += (b[i] - a[i]) * g[(i, j)] * (b[j] - a[j]);
            }
        }
        acc += w * quad.max(0.0).sqrt();
    }
    acc
}

/// Length of an admissible path under the piecewise metric.
///
/// Fails if a node lies outside its declared cell or a cell switch does not
/// happen at a shared facet point.
pub fn path_length(
    complex: &SimplicialComplex,
    metric: &PiecewiseMetric,
    path: &AdmissiblePath,
) -> Result<f64, MetricError> {
    if path.nodes.len() < 2 {
        return Err(MetricError::PathTooShort);
    }
    for (i, node) in path.nodes.iter().enumerate() {
        let margin = complex.inclusion_margin(node.cell, &node.point);
        if margin < -PATH_INCLUSION_TOL {
            return Err(MetricError::PathLeavesSimplex { index: i, margin });
        }
    }
    let mut total = 0.0;
    for (i, pair) in path.nodes.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if a.cell == b.cell {
            total += segment_length(metric.field(a.cell), &a.point, &b.point);
        } else {
            // Interface crossing: same point, on a facet shared by both cells.
            let same_point = a
                .point
                .iter()
                .zip(&b.point)
                .all(|(x, y)| (x - y).abs() <= 1e-9);
            let shared = complex
                .facets_of_cell(a.cell)?
                .iter()
                .any(|f| complex.facets_of_cell(b.cell).map_or(false, |fb| fb.contains(f)));
            // The crossing point must sit on the shared facet: its
            // barycentric coordinate opposite the facet vanishes.
            let on_facet = complex
                .facets_of_cell(a.cell)?
                .iter()
                .filter(|f| complex.facets_of_cell(b.cell).map_or(false, |fb| fb.contains(f)))
                .any(|&f| {
                    let opp = complex.opposite_vertex(a.cell, f);
                    match opp {
                        Some(v) => {
                            let bary = complex.barycentric(a.cell, &a.point);
                            let idx = complex.cells()[a.cell.0]
                                .vertices()
                                .iter()
                                .position(|&w| w == v)
                                .expect("vertex in own cell");
                            bary[idx].abs() <= 1e-7
                        }
                        None => false,
                    }
                });
            if !(same_point && shared && on_facet) {
                return Err(MetricError::PathCrossingMismatch { index: i, next: i + 1 });
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::VertexId;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

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
    fn straight_segment_in_flat_metric() {
        let c = square();
        let m = PiecewiseMetric::flat(&c);
        let path = AdmissiblePath::new(vec![
            PathNode { cell: CellId(0), point: vec![0.1, 0.1] },
            PathNode { cell: CellId(0), point: vec![0.7, 0.2] },
        ]);
        let expected = (0.6f64.powi(2) + 0.1f64.powi(2)).sqrt();
        assert_relative_eq!(path_length(&c, &m, &path).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn conformal_scaling_doubles_length() {
        let c = square();
        let four = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 4.0]);
        let m = PiecewiseMetric::new(
            &c,
            vec![MetricField::constant(2, &four); 2],
        )
        .unwrap();
        let path = AdmissiblePath::new(vec![
            PathNode { cell: CellId(0), point: vec![0.1, 0.1] },
            PathNode { cell: CellId(0), point: vec![0.7, 0.2] },
        ]);
        let expected = 2.0 * (0.6f64.powi(2) + 0.1f64.powi(2)).sqrt();
        assert_relative_eq!(path_length(&c, &m, &path).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn crossing_contributes_segmentwise() {
        let c = square();
        // Left triangle flat, right triangle scaled by 4 (lengths double).
        let four = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 4.0]);
        let m = PiecewiseMetric::new(
            &c,
            vec![MetricField::identity(2), MetricField::constant(2, &four)],
        )
        .unwrap();
        let mid = vec![0.5, 0.5];
        let path = AdmissiblePath::new(vec![
            PathNode { cell: CellId(0), point: vec![0.25, 0.25] },
            PathNode { cell: CellId(0), point: mid.clone() },
            PathNode { cell: CellId(1), point: mid.clone() },
            PathNode { cell: CellId(1), point: vec![0.75, 0.75] },
        ]);
        let expected = (2.0 * 0.25f64.powi(2)).sqrt() * (1.0 + 2.0);
        assert_relative_eq!(path_length(&c, &m, &path).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn node_outside_cell_rejected() {
        let c = square();
        let m = PiecewiseMetric::flat(&c);
        let path = AdmissiblePath::new(vec![
            PathNode { cell: CellId(0), point: vec![0.9, 0.9] },
            PathNode { cell: CellId(0), point: vec![0.1, 0.1] },
        ]);
        assert!(matches!(
            path_length(&c, &m, &path),
            Err(MetricError::PathLeavesSimplex { index: 0, .. })
        ));
    }

    #[test]
    fn crossing_away_from_facet_rejected() {
        let c = square();
        let m = PiecewiseMetric::flat(&c);
        // Both nodes sit on the shared facet x + y = 1 but at different
        // points, so this is not a valid zero-length crossing.
        let path = AdmissiblePath::new(vec![
            PathNode { cell: CellId(0), point: vec![0.3, 0.7] },
            PathNode { cell: CellId(1), point: vec![0.4, 0.6] },
        ]);
        assert!(matches!(
            path_length(&c, &m, &path),
            Err(MetricError::PathCrossingMismatch { .. })
        ));
    }
}
