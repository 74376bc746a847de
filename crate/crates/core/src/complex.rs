//! Simplicial complexes with per-simplex affine reference charts.
//!
//! Cells (top-dimensional simplices) are glued combinatorially through
//! shared vertex ids. Every vertex carries reference coordinates; the chart
//! of a cell is the affine simplex spanned by its vertices. Charts of
//! different cells may overlap in reference space — nothing ever compares
//! coordinates across cells, so a complex does not need a global embedding.
//! All cross-cell data lives on shared facets, whose reference geometry is
//! identical from both sides.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Index of a vertex in the complex-wide coordinate table.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VertexId(pub usize);

/// Index of an n-simplex (cell) in build order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CellId(pub usize);

/// Index into the sorted facet table of a complex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FacetId(pub usize);

/// A simplex as a strictly increasing list of vertex ids.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Simplex(Vec<VertexId>);

impl Simplex {
    /// Canonicalises a vertex tuple. Rejects repeated vertices.
    pub fn new(mut vertices: Vec<VertexId>) -> Result<Self, ComplexError> {
        if vertices.is_empty() {
            return Err(ComplexError::EmptySimplex);
        }
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(ComplexError::RepeatedVertex {
                simplex: vertices.clone(),
            });
        }
        Ok(Simplex(vertices))
    }

    /// Topological dimension (vertex count minus one).
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    /// All faces of dimension `k` (choose k+1 of the vertices, in
    /// lexicographic order).
    pub fn faces(&self, k: usize) -> Vec<Simplex> {
        assert!(k <= self.dim());
        let mut out = Vec::new();
        let mut pick = vec![0usize; k + 1];
        fn rec(
            verts: &[VertexId],
            pick: &mut Vec<usize>,
            depth: usize,
            start: usize,
            out: &mut Vec<Simplex>,
        ) {
            if depth == pick.len() {
                out.push(Simplex(pick.iter().map(|&i| verts[i]).collect()));
                return;
            }
            for i in start..verts.len() {
                pick[depth] = i;
                rec(verts, pick, depth + 1, i + 1, out);
            }
        }
        rec(&self.0, &mut pick, 0, 0, &mut out);
        out
    }

    /// The facet opposite to `v`, i.e. all vertices except `v`.
    pub fn opposite_facet(&self, v: VertexId) -> Simplex {
        Simplex(self.0.iter().copied().filter(|&w| w != v).collect())
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0.binary_search(&v).is_ok()
    }
}

/// Classification of an (n-1)-simplex by its number of cofaces.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FacetClass {
    /// Exactly one coface: part of the boundary.
    Boundary { cell: CellId },
    /// Exactly two cofaces: a transmission interface. By convention the
    /// side with the smaller cell id is the minus side.
    Interface { minus: CellId, plus: CellId },
}

#[derive(Error, Debug)]
pub enum ComplexError {
    #[error("simplex with no vertices")]
    EmptySimplex,
    #[error("repeated vertex in simplex {simplex:?}")]
    RepeatedVertex { simplex: Vec<VertexId> },
    #[error("vertex {0:?} has no coordinates")]
    UnknownVertex(VertexId),
    #[error("vertex {vertex:?} has {got} coordinates, expected {expected}")]
    CoordinateDimension {
        vertex: VertexId,
        got: usize,
        expected: usize,
    },
    #[error("cell {simplex:?} has {got} vertices, expected {expected} for dimension {dim}")]
    CellArity {
        simplex: Vec<VertexId>,
        got: usize,
        expected: usize,
        dim: usize,
    },
    #[error("duplicate cell {simplex:?}")]
    DuplicateCell { simplex: Vec<VertexId> },
    #[error("cell {cell:?} is affinely degenerate in its reference chart")]
    DegenerateCell { cell: CellId },
    #[error("extra simplex {simplex:?} has dimension {got}, expected below {dim}")]
    ExtraSimplexDimension {
        simplex: Vec<VertexId>,
        got: usize,
        dim: usize,
    },
    #[error("facet {facet:?} has {count} cofaces; a facet must have 1 or 2")]
    NonManifoldFacet { facet: Vec<VertexId>, count: usize },
    #[error("complex has no cells")]
    NoCells,
    #[error("facet index {0:?} out of range")]
    FacetIndex(FacetId),
    #[error("cell index {0:?} out of range")]
    CellIndex(CellId),
    #[error("skeleton dimension {got} exceeds complex dimension {dim}")]
    SkeletonDimension { got: usize, dim: usize },
}

/// Per-cell affine chart data, cached at build time.
#[derive(Clone, Debug)]
struct CellChart {
    /// Columns are v_i - v_0 for i = 1..n.
    jacobian: DMatrix<f64>,
    inv_jacobian: DMatrix<f64>,
    /// |det jacobian| (2 * area for n = 2).
    det_abs: f64,
}

/// A finite n-dimensional simplicial complex with reference coordinates.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    dim: usize,
    /// Flattened coordinates, `dim` entries per vertex.
    coords: Vec<f64>,
    cells: Vec<Simplex>,
    /// Lower-dimensional simplices added explicitly (not forced by closure).
    extras: Vec<Simplex>,
    /// skeleta[k] = all k-simplices present (closure of cells and extras).
    skeleta: Vec<BTreeSet<Simplex>>,
    /// Sorted list of (n-1)-simplices.
    facets: Vec<Simplex>,
    /// Cells incident to each facet, sorted, parallel to `facets`.
    cofaces: Vec<Vec<CellId>>,
    /// Facets of each cell, parallel to `cells`.
    cell_facets: Vec<Vec<FacetId>>,
    charts: Vec<CellChart>,
}

impl SimplicialComplex {
    /// Builds a complex of dimension `dim` from vertex coordinates, cell
    /// vertex tuples and optional explicitly-listed lower simplices.
    ///
    /// `coords[v]` are the reference coordinates of vertex `v`; every cell
    /// tuple must name `dim + 1` distinct vertices spanning a non-degenerate
    /// affine simplex.
    pub fn build(
        dim: usize,
        coords: Vec<Vec<f64>>,
        cell_tuples: Vec<Vec<VertexId>>,
        extra_tuples: Vec<Vec<VertexId>>,
    ) -> Result<Self, ComplexError> {
        if cell_tuples.is_empty() {
            return Err(ComplexError::NoCells);
        }
        for (v, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(ComplexError::CoordinateDimension {
                    vertex: VertexId(v),
                    got: c.len(),
                    expected: dim,
                });
            }
        }
        let nv = coords.len();
        let flat: Vec<f64> = coords.into_iter().flatten().collect();

        let mut cells = Vec::with_capacity(cell_tuples.len());
        let mut seen = BTreeSet::new();
        for tuple in cell_tuples {
            if tuple.len() != dim + 1 {
                return Err(ComplexError::CellArity {
                    got: tuple.len(),
                    expected: dim + 1,
                    dim,
                    simplex: tuple,
                });
            }
            let s = Simplex::new(tuple)?;
            for &v in s.vertices() {
                if v.0 >= nv {
                    return Err(ComplexError::UnknownVertex(v));
                }
            }
            if !seen.insert(s.clone()) {
                return Err(ComplexError::DuplicateCell {
                    simplex: s.vertices().to_vec(),
                });
            }
            cells.push(s);
        }

        let mut extras = Vec::new();
        for tuple in extra_tuples {
            let s = Simplex::new(tuple)?;
            if s.dim() >= dim {
                return Err(ComplexError::ExtraSimplexDimension {
                    got: s.dim(),
                    dim,
                    simplex: s.vertices().to_vec(),
                });
            }
            for &v in s.vertices() {
                if v.0 >= nv {
                    return Err(ComplexError::UnknownVertex(v));
                }
            }
            extras.push(s);
        }

        // Closure: every face of every cell and extra simplex.
        let mut skeleta: Vec<BTreeSet<Simplex>> = vec![BTreeSet::new(); dim + 1];
        for c in &cells {
            for k in 0..=dim {
                for f in c.faces(k) {
                    skeleta[k].insert(f);
                }
            }
        }
        for e in &extras {
            for k in 0..=e.dim() {
                for f in e.faces(k) {
                    skeleta[k].insert(f);
                }
            }
        }

        let facets: Vec<Simplex> = if dim >= 1 {
            skeleta[dim - 1].iter().cloned().collect()
        } else {
            Vec::new()
        };
        let facet_index: BTreeMap<&Simplex, FacetId> = facets
            .iter()
            .enumerate()
            .map(|(i, s)| (s, FacetId(i)))
            .collect();

        let mut cofaces = vec![Vec::new(); facets.len()];
        let mut cell_facets = vec![Vec::new(); cells.len()];
        for (ci, c) in cells.iter().enumerate() {
            for f in c.faces(dim - 1) {
                let fid = facet_index[&f];
                cofaces[fid.0].push(CellId(ci));
                cell_facets[ci].push(fid);
            }
        }

        let mut charts = Vec::with_capacity(cells.len());
        for (ci, c) in cells.iter().enumerate() {
            let verts = c.vertices();
            let base = &flat[verts[0].0 * dim..verts[0].0 * dim + dim];
            let mut jac = DMatrix::zeros(dim, dim);
            for j in 1..=dim {
                let vj = &flat[verts[j].0 * dim..verts[j].0 * dim + dim];
                for i in 0..dim {
                    jac[(i, j - 1)] = vj[i] - base[i];
                }
            }
            let det = jac.clone().determinant();
            // Relative non-degeneracy: compare against the edge scale.
            let scale = jac.amax().max(1e-300);
            if det.abs() <= 1e-12 * scale.powi(dim as i32) {
                return Err(ComplexError::DegenerateCell { cell: CellId(ci) });
            }
            let inv = jac
                .clone()
                .try_inverse()
                .ok_or(ComplexError::DegenerateCell { cell: CellId(ci) })?;
            charts.push(CellChart {
                jacobian: jac,
                inv_jacobian: inv,
                det_abs: det.abs(),
            });
        }

        Ok(SimplicialComplex {
            dim,
            coords: flat,
            cells,
            extras,
            skeleta,
            facets,
            cofaces,
            cell_facets,
            charts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.dim.max(1)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Simplex] {
        &self.cells
    }

    pub fn cell(&self, c: CellId) -> Result<&Simplex, ComplexError> {
        self.cells.get(c.0).ok_or(ComplexError::CellIndex(c))
    }

    pub fn vertex_coords(&self, v: VertexId) -> &[f64] {
        &self.coords[v.0 * self.dim..v.0 * self.dim + self.dim]
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn facet(&self, f: FacetId) -> Result<&Simplex, ComplexError> {
        self.facets.get(f.0).ok_or(ComplexError::FacetIndex(f))
    }

    pub fn facet_id(&self, s: &Simplex) -> Option<FacetId> {
        self.facets
            .binary_search(s)
            .ok()
            .map(FacetId)
    }

    /// Facets of a cell (n+1 of them), in face enumeration order.
    pub fn facets_of_cell(&self, c: CellId) -> Result<&[FacetId], ComplexError> {
        self.cell_facets
            .get(c.0)
            .map(|v| v.as_slice())
            .ok_or(ComplexError::CellIndex(c))
    }

    /// Cells incident to a facet (sorted by id).
    pub fn cofaces(&self, f: FacetId) -> Result<&[CellId], ComplexError> {
        self.cofaces
            .get(f.0)
            .map(|v| v.as_slice())
            .ok_or(ComplexError::FacetIndex(f))
    }

    /// Classifies every facet as boundary (one coface) or interface (two).
    ///
    /// Fails on dangling facets (no coface; only possible through explicit
    /// extra simplices) and on non-manifold gluings (three or more cofaces).
    pub fn classify_facets(&self) -> Result<Vec<FacetClass>, ComplexError> {
        self.facets
            .iter()
            .zip(&self.cofaces)
            .map(|(s, cof)| match cof.as_slice() {
                [c] => Ok(FacetClass::Boundary { cell: *c }),
                [a, b] => Ok(FacetClass::Interface { minus: *a, plus: *b }),
                other => Err(ComplexError::NonManifoldFacet {
                    facet: s.vertices().to_vec(),
                    count: other.len(),
                }),
            })
            .collect()
    }

    /// Checks that every simplex of the complex is a face of some cell.
    ///
    /// Returns the offending simplices (smallest first) if not; an empty
    /// result means the complex is dimensionally homogeneous.
    pub fn dimensional_homogeneity_defects(&self) -> Vec<Simplex> {
        let mut covered: Vec<BTreeSet<&Simplex>> = vec![BTreeSet::new(); self.dim + 1];
        let mut faces_store: Vec<Simplex> = Vec::new();
        for c in &self.cells {
            for k in 0..=self.dim {
                for f in c.faces(k) {
                    faces_store.push(f);
                }
            }
        }
        for f in &faces_store {
            covered[f.dim()].insert(f);
        }
        let mut defects = Vec::new();
        for k in 0..self.dim {
            for s in &self.skeleta[k] {
                if !covered[k].contains(s) {
                    defects.push(s.clone());
                }
            }
        }
        defects
    }

    /// True iff every simplex is a face of a cell.
    pub fn is_dimensionally_homogeneous(&self) -> bool {
        self.dimensional_homogeneity_defects().is_empty()
    }

    /// Dual adjacency: pairs of cells joined by a shared facet.
    ///
    /// Ignores facets with more than two cofaces (classification reports
    /// those separately).
    pub fn dual_edges(&self) -> Vec<(CellId, CellId, FacetId)> {
        let mut out = Vec::new();
        for (fi, cof) in self.cofaces.iter().enumerate() {
            if let [a, b] = cof.as_slice() {
                out.push((*a, *b, FacetId(fi)));
            }
        }
        out
    }

    /// True iff the dual graph (cells joined through shared facets) is
    /// connected. A single-cell complex is chainable.
    pub fn is_chainable(&self) -> bool {
        self.chain_components().len() <= 1
    }

    /// Connected components of the dual graph, each a sorted list of cells.
    pub fn chain_components(&self) -> Vec<Vec<CellId>> {
        let nc = self.cells.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nc];
        for (a, b, _) in self.dual_edges() {
            adj[a.0].push(b.0);
            adj[b.0].push(a.0);
        }
        let mut seen = vec![false; nc];
        let mut comps = Vec::new();
        for start in 0..nc {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(c) = stack.pop() {
                comp.push(CellId(c));
                for &nb in &adj[c] {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
            comp.sort();
            comps.push(comp);
        }
        comps
    }

    /// All k-simplices of the complex, sorted.
    pub fn skeleton(&self, k: usize) -> Result<Vec<Simplex>, ComplexError> {
        if k > self.dim {
            return Err(ComplexError::SkeletonDimension {
                got: k,
                dim: self.dim,
            });
        }
        Ok(self.skeleta[k].iter().cloned().collect())
    }

    // ---- reference chart geometry ----

    /// Coordinates of the corners of a cell, one column per vertex.
    pub fn corner_matrix(&self, c: CellId) -> DMatrix<f64> {
        let verts = self.cells[c.0].vertices();
        let mut m = DMatrix::zeros(self.dim, verts.len());
        for (j, &v) in verts.iter().enumerate() {
            for i in 0..self.dim {
                m[(i, j)] = self.vertex_coords(v)[i];
            }
        }
        m
    }

    /// Barycentric coordinates of `x` with respect to cell `c`.
    pub fn barycentric(&self, c: CellId, x: &[f64]) -> DVector<f64> {
        let chart = &self.charts[c.0];
        let verts = self.cells[c.0].vertices();
        let base = self.vertex_coords(verts[0]);
        let rel = DVector::from_iterator(self.dim, (0..self.dim).map(|i| x[i] - base[i]));
        let lam = &chart.inv_jacobian * rel;
        let mut bary = DVector::zeros(self.dim + 1);
        let mut rest = 1.0;
        for i in 0..self.dim {
            bary[i + 1] = lam[i];
            rest -= lam[i];
        }
        bary[0] = rest;
        bary
    }

    /// Point with the given barycentric coordinates in cell `c`.
    pub fn from_barycentric(&self, c: CellId, bary: &[f64]) -> Vec<f64> {
        let verts = self.cells[c.0].vertices();
        let mut out = vec![0.0; self.dim];
        for (j, &v) in verts.iter().enumerate() {
            let vc = self.vertex_coords(v);
            for i in 0..self.dim {
                out[i] += bary[j] * vc[i];
            }
        }
        out
    }

    /// True iff `x` lies in the closed cell, up to a barycentric slack.
    pub fn cell_contains(&self, c: CellId, x: &[f64], tol: f64) -> bool {
        self.barycentric(c, x).iter().all(|&b| b >= -tol)
    }

    /// |det| of the affine chart map of `c` (n! times the reference volume).
    pub fn chart_det_abs(&self, c: CellId) -> f64 {
        self.charts[c.0].det_abs
    }

    pub fn chart_jacobian(&self, c: CellId) -> &DMatrix<f64> {
        &self.charts[c.0].jacobian
    }

    /// Reference-space midpoint of a facet.
    pub fn facet_midpoint(&self, f: FacetId) -> Vec<f64> {
        let verts = self.facets[f.0].vertices();
        let mut out = vec![0.0; self.dim];
        for &v in verts {
            let vc = self.vertex_coords(v);
            for i in 0..self.dim {
                out[i] += vc[i] / verts.len() as f64;
            }
        }
        out
    }

    /// The vertex of cell `c` not contained in facet `f`.
    pub fn opposite_vertex(&self, c: CellId, f: FacetId) -> Option<VertexId> {
        let fs = &self.facets[f.0];
        self.cells[c.0]
            .vertices()
            .iter()
            .copied()
            .find(|&v| !fs.contains(v))
    }

    /// Point on facet `f` at affine parameters `u` over its canonical
    /// (sorted-vertex) parameterisation. For n = 2 a facet is a segment and
    /// `u = [t]` gives `a + t (b - a)`.
    pub fn facet_point(&self, f: FacetId, u: &[f64]) -> Vec<f64> {
        let verts = self.facets[f.0].vertices();
        let a = self.vertex_coords(verts[0]);
        let mut out = a.to_vec();
        for (j, &v) in verts.iter().enumerate().skip(1) {
            let vc = self.vertex_coords(v);
            for i in 0..self.dim {
                out[i] += u[j - 1] * (vc[i] - a[i]);
            }
        }
        out
    }

    /// Tangent vectors of facet `f` in its canonical parameterisation,
    /// one column per parameter (for n = 2: the single vector b - a).
    pub fn facet_tangents(&self, f: FacetId) -> DMatrix<f64> {
        let verts = self.facets[f.0].vertices();
        let a = self.vertex_coords(verts[0]);
        let mut m = DMatrix::zeros(self.dim, verts.len() - 1);
        for (j, &v) in verts.iter().enumerate().skip(1) {
            let vc = self.vertex_coords(v);
            for i in 0..self.dim {
                m[(i, j - 1)] = vc[i] - a[i];
            }
        }
        m
    }

    /// Euclidean reference normal of facet `f` pointing into cell `c`
    /// (unnormalised direction; n = 2 only uses its orientation).
    pub fn inward_reference_normal(&self, c: CellId, f: FacetId) -> DVector<f64> {
        let t = self.facet_tangents(f);
        // Orthogonal complement of the facet tangents via QR of [tangents].
        let mut normal = DVector::zeros(self.dim);
        if self.dim == 2 {
            normal[0] = -t[(1, 0)];
            normal[1] = t[(0, 0)];
        } else {
            // General fallback: project the chart's opposite-vertex direction
            // off the tangent span.
            let svd = t.clone().svd(true, false);
            let u = svd.u.as_ref().expect("svd with u");
            let mid = self.facet_midpoint(f);
            let opp = self.opposite_vertex(c, f).expect("opposite vertex");
            let oc = self.vertex_coords(opp);
            let mut d = DVector::from_iterator(self.dim, (0..self.dim).map(|i| oc[i] - mid[i]));
            for j in 0..t.ncols() {
                let col = u.column(j);
                let proj = col.dot(&d);
                d -= proj * DVector::from_column_slice(col.as_slice());
            }
            return d;
        }
        let mid = self.facet_midpoint(f);
        let opp = self.opposite_vertex(c, f).expect("opposite vertex");
        let oc = self.vertex_coords(opp);
        let toward: f64 = (0..self.dim).map(|i| (oc[i] - mid[i]) * normal[i]).sum();
        if toward < 0.0 {
            normal = -normal;
        }
        normal
    }

    /// Minimal barycentric coordinate of `x` in `c` (negative outside).
    pub fn inclusion_margin(&self, c: CellId, x: &[f64]) -> f64 {
        self.barycentric(c, x)
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vid(v: &[usize]) -> Vec<VertexId> {
        v.iter().map(|&i| VertexId(i)).collect()
    }

    /// Unit square split along the diagonal.
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
    fn square_classification() {
        let c = square();
        let classes = c.classify_facets().unwrap();
        let mut boundary = 0;
        let mut interface = 0;
        for cl in &classes {
            match cl {
                FacetClass::Boundary { .. } => boundary += 1,
                FacetClass::Interface { minus, plus } => {
                    interface += 1;
                    assert!(minus < plus);
                }
            }
        }
        assert_eq!(boundary, 4);
        assert_eq!(interface, 1);
        let diag = c
            .facet_id(&Simplex::new(vid(&[1, 2])).unwrap())
            .expect("diagonal present");
        assert!(matches!(
            classes[diag.0],
            FacetClass::Interface {
                minus: CellId(0),
                plus: CellId(1)
            }
        ));
    }

    #[test]
    fn non_manifold_gluing_rejected_at_classification() {
        let c = SimplicialComplex::build(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
                vec![-1.0, 1.0],
            ],
            vec![vid(&[0, 1, 2]), vid(&[1, 3, 2]), vid(&[1, 2, 4])],
            vec![],
        )
        .unwrap();
        match c.classify_facets() {
            Err(ComplexError::NonManifoldFacet { facet, count }) => {
                assert_eq!(facet, vid(&[1, 2]));
                assert_eq!(count, 3);
            }
            other => panic!("expected non-manifold error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_breaks_homogeneity() {
        let c = SimplicialComplex::build(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![2.0, 0.0],
            ],
            vec![vid(&[0, 1, 2])],
            vec![vid(&[1, 3])],
        )
        .unwrap();
        assert!(!c.is_dimensionally_homogeneous());
        let defects = c.dimensional_homogeneity_defects();
        assert!(defects.contains(&Simplex::new(vid(&[1, 3])).unwrap()));
        // The dangling vertex 3 is also uncovered.
        assert!(defects.contains(&Simplex::new(vid(&[3])).unwrap()));
        // Chainability only sees cells, so a single cell is still chainable.
        assert!(c.is_chainable());
    }

    #[test]
    fn vertex_glued_pair_is_not_chainable() {
        let c = SimplicialComplex::build(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
            ],
            vec![vid(&[0, 1, 2]), vid(&[0, 3, 4])],
            vec![],
        )
        .unwrap();
        assert!(c.is_dimensionally_homogeneous());
        assert!(!c.is_chainable());
        assert_eq!(c.chain_components().len(), 2);
    }

    #[test]
    fn duplicate_cell_rejected() {
        let r = SimplicialComplex::build(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vid(&[0, 1, 2]), vid(&[2, 0, 1])],
            vec![],
        );
        assert!(matches!(r, Err(ComplexError::DuplicateCell { .. })));
    }

    #[test]
    fn degenerate_cell_rejected() {
        let r = SimplicialComplex::build(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![vid(&[0, 1, 2])],
            vec![],
        );
        assert!(matches!(r, Err(ComplexError::DegenerateCell { .. })));
    }

    #[test]
    fn skeleton_counts_for_square() {
        let c = square();
        assert_eq!(c.skeleton(0).unwrap().len(), 4);
        assert_eq!(c.skeleton(1).unwrap().len(), 5);
        assert_eq!(c.skeleton(2).unwrap().len(), 2);
        assert!(c.skeleton(3).is_err());
    }

    #[test]
    fn barycentric_round_trip() {
        let c = square();
        let x = [0.3, 0.2];
        let b = c.barycentric(CellId(0), &x);
        assert!((b.sum() - 1.0).abs() < 1e-12);
        let y = c.from_barycentric(CellId(0), b.as_slice());
        assert!((y[0] - x[0]).abs() < 1e-12 && (y[1] - x[1]).abs() < 1e-12);
        assert!(c.cell_contains(CellId(0), &x, 1e-12));
        assert!(!c.cell_contains(CellId(0), &[0.9, 0.9], 1e-12));
    }

    #[test]
    fn inward_normals_point_inward() {
        let c = square();
        for cell in [CellId(0), CellId(1)] {
            for &f in c.facets_of_cell(cell).unwrap() {
                let n = c.inward_reference_normal(cell, f);
                let mid = c.facet_midpoint(f);
                let opp = c.opposite_vertex(cell, f).unwrap();
                let oc = c.vertex_coords(opp);
                let dot: f64 = (0..2).map(|i| (oc[i] - mid[i]) * n[i]).sum();
                assert!(dot > 0.0);
            }
        }
    }

    #[test]
    fn overlapping_charts_are_allowed() {
        // Tetrahedron boundary drawn in the plane: four triangles on four
        // vertices, every edge shared by exactly two. Charts overlap in
        // reference space, which is legal.
        let c = SimplicialComplex::build(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.4, 0.3],
            ],
            vec![
                vid(&[0, 1, 2]),
                vid(&[0, 1, 3]),
                vid(&[0, 2, 3]),
                vid(&[1, 2, 3]),
            ],
            vec![],
        )
        .unwrap();
        let classes = c.classify_facets().unwrap();
        assert!(classes
            .iter()
            .all(|cl| matches!(cl, FacetClass::Interface { .. })));
        assert!(c.is_chainable());
        assert!(c.is_dimensionally_homogeneous());
    }
}
