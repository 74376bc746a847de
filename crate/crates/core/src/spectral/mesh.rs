//! Conforming P1 triangulations of a 2-dimensional complex.
//!
//! Every cell is subdivided into k^2 congruent sub-triangles on the
//! barycentric integer lattice. Nodes are keyed by their exact rational
//! barycentric weights over *global* vertex ids, so a node on a shared
//! facet gets the same key from both incident cells and the triangulation
//! is conforming across interfaces by construction, with no coordinate
//! comparisons involved.

use std::collections::HashMap;

use crate::complex::{CellId, FacetClass, FacetId, SimplicialComplex};
use crate::metric::PiecewiseMetric;

use super::SpectralError;

/// One sub-triangle, tied to the cell whose metric it integrates.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub cell: CellId,
    pub nodes: [usize; 3],
}

/// A mesh edge lying on a boundary facet.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    pub facet: FacetId,
    pub cell: CellId,
    pub nodes: [usize; 2],
}

/// A mesh edge on an interface facet, with the elements on both sides.
#[derive(Clone, Copy, Debug)]
pub struct InterfaceEdge {
    pub facet: FacetId,
    pub nodes: [usize; 2],
    pub minus_element: usize,
    pub plus_element: usize,
}

/// Conforming piecewise-linear mesh over a complex.
pub struct Mesh {
    subdivision: usize,
    coords: Vec<f64>,
    node_keys: Vec<Vec<(usize, u32)>>,
    node_cell: Vec<CellId>,
    elements: Vec<Element>,
    boundary_edges: Vec<BoundaryEdge>,
    interface_edges: Vec<InterfaceEdge>,
}

impl Mesh {
    /// Uniform k-fold refinement of every cell.
    pub fn refine(complex: &SimplicialComplex, k: usize) -> Result<Mesh, SpectralError> {
        if complex.dim() != 2 {
            return Err(SpectralError::UnsupportedDimension { got: complex.dim() });
        }
        if k == 0 {
            return Err(SpectralError::ZeroSubdivision);
        }
        let classes = complex.classify_facets()?;
        let ku = k as u32;

        let mut key_to_id: HashMap<Vec<(usize, u32)>, usize> = HashMap::new();
        let mut coords: Vec<f64> = Vec::new();
        let mut node_keys: Vec<Vec<(usize, u32)>> = Vec::new();
        let mut node_cell: Vec<CellId> = Vec::new();
        let mut elements: Vec<Element> = Vec::new();

        for (ci, cell) in complex.cells().iter().enumerate() {
            let c = CellId(ci);
            let verts = cell.vertices();
            let mut local: HashMap<(u32, u32), usize> = HashMap::new();
            for j in 0..=ku {
                for i in 0..=(ku - j) {
                    let w0 = ku - i - j;
                    let key: Vec<(usize, u32)> = [(verts[0].0, w0), (verts[1].0, i), (verts[2].0, j)]
                        .into_iter()
                        .filter(|&(_, w)| w > 0)
                        .collect();
                    let id = *key_to_id.entry(key.clone()).or_insert_with(|| {
                        let bary = [w0, i, j].map(|w| w as f64 / k as f64);
                        let p = complex.from_barycentric(c, &bary);
                        coords.extend_from_slice(&p);
                        node_keys.push(key);
                        node_cell.push(c);
                        node_keys.len() - 1
                    });
                    local.insert((i, j), id);
                }
            }
            let mut push = |a: (u32, u32), b: (u32, u32), d: (u32, u32)| {
                let mut nodes = [local[&a], local[&b], local[&d]];
                let p0 = &coords[2 * nodes[0]..2 * nodes[0] + 2];
                let p1 = &coords[2 * nodes[1]..2 * nodes[1] + 2];
                let p2 = &coords[2 * nodes[2]..2 * nodes[2] + 2];
                let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
                if det < 0.0 {
                    nodes.swap(1, 2);
                }
                elements.push(Element { cell: c, nodes });
            };
            for j in 0..ku {
                for i in 0..(ku - j) {
                    push((i, j), (i + 1, j), (i, j + 1));
                    if i + j + 1 < ku {
                        push((i + 1, j), (i + 1, j + 1), (i, j + 1));
                    }
                }
            }
        }

        // Classify mesh edges by how many elements share them.
        let mut edge_elems: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ei, el) in elements.iter().enumerate() {
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                let (x, y) = (el.nodes[a], el.nodes[b]);
                let key = (x.min(y), x.max(y));
                edge_elems.entry(key).or_default().push(ei);
            }
        }

        let support_in_facet = |node: usize, fverts: &[usize]| -> bool {
            node_keys[node].iter().all(|(v, _)| fverts.contains(v))
        };

        let mut boundary_edges = Vec::new();
        let mut interface_edges = Vec::new();
        let mut sorted_edges: Vec<(&(usize, usize), &Vec<usize>)> = edge_elems.iter().collect();
        sorted_edges.sort_unstable_by_key(|(key, _)| **key);
        for (&(a, b), elems) in sorted_edges {
            match elems.as_slice() {
                [single] => {
                    let cell = elements[*single].cell;
                    let mut parent = None;
                    for &f in complex.facets_of_cell(cell)? {
                        let fverts: Vec<usize> =
                            complex.facet(f)?.vertices().iter().map(|v| v.0).collect();
                        if support_in_facet(a, &fverts) && support_in_facet(b, &fverts) {
                            parent = Some(f);
                            break;
                        }
                    }
                    let facet = parent.ok_or(SpectralError::DanglingMeshEdge)?;
                    match classes[facet.0] {
                        FacetClass::Boundary { .. } => boundary_edges.push(BoundaryEdge {
                            facet,
                            cell,
                            nodes: [a, b],
                        }),
                        FacetClass::Interface { .. } => {
                            return Err(SpectralError::DanglingMeshEdge)
                        }
                    }
                }
                [e1, e2] => {
                    let (c1, c2) = (elements[*e1].cell, elements[*e2].cell);
                    if c1 == c2 {
                        continue;
                    }
                    let shared = complex
                        .facets_of_cell(c1)?
                        .iter()
                        .copied()
                        .find(|f| complex.facets_of_cell(c2).map_or(false, |fs| fs.contains(f)))
                        .ok_or(SpectralError::DanglingMeshEdge)?;
                    let (minus_element, plus_element) = match classes[shared.0] {
                        FacetClass::Interface { minus, .. } if minus == c1 => (*e1, *e2),
                        FacetClass::Interface { .. } => (*e2, *e1),
                        FacetClass::Boundary { .. } => {
                            return Err(SpectralError::DanglingMeshEdge)
                        }
                    };
                    interface_edges.push(InterfaceEdge {
                        facet: shared,
                        nodes: [a, b],
                        minus_element,
                        plus_element,
                    });
                }
                _ => return Err(SpectralError::DanglingMeshEdge),
            }
        }

        Ok(Mesh {
            subdivision: k,
            coords,
            node_keys,
            node_cell,
            elements,
            boundary_edges,
            interface_edges,
        })
    }

    pub fn subdivision(&self) -> usize {
        self.subdivision
    }

    pub fn node_count(&self) -> usize {
        self.node_keys.len()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[2 * i..2 * i + 2]
    }

    /// The cell that first created this node (interface nodes belong to
    /// several cells; this is a deterministic representative).
    pub fn node_cell(&self, i: usize) -> CellId {
        self.node_cell[i]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn interface_edges(&self) -> &[InterfaceEdge] {
        &self.interface_edges
    }

    /// All nodes lying on boundary facets, ascending.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .boundary_edges
            .iter()
            .flat_map(|e| e.nodes.into_iter())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Nodes on one facet with their facet parameter (affine coordinate
    /// from the lower-id facet vertex), ascending in the parameter.
    pub fn nodes_on_facet(
        &self,
        complex: &SimplicialComplex,
        facet: FacetId,
    ) -> Result<Vec<(f64, usize)>, SpectralError> {
        let verts = complex.facet(facet)?.vertices();
        let (va, vb) = (verts[0].0, verts[1].0);
        let mut out = Vec::new();
        for (i, key) in self.node_keys.iter().enumerate() {
            if key.iter().all(|(v, _)| *v == va || *v == vb) {
                let wb = key
                    .iter()
                    .find(|(v, _)| *v == vb)
                    .map_or(0.0, |(_, w)| *w as f64);
                out.push((wb / self.subdivision as f64, i));
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(out)
    }

    /// Longest element edge measured in the piecewise metric.
    pub fn mesh_size(&self, metric: &PiecewiseMetric) -> f64 {
        let mut h = 0.0f64;
        for el in &self.elements {
            let field = metric.field(el.cell);
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                let pa = self.node(el.nodes[a]);
                let pb = self.node(el.nodes[b]);
                h = h.max(crate::metric::segment_length(field, pa, pb));
            }
        }
        h
    }

    /// Nodal interpolation of a per-cell function.
    pub fn interpolate(&self, f: impl Fn(CellId, &[f64]) -> f64) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_fn(self.node_count(), |i, _| {
            f(self.node_cell[i], self.node(i))
        })
    }
}
