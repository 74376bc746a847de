//! Graph approximation of geodesic distance on a Riemannian polyhedron.
//!
//! Nodes are the complex vertices plus evenly spaced samples in the
//! interiors of facets (cell edges for n = 2); within each cell every pair
//! of incident nodes is joined by a straight chord weighted by Gauss
//! quadrature of its metric length. Shortest paths in this graph converge
//! to geodesic distance at first order in the sample pitch, which is enough
//! for the admissibility dichotomy this supports.
//!
//! The restricted variant removes nodes close to the (n-2)-skeleton, so it
//! approximates distance over paths that avoid corner points. Comparing
//! the two detects polyhedra whose shortest paths are forced through the
//! low-dimensional skeleton (non-admissible gluings).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{CellId, SimplicialComplex};

use super::field::{MetricError, PiecewiseMetric};
use super::{segment_length, PathNode};

#[derive(Clone, Debug)]
struct Node {
    coords: Vec<f64>,
    /// Cells whose closure contains this node.
    cells: Vec<CellId>,
    /// Approximate metric distance to the (n-2)-skeleton.
    skeleton_dist: f64,
}

/// Precomputed shortest-path graph for one (complex, metric, pitch) triple.
pub struct DistanceGraph<'a> {
    complex: &'a SimplicialComplex,
    metric: &'a PiecewiseMetric,
    pitch: f64,
    nodes: Vec<Node>,
    per_cell: Vec<Vec<usize>>,
    adj: Vec<Vec<(usize, f64)>>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance; ties broken by node index for determinism.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> DistanceGraph<'a> {
    pub fn new(
        complex: &'a SimplicialComplex,
        metric: &'a PiecewiseMetric,
        pitch: f64,
    ) -> Result<Self, MetricError> {
        let n = complex.dim();
        // Vertex nodes first, indexed by vertex id.
        let mut nodes: Vec<Node> = (0..complex.vertex_count())
            .map(|v| Node {
                coords: complex.vertex_coords(crate::complex::VertexId(v)).to_vec(),
                cells: Vec::new(),
                skeleton_dist: if n >= 2 { 0.0 } else { f64::INFINITY },
            })
            .collect();
        for (ci, cell) in complex.cells().iter().enumerate() {
            for &v in cell.vertices() {
                nodes[v.0].cells.push(CellId(ci));
            }
        }

        // Facet interior samples (n = 2: edge samples at the pitch).
        if n == 2 {
            for fi in 0..complex.facet_count() {
                let f = crate::complex::FacetId(fi);
                let cofaces = complex.cofaces(f)?.to_vec();
                if cofaces.is_empty() {
                    continue;
                }
                let verts = complex.facet(f)?.vertices().to_vec();
                let a = complex.vertex_coords(verts[0]).to_vec();
                let b = complex.vertex_coords(verts[1]).to_vec();
                let len = cofaces
                    .iter()
                    .map(|&c| segment_length(metric.field(c), &a, &b))
                    .fold(0.0f64, f64::max);
                let m = (len / pitch).ceil().max(1.0) as usize;
                for i in 1..m {
                    let t = i as f64 / m as f64;
                    let coords: Vec<f64> =
                        (0..n).map(|d| a[d] + t * (b[d] - a[d])).collect();
                    nodes.push(Node {
                        coords,
                        cells: cofaces.clone(),
                        skeleton_dist: f64::INFINITY,
                    });
                }
            }
        } else if n > 2 {
            return Err(MetricError::Dimension { got: n, expected: 2 });
        }

        // Straight-chord distance to the nearest cell vertex approximates the
        // distance to the (n-2)-skeleton well at small pitch.
        if n >= 2 {
            for idx in complex.vertex_count()..nodes.len() {
                let mut best = f64::INFINITY;
                let cells = nodes[idx].cells.clone();
                for &c in &cells {
                    for &v in complex.cells()[c.0].vertices() {
                        let d = segment_length(
                            metric.field(c),
                            &nodes[idx].coords,
                            complex.vertex_coords(v),
                        );
                        best = best.min(d);
                    }
                }
                nodes[idx].skeleton_dist = best;
            }
        }

        let mut per_cell: Vec<Vec<usize>> = vec![Vec::new(); complex.cell_count()];
        for (idx, node) in nodes.iter().enumerate() {
            for &c in &node.cells {
                per_cell[c.0].push(idx);
            }
        }

        // Complete graph within each cell, weighted by that cell's metric.
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
        for (ci, members) in per_cell.iter().enumerate() {
            let field = metric.field(CellId(ci));
            for (k, &i) in members.iter().enumerate() {
                for &j in members.iter().skip(k + 1) {
                    let w = segment_length(field, &nodes[i].coords, &nodes[j].coords);
                    adj[i].push((j, w));
                    adj[j].push((i, w));
                }
            }
        }

        Ok(DistanceGraph {
            complex,
            metric,
            pitch,
            nodes,
            per_cell,
            adj,
        })
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Cells whose closure contains the query point (the declared cell plus
    /// any neighbour across a facet the point lies on).
    fn cells_of(&self, p: &PathNode) -> Result<Vec<CellId>, MetricError> {
        let margin = self.complex.inclusion_margin(p.cell, &p.point);
        if margin < -1e-9 {
            return Err(MetricError::PathLeavesSimplex { index: 0, margin });
        }
        let mut cells = vec![p.cell];
        let bary = self.complex.barycentric(p.cell, &p.point);
        let verts = self.complex.cells()[p.cell.0].vertices();
        for &f in self.complex.facets_of_cell(p.cell)? {
            if let Some(opp) = self.complex.opposite_vertex(p.cell, f) {
                let idx = verts.iter().position(|&w| w == opp).expect("own vertex");
                if bary[idx].abs() <= 1e-9 {
                    for &c in self.complex.cofaces(f)? {
                        if !cells.contains(&c) {
                            cells.push(c);
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    fn links_of(
        &self,
        p: &PathNode,
        allowed: impl Fn(usize) -> bool,
    ) -> Result<Vec<(usize, f64)>, MetricError> {
        let mut links = Vec::new();
        for c in self.cells_of(p)? {
            let field = self.metric.field(c);
            for &i in &self.per_cell[c.0] {
                if allowed(i) {
                    links.push((i, segment_length(field, &p.point, &self.nodes[i].coords)));
                }
            }
        }
        Ok(links)
    }

    fn shortest(
        &self,
        p: &PathNode,
        q: &PathNode,
        allowed: impl Fn(usize) -> bool,
    ) -> Result<f64, MetricError> {
        // Direct chord when both endpoints share a cell.
        let pc = self.cells_of(p)?;
        let qc = self.cells_of(q)?;
        let mut best = f64::INFINITY;
        for c in pc.iter().filter(|c| qc.contains(c)) {
            best = best.min(segment_length(self.metric.field(*c), &p.point, &q.point));
        }

        let src = self.links_of(p, &allowed)?;
        let dst = self.links_of(q, &allowed)?;
        let mut arrival = vec![f64::INFINITY; self.nodes.len()];
        for &(i, w) in &dst {
            arrival[i] = arrival[i].min(w);
        }

        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        for &(i, w) in &src {
            if w < dist[i] {
                dist[i] = w;
                heap.push(HeapItem { dist: w, node: i });
            }
        }
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if d > dist[node] || d >= best {
                continue;
            }
            if arrival[node].is_finite() {
                best = best.min(d + arrival[node]);
            }
            for &(nb, w) in &self.adj[node] {
                if !allowed(nb) {
                    continue;
                }
                let nd = d + w;
                if nd < dist[nb] {
                    dist[nb] = nd;
                    heap.push(HeapItem { dist: nd, node: nb });
                }
            }
        }
        Ok(best)
    }

    /// Approximate geodesic distance between two points.
    pub fn distance(&self, p: &PathNode, q: &PathNode) -> Result<f64, MetricError> {
        if p == q {
            return Ok(0.0);
        }
        self.shortest(p, q, |_| true)
    }

    /// Distance over paths whose graph nodes stay farther than `rho` from
    /// the (n-2)-skeleton. Returns +infinity when no such path exists.
    pub fn restricted_distance(
        &self,
        p: &PathNode,
        q: &PathNode,
        rho: f64,
    ) -> Result<f64, MetricError> {
        if p == q {
            return Ok(0.0);
        }
        self.shortest(p, q, |i| self.nodes[i].skeleton_dist > rho)
    }

    /// Single-source distances from `p` to every graph node (used to reach
    /// facets: take the minimum over the facet's sample nodes).
    pub fn distances_from(&self, p: &PathNode) -> Result<Vec<f64>, MetricError> {
        let src = self.links_of(p, |_| true)?;
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        for &(i, w) in &src {
            if w < dist[i] {
                dist[i] = w;
                heap.push(HeapItem { dist: w, node: i });
            }
        }
        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(nb, w) in &self.adj[node] {
                let nd = d + w;
                if nd < dist[nb] {
                    dist[nb] = nd;
                    heap.push(HeapItem { dist: nd, node: nb });
                }
            }
        }
        Ok(dist)
    }

    /// Minimal distance from `p` to a facet (over that facet's nodes and
    /// direct chords to its endpoints' samples).
    pub fn distance_to_facet(
        &self,
        p: &PathNode,
        facet: crate::complex::FacetId,
    ) -> Result<f64, MetricError> {
        let all = self.distances_from(p)?;
        let verts = self.complex.facet(facet)?.vertices().to_vec();
        let mut best = f64::INFINITY;
        for (idx, node) in self.nodes.iter().enumerate() {
            let on_facet = if idx < self.complex.vertex_count() {
                verts.contains(&crate::complex::VertexId(idx))
            } else {
                // Sample nodes only belong to one facet; identify via
                // membership in exactly the facet's cofaces.
                let cof = self.complex.cofaces(facet)?;
                node.cells.len() == cof.len()
                    && node.cells.iter().all(|c| cof.contains(c))
                    && on_segment(
                        &node.coords,
                        self.complex.vertex_coords(verts[0]),
                        self.complex.vertex_coords(verts[1]),
                    )
            };
            if on_facet {
                best = best.min(all[idx]);
            }
        }
        // Direct chords from p to the facet within p's own cell.
        for c in self.cells_of(p)? {
            if self.complex.facets_of_cell(c)?.contains(&facet) {
                let a = self.complex.vertex_coords(verts[0]).to_vec();
                let b = self.complex.vertex_coords(verts[1]).to_vec();
                for k in 0..=32 {
                    let t = k as f64 / 32.0;
                    let x: Vec<f64> = (0..self.complex.dim())
                        .map(|d| a[d] + t * (b[d] - a[d]))
                        .collect();
                    best = best.min(segment_length(self.metric.field(c), &p.point, &x));
                }
            }
        }
        Ok(best)
    }
}

fn on_segment(x: &[f64], a: &[f64], b: &[f64]) -> bool {
    let mut t_num = 0.0;
    let mut t_den = 0.0;
    for i in 0..x.len() {
        t_num += (x[i] - a[i]) * (b[i] - a[i]);
        t_den += (b[i] - a[i]) * (b[i] - a[i]);
    }
    let t = t_num / t_den;
    if !(0.0..=1.0).contains(&t) {
        return false;
    }
    let mut off = 0.0;
    for i in 0..x.len() {
        let proj = a[i] + t * (b[i] - a[i]);
        off += (x[i] - proj).powi(2);
    }
    off.sqrt() <= 1e-9 * t_den.sqrt().max(1.0)
}

/// Outcome of the sampled admissibility test.
#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub pairs_checked: usize,
    pub rho: f64,
    pub tol: f64,
    /// Worst pair: (p, q, unrestricted, restricted).
    pub worst: Option<(PathNode, PathNode, f64, f64)>,
}

/// Samples random point pairs and verifies that restricted distance stays
/// within `tol` of unrestricted distance, i.e. shortest paths do not need
/// the (n-2)-skeleton. `rho` is the exclusion radius (defaults elsewhere to
/// twice the graph pitch); `tol` must absorb legitimate detours around
/// corners, so it should be a few multiples of `rho`.
pub fn check_admissibility(
    graph: &DistanceGraph,
    rho: f64,
    tol: f64,
    pairs: usize,
    seed: u64,
) -> Result<AdmissibilityReport, MetricError> {
    let complex = graph.complex;
    let n = complex.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<(PathNode, PathNode, f64, f64)> = None;
    let mut admissible = true;

    let sample_point = |rng: &mut ChaCha8Rng| {
        let cell = CellId(rng.gen_range(0..complex.cell_count()));
        // Uniform barycentric sample via sorted uniforms.
        let mut cuts: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        cuts.sort_by(f64::total_cmp);
        let mut bary = Vec::with_capacity(n + 1);
        let mut prev = 0.0;
        for &c in &cuts {
            bary.push(c - prev);
            prev = c;
        }
        bary.push(1.0 - prev);
        PathNode {
            cell,
            point: complex.from_barycentric(cell, &bary),
        }
    };

    for _ in 0..pairs {
        let p = sample_point(&mut rng);
        let q = sample_point(&mut rng);
        let free = graph.distance(&p, &q)?;
        let restricted = graph.restricted_distance(&p, &q, rho)?;
        let gap = restricted - free;
        if gap > tol {
            admissible = false;
        }
        let is_worse = match &worst {
            None => true,
            Some((_, _, f, r)) => gap > r - f,
        };
        if is_worse {
            worst = Some((p, q, free, restricted));
        }
    }

    Ok(AdmissibilityReport {
        admissible,
        pairs_checked: pairs,
        rho,
        tol,
        worst,
    })
}
