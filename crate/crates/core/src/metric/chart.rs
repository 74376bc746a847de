//! Normal coordinates across interfaces.
//!
//! An interface chart parameterizes a two-sided neighbourhood of an
//! interface facet by (s, sigma): s is the affine parameter along the facet
//! (from its lower-id vertex to its higher-id one, shared verbatim by both
//! sides) and sigma is signed geodesic distance, positive into the side
//! with the larger cell id. The chart is built by shooting unit-speed
//! geodesics normal to the facet and transporting the tangential direction
//! with the variational flow, so in chart coordinates the metric takes the
//! block form
//!
//!    G = [ g_ss(s, sigma)  0 ]
//!        [ 0               1 ]
//!
//! One-sided derivative stacks of g_ss in sigma, expressed in the common
//! orientation, decide whether an interface carries a genuine metric jump
//! or is an artifact of the triangulation: if the stacks agree to the
//! working order on both sides, solutions of the transmission problem are
//! as smooth across the facet as the order allows and the facet can be
//! dropped. Chambers are the equivalence classes of cells under crossing
//! artificial interfaces only.

use nalgebra::{DMatrix, DVector};

use crate::complex::{CellId, FacetClass, FacetId, SimplicialComplex};

use super::field::{MetricError, MetricField, PiecewiseMetric, SPD_EIGENVALUE_FLOOR};
use super::geodesic::{geodesic_rhs, rk4_variational_step, VariationalState};
use super::{segment_length, PathNode};

/// Highest supported order of one-sided sigma-derivatives of g_ss.
pub const MAX_CHART_ORDER: usize = 3;

/// Fraction of the initial chart Jacobian below which the normal
/// coordinates are declared folded.
const FOLD_RATIO: f64 = 1e-3;

/// Construction parameters for an interface chart.
#[derive(Clone, Copy, Debug)]
pub struct ChartOptions {
    /// Number of sample stations along the facet (midpoints of an even
    /// subdivision, so endpoints are never sampled).
    pub s_samples: usize,
    /// Geodesic depth to which each side is traced and fold-checked.
    pub sigma_max: f64,
    /// Derivative order kept in the jump stacks (at most `MAX_CHART_ORDER`).
    pub order: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions {
            s_samples: 9,
            sigma_max: 0.125,
            order: 2,
        }
    }
}

/// Number of finite-difference levels per side (stencil width).
const FD_LEVELS: usize = 5;
/// RK4 steps per finite-difference level spacing.
const STEPS_PER_LEVEL: usize = 4;
/// Finite-difference level spacing as a fraction of sigma_max.
const LEVEL_FRACTION: f64 = 1.0 / 16.0;

/// One-sided 5-point forward-difference weights for derivative order 1..3,
/// for unit spacing (scale by delta^-k).
const FD_WEIGHTS: [[f64; 5]; 3] = [
    [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25],
    [35.0 / 12.0, -26.0 / 3.0, 9.5, -14.0 / 3.0, 11.0 / 12.0],
    [-2.5, 9.0, -12.0, 7.0, -1.5],
];

/// Per-side record of the traced chart.
#[derive(Clone, Debug)]
pub struct SideStack {
    /// derivs[k][i]: k-th sigma-derivative of g_ss at station i, already in
    /// the global sigma orientation.
    pub derivs: Vec<Vec<f64>>,
    /// Largest |<d x/d s, d x/d sigma>_g| seen at any recorded depth; the
    /// exact chart is orthogonal, so this measures integration error.
    pub max_cross_term: f64,
    /// Largest |g(d x/d sigma, d x/d sigma) - 1| seen at any recorded depth.
    pub max_speed_defect: f64,
}

/// Normal-coordinate chart across one interface facet.
pub struct InterfaceChart<'a> {
    complex: &'a SimplicialComplex,
    metric: &'a PiecewiseMetric,
    facet: FacetId,
    minus: CellId,
    plus: CellId,
    a: Vec<f64>,
    b: Vec<f64>,
    tau: DVector<f64>,
    options: ChartOptions,
    stations: Vec<f64>,
    minus_stack: SideStack,
    plus_stack: SideStack,
}

struct SideTrace {
    g_ss_levels: Vec<f64>,
    max_cross_term: f64,
    max_speed_defect: f64,
}

/// Pointwise jump data for one interface, per derivative order.
#[derive(Clone, Debug)]
pub struct JumpProfile {
    pub facet: FacetId,
    pub order: usize,
    /// Facet parameters of the sample stations.
    pub stations: Vec<f64>,
    /// minus[k][i], plus[k][i]: one-sided k-th sigma-derivatives of g_ss in
    /// the common orientation.
    pub minus: Vec<Vec<f64>>,
    pub plus: Vec<Vec<f64>>,
    /// max over stations of |plus - minus|, per order.
    pub max_abs_jump: Vec<f64>,
}

impl JumpProfile {
    /// True when every stack order matches across the facet within `tol`.
    pub fn is_artificial(&self, tol: f64) -> bool {
        self.max_abs_jump.iter().all(|&j| j <= tol)
    }
}

impl<'a> InterfaceChart<'a> {
    pub fn build(
        complex: &'a SimplicialComplex,
        metric: &'a PiecewiseMetric,
        facet: FacetId,
        options: ChartOptions,
    ) -> Result<Self, MetricError> {
        if complex.dim() != 2 {
            return Err(MetricError::Dimension {
                got: complex.dim(),
                expected: 2,
            });
        }
        if options.order > MAX_CHART_ORDER {
            return Err(MetricError::ChartOrder {
                got: options.order,
                max: MAX_CHART_ORDER,
            });
        }
        let (minus, plus) = match complex.classify_facets()?[facet.0] {
            FacetClass::Interface { minus, plus } => (minus, plus),
            FacetClass::Boundary { .. } => return Err(MetricError::NotAnInterface(facet)),
        };
        let verts = complex.facet(facet)?.vertices().to_vec();
        let a = complex.vertex_coords(verts[0]).to_vec();
        let b = complex.vertex_coords(verts[1]).to_vec();
        let tau = DVector::from_iterator(2, a.iter().zip(&b).map(|(x, y)| y - x));

        let m = options.s_samples.max(1);
        let stations: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();

        let mut stacks = Vec::with_capacity(2);
        for &cell in &[minus, plus] {
            let field = metric.field(cell);
            let normal = complex.inward_reference_normal(cell, facet);
            let mut g_ss = vec![vec![0.0; m]; FD_LEVELS];
            let mut max_cross = 0.0f64;
            let mut max_speed = 0.0f64;
            for (i, &u) in stations.iter().enumerate() {
                let trace =
                    trace_side(field, &a, &tau, &normal, u, &options, facet)?;
                for (k, row) in g_ss.iter_mut().enumerate() {
                    row[i] = trace.g_ss_levels[k];
                }
                max_cross = max_cross.max(trace.max_cross_term);
                max_speed = max_speed.max(trace.max_speed_defect);
            }
            let sign: f64 = if cell == minus { -1.0 } else { 1.0 };
            let delta = options.sigma_max * LEVEL_FRACTION;
            let mut derivs = vec![vec![0.0; m]; options.order + 1];
            for i in 0..m {
                derivs[0][i] = g_ss[0][i];
                for k in 1..=options.order {
                    let w = &FD_WEIGHTS[k - 1];
                    let mut acc = 0.0;
                    for (lvl, &wl) in w.iter().enumerate() {
                        acc += wl * g_ss[lvl][i];
                    }
                    derivs[k][i] = sign.powi(k as i32) * acc / delta.powi(k as i32);
                }
            }
            stacks.push(SideStack {
                derivs,
                max_cross_term: max_cross,
                max_speed_defect: max_speed,
            });
        }
        let plus_stack = stacks.pop().expect("two stacks");
        let minus_stack = stacks.pop().expect("two stacks");

        Ok(InterfaceChart {
            complex,
            metric,
            facet,
            minus,
            plus,
            a,
            b,
            tau,
            options,
            stations,
            minus_stack,
            plus_stack,
        })
    }

    pub fn facet(&self) -> FacetId {
        self.facet
    }

    pub fn minus_cell(&self) -> CellId {
        self.minus
    }

    pub fn plus_cell(&self) -> CellId {
        self.plus
    }

    pub fn options(&self) -> &ChartOptions {
        &self.options
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    pub fn minus_stack(&self) -> &SideStack {
        &self.minus_stack
    }

    pub fn plus_stack(&self) -> &SideStack {
        &self.plus_stack
    }

    /// Jump data across the facet, orders 0..=options.order.
    pub fn jump_profile(&self) -> JumpProfile {
        let order = self.options.order;
        let mut max_abs_jump = vec![0.0f64; order + 1];
        for k in 0..=order {
            for i in 0..self.stations.len() {
                let j = (self.plus_stack.derivs[k][i] - self.minus_stack.derivs[k][i]).abs();
                max_abs_jump[k] = max_abs_jump[k].max(j);
            }
        }
        JumpProfile {
            facet: self.facet,
            order,
            stations: self.stations.clone(),
            minus: self.minus_stack.derivs.clone(),
            plus: self.plus_stack.derivs.clone(),
            max_abs_jump,
        }
    }

    /// Chart point for coordinates (s, sigma). Positive sigma lands in the
    /// plus cell, negative in the minus cell, zero on the facet (reported
    /// in the minus cell).
    pub fn to_point(&self, s: f64, sigma: f64) -> Result<PathNode, MetricError> {
        let base: Vec<f64> = (0..2).map(|d| self.a[d] + s * (self.b[d] - self.a[d])).collect();
        if sigma == 0.0 {
            return Ok(PathNode {
                cell: self.minus,
                point: base,
            });
        }
        let cell = if sigma > 0.0 { self.plus } else { self.minus };
        let field = self.metric.field(cell);
        let normal = self.complex.inward_reference_normal(cell, self.facet);
        let state = launch_state(field, &base, &self.tau, &normal);
        let t_total = sigma.abs();
        let nominal = self.options.sigma_max / 64.0;
        let nsteps = (t_total / nominal).ceil().max(4.0) as usize;
        let dt = t_total / nsteps as f64;
        let mut st = state;
        for _ in 0..nsteps {
            st = rk4_variational_step(field, &st, dt);
        }
        Ok(PathNode {
            cell,
            point: st.x.as_slice().to_vec(),
        })
    }

    /// Inverts the chart near the facet: returns (s, sigma) with the global
    /// sign convention. The point's declared cell picks the side.
    pub fn project(&self, p: &PathNode) -> Result<(f64, f64), MetricError> {
        let side_sign = if p.cell == self.plus {
            1.0
        } else if p.cell == self.minus {
            -1.0
        } else {
            return Err(MetricError::PointNotLocated);
        };
        let field = self.metric.field(p.cell);
        let normal = self.complex.inward_reference_normal(p.cell, self.facet);

        // Euclidean warm start.
        let rel: Vec<f64> = (0..2).map(|d| p.point[d] - self.a[d]).collect();
        let tt = self.tau.dot(&self.tau);
        let mut s = (rel[0] * self.tau[0] + rel[1] * self.tau[1]) / tt;
        s = s.clamp(0.0, 1.0);
        let foot: Vec<f64> = (0..2).map(|d| self.a[d] + s * (self.b[d] - self.a[d])).collect();
        let mut t = segment_length(field, &foot, &p.point).max(1e-12);

        let scale = tt.sqrt().max(1.0);
        let nominal = self.options.sigma_max / 64.0;
        for _ in 0..40 {
            let base: Vec<f64> =
                (0..2).map(|d| self.a[d] + s * (self.b[d] - self.a[d])).collect();
            let mut st = launch_state(field, &base, &self.tau, &normal);
            let nsteps = (t / nominal).ceil().max(2.0) as usize;
            let dt = t / nsteps as f64;
            for _ in 0..nsteps {
                st = rk4_variational_step(field, &st, dt);
            }
            let rx = p.point[0] - st.x[0];
            let ry = p.point[1] - st.x[1];
            if (rx * rx + ry * ry).sqrt() <= 1e-12 * scale {
                return Ok((s, side_sign * t));
            }
            // Velocity from the current state.
            let (vel, _) = geodesic_rhs(field, st.x.as_slice(), &st.xi);
            let jac = DMatrix::from_columns(&[st.dx.clone(), vel]);
            let rhs = DVector::from_column_slice(&[rx, ry]);
            let delta = jac
                .lu()
                .solve(&rhs)
                .ok_or(MetricError::PointNotLocated)?;
            s += delta[0];
            t = (t + delta[1]).max(1e-12);
            if !s.is_finite() || !t.is_finite() {
                return Err(MetricError::PointNotLocated);
            }
        }
        Err(MetricError::PointNotLocated)
    }
}

/// Launch state for a unit-speed normal geodesic from facet parameter `u`,
/// carrying the variation with respect to `u`.
fn launch_state(
    field: &MetricField,
    base: &[f64],
    tau: &DVector<f64>,
    normal: &DVector<f64>,
) -> VariationalState {
    let g = field.eval(base);
    let ginv = g.clone().try_inverse().expect("metric invertible");
    let beta = (normal.transpose() * &ginv * normal)[(0, 0)];
    let xi0 = normal / beta.sqrt();

    // d xi0 / du = -(1/2) beta^{-3/2} (n^T d_u(g^{-1}) n) n, with
    // d_u(g^{-1}) = -g^{-1} (d_tau g) g^{-1}.
    let mut dg_tau = DMatrix::zeros(2, 2);
    for j in 0..2 {
        dg_tau += tau[j] * field.eval_partial(j, base);
    }
    let dginv = -(&ginv * dg_tau * &ginv);
    let dbeta = (normal.transpose() * dginv * normal)[(0, 0)];
    let dxi0 = normal * (-0.5 * beta.powf(-1.5) * dbeta);

    VariationalState {
        x: DVector::from_column_slice(base),
        xi: xi0,
        dx: tau.clone(),
        dxi: dxi0,
    }
}

/// Traces one normal geodesic to sigma_max, recording g_ss at the stencil
/// levels and watching for folds.
fn trace_side(
    field: &MetricField,
    a: &[f64],
    tau: &DVector<f64>,
    normal: &DVector<f64>,
    u: f64,
    options: &ChartOptions,
    facet: FacetId,
) -> Result<SideTrace, MetricError> {
    let base: Vec<f64> = (0..2).map(|d| a[d] + u * tau[d]).collect();
    let mut st = launch_state(field, &base, tau, normal);

    let delta = options.sigma_max * LEVEL_FRACTION;
    let dt = delta / STEPS_PER_LEVEL as f64;
    let total_steps = (options.sigma_max / dt).round() as usize;

    let mut g_ss_levels = Vec::with_capacity(FD_LEVELS);
    let mut max_cross = 0.0f64;
    let mut max_speed = 0.0f64;
    let mut d0 = 0.0;

    for step in 0..=total_steps {
        let g = field.eval(st.x.as_slice());
        // 2x2 minimum eigenvalue.
        let tr = g[(0, 0)] + g[(1, 1)];
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let eig_min = 0.5 * (tr - disc);
        let reached = step as f64 * dt;
        if eig_min < SPD_EIGENVALUE_FLOOR {
            return Err(MetricError::ChartFold {
                facet,
                reached,
                requested: options.sigma_max,
            });
        }
        let (vel, _) = geodesic_rhs(field, st.x.as_slice(), &st.xi);
        let d = st.dx[0] * vel[1] - st.dx[1] * vel[0];
        if step == 0 {
            d0 = d;
        } else if d * d0 <= 0.0 || d.abs() <= FOLD_RATIO * d0.abs() {
            return Err(MetricError::ChartFold {
                facet,
                reached,
                requested: options.sigma_max,
            });
        }
        if step % STEPS_PER_LEVEL == 0 {
            let cross = (st.dx.transpose() * &g * &vel)[(0, 0)];
            let speed = (vel.transpose() * &g * &vel)[(0, 0)];
            max_cross = max_cross.max(cross.abs());
            max_speed = max_speed.max((speed - 1.0).abs());
            if g_ss_levels.len() < FD_LEVELS {
                g_ss_levels.push((st.dx.transpose() * &g * &st.dx)[(0, 0)]);
            }
        }
        if step < total_steps {
            st = rk4_variational_step(field, &st, dt);
        }
    }
    Ok(SideTrace {
        g_ss_levels,
        max_cross_term: max_cross,
        max_speed_defect: max_speed,
    })
}

/// Default tolerance for calling an interface artificial: tight for
/// piecewise-constant metrics (integration is exact up to roundoff), looser
/// when fields actually vary and discretization error enters the stacks.
pub fn default_artificial_tol(metric: &PiecewiseMetric) -> f64 {
    if metric.fields().iter().all(|f| f.max_degree() == 0) {
        1e-8
    } else {
        1e-4
    }
}

/// Result of scanning every interface for removable (artificial) facets.
#[derive(Clone, Debug)]
pub struct ArtificialScan {
    pub order: usize,
    pub tol: f64,
    pub artificial: Vec<FacetId>,
    pub genuine: Vec<FacetId>,
    /// Per interface: max |jump| per derivative order 0..=order.
    pub jumps: Vec<(FacetId, Vec<f64>)>,
}

/// Builds a chart on every interface facet and classifies it by its jump
/// profile.
pub fn detect_artificial_interfaces(
    complex: &SimplicialComplex,
    metric: &PiecewiseMetric,
    options: &ChartOptions,
    tol: f64,
) -> Result<ArtificialScan, MetricError> {
    let classes = complex.classify_facets()?;
    let mut scan = ArtificialScan {
        order: options.order,
        tol,
        artificial: Vec::new(),
        genuine: Vec::new(),
        jumps: Vec::new(),
    };
    for (fi, class) in classes.iter().enumerate() {
        if let FacetClass::Interface { .. } = class {
            let facet = FacetId(fi);
            let chart = InterfaceChart::build(complex, metric, facet, *options)?;
            let profile = chart.jump_profile();
            if profile.is_artificial(tol) {
                scan.artificial.push(facet);
            } else {
                scan.genuine.push(facet);
            }
            scan.jumps.push((facet, profile.max_abs_jump));
        }
    }
    Ok(scan)
}

/// Partition of the cells into chambers: connected components of the dual
/// graph restricted to the listed (artificial) interfaces.
#[derive(Clone, Debug)]
pub struct Chambers {
    /// Chamber index per cell, compact, in order of first appearance.
    pub of_cell: Vec<usize>,
    pub count: usize,
}

impl Chambers {
    pub fn cells_in(&self, chamber: usize) -> Vec<CellId> {
        self.of_cell
            .iter()
            .enumerate()
            .filter(|&(_, &ch)| ch == chamber)
            .map(|(i, _)| CellId(i))
            .collect()
    }
}

/// Merges cells across the given facets (checked to be interfaces).
pub fn chambers(
    complex: &SimplicialComplex,
    across: &[FacetId],
) -> Result<Chambers, MetricError> {
    let mut parent: Vec<usize> = (0..complex.cell_count()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &f in across {
        let cof = complex.cofaces(f)?;
        if cof.len() != 2 {
            return Err(MetricError::NotAnInterface(f));
        }
        let (ra, rb) = (find(&mut parent, cof[0].0), find(&mut parent, cof[1].0));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut labels = vec![usize::MAX; complex.cell_count()];
    let mut count = 0;
    for i in 0..complex.cell_count() {
        let r = find(&mut parent, i);
        if labels[r] == usize::MAX {
            labels[r] = count;
            count += 1;
        }
        labels[i] = labels[r];
    }
    Ok(Chambers {
        of_cell: labels,
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::VertexId;
    use crate::metric::field::Poly;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn vid(v: &[usize]) -> Vec<VertexId> {
        v.iter().map(|&i| VertexId(i)).collect()
    }

    /// [0,2] x [0,1] split along x = 1, two triangles per half.
    fn split_rectangle() -> SimplicialComplex {
        SimplicialComplex::build(
            2,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![2.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
                vec![2.0, 1.0],
            ],
            vec![
                vid(&[0, 1, 4]),
                vid(&[0, 4, 3]),
                vid(&[1, 2, 5]),
                vid(&[1, 5, 4]),
            ],
            vec![],
        )
        .unwrap()
    }

    fn interface_at_x1(c: &SimplicialComplex) -> FacetId {
        let classes = c.classify_facets().unwrap();
        let mut found = None;
        for (fi, class) in classes.iter().enumerate() {
            if let FacetClass::Interface { .. } = class {
                let mid = c.facet_midpoint(FacetId(fi));
                if (mid[0] - 1.0).abs() < 1e-12 {
                    found = Some(FacetId(fi));
                }
            }
        }
        found.expect("interface at x = 1")
    }

    /// g = (1 + x^2) I on every cell.
    fn smooth_conformal(c: &SimplicialComplex) -> PiecewiseMetric {
        let conf = Poly::new(2, vec![(vec![0, 0], 1.0), (vec![2, 0], 1.0)]).unwrap();
        let field = MetricField::new(
            2,
            vec![(0, 0, conf.clone()), (1, 1, conf)],
        )
        .unwrap();
        PiecewiseMetric::new(c, vec![field; c.cell_count()]).unwrap()
    }

    #[test]
    fn conformal_chart_matches_closed_form_derivatives() {
        // g = (1 + x^2) I, interface x = 1 vertical: normal geodesics run
        // horizontally, g_ss(sigma) = 1 + x(sigma)^2 with dx/dsigma =
        // (1 + x^2)^{-1/2}. At sigma = 0: d(g_ss)/dsigma = sqrt(2),
        // d^2(g_ss)/dsigma^2 = 2/(1+x^2)^2 = 1/2.
        let c = split_rectangle();
        let m = smooth_conformal(&c);
        let f = interface_at_x1(&c);
        let chart = InterfaceChart::build(&c, &m, f, ChartOptions::default()).unwrap();
        let profile = chart.jump_profile();
        for stack in [&profile.minus, &profile.plus] {
            for i in 0..profile.stations.len() {
                assert_relative_eq!(stack[0][i], 2.0, epsilon = 1e-10);
                assert_relative_eq!(stack[1][i], 2f64.sqrt(), epsilon = 1e-7);
                assert_relative_eq!(stack[2][i], 0.5, epsilon = 1e-5);
            }
        }
        // The metric is globally smooth, so the interface is artificial.
        assert!(profile.is_artificial(default_artificial_tol(&m)));
        assert!(chart.minus_stack().max_cross_term < 1e-9);
        assert!(chart.plus_stack().max_speed_defect < 1e-9);
    }

    #[test]
    fn piecewise_constant_jump_is_genuine() {
        let c = split_rectangle();
        // Left identity, right diag(1, 4): tangential metric jumps 1 -> 4.
        let right = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let fields = vec![
            MetricField::identity(2),
            MetricField::identity(2),
            MetricField::constant(2, &right),
            MetricField::constant(2, &right),
        ];
        let m = PiecewiseMetric::new(&c, fields).unwrap();
        let f = interface_at_x1(&c);
        let chart = InterfaceChart::build(&c, &m, f, ChartOptions::default()).unwrap();
        let profile = chart.jump_profile();
        assert_relative_eq!(profile.max_abs_jump[0], 3.0, epsilon = 1e-10);
        assert!(!profile.is_artificial(default_artificial_tol(&m)));

        let scan =
            detect_artificial_interfaces(&c, &m, &ChartOptions::default(), 1e-8).unwrap();
        // The x = 1 interface is genuine; the two intra-half diagonals are
        // artificial.
        assert!(scan.genuine.contains(&f));
        assert_eq!(scan.artificial.len(), 2);
        assert_eq!(scan.genuine.len(), 1);

        let ch = chambers(&c, &scan.artificial).unwrap();
        assert_eq!(ch.count, 2);
        assert_eq!(ch.of_cell[0], ch.of_cell[1]);
        assert_eq!(ch.of_cell[2], ch.of_cell[3]);
        assert_ne!(ch.of_cell[0], ch.of_cell[2]);
    }

    #[test]
    fn smooth_metric_merges_into_one_chamber() {
        let c = split_rectangle();
        let m = smooth_conformal(&c);
        let scan = detect_artificial_interfaces(
            &c,
            &m,
            &ChartOptions::default(),
            default_artificial_tol(&m),
        )
        .unwrap();
        assert!(scan.genuine.is_empty());
        let ch = chambers(&c, &scan.artificial).unwrap();
        assert_eq!(ch.count, 1);
    }

    #[test]
    fn chart_round_trip_through_projection() {
        let c = split_rectangle();
        let m = smooth_conformal(&c);
        let f = interface_at_x1(&c);
        let chart = InterfaceChart::build(&c, &m, f, ChartOptions::default()).unwrap();
        for &(s, sigma) in &[(0.3, 0.08), (0.7, -0.05), (0.5, 0.11), (0.21, -0.115)] {
            let p = chart.to_point(s, sigma).unwrap();
            let (s2, sigma2) = chart.project(&p).unwrap();
            assert_abs_diff_eq!(s, s2, epsilon = 1e-9);
            assert_abs_diff_eq!(sigma, sigma2, epsilon = 1e-9);
        }
    }

    #[test]
    fn focusing_metric_folds_before_requested_depth() {
        // Conformal factor c(y) = 1/2 + 2y - 2y^2 peaks at y = 1/2; rays
        // entering the right half bend toward the axis and focus. Near the
        // facet ends the curvature K = -(lap ln c)/c^2 exceeds 40, putting
        // the first conjugate point around sigma ~ 0.25-0.3, so a deep
        // chart must report a fold while a shallow one stays regular.
        let c = split_rectangle();
        let cpoly = Poly::new(
            2,
            vec![(vec![0, 0], 0.5), (vec![0, 1], 2.0), (vec![0, 2], -2.0)],
        )
        .unwrap();
        let c2 = cpoly.clone(); // c^2 via term-by-term product below
        let mut prod = Vec::new();
        for (ea, ca) in c2.terms() {
            for (eb, cb) in cpoly.terms() {
                prod.push((vec![ea[0] + eb[0], ea[1] + eb[1]], ca * cb));
            }
        }
        let csq = Poly::new(2, prod).unwrap();
        let field =
            MetricField::new(2, vec![(0, 0, csq.clone()), (1, 1, csq)]).unwrap();
        let m = PiecewiseMetric::new(&c, vec![field; 4]).unwrap();
        let f = interface_at_x1(&c);

        let shallow = ChartOptions {
            sigma_max: 0.15,
            ..ChartOptions::default()
        };
        assert!(InterfaceChart::build(&c, &m, f, shallow).is_ok());

        let deep = ChartOptions {
            sigma_max: 1.4,
            ..ChartOptions::default()
        };
        match InterfaceChart::build(&c, &m, f, deep) {
            Err(MetricError::ChartFold {
                reached, requested, ..
            }) => {
                assert!(reached > 0.1 && reached < 1.2, "reached = {reached}");
                assert_eq!(requested, 1.4);
            }
            other => panic!("expected fold, got {:?}", other.err()),
        }
    }

    #[test]
    fn order_cap_enforced() {
        let c = split_rectangle();
        let m = smooth_conformal(&c);
        let f = interface_at_x1(&c);
        let opts = ChartOptions {
            order: 4,
            ..ChartOptions::default()
        };
        assert!(matches!(
            InterfaceChart::build(&c, &m, f, opts),
            Err(MetricError::ChartOrder { got: 4, max: 3 })
        ));
    }
}
