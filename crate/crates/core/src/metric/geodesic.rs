//! Hamiltonian geodesic flow for a smooth metric field on one chart.
//!
//! Works with the co-geodesic flow of h(x, xi) = |xi|_{g^{-1}}, whose
//! integral curves are unit-speed geodesics when |xi| = 1:
//!
//!   dx/dt  =  g^{-1} xi / h,
//!   dxi/dt = -(d_x g^{jk}) xi_j xi_k / (2 h).
//!
//! Also exposes the exact second-derivative blocks of h along a ray. They
//! drive both the variational (Jacobi) equation used by interface charts
//! and the Riccati equation for Gaussian beam phase Hessians.

use nalgebra::{DMatrix, DVector};

use super::field::MetricField;

/// First and second derivatives of h(x, xi) at a phase-space point.
#[derive(Clone, Debug)]
pub struct HamiltonianBlocks {
    pub h: f64,
    /// dh/dx
    pub h_x: DVector<f64>,
    /// dh/dxi (the velocity dx/dt)
    pub h_xi: DVector<f64>,
    /// d2h/dx dx
    pub h_xx: DMatrix<f64>,
    /// d2h/dx dxi, entry (i, m) = d2h / dx_i dxi_m
    pub h_xxi: DMatrix<f64>,
    /// d2h/dxi dxi
    pub h_xixi: DMatrix<f64>,
}

/// Inverse-metric derivative d_i(g^{-1}) = -g^{-1} (d_i g) g^{-1}.
fn inv_partial(ginv: &DMatrix<f64>, dg: &DMatrix<f64>) -> DMatrix<f64> {
    -(ginv * dg * ginv)
}

/// Time derivative of (x, xi) under the co-geodesic flow.
pub fn geodesic_rhs(field: &MetricField, x: &[f64], xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = field.dim();
    let g = field.eval(x);
    let ginv = g.clone().try_inverse().expect("metric invertible");
    let q = (xi.transpose() * &ginv * xi)[(0, 0)];
    let h = q.max(1e-300).sqrt();
    let dx = &ginv * xi / h;
    let mut dxi = DVector::zeros(n);
    for i in 0..n {
        let dgi = field.eval_partial(i, x);
        let gi = inv_partial(&ginv, &dgi);
        dxi[i] = -(xi.transpose() * &gi * xi)[(0, 0)] / (2.0 * h);
    }
    (dx, dxi)
}

/// All derivative blocks of h at (x, xi).
pub fn hamiltonian_blocks(field: &MetricField, x: &[f64], xi: &DVector<f64>) -> HamiltonianBlocks {
    let n = field.dim();
    let g = field.eval(x);
    let ginv = g.clone().try_inverse().expect("metric invertible");
    let dg: Vec<DMatrix<f64>> = (0..n).map(|i| field.eval_partial(i, x)).collect();
    let gi: Vec<DMatrix<f64>> = dg.iter().map(|d| inv_partial(&ginv, d)).collect();

    let q = (xi.transpose() * &ginv * xi)[(0, 0)].max(1e-300);
    let h = q.sqrt();

    let mut q_x = DVector::zeros(n);
    for i in 0..n {
        q_x[i] = (xi.transpose() * &gi[i] * xi)[(0, 0)];
    }
    let q_xi = 2.0 * (&ginv * xi);

    // Second x-derivatives of g^{-1}:
    // d_l d_i (g^{-1}) = -g^{-1} (d_l d_i g) g^{-1}
    //                    + g^{-1} (d_l g) g^{-1} (d_i g) g^{-1}
    //                    + g^{-1} (d_i g) g^{-1} (d_l g) g^{-1}.
    let mut q_xx = DMatrix::zeros(n, n);
    for i in 0..n {
        for l in i..n {
            let d2 = field.eval_second(i, l, x);
            let m = -(&ginv * &d2 * &ginv)
                + &ginv * &dg[l] * &ginv * &dg[i] * &ginv
                + &ginv * &dg[i] * &ginv * &dg[l] * &ginv;
            let v = (xi.transpose() * &m * xi)[(0, 0)];
            q_xx[(i, l)] = v;
            q_xx[(l, i)] = v;
        }
    }

    // (q_xxi)_{i,m} = d/dxi_m (q_x_i) = 2 (G_i xi)_m.
    let mut q_xxi = DMatrix::zeros(n, n);
    for i in 0..n {
        let v = 2.0 * (&gi[i] * xi);
        for m in 0..n {
            q_xxi[(i, m)] = v[m];
        }
    }

    let s = 2.0 * h; // 2 sqrt(q)
    let c = 4.0 * q * h; // 4 q^{3/2}
    let h_x = &q_x / s;
    let h_xi = &q_xi / s;
    let h_xx = &q_xx / s - &q_x * q_x.transpose() / c;
    let h_xxi = &q_xxi / s - &q_x * q_xi.transpose() / c;
    let h_xixi = 2.0 * &ginv / s - &q_xi * q_xi.transpose() / c;

    HamiltonianBlocks {
        h,
        h_x,
        h_xi,
        h_xx,
        h_xxi,
        h_xixi,
    }
}

/// Phase-space state with an optional first variation (Jacobi field).
#[derive(Clone, Debug)]
pub struct VariationalState {
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
    pub dx: DVector<f64>,
    pub dxi: DVector<f64>,
}

fn variational_rhs(field: &MetricField, s: &VariationalState) -> VariationalState {
    let b = hamiltonian_blocks(field, s.x.as_slice(), &s.xi);
    let dx_dot = b.h_xxi.transpose() * &s.dx + &b.h_xixi * &s.dxi;
    let dxi_dot = -(&b.h_xx * &s.dx) - &b.h_xxi * &s.dxi;
    VariationalState {
        x: b.h_xi.clone(),
        xi: -&b.h_x,
        dx: dx_dot,
        dxi: dxi_dot,
    }
}

fn axpy(s: &VariationalState, k: &VariationalState, a: f64) -> VariationalState {
    VariationalState {
        x: &s.x + a * &k.x,
        xi: &s.xi + a * &k.xi,
        dx: &s.dx + a * &k.dx,
        dxi: &s.dxi + a * &k.dxi,
    }
}

/// One RK4 step of the flow with its first variation.
pub fn rk4_variational_step(field: &MetricField, s: &VariationalState, dt: f64) -> VariationalState {
    let k1 = variational_rhs(field, s);
    let k2 = variational_rhs(field, &axpy(s, &k1, dt / 2.0));
    let k3 = variational_rhs(field, &axpy(s, &k2, dt / 2.0));
    let k4 = variational_rhs(field, &axpy(s, &k3, dt));
    VariationalState {
        x: &s.x + dt / 6.0 * (&k1.x + 2.0 * &k2.x + 2.0 * &k3.x + &k4.x),
        xi: &s.xi + dt / 6.0 * (&k1.xi + 2.0 * &k2.xi + 2.0 * &k3.xi + &k4.xi),
        dx: &s.dx + dt / 6.0 * (&k1.dx + 2.0 * &k2.dx + 2.0 * &k3.dx + &k4.dx),
        dxi: &s.dxi + dt / 6.0 * (&k1.dxi + 2.0 * &k2.dxi + 2.0 * &k3.dxi + &k4.dxi),
    }
}

/// One RK4 step of the plain flow.
pub fn rk4_step(
    field: &MetricField,
    x: &DVector<f64>,
    xi: &DVector<f64>,
    dt: f64,
) -> (DVector<f64>, DVector<f64>) {
    let f = |x: &DVector<f64>, xi: &DVector<f64>| geodesic_rhs(field, x.as_slice(), xi);
    let (k1x, k1xi) = f(x, xi);
    let (k2x, k2xi) = f(&(x + dt / 2.0 * &k1x), &(xi + dt / 2.0 * &k1xi));
    let (k3x, k3xi) = f(&(x + dt / 2.0 * &k2x), &(xi + dt / 2.0 * &k2xi));
    let (k4x, k4xi) = f(&(x + dt * &k3x), &(xi + dt * &k3xi));
    (
        x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        xi + dt / 6.0 * (k1xi + 2.0 * k2xi + 2.0 * k3xi + k4xi),
    )
}

/// Covector of the g-unit vector along direction `v` at `x`.
pub fn unit_covector(field: &MetricField, x: &[f64], v: &DVector<f64>) -> DVector<f64> {
    let g = field.eval(x);
    let norm = ((v.transpose() * &g * v)[(0, 0)]).sqrt();
    &g * v / norm
}
