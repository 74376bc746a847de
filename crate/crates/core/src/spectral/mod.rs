//! Finite element spectra, boundary spectral data, waves, and the
//! time-domain Dirichlet-to-Neumann map.

mod assemble;
mod bsd;
mod dtn;
mod eigen;
mod mesh;
mod sparse;
mod wave;

pub use assemble::{
    assemble, element_gradient, element_value, total_volume, transmission_residual,
};
pub use bsd::{
    compare_bsd, eigenmap_rank_margin, extract_bsd, BoundarySample, BoundarySpectralData,
    BsdBlock, BsdComparison, BsdCompareOptions,
};
pub use dtn::{boundary_node_weights, solve_dtn, DtnNode, DtnResult};
pub use eigen::{
    cluster_ranges, eigen_residual, solve_dense, solve_neumann, solve_shift_invert, EigenSystem,
    DENSE_EIGEN_LIMIT,
};
pub use mesh::{BoundaryEdge, Element, InterfaceEdge, Mesh};
pub use sparse::{
    conjugate_gradients, CsrMatrix, CsrSubMatrix, IncompleteCholesky, Preconditioner, ScaledSum,
};
pub use wave::{leapfrog_reference, ModalWave};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SpectralError {
    #[error("meshes are only built for 2-dimensional complexes (got {got})")]
    UnsupportedDimension { got: usize },
    #[error("subdivision level must be at least 1")]
    ZeroSubdivision,
    #[error("mesh edge could not be matched to a facet of the complex")]
    DanglingMeshEdge,
    #[error("degenerate element or metric during assembly")]
    DegenerateElement,
    #[error("mass matrix is not positive definite")]
    MassNotPositive,
    #[error("eigensolver converged {converged} of {requested} requested pairs")]
    EigenConvergence { requested: usize, converged: usize },
    #[error("{context} stalled at relative residual {residual:.3e}")]
    IterationStall {
        context: &'static str,
        residual: f64,
    },
    #[error("facet is not part of the requested boundary set")]
    NotBoundary,
    #[error("boundary set produced no samples")]
    EmptyBoundary,
    #[error("requested {requested} modes, only {available} available")]
    ModeCount { requested: usize, available: usize },
    #[error("boundary spectral data sets have incompatible sampling ({left} vs {right} samples)")]
    SampleMismatch { left: usize, right: usize },
    #[error(transparent)]
    Complex(#[from] crate::complex::ComplexError),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
}
