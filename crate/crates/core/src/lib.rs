//! Spectral geometry on piecewise-smooth Riemannian polyhedra.
//!
//! A polyhedron here is a finite n-dimensional simplicial complex in which
//! every top-dimensional simplex carries its own smooth Riemannian metric.
//! Metrics may jump across shared (n-1)-faces; those faces act as
//! transmission interfaces for the Laplace operator and as refracting
//! surfaces for high-frequency Gaussian beams.
//!
//! The crate is organised in four layers:
//!
//! * [`complex`] — combinatorial simplicial complexes with per-simplex
//!   affine reference charts, facet classification, and the structural
//!   checks (dimensional homogeneity, chainability through interfaces).
//! * [`metric`] — piecewise-polynomial metric fields, path lengths and
//!   graph-based distance approximation, interface normal-coordinate
//!   charts, metric jump profiles, and the chamber decomposition.
//! * [`spectral`] — conforming P1 finite elements for the transmission
//!   Laplacian, Neumann/Dirichlet eigensolves, local boundary spectral
//!   data and its unitary-equivalence test, modal wave synthesis, and a
//!   time-domain Dirichlet-to-Neumann map.
//! * [`beams`] — Gaussian beam propagation: Hamiltonian ray tracing,
//!   Riccati evolution of the phase Hessian, interface splitting with
//!   Snell refraction and transmission/reflection amplitudes, field
//!   evaluation, and the beam-echo interface-detection experiment.
//!
//! Data structures accept arbitrary dimension; the mesh, eigensolver and
//! beam engine are exercised and certified for n = 2.

pub mod complex;
pub mod metric;

pub use complex::{CellId, FacetClass, FacetId, Simplex, SimplicialComplex, VertexId};
pub use metric::{AdmissiblePath, InterfaceChart, MetricField, PiecewiseMetric};
