//! Numerical construction of compactly supported, divergence-free
//! oscillatory fields for a planar incompressible flow coupled to a
//! passive tracer.
//!
//! The library works in a linear reformulation of the system: a state
//! carries the tracer `b`, tracer flux `w`, velocity `v`, a traceless
//! symmetric stress `M` and a modified pressure `q`, and the dynamics
//! become a single divergence constraint on an assembled 4x3 matrix
//! field together with a pointwise constraint set. The modules are:
//!
//! - [`states`]: the state space, the constraint-set atoms, assembled
//!   matrices and constitutive residuals.
//! - [`hull`]: certificate-based membership geometry of the atom hull —
//!   an exact linear minimization oracle, a fully corrective
//!   Frank–Wolfe projection, and classical support reduction.
//! - [`wavecone`]: wave-cone certificates and the oscillation-direction
//!   selector.
//! - [`waves`]: localized plane-wave terms built from smooth potentials
//!   with exact closed-form derivatives.
//! - [`field`]: sums of wave terms with spatial indexing.
//! - [`scheme`]: ball packing, wave insertion, growth/mollifier/weak
//!   residual bookkeeping, the iteration driver and the symmetry lift
//!   to a 3-D conducting-fluid system.
//! - [`io`]: run configuration, CLI plumbing and file outputs.
//!
//! Heavy inner loops (quadrature, probing, per-ball construction) are
//! data-parallel via `rayon` when the default `parallel` feature is on;
//! all reductions use fixed chunking so results are bit-identical for
//! any thread count, including the sequential fallback.

pub mod exec;
pub mod field;
pub mod hull;
pub mod io;
pub mod jet;
pub mod scheme;
pub mod states;
pub mod wavecone;
pub mod waves;

pub use field::AnalyticField;
pub use states::{Domain, KAtom, MatrixV, StateZ, Traceless2};
