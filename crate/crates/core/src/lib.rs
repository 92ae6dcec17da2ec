//! Numerical minimization of the causal action on the 2-sphere and
//! structural certificates for the computed minimizers.
//!
//! The model is the one-parameter family of kernels
//! `D(x, y) = ¼ (1 + ⟨x,y⟩)(2 − τ²(1 − ⟨x,y⟩))` with Lagrangian
//! `L = max(0, D)`. Measures are represented as weighted point clouds and the
//! action `S(ρ) = ∬ L dρ dρ` is minimized over normalized measures.
//!
//! Module map:
//!
//! * [`kernel`]: closed forms for `D`, `L`, their angular derivatives, and the
//!   degree-two harmonic expansion.
//! * [`harmonics`]: the nine real spherical harmonics of degree at most two.
//! * [`geometry`]: sphere points, causal classification, caps, grids.
//! * [`measure`]: discrete measures, the action, `ℓ`, Gram matrices, moments.
//! * [`optimizer`]: weight optimization, point motion, insertion, multistart.
//! * [`diagnostics`]: nodal-set fits, light-cone audit, box counting, probes.
//! * [`io`]: on-disk formats for measures.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harmonics;
pub mod io;
pub mod kernel;
pub mod measure;
pub mod optimizer;
pub mod tolerances;

mod sum;

pub use error::{Error, Result};
pub use geometry::{Cap, ConeClass, Causality, SphereGrid, SpherePoint};
pub use kernel::ModelParams;
pub use measure::{DiscreteMeasure, GramMatrix, HarmonicMoments};

pub use optimizer::{OptimizerConfig, RunReport, TerminationReason};
pub use tolerances::Tolerances;
