//! Critical elliptic systems `Δ_g U + A(x) U = Λ |U|^{2*-2} U` on
//! symmetry-reduced model manifolds: closed-form solution families,
//! constrained minimization of the coupled Sobolev quotient, damped Newton
//! solves, and blow-up diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod blowup;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod variational;

pub use analytic::{
    constant_yamabe_value, critical_exponent, named_matrix, sharp_constant, sphere_potential, structure_tests,
    BubbleParams, Coupling, NamedMatrix, StructureFlags,
};
pub use blowup::{build_family, diagnose, BlowupReport, BlowupSequence, DiagnoseOptions, FamilyKind, FamilyOptions};
pub use error::{Error, Result};
pub use fields::{grad_energy, laplacian, lq_norm, pmap_abs_q, Field, PMap};
pub use geometry::{build_model, sphere_volume, Grid1D, ManifoldModel, Model, ModelKind};
pub use variational::{
    coercivity_constant, critical_integral, free_energy, gradient_residual, minimize_quotient,
    multiplicity_energies, newton_solve, quadratic_energy, MinimizeOptions, MultiplicityOptions, NewtonOptions,
    SolveReport,
};
