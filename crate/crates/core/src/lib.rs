//! Numerical toolkit for the geodesic flow on three-dimensional ellipsoids:
//! constrained (Dirac-bracket) dynamics on the unit cotangent leaf, the
//! commuting integrals and their involution, separation of variables in
//! ellipsoidal coordinates, bifurcation diagrams of the energy-momentum
//! map, hyperelliptic action quadratures, and the Hamiltonian monodromy
//! around the focus-focus singularity of the equal-middle-axes ellipsoid.

pub mod actions;
pub mod bifurcation;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod quadrature;
pub mod selftest;
pub mod separation;
pub mod tol;

pub use actions::{
    action_frame, action_gradient, action_i2, action_i3, glue_matrices, monodromy,
    monodromy_about, normal_form, residue_at_pole, ActionFrame, MonodromyResult, Side,
    TransitionMatrix,
};
pub use bifurcation::{
    classify_corank1, corank2_eigenvalues, generic_diagram, symmetric_diagram, BifurcationDiagram,
    CriticalCurve, CriticalCurveKind, CriticalPointRecord, CriticalPointType, EnergyMomentumValue,
};
pub use dynamics::{
    integrate, project_to_leaf, section_identity, separatrix_section, SectionCurve, Trajectory,
};
pub use elliptic::{
    carlson_rc, carlson_rd, carlson_rf, carlson_rj, legendre_e, legendre_k, legendre_pi,
    revolution_action, revolution_action_quadrature, RevolutionParams,
};
pub use error::{GeoError, Result};
pub use geometry::{
    casimirs, integral_values, random_leaf_point, symmetric_integrals, uhlenbeck_integrals,
    EllipsoidSpec, IntegralValues, PhasePoint, SymmetryTag,
};
pub use selftest::{run_all, CriterionReport};
pub use separation::{
    from_ellipsoidal, qtilde, separation_constants, to_ellipsoidal, EllipsoidalPoint,
    QTildeCubic, SeparationConstants,
};
