//! Named tolerances shared across the crate. All acceptance-relevant
//! thresholds are pinned here rather than scattered through call sites.

/// Leaf membership: |C1|, |C2| must not exceed this for a valid phase point.
pub const LEAF_TOL: f64 = 1e-12;

/// Auto-projection window: constructors project points whose Casimir residual
/// is below this and reject anything farther from the leaf.
pub const LEAF_PROJECT_WINDOW: f64 = 1e-6;

/// Relative threshold below which two semi-axes are treated as exactly equal.
pub const AXIS_TOL_REL: f64 = 1e-9;

/// Minimum admissible D = <A^-1 x, A^-1 x> for the bracket structure.
pub const D_MIN: f64 = 1e-14;

/// Tube radius around coordinate hyperplanes inside which ellipsoidal
/// coordinates are refused rather than regularized.
pub const COORD_TOL: f64 = 1e-8;

/// Distance from a branch root to the pole at alpha_1 below which, at exactly
/// zero angular momentum, the action quadrature is refused.
pub const POLE_GUARD: f64 = 1e-6;

/// Distance from a branch root to the pole at alpha_1 below which (with
/// nonzero angular momentum) the quadrature switches to residue subtraction.
/// This is a superset of [`POLE_GUARD`]: the subtracted form is exact for any
/// pole distance, and engaging it early keeps the node count bounded.
pub const POLE_SWITCH: f64 = 1e-3;

/// Smallest |j| admitted for direct action evaluation on the g = 0 line.
pub const J_FLOOR: f64 = 1e-7;

/// Maximum distance from an integer accepted when rounding transition-matrix
/// entries; farther values are a hard error, never silently rounded.
pub const INT_TOL: f64 = 1e-4;

/// Relative-change target for node-doubling quadrature.
pub const QUAD_TARGET: f64 = 1e-11;
