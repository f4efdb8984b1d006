//! Ellipsoid specification, phase points on the symplectic leaf, the Dirac
//! bracket structure, conserved quantities, and the constrained vector field.
//!
//! The ellipsoid is `<A^-1 x, x> = 1` with `A = diag(alpha_0..alpha_3)`.
//! Dynamics live on the leaf `C1 = C2 = 0` of the Dirac bracket, where
//! `C1 = sum x_i^2/alpha_i - 1` and `C2 = sum x_i y_i/alpha_i`.

use nalgebra::SMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::tol;

/// Exact-equality pattern among the semi-axes, decided at relative
/// tolerance [`tol::AXIS_TOL_REL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryTag {
    /// All four axes distinct.
    Generic,
    /// alpha_1 = alpha_2 strictly between alpha_0 and alpha_3.
    EqualMiddle,
    /// Some other pair (or triple) of equal axes; a 2-ellipsoid of revolution
    /// after reduction.
    Revolution2d,
    /// All axes equal.
    SphereLike,
}

impl std::fmt::Display for SymmetryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SymmetryTag::Generic => "generic",
            SymmetryTag::EqualMiddle => "equal_middle",
            SymmetryTag::Revolution2d => "revolution_2d",
            SymmetryTag::SphereLike => "sphere_like",
        };
        f.write_str(s)
    }
}

/// Semi-axes squared `alpha_0 <= alpha_1 <= alpha_2 <= alpha_3`, all positive,
/// with the symmetry pattern recorded at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    alphas: [f64; 4],
    symmetry_tag: SymmetryTag,
}

impl EllipsoidSpec {
    /// Validates the axes and infers the symmetry tag.
    pub fn new(alphas: [f64; 4]) -> Result<Self> {
        for (i, &a) in alphas.iter().enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(GeoError::InvalidSpec(format!(
                    "alpha_{i} = {a} must be a positive finite real"
                )));
            }
        }
        for i in 0..3 {
            if alphas[i] > alphas[i + 1] {
                return Err(GeoError::InvalidSpec(format!(
                    "alphas must be nondecreasing; alpha_{} = {} > alpha_{} = {}",
                    i,
                    alphas[i],
                    i + 1,
                    alphas[i + 1]
                )));
            }
        }
        let eq = |a: f64, b: f64| (b - a).abs() <= tol::AXIS_TOL_REL * a.abs().max(b.abs());
        let e01 = eq(alphas[0], alphas[1]);
        let e12 = eq(alphas[1], alphas[2]);
        let e23 = eq(alphas[2], alphas[3]);
        let symmetry_tag = if e01 && e12 && e23 {
            SymmetryTag::SphereLike
        } else if e12 && !e01 && !e23 {
            SymmetryTag::EqualMiddle
        } else if e01 || e12 || e23 {
            SymmetryTag::Revolution2d
        } else {
            SymmetryTag::Generic
        };
        Ok(Self { alphas, symmetry_tag })
    }

    pub fn alphas(&self) -> [f64; 4] {
        self.alphas
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alphas[i]
    }

    pub fn symmetry_tag(&self) -> SymmetryTag {
        self.symmetry_tag
    }

    /// Largest axis scale, used to make tolerances relative.
    pub fn scale(&self) -> f64 {
        self.alphas[3]
    }

    pub fn require_tag(&self, tag: SymmetryTag) -> Result<()> {
        if self.symmetry_tag == tag {
            Ok(())
        } else {
            Err(GeoError::WrongSymmetry {
                expected: tag.to_string(),
                found: self.symmetry_tag.to_string(),
            })
        }
    }

    /// Fails when any two axes coincide (integral formulas divide by
    /// axis differences).
    pub fn require_distinct_axes(&self) -> Result<()> {
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (a, b) = (self.alphas[i], self.alphas[j]);
                if (b - a).abs() <= tol::AXIS_TOL_REL * a.abs().max(b.abs()) {
                    return Err(GeoError::DegenerateAxes {
                        i,
                        j,
                        tol: tol::AXIS_TOL_REL,
                    });
                }
            }
        }
        Ok(())
    }
}

/// A point of the constrained phase space: position `x` on the ellipsoid and
/// momentum `y` tangent to it, i.e. `|C1|, |C2| <= LEAF_TOL`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: [f64; 4],
    pub y: [f64; 4],
}

impl PhasePoint {
    /// Accepts a point already on the leaf, auto-projects one within
    /// [`tol::LEAF_PROJECT_WINDOW`], and rejects anything farther out.
    pub fn on_leaf(spec: &EllipsoidSpec, x: [f64; 4], y: [f64; 4]) -> Result<Self> {
        let (c1, c2) = casimirs(spec, &x, &y);
        if c1.abs() <= tol::LEAF_TOL && c2.abs() <= tol::LEAF_TOL {
            return Ok(Self { x, y });
        }
        if c1.abs() <= tol::LEAF_PROJECT_WINDOW {
            return crate::dynamics::project_to_leaf(spec, &x, &y);
        }
        Err(GeoError::InvalidSpec(format!(
            "point is off the leaf beyond the projection window: C1 = {c1:.3e}, C2 = {c2:.3e}"
        )))
    }

    /// Builds a point without checking the leaf constraints. Reserved for
    /// callers that have just enforced them.
    pub(crate) fn new_unchecked(x: [f64; 4], y: [f64; 4]) -> Self {
        Self { x, y }
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.y.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Conserved quantities evaluated at a phase point: either the four
/// Uhlenbeck integrals (generic axes) or the symmetric triple `(h, j, g)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum IntegralValues {
    Generic { h: f64, f: [f64; 4] },
    Symmetric { h: f64, j: f64, g: f64 },
}

/// `C1 = sum x_i^2/alpha_i - 1` and `C2 = sum x_i y_i/alpha_i`; total on any
/// 8-tuple.
pub fn casimirs(spec: &EllipsoidSpec, x: &[f64; 4], y: &[f64; 4]) -> (f64, f64) {
    let a = spec.alphas();
    let mut c1 = -1.0;
    let mut c2 = 0.0;
    for i in 0..4 {
        c1 += x[i] * x[i] / a[i];
        c2 += x[i] * y[i] / a[i];
    }
    (c1, c2)
}

/// `D = sum x_i^2/alpha_i^2 = <A^-1 x, A^-1 x>`.
pub fn d_quadratic(spec: &EllipsoidSpec, x: &[f64; 4]) -> f64 {
    let a = spec.alphas();
    (0..4).map(|i| (x[i] / a[i]) * (x[i] / a[i])).sum()
}

/// The 8x8 Dirac structure matrix in coordinates `(x_0..x_3, y_0..y_3)`:
/// `{x_i, x_j} = 0`, `{x_i, y_j} = delta_ij - x_i x_j/(D alpha_i alpha_j)`,
/// `{y_i, y_j} = -(x_i y_j - x_j y_i)/(D alpha_i alpha_j)`.
pub fn dirac_structure(spec: &EllipsoidSpec, p: &PhasePoint) -> Result<SMatrix<f64, 8, 8>> {
    let a = spec.alphas();
    let d = d_quadratic(spec, &p.x);
    if d <= tol::D_MIN {
        return Err(GeoError::DegeneratePoint { d, min: tol::D_MIN });
    }
    let mut b = SMatrix::<f64, 8, 8>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let denom = d * a[i] * a[j];
            let e = if i == j { 1.0 } else { 0.0 } - p.x[i] * p.x[j] / denom;
            let f = -(p.x[i] * p.y[j] - p.x[j] * p.y[i]) / denom;
            b[(i, 4 + j)] = e;
            b[(4 + j, i)] = -e;
            b[(4 + i, 4 + j)] = f;
        }
    }
    Ok(b)
}

/// Uhlenbeck integrals
/// `F_i = y_i^2 + sum_{j != i} (x_i y_j - x_j y_i)^2 / (alpha_i - alpha_j)`.
/// On the leaf they satisfy `sum F_i = 2H` and `sum F_i/alpha_i = 0`.
pub fn uhlenbeck_integrals(spec: &EllipsoidSpec, p: &PhasePoint) -> Result<[f64; 4]> {
    spec.require_distinct_axes()?;
    let a = spec.alphas();
    let mut f = [0.0; 4];
    for i in 0..4 {
        let mut fi = p.y[i] * p.y[i];
        for j in 0..4 {
            if j != i {
                let m = p.x[i] * p.y[j] - p.x[j] * p.y[i];
                fi += m * m / (a[i] - a[j]);
            }
        }
        f[i] = fi;
    }
    Ok(f)
}

/// The commuting triple of the equal-middle-axes ellipsoid:
/// energy `h`, angular momentum `j = x_1 y_2 - x_2 y_1` of the rotational
/// symmetry, and the combination `g = F_1 + F_2` in its finite six-term form.
pub fn symmetric_integrals(spec: &EllipsoidSpec, p: &PhasePoint) -> Result<(f64, f64, f64)> {
    spec.require_tag(SymmetryTag::EqualMiddle)?;
    let a = spec.alphas();
    let (a0, a1, a3) = (a[0], a[1], a[3]);
    let (x, y) = (&p.x, &p.y);
    let h = p.energy();
    let j = x[1] * y[2] - x[2] * y[1];
    let m01 = x[0] * y[1] - x[1] * y[0];
    let m02 = x[0] * y[2] - x[2] * y[0];
    let m13 = x[1] * y[3] - x[3] * y[1];
    let m23 = x[2] * y[3] - x[3] * y[2];
    let g = y[1] * y[1]
        + y[2] * y[2]
        + (m01 * m01 + m02 * m02) / (a1 - a0)
        + (m13 * m13 + m23 * m23) / (a1 - a3);
    Ok((h, j, g))
}

/// Evaluates whichever integral set matches the spec's symmetry.
pub fn integral_values(spec: &EllipsoidSpec, p: &PhasePoint) -> Result<IntegralValues> {
    match spec.symmetry_tag() {
        SymmetryTag::Generic => {
            let f = uhlenbeck_integrals(spec, p)?;
            Ok(IntegralValues::Generic { h: p.energy(), f })
        }
        SymmetryTag::EqualMiddle => {
            let (h, j, g) = symmetric_integrals(spec, p)?;
            Ok(IntegralValues::Symmetric { h, j, g })
        }
        other => Err(GeoError::WrongSymmetry {
            expected: "generic or equal_middle".to_string(),
            found: other.to_string(),
        }),
    }
}

/// Newton form of the constrained geodesic equations:
/// `x' = y`, `y' = -Lambda A^-1 x` with
/// `Lambda = <A^-1 y, y> / <A^-1 x, A^-1 x>`.
pub fn hamiltonian_vector_field(
    spec: &EllipsoidSpec,
    p: &PhasePoint,
) -> Result<([f64; 4], [f64; 4])> {
    field_raw(spec, &p.x, &p.y)
}

/// Same as [`hamiltonian_vector_field`] but usable on raw near-leaf tuples
/// inside the integrator.
pub(crate) fn field_raw(
    spec: &EllipsoidSpec,
    x: &[f64; 4],
    y: &[f64; 4],
) -> Result<([f64; 4], [f64; 4])> {
    let a = spec.alphas();
    let d = d_quadratic(spec, x);
    if d <= tol::D_MIN {
        return Err(GeoError::DegeneratePoint { d, min: tol::D_MIN });
    }
    let ayy: f64 = (0..4).map(|i| y[i] * y[i] / a[i]).sum();
    let lambda = ayy / d;
    let mut dy = [0.0; 4];
    for i in 0..4 {
        dy[i] = -lambda * x[i] / a[i];
    }
    Ok((*y, dy))
}

/// Gradient of the energy `H = |y|^2/2` in `(x, y)` coordinates.
pub fn grad_h(p: &PhasePoint) -> [f64; 8] {
    let mut g = [0.0; 8];
    g[4..8].copy_from_slice(&p.y);
    g
}

/// Analytic gradient of the Uhlenbeck integral `F_i`.
pub fn grad_f(spec: &EllipsoidSpec, i: usize, p: &PhasePoint) -> Result<[f64; 8]> {
    spec.require_distinct_axes()?;
    let a = spec.alphas();
    let (x, y) = (&p.x, &p.y);
    let mut g = [0.0; 8];
    for k in 0..4 {
        if k == i {
            continue;
        }
        let m = x[i] * y[k] - x[k] * y[i];
        let w = 2.0 * m / (a[i] - a[k]);
        // d/dx_i, d/dy_i accumulate over k; d/dx_k, d/dy_k are single terms.
        g[i] += w * y[k];
        g[4 + i] += -w * x[k];
        g[k] = -w * y[i];
        g[4 + k] = w * x[i];
    }
    g[4 + i] += 2.0 * y[i];
    Ok(g)
}

/// Analytic gradient of `j = x_1 y_2 - x_2 y_1`.
pub fn grad_j(p: &PhasePoint) -> [f64; 8] {
    let (x, y) = (&p.x, &p.y);
    let mut g = [0.0; 8];
    g[1] = y[2];
    g[2] = -y[1];
    g[5] = -x[2];
    g[6] = x[1];
    g
}

/// Analytic gradient of the six-term integral `g` of the equal-middle case.
pub fn grad_g(spec: &EllipsoidSpec, p: &PhasePoint) -> Result<[f64; 8]> {
    spec.require_tag(SymmetryTag::EqualMiddle)?;
    let a = spec.alphas();
    let (a0, a1, a3) = (a[0], a[1], a[3]);
    let (x, y) = (&p.x, &p.y);
    let mut g = [0.0; 8];
    // Terms (x_i y_j - x_j y_i)^2 / (a1 - a_pole) with i in {1,2} paired
    // against j in {0, 3}.
    for i in [1usize, 2] {
        for (j, pole) in [(0usize, a0), (3usize, a3)] {
            let m = x[i] * y[j] - x[j] * y[i];
            let w = 2.0 * m / (a1 - pole);
            g[i] += w * y[j];
            g[4 + i] += -w * x[j];
            g[j] += -w * y[i];
            g[4 + j] += w * x[i];
        }
        g[4 + i] += 2.0 * y[i];
    }
    Ok(g)
}

/// Contraction `B(p) * grad` of the Dirac structure with a gradient: the
/// Hamiltonian flow of the corresponding function.
pub fn bracket_flow(spec: &EllipsoidSpec, p: &PhasePoint, grad: &[f64; 8]) -> Result<[f64; 8]> {
    let b = dirac_structure(spec, p)?;
    let mut out = [0.0; 8];
    for r in 0..8 {
        let mut acc = 0.0;
        for c in 0..8 {
            acc += b[(r, c)] * grad[c];
        }
        out[r] = acc;
    }
    Ok(out)
}

/// Numerical Poisson bracket `{f, g} = grad_f^T B grad_g` at `p`.
pub fn numerical_bracket(
    spec: &EllipsoidSpec,
    p: &PhasePoint,
    gf: &[f64; 8],
    gg: &[f64; 8],
) -> Result<f64> {
    let flow = bracket_flow(spec, p, gg)?;
    Ok((0..8).map(|k| gf[k] * flow[k]).sum())
}

/// Draws a uniform-ish random point of the leaf with energy `h`: Gaussian
/// position rescaled onto the surface, Gaussian momentum stripped of its
/// leaf-normal component and rescaled to `|y| = sqrt(2h)`.
pub fn random_leaf_point<R: Rng + ?Sized>(
    spec: &EllipsoidSpec,
    rng: &mut R,
    h: f64,
) -> PhasePoint {
    use rand_distr::StandardNormal;
    let a = spec.alphas();
    loop {
        let mut x = [0.0; 4];
        let mut y = [0.0; 4];
        for i in 0..4 {
            x[i] = rng.sample::<f64, _>(StandardNormal);
            y[i] = rng.sample::<f64, _>(StandardNormal);
        }
        let q: f64 = (0..4).map(|i| x[i] * x[i] / a[i]).sum();
        if q < 1e-12 {
            continue;
        }
        let s = q.sqrt().recip();
        for xi in &mut x {
            *xi *= s;
        }
        // Strip the component of y normal to the leaf (along A^-1 x).
        let d = d_quadratic(spec, &x);
        let c2: f64 = (0..4).map(|i| x[i] * y[i] / a[i]).sum();
        for i in 0..4 {
            y[i] -= c2 / d * x[i] / a[i];
        }
        let ynorm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ynorm < 1e-9 {
            continue;
        }
        let s = (2.0 * h).sqrt() / ynorm;
        for yi in &mut y {
            *yi *= s;
        }
        let p = PhasePoint::new_unchecked(x, y);
        let (c1, c2) = casimirs(spec, &p.x, &p.y);
        if c1.abs() <= tol::LEAF_TOL && c2.abs() <= tol::LEAF_TOL {
            return p;
        }
        // Tiny rounding residue: one projection pass fixes it.
        if let Ok(p) = crate::dynamics::project_to_leaf(spec, &p.x, &p.y) {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn generic_spec() -> EllipsoidSpec {
        EllipsoidSpec::new([1.0 / 3.0, 1.0, 3.0, 4.0]).unwrap()
    }

    fn symmetric_spec() -> EllipsoidSpec {
        EllipsoidSpec::new([1.0, 2.0, 2.0, 4.0]).unwrap()
    }

    #[test]
    fn tag_inference() {
        assert_eq!(generic_spec().symmetry_tag(), SymmetryTag::Generic);
        assert_eq!(symmetric_spec().symmetry_tag(), SymmetryTag::EqualMiddle);
        assert_eq!(
            EllipsoidSpec::new([1.0, 1.0, 1.0, 1.0]).unwrap().symmetry_tag(),
            SymmetryTag::SphereLike
        );
        assert_eq!(
            EllipsoidSpec::new([1.0, 1.0, 3.0, 4.0]).unwrap().symmetry_tag(),
            SymmetryTag::Revolution2d
        );
        assert!(EllipsoidSpec::new([1.0, 0.5, 3.0, 4.0]).is_err());
        assert!(EllipsoidSpec::new([0.0, 1.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn casimirs_basic_points() {
        let spec = generic_spec();
        let a0 = spec.alpha(0);
        let (c1, c2) = casimirs(&spec, &[a0.sqrt(), 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(c1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c2, 0.0, epsilon = 1e-15);
        let (c1, _) = casimirs(&spec, &[0.0; 4], &[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(c1, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn dirac_structure_antisymmetric_and_basic_entries() {
        let spec = generic_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            let b = dirac_structure(&spec, &p).unwrap();
            for r in 0..8 {
                for c in 0..8 {
                    assert!((b[(r, c)] + b[(c, r)]).abs() <= 1e-15);
                    if r < 4 && c < 4 {
                        assert_eq!(b[(r, c)], 0.0);
                    }
                }
            }
        }
        // At x = (sqrt(a0), 0, 0, 0): D = 1/a0, {x_0,y_0} = 1 - x_0^2/(D a_0^2) = 0,
        // {x_1,y_1} = 1.
        let a0 = spec.alpha(0);
        let p = PhasePoint::on_leaf(&spec, [a0.sqrt(), 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0])
            .unwrap();
        let b = dirac_structure(&spec, &p).unwrap();
        assert_abs_diff_eq!(b[(0, 4)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[(1, 5)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn casimir_property() {
        let spec = generic_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = spec.alphas();
        for _ in 0..20 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            let mut gc1 = [0.0; 8];
            let mut gc2 = [0.0; 8];
            for i in 0..4 {
                gc1[i] = 2.0 * p.x[i] / a[i];
                gc2[i] = p.y[i] / a[i];
                gc2[4 + i] = p.x[i] / a[i];
            }
            for grad in [gc1, gc2] {
                let flow = bracket_flow(&spec, &p, &grad).unwrap();
                for v in flow {
                    assert!(v.abs() <= 1e-12, "Casimir flow entry {v}");
                }
            }
        }
    }

    #[test]
    fn uhlenbeck_values_and_relations() {
        let spec = generic_spec();
        // x = (sqrt(a0),0,0,0), y = (0,1,0,0): F_1 = 1 + a0/(1 - a0) = 3/2.
        let a0 = spec.alpha(0);
        let p = PhasePoint::on_leaf(&spec, [a0.sqrt(), 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0])
            .unwrap();
        let f = uhlenbeck_integrals(&spec, &p).unwrap();
        assert_abs_diff_eq!(f[1], 1.5, epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = spec.alphas();
        for _ in 0..50 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            let f = uhlenbeck_integrals(&spec, &p).unwrap();
            let sum: f64 = f.iter().sum();
            let weighted: f64 = (0..4).map(|i| f[i] / a[i]).sum();
            assert_abs_diff_eq!(sum, 2.0 * p.energy(), epsilon = 1e-12);
            assert_abs_diff_eq!(weighted, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_relation_and_f1_limit() {
        let spec = symmetric_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let [a0, a1, _, a3] = spec.alphas();
        for _ in 0..50 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            let (_, j, g) = symmetric_integrals(&spec, &p).unwrap();
            if p.x[1] == 0.0 && p.x[2] == 0.0 {
                assert_eq!(j, 0.0);
            }
            // F_0 and F_3 stay well defined at the symmetric axes.
            let f0 = p.y[0] * p.y[0]
                + (1..4)
                    .map(|k| {
                        let m = p.x[0] * p.y[k] - p.x[k] * p.y[0];
                        m * m / (a0 - spec.alpha(k))
                    })
                    .sum::<f64>();
            let f3 = p.y[3] * p.y[3]
                + (0..3)
                    .map(|k| {
                        let m = p.x[3] * p.y[k] - p.x[k] * p.y[3];
                        m * m / (a3 - spec.alpha(k))
                    })
                    .sum::<f64>();
            let rel = f0 / a0 + g / a1 - j * j / (a1 * a1) + f3 / a3;
            assert_abs_diff_eq!(rel, 0.0, epsilon = 1e-12);
        }

        // (alpha_1 - alpha_2) F_1 -> J^2 as the middle axes merge.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_leaf_point(&spec, &mut rng, 0.5);
        let (_, j, _) = symmetric_integrals(&spec, &p).unwrap();
        let mut prev_err = f64::INFINITY;
        for k in 3..=8 {
            let eps = 10f64.powi(-(k as i32));
            let near = EllipsoidSpec::new([1.0, 2.0, 2.0 + eps, 4.0]).unwrap();
            let f = uhlenbeck_integrals(&near, &p).unwrap();
            let err = ((2.0 - (2.0 + eps)) * f[1] - j * j).abs();
            // Convergence linear in the axis gap.
            assert!(err <= prev_err * 0.9 || err < 1e-10, "eps {eps} err {err}");
            prev_err = err;
        }
    }

    #[test]
    fn vector_field_matches_bracket_and_is_tangent() {
        let spec = generic_spec();
        // Closed-form check at x = (sqrt(a0),0,0,0), y = (0,1,0,0).
        let a = spec.alphas();
        let p = PhasePoint::on_leaf(&spec, [a[0].sqrt(), 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0])
            .unwrap();
        let (dx, dy) = hamiltonian_vector_field(&spec, &p).unwrap();
        assert_eq!(dx, p.y);
        // Lambda = (1/a1) / (1/a0) = a0/a1; dy_0 = -Lambda x_0/a_0 = -x_0/a_1.
        assert_abs_diff_eq!(dy[0], -a[0].sqrt() / a[1], epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            let (dx, dy) = hamiltonian_vector_field(&spec, &p).unwrap();
            // Tangency: directional derivative of C1 is 2 C2 = 0.
            let dc1: f64 = (0..4).map(|i| 2.0 * p.x[i] * dx[i] / a[i]).sum();
            assert_abs_diff_eq!(dc1, 0.0, epsilon = 1e-12);
            // Agreement with the Dirac-bracket flow of H.
            let flow = bracket_flow(&spec, &p, &grad_h(&p)).unwrap();
            for i in 0..4 {
                assert_abs_diff_eq!(flow[i], dx[i], epsilon = 1e-12);
                assert_abs_diff_eq!(flow[4 + i], dy[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = generic_spec();
        let sym = symmetric_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-6;
        for _ in 0..5 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            for i in 0..4 {
                let g = grad_f(&spec, i, &p).unwrap();
                for k in 0..8 {
                    let mut pp = p;
                    let mut pm = p;
                    if k < 4 {
                        pp.x[k] += step;
                        pm.x[k] -= step;
                    } else {
                        pp.y[k - 4] += step;
                        pm.y[k - 4] -= step;
                    }
                    let fp = uhlenbeck_integrals(&spec, &pp).unwrap()[i];
                    let fm = uhlenbeck_integrals(&spec, &pm).unwrap()[i];
                    assert_abs_diff_eq!(g[k], (fp - fm) / (2.0 * step), epsilon = 1e-6);
                }
            }
            let ps = random_leaf_point(&sym, &mut rng, 0.5);
            let g = grad_g(&sym, &ps).unwrap();
            for k in 0..8 {
                let mut pp = ps;
                let mut pm = ps;
                if k < 4 {
                    pp.x[k] += step;
                    pm.x[k] -= step;
                } else {
                    pp.y[k - 4] += step;
                    pm.y[k - 4] -= step;
                }
                let gp = symmetric_integrals(&sym, &pp).unwrap().2;
                let gm = symmetric_integrals(&sym, &pm).unwrap().2;
                assert_abs_diff_eq!(g[k], (gp - gm) / (2.0 * step), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn pairwise_involution() {
        let spec = generic_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            let grads: Vec<[f64; 8]> =
                (0..4).map(|i| grad_f(&spec, i, &p).unwrap()).collect();
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let br = numerical_bracket(&spec, &p, &grads[i], &grads[j]).unwrap();
                    assert!(br.abs() <= 1e-10, "{{F_{i}, F_{j}}} = {br}");
                }
            }
        }
        let sym = symmetric_spec();
        for _ in 0..100 {
            let p = random_leaf_point(&sym, &mut rng, 0.5);
            let gh = grad_h(&p);
            let gj = grad_j(&p);
            let gg = grad_g(&sym, &p).unwrap();
            for (a, b) in [(&gh, &gj), (&gh, &gg), (&gj, &gg)] {
                let br = numerical_bracket(&sym, &p, a, b).unwrap();
                assert!(br.abs() <= 1e-10, "bracket = {br}");
            }
        }
    }

    #[test]
    fn homogeneity_in_momentum() {
        let spec = generic_spec();
        let sym = symmetric_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = 1.7;
        for _ in 0..10 {
            let p = random_leaf_point(&spec, &mut rng, 0.5);
            let mut q = p;
            for yi in &mut q.y {
                *yi *= c;
            }
            let f = uhlenbeck_integrals(&spec, &p).unwrap();
            let fc = uhlenbeck_integrals(&spec, &q).unwrap();
            for i in 0..4 {
                assert_abs_diff_eq!(fc[i], c * c * f[i], epsilon = 1e-12 * f[i].abs().max(1.0));
            }
            assert_abs_diff_eq!(q.energy(), c * c * p.energy(), epsilon = 1e-13);

            let p = random_leaf_point(&sym, &mut rng, 0.5);
            let mut q = p;
            for yi in &mut q.y {
                *yi *= c;
            }
            let (h, j, g) = symmetric_integrals(&sym, &p).unwrap();
            let (hc, jc, gc) = symmetric_integrals(&sym, &q).unwrap();
            assert_abs_diff_eq!(hc, c * c * h, epsilon = 1e-12);
            assert_abs_diff_eq!(jc, c * j, epsilon = 1e-12);
            assert_abs_diff_eq!(gc, c * c * g, epsilon = 1e-12 * g.abs().max(1.0));
        }
    }

    #[test]
    fn sphere_rejected_by_integrals_allowed_by_dynamics() {
        let sphere = EllipsoidSpec::new([1.0; 4]).unwrap();
        let p = PhasePoint::on_leaf(&sphere, [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0])
            .unwrap();
        assert!(uhlenbeck_integrals(&sphere, &p).is_err());
        assert!(hamiltonian_vector_field(&sphere, &p).is_ok());
    }
}
