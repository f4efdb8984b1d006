//! Ellipsoidal coordinates, the separation polynomials `Q` and `Q~`, the
//! separation constants, SO(2) invariants, and the reduced system of the
//! equal-middle-axes case.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{casimirs, EllipsoidSpec, PhasePoint, SymmetryTag};
use crate::tol;

/// Ellipsoidal coordinates of a surface point: the four roots of
/// `K(x, x; lambda) = sum x_i^2/(alpha_i - lambda) = 1`, interlacing
/// `lambda_0 <= alpha_0 <= lambda_1 <= alpha_1 <= lambda_2 <= alpha_2 <=
/// lambda_3 <= alpha_3`, with `lambda_0 = 0` on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidalPoint {
    pub lambdas: [f64; 4],
}

/// Coefficients of the separation polynomial
/// `Q(z) = 2h z^3 + s2 z^2 + s1 z` (with `s3 = 2h`, `s0 = 0` on the leaf).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConstants {
    pub h: f64,
    pub s1: f64,
    pub s2: f64,
}

impl SeparationConstants {
    pub fn q(&self, z: f64) -> f64 {
        ((2.0 * self.h * z + self.s2) * z + self.s1) * z
    }
}

/// The symmetric-case separation cubic `Q~(z) = z (a z^2 + b z + c)` built
/// from `(h, g, j)`, together with its interlaced roots
/// `alpha_0 <= r1 <= alpha_1 <= r2 <= alpha_3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QTildeCubic {
    pub h: f64,
    pub g: f64,
    pub j: f64,
    /// Coefficients of the quadratic `Q~(z)/z = a z^2 + b z + c`.
    pub coeffs: (f64, f64, f64),
    pub r1: f64,
    pub r2: f64,
}

impl QTildeCubic {
    pub fn q(&self, z: f64) -> f64 {
        let (a, b, c) = self.coeffs;
        ((a * z + b) * z + c) * z
    }
}

/// SO(2) invariants of the rotation in the `(1, 2)` plane:
/// `pi1 = x_1^2 + x_2^2`, `pi2 = y_1^2 + y_2^2`,
/// `pi3 = x_1 y_1 + x_2 y_2`, `pi4 = x_1 y_2 - x_2 y_1`, related by
/// `pi1 pi2 - pi3^2 - pi4^2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SO2Invariants {
    pub pi1: f64,
    pub pi2: f64,
    pub pi3: f64,
    pub pi4: f64,
}

pub fn so2_invariants(p: &PhasePoint) -> SO2Invariants {
    let (x, y) = (&p.x, &p.y);
    SO2Invariants {
        pi1: x[1] * x[1] + x[2] * x[2],
        pi2: y[1] * y[1] + y[2] * y[2],
        pi3: x[1] * y[1] + x[2] * y[2],
        pi4: x[1] * y[2] - x[2] * y[1],
    }
}

/// Point of the reduced phase space `J^{-1}(j)/SO(2)`:
/// `xi = (x_0, sqrt(pi1), x_3)`, `eta = (y_0, pi3/sqrt(pi1), y_3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub xi: [f64; 3],
    pub eta: [f64; 3],
    pub j: f64,
}

/// Solves `K(x, x; lambda) = 1` for the ellipsoidal coordinates of `x` by
/// bisection inside each interlacing bracket (the function increases from
/// `-inf` to `+inf` across every bracket, so bisection cannot escape).
pub fn to_ellipsoidal(spec: &EllipsoidSpec, x: &[f64; 4]) -> Result<EllipsoidalPoint> {
    let a = spec.alphas();
    let (c1, _) = casimirs(spec, x, &[0.0; 4]);
    if c1.abs() > 1e-10 {
        return Err(GeoError::InvalidSpec(format!(
            "point is off the surface: |C1| = {:.3e}",
            c1.abs()
        )));
    }
    for (i, &xi) in x.iter().enumerate() {
        if xi.abs() < tol::COORD_TOL {
            return Err(GeoError::CoordinateSingularity {
                i,
                val: xi.abs(),
                tol: tol::COORD_TOL,
            });
        }
    }
    let f = |z: f64| -> f64 { (0..4).map(|i| x[i] * x[i] / (a[i] - z)).sum::<f64>() - 1.0 };
    let mut lambdas = [0.0; 4];
    for k in 1..4 {
        let (mut lo, mut hi) = (a[k - 1], a[k]);
        // 60 bisection steps: bracket width below 1e-13 absolute for any
        // reasonable axis scale.
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lambdas[k] = 0.5 * (lo + hi);
    }
    Ok(EllipsoidalPoint { lambdas })
}

/// Inverts the coordinate map: `x_i^2 = B(alpha_i)/A'(alpha_i)` with
/// `B(z) = prod_j (lambda_j - z)` and `A(z) = prod_j (alpha_j - z)`.
/// Outputs are squares, clamped at zero from `-1e-14`.
pub fn from_ellipsoidal(spec: &EllipsoidSpec, lam: &EllipsoidalPoint) -> Result<[f64; 4]> {
    spec.require_distinct_axes()?;
    let a = spec.alphas();
    let l = lam.lambdas;
    // Interlacing check (hard error, never silent clamping).
    let order = [l[0], a[0], l[1], a[1], l[2], a[2], l[3], a[3]];
    for w in order.windows(2) {
        if w[0] > w[1] + 1e-12 * spec.scale() {
            return Err(GeoError::InvalidSpec(format!(
                "interlacing violated: {} > {}",
                w[0], w[1]
            )));
        }
    }
    let mut out = [0.0; 4];
    for i in 0..4 {
        let b: f64 = (0..4).map(|j| l[j] - a[i]).product();
        // A'(alpha_i) = -prod_{j != i} (alpha_j - alpha_i).
        let ap: f64 = -(0..4)
            .filter(|&j| j != i)
            .map(|j| a[j] - a[i])
            .product::<f64>();
        let sq = b / ap;
        if sq < -1e-14 {
            return Err(GeoError::InvalidSpec(format!(
                "negative square x_{i}^2 = {sq:.3e} from interlacing data"
            )));
        }
        out[i] = sq.max(0.0);
    }
    Ok(out)
}

/// Assembles the separation constants from the Uhlenbeck integrals through
/// the residue identity `sum_i F_i/(z - alpha_i) = Q(z)/A(z)`, i.e.
/// `Q(z) = sum_i F_i prod_{j != i} (z - alpha_j)`.
pub fn separation_constants(spec: &EllipsoidSpec, f: &[f64; 4]) -> Result<SeparationConstants> {
    spec.require_distinct_axes()?;
    let a = spec.alphas();
    let weighted: f64 = (0..4).map(|i| f[i] / a[i]).sum();
    let scale: f64 = f.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if weighted.abs() > 1e-10 * scale {
        return Err(GeoError::LeafIncompatible(weighted.abs()));
    }
    // Expand sum_i F_i * prod_{j != i} (z - alpha_j) in the monomial basis.
    let mut coeffs = [0.0f64; 4]; // z^0 .. z^3
    for i in 0..4 {
        let mut poly = [1.0f64, 0.0, 0.0, 0.0]; // running product
        let mut deg = 0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            // multiply by (z - alpha_j)
            let mut next = [0.0f64; 4];
            for d in 0..=deg {
                next[d + 1] += poly[d];
                next[d] -= a[j] * poly[d];
            }
            poly = next;
            deg += 1;
        }
        for d in 0..4 {
            coeffs[d] += f[i] * poly[d];
        }
    }
    Ok(SeparationConstants {
        h: 0.5 * coeffs[3],
        s2: coeffs[2],
        s1: coeffs[1],
    })
}

/// Inverse of [`separation_constants`]: recovers the integrals by residue
/// evaluation, `F_i = Q(alpha_i) / prod_{j != i} (alpha_i - alpha_j)`.
pub fn constants_to_integrals(spec: &EllipsoidSpec, c: &SeparationConstants) -> Result<[f64; 4]> {
    spec.require_distinct_axes()?;
    let a = spec.alphas();
    let mut f = [0.0; 4];
    for i in 0..4 {
        let denom: f64 = (0..4)
            .filter(|&j| j != i)
            .map(|j| a[i] - a[j])
            .product();
        f[i] = c.q(a[i]) / denom;
    }
    Ok(f)
}

/// Builds the symmetric separation cubic from `(h, g, j)` and solves for its
/// branch roots. With `c1 = (a3 - a1)(a1 - a0)/a1` and
/// `c2 = (a0 a3 - a1^2)/a1^2`:
/// `Q~(z)/z = 2h (a1 - z)^2 + c1 (g (a1 - z) - j^2) + c2 j^2 (a1 - z)`.
pub fn qtilde(spec: &EllipsoidSpec, h: f64, g: f64, j: f64) -> Result<QTildeCubic> {
    spec.require_tag(SymmetryTag::EqualMiddle)?;
    if !(h > 0.0) {
        return Err(GeoError::InvalidSpec(format!("qtilde needs h > 0, got {h}")));
    }
    let al = spec.alphas();
    let (a0, a1, a3) = (al[0], al[1], al[3]);
    let c1 = (a3 - a1) * (a1 - a0) / a1;
    let c2 = (a0 * a3 - a1 * a1) / (a1 * a1);
    let a = 2.0 * h;
    let b = -4.0 * h * a1 - c1 * g - c2 * j * j;
    let c = 2.0 * h * a1 * a1 + c1 * (g * a1 - j * j) + c2 * j * j * a1;
    let disc = b * b - 4.0 * a * c;
    let img_tol = 1e-9 * spec.scale() * spec.scale() * h.max(1.0);
    if disc < -img_tol {
        return Err(GeoError::OutsideImage { h, j, g });
    }
    let sq = disc.max(0.0).sqrt();
    // Numerically stable quadratic roots.
    let q = -0.5 * (b + b.signum() * sq);
    let (mut r1, mut r2) = if q != 0.0 { (q / a, c / q) } else { (0.0, 0.0) };
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if j == 0.0 {
        // One root is exactly alpha_1; snap the nearer one. The root at
        // alpha_1 plays r2 for g < 0 and r1 for g > 0 (ties give both).
        let other = c / (a * a1);
        if g < 0.0 {
            r1 = other.min(a1);
            r2 = a1;
        } else if g > 0.0 {
            r1 = a1;
            r2 = other.max(a1);
        } else {
            r1 = a1;
            r2 = a1;
        }
    }
    let tol_r = 1e-9 * spec.scale();
    if r1 < a0 - tol_r || r2 > a3 + tol_r || r1 > a1 + tol_r || r2 < a1 - tol_r {
        return Err(GeoError::OutsideImage { h, j, g });
    }
    Ok(QTildeCubic {
        h,
        g,
        j,
        coeffs: (a, b, c),
        r1: r1.clamp(a0, a1),
        r2: r2.clamp(a1, a3),
    })
}

/// `A(z) = prod_j (alpha_j - z)` for the generic spec.
pub fn a_poly(spec: &EllipsoidSpec, z: f64) -> f64 {
    spec.alphas().iter().map(|&aj| aj - z).product()
}

/// Squared separated momentum of the generic case,
/// `p_i^2 = -Q(lambda_i) / (4 A(lambda_i))`.
pub fn momentum_squared_generic(
    spec: &EllipsoidSpec,
    lam: f64,
    constants: &SeparationConstants,
) -> Result<f64> {
    for (k, &ak) in spec.alphas().iter().enumerate() {
        if (lam - ak).abs() < 1e-13 {
            return Err(GeoError::PoleHit { k, tol: 1e-13 });
        }
    }
    Ok(-constants.q(lam) / (4.0 * a_poly(spec, lam)))
}

/// Squared separated momentum of the equal-middle case,
/// `p^2 = -Q~(lambda) / (4 (a0 - z)(a1 - z)^2 (a3 - z))`.
pub fn momentum_squared_symmetric(
    spec: &EllipsoidSpec,
    lam: f64,
    qt: &QTildeCubic,
) -> Result<f64> {
    let a = spec.alphas();
    for (k, ak) in [(0usize, a[0]), (1, a[1]), (3, a[3])] {
        if (lam - ak).abs() < 1e-13 {
            return Err(GeoError::PoleHit { k, tol: 1e-13 });
        }
    }
    let denom = (a[0] - lam) * (a[1] - lam) * (a[1] - lam) * (a[3] - lam);
    Ok(-qt.q(lam) / (4.0 * denom))
}

/// Reduction by the SO(2) symmetry (defined for `pi1 > 0`).
pub fn reduce(spec: &EllipsoidSpec, p: &PhasePoint) -> Result<ReducedPoint> {
    spec.require_tag(SymmetryTag::EqualMiddle)?;
    let inv = so2_invariants(p);
    if inv.pi1 <= 1e-300 {
        return Err(GeoError::AxisPoint);
    }
    let s = inv.pi1.sqrt();
    Ok(ReducedPoint {
        xi: [p.x[0], s, p.x[3]],
        eta: [p.y[0], inv.pi3 / s, p.y[3]],
        j: inv.pi4,
    })
}

/// Reduced Hamiltonian and integral:
/// `h^ = |eta|^2/2 + j^2/(2 xi_1^2)` and the reduced form of `g`. They agree
/// with `H` and `G` of the unreduced point.
pub fn reduced_energies(spec: &EllipsoidSpec, rp: &ReducedPoint) -> (f64, f64) {
    let al = spec.alphas();
    let (a0, a1, a3) = (al[0], al[1], al[3]);
    let (xi, eta, j) = (&rp.xi, &rp.eta, rp.j);
    let h = 0.5 * (eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2])
        + j * j / (2.0 * xi[1] * xi[1]);
    let m10 = xi[1] * eta[0] - xi[0] * eta[1];
    let m12 = xi[1] * eta[2] - xi[2] * eta[1];
    let g = eta[1] * eta[1]
        + m10 * m10 / (a1 - a0)
        + m12 * m12 / (a1 - a3)
        + j * j / (xi[1] * xi[1])
            * (1.0 + xi[0] * xi[0] / (a1 - a0) + xi[2] * xi[2] / (a1 - a3));
    (h, g)
}
