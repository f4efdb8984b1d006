//! Constrained trajectory integration (classical RK4 with per-step leaf
//! projection) and the Poincaré-section separatrix of the equal-middle case.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{casimirs, d_quadratic, field_raw, EllipsoidSpec, PhasePoint, SymmetryTag};
use crate::tol;

const PROJECTION_MAX_ITERS: usize = 25;

/// Restores the leaf constraints: Newton along `A^-1 x` fixes `C1` (which
/// depends on position only), then a single linear solve strips the
/// leaf-normal momentum component so `C2 = 0`.
pub fn project_to_leaf(spec: &EllipsoidSpec, x: &[f64; 4], y: &[f64; 4]) -> Result<PhasePoint> {
    let a = spec.alphas();
    let mut x = *x;
    let mut converged = false;
    for _ in 0..PROJECTION_MAX_ITERS {
        let (c1, _) = casimirs(spec, &x, y);
        if c1.abs() <= tol::LEAF_TOL {
            converged = true;
            break;
        }
        // C1 along x + t A^-1 x: derivative 2 <A^-1 x, A^-1 x> = 2D.
        let d = d_quadratic(spec, &x);
        if d <= tol::D_MIN {
            return Err(GeoError::DegeneratePoint { d, min: tol::D_MIN });
        }
        let t = -c1 / (2.0 * d);
        for i in 0..4 {
            x[i] += t * x[i] / a[i];
        }
    }
    if !converged {
        let (c1, _) = casimirs(spec, &x, y);
        if c1.abs() > tol::LEAF_TOL {
            return Err(GeoError::ProjectionFailed(PROJECTION_MAX_ITERS));
        }
    }
    let d = d_quadratic(spec, &x);
    let mut y = *y;
    let c2: f64 = (0..4).map(|i| x[i] * y[i] / a[i]).sum();
    for i in 0..4 {
        y[i] -= c2 / d * x[i] / a[i];
    }
    Ok(PhasePoint::new_unchecked(x, y))
}

/// A sampled solution of the constrained Newton equations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, PhasePoint)>,
    pub spec: EllipsoidSpec,
    pub dt: f64,
    pub scheme_id: String,
}

/// Integrates from `p0` to `t_end` with fixed step `dt`: classical 4th-order
/// one-step scheme on the Newton equations followed by leaf projection after
/// every step.
pub fn integrate(spec: &EllipsoidSpec, p0: &PhasePoint, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(GeoError::InvalidSpec(format!(
            "integration needs positive t_end and dt, got t_end = {t_end}, dt = {dt}"
        )));
    }
    let n_full = (t_end / dt - 1e-9).floor().max(0.0) as usize;
    let remainder = t_end - n_full as f64 * dt;
    let mut samples = Vec::with_capacity(n_full + 2);
    let mut p = *p0;
    samples.push((0.0, p));
    for k in 1..=n_full {
        p = rk4_step(spec, &p, dt)?;
        p = project_to_leaf(spec, &p.x, &p.y)?;
        samples.push((k as f64 * dt, p));
    }
    // Final (possibly shortened) step so the last sample sits exactly at
    // t_end.
    if remainder > 1e-12 * dt {
        p = rk4_step(spec, &p, remainder)?;
        p = project_to_leaf(spec, &p.x, &p.y)?;
        samples.push((t_end, p));
    }
    Ok(Trajectory {
        samples,
        spec: *spec,
        dt,
        scheme_id: "rk4_projected".to_string(),
    })
}

fn rk4_step(spec: &EllipsoidSpec, p: &PhasePoint, dt: f64) -> Result<PhasePoint> {
    let add = |x: &[f64; 4], y: &[f64; 4], kx: &[f64; 4], ky: &[f64; 4], s: f64| {
        let mut nx = *x;
        let mut ny = *y;
        for i in 0..4 {
            nx[i] += s * kx[i];
            ny[i] += s * ky[i];
        }
        (nx, ny)
    };
    let (k1x, k1y) = field_raw(spec, &p.x, &p.y)?;
    let (x2, y2) = add(&p.x, &p.y, &k1x, &k1y, 0.5 * dt);
    let (k2x, k2y) = field_raw(spec, &x2, &y2)?;
    let (x3, y3) = add(&p.x, &p.y, &k2x, &k2y, 0.5 * dt);
    let (k3x, k3y) = field_raw(spec, &x3, &y3)?;
    let (x4, y4) = add(&p.x, &p.y, &k3x, &k3y, dt);
    let (k4x, k4y) = field_raw(spec, &x4, &y4)?;
    let mut x = p.x;
    let mut y = p.y;
    for i in 0..4 {
        x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        y[i] += dt / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
    }
    Ok(PhasePoint::new_unchecked(x, y))
}

/// Residual of the Poincaré-section identity of the reduced equal-middle
/// system. The section lives on the `(phi, p_phi)` cylinder with the ellipse
/// parametrization `(xi_0, xi_1) = (sqrt(a0) cos phi, sqrt(a1) sin phi)` and
/// `d = a0 sin^2 phi + a1 cos^2 phi`. Zero residual characterizes section
/// points at integral values `(h, g)`.
pub fn section_identity(spec: &EllipsoidSpec, h: f64, g: f64, phi: f64, p_phi: f64) -> f64 {
    let a = spec.alphas();
    let (a0, a1, a3) = (a[0], a[1], a[3]);
    let s2 = phi.sin() * phi.sin();
    let d = a0 * s2 + a1 * (1.0 - s2);
    2.0 * h * s2 / (a3 - a1) + g / a1
        - (p_phi * p_phi / (d * d))
            * (d * s2 / (a3 - a1) + 0.5 * ((a1 + a0) / (a1 - a0) + (2.0 * phi).cos()))
}

/// The zero level of [`section_identity`] at `g = 0`: the separatrix of the
/// reduced flow, two circles winding once around the cylinder and crossing at
/// `(0, 0)` and `(pi, 0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionCurve {
    /// Ordered `(phi, p_phi)` polylines, one per circle.
    pub branches: Vec<Vec<(f64, f64)>>,
    /// Self-intersection points of the level set.
    pub intersections: Vec<(f64, f64)>,
    pub level: (f64, f64),
    pub spec: EllipsoidSpec,
}

/// On the separatrix level `g = 0` the identity is linear in `p_phi^2`:
/// `p^2 = R(phi)` with this `R` (nonnegative for valid axes).
fn separatrix_p_squared(spec: &EllipsoidSpec, h: f64, phi: f64) -> f64 {
    let a = spec.alphas();
    let (a0, a1, a3) = (a[0], a[1], a[3]);
    let s2 = phi.sin() * phi.sin();
    let d = a0 * s2 + a1 * (1.0 - s2);
    let w = (d * s2 / (a3 - a1) + 0.5 * ((a1 + a0) / (a1 - a0) + (2.0 * phi).cos())) / (d * d);
    (2.0 * h * s2 / (a3 - a1)) / w
}

/// Contours the `g = 0` zero level of the section identity on an `n x n`
/// grid by marching squares, polishes every located point onto the exact
/// level set by a local root solve in `p_phi`, and locates the
/// self-intersections by 2-d Newton on `(residual, d residual/d p_phi)`.
pub fn separatrix_section(spec: &EllipsoidSpec, h: f64, n: usize) -> Result<SectionCurve> {
    spec.require_tag(SymmetryTag::EqualMiddle)?;
    if !(h > 0.0) {
        return Err(GeoError::InvalidSpec(format!("separatrix needs h > 0, got {h}")));
    }
    let n = n.max(64);
    // p range from the explicit bound of the curve.
    let mut p_max: f64 = 0.0;
    for k in 0..512 {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / 512.0;
        p_max = p_max.max(separatrix_p_squared(spec, h, phi).max(0.0).sqrt());
    }
    if p_max == 0.0 {
        return Err(GeoError::ContourFailed);
    }
    let p_lim = 1.3 * p_max;
    let two_pi = 2.0 * std::f64::consts::PI;
    let res = |phi: f64, p: f64| section_identity(spec, h, 0.0, phi, p);

    // Marching squares: collect zero-crossing points on cell edges.
    let mut raw_points: Vec<(f64, f64)> = Vec::new();
    let grid = |i: usize, j: usize| {
        let phi = two_pi * i as f64 / n as f64;
        let p = -p_lim + 2.0 * p_lim * j as f64 / n as f64;
        (phi, p)
    };
    let mut values = vec![0.0f64; (n + 1) * (n + 1)];
    for i in 0..=n {
        for j in 0..=n {
            let (phi, p) = grid(i, j);
            values[i * (n + 1) + j] = res(phi, p);
        }
    }
    let val = |i: usize, j: usize| values[i * (n + 1) + j];
    for i in 0..n {
        for j in 0..n {
            let corners = [
                (val(i, j), grid(i, j)),
                (val(i + 1, j), grid(i + 1, j)),
                (val(i + 1, j + 1), grid(i + 1, j + 1)),
                (val(i, j + 1), grid(i, j + 1)),
            ];
            for k in 0..4 {
                let (v0, (x0, y0)) = corners[k];
                let (v1, (x1, y1)) = corners[(k + 1) % 4];
                if v0 == 0.0 {
                    raw_points.push((x0, y0));
                } else if v0 * v1 < 0.0 {
                    let t = v0 / (v0 - v1);
                    raw_points.push((x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
                }
            }
        }
    }
    if raw_points.is_empty() {
        return Err(GeoError::ContourFailed);
    }

    // Assign points to the two smooth circles (p and sin(phi) change sign
    // together on one circle, oppositely on the other), then polish onto the
    // exact curve p = +-sqrt(R(phi)).
    let mut branches = vec![Vec::new(), Vec::new()];
    for &(phi, p) in &raw_points {
        let sign_product = p * phi.sin();
        let b = if sign_product >= 0.0 { 0 } else { 1 };
        branches[b].push((phi, p));
    }
    for (b, branch) in branches.iter_mut().enumerate() {
        branch.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
        branch.dedup_by(|u, v| (u.0 - v.0).abs() < 1e-9);
        let orient = if b == 0 { 1.0 } else { -1.0 };
        for q in branch.iter_mut() {
            let r = separatrix_p_squared(spec, h, q.0).max(0.0).sqrt();
            q.1 = orient * q.0.sin().signum() * r;
            if q.0.sin() == 0.0 {
                q.1 = 0.0;
            }
        }
    }

    // Self-intersections: 2-d Newton on G = (residual, d residual/d p_phi)
    // seeded from grid nodes where both components are small.
    let dres_dp = |phi: f64, p: f64| {
        let a = spec.alphas();
        let (a0, a1, a3) = (a[0], a[1], a[3]);
        let s2 = phi.sin() * phi.sin();
        let d = a0 * s2 + a1 * (1.0 - s2);
        -2.0 * p / (d * d)
            * (d * s2 / (a3 - a1) + 0.5 * ((a1 + a0) / (a1 - a0) + (2.0 * phi).cos()))
    };
    let mut intersections: Vec<(f64, f64)> = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            let (phi0, p0) = grid(i, j);
            let scale = 2.0 * h / (spec.alpha(3) - spec.alpha(1));
            if res(phi0, p0).abs() > 0.2 * scale || dres_dp(phi0, p0).abs() > 0.2 * scale {
                continue;
            }
            let (mut phi, mut p) = (phi0, p0);
            let mut ok = false;
            for _ in 0..50 {
                let f1 = res(phi, p);
                let f2 = dres_dp(phi, p);
                if f1.abs() < 1e-13 && f2.abs() < 1e-13 {
                    ok = true;
                    break;
                }
                let e = 1e-7;
                let j11 = (res(phi + e, p) - res(phi - e, p)) / (2.0 * e);
                let j12 = (res(phi, p + e) - res(phi, p - e)) / (2.0 * e);
                let j21 = (dres_dp(phi + e, p) - dres_dp(phi - e, p)) / (2.0 * e);
                let j22 = (dres_dp(phi, p + e) - dres_dp(phi, p - e)) / (2.0 * e);
                let det = j11 * j22 - j12 * j21;
                if det.abs() < 1e-14 {
                    break;
                }
                phi -= (j22 * f1 - j12 * f2) / det;
                p -= (-j21 * f1 + j11 * f2) / det;
            }
            if !ok {
                continue;
            }
            // The 2-d Newton stalls near the crossing because the residual
            // vanishes quadratically along phi there (degenerate Jacobian).
            // Polish: the crossings lie on p = 0, where the residual is
            // nonnegative with a quadratic zero, so Newton on its
            // phi-derivative (a simple root) pins phi down.
            for _ in 0..60 {
                let e = 1e-6;
                let d1 = (res(phi + e, 0.0) - res(phi - e, 0.0)) / (2.0 * e);
                let d2 = (res(phi + e, 0.0) - 2.0 * res(phi, 0.0) + res(phi - e, 0.0)) / (e * e);
                if d2.abs() < 1e-300 {
                    break;
                }
                let step = d1 / d2;
                phi -= step;
                if step.abs() < 1e-12 {
                    break;
                }
            }
            p = 0.0;
            let phi = phi.rem_euclid(two_pi);
            if !intersections
                .iter()
                .any(|&(q, r)| angular_distance(q, phi) < 1e-6 && (r - p).abs() < 1e-6)
            {
                intersections.push((phi, p));
            }
        }
    }
    intersections.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());

    Ok(SectionCurve {
        branches,
        intersections,
        level: (h, 0.0),
        spec: *spec,
    })
}

pub fn angular_distance(a: f64, b: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let d = (a - b).rem_euclid(two_pi);
    d.min(two_pi - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_leaf_point, uhlenbeck_integrals};
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
    fn projection_fixed_point_and_perturbations() {
        let spec = generic_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_leaf_point(&spec, &mut rng, 0.5);
        let q = project_to_leaf(&spec, &p.x, &p.y).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(q.x[i], p.x[i], epsilon = 1e-15);
            assert_abs_diff_eq!(q.y[i], p.y[i], epsilon = 1e-15);
        }

        // Position perturbed along A^-1 x.
        let a = spec.alphas();
        let mut x = p.x;
        for i in 0..4 {
            x[i] += 1e-5 * p.x[i] / a[i];
        }
        let q = project_to_leaf(&spec, &x, &p.y).unwrap();
        let (c1, c2) = casimirs(&spec, &q.x, &q.y);
        assert!(c1.abs() <= 1e-12 && c2.abs() <= 1e-12);

        // Momentum perturbed along grad_x C1 = 2 A^-1 x: position untouched,
        // C2 restored.
        let mut y = p.y;
        for i in 0..4 {
            y[i] += 1e-5 * 2.0 * p.x[i] / a[i];
        }
        let q = project_to_leaf(&spec, &p.x, &y).unwrap();
        let (_, c2) = casimirs(&spec, &q.x, &q.y);
        assert!(c2.abs() <= 1e-12);
        for i in 0..4 {
            assert_abs_diff_eq!(q.x[i], p.x[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn planar_initial_data_stays_planar() {
        let spec = generic_spec();
        let a = spec.alphas();
        // x_1 = x_2 = y_1 = y_2 = 0: geodesic on the (x_0, x_3) ellipse.
        let x = [a[0].sqrt(), 0.0, 0.0, 0.0];
        let y = [0.0, 0.0, 0.0, 1.0];
        let p0 = PhasePoint::on_leaf(&spec, x, y).unwrap();
        let traj = integrate(&spec, &p0, 50.0, 1e-3).unwrap();
        let worst = traj
            .samples
            .iter()
            .map(|(_, p)| p.x[1].abs().max(p.x[2].abs()))
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-10, "out-of-plane drift {worst}");
    }

    #[test]
    fn sphere_great_circle_period() {
        let spec = EllipsoidSpec::new([1.0; 4]).unwrap();
        let p0 = PhasePoint::on_leaf(&spec, [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0])
            .unwrap();
        let traj = integrate(&spec, &p0, 2.0 * std::f64::consts::PI, 1e-3).unwrap();
        let (_, last) = traj.samples.last().unwrap();
        let err: f64 = (0..4)
            .map(|i| (last.x[i] - p0.x[i]).powi(2) + (last.y[i] - p0.y[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8, "great-circle closure error {err}");
    }

    #[test]
    fn conservation_and_convergence_order() {
        let spec = generic_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p0 = random_leaf_point(&spec, &mut rng, 0.5);
        let drift = |dt: f64, t_end: f64| -> f64 {
            let traj = integrate(&spec, &p0, t_end, dt).unwrap();
            let f0 = uhlenbeck_integrals(&spec, &p0).unwrap();
            let mut worst = 0.0f64;
            for (_, p) in &traj.samples {
                let f = uhlenbeck_integrals(&spec, p).unwrap();
                for i in 0..4 {
                    worst = worst.max((f[i] - f0[i]).abs() / f0[i].abs().max(1e-3));
                }
            }
            worst
        };
        let d1 = drift(1e-3, 20.0);
        assert!(d1 <= 1e-8, "relative drift {d1}");
        // Convergence order from the pair (2e-3, 1e-3): both drifts sit well
        // above the ~1e-13 noise floor of the integral evaluation, so the
        // fourth-order factor ~16 is visible cleanly.
        let d0 = drift(2e-3, 20.0);
        let factor = d0 / d1;
        assert!(
            (12.0..=20.0).contains(&factor),
            "halving dt changed drift by {factor} (d0 = {d0}, d1 = {d1})"
        );
    }

    #[test]
    fn time_reversal() {
        let spec = generic_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p0 = random_leaf_point(&spec, &mut rng, 0.5);
        let fwd = integrate(&spec, &p0, 10.0, 1e-3).unwrap();
        let (_, end) = fwd.samples.last().unwrap();
        let mut rev = *end;
        for yi in &mut rev.y {
            *yi = -*yi;
        }
        let back = integrate(&spec, &rev, 10.0, 1e-3).unwrap();
        let (_, ret) = back.samples.last().unwrap();
        let err: f64 = (0..4)
            .map(|i| (ret.x[i] - p0.x[i]).powi(2) + (ret.y[i] + p0.y[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-7, "time-reversal error {err}");
    }

    #[test]
    fn section_identity_symmetry_and_zeros() {
        let spec = symmetric_spec();
        assert_abs_diff_eq!(section_identity(&spec, 0.5, 0.0, 0.0, 0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            section_identity(&spec, 0.5, 0.0, std::f64::consts::PI, 0.0),
            0.0,
            epsilon = 1e-13
        );
        // Invariance under (phi, p) -> (-phi, -p).
        for (phi, p) in [(0.3, 0.7), (1.2, -0.4), (2.9, 0.1)] {
            assert_abs_diff_eq!(
                section_identity(&spec, 0.5, 0.2, phi, p),
                section_identity(&spec, 0.5, 0.2, -phi, -p),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn separatrix_topology() {
        let spec = symmetric_spec();
        let curve = separatrix_section(&spec, 0.5, 256).unwrap();
        assert_eq!(curve.intersections.len(), 2, "{:?}", curve.intersections);
        let pi = std::f64::consts::PI;
        assert!(angular_distance(curve.intersections[0].0, 0.0) <= 1e-8);
        assert!(curve.intersections[0].1.abs() <= 1e-8);
        assert!(
            angular_distance(curve.intersections[1].0, pi) <= 1e-8,
            "{:?}",
            curve.intersections
        );
        assert!(curve.intersections[1].1.abs() <= 1e-8);
        assert_eq!(curve.branches.len(), 2);
        for branch in &curve.branches {
            // Winding: phi samples cover the cylinder without large gaps.
            assert!(branch.len() > 100);
            let mut max_gap = branch[0].0 + 2.0 * pi - branch.last().unwrap().0;
            for w in branch.windows(2) {
                max_gap = max_gap.max(w[1].0 - w[0].0);
            }
            assert!(max_gap < 0.2, "phi gap {max_gap}");
            // Points satisfy the identity after polish.
            for &(phi, p) in branch {
                let r = section_identity(&spec, 0.5, 0.0, phi, p);
                assert!(r.abs() <= 1e-10, "residual {r}");
            }
        }
    }
}
