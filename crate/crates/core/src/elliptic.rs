//! Carlson symmetric elliptic integrals, the Legendre forms built on them,
//! and the closed-form transverse action of geodesic flow on an ellipsoid
//! of revolution (used for the boundary limits of the symmetric-case
//! actions).

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Carlson's `R_F(x, y, z)` by the duplication algorithm. Arguments must be
/// nonnegative with at most one zero.
pub fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    for _ in 0..200 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let mu = (x + y + z) / 3.0;
        let dev = [(mu - x) / mu, (mu - y) / mu, (mu - z) / mu];
        if dev.iter().all(|d| d.abs() < 0.0015) {
            let e2 = dev[0] * dev[1] - dev[2] * dev[2];
            let e3 = dev[0] * dev[1] * dev[2];
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0)
                / mu.sqrt();
        }
    }
    ((x + y + z) / 3.0).sqrt().recip()
}

/// Carlson's degenerate `R_C(x, y) = R_F(x, y, y)` for `y > 0`.
pub fn carlson_rc(x: f64, y: f64) -> f64 {
    carlson_rf(x, y, y)
}

/// Carlson's `R_D(x, y, z) = R_J(x, y, z, z)`.
pub fn carlson_rd(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    let mut sum = 0.0;
    let mut fac = 1.0;
    for _ in 0..200 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sy * sz + sz * sx;
        sum += fac / (sz * (z + lam));
        fac *= 0.25;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let mu = (x + y + 3.0 * z) / 5.0;
        let dx = (mu - x) / mu;
        let dy = (mu - y) / mu;
        let dz = (mu - z) / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 0.001 {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + 2.0 * ec;
            return 3.0 * sum
                + fac
                    * (1.0 + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee)
                        + dz * (1.0 / 6.0 * ee + dz * (-9.0 / 22.0 * ec + 3.0 / 26.0 * dz * ea)))
                    / (mu * mu.sqrt());
        }
    }
    f64::NAN
}

/// Carlson's `R_J(x, y, z, p)` for nonnegative `x, y, z` (at most one zero)
/// and `p > 0`.
pub fn carlson_rj(mut x: f64, mut y: f64, mut z: f64, mut p: f64) -> f64 {
    let mut sum = 0.0;
    let mut fac = 1.0;
    for _ in 0..200 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sy * sz + sz * sx;
        let alpha = (p * (sx + sy + sz) + sx * sy * sz).powi(2);
        let beta = p * (p + lam).powi(2);
        sum += fac * carlson_rc(alpha, beta);
        fac *= 0.25;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        p = 0.25 * (p + lam);
        let mu = (x + y + z + 2.0 * p) / 5.0;
        let dx = (mu - x) / mu;
        let dy = (mu - y) / mu;
        let dz = (mu - z) / mu;
        let dp = (mu - p) / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()).max(dp.abs()) < 0.001 {
            let ea = dx * (dy + dz) + dy * dz;
            let eb = dx * dy * dz;
            let ec = dp * dp;
            let ed = ea - 3.0 * ec;
            let ee = eb + 2.0 * dp * (ea - ec);
            return 3.0 * sum
                + fac
                    * (1.0
                        + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * ee)
                        + eb * (1.0 / 6.0 + dp * (-3.0 / 11.0 + dp * 3.0 / 26.0))
                        + dp * ea * (1.0 / 3.0 - dp * 3.0 / 22.0)
                        - 1.0 / 3.0 * dp * ec)
                    / (mu * mu.sqrt());
        }
    }
    f64::NAN
}

/// Complete elliptic integral `K(k)` as a function of `k^2` (which may be
/// negative; the Carlson arguments stay positive).
pub fn legendre_k(k2: f64) -> f64 {
    carlson_rf(0.0, 1.0 - k2, 1.0)
}

/// Complete elliptic integral `E(k)` as a function of `k^2`.
pub fn legendre_e(k2: f64) -> f64 {
    carlson_rf(0.0, 1.0 - k2, 1.0) - k2 / 3.0 * carlson_rd(0.0, 1.0 - k2, 1.0)
}

/// Complete elliptic integral `Pi(n, k)` as a function of the
/// characteristic `n` (with `n < 1`) and `k^2`.
pub fn legendre_pi(n: f64, k2: f64) -> f64 {
    carlson_rf(0.0, 1.0 - k2, 1.0) + n / 3.0 * carlson_rj(0.0, 1.0 - k2, 1.0, 1.0 - n)
}

/// Profile of an ellipsoid of revolution: the symmetry-axis squared
/// semi-axis `axis_alpha` and the (doubled) equatorial squared semi-axis
/// `equator_alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevolutionParams {
    pub axis_alpha: f64,
    pub equator_alpha: f64,
}

impl RevolutionParams {
    pub fn new(axis_alpha: f64, equator_alpha: f64) -> Result<Self> {
        if !(axis_alpha > 0.0) || !(equator_alpha > 0.0) {
            return Err(GeoError::InvalidSpec(format!(
                "revolution axes must be positive, got ({axis_alpha}, {equator_alpha})"
            )));
        }
        Ok(Self {
            axis_alpha,
            equator_alpha,
        })
    }
}

/// Transverse (meridian) action of the geodesic flow on the revolution
/// ellipsoid at energy `h` and angular momentum `j` about the symmetry
/// axis, in closed form:
///
/// `I = (2/pi) sqrt(2 h a1) U [E(k) - J3]`, with `jh = j / sqrt(2 h a1)`,
/// `rho = a0/a1`, `U^2 = 1 - jh^2 (1 - rho)`, `k^2 = 1 - rho/U^2`, and
/// `J3 = -(k^2/n) K + (1 + k^2/n) Pi(-n, k)` where `n = (1 - jh^2)/jh^2`
/// and `k^2/n = (1 - rho) jh^2 / U^2`.
///
/// `|jh| = 1` is the equatorial geodesic (action 0); `|jh| > 1` is outside
/// the image and is a `DomainError`.
pub fn revolution_action(params: &RevolutionParams, h: f64, j: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(GeoError::DomainError(format!(
            "revolution action needs h > 0, got {h}"
        )));
    }
    let a0 = params.axis_alpha;
    let a1 = params.equator_alpha;
    let jmax = (2.0 * h * a1).sqrt();
    let jh = j / jmax;
    if jh.abs() > 1.0 {
        return Err(GeoError::DomainError(format!(
            "|j| = {} exceeds the maximal angular momentum {jmax}",
            j.abs()
        )));
    }
    if (jh.abs() - 1.0).abs() < 1e-15 {
        return Ok(0.0);
    }
    let rho = a0 / a1;
    let u2 = 1.0 - jh * jh * (1.0 - rho);
    let u = u2.sqrt();
    let k2 = 1.0 - rho / u2;
    let e = legendre_e(k2);
    let j3 = if jh.abs() < 1e-12 {
        0.0
    } else {
        let n = (1.0 - jh * jh) / (jh * jh);
        let k2_over_n = (1.0 - rho) * jh * jh / u2;
        -k2_over_n * legendre_k(k2) + (1.0 + k2_over_n) * legendre_pi(-n, k2)
    };
    Ok(2.0 / std::f64::consts::PI * jmax * u * (e - j3))
}

/// The same action by direct Gauss-Legendre quadrature of
/// `p_s^2 = 2h (st^2 - s^2)(a0^2 + (a1 - a0) s^2) / (a0 (a0 - s^2)^2)`
/// over `[-st, st]`, `st^2 = a0 (1 - jh^2)`. Used as an independent check
/// of the closed form.
pub fn revolution_action_quadrature(params: &RevolutionParams, h: f64, j: f64) -> Result<f64> {
    let a0 = params.axis_alpha;
    let a1 = params.equator_alpha;
    if !(h > 0.0) {
        return Err(GeoError::DomainError(format!(
            "revolution action needs h > 0, got {h}"
        )));
    }
    let jmax = (2.0 * h * a1).sqrt();
    let jh = j / jmax;
    if jh.abs() > 1.0 {
        return Err(GeoError::DomainError(format!(
            "|j| = {} exceeds the maximal angular momentum {jmax}",
            j.abs()
        )));
    }
    let st2 = a0 * (1.0 - jh * jh);
    if st2 <= 0.0 {
        return Ok(0.0);
    }
    let st = st2.sqrt();
    // a0 - s^2 = (a0 - st^2) + (st^2 - s^2), with st^2 - s^2 = dl * dr (the
    // exact endpoint distances from the quadrature driver): stable even when
    // jh -> 0 makes the turning point graze the coordinate singularity.
    let gap = a0 - st2;
    let p = move |s: f64, dl: f64, dr: f64| {
        let band = dl * dr;
        let num = 2.0 * h * band * (a0 * a0 + (a1 - a0) * s * s);
        let den = a0 * (gap + band) * (gap + band);
        (num / den).max(0.0).sqrt()
    };
    let q = crate::quadrature::band_integral(&p, -st, st);
    Ok(q.value / std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn carlson_special_values() {
        assert_abs_diff_eq!(carlson_rf(1.0, 1.0, 1.0), 1.0, epsilon = 1e-14);
        // R_F(0, 1, 2) = Gamma(1/4)^2 / (4 sqrt(2 pi)) (lemniscate constant).
        assert_abs_diff_eq!(carlson_rf(0.0, 1.0, 2.0), 1.3110287771460598, epsilon = 1e-13);
        // R_D(x, x, x) = x^{-3/2}, R_J(x, x, x, x) = x^{-3/2}.
        for x in [0.5f64, 1.0, 3.0] {
            assert_abs_diff_eq!(carlson_rd(x, x, x), x.powf(-1.5), epsilon = 1e-13);
            assert_abs_diff_eq!(carlson_rj(x, x, x, x), x.powf(-1.5), epsilon = 1e-13);
        }
        // R_C(1, 2) = pi/4 / ... : R_C(x,y) = arctan(sqrt((y-x)/x))/sqrt(y-x) for y > x.
        let x = 1.0f64;
        let y = 2.0f64;
        let expected = ((y - x) / x).sqrt().atan() / (y - x).sqrt();
        assert_abs_diff_eq!(carlson_rc(x, y), expected, epsilon = 1e-13);
    }

    #[test]
    fn legendre_values() {
        // K(0) = E(0) = pi/2.
        assert_abs_diff_eq!(legendre_k(0.0), std::f64::consts::FRAC_PI_2, epsilon = 1e-14);
        assert_abs_diff_eq!(legendre_e(0.0), std::f64::consts::FRAC_PI_2, epsilon = 1e-14);
        // K(k^2 = 1/2) = Gamma(1/4)^2/(4 sqrt(pi)).
        assert_abs_diff_eq!(legendre_k(0.5), 1.8540746773013719, epsilon = 1e-13);
        assert_abs_diff_eq!(legendre_e(0.5), 1.3506438810476755, epsilon = 1e-13);
        // Pi(0, k) = K(k).
        assert_abs_diff_eq!(legendre_pi(0.0, 0.3), legendre_k(0.3), epsilon = 1e-14);
        // Pi(n, 0) = pi / (2 sqrt(1 - n)).
        for n in [-0.5f64, 0.25, 0.75] {
            assert_abs_diff_eq!(
                legendre_pi(n, 0.0),
                std::f64::consts::FRAC_PI_2 / (1.0 - n).sqrt(),
                epsilon = 1e-13
            );
        }
        // Legendre relation E(k) K(k') + E(k') K(k) - K(k) K(k') = pi/2.
        let k2 = 0.3;
        let lhs = legendre_e(k2) * legendre_k(1.0 - k2) + legendre_e(1.0 - k2) * legendre_k(k2)
            - legendre_k(k2) * legendre_k(1.0 - k2);
        assert_abs_diff_eq!(lhs, std::f64::consts::FRAC_PI_2, epsilon = 1e-13);
    }

    #[test]
    fn closed_form_matches_quadrature_grid() {
        for params in [
            RevolutionParams::new(4.0, 2.0).unwrap(),
            RevolutionParams::new(1.0, 2.0).unwrap(),
        ] {
            let h = 0.5;
            let jmax = (2.0 * h * params.equator_alpha).sqrt();
            for k in 0..21 {
                let jh = -0.99 + 1.98 * k as f64 / 20.0;
                let j = jh * jmax;
                let closed = revolution_action(&params, h, j).unwrap();
                let quad = revolution_action_quadrature(&params, h, j).unwrap();
                assert_abs_diff_eq!(closed, quad, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn action_monotone_even_and_boundary() {
        let params = RevolutionParams::new(4.0, 2.0).unwrap();
        let h = 0.5;
        let jmax = (2.0 * h * params.equator_alpha).sqrt();
        let mut prev = f64::INFINITY;
        for k in 0..=40 {
            let j = jmax * k as f64 / 40.0;
            let v = revolution_action(&params, h, j).unwrap();
            assert!(v <= prev + 1e-14, "not monotone at j = {j}");
            assert_abs_diff_eq!(
                v,
                revolution_action(&params, h, -j).unwrap(),
                epsilon = 1e-14
            );
            prev = v;
        }
        assert_eq!(revolution_action(&params, h, jmax).unwrap(), 0.0);
        assert!(matches!(
            revolution_action(&params, h, 1.0001 * jmax),
            Err(GeoError::DomainError(_))
        ));
    }

    #[test]
    fn sphere_limit() {
        // a0 = a1 = R^2: geodesics are great circles; the meridian action is
        // I = sqrt(2h) R - |j| (free rotor reduction on the sphere).
        let r2 = 2.5;
        let params = RevolutionParams::new(r2, r2).unwrap();
        let h = 0.7;
        for jh in [0.0, 0.3, 0.8] {
            let jmax = (2.0 * h * r2).sqrt();
            let j = jh * jmax;
            let v = revolution_action(&params, h, j).unwrap();
            assert_abs_diff_eq!(v, jmax - j.abs(), epsilon = 1e-12);
        }
    }
}
