//! Gauss-Legendre quadrature with cached node tables and an adaptive
//! band-integral driver for integrands of the form encountered in the
//! action quadratures: after the substitution `z = c + r sin u` the
//! square-root endpoint behaviour becomes analytic, so plain Gauss-Legendre
//! with node doubling converges spectrally.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::tol::QUAD_TARGET;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    // Three-term recurrence for P_n and its derivative.
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(n: usize) -> GaussRule {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Returns the cached `n`-point rule, computing it on first use.
pub fn gauss_rule(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(compute_rule(n))))
}

/// `integral of f over [a, b]` with the fixed `n`-point rule.
pub fn integrate_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_rule(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Result of an adaptive integration: value and an error estimate from the
/// last node doubling.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

/// Integrates `f` over `[a, b]` by node doubling (starting at `n0`) until the
/// relative change drops below `target` (scaled by `max(|value|, floor)`).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    n0: usize,
    target: f64,
    floor: f64,
) -> QuadResult {
    let mut n = n0.max(4);
    let mut prev = integrate_fixed(f, a, b, n);
    loop {
        n *= 2;
        let cur = integrate_fixed(f, a, b, n);
        let err = (cur - prev).abs();
        if err <= target * cur.abs().max(floor) || n >= 1 << 16 {
            return QuadResult {
                value: cur,
                error_estimate: err,
                nodes_used: n,
            };
        }
        prev = cur;
    }
}

/// Integrates `g(z)` over the band `[zl, zr]` after the angular substitution
/// `z = c + r sin u`, `u in [-pi/2, pi/2]`, which regularizes square-root
/// (and inverse square-root, through the Jacobian `r cos u`) behaviour at
/// both endpoints. The integrand receives `(z, z - zl, zr - z)` with the
/// endpoint distances computed through the half-angle identities
/// `1 +- sin u = 2 sin^2(pi/4 +- u/2)`, so they stay exact (and strictly
/// positive at interior nodes) even when `z` itself rounds onto an endpoint.
pub fn band_integral<F: Fn(f64, f64, f64) -> f64>(g: &F, zl: f64, zr: f64) -> QuadResult {
    let c = 0.5 * (zl + zr);
    let r = 0.5 * (zr - zl);
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    let wrapped = move |u: f64| {
        let z = c + r * u.sin();
        let sl = (quarter_pi + 0.5 * u).sin();
        let sr = (quarter_pi - 0.5 * u).sin();
        let dl = 2.0 * r * sl * sl;
        let dr = 2.0 * r * sr * sr;
        g(z.clamp(zl, zr), dl, dr) * r * u.cos()
    };
    integrate_adaptive(
        &wrapped,
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        64,
        QUAD_TARGET,
        1e-300,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_rules_match_known_values() {
        let r2 = gauss_rule(2);
        assert_abs_diff_eq!(r2.nodes[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights[0], 1.0, epsilon = 1e-15);
        let r3 = gauss_rule(3);
        assert_abs_diff_eq!(r3.nodes[2], (3.0f64 / 5.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r3.weights[1], 8.0 / 9.0, epsilon = 1e-15);
        // Weights sum to 2 for every cached size.
        for n in [2usize, 5, 16, 64, 128] {
            let r = gauss_rule(n);
            let s: f64 = r.weights.iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
            // Exact for polynomials of degree 2n-1: check x^(2n-2).
            let deg = 2 * n - 2;
            let exact = 2.0 / (deg as f64 + 1.0);
            let got: f64 = r
                .nodes
                .iter()
                .zip(r.weights.iter())
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            assert_abs_diff_eq!(got, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn adaptive_smooth_integrals() {
        let r = integrate_adaptive(&|x: f64| x.exp(), 0.0, 1.0, 4, 1e-14, 1e-300);
        assert_abs_diff_eq!(r.value, std::f64::consts::E - 1.0, epsilon = 1e-14);
        let r = integrate_adaptive(&|x: f64| (5.0 * x).sin(), 0.0, 2.0, 4, 1e-14, 1e-300);
        assert_abs_diff_eq!(r.value, (1.0 - (10.0f64).cos()) / 5.0, epsilon = 1e-13);
    }

    #[test]
    fn band_integral_square_root_endpoints() {
        // integral of sqrt((z - a)(b - z)) over [a, b] = pi (b - a)^2 / 8.
        let (a, b) = (1.0, 3.5);
        let r = band_integral(&|_z, dl: f64, dr: f64| (dl * dr).sqrt(), a, b);
        assert_abs_diff_eq!(
            r.value,
            std::f64::consts::PI * (b - a) * (b - a) / 8.0,
            epsilon = 1e-12
        );
        // integral of 1/sqrt((z - a)(b - z)) over [a, b] = pi.
        let r = band_integral(&|_z, dl: f64, dr: f64| (dl * dr).sqrt().recip(), a, b);
        assert_abs_diff_eq!(r.value, std::f64::consts::PI, epsilon = 1e-11);
    }

    #[test]
    fn band_integral_mixed_analytic_factor() {
        // integral of cos(z) sqrt((z-a)(b-z)) dz against a dense Simpson
        // reference with endpoint substitution.
        let (a, b) = (0.25, 2.0);
        let f = |z: f64| z.cos() * ((z - a) * (b - z)).max(0.0).sqrt();
        let r = band_integral(&|z, dl: f64, dr: f64| z.cos() * (dl * dr).sqrt(), a, b);
        // Reference: same substitution, fixed huge rule.
        let c = 0.5 * (a + b);
        let rad = 0.5 * (b - a);
        let reference = integrate_fixed(
            &|u: f64| f(c + rad * u.sin()) * rad * u.cos(),
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            4096,
        );
        assert_abs_diff_eq!(r.value, reference, epsilon = 1e-12);
        assert!(r.nodes_used <= 512);
    }
}
