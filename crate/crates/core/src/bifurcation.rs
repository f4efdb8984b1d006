//! Critical values of the energy-momentum map at fixed energy and the
//! eigenvalue classification of critical points, for generic and
//! equal-middle-axes specs.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{EllipsoidSpec, PhasePoint, SymmetryTag};

pub type C64 = Complex<f64>;

/// A value of the energy-momentum map: `(h, s1, s2)` in the generic case,
/// `(h, j, g)` in the symmetric one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnergyMomentumValue {
    Generic { h: f64, s1: f64, s2: f64 },
    Symmetric { h: f64, j: f64, g: f64 },
}

impl EnergyMomentumValue {
    /// Planar coordinates of the value at fixed energy.
    pub fn coords(&self) -> (f64, f64) {
        match *self {
            EnergyMomentumValue::Generic { s1, s2, .. } => (s1, s2),
            EnergyMomentumValue::Symmetric { j, g, .. } => (j, g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalCurveKind {
    SubflowLine,
    DoubleRootCurve,
    BoundaryParabola,
}

/// A one-parameter family of critical values, carried both as exact
/// coefficients and as a sampled polyline (so consumers never depend on the
/// sampling density).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub kind: CriticalCurveKind,
    pub label: String,
    /// Exact defining coefficients:
    /// subflow line `s1 + alpha_j s2 + 2 h alpha_j^2 = 0` stores
    /// `[1, alpha_j, 2 h alpha_j^2]`; the double-root curve
    /// `(s1, s2) = (d^2, -2d)` stores `[d_min, d_max]`; a boundary parabola
    /// `g = c0 + c2 j^2` stores `[c0, c2]`.
    pub coefficients: Vec<f64>,
    pub param_range: (f64, f64),
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalPointType {
    Elliptic,
    Hyperbolic,
    FocusFocus,
    Degenerate,
    EllipticElliptic,
    EllipticHyperbolic,
    HyperbolicHyperbolic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPointRecord {
    pub location: EnergyMomentumValue,
    pub corank: u8,
    pub point_type: CriticalPointType,
    pub eigenvalues: Vec<C64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub h: f64,
    pub curves: Vec<CriticalCurve>,
    pub points: Vec<CriticalPointRecord>,
    /// Chamber fibre counts and similar descriptive notes; not verified by
    /// any computation here.
    pub annotations: Vec<String>,
}

pub const DEFAULT_CURVE_SAMPLES: usize = 512;

/// Bifurcation diagram of a generic ellipsoid at energy `h` in the
/// `(s1, s2)` plane: four subflow lines, the double-root arc, six corank-2
/// intersection points, and the two tangency (degenerate) points.
pub fn generic_diagram(spec: &EllipsoidSpec, h: f64) -> Result<BifurcationDiagram> {
    generic_diagram_with_samples(spec, h, DEFAULT_CURVE_SAMPLES)
}

pub fn generic_diagram_with_samples(
    spec: &EllipsoidSpec,
    h: f64,
    n: usize,
) -> Result<BifurcationDiagram> {
    spec.require_distinct_axes()?;
    if !(h > 0.0) {
        return Err(GeoError::InvalidSpec(format!("diagram needs h > 0, got {h}")));
    }
    let a = spec.alphas();
    let mut curves = Vec::new();
    for jx in 0..4 {
        // The subflow line F_j = 0: s1 + alpha_j s2 + 2 h alpha_j^2 = 0,
        // parametrized by s2. Its relevant span covers its intersections
        // with the other lines (s2 = -(alpha_j + alpha_k)) and, for the
        // middle axes, the tangency with the arc at s2 = -2 alpha_j.
        let scale = 2.0 * h;
        let mut s2_marks: Vec<f64> = (0..4)
            .filter(|&k| k != jx)
            .map(|k| -scale * (a[jx] + a[k]))
            .collect();
        if jx == 1 || jx == 2 {
            s2_marks.push(-2.0 * scale * a[jx]);
        }
        let lo = s2_marks.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s2_marks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let samples = (0..=n)
            .map(|k| {
                let s2 = lo + (hi - lo) * k as f64 / n as f64;
                (-(a[jx] * s2 + 2.0 * h * a[jx] * a[jx]), s2)
            })
            .collect();
        curves.push(CriticalCurve {
            kind: CriticalCurveKind::SubflowLine,
            label: format!("F_{jx} = 0"),
            coefficients: vec![1.0, a[jx], 2.0 * h * a[jx] * a[jx]],
            param_range: (lo, hi),
            samples,
        });
    }
    // Double-root arc (s1, s2) = 2h (d^2, -2d) for d in [alpha_1, alpha_2];
    // the diagram scales linearly in 2h at fixed shape.
    let scale = 2.0 * h;
    let (d_lo, d_hi) = (a[1], a[2]);
    let samples = (0..=n)
        .map(|k| {
            let d = d_lo + (d_hi - d_lo) * k as f64 / n as f64;
            (scale * d * d, -2.0 * scale * d)
        })
        .collect();
    curves.push(CriticalCurve {
        kind: CriticalCurveKind::DoubleRootCurve,
        label: "double root d in [alpha_1, alpha_2]".to_string(),
        coefficients: vec![d_lo, d_hi],
        param_range: (d_lo, d_hi),
        samples,
    });

    let mut points = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let rec = corank2_eigenvalues(spec, h, (i, j))?;
            points.push(rec);
        }
    }
    // Tangencies of the arc with the middle-axis lines, at d = alpha_i.
    for i in [1usize, 2] {
        points.push(CriticalPointRecord {
            location: EnergyMomentumValue::Generic {
                h,
                s1: scale * a[i] * a[i],
                s2: -2.0 * scale * a[i],
            },
            corank: 1,
            point_type: CriticalPointType::Degenerate,
            eigenvalues: vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        });
    }

    Ok(BifurcationDiagram {
        h,
        curves,
        points,
        annotations: vec![
            "chambers carry 2 or 4 Liouville tori per regular value (unverified annotation)"
                .to_string(),
        ],
    })
}

/// Bifurcation diagram of the equal-middle-axes ellipsoid at energy `h` in
/// the `(j, g)` plane: two boundary parabolas, their corner intersections,
/// and the isolated focus-focus value at the origin.
pub fn symmetric_diagram(spec: &EllipsoidSpec, h: f64) -> Result<BifurcationDiagram> {
    symmetric_diagram_with_samples(spec, h, DEFAULT_CURVE_SAMPLES)
}

pub fn symmetric_diagram_with_samples(
    spec: &EllipsoidSpec,
    h: f64,
    n: usize,
) -> Result<BifurcationDiagram> {
    spec.require_tag(SymmetryTag::EqualMiddle)?;
    if !(h > 0.0) {
        return Err(GeoError::InvalidSpec(format!("diagram needs h > 0, got {h}")));
    }
    let a = spec.alphas();
    let (a0, a1, a3) = (a[0], a[1], a[3]);
    let j_max = (2.0 * a1 * h).sqrt();
    // Lower parabola (F_0 = 0): g = 2 a1 h/(a1 - a3) - a3 j^2/(a1 (a1 - a3)).
    // Upper parabola (F_3 = 0): g = 2 a1 h/(a1 - a0) - a0 j^2/(a1 (a1 - a0)).
    let mut curves = Vec::new();
    for (label, c0, c2) in [
        (
            "F_0 = 0 (lower parabola)",
            2.0 * a1 * h / (a1 - a3),
            -a3 / (a1 * (a1 - a3)),
        ),
        (
            "F_3 = 0 (upper parabola)",
            2.0 * a1 * h / (a1 - a0),
            -a0 / (a1 * (a1 - a0)),
        ),
    ] {
        let samples = (0..=n)
            .map(|k| {
                let j = -j_max + 2.0 * j_max * k as f64 / n as f64;
                (j, c0 + c2 * j * j)
            })
            .collect();
        curves.push(CriticalCurve {
            kind: CriticalCurveKind::BoundaryParabola,
            label: label.to_string(),
            coefficients: vec![c0, c2],
            param_range: (-j_max, j_max),
            samples,
        });
    }

    let mut points = Vec::new();
    let g_corner = 2.0 * a1 * h / (a1 - a3) + (-a3 / (a1 * (a1 - a3))) * j_max * j_max;
    let corner_eigs = corner_eigenvalues(spec, h);
    for sign in [-1.0, 1.0] {
        points.push(CriticalPointRecord {
            location: EnergyMomentumValue::Symmetric {
                h,
                j: sign * j_max,
                g: g_corner,
            },
            corank: 2,
            point_type: CriticalPointType::EllipticElliptic,
            eigenvalues: corner_eigs.clone(),
        });
    }
    points.push(CriticalPointRecord {
        location: EnergyMomentumValue::Symmetric { h, j: 0.0, g: 0.0 },
        corank: 2,
        point_type: CriticalPointType::FocusFocus,
        eigenvalues: focus_focus_eigenvalues(spec, h),
    });

    Ok(BifurcationDiagram {
        h,
        curves,
        points,
        annotations: vec![
            "regular fibres are single 3-tori; the focus-focus fibre is a doubly pinched torus times a circle (unverified annotation)"
                .to_string(),
        ],
    })
}

/// `K_i(u, v) = sum_{k != i} u_k v_k / (alpha_k - alpha_i)`.
fn k_form(spec: &EllipsoidSpec, i: usize, u: &[f64; 4], v: &[f64; 4]) -> f64 {
    let a = spec.alphas();
    (0..4)
        .filter(|&k| k != i)
        .map(|k| u[k] * v[k] / (a[k] - a[i]))
        .sum()
}

/// Classifies a corank-1 critical point on the subflow `x_i = y_i = 0` from
/// the 2x2 linearization sub-block
/// `[[-2 K_i(x,y), 2 (K_i(x,x) - 1)], [-2 K_i(y,y), 2 K_i(x,y)]]`.
pub fn classify_corank1(
    spec: &EllipsoidSpec,
    i: usize,
    p: &PhasePoint,
) -> Result<CriticalPointRecord> {
    spec.require_distinct_axes()?;
    if p.x[i].abs() > 1e-12 || p.y[i].abs() > 1e-12 {
        return Err(GeoError::NotOnSubflow { i, tol: 1e-12 });
    }
    let kxy = k_form(spec, i, &p.x, &p.y);
    let kxx = k_form(spec, i, &p.x, &p.x);
    let kyy = k_form(spec, i, &p.y, &p.y);
    let m = [[-2.0 * kxy, 2.0 * (kxx - 1.0)], [-2.0 * kyy, 2.0 * kxy]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    let (point_type, eigenvalues) = if det.abs() <= 1e-12 * scale * scale {
        (
            CriticalPointType::Degenerate,
            vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        )
    } else if det > 0.0 {
        let w = det.sqrt();
        (
            CriticalPointType::Elliptic,
            vec![C64::new(0.0, w), C64::new(0.0, -w)],
        )
    } else {
        let w = (-det).sqrt();
        (
            CriticalPointType::Hyperbolic,
            vec![C64::new(w, 0.0), C64::new(-w, 0.0)],
        )
    };
    // Critical value: the subflow carries F_i = 0, so (s1, s2) lies on the
    // corresponding line; report the actual constants of the point.
    let f = crate::geometry::uhlenbeck_integrals(spec, p)?;
    let c = crate::separation::separation_constants(spec, &f)?;
    Ok(CriticalPointRecord {
        location: EnergyMomentumValue::Generic {
            h: p.energy(),
            s1: c.s1,
            s2: c.s2,
        },
        corank: 1,
        point_type,
        eigenvalues,
    })
}

/// Eigenvalue generators of a corank-2 point `x_i = y_i = x_j = y_j = 0`:
/// `lambda_i^2 = 8 h alpha_i / ( -(alpha_k - alpha_i)(alpha_l - alpha_i) )`
/// with `{k, l}` the complementary pair.
pub fn corank2_eigenvalues(
    spec: &EllipsoidSpec,
    h: f64,
    pair: (usize, usize),
) -> Result<CriticalPointRecord> {
    spec.require_distinct_axes()?;
    let (i, j) = pair;
    if i >= j || j > 3 {
        return Err(GeoError::InvalidSpec(format!(
            "corank-2 pair must satisfy i < j <= 3, got ({i}, {j})"
        )));
    }
    let a = spec.alphas();
    let comp: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
    let (k, l) = (comp[0], comp[1]);
    let lam_sq = |m: usize| 8.0 * h * a[m] / (-(a[k] - a[m]) * (a[l] - a[m]));
    let mut eigenvalues = Vec::new();
    let mut hyperbolic_count = 0;
    for m in [i, j] {
        let sq = lam_sq(m);
        if sq >= 0.0 {
            hyperbolic_count += 1;
            let w = sq.sqrt();
            eigenvalues.push(C64::new(w, 0.0));
            eigenvalues.push(C64::new(-w, 0.0));
        } else {
            let w = (-sq).sqrt();
            eigenvalues.push(C64::new(0.0, w));
            eigenvalues.push(C64::new(0.0, -w));
        }
    }
    let point_type = match hyperbolic_count {
        0 => CriticalPointType::EllipticElliptic,
        1 => CriticalPointType::EllipticHyperbolic,
        _ => CriticalPointType::HyperbolicHyperbolic,
    };
    Ok(CriticalPointRecord {
        location: EnergyMomentumValue::Generic {
            h,
            s1: 2.0 * h * a[i] * a[j],
            s2: -2.0 * h * (a[i] + a[j]),
        },
        corank: 2,
        point_type,
        eigenvalues,
    })
}

fn corner_eigenvalues(spec: &EllipsoidSpec, h: f64) -> Vec<C64> {
    let a = spec.alphas();
    let (a0, a1, a3) = (a[0], a[1], a[3]);
    let w0 = 2.0 * (2.0 * a0 * h).sqrt() / (a1 - a0);
    let w3 = 2.0 * (2.0 * a3 * h).sqrt() / (a3 - a1);
    vec![
        C64::new(0.0, w0),
        C64::new(0.0, -w0),
        C64::new(0.0, w3),
        C64::new(0.0, -w3),
    ]
}

fn focus_focus_eigenvalues(spec: &EllipsoidSpec, h: f64) -> Vec<C64> {
    let a = spec.alphas();
    let (a0, a1, a3) = (a[0], a[1], a[3]);
    let re = (8.0 * a1 * h / ((a1 - a0) * (a3 - a1))).sqrt();
    vec![
        C64::new(re, 1.0),
        C64::new(re, -1.0),
        C64::new(-re, 1.0),
        C64::new(-re, -1.0),
    ]
}

/// Eigenvalue records of the two special circle families of the symmetric
/// case: the corner relative equilibria (`mu`, `nu` factors set to 1) and the
/// focus-focus circles with their complex quadruplet.
pub fn symmetric_special_eigenvalues(
    spec: &EllipsoidSpec,
    h: f64,
) -> Result<Vec<CriticalPointRecord>> {
    spec.require_tag(SymmetryTag::EqualMiddle)?;
    let a = spec.alphas();
    let a1 = a[1];
    let j_max = (2.0 * a1 * h).sqrt();
    let (_, _, lower_c2) = ("", 2.0 * a1 * h / (a1 - a[3]), -a[3] / (a1 * (a1 - a[3])));
    let g_corner = 2.0 * a1 * h / (a1 - a[3]) + lower_c2 * j_max * j_max;
    Ok(vec![
        CriticalPointRecord {
            location: EnergyMomentumValue::Symmetric {
                h,
                j: j_max,
                g: g_corner,
            },
            corank: 2,
            point_type: CriticalPointType::EllipticElliptic,
            eigenvalues: corner_eigenvalues(spec, h),
        },
        CriticalPointRecord {
            location: EnergyMomentumValue::Symmetric { h, j: 0.0, g: 0.0 },
            corank: 2,
            point_type: CriticalPointType::FocusFocus,
            eigenvalues: focus_focus_eigenvalues(spec, h),
        },
    ])
}

/// Finite-difference Jacobian of the combined `(G + J)`-flow at `p`,
/// `z -> B(z)(grad G + grad J)`, as an 8x8 matrix. At a point of the
/// critical circle `x_1 = x_2 = y_1 = y_2 = 0` its nonzero eigenvalues are
/// the focus-focus quadruplet.
pub fn gj_flow_jacobian(
    spec: &EllipsoidSpec,
    p: &PhasePoint,
    step: f64,
) -> Result<nalgebra::DMatrix<f64>> {
    let field = |q: &PhasePoint| -> Result<[f64; 8]> {
        let gg = crate::geometry::grad_g(spec, q)?;
        let gj = crate::geometry::grad_j(q);
        let mut grad = [0.0; 8];
        for k in 0..8 {
            grad[k] = gg[k] + gj[k];
        }
        crate::geometry::bracket_flow(spec, q, &grad)
    };
    let mut jac = nalgebra::DMatrix::<f64>::zeros(8, 8);
    for c in 0..8 {
        let mut qp = *p;
        let mut qm = *p;
        if c < 4 {
            qp.x[c] += step;
            qm.x[c] -= step;
        } else {
            qp.y[c - 4] += step;
            qm.y[c - 4] -= step;
        }
        let fp = field(&qp)?;
        let fm = field(&qm)?;
        for r in 0..8 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Finite-difference Jacobian of the `(F_i + F_j)`-flow, the generic-case
/// analogue of [`gj_flow_jacobian`] for corank-2 circles.
pub fn ff_flow_jacobian(
    spec: &EllipsoidSpec,
    pair: (usize, usize),
    p: &PhasePoint,
    step: f64,
) -> Result<nalgebra::DMatrix<f64>> {
    let field = |q: &PhasePoint| -> Result<[f64; 8]> {
        let gi = crate::geometry::grad_f(spec, pair.0, q)?;
        let gj = crate::geometry::grad_f(spec, pair.1, q)?;
        let mut grad = [0.0; 8];
        for k in 0..8 {
            grad[k] = gi[k] + gj[k];
        }
        crate::geometry::bracket_flow(spec, q, &grad)
    };
    let mut jac = nalgebra::DMatrix::<f64>::zeros(8, 8);
    for c in 0..8 {
        let mut qp = *p;
        let mut qm = *p;
        if c < 4 {
            qp.x[c] += step;
            qm.x[c] -= step;
        } else {
            qp.y[c - 4] += step;
            qm.y[c - 4] -= step;
        }
        let fp = field(&qp)?;
        let fm = field(&qm)?;
        for r in 0..8 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    Ok(jac)
}
