//! Pointwise calculus of the flux `J^r(xi) = |xi|^(r-2) xi` and the
//! matrices built from it.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// One symmetric 2x2 matrix per element.
pub type MatrixField = Vec<Mat2>;

/// Third-order tensor indexed `[i][j][k]`.
pub type Tensor3 = [[[f64; 2]; 2]; 2];

/// Exponents `1 < p != q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
}

impl ExponentPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidInput(format!("exponents must exceed 1, got p={p}, q={q}")));
        }
        if p == q {
            return Err(Error::InvalidInput(format!("exponents must differ, got p=q={p}")));
        }
        Ok(ExponentPair { p, q })
    }

    /// Power of the corrector, `1 + q - p`.
    pub fn corrector_power(&self) -> f64 {
        1.0 + self.q - self.p
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("exponent must exceed 1, got {r}")))
    }
}

/// `|xi|^(r-2) xi`, continued by zero at the origin.
pub fn flux(r: f64, xi: Vec2) -> Vec2 {
    flux_flagged(r, xi).0
}

/// [`flux`] together with a flag that is set when `xi = 0` and `r < 2`,
/// where the formula itself is singular.
pub fn flux_flagged(r: f64, xi: Vec2) -> (Vec2, bool) {
    let n = xi.norm();
    if n == 0.0 {
        return (Vec2::zeros(), r < 2.0);
    }
    (xi * n.powf(r - 2.0), false)
}

/// `(|xi|^2 + delta^2)^((r-2)/2) xi`
#[inline]
pub fn flux_regularized(r: f64, xi: Vec2, delta: f64) -> Vec2 {
    let s = xi.norm_squared() + delta * delta;
    if s == 0.0 {
        return Vec2::zeros();
    }
    xi * s.powf(0.5 * (r - 2.0))
}

/// Jacobian of [`flux_regularized`]; symmetric positive definite for `delta > 0`.
#[inline]
pub fn flux_jacobian_regularized(r: f64, xi: Vec2, delta: f64) -> Mat2 {
    let s = xi.norm_squared() + delta * delta;
    if s == 0.0 {
        return if r == 2.0 { Mat2::identity() } else { Mat2::zeros() };
    }
    let w = s.powf(0.5 * (r - 2.0));
    (Mat2::identity() + xi * xi.transpose() * ((r - 2.0) / s)) * w
}

/// `|xi|^(r-2) (1 + (r-2) xi xi^T / |xi|^2)`.
pub fn flux_jacobian(r: f64, xi: Vec2) -> Result<Mat2> {
    check_r(r)?;
    let n2 = xi.norm_squared();
    if n2 == 0.0 {
        return Err(Error::DegenerateGradient { element: 0, magnitude: 0.0 });
    }
    Ok(flux_jacobian_regularized(r, xi, 0.0))
}

/// Second derivatives `d_i d_j J_k`.
pub fn flux_hessian(r: f64, xi: Vec2) -> Result<Tensor3> {
    check_r(r)?;
    let n2 = xi.norm_squared();
    if n2 == 0.0 {
        return Err(Error::DegenerateGradient { element: 0, magnitude: 0.0 });
    }
    let n = n2.sqrt();
    let c1 = (r - 2.0) * n.powf(r - 4.0);
    let c2 = (r - 2.0) * (r - 4.0) * n.powf(r - 6.0);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut h = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                h[i][j][k] = c1 * (xi[i] * d(k, j) + xi[j] * d(k, i) + xi[k] * d(i, j)) + c2 * xi[i] * xi[j] * xi[k];
            }
        }
    }
    Ok(h)
}

/// Elementwise `A^r_v = D J^r(grad v)`.
pub fn a_matrix(r: f64, grad_v: &[Vec2]) -> Result<MatrixField> {
    check_r(r)?;
    grad_v
        .iter()
        .enumerate()
        .map(|(t, g)| {
            if g.norm_squared() == 0.0 || !g.norm().is_finite() {
                Err(Error::DegenerateGradient { element: t, magnitude: g.norm() })
            } else {
                Ok(flux_jacobian_regularized(r, *g, 0.0))
            }
        })
        .collect()
}

/// Lower bound `min(1, r-1) |g|^(r-2)` on the spectrum of `D J^r(g)`.
pub fn ellipticity_bound(r: f64, g: Vec2) -> f64 {
    (r - 1.0).min(1.0) * g.norm().powf(r - 2.0)
}

/// Directional derivative of `D J^p` at `g0` in direction `gv`.
pub fn a_dot_point(p: f64, g0: Vec2, gv: Vec2) -> Mat2 {
    let n2 = g0.norm_squared();
    let w = (p - 2.0) * n2.powf(0.5 * (p - 4.0));
    let s = g0.dot(&gv);
    let id = Mat2::identity();
    let outer = g0 * g0.transpose() / n2;
    (id + outer * (p - 4.0)) * (w * s) + (g0 * gv.transpose() + gv * g0.transpose()) * w
}

/// Elementwise `A-dot^p_{v0}(V)`, linear in `grad_vv`.
pub fn a_dot(p: f64, grad_v0: &[Vec2], grad_vv: &[Vec2]) -> Result<MatrixField> {
    check_r(p)?;
    if grad_v0.len() != grad_vv.len() {
        return Err(Error::LengthMismatch { expected: grad_v0.len(), got: grad_vv.len() });
    }
    grad_v0
        .iter()
        .zip(grad_vv)
        .enumerate()
        .map(|(t, (g0, gv))| {
            if g0.norm_squared() == 0.0 {
                Err(Error::DegenerateGradient { element: t, magnitude: 0.0 })
            } else {
                Ok(a_dot_point(p, *g0, *gv))
            }
        })
        .collect()
}

/// Evaluations of the four vector inequalities for one sample `(r, x, y)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonotonicityReport {
    /// `|x|^r - |y|^r - r |y|^(r-2) y . (x - y)`, nonnegative by convexity.
    pub convexity_slack: f64,
    pub convexity_holds: bool,
    /// `(J(x) - J(y)) . (x - y)`.
    pub pairing: f64,
    /// `2^(2-r) |x-y|^r` for `r >= 2`, `(r-1) |x-y|^2 (|x|+|y|)^(r-2)` below.
    pub pairing_bound: f64,
    /// `pairing / pairing_bound`; for `r < 2` this is the empirical constant.
    pub pairing_ratio: f64,
    pub pairing_holds: bool,
    /// `|J(x) - J(y)| / ((|x|+|y|)^(r-2) |x-y|)`.
    pub difference_ratio: f64,
    pub difference_holds: bool,
    /// `r (|x|^(r-1) + |y|^(r-1)) |x-y| - ||x|^r - |y|^r|`.
    pub power_slack: f64,
    pub power_holds: bool,
}

const REL_TOL: f64 = 1e-12;

pub fn monotonicity_report(r: f64, x: Vec2, y: Vec2) -> MonotonicityReport {
    let (nx, ny) = (x.norm(), y.norm());
    let d = x - y;
    let nd = d.norm();
    let (jx, jy) = (flux(r, x), flux(r, y));

    let xr = nx.powf(r);
    let yr = ny.powf(r);
    let lin = r * jy.dot(&d);
    let convexity_slack = xr - yr - lin;
    let scale = xr.abs() + yr.abs() + lin.abs();
    let convexity_holds = convexity_slack >= -REL_TOL * scale;

    let pairing = (jx - jy).dot(&d);
    let sum = nx + ny;
    let pairing_bound = if nd == 0.0 {
        0.0
    } else if r >= 2.0 {
        2f64.powf(2.0 - r) * nd.powf(r)
    } else {
        (r - 1.0) * nd * nd * sum.powf(r - 2.0)
    };
    let pairing_ratio = if pairing_bound > 0.0 { pairing / pairing_bound } else { f64::NAN };
    let pairing_holds = if nd == 0.0 {
        pairing == 0.0
    } else {
        let strict = pairing > 0.0;
        if r >= 2.0 {
            strict && pairing >= pairing_bound * (1.0 - REL_TOL)
        } else {
            strict
        }
    };

    let jd = (jx - jy).norm();
    let difference_ratio = if nd == 0.0 { 0.0 } else { jd / (sum.powf(r - 2.0) * nd) };
    // For r >= 2 the mean value theorem gives the constant r - 1.
    let difference_holds = difference_ratio.is_finite() && (r < 2.0 || difference_ratio <= (r - 1.0) * (1.0 + REL_TOL));

    let rhs = r * (nx.powf(r - 1.0) + ny.powf(r - 1.0)) * nd;
    let lhs = (xr - yr).abs();
    let power_slack = rhs - lhs;
    let power_holds = power_slack >= -REL_TOL * (rhs + lhs);

    MonotonicityReport {
        convexity_slack,
        convexity_holds,
        pairing,
        pairing_bound,
        pairing_ratio,
        pairing_holds,
        difference_ratio,
        difference_holds,
        power_slack,
        power_holds,
    }
}

impl MonotonicityReport {
    pub fn all_hold(&self) -> bool {
        self.convexity_holds && self.pairing_holds && self.difference_holds && self.power_holds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn flux_examples() {
        assert_eq!(flux(2.0, Vec2::new(1.5, -2.0)), Vec2::new(1.5, -2.0));
        let f = flux(3.0, Vec2::new(3.0, 4.0));
        assert!((f - Vec2::new(15.0, 20.0)).norm() < 1e-12);
        assert_eq!(flux(1.5, Vec2::new(1.0, 0.0)), Vec2::new(1.0, 0.0));
        let (z, flag) = flux_flagged(1.5, Vec2::zeros());
        assert_eq!(z, Vec2::zeros());
        assert!(flag);
        assert!(!flux_flagged(3.0, Vec2::zeros()).1);
    }

    #[test]
    fn jacobian_examples() {
        let xi = Vec2::new(0.3, -7.0);
        assert!((flux_jacobian(2.0, xi).unwrap() - Mat2::identity()).norm() < 1e-14);
        let z = Vec2::new(0.6, 0.8);
        for p in [1.5, 3.0, 4.2] {
            let a = flux_jacobian(p, z).unwrap();
            let expected = Mat2::identity() + z * z.transpose() * (p - 2.0);
            assert!((a - expected).norm() < 1e-12);
        }
        assert!(flux_jacobian(3.0, Vec2::zeros()).is_err());
    }

    #[test]
    fn jacobian_matches_central_difference() {
        let (r, xi) = (3.7, Vec2::new(0.4, -1.1));
        let a = flux_jacobian(r, xi).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut e = Vec2::zeros();
            e[j] = h;
            let col = (flux(r, xi + e) - flux(r, xi - e)) / (2.0 * h);
            for i in 0..2 {
                assert!(close(a[(i, j)], col[i], 1e-6));
            }
        }
    }

    #[test]
    fn jacobian_eigenpairs() {
        let (r, xi) = (1.4, Vec2::new(-0.7, 2.0));
        let a = flux_jacobian(r, xi).unwrap();
        let n = xi.norm();
        let perp = Vec2::new(-xi.y, xi.x);
        assert!((a * xi - xi * ((r - 1.0) * n.powf(r - 2.0))).norm() < 1e-12);
        assert!((a * perp - perp * n.powf(r - 2.0)).norm() < 1e-12);
    }

    #[test]
    fn hessian_examples() {
        let h = flux_hessian(2.0, Vec2::new(1.0, 2.0)).unwrap();
        assert!(h.iter().flatten().flatten().all(|&v| v == 0.0));
        let h = flux_hessian(4.0, Vec2::new(1.0, 0.0)).unwrap();
        assert!((h[0][0][0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn a_matrix_plane_wave_and_degeneracy() {
        let z = Vec2::new(0.8, -0.6);
        let m = a_matrix(3.0, &[z; 4]).unwrap();
        let expected = Mat2::identity() + z * z.transpose();
        assert!(m.iter().all(|a| (a - expected).norm() < 1e-12));
        let id = a_matrix(2.0, &[Vec2::new(2.0, 1.0)]).unwrap();
        assert!((id[0] - Mat2::identity()).norm() < 1e-14);
        match a_matrix(3.0, &[z, z, Vec2::zeros()]) {
            Err(Error::DegenerateGradient { element, .. }) => assert_eq!(element, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn a_matrix_satisfies_ellipticity_bound() {
        // v = x + 0.1 x^2 sampled on [0, 1]
        for r in [1.5, 2.5, 4.0] {
            let grads: Vec<Vec2> = (0..50).map(|k| Vec2::new(1.0 + 0.2 * k as f64 / 49.0, 0.0)).collect();
            let a = a_matrix(r, &grads).unwrap();
            for (m, g) in a.iter().zip(&grads) {
                let lam = m.symmetric_eigenvalues().min();
                assert!(lam >= ellipticity_bound(r, *g) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn a_dot_examples() {
        let g0 = Vec2::new(0.6, 0.8);
        let gv = Vec2::new(-1.3, 2.1);
        assert_eq!(a_dot(2.0, &[g0], &[gv]).unwrap()[0], Mat2::zeros());
        for p in [1.5, 3.0, 5.5] {
            let s = g0.dot(&gv);
            let expected = (Mat2::identity() * s
                + g0 * g0.transpose() * ((p - 4.0) * s)
                + g0 * gv.transpose()
                + gv * g0.transpose())
                * (p - 2.0);
            assert!((a_dot_point(p, g0, gv) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn a_dot_matches_difference_quotient() {
        let (p, g0, gv) = (3.3, Vec2::new(0.5, -1.2), Vec2::new(0.9, 0.4));
        let dq = |t: f64| (flux_jacobian(p, g0 + gv * t).unwrap() - flux_jacobian(p, g0 - gv * t).unwrap()) / (2.0 * t);
        let (d1, d2) = (dq(1e-3), dq(5e-4));
        let rich = (d2 * 4.0 - d1) / 3.0;
        let exact = a_dot_point(p, g0, gv);
        assert!((rich - exact).norm() <= 1e-5 * exact.norm());
    }

    #[test]
    fn report_edge_cases() {
        let x = Vec2::new(0.3, 1.1);
        let rep = monotonicity_report(3.0, x, x);
        assert_eq!(rep.pairing, 0.0);
        assert!(rep.convexity_slack.abs() < 1e-14);
        assert!(rep.all_hold());
        let y = Vec2::new(-2.0, 0.5);
        let rep = monotonicity_report(2.0, x, y);
        assert!((rep.pairing - (x - y).norm_squared()).abs() < 1e-12);
    }

    fn vec2() -> impl Strategy<Value = Vec2> {
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| Vec2::new(a, b))
    }

    proptest! {
        #[test]
        fn euler_homogeneity(r in 1.05..6.0f64, xi in vec2()) {
            prop_assume!(xi.norm() > 1e-3);
            let lhs = flux_jacobian(r, xi).unwrap() * xi;
            let rhs = flux(r, xi) * (r - 1.0);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn hessian_is_symmetric_and_matches_jacobian(r in 1.1..6.0f64, xi in vec2()) {
            prop_assume!(xi.norm() > 0.1);
            let h = flux_hessian(r, xi).unwrap();
            let scale = h.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..2 { for j in 0..2 { for k in 0..2 {
                prop_assert!((h[i][j][k] - h[j][i][k]).abs() <= 1e-12 * scale.max(1.0));
                prop_assert!((h[i][j][k] - h[i][k][j]).abs() <= 1e-12 * scale.max(1.0));
            }}}
            let step = 1e-5 * xi.norm();
            for i in 0..2 {
                let mut e = Vec2::zeros();
                e[i] = step;
                let fd = (flux_jacobian(r, xi + e).unwrap() - flux_jacobian(r, xi - e).unwrap()) / (2.0 * step);
                for j in 0..2 { for k in 0..2 {
                    prop_assert!((fd[(j, k)] - h[i][j][k]).abs() <= 1e-5 * scale.max(1e-300));
                }}
            }
        }

        #[test]
        fn a_dot_is_linear(p in 1.2..5.0f64, g0 in vec2(), u in vec2(), w in vec2(), s in -4.0..4.0f64) {
            prop_assume!(g0.norm() > 0.05);
            let lhs = a_dot_point(p, g0, u + w * s);
            let rhs = a_dot_point(p, g0, u) + a_dot_point(p, g0, w) * s;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
            let m = a_dot_point(p, g0, u);
            prop_assert!((m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm()));
        }

        #[test]
        fn inequalities_hold(r in 1.05..6.0f64, x in vec2(), y in vec2()) {
            let rep = monotonicity_report(r, x, y);
            prop_assert!(rep.all_hold(), "{rep:?}");
            if r < 2.0 && (x - y).norm() > 0.0 {
                prop_assert!(rep.pairing_ratio >= 1.0 - 1e-9);
            }
        }
    }
}
