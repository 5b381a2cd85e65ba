//! Dirichlet problem for the double phase operator, solved by minimizing the
//! (regularized) convex energy with a damped Newton method.

use std::sync::Arc;

use nalgebra::Vector2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear_elliptic::harmonic_extension;
use crate::mesh::{BoundaryData, Mesh, NodalField};
use crate::sparse::{assemble_stiffness, solve_spd, CsrMatrix};
use crate::tensorops::{flux_jacobian_regularized, flux_regularized, ExponentPair, Mat2, Vec2};

/// Full definition of a forward problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub exponents: ExponentPair,
    /// Nonnegative coefficient of the `q`-phase.
    pub a: NodalField,
    /// Final regularization `|grad u|^2 -> |grad u|^2 + delta^2`.
    pub delta: f64,
    /// Relative dual residual at which Newton stops.
    pub newton_tol: f64,
    pub max_iters: usize,
    pub continuation_steps: usize,
}

pub const DEFAULT_DELTA: f64 = 1e-8;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_CONTINUATION_STEPS: usize = 5;

const DELTA_START: f64 = 1e-1;
const STAGE_TOL: f64 = 1e-5;
const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;

impl ProblemSpec {
    pub fn new(exponents: ExponentPair, a: NodalField) -> Self {
        ProblemSpec {
            exponents,
            a,
            delta: DEFAULT_DELTA,
            newton_tol: DEFAULT_NEWTON_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            continuation_steps: DEFAULT_CONTINUATION_STEPS,
        }
    }

    /// The p-Laplace problem: `a = 0`, with a placeholder `q = p + 1`.
    pub fn p_laplace(mesh: Arc<Mesh>, p: f64) -> Result<Self> {
        let e = ExponentPair::new(p, p + 1.0)?;
        Ok(Self::new(e, NodalField::zeros(mesh)))
    }

    /// Same settings with `a = 0`.
    pub fn without_coefficient(&self) -> Self {
        ProblemSpec { a: NodalField::zeros(self.mesh().clone()), ..self.clone() }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.newton_tol = tol;
        self
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.a.mesh()
    }

    pub fn p(&self) -> f64 {
        self.exponents.p
    }

    pub fn q(&self) -> f64 {
        self.exponents.q
    }

    pub fn is_p_laplace(&self) -> bool {
        self.a.values().iter().all(|&v| v == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        ExponentPair::new(self.exponents.p, self.exponents.q)?;
        if let Some(k) = self.a.values().iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidInput(format!("coefficient negative at node {k}")));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidInput("newton_tol must be positive".into()));
        }
        if self.max_iters == 0 || self.continuation_steps == 0 {
            return Err(Error::InvalidInput("iteration counts must be positive".into()));
        }
        Ok(())
    }

    /// Element averages of `a`.
    pub fn a_elements(&self) -> Vec<f64> {
        self.a.element_means()
    }

    /// Regularization levels visited by the continuation.
    pub fn delta_schedule(&self) -> Vec<f64> {
        let target = if self.delta > 0.0 { self.delta } else { DEFAULT_DELTA };
        let n = self.continuation_steps;
        let mut out: Vec<f64> = if n == 1 || target >= DELTA_START {
            vec![target]
        } else {
            let ratio = (target / DELTA_START).powf(1.0 / (n - 1) as f64);
            (0..n).map(|k| if k + 1 == n { target } else { DELTA_START * ratio.powi(k as i32) }).collect()
        };
        if self.delta == 0.0 {
            out.push(0.0);
        }
        out
    }
}

/// Result of [`solve_dirichlet`].
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: NodalField,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-element evaluation of the regularized integrand.
struct Integrand {
    p: f64,
    q: f64,
    delta: f64,
}

impl Integrand {
    fn new(spec: &ProblemSpec, delta: f64) -> Self {
        Integrand { p: spec.p(), q: spec.q(), delta }
    }

    #[inline]
    fn density(&self, a: f64, g: Vec2) -> f64 {
        let s = g.norm_squared() + self.delta * self.delta;
        let mut e = s.powf(0.5 * self.p) / self.p;
        if a != 0.0 {
            e += a * s.powf(0.5 * self.q) / self.q;
        }
        e
    }

    #[inline]
    fn flux(&self, a: f64, g: Vec2) -> Vec2 {
        let mut f = flux_regularized(self.p, g, self.delta);
        if a != 0.0 {
            f += flux_regularized(self.q, g, self.delta) * a;
        }
        f
    }

    #[inline]
    fn jacobian(&self, a: f64, g: Vec2) -> Mat2 {
        let mut d = flux_jacobian_regularized(self.p, g, self.delta);
        if a != 0.0 {
            d += flux_jacobian_regularized(self.q, g, self.delta) * a;
        }
        d
    }
}

fn check_field(spec: &ProblemSpec, u: &NodalField) -> Result<()> {
    u.check_mesh(spec.mesh())
}

/// `F(u) = int |grad u|^p + (p/q) a |grad u|^q` with the regularization of `spec`.
pub fn energy(spec: &ProblemSpec, u: &NodalField) -> Result<f64> {
    check_field(spec, u)?;
    let a = spec.a_elements();
    Ok(spec.p() * scaled_energy(spec.mesh(), &Integrand::new(spec, spec.delta), &a, u.values()))
}

// The minimized functional F / p, whose gradient is the weak residual.
fn scaled_energy(mesh: &Mesh, it: &Integrand, a: &[f64], u: &[f64]) -> f64 {
    let area = mesh.element_area();
    (0..mesh.element_count()).map(|t| area[t] * it.density(a[t], crate::mesh::element_gradient(mesh, u, t))).sum()
}

/// Weak residual over interior nodes together with the per-node scale
/// `sum_T area |flux_T| |grad phi_i|`.
fn residual_and_scale(mesh: &Mesh, it: &Integrand, a: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mesh.interior_nodes().len();
    let mut r = vec![0.0; n];
    let mut s = vec![0.0; n];
    let area = mesh.element_area();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = crate::mesh::element_gradient(mesh, u, t);
        let f = it.flux(a[t], g) * area[t];
        let fnorm = f.norm();
        let sg = mesh.shape_gradients(t);
        for k in 0..3 {
            if let Some(i) = mesh.interior_index(tri[k]) {
                r[i] += f.dot(&sg[k]);
                s[i] += fnorm * sg[k].norm();
            }
        }
    }
    (r, s)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative(r: &[f64], s: &[f64]) -> f64 {
    let sn = norm(s);
    if sn == 0.0 {
        0.0
    } else {
        norm(r) / sn
    }
}

/// Residual vector of the discrete weak form over interior nodes.
pub fn residual_vector(spec: &ProblemSpec, u: &NodalField) -> Result<Vec<f64>> {
    check_field(spec, u)?;
    let a = spec.a_elements();
    Ok(residual_and_scale(spec.mesh(), &Integrand::new(spec, spec.delta), &a, u.values()).0)
}

/// Relative norm of the discrete weak residual.
pub fn weak_residual(spec: &ProblemSpec, u: &NodalField) -> Result<f64> {
    check_field(spec, u)?;
    let a = spec.a_elements();
    let (r, s) = residual_and_scale(spec.mesh(), &Integrand::new(spec, spec.delta), &a, u.values());
    Ok(relative(&r, &s))
}

fn hessian(mesh: &Mesh, it: &Integrand, a: &[f64], u: &[f64]) -> CsrMatrix {
    let d: Vec<Mat2> =
        (0..mesh.element_count()).map(|t| it.jacobian(a[t], crate::mesh::element_gradient(mesh, u, t))).collect();
    assemble_stiffness(mesh, &d)
}

/// Minimize the energy over fields equal to `f` on the boundary.
pub fn solve_dirichlet(spec: &ProblemSpec, f: &BoundaryData) -> Result<Solution> {
    solve_dirichlet_from(spec, f, None)
}

/// [`solve_dirichlet`] with an explicit initial guess; its boundary values
/// are replaced by `f`.
pub fn solve_dirichlet_from(spec: &ProblemSpec, f: &BoundaryData, guess: Option<&NodalField>) -> Result<Solution> {
    spec.validate()?;
    let mesh = spec.mesh().clone();
    f.check(&mesh)?;
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("boundary data"));
    }
    let mut u = match guess {
        Some(g) => {
            check_field(spec, g)?;
            g.with_boundary(f)?
        }
        None => harmonic_extension(&mesh, f)?,
    };

    let a = spec.a_elements();
    let mut stages = spec.delta_schedule();
    if guess.is_some() {
        // A converged warm start needs no continuation.
        let it = Integrand::new(spec, spec.delta);
        let (r, s) = residual_and_scale(&mesh, &it, &a, u.values());
        if relative(&r, &s) <= spec.newton_tol {
            stages = vec![spec.delta];
        }
    }
    let mut iterations = 0;
    let mut last = (f64::INFINITY, false);
    for (k, &delta) in stages.iter().enumerate() {
        let final_stage = k + 1 == stages.len();
        let tol = if final_stage { spec.newton_tol } else { STAGE_TOL.max(spec.newton_tol) };
        let it = Integrand::new(spec, delta);
        let budget = spec.max_iters.saturating_sub(iterations);
        let (used, res, ok) = newton(&mesh, &it, &a, u.values_mut(), tol, budget)?;
        iterations += used;
        last = (res, ok);
        if !ok && (final_stage || iterations >= spec.max_iters) {
            last.1 = false;
            break;
        }
    }

    let energy = spec.p() * scaled_energy(&mesh, &Integrand::new(spec, spec.delta), &a, u.values());
    let residual = {
        let (r, s) = residual_and_scale(&mesh, &Integrand::new(spec, spec.delta), &a, u.values());
        relative(&r, &s)
    };
    if !energy.is_finite() || !residual.is_finite() {
        return Err(Error::NonFinite("forward solve"));
    }
    let converged = last.1 && residual <= spec.newton_tol;
    let sol = Solution { u, energy, residual, iterations, converged };
    if converged {
        Ok(sol)
    } else {
        Err(Error::NotConverged { last: Box::new(sol) })
    }
}

/// Damped Newton on one regularization level. Returns iterations used, the
/// final relative residual and whether `tol` was met.
fn newton(
    mesh: &Mesh,
    it: &Integrand,
    a: &[f64],
    u: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<(usize, f64, bool)> {
    let interior = mesh.interior_nodes();
    let mut trial = u.to_vec();
    let mut e = scaled_energy(mesh, it, a, u);
    for iter in 0..=max_iters {
        let (r, s) = residual_and_scale(mesh, it, a, u);
        let res = relative(&r, &s);
        if !res.is_finite() || !e.is_finite() {
            return Err(Error::NonFinite("newton iteration"));
        }
        if res <= tol {
            return Ok((iter, res, true));
        }
        if iter == max_iters {
            return Ok((iter, res, false));
        }

        let h = hessian(mesh, it, a, u);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut d = vec![0.0; r.len()];
        let forcing = res.min(1e-2);
        let newton_ok = solve_spd(&h, &rhs, &mut d, forcing).is_ok();
        let mut slope: f64 = d.iter().zip(&r).map(|(x, y)| x * y).sum();
        if !newton_ok || !(slope < 0.0) {
            let diag = h.diagonal();
            for ((di, ri), hi) in d.iter_mut().zip(&r).zip(&diag) {
                *di = -ri / if *hi > 0.0 { *hi } else { 1.0 };
            }
            slope = d.iter().zip(&r).map(|(x, y)| x * y).sum();
        }

        let allowance = 10.0 * f64::EPSILON * e.abs();
        let mut alpha = 1.0;
        loop {
            for (k, &node) in interior.iter().enumerate() {
                trial[node] = u[node] + alpha * d[k];
            }
            let et = scaled_energy(mesh, it, a, &trial);
            if et.is_finite() && et <= e + ARMIJO_SLOPE * alpha * slope + allowance {
                u.copy_from_slice(&trial);
                e = et;
                break;
            }
            alpha *= BACKTRACK;
            if alpha < MIN_STEP {
                // No further decrease is representable.
                let (r, s) = residual_and_scale(mesh, it, a, u);
                let res = relative(&r, &s);
                return Ok((iter + 1, res, res <= tol));
            }
        }
    }
    unreachable!()
}

/// Outcome of [`verify_principles`].
#[derive(Clone, Debug, Serialize)]
pub struct PrinciplesReport {
    /// `max(|u_i|_inf - |f_i|_inf)` over both solves; should be `<= 0`.
    pub max_principle_slack: f64,
    /// `|f|_inf` of the larger datum, for relative tolerances.
    pub data_scale: f64,
    /// `min(u1 - u2)`; should be `>= 0`.
    pub comparison_slack: f64,
    /// Smallest `energy(u1 + bump) - energy(u1)` over the bump battery.
    pub local_min_increase: f64,
    pub bumps_tested: usize,
    pub residuals: [f64; 2],
}

impl PrinciplesReport {
    /// Check all three properties with slack `tol * |f|_inf`.
    pub fn holds(&self, tol: f64) -> bool {
        let t = tol * self.data_scale.max(f64::MIN_POSITIVE);
        self.max_principle_slack <= t && self.comparison_slack >= -t && self.local_min_increase >= 0.0
    }
}

/// Solve for ordered data `f1 >= f2` and evaluate the maximum, comparison
/// and local-minimizer properties.
pub fn verify_principles(spec: &ProblemSpec, f1: &BoundaryData, f2: &BoundaryData) -> Result<PrinciplesReport> {
    let mesh = spec.mesh().clone();
    f1.check(&mesh)?;
    f2.check(&mesh)?;
    if let Some(k) = f1.values.iter().zip(&f2.values).position(|(a, b)| a < b) {
        return Err(Error::Ordering { node: mesh.boundary_nodes()[k] });
    }
    let s1 = solve_dirichlet(spec, f1)?;
    let s2 = solve_dirichlet(spec, f2)?;
    let mp = (s1.u.max_abs() - f1.max_abs()).max(s2.u.max_abs() - f2.max_abs());
    let comparison = s1.u.values().iter().zip(s2.u.values()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);

    let scale = f1.max_abs().max(f2.max_abs());
    let amp = 1e-2 * scale.max(1e-8);
    let (increase, count) = local_min_battery(spec, &s1.u, amp, 16)?;
    Ok(PrinciplesReport {
        max_principle_slack: mp,
        data_scale: scale,
        comparison_slack: if comparison.is_finite() { comparison } else { 0.0 },
        local_min_increase: increase,
        bumps_tested: count,
        residuals: [s1.residual, s2.residual],
    })
}

/// Smallest energy increase over `u +- amp * hat_k` for up to `max_bumps`
/// interior hat functions spread over the mesh.
pub fn local_min_battery(spec: &ProblemSpec, u: &NodalField, amp: f64, max_bumps: usize) -> Result<(f64, usize)> {
    let e0 = energy(spec, u)?;
    let interior = spec.mesh().interior_nodes();
    if interior.is_empty() {
        return Ok((0.0, 0));
    }
    let stride = (interior.len() / max_bumps.max(1)).max(1);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for &node in interior.iter().step_by(stride).take(max_bumps) {
        for sign in [1.0, -1.0] {
            let mut w = u.clone();
            w.values_mut()[node] += sign * amp;
            worst = worst.min(energy(spec, &w)? - e0);
            count += 1;
        }
    }
    Ok((worst, count))
}

/// Minimum element gradient magnitude of `u`.
pub fn min_gradient(u: &NodalField) -> f64 {
    u.gradient().iter().map(Vector2::norm).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_values, Domain};
    use crate::tensorops::ExponentPair;

    fn mesh(n: usize) -> Arc<Mesh> {
        Mesh::uniform(n, n, Domain::unit_square()).unwrap()
    }

    fn spec(m: &Arc<Mesh>, p: f64, q: f64, a: f64) -> ProblemSpec {
        ProblemSpec::new(ExponentPair::new(p, q).unwrap(), NodalField::constant(m.clone(), a))
    }

    #[test]
    fn energy_examples() {
        let m = mesh(8);
        let s = spec(&m, 3.0, 2.0, 0.7).with_delta(0.0);
        assert_eq!(energy(&s, &NodalField::constant(m.clone(), 2.0)).unwrap(), 0.0);
        let z = Vector2::new(0.6, 0.8);
        let e = energy(&s, &NodalField::plane_wave(m, z)).unwrap();
        assert!((e - (1.0 + 1.5 * 0.7)).abs() < 1e-12);
    }

    #[test]
    fn delta_schedule_shape() {
        let m = mesh(2);
        let s = spec(&m, 3.0, 2.0, 0.0);
        let d = s.delta_schedule();
        assert_eq!(d.len(), DEFAULT_CONTINUATION_STEPS);
        assert_eq!(d[0], DELTA_START);
        assert_eq!(*d.last().unwrap(), DEFAULT_DELTA);
        let d0 = s.with_delta(0.0).delta_schedule();
        assert_eq!(*d0.last().unwrap(), 0.0);
    }

    #[test]
    fn plane_wave_is_reproduced() {
        let m = mesh(12);
        let z = Vector2::new(0.6, -0.8);
        for p in [1.5, 2.0, 3.5] {
            let s = ProblemSpec::p_laplace(m.clone(), p).unwrap();
            let f = boundary_values(&m, |x| z.dot(x));
            let sol = solve_dirichlet(&s, &f).unwrap();
            let exact = NodalField::plane_wave(m.clone(), z);
            let err = sol.u.add_scaled(-1.0, &exact).max_abs();
            assert!(err <= 10.0 * s.newton_tol, "p={p} err={err}");
            assert_eq!(sol.u.trace(), f);
        }
    }

    #[test]
    fn solving_reduces_residual_and_energy() {
        let m = mesh(10);
        let s = spec(&m, 2.5, 4.0, 0.5);
        let f = boundary_values(&m, |x| (3.0 * x.x).sin() + x.y * x.y);
        let start = harmonic_extension(&m, &f).unwrap();
        let sol = solve_dirichlet(&s, &f).unwrap();
        assert!(sol.converged && sol.residual <= s.newton_tol);
        assert!(weak_residual(&s, &start).unwrap() > sol.residual);
        assert!(energy(&s, &start).unwrap() >= sol.energy);
    }

    #[test]
    fn ordering_is_checked() {
        let m = mesh(4);
        let s = spec(&m, 2.0, 3.0, 0.0);
        let f1 = boundary_values(&m, |x| x.x);
        let f2 = boundary_values(&m, |x| x.x + 0.1);
        assert!(matches!(verify_principles(&s, &f1, &f2), Err(Error::Ordering { .. })));
    }

    #[test]
    fn nonconvergence_carries_last_iterate() {
        let m = mesh(8);
        let mut s = spec(&m, 3.0, 2.0, 1.0);
        s.max_iters = 1;
        let f = boundary_values(&m, |x| (5.0 * x.x).sin() * x.y);
        match solve_dirichlet(&s, &f) {
            Err(Error::NotConverged { last }) => {
                assert!(!last.converged);
                assert_eq!(last.u.trace(), f);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_coefficient() {
        let m = mesh(4);
        let s = spec(&m, 2.0, 3.0, -1.0);
        let f = boundary_values(&m, |x| x.x);
        assert!(matches!(solve_dirichlet(&s, &f), Err(Error::InvalidInput(_))));
    }
}
