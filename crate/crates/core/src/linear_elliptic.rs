//! Linear problems `Div(A grad R) = -Div F` in weak form
//! `int A grad R . grad phi = int F . grad phi`.

use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::forward::ProblemSpec;
use crate::mesh::{element_gradient, BoundaryData, ComplexBoundaryData, ComplexNodalField, Mesh, NodalField};
use crate::sparse::{assemble_stiffness, solve_spd};
use crate::tensorops::{a_dot, a_matrix, Mat2, MatrixField, Vec2};

/// Relative tolerance of every linear solve.
pub const LINEAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LinearProblem {
    mesh: Arc<Mesh>,
    a: MatrixField,
    f: Vec<Vec2>,
    g: BoundaryData,
}

impl LinearProblem {
    /// Checks that every `A_T` is symmetric positive definite.
    pub fn new(mesh: Arc<Mesh>, a: MatrixField, f: Vec<Vec2>, g: BoundaryData) -> Result<Self> {
        let ne = mesh.element_count();
        if a.len() != ne {
            return Err(Error::LengthMismatch { expected: ne, got: a.len() });
        }
        if f.len() != ne {
            return Err(Error::LengthMismatch { expected: ne, got: f.len() });
        }
        g.check(&mesh)?;
        for (t, m) in a.iter().enumerate() {
            let asym = (m[(0, 1)] - m[(1, 0)]).abs();
            if asym > 1e-12 * m.norm() || !m.iter().all(|v| v.is_finite()) {
                return Err(Error::NotElliptic { element: t, min_eigenvalue: f64::NAN });
            }
            let lam = m.symmetric_eigenvalues().min();
            if !(lam > 0.0) {
                return Err(Error::NotElliptic { element: t, min_eigenvalue: lam });
            }
        }
        if f.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::NonFinite("flux load"));
        }
        Ok(LinearProblem { mesh, a, f, g })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Weak residual `int A grad R . grad phi_i - int F . grad phi_i` over
    /// interior nodes, together with the norm of the load part.
    pub fn residual(&self, r: &NodalField) -> (Vec<f64>, f64) {
        let m = &*self.mesh;
        let n = m.interior_nodes().len();
        let mut res = vec![0.0; n];
        let mut load = vec![0.0; n];
        for (t, tri) in m.triangles().iter().enumerate() {
            let area = m.element_area()[t];
            let flux = self.a[t] * element_gradient(m, r.values(), t) * area;
            let f = self.f[t] * area;
            let sg = m.shape_gradients(t);
            for k in 0..3 {
                if let Some(i) = m.interior_index(tri[k]) {
                    res[i] += (flux - f).dot(&sg[k]);
                    load[i] += f.dot(&sg[k]);
                }
            }
        }
        let ln = load.iter().map(|v| v * v).sum::<f64>().sqrt();
        (res, ln)
    }
}

pub fn solve_linear(problem: &LinearProblem) -> Result<NodalField> {
    let m = &*problem.mesh;
    let mut lift = NodalField::zeros(problem.mesh.clone()).with_boundary(&problem.g)?;
    let n = m.interior_nodes().len();
    let mut b = vec![0.0; n];
    for (t, tri) in m.triangles().iter().enumerate() {
        let area = m.element_area()[t];
        let w = (problem.f[t] - problem.a[t] * element_gradient(m, lift.values(), t)) * area;
        let sg = m.shape_gradients(t);
        for k in 0..3 {
            if let Some(i) = m.interior_index(tri[k]) {
                b[i] += w.dot(&sg[k]);
            }
        }
    }
    let k = assemble_stiffness(m, &problem.a);
    let mut x = vec![0.0; n];
    solve_spd(&k, &b, &mut x, LINEAR_TOL)?;
    let vals = lift.values_mut();
    for (&node, xi) in m.interior_nodes().iter().zip(&x) {
        vals[node] = *xi;
    }
    Ok(lift)
}

/// Discrete harmonic extension of boundary data.
pub fn harmonic_extension(mesh: &Arc<Mesh>, g: &BoundaryData) -> Result<NodalField> {
    let ne = mesh.element_count();
    let problem = LinearProblem::new(mesh.clone(), vec![Matrix2::identity(); ne], vec![Vec2::zeros(); ne], g.clone())?;
    solve_linear(&problem)
}

/// Corrector `R_v`: `Div(A^p_v grad R) = -Div(a |grad v|^(q-2) grad v)`, `R = 0` on the boundary.
pub fn solve_r(spec: &ProblemSpec, v: &NodalField) -> Result<NodalField> {
    let (problem, _) = r_problem(spec, v)?;
    solve_linear(&problem)
}

/// The linear problem behind [`solve_r`] and the matrix `A^p_v`.
pub fn r_problem(spec: &ProblemSpec, v: &NodalField) -> Result<(LinearProblem, MatrixField)> {
    v.check_mesh(spec.mesh())?;
    let mesh = spec.mesh().clone();
    let gv = v.gradient();
    let ap = a_matrix(spec.p(), &gv)?;
    let a = spec.a_elements();
    let q = spec.q();
    let f: Vec<Vec2> = gv.iter().zip(&a).map(|(g, at)| -crate::tensorops::flux(q, *g) * *at).collect();
    let zero = BoundaryData { values: vec![0.0; mesh.boundary_nodes().len()] };
    Ok((LinearProblem::new(mesh, ap.clone(), f, zero)?, ap))
}

/// Linearized p-Laplace solution `Div(A^p_{v0} grad V) = 0`, `V = phi` on the boundary.
pub fn solve_v(p: f64, v0: &NodalField, phi: &BoundaryData) -> Result<NodalField> {
    let mesh = v0.mesh().clone();
    let ap = a_matrix(p, &v0.gradient())?;
    let f = vec![Vec2::zeros(); mesh.element_count()];
    solve_linear(&LinearProblem::new(mesh, ap, f, phi.clone())?)
}

/// Complex data, solved part by part.
pub fn solve_v_complex(p: f64, v0: &NodalField, phi: &ComplexBoundaryData) -> Result<ComplexNodalField> {
    let re = solve_v(p, v0, &phi.re())?;
    let im = solve_v(p, v0, &phi.im())?;
    ComplexNodalField::new(re, im)
}

/// `R-dot`: `Div(A^p grad R') = -Div(A-dot(V) grad R_{v0}) - Div(a A^q grad V)`, zero on the boundary.
pub fn solve_rdot(spec: &ProblemSpec, v0: &NodalField, vv: &NodalField, r_v0: &NodalField) -> Result<NodalField> {
    v0.check_mesh(spec.mesh())?;
    vv.check_mesh(spec.mesh())?;
    r_v0.check_mesh(spec.mesh())?;
    let mesh = spec.mesh().clone();
    let g0 = v0.gradient();
    let gv = vv.gradient();
    let gr = r_v0.gradient();
    let ap = a_matrix(spec.p(), &g0)?;
    let aq = a_matrix(spec.q(), &g0)?;
    let ad = a_dot(spec.p(), &g0, &gv)?;
    let a = spec.a_elements();
    let f: Vec<Vec2> = (0..mesh.element_count()).map(|t| -(ad[t] * gr[t] + aq[t] * gv[t] * a[t])).collect();
    let zero = BoundaryData { values: vec![0.0; mesh.boundary_nodes().len()] };
    solve_linear(&LinearProblem::new(mesh, ap, f, zero)?)
}

/// Relative Galerkin residual of `r` for `problem`.
pub fn galerkin_residual(problem: &LinearProblem, r: &NodalField) -> f64 {
    let (res, load) = problem.residual(r);
    let n = res.iter().map(|v| v * v).sum::<f64>().sqrt();
    if load > 0.0 {
        n / load
    } else {
        n
    }
}

/// Constant anisotropic matrix `1 + (p-2) z z^T`.
pub fn plane_wave_matrix(p: f64, z: Vec2) -> Mat2 {
    Mat2::identity() + z * z.transpose() * (p - 2.0)
}
