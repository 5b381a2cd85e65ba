//! Uniform P1 triangulations of a rectangle and the piecewise-linear fields
//! living on them.
//!
//! Nodes are numbered row by row (`j * (nx + 1) + i`). Every grid cell is
//! split along its lower-left to upper-right diagonal into two right
//! triangles with axis-aligned legs, so all angles are at most 90 degrees and
//! the P1 Laplacian is an M-matrix.

use std::sync::{Arc, OnceLock};

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::InteriorPattern;

pub type Point = Vector2<f64>;

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let d = Domain { x_min, x_max, y_min, y_max };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_square() -> Self {
        Domain { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::DegenerateDomain(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        x.x >= self.x_min - tol && x.x <= self.x_max + tol && x.y >= self.y_min - tol && x.y <= self.y_max + tol
    }

    /// Grow every side by `margin` times the corresponding side length.
    pub fn expanded(&self, margin: f64) -> Domain {
        let dx = margin * self.width();
        let dy = margin * self.height();
        Domain { x_min: self.x_min - dx, x_max: self.x_max + dx, y_min: self.y_min - dy, y_max: self.y_max + dy }
    }
}

/// Edge-midpoint rule: exact for quadratics, equal weights `area / 3`.
pub const EDGE_MIDPOINTS: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

// Symmetric 6-point rule of degree 4 (barycentric coordinates, weights sum to one).
const SIX_POINT: [([f64; 3], f64); 6] = [
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
];

/// Immutable structured triangulation.
pub struct Mesh {
    domain: Domain,
    nx: usize,
    ny: usize,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    element_area: Vec<f64>,
    shape_grads: Vec<[Vector2<f64>; 3]>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
    interior_index: Vec<Option<usize>>,
    boundary_index: Vec<Option<usize>>,
    pattern: OnceLock<Arc<InteriorPattern>>,
}

impl std::fmt::Debug for Mesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mesh")
            .field("domain", &self.domain)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish_non_exhaustive()
    }
}

/// Build the uniform `nx` by `ny` triangulation of `domain`.
pub fn build_mesh(nx: usize, ny: usize, domain: Domain) -> Result<Arc<Mesh>> {
    Mesh::uniform(nx, ny, domain)
}

impl Mesh {
    pub fn uniform(nx: usize, ny: usize, domain: Domain) -> Result<Arc<Mesh>> {
        domain.validate()?;
        if nx == 0 || ny == 0 {
            return Err(Error::DegenerateDomain(format!("grid {nx}x{ny}")));
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let node_id = |i: usize, j: usize| j * (nx + 1) + i;

        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // Pin the last row/column to the exact domain edge.
                let x = if i == nx { domain.x_max } else { domain.x_min + i as f64 * hx };
                let y = if j == ny { domain.y_max } else { domain.y_min + j as f64 * hy };
                nodes.push(Point::new(x, y));
            }
        }

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n00 = node_id(i, j);
                let n10 = node_id(i + 1, j);
                let n01 = node_id(i, j + 1);
                let n11 = node_id(i + 1, j + 1);
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            }
        }

        let mut element_area = Vec::with_capacity(triangles.len());
        let mut shape_grads = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let (p0, p1, p2) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            let e1 = p1 - p0;
            let e2 = p2 - p0;
            let det = e1.x * e2.y - e1.y * e2.x;
            if det <= 0.0 {
                return Err(Error::DegenerateDomain("non-positive element area".into()));
            }
            element_area.push(0.5 * det);
            // Gradients of the barycentric coordinates.
            let g1 = Vector2::new(e2.y, -e2.x) / det;
            let g2 = Vector2::new(-e1.y, e1.x) / det;
            shape_grads.push([-g1 - g2, g1, g2]);
        }

        let n = nodes.len();
        let mut boundary_nodes = Vec::new();
        let mut interior_nodes = Vec::new();
        let mut interior_index = vec![None; n];
        let mut boundary_index = vec![None; n];
        for j in 0..=ny {
            for i in 0..=nx {
                let k = node_id(i, j);
                if i == 0 || j == 0 || i == nx || j == ny {
                    boundary_index[k] = Some(boundary_nodes.len());
                    boundary_nodes.push(k);
                } else {
                    interior_index[k] = Some(interior_nodes.len());
                    interior_nodes.push(k);
                }
            }
        }

        Ok(Arc::new(Mesh {
            domain,
            nx,
            ny,
            nodes,
            triangles,
            element_area,
            shape_grads,
            boundary_nodes,
            interior_nodes,
            interior_index,
            boundary_index,
            pattern: OnceLock::new(),
        }))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cells(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Largest leg length of the grid cells.
    pub fn h(&self) -> f64 {
        (self.domain.width() / self.nx as f64).max(self.domain.height() / self.ny as f64)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn element_area(&self) -> &[f64] {
        &self.element_area
    }

    /// Gradients of the three local hat functions on element `t`.
    pub fn shape_gradients(&self, t: usize) -> &[Vector2<f64>; 3] {
        &self.shape_grads[t]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    /// Position of `node` in the interior unknown vector.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    /// Position of `node` in [`BoundaryData`] vectors.
    pub fn boundary_index(&self, node: usize) -> Option<usize> {
        self.boundary_index[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_index[node].is_some()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        (self.nodes[a] + self.nodes[b] + self.nodes[c]) / 3.0
    }

    /// Point with barycentric coordinates `bary` in element `t`.
    pub fn barycentric_point(&self, t: usize, bary: &[f64; 3]) -> Point {
        let [a, b, c] = self.triangles[t];
        self.nodes[a] * bary[0] + self.nodes[b] * bary[1] + self.nodes[c] * bary[2]
    }

    /// The three edge-midpoint quadrature points of element `t`.
    pub fn quadrature_points(&self, t: usize) -> [Point; 3] {
        EDGE_MIDPOINTS.map(|b| self.barycentric_point(t, &b))
    }

    pub(crate) fn interior_pattern(&self) -> Arc<InteriorPattern> {
        self.pattern.get_or_init(|| Arc::new(InteriorPattern::new(self))).clone()
    }

    /// Whether two meshes describe the same triangulation.
    pub fn same_as(&self, other: &Mesh) -> bool {
        std::ptr::eq(self, other) || (self.nx == other.nx && self.ny == other.ny && self.domain == other.domain)
    }
}

/// Exact element gradients of the P1 interpolant of nodal `values`.
pub fn gradient(mesh: &Mesh, values: &[f64]) -> Result<Vec<Vector2<f64>>> {
    if values.len() != mesh.node_count() {
        return Err(Error::LengthMismatch { expected: mesh.node_count(), got: values.len() });
    }
    Ok((0..mesh.element_count()).map(|t| element_gradient(mesh, values, t)).collect())
}

#[inline]
pub(crate) fn element_gradient(mesh: &Mesh, values: &[f64], t: usize) -> Vector2<f64> {
    let tri = mesh.triangles[t];
    let g = &mesh.shape_grads[t];
    g[0] * values[tri[0]] + g[1] * values[tri[1]] + g[2] * values[tri[2]]
}

/// Integrate per-element data.
///
/// `g` holds either one value per element (centroid rule) or three values
/// per element at the edge midpoints (3-point rule), element-major.
pub fn integrate(mesh: &Mesh, g: &[f64]) -> Result<f64> {
    let ne = mesh.element_count();
    if g.len() == ne {
        Ok(g.iter().zip(&mesh.element_area).map(|(v, a)| v * a).sum())
    } else if g.len() == 3 * ne {
        Ok(g.chunks_exact(3).zip(&mesh.element_area).map(|(v, a)| (v[0] + v[1] + v[2]) * a / 3.0).sum())
    } else {
        Err(Error::LengthMismatch { expected: ne, got: g.len() })
    }
}

/// Complex counterpart of [`integrate`].
pub fn integrate_complex(mesh: &Mesh, g: &[Complex64]) -> Result<Complex64> {
    let re: Vec<f64> = g.iter().map(|c| c.re).collect();
    let im: Vec<f64> = g.iter().map(|c| c.im).collect();
    Ok(Complex64::new(integrate(mesh, &re)?, integrate(mesh, &im)?))
}

/// Values on the boundary nodes, in `mesh.boundary_nodes()` order.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData<T = f64> {
    pub values: Vec<T>,
}

pub type ComplexBoundaryData = BoundaryData<Complex64>;

impl<T: Copy> BoundaryData<T> {
    pub fn new(mesh: &Mesh, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.boundary_nodes().len() {
            return Err(Error::LengthMismatch { expected: mesh.boundary_nodes().len(), got: values.len() });
        }
        Ok(BoundaryData { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.boundary_nodes().len() {
            return Err(Error::LengthMismatch { expected: mesh.boundary_nodes().len(), got: self.values.len() });
        }
        Ok(())
    }
}

impl BoundaryData<f64> {
    pub fn scaled(&self, s: f64) -> Self {
        BoundaryData { values: self.values.iter().map(|v| s * v).collect() }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        BoundaryData { values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexBoundaryData {
    pub fn re(&self) -> BoundaryData {
        BoundaryData { values: self.values.iter().map(|c| c.re).collect() }
    }

    pub fn im(&self) -> BoundaryData {
        BoundaryData { values: self.values.iter().map(|c| c.im).collect() }
    }
}

/// Nodal trace of `f` on the boundary.
pub fn boundary_values<T, F>(mesh: &Mesh, f: F) -> BoundaryData<T>
where
    F: Fn(&Point) -> T,
{
    BoundaryData { values: mesh.boundary_nodes.iter().map(|&k| f(&mesh.nodes[k])).collect() }
}

/// Continuous piecewise-linear field given by its node values.
#[derive(Clone, Debug)]
pub struct NodalField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::LengthMismatch { expected: mesh.node_count(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("nodal field"));
        }
        Ok(NodalField { mesh, values })
    }

    pub(crate) fn from_raw(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.node_count());
        NodalField { mesh, values }
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.node_count();
        NodalField { mesh, values: vec![0.0; n] }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.node_count();
        NodalField { mesh, values: vec![c; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&Point) -> f64) -> Self {
        let values = mesh.nodes.iter().map(&f).collect();
        NodalField { mesh, values }
    }

    /// Plane wave `z . x`.
    pub fn plane_wave(mesh: Arc<Mesh>, z: Vector2<f64>) -> Self {
        Self::from_fn(mesh, |x| z.dot(x))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn gradient(&self) -> Vec<Vector2<f64>> {
        (0..self.mesh.element_count()).map(|t| element_gradient(&self.mesh, &self.values, t)).collect()
    }

    pub fn trace(&self) -> BoundaryData {
        BoundaryData { values: self.mesh.boundary_nodes.iter().map(|&k| self.values[k]).collect() }
    }

    /// Element averages, exact for the P1 interpolant.
    pub fn element_means(&self) -> Vec<f64> {
        self.mesh.triangles.iter().map(|t| (self.values[t[0]] + self.values[t[1]] + self.values[t[2]]) / 3.0).collect()
    }

    /// Values at the edge-midpoint quadrature points, element-major.
    pub fn at_quadrature_points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.mesh.element_count());
        for t in &self.mesh.triangles {
            let v = [self.values[t[0]], self.values[t[1]], self.values[t[2]]];
            for b in EDGE_MIDPOINTS {
                out.push(b[0] * v[0] + b[1] * v[1] + b[2] * v[2]);
            }
        }
        out
    }

    pub fn check_same_mesh(&self, other: &NodalField) -> Result<()> {
        if self.mesh.same_as(&other.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh.same_as(mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &NodalField) -> NodalField {
        debug_assert!(self.mesh.same_as(&other.mesh));
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        NodalField { mesh: self.mesh.clone(), values }
    }

    pub fn scaled(&self, s: f64) -> NodalField {
        NodalField { mesh: self.mesh.clone(), values: self.values.iter().map(|v| s * v).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> NodalField {
        NodalField { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact L2 norm of the P1 interpolant.
    pub fn l2_norm(&self) -> f64 {
        let q = self.map(|v| v).at_quadrature_points();
        let sq: Vec<f64> = q.iter().map(|v| v * v).collect();
        integrate(&self.mesh, &sq).unwrap_or(f64::NAN).sqrt()
    }

    /// L2 norm of the P1 interpolant minus `exact`, using a degree-4 rule.
    pub fn l2_error(&self, exact: impl Fn(&Point) -> f64) -> f64 {
        let mut acc = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let v = [self.values[tri[0]], self.values[tri[1]], self.values[tri[2]]];
            let mut s = 0.0;
            for (b, w) in SIX_POINT {
                let uh = b[0] * v[0] + b[1] * v[1] + b[2] * v[2];
                let x = self.mesh.barycentric_point(t, &b);
                let d = uh - exact(&x);
                s += w * d * d;
            }
            acc += s * self.mesh.element_area[t];
        }
        acc.sqrt()
    }

    /// L2 norm of the element gradients.
    pub fn gradient_l2_norm(&self) -> f64 {
        self.gradient().iter().zip(&self.mesh.element_area).map(|(g, a)| g.norm_squared() * a).sum::<f64>().sqrt()
    }

    /// Copy of `self` with the boundary nodes overwritten by `data`.
    pub fn with_boundary(&self, data: &BoundaryData) -> Result<NodalField> {
        data.check(&self.mesh)?;
        let mut out = self.clone();
        for (&k, &v) in self.mesh.boundary_nodes.iter().zip(&data.values) {
            out.values[k] = v;
        }
        Ok(out)
    }
}

/// Complex field stored as two real fields on one mesh.
#[derive(Clone, Debug)]
pub struct ComplexNodalField {
    pub re: NodalField,
    pub im: NodalField,
}

impl ComplexNodalField {
    pub fn new(re: NodalField, im: NodalField) -> Result<Self> {
        re.check_same_mesh(&im)?;
        Ok(ComplexNodalField { re, im })
    }

    pub fn from_real(re: NodalField) -> Self {
        let im = NodalField::zeros(re.mesh().clone());
        ComplexNodalField { re, im }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&Point) -> Complex64) -> Self {
        let vals: Vec<Complex64> = mesh.nodes.iter().map(&f).collect();
        let re = NodalField::from_raw(mesh.clone(), vals.iter().map(|c| c.re).collect());
        let im = NodalField::from_raw(mesh, vals.iter().map(|c| c.im).collect());
        ComplexNodalField { re, im }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.re.mesh()
    }

    pub fn gradient(&self) -> Vec<Vector2<Complex64>> {
        self.re
            .gradient()
            .into_iter()
            .zip(self.im.gradient())
            .map(|(r, i)| Vector2::new(Complex64::new(r.x, i.x), Complex64::new(r.y, i.y)))
            .collect()
    }

    pub fn value(&self, node: usize) -> Complex64 {
        Complex64::new(self.re.values()[node], self.im.values()[node])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<Mesh> {
        Mesh::uniform(n, n, Domain::unit_square()).unwrap()
    }

    #[test]
    fn minimal_grid() {
        let m = unit(1);
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.element_count(), 2);
        assert_eq!(m.boundary_nodes().len(), 4);
        assert!(m.interior_nodes().is_empty());
    }

    #[test]
    fn two_by_two_has_one_interior_node() {
        let m = unit(2);
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.element_count(), 8);
        assert_eq!(m.interior_nodes(), &[4]);
    }

    #[test]
    fn areas_sum_to_domain_area() {
        let m = unit(64);
        let total: f64 = m.element_area().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(m.element_area().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn rejects_degenerate_domain() {
        assert!(Domain::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Mesh::uniform(0, 3, Domain::unit_square()).is_err());
        let bad = Domain { x_min: 0.0, x_max: -1.0, y_min: 0.0, y_max: 1.0 };
        assert!(Mesh::uniform(3, 3, bad).is_err());
    }

    #[test]
    fn boundary_and_interior_partition_nodes() {
        let m = Mesh::uniform(7, 5, Domain::new(-1.0, 2.0, 0.5, 1.5).unwrap()).unwrap();
        let mut all: Vec<usize> = m.boundary_nodes().iter().chain(m.interior_nodes()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..m.node_count()).collect::<Vec<_>>());
        let d = *m.domain();
        for &k in m.boundary_nodes() {
            let p = m.nodes()[k];
            let on_edge = p.x == d.x_min || p.x == d.x_max || p.y == d.y_min || p.y == d.y_max;
            assert!(on_edge);
        }
    }

    #[test]
    fn gradient_of_constant_and_affine() {
        let m = unit(9);
        let c = NodalField::constant(m.clone(), 3.5);
        assert!(c.gradient().iter().all(|g| g.norm() == 0.0));
        let u = NodalField::from_fn(m, |x| 3.0 * x.x - 2.0 * x.y);
        for g in u.gradient() {
            assert!((g.x - 3.0).abs() < 1e-12 && (g.y + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_square_is_first_order_at_centroids() {
        let m = unit(64);
        let u = NodalField::from_fn(m.clone(), |x| x.x * x.x);
        let h = m.h();
        let worst =
            u.gradient().iter().enumerate().map(|(t, g)| (g.x - 2.0 * m.centroid(t).x).abs()).fold(0.0, f64::max);
        assert!(worst <= h, "worst {worst}, h {h}");
    }

    #[test]
    fn integrate_rules() {
        let m = unit(64);
        let ones = vec![1.0; m.element_count()];
        assert_eq!(integrate(&m, &ones).unwrap(), 1.0);
        let xs: Vec<f64> = (0..m.element_count()).map(|t| m.centroid(t).x).collect();
        assert!((integrate(&m, &xs).unwrap() - 0.5).abs() < 1e-12);
        assert!(integrate(&m, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn integrate_sine_product_is_second_order() {
        let exact = 4.0 / (PI * PI);
        let err = |n: usize| {
            let m = unit(n);
            let g: Vec<f64> = (0..m.element_count())
                .map(|t| {
                    let c = m.centroid(t);
                    (PI * c.x).sin() * (PI * c.y).sin()
                })
                .collect();
            (integrate(&m, &g).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 1e-3);
        assert!((e1 / e2).log2() > 1.9);
    }

    #[test]
    fn boundary_traces() {
        let m = unit(8);
        let zero = boundary_values(&m, |_| 0.0);
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let xs = boundary_values(&m, |x| x.x);
        for (&k, v) in m.boundary_nodes().iter().zip(&xs.values) {
            assert_eq!(*v, m.nodes()[k].x);
        }
        let zeta = Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
        let e = boundary_values(&m, |x| (zeta[0] * x.x + zeta[1] * x.y).exp());
        for (&k, v) in m.boundary_nodes().iter().zip(&e.values) {
            let p = m.nodes()[k];
            let direct = Complex64::new(p.x, p.y).exp();
            assert!((v - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn deterministic_construction() {
        let a = unit(13);
        let b = unit(13);
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.triangles(), b.triangles());
    }

    #[test]
    fn l2_norm_is_exact_for_p1() {
        let m = unit(16);
        let u = NodalField::from_fn(m, |x| x.x);
        // int_0^1 x^2 dx = 1/3
        assert!((u.l2_norm() - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn affine_gradients_are_exact(a in -10.0..10.0f64, b in -10.0..10.0f64, c in -5.0..5.0f64) {
            let m = Mesh::uniform(5, 7, Domain::new(-0.3, 1.2, 0.1, 0.9).unwrap()).unwrap();
            let u = NodalField::from_fn(m, |x| a * x.x + b * x.y + c);
            for g in u.gradient() {
                prop_assert!((g.x - a).abs() < 1e-12 && (g.y - b).abs() < 1e-12);
            }
        }

        #[test]
        fn integrate_is_linear_and_positive(
            s in -3.0..3.0f64,
            seed in proptest::collection::vec(0.0..1.0f64, 32),
        ) {
            let m = unit(4);
            let g: Vec<f64> = seed.clone();
            let h: Vec<f64> = seed.iter().rev().map(|v| v * v + 0.1).collect();
            let lhs = integrate(&m, &g.iter().zip(&h).map(|(x, y)| x + s * y).collect::<Vec<_>>()).unwrap();
            let rhs = integrate(&m, &g).unwrap() + s * integrate(&m, &h).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            prop_assert!(integrate(&m, &h).unwrap() > 0.0);
        }
    }
}
