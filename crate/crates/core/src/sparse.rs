//! Sparse symmetric systems over the interior nodes of a mesh.

use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Below this many unknowns a banded Cholesky factorization is used when
/// conjugate gradients stalls.
pub const DIRECT_LIMIT: usize = 10_000;

const NO_SLOT: usize = usize::MAX;

/// CSR sparsity of the P1 stiffness matrix restricted to interior nodes.
#[derive(Debug)]
pub struct InteriorPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag: Vec<usize>,
    // For each element, the CSR slot of local entry (a, b) at a * 3 + b.
    elem_slots: Vec<[usize; 9]>,
    bandwidth: usize,
}

impl InteriorPattern {
    pub(crate) fn new(mesh: &Mesh) -> Self {
        let n = mesh.interior_nodes().len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for tri in mesh.triangles() {
            for &a in tri {
                let Some(ia) = mesh.interior_index(a) else { continue };
                for &b in tri {
                    if let Some(ib) = mesh.interior_index(b) {
                        rows[ia].push(ib);
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut diag = Vec::with_capacity(n);
        let mut bandwidth = 0;
        row_ptr.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            for &j in row.iter() {
                if j == i {
                    diag.push(col_idx.len());
                }
                bandwidth = bandwidth.max(i.abs_diff(j));
                col_idx.push(j);
            }
            row_ptr.push(col_idx.len());
        }
        let slot = |i: usize, j: usize| -> usize {
            let r = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            row_ptr[i] + r.binary_search(&j).expect("pattern entry")
        };
        let elem_slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [NO_SLOT; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(i), Some(j)) = (mesh.interior_index(tri[a]), mesh.interior_index(tri[b])) {
                            s[a * 3 + b] = slot(i, j);
                        }
                    }
                }
                s
            })
            .collect();
        InteriorPattern { n, row_ptr, col_idx, diag, elem_slots, bandwidth }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
}

/// Symmetric matrix on an [`InteriorPattern`].
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pattern: Arc<InteriorPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn size(&self) -> usize {
        self.pattern.n
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.pattern.diag.iter().map(|&k| self.values[k]).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for i in 0..p.n {
            let mut s = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let p = &*self.pattern;
        let r = &p.col_idx[p.row_ptr[i]..p.row_ptr[i + 1]];
        r.binary_search(&j).map(|k| self.values[p.row_ptr[i] + k]).unwrap_or(0.0)
    }
}

/// Stiffness matrix `K_ij = sum_T area_T (C_T grad phi_j) . grad phi_i` over interior nodes.
pub fn assemble_stiffness(mesh: &Mesh, coeff: &[Matrix2<f64>]) -> CsrMatrix {
    debug_assert_eq!(coeff.len(), mesh.element_count());
    let pattern = mesh.interior_pattern();
    let mut values = vec![0.0; pattern.nnz()];
    for (t, c) in coeff.iter().enumerate() {
        let slots = &pattern.elem_slots[t];
        let g = mesh.shape_gradients(t);
        let area = mesh.element_area()[t];
        for a in 0..3 {
            for b in 0..3 {
                let s = slots[a * 3 + b];
                if s != NO_SLOT {
                    values[s] += area * g[a].dot(&(c * g[b]));
                }
            }
        }
    }
    CsrMatrix { pattern, values }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub direct: bool,
}

/// Solve `K x = b` to relative residual `rtol`, warm-started from `x`.
///
/// Runs Jacobi-preconditioned conjugate gradients and falls back to a banded
/// Cholesky factorization for small systems when CG does not converge.
pub fn solve_spd(k: &CsrMatrix, b: &[f64], x: &mut [f64], rtol: f64) -> Result<SolveStats> {
    let n = k.size();
    if n == 0 {
        return Ok(SolveStats { iterations: 0, residual: 0.0, direct: false });
    }
    let max_iter = (10 * n).max(200);
    let stats = pcg(k, b, x, rtol, max_iter);
    if stats.residual <= rtol {
        return Ok(stats);
    }
    if n < DIRECT_LIMIT {
        let sol = BandedCholesky::factor(k)?.solve(b);
        x.copy_from_slice(&sol);
        let residual = relative_residual(k, b, x);
        return Ok(SolveStats { iterations: stats.iterations, residual, direct: true });
    }
    Err(Error::LinearSolve { iterations: stats.iterations, residual: stats.residual })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn relative_residual(k: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut r = vec![0.0; b.len()];
    k.mul_vec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let bn = norm(b);
    if bn == 0.0 {
        norm(&r)
    } else {
        norm(&r) / bn
    }
}

/// Jacobi-preconditioned conjugate gradients. The returned residual is
/// relative to `|b|` (absolute when `b = 0`).
pub fn pcg(k: &CsrMatrix, b: &[f64], x: &mut [f64], rtol: f64, max_iter: usize) -> SolveStats {
    let n = k.size();
    let bn = norm(b);
    let scale = if bn > 0.0 { bn } else { 1.0 };
    let inv_diag: Vec<f64> = k.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = vec![0.0; n];
    k.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm(&r) / scale;
    if res <= rtol {
        return SolveStats { iterations: 0, residual: res, direct: false };
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    for it in 1..=max_iter {
        k.mul_vec(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            return SolveStats { iterations: it, residual: res, direct: false };
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        res = norm(&r) / scale;
        if res <= rtol {
            // Guard against drift of the recursive residual.
            let true_res = relative_residual(k, b, x);
            if true_res <= rtol {
                return SolveStats { iterations: it, residual: true_res, direct: false };
            }
            k.mul_vec(x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    SolveStats { iterations: max_iter, residual: res, direct: false }
}

/// Cholesky factor of a symmetric banded matrix, stored row-wise as the
/// `bw + 1` entries left of and including the diagonal.
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(k: &CsrMatrix) -> Result<Self> {
        let n = k.size();
        let bw = k.pattern.bandwidth;
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        // Entry (i, j), j <= i, lives at i * w + (j + bw - i).
        let p = &*k.pattern;
        for i in 0..n {
            for s in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[s];
                if j <= i {
                    l[i * w + j + bw - i] = k.values[s];
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[i * w + j + bw - i];
                let k0 = j0.max(j.saturating_sub(bw));
                for m in k0..j {
                    s -= l[i * w + m + bw - i] * l[j * w + m + bw - j];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::LinearSolve { iterations: 0, residual: f64::NAN });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + j + bw - i] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for m in i.saturating_sub(bw)..i {
                s -= self.l[i * w + m + bw - i] * y[m];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for m in i + 1..(i + bw + 1).min(n) {
                s -= self.l[m * w + i + bw - m] * y[m];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    fn laplacian(n: usize) -> CsrMatrix {
        let m = Mesh::uniform(n, n, Domain::unit_square()).unwrap();
        assemble_stiffness(&m, &vec![Matrix2::identity(); m.element_count()])
    }

    #[test]
    fn laplacian_stencil_and_symmetry() {
        let k = laplacian(6);
        // Right-isosceles P1 elements give the five-point stencil.
        for i in 0..k.size() {
            assert!((k.get(i, i) - 4.0).abs() < 1e-12);
            for j in 0..k.size() {
                assert!((k.get(i, j) - k.get(j, i)).abs() < 1e-14);
                if i != j {
                    assert!(k.get(i, j) <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn bandwidth_matches_grid() {
        let k = laplacian(9);
        assert_eq!(k.pattern.bandwidth, 9);
    }

    #[test]
    fn cg_and_cholesky_agree() {
        let k = laplacian(20);
        let b: Vec<f64> = (0..k.size()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut x = vec![0.0; k.size()];
        let st = pcg(&k, &b, &mut x, 1e-13, 10_000);
        assert!(st.residual <= 1e-13);
        let y = BandedCholesky::factor(&k).unwrap().solve(&b);
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() < 1e-10);
        }
        assert!(relative_residual(&k, &b, &y) < 1e-13);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let k = laplacian(5);
        let mut x = vec![0.0; k.size()];
        let st = solve_spd(&k, &vec![0.0; k.size()], &mut x, 1e-12).unwrap();
        assert_eq!(st.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
