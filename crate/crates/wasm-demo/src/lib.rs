//! Browser bindings. Each export returns row-major nodal values on an
//! `(n+1) x (n+1)` grid of the unit square.

use std::sync::Arc;

use dphase_core::coefficient::Coefficient;
use dphase_core::forward::{solve_dirichlet, ProblemSpec};
use dphase_core::mesh::{boundary_values, Domain, Mesh, Point};
use dphase_core::reconstruct::{cgo_data, invert, metrics, sample_lattice, Lattice, Mode};
use dphase_core::tensorops::{ExponentPair, Vec2};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request.
pub const MAX_N: usize = 64;

fn grid(n: usize) -> dphase_core::Result<Arc<Mesh>> {
    if n == 0 || n > MAX_N {
        return Err(dphase_core::Error::InvalidInput(format!("grid size must lie in 1..={MAX_N}")));
    }
    Mesh::uniform(n, n, Domain::unit_square())
}

fn bump(amplitude: f64, width: f64) -> Coefficient {
    Coefficient::gaussian(amplitude, [0.5, 0.5], width)
}

/// Solution with data `z . x` and a centred Gaussian coefficient.
pub fn forward(n: usize, p: f64, q: f64, amplitude: f64, width: f64, z: [f64; 2]) -> dphase_core::Result<Vec<f64>> {
    let mesh = grid(n)?;
    let spec = ProblemSpec::new(ExponentPair::new(p, q)?, bump(amplitude, width).to_field(mesh.clone())?);
    let z = Vec2::new(z[0], z[1]);
    let f = boundary_values(&mesh, |x: &Point| z.dot(x));
    Ok(solve_dirichlet(&spec, &f)?.u.into_values())
}

/// Interleaved `(Re, Im)` of the probe `exp(zeta_plus . x)` for frequency `xi`.
pub fn probe(n: usize, p: f64, xi: [f64; 2]) -> dphase_core::Result<Vec<f64>> {
    let mesh = grid(n)?;
    let probe = cgo_data(p, Vec2::new(xi[0], xi[1]))?.probe_plus();
    Ok(mesh
        .nodes()
        .iter()
        .flat_map(|x| {
            let v = probe.value(x);
            [v.re, v.im]
        })
        .collect())
}

/// Reconstructed coefficient and its relative L2 error.
pub fn reconstruct(n: usize, k_max: i32, amplitude: f64, width: f64) -> dphase_core::Result<(Vec<f64>, f64)> {
    let mesh = grid(n)?;
    let a = bump(amplitude, width).to_field(mesh.clone())?;
    let spec = ProblemSpec::new(ExponentPair::new(2.0, 3.0)?, a.clone());
    let lattice = Lattice::around(Domain::unit_square(), k_max)?;
    let samples = sample_lattice(&spec, &lattice, &Mode::Oracle)?;
    let result = invert(&samples, mesh, &lattice)?;
    let err = metrics(&result, &a, None)?.relative_l2;
    Ok((result.a_rec.into_values(), err))
}

fn js(e: dphase_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn forward_field(
    n: usize,
    p: f64,
    q: f64,
    amplitude: f64,
    width: f64,
    z1: f64,
    z2: f64,
) -> Result<Vec<f64>, JsError> {
    forward(n, p, q, amplitude, width, [z1, z2]).map_err(js)
}

#[wasm_bindgen]
pub fn cgo_probe(n: usize, p: f64, xi1: f64, xi2: f64) -> Result<Vec<f64>, JsError> {
    probe(n, p, [xi1, xi2]).map_err(js)
}

#[wasm_bindgen]
pub struct Reconstruction {
    values: Vec<f64>,
    relative_l2: f64,
}

#[wasm_bindgen]
impl Reconstruction {
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn relative_l2(&self) -> f64 {
        self.relative_l2
    }
}

#[wasm_bindgen]
pub fn oracle_reconstruct(n: usize, k_max: i32, amplitude: f64, width: f64) -> Result<Reconstruction, JsError> {
    let (values, relative_l2) = reconstruct(n, k_max, amplitude, width).map_err(js)?;
    Ok(Reconstruction { values, relative_l2 })
}
