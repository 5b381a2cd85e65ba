//! Dirichlet-to-Neumann pairings `<Lambda_a f, g>` in volume form.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use crate::error::Result;
use crate::forward::{solve_dirichlet, ProblemSpec};
use crate::linear_elliptic::harmonic_extension;
use crate::mesh::{BoundaryData, NodalField};
use crate::tensorops::flux_regularized;

/// Data of one pairing evaluation.
#[derive(Clone, Copy, Debug)]
pub struct DnQuery<'a> {
    pub spec: &'a ProblemSpec,
    pub f: &'a BoundaryData,
    pub g: &'a BoundaryData,
    /// Extension of `g`; the discrete harmonic extension when absent.
    pub omega: Option<&'a NodalField>,
}

/// `int (|grad u|^(p-2) grad u + a |grad u|^(q-2) grad u) . grad omega` for a given `u`.
pub fn pairing_from_solution(spec: &ProblemSpec, u: &NodalField, omega: &NodalField) -> Result<f64> {
    u.check_mesh(spec.mesh())?;
    omega.check_mesh(spec.mesh())?;
    let mesh = spec.mesh();
    let a = spec.a_elements();
    let (p, q, d) = (spec.p(), spec.q(), spec.delta);
    let gu = u.gradient();
    let gw = omega.gradient();
    Ok((0..mesh.element_count())
        .map(|t| {
            let mut f = flux_regularized(p, gu[t], d);
            if a[t] != 0.0 {
                f += flux_regularized(q, gu[t], d) * a[t];
            }
            mesh.element_area()[t] * f.dot(&gw[t])
        })
        .sum())
}

/// Extension used when the query does not supply one.
pub fn default_extension(spec: &ProblemSpec, g: &BoundaryData) -> Result<NodalField> {
    harmonic_extension(spec.mesh(), g)
}

pub fn pairing(query: &DnQuery) -> Result<f64> {
    let spec = query.spec;
    query.g.check(spec.mesh())?;
    let owned;
    let omega = match query.omega {
        Some(w) => {
            w.check_mesh(spec.mesh())?;
            if w.trace() != *query.g {
                return Err(crate::Error::InvalidInput("extension does not match g on the boundary".into()));
            }
            w
        }
        None => {
            owned = default_extension(spec, query.g)?;
            &owned
        }
    };
    let sol = solve_dirichlet(spec, query.f)?;
    pairing_from_solution(spec, &sol.u, omega)
}

type CacheKey = (u64, u64, usize);

/// Data bits, solution and achieved relative residual.
type Entry = (Vec<u64>, Arc<NodalField>, f64);

/// Shared p-Laplace solutions keyed by `(p, f)` on one mesh.
///
/// Cloning yields another handle to the same store.
#[derive(Clone)]
pub struct PlapCache {
    template: Arc<ProblemSpec>,
    store: Arc<RwLock<HashMap<CacheKey, Entry>>>,
}

impl std::fmt::Debug for PlapCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.store.read().map(|s| s.len()).unwrap_or(0);
        f.debug_struct("PlapCache").field("entries", &n).finish()
    }
}

impl PlapCache {
    /// Solver settings (mesh, tolerance, regularization) are taken from `template`.
    pub fn new(template: &ProblemSpec) -> Self {
        PlapCache { template: Arc::new(template.clone()), store: Arc::new(RwLock::new(HashMap::new())) }
    }

    pub fn len(&self) -> usize {
        self.store.read().map(|s| s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// p-Laplace solution for data `f`, solved once per key.
    pub fn solution(&self, p: f64, f: &BoundaryData) -> Result<Arc<NodalField>> {
        Ok(self.entry(p, f)?.0)
    }

    /// Relative residual the cached solve reached.
    pub fn residual(&self, p: f64, f: &BoundaryData) -> Result<f64> {
        Ok(self.entry(p, f)?.1)
    }

    fn entry(&self, p: f64, f: &BoundaryData) -> Result<(Arc<NodalField>, f64)> {
        let bits: Vec<u64> = f.values.iter().map(|v| v.to_bits()).collect();
        let mut h = std::collections::hash_map::DefaultHasher::new();
        bits.hash(&mut h);
        let key = (p.to_bits(), h.finish(), bits.len());
        if let Some((stored, u, res)) = self.store.read().expect("cache lock").get(&key) {
            if *stored == bits {
                return Ok((u.clone(), *res));
            }
        }
        let mut spec = ProblemSpec::p_laplace(self.template.mesh().clone(), p)?;
        spec.delta = self.template.delta;
        spec.newton_tol = self.template.newton_tol;
        spec.max_iters = self.template.max_iters;
        spec.continuation_steps = self.template.continuation_steps;
        let sol = solve_dirichlet(&spec, f)?;
        let u = Arc::new(sol.u);
        self.store.write().expect("cache lock").insert(key, (bits, u.clone(), sol.residual));
        Ok((u, sol.residual))
    }

    /// `<Lambda_0 (scale f), g>` as `sign(scale) |scale|^(p-1) <Lambda_0 f, g>`.
    pub fn pairing(&self, p: f64, f: &BoundaryData, omega: &NodalField, scale: f64) -> Result<f64> {
        let u = self.solution(p, f)?;
        let mut spec = ProblemSpec::p_laplace(self.template.mesh().clone(), p)?;
        spec.delta = self.template.delta;
        let base = pairing_from_solution(&spec, &u, omega)?;
        Ok(scale.signum() * scale.abs().powf(p - 1.0) * base)
    }
}

/// `<Lambda_0 (scale f), g>` through the homogeneity of the p-Laplacian.
pub fn pairing_plap(template: &ProblemSpec, p: f64, f: &BoundaryData, g: &BoundaryData, scale: f64) -> Result<f64> {
    let omega = default_extension(template, g)?;
    PlapCache::new(template).pairing(p, f, &omega, scale)
}
