//! Small/large boundary data limits of the DN map, the p-harmonic families
//! `v_tau` and the derivative `J`, each with a direct integral counterpart.

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::Serialize;

use crate::dn_map::{default_extension, pairing_from_solution, PlapCache};
use crate::error::{Error, Result};
use crate::forward::{min_gradient, solve_dirichlet, solve_dirichlet_from, weak_residual, ProblemSpec, Solution};
use crate::linear_elliptic::{solve_r, solve_rdot};
use crate::mesh::{BoundaryData, ComplexNodalField, Mesh, NodalField, EDGE_MIDPOINTS};
use crate::par;
use crate::tensorops::{a_dot_point, a_matrix, flux, ExponentPair, Vec2};

pub type CVec2 = Vector2<Complex64>;

/// Residual below which a probe counts as discretely p-harmonic.
pub const PROBE_TOL: f64 = 1e-8;

/// Pairing noise relative to the solver tolerance.
const NOISE_FACTOR: f64 = 10.0;

/// Geometric sequence of boundary scalings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitSchedule {
    pub values: Vec<f64>,
    /// Number of trailing levels used by the extrapolation.
    pub extrapolation_order: usize,
}

impl LimitSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let s = LimitSchedule { values, extrapolation_order: n };
        s.validate()?;
        Ok(s)
    }

    pub fn geometric(start: f64, ratio: f64, n: usize) -> Result<Self> {
        Self::new((0..n).map(|k| start * ratio.powi(k as i32)).collect())
    }

    /// `0.2 * 2^-k`, `k = 0..3`.
    pub fn epsilon_default() -> Self {
        Self::geometric(0.2, 0.5, 4).expect("valid default")
    }

    /// `5 * 2^k`, `k = 0..3`.
    pub fn mu_default() -> Self {
        Self::geometric(5.0, 2.0, 4).expect("valid default")
    }

    /// Decreasing schedule for `p < q`, increasing for `p > q`.
    pub fn default_for(e: &ExponentPair) -> Self {
        if e.p < e.q {
            Self::epsilon_default()
        } else {
            Self::mu_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.values;
        if v.len() < 3 {
            return Err(Error::InvalidInput("schedule needs at least 3 values".into()));
        }
        if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("schedule values must be positive".into()));
        }
        let r = v[1] / v[0];
        if r == 1.0 || v.windows(2).any(|w| ((w[1] / w[0]) / r - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidInput("schedule must be geometric and strictly monotone".into()));
        }
        if self.extrapolation_order < 3 || self.extrapolation_order > v.len() {
            return Err(Error::InvalidInput("extrapolation order must lie in 3..=len".into()));
        }
        Ok(())
    }

    pub fn is_decreasing(&self) -> bool {
        self.values[1] < self.values[0]
    }

    /// Parameter tending to zero along the schedule: `s` or `1/s`.
    pub fn parameter(&self) -> Vec<f64> {
        if self.is_decreasing() {
            self.values.clone()
        } else {
            self.values.iter().map(|s| 1.0 / s).collect()
        }
    }
}

/// Limit estimate of a sequence.
#[derive(Clone, Debug, Serialize)]
pub struct Extrapolation {
    pub limit: f64,
    /// Difference of the last two extrapolants, at least the noise level.
    pub error_bar: f64,
    /// Fitted algebraic order of the remainder (NaN when not fitted).
    pub order: f64,
    /// Set when the sequence is not monotone or not contracting.
    pub flagged: bool,
}

/// Extrapolate `s_k` to `t -> 0` along geometric `t_k`, fitting the
/// remainder order from consecutive ratios (Aitken). Increments below
/// `noise` are treated as converged.
pub fn extrapolate(t: &[f64], s: &[f64], noise: f64) -> Extrapolation {
    let n = s.len();
    assert!(n >= 2 && t.len() == n);
    let d: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    let last = s[n - 1];
    let floor = noise.max(8.0 * f64::EPSILON * s.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if d.iter().all(|x| x.abs() <= floor) {
        let bar = d.iter().fold(noise, |m, x| m.max(x.abs()));
        return Extrapolation { limit: last, error_bar: bar, order: f64::NAN, flagged: false };
    }
    if n < 3 {
        return Extrapolation { limit: last, error_bar: d[0].abs(), order: f64::NAN, flagged: true };
    }
    let ratio = t[1] / t[0];
    let mut estimates = Vec::new();
    let mut flagged = false;
    let mut order = f64::NAN;
    for k in 0..n - 2 {
        let (d0, d1) = (d[k], d[k + 1]);
        if d1.abs() <= floor {
            estimates.push(s[k + 2]);
            continue;
        }
        let rho = d1 / d0;
        if !(rho > 0.0 && rho < 1.0) || d0.abs() <= floor {
            flagged = true;
            estimates.push(s[k + 2]);
            continue;
        }
        order = rho.ln() / ratio.ln();
        estimates.push(s[k + 2] + d1 * rho / (1.0 - rho));
    }
    let m = estimates.len();
    let limit = estimates[m - 1];
    let error_bar = if m >= 2 { (estimates[m - 1] - estimates[m - 2]).abs() } else { (limit - last).abs() }
        .max(if flagged { d[n - 2].abs() } else { 0.0 })
        .max(noise);
    Extrapolation { limit, error_bar, order, flagged }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_order(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn check_regime(spec: &ProblemSpec, schedule: &LimitSchedule) -> Result<()> {
    schedule.validate()?;
    let want_decreasing = spec.p() < spec.q();
    if want_decreasing != schedule.is_decreasing() {
        return Err(Error::InvalidInput(format!(
            "schedule direction does not match the regime p={}, q={}",
            spec.p(),
            spec.q()
        )));
    }
    Ok(())
}

/// Require `v` to be discretely p-harmonic without critical points.
pub fn validate_probe(spec: &ProblemSpec, v: &NodalField) -> Result<()> {
    v.check_mesh(spec.mesh())?;
    let g = min_gradient(v);
    if !(g > 0.0) {
        return Err(Error::CriticalPoint { min_gradient: g });
    }
    let plap = spec.without_coefficient();
    let r = weak_residual(&plap, v)?;
    if r > PROBE_TOL.max(100.0 * spec.newton_tol) {
        return Err(Error::InvalidInput(format!("probe is not p-harmonic (relative residual {r:e})")));
    }
    Ok(())
}

/// Normalized remainders of the two-term expansion along a schedule.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_order: f64,
    pub passed: bool,
}

/// `e(s) = |u_s - s v - s^(1+q-p) R_v|_L2 / s^(1+q-p)` along the schedule.
pub fn expansion_error(spec: &ProblemSpec, v: &NodalField, schedule: &LimitSchedule) -> Result<ExpansionReport> {
    check_regime(spec, schedule)?;
    validate_probe(spec, v)?;
    let r = solve_r(spec, v)?;
    let k = spec.exponents.corrector_power();
    let errors = par::map(&schedule.values, |&s| -> Result<f64> {
        let guess = v.scaled(s);
        let sol = solve_dirichlet_from(spec, &guess.trace(), Some(&guess))?;
        let model = guess.add_scaled(s.powf(k), &r);
        Ok(sol.u.add_scaled(-1.0, &model).l2_norm() / s.powf(k))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let passed = errors.windows(2).all(|w| w[1] < w[0]);
    let fitted = fitted_order(&schedule.parameter(), &errors);
    Ok(ExpansionReport { values: schedule.values.clone(), errors, fitted_order: fitted, passed })
}

/// Extrapolated limit with its provenance.
#[derive(Clone, Debug, Serialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub error_bar: f64,
    pub order: f64,
    pub flagged: bool,
    pub schedule: Vec<f64>,
    pub sequence: Vec<f64>,
}

impl LimitEstimate {
    fn from_sequence(schedule: &LimitSchedule, seq: Vec<f64>, noise: f64) -> Self {
        let k = schedule.extrapolation_order;
        let t = schedule.parameter();
        let n = seq.len();
        let ex = extrapolate(&t[n - k..], &seq[n - k..], noise);
        LimitEstimate {
            value: ex.limit,
            error_bar: ex.error_bar,
            order: ex.order,
            flagged: ex.flagged,
            schedule: schedule.values.clone(),
            sequence: seq,
        }
    }
}

/// Scaled pairing differences `s^(1-q) (<Lambda_a s v, g> - <Lambda_0 s v, g>)`
/// for several extensions `omegas`, indexed `[omega][schedule]`, together with
/// a noise level per extension.
pub fn difference_sequences(
    spec: &ProblemSpec,
    v: &NodalField,
    omegas: &[NodalField],
    schedule: &LimitSchedule,
    cache: &PlapCache,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let p = spec.p();
    let q = spec.q();
    let trace = v.trace();
    let base: Vec<f64> = omegas.iter().map(|w| cache.pairing(p, &trace, w, 1.0)).collect::<Result<_>>()?;
    let base_residual = cache.residual(p, &trace)?;
    let rows = par::map(&schedule.values, |&s| -> Result<(Vec<f64>, f64)> {
        let guess = v.scaled(s);
        let sol = solve_dirichlet_from(spec, &guess.trace(), Some(&guess))?;
        let diffs = omegas
            .iter()
            .zip(&base)
            .map(|(w, b)| Ok(s.powf(1.0 - q) * (pairing_from_solution(spec, &sol.u, w)? - s.powf(p - 1.0) * b)))
            .collect::<Result<_>>()?;
        Ok((diffs, sol.residual.max(base_residual).max(f64::EPSILON)))
    })
    .into_iter()
    .collect::<Result<Vec<(Vec<f64>, f64)>>>()?;
    let mut seqs = vec![Vec::with_capacity(rows.len()); omegas.len()];
    for (row, _) in &rows {
        for (j, v) in row.iter().enumerate() {
            seqs[j].push(*v);
        }
    }
    // Pairing noise scales with the achieved residual and the absolute
    // integrands, not their signed sums.
    let gv = v.gradient();
    let a = spec.a_elements();
    let area = spec.mesh().element_area();
    let noise = omegas
        .iter()
        .map(|w| {
            let gw = w.gradient();
            let (mut bp, mut bq) = (0.0, 0.0);
            for t in 0..gv.len() {
                let (n, m) = (gv[t].norm(), gw[t].norm());
                bp += area[t] * n.powf(p - 1.0) * m;
                bq += area[t] * a[t] * n.powf(q - 1.0) * m;
            }
            schedule
                .values
                .iter()
                .zip(&rows)
                .map(|(s, (_, res))| NOISE_FACTOR * res * (s.powf(p - q) * bp + bq))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok((seqs, noise))
}

/// `I(v, g)` from DN data along the schedule.
pub fn i_limit(
    spec: &ProblemSpec,
    v: &NodalField,
    g: &BoundaryData,
    schedule: &LimitSchedule,
) -> Result<LimitEstimate> {
    check_regime(spec, schedule)?;
    validate_probe(spec, v)?;
    let omega = default_extension(spec, g)?;
    let cache = PlapCache::new(spec);
    let (seqs, noise) = difference_sequences(spec, v, std::slice::from_ref(&omega), schedule, &cache)?;
    Ok(LimitEstimate::from_sequence(schedule, seqs.into_iter().next().expect("one sequence"), noise[0]))
}

/// `int (A^p_v grad R_v + a |grad v|^(q-2) grad v) . grad omega`.
pub fn i_direct(spec: &ProblemSpec, v: &NodalField, g: &BoundaryData) -> Result<f64> {
    let omega = default_extension(spec, g)?;
    i_direct_with(spec, v, &omega)
}

pub fn i_direct_with(spec: &ProblemSpec, v: &NodalField, omega: &NodalField) -> Result<f64> {
    v.check_mesh(spec.mesh())?;
    let r = solve_r(spec, v)?;
    let gv = v.gradient();
    let ap = a_matrix(spec.p(), &gv)?;
    let gr = r.gradient();
    let gw = omega.gradient();
    let a = spec.a_elements();
    let area = spec.mesh().element_area();
    Ok((0..gv.len()).map(|t| area[t] * (ap[t] * gr[t] + flux(spec.q(), gv[t]) * a[t]).dot(&gw[t])).sum())
}

/// p-harmonic solution with boundary data `v0 + tau phi`.
#[derive(Clone, Debug)]
pub struct VtauSolution {
    pub solution: Solution,
    pub min_gradient: f64,
    /// Set when `min |grad v_tau|` falls below `1e-6` of `min |grad v0|`.
    pub degenerate: bool,
}

pub fn vtau_solution(
    settings: &ProblemSpec,
    p: f64,
    v0: &NodalField,
    phi: &BoundaryData,
    tau: f64,
) -> Result<VtauSolution> {
    let mut spec = ProblemSpec::p_laplace(settings.mesh().clone(), p)?;
    spec.delta = settings.delta;
    spec.newton_tol = settings.newton_tol;
    spec.max_iters = settings.max_iters;
    spec.continuation_steps = settings.continuation_steps;
    let data = v0.trace().add_scaled(tau, phi);
    let solution = if tau == 0.0 {
        solve_dirichlet_from(&spec, &data, Some(v0))?
    } else {
        let guess = v0.with_boundary(&data)?;
        solve_dirichlet_from(&spec, &data, Some(&guess))?
    };
    let g = min_gradient(&solution.u);
    let degenerate = !(g > 1e-6 * min_gradient(v0));
    Ok(VtauSolution { solution, min_gradient: g, degenerate })
}

/// Derivative estimate of `tau -> I(v_tau, g)`.
#[derive(Clone, Debug, Serialize)]
pub struct JEstimate {
    pub value: f64,
    pub error_bar: f64,
    /// Central differences at `tau` and `tau / 2`, each extrapolated in `s`.
    pub j_tau: f64,
    pub j_half: f64,
    /// Largest extrapolation error bar involved.
    pub extrapolation_bar: f64,
    /// `(I(v_{tau/2}, g) + I(v_{-tau/2}, g)) / 2`, an estimate of `I(v0, g)`.
    pub i_center: f64,
    pub flagged: bool,
}

/// Central difference in `tau` of `I(v_tau, g)` for every `g`, sharing all
/// forward solves between the data `gs`.
pub fn j_fd_many(
    spec: &ProblemSpec,
    v0: &NodalField,
    phi1: &BoundaryData,
    gs: &[BoundaryData],
    tau: f64,
    schedule: &LimitSchedule,
) -> Result<Vec<JEstimate>> {
    check_regime(spec, schedule)?;
    validate_probe(spec, v0)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("tau must be positive".into()));
    }
    let omegas: Vec<NodalField> = gs.iter().map(|g| default_extension(spec, g)).collect::<Result<_>>()?;
    let taus = [tau, -tau, 0.5 * tau, -0.5 * tau];
    let families =
        par::map(&taus, |&t| vtau_solution(spec, spec.p(), v0, phi1, t)).into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(f) = families.iter().find(|f| f.degenerate) {
        return Err(Error::CriticalPoint { min_gradient: f.min_gradient });
    }
    let cache = PlapCache::new(spec);
    let seqs = families
        .iter()
        .map(|f| difference_sequences(spec, &f.solution.u, &omegas, schedule, &cache))
        .collect::<Result<Vec<_>>>()?;

    let t = schedule.parameter();
    let k = schedule.extrapolation_order;
    let n = t.len();
    let mut out = Vec::with_capacity(gs.len());
    for j in 0..gs.len() {
        let quotient = |plus: usize, minus: usize, h: f64| {
            let dq: Vec<f64> =
                seqs[plus].0[j].iter().zip(&seqs[minus].0[j]).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let noise = (seqs[plus].1[j] + seqs[minus].1[j]) / (2.0 * h);
            extrapolate(&t[n - k..], &dq[n - k..], noise)
        };
        let full = quotient(0, 1, tau);
        let half = quotient(2, 3, 0.5 * tau);
        let center: Vec<f64> = seqs[2].0[j].iter().zip(&seqs[3].0[j]).map(|(a, b)| 0.5 * (a + b)).collect();
        let i_center = extrapolate(&t[n - k..], &center[n - k..], seqs[2].1[j]).limit;
        let value = (4.0 * half.limit - full.limit) / 3.0;
        let step = (full.limit - half.limit).abs();
        let extrapolation_bar = full.error_bar.max(half.error_bar);
        let error_bar = extrapolation_bar + step / 3.0;
        // The tau and tau/2 estimates must agree up to the extrapolation
        // uncertainty and an O(tau^2) truncation.
        let noise = (seqs[0].1[j] + seqs[1].1[j]) / tau;
        let inconsistent = step > 3.0 * extrapolation_bar + 0.1 * half.limit.abs() + noise;
        out.push(JEstimate {
            value,
            error_bar,
            j_tau: full.limit,
            j_half: half.limit,
            extrapolation_bar,
            i_center,
            flagged: full.flagged || half.flagged || inconsistent,
        });
    }
    Ok(out)
}

/// `J(v0, V, omega)` by central differences of `I_limit` along `v_tau`.
pub fn j_fd(
    spec: &ProblemSpec,
    v0: &NodalField,
    phi1: &BoundaryData,
    phi2: &BoundaryData,
    tau: f64,
    schedule: &LimitSchedule,
) -> Result<JEstimate> {
    Ok(j_fd_many(spec, v0, phi1, std::slice::from_ref(phi2), tau, schedule)?.remove(0))
}

/// Complex probe gradients at the edge-midpoint quadrature points.
pub trait Probe: Sync {
    fn gradients(&self, mesh: &Mesh, t: usize) -> [CVec2; 3];
}

impl Probe for ComplexNodalField {
    fn gradients(&self, mesh: &Mesh, t: usize) -> [CVec2; 3] {
        let r = crate::mesh::element_gradient(mesh, self.re.values(), t);
        let i = crate::mesh::element_gradient(mesh, self.im.values(), t);
        let g = CVec2::new(Complex64::new(r.x, i.x), Complex64::new(r.y, i.y));
        [g; 3]
    }
}

impl Probe for NodalField {
    fn gradients(&self, mesh: &Mesh, t: usize) -> [CVec2; 3] {
        let r = crate::mesh::element_gradient(mesh, self.values(), t);
        [r.map(|x| Complex64::new(x, 0.0)); 3]
    }
}

/// `amplitude * exp(zeta . x)` evaluated exactly.
#[derive(Clone, Copy, Debug)]
pub struct ExpProbe {
    pub zeta: CVec2,
    pub amplitude: Complex64,
}

impl ExpProbe {
    pub fn value(&self, x: &Vec2) -> Complex64 {
        self.amplitude * (self.zeta[0] * x.x + self.zeta[1] * x.y).exp()
    }

    pub fn gradient(&self, x: &Vec2) -> CVec2 {
        self.zeta * self.value(x)
    }
}

impl Probe for ExpProbe {
    fn gradients(&self, mesh: &Mesh, t: usize) -> [CVec2; 3] {
        mesh.quadrature_points(t).map(|x| self.gradient(&x))
    }
}

fn split(v: &CVec2) -> (Vec2, Vec2) {
    (v.map(|c| c.re), v.map(|c| c.im))
}

/// `A-dot(V1) grad V2` for complex gradients, using linearity in `V1`.
pub fn a_dot_complex(p: f64, g0: Vec2, gv1: &CVec2, gv2: &CVec2) -> CVec2 {
    let (r1, i1) = split(gv1);
    let (r2, i2) = split(gv2);
    let mr = a_dot_point(p, g0, r1);
    let mi = a_dot_point(p, g0, i1);
    let re = mr * r2 - mi * i2;
    let im = mr * i2 + mi * r2;
    CVec2::new(Complex64::new(re.x, im.x), Complex64::new(re.y, im.y))
}

/// Bilinear `(M u) . w` for a real matrix and complex vectors.
fn quad_form(m: &crate::tensorops::Mat2, u: &CVec2, w: &CVec2) -> Complex64 {
    let (ur, ui) = split(u);
    let (mr, mi) = (m * ur, m * ui);
    let mu = CVec2::new(Complex64::new(mr.x, mi.x), Complex64::new(mr.y, mi.y));
    mu[0] * w[0] + mu[1] * w[1]
}

/// `J = int a A^q grad V1 . grad V2 + grad R_{v0} . (A-dot(V1) grad V2)`.
pub fn j_direct(spec: &ProblemSpec, v0: &NodalField, v1: &dyn Probe, v2: &dyn Probe) -> Result<Complex64> {
    let r = solve_r(spec, v0)?;
    j_direct_with(spec, v0, &r, v1, v2)
}

/// [`j_direct`] with a precomputed corrector `R_{v0}`.
pub fn j_direct_with(
    spec: &ProblemSpec,
    v0: &NodalField,
    r_v0: &NodalField,
    v1: &dyn Probe,
    v2: &dyn Probe,
) -> Result<Complex64> {
    v0.check_mesh(spec.mesh())?;
    r_v0.check_mesh(spec.mesh())?;
    let mesh = spec.mesh();
    let g0 = v0.gradient();
    let aq = a_matrix(spec.q(), &g0)?;
    let gr = r_v0.gradient();
    let av = spec.a.values();
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = mesh.element_area()[t] / 3.0;
        let d1 = v1.gradients(mesh, t);
        let d2 = v2.gradients(mesh, t);
        for (k, b) in EDGE_MIDPOINTS.iter().enumerate() {
            let a = b[0] * av[tri[0]] + b[1] * av[tri[1]] + b[2] * av[tri[2]];
            let mut term = quad_form(&aq[t], &d1[k], &d2[k]) * a;
            if spec.p() != 2.0 && (gr[t].x != 0.0 || gr[t].y != 0.0) {
                let ad = a_dot_complex(spec.p(), g0[t], &d1[k], &d2[k]);
                term += ad[0] * gr[t].x + ad[1] * gr[t].y;
            }
            acc += term * w;
        }
    }
    Ok(acc)
}

/// `int (A-dot(V) grad R_{v0} + A^p grad R-dot + a A^q grad V) . grad V2`
/// for real `V` and `V2`, before integrating by parts.
pub fn j_direct_unintegrated(spec: &ProblemSpec, v0: &NodalField, vv: &NodalField, v2: &NodalField) -> Result<f64> {
    let r0 = solve_r(spec, v0)?;
    let rdot = solve_rdot(spec, v0, vv, &r0)?;
    let g0 = v0.gradient();
    let ap = a_matrix(spec.p(), &g0)?;
    let aq = a_matrix(spec.q(), &g0)?;
    let (gr, gd, gv, g2) = (r0.gradient(), rdot.gradient(), vv.gradient(), v2.gradient());
    let a = spec.a_elements();
    let area = spec.mesh().element_area();
    Ok((0..g0.len())
        .map(|t| {
            let f = a_dot_point(spec.p(), g0[t], gv[t]) * gr[t] + ap[t] * gd[t] + aq[t] * gv[t] * a[t];
            area[t] * f.dot(&g2[t])
        })
        .sum())
}

/// `I_limit` at `delta` and `delta / 10`.
pub fn delta_sensitivity(
    spec: &ProblemSpec,
    v: &NodalField,
    g: &BoundaryData,
    schedule: &LimitSchedule,
) -> Result<(LimitEstimate, LimitEstimate)> {
    let a = i_limit(spec, v, g, schedule)?;
    let b = i_limit(&spec.clone().with_delta(spec.delta / 10.0), v, g, schedule)?;
    Ok((a, b))
}

/// Solve at one scaling and report the pairing; exposed for diagnostics.
pub fn scaled_pairing(spec: &ProblemSpec, v: &NodalField, g: &BoundaryData, s: f64) -> Result<f64> {
    let omega = default_extension(spec, g)?;
    let sol = solve_dirichlet(spec, &v.trace().scaled(s))?;
    pairing_from_solution(spec, &sol.u, &omega)
}
