//! Fourier reconstruction of the coefficient from CGO probes.
//!
//! Convention: `a_hat(xi) = int a(x) exp(i xi.x) dx` with `a` extended by zero,
//! inverted as a Fourier series on a periodization box containing the domain.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::{j_direct_with, j_fd_many, CVec2, ExpProbe, LimitSchedule};
use crate::error::{Error, Result};
use crate::forward::ProblemSpec;
use crate::linear_elliptic::{solve_r, solve_v_complex};
use crate::mesh::{boundary_values, ComplexBoundaryData, Domain, Mesh, NodalField, Point};
use crate::par;
use crate::tensorops::{a_matrix, Vec2};

/// Probe data for one frequency.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CgoData {
    pub p: f64,
    pub xi: [f64; 2],
    /// Counterclockwise rotation of `xi / |xi|`.
    pub z: [f64; 2],
    pub zeta_plus: [[f64; 2]; 2],
    pub zeta_minus: [[f64; 2]; 2],
}

fn to_c(v: &CVec2) -> [[f64; 2]; 2] {
    [[v[0].re, v[0].im], [v[1].re, v[1].im]]
}

fn from_c(v: &[[f64; 2]; 2]) -> CVec2 {
    CVec2::new(Complex64::new(v[0][0], v[0][1]), Complex64::new(v[1][0], v[1][1]))
}

/// `zeta_pm = +-(|xi| / (2 sqrt(p-1))) z + i xi / 2`.
pub fn cgo_data(p: f64, xi: Vec2) -> Result<CgoData> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("exponent p={p} must exceed 1")));
    }
    let n = xi.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput("frequency must be nonzero".into()));
    }
    let z = Vec2::new(-xi.y, xi.x) / n;
    let s = n / (2.0 * (p - 1.0).sqrt());
    let zeta =
        |sign: f64| CVec2::new(Complex64::new(sign * s * z.x, 0.5 * xi.x), Complex64::new(sign * s * z.y, 0.5 * xi.y));
    Ok(CgoData { p, xi: [xi.x, xi.y], z: [z.x, z.y], zeta_plus: to_c(&zeta(1.0)), zeta_minus: to_c(&zeta(-1.0)) })
}

impl CgoData {
    pub fn xi(&self) -> Vec2 {
        Vec2::new(self.xi[0], self.xi[1])
    }

    pub fn z(&self) -> Vec2 {
        Vec2::new(self.z[0], self.z[1])
    }

    pub fn zeta_plus(&self) -> CVec2 {
        from_c(&self.zeta_plus)
    }

    pub fn zeta_minus(&self) -> CVec2 {
        from_c(&self.zeta_minus)
    }

    /// `V1 = exp(zeta_plus . x)`.
    pub fn probe_plus(&self) -> ExpProbe {
        ExpProbe { zeta: self.zeta_plus(), amplitude: Complex64::new(1.0, 0.0) }
    }

    /// `V2 = exp(zeta_minus . x)`.
    pub fn probe_minus(&self) -> ExpProbe {
        ExpProbe { zeta: self.zeta_minus(), amplitude: Complex64::new(1.0, 0.0) }
    }

    /// Probe scaled to unit maximum modulus on the nodes of `mesh`, with the scale.
    pub fn normalized(&self, probe: ExpProbe, mesh: &Mesh) -> (ExpProbe, f64) {
        let m = mesh.nodes().iter().map(|x| probe.value(x).norm()).fold(0.0, f64::max);
        (ExpProbe { zeta: probe.zeta, amplitude: probe.amplitude / m }, m)
    }

    /// `v0 = z . x` on `mesh`.
    pub fn v0(&self, mesh: Arc<Mesh>) -> NodalField {
        NodalField::plane_wave(mesh, self.z())
    }

    /// `-(4 (p-1) / (p+q-2)) / |xi|^2`, the factor turning `J` into `a_hat`.
    pub fn j_to_a_hat(&self, q: f64) -> f64 {
        -4.0 * (self.p - 1.0) / ((self.p + q - 2.0) * self.xi().norm_squared())
    }
}

/// How `J` is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    /// Direct integral with exact exponential probes, no DN data.
    Oracle,
    /// Central differences of DN-map limits.
    Pipeline { schedule: LimitSchedule, tau: f64 },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Oracle => "oracle",
            Mode::Pipeline { .. } => "pipeline",
        }
    }
}

/// One evaluated lattice frequency.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencySample {
    pub index: (i32, i32),
    pub xi: [f64; 2],
    /// Absent for the zero frequency.
    pub cgo: Option<CgoData>,
    pub j_value: Complex64,
    pub a_hat: Complex64,
    pub error_bar: f64,
    pub mode: &'static str,
    pub flagged: bool,
}

impl FrequencySample {
    fn conjugate_mirror(&self) -> FrequencySample {
        let xi = [-self.xi[0], -self.xi[1]];
        FrequencySample {
            index: (-self.index.0, -self.index.1),
            xi,
            cgo: self.cgo.map(|c| cgo_data(c.p, Vec2::new(xi[0], xi[1])).expect("nonzero frequency")),
            j_value: self.j_value.conj(),
            a_hat: self.a_hat.conj(),
            error_bar: self.error_bar,
            mode: self.mode,
            flagged: self.flagged,
        }
    }
}

/// Evaluate `a_hat` at one frequency.
pub fn a_hat(spec: &ProblemSpec, cgo: &CgoData, mode: &Mode) -> Result<FrequencySample> {
    let (j, bar, flagged) = match mode {
        Mode::Oracle => (j_oracle(spec, cgo)?, 0.0, false),
        Mode::Pipeline { schedule, tau } => j_pipeline(spec, cgo, schedule, *tau)?,
    };
    let f = cgo.j_to_a_hat(spec.q());
    Ok(FrequencySample {
        index: (0, 0),
        xi: cgo.xi,
        cgo: Some(*cgo),
        j_value: j,
        a_hat: j * f,
        error_bar: bar * f.abs(),
        mode: mode.name(),
        flagged,
    })
}

fn j_oracle(spec: &ProblemSpec, cgo: &CgoData) -> Result<Complex64> {
    let v0 = cgo.v0(spec.mesh().clone());
    let r = solve_r(spec, &v0)?;
    j_direct_with(spec, &v0, &r, &cgo.probe_plus(), &cgo.probe_minus())
}

/// Complex `J` from four real central-difference evaluations, on
/// probes normalized to unit modulus. The error bar adds the distance of
/// the discrete probes from the exact exponentials, weighted by the
/// DN estimate of `int a`.
fn j_pipeline(spec: &ProblemSpec, cgo: &CgoData, schedule: &LimitSchedule, tau: f64) -> Result<(Complex64, f64, bool)> {
    let mesh = spec.mesh();
    let v0 = cgo.v0(mesh.clone());
    let (p1, m1) = cgo.normalized(cgo.probe_plus(), mesh);
    let (p2, m2) = cgo.normalized(cgo.probe_minus(), mesh);
    let t1: ComplexBoundaryData = boundary_values(mesh, |x| p1.value(x));
    let t2: ComplexBoundaryData = boundary_values(mesh, |x| p2.value(x));
    let gs = [t2.re(), t2.im(), v0.trace()];
    let phis = [t1.re(), t1.im()];
    let rows =
        par::map(&phis, |phi| j_fd_many(spec, &v0, phi, &gs, tau, schedule)).into_iter().collect::<Result<Vec<_>>>()?;
    let (u, w) = (&rows[0], &rows[1]);
    let scale = m1 * m2;
    let j = Complex64::new(u[0].value - w[1].value, u[1].value + w[0].value) * scale;
    let bar_re = u[0].error_bar + w[1].error_bar;
    let bar_im = u[1].error_bar + w[0].error_bar;
    let flagged = rows.iter().any(|r| r[0].flagged || r[1].flagged);

    // int a from the plane-wave pairing I(z.x, z.x).
    let mass = 0.5 * (u[2].i_center + w[2].i_center);
    let kernel = probe_kernel_error(spec, cgo, &p1, &p2, &t1, &t2)?;
    let bar = scale * (bar_re.hypot(bar_im) + mass.abs() * kernel);
    Ok((j, bar, flagged))
}

/// `max |A^q grad V1_h . grad V2_h - A^q grad V1 . grad V2|` over quadrature
/// points, where `V_h` solve the discrete linearized equation with the exact traces.
fn probe_kernel_error(
    spec: &ProblemSpec,
    cgo: &CgoData,
    p1: &ExpProbe,
    p2: &ExpProbe,
    t1: &ComplexBoundaryData,
    t2: &ComplexBoundaryData,
) -> Result<f64> {
    let mesh = spec.mesh();
    let v0 = cgo.v0(mesh.clone());
    let v1 = solve_v_complex(spec.p(), &v0, t1)?;
    let v2 = solve_v_complex(spec.p(), &v0, t2)?;
    let (g1, g2) = (v1.gradient(), v2.gradient());
    let aq = a_matrix(spec.q(), &v0.gradient())?;
    let form = |m: &crate::tensorops::Mat2, u: &CVec2, w: &CVec2| {
        let mu = CVec2::new(m[(0, 0)] * u[0] + m[(0, 1)] * u[1], m[(1, 0)] * u[0] + m[(1, 1)] * u[1]);
        mu[0] * w[0] + mu[1] * w[1]
    };
    let mut worst = 0.0f64;
    for t in 0..mesh.element_count() {
        let discrete = form(&aq[t], &g1[t], &g2[t]);
        for x in mesh.quadrature_points(t) {
            let exact = form(&aq[t], &p1.gradient(&x), &p2.gradient(&x));
            worst = worst.max((discrete - exact).norm());
        }
    }
    Ok(worst)
}

/// Dual lattice `xi = 2 pi (k1 / Lx, k2 / Ly)` of a periodization box, cut to a disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lattice {
    pub period_box: Domain,
    /// Region where the coefficient may be nonzero.
    pub support: Domain,
    pub k_max: i32,
    pub cutoff: f64,
}

impl Lattice {
    pub fn new(period_box: Domain, support: Domain, k_max: i32, cutoff: f64) -> Result<Self> {
        period_box.validate()?;
        support.validate()?;
        let inside = period_box.x_min < support.x_min
            && period_box.x_max > support.x_max
            && period_box.y_min < support.y_min
            && period_box.y_max > support.y_max;
        if !inside {
            return Err(Error::InvalidInput("periodization box must strictly contain the support".into()));
        }
        if k_max < 2 || !(cutoff > 0.0) {
            return Err(Error::InvalidInput("lattice needs k_max >= 2 and a positive cutoff".into()));
        }
        let l = Lattice { period_box, support, k_max, cutoff };
        for k in [(1, 0), (2, 0), (0, 1), (0, 2)] {
            if !l.contains(k) {
                return Err(Error::InvalidInput("cutoff must keep the two smallest axis frequencies".into()));
            }
        }
        Ok(l)
    }

    /// Box `domain` widened by half its size on every side, spacing `pi` for
    /// the unit square, `|xi| <= k_max pi`-type disk.
    pub fn around(domain: Domain, k_max: i32) -> Result<Self> {
        let b = domain.expanded(0.5 * domain.width().max(domain.height()));
        let spacing = 2.0 * PI / b.width().max(b.height());
        Self::new(b, domain, k_max, k_max as f64 * spacing)
    }

    /// 17 x 17 lattice with cutoff `8 pi` on the unit square.
    pub fn standard() -> Self {
        Self::around(Domain::unit_square(), 8).expect("valid lattice")
    }

    /// 9 x 9 lattice with cutoff `4 pi` on the unit square.
    pub fn reduced() -> Self {
        Self::around(Domain::unit_square(), 4).expect("valid lattice")
    }

    pub fn xi(&self, k: (i32, i32)) -> Vec2 {
        Vec2::new(2.0 * PI * k.0 as f64 / self.period_box.width(), 2.0 * PI * k.1 as f64 / self.period_box.height())
    }

    pub fn contains(&self, k: (i32, i32)) -> bool {
        k.0.abs() <= self.k_max && k.1.abs() <= self.k_max && self.xi(k).norm() <= self.cutoff * (1.0 + 1e-12)
    }

    /// All indices in the disk, including zero, in lexicographic order.
    pub fn indices(&self) -> Vec<(i32, i32)> {
        let r = -self.k_max..=self.k_max;
        r.clone().flat_map(|i| r.clone().map(move |j| (i, j))).filter(|k| self.contains(*k)).collect()
    }

    /// One index out of every `+-k` pair.
    pub fn half(&self) -> Vec<(i32, i32)> {
        self.indices().into_iter().filter(|&(i, j)| i > 0 || (i == 0 && j > 0)).collect()
    }

    pub fn center(&self) -> Point {
        self.period_box.center()
    }
}

/// Evaluate the half lattice, mirror it by conjugation and add the zero
/// frequency from [`dc_estimate`].
pub fn sample_lattice(spec: &ProblemSpec, lattice: &Lattice, mode: &Mode) -> Result<Vec<FrequencySample>> {
    let half = lattice.half();
    let evaluated = par::map(&half, |&k| -> Result<FrequencySample> {
        let cgo = cgo_data(spec.p(), lattice.xi(k))?;
        let mut s = a_hat(spec, &cgo, mode)?;
        s.index = k;
        Ok(s)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<FrequencySample> = evaluated.iter().flat_map(|s| [s.clone(), s.conjugate_mirror()]).collect();
    let (dc, bar) = dc_estimate(&all, lattice)?;
    all.push(FrequencySample {
        index: (0, 0),
        xi: [0.0, 0.0],
        cgo: None,
        j_value: Complex64::new(0.0, 0.0),
        a_hat: Complex64::new(dc, 0.0),
        error_bar: bar,
        mode: mode.name(),
        flagged: all.iter().any(|s| s.index.0.abs() + s.index.1.abs() <= 2 && s.flagged),
    });
    all.sort_by_key(|s| s.index);
    Ok(all)
}

/// `a_hat(0)` by quadratic extrapolation `(4 f(1) - f(2)) / 3` along the four
/// axis directions, applied to the transform recentred at the box centre.
pub fn dc_estimate(samples: &[FrequencySample], lattice: &Lattice) -> Result<(f64, f64)> {
    let map: BTreeMap<(i32, i32), &FrequencySample> = samples.iter().map(|s| (s.index, s)).collect();
    let c = lattice.center();
    let dirs = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    let mut missing = Vec::new();
    let mut acc = 0.0;
    let mut bar = 0.0;
    for (dx, dy) in dirs {
        let mut f = [0.0; 2];
        for (m, slot) in f.iter_mut().enumerate() {
            let k = (dx * (m as i32 + 1), dy * (m as i32 + 1));
            match map.get(&k) {
                Some(s) => {
                    let xi = lattice.xi(k);
                    let shift = Complex64::from_polar(1.0, -(xi.x * c.x + xi.y * c.y));
                    *slot = (s.a_hat * shift).re;
                    bar += s.error_bar * if m == 0 { 4.0 } else { 1.0 } / 12.0;
                }
                None => missing.push(k),
            }
        }
        acc += (4.0 * f[0] - f[1]) / 3.0;
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteLattice { missing });
    }
    Ok((acc / 4.0, bar))
}

/// Reconstructed coefficient with its frequency data.
#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub lattice: Lattice,
    pub samples: Vec<FrequencySample>,
    pub a_rec: NodalField,
    /// Largest imaginary part left after symmetrization.
    pub imaginary_residue: f64,
}

/// `a_rec(x) = Re (1/|box|) sum a_hat(xi) exp(-i xi.x)` on the nodes of
/// `grid` inside the support, zero elsewhere.
pub fn invert(samples: &[FrequencySample], grid: Arc<Mesh>, lattice: &Lattice) -> Result<ReconstructionResult> {
    let map: BTreeMap<(i32, i32), Complex64> = samples.iter().map(|s| (s.index, s.a_hat)).collect();
    let expected = lattice.indices();
    let missing: Vec<(i32, i32)> = expected.iter().copied().filter(|k| !map.contains_key(k)).collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteLattice { missing });
    }
    let sym: Vec<(Vec2, Complex64)> =
        expected.iter().map(|&k| (lattice.xi(k), 0.5 * (map[&k] + map[&(-k.0, -k.1)].conj()))).collect();
    if sym.iter().any(|(_, v)| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("frequency samples"));
    }
    let area = lattice.period_box.area();
    let support = lattice.support;
    let nodes = grid.nodes().to_vec();
    let vals = par::map(&nodes, |x| -> (f64, f64) {
        if !support.contains(x, 1e-12) {
            return (0.0, 0.0);
        }
        let s: Complex64 = sym.iter().map(|(xi, v)| v * Complex64::from_polar(1.0, -xi.dot(x))).sum();
        let s = s / area;
        (s.re, s.im.abs())
    });
    let residue = vals.iter().fold(0.0f64, |m, v| m.max(v.1));
    let a_rec = NodalField::new(grid, vals.into_iter().map(|v| v.0).collect())?;
    Ok(ReconstructionResult { lattice: *lattice, samples: samples.to_vec(), a_rec, imaginary_residue: residue })
}

/// `int_box f(x) exp(i xi.x) dx` by the periodic trapezoidal rule on `n x n` cells.
pub fn quadrature_transform(f: impl Fn(&Point) -> f64, period_box: &Domain, n: usize, xi: Vec2) -> Complex64 {
    let (hx, hy) = (period_box.width() / n as f64, period_box.height() / n as f64);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let x = Point::new(period_box.x_min + i as f64 * hx, period_box.y_min + j as f64 * hy);
            let v = f(&x);
            if v != 0.0 {
                acc += Complex64::from_polar(v, xi.dot(&x));
            }
        }
    }
    acc * hx * hy
}

/// Samples of the quadrature transform of `f` over the whole lattice.
pub fn transform_samples(f: impl Fn(&Point) -> f64 + Sync, lattice: &Lattice, n: usize) -> Vec<FrequencySample> {
    let idx = lattice.indices();
    par::map(&idx, |&k| {
        let xi = lattice.xi(k);
        FrequencySample {
            index: k,
            xi: [xi.x, xi.y],
            cgo: None,
            j_value: Complex64::new(0.0, 0.0),
            a_hat: quadrature_transform(&f, &lattice.period_box, n, xi),
            error_bar: 0.0,
            mode: "quadrature",
            flagged: false,
        }
    })
}

/// Pipeline-versus-reference entry.
#[derive(Clone, Debug, Serialize)]
pub struct Discrepancy {
    pub index: (i32, i32),
    pub difference: f64,
    pub error_bar: f64,
    pub within_bar: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub relative_l2: f64,
    pub max_abs: f64,
    pub imaginary_residue: f64,
    pub discrepancies: Vec<Discrepancy>,
}

/// Errors of `result` against `a_true`, and a per-frequency comparison
/// with `reference` samples when given.
pub fn metrics(
    result: &ReconstructionResult,
    a_true: &NodalField,
    reference: Option<&[FrequencySample]>,
) -> Result<Metrics> {
    result.a_rec.check_same_mesh(a_true)?;
    let diff = result.a_rec.add_scaled(-1.0, a_true);
    let norm = a_true.l2_norm();
    let relative_l2 = if norm > 0.0 { diff.l2_norm() / norm } else { diff.l2_norm() };
    let discrepancies = match reference {
        None => Vec::new(),
        Some(refs) => {
            let map: BTreeMap<(i32, i32), &FrequencySample> = refs.iter().map(|s| (s.index, s)).collect();
            result
                .samples
                .iter()
                .filter_map(|s| {
                    map.get(&s.index).map(|r| {
                        let difference = (s.a_hat - r.a_hat).norm();
                        let error_bar = s.error_bar + r.error_bar;
                        Discrepancy { index: s.index, difference, error_bar, within_bar: difference <= error_bar }
                    })
                })
                .collect()
        }
    };
    Ok(Metrics { relative_l2, max_abs: diff.max_abs(), imaginary_residue: result.imaginary_residue, discrepancies })
}

/// Pointwise `A-dot(V1) grad V2` and `A^q grad V1 . grad V2` for the CGO pair at `x`.
pub fn cgo_integrands(cgo: &CgoData, q: f64, x: &Point) -> (CVec2, Complex64) {
    let z = cgo.z();
    let (v1, v2) = (cgo.probe_plus(), cgo.probe_minus());
    let (g1, g2) = (v1.gradient(x), v2.gradient(x));
    let ad = crate::asymptotics::a_dot_complex(cgo.p, z, &g1, &g2);
    let aq = a_matrix(q, &[z]).expect("unit gradient")[0];
    let aq_g2 = CVec2::new(aq[(0, 0)] * g2[0] + aq[(0, 1)] * g2[1], aq[(1, 0)] * g2[0] + aq[(1, 1)] * g2[1]);
    (ad, g1[0] * aq_g2[0] + g1[1] * aq_g2[1])
}

/// Oracle `a_hat` at a single frequency.
pub fn oracle_at(spec: &ProblemSpec, xi: Vec2) -> Result<Complex64> {
    Ok(a_hat(spec, &cgo_data(spec.p(), xi)?, &Mode::Oracle)?.a_hat)
}
