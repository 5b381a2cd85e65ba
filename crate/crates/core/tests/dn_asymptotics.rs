use std::sync::Arc;

use dphase_core::asymptotics::{
    delta_sensitivity, difference_sequences, expansion_error, i_direct, i_direct_with, i_limit, j_direct,
    j_direct_unintegrated, j_fd, vtau_solution, LimitSchedule,
};
use dphase_core::coefficient::Coefficient;
use dphase_core::dn_map::{default_extension, pairing, pairing_from_solution, pairing_plap, DnQuery, PlapCache};
use dphase_core::forward::{solve_dirichlet, ProblemSpec};
use dphase_core::linear_elliptic::{harmonic_extension, solve_v};
use dphase_core::mesh::{boundary_values, integrate, Domain, Mesh, NodalField};
use dphase_core::reconstruct::cgo_data;
use dphase_core::tensorops::{a_matrix, flux, ExponentPair, Vec2};
use num_complex::Complex64;
use proptest::prelude::*;

fn mesh(n: usize) -> Arc<Mesh> {
    Mesh::uniform(n, n, Domain::unit_square()).unwrap()
}

fn spec(m: &Arc<Mesh>, p: f64, q: f64) -> ProblemSpec {
    ProblemSpec::new(ExponentPair::new(p, q).unwrap(), Coefficient::default_bump().to_field(m.clone()).unwrap())
}

fn z() -> Vec2 {
    Vec2::new(0.6, 0.8)
}

#[test]
fn pairing_does_not_depend_on_extension() {
    let m = mesh(16);
    let s = spec(&m, 2.5, 3.5);
    let f = boundary_values(&m, |x| x.x + 0.3 * x.y * x.y);
    let g = boundary_values(&m, |x| (2.0 * x.x).sin() * x.y);
    let w1 = harmonic_extension(&m, &g).unwrap();
    let bubble = NodalField::from_fn(m.clone(), |x| x.x * (1.0 - x.x) * x.y * (1.0 - x.y));
    let w2 = w1.add_scaled(3.0, &bubble);
    let a = pairing(&DnQuery { spec: &s, f: &f, g: &g, omega: Some(&w1) }).unwrap();
    let b = pairing(&DnQuery { spec: &s, f: &f, g: &g, omega: Some(&w2) }).unwrap();
    assert!((a - b).abs() <= 10.0 * s.newton_tol * a.abs().max(1.0), "{a} {b}");
}

#[test]
fn homogeneity_shortcut_matches_resolve() {
    let m = mesh(16);
    let s = ProblemSpec::p_laplace(m.clone(), 3.0).unwrap();
    let f = boundary_values(&m, |x| x.x * x.x + x.y);
    let g = boundary_values(&m, |x| x.x - 0.5 * x.y);
    for eps in [1e-1, 1e-2, 1e-3] {
        let short = pairing_plap(&s, 3.0, &f, &g, eps).unwrap();
        let direct = pairing(&DnQuery { spec: &s, f: &f.scaled(eps), g: &g, omega: None }).unwrap();
        assert!((short - direct).abs() <= 10.0 * s.newton_tol * direct.abs().max(eps * eps), "{eps}: {short} {direct}");
    }
}

#[test]
fn self_pairing_is_nonnegative_and_monotone_in_coefficient() {
    let m = mesh(16);
    let f = boundary_values(&m, |x| (3.0 * x.x).cos() + x.y * x.y);
    let e = ExponentPair::new(2.0, 3.0).unwrap();
    let mut last = -f64::INFINITY;
    for amp in [0.0, 0.5, 1.0, 2.0] {
        let a = Coefficient::gaussian(amp, [0.5, 0.5], 0.15).to_field(m.clone()).unwrap();
        let s = ProblemSpec::new(e, a);
        let v = pairing(&DnQuery { spec: &s, f: &f, g: &f, omega: None }).unwrap();
        assert!(v >= -10.0 * s.newton_tol);
        assert!(v >= last - 1e-9, "{amp}: {v} < {last}");
        last = v;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pairing_is_linear_in_g(c1 in -2.0..2.0f64, c2 in -2.0..2.0f64) {
        let m = mesh(8);
        let s = spec(&m, 3.0, 2.0);
        let f = boundary_values(&m, |x| x.x * x.y + 0.5 * x.x);
        let u = solve_dirichlet(&s, &f).unwrap().u;
        let w1 = NodalField::from_fn(m.clone(), |x| x.x * x.x);
        let w2 = NodalField::from_fn(m.clone(), |x| x.y.sin());
        let combined = w1.scaled(c1).add_scaled(c2, &w2);
        let lhs = pairing_from_solution(&s, &u, &combined).unwrap();
        let rhs = c1 * pairing_from_solution(&s, &u, &w1).unwrap() + c2 * pairing_from_solution(&s, &u, &w2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}

#[test]
fn i_direct_wiring_and_constant_coefficient() {
    let m = mesh(16);
    let s = spec(&m, 2.0, 3.0);
    let v = NodalField::plane_wave(m.clone(), z());
    let g = boundary_values(&m, |x| x.x * x.x);
    let omega = default_extension(&s, &g).unwrap();
    let r = dphase_core::linear_elliptic::solve_r(&s, &v).unwrap();
    let gv = v.gradient();
    let ap = a_matrix(2.0, &gv).unwrap();
    let (gr, gw) = (r.gradient(), omega.gradient());
    let a = s.a_elements();
    let t1: Vec<f64> = (0..gv.len()).map(|t| (ap[t] * gr[t]).dot(&gw[t])).collect();
    let t2: Vec<f64> = (0..gv.len()).map(|t| a[t] * flux(3.0, gv[t]).dot(&gw[t])).collect();
    let sum = integrate(&m, &t1).unwrap() + integrate(&m, &t2).unwrap();
    let direct = i_direct_with(&s, &v, &omega).unwrap();
    assert!((direct - sum).abs() <= 1e-12 * direct.abs());

    // a = c: the corrector vanishes and I = c z . int grad omega = 0.6 c for g = x^2.
    let c = 0.7;
    let sc = ProblemSpec::new(ExponentPair::new(2.0, 3.0).unwrap(), NodalField::constant(m.clone(), c));
    assert!((i_direct(&sc, &v, &g).unwrap() - 0.6 * c).abs() < 1e-10);
}

#[test]
fn leading_term_cancels_without_coefficient() {
    let m = mesh(12);
    let s = ProblemSpec::new(ExponentPair::new(2.5, 3.5).unwrap(), NodalField::zeros(m.clone()));
    let v = NodalField::plane_wave(m.clone(), z());
    let omega = NodalField::from_fn(m.clone(), |x| x.x * x.x);
    let sched = LimitSchedule::epsilon_default();
    let (seqs, _) = difference_sequences(&s, &v, &[omega], &sched, &PlapCache::new(&s)).unwrap();
    for (d, e) in seqs[0].iter().zip(&sched.values) {
        assert!(d.abs() <= 1e-12 * e.powf(2.5 - 3.5), "{d}");
    }
}

#[test]
fn i_limit_is_linear_in_g_and_near_oracle() {
    let m = mesh(24);
    let s = spec(&m, 2.0, 3.0);
    let v = NodalField::plane_wave(m.clone(), z());
    let g = boundary_values(&m, |x| x.x * x.x);
    let sched = LimitSchedule::epsilon_default();
    let one = i_limit(&s, &v, &g, &sched).unwrap();
    let two = i_limit(&s, &v, &g.scaled(2.0), &sched).unwrap();
    assert!((two.value - 2.0 * one.value).abs() <= 1e-8 * one.value.abs());
    let direct = i_direct(&s, &v, &g).unwrap();
    assert!((one.value - direct).abs() <= 0.02 * direct.abs());
    assert!(one.error_bar > 0.0 && !one.flagged);
}

#[test]
fn expansion_in_both_regimes() {
    let m = mesh(24);
    let v = NodalField::plane_wave(m.clone(), z());
    let low = expansion_error(&spec(&m, 2.0, 3.0), &v, &LimitSchedule::epsilon_default()).unwrap();
    assert!(low.passed && low.fitted_order > 0.5, "{low:?}");
    let high = expansion_error(&spec(&m, 3.0, 2.0), &v, &LimitSchedule::mu_default()).unwrap();
    assert!(high.passed, "{high:?}");
}

#[test]
fn probes_with_critical_points_are_rejected() {
    let m = mesh(12);
    let s = spec(&m, 2.0, 3.0);
    let v = NodalField::from_fn(m.clone(), |x| (x.x - 0.5).powi(2) + (x.y - 0.5).powi(2));
    assert!(expansion_error(&s, &v, &LimitSchedule::epsilon_default()).is_err());
}

#[test]
fn p2_family_is_affine_in_tau() {
    let m = mesh(16);
    let s = ProblemSpec::p_laplace(m.clone(), 2.0).unwrap();
    let v0 = NodalField::plane_wave(m.clone(), z());
    let phi = boundary_values(&m, |x| x.x * x.y);
    let ext = harmonic_extension(&m, &phi).unwrap();
    let vt = vtau_solution(&s, 2.0, &v0, &phi, 0.3).unwrap();
    assert!(vt.solution.u.add_scaled(-1.0, &v0.add_scaled(0.3, &ext)).max_abs() < 1e-9);
}

#[test]
fn j_vanishes_without_coefficient_and_is_linear_in_phi2() {
    let m = mesh(16);
    let e = ExponentPair::new(2.0, 3.0).unwrap();
    let zero = ProblemSpec::new(e, NodalField::zeros(m.clone()));
    let v0 = NodalField::plane_wave(m.clone(), z());
    let phi1 = boundary_values(&m, |x| x.x * x.y);
    let phi2 = boundary_values(&m, |x| x.x * x.x);
    let sched = LimitSchedule::epsilon_default();
    let j0 = j_fd(&zero, &v0, &phi1, &phi2, 1e-2, &sched).unwrap();
    assert!(j0.value.abs() < 1e-6, "{j0:?}");
    let v1 = solve_v(2.0, &v0, &phi1).unwrap();
    assert_eq!(j_direct(&zero, &v0, &v1, &v1).unwrap(), Complex64::new(0.0, 0.0));

    let s = spec(&m, 2.0, 3.0);
    let a = j_fd(&s, &v0, &phi1, &phi2, 1e-2, &sched).unwrap();
    let b = j_fd(&s, &v0, &phi1, &phi2.scaled(3.0), 1e-2, &sched).unwrap();
    assert!((b.value - 3.0 * a.value).abs() <= 1e-6 * a.value.abs());
}

#[test]
fn integrated_and_unintegrated_forms_agree() {
    let m = mesh(64);
    let s = spec(&m, 3.0, 2.0);
    let v0 = NodalField::plane_wave(m.clone(), z());
    let v1 = solve_v(3.0, &v0, &boundary_values(&m, |x| x.x * x.y)).unwrap();
    let v2 = solve_v(3.0, &v0, &boundary_values(&m, |x| (x.x - x.y).powi(2))).unwrap();
    let ibp = j_direct(&s, &v0, &v1, &v2).unwrap().re;
    let pre = j_direct_unintegrated(&s, &v0, &v1, &v2).unwrap();
    assert!((ibp - pre).abs() <= 1e-3 * pre.abs(), "{ibp} {pre}");
}

#[test]
fn constant_coefficient_cgo_pair_has_closed_form() {
    let m = mesh(64);
    let (p, q, c) = (2.0, 3.0, 0.8);
    let s = ProblemSpec::new(ExponentPair::new(p, q).unwrap(), NodalField::constant(m.clone(), c));
    let xi = Vec2::new(3.0, -2.0);
    let cgo = cgo_data(p, xi).unwrap();
    let j = j_direct(&s, &cgo.v0(m.clone()), &cgo.probe_plus(), &cgo.probe_minus()).unwrap();
    let side = |k: f64| (Complex64::new(0.0, k).exp() - 1.0) / Complex64::new(0.0, k);
    let want = side(xi.x) * side(xi.y) * (-c * (p + q - 2.0) / (4.0 * (p - 1.0)) * xi.norm_squared());
    assert!((j - want).norm() <= 1e-3 * want.norm(), "{j} {want}");
}

#[test]
fn delta_change_is_invisible() {
    let m = mesh(16);
    let s = spec(&m, 2.0, 3.0);
    let v = NodalField::plane_wave(m.clone(), z());
    let g = boundary_values(&m, |x| x.x * x.x);
    let (a, b) = delta_sensitivity(&s, &v, &g, &LimitSchedule::epsilon_default()).unwrap();
    assert!((a.value - b.value).abs() < a.error_bar.min(b.error_bar));
}
