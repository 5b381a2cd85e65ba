use std::sync::Arc;

use dphase_core::asymptotics::LimitSchedule;
use dphase_core::coefficient::Coefficient;
use dphase_core::forward::ProblemSpec;
use dphase_core::mesh::{Domain, Mesh, NodalField, Point};
use dphase_core::reconstruct::{
    a_hat, cgo_data, dc_estimate, invert, metrics, quadrature_transform, sample_lattice, transform_samples, Lattice,
    Mode,
};
use dphase_core::tensorops::{ExponentPair, Vec2};
use num_complex::Complex64;
use proptest::prelude::*;

fn mesh(n: usize) -> Arc<Mesh> {
    Mesh::uniform(n, n, Domain::unit_square()).unwrap()
}

fn bump_spec(m: &Arc<Mesh>) -> ProblemSpec {
    ProblemSpec::new(ExponentPair::new(2.0, 3.0).unwrap(), Coefficient::default_bump().to_field(m.clone()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cgo_product_is_the_fourier_kernel(
        p in 1.2..4.0f64,
        x1 in -20.0..20.0f64,
        x2 in -20.0..20.0f64,
        px in 0.0..1.0f64,
        py in 0.0..1.0f64,
    ) {
        prop_assume!(x1.hypot(x2) > 0.1);
        let c = cgo_data(p, Vec2::new(x1, x2)).unwrap();
        let x = Point::new(px, py);
        let prod = c.probe_plus().value(&x) * c.probe_minus().value(&x);
        let want = Complex64::from_polar(1.0, x1 * px + x2 * py);
        prop_assert!((prod - want).norm() <= 1e-14 * prod.norm().max(1.0) * 10.0);
    }
}

#[test]
fn zero_coefficient_gives_zero_in_both_modes() {
    let m = mesh(12);
    let s = ProblemSpec::new(ExponentPair::new(2.0, 3.0).unwrap(), NodalField::zeros(m.clone()));
    let cgo = cgo_data(2.0, Vec2::new(std::f64::consts::PI, 0.0)).unwrap();
    let o = a_hat(&s, &cgo, &Mode::Oracle).unwrap();
    assert_eq!(o.a_hat, Complex64::new(0.0, 0.0));
    let pipe = Mode::Pipeline { schedule: LimitSchedule::epsilon_default(), tau: 1e-2 };
    let p = a_hat(&s, &cgo, &pipe).unwrap();
    assert!(p.a_hat.norm() < 1e-6, "{:?}", p.a_hat);
}

#[test]
fn samples_are_hermitian_and_reconstruction_is_real() {
    let m = mesh(16);
    let lattice = Lattice::reduced();
    let samples = sample_lattice(&bump_spec(&m), &lattice, &Mode::Oracle).unwrap();
    assert_eq!(samples.len(), lattice.indices().len());
    for s in &samples {
        let mirror = samples.iter().find(|r| r.index == (-s.index.0, -s.index.1)).unwrap();
        assert!((s.a_hat - mirror.a_hat.conj()).norm() <= 1e-14 * s.a_hat.norm().max(1e-300));
    }
    let r = invert(&samples, m, &lattice).unwrap();
    assert!(r.imaginary_residue < 1e-12);
}

#[test]
fn missing_frequency_is_reported() {
    let m = mesh(8);
    let lattice = Lattice::reduced();
    let mut samples = transform_samples(|_| 1.0, &lattice, 16);
    samples.retain(|s| s.index != (1, 2));
    assert!(invert(&samples, m, &lattice).is_err());
}

#[test]
fn dc_estimate_recovers_mass() {
    let lattice = Lattice::standard();
    let bump = Coefficient::default_bump();
    let samples = transform_samples(|x| bump.eval(x), &lattice, 256);
    let (dc, _) = dc_estimate(&samples, &lattice).unwrap();
    // int exp(-50 r^2) over the plane is pi / 50; the tail outside the box is negligible.
    let mass = std::f64::consts::PI / 50.0;
    assert!((dc - mass).abs() < 0.01 * mass, "{dc} {mass}");
}

#[test]
fn smooth_plateau_is_recovered_in_the_middle() {
    let m = mesh(32);
    let smooth = |t: f64| {
        let s = ((t - 0.15) / 0.2).clamp(0.0, 1.0);
        s * s * (3.0 - 2.0 * s)
    };
    let plateau = move |x: &Point| smooth(x.x) * smooth(1.0 - x.x) * smooth(x.y) * smooth(1.0 - x.y);
    let lattice = Lattice::standard();
    let samples = transform_samples(plateau, &lattice, 512);
    let r = invert(&samples, m.clone(), &lattice).unwrap();
    let inner: Vec<f64> = m
        .nodes()
        .iter()
        .zip(r.a_rec.values())
        .filter(|(x, _)| (0.4..=0.6).contains(&x.x) && (0.4..=0.6).contains(&x.y))
        .map(|(_, v)| *v)
        .collect();
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn metrics_match_an_independent_mass_matrix_norm() {
    let m = mesh(10);
    let lattice = Lattice::reduced();
    let bump = Coefficient::default_bump();
    let samples = transform_samples(|x| bump.eval(x), &lattice, 64);
    let r = invert(&samples, m.clone(), &lattice).unwrap();
    let truth = bump.to_field(m.clone()).unwrap();
    let got = metrics(&r, &truth, Some(&samples)).unwrap();

    // Exact P1 integral: int u^2 = area/12 (sum u_i^2 + (sum u_i)^2) per triangle.
    let sq = |u: &[f64]| -> f64 {
        m.triangles()
            .iter()
            .zip(m.element_area())
            .map(|(t, a)| {
                let v = [u[t[0]], u[t[1]], u[t[2]]];
                a / 12.0 * (v.iter().map(|x| x * x).sum::<f64>() + v.iter().sum::<f64>().powi(2))
            })
            .sum()
    };
    let diff: Vec<f64> = r.a_rec.values().iter().zip(truth.values()).map(|(a, b)| a - b).collect();
    let want = (sq(&diff) / sq(truth.values())).sqrt();
    assert!((got.relative_l2 - want).abs() < 1e-12 * want, "{} {want}", got.relative_l2);
    let max = diff.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    assert_eq!(got.max_abs, max);
    assert!(got.discrepancies.iter().all(|d| d.difference == 0.0 && d.within_bar));
}

#[test]
fn quadrature_transform_of_a_box_indicator_is_exact_at_zero() {
    let b = Domain::new(-0.5, 1.5, -0.5, 1.5).unwrap();
    let v = quadrature_transform(|_| 1.0, &b, 40, Vec2::zeros());
    assert!((v.re - 4.0).abs() < 1e-12 && v.im.abs() < 1e-12);
    let k = quadrature_transform(|_| 1.0, &b, 40, Vec2::new(std::f64::consts::PI, 0.0));
    assert!(k.norm() < 1e-12);
}

#[test]
fn oracle_matches_quadrature_at_low_frequency() {
    let m = mesh(64);
    let spec = bump_spec(&m);
    let bump = Coefficient::default_bump();
    let xi = Vec2::new(std::f64::consts::PI, std::f64::consts::PI);
    let oracle = a_hat(&spec, &cgo_data(2.0, xi).unwrap(), &Mode::Oracle).unwrap().a_hat;
    let quad = quadrature_transform(|x| bump.eval(x), &Lattice::standard().period_box, 256, xi);
    assert!((oracle - quad).norm() < 0.01 * quad.norm(), "{oracle} {quad}");
}
