//! Command bodies. Each writes its artifacts and returns a summary for stdout.

use dphase_core::asymptotics::{expansion_error, i_direct, i_limit, j_direct, j_fd};
use dphase_core::dn_map::{pairing, DnQuery};
use dphase_core::forward::{min_gradient, solve_dirichlet, verify_principles};
use dphase_core::linear_elliptic::solve_v;
use dphase_core::mesh::{BoundaryData, NodalField};
use dphase_core::reconstruct::{invert, metrics, sample_lattice, FrequencySample, Mode};
use dphase_core::Error;
use serde_json::{json, Value};

use crate::config::{Command, Resolved};
use crate::output::{num, Artifacts};

/// Slack of the maximum and comparison principles, relative to `|f|_inf`.
pub const PRINCIPLE_TOL: f64 = 1e-6;
/// Allowed gap between a limit estimate and its direct integral, beyond
/// three error bars, relative to the direct value.
pub const LIMIT_REL_TOL: f64 = 1e-2;

/// Failure of a command body.
#[derive(Debug)]
pub enum Failure {
    Solver(Error),
    Io(std::io::Error),
    /// `verify` ran but a check did not hold.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Variant name of a solver error, for the manifest.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DegenerateDomain(_) => "degenerate_domain",
        Error::InvalidInput(_) => "invalid_input",
        Error::LengthMismatch { .. } => "length_mismatch",
        Error::MeshMismatch => "mesh_mismatch",
        Error::NonFinite(_) => "non_finite",
        Error::DegenerateGradient { .. } => "degenerate_gradient",
        Error::NotElliptic { .. } => "not_elliptic",
        Error::LinearSolve { .. } => "linear_solve",
        Error::NotConverged { .. } => "not_converged",
        Error::Ordering { .. } => "ordering",
        Error::CriticalPoint { .. } => "critical_point",
        Error::IncompleteLattice { .. } => "incomplete_lattice",
    }
}

pub fn error_payload(e: &Error) -> Value {
    let mut v = json!({ "module_error": error_kind(e), "message": e.to_string() });
    match e {
        Error::NotConverged { last } => {
            v["iterations"] = json!(last.iterations);
            v["residual"] = json!(last.residual);
        }
        Error::IncompleteLattice { missing } => v["missing"] = json!(missing),
        Error::CriticalPoint { min_gradient } => v["min_gradient"] = json!(min_gradient),
        _ => {}
    }
    v
}

pub fn run(r: &Resolved, out: &mut Artifacts) -> Result<Value, Failure> {
    match r.command {
        Command::Forward => forward(r, out),
        Command::Dn => dn(r, out),
        Command::Expand => expand(r, out),
        Command::Verify => verify(r, out),
        Command::Recon => recon(r, out, Mode::Pipeline { schedule: r.schedule.clone(), tau: r.tau }),
        Command::OracleRecon => recon(r, out, Mode::Oracle),
    }
}

fn forward(r: &Resolved, out: &mut Artifacts) -> Result<Value, Failure> {
    let sol = out.time("solve", || solve_dirichlet(&r.spec, &r.f))?;
    out.write_field("solution.csv", &sol.u)?;
    let summary = json!({
        "energy": sol.energy,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "min_gradient": min_gradient(&sol.u),
    });
    out.write_json("forward.json", &summary)?;
    Ok(summary)
}

fn dn(r: &Resolved, out: &mut Artifacts) -> Result<Value, Failure> {
    let q = |f, g| DnQuery { spec: &r.spec, f, g, omega: None };
    let fg = out.time("pairing_fg", || pairing(&q(&r.f, &r.g)))?;
    let ff = out.time("pairing_ff", || pairing(&q(&r.f, &r.f)))?;
    let summary = json!({ "pairing_f_g": fg, "pairing_f_f": ff });
    out.write_json("dn.json", &summary)?;
    Ok(summary)
}

fn expand(r: &Resolved, out: &mut Artifacts) -> Result<Value, Failure> {
    let v = NodalField::plane_wave(r.mesh.clone(), r.z);
    let rep = out.time("expansion", || expansion_error(&r.spec, &v, &r.schedule))?;
    let rows =
        r.schedule.values.iter().zip(&rep.values).zip(&rep.errors).map(|((s, v), e)| vec![num(*s), num(*v), num(*e)]);
    out.write_csv("expansion.csv", &["s", "pairing", "error"], rows)?;
    out.write_json("expansion.json", &rep)?;
    Ok(json!({ "fitted_order": rep.fitted_order, "passed": rep.passed }))
}

fn verify(r: &Resolved, out: &mut Artifacts) -> Result<Value, Failure> {
    let f1 = BoundaryData::new(&r.mesh, r.f.values.iter().map(|v| v + 0.25).collect())?;
    let principles = out.time("principles", || verify_principles(&r.spec, &f1, &r.f))?;

    let v0 = NodalField::plane_wave(r.mesh.clone(), r.z);
    let il = out.time("i_limit", || i_limit(&r.spec, &v0, &r.g, &r.schedule))?;
    let id = out.time("i_direct", || i_direct(&r.spec, &v0, &r.g))?;
    let jf = out.time("j_fd", || j_fd(&r.spec, &v0, &r.f, &r.g, r.tau, &r.schedule))?;
    let jd = out.time("j_direct", || -> dphase_core::Result<f64> {
        let v1 = solve_v(r.spec.p(), &v0, &r.f)?;
        let v2 = solve_v(r.spec.p(), &v0, &r.g)?;
        Ok(j_direct(&r.spec, &v0, &v1, &v2)?.re)
    })?;

    let agree = |lim: f64, bar: f64, direct: f64| (lim - direct).abs() <= 3.0 * bar + LIMIT_REL_TOL * direct.abs();
    let checks = json!({
        "principles": principles.holds(PRINCIPLE_TOL),
        "i_limit_vs_direct": agree(il.value, il.error_bar, id) && !il.flagged,
        "j_fd_vs_direct": agree(jf.value, jf.error_bar, jd) && !jf.flagged,
    });
    let summary = json!({
        "principles": principles,
        "i_limit": il,
        "i_direct": id,
        "j_fd": jf,
        "j_direct": jd,
        "checks": checks,
    });
    out.write_json("verify.json", &summary)?;
    let failed: Vec<&String> =
        checks.as_object().unwrap().iter().filter(|(_, v)| v != &&json!(true)).map(|(k, _)| k).collect();
    if !failed.is_empty() {
        return Err(Failure::Check(format!("checks failed: {failed:?}")));
    }
    Ok(checks)
}

fn lattice_rows(samples: &[FrequencySample]) -> impl Iterator<Item = Vec<String>> + '_ {
    samples.iter().map(|s| {
        vec![
            num(s.xi[0]),
            num(s.xi[1]),
            num(s.a_hat.re),
            num(s.a_hat.im),
            num(s.error_bar),
            s.mode.to_string(),
            s.flagged.to_string(),
        ]
    })
}

const LATTICE_HEADER: [&str; 7] = ["xi1", "xi2", "re_a_hat", "im_a_hat", "error_bar", "mode", "flagged"];

fn recon(r: &Resolved, out: &mut Artifacts, mode: Mode) -> Result<Value, Failure> {
    let samples = out.time("sample_lattice", || sample_lattice(&r.spec, &r.lattice, &mode))?;
    out.write_csv("a_hat.csv", &LATTICE_HEADER, lattice_rows(&samples))?;
    let result = out.time("invert", || invert(&samples, r.mesh.clone(), &r.lattice))?;
    out.write_field("a_rec.csv", &result.a_rec)?;

    let reference = match mode {
        Mode::Oracle => None,
        Mode::Pipeline { .. } => {
            Some(out.time("oracle_reference", || sample_lattice(&r.spec, &r.lattice, &Mode::Oracle))?)
        }
    };
    let m = metrics(&result, &r.spec.a, reference.as_deref())?;
    let outside = m.discrepancies.iter().filter(|d| !d.within_bar).count();
    let worst = m.discrepancies.iter().map(|d| d.difference / d.error_bar.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    let summary = json!({
        "mode": mode.name(),
        "frequencies": samples.len(),
        "flagged": samples.iter().filter(|s| s.flagged).count(),
        "lattice": r.lattice,
        "relative_l2": m.relative_l2,
        "max_abs": m.max_abs,
        "imaginary_residue": m.imaginary_residue,
        "max_error_bar": samples.iter().map(|s| s.error_bar).fold(0.0, f64::max),
        "outside_oracle_bar": reference.as_ref().map(|_| outside),
        "worst_ratio_to_bar": reference.as_ref().map(|_| worst),
    });
    out.write_json("metrics.json", &summary)?;
    Ok(summary)
}
