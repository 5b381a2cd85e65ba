//! Run configuration: a sectioned TOML file plus `--section-key` flag overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use dphase_core::asymptotics::LimitSchedule;
use dphase_core::coefficient::{self, Coefficient};
use dphase_core::forward::{
    ProblemSpec, DEFAULT_CONTINUATION_STEPS, DEFAULT_DELTA, DEFAULT_MAX_ITERS, DEFAULT_NEWTON_TOL,
};
use dphase_core::mesh::{boundary_values, BoundaryData, Domain, Mesh, NodalField, Point};
use dphase_core::reconstruct::Lattice;
use dphase_core::tensorops::{ExponentPair, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "DPHASE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "dphase-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Forward,
    Dn,
    Expand,
    Verify,
    Recon,
    OracleRecon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientKind {
    Zero,
    Constant,
    Gaussian,
    File,
}

/// Named boundary data. `plane-wave` is `z . x` with `data.z`; `random` is a
/// seeded trigonometric polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPreset {
    PlaneWave,
    Quadratic,
    Product,
    Sine,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { n: 32, x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub newton_tol: f64,
    pub max_iters: usize,
    pub continuation_steps: usize,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            p: 2.0,
            q: 3.0,
            delta: DEFAULT_DELTA,
            newton_tol: DEFAULT_NEWTON_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            continuation_steps: DEFAULT_CONTINUATION_STEPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSection {
    pub kind: CoefficientKind,
    /// Used by `constant`.
    pub value: f64,
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
    /// CSV with a `value` column in node order, used by `file`.
    pub path: Option<PathBuf>,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        CoefficientSection {
            kind: CoefficientKind::Gaussian,
            value: 0.0,
            amplitude: 1.0,
            center: [0.5, 0.5],
            width: 0.1,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Dirichlet datum of `forward`, `dn` and `verify`, and `phi1` of the J check.
    pub f: BoundaryPreset,
    /// Test datum of `dn`, `verify`, and `phi2` of the J check.
    pub g: BoundaryPreset,
    /// Direction of plane-wave data and of the probe `v = z . x`.
    pub z: [f64; 2],
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { f: BoundaryPreset::PlaneWave, g: BoundaryPreset::Quadratic, z: [0.6, 0.8] }
    }
}

/// Geometric limit schedule; unset fields take the regime default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub start: Option<f64>,
    pub ratio: Option<f64>,
    pub count: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconSection {
    pub k_max: i32,
    pub tau: f64,
}

impl Default for ReconSection {
    fn default() -> Self {
        ReconSection { k_max: 8, tau: 1e-2 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub out_dir: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    pub workers: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub mesh: MeshSection,
    pub problem: ProblemSection,
    pub coefficient: CoefficientSection,
    pub data: DataSection,
    pub schedule: ScheduleSection,
    pub recon: ReconSection,
    pub run: RunSection,
}

/// One flag per config key.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    #[arg(long)]
    pub mesh_n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub mesh_x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mesh_x_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mesh_y_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mesh_y_max: Option<f64>,

    #[arg(long)]
    pub problem_p: Option<f64>,
    #[arg(long)]
    pub problem_q: Option<f64>,
    #[arg(long)]
    pub problem_delta: Option<f64>,
    #[arg(long)]
    pub problem_newton_tol: Option<f64>,
    #[arg(long)]
    pub problem_max_iters: Option<usize>,
    #[arg(long)]
    pub problem_continuation_steps: Option<usize>,

    #[arg(long, value_enum)]
    pub coefficient_kind: Option<CoefficientKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub coefficient_value: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub coefficient_amplitude: Option<f64>,
    /// `x,y`
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub coefficient_center: Option<[f64; 2]>,
    #[arg(long)]
    pub coefficient_width: Option<f64>,
    #[arg(long)]
    pub coefficient_path: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub data_f: Option<BoundaryPreset>,
    #[arg(long, value_enum)]
    pub data_g: Option<BoundaryPreset>,
    /// `z1,z2`
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub data_z: Option<[f64; 2]>,

    #[arg(long)]
    pub schedule_start: Option<f64>,
    #[arg(long)]
    pub schedule_ratio: Option<f64>,
    #[arg(long)]
    pub schedule_count: Option<usize>,

    #[arg(long)]
    pub recon_k_max: Option<i32>,
    #[arg(long)]
    pub recon_tau: Option<f64>,

    #[arg(long)]
    pub run_out_dir: Option<PathBuf>,
    #[arg(long)]
    pub run_workers: Option<usize>,
    #[arg(long)]
    pub run_seed: Option<u64>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> =
        s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    match v[..] {
        [a, b] => Ok([a, b]),
        _ => Err(format!("expected two comma-separated numbers, got {s:?}")),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Apply flag overrides; flags win over the file.
    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($($field:expr => $flag:expr),* $(,)?) => { $(if let Some(v) = $flag { $field = v; })* };
        }
        set! {
            self.mesh.n => o.mesh_n,
            self.mesh.x_min => o.mesh_x_min,
            self.mesh.x_max => o.mesh_x_max,
            self.mesh.y_min => o.mesh_y_min,
            self.mesh.y_max => o.mesh_y_max,
            self.problem.p => o.problem_p,
            self.problem.q => o.problem_q,
            self.problem.delta => o.problem_delta,
            self.problem.newton_tol => o.problem_newton_tol,
            self.problem.max_iters => o.problem_max_iters,
            self.problem.continuation_steps => o.problem_continuation_steps,
            self.coefficient.kind => o.coefficient_kind,
            self.coefficient.value => o.coefficient_value,
            self.coefficient.amplitude => o.coefficient_amplitude,
            self.coefficient.center => o.coefficient_center,
            self.coefficient.width => o.coefficient_width,
            self.data.f => o.data_f,
            self.data.g => o.data_g,
            self.data.z => o.data_z,
            self.recon.k_max => o.recon_k_max,
            self.recon.tau => o.recon_tau,
            self.run.workers => o.run_workers,
            self.run.seed => o.run_seed,
        }
        if o.coefficient_path.is_some() {
            self.coefficient.path = o.coefficient_path;
        }
        if o.schedule_start.is_some() {
            self.schedule.start = o.schedule_start;
        }
        if o.schedule_ratio.is_some() {
            self.schedule.ratio = o.schedule_ratio;
        }
        if o.schedule_count.is_some() {
            self.schedule.count = o.schedule_count;
        }
        if o.run_out_dir.is_some() {
            self.run.out_dir = o.run_out_dir;
        }
    }

    /// Output directory: config, then the environment, then the default.
    pub fn out_dir(&self) -> PathBuf {
        self.run
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

/// Everything a command needs, built and validated before any solve.
pub struct Resolved {
    pub command: Command,
    pub mesh: Arc<Mesh>,
    pub spec: ProblemSpec,
    pub f: BoundaryData,
    pub g: BoundaryData,
    pub z: Vec2,
    pub schedule: LimitSchedule,
    pub lattice: Lattice,
    pub tau: f64,
}

pub fn resolve(cfg: &RunConfig) -> dphase_core::Result<Resolved> {
    use dphase_core::Error::InvalidInput;
    let command = cfg.command.ok_or_else(|| InvalidInput("no command given".into()))?;
    let m = &cfg.mesh;
    let domain = Domain::new(m.x_min, m.x_max, m.y_min, m.y_max)?;
    let mesh = Mesh::uniform(m.n, m.n, domain)?;
    let e = ExponentPair::new(cfg.problem.p, cfg.problem.q)?;
    let a = coefficient_field(&cfg.coefficient, &mesh)?;
    let mut spec = ProblemSpec::new(e, a).with_delta(cfg.problem.delta).with_tolerance(cfg.problem.newton_tol);
    spec.max_iters = cfg.problem.max_iters;
    spec.continuation_steps = cfg.problem.continuation_steps;
    spec.validate()?;

    let z = Vec2::new(cfg.data.z[0], cfg.data.z[1]);
    if !(z.norm() > 0.0 && z.norm().is_finite()) {
        return Err(InvalidInput("data.z must be a nonzero vector".into()));
    }
    let f = boundary(cfg.data.f, &mesh, z, cfg.run.seed);
    let g = boundary(cfg.data.g, &mesh, z, cfg.run.seed.wrapping_add(1));

    let default = LimitSchedule::default_for(&e);
    let s = &cfg.schedule;
    let schedule = if s.start.is_none() && s.ratio.is_none() && s.count.is_none() {
        default
    } else {
        let d = &default.values;
        LimitSchedule::geometric(s.start.unwrap_or(d[0]), s.ratio.unwrap_or(d[1] / d[0]), s.count.unwrap_or(d.len()))?
    };
    let lattice = Lattice::around(domain, cfg.recon.k_max)?;
    if !(cfg.recon.tau > 0.0 && cfg.recon.tau < 1.0) {
        return Err(InvalidInput(format!("recon.tau must lie in (0, 1), got {}", cfg.recon.tau)));
    }
    Ok(Resolved { command, mesh, spec, f, g, z, schedule, lattice, tau: cfg.recon.tau })
}

fn coefficient_field(c: &CoefficientSection, mesh: &Arc<Mesh>) -> dphase_core::Result<NodalField> {
    let preset = match c.kind {
        CoefficientKind::Zero => Coefficient::Zero,
        CoefficientKind::Constant => Coefficient::Constant { value: c.value },
        CoefficientKind::Gaussian => Coefficient::gaussian(c.amplitude, c.center, c.width),
        CoefficientKind::File => {
            let path = c.path.as_ref().ok_or_else(|| {
                dphase_core::Error::InvalidInput("coefficient.path is required for kind = file".into())
            })?;
            return coefficient::from_values(mesh.clone(), read_values(path)?);
        }
    };
    preset.to_field(mesh.clone())
}

/// The `value` column of a CSV file, or its only column.
fn read_values(path: &Path) -> dphase_core::Result<Vec<f64>> {
    let bad = |e: String| dphase_core::Error::InvalidInput(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = match headers.iter().position(|h| h.trim() == "value") {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => return Err(bad("no value column".into())),
    };
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| bad(e.to_string()))?;
            let cell = r.get(col).unwrap_or("").trim();
            cell.parse::<f64>().map_err(|e| bad(format!("{cell:?}: {e}")))
        })
        .collect()
}

pub fn boundary(preset: BoundaryPreset, mesh: &Mesh, z: Vec2, seed: u64) -> BoundaryData {
    use std::f64::consts::PI;
    match preset {
        BoundaryPreset::PlaneWave => boundary_values(mesh, |x: &Point| z.dot(x)),
        BoundaryPreset::Quadratic => boundary_values(mesh, |x: &Point| x.x * x.x),
        BoundaryPreset::Product => boundary_values(mesh, |x: &Point| x.x * x.y),
        BoundaryPreset::Sine => boundary_values(mesh, |x: &Point| (PI * x.x).sin() * (1.0 + x.y)),
        BoundaryPreset::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let terms: Vec<[f64; 4]> = (0..6)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(0.0..2.0 * PI),
                    ]
                })
                .collect();
            boundary_values(mesh, |x: &Point| terms.iter().map(|t| t[0] * (t[1] * x.x + t[2] * x.y + t[3]).cos()).sum())
        }
    }
}
