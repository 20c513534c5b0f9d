//! Experiment configuration, overkill reference errors, convergence rows and
//! rate fitting for the benchmark campaigns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::adaptivity::{drive, AdaptConfig, LevelRecord, Mode};
use crate::assembly::{l2_project_to_qhp, Discretization};
use crate::basis::tensor_gauss;
use crate::error::{Error, Result};
use crate::estimator::{EstimatorReport, LambdaChoice};
use crate::field::ElementField;
use crate::mesh::{BoundaryLayout, QuadMesh, Rect, Side};
use crate::problem::{benchmark_traction, Problem};
use crate::solver::{solve_auxiliary, solve_mixed, MixedSolution, SolverConfig};
use crate::tensor::{DevTensor2, Frobenius, Material, SymTensor2};

pub const CSV_HEADER: &str = "level,dof,e_u,e_p,e_lambda,eta_total,eta_res,dev_part,E_part,osc,efficiency_index";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverkillMode {
    /// One reference on the refinement of the finest mesh.
    Final,
    /// A reference for every level.
    PerLevel,
    Off,
}

impl FromStr for OverkillMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Self::Final),
            "per-level" => Ok(Self::PerLevel),
            "off" => Ok(Self::Off),
            _ => Err(Error::Config(format!("unknown overkill mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadId {
    /// `(0, -400 min(0, x^2 - 1/4)^2)` on the top side.
    Benchmark,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub material: Material,
    pub domain: Rect,
    pub boundary: BoundaryLayout,
    pub load: LoadId,
    pub load_scale: f64,
    pub mode: Mode,
    /// Initial polynomial degree.
    pub p: usize,
    /// Initial grid; `None` picks 5x5 for p-uniform runs and 4x4 otherwise.
    pub grid: Option<(usize, usize)>,
    pub theta: f64,
    pub levels: usize,
    pub dof_budget: usize,
    pub p_max: usize,
    pub gamma: f64,
    pub lambda_choice: LambdaChoice,
    pub overkill: OverkillMode,
    /// Largest overkill problem attempted, in packed element-matrix entries.
    pub overkill_entry_limit: usize,
    pub out: PathBuf,
    pub mesh_dir: Option<PathBuf>,
    pub estimator_dump_dir: Option<PathBuf>,
    pub verbose: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            material: Material::benchmark(),
            domain: Rect::new(-1.0, 1.0, -1.0, 1.0),
            boundary: BoundaryLayout::clamped_bottom(),
            load: LoadId::Benchmark,
            load_scale: 1.0,
            mode: Mode::HpAdaptive,
            p: 1,
            grid: None,
            theta: 0.5,
            levels: 8,
            dof_budget: 300_000,
            p_max: 8,
            gamma: 0.5,
            lambda_choice: LambdaChoice::Discrete,
            overkill: OverkillMode::Final,
            overkill_entry_limit: DEFAULT_OVERKILL_ENTRY_LIMIT,
            out: PathBuf::from("convergence.csv"),
            mesh_dir: None,
            estimator_dump_dir: None,
            verbose: false,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_side(s: &str) -> Result<Side> {
    match s {
        "bottom" => Ok(Side::Bottom),
        "right" => Ok(Side::Right),
        "top" => Ok(Side::Top),
        "left" => Ok(Side::Left),
        _ => Err(Error::Config(format!("unknown side '{s}'"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let (mut lam, mut mu, mut h, mut sy) = (
            c.material.lame_lambda,
            c.material.lame_mu,
            c.material.hardening,
            c.material.sigma_y,
        );
        let (mut nx, mut ny) = (None, None);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "lambda" => lam = parse_num(k, v)?,
                "mu" => mu = parse_num(k, v)?,
                "hardening" => h = parse_num(k, v)?,
                "sigma_y" => sy = parse_num(k, v)?,
                "domain" => {
                    let x: Vec<f64> = v.split_whitespace().map(|s| parse_num(k, s)).collect::<Result<_>>()?;
                    if x.len() != 4 {
                        return Err(Error::Config("domain: expected x0 x1 y0 y1".into()));
                    }
                    c.domain = Rect::new(x[0], x[1], x[2], x[3]);
                }
                "dirichlet" => {
                    let mut d = [false; 4];
                    for s in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        d[parse_side(s)? as usize] = true;
                    }
                    c.boundary = BoundaryLayout { dirichlet: d };
                }
                "load" => {
                    c.load = match v {
                        "benchmark" => LoadId::Benchmark,
                        "none" => LoadId::None,
                        _ => return Err(Error::Config(format!("unknown load '{v}'"))),
                    }
                }
                "load_scale" => c.load_scale = parse_num(k, v)?,
                "mode" => c.mode = v.parse()?,
                "p" => c.p = parse_num(k, v)?,
                "nx" => nx = Some(parse_num(k, v)?),
                "ny" => ny = Some(parse_num(k, v)?),
                "theta" => c.theta = parse_num(k, v)?,
                "levels" => c.levels = parse_num(k, v)?,
                "dof_budget" => c.dof_budget = parse_num(k, v)?,
                "p_max" => c.p_max = parse_num(k, v)?,
                "gamma" => c.gamma = parse_num(k, v)?,
                "lambda_n" => {
                    c.lambda_choice = match v {
                        "discrete" => LambdaChoice::Discrete,
                        "pointwise" => LambdaChoice::Pointwise,
                        _ => return Err(Error::Config(format!("unknown lambda_n '{v}'"))),
                    }
                }
                "overkill" => c.overkill = v.parse()?,
                "overkill_entry_limit" => c.overkill_entry_limit = parse_num(k, v)?,
                "out" => c.out = PathBuf::from(v),
                "mesh_dir" => c.mesh_dir = Some(PathBuf::from(v)),
                "estimator_dump_dir" => c.estimator_dump_dir = Some(PathBuf::from(v)),
                "verbose" => c.verbose = parse_bool(k, v)?,
                _ => return Err(Error::Config(format!("unknown key '{k}'"))),
            }
        }
        c.material = Material::new(lam, mu, h, sy)?;
        c.grid = match (nx, ny) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some((a, a)),
            (Some(a), Some(b)) => Some((a, b)),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        let d = self.domain;
        if !(d.x1 > d.x0 && d.y1 > d.y0) {
            return Err(Error::DegenerateDomain(format!("{d:?}")));
        }
        if !self.boundary.dirichlet.iter().any(|&b| b) {
            return Err(Error::Config("at least one side must be clamped".into()));
        }
        if self.p == 0 || self.p > self.p_max.max(1) {
            return Err(Error::Config(format!("initial degree {} outside 1..=p_max", self.p)));
        }
        if let Some((nx, ny)) = self.grid {
            if nx == 0 || ny == 0 {
                return Err(Error::Config("grid must have at least one cell".into()));
            }
        }
        self.adapt_config().validate()
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid.unwrap_or(if self.mode == Mode::PUniform { (5, 5) } else { (4, 4) })
    }

    pub fn problem(&self) -> Problem {
        let top = match self.load {
            LoadId::Benchmark => true,
            LoadId::None => false,
        };
        Problem {
            material: self.material,
            domain: self.domain,
            boundary: self.boundary,
            body_force: None,
            traction: Arc::new(move |x, side| {
                if top && side == Side::Top {
                    benchmark_traction(x)
                } else {
                    [0.0, 0.0]
                }
            }),
            load_scale: self.load_scale,
        }
    }

    pub fn adapt_config(&self) -> AdaptConfig {
        AdaptConfig {
            theta: self.theta,
            mode: self.mode,
            p_max: self.p_max,
            gamma: self.gamma,
            max_levels: self.levels,
            dof_budget: self.dof_budget,
            lambda: self.lambda_choice,
            solver: SolverConfig {
                verbose: self.verbose,
                ..SolverConfig::default()
            },
        }
    }
}

/// Squared error contributions of a discrete triple against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub u_l2_sq: f64,
    /// `|eps(u_ref - u)|^2`.
    pub u_strain_sq: f64,
    pub p_sq: f64,
    pub lambda_sq: f64,
}

impl ErrorNorms {
    pub fn e_u(&self) -> f64 {
        (self.u_l2_sq + self.u_strain_sq).sqrt()
    }

    pub fn e_p(&self) -> f64 {
        self.p_sq.sqrt()
    }

    pub fn e_lambda(&self) -> f64 {
        self.lambda_sq.sqrt()
    }

    /// `sqrt(e_u^2 + e_p^2 + e_lambda^2)`.
    pub fn total(&self) -> f64 {
        (self.u_l2_sq + self.u_strain_sq + self.p_sq + self.lambda_sq).sqrt()
    }
}

/// Values of a discrete triple at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub u: [f64; 2],
    pub strain: SymTensor2,
    pub plastic: DevTensor2,
    pub multiplier: DevTensor2,
}

/// A discrete triple that can be evaluated anywhere in its mesh.
#[derive(Debug, Clone)]
pub struct SolutionFields {
    pub mesh: QuadMesh,
    pub fields: Vec<ElementField>,
}

impl SolutionFields {
    pub fn new(mesh: QuadMesh, u: &[f64], p: &[DevTensor2], lambda: &[DevTensor2]) -> Result<Self> {
        let fields = ElementField::on_mesh(&mesh, u, p, lambda)?;
        Ok(Self { mesh, fields })
    }

    pub fn of(mesh: &QuadMesh, sol: &MixedSolution) -> Result<Self> {
        Self::new(mesh.clone(), &sol.u, &sol.p, &sol.lambda)
    }

    fn value(&self, i: usize, xr: [f64; 2]) -> PointValue {
        let f = &self.fields[i];
        PointValue {
            u: f.u(xr),
            strain: f.strain(xr),
            plastic: f.plastic(xr),
            multiplier: f.multiplier(xr),
        }
    }

    /// Evaluates at physical points, locating each by hierarchy descent.
    pub fn evaluate_at(&self, points: &[[f64; 2]]) -> Result<Vec<PointValue>> {
        points
            .iter()
            .map(|&x| {
                let (c, xr) = self.mesh.locate(x)?;
                let i = self.mesh.active_index(c).expect("located cell is active");
                Ok(self.value(i, xr))
            })
            .collect()
    }
}

/// Errors of `coarse` against `reference`, integrated on the elements of the
/// reference mesh with `p + 1` Gauss points per direction. The coarse fields
/// are evaluated through the inverse element map of the containing cell.
pub fn errors_against(reference: &SolutionFields, coarse: &SolutionFields) -> Result<ErrorNorms> {
    let mut e = ErrorNorms::default();
    for (i, &c) in reference.mesh.elements().iter().enumerate() {
        let f = &reference.fields[i];
        let (pts, wts) = tensor_gauss(f.degree + 1);
        let ancestor = coarse
            .mesh
            .active_ancestor_of(&reference.mesh, c)
            .and_then(|a| coarse.mesh.active_index(a));
        for (&xr, &w) in pts.iter().zip(&wts) {
            let x = f.map.map(xr);
            let a = reference.value(i, xr);
            let b = match ancestor {
                Some(j) => coarse.value(j, coarse.fields[j].map.inverse(x)),
                None => coarse.evaluate_at(&[x])?[0],
            };
            let jw = w * f.map.det;
            let du = [a.u[0] - b.u[0], a.u[1] - b.u[1]];
            let ds = a.strain - b.strain;
            let dp = a.plastic - b.plastic;
            let dl = a.multiplier - b.multiplier;
            e.u_l2_sq += jw * (du[0] * du[0] + du[1] * du[1]);
            e.u_strain_sq += jw * ds.frob_inner(&ds);
            e.p_sq += jw * dp.frob_inner(&dp);
            e.lambda_sq += jw * dl.frob_inner(&dl);
        }
    }
    Ok(e)
}

/// Halves every element and raises every degree by one.
pub fn overkill_mesh(mesh: &QuadMesh) -> QuadMesh {
    mesh.refine_all().with_degrees(|_, p| p + 1)
}

/// Default cap on [`overkill_cost`], about 3 GB of peak memory.
pub const DEFAULT_OVERKILL_ENTRY_LIMIT: usize = 40_000_000;

/// Number of packed lower-triangle element-matrix entries of the overkill
/// problem, a proxy for its assembly and factorization memory.
pub fn overkill_cost(mesh: &QuadMesh) -> usize {
    mesh.elements()
        .iter()
        .map(|&c| {
            let n = 2 * (mesh.degree(c) + 2).pow(2);
            4 * n * (n + 1) / 2
        })
        .sum()
}

/// Overkill reference solution of a mesh.
pub struct Reference {
    pub disc: Discretization,
    pub solution: MixedSolution,
    pub fields: SolutionFields,
}

pub fn reference_solution(problem: &Problem, mesh: &QuadMesh, solver: &SolverConfig, entry_limit: usize) -> Result<Reference> {
    let cost = overkill_cost(mesh);
    if cost > entry_limit {
        return Err(Error::Config(format!(
            "overkill reference needs {cost} element-matrix entries, above the limit {entry_limit}"
        )));
    }
    let disc = Discretization::new(overkill_mesh(mesh), problem)?;
    let solution = solve_mixed(&disc, solver)?;
    let fields = SolutionFields::of(&disc.mesh, &solution)?;
    Ok(Reference { disc, solution, fields })
}

/// Solution `(u*, p*)` of the auxiliary problem on the reference space with the
/// coarse multiplier as data, and `|(u* - u_N, p* - p_N)|^2`.
pub fn auxiliary_distance(reference: &Reference, coarse: &SolutionFields) -> Result<f64> {
    let disc = &reference.disc;
    let fine = &disc.mesh;
    let lambda_n = l2_project_to_qhp(disc, |i, xr| {
        let c = fine.elements()[i];
        let x = reference.fields.fields[i].map.map(xr);
        match coarse.mesh.active_ancestor_of(fine, c).and_then(|a| coarse.mesh.active_index(a)) {
            Some(j) => coarse.fields[j].multiplier(coarse.fields[j].map.inverse(x)),
            None => coarse.evaluate_at(&[x]).map(|v| v[0].multiplier).unwrap_or(DevTensor2::ZERO),
        }
    });
    let (u, p) = solve_auxiliary(disc, &lambda_n)?;
    let aux = SolutionFields::new(fine.clone(), &u, &p, &lambda_n)?;
    let e = errors_against(&aux, coarse)?;
    Ok(e.u_l2_sq + e.u_strain_sq + e.p_sq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dof: usize,
    pub errors: Option<ErrorNorms>,
    /// `eta(mu*)`.
    pub eta_total: f64,
    pub eta_res: f64,
    pub dev_part: f64,
    pub e_part: f64,
    pub osc: f64,
}

impl ConvergenceRow {
    pub fn new(level: usize, dof: usize, report: &EstimatorReport, errors: Option<ErrorNorms>) -> Self {
        Self {
            level,
            dof,
            errors,
            eta_total: report.eta_sq.max(0.0).sqrt(),
            eta_res: report.residual_sq.sqrt(),
            dev_part: report.dev_sq.sqrt(),
            e_part: report.e_total.max(0.0).sqrt(),
            osc: report.osc_sq.sqrt(),
        }
    }

    pub fn total_error(&self) -> Option<f64> {
        self.errors.map(|e| e.total())
    }

    pub fn efficiency_index(&self) -> Option<f64> {
        self.total_error().map(|t| self.eta_total / t)
    }

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{}",
            self.level,
            self.dof,
            opt(self.errors.map(|e| e.e_u())),
            opt(self.errors.map(|e| e.e_p())),
            opt(self.errors.map(|e| e.e_lambda())),
            self.eta_total,
            self.eta_res,
            self.dev_part,
            self.e_part,
            self.osc,
            opt(self.efficiency_index()),
        )
    }
}

pub fn to_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Column of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    TotalError,
    EtaTotal,
    EtaRes,
    EU,
    EP,
    ELambda,
    Efficiency,
}

impl Column {
    pub fn get(self, r: &ConvergenceRow) -> Option<f64> {
        match self {
            Column::TotalError => r.total_error(),
            Column::EtaTotal => Some(r.eta_total),
            Column::EtaRes => Some(r.eta_res),
            Column::EU => r.errors.map(|e| e.e_u()),
            Column::EP => r.errors.map(|e| e.e_p()),
            Column::ELambda => r.errors.map(|e| e.e_lambda()),
            Column::Efficiency => r.efficiency_index(),
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit of nonpositive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all DOF counts are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Slope of `column` against the DOF count over the last `window` rows.
pub fn fit_rate(rows: &[ConvergenceRow], column: Column, window: usize) -> Result<f64> {
    if rows.len() < window || window < 2 {
        return Err(Error::InvalidArgument(format!("{} rows, window {window}", rows.len())));
    }
    let tail = &rows[rows.len() - window..];
    let x: Vec<f64> = tail.iter().map(|r| r.dof as f64).collect();
    let y = tail
        .iter()
        .map(|r| column.get(r).ok_or_else(|| Error::InvalidArgument(format!("level {} lacks {column:?}", r.level))))
        .collect::<Result<Vec<f64>>>()?;
    loglog_slope(&x, &y)
}

/// Outcome of a campaign.
pub struct Campaign {
    pub records: Vec<LevelRecord>,
    pub rows: Vec<ConvergenceRow>,
    /// Set when the overkill reference could not be computed.
    pub overkill_failure: Option<String>,
}

/// Runs the adaptive or uniform loop and computes error columns according to
/// the overkill mode. Writes nothing.
pub fn campaign(config: &ExperimentConfig, mut progress: impl FnMut(&LevelRecord)) -> Result<Campaign> {
    config.validate()?;
    let problem = config.problem();
    let (nx, ny) = config.grid();
    let mesh = problem.initial_mesh(nx, ny, config.p)?;
    let adapt = config.adapt_config();
    let records = drive(&problem, mesh, &adapt, &mut progress)?;
    let mut overkill_failure = None;
    let errors: Vec<Option<ErrorNorms>> = match config.overkill {
        OverkillMode::Off => vec![None; records.len()],
        OverkillMode::Final => {
            let last = &records.last().expect("at least one level").mesh;
            match reference_solution(&problem, last, &adapt.solver, config.overkill_entry_limit) {
                Ok(r) => records
                    .iter()
                    .map(|rec| {
                        SolutionFields::of(&rec.mesh, &rec.solution)
                            .and_then(|c| errors_against(&r.fields, &c))
                            .ok()
                    })
                    .collect(),
                Err(e) => {
                    overkill_failure = Some(e.to_string());
                    vec![None; records.len()]
                }
            }
        }
        OverkillMode::PerLevel => records
            .iter()
            .map(|rec| {
                let r = reference_solution(&problem, &rec.mesh, &adapt.solver, config.overkill_entry_limit)
                    .and_then(|r| errors_against(&r.fields, &SolutionFields::of(&rec.mesh, &rec.solution)?));
                match r {
                    Ok(e) => Some(e),
                    Err(e) => {
                        overkill_failure.get_or_insert(e.to_string());
                        None
                    }
                }
            })
            .collect(),
    };
    let rows = records
        .iter()
        .zip(errors)
        .map(|(r, e)| ConvergenceRow::new(r.level, r.dofs, &r.report, e))
        .collect();
    Ok(Campaign {
        records,
        rows,
        overkill_failure,
    })
}

/// Runs a campaign and writes the CSV, mesh exports and estimator dumps.
pub fn run(config: &ExperimentConfig, progress: impl FnMut(&LevelRecord)) -> Result<Campaign> {
    let c = campaign(config, progress)?;
    if let Some(dir) = config.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&config.out, to_csv(&c.rows))?;
    if let Some(dir) = &config.mesh_dir {
        std::fs::create_dir_all(dir)?;
        for r in &c.records {
            r.mesh.write_text(&dir.join(format!("level_{:02}.mesh", r.level)))?;
        }
    }
    if let Some(dir) = &config.estimator_dump_dir {
        std::fs::create_dir_all(dir)?;
        for r in &c.records {
            r.report.write_dump(&dir.join(format!("level_{:02}.est", r.level)))?;
        }
    }
    Ok(c)
}
