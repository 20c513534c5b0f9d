//! Dörfler marking, the h-versus-p decision and the solve–estimate–refine loop.

use std::fmt;
use std::str::FromStr;

use crate::assembly::{project_data, Discretization};
use crate::basis::tensor_gauss;
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorReport, LambdaChoice};
use crate::field::ElementField;
use crate::mesh::{CellId, QuadMesh};
use crate::problem::Problem;
use crate::quadrature::orthonormal_legendre_all;
use crate::solver::{solve_mixed, MixedSolution, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    HUniform,
    PUniform,
    HAdaptive,
    HpAdaptive,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::HUniform, Mode::PUniform, Mode::HAdaptive, Mode::HpAdaptive];

    pub fn name(self) -> &'static str {
        match self {
            Mode::HUniform => "h-uniform",
            Mode::PUniform => "p-uniform",
            Mode::HAdaptive => "h-adaptive",
            Mode::HpAdaptive => "hp-adaptive",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    pub theta: f64,
    pub mode: Mode,
    pub p_max: usize,
    /// Legendre decay ratio at or below which a marked element is p-refined.
    pub gamma: f64,
    pub max_levels: usize,
    /// A level whose DOF count would exceed this is not computed.
    pub dof_budget: usize,
    pub lambda: LambdaChoice,
    pub solver: SolverConfig,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            mode: Mode::HpAdaptive,
            p_max: 8,
            gamma: 0.5,
            max_levels: 10,
            dof_budget: 300_000,
            lambda: LambdaChoice::Discrete,
            solver: SolverConfig::default(),
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta = {} not in (0, 1]", self.theta)));
        }
        if self.p_max < 1 {
            return Err(Error::Config("p_max must be at least 1".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma = {} must be positive", self.gamma)));
        }
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be positive".into()));
        }
        self.solver.validate()
    }
}

/// Greedy bulk marking: cells by descending estimate (ties by lower id) until
/// the marked sum reaches `theta` times the total. Returns sorted cell ids.
pub fn doerfler_mark(cells: &[CellId], estimates: &[f64], theta: f64) -> Result<Vec<CellId>> {
    if cells.len() != estimates.len() {
        return Err(Error::InvalidArgument("cells and estimates differ in length".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta} not in (0, 1]")));
    }
    if let Some(e) = estimates.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative or NaN estimate {e}")));
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| estimates[b].total_cmp(&estimates[a]).then(cells[a].cmp(&cells[b])));
    // the total in a fixed order makes the threshold independent of input order
    let total: f64 = order.iter().map(|&k| estimates[k]).sum();
    let mut marked = Vec::new();
    if total <= 0.0 {
        return Ok(marked);
    }
    let target = theta * total;
    let mut sum = 0.0;
    for &k in &order {
        if sum >= target || estimates[k] == 0.0 {
            break;
        }
        sum += estimates[k];
        marked.push(cells[k]);
    }
    marked.sort_unstable();
    Ok(marked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    H,
    P,
}

/// Norms of the orthonormal Legendre coefficient blocks `max(i, j) = k`,
/// `k = 0..=p`, of the displacement on one element (both components).
pub fn legendre_blocks(field: &ElementField) -> Vec<f64> {
    let p = field.degree;
    let (pts, wts) = tensor_gauss(p + 1);
    let n = p + 1;
    let mut coef = vec![[0.0f64; 2]; n * n];
    for (&xr, &w) in pts.iter().zip(&wts) {
        let u = field.u(xr);
        let lx = orthonormal_legendre_all(p, xr[0]);
        let ly = orthonormal_legendre_all(p, xr[1]);
        for j in 0..n {
            for i in 0..n {
                let b = w * lx[i] * ly[j];
                coef[j * n + i][0] += b * u[0];
                coef[j * n + i][1] += b * u[1];
            }
        }
    }
    let mut blocks = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            let c = coef[j * n + i];
            blocks[i.max(j)] += c[0] * c[0] + c[1] * c[1];
        }
    }
    blocks.into_iter().map(f64::sqrt).collect()
}

/// Smoothness decision for a marked element from the decay of its Legendre
/// coefficients. Constants carry no smoothness information, so degree one
/// (a single non-constant block) is always p-refined below the cap.
pub fn hp_decide(field: &ElementField, p_max: usize, gamma: f64) -> Refinement {
    let p = field.degree;
    if p >= p_max {
        return Refinement::H;
    }
    if p < 2 {
        return Refinement::P;
    }
    let blocks = legendre_blocks(field);
    let (top, next) = (blocks[p], blocks[p - 1]);
    let scale = blocks[1..].iter().fold(0.0f64, |a, b| a.max(*b));
    if top <= 1e-13 * scale {
        return Refinement::P;
    }
    if top <= gamma * next {
        Refinement::P
    } else {
        Refinement::H
    }
}

/// One level of an adaptive or uniform campaign.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    pub mesh: QuadMesh,
    pub dofs: usize,
    pub solution: MixedSolution,
    pub report: EstimatorReport,
    /// Marked cells (sorted ids); empty on the last level and for uniform modes.
    pub marked: Vec<CellId>,
    pub decisions: Vec<(CellId, Refinement)>,
}

/// Applies a list of decisions: p-refinements first, then h-refinements.
pub fn apply_decisions(mesh: &QuadMesh, decisions: &[(CellId, Refinement)]) -> Result<QuadMesh> {
    let p: Vec<CellId> = decisions.iter().filter(|d| d.1 == Refinement::P).map(|d| d.0).collect();
    let h: Vec<CellId> = decisions.iter().filter(|d| d.1 == Refinement::H).map(|d| d.0).collect();
    let mesh = if p.is_empty() { mesh.clone() } else { mesh.p_refine(&p)? };
    if h.is_empty() {
        Ok(mesh)
    } else {
        mesh.refine(&h)
    }
}

/// Refinement decisions for the next level.
pub fn next_decisions(
    disc: &Discretization,
    sol: &MixedSolution,
    report: &EstimatorReport,
    config: &AdaptConfig,
) -> Result<(Vec<CellId>, Vec<(CellId, Refinement)>)> {
    let cells = disc.mesh.elements();
    Ok(match config.mode {
        Mode::HUniform => (vec![], cells.iter().map(|&c| (c, Refinement::H)).collect()),
        Mode::PUniform => (vec![], cells.iter().map(|&c| (c, Refinement::P)).collect()),
        Mode::HAdaptive => {
            let marked = doerfler_mark(&report.cells, &report.indicators(), config.theta)?;
            let d = marked.iter().map(|&c| (c, Refinement::H)).collect();
            (marked, d)
        }
        Mode::HpAdaptive => {
            let marked = doerfler_mark(&report.cells, &report.indicators(), config.theta)?;
            let d = marked
                .iter()
                .map(|&c| {
                    let i = disc.mesh.active_index(c).expect("marked cell is active");
                    let f = ElementField::new(disc, i, &sol.u, &sol.p, &sol.lambda);
                    (c, hp_decide(&f, config.p_max, config.gamma))
                })
                .collect();
            (marked, d)
        }
    })
}

/// Solve, estimate and refine from `initial` until `max_levels` levels are done
/// or the next level would exceed the DOF budget. Calls `on_level` after each
/// level (for progress output); a solver failure aborts with the error.
pub fn drive(
    problem: &Problem,
    initial: QuadMesh,
    config: &AdaptConfig,
    mut on_level: impl FnMut(&LevelRecord),
) -> Result<Vec<LevelRecord>> {
    config.validate()?;
    let mut records = Vec::new();
    let mut disc = Discretization::new(initial, problem)?;
    if disc.num_dofs() > config.dof_budget {
        return Err(Error::Config(format!(
            "initial mesh has {} DOF, above the budget {}",
            disc.num_dofs(),
            config.dof_budget
        )));
    }
    for level in 0..config.max_levels {
        let sol = solve_mixed(&disc, &config.solver)?;
        let data = project_data(&disc.mesh, problem);
        let report = estimate(&disc, problem, &sol, &data, config.lambda)?;
        let mut rec = LevelRecord {
            level,
            mesh: disc.mesh.clone(),
            dofs: disc.num_dofs(),
            solution: sol,
            report,
            marked: vec![],
            decisions: vec![],
        };
        let last = level + 1 == config.max_levels;
        let mut next = None;
        if !last && rec.report.eta_sq > 0.0 {
            let (marked, decisions) = next_decisions(&disc, &rec.solution, &rec.report, config)?;
            let mesh = apply_decisions(&disc.mesh, &decisions)?;
            let d = Discretization::new(mesh, problem)?;
            if d.num_dofs() <= config.dof_budget {
                rec.marked = marked;
                rec.decisions = decisions;
                next = Some(d);
            }
        }
        on_level(&rec);
        records.push(rec);
        match next {
            Some(d) => disc = d,
            None => break,
        }
    }
    Ok(records)
}
