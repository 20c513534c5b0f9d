//! Residual a posteriori error estimator with the plasticity contribution
//! `E_T(mu*)` and data oscillations.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{neumann_sides, DataProjection, Discretization};
use crate::error::{Error, Result};
use crate::field::ElementField;
use crate::mesh::{CellId, EdgeKind, Neighbor, Side};
use crate::problem::Problem;
use crate::quadrature::gauss;
use crate::basis::tensor_gauss;
use crate::solver::MixedSolution;
use crate::tensor::{DevTensor2, Frobenius, Material, SymTensor2};

/// Per-element parts of `eta_T^2(mu*)` and `osc_T^2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalEstimate {
    pub elem_residual_sq: f64,
    pub jump_sq: f64,
    pub neumann_sq: f64,
    pub dev_mismatch_sq: f64,
    pub e_t: f64,
    pub osc_sq: f64,
}

impl LocalEstimate {
    /// Residual part `eta_T^2`.
    pub fn residual_sq(&self) -> f64 {
        self.elem_residual_sq + self.jump_sq + self.neumann_sq
    }

    /// Full indicator `eta_T^2(mu) = eta_T^2 + |dev mismatch|^2 + E_T(mu)`.
    pub fn indicator(&self) -> f64 {
        self.residual_sq() + self.dev_mismatch_sq + self.e_t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    /// Cell ids, aligned with `local`.
    pub cells: Vec<CellId>,
    pub local: Vec<LocalEstimate>,
    /// `eta^2(mu*)`.
    pub eta_sq: f64,
    pub residual_sq: f64,
    pub dev_sq: f64,
    pub e_total: f64,
    pub osc_sq: f64,
    /// Positions in `local`, by descending indicator, ties by cell id.
    pub ranking: Vec<usize>,
}

impl EstimatorReport {
    pub fn indicators(&self) -> Vec<f64> {
        self.local.iter().map(LocalEstimate::indicator).collect()
    }

    /// Text dump, one line `elem_id eta_sq dev_sq E_T osc_sq` per element.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (c, l) in self.cells.iter().zip(&self.local) {
            let _ = writeln!(s, "{} {:.12e} {:.12e} {:.12e} {:.12e}", c, l.indicator(), l.dev_mismatch_sq, l.e_t, l.osc_sq);
        }
        s
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump())?;
        Ok(())
    }
}

/// Totals and ranking of per-element parts.
pub fn total(cells: Vec<CellId>, local: Vec<LocalEstimate>) -> EstimatorReport {
    let sum = |f: fn(&LocalEstimate) -> f64| -> f64 {
        // sum in cell-id order so that the result does not depend on input order
        let mut idx: Vec<usize> = (0..local.len()).collect();
        idx.sort_by_key(|&i| cells[i]);
        idx.iter().map(|&i| f(&local[i])).sum()
    };
    let eta_sq = sum(LocalEstimate::indicator);
    let residual_sq = sum(LocalEstimate::residual_sq);
    let dev_sq = sum(|l| l.dev_mismatch_sq);
    let e_total = sum(|l| l.e_t);
    let osc_sq = sum(|l| l.osc_sq);
    let mut ranking: Vec<usize> = (0..local.len()).collect();
    ranking.sort_by(|&a, &b| {
        local[b]
            .indicator()
            .total_cmp(&local[a].indicator())
            .then(cells[a].cmp(&cells[b]))
    });
    EstimatorReport {
        cells,
        local,
        eta_sq,
        residual_sq,
        dev_sq,
        e_total,
        osc_sq,
        ranking,
    }
}

/// Radial projection of `lambda_N + p_N / 2` onto the ball of radius `sigma_y`.
pub fn mu_star(lambda_n: DevTensor2, p_n: DevTensor2, sigma_y: f64) -> DevTensor2 {
    let hat = lambda_n + 0.5 * p_n;
    let n = hat.frob_norm();
    if n <= sigma_y {
        hat
    } else {
        (sigma_y / n) * hat
    }
}

/// How `lambda_N` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaChoice {
    /// The discrete multiplier of the mixed solution.
    #[default]
    Discrete,
    /// `dev(sigma(u_N, p_N) - H p_N)` evaluated pointwise.
    Pointwise,
}

/// `E_T(mu) = |mu - lambda_N|^2 + (sigma_y, |p_N|) - (mu, p_N)` on one element,
/// with `p_T + 2` Gauss points per direction.
pub fn plasticity_error_e_t(
    field: &ElementField,
    sigma_y: f64,
    lambda_n: impl Fn([f64; 2]) -> DevTensor2,
    mu: impl Fn([f64; 2]) -> DevTensor2,
    element: CellId,
) -> Result<f64> {
    let (pts, wts) = tensor_gauss(field.degree + 2);
    let mut e = 0.0;
    for (&xr, &w) in pts.iter().zip(&wts) {
        let m = mu(xr);
        let norm = m.frob_norm();
        if norm > sigma_y + 1e-12 {
            return Err(Error::InfeasibleMultiplier { element, norm, sigma_y });
        }
        let l = lambda_n(xr);
        let p = field.plastic(xr);
        // sigma_y |p| - mu : p >= 0 for feasible mu; the clamp removes rounding noise only
        let dissipation_gap = (sigma_y * p.frob_norm() - m.frob_inner(&p)).max(0.0);
        e += w * field.map.det * ((m - l).frob_inner(&(m - l)) + dissipation_gap);
    }
    Ok(e)
}

fn pointwise_lambda(field: &ElementField, m: &Material, xr: [f64; 2]) -> DevTensor2 {
    field.stress(xr, m).dev() - m.apply_h(&field.plastic(xr))
}

fn lambda_at(field: &ElementField, m: &Material, xr: [f64; 2], choice: LambdaChoice) -> DevTensor2 {
    match choice {
        LambdaChoice::Discrete => field.multiplier(xr),
        LambdaChoice::Pointwise => pointwise_lambda(field, m, xr),
    }
}

fn norm_sq(v: [f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

fn traction(s: &SymTensor2, n: [f64; 2]) -> [f64; 2] {
    s.apply(n)
}

/// `eta^2(mu*)` parts and oscillations for every element.
pub fn estimate(
    disc: &Discretization,
    problem: &Problem,
    sol: &MixedSolution,
    data: &DataProjection,
    choice: LambdaChoice,
) -> Result<EstimatorReport> {
    let mesh = &disc.mesh;
    let m = disc.material;
    let fields = ElementField::all(disc, &sol.u, &sol.p, &sol.lambda);
    let mut local = vec![LocalEstimate::default(); mesh.num_elements()];
    let mut neumann: Vec<Vec<(Side, Side)>> = vec![Vec::new(); mesh.num_elements()];
    for (i, s, ds) in neumann_sides(mesh) {
        neumann[i].push((s, ds));
    }
    for (i, &c) in mesh.elements().iter().enumerate() {
        let f = &fields[i];
        let p = f.degree;
        let pf = p as f64;
        let h_t = mesh.element_diameter(c);
        let le = &mut local[i];

        let (pts, wts) = tensor_gauss(p + 1);
        let mut res = 0.0;
        let mut dev = 0.0;
        for (&xr, &w) in pts.iter().zip(&wts) {
            let div = f.div_stress(xr, &m);
            let fnv = data.f_at(i, xr);
            res += w * f.map.det * norm_sq([fnv[0] + div[0], fnv[1] + div[1]]);
            if choice == LambdaChoice::Discrete {
                let d = pointwise_lambda(f, &m, xr) - f.multiplier(xr);
                dev += w * f.map.det * d.frob_inner(&d);
            }
        }
        le.elem_residual_sq = h_t * h_t / (pf * pf) * res;
        le.dev_mismatch_sq = dev;

        le.e_t = plasticity_error_e_t(
            f,
            m.sigma_y,
            |xr| lambda_at(f, &m, xr, choice),
            |xr| mu_star(lambda_at(f, &m, xr, choice), f.plastic(xr), m.sigma_y),
            c,
        )?;

        for s in Side::ALL {
            let n = unit(f.map.grad(s.reference_normal()));
            match mesh.neighbor(c, s) {
                Neighbor::Boundary(ds) => {
                    if mesh.boundary_layout().kind(ds) != EdgeKind::Neumann {
                        continue;
                    }
                    let h_e = mesh.side_length(c, s);
                    let rule = gauss(p + 1);
                    let mut acc = 0.0;
                    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                        let sn = traction(&f.stress(s.reference_point(t), &m), n);
                        let g = data.g_at(i, s, t);
                        acc += w * 0.5 * h_e * norm_sq([sn[0] - g[0], sn[1] - g[1]]);
                    }
                    le.neumann_sq += h_e / pf * acc;
                }
                Neighbor::Same(o) | Neighbor::Coarser(o) => {
                    le.jump_sq += jump_on(disc, &fields, &m, i, s, [-1.0, 1.0], o, n);
                }
                Neighbor::Finer(halves) => {
                    for (o, range) in halves.into_iter().zip([[-1.0, 0.0], [0.0, 1.0]]) {
                        le.jump_sq += jump_on(disc, &fields, &m, i, s, range, o, n);
                    }
                }
            }
        }

        let (opts, owts) = tensor_gauss(p + 3);
        let mut osc_f = 0.0;
        if problem.body_force.is_some() {
            for (&xr, &w) in opts.iter().zip(&owts) {
                let fx = problem.f(f.map.map(xr));
                let fnv = data.f_at(i, xr);
                osc_f += w * f.map.det * norm_sq([fx[0] - fnv[0], fx[1] - fnv[1]]);
            }
        }
        let mut osc = h_t * h_t / (pf * pf) * osc_f;
        for &(s, ds) in &neumann[i] {
            let h_e = mesh.side_length(c, s);
            let rule = gauss(p + 3);
            let mut acc = 0.0;
            for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                let g = problem.g(f.map.map(s.reference_point(t)), ds);
                let gn = data.g_at(i, s, t);
                acc += w * 0.5 * h_e * norm_sq([g[0] - gn[0], g[1] - gn[1]]);
            }
            osc += h_e / pf * acc;
        }
        local[i].osc_sq = osc;
    }
    Ok(total(mesh.elements().to_vec(), local))
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// `h_e / (2 p_e) |[[sigma n]]|^2` over the part `range` of side `s` of element `i`
/// shared with cell `other`; `p_e` is the larger adjacent degree.
#[allow(clippy::too_many_arguments)]
fn jump_on(
    disc: &Discretization,
    fields: &[ElementField],
    m: &Material,
    i: usize,
    s: Side,
    range: [f64; 2],
    other: CellId,
    n: [f64; 2],
) -> f64 {
    let mesh = &disc.mesh;
    let f = &fields[i];
    let j = mesh.active_index(other).expect("active neighbour");
    let g = &fields[j];
    let p_e = f.degree.max(g.degree);
    let h_e = 0.5 * (range[1] - range[0]) * mesh.side_length(mesh.elements()[i], s);
    let rule = gauss(p_e + 1);
    let mut acc = 0.0;
    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
        let tau = range[0] + 0.5 * (t + 1.0) * (range[1] - range[0]);
        let xr = s.reference_point(tau);
        let x = f.map.map(xr);
        let a = traction(&f.stress(xr, m), n);
        let b = traction(&g.stress(g.map.inverse(x), m), n);
        acc += w * 0.5 * h_e * norm_sq([a[0] - b[0], a[1] - b[1]]);
    }
    h_e / (2.0 * p_e as f64) * acc
}
