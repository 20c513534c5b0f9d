//! Solution of the discrete mixed problem.
//!
//! The plastic coefficients decouple: for a fixed displacement each `p_i` is the
//! closed-form minimizer of its local energy (the return map), and the remaining
//! reduced energy in `u` is convex and once differentiable with a semismooth
//! gradient. It is minimized by a semismooth Newton method with Armijo line
//! search; alternating minimization serves as fallback.

use crate::assembly::{l2_project_to_qhp, Discretization};
use crate::error::{Error, ResidualHistory, Result};
use crate::field::ElementField;
use crate::linalg::{dot, norm, SpdSolver};
use crate::tensor::{DevTensor2, Frobenius};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop when the residual norm is below `newton_tol * |load|`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Parameter of the complementarity function used to report violations.
    pub complementarity_c: f64,
    pub fallback_max_fixed_point: usize,
    /// Skip Newton and use alternating minimization only.
    pub force_fallback: bool,
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton: 50,
            complementarity_c: 1.0,
            fallback_max_fixed_point: 500,
            force_fallback: false,
            verbose: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.newton_tol > 0.0 && self.complementarity_c > 0.0 && self.max_newton > 0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid solver configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    Newton,
    Fallback,
}

#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub u: Vec<f64>,
    pub p: Vec<DevTensor2>,
    /// Multiplier coefficients in the dual basis.
    pub lambda: Vec<DevTensor2>,
    pub path: SolvePath,
    pub iterations: usize,
    /// Relative residual history of the successful path.
    pub history: Vec<f64>,
}

/// Closed-form minimizer of `-t:q + c/2 |q|^2 + sigma |q|` over trace-free `q`.
pub fn local_return_map(trial: DevTensor2, sigma_i: f64, two_mu_plus_h: f64) -> DevTensor2 {
    let n = trial.frob_norm();
    if n <= sigma_i {
        DevTensor2::ZERO
    } else {
        ((n - sigma_i) / (two_mu_plus_h * n)) * trial
    }
}

fn return_map_vec(t: [f64; 2], sigma: f64, c: f64) -> [f64; 2] {
    let n = t[0].hypot(t[1]);
    if n <= sigma {
        [0.0; 2]
    } else {
        let s = (n - sigma) / (c * n);
        [s * t[0], s * t[1]]
    }
}

/// Reduced state at a displacement iterate, orthonormal coordinates.
struct State {
    trial: Vec<[f64; 2]>,
    plastic: Vec<[f64; 2]>,
    energy: f64,
    gradient: Vec<f64>,
}

fn reduced_state(disc: &Discretization, u: &[f64]) -> State {
    let two_mu = 2.0 * disc.material.lame_mu;
    let c = disc.material.two_mu_plus_h();
    let trial: Vec<[f64; 2]> = disc
        .dev_strain(u)
        .into_iter()
        .map(|e| [two_mu * e[0], two_mu * e[1]])
        .collect();
    let mut plastic = Vec::with_capacity(trial.len());
    let mut local = 0.0;
    for (k, t) in trial.iter().enumerate() {
        let s = disc.sigma[k];
        let n = t[0].hypot(t[1]);
        if n > s {
            local -= disc.weights[k] * (n - s) * (n - s) / (2.0 * c);
        }
        plastic.push(return_map_vec(*t, s, c));
    }
    let ku = disc.stiffness.matvec(u);
    let coupling = disc.dev_strain_transpose(&plastic, &disc.weights);
    let gradient: Vec<f64> = (0..u.len())
        .map(|i| ku[i] - disc.load[i] - two_mu * coupling[i])
        .collect();
    let energy = 0.5 * dot(&ku, u) - dot(&disc.load, u) + local;
    State {
        trial,
        plastic,
        energy,
        gradient,
    }
}

fn from_orthonormal(v: &[[f64; 2]]) -> Vec<DevTensor2> {
    v.iter().map(|&x| DevTensor2::from_orthonormal(x)).collect()
}

/// `lambda_i = t_i - (2 mu + H) p_i`.
fn multiplier(disc: &Discretization, st: &State) -> Vec<DevTensor2> {
    let c = disc.material.two_mu_plus_h();
    st.trial
        .iter()
        .zip(&st.plastic)
        .map(|(t, p)| DevTensor2::from_orthonormal([t[0] - c * p[0], t[1] - c * p[1]]))
        .collect()
}

/// Largest `|lambda_i - P_i(lambda_i + c p_i)|_F / sigma_i`, `P_i` the radial
/// projection onto the ball of radius `sigma_i`.
pub fn complementarity_violation(disc: &Discretization, p: &[DevTensor2], lambda: &[DevTensor2], c: f64) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..p.len() {
        let s = disc.sigma[k];
        let z = lambda[k] + c * p[k];
        let n = z.frob_norm();
        let proj = if n <= s { z } else { (s / n) * z };
        worst = worst.max((lambda[k] - proj).frob_norm() / s);
    }
    worst
}

/// `E(u, p) = a((u,p),(u,p))/2 + psi_hp(p) - l(u)`.
pub fn evaluate_energy(disc: &Discretization, u: &[f64], p: &[DevTensor2]) -> f64 {
    0.5 * disc.bilinear(u, p, u, p) + disc.psi(p) - dot(&disc.load, u)
}

fn log_line(config: &SolverConfig, iter: usize, residual: f64, violation: f64, energy: f64) {
    if config.verbose {
        eprintln!("{iter} {residual:.6e} {violation:.6e} {energy:.12e}");
    }
}

pub fn solve_mixed(disc: &Discretization, config: &SolverConfig) -> Result<MixedSolution> {
    solve_mixed_from(disc, config, None)
}

/// Solves the mixed problem starting from the displacement `u0` (zero if `None`).
pub fn solve_mixed_from(disc: &Discretization, config: &SolverConfig, u0: Option<&[f64]>) -> Result<MixedSolution> {
    config.validate()?;
    let n = disc.num_u();
    let lnorm = norm(&disc.load);
    let mut u = u0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if lnorm == 0.0 && u0.is_none() {
        let zero = vec![DevTensor2::ZERO; disc.num_coefficients()];
        return Ok(MixedSolution {
            u,
            p: zero.clone(),
            lambda: zero,
            path: SolvePath::Newton,
            iterations: 0,
            history: vec![0.0],
        });
    }
    let scale = if lnorm > 0.0 { lnorm } else { 1.0 };
    let mut linear = SpdSolver::default();
    if !config.force_fallback {
        if let Some(sol) = newton(disc, config, &mut u, scale, &mut linear)? {
            return Ok(sol);
        }
    }
    fallback(disc, config, u, scale, &mut linear)
}

fn finish(disc: &Discretization, u: Vec<f64>, st: &State, path: SolvePath, history: Vec<f64>) -> MixedSolution {
    MixedSolution {
        p: from_orthonormal(&st.plastic),
        lambda: multiplier(disc, st),
        u,
        path,
        iterations: history.len() - 1,
        history,
    }
}

fn newton(
    disc: &Discretization,
    config: &SolverConfig,
    u: &mut Vec<f64>,
    scale: f64,
    linear: &mut SpdSolver,
) -> Result<Option<MixedSolution>> {
    let two_mu = 2.0 * disc.material.lame_mu;
    let c = disc.material.two_mu_plus_h();
    let mut st = reduced_state(disc, u);
    let mut history = Vec::new();
    for iter in 0..=config.max_newton {
        let res = norm(&st.gradient) / scale;
        history.push(res);
        if config.verbose {
            let p = from_orthonormal(&st.plastic);
            let l = multiplier(disc, &st);
            log_line(config, iter, res, complementarity_violation(disc, &p, &l, config.complementarity_c), st.energy);
        }
        if res <= config.newton_tol {
            return Ok(Some(finish(disc, u.clone(), &st, SolvePath::Newton, history)));
        }
        if iter == config.max_newton {
            break;
        }
        // generalized Hessian: the elastic branch is used on and inside the yield surface
        let hess = disc.stiffness_plus(|k| {
            let t = st.trial[k];
            let nt = t[0].hypot(t[1]);
            let s = disc.sigma[k];
            if nt <= s {
                return None;
            }
            let nn = [t[0] / nt, t[1] / nt];
            let r = s / nt;
            let f = -two_mu * two_mu / c;
            Some([
                [f * (1.0 - r + r * nn[0] * nn[0]), f * r * nn[0] * nn[1]],
                [f * r * nn[1] * nn[0], f * (1.0 - r + r * nn[1] * nn[1])],
            ])
        });
        let rhs: Vec<f64> = st.gradient.iter().map(|g| -g).collect();
        let delta = match linear.solve(&hess, &rhs) {
            Ok(d) => d,
            Err(_) => return Ok(None),
        };
        let slope = dot(&st.gradient, &delta);
        let gnorm = norm(&st.gradient);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial_u: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let next = reduced_state(disc, &trial_u);
            let armijo = next.energy <= st.energy + 1e-4 * alpha * slope;
            if armijo || norm(&next.gradient) < gnorm {
                accepted = Some((trial_u, next));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nu, next)) => {
                *u = nu;
                st = next;
            }
            None => return Ok(None),
        }
    }
    Ok(None)
}

/// Alternating minimization: `u` with `p` frozen, then `p` by the return map.
/// Each half step minimizes the energy exactly, so the energy never increases.
fn fallback(
    disc: &Discretization,
    config: &SolverConfig,
    mut u: Vec<f64>,
    scale: f64,
    linear: &mut SpdSolver,
) -> Result<MixedSolution> {
    let two_mu = 2.0 * disc.material.lame_mu;
    let factor = linear.factor(&disc.stiffness)?;
    let mut st = reduced_state(disc, &u);
    let mut history = Vec::new();
    for iter in 0..=config.fallback_max_fixed_point {
        let res = norm(&st.gradient) / scale;
        history.push(res);
        if config.verbose {
            let p = from_orthonormal(&st.plastic);
            let l = multiplier(disc, &st);
            log_line(config, iter, res, complementarity_violation(disc, &p, &l, config.complementarity_c), st.energy);
        }
        if res <= config.newton_tol {
            return Ok(finish(disc, u, &st, SolvePath::Fallback, history));
        }
        let coupling = disc.dev_strain_transpose(&st.plastic, &disc.weights);
        let rhs: Vec<f64> = disc.load.iter().zip(&coupling).map(|(l, c)| l + two_mu * c).collect();
        u = factor.solve(&rhs)?;
        st = reduced_state(disc, &u);
    }
    Err(Error::NoConvergence(ResidualHistory(history)))
}

/// `lambda_hp = P_hp dev(sigma(u, p) - H p)`, projected with a quadrature
/// rule of higher order than the one defining the coefficients.
pub fn recover_lambda(disc: &Discretization, u: &[f64], p: &[DevTensor2]) -> Vec<DevTensor2> {
    let fields = ElementField::all(disc, u, p, p);
    let m = disc.material;
    l2_project_to_qhp(disc, |i, xr| {
        let f = &fields[i];
        (f.stress(xr, &m).dev()) - m.apply_h(&f.plastic(xr))
    })
}

/// Solves `a((u*, p*), (v, q)) = l(v) - (lambda_N, q)` for all discrete `(v, q)`.
/// The plastic block is eliminated coefficientwise.
pub fn solve_auxiliary(disc: &Discretization, lambda_n: &[DevTensor2]) -> Result<(Vec<f64>, Vec<DevTensor2>)> {
    let two_mu = 2.0 * disc.material.lame_mu;
    let c = disc.material.two_mu_plus_h();
    let lt: Vec<[f64; 2]> = lambda_n.iter().map(|l| l.to_orthonormal()).collect();
    let f = -two_mu * two_mu / c;
    let a = disc.stiffness_plus(|_| Some([[f, 0.0], [0.0, f]]));
    let coupling = disc.dev_strain_transpose(&lt, &disc.weights);
    let rhs: Vec<f64> = disc.load.iter().zip(&coupling).map(|(l, x)| l - two_mu / c * x).collect();
    let mut linear = SpdSolver::default();
    let u = linear.solve(&a, &rhs)?;
    let eu = disc.dev_strain(&u);
    let p = eu
        .iter()
        .zip(&lt)
        .map(|(e, l)| DevTensor2::from_orthonormal([(two_mu * e[0] - l[0]) / c, (two_mu * e[1] - l[1]) / c]))
        .collect();
    Ok((u, p))
}

/// Relative residual of the first mixed equation, `|l - A_uu u - A_up p| / |l|`.
pub fn equation_residual(disc: &Discretization, u: &[f64], p: &[DevTensor2]) -> f64 {
    let (ru, _) = disc.apply_block(u, p);
    let r: Vec<f64> = disc.load.iter().zip(&ru).map(|(l, a)| l - a).collect();
    norm(&r) / norm(&disc.load).max(f64::MIN_POSITIVE)
}

/// Relative residual of the second mixed equation,
/// `max_i |A_up^T u + A_pp p + D lambda|_i / (D_i sigma_i)`.
pub fn multiplier_equation_residual(disc: &Discretization, u: &[f64], p: &[DevTensor2], lambda: &[DevTensor2]) -> f64 {
    let (_, rp) = disc.apply_block(u, p);
    rp.iter()
        .enumerate()
        .map(|(k, r)| {
            let d = disc.weights[k];
            // (lambda, q) = 2 D (lambda_a q_a + lambda_b q_b)
            let x = [r[0] + 2.0 * d * lambda[k].a, r[1] + 2.0 * d * lambda[k].b];
            x[0].hypot(x[1]) / (d * disc.sigma[k])
        })
        .fold(0.0, f64::max)
}
