//! Assembly of the mixed system on a mesh.
//!
//! Plastic-strain coefficients are handled in orthonormal deviator coordinates
//! internally (see [`DevTensor2::to_orthonormal`]); the public block operators
//! use the `(a, b)` storage of [`DevTensor2`], whose inner product carries the
//! factor 2.

use std::collections::HashMap;
use std::sync::Arc;

use crate::basis::{build_biorthogonal, displacement_basis, strain_basis, tensor_gauss, AffineMap};
use crate::error::Result;
use crate::linalg::{SymMatrix, SymPattern};
use crate::mesh::{EdgeKind, Neighbor, QuadMesh, Side};
use crate::problem::Problem;
use crate::quadrature::{gauss, orthonormal_legendre_all};
use crate::space::{DisplacementSpace, ElementDofs, StrainSpace};
use crate::tensor::{DevTensor2, Material};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Reference tables shared by congruent elements of equal degree.
struct LocalTables {
    /// Stiffness over local vector nodes, `(2n)^2` row-major.
    stiffness: Vec<f64>,
    /// Orthonormal deviatoric strain at the strain-basis Gauss points,
    /// `(2 n_T) x (2n)` row-major.
    dev_strain: Vec<f64>,
}

fn local_tables(p: usize, map: &AffineMap, mat: &Material) -> LocalTables {
    let basis = displacement_basis(p);
    let n = basis.len();
    let nv = 2 * n;
    let mut stiffness = vec![0.0; nv * nv];
    let (pts, wts) = tensor_gauss(p + 1);
    let (lam, mu) = (mat.lame_lambda, mat.lame_mu);
    for (&xr, &w) in pts.iter().zip(&wts) {
        let e = basis.eval(xr);
        let g: Vec<[f64; 2]> = e.grads.iter().map(|&g| map.grad(g)).collect();
        let dw = w * map.det;
        for a in 0..n {
            for b in 0..n {
                let (ga, gb) = (g[a], g[b]);
                // lambda div u div v + 2 mu eps(u):eps(v) for the four component pairs
                let kxx = lam * ga[0] * gb[0] + mu * (2.0 * ga[0] * gb[0] + ga[1] * gb[1]);
                let kyy = lam * ga[1] * gb[1] + mu * (2.0 * ga[1] * gb[1] + ga[0] * gb[0]);
                let kxy = lam * ga[0] * gb[1] + mu * ga[1] * gb[0];
                let kyx = lam * ga[1] * gb[0] + mu * ga[0] * gb[1];
                stiffness[(2 * a) * nv + 2 * b] += dw * kxx;
                stiffness[(2 * a + 1) * nv + 2 * b + 1] += dw * kyy;
                stiffness[(2 * a) * nv + 2 * b + 1] += dw * kxy;
                stiffness[(2 * a + 1) * nv + 2 * b] += dw * kyx;
            }
        }
    }
    let (spts, _) = tensor_gauss(p);
    let nt = spts.len();
    let mut dev_strain = vec![0.0; 2 * nt * nv];
    for (k, &xr) in spts.iter().enumerate() {
        let e = basis.eval(xr);
        let ra = (2 * k) * nv;
        let rb = (2 * k + 1) * nv;
        for a in 0..n {
            let g = map.grad(e.grads[a]);
            dev_strain[ra + 2 * a] = SQRT_HALF * g[0];
            dev_strain[rb + 2 * a] = SQRT_HALF * g[1];
            dev_strain[ra + 2 * a + 1] = -SQRT_HALF * g[1];
            dev_strain[rb + 2 * a + 1] = SQRT_HALF * g[0];
        }
    }
    LocalTables {
        stiffness,
        dev_strain,
    }
}

/// Per-element operators in terms of the element's free vector DOFs.
#[derive(Debug, Clone)]
pub struct ElementOperator {
    pub map: AffineMap,
    /// Free vector DOFs, ascending.
    pub vdofs: Vec<usize>,
    /// Storage positions of the packed lower triangle over `vdofs`.
    pub scatter: Vec<u32>,
    /// Orthonormal deviatoric strain at the element's coefficients,
    /// `(2 n_T) x vdofs.len()` row-major.
    pub dev_strain: Vec<f64>,
}

/// The assembled discrete problem on one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: QuadMesh,
    pub material: Material,
    pub space: DisplacementSpace,
    pub strain: StrainSpace,
    /// Dual-basis weights `D_i`, one per plastic coefficient.
    pub weights: Vec<f64>,
    /// Yield weights `sigma_i`.
    pub sigma: Vec<f64>,
    pub stiffness: SymMatrix,
    pub load: Vec<f64>,
    pub ops: Vec<ElementOperator>,
}

impl Discretization {
    pub fn new(mesh: QuadMesh, problem: &Problem) -> Result<Self> {
        problem.material.validate()?;
        let material = problem.material;
        let space = DisplacementSpace::new(&mesh);
        let strain = StrainSpace::new(&mesh);
        let n = space.num_dofs();
        let vdofs: Vec<Vec<usize>> = space.elements().iter().map(|e| e.vector_dofs()).collect();
        let pattern = Arc::new(SymPattern::from_element_dofs(n, vdofs.iter().map(|v| v.as_slice())));
        let mut stiffness = SymMatrix::zeros(pattern.clone());
        let mut weights = Vec::with_capacity(strain.len());
        let mut sigma = Vec::with_capacity(strain.len());
        let mut tables: HashMap<(usize, [u64; 4]), Arc<LocalTables>> = HashMap::new();
        let mut ops = Vec::with_capacity(mesh.num_elements());
        for (i, (e, vd)) in space.elements().iter().zip(vdofs).enumerate() {
            let c = mesh.elements()[i];
            let map = AffineMap::of(&mesh, c)?;
            let dual = build_biorthogonal(&mesh, c, material.sigma_y)?;
            weights.extend_from_slice(&dual.weights);
            sigma.extend_from_slice(&dual.sigma);
            let t = tables
                .entry((e.degree, map.key()))
                .or_insert_with(|| Arc::new(local_tables(e.degree, &map, &material)))
                .clone();
            let packed = reduce_packed(e, &t.stiffness);
            let scatter = pattern.scatter_map(&vd);
            stiffness.add_packed(&scatter, &packed);
            let dev_strain = reduce_rows(e, &t.dev_strain);
            ops.push(ElementOperator {
                map,
                vdofs: vd,
                scatter,
                dev_strain,
            });
        }
        let load = assemble_load(&mesh, &space, problem);
        Ok(Self {
            mesh,
            material,
            space,
            strain,
            weights,
            sigma,
            stiffness,
            load,
            ops,
        })
    }

    pub fn num_u(&self) -> usize {
        self.space.num_dofs()
    }

    /// Number of plastic-strain coefficients `N`.
    pub fn num_coefficients(&self) -> usize {
        self.strain.len()
    }

    /// Displacement DOFs plus two scalar unknowns per plastic coefficient.
    pub fn num_dofs(&self) -> usize {
        self.num_u() + 2 * self.num_coefficients()
    }

    /// Orthonormal deviatoric strain `B_i u` at every coefficient.
    pub fn dev_strain(&self, u: &[f64]) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.num_coefficients()];
        for (i, op) in self.ops.iter().enumerate() {
            let m = op.vdofs.len();
            let ul: Vec<f64> = op.vdofs.iter().map(|&d| u[d]).collect();
            for (k, o) in self.strain.range(i).zip(0..) {
                let ra = &op.dev_strain[(2 * o) * m..(2 * o + 1) * m];
                let rb = &op.dev_strain[(2 * o + 1) * m..(2 * o + 2) * m];
                out[k] = [dot(ra, &ul), dot(rb, &ul)];
            }
        }
        out
    }

    /// `sum_i w_i B_i^T s_i` for orthonormal coefficient vectors `s_i`.
    pub fn dev_strain_transpose(&self, s: &[[f64; 2]], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_u()];
        for (i, op) in self.ops.iter().enumerate() {
            let m = op.vdofs.len();
            for (k, o) in self.strain.range(i).zip(0..) {
                let (sa, sb) = (w[k] * s[k][0], w[k] * s[k][1]);
                if sa == 0.0 && sb == 0.0 {
                    continue;
                }
                let ra = &op.dev_strain[(2 * o) * m..(2 * o + 1) * m];
                let rb = &op.dev_strain[(2 * o + 1) * m..(2 * o + 2) * m];
                for (j, &d) in op.vdofs.iter().enumerate() {
                    out[d] += sa * ra[j] + sb * rb[j];
                }
            }
        }
        out
    }

    /// `K + sum_i D_i B_i^T M_i B_i` with symmetric 2x2 blocks `M_i`
    /// (orthonormal coordinates); `None` blocks are skipped.
    pub fn stiffness_plus(&self, block: impl Fn(usize) -> Option<[[f64; 2]; 2]>) -> SymMatrix {
        let mut a = self.stiffness.clone();
        let mut packed = Vec::new();
        for (i, op) in self.ops.iter().enumerate() {
            let m = op.vdofs.len();
            packed.clear();
            packed.resize(m * (m + 1) / 2, 0.0);
            let mut any = false;
            for (k, o) in self.strain.range(i).zip(0..) {
                let Some(mb) = block(k) else { continue };
                any = true;
                let d = self.weights[k];
                let ra = &op.dev_strain[(2 * o) * m..(2 * o + 1) * m];
                let rb = &op.dev_strain[(2 * o + 1) * m..(2 * o + 2) * m];
                let mut pos = 0;
                for x in 0..m {
                    let bx = [ra[x], rb[x]];
                    let t0 = d * (mb[0][0] * bx[0] + mb[0][1] * bx[1]);
                    let t1 = d * (mb[1][0] * bx[0] + mb[1][1] * bx[1]);
                    for y in 0..=x {
                        packed[pos] += t0 * ra[y] + t1 * rb[y];
                        pos += 1;
                    }
                }
            }
            if any {
                a.add_packed(&op.scatter, &packed);
            }
        }
        a
    }

    /// `A_pp` diagonal in `(a, b)` storage: `2 (2 mu + H) D_i` for both components.
    pub fn a_pp_diagonal(&self) -> Vec<f64> {
        let c = self.material.two_mu_plus_h();
        self.weights.iter().map(|d| 2.0 * c * d).collect()
    }

    /// The full block operator applied to `(u, p)`:
    /// `(A_uu u + A_up p, A_up^T u + A_pp p)`, the second part as `(a, b)` duals.
    pub fn apply_block(&self, u: &[f64], p: &[DevTensor2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let two_mu = 2.0 * self.material.lame_mu;
        let c = self.material.two_mu_plus_h();
        let pt: Vec<[f64; 2]> = p.iter().map(|q| q.to_orthonormal()).collect();
        let mut ru = self.stiffness.matvec(u);
        let coupling = self.dev_strain_transpose(&pt, &self.weights);
        for (r, x) in ru.iter_mut().zip(&coupling) {
            *r -= two_mu * x;
        }
        let eu = self.dev_strain(u);
        let s2 = std::f64::consts::SQRT_2;
        let rp = (0..p.len())
            .map(|k| {
                let d = self.weights[k];
                [
                    -two_mu * d * s2 * eu[k][0] + 2.0 * c * d * p[k].a,
                    -two_mu * d * s2 * eu[k][1] + 2.0 * c * d * p[k].b,
                ]
            })
            .collect();
        (ru, rp)
    }

    /// `a((u,p),(v,q))`.
    pub fn bilinear(&self, u: &[f64], p: &[DevTensor2], v: &[f64], q: &[DevTensor2]) -> f64 {
        let (ru, rp) = self.apply_block(u, p);
        dot(&ru, v) + rp.iter().zip(q).map(|(r, q)| r[0] * q.a + r[1] * q.b).sum::<f64>()
    }

    /// `psi_hp(q) = sum_i sigma_i D_i |q_i|_F`.
    pub fn psi(&self, q: &[DevTensor2]) -> f64 {
        use crate::tensor::Frobenius;
        q.iter()
            .zip(self.weights.iter().zip(&self.sigma))
            .map(|(q, (d, s))| s * d * q.frob_norm())
            .sum()
    }

    /// Element data for the element with the given active index.
    pub fn element_dofs(&self, i: usize) -> &ElementDofs {
        self.space.element(i)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `C^T K C` over the element's free DOFs, packed lower triangle.
fn reduce_packed(e: &ElementDofs, k: &[f64]) -> Vec<f64> {
    let nv = 2 * e.nodes.len();
    let m = 2 * e.dofs.len();
    let mut full = vec![0.0; m * m];
    for (a, ca) in e.nodes.iter().enumerate() {
        for (b, cb) in e.nodes.iter().enumerate() {
            for ci in 0..2 {
                for cj in 0..2 {
                    let v = k[(2 * a + ci) * nv + 2 * b + cj];
                    if v == 0.0 {
                        continue;
                    }
                    for &(x, wx) in ca {
                        for &(y, wy) in cb {
                            full[(2 * x as usize + ci) * m + 2 * y as usize + cj] += wx * wy * v;
                        }
                    }
                }
            }
        }
    }
    let mut packed = Vec::with_capacity(m * (m + 1) / 2);
    for x in 0..m {
        packed.extend_from_slice(&full[x * m..x * m + x + 1]);
    }
    packed
}

/// `B C` for a row-major matrix over local vector nodes.
fn reduce_rows(e: &ElementDofs, b: &[f64]) -> Vec<f64> {
    let nv = 2 * e.nodes.len();
    let rows = b.len() / nv;
    let m = 2 * e.dofs.len();
    let mut out = vec![0.0; rows * m];
    for r in 0..rows {
        for (a, ca) in e.nodes.iter().enumerate() {
            for ci in 0..2 {
                let v = b[r * nv + 2 * a + ci];
                if v == 0.0 {
                    continue;
                }
                for &(x, w) in ca {
                    out[r * m + 2 * x as usize + ci] += w * v;
                }
            }
        }
    }
    out
}

/// Scatters a local load vector (over local vector nodes) into the global one.
fn scatter_load(e: &ElementDofs, local: &[[f64; 2]], global: &mut [f64]) {
    for (comb, v) in e.nodes.iter().zip(local) {
        for &(x, w) in comb {
            let d = e.dofs[x as usize];
            global[2 * d] += w * v[0];
            global[2 * d + 1] += w * v[1];
        }
    }
}

/// Neumann sides of active elements: `(active index, side, domain side)`.
pub fn neumann_sides(mesh: &QuadMesh) -> Vec<(usize, Side, Side)> {
    let layout = mesh.boundary_layout();
    let mut out = Vec::new();
    for (i, &c) in mesh.elements().iter().enumerate() {
        for s in Side::ALL {
            if let Neighbor::Boundary(ds) = mesh.neighbor(c, s) {
                if layout.kind(ds) == EdgeKind::Neumann {
                    out.push((i, s, ds));
                }
            }
        }
    }
    out
}

/// Load vector `l(v) = (f, v) + <g, v>` with `p_T + 2` Gauss points per direction.
pub fn assemble_load(mesh: &QuadMesh, space: &DisplacementSpace, problem: &Problem) -> Vec<f64> {
    let mut load = vec![0.0; space.num_dofs()];
    if problem.body_force.is_some() {
        for (i, &c) in mesh.elements().iter().enumerate() {
            let e = space.element(i);
            let basis = displacement_basis(e.degree);
            let (pts, wts) = tensor_gauss(e.degree + 2);
            let mut local = vec![[0.0; 2]; basis.len()];
            for (&xr, &w) in pts.iter().zip(&wts) {
                let (_, det) = mesh.jacobian(c, xr);
                let f = problem.f(mesh.map_point(c, xr));
                for (l, phi) in local.iter_mut().zip(basis.values(xr)) {
                    l[0] += w * det * f[0] * phi;
                    l[1] += w * det * f[1] * phi;
                }
            }
            scatter_load(e, &local, &mut load);
        }
    }
    for (i, s, ds) in neumann_sides(mesh) {
        let c = mesh.elements()[i];
        let e = space.element(i);
        let basis = displacement_basis(e.degree);
        let rule = gauss(e.degree + 2);
        let half = 0.5 * mesh.side_length(c, s);
        let mut local = vec![[0.0; 2]; basis.len()];
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let xr = s.reference_point(t);
            let g = problem.g(mesh.map_point(c, xr), ds);
            for (l, phi) in local.iter_mut().zip(basis.values(xr)) {
                l[0] += w * half * g[0] * phi;
                l[1] += w * half * g[1] * phi;
            }
        }
        scatter_load(e, &local, &mut load);
    }
    load
}

/// Coefficients of the `L^2` projection of a deviatoric field onto the strain
/// space: `q_i = D_i^{-1} (field, phi_i)`, integrated with `p_T + 2` points.
pub fn l2_project_to_qhp(disc: &Discretization, field: impl Fn(usize, [f64; 2]) -> DevTensor2) -> Vec<DevTensor2> {
    let mesh = &disc.mesh;
    let mut out = vec![DevTensor2::ZERO; disc.num_coefficients()];
    for (i, &c) in mesh.elements().iter().enumerate() {
        let p = mesh.degree(c);
        let basis = strain_basis(p);
        let (pts, wts) = tensor_gauss(p + 2);
        let range = disc.strain.range(i);
        for (&xr, &w) in pts.iter().zip(&wts) {
            let (_, det) = mesh.jacobian(c, xr);
            let v = field(i, xr);
            for (k, phi) in range.clone().zip(basis.values(xr)) {
                out[k] += (w * det * phi) * v;
            }
        }
        for k in range {
            out[k] = out[k] * (1.0 / disc.weights[k]);
        }
    }
    out
}

/// Projected data: `f_N` per element and `g_N` per Neumann side, both onto
/// polynomials of degree `p_T - 1`, as orthonormal Legendre coefficients on
/// the reference element / reference side.
#[derive(Debug, Clone)]
pub struct DataProjection {
    /// Per active element; `None` when there is no volume force.
    pub f: Vec<Option<Vec<[f64; 2]>>>,
    /// Keyed by `(active index, side)`.
    pub g: HashMap<(usize, Side), Vec<[f64; 2]>>,
}

/// Gauss points per direction used to project data of degree-`p` elements.
pub fn projection_points(p: usize) -> usize {
    p + 6
}

pub fn project_data(mesh: &QuadMesh, problem: &Problem) -> DataProjection {
    let f = mesh
        .elements()
        .iter()
        .map(|&c| {
            problem.body_force.as_ref()?;
            let p = mesh.degree(c);
            let rule = gauss(projection_points(p));
            let mut coef = vec![[0.0; 2]; p * p];
            for (&y, &wy) in rule.points.iter().zip(&rule.weights) {
                let ly = orthonormal_legendre_all(p - 1, y);
                for (&x, &wx) in rule.points.iter().zip(&rule.weights) {
                    let lx = orthonormal_legendre_all(p - 1, x);
                    let v = problem.f(mesh.map_point(c, [x, y]));
                    for j in 0..p {
                        for k in 0..p {
                            let w = wx * wy * lx[k] * ly[j];
                            coef[j * p + k][0] += w * v[0];
                            coef[j * p + k][1] += w * v[1];
                        }
                    }
                }
            }
            Some(coef)
        })
        .collect();
    let mut g = HashMap::new();
    for (i, s, ds) in neumann_sides(mesh) {
        let c = mesh.elements()[i];
        let p = mesh.degree(c);
        let rule = gauss(projection_points(p));
        let mut coef = vec![[0.0; 2]; p];
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let l = orthonormal_legendre_all(p - 1, t);
            let v = problem.g(mesh.map_point(c, s.reference_point(t)), ds);
            for k in 0..p {
                coef[k][0] += w * l[k] * v[0];
                coef[k][1] += w * l[k] * v[1];
            }
        }
        g.insert((i, s), coef);
    }
    DataProjection { f, g }
}

impl DataProjection {
    pub fn f_at(&self, i: usize, xr: [f64; 2]) -> [f64; 2] {
        let Some(coef) = &self.f[i] else {
            return [0.0; 2];
        };
        let p = (coef.len() as f64).sqrt().round() as usize;
        let lx = orthonormal_legendre_all(p - 1, xr[0]);
        let ly = orthonormal_legendre_all(p - 1, xr[1]);
        let mut v = [0.0; 2];
        for j in 0..p {
            for k in 0..p {
                let w = lx[k] * ly[j];
                v[0] += w * coef[j * p + k][0];
                v[1] += w * coef[j * p + k][1];
            }
        }
        v
    }

    /// `g_N` at edge parameter `t` of the given Neumann side.
    pub fn g_at(&self, i: usize, s: Side, t: f64) -> [f64; 2] {
        let coef = &self.g[&(i, s)];
        let l = orthonormal_legendre_all(coef.len() - 1, t);
        coef.iter()
            .zip(&l)
            .fold([0.0; 2], |a, (c, l)| [a[0] + l * c[0], a[1] + l * c[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rectangle_mesh, BoundaryLayout, Rect};
    use crate::problem::benchmark_traction;
    use approx::assert_relative_eq;

    fn disc(n: usize, p: usize, problem: &Problem) -> Discretization {
        let mesh = build_rectangle_mesh(problem.domain, n, n, p, problem.boundary).unwrap();
        Discretization::new(mesh, problem).unwrap()
    }

    #[test]
    fn a_pp_for_one_unit_element() {
        let d = disc(1, 1, &Problem::benchmark());
        assert_eq!(d.num_coefficients(), 1);
        // 2 * (2 mu + H) * D with D = 4
        assert_relative_eq!(d.a_pp_diagonal()[0], 2.0 * 2500.0 * 4.0, epsilon = 1e-10);
        // a((0,q),(0,q)) = (2 mu + H) |q|^2 |T|
        let q = [DevTensor2::new(0.3, -0.1)];
        let z = vec![0.0; d.num_u()];
        assert_relative_eq!(d.bilinear(&z, &q, &z, &q), 2500.0 * 0.2 * 4.0, epsilon = 1e-10);
    }

    #[test]
    fn block_operator_is_symmetric() {
        use rand::{Rng, SeedableRng};
        let mesh = build_rectangle_mesh(Rect::new(-1.0, 1.0, -1.0, 1.0), 2, 2, 2, BoundaryLayout::clamped_bottom())
            .unwrap()
            .refine(&[0])
            .unwrap();
        let mesh = mesh.p_refine(&[mesh.elements()[1]]).unwrap();
        let d = Discretization::new(mesh, &Problem::benchmark()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut rv = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (u, v) = (rv(d.num_u()), rv(d.num_u()));
        let pq = rv(4 * d.num_coefficients());
        let p: Vec<DevTensor2> = pq[..2 * d.num_coefficients()].chunks(2).map(|c| DevTensor2::new(c[0], c[1])).collect();
        let q: Vec<DevTensor2> = pq[2 * d.num_coefficients()..].chunks(2).map(|c| DevTensor2::new(c[0], c[1])).collect();
        let ab = d.bilinear(&u, &p, &v, &q);
        let ba = d.bilinear(&v, &q, &u, &p);
        assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        // A_pp dominates 2 mu sum D |q|^2
        let z = vec![0.0; d.num_u()];
        let qq = d.bilinear(&z, &q, &z, &q);
        let lower: f64 = q.iter().zip(&d.weights).map(|(q, w)| 2000.0 * w * 2.0 * (q.a * q.a + q.b * q.b)).sum();
        assert!(qq >= lower);
    }

    #[test]
    fn zero_load_vector() {
        let p = Problem::benchmark().with_load_scale(0.0);
        let d = disc(2, 2, &p);
        assert!(d.load.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_traction_on_one_edge() {
        let mut p = Problem::benchmark();
        p.traction = Arc::new(|_, s| if s == Side::Top { [0.0, 3.0] } else { [0.0, 0.0] });
        let d = disc(1, 1, &p);
        // two free top vertices, each receives g * L / 2 = 3 * 2 / 2 in y
        let ys: Vec<f64> = d.load.iter().skip(1).step_by(2).copied().collect();
        assert_eq!(ys.len(), 2);
        for y in ys {
            assert_relative_eq!(y, 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn benchmark_load_lives_on_the_loaded_part_of_the_top() {
        let problem = Problem::benchmark();
        let d = disc(4, 1, &problem);
        let space = &d.space;
        let mut touched = std::collections::BTreeSet::new();
        for (i, &c) in d.mesh.elements().iter().enumerate() {
            let e = space.element(i);
            let nodes = displacement_basis(1).node_points();
            for (comb, xr) in e.nodes.iter().zip(nodes) {
                let x = d.mesh.map_point(c, xr);
                for &(k, _) in comb {
                    let dof = e.dofs[k as usize];
                    if d.load[2 * dof + 1] != 0.0 {
                        touched.insert(((x[0] * 4.0).round() as i64, (x[1] * 4.0).round() as i64));
                    }
                    assert_eq!(d.load[2 * dof], 0.0);
                }
            }
        }
        // top vertices at x = -0.5, 0, 0.5
        assert_eq!(touched.into_iter().collect::<Vec<_>>(), vec![(-2, 4), (0, 4), (2, 4)]);
        let total: f64 = d.load.iter().sum();
        // integral of g over the top edge: -400 * 16/15 / 32
        assert_relative_eq!(total, -400.0 / 30.0, epsilon = 1e-10);
        let _ = benchmark_traction;
    }

    #[test]
    fn projection_of_a_q_hp_field_is_the_identity() {
        let d = disc(2, 3, &Problem::benchmark());
        let field = |_: usize, xr: [f64; 2]| DevTensor2::new(xr[0] * xr[1] + 0.5, xr[1] * xr[1] * xr[0]);
        let q = l2_project_to_qhp(&d, field);
        let (pts, _) = tensor_gauss(3);
        for i in 0..4 {
            for (k, &xr) in d.strain.range(i).zip(&pts) {
                let expect = field(i, xr);
                assert!((q[k] - expect).to_orthonormal().iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn data_projection_reproduces_polynomials() {
        let mut problem = Problem::benchmark();
        problem.traction = Arc::new(|x, _| [x[0] * x[0], 1.0 - x[1]]);
        problem.body_force = Some(Arc::new(|x| [x[0] * x[1], 2.0]));
        let mesh = build_rectangle_mesh(problem.domain, 2, 2, 3, problem.boundary).unwrap();
        let proj = project_data(&mesh, &problem);
        for &(i, s) in proj.g.keys() {
            let c = mesh.elements()[i];
            for t in [-0.7, 0.1, 0.9] {
                let x = mesh.map_point(c, s.reference_point(t));
                let g = proj.g_at(i, s, t);
                assert_relative_eq!(g[0], x[0] * x[0], epsilon = 1e-13);
                assert_relative_eq!(g[1], 1.0 - x[1], epsilon = 1e-13);
            }
        }
        let f = proj.f_at(3, [0.2, -0.3]);
        let x = mesh.map_point(mesh.elements()[3], [0.2, -0.3]);
        assert_relative_eq!(f[0], x[0] * x[1], epsilon = 1e-13);
        assert_relative_eq!(f[1], 2.0, epsilon = 1e-13);
    }
}
