//! Element bases: tensor-product Gauss-Lobatto nodal functions for the
//! displacement, Gauss-point Lagrange functions for the plastic strain, and the
//! dual (biorthogonal) basis data `D_i`, `sigma_i`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mesh::{CellId, QuadMesh};
use crate::quadrature::{gauss, gauss_lobatto, Lagrange1d};

/// Largest polynomial degree with cached basis tables.
pub const MAX_DEGREE: usize = 24;

/// Basis values, reference gradients and reference second derivatives
/// `(d2/dx2, d2/dy2, d2/dxdy)` at one reference point.
#[derive(Debug, Clone, Default)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

/// Tensor-product Lagrange basis with local index `j * n1 + i`
/// (`i` along the first reference coordinate).
#[derive(Debug, Clone)]
pub struct TensorLagrange {
    one_d: Lagrange1d,
}

impl TensorLagrange {
    pub fn new(nodes: &[f64]) -> Self {
        Self {
            one_d: Lagrange1d::new(nodes),
        }
    }

    pub fn nodes_1d(&self) -> &[f64] {
        self.one_d.nodes()
    }

    pub fn len(&self) -> usize {
        self.one_d.len() * self.one_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.one_d.is_empty()
    }

    /// Reference coordinates of the nodes in local order.
    pub fn node_points(&self) -> Vec<[f64; 2]> {
        let n = self.one_d.nodes();
        let mut out = Vec::with_capacity(self.len());
        for &y in n {
            for &x in n {
                out.push([x, y]);
            }
        }
        out
    }

    pub fn values(&self, xr: [f64; 2]) -> Vec<f64> {
        let vx = self.one_d.values(xr[0]);
        let vy = self.one_d.values(xr[1]);
        let mut out = Vec::with_capacity(vx.len() * vy.len());
        for &y in &vy {
            for &x in &vx {
                out.push(x * y);
            }
        }
        out
    }

    pub fn eval(&self, xr: [f64; 2]) -> BasisEval {
        let (vx, dx, ddx) = self.one_d.eval_all(xr[0]);
        let (vy, dy, ddy) = self.one_d.eval_all(xr[1]);
        let n = vx.len();
        let mut e = BasisEval {
            values: Vec::with_capacity(n * n),
            grads: Vec::with_capacity(n * n),
            hessians: Vec::with_capacity(n * n),
        };
        for j in 0..n {
            for i in 0..n {
                e.values.push(vx[i] * vy[j]);
                e.grads.push([dx[i] * vy[j], vx[i] * dy[j]]);
                e.hessians.push([ddx[i] * vy[j], vx[i] * ddy[j], dx[i] * dy[j]]);
            }
        }
        e
    }
}

/// Degree-`p` displacement basis on the `(p+1)^2` Gauss-Lobatto nodes.
pub fn displacement_basis(p: usize) -> &'static TensorLagrange {
    static CACHE: [OnceLock<TensorLagrange>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    assert!((1..=MAX_DEGREE).contains(&p), "degree {p} out of range");
    CACHE[p].get_or_init(|| TensorLagrange::new(gauss_lobatto(p)))
}

/// Plastic-strain basis of an element of degree `p`: Lagrange functions on the
/// `p x p` Gauss points (degree `p - 1` per direction).
pub fn strain_basis(p: usize) -> &'static TensorLagrange {
    static CACHE: [OnceLock<TensorLagrange>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    assert!((1..=MAX_DEGREE).contains(&p), "degree {p} out of range");
    CACHE[p].get_or_init(|| TensorLagrange::new(&gauss(p).points))
}

/// Tensor Gauss points and weights with `n` points per direction, in the
/// same local order as [`TensorLagrange`].
pub fn tensor_gauss(n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let r = gauss(n);
    let mut pts = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            pts.push([r.points[i], r.points[j]]);
            wts.push(r.weights[i] * r.weights[j]);
        }
    }
    (pts, wts)
}

/// Affine element geometry: `x = b + J xr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub offset: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// Inverse transpose of the jacobian, mapping reference to physical gradients.
    pub inv_t: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn of(mesh: &QuadMesh, t: CellId) -> Result<Self> {
        let jac = mesh.affine_jacobian(t).ok_or(Error::BrokenMeshAssumption {
            element: t,
            deviation: f64::NAN,
        })?;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det > 0.0) {
            return Err(Error::SingularJacobian { element: t, det });
        }
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Ok(Self {
            offset: mesh.map_point(t, [0.0, 0.0]),
            jac,
            det,
            inv_t,
        })
    }

    pub fn map(&self, xr: [f64; 2]) -> [f64; 2] {
        [
            self.offset[0] + self.jac[0][0] * xr[0] + self.jac[0][1] * xr[1],
            self.offset[1] + self.jac[1][0] * xr[0] + self.jac[1][1] * xr[1],
        ]
    }

    pub fn inverse(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.offset[0], x[1] - self.offset[1]];
        // J^{-1} = (J^{-T})^T
        [
            self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1],
            self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1],
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }

    /// Physical second derivatives `(xx, yy, xy)` from reference ones: `J^{-T} H J^{-1}`.
    pub fn hessian(&self, h: [f64; 3]) -> [f64; 3] {
        let r = [[h[0], h[2]], [h[2], h[1]]];
        let a = self.inv_t;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    for l in 0..2 {
                        *v += a[i][k] * r[k][l] * a[j][l];
                    }
                }
            }
        }
        [out[0][0], out[1][1], out[0][1]]
    }

    /// Bit pattern of the jacobian, used to share element tables between congruent cells.
    pub fn key(&self) -> [u64; 4] {
        [
            self.jac[0][0].to_bits(),
            self.jac[0][1].to_bits(),
            self.jac[1][0].to_bits(),
            self.jac[1][1].to_bits(),
        ]
    }
}

/// Element quadrature of the plastic-strain space: the midpoint rule for
/// `p_T = 1`, otherwise the `p_T x p_T` tensor Gauss rule.
pub fn quadrature_q_hp(mesh: &QuadMesh, t: CellId, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let p = mesh.degree(t);
    if p == 1 {
        return mesh.element_area(t) * f(mesh.map_point(t, [0.0, 0.0]));
    }
    let (pts, wts) = tensor_gauss(p);
    pts.iter()
        .zip(&wts)
        .map(|(&xr, &w)| w * mesh.jacobian(t, xr).1.abs() * f(mesh.map_point(t, xr)))
        .sum()
}

/// Dual-basis data of one element: the weights `D_i = (phi_i, 1)` and the
/// yield weights `sigma_i`, in strain-basis local order.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthSlice {
    pub weights: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Largest deviation of `(phi_i, phi_j)` from `delta_ij D_i`, relative to `max D`.
    pub deviation: f64,
}

/// Builds the dual basis of the element's strain basis. On affine elements the
/// local mass matrix is diagonal, the dual functions coincide with the primal
/// ones and `sigma_i` equals the (constant) yield stress.
pub fn build_biorthogonal(mesh: &QuadMesh, t: CellId, sigma_y: f64) -> Result<BiorthSlice> {
    let p = mesh.degree(t);
    let basis = strain_basis(p);
    let n = basis.len();
    let (pts, wts) = tensor_gauss(p + 1);
    let mut mass = vec![0.0; n * n];
    let mut weights = vec![0.0; n];
    let mut yield_moment = vec![0.0; n];
    for (&xr, &w) in pts.iter().zip(&wts) {
        let (_, det) = mesh.jacobian(t, xr);
        let dw = w * det.abs();
        let v = basis.values(xr);
        for i in 0..n {
            weights[i] += dw * v[i];
            yield_moment[i] += dw * sigma_y * v[i];
            for j in 0..n {
                mass[i * n + j] += dw * v[i] * v[j];
            }
        }
    }
    let dmax = weights.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    if let Some(&d) = weights.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::NonPositiveWeight { element: t, value: d });
    }
    let mut deviation = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { weights[i] } else { 0.0 };
            deviation = deviation.max((mass[i * n + j] - target).abs() / dmax);
        }
    }
    if deviation > 1e-10 {
        return Err(Error::BrokenMeshAssumption { element: t, deviation });
    }
    let sigma = yield_moment.iter().zip(&weights).map(|(m, d)| m / d).collect();
    Ok(BiorthSlice {
        weights,
        sigma,
        deviation,
    })
}
