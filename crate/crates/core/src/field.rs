//! Pointwise evaluation of discrete solutions on one element.

use crate::assembly::Discretization;
use crate::basis::{displacement_basis, strain_basis, AffineMap};
use crate::error::Result;
use crate::mesh::QuadMesh;
use crate::space::{DisplacementSpace, StrainSpace};
use crate::tensor::{DevTensor2, Material, SymTensor2};

/// Local data of a discrete triple `(u, p, lambda)` on one element.
#[derive(Debug, Clone)]
pub struct ElementField {
    pub map: AffineMap,
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    pub plastic: Vec<DevTensor2>,
    pub multiplier: Vec<DevTensor2>,
}

/// Displacement gradient `g[i][j] = d u_i / d x_j` and second derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct Derivatives {
    pub grad: [[f64; 2]; 2],
    /// `(xx, yy, xy)` second derivatives of each component.
    pub hess: [[f64; 3]; 2],
}

impl ElementField {
    pub fn new(disc: &Discretization, i: usize, u: &[f64], p: &[DevTensor2], lambda: &[DevTensor2]) -> Self {
        let range = disc.strain.range(i);
        Self {
            map: disc.ops[i].map,
            degree: disc.space.element(i).degree,
            nodes: disc.space.element(i).gather(u),
            plastic: p[range.clone()].to_vec(),
            multiplier: lambda[range].to_vec(),
        }
    }

    /// Fields of every element of a mesh without assembling the discrete problem.
    pub fn on_mesh(mesh: &QuadMesh, u: &[f64], p: &[DevTensor2], lambda: &[DevTensor2]) -> Result<Vec<Self>> {
        let space = DisplacementSpace::new(mesh);
        let strain = StrainSpace::new(mesh);
        mesh.elements()
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let range = strain.range(i);
                Ok(Self {
                    map: AffineMap::of(mesh, c)?,
                    degree: space.element(i).degree,
                    nodes: space.element(i).gather(u),
                    plastic: p[range.clone()].to_vec(),
                    multiplier: lambda[range].to_vec(),
                })
            })
            .collect()
    }

    /// Fields of every element.
    pub fn all(disc: &Discretization, u: &[f64], p: &[DevTensor2], lambda: &[DevTensor2]) -> Vec<Self> {
        (0..disc.mesh.num_elements())
            .map(|i| Self::new(disc, i, u, p, lambda))
            .collect()
    }

    pub fn u(&self, xr: [f64; 2]) -> [f64; 2] {
        let v = displacement_basis(self.degree).values(xr);
        v.iter()
            .zip(&self.nodes)
            .fold([0.0; 2], |a, (phi, n)| [a[0] + phi * n[0], a[1] + phi * n[1]])
    }

    pub fn derivatives(&self, xr: [f64; 2]) -> Derivatives {
        let e = displacement_basis(self.degree).eval(xr);
        let mut d = Derivatives::default();
        for ((g, h), n) in e.grads.iter().zip(&e.hessians).zip(&self.nodes) {
            let g = self.map.grad(*g);
            let h = self.map.hessian(*h);
            for c in 0..2 {
                d.grad[c][0] += n[c] * g[0];
                d.grad[c][1] += n[c] * g[1];
                for k in 0..3 {
                    d.hess[c][k] += n[c] * h[k];
                }
            }
        }
        d
    }

    pub fn strain(&self, xr: [f64; 2]) -> SymTensor2 {
        strain_of(&self.derivatives(xr).grad)
    }

    fn combine(&self, coef: &[DevTensor2], xr: [f64; 2]) -> DevTensor2 {
        strain_basis(self.degree)
            .values(xr)
            .iter()
            .zip(coef)
            .fold(DevTensor2::ZERO, |a, (phi, q)| a + *phi * *q)
    }

    pub fn plastic(&self, xr: [f64; 2]) -> DevTensor2 {
        self.combine(&self.plastic, xr)
    }

    pub fn multiplier(&self, xr: [f64; 2]) -> DevTensor2 {
        self.combine(&self.multiplier, xr)
    }

    /// Physical gradients `(d/dx, d/dy)` of the plastic strain components `a` and `b`.
    pub fn plastic_gradient(&self, xr: [f64; 2]) -> [[f64; 2]; 2] {
        let e = strain_basis(self.degree).eval(xr);
        let mut out = [[0.0; 2]; 2];
        for (g, q) in e.grads.iter().zip(&self.plastic) {
            let g = self.map.grad(*g);
            out[0][0] += q.a * g[0];
            out[0][1] += q.a * g[1];
            out[1][0] += q.b * g[0];
            out[1][1] += q.b * g[1];
        }
        out
    }

    /// `sigma = C (eps(u) - p)`.
    pub fn stress(&self, xr: [f64; 2], m: &Material) -> SymTensor2 {
        m.apply_c(&(self.strain(xr) - self.plastic(xr).to_sym()))
    }

    /// `div sigma` by exact differentiation of the element polynomials.
    pub fn div_stress(&self, xr: [f64; 2], m: &Material) -> [f64; 2] {
        let d = self.derivatives(xr);
        let gp = self.plastic_gradient(xr);
        let (lam, mu) = (m.lame_lambda, m.lame_mu);
        let [ux, uy] = d.hess;
        // ux = (u_x,xx, u_x,yy, u_x,xy), uy likewise
        let dx = lam * (ux[0] + uy[2]) + 2.0 * mu * (ux[0] - gp[0][0]) + mu * (ux[1] + uy[2]) - 2.0 * mu * gp[1][1];
        let dy = mu * (ux[2] + uy[0]) - 2.0 * mu * gp[1][0] + lam * (ux[2] + uy[1]) + 2.0 * mu * (uy[1] + gp[0][1]);
        [dx, dy]
    }
}

pub fn strain_of(g: &[[f64; 2]; 2]) -> SymTensor2 {
    SymTensor2::new(g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]))
}
