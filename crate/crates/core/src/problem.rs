//! Problem data: material, domain, boundary layout and loads.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::mesh::{build_rectangle_mesh, BoundaryLayout, QuadMesh, Rect, Side};
use crate::tensor::Material;

pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type TractionField = Arc<dyn Fn([f64; 2], Side) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct Problem {
    pub material: Material,
    pub domain: Rect,
    pub boundary: BoundaryLayout,
    /// Volume force; `None` means zero.
    pub body_force: Option<VectorField>,
    /// Traction on the Neumann sides of the domain.
    pub traction: TractionField,
    pub load_scale: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("material", &self.material)
            .field("domain", &self.domain)
            .field("boundary", &self.boundary)
            .field("body_force", &self.body_force.is_some())
            .field("load_scale", &self.load_scale)
            .finish()
    }
}

/// Top-edge traction of the benchmark: `(0, -400 min(0, x^2 - 1/4)^2)`.
pub fn benchmark_traction(x: [f64; 2]) -> [f64; 2] {
    let m = (x[0] * x[0] - 0.25).min(0.0);
    [0.0, -400.0 * m * m]
}

impl Problem {
    /// Square `(-1,1)^2` clamped at the bottom, loaded on the top side.
    pub fn benchmark() -> Self {
        Self {
            material: Material::benchmark(),
            domain: Rect::new(-1.0, 1.0, -1.0, 1.0),
            boundary: BoundaryLayout::clamped_bottom(),
            body_force: None,
            traction: Arc::new(|x, side| {
                if side == Side::Top {
                    benchmark_traction(x)
                } else {
                    [0.0, 0.0]
                }
            }),
            load_scale: 1.0,
        }
    }

    pub fn with_load_scale(mut self, s: f64) -> Self {
        self.load_scale = s;
        self
    }

    pub fn f(&self, x: [f64; 2]) -> [f64; 2] {
        match &self.body_force {
            Some(f) => {
                let v = f(x);
                [self.load_scale * v[0], self.load_scale * v[1]]
            }
            None => [0.0, 0.0],
        }
    }

    pub fn g(&self, x: [f64; 2], side: Side) -> [f64; 2] {
        let v = (self.traction)(x, side);
        [self.load_scale * v[0], self.load_scale * v[1]]
    }

    pub fn initial_mesh(&self, nx: usize, ny: usize, p: usize) -> Result<QuadMesh> {
        build_rectangle_mesh(self.domain, nx, ny, p, self.boundary)
    }
}
