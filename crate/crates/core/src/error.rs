use std::fmt;

/// Errors produced by meshing, assembly, solving and the benchmark driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("singular jacobian on element {element} (det = {det:e})")]
    SingularJacobian { element: usize, det: f64 },

    #[error("non-positive dual basis weight D = {value:e} on element {element}")]
    NonPositiveWeight { element: usize, value: f64 },

    #[error("element {element} violates the affine-jacobian assumption (dual basis deviates by {deviation:e})")]
    BrokenMeshAssumption { element: usize, deviation: f64 },

    #[error("multiplier infeasible on element {element}: |mu|_F = {norm} > sigma_y = {sigma_y}")]
    InfeasibleMultiplier {
        element: usize,
        norm: f64,
        sigma_y: f64,
    },

    #[error("solver did not converge: {0}")]
    NoConvergence(ResidualHistory),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutside { x: f64, y: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Relative residuals recorded by a failed nonlinear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualHistory(pub Vec<f64>);

impl fmt::Display for ResidualHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        write!(f, "{n} iterations")?;
        if let Some(last) = self.0.last() {
            write!(f, ", last relative residual {last:e}")?;
        }
        Ok(())
    }
}
