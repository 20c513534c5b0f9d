//! Symmetric sparse matrices (lower triangle in CSC form), a sparse Cholesky
//! solver with reusable symbolic analysis, and a Jacobi-preconditioned CG fallback.

use std::collections::BTreeSet;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Side};

use crate::error::{Error, Result};

/// Sparsity pattern of a symmetric matrix, lower triangle, columns sorted.
#[derive(Debug, Clone)]
pub struct SymPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SymPattern {
    /// Pattern covering every pair of DOFs that share an element.
    pub fn from_element_dofs<'a>(n: usize, elements: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for dofs in elements {
            for &c in dofs {
                for &r in dofs {
                    if r >= c {
                        cols[c].insert(r);
                    }
                }
            }
        }
        for (c, col) in cols.iter_mut().enumerate() {
            col.insert(c);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in cols {
            row_idx.extend(col);
            col_ptr.push(row_idx.len());
        }
        Self { n, col_ptr, row_idx }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage position of entry `(r, c)`, `r >= c`.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (lo, hi) = (self.col_ptr[c], self.col_ptr[c + 1]);
        self.row_idx[lo..hi].binary_search(&r).ok().map(|k| lo + k)
    }

    /// Storage positions for all lower-triangle pairs of a sorted DOF list,
    /// row-major over `(a, b)` with `dofs[a] >= dofs[b]`.
    pub fn scatter_map(&self, dofs: &[usize]) -> Vec<u32> {
        let mut out = Vec::with_capacity(dofs.len() * (dofs.len() + 1) / 2);
        for (a, &r) in dofs.iter().enumerate() {
            for &c in &dofs[..=a] {
                out.push(self.position(r, c).expect("entry in pattern") as u32);
            }
        }
        out
    }
}

/// Symmetric matrix stored as its lower triangle.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub pattern: std::sync::Arc<SymPattern>,
    pub values: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(pattern: std::sync::Arc<SymPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    /// Adds a dense symmetric block (row-major lower triangle as produced by
    /// [`SymPattern::scatter_map`]).
    pub fn add_packed(&mut self, map: &[u32], packed: &[f64]) {
        for (&k, &v) in map.iter().zip(packed) {
            self.values[k as usize] += v;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        self.pattern.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n())
            .map(|c| self.values[self.pattern.col_ptr[c]])
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.pattern;
        let mut y = vec![0.0; p.n];
        for c in 0..p.n {
            for k in p.col_ptr[c]..p.col_ptr[c + 1] {
                let r = p.row_idx[k];
                let v = self.values[k];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        let p = &self.pattern;
        let sym = SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.col_ptr, None, &p.row_idx);
        SparseColMatRef::new(sym, &self.values)
    }
}

/// Which linear solver produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearPath {
    Cholesky,
    ConjugateGradient,
}

/// Direct SPD solver; the symbolic factorization is computed once per pattern.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    symbolic: Option<SymbolicLlt<usize>>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SpdSolver {
    fn default() -> Self {
        Self {
            symbolic: None,
            cg_tol: 1e-12,
            cg_max_iter: 20_000,
        }
    }
}

/// A numeric factorization, or the matrix itself when factorization failed.
pub enum Factor<'a> {
    Cholesky(Llt<usize, f64>),
    Iterative(&'a SymMatrix, f64, usize),
}

impl Factor<'_> {
    pub fn path(&self) -> LinearPath {
        match self {
            Factor::Cholesky(_) => LinearPath::Cholesky,
            Factor::Iterative(..) => LinearPath::ConjugateGradient,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factor::Cholesky(llt) => {
                let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
                let x: Vec<f64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
                if x.iter().all(|v| v.is_finite()) {
                    Ok(x)
                } else {
                    Err(Error::LinearSolve("non-finite Cholesky solution".into()))
                }
            }
            Factor::Iterative(a, tol, max_iter) => pcg(a, b, *tol, *max_iter),
        }
    }
}

impl SpdSolver {
    /// Factorizes `a`, falling back to PCG if the Cholesky factorization fails.
    pub fn factor<'a>(&mut self, a: &'a SymMatrix) -> Result<Factor<'a>> {
        if a.n() == 0 {
            return Ok(Factor::Iterative(a, self.cg_tol, self.cg_max_iter));
        }
        if self.symbolic.is_none() {
            let sym = SymbolicLlt::try_new(a.as_faer().symbolic(), Side::Lower)
                .map_err(|e| Error::LinearSolve(format!("symbolic factorization: {e:?}")))?;
            self.symbolic = Some(sym);
        }
        let sym = self.symbolic.clone().expect("set above");
        match Llt::try_new_with_symbolic(sym, a.as_faer(), Side::Lower) {
            Ok(llt) => Ok(Factor::Cholesky(llt)),
            Err(_) => Ok(Factor::Iterative(a, self.cg_tol, self.cg_max_iter)),
        }
    }

    pub fn solve(&mut self, a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
        self.factor(a)?.solve(b)
    }
}

/// Conjugate gradients with a diagonal preconditioner; relative residual `tol`.
pub fn pcg(a: &SymMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::LinearSolve("matrix has a non-positive diagonal".into()));
    }
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve(format!(
        "CG did not reach relative residual {tol:e} in {max_iter} iterations"
    )))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
