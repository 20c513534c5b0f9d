//! One-dimensional Gauss rules, Gauss-Lobatto nodes, Lagrange interpolation
//! polynomials and Legendre polynomials on `[-1, 1]`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Residual bound for the Newton iteration on Legendre roots.
const ROOT_TOL: f64 = 1e-15;

/// Largest rule size kept in the process-wide cache.
pub const MAX_CACHED_POINTS: usize = 40;

/// Gauss-Legendre rule with `n` points on `[-1, 1]`, exact for polynomials
/// of degree `2n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // derivative from the standard identity; at the endpoints use the closed form
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-14 {
        let s = if x > 0.0 { 1.0 } else { (-1f64).powi(n as i32 + 1) };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// Legendre polynomials `P_0..=P_n` at `x`, normalised to unit `L^2(-1,1)` norm.
pub fn orthonormal_legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut p0, mut p1) = (1.0, x);
    out.push(p0);
    if n >= 1 {
        out.push(p1);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        out.push(p2);
        p0 = p1;
        p1 = p2;
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v *= ((2 * k + 1) as f64 / 2.0).sqrt();
    }
    out
}

/// Computes the `n`-point Gauss-Legendre rule by Newton iteration on `P_n`.
pub fn gauss_rule(n: usize) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gauss rule needs n >= 1".into()));
    }
    let nf = n as f64;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if p.abs() <= ROOT_TOL || dx.abs() <= 1e-17 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = x;
        points[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Ok(GaussRule { points, weights })
}

/// Cached Gauss rule; panics for `n == 0` or `n > MAX_CACHED_POINTS`.
pub fn gauss(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = CACHE.get_or_init(|| {
        (1..=MAX_CACHED_POINTS)
            .map(|k| gauss_rule(k).expect("n >= 1"))
            .collect()
    });
    assert!(
        (1..=MAX_CACHED_POINTS).contains(&n),
        "Gauss rule size {n} outside the cached range"
    );
    &rules[n - 1]
}

/// The `p + 1` Gauss-Lobatto nodes: `-1`, the roots of `P_p'`, `1`.
pub fn gauss_lobatto_points(p: usize) -> Vec<f64> {
    assert!(p >= 1);
    let mut pts = vec![0.0; p + 1];
    pts[0] = -1.0;
    pts[p] = 1.0;
    let pf = p as f64;
    for i in 1..p {
        // Chebyshev-Gauss-Lobatto initial guess
        let mut x = -(std::f64::consts::PI * i as f64 / pf).cos();
        for _ in 0..100 {
            let (lp, dp) = legendre(p, x);
            // (1 - x^2) P'' = 2x P' - p(p+1) P
            let ddp = (2.0 * x * dp - pf * (pf + 1.0) * lp) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        pts[i] = x;
    }
    for i in 0..p.div_ceil(2) {
        let s = 0.5 * (pts[p - i] - pts[i]);
        pts[i] = -s;
        pts[p - i] = s;
    }
    if p.is_multiple_of(2) {
        pts[p / 2] = 0.0;
    }
    pts
}

pub fn gauss_lobatto(p: usize) -> &'static [f64] {
    static CACHE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| (1..=MAX_CACHED_POINTS).map(gauss_lobatto_points).collect());
    &all[p - 1]
}

/// Lagrange interpolation basis on a set of distinct nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagrange1d {
    nodes: Vec<f64>,
    denominators: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(nodes: &[f64]) -> Self {
        let denominators = nodes
            .iter()
            .enumerate()
            .map(|(j, &xj)| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != j)
                    .map(|(_, &xm)| xj - xm)
                    .product::<f64>()
            })
            .collect();
        Self {
            nodes: nodes.to_vec(),
            denominators,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values, first and second derivatives of every basis polynomial at `x`.
    pub fn eval_all(&self, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let d: Vec<f64> = self.nodes.iter().map(|&xm| x - xm).collect();
        let mut val = vec![0.0; n];
        let mut der = vec![0.0; n];
        let mut der2 = vec![0.0; n];
        for j in 0..n {
            let mut v = 1.0;
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            // product rule accumulated factor by factor
            for m in 0..n {
                if m == j {
                    continue;
                }
                d2 = d2 * d[m] + 2.0 * d1;
                d1 = d1 * d[m] + v;
                v *= d[m];
            }
            let inv = 1.0 / self.denominators[j];
            val[j] = v * inv;
            der[j] = d1 * inv;
            der2[j] = d2 * inv;
        }
        (val, der, der2)
    }

    pub fn values(&self, x: f64) -> Vec<f64> {
        self.eval_all(x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_small_rules() {
        let r1 = gauss_rule(1).unwrap();
        assert_eq!(r1.points, vec![0.0]);
        assert_relative_eq!(r1.weights[0], 2.0, epsilon = 1e-15);
        let r2 = gauss_rule(2).unwrap();
        assert_relative_eq!(r2.points[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(r2.points[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(r2.weights[0], 1.0, epsilon = 1e-15);
        let r3 = gauss_rule(3).unwrap();
        assert_relative_eq!(r3.integrate(|x| x.powi(4)), 0.4, epsilon = 1e-15);
        assert!(gauss_rule(0).is_err());
    }

    #[test]
    fn gauss_rule_invariants() {
        for n in 1..=MAX_CACHED_POINTS {
            let r = gauss(n);
            let wsum: f64 = r.weights.iter().sum();
            assert_relative_eq!(wsum, 2.0, epsilon = 1e-13);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for i in 0..n {
                assert_eq!(r.points[i], -r.points[n - 1 - i]);
                assert!(legendre(n, r.points[i]).0.abs() < 1e-13);
            }
            // exact for monomials up to degree 2n - 1
            for k in 0..2 * n {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((r.integrate(|x| x.powi(k as i32)) - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn lobatto_nodes() {
        assert_eq!(gauss_lobatto_points(1), vec![-1.0, 1.0]);
        assert_eq!(gauss_lobatto_points(2), vec![-1.0, 0.0, 1.0]);
        let p3 = gauss_lobatto_points(3);
        assert_relative_eq!(p3[1], -1.0 / 5f64.sqrt(), epsilon = 1e-15);
        for p in 2..=12 {
            let pts = gauss_lobatto(p);
            for &x in &pts[1..p] {
                assert!(legendre(p, x).1.abs() < 1e-11);
            }
            assert!(pts.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn lagrange_kronecker_and_derivatives() {
        let nodes = gauss_lobatto(4);
        let l = Lagrange1d::new(nodes);
        for (k, &x) in nodes.iter().enumerate() {
            let v = l.values(x);
            for (j, vj) in v.iter().enumerate() {
                assert_relative_eq!(*vj, if j == k { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        // x^3 reproduced with exact first and second derivative
        let x = 0.3;
        let (v, d, dd) = l.eval_all(x);
        let f: Vec<f64> = nodes.iter().map(|t| t.powi(3)).collect();
        let dot = |a: &[f64]| a.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
        assert_relative_eq!(dot(&v), x.powi(3), epsilon = 1e-14);
        assert_relative_eq!(dot(&d), 3.0 * x * x, epsilon = 1e-13);
        assert_relative_eq!(dot(&dd), 6.0 * x, epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_legendre_is_orthonormal() {
        let r = gauss(12);
        for i in 0..8 {
            for j in 0..8 {
                let v = r.integrate(|x| {
                    let l = orthonormal_legendre_all(8, x);
                    l[i] * l[j]
                });
                assert_relative_eq!(v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-13);
            }
        }
    }
}
