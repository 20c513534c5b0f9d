//! Closed-form algebra for symmetric and trace-free symmetric 2x2 tensors,
//! plus the isotropic elasticity and hardening tensors.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

/// Trace-free symmetric 2x2 tensor `[[a, b], [b, -a]]`.
///
/// The two-parameter storage keeps the trace exactly zero under any
/// arithmetic. Note that the Frobenius inner product carries a factor 2:
/// `p : q = 2 (p.a q.a + p.b q.b)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DevTensor2 {
    pub a: f64,
    pub b: f64,
}

/// Frobenius inner product and norm.
pub trait Frobenius {
    fn frob_inner(&self, other: &Self) -> f64;

    fn frob_norm(&self) -> f64 {
        self.frob_inner(self).sqrt()
    }
}

pub fn frob_inner<T: Frobenius>(s: &T, t: &T) -> f64 {
    s.frob_inner(t)
}

pub fn frob_norm<T: Frobenius>(t: &T) -> f64 {
    t.frob_norm()
}

impl SymTensor2 {
    pub const IDENTITY: SymTensor2 = SymTensor2 {
        xx: 1.0,
        yy: 1.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn dev(&self) -> DevTensor2 {
        dev(self)
    }

    /// Tensor applied to a vector.
    pub fn apply(&self, n: [f64; 2]) -> [f64; 2] {
        [
            self.xx * n[0] + self.xy * n[1],
            self.xy * n[0] + self.yy * n[1],
        ]
    }
}

impl Frobenius for SymTensor2 {
    fn frob_inner(&self, o: &Self) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }
}

impl DevTensor2 {
    pub const ZERO: DevTensor2 = DevTensor2 { a: 0.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// Embedding into the full symmetric tensors.
    pub fn to_sym(self) -> SymTensor2 {
        SymTensor2 {
            xx: self.a,
            yy: -self.a,
            xy: self.b,
        }
    }

    /// Coordinates in the Frobenius-orthonormal basis
    /// `[[1,0],[0,-1]]/sqrt(2)`, `[[0,1],[1,0]]/sqrt(2)`.
    pub fn to_orthonormal(self) -> [f64; 2] {
        [std::f64::consts::SQRT_2 * self.a, std::f64::consts::SQRT_2 * self.b]
    }

    pub fn from_orthonormal(c: [f64; 2]) -> Self {
        Self {
            a: c[0] / std::f64::consts::SQRT_2,
            b: c[1] / std::f64::consts::SQRT_2,
        }
    }
}

impl Frobenius for DevTensor2 {
    fn frob_inner(&self, o: &Self) -> f64 {
        2.0 * (self.a * o.a + self.b * o.b)
    }
}

/// Deviatoric part `t - tr(t)/2 I`.
pub fn dev(t: &SymTensor2) -> DevTensor2 {
    DevTensor2 {
        a: 0.5 * (t.xx - t.yy),
        b: t.xy,
    }
}

macro_rules! impl_linear_ops {
    ($t:ty, $($f:ident),+) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t { Self { $($f: self.$f + o.$f),+ } }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t { Self { $($f: self.$f - o.$f),+ } }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t { Self { $($f: -self.$f),+ } }
        }
        impl Mul<$t> for f64 {
            type Output = $t;
            fn mul(self, o: $t) -> $t { <$t>::from_scaled(o, self) }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t { <$t>::from_scaled(self, s) }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, o: $t) { $(self.$f += o.$f;)+ }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, o: $t) { $(self.$f -= o.$f;)+ }
        }
        impl $t {
            fn from_scaled(t: $t, s: f64) -> $t { Self { $($f: s * t.$f),+ } }
        }
    };
}

impl_linear_ops!(SymTensor2, xx, yy, xy);
impl_linear_ops!(DevTensor2, a, b);

/// Isotropic material: `C t = lambda tr(t) I + 2 mu t`, `H q = hardening q`,
/// constant yield stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lame_lambda: f64,
    pub lame_mu: f64,
    pub hardening: f64,
    pub sigma_y: f64,
}

impl Material {
    pub fn new(lame_lambda: f64, lame_mu: f64, hardening: f64, sigma_y: f64) -> Result<Self> {
        let m = Self {
            lame_lambda,
            lame_mu,
            hardening,
            sigma_y,
        };
        m.validate()?;
        Ok(m)
    }

    /// The benchmark material: lambda = mu = 1000, H = 500, sigma_y = 5.
    pub fn benchmark() -> Self {
        Self {
            lame_lambda: 1000.0,
            lame_mu: 1000.0,
            hardening: 500.0,
            sigma_y: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lame_mu > 0.0
            && self.hardening > 0.0
            && self.sigma_y > 0.0
            // C is elliptic on symmetric tensors iff mu > 0 and lambda + mu > 0 (d = 2).
            && self.lame_lambda + self.lame_mu > 0.0
            && [self.lame_lambda, self.lame_mu, self.hardening, self.sigma_y]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "material constants must satisfy mu > 0, lambda + mu > 0, hardening > 0, sigma_y > 0: {self:?}"
            )))
        }
    }

    pub fn apply_c(&self, t: &SymTensor2) -> SymTensor2 {
        let l = self.lame_lambda * t.trace();
        let m2 = 2.0 * self.lame_mu;
        SymTensor2 {
            xx: l + m2 * t.xx,
            yy: l + m2 * t.yy,
            xy: m2 * t.xy,
        }
    }

    pub fn apply_h(&self, q: &DevTensor2) -> DevTensor2 {
        self.hardening * *q
    }

    /// `2 mu + hardening`, the scalar by which `C + H` acts on trace-free tensors.
    pub fn two_mu_plus_h(&self) -> f64 {
        2.0 * self.lame_mu + self.hardening
    }
}

/// Free-function forms of the material operators.
pub fn apply_c(m: &Material, t: &SymTensor2) -> SymTensor2 {
    m.apply_c(t)
}

pub fn apply_h(m: &Material, q: &DevTensor2) -> DevTensor2 {
    m.apply_h(q)
}
