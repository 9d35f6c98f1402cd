//! Minimal complex linear algebra for the two-user channel vector.
//!
//! Everything the receiver manipulates lives in C^2: correlator outputs,
//! rotated channel pairs, information vectors, and 2x2 precision/rotation
//! matrices. All operations here have closed forms, so no general-purpose
//! matrix library is needed.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

pub type C64 = Complex64;

/// A pair of complex scalars: a correlator output `r_n`, a rotated channel
/// pair `h_n`, or an information vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex2(pub C64, pub C64);

impl Complex2 {
    pub const fn new(a: C64, b: C64) -> Self {
        Self(a, b)
    }

    pub fn zero() -> Self {
        Self(C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn from_re(a: f64, b: f64) -> Self {
        Self(C64::new(a, 0.0), C64::new(b, 0.0))
    }

    /// Conjugating inner product `self^* . other`.
    pub fn dot(&self, other: &Self) -> C64 {
        self.0.conj() * other.0 + self.1.conj() * other.1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_sqr() + self.1.norm_sqr()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0 * s, self.1 * s)
    }

    pub fn conj(&self) -> Self {
        Self(self.0.conj(), self.1.conj())
    }
}

impl Add for Complex2 {
    type Output = Complex2;
    fn add(self, rhs: Complex2) -> Complex2 {
        Complex2(self.0 + rhs.0, self.1 + rhs.1)
    }
}

impl Sub for Complex2 {
    type Output = Complex2;
    fn sub(self, rhs: Complex2) -> Complex2 {
        Complex2(self.0 - rhs.0, self.1 - rhs.1)
    }
}

impl Neg for Complex2 {
    type Output = Complex2;
    fn neg(self) -> Complex2 {
        Complex2(-self.0, -self.1)
    }
}

impl Mul<C64> for Complex2 {
    type Output = Complex2;
    fn mul(self, rhs: C64) -> Complex2 {
        Complex2(self.0 * rhs, self.1 * rhs)
    }
}

/// Row-major 2x2 complex matrix: observation maps `Z`, per-symbol rotations
/// `G`, precisions and covariances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CMatrix2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl CMatrix2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { a, b, c, d }
    }

    pub fn zero() -> Self {
        Self::from_re(0.0, 0.0, 0.0, 0.0)
    }

    pub fn identity() -> Self {
        Self::from_re(1.0, 0.0, 0.0, 1.0)
    }

    pub fn from_re(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            a: C64::new(a, 0.0),
            b: C64::new(b, 0.0),
            c: C64::new(c, 0.0),
            d: C64::new(d, 0.0),
        }
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Self {
            a,
            b: C64::new(0.0, 0.0),
            c: C64::new(0.0, 0.0),
            d,
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            a: self.a.conj(),
            b: self.c.conj(),
            c: self.b.conj(),
            d: self.d.conj(),
        }
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace_re(&self) -> f64 {
        self.a.re + self.d.re
    }

    pub fn mul_vec(&self, v: &Complex2) -> Complex2 {
        Complex2(self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn mul_mat(&self, m: &Self) -> Self {
        Self {
            a: self.a * m.a + self.b * m.c,
            b: self.a * m.b + self.b * m.d,
            c: self.c * m.a + self.d * m.c,
            d: self.c * m.b + self.d * m.d,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        }
    }

    /// `(M + M^*)/2`; applied after every precision update to stop round-off
    /// from drifting off the Hermitian manifold.
    pub fn hermitize(&self) -> Self {
        let adj = self.adjoint();
        Self {
            a: (self.a + adj.a) * 0.5,
            b: (self.b + adj.b) * 0.5,
            c: (self.c + adj.c) * 0.5,
            d: (self.d + adj.d) * 0.5,
        }
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Only valid after
    /// `hermitize`.
    pub fn eig_hermitian(&self) -> (f64, f64) {
        let mid = 0.5 * (self.a.re + self.d.re);
        let rad = (0.25 * (self.a.re - self.d.re).powi(2) + self.b.norm_sqr()).sqrt();
        (mid - rad, mid + rad)
    }

    /// Inverse, or `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm_sqr() == 0.0 {
            return None;
        }
        let inv_det = det.inv();
        Some(Self {
            a: self.d * inv_det,
            b: -self.b * inv_det,
            c: -self.c * inv_det,
            d: self.a * inv_det,
        })
    }

    /// True when the matrix is diagonal with unit-modulus entries, the only
    /// transform shape the signal model produces.
    pub fn is_unitary_diagonal(&self, tol: f64) -> bool {
        self.b.norm() <= tol
            && self.c.norm() <= tol
            && (self.a.norm() - 1.0).abs() <= tol
            && (self.d.norm() - 1.0).abs() <= tol
    }
}

impl Add for CMatrix2 {
    type Output = CMatrix2;
    fn add(self, rhs: CMatrix2) -> CMatrix2 {
        CMatrix2 {
            a: self.a + rhs.a,
            b: self.b + rhs.b,
            c: self.c + rhs.c,
            d: self.d + rhs.d,
        }
    }
}

impl Sub for CMatrix2 {
    type Output = CMatrix2;
    fn sub(self, rhs: CMatrix2) -> CMatrix2 {
        CMatrix2 {
            a: self.a - rhs.a,
            b: self.b - rhs.b,
            c: self.c - rhs.c,
            d: self.d - rhs.d,
        }
    }
}
