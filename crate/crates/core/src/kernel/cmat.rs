use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use super::KernelError;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Dense complex square matrix of dimension 2 or 4, stored row-major in a
/// fixed 16-slot buffer.
#[derive(Clone, Copy, PartialEq)]
pub struct CMat {
    dim: usize,
    data: [C64; 16],
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "CMat dimension must be 2 or 4, got {dim}");
        CMat { dim, data: [ZERO; 16] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self, KernelError> {
        let dim = rows.len();
        if !(dim == 2 || dim == 4) || rows.iter().any(|r| r.len() != dim) {
            return Err(KernelError::BadDimension(dim));
        }
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self, KernelError> {
        if !(dim == 2 || dim == 4) || entries.len() != dim * dim {
            return Err(KernelError::BadDimension(dim));
        }
        let mut m = Self::zeros(dim);
        for (k, &v) in entries.iter().enumerate() {
            m.data[k] = C64::new(v, 0.0);
        }
        Ok(m)
    }

    pub fn diag(values: &[C64]) -> Result<Self, KernelError> {
        let dim = values.len();
        if !(dim == 2 || dim == 4) {
            return Err(KernelError::BadDimension(dim));
        }
        let mut m = Self::zeros(dim);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        Ok(m)
    }

    /// Outer product |a⟩⟨b|.
    pub fn outer(a: &[C64], b: &[C64]) -> Result<Self, KernelError> {
        let dim = a.len();
        if !(dim == 2 || dim == 4) || b.len() != dim {
            return Err(KernelError::BadDimension(dim));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = a[i] * b[j].conj();
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major view of the live entries.
    pub fn entries(&self) -> &[C64] {
        &self.data[..self.dim * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &CMat) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        for z in m.data[..self.dim * self.dim].iter_mut() {
            *z *= s;
        }
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn column(&self, j: usize) -> [C64; 4] {
        let mut v = [ZERO; 4];
        for (i, slot) in v.iter_mut().enumerate().take(self.dim) {
            *slot = self[(i, j)];
        }
        v
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for (i, &x) in v.iter().enumerate().take(self.dim) {
            self[(i, j)] = x;
        }
    }

    /// Matrix-vector product on the first `dim` entries of `v`.
    pub fn apply(&self, v: &[C64]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (i, slot) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for (j, &x) in v.iter().enumerate().take(self.dim) {
                acc += self[(i, j)] * x;
            }
            *slot = acc;
        }
        out
    }

    /// Deviation from Hermiticity, ‖H − H†‖.
    pub fn hermiticity_error(&self) -> f64 {
        self.distance(&self.adjoint())
    }

    /// Deviation from unitarity, ‖U†U − 𝟙‖.
    pub fn unitarity_error(&self) -> f64 {
        (self.adjoint() * *self).distance(&CMat::identity(self.dim))
    }

    /// One Newton–Schulz step towards the nearest unitary, U(3 − U†U)/2.
    /// Squares the unitarity error of a nearly unitary matrix.
    pub fn reunitarize(&self) -> Self {
        let id = CMat::identity(self.dim);
        *self * (id.scale_re(3.0) - self.adjoint() * *self).scale_re(0.5)
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, n: u64) -> Self {
        let mut result = CMat::identity(self.dim);
        let mut base = *self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        result
    }

    /// U·M·U†
    pub fn conjugate_by(&self, u: &CMat) -> Self {
        *u * *self * u.adjoint()
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.dim && c < self.dim);
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.dim && c < self.dim);
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, rhs: CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for CMat {
    type Output = CMat;
    fn add(self, rhs: CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sum");
        let mut out = self;
        for k in 0..self.dim * self.dim {
            out.data[k] += rhs.data[k];
        }
        out
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(self, rhs: CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in difference");
        let mut out = self;
        for k in 0..self.dim * self.dim {
            out.data[k] -= rhs.data[k];
        }
        out
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_re(-1.0)
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Pauli matrices and the 2×2 identity.
pub mod pauli {
    use super::{CMat, C64, I, ONE};

    pub fn id() -> CMat {
        CMat::identity(2)
    }

    pub fn x() -> CMat {
        let mut m = CMat::zeros(2);
        m[(0, 1)] = ONE;
        m[(1, 0)] = ONE;
        m
    }

    pub fn y() -> CMat {
        let mut m = CMat::zeros(2);
        m[(0, 1)] = -I;
        m[(1, 0)] = I;
        m
    }

    pub fn z() -> CMat {
        let mut m = CMat::zeros(2);
        m[(0, 0)] = ONE;
        m[(1, 1)] = C64::new(-1.0, 0.0);
        m
    }

}
