//! Fixed-capacity vectors and matrices for d ≤ 3.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::scalar::Scalar;

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SVec<T> {
    len: usize,
    c: [T; MAX_DIM],
}

impl<T: Scalar> SVec<T> {
    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1 && d <= MAX_DIM, "dimension {d} outside 1..=3");
        Self { len: d, c: [T::zero(); MAX_DIM] }
    }

    pub fn from_slice(xs: &[T]) -> Self {
        let mut v = Self::zeros(xs.len());
        v.c[..xs.len()].copy_from_slice(xs);
        v
    }

    pub fn dim(&self) -> usize {
        self.len
    }

    pub fn as_slice(&self) -> &[T] {
        &self.c[..self.len]
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len, other.len);
        let mut s = T::zero();
        for k in 0..self.len {
            s = s + self.c[k] * other.c[k];
        }
        s
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, a: T) -> Self {
        let mut out = *self;
        for k in 0..self.len {
            out.c[k] = out.c[k] * a;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> SVec<U> {
        let mut out = SVec::<U>::zeros(self.len);
        for k in 0..self.len {
            out.c[k] = U::lit(self.c[k].to_f64_lossy());
        }
        out
    }
}

impl<T> Index<usize> for SVec<T> {
    type Output = T;
    fn index(&self, k: usize) -> &T {
        &self.c[k]
    }
}

impl<T> IndexMut<usize> for SVec<T> {
    fn index_mut(&mut self, k: usize) -> &mut T {
        &mut self.c[k]
    }
}

impl<T: Scalar> Add for SVec<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Scalar> AddAssign for SVec<T> {
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.len, rhs.len);
        for k in 0..self.len {
            self.c[k] = self.c[k] + rhs.c[k];
        }
    }
}

impl<T: Scalar> Sub for SVec<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Scalar> SubAssign for SVec<T> {
    fn sub_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.len, rhs.len);
        for k in 0..self.len {
            self.c[k] = self.c[k] - rhs.c[k];
        }
    }
}

impl<T: Scalar> Neg for SVec<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul<T> for SVec<T> {
    type Output = Self;
    fn mul(self, a: T) -> Self {
        self.scale(a)
    }
}

/// Dense square matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SMat<T> {
    n: usize,
    a: [[T; MAX_DIM]; MAX_DIM],
}

impl<T: Scalar> SMat<T> {
    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1 && d <= MAX_DIM, "dimension {d} outside 1..=3");
        Self { n: d, a: [[T::zero(); MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(d: usize) -> Self {
        Self::scaled_identity(d, T::one())
    }

    pub fn scaled_identity(d: usize, s: T) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i][i] = s;
        }
        m
    }

    pub fn outer(u: &SVec<T>, v: &SVec<T>) -> Self {
        let mut m = Self::zeros(u.dim());
        for i in 0..u.dim() {
            for j in 0..v.dim() {
                m.a[i][j] = u[i] * v[j];
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), rows.len());
            m.a[i][..r.len()].copy_from_slice(r);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: T) {
        self.a[i][j] = x;
    }

    pub fn mul_vec(&self, v: &SVec<T>) -> SVec<T> {
        let mut out = SVec::zeros(self.n);
        for i in 0..self.n {
            let mut s = T::zero();
            for j in 0..self.n {
                s = s + self.a[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut s = T::zero();
                for k in 0..self.n {
                    s = s + self.a[i][k] * other.a[k][j];
                }
                out.a[i][j] = s;
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.a[i][j] = out.a[i][j] * s;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.a[i][j] = self.a[j][i];
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        (0..self.n).fold(T::zero(), |s, i| s + self.a[i][i])
    }

    pub fn frobenius(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                s = s + self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    /// Frobenius inner product tr(AᵀB).
    pub fn contract(&self, other: &Self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                s = s + self.a[i][j] * other.a[i][j];
            }
        }
        s
    }

    /// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.a;
        for _ in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + a[i][j] * a[i][j];
                }
            }
            if off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q] == T::zero() {
                        continue;
                    }
                    let tau = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                    let t = tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.a[i][j].is_finite()))
    }
}

impl<T: Scalar> Add for SMat<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] = self.a[i][j] + rhs.a[i][j];
            }
        }
        self
    }
}

impl<T: Scalar> Sub for SMat<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..self.n {
            for j in 0..self.n {
                self.a[i][j] = self.a[i][j] - rhs.a[i][j];
            }
        }
        self
    }
}
