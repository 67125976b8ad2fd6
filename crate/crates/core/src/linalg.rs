//! Fixed 4×4 matrices over `f64` and `C64`.

use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::{One, Zero};

use crate::{Error, Result, C64};

pub trait Scalar: Copy + Zero + One + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + core::ops::Div<Output = Self> + core::ops::Neg<Output = Self> {
    fn modulus(self) -> f64;
    /// Division that stays finite when `rhs` is tiny but nonzero.
    fn quot(self, rhs: Self) -> Self;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        libm::fabs(self)
    }

    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Scalar for C64 {
    fn modulus(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    // Smith's algorithm; `Div` and `fdiv` both square the divisor.
    fn quot(self, rhs: Self) -> Self {
        let (a, b) = (self, rhs);
        if libm::fabs(b.re) >= libm::fabs(b.im) {
            let r = b.im / b.re;
            let d = b.re + b.im * r;
            C64::new((a.re + a.im * r) / d, (a.im - a.re * r) / d)
        } else {
            let r = b.re / b.im;
            let d = b.im + b.re * r;
            C64::new((a.re * r + a.im) / d, (a.im * r - a.re) / d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4<T>(pub [[T; 4]; 4]);

pub type RMat4 = Mat4<f64>;
pub type CMat4 = Mat4<C64>;

impl<T: Scalar> Mat4<T> {
    pub fn zero() -> Self {
        Mat4([[T::zero(); 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn scale(&self, k: T) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * k)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    // LU factorisation with partial pivoting, in place. Returns the sign of
    // the row permutation, or `None` for an exactly singular matrix.
    fn lu(&mut self, perm: &mut [usize; 4]) -> Option<T> {
        let a = &mut self.0;
        let mut sign = T::one();
        for k in 0..4 {
            let p = (k..4).max_by(|&x, &y| a[x][k].modulus().total_cmp(&a[y][k].modulus())).unwrap_or(k);
            if a[p][k].modulus() == 0.0 {
                return None;
            }
            if p != k {
                a.swap(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            for i in k + 1..4 {
                let f = a[i][k].quot(a[k][k]);
                a[i][k] = f;
                for j in k + 1..4 {
                    let t = a[k][j];
                    a[i][j] = a[i][j] - f * t;
                }
            }
        }
        Some(sign)
    }

    pub fn det(&self) -> T {
        let mut m = *self;
        let mut perm = [0, 1, 2, 3];
        match m.lu(&mut perm) {
            None => T::zero(),
            Some(sign) => (0..4).fold(sign, |acc, i| acc * m.0[i][i]),
        }
    }

    /// `det(self + n) - det(self)`, summed over the 15 nonempty sets of
    /// columns taken from `n`. Each term is of the order of `n` to the size
    /// of its set, so small increments are resolved without cancelling
    /// against `det(self)`.
    pub fn det_increment(&self, n: &Self) -> T {
        let mut total = T::zero();
        for mask in 1u32..16 {
            let m = Self::from_fn(|i, j| if mask & (1 << j) != 0 { n.0[i][j] } else { self.0[i][j] });
            total = total + m.det();
        }
        total
    }

    pub fn inverse(&self) -> Result<Self> {
        let mut m = *self;
        let mut perm = [0, 1, 2, 3];
        m.lu(&mut perm).ok_or(Error::Singular { op: "inverse" })?;
        // Reject numerically singular factors relative to the input scale.
        let pivot = (0..4).map(|i| m.0[i][i].modulus()).fold(f64::INFINITY, f64::min);
        if pivot <= 1e-14 * self.max_abs() {
            return Err(Error::Singular { op: "inverse" });
        }
        let mut inv = Self::zero();
        for col in 0..4 {
            let mut x = [T::zero(); 4];
            for i in 0..4 {
                let mut s = if perm[i] == col { T::one() } else { T::zero() };
                for j in 0..i {
                    s = s - m.0[i][j] * x[j];
                }
                x[i] = s;
            }
            for i in (0..4).rev() {
                let mut s = x[i];
                for j in i + 1..4 {
                    s = s - m.0[i][j] * x[j];
                }
                x[i] = s.quot(m.0[i][i]);
            }
            for i in 0..4 {
                inv.0[i][col] = x[i];
            }
        }
        Ok(inv)
    }

    pub fn mul_vec(&self, v: &[T; 4]) -> [T; 4] {
        let mut out = [T::zero(); 4];
        for i in 0..4 {
            out[i] = (0..4).fold(T::zero(), |acc, j| acc + self.0[i][j] * v[j]);
        }
        out
    }
}

impl RMat4 {
    pub fn complexify(&self) -> CMat4 {
        Mat4::from_fn(|i, j| C64::new(self.0[i][j], 0.0))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..i {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    /// Determinant of the 2×2 block at block row `bi`, block column `bj`.
    pub fn block_det(&self, bi: usize, bj: usize) -> f64 {
        let (r, c) = (2 * bi, 2 * bj);
        self.0[r][c] * self.0[r + 1][c + 1] - self.0[r][c + 1] * self.0[r + 1][c]
    }
}

impl<T: Scalar> Add for Mat4<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Mat4::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<T: Scalar> Sub for Mat4<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Mat4::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl<T: Scalar> Mul for Mat4<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Mat4::from_fn(|i, j| (0..4).fold(T::zero(), |acc, k| acc + self.0[i][k] * rhs.0[k][j]))
    }
}

impl<T> Index<(usize, usize)> for Mat4<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat4<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RMat4 {
        Mat4([[2.0, 1.0, 0.0, 3.0], [0.5, 0.0, 1.0, 1.0], [4.0, 1.0, 2.0, 0.0], [1.0, 2.0, 1.0, 1.0]])
    }

    // Cofactor expansion along the first row.
    fn det_cofactor(m: &RMat4) -> f64 {
        let minor3 = |rows: [usize; 3], cols: [usize; 3]| {
            let a = |i: usize, j: usize| m.0[rows[i]][cols[j]];
            a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
        };
        let mut det = 0.0;
        for c in 0..4 {
            let cols: [usize; 3] = {
                let mut v = [0; 3];
                let mut k = 0;
                for j in 0..4 {
                    if j != c {
                        v[k] = j;
                        k += 1;
                    }
                }
                v
            };
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * m.0[0][c] * minor3([1, 2, 3], cols);
        }
        det
    }

    #[test]
    fn determinant_matches_cofactors() {
        let m = sample();
        assert!((m.det() - det_cofactor(&m)).abs() < 1e-12);
        assert_eq!(RMat4::identity().det(), 1.0);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = sample();
        let p = m * m.inverse().unwrap();
        assert!((p - RMat4::identity()).max_abs() < 1e-13);
        let mut s = m;
        s.0[3] = s.0[0];
        assert!(s.inverse().is_err());
    }

    #[test]
    fn determinant_increment() {
        let m = sample();
        let n = Mat4::from_fn(|i, j| 1e-7 * ((i * 4 + j) as f64 - 7.5));
        let direct = (m + n).det() - m.det();
        assert!((m.det_increment(&n) - direct).abs() < 1e-12);
        // Cubic and quartic terms stay resolved at tiny increments.
        let tiny = RMat4::identity().scale(1e-9);
        let exact = 4.0 * 1e-9 + 6.0 * 1e-18 + 4.0 * 1e-27 + 1e-36;
        let inc = RMat4::identity().det_increment(&tiny);
        assert!((inc - exact).abs() <= 1e-15 * exact);
    }

    #[test]
    fn complex_determinant() {
        // det of diag(1+i, i, 2, -1) times a permutation
        let mut m = CMat4::zero();
        m.0[0][1] = C64::new(1.0, 1.0);
        m.0[1][0] = C64::new(0.0, 1.0);
        m.0[2][2] = C64::new(2.0, 0.0);
        m.0[3][3] = C64::new(-1.0, 0.0);
        let expected = -(C64::new(1.0, 1.0) * C64::new(0.0, 1.0) * 2.0 * -1.0);
        assert!((m.det() - expected).norm() < 1e-15);
    }

    #[test]
    fn complex_determinant_with_tiny_pivots() {
        // |d|² underflows and 1/|d|² overflows.
        let d = C64::new(1e-170, 3e-171);
        let one = C64::new(1.0, 0.0);
        let mut m = CMat4::identity();
        m.0[0][0] = d;
        m.0[1][0] = d;
        m.0[0][1] = one;
        m.0[1][1] = one + one;
        assert!(((m.det() - d).norm() / d.norm()) < 1e-14);
        let (a, b) = (C64::new(3.0, -2.0), C64::new(0.5, 1.5));
        assert!((a.quot(b) - a / b).norm() < 1e-15);
        assert!((a.quot(b.conj()) - a / b.conj()).norm() < 1e-15);
    }
}
