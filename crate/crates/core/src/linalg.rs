//! Small dense matrices with compile-time dimensions.
//!
//! Everything here operates on stack arrays; the largest matrix in the crate is 8×8
//! (the augmented generator used for time-integrated propagators).

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{OdmrError, Result};
use crate::scalar::Real;

/// Square `N`×`N` matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix<T, const N: usize>(pub [[T; N]; N]);

pub type Matrix4<T> = Matrix<T, 4>;

impl<T: Real, const N: usize> Matrix<T, N> {
    pub fn zeros() -> Self {
        Matrix([[T::zero(); N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: [[T; N]; N]) -> Self {
        Matrix(rows)
    }

    pub fn rows(&self) -> &[[T; N]; N] {
        &self.0
    }

    pub fn scale(&self, k: T) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|x| *x = *x * k);
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.0[j][i] = self.0[i][j];
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T; N]) -> [T; N] {
        let mut out = [T::zero(); N];
        for (o, row) in out.iter_mut().zip(self.0.iter()) {
            *o = row.iter().zip(v.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
        out
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> T {
        (0..N)
            .map(|j| (0..N).fold(T::zero(), |acc, i| acc + self.0[i][j].abs()))
            .fold(T::zero(), T::max)
    }

    pub fn column_sums(&self) -> [T; N] {
        let mut sums = [T::zero(); N];
        for row in &self.0 {
            for (s, &x) in sums.iter_mut().zip(row.iter()) {
                *s = *s + x;
            }
        }
        sums
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// Matrix exponential by scaling and squaring of a Taylor expansion.
    ///
    /// The scaled matrix has 1-norm at most 1/2, so the series converges to
    /// machine precision within a couple dozen terms.
    pub fn expm(&self) -> Result<Self> {
        const MAX_TERMS: usize = 60;
        if !self.is_finite() {
            return Err(OdmrError::ExpmNonConvergence);
        }
        let norm = self.norm_one();
        let half = T::lit(0.5);
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm > half {
            scaled_norm = scaled_norm * half;
            squarings += 1;
            if squarings > 1100 {
                return Err(OdmrError::ExpmNonConvergence);
            }
        }
        let scaled = self.scale(T::lit(0.5).powi(squarings as i32));

        let mut sum = Self::identity();
        let mut term = Self::identity();
        let mut converged = false;
        for k in 1..=MAX_TERMS {
            term = (term * scaled).scale(T::one() / T::lit(k as f64));
            sum = sum + term;
            if term.norm_one() <= T::epsilon() * sum.norm_one() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(OdmrError::ExpmNonConvergence);
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        if sum.is_finite() {
            Ok(sum)
        } else {
            Err(OdmrError::ExpmNonConvergence)
        }
    }

    /// Solves `self · x = b` by Gaussian elimination with partial pivoting.
    ///
    /// A pivot smaller than `N·ε·‖A‖₁` is reported as a singular system.
    pub fn solve(&self, b: &[T; N]) -> Result<[T; N]> {
        let mut a = self.0;
        let mut x = *b;
        let threshold = T::lit(N as f64) * T::epsilon() * self.norm_one();
        for col in 0..N {
            let pivot_row = (col..N)
                .max_by(|&i, &j| {
                    a[i][col]
                        .abs()
                        .partial_cmp(&a[j][col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(col);
            if !(a[pivot_row][col].abs() > threshold) {
                return Err(OdmrError::SingularSystem);
            }
            a.swap(col, pivot_row);
            x.swap(col, pivot_row);
            let pivot = a[col][col];
            for row in col + 1..N {
                let factor = a[row][col] / pivot;
                if factor == T::zero() {
                    continue;
                }
                for k in col..N {
                    a[row][k] = a[row][k] - factor * a[col][k];
                }
                x[row] = x[row] - factor * x[col];
            }
        }
        for row in (0..N).rev() {
            let tail = (row + 1..N).fold(T::zero(), |acc, k| acc + a[row][k] * x[k]);
            x[row] = (x[row] - tail) / a[row][row];
        }
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(OdmrError::SingularSystem)
        }
    }
}

impl<T: Real, const N: usize> Mul for Matrix<T, N> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..N {
                    out.0[i][j] = out.0[i][j] + a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl<T: Real, const N: usize> Add for Matrix<T, N> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for (o, r) in out.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *o = *o + *r;
        }
        out
    }
}

impl<T: Real, const N: usize> Sub for Matrix<T, N> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for (o, r) in out.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *o = *o - *r;
        }
        out
    }
}

impl<T, const N: usize> Index<(usize, usize)> for Matrix<T, N> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T, const N: usize> IndexMut<(usize, usize)> for Matrix<T, N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

/// Returns `(e^{A t}, ∫₀ᵗ e^{A u} du)` from a single exponential of the augmented
/// block matrix `[[A, I], [0, 0]]·t`.
pub fn expm_with_integral<T: Real>(a: &Matrix4<T>, t: T) -> Result<(Matrix4<T>, Matrix4<T>)> {
    let mut aug = Matrix::<T, 8>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            aug.0[i][j] = a.0[i][j] * t;
        }
        aug.0[i][i + 4] = t;
    }
    let e = aug.expm()?;
    let mut prop = Matrix4::zeros();
    let mut integral = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            prop.0[i][j] = e.0[i][j];
            integral.0[i][j] = e.0[i][j + 4];
        }
    }
    Ok((prop, integral))
}
