//! Prices on the probability simplex, liability/trade bundles, and small dense
//! symmetric matrices.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, pos, Scalar};

/// Default interior clamp for prices.
pub const DEFAULT_EPS: f64 = 1e-9;

/// A point in the relative interior of the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "Vec<T>", into = "Vec<T>")]
pub struct SimplexPrice<T> {
    p: Vec<T>,
}

impl<T: Scalar> SimplexPrice<T> {
    /// Validates that `p` lies in the relative interior and sums to one.
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidPrice(format!(
                "need at least two outcomes, got {}",
                p.len()
            )));
        }
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || v <= T::zero() || v >= T::one() {
                return Err(Error::BoundaryPrice {
                    index: i,
                    value: v.to_f64_lossy(),
                });
            }
        }
        let s: T = p.iter().copied().sum();
        let n = T::from_usize(p.len()).unwrap_or_else(T::one);
        if (s - T::one()).abs() > T::tol(1e-12) * n {
            return Err(Error::InvalidPrice(format!(
                "components sum to {}",
                s.to_f64_lossy()
            )));
        }
        Ok(Self { p })
    }

    /// Rescales a positive vector onto the simplex.
    pub fn normalized(v: Vec<T>) -> Result<Self> {
        let s: T = v.iter().copied().sum();
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidPrice("cannot normalize".into()));
        }
        Self::new(v.into_iter().map(|x| x / s).collect())
    }

    /// Two-outcome price `(p, 1 − p)`.
    pub fn binary(p: T) -> Result<Self> {
        Self::new(vec![p, T::one() - p])
    }

    pub fn uniform(n: usize) -> Self {
        let v = T::one() / T::from_usize(n).expect("n fits the scalar type");
        Self { p: vec![v; n] }
    }

    /// Clamps every component to at least `eps`, renormalizes, and reports
    /// whether any clamping took place.
    pub fn clamped(v: &[T], eps: T) -> (Self, bool) {
        let mut hit = false;
        let mut w: Vec<T> = v
            .iter()
            .map(|&x| {
                if !(x > eps) {
                    hit = true;
                    eps
                } else {
                    x
                }
            })
            .collect();
        let s: T = w.iter().copied().sum();
        for x in &mut w {
            *x = *x / s;
        }
        (Self { p: w }, hit)
    }

    /// Errors with `BoundaryPrice` when a component is within `eps` of 0 or 1.
    pub fn check_interior(&self, eps: T) -> Result<()> {
        for (i, &v) in self.p.iter().enumerate() {
            if v < eps || v > T::one() - eps {
                return Err(Error::BoundaryPrice {
                    index: i,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.p.clone()
    }

    /// Price of the first security; the natural coordinate for two outcomes.
    pub fn first(&self) -> T {
        self.p[0]
    }

    pub fn dot(&self, v: &LiabilityVector<T>) -> T {
        self.p.iter().zip(v.as_slice()).map(|(&a, &b)| a * b).sum()
    }

    /// Largest componentwise distance to another price.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for SimplexPrice<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T> From<SimplexPrice<T>> for Vec<T> {
    fn from(p: SimplexPrice<T>) -> Self {
        p.p
    }
}

impl<T> Index<usize> for SimplexPrice<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.p[i]
    }
}

/// Securities sold by the market (`q`), reserves (`x = −q`) or trades (`r`,
/// oriented toward the trader).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", transparent)]
pub struct LiabilityVector<T> {
    v: Vec<T>,
}

/// A trade has the same shape as a liability vector.
pub type TradeBundle<T> = LiabilityVector<T>;

impl<T: Scalar> LiabilityVector<T> {
    pub fn new(v: Vec<T>) -> Self {
        Self { v }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![T::zero(); n],
        }
    }

    /// The grand bundle `α·1`.
    pub fn constant(n: usize, a: T) -> Self {
        Self { v: vec![a; n] }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.v
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.v.clone()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.v.iter().zip(&other.v).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm_l1(&self) -> T {
        self.v.iter().map(|x| x.abs()).sum()
    }

    pub fn norm_l2(&self) -> T {
        self.v.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.v.iter().map(|x| x.abs()).fold(T::zero(), T::max)
    }

    /// Componentwise positive part.
    pub fn positive_part(&self) -> Self {
        Self {
            v: self.v.iter().map(|&x| pos(x)).collect(),
        }
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            v: self.v.iter().map(|&x| x * a).collect(),
        }
    }

    /// Adds `a` to every component (adds `a` grand bundles).
    pub fn shift(&self, a: T) -> Self {
        Self {
            v: self.v.iter().map(|&x| x + a).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self - other).max_abs()
    }

    /// Sum of a list of bundles of length `n`.
    pub fn sum_of<'a, I>(n: usize, items: I) -> Self
    where
        I: IntoIterator<Item = &'a Self>,
    {
        let mut acc = Self::zeros(n);
        for it in items {
            acc += it;
        }
        acc
    }
}

impl<T> Index<usize> for LiabilityVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.v[i]
    }
}

impl<T: Scalar> From<Vec<T>> for LiabilityVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self { v }
    }
}

impl<T: Scalar> Add for &LiabilityVector<T> {
    type Output = LiabilityVector<T>;
    fn add(self, o: Self) -> LiabilityVector<T> {
        LiabilityVector {
            v: self.v.iter().zip(&o.v).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &LiabilityVector<T> {
    type Output = LiabilityVector<T>;
    fn sub(self, o: Self) -> LiabilityVector<T> {
        LiabilityVector {
            v: self.v.iter().zip(&o.v).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Add for LiabilityVector<T> {
    type Output = LiabilityVector<T>;
    fn add(self, o: Self) -> LiabilityVector<T> {
        &self + &o
    }
}

impl<T: Scalar> Sub for LiabilityVector<T> {
    type Output = LiabilityVector<T>;
    fn sub(self, o: Self) -> LiabilityVector<T> {
        &self - &o
    }
}

impl<T: Scalar> Neg for &LiabilityVector<T> {
    type Output = LiabilityVector<T>;
    fn neg(self) -> LiabilityVector<T> {
        LiabilityVector {
            v: self.v.iter().map(|&a| -a).collect(),
        }
    }
}

impl<T: Scalar> Neg for LiabilityVector<T> {
    type Output = LiabilityVector<T>;
    fn neg(self) -> LiabilityVector<T> {
        -&self
    }
}

impl<T: Scalar> Mul<T> for &LiabilityVector<T> {
    type Output = LiabilityVector<T>;
    fn mul(self, a: T) -> LiabilityVector<T> {
        self.scale(a)
    }
}

impl<T: Scalar> AddAssign<&LiabilityVector<T>> for LiabilityVector<T> {
    fn add_assign(&mut self, o: &LiabilityVector<T>) {
        for (a, &b) in self.v.iter_mut().zip(&o.v) {
            *a = *a + b;
        }
    }
}

impl<T: Scalar> SubAssign<&LiabilityVector<T>> for LiabilityVector<T> {
    fn sub_assign(&mut self, o: &LiabilityVector<T>) {
        for (a, &b) in self.v.iter_mut().zip(&o.v) {
            *a = *a - b;
        }
    }
}

/// Dense `n×n` matrix, row-major. Used for liquidity matrices `∇²Ḡ(p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LiquidityMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> LiquidityMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Rank-one matrix `s·v vᵀ`.
    pub fn outer(v: &[T], s: T) -> Self {
        Self::from_fn(v.len(), |i, j| s * v[i] * v[j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[T]) -> T {
        self.mul_vec(v).iter().zip(v).map(|(&a, &b)| a * b).sum()
    }

    /// Replaces the matrix by `(M + Mᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let half = lit::<T>(0.5);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let m = (self.get(i, j) + self.get(j, i)) * half;
                self.set(i, j, m);
                self.set(j, i, m);
            }
        }
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|x| x.abs()).fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Eigenvalues of the symmetric part, ascending, by cyclic Jacobi rotations.
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.clone();
        a.symmetrize();
        let two = lit::<T>(2.0);
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off = off + a.get(i, j) * a.get(i, j);
                    }
                }
            }
            let scale = a.max_abs().max(T::min_positive_value());
            if off.sqrt() <= T::epsilon() * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }
}

/// Solves `A x = b` for a dense row-major `A` by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below `tiny`.
pub fn solve_dense<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, tiny: T) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() <= tiny {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = a[r * n + col] / a[col * n + col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                a[r * n + k] = a[r * n + k] - f * a[col * n + k];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - a[i * n + k] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_boundary_and_bad_sum() {
        assert!(SimplexPrice::<f64>::new(vec![0.0, 1.0]).is_err());
        assert!(SimplexPrice::<f64>::new(vec![0.3, 0.3]).is_err());
        assert!(SimplexPrice::<f64>::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn clamp_reports_hits() {
        let (p, hit) = SimplexPrice::<f64>::clamped(&[0.0, 1.0], 1e-9);
        assert!(hit);
        assert!(p.first() > 0.0);
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // [[2,-1,-1],[-1,2,-1],[-1,-1,2]] has spectrum {0, 3, 3}.
        let m = LiquidityMatrix::from_fn(3, |i, j| if i == j { 2.0_f64 } else { -1.0 });
        let ev = m.eigenvalues();
        assert!(ev[0].abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12 && (ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dense_solve() {
        let a: Vec<f64> = vec![2.0, 1.0, 1.0, 3.0];
        let x = solve_dense(a, vec![3.0, 5.0], 1e-300).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn price_serde_validates() {
        let ok: SimplexPrice<f64> = serde_json::from_str("[0.2, 0.8]").unwrap();
        assert_eq!(ok.first(), 0.2);
        assert!(serde_json::from_str::<SimplexPrice<f64>>("[0.2, 0.9]").is_err());
    }
}
