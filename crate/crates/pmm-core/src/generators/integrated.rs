//! Curves defined by a liquidity density `ℓ = f · base`, with `f` piecewise
//! linear on a grid, integrated numerically.
//!
//! The normalized generator is evaluated through
//! `g(p) = −[(1−p)A(p) + pB(p)]`, `g′(p) = A(p) − B(p)` with
//! `A(p) = ∫₀ᵖ sℓ(s)ds` and `B(p) = ∫ₚ¹ (1−s)ℓ(s)ds`. For the
//! constant-product base `2(s(1−s))^{-3/2}` the substitution `s = sin²θ` turns
//! both integrands into bounded functions near the endpoint they start from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::scalar::{lit, Scalar};

/// Shape multiplying the tabulated weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiquidityBase {
    /// `ℓ(p) = f(p)`.
    #[default]
    Flat,
    /// `ℓ(p) = f(p) · 2(p(1−p))^{-3/2}`, the constant-product shape.
    ConstantProduct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedCurve<T> {
    grid: Vec<T>,
    weights: Vec<T>,
    base: LiquidityBase,
    /// `a_cum[i] = A(grid[i])` for `i < m`.
    a_cum: Vec<T>,
    /// `b_cum[i] = B(grid[i])` for `i ≥ 1`.
    b_cum: Vec<T>,
}

fn tols<T: Scalar>() -> (T, T) {
    (T::tol(1e-15), T::tol(1e-14))
}

impl<T: Scalar> IntegratedCurve<T> {
    /// `grid` must run from 0 to 1; `weights[i]` is `f(grid[i])`.
    pub fn new(grid: Vec<T>, weights: Vec<T>, base: LiquidityBase) -> Result<Self> {
        if grid.len() < 2 || grid.len() != weights.len() {
            return Err(Error::InvalidFamily(
                "tabulated liquidity: grid and weights must have equal length ≥ 2".into(),
            ));
        }
        if grid[0] != T::zero() || grid[grid.len() - 1] != T::one() {
            return Err(Error::InvalidFamily(
                "tabulated liquidity: grid must run from 0 to 1".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidFamily(
                "tabulated liquidity: grid must increase".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidFamily(
                "tabulated liquidity: weights must be ≥ 0".into(),
            ));
        }
        let mut c = Self {
            grid,
            weights,
            base,
            a_cum: Vec::new(),
            b_cum: Vec::new(),
        };
        let m = c.grid.len() - 1;
        let mut a_cum = vec![T::zero(); m + 1];
        for i in 1..m {
            a_cum[i] = a_cum[i - 1] + c.a_part(c.grid[i - 1], c.grid[i])?;
        }
        let mut b_cum = vec![T::zero(); m + 1];
        for i in (1..m).rev() {
            b_cum[i] = b_cum[i + 1] + c.b_part(c.grid[i], c.grid[i + 1])?;
        }
        c.a_cum = a_cum;
        c.b_cum = b_cum;
        Ok(c)
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn base(&self) -> LiquidityBase {
        self.base
    }

    fn cell(&self, p: T) -> usize {
        let m = self.grid.len() - 1;
        self.grid
            .partition_point(|&k| k <= p)
            .saturating_sub(1)
            .min(m - 1)
    }

    /// Piecewise-linear weight `f(p)`.
    pub fn weight_at(&self, p: T) -> T {
        let i = self.cell(p);
        let (u, v) = (self.grid[i], self.grid[i + 1]);
        let t = (p - u) / (v - u);
        self.weights[i] + t * (self.weights[i + 1] - self.weights[i])
    }

    /// `ℓ(p)` for `p ∈ (0, 1)`.
    pub fn liquidity(&self, p: T) -> T {
        let f = self.weight_at(p);
        match self.base {
            LiquidityBase::Flat => f,
            LiquidityBase::ConstantProduct => {
                lit::<T>(2.0) * f / (p * (T::one() - p)).powf(lit(1.5))
            }
        }
    }

    fn theta(s: T) -> T {
        s.sqrt().asin()
    }

    /// `∫ᵤᵛ sℓ(s)ds` with `u, v` in one grid cell (or spanning it exactly).
    fn a_part(&self, u: T, v: T) -> Result<T> {
        let (at, rt) = tols::<T>();
        match self.base {
            LiquidityBase::Flat => integrate(|s| s * self.weight_at(s), u, v, at, rt),
            LiquidityBase::ConstantProduct => {
                let four = lit::<T>(4.0);
                integrate(
                    |th: T| {
                        let c = th.cos();
                        four * self.weight_at(th.sin().powi(2)) / (c * c)
                    },
                    Self::theta(u),
                    Self::theta(v),
                    at,
                    rt,
                )
            }
        }
    }

    /// `∫ᵤᵛ (1−s)ℓ(s)ds`.
    fn b_part(&self, u: T, v: T) -> Result<T> {
        let (at, rt) = tols::<T>();
        match self.base {
            LiquidityBase::Flat => integrate(|s| (T::one() - s) * self.weight_at(s), u, v, at, rt),
            LiquidityBase::ConstantProduct => {
                let four = lit::<T>(4.0);
                integrate(
                    |th: T| {
                        let s = th.sin();
                        four * self.weight_at(s * s) / (s * s)
                    },
                    Self::theta(u),
                    Self::theta(v),
                    at,
                    rt,
                )
            }
        }
    }

    fn a_at(&self, p: T) -> T {
        let i = self.cell(p);
        let part = self.a_part(self.grid[i], p).unwrap_or_else(|_| T::nan());
        self.a_cum[i] + part
    }

    fn b_at(&self, p: T) -> T {
        let i = self.cell(p);
        let part = self
            .b_part(p, self.grid[i + 1])
            .unwrap_or_else(|_| T::nan());
        self.b_cum[i + 1] + part
    }

    pub fn g(&self, p: T) -> T {
        if p <= T::zero() || p >= T::one() {
            return T::zero();
        }
        -((T::one() - p) * self.a_at(p) + p * self.b_at(p))
    }

    pub fn slope(&self, p: T) -> T {
        self.a_at(p) - self.b_at(p)
    }

    /// Whether liquidity diverges at the left and right endpoints.
    pub fn infinite_endpoints(&self) -> (bool, bool) {
        let cp = self.base == LiquidityBase::ConstantProduct;
        (
            cp && self.weights[0] > T::zero(),
            cp && self.weights[self.weights.len() - 1] > T::zero(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| *w == T::zero())
    }
}
