//! Uniswap V2 in normalized prices: reserves `x` with `x₁x₂ = α²`,
//! `α = Σαⁱ`, price `x₂/(x₁+x₂)`, fees `β(αⁱ/α)(−r)₊`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::FamilyDescriptor;
use crate::scalar::Scalar;

/// Pool state. Reserves are the negated aggregate liability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UniswapV2Market<T> {
    pub x: [T; 2],
    /// `αⁱ` per LP; index 0 is the creator.
    pub alphas: Vec<T>,
    pub beta: T,
    /// Fee bundles accumulated per LP.
    pub fees: Vec<[T; 2]>,
    /// Relative tolerance of the product check.
    pub tol: T,
}

/// Outcome of a V2 trade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct V2Receipt<T> {
    pub r: [T; 2],
    /// `rⁱ = (αⁱ/α) r`.
    pub parts: Vec<[T; 2]>,
    pub trader_fee: [T; 2],
    pub lp_fees: Vec<[T; 2]>,
    pub price_before: T,
    pub price_after: T,
}

fn neg_pos<T: Scalar>(r: [T; 2]) -> [T; 2] {
    [(-r[0]).max(T::zero()), (-r[1]).max(T::zero())]
}

impl<T: Scalar> UniswapV2Market<T> {
    /// Opens a pool holding `x0 ≻ 0`; the creator's `α⁰ = √(x₁x₂)`.
    pub fn initialize(x0: [T; 2], beta: T) -> Result<Self> {
        if !(x0[0] > T::zero() && x0[1] > T::zero()) || !x0[0].is_finite() || !x0[1].is_finite() {
            return Err(Error::InsufficientReserves);
        }
        if !(beta >= T::zero()) {
            return Err(Error::OutOfRange("fee rate must be ≥ 0".into()));
        }
        Ok(Self {
            x: x0,
            alphas: vec![(x0[0] * x0[1]).sqrt()],
            beta,
            fees: vec![[T::zero(); 2]],
            tol: T::tol(1e-9),
        })
    }

    pub fn alpha(&self) -> T {
        self.alphas.iter().copied().sum()
    }

    pub fn price(&self) -> T {
        self.x[1] / (self.x[0] + self.x[1])
    }

    pub fn register_lp(&mut self) -> usize {
        self.alphas.push(T::zero());
        self.fees.push([T::zero(); 2]);
        self.alphas.len() - 1
    }

    /// Moves LP `i` to liquidity `α′` at the current price and returns the
    /// requested bundle `(α′−αⁱ)(√((1−p)/p), √(p/(1−p)))`.
    pub fn modify_liquidity(&mut self, i: usize, alpha_new: T) -> Result<[T; 2]> {
        if i >= self.alphas.len() {
            return Err(Error::UnknownLp(i));
        }
        if !(alpha_new >= T::zero()) || !alpha_new.is_finite() {
            return Err(Error::OutOfRange("liquidity α must be ≥ 0".into()));
        }
        let p = self.price();
        let d = alpha_new - self.alphas[i];
        let unit = [((T::one() - p) / p).sqrt(), (p / (T::one() - p)).sqrt()];
        let req = [d * unit[0], d * unit[1]];
        let total = self.alpha() - self.alphas[i] + alpha_new;
        // Rebuilt from the new α rather than x + req: after a large
        // withdrawal the sum cancels and the product drifts off α².
        let x = [total * unit[0], total * unit[1]];
        if total <= T::zero() || !(x[0] > T::zero() && x[1] > T::zero()) {
            return Err(Error::InsufficientReserves);
        }
        self.x = x;
        self.alphas[i] = alpha_new;
        Ok(req)
    }

    /// `x₁x₂ / α² − 1`.
    pub fn invariant_deviation(&self) -> T {
        let a = self.alpha();
        self.x[0] * self.x[1] / (a * a) - T::one()
    }

    /// The second leg that keeps `x₁x₂` fixed when the trader takes `r₁`.
    pub fn complete(&self, r1: T) -> Result<[T; 2]> {
        let x1 = self.x[0] - r1;
        if !(x1 > T::zero()) {
            return Err(Error::InsufficientReserves);
        }
        Ok([r1, self.x[1] - self.x[0] * self.x[1] / x1])
    }

    /// Hands `r` to the trader if `x₁x₂` is unchanged.
    pub fn execute_trade(&mut self, r: [T; 2]) -> Result<V2Receipt<T>> {
        let x = [self.x[0] - r[0], self.x[1] - r[1]];
        if !(x[0] > T::zero() && x[1] > T::zero()) {
            return Err(Error::InsufficientReserves);
        }
        let before = self.x[0] * self.x[1];
        let after = x[0] * x[1];
        let dev = (after - before).abs() / before;
        if !(dev <= self.tol) {
            return Err(Error::InvariantViolated {
                deviation: dev.to_f64_lossy(),
            });
        }
        let alpha = self.alpha();
        let np = neg_pos(r);
        let trader_fee = [self.beta * np[0], self.beta * np[1]];
        let mut lp_fees = Vec::with_capacity(self.alphas.len());
        let mut parts = Vec::with_capacity(self.alphas.len());
        for (i, &ai) in self.alphas.iter().enumerate() {
            let w = ai / alpha;
            let f = [trader_fee[0] * w, trader_fee[1] * w];
            self.fees[i] = [self.fees[i][0] + f[0], self.fees[i][1] + f[1]];
            lp_fees.push(f);
            parts.push([r[0] * w, r[1] * w]);
        }
        let price_before = self.price();
        self.x = x;
        Ok(V2Receipt {
            r,
            parts,
            trader_fee,
            lp_fees,
            price_before,
            price_after: self.price(),
        })
    }

    /// LP `i`'s liability `−(αⁱ/α) x`.
    pub fn liability(&self, i: usize) -> Result<[T; 2]> {
        let a = *self.alphas.get(i).ok_or(Error::UnknownLp(i))?;
        let w = a / self.alpha();
        Ok([-w * self.x[0], -w * self.x[1]])
    }

    /// The generator family equivalent to LP `i`'s position.
    pub fn family(&self, i: usize) -> Result<FamilyDescriptor<T>> {
        let a = *self.alphas.get(i).ok_or(Error::UnknownLp(i))?;
        Ok(if a > T::zero() {
            FamilyDescriptor::UniswapV2 { alpha: a }
        } else {
            FamilyDescriptor::Trivial
        })
    }
}
