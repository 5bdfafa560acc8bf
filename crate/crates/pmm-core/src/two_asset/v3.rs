//! Uniswap V3 in normalized prices. The bucket grid is fixed at creation and
//! contiguous: bucket `j` is `[knots[j], knots[j+1]]`. The price is a state
//! variable; a trade walks the buckets it crosses and lands by inverting the
//! in-bucket reserve curve in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::FamilyDescriptor;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UniswapV3Market<T> {
    knots: Vec<T>,
    /// `alphas[i][j]`: LP `i`'s liquidity in bucket `j`.
    alphas: Vec<Vec<T>>,
    price: T,
    pub beta: T,
    /// Fee bundles accumulated per LP.
    pub fees: Vec<[T; 2]>,
    pub tol: T,
}

/// Outcome of a V3 trade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct V3Receipt<T> {
    pub r: [T; 2],
    pub price_before: T,
    pub price_after: T,
    /// Buckets from the starting one to the landing one, inclusive.
    pub crossed: Vec<usize>,
    pub trader_fee: [T; 2],
    pub lp_fees: Vec<[T; 2]>,
    /// Shifted-product deviation in the landing bucket, relative to `α²`.
    pub invariant_deviation: T,
}

fn rt<T: Scalar>(x: T) -> T {
    ((T::one() - x) / x).sqrt()
}

fn st<T: Scalar>(x: T) -> T {
    (x / (T::one() - x)).sqrt()
}

/// Reserves held per unit of liquidity in `[a, b]` at price `p`.
pub fn unit_reserves<T: Scalar>(a: T, b: T, p: T) -> [T; 2] {
    if p < a {
        [rt(a) - rt(b), T::zero()]
    } else if p > b {
        [T::zero(), st(b) - st(a)]
    } else {
        [rt(p) - rt(b), st(p) - st(a)]
    }
}

/// `(x₁ + α√((1−b)/b))(x₂ + α√(a/(1−a))) / α² − 1` for one bucket's reserves.
pub fn shifted_invariant<T: Scalar>(alpha: T, a: T, b: T, x: [T; 2]) -> T {
    (x[0] + alpha * rt(b)) * (x[1] + alpha * st(a)) / (alpha * alpha) - T::one()
}

impl<T: Scalar> UniswapV3Market<T> {
    /// Creates the grid and installs the creator's per-bucket liquidity at
    /// `price`. Returns the market and the creator's deposit.
    pub fn initialize(knots: Vec<T>, price: T, creator: Vec<T>, beta: T) -> Result<(Self, [T; 2])> {
        if knots.len() < 2
            || knots.windows(2).any(|w| !(w[0] < w[1]))
            || !(knots[0] > T::zero() && knots[knots.len() - 1] < T::one())
        {
            return Err(Error::InvalidFamily(
                "V3 grid must increase strictly inside (0, 1)".into(),
            ));
        }
        if creator.len() != knots.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: knots.len() - 1,
                found: creator.len(),
            });
        }
        if !(price >= knots[0] && price <= knots[knots.len() - 1]) {
            return Err(Error::OutOfRange(
                "initial price lies outside the bucket grid".into(),
            ));
        }
        let m = knots.len() - 1;
        let mut s = Self {
            knots,
            alphas: vec![vec![T::zero(); m]],
            price,
            beta,
            fees: vec![[T::zero(); 2]],
            tol: T::tol(1e-9),
        };
        let mut dep = [T::zero(); 2];
        for (j, &a) in creator.iter().enumerate() {
            let d = s.modify_liquidity(0, j, a)?;
            dep = [dep[0] + d[0], dep[1] + d[1]];
        }
        Ok((s, dep))
    }

    pub fn price(&self) -> T {
        self.price
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn buckets(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn alphas(&self) -> &[Vec<T>] {
        &self.alphas
    }

    /// `Σᵢ αⁱʲ` per bucket.
    pub fn bucket_totals(&self) -> Vec<T> {
        (0..self.buckets())
            .map(|j| self.alphas.iter().map(|a| a[j]).sum())
            .collect()
    }

    fn unit(&self, j: usize, p: T) -> [T; 2] {
        unit_reserves(self.knots[j], self.knots[j + 1], p)
    }

    fn reserves_at(&self, totals: &[T], p: T) -> [T; 2] {
        totals
            .iter()
            .enumerate()
            .fold([T::zero(); 2], |acc, (j, &a)| {
                let u = self.unit(j, p);
                [acc[0] + a * u[0], acc[1] + a * u[1]]
            })
    }

    /// Pool reserves `x`.
    pub fn reserves(&self) -> [T; 2] {
        self.reserves_at(&self.bucket_totals(), self.price)
    }

    /// LP `i`'s liability `−Σⱼ αⁱʲ · unit reserves`.
    pub fn liability(&self, i: usize) -> Result<[T; 2]> {
        let a = self.alphas.get(i).ok_or(Error::UnknownLp(i))?;
        let x = self.reserves_at(a, self.price);
        Ok([-x[0], -x[1]])
    }

    pub fn register_lp(&mut self) -> usize {
        self.alphas.push(vec![T::zero(); self.buckets()]);
        self.fees.push([T::zero(); 2]);
        self.alphas.len() - 1
    }

    /// Sets LP `i`'s liquidity in bucket `j` to `α′`, returning the requested
    /// bundle `(α′ − αⁱʲ) · unit reserves of bucket j at the current price`.
    pub fn modify_liquidity(&mut self, i: usize, j: usize, alpha_new: T) -> Result<[T; 2]> {
        if i >= self.alphas.len() {
            return Err(Error::UnknownLp(i));
        }
        if j >= self.buckets() {
            return Err(Error::OutOfRange(format!("bucket {j} does not exist")));
        }
        if !(alpha_new >= T::zero()) || !alpha_new.is_finite() {
            return Err(Error::OutOfRange("liquidity α must be ≥ 0".into()));
        }
        let d = alpha_new - self.alphas[i][j];
        let u = self.unit(j, self.price);
        self.alphas[i][j] = alpha_new;
        Ok([d * u[0], d * u[1]])
    }

    /// Price in bucket `j` at which coordinate `c` of that bucket's reserves
    /// equals `v` (per unit of liquidity).
    fn invert(&self, j: usize, c: usize, v: T) -> T {
        let (a, b) = (self.knots[j], self.knots[j + 1]);
        let p = if c == 0 {
            let t = v + rt(b);
            T::one() / (T::one() + t * t)
        } else {
            let s = v + st(a);
            s * s / (T::one() + s * s)
        };
        p.max(a).min(b)
    }

    /// Hands `r` to the trader, moving the price along the reserve curve.
    pub fn execute_trade(&mut self, r: [T; 2]) -> Result<V3Receipt<T>> {
        let totals = self.bucket_totals();
        let x = self.reserves_at(&totals, self.price);
        let target = [x[0] - r[0], x[1] - r[1]];
        let m = self.buckets();
        let p0 = self.price;
        if r[0] == T::zero() && r[1] == T::zero() {
            return Ok(V3Receipt {
                r,
                price_before: p0,
                price_after: p0,
                crossed: vec![],
                trader_fee: [T::zero(); 2],
                lp_fees: vec![[T::zero(); 2]; self.alphas.len()],
                invariant_deviation: T::zero(),
            });
        }
        // Solve on the coordinate that moves more; x₁ falls and x₂ rises with p.
        let c = if r[0].abs() >= r[1].abs() { 0 } else { 1 };
        let up = if c == 0 {
            target[0] < x[0]
        } else {
            target[1] > x[1]
        };
        let mut j = if up {
            self.knots[..m].iter().rposition(|&k| k <= p0).unwrap_or(0)
        } else {
            self.knots[1..]
                .iter()
                .position(|&k| k >= p0)
                .unwrap_or(m - 1)
        };
        let start = j;
        let landing = loop {
            if totals[j] <= T::zero() {
                return Err(Error::EmptyBucket(j));
            }
            let edge = if up { self.knots[j + 1] } else { self.knots[j] };
            let at_edge = self.reserves_at(&totals, edge)[c];
            let reached = if (c == 0) == up {
                target[c] >= at_edge
            } else {
                target[c] <= at_edge
            };
            if reached {
                let inside = self.unit(j, edge);
                let rest = at_edge - totals[j] * inside[c];
                break self.invert(j, c, (target[c] - rest) / totals[j]);
            }
            if up {
                if j + 1 == m {
                    return Err(Error::OutOfRange(
                        "trade exhausts the liquidity grid".into(),
                    ));
                }
                j += 1;
            } else {
                if j == 0 {
                    return Err(Error::OutOfRange(
                        "trade exhausts the liquidity grid".into(),
                    ));
                }
                j -= 1;
            }
        };
        let reached = self.reserves_at(&totals, landing);
        let o = 1 - c;
        let dev = (reached[o] - target[o]).abs() / (T::one() + x[o].abs());
        if !(dev <= self.tol) {
            return Err(Error::InvariantViolated {
                deviation: dev.to_f64_lossy(),
            });
        }
        let (a, b) = (self.knots[j], self.knots[j + 1]);
        let own = self.unit(j, landing);
        let bucket_x = [
            target[0] - (reached[0] - totals[j] * own[0]),
            target[1] - (reached[1] - totals[j] * own[1]),
        ];
        let invariant_deviation = shifted_invariant(totals[j], a, b, bucket_x);
        let (lo, hi) = (start.min(j), start.max(j));
        let crossed: Vec<usize> = (lo..=hi).collect();
        let denom: T = crossed.iter().map(|&k| totals[k]).sum();
        let np = [(-r[0]).max(T::zero()), (-r[1]).max(T::zero())];
        let trader_fee = [self.beta * np[0], self.beta * np[1]];
        let mut lp_fees = Vec::with_capacity(self.alphas.len());
        for (i, a) in self.alphas.iter().enumerate() {
            let w = crossed.iter().map(|&k| a[k]).sum::<T>() / denom;
            let f = [trader_fee[0] * w, trader_fee[1] * w];
            self.fees[i] = [self.fees[i][0] + f[0], self.fees[i][1] + f[1]];
            lp_fees.push(f);
        }
        self.price = landing;
        Ok(V3Receipt {
            r,
            price_before: p0,
            price_after: landing,
            crossed,
            trader_fee,
            lp_fees,
            invariant_deviation,
        })
    }

    /// The generator family equivalent to LP `i`'s position.
    pub fn family(&self, i: usize) -> Result<FamilyDescriptor<T>> {
        let a = self.alphas.get(i).ok_or(Error::UnknownLp(i))?;
        let parts: Vec<FamilyDescriptor<T>> = a
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > T::zero())
            .map(|(j, &w)| FamilyDescriptor::V3Bucket {
                alpha: w,
                a: self.knots[j],
                b: self.knots[j + 1],
            })
            .collect();
        Ok(match parts.len() {
            0 => FamilyDescriptor::Trivial,
            1 => parts.into_iter().next().expect("one part"),
            _ => FamilyDescriptor::Sum { parts },
        })
    }
}
