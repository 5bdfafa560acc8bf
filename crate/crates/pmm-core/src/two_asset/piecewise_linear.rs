//! The piecewise-linear maker: prices restricted to a grid `a₀ < … < a_{m−1}`,
//! each grid point carrying a point mass of liquidity. The state is the
//! current grid index `j*` and the fractional fill `y ∈ [0, 1)` of that
//! point's capacity, so that
//! `q₁ − q₂ = Σⱼ αⱼaⱼ − Σ_{j ≥ j*} αⱼ + y·α_{j*}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{FamilyDescriptor, Generator};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PiecewiseLinearState<T> {
    grid: Vec<T>,
    /// `alphas[i][j]`: LP `i`'s weight at grid point `j`.
    alphas: Vec<Vec<T>>,
    /// Per-LP liability.
    q: Vec<[T; 2]>,
    j_star: usize,
    y: T,
    pub tol: T,
}

/// Movement of the fill inside one grid point during a trade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlFill<T> {
    pub bucket: usize,
    pub y_from: T,
    pub y_to: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlReceipt<T> {
    pub r: [T; 2],
    pub parts: Vec<[T; 2]>,
    pub price_before: T,
    pub price_after: T,
    /// Itemized per-point fills in the order they are traversed.
    pub fills: Vec<PlFill<T>>,
}

/// `Σ_{i ≥ j} αᵢ`, accumulated from the top.
fn suffix_sums<T: Scalar>(alphas: &[T]) -> Vec<T> {
    let mut suf = vec![T::zero(); alphas.len() + 1];
    for j in (0..alphas.len()).rev() {
        suf[j] = suf[j + 1] + alphas[j];
    }
    suf
}

fn weighted_grid<T: Scalar>(grid: &[T], alphas: &[T]) -> T {
    grid.iter().zip(alphas).map(|(&a, &w)| a * w).sum()
}

fn resolve<T: Scalar>(
    alphas: &[T],
    j: Option<usize>,
    c: impl Fn(usize) -> T,
) -> Result<(usize, T)> {
    let j =
        j.ok_or_else(|| Error::OutOfRange("liability lies below the lowest grid price".into()))?;
    let cj = c(j);
    let y = if alphas[j] > T::zero() {
        cj / alphas[j]
    } else {
        T::zero()
    };
    if y >= T::one() {
        return Err(Error::OutOfRange(
            "liability lies above the highest grid price".into(),
        ));
    }
    Ok((j, y))
}

/// `(j*, y)` for `z = q₁ − q₂`: `j*` is the largest index with
/// `z − Σαⱼaⱼ + Σ_{j ≥ j*} αⱼ ≥ 0`, and `y` is that slack over `α_{j*}`.
pub fn price_index<T: Scalar>(grid: &[T], alphas: &[T], z: T) -> Result<(usize, T)> {
    let a = weighted_grid(grid, alphas);
    let suf = suffix_sums(alphas);
    let c = |j: usize| z - a + suf[j];
    // c is nonincreasing in j, so the satisfying indices form a prefix.
    let count = (0..alphas.len())
        .collect::<Vec<_>>()
        .partition_point(|&j| c(j) >= T::zero());
    resolve(alphas, count.checked_sub(1), c)
}

/// The same condition scanned over every index.
pub fn price_index_brute<T: Scalar>(grid: &[T], alphas: &[T], z: T) -> Result<(usize, T)> {
    let a = weighted_grid(grid, alphas);
    let mut best = None;
    for jp in 0..alphas.len() {
        let mut s = T::zero();
        for j in (jp..alphas.len()).rev() {
            s = s + alphas[j];
        }
        if z - a + s >= T::zero() {
            best = Some(jp);
        }
    }
    let c = |jp: usize| {
        let mut s = T::zero();
        for j in (jp..alphas.len()).rev() {
            s = s + alphas[j];
        }
        z - a + s
    };
    resolve(alphas, best, c)
}

impl<T: Scalar> PiecewiseLinearState<T> {
    /// Opens the maker with the creator's weights at `z = q₁ − q₂`.
    pub fn initialize(grid: Vec<T>, weights: Vec<T>, z: T) -> Result<Self> {
        Generator::new(FamilyDescriptor::PiecewiseLinear {
            grid: grid.clone(),
            weights: weights.clone(),
        })?;
        let (j_star, y) = price_index(&grid, &weights, z)?;
        let mut s = Self {
            grid,
            alphas: vec![weights],
            q: vec![[T::zero(); 2]],
            j_star,
            y,
            tol: T::tol(1e-9),
        };
        s.q[0] = s.position(&s.alphas[0]);
        Ok(s)
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn j_star(&self) -> usize {
        self.j_star
    }

    pub fn fill(&self) -> T {
        self.y
    }

    pub fn price(&self) -> T {
        self.grid[self.j_star]
    }

    pub fn alphas(&self) -> &[Vec<T>] {
        &self.alphas
    }

    /// `Σᵢ αᵢⱼ` per grid point.
    pub fn totals(&self) -> Vec<T> {
        (0..self.grid.len())
            .map(|j| self.alphas.iter().map(|a| a[j]).sum())
            .collect()
    }

    pub fn liability(&self, i: usize) -> Result<[T; 2]> {
        self.q.get(i).copied().ok_or(Error::UnknownLp(i))
    }

    pub fn aggregate(&self) -> [T; 2] {
        self.q
            .iter()
            .fold([T::zero(); 2], |a, q| [a[0] + q[0], a[1] + q[1]])
    }

    /// Liability of unit weight at grid point `j` in state `(j*, y)`.
    fn unit_at(&self, j: usize, js: usize, y: T) -> [T; 2] {
        let a = self.grid[j];
        let one = T::one();
        if j < js {
            [T::zero(), -a]
        } else if j > js {
            [a - one, T::zero()]
        } else {
            [(a - one) * (one - y), -a * y]
        }
    }

    pub fn unit(&self, j: usize) -> [T; 2] {
        self.unit_at(j, self.j_star, self.y)
    }

    fn position_at(&self, w: &[T], js: usize, y: T) -> [T; 2] {
        w.iter().enumerate().fold([T::zero(); 2], |acc, (j, &a)| {
            let u = self.unit_at(j, js, y);
            [acc[0] + a * u[0], acc[1] + a * u[1]]
        })
    }

    fn position(&self, w: &[T]) -> [T; 2] {
        self.position_at(w, self.j_star, self.y)
    }

    pub fn register_lp(&mut self) -> usize {
        self.alphas.push(vec![T::zero(); self.grid.len()]);
        self.q.push([T::zero(); 2]);
        self.alphas.len() - 1
    }

    /// Sets `αᵢⱼ` to `α′` keeping `(j*, y)`; returns the deposit
    /// `−(α′ − αᵢⱼ)·unit(j)`.
    pub fn modify_liquidity(&mut self, i: usize, j: usize, alpha_new: T) -> Result<[T; 2]> {
        if i >= self.alphas.len() {
            return Err(Error::UnknownLp(i));
        }
        if j >= self.grid.len() {
            return Err(Error::OutOfRange(format!("grid point {j} does not exist")));
        }
        if !(alpha_new >= T::zero()) || !alpha_new.is_finite() {
            return Err(Error::OutOfRange("liquidity α must be ≥ 0".into()));
        }
        let d = alpha_new - self.alphas[i][j];
        let u = self.unit(j);
        let dep = [-d * u[0], -d * u[1]];
        self.alphas[i][j] = alpha_new;
        self.q[i] = [self.q[i][0] - dep[0], self.q[i][1] - dep[1]];
        let totals = self.totals();
        if totals[self.j_star] <= T::zero() {
            // The point holding the fill emptied; the price moves to where the
            // remaining liquidity puts it. Liabilities are unaffected.
            let q = self.aggregate();
            let (js, y) = price_index(&self.grid, &totals, q[0] - q[1])?;
            self.j_star = js;
            self.y = y;
        }
        Ok(dep)
    }

    pub fn z(&self) -> T {
        let q = self.aggregate();
        q[0] - q[1]
    }

    fn fills(&self, totals: &[T], to: (usize, T)) -> Vec<PlFill<T>> {
        let (j0, y0) = (self.j_star, self.y);
        let (j1, y1) = to;
        let mut out = Vec::new();
        let mut push = |bucket: usize, y_from: T, y_to: T| {
            if totals[bucket] > T::zero() && y_from != y_to {
                out.push(PlFill {
                    bucket,
                    y_from,
                    y_to,
                });
            }
        };
        let (zero, one) = (T::zero(), T::one());
        if j1 == j0 {
            push(j0, y0, y1);
        } else if j1 > j0 {
            push(j0, y0, one);
            for j in j0 + 1..j1 {
                push(j, zero, one);
            }
            push(j1, zero, y1);
        } else {
            push(j0, y0, zero);
            for j in (j1 + 1..j0).rev() {
                push(j, one, zero);
            }
            push(j1, one, y1);
        }
        out
    }

    /// The trade on the level set that moves `q₁ − q₂` by `dz`.
    pub fn complete(&self, dz: T) -> Result<[T; 2]> {
        let q = self.aggregate();
        let (js, y) = price_index(&self.grid, &self.totals(), q[0] - q[1] + dz)?;
        let t = self.position_at(&self.totals(), js, y);
        Ok([t[0] - q[0], t[1] - q[1]])
    }

    /// Hands `r` to the trader; the new `(j*, y)` follows from `q + r`.
    pub fn execute_trade(&mut self, r: [T; 2]) -> Result<PlReceipt<T>> {
        let q = self.aggregate();
        let qn = [q[0] + r[0], q[1] + r[1]];
        let totals = self.totals();
        let (js, y) = price_index(&self.grid, &totals, qn[0] - qn[1])?;
        let targets: Vec<[T; 2]> = self
            .alphas
            .iter()
            .map(|w| self.position_at(w, js, y))
            .collect();
        let t = targets
            .iter()
            .fold([T::zero(); 2], |a, q| [a[0] + q[0], a[1] + q[1]]);
        let dev = (t[0] - qn[0]).abs().max((t[1] - qn[1]).abs());
        if !(dev <= self.tol * (T::one() + qn[0].abs().max(qn[1].abs()))) {
            return Err(Error::NotLevelSet {
                deviation: dev.to_f64_lossy(),
            });
        }
        let mut parts: Vec<[T; 2]> = self
            .q
            .iter()
            .zip(&targets)
            .map(|(q, t)| [t[0] - q[0], t[1] - q[1]])
            .collect();
        let sum = parts
            .iter()
            .fold([T::zero(); 2], |a, p| [a[0] + p[0], a[1] + p[1]]);
        let absorb = self
            .alphas
            .iter()
            .position(|w| w.iter().any(|&a| a > T::zero()))
            .unwrap_or(0);
        parts[absorb] = [
            parts[absorb][0] + r[0] - sum[0],
            parts[absorb][1] + r[1] - sum[1],
        ];
        let fills = self.fills(&totals, (js, y));
        for (q, p) in self.q.iter_mut().zip(&parts) {
            *q = [q[0] + p[0], q[1] + p[1]];
        }
        let price_before = self.price();
        self.j_star = js;
        self.y = y;
        Ok(PlReceipt {
            r,
            parts,
            price_before,
            price_after: self.price(),
            fills,
        })
    }

    /// The generator family equivalent to LP `i`'s weights.
    pub fn family(&self, i: usize) -> Result<FamilyDescriptor<T>> {
        let w = self.alphas.get(i).ok_or(Error::UnknownLp(i))?;
        Ok(if w.iter().any(|&a| a > T::zero()) {
            FamilyDescriptor::PiecewiseLinear {
                grid: self.grid.clone(),
                weights: w.clone(),
            }
        } else {
            FamilyDescriptor::Trivial
        })
    }
}
