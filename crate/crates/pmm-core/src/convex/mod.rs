//! Convex-analysis kernel: scoring-rule liabilities, the conjugate cost
//! `C = G*` and its maximizing price, infimal-convolution splits, and the
//! liquidity matrix `∇²Ḡ`.

mod solver;

pub use solver::{solve_binary, Maximizer};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::scalar::{lit, Scalar};
use crate::simplex::{LiabilityVector, LiquidityMatrix, SimplexPrice, DEFAULT_EPS};

/// Numeric settings shared by the kernel operations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Kernel<T> {
    /// Interior clamp: prices closer than this to the boundary are rejected.
    pub eps: T,
    /// Stationarity tolerance of the simplex solver.
    pub tol: T,
    pub max_iter: usize,
    /// Base finite-difference step, scaled by `max(1, ‖p‖)`.
    pub fd_step: T,
}

impl<T: Scalar> Default for Kernel<T> {
    fn default() -> Self {
        Self {
            eps: lit(DEFAULT_EPS),
            tol: lit(1e-10),
            max_iter: 10_000,
            fd_step: lit(1e-5),
        }
    }
}

/// Output of [`Kernel::infimal_convolution_split`].
#[derive(Clone, Debug, PartialEq)]
pub struct InfConvSplit<T> {
    /// `(∧ Cᵢ)(q) = Σ αᵢ`.
    pub value: T,
    /// Per-generator liabilities `qⁱ`, summing to `q`.
    pub parts: Vec<LiabilityVector<T>>,
    pub price: SimplexPrice<T>,
}

impl<T: Scalar> Kernel<T> {
    fn check_price(&self, g: &Generator<T>, p: &SimplexPrice<T>) -> Result<()> {
        g.check_dim(p.len())?;
        p.check_interior(self.eps)
    }

    fn check_liability(&self, g: &Generator<T>, q: &LiabilityVector<T>) -> Result<()> {
        g.check_dim(q.len())?;
        if !q.is_finite() {
            return Err(Error::OutOfRange(
                "liability has non-finite components".into(),
            ));
        }
        Ok(())
    }

    /// `S_G(p, ·) = ∇Ḡ(p)`; zero cost and price `p` under `C = G*`.
    pub fn liability_of(
        &self,
        g: &Generator<T>,
        p: &SimplexPrice<T>,
    ) -> Result<LiabilityVector<T>> {
        self.check_price(g, p)?;
        Ok(LiabilityVector::new(g.grad(p.as_slice())?))
    }

    /// Raw maximizer, including boundary solutions.
    pub fn maximize(
        &self,
        g: &Generator<T>,
        q: &LiabilityVector<T>,
        warm: Option<&SimplexPrice<T>>,
    ) -> Result<Maximizer<T>> {
        self.check_liability(g, q)?;
        match g.curve() {
            Some(c) if q.len() == 2 => Ok(solver::maximize_binary(c, q.as_slice(), self.eps)),
            _ => solver::maximize_simplex(
                g,
                q.as_slice(),
                warm.map(|w| w.as_slice()),
                self.eps,
                self.tol,
                self.max_iter,
            ),
        }
    }

    /// `C(q) = max_p ⟨p, q⟩ − G(p)` and the maximizing price (clamped into
    /// the interior if the supremum sits on the boundary).
    pub fn conjugate_value(
        &self,
        g: &Generator<T>,
        q: &LiabilityVector<T>,
    ) -> Result<(T, SimplexPrice<T>)> {
        let m = self.maximize(g, q, None)?;
        let (p, _) = SimplexPrice::clamped(&m.p, self.eps);
        Ok((m.cost, p))
    }

    /// `C(q)` only.
    pub fn cost(&self, g: &Generator<T>, q: &LiabilityVector<T>) -> Result<T> {
        Ok(self.maximize(g, q, None)?.cost)
    }

    /// `(∇Ḡ)⁻¹(q)` modulo `1`: the conjugate maximizer, rejected when it
    /// reaches the boundary clamp.
    pub fn price_of(&self, g: &Generator<T>, q: &LiabilityVector<T>) -> Result<SimplexPrice<T>> {
        self.price_of_warm(g, q, None)
    }

    pub fn price_of_warm(
        &self,
        g: &Generator<T>,
        q: &LiabilityVector<T>,
        warm: Option<&SimplexPrice<T>>,
    ) -> Result<SimplexPrice<T>> {
        let m = self.maximize(g, q, warm)?;
        if m.boundary {
            let (index, value) =
                m.p.iter()
                    .enumerate()
                    .fold(
                        (0, T::infinity()),
                        |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
                    );
            return Err(Error::BoundaryPrice {
                index,
                value: value.to_f64_lossy(),
            });
        }
        SimplexPrice::normalized(m.p)
    }

    /// Splits `q` across `generators` so every part prices at the common
    /// price of the sum, `qⁱ = ∇Ḡᵢ(p) + αᵢ1`. The cash offsets `αᵢ` are
    /// shared equally among the nontrivial generators.
    ///
    /// Two-outcome kinks are handled by choosing, for every part, the
    /// subgradient at the same relative position `θ` of its subdifferential,
    /// with `θ` fixed by `Σ sᵢ = q₁ − q₂`.
    pub fn infimal_convolution_split(
        &self,
        generators: &[Generator<T>],
        q: &LiabilityVector<T>,
    ) -> Result<InfConvSplit<T>> {
        if generators.is_empty() {
            return Err(Error::InvalidFamily(
                "infimal convolution of no generators".into(),
            ));
        }
        let n = q.len();
        let total = Generator::sum(generators);
        let price = self.price_of(&total, q)?;
        let base = self.liabilities_at(generators, &price, q)?;
        let sum = LiabilityVector::sum_of(n, base.iter());
        let gap = q - &sum;
        let alpha_total = gap.as_slice().iter().copied().sum::<T>() / lit::<T>(n as f64);
        let mut active: Vec<usize> = (0..generators.len())
            .filter(|&i| !generators[i].is_trivial())
            .collect();
        if active.is_empty() {
            active.push(0);
        }
        let share = alpha_total / lit::<T>(active.len() as f64);
        let mut parts: Vec<LiabilityVector<T>> = base
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                if active.contains(&i) {
                    l.shift(share)
                } else {
                    l
                }
            })
            .collect();
        // Put the rounding residue on the first active part so the sum is exact.
        let resid = q - &LiabilityVector::sum_of(n, parts.iter());
        parts[active[0]] += &resid;
        Ok(InfConvSplit {
            value: alpha_total,
            parts,
            price,
        })
    }

    /// Liabilities `∇Ḡᵢ(p)` whose sum matches `q` in every direction
    /// transverse to `1` (exactly so at two-outcome kinks).
    pub fn liabilities_at(
        &self,
        generators: &[Generator<T>],
        price: &SimplexPrice<T>,
        q: &LiabilityVector<T>,
    ) -> Result<Vec<LiabilityVector<T>>> {
        let n = q.len();
        if n == 2 && generators.iter().all(|g| g.curve().is_some()) {
            let p = price.first();
            let z = q[0] - q[1];
            let slopes: Vec<(T, T)> = generators
                .iter()
                .map(|g| g.curve().expect("checked").slopes(p))
                .collect();
            let theta = common_fill(&slopes, z);
            return Ok(generators
                .iter()
                .zip(&slopes)
                .map(|(g, &(lo, hi))| {
                    let s = if hi > lo { lo + theta * (hi - lo) } else { lo };
                    let l = g.curve().expect("checked").liability_with_slope(p, s);
                    LiabilityVector::new(l.to_vec())
                })
                .collect());
        }
        generators
            .iter()
            .map(|g| self.liability_of(g, price))
            .collect()
    }

    /// `∇²Ḡ(p)`: analytic when available, otherwise central differences.
    pub fn liquidity_matrix(
        &self,
        g: &Generator<T>,
        p: &SimplexPrice<T>,
    ) -> Result<LiquidityMatrix<T>> {
        self.check_price(g, p)?;
        match g.hessian(p.as_slice()) {
            Ok(h) => Ok(h),
            Err(Error::NoGradient(_)) => self.liquidity_matrix_fd(g, p),
            Err(e) => Err(e),
        }
    }

    /// Central finite differences of `∇Ḡ` in ambient coordinates, with the
    /// perturbed points mapped back onto the simplex (the gradient of a
    /// 1-homogeneous function is 0-homogeneous).
    pub fn liquidity_matrix_fd(
        &self,
        g: &Generator<T>,
        p: &SimplexPrice<T>,
    ) -> Result<LiquidityMatrix<T>> {
        self.check_price(g, p)?;
        let x = p.as_slice();
        let n = x.len();
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        let h0 = self.fd_step * norm.max(T::one());
        let mut h = LiquidityMatrix::zeros(n);
        for j in 0..n {
            let step = h0.min(x[j] * lit(0.5));
            let eval = |sign: T| -> Result<Vec<T>> {
                let mut y = x.to_vec();
                y[j] = y[j] + sign * step;
                let s: T = y.iter().copied().sum();
                for v in y.iter_mut() {
                    *v = *v / s;
                }
                g.grad(&y)
            };
            let plus = eval(T::one())?;
            let minus = eval(-T::one())?;
            for i in 0..n {
                h.set(i, j, (plus[i] - minus[i]) / (lit::<T>(2.0) * step));
            }
        }
        h.symmetrize();
        Ok(h)
    }

    /// `vᵀ ∇²Ḡ(p) v`.
    pub fn directional_liquidity(
        &self,
        g: &Generator<T>,
        p: &SimplexPrice<T>,
        v: &LiabilityVector<T>,
    ) -> Result<T> {
        if v.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: v.len(),
            });
        }
        Ok(self.liquidity_matrix(g, p)?.quad_form(v.as_slice()))
    }
}

/// `θ ∈ [0, 1]` with `Σ (loᵢ + θ(hiᵢ − loᵢ)) = z`, clamped; `½` when no part
/// has a kink.
pub fn common_fill<T: Scalar>(slopes: &[(T, T)], z: T) -> T {
    let lo: T = slopes.iter().map(|s| s.0).sum();
    let width: T = slopes.iter().map(|s| s.1 - s.0).sum();
    if width > T::zero() {
        ((z - lo) / width).max(T::zero()).min(T::one())
    } else {
        lit(0.5)
    }
}

/// [`Kernel::liability_of`] with default settings.
pub fn liability_of<T: Scalar>(
    g: &Generator<T>,
    p: &SimplexPrice<T>,
) -> Result<LiabilityVector<T>> {
    Kernel::default().liability_of(g, p)
}

/// [`Kernel::conjugate_value`] with default settings.
pub fn conjugate_value<T: Scalar>(
    g: &Generator<T>,
    q: &LiabilityVector<T>,
) -> Result<(T, SimplexPrice<T>)> {
    Kernel::default().conjugate_value(g, q)
}

/// [`Kernel::price_of`] with default settings.
pub fn price_of<T: Scalar>(g: &Generator<T>, q: &LiabilityVector<T>) -> Result<SimplexPrice<T>> {
    Kernel::default().price_of(g, q)
}

/// [`Kernel::infimal_convolution_split`] with default settings.
pub fn infimal_convolution_split<T: Scalar>(
    generators: &[Generator<T>],
    q: &LiabilityVector<T>,
) -> Result<InfConvSplit<T>> {
    Kernel::default().infimal_convolution_split(generators, q)
}

/// [`Kernel::liquidity_matrix`] with default settings.
pub fn liquidity_matrix<T: Scalar>(
    g: &Generator<T>,
    p: &SimplexPrice<T>,
) -> Result<LiquidityMatrix<T>> {
    Kernel::default().liquidity_matrix(g, p)
}

/// [`Kernel::directional_liquidity`] with default settings.
pub fn directional_liquidity<T: Scalar>(
    g: &Generator<T>,
    p: &SimplexPrice<T>,
    v: &LiabilityVector<T>,
) -> Result<T> {
    Kernel::default().directional_liquidity(g, p, v)
}

/// `G̃(p) = G(p) − ⟨p, (G(δⁱ))ᵢ⟩` on `Δₙ`.
pub fn normalize_generator<T: Scalar>(g: &Generator<T>, n: usize) -> Result<Generator<T>> {
    g.normalized(n)
}
