//! Generating-function families, their closed-form derivatives, and the
//! pipeline from a liquidity function to a normalized two-outcome curve.
//!
//! A [`Generator`] is built from a serializable [`FamilyDescriptor`]. It
//! evaluates `G(p)`, the gradient of the 1-homogeneous extension `∇Ḡ(p)`
//! (the scoring-rule liability), and the Hessian `∇²Ḡ(p)` (the liquidity
//! matrix). Two-outcome families additionally expose a [`Curve`] view
//! `g(p) = G(p, 1−p)` used by the closed-form two-asset layer.

mod curve;
mod integrated;
mod piecewise;

pub use curve::{BucketCurve, Curve};
pub use integrated::{IntegratedCurve, LiquidityBase};
pub use piecewise::{
    quadratic_from_profile, ArgMax, PiecewiseConjugate, PiecewiseQuadratic, StepProfile,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::simplex::LiquidityMatrix;

/// Alias matching the two-outcome vocabulary: `g`, `g′`, `ℓ = g″`.
pub type Curve1D<T> = Curve<T>;

fn one<T: Scalar>() -> T {
    T::one()
}

/// Serializable family tag plus parameters.
///
/// JSON form: `{"family": "<snake_case name>", ...params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", bound = "T: Scalar")]
pub enum FamilyDescriptor<T> {
    /// `G ≡ 0`: no liquidity. The generator of a freshly registered LP.
    Trivial,
    /// `G(p) = b Σ pᵢ log pᵢ`.
    Lmsr {
        b: T,
    },
    /// `G(p) = −nα(Πpᵢ)^{1/n}`; reserves satisfy `Πxᵢ = αⁿ`.
    ConstantProduct {
        alpha: T,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    /// `G(p) = (s/2)(‖p‖² − 1)`; for two outcomes `s(p² − p)`.
    Brier {
        #[serde(default = "one")]
        scale: T,
    },
    /// `G(p) = −2α√(pᵢpⱼ)`: constant-product liquidity between two assets
    /// of a larger market.
    PairProduct {
        i: usize,
        j: usize,
        alpha: T,
    },
    /// Two-outcome `g(p) = −2α√(p(1−p))`.
    UniswapV2 {
        alpha: T,
    },
    /// Uniswap-shape liquidity restricted to `[a, b]`, weight `α`.
    V3Bucket {
        alpha: T,
        a: T,
        b: T,
    },
    /// LMSR (`b = 1`) liquidity restricted to `[a, b]`, weight `α`.
    LmsrBucket {
        alpha: T,
        a: T,
        b: T,
    },
    /// Brier liquidity `ℓ = 2α` on `[a, b]`.
    BrierBucket {
        alpha: T,
        a: T,
        b: T,
    },
    /// Tent-weighted Uniswap-shape liquidity. `knots` are
    /// `a₀ < a₁ = 0 < … < a_k = 1 < a_{k+1}` and `weights` holds `α₁..α_k`.
    SoftBucket {
        knots: Vec<T>,
        weights: Vec<T>,
    },
    /// Point masses of liquidity `αⱼ` at prices `aⱼ`.
    PiecewiseLinear {
        grid: Vec<T>,
        weights: Vec<T>,
    },
    /// Piecewise-constant liquidity: `levels[i]` on `[knots[i], knots[i+1]]`.
    StepLiquidity {
        knots: Vec<T>,
        levels: Vec<T>,
    },
    /// Liquidity `f(p)·base(p)` with `f` interpolating `values` on `grid`,
    /// integrated numerically.
    TabulatedLiquidity {
        grid: Vec<T>,
        values: Vec<T>,
        #[serde(default)]
        base: LiquidityBase,
    },
    /// An explicit two-outcome curve, `c₀ + c₁p + c₂p²` per piece.
    PiecewiseQuadratic {
        knots: Vec<T>,
        coeffs: Vec<[T; 3]>,
    },
    Sum {
        parts: Vec<FamilyDescriptor<T>>,
    },
    /// The inner family with its vertex values subtracted.
    Normalized {
        of: Box<FamilyDescriptor<T>>,
    },
}

impl<T: Scalar> FamilyDescriptor<T> {
    /// Short family name, as used in the JSON tag.
    pub fn name(&self) -> &'static str {
        match self {
            FamilyDescriptor::Trivial => "trivial",
            FamilyDescriptor::Lmsr { .. } => "lmsr",
            FamilyDescriptor::ConstantProduct { .. } => "constant_product",
            FamilyDescriptor::Brier { .. } => "brier",
            FamilyDescriptor::PairProduct { .. } => "pair_product",
            FamilyDescriptor::UniswapV2 { .. } => "uniswap_v2",
            FamilyDescriptor::V3Bucket { .. } => "v3_bucket",
            FamilyDescriptor::LmsrBucket { .. } => "lmsr_bucket",
            FamilyDescriptor::BrierBucket { .. } => "brier_bucket",
            FamilyDescriptor::SoftBucket { .. } => "soft_bucket",
            FamilyDescriptor::PiecewiseLinear { .. } => "piecewise_linear",
            FamilyDescriptor::StepLiquidity { .. } => "step_liquidity",
            FamilyDescriptor::TabulatedLiquidity { .. } => "tabulated_liquidity",
            FamilyDescriptor::PiecewiseQuadratic { .. } => "piecewise_quadratic",
            FamilyDescriptor::Sum { .. } => "sum",
            FamilyDescriptor::Normalized { .. } => "normalized",
        }
    }
}

#[derive(Clone, Debug)]
enum Kind<T> {
    Trivial,
    Lmsr {
        b: T,
    },
    ConstantProduct {
        alpha: T,
        n: Option<usize>,
    },
    Brier {
        scale: T,
    },
    Pair {
        i: usize,
        j: usize,
        alpha: T,
    },
    /// A two-outcome family; the curve lives in `Generator::curve`.
    Curve,
    Sum(Vec<Generator<T>>),
    Shifted {
        inner: Box<Generator<T>>,
        offset: Vec<T>,
    },
}

/// A validated generating function.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    desc: FamilyDescriptor<T>,
    kind: Kind<T>,
    curve: Option<Curve<T>>,
}

impl<T: Scalar> PartialEq for Generator<T> {
    fn eq(&self, other: &Self) -> bool {
        self.desc == other.desc
    }
}

impl<T: Scalar> Serialize for Generator<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.desc.serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Generator<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let desc = FamilyDescriptor::deserialize(d)?;
        Generator::new(desc).map_err(serde::de::Error::custom)
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidFamily(msg.into()))
}

fn check_param<T: Scalar>(name: &str, v: T, allow_zero: bool) -> Result<()> {
    let ok = v.is_finite()
        && if allow_zero {
            v >= T::zero()
        } else {
            v > T::zero()
        };
    if ok {
        Ok(())
    } else {
        let rel = if allow_zero { "≥ 0" } else { "> 0" };
        invalid(format!("{name} must be finite and {rel}"))
    }
}

fn check_open_bucket<T: Scalar>(a: T, b: T) -> Result<()> {
    if a > T::zero() && a < b && b < T::one() {
        Ok(())
    } else {
        invalid("bucket needs 0 < a < b < 1")
    }
}

fn xlogx<T: Scalar>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.ln()
    }
}

/// Curve for a step-plus-atoms liquidity profile.
fn curve_from_steps<T: Scalar>(
    knots: Vec<T>,
    levels: Vec<T>,
    atoms: Vec<(T, T)>,
) -> Result<Curve<T>> {
    let prof = StepProfile::new(knots, levels, atoms)?;
    Ok(Curve::Quadratic(quadratic_from_profile(&prof)))
}

/// Knots `[0, a, b, 1]` with duplicates at the ends removed, and the matching
/// levels for liquidity `level` on `[a, b]`.
fn bucket_steps<T: Scalar>(a: T, b: T, level: T) -> (Vec<T>, Vec<T>) {
    let mut knots = vec![T::zero()];
    let mut levels = Vec::new();
    if a > T::zero() {
        knots.push(a);
        levels.push(T::zero());
    }
    knots.push(b);
    levels.push(level);
    if b < T::one() {
        knots.push(T::one());
        levels.push(T::zero());
    }
    (knots, levels)
}

/// Liquidity function accepted by [`g_from_liquidity`].
#[derive(Clone, Debug, PartialEq)]
pub enum LiquidityFunction<T> {
    /// Piecewise-constant levels plus point masses; integrated in closed form.
    Steps(StepProfile<T>),
    /// `f·base` with `f` piecewise linear; integrated by adaptive quadrature.
    Tabulated {
        grid: Vec<T>,
        values: Vec<T>,
        base: LiquidityBase,
    },
}

/// The normalized curve whose second derivative is `ℓ`:
/// `g(p) = ∫₀ᵖ∫₀ᵗ ℓ − p ∫₀¹∫₀ᵗ ℓ`, so `g(0) = g(1) = 0`.
pub fn g_from_liquidity<T: Scalar>(l: &LiquidityFunction<T>) -> Result<Curve<T>> {
    match l {
        LiquidityFunction::Steps(prof) => Ok(Curve::Quadratic(quadratic_from_profile(prof))),
        LiquidityFunction::Tabulated { grid, values, base } => {
            let c = IntegratedCurve::new(grid.clone(), values.clone(), *base)?;
            // Touch both ends so a divergent integral surfaces here.
            let half = lit::<T>(0.5);
            if !c.g(half).is_finite() || !c.slope(half).is_finite() {
                return Err(Error::DivergentIntegral { lo: 0.0, hi: 1.0 });
            }
            Ok(Curve::Integrated(c))
        }
    }
}

/// Tent-weighted constant-product liquidity: `Σⱼ αⱼ T⁽ʲ⁾(p) · 2(p(1−p))^{-3/2}`.
///
/// On `[0, 1]` the tents sum to the piecewise-linear interpolant of
/// `(aⱼ, αⱼ)` for `j = 1..k`, so the curve is an [`IntegratedCurve`] over the
/// inner knots.
pub fn soft_bucket_curve<T: Scalar>(knots: &[T], weights: &[T]) -> Result<Curve<T>> {
    let k = weights.len();
    if k < 2 || knots.len() != k + 2 {
        return invalid("soft bucket: need k ≥ 2 weights and k + 2 knots");
    }
    if knots.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("soft bucket: knots must be strictly increasing");
    }
    if knots[1] != T::zero() || knots[k] != T::one() {
        return invalid("soft bucket: knots a₁ and a_k must be 0 and 1");
    }
    for &w in weights {
        check_param("soft bucket weight", w, true)?;
    }
    if weights.iter().all(|w| *w == T::zero()) {
        return Ok(Curve::Zero);
    }
    g_from_liquidity(&LiquidityFunction::Tabulated {
        grid: knots[1..=k].to_vec(),
        values: weights.to_vec(),
        base: LiquidityBase::ConstantProduct,
    })
}

/// Closed-form convex conjugate of a two-outcome curve in the coordinate
/// `z = q₁ − q₂`, with `C(q) = c(q₁ − q₂) + q₂`.
#[derive(Clone, Debug, PartialEq)]
pub enum Conjugate1D<T> {
    Piecewise(PiecewiseConjugate<T>),
    /// `c(z) = b log(1 + e^{z/b})`, the LMSR cost.
    Softplus {
        b: T,
    },
    /// `c(z) = ½(z + √(4α² + z²))`, the constant-product cost.
    Hyperbolic {
        alpha: T,
    },
}

impl<T: Scalar> Conjugate1D<T> {
    pub fn value(&self, z: T) -> T {
        match self {
            Conjugate1D::Piecewise(pc) => pc.value(z),
            Conjugate1D::Softplus { b } => {
                let t = z / *b;
                // log(1 + eᵗ) = max(t, 0) + log(1 + e^{−|t|})
                *b * (t.max(T::zero()) + (-t.abs()).exp().ln_1p())
            }
            Conjugate1D::Hyperbolic { alpha } => {
                let four = lit::<T>(4.0);
                (z + (four * *alpha * *alpha + z * z).sqrt()) * lit(0.5)
            }
        }
    }

    /// The maximizing price `p`, equal to `c′(z)` where `c` is smooth.
    pub fn maximizer(&self, z: T) -> T {
        match self {
            Conjugate1D::Piecewise(pc) => pc.maximizer(z),
            Conjugate1D::Softplus { b } => {
                let t = z / *b;
                if t >= T::zero() {
                    T::one() / (T::one() + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (T::one() + e)
                }
            }
            Conjugate1D::Hyperbolic { alpha } => {
                let four = lit::<T>(4.0);
                (T::one() + z / (four * *alpha * *alpha + z * z).sqrt()) * lit(0.5)
            }
        }
    }
}

/// Closed-form conjugate of a two-outcome generator, or `UnsupportedFamily`
/// (callers then fall back to the numeric conjugate).
pub fn conjugate_closed_form<T: Scalar>(g: &Generator<T>) -> Result<Conjugate1D<T>> {
    let unsupported = || Error::UnsupportedFamily(g.descriptor().name().to_string());
    let c = g.curve().ok_or_else(unsupported)?;
    if let Some(q) = c.as_quadratic() {
        return Ok(Conjugate1D::Piecewise(q.conjugate()));
    }
    let parts: Vec<&Curve<T>> = match c {
        Curve::Sum(parts) => parts.iter().collect(),
        other => vec![other],
    };
    if parts.iter().all(|c| matches!(c, Curve::Entropy { .. })) {
        let b = parts
            .iter()
            .map(|c| match c {
                Curve::Entropy { b } => *b,
                _ => T::zero(),
            })
            .sum();
        return Ok(Conjugate1D::Softplus { b });
    }
    if parts.iter().all(|c| matches!(c, Curve::Root { .. })) {
        let alpha = parts
            .iter()
            .map(|c| match c {
                Curve::Root { alpha } => *alpha,
                _ => T::zero(),
            })
            .sum();
        return Ok(Conjugate1D::Hyperbolic { alpha });
    }
    Err(unsupported())
}

/// Builds a generator from a descriptor. Same as [`Generator::new`].
pub fn evaluate<T: Scalar>(desc: &FamilyDescriptor<T>) -> Result<Generator<T>> {
    Generator::new(desc.clone())
}

impl<T: Scalar> Generator<T> {
    /// Validates the descriptor, including `G ≤ 0` on the simplex.
    pub fn new(desc: FamilyDescriptor<T>) -> Result<Self> {
        let g = Self::new_unnormalized(desc)?;
        if let Some(c) = &g.curve {
            let scale = c.g(T::zero()).abs().max(c.g(T::one()).abs()).max(T::one());
            let tol = T::tol(1e-9) * scale;
            if c.g(T::zero()) > tol || c.g(T::one()) > tol {
                return invalid(format!(
                    "{}: generator must be ≤ 0 on the simplex (g(0) = {}, g(1) = {})",
                    g.desc.name(),
                    c.g(T::zero()),
                    c.g(T::one())
                ));
            }
        }
        Ok(g)
    }

    /// Validates parameters and convexity but not the sign of `G`; pair with
    /// [`Generator::normalized`] to obtain a member of the nonpositive class.
    pub fn new_unnormalized(desc: FamilyDescriptor<T>) -> Result<Self> {
        use FamilyDescriptor as F;
        let curve_only = |desc: FamilyDescriptor<T>, c: Curve<T>| Generator {
            desc,
            kind: Kind::Curve,
            curve: Some(c),
        };
        Ok(match &desc {
            F::Trivial => Self::trivial(),
            F::Lmsr { b } => {
                check_param("lmsr b", *b, false)?;
                let b = *b;
                Generator {
                    desc,
                    kind: Kind::Lmsr { b },
                    curve: Some(Curve::Entropy { b }),
                }
            }
            F::ConstantProduct { alpha, n } => {
                check_param("constant product alpha", *alpha, false)?;
                if matches!(n, Some(k) if *k < 2) {
                    return invalid("constant product needs n ≥ 2");
                }
                let (alpha, n) = (*alpha, *n);
                let curve = match n {
                    None | Some(2) => Some(Curve::Root { alpha }),
                    _ => None,
                };
                Generator {
                    desc,
                    kind: Kind::ConstantProduct { alpha, n },
                    curve,
                }
            }
            F::Brier { scale } => {
                check_param("brier scale", *scale, false)?;
                let s = *scale;
                let q =
                    PiecewiseQuadratic::new(vec![T::zero(), T::one()], vec![[T::zero(), -s, s]])?;
                Generator {
                    desc,
                    kind: Kind::Brier { scale: s },
                    curve: Some(Curve::Quadratic(q)),
                }
            }
            F::PairProduct { i, j, alpha } => {
                check_param("pair product alpha", *alpha, true)?;
                if i == j {
                    return invalid("pair product needs two distinct assets");
                }
                let (i, j, alpha) = (*i, *j, *alpha);
                let curve = if i.max(j) == 1 {
                    Some(Curve::Root { alpha })
                } else {
                    None
                };
                Generator {
                    desc,
                    kind: Kind::Pair { i, j, alpha },
                    curve,
                }
            }
            F::UniswapV2 { alpha } => {
                check_param("uniswap alpha", *alpha, true)?;
                let c = if *alpha == T::zero() {
                    Curve::Zero
                } else {
                    Curve::Root { alpha: *alpha }
                };
                curve_only(desc, c)
            }
            F::V3Bucket { alpha, a, b } => {
                check_param("bucket alpha", *alpha, true)?;
                check_open_bucket(*a, *b)?;
                let bk = BucketCurve::new(Curve::Root { alpha: T::one() }, *a, *b, *alpha)?;
                curve_only(desc, Curve::Bucket(Box::new(bk)))
            }
            F::LmsrBucket { alpha, a, b } => {
                check_param("bucket alpha", *alpha, true)?;
                check_open_bucket(*a, *b)?;
                let bk = BucketCurve::new(Curve::Entropy { b: T::one() }, *a, *b, *alpha)?;
                curve_only(desc, Curve::Bucket(Box::new(bk)))
            }
            F::BrierBucket { alpha, a, b } => {
                check_param("bucket alpha", *alpha, true)?;
                if !(*a >= T::zero() && *a < *b && *b <= T::one()) {
                    return invalid("brier bucket needs 0 ≤ a < b ≤ 1");
                }
                let two = lit::<T>(2.0);
                let (knots, levels) = bucket_steps(*a, *b, two * *alpha);
                let c = curve_from_steps(knots, levels, vec![])?;
                curve_only(desc, c)
            }
            F::SoftBucket { knots, weights } => {
                let c = soft_bucket_curve(knots, weights)?;
                curve_only(desc, c)
            }
            F::PiecewiseLinear { grid, weights } => {
                if grid.is_empty() || grid.len() != weights.len() {
                    return invalid(
                        "piecewise linear: grid and weights must be nonempty and equal length",
                    );
                }
                if grid.iter().any(|a| !(*a > T::zero() && *a < T::one()))
                    || grid.windows(2).any(|w| !(w[0] < w[1]))
                {
                    return invalid("piecewise linear: grid must increase strictly inside (0, 1)");
                }
                for &w in weights {
                    check_param("piecewise linear weight", w, true)?;
                }
                let atoms = grid.iter().copied().zip(weights.iter().copied()).collect();
                let c = curve_from_steps(vec![T::zero(), T::one()], vec![T::zero()], atoms)?;
                curve_only(desc, c)
            }
            F::StepLiquidity { knots, levels } => {
                let c = curve_from_steps(knots.clone(), levels.clone(), vec![])?;
                curve_only(desc, c)
            }
            F::TabulatedLiquidity { grid, values, base } => {
                let c = g_from_liquidity(&LiquidityFunction::Tabulated {
                    grid: grid.clone(),
                    values: values.clone(),
                    base: *base,
                })?;
                curve_only(desc, c)
            }
            F::PiecewiseQuadratic { knots, coeffs } => {
                let q = PiecewiseQuadratic::new(knots.clone(), coeffs.clone())?;
                curve_only(desc, Curve::Quadratic(q))
            }
            F::Sum { parts } => {
                let gens = parts
                    .iter()
                    .map(|d| Self::new_unnormalized(d.clone()))
                    .collect::<Result<Vec<_>>>()?;
                let mut g = Self::sum(&gens);
                g.dim_of_parts()?;
                g.desc = desc;
                g
            }
            F::Normalized { of } => {
                let inner = Self::new_unnormalized((**of).clone())?;
                let mut g = match inner.fixed_dim() {
                    Some(n) => inner.normalized(n)?,
                    None => inner,
                };
                g.desc = desc;
                g
            }
        })
    }

    /// The zero generator.
    pub fn trivial() -> Self {
        Generator {
            desc: FamilyDescriptor::Trivial,
            kind: Kind::Trivial,
            curve: Some(Curve::Zero),
        }
    }

    /// Pointwise sum (the dual of infimal convolution). Nested sums are
    /// flattened and trivial parts dropped.
    pub fn sum(parts: &[Generator<T>]) -> Self {
        let mut flat = Vec::new();
        for g in parts {
            match &g.kind {
                Kind::Sum(inner) => flat.extend(inner.iter().cloned()),
                Kind::Trivial => {}
                _ => flat.push(g.clone()),
            }
        }
        match flat.len() {
            0 => Self::trivial(),
            1 => flat.pop().expect("one part"),
            _ => {
                let curve = flat
                    .iter()
                    .map(|g| g.curve.clone())
                    .collect::<Option<Vec<_>>>()
                    .map(Curve::sum);
                Generator {
                    desc: FamilyDescriptor::Sum {
                        parts: flat.iter().map(|g| g.desc.clone()).collect(),
                    },
                    kind: Kind::Sum(flat),
                    curve,
                }
            }
        }
    }

    pub fn descriptor(&self) -> &FamilyDescriptor<T> {
        &self.desc
    }

    /// The two-outcome view `g(p) = G(p, 1−p)`, when the family supports it.
    pub fn curve(&self) -> Option<&Curve<T>> {
        self.curve.as_ref()
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.kind, Kind::Trivial)
    }

    /// The number of outcomes this generator is tied to, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match &self.kind {
            Kind::Curve => Some(2),
            Kind::ConstantProduct { n, .. } => *n,
            Kind::Shifted { offset, .. } => Some(offset.len()),
            Kind::Sum(parts) => parts.iter().find_map(|g| g.fixed_dim()),
            _ => None,
        }
    }

    /// Smallest `n` this generator can be evaluated at.
    fn min_dim(&self) -> usize {
        match &self.kind {
            Kind::Pair { i, j, .. } => i.max(j) + 1,
            Kind::Sum(parts) => parts.iter().map(|g| g.min_dim()).max().unwrap_or(2),
            Kind::Shifted { inner, .. } => inner.min_dim(),
            _ => 2,
        }
    }

    fn dim_of_parts(&self) -> Result<()> {
        if let Kind::Sum(parts) = &self.kind {
            let dims: Vec<usize> = parts.iter().filter_map(|g| g.fixed_dim()).collect();
            if let Some(&d) = dims.first() {
                if let Some(&e) = dims.iter().find(|&&e| e != d) {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: e,
                    });
                }
                if self.min_dim() > d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: self.min_dim(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks that this generator can be evaluated on `Δₙ`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: n,
            });
        }
        if let Some(d) = self.fixed_dim() {
            if d != n {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: n,
                });
            }
        }
        if self.min_dim() > n {
            return Err(Error::DimensionMismatch {
                expected: self.min_dim(),
                found: n,
            });
        }
        Ok(())
    }

    /// Whether `‖∇Ḡ‖` blows up at every boundary face of `Δₙ`.
    pub fn is_pseudobarrier(&self, n: usize) -> bool {
        match &self.kind {
            Kind::Trivial | Kind::Brier { .. } => false,
            Kind::Lmsr { b } => *b > T::zero(),
            Kind::ConstantProduct { alpha, .. } => *alpha > T::zero(),
            Kind::Pair { alpha, .. } => n == 2 && *alpha > T::zero(),
            Kind::Curve => {
                let (lo, hi) = self
                    .curve
                    .as_ref()
                    .map_or((false, false), |c| c.infinite_endpoints());
                lo && hi
            }
            Kind::Sum(parts) => {
                parts.iter().any(|g| g.is_pseudobarrier(n))
                    || (n == 2
                        && self.curve.as_ref().is_some_and(|c| {
                            let (lo, hi) = c.infinite_endpoints();
                            lo && hi
                        }))
            }
            Kind::Shifted { inner, .. } => inner.is_pseudobarrier(n),
        }
    }

    fn curve_p(&self, p: &[T]) -> T {
        debug_assert_eq!(p.len(), 2, "two-outcome family evaluated off Δ₂");
        p[0]
    }

    /// `G(p)`.
    pub fn value(&self, p: &[T]) -> T {
        match &self.kind {
            Kind::Trivial => T::zero(),
            Kind::Lmsr { b } => *b * p.iter().map(|&x| xlogx(x)).sum::<T>(),
            Kind::ConstantProduct { alpha, .. } => {
                let n = lit::<T>(p.len() as f64);
                let prod = p.iter().fold(T::one(), |a, &x| a * x);
                -n * *alpha * pos_root(prod, p.len())
            }
            Kind::Brier { scale } => {
                let nrm: T = p.iter().map(|&x| x * x).sum();
                *scale * lit(0.5) * (nrm - T::one())
            }
            Kind::Pair { i, j, alpha } => {
                -lit::<T>(2.0) * *alpha * (p[*i] * p[*j]).max(T::zero()).sqrt()
            }
            Kind::Curve => self.curve.as_ref().expect("curve kind").g(self.curve_p(p)),
            Kind::Sum(parts) => parts.iter().map(|g| g.value(p)).sum(),
            Kind::Shifted { inner, offset } => {
                inner.value(p) - p.iter().zip(offset).map(|(&a, &b)| a * b).sum::<T>()
            }
        }
    }

    /// `∇Ḡ(p)`, the scoring-rule vector `S_G(p, ·)`. At kinks of two-outcome
    /// curves the midpoint of the subdifferential is used.
    pub fn grad(&self, p: &[T]) -> Result<Vec<T>> {
        let n = p.len();
        Ok(match &self.kind {
            Kind::Trivial => vec![T::zero(); n],
            Kind::Lmsr { b } => p.iter().map(|&x| *b * x.ln()).collect(),
            Kind::ConstantProduct { alpha, .. } => {
                let prod = p.iter().fold(T::one(), |a, &x| a * x);
                let m = pos_root(prod, n);
                p.iter().map(|&x| -*alpha * m / x).collect()
            }
            Kind::Brier { scale } => {
                let nrm: T = p.iter().map(|&x| x * x).sum();
                let half = lit::<T>(0.5);
                p.iter()
                    .map(|&x| *scale * half * (lit::<T>(2.0) * x - nrm - T::one()))
                    .collect()
            }
            Kind::Pair { i, j, alpha } => {
                let mut g = vec![T::zero(); n];
                let (pi, pj) = (p[*i], p[*j]);
                g[*i] = -*alpha * (pj / pi).sqrt();
                g[*j] = -*alpha * (pi / pj).sqrt();
                g
            }
            Kind::Curve => {
                let c = self.curve.as_ref().expect("curve kind");
                let x = self.curve_p(p);
                let l = c.liability(x);
                if !l[0].is_finite() || !l[1].is_finite() {
                    return Err(Error::NoGradient(format!(
                        "{} has no finite gradient at p = {x}",
                        self.desc.name()
                    )));
                }
                l.to_vec()
            }
            Kind::Sum(parts) => {
                let mut acc = vec![T::zero(); n];
                for g in parts {
                    for (a, v) in acc.iter_mut().zip(g.grad(p)?) {
                        *a = *a + v;
                    }
                }
                acc
            }
            Kind::Shifted { inner, offset } => inner
                .grad(p)?
                .into_iter()
                .zip(offset)
                .map(|(a, &b)| a - b)
                .collect(),
        })
    }

    /// `∇²Ḡ(p)` in closed form. Fails at point masses of liquidity.
    pub fn hessian(&self, p: &[T]) -> Result<LiquidityMatrix<T>> {
        let n = p.len();
        Ok(match &self.kind {
            Kind::Trivial => LiquidityMatrix::zeros(n),
            Kind::Lmsr { b } => LiquidityMatrix::from_fn(n, |i, j| {
                if i == j {
                    *b * (T::one() / p[i] - T::one())
                } else {
                    -*b
                }
            }),
            Kind::ConstantProduct { alpha, .. } => {
                let prod = p.iter().fold(T::one(), |a, &x| a * x);
                let m = pos_root(prod, n);
                let nn = lit::<T>(n as f64);
                LiquidityMatrix::from_fn(n, |i, j| {
                    if i == j {
                        *alpha * m * (nn - T::one()) / (nn * p[i] * p[i])
                    } else {
                        -*alpha * m / (nn * p[i] * p[j])
                    }
                })
            }
            Kind::Brier { scale } => {
                let nrm: T = p.iter().map(|&x| x * x).sum();
                LiquidityMatrix::from_fn(n, |i, j| {
                    let d = if i == j { T::one() } else { T::zero() };
                    *scale * (d - p[i] - p[j] + nrm)
                })
            }
            Kind::Pair { i, j, alpha } => {
                let (pi, pj) = (p[*i], p[*j]);
                let half = lit::<T>(0.5);
                let mut h = LiquidityMatrix::zeros(n);
                h.set(*i, *i, *alpha * half * pj.sqrt() / (pi * pi.sqrt()));
                h.set(*j, *j, *alpha * half * pi.sqrt() / (pj * pj.sqrt()));
                let off = -*alpha * half / (pi * pj).sqrt();
                h.set(*i, *j, off);
                h.set(*j, *i, off);
                h
            }
            Kind::Curve => {
                let c = self.curve.as_ref().expect("curve kind");
                let x = self.curve_p(p);
                let s2 = c.second(x).ok_or_else(|| {
                    Error::NoGradient(format!("point mass of liquidity at p = {x}"))
                })?;
                LiquidityMatrix::outer(&[T::one() - x, -x], s2)
            }
            Kind::Sum(parts) => {
                let mut acc = LiquidityMatrix::zeros(n);
                for g in parts {
                    acc.add_assign(&g.hessian(p)?);
                }
                acc
            }
            Kind::Shifted { inner, .. } => inner.hessian(p)?,
        })
    }

    /// `(G(δ¹), …, G(δⁿ))`.
    pub fn vertex_values(&self, n: usize) -> Result<Vec<T>> {
        (0..n)
            .map(|i| {
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                let v = self.value(&e);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::VertexUnbounded(i))
                }
            })
            .collect()
    }

    /// `G̃(p) = G(p) − ⟨p, (G(δ¹), …, G(δⁿ))⟩`: zero at every vertex, same
    /// Hessian. Returns a clone when already normalized.
    pub fn normalized(&self, n: usize) -> Result<Self> {
        self.check_dim(n)?;
        let offset = self.vertex_values(n)?;
        let scale = offset.iter().fold(T::one(), |m, v| m.max(v.abs()));
        if offset.iter().all(|v| v.abs() <= T::tol(1e-14) * scale) {
            return Ok(self.clone());
        }
        let curve = if n == 2 {
            self.curve.as_ref().map(|c| Curve::Tilted {
                inner: Box::new(c.clone()),
                a: offset[1],
                b: offset[0] - offset[1],
            })
        } else {
            None
        };
        Ok(Generator {
            desc: FamilyDescriptor::Normalized {
                of: Box::new(self.desc.clone()),
            },
            kind: Kind::Shifted {
                inner: Box::new(self.clone()),
                offset,
            },
            curve,
        })
    }
}

/// `x^{1/n}` for `x ≥ 0`.
fn pos_root<T: Scalar>(x: T, n: usize) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x.powf(T::one() / lit::<T>(n as f64))
    }
}
