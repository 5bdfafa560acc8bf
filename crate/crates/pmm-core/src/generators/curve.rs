//! Two-outcome generating functions `g : [0,1] → ℝ≤0`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

use super::integrated::IntegratedCurve;
use super::piecewise::PiecewiseQuadratic;

/// A convex curve `g` on `[0, 1]` with one-sided slopes and (where finite)
/// second derivative.
#[derive(Clone, Debug, PartialEq)]
pub enum Curve<T> {
    Zero,
    Quadratic(PiecewiseQuadratic<T>),
    /// `b (p log p + (1−p) log(1−p))`.
    Entropy {
        b: T,
    },
    /// `−2α √(p(1−p))`, the constant-product shape.
    Root {
        alpha: T,
    },
    Bucket(Box<BucketCurve<T>>),
    Integrated(IntegratedCurve<T>),
    Sum(Vec<Curve<T>>),
    /// `inner(p) − (a + b p)`.
    Tilted {
        inner: Box<Curve<T>>,
        a: T,
        b: T,
    },
}

/// Base curve restricted to liquidity on `[a, b]`, renormalized and scaled.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketCurve<T> {
    pub base: Curve<T>,
    pub a: T,
    pub b: T,
    pub weight: T,
    ga: T,
    gb: T,
    sa: T,
    sb: T,
    /// `ĝ(1)` for the un-normalized restriction `ĝ`.
    hat1: T,
}

impl<T: Scalar> BucketCurve<T> {
    pub fn new(base: Curve<T>, a: T, b: T, weight: T) -> Result<Self> {
        if !(a >= T::zero() && a < b && b <= T::one()) {
            return Err(Error::InvalidFamily("bucket needs 0 ≤ a < b ≤ 1".into()));
        }
        if !(weight >= T::zero()) || !weight.is_finite() {
            return Err(Error::InvalidFamily("bucket weight must be ≥ 0".into()));
        }
        let (inf_lo, inf_hi) = base.infinite_endpoints();
        if (inf_lo && a == T::zero()) || (inf_hi && b == T::one()) {
            return Err(Error::InvalidFamily(
                "bucket touches an endpoint where the base slope is unbounded".into(),
            ));
        }
        let ga = base.g(a);
        let gb = base.g(b);
        let sa = base.slope_mid(a);
        let sb = base.slope_mid(b);
        let hat1 = (sb - sa) * (T::one() - b) + gb - ga - sa * (b - a);
        Ok(Self {
            base,
            a,
            b,
            weight,
            ga,
            gb,
            sa,
            sb,
            hat1,
        })
    }

    fn hat(&self, p: T) -> T {
        if p < self.a {
            T::zero()
        } else if p <= self.b {
            self.base.g(p) - self.ga - self.sa * (p - self.a)
        } else {
            (self.sb - self.sa) * (p - self.b) + self.gb - self.ga - self.sa * (self.b - self.a)
        }
    }

    fn hat_slope(&self, p: T) -> T {
        if p < self.a {
            T::zero()
        } else if p <= self.b {
            self.base.slope_mid(p) - self.sa
        } else {
            self.sb - self.sa
        }
    }

    pub fn g(&self, p: T) -> T {
        self.weight * (self.hat(p) - p * self.hat1)
    }

    pub fn slope(&self, p: T) -> T {
        self.weight * (self.hat_slope(p) - self.hat1)
    }

    pub fn second(&self, p: T) -> Option<T> {
        if p < self.a || p > self.b {
            Some(T::zero())
        } else if p == self.a || p == self.b {
            self.base.second(p).map(|s| s * self.weight * lit(0.5))
        } else {
            self.base.second(p).map(|s| s * self.weight)
        }
    }

    /// Liability via the scoring-rule differences of the base curve:
    /// `(S(max(a,p),1) − S(max(b,p),1), S(min(b,p),0) − S(min(a,p),0))`.
    pub fn liability_by_scores(&self, p: T) -> [T; 2] {
        let s = |x: T, y: T| self.base.g(x) + self.base.slope_mid(x) * (y - x);
        let w = self.weight;
        [
            w * (s(self.a.max(p), T::one()) - s(self.b.max(p), T::one())),
            w * (s(self.b.min(p), T::zero()) - s(self.a.min(p), T::zero())),
        ]
    }
}

impl<T: Scalar> Curve<T> {
    pub fn g(&self, p: T) -> T {
        match self {
            Curve::Zero => T::zero(),
            Curve::Quadratic(q) => q.g(p),
            Curve::Entropy { b } => {
                let xlx = |x: T| {
                    if x <= T::zero() {
                        T::zero()
                    } else {
                        x * x.ln()
                    }
                };
                *b * (xlx(p) + xlx(T::one() - p))
            }
            Curve::Root { alpha } => {
                let v = p * (T::one() - p);
                if v <= T::zero() {
                    T::zero()
                } else {
                    -lit::<T>(2.0) * *alpha * v.sqrt()
                }
            }
            Curve::Bucket(bk) => bk.g(p),
            Curve::Integrated(c) => c.g(p),
            Curve::Sum(parts) => parts.iter().map(|c| c.g(p)).sum(),
            Curve::Tilted { inner, a, b } => inner.g(p) - *a - *b * p,
        }
    }

    /// One-sided derivatives `(g′(p−), g′(p+))` for `p ∈ (0, 1)`.
    pub fn slopes(&self, p: T) -> (T, T) {
        match self {
            Curve::Zero => (T::zero(), T::zero()),
            Curve::Quadratic(q) => q.slopes(p),
            Curve::Entropy { b } => {
                let s = *b * (p / (T::one() - p)).ln();
                (s, s)
            }
            Curve::Root { alpha } => {
                let s = *alpha * (lit::<T>(2.0) * p - T::one()) / (p * (T::one() - p)).sqrt();
                (s, s)
            }
            Curve::Bucket(bk) => {
                let s = bk.slope(p);
                (s, s)
            }
            Curve::Integrated(c) => {
                let s = c.slope(p);
                (s, s)
            }
            Curve::Sum(parts) => parts.iter().fold((T::zero(), T::zero()), |acc, c| {
                let (l, r) = c.slopes(p);
                (acc.0 + l, acc.1 + r)
            }),
            Curve::Tilted { inner, b, .. } => {
                let (l, r) = inner.slopes(p);
                (l - *b, r - *b)
            }
        }
    }

    /// Midpoint of the subdifferential.
    pub fn slope_mid(&self, p: T) -> T {
        let (l, r) = self.slopes(p);
        (l + r) * lit(0.5)
    }

    /// `g″(p)`, `None` at point masses of liquidity.
    pub fn second(&self, p: T) -> Option<T> {
        match self {
            Curve::Zero => Some(T::zero()),
            Curve::Quadratic(q) => q.second(p),
            Curve::Entropy { b } => Some(*b / (p * (T::one() - p))),
            Curve::Root { alpha } => Some(*alpha * lit(0.5) / (p * (T::one() - p)).powf(lit(1.5))),
            Curve::Bucket(bk) => bk.second(p),
            Curve::Integrated(c) => Some(c.liquidity(p)),
            Curve::Sum(parts) => parts
                .iter()
                .map(|c| c.second(p))
                .try_fold(T::zero(), |acc, s| s.map(|v| acc + v)),
            Curve::Tilted { inner, .. } => inner.second(p),
        }
    }

    /// Whether `g′` is unbounded at 0 and at 1 (liquidity sentinel flags).
    pub fn infinite_endpoints(&self) -> (bool, bool) {
        match self {
            Curve::Entropy { b } => (*b > T::zero(), *b > T::zero()),
            Curve::Root { alpha } => (*alpha > T::zero(), *alpha > T::zero()),
            Curve::Integrated(c) => c.infinite_endpoints(),
            Curve::Sum(parts) => parts.iter().fold((false, false), |acc, c| {
                let (l, r) = c.infinite_endpoints();
                (acc.0 || l, acc.1 || r)
            }),
            Curve::Tilted { inner, .. } => inner.infinite_endpoints(),
            Curve::Zero | Curve::Quadratic(_) | Curve::Bucket(_) => (false, false),
        }
    }

    /// Liability `S_g(p,·) = (g + (1−p)s, g − p s)` for a chosen subgradient `s`.
    pub fn liability_with_slope(&self, p: T, s: T) -> [T; 2] {
        let g = self.g(p);
        [g + (T::one() - p) * s, g - p * s]
    }

    /// Liability at `p` using the midpoint subgradient.
    pub fn liability(&self, p: T) -> [T; 2] {
        self.liability_with_slope(p, self.slope_mid(p))
    }

    /// Flattens nested sums and drops zero curves.
    pub fn sum(parts: Vec<Curve<T>>) -> Curve<T> {
        let mut flat = Vec::new();
        for c in parts {
            match c {
                Curve::Sum(inner) => flat.extend(inner),
                Curve::Zero => {}
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Curve::Zero,
            1 => flat.pop().expect("one element"),
            _ => Curve::Sum(flat),
        }
    }

    /// When every summand is piecewise quadratic, the merged representation.
    pub fn as_quadratic(&self) -> Option<PiecewiseQuadratic<T>> {
        match self {
            Curve::Quadratic(q) => Some(q.clone()),
            Curve::Zero => {
                PiecewiseQuadratic::new(vec![T::zero(), T::one()], vec![[T::zero(); 3]]).ok()
            }
            Curve::Sum(parts) => {
                let qs: Option<Vec<PiecewiseQuadratic<T>>> =
                    parts.iter().map(|c| c.as_quadratic()).collect();
                let qs = qs?;
                let refs: Vec<&PiecewiseQuadratic<T>> = qs.iter().collect();
                Some(PiecewiseQuadratic::sum(&refs))
            }
            Curve::Tilted { inner, a, b } => inner.as_quadratic().map(|q| q.minus_affine(*a, *b)),
            _ => None,
        }
    }
}
