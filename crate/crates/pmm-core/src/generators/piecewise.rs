//! Piecewise-quadratic curves on `[0, 1]`, piecewise-constant liquidity with
//! point masses, the closed-form double integral between the two, and the
//! closed-form Legendre transform of a piecewise-quadratic curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// `g(p) = c₀ + c₁p + c₂p²` on each interval `[knots[i], knots[i+1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PiecewiseQuadratic<T> {
    knots: Vec<T>,
    coeffs: Vec<[T; 3]>,
}

/// Liquidity `ℓ` as a step function plus Dirac masses: `levels[i]` on
/// `[knots[i], knots[i+1]]` and `atoms` as `(location, mass)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StepProfile<T> {
    pub knots: Vec<T>,
    pub levels: Vec<T>,
    pub atoms: Vec<(T, T)>,
}

fn check_knots<T: Scalar>(knots: &[T], what: &str) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::InvalidFamily(format!(
            "{what}: need at least two knots"
        )));
    }
    if knots[0] != T::zero() || knots[knots.len() - 1] != T::one() {
        return Err(Error::InvalidFamily(format!(
            "{what}: knots must run from 0 to 1"
        )));
    }
    if knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidFamily(format!(
            "{what}: knots must be strictly increasing"
        )));
    }
    Ok(())
}

impl<T: Scalar> PiecewiseQuadratic<T> {
    /// Builds and validates continuity and convexity. Sign is not checked here;
    /// see [`PiecewiseQuadratic::is_nonpositive`].
    pub fn new(knots: Vec<T>, coeffs: Vec<[T; 3]>) -> Result<Self> {
        check_knots(&knots, "piecewise quadratic")?;
        if coeffs.len() + 1 != knots.len() {
            return Err(Error::InvalidFamily(
                "piecewise quadratic: need one coefficient triple per interval".into(),
            ));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFamily(
                "piecewise quadratic: non-finite coefficient".into(),
            ));
        }
        let q = Self { knots, coeffs };
        let scale = q
            .coeffs
            .iter()
            .flatten()
            .fold(T::one(), |m, c| m.max(c.abs()));
        let tol = T::tol(1e-9) * scale;
        for (i, c) in q.coeffs.iter().enumerate() {
            if c[2] < -tol {
                return Err(Error::InvalidFamily(format!(
                    "piecewise quadratic: piece {i} is concave"
                )));
            }
        }
        for i in 1..q.coeffs.len() {
            let k = q.knots[i];
            let left = q.eval_piece(i - 1, k);
            let right = q.eval_piece(i, k);
            if (left - right).abs() > tol {
                return Err(Error::InvalidFamily(format!(
                    "piecewise quadratic: discontinuous at knot {}",
                    k.to_f64_lossy()
                )));
            }
            if q.slope_piece(i, k) < q.slope_piece(i - 1, k) - tol {
                return Err(Error::InvalidFamily(format!(
                    "piecewise quadratic: slope decreases at knot {}",
                    k.to_f64_lossy()
                )));
            }
        }
        Ok(q)
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn coeffs(&self) -> &[[T; 3]] {
        &self.coeffs
    }

    fn eval_piece(&self, i: usize, p: T) -> T {
        let c = self.coeffs[i];
        c[0] + p * (c[1] + p * c[2])
    }

    fn slope_piece(&self, i: usize, p: T) -> T {
        let c = self.coeffs[i];
        c[1] + lit::<T>(2.0) * c[2] * p
    }

    /// Index of the interval containing `p`; knots belong to the right piece.
    fn piece(&self, p: T) -> usize {
        let m = self.coeffs.len();
        let idx = self.knots.partition_point(|&k| k <= p);
        idx.saturating_sub(1).min(m - 1)
    }

    /// Whether `p` sits exactly on an interior knot; returns the knot index.
    fn interior_knot(&self, p: T) -> Option<usize> {
        let i = self.piece(p);
        (i > 0 && self.knots[i] == p).then_some(i)
    }

    pub fn g(&self, p: T) -> T {
        self.eval_piece(self.piece(p), p)
    }

    /// One-sided derivatives `(g′(p−), g′(p+))`.
    pub fn slopes(&self, p: T) -> (T, T) {
        match self.interior_knot(p) {
            Some(i) => (self.slope_piece(i - 1, p), self.slope_piece(i, p)),
            None => {
                let s = self.slope_piece(self.piece(p), p);
                (s, s)
            }
        }
    }

    /// `g″(p)`, or `None` where the slope jumps (a point mass of liquidity).
    /// At a knot without a slope jump the two one-sided values are averaged.
    pub fn second(&self, p: T) -> Option<T> {
        let two = lit::<T>(2.0);
        match self.interior_knot(p) {
            Some(i) => {
                let (l, r) = self.slopes(p);
                let scale = l.abs().max(r.abs()).max(T::one());
                if r - l > T::tol(1e-12) * scale {
                    None
                } else {
                    Some(self.coeffs[i - 1][2] + self.coeffs[i][2])
                }
            }
            None => Some(two * self.coeffs[self.piece(p)][2]),
        }
    }

    /// Convex functions attain their maximum at an endpoint, so this is an
    /// exact check of `g ≤ 0` on `[0, 1]`.
    pub fn is_nonpositive(&self, tol: T) -> bool {
        self.g(T::zero()) <= tol && self.g(T::one()) <= tol
    }

    /// `g(p) − (a + b p)`.
    pub fn minus_affine(&self, a: T, b: T) -> Self {
        Self {
            knots: self.knots.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|c| [c[0] - a, c[1] - b, c[2]])
                .collect(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            knots: self.knots.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|c| [c[0] * s, c[1] * s, c[2] * s])
                .collect(),
        }
    }

    /// Pointwise sum over the union of all knots.
    pub fn sum(parts: &[&Self]) -> Self {
        let mut knots: Vec<T> = parts.iter().flat_map(|q| q.knots.iter().copied()).collect();
        knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
        knots.dedup();
        let half = lit::<T>(0.5);
        let coeffs = knots
            .windows(2)
            .map(|w| {
                let mid = (w[0] + w[1]) * half;
                let mut acc = [T::zero(); 3];
                for q in parts {
                    let c = q.coeffs[q.piece(mid)];
                    for k in 0..3 {
                        acc[k] = acc[k] + c[k];
                    }
                }
                acc
            })
            .collect();
        Self { knots, coeffs }
    }

    /// Recovers `ℓ = g″` as levels plus point masses at slope jumps.
    pub fn liquidity_profile(&self) -> StepProfile<T> {
        let two = lit::<T>(2.0);
        let levels = self.coeffs.iter().map(|c| two * c[2]).collect();
        let mut atoms = Vec::new();
        for i in 1..self.coeffs.len() {
            let k = self.knots[i];
            let jump = self.slope_piece(i, k) - self.slope_piece(i - 1, k);
            if jump > T::zero() {
                atoms.push((k, jump));
            }
        }
        StepProfile {
            knots: self.knots.clone(),
            levels,
            atoms,
        }
    }

    /// Closed-form convex conjugate `c(z) = sup_p (p z − g(p))`.
    pub fn conjugate(&self) -> PiecewiseConjugate<T> {
        let two = lit::<T>(2.0);
        let four = lit::<T>(4.0);
        let m = self.coeffs.len();
        // Pieces of c as (z-interval start, polynomial in z, maximizer rule).
        let mut breaks: Vec<T> = Vec::new();
        let mut polys: Vec<[T; 3]> = Vec::new();
        let mut argmax: Vec<ArgMax<T>> = Vec::new();
        let g0 = self.g(T::zero());
        let g1 = self.g(T::one());
        // z below every slope: maximizer at p = 0.
        polys.push([-g0, T::zero(), T::zero()]);
        argmax.push(ArgMax::Point(T::zero()));
        for i in 0..m {
            let u = self.knots[i];
            if i > 0 {
                // Kink at knot u: maximizer sits at u for z across the jump.
                let sl = self.slope_piece(i - 1, u);
                let sr = self.slope_piece(i, u);
                if sr > sl {
                    breaks.push(sl);
                    polys.push([-self.g(u), u, T::zero()]);
                    argmax.push(ArgMax::Point(u));
                }
            }
            let c = self.coeffs[i];
            if c[2] > T::zero() {
                let su = self.slope_piece(i, u);
                breaks.push(su);
                let inv = T::one() / (four * c[2]);
                polys.push([c[1] * c[1] * inv - c[0], -two * c[1] * inv, inv]);
                argmax.push(ArgMax::Affine {
                    offset: -c[1] / (two * c[2]),
                    slope: T::one() / (two * c[2]),
                });
            }
            // Flat slopes (c₂ = 0) occupy a single z value: a kink of c.
        }
        breaks.push(self.slope_piece(m - 1, T::one()));
        polys.push([-g1, T::one(), T::zero()]);
        argmax.push(ArgMax::Point(T::one()));
        // Drop zero-width pieces created by coincident breaks so the break
        // list stays strictly increasing.
        let mut pc = PiecewiseConjugate {
            breaks: Vec::new(),
            polys: vec![polys[0]],
            argmax: vec![argmax[0]],
        };
        for k in 0..breaks.len() {
            let b = breaks[k];
            if let Some(&last) = pc.breaks.last() {
                if !(b > last) {
                    // Replace the zero-width piece with the later one.
                    let n = pc.polys.len();
                    pc.polys[n - 1] = polys[k + 1];
                    pc.argmax[n - 1] = argmax[k + 1];
                    continue;
                }
            }
            pc.breaks.push(b);
            pc.polys.push(polys[k + 1]);
            pc.argmax.push(argmax[k + 1]);
        }
        pc
    }
}

impl<T: Scalar> StepProfile<T> {
    pub fn new(knots: Vec<T>, levels: Vec<T>, atoms: Vec<(T, T)>) -> Result<Self> {
        check_knots(&knots, "liquidity profile")?;
        if levels.len() + 1 != knots.len() {
            return Err(Error::InvalidFamily(
                "liquidity profile: need one level per interval".into(),
            ));
        }
        if levels.iter().any(|l| !l.is_finite() || *l < T::zero()) {
            return Err(Error::InvalidFamily(
                "liquidity must be finite and nonnegative".into(),
            ));
        }
        for &(a, w) in &atoms {
            if !(a > T::zero() && a < T::one()) || !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidFamily(
                    "point masses need 0<a<1 and mass ≥ 0".into(),
                ));
            }
        }
        Ok(Self {
            knots,
            levels,
            atoms,
        })
    }

    /// Liquidity at `p` away from atoms (right-continuous at knots).
    pub fn level_at(&self, p: T) -> T {
        let idx = self.knots.partition_point(|&k| k <= p);
        self.levels[idx.saturating_sub(1).min(self.levels.len() - 1)]
    }
}

/// Closed-form double integral: the normalized generator whose second
/// derivative is the given step-plus-atoms liquidity.
///
/// Uses the Green's-function form of the double integral,
/// `g(p) = −[(1−p)∫₀ᵖ sℓ(s)ds + p∫ₚ¹(1−s)ℓ(s)ds]`, which expands the nested
/// integral and subtracts the chord in one step.
pub fn quadratic_from_profile<T: Scalar>(prof: &StepProfile<T>) -> PiecewiseQuadratic<T> {
    let half = lit::<T>(0.5);
    let mut knots: Vec<T> = prof.knots.clone();
    knots.extend(prof.atoms.iter().map(|a| a.0));
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    knots.dedup();
    let coeffs = knots
        .windows(2)
        .map(|w| {
            let mid = (w[0] + w[1]) * half;
            let mut c = [T::zero(); 3];
            for (i, &l) in prof.levels.iter().enumerate() {
                if l == T::zero() {
                    continue;
                }
                let (u, v) = (prof.knots[i], prof.knots[i + 1]);
                if mid >= v {
                    // Source interval lies left of p: −L(1−p)∫ᵤᵛ s ds.
                    let i0 = (v * v - u * u) * half;
                    c[0] = c[0] - l * i0;
                    c[1] = c[1] + l * i0;
                } else if mid <= u {
                    // Source interval lies right of p: −L p ∫ᵤᵛ (1−s) ds.
                    let i1 = (v - u) - (v * v - u * u) * half;
                    c[1] = c[1] - l * i1;
                } else {
                    c[0] = c[0] + l * u * u * half;
                    c[1] = c[1] - l * (u * u * half + v - v * v * half);
                    c[2] = c[2] + l * half;
                }
            }
            for &(a, w_) in &prof.atoms {
                if mid < a {
                    c[1] = c[1] - w_ * (T::one() - a);
                } else {
                    c[0] = c[0] - w_ * a;
                    c[1] = c[1] + w_ * a;
                }
            }
            c
        })
        .collect();
    PiecewiseQuadratic { knots, coeffs }
}

/// Which price attains the supremum on a piece of the conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum ArgMax<T> {
    Point(T),
    Affine { offset: T, slope: T },
}

/// Piecewise (at most quadratic) conjugate in the coordinate `z = q₁ − q₂`.
/// `polys[i]` applies between `breaks[i-1]` and `breaks[i]`; the first and
/// last pieces extend without bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PiecewiseConjugate<T> {
    pub breaks: Vec<T>,
    pub polys: Vec<[T; 3]>,
    pub argmax: Vec<ArgMax<T>>,
}

impl<T: Scalar> PiecewiseConjugate<T> {
    fn piece(&self, z: T) -> usize {
        self.breaks.partition_point(|&b| b <= z)
    }

    pub fn value(&self, z: T) -> T {
        let c = self.polys[self.piece(z)];
        c[0] + z * (c[1] + z * c[2])
    }

    /// The maximizing price for `z`; ties on a kink of `c` resolve low.
    pub fn maximizer(&self, z: T) -> T {
        match self.argmax[self.piece(z)] {
            ArgMax::Point(p) => p,
            ArgMax::Affine { offset, slope } => offset + slope * z,
        }
    }
}
