//! Maximizers of `p ↦ ⟨p, q⟩ − G(p)` over the simplex.
//!
//! Two outcomes use bisection on the right derivative of `g`. Larger
//! simplices use exponentiated-gradient ascent with backtracking, accelerated
//! by Newton steps on the bordered KKT system whenever the Hessian is
//! available and the step reduces the stationarity residual.

use crate::error::{Error, Result};
use crate::generators::{Curve, Generator};
use crate::scalar::{lit, Scalar};
use crate::simplex::solve_dense;

/// Result of a simplex maximization.
#[derive(Clone, Debug, PartialEq)]
pub struct Maximizer<T> {
    /// Maximizing price, clamped to `[ε, 1−ε]` when `boundary` is set.
    pub p: Vec<T>,
    /// `sup_p ⟨p, q⟩ − G(p)`.
    pub cost: T,
    /// Whether the supremum sits on (or within `ε` of) the boundary.
    pub boundary: bool,
    pub iterations: usize,
}

/// Smallest `p ∈ [ε, 1−ε]` with `g′(p+) ≥ z`. Flat regions of `g′` resolve to
/// their lower end and jumps of `g′` to the jump location.
pub fn solve_binary<T: Scalar>(c: &Curve<T>, z: T, eps: T) -> (T, bool) {
    let mut lo = eps;
    let mut hi = T::one() - eps;
    let pred = |p: T| c.slopes(p).1 >= z;
    if pred(lo) {
        return (lo, true);
    }
    if !pred(hi) {
        return (hi, true);
    }
    let half = lit::<T>(0.5);
    for _ in 0..400 {
        let mid = lo + (hi - lo) * half;
        if !(mid > lo && mid < hi) {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi, false)
}

pub(crate) fn maximize_binary<T: Scalar>(c: &Curve<T>, q: &[T], eps: T) -> Maximizer<T> {
    let z = q[0] - q[1];
    let (p, boundary) = solve_binary(c, z, eps);
    let obj = |x: T| q[1] + x * z - c.g(x);
    let cost = if boundary {
        // The supremum of a concave function clamped away from an endpoint
        // is attained at that endpoint.
        let end = if p < lit(0.5) { T::zero() } else { T::one() };
        obj(end).max(obj(p))
    } else {
        obj(p)
    };
    Maximizer {
        p: vec![p, T::one() - p],
        cost,
        boundary,
        iterations: 0,
    }
}

fn objective<T: Scalar>(g: &Generator<T>, q: &[T], p: &[T]) -> T {
    p.iter().zip(q).map(|(&a, &b)| a * b).sum::<T>() - g.value(p)
}

/// Ascent direction `d = q − ∇Ḡ(p)`, its `p`-weighted mean, and the
/// stationarity residual `‖p ⊙ (d − ⟨p, d⟩)‖`.
fn direction<T: Scalar>(g: &Generator<T>, q: &[T], p: &[T]) -> Option<(Vec<T>, T, T)> {
    let grad = g.grad(p).ok()?;
    let d: Vec<T> = q.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let m: T = p.iter().zip(&d).map(|(&a, &b)| a * b).sum();
    let r = p
        .iter()
        .zip(&d)
        .map(|(&a, &b)| {
            let t = a * (b - m);
            t * t
        })
        .sum::<T>()
        .sqrt();
    Some((d, m, r))
}

fn renormalize<T: Scalar>(v: &mut [T]) {
    let s: T = v.iter().copied().sum();
    for x in v.iter_mut() {
        *x = *x / s;
    }
}

/// Newton direction on the tangent space: `[H 1; 1ᵀ 0][Δ; λ] = [d; 0]`.
fn newton_direction<T: Scalar>(g: &Generator<T>, p: &[T], d: &[T]) -> Option<Vec<T>> {
    let h = g.hessian(p).ok()?;
    let n = p.len();
    let m = n + 1;
    let scale = h.max_abs().max(T::one());
    for attempt in 0..3 {
        let reg = if attempt == 0 {
            T::zero()
        } else {
            scale * T::epsilon() * lit(1e4_f64.powi(attempt))
        };
        let mut a = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                a[i * m + j] = h.get(i, j);
            }
            a[i * m + i] = a[i * m + i] + reg;
            a[i * m + n] = T::one();
            a[n * m + i] = T::one();
        }
        let mut b = d.to_vec();
        b.push(T::zero());
        if let Some(x) = solve_dense(a, b, scale * T::epsilon() * lit(16.0)) {
            let dx: Vec<T> = x[..n].to_vec();
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
    }
    None
}

/// Maximizes `⟨p, q⟩ − G(p)` on `Δₙ` for `n ≥ 2` without using a curve view.
pub(crate) fn maximize_simplex<T: Scalar>(
    g: &Generator<T>,
    q: &[T],
    warm: Option<&[T]>,
    eps: T,
    tol: T,
    max_iter: usize,
) -> Result<Maximizer<T>> {
    let n = q.len();
    let qscale = q.iter().fold(T::one(), |m, x| m.max(x.abs()));
    let tol = tol.max(T::tol(1e-10)) * qscale;
    let mut p: Vec<T> = match warm {
        Some(w) if w.len() == n && w.iter().all(|x| *x > T::zero()) => {
            let mut v = w.to_vec();
            renormalize(&mut v);
            v
        }
        _ => vec![T::one() / lit::<T>(n as f64); n],
    };
    let (mut d, mut m, mut r) = direction(g, q, &p).ok_or_else(|| {
        Error::NoGradient(format!("{} at the starting point", g.descriptor().name()))
    })?;
    let mut f = objective(g, q, &p);
    let mut eta = T::one() / (d.iter().fold(T::zero(), |a, x| a.max((*x - m).abs())) + T::one());
    let tiny = T::min_positive_value().sqrt();
    let mut it = 0;
    let mut boundary = false;
    while it < max_iter {
        if r <= tol {
            break;
        }
        if p.iter().any(|&x| x < eps) {
            boundary = true;
            break;
        }
        it += 1;
        let mut stepped = false;
        if let Some(dx) = newton_direction(g, &p, &d) {
            let mut t = T::one();
            for _ in 0..40 {
                let mut pn: Vec<T> = p.iter().zip(&dx).map(|(&a, &b)| a + t * b).collect();
                if pn.iter().all(|&x| x > tiny) {
                    renormalize(&mut pn);
                    if let Some((dn, mn, rn)) = direction(g, q, &pn) {
                        let fnew = objective(g, q, &pn);
                        let slack = T::epsilon() * lit::<T>(64.0) * (f.abs() + T::one());
                        if rn < r && fnew >= f - slack {
                            p = pn;
                            d = dn;
                            m = mn;
                            r = rn;
                            f = fnew;
                            stepped = true;
                            break;
                        }
                    }
                }
                t = t * lit(0.5);
            }
        }
        if stepped {
            continue;
        }
        // Exponentiated-gradient step with backtracking on the objective.
        let mut accepted = false;
        while eta > T::min_positive_value() {
            let expo: Vec<T> = d.iter().map(|&x| eta * (x - m)).collect();
            let emax = expo.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut pn: Vec<T> = p
                .iter()
                .zip(&expo)
                .map(|(&a, &e)| a * (e - emax).exp())
                .collect();
            renormalize(&mut pn);
            if pn.iter().all(|&x| x > T::zero()) {
                let fnew = objective(g, q, &pn);
                if fnew > f {
                    if let Some((dn, mn, rn)) = direction(g, q, &pn) {
                        p = pn;
                        d = dn;
                        m = mn;
                        r = rn;
                        f = fnew;
                        accepted = true;
                        eta = eta * lit(2.0);
                        break;
                    }
                }
            }
            eta = eta * lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    if !boundary && p.iter().any(|&x| x < eps) {
        boundary = true;
    }
    // Floating-point stall close to the optimum still counts as converged.
    if !boundary && r > tol * lit(1e3) {
        return Err(Error::SolverDiverged {
            iterations: it,
            residual: r.to_f64_lossy(),
        });
    }
    if boundary {
        for x in p.iter_mut() {
            *x = x.max(eps);
        }
        renormalize(&mut p);
    }
    Ok(Maximizer {
        p,
        cost: f,
        boundary,
        iterations: it,
    })
}
