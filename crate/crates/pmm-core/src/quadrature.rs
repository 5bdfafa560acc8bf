//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut kron = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for k in 0..7 {
        let dx = h * lit(XGK[k]);
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * lit(WGK[k]);
        if k % 2 == 1 {
            gauss = gauss + s * lit(WG[k / 2]);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol` or relative
/// tolerance `rel_tol`, whichever is looser, by global interval bisection.
pub fn integrate<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T, abs_tol: T, rel_tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    const MAX_INTERVALS: usize = 4000;
    let (v0, e0) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if intervals.len() >= MAX_INTERVALS || !total.is_finite() {
            return Err(Error::DivergentIntegral {
                lo: a.to_f64_lossy(),
                hi: b.to_f64_lossy(),
            });
        }
        let (worst, _) =
            intervals
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |acc, (i, iv)| {
                    if iv.3 > acc.1 {
                        (i, iv.3)
                    } else {
                        acc
                    }
                });
        let (lo, hi, v, e) = intervals.swap_remove(worst);
        let mid = (lo + hi) * lit(0.5);
        if !(mid > lo && mid < hi) {
            // Interval can no longer be split at this precision.
            intervals.push((lo, hi, v, T::zero()));
            err = err - e;
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total = total - v + v1 + v2;
        err = err - e + e1 + e2;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // Re-sum to shed accumulated cancellation error.
    Ok(intervals.iter().map(|iv| iv.2).sum())
}
