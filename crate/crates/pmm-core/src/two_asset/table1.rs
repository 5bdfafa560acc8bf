//! Closed-form bucket liabilities for three base shapes, and a check against
//! the general construction (restrict the base liquidity to `[a, b]`,
//! renormalize, take `(g + (1−p)g′, g − p g′)`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generators::{BucketCurve, Curve1D, FamilyDescriptor, Generator};
use crate::scalar::Scalar;

/// Base shape whose liquidity is bucketed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketShape {
    /// `g = −2√(p(1−p))`, Uniswap V3 buckets.
    UniswapV3,
    /// `g = p log p + (1−p) log(1−p)`.
    Lmsr,
    /// `g = p² − p`, the Brier score `−(p − y)²`.
    Brier,
}

impl BucketShape {
    pub const ALL: [BucketShape; 3] = [
        BucketShape::UniswapV3,
        BucketShape::Lmsr,
        BucketShape::Brier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BucketShape::UniswapV3 => "uniswap_v3",
            BucketShape::Lmsr => "lmsr",
            BucketShape::Brier => "brier",
        }
    }

    /// The unbucketed base curve.
    pub fn base<T: Scalar>(self) -> Curve1D<T> {
        match self {
            BucketShape::UniswapV3 => Curve1D::Root { alpha: T::one() },
            BucketShape::Lmsr => Curve1D::Entropy { b: T::one() },
            BucketShape::Brier => Generator::new(FamilyDescriptor::Brier { scale: T::one() })
                .expect("unit Brier is valid")
                .curve()
                .expect("Brier has a curve")
                .clone(),
        }
    }
}

/// Where the price sits relative to the bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table1Row {
    Below,
    Inside,
    Above,
}

impl Table1Row {
    pub const ALL: [Table1Row; 3] = [Table1Row::Below, Table1Row::Inside, Table1Row::Above];

    pub fn of<T: Scalar>(a: T, b: T, p: T) -> Self {
        if p < a {
            Table1Row::Below
        } else if p > b {
            Table1Row::Above
        } else {
            Table1Row::Inside
        }
    }
}

/// Liability of weight-`α` liquidity of `shape` on `[a, b]` at price `p`.
pub fn table1_liability<T: Scalar>(shape: BucketShape, alpha: T, a: T, b: T, p: T) -> [T; 2] {
    let one = T::one();
    let r = |x: T| ((one - x) / x).sqrt();
    let s = |x: T| (x / (one - x)).sqrt();
    let sq = |x: T| x * x;
    let z = T::zero();
    let v = match (shape, Table1Row::of(a, b, p)) {
        (BucketShape::UniswapV3, Table1Row::Below) => [r(b) - r(a), z],
        (BucketShape::UniswapV3, Table1Row::Inside) => [r(b) - r(p), s(a) - s(p)],
        (BucketShape::UniswapV3, Table1Row::Above) => [z, s(a) - s(b)],
        (BucketShape::Lmsr, Table1Row::Below) => [(a / b).ln(), z],
        (BucketShape::Lmsr, Table1Row::Inside) => [(p / b).ln(), ((one - p) / (one - a)).ln()],
        (BucketShape::Lmsr, Table1Row::Above) => [z, ((one - b) / (one - a)).ln()],
        (BucketShape::Brier, Table1Row::Below) => [sq(one - b) - sq(one - a), z],
        (BucketShape::Brier, Table1Row::Inside) => [sq(one - b) - sq(one - p), sq(a) - sq(p)],
        (BucketShape::Brier, Table1Row::Above) => [z, sq(a) - sq(b)],
    };
    [alpha * v[0], alpha * v[1]]
}

/// The general construction: the liability of the renormalized bucket curve,
/// together with the score-difference form
/// `(S(max(a,p),1) − S(max(b,p),1), S(min(b,p),0) − S(min(a,p),0))`.
pub fn table1_oracle<T: Scalar>(
    shape: BucketShape,
    alpha: T,
    a: T,
    b: T,
    p: T,
) -> Result<([T; 2], [T; 2])> {
    let bk = BucketCurve::new(shape.base(), a, b, alpha)?;
    let by_scores = bk.liability_by_scores(p);
    let curve = Curve1D::Bucket(Box::new(bk));
    Ok((curve.liability(p), by_scores))
}

/// One compared cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Deviation {
    pub shape: BucketShape,
    pub row: Table1Row,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub deviation: f64,
}

/// Compares every cell at `samples` random `(a, b, p)` triples per cell.
pub fn table1_check(samples: usize, seed: u64) -> Result<Vec<Table1Deviation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(9 * samples);
    for shape in BucketShape::ALL {
        for row in Table1Row::ALL {
            for _ in 0..samples {
                let a: f64 = rng.random_range(0.05..0.85);
                let b: f64 = rng.random_range(a + 0.02..0.95);
                let p: f64 = match row {
                    Table1Row::Below => rng.random_range(0.01..a),
                    Table1Row::Inside => rng.random_range(a..=b),
                    Table1Row::Above => rng.random_range(b..0.99).max(b + 1e-12),
                };
                let alpha: f64 = if shape == BucketShape::Brier {
                    1.0
                } else {
                    rng.random_range(0.5..3.0)
                };
                let closed = table1_liability::<f64>(shape, alpha, a, b, p);
                let (curve, scores) = table1_oracle::<f64>(shape, alpha, a, b, p)?;
                let deviation = (0..2)
                    .map(|k| {
                        (closed[k] - curve[k])
                            .abs()
                            .max((closed[k] - scores[k]).abs())
                    })
                    .fold(0.0, f64::max);
                out.push(Table1Deviation {
                    shape,
                    row,
                    a,
                    b,
                    p,
                    deviation,
                });
            }
        }
    }
    Ok(out)
}

/// `Σⱼ g⁽ʲ⁾` over buckets partitioning `[knots[0], knots[last]]`.
pub fn tiled<T: Scalar>(shape: BucketShape, knots: &[T]) -> Result<Curve1D<T>> {
    let parts = knots
        .windows(2)
        .map(|w| {
            BucketCurve::new(shape.base(), w[0], w[1], T::one())
                .map(|b| Curve1D::Bucket(Box::new(b)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve1D::sum(parts))
}
