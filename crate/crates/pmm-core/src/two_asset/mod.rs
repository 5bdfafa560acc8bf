//! Two outcomes in closed form: liabilities from `(g, g′)`, prices by
//! inverting `g′`, the two-asset protocol over curves, and the DeFi
//! reductions (Uniswap V2/V3, bucketed shapes, soft buckets and the
//! piecewise-linear maker).

pub mod piecewise_linear;
pub mod table1;
pub mod v2;
pub mod v3;

pub use crate::generators::soft_bucket_curve;
pub use piecewise_linear::{PiecewiseLinearState, PlFill, PlReceipt};
pub use table1::{
    table1_check, table1_liability, table1_oracle, BucketShape, Table1Deviation, Table1Row,
};
pub use v2::{UniswapV2Market, V2Receipt};
pub use v3::{UniswapV3Market, V3Receipt};

use crate::convex::{common_fill, solve_binary};
use crate::engine::{
    compute_fees, EngineConfig, FeeLedger, FeeScheme, LpRecord, MarketState, Mode, TradeReceipt,
};
use crate::error::{Error, Result};
use crate::generators::{BucketCurve, Curve1D, FamilyDescriptor, Generator};
use crate::scalar::Scalar;
use crate::simplex::{LiabilityVector, SimplexPrice, DEFAULT_EPS};

fn check_interior<T: Scalar>(p: T, eps: T) -> Result<()> {
    if p >= eps && p <= T::one() - eps {
        Ok(())
    } else {
        Err(Error::BoundaryPrice {
            index: 0,
            value: p.to_f64_lossy(),
        })
    }
}

/// `S_g(p, ·) = (g + (1−p)g′, g − p·g′)`, midpoint subgradient at kinks.
pub fn liability2<T: Scalar>(g: &Curve1D<T>, p: T) -> Result<[T; 2]> {
    check_interior(p, T::lit(DEFAULT_EPS))?;
    Ok(g.liability(p))
}

/// `(g′)⁻¹(q₁ − q₂)`: the smallest `p` with `g′(p+) ≥ q₁ − q₂`. Jumps of `g′`
/// resolve to the jump location, flat stretches to their lower end.
pub fn price2<T: Scalar>(g: &Curve1D<T>, q: [T; 2]) -> Result<T> {
    let z = q[0] - q[1];
    let (p, boundary) = solve_binary(g, z, T::lit(DEFAULT_EPS));
    if boundary {
        return Err(Error::OutOfRange(format!(
            "q₁ − q₂ = {} is outside the slope range of g (liquidity exhausted)",
            z.to_f64_lossy()
        )));
    }
    Ok(p)
}

/// The base shape's liquidity restricted to `[a, b]`, scaled by `weight`
/// and renormalized so `g(0) = g(1) = 0`.
pub fn bucket_curve<T: Scalar>(base: Curve1D<T>, a: T, b: T, weight: T) -> Result<Curve1D<T>> {
    if !(a > T::zero() && a < b && b < T::one()) {
        return Err(Error::InvalidFamily("bucket needs 0 < a < b < 1".into()));
    }
    Ok(Curve1D::Bucket(Box::new(BucketCurve::new(
        base, a, b, weight,
    )?)))
}

/// The two-outcome curve of a family descriptor.
pub fn curve_of<T: Scalar>(desc: &FamilyDescriptor<T>) -> Result<Curve1D<T>> {
    let g = Generator::new(desc.clone())?.normalized(2)?;
    g.curve().cloned().ok_or_else(|| {
        Error::UnsupportedFamily(format!("{} has no two-outcome curve", desc.name()))
    })
}

/// The two-asset protocol over curves: per-LP `(gᵢ, qⁱ)`, prices by
/// inverting the aggregate slope.
#[derive(Clone, Debug)]
pub struct TwoAssetMarket<T> {
    generators: Vec<Generator<T>>,
    q: Vec<[T; 2]>,
    price: T,
    fees: FeeLedger<T>,
    config: EngineConfig<T>,
}

fn lv<T: Scalar>(v: [T; 2]) -> LiabilityVector<T> {
    LiabilityVector::new(v.to_vec())
}

fn prepare<T: Scalar>(desc: FamilyDescriptor<T>) -> Result<Generator<T>> {
    let g = Generator::new(desc)?;
    g.check_dim(2)?;
    let g = g.normalized(2)?;
    if g.curve().is_none() {
        return Err(Error::UnsupportedFamily(format!(
            "{} has no two-outcome curve",
            g.descriptor().name()
        )));
    }
    Ok(g)
}

impl<T: Scalar> TwoAssetMarket<T> {
    pub fn initialize(
        q0: [T; 2],
        g0: FamilyDescriptor<T>,
        scheme: FeeScheme<T>,
        config: EngineConfig<T>,
    ) -> Result<Self> {
        let g = prepare(g0)?;
        if g.is_trivial() {
            return Err(Error::InvalidFamily(
                "the market creator needs a nontrivial generator".into(),
            ));
        }
        if config.mode == Mode::Strict && !g.is_pseudobarrier(2) {
            return Err(Error::NotPseudobarrier);
        }
        let c = g.curve().expect("checked");
        let p = price2(c, q0)?;
        let (lo, hi) = c.slopes(p);
        let z = q0[0] - q0[1];
        let expect = c.liability_with_slope(p, z.max(lo).min(hi));
        let dev = (expect[0] - q0[0]).abs().max((expect[1] - q0[1]).abs());
        if !(dev <= config.level_tol * (T::one() + q0[0].abs().max(q0[1].abs()))) {
            return Err(Error::LiabilityMismatch {
                deviation: dev.to_f64_lossy(),
            });
        }
        let mut fees = FeeLedger::new(scheme, 2);
        fees.open(2);
        Ok(Self {
            generators: vec![g],
            q: vec![q0],
            price: p,
            fees,
            config,
        })
    }

    pub fn price(&self) -> T {
        self.price
    }

    pub fn liabilities(&self) -> &[[T; 2]] {
        &self.q
    }

    pub fn fees(&self) -> &FeeLedger<T> {
        &self.fees
    }

    pub fn register_lp(&mut self) -> usize {
        self.generators.push(Generator::trivial());
        self.q.push([T::zero(); 2]);
        self.fees.open(2);
        self.q.len() - 1
    }

    /// Installs `desc` for LP `i` at the current price; returns the bundle the
    /// LP hands over.
    pub fn modify_liquidity(&mut self, i: usize, desc: FamilyDescriptor<T>) -> Result<[T; 2]> {
        if i >= self.q.len() {
            return Err(Error::UnknownLp(i));
        }
        let g = prepare(desc)?;
        let target = liability2(g.curve().expect("checked"), self.price)?;
        let dep = [self.q[i][0] - target[0], self.q[i][1] - target[1]];
        self.q[i] = target;
        self.generators[i] = g;
        Ok(dep)
    }

    fn aggregate(&self) -> Curve1D<T> {
        Curve1D::sum(
            self.generators
                .iter()
                .map(|g| g.curve().expect("checked").clone())
                .collect(),
        )
    }

    fn total(&self) -> [T; 2] {
        self.q
            .iter()
            .fold([T::zero(); 2], |a, q| [a[0] + q[0], a[1] + q[1]])
    }

    pub fn execute_trade(&mut self, r: [T; 2]) -> Result<TradeReceipt<T>> {
        let q = self.total();
        let qn = [q[0] + r[0], q[1] + r[1]];
        let agg = self.aggregate();
        if r[0] == T::zero() && r[1] == T::zero() {
            return self.apply(r, self.price, self.q.clone());
        }
        let p = price2(&agg, qn)?;
        check_interior(p, self.config.kernel.eps)?;
        let z = qn[0] - qn[1];
        let slopes: Vec<(T, T)> = self
            .generators
            .iter()
            .map(|g| g.curve().expect("checked").slopes(p))
            .collect();
        let (lo, hi) = slopes
            .iter()
            .fold((T::zero(), T::zero()), |a, s| (a.0 + s.0, a.1 + s.1));
        let expect = agg.liability_with_slope(p, z.max(lo).min(hi));
        let dev = (expect[0] - qn[0]).abs().max((expect[1] - qn[1]).abs());
        if !(dev <= self.config.level_tol * (T::one() + qn[0].abs().max(qn[1].abs()))) {
            return Err(Error::NotLevelSet {
                deviation: dev.to_f64_lossy(),
            });
        }
        let theta = common_fill(&slopes, z);
        let targets = self
            .generators
            .iter()
            .zip(&slopes)
            .map(|(g, &(lo, hi))| {
                let s = if hi > lo { lo + theta * (hi - lo) } else { lo };
                g.curve().expect("checked").liability_with_slope(p, s)
            })
            .collect();
        self.apply(r, p, targets)
    }

    pub fn execute_trade_to_price(&mut self, p: T) -> Result<TradeReceipt<T>> {
        check_interior(p, self.config.kernel.eps)?;
        let targets: Vec<[T; 2]> = self
            .generators
            .iter()
            .map(|g| g.curve().expect("checked").liability(p))
            .collect();
        let q = self.total();
        let t = targets
            .iter()
            .fold([T::zero(); 2], |a, q| [a[0] + q[0], a[1] + q[1]]);
        self.apply([t[0] - q[0], t[1] - q[1]], p, targets)
    }

    fn apply(&mut self, r: [T; 2], p: T, targets: Vec<[T; 2]>) -> Result<TradeReceipt<T>> {
        let mut parts: Vec<LiabilityVector<T>> = self
            .q
            .iter()
            .zip(&targets)
            .map(|(q, t)| lv([t[0] - q[0], t[1] - q[1]]))
            .collect();
        let rv = lv(r);
        let resid = &rv - &LiabilityVector::sum_of(2, parts.iter());
        let absorb = self
            .generators
            .iter()
            .position(|g| !g.is_trivial())
            .unwrap_or(0);
        parts[absorb] += &resid;
        let charge = compute_fees(&self.fees.scheme, &rv, &parts);
        self.fees.record(&charge);
        for (q, part) in self.q.iter_mut().zip(&parts) {
            *q = [q[0] + part[0], q[1] + part[1]];
        }
        let before = std::mem::replace(&mut self.price, p);
        Ok(TradeReceipt {
            r: rv,
            parts,
            price_before: SimplexPrice::binary(before)?,
            price_after: SimplexPrice::binary(p)?,
            fees: charge,
        })
    }

    /// The same state as an engine snapshot.
    pub fn snapshot(&self) -> Result<MarketState<T>> {
        Ok(MarketState {
            n: 2,
            config: self.config,
            records: self
                .generators
                .iter()
                .zip(&self.q)
                .enumerate()
                .map(|(id, (g, q))| LpRecord {
                    id,
                    q: lv(*q),
                    generator: g.clone(),
                })
                .collect(),
            fees: self.fees.clone(),
            price: SimplexPrice::binary(self.price)?,
        })
    }
}
