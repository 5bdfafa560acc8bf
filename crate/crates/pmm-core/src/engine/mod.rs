//! The parallel-market-maker state machine: one cost function per LP,
//! trades checked against the aggregate (infimal-convolution) cost and split
//! so that every LP ends at the common post-trade price.

pub mod fees;

use serde::{Deserialize, Serialize};

pub use fees::{audit_budget_balance, compute_fees, Fee, FeeCharge, FeeLedger, FeeScheme, NormTag};

use crate::convex::Kernel;
use crate::error::{Error, Result};
use crate::generators::{FamilyDescriptor, Generator};
use crate::scalar::{lit, Scalar};
use crate::simplex::{LiabilityVector, LiquidityMatrix, SimplexPrice, TradeBundle};

/// Whether initialization insists on a pseudobarrier generator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Strict,
    /// Accepts generators with bounded slopes; trades that exhaust liquidity
    /// fail with `BoundaryPrice`.
    Lenient,
}

/// Tolerances and solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EngineConfig<T> {
    pub mode: Mode,
    pub kernel: Kernel<T>,
    /// Allowed change of the aggregate cost for a trade.
    pub level_tol: T,
    /// Allowed gap between the net trade and the sum of the per-LP parts.
    pub split_tol: T,
    /// Allowed deviation of an LP's liability from its price-consistent value.
    pub coherence_tol: T,
}

impl<T: Scalar> Default for EngineConfig<T> {
    fn default() -> Self {
        Self {
            mode: Mode::Strict,
            kernel: Kernel::default(),
            level_tol: T::tol(1e-8),
            split_tol: T::tol(1e-7),
            coherence_tol: T::tol(1e-6),
        }
    }
}

impl<T: Scalar> EngineConfig<T> {
    pub fn lenient() -> Self {
        Self {
            mode: Mode::Lenient,
            ..Self::default()
        }
    }
}

/// One liquidity provider. Id 0 is the market creator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LpRecord<T> {
    pub id: usize,
    pub q: LiabilityVector<T>,
    pub generator: Generator<T>,
}

/// Result of an accepted trade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TradeReceipt<T> {
    /// Net trade, oriented toward the trader.
    pub r: TradeBundle<T>,
    /// Per-LP parts `rⁱ`, indexed by LP id.
    pub parts: Vec<TradeBundle<T>>,
    pub price_before: SimplexPrice<T>,
    pub price_after: SimplexPrice<T>,
    pub fees: FeeCharge<T>,
}

impl<T: Scalar> TradeReceipt<T> {
    /// `Σᵢ LP feeᵢ − trader fee`.
    pub fn imbalance(&self) -> LiabilityVector<T> {
        audit_budget_balance(&self.fees, self.r.len())
    }
}

/// Market state. Serializes to a self-contained JSON snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MarketState<T> {
    pub n: usize,
    pub config: EngineConfig<T>,
    pub records: Vec<LpRecord<T>>,
    pub fees: FeeLedger<T>,
    /// Aggregate price, maintained across operations.
    pub price: SimplexPrice<T>,
}

fn scale_of<T: Scalar>(v: &LiabilityVector<T>) -> T {
    T::one() + v.max_abs()
}

impl<T: Scalar> MarketState<T> {
    /// Installs the creator's generator with liability `q0`, which must be
    /// the generator's own scoring-rule vector at the price it implies.
    pub fn initialize(
        q0: LiabilityVector<T>,
        g0: FamilyDescriptor<T>,
        scheme: FeeScheme<T>,
        config: EngineConfig<T>,
    ) -> Result<Self> {
        let n = q0.len();
        let g = Self::prepare(g0, n)?;
        Self::check_creator(&g, n, &config)?;
        let kernel = config.kernel;
        let price = kernel.price_of(&g, &q0)?;
        let expect = kernel.liabilities_at(std::slice::from_ref(&g), &price, &q0)?;
        let deviation = expect[0].max_abs_diff(&q0);
        if !(deviation <= config.level_tol * scale_of(&q0)) {
            return Err(Error::LiabilityMismatch {
                deviation: deviation.to_f64_lossy(),
            });
        }
        Ok(Self::assemble(n, q0, g, price, scheme, config))
    }

    /// Installs the creator's generator at an explicit price; the creator's
    /// liability is `∇Ḡ₀(p)`. Needed when `G₀` does not pin down the price
    /// from the liability alone.
    pub fn initialize_at_price(
        price: SimplexPrice<T>,
        g0: FamilyDescriptor<T>,
        scheme: FeeScheme<T>,
        config: EngineConfig<T>,
    ) -> Result<Self> {
        let n = price.len();
        let g = Self::prepare(g0, n)?;
        Self::check_creator(&g, n, &config)?;
        let q0 = config.kernel.liability_of(&g, &price)?;
        Ok(Self::assemble(n, q0, g, price, scheme, config))
    }

    fn prepare(desc: FamilyDescriptor<T>, n: usize) -> Result<Generator<T>> {
        let g = Generator::new(desc)?;
        g.check_dim(n)?;
        g.normalized(n)
    }

    fn check_creator(g: &Generator<T>, n: usize, config: &EngineConfig<T>) -> Result<()> {
        if g.is_trivial() {
            return Err(Error::InvalidFamily(
                "the market creator needs a nontrivial generator".into(),
            ));
        }
        if config.mode == Mode::Strict && !g.is_pseudobarrier(n) {
            return Err(Error::NotPseudobarrier);
        }
        Ok(())
    }

    fn assemble(
        n: usize,
        q0: LiabilityVector<T>,
        g: Generator<T>,
        price: SimplexPrice<T>,
        scheme: FeeScheme<T>,
        config: EngineConfig<T>,
    ) -> Self {
        let mut fees = FeeLedger::new(scheme, n);
        fees.open(n);
        MarketState {
            n,
            config,
            records: vec![LpRecord {
                id: 0,
                q: q0,
                generator: g,
            }],
            fees,
            price,
        }
    }

    /// Number of registered LPs besides the creator.
    pub fn k(&self) -> usize {
        self.records.len() - 1
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.config.kernel
    }

    pub fn generators(&self) -> Vec<Generator<T>> {
        self.records.iter().map(|r| r.generator.clone()).collect()
    }

    /// `ΣGᵢ`, whose conjugate is the infimal convolution of the LP costs.
    pub fn aggregate(&self) -> Generator<T> {
        Generator::sum(&self.generators())
    }

    /// `Σqⁱ`.
    pub fn total_liability(&self) -> LiabilityVector<T> {
        LiabilityVector::sum_of(self.n, self.records.iter().map(|r| &r.q))
    }

    pub fn record(&self, i: usize) -> Result<&LpRecord<T>> {
        self.records.get(i).ok_or(Error::UnknownLp(i))
    }

    /// Adds an LP with no liability and no liquidity.
    pub fn register_lp(&mut self) -> usize {
        let id = self.records.len();
        self.records.push(LpRecord {
            id,
            q: LiabilityVector::zeros(self.n),
            generator: Generator::trivial(),
        });
        self.fees.open(self.n);
        id
    }

    /// Replaces LP `i`'s generator, keeping the price fixed. Returns the
    /// bundle the LP must hand over (negative entries are paid out to it).
    pub fn modify_liquidity(
        &mut self,
        i: usize,
        desc: FamilyDescriptor<T>,
    ) -> Result<LiabilityVector<T>> {
        self.record(i)?;
        let g = Self::prepare(desc, self.n)?;
        let target = if g.is_trivial() {
            LiabilityVector::zeros(self.n)
        } else {
            self.kernel().liability_of(&g, &self.price)?
        };
        let rec = &mut self.records[i];
        let deposit = &rec.q - &target;
        rec.q = target;
        rec.generator = g;
        Ok(deposit)
    }

    /// `r + (C(q) − C(q+r))·1`: the cash adjustment that puts `r` on the
    /// aggregate level set.
    pub fn quote_completion(&self, r: &TradeBundle<T>) -> Result<TradeBundle<T>> {
        self.check_len(r)?;
        let g = self.aggregate();
        let q = self.total_liability();
        let k = self.kernel();
        let c0 = k.cost(&g, &q)?;
        let c1 = k.cost(&g, &(&q + r))?;
        Ok(r.shift(c0 - c1))
    }

    fn check_len(&self, r: &TradeBundle<T>) -> Result<()> {
        if r.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: r.len(),
            });
        }
        if !r.is_finite() {
            return Err(Error::OutOfRange("trade has non-finite components".into()));
        }
        Ok(())
    }

    /// Executes the trade `r` if it keeps the aggregate cost unchanged.
    pub fn execute_trade(&mut self, r: &TradeBundle<T>) -> Result<TradeReceipt<T>> {
        self.check_len(r)?;
        if r.max_abs() == T::zero() {
            return Ok(self.zero_receipt(r.clone()));
        }
        let g = self.aggregate();
        let q = self.total_liability();
        let qn = &q + r;
        let k = *self.kernel();
        let before = k.maximize(&g, &q, Some(&self.price))?;
        let after = k.maximize(&g, &qn, Some(&self.price))?;
        let deviation = (after.cost - before.cost).abs();
        if !(deviation <= self.config.level_tol * scale_of(&qn)) {
            return Err(Error::NotLevelSet {
                deviation: deviation.to_f64_lossy(),
            });
        }
        let price = k.price_of_warm(&g, &qn, Some(&self.price))?;
        let targets = k.liabilities_at(&self.generators(), &price, &qn)?;
        self.apply(r, price, targets)
    }

    /// Moves the market to price `p̂`: every LP is taken to `∇Ḡᵢ(p̂)` and the
    /// net trade is whatever that implies.
    pub fn execute_trade_to_price(&mut self, target: &SimplexPrice<T>) -> Result<TradeReceipt<T>> {
        if target.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: target.len(),
            });
        }
        let k = *self.kernel();
        let targets: Vec<LiabilityVector<T>> = self
            .records
            .iter()
            .map(|rec| {
                if rec.generator.is_trivial() {
                    Ok(LiabilityVector::zeros(self.n))
                } else {
                    k.liability_of(&rec.generator, target)
                }
            })
            .collect::<Result<_>>()?;
        let r = &LiabilityVector::sum_of(self.n, targets.iter()) - &self.total_liability();
        self.apply(&r, target.clone(), targets)
    }

    fn apply(
        &mut self,
        r: &TradeBundle<T>,
        price: SimplexPrice<T>,
        targets: Vec<LiabilityVector<T>>,
    ) -> Result<TradeReceipt<T>> {
        let mut parts: Vec<TradeBundle<T>> = self
            .records
            .iter()
            .zip(&targets)
            .map(|(rec, t)| t - &rec.q)
            .collect();
        let resid = r - &LiabilityVector::sum_of(self.n, parts.iter());
        if !(resid.max_abs() <= self.config.split_tol * scale_of(r)) {
            return Err(Error::SplitMismatch {
                deviation: resid.max_abs().to_f64_lossy(),
            });
        }
        // Solver round-off goes to the first LP holding liquidity so the
        // parts add up to `r` exactly.
        let absorb = self
            .records
            .iter()
            .position(|rec| !rec.generator.is_trivial())
            .unwrap_or(0);
        parts[absorb] += &resid;
        let charge = compute_fees(&self.fees.scheme, r, &parts);
        self.fees.record(&charge);
        for (rec, p) in self.records.iter_mut().zip(&parts) {
            rec.q += p;
        }
        let before = std::mem::replace(&mut self.price, price.clone());
        Ok(TradeReceipt {
            r: r.clone(),
            parts,
            price_before: before,
            price_after: price,
            fees: charge,
        })
    }

    fn zero_receipt(&self, r: TradeBundle<T>) -> TradeReceipt<T> {
        let parts = vec![LiabilityVector::zeros(self.n); self.records.len()];
        let fees = compute_fees(&self.fees.scheme, &r, &parts);
        TradeReceipt {
            r,
            parts,
            price_before: self.price.clone(),
            price_after: self.price.clone(),
            fees,
        }
    }

    /// Aggregate liquidity matrix `Σ∇²Ḡᵢ` at the current price.
    pub fn liquidity_matrix(&self) -> Result<LiquidityMatrix<T>> {
        self.kernel()
            .liquidity_matrix(&self.aggregate(), &self.price)
    }

    /// Samples LP `i`'s zero level set at a `10ⁿ⁻¹`-point grid of prices and
    /// reports whether every liability there is `≤ 0`.
    pub fn audit_no_liability(&self, i: usize) -> Result<bool> {
        let g = &self.record(i)?.generator;
        if g.is_trivial() {
            return Ok(true);
        }
        let k = self.kernel();
        let tol = T::tol(1e-9);
        for p in audit_grid::<T>(self.n) {
            let q = k.liability_of(g, &p)?;
            if q.as_slice().iter().any(|&x| x > tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Checks that every LP's liability is a scoring-rule vector of its
    /// generator at the common price (a subgradient of `Ḡᵢ` there, with zero
    /// cost). Returns the largest deviation.
    pub fn coherence_deviation(&self) -> Result<T> {
        let k = self.kernel();
        let mut worst = T::zero();
        for rec in &self.records {
            let expect = if rec.generator.is_trivial() {
                LiabilityVector::zeros(self.n)
            } else {
                match rec.generator.curve() {
                    Some(c) if self.n == 2 => {
                        let p = self.price.first();
                        let (lo, hi) = c.slopes(p);
                        let z = rec.q[0] - rec.q[1];
                        LiabilityVector::new(c.liability_with_slope(p, z.max(lo).min(hi)).to_vec())
                    }
                    _ => k.liability_of(&rec.generator, &self.price)?,
                }
            };
            let d = expect.max_abs_diff(&rec.q) / scale_of(&rec.q);
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Fails with `LiabilityMismatch` unless the state is coherent.
    pub fn check_coherence(&self) -> Result<()> {
        let d = self.coherence_deviation()?;
        if d <= self.config.coherence_tol {
            Ok(())
        } else {
            Err(Error::LiabilityMismatch {
                deviation: d.to_f64_lossy(),
            })
        }
    }

    /// Validates a deserialized snapshot.
    pub fn from_snapshot(snapshot: MarketState<T>) -> Result<Self> {
        let n = snapshot.n;
        if snapshot.records.is_empty()
            || snapshot.price.len() != n
            || snapshot.records.iter().any(|r| r.q.len() != n)
            || snapshot.fees.cash.len() != snapshot.records.len()
        {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: snapshot.price.len(),
            });
        }
        for (i, rec) in snapshot.records.iter().enumerate() {
            if rec.id != i {
                return Err(Error::UnknownLp(rec.id));
            }
            rec.generator.check_dim(n)?;
        }
        snapshot.check_coherence()?;
        Ok(snapshot)
    }
}

/// Interior prices `pⱼ = uⱼ Πₖ<ⱼ (1 − uₖ)` (stick breaking) with every
/// `uⱼ ∈ {0.05, 0.15, …, 0.95}`.
pub fn audit_grid<T: Scalar>(n: usize) -> Vec<SimplexPrice<T>> {
    let levels: Vec<T> = (0..10).map(|k| lit::<T>((k as f64 + 0.5) / 10.0)).collect();
    let count = 10usize.pow((n - 1) as u32);
    (0..count)
        .filter_map(|mut idx| {
            let mut rest = T::one();
            let mut p = Vec::with_capacity(n);
            for _ in 0..n - 1 {
                let u = levels[idx % 10];
                idx /= 10;
                p.push(rest * u);
                rest = rest * (T::one() - u);
            }
            p.push(rest);
            SimplexPrice::normalized(p).ok()
        })
        .collect()
}
