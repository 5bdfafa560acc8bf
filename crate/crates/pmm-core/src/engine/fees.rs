//! Trading fees: a cash fee proportional to the trade norm, and a bundle fee
//! on the positive part of the securities handed to the market.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::simplex::{LiabilityVector, TradeBundle};

/// Norm used by [`FeeScheme::NormFee`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormTag {
    L1,
    L2,
}

impl NormTag {
    pub fn apply<T: Scalar>(self, v: &LiabilityVector<T>) -> T {
        match self {
            NormTag::L1 => v.norm_l1(),
            NormTag::L2 => v.norm_l2(),
        }
    }
}

/// How the trader is charged and how the charge is shared among LPs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", bound = "T: Scalar")]
pub enum FeeScheme<T> {
    /// Trader pays `β‖r‖` in cash; LP `i` receives the share `‖rⁱ‖ / Σⱼ‖rʲ‖`.
    NormFee { beta: T, norm: NormTag },
    /// Trader pays the bundle `β(−r)₊`; LP `i` receives `β(−rⁱ)₊`.
    PositivePartFee { beta: T },
}

impl<T: Scalar> FeeScheme<T> {
    /// A scheme that charges nothing.
    pub fn none() -> Self {
        FeeScheme::NormFee {
            beta: T::zero(),
            norm: NormTag::L1,
        }
    }

    pub fn beta(&self) -> T {
        match self {
            FeeScheme::NormFee { beta, .. } | FeeScheme::PositivePartFee { beta } => *beta,
        }
    }

    pub fn is_valid(&self) -> bool {
        let b = self.beta();
        b.is_finite() && b >= T::zero()
    }
}

impl<T: Scalar> Default for FeeScheme<T> {
    fn default() -> Self {
        Self::none()
    }
}

/// A fee amount: cash (grand-bundle units) or a bundle of securities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum Fee<T> {
    Cash(T),
    Bundle(LiabilityVector<T>),
}

impl<T: Scalar> Fee<T> {
    /// The fee as a bundle; cash `c` becomes `c·1`.
    pub fn as_bundle(&self, n: usize) -> LiabilityVector<T> {
        match self {
            Fee::Cash(c) => LiabilityVector::constant(n, *c),
            Fee::Bundle(b) => b.clone(),
        }
    }

    pub fn cash(&self) -> Option<T> {
        match self {
            Fee::Cash(c) => Some(*c),
            Fee::Bundle(_) => None,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            Fee::Cash(c) => *c >= T::zero(),
            Fee::Bundle(b) => b.as_slice().iter().all(|x| *x >= T::zero()),
        }
    }
}

/// What the trader pays and what each LP receives for one trade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeeCharge<T> {
    pub trader: Fee<T>,
    pub lps: Vec<Fee<T>>,
}

/// Fees for the net trade `r` split into `parts` (one per LP).
pub fn compute_fees<T: Scalar>(
    scheme: &FeeScheme<T>,
    r: &TradeBundle<T>,
    parts: &[TradeBundle<T>],
) -> FeeCharge<T> {
    match scheme {
        FeeScheme::NormFee { beta, norm } => {
            let total = *beta * norm.apply(r);
            let norms: Vec<T> = parts.iter().map(|p| norm.apply(p)).collect();
            let denom: T = norms.iter().copied().sum();
            let lps = norms
                .iter()
                .map(|&m| {
                    if denom > T::zero() && total > T::zero() {
                        Fee::Cash(total * m / denom)
                    } else {
                        Fee::Cash(T::zero())
                    }
                })
                .collect();
            let trader = if denom > T::zero() { total } else { T::zero() };
            FeeCharge {
                trader: Fee::Cash(trader),
                lps,
            }
        }
        FeeScheme::PositivePartFee { beta } => FeeCharge {
            trader: Fee::Bundle((-r).positive_part().scale(*beta)),
            lps: parts
                .iter()
                .map(|p| Fee::Bundle((-p).positive_part().scale(*beta)))
                .collect(),
        },
    }
}

/// `Σᵢ LP feeᵢ − trader fee`, as a bundle. Zero means the fees balance.
pub fn audit_budget_balance<T: Scalar>(charge: &FeeCharge<T>, n: usize) -> LiabilityVector<T> {
    let mut paid = LiabilityVector::zeros(n);
    for f in &charge.lps {
        paid += &f.as_bundle(n);
    }
    &paid - &charge.trader.as_bundle(n)
}

/// Fees accumulated per LP: cash and securities are kept apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeeLedger<T> {
    pub scheme: FeeScheme<T>,
    pub cash: Vec<T>,
    pub bundles: Vec<LiabilityVector<T>>,
    /// Total collected from traders, in the same two currencies.
    pub collected_cash: T,
    pub collected_bundle: LiabilityVector<T>,
}

impl<T: Scalar> FeeLedger<T> {
    pub fn new(scheme: FeeScheme<T>, n: usize) -> Self {
        Self {
            scheme,
            cash: Vec::new(),
            bundles: Vec::new(),
            collected_cash: T::zero(),
            collected_bundle: LiabilityVector::zeros(n),
        }
    }

    /// Opens an empty account for a new LP.
    pub fn open(&mut self, n: usize) {
        self.cash.push(T::zero());
        self.bundles.push(LiabilityVector::zeros(n));
    }

    pub fn record(&mut self, charge: &FeeCharge<T>) {
        match &charge.trader {
            Fee::Cash(c) => self.collected_cash = self.collected_cash + *c,
            Fee::Bundle(b) => self.collected_bundle += b,
        }
        for (i, f) in charge.lps.iter().enumerate() {
            match f {
                Fee::Cash(c) => self.cash[i] = self.cash[i] + *c,
                Fee::Bundle(b) => self.bundles[i] += b,
            }
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.cash.iter().all(|c| *c >= T::zero())
            && self
                .bundles
                .iter()
                .all(|b| b.as_slice().iter().all(|x| *x >= T::zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[f64]) -> LiabilityVector<f64> {
        LiabilityVector::new(v.to_vec())
    }

    #[test]
    fn zero_trade_pays_nothing() {
        for scheme in [
            FeeScheme::NormFee {
                beta: 0.1,
                norm: NormTag::L2,
            },
            FeeScheme::PositivePartFee { beta: 0.1 },
        ] {
            let c = compute_fees(&scheme, &lv(&[0.0, 0.0]), &[lv(&[0.0, 0.0])]);
            assert_eq!(audit_budget_balance(&c, 2).max_abs(), 0.0);
            assert_eq!(c.trader.as_bundle(2).max_abs(), 0.0);
        }
    }

    #[test]
    fn norm_fee_is_budget_balanced() {
        let scheme = FeeScheme::NormFee {
            beta: 0.3,
            norm: NormTag::L2,
        };
        let parts = [lv(&[0.4, -0.2, 0.1]), lv(&[-0.7, 0.9, 0.05])];
        let r = &parts[0] + &parts[1];
        let c = compute_fees(&scheme, &r, &parts);
        assert!(audit_budget_balance(&c, 3).max_abs() < 1e-15);
    }
}
