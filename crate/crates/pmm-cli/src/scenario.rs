//! Scenario files: a market configuration plus an ordered list of protocol
//! calls.
//!
//! ```json
//! {
//!   "n": 2,
//!   "fee": {"scheme": "norm_fee", "beta": 0.1, "norm": "l1"},
//!   "mode": "lenient",
//!   "events": [
//!     {"event": "initialize", "family": {"family": "lmsr", "b": 1.0}, "price": [0.3, 0.7]},
//!     {"event": "register_lp"},
//!     {"event": "modify_liquidity", "lp": 1, "family": {"family": "uniswap_v2", "alpha": 2.0}},
//!     {"event": "execute_trade", "bundle": [0.5, -0.4]},
//!     {"event": "execute_trade", "price": [0.6, 0.4]},
//!     {"event": "query", "what": "liquidity_matrix"}
//!   ]
//! }
//! ```
//!
//! `fee` defaults to no fee, `mode` to `strict`. `eps` optionally overrides
//! the boundary margin of the price solver.

use std::path::Path;

use pmm_core::engine::{Mode, NormTag};
use pmm_core::{Family, Fees};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    #[serde(default)]
    pub fee: Fees,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    /// Opens the market with the creator's generator, either at a liability
    /// on its zero level set or at an explicit price.
    Initialize {
        family: Family,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        liability: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        price: Option<Vec<f64>>,
    },
    RegisterLp,
    ModifyLiquidity {
        lp: usize,
        family: Family,
    },
    /// A trade given as a bundle (oriented toward the trader) or as the
    /// price it should move the market to.
    ExecuteTrade {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bundle: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        price: Option<Vec<f64>>,
    },
    Query {
        what: QueryKind,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Initialize { .. } => "initialize",
            Event::RegisterLp => "register_lp",
            Event::ModifyLiquidity { .. } => "modify_liquidity",
            Event::ExecuteTrade { .. } => "execute_trade",
            Event::Query { .. } => "query",
        }
    }

    /// Family descriptors this event installs.
    pub fn family(&self) -> Option<&Family> {
        match self {
            Event::Initialize { family, .. } | Event::ModifyLiquidity { family, .. } => {
                Some(family)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Price,
    Liabilities,
    LiquidityMatrix,
    Fees,
    NoLiabilityAudit,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("the market needs at least two outcomes, got n = {0}")]
    Outcomes(usize),
    #[error("the first event must be initialize")]
    FirstNotInitialize,
    #[error("event {0}: the market is already initialized")]
    Reinitialize(usize),
    #[error("event {index}: LP {lp} is not registered")]
    UnknownLp { index: usize, lp: usize },
    #[error("event {index}: expected {expected} components, found {found}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("event {index}: give exactly one of `{a}` and `{b}`")]
    Target {
        index: usize,
        a: &'static str,
        b: &'static str,
    },
    #[error("invalid fee scheme (β must be finite and ≥ 0)")]
    Fee,
    #[error("eps must lie in (0, 1/n)")]
    Eps,
}

/// Command-line replacements for the scenario's fee scheme and mode.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub fee: Option<FeeKind>,
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeeKind {
    NormL1,
    NormL2,
    PositivePart,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(mode) = o.mode {
            self.mode = mode;
        }
        let beta = o.beta.unwrap_or_else(|| self.fee.beta());
        self.fee = match (o.fee, &self.fee) {
            (Some(FeeKind::NormL1), _) => Fees::NormFee {
                beta,
                norm: NormTag::L1,
            },
            (Some(FeeKind::NormL2), _) => Fees::NormFee {
                beta,
                norm: NormTag::L2,
            },
            (Some(FeeKind::PositivePart), _) => Fees::PositivePartFee { beta },
            (None, Fees::NormFee { norm, .. }) => Fees::NormFee { beta, norm: *norm },
            (None, Fees::PositivePartFee { .. }) => Fees::PositivePartFee { beta },
        };
    }

    /// Checks the static structure: the event order, the LP ids and the
    /// vector lengths. Family parameters are checked when the events run.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.n;
        if n < 2 {
            return Err(ScenarioError::Outcomes(n));
        }
        if !self.fee.is_valid() {
            return Err(ScenarioError::Fee);
        }
        if let Some(eps) = self.eps {
            if !(eps > 0.0 && eps * (n as f64) < 1.0) {
                return Err(ScenarioError::Eps);
            }
        }
        let dim = |index: usize, v: &[f64]| {
            if v.len() == n {
                Ok(())
            } else {
                Err(ScenarioError::Dimension {
                    index,
                    expected: n,
                    found: v.len(),
                })
            }
        };
        let exactly_one =
            |index: usize, x: &Option<Vec<f64>>, y: &Option<Vec<f64>>, a, b| match (x, y) {
                (Some(v), None) | (None, Some(v)) => dim(index, v),
                _ => Err(ScenarioError::Target { index, a, b }),
            };
        if !matches!(self.events.first(), Some(Event::Initialize { .. })) {
            return Err(ScenarioError::FirstNotInitialize);
        }
        let mut lps = 0;
        for (index, ev) in self.events.iter().enumerate() {
            match ev {
                Event::Initialize {
                    liability, price, ..
                } => {
                    if index > 0 {
                        return Err(ScenarioError::Reinitialize(index));
                    }
                    exactly_one(index, liability, price, "liability", "price")?;
                    lps = 1;
                }
                Event::RegisterLp => lps += 1,
                Event::ModifyLiquidity { lp, .. } => {
                    if *lp >= lps {
                        return Err(ScenarioError::UnknownLp { index, lp: *lp });
                    }
                }
                Event::ExecuteTrade { bundle, price } => {
                    exactly_one(index, bundle, price, "bundle", "price")?
                }
                Event::Query { .. } => {}
            }
        }
        Ok(())
    }
}
