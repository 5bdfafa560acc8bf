//! Replays a scenario against the engine and records one trace line per
//! event.

use std::io::Write;

use pmm_core::engine::{EngineConfig, FeeLedger};
use pmm_core::simplex::{LiabilityVector, SimplexPrice};
use pmm_core::two_asset::{curve_of, liability2};
use pmm_core::{Config, Family, Market, Receipt, TwoAsset};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::format::to_line;
use crate::scenario::{Event, QueryKind, Scenario};

/// Which implementation executes the events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Engine,
    /// Closed-form two-outcome protocol over curves.
    TwoAsset,
}

/// The two-outcome fast path applies when every family the scenario
/// installs has a curve.
pub fn choose_backend(s: &Scenario) -> BackendKind {
    let curves = s
        .events
        .iter()
        .filter_map(Event::family)
        .all(|f| curve_of(f).is_ok());
    if s.n == 2 && curves {
        BackendKind::TwoAsset
    } else {
        BackendKind::Engine
    }
}

enum Backend {
    Engine(Market),
    TwoAsset(TwoAsset),
}

fn pair(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

impl Backend {
    fn open(
        kind: BackendKind,
        s: &Scenario,
        family: &Family,
        liability: Option<&[f64]>,
        price: Option<&[f64]>,
    ) -> pmm_core::Result<Self> {
        let mut config: Config = EngineConfig {
            mode: s.mode,
            ..EngineConfig::default()
        };
        if let Some(eps) = s.eps {
            config.kernel.eps = eps;
        }
        let fee = s.fee.clone();
        Ok(match kind {
            BackendKind::Engine => Backend::Engine(match (liability, price) {
                (Some(q), _) => Market::initialize(
                    LiabilityVector::new(q.to_vec()),
                    family.clone(),
                    fee,
                    config,
                )?,
                (None, Some(p)) => Market::initialize_at_price(
                    SimplexPrice::new(p.to_vec())?,
                    family.clone(),
                    fee,
                    config,
                )?,
                (None, None) => unreachable!("validated scenario"),
            }),
            BackendKind::TwoAsset => {
                let q0 = match (liability, price) {
                    (Some(q), _) => pair(q),
                    (None, Some(p)) => {
                        let p = SimplexPrice::new(p.to_vec())?;
                        liability2(&curve_of(family)?, p.first())?
                    }
                    (None, None) => unreachable!("validated scenario"),
                };
                Backend::TwoAsset(TwoAsset::initialize(q0, family.clone(), fee, config)?)
            }
        })
    }

    fn register_lp(&mut self) -> usize {
        match self {
            Backend::Engine(m) => m.register_lp(),
            Backend::TwoAsset(m) => m.register_lp(),
        }
    }

    fn modify(&mut self, lp: usize, family: &Family) -> pmm_core::Result<Vec<f64>> {
        Ok(match self {
            Backend::Engine(m) => m.modify_liquidity(lp, family.clone())?.to_vec(),
            Backend::TwoAsset(m) => m.modify_liquidity(lp, family.clone())?.to_vec(),
        })
    }

    fn trade(
        &mut self,
        bundle: Option<&[f64]>,
        price: Option<&[f64]>,
    ) -> pmm_core::Result<Receipt> {
        match (self, bundle, price) {
            (Backend::Engine(m), Some(r), _) => m.execute_trade(&LiabilityVector::new(r.to_vec())),
            (Backend::Engine(m), None, Some(p)) => {
                m.execute_trade_to_price(&SimplexPrice::new(p.to_vec())?)
            }
            (Backend::TwoAsset(m), Some(r), _) => m.execute_trade(pair(r)),
            (Backend::TwoAsset(m), None, Some(p)) => {
                let p = SimplexPrice::new(p.to_vec())?;
                m.execute_trade_to_price(p.first())
            }
            (_, None, None) => unreachable!("validated scenario"),
        }
    }

    fn snapshot(&self) -> pmm_core::Result<Market> {
        match self {
            Backend::Engine(m) => Ok(m.clone()),
            Backend::TwoAsset(m) => m.snapshot(),
        }
    }
}

fn query(m: &Market, what: QueryKind) -> pmm_core::Result<Value> {
    Ok(match what {
        QueryKind::Price => json!(m.price.to_vec()),
        QueryKind::Liabilities => json!(liabilities(m)),
        QueryKind::LiquidityMatrix => {
            let l = m.liquidity_matrix()?;
            let rows: Vec<Vec<f64>> = (0..l.dim())
                .map(|i| (0..l.dim()).map(|j| l.get(i, j)).collect())
                .collect();
            json!(rows)
        }
        QueryKind::Fees => serde_json::to_value(&m.fees).expect("ledger serializes"),
        QueryKind::NoLiabilityAudit => {
            let audit = (0..m.records.len())
                .map(|i| m.audit_no_liability(i))
                .collect::<pmm_core::Result<Vec<bool>>>()?;
            json!(audit)
        }
    })
}

fn liabilities(m: &Market) -> Vec<Vec<f64>> {
    m.records.iter().map(|r| r.q.to_vec()).collect()
}

/// One line of a trace. `state` is the market after the event, or, for a
/// failed event, the unchanged market before it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub index: usize,
    pub event: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub backend: BackendKind,
    /// The bundle an LP handed over in `modify_liquidity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposit: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt: Option<Receipt>,
    /// `Σ LP fees − trader fee` for the trade.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imbalance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub liabilities: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fees: Option<FeeLedger<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Market>,
}

impl TraceRecord {
    fn new(index: usize, ev: &Event, backend: BackendKind) -> Self {
        Self {
            index,
            event: ev.name().to_string(),
            ok: true,
            error: None,
            backend,
            deposit: None,
            receipt: None,
            imbalance: None,
            query: None,
            lp: None,
            price: None,
            liabilities: None,
            fees: None,
            state: None,
        }
    }

    fn attach(&mut self, m: Market) {
        self.price = Some(m.price.to_vec());
        self.liabilities = Some(liabilities(&m));
        self.fees = Some(m.fees.clone());
        self.state = Some(m);
    }
}

#[derive(Clone, Debug)]
pub struct Failure {
    pub index: usize,
    pub event: String,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub backend: BackendKind,
    pub records: Vec<TraceRecord>,
    pub failure: Option<Failure>,
}

/// Executes a validated scenario on the backend [`choose_backend`] picks.
/// Stops at the first failing event, whose record carries the error.
pub fn run_scenario(s: &Scenario) -> RunOutcome {
    run_scenario_on(s, choose_backend(s))
}

/// Executes a validated scenario on a given backend. `TwoAsset` requires
/// two outcomes and curve families.
pub fn run_scenario_on(s: &Scenario, kind: BackendKind) -> RunOutcome {
    let mut backend: Option<Backend> = None;
    let mut records = Vec::with_capacity(s.events.len());
    for (index, ev) in s.events.iter().enumerate() {
        let mut rec = TraceRecord::new(index, ev, kind);
        let step = execute(kind, s, ev, &mut backend, &mut rec);
        let snap = backend.as_ref().map(Backend::snapshot).transpose();
        let result = match (step, snap) {
            (Ok(()), Ok(m)) => {
                if let Some(m) = m {
                    rec.attach(m);
                }
                Ok(())
            }
            (Err(e), Ok(Some(m))) => {
                rec.attach(m);
                Err(e)
            }
            (Err(e), _) | (Ok(()), Err(e)) => Err(e),
        };
        if let Err(e) = result {
            rec.ok = false;
            rec.error = Some(e.to_string());
            let failure = Failure {
                index,
                event: rec.event.clone(),
                reason: e.to_string(),
            };
            records.push(rec);
            return RunOutcome {
                backend: kind,
                records,
                failure: Some(failure),
            };
        }
        records.push(rec);
    }
    RunOutcome {
        backend: kind,
        records,
        failure: None,
    }
}

fn execute(
    kind: BackendKind,
    s: &Scenario,
    ev: &Event,
    backend: &mut Option<Backend>,
    rec: &mut TraceRecord,
) -> pmm_core::Result<()> {
    if let Event::Initialize {
        family,
        liability,
        price,
    } = ev
    {
        *backend = Some(Backend::open(
            kind,
            s,
            family,
            liability.as_deref(),
            price.as_deref(),
        )?);
        return Ok(());
    }
    let b = backend
        .as_mut()
        .expect("validated scenario starts with initialize");
    match ev {
        Event::Initialize { .. } => unreachable!(),
        Event::RegisterLp => rec.lp = Some(b.register_lp()),
        Event::ModifyLiquidity { lp, family } => {
            rec.lp = Some(*lp);
            rec.deposit = Some(b.modify(*lp, family)?);
        }
        Event::ExecuteTrade { bundle, price } => {
            let t = b.trade(bundle.as_deref(), price.as_deref())?;
            rec.imbalance = Some(t.imbalance().to_vec());
            rec.receipt = Some(t);
        }
        Event::Query { what } => rec.query = Some(query(&b.snapshot()?, *what)?),
    }
    Ok(())
}

/// Writes the records as JSON lines with fixed float formatting.
pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        let line = to_line(r).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    out.flush()
}

/// Parses a JSON-lines trace.
pub fn read_trace(text: &str) -> serde_json::Result<Vec<TraceRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
