//! CSV reports over traces and parameter sweeps.

use std::io::Write;
use std::str::FromStr;

use pmm_core::equivalence::{equivalence_suite, SuiteConfig, SuiteReport};
use pmm_core::two_asset::{table1_check, Table1Deviation};
use pmm_core::Family;
use serde::Serialize;
use thiserror::Error;

use crate::format::cell;
use crate::run::TraceRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportKind {
    PricePath,
    LiquidityProfile,
    Table1Check,
    Equivalence,
}

impl ReportKind {
    pub const ALL: [ReportKind; 4] = [
        ReportKind::PricePath,
        ReportKind::LiquidityProfile,
        ReportKind::Table1Check,
        ReportKind::Equivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::PricePath => "price-path",
            ReportKind::LiquidityProfile => "liquidity-profile",
            ReportKind::Table1Check => "table1-check",
            ReportKind::Equivalence => "equivalence",
        }
    }

    /// Whether the report is computed from a trace file.
    pub fn needs_trace(self) -> bool {
        matches!(self, ReportKind::PricePath | ReportKind::LiquidityProfile)
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report kind `{0}` (expected price-path, liquidity-profile, table1-check or equivalence)")]
    UnknownKind(String),
    #[error("the trace holds no market state")]
    NoState,
    #[error("liquidity profiles need a two-outcome market, this one has {0}")]
    NotTwoOutcome(usize),
    #[error("LP {0} has no two-outcome curve")]
    NoCurve(usize),
    #[error(transparent)]
    Core(#[from] pmm_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FromStr for ReportKind {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ReportError::UnknownKind(s.to_string()))
    }
}

/// A price after an event that can move it or set it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PricePoint {
    pub index: usize,
    pub price: Vec<f64>,
}

pub fn price_path(trace: &[TraceRecord]) -> Vec<PricePoint> {
    trace
        .iter()
        .filter(|r| {
            r.ok && matches!(
                r.event.as_str(),
                "initialize" | "modify_liquidity" | "execute_trade"
            )
        })
        .filter_map(|r| {
            r.price.clone().map(|price| PricePoint {
                index: r.index,
                price,
            })
        })
        .collect()
}

/// `g″ᵢ(p)` per LP and for the aggregate on an interior grid, taken from
/// the last state in the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct LiquidityProfile {
    pub lps: usize,
    /// `(p, [ℓ₀(p), …, ℓ_k(p)], Σℓᵢ(p))`. Point masses show as NaN.
    pub rows: Vec<(f64, Vec<f64>, f64)>,
}

pub fn liquidity_profile(
    trace: &[TraceRecord],
    grid: usize,
) -> Result<LiquidityProfile, ReportError> {
    let state = trace
        .iter()
        .rev()
        .find_map(|r| r.state.as_ref())
        .ok_or(ReportError::NoState)?;
    if state.n != 2 {
        return Err(ReportError::NotTwoOutcome(state.n));
    }
    let curves = state
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| r.generator.curve().ok_or(ReportError::NoCurve(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = grid.max(2);
    let rows = (1..grid)
        .map(|k| {
            let p = k as f64 / grid as f64;
            let per: Vec<f64> = curves
                .iter()
                .map(|c| c.second(p).unwrap_or(f64::NAN))
                .collect();
            let total = per.iter().sum();
            (p, per, total)
        })
        .collect();
    Ok(LiquidityProfile {
        lps: curves.len(),
        rows,
    })
}

/// Closed-form liability and fee cells for the standard two-outcome shapes,
/// checked against the generic pipeline at `samples` random points
/// per cell.
pub fn table1_rows(samples: usize, seed: u64) -> Result<Vec<Table1Deviation>, ReportError> {
    Ok(table1_check(samples, seed)?)
}

/// Default families for the equivalence sweep: pseudobarriers plus shapes
/// with bounded liquidity.
pub fn equivalence_families(n: usize) -> Vec<Family> {
    if n == 2 {
        vec![
            Family::Lmsr { b: 1.0 },
            Family::UniswapV2 { alpha: 1.0 },
            Family::V3Bucket {
                alpha: 2.0,
                a: 0.3,
                b: 0.7,
            },
        ]
    } else {
        vec![
            Family::ConstantProduct {
                alpha: 1.0,
                n: None,
            },
            Family::Lmsr { b: 1.0 },
            Family::PairProduct {
                i: 0,
                j: 1,
                alpha: 1.0,
            },
        ]
    }
}

pub fn equivalence(
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<SuiteReport, ReportError> {
    let cfg = SuiteConfig::new(equivalence_families(n), n, k, trials, seed);
    Ok(equivalence_suite(&cfg)?)
}

fn vec_cells(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| cell(x)).collect()
}

pub fn write_price_path<W: Write>(rows: &[PricePoint], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    let n = rows.first().map_or(0, |r| r.price.len());
    let mut header = vec!["index".to_string()];
    header.extend((1..=n).map(|i| format!("p{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(vec_cells(&r.price));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_liquidity_profile<W: Write>(
    prof: &LiquidityProfile,
    out: W,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["p".to_string()];
    header.extend((0..prof.lps).map(|i| format!("lp{i}")));
    header.push("aggregate".into());
    w.write_record(&header)?;
    for (p, per, total) in &prof.rows {
        let mut rec = vec![cell(*p)];
        rec.extend(vec_cells(per));
        rec.push(cell(*total));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn snake<S: Serialize>(x: &S) -> String {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

pub fn write_table1<W: Write>(rows: &[Table1Deviation], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["shape", "row", "a", "b", "p", "deviation"])?;
    for r in rows {
        w.write_record([
            snake(&r.shape),
            snake(&r.row),
            cell(r.a),
            cell(r.b),
            cell(r.p),
            cell(r.deviation),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_equivalence<W: Write>(rep: &SuiteReport, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "seed",
        "start",
        "target",
        "net_deviation",
        "split_deviation",
        "interp1_valid",
        "pareto",
        "coherence",
        "passed",
        "error",
    ])?;
    let joined = |v: &[f64]| vec_cells(v).join(" ");
    for o in &rep.outcomes {
        w.write_record([
            o.trial.to_string(),
            o.seed.to_string(),
            joined(&o.start),
            joined(&o.target),
            cell(o.net_deviation),
            cell(o.split_deviation),
            o.interp1_valid.to_string(),
            o.pareto.to_string(),
            cell(o.coherence),
            o.passed.to_string(),
            o.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
