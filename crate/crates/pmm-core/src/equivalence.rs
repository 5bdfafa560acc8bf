//! Executable forms of the four equivalent ways to read a combined market:
//! per-LP level-set trades (1), greedy continuous purchasing (2), the
//! aggregate cost function (3, the engine itself), and the scoring-rule
//! market that shares one price (4). The randomized suite checks that they
//! accept the same trades.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::Kernel;
use crate::engine::{compute_fees, EngineConfig, FeeScheme, MarketState, TradeReceipt};
use crate::error::{Error, Result};
use crate::generators::{FamilyDescriptor, Generator};
use crate::scalar::Scalar;
use crate::simplex::{LiabilityVector, SimplexPrice, TradeBundle};

/// The scoring-rule market: every LP quotes at the same price, and a trade
/// to `p̂` pays each LP's score difference.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScoringMarketState<T> {
    pub n: usize,
    pub generators: Vec<Generator<T>>,
    pub price: SimplexPrice<T>,
    /// Per-LP liability, kept for settlement.
    pub q: Vec<LiabilityVector<T>>,
    pub kernel: Kernel<T>,
}

fn score_of<T: Scalar>(
    k: &Kernel<T>,
    g: &Generator<T>,
    p: &SimplexPrice<T>,
) -> Result<LiabilityVector<T>> {
    if g.is_trivial() {
        Ok(LiabilityVector::zeros(p.len()))
    } else {
        k.liability_of(g, p)
    }
}

impl<T: Scalar> ScoringMarketState<T> {
    pub fn new(families: Vec<FamilyDescriptor<T>>, price: SimplexPrice<T>) -> Result<Self> {
        let n = price.len();
        let kernel = Kernel::default();
        price.check_interior(kernel.eps)?;
        let generators = families
            .into_iter()
            .map(|d| {
                let g = Generator::new(d)?;
                g.check_dim(n)?;
                g.normalized(n)
            })
            .collect::<Result<Vec<_>>>()?;
        let q = generators
            .iter()
            .map(|g| score_of(&kernel, g, &price))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            generators,
            price,
            q,
            kernel,
        })
    }

    /// The same LPs and price as an engine state.
    pub fn from_engine(state: &MarketState<T>) -> Self {
        Self {
            n: state.n,
            generators: state.generators(),
            price: state.price.clone(),
            q: state.records.iter().map(|r| r.q.clone()).collect(),
            kernel: *state.kernel(),
        }
    }

    /// `r = S_G(p̂,·) − S_G(p,·)` with parts `rⁱ = S_{Gᵢ}(p̂,·) − S_{Gᵢ}(p,·)`.
    pub fn scoring_trade(&mut self, target: &SimplexPrice<T>) -> Result<TradeReceipt<T>> {
        if target.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: target.len(),
            });
        }
        target.check_interior(self.kernel.eps)?;
        let k = self.kernel;
        let agg = Generator::sum(&self.generators);
        let r = &score_of(&k, &agg, target)? - &score_of(&k, &agg, &self.price)?;
        let parts = self
            .generators
            .iter()
            .map(|g| Ok(&score_of(&k, g, target)? - &score_of(&k, g, &self.price)?))
            .collect::<Result<Vec<_>>>()?;
        for (q, part) in self.q.iter_mut().zip(&parts) {
            *q += part;
        }
        let fees = compute_fees(&FeeScheme::none(), &r, &parts);
        let before = std::mem::replace(&mut self.price, target.clone());
        Ok(TradeReceipt {
            r,
            parts,
            price_before: before,
            price_after: target.clone(),
            fees,
        })
    }
}

/// Result of checking a proposed split into per-LP trades for Pareto
/// optimality at a common price.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Interp1Report<T> {
    /// Every part keeps its LP's cost unchanged.
    pub valid: bool,
    /// The combined trade keeps the aggregate cost unchanged.
    pub pareto: bool,
    /// Largest `|Cᵢ(qⁱ + rⁱ) − Cᵢ(qⁱ)|`.
    pub level_deviation: T,
    /// `(∧Cᵢ)(q) − (∧Cᵢ)(q + Σrⁱ)`; positive when the split leaves value
    /// on the table.
    pub aggregate_drop: T,
    pub error: Option<String>,
}

/// Checks per-LP level-set membership of `parts` and whether their sum is
/// Pareto optimal. An empty list stands for the zero trade.
pub fn interp1_validate<T: Scalar>(
    state: &MarketState<T>,
    parts: &[TradeBundle<T>],
) -> Interp1Report<T> {
    match interp1_inner(state, parts) {
        Ok(r) => r,
        Err(e) => Interp1Report {
            valid: false,
            pareto: false,
            level_deviation: T::infinity(),
            aggregate_drop: T::infinity(),
            error: Some(e.to_string()),
        },
    }
}

fn interp1_inner<T: Scalar>(
    state: &MarketState<T>,
    parts: &[TradeBundle<T>],
) -> Result<Interp1Report<T>> {
    let n = state.n;
    if !parts.is_empty() && parts.len() != state.records.len() {
        return Err(Error::DimensionMismatch {
            expected: state.records.len(),
            found: parts.len(),
        });
    }
    let k = state.kernel();
    let tol = state.config.level_tol;
    let zero = LiabilityVector::zeros(n);
    let mut level_deviation = T::zero();
    let mut valid = true;
    for (i, rec) in state.records.iter().enumerate() {
        let part = parts.get(i).unwrap_or(&zero);
        let after = &rec.q + part;
        let d = (k.cost(&rec.generator, &after)? - k.cost(&rec.generator, &rec.q)?).abs();
        level_deviation = level_deviation.max(d);
        valid &= d <= tol * (T::one() + after.max_abs());
    }
    let q = state.total_liability();
    let r = LiabilityVector::sum_of(n, parts.iter());
    let qn = &q + &r;
    let agg = state.aggregate();
    let aggregate_drop = k.cost(&agg, &q)? - k.cost(&agg, &qn)?;
    let pareto = aggregate_drop.abs() <= tol * (T::one() + qn.max_abs());
    Ok(Interp1Report {
        valid,
        pareto,
        level_deviation,
        aggregate_drop,
        error: None,
    })
}

/// Outcome of greedy continuous purchasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GreedyReceipt<T> {
    /// Net bundle bought, including the cash paid (as `−cash·1`).
    pub r: TradeBundle<T>,
    /// What each LP sold during the greedy phase.
    pub parts: Vec<TradeBundle<T>>,
    /// Total cash paid.
    pub cash: T,
    /// Residual `(∧Cᵢ)(q + r) − (∧Cᵢ)(q)` left by the discretization.
    pub beta: T,
    /// Per-LP moves that bring every LP to the common price on the
    /// aggregate level set.
    pub cleanup: Vec<TradeBundle<T>>,
    pub price_after: SimplexPrice<T>,
    pub steps: usize,
}

/// Buys `v·duration` in `steps` Euler increments, each from the LP whose
/// directional cost `C′ᵢ(qⁱ; v) = ⟨pᵢ, v⟩` is smallest, then settles the
/// leftover price differences.
pub fn interp2_greedy<T: Scalar>(
    state: &MarketState<T>,
    v: &TradeBundle<T>,
    duration: T,
    steps: usize,
) -> Result<GreedyReceipt<T>> {
    let n = state.n;
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if steps == 0 || !(duration > T::zero()) {
        return Err(Error::OutOfRange(
            "greedy purchasing needs steps ≥ 1 and a positive duration".into(),
        ));
    }
    let k = *state.kernel();
    let gens = state.generators();
    let dt = duration / T::from_usize(steps).expect("step count fits the scalar type");
    let mut q: Vec<LiabilityVector<T>> = state.records.iter().map(|r| r.q.clone()).collect();
    let mut prices: Vec<SimplexPrice<T>> = vec![state.price.clone(); gens.len()];
    let mut parts = vec![LiabilityVector::zeros(n); gens.len()];
    let mut cash = T::zero();
    let active: Vec<usize> = (0..gens.len()).filter(|&i| !gens[i].is_trivial()).collect();
    for _ in 0..steps {
        let mut best: Option<(usize, T)> = None;
        for &i in &active {
            prices[i] = k.price_of_warm(&gens[i], &q[i], Some(&prices[i]))?;
            let d = prices[i].dot(v);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        let (i, d) = best.ok_or_else(|| Error::InvalidFamily("no LP holds liquidity".into()))?;
        let inc = v.shift(-d).scale(dt);
        q[i] += &inc;
        parts[i] += &inc;
        cash = cash + d * dt;
    }
    let agg = state.aggregate();
    let q0 = state.total_liability();
    let r = LiabilityVector::sum_of(n, parts.iter());
    let q1 = &q0 + &r;
    let beta = k.cost(&agg, &q1)? - k.cost(&agg, &q0)?;
    let settled = q1.shift(-beta);
    let price_after = k.price_of(&agg, &settled)?;
    let targets = k.liabilities_at(&gens, &price_after, &settled)?;
    let cleanup = targets.iter().zip(&q).map(|(t, qi)| t - qi).collect();
    Ok(GreedyReceipt {
        r,
        parts,
        cash,
        beta,
        cleanup,
        price_after,
        steps,
    })
}

/// Expected score `⟨p, S_G(p′,·)⟩` over a grid of reports `p′`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PropernessReport<T> {
    pub at_truth: T,
    pub best_on_grid: T,
    pub best_report: SimplexPrice<T>,
    /// No report beats the truth, and the best grid report lies within one
    /// grid step of it.
    pub holds: bool,
}

/// Interior points `k/m` of the simplex with every `k ≥ 1`.
pub fn simplex_grid<T: Scalar>(n: usize, m: usize) -> Vec<SimplexPrice<T>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            if left >= 1 {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for k in 1..left {
            cur.push(k);
            rec(n - 1, left - k, cur, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    rec(n, m, &mut Vec::new(), &mut raw);
    let mt = T::from_usize(m).expect("grid size fits the scalar type");
    raw.into_iter()
        .filter_map(|ks| {
            SimplexPrice::new(
                ks.into_iter()
                    .map(|k| T::from_usize(k).expect("fits") / mt)
                    .collect(),
            )
            .ok()
        })
        .collect()
}

/// Spot-checks that reporting the true belief maximizes the expected score.
pub fn properness_spot_check<T: Scalar>(
    g: &Generator<T>,
    p: &SimplexPrice<T>,
    resolution: usize,
) -> Result<PropernessReport<T>> {
    let k = Kernel::default();
    let at_truth = p.dot(&k.liability_of(g, p)?);
    let mut best: Option<(T, SimplexPrice<T>)> = None;
    for r in simplex_grid(p.len(), resolution) {
        if r.check_interior(k.eps).is_err() {
            continue;
        }
        let s = p.dot(&k.liability_of(g, &r)?);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, r));
        }
    }
    let (best_on_grid, best_report) =
        best.ok_or_else(|| Error::OutOfRange("grid has no interior points".into()))?;
    let step = T::one() / T::from_usize(resolution).expect("fits");
    let holds = best_on_grid <= at_truth + T::tol(1e-12) * (T::one() + at_truth.abs())
        && best_report.max_abs_diff(p) <= step;
    Ok(PropernessReport {
        at_truth,
        best_on_grid,
        best_report,
        holds,
    })
}

/// Settings of the randomized equivalence suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// LP `i` runs `families[i % families.len()]`, after the first
    /// pseudobarrier family is moved to the front to act as creator.
    pub families: Vec<FamilyDescriptor<f64>>,
    pub n: usize,
    /// Number of LPs, creator included.
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// Sampled prices are clamped to `[eps, 1 − eps]`.
    pub eps: f64,
}

impl SuiteConfig {
    pub fn new(
        families: Vec<FamilyDescriptor<f64>>,
        n: usize,
        k: usize,
        trials: usize,
        seed: u64,
    ) -> Self {
        Self {
            families,
            n,
            k,
            trials,
            seed,
            eps: 0.01,
        }
    }
}

/// One trial of the suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub start: Vec<f64>,
    pub target: Vec<f64>,
    /// Engine net trade to the target vs the scoring-rule net trade.
    pub net_deviation: f64,
    /// Engine split of that trade vs the scoring-rule parts.
    pub split_deviation: f64,
    pub interp1_valid: bool,
    pub pareto: bool,
    pub coherence: f64,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub failures: usize,
    pub max_net_deviation: f64,
    pub max_split_deviation: f64,
    pub max_coherence: f64,
    pub outcomes: Vec<TrialOutcome>,
}

const NET_TOL: f64 = 1e-7;
const COHERENCE_TOL: f64 = 1e-6;

/// Dirichlet(1, …, 1) via normalized unit exponentials, then clamped.
fn sample_price(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> SimplexPrice<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
    let s: f64 = e.iter().sum();
    let w: Vec<f64> = e.iter().map(|x| x / s).collect();
    SimplexPrice::clamped(&w, eps).0
}

fn ordered_families(cfg: &SuiteConfig) -> Result<Vec<FamilyDescriptor<f64>>> {
    let mut fam = cfg.families.clone();
    let lead = fam
        .iter()
        .position(|d| Generator::new(d.clone()).is_ok_and(|g| g.is_pseudobarrier(cfg.n)))
        .ok_or(Error::NotPseudobarrier)?;
    fam.swap(0, lead);
    Ok(fam)
}

fn run_trial(cfg: &SuiteConfig, fam: &[FamilyDescriptor<f64>], trial: usize) -> TrialOutcome {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = sample_price(&mut rng, cfg.n, cfg.eps);
    let target = sample_price(&mut rng, cfg.n, cfg.eps);
    let mut out = TrialOutcome {
        trial,
        seed,
        start: start.to_vec(),
        target: target.to_vec(),
        net_deviation: f64::INFINITY,
        split_deviation: f64::INFINITY,
        interp1_valid: false,
        pareto: false,
        coherence: f64::INFINITY,
        passed: false,
        error: None,
    };
    let result = (|| -> Result<()> {
        let mut eng = MarketState::initialize_at_price(
            start.clone(),
            fam[0].clone(),
            FeeScheme::none(),
            EngineConfig::lenient(),
        )?;
        for i in 1..cfg.k {
            let id = eng.register_lp();
            eng.modify_liquidity(id, fam[i % fam.len()].clone())?;
        }
        let mut scoring = ScoringMarketState::from_engine(&eng);
        let ts = scoring.scoring_trade(&target)?;
        let net = eng.clone().execute_trade_to_price(&target)?.r;
        out.net_deviation = net.max_abs_diff(&ts.r);
        let before = eng.clone();
        let te = eng.execute_trade(&ts.r)?;
        out.split_deviation = te
            .parts
            .iter()
            .zip(&ts.parts)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        let check = interp1_validate(&before, &te.parts);
        out.interp1_valid = check.valid;
        out.pareto = check.pareto;
        out.coherence = eng.coherence_deviation()?;
        Ok(())
    })();
    if let Err(e) = result {
        out.error = Some(e.to_string());
    }
    out.passed = out.error.is_none()
        && out.net_deviation <= NET_TOL
        && out.split_deviation <= NET_TOL
        && out.interp1_valid
        && out.pareto
        && out.coherence <= COHERENCE_TOL;
    out
}

/// Runs `trials` independent random trials in parallel: the engine against
/// the per-LP split check and the scoring-rule market on the same target
/// price.
pub fn equivalence_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.families.is_empty() || cfg.k == 0 || cfg.n < 2 {
        return Err(Error::InvalidFamily(
            "the suite needs n ≥ 2, k ≥ 1 and at least one family".into(),
        ));
    }
    let fam = ordered_families(cfg)?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &fam, t))
        .collect();
    let max = |f: fn(&TrialOutcome) -> f64| outcomes.iter().map(f).fold(0.0, f64::max);
    Ok(SuiteReport {
        config: cfg.clone(),
        failures: outcomes.iter().filter(|o| !o.passed).count(),
        max_net_deviation: max(|o| o.net_deviation),
        max_split_deviation: max(|o| o.split_deviation),
        max_coherence: max(|o| o.coherence),
        outcomes,
    })
}
