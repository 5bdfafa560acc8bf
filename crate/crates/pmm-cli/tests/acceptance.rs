//! End-to-end acceptance checks. Prints one `[PASS]`/`[FAIL]` line per
//! criterion and exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use pmm_cli::report::{equivalence, liquidity_profile, price_path};
use pmm_cli::run::{read_trace, run_scenario, write_trace, TraceRecord};
use pmm_cli::scenario::Scenario;
use pmm_core::convex::{
    conjugate_value, directional_liquidity, infimal_convolution_split, liquidity_matrix, price_of,
    Kernel,
};
use pmm_core::engine::{audit_budget_balance, EngineConfig, FeeScheme, MarketState};
use pmm_core::equivalence::interp2_greedy;
use pmm_core::error::Error;
use pmm_core::generators::{
    g_from_liquidity, quadratic_from_profile, FamilyDescriptor as F, Generator, LiquidityFunction,
    StepProfile,
};
use pmm_core::simplex::{LiabilityVector, SimplexPrice};
use pmm_core::two_asset::piecewise_linear::{price_index, price_index_brute};
use pmm_core::two_asset::v3::{shifted_invariant, unit_reserves};
use pmm_core::two_asset::{table1_check, PiecewiseLinearState, UniswapV2Market, UniswapV3Market};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn lv(v: &[f64]) -> LiabilityVector<f64> {
    LiabilityVector::new(v.to_vec())
}

fn price(v: &[f64]) -> SimplexPrice<f64> {
    SimplexPrice::new(v.to_vec()).unwrap()
}

fn gen(d: F<f64>) -> Generator<f64> {
    Generator::new(d).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

/// Runs a bundled scenario and reads back its rounded trace.
fn replay(name: &str) -> Result<Vec<TraceRecord>, String> {
    let s = Scenario::load(&scenario_path(name)).map_err(|e| e.to_string())?;
    s.validate().map_err(|e| e.to_string())?;
    let out = run_scenario(&s);
    if let Some(f) = out.failure {
        return Err(format!("event {} failed: {}", f.index, f.reason));
    }
    let mut buf = Vec::new();
    write_trace(&out.records, &mut buf).map_err(|e| e.to_string())?;
    read_trace(std::str::from_utf8(&buf).unwrap()).map_err(|e| e.to_string())
}

fn ac1_two_lp_replay() -> Outcome {
    let t = replay("two_lp_steps.json")?;
    let tol = 1e-3;
    let liab = |i: usize| t[i].liabilities.clone().unwrap();
    let receipt = |i: usize| t[i].receipt.clone().unwrap();
    ensure!(
        (t[0].price.as_ref().unwrap()[0] - 0.2).abs() < tol,
        "initial price"
    );
    ensure!(
        max_diff(&liab(0)[0], &[-1.2, -0.1]) < tol,
        "initial liability"
    );

    let t1 = receipt(1);
    ensure!(
        (t1.price_after.first() - 0.5).abs() < tol,
        "first trade price"
    );
    ensure!(
        (t1.fees.trader.cash().unwrap() - 0.15).abs() < tol,
        "first trade fee"
    );

    ensure!(
        max_diff(t[3].deposit.as_ref().unwrap(), &[1.25, 0.45]) < tol,
        "LP 2 deposit"
    );

    let t2 = receipt(4);
    ensure!(
        (t2.price_after.first() - 0.7).abs() < tol,
        "second trade price"
    );
    let mags: Vec<Vec<f64>> = t2
        .parts
        .iter()
        .map(|p| p.as_slice().iter().map(|x| x.abs()).collect())
        .collect();
    ensure!(
        max_diff(&mags[0], &[0.225, 0.275]) < tol,
        "creator split {:?}",
        mags[0]
    );
    ensure!(
        max_diff(&mags[1], &[0.8, 1.2]) < tol,
        "LP 2 split {:?}",
        mags[1]
    );
    let lp_fees: Vec<f64> = t2.fees.lps.iter().map(|f| f.cash().unwrap()).collect();
    ensure!(
        max_diff(&lp_fees, &[0.05, 0.20]) < tol,
        "LP fees {lp_fees:?}"
    );
    let last = liab(4);
    ensure!(
        max_diff(&last[0], &[0.0, -0.9]) < tol,
        "creator final {:?}",
        last[0]
    );
    ensure!(
        max_diff(&last[1], &[-0.45, -1.65]) < tol,
        "LP 2 final {:?}",
        last[1]
    );

    let path: Vec<f64> = price_path(&t).iter().map(|p| p.price[0]).collect();
    ensure!(
        max_diff(&path, &[0.2, 0.5, 0.5, 0.7]) < tol && path.len() == 4,
        "price path {path:?}"
    );

    let prof = liquidity_profile(&t, 20).map_err(|e| e.to_string())?;
    for (p, per, _) in &prof.rows {
        if [0.4, 0.6].iter().any(|k| (p - k).abs() < 1e-9) {
            continue;
        }
        let want = [
            if *p < 0.6 { 5.0 } else { 0.0 },
            if *p > 0.4 { 10.0 } else { 0.0 },
        ];
        ensure!(max_diff(per, &want) < 1e-9, "liquidity at {p}: {per:?}");
    }
    Ok(format!("{} events replayed, price path {path:?}", t.len()))
}

fn ac2_fee_imbalance() -> Outcome {
    let t = replay("three_asset_fees.json")?;
    let trade = t
        .iter()
        .find(|r| r.receipt.is_some())
        .ok_or("no trade in trace")?;
    let rec = trade.receipt.clone().unwrap();
    let beta = 0.1;
    let (a, b) = (1.0 - 0.5f64.sqrt(), 2f64.sqrt() - 1.0);
    let tol = 1e-9;
    ensure!(
        max_diff(
            rec.fees.trader.as_bundle(3).as_slice(),
            &[0.0, 0.0, beta * a]
        ) < tol,
        "trader fee"
    );
    let lp_total = LiabilityVector::sum_of(
        3,
        rec.fees
            .lps
            .iter()
            .map(|f| f.as_bundle(3))
            .collect::<Vec<_>>()
            .iter(),
    );
    ensure!(
        max_diff(lp_total.as_slice(), &[0.0, beta * b, beta * a]) < tol,
        "LP fees {lp_total:?}"
    );
    let audit = audit_budget_balance(&rec.fees, 3);
    ensure!(
        max_diff(audit.as_slice(), &[0.0, beta * b, 0.0]) < tol,
        "imbalance {audit:?}"
    );
    ensure!(
        max_diff(trade.imbalance.as_ref().unwrap(), &[0.0, beta * b, 0.0]) < tol,
        "traced imbalance"
    );
    Ok(format!("imbalance {:?}", audit.as_slice()))
}

fn ac3_equivalence_suite() -> Outcome {
    let mut lines = Vec::new();
    for (n, trials) in [(2, 200), (3, 100)] {
        let r = equivalence(n, 3, trials, 2024).map_err(|e| e.to_string())?;
        ensure!(
            r.outcomes.len() == trials,
            "n = {n}: {} trials",
            r.outcomes.len()
        );
        ensure!(
            r.failures == 0,
            "n = {n}: {} failures, first {:?}",
            r.failures,
            r.outcomes.iter().find(|o| !o.passed)
        );
        ensure!(
            r.max_net_deviation <= 1e-7 && r.max_split_deviation <= 1e-7,
            "n = {n}: net deviation"
        );
        ensure!(r.max_coherence <= 1e-6, "n = {n}: coherence");
        lines.push(format!(
            "n={n}: {trials} trials, max split {:.1e}, max coherence {:.1e}",
            r.max_split_deviation, r.max_coherence
        ));
    }
    Ok(lines.join("; "))
}

fn families2() -> Vec<Generator<f64>> {
    vec![
        gen(F::Lmsr { b: 1.3 }),
        gen(F::ConstantProduct {
            alpha: 0.8,
            n: None,
        }),
        gen(F::UniswapV2 { alpha: 2.0 }),
        gen(F::Brier { scale: 1.5 }),
        gen(F::V3Bucket {
            alpha: 1.0,
            a: 0.2,
            b: 0.7,
        }),
        gen(F::LmsrBucket {
            alpha: 2.0,
            a: 0.1,
            b: 0.9,
        }),
        gen(F::BrierBucket {
            alpha: 1.0,
            a: 0.05,
            b: 0.95,
        }),
        gen(F::SoftBucket {
            knots: vec![-0.5, 0.0, 0.5, 1.0, 1.5],
            weights: vec![1.0, 2.0, 0.5],
        }),
        gen(F::StepLiquidity {
            knots: vec![0.0, 0.6, 1.0],
            levels: vec![5.0, 0.0],
        }),
    ]
}

fn g_one() -> Generator<f64> {
    gen(F::ConstantProduct {
        alpha: 1.0,
        n: Some(3),
    })
}

fn g_two() -> Generator<f64> {
    Generator::sum(&[
        gen(F::PairProduct {
            i: 0,
            j: 1,
            alpha: 1.0,
        }),
        gen(F::PairProduct {
            i: 1,
            j: 2,
            alpha: 1.0,
        }),
        gen(F::PairProduct {
            i: 0,
            j: 2,
            alpha: 1.0,
        }),
    ])
}

fn families3() -> Vec<Generator<f64>> {
    vec![
        gen(F::Lmsr { b: 0.9 }),
        g_one(),
        g_two(),
        gen(F::Brier { scale: 3.0 }),
    ]
}

fn strictly_liquid(g: &Generator<f64>, p: &SimplexPrice<f64>) -> bool {
    liquidity_matrix(g, p).is_ok_and(|h| {
        let ev = h.eigenvalues();
        ev.len() >= 2 && ev[1] > 1e-6
    })
}

fn random_price(rng: &mut ChaCha8Rng, n: usize) -> SimplexPrice<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.03..1.0)).collect();
    SimplexPrice::normalized(v).unwrap()
}

fn ac4_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_cost, mut worst_trip, mut checked) = (0.0f64, 0.0f64, 0);
    for (n, fams) in [(2, families2()), (3, families3())] {
        for g in fams {
            for _ in 0..200 {
                let p = random_price(&mut rng, n);
                let q = pmm_core::convex::liability_of(&g, &p).map_err(|e| e.to_string())?;
                let (c, _) = conjugate_value(&g, &q).map_err(|e| e.to_string())?;
                ensure!(
                    c.abs() < 1e-8,
                    "{:?}: cost {c:e} at {:?}",
                    g.descriptor(),
                    p.as_slice()
                );
                worst_cost = worst_cost.max(c.abs());
                if strictly_liquid(&g, &p) {
                    let back = price_of(&g, &q).map_err(|e| e.to_string())?;
                    let d = back.max_abs_diff(&p);
                    ensure!(d < 1e-6, "{:?}: round trip {d:e}", g.descriptor());
                    worst_trip = worst_trip.max(d);
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "max |C| {worst_cost:.1e}, max round trip {worst_trip:.1e} over {checked} liquid prices"
    ))
}

fn ac5_infimal_convolution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pool = [
        gen(F::Lmsr { b: 0.6 }),
        g_one(),
        gen(F::Brier { scale: 2.0 }),
    ];
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(1..=3);
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let s = infimal_convolution_split(&pool[..k], &lv(&q)).map_err(|e| e.to_string())?;
        let (c, _) =
            conjugate_value(&Generator::sum(&pool[..k]), &lv(&q)).map_err(|e| e.to_string())?;
        worst = worst.max((s.value - c).abs());
        ensure!(
            (s.value - c).abs() < 1e-6,
            "k = {k}, q = {q:?}: {} vs {c}",
            s.value
        );
    }

    let (b1, b2) = (0.7, 1.9);
    let start = price(&[0.2, 0.3, 0.5]);
    let cfg = EngineConfig::default;
    let mut two = MarketState::initialize_at_price(
        start.clone(),
        F::Lmsr { b: b1 },
        FeeScheme::none(),
        cfg(),
    )
    .map_err(|e| e.to_string())?;
    let id = two.register_lp();
    two.modify_liquidity(id, F::Lmsr { b: b2 })
        .map_err(|e| e.to_string())?;
    let mut one =
        MarketState::initialize_at_price(start, F::Lmsr { b: b1 + b2 }, FeeScheme::none(), cfg())
            .map_err(|e| e.to_string())?;
    let mut agg = 0.0f64;
    for _ in 0..100 {
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(-0.8..0.8)).collect();
        let r = one.quote_completion(&lv(&raw)).map_err(|e| e.to_string())?;
        let a = one.execute_trade(&r).map_err(|e| e.to_string())?;
        let b = two.execute_trade(&r).map_err(|e| e.to_string())?;
        let d = a.price_after.max_abs_diff(&b.price_after);
        let dq = one.total_liability().max_abs_diff(&two.total_liability());
        ensure!(d < 1e-7 && dq < 1e-7, "aggregation drift {d:e} / {dq:e}");
        agg = agg.max(d);
    }
    Ok(format!(
        "split vs conjugate {worst:.1e}; two-LMSR price drift {agg:.1e}"
    ))
}

fn ac6_uniswap_v2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut m = UniswapV2Market::<f64>::initialize([3.0, 5.0], 0.003).map_err(|e| e.to_string())?;
    for _ in 0..3 {
        m.register_lp();
    }
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        if rng.random_bool(0.2) {
            let i = rng.random_range(0..4);
            let a = rng.random_range(0.0..4.0);
            let _ = m.modify_liquidity(i, a);
        } else {
            let f: f64 = rng.random_range(-0.5f64..0.5).exp();
            let r = m.complete(m.x[0] * (1.0 - f)).map_err(|e| e.to_string())?;
            m.execute_trade(r).map_err(|e| e.to_string())?;
        }
        worst = worst.max(m.invariant_deviation().abs());
        ensure!(
            m.invariant_deviation().abs() < 1e-9,
            "product invariant off by {:e}",
            m.invariant_deviation()
        );
    }

    let beta = 0.003;
    let x0 = [2.0, 8.0];
    let mut v2 = UniswapV2Market::initialize(x0, beta).map_err(|e| e.to_string())?;
    let mut eng = MarketState::initialize(
        lv(&[-x0[0], -x0[1]]),
        F::UniswapV2 { alpha: 4.0 },
        FeeScheme::PositivePartFee { beta },
        EngineConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    v2.register_lp();
    eng.register_lp();
    v2.modify_liquidity(1, 2.5).map_err(|e| e.to_string())?;
    eng.modify_liquidity(1, v2.family(1).unwrap())
        .map_err(|e| e.to_string())?;
    let mut gap = 0.0f64;
    for _ in 0..100 {
        let r = v2
            .complete(rng.random_range(-0.4..0.4) * v2.x[0])
            .map_err(|e| e.to_string())?;
        let tv = v2.execute_trade(r).map_err(|e| e.to_string())?;
        let te = eng.execute_trade(&lv(&r)).map_err(|e| e.to_string())?;
        for i in 0..2 {
            gap = gap.max(max_diff(te.parts[i].as_slice(), &tv.parts[i]));
            gap = gap.max(max_diff(
                eng.records[i].q.as_slice(),
                &v2.liability(i).unwrap(),
            ));
        }
        gap = gap.max((te.price_after.first() - tv.price_after).abs());
    }
    ensure!(gap < 1e-9, "adapter vs engine {gap:e}");
    Ok(format!(
        "invariant {worst:.1e}, adapter vs engine {gap:.1e}"
    ))
}

fn ac7_uniswap_v3() -> Outcome {
    let rows = table1_check(100, 7).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 900, "{} rows", rows.len());
    let worst = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    ensure!(worst < 1e-9, "closed-form table deviation {worst:e}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut inv = 0.0f64;
    for _ in 0..200 {
        let a: f64 = rng.random_range(0.05..0.7);
        let b: f64 = rng.random_range(a + 0.05..0.95);
        let alpha: f64 = rng.random_range(0.5..5.0);
        let (mut m, _) =
            UniswapV3Market::initialize(vec![a, b], rng.random_range(a..b), vec![alpha], 0.0)
                .map_err(|e| e.to_string())?;
        let u = unit_reserves(a, b, rng.random_range(a..b));
        let before = m.reserves();
        let t = m
            .execute_trade([before[0] - alpha * u[0], before[1] - alpha * u[1]])
            .map_err(|e| e.to_string())?;
        inv = inv
            .max(t.invariant_deviation.abs())
            .max(shifted_invariant(alpha, a, b, m.reserves()).abs());
    }
    ensure!(inv < 1e-9, "shifted invariant {inv:e}");
    Ok(format!(
        "closed-form table max deviation {worst:.1e}, shifted invariant {inv:.1e}"
    ))
}

fn ac8_liquidity() -> Outcome {
    let k = Kernel::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = random_price(&mut rng, 3);
        for g in families3() {
            let a = k.liquidity_matrix(&g, &p).map_err(|e| e.to_string())?;
            let f = k.liquidity_matrix_fd(&g, &p).map_err(|e| e.to_string())?;
            let rel = a.max_abs_diff(&f) / a.max_abs().max(1.0);
            ensure!(rel <= 1e-4, "{:?}: Hessian gap {rel:e}", g.descriptor());
            worst = worst.max(rel);
        }
    }

    let u = SimplexPrice::<f64>::uniform(3);
    let v = lv(&[1.0, 0.0, -1.0]);
    let d1 = directional_liquidity(&g_one(), &u, &v).map_err(|e| e.to_string())?;
    let d2 = directional_liquidity(&g_two(), &u, &v).map_err(|e| e.to_string())?;
    ensure!(
        (d1 - 6.0).abs() < 1e-6 && (d2 - 9.0).abs() < 1e-6,
        "uniform: {d1}, {d2}"
    );

    let mut last = f64::INFINITY;
    for e in 1..=8 {
        let p2 = 10f64.powi(-e);
        let p = price(&[(1.0 - p2) / 2.0, p2, (1.0 - p2) / 2.0]);
        let one = directional_liquidity(&g_one(), &p, &v).map_err(|e| e.to_string())?;
        let two = directional_liquidity(&g_two(), &p, &v).map_err(|e| e.to_string())?;
        ensure!(one < last, "G1 liquidity not shrinking at p2 = {p2:e}");
        ensure!(
            two >= 1.0 / (p[0] * p[2]).sqrt(),
            "G2 liquidity below bound at p2 = {p2:e}"
        );
        last = one;
    }
    ensure!(last < 0.02, "G1 liquidity {last} at p2 = 1e-8");
    Ok(format!(
        "Hessian gap {worst:.1e}; uniform {d1:.6}, {d2:.6}; G1 at p2=1e-8: {last:.3}"
    ))
}

fn ac9_double_integral() -> Outcome {
    let fams = [
        gen(F::Brier { scale: 1.7 }),
        gen(F::BrierBucket {
            alpha: 0.8,
            a: 0.25,
            b: 0.6,
        }),
        gen(F::PiecewiseLinear {
            grid: vec![0.1, 0.45, 0.8],
            weights: vec![1.0, 3.0, 0.5],
        }),
        gen(F::PiecewiseQuadratic {
            knots: vec![0.0, 0.5, 1.0],
            coeffs: vec![[0.0, -1.0, 1.0], [-0.25, -0.25, 0.5]],
        }),
        gen(F::StepLiquidity {
            knots: vec![0.0, 0.6, 1.0],
            levels: vec![5.0, 0.0],
        }),
        gen(F::StepLiquidity {
            knots: vec![0.0, 0.4, 1.0],
            levels: vec![0.0, 10.0],
        }),
    ];
    let mut worst = 0.0f64;
    for g in &fams {
        let q = g
            .curve()
            .and_then(|c| c.as_quadratic())
            .ok_or("not piecewise")?;
        let back = quadratic_from_profile(&q.liquidity_profile());
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            worst = worst.max((back.g(p) - q.g(p)).abs());
        }
    }
    ensure!(worst < 1e-10, "round trip {worst:e}");

    let prof = StepProfile::new(vec![0.0, 1.0], vec![2.0], vec![]).map_err(|e| e.to_string())?;
    let c = g_from_liquidity(&LiquidityFunction::Steps(prof)).map_err(|e| e.to_string())?;
    let q = c
        .as_quadratic()
        .ok_or("constant liquidity is not quadratic")?;
    ensure!(
        q.coeffs() == [[0.0, -1.0, 1.0]],
        "ℓ = 2 gives {:?}",
        q.coeffs()
    );
    let brier = gen(F::Brier { scale: 1.0 });
    let bc = brier.curve().unwrap();
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        ensure!(c.g(p) == bc.g(p), "ℓ = 2 differs from Brier at {p}");
    }
    Ok(format!(
        "double-integral round trip {worst:.1e}; ℓ = 2 is p² − p"
    ))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn ac10_greedy() -> Outcome {
    let mut slopes = Vec::new();
    for (start, v) in [([0.4, 0.6], [1.0, 0.0]), ([0.7, 0.3], [-0.5, 1.0])] {
        let mut m = MarketState::initialize_at_price(
            price(&start),
            F::Lmsr { b: 1.0 },
            FeeScheme::none(),
            EngineConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let id = m.register_lp();
        m.modify_liquidity(id, F::Lmsr { b: 0.5 })
            .map_err(|e| e.to_string())?;
        let steps = [10.0, 100.0, 1000.0];
        let mut betas = Vec::new();
        for s in steps {
            let g = interp2_greedy(&m, &lv(&v), 1.0, s as usize).map_err(|e| e.to_string())?;
            betas.push(g.beta.abs());
        }
        let k = slope(&steps, &betas);
        ensure!((k + 1.0).abs() <= 0.2, "slope {k} from residuals {betas:?}");
        slopes.push(k);
    }
    Ok(format!("log-log slopes {slopes:.3?}"))
}

fn ac11_piecewise_linear() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut agreed = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..12);
        let mut grid: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..0.99)).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let alphas: Vec<f64> = grid
            .iter()
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.0..3.0)
                }
            })
            .collect();
        let total: f64 = alphas.iter().sum();
        let a: f64 = grid.iter().zip(&alphas).map(|(g, w)| g * w).sum();
        let z = rng.random_range(a - total - 0.5..a + 0.5);
        match (
            price_index(&grid, &alphas, z),
            price_index_brute(&grid, &alphas, z),
        ) {
            (Ok(f), Ok(s)) => {
                ensure!(f == s, "fast {f:?} vs brute {s:?}");
                agreed += 1;
            }
            (Err(Error::OutOfRange(_)), Err(Error::OutOfRange(_))) => agreed += 1,
            (f, s) => return Err(format!("fast {f:?} vs brute {s:?}")),
        }
    }

    let grid = vec![0.1, 0.3, 0.5, 0.7, 0.9];
    let mut s = PiecewiseLinearState::initialize(grid, vec![1.0, 2.0, 1.5, 1.0, 0.5], -1.7)
        .map_err(|e| e.to_string())?;
    let i = s.register_lp();
    for j in 0..5 {
        let before = (s.j_star(), s.fill());
        let dep = s.modify_liquidity(i, j, 0.37).map_err(|e| e.to_string())?;
        let back = s.modify_liquidity(i, j, 0.0).map_err(|e| e.to_string())?;
        ensure!(
            back == [-dep[0], -dep[1]],
            "deposit {dep:?} returned as {back:?}"
        );
        ensure!((s.j_star(), s.fill()) == before, "state moved");
    }
    ensure!(s.liability(i).unwrap() == [0.0, 0.0], "residual liability");
    Ok(format!(
        "{agreed}/1000 states agree exactly; deposits round trip exactly"
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("two-LP step-liquidity replay", ac1_two_lp_replay),
        ("three-asset fee imbalance", ac2_fee_imbalance),
        ("equivalence suite", ac3_equivalence_suite),
        ("cost/price duality", ac4_duality),
        ("infimal convolution", ac5_infimal_convolution),
        ("Uniswap V2", ac6_uniswap_v2),
        ("Uniswap V3 and bucket table", ac7_uniswap_v3),
        ("liquidity matrices", ac8_liquidity),
        ("double-integral pipeline", ac9_double_integral),
        ("greedy-trading convergence", ac10_greedy),
        ("piecewise-linear maker", ac11_piecewise_linear),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] AC{} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] AC{} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
