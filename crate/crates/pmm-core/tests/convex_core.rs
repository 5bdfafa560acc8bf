//! Kernel operations against closed forms and hand-derived oracles.

use pmm_core::convex::{
    conjugate_value, directional_liquidity, infimal_convolution_split, liability_of,
    liquidity_matrix, normalize_generator, price_of, Kernel,
};
use pmm_core::generators::{FamilyDescriptor as F, Generator};
use pmm_core::simplex::{LiabilityVector, SimplexPrice};
use proptest::prelude::*;

fn gen(d: F<f64>) -> Generator<f64> {
    Generator::new(d).unwrap()
}

fn lv(v: &[f64]) -> LiabilityVector<f64> {
    LiabilityVector::new(v.to_vec())
}

fn price(v: &[f64]) -> SimplexPrice<f64> {
    SimplexPrice::new(v.to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn g1() -> Generator<f64> {
    gen(F::StepLiquidity {
        knots: vec![0.0, 0.6, 1.0],
        levels: vec![5.0, 0.0],
    })
}

fn g2() -> Generator<f64> {
    gen(F::StepLiquidity {
        knots: vec![0.0, 0.4, 1.0],
        levels: vec![0.0, 10.0],
    })
}

fn lmsr_cost(b: f64, q: &[f64]) -> f64 {
    let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + b * q.iter().map(|x| ((x - m) / b).exp()).sum::<f64>().ln()
}

#[test]
fn liability_examples() {
    let l = liability_of(&gen(F::Lmsr { b: 1.0 }), &price(&[0.5, 0.5])).unwrap();
    assert!(close(l[0], 0.5f64.ln(), 1e-15) && close(l[1], 0.5f64.ln(), 1e-15));
    let l = liability_of(
        &gen(F::ConstantProduct {
            alpha: 1.0,
            n: Some(2),
        }),
        &price(&[0.5, 0.5]),
    )
    .unwrap();
    assert!(close(l[0], -1.0, 1e-15) && close(l[1], -1.0, 1e-15));
    let l = liability_of(&g1(), &price(&[0.2, 0.8])).unwrap();
    assert!(close(l[0], -1.2, 1e-12) && close(l[1], -0.1, 1e-12));
}

#[test]
fn liability_rejects_clamped_price() {
    let p = SimplexPrice::new(vec![1e-12, 1.0 - 1e-12]).unwrap();
    assert!(matches!(
        liability_of(&gen(F::Lmsr { b: 1.0 }), &p),
        Err(pmm_core::error::Error::BoundaryPrice { .. })
    ));
}

#[test]
fn conjugate_examples() {
    let g = gen(F::Lmsr { b: 1.0 });
    let (c, p) = conjugate_value(&g, &lv(&[0.0, 0.0])).unwrap();
    assert!(close(c, 2f64.ln(), 1e-12) && close(p[0], 0.5, 1e-9));
    let (c, _) = conjugate_value(&g, &lv(&[1.0, 0.0])).unwrap();
    assert!(close(c, (1f64.exp() + 1.0).ln(), 1e-12));
    // Same checks through the n-outcome solver.
    let (c, p) = conjugate_value(&g, &lv(&[1.0, 0.0, -0.5])).unwrap();
    assert!(close(c, lmsr_cost(1.0, &[1.0, 0.0, -0.5]), 1e-12));
    let z: f64 = [1.0f64, 0.0, -0.5].iter().map(|x| x.exp()).sum();
    assert!(close(p[0], 1f64.exp() / z, 1e-9));
}

#[test]
fn price_examples() {
    let p = price_of(&gen(F::Lmsr { b: 1.0 }), &lv(&[0.0, 0.0])).unwrap();
    assert!(close(p[0], 0.5, 1e-12));
    let agg = Generator::sum(&[g1(), g2()]);
    let p = price_of(&agg, &lv(&[-1.475, -1.075])).unwrap();
    assert!(close(p[0], 0.5, 1e-9));
    let p = price_of(
        &gen(F::ConstantProduct {
            alpha: 1.0,
            n: Some(2),
        }),
        &lv(&[-2.0, -0.5]),
    )
    .unwrap();
    assert!(close(p[0], 0.2, 1e-12) && close(p[1], 0.8, 1e-12));
    // Same reserves through the n-outcome solver (pair family lives on Δ₃ too).
    let cp3 = gen(F::ConstantProduct {
        alpha: 1.0,
        n: Some(3),
    });
    let q = liability_of(&cp3, &price(&[0.2, 0.3, 0.5])).unwrap();
    let p = price_of(&cp3, &q).unwrap();
    assert!(p.max_abs_diff(&price(&[0.2, 0.3, 0.5])) < 1e-9);
}

#[test]
fn price_of_reports_exhausted_liquidity() {
    // g₁ has slopes in [−2.1, 0.9]; q₁ − q₂ = 2 lies beyond them.
    let r = price_of(&g1(), &lv(&[1.0, -1.0]));
    assert!(matches!(
        r,
        Err(pmm_core::error::Error::BoundaryPrice { .. })
    ));
}

#[test]
fn infimal_convolution_examples() {
    let (b1, b2) = (0.7, 1.9);
    let gs = [gen(F::Lmsr { b: b1 }), gen(F::Lmsr { b: b2 })];
    for q in [[0.3, -0.2], [-1.0, 2.0], [4.0, 4.5]] {
        let s = infimal_convolution_split(&gs, &lv(&q)).unwrap();
        assert!(close(s.value, lmsr_cost(b1 + b2, &q), 1e-10), "{q:?}");
        let total = s.parts[0].clone() + s.parts[1].clone();
        assert!(total.max_abs_diff(&lv(&q)) < 1e-12);
    }
    let single = [gen(F::Lmsr { b: 1.0 })];
    let s = infimal_convolution_split(&single, &lv(&[0.4, 0.1])).unwrap();
    let (c, _) = conjugate_value(&single[0], &lv(&[0.4, 0.1])).unwrap();
    assert!(close(s.value, c, 1e-12));
    assert!(s.parts[0].max_abs_diff(&lv(&[0.4, 0.1])) < 1e-15);

    let s = infimal_convolution_split(&[g1(), g2()], &lv(&[-0.45, -2.55])).unwrap();
    assert!(close(s.price[0], 0.7, 1e-9));
    assert!(s.parts[0].max_abs_diff(&lv(&[0.0, -0.9])) < 1e-9);
    assert!(s.parts[1].max_abs_diff(&lv(&[-0.45, -1.65])) < 1e-9);
    assert!(close(s.value, 0.0, 1e-12));
}

#[test]
fn kinked_split_uses_common_fill() {
    // At p = 0.6 g₁ has a kink; the split must still sum to q exactly.
    let agg = [g1(), g2()];
    let p = price(&[0.6, 0.4]);
    let q = Kernel::default()
        .liabilities_at(&agg, &p, &lv(&[0.0, 0.0]))
        .unwrap();
    let mid = liability_of(&agg[0], &p).unwrap() + liability_of(&agg[1], &p).unwrap();
    let z = mid[0] - mid[1];
    let s = infimal_convolution_split(&agg, &lv(&[z - 1.1, -1.1])).unwrap();
    assert!(close(s.price[0], 0.6, 1e-12));
    let sum = s.parts[0].clone() + s.parts[1].clone();
    assert!(sum.max_abs_diff(&lv(&[z - 1.1, -1.1])) < 1e-12);
    assert_eq!(q.len(), 2);
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

#[test]
fn cube_root_hessian_at_uniform() {
    let u = SimplexPrice::<f64>::uniform(3);
    let h = liquidity_matrix(&g_one(), &u).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 2.0 } else { -1.0 };
            assert!(close(h.get(i, j), want, 1e-12));
        }
    }
    let fd = Kernel::default().liquidity_matrix_fd(&g_one(), &u).unwrap();
    assert!(fd.max_abs_diff(&h) < 1e-6);
    let v = lv(&[1.0, 0.0, -1.0]);
    assert!(close(
        directional_liquidity(&g_one(), &u, &v).unwrap(),
        6.0,
        1e-12
    ));
    assert!(close(
        directional_liquidity(&g_two(), &u, &v).unwrap(),
        9.0,
        1e-12
    ));
    let p = lv(&u.to_vec());
    assert!(directional_liquidity(&g_one(), &u, &p).unwrap().abs() < 1e-12);
}

/// The displayed directional formulas for G⁽¹⁾ and G⁽²⁾.
fn dir_one(p: &[f64]) -> f64 {
    2.0 * p[1] * (p[0] / p[2] + p[2] / p[0] + 1.0) / (3.0 * (p[0] * p[1] * p[2]).powf(2.0 / 3.0))
}

fn dir_two(p: &[f64]) -> f64 {
    let (a, b, c) = (p[0], p[1], p[2]);
    // vᵀ∇²Ḡv for v = (1,0,−1), one term per pair.
    0.5 * (b.sqrt() / a.powf(1.5))
        + 0.5 * (b.sqrt() / c.powf(1.5))
        + 0.5 * (c.sqrt() / a.powf(1.5) + a.sqrt() / c.powf(1.5))
        + 1.0 / (a * c).sqrt()
}

#[test]
fn directional_liquidity_along_vanishing_middle_price() {
    let v = lv(&[1.0, 0.0, -1.0]);
    let mut last = f64::INFINITY;
    for k in 1..=8 {
        let p2 = 10f64.powi(-k);
        let p = price(&[(1.0 - p2) / 2.0, p2, (1.0 - p2) / 2.0]);
        let one = directional_liquidity(&g_one(), &p, &v).unwrap();
        let two = directional_liquidity(&g_two(), &p, &v).unwrap();
        assert!(close(
            one,
            dir_one(p.as_slice()),
            1e-9 * dir_one(p.as_slice()).max(1.0)
        ));
        assert!(close(
            two,
            dir_two(p.as_slice()),
            1e-9 * dir_two(p.as_slice())
        ));
        assert!(one < last);
        last = one;
        assert!(two >= 1.0 / (p[0] * p[2]).sqrt());
    }
    // Vanishes like p₂^{1/3}: about 0.011 at p₂ = 1e-8.
    assert!(last < 0.02);
}

#[test]
fn lmsr_hessian_has_price_in_null_space() {
    let g = gen(F::Lmsr { b: 2.5 });
    let p = price(&[0.1, 0.2, 0.3, 0.4]);
    let h = liquidity_matrix(&g, &p).unwrap();
    for (i, r) in h.mul_vec(p.as_slice()).into_iter().enumerate() {
        assert!(r.abs() < 1e-12, "row {i}");
    }
    for i in 0..4 {
        assert!(close(h.get(i, i), 2.5 / p[i] - 2.5, 1e-12));
    }
}

#[test]
fn normalization_examples() {
    let sq = Generator::new_unnormalized(F::PiecewiseQuadratic {
        knots: vec![0.0, 1.0],
        coeffs: vec![[0.0, 0.0, 1.0]],
    })
    .unwrap();
    let n = normalize_generator(&sq, 2).unwrap();
    for k in 0..=10 {
        let p = k as f64 / 10.0;
        assert!(close(n.curve().unwrap().g(p), p * p - p, 1e-15));
    }
    let already = normalize_generator(&g1(), 2).unwrap();
    assert_eq!(already, g1());
    let brier = gen(F::StepLiquidity {
        knots: vec![0.0, 1.0],
        levels: vec![2.0],
    });
    for k in 0..=10 {
        let p = k as f64 / 10.0;
        assert!(close(brier.curve().unwrap().g(p), p * p - p, 1e-15));
    }
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
        gen(F::TabulatedLiquidity {
            grid: vec![0.0, 0.3, 1.0],
            values: vec![1.0, 4.0, 2.0],
            base: Default::default(),
        }),
        g1(),
        g2(),
    ]
}

fn families3() -> Vec<Generator<f64>> {
    vec![
        gen(F::Lmsr { b: 0.9 }),
        g_one(),
        g_two(),
        gen(F::Brier { scale: 3.0 }),
        Generator::sum(&[
            gen(F::Lmsr { b: 0.5 }),
            gen(F::PairProduct {
                i: 0,
                j: 2,
                alpha: 1.0,
            }),
        ]),
    ]
}

/// Prices where a generator's liquidity is positive, so the price round trip
/// is well posed.
fn strictly_liquid(g: &Generator<f64>, p: &SimplexPrice<f64>) -> bool {
    match liquidity_matrix(g, p) {
        Ok(h) => {
            let ev = h.eigenvalues();
            ev.len() >= 2 && ev[1] > 1e-6
        }
        Err(_) => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn duality_round_trip_two(x in 0.01f64..0.99) {
        let p = price(&[x, 1.0 - x]);
        for g in families2() {
            let q = liability_of(&g, &p).unwrap();
            let (c, _) = conjugate_value(&g, &q).unwrap();
            prop_assert!(c.abs() < 1e-8, "{:?}: cost {c}", g.descriptor());
            if strictly_liquid(&g, &p) {
                let back = price_of(&g, &q).unwrap();
                prop_assert!(back.max_abs_diff(&p) < 1e-6, "{:?}", g.descriptor());
            }
        }
    }

    #[test]
    fn duality_round_trip_three(a in 0.02f64..1.0, b in 0.02f64..1.0, c in 0.02f64..1.0) {
        let p = SimplexPrice::normalized(vec![a, b, c]).unwrap();
        for g in families3() {
            let q = liability_of(&g, &p).unwrap();
            let (cost, _) = conjugate_value(&g, &q).unwrap();
            prop_assert!(cost.abs() < 1e-8, "{:?}: cost {cost}", g.descriptor());
            let back = price_of(&g, &q).unwrap();
            prop_assert!(back.max_abs_diff(&p) < 1e-6, "{:?}", g.descriptor());
        }
    }

    #[test]
    fn one_invariance(q0 in -3.0f64..3.0, q1 in -3.0f64..3.0, q2 in -3.0f64..3.0, s in -5.0f64..5.0) {
        for g in [gen(F::Lmsr { b: 1.0 }), g_one()] {
            let q = lv(&[q0, q1, q2]);
            let (c, _) = conjugate_value(&g, &q).unwrap();
            let (cs, _) = conjugate_value(&g, &q.shift(s)).unwrap();
            prop_assert!((cs - c - s).abs() < 1e-8);
        }
    }

    #[test]
    fn conjugate_of_sum(q0 in -2.0f64..2.0, q1 in -2.0f64..2.0, q2 in -2.0f64..2.0, k in 1usize..=3) {
        let all = [gen(F::Lmsr { b: 0.6 }), g_one(), gen(F::Brier { scale: 2.0 })];
        let gs = &all[..k];
        let q = lv(&[q0, q1, q2]);
        let s = infimal_convolution_split(gs, &q).unwrap();
        let (c, _) = conjugate_value(&Generator::sum(gs), &q).unwrap();
        prop_assert!((s.value - c).abs() < 1e-6);
    }

    #[test]
    fn monotonicity(q0 in -2.0f64..2.0, q1 in -2.0f64..2.0, d0 in 0.0f64..1.0, d1 in 0.01f64..1.0) {
        let g = gen(F::UniswapV2 { alpha: 1.0 });
        let q = lv(&[q0, q1]);
        let qh = lv(&[q0 + d0, q1 + d1]);
        prop_assert!(Kernel::default().cost(&g, &qh).unwrap() > Kernel::default().cost(&g, &q).unwrap());
    }
}

#[test]
fn hessian_consistency_at_random_prices() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let k = Kernel::<f64>::default();
    for _ in 0..50 {
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        let p = SimplexPrice::normalized(v).unwrap();
        for g in families3() {
            let a = k.liquidity_matrix(&g, &p).unwrap();
            let f = k.liquidity_matrix_fd(&g, &p).unwrap();
            assert!(
                a.max_abs_diff(&f) <= 1e-4 * a.max_abs().max(1.0),
                "{:?}",
                g.descriptor()
            );
        }
        let x = rng.random_range(0.05..0.95);
        let p2 = price(&[x, 1.0 - x]);
        for g in families2() {
            if g.curve().unwrap().second(x).is_none() {
                continue;
            }
            let a = k.liquidity_matrix(&g, &p2).unwrap();
            let f = k.liquidity_matrix_fd(&g, &p2).unwrap();
            assert!(
                a.max_abs_diff(&f) <= 1e-4 * a.max_abs().max(1.0),
                "{:?} at {x}",
                g.descriptor()
            );
        }
    }
}

#[test]
fn inverse_hessian_duality_two() {
    // ℓ(p) · c″(z) = 1 with c″ from central differences of the numeric cost.
    let k = Kernel::<f64>::default();
    let smooth = [
        gen(F::Lmsr { b: 1.0 }),
        gen(F::UniswapV2 { alpha: 1.5 }),
        gen(F::Brier { scale: 1.0 }),
    ];
    for g in smooth {
        for x in [0.15, 0.4, 0.5, 0.77] {
            let c = g.curve().unwrap();
            let ell = c.second(x).unwrap();
            let q = liability_of(&g, &price(&[x, 1.0 - x])).unwrap();
            let h = 1e-4;
            let cz = |dz: f64| k.cost(&g, &lv(&[q[0] + dz, q[1]])).unwrap();
            let c2 = (cz(h) - 2.0 * cz(0.0) + cz(-h)) / (h * h);
            assert!(
                (ell * c2 - 1.0).abs() < 1e-4,
                "{:?} at {x}: {}",
                g.descriptor(),
                ell * c2
            );
        }
    }
}
