//! Generator families: closed forms, the double-integral pipeline, and the
//! closed-form conjugates.

use pmm_core::convex::{conjugate_value, liability_of};
use pmm_core::generators::{
    conjugate_closed_form, evaluate, g_from_liquidity, quadratic_from_profile, soft_bucket_curve,
    Conjugate1D, Curve, FamilyDescriptor as F, Generator, LiquidityBase, LiquidityFunction,
    StepProfile,
};
use pmm_core::simplex::{LiabilityVector, SimplexPrice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gen(d: F<f64>) -> Generator<f64> {
    Generator::new(d).unwrap()
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

#[test]
fn constant_liquidity_two_is_brier() {
    let prof = StepProfile::new(vec![0.0, 1.0], vec![2.0], vec![]).unwrap();
    let c = g_from_liquidity(&LiquidityFunction::Steps(prof)).unwrap();
    let q = c.as_quadratic().unwrap();
    assert_eq!(q.knots(), &[0.0, 1.0]);
    assert_eq!(q.coeffs(), &[[0.0, -1.0, 1.0]]);
}

#[test]
fn step_liquidity_curves_match_displayed_formulas() {
    let (c1, c2) = (g1(), g2());
    let (c1, c2) = (c1.curve().unwrap(), c2.curve().unwrap());
    for k in 0..=1000 {
        let p = k as f64 / 1000.0;
        let want1 = if p <= 0.6 {
            2.5 * p * p - 2.1 * p
        } else {
            0.9 * (p - 1.0)
        };
        let want2 = if p <= 0.4 {
            -1.8 * p
        } else {
            5.0 * (p - 0.4) * (p - 0.4) - 1.8 * p
        };
        assert!(close(c1.g(p), want1, 1e-14), "g1({p})");
        assert!(close(c2.g(p), want2, 1e-14), "g2({p})");
    }
}

#[test]
fn piecewise_families_close_the_double_integral_loop() {
    let fams = [
        gen(F::Brier { scale: 1.7 }),
        gen(F::BrierBucket {
            alpha: 0.8,
            a: 0.25,
            b: 0.6,
        }),
        gen(F::BrierBucket {
            alpha: 1.0,
            a: 0.0,
            b: 1.0,
        }),
        gen(F::PiecewiseLinear {
            grid: vec![0.1, 0.45, 0.8],
            weights: vec![1.0, 3.0, 0.5],
        }),
        gen(F::PiecewiseQuadratic {
            knots: vec![0.0, 0.5, 1.0],
            coeffs: vec![[0.0, -1.0, 1.0], [-0.25, -0.25, 0.5]],
        }),
        g1(),
        g2(),
        Generator::sum(&[g1(), g2()]),
    ];
    for g in fams {
        let q = g.curve().unwrap().as_quadratic().expect("piecewise family");
        let back = quadratic_from_profile(&q.liquidity_profile());
        let mut worst: f64 = 0.0;
        for k in 0..=1000 {
            let p = k as f64 / 1000.0;
            worst = worst.max((back.g(p) - q.g(p)).abs());
        }
        assert!(worst < 1e-10, "{:?}: {worst:e}", g.descriptor());
    }
}

#[test]
fn conjugates_of_step_curves() {
    let c1 = match conjugate_closed_form(&g1()).unwrap() {
        Conjugate1D::Piecewise(c) => c,
        other => panic!("{other:?}"),
    };
    let c2 = match conjugate_closed_form(&g2()).unwrap() {
        Conjugate1D::Piecewise(c) => c,
        other => panic!("{other:?}"),
    };
    for k in 0..=300 {
        let z = -2.1 + 3.0 * k as f64 / 300.0;
        assert!(
            close(c1.value(z), (z + 2.1) * (z + 2.1) / 10.0, 1e-13),
            "c1({z})"
        );
    }
    for k in 0..=600 {
        let z = -1.8 + 6.0 * k as f64 / 600.0;
        assert!(
            close(c2.value(z), (5.0 * z * z + 58.0 * z + 88.2) / 100.0, 1e-13),
            "c2({z})"
        );
    }
    // Outer pieces: c₁ = 0 below −2.1 (price 0), z + 0 above 0.9 (price 1).
    assert!(close(c1.value(-5.0), 0.0, 1e-15) && close(c1.value(3.0), 3.0, 1e-13));
}

#[test]
fn brier_conjugate_by_grid_supremum() {
    let c = conjugate_closed_form(&gen(F::Brier { scale: 1.0 })).unwrap();
    for k in 0..=80 {
        let z = -2.0 + 4.0 * k as f64 / 80.0;
        let brute = (0..=20_000)
            .map(|i| {
                let p = i as f64 / 20_000.0;
                p * z - (p * p - p)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let sym = if z <= -1.0 {
            0.0
        } else if z <= 1.0 {
            (z + 1.0) * (z + 1.0) / 4.0
        } else {
            z
        };
        assert!(close(c.value(z), sym, 1e-14));
        assert!(close(brute, sym, 1e-8));
    }
}

#[test]
fn closed_form_conjugates_match_numeric_conjugate() {
    let fams = [
        gen(F::Lmsr { b: 1.4 }),
        gen(F::UniswapV2 { alpha: 0.7 }),
        gen(F::Brier { scale: 2.0 }),
        gen(F::BrierBucket {
            alpha: 3.0,
            a: 0.2,
            b: 0.5,
        }),
        gen(F::PiecewiseLinear {
            grid: vec![0.3, 0.5],
            weights: vec![2.0, 1.0],
        }),
        g1(),
        g2(),
        Generator::sum(&[g1(), g2()]),
        Generator::sum(&[gen(F::Lmsr { b: 1.0 }), gen(F::Lmsr { b: 0.5 })]),
    ];
    for g in fams {
        let c = conjugate_closed_form(&g).unwrap();
        for k in 0..=200 {
            let z = -10.0 + 20.0 * k as f64 / 200.0;
            let (num, _) = conjugate_value(&g, &LiabilityVector::new(vec![z, 0.0])).unwrap();
            assert!(
                (c.value(z) - num).abs() < 1e-7,
                "{:?} at {z}",
                g.descriptor()
            );
        }
    }
}

#[test]
fn constant_product_reserves_multiply_to_alpha_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=5 {
        let alpha = 1.7;
        let g = gen(F::ConstantProduct { alpha, n: Some(n) });
        for _ in 0..100 {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            let p = SimplexPrice::normalized(v).unwrap();
            let x = -liability_of(&g, &p).unwrap();
            let prod: f64 = x.as_slice().iter().product();
            assert!((prod / alpha.powi(n as i32) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn evaluate_examples() {
    let l = evaluate(&F::Lmsr { b: 2.0 }).unwrap();
    assert!(close(l.value(&[0.5, 0.5]), -2.0 * 2f64.ln(), 1e-15));
    let cp = evaluate(&F::ConstantProduct {
        alpha: 1.0,
        n: Some(3),
    })
    .unwrap();
    assert!(close(cp.value(&[1.0 / 3.0; 3]), -1.0, 1e-15));
    let u = evaluate(&F::UniswapV2 { alpha: 1.0 }).unwrap();
    let c = u.curve().unwrap();
    assert!(close(c.g(0.5), -1.0, 1e-15) && close(c.slope_mid(0.5), 0.0, 1e-15));
}

#[test]
fn generator_type_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fams: Vec<(Generator<f64>, usize)> = vec![
        (gen(F::Lmsr { b: 1.0 }), 3),
        (
            gen(F::ConstantProduct {
                alpha: 2.0,
                n: Some(4),
            }),
            4,
        ),
        (gen(F::Brier { scale: 1.0 }), 3),
        (
            gen(F::PairProduct {
                i: 0,
                j: 2,
                alpha: 1.0,
            }),
            3,
        ),
        (gen(F::UniswapV2 { alpha: 1.0 }), 2),
        (
            gen(F::V3Bucket {
                alpha: 1.0,
                a: 0.3,
                b: 0.6,
            }),
            2,
        ),
        (
            gen(F::SoftBucket {
                knots: vec![-0.5, 0.0, 0.5, 1.0, 1.5],
                weights: vec![1.0, 0.0, 2.0],
            }),
            2,
        ),
        (g1(), 2),
    ];
    let sample = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    };
    for (g, n) in &fams {
        for _ in 0..200 {
            let (a, b) = (sample(&mut rng, *n), sample(&mut rng, *n));
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            assert!(g.value(&a) <= 1e-12, "{:?} positive", g.descriptor());
            assert!(
                g.value(&m) <= 0.5 * (g.value(&a) + g.value(&b)) + 1e-9,
                "{:?} not convex",
                g.descriptor()
            );
            let grad = g.grad(&a).unwrap();
            let euler: f64 = grad.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!(
                close(euler, g.value(&a), 1e-9),
                "{:?} Euler identity",
                g.descriptor()
            );
        }
        if g.is_pseudobarrier(*n) {
            let mut last = 0.0;
            for k in 2..9 {
                let t = 10f64.powi(-k);
                let mut p = vec![(1.0 - t) / (*n as f64 - 1.0); *n];
                p[0] = t;
                let norm = g
                    .grad(&p)
                    .unwrap()
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                assert!(norm > last, "{:?} gradient must grow", g.descriptor());
                last = norm;
            }
        }
    }
}

#[test]
fn soft_bucket_liquidity_is_tent_weighted() {
    let knots = vec![-0.3, 0.0, 0.3, 0.6, 1.0, 1.4];
    // A single tent at 0.3.
    let c = soft_bucket_curve(&knots, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    let ell = |p: f64| 2.0 * (p * (1.0 - p)).powf(-1.5);
    let tent = |p: f64| {
        if p <= 0.3 {
            p / 0.3
        } else if p <= 0.6 {
            (0.6 - p) / 0.3
        } else {
            0.0
        }
    };
    let h = 1e-4;
    for k in 1..100 {
        let p = k as f64 / 100.0;
        let fd = (c.g(p + h) - 2.0 * c.g(p) + c.g(p - h)) / (h * h);
        let want = tent(p) * ell(p);
        // Second differences straddling the tent's kink carry an O(h) error.
        assert!(
            (fd - want).abs() < 1e-3 * want.max(1.0),
            "p = {p}: {fd} vs {want}"
        );
        let exact = c.second(p).unwrap();
        assert!((exact - want).abs() < 1e-12 * want.max(1.0));
    }
    assert!(close(c.g(0.0), 0.0, 1e-15) && close(c.g(1.0), 0.0, 1e-15));
    let w = [1.0, 2.0, 0.5, 3.0];
    let c = soft_bucket_curve(&knots, &w).unwrap();
    for k in 1..100 {
        let p = k as f64 / 100.0;
        let f = match p {
            p if p <= 0.3 => 1.0 + (2.0 - 1.0) * p / 0.3,
            p if p <= 0.6 => 2.0 + (0.5 - 2.0) * (p - 0.3) / 0.3,
            p => 0.5 + (3.0 - 0.5) * (p - 0.6) / 0.4,
        };
        let fd = (c.g(p + h) - 2.0 * c.g(p) + c.g(p - h)) / (h * h);
        assert!((fd - f * ell(p)).abs() < 1e-3 * (f * ell(p)).max(1.0));
    }
    assert_eq!(soft_bucket_curve(&knots, &[0.0; 4]).unwrap(), Curve::Zero);
}

#[test]
fn tabulated_constant_product_matches_closed_form() {
    // f = f₀ + f₁p on [0,1] with the constant-product base integrates to
    // g = −f₀·4√(p(1−p))·… ; checked here through the equivalent sum of
    // unit-weight shapes: f ≡ 1 is 4× the Uniswap curve.
    let c = g_from_liquidity(&LiquidityFunction::Tabulated {
        grid: vec![0.0, 0.5, 1.0],
        values: vec![1.0, 1.0, 1.0],
        base: LiquidityBase::ConstantProduct,
    })
    .unwrap();
    let u = gen(F::UniswapV2 { alpha: 4.0 });
    let u = u.curve().unwrap();
    for k in 1..1000 {
        let p = k as f64 / 1000.0;
        assert!(close(c.g(p), u.g(p), 1e-10));
    }
}
