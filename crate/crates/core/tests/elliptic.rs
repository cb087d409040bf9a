//! K(k)/K(k') against an independent adaptive Gauss–Kronrod quadrature of
//! the defining integral.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use cpwchar_core::physics::{ellipk, ellipk_ratio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// 15-point Kronrod estimate and its embedded 7-point Gauss difference.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let (f1, f2) = (f(c - h * XGK[j]), f(c + h * XGK[j]));
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Bisects until the Gauss–Kronrod difference on each piece is below
/// `rel` times the piece's integral.
fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel: f64, depth: u32) -> f64 {
    let (whole, err) = gk15(f, a, b);
    if err <= rel * whole.abs() || depth == 0 {
        return whole;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, rel, depth - 1) + adaptive(f, m, b, rel, depth - 1)
}

/// K as a function of the complementary modulus: the integrand
/// 1/sqrt(1 − k² sin²θ) rewritten as 1/sqrt(cos²θ + k′² sin²θ), which has no
/// cancellation as k → 1.
fn k_of_complement(kc: f64) -> f64 {
    let kc2 = kc * kc;
    adaptive(&|t: f64| 1.0 / (t.cos().powi(2) + kc2 * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 1e-13, 40)
}

#[test]
fn ratio_matches_quadrature_over_random_moduli() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k: f64 = rng.random_range(1e-6..0.999);
        let kc = ((1.0 - k) * (1.0 + k)).sqrt();
        let oracle = k_of_complement(kc) / k_of_complement(k);
        let rel = (ellipk_ratio(k).unwrap() - oracle).abs() / oracle;
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-12, "worst relative error {worst:e}");
    assert!(start.elapsed().as_secs_f64() < 5.0, "took {:?}", start.elapsed());
}

#[test]
fn closed_form_values() {
    // K(1/√2) = Γ(1/4)² / (4√π).
    let k = std::f64::consts::FRAC_1_SQRT_2;
    assert!((ellipk(k).unwrap() - 1.854_074_677_301_372).abs() < 1e-14);
    assert!((ellipk_ratio(k).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(ellipk(0.0).unwrap(), FRAC_PI_2);
    assert_eq!(ellipk_ratio(0.0).unwrap(), 0.0);
    assert!(ellipk(1.0).unwrap().is_infinite());
    assert!(ellipk_ratio(1.0).is_err() && ellipk(-0.1).is_err());
}
