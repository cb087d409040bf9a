use cpwchar_core::physics::{cpw_eeff, log_grid, propagation, CpwGeometry, CpwModel, MU_0};
use cpwchar_core::MaterialParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng) -> MaterialParams {
    MaterialParams::new(
        rng.random_range(5e6..6e7),
        rng.random_range(1.5..5.0),
        rng.random_range(1.0..4.0),
        rng.random_range(0.001..0.04),
    )
    .unwrap()
}

#[test]
fn finite_difference_monotonicity_at_random_points() {
    let geom = CpwGeometry::printed_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let f = 10f64.powf(rng.random_range(7.0..10.3));
        let eval = |q: &MaterialParams| propagation(&geom, q, f).unwrap();
        let base = eval(&p);
        let h = 1e-4;
        let up = |g: &dyn Fn(&mut MaterialParams)| {
            let mut q = p;
            g(&mut q);
            eval(&q)
        };
        assert!(up(&|q| q.sigma_ink *= 1.0 + h).alpha < base.alpha, "dα/dσ at {p:?}, {f}");
        assert!(up(&|q| q.tan_delta *= 1.0 + h).alpha > base.alpha, "dα/dtanδ at {p:?}, {f}");
        assert!(up(&|q| q.eps_fs *= 1.0 + h).beta > base.beta, "dβ/dε_FS at {p:?}, {f}");
        assert!(up(&|q| q.eps_ds *= 1.0 + h).beta > base.beta, "dβ/dε_DS at {p:?}, {f}");
    }
}

#[test]
fn conductor_loss_follows_sqrt_f_in_the_skin_regime() {
    // Thick plating so the skin depth is a small fraction of the metal at
    // every tested frequency.
    let geom = CpwGeometry { t_metal: 20e-6, ..CpwGeometry::printed_fixture() };
    let model = CpwModel::new(&geom).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p = MaterialParams { tan_delta: 0.0, ..random_params(&mut rng) };
        p.validate().unwrap();
        let f = rng.random_range(1.25e9..5e9);
        let skin_depth = (1.0 / (std::f64::consts::PI * 4.0 * f * MU_0 * p.sigma_ink)).sqrt();
        assert!(skin_depth < geom.t_metal / 5.0);
        let (a1, _) = model.loss_components(&p, f);
        let (a4, _) = model.loss_components(&p, 4.0 * f);
        let ratio = a4 / a1;
        assert!((ratio / 2.0 - 1.0).abs() < 0.01, "α_c(4f)/α_c(f) = {ratio} at σ = {}", p.sigma_ink);
    }
}

#[test]
fn dielectric_loss_is_linear_in_frequency_and_tan_delta() {
    let model = CpwModel::new(&CpwGeometry::printed_fixture()).unwrap();
    let p = MaterialParams::new(3e7, 3.2, 1.81, 0.01).unwrap();
    let (_, d1) = model.loss_components(&p, 1e9);
    let (_, d2) = model.loss_components(&p, 3e9);
    assert!((d2 / d1 - 3.0).abs() < 1e-12);
    let (_, d3) = model.loss_components(&MaterialParams { tan_delta: 0.02, ..p }, 1e9);
    assert!((d3 / d1 - 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn effective_permittivity_lies_between_air_and_the_stack(
        eps_fs in 1.0f64..12.0, eps_ds in 1.0f64..12.0, w in 0.2e-3f64..4e-3, gap in 0.05e-3f64..1e-3,
    ) {
        let geom = CpwGeometry { w_center: w, gap, ..CpwGeometry::printed_fixture() };
        let e = cpw_eeff(&geom, &MaterialParams::new(3e7, eps_fs, eps_ds, 0.01).unwrap()).unwrap();
        prop_assert!(e.eps_eff >= 1.0 - 1e-12);
        prop_assert!(e.eps_eff <= eps_fs.max(eps_ds) + 1e-12);
        prop_assert!(e.fill_substrate > 0.0 && e.fill_spacer > 0.0);
        prop_assert!(e.fill_substrate + e.fill_spacer <= 1.0);
        prop_assert!(e.z0 > 0.0);
    }

    #[test]
    fn attenuation_grows_with_frequency(sigma in 5e6f64..6e7, tan_delta in 0.0f64..0.04) {
        let p = MaterialParams::new(sigma, 3.2, 1.81, tan_delta).unwrap();
        let curve = CpwModel::new(&CpwGeometry::printed_fixture())
            .unwrap()
            .sweep_curve(&p, &log_grid(10e6, 20e9, 40).unwrap())
            .unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].alpha >= w[0].alpha && w[1].beta > w[0].beta);
        }
    }
}
